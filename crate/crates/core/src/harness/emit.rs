use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::episodes::{EpisodeRecord, EPISODE_COLUMNS};
use super::spec::OutputFormat;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes episode records as CSV (header always present) or as a JSON array.
pub fn emit_results(records: &[EpisodeRecord], format: OutputFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_results(records, format, BufWriter::new(file)).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Like [`emit_results`] on any writer.
pub fn write_results(records: &[EpisodeRecord], format: OutputFormat, mut out: impl Write) -> Result<()> {
    let here = Path::new("<writer>");
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(EPISODE_COLUMNS).map_err(csv_err(here))?;
            for r in records {
                w.serialize(r).map_err(csv_err(here))?;
            }
            w.flush().map_err(io_err(here))?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, records)?;
            out.write_all(b"\n").map_err(io_err(here))?;
        }
    }
    out.flush().map_err(io_err(here))
}

/// Reads records written by [`emit_results`] in CSV format.
pub fn read_csv_records(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(EPISODE_COLUMNS) {
        return Err(Error::Validation(format!(
            "{}: unexpected columns {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

/// Reads records written by [`emit_results`] in JSON format.
pub fn read_json_records(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
