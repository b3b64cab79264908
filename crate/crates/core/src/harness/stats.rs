use serde::{Deserialize, Serialize};

/// One-sided 95% critical value of the standard normal.
pub const Z_95_ONE_SIDED: f64 = 1.645;

/// Mean with standard error; the reported interval is `mean ± 2·SEM`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for fewer than two samples.
    pub sem: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, sem: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sem = if n < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { n, mean, sem }
    }

    pub fn half_width(&self) -> f64 {
        2.0 * self.sem
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width()
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width()
    }
}

/// Paired comparison of `a` against `b` on matched samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    /// Summary of `a - b`.
    pub diff: Summary,
    /// `mean / sem`; infinite when every difference is equal and nonzero.
    pub z: f64,
}

impl PairedTest {
    /// Panics if the samples have different lengths.
    pub fn new(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len(), "paired samples must have equal length");
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let diff = Summary::of(&d);
        let z = if diff.sem > 0.0 {
            diff.mean / diff.sem
        } else if diff.mean == 0.0 {
            0.0
        } else {
            diff.mean.signum() * f64::INFINITY
        };
        Self { diff, z }
    }

    /// `a` exceeds `b` at one-sided 95%.
    pub fn greater(&self) -> bool {
        self.z > Z_95_ONE_SIDED
    }

    /// `a` is not below `b` beyond the 95% interval of the difference.
    pub fn not_less(&self) -> bool {
        self.diff.mean >= -self.diff.half_width()
    }
}
