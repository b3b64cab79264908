use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, StateId};
use crate::rng::{self, tag};

/// Balanced start positions for tournaments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeningBook {
    pub states: Vec<StateId>,
    pub requested: usize,
    /// Fewer qualifying states existed than were requested.
    pub partial: bool,
}

/// Values divided by their largest magnitude when that exceeds one.
pub fn scale_to_unit(values: &[f64]) -> Vec<f64> {
    let m = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    values.iter().map(|v| v / m).collect()
}

/// States reachable by exactly `plies` moves from the initial state without the game ending.
pub fn ply_layer(model: &dyn MdpModel, plies: usize) -> BTreeSet<StateId> {
    let mut layer = BTreeSet::from([model.initial_state()]);
    for _ in 0..plies {
        let mut next = BTreeSet::new();
        for &s in &layer {
            for a in 0..model.action_count(s) {
                let t = model.transition(s, a);
                if !t.terminal {
                    next.insert(t.next_state);
                }
            }
        }
        layer = next;
    }
    layer
}

/// Samples `count` distinct ply-`plies` positions whose scaled value lies in `window`.
///
/// `values` are oracle values from the perspective of the player to move,
/// already scaled to `[-1, 1]`. Returns a partial book with a warning if too
/// few positions qualify.
pub fn generate_opening_book(
    model: &dyn MdpModel,
    values: &[f64],
    plies: usize,
    window: [f64; 2],
    count: usize,
    seed: u64,
) -> Result<OpeningBook> {
    if !model.two_player() {
        return Err(Error::Validation(format!("opening books need a two-player model, {} is not", model.name())));
    }
    if values.len() != model.state_count() {
        return Err(Error::Validation(format!(
            "{} values for {} states",
            values.len(),
            model.state_count()
        )));
    }
    let [lo, hi] = window;
    let mut qualifying: Vec<StateId> = ply_layer(model, plies)
        .into_iter()
        .filter(|&s| values[s] >= lo && values[s] <= hi)
        .collect();
    qualifying.shuffle(&mut rng::stream(rng::key(&[seed, tag::BOOK])));
    let partial = qualifying.len() < count;
    if partial {
        log::warn!(
            "opening book: only {} of {count} requested positions qualify",
            qualifying.len()
        );
    }
    qualifying.truncate(count);
    Ok(OpeningBook {
        states: qualifying,
        requested: count,
        partial,
    })
}
