//! Review-cost model: every screened title/abstract costs `c_abstract`, every
//! full-text read costs an additional `c_fulltext`.

use serde::{Deserialize, Serialize};

use super::SimulationResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_abstract: f64,
    pub c_fulltext: f64,
}

impl Default for CostModel {
    /// One unit per abstract, nine per full text.
    fn default() -> Self {
        CostModel {
            c_abstract: 1.0,
            c_fulltext: 9.0,
        }
    }
}

/// What a prioritized review consumed, and what a full review would need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReviewEffort {
    pub candidates: usize,
    /// Title/abstract screens performed.
    pub reviewed: usize,
    /// Full-text reads performed, when known.
    pub fulltext_reviewed: Option<usize>,
    /// Studies a full review would read in full text, when known.
    pub abstract_relevant_total: Option<usize>,
    /// Relevant studies the prioritized review missed.
    pub missed_relevant: usize,
}

impl ReviewEffort {
    /// Worst-case effort of a simulated run: full-text counts unknown.
    pub fn from_result(result: &SimulationResult) -> Self {
        ReviewEffort {
            candidates: result.candidates,
            reviewed: result.x95,
            fulltext_reviewed: None,
            abstract_relevant_total: None,
            missed_relevant: result.missed.len(),
        }
    }
}

/// Fraction of the full-review cost saved.
///
/// With both full-text counts known the saving is
/// `1 − (reviewed·C_A + fulltext·C_D) / (N·C_A + A·C_D)`. Otherwise every
/// screened study is assumed to need a full-text read and the only
/// remaining full-text reads are the missed ones:
/// `1 − reviewed·(C_A + C_D) / ((reviewed + missed)·C_D + N·C_A)`.
/// A zero full-review cost yields 0.
pub fn cost_saving(effort: &ReviewEffort, model: &CostModel) -> f64 {
    let ca = model.c_abstract;
    let cd = model.c_fulltext;
    let n = effort.candidates as f64;
    let x = effort.reviewed as f64;
    let (spent, full) = match (effort.fulltext_reviewed, effort.abstract_relevant_total) {
        (Some(ft), Some(total)) => (x * ca + ft as f64 * cd, n * ca + total as f64 * cd),
        _ => (
            x * (ca + cd),
            (x + effort.missed_relevant as f64) * cd + n * ca,
        ),
    };
    if full <= 0.0 {
        tracing::warn!("full-review cost is zero; reporting no saving");
        return 0.0;
    }
    1.0 - spent / full
}
