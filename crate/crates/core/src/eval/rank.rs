use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{median_iqr, scott_knott, EvalError, ScottKnottConfig, SimulationResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub treatment: String,
    pub repeats: usize,
    pub x95_median: f64,
    pub x95_iqr: f64,
    pub wss95_median: f64,
    pub wss95_iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub corpus: String,
    pub candidates: usize,
    pub relevant: usize,
    pub entries: Vec<RankEntry>,
}

/// Groups results by treatment, ranks the X95 samples, and summarizes both
/// metrics. All results must come from one corpus.
pub fn rank_results(results: &[SimulationResult], cfg: &ScottKnottConfig) -> Result<RankReport, EvalError> {
    let first = results.first().ok_or(EvalError::NoTreatments)?;
    for r in results {
        if (&r.corpus, r.candidates, r.relevant) != (&first.corpus, first.candidates, first.relevant) {
            return Err(EvalError::MixedCorpora(
                format!("{} ({}/{})", first.corpus, first.relevant, first.candidates),
                format!("{} ({}/{})", r.corpus, r.relevant, r.candidates),
            ));
        }
    }

    let mut by_treatment: BTreeMap<String, Vec<&SimulationResult>> = BTreeMap::new();
    for r in results {
        by_treatment.entry(r.treatment.to_string()).or_default().push(r);
    }
    let samples: Vec<(String, Vec<f64>)> = by_treatment
        .iter()
        .map(|(name, rs)| (name.clone(), rs.iter().map(|r| r.x95 as f64).collect()))
        .collect();
    let ranks = scott_knott(&samples, cfg)?;

    let mut entries = Vec::with_capacity(ranks.len());
    for (name, rank) in ranks {
        let rs = &by_treatment[&name];
        let x: Vec<f64> = rs.iter().map(|r| r.x95 as f64).collect();
        let w: Vec<f64> = rs.iter().map(|r| r.wss95).collect();
        let (x95_median, x95_iqr) = median_iqr(&x)?;
        let (wss95_median, wss95_iqr) = median_iqr(&w)?;
        entries.push(RankEntry {
            rank,
            treatment: name,
            repeats: rs.len(),
            x95_median,
            x95_iqr,
            wss95_median,
            wss95_iqr,
        });
    }
    entries.sort_by(|a, b| {
        a.rank
            .cmp(&b.rank)
            .then(a.x95_median.total_cmp(&b.x95_median))
            .then_with(|| a.treatment.cmp(&b.treatment))
    });
    Ok(RankReport {
        corpus: first.corpus.clone(),
        candidates: first.candidates,
        relevant: first.relevant,
        entries,
    })
}

impl RankReport {
    pub fn rank_of(&self, treatment: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.treatment == treatment).map(|e| e.rank)
    }
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} candidates, {} relevant)", self.corpus, self.candidates, self.relevant)?;
        writeln!(
            f,
            "{:>4}  {:<9} {:>9} {:>7} {:>8} {:>7}",
            "Rank", "Treatment", "X95 med", "IQR", "WSS med", "IQR"
        )?;
        let mut last_rank = 0;
        for e in &self.entries {
            if e.rank != last_rank && last_rank != 0 {
                writeln!(f, "{}", "-".repeat(50))?;
            }
            last_rank = e.rank;
            writeln!(
                f,
                "{:>4}  {:<9} {:>9.0} {:>7.0} {:>8.2} {:>7.2}",
                e.rank, e.treatment, e.x95_median, e.x95_iqr, e.wss95_median, e.wss95_iqr
            )?;
        }
        Ok(())
    }
}
