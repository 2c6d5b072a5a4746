//! Challenge scoring: specificity over Normal cycles, sensitivity over the
//! three anomalous classes (exact class match), and their mean.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{Error, Result};
use crate::models::NUM_CLASSES;

/// `counts[t][p]`: cycles of true class `t` predicted as `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts(pub [[u64; NUM_CLASSES]; NUM_CLASSES]);

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn row_total(&self, t: usize) -> u64 {
        self.0[t].iter().sum()
    }
}

pub fn confusion(true_labels: &[usize], predicted: &[usize]) -> Result<ConfusionCounts> {
    if true_labels.len() != predicted.len() {
        return Err(Error::contract(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if t >= NUM_CLASSES || p >= NUM_CLASSES {
            return Err(Error::contract(format!("label pair ({t}, {p}) outside 0..{NUM_CLASSES}")));
        }
        counts.0[t][p] += 1;
    }
    Ok(counts)
}

/// Mean of specificity and sensitivity.
pub fn icbhi_score(spec: f64, sen: f64) -> f64 {
    (spec + sen) / 2.0
}

/// Round to one decimal for display.
pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Percentages at full precision plus the counts they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub spec: f64,
    pub sen: f64,
    pub icb: f64,
    pub counts: ConfusionCounts,
}

pub fn icbhi_scores(counts: &ConfusionCounts) -> Result<MetricsReport> {
    let normal = Label::Normal.index();
    let normal_total = counts.row_total(normal);
    let anomalous = [Label::Crackle, Label::Wheeze, Label::Both].map(Label::index);
    let anomalous_total: u64 = anomalous.iter().map(|&t| counts.row_total(t)).sum();
    if normal_total == 0 {
        return Err(Error::UndefinedMetric("no Normal cycles: specificity is undefined".into()));
    }
    if anomalous_total == 0 {
        return Err(Error::UndefinedMetric("no anomalous cycles: sensitivity is undefined".into()));
    }
    let spec = 100.0 * counts.0[normal][normal] as f64 / normal_total as f64;
    let hits: u64 = anomalous.iter().map(|&t| counts.0[t][t]).sum();
    let sen = 100.0 * hits as f64 / anomalous_total as f64;
    Ok(MetricsReport {
        spec,
        sen,
        icb: icbhi_score(spec, sen),
        counts: *counts,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One-decimal table with a row for this report and its confusion matrix.
    pub fn to_markdown(&self, name: &str) -> String {
        let mut s = String::new();
        writeln!(s, "| System | Spec. | Sen. | ICB. |").unwrap();
        writeln!(s, "|---|---|---|---|").unwrap();
        writeln!(
            s,
            "| {name} | {:.1} | {:.1} | {:.1} |",
            round1(self.spec),
            round1(self.sen),
            round1(self.icb)
        )
        .unwrap();
        writeln!(s).unwrap();
        writeln!(s, "| true \\ predicted | normal | crackle | wheeze | both |").unwrap();
        writeln!(s, "|---|---|---|---|---|").unwrap();
        for (t, row) in self.counts.0.iter().enumerate() {
            writeln!(s, "| {} | {} | {} | {} | {} |", Label::ALL[t], row[0], row[1], row[2], row[3]).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_and_constant_predictors() {
        let t = [0, 1, 2, 3, 0, 2];
        let c = confusion(&t, &t).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.0[i][j] > 0, i == j && t.contains(&i));
            }
        }
        let r = icbhi_scores(&c).unwrap();
        assert_eq!((r.spec, r.sen, r.icb), (100.0, 100.0, 100.0));

        let c = confusion(&t, &[0; 6]).unwrap();
        assert!(c.0.iter().all(|row| row[1..].iter().all(|&v| v == 0)));
        let r = icbhi_scores(&c).unwrap();
        assert_eq!((r.spec, r.sen), (100.0, 0.0));
    }

    #[test]
    fn constructed_matrix() {
        // 10 Normal with 8 right; 20 anomalous with 6 exact hits.
        let mut c = ConfusionCounts::default();
        c.0[0] = [8, 1, 1, 0];
        c.0[1] = [3, 2, 2, 1];
        c.0[2] = [2, 1, 3, 0];
        c.0[3] = [3, 1, 1, 1];
        let r = icbhi_scores(&c).unwrap();
        assert!((r.spec - 80.0).abs() < 1e-12);
        assert!((r.sen - 30.0).abs() < 1e-12);
        assert!((r.icb - 55.0).abs() < 1e-12);
    }

    #[test]
    fn random_tally_matches_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let p: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let c = confusion(&t, &p).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let manual = t.iter().zip(&p).filter(|(x, y)| **x == a && **y == b).count() as u64;
                assert_eq!(c.0[a][b], manual);
            }
        }
        assert_eq!(c.total(), 100);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(confusion(&[0, 1], &[0]), Err(Error::Contract(_))));
        assert!(matches!(confusion(&[4], &[0]), Err(Error::Contract(_))));
        let only_normal = confusion(&[0, 0], &[0, 1]).unwrap();
        assert!(matches!(icbhi_scores(&only_normal), Err(Error::UndefinedMetric(_))));
        let only_anomalous = confusion(&[1, 2], &[1, 1]).unwrap();
        assert!(matches!(icbhi_scores(&only_anomalous), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn markdown_rounds_to_one_decimal() {
        let c = confusion(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 0, 0]).unwrap();
        let md = icbhi_scores(&c).unwrap().to_markdown("x");
        assert!(md.contains("| x | 66.7 | 33.3 | 50.0 |"), "{md}");
    }
}
