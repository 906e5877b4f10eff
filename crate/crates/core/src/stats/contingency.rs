use serde::{Deserialize, Serialize};

use super::special::chi2_sf_df1;
use crate::error::{Error, Result};

/// 2x2 table of E. coli (rows) against total coliforms (columns).
///
/// `n01` counts EC absent / TC present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyCounts {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl ContingencyCounts {
    pub fn new(n00: u64, n01: u64, n10: u64, n11: u64) -> Self {
        ContingencyCounts { n00, n01, n10, n11 }
    }

    /// Tabulate paired labels.
    pub fn from_labels(tc: &[u8], ec: &[u8]) -> Self {
        let mut c = ContingencyCounts::new(0, 0, 0, 0);
        for (&t, &e) in tc.iter().zip(ec) {
            match (e, t) {
                (0, 0) => c.n00 += 1,
                (0, _) => c.n01 += 1,
                (_, 0) => c.n10 += 1,
                _ => c.n11 += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContingencyStats {
    /// Pearson chi-squared with Yates continuity correction.
    pub chi2: f64,
    pub chi2_uncorrected: f64,
    pub p_value: f64,
    pub odds_ratio: f64,
    /// P(EC = 1 | TC = 0).
    pub rate_given_tc0: f64,
    /// P(EC = 1 | TC = 1).
    pub rate_given_tc1: f64,
}

/// Chi-squared test of independence (1 df, Yates-corrected), odds ratio and
/// conditional E. coli rates.
///
/// A zero cell makes the odds ratio undefined; with `haldane` set, 0.5 is
/// added to every cell for the odds ratio instead of failing.
pub fn contingency_stats(counts: ContingencyCounts, haldane: bool) -> Result<ContingencyStats> {
    let n = counts.total();
    if n == 0 {
        return Err(Error::DegenerateTable("empty table".into()));
    }
    let cells = [
        [counts.n00 as f64, counts.n01 as f64],
        [counts.n10 as f64, counts.n11 as f64],
    ];
    let rows = [cells[0][0] + cells[0][1], cells[1][0] + cells[1][1]];
    let cols = [cells[0][0] + cells[1][0], cells[0][1] + cells[1][1]];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(Error::DegenerateTable("a row or column total is zero".into()));
    }
    let nf = n as f64;
    let mut chi2 = 0.0;
    let mut chi2_uncorrected = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = rows[i] * cols[j] / nf;
            let diff = (cells[i][j] - expected).abs();
            chi2 += (diff - 0.5).max(0.0).powi(2) / expected;
            chi2_uncorrected += diff.powi(2) / expected;
        }
    }
    let has_zero = cells.iter().flatten().any(|&c| c == 0.0);
    let odds_ratio = match (has_zero, haldane) {
        (false, _) => (cells[0][0] * cells[1][1]) / (cells[0][1] * cells[1][0]),
        (true, true) => ((cells[0][0] + 0.5) * (cells[1][1] + 0.5)) / ((cells[0][1] + 0.5) * (cells[1][0] + 0.5)),
        (true, false) => {
            return Err(Error::DegenerateTable(
                "zero cell; odds ratio undefined without the Haldane correction".into(),
            ))
        }
    };
    Ok(ContingencyStats {
        chi2,
        chi2_uncorrected,
        p_value: chi2_sf_df1(chi2),
        odds_ratio,
        rate_given_tc0: cells[1][0] / cols[0],
        rate_given_tc1: cells[1][1] / cols[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_table_statistics() {
        let s = contingency_stats(ContingencyCounts::new(216, 458, 49, 1484), false).unwrap();
        assert!((s.chi2 - 366.11).abs() < 0.5, "chi2 = {}", s.chi2);
        assert!((s.chi2_uncorrected - 368.8).abs() < 0.5, "uncorrected = {}", s.chi2_uncorrected);
        assert!(s.p_value < 1e-4);
        assert!((s.odds_ratio - 14.28).abs() < 0.02);
        assert!((s.rate_given_tc0 - 0.185).abs() < 1e-3);
        assert!((s.rate_given_tc1 - 0.764).abs() < 1e-3);
    }

    #[test]
    fn independent_table() {
        let s = contingency_stats(ContingencyCounts::new(50, 50, 50, 50), false).unwrap();
        assert_eq!(s.odds_ratio, 1.0);
        assert!(s.chi2 >= 0.0 && s.chi2 < 1e-9);
        assert_eq!(s.p_value, 1.0);
    }

    #[test]
    fn zero_cell_needs_haldane() {
        let c = ContingencyCounts::new(10, 0, 5, 5);
        assert!(matches!(contingency_stats(c, false), Err(Error::DegenerateTable(_))));
        let s = contingency_stats(c, true).unwrap();
        assert!((s.odds_ratio - (10.5 * 5.5) / (0.5 * 5.5)).abs() < 1e-12);
    }

    #[test]
    fn tabulates_labels() {
        let c = ContingencyCounts::from_labels(&[0, 1, 1, 0], &[0, 0, 1, 1]);
        assert_eq!(c, ContingencyCounts::new(1, 1, 1, 1));
    }
}
