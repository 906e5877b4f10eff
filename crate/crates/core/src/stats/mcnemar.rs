use serde::{Deserialize, Serialize};

use super::special::chi2_sf_df1;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Reference correct, candidate wrong.
    pub b: usize,
    /// Reference wrong, candidate correct.
    pub c: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// McNemar's test on paired correctness vectors, continuity-corrected.
/// No discordant pairs gives statistic 0 and p = 1.
pub fn mcnemar(ref_correct: &[bool], cand_correct: &[bool]) -> Result<McNemarResult> {
    if ref_correct.len() != cand_correct.len() {
        return Err(Error::Parameter(format!(
            "correctness vectors differ in length ({} vs {})",
            ref_correct.len(),
            cand_correct.len()
        )));
    }
    let b = ref_correct.iter().zip(cand_correct).filter(|(r, c)| **r && !**c).count();
    let c = ref_correct.iter().zip(cand_correct).filter(|(r, c)| !**r && **c).count();
    if b + c == 0 {
        return Ok(McNemarResult { b, c, statistic: 0.0, p_value: 1.0 });
    }
    let diff = (b as f64 - c as f64).abs();
    let statistic = (diff - 1.0).max(0.0).powi(2) / (b + c) as f64;
    Ok(McNemarResult {
        b,
        c,
        statistic,
        p_value: chi2_sf_df1(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors(b: usize, c: usize, agree: usize) -> (Vec<bool>, Vec<bool>) {
        let mut r = Vec::new();
        let mut k = Vec::new();
        for _ in 0..b {
            r.push(true);
            k.push(false);
        }
        for _ in 0..c {
            r.push(false);
            k.push(true);
        }
        for i in 0..agree {
            r.push(i % 2 == 0);
            k.push(i % 2 == 0);
        }
        (r, k)
    }

    #[test]
    fn ten_versus_two() {
        let (r, k) = vectors(10, 2, 30);
        let res = mcnemar(&r, &k).unwrap();
        assert_eq!((res.b, res.c), (10, 2));
        assert!((res.statistic - 49.0 / 12.0).abs() < 1e-12);
        assert!((res.p_value - 0.043).abs() < 1e-3);
    }

    #[test]
    fn balanced_discordance() {
        for n in 1..20 {
            let (r, k) = vectors(n, n, 5);
            let res = mcnemar(&r, &k).unwrap();
            assert_eq!(res.statistic, 0.0);
            assert_eq!(res.p_value, 1.0);
        }
    }

    #[test]
    fn identical_predictions() {
        let (r, _) = vectors(0, 0, 10);
        let res = mcnemar(&r, &r).unwrap();
        assert_eq!((res.statistic, res.p_value), (0.0, 1.0));
        assert!(mcnemar(&[true], &[]).is_err());
    }
}
