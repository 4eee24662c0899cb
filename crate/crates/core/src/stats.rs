//! Paired Wilcoxon signed-rank test and Holm-Bonferroni adjustment.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, UqdError};

/// Largest number of non-zero differences handled by the exact null
/// distribution.
pub const EXACT_LIMIT: usize = 20;
pub const MIN_PAIRS: usize = 5;

/// Mid-ranks of `values` (1-based), ties sharing the average rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided p-value of the paired signed-rank test on `a - b`.
///
/// Zero differences are dropped and ties get mid-ranks. Up to
/// [`EXACT_LIMIT`] non-zero differences the p-value comes from the exact
/// null distribution of the positive-rank sum; above it, from the normal
/// approximation with tie and continuity corrections. When every difference
/// is zero there is no evidence and the p-value is 1.
pub fn paired_rank_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(UqdError::InvalidInput(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < MIN_PAIRS {
        return Err(UqdError::InvalidInput(format!(
            "signed-rank test needs at least {MIN_PAIRS} pairs, got {}",
            a.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&abs);
    if diffs.len() <= EXACT_LIMIT {
        Ok(exact_p(&diffs, &ranks))
    } else {
        Ok(normal_p(&diffs, &ranks, &abs))
    }
}

/// Exact two-sided p-value. Doubled mid-ranks are integers, so the null
/// distribution of the positive-rank sum is counted exactly by dynamic
/// programming over those integers.
fn exact_p(diffs: &[f64], ranks: &[f64]) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed: usize = diffs.iter().zip(&doubled).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    // Compare |2W - total| with the observed deviation, in doubled units.
    let dev = |s: usize| (2 * s).abs_diff(total);
    let obs_dev = dev(observed);
    let extreme: u64 = (0..=total).filter(|&s| dev(s) >= obs_dev).map(|s| counts[s]).sum();
    let all = 2f64.powi(diffs.len() as i32);
    (extreme as f64 / all).min(1.0)
}

fn normal_p(diffs: &[f64], ranks: &[f64], abs: &[f64]) -> f64 {
    let n = diffs.len() as f64;
    let w: f64 = diffs.iter().zip(ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Holm-Bonferroni step-down adjustment; results in input order.
pub fn holm_bonferroni(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (j, &i) in order.iter().enumerate() {
        let scaled = ((m - j) as f64 * pvals[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_lists_give_one() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(paired_rank_test(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn all_positive_n6() {
        let a = [2.0, 3.0, 4.5, 5.0, 7.0, 9.0];
        let b = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!((paired_rank_test(&a, &b).unwrap() - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn too_few_pairs() {
        assert!(paired_rank_test(&[1.0; 4], &[0.0; 4]).is_err());
        assert!(paired_rank_test(&[1.0; 5], &[0.0; 6]).is_err());
    }

    #[test]
    fn holm_example() {
        let adj = holm_bonferroni(&[0.01, 0.04, 0.03]);
        let expected = [0.03, 0.06, 0.06];
        for (x, e) in adj.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15, "{adj:?}");
        }
    }

    #[test]
    fn holm_caps_at_one() {
        assert_eq!(holm_bonferroni(&[0.5, 0.9]), vec![1.0, 1.0]);
        assert!(holm_bonferroni(&[]).is_empty());
    }

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(mid_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn normal_branch_is_sane() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 + 0.5).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let p = paired_rank_test(&a, &b).unwrap();
        assert!(p < 1e-5, "{p}");
        let c: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (i as f64 + 1.0)).collect();
        let zero = vec![0.0; 30];
        let p = paired_rank_test(&c, &zero).unwrap();
        assert!(p > 0.5, "{p}");
    }
}
