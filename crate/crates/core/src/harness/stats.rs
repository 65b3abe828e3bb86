//! Run-level statistics: divergence detection, convergence speed, summary
//! moments and the one-sided Wilcoxon rank-sum (Mann-Whitney U) test.

use crate::error::{Error, Result};

/// Test losses above this count as diverging.
pub const DIVERGENCE_THRESHOLD: f64 = 1.0;
/// Largest `n + m` for which the rank-sum p-value is computed exactly.
pub const EXACT_LIMIT: usize = 12;

/// True iff the test loss exceeded the threshold at some epoch and was still
/// at or above it at the final epoch. Non-finite losses count as above.
pub fn detect_divergence(test_losses: &[f64]) -> bool {
    let above = |x: f64| !(x <= DIVERGENCE_THRESHOLD);
    let ever = test_losses.iter().any(|&x| above(x));
    let last_ok = test_losses
        .last()
        .is_some_and(|&x| x < DIVERGENCE_THRESHOLD);
    ever && !last_ok
}

/// Whether larger or smaller values of a metric are better.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

/// First epoch (1-based) whose metric is within 95% of the final value:
/// `m >= 0.95 * final` when higher is better, `m <= final / 0.95` when lower
/// is better. `None` for an empty or non-finite history.
pub fn epochs_to_fraction_of_final(history: &[f64], direction: Direction) -> Option<usize> {
    let last = *history.last()?;
    if !last.is_finite() {
        return None;
    }
    history
        .iter()
        .position(|&m| match direction {
            Direction::HigherIsBetter => m >= 0.95 * last,
            Direction::LowerIsBetter => m <= last / 0.95,
        })
        .map(|i| i + 1)
}

/// Mean and standard error (sample std / sqrt(n)); the error is `None` for
/// fewer than two values.
pub fn mean_sem(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}

/// Pooled midranks, doubled so ties stay integral. The first `a.len()`
/// entries belong to `a`.
fn doubled_midranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, midrank (i + j + 2) / 2, doubled
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    (ranks, tie_sizes)
}

/// One-sided p-value for "`a` is stochastically greater than `b`".
///
/// Exact (all `C(n+m, n)` rank assignments, counted with a subset-sum
/// recursion) when `n + m <= 12`; otherwise the normal approximation with
/// tie and continuity corrections.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("rank-sum test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("rank-sum test samples contain NaN"));
    }
    if a.len() + b.len() <= EXACT_LIMIT {
        Ok(exact_p(a, b))
    } else {
        Ok(normal_p(a, b))
    }
}

pub fn exact_p(a: &[f64], b: &[f64]) -> f64 {
    let (ranks, _) = doubled_midranks(a, b);
    let n = a.len();
    let observed: u64 = ranks[..n].iter().sum();
    let max_sum: u64 = ranks.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0f64; max_sum as usize + 1]; n + 1];
    ways[0][0] = 1.0;
    for &r in &ranks {
        for k in (1..=n).rev() {
            for s in (r as usize..=max_sum as usize).rev() {
                ways[k][s] += ways[k - 1][s - r as usize];
            }
        }
    }
    let total: f64 = ways[n].iter().sum();
    let tail: f64 = ways[n][observed as usize..].iter().sum();
    tail / total
}

pub fn normal_p(a: &[f64], b: &[f64]) -> f64 {
    let (ranks, ties) = doubled_midranks(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let big_n = n + m;
    let rank_sum = ranks[..a.len()].iter().sum::<u64>() as f64 / 2.0;
    let u = rank_sum - n * (n + 1.0) / 2.0;
    let mean = n * m / 2.0;
    let tie_term: f64 =
        ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = n * m / 12.0 * ((big_n + 1.0) - tie_term);
    if !(var > 0.0) {
        return 1.0;
    }
    let z = (u - mean - 0.5) / var.sqrt();
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_truth_table() {
        assert!(!detect_divergence(&[0.5, 0.3, 0.2]));
        assert!(detect_divergence(&[0.5, 1.5, 2.0]));
        assert!(!detect_divergence(&[0.5, 1.5, 0.4]));
        assert!(detect_divergence(&[0.5, f64::NAN]));
        assert!(!detect_divergence(&[]));
    }

    #[test]
    fn fully_separated_three_by_three() {
        let p = rank_sum_test(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((p - 0.05).abs() < 1e-15);
        let q = rank_sum_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_give_no_evidence() {
        let a = [1.0, 2.0, 2.0, 5.0];
        assert!(rank_sum_test(&a, &a).unwrap() >= 0.5);
        let big: Vec<f64> = (0..10).map(|i| (i % 4) as f64).collect();
        assert!(rank_sum_test(&big, &big).unwrap() >= 0.5);
    }

    #[test]
    fn empty_rejected() {
        assert!(rank_sum_test(&[], &[1.0]).is_err());
    }

    #[test]
    fn convergence_epochs() {
        assert_eq!(
            epochs_to_fraction_of_final(&[0.5, 0.9, 0.96, 1.0], Direction::HigherIsBetter),
            Some(3)
        );
        assert_eq!(
            epochs_to_fraction_of_final(&[0.5, 0.2, 0.1], Direction::LowerIsBetter),
            Some(3)
        );
        assert_eq!(
            epochs_to_fraction_of_final(&[0.5, 0.104, 0.1], Direction::LowerIsBetter),
            Some(2)
        );
        assert_eq!(
            epochs_to_fraction_of_final(&[], Direction::LowerIsBetter),
            None
        );
    }

    #[test]
    fn sem_is_std_over_root_n() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_sem(&[3.0]).1, None);
    }
}
