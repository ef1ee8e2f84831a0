//! Small statistical checks used by the test suites: goodness-of-fit and
//! homogeneity chi-square tests, and total-variation distance.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson goodness-of-fit test of observed counts against expected
/// probabilities. Returns the statistic and its upper-tail p-value.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> (f64, f64) {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut df = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = total as f64 * p;
        if expected > 0.0 {
            let d = c as f64 - expected;
            stat += d * d / expected;
            df += 1;
        } else {
            assert_eq!(c, 0, "observed count in a zero-probability cell");
        }
    }
    (stat, upper_tail(stat, df.saturating_sub(1)))
}

/// Two-sample homogeneity test: were these two count vectors drawn from one
/// distribution? Cells empty in both samples are ignored.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let total_a: u64 = a.iter().sum();
    let total_b: u64 = b.iter().sum();
    let grand = (total_a + total_b) as f64;
    let mut stat = 0.0;
    let mut live_cells = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        let col = (ca + cb) as f64;
        if col == 0.0 {
            continue;
        }
        live_cells += 1;
        for (count, row_total) in [(ca, total_a), (cb, total_b)] {
            let expected = row_total as f64 * col / grand;
            let d = count as f64 - expected;
            stat += d * d / expected;
        }
    }
    (stat, upper_tail(stat, live_cells.saturating_sub(1)))
}

fn upper_tail(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Total-variation distance between two distributions over the same cells.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalize counts into frequencies.
pub fn frequencies(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gof_accepts_true_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let probs = [0.5, 0.3, 0.2];
        let mut counts = [0u64; 3];
        for _ in 0..50_000 {
            let u: f64 = rng.gen();
            let idx = if u < 0.5 { 0 } else if u < 0.8 { 1 } else { 2 };
            counts[idx] += 1;
        }
        let (_stat, p) = chi_square_gof(&counts, &probs);
        assert!(p > 0.01, "p = {}", p);
    }

    #[test]
    fn gof_rejects_wrong_distribution() {
        let counts = [7_000u64, 3_000];
        let (_stat, p) = chi_square_gof(&counts, &[0.5, 0.5]);
        assert!(p < 1e-6, "p = {}", p);
    }

    #[test]
    fn two_sample_accepts_identical_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut draw = |n: u64| {
            let mut counts = [0u64; 4];
            for _ in 0..n {
                counts[rng.gen_range(0..4usize)] += 1;
            }
            counts
        };
        let a = draw(20_000);
        let b = draw(30_000);
        let (_stat, p) = chi_square_two_sample(&a, &b);
        assert!(p > 0.01, "p = {}", p);
    }

    #[test]
    fn two_sample_rejects_different_sources() {
        let a = [8_000u64, 2_000, 0, 0];
        let b = [2_000u64, 8_000, 0, 0];
        let (_stat, p) = chi_square_two_sample(&a, &b);
        assert!(p < 1e-6, "p = {}", p);
    }

    #[test]
    fn tv_distance_bounds() {
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        let f = frequencies(&[1, 3]);
        assert!((tv_distance(&f, &[0.25, 0.75])).abs() < 1e-12);
    }
}
