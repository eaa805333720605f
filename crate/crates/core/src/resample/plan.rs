//! Quota apportionment.

use serde::{Deserialize, Serialize};

/// Splits `total` into integer parts proportional to `shares` with the
/// largest-remainder rule. Remainder ties go to the lower index. All-zero
/// shares are treated as uniform. The parts always sum to `total`.
pub fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let n = shares.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: f64 = shares.iter().sum();
    let exact: Vec<f64> = if sum > 0.0 {
        shares.iter().map(|s| s / sum * total as f64).collect()
    } else {
        vec![total as f64 / n as f64; n]
    };
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = parts.iter().sum();
    if assigned <= total {
        for &i in order.iter().cycle().take(total - assigned) {
            parts[i] += 1;
        }
    } else {
        // floating-point overshoot; take back from the smallest remainders
        let mut excess = assigned - total;
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if parts[i] > 0 {
                parts[i] -= 1;
                excess -= 1;
            }
        }
    }
    parts
}

/// `total` spread over `n` bases in round-robin order: quotas differ by at most one.
pub fn round_robin(n: usize, total: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let (q, r) = (total / n, total % n);
    (0..n).map(|i| q + usize::from(i < r)).collect()
}

/// Per-base synthetic quotas for one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub label: u32,
    /// Dataset indices of the base samples.
    pub bases: Vec<usize>,
    /// Samples to synthesize from each base, parallel to `bases`.
    pub quotas: Vec<usize>,
    pub total: usize,
}

impl ResamplePlan {
    pub fn new(label: u32, bases: Vec<usize>, quotas: Vec<usize>) -> Self {
        assert_eq!(bases.len(), quotas.len(), "one quota per base");
        let total = quotas.iter().sum();
        Self { label, bases, quotas, total }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_apportionment() {
        assert_eq!(largest_remainder(&[0.25, 0.75], 4), vec![1, 3]);
        assert_eq!(largest_remainder(&[0.8, 0.1, 0.1], 10), vec![8, 1, 1]);
        assert_eq!(largest_remainder(&[0.8, 0.1, 0.1], 5), vec![4, 1, 0]);
        assert_eq!(largest_remainder(&[0.0, 0.0, 0.0], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 2), vec![1, 1, 0]);
    }

    #[test]
    fn round_robin_quotas() {
        assert_eq!(round_robin(4, 10), vec![3, 3, 2, 2]);
        assert_eq!(round_robin(3, 0), vec![0, 0, 0]);
        assert!(round_robin(0, 5).is_empty());
    }

    proptest! {
        #[test]
        fn apportionment_sums_exactly(shares in prop::collection::vec(0.0f64..10.0, 1..40), total in 0usize..5000) {
            let parts = largest_remainder(&shares, total);
            prop_assert_eq!(parts.iter().sum::<usize>(), total);
            let sum: f64 = shares.iter().sum();
            if sum > 0.0 {
                for (p, s) in parts.iter().zip(&shares) {
                    let exact = s / sum * total as f64;
                    prop_assert!((*p as f64 - exact).abs() < 1.0 + 1e-9);
                }
            }
        }
    }
}
