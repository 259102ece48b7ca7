use crate::popularity::{BinnedDistribution, N_BINS};

/// `Σ_j Ĥ_j ln(Ĥ_j / R̂_j)` over the smoothed bin distributions, in nats.
///
/// Bins where the history has no mass contribute nothing; with positive
/// smoothing every term is finite.
pub fn kl_divergence(history: &BinnedDistribution, recommended: &BinnedDistribution) -> f64 {
    let kl: f64 = history
        .normalized
        .iter()
        .zip(&recommended.normalized)
        .filter(|(&h, _)| h > 0.0)
        .map(|(&h, &r)| h * (h / r).ln())
        .sum();
    // rounding can leave a tiny negative sum for identical inputs
    kl.max(0.0)
}

/// `(C − D) / (C + D)` over all bin pairs ranked by count. Pairs tied in
/// either distribution count as neither concordant nor discordant; `None`
/// when no pair is untied.
pub fn kendall_tau_binned(history: &[u64; N_BINS], recommended: &[u64; N_BINS]) -> Option<f64> {
    let mut net = 0i64;
    let mut untied = 0i64;
    for j in 0..N_BINS {
        for k in j + 1..N_BINS {
            let s = (history[j].cmp(&history[k]) as i64) * (recommended[j].cmp(&recommended[k]) as i64);
            net += s;
            untied += s.abs();
        }
    }
    (untied > 0).then(|| net as f64 / untied as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binned(counts: [u64; N_BINS], eps: f64) -> BinnedDistribution {
        BinnedDistribution::from_counts(counts, eps)
    }

    /// Concordant/discordant tally over all ordered pairs, halved.
    fn tau_oracle(h: &[u64; N_BINS], r: &[u64; N_BINS]) -> Option<f64> {
        let (mut c, mut d) = (0u32, 0u32);
        for j in 0..N_BINS {
            for k in 0..N_BINS {
                if j == k {
                    continue;
                }
                let above_h = h[j] > h[k];
                let above_r = r[j] > r[k];
                let below_h = h[j] < h[k];
                let below_r = r[j] < r[k];
                if (above_h && above_r) || (below_h && below_r) {
                    c += 1;
                } else if (above_h && below_r) || (below_h && above_r) {
                    d += 1;
                }
            }
        }
        let (c, d) = (c / 2, d / 2);
        (c + d > 0).then(|| (c as f64 - d as f64) / (c + d) as f64)
    }

    #[test]
    fn kl_identity() {
        let h = binned([3, 1, 0, 0, 2, 0, 0, 0, 0, 9], 1e-10);
        assert_eq!(kl_divergence(&h, &h), 0.0);
    }

    #[test]
    fn kl_hand_value() {
        // 0.75 ln 1.5 + 0.25 ln 0.5
        let h = binned([3, 1, 0, 0, 0, 0, 0, 0, 0, 0], 1e-10);
        let r = binned([2, 2, 0, 0, 0, 0, 0, 0, 0, 0], 1e-10);
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((expected - 0.1308).abs() < 1e-4);
        assert!((kl_divergence(&h, &r) - expected).abs() < 1e-8);
    }

    #[test]
    fn kl_penalizes_missing_recommendation_mass() {
        let h = binned([5, 5, 0, 0, 0, 0, 0, 0, 0, 0], 1e-10);
        let r = binned([0, 0, 0, 0, 0, 0, 0, 0, 0, 10], 1e-10);
        assert!(kl_divergence(&h, &r) > 10.0);
    }

    #[test]
    fn tau_identical_and_reversed() {
        let h = [9, 8, 7, 6, 5, 4, 3, 2, 1, 0];
        let r = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
        assert_eq!(kendall_tau_binned(&h, &h), Some(1.0));
        assert_eq!(kendall_tau_binned(&h, &r), Some(-1.0));
    }

    #[test]
    fn tau_with_ties() {
        // 21 concordant, 1 discordant
        let h = [2, 2, 1, 0, 0, 0, 0, 0, 0, 0];
        let r = [1, 2, 2, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(tau_oracle(&h, &r), Some(20.0 / 22.0));
        assert_eq!(kendall_tau_binned(&h, &r), Some(20.0 / 22.0));
    }

    #[test]
    fn tau_all_tied_is_undefined() {
        assert_eq!(kendall_tau_binned(&[4; N_BINS], &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]), None);
    }

    proptest! {
        #[test]
        fn tau_matches_pair_enumeration(h in prop::array::uniform10(0u64..6), r in prop::array::uniform10(0u64..6)) {
            let tau = kendall_tau_binned(&h, &r);
            prop_assert_eq!(tau, tau_oracle(&h, &r));
            if let Some(t) = tau {
                prop_assert!((-1.0..=1.0).contains(&t));
            }
        }

        #[test]
        fn tau_antisymmetric_on_reversal(perm in Just((0u64..10).collect::<Vec<_>>()).prop_shuffle(),
                                         other in Just((0u64..10).collect::<Vec<_>>()).prop_shuffle()) {
            let h: [u64; N_BINS] = perm.clone().try_into().unwrap();
            let r: [u64; N_BINS] = other.try_into().unwrap();
            let reversed = r.map(|x| 9 - x);
            prop_assert_eq!(kendall_tau_binned(&h, &r).unwrap(), -kendall_tau_binned(&h, &reversed).unwrap());
        }

        #[test]
        fn kl_non_negative(h in prop::array::uniform10(0u64..50), r in prop::array::uniform10(0u64..50)) {
            prop_assume!(h.iter().sum::<u64>() > 0 && r.iter().sum::<u64>() > 0);
            let kl = kl_divergence(&binned(h, 1e-10), &binned(r, 1e-10));
            prop_assert!(kl >= 0.0 && kl.is_finite());
            if h == r {
                prop_assert!(kl < 1e-8);
            }
        }
    }
}
