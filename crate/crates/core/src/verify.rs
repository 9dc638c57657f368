//! Bundled verification runs behind the `verify-lemmas` CLI verb: each check
//! pits an exhaustive or Monte Carlo measurement against the matching closed
//! form and reports one pass/fail line.

use crate::oracles::{
    self, density_transfer_check, exact_rank_tail, mc_rank_tail, mc_rblt_tail, rblt_tail_bound,
    Filler, Orientation, RbltParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// Exact enumeration: `Pr{rank < k} <= 2^-(n-k)` for every feasible shape.
pub fn check_rank_tail_exact() -> CheckReport {
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for n in 1..=20usize {
        for k in 1..=n {
            if n * k > 20 {
                continue;
            }
            let tail = exact_rank_tail(n, k).expect("within budget").value();
            let bound = 2f64.powi(-((n - k) as i32));
            if tail > bound {
                return CheckReport::new(
                    "rank-tail-exact",
                    false,
                    format!("({n},{k}): exact {tail} exceeds {bound}"),
                );
            }
            worst = worst.max(tail / bound);
            cells += 1;
        }
    }
    CheckReport::new(
        "rank-tail-exact",
        true,
        format!("{cells} shapes enumerated, worst tail/bound ratio {worst:.4}"),
    )
}

/// Monte Carlo rank tail at `n = k + 10`: the deficiency frequency must stay
/// within sampling slack of `2^-10`.
pub fn check_rank_tail_mc(trials: u64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, k) = (74, 64);
    let est = mc_rank_tail(n, k, trials, 0.999, &mut rng).expect("positive trials");
    let bound = 2f64.powi(-10);
    let slack = 3.0 * (bound / trials as f64).sqrt();
    let pass = est.p_hat <= bound + slack;
    CheckReport::new(
        "rank-tail-monte-carlo",
        pass,
        format!(
            "n={n} k={k}: observed {:.6} vs bound {:.6} + slack {:.6}",
            est.p_hat, bound, slack
        ),
    )
}

/// Grid of RBLT shapes x fillers x gamma: empirical tails against the closed
/// forms, plus the hand-evaluated regression pin.
pub fn check_rblt_grid(trials_per_cell: u64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pin = {
        let params = RbltParams {
            w_star: 1,
            r_star: 10,
            r_l: vec![8],
            orientation: Orientation::Vertical,
            filler: Filler::Zero,
        };
        rblt_tail_bound(&params, 5).expect("valid")
    };
    let expect = (1.0 - 2f64.powi(-8)) * 2f64.powi(-7);
    if (pin.value - expect).abs() > 1e-12 {
        return CheckReport::new(
            "rblt-tail-grid",
            false,
            format!("regression pin drifted: {} vs {expect}", pin.value),
        );
    }

    let mut cells = 0;
    let mut binding = 0;
    for w_star in 1..=3usize {
        for r_star in [2usize, 4, 6, 8] {
            for orientation in [Orientation::Vertical, Orientation::Horizontal] {
                let widths: Vec<Vec<usize>> = match orientation {
                    Orientation::Vertical => vec![
                        vec![r_star; w_star],
                        vec![r_star.div_ceil(2); w_star],
                    ],
                    Orientation::Horizontal => vec![
                        vec![r_star; w_star],
                        vec![r_star + 2; w_star],
                    ],
                };
                for r_l in widths {
                    for filler in [Filler::Zero, Filler::IndependentRandom, Filler::CopiedRows] {
                        let params = RbltParams {
                            w_star,
                            r_star,
                            r_l: r_l.clone(),
                            orientation,
                            filler,
                        };
                        let n_star = params.n_star();
                        for gamma in [0usize, 1, 2, 4] {
                            if gamma + 1 > n_star {
                                continue;
                            }
                            let bound = rblt_tail_bound(&params, gamma).expect("valid");
                            let est =
                                mc_rblt_tail(&params, gamma, trials_per_cell, 0.999, &mut rng)
                                    .expect("valid");
                            let half = (est.ci_high - est.ci_low) / 2.0;
                            cells += 1;
                            if !bound.vacuous {
                                binding += 1;
                            }
                            if est.p_hat > bound.value + half {
                                return CheckReport::new(
                                    "rblt-tail-grid",
                                    false,
                                    format!(
                                        "{params:?} gamma={gamma}: observed {:.5} above bound {:.5} + {half:.5}",
                                        est.p_hat, bound.value
                                    ),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    CheckReport::new(
        "rblt-tail-grid",
        true,
        format!("{cells} cells checked ({binding} with informative bounds)"),
    )
}

/// Uniformity of dense-matrix products selected by independent transfer rows.
pub fn check_density_transfer(trials: u64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match density_transfer_check(4, 4, 2, trials, 0.999, &mut rng) {
        Ok(report) => {
            let detail = report
                .cases
                .iter()
                .map(|c| format!("{}: chi2 {:.1}/{:.1}", c.label, c.statistic, c.threshold))
                .collect::<Vec<_>>()
                .join("; ");
            CheckReport::new("density-transfer", report.pass, detail)
        }
        Err(e) => CheckReport::new("density-transfer", false, e.to_string()),
    }
}

/// Cross-oracle agreement: the Monte Carlo estimator covers the exact
/// enumeration value on a shared instance.
pub fn check_mc_exact_agreement(trials: u64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exact = exact_rank_tail(4, 2).expect("within budget").value();
    let est = match oracles::mc_rank_tail(4, 2, trials, 0.999, &mut rng) {
        Ok(e) => e,
        Err(e) => return CheckReport::new("mc-exact-agreement", false, e.to_string()),
    };
    let pass = est.ci_low <= exact && exact <= est.ci_high;
    CheckReport::new(
        "mc-exact-agreement",
        pass,
        format!(
            "exact {exact:.6} vs CI [{:.6}, {:.6}]",
            est.ci_low, est.ci_high
        ),
    )
}

/// The full lemma-verification battery.
pub fn verify_all(trials: u64, seed: u64) -> Vec<CheckReport> {
    vec![
        check_rank_tail_exact(),
        check_rank_tail_mc(trials.max(10_000), seed),
        check_mc_exact_agreement(trials.max(10_000), seed.wrapping_add(1)),
        check_rblt_grid((trials / 20).max(1_000), seed.wrapping_add(2)),
        check_density_transfer(trials.max(40_000), seed.wrapping_add(3)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_at_small_budget() {
        for report in verify_all(20_000, 5) {
            assert!(report.pass, "{}: {}", report.name, report.detail);
        }
    }
}
