//! Per-link transmission schedules and Bernoulli loss outcomes.
//!
//! Two schedule kinds are supported: deterministic regular (one opportunity
//! per link at every integer slot, times kept as exact whole numbers) and
//! Poisson (exponential inter-arrival accumulation truncated at the horizon).

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("traffic needs at least one link")]
    NoLinks,
    #[error("success probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("poisson rate {0} outside (0, 1]")]
    BadRate(f64),
    #[error("poisson traffic requires per-link rates")]
    MissingRates,
    #[error("per-link parameter lists have unequal lengths")]
    LengthMismatch,
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Regular,
    Poisson,
}

/// Traffic parameters for a line of `L` links: per-link success probabilities
/// and, for Poisson schedules, per-link transmission rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub kind: ScheduleKind,
    pub p: Vec<f64>,
    pub lambda: Option<Vec<f64>>,
}

impl TrafficSpec {
    pub fn regular(p: Vec<f64>) -> Result<Self, TrafficError> {
        let spec = Self {
            kind: ScheduleKind::Regular,
            p,
            lambda: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn poisson(lambda: Vec<f64>, p: Vec<f64>) -> Result<Self, TrafficError> {
        let spec = Self {
            kind: ScheduleKind::Poisson,
            p,
            lambda: Some(lambda),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn links(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.p.is_empty() {
            return Err(TrafficError::NoLinks);
        }
        for &p in &self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(TrafficError::BadProbability(p));
            }
        }
        match (self.kind, &self.lambda) {
            (ScheduleKind::Poisson, None) => return Err(TrafficError::MissingRates),
            (_, Some(l)) => {
                if l.len() != self.p.len() {
                    return Err(TrafficError::LengthMismatch);
                }
                for &r in l {
                    if !(r > 0.0 && r <= 1.0) {
                        return Err(TrafficError::BadRate(r));
                    }
                }
            }
            (ScheduleKind::Regular, None) => {}
        }
        Ok(())
    }
}

/// One transmission opportunity. Links are 1-based; regular times are whole
/// numbers, Poisson times continuous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEvent {
    pub link: usize,
    pub time: f64,
    pub success: bool,
}

/// Per-link opportunity times over `(0, horizon]`, success still undetermined
/// (`success` initialized false). Regular schedules draw nothing from the
/// stream; Poisson schedules consume one exponential gap per opportunity,
/// link by link.
pub fn build_schedule<R: Rng + ?Sized>(
    spec: &TrafficSpec,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<Vec<LinkEvent>>, TrafficError> {
    spec.validate()?;
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(TrafficError::BadHorizon(horizon));
    }
    let mut out = Vec::with_capacity(spec.links());
    match spec.kind {
        ScheduleKind::Regular => {
            let slots = horizon.floor() as u64;
            for link in 1..=spec.links() {
                out.push(
                    (1..=slots)
                        .map(|t| LinkEvent {
                            link,
                            time: t as f64,
                            success: false,
                        })
                        .collect(),
                );
            }
        }
        ScheduleKind::Poisson => {
            let rates = spec.lambda.as_ref().expect("validated");
            for (i, &rate) in rates.iter().enumerate() {
                let exp = Exp::new(rate).expect("validated rate");
                let mut events = Vec::new();
                let mut t = 0.0f64;
                loop {
                    t += exp.sample(rng);
                    if t > horizon {
                        break;
                    }
                    events.push(LinkEvent {
                        link: i + 1,
                        time: t,
                        success: false,
                    });
                }
                out.push(events);
            }
        }
    }
    Ok(out)
}

/// Marks each opportunity successful independently with its link's
/// probability. Draw order is link-major, event-minor.
pub fn apply_losses<R: Rng + ?Sized>(
    schedule: &mut [Vec<LinkEvent>],
    p: &[f64],
    rng: &mut R,
) -> Result<(), TrafficError> {
    if schedule.len() != p.len() {
        return Err(TrafficError::LengthMismatch);
    }
    for (events, &pi) in schedule.iter_mut().zip(p) {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(TrafficError::BadProbability(pi));
        }
        for ev in events.iter_mut() {
            ev.success = rng.gen_bool(pi);
        }
    }
    Ok(())
}

/// Equivalent traffic parameters: the minimum per-link rate (capacity
/// denominator), the minimum adjacent-parameter gap, and whether all
/// per-link parameters are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalentParams {
    pub p: f64,
    /// `min_i |param_i - param_{i-1}|`; undefined for a single link.
    pub gamma_e: Option<f64>,
    pub unequal: bool,
}

pub fn equivalent_min_param(spec: &TrafficSpec) -> Result<EquivalentParams, TrafficError> {
    spec.validate()?;
    let params: Vec<f64> = match spec.kind {
        ScheduleKind::Regular => spec.p.clone(),
        ScheduleKind::Poisson => {
            let l = spec.lambda.as_ref().expect("validated");
            l.iter().zip(&spec.p).map(|(a, b)| a * b).collect()
        }
    };
    let p = params.iter().cloned().fold(f64::INFINITY, f64::min);
    let gamma_e = if params.len() > 1 {
        Some(
            params
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(f64::INFINITY, f64::min),
        )
    } else {
        None
    };
    let mut unequal = true;
    'outer: for i in 0..params.len() {
        for j in (i + 1)..params.len() {
            if params[i] == params[j] {
                unequal = false;
                break 'outer;
            }
        }
    }
    Ok(EquivalentParams { p, gamma_e, unequal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{correlation, wilson_interval};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn regular_schedule_exact_slots() {
        let spec = TrafficSpec::regular(vec![0.9, 0.5]).unwrap();
        let sched = build_schedule(&spec, 5.0, &mut rng(0)).unwrap();
        assert_eq!(sched.len(), 2);
        for (li, events) in sched.iter().enumerate() {
            assert_eq!(events.len(), 5);
            for (i, ev) in events.iter().enumerate() {
                assert_eq!(ev.time, (i + 1) as f64);
                assert_eq!(ev.link, li + 1);
            }
        }
    }

    #[test]
    fn regular_fractional_horizon_floors() {
        let spec = TrafficSpec::regular(vec![1.0]).unwrap();
        let sched = build_schedule(&spec, 0.5, &mut rng(0)).unwrap();
        assert!(sched[0].is_empty());
    }

    #[test]
    fn nonpositive_horizon_rejected() {
        let spec = TrafficSpec::regular(vec![1.0]).unwrap();
        assert!(matches!(
            build_schedule(&spec, 0.0, &mut rng(0)),
            Err(TrafficError::BadHorizon(_))
        ));
    }

    #[test]
    fn poisson_counts_near_rate_times_horizon() {
        // lambda = 0.5, horizon = 1e4, 100 trials: mean count within 1% of 5000
        let spec = TrafficSpec::poisson(vec![0.5], vec![1.0]).unwrap();
        let mut r = rng(1);
        let mut total = 0usize;
        let trials = 100;
        for _ in 0..trials {
            total += build_schedule(&spec, 1e4, &mut r).unwrap()[0].len();
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 5000.0).abs() < 50.0, "mean = {mean}");
    }

    #[test]
    fn poisson_times_sorted_within_horizon() {
        let spec = TrafficSpec::poisson(vec![0.8, 0.3], vec![0.9, 0.9]).unwrap();
        let sched = build_schedule(&spec, 200.0, &mut rng(2)).unwrap();
        for events in &sched {
            for w in events.windows(2) {
                assert!(w[0].time < w[1].time);
            }
            assert!(events.iter().all(|e| e.time > 0.0 && e.time <= 200.0));
        }
    }

    #[test]
    fn lossless_link_all_succeed() {
        let spec = TrafficSpec::regular(vec![1.0]).unwrap();
        let mut sched = build_schedule(&spec, 1000.0, &mut rng(3)).unwrap();
        apply_losses(&mut sched, &spec.p, &mut rng(4)).unwrap();
        assert!(sched[0].iter().all(|e| e.success));
    }

    #[test]
    fn loss_fraction_within_wilson_ci() {
        let spec = TrafficSpec::regular(vec![0.5]).unwrap();
        let mut sched = build_schedule(&spec, 1e5, &mut rng(5)).unwrap();
        apply_losses(&mut sched, &spec.p, &mut rng(6)).unwrap();
        let succ = sched[0].iter().filter(|e| e.success).count() as u64;
        let (lo, hi) = wilson_interval(succ, 1e5 as u64, 0.999);
        assert!(lo <= 0.5 && 0.5 <= hi, "[{lo}, {hi}]");
    }

    #[test]
    fn losses_independent_across_links() {
        let spec = TrafficSpec::regular(vec![0.5, 0.5]).unwrap();
        let mut sched = build_schedule(&spec, 2e4, &mut rng(7)).unwrap();
        apply_losses(&mut sched, &spec.p, &mut rng(8)).unwrap();
        let xs: Vec<f64> = sched[0].iter().map(|e| f64::from(e.success)).collect();
        let ys: Vec<f64> = sched[1].iter().map(|e| f64::from(e.success)).collect();
        let r = correlation(&xs, &ys);
        // sample correlation of independent indicators: sd ~ 1/sqrt(n)
        assert!(r.abs() < 4.0 / (xs.len() as f64).sqrt(), "corr = {r}");
    }

    #[test]
    fn equivalent_params_regular() {
        let spec = TrafficSpec::regular(vec![0.9, 0.5, 0.7]).unwrap();
        let eq = equivalent_min_param(&spec).unwrap();
        assert_eq!(eq.p, 0.5);
        assert!((eq.gamma_e.unwrap() - 0.2).abs() < 1e-12);
        assert!(eq.unequal);
    }

    #[test]
    fn equivalent_params_poisson_product() {
        // per-link parameter is the product lambda_i * p_i, then the minimum
        let spec = TrafficSpec::poisson(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let eq = equivalent_min_param(&spec).unwrap();
        assert_eq!(eq.p, 0.25);
        assert!(!eq.unequal);
        let mixed = TrafficSpec::poisson(vec![1.0, 0.5], vec![0.5, 0.9]).unwrap();
        let eq = equivalent_min_param(&mixed).unwrap();
        assert_eq!(eq.p, 0.45);
        assert!(eq.unequal);
    }

    #[test]
    fn equivalent_params_single_link() {
        let spec = TrafficSpec::regular(vec![0.6]).unwrap();
        let eq = equivalent_min_param(&spec).unwrap();
        assert_eq!(eq.p, 0.6);
        assert!(eq.gamma_e.is_none());
        assert!(eq.unequal);
    }

    #[test]
    fn schedules_deterministic_per_seed() {
        let spec = TrafficSpec::poisson(vec![0.7, 0.2], vec![0.8, 0.6]).unwrap();
        let mut a = build_schedule(&spec, 500.0, &mut rng(9)).unwrap();
        let mut b = build_schedule(&spec, 500.0, &mut rng(9)).unwrap();
        apply_losses(&mut a, &spec.p, &mut rng(10)).unwrap();
        apply_losses(&mut b, &spec.p, &mut rng(10)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merged_success_process_is_poisson() {
        // successes thin a Poisson stream: count mean/variance ratio near 1
        let spec = TrafficSpec::poisson(vec![0.6], vec![0.5]).unwrap();
        let mut r = rng(11);
        let horizon = 2000.0;
        let mut counts = Vec::new();
        for _ in 0..200 {
            let mut sched = build_schedule(&spec, horizon, &mut r).unwrap();
            apply_losses(&mut sched, &spec.p, &mut r).unwrap();
            counts.push(sched[0].iter().filter(|e| e.success).count() as f64);
        }
        let m = crate::stats::mean(&counts);
        let var = counts.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / (counts.len() - 1) as f64;
        let ratio = var / m;
        assert!((m - 0.3 * horizon).abs() < 0.05 * 0.3 * horizon, "mean {m}");
        assert!((0.7..1.4).contains(&ratio), "dispersion ratio {ratio}");
    }

    #[test]
    fn validation_errors() {
        assert!(TrafficSpec::regular(vec![]).is_err());
        assert!(TrafficSpec::regular(vec![0.0]).is_err());
        assert!(TrafficSpec::regular(vec![1.2]).is_err());
        assert!(TrafficSpec::poisson(vec![0.5], vec![0.5, 0.5]).is_err());
        assert!(TrafficSpec::poisson(vec![1.5], vec![0.5]).is_err());
    }
}
