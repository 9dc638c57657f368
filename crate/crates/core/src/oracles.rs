//! Exhaustive and Monte Carlo verification of the probabilistic building
//! blocks: rank tails of uniform binary matrices, random block
//! lower-triangular (RBLT) rank tails, and the density-transfer property of
//! dense-matrix products.

use crate::gf2::BitMatrix;
use crate::stats::{chi_square_quantile, wilson_interval};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("gamma {gamma} out of range [0, {max}]")]
    BadGamma { gamma: usize, max: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("need at least {need} trials for {outcomes} outcomes, got {got}")]
    TrialsTooFew {
        need: u64,
        outcomes: u64,
        got: u64,
    },
}

/// Exact dyadic probability `deficient / 2^log2_total` from an exhaustive
/// enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExactTail {
    pub deficient: u64,
    pub log2_total: u32,
}

impl ExactTail {
    pub fn value(&self) -> f64 {
        self.deficient as f64 / 2f64.powi(self.log2_total as i32)
    }
}

/// Exact `Pr{rank < k}` for uniform n x k matrices over GF(2), by enumerating
/// all `2^(nk)` matrices. Limited to `n*k <= 20`.
pub fn exact_rank_tail(n: usize, k: usize) -> Result<ExactTail, OracleError> {
    if n == 0 || k == 0 {
        return Err(OracleError::BadParams("n and k must be positive".into()));
    }
    let bits = n * k;
    if bits > 20 {
        return Err(OracleError::InstanceTooLarge(format!(
            "2^{bits} matrices exceed the enumeration budget"
        )));
    }
    let mask = (1u32 << k) - 1;
    let mut deficient = 0u64;
    for pattern in 0u64..(1u64 << bits) {
        // incremental basis over u32 rows
        let mut basis = [0u32; 20];
        let mut rank = 0usize;
        for i in 0..n {
            let mut row = ((pattern >> (i * k)) as u32) & mask;
            for &b in &basis[..rank] {
                let lead = 1u32 << (31 - b.leading_zeros());
                if row & lead != 0 {
                    row ^= b;
                }
            }
            if row != 0 {
                basis[rank] = row;
                rank += 1;
                if rank == k {
                    break;
                }
            }
        }
        if rank < k {
            deficient += 1;
        }
    }
    Ok(ExactTail {
        deficient,
        log2_total: bits as u32,
    })
}

/// Monte Carlo estimate with a Wilson confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn estimate(hits: u64, trials: u64, confidence: f64) -> TailEstimate {
    let (ci_low, ci_high) = wilson_interval(hits, trials, confidence);
    TailEstimate {
        hits,
        trials,
        p_hat: hits as f64 / trials as f64,
        ci_low,
        ci_high,
    }
}

/// Monte Carlo `Pr{rank < k}` over uniform n x k matrices.
pub fn mc_rank_tail<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    trials: u64,
    confidence: f64,
    rng: &mut R,
) -> Result<TailEstimate, OracleError> {
    if trials == 0 {
        return Err(OracleError::BadParams("trials must be positive".into()));
    }
    let mut hits = 0u64;
    for _ in 0..trials {
        if BitMatrix::random(n, k, rng).rank() < k {
            hits += 1;
        }
    }
    Ok(estimate(hits, trials, confidence))
}

/// Which side of the diagonal carries the shorter blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// Column widths `r_l <= r_star`; the tail is on `n_star = sum(r_l)`.
    Vertical,
    /// Column widths `r_l >= r_star`; the tail is on `n_star = w_star * r_star`.
    Horizontal,
}

/// Fill rule for the above-diagonal (unconstrained) blocks. The tail bounds
/// hold for arbitrary, possibly dependent fill; these three rules make that
/// freedom concretely testable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Filler {
    Zero,
    IndependentRandom,
    /// Duplicates the same-column diagonal block, maximally correlated fill.
    CopiedRows,
}

/// Shape of a random block lower-triangular matrix: `w_star` block rows of
/// `r_star` rows each, block-column widths `r_l`. Blocks on or below the
/// diagonal are dense (i.u.d. bits); blocks above follow the filler rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbltParams {
    pub w_star: usize,
    pub r_star: usize,
    pub r_l: Vec<usize>,
    pub orientation: Orientation,
    pub filler: Filler,
}

impl RbltParams {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.w_star == 0 || self.r_star == 0 {
            return Err(OracleError::BadParams("w_star and r_star must be positive".into()));
        }
        if self.r_l.len() != self.w_star {
            return Err(OracleError::BadParams(format!(
                "need {} block widths, got {}",
                self.w_star,
                self.r_l.len()
            )));
        }
        if self.r_l.contains(&0) {
            return Err(OracleError::BadParams("block widths must be positive".into()));
        }
        let ok = match self.orientation {
            Orientation::Vertical => self.r_l.iter().all(|&r| r <= self.r_star),
            Orientation::Horizontal => self.r_l.iter().all(|&r| r >= self.r_star),
        };
        if !ok {
            return Err(OracleError::BadParams(format!(
                "block widths {:?} violate the {:?} orientation against r_star = {}",
                self.r_l, self.orientation, self.r_star
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.w_star * self.r_star
    }

    pub fn cols(&self) -> usize {
        self.r_l.iter().sum()
    }

    /// Dimension whose rank the tail bound concerns.
    pub fn n_star(&self) -> usize {
        match self.orientation {
            Orientation::Vertical => self.cols(),
            Orientation::Horizontal => self.rows(),
        }
    }
}

/// Samples an RBLT matrix: block `(i', j')` with `j' <= i'` gets i.u.d.
/// bits; other blocks follow the filler rule.
#[allow(clippy::needless_range_loop)]
pub fn build_rblt<R: Rng + ?Sized>(
    params: &RbltParams,
    rng: &mut R,
) -> Result<BitMatrix, OracleError> {
    params.validate()?;
    let mut m = BitMatrix::zeros(params.rows(), params.cols());
    let col_offset: Vec<usize> = params
        .r_l
        .iter()
        .scan(0usize, |acc, &w| {
            let off = *acc;
            *acc += w;
            Some(off)
        })
        .collect();
    // dense blocks first so CopiedRows can reference the diagonal
    for bi in 0..params.w_star {
        for bj in 0..=bi {
            for r in 0..params.r_star {
                for c in 0..params.r_l[bj] {
                    m.set(bi * params.r_star + r, col_offset[bj] + c, rng.gen_bool(0.5));
                }
            }
        }
    }
    for bi in 0..params.w_star {
        for bj in (bi + 1)..params.w_star {
            match params.filler {
                Filler::Zero => {}
                Filler::IndependentRandom => {
                    for r in 0..params.r_star {
                        for c in 0..params.r_l[bj] {
                            m.set(
                                bi * params.r_star + r,
                                col_offset[bj] + c,
                                rng.gen_bool(0.5),
                            );
                        }
                    }
                }
                Filler::CopiedRows => {
                    for r in 0..params.r_star {
                        for c in 0..params.r_l[bj] {
                            let v = m.get(bj * params.r_star + r, col_offset[bj] + c);
                            m.set(bi * params.r_star + r, col_offset[bj] + c, v);
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Evaluated closed-form tail bound `Pr{rank(T) < n_star - gamma} <= value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbltBound {
    pub n_star: usize,
    pub u_star: usize,
    pub r_min: usize,
    pub r_max: usize,
    pub gamma: usize,
    pub value: f64,
    /// The formula exceeded 1 and carries no information.
    pub vacuous: bool,
}

/// Closed-form RBLT rank-tail bound.
///
/// Vertical:   `u* (1 - 2^-r_max) 2^(-g + n* - w* r* + (r* - r_min)(u* - 1))`
///             with `u* = ceil((n* - g) / r_min)`.
/// Horizontal: `u* (1 - 2^-r*) 2^(-g + n* - w* r_min + (r_min - r*)(u* - 1))`
///             with `u* = ceil((n* - g) / r*)`.
pub fn rblt_tail_bound(params: &RbltParams, gamma: usize) -> Result<RbltBound, OracleError> {
    params.validate()?;
    let n_star = params.n_star();
    if gamma + 1 > n_star {
        return Err(OracleError::BadGamma {
            gamma,
            max: n_star - 1,
        });
    }
    let r_min = *params.r_l.iter().min().expect("nonempty");
    let r_max = *params.r_l.iter().max().expect("nonempty");
    let (u_star, front, exponent) = match params.orientation {
        Orientation::Vertical => {
            let u = (n_star - gamma).div_ceil(r_min);
            let front = 1.0 - 2f64.powi(-(r_max as i32));
            let exp = -(gamma as i64) + n_star as i64
                - (params.w_star * params.r_star) as i64
                + (params.r_star as i64 - r_min as i64) * (u as i64 - 1);
            (u, front, exp)
        }
        Orientation::Horizontal => {
            let u = (n_star - gamma).div_ceil(params.r_star);
            let front = 1.0 - 2f64.powi(-(params.r_star as i32));
            let exp = -(gamma as i64) + n_star as i64
                - (params.w_star * r_min) as i64
                + (r_min as i64 - params.r_star as i64) * (u as i64 - 1);
            (u, front, exp)
        }
    };
    let value = u_star as f64 * front * 2f64.powi(exponent as i32);
    Ok(RbltBound {
        n_star,
        u_star,
        r_min,
        r_max,
        gamma,
        value,
        vacuous: value >= 1.0,
    })
}

/// Monte Carlo `Pr{rank(T) < n_star - gamma}` over freshly sampled RBLT
/// matrices.
pub fn mc_rblt_tail<R: Rng + ?Sized>(
    params: &RbltParams,
    gamma: usize,
    trials: u64,
    confidence: f64,
    rng: &mut R,
) -> Result<TailEstimate, OracleError> {
    params.validate()?;
    let n_star = params.n_star();
    if gamma + 1 > n_star {
        return Err(OracleError::BadGamma {
            gamma,
            max: n_star - 1,
        });
    }
    if trials == 0 {
        return Err(OracleError::BadParams("trials must be positive".into()));
    }
    let mut hits = 0u64;
    for _ in 0..trials {
        if build_rblt(params, rng)?.rank() < n_star - gamma {
            hits += 1;
        }
    }
    Ok(estimate(hits, trials, confidence))
}

/// One transfer-uniformity check: rows of `T * Q` selected by independent
/// rows of `T` should be jointly uniform when `Q` is dense.
#[derive(Debug, Clone, Serialize)]
pub struct DensityCase {
    pub label: String,
    pub gamma: usize,
    pub outcomes: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityCheckReport {
    pub cases: Vec<DensityCase>,
    pub pass: bool,
}

const DENSITY_MAX_OUTCOME_BITS: usize = 14;

/// Verifies the density-transfer property on small instances: for several
/// transfer matrices `T` (identity, duplicated rows, random samples), the
/// joint distribution of the `T*Q` rows picked out by `gamma` independent
/// rows of `T` is uniform over all `2^(gamma * cols_q)` outcomes, judged by a
/// chi-square test across `trials` fresh dense `Q` samples.
pub fn density_transfer_check<R: Rng + ?Sized>(
    rows_t: usize,
    cols_t: usize,
    cols_q: usize,
    trials: u64,
    confidence: f64,
    rng: &mut R,
) -> Result<DensityCheckReport, OracleError> {
    if rows_t == 0 || cols_t == 0 || cols_q == 0 {
        return Err(OracleError::BadParams("dimensions must be positive".into()));
    }
    if rows_t > 12 || cols_t > 12 {
        return Err(OracleError::InstanceTooLarge(
            "transfer matrix dimensions must be at most 12".into(),
        ));
    }
    let mut cases = Vec::new();
    let mut ts: Vec<(String, BitMatrix)> = Vec::new();
    if rows_t == cols_t {
        ts.push(("identity".into(), BitMatrix::identity(rows_t)));
    }
    if rows_t >= 2 {
        // two equal rows on top of a random tail force a rank deficit
        let mut dup = BitMatrix::random(rows_t, cols_t, rng);
        if dup.row(0).is_zero() {
            dup.set(0, 0, true);
        }
        let first = dup.row(0);
        for c in 0..cols_t {
            dup.set(1, c, first.get(c));
        }
        ts.push(("duplicate-rows".into(), dup));
    }
    for i in 0..3 {
        ts.push((format!("random-{i}"), BitMatrix::random(rows_t, cols_t, rng)));
    }
    for (label, t) in ts {
        cases.push(run_density_case(&label, &t, cols_q, trials, confidence, rng)?);
    }
    let pass = cases.iter().all(|c| c.pass);
    Ok(DensityCheckReport { cases, pass })
}

fn run_density_case<R: Rng + ?Sized>(
    label: &str,
    t: &BitMatrix,
    cols_q: usize,
    trials: u64,
    confidence: f64,
    rng: &mut R,
) -> Result<DensityCase, OracleError> {
    // greedily pick row indices of T that are linearly independent
    let mut elim = crate::gf2::Eliminator::new(t.cols());
    let mut selected = Vec::new();
    for r in 0..t.rows() {
        if elim.insert(t.row(r), None).expect("dims match") {
            selected.push(r);
        }
    }
    // cap gamma so the outcome table stays enumerable
    let cap = DENSITY_MAX_OUTCOME_BITS / cols_q;
    selected.truncate(cap.max(1).min(selected.len()));
    let gamma = selected.len();
    if gamma == 0 {
        return Err(OracleError::BadParams(format!(
            "case {label}: transfer matrix has rank 0"
        )));
    }
    let outcome_bits = gamma * cols_q;
    if outcome_bits > DENSITY_MAX_OUTCOME_BITS {
        return Err(OracleError::InstanceTooLarge(format!(
            "case {label}: {outcome_bits} outcome bits"
        )));
    }
    let outcomes = 1u64 << outcome_bits;
    if trials < 10 * outcomes {
        return Err(OracleError::TrialsTooFew {
            need: 10 * outcomes,
            outcomes,
            got: trials,
        });
    }
    let mut counts = vec![0u64; outcomes as usize];
    for _ in 0..trials {
        let q = BitMatrix::random(t.cols(), cols_q, rng);
        let mut index = 0u64;
        let mut shift = 0u32;
        for &ri in &selected {
            // row ri of T*Q
            let mut acc = vec![0u64; q.row_words(0).len()];
            for c in 0..t.cols() {
                if t.get(ri, c) {
                    for (a, w) in acc.iter_mut().zip(q.row_words(c)) {
                        *a ^= w;
                    }
                }
            }
            for b in 0..cols_q {
                let bit = acc[b / 64] >> (b % 64) & 1;
                index |= bit << (shift + b as u32);
            }
            shift += cols_q as u32;
        }
        counts[index as usize] += 1;
    }
    let expected = trials as f64 / outcomes as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let threshold = chi_square_quantile(outcomes - 1, confidence);
    Ok(DensityCase {
        label: label.to_string(),
        gamma,
        outcomes,
        statistic,
        threshold,
        pass: statistic <= threshold,
    })
}
