//! Shared test-side reference implementations, kept independent of the
//! engine paths they are used to check.

use linesim_core::gf2::BitVector;
use linesim_core::simnet::mix_seed;
use linesim_core::traffic::{self, TrafficSpec};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimal standalone rank tracker (first-set-bit echelon basis).
pub struct RankBasis {
    rows: Vec<BitVector>,
}

impl RankBasis {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn insert(&mut self, mut v: BitVector) -> bool {
        loop {
            let Some(lead) = v.first_set_bit() else {
                return false;
            };
            match self.rows.iter().find(|r| r.first_set_bit() == Some(lead)) {
                Some(r) => {
                    let r = r.clone();
                    v.xor_assign(&r);
                }
                None => {
                    self.rows.push(v);
                    return true;
                }
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }
}

/// Dense-code line-network trial reimplemented from the documented stream
/// protocol (schedule, then losses, then per-event draws; single chunk
/// selection consumes nothing), without the engine's codec or simnet types.
#[allow(clippy::needless_range_loop)]
pub fn dense_trial_oracle(
    k: usize,
    p: &[f64],
    master_seed: u64,
    trial_index: u64,
) -> Option<f64> {
    let seed = mix_seed(master_seed, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = TrafficSpec::regular(p.to_vec()).unwrap();
    let p_min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let horizon = 4.0 * k as f64 / p_min;
    let mut schedule = traffic::build_schedule(&spec, horizon, &mut rng).unwrap();
    traffic::apply_losses(&mut schedule, &spec.p, &mut rng).unwrap();

    let links = p.len();
    let slots = schedule[0].len();
    let words = k.div_ceil(64);
    let mut buffers: Vec<Vec<BitVector>> = vec![Vec::new(); links - 1];
    let mut sink = RankBasis::new();
    for slot in 0..slots {
        for li in 0..links {
            let ev = schedule[li][slot];
            if !ev.success {
                continue;
            }
            let gev = if li == 0 {
                let mut ws = Vec::with_capacity(words);
                for _ in 0..words {
                    ws.push(rng.next_u64());
                }
                BitVector::from_words(k, ws)
            } else {
                let buf = &buffers[li - 1];
                if buf.is_empty() {
                    continue;
                }
                let mut acc = BitVector::zeros(k);
                let mut idx = 0usize;
                while idx < buf.len() {
                    let mut coeffs = rng.next_u64();
                    let batch = (buf.len() - idx).min(64);
                    for j in 0..batch {
                        if coeffs & 1 == 1 {
                            acc.xor_assign(&buf[idx + j]);
                        }
                        coeffs >>= 1;
                    }
                    idx += batch;
                }
                acc
            };
            if li + 1 == links {
                sink.insert(gev);
                if sink.rank() == k {
                    return Some(ev.time);
                }
            } else {
                buffers[li].push(gev);
            }
        }
    }
    None
}
