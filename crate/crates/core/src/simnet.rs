//! One line-network trial: drive scheduled per-link transmission events
//! through source/relay/sink coding and record when the sink can decode.
//!
//! Topology is `L` links joining nodes `v_0 .. v_L` in tandem: `v_0` is the
//! source, `v_L` the sink, and interior nodes hold unbounded receive buffers.
//! Events are processed in global time order with ties broken by ascending
//! link index, so a packet delivered at time `t` is usable downstream at the
//! same instant (successful packets arrive with zero delay). The alternative
//! strictly-later availability rule is selectable for sensitivity checks.
//!
//! Stream protocol per trial, in order: message vectors (payload mode),
//! precode generator rows (precoded runs), transmission schedule (link by
//! link), loss flags (link by link), then the event loop's chunk selections
//! and coding coefficients in event order. A trial's stream is seeded as
//! `mix_seed(master_seed, trial_index)`.

use crate::codec::{
    select_chunk, CodeConfig, CodecError, NodeBuffer, Precode, SinkState, SlotPolicy, Source,
};
use crate::gf2::{BitVector, Eliminator, Gf2Error};
use crate::traffic::{self, TrafficError, TrafficSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// Full description of one simulated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub code: CodeConfig,
    pub traffic: TrafficSpec,
    /// Censoring horizon; defaults to `4 k_eff / p` with `p` the minimum
    /// equivalent traffic parameter.
    pub horizon_cap: Option<f64>,
    pub slot_policy: SlotPolicy,
}

impl NetworkConfig {
    pub fn new(code: CodeConfig, traffic: TrafficSpec) -> Self {
        Self {
            code,
            traffic,
            horizon_cap: None,
            slot_policy: SlotPolicy::UpstreamFirst,
        }
    }

    pub fn links(&self) -> usize {
        self.traffic.links()
    }

    pub fn payload_mode(&self) -> bool {
        self.code.payload_dim.is_some()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.code.validate()?;
        self.traffic.validate()?;
        if let Some(h) = self.horizon_cap {
            if h.is_nan() || h <= 0.0 {
                return Err(SimError::Traffic(TrafficError::BadHorizon(h)));
            }
        }
        Ok(())
    }

    /// Chunk-level shape actually simulated. Without a precode this is
    /// `(k, q)`. With one, the chunk size `alpha = k/q` is kept and the
    /// intermediate count is padded up to the next multiple of `alpha`
    /// (extra rows count toward the precode margin), so the chunked layer
    /// runs over `k_eff = q_eff * alpha` intermediates.
    pub fn effective_shape(&self) -> EffectiveShape {
        let alpha = self.code.alpha();
        match &self.code.precode {
            None => EffectiveShape {
                k_eff: self.code.k,
                q_eff: self.code.q,
                alpha,
            },
            Some(pc) => {
                let k_prime = pc.k_prime(self.code.k);
                let k_eff = k_prime.div_ceil(alpha) * alpha;
                EffectiveShape {
                    k_eff,
                    q_eff: k_eff / alpha,
                    alpha,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectiveShape {
    pub k_eff: usize,
    pub q_eff: usize,
    pub alpha: usize,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Time the stop condition first held, or `None` when censored at the
    /// horizon.
    pub coding_delay: Option<f64>,
    pub horizon: f64,
    /// Decode time per simulated chunk (length `q_eff`).
    pub per_chunk_decode_time: Vec<Option<f64>>,
    /// Opportunities processed per link up to the stop instant.
    pub packets_sent: Vec<u64>,
    /// Successful deliveries per link up to the stop instant.
    pub packets_successful: Vec<u64>,
    /// Stream identifier the trial ran under.
    pub seed: u64,
    /// Payload mode only: decoded messages matched the originals bit for bit.
    pub messages_verified: Option<bool>,
}

impl TrialResult {
    pub fn censored(&self) -> bool {
        self.coding_delay.is_none()
    }
}

/// Fraction of chunks not yet decoded at time `n_t`.
pub fn undecodable_fraction_at(result: &TrialResult, n_t: f64) -> f64 {
    assert!(n_t >= 0.0, "horizon must be nonnegative");
    let q = result.per_chunk_decode_time.len();
    assert!(q > 0, "trial carries no chunks");
    let undecoded = result
        .per_chunk_decode_time
        .iter()
        .filter(|t| t.is_none_or(|v| v > n_t))
        .count();
    undecoded as f64 / q as f64
}

/// SplitMix64 finalizer over `master + index * golden`; the documented
/// mapping from (master seed, trial index) to a trial stream seed.
pub fn mix_seed(master_seed: u64, trial_index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(trial_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the trial for `(cfg, master_seed, trial_index)` on its derived
/// stream.
pub fn run_trial_seeded(
    cfg: &NetworkConfig,
    master_seed: u64,
    trial_index: u64,
) -> Result<TrialResult, SimError> {
    let seed = mix_seed(master_seed, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_trial(cfg, &mut rng, seed)
}

/// Runs one trial on the given stream. `seed_label` is recorded verbatim in
/// the result.
pub fn run_trial<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    rng: &mut R,
    seed_label: u64,
) -> Result<TrialResult, SimError> {
    cfg.validate()?;
    let shape = cfg.effective_shape();
    let links = cfg.links();
    let eq = traffic::equivalent_min_param(&cfg.traffic)?;
    let horizon = cfg
        .horizon_cap
        .unwrap_or(4.0 * shape.k_eff as f64 / eq.p);

    // 1. message vectors
    let messages: Option<Vec<BitVector>> = match cfg.code.payload_dim {
        Some(dim) => Some(
            (0..cfg.code.k)
                .map(|_| BitVector::random(dim, rng))
                .collect::<Result<_, _>>()?,
        ),
        None => None,
    };

    // 2. precode generator (and intermediates in payload mode)
    let precode = match &cfg.code.precode {
        Some(_) => Some(Precode::generate(cfg.code.k, shape.k_eff, rng)?),
        None => None,
    };
    let source_payloads = match (&messages, &precode) {
        (Some(msgs), Some(pc)) => Some(pc.encode(msgs)?),
        (Some(msgs), None) => Some(msgs.clone()),
        (None, _) => None,
    };

    // 3.-4. schedule and losses
    let mut schedule = traffic::build_schedule(&cfg.traffic, horizon, rng)?;
    traffic::apply_losses(&mut schedule, &cfg.traffic.p, rng)?;

    // 5. event loop
    let source = Source::new(shape.q_eff, shape.alpha, source_payloads);
    let mut buffers: Vec<NodeBuffer> = (0..links.saturating_sub(1))
        .map(|_| NodeBuffer::new(shape.q_eff, shape.alpha))
        .collect();
    let mut sink = SinkState::new(shape.q_eff, shape.alpha, cfg.payload_mode());
    let mut packets_sent = vec![0u64; links];
    let mut packets_successful = vec![0u64; links];

    // CCP stop machinery: recovered-intermediate floor plus rank-k survival
    // of the decoded chunks' generator rows. In payload mode the accumulator
    // carries the recovered intermediate values, so the precode solve at the
    // stop instant is a single back-substitution.
    let mut gen_rank: Option<(usize, Eliminator)> = cfg.code.precode.as_ref().map(|pc| {
        let required = ((1.0 - pc.erasure_tolerance()) * shape.k_eff as f64).ceil() as usize;
        let elim = if cfg.payload_mode() {
            Eliminator::with_payload(cfg.code.k)
        } else {
            Eliminator::new(cfg.code.k)
        };
        (required, elim)
    });

    let mut cursors = vec![0usize; links];
    let mut delay: Option<f64> = None;

    'events: loop {
        // next event: smallest time, ties by ascending link index
        let mut next: Option<usize> = None;
        for li in 0..links {
            if cursors[li] >= schedule[li].len() {
                continue;
            }
            let t = schedule[li][cursors[li]].time;
            match next {
                None => next = Some(li),
                Some(best) => {
                    if t < schedule[best][cursors[best]].time {
                        next = Some(li);
                    }
                }
            }
        }
        let Some(li) = next else {
            break;
        };
        let ev = schedule[li][cursors[li]];
        cursors[li] += 1;

        packets_sent[li] += 1;
        if !ev.success {
            continue;
        }
        packets_successful[li] += 1;

        let chunk = select_chunk(shape.q_eff, rng)?;
        let pkt = if li == 0 {
            source.emit(chunk, rng)?
        } else {
            match buffers[li - 1].recode(chunk, ev.time, cfg.slot_policy, rng) {
                Some(p) => p,
                None => continue, // empty chunk: the opportunity is consumed
            }
        };

        if li + 1 == links {
            let outcome = sink.ingest(pkt, ev.time)?;
            if outcome.chunk_just_decoded {
                let stopped = match gen_rank.as_mut() {
                    None => sink.all_decoded(),
                    Some((required, elim)) => {
                        if !elim.is_complete() {
                            let symbols = match cfg.payload_mode() {
                                true => sink.chunk_symbols(chunk),
                                false => None,
                            };
                            let pc = precode.as_ref().expect("precode present with ccp stop");
                            for j in 0..shape.alpha {
                                let row = chunk * shape.alpha + j;
                                elim.insert(
                                    pc.generator_row(row).clone(),
                                    symbols.as_ref().map(|s| s[j].clone()),
                                )?;
                            }
                        }
                        sink.decoded_chunks() * shape.alpha >= *required && elim.is_complete()
                    }
                };
                if stopped {
                    delay = Some(ev.time);
                    break 'events;
                }
            }
        } else {
            buffers[li].push(&pkt, ev.time);
        }
    }

    // payload round-trip verification
    let messages_verified = match (&messages, delay) {
        (Some(msgs), Some(_)) => {
            let recovered = match &gen_rank {
                None => {
                    let mut out = Vec::with_capacity(cfg.code.k);
                    for c in 0..shape.q_eff {
                        out.extend(sink.chunk_symbols(c).expect("all chunks decoded at stop"));
                    }
                    Some(out)
                }
                Some((_, elim)) => elim.solve(),
            };
            Some(recovered.as_deref() == Some(msgs.as_slice()))
        }
        _ => None,
    };

    Ok(TrialResult {
        coding_delay: delay,
        horizon,
        per_chunk_decode_time: sink.decode_times(),
        packets_sent,
        packets_successful,
        seed: seed_label,
        messages_verified,
    })
}
