//! Source, relay, and sink coding logic for dense and chunked codes, plus the
//! systematic random-linear precode used by capacity-approaching chunked
//! codes.
//!
//! A dense code is the single-chunk special case: `q = 1` selects chunk 0
//! without touching the random stream, so a dense trial and a one-chunk
//! trial consume identical randomness event for event.

use crate::gf2::{BitVector, Eliminator, Gf2Error};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("message size must be positive")]
    EmptyMessage,
    #[error("chunk count {q} does not divide message size {k}")]
    ChunkMismatch { k: usize, q: usize },
    #[error("chunk count must be positive")]
    ZeroChunks,
    #[error("chunk id {chunk} out of range for {q} chunks")]
    ChunkOutOfRange { chunk: usize, q: usize },
    #[error("precode constant {0} outside (0, 1)")]
    BadPrecodeConstant(f64),
    #[error("intermediate count {k_prime} below message size {k}")]
    PrecodeTooShort { k_prime: usize, k: usize },
    #[error("survivor indices and values differ in length")]
    MisalignedSurvivors,
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// Precode parameters. The intermediate packet count is
/// `k' = ceil((1 + (1 + gamma_a) * gamma_b) * k) + margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecodeConfig {
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Extra random rows beyond the rate-derived count; guards the decoder
    /// against rank shortfalls among survivors.
    pub margin: usize,
}

impl PrecodeConfig {
    pub fn new(gamma_a: f64, gamma_b: f64, margin: usize) -> Result<Self, CodecError> {
        for g in [gamma_a, gamma_b] {
            if !(g > 0.0 && g < 1.0) {
                return Err(CodecError::BadPrecodeConstant(g));
            }
        }
        Ok(Self {
            gamma_a,
            gamma_b,
            margin,
        })
    }

    /// Fraction of intermediates the decoder must tolerate losing.
    pub fn erasure_tolerance(&self) -> f64 {
        (1.0 + self.gamma_a) * self.gamma_b
    }

    pub fn k_prime(&self, k: usize) -> usize {
        ((1.0 + self.erasure_tolerance()) * k as f64).ceil() as usize + self.margin
    }

    /// Default margin so a rank shortfall among `k + margin` survivors has
    /// probability at most `epsilon` (dense rank tail `2^-(n-k)`).
    pub fn margin_for_epsilon(epsilon: f64) -> usize {
        assert!(epsilon > 0.0 && epsilon < 1.0);
        (1.0 / epsilon).log2().ceil() as usize
    }
}

/// Code shape: `k` message vectors in `q` chunks of size `alpha = k / q`.
/// `q = 1` is the dense code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeConfig {
    pub k: usize,
    pub q: usize,
    /// Payload vector dimension; `None` runs the header-only fast path.
    pub payload_dim: Option<usize>,
    pub precode: Option<PrecodeConfig>,
}

impl CodeConfig {
    pub fn dense(k: usize) -> Self {
        Self {
            k,
            q: 1,
            payload_dim: None,
            precode: None,
        }
    }

    pub fn chunked(k: usize, q: usize) -> Self {
        Self {
            k,
            q,
            payload_dim: None,
            precode: None,
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if self.k == 0 {
            return Err(CodecError::EmptyMessage);
        }
        if self.q == 0 {
            return Err(CodecError::ZeroChunks);
        }
        if !self.k.is_multiple_of(self.q) {
            return Err(CodecError::ChunkMismatch {
                k: self.k,
                q: self.q,
            });
        }
        if let Some(pc) = &self.precode {
            PrecodeConfig::new(pc.gamma_a, pc.gamma_b, pc.margin)?;
        }
        Ok(())
    }

    pub fn alpha(&self) -> usize {
        self.k / self.q
    }

    pub fn is_dense(&self) -> bool {
        self.q == 1
    }
}

/// A coded packet: chunk id, global encoding vector restricted to the chunk,
/// and optionally the combined payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub chunk_id: usize,
    pub gev: BitVector,
    pub payload: Option<BitVector>,
}

/// Uniform chunk choice. A single chunk is returned directly without
/// consuming the stream; this is the splitting rule that makes dense and
/// one-chunk trials bitwise identical.
pub fn select_chunk<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Result<usize, CodecError> {
    match q {
        0 => Err(CodecError::ZeroChunks),
        1 => Ok(0),
        _ => Ok(rng.gen_range(0..q)),
    }
}

/// Source-side encoder over `chunks * alpha` symbols. In payload mode it
/// holds the symbol payload vectors (message vectors, or intermediate
/// packets when a precode is in front).
pub struct Source {
    chunks: usize,
    alpha: usize,
    payloads: Option<Vec<BitVector>>,
}

impl Source {
    pub fn new(chunks: usize, alpha: usize, payloads: Option<Vec<BitVector>>) -> Self {
        assert!(chunks > 0 && alpha > 0);
        if let Some(p) = &payloads {
            assert_eq!(p.len(), chunks * alpha, "one payload vector per symbol");
        }
        Self {
            chunks,
            alpha,
            payloads,
        }
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    /// Fresh uniform coding vector over the chunk; payload (when enabled) is
    /// the matching XOR of the chunk's symbol vectors.
    pub fn emit<R: Rng + ?Sized>(
        &self,
        chunk_id: usize,
        rng: &mut R,
    ) -> Result<Packet, CodecError> {
        if chunk_id >= self.chunks {
            return Err(CodecError::ChunkOutOfRange {
                chunk: chunk_id,
                q: self.chunks,
            });
        }
        let gev = BitVector::random(self.alpha, rng)?;
        let payload = self.payloads.as_ref().map(|symbols| {
            let base = chunk_id * self.alpha;
            let dim = symbols[0].len();
            let mut acc = BitVector::zeros(dim);
            for j in 0..self.alpha {
                if gev.get(j) {
                    acc.xor_assign(&symbols[base + j]);
                }
            }
            acc
        });
        Ok(Packet {
            chunk_id,
            gev,
            payload,
        })
    }
}

/// Relay storage: every received packet, per chunk, in arrival order.
/// Nothing is ever evicted.
pub struct NodeBuffer {
    chunks: Vec<ChunkBuffer>,
}

struct ChunkBuffer {
    gev_words: Vec<u64>,
    gev_stride: usize,
    payloads: Vec<BitVector>,
    times: Vec<f64>,
    alpha: usize,
}

/// Whether a same-instant arrival is usable for recoding at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotPolicy {
    /// Upstream links are processed first within an instant, and their
    /// deliveries are immediately combinable downstream.
    UpstreamFirst,
    /// A packet received at time t participates only strictly after t.
    StrictlyLater,
}

impl NodeBuffer {
    pub fn new(chunks: usize, alpha: usize) -> Self {
        Self {
            chunks: (0..chunks)
                .map(|_| ChunkBuffer {
                    gev_words: Vec::new(),
                    gev_stride: alpha.div_ceil(64),
                    payloads: Vec::new(),
                    times: Vec::new(),
                    alpha,
                })
                .collect(),
        }
    }

    pub fn push(&mut self, pkt: &Packet, time: f64) {
        let cb = &mut self.chunks[pkt.chunk_id];
        debug_assert_eq!(pkt.gev.len(), cb.alpha);
        cb.gev_words.extend_from_slice(pkt.gev.words());
        if let Some(p) = &pkt.payload {
            cb.payloads.push(p.clone());
        }
        cb.times.push(time);
    }

    pub fn len(&self, chunk_id: usize) -> usize {
        self.chunks[chunk_id].times.len()
    }

    pub fn is_empty(&self, chunk_id: usize) -> bool {
        self.len(chunk_id) == 0
    }

    pub fn gev(&self, chunk_id: usize, idx: usize) -> BitVector {
        let cb = &self.chunks[chunk_id];
        let w = &cb.gev_words[idx * cb.gev_stride..(idx + 1) * cb.gev_stride];
        BitVector::from_words(cb.alpha, w.to_vec())
    }

    /// Random linear recombination of the chunk's usable packets: one
    /// independent uniform GF(2) coefficient per packet. With no usable
    /// packet the opportunity yields nothing; with at least one, the
    /// combination is emitted even when it comes out all-zero.
    pub fn recode<R: Rng + ?Sized>(
        &self,
        chunk_id: usize,
        now: f64,
        policy: SlotPolicy,
        rng: &mut R,
    ) -> Option<Packet> {
        let cb = &self.chunks[chunk_id];
        let usable = match policy {
            SlotPolicy::UpstreamFirst => cb.times.len(),
            SlotPolicy::StrictlyLater => cb.times.partition_point(|&t| t < now),
        };
        if usable == 0 {
            return None;
        }
        let mut gev_acc = vec![0u64; cb.gev_stride];
        let mut payload_acc = cb.payloads.first().map(|p| BitVector::zeros(p.len()));
        let mut idx = 0usize;
        while idx < usable {
            let mut coeffs = rng.next_u64();
            let batch = (usable - idx).min(64);
            for j in 0..batch {
                if coeffs & 1 == 1 {
                    let base = (idx + j) * cb.gev_stride;
                    let row = &cb.gev_words[base..base + cb.gev_stride];
                    for (a, b) in gev_acc.iter_mut().zip(row) {
                        *a ^= b;
                    }
                    if let Some(acc) = payload_acc.as_mut() {
                        acc.xor_assign(&cb.payloads[idx + j]);
                    }
                }
                coeffs >>= 1;
            }
            idx += batch;
        }
        Some(Packet {
            chunk_id,
            gev: BitVector::from_words(cb.alpha, gev_acc),
            payload: payload_acc,
        })
    }
}

/// Per-chunk decoding state at the sink. Non-innovative rows are counted but
/// not stored; the decoded flag latches when a chunk's rank reaches its size.
pub struct SinkState {
    chunks: Vec<ChunkDecoder>,
    decoded_chunks: usize,
    alpha: usize,
}

pub struct ChunkDecoder {
    pub elim: Eliminator,
    pub decoded_at: Option<f64>,
    pub received: u64,
    pub innovative: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOutcome {
    pub innovative: bool,
    pub chunk_just_decoded: bool,
}

impl SinkState {
    pub fn new(chunks: usize, alpha: usize, payload_mode: bool) -> Self {
        Self {
            chunks: (0..chunks)
                .map(|_| ChunkDecoder {
                    elim: if payload_mode {
                        Eliminator::with_payload(alpha)
                    } else {
                        Eliminator::new(alpha)
                    },
                    decoded_at: None,
                    received: 0,
                    innovative: 0,
                })
                .collect(),
            decoded_chunks: 0,
            alpha,
        }
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn chunk(&self, id: usize) -> &ChunkDecoder {
        &self.chunks[id]
    }

    pub fn decoded_chunks(&self) -> usize {
        self.decoded_chunks
    }

    pub fn all_decoded(&self) -> bool {
        self.decoded_chunks == self.chunks.len()
    }

    pub fn total_rank(&self) -> usize {
        self.chunks.iter().map(|c| c.elim.rank()).sum()
    }

    pub fn decode_times(&self) -> Vec<Option<f64>> {
        self.chunks.iter().map(|c| c.decoded_at).collect()
    }

    pub fn ingest(&mut self, pkt: Packet, now: f64) -> Result<IngestOutcome, CodecError> {
        if pkt.chunk_id >= self.chunks.len() {
            return Err(CodecError::ChunkOutOfRange {
                chunk: pkt.chunk_id,
                q: self.chunks.len(),
            });
        }
        let cd = &mut self.chunks[pkt.chunk_id];
        cd.received += 1;
        if cd.decoded_at.is_some() {
            return Ok(IngestOutcome {
                innovative: false,
                chunk_just_decoded: false,
            });
        }
        let innovative = cd.elim.insert(pkt.gev, pkt.payload)?;
        if innovative {
            cd.innovative += 1;
        }
        let chunk_just_decoded = innovative && cd.elim.is_complete();
        if chunk_just_decoded {
            cd.decoded_at = Some(now);
            self.decoded_chunks += 1;
        }
        Ok(IngestOutcome {
            innovative,
            chunk_just_decoded,
        })
    }

    /// Decoded symbol vectors for one chunk (payload mode, decoded chunks).
    pub fn chunk_symbols(&self, id: usize) -> Option<Vec<BitVector>> {
        self.chunks[id].elim.solve()
    }
}

/// Systematic random-linear erasure precode over GF(2): the first `k`
/// intermediates are the messages themselves, the rest are fresh uniform
/// combinations. The generator is `k_prime x k`.
pub struct Precode {
    k: usize,
    generator_rows: Vec<BitVector>,
}

impl Precode {
    pub fn generate<R: Rng + ?Sized>(
        k: usize,
        k_prime: usize,
        rng: &mut R,
    ) -> Result<Self, CodecError> {
        if k == 0 {
            return Err(CodecError::EmptyMessage);
        }
        if k_prime < k {
            return Err(CodecError::PrecodeTooShort { k_prime, k });
        }
        let mut generator_rows = Vec::with_capacity(k_prime);
        for i in 0..k {
            let mut row = BitVector::zeros(k);
            row.set(i, true);
            generator_rows.push(row);
        }
        for _ in k..k_prime {
            generator_rows.push(BitVector::random(k, rng)?);
        }
        Ok(Self { k, generator_rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k_prime(&self) -> usize {
        self.generator_rows.len()
    }

    pub fn generator_row(&self, i: usize) -> &BitVector {
        &self.generator_rows[i]
    }

    /// Encodes `k` messages into `k_prime` intermediates.
    pub fn encode(&self, messages: &[BitVector]) -> Result<Vec<BitVector>, CodecError> {
        if messages.len() != self.k {
            return Err(CodecError::MisalignedSurvivors);
        }
        let dim = messages[0].len();
        let mut out = Vec::with_capacity(self.k_prime());
        for row in &self.generator_rows {
            let mut acc = BitVector::zeros(dim);
            for (j, m) in messages.iter().enumerate() {
                if row.get(j) {
                    acc.xor_assign(m);
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Recovers the messages from surviving intermediates. Succeeds exactly
    /// when the surviving generator rows span the message space.
    pub fn decode(
        &self,
        survivor_indices: &[usize],
        survivor_values: &[BitVector],
    ) -> Result<Option<Vec<BitVector>>, CodecError> {
        if survivor_indices.len() != survivor_values.len() {
            return Err(CodecError::MisalignedSurvivors);
        }
        let mut elim = Eliminator::with_payload(self.k);
        for (&i, v) in survivor_indices.iter().zip(survivor_values) {
            if i >= self.k_prime() {
                return Err(CodecError::MisalignedSurvivors);
            }
            elim.insert(self.generator_rows[i].clone(), Some(v.clone()))?;
            if elim.is_complete() {
                break;
            }
        }
        Ok(elim.solve())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::BitMatrix;
    use crate::stats::wilson_interval;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_messages(n: usize, dim: usize, r: &mut ChaCha8Rng) -> Vec<BitVector> {
        (0..n).map(|_| BitVector::random(dim, r).unwrap()).collect()
    }

    #[test]
    fn config_validation() {
        assert!(CodeConfig::chunked(8, 4).validate().is_ok());
        assert!(matches!(
            CodeConfig::chunked(8, 3).validate(),
            Err(CodecError::ChunkMismatch { .. })
        ));
        assert!(CodeConfig::chunked(0, 1).validate().is_err());
        assert!(CodeConfig::chunked(8, 0).validate().is_err());
        assert!(CodeConfig::dense(8).is_dense());
        assert_eq!(CodeConfig::chunked(8, 4).alpha(), 2);
    }

    #[test]
    fn select_chunk_single_is_zero_and_stream_free() {
        let mut a = rng(1);
        let mut b = rng(1);
        assert_eq!(select_chunk(1, &mut a).unwrap(), 0);
        // stream untouched: both generators continue identically
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn select_chunk_zero_rejected() {
        assert!(select_chunk(0, &mut rng(0)).is_err());
    }

    #[test]
    fn select_chunk_uniform() {
        let mut r = rng(2);
        let q = 4;
        let trials = 100_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..trials {
            counts[select_chunk(q, &mut r).unwrap()] += 1;
        }
        for &c in &counts {
            let (lo, hi) = wilson_interval(c, trials, 0.999);
            assert!(lo <= 0.25 && 0.25 <= hi, "count {c}");
        }
    }

    #[test]
    fn select_chunk_reproducible() {
        let seq1: Vec<usize> = (0..32)
            .scan(rng(3), |r, _| Some(select_chunk(7, r).unwrap()))
            .collect();
        let seq2: Vec<usize> = (0..32)
            .scan(rng(3), |r, _| Some(select_chunk(7, r).unwrap()))
            .collect();
        assert_eq!(seq1, seq2);
    }

    #[test]
    fn source_emit_dense_gev_spans_message() {
        let src = Source::new(1, 16, None);
        let pkt = src.emit(0, &mut rng(4)).unwrap();
        assert_eq!(pkt.gev.len(), 16);
        assert_eq!(pkt.chunk_id, 0);
        assert!(pkt.payload.is_none());
    }

    #[test]
    fn source_emit_payload_is_selected_xor() {
        let mut r = rng(5);
        let msgs = random_messages(6, 12, &mut r);
        let src = Source::new(2, 3, Some(msgs.clone()));
        for chunk in 0..2 {
            let pkt = src.emit(chunk, &mut r).unwrap();
            let mut expect = BitVector::zeros(12);
            for j in 0..3 {
                if pkt.gev.get(j) {
                    expect.xor_assign(&msgs[chunk * 3 + j]);
                }
            }
            assert_eq!(pkt.payload.unwrap(), expect);
        }
    }

    #[test]
    fn source_emit_out_of_range() {
        let src = Source::new(2, 4, None);
        assert!(src.emit(2, &mut rng(0)).is_err());
    }

    #[test]
    fn source_emit_covers_all_gevs() {
        // alpha = 2: all four coding vectors eventually appear
        let src = Source::new(1, 2, None);
        let mut seen = [false; 4];
        for seed in 0..200 {
            let pkt = src.emit(0, &mut rng(seed)).unwrap();
            let idx = usize::from(pkt.gev.get(0)) | usize::from(pkt.gev.get(1)) << 1;
            seen[idx] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn recode_single_packet_copy_or_zero() {
        let mut buf = NodeBuffer::new(1, 8);
        let gev = BitVector::from_bits(&[1, 0, 1, 1, 0, 0, 1, 0]);
        buf.push(
            &Packet {
                chunk_id: 0,
                gev: gev.clone(),
                payload: None,
            },
            1.0,
        );
        let mut copies = 0;
        let mut zeros = 0;
        for seed in 0..64 {
            let pkt = buf
                .recode(0, 2.0, SlotPolicy::UpstreamFirst, &mut rng(seed))
                .unwrap();
            if pkt.gev == gev {
                copies += 1;
            } else if pkt.gev.is_zero() {
                zeros += 1;
            } else {
                panic!("recode of one packet must copy it or cancel it");
            }
        }
        assert!(copies > 0 && zeros > 0);
        assert_eq!(copies + zeros, 64);
    }

    #[test]
    fn recode_empty_chunk_yields_nothing() {
        let buf = NodeBuffer::new(2, 8);
        assert!(buf
            .recode(1, 5.0, SlotPolicy::UpstreamFirst, &mut rng(0))
            .is_none());
    }

    #[test]
    fn recode_strictly_later_excludes_same_instant() {
        let mut buf = NodeBuffer::new(1, 4);
        buf.push(
            &Packet {
                chunk_id: 0,
                gev: BitVector::from_bits(&[1, 1, 0, 0]),
                payload: None,
            },
            3.0,
        );
        assert!(buf
            .recode(0, 3.0, SlotPolicy::StrictlyLater, &mut rng(1))
            .is_none());
        assert!(buf
            .recode(0, 3.0, SlotPolicy::UpstreamFirst, &mut rng(1))
            .is_some());
        assert!(buf
            .recode(0, 3.5, SlotPolicy::StrictlyLater, &mut rng(1))
            .is_some());
    }

    #[test]
    fn recode_stays_in_span() {
        let mut r = rng(6);
        let mut buf = NodeBuffer::new(1, 16);
        let mut rows = Vec::new();
        for t in 0..10 {
            let gev = BitVector::random(16, &mut r).unwrap();
            rows.push(gev.clone());
            buf.push(
                &Packet {
                    chunk_id: 0,
                    gev,
                    payload: None,
                },
                t as f64,
            );
        }
        let base = BitMatrix::from_rows(&rows).unwrap();
        let rank = base.rank();
        for _ in 0..50 {
            let pkt = buf
                .recode(0, 100.0, SlotPolicy::UpstreamFirst, &mut r)
                .unwrap();
            let mut aug = base.clone();
            aug.push_row(&pkt.gev);
            assert_eq!(aug.rank(), rank, "recoded row left the buffer span");
        }
    }

    #[test]
    fn sink_rank_one_chunk_decodes_on_first_nonzero() {
        let mut sink = SinkState::new(2, 1, false);
        let zero = Packet {
            chunk_id: 0,
            gev: BitVector::zeros(1),
            payload: None,
        };
        let one = Packet {
            chunk_id: 0,
            gev: BitVector::from_bits(&[1]),
            payload: None,
        };
        let out = sink.ingest(zero, 1.0).unwrap();
        assert!(!out.innovative && !out.chunk_just_decoded);
        let out = sink.ingest(one, 2.0).unwrap();
        assert!(out.innovative && out.chunk_just_decoded);
        assert_eq!(sink.chunk(0).decoded_at, Some(2.0));
    }

    #[test]
    fn sink_duplicate_changes_counters_only() {
        let mut sink = SinkState::new(1, 4, false);
        let pkt = Packet {
            chunk_id: 0,
            gev: BitVector::from_bits(&[1, 0, 1, 0]),
            payload: None,
        };
        sink.ingest(pkt.clone(), 1.0).unwrap();
        let rank = sink.chunk(0).elim.rank();
        let out = sink.ingest(pkt, 2.0).unwrap();
        assert!(!out.innovative);
        assert_eq!(sink.chunk(0).elim.rank(), rank);
        assert_eq!(sink.chunk(0).received, 2);
        assert_eq!(sink.chunk(0).innovative, 1);
    }

    #[test]
    fn sink_decodes_on_alpha_independent_rows_any_order() {
        let alpha = 5;
        let mut r = rng(7);
        // build an invertible alpha x alpha set of rows
        let rows: Vec<BitVector> = loop {
            let cand: Vec<BitVector> = (0..alpha)
                .map(|_| BitVector::random(alpha, &mut r).unwrap())
                .collect();
            if BitMatrix::from_rows(&cand).unwrap().rank() == alpha {
                break cand;
            }
        };
        for perm_seed in 0..6u64 {
            let mut order: Vec<usize> = (0..alpha).collect();
            let mut pr = rng(100 + perm_seed);
            for i in (1..alpha).rev() {
                order.swap(i, (pr.next_u64() % (i as u64 + 1)) as usize);
            }
            let mut sink = SinkState::new(1, alpha, false);
            for (step, &idx) in order.iter().enumerate() {
                let out = sink
                    .ingest(
                        Packet {
                            chunk_id: 0,
                            gev: rows[idx].clone(),
                            payload: None,
                        },
                        (step + 1) as f64,
                    )
                    .unwrap();
                assert!(out.innovative);
            }
            assert_eq!(sink.chunk(0).decoded_at, Some(alpha as f64));
        }
    }

    #[test]
    fn sink_total_rank_monotone_and_capped() {
        let mut r = rng(40);
        let (q, alpha) = (3usize, 6usize);
        let mut sink = SinkState::new(q, alpha, false);
        let mut last = 0;
        for step in 0..200u64 {
            let chunk = (r.next_u64() % q as u64) as usize;
            let pkt = Packet {
                chunk_id: chunk,
                gev: BitVector::random(alpha, &mut r).unwrap(),
                payload: None,
            };
            sink.ingest(pkt, step as f64).unwrap();
            let rank = sink.total_rank();
            assert!(rank >= last, "total rank decreased");
            last = rank;
            for c in 0..q {
                assert!(sink.chunk(c).elim.rank() <= alpha);
            }
        }
        assert_eq!(last, q * alpha);
    }

    #[test]
    fn precode_identity_limit() {
        // vanishing tolerance with zero margin: k' = k, outputs are the messages
        let pc = PrecodeConfig::new(1e-18, 1e-18, 0).unwrap();
        assert_eq!(pc.k_prime(100), 100);
        let mut r = rng(8);
        let msgs = random_messages(5, 8, &mut r);
        let precode = Precode::generate(5, 5, &mut r).unwrap();
        assert_eq!(precode.encode(&msgs).unwrap(), msgs);
    }

    #[test]
    fn precode_rows_are_generator_weighted_xors() {
        let mut r = rng(9);
        let msgs = random_messages(4, 8, &mut r);
        let precode = Precode::generate(4, 8, &mut r).unwrap();
        let inter = precode.encode(&msgs).unwrap();
        for (i, out) in inter.iter().enumerate() {
            let row = precode.generator_row(i);
            let mut expect = BitVector::zeros(8);
            for (j, m) in msgs.iter().enumerate() {
                if row.get(j) {
                    expect.xor_assign(m);
                }
            }
            assert_eq!(out, &expect, "row {i}");
        }
    }

    #[test]
    fn precode_decode_full_and_systematic_survivors() {
        let mut r = rng(10);
        let msgs = random_messages(6, 8, &mut r);
        let precode = Precode::generate(6, 12, &mut r).unwrap();
        let inter = precode.encode(&msgs).unwrap();
        let all: Vec<usize> = (0..12).collect();
        assert_eq!(
            precode.decode(&all, &inter).unwrap().unwrap(),
            msgs,
            "all intermediates survive"
        );
        let sys: Vec<usize> = (0..6).collect();
        assert_eq!(
            precode.decode(&sys, &inter[..6]).unwrap().unwrap(),
            msgs,
            "systematic part survives"
        );
    }

    #[test]
    fn precode_decode_underdetermined_fails() {
        let mut r = rng(11);
        let msgs = random_messages(6, 8, &mut r);
        let precode = Precode::generate(6, 12, &mut r).unwrap();
        let inter = precode.encode(&msgs).unwrap();
        let few: Vec<usize> = (0..5).collect();
        assert!(precode.decode(&few, &inter[..5]).unwrap().is_none());
    }

    #[test]
    fn precode_decode_misaligned_is_error() {
        let mut r = rng(12);
        let precode = Precode::generate(4, 8, &mut r).unwrap();
        let vals = random_messages(3, 8, &mut r);
        assert!(matches!(
            precode.decode(&[0, 1], &vals),
            Err(CodecError::MisalignedSurvivors)
        ));
    }

    #[test]
    fn precode_survives_random_erasures_with_slack() {
        // erase e <= k' - k - 10 outputs: rank shortfall per trial is at most
        // 2^-10, so over 1e4 trials failures stay within Poisson noise of that
        let mut r = rng(13);
        let (k, k_prime) = (32usize, 64usize);
        let trials = 10_000;
        let mut failures = 0u64;
        for _ in 0..trials {
            let precode = Precode::generate(k, k_prime, &mut r).unwrap();
            let e_max = k_prime - k - 10;
            let e = (r.next_u64() % (e_max as u64 + 1)) as usize;
            // random survivor set of size k_prime - e
            let mut idx: Vec<usize> = (0..k_prime).collect();
            for i in (1..k_prime).rev() {
                idx.swap(i, (r.next_u64() % (i as u64 + 1)) as usize);
            }
            idx.truncate(k_prime - e);
            let mut elim = Eliminator::new(k);
            for &i in &idx {
                elim.insert(precode.generator_row(i).clone(), None).unwrap();
            }
            if !elim.is_complete() {
                failures += 1;
            }
        }
        let budget = trials as f64 * 2f64.powi(-10);
        assert!(
            (failures as f64) <= budget + 3.0 * budget.sqrt() + 1.0,
            "failures = {failures}"
        );
    }

    #[test]
    fn precode_decode_success_iff_rank_k() {
        let mut r = rng(14);
        let k = 8;
        for _ in 0..200 {
            let precode = Precode::generate(k, 12, &mut r).unwrap();
            let msgs = random_messages(k, 6, &mut r);
            let inter = precode.encode(&msgs).unwrap();
            let keep = 6 + (r.next_u64() % 7) as usize;
            let mut idx: Vec<usize> = (0..12).collect();
            for i in (1..12).rev() {
                idx.swap(i, (r.next_u64() % (i as u64 + 1)) as usize);
            }
            idx.truncate(keep);
            let rows: Vec<BitVector> =
                idx.iter().map(|&i| precode.generator_row(i).clone()).collect();
            let rank = BitMatrix::from_rows(&rows).unwrap().rank();
            let vals: Vec<BitVector> = idx.iter().map(|&i| inter[i].clone()).collect();
            let decoded = precode.decode(&idx, &vals).unwrap();
            assert_eq!(decoded.is_some(), rank == k);
            if let Some(d) = decoded {
                assert_eq!(d, msgs);
            }
        }
    }
}
