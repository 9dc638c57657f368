//! Bit-packed GF(2) vectors and matrices.
//!
//! Rows are packed little-endian into `u64` words (bit `i` of a vector lives
//! in word `i / 64` at position `i % 64`). Rank and decoding use XOR-based
//! Gaussian elimination with deterministic pivoting: pivots are taken in
//! column order and ties are broken by the lowest row index, so identical
//! inputs always eliminate identically.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("vector length must be positive")]
    EmptyVector,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

const WORD_BITS: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Fixed-length vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Vector with each bit drawn independently and uniformly from the stream.
    /// Identical stream state yields the identical vector.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self, Gf2Error> {
        if len == 0 {
            return Err(Gf2Error::EmptyVector);
        }
        let mut words = vec![0u64; words_for(len)];
        for w in &mut words {
            *w = rng.next_u64();
        }
        let mut v = Self { len, words };
        v.mask_tail();
        Ok(v)
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.set(i, true);
            }
        }
        v
    }

    /// Builds a vector from packed words; bits past `len` are cleared.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(words_for(len), 0);
        let mut v = Self { len, words };
        v.mask_tail();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn xor_assign(&mut self, other: &Self) {
        assert_eq!(self.len, other.len, "xor of unequal-length vectors");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Index of the lowest set bit, if any.
    pub fn first_set_bit(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * WORD_BITS + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    // Bits past `len` in the last word must stay zero.
    fn mask_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter_bits() {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// See [`BitVector::random`]. Kept as a free function because callers often
/// want "a fresh uniform row" without naming the type.
pub fn random_row<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<BitVector, Gf2Error> {
    BitVector::random(len, rng)
}

/// Row-major packed matrix over GF(2). Zero rows or columns are allowed.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, cols);
        if cols == 0 {
            return m;
        }
        for r in 0..rows {
            for w in m.row_words_mut(r) {
                *w = rng.next_u64();
            }
            m.mask_row_tail(r);
        }
        m
    }

    /// Builds a matrix from equal-length rows. An empty slice yields 0x0.
    pub fn from_rows(rows: &[BitVector]) -> Result<Self, Gf2Error> {
        let cols = rows.first().map_or(0, BitVector::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Gf2Error::DimensionMismatch(
                "rows have differing lengths".into(),
            ));
        }
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            m.row_words_mut(i).copy_from_slice(r.words());
        }
        Ok(m)
    }

    /// Test helper: rows given as 0/1 byte slices.
    pub fn from_bit_rows(rows: &[&[u8]]) -> Self {
        let vecs: Vec<BitVector> = rows.iter().map(|r| BitVector::from_bits(r)).collect();
        Self::from_rows(&vecs).expect("equal-length literal rows")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        (self.data[r * self.stride + c / WORD_BITS] >> (c % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        let mask = 1u64 << (c % WORD_BITS);
        let w = &mut self.data[r * self.stride + c / WORD_BITS];
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    fn mask_row_tail(&mut self, r: usize) {
        let rem = self.cols % WORD_BITS;
        if rem != 0 && self.stride > 0 {
            self.data[r * self.stride + self.stride - 1] &= (1u64 << rem) - 1;
        }
    }

    pub fn row(&self, r: usize) -> BitVector {
        BitVector {
            len: self.cols,
            words: self.row_words(r).to_vec(),
        }
    }

    pub fn push_row(&mut self, v: &BitVector) {
        assert_eq!(v.len(), self.cols, "pushed row has wrong length");
        self.data.extend_from_slice(v.words());
        self.rows += 1;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Matrix product over GF(2): each output row XORs the rhs rows selected
    /// by the set bits of the corresponding lhs row.
    pub fn multiply(&self, rhs: &Self) -> Result<Self, Gf2Error> {
        if self.cols != rhs.rows {
            return Err(Gf2Error::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    let (dst, src) = (r * out.stride, c * rhs.stride);
                    for w in 0..out.stride {
                        out.data[dst + w] ^= rhs.data[src + w];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Row rank over GF(2). Empty matrices have rank 0; the input is untouched.
    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        let mut work = self.data.clone();
        let stride = self.stride;
        let mut pivot_row = 0usize;
        let mut scratch = vec![0u64; stride];
        for col in 0..self.cols {
            let (wi, mask) = (col / WORD_BITS, 1u64 << (col % WORD_BITS));
            let Some(found) = (pivot_row..self.rows).find(|&r| work[r * stride + wi] & mask != 0)
            else {
                continue;
            };
            if found != pivot_row {
                let (a, b) = (found * stride, pivot_row * stride);
                for w in 0..stride {
                    work.swap(a + w, b + w);
                }
            }
            scratch.copy_from_slice(&work[pivot_row * stride..(pivot_row + 1) * stride]);
            for r in (pivot_row + 1)..self.rows {
                if work[r * stride + wi] & mask != 0 {
                    let base = r * stride;
                    for w in 0..stride {
                        work[base + w] ^= scratch[w];
                    }
                }
            }
            pivot_row += 1;
            if pivot_row == self.rows {
                break;
            }
        }
        pivot_row
    }

    /// Solve `self * x = payloads` by Gauss-Jordan elimination.
    ///
    /// Succeeds exactly when the column rank equals `cols`, returning the
    /// unique message sequence in column order. Otherwise reports the rank
    /// achieved and the columns for which no pivot exists.
    pub fn eliminate_decode(
        &self,
        payloads: &[BitVector],
    ) -> Result<DecodeOutcome, Gf2Error> {
        if payloads.len() != self.rows {
            return Err(Gf2Error::DimensionMismatch(format!(
                "{} payload rows for a {}-row matrix",
                payloads.len(),
                self.rows
            )));
        }
        let payload_dim = payloads.first().map_or(0, BitVector::len);
        if payloads.iter().any(|p| p.len() != payload_dim) {
            return Err(Gf2Error::DimensionMismatch(
                "payload rows have differing lengths".into(),
            ));
        }
        let mut elim = Eliminator::with_payload(self.cols);
        for (r, payload) in payloads.iter().enumerate() {
            elim.insert(self.row(r), Some(payload.clone()))?;
        }
        if let Some(messages) = elim.solve() {
            Ok(DecodeOutcome::Decoded(messages))
        } else {
            Ok(DecodeOutcome::InsufficientRank {
                rank: elim.rank(),
                missing_pivots: elim.missing_pivots(),
            })
        }
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "{:?}", self.row(r))?;
        }
        Ok(())
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded(Vec<BitVector>),
    InsufficientRank {
        rank: usize,
        missing_pivots: Vec<usize>,
    },
}

const NO_ROW: u32 = u32::MAX;

/// Incremental XOR-basis eliminator.
///
/// Stored rows sit in echelon form: each has a distinct pivot (its lowest
/// set bit) and no bits below it. An incoming row is reduced by chasing its
/// current lowest set bit through the pivot table, so it is innovative
/// exactly when something nonzero remains. Rows live in one contiguous
/// buffer; optional payload rows follow every XOR and are back-substituted
/// only when [`Eliminator::solve`] is called.
#[derive(Clone)]
pub struct Eliminator {
    cols: usize,
    stride: usize,
    data: Vec<u64>,
    pivot_of_row: Vec<usize>,
    row_at_pivot: Vec<u32>,
    payloads: Option<Vec<BitVector>>,
}

impl Eliminator {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            stride: words_for(cols),
            data: Vec::new(),
            pivot_of_row: Vec::new(),
            row_at_pivot: vec![NO_ROW; cols],
            payloads: None,
        }
    }

    pub fn with_payload(cols: usize) -> Self {
        Self {
            payloads: Some(Vec::new()),
            ..Self::new(cols)
        }
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.pivot_of_row.len()
    }

    #[inline]
    pub fn is_complete(&self) -> bool {
        self.rank() == self.cols
    }

    pub fn basis_row(&self, i: usize) -> BitVector {
        BitVector::from_words(self.cols, self.data[i * self.stride..(i + 1) * self.stride].to_vec())
    }

    /// Inserts a row, returning whether it increased the rank. Dependent rows
    /// are dropped.
    pub fn insert(
        &mut self,
        gev: BitVector,
        payload: Option<BitVector>,
    ) -> Result<bool, Gf2Error> {
        if gev.len() != self.cols {
            return Err(Gf2Error::DimensionMismatch(format!(
                "row of length {} into an eliminator over {} columns",
                gev.len(),
                self.cols
            )));
        }
        match (&self.payloads, &payload) {
            (Some(_), None) => {
                return Err(Gf2Error::DimensionMismatch(
                    "payload-tracking eliminator given a row without payload".into(),
                ))
            }
            (None, Some(_)) => {
                return Err(Gf2Error::DimensionMismatch(
                    "payload row given to an eliminator without payload tracking".into(),
                ))
            }
            _ => {}
        }
        let mut incoming = gev.words;
        let mut incoming_payload = payload;
        let mut w = 0usize;
        while w < self.stride {
            let word = incoming[w];
            if word == 0 {
                w += 1;
                continue;
            }
            let bit = w * WORD_BITS + word.trailing_zeros() as usize;
            let row = self.row_at_pivot[bit];
            if row == NO_ROW {
                // innovative: store with pivot `bit`
                let idx = self.pivot_of_row.len();
                self.row_at_pivot[bit] = idx as u32;
                self.pivot_of_row.push(bit);
                self.data.extend_from_slice(&incoming);
                if let (Some(stored), Some(pl)) = (self.payloads.as_mut(), incoming_payload) {
                    stored.push(pl);
                }
                return Ok(true);
            }
            let base = row as usize * self.stride;
            for (a, b) in incoming[w..].iter_mut().zip(&self.data[base + w..base + self.stride]) {
                *a ^= b;
            }
            if let (Some(pl), Some(stored)) = (
                incoming_payload.as_mut(),
                self.payloads.as_ref().map(|v| &v[row as usize]),
            ) {
                pl.xor_assign(stored);
            }
        }
        Ok(false)
    }

    /// Columns without a pivot so far.
    pub fn missing_pivots(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|&c| self.row_at_pivot[c] == NO_ROW)
            .collect()
    }

    /// Recovers the message vectors once the rank equals the column count:
    /// back-substitutes the echelon rows and returns payloads in pivot
    /// (column) order.
    pub fn solve(&self) -> Option<Vec<BitVector>> {
        if !self.is_complete() {
            return None;
        }
        let payloads = self.payloads.as_ref()?;
        let mut rows = self.data.clone();
        let mut values = payloads.clone();
        let stride = self.stride;
        // highest pivot down: clear the pivot column above its own row
        for p in (0..self.cols).rev() {
            let src = self.row_at_pivot[p] as usize;
            let (wi, mask) = (p / WORD_BITS, 1u64 << (p % WORD_BITS));
            for r in 0..self.pivot_of_row.len() {
                if r != src && rows[r * stride + wi] & mask != 0 {
                    let src_base = src * stride;
                    let dst_base = r * stride;
                    for wj in wi..stride {
                        let v = rows[src_base + wj];
                        rows[dst_base + wj] ^= v;
                    }
                    let (a, b) = if r < src {
                        let (lo, hi) = values.split_at_mut(src);
                        (&mut lo[r], &hi[0])
                    } else {
                        let (lo, hi) = values.split_at_mut(r);
                        (&mut hi[0], &lo[src])
                    };
                    a.xor_assign(b);
                }
            }
        }
        Some(
            (0..self.cols)
                .map(|p| values[self.row_at_pivot[p] as usize].clone())
                .collect(),
        )
    }
}
