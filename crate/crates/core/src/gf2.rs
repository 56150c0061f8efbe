//! Bit-packed linear algebra over GF(2).
//!
//! [`BitVector`] and [`BitMatrix`] store bits in `u64` words, least significant
//! bit first. [`solve`] and [`rank`] run dense elimination; [`Eliminator`] is an
//! incremental row-echelon workspace used by the protocol decoders, where rows
//! arrive one at a time and usually touch a narrow band of columns.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Gf2Error;

const WORD: usize = 64;

/// Mask of the bits strictly above bit `c % 64` within its word.
#[inline]
fn above(c: usize) -> u64 {
    let b = c % WORD;
    if b == WORD - 1 {
        0
    } else {
        !0u64 << (b + 1)
    }
}

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Fixed-length vector of bits.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Parses a string of `0`/`1` characters, index 0 first.
    pub fn from_bit_str(s: &str) -> Option<Self> {
        let bits: Option<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        bits.map(|b| Self::from_bools(&b))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// In-place XOR. Panics on length mismatch; use [`BitVector::try_xor_assign`]
    /// for a checked variant.
    pub fn xor_assign(&mut self, other: &BitVector) {
        self.try_xor_assign(other).expect("xor of vectors with different lengths");
    }

    pub fn try_xor_assign(&mut self, other: &BitVector) -> Result<(), Gf2Error> {
        if self.len != other.len {
            return Err(Gf2Error::LengthMismatch { left: self.len, right: other.len });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of the set bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + b)
                }
            })
        })
    }

    /// The 64 bits starting at bit `pos`, zero beyond the end.
    #[inline]
    pub fn word_at(&self, pos: usize) -> u64 {
        let wi = pos / WORD;
        let sh = pos % WORD;
        let lo = self.words.get(wi).copied().unwrap_or(0);
        if sh == 0 {
            return lo;
        }
        let hi = self.words.get(wi + 1).copied().unwrap_or(0);
        (lo >> sh) | (hi << (WORD - sh))
    }

    /// Gathers the bits at `indices` into a new vector.
    pub fn gather(&self, indices: &[usize]) -> BitVector {
        let mut out = BitVector::zeros(indices.len());
        for (k, &i) in indices.iter().enumerate() {
            if self.get(i) {
                out.set(k, true);
            }
        }
        out
    }

    pub fn to_bit_string(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len <= 128 {
            write!(f, "BitVector({})", self.to_bit_string())
        } else {
            write!(f, "BitVector(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

/// Uniformly random vector: every bit is an independent fair coin.
pub fn random_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> BitVector {
    let mut v = BitVector::zeros(len);
    for w in v.words.iter_mut() {
        *w = rng.gen();
    }
    v.clear_tail();
    v
}

/// Vector whose bits are independently 1 with probability `p`.
pub fn bernoulli_vector<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> BitVector {
    let mut v = BitVector::zeros(len);
    if p >= 1.0 {
        for i in 0..len {
            v.set(i, true);
        }
    } else if p > 0.0 {
        for i in 0..len {
            if rng.gen_bool(p) {
                v.set(i, true);
            }
        }
    }
    v
}

impl BitVector {
    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

/// Inner product over GF(2).
pub fn dot(coeffs: &BitVector, msg: &BitVector) -> Result<bool, Gf2Error> {
    if coeffs.len != msg.len {
        return Err(Gf2Error::LengthMismatch { left: coeffs.len, right: msg.len });
    }
    let ones: u32 = coeffs.words.iter().zip(&msg.words).map(|(a, b)| (a & b).count_ones()).sum();
    Ok(ones % 2 == 1)
}

/// Row-major dense bit matrix.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self { rows, cols, stride, data: vec![0; rows * stride] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(0, cols);
        for _ in 0..rows {
            m.push_row(&random_vector(cols, rng));
        }
        m
    }

    pub fn from_rows(cols: usize, rows: &[BitVector]) -> Result<Self, Gf2Error> {
        let mut m = Self::zeros(0, cols);
        for r in rows {
            if r.len() != cols {
                return Err(Gf2Error::LengthMismatch { left: cols, right: r.len() });
            }
            m.push_row(r);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.stride + c / WORD];
        let mask = 1u64 << (c % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Appends a row; panics if its length differs from `cols`.
    pub fn push_row(&mut self, row: &BitVector) {
        assert_eq!(row.len(), self.cols, "row length must equal column count");
        self.data.extend_from_slice(&row.words);
        self.rows += 1;
    }

    pub fn row(&self, r: usize) -> BitVector {
        assert!(r < self.rows);
        BitVector { len: self.cols, words: self.row_words(r).to_vec() }
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    /// Matrix-vector product `self · x`.
    pub fn mul_vec(&self, x: &BitVector) -> Result<BitVector, Gf2Error> {
        if x.len() != self.cols {
            return Err(Gf2Error::LengthMismatch { left: self.cols, right: x.len() });
        }
        let mut out = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            let ones: u32 =
                self.row_words(r).iter().zip(&x.words).map(|(a, b)| (a & b).count_ones()).sum();
            if ones % 2 == 1 {
                out.set(r, true);
            }
        }
        Ok(out)
    }

    fn xor_rows(&mut self, dst: usize, src: usize, from_word: usize) {
        debug_assert_ne!(dst, src);
        let s = self.stride;
        let (d, sr) = if dst < src {
            let (lo, hi) = self.data.split_at_mut(src * s);
            (&mut lo[dst * s..(dst + 1) * s], &hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(dst * s);
            (&mut hi[..s], &lo[src * s..(src + 1) * s])
        };
        for (a, b) in d[from_word..].iter_mut().zip(&sr[from_word..]) {
            *a ^= b;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        for w in 0..s {
            self.data.swap(a * s + w, b * s + w);
        }
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        if self.rows <= 32 && self.cols <= 128 {
            for r in 0..self.rows {
                writeln!(f, "  {}", self.row(r).to_bit_string())?;
            }
        }
        Ok(())
    }
}

/// `coefficients · x = rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSystem {
    coefficients: BitMatrix,
    rhs: BitVector,
}

impl LinearSystem {
    pub fn new(coefficients: BitMatrix, rhs: BitVector) -> Result<Self, Gf2Error> {
        if coefficients.rows() != rhs.len() {
            return Err(Gf2Error::LengthMismatch { left: coefficients.rows(), right: rhs.len() });
        }
        Ok(Self { coefficients, rhs })
    }

    pub fn coefficients(&self) -> &BitMatrix {
        &self.coefficients
    }

    pub fn rhs(&self) -> &BitVector {
        &self.rhs
    }
}

/// Result of [`solve`]. Rank-deficient and inconsistent systems are ordinary
/// outcomes rather than errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Solution(BitVector),
    Underdetermined { rank: usize },
    Inconsistent,
}

impl SolveOutcome {
    pub fn solution(self) -> Option<BitVector> {
        match self {
            SolveOutcome::Solution(x) => Some(x),
            _ => None,
        }
    }
}

/// Reduces `m` to row-echelon form in place, returning the pivot columns.
/// The pivot for each column is the lowest-index remaining row with that bit set.
fn echelon(m: &mut BitMatrix) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut next = 0;
    for c in 0..m.cols {
        if next == m.rows {
            break;
        }
        let w = c / WORD;
        let bit = 1u64 << (c % WORD);
        let Some(p) = (next..m.rows).find(|&r| m.data[r * m.stride + w] & bit != 0) else {
            continue;
        };
        m.swap_rows(next, p);
        for r in next + 1..m.rows {
            if m.data[r * m.stride + w] & bit != 0 {
                m.xor_rows(r, next, w);
            }
        }
        pivots.push(c);
        next += 1;
    }
    pivots
}

/// Row rank over GF(2).
pub fn rank(m: &BitMatrix) -> usize {
    let mut work = m.clone();
    echelon(&mut work).len()
}

/// Solves a linear system by forward elimination and back-substitution.
pub fn solve(sys: &LinearSystem) -> SolveOutcome {
    let a = &sys.coefficients;
    let n = a.cols;
    // Augment with the right-hand side as an extra column.
    let mut aug = BitMatrix::zeros(a.rows, n + 1);
    for r in 0..a.rows {
        let dst = r * aug.stride;
        aug.data[dst..dst + a.stride].copy_from_slice(a.row_words(r));
        if sys.rhs.get(r) {
            aug.set(r, n, true);
        }
    }
    let pivots = echelon(&mut aug);
    if pivots.last() == Some(&n) {
        return SolveOutcome::Inconsistent;
    }
    if pivots.len() < n {
        return SolveOutcome::Underdetermined { rank: pivots.len() };
    }
    let mut x = BitVector::zeros(n);
    for (r, &c) in pivots.iter().enumerate().rev() {
        let row = aug.row_words(r);
        let mut acc = (row[n / WORD] >> (n % WORD)) & 1 == 1;
        for (wi, &word) in row.iter().enumerate() {
            let mut w = word;
            if wi == c / WORD {
                w &= above(c);
            } else if wi < c / WORD {
                continue;
            }
            if wi == n / WORD {
                w &= !(1u64 << (n % WORD));
            }
            let xw = x.words.get(wi).copied().unwrap_or(0);
            acc ^= (w & xw).count_ones() % 2 == 1;
        }
        x.set(c, acc);
    }
    SolveOutcome::Solution(x)
}

// ============================================================================
// Incremental elimination
// ============================================================================

/// A row stored as a window of words starting at word index `lo`.
#[derive(Clone, Debug)]
struct SpanRow {
    lo: usize,
    words: Vec<u64>,
    rhs: bool,
}

impl SpanRow {
    fn xor_with(&mut self, other: &SpanRow) {
        debug_assert!(other.lo >= self.lo);
        let off = other.lo - self.lo;
        let need = off + other.words.len();
        if self.words.len() < need {
            self.words.resize(need, 0);
        }
        for (a, b) in self.words[off..].iter_mut().zip(&other.words) {
            *a ^= b;
        }
        self.rhs ^= other.rhs;
    }
}

/// Builder for one equation in an [`Eliminator`].
#[derive(Clone, Debug, Default)]
pub struct Equation {
    cols: Vec<usize>,
    rhs: bool,
}

impl Equation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Toggles a column; toggling twice cancels.
    pub fn toggle(&mut self, col: usize) {
        self.cols.push(col);
    }

    pub fn add_rhs(&mut self, bit: bool) {
        self.rhs ^= bit;
    }

    /// Reserves room for `additional` more toggles.
    pub fn reserve(&mut self, additional: usize) {
        self.cols.reserve(additional);
    }

    pub fn rhs(&self) -> bool {
        self.rhs
    }

    fn into_span(self) -> Option<SpanRow> {
        let lo = self.cols.iter().min()? / WORD;
        let hi = self.cols.iter().max()? / WORD;
        let mut words = vec![0u64; hi - lo + 1];
        for c in self.cols {
            words[c / WORD - lo] ^= 1u64 << (c % WORD);
        }
        Some(SpanRow { lo, words, rhs: self.rhs })
    }
}

/// What happened to an equation offered to an [`Eliminator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Insert {
    /// Increased the rank.
    Innovative,
    /// Reduced to `0 = 0`.
    Redundant,
    /// Reduced to `0 = 1`.
    Contradiction,
}

/// Incremental row-echelon form over `cols` unknowns.
///
/// Each stored row has a distinct leading column. Rows are kept as word spans,
/// so the cost of an insertion is proportional to the width of the columns it
/// touches rather than to `cols`.
#[derive(Clone, Debug)]
pub struct Eliminator {
    cols: usize,
    pivot_of: Vec<u32>,
    rows: Vec<SpanRow>,
    contradictions: usize,
}

const NO_PIVOT: u32 = u32::MAX;

impl Eliminator {
    pub fn new(cols: usize) -> Self {
        Self { cols, pivot_of: vec![NO_PIVOT; cols], rows: Vec::new(), contradictions: 0 }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rows.len() == self.cols
    }

    pub fn contradictions(&self) -> usize {
        self.contradictions
    }

    /// Fixes one unknown to a value.
    pub fn insert_known(&mut self, col: usize, value: bool) -> Insert {
        let mut e = Equation::new();
        e.toggle(col);
        e.add_rhs(value);
        self.insert(e)
    }

    pub fn insert(&mut self, eq: Equation) -> Insert {
        debug_assert!(eq.cols.iter().all(|&c| c < self.cols));
        let rhs = eq.rhs;
        let Some(mut row) = eq.into_span() else {
            return self.record_empty(rhs);
        };
        let mut from = 0;
        loop {
            // Find the leading bit at or after word `from` of the row window.
            let mut lead = None;
            while from < row.words.len() {
                let w = row.words[from];
                if w != 0 {
                    lead = Some((row.lo + from) * WORD + w.trailing_zeros() as usize);
                    break;
                }
                from += 1;
            }
            let Some(c) = lead else {
                return self.record_empty(row.rhs);
            };
            let p = self.pivot_of[c];
            if p == NO_PIVOT {
                // Trim leading zero words so the stored row starts at its lead.
                row.words.drain(..from);
                row.lo += from;
                while row.words.last() == Some(&0) {
                    row.words.pop();
                }
                self.pivot_of[c] = self.rows.len() as u32;
                self.rows.push(row);
                return Insert::Innovative;
            }
            row.xor_with(&self.rows[p as usize]);
        }
    }

    fn record_empty(&mut self, rhs: bool) -> Insert {
        if rhs {
            self.contradictions += 1;
            Insert::Contradiction
        } else {
            Insert::Redundant
        }
    }

    /// Back-substitutes once every column has a pivot.
    pub fn solve(&self) -> SolveOutcome {
        if self.contradictions > 0 {
            return SolveOutcome::Inconsistent;
        }
        if !self.is_full_rank() {
            return SolveOutcome::Underdetermined { rank: self.rank() };
        }
        let mut x = BitVector::zeros(self.cols);
        for c in (0..self.cols).rev() {
            let row = &self.rows[self.pivot_of[c] as usize];
            let mut acc = row.rhs;
            for (i, &word) in row.words.iter().enumerate() {
                let wi = row.lo + i;
                let mut w = word;
                if wi == c / WORD {
                    w &= above(c);
                }
                if w != 0 {
                    acc ^= (w & x.words[wi]).count_ones() % 2 == 1;
                }
            }
            x.set(c, acc);
        }
        SolveOutcome::Solution(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dot_examples() {
        let c = BitVector::from_bit_str("1101").unwrap();
        let m = BitVector::from_bit_str("1011").unwrap();
        assert!(!dot(&c, &m).unwrap());
        assert!(dot(&BitVector::zeros(3), &BitVector::zeros(4)).is_err());
    }

    #[test]
    fn solve_small_cases() {
        let id = BitMatrix::identity(5);
        let r = BitVector::from_bit_str("10110").unwrap();
        let sys = LinearSystem::new(id, r.clone()).unwrap();
        assert_eq!(solve(&sys), SolveOutcome::Solution(r));

        let a = BitMatrix::from_rows(
            3,
            &[BitVector::from_bit_str("110").unwrap(), BitVector::from_bit_str("011").unwrap()],
        )
        .unwrap();
        let sys = LinearSystem::new(a, BitVector::zeros(2)).unwrap();
        assert!(matches!(solve(&sys), SolveOutcome::Underdetermined { rank: 2 }));

        let a = BitMatrix::from_rows(
            2,
            &[BitVector::from_bit_str("11").unwrap(), BitVector::from_bit_str("11").unwrap()],
        )
        .unwrap();
        let sys = LinearSystem::new(a, BitVector::from_bit_str("10").unwrap()).unwrap();
        assert_eq!(solve(&sys), SolveOutcome::Inconsistent);
    }

    #[test]
    fn eliminator_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 5, 63, 64, 65, 130] {
            let x = random_vector(n, &mut rng);
            let a = BitMatrix::random(n + 12, n, &mut rng);
            let rhs = a.mul_vec(&x).unwrap();
            let mut e = Eliminator::new(n);
            for r in 0..a.rows() {
                let mut eq = Equation::new();
                for c in a.row(r).ones() {
                    eq.toggle(c);
                }
                eq.add_rhs(rhs.get(r));
                assert_ne!(e.insert(eq), Insert::Contradiction);
            }
            let dense = solve(&LinearSystem::new(a.clone(), rhs).unwrap());
            assert_eq!(e.solve(), dense);
        }
    }
}
