//! Random linear combination streams and phase sizing.
//!
//! A [`WindowCode`] draws combinations whose nonzero coefficients are i.i.d.
//! fair coins inside a window of consecutive source positions. The window
//! position of each symbol comes from a [`Sweep`], a golden-ratio sequence
//! that covers the source evenly over any prefix of the stream. When the
//! window is at least as long as the source, every combination is a uniform
//! random vector over the whole source.

use rand::Rng;

use crate::gf2::BitVector;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Window width, in multiples of the square root of the expected number of
/// unknowns per source position.
const WINDOW_SCALE: f64 = 5.0;
const MIN_WINDOW: usize = 64;
/// Densities below this are treated as this when sizing windows.
const MIN_DENSITY: f64 = 0.1;
/// Scale of [`WindowCode::band_overhead`].
const BAND_TAIL: f64 = 10.0;

/// Golden-ratio sequence of window positions in `[0, 1)`.
#[derive(Clone, Debug)]
pub struct Sweep {
    f: f64,
}

impl Sweep {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self { f: rng.gen() }
    }

    pub fn next_position(&mut self) -> f64 {
        self.f += GOLDEN;
        if self.f >= 1.0 {
            self.f -= 1.0;
        }
        self.f
    }
}

/// Random combinations over a source of `len` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowCode {
    len: usize,
    window: usize,
}

impl WindowCode {
    /// Window sized for receivers whose unknowns make up at least `density`
    /// of the source.
    pub fn new(len: usize, density: f64) -> Self {
        let d = density.clamp(MIN_DENSITY, 1.0);
        let w = (WINDOW_SCALE * (len as f64 / d).sqrt()).ceil() as usize;
        Self { len, window: w.max(MIN_WINDOW).min(len) }
    }

    /// Window of `window` positions, capped at the source length.
    pub fn with_window(len: usize, window: usize) -> Self {
        Self { len, window: window.min(len) }
    }

    /// Combinations over the whole source.
    pub fn dense(len: usize) -> Self {
        Self { len, window: len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Extra equations, beyond what a dense code needs, that cover the rank
    /// loss of a banded code in nearly all draws. Fitted to the upper tail of
    /// simulated overheads, which grows like the square root of the number of
    /// disjoint windows.
    pub fn band_overhead(&self) -> f64 {
        if self.window >= self.len || self.window == 0 {
            0.0
        } else {
            BAND_TAIL * (self.len as f64 / self.window as f64).sqrt()
        }
    }

    /// Draws a combination centred according to `position` in `[0, 1)`.
    pub fn draw<R: Rng + ?Sized>(&self, position: f64, rng: &mut R) -> Combination {
        if self.len == 0 {
            return Combination { start: 0, len: 0, words: Vec::new() };
        }
        let (lo, hi) = if self.window >= self.len {
            (0, self.len)
        } else {
            let span = (self.len + self.window) as f64;
            let s = (position * span).floor() as isize - self.window as isize;
            let lo = s.max(0) as usize;
            let hi = ((s + self.window as isize).max(0) as usize).min(self.len);
            (lo, hi)
        };
        let len = hi - lo;
        let mut words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.gen()).collect();
        if len % 64 != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        Combination { start: lo, len, words }
    }
}

/// Coefficients of one combination: bit `k` of `words` is the coefficient of
/// source position `start + k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Combination {
    start: usize,
    len: usize,
    words: Vec<u64>,
}

impl Combination {
    pub fn empty() -> Self {
        Self { start: 0, len: 0, words: Vec::new() }
    }

    /// Inner product with the source bits.
    pub fn eval(&self, source: &BitVector) -> bool {
        let mut acc = 0u32;
        for (k, &w) in self.words.iter().enumerate() {
            acc ^= (w & source.word_at(self.start + 64 * k)).count_ones() & 1;
        }
        acc == 1
    }

    /// Number of nonzero coefficients.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Source positions with coefficient 1.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        let start = self.start;
        self.words.iter().enumerate().flat_map(move |(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(start + 64 * k + b)
                }
            })
        })
    }

    pub fn as_vector(&self, source_len: usize) -> BitVector {
        let mut v = BitVector::zeros(source_len);
        for p in self.positions() {
            v.set(p, true);
        }
        v
    }
}

/// A message segment fed to a [`WindowCode`]: the gathered bits plus the
/// global variable id of every source position.
#[derive(Clone, Debug)]
pub struct Source {
    pub bits: BitVector,
    pub vars: Vec<u32>,
}

impl Source {
    pub fn new(bits: BitVector, vars: Vec<u32>) -> Self {
        debug_assert_eq!(bits.len(), vars.len());
        Self { bits, vars }
    }

    /// Source made of the variables `vars` whose values are read from `all`
    /// (indexed by variable id).
    pub fn gather(all: &BitVector, vars: Vec<u32>) -> Self {
        let idx: Vec<usize> = vars.iter().map(|&v| v as usize).collect();
        Self { bits: all.gather(&idx), vars }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

// ============================================================================
// Phase sizing
// ============================================================================

/// Extra equations always requested on top of the statistical margin.
const RANK_MARGIN: f64 = 8.0;
/// Divisor of the `k^(2/3)` growth term.
const GROWTH_DIVISOR: f64 = 8.0;

/// Margin rule for phases that must deliver a target number of equations.
///
/// For a goal of `need` equations, the margin is
/// `c·σ + need^(2/3)/GROWTH_DIVISOR + RANK_MARGIN + band overhead`, where `σ`
/// is the standard deviation of the shortfall and `c` is the slack
/// coefficient. The `need^(2/3)` term makes the failure probability vanish as
/// messages grow; the `c·σ` term sets it at moderate sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slack {
    pub coeff: f64,
}

impl Slack {
    pub fn new(coeff: f64) -> Self {
        Self { coeff }
    }

    /// Margin in equations for a goal with mean `need`, shortfall variance
    /// `var`, coded with `code` (or uncoded when `None`).
    pub fn margin(&self, need: f64, var: f64, code: Option<&WindowCode>) -> f64 {
        if need <= 0.0 {
            return 0.0;
        }
        let band = code.map_or(0.0, |c| c.band_overhead());
        self.coeff * var.max(0.0).sqrt() + need.powf(2.0 / 3.0) / GROWTH_DIVISOR + RANK_MARGIN + band
    }

    /// Slots of a fixed-length phase that must deliver `need` equations to a
    /// receiver hearing each slot with probability `p`; `need_var` is the
    /// variance of `need` itself as seen by the transmitter.
    pub fn phase_slots(&self, need: f64, need_var: f64, p: f64, code: Option<&WindowCode>) -> usize {
        if need <= 0.0 {
            return 0;
        }
        // Receptions over n ≈ need/p slots have variance n·p·(1−p).
        let var = need_var + need * (1.0 - p);
        ((need + self.margin(need, var, code)) / p).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::{dot, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_matches_dense_dot() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1usize, 63, 64, 65, 500, 3000] {
            let src = random_vector(len, &mut rng);
            let code = WindowCode::new(len, 0.5);
            let mut sweep = Sweep::new(&mut rng);
            for _ in 0..50 {
                let c = code.draw(sweep.next_position(), &mut rng);
                assert_eq!(c.eval(&src), dot(&c.as_vector(len), &src).unwrap());
            }
        }
    }

    #[test]
    fn dense_window_covers_everything() {
        let code = WindowCode::new(60, 1.0);
        assert_eq!(code.window(), 60);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = code.draw(0.99, &mut rng);
        assert_eq!((c.start, c.len), (0, 60));
    }

    #[test]
    fn sweep_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = Sweep::new(&mut rng);
        let mut bins = [0usize; 10];
        for _ in 0..1000 {
            bins[(s.next_position() * 10.0) as usize] += 1;
        }
        assert!(bins.iter().all(|&b| (98..=102).contains(&b)), "{bins:?}");
    }
}
