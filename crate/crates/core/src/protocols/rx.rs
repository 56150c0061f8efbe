//! Receiver-side bookkeeping: which variables a receiver knows, and staged
//! elimination over the ones it does not.

use crate::gf2::{BitVector, Eliminator, Equation, Insert, SolveOutcome};

use super::coding::{Combination, Source};

/// Values a receiver has learned, indexed by global variable id.
#[derive(Clone, Debug)]
pub struct Knowledge {
    known: BitVector,
    value: BitVector,
}

impl Knowledge {
    pub fn new(vars: usize) -> Self {
        Self { known: BitVector::zeros(vars), value: BitVector::zeros(vars) }
    }

    pub fn learn(&mut self, var: u32, value: bool) {
        self.known.set(var as usize, true);
        self.value.set(var as usize, value);
    }

    pub fn get(&self, var: u32) -> Option<bool> {
        self.known.get(var as usize).then(|| self.value.get(var as usize))
    }

    pub fn knows(&self, var: u32) -> bool {
        self.known.get(var as usize)
    }

    /// Values of `vars` in order, or `None` if any is unknown.
    pub fn extract(&self, vars: impl Iterator<Item = u32>) -> Option<BitVector> {
        let vals: Option<Vec<bool>> = vars.map(|v| self.get(v)).collect();
        vals.map(|v| BitVector::from_bools(&v))
    }
}

const ABSENT: u32 = u32::MAX;

/// One elimination over an ordered set of unknown variables. Column order
/// follows the order the unknowns are declared in, so declaring them in
/// source order keeps windowed combinations banded.
#[derive(Clone, Debug)]
pub struct Stage {
    col_of: Vec<u32>,
    var_of: Vec<u32>,
    elim: Eliminator,
    offered: usize,
}

impl Stage {
    pub fn new(vars: usize, unknowns: impl IntoIterator<Item = u32>) -> Self {
        let mut col_of = vec![ABSENT; vars];
        let mut var_of = Vec::new();
        for v in unknowns {
            if col_of[v as usize] == ABSENT {
                col_of[v as usize] = var_of.len() as u32;
                var_of.push(v);
            }
        }
        let elim = Eliminator::new(var_of.len());
        Self { col_of, var_of, elim, offered: 0 }
    }

    /// Unknowns of this stage that `know` does not already hold.
    pub fn over_unknown(
        vars: usize,
        candidates: impl IntoIterator<Item = u32>,
        know: &Knowledge,
    ) -> Self {
        Self::new(vars, candidates.into_iter().filter(|&v| !know.knows(v)))
    }

    pub fn unknowns(&self) -> usize {
        self.var_of.len()
    }

    pub fn rank(&self) -> usize {
        self.elim.rank()
    }

    pub fn offered(&self) -> usize {
        self.offered
    }

    /// Starts an equation with right-hand side `rhs`.
    pub fn equation(&self, rhs: bool) -> EqBuilder<'_> {
        let mut eq = Equation::new();
        eq.add_rhs(rhs);
        EqBuilder { stage: self, eq, usable: true }
    }

    pub fn insert(&mut self, b: Built) -> Option<Insert> {
        let Built(eq) = b;
        let eq = eq?;
        self.offered += 1;
        // Receptions are noiseless, so once every unknown is pinned a
        // further equation can only be a consistent combination.
        if self.elim.is_full_rank() {
            return Some(Insert::Redundant);
        }
        Some(self.elim.insert(eq))
    }

    /// Solves and records the unknowns in `know`. Returns false when the
    /// system is rank deficient or inconsistent.
    pub fn solve_into(&self, know: &mut Knowledge) -> bool {
        match self.elim.solve() {
            SolveOutcome::Solution(x) => {
                for (c, &v) in self.var_of.iter().enumerate() {
                    know.learn(v, x.get(c));
                }
                true
            }
            _ => false,
        }
    }
}

/// Equation under construction; terms are substituted if known, mapped to a
/// column if they are unknowns of the stage, and make the equation unusable
/// otherwise.
pub struct EqBuilder<'a> {
    stage: &'a Stage,
    eq: Equation,
    usable: bool,
}

/// Finished equation, `None` when it involved a variable outside the stage.
pub struct Built(Option<Equation>);

impl EqBuilder<'_> {
    pub fn term(&mut self, var: u32, know: &Knowledge) -> &mut Self {
        if let Some(v) = know.get(var) {
            self.eq.add_rhs(v);
        } else {
            match self.stage.col_of[var as usize] {
                ABSENT => self.usable = false,
                c => self.eq.toggle(c as usize),
            }
        }
        self
    }

    pub fn combination(&mut self, comb: &Combination, src: &Source, know: &Knowledge) -> &mut Self {
        self.eq.reserve(comb.weight());
        for p in comb.positions() {
            self.term(src.vars[p], know);
        }
        self
    }

    pub fn add_rhs(&mut self, bit: bool) -> &mut Self {
        self.eq.add_rhs(bit);
        self
    }

    pub fn build(&mut self) -> Built {
        let eq = std::mem::take(&mut self.eq);
        Built(self.usable.then_some(eq))
    }
}

/// Inserts `y = Σ parts` into `stage`, substituting what `know` holds.
pub fn insert_received(
    stage: &mut Stage,
    know: &Knowledge,
    y: bool,
    parts: &[(&Combination, &Source)],
) -> Option<Insert> {
    let mut b = stage.equation(y);
    for (comb, src) in parts {
        b.combination(comb, src, know);
    }
    let built = b.build();
    stage.insert(built)
}
