//! Two-phase scheme without CSIT for the case where Rx1 caches all of
//! message 2 and the transmitter is blind to Rx2's cache.
//!
//! Phase 1 sends one a-bit per slot, XORed with a fresh combination of `b`.
//! Rx1 strips `b` and reads the a-bit; Rx2 keeps the slots whose a-bit it
//! caches, each a pure equation of `b`. When Rx2 needs more than `m1` slots,
//! Phase 1 repeats a-bits, spread evenly over the message. Phase 2 sends
//! combinations of `a` to fill the bits Rx1 missed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{CacheAssignment, CsitScenario, StateSource};
use crate::error::ProtocolError;

use super::coding::{Source, Sweep, WindowCode};
use super::rx::{insert_received, Knowledge, Stage};
use super::{
    a_var, b_var, count, finish, new_link, require, Messages, Outcome, PhaseLength, PhasePlan,
    ProtocolConfig, ProtocolResult,
};

fn check(cfg: &ProtocolConfig) -> Result<(), ProtocolError> {
    cfg.validate()?;
    let p = &cfg.params;
    require(p.eps1 == 0.0, || format!("requires eps1 = 0, got {}", p.eps1))?;
    require(p.delta2 >= p.delta1, || {
        format!("requires delta2 >= delta1, got {} < {}", p.delta2, p.delta1)
    })?;
    require(cfg.m1 == 0 || p.delta1 < 1.0, || "delta1 = 1 leaves message 1 undeliverable".into())?;
    require(cfg.m2 == 0 || (p.delta2 < 1.0 && p.eps2 < 1.0 && cfg.m1 > 0), || {
        "message 2 needs delta2 < 1, eps2 < 1 and a nonempty message 1 to ride on".into()
    })?;
    Ok(())
}

/// Ratio `m1 / m2` at which both rates sit on the inner-bound corner.
pub fn corner_ratio(eps2: f64, delta2: f64) -> f64 {
    1.0 / ((1.0 - eps2) * (1.0 - delta2))
}

fn phase_one_slots(cfg: &ProtocolConfig, code_b: &WindowCode) -> usize {
    let p = &cfg.params;
    let useful = (1.0 - p.eps2) * (1.0 - p.delta2);
    let for_rx2 = cfg.slack().phase_slots(cfg.m2 as f64, 0.0, useful, Some(code_b));
    for_rx2.max(cfg.m1)
}

/// Unknown a-bits at Rx1 after Phase 1: mean and variance.
fn phase_one_gap(m1: usize, t1: usize, delta1: f64) -> (f64, f64) {
    if m1 == 0 {
        return (0.0, 0.0);
    }
    let (base, extra) = (t1 / m1, t1 % m1);
    let miss = |c: usize| delta1.powi(c as i32);
    let (lo, hi) = (miss(base), miss(base + 1));
    let mean = extra as f64 * hi + (m1 - extra) as f64 * lo;
    let var = extra as f64 * hi * (1.0 - hi) + (m1 - extra) as f64 * lo * (1.0 - lo);
    (mean, var)
}

fn phase_two_slots(cfg: &ProtocolConfig, t1: usize, code_a: &WindowCode) -> usize {
    let d1 = cfg.params.delta1;
    let (need, var) = phase_one_gap(cfg.m1, t1, d1);
    cfg.slack().phase_slots(need, var, 1.0 - d1, Some(code_a))
}

fn codes(cfg: &ProtocolConfig) -> (WindowCode, WindowCode) {
    (WindowCode::new(cfg.m2, 1.0), WindowCode::new(cfg.m1, cfg.params.delta1))
}

pub fn phase_plan(cfg: &ProtocolConfig) -> Result<PhasePlan, ProtocolError> {
    check(cfg)?;
    let (code_b, code_a) = codes(cfg);
    let t1 = phase_one_slots(cfg, &code_b);
    let t2 = phase_two_slots(cfg, t1, &code_a);
    let mut out = PhasePlan::default();
    out.push("1", PhaseLength::Fixed(t1), "one a-bit per slot XOR a combination of message 2");
    out.push("2", PhaseLength::Fixed(t2), "combinations of message 1");
    Ok(out)
}

pub fn run_nn_blind_inner(
    cfg: &ProtocolConfig,
    cache: &CacheAssignment,
    msgs: &Messages,
    states: StateSource,
    coding_seed: u64,
) -> Result<ProtocolResult, ProtocolError> {
    check(cfg)?;
    msgs.check(cfg)?;
    let (m1, m2) = (cfg.m1, cfg.m2);
    let nvars = m1 + m2;
    let mut rng = ChaCha8Rng::seed_from_u64(coding_seed);
    let all = msgs.concat();
    let src_a = Source::gather(&all, (0..m1).map(a_var).collect());
    let src_b = Source::gather(&all, (0..m2).map(|j| b_var(m1, j)).collect());
    let (code_b, code_a) = codes(cfg);
    let t1 = phase_one_slots(cfg, &code_b);
    let t2 = phase_two_slots(cfg, t1, &code_a);

    let mut k1 = Knowledge::new(nvars);
    for j in 0..m2 {
        k1.learn(b_var(m1, j), msgs.b.get(j));
    }
    let mut k2 = Knowledge::new(nvars);
    for j in cache.e2.ones() {
        k2.learn(a_var(j), msgs.a.get(j));
    }
    let mut st2 = Stage::over_unknown(nvars, src_b.vars.iter().copied(), &k2);

    let mut link = new_link(cfg, CsitScenario::NN, states);
    let mut sweep = Sweep::new(&mut rng);
    link.begin_phase("1");
    for i in 0..t1 {
        // Repeats are spread evenly over `a` so Rx1's misses stay uniform.
        let j = i * m1 / t1;
        let g = code_b.draw(sweep.next_position(), &mut rng);
        let mix = g.eval(&src_b.bits);
        let a_j = m1 > 0 && msgs.a.get(j);
        let out = link.send(a_j ^ mix)?;
        if let (Some(y), true) = (out.rx1.bit(), m1 > 0) {
            k1.learn(a_var(j), y ^ mix);
        }
        if let (Some(y), true) = (out.rx2.bit(), m1 > 0 && k2.knows(a_var(j))) {
            let mut e = st2.equation(y);
            e.term(a_var(j), &k2).combination(&g, &src_b, &k2);
            let built = e.build();
            st2.insert(built);
        }
    }

    let mut st1 = Stage::over_unknown(nvars, src_a.vars.iter().copied(), &k1);
    link.begin_phase("2");
    for _ in 0..t2 {
        let g = code_a.draw(sweep.next_position(), &mut rng);
        let out = link.send(g.eval(&src_a.bits))?;
        if let Some(y) = out.rx1.bit() {
            insert_received(&mut st1, &k1, y, &[(&g, &src_a)]);
        }
    }

    let equations = vec![count(1, "message 1 missed in phase 1", &st1), count(2, "message 2", &st2)];
    let decoded1 = if st1.solve_into(&mut k1) { k1.extract((0..m1).map(a_var)) } else { None };
    let decoded2 = if st2.solve_into(&mut k2) { k2.extract((0..m2).map(|j| b_var(m1, j))) } else { None };
    Ok(finish(link, Outcome { decoded1, decoded2, equations, arq: None, arq_split: None }))
}
