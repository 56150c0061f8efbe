//! Single-phase scheme for the symmetric channel with no CSIT and a blind
//! transmitter: random combinations of both messages together, enough for
//! each receiver to solve its own message plus the uncached part of the
//! other one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{CacheAssignment, CsitScenario, StateSource};
use crate::error::ProtocolError;

use super::coding::{Source, Sweep, WindowCode};
use super::rx::{insert_received, Knowledge, Stage};
use super::{
    a_var, b_var, close, count, finish, new_link, require, Messages, Outcome, PhaseLength,
    PhasePlan, ProtocolConfig, ProtocolResult,
};

fn check(cfg: &ProtocolConfig) -> Result<(f64, f64), ProtocolError> {
    cfg.validate()?;
    let p = &cfg.params;
    require(close(p.delta1, p.delta2) && close(p.eps1, p.eps2), || {
        format!(
            "requires a symmetric channel, got delta = ({}, {}), eps = ({}, {})",
            p.delta1, p.delta2, p.eps1, p.eps2
        )
    })?;
    require(cfg.m1 == cfg.m2, || format!("requires m1 = m2, got {} and {}", cfg.m1, cfg.m2))?;
    require(p.eps1 > 0.0, || {
        "eps = 0 means full side information; send each message with its own fountain".into()
    })?;
    require(cfg.m1 == 0 || p.delta1 < 1.0, || "delta = 1 leaves both messages undeliverable".into())?;
    Ok((p.delta1, p.eps1))
}

fn slots(cfg: &ProtocolConfig, delta: f64, eps: f64, code: &WindowCode) -> usize {
    let m = cfg.m1 as f64;
    cfg.slack().phase_slots((1.0 + eps) * m, m * eps * (1.0 - eps), 1.0 - delta, Some(code))
}

fn code_for(m: usize, eps: f64) -> WindowCode {
    WindowCode::new(2 * m, (1.0 + eps) / 2.0)
}

pub fn phase_plan(cfg: &ProtocolConfig) -> Result<PhasePlan, ProtocolError> {
    let (delta, eps) = check(cfg)?;
    let n = slots(cfg, delta, eps, &code_for(cfg.m1, eps));
    let mut out = PhasePlan::default();
    out.push("I", PhaseLength::Fixed(n), "combinations of both messages");
    Ok(out)
}

pub fn run_nn_blind_symmetric(
    cfg: &ProtocolConfig,
    cache: &CacheAssignment,
    msgs: &Messages,
    states: StateSource,
    coding_seed: u64,
) -> Result<ProtocolResult, ProtocolError> {
    let (delta, eps) = check(cfg)?;
    msgs.check(cfg)?;
    let m = cfg.m1;
    let nvars = 2 * m;
    let mut rng = ChaCha8Rng::seed_from_u64(coding_seed);
    // Interleaved so that a_j and b_j share windows.
    let vars: Vec<u32> = (0..m).flat_map(|j| [a_var(j), b_var(m, j)]).collect();
    let src = Source::gather(&msgs.concat(), vars);
    let code = code_for(m, eps);
    let n = slots(cfg, delta, eps, &code);

    let mut k1 = Knowledge::new(nvars);
    for j in cache.e1.ones() {
        k1.learn(b_var(m, j), msgs.b.get(j));
    }
    let mut k2 = Knowledge::new(nvars);
    for j in cache.e2.ones() {
        k2.learn(a_var(j), msgs.a.get(j));
    }
    let mut st1 = Stage::over_unknown(nvars, src.vars.iter().copied(), &k1);
    let mut st2 = Stage::over_unknown(nvars, src.vars.iter().copied(), &k2);

    let mut link = new_link(cfg, CsitScenario::NN, states);
    let mut sweep = Sweep::new(&mut rng);
    link.begin_phase("I");
    for _ in 0..n {
        let g = code.draw(sweep.next_position(), &mut rng);
        let out = link.send(g.eval(&src.bits))?;
        if let Some(y) = out.rx1.bit() {
            insert_received(&mut st1, &k1, y, &[(&g, &src)]);
        }
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut st2, &k2, y, &[(&g, &src)]);
        }
    }
    let equations = vec![count(1, "both messages", &st1), count(2, "both messages", &st2)];
    let decoded1 = if st1.solve_into(&mut k1) { k1.extract((0..m).map(a_var)) } else { None };
    let decoded2 = if st2.solve_into(&mut k2) { k2.extract((0..m).map(|j| b_var(m, j))) } else { None };
    Ok(finish(link, Outcome { decoded1, decoded2, equations, arq: None, arq_split: None }))
}
