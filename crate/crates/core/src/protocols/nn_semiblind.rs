//! Two-phase scheme without CSIT where the transmitter knows Rx2's cache.
//!
//! Phase I, segment a: combinations of message 2 only, enough for Rx1 to
//! resolve the part of message 2 it has not cached. Segment b: combinations
//! of the message-1 bits cached at Rx2, XORed with fresh combinations of
//! message 2. Rx1 removes message 2 and learns the cached-at-Rx2 bits; Rx2
//! removes its cached bits and collects more equations of message 2.
//! Phase II: combinations of the message-1 bits Rx2 has not cached.

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

struct Plan {
    t_a: usize,
    t_b: usize,
    t2: usize,
    code_b: WindowCode,
    code_c: WindowCode,
    code_u: WindowCode,
    cached: Vec<u32>,
    uncached: Vec<u32>,
}

fn check(cfg: &ProtocolConfig) -> Result<(), ProtocolError> {
    cfg.validate()?;
    let p = &cfg.params;
    require(p.delta2 >= p.delta1, || {
        format!("requires delta2 >= delta1, got {} < {}", p.delta2, p.delta1)
    })?;
    require(cfg.m1 == 0 || p.delta1 < 1.0, || "delta1 = 1 leaves message 1 undeliverable".into())?;
    require(cfg.m2 == 0 || p.delta2 < 1.0, || "delta2 = 1 leaves message 2 undeliverable".into())?;
    Ok(())
}

fn plan(cfg: &ProtocolConfig, e2: &crate::gf2::BitVector) -> Plan {
    let p = &cfg.params;
    let slack = cfg.slack();
    let (m1, m2) = (cfg.m1, cfg.m2);
    let (p1, p2) = (1.0 - p.delta1, 1.0 - p.delta2);
    let cached: Vec<u32> = (0..m1).filter(|&j| e2.get(j)).map(a_var).collect();
    let uncached: Vec<u32> = (0..m1).filter(|&j| !e2.get(j)).map(a_var).collect();

    let d_b = if p.eps1 > 0.0 { p.eps1 } else { 1.0 };
    let code_b = WindowCode::new(m2, d_b);
    let code_c = WindowCode::new(cached.len(), 1.0);
    let code_u = WindowCode::new(uncached.len(), 1.0);

    let need_a = p.eps1 * m2 as f64;
    let var_a = m2 as f64 * p.eps1 * (1.0 - p.eps1);
    let t_a = if m2 > 0 && p.eps1 > 0.0 { slack.phase_slots(need_a, var_a, p1, Some(&code_b)) } else { 0 };
    let n_b_rx1 = slack.phase_slots(cached.len() as f64, 0.0, p1, Some(&code_c));
    let n_rx2 = slack.phase_slots(m2 as f64, 0.0, p2, Some(&code_b));
    let t_b = n_b_rx1.max(n_rx2.saturating_sub(t_a));
    let t2 = slack.phase_slots(uncached.len() as f64, 0.0, p1, Some(&code_u));
    Plan { t_a, t_b, t2, code_b, code_c, code_u, cached, uncached }
}

/// Phase plan for the given Rx2 cache mask.
pub fn phase_plan(
    cfg: &ProtocolConfig,
    e2: &crate::gf2::BitVector,
) -> Result<PhasePlan, ProtocolError> {
    check(cfg)?;
    let pl = plan(cfg, e2);
    let mut out = PhasePlan::default();
    out.push("I-a", PhaseLength::Fixed(pl.t_a), "combinations of message 2");
    out.push(
        "I-b",
        PhaseLength::Fixed(pl.t_b),
        "combinations of Rx2-cached message-1 bits XOR combinations of message 2",
    );
    out.push("II", PhaseLength::Fixed(pl.t2), "combinations of message-1 bits not cached at Rx2");
    Ok(out)
}

pub fn run_nn_semiblind(
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

    // Transmitter side: only e2 is consulted.
    let pl = plan(cfg, &cache.e2);
    let all = msgs.concat();
    let src_b = Source::gather(&all, (0..m2).map(|j| b_var(m1, j)).collect());
    let src_c = Source::gather(&all, pl.cached.clone());
    let src_u = Source::gather(&all, pl.uncached.clone());

    // Receiver knowledge from caches.
    let mut k1 = Knowledge::new(nvars);
    for j in cache.e1.ones() {
        k1.learn(b_var(m1, j), msgs.b.get(j));
    }
    let mut k2 = Knowledge::new(nvars);
    for j in cache.e2.ones() {
        k2.learn(a_var(j), msgs.a.get(j));
    }

    let mut rx1_b = Stage::over_unknown(nvars, src_b.vars.iter().copied(), &k1);
    let mut rx2_b = Stage::over_unknown(nvars, src_b.vars.iter().copied(), &k2);
    let mut equations = Vec::new();

    let mut link = new_link(cfg, CsitScenario::NN, states);
    let mut sweep_b = Sweep::new(&mut rng);
    let mut sweep_c = Sweep::new(&mut rng);
    let mut sweep_u = Sweep::new(&mut rng);

    link.begin_phase("I-a");
    for _ in 0..pl.t_a {
        let g = pl.code_b.draw(sweep_b.next_position(), &mut rng);
        let out = link.send(g.eval(&src_b.bits))?;
        if let Some(y) = out.rx1.bit() {
            insert_received(&mut rx1_b, &k1, y, &[(&g, &src_b)]);
        }
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut rx2_b, &k2, y, &[(&g, &src_b)]);
        }
    }
    equations.push(count(1, "message 2 after I-a", &rx1_b));
    let rx1_knows_b = rx1_b.solve_into(&mut k1);
    drop(rx1_b);

    let mut rx1_c = Stage::over_unknown(nvars, src_c.vars.iter().copied(), &k1);
    link.begin_phase("I-b");
    for _ in 0..pl.t_b {
        let h = pl.code_c.draw(sweep_c.next_position(), &mut rng);
        let g = pl.code_b.draw(sweep_b.next_position(), &mut rng);
        let out = link.send(h.eval(&src_c.bits) ^ g.eval(&src_b.bits))?;
        if let (Some(y), true) = (out.rx1.bit(), rx1_knows_b) {
            insert_received(&mut rx1_c, &k1, y, &[(&h, &src_c), (&g, &src_b)]);
        }
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut rx2_b, &k2, y, &[(&h, &src_c), (&g, &src_b)]);
        }
    }
    equations.push(count(1, "cached-at-Rx2 message 1", &rx1_c));
    equations.push(count(2, "message 2", &rx2_b));
    let rx1_knows_c = rx1_knows_b && rx1_c.solve_into(&mut k1);
    drop(rx1_c);
    let rx2_ok = rx2_b.solve_into(&mut k2);

    let mut rx1_u = Stage::over_unknown(nvars, src_u.vars.iter().copied(), &k1);
    link.begin_phase("II");
    for _ in 0..pl.t2 {
        let h = pl.code_u.draw(sweep_u.next_position(), &mut rng);
        let out = link.send(h.eval(&src_u.bits))?;
        if let Some(y) = out.rx1.bit() {
            insert_received(&mut rx1_u, &k1, y, &[(&h, &src_u)]);
        }
    }
    equations.push(count(1, "uncached-at-Rx2 message 1", &rx1_u));
    let rx1_ok = rx1_knows_c && rx1_u.solve_into(&mut k1);

    let decoded1 = if rx1_ok { k1.extract((0..m1).map(a_var)) } else { None };
    let decoded2 = if rx2_ok { k2.extract((0..m2).map(|j| b_var(m1, j))) } else { None };
    Ok(finish(link, Outcome { decoded1, decoded2, equations, arq: None, arq_split: None }))
}
