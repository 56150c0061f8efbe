//! ARQ-plus-fountain scheme for delayed CSIT from Rx1 when Rx1 caches all of
//! message 2.
//!
//! Each slot sends the current a-bit XOR a fresh combination of `b`; the
//! a-bit advances once delayed feedback shows Rx1 heard it. Rx1 strips `b`
//! and reads `a` directly. Rx2 strips cached a-bits, and cancels an uncached
//! a-bit by XORing consecutive receptions that carry it. A short tail of pure
//! `b` combinations, sized from the Rx1 feedback and the expected equation
//! yield, closes the rank gap that the ARQ loop leaves at finite length.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{CacheAssignment, CsitScenario, ReceiverId, StateSource};
use crate::error::ProtocolError;
use crate::gf2::BitVector;

use super::coding::{Combination, Slack, Source, Sweep, WindowCode};
use super::rx::{insert_received, Knowledge, Stage};
use super::{
    a_var, b_var, count, finish, new_link, require, ArqRepeatStats, Messages, Outcome,
    PhaseLength, PhasePlan, ProtocolConfig, ProtocolResult,
};

fn check(cfg: &ProtocolConfig) -> Result<(), ProtocolError> {
    cfg.validate()?;
    let p = &cfg.params;
    require(p.eps1 == 0.0, || format!("requires eps1 = 0, got {}", p.eps1))?;
    require(cfg.m1 == 0 || p.delta1 < 1.0, || "delta1 = 1 leaves message 1 undeliverable".into())?;
    require(cfg.m2 == 0 || p.delta2 < 1.0, || "delta2 = 1 leaves message 2 undeliverable".into())?;
    Ok(())
}

pub fn phase_plan(cfg: &ProtocolConfig) -> Result<PhasePlan, ProtocolError> {
    check(cfg)?;
    let p = &cfg.params;
    let arq = cfg.m1 as f64 / (1.0 - p.delta1);
    let yield_ = expected_yield(cfg.m1 as f64, p.delta1, p.delta2, p.eps2);
    let gap = (cfg.m2 as f64 - yield_).max(0.0);
    let mut out = PhasePlan::default();
    out.push(
        "ARQ",
        PhaseLength::FeedbackTerminated { expected: arq },
        "a-bit XOR combination of message 2; advance when Rx1 hears it",
    );
    let tail = if cfg.m2 == 0 { 0.0 } else { gap / (1.0 - p.delta2) };
    out.push(
        "tail",
        PhaseLength::FeedbackTerminated { expected: tail },
        "combinations of message 2, sized from Rx1 feedback",
    );
    Ok(out)
}

/// Expected pure equations of message 2 at Rx2 from the ARQ loop.
fn expected_yield(m1: f64, delta1: f64, delta2: f64, eps2: f64) -> f64 {
    let ek = (1.0 - delta2) / (1.0 - delta1);
    let p0 = (1.0 - delta1) * delta2 / (1.0 - delta1 * delta2);
    m1 * ((1.0 - eps2) * ek + eps2 * (ek - 1.0 + p0))
}

/// Mean and variance of the pure equations one a-bit sent `l` times yields
/// at Rx2, given whether Rx2 caches it.
fn yield_given_repeats(l: u32, p2: f64, cached: bool) -> (f64, f64) {
    let l = l as f64;
    let (mk, vk) = (l * p2, l * p2 * (1.0 - p2));
    if cached {
        (mk, vk)
    } else {
        let q0 = (1.0 - p2).powf(l);
        (mk - 1.0 + q0, vk + q0 * (1.0 - q0) - 2.0 * mk * q0)
    }
}

/// Tail slots after the ARQ loop, from the repeat counts the transmitter saw.
fn tail_slots(slack: &Slack, m2: usize, p2: f64, repeats: &[u32], e2: &BitVector, code: &WindowCode) -> usize {
    if m2 == 0 {
        return 0;
    }
    let (mut mean, mut var) = (0.0, 0.0);
    for (j, &l) in repeats.iter().enumerate() {
        let (mu, v) = yield_given_repeats(l, p2, e2.get(j));
        mean += mu;
        var += v;
    }
    let gap = (m2 as f64 - mean).max(0.0);
    let margin = slack.margin(m2 as f64, var + gap * (1.0 - p2), Some(code));
    ((m2 as f64 - mean + margin).max(0.0) / p2).ceil() as usize
}

pub fn run_dn_semiblind_case_b(
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
    let p2 = 1.0 - cfg.params.delta2;
    let mut rng = ChaCha8Rng::seed_from_u64(coding_seed);
    let all = msgs.concat();
    let src_b = Source::gather(&all, (0..m2).map(|j| b_var(m1, j)).collect());
    let code = WindowCode::new(m2, 1.0);

    // Rx1 knows b entirely; Rx2 knows its cached a-bits.
    let mut k1 = Knowledge::new(nvars);
    for j in 0..m2 {
        k1.learn(b_var(m1, j), msgs.b.get(j));
    }
    let mut k2 = Knowledge::new(nvars);
    for j in cache.e2.ones() {
        k2.learn(a_var(j), msgs.a.get(j));
    }
    let mut st2 = Stage::over_unknown(nvars, src_b.vars.iter().copied(), &k2);

    let mut link = new_link(cfg, CsitScenario::DN(ReceiverId::One), states);
    let mut repeats = Vec::with_capacity(m1);
    let (mut cached_stats, mut uncached_stats, mut all_stats) =
        (ArqRepeatStats::default(), ArqRepeatStats::default(), ArqRepeatStats::default());

    link.begin_phase("ARQ");
    for j in 0..m1 {
        let a_j = msgs.a.get(j);
        // Windows follow the a-bit index so aligned pairs stay local.
        let pos = (j as f64 + 0.5) / m1 as f64;
        let mut pending: Option<(bool, Combination)> = None;
        let (mut l, mut k) = (0u32, 0u32);
        loop {
            let g = code.draw(pos, &mut rng);
            let out = link.send(a_j ^ g.eval(&src_b.bits))?;
            l += 1;
            if let Some(y) = out.rx1.bit() {
                k1.learn(a_var(j), y ^ g.eval(&src_b.bits));
            }
            if let Some(y) = out.rx2.bit() {
                k += 1;
                if k2.knows(a_var(j)) {
                    let mut e = st2.equation(y);
                    e.term(a_var(j), &k2).combination(&g, &src_b, &k2);
                    let built = e.build();
                    st2.insert(built);
                } else {
                    // Each reception after the first pairs with the previous one.
                    if let Some((y0, g0)) = &pending {
                        insert_received(&mut st2, &k2, y ^ y0, &[(&g, &src_b), (g0, &src_b)]);
                    }
                    pending = Some((y, g));
                }
            }
            if link.feedback().last(ReceiverId::One) == Some(true) {
                break;
            }
        }
        repeats.push(l);
        all_stats.push(l, k);
        if cache.e2.get(j) {
            cached_stats.push(l, k);
        } else {
            uncached_stats.push(l, k);
        }
    }

    link.begin_phase("tail");
    let tail = tail_slots(&cfg.slack(), m2, p2, &repeats, &cache.e2, &code);
    let mut sweep = Sweep::new(&mut rng);
    for _ in 0..tail {
        let g = code.draw(sweep.next_position(), &mut rng);
        let out = link.send(g.eval(&src_b.bits))?;
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut st2, &k2, y, &[(&g, &src_b)]);
        }
    }

    let equations = vec![count(2, "message 2", &st2)];
    let decoded1 = k1.extract((0..m1).map(a_var));
    let decoded2 = if st2.solve_into(&mut k2) { k2.extract((0..m2).map(|j| b_var(m1, j))) } else { None };
    Ok(finish(
        link,
        Outcome {
            decoded1,
            decoded2,
            equations,
            arq: Some(all_stats),
            arq_split: Some((cached_stats, uncached_stats)),
        },
    ))
}

