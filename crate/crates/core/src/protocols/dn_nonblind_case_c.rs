//! Four-phase recycling scheme for delayed CSIT from Rx1 with a transmitter
//! that knows both caches.
//!
//! Phase I sends the a-bits Rx2 has not cached, once each; those Rx1 missed
//! are recycled. Phase II sends combinations of the b-bits Rx1 has not
//! cached; the combinations Rx1 heard become super-variables, values Rx1
//! knows and Rx2 must learn. Phases III and IV run ARQ for Rx1 over the
//! Rx2-cached a-bits and then the recycled bits, each slot XORed with
//! combinations of the super-variables and of the Rx1-cached b-bits.
//!
//! Rx2 first solves the super-system over (super-variables, Rx1-cached
//! b-bits), then the uncached b-bits from the Phase II combinations. A tail
//! of pure super-system combinations, sized from Rx1 feedback, closes the
//! finite-length rank gap as in the single-cache scheme.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{CacheAssignment, CsitScenario, Link, ReceiverId, StateSource};
use crate::error::ProtocolError;
use crate::gf2::BitVector;

use super::coding::{Combination, Slack, Source, Sweep, WindowCode};
use super::rx::{insert_received, Knowledge, Stage};
use super::{
    a_var, b_var, count, finish, new_link, require, ArqRepeatStats, EquationCount, Messages,
    Outcome, PhaseLength, PhasePlan, ProtocolConfig, ProtocolResult,
};

/// Window width of the super-system, in multiples of the square root of its
/// expected unknown count.
const SUPER_WINDOW_SCALE: f64 = 5.0;

fn check(cfg: &ProtocolConfig) -> Result<(), ProtocolError> {
    cfg.validate()?;
    let p = &cfg.params;
    require(cfg.m1 == 0 || p.delta1 < 1.0, || "delta1 = 1 leaves message 1 undeliverable".into())?;
    require(cfg.m2 == 0 || p.delta2 < 1.0, || "delta2 = 1 leaves message 2 undeliverable".into())?;
    let (need, have) = nominal_super_balance(cfg);
    require(need <= have + balance_tol(cfg), || {
        format!(
            "message sizes ({}, {}) leave Rx2 short of equations for the super-system: \
             needs {need:.3}, expects {have:.3}",
            cfg.m1, cfg.m2
        )
    })
}

fn balance_tol(cfg: &ProtocolConfig) -> f64 {
    1e-9 * (1.0 + cfg.m1 as f64 + cfg.m2 as f64)
}

/// Nominal phase lengths without slack.
struct Nominal {
    t1: f64,
    t2: f64,
    t3: f64,
    t4: f64,
}

fn nominal(cfg: &ProtocolConfig) -> Nominal {
    let p = &cfg.params;
    let (m1, m2) = (cfg.m1 as f64, cfg.m2 as f64);
    let t1 = p.eps2 * m1;
    let t2 = if p.eps1 > 0.0 { p.eps1 * m2 / (1.0 - p.delta1 * p.delta2) } else { 0.0 };
    let t3 = (1.0 - p.eps2) * m1 / (1.0 - p.delta1);
    let t4 = p.delta1 * t1 / (1.0 - p.delta1);
    Nominal { t1, t2, t3, t4 }
}

/// Super-system size and expected Rx2 equations at nominal lengths.
fn nominal_super_balance(cfg: &ProtocolConfig) -> (f64, f64) {
    let p = &cfg.params;
    let (d1, d2) = (p.delta1, p.delta2);
    let n = nominal(cfg);
    let need = n.t2 * (1.0 - d1) + (1.0 - p.eps1) * cfg.m2 as f64;
    let have = n.t2 * (1.0 - d1) * (1.0 - d2)
        + (1.0 - p.eps2) * cfg.m1 as f64 * (1.0 - d2) / (1.0 - d1)
        + n.t1 * d1 * (1.0 - d2) * (1.0 / (1.0 - d1) - d2 / (1.0 - d1 * d2));
    (need, have)
}

pub fn phase_plan(cfg: &ProtocolConfig) -> Result<PhasePlan, ProtocolError> {
    check(cfg)?;
    let p = &cfg.params;
    let n = nominal(cfg);
    let uncached_b = (p.eps1 * cfg.m2 as f64).round();
    let t2 = phase_two_slots(&cfg.slack(), uncached_b as usize, p.delta1, p.delta2);
    let (need, have) = nominal_super_balance(cfg);
    // Below the balance tolerance of `check` the gap is rounding noise.
    let gap = need - have;
    let gap = if gap <= balance_tol(cfg) { 0.0 } else { gap };
    let mut out = PhasePlan::default();
    out.push("I", PhaseLength::Fixed(n.t1.round() as usize), "a-bits not cached at Rx2, once each");
    out.push(
        "II",
        PhaseLength::Fixed(t2),
        "combinations of b-bits not cached at Rx1; those Rx1 hears become super-variables",
    );
    out.push(
        "III",
        PhaseLength::FeedbackTerminated { expected: n.t3 },
        "ARQ over Rx2-cached a-bits XOR super-system combinations",
    );
    out.push(
        "IV",
        PhaseLength::FeedbackTerminated { expected: n.t4 },
        "ARQ over recycled a-bits XOR super-system combinations",
    );
    out.push(
        "tail",
        PhaseLength::FeedbackTerminated { expected: gap / (1.0 - p.delta2) },
        "super-system combinations, sized from Rx1 feedback",
    );
    Ok(out)
}

fn phase_two_slots(slack: &Slack, uncached_b: usize, delta1: f64, delta2: f64) -> usize {
    let code = WindowCode::new(uncached_b, 1.0);
    slack.phase_slots(uncached_b as f64, 0.0, 1.0 - delta1 * delta2, Some(&code))
}

/// Pair of window codes over (super-variables, Rx1-cached b-bits) that cover
/// the same fraction of each source.
struct SuperCode {
    sup: WindowCode,
    b1: WindowCode,
}

impl SuperCode {
    fn new(n_sup: usize, n_b1: usize, unknowns: f64) -> Self {
        let frac = if unknowns > 0.0 { SUPER_WINDOW_SCALE / unknowns.sqrt() } else { 1.0 };
        let width = |len: usize| ((frac * len as f64).ceil() as usize).max(64);
        Self {
            sup: WindowCode::with_window(n_sup, width(n_sup)),
            b1: WindowCode::with_window(n_b1, width(n_b1)),
        }
    }

    fn draw(&self, pos: f64, rng: &mut ChaCha8Rng) -> (Combination, Combination) {
        (self.sup.draw(pos, rng), self.b1.draw(pos, rng))
    }

    fn band_overhead(&self) -> f64 {
        self.sup.band_overhead().max(self.b1.band_overhead())
    }
}

/// Mean and variance of pure super-system equations at Rx2 from an a-bit
/// sent `l` times. `heard` is the probability Rx2 already knows the bit.
fn yield_given_repeats(l: u32, p2: f64, heard: f64) -> (f64, f64) {
    let l = l as f64;
    let (mk, vk) = (l * p2, l * p2 * (1.0 - p2));
    let q0 = (1.0 - p2).powf(l);
    let (ma, va) = (mk - 1.0 + q0, vk + q0 * (1.0 - q0) - 2.0 * mk * q0);
    let mean = heard * mk + (1.0 - heard) * ma;
    let var = heard * (vk + mk * mk) + (1.0 - heard) * (va + ma * ma) - mean * mean;
    (mean, var)
}

struct Rx2Super {
    know: Knowledge,
    stage: Stage,
}

/// One ARQ phase over `bits`; Rx1 strips the super-system part.
#[allow(clippy::too_many_arguments)]
fn arq_phase(
    link: &mut Link,
    bits: &[usize],
    msgs: &Messages,
    code: &SuperCode,
    srcs: (&Source, &Source),
    k1: &mut Knowledge,
    rx2: &mut Rx2Super,
    rng: &mut ChaCha8Rng,
    repeats: &mut Vec<(u32, bool)>,
    stats: &mut ArqRepeatStats,
    recycled: bool,
) -> Result<(), ProtocolError> {
    let (src_s, src_b1) = srcs;
    for (i, &j) in bits.iter().enumerate() {
        let a_j = msgs.a.get(j);
        let pos = (i as f64 + 0.5) / bits.len() as f64;
        let mut pending: Option<(bool, Combination, Combination)> = None;
        let (mut l, mut k) = (0u32, 0u32);
        loop {
            let (g, h) = code.draw(pos, rng);
            let mix = g.eval(&src_s.bits) ^ h.eval(&src_b1.bits);
            let out = link.send(a_j ^ mix)?;
            l += 1;
            if let Some(y) = out.rx1.bit() {
                k1.learn(a_var(j), y ^ mix);
            }
            if let Some(y) = out.rx2.bit() {
                k += 1;
                let (know, stage) = (&rx2.know, &mut rx2.stage);
                if know.knows(a_var(j)) {
                    let mut e = stage.equation(y);
                    e.term(a_var(j), know).combination(&g, src_s, know).combination(&h, src_b1, know);
                    let built = e.build();
                    stage.insert(built);
                } else {
                    if let Some((y0, g0, h0)) = &pending {
                        insert_received(
                            stage,
                            know,
                            y ^ y0,
                            &[(&g, src_s), (&h, src_b1), (g0, src_s), (h0, src_b1)],
                        );
                    }
                    pending = Some((y, g, h));
                }
            }
            if link.feedback().last(ReceiverId::One) == Some(true) {
                break;
            }
        }
        repeats.push((l, recycled));
        stats.push(l, k);
    }
    Ok(())
}

pub fn run_dn_nonblind_case_c(
    cfg: &ProtocolConfig,
    cache: &CacheAssignment,
    msgs: &Messages,
    states: StateSource,
    coding_seed: u64,
) -> Result<ProtocolResult, ProtocolError> {
    check(cfg)?;
    msgs.check(cfg)?;
    let p = cfg.params;
    let (m1, m2) = (cfg.m1, cfg.m2);
    let p2 = 1.0 - p.delta2;
    let slack = cfg.slack();
    let mut rng = ChaCha8Rng::seed_from_u64(coding_seed);

    let a_cached: Vec<usize> = cache.e2.ones().collect();
    let a_uncached: Vec<usize> = (0..m1).filter(|&j| !cache.e2.get(j)).collect();
    let b1: Vec<usize> = cache.e1.ones().collect();
    let b_bar: Vec<usize> = (0..m2).filter(|&j| !cache.e1.get(j)).collect();

    let all = msgs.concat();
    let src_bar = Source::gather(&all, b_bar.iter().map(|&j| b_var(m1, j)).collect());
    let src_b1 = Source::gather(&all, b1.iter().map(|&j| b_var(m1, j)).collect());
    let code_bar = WindowCode::new(b_bar.len(), 1.0);
    let t2 = phase_two_slots(&slack, b_bar.len(), p.delta1, p.delta2);
    // Super-variables get ids after the message bits.
    let sup_var = |k: usize| (m1 + m2 + k) as u32;
    let nvars = m1 + m2 + t2;

    let mut k1 = Knowledge::new(nvars);
    for &j in &b1 {
        k1.learn(b_var(m1, j), msgs.b.get(j));
    }
    let mut k2 = Knowledge::new(nvars);
    for &j in &a_cached {
        k2.learn(a_var(j), msgs.a.get(j));
    }

    let mut link = new_link(cfg, CsitScenario::DN(ReceiverId::One), states);

    // Phase I.
    link.begin_phase("I");
    let mut recycled = Vec::new();
    for &j in &a_uncached {
        let out = link.send(msgs.a.get(j))?;
        if let Some(y) = out.rx1.bit() {
            k1.learn(a_var(j), y);
        }
        if let Some(y) = out.rx2.bit() {
            k2.learn(a_var(j), y);
        }
        if link.feedback().last(ReceiverId::One) == Some(false) {
            recycled.push(j);
        }
    }

    // Phase II. Every slot heard by either receiver is kept for Rx2's final
    // solve; slots heard by Rx1 become super-variables.
    link.begin_phase("II");
    let mut sweep = Sweep::new(&mut rng);
    let mut sup_vals = Vec::new();
    let mut heard2: Vec<(Combination, Option<bool>, Option<usize>)> = Vec::new();
    for _ in 0..t2 {
        let g = code_bar.draw(sweep.next_position(), &mut rng);
        let x = g.eval(&src_bar.bits);
        let out = link.send(x)?;
        let sup = if link.feedback().last(ReceiverId::One) == Some(true) {
            let k = sup_vals.len();
            sup_vals.push(x);
            k1.learn(sup_var(k), x);
            Some(k)
        } else {
            None
        };
        let y2 = out.rx2.bit();
        if let (Some(y), Some(k)) = (y2, sup) {
            k2.learn(sup_var(k), y);
        }
        if y2.is_some() || sup.is_some() {
            heard2.push((g, y2, sup));
        }
    }
    let n_sup = sup_vals.len();
    let src_sup = Source::new(BitVector::from_bools(&sup_vals), (0..n_sup).map(sup_var).collect());

    // Super-system unknowns at Rx2, merged by source fraction so that paired
    // windows stay banded.
    let mut order: Vec<(f64, u32)> = (0..n_sup)
        .map(|k| ((k as f64 + 0.5) / n_sup as f64, sup_var(k)))
        .chain(b1.iter().enumerate().map(|(l, &j)| ((l as f64 + 0.5) / b1.len() as f64, b_var(m1, j))))
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let stage = Stage::over_unknown(nvars, order.iter().map(|&(_, v)| v), &k2);
    let code = SuperCode::new(n_sup, b1.len(), stage.unknowns() as f64);
    let mut rx2 = Rx2Super { know: k2, stage };

    let mut repeats = Vec::new();
    let (mut st3, mut st4) = (ArqRepeatStats::default(), ArqRepeatStats::default());
    link.begin_phase("III");
    arq_phase(
        &mut link, &a_cached, msgs, &code, (&src_sup, &src_b1), &mut k1, &mut rx2, &mut rng,
        &mut repeats, &mut st3, false,
    )?;
    link.begin_phase("IV");
    arq_phase(
        &mut link, &recycled, msgs, &code, (&src_sup, &src_b1), &mut k1, &mut rx2, &mut rng,
        &mut repeats, &mut st4, true,
    )?;

    // Tail: the transmitter knows the super-system size and, through S1, how
    // often each a-bit was repeated.
    link.begin_phase("tail");
    let need = rx2.stage.unknowns() as f64;
    let (mut mean, mut var) = (0.0, 0.0);
    for &(l, rec) in &repeats {
        let (mu, v) = yield_given_repeats(l, p2, if rec { p2 } else { 1.0 });
        mean += mu;
        var += v;
    }
    let tail = if need > 0.0 {
        let gap = (need - mean).max(0.0);
        let margin = slack.margin(need, var + gap * (1.0 - p2), None) + code.band_overhead();
        ((need - mean + margin).max(0.0) / p2).ceil() as usize
    } else {
        0
    };
    let mut sweep = Sweep::new(&mut rng);
    for _ in 0..tail {
        let (g, h) = code.draw(sweep.next_position(), &mut rng);
        let out = link.send(g.eval(&src_sup.bits) ^ h.eval(&src_b1.bits))?;
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut rx2.stage, &rx2.know, y, &[(&g, &src_sup), (&h, &src_b1)]);
        }
    }

    // Rx2: super-system, then the uncached b-bits.
    let mut equations = vec![count(2, "super-system", &rx2.stage)];
    let Rx2Super { know: mut k2, stage } = rx2;
    let mut decoded2 = None;
    if stage.solve_into(&mut k2) {
        let mut st = Stage::over_unknown(nvars, src_bar.vars.iter().copied(), &k2);
        for (g, y2, sup) in &heard2 {
            let rhs = match (y2, sup) {
                (Some(y), _) => *y,
                (None, Some(k)) => k2.get(sup_var(*k)).unwrap_or(false),
                (None, None) => continue,
            };
            insert_received(&mut st, &k2, rhs, &[(g, &src_bar)]);
        }
        equations.push(count(2, "message 2 not cached at Rx1", &st));
        if st.solve_into(&mut k2) {
            decoded2 = k2.extract((0..m2).map(|j| b_var(m1, j)));
        }
    } else {
        equations.push(EquationCount {
            receiver: 2,
            stage: "message 2 not cached at Rx1".into(),
            unknowns: b_bar.len(),
            equations: 0,
            rank: 0,
        });
    }
    let decoded1 = k1.extract((0..m1).map(a_var));
    let mut all_stats = st3.clone();
    for (&l, &k) in st4.repeats.iter().zip(&st4.rx2_receptions) {
        all_stats.push(l, k);
    }
    Ok(finish(
        link,
        Outcome { decoded1, decoded2, equations, arq: Some(all_stats), arq_split: Some((st3, st4)) },
    ))
}
