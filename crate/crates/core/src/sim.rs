//! Monte Carlo harness: independent trials, aggregate rates and failures,
//! comparison against region corners, and parameter sweeps.
//!
//! Trials run in parallel but are reduced in trial order, so results do not
//! depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_cache, ChannelParams, StateSource, TrialSeeds};
use crate::error::{ProtocolError, SimError};
use crate::gf2::BitVector;
use crate::protocols::{
    dd_blind_symmetric, dn_nonblind_case_c, dn_semiblind_case_b, nn_blind_inner,
    nn_blind_symmetric, nn_semiblind, ArqRepeatStats, Messages, PhasePlan, ProtocolConfig,
    ProtocolResult,
};
use crate::regions::{self, RateRegion, RatePair};

/// Default failure ceiling for corner comparisons.
pub const DEFAULT_FAILURE_CEILING: f64 = 0.01;
/// Fewest successful trials for which confidence intervals are reported.
pub const MIN_TRIALS_FOR_CI: usize = 30;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolId {
    NnSemiblind,
    DdBlindSymmetric,
    CaseB,
    CaseC,
    NnBlindSymmetric,
    NnBlindInner,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 6] = [
        ProtocolId::NnSemiblind,
        ProtocolId::DdBlindSymmetric,
        ProtocolId::CaseB,
        ProtocolId::CaseC,
        ProtocolId::NnBlindSymmetric,
        ProtocolId::NnBlindInner,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ProtocolId::NnSemiblind => "nn-semiblind",
            ProtocolId::DdBlindSymmetric => "dd-blind-symmetric",
            ProtocolId::CaseB => "case-b",
            ProtocolId::CaseC => "case-c",
            ProtocolId::NnBlindSymmetric => "nn-blind-symmetric",
            ProtocolId::NnBlindInner => "nn-blind-inner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == s)
    }

    /// Outer region every achieved rate pair must lie in.
    pub fn outer_region(&self, p: &ChannelParams) -> Result<RateRegion, SimError> {
        Ok(match self {
            ProtocolId::NnSemiblind | ProtocolId::NnBlindSymmetric | ProtocolId::NnBlindInner => {
                regions::region_nn_nonblind(p)?
            }
            ProtocolId::DdBlindSymmetric | ProtocolId::CaseB | ProtocolId::CaseC => {
                regions::region_dd_outer(p)?
            }
        })
    }

    /// Rate pair the protocol targets at these parameters.
    pub fn corner(&self, p: &ChannelParams) -> Result<RatePair, SimError> {
        Ok(match self {
            ProtocolId::NnSemiblind => regions::region_nn_nonblind(p)?.max_sum_vertex()?,
            ProtocolId::DdBlindSymmetric => {
                let r = regions::dd_symmetric_rate(p.delta1, p.eps1);
                RatePair::new(r, r)
            }
            ProtocolId::CaseB => regions::corner_case_b(p)?,
            ProtocolId::CaseC => regions::region_dd_outer(p)?.max_sum_vertex()?,
            ProtocolId::NnBlindSymmetric => {
                let r = regions::nn_blind_symmetric_rate(p.delta1, p.eps1);
                RatePair::new(r, r)
            }
            ProtocolId::NnBlindInner => regions::corner_nn_blind_inner(p)?,
        })
    }

    /// Message lengths for base size `m`: the message with the larger corner
    /// rate gets `m` bits, the other `⌈η·m⌉` with `η` the corner rate ratio.
    pub fn message_sizes(&self, p: &ChannelParams, m: usize) -> Result<(usize, usize), SimError> {
        let c = self.corner(p)?;
        let scaled = |num: f64, den: f64| {
            let x = num / den * m as f64;
            // Absorb floating-point noise before rounding up.
            (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize
        };
        Ok(if c.r1 <= 0.0 && c.r2 <= 0.0 {
            (m, m)
        } else if c.r1 >= c.r2 {
            (m, scaled(c.r2, c.r1))
        } else {
            (scaled(c.r1, c.r2), m)
        })
    }

    /// Phase plan for a configuration, without running it. The plan of the
    /// semi-blind scheme depends on the cache mask, so an empty mask stands in.
    pub fn phase_plan(&self, cfg: &ProtocolConfig) -> Result<PhasePlan, ProtocolError> {
        match self {
            ProtocolId::NnSemiblind => nn_semiblind::phase_plan(cfg, &BitVector::zeros(cfg.m1)),
            ProtocolId::DdBlindSymmetric => dd_blind_symmetric::phase_plan(cfg),
            ProtocolId::CaseB => dn_semiblind_case_b::phase_plan(cfg),
            ProtocolId::CaseC => dn_nonblind_case_c::phase_plan(cfg),
            ProtocolId::NnBlindSymmetric => nn_blind_symmetric::phase_plan(cfg),
            ProtocolId::NnBlindInner => nn_blind_inner::phase_plan(cfg),
        }
    }

    /// Runs one trial. Every protocol gets the full cache assignment; each one
    /// restricts its transmitter to the view it is allowed.
    pub fn run(
        &self,
        cfg: &ProtocolConfig,
        cache: &crate::channel::CacheAssignment,
        msgs: &Messages,
        states: StateSource,
        coding_seed: u64,
    ) -> Result<ProtocolResult, ProtocolError> {
        use crate::protocols::*;
        match self {
            ProtocolId::NnSemiblind => run_nn_semiblind(cfg, cache, msgs, states, coding_seed),
            ProtocolId::DdBlindSymmetric => run_dd_blind_symmetric(cfg, cache, msgs, states, coding_seed),
            ProtocolId::CaseB => run_dn_semiblind_case_b(cfg, cache, msgs, states, coding_seed),
            ProtocolId::CaseC => run_dn_nonblind_case_c(cfg, cache, msgs, states, coding_seed),
            ProtocolId::NnBlindSymmetric => run_nn_blind_symmetric(cfg, cache, msgs, states, coding_seed),
            ProtocolId::NnBlindInner => run_nn_blind_inner(cfg, cache, msgs, states, coding_seed),
        }
    }

    /// Labels of the two ARQ groups in [`ProtocolResult::arq_split`].
    fn arq_groups(&self) -> [&'static str; 2] {
        match self {
            ProtocolId::CaseC => ["III", "IV"],
            _ => ["cached", "uncached"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub protocol: ProtocolId,
    pub params: ChannelParams,
    /// Base message size, see [`ProtocolId::message_sizes`].
    pub m: usize,
    pub slack_coeff: f64,
    pub trials: usize,
    pub seed: u64,
    /// Overrides the protocol's default corner.
    pub corner: Option<RatePair>,
}

impl SimConfig {
    pub fn new(protocol: ProtocolId, params: ChannelParams, m: usize) -> Self {
        Self { protocol, params, m, slack_coeff: 3.0, trials: 50, seed: 0, corner: None }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::Config("trial count must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(SimError::Config("message size m must be at least 1".into()));
        }
        Ok(())
    }

    /// Protocol configuration with the message sizes used for trials.
    pub fn protocol_config(&self) -> Result<ProtocolConfig, SimError> {
        self.params.validate().map_err(|e| SimError::Config(e.to_string()))?;
        let (m1, m2) = self.protocol.message_sizes(&self.params, self.m)?;
        Ok(ProtocolConfig::new(self.params, m1, m2, self.slack_coeff))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMean {
    pub name: String,
    pub mean_slots: f64,
}

/// Pooled ARQ statistics of one group of bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArqGroup {
    pub label: String,
    pub bits: usize,
    pub mean_repeats: Option<f64>,
    pub mean_k: Option<f64>,
    pub mean_k_minus_one: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub protocol: ProtocolId,
    pub params: ChannelParams,
    pub m1: usize,
    pub m2: usize,
    pub slack_coeff: f64,
    pub seed: u64,
    pub trials: usize,
    pub successes: usize,
    pub failure_prob: f64,
    /// Mean of `m_i / slots_used` over successful trials.
    pub mean_rate: RatePair,
    pub rate_stderr: RatePair,
    /// Normal-approximation 95% intervals, present with enough successes.
    pub rate_ci95: Option<(RatePair, RatePair)>,
    pub mean_slots: f64,
    pub mean_phase_lengths: Vec<PhaseMean>,
    pub arq: Vec<ArqGroup>,
    pub corner: RatePair,
}

/// Outcome of one trial, kept small so many can be held at once.
struct TrialOutcome {
    success: bool,
    slots: usize,
    phases: Vec<(String, usize)>,
    arq: Option<(ArqRepeatStats, ArqRepeatStats)>,
}

fn run_one(protocol: ProtocolId, cfg: &ProtocolConfig, master: u64, index: u64) -> Result<TrialOutcome, SimError> {
    let seeds = TrialSeeds::derive(master, index);
    let cache = sample_cache(&cfg.params, cfg.m1, cfg.m2, &mut TrialSeeds::rng(seeds.cache));
    let msgs = Messages::random(cfg.m1, cfg.m2, &mut TrialSeeds::rng(seeds.messages));
    let states = StateSource::sampled(cfg.params, seeds.states);
    let res = protocol.run(cfg, &cache, &msgs, states, seeds.coding)?;
    for (receiver, got, want) in [(1, &res.decoded1, &msgs.a), (2, &res.decoded2, &msgs.b)] {
        if got.as_ref().is_some_and(|g| g != want) {
            return Err(SimError::IncorrectDecode { trial: index, receiver });
        }
    }
    Ok(TrialOutcome {
        success: res.success(&msgs),
        slots: res.slots_used,
        phases: res.phase_lengths.into_iter().map(|p| (p.name, p.len)).collect(),
        arq: res.arq_split,
    })
}

pub fn run_trials(cfg: &SimConfig) -> Result<SimStats, SimError> {
    cfg.validate()?;
    let pcfg = cfg.protocol_config()?;
    cfg.protocol.phase_plan(&pcfg)?;
    let corner = match cfg.corner {
        Some(c) => c,
        None => cfg.protocol.corner(&cfg.params)?,
    };
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_one(cfg.protocol, &pcfg, cfg.seed, i))
        .collect::<Result<_, _>>()?;
    Ok(aggregate(cfg, &pcfg, corner, &outcomes))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn aggregate(cfg: &SimConfig, pcfg: &ProtocolConfig, corner: RatePair, outs: &[TrialOutcome]) -> SimStats {
    let ok: Vec<&TrialOutcome> = outs.iter().filter(|o| o.success).collect();
    let rate = |m: usize| -> Vec<f64> { ok.iter().map(|o| m as f64 / o.slots.max(1) as f64).collect() };
    let (r1, se1) = mean_and_stderr(&rate(pcfg.m1));
    let (r2, se2) = mean_and_stderr(&rate(pcfg.m2));
    let mean_rate = RatePair::new(r1, r2);
    let rate_stderr = RatePair::new(se1, se2);
    let rate_ci95 = (ok.len() >= MIN_TRIALS_FOR_CI).then(|| {
        (
            RatePair::new(r1 - Z95 * se1, r2 - Z95 * se2),
            RatePair::new(r1 + Z95 * se1, r2 + Z95 * se2),
        )
    });

    let n = outs.len() as f64;
    let mut phases: Vec<PhaseMean> = Vec::new();
    for o in outs {
        for (name, len) in &o.phases {
            match phases.iter_mut().find(|p| &p.name == name) {
                Some(p) => p.mean_slots += *len as f64 / n,
                None => phases.push(PhaseMean { name: name.clone(), mean_slots: *len as f64 / n }),
            }
        }
    }

    let arq = if outs.iter().any(|o| o.arq.is_some()) {
        let labels = cfg.protocol.arq_groups();
        (0..2)
            .map(|g| {
                let mut pooled = ArqRepeatStats::default();
                for (a, b) in outs.iter().filter_map(|o| o.arq.as_ref()) {
                    let s = if g == 0 { a } else { b };
                    pooled.repeats.extend_from_slice(&s.repeats);
                    pooled.rx2_receptions.extend_from_slice(&s.rx2_receptions);
                }
                let reps = pooled.repeats.iter().map(|&l| l as f64).sum::<f64>();
                ArqGroup {
                    label: labels[g].to_string(),
                    bits: pooled.repeats.len(),
                    mean_repeats: (!pooled.repeats.is_empty()).then(|| reps / pooled.repeats.len() as f64),
                    mean_k: pooled.mean_k(),
                    mean_k_minus_one: pooled.mean_k_minus_one(),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    SimStats {
        protocol: cfg.protocol,
        params: cfg.params,
        m1: pcfg.m1,
        m2: pcfg.m2,
        slack_coeff: cfg.slack_coeff,
        seed: cfg.seed,
        trials: outs.len(),
        successes: ok.len(),
        failure_prob: (outs.len() - ok.len()) as f64 / n,
        mean_rate,
        rate_stderr,
        rate_ci95,
        mean_slots: outs.iter().map(|o| o.slots as f64).sum::<f64>() / n,
        mean_phase_lengths: phases,
        arq,
        corner,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub pass: bool,
    /// `|mean_i − corner_i| / corner_i`, or `None` where the corner rate is 0.
    pub rel_err: (Option<f64>, Option<f64>),
    pub rates_ok: bool,
    pub failure_ok: bool,
    pub rel_tol: f64,
    pub failure_ceiling: f64,
}

/// Passes iff each positive corner rate is matched within `rel_tol` and the
/// failure fraction is below `failure_ceiling`.
pub fn compare_to_corner(stats: &SimStats, corner: RatePair, rel_tol: f64, failure_ceiling: f64) -> ComparisonReport {
    let err = |got: f64, want: f64| (want > 0.0).then(|| (got - want).abs() / want);
    let rel_err = (err(stats.mean_rate.r1, corner.r1), err(stats.mean_rate.r2, corner.r2));
    let rates_ok = [rel_err.0, rel_err.1].iter().all(|e| e.map_or(true, |e| e <= rel_tol));
    let failure_ok = stats.failure_prob < failure_ceiling;
    ComparisonReport { pass: rates_ok && failure_ok, rel_err, rates_ok, failure_ok, rel_tol, failure_ceiling }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: ChannelParams,
    pub stats: Option<SimStats>,
    /// Configuration or run error for this row.
    pub error: Option<String>,
    pub corner_pass: Option<bool>,
    /// Mean rate contained in the protocol's outer region at [`OUTER_TOL`].
    pub inside_outer: Option<bool>,
}

/// Containment tolerance for achieved rates against outer regions.
pub const OUTER_TOL: f64 = 0.01;

/// One row per grid point, in grid order. Every row uses the same master
/// seed, so a one-point grid reproduces [`run_trials`].
pub fn sweep(
    grid: &[ChannelParams],
    protocol: ProtocolId,
    m: usize,
    trials: usize,
    slack_coeff: f64,
    seed: u64,
) -> Result<Vec<SweepRow>, SimError> {
    if grid.is_empty() {
        return Err(SimError::Config("sweep grid is empty".into()));
    }
    let rows = grid
        .par_iter()
        .map(|&params| {
            let cfg = SimConfig { protocol, params, m, slack_coeff, trials, seed, corner: None };
            match run_trials(&cfg) {
                Ok(stats) => {
                    let pass = compare_to_corner(&stats, stats.corner, 0.03, DEFAULT_FAILURE_CEILING).pass;
                    let inside = protocol
                        .outer_region(&params)
                        .ok()
                        .map(|r| stats.successes == 0 || r.contains(stats.mean_rate, OUTER_TOL));
                    SweepRow { params, stats: Some(stats), error: None, corner_pass: Some(pass), inside_outer: inside }
                }
                Err(e) => SweepRow { params, stats: None, error: Some(e.to_string()), corner_pass: None, inside_outer: None },
            }
        })
        .collect();
    Ok(rows)
}

/// Flat CSV record of a sweep row or a single run.
#[derive(Serialize)]
struct CsvRow<'a> {
    protocol: &'a str,
    delta1: f64,
    delta2: f64,
    eps1: f64,
    eps2: f64,
    m1: Option<usize>,
    m2: Option<usize>,
    trials: Option<usize>,
    failure_prob: Option<f64>,
    r1: Option<f64>,
    r2: Option<f64>,
    stderr_r1: Option<f64>,
    stderr_r2: Option<f64>,
    corner_r1: Option<f64>,
    corner_r2: Option<f64>,
    corner_pass: Option<bool>,
    inside_outer: Option<bool>,
    error: Option<&'a str>,
}

/// Writes sweep rows as CSV with the columns of [`CsvRow`].
pub fn write_sweep_csv<W: std::io::Write>(protocol: ProtocolId, rows: &[SweepRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        let s = row.stats.as_ref();
        w.serialize(CsvRow {
            protocol: protocol.label(),
            delta1: row.params.delta1,
            delta2: row.params.delta2,
            eps1: row.params.eps1,
            eps2: row.params.eps2,
            m1: s.map(|s| s.m1),
            m2: s.map(|s| s.m2),
            trials: s.map(|s| s.trials),
            failure_prob: s.map(|s| s.failure_prob),
            r1: s.map(|s| s.mean_rate.r1),
            r2: s.map(|s| s.mean_rate.r2),
            stderr_r1: s.map(|s| s.rate_stderr.r1),
            stderr_r2: s.map(|s| s.rate_stderr.r2),
            corner_r1: s.map(|s| s.corner.r1),
            corner_r2: s.map(|s| s.corner.r2),
            corner_pass: row.corner_pass,
            inside_outer: row.inside_outer,
            error: row.error.as_deref(),
        })
        .map_err(|e| SimError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| SimError::Csv(e.to_string()))
}

/// Writes one run as a single-row CSV with the sweep columns.
pub fn write_stats_csv<W: std::io::Write>(stats: &SimStats, out: W) -> Result<(), SimError> {
    let pass = compare_to_corner(stats, stats.corner, 0.03, DEFAULT_FAILURE_CEILING).pass;
    let row = SweepRow {
        params: stats.params,
        stats: Some(stats.clone()),
        error: None,
        corner_pass: Some(pass),
        inside_outer: stats.protocol.outer_region(&stats.params).ok().map(|r| r.contains(stats.mean_rate, OUTER_TOL)),
    };
    write_sweep_csv(stats.protocol, &[row], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_at(rate: RatePair, failure: f64) -> SimStats {
        SimStats {
            protocol: ProtocolId::CaseB,
            params: ChannelParams::new(0.5, 0.5, 0.0, 0.5).unwrap(),
            m1: 1,
            m2: 1,
            slack_coeff: 3.0,
            seed: 0,
            trials: 100,
            successes: 100,
            failure_prob: failure,
            mean_rate: rate,
            rate_stderr: RatePair::new(0.0, 0.0),
            rate_ci95: None,
            mean_slots: 0.0,
            mean_phase_lengths: Vec::new(),
            arq: Vec::new(),
            corner: rate,
        }
    }

    #[test]
    fn comparison_thresholds() {
        let c = RatePair::new(0.5, 1.0 / 3.0);
        assert!(compare_to_corner(&stats_at(c, 0.0), c, 0.03, 0.01).pass);
        assert!(!compare_to_corner(&stats_at(c.scaled(0.9), 0.0), c, 0.03, 0.01).pass);
        assert!(!compare_to_corner(&stats_at(c, 0.02), c, 0.03, 0.01).pass);
        // Zero corner components are not compared.
        let z = RatePair::new(0.5, 0.0);
        assert!(compare_to_corner(&stats_at(RatePair::new(0.5, 0.1), 0.0), z, 0.03, 0.01).pass);
    }

    #[test]
    fn corner_sizing() {
        let p = ChannelParams::new(1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0 / 6.0).unwrap();
        assert_eq!(ProtocolId::NnSemiblind.message_sizes(&p, 20000).unwrap(), (16000, 20000));
        let p = ChannelParams::new(0.5, 0.5, 0.0, 0.5).unwrap();
        assert_eq!(ProtocolId::CaseB.message_sizes(&p, 20000).unwrap(), (20000, 13334));
        let p = ChannelParams::new(0.25, 0.5, 0.0, 0.5).unwrap();
        assert_eq!(ProtocolId::NnBlindInner.message_sizes(&p, 20000).unwrap(), (20000, 5000));
    }

    #[test]
    fn rejects_degenerate_configs() {
        let p = ChannelParams::symmetric(0.5, 0.5).unwrap();
        let mut cfg = SimConfig::new(ProtocolId::DdBlindSymmetric, p, 10);
        cfg.trials = 0;
        assert!(matches!(run_trials(&cfg), Err(SimError::Config(_))));
        let p = ChannelParams::new(0.5, 0.5, 0.2, 0.5).unwrap();
        let cfg = SimConfig::new(ProtocolId::CaseB, p, 10);
        assert!(matches!(run_trials(&cfg), Err(SimError::Region(_) | SimError::Protocol(_))));
    }
}
