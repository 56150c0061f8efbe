//! Randomized invariants of regions, the channel and the protocols.

use erasure_bc::channel::{sample_cache, ChannelParams, StateSource, TrialSeeds};
use erasure_bc::protocols::{Messages, ProtocolConfig};
use erasure_bc::regions::{
    region_dd_outer, region_nn_blind_inner, region_nn_nonblind, RateRegion, ALGEBRAIC_TOL,
};
use erasure_bc::sim::ProtocolId;
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn prob() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(1.0), 8 => 0.0..=1.0f64]
}

fn params() -> impl Strategy<Value = ChannelParams> {
    (prob(), prob(), prob(), prob()).prop_map(|(a, b, c, d)| ChannelParams::new(a, b, c, d).unwrap())
}

/// Every vertex of `inner` lies in `outer`.
fn within(inner: &RateRegion, outer: &RateRegion) -> bool {
    inner.vertices().unwrap().into_iter().all(|v| outer.contains(v, TOL))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nn_region_inside_dd_outer(p in params()) {
        prop_assert!(within(&region_nn_nonblind(&p).unwrap(), &region_dd_outer(&p).unwrap()));
    }

    #[test]
    fn blind_inner_inside_nn_outer(d1 in 0.0..=1.0f64, gap in 0.0..=1.0f64, e2 in prob()) {
        let d2 = d1 + (1.0 - d1) * gap;
        let p = ChannelParams::new(d1, d2, 0.0, e2).unwrap();
        prop_assert!(within(&region_nn_blind_inner(&p).unwrap(), &region_nn_nonblind(&p).unwrap()));
    }

    #[test]
    fn less_cache_shrinks_regions(p in params(), f1 in 0.0..=1.0f64, f2 in 0.0..=1.0f64) {
        // Raising eps (fewer cached bits) can only shrink the region.
        let q = ChannelParams::new(p.delta1, p.delta2, p.eps1 + (1.0 - p.eps1) * f1, p.eps2 + (1.0 - p.eps2) * f2).unwrap();
        prop_assert!(within(&region_nn_nonblind(&q).unwrap(), &region_nn_nonblind(&p).unwrap()));
        prop_assert!(within(&region_dd_outer(&q).unwrap(), &region_dd_outer(&p).unwrap()));
    }

    #[test]
    fn swapping_users_mirrors_regions(p in params()) {
        for build in [region_nn_nonblind, region_dd_outer] {
            let a = build(&p).unwrap().vertices().unwrap();
            let b = build(&p.swapped()).unwrap();
            prop_assert_eq!(a.len(), b.vertices().unwrap().len());
            for v in a {
                prop_assert!(b.contains(v.swapped(), TOL));
            }
        }
    }

    #[test]
    fn vertices_are_feasible_and_counterclockwise(p in params()) {
        for r in [region_nn_nonblind(&p).unwrap(), region_dd_outer(&p).unwrap()] {
            let v = r.vertices().unwrap();
            prop_assert!(v.iter().all(|x| r.contains(*x, ALGEBRAIC_TOL)));
            let n = v.len();
            for i in 0..n {
                let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
                let cross = (b.r1 - a.r1) * (c.r2 - b.r2) - (b.r2 - a.r2) * (c.r1 - b.r1);
                prop_assert!(n < 3 || cross >= -1e-12);
            }
        }
    }
}

fn protocol_case() -> impl Strategy<Value = (ProtocolId, ChannelParams, usize, u64)> {
    let d = || 0.0..0.8f64;
    let e = || 0.0..=1.0f64;
    prop_oneof![
        (d(), d(), e(), e()).prop_map(|(a, b, c, f)| (ProtocolId::NnSemiblind, ChannelParams::new(a.min(b), a.max(b), c, f).unwrap())),
        (d(), e()).prop_map(|(a, c)| (ProtocolId::DdBlindSymmetric, ChannelParams::symmetric(a, c).unwrap())),
        (d(), d(), e()).prop_map(|(a, b, f)| (ProtocolId::CaseB, ChannelParams::new(a, b, 0.0, f).unwrap())),
        (d(), d(), e(), e()).prop_map(|(a, b, c, f)| (ProtocolId::CaseC, ChannelParams::new(a, b, c, f).unwrap())),
        (d(), 0.05..=1.0f64).prop_map(|(a, c)| (ProtocolId::NnBlindSymmetric, ChannelParams::symmetric(a, c).unwrap())),
        (d(), d(), 0.0..0.9f64).prop_map(|(a, b, f)| (ProtocolId::NnBlindInner, ChannelParams::new(a.min(b), a.max(b), 0.0, f).unwrap())),
    ]
    .prop_flat_map(|(id, p)| (Just(id), Just(p), 20usize..300, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Decoded messages are never wrong, phase spans tile the run, ARQ counts
    /// are consistent, and replaying the recorded states reproduces the run.
    #[test]
    fn protocol_runs_are_sound((id, p, m, seed) in protocol_case()) {
        let sizes = id.message_sizes(&p, m);
        prop_assume!(sizes.is_ok());
        let (m1, m2) = sizes.unwrap();
        let mut cfg = ProtocolConfig::new(p, m1, m2, 2.0);
        cfg.record_transcript = true;
        prop_assume!(id.phase_plan(&cfg).is_ok());
        let s = TrialSeeds::derive(seed, 0);
        let cache = sample_cache(&p, m1, m2, &mut TrialSeeds::rng(s.cache));
        let msgs = Messages::random(m1, m2, &mut TrialSeeds::rng(s.messages));
        let res = id.run(&cfg, &cache, &msgs, StateSource::sampled(p, s.states), s.coding).unwrap();

        if let Some(a) = &res.decoded1 { prop_assert_eq!(a, &msgs.a); }
        if let Some(b) = &res.decoded2 { prop_assert_eq!(b, &msgs.b); }
        prop_assert_eq!(res.slots_used, res.phase_lengths.iter().map(|p| p.len).sum::<usize>());
        let mut next = 0;
        for span in &res.phase_lengths {
            prop_assert_eq!(span.start, next);
            next += span.len;
        }
        for stats in res.arq.iter().chain(res.arq_split.iter().flat_map(|(a, b)| [a, b])) {
            for (l, k) in stats.repeats.iter().zip(&stats.rx2_receptions) {
                prop_assert!(*l >= 1 && k <= l);
            }
        }

        let t = res.transcript.clone().unwrap();
        let replay = id.run(&cfg, &cache, &msgs, StateSource::Replay(t.state_trace()), s.coding).unwrap();
        prop_assert_eq!(replay.transcript.unwrap(), t);
        prop_assert_eq!(replay.decoded1, res.decoded1);
        prop_assert_eq!(replay.decoded2, res.decoded2);
    }
}
