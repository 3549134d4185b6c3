//! Property tests: randomized checks of the structural invariants of every
//! module against brute-force models.

use proptest::prelude::*;
use setcover_core::deamortizer::{self, GarbageSet};
use setcover_core::engine_f::FEngine;
use setcover_core::engine_logn::LogNEngine;
use setcover_core::hierarchy::HierarchicalSolution;
use setcover_core::instance::{self, generate_workload, Pattern, WorkloadSpec};
use setcover_core::metrics::{self, RunOptions};
use setcover_core::oracle;
use setcover_core::scheduler::EngineConfig;
use setcover_core::types::below_power_1_5;
use setcover_core::{DynamicSetCover, ElementId, Level, SetId, SetSystem};
use std::collections::BTreeSet;

fn pattern() -> impl Strategy<Value = Pattern> {
    prop_oneof![Just(Pattern::InsertOnly), Just(Pattern::SlidingWindow), Just(Pattern::RandomChurn)]
}

fn workload() -> impl Strategy<Value = WorkloadSpec> {
    (4usize..60, 1usize..20, 1usize..5, 0usize..250, pattern(), any::<u64>()).prop_map(
        |(u, m, f, steps, pattern, seed)| {
            let steps = if pattern == Pattern::InsertOnly { steps.min(u) } else { steps };
            WorkloadSpec::new(u, m, f.min(m), steps, pattern, seed)
        },
    )
}

/// A small explicit set system with every element in at least one set.
fn small_system(max_universe: usize, max_sets: usize) -> impl Strategy<Value = SetSystem> {
    (1usize..=max_universe, 1usize..=max_sets).prop_flat_map(|(u, m)| {
        proptest::collection::vec(proptest::collection::btree_set(0..m as SetId, 1..=m.min(3)), u).prop_map(
            move |memberships| {
                let mut sets = vec![Vec::new(); m];
                for (e, owners) in memberships.iter().enumerate() {
                    for &s in owners {
                        sets[s as usize].push(e as ElementId);
                    }
                }
                SetSystem::new(u, sets, None).expect("every element has a set")
            },
        )
    })
}

/// Minimum cover size by enumerating all set subsets.
fn brute_force_opt(system: &SetSystem, live: &BTreeSet<ElementId>) -> usize {
    let m = system.num_sets();
    (0u32..1 << m)
        .filter(|mask| {
            live.iter().all(|&e| system.incident(e).iter().any(|&s| mask >> s & 1 == 1))
        })
        .map(|mask| mask.count_ones() as usize)
        .min()
        .expect("the full family covers everything")
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_instances_round_trip_and_respect_frequency(spec in workload()) {
        let (system, stream) = generate_workload(&spec).unwrap();
        let text = instance::serialize_instance(&system, &stream);
        let (parsed_system, parsed_stream) = instance::parse_instance(&text).unwrap();
        prop_assert_eq!(&parsed_system, &system);
        prop_assert_eq!(&parsed_stream, &stream);
        for e in 0..system.universe_size() as ElementId {
            prop_assert!(system.incident(e).len() <= spec.freq);
        }
        prop_assert!(stream.validate(&system).is_ok());
    }

    #[test]
    fn exact_opt_is_feasible_and_minimum(system in small_system(12, 8), mask in any::<u16>()) {
        let live: BTreeSet<ElementId> =
            (0..system.universe_size() as ElementId).filter(|e| mask >> e & 1 == 1).collect();
        let (size, witness) = oracle::exact_opt(&system, &live, 40).unwrap();
        prop_assert_eq!(size, witness.len());
        prop_assert_eq!(oracle::first_uncovered(&system, &witness, &live), None);
        prop_assert_eq!(size, brute_force_opt(&system, &live));
    }

    #[test]
    fn offline_greedy_within_harmonic_factor(system in small_system(12, 8), mask in any::<u16>()) {
        let live: BTreeSet<ElementId> =
            (0..system.universe_size() as ElementId).filter(|e| mask >> e & 1 == 1).collect();
        let choices = oracle::offline_greedy(&system, &live, 10);
        let chosen: BTreeSet<SetId> = choices.iter().map(|c| c.set).collect();
        prop_assert_eq!(oracle::first_uncovered(&system, &chosen, &live), None);
        let covered: usize = choices.iter().map(|c| c.coverage.len()).sum();
        prop_assert_eq!(covered, live.len());
        let opt = brute_force_opt(&system, &live);
        prop_assert!(choices.len() as f64 <= harmonic(live.len()) * opt as f64 + 1e-9);
        // Levels never increase along the greedy order.
        prop_assert!(choices.windows(2).all(|w| w[0].level >= w[1].level));
    }

    #[test]
    fn level_stats_match_recount_after_any_operations(
        ops in proptest::collection::vec((0u32..30, 0usize..4, 0usize..4, 0u8..3), 0..120)
    ) {
        let top = 5;
        let mut solution = HierarchicalSolution::new(top);
        for level in 0..=top {
            solution.add_set(level as SetId, level).unwrap();
        }
        for (e, lev, extra, op) in ops {
            match op {
                0 => { let _ = solution.assign(e, lev as SetId, lev, (lev + extra).min(top)); }
                1 => { let _ = solution.mark_dormant(e); }
                _ => { let _ = solution.reactivate(e); }
            }
            prop_assert_eq!(solution.stats(), solution.recompute_stats());
        }
    }

    #[test]
    fn splice_preserves_covered_live_elements(
        levels in proptest::collection::vec(0usize..6, 1..40),
        k in 0usize..4,
        relevel in proptest::collection::vec(0usize..6, 40),
    ) {
        // One all-containing set per (level, side) keeps ownership trivial.
        let top = 6;
        let mut target = HierarchicalSolution::new(top);
        for level in 0..=top {
            target.add_set(level as SetId, level).unwrap();
        }
        let mut source = HierarchicalSolution::new(top);
        for level in 0..=k + 1 {
            source.add_set((100 + level) as SetId, level).unwrap();
        }
        for (e, &level) in levels.iter().enumerate() {
            target.assign(e as ElementId, level as SetId, level, level).unwrap();
            if level <= k {
                // The rebuild re-covers the low elements at levels ≤ k + 1.
                let new_level = relevel[e] % (k + 2);
                source.assign(e as ElementId, (100 + new_level) as SetId, new_level, new_level).unwrap();
            }
        }
        let live_before: BTreeSet<ElementId> =
            target.elements().into_iter().filter(|(_, _, live)| *live).map(|(e, _, _)| e).collect();
        let evicted = target.splice_levels(source, k).unwrap();
        let live_after: BTreeSet<ElementId> =
            target.elements().into_iter().filter(|(_, _, live)| *live).map(|(e, _, _)| e).collect();
        prop_assert_eq!(live_before, live_after);
        prop_assert_eq!(evicted, (0..=k as SetId).collect::<Vec<_>>());
        prop_assert_eq!(target.stats(), target.recompute_stats());
    }

    #[test]
    fn garbage_collects_exactly_the_rate_while_nonempty(
        batches in proptest::collection::vec(proptest::collection::btree_set(0u32..500, 0..40), 1..30),
        rate in 1usize..12,
    ) {
        let mut garbage = GarbageSet::new(rate);
        for batch in batches {
            garbage.absorb(batch);
            let before = garbage.len();
            let removed = garbage.collect();
            if garbage.is_empty() {
                prop_assert_eq!(removed.len(), before);
            } else {
                prop_assert_eq!(removed.len(), rate);
            }
        }
    }
}

/// Run one engine over a workload with per-step audits and snapshot-verified
/// recourse, checking feasibility and the recourse bounds at every step.
fn check_engine(engine: &mut dyn DynamicSetCover, system: &SetSystem, spec: &WorkloadSpec) -> Result<(), TestCaseError> {
    let (_, stream) = generate_workload(spec).unwrap();
    let options = RunOptions { audit_every: 1, oracle_cap: None, verify_recourse: true };
    let reports = metrics::run_stream(engine, system, &stream, options).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let beta = engine.insertion_recourse_bound();
    let total_bound = deamortizer::total_recourse_bound(beta, engine.gc_rate());
    for (t, report) in reports.iter().enumerate() {
        let audit = report.audit.as_ref().expect("audited");
        prop_assert!(audit.passed(), "{} step {}: {}", engine.name(), t + 1, audit);
        prop_assert!(report.insertion_recourse <= beta);
        prop_assert!(report.total_recourse() <= total_bound);
    }
    let live = stream.live_after(stream.len());
    prop_assert_eq!(oracle::first_uncovered(system, &engine.output_sets(), &live), None);
    Ok(())
}

fn c_spd_choice() -> impl Strategy<Value = Option<usize>> {
    prop_oneof![Just(None), (1usize..10).prop_map(Some)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn logn_engine_invariants_hold_on_random_streams(spec in workload(), c_spd in c_spd_choice()) {
        let (system, _) = generate_workload(&spec).unwrap();
        let config = EngineConfig { c_spd, ..EngineConfig::default() };
        check_engine(&mut LogNEngine::new(&system, config), &system, &spec)?;
    }

    #[test]
    fn f_engine_invariants_hold_on_random_streams(spec in workload(), c_spd in c_spd_choice()) {
        let (system, _) = generate_workload(&spec).unwrap();
        let config = EngineConfig { c_spd, ..EngineConfig::default() };
        check_engine(&mut FEngine::new(&system, config).unwrap(), &system, &spec)?;
    }

    #[test]
    fn engines_are_deterministic(spec in workload(), c_spd in c_spd_choice()) {
        let (system, stream) = generate_workload(&spec).unwrap();
        let config = EngineConfig { c_spd, ..EngineConfig::default() };
        let options = RunOptions::default();
        let logn: Vec<_> = (0..2)
            .map(|_| metrics::run_stream(&mut LogNEngine::new(&system, config), &system, &stream, options).unwrap())
            .collect();
        prop_assert_eq!(&logn[0], &logn[1]);
        let f: Vec<_> = (0..2)
            .map(|_| metrics::run_stream(&mut FEngine::new(&system, config).unwrap(), &system, &stream, options).unwrap())
            .collect();
        prop_assert_eq!(&f[0], &f[1]);
    }

    #[test]
    fn stability_witness_agrees_with_brute_force(spec in workload(), c_spd in c_spd_choice()) {
        let spec = WorkloadSpec { num_sets: spec.num_sets.min(50), ..spec };
        let (system, stream) = generate_workload(&spec).unwrap();
        let mut engine = LogNEngine::new(&system, EngineConfig { c_spd, ..EngineConfig::default() });
        for update in stream.updates() {
            engine.step(*update).unwrap();
            let foreground = engine.foreground();
            let top = foreground.top_level();
            let live: Vec<_> = foreground.elements().into_iter().filter(|(_, _, live)| *live).collect();
            let mut expected: Option<(SetId, Level, usize)> = None;
            'sets: for s in 0..system.num_sets() as SetId {
                for k in 0..=top {
                    let count = live
                        .iter()
                        .filter(|(e, node, _)| node.lev <= k && k < node.plev && system.set(s).contains(e))
                        .count();
                    if !below_power_1_5(count, k + 1) {
                        expected = Some((s, k, count));
                        break 'sets;
                    }
                }
            }
            prop_assert_eq!(foreground.stability_witness(&system), expected);
        }
    }
}
