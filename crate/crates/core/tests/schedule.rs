use std::time::Duration;

use hydrotwin::schedule::*;
use proptest::prelude::*;

const REFERENCE: &str = include_str!("../examples/reference_instance.toml");

fn reference_instance() -> Instance {
    Instance::from_toml_str(REFERENCE).unwrap()
}

fn opts() -> SolveOptions {
    SolveOptions { budget: Duration::from_secs(60), allow_preemption: true }
}

fn no_preemption() -> SolveOptions {
    SolveOptions { allow_preemption: false, ..opts() }
}

#[test]
fn reference_instance_shape() {
    let inst = reference_instance();
    assert_eq!(inst.n_tasks(), 5);
    assert_eq!(inst.dependencies.len(), 3);
    assert_eq!(inst.vehicles.len(), 2);
    let fuel: f64 = inst.tasks.iter().map(|t| t.fuel_l).sum();
    assert!((fuel - 24.5).abs() < 1e-12);
    assert_eq!(inst.total_processing(), Ticks::from_hours(10.0));
    let emergencies: Vec<&str> = inst.tasks.iter().filter(|t| t.emergency).map(|t| t.id.as_str()).collect();
    assert_eq!(emergencies, ["3", "5"]);
}

#[test]
fn travel_costs_follow_destination_vehicle() {
    let inst = reference_instance();
    // km / km-per-litre, then litres × kg-per-litre, by hand.
    let cases = [("1", "2", 10.0 / 12.0, 2.64), ("1", "3", 14.0 / 8.0, 2.68), ("1", "4", 8.0 / 12.0, 2.64), ("1", "5", 12.0 / 8.0, 2.68)];
    for (a, b, fuel, ef) in cases {
        assert!((inst.travel_fuel_between(a, b).unwrap() - fuel).abs() < 1e-12);
        assert!((inst.travel_co2_between(a, b).unwrap() - fuel * ef).abs() < 1e-12);
    }
    let i = inst.task_index("3").unwrap();
    assert_eq!(inst.travel_fuel(i, i), 0.0);
    assert_eq!(inst.travel_co2(i, i), 0.0);
}

fn single(p: f64) -> Instance {
    Instance::from_toml_str(&format!(
        r#"
        [work_day]
        start = 8
        end = 17
        [[vehicles]]
        id = "Van"
        fuel_efficiency_km_per_l = 12
        emission_factor_kg_per_l = 2.64
        [[tasks]]
        id = 1
        processing_hours = {p}
        fuel_l = 5
        co2_kg = 13.2
        vehicle = "Van"
    "#
    ))
    .unwrap()
}

#[test]
fn single_task_schedule() {
    let inst = single(2.0);
    let s = solve_exact(&inst, &opts()).unwrap();
    assert_eq!(s.segments, vec![Segment { task: 0, start: Ticks::from_hours(8.0), end: Ticks::from_hours(10.0) }]);
    assert!(s.optimal);
    let b = objective(&inst, &s).unwrap();
    assert!((b.z - 20.2).abs() < 1e-12, "{b:?}");
    let base = solve_baseline(&inst).unwrap();
    assert_eq!(base.segments, s.segments);
    assert_eq!(brute_force(&inst).unwrap().segments, s.segments);
}

#[test]
fn infeasible_day_is_reported() {
    let inst = single(12.0);
    assert!(matches!(solve_exact(&inst, &opts()), Err(ScheduleError::Infeasible(_))));
    assert!(matches!(solve_baseline(&inst), Err(ScheduleError::Infeasible(_))));
    assert!(matches!(brute_force(&inst), Err(ScheduleError::Infeasible(_))));
}

#[test]
fn reference_instance_exact_beats_baseline() {
    let inst = reference_instance();
    let exact = solve_exact(&inst, &opts()).unwrap();
    let base = solve_baseline(&inst).unwrap();
    assert_eq!(validate(&inst, &exact), vec![]);
    assert_eq!(validate(&inst, &base), vec![]);
    assert!(exact.optimal);
    let (ze, zb) = (objective(&inst, &exact).unwrap().z, objective(&inst, &base).unwrap().z);
    assert!(ze <= zb + 1e-9, "{ze} > {zb}");
    // Without preemption the search space is exactly what the oracle enumerates.
    let np = solve_exact(&inst, &no_preemption()).unwrap();
    let oracle = brute_force(&inst).unwrap();
    assert!((objective(&inst, &np).unwrap().z - objective(&inst, &oracle).unwrap().z).abs() < 1e-9);
    assert!(ze <= objective(&inst, &oracle).unwrap().z + 1e-9);
    let b = objective(&inst, &exact).unwrap();
    assert!((b.delay - b.delay_raw).abs() < 1e-12);
}

#[test]
fn equal_priority_tie_goes_to_nearer_task() {
    let text = r#"
        [work_day]
        start = 0
        end = 10
        [[vehicles]]
        id = "Van"
        fuel_efficiency_km_per_l = 10
        emission_factor_kg_per_l = 2
        [[tasks]]
        id = "a"
        processing_hours = 1
        fuel_l = 0
        co2_kg = 0
        vehicle = "Van"
        priority = 5
        [[tasks]]
        id = "far"
        processing_hours = 1
        fuel_l = 0
        co2_kg = 0
        vehicle = "Van"
        [[tasks]]
        id = "near"
        processing_hours = 1
        fuel_l = 0
        co2_kg = 0
        vehicle = "Van"
        [[travel]]
        from = "a"
        to = "far"
        hours = 2
        km = 20
        [[travel]]
        from = "a"
        to = "near"
        hours = 0.5
        km = 5
        [[travel]]
        from = "far"
        to = "near"
        hours = 1
        km = 10
    "#;
    let inst = Instance::from_toml_str(text).unwrap();
    let base = solve_baseline(&inst).unwrap();
    assert_eq!(base.sequence, vec![0, 2, 1]);
}

#[test]
fn baseline_waits_for_late_release() {
    let text = r#"
        [work_day]
        start = 8
        end = 16
        [[vehicles]]
        id = "Van"
        fuel_efficiency_km_per_l = 10
        emission_factor_kg_per_l = 2
        [[tasks]]
        id = 1
        processing_hours = 1
        fuel_l = 1
        co2_kg = 1
        vehicle = "Van"
        release_hours = 3
    "#;
    let inst = Instance::from_toml_str(text).unwrap();
    let base = solve_baseline(&inst).unwrap();
    assert_eq!(base.segments[0].start, Ticks::from_hours(11.0));
    let m = metrics(&inst, &base).unwrap();
    // 1 h of work over a 4 h span; finishes 1 h after release.
    assert_eq!(m.efficiency_pct, 25.0);
    assert_eq!(m.total_delay, 1.0);
}

#[test]
fn emergency_release_can_interrupt() {
    // A long task and an urgent job released mid-way. Waiting for the
    // release wastes span, finishing the long task first makes the urgent
    // job late; stopping at the release and coming back is cheapest.
    let text = r#"
        [work_day]
        start = 0
        end = 20
        [weights]
        time = 10
        delay = 5
        [[vehicles]]
        id = "Van"
        fuel_efficiency_km_per_l = 10
        emission_factor_kg_per_l = 2
        [[tasks]]
        id = "long"
        processing_hours = 6
        fuel_l = 0
        co2_kg = 0
        vehicle = "Van"
        max_preemptions = 2
        [[tasks]]
        id = "urgent"
        processing_hours = 1
        fuel_l = 0
        co2_kg = 0
        vehicle = "Van"
        release_hours = 2
        [[travel]]
        from = "long"
        to = "urgent"
        hours = 0.5
        km = 1
    "#;
    let inst = Instance::from_toml_str(text).unwrap();
    let s = solve_exact(&inst, &opts()).unwrap();
    assert_eq!(validate(&inst, &s), vec![]);
    assert_eq!(s.segments.len(), 3, "{s:?}");
    assert!(s.preempted(0));
    let h = Ticks::from_hours;
    assert_eq!(s.segments[0], Segment { task: 0, start: h(0.0), end: h(2.0) });
    assert_eq!(s.segments[1], Segment { task: 1, start: h(2.5), end: h(3.5) });
    assert_eq!(s.segments[2], Segment { task: 0, start: h(4.0), end: h(8.0) });
    let b = objective(&inst, &s).unwrap();
    // span 8 × 10 + delay 1.5 × 5 + two legs of 1 km (0.1 l, 0.2 kg each).
    // Waiting scores 95 + 5 and running the long task first 75 + 27.5.
    assert!((b.z - (80.0 + 7.5 + 0.2 + 0.4)).abs() < 1e-9, "{b:?}");
    let np = solve_exact(&inst, &no_preemption()).unwrap();
    assert!(objective(&inst, &np).unwrap().z > b.z);
}

#[test]
fn budget_exhaustion_is_flagged() {
    let mut g = RandomInstances { min_tasks: 9, max_tasks: 9, ..Default::default() };
    let inst = g.generate(0);
    match solve_exact(&inst, &SolveOptions { budget: Duration::ZERO, ..opts() }) {
        Ok(s) => assert!(!s.optimal),
        Err(e) => assert_eq!(e, ScheduleError::BudgetExhausted),
    }
}

#[test]
fn solution_report_and_gantt() {
    let inst = reference_instance();
    let s = solve_exact(&inst, &opts()).unwrap();
    let r = s.report(&inst).unwrap();
    assert_eq!(r.sequence.len(), 5);
    assert_eq!(r.dependencies.len(), 3);
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"objective\""));
    let csv = s.gantt_csv(&inst);
    assert_eq!(csv.lines().count(), s.segments.len() + 1);
}

#[test]
fn compare_single_task_generator_shows_no_gain() {
    let mut g = |_draw: usize| single(2.0);
    let r = compare_runs(&mut g, 3, &opts()).unwrap();
    assert_eq!(r.rows.len(), 5);
    assert!(r.rows.iter().all(|row| row.improvement_pct == 0.0), "{:?}", r.rows);
    assert_eq!(r.regenerated, 0);
}

#[test]
fn compare_regenerates_infeasible_instances() {
    let mut g = |draw: usize| if draw % 2 == 0 { single(12.0) } else { single(1.0) };
    let r = compare_runs(&mut g, 2, &opts()).unwrap();
    assert_eq!(r.regenerated, 2);
    assert_eq!(r.runs.len(), 2);
}

#[test]
fn compare_random_runs() {
    let mut g = RandomInstances::default();
    let r = compare_runs(&mut g, 5, &opts()).unwrap();
    for run in &r.runs {
        assert!(run.proposed.z <= run.conventional.z + 1e-9);
    }
    assert!(r.z_improvement_pct >= 0.0);
    let labels: Vec<&str> = r.rows.iter().map(|x| x.label.as_str()).collect();
    assert_eq!(labels[0], "Total Completion Time (E[C_max])");
    assert_eq!(r.to_text().lines().nth(1).unwrap(), "|---|---|---|---|");
}

/// Small random instance without preemption, for oracle comparisons.
fn small_instance(seed: u64, n: usize) -> Instance {
    let mut g = RandomInstances { seed, min_tasks: n, max_tasks: n, max_segments: 1, dependency_probability: 0.25, ..Default::default() };
    g.generate(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_enumeration(seed in any::<u64>(), n in 1usize..=4) {
        let inst = small_instance(seed, n);
        match (solve_exact(&inst, &no_preemption()), brute_force(&inst)) {
            (Ok(e), Ok(b)) => {
                prop_assert!(validate(&inst, &e).is_empty());
                let (ze, zb) = (objective(&inst, &e).unwrap().z, objective(&inst, &b).unwrap().z);
                prop_assert!((ze - zb).abs() < 1e-6, "{} vs {}", ze, zb);
            }
            (Err(ScheduleError::Infeasible(_)), Err(ScheduleError::Infeasible(_))) => {}
            (e, b) => prop_assert!(false, "solvers disagree: {:?} / {:?}", e.map(|s| s.segments), b.map(|s| s.segments)),
        }
    }

    #[test]
    fn solver_outputs_are_valid_and_dominate(seed in any::<u64>(), n in 1usize..=6) {
        let mut g = RandomInstances { seed, min_tasks: n, max_tasks: n, ..Default::default() };
        let inst = g.generate(0);
        if let (Ok(e), Ok(b)) = (solve_exact(&inst, &opts()), solve_baseline(&inst)) {
            prop_assert!(validate(&inst, &e).is_empty(), "{:?}", validate(&inst, &e));
            prop_assert!(validate(&inst, &b).is_empty());
            for t in 0..inst.n_tasks() {
                let total: Ticks = e.task_segments(t).map(|s| s.length()).sum();
                prop_assert_eq!(total, inst.tasks[t].processing);
            }
            let (ze, zb) = (objective(&inst, &e).unwrap(), objective(&inst, &b).unwrap());
            prop_assert!(ze.z <= zb.z + 1e-9);
            prop_assert!((ze.delay - ze.delay_raw).abs() < 1e-9);
            let eff = metrics(&inst, &e).unwrap().efficiency_pct;
            prop_assert!(eff > 0.0 && eff <= 100.0 + 1e-9);
        }
    }

    #[test]
    fn raising_fuel_weight_never_lowers_optimum(seed in any::<u64>(), bump in 0.1f64..5.0) {
        let inst = small_instance(seed, 4);
        if let Ok(s) = solve_exact(&inst, &opts()) {
            let z0 = objective(&inst, &s).unwrap().z;
            let mut heavier = inst.clone();
            heavier.weights.fuel += bump;
            let s1 = solve_exact(&heavier, &opts()).unwrap();
            prop_assert!(objective(&heavier, &s1).unwrap().z >= z0 - 1e-9);
        }
    }

    #[test]
    fn mirrored_travel_is_symmetric(seed in any::<u64>()) {
        let inst = small_instance(seed, 4);
        for i in 0..4 {
            for j in 0..4 {
                prop_assert_eq!(inst.travel_time[i][j], inst.travel_time[j][i]);
            }
        }
    }
}
