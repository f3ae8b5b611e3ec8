use std::collections::BTreeMap;

use serde::Serialize;

use super::{Instance, ScheduleError, Ticks};

/// One uninterrupted stretch of work on a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub task: usize,
    pub start: Ticks,
    pub end: Ticks,
}

impl Segment {
    pub fn length(&self) -> Ticks {
        self.end - self.start
    }
}

/// A schedule: segments in start order plus the visiting order of tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub segments: Vec<Segment>,
    /// Tasks in order of their first segment.
    pub sequence: Vec<usize>,
    /// Position of each task in `sequence`, starting at 1.
    pub ranks: Vec<usize>,
    /// Whether the solver proved this schedule optimal.
    pub optimal: bool,
    pub solver: String,
}

impl Solution {
    /// Builds a solution from segments in any order, deriving the sequence
    /// and ranks from first start times.
    pub fn from_segments(n_tasks: usize, mut segments: Vec<Segment>, optimal: bool, solver: &str) -> Self {
        segments.sort_by_key(|s| (s.start, s.end, s.task));
        let mut sequence = Vec::new();
        for s in &segments {
            if s.task < n_tasks && !sequence.contains(&s.task) {
                sequence.push(s.task);
            }
        }
        let mut ranks = vec![0; n_tasks];
        for (pos, &t) in sequence.iter().enumerate() {
            ranks[t] = pos + 1;
        }
        Self { segments, sequence, ranks, optimal, solver: solver.to_string() }
    }

    pub fn task_segments(&self, task: usize) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.task == task)
    }

    /// End of the task's last segment.
    pub fn completion(&self, task: usize) -> Option<Ticks> {
        self.task_segments(task).map(|s| s.end).max()
    }

    pub fn preempted(&self, task: usize) -> bool {
        self.task_segments(task).count() > 1
    }

    pub fn cmax(&self) -> Option<Ticks> {
        self.segments.iter().map(|s| s.end).max()
    }

    /// Consecutive segments that belong to different tasks; each is a drive.
    pub fn legs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.segments.windows(2).filter(|w| w[0].task != w[1].task).map(|w| (w[0].task, w[1].task))
    }

    /// Plot data: one row per segment with clock hours.
    pub fn gantt_csv(&self, inst: &Instance) -> String {
        let mut out = String::from("task,segment,start,end\n");
        let mut count = vec![0usize; inst.n_tasks()];
        for s in &self.segments {
            count[s.task] += 1;
            out.push_str(&format!("{},{},{},{}\n", inst.tasks[s.task].id, count[s.task], s.start, s.end));
        }
        out
    }

    /// Serializable summary with task ids, objective terms and metrics.
    pub fn report(&self, inst: &Instance) -> Result<SolutionReport, ScheduleError> {
        let breakdown = objective(inst, self)?;
        let metrics = metrics(inst, self)?;
        let id = |t: usize| inst.tasks[t].id.clone();
        let mut count = vec![0usize; inst.n_tasks()];
        let segments = self
            .segments
            .iter()
            .map(|s| {
                count[s.task] += 1;
                SegmentReport { task: id(s.task), segment: count[s.task], start: s.start.hours(), end: s.end.hours() }
            })
            .collect();
        Ok(SolutionReport {
            solver: self.solver.clone(),
            optimal: self.optimal,
            sequence: self.sequence.iter().map(|&t| id(t)).collect(),
            ranks: (0..inst.n_tasks()).map(|t| (id(t), self.ranks[t])).collect(),
            segments,
            preempted: (0..inst.n_tasks()).map(|t| (id(t), self.preempted(t))).collect(),
            dependencies: inst.dependencies.iter().map(|&(i, j)| (id(i), id(j))).collect(),
            objective: breakdown,
            metrics,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub task: String,
    pub segment: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub solver: String,
    pub optimal: bool,
    pub sequence: Vec<String>,
    pub ranks: BTreeMap<String, usize>,
    pub segments: Vec<SegmentReport>,
    /// Whether each task was split into more than one segment.
    pub preempted: BTreeMap<String, bool>,
    /// Dependency pairs `(before, after)` as given in the instance.
    pub dependencies: Vec<(String, String)>,
    pub objective: Breakdown,
    pub metrics: Metrics,
}

/// Objective value and its terms. Times are hours, fuel litres, CO₂ kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakdown {
    /// Clock time at which the last segment ends.
    pub cmax: f64,
    /// `cmax` minus the start of the work day.
    pub span: f64,
    pub fuel: f64,
    pub co2: f64,
    /// Lateness of emergency tasks past their release, clamped at zero.
    pub delay: f64,
    /// The same sum without clamping.
    pub delay_raw: f64,
    pub z: f64,
}

/// Schedule quality measures reported next to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Σ over all tasks of `max(0, completion − release)`, hours.
    pub total_delay: f64,
    /// Processing time as a percentage of the span.
    pub efficiency_pct: f64,
}

fn completions(inst: &Instance, sol: &Solution) -> Result<Vec<Ticks>, ScheduleError> {
    if let Some(s) = sol.segments.iter().find(|s| s.task >= inst.n_tasks()) {
        return Err(ScheduleError::Incomplete(format!("segment refers to task index {}", s.task)));
    }
    (0..inst.n_tasks())
        .map(|t| sol.completion(t).ok_or_else(|| ScheduleError::Incomplete(format!("task {} is never scheduled", inst.tasks[t].id))))
        .collect()
}

/// Evaluates the weighted objective of a schedule.
pub fn objective(inst: &Instance, sol: &Solution) -> Result<Breakdown, ScheduleError> {
    let done = completions(inst, sol)?;
    let cmax = *done.iter().max().expect("instances have tasks");
    let mut fuel: f64 = inst.tasks.iter().map(|t| t.fuel_l).sum();
    let mut co2: f64 = inst.tasks.iter().map(|t| t.co2_kg).sum();
    for (i, j) in sol.legs() {
        fuel += inst.travel_fuel(i, j);
        co2 += inst.travel_co2(i, j);
    }
    let (mut delay, mut delay_raw) = (0.0, 0.0);
    for (t, task) in inst.tasks.iter().enumerate() {
        if task.emergency {
            let late = (done[t] - inst.release_at(t)).hours();
            delay += late.max(0.0);
            delay_raw += late;
        }
    }
    let span = (cmax - inst.start).hours();
    let w = inst.weights;
    let z = w.time * span + w.fuel * fuel + w.co2 * co2 + w.delay * delay;
    Ok(Breakdown { cmax: cmax.hours(), span, fuel, co2, delay, delay_raw, z })
}

/// Total lateness over all tasks and processing efficiency.
pub fn metrics(inst: &Instance, sol: &Solution) -> Result<Metrics, ScheduleError> {
    let done = completions(inst, sol)?;
    let cmax = *done.iter().max().expect("instances have tasks");
    if cmax <= inst.start {
        return Err(ScheduleError::ZeroSpan);
    }
    let total_delay = (0..inst.n_tasks()).map(|t| (done[t] - inst.release_at(t)).hours().max(0.0)).sum();
    let efficiency_pct = inst.total_processing().hours() / (cmax - inst.start).hours() * 100.0;
    Ok(Metrics { total_delay, efficiency_pct })
}

/// A broken constraint: which rule and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

pub const SEGMENT_SUM: &str = "segment completion: sum of p_ik equals p_i";
pub const SEGMENT_POSITIVE: &str = "segment length: p_ik > 0";
pub const PRECEDENCE: &str = "precedence: s_j1 >= C_iK_i for each dependency (i, j)";
pub const TRAVEL: &str = "travel: s_j >= C_i + d_ij when j directly follows i";
pub const NO_OVERLAP: &str = "no overlap: s_jl >= C_ik - M(1 - x) and s_ik >= C_jl - M x for some x in {0, 1}";
pub const WORK_HOURS: &str = "working hours: S <= s_ik and C_ik <= E";
pub const RELEASE: &str = "release: s_i1 >= S + r_i";
pub const PREEMPTION_LIMIT: &str = "preemption limit: K_i <= max segments of task i";
pub const SEQUENCING: &str = "sequencing: one predecessor and one successor per task on a path from the depot";
pub const SUBTOUR: &str = "subtour elimination: u_i - u_j + n y_ij <= n - 1";

/// Checks a schedule against every constraint of the model and returns the
/// violations found (empty when the schedule is feasible).
pub fn validate(inst: &Instance, sol: &Solution) -> Vec<Violation> {
    let n = inst.n_tasks();
    let mut out = Vec::new();
    let mut push = |constraint: &'static str, detail: String| out.push(Violation { constraint, detail });
    let id = |t: usize| inst.tasks.get(t).map_or_else(|| format!("#{t}"), |x| x.id.clone());

    for s in &sol.segments {
        if s.task >= n {
            push(SEQUENCING, format!("segment refers to unknown task index {}", s.task));
        } else if s.end <= s.start {
            push(SEGMENT_POSITIVE, format!("task {} has a segment [{}, {}]", id(s.task), s.start, s.end));
        }
    }
    let valid: Vec<Segment> = sol.segments.iter().copied().filter(|s| s.task < n).collect();

    let mut first_start = vec![None; n];
    let mut done = vec![None; n];
    for t in 0..n {
        let segs: Vec<&Segment> = valid.iter().filter(|s| s.task == t).collect();
        let total: Ticks = segs.iter().map(|s| s.length()).sum();
        if total != inst.tasks[t].processing {
            push(SEGMENT_SUM, format!("task {} is processed for {} h of {} h", id(t), total, inst.tasks[t].processing));
        }
        if segs.len() > inst.tasks[t].max_segments as usize {
            push(PREEMPTION_LIMIT, format!("task {} has {} segments, limit {}", id(t), segs.len(), inst.tasks[t].max_segments));
        }
        first_start[t] = segs.iter().map(|s| s.start).min();
        done[t] = segs.iter().map(|s| s.end).max();
        if let Some(s1) = first_start[t] {
            if s1 < inst.release_at(t) {
                push(RELEASE, format!("task {} starts at {} before its release at {}", id(t), s1, inst.release_at(t)));
            }
        }
    }
    for s in &valid {
        if s.start < inst.start || s.end > inst.end {
            push(WORK_HOURS, format!("task {} runs [{}, {}] outside [{}, {}]", id(s.task), s.start, s.end, inst.start, inst.end));
        }
    }
    for &(i, j) in &inst.dependencies {
        if let (Some(ci), Some(sj)) = (done[i], first_start[j]) {
            if sj < ci {
                push(PRECEDENCE, format!("task {} starts at {} before task {} finishes at {}", id(j), sj, id(i), ci));
            }
        }
    }

    let m = inst.big_m;
    for a in 0..valid.len() {
        for b in (a + 1)..valid.len() {
            let (p, q) = (valid[a], valid[b]);
            let ok = |x: i64| q.start >= p.end - Ticks(m.0 * (1 - x)) && p.start >= q.end - Ticks(m.0 * x);
            if !(ok(0) || ok(1)) {
                push(
                    NO_OVERLAP,
                    format!("task {} [{}, {}] overlaps task {} [{}, {}]", id(p.task), p.start, p.end, id(q.task), q.start, q.end),
                );
            }
        }
    }
    let mut chrono = valid.clone();
    chrono.sort_by_key(|s| (s.start, s.end));
    for w in chrono.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.task != b.task && b.start < a.end + inst.travel_time[a.task][b.task] {
            push(
                TRAVEL,
                format!(
                    "task {} starts at {}, {} h travel after task {} ends at {}",
                    id(b.task),
                    b.start,
                    inst.travel_time[a.task][b.task],
                    id(a.task),
                    a.end
                ),
            );
        }
    }

    // The depot opens and closes the path, so every task needs exactly one
    // slot in the sequence and the sequence must follow first start times.
    let mut slots = vec![0usize; n];
    for &t in &sol.sequence {
        if t < n {
            slots[t] += 1;
        } else {
            push(SEQUENCING, format!("sequence refers to unknown task index {t}"));
        }
    }
    for t in 0..n {
        if slots[t] != 1 {
            push(SEQUENCING, format!("task {} appears {} times in the sequence", id(t), slots[t]));
        }
    }
    let mut by_start: Vec<usize> = (0..n).filter(|&t| first_start[t].is_some()).collect();
    by_start.sort_by_key(|&t| (first_start[t], sol.sequence.iter().position(|&x| x == t)));
    if by_start.len() == n && by_start != sol.sequence {
        push(SEQUENCING, "sequence does not follow the order of first segments".into());
    }
    if sol.ranks.len() != n {
        push(SUBTOUR, format!("expected {n} ranks, got {}", sol.ranks.len()));
    } else {
        for t in 0..n {
            if !(1..=n).contains(&sol.ranks[t]) {
                push(SUBTOUR, format!("rank of task {} is {}, outside 1..={n}", id(t), sol.ranks[t]));
            }
        }
        for w in sol.sequence.windows(2) {
            let (i, j) = (w[0], w[1]);
            if i < n && j < n && sol.ranks[i] as i64 - sol.ranks[j] as i64 + n as i64 > n as i64 - 1 {
                push(SUBTOUR, format!("ranks {} -> {} do not increase along the sequence", id(i), id(j)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64) -> Ticks {
        Ticks::from_hours(x)
    }

    fn inst() -> Instance {
        Instance::from_toml_str(
            r#"
            [work_day]
            start = 8
            end = 16
            [[vehicles]]
            id = "Van"
            fuel_efficiency_km_per_l = 12
            emission_factor_kg_per_l = 2.64
            [[tasks]]
            id = 1
            processing_hours = 2
            fuel_l = 5
            co2_kg = 13.2
            vehicle = "Van"
            [[tasks]]
            id = 3
            processing_hours = 1
            fuel_l = 1
            co2_kg = 2
            release_hours = 1
            vehicle = "Van"
            [[dependencies]]
            before = 1
            after = 3
            [[travel]]
            from = 1
            to = 3
            hours = 0.5
            km = 12
        "#,
        )
        .unwrap()
    }

    fn sol(segs: &[(usize, f64, f64)]) -> Solution {
        let segs = segs.iter().map(|&(task, s, e)| Segment { task, start: h(s), end: h(e) }).collect();
        Solution::from_segments(2, segs, false, "test")
    }

    #[test]
    fn hand_built_schedule_is_clean() {
        // Task 1 [8, 10], drive 0.5 h, task 3 [10.5, 11.5] (released at 9).
        let s = sol(&[(0, 8.0, 10.0), (1, 10.5, 11.5)]);
        assert_eq!(validate(&inst(), &s), vec![]);
        let b = objective(&inst(), &s).unwrap();
        // span 3.5; fuel 6 + 12/12 = 7; co2 15.2 + 2.64; delay 11.5 - 9.
        assert_eq!(b.span, 3.5);
        assert!((b.fuel - 7.0).abs() < 1e-12);
        assert!((b.co2 - 17.84).abs() < 1e-12);
        assert_eq!(b.delay, 2.5);
        assert_eq!(b.delay, b.delay_raw);
        assert!((b.z - (3.5 + 7.0 + 17.84 + 2.5)).abs() < 1e-12);
        let m = metrics(&inst(), &s).unwrap();
        // (10 - 8) + (11.5 - 9)
        assert_eq!(m.total_delay, 4.5);
        assert!((m.efficiency_pct - 3.0 / 3.5 * 100.0).abs() < 1e-12);
    }

    fn constraints(v: &[Violation]) -> Vec<&'static str> {
        v.iter().map(|x| x.constraint).collect()
    }

    #[test]
    fn overlap_is_reported() {
        let s = sol(&[(0, 8.0, 10.0), (1, 9.5, 10.5)]);
        let v = constraints(&validate(&inst(), &s));
        assert!(v.contains(&NO_OVERLAP) && v.contains(&PRECEDENCE), "{v:?}");
    }

    #[test]
    fn dependency_violation_is_reported() {
        let s = sol(&[(1, 9.0, 10.0), (0, 10.5, 12.5)]);
        assert_eq!(constraints(&validate(&inst(), &s)), vec![PRECEDENCE]);
    }

    #[test]
    fn each_constraint_class_fires() {
        let i = inst();
        let check = |segs: &[(usize, f64, f64)], want: &str| {
            let v = constraints(&validate(&i, &sol(segs)));
            assert!(v.contains(&want), "expected {want} in {v:?}");
        };
        check(&[(0, 8.0, 10.0), (1, 10.2, 11.2)], TRAVEL);
        check(&[(0, 8.0, 9.0), (1, 10.5, 11.5)], SEGMENT_SUM);
        check(&[(0, 7.0, 9.0), (1, 10.5, 11.5)], WORK_HOURS);
        check(&[(0, 8.0, 9.0), (0, 9.0, 10.0), (1, 10.5, 11.5)], PREEMPTION_LIMIT);
        let early = sol(&[(0, 8.0, 10.0), (1, 10.5, 11.5)]);
        let mut i2 = i.clone();
        i2.tasks[1].release = h(3.0);
        assert_eq!(constraints(&validate(&i2, &early)), vec![RELEASE]);
        let mut bad = early.clone();
        bad.sequence = vec![1, 0];
        bad.ranks = vec![2, 1];
        let v = constraints(&validate(&i, &bad));
        assert!(v.contains(&SEQUENCING), "{v:?}");
        let mut bad_rank = early.clone();
        bad_rank.ranks = vec![2, 2];
        assert_eq!(constraints(&validate(&i, &bad_rank)), vec![SUBTOUR]);
        let zero = sol(&[(0, 8.0, 10.0), (1, 10.5, 11.5), (1, 11.5, 11.5)]);
        assert!(constraints(&validate(&i, &zero)).contains(&SEGMENT_POSITIVE));
    }

    #[test]
    fn incomplete_and_zero_span_are_errors() {
        let s = sol(&[(0, 8.0, 10.0)]);
        assert!(matches!(objective(&inst(), &s), Err(ScheduleError::Incomplete(_))));
        let mut i = inst();
        i.start = h(11.5);
        let s = sol(&[(0, 8.0, 10.0), (1, 10.5, 11.5)]);
        assert_eq!(metrics(&i, &s).unwrap_err(), ScheduleError::ZeroSpan);
    }

    #[test]
    fn zero_weights_give_zero() {
        let mut i = inst();
        i.weights = crate::schedule::Weights { time: 0.0, fuel: 0.0, co2: 0.0, delay: 0.0 };
        assert_eq!(objective(&i, &sol(&[(0, 8.0, 10.0), (1, 10.5, 11.5)])).unwrap().z, 0.0);
    }

    #[test]
    fn gantt_rows_number_segments_per_task() {
        let s = sol(&[(0, 8.0, 9.0), (1, 9.5, 10.5), (0, 11.0, 12.0)]);
        assert_eq!(s.gantt_csv(&inst()), "task,segment,start,end\n1,1,8,9\n3,1,9.5,10.5\n1,2,11,12\n");
        assert!(s.preempted(0) && !s.preempted(1));
        assert_eq!(s.legs().count(), 2);
    }
}
