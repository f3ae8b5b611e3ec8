//! The conventional-operator baseline and the enumeration oracle.

use super::{objective, Instance, ScheduleError, Segment, Solution, Ticks};

/// Largest instance [`brute_force`] accepts.
pub const BRUTE_FORCE_MAX_TASKS: usize = 8;

fn travel(inst: &Instance, from: Option<usize>, to: usize) -> Ticks {
    from.map_or(Ticks::ZERO, |i| inst.travel_time[i][to])
}

/// Greedy dispatching as a crew would do it by hand.
///
/// At each step the crew takes the highest-priority task that is released
/// and whose dependencies are done, breaking ties by shortest drive and then
/// by file order. If nothing is released yet it drives to the eligible task
/// that is released first and waits there. Tasks are never interrupted.
pub fn solve_baseline(inst: &Instance) -> Result<Solution, ScheduleError> {
    let n = inst.n_tasks();
    let mut done = vec![false; n];
    let mut now = inst.start;
    let mut loc = None;
    let mut segments = Vec::with_capacity(n);
    for _ in 0..n {
        let eligible: Vec<usize> =
            (0..n).filter(|&t| !done[t] && inst.predecessors(t).iter().all(|&p| done[p])).collect();
        let released: Vec<usize> = eligible.iter().copied().filter(|&t| inst.release_at(t) <= now).collect();
        let pick = if released.is_empty() {
            eligible.iter().copied().min_by_key(|&t| {
                (inst.release_at(t), std::cmp::Reverse(inst.tasks[t].priority), travel(inst, loc, t), t)
            })
        } else {
            released
                .iter()
                .copied()
                .min_by_key(|&t| (std::cmp::Reverse(inst.tasks[t].priority), travel(inst, loc, t), t))
        }
        .expect("an acyclic dependency graph always has an eligible task");
        let start = (now + travel(inst, loc, pick)).max(inst.release_at(pick));
        let end = start + inst.tasks[pick].processing;
        if end > inst.end {
            return Err(ScheduleError::Infeasible(format!(
                "the greedy crew finishes task {} at {} h, after the work day ends at {} h",
                inst.tasks[pick].id, end, inst.end
            )));
        }
        segments.push(Segment { task: pick, start, end });
        done[pick] = true;
        now = end;
        loc = Some(pick);
    }
    Ok(Solution::from_segments(n, segments, false, "baseline"))
}

/// Tries every dependency-respecting task order without preemption, each
/// timed as early as possible, and returns the cheapest schedule (the
/// lexicographically first order among ties).
pub fn brute_force(inst: &Instance) -> Result<Solution, ScheduleError> {
    let n = inst.n_tasks();
    if n > BRUTE_FORCE_MAX_TASKS {
        return Err(ScheduleError::TooLarge { tasks: n, max: BRUTE_FORCE_MAX_TASKS });
    }
    let mut best: Option<(f64, Vec<Segment>)> = None;
    let mut path = Vec::with_capacity(n);
    let mut done = vec![false; n];
    enumerate(inst, &mut path, &mut done, inst.start, None, &mut best);
    best.map(|(_, segs)| Solution::from_segments(n, segs, true, "brute-force"))
        .ok_or_else(|| ScheduleError::Infeasible("no task order fits the work day".into()))
}

fn enumerate(
    inst: &Instance,
    path: &mut Vec<Segment>,
    done: &mut [bool],
    now: Ticks,
    loc: Option<usize>,
    best: &mut Option<(f64, Vec<Segment>)>,
) {
    let n = inst.n_tasks();
    if path.len() == n {
        let sol = Solution::from_segments(n, path.clone(), true, "brute-force");
        let z = objective(inst, &sol).expect("complete schedule").z;
        if best.as_ref().is_none_or(|(b, _)| z < b - 1e-9) {
            *best = Some((z, path.clone()));
        }
        return;
    }
    for t in 0..n {
        if done[t] || !inst.predecessors(t).iter().all(|&p| done[p]) {
            continue;
        }
        let start = (now + travel(inst, loc, t)).max(inst.release_at(t));
        let end = start + inst.tasks[t].processing;
        if end > inst.end {
            continue;
        }
        done[t] = true;
        path.push(Segment { task: t, start, end });
        enumerate(inst, path, done, end, Some(t), best);
        path.pop();
        done[t] = false;
    }
}
