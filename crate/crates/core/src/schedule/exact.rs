//! Depth-first branch-and-bound over segment orderings.
//!
//! A node fixes a prefix of the schedule: the current time, the crew's
//! location and how much work is left on each task. Children start the next
//! segment as early as travel and release allow. A running task may also be
//! cut at the release time of a waiting emergency task, which must then be
//! served next. Nodes are pruned by a lower bound on the final objective and
//! by a memo of equivalent states already reached more cheaply.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::time::{Duration, Instant};

use super::{objective, Instance, ScheduleError, Segment, Solution, Ticks};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Wall-clock limit; when it runs out the best schedule so far is
    /// returned with `optimal = false`.
    pub budget: Duration,
    /// Allow emergency releases to interrupt running tasks.
    pub allow_preemption: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { budget: Duration::from_secs(60), allow_preemption: true }
    }
}

const TIE: f64 = 1e-9;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Key {
    now: Ticks,
    loc: Option<usize>,
    forced: Option<usize>,
    remaining: Vec<Ticks>,
    segs: Vec<u32>,
}

struct Node {
    now: Ticks,
    loc: Option<usize>,
    forced: Option<usize>,
    remaining: Vec<Ticks>,
    segs: Vec<u32>,
    /// Weighted travel and emergency-delay cost accumulated so far.
    cost: f64,
    fuel: f64,
    co2: f64,
    segments: Vec<Segment>,
}

struct Search<'a> {
    inst: &'a Instance,
    opts: &'a SolveOptions,
    deadline: Instant,
    nodes: u64,
    timed_out: bool,
    order: Vec<usize>,
    fixed_cost: f64,
    min_in_time: Vec<Ticks>,
    min_in_cost: Vec<f64>,
    best: Option<(f64, Vec<usize>, Vec<Segment>)>,
    memo: HashMap<Key, (f64, Vec<usize>)>,
}

fn tie_key(segments: &[Segment]) -> Vec<usize> {
    segments.iter().map(|s| s.task).collect()
}

/// `Less` when `(za, ka)` is the better of two candidates: lower cost, or a
/// tie broken by the lexicographically smaller task order.
fn better(za: f64, ka: &[usize], zb: f64, kb: &[usize]) -> bool {
    if za < zb - TIE {
        return true;
    }
    za <= zb + TIE && ka.cmp(kb) == Ordering::Less
}

impl Search<'_> {
    fn travel_cost(&self, from: Option<usize>, to: usize) -> (f64, f64, f64) {
        match from {
            None => (0.0, 0.0, 0.0),
            Some(i) => {
                let (f, c) = (self.inst.travel_fuel(i, to), self.inst.travel_co2(i, to));
                (self.inst.weights.fuel * f + self.inst.weights.co2 * c, f, c)
            }
        }
    }

    fn travel_time(&self, from: Option<usize>, to: usize) -> Ticks {
        from.map_or(Ticks::ZERO, |i| self.inst.travel_time[i][to])
    }

    /// Lower bound on the final objective and on the final clock time.
    fn bound(&self, node: &Node) -> (f64, Ticks) {
        let inst = self.inst;
        let w = inst.weights;
        let mut work = Ticks::ZERO;
        let mut entry_time = Ticks::ZERO;
        let mut entry_cost = 0.0;
        let mut widest = (Ticks::ZERO, 0.0);
        let mut release_end = node.now;
        let mut delay = 0.0;
        for (t, &rem) in node.remaining.iter().enumerate() {
            if rem == Ticks::ZERO {
                continue;
            }
            work += rem;
            entry_time += self.min_in_time[t];
            entry_cost += self.min_in_cost[t];
            widest = (widest.0.max(self.min_in_time[t]), f64::max(widest.1, self.min_in_cost[t]));
            let rel = inst.release_at(t);
            release_end = release_end.max(rel + rem);
            if inst.tasks[t].emergency {
                delay += ((node.now.max(rel) + rem) - rel).hours();
            }
        }
        if node.loc.is_none() {
            // The first task is reached from the depot for free.
            entry_time = entry_time - widest.0;
            entry_cost -= widest.1;
        }
        let end = (node.now + work + entry_time).max(release_end);
        let z = node.cost + self.fixed_cost + w.time * (end - inst.start).hours() + entry_cost + w.delay * delay;
        (z, end)
    }

    fn expired(&mut self) -> bool {
        self.nodes += 1;
        if !self.timed_out && self.nodes % 256 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn dfs(&mut self, node: &mut Node) {
        if self.expired() {
            return;
        }
        let inst = self.inst;
        if node.remaining.iter().all(|&r| r == Ticks::ZERO) {
            let sol = Solution::from_segments(inst.n_tasks(), node.segments.clone(), false, "exact");
            let b = objective(inst, &sol).expect("complete schedule");
            debug_assert!((b.fuel - node.fuel).abs() < 1e-9 && (b.co2 - node.co2).abs() < 1e-9);
            let key = tie_key(&node.segments);
            if self.best.as_ref().is_none_or(|(z, k, _)| better(b.z, &key, *z, k)) {
                self.best = Some((b.z, key, node.segments.clone()));
            }
            return;
        }
        let (lb, end_lb) = self.bound(node);
        if end_lb > inst.end || self.best.as_ref().is_some_and(|(z, _, _)| lb > z + TIE) {
            return;
        }
        let memo_key = Key {
            now: node.now,
            loc: node.loc,
            forced: node.forced,
            remaining: node.remaining.clone(),
            segs: node.segs.clone(),
        };
        let prefix = tie_key(&node.segments);
        match self.memo.get(&memo_key) {
            Some((c, k)) if !better(node.cost, &prefix, *c, k) => return,
            _ => {
                self.memo.insert(memo_key, (node.cost, prefix));
            }
        }

        let candidates: Vec<usize> = match node.forced {
            Some(e) => vec![e],
            None => self
                .order
                .iter()
                .copied()
                .filter(|&t| node.remaining[t] > Ticks::ZERO && inst.predecessors(t).iter().all(|&p| node.remaining[p] == Ticks::ZERO))
                .collect(),
        };
        for t in candidates {
            let start = (node.now + self.travel_time(node.loc, t)).max(inst.release_at(t));
            let rem = node.remaining[t];
            let mut cuts: Vec<(Ticks, usize)> = Vec::new();
            if self.opts.allow_preemption && node.segs[t] + 2 <= inst.tasks[t].max_segments {
                for &e in &self.order {
                    let rel = inst.release_at(e);
                    let waiting = e != t && inst.tasks[e].emergency && node.segs[e] == 0;
                    let ready = inst.predecessors(e).iter().all(|&p| node.remaining[p] == Ticks::ZERO);
                    if waiting && ready && start < rel && rel < start + rem {
                        cuts.push((rel, e));
                    }
                }
                cuts.sort_by_key(|&(rel, _)| rel);
            }
            let full = std::iter::once((start + rem, None));
            for (stop, next) in full.chain(cuts.into_iter().map(|(r, e)| (r, Some(e)))) {
                if stop > inst.end {
                    continue;
                }
                self.descend(node, t, start, stop, next);
                if self.timed_out {
                    return;
                }
            }
        }
    }

    /// Runs task `t` over `[start, stop]`, recurses, then restores `node`.
    fn descend(&mut self, node: &mut Node, t: usize, start: Ticks, stop: Ticks, next: Option<usize>) {
        let inst = self.inst;
        let (tc, tf, tco2) = self.travel_cost(node.loc, t);
        let finished = stop - start == node.remaining[t];
        let late = if finished && inst.tasks[t].emergency {
            inst.weights.delay * (stop - inst.release_at(t)).hours().max(0.0)
        } else {
            0.0
        };
        let saved = (node.now, node.loc, node.forced, node.cost, node.fuel, node.co2);
        node.now = stop;
        node.loc = Some(t);
        node.forced = next;
        node.cost += tc + late;
        node.fuel += tf;
        node.co2 += tco2;
        node.remaining[t] = node.remaining[t] - (stop - start);
        node.segs[t] += 1;
        node.segments.push(Segment { task: t, start, end: stop });

        self.dfs(node);

        node.segments.pop();
        node.segs[t] -= 1;
        node.remaining[t] += stop - start;
        (node.now, node.loc, node.forced, node.cost, node.fuel, node.co2) = saved;
    }
}

/// Minimises the weighted objective by branch-and-bound.
///
/// The search is single-threaded and deterministic. Among schedules with the
/// same objective (within 1e-9) the one whose segment task order is
/// lexicographically smallest wins.
pub fn solve_exact(inst: &Instance, opts: &SolveOptions) -> Result<Solution, ScheduleError> {
    let n = inst.n_tasks();
    let min_travel = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| inst.travel_time[i][j])
        .min()
        .unwrap_or(Ticks::ZERO);
    let needed = inst.total_processing() + Ticks(min_travel.0 * (n as i64 - 1));
    if needed > inst.end - inst.start {
        return Err(ScheduleError::Infeasible(format!(
            "{} h of processing and travel do not fit in a {} h work day",
            needed,
            inst.end - inst.start
        )));
    }

    let w = inst.weights;
    let min_in = |t: usize| -> (Ticks, f64) {
        let others = (0..n).filter(|&i| i != t);
        let time = others.clone().map(|i| inst.travel_time[i][t]).min().unwrap_or(Ticks::ZERO);
        let cost = others
            .map(|i| w.fuel * inst.travel_fuel(i, t) + w.co2 * inst.travel_co2(i, t))
            .fold(f64::INFINITY, f64::min);
        (time, if cost.is_finite() { cost } else { 0.0 })
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&t| (std::cmp::Reverse(inst.tasks[t].priority), t));
    let mut search = Search {
        inst,
        opts,
        deadline: Instant::now() + opts.budget,
        nodes: 0,
        timed_out: false,
        order,
        fixed_cost: inst.tasks.iter().map(|t| w.fuel * t.fuel_l + w.co2 * t.co2_kg).sum(),
        min_in_time: (0..n).map(|t| min_in(t).0).collect(),
        min_in_cost: (0..n).map(|t| min_in(t).1).collect(),
        best: None,
        memo: HashMap::new(),
    };
    let mut root = Node {
        now: inst.start,
        loc: None,
        forced: None,
        remaining: inst.tasks.iter().map(|t| t.processing).collect(),
        segs: vec![0; n],
        cost: 0.0,
        fuel: inst.tasks.iter().map(|t| t.fuel_l).sum(),
        co2: inst.tasks.iter().map(|t| t.co2_kg).sum(),
        segments: Vec::new(),
    };
    search.dfs(&mut root);
    let timed_out = search.timed_out;
    match search.best {
        Some((_, _, segments)) => Ok(Solution::from_segments(n, segments, !timed_out, "exact")),
        None if timed_out => Err(ScheduleError::BudgetExhausted),
        None => Err(ScheduleError::Infeasible("no ordering meets the release, dependency and work-day constraints".into())),
    }
}
