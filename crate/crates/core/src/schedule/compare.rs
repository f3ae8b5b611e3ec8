//! Averaged comparison of the greedy baseline against the exact solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    metrics, objective, solve_baseline, solve_exact, validate, Breakdown, Instance, InstanceFile, Metrics,
    ScheduleError, Solution, SolveOptions, TaskFile, TravelFile, VehicleFile, Weights, WorkDay, DependencyFile,
};

/// Source of instances for [`compare_runs`]. `draw` counts every request,
/// including replacements for infeasible instances.
pub trait InstanceGenerator {
    fn generate(&mut self, draw: usize) -> Instance;
}

impl<F: FnMut(usize) -> Instance> InstanceGenerator for F {
    fn generate(&mut self, draw: usize) -> Instance {
        self(draw)
    }
}

/// Random single-day instances with two vehicle types, a few emergencies
/// and sparse forward dependencies. Each draw is seeded independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomInstances {
    pub seed: u64,
    pub min_tasks: usize,
    pub max_tasks: usize,
    pub dependency_probability: f64,
    pub emergency_probability: f64,
    pub max_segments: u32,
    pub weights: Weights,
}

impl Default for RandomInstances {
    fn default() -> Self {
        Self {
            seed: 42,
            min_tasks: 5,
            max_tasks: 7,
            dependency_probability: 0.15,
            emergency_probability: 0.3,
            max_segments: 2,
            weights: Weights::default(),
        }
    }
}

fn tenth(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

impl InstanceGenerator for RandomInstances {
    fn generate(&mut self, draw: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (draw as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let n = rng.random_range(self.min_tasks..=self.max_tasks.max(self.min_tasks));
        let vehicles = vec![
            VehicleFile { id: "Van".into(), fuel_efficiency_km_per_l: 12.0, emission_factor_kg_per_l: 2.64 },
            VehicleFile { id: "Small Truck".into(), fuel_efficiency_km_per_l: 8.0, emission_factor_kg_per_l: 2.68 },
        ];
        let mut points = Vec::with_capacity(n);
        let mut tasks = Vec::with_capacity(n);
        for i in 0..n {
            let v = rng.random_range(0..vehicles.len());
            let p = tenth(rng.random_range(0.5..3.0));
            let fuel = tenth(p * rng.random_range(2.0..3.0));
            let emergency = rng.random_bool(self.emergency_probability);
            let release = if emergency { tenth(rng.random_range(0.5..4.0)) } else { 0.0 };
            let (x, y) = (rng.random_range(0.0..8.0), rng.random_range(0.0..8.0));
            points.push((x, y));
            tasks.push(TaskFile {
                id: (i + 1).to_string(),
                processing_hours: p,
                fuel_l: fuel,
                co2_kg: (fuel * vehicles[v].emission_factor_kg_per_l * 100.0).round() / 100.0,
                location: Some([51.5 + y / 111.0, -0.13 + x / 69.0]),
                priority: rng.random_range(1..=5),
                release_hours: release,
                vehicle: vehicles[v].id.clone(),
                max_preemptions: Some(rng.random_range(1..=self.max_segments.max(1))),
                emergency: Some(emergency),
            });
        }
        let mut dependencies = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(self.dependency_probability) {
                    dependencies.push(DependencyFile { before: tasks[i].id.clone(), after: tasks[j].id.clone() });
                }
            }
        }
        let mut travel = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (points[i], points[j]);
                // Road distance as a detour factor over the straight line,
                // driven at about 20 km/h in town.
                let km = tenth(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() * 1.3).max(0.5);
                let hours = ((km / 20.0) * 20.0).ceil() / 20.0;
                travel.push(TravelFile { from: tasks[i].id.clone(), to: tasks[j].id.clone(), hours, km });
            }
        }
        let work: f64 = tasks.iter().map(|t| t.processing_hours).sum();
        let start = 8.0;
        let file = InstanceFile {
            max_preemptions: 1,
            work_day: WorkDay { start, end: start + (1.6 * work + 2.0).ceil() },
            weights: self.weights,
            vehicles,
            tasks,
            dependencies,
            travel,
        };
        Instance::from_file(file).expect("generated instances are well formed")
    }
}

/// Both solvers' results on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub tasks: usize,
    pub conventional: Breakdown,
    pub conventional_metrics: Metrics,
    pub proposed: Breakdown,
    pub proposed_metrics: Metrics,
    pub proposed_optimal: bool,
}

impl RunRecord {
    /// Scores a baseline and an exact schedule of the same instance.
    pub fn new(run: usize, inst: &Instance, conventional: &Solution, proposed: &Solution) -> Result<Self, ScheduleError> {
        Ok(Self {
            run,
            tasks: inst.n_tasks(),
            conventional: objective(inst, conventional)?,
            conventional_metrics: metrics(inst, conventional)?,
            proposed: objective(inst, proposed)?,
            proposed_metrics: metrics(inst, proposed)?,
            proposed_optimal: proposed.optimal,
        })
    }
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub label: String,
    pub unit: String,
    pub conventional: f64,
    pub proposed: f64,
    pub improvement_pct: f64,
}

impl MetricRow {
    /// `higher_is_better` flips the sign convention for the improvement.
    pub fn new(label: &str, unit: &str, conventional: f64, proposed: f64, higher_is_better: bool) -> Self {
        let gain = if higher_is_better { proposed - conventional } else { conventional - proposed };
        let improvement_pct = if gain == 0.0 { 0.0 } else { gain / conventional.abs() * 100.0 };
        Self { label: label.into(), unit: unit.into(), conventional, proposed, improvement_pct }
    }

    fn value(&self, v: f64) -> String {
        if self.unit == "%" {
            format!("{v:.2}%")
        } else {
            format!("{v:.2} {}", self.unit)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub runs: Vec<RunRecord>,
    /// Generated instances discarded because a solver found them infeasible.
    pub regenerated: usize,
    pub rows: Vec<MetricRow>,
    pub mean_z_conventional: f64,
    pub mean_z_proposed: f64,
    pub z_improvement_pct: f64,
}

pub const TABLE_HEADER: [&str; 4] = ["Metric", "Conventional Method", "Proposed Model", "Improvement (%)"];

impl ComparisonReport {
    /// Markdown table in the five-row layout, followed by the objective
    /// means and the regeneration count.
    pub fn to_text(&self) -> String {
        let mut s = format_table(&self.rows);
        s.push_str(&format!(
            "\nMean objective Z: {:.4} (conventional) vs {:.4} (proposed), improvement {:.2}%\n",
            self.mean_z_conventional, self.mean_z_proposed, self.z_improvement_pct
        ));
        s.push_str(&format!("Runs: {}, regenerated infeasible instances: {}\n", self.runs.len(), self.regenerated));
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,unit,conventional,proposed,improvement_pct\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{:.6},{:.6},{:.6}\n", r.label, r.unit, r.conventional, r.proposed, r.improvement_pct));
        }
        s.push_str(&format!(
            "Objective Z,,{:.6},{:.6},{:.6}\n",
            self.mean_z_conventional, self.mean_z_proposed, self.z_improvement_pct
        ));
        s
    }
}

/// Renders rows as a Markdown table with rounded percentages.
pub fn format_table(rows: &[MetricRow]) -> String {
    let mut s = format!("| {} |\n|---|---|---|---|\n", TABLE_HEADER.join(" | "));
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {:.0}% |\n",
            r.label,
            r.value(r.conventional),
            r.value(r.proposed),
            r.improvement_pct
        ));
    }
    s
}

const MAX_ATTEMPTS_PER_RUN: usize = 100;

/// Solves `n_runs` generated instances with both solvers and averages the
/// results. Instances that either solver finds infeasible are replaced.
pub fn compare_runs(
    generator: &mut dyn InstanceGenerator,
    n_runs: usize,
    opts: &SolveOptions,
) -> Result<ComparisonReport, ScheduleError> {
    let mut runs = Vec::with_capacity(n_runs);
    let mut regenerated = 0;
    let mut draw = 0;
    for run in 0..n_runs {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS_PER_RUN {
                return Err(ScheduleError::Infeasible(format!(
                    "generator produced {MAX_ATTEMPTS_PER_RUN} infeasible instances in a row"
                )));
            }
            let inst = generator.generate(draw);
            draw += 1;
            let pair = solve_baseline(&inst).and_then(|b| Ok((b, solve_exact(&inst, opts)?)));
            let (base, exact) = match pair {
                Ok(p) => p,
                Err(ScheduleError::Infeasible(_)) => {
                    regenerated += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            debug_assert!(validate(&inst, &base).is_empty() && validate(&inst, &exact).is_empty());
            runs.push(RunRecord::new(run, &inst, &base, &exact)?);
            break;
        }
    }
    Ok(ComparisonReport::from_runs(runs, regenerated))
}

impl ComparisonReport {
    /// Averages the per-run results into the five table rows.
    pub fn from_runs(runs: Vec<RunRecord>, regenerated: usize) -> Self {
        let k = runs.len().max(1) as f64;
        let mean = |f: &dyn Fn(&RunRecord) -> f64| runs.iter().map(f).sum::<f64>() / k;
        let rows = vec![
            MetricRow::new("Total Completion Time (E[C_max])", "hours", mean(&|r| r.conventional.span), mean(&|r| r.proposed.span), false),
            MetricRow::new(
                "Delays and Penalties (E[D_total])",
                "hours",
                mean(&|r| r.conventional_metrics.total_delay),
                mean(&|r| r.proposed_metrics.total_delay),
                false,
            ),
            MetricRow::new("CO2 Emissions (E[C_total])", "kg", mean(&|r| r.conventional.co2), mean(&|r| r.proposed.co2), false),
            MetricRow::new("Fuel Consumption (E[F_total])", "Litres", mean(&|r| r.conventional.fuel), mean(&|r| r.proposed.fuel), false),
            MetricRow::new(
                "Efficiency and Utilization (E[E_eff])",
                "%",
                mean(&|r| r.conventional_metrics.efficiency_pct),
                mean(&|r| r.proposed_metrics.efficiency_pct),
                true,
            ),
        ];
        let (zc, zp) = (mean(&|r| r.conventional.z), mean(&|r| r.proposed.z));
        let z_improvement_pct = MetricRow::new("Z", "", zc, zp, false).improvement_pct;
        Self { runs, regenerated, rows, mean_z_conventional: zc, mean_z_proposed: zp, z_improvement_pct }
    }
}
