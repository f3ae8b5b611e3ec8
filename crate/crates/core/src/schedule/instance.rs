use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::{ScheduleError, Ticks};

/// Task and vehicle identifiers may be written as integers or strings.
fn id_value<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Int(i64),
        Str(String),
    }
    Ok(match Id::deserialize(d)? {
        Id::Int(i) => i.to_string(),
        Id::Str(s) => s,
    })
}

/// Relative weights of makespan, fuel, CO₂ and emergency delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub time: f64,
    pub fuel: f64,
    pub co2: f64,
    pub delay: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { time: 1.0, fuel: 1.0, co2: 1.0, delay: 1.0 }
    }
}

/// Start and end of the work day, in hours on the clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkDay {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleFile {
    #[serde(deserialize_with = "id_value")]
    pub id: String,
    pub fuel_efficiency_km_per_l: f64,
    pub emission_factor_kg_per_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    #[serde(deserialize_with = "id_value")]
    pub id: String,
    pub processing_hours: f64,
    pub fuel_l: f64,
    pub co2_kg: f64,
    /// Latitude and longitude. Informational only; travel comes from the
    /// travel table.
    #[serde(default)]
    pub location: Option<[f64; 2]>,
    #[serde(default)]
    pub priority: i64,
    /// Hours after the start of the work day.
    #[serde(default)]
    pub release_hours: f64,
    #[serde(deserialize_with = "id_value")]
    pub vehicle: String,
    /// Maximum number of segments the task may be split into.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_preemptions: Option<u32>,
    /// Defaults to `release_hours > 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emergency: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyFile {
    #[serde(deserialize_with = "id_value")]
    pub before: String,
    #[serde(deserialize_with = "id_value")]
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TravelFile {
    #[serde(deserialize_with = "id_value")]
    pub from: String,
    #[serde(deserialize_with = "id_value")]
    pub to: String,
    pub hours: f64,
    pub km: f64,
}

fn default_max_preemptions() -> u32 {
    1
}

/// On-disk form of an instance (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    /// Segment limit for tasks that do not set their own.
    #[serde(default = "default_max_preemptions")]
    pub max_preemptions: u32,
    pub work_day: WorkDay,
    #[serde(default)]
    pub weights: Weights,
    pub vehicles: Vec<VehicleFile>,
    pub tasks: Vec<TaskFile>,
    #[serde(default)]
    pub dependencies: Vec<DependencyFile>,
    #[serde(default)]
    pub travel: Vec<TravelFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: String,
    pub fuel_efficiency: f64,
    pub emission_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub processing: Ticks,
    pub fuel_l: f64,
    pub co2_kg: f64,
    pub location: Option<[f64; 2]>,
    pub priority: i64,
    /// Offset from the start of the work day.
    pub release: Ticks,
    /// Index into [`Instance::vehicles`].
    pub vehicle: usize,
    pub max_segments: u32,
    pub emergency: bool,
}

/// A validated scheduling instance. Tasks are addressed by index in the
/// order they appear in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub tasks: Vec<Task>,
    pub vehicles: Vec<Vehicle>,
    /// `(i, j)`: task `j` may not start before task `i` has finished.
    pub dependencies: Vec<(usize, usize)>,
    pub travel_time: Vec<Vec<Ticks>>,
    pub travel_km: Vec<Vec<f64>>,
    pub start: Ticks,
    pub end: Ticks,
    pub weights: Weights,
    /// Larger than any time difference a feasible schedule can contain.
    pub big_m: Ticks,
    predecessors: Vec<Vec<usize>>,
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl Instance {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScheduleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScheduleError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScheduleError> {
        let file: InstanceFile = toml::from_str(text).map_err(|e| ScheduleError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: InstanceFile) -> Result<Self, ScheduleError> {
        let invalid = |m: String| Err(ScheduleError::Invalid(m));
        let (s, e) = (file.work_day.start, file.work_day.end);
        if !(s.is_finite() && e.is_finite() && s >= 0.0 && s < e) {
            return invalid(format!("work day must satisfy 0 <= start < end, got [{s}, {e}]"));
        }
        let w = file.weights;
        if ![w.time, w.fuel, w.co2, w.delay].into_iter().all(finite_nonneg) {
            return invalid("weights must be finite and non-negative".into());
        }
        if file.tasks.is_empty() {
            return invalid("at least one task is required".into());
        }
        if file.max_preemptions == 0 {
            return invalid("max_preemptions must be at least 1".into());
        }

        let mut vehicle_index = HashMap::new();
        let mut vehicles = Vec::new();
        for v in &file.vehicles {
            if !(v.fuel_efficiency_km_per_l.is_finite() && v.fuel_efficiency_km_per_l > 0.0) {
                return invalid(format!("vehicle {} needs a positive fuel efficiency", v.id));
            }
            if !(v.emission_factor_kg_per_l.is_finite() && v.emission_factor_kg_per_l > 0.0) {
                return invalid(format!("vehicle {} needs a positive emission factor", v.id));
            }
            if vehicle_index.insert(v.id.clone(), vehicles.len()).is_some() {
                return invalid(format!("duplicate vehicle {}", v.id));
            }
            vehicles.push(Vehicle {
                id: v.id.clone(),
                fuel_efficiency: v.fuel_efficiency_km_per_l,
                emission_factor: v.emission_factor_kg_per_l,
            });
        }

        let mut task_index = HashMap::new();
        let mut tasks = Vec::new();
        for t in &file.tasks {
            if !(t.processing_hours.is_finite() && t.processing_hours > 0.0) {
                return invalid(format!("task {} needs a positive processing time", t.id));
            }
            if !(finite_nonneg(t.fuel_l) && finite_nonneg(t.co2_kg) && finite_nonneg(t.release_hours)) {
                return invalid(format!("task {}: fuel, CO2 and release must be non-negative", t.id));
            }
            let vehicle = *vehicle_index
                .get(&t.vehicle)
                .ok_or_else(|| ScheduleError::UnknownVehicle { task: t.id.clone(), vehicle: t.vehicle.clone() })?;
            let max_segments = t.max_preemptions.unwrap_or(file.max_preemptions);
            if max_segments == 0 {
                return invalid(format!("task {}: max_preemptions must be at least 1", t.id));
            }
            let processing = Ticks::from_hours(t.processing_hours);
            if processing <= Ticks::ZERO {
                return invalid(format!("task {}: processing time rounds to zero", t.id));
            }
            if task_index.insert(t.id.clone(), tasks.len()).is_some() {
                return invalid(format!("duplicate task {}", t.id));
            }
            tasks.push(Task {
                id: t.id.clone(),
                processing,
                fuel_l: t.fuel_l,
                co2_kg: t.co2_kg,
                location: t.location,
                priority: t.priority,
                release: Ticks::from_hours(t.release_hours),
                vehicle,
                max_segments,
                emergency: t.emergency.unwrap_or(t.release_hours > 0.0),
            });
        }
        let n = tasks.len();
        let lookup = |id: &str| task_index.get(id).copied().ok_or_else(|| ScheduleError::UnknownTask(id.to_string()));

        let mut dependencies = Vec::new();
        for d in &file.dependencies {
            let pair = (lookup(&d.before)?, lookup(&d.after)?);
            if !dependencies.contains(&pair) {
                dependencies.push(pair);
            }
        }
        if let Some(cycle) = find_cycle(n, &dependencies) {
            return Err(ScheduleError::Cycle(cycle.into_iter().map(|i| tasks[i].id.clone()).collect()));
        }

        // Explicit entries first, then mirror whatever is missing.
        let mut given: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
        for t in &file.travel {
            let (i, j) = (lookup(&t.from)?, lookup(&t.to)?);
            if !(finite_nonneg(t.hours) && finite_nonneg(t.km)) {
                return invalid(format!("travel {} -> {} must be non-negative", t.from, t.to));
            }
            if i == j && (t.hours != 0.0 || t.km != 0.0) {
                return invalid(format!("travel from task {} to itself must be zero", t.from));
            }
            if given.insert((i, j), (t.hours, t.km)).is_some() {
                return invalid(format!("duplicate travel entry {} -> {}", t.from, t.to));
            }
        }
        let mut travel_time = vec![vec![Ticks::ZERO; n]; n];
        let mut travel_km = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (h, km) = given
                    .get(&(i, j))
                    .or_else(|| given.get(&(j, i)))
                    .copied()
                    .ok_or_else(|| ScheduleError::MissingTravel(tasks[i].id.clone(), tasks[j].id.clone()))?;
                travel_time[i][j] = Ticks::from_hours(h);
                travel_km[i][j] = km;
            }
        }

        let mut predecessors = vec![Vec::new(); n];
        for &(i, j) in &dependencies {
            predecessors[j].push(i);
        }
        let start = Ticks::from_hours(s);
        let end = Ticks::from_hours(e);
        let max_d = travel_time.iter().flatten().copied().max().unwrap_or(Ticks::ZERO);
        let big_m = (end - start) + max_d + tasks.iter().map(|t| t.processing).sum();
        Ok(Self { tasks, vehicles, dependencies, travel_time, travel_km, start, end, weights: w, big_m, predecessors })
    }

    /// The file form of this instance; travel is written for every ordered pair.
    pub fn to_file(&self) -> InstanceFile {
        let n = self.n_tasks();
        let mut travel = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    travel.push(TravelFile {
                        from: self.tasks[i].id.clone(),
                        to: self.tasks[j].id.clone(),
                        hours: self.travel_time[i][j].hours(),
                        km: self.travel_km[i][j],
                    });
                }
            }
        }
        InstanceFile {
            max_preemptions: 1,
            work_day: WorkDay { start: self.start.hours(), end: self.end.hours() },
            weights: self.weights,
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleFile {
                    id: v.id.clone(),
                    fuel_efficiency_km_per_l: v.fuel_efficiency,
                    emission_factor_kg_per_l: v.emission_factor,
                })
                .collect(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskFile {
                    id: t.id.clone(),
                    processing_hours: t.processing.hours(),
                    fuel_l: t.fuel_l,
                    co2_kg: t.co2_kg,
                    location: t.location,
                    priority: t.priority,
                    release_hours: t.release.hours(),
                    vehicle: self.vehicles[t.vehicle].id.clone(),
                    max_preemptions: Some(t.max_segments),
                    emergency: Some(t.emergency),
                })
                .collect(),
            dependencies: self
                .dependencies
                .iter()
                .map(|&(i, j)| DependencyFile { before: self.tasks[i].id.clone(), after: self.tasks[j].id.clone() })
                .collect(),
            travel,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file()).expect("instance files always serialize")
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    pub fn predecessors(&self, task: usize) -> &[usize] {
        &self.predecessors[task]
    }

    /// Clock time at which `task` becomes available.
    pub fn release_at(&self, task: usize) -> Ticks {
        self.start + self.tasks[task].release
    }

    pub fn total_processing(&self) -> Ticks {
        self.tasks.iter().map(|t| t.processing).sum()
    }

    /// Fuel burnt driving from task `i` to task `j`, in litres.
    ///
    /// The trip is made with the vehicle that task `j` requires, so the
    /// distance is divided by that vehicle's fuel efficiency.
    pub fn travel_fuel(&self, i: usize, j: usize) -> f64 {
        let v = &self.vehicles[self.tasks[j].vehicle];
        self.travel_km[i][j] / v.fuel_efficiency
    }

    /// CO₂ emitted driving from task `i` to task `j`, in kg.
    pub fn travel_co2(&self, i: usize, j: usize) -> f64 {
        let v = &self.vehicles[self.tasks[j].vehicle];
        self.travel_fuel(i, j) * v.emission_factor
    }

    /// [`travel_fuel`](Self::travel_fuel) addressed by task id.
    pub fn travel_fuel_between(&self, from: &str, to: &str) -> Result<f64, ScheduleError> {
        let (i, j) = self.pair(from, to)?;
        Ok(self.travel_fuel(i, j))
    }

    /// [`travel_co2`](Self::travel_co2) addressed by task id.
    pub fn travel_co2_between(&self, from: &str, to: &str) -> Result<f64, ScheduleError> {
        let (i, j) = self.pair(from, to)?;
        Ok(self.travel_co2(i, j))
    }

    fn pair(&self, from: &str, to: &str) -> Result<(usize, usize), ScheduleError> {
        let find = |id: &str| self.task_index(id).ok_or_else(|| ScheduleError::UnknownTask(id.to_string()));
        Ok((find(from)?, find(to)?))
    }
}

/// A dependency cycle as a closed walk (first node repeated at the end), or
/// `None` if the graph is acyclic.
fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut out = vec![Vec::new(); n];
    for &(a, b) in edges {
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(v) = queue.pop() {
        removed[v] = true;
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push(w);
            }
        }
    }
    // Every remaining node has a remaining predecessor, so walking
    // predecessors from any of them must revisit a node.
    let start = (0..n).find(|&i| !removed[i])?;
    let mut preds = vec![Vec::new(); n];
    for &(a, b) in edges {
        preds[b].push(a);
    }
    let mut seen = vec![usize::MAX; n];
    let mut walk = Vec::new();
    let mut v = start;
    while seen[v] == usize::MAX {
        seen[v] = walk.len();
        walk.push(v);
        v = *preds[v].iter().find(|&&p| !removed[p]).expect("remaining node has a remaining predecessor");
    }
    let mut cycle: Vec<usize> = walk[seen[v]..].to_vec();
    cycle.reverse();
    cycle.push(cycle[0]);
    Some(cycle)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
        [work_day]
        start = 8
        end = 12
        [[vehicles]]
        id = "Van"
        fuel_efficiency_km_per_l = 10
        emission_factor_kg_per_l = 2
        [[tasks]]
        id = 1
        processing_hours = 1
        fuel_l = 1
        co2_kg = 2
        vehicle = "Van"
        [[tasks]]
        id = 2
        processing_hours = 1.5
        fuel_l = 1
        co2_kg = 2
        vehicle = "Van"
        release_hours = 0.5
        [[travel]]
        from = 1
        to = 2
        hours = 0.25
        km = 5
    "#;

    #[test]
    fn loads_and_mirrors_travel() {
        let inst = Instance::from_toml_str(TWO).unwrap();
        assert_eq!(inst.n_tasks(), 2);
        assert_eq!(inst.travel_time[1][0], inst.travel_time[0][1]);
        assert_eq!(inst.travel_km[1][0], 5.0);
        assert!(inst.tasks[1].emergency && !inst.tasks[0].emergency);
        assert_eq!(inst.release_at(1), Ticks::from_hours(8.5));
        // (E - S) + max d + Σp = 4 + 0.25 + 2.5
        assert_eq!(inst.big_m, Ticks::from_hours(6.75));
        assert_eq!(inst.travel_fuel(0, 1), 0.5);
        assert_eq!(inst.travel_co2_between("2", "1").unwrap(), 1.0);
        assert!(inst.travel_fuel_between("1", "9").is_err());
    }

    #[test]
    fn self_dependency_is_a_cycle() {
        let text = format!("{TWO}\n[[dependencies]]\nbefore = 1\nafter = 1\n");
        assert_eq!(Instance::from_toml_str(&text).unwrap_err(), ScheduleError::Cycle(vec!["1".into(), "1".into()]));
    }

    #[test]
    fn longer_cycle_is_listed_in_order() {
        let edges = [(0, 1), (1, 2), (2, 0), (2, 3)];
        let c = find_cycle(4, &edges).unwrap();
        assert_eq!(c.first(), c.last());
        assert_eq!(c.len(), 4);
        for w in c.windows(2) {
            assert!(edges.contains(&(w[0], w[1])), "{c:?}");
        }
        assert_eq!(find_cycle(3, &[(0, 1), (1, 2)]), None);
    }

    #[test]
    fn reports_unknown_vehicle_and_missing_travel() {
        let bad_vehicle = TWO.replacen("vehicle = \"Van\"", "vehicle = \"Bus\"", 1);
        assert!(matches!(Instance::from_toml_str(&bad_vehicle), Err(ScheduleError::UnknownVehicle { .. })));
        let no_travel = TWO.split("[[travel]]").next().unwrap();
        assert!(matches!(Instance::from_toml_str(no_travel), Err(ScheduleError::MissingTravel(..))));
        assert!(matches!(Instance::from_toml_str("tasks = 3"), Err(ScheduleError::Parse(_))));
    }

    #[test]
    fn file_round_trip() {
        let inst = Instance::from_toml_str(TWO).unwrap();
        assert_eq!(Instance::from_toml_str(&inst.to_toml_string()).unwrap(), inst);
    }
}
