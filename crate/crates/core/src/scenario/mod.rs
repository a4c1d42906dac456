//! Representative days from a year of hourly load, wind and solar data.

pub mod kmedoids;
mod series;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GeneratorKind, GridCase};
pub use kmedoids::{is_swap_optimal, pam, Distances};
pub use series::{Stream, YearSeries, HOURS_PER_DAY};

/// Result of clustering the days of a [`YearSeries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Day indices of the medoids, ascending.
    pub medoids: Vec<usize>,
    /// Cluster (index into `medoids`) of every day.
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Cluster size over number of days.
    pub weights: Vec<f64>,
    /// Total distance of days to their medoid in feature space.
    pub cost: f64,
}

fn zscore(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    for x in v.iter_mut() {
        *x = if sd > 0.0 { (*x - mean) / sd } else { 0.0 };
    }
}

/// One 72-long vector per day: system load, mean wind and mean solar
/// availability, each stream z-scored over the whole year.
pub fn day_features(series: &YearSeries) -> Vec<Vec<f64>> {
    let mut streams = series.aggregate_streams();
    for s in streams.iter_mut() {
        zscore(s);
    }
    (0..series.days())
        .map(|d| {
            let span = d * HOURS_PER_DAY..(d + 1) * HOURS_PER_DAY;
            streams.iter().flat_map(|s| s[span.clone()].iter().copied()).collect()
        })
        .collect()
}

pub fn cluster_days(series: &YearSeries, k: usize, seed: u64) -> Result<Clustering> {
    let days = series.days();
    if k == 0 || k > days {
        return Err(Error::Parameter(format!(
            "k = {k} must be between 1 and the number of days ({days})"
        )));
    }
    let dist = Distances::euclidean(&day_features(series));
    let medoids = pam(&dist, k, seed)?;
    let assignment: Vec<usize> = (0..days).map(|j| dist.nearest(j, &medoids)).collect();
    let mut sizes = vec![0usize; k];
    for &c in &assignment {
        sizes[c] += 1;
    }
    let weights = sizes.iter().map(|&s| s as f64 / days as f64).collect();
    Ok(Clustering {
        cost: dist.cost(&medoids),
        medoids,
        assignment,
        sizes,
        weights,
    })
}

/// One representative day in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Day index in the source series, when there is one.
    pub day: Option<usize>,
    pub label: String,
    pub weight: f64,
    /// `load[bus][t]`.
    pub load: Vec<Vec<f64>>,
    /// `gen_max[generator][t]`.
    pub gen_max: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub hours: usize,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    /// One weight-1 scenario repeating the case's static load and capacity.
    pub fn constant(case: &GridCase, hours: usize) -> Self {
        ScenarioSet {
            hours,
            scenarios: vec![Scenario {
                day: None,
                label: "static".into(),
                weight: 1.0,
                load: case.buses.iter().map(|b| vec![b.load; hours]).collect(),
                gen_max: case.generators.iter().map(|g| vec![g.p_max; hours]).collect(),
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.scenarios.iter().map(|s| s.weight).sum()
    }

    /// Checks shapes against `case` and that weights are positive and sum to 1.
    pub fn validate(&self, case: &GridCase) -> Result<()> {
        if self.scenarios.is_empty() || self.hours == 0 {
            return Err(Error::Invalid("scenario set is empty".into()));
        }
        for s in &self.scenarios {
            if !(s.weight > 0.0) {
                return Err(Error::Invalid(format!("scenario `{}` has weight {}", s.label, s.weight)));
            }
            let shape_ok = s.load.len() == case.buses.len()
                && s.gen_max.len() == case.generators.len()
                && s.load.iter().chain(&s.gen_max).all(|r| r.len() == self.hours);
            if !shape_ok {
                return Err(Error::Invalid(format!(
                    "scenario `{}` does not match the case dimensions",
                    s.label
                )));
            }
            if s.load.iter().chain(&s.gen_max).flatten().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("scenario `{}` has non-finite data", s.label)));
            }
            if s.gen_max.iter().flatten().any(|&v| v < 0.0) {
                return Err(Error::Invalid(format!("scenario `{}` has negative capacity", s.label)));
            }
        }
        let total = self.total_weight();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("scenario weights sum to {total}")));
        }
        Ok(())
    }
}

/// Builds per-unit scenarios for the medoid days of `clustering`.
///
/// Bus loads come from the series (MW) when the bus has a column and from the
/// case otherwise, scaled by `load_factor` either way. Wind and solar
/// capacities follow their availability column; other kinds stay at `p_max`.
pub fn build_scenarios(
    case: &GridCase,
    series: &YearSeries,
    clustering: &Clustering,
    load_factor: f64,
) -> Result<ScenarioSet> {
    if !(load_factor > 0.0 && load_factor.is_finite()) {
        return Err(Error::Parameter(format!("load factor must be positive, got {load_factor}")));
    }
    let pu = case.per_unit();
    for &id in &series.load.ids {
        if case.bus_index(id).is_none() {
            warn!("load column {id} does not match any bus; ignored");
        }
    }
    let mut scenarios = Vec::with_capacity(clustering.medoids.len());
    for (c, &day) in clustering.medoids.iter().enumerate() {
        if day >= series.days() {
            return Err(Error::Invalid(format!("medoid day {day} is outside the series")));
        }
        let span = day * HOURS_PER_DAY..(day + 1) * HOURS_PER_DAY;
        let load = case
            .buses
            .iter()
            .map(|b| match series.load.column(b.id) {
                Some(col) => col[span.clone()]
                    .iter()
                    .map(|&mw| pu.to_pu(mw) * load_factor)
                    .collect(),
                None => vec![b.load * load_factor; HOURS_PER_DAY],
            })
            .collect();
        let mut gen_max = Vec::with_capacity(case.generators.len());
        for g in &case.generators {
            let stream = match g.kind {
                GeneratorKind::Wind => Some(&series.wind),
                GeneratorKind::Solar => Some(&series.solar),
                _ => None,
            };
            let row = match stream {
                Some(s) => {
                    let col = s.column(g.id).ok_or_else(|| {
                        Error::Invalid(format!("{} generator {} has no availability column", g.kind, g.id))
                    })?;
                    col[span.clone()].iter().map(|a| a * g.p_max).collect()
                }
                None => vec![g.p_max; HOURS_PER_DAY],
            };
            gen_max.push(row);
        }
        scenarios.push(Scenario {
            day: Some(day),
            label: series.dates[day].format("%m-%d").to_string(),
            weight: clustering.weights[c],
            load,
            gen_max,
        });
    }
    let set = ScenarioSet {
        hours: HOURS_PER_DAY,
        scenarios,
    };
    set.validate(case)?;
    Ok(set)
}

/// Average load, wind and solar output (GW) of each representative day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayAverage {
    pub label: String,
    pub weight: f64,
    pub load_gw: f64,
    pub wind_gw: f64,
    pub solar_gw: f64,
}

pub fn day_averages(case: &GridCase, scenarios: &ScenarioSet) -> Vec<DayAverage> {
    let pu = case.per_unit();
    let hours = scenarios.hours as f64;
    let gw = |sum_pu: f64| pu.to_mw(sum_pu) / hours / 1000.0;
    scenarios
        .scenarios
        .iter()
        .map(|s| {
            let by_kind = |kind: GeneratorKind| -> f64 {
                case.generators
                    .iter()
                    .zip(&s.gen_max)
                    .filter(|(g, _)| g.kind == kind)
                    .map(|(_, row)| row.iter().sum::<f64>())
                    .sum()
            };
            DayAverage {
                label: s.label.clone(),
                weight: s.weight,
                load_gw: gw(s.load.iter().flatten().sum()),
                wind_gw: gw(by_kind(GeneratorKind::Wind)),
                solar_gw: gw(by_kind(GeneratorKind::Solar)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, Generator};
    use chrono::NaiveDate;

    fn two_shape_year(days: usize) -> YearSeries {
        let start = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..days)
            .map(|d| start + chrono::Duration::days(d as i64))
            .collect();
        let mut load = Vec::new();
        let mut wind = Vec::new();
        let mut solar = Vec::new();
        for d in 0..days {
            for h in 0..24 {
                let peaky = d % 2 == 0;
                load.push(if peaky { 100.0 + 50.0 * ((h as f64) / 4.0).sin() } else { 80.0 });
                wind.push(if peaky { 0.2 } else { 0.8 });
                solar.push(if (8..18).contains(&h) && peaky { 0.6 } else { 0.0 });
            }
        }
        YearSeries {
            dates,
            load: Stream { ids: vec![1], values: vec![load] },
            wind: Stream { ids: vec![2], values: vec![wind] },
            solar: Stream { ids: vec![3], values: vec![solar] },
        }
    }

    fn tiny_case() -> GridCase {
        let bus = Bus {
            id: 1,
            name: "b".into(),
            latitude: 30.0,
            longitude: -97.0,
            area: None,
            load: 0.5,
        };
        let gen = |id, kind, p_max| Generator {
            id,
            bus: 0,
            kind,
            p_min: 0.0,
            p_max,
            cost_linear: 10.0,
            cost_fixed: 0.0,
        };
        GridCase {
            base_mva: 100.0,
            buses: vec![bus],
            branches: vec![],
            generators: vec![
                gen(2, GeneratorKind::Wind, 2.0),
                gen(3, GeneratorKind::Solar, 4.51),
                gen(4, GeneratorKind::Nuclear, 1.0),
            ],
        }
    }

    #[test]
    fn two_shapes_split_evenly() {
        let ys = two_shape_year(10);
        let c = cluster_days(&ys, 2, 42).unwrap();
        assert_eq!(c.weights, vec![0.5, 0.5]);
        assert_ne!(c.medoids[0] % 2, c.medoids[1] % 2);
        for (d, &a) in c.assignment.iter().enumerate() {
            assert_eq!(c.medoids[a] % 2, d % 2);
        }
    }

    #[test]
    fn every_day_its_own_cluster() {
        let mut ys = two_shape_year(6);
        // Make days distinct.
        for (h, v) in ys.load.values[0].iter_mut().enumerate() {
            *v += (h / 24) as f64;
        }
        let c = cluster_days(&ys, 6, 3).unwrap();
        assert_eq!(c.medoids, (0..6).collect::<Vec<_>>());
        assert!(c.weights.iter().all(|&w| w == 1.0 / 6.0));
        assert!(cluster_days(&ys, 7, 3).is_err());
    }

    #[test]
    fn weights_sum_to_one_and_runs_repeat() {
        let mut ys = two_shape_year(365);
        for (h, v) in ys.load.values[0].iter_mut().enumerate() {
            *v += ((h * 7919) % 13) as f64;
        }
        let a = cluster_days(&ys, 5, 9).unwrap();
        let b = cluster_days(&ys, 5, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(a.sizes.iter().sum::<usize>(), 365);
    }

    #[test]
    fn scenarios_scale_load_and_availability() {
        let mut ys = two_shape_year(2);
        ys.load.values[0] = vec![100.0; 48];
        ys.wind.values[0] = vec![0.5; 48];
        ys.solar.values[0] = vec![0.0; 48];
        let case = tiny_case();
        let c = Clustering {
            medoids: vec![1],
            assignment: vec![0, 0],
            sizes: vec![2],
            weights: vec![1.0],
            cost: 0.0,
        };
        let set = build_scenarios(&case, &ys, &c, 1.13).unwrap();
        let s = &set.scenarios[0];
        // 100 MW -> 1 pu -> 1.13 pu.
        assert!(s.load[0].iter().all(|&v| (v - 1.13).abs() < 1e-12));
        assert!(s.gen_max[0].iter().all(|&v| v == 1.0));
        assert!(s.gen_max[1].iter().all(|&v| v == 0.0));
        assert!(s.gen_max[2].iter().all(|&v| v == 1.0));
        assert_eq!(s.label, "01-02");

        ys.solar.values[0] = vec![0.5; 48];
        let set = build_scenarios(&case, &ys, &c, 1.0).unwrap();
        assert!(set.scenarios[0].gen_max[1].iter().all(|&v| (v - 2.255).abs() < 1e-12));
    }

    #[test]
    fn missing_availability_column_is_an_error() {
        let mut ys = two_shape_year(2);
        ys.wind.ids = vec![99];
        let c = cluster_days(&ys, 1, 0).unwrap();
        assert!(build_scenarios(&tiny_case(), &ys, &c, 1.0).is_err());
    }
}
