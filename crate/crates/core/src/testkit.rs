//! Small hand-built cases for unit tests.

use crate::grid::{Branch, Bus, Generator, GeneratorKind, GridCase};
use crate::scenario::{Scenario, ScenarioSet};

pub fn bus(id: i64, load: f64) -> Bus {
    Bus {
        id,
        name: format!("bus{id}"),
        latitude: 30.0 + id as f64 * 0.1,
        longitude: -97.0,
        area: None,
        load,
    }
}

pub fn gen(id: i64, bus: usize, kind: GeneratorKind, p_max: f64, cost: f64) -> Generator {
    Generator {
        id,
        bus,
        kind,
        p_min: 0.0,
        p_max,
        cost_linear: cost,
        cost_fixed: 0.0,
    }
}

pub fn line(id: i64, from: usize, to: usize, x: f64, limit: f64, km: f64) -> Branch {
    Branch {
        id,
        from_bus: from,
        to_bus: to,
        reactance: x,
        thermal_limit: limit,
        length_km: km,
        angle_min: f64::NEG_INFINITY,
        angle_max: f64::INFINITY,
    }
}

/// Scenarios from `(weight, load[bus][t], gen_max[gen][t])` triples.
pub fn scenarios_from(_case: &GridCase, days: &[(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)]) -> ScenarioSet {
    let hours = days[0].1[0].len();
    ScenarioSet {
        hours,
        scenarios: days
            .iter()
            .enumerate()
            .map(|(d, (w, load, gen_max))| Scenario {
                day: Some(d),
                label: format!("d{d}"),
                weight: *w,
                load: load.clone(),
                gen_max: gen_max.clone(),
            })
            .collect(),
    }
}
