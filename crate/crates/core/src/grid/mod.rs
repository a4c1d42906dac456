//! Static network data: buses, branches and generators in per-unit.

mod matpower;
mod scaling;
pub(crate) mod unbounded;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matpower::{parse_case, parse_case_str};
pub use scaling::{scale_case, ScaledCase, ScalingTable, YearFactors};

/// Default system base; 1 pu·h corresponds to 100 MWh.
pub const DEFAULT_BASE_MVA: f64 = 100.0;

const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External bus number from the case file.
    pub id: i64,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub area: Option<String>,
    /// Base-case active load, per-unit.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// 1-based row of the branch in the case file.
    pub id: i64,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance, per-unit.
    pub reactance: f64,
    /// Thermal limit, per-unit. `f64::INFINITY` when the case leaves it unrated.
    #[serde(with = "unbounded::above")]
    pub thermal_limit: f64,
    pub length_km: f64,
    /// Angle-difference limits in radians; `±f64::INFINITY` when unconstrained.
    #[serde(with = "unbounded::below")]
    pub angle_min: f64,
    #[serde(with = "unbounded::above")]
    pub angle_max: f64,
}


impl Branch {
    pub fn is_rated(&self) -> bool {
        self.thermal_limit.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Coal,
    NaturalGas,
    Nuclear,
    Solar,
    Wind,
    Hydro,
    Other,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 7] = [
        GeneratorKind::Coal,
        GeneratorKind::NaturalGas,
        GeneratorKind::Nuclear,
        GeneratorKind::Solar,
        GeneratorKind::Wind,
        GeneratorKind::Hydro,
        GeneratorKind::Other,
    ];

    /// Kinds whose minimum output is zero.
    pub fn is_renewable(self) -> bool {
        matches!(
            self,
            GeneratorKind::Solar | GeneratorKind::Wind | GeneratorKind::Hydro
        )
    }

    /// Kinds driven by an hourly availability profile and subject to curtailment.
    pub fn is_variable(self) -> bool {
        matches!(self, GeneratorKind::Solar | GeneratorKind::Wind)
    }

    /// Maps a MATPOWER `genfuel` label onto a kind, falling back to `Other`.
    pub fn from_fuel(label: &str) -> Self {
        let l = label.trim().to_ascii_lowercase();
        match l.as_str() {
            "coal" | "lignite" => GeneratorKind::Coal,
            "ng" | "gas" | "natural_gas" | "natural gas" | "naturalgas" => {
                GeneratorKind::NaturalGas
            }
            "nuclear" | "nuc" => GeneratorKind::Nuclear,
            "solar" | "pv" | "solar_pv" => GeneratorKind::Solar,
            "wind" | "wind_onshore" | "wind_offshore" | "offshore wind" | "offshore_wind" => {
                GeneratorKind::Wind
            }
            "hydro" | "water" => GeneratorKind::Hydro,
            _ => GeneratorKind::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Coal => "coal",
            GeneratorKind::NaturalGas => "natural_gas",
            GeneratorKind::Nuclear => "nuclear",
            GeneratorKind::Solar => "solar",
            GeneratorKind::Wind => "wind",
            GeneratorKind::Hydro => "hydro",
            GeneratorKind::Other => "other",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown generator kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    /// 1-based row of the unit in the case file.
    pub id: i64,
    pub bus: usize,
    pub kind: GeneratorKind,
    /// Output limits, per-unit.
    pub p_min: f64,
    pub p_max: f64,
    /// $/MWh
    pub cost_linear: f64,
    /// $/h
    pub cost_fixed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

impl GridCase {
    pub fn per_unit(&self) -> PerUnit {
        PerUnit {
            base_mva: self.base_mva,
        }
    }

    pub fn bus_index(&self, id: i64) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn generator_index(&self, id: i64) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    /// Generators grouped by bus index.
    pub fn generators_by_bus(&self) -> Vec<Vec<usize>> {
        let mut by_bus = vec![Vec::new(); self.buses.len()];
        for (g, gen) in self.generators.iter().enumerate() {
            by_bus[gen.bus].push(g);
        }
        by_bus
    }

    /// Checks index references and branch/generator invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return Err(Error::Invalid(format!("base_mva must be positive, got {}", self.base_mva)));
        }
        let n = self.buses.len();
        let mut seen = BTreeMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if let Some(prev) = seen.insert(b.id, i) {
                return Err(Error::Invalid(format!(
                    "duplicate bus id {} (indices {prev} and {i})",
                    b.id
                )));
            }
            if !b.latitude.is_finite() || !b.longitude.is_finite() {
                return Err(Error::Invalid(format!("bus {} has non-finite coordinates", b.id)));
            }
        }
        for br in &self.branches {
            if br.from_bus >= n || br.to_bus >= n {
                return Err(Error::Invalid(format!("branch {} references a missing bus", br.id)));
            }
            if br.from_bus == br.to_bus {
                return Err(Error::Invalid(format!("branch {} is a self-loop", br.id)));
            }
            if !(br.reactance > 0.0) || !br.reactance.is_finite() {
                return Err(Error::Invalid(format!(
                    "branch {} has non-positive reactance {}",
                    br.id, br.reactance
                )));
            }
            if !(br.thermal_limit >= 0.0) {
                return Err(Error::Invalid(format!("branch {} has negative thermal limit", br.id)));
            }
            if !(br.angle_min <= 0.0 && br.angle_max >= 0.0) {
                return Err(Error::Invalid(format!(
                    "branch {} angle limits [{}, {}] do not contain zero",
                    br.id, br.angle_min, br.angle_max
                )));
            }
        }
        for g in &self.generators {
            if g.bus >= n {
                return Err(Error::Invalid(format!("generator {} references a missing bus", g.id)));
            }
            if !(0.0 <= g.p_min && g.p_min <= g.p_max) || !g.p_max.is_finite() {
                return Err(Error::Invalid(format!(
                    "generator {} limits [{}, {}] are not ordered and finite",
                    g.id, g.p_min, g.p_max
                )));
            }
            if g.kind.is_renewable() && g.p_min != 0.0 {
                return Err(Error::Invalid(format!(
                    "renewable generator {} has nonzero minimum output",
                    g.id
                )));
            }
        }
        Ok(())
    }

    /// Connected components as lists of bus indices, largest first.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            adj[br.from_bus].push(br.to_bus);
            adj[br.to_bus].push(br.from_bus);
        }
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &v in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = id;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    pub fn ensure_connected(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() > 1 {
            let components = comps
                .into_iter()
                .map(|c| c.into_iter().map(|i| self.buses[i].id as usize).collect())
                .collect();
            return Err(Error::Disconnected { components });
        }
        Ok(())
    }
}

/// MW ↔ per-unit conversion on a fixed MVA base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnit {
    pub base_mva: f64,
}

impl PerUnit {
    pub fn to_pu(self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    pub fn to_mw(self, pu: f64) -> f64 {
        pu * self.base_mva
    }
}

/// Great-circle distance in km.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn haversine_one_degree_of_latitude() {
        let d = haversine_km(30.0, -97.0, 31.0, -97.0);
        assert!((d - 111.19).abs() < 0.05, "{d}");
        assert_eq!(haversine_km(30.0, -97.0, 30.0, -97.0), 0.0);
    }

    #[test]
    fn fuel_labels() {
        assert_eq!(GeneratorKind::from_fuel("ng"), GeneratorKind::NaturalGas);
        assert_eq!(GeneratorKind::from_fuel(" Wind "), GeneratorKind::Wind);
        assert_eq!(GeneratorKind::from_fuel("biomass"), GeneratorKind::Other);
        for k in GeneratorKind::ALL {
            assert_eq!(k.as_str().parse::<GeneratorKind>().unwrap(), k);
        }
    }

    proptest! {
        #[test]
        fn per_unit_round_trip(mw in -1.0e5f64..1.0e5, base in 1.0f64..1000.0) {
            let pu = PerUnit { base_mva: base };
            let back = pu.to_mw(pu.to_pu(mw));
            prop_assert!((back - mw).abs() <= 1e-9 * mw.abs().max(1e-300));
        }
    }
}
