//! Year-projection scaling of generation capacity and load.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{GeneratorKind, GridCase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearFactors {
    pub load: f64,
    pub generation: BTreeMap<GeneratorKind, f64>,
}

/// Multiplicative capacity and load factors keyed by year.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub base_year: i32,
    pub years: BTreeMap<i32, YearFactors>,
}

#[derive(Deserialize)]
struct RawTable {
    base_year: i32,
    years: BTreeMap<String, RawYear>,
}

#[derive(Deserialize)]
struct RawYear {
    load: f64,
    #[serde(flatten)]
    generation: BTreeMap<String, f64>,
}

impl ScalingTable {
    /// EIA AEO2023-based projections relative to 2022.
    pub fn eia_2023() -> Self {
        use GeneratorKind::*;
        let cols: [(i32, [f64; 6]); 6] = [
            // coal, gas, nuclear, solar, wind, load
            (2022, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
            (2030, [0.82, 0.79, 0.98, 4.51, 2.02, 1.13]),
            (2035, [0.82, 0.73, 0.90, 6.00, 2.23, 1.21]),
            (2040, [0.82, 0.71, 0.80, 6.87, 2.26, 1.31]),
            (2045, [0.82, 0.72, 0.80, 8.04, 2.32, 1.41]),
            (2050, [0.82, 0.72, 0.80, 9.26, 2.43, 1.52]),
        ];
        let years = cols
            .into_iter()
            .map(|(y, f)| {
                let generation = [Coal, NaturalGas, Nuclear, Solar, Wind]
                    .into_iter()
                    .zip(f)
                    .collect();
                (
                    y,
                    YearFactors {
                        load: f[5],
                        generation,
                    },
                )
            })
            .collect();
        ScalingTable {
            base_year: 2022,
            years,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawTable =
            toml::from_str(text).map_err(|e| Error::Config(format!("scaling table: {e}")))?;
        let mut years = BTreeMap::new();
        for (key, ry) in raw.years {
            let year: i32 = key
                .parse()
                .map_err(|_| Error::Config(format!("scaling table: `{key}` is not a year")))?;
            let mut generation = BTreeMap::new();
            for (k, v) in ry.generation {
                let kind: GeneratorKind = k
                    .parse()
                    .map_err(|_| Error::Config(format!("scaling table {year}: unknown kind `{k}`")))?;
                generation.insert(kind, v);
            }
            years.insert(
                year,
                YearFactors {
                    load: ry.load,
                    generation,
                },
            );
        }
        let table = ScalingTable {
            base_year: raw.base_year,
            years,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = format!("base_year = {}\n", self.base_year);
        for (year, f) in &self.years {
            out.push_str(&format!("\n[years.{year}]\nload = {:?}\n", f.load));
            for (k, v) in &f.generation {
                out.push_str(&format!("{} = {:?}\n", k.as_str(), v));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (year, f) in &self.years {
            let bad = !(f.load > 0.0 && f.load.is_finite())
                || f.generation.values().any(|v| !(*v > 0.0 && v.is_finite()));
            if bad {
                return Err(Error::Config(format!(
                    "scaling factors for {year} must be positive and finite"
                )));
            }
        }
        if let Some(base) = self.years.get(&self.base_year) {
            if base.load != 1.0 || base.generation.values().any(|v| *v != 1.0) {
                return Err(Error::Config(format!(
                    "base year {} factors must all equal 1.0",
                    self.base_year
                )));
            }
        }
        Ok(())
    }

    pub fn factors(&self, year: i32) -> Result<&YearFactors> {
        self.years
            .get(&year)
            .ok_or_else(|| Error::Parameter(format!("year {year} not in scaling table")))
    }
}

#[derive(Debug, Clone)]
pub struct ScaledCase {
    pub case: GridCase,
    pub load_factor: f64,
    /// Kinds present in the case that the table does not cover (scaled by 1.0).
    pub unscaled_kinds: Vec<GeneratorKind>,
}

/// Scales generator limits by their kind's factor for `year`.
///
/// `p_max` is always scaled; `p_min` only for non-renewables. The input case is
/// left untouched and the year's load factor is returned alongside.
pub fn scale_case(case: &GridCase, table: &ScalingTable, year: i32) -> Result<ScaledCase> {
    let factors = table.factors(year)?;
    let mut scaled = case.clone();
    let mut unscaled_kinds = Vec::new();
    for g in &mut scaled.generators {
        let f = match factors.generation.get(&g.kind) {
            Some(&f) => f,
            None => {
                if !unscaled_kinds.contains(&g.kind) {
                    warn!("no {year} scaling factor for {} generators; using 1.0", g.kind);
                    unscaled_kinds.push(g.kind);
                }
                1.0
            }
        };
        g.p_max *= f;
        if !g.kind.is_renewable() {
            g.p_min *= f;
        }
    }
    unscaled_kinds.sort();
    Ok(ScaledCase {
        case: scaled,
        load_factor: factors.load,
        unscaled_kinds,
    })
}
