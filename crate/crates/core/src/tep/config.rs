use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::SolveOptions;

/// Which investment technologies a plan may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    TepStorage,
    TepOnly,
    StorageOnly,
}

impl Configuration {
    pub const ALL: [Configuration; 3] = [
        Configuration::TepStorage,
        Configuration::TepOnly,
        Configuration::StorageOnly,
    ];

    pub fn allows_lines(self) -> bool {
        self != Configuration::StorageOnly
    }

    pub fn allows_storage(self) -> bool {
        self != Configuration::TepOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Configuration::TepStorage => "tep_storage",
            Configuration::TepOnly => "tep_only",
            Configuration::StorageOnly => "storage_only",
        }
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Configuration::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown configuration `{s}`")))
    }
}

/// Solver selection for plan models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    #[serde(flatten)]
    pub options: SolveOptions,
    /// Command for an external MPS solver.
    pub external: Option<String>,
    /// Use the external solver once a model has at least this many variables.
    pub external_min_vars: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            options: SolveOptions::default(),
            external: None,
            external_min_vars: 0,
        }
    }
}

/// Cost and technology parameters. Money in $, power in MW, energy in MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub configuration: Configuration,
    /// Penalty on unserved and over-served energy, $/MWh.
    pub penalty_per_mwh: f64,
    pub upgrade_levels: u32,
    /// Capacity added per upgrade level as a fraction of the line rating.
    pub upgrade_fraction: f64,
    pub line_cost_per_mw_km: f64,
    pub storage_fixed_cost: f64,
    pub storage_power_cost_per_mw: f64,
    pub storage_energy_cost_per_mwh: f64,
    pub storage_max_power_mw: f64,
    pub storage_max_energy_mwh: f64,
    pub storage_max_duration_h: f64,
    /// One-way charge and discharge efficiency.
    pub efficiency: f64,
    /// Multiplies all three storage cost terms.
    pub storage_cost_multiplier: f64,
    pub days_per_year: f64,
    pub solver: SolverConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            configuration: Configuration::TepStorage,
            penalty_per_mwh: 2.5e6,
            upgrade_levels: 3,
            upgrade_fraction: 0.30,
            line_cost_per_mw_km: 1243.0,
            storage_fixed_cost: 500_000.0,
            storage_power_cost_per_mw: 160_000.0,
            storage_energy_cost_per_mwh: 120_000.0,
            storage_max_power_mw: 3000.0,
            storage_max_energy_mwh: 3000.0,
            storage_max_duration_h: 4.0,
            efficiency: 0.95,
            storage_cost_multiplier: 1.0,
            days_per_year: 365.0,
            solver: SolverConfig::default(),
        }
    }
}

impl PlanConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PlanConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PlanConfig::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("penalty_per_mwh", self.penalty_per_mwh),
            ("upgrade_fraction", self.upgrade_fraction),
            ("line_cost_per_mw_km", self.line_cost_per_mw_km),
            ("storage_fixed_cost", self.storage_fixed_cost),
            ("storage_power_cost_per_mw", self.storage_power_cost_per_mw),
            ("storage_energy_cost_per_mwh", self.storage_energy_cost_per_mwh),
            ("storage_max_power_mw", self.storage_max_power_mw),
            ("storage_max_energy_mwh", self.storage_max_energy_mwh),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Config(format!("efficiency must be in (0, 1], got {}", self.efficiency)));
        }
        for (name, v) in [
            ("storage_max_duration_h", self.storage_max_duration_h),
            ("storage_cost_multiplier", self.storage_cost_multiplier),
            ("days_per_year", self.days_per_year),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        self.solver.options.validate()
    }

    pub fn with_storage_multiplier(&self, mult: f64) -> Self {
        PlanConfig {
            storage_cost_multiplier: mult,
            ..self.clone()
        }
    }

    pub fn with_configuration(&self, configuration: Configuration) -> Self {
        PlanConfig {
            configuration,
            ..self.clone()
        }
    }

    /// Effective storage costs after the multiplier: (fixed $, $/MW, $/MWh).
    pub fn storage_costs(&self) -> (f64, f64, f64) {
        let m = self.storage_cost_multiplier;
        (
            self.storage_fixed_cost * m,
            self.storage_power_cost_per_mw * m,
            self.storage_energy_cost_per_mwh * m,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_cost_table() {
        let c = PlanConfig::default();
        assert_eq!(c.penalty_per_mwh, 2.5e6);
        assert_eq!(c.line_cost_per_mw_km, 1243.0);
        assert_eq!(c.storage_costs(), (500_000.0, 160_000.0, 120_000.0));
        assert_eq!(c.storage_max_power_mw, 3000.0);
        assert_eq!(c.storage_max_energy_mwh, 3000.0);
        assert_eq!(c.efficiency, 0.95);
        assert_eq!(c.upgrade_levels, 3);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = PlanConfig::default().with_storage_multiplier(1.25);
        assert_eq!(PlanConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);

        let c = PlanConfig::from_toml_str("configuration = \"tep_only\"\n[solver]\nmip_gap = 0.0\n").unwrap();
        assert_eq!(c.configuration, Configuration::TepOnly);
        assert_eq!(c.solver.options.mip_gap, 0.0);
        assert_eq!(c.penalty_per_mwh, 2.5e6);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PlanConfig::from_toml_str("efficiency = 1.5").is_err());
        assert!(PlanConfig::from_toml_str("storage_max_duration_h = 0").is_err());
        assert!(PlanConfig::from_toml_str("line_cost_per_mw_km = -1").is_err());
        assert!(PlanConfig::from_toml_str("no_such_key = 1").is_err());
        assert!("tep_maybe".parse::<Configuration>().is_err());
    }
}
