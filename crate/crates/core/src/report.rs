//! Deterministic JSON, CSV and GeoJSON artifacts.
//!
//! Every GeoJSON feature carries `stage` and `kind`, plus `level` for line
//! upgrades and congested branches or `mwh` for nodes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::recourse::RecourseReport;
use crate::tep::{InvestmentState, PlanSolution, UpgradeData, PlanConfig};

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

fn point(case: &GridCase, bus: usize, props: Value) -> Value {
    let b = &case.buses[bus];
    json!({
        "type": "Feature",
        "geometry": { "type": "Point", "coordinates": [b.longitude, b.latitude] },
        "properties": props,
    })
}

fn segment(case: &GridCase, branch: usize, props: Value) -> Value {
    let br = &case.branches[branch];
    let (a, b) = (&case.buses[br.from_bus], &case.buses[br.to_bus]);
    json!({
        "type": "Feature",
        "geometry": {
            "type": "LineString",
            "coordinates": [[a.longitude, a.latitude], [b.longitude, b.latitude]],
        },
        "properties": props,
    })
}

pub fn feature_collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

/// Upgraded lines and storage sites of an investment state.
pub fn investment_features(
    case: &GridCase,
    config: &PlanConfig,
    inv: &InvestmentState,
    stage: &str,
) -> Vec<Value> {
    let pu = case.per_unit();
    let up = UpgradeData::new(case, config);
    let mut out = Vec::new();
    for (l, &level) in inv.upgrades.iter().enumerate() {
        if level > 0 {
            out.push(segment(
                case,
                l,
                json!({
                    "stage": stage,
                    "kind": "line_upgrade",
                    "level": level,
                    "branch_id": case.branches[l].id,
                    "added_mw": pu.to_mw(level as f64 * up.delta[l]),
                }),
            ));
        }
    }
    for i in inv.storage_sites() {
        out.push(point(
            case,
            i,
            json!({
                "stage": stage,
                "kind": "storage",
                "mwh": inv.energy_mwh[i],
                "mw": inv.power_mw[i],
                "bus_id": case.buses[i].id,
            }),
        ));
    }
    out
}

pub fn solution_geojson(case: &GridCase, config: &PlanConfig, sol: &PlanSolution, stage: &str) -> Value {
    feature_collection(investment_features(case, config, &sol.investments, stage))
}

/// Shed nodes, curtailed nodes and congested branches.
pub fn recourse_features(case: &GridCase, report: &RecourseReport, upgrades: &[u32], stage: &str) -> Vec<Value> {
    let mut out = Vec::new();
    for (i, mwh) in report.node_shed().into_iter().enumerate() {
        if (0..report.scenarios()).any(|s| report.sheds_on(s, i)) {
            out.push(point(
                case,
                i,
                json!({ "stage": stage, "kind": "shed", "mwh": mwh, "bus_id": case.buses[i].id }),
            ));
        }
    }
    for (i, mwh) in report.node_curtailed().into_iter().enumerate() {
        if (0..report.scenarios()).any(|s| report.curtails_on(s, i)) {
            out.push(point(
                case,
                i,
                json!({ "stage": stage, "kind": "curtailed", "mwh": mwh, "bus_id": case.buses[i].id }),
            ));
        }
    }
    for (l, hours) in report.congested_hours().into_iter().enumerate() {
        if hours > 0 {
            out.push(segment(
                case,
                l,
                json!({
                    "stage": stage,
                    "kind": "congested",
                    "level": upgrades.get(l).copied().unwrap_or(0),
                    "hours": hours,
                    "branch_id": case.branches[l].id,
                }),
            ));
        }
    }
    out
}

/// Candidate buses; `mwh` is the annual shed plus curtailment behind the pick.
pub fn candidate_features(
    case: &GridCase,
    set: &CandidateSet,
    report: Option<&RecourseReport>,
    stage: &str,
) -> Vec<Value> {
    let energy: Vec<f64> = match report {
        Some(r) => r
            .node_shed()
            .iter()
            .zip(r.node_curtailed())
            .map(|(a, b)| a + b)
            .collect(),
        None => vec![0.0; case.buses.len()],
    };
    set.buses
        .iter()
        .map(|(&i, why)| {
            point(
                case,
                i,
                json!({
                    "stage": stage,
                    "kind": "candidate",
                    "mwh": energy[i],
                    "provenance": why,
                    "bus_id": case.buses[i].id,
                }),
            )
        })
        .collect()
}

/// Investment table: one row per upgraded branch or storage site.
pub fn write_investments_csv(case: &GridCase, config: &PlanConfig, inv: &InvestmentState, w: impl Write) -> Result<()> {
    let pu = case.per_unit();
    let up = UpgradeData::new(case, config);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "id", "level", "added_mw", "power_mw", "energy_mwh"])?;
    for (l, &level) in inv.upgrades.iter().enumerate() {
        if level > 0 {
            out.write_record([
                "line".to_string(),
                case.branches[l].id.to_string(),
                level.to_string(),
                pu.to_mw(level as f64 * up.delta[l]).to_string(),
                String::new(),
                String::new(),
            ])?;
        }
    }
    for i in inv.storage_sites() {
        out.write_record([
            "storage".to_string(),
            case.buses[i].id.to_string(),
            String::new(),
            String::new(),
            inv.power_mw[i].to_string(),
            inv.energy_mwh[i].to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Hourly schedule in MW: one row per (scenario, hour, entity, quantity).
pub fn write_schedule_csv(case: &GridCase, sol: &PlanSolution, w: impl Write) -> Result<()> {
    let pu = case.per_unit();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scenario", "hour", "entity", "id", "quantity", "value"])?;
    let sched = &sol.schedule;
    for (s, sc) in sched.scenarios.iter().enumerate() {
        for t in 0..sched.hours {
            let mut row = |entity: &str, id: i64, q: &str, v: f64| {
                out.write_record([
                    s.to_string(),
                    t.to_string(),
                    entity.to_string(),
                    id.to_string(),
                    q.to_string(),
                    v.to_string(),
                ])
            };
            for (g, gen) in case.generators.iter().enumerate() {
                row("generator", gen.id, "pg_mw", pu.to_mw(sc.pg[g][t]))?;
            }
            for (l, br) in case.branches.iter().enumerate() {
                row("branch", br.id, "flow_mw", pu.to_mw(sc.pf[l][t]))?;
            }
            for (i, b) in case.buses.iter().enumerate() {
                row("bus", b.id, "theta_rad", sc.theta[i][t])?;
                row("bus", b.id, "shed_mw", pu.to_mw(sc.shed[i][t]))?;
                row("bus", b.id, "over_mw", pu.to_mw(sc.over[i][t]))?;
            }
            for (k, &i) in sched.storage_buses.iter().enumerate() {
                let st = &sc.storage[k];
                let id = case.buses[i].id;
                row("storage", id, "charge_mw", pu.to_mw(st.ch[t]))?;
                row("storage", id, "discharge_mw", pu.to_mw(st.dis[t]))?;
                row("storage", id, "soc_mwh", pu.to_mw(st.soc[t]))?;
            }
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{bus, line};

    #[test]
    fn features_carry_stage_kind_and_size() {
        let case = GridCase {
            base_mva: 100.0,
            buses: vec![bus(1, 0.0), bus(2, 0.0)],
            branches: vec![line(7, 0, 1, 0.1, 1.0, 10.0)],
            generators: vec![],
        };
        let inv = InvestmentState {
            upgrades: vec![2],
            storage: vec![false, true],
            power_mw: vec![0.0, 50.0],
            energy_mwh: vec![0.0, 200.0],
        };
        let feats = investment_features(&case, &PlanConfig::default(), &inv, "2030");
        assert_eq!(feats.len(), 2);
        assert_eq!(feats[0]["properties"]["level"], 2);
        assert_eq!(feats[0]["properties"]["added_mw"], 60.0);
        assert_eq!(feats[1]["properties"]["mwh"], 200.0);
        for f in &feats {
            assert_eq!(f["properties"]["stage"], "2030");
            assert!(f["properties"]["kind"].is_string());
        }
        let a = to_json_string(&feature_collection(feats.clone())).unwrap();
        let b = to_json_string(&feature_collection(feats)).unwrap();
        assert_eq!(a, b);
    }
}
