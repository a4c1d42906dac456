//! Storage candidate selection from recourse diagnostics.
//!
//! A bus is flagged on a day when it sheds load or curtails wind and solar in
//! any hour of that day. The intersection rule keeps buses flagged on every
//! day; the union rule keeps buses flagged on at least one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::recourse::RecourseReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Shed,
    Curtailed,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[default]
    Intersection,
    Union,
}

impl std::str::FromStr for Rule {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "intersection" => Ok(Rule::Intersection),
            "union" => Ok(Rule::Union),
            _ => Err(crate::Error::Parameter(format!("unknown candidate rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Bus index to the reasons it was selected.
    pub buses: BTreeMap<usize, BTreeSet<Provenance>>,
    pub rule: Rule,
    /// Free-form note on the report(s) the set came from.
    pub source: String,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn contains(&self, bus: usize) -> bool {
        self.buses.contains_key(&bus)
    }

    pub fn bus_set(&self) -> BTreeSet<usize> {
        self.buses.keys().copied().collect()
    }

    pub fn add(&mut self, bus: usize, why: Provenance) {
        self.buses.entry(bus).or_default().insert(why);
    }
}

/// Buses flagged on day `s`, with the reasons.
pub fn day_set(report: &RecourseReport, s: usize) -> BTreeMap<usize, BTreeSet<Provenance>> {
    let mut out: BTreeMap<usize, BTreeSet<Provenance>> = BTreeMap::new();
    for i in 0..report.bus_ids.len() {
        if report.sheds_on(s, i) {
            out.entry(i).or_default().insert(Provenance::Shed);
        }
        if report.curtails_on(s, i) {
            out.entry(i).or_default().insert(Provenance::Curtailed);
        }
    }
    out
}

pub fn select_candidates(report: &RecourseReport, rule: Rule) -> CandidateSet {
    let days: Vec<_> = (0..report.scenarios()).map(|s| day_set(report, s)).collect();
    let mut buses: BTreeMap<usize, BTreeSet<Provenance>> = BTreeMap::new();
    for d in &days {
        for (&i, why) in d {
            buses.entry(i).or_default().extend(why.iter().copied());
        }
    }
    if rule == Rule::Intersection {
        buses.retain(|i, _| days.iter().all(|d| d.contains_key(i)));
    }
    CandidateSet {
        buses,
        rule,
        source: format!("recourse over {} representative day(s)", days.len()),
    }
}

/// Adds every bus that still sheds on any day after investing.
pub fn augment_candidates(base: &CandidateSet, post_report: &RecourseReport) -> CandidateSet {
    let mut out = base.clone();
    for s in 0..post_report.scenarios() {
        for i in 0..post_report.bus_ids.len() {
            if post_report.sheds_on(s, i) {
                out.add(i, Provenance::Shed);
            }
        }
    }
    out.source = format!("{}; augmented with post-investment shed", base.source);
    out
}
