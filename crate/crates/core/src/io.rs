//! Reading potential files and writing result tables.
//!
//! Every number in a CSV table is written with 17 significant digits, which
//! round-trips an `f64`. JSON output uses serde's shortest round-trip form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fredholm::DetEvaluation;
use crate::plane::Rect;
use crate::potential::{make_potential, Potential, PotentialSpec};
use crate::scattering::PhaseTrace;
use crate::states::{CountingReport, StateRecord};

/// `x` with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn potential_from_json(text: &str) -> Result<Potential> {
    let spec: PotentialSpec = serde_json::from_str(text)?;
    make_potential(&spec)
}

pub fn load_potential(path: &Path) -> Result<Potential> {
    potential_from_json(&fs::read_to_string(path)?)
}

/// Provenance written next to every JSON result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub potential_hash: String,
    pub m: f64,
    pub gamma: f64,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<Rect>,
}

impl RunMetadata {
    pub fn new(pot: &Potential) -> Self {
        Self {
            tool: "diracres".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            potential_hash: pot.content_hash(),
            m: pot.m,
            gamma: pot.gamma,
            tolerances: BTreeMap::new(),
            region: None,
        }
    }

    pub fn tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.into(), value);
        self
    }

    pub fn region(mut self, region: Rect) -> Self {
        self.region = Some(region);
        self
    }
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn states_csv(states: &[StateRecord]) -> Result<String> {
    table(
        &["re_lambda", "im_lambda", "re_k", "im_k", "class", "multiplicity", "residual"],
        states.iter().map(|s| {
            vec![
                num(s.lambda.re),
                num(s.lambda.im),
                num(s.k.re),
                num(s.k.im),
                s.class.name().to_string(),
                s.multiplicity.to_string(),
                num(s.residual),
            ]
        }),
    )
}

#[derive(Serialize)]
struct StatesDocument<'a> {
    metadata: &'a RunMetadata,
    summary: BTreeMap<&'static str, u32>,
    states: &'a [StateRecord],
}

/// Counts per class, each state weighted by its multiplicity.
pub fn class_summary(states: &[StateRecord]) -> BTreeMap<&'static str, u32> {
    let mut out = BTreeMap::new();
    for s in states {
        *out.entry(s.class.name()).or_insert(0) += s.multiplicity;
    }
    out
}

pub fn states_json(states: &[StateRecord], meta: &RunMetadata) -> Result<String> {
    Ok(serde_json::to_string_pretty(&StatesDocument {
        metadata: meta,
        summary: class_summary(states),
        states,
    })?)
}

pub fn phase_csv(trace: &PhaseTrace) -> Result<String> {
    table(
        &["lambda", "re_S", "im_S", "phi_sc", "omega"],
        (0..trace.lambda.len()).map(|i| {
            vec![
                num(trace.lambda[i]),
                num(trace.s[i].re),
                num(trace.s[i].im),
                num(trace.phi_sc[i]),
                num(trace.omega[i]),
            ]
        }),
    )
}

pub fn det_csv(rows: &[DetEvaluation]) -> Result<String> {
    table(
        &["re_lambda", "im_lambda", "N", "re_D", "im_D", "hs_norm", "bound_margin"],
        rows.iter().map(|d| {
            vec![
                num(d.lambda.re),
                num(d.lambda.im),
                d.nodes.to_string(),
                num(d.value.re),
                num(d.value.im),
                num(d.hs_norm),
                num(d.bound_margin),
            ]
        }),
    )
}

pub fn counting_csv(report: &CountingReport) -> Result<String> {
    table(
        &["radius", "count", "predicted", "ratio", "sector_outliers", "delta"],
        (0..report.radii.len()).map(|i| {
            vec![
                num(report.radii[i]),
                report.counts[i].to_string(),
                num(report.predicted[i]),
                num(report.counts[i] as f64 / report.predicted[i]),
                report.sector_outliers[i].to_string(),
                num(report.delta),
            ]
        }),
    )
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::plane::C64;
    use crate::states::StateClass;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            if x != 0.0 {
                let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
                assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
            }
        }
    }

    #[test]
    fn potential_json_round_trip() {
        let pot = fixtures::smooth_bump();
        let text = serde_json::to_string(&pot.spec()).unwrap();
        let back = potential_from_json(&text).unwrap();
        assert_eq!(back.content_hash(), pot.content_hash());
    }

    #[test]
    fn malformed_potential_is_a_json_error() {
        assert!(matches!(potential_from_json("{\"m\": 1,"), Err(Error::Json(_))));
        assert!(matches!(
            potential_from_json(r#"{"m": 1, "gamma": 1, "segments": [{"lo": 0, "hi": 2, "q": [1]}]}"#),
            Err(Error::InvalidPotential(_))
        ));
    }

    #[test]
    fn states_table_layout() {
        let rec = StateRecord {
            lambda: C64::new(-1.0, 0.0),
            k: C64::new(0.0, 0.0),
            class: StateClass::Virtual,
            multiplicity: 1,
            residual: 0.0,
            newton_iters: 0,
            unresolved_cluster: false,
        };
        let csv = states_csv(&[rec]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "re_lambda,im_lambda,re_k,im_k,class,multiplicity,residual");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains(",virtual,1,"));
        let meta = RunMetadata::new(&fixtures::free());
        let json: serde_json::Value = serde_json::from_str(&states_json(&[rec], &meta).unwrap()).unwrap();
        assert_eq!(json["summary"]["virtual"], 1);
        assert_eq!(json["metadata"]["potential_hash"].as_str().unwrap().len(), 64);
    }
}
