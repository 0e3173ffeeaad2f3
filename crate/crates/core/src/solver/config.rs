//! Scenario files.
//!
//! ```toml
//! D = 1e-5
//!
//! [domain]
//! lo = 0.05
//! hi = 0.25
//!
//! [grid]
//! n = 4000
//! grading = 4.0
//!
//! [initial]
//! u0_kind = "bump"        # uniform | bump | custom-file
//! eps = 3.1622776601683794e-4
//! v0 = 3.1622776601683794e-3
//! w0 = 0.24968377223398316
//! r0 = { fronts = [], upper_sign = 1 }
//!
//! [run]
//! T = 40.0
//! v_min = 1e-6
//! cadence = 0.05
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{InitialData, ModelParams, RunOptions, Simulation, StopRule};
use crate::error::{Error, Result};
use crate::hysteresis::{RelaySign, SimpleConfig};
use crate::kernels::ThresholdDomain;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_n() -> usize {
    4000
}
fn default_grading() -> f64 {
    4.0
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: default_n(),
            grading: default_grading(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct R0Section {
    #[serde(default)]
    pub fronts: Vec<f64>,
    pub upper_sign: i8,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub u0_kind: String,
    pub eps: Option<f64>,
    pub u0_file: Option<PathBuf>,
    pub v0: f64,
    pub w0: f64,
    pub r0: R0Section,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default = "default_cadence")]
    pub cadence: f64,
    pub snapshot_cadence: Option<f64>,
    #[serde(default = "default_stop")]
    pub stop: String,
    #[serde(default = "default_quiet_steps")]
    pub quiescent_steps: u64,
    #[serde(default = "default_quiet_tol")]
    pub quiescent_tol: f64,
    #[serde(default)]
    pub probes: Vec<f64>,
    #[serde(default)]
    pub profile_times: Vec<f64>,
}

fn default_v_min() -> f64 {
    1e-6
}
fn default_cadence() -> f64 {
    0.05
}
fn default_stop() -> String {
    "horizon".into()
}
fn default_quiet_steps() -> u64 {
    50
}
fn default_quiet_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default = "default_event")]
    pub event: f64,
    #[serde(default = "default_series")]
    pub series: f64,
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing_steps: u64,
}

fn default_event() -> f64 {
    1e-10
}
fn default_series() -> f64 {
    1e-14
}
fn default_dt_init() -> f64 {
    1e-4
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_smoothing() -> u64 {
    4
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection {
            event: default_event(),
            series: default_series(),
            dt_init: default_dt_init(),
            dt_max: default_dt_max(),
            smoothing_steps: default_smoothing(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(rename = "D")]
    pub d: f64,
    pub domain: DomainSection,
    #[serde(default)]
    pub grid: GridSection,
    pub initial: InitialSection,
    pub run: RunSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

/// A parsed scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sim: Simulation,
    pub data: InitialData,
    pub opts: RunOptions,
}

/// Line (1-based) of `key` inside `[table]` (top level when `table` is empty).
pub fn locate(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let k = l.split('=').next().unwrap_or("").trim();
        if current == table && k == key {
            return Some(i + 1);
        }
    }
    None
}

fn anchored(src: &str, table: &str, key: &str, msg: String) -> Error {
    match locate(src, table, key) {
        Some(line) => Error::Config(format!("line {line}: {msg}")),
        None => Error::Config(msg),
    }
}

/// Deserializes a TOML document; errors carry the line and column.
pub fn parse_toml<T: serde::de::DeserializeOwned>(src: &str) -> Result<T> {
    toml::from_str(src).map_err(|e| Error::Config(e.to_string()))
}

/// Reads `x,u` rows from a CSV file with a header.
pub fn read_profile_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Config(format!(
                        "{}: line {}: expected two numbers",
                        path.display(),
                        i + 2
                    ))
                })
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

impl Scenario {
    pub fn parse(src: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = parse_toml(src)?;
        Self::from_file(&file, src, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&src, path.parent().unwrap_or(Path::new("."))).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn from_file(f: &ScenarioFile, src: &str, base_dir: &Path) -> Result<Self> {
        let domain = ThresholdDomain::new(f.domain.lo, f.domain.hi)
            .map_err(|e| anchored(src, "domain", "hi", e.to_string()))?;
        if !(f.d > 0.0) {
            return Err(anchored(src, "", "D", format!("D must be positive, got {}", f.d)));
        }
        let mut p = ModelParams::new(domain, f.d);
        p.grid_n = f.grid.n;
        p.grid_grading = f.grid.grading;
        p.dt_init = f.tolerances.dt_init;
        p.dt_max = f.tolerances.dt_max;
        p.tol_event = f.tolerances.event;
        p.tol_series = f.tolerances.series;
        p.smoothing_steps = f.tolerances.smoothing_steps;
        let sim = Simulation::new(p).map_err(|e| anchored(src, "grid", "n", e.to_string()))?;

        let ini = &f.initial;
        let sign = RelaySign::try_from(ini.r0.upper_sign)
            .map_err(|m| anchored(src, "initial.r0", "upper_sign", m))?;
        let r0 = SimpleConfig::new(domain.lo, domain.hi, ini.r0.fronts.clone(), sign)
            .map_err(|e| anchored(src, "initial.r0", "fronts", e.to_string()))?;
        let wrap = |key: &str, e: Error| anchored(src, "initial", key, e.to_string());
        let data = match ini.u0_kind.as_str() {
            "uniform" => InitialData::uniform(&sim.grid, ini.v0, ini.w0, r0),
            "bump" => {
                let eps = ini
                    .eps
                    .ok_or_else(|| anchored(src, "initial", "u0_kind", "bump profile needs eps".into()))?;
                InitialData::bump(&sim.grid, eps, ini.v0, ini.w0, r0).map_err(|e| wrap("eps", e))?
            }
            "custom-file" => {
                let rel = ini.u0_file.as_ref().ok_or_else(|| {
                    anchored(
                        src,
                        "initial",
                        "u0_kind",
                        "custom-file profile needs u0_file".into(),
                    )
                })?;
                let samples = read_profile_csv(&base_dir.join(rel)).map_err(|e| wrap("u0_file", e))?;
                let mut d = InitialData::from_samples(&sim.grid, &samples, ini.v0, ini.w0, r0)
                    .map_err(|e| wrap("u0_file", e))?;
                d.eps = ini.eps;
                d
            }
            other => {
                return Err(anchored(
                    src,
                    "initial",
                    "u0_kind",
                    format!("unknown u0_kind {other:?} (expected uniform, bump or custom-file)"),
                ))
            }
        };
        sim.init(&data).map_err(|e| {
            let key = match &e {
                Error::InitialData(m) if m.contains("w0") => "w0",
                Error::InitialData(m) if m.contains("v0") => "v0",
                _ => "u0_kind",
            };
            anchored(src, "initial", key, e.to_string())
        })?;

        let r = &f.run;
        if !(r.t > 0.0) {
            return Err(anchored(
                src,
                "run",
                "T",
                format!("T must be positive, got {}", r.t),
            ));
        }
        if !(r.cadence > 0.0) {
            return Err(anchored(src, "run", "cadence", "cadence must be positive".into()));
        }
        let stop = match r.stop.as_str() {
            "horizon" => StopRule::Horizon { t_end: r.t },
            "nutrient" => StopRule::NutrientBelow {
                v_min: r.v_min,
                t_max: r.t,
            },
            "quiescent" => StopRule::Quiescent {
                steps: r.quiescent_steps,
                tol: r.quiescent_tol,
                t_max: r.t,
            },
            other => {
                return Err(anchored(
                    src,
                    "run",
                    "stop",
                    format!("unknown stop rule {other:?} (expected horizon, nutrient or quiescent)"),
                ))
            }
        };
        if let Some(x) = r.probes.iter().find(|x| !(**x >= domain.lo && **x <= domain.hi)) {
            return Err(anchored(
                src,
                "run",
                "probes",
                format!("probe {x} outside the domain"),
            ));
        }
        let opts = RunOptions {
            stop,
            cadence: r.cadence,
            snapshot_cadence: r.snapshot_cadence,
            snapshot_times: r.profile_times.clone(),
            probes: r.probes.clone(),
            v_min: r.v_min,
            max_steps: 50_000_000,
        };
        Ok(Scenario { sim, data, opts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
D = 1e-3

[domain]
lo = 0.05
hi = 0.25

[grid]
n = 200

[initial]
u0_kind = "bump"
eps = 0.01
v0 = 0.1
w0 = 0.2
r0 = { fronts = [], upper_sign = 1 }

[run]
T = 1.0
"#;

    #[test]
    fn parses_example() {
        let s = Scenario::parse(GOOD, Path::new(".")).unwrap();
        assert_eq!(s.sim.grid.len(), 200);
        assert_eq!(s.data.eps, Some(0.01));
        assert_eq!(s.opts.stop, StopRule::Horizon { t_end: 1.0 });
    }

    #[test]
    fn diagnostics_carry_lines() {
        let bad = GOOD.replace("w0 = 0.2", "w0 = 0.3");
        let e = Scenario::parse(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("line 15"), "{e}");
        let bad = GOOD.replace("n = 200", "n = 200\nfoo = 1");
        let e = Scenario::parse(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("line 10"), "{e}");
        let bad = GOOD.replace("\"bump\"", "\"spike\"");
        let e = Scenario::parse(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("line 12"), "{e}");
    }
}
