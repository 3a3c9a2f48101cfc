//! Run configuration: JSON schema, flag merging and up-front validation.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::output::Format;
use crate::error::{Error, Result};
use crate::grid::{Domain, Field, Grid};
use crate::model::ModelParams;

/// How the growth rate `a` is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "String")]
pub enum GrowthSpec {
    Constant(f64),
    /// `a0` everywhere.
    ProfileConst,
    /// `a0 + a1·sin(π(x-x₀)/L)`, tensorized in 2D.
    ProfileSin,
    /// A field CSV on the run's grid.
    File(PathBuf),
}

impl FromStr for GrowthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("profile:") {
            return match rest {
                "const" => Ok(GrowthSpec::ProfileConst),
                "sin" => Ok(GrowthSpec::ProfileSin),
                other => Err(Error::Config(format!(
                    "unknown profile `{other}` (expected const or sin)"
                ))),
            };
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(GrowthSpec::File(PathBuf::from(path)));
        }
        parse_real(s).map(GrowthSpec::Constant).map_err(|_| {
            Error::Config(format!(
                "growth rate `{s}`: expected a number, profile:const|sin or file:<path>"
            ))
        })
    }
}

impl fmt::Display for GrowthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthSpec::Constant(a) => write!(f, "{a}"),
            GrowthSpec::ProfileConst => f.write_str("profile:const"),
            GrowthSpec::ProfileSin => f.write_str("profile:sin"),
            GrowthSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl From<GrowthSpec> for String {
    fn from(g: GrowthSpec) -> String {
        g.to_string()
    }
}

impl TryFrom<serde_json::Value> for GrowthSpec {
    type Error = Error;

    fn try_from(v: serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::Number(n) => Ok(GrowthSpec::Constant(
                n.as_f64()
                    .ok_or_else(|| Error::Config("growth rate out of range".into()))?,
            )),
            serde_json::Value::String(s) => s.parse(),
            other => Err(Error::Config(format!("growth rate: unexpected {other}"))),
        }
    }
}

/// A real number, `pi`, `<k>pi` or `pi/<k>`.
pub fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || Error::Config(format!("`{s}` is not a number"));
    if let Some(d) = t.strip_prefix("pi/") {
        return Ok(PI / d.parse::<f64>().map_err(|_| bad())?);
    }
    if let Some(k) = t.strip_suffix("pi") {
        let k = k.trim_end_matches('*');
        let k = match k {
            "" => 1.0,
            "-" => -1.0,
            k => k.parse::<f64>().map_err(|_| bad())?,
        };
        return Ok(k * PI);
    }
    t.parse::<f64>().map_err(|_| bad())
}

/// `interval:<x0>:<x1>` or `rect:<x0>:<x1>:<y0>:<y1>`.
pub fn parse_domain(spec: &str, n: usize, ny: Option<usize>) -> Result<Domain> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = |xs: &[&str]| xs.iter().map(|x| parse_real(x)).collect::<Result<Vec<f64>>>();
    match parts.as_slice() {
        ["interval", rest @ ..] if rest.len() == 2 => {
            let v = nums(rest)?;
            Ok(Domain::Interval {
                start: v[0],
                end: v[1],
                n,
            })
        }
        ["rect", rest @ ..] if rest.len() == 4 => {
            let v = nums(rest)?;
            Ok(Domain::Rectangle {
                x: [v[0], v[1]],
                y: [v[2], v[3]],
                nx: n,
                ny: ny.unwrap_or(n),
            })
        }
        _ => Err(Error::Config(format!(
            "domain `{spec}`: expected interval:<x0>:<x1> or rect:<x0>:<x1>:<y0>:<y1>"
        ))),
    }
}

/// Operator whose spectrum the `spectrum` command reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumOperator {
    /// `-Δ`.
    Laplacian,
    /// `-(Δ + a)`.
    Growth,
    /// `-(Δ + a - s₁θ)`.
    #[default]
    BranchS,
    /// `-(Δ + a - 2θ)`.
    BranchTwo,
    /// `-J` at the chosen state.
    Coupled,
}

/// State at which the coupled linearization is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    #[default]
    Synchronized,
    PreyOnly,
    PredatorOnly,
    Origin,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    /// Along the principal eigenvector of the linearization.
    #[default]
    Principal,
    /// Uniform noise per node, drawn from `seed`.
    Random,
}

/// Sweep axes. A missing axis takes the run's fixed value; an empty one is an
/// error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
}

/// `v1,v2,...` or an inclusive range `start:stop:step`.
pub fn parse_axis(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (parse_real(parts[0])?, parse_real(parts[1])?, parse_real(parts[2])?);
        if step.is_nan() || step <= 0.0 {
            return Err(Error::Config(format!("axis `{s}`: step must be positive")));
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if count < 0.0 {
            return Ok(Vec::new());
        }
        // index-based so values do not accumulate rounding
        return Ok((0..=count as usize).map(|i| start + i as f64 * step).collect());
    }
    s.split(',').map(parse_real).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    pub a: GrowthSpec,
    pub a0: f64,
    pub a1: f64,
    pub b: f64,
    pub c: f64,
    pub tol: f64,
    pub k: usize,
    pub operator: SpectrumOperator,
    pub state: StateKind,
    pub dt: f64,
    pub t_end: f64,
    pub amplitude: f64,
    pub perturbation: PerturbationKind,
    pub store_every: usize,
    pub snapshots: Vec<f64>,
    pub probe_starts: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    /// Sweep worker threads; 0 uses all cores.
    pub workers: usize,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: "interval:0:pi".into(),
            n: 200,
            ny: None,
            a: GrowthSpec::Constant(2.0),
            a0: 1.5,
            a1: 0.5,
            b: 0.5,
            c: 1.0,
            tol: 1e-10,
            k: 6,
            operator: SpectrumOperator::default(),
            state: StateKind::default(),
            dt: 1e-3,
            t_end: 20.0,
            amplitude: 1e-3,
            perturbation: PerturbationKind::default(),
            store_every: 100,
            snapshots: Vec::new(),
            probe_starts: 0,
            seed: 0,
            out: PathBuf::from("out"),
            format: Format::Csv,
            workers: 0,
            sweep: SweepSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Growth field on `grid`. Reads the file for `file:` specs.
    pub fn growth_field(&self, grid: &Grid) -> Result<Field> {
        Ok(match &self.a {
            GrowthSpec::Constant(a) => Field::constant(grid, *a),
            GrowthSpec::ProfileConst => Field::constant(grid, self.a0),
            GrowthSpec::ProfileSin => {
                let (o, e) = (grid.origin(), grid.extent());
                let dim = grid.dim();
                let (a0, a1) = (self.a0, self.a1);
                Field::from_fn(grid, move |p| {
                    let sx = (PI * (p[0] - o[0]) / e[0]).sin();
                    let sy = if dim == 2 {
                        (PI * (p[1] - o[1]) / e[1]).sin()
                    } else {
                        1.0
                    };
                    a0 + a1 * sx * sy
                })
            }
            GrowthSpec::File(path) => {
                if !path.exists() {
                    return Err(Error::Config(format!("growth file {} does not exist", path.display())));
                }
                Field::read_csv(grid, path)?
            }
        })
    }

    /// Every check that needs no numerical solve.
    pub fn validate(&self) -> Result<Plan> {
        let grid = Grid::new(parse_domain(&self.domain, self.n, self.ny)?)?;
        let a = self.growth_field(&grid)?;
        if a.values().iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("growth rate must be finite".into()));
        }
        let params = ModelParams::new(a, self.b, self.c)?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol = {} must lie in (0, 1)", self.tol)));
        }
        if self.k == 0 || self.k > grid.len() {
            return Err(Error::Config(format!("k = {} must lie in 1..={}", self.k, grid.len())));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end = {} must be positive", self.t_end)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "amplitude = {} must be nonnegative",
                self.amplitude
            )));
        }
        if self.store_every == 0 {
            return Err(Error::Config("store_every must be at least 1".into()));
        }
        Ok(Plan { grid, params })
    }

    /// Expands and validates the sweep product. Jobs are in key order:
    /// `a` slowest, then `b`, `c`, `n`.
    pub fn sweep_jobs(&self) -> Result<Vec<SweepJob>> {
        let fixed_a = match &self.a {
            GrowthSpec::Constant(a) => Some(*a),
            _ => None,
        };
        let a_axis = match (&self.sweep.a, fixed_a) {
            (Some(v), _) => v.clone(),
            (None, Some(a)) => vec![a],
            (None, None) => vec![f64::NAN],
        };
        let b_axis = self.sweep.b.clone().unwrap_or_else(|| vec![self.b]);
        let c_axis = self.sweep.c.clone().unwrap_or_else(|| vec![self.c]);
        let n_axis = self.sweep.n.clone().unwrap_or_else(|| vec![self.n]);
        if a_axis.is_empty() || b_axis.is_empty() || c_axis.is_empty() || n_axis.is_empty() {
            return Err(Error::EmptySweep);
        }
        let mut jobs = Vec::new();
        for &a in &a_axis {
            for &b in &b_axis {
                for &c in &c_axis {
                    for &n in &n_axis {
                        let mut cfg = self.clone();
                        if !a.is_nan() {
                            cfg.a = GrowthSpec::Constant(a);
                        }
                        cfg.b = b;
                        cfg.c = c;
                        cfg.n = n;
                        cfg.sweep = SweepSpec::default();
                        cfg.validate()
                            .map_err(|e| Error::Config(format!("sweep job a={a} b={b} c={c} n={n}: {e}")))?;
                        jobs.push(SweepJob {
                            index: jobs.len(),
                            config: cfg,
                        });
                    }
                }
            }
        }
        Ok(jobs)
    }
}

/// Validated inputs shared by every command.
#[derive(Clone, Debug)]
pub struct Plan {
    pub grid: Grid,
    pub params: ModelParams,
}

#[derive(Clone, Debug)]
pub struct SweepJob {
    pub index: usize,
    pub config: RunConfig,
}

impl SweepJob {
    /// Zero-padded key that sorts in product order.
    pub fn key(&self) -> String {
        format!("job-{:06}", self.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_and_domains() {
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_real("-1.5").unwrap(), -1.5);
        assert!(parse_real("tau").is_err());
        assert_eq!(
            parse_domain("interval:0:pi", 10, None).unwrap(),
            Domain::Interval {
                start: 0.0,
                end: PI,
                n: 10
            }
        );
        assert_eq!(
            parse_domain("rect:0:1:0:2", 5, Some(7)).unwrap(),
            Domain::Rectangle {
                x: [0.0, 1.0],
                y: [0.0, 2.0],
                nx: 5,
                ny: 7
            }
        );
        assert!(parse_domain("disk:0:1", 5, None).is_err());
        assert!(parse_domain("interval:0", 5, None).is_err());
    }

    #[test]
    fn axes() {
        let v = parse_axis("0.1:0.9:0.1").unwrap();
        assert_eq!(v.len(), 9);
        assert!((v[8] - 0.9).abs() < 1e-15);
        assert_eq!(parse_axis("0.5,1,2,4").unwrap(), vec![0.5, 1.0, 2.0, 4.0]);
        assert!(parse_axis("").unwrap().is_empty());
        assert!(parse_axis("1:0:1").unwrap().is_empty());
    }

    #[test]
    fn growth_specs_round_trip() {
        for s in ["2", "profile:sin", "profile:const", "file:a.csv"] {
            let g: GrowthSpec = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        let cfg = RunConfig::from_json(r#"{"a": 2.5, "b": 0.3}"#).unwrap();
        assert_eq!(cfg.a, GrowthSpec::Constant(2.5));
        assert_eq!(cfg.b, 0.3);
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&echoed).unwrap(), cfg);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.b = 1.5;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("(0, 1)"), "{msg}");
        let cfg = RunConfig {
            a: GrowthSpec::File("/nonexistent/a.csv".into()),
            ..RunConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("does not exist"));
        let cfg = RunConfig {
            k: 0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sin_profile_is_tensorized() {
        let cfg = RunConfig {
            domain: "rect:0:2:0:1".into(),
            n: 9,
            a: GrowthSpec::ProfileSin,
            a0: 1.0,
            a1: 2.0,
            ..RunConfig::default()
        };
        let plan = cfg.validate().unwrap();
        let center = plan.grid.index(4, 4);
        assert!((plan.params.a.values()[center] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_product_and_empty_axes() {
        let mut cfg = RunConfig::default();
        cfg.sweep.b = Some(parse_axis("0.1:0.9:0.1").unwrap());
        cfg.sweep.c = Some(vec![0.5, 1.0, 2.0, 4.0]);
        let jobs = cfg.sweep_jobs().unwrap();
        assert_eq!(jobs.len(), 36);
        assert_eq!(jobs[1].config.c, 1.0);
        assert_eq!(jobs[4].config.b, 0.2);
        cfg.sweep.c = Some(Vec::new());
        assert!(matches!(cfg.sweep_jobs(), Err(Error::EmptySweep)));
        cfg.sweep.c = Some(vec![1.0]);
        cfg.sweep.b = Some(vec![0.5, 1.5]);
        assert!(cfg.sweep_jobs().is_err());
    }
}
