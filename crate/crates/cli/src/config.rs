//! Experiment configuration in TOML with sections `[grid]`, `[evolution]`,
//! `[constraints2d]`, `[calibration]`, `[io]` and `[seed]`.
//!
//! Unknown keys are rejected and every validation error names its line.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use crate::expr::{self, TrigSum};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at line {l}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<RawGrid>,
    evolution: Option<RawEvolution>,
    constraints2d: Option<RawConstraints>,
    calibration: Option<RawCalibration>,
    io: Option<RawIo>,
    seed: Option<RawSeed>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Points {
    Uniform(i64),
    PerAxis(Vec<i64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Spanned<i64>,
    points: Spanned<Points>,
    lengths: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolution {
    dt: Option<Spanned<f64>>,
    steps: Spanned<i64>,
    lambda: Option<Spanned<f64>>,
    record_every: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraints {
    c: Spanned<f64>,
    k: Option<Spanned<f64>>,
    #[serde(rename = "F")]
    profile: Spanned<String>,
    phi: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibration {
    data: Option<Spanned<String>>,
    set: Option<Spanned<String>>,
    tau: Option<Spanned<f64>>,
    levels: Option<Spanned<Vec<i64>>>,
    lambda: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIo {
    output: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeed {
    value: Spanned<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub points: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl GridConfig {
    pub fn min_spacing(&self) -> f64 {
        self.points.iter().zip(&self.lengths).map(|(p, l)| l / *p as f64).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionSettings {
    pub dt: f64,
    pub steps: usize,
    pub lambda: f64,
    pub record_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSettings {
    pub c: f64,
    pub k: f64,
    pub profile: String,
    pub phi_source: String,
    pub phi: TrigSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationData {
    Generic,
    Homogeneous,
    Flat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSettings {
    pub data: CalibrationData,
    pub extended: bool,
    pub tau: f64,
    pub levels: Vec<usize>,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub evolution: Option<EvolutionSettings>,
    pub constraints2d: Option<ConstraintSettings>,
    pub calibration: CalibrationSettings,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn evolution(&self) -> Result<&EvolutionSettings, ConfigError> {
        self.evolution.as_ref().ok_or_else(|| missing("evolution"))
    }

    pub fn constraints2d(&self) -> Result<&ConstraintSettings, ConfigError> {
        self.constraints2d.as_ref().ok_or_else(|| missing("constraints2d"))
    }
}

fn missing(section: &str) -> ConfigError {
    ConfigError { line: None, message: format!("missing section [{section}]") }
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError { line: Some(self.line(span)), message: message.into() })
    }

    fn positive<T: Copy + PartialOrd + Default + fmt::Display>(&self, v: &Spanned<T>, key: &str) -> Result<T, ConfigError> {
        if *v.get_ref() > T::default() {
            Ok(*v.get_ref())
        } else {
            self.err(v.span(), format!("`{key}` must be positive, got {}", v.get_ref()))
        }
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    let cx = Ctx { text };
    let grid = grid(&cx, raw.grid.ok_or_else(|| missing("grid"))?)?;
    let evolution = raw.evolution.map(|e| evolution(&cx, e, &grid)).transpose()?;
    let constraints2d = raw.constraints2d.map(|c| constraints(&cx, c, &grid)).transpose()?;
    let calibration = calibration(&cx, raw.calibration, &grid)?;
    let output = raw.io.map(|io| PathBuf::from(io.output.into_inner()));
    let seed = match raw.seed {
        Some(s) if *s.value.get_ref() < 0 => return cx.err(s.value.span(), "seed must be non-negative"),
        Some(s) => s.value.into_inner() as u64,
        None => 0,
    };
    Ok(ExperimentConfig { grid, evolution, constraints2d, calibration, output, seed })
}

fn grid(cx: &Ctx, g: RawGrid) -> Result<GridConfig, ConfigError> {
    let n = *g.n.get_ref();
    if !(2..=3).contains(&n) {
        return cx.err(g.n.span(), format!("`n` must be 2 or 3, got {n}"));
    }
    let n = n as usize;
    let span = g.points.span();
    let points: Vec<i64> = match g.points.into_inner() {
        Points::Uniform(p) => vec![p; n],
        Points::PerAxis(v) => v,
    };
    if points.len() != n {
        return cx.err(span, format!("`points` needs {n} entries, got {}", points.len()));
    }
    if let Some(p) = points.iter().find(|p| **p < 8 || **p % 2 != 0) {
        return cx.err(span, format!("grid points must be even and at least 8, got {p}"));
    }
    let lengths = match g.lengths {
        Some(l) => {
            let span = l.span();
            let l = l.into_inner();
            if l.len() != n {
                return cx.err(span, format!("`lengths` needs {n} entries, got {}", l.len()));
            }
            if l.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return cx.err(span, "`lengths` must be positive");
            }
            l
        }
        None => vec![1.0; n],
    };
    Ok(GridConfig { n, points: points.into_iter().map(|p| p as usize).collect(), lengths })
}

fn evolution(cx: &Ctx, e: RawEvolution, grid: &GridConfig) -> Result<EvolutionSettings, ConfigError> {
    let bound = 0.25 * grid.min_spacing();
    let dt = match &e.dt {
        Some(dt) => {
            let v = cx.positive(dt, "dt")?;
            if v > bound * (1.0 + 1e-12) {
                return cx.err(dt.span(), format!("`dt` = {v} exceeds 0.25·min spacing = {bound}"));
            }
            v
        }
        None => bound,
    };
    let steps = cx.positive(&e.steps, "steps")? as usize;
    let lambda = e.lambda.map_or(0.0, Spanned::into_inner);
    let record_every = match &e.record_every {
        Some(r) => cx.positive(r, "record_every")? as usize,
        None => 1,
    };
    Ok(EvolutionSettings { dt, steps, lambda, record_every })
}

fn constraints(cx: &Ctx, c: RawConstraints, grid: &GridConfig) -> Result<ConstraintSettings, ConfigError> {
    let profile = c.profile.get_ref().clone();
    if gerbeflow::constraint2d::Profile::from_name(&profile).is_none() {
        return cx.err(c.profile.span(), format!("`F` must be one of zero, const1, linear; got `{profile}`"));
    }
    let phi_source = c.phi.get_ref().clone();
    let phi = expr::parse(&phi_source).or_else(|e| cx.err(c.phi.span(), format!("`phi`: {e}")))?;
    if phi.max_axis().is_some_and(|a| a >= grid.n) {
        return cx.err(c.phi.span(), format!("`phi` uses a coordinate beyond n = {}", grid.n));
    }
    Ok(ConstraintSettings {
        c: c.c.into_inner(),
        k: c.k.map_or(0.0, Spanned::into_inner),
        profile,
        phi_source,
        phi,
    })
}

fn calibration(cx: &Ctx, c: Option<RawCalibration>, grid: &GridConfig) -> Result<CalibrationSettings, ConfigError> {
    let finest = grid.points[0];
    let default_levels = vec![finest / 4, finest / 2, finest];
    let Some(c) = c else {
        return Ok(CalibrationSettings {
            data: CalibrationData::Generic,
            extended: true,
            tau: 0.125,
            levels: default_levels,
            lambda: 0.3,
        });
    };
    let data = match &c.data {
        None => CalibrationData::Generic,
        Some(d) => match d.get_ref().as_str() {
            "generic" => CalibrationData::Generic,
            "homogeneous" => CalibrationData::Homogeneous,
            "flat" => CalibrationData::Flat,
            other => return cx.err(d.span(), format!("`data` must be generic, homogeneous or flat; got `{other}`")),
        },
    };
    let extended = match &c.set {
        None => true,
        Some(s) => match s.get_ref().as_str() {
            "extended" => true,
            "base" => false,
            other => return cx.err(s.span(), format!("`set` must be extended or base; got `{other}`")),
        },
    };
    let tau = match &c.tau {
        Some(t) => cx.positive(t, "tau")?,
        None => 0.125,
    };
    let levels = match c.levels {
        Some(l) => {
            let span = l.span();
            let l = l.into_inner();
            if l.len() < 2 || l.iter().any(|p| *p < 8 || *p % 2 != 0) || l.windows(2).any(|w| w[1] <= w[0]) {
                return cx.err(span, "`levels` must be at least two increasing even sizes ≥ 8");
            }
            l.into_iter().map(|p| p as usize).collect()
        }
        None => default_levels,
    };
    if levels.iter().any(|p| *p < 8) {
        return Err(ConfigError { line: None, message: "calibration levels derived from [grid] fall below 8 points".into() });
    }
    let lambda = c.lambda.map_or(0.3, Spanned::into_inner);
    Ok(CalibrationSettings { data, extended, tau, levels, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[grid]\nn = 2\npoints = 32\n";

    #[test]
    fn minimal_grid() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.grid, GridConfig { n: 2, points: vec![32, 32], lengths: vec![1.0, 1.0] });
        assert!(c.evolution.is_none());
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn missing_grid_names_section() {
        let e = parse("[seed]\nvalue = 3\n").unwrap_err();
        assert!(e.message.contains("[grid]"), "{e}");
    }

    #[test]
    fn unknown_key_has_line() {
        let e = parse("[grid]\nn = 2\npoints = 32\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, Some(4), "{e}");
    }

    #[test]
    fn bad_values_have_lines() {
        assert_eq!(parse("[grid]\nn = 5\npoints = 32\n").unwrap_err().line, Some(2));
        assert_eq!(parse("[grid]\nn = 2\npoints = 7\n").unwrap_err().line, Some(3));
        let e = parse(&format!("{BASE}[constraints2d]\nc = 1.0\nF = \"zero\"\nphi = \"0.3*exp(x)\"\n")).unwrap_err();
        assert_eq!(e.line, Some(7), "{e}");
        let e = parse(&format!("{BASE}[evolution]\ndt = 0.5\nsteps = 3\n")).unwrap_err();
        assert_eq!(e.line, Some(5), "{e}");
    }

    #[test]
    fn evolution_defaults() {
        let c = parse(&format!("{BASE}[evolution]\nsteps = 10\n")).unwrap();
        let e = c.evolution.unwrap();
        assert_eq!(e.dt, 0.25 / 32.0);
        assert_eq!((e.steps, e.record_every, e.lambda), (10, 1, 0.0));
    }
}
