//! `[section]` / `key = value` run configuration.
//!
//! `#` and `;` start comments. Unknown sections and keys are rejected so
//! typos surface as errors instead of silently falling back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use bendfree_core::anisotropy::FieldKind;
use bendfree_core::grid::Shape;
use bendfree_core::minimizer::{StepRule, DEFAULT_RESOLVE_FACTOR};

use crate::expr::{self, Polynomial};
use crate::CliError;

/// Largest resolution accepted; larger grids exceed the memory guard.
pub const MAX_RESOLUTION: usize = 513;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Greens,
    Frehse,
    Minimize,
    Nodal,
    El,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::Greens,
        Check::Frehse,
        Check::Minimize,
        Check::Nodal,
        Check::El,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Greens => "greens",
            Check::Frehse => "frehse",
            Check::Minimize => "minimize",
            Check::Nodal => "nodal",
            Check::El => "el",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| format!("unknown check `{}` (expected one of greens, frehse, minimize, nodal, el)", s.trim()))
    }
}

#[derive(Clone, Debug)]
pub struct EnergySettings {
    pub step_rule: StepRule,
    pub tol_grad: f64,
    pub max_outer: usize,
    /// Lower bound on the smoothing width; raised to `max(2h², 1e-4)` if smaller.
    pub eps_floor: f64,
    pub resolve_factor: f64,
    /// Relative residual of the inner linear solves.
    pub solve_tol: f64,
    /// Explicit schedule overriding the halving default.
    pub schedule: Option<Vec<f64>>,
}

impl Default for EnergySettings {
    fn default() -> Self {
        EnergySettings {
            step_rule: StepRule::Backtracking,
            tol_grad: 1e-6,
            max_outer: 200,
            eps_floor: 0.0,
            resolve_factor: DEFAULT_RESOLVE_FACTOR,
            solve_tol: 1e-8,
            schedule: None,
        }
    }
}

/// Scenario-specific expectations checked on top of the generic ones.
#[derive(Clone, Debug, Default)]
pub struct Expectations {
    pub energy_max: Option<f64>,
    pub nodal_nonempty: Option<bool>,
    pub max_dev_from_const: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub name: String,
    pub shape: Shape,
    pub resolution: usize,
    pub field: FieldKind,
    pub u0: Polynomial,
    pub energy: EnergySettings,
    /// Source point for Green's columns; the shape's centre when unset.
    pub source: Option<[f64; 2]>,
    pub out_dir: Option<String>,
    pub checks: Vec<Check>,
    pub expect: Expectations,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw = RawConfig::parse(text)?;
        let mut cfg = RunConfig {
            name: "unnamed".into(),
            shape: Shape::disk(1.0),
            resolution: 129,
            field: FieldKind::Identity,
            u0: Polynomial::constant(1.0),
            energy: EnergySettings::default(),
            source: None,
            out_dir: None,
            checks: Check::ALL.to_vec(),
            expect: Expectations::default(),
        };
        for entry in &raw.entries {
            cfg.apply(entry)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry) -> Result<(), CliError> {
        let v = e.value.as_str();
        match (e.section.as_str(), e.key.as_str()) {
            ("scenario", "name") => self.name = v.to_string(),
            ("domain", "shape") => self.shape = v.parse().map_err(|err| e.error(format!("{err}")))?,
            ("domain", "resolution") => self.resolution = e.parse_num()?,
            ("coefficient", "field") => {
                self.field = v.parse().map_err(|err| e.error(format!("{err}")))?
            }
            ("boundary", "u0") => {
                self.u0 = expr::parse(v).map_err(|err| e.error(err.to_string()))?
            }
            ("energy", "tol_grad") => self.energy.tol_grad = e.parse_num()?,
            ("energy", "max_outer") => self.energy.max_outer = e.parse_num()?,
            ("energy", "eps_floor") => self.energy.eps_floor = e.parse_num()?,
            ("energy", "resolve_factor") => self.energy.resolve_factor = e.parse_num()?,
            ("energy", "solve_tol") => self.energy.solve_tol = e.parse_num()?,
            ("energy", "step") => self.energy.step_rule = parse_step(v).map_err(|m| e.error(m))?,
            ("energy", "schedule") => {
                let list = v
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|err| e.error(err.to_string()))?;
                self.energy.schedule = Some(list);
            }
            ("checks", "run") => {
                let mut list = v
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(Check::from_str)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|m| e.error(m))?;
                list.sort();
                list.dedup();
                self.checks = list;
            }
            ("greens", "source") => {
                let xy = v
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|err| e.error(err.to_string()))?;
                match xy.as_slice() {
                    &[x, y] => self.source = Some([x, y]),
                    _ => return Err(e.error(format!("expected `x, y`, got `{v}`"))),
                }
            }
            ("expect", "energy_max") => self.expect.energy_max = Some(e.parse_num()?),
            ("expect", "nodal_nonempty") => self.expect.nodal_nonempty = Some(e.parse_num()?),
            ("expect", "max_dev_from_const") => {
                self.expect.max_dev_from_const = Some(e.parse_num()?)
            }
            ("output", "dir") => self.out_dir = Some(v.to_string()),
            (s, k) => return Err(e.error(format!("unknown key `{k}` in section [{s}]"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let r = self.resolution;
        if r < 17 || !(r - 1).is_power_of_two() {
            return Err(CliError::Invalid(format!(
                "resolution {r} must be 2^k + 1 and at least 17"
            )));
        }
        if r > MAX_RESOLUTION {
            return Err(CliError::Invalid(format!(
                "resolution {r} exceeds the limit of {MAX_RESOLUTION}"
            )));
        }
        if self.u0.degree() > expr::MAX_DEGREE {
            return Err(CliError::Invalid("u0 degree too high".into()));
        }
        // Sample the datum densely along the shape's boundary.
        let n = 1024;
        for i in 0..n {
            let p = boundary_point(&self.shape, i as f64 / n as f64);
            let val = self.u0.eval(p);
            if !(val > 0.0) {
                return Err(CliError::Invalid(format!(
                    "u0 = {val} at ({:.4}, {:.4}); the boundary datum must be positive",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }

    /// Same scenario on another grid.
    pub fn at_resolution(&self, resolution: usize) -> Self {
        RunConfig {
            resolution,
            ..self.clone()
        }
    }
}

/// Point at fraction `t ∈ [0, 1)` of the way around the boundary.
pub fn boundary_point(shape: &Shape, t: f64) -> [f64; 2] {
    match *shape {
        Shape::Disk { center, radius } => {
            let a = 2.0 * std::f64::consts::PI * t;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        }
        Shape::Rect { min, max } => {
            let (w, h) = (max[0] - min[0], max[1] - min[1]);
            let mut s = t * 2.0 * (w + h);
            if s < w {
                return [min[0] + s, min[1]];
            }
            s -= w;
            if s < h {
                return [max[0], min[1] + s];
            }
            s -= h;
            if s < w {
                return [max[0] - s, max[1]];
            }
            s -= w;
            [min[0], max[1] - s]
        }
    }
}

fn parse_step(v: &str) -> Result<StepRule, String> {
    let v = v.trim();
    if v == "backtracking" {
        return Ok(StepRule::Backtracking);
    }
    v.strip_prefix("fixed(")
        .and_then(|r| r.strip_suffix(')'))
        .and_then(|s| s.trim().parse::<f64>().ok())
        .map(StepRule::Fixed)
        .ok_or_else(|| format!("step must be `backtracking` or `fixed(s)`, got `{v}`"))
}

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

impl Entry {
    fn error(&self, message: String) -> CliError {
        CliError::Config {
            line: self.line,
            field: format!("{}.{}", self.section, self.key),
            message,
        }
    }

    fn parse_num<T: FromStr>(&self) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        self.value
            .trim()
            .parse()
            .map_err(|e: T::Err| self.error(format!("`{}`: {e}", self.value)))
    }
}

struct RawConfig {
    entries: Vec<Entry>,
}

const SECTIONS: [&str; 9] = [
    "scenario",
    "greens",
    "domain",
    "coefficient",
    "boundary",
    "energy",
    "checks",
    "expect",
    "output",
];

impl RawConfig {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut section: Option<String> = None;
        let mut entries = Vec::new();
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line
                .split(['#', ';'])
                .next()
                .unwrap_or("")
                .trim();
            if content.is_empty() {
                continue;
            }
            let err = |field: &str, message: String| CliError::Config {
                line,
                field: field.to_string(),
                message,
            };
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err("", "unterminated section header".into()))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(name, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err("", format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            let Some(sec) = &section else {
                return Err(err(key, "key outside of any section".into()));
            };
            if let Some(first) = seen.insert((sec.clone(), key.to_string()), line) {
                return Err(err(
                    &format!("{sec}.{key}"),
                    format!("duplicate key (first set on line {first})"),
                ));
            }
            entries.push(Entry {
                line,
                section: sec.clone(),
                key: key.to_string(),
                value: value.trim().to_string(),
            });
        }
        Ok(RawConfig { entries })
    }
}
