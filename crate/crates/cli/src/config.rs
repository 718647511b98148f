//! Run configuration: command-line flags layered over an optional
//! `key = value` file.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use curvhom::classify::DEFAULT_TOL;
use curvhom::{parse, Coord, Expr, FamilySpec, GridAxis, MetricField, SampleSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config file line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {message}")]
    Value { key: &'static str, message: String },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("invalid {what}: {message}")]
    Expr { what: String, message: String },
    #[error(transparent)]
    Classify(#[from] curvhom::classify::ClassifyError),
    #[error(transparent)]
    Family(#[from] curvhom::FamilyError),
    #[error(transparent)]
    Geometry(#[from] curvhom::GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    F,
    H,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Flags shared by every subcommand. Each one can also be given in the
/// config file under the same name (without the dashes).
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Metric family.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// f(x) for the f-family, h(t) for the h-family.
    #[arg(long)]
    pub function: Option<String>,
    /// Custom metric components, e.g. "tt=1; xy=1; xx=-2*t^3" (others are 0).
    #[arg(long)]
    pub metric: Option<String>,
    /// Highest covariant derivative order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Sample axis `coord=min:max:count`; repeat per coordinate. Coordinates
    /// without an axis are pinned to 0.
    #[arg(long = "grid")]
    pub grid: Vec<String>,
    /// Relative spread below which a sampled quantity counts as constant.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Process sample points one at a time.
    #[arg(long)]
    pub sequential: bool,
}

pub const DEFAULT_ORDER: usize = 2;

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: FamilySpec,
    pub order: usize,
    pub axes: Vec<GridAxis>,
    pub samples: SampleSet,
    pub tol: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub sequential: bool,
}

const KEYS: [&str; 9] = ["family", "function", "metric", "order", "grid", "tol", "output", "format", "sequential"];

/// Parses `key = value` lines; `#` starts a comment. `grid` may repeat.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, Vec<String>>, ConfigError> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: n + 1, message: format!("expected key = value, got {line:?}") })?;
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        let value = v.trim().trim_matches('"').to_string();
        let slot = out.entry(key.clone()).or_default();
        if key != "grid" && !slot.is_empty() {
            return Err(ConfigError::Syntax { line: n + 1, message: format!("{key} given twice") });
        }
        slot.push(value);
    }
    Ok(out)
}

fn parse_value<T: ValueEnum>(key: &'static str, v: &str) -> Result<T, ConfigError> {
    T::from_str(v, true).map_err(|message| ConfigError::Value { key, message })
}

fn parse_expr(what: &str, text: &str) -> Result<Expr, ConfigError> {
    parse(text, &Coord::ALL).map_err(|e| ConfigError::Expr { what: what.to_string(), message: e.to_string() })
}

/// `"tt=1; xy=1; xx=-2*t^3"` to a symmetric matrix; unnamed entries are 0.
pub fn parse_metric(text: &str) -> Result<MetricField, ConfigError> {
    let mut m: [[Option<Expr>; 3]; 3] = Default::default();
    for part in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = |message: String| ConfigError::Value { key: "metric", message };
        let (name, expr) = part.split_once('=').ok_or_else(|| bad(format!("expected ij=expression, got {part:?}")))?;
        let name = name.trim();
        let idx: Vec<usize> = name.chars().filter_map(|c| Coord::from_name(&c.to_string()).map(Coord::index)).collect();
        if idx.len() != 2 || name.chars().count() != 2 {
            return Err(bad(format!("component name must be two of t, x, y, got {name:?}")));
        }
        let (i, j) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
        if m[i][j].is_some() {
            return Err(bad(format!("component {name} given twice")));
        }
        m[i][j] = Some(parse_expr(&format!("metric component {name}"), expr.trim())?);
    }
    Ok(MetricField::from_upper(|i, j| m[i][j].clone().unwrap_or_else(|| Expr::num(0.0))))
}

impl RunArgs {
    /// Merges the config file (if any) under the flags and validates.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let get = |k: &str| file.get(k).and_then(|v| v.first()).map(String::as_str);

        let family = match (self.family, get("family")) {
            (Some(f), _) => f,
            (None, Some(v)) => parse_value("family", v)?,
            (None, None) => return Err(ConfigError::Missing("--family")),
        };
        let function = self.function.clone().or_else(|| get("function").map(String::from));
        let metric = self.metric.clone().or_else(|| get("metric").map(String::from));
        let spec = match family {
            FamilyArg::F | FamilyArg::H => {
                let text = function.ok_or(ConfigError::Missing("--function"))?;
                let e = parse_expr("function", &text)?;
                if family == FamilyArg::F {
                    FamilySpec::f(e)?
                } else {
                    FamilySpec::h(e)?
                }
            }
            FamilyArg::Custom => FamilySpec::Custom(parse_metric(&metric.ok_or(ConfigError::Missing("--metric"))?)?),
        };

        let order = match (self.order, get("order")) {
            (Some(o), _) => o,
            (None, Some(v)) => v.parse().map_err(|_| ConfigError::Value { key: "order", message: format!("{v:?} is not a nonnegative integer") })?,
            (None, None) => DEFAULT_ORDER,
        };
        let tol = match (self.tol, get("tol")) {
            (Some(t), _) => t,
            (None, Some(v)) => v.parse().map_err(|_| ConfigError::Value { key: "tol", message: format!("{v:?} is not a number") })?,
            (None, None) => DEFAULT_TOL,
        };
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(ConfigError::Value { key: "tol", message: format!("must be positive, got {tol}") });
        }

        let grid_specs: Vec<String> = if !self.grid.is_empty() {
            self.grid.clone()
        } else {
            file.get("grid").into_iter().flatten().flat_map(|v| v.split(',').map(|s| s.trim().to_string())).collect()
        };
        if grid_specs.is_empty() {
            return Err(ConfigError::Missing("--grid"));
        }
        let axes = grid_specs.iter().map(|s| s.parse::<GridAxis>()).collect::<Result<Vec<_>, _>>()?;
        let samples = SampleSet::grid(&axes)?;

        let output = self.output.clone().or_else(|| get("output").map(PathBuf::from));
        let format = match (self.format, get("format")) {
            (Some(f), _) => f,
            (None, Some(v)) => parse_value("format", v)?,
            (None, None) => Format::Json,
        };
        let sequential = self.sequential
            || match get("sequential") {
                None => false,
                Some(v) => v.parse().map_err(|_| ConfigError::Value { key: "sequential", message: format!("expected true or false, got {v:?}") })?,
            };

        Ok(RunConfig { spec, order, axes, samples, tol, output, format, sequential })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_lines() {
        let m = parse_config_file("# run\nfamily = h\nfunction = \"t^3\"\ngrid = t=1:2:3\ngrid = x=0:0:1\n").unwrap();
        assert_eq!(m["family"], vec!["h"]);
        assert_eq!(m["function"], vec!["t^3"]);
        assert_eq!(m["grid"].len(), 2);
        assert!(matches!(parse_config_file("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(parse_config_file("family h"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config_file("order = 1\norder = 2"), Err(ConfigError::Syntax { line: 2, .. })));
    }

    #[test]
    fn metric_text() {
        let g = parse_metric("tt = 1; xy = 1; xx = -2*t^3").unwrap();
        assert_eq!(g.component(2, 1).to_string(), "1");
        assert!(parse_metric("tq = 1").is_err());
        assert!(parse_metric("xy = 1; yx = 2").is_err());
        assert!(matches!(parse_metric("tt = 1 +"), Err(ConfigError::Expr { .. })));
    }
}
