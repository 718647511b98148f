//! Finite-sample evidence for curvature homogeneity.
//!
//! Each sample point gets a canonical model (family adapted basis, or the
//! generic null frame for custom metrics) and two normal forms of it:
//!
//! * strict: `|A_0| = 1`, shear and signs fixed. Constancy of its entries up
//!   to order `k` is the evidence for `CH_k`.
//! * rescaled: additionally boosted so the first `T`-dependent entry has unit
//!   scaled magnitude, with every order-`k` entry divided by `ψ^{(k+2)/2}`.
//!   Constancy is the evidence for `SCH_k(1,3)`; constancy of the zero/sign
//!   pattern alone is the evidence for `CH_k(1,3)`.
//!
//! "Constant" means a relative spread `(max − min) / max(|median|, floor)`
//! below the tolerance.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::families::{delta_derivatives, derivatives_1d, gf_metric, gh_metric, Family, FamilyError, FamilySpec};
use crate::geometry::{riemann, GeometryError, MetricField};
use crate::jets::MAX_ORDER;
use crate::models::{
    adapted_basis_gf, adapted_basis_gh, boost_frame, build_model, normal_form, null_adapted_frame, word, word_count,
    word_label, ModelError, ModelSpace, T, X, ZERO_TOL,
};
use crate::point::{Coord, Point};
use crate::tensor::Frame;

/// Points where `|Δ|` or `|h''|` falls below this are outside the hypotheses.
pub const HYPOTHESIS_FLOOR: f64 = 1e-8;
/// Denominator floor of the relative spread.
pub const SPREAD_FLOOR: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("sample set is empty")]
    EmptySamples,
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("order {0} is too large (at most {max})", max = MAX_ORDER - 2)]
    OrderTooLarge(usize),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("hypothesis violated: {quantity} = {value:e} is too close to zero")]
    HypothesisViolated { quantity: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One axis of a sample grid: `count` evenly spaced values in `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridAxis {
    pub coord: Coord,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(coord: Coord, min: f64, max: f64, count: usize) -> Result<Self, ClassifyError> {
        if count == 0 {
            return Err(ClassifyError::Grid(format!("{coord}: count must be at least 1")));
        }
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(ClassifyError::Grid(format!("{coord}: need finite min <= max, got {min} and {max}")));
        }
        if count == 1 && min != max {
            return Err(ClassifyError::Grid(format!("{coord}: a single sample needs min = max")));
        }
        Ok(GridAxis { coord, min, max, count })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 }).collect()
    }
}

impl FromStr for GridAxis {
    type Err = ClassifyError;

    /// `coord=min:max:count`, e.g. `x=0:1:9`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ClassifyError::Grid(format!("expected coord=min:max:count, got {s:?}"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let coord = Coord::from_name(name.trim()).ok_or_else(|| ClassifyError::Grid(format!("unknown coordinate {:?}", name.trim())))?;
        let parts: Vec<&str> = range.split(':').map(str::trim).collect();
        let [min, max, count] = parts[..] else { return Err(bad()) };
        let min = min.parse().map_err(|_| bad())?;
        let max = max.parse().map_err(|_| bad())?;
        let count = count.parse().map_err(|_| bad())?;
        GridAxis::new(coord, min, max, count)
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.coord, self.min, self.max, self.count)
    }
}

/// Sample points, sorted lexicographically by `(t, x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    points: Vec<Point>,
}

impl SampleSet {
    /// Cartesian product of the axes; coordinates without an axis are 0.
    pub fn grid(axes: &[GridAxis]) -> Result<Self, ClassifyError> {
        let mut per: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        let mut seen = [false; 3];
        for a in axes {
            let i = a.coord.index();
            if seen[i] {
                return Err(ClassifyError::Grid(format!("{} given more than once", a.coord)));
            }
            seen[i] = true;
            per[i] = a.values();
        }
        let mut points = Vec::with_capacity(per.iter().map(Vec::len).product());
        for &t in &per[0] {
            for &x in &per[1] {
                for &y in &per[2] {
                    points.push(Point::new(t, x, y));
                }
            }
        }
        SampleSet::from_points(points)
    }

    pub fn from_points(mut points: Vec<Point>) -> Result<Self, ClassifyError> {
        if points.is_empty() {
            return Err(ClassifyError::EmptySamples);
        }
        if points.iter().any(|p| !p.coords().iter().all(|v| v.is_finite())) {
            return Err(ClassifyError::Grid("sample points must be finite".into()));
        }
        points.sort_by(|a, b| a.coords().partial_cmp(&b.coords()).expect("finite"));
        points.dedup();
        Ok(SampleSet { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How sample points are processed. `Parallel` is sequential when the crate
/// is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over the points, preserving order.
pub fn map_points<R: Send>(points: &[Point], exec: Execution, f: impl Fn(&Point) -> R + Sync + Send) -> Vec<R> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            points.par_iter().map(f).collect()
        }
        _ => points.iter().map(f).collect(),
    }
}

/// Relative spread `(max − min) / max(|median|, SPREAD_FLOOR)`; 0 when empty.
pub fn relative_spread(values: &[f64]) -> f64 {
    Summary::of(values).map_or(0.0, |s| s.spread)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub spread: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let (min, max) = (v[0], v[n - 1]);
        let spread = (max - min) / median.abs().max(SPREAD_FLOOR);
        Some(Summary { count: n, min, max, median, spread })
    }

    pub fn is_constant(&self, tol: f64) -> bool {
        self.spread < tol
    }
}

// ---------------------------------------------------------------------------
// Family invariants

fn nonvanishing(quantity: &'static str, value: f64) -> Result<(), InvariantError> {
    if value.abs() < HYPOTHESIS_FLOOR || !value.is_finite() {
        return Err(InvariantError::HypothesisViolated { quantity, value });
    }
    Ok(())
}

/// `∇R(T, X, X, T; X)` squared on the `λ = 1` adapted basis of `g_f`; this
/// is `(Δ')²`.
pub fn invariant_xi_f(f: &Expr, p: &Point) -> Result<f64, InvariantError> {
    let d = delta_derivatives(f, p, 0)?;
    nonvanishing("Δ", d[0])?;
    let m = build_model(&gf_metric(f)?, p, 1, &adapted_basis_gf(f, p, 1.0)?)?;
    Ok(m.entry(1, &[X]).powi(2))
}

/// `∇R(T, X, X, T; X)² / R(T, X, X, T)³ = (Δ')² / (−Δ)³`, independent of
/// the boost.
pub fn invariant_ratio_f(f: &Expr, p: &Point) -> Result<f64, InvariantError> {
    let d = delta_derivatives(f, p, 0)?;
    nonvanishing("Δ", d[0])?;
    let m = build_model(&gf_metric(f)?, p, 1, &adapted_basis_gf(f, p, 1.0)?)?;
    Ok(m.entry(1, &[X]).powi(2) / m.curvature_entry().powi(3))
}

/// `∇R(T, X, X, T; T)²` on the basis with `|R(T, X, X, T)| = 1`; this is
/// `(h'''/h'')²`.
pub fn invariant_xi_h(h: &Expr, p: &Point) -> Result<f64, InvariantError> {
    let d = derivatives_1d(h, Coord::T, p, 2)?;
    nonvanishing("h''", d[2])?;
    let m = build_model(&gh_metric(h)?, p, 1, &adapted_basis_gh(h, p, d[2].abs().powf(-0.5))?)?;
    Ok(m.entry(1, &[T]).powi(2))
}

/// Second-order data of `g_h` on the `ψ` basis `λ² = (h''')² / |h''|³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiTx {
    pub lambda_sq: f64,
    /// `(h''')² / (h'')²`.
    pub psi: f64,
    /// `R(T, X, X, T)` on the `ψ` basis; equals `sgn(h'') ψ`.
    pub r_entry: f64,
    /// `∇R(T, X, X, T; T)` on the `ψ` basis; equals `sgn(h''') ψ^{3/2}`.
    pub nabla_entry: f64,
    /// `∇²R(T, X, X, T; T, T) / ψ² = h'''' h'' / (h''')²`.
    pub xi_t: f64,
    /// `∇²R(T, X, X, T; X, X) / ψ² = −h' h''' / (h'')²`.
    pub xi_x: f64,
    /// The alternative expression `h'''' / (h'')²`, not an invariant.
    pub xi_t_alt: f64,
}

pub fn invariants_xi_tx(h: &Expr, p: &Point) -> Result<XiTx, InvariantError> {
    let d = derivatives_1d(h, Coord::T, p, 4)?;
    nonvanishing("h''", d[2])?;
    nonvanishing("h'''", d[3])?;
    let lambda_sq = d[3].powi(2) / d[2].abs().powi(3);
    let m = build_model(&gh_metric(h)?, p, 2, &adapted_basis_gh(h, p, lambda_sq.sqrt())?)?;
    let r_entry = m.curvature_entry();
    let psi = r_entry.abs();
    Ok(XiTx {
        lambda_sq,
        psi,
        r_entry,
        nabla_entry: m.entry(1, &[T]),
        xi_t: m.entry(2, &[T, T]) / psi.powi(2),
        xi_x: m.entry(2, &[X, X]) / psi.powi(2),
        xi_t_alt: d[4] / d[2].powi(2),
    })
}

// ---------------------------------------------------------------------------
// Per-point analysis

/// Normal-form data at one sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    pub point: Point,
    pub epsilon: f64,
    pub psi: f64,
    /// Strict normal form entries `c_k(w)` (with `|c_0| = 1`).
    pub strict: Vec<Vec<f64>>,
    /// Rescaled normal form entries `c_k(w) / ψ^{(k+2)/2}`.
    pub scaled: Vec<Vec<f64>>,
    pub shear_ambiguous: bool,
}

/// Why a point was left out of the verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub point: Point,
    pub reason: String,
    pub zero_curvature: bool,
}

fn canonical_frame(spec: &FamilySpec, g: &MetricField, p: &Point) -> Result<Frame, InvariantError> {
    match spec {
        FamilySpec::F(f) => {
            nonvanishing("Δ", delta_derivatives(f, p, 0)?[0])?;
            Ok(adapted_basis_gf(f, p, 1.0)?)
        }
        FamilySpec::H(h) => {
            nonvanishing("h''", derivatives_1d(h, Coord::T, p, 2)?[2])?;
            Ok(adapted_basis_gh(h, p, 1.0)?)
        }
        FamilySpec::Custom(_) => Ok(null_adapted_frame(&g.at(p)?, &riemann(g, p)?)?),
    }
}

/// Canonical model of order `r` at `p`.
pub fn canonical_model(spec: &FamilySpec, p: &Point, r: usize) -> Result<ModelSpace, InvariantError> {
    let g = spec.metric();
    let frame = canonical_frame(spec, &g, p)?;
    Ok(build_model(&g, p, r, &frame)?)
}

pub fn analyze_point(spec: &FamilySpec, p: &Point, r: usize) -> Result<PointData, InvariantError> {
    let model = canonical_model(spec, p, r)?;
    let e = model.curvature_entry();
    if e.abs() < HYPOTHESIS_FLOOR {
        return Err(ModelError::ZeroCurvature(e.abs()).into());
    }
    let unit = model.pullback(&boost_frame(e.abs().powf(-0.5))?);
    let strict = normal_form(&unit, false)?;
    let rescaled = normal_form(&model, true)?;
    let entries = |m: &ModelSpace| (0..=r).map(|k| m.entries(k)).collect();
    Ok(PointData {
        point: *p,
        epsilon: rescaled.epsilon,
        psi: rescaled.psi,
        strict: entries(&strict.model),
        scaled: rescaled.scaled,
        shear_ambiguous: strict.shear_ambiguous || rescaled.shear_ambiguous,
    })
}

fn exclusion(p: &Point, err: &InvariantError) -> Exclusion {
    // For both families the hypothesis quantity is the curvature itself.
    let zero_curvature = matches!(
        err,
        InvariantError::Model(ModelError::ZeroCurvature(_))
            | InvariantError::HypothesisViolated { quantity: "Δ" | "h''", .. }
    );
    Exclusion { point: *p, reason: err.to_string(), zero_curvature }
}

// ---------------------------------------------------------------------------
// Report

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// More than half of the samples violate the hypotheses.
    HypothesisViolated,
    /// The samples are consistent with the property but cannot prove it.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub quantity: String,
    pub summary: Option<Summary>,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub property: String,
    pub order: usize,
    pub status: Status,
    pub evidence: Vec<Evidence>,
    pub notes: Vec<String>,
}

/// Values of one invariant at every sample point (`None` where excluded).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantSeries {
    pub name: String,
    pub summary: Option<Summary>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub family: Family,
    pub function: Option<String>,
    pub order: usize,
    pub tol: f64,
    pub samples: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub config: ReportConfig,
    pub verdicts: Vec<Verdict>,
    pub invariants: Vec<InvariantSeries>,
    pub exclusions: Vec<Exclusion>,
    pub degenerate: Option<String>,
    pub notes: Vec<String>,
    pub tool_version: String,
}

impl HomogeneityReport {
    pub fn verdict(&self, property: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.property == property)
    }

    pub fn invariant(&self, name: &str) -> Option<&InvariantSeries> {
        self.invariants.iter().find(|s| s.name == name)
    }

    /// True when every sample point was excluded for a reason other than
    /// vanishing curvature.
    pub fn all_points_violate_hypotheses(&self) -> bool {
        self.exclusions.len() == self.config.samples.len() && self.degenerate.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub order: usize,
    pub tol: f64,
    pub execution: Execution,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { order: 1, tol: DEFAULT_TOL, execution: Execution::Parallel }
    }
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn series(name: impl Into<String>, values: Vec<Option<f64>>) -> InvariantSeries {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    InvariantSeries { name: name.into(), summary: Summary::of(&present), values }
}

fn evidence(s: &InvariantSeries, tol: f64) -> Evidence {
    Evidence { quantity: s.name.clone(), summary: s.summary, constant: s.summary.is_none_or(|x| x.is_constant(tol)) }
}

fn sign_class(v: f64) -> i8 {
    if v.abs() <= ZERO_TOL {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Family invariants at each point, keyed by name (in output order).
fn family_invariants(spec: &FamilySpec, points: &[Point], exec: Execution) -> Vec<InvariantSeries> {
    match spec {
        FamilySpec::F(f) => {
            let rows = map_points(points, exec, |p| (invariant_xi_f(f, p).ok(), invariant_ratio_f(f, p).ok()));
            vec![series("Xi_f", rows.iter().map(|r| r.0).collect()), series("ratio_f", rows.iter().map(|r| r.1).collect())]
        }
        FamilySpec::H(h) => {
            let rows = map_points(points, exec, |p| (invariant_xi_h(h, p).ok(), invariants_xi_tx(h, p).ok()));
            vec![
                series("Xi_h", rows.iter().map(|r| r.0).collect()),
                series("xi_T", rows.iter().map(|r| r.1.map(|x| x.xi_t)).collect()),
                series("xi_X", rows.iter().map(|r| r.1.map(|x| x.xi_x)).collect()),
            ]
        }
        FamilySpec::Custom(_) => Vec::new(),
    }
}

/// Runs the per-point analysis and assembles verdicts.
pub fn classify(spec: &FamilySpec, samples: &SampleSet, opts: ClassifyOptions) -> Result<HomogeneityReport, ClassifyError> {
    let r = opts.order;
    if r + 2 > MAX_ORDER {
        return Err(ClassifyError::OrderTooLarge(r));
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(ClassifyError::Tolerance(opts.tol));
    }
    if samples.is_empty() {
        return Err(ClassifyError::EmptySamples);
    }
    let points = samples.points();
    let n = points.len();
    let analysed = map_points(points, opts.execution, |p| analyze_point(spec, p, r));

    let mut exclusions = Vec::new();
    let mut data: Vec<Option<&PointData>> = Vec::with_capacity(n);
    for (p, a) in points.iter().zip(&analysed) {
        match a {
            Ok(d) => data.push(Some(d)),
            Err(e) => {
                exclusions.push(exclusion(p, e));
                data.push(None);
            }
        }
    }
    let included: Vec<&PointData> = data.iter().flatten().copied().collect();
    let degenerate = (exclusions.len() == n && exclusions.iter().all(|e| e.zero_curvature))
        .then(|| "degenerate: zero curvature".to_string());
    let violated = degenerate.is_none() && 2 * exclusions.len() > n;

    let per_point = |f: &dyn Fn(&PointData) -> f64| data.iter().map(|d| d.map(f)).collect::<Vec<_>>();
    let mut invariants = vec![series("epsilon", per_point(&|d| d.epsilon)), series("psi", per_point(&|d| d.psi))];
    invariants.extend(family_invariants(spec, points, opts.execution));
    let strict_series: Vec<Vec<InvariantSeries>> = (0..=r)
        .map(|k| {
            (0..word_count(k))
                .map(|i| series(format!("C{k}[{}]", word_label(&word(k, i))), per_point(&|d| d.strict[k][i])))
                .collect()
        })
        .collect();
    let scaled_series: Vec<Vec<InvariantSeries>> = (0..=r)
        .map(|k| {
            (0..word_count(k))
                .map(|i| series(format!("N{k}[{}]", word_label(&word(k, i))), per_point(&|d| d.scaled[k][i])))
                .collect()
        })
        .collect();

    let tol = opts.tol;
    let eps_const = included.windows(2).all(|w| w[0].epsilon == w[1].epsilon);
    let sign_pattern_const = |k: usize| {
        included.windows(2).all(|w| {
            w[0].scaled[k].iter().map(|v| sign_class(*v)).eq(w[1].scaled[k].iter().map(|v| sign_class(*v)))
        })
    };
    let ambiguous = included.iter().any(|d| d.shear_ambiguous);
    let family_series = |name: &str| invariants.iter().find(|s| s.name == name).map(|s| evidence(s, tol));

    let mut verdicts = Vec::new();
    let status_of = |ok: bool| if violated { Status::HypothesisViolated } else if ok { Status::Pass } else { Status::Fail };

    let eps_series = &invariants[0];
    verdicts.push(Verdict {
        property: "CH_0".into(),
        order: 0,
        status: status_of(eps_const),
        evidence: vec![evidence(eps_series, tol)],
        notes: Vec::new(),
    });

    let mut ch_ok = eps_const;
    let mut ch13_ok = eps_const;
    let mut sch_ok = eps_const;
    for k in 1..=r {
        let strict_ev: Vec<Evidence> = strict_series[k].iter().map(|s| evidence(s, tol)).collect();
        let scaled_ev: Vec<Evidence> = scaled_series[k].iter().map(|s| evidence(s, tol)).collect();
        ch_ok &= strict_ev.iter().all(|e| e.constant);
        ch13_ok &= sign_pattern_const(k);
        sch_ok &= scaled_ev.iter().all(|e| e.constant);

        let mut ch = Verdict { property: format!("CH_{k}"), order: k, status: status_of(ch_ok), evidence: strict_ev, notes: Vec::new() };
        let ch13 = Verdict {
            property: format!("CH_{k}(1,3)"),
            order: k,
            status: status_of(ch13_ok),
            evidence: Vec::new(),
            notes: vec![format!("zero/sign pattern of the order-{k} scaled entries is {}constant", if sign_pattern_const(k) { "" } else { "not " })],
        };
        let mut sch =
            Verdict { property: format!("SCH_{k}(1,3)"), order: k, status: status_of(sch_ok), evidence: scaled_ev, notes: Vec::new() };

        if k == 1 {
            for name in ["Xi_f", "ratio_f", "Xi_h"] {
                if let Some(ev) = family_series(name) {
                    ch.evidence.push(ev);
                }
            }
            if let Some(ev) = family_series("ratio_f") {
                sch.evidence.push(ev);
            }
        }
        if k == 2 {
            for name in ["xi_T", "xi_X"] {
                if let Some(ev) = family_series(name) {
                    sch.evidence.push(ev);
                }
            }
        }
        if ambiguous && !violated {
            for v in [&mut ch, &mut sch] {
                if v.status == Status::Pass {
                    v.status = Status::Undecided;
                }
                v.notes.push("shear of the null frame is not fixed by the first-order entries at some points".into());
            }
        }
        // CH_k implies SCH_k(1,3), which implies CH_k(1,3).
        if sch.status == Status::Pass && ch13.status == Status::Fail {
            sch.status = Status::Fail;
            sch.notes.push(format!("downgraded: inconsistent with the CH_{k}(1,3) verdict"));
        }
        if ch.status == Status::Pass && sch.status == Status::Fail {
            ch.status = Status::Fail;
            ch.notes.push(format!("downgraded: inconsistent with the SCH_{k}(1,3) verdict"));
        }
        verdicts.extend([ch, ch13, sch]);
    }

    let mut notes = Vec::new();
    if spec.family() == Family::H && r >= 2 {
        let sch2 = verdicts.iter().find(|v| v.property == "SCH_2(1,3)").map(|v| v.status);
        let ch1 = verdicts.iter().find(|v| v.property == "CH_1").map(|v| v.status);
        if sch2 == Some(Status::Pass) && ch1 == Some(Status::Fail) {
            notes.push("SCH_2 would contradict non-CH_1 if SCH_2 implied CH_2 for this family; the order-2 scaled entries are constant while Xi_h is not".into());
        }
    }

    let first_fail = verdicts.iter().find(|v| v.property.starts_with("CH_") && !v.property.contains('(') && v.status == Status::Fail);
    let lh_status = if violated {
        Status::HypothesisViolated
    } else if first_fail.is_some() {
        Status::Fail
    } else {
        Status::Undecided
    };
    let mut lh_notes = Vec::new();
    if let Some(v) = first_fail {
        lh_notes.push(format!("not locally homogeneous: {} fails", v.property));
    } else if !violated {
        lh_notes.push(format!("all sampled invariants up to order {r} are constant; this is consistent with local homogeneity but does not prove it"));
    }
    let lh_evidence = ["Xi_f", "ratio_f", "Xi_h"].iter().filter_map(|n| family_series(n)).collect();
    verdicts.push(Verdict { property: "locally_homogeneous".into(), order: r, status: lh_status, evidence: lh_evidence, notes: lh_notes });

    invariants.extend(strict_series.into_iter().flatten());
    invariants.extend(scaled_series.into_iter().flatten());
    if let Some(msg) = &degenerate {
        for v in &mut verdicts {
            v.status = Status::Pass;
            v.notes.push(format!("vacuous: {msg}"));
        }
        for s in &mut invariants {
            s.values = vec![Some(0.0); n];
            s.summary = Summary::of(&vec![0.0; n]);
        }
    }

    Ok(HomogeneityReport {
        config: ReportConfig {
            family: spec.family(),
            function: spec.function().map(|e| e.to_string()),
            order: r,
            tol,
            samples: points.to_vec(),
        },
        verdicts,
        invariants,
        exclusions,
        degenerate,
        notes,
        tool_version: TOOL_VERSION.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Invariant table

/// One row per sample point; `values` follows `columns`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantRow {
    pub point: Point,
    pub values: Vec<Option<f64>>,
    /// Why some invariants are missing at this point.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantTable {
    pub columns: Vec<String>,
    pub rows: Vec<InvariantRow>,
}

impl InvariantTable {
    pub fn all_rows_excluded(&self) -> bool {
        self.rows.iter().all(|r| r.excluded.is_some())
    }
}

fn table_row(spec: &FamilySpec, p: &Point, order: usize) -> InvariantRow {
    let err = |e: &InvariantError| e.to_string();
    let (values, excluded) = match spec {
        FamilySpec::F(f) => {
            let d = delta_derivatives(f, p, 1).ok();
            let xi = invariant_xi_f(f, p);
            let ratio = invariant_ratio_f(f, p);
            let excluded = xi.as_ref().err().or(ratio.as_ref().err()).map(err);
            (vec![d.as_ref().map(|d| d[0]), d.as_ref().map(|d| d[1]), xi.ok(), ratio.ok()], excluded)
        }
        FamilySpec::H(h) => {
            let d = derivatives_1d(h, Coord::T, p, 4).ok();
            let xi = invariant_xi_h(h, p);
            let tx = invariants_xi_tx(h, p);
            let excluded = xi.as_ref().err().or(tx.as_ref().err()).map(err);
            let tx = tx.ok();
            let mut v: Vec<Option<f64>> = (1..=4).map(|k| d.as_ref().map(|d| d[k])).collect();
            v.push(xi.ok());
            v.extend([tx.map(|x| x.xi_t), tx.map(|x| x.xi_x), tx.map(|x| x.xi_t_alt), tx.map(|x| x.psi), tx.map(|x| x.lambda_sq)]);
            (v, excluded)
        }
        FamilySpec::Custom(_) => match analyze_point(spec, p, order) {
            Ok(d) => {
                let mut v = vec![Some(d.epsilon), Some(d.psi)];
                v.extend(d.scaled.iter().skip(1).flatten().map(|x| Some(*x)));
                (v, None)
            }
            Err(e) => (vec![None; custom_columns(order).len()], Some(e.to_string())),
        },
    };
    InvariantRow { point: *p, values, excluded }
}

fn custom_columns(order: usize) -> Vec<String> {
    let mut c = vec!["epsilon".to_string(), "psi".to_string()];
    for k in 1..=order {
        c.extend((0..word_count(k)).map(|i| format!("N{k}[{}]", word_label(&word(k, i)))));
    }
    c
}

/// Raw derivatives and invariants at every sample point. `order` only
/// matters for custom metrics, whose columns are the rescaled normal-form
/// entries up to that order.
pub fn invariant_table(spec: &FamilySpec, samples: &SampleSet, order: usize, exec: Execution) -> Result<InvariantTable, ClassifyError> {
    if order + 2 > MAX_ORDER {
        return Err(ClassifyError::OrderTooLarge(order));
    }
    let columns: Vec<String> = match spec {
        FamilySpec::F(_) => ["delta", "delta_1", "Xi_f", "ratio_f"].map(String::from).to_vec(),
        FamilySpec::H(_) => ["h_1", "h_2", "h_3", "h_4", "Xi_h", "xi_T", "xi_X", "xi_T_alt", "psi", "lambda_sq"]
            .map(String::from)
            .to_vec(),
        FamilySpec::Custom(_) => custom_columns(order),
    };
    let rows = map_points(samples.points(), exec, |p| table_row(spec, p, order));
    Ok(InvariantTable { columns, rows })
}
