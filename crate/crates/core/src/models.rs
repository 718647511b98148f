//! Curvature model spaces `(V, φ, A_0, ..., A_r)` at a point and their
//! normal forms.
//!
//! A model is *canonical* when, on its basis `(T, X, Y)`:
//!
//! * `φ(T, T) = φ(X, Y) = 1` and every other pairing vanishes;
//! * every `A_k` has the shape `A_k(a, b, c, d; w) = σ(a, b) σ(d, c) c_k(w)`,
//!   where `σ = T* ∧ X*` and `c_k` only sees the `T` and `X` components of
//!   its arguments (so any slot filled with `Y` gives zero).
//!
//! Both built-in families have canonical models on their adapted bases, and
//! [`null_adapted_frame`] produces one for any metric whose curvature has
//! that shape at the point. On a canonical model the remaining freedom is the
//! isometry group of `(φ, A_0)`: a null rotation ("shear") along `Y` and the
//! two signs of `T` and `X`. When rescaling is allowed (the `ψ` in the
//! semi-homogeneous condition) there is also the boost `X -> λX, Y -> Y/λ`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::geometry::{nabla_riemann_sequence, GeometryError, MetricField};
use crate::point::Point;
use crate::tensor::{Frame, Metric, TensorAtPoint, TensorError, DIM};

pub const T: usize = 0;
pub const X: usize = 1;
pub const Y: usize = 2;

/// Entries of scaled tensors below this magnitude count as zero.
pub const ZERO_TOL: f64 = 1e-9;
/// Tolerance for the canonical-shape checks, relative to tensor magnitude.
pub const SHAPE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("model is not canonicalized: {0}")]
    NotCanonical(String),
    #[error("curvature vanishes at this point (|R(T, X, X, T)| = {0:e})")]
    ZeroCurvature(f64),
    #[error("models have different orders ({0} and {1})")]
    OrderMismatch(usize, usize),
    #[error("boost parameter must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("curvature is not of the supported rank-one null type: {0}")]
    UnsupportedCurvature(String),
    #[error("normal form is not determined by the data: {0}")]
    Undetermined(String),
}

/// `(V, φ, A_0, ..., A_r)` on some basis of `V = R^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    pub phi: TensorAtPoint,
    pub a: Vec<TensorAtPoint>,
}

/// Number of `{T, X}` words of length `k`.
pub fn word_count(k: usize) -> usize {
    1 << k
}

/// The `i`-th word of length `k` in lexicographic order with `T < X`.
pub fn word(k: usize, i: usize) -> Vec<usize> {
    (0..k).map(|s| (i >> (k - 1 - s)) & 1).collect()
}

pub fn word_label(w: &[usize]) -> String {
    w.iter().map(|&c| if c == T { 'T' } else { 'X' }).collect()
}

fn count_t(w: &[usize]) -> usize {
    w.iter().filter(|&&c| c == T).count()
}

fn sigma(a: usize, b: usize) -> f64 {
    match (a, b) {
        (T, X) => 1.0,
        (X, T) => -1.0,
        _ => 0.0,
    }
}

/// The standard form of `φ`.
pub fn standard_phi() -> TensorAtPoint {
    TensorAtPoint::from_fn(0, 2, |ix| match (ix[0], ix[1]) {
        (T, T) | (X, Y) | (Y, X) => 1.0,
        _ => 0.0,
    })
}

/// `T + sY`, `X − sT − (s²/2)Y`, `Y`: the null rotation preserving `φ` and `σ`.
pub fn shear_frame(s: f64) -> Frame {
    Frame::from_columns([[1.0, 0.0, s], [-s, 1.0, -0.5 * s * s], [0.0, 0.0, 1.0]]).expect("det 1")
}

/// `T`, `λX`, `Y/λ`.
pub fn boost_frame(lambda: f64) -> Result<Frame, ModelError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ModelError::BadScale(lambda));
    }
    Ok(Frame::diagonal([1.0, lambda, 1.0 / lambda])?)
}

/// `a1 T`, `a4 X`, `a4 Y` with `a1, a4 ∈ {±1}`.
pub fn sign_frame(a1: f64, a4: f64) -> Frame {
    Frame::diagonal([a1, a4, a4]).expect("signs are nonzero")
}

impl ModelSpace {
    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    pub fn pullback(&self, frame: &Frame) -> ModelSpace {
        ModelSpace { phi: self.phi.pullback(frame), a: self.a.iter().map(|t| t.pullback(frame)).collect() }
    }

    /// Same model truncated to order `r`.
    pub fn truncate(&self, r: usize) -> ModelSpace {
        ModelSpace { phi: self.phi.clone(), a: self.a[..=r.min(self.order())].to_vec() }
    }

    /// `A_k(T, X, X, T; w)`.
    pub fn entry(&self, k: usize, w: &[usize]) -> f64 {
        let mut idx = vec![T, X, X, T];
        idx.extend_from_slice(w);
        self.a[k].get(&idx)
    }

    /// `A_0(T, X, X, T)`; its sign is `ε` and its magnitude is `ψ`.
    pub fn curvature_entry(&self) -> f64 {
        self.entry(0, &[])
    }

    /// All `c_k(w)` of order `k`, in word order.
    pub fn entries(&self, k: usize) -> Vec<f64> {
        (0..word_count(k)).map(|i| self.entry(k, &word(k, i))).collect()
    }

    /// `c_k(w) / |c_0|^{(k+2)/2}`: invariant under boosts when `w` has no `T`.
    pub fn scaled_entries(&self, k: usize) -> Vec<f64> {
        let psi = self.curvature_entry().abs();
        let s = psi.powf((k as f64 + 2.0) / 2.0);
        self.entries(k).into_iter().map(|v| v / s).collect()
    }

    /// Distance of `φ` from the standard form.
    pub fn phi_residual(&self) -> f64 {
        self.phi.max_abs_diff(&standard_phi()).expect("(0, 2)")
    }

    /// Largest deviation of `A_k` from the canonical shape built from its own
    /// `(T, X, X, T; w)` entries, relative to `max(1, |A_k|)`.
    pub fn shape_residual(&self, k: usize) -> f64 {
        let a = &self.a[k];
        let c = self.entries(k);
        let mut worst = 0.0f64;
        for (idx, v) in a.entries() {
            let w = &idx[4..];
            let expected = if w.contains(&Y) {
                0.0
            } else {
                let wi = w.iter().fold(0, |acc, &s| 2 * acc + s);
                sigma(idx[0], idx[1]) * sigma(idx[3], idx[2]) * c[wi]
            };
            worst = worst.max((v - expected).abs());
        }
        worst / a.max_abs().max(1.0)
    }

    /// Checks the canonical shape; the error names the first failing part.
    pub fn ensure_canonical(&self) -> Result<(), ModelError> {
        let phi = self.phi_residual();
        if phi > SHAPE_TOL {
            return Err(ModelError::NotCanonical(format!("φ differs from the standard form by {phi:e}")));
        }
        for k in 0..=self.order() {
            let (contra, co) = self.a[k].valence();
            if contra != 0 || co != 4 + k {
                return Err(ModelError::NotCanonical(format!("A_{k} has valence ({contra}, {co})")));
            }
            let res = self.shape_residual(k);
            if res > SHAPE_TOL {
                return Err(ModelError::NotCanonical(format!("A_{k} leaves the σ⊗σ shape by {res:e}")));
            }
        }
        Ok(())
    }
}

/// Adapted basis of `g_f`: `T = e^{-f} ∂t`, `X = λ ∂x`, `Y = ∂y / λ`.
/// On it `R(T, X, X, T) = −λ² Δ`.
pub fn adapted_basis_gf(f: &Expr, p: &Point, lambda: f64) -> Result<Frame, ModelError> {
    let fv = f.eval(p)?;
    boost_check(lambda)?;
    Ok(Frame::from_columns([[(-fv).exp(), 0.0, 0.0], [0.0, lambda, 0.0], [0.0, 0.0, 1.0 / lambda]])?)
}

/// Adapted basis of `g_h`: `T = ∂t`, `X = λ(∂x + h ∂y)`, `Y = ∂y / λ`.
/// On it `R(T, X, X, T) = λ² h''`.
pub fn adapted_basis_gh(h: &Expr, p: &Point, lambda: f64) -> Result<Frame, ModelError> {
    let hv = h.eval(p)?;
    boost_check(lambda)?;
    Ok(Frame::from_columns([[1.0, 0.0, 0.0], [0.0, lambda, lambda * hv], [0.0, 0.0, 1.0 / lambda]])?)
}

fn boost_check(lambda: f64) -> Result<(), ModelError> {
    boost_frame(lambda).map(|_| ())
}

/// Canonical basis for a metric whose curvature at the point is
/// `R = c σ⊗σ` for a 2-form `σ` with a null kernel, using only the values of
/// `g` and `R` there. Fails when the curvature is zero or of another type.
pub fn null_adapted_frame(phi: &Metric, r0: &TensorAtPoint) -> Result<Frame, ModelError> {
    const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
    let m = Matrix3::from_fn(|a, b| {
        let (i, j) = PAIRS[a];
        let (k, l) = PAIRS[b];
        r0.get(&[i, j, l, k])
    });
    let eig = SymmetricEigen::new(m);
    let (lead, &mu) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("three eigenvalues");
    if mu.abs() < ZERO_TOL {
        return Err(ModelError::ZeroCurvature(mu.abs()));
    }
    let rest = eig.eigenvalues.iter().enumerate().filter(|(i, _)| *i != lead).fold(0.0f64, |a, (_, v)| a.max(v.abs()));
    if rest > SHAPE_TOL * mu.abs() {
        return Err(ModelError::UnsupportedCurvature(format!("curvature operator has rank > 1 (ratio {:e})", rest / mu.abs())));
    }
    let s = eig.eigenvectors.column(lead);
    let y = Vector3::new(s[2], -s[1], s[0]);
    let g = phi.matrix();
    let gy = g * y;
    let nn = y.dot(&gy);
    if nn.abs() > SHAPE_TOL * g.amax().max(1.0) * y.norm_squared() {
        return Err(ModelError::UnsupportedCurvature(format!("kernel of the curvature 2-form is not null (g(Y, Y) = {nn:e})")));
    }
    // Y^⊥ is spanned by Y and one vector of positive length.
    let candidate = (0..DIM)
        .map(|i| gy.cross(&Vector3::ith(i, 1.0)))
        .map(|v| (v.dot(&(g * v)) / v.norm_squared().max(f64::MIN_POSITIVE), v))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("three candidates");
    if !(candidate.0 > ZERO_TOL) {
        return Err(ModelError::UnsupportedCurvature("no unit vector orthogonal to the null direction".into()));
    }
    let t = candidate.1 / candidate.1.dot(&(g * candidate.1)).sqrt();
    let i = (0..DIM).max_by(|a, b| gy[*a].abs().total_cmp(&gy[*b].abs())).expect("three");
    let mut w = Vector3::ith(i, 1.0 / gy[i]);
    w -= t * w.dot(&(g * t));
    let x = w - y * (0.5 * w.dot(&(g * w)));
    Ok(Frame::from_columns([t.into(), x.into(), y.into()])?)
}

/// `φ` and `∇^k R` (`k <= r`) at `p`, expressed on `frame`.
pub fn build_model(g: &MetricField, p: &Point, r: usize, frame: &Frame) -> Result<ModelSpace, ModelError> {
    let phi = g.at(p)?.to_tensor().pullback(frame);
    let a = nabla_riemann_sequence(g, p, r)?.iter().map(|t| t.pullback(frame)).collect();
    Ok(ModelSpace { phi, a })
}

/// Result of a normal-form reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm {
    /// Basis change from the input model's basis to the normal-form basis.
    pub frame: Frame,
    pub model: ModelSpace,
    /// `|A_0(T, X, X, T)|` on the normal-form basis.
    pub psi: f64,
    /// Sign of `A_0(T, X, X, T)`.
    pub epsilon: f64,
    /// `ψ^{-(k+2)/2} c_k(w)` per order, in word order.
    pub scaled: Vec<Vec<f64>>,
    /// Set when the shear could not be fixed although some entry depends on it.
    pub shear_ambiguous: bool,
}

/// Reduces a canonical model to a normal form under its isometry group.
///
/// * The shear is fixed by `A_1(T, X, X, T; X) = 0` when `A_1(..; T) ≠ 0`.
/// * With `rescale`, boosts are also used: first so that `|A_0| = 1`, then
///   so that the first nonzero scaled entry whose word contains `T` has
///   magnitude 1.
/// * Signs of `T` and `X` make the first sign-sensitive entries positive.
///
/// Two models with the same `r` are isomorphic (up to a positive rescaling
/// `ψ^{(k+2)/2}` per order when `rescale` is set) iff their normal forms
/// agree, provided neither reports `shear_ambiguous`.
pub fn normal_form(model: &ModelSpace, rescale: bool) -> Result<NormalForm, ModelError> {
    model.ensure_canonical()?;
    let e = model.curvature_entry();
    if e.abs() < ZERO_TOL {
        return Err(ModelError::ZeroCurvature(e.abs()));
    }
    let mut frame = Frame::identity();
    let mut cur = model.clone();
    let apply = |frame: &mut Frame, cur: &mut ModelSpace, step: Frame| {
        *cur = cur.pullback(&step);
        *frame = frame.then(&step);
    };

    if rescale {
        apply(&mut frame, &mut cur, boost_frame(e.abs().powf(-0.5))?);
    }

    let r = cur.order();
    let mut shear_ambiguous = false;
    if r >= 1 {
        let s1 = cur.scaled_entries(1);
        if s1[0].abs() > ZERO_TOL {
            let s = cur.entry(1, &[X]) / cur.entry(1, &[T]);
            apply(&mut frame, &mut cur, shear_frame(s));
        } else {
            shear_ambiguous = (2..=r).any(|k| {
                cur.scaled_entries(k).iter().enumerate().any(|(i, v)| v.abs() > ZERO_TOL && count_t(&word(k, i)) > 0)
            });
        }
    }

    if rescale {
        let first_t = (1..=r).find_map(|k| {
            cur.scaled_entries(k)
                .into_iter()
                .enumerate()
                .find(|(i, v)| v.abs() > ZERO_TOL && count_t(&word(k, *i)) > 0)
                .map(|(i, v)| (count_t(&word(k, i)), v))
        });
        if let Some((nt, v)) = first_t {
            apply(&mut frame, &mut cur, boost_frame(v.abs().powf(1.0 / nt as f64))?);
        }
    }

    let (a1, a4) = choose_signs(&cur);
    apply(&mut frame, &mut cur, sign_frame(a1, a4));

    let c0 = cur.curvature_entry();
    let scaled = (0..=r).map(|k| cur.scaled_entries(k)).collect();
    Ok(NormalForm { frame, model: cur, psi: c0.abs(), epsilon: c0.signum(), scaled, shear_ambiguous })
}

/// Signs `(a1, a4)` for `T -> a1 T`, `X -> a4 X`, `Y -> a4 Y`. Entry `c_k(w)`
/// picks up `a1^{#T} a4^{#X}`; walking entries in order, each undetermined
/// parity is fixed to make the entry positive.
fn choose_signs(m: &ModelSpace) -> (f64, f64) {
    let mut a1: Option<f64> = None;
    let mut a4: Option<f64> = None;
    let mut product: Option<f64> = None;
    for k in 1..=m.order() {
        for (i, v) in m.scaled_entries(k).into_iter().enumerate() {
            if v.abs() <= ZERO_TOL {
                continue;
            }
            let w = word(k, i);
            let nt = count_t(&w) % 2;
            let nx = (w.len() - count_t(&w)) % 2;
            let sg = v.signum();
            match (nt, nx) {
                (1, 0) if a1.is_none() => {
                    a1 = Some(sg);
                    if let (Some(p), None) = (product, a4) {
                        a4 = Some(p * sg);
                    }
                }
                (0, 1) if a4.is_none() => {
                    a4 = Some(sg);
                    if let (Some(p), None) = (product, a1) {
                        a1 = Some(p * sg);
                    }
                }
                (1, 1) => match (a1, a4) {
                    (None, None) if product.is_none() => product = Some(sg),
                    (Some(a), None) => a4 = Some(sg * a),
                    (None, Some(b)) => a1 = Some(sg * b),
                    _ => {}
                },
                _ => {}
            }
        }
    }
    match (a1, a4) {
        (Some(a), Some(b)) => (a, b),
        (Some(a), None) => (a, product.map_or(1.0, |p| p * a)),
        (None, Some(b)) => (product.map_or(1.0, |p| p * b), b),
        (None, None) => (1.0, product.unwrap_or(1.0)),
    }
}

fn model_distance(a: &ModelSpace, b: &ModelSpace) -> f64 {
    let phi = a.phi.max_abs_diff(&b.phi).unwrap_or(f64::INFINITY);
    a.a.iter().zip(&b.a).fold(phi, |m, (x, y)| {
        let scale = x.max_abs().max(y.max_abs()).max(1.0);
        m.max(x.max_abs_diff(y).map_or(f64::INFINITY, |d| d / scale))
    })
}

/// Frame `F` with `F*(m2) = m1` (so `F` maps the basis of `m1` to vectors
/// realising the same model in `m2`), or `None` if the models differ.
pub fn find_isomorphism(m1: &ModelSpace, m2: &ModelSpace, tol: f64) -> Result<Option<Frame>, ModelError> {
    if m1.order() != m2.order() {
        return Err(ModelError::OrderMismatch(m1.order(), m2.order()));
    }
    let n1 = normal_form(m1, false)?;
    let n2 = normal_form(m2, false)?;
    if n1.shear_ambiguous || n2.shear_ambiguous {
        return Err(ModelError::Undetermined("shear not fixed by the first-order entries".into()));
    }
    if model_distance(&n1.model, &n2.model) > tol {
        return Ok(None);
    }
    let f = n2.frame.then(&n1.frame.inverse());
    Ok((model_distance(&m2.pullback(&f), m1) <= tol).then_some(f))
}

/// Outcome of one of the explicit isomorphism criteria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoCheck {
    /// `F*` preserves every tensor of the model (within tolerance).
    pub accepted: bool,
    /// Largest deviation `|F*(·) − ·|` over `φ` and the `A_k` checked.
    pub residual: f64,
    /// Frame entries `[a1, ..., a6]` (see [`frame_params`]); `None` if `F`
    /// has a nonzero entry outside that pattern.
    pub params: Option<[f64; 6]>,
    /// Closed-form constraints on the parameters, with their residuals.
    pub constraints: Vec<(String, f64)>,
    pub constraints_hold: bool,
}

/// Reads `FT = a1 T + a2 Y`, `FX = a3 T + a4 X + a5 Y`, `FY = a6 Y`.
pub fn frame_params(f: &Frame, tol: f64) -> Option<[f64; 6]> {
    let m = f.matrix();
    let off = [m[(X, T)], m[(T, Y)], m[(X, Y)]];
    off.iter().all(|v| v.abs() <= tol).then(|| [m[(T, T)], m[(Y, T)], m[(T, X)], m[(X, X)], m[(Y, X)], m[(Y, Y)]])
}

fn iso_check(f: &Frame, model: &ModelSpace, upto: usize, tol: f64, constraints: impl Fn(&[f64; 6]) -> Vec<(String, f64)>) -> IsoCheck {
    let m = model.truncate(upto);
    let residual = model_distance(&m.pullback(f), &m);
    let params = frame_params(f, tol);
    let constraints = params.as_ref().map(&constraints).unwrap_or_default();
    let constraints_hold = params.is_some() && constraints.iter().all(|(_, r)| r.abs() <= tol);
    IsoCheck { accepted: residual <= tol, residual, params, constraints, constraints_hold }
}

/// Whether `F` is an isomorphism of `(V, φ, A_0)` for a canonical model.
///
/// The isometries are exactly the frames with `a1, a4 ∈ {±1}`, `a6 = a4`,
/// `a1 a3 + a2 a4 = 0` and `a3² + 2 a4 a5 = 0`: the sign changes composed
/// with the shear along `Y`.
pub fn check_iso_lemma32(f: &Frame, model: &ModelSpace, tol: f64) -> Result<IsoCheck, ModelError> {
    model.truncate(0).ensure_canonical()?;
    Ok(iso_check(f, model, 0, tol, |p| {
        let [a1, a2, a3, a4, a5, a6] = *p;
        vec![
            ("a1^2 = 1".into(), a1 * a1 - 1.0),
            ("a4^2 = 1".into(), a4 * a4 - 1.0),
            ("a6 = a4".into(), a6 - a4),
            ("a1 a3 + a2 a4 = 0".into(), a1 * a3 + a2 * a4),
            ("a3^2 + 2 a4 a5 = 0".into(), a3 * a3 + 2.0 * a4 * a5),
        ]
    }))
}

/// Whether `F` is an isomorphism of `(V, φ, A_0, A_1)` for a canonical model
/// with `A_1(T, X, X, T; T) ≠ 0` and `A_1(T, X, X, T; X) = 0`. The group is
/// `{id, diag(1, −1, −1)}`.
pub fn check_iso_lemma42(f: &Frame, model: &ModelSpace, tol: f64) -> Result<IsoCheck, ModelError> {
    if model.order() < 1 {
        return Err(ModelError::NotCanonical("a first-order model is required".into()));
    }
    model.truncate(1).ensure_canonical()?;
    let (ct, cx) = (model.entry(1, &[T]), model.entry(1, &[X]));
    if ct.abs() <= ZERO_TOL || cx.abs() > ZERO_TOL * ct.abs().max(1.0) {
        return Err(ModelError::NotCanonical(format!("expected A_1(T, X, X, T; T) ≠ 0 and (..; X) = 0, got {ct:e} and {cx:e}")));
    }
    Ok(iso_check(f, model, 1, tol, |p| {
        let [a1, a2, a3, a4, a5, a6] = *p;
        vec![
            ("a1 = 1".into(), a1 - 1.0),
            ("a2 = 0".into(), a2),
            ("a3 = 0".into(), a3),
            ("a4^2 = 1".into(), a4 * a4 - 1.0),
            ("a5 = 0".into(), a5),
            ("a6 = a4".into(), a6 - a4),
        ]
    }))
}
