//! The two built-in metric families on R^3 and their closed-form curvature.
//!
//! * `g_f`: `g(∂t, ∂t) = e^{2f}`, `g(∂x, ∂y) = 1`, with `f = f(x)`.
//! * `g_h`: `g(∂t, ∂t) = g(∂x, ∂y) = 1`, `g(∂x, ∂x) = −2h`, with `h = h(t)`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::geometry::MetricField;
use crate::jets::{Dd, Jet, Scalar};
use crate::point::{Coord, Point};
use crate::tensor::TensorAtPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    F,
    H,
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::F => "f",
            Family::H => "h",
            Family::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("the {family}-family function may only depend on {allowed}, but it references {found}")]
    Variables { family: Family, allowed: Coord, found: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no closed form for the h-family beyond the second covariant derivative (asked for k = {0})")]
    NoClosedForm(usize),
}

/// A metric from one of the families, or an arbitrary symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    F(Expr),
    H(Expr),
    Custom(MetricField),
}

impl FamilySpec {
    pub fn f(f: Expr) -> Result<Self, FamilyError> {
        check_vars(&f, Family::F, Coord::X)?;
        Ok(FamilySpec::F(f))
    }

    pub fn h(h: Expr) -> Result<Self, FamilyError> {
        check_vars(&h, Family::H, Coord::T)?;
        Ok(FamilySpec::H(h))
    }

    pub fn family(&self) -> Family {
        match self {
            FamilySpec::F(_) => Family::F,
            FamilySpec::H(_) => Family::H,
            FamilySpec::Custom(_) => Family::Custom,
        }
    }

    pub fn function(&self) -> Option<&Expr> {
        match self {
            FamilySpec::F(e) | FamilySpec::H(e) => Some(e),
            FamilySpec::Custom(_) => None,
        }
    }

    pub fn metric(&self) -> MetricField {
        match self {
            FamilySpec::F(f) => gf_field(f),
            FamilySpec::H(h) => gh_field(h),
            FamilySpec::Custom(m) => m.clone(),
        }
    }
}

fn check_vars(e: &Expr, family: Family, allowed: Coord) -> Result<(), FamilyError> {
    let extra: BTreeSet<Coord> = e.variables().into_iter().filter(|c| *c != allowed).collect();
    if extra.is_empty() {
        return Ok(());
    }
    let found = extra.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ");
    Err(FamilyError::Variables { family, allowed, found })
}

fn gf_field(f: &Expr) -> MetricField {
    MetricField::from_upper(|i, j| match (i, j) {
        (0, 0) => (Expr::num(2.0) * f.clone()).exp(),
        (1, 2) => Expr::num(1.0),
        _ => Expr::num(0.0),
    })
}

fn gh_field(h: &Expr) -> MetricField {
    MetricField::from_upper(|i, j| match (i, j) {
        (0, 0) | (1, 2) => Expr::num(1.0),
        (1, 1) => Expr::num(-2.0) * h.clone(),
        _ => Expr::num(0.0),
    })
}

/// `g_f` for a function of `x` alone.
pub fn gf_metric(f: &Expr) -> Result<MetricField, FamilyError> {
    check_vars(f, Family::F, Coord::X)?;
    Ok(gf_field(f))
}

/// `g_h` for a function of `t` alone.
pub fn gh_metric(h: &Expr) -> Result<MetricField, FamilyError> {
    check_vars(h, Family::H, Coord::T)?;
    Ok(gh_field(h))
}

/// Derivatives `u, u', ..., u^(n)` of a one-variable function at `p`.
pub fn derivatives_1d(e: &Expr, c: Coord, p: &Point, n: usize) -> Result<Vec<f64>, EvalError> {
    let j = e.eval_jet(p, n)?;
    Ok((0..=n).map(|k| j.pure(c, k).expect("within order")).collect())
}

/// Jet of `Δ = f'' + (f')^2` in `x` at `p`, to order `n`.
pub fn delta_jet<S: Scalar>(f: &Expr, p: &Point, n: usize) -> Result<Jet<S>, EvalError> {
    let fj = f.eval_jet_in::<S>(p, n + 2)?;
    let d1 = fj.derivative(Coord::X).expect("order >= 1");
    let d2 = d1.derivative(Coord::X).expect("order >= 1");
    Ok(&d2 + &(&d1 * &d1))
}

/// `Δ, Δ', ..., Δ^(n)` at `p`, evaluated in double-double so that the
/// cancellation in `f'' + (f')^2` (exact for `f = log x`) leaves no residue.
pub fn delta_derivatives(f: &Expr, p: &Point, n: usize) -> Result<Vec<f64>, EvalError> {
    let d = delta_jet::<Dd>(f, p, n)?;
    Ok((0..=n).map(|k| d.pure(Coord::X, k).expect("within order").as_f64()).collect())
}

/// Writes `value` at `(a, b, c, d; w)` and its three images under the
/// curvature symmetries that swap `a <-> b` and `c <-> d`.
fn put_with_images(t: &mut TensorAtPoint, a: usize, b: usize, tail: &[usize], value: f64) {
    let mut idx = vec![a, b, b, a];
    idx.extend_from_slice(tail);
    t.set(&idx, value);
    idx[..4].copy_from_slice(&[b, a, a, b]);
    t.set(&idx, value);
    idx[..4].copy_from_slice(&[a, b, a, b]);
    t.set(&idx, -value);
    idx[..4].copy_from_slice(&[b, a, b, a]);
    t.set(&idx, -value);
}

const T: usize = 0;
const X: usize = 1;

/// Closed form of `∇^k R` for `g_f`: the only nonzero entries are the images
/// of `∇^k R(∂x, ∂t, ∂t, ∂x; ∂x, ..., ∂x) = −e^{2f} Δ^(k)`.
pub fn gf_oracle(f: &Expr, p: &Point, k: usize) -> Result<TensorAtPoint, FamilyError> {
    check_vars(f, Family::F, Coord::X)?;
    let e2f = (f.eval_jet_in::<Dd>(p, 0)?.value() * Dd::from(2.0)).exp();
    let dk = delta_jet::<Dd>(f, p, k)?.pure(Coord::X, k).expect("within order");
    let mut out = TensorAtPoint::zeros(0, 4 + k);
    put_with_images(&mut out, X, T, &vec![X; k], -(e2f * dk).as_f64());
    Ok(out)
}

/// Closed form of `∇^k R` for `g_h`, `k <= 2`:
///
/// ```text
/// R(∂t, ∂x, ∂x, ∂t)              = h''
/// ∇R(∂t, ∂x, ∂x, ∂t; ∂t)         = h'''
/// ∇²R(∂t, ∂x, ∂x, ∂t; ∂t, ∂t)    = h''''
/// ∇²R(∂t, ∂x, ∂x, ∂t; ∂x, ∂x)    = −h' h'''
/// ```
///
/// The last entry picks up its sign from `∇_{∂x}∂x = h' ∂t` acting on the
/// differentiation slot of `∇R(..; ∂x)`.
pub fn gh_oracle(h: &Expr, p: &Point, k: usize) -> Result<TensorAtPoint, FamilyError> {
    check_vars(h, Family::H, Coord::T)?;
    if k > 2 {
        return Err(FamilyError::NoClosedForm(k));
    }
    let d = derivatives_1d(h, Coord::T, p, 4)?;
    let mut out = TensorAtPoint::zeros(0, 4 + k);
    match k {
        0 => put_with_images(&mut out, T, X, &[], d[2]),
        1 => put_with_images(&mut out, T, X, &[T], d[3]),
        _ => {
            put_with_images(&mut out, T, X, &[T, T], d[4]);
            put_with_images(&mut out, T, X, &[X, X], -d[1] * d[3]);
        }
    }
    Ok(out)
}
