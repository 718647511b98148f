//! Truncated Taylor arithmetic in the three coordinates `(t, x, y)`.
//!
//! A [`Jet`] holds every partial derivative `∂t^i ∂x^j ∂y^k` of a function at a
//! fixed base point with `i + j + k <= order`. Coefficients are stored as raw
//! partial derivatives, not as Taylor coefficients; the arithmetic converts to
//! Taylor coefficients internally where that makes the product rule a plain
//! convolution.
//!
//! The scalar type is generic. `f64` is the default; [`Dd`] (double-double,
//! about 32 significant digits) is what the curvature engine runs on, since
//! high covariant derivatives cancel terms many orders of magnitude larger
//! than the result.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use thiserror::Error;

use crate::point::Coord;

/// Largest truncation order the layout tables are built for.
pub const MAX_ORDER: usize = 12;

/// Double-double scalar.
pub type Dd = qd::Quad;

/// Field the jets are built over.
pub trait Scalar:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    /// `self^p` for positive `self`.
    fn powf(self, p: f64) -> Self;

    fn zero() -> Self {
        Self::of(0.0)
    }
    fn one() -> Self {
        Self::of(1.0)
    }
    fn is_zero(self) -> bool {
        self == Self::zero()
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

impl Scalar for Dd {
    fn of(v: f64) -> Self {
        Dd::from(v)
    }
    fn as_f64(self) -> f64 {
        self.0 + self.1
    }
    fn exp(self) -> Self {
        Dd::exp(self)
    }
    fn ln(self) -> Self {
        Dd::ln(self)
    }
    fn sqrt(self) -> Self {
        Dd::sqrt(self)
    }
    fn sin_cos(self) -> (Self, Self) {
        dd_sin_cos(self)
    }
    fn powf(self, p: f64) -> Self {
        (Dd::ln(self) * Dd::from(p)).exp()
    }
}

/// Sine and cosine in double-double: reduce by multiples of `π/2`, then sum
/// both Taylor series on `|r| <= π/4`. `qd` only ships exp/log.
fn dd_sin_cos(x: Dd) -> (Dd, Dd) {
    let half_pi = qd::Quad(Dd::PI.0 / 2.0, Dd::PI.1 / 2.0);
    let k = (x.0 / half_pi.0).round();
    let r = x - half_pi * Dd::from(k);
    let r2 = r * r;
    let (mut s, mut c) = (r, Dd::from(1.0));
    let (mut ts, mut tc) = (r, Dd::from(1.0));
    for n in 1..30 {
        let n = n as f64;
        ts = -(ts * r2) / Dd::from((2.0 * n) * (2.0 * n + 1.0));
        tc = -(tc * r2) / Dd::from((2.0 * n - 1.0) * (2.0 * n));
        s += ts;
        c += tc;
        if ts.0.abs() < 1e-34 && tc.0.abs() < 1e-34 {
            break;
        }
    }
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Exponents `(i_t, i_x, i_y)` of a partial derivative.
pub type MultiIndex = [usize; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("division by a jet whose value is zero")]
    DivisionByZero,
    #[error("{op} is undefined or not differentiable at {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("multi-index {index:?} exceeds jet order {order}")]
    OrderExceeded { index: MultiIndex, order: usize },
}

struct Layout {
    indices: Vec<MultiIndex>,
    /// `i_t! * i_x! * i_y!` per index.
    factorials: Vec<f64>,
    /// `(a, b, c)` with `indices[a] + indices[b] == indices[c]`.
    products: Vec<(u32, u32, u32)>,
}

fn layouts() -> &'static [Layout] {
    static LAYOUTS: OnceLock<Vec<Layout>> = OnceLock::new();
    LAYOUTS.get_or_init(|| (0..=MAX_ORDER).map(build_layout).collect())
}

fn layout(order: usize) -> &'static Layout {
    &layouts()[order]
}

fn build_layout(order: usize) -> Layout {
    let n = simplex_len(order);
    let mut indices = vec![[0; 3]; n];
    for d in 0..=order {
        for i in (0..=d).rev() {
            for j in (0..=d - i).rev() {
                let m = [i, j, d - i - j];
                indices[offset(m)] = m;
            }
        }
    }
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let factorials = indices.iter().map(|m| m.iter().map(|&k| fact(k)).product()).collect();
    let mut products = Vec::new();
    for (a, ma) in indices.iter().enumerate() {
        let da: usize = ma.iter().sum();
        for (b, mb) in indices.iter().enumerate() {
            let db: usize = mb.iter().sum();
            if da + db <= order {
                let c = offset([ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]]);
                products.push((a as u32, b as u32, c as u32));
            }
        }
    }
    Layout { indices, factorials, products }
}

/// Number of multi-indices of total degree at most `order`.
pub fn simplex_len(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

/// Position of a multi-index in the dense simplex ordering (graded, then by
/// descending `t`, then descending `x` exponent).
fn offset(m: MultiIndex) -> usize {
    let d = m[0] + m[1] + m[2];
    let r = m[1] + m[2];
    d * (d + 1) * (d + 2) / 6 + r * (r + 1) / 2 + m[2]
}

/// Jet of a scalar function of `(t, x, y)` at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<S = f64> {
    order: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> Jet<S> {
    pub fn zero(order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet { order, coeffs: vec![S::zero(); simplex_len(order)] }
    }

    pub fn constant(value: S, order: usize) -> Self {
        let mut j = Jet::zero(order);
        j.coeffs[0] = value;
        j
    }

    /// Jet of the coordinate function `c` at a point where it takes `value`.
    pub fn variable(c: Coord, value: S, order: usize) -> Self {
        let mut j = Jet::constant(value, order);
        if order >= 1 {
            let mut m = [0; 3];
            m[c.index()] = 1;
            j.coeffs[offset(m)] = S::one();
        }
        j
    }

    /// Builds a jet from a closure giving each partial derivative.
    pub fn from_fn(order: usize, mut f: impl FnMut(MultiIndex) -> S) -> Self {
        let mut j = Jet::zero(order);
        for (c, m) in j.coeffs.iter_mut().zip(&layout(order).indices) {
            *c = f(*m);
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> S {
        self.coeffs[0]
    }

    /// The stored derivative `∂t^m0 ∂x^m1 ∂y^m2` at the base point.
    pub fn partial(&self, m: MultiIndex) -> Result<S, JetError> {
        if m.iter().sum::<usize>() > self.order {
            return Err(JetError::OrderExceeded { index: m, order: self.order });
        }
        Ok(self.coeffs[offset(m)])
    }

    /// Pure derivative of order `n` along one coordinate.
    pub fn pure(&self, c: Coord, n: usize) -> Result<S, JetError> {
        let mut m = [0; 3];
        m[c.index()] = n;
        self.partial(m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, S)> + '_ {
        layout(self.order).indices.iter().copied().zip(self.coeffs.iter().copied())
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// The same jet over another scalar type.
    pub fn convert<T: Scalar>(&self) -> Jet<T> {
        Jet { order: self.order, coeffs: self.coeffs.iter().map(|c| T::of(c.as_f64())).collect() }
    }

    pub fn truncate(&self, order: usize) -> Jet<S> {
        if order >= self.order {
            return self.clone();
        }
        Jet { order, coeffs: self.coeffs[..simplex_len(order)].to_vec() }
    }

    /// Jet of `∂_c` of the represented function; one order lower.
    pub fn derivative(&self, c: Coord) -> Result<Jet<S>, JetError> {
        if self.order == 0 {
            let mut m = [0; 3];
            m[c.index()] = 1;
            return Err(JetError::OrderExceeded { index: m, order: 0 });
        }
        let k = c.index();
        Ok(Jet::from_fn(self.order - 1, |mut m| {
            m[k] += 1;
            self.coeffs[offset(m)]
        }))
    }

    pub fn scale(&self, s: S) -> Jet<S> {
        Jet { order: self.order, coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    pub fn add_scalar(&self, s: S) -> Jet<S> {
        let mut j = self.clone();
        j.coeffs[0] = j.coeffs[0] + s;
        j
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.as_f64().abs()))
    }

    fn zip_with(&self, other: &Jet<S>, f: impl Fn(S, S) -> S) -> Jet<S> {
        let order = self.order.min(other.order);
        let n = simplex_len(order);
        let coeffs = self.coeffs[..n].iter().zip(&other.coeffs[..n]).map(|(a, b)| f(*a, *b)).collect();
        Jet { order, coeffs }
    }

    fn product(&self, other: &Jet<S>) -> Jet<S> {
        let order = self.order.min(other.order);
        let lay = layout(order);
        let n = simplex_len(order);
        let taylor = |j: &Jet<S>| -> Vec<S> { (0..n).map(|i| j.coeffs[i] / S::of(lay.factorials[i])).collect() };
        let (ta, tb) = (taylor(self), taylor(other));
        let mut out = vec![S::zero(); n];
        for &(a, b, c) in &lay.products {
            let (a, b) = (ta[a as usize], tb[b as usize]);
            if !a.is_zero() && !b.is_zero() {
                out[c as usize] = out[c as usize] + a * b;
            }
        }
        for (o, w) in out.iter_mut().zip(&lay.factorials) {
            *o = *o * S::of(*w);
        }
        Jet { order, coeffs: out }
    }

    /// Composes a univariate function with this jet, given the function's
    /// derivatives `g(v), g'(v), g''(v), ...` at `v = self.value()`.
    ///
    /// `derivs` must hold at least `order + 1` entries.
    pub fn compose(&self, derivs: &[S]) -> Jet<S> {
        let n = self.order;
        assert!(derivs.len() > n, "compose needs {} derivatives, got {}", n + 1, derivs.len());
        let mut delta = self.clone();
        delta.coeffs[0] = S::zero();
        let mut fact = S::of((1..=n).map(|v| v as f64).product::<f64>());
        let mut acc = Jet::constant(derivs[n] / fact, n);
        for k in (0..n).rev() {
            fact = fact / S::of((k + 1) as f64);
            acc = acc.product(&delta).add_scalar(derivs[k] / fact);
        }
        acc
    }

    fn domain(op: &'static str, v: S) -> JetError {
        JetError::Domain { op, value: v.as_f64() }
    }

    pub fn exp(&self) -> Jet<S> {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    pub fn ln(&self) -> Result<Jet<S>, JetError> {
        let v = self.value();
        if !(v > S::zero()) {
            return Err(Self::domain("log", v));
        }
        let mut d = vec![v.ln()];
        // d^k/dv^k ln v = (-1)^(k-1) (k-1)! / v^k
        let mut c = v.recip();
        for k in 1..=self.order {
            d.push(c);
            c = c * S::of(-(k as f64)) / v;
        }
        Ok(self.compose(&d))
    }

    pub fn sin(&self) -> Jet<S> {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        self.compose(&(0..=self.order).map(|k| cycle[k % 4]).collect::<Vec<_>>())
    }

    pub fn cos(&self) -> Jet<S> {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        self.compose(&(0..=self.order).map(|k| cycle[k % 4]).collect::<Vec<_>>())
    }

    /// `self^p` via the falling-factorial derivative rule. Integer `p` accepts
    /// any base (nonzero when `p < 0`); other exponents need a positive base.
    pub fn powf(&self, p: f64) -> Result<Jet<S>, JetError> {
        let v = self.value();
        let integral = p.fract() == 0.0;
        if integral && p >= 0.0 {
            return Ok(self.powi(p as u32));
        }
        if integral && v.is_zero() {
            return Err(JetError::DivisionByZero);
        }
        if !integral && !(v > S::zero()) {
            return Err(Self::domain("pow", v));
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut coef = 1.0;
        for k in 0..=self.order {
            d.push(S::of(coef) * v.powf(p - k as f64));
            coef *= p - k as f64;
        }
        Ok(self.compose(&d))
    }

    /// Non-negative integer power by repeated squaring (exact for polynomials).
    pub fn powi(&self, p: u32) -> Jet<S> {
        let mut result = Jet::constant(S::one(), self.order);
        let mut base = self.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                result = result.product(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.product(&base);
            }
        }
        result
    }

    pub fn sqrt(&self) -> Result<Jet<S>, JetError> {
        let v = self.value();
        if v < S::zero() || (v.is_zero() && self.order > 0) {
            return Err(Self::domain("sqrt", v));
        }
        if self.order == 0 {
            return Ok(Jet::constant(v.sqrt(), 0));
        }
        self.powf(0.5)
    }

    pub fn abs(&self) -> Result<Jet<S>, JetError> {
        let v = self.value();
        if v.is_zero() && self.order > 0 {
            return Err(Self::domain("abs", v));
        }
        Ok(if v < S::zero() { -self } else { self.clone() })
    }

    pub fn recip(&self) -> Result<Jet<S>, JetError> {
        let v = self.value();
        if v.is_zero() {
            return Err(JetError::DivisionByZero);
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut c = v.recip();
        for k in 0..=self.order {
            d.push(c);
            c = c * S::of(-((k + 1) as f64)) / v;
        }
        Ok(self.compose(&d))
    }

    pub fn checked_div(&self, other: &Jet<S>) -> Result<Jet<S>, JetError> {
        Ok(self * &other.recip()?)
    }
}

impl<S: Scalar> Add for &Jet<S> {
    type Output = Jet<S>;
    fn add(self, rhs: &Jet<S>) -> Jet<S> {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<S: Scalar> Sub for &Jet<S> {
    type Output = Jet<S>;
    fn sub(self, rhs: &Jet<S>) -> Jet<S> {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<S: Scalar> Mul for &Jet<S> {
    type Output = Jet<S>;
    fn mul(self, rhs: &Jet<S>) -> Jet<S> {
        self.product(rhs)
    }
}

impl<S: Scalar> Neg for &Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        self.scale(-S::one())
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        self.scale(-S::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<S: Scalar> $tr for Jet<S> {
            type Output = Jet<S>;
            fn $m(self, rhs: Jet<S>) -> Jet<S> {
                (&self).$m(&rhs)
            }
        }
        impl<S: Scalar> $tr<&Jet<S>> for Jet<S> {
            type Output = Jet<S>;
            fn $m(self, rhs: &Jet<S>) -> Jet<S> {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
