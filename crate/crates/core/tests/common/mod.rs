//! Generators shared by the integration tests.
#![allow(dead_code)]

use curvhom::models::{boost_frame, shear_frame, sign_frame, standard_phi, ModelSpace, T, X, Y};
use curvhom::{parse, Coord, Expr, Frame, MetricField, TensorAtPoint};
use nalgebra::Matrix3;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

pub fn sigma(a: usize, b: usize) -> f64 {
    match (a, b) {
        (T, X) => 1.0,
        (X, T) => -1.0,
        _ => 0.0,
    }
}

/// Canonical model with `A_k(a, b, c, d; w) = σ(a, b) σ(d, c) c_k(w)`.
pub fn model(c: &[Vec<f64>]) -> ModelSpace {
    let a = c
        .iter()
        .enumerate()
        .map(|(k, ck)| {
            TensorAtPoint::from_fn(0, 4 + k, |idx| {
                let w = &idx[4..];
                if w.contains(&Y) {
                    return 0.0;
                }
                let wi = w.iter().fold(0, |acc, &s| 2 * acc + s);
                sigma(idx[0], idx[1]) * sigma(idx[3], idx[2]) * ck[wi]
            })
        })
        .collect();
    ModelSpace { phi: standard_phi(), a }
}

pub fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v })
}

pub fn sign() -> impl Strategy<Value = f64> {
    any::<bool>().prop_map(|b| if b { 1.0 } else { -1.0 })
}

/// Element of the isometry group of `(V, φ, A_0)`: signs, then shear.
pub fn iso0() -> impl Strategy<Value = Frame> {
    (sign(), sign(), -3.0f64..3.0).prop_map(|(a1, a4, s)| sign_frame(a1, a4).then(&shear_frame(s)))
}

pub fn generic_frame() -> impl Strategy<Value = Frame> {
    prop::collection::vec(-2.0f64..2.0, 9).prop_filter_map("singular", |v| Frame::new(Matrix3::from_row_slice(&v)).ok().filter(|f| f.det().abs() > 0.05))
}

pub fn boost() -> impl Strategy<Value = Frame> {
    prop_oneof![1.05f64..3.0, 0.3f64..0.95].prop_map(|l| boost_frame(l).unwrap())
}

/// Frames that are not isometries of `(V, φ, A_0)`.
pub fn non_iso0() -> impl Strategy<Value = Frame> {
    prop_oneof![
        generic_frame(),
        (iso0(), boost()).prop_map(|(g, b)| g.then(&b)),
        (iso0(), nonzero(0.05, 2.0)).prop_map(|(g, e)| g.then(&Frame::from_columns([[1.0, 0.0, 0.0], [0.0, 1.0, e], [0.0, 0.0, 1.0]]).unwrap())),
        iso0().prop_map(|g| g.then(&Frame::diagonal([1.0, 1.0, -1.0]).unwrap())),
    ]
}

pub fn order0_model() -> impl Strategy<Value = ModelSpace> {
    nonzero(0.1, 5.0).prop_map(|e| model(&[vec![e]]))
}

/// First-order model with `c_1(T) ≠ 0 = c_1(X)`.
pub fn order1_model() -> impl Strategy<Value = ModelSpace> {
    (nonzero(0.1, 5.0), nonzero(0.1, 5.0)).prop_map(|(e, ct)| model(&[vec![e], vec![ct, 0.0]]))
}

pub fn iso1() -> impl Strategy<Value = Frame> {
    sign().prop_map(|a4| sign_frame(1.0, a4))
}

pub fn non_iso1() -> impl Strategy<Value = Frame> {
    prop_oneof![
        generic_frame(),
        (sign(), sign(), nonzero(0.01, 3.0)).prop_map(|(a1, a4, s)| sign_frame(a1, a4).then(&shear_frame(s))),
        sign().prop_map(|a4| sign_frame(-1.0, a4)),
        (iso1(), boost()).prop_map(|(g, b)| g.then(&b)),
    ]
}

/// Quadratic perturbation of a fixed Lorentzian metric; `c` holds
/// [`METRIC_COEFFS`] coefficients.
pub const METRIC_COEFFS: usize = 42;

pub fn polynomial_metric(c: &[f64]) -> MetricField {
    let base = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let monomials = ["t", "x", "y", "t * x", "x * y", "t * t", "y * y"];
    let mut coefs = c.chunks(monomials.len());
    let mut m: Vec<Vec<Expr>> = vec![vec![Expr::num(0.0); 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let mut terms = vec![format!("{}", base[i][j])];
            terms.extend(coefs.next().unwrap().iter().zip(monomials).map(|(a, m)| format!("({a}) * {m}")));
            m[i][j] = parse(&terms.join(" + "), &Coord::ALL).unwrap();
        }
    }
    MetricField::from_upper(|i, j| m[i][j].clone())
}

pub fn metric_coefficients() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.3f64..0.3, METRIC_COEFFS)
}

/// One deterministic draw from `s`.
pub fn draw<S: Strategy>(s: &S, runner: &mut TestRunner) -> S::Value {
    s.new_tree(runner).expect("strategy produces values").current()
}
