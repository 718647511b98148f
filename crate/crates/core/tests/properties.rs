//! Property tests for jets, expressions, tensors and the curvature engine.

use curvhom::geometry::identity_residuals;
use curvhom::{parse, Coord, Expr, Frame, Jet, Point, TensorAtPoint};
use nalgebra::Matrix3;
use proptest::prelude::*;

mod common;
use common::{metric_coefficients, polynomial_metric};

const ORDER: usize = 4;

fn jet(order: usize) -> impl Strategy<Value = Jet> {
    let n = (order + 1) * (order + 2) * (order + 3) / 6;
    prop::collection::vec(-2.0f64..2.0, n).prop_map(move |v| {
        let mut it = v.into_iter();
        Jet::from_fn(order, |_| it.next().unwrap())
    })
}

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    (a - b).max_abs() <= tol * scale
}

proptest! {
    #[test]
    fn jet_product_commutes_and_associates(a in jet(ORDER), b in jet(ORDER), c in jet(ORDER)) {
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-12));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
    }

    #[test]
    fn jet_derivative_obeys_leibniz(a in jet(ORDER), b in jet(ORDER), i in 0usize..3) {
        let c = Coord::from_index(i).unwrap();
        let lhs = (&a * &b).derivative(c).unwrap();
        let rhs = &(&a.derivative(c).unwrap() * &b.truncate(ORDER - 1)) + &(&a.truncate(ORDER - 1) * &b.derivative(c).unwrap());
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn jet_division_inverts_product(a in jet(ORDER), b in jet(ORDER), shift in 1.0f64..3.0) {
        let b = b.add_scalar(shift - b.value());
        let q = (&a * &b).checked_div(&b).unwrap();
        prop_assert!(close(&q, &a, 1e-9));
    }

    #[test]
    fn expression_display_round_trips(a in -3.0f64..3.0, b in 0.5f64..2.0, n in 1u32..5, t in -1.0f64..1.0, x in 0.1f64..1.0) {
        let text = format!("{a} * x^{n} + exp({b} * t) - sin(x * t) / (1 + x^2) + ln({b} + x)");
        let e = parse(&text, &Coord::ALL).unwrap();
        let again: Expr = e.to_string().parse().unwrap();
        let p = Point::new(t, x, 0.0);
        let (u, v) = (e.eval(&p).unwrap(), again.eval(&p).unwrap());
        prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        prop_assert!(close(&e.eval_jet(&p, 3).unwrap(), &again.eval_jet(&p, 3).unwrap(), 1e-12));
    }

    #[test]
    fn polynomial_jets_are_exact(coefs in prop::collection::vec(-2.0f64..2.0, 1..6), x in -1.5f64..1.5) {
        let text = coefs.iter().enumerate().map(|(i, c)| format!("({c}) * x^{i}")).collect::<Vec<_>>().join(" + ");
        let e = parse(&text, &Coord::ALL).unwrap();
        let j = e.eval_jet(&Point::new(0.3, x, -0.7), 6).unwrap();
        for n in 0..=6 {
            let exact: f64 = coefs.iter().enumerate().filter(|(i, _)| *i >= n).map(|(i, c)| {
                let falling: f64 = (0..n).map(|m| (i - m) as f64).product();
                c * falling * x.powi((i - n) as i32)
            }).sum();
            let got = j.pure(Coord::X, n).unwrap();
            prop_assert!((got - exact).abs() <= 1e-10 * exact.abs().max(1.0), "n={n}: {got} vs {exact}");
        }
        prop_assert_eq!(j.pure(Coord::T, 1).unwrap(), 0.0);
    }

    #[test]
    fn pullback_is_functorial(
        data in prop::collection::vec(-1.0f64..1.0, 27),
        a in prop::collection::vec(-1.0f64..1.0, 9),
        b in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let fa = Frame::new(Matrix3::from_row_slice(&a) + Matrix3::identity() * 3.0).unwrap();
        let fb = Frame::new(Matrix3::from_row_slice(&b) + Matrix3::identity() * 3.0).unwrap();
        for (contra, co) in [(0, 3), (1, 2)] {
            let tensor = TensorAtPoint::from_data(contra, co, data.clone());
            let stepwise = tensor.pullback(&fa).pullback(&fb);
            let direct = tensor.pullback(&fa.then(&fb));
            prop_assert!(stepwise.max_abs_diff(&direct).unwrap() <= 1e-10 * stepwise.max_abs().max(1.0));
            let back = tensor.pullback(&fa).pullback(&fa.inverse());
            prop_assert!(back.max_abs_diff(&tensor).unwrap() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn curvature_identities_on_random_metrics(c in metric_coefficients()) {
        let g = polynomial_metric(&c);
        let res = identity_residuals(&g, &Point::new(0.1, -0.2, 0.15)).unwrap();
        prop_assert!(res.max() < 1e-9, "{:?}", res);
    }
}
