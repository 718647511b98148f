//! Levi-Civita connection, Riemann tensor and its covariant derivatives on
//! the coordinate frame `(∂t, ∂x, ∂y)`.
//!
//! Every component field is carried as a [`Jet`] at the base point. Each
//! covariant differentiation consumes one jet order, so `∇^k R` at a point
//! needs the metric to order `k + 2`.
//!
//! The arithmetic runs in double-double: `∂^k R` and the connection terms
//! cancel down to a result that can be many orders of magnitude smaller
//! (exactly zero for some families), and plain `f64` would leave round-off
//! far above the absolute tolerances on zero components.

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::jets::{Dd, Jet, Scalar, MAX_ORDER};
use crate::point::{Coord, Point};
use crate::tensor::{Metric, TensorAtPoint, TensorError, DET_FLOOR, DIM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric is degenerate at {point} (det = {det:e})")]
    Degenerate { point: Point, det: f64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("derivative order {0} needs jets beyond the supported maximum")]
    OrderTooLarge(usize),
    #[error("metric components must be symmetric: entry ({0}, {1}) differs from ({1}, {0})")]
    Asymmetric(usize, usize),
}

/// Symmetric 3x3 matrix of expressions in `(t, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    comps: [[Expr; 3]; 3],
}

impl MetricField {
    /// Builds the field from its upper triangle; `upper(i, j)` is only
    /// called with `i <= j`.
    pub fn from_upper(mut upper: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut rows: [[Option<Expr>; 3]; 3] = Default::default();
        for i in 0..DIM {
            for j in i..DIM {
                let e = upper(i, j);
                rows[j][i] = Some(e.clone());
                rows[i][j] = Some(e);
            }
        }
        MetricField { comps: rows.map(|r| r.map(|e| e.expect("filled above"))) }
    }

    /// Builds the field from a full matrix, which must be structurally
    /// symmetric.
    pub fn from_matrix(m: [[Expr; 3]; 3]) -> Result<Self, GeometryError> {
        for i in 0..DIM {
            for j in i + 1..DIM {
                if m[i][j] != m[j][i] {
                    return Err(GeometryError::Asymmetric(i, j));
                }
            }
        }
        Ok(MetricField { comps: m })
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.comps[i][j]
    }

    /// Metric values at `p`.
    pub fn at(&self, p: &Point) -> Result<Metric, GeometryError> {
        let mut m = nalgebra::Matrix3::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m[(i, j)] = self.comps[i][j].eval(p)?;
            }
        }
        let det = m.determinant();
        if !(det.abs() >= DET_FLOOR) {
            return Err(GeometryError::Degenerate { point: *p, det });
        }
        Ok(Metric::new(m)?)
    }

    /// Largest `|g_ij|` at `p`; used to put absolute tolerances on a unit scale.
    pub fn scale_at(&self, p: &Point) -> Result<f64, GeometryError> {
        Ok(self.at(p)?.matrix().amax())
    }

    fn jets<S: Scalar>(&self, p: &Point, order: usize) -> Result<[[Jet<S>; 3]; 3], GeometryError> {
        let mut out: [[Option<Jet<S>>; 3]; 3] = Default::default();
        for i in 0..DIM {
            for j in i..DIM {
                let jet = self.comps[i][j].eval_jet_in(p, order)?;
                out[j][i] = Some(jet.clone());
                out[i][j] = Some(jet);
            }
        }
        Ok(out.map(|r| r.map(|e| e.expect("filled above"))))
    }
}

/// Christoffel symbols of the second kind as jets; `gamma[k][i][j]` is
/// `Γ^k_{ij}`, symmetric in `i, j`.
#[derive(Debug, Clone)]
pub struct ConnectionJet<S = f64> {
    gamma: Vec<Jet<S>>,
    order: usize,
}

impl<S: Scalar> ConnectionJet<S> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &Jet<S> {
        &self.gamma[(k * DIM + i) * DIM + j]
    }

    /// Values at the base point as a `(1, 2)` tensor.
    pub fn values(&self) -> TensorAtPoint {
        TensorAtPoint::from_fn(1, 2, |ix| self.get(ix[0], ix[1], ix[2]).value().as_f64())
    }

    fn convert<T: Scalar>(&self) -> ConnectionJet<T> {
        ConnectionJet { gamma: self.gamma.iter().map(Jet::convert).collect(), order: self.order }
    }

    fn truncated(&self, order: usize) -> ConnectionJet<S> {
        ConnectionJet { gamma: self.gamma.iter().map(|j| j.truncate(order)).collect(), order: order.min(self.order) }
    }
}

/// Everything derived from one evaluation of the metric jets at a point.
struct PointJets<S> {
    g: [[Jet<S>; 3]; 3],
    conn: ConnectionJet<S>,
}

fn inverse_jets<S: Scalar>(g: &[[Jet<S>; 3]; 3], p: &Point) -> Result<[[Jet<S>; 3]; 3], GeometryError> {
    let cof = |i: usize, j: usize| {
        let (r0, r1) = match i {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let (c0, c1) = match j {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let minor = &g[r0][c0] * &g[r1][c1] - &g[r0][c1] * &g[r1][c0];
        if (i + j).is_multiple_of(2) {
            minor
        } else {
            -minor
        }
    };
    let c: [[Jet<S>; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| cof(i, j)));
    let det = &(&g[0][0] * &c[0][0] + &g[0][1] * &c[0][1]) + &(&g[0][2] * &c[0][2]);
    let det_value = det.value().as_f64();
    if !(det_value.abs() >= DET_FLOOR) {
        return Err(GeometryError::Degenerate { point: *p, det: det_value });
    }
    let inv_det = det.recip().expect("nonzero determinant");
    // inverse = adjugate / det, adjugate = cofactor transpose
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| &c[j][i] * &inv_det)))
}

fn point_jets<S: Scalar>(g: &MetricField, p: &Point, conn_order: usize) -> Result<PointJets<S>, GeometryError> {
    if conn_order + 1 > MAX_ORDER {
        return Err(GeometryError::OrderTooLarge(conn_order));
    }
    let gj = g.jets(p, conn_order + 1)?;
    let ginv = inverse_jets(&gj, p)?;
    let d = |i: usize, j: usize, l: usize| gj[i][j].derivative(Coord::ALL[l]).expect("order >= 1");
    // first kind: Γ_{ij,l} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first = Vec::with_capacity(27);
    for i in 0..DIM {
        for j in 0..DIM {
            for l in 0..DIM {
                first.push((d(j, l, i) + d(i, l, j) - d(i, j, l)).scale(S::of(0.5)));
            }
        }
    }
    let mut gamma = Vec::with_capacity(27);
    for k in 0..DIM {
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = Jet::zero(conn_order);
                for l in 0..DIM {
                    acc = acc + &ginv[k][l] * &first[(i * DIM + j) * DIM + l];
                }
                gamma.push(acc);
            }
        }
    }
    Ok(PointJets { g: gj, conn: ConnectionJet { gamma, order: conn_order } })
}

/// Jets of `Γ^k_{ij}` at `p` up to `order`.
pub fn christoffel(g: &MetricField, p: &Point, order: usize) -> Result<ConnectionJet, GeometryError> {
    Ok(point_jets::<Dd>(g, p, order)?.conn.convert())
}

/// Covariant tensor field near a point, one jet per component.
#[derive(Debug, Clone)]
struct JetTensor<S> {
    rank: usize,
    comps: Vec<Jet<S>>,
}

impl<S: Scalar> JetTensor<S> {
    fn order(&self) -> usize {
        self.comps[0].order()
    }

    fn values(&self) -> TensorAtPoint {
        TensorAtPoint::from_data(0, self.rank, self.comps.iter().map(|j| j.value().as_f64()).collect())
    }

    /// `(∇T)_{i_1..i_n; j} = ∂_j T_{i_1..i_n} − Σ_s Γ^m_{j i_s} T_{..m..}`,
    /// with the differentiation slot appended last.
    ///
    /// With `curvature_symmetric`, the first four slots are assumed to carry
    /// the curvature symmetries (which `∇` preserves): only components with
    /// `i < j`, `k < l`, `(i, j) <= (k, l)` are computed and the rest are
    /// filled in by sign.
    fn covariant_derivative(&self, conn: &ConnectionJet<S>, curvature_symmetric: bool) -> JetTensor<S> {
        let out_order = self.order() - 1;
        let conn = conn.truncated(out_order);
        let n = self.rank;
        let zero: Vec<bool> = self.comps.iter().map(Jet::is_zero).collect();
        let gamma_zero: Vec<bool> = conn.gamma.iter().map(Jet::is_zero).collect();
        let len = DIM.pow(n as u32 + 1);
        debug_assert!(!curvature_symmetric || n >= 4);
        let tail = if curvature_symmetric { DIM.pow(n as u32 - 3) } else { 1 };
        let mut comps = Vec::with_capacity(len);
        let mut idx = vec![0usize; n + 1];
        for flat in 0..len {
            let mut r = flat;
            for s in (0..=n).rev() {
                idx[s] = r % DIM;
                r /= DIM;
            }
            if curvature_symmetric {
                match curvature_representative(idx[0], idx[1], idx[2], idx[3]) {
                    None => {
                        comps.push(Jet::zero(out_order));
                        continue;
                    }
                    Some((head, sign)) if head != flat / tail => {
                        let src: &Jet<S> = &comps[head * tail + flat % tail];
                        let v = if sign > 0.0 { src.clone() } else { -src };
                        comps.push(v);
                        continue;
                    }
                    Some(_) => {}
                }
            }
            let j = idx[n];
            let base = flat / DIM;
            let mut acc = if zero[base] {
                Jet::zero(out_order)
            } else {
                self.comps[base].derivative(Coord::ALL[j]).expect("order >= 1")
            };
            for s in 0..n {
                let stride = DIM.pow((n - 1 - s) as u32);
                let without = base - idx[s] * stride;
                for m in 0..DIM {
                    let src = without + m * stride;
                    let gi = (m * DIM + j) * DIM + idx[s];
                    if zero[src] || gamma_zero[gi] {
                        continue;
                    }
                    acc = acc - &conn.gamma[gi] * &self.comps[src];
                }
            }
            comps.push(acc);
        }
        JetTensor { rank: n + 1, comps }
    }
}

/// Canonical position `((i*3 + j)*3 + k)*3 + l` of the first four indices
/// under the curvature symmetries, with the sign relating the two
/// components; `None` when the symmetries force a zero.
fn curvature_representative(i: usize, j: usize, k: usize, l: usize) -> Option<(usize, f64)> {
    if i == j || k == l {
        return None;
    }
    let mut sign = 1.0;
    let (mut a, mut b) = ((i, j), (k, l));
    if a.0 > a.1 {
        a = (a.1, a.0);
        sign = -sign;
    }
    if b.0 > b.1 {
        b = (b.1, b.0);
        sign = -sign;
    }
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    Some((((a.0 * DIM + a.1) * DIM + b.0) * DIM + b.1, sign))
}

impl<S: Scalar> JetTensor<S> {
    /// Projects the first four slots onto the curvature symmetries
    /// (antisymmetric in each pair, symmetric under the pair swap). The true
    /// tensors already have them; the projection removes round-off so that
    /// components forced to vanish by symmetry come out exactly zero.
    fn project_curvature_symmetries(&self) -> JetTensor<S> {
        debug_assert!(self.rank >= 4);
        let tail = DIM.pow(self.rank as u32 - 4);
        let at = |i: usize, j: usize, k: usize, l: usize, w: usize| &self.comps[(((i * DIM + j) * DIM + k) * DIM + l) * tail + w];
        let mut comps = Vec::with_capacity(self.comps.len());
        for i in 0..DIM {
            for j in 0..DIM {
                for k in 0..DIM {
                    for l in 0..DIM {
                        for w in 0..tail {
                            let first = (at(i, j, k, l, w) - at(j, i, k, l, w)) - (at(i, j, l, k, w) - at(j, i, l, k, w));
                            let second = (at(k, l, i, j, w) - at(l, k, i, j, w)) - (at(k, l, j, i, w) - at(l, k, j, i, w));
                            comps.push((first + second).scale(S::of(0.125)));
                        }
                    }
                }
            }
        }
        JetTensor { rank: self.rank, comps }
    }
}

fn riemann_jets<S: Scalar>(pj: &PointJets<S>) -> JetTensor<S> {
    let conn = &pj.conn;
    let order = conn.order() - 1;
    let gm = |k: usize, i: usize, j: usize| conn.get(k, i, j);
    // operator components 𝓡^m_{ijk}
    let mut op = vec![Jet::zero(order); 81];
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                for m in 0..DIM {
                    let mut acc = gm(m, j, k).derivative(Coord::ALL[i]).expect("order >= 1")
                        - gm(m, i, k).derivative(Coord::ALL[j]).expect("order >= 1");
                    for n in 0..DIM {
                        acc = acc + gm(n, j, k) * gm(m, i, n) - gm(n, i, k) * gm(m, j, n);
                    }
                    op[((m * DIM + i) * DIM + j) * DIM + k] = acc;
                }
            }
        }
    }
    let mut comps = Vec::with_capacity(81);
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                for l in 0..DIM {
                    let mut acc = Jet::zero(order);
                    for m in 0..DIM {
                        acc = acc + &pj.g[l][m] * &op[((m * DIM + i) * DIM + j) * DIM + k];
                    }
                    comps.push(acc);
                }
            }
        }
    }
    JetTensor { rank: 4, comps }
}

/// `R(∂_i, ∂_j, ∂_k, ∂_l) = g(𝓡(∂_i, ∂_j)∂_k, ∂_l)` with
/// `𝓡(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`.
pub fn riemann(g: &MetricField, p: &Point) -> Result<TensorAtPoint, GeometryError> {
    nabla_k_riemann(g, p, 0)
}

/// `∇^k R` at `p` as a `(0, 4 + k)` tensor.
pub fn nabla_k_riemann(g: &MetricField, p: &Point, k: usize) -> Result<TensorAtPoint, GeometryError> {
    Ok(nabla_riemann_sequence(g, p, k)?.pop().expect("nonempty"))
}

/// `[R, ∇R, ..., ∇^r R]` at `p`, sharing one evaluation of the metric jets.
pub fn nabla_riemann_sequence(g: &MetricField, p: &Point, r: usize) -> Result<Vec<TensorAtPoint>, GeometryError> {
    if r + 2 > MAX_ORDER {
        return Err(GeometryError::OrderTooLarge(r));
    }
    sequence(g, p, r, true)
}

fn sequence(g: &MetricField, p: &Point, r: usize, project: bool) -> Result<Vec<TensorAtPoint>, GeometryError> {
    let pj = point_jets::<Dd>(g, p, r + 1)?;
    let mut current = riemann_jets(&pj);
    if project {
        current = current.project_curvature_symmetries();
    }
    let mut out = Vec::with_capacity(r + 1);
    out.push(current.values());
    for _ in 0..r {
        current = current.covariant_derivative(&pj.conn, project);
        out.push(current.values());
    }
    Ok(out)
}

/// `∇g` at `p`; vanishes for the Levi-Civita connection.
pub fn metric_covariant_derivative(g: &MetricField, p: &Point) -> Result<TensorAtPoint, GeometryError> {
    let pj = point_jets::<Dd>(g, p, 0)?;
    let gt = JetTensor { rank: 2, comps: pj.g.iter().flatten().map(|j| j.truncate(1)).collect() };
    Ok(gt.covariant_derivative(&pj.conn, false).values())
}

/// Largest violations of the curvature identities at a point, divided by the
/// metric scale so absolute thresholds are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct IdentityResiduals {
    pub antisym_first_pair: f64,
    pub antisym_last_pair: f64,
    pub pair_symmetry: f64,
    pub first_bianchi: f64,
    pub second_bianchi: f64,
    pub metric_compatibility: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.antisym_first_pair,
            self.antisym_last_pair,
            self.pair_symmetry,
            self.first_bianchi,
            self.second_bianchi,
            self.metric_compatibility,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn identity_residuals(g: &MetricField, p: &Point) -> Result<IdentityResiduals, GeometryError> {
    let scale = g.scale_at(p)?;
    // Unprojected, so the symmetry checks exercise the recursion itself.
    let seq = sequence(g, p, 1, false)?;
    let (r, dr) = (&seq[0], &seq[1]);
    let mut res = IdentityResiduals::default();
    let upd = |slot: &mut f64, v: f64| *slot = slot.max(v.abs() / scale);
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                for l in 0..DIM {
                    let v = r.get(&[i, j, k, l]);
                    upd(&mut res.antisym_first_pair, v + r.get(&[j, i, k, l]));
                    upd(&mut res.antisym_last_pair, v + r.get(&[i, j, l, k]));
                    upd(&mut res.pair_symmetry, v - r.get(&[k, l, i, j]));
                    upd(&mut res.first_bianchi, v + r.get(&[j, k, i, l]) + r.get(&[k, i, j, l]));
                    for m in 0..DIM {
                        // cyclic in the first pair and the differentiation slot
                        upd(
                            &mut res.second_bianchi,
                            dr.get(&[i, j, k, l, m]) + dr.get(&[j, m, k, l, i]) + dr.get(&[m, i, k, l, j]),
                        );
                        // cyclic in the last three slots
                        upd(
                            &mut res.second_bianchi,
                            dr.get(&[i, j, k, l, m]) + dr.get(&[i, j, l, m, k]) + dr.get(&[i, j, m, k, l]),
                        );
                    }
                }
            }
        }
    }
    res.metric_compatibility = metric_covariant_derivative(g, p)?.max_abs() / scale;
    Ok(res)
}
