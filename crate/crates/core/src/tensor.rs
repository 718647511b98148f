//! Dense tensors on a three-dimensional vector space.
//!
//! Components are stored row-major with the contravariant indices first,
//! followed by the covariant ones. For a curvature tensor the covariant slots
//! follow `R(e_i, e_j, e_k, e_l)`, and each covariant derivative appends its
//! differentiation slot at the end.

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

pub const DIM: usize = 3;

/// Smallest `|det|` accepted for frames and metrics.
pub const DET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("frame is singular (det = {0:e})")]
    SingularFrame(f64),
    #[error("metric is degenerate (det = {0:e})")]
    SingularMetric(f64),
    #[error("metric is not symmetric")]
    AsymmetricMetric,
    #[error("slot {slot} out of range for a tensor of rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("cannot contract slot {0} with itself")]
    SameSlot(usize),
    #[error("contracting two slots of the same variance needs a metric")]
    MissingMetric,
    #[error("expected a tensor of valence {expected}, got ({contra}, {co})")]
    Valence { expected: &'static str, contra: usize, co: usize },
}

/// Change of basis: column `i` holds the `i`-th new basis vector in old
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame(Matrix3<f64>);

impl Frame {
    pub fn new(m: Matrix3<f64>) -> Result<Self, TensorError> {
        let det = m.determinant();
        if !(det.abs() >= DET_FLOOR) {
            return Err(TensorError::SingularFrame(det));
        }
        Ok(Frame(m))
    }

    pub fn from_columns(cols: [[f64; 3]; 3]) -> Result<Self, TensorError> {
        Frame::new(Matrix3::from_fn(|r, c| cols[c][r]))
    }

    pub fn identity() -> Self {
        Frame(Matrix3::identity())
    }

    pub fn diagonal(d: [f64; 3]) -> Result<Self, TensorError> {
        Frame::new(Matrix3::from_diagonal(&d.into()))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Coordinates of the `i`-th new basis vector.
    pub fn column(&self, i: usize) -> [f64; 3] {
        [self.0[(0, i)], self.0[(1, i)], self.0[(2, i)]]
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    pub fn inverse(&self) -> Frame {
        Frame(self.0.try_inverse().expect("frames are invertible by construction"))
    }

    /// `self` followed by `next`: the basis `next` is expressed in the basis
    /// produced by `self`.
    pub fn then(&self, next: &Frame) -> Frame {
        Frame(self.0 * next.0)
    }
}

/// Symmetric nondegenerate bilinear form together with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    g: Matrix3<f64>,
    inv: Matrix3<f64>,
}

impl Metric {
    pub fn new(g: Matrix3<f64>) -> Result<Self, TensorError> {
        let scale = g.amax().max(1.0);
        if (g - g.transpose()).amax() > 1e-12 * scale {
            return Err(TensorError::AsymmetricMetric);
        }
        let det = g.determinant();
        if !(det.abs() >= DET_FLOOR) {
            return Err(TensorError::SingularMetric(det));
        }
        let inv = g.try_inverse().ok_or(TensorError::SingularMetric(det))?;
        Ok(Metric { g, inv })
    }

    pub fn from_tensor(t: &TensorAtPoint) -> Result<Self, TensorError> {
        if t.valence() != (0, 2) {
            return Err(TensorError::Valence { expected: "(0, 2)", contra: t.contra, co: t.co });
        }
        Metric::new(Matrix3::from_fn(|i, j| t.get(&[i, j])))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inv
    }

    pub fn to_tensor(&self) -> TensorAtPoint {
        TensorAtPoint::from_fn(0, 2, |ix| self.g[(ix[0], ix[1])])
    }

    /// Counts of positive and negative eigenvalues.
    pub fn signature(&self) -> (usize, usize) {
        let eig = SymmetricEigen::new(self.g).eigenvalues;
        let pos = eig.iter().filter(|v| **v > 0.0).count();
        (pos, DIM - pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorAtPoint {
    contra: usize,
    co: usize,
    data: Vec<f64>,
}

fn pow3(n: usize) -> usize {
    DIM.pow(n as u32)
}

impl TensorAtPoint {
    pub fn zeros(contra: usize, co: usize) -> Self {
        TensorAtPoint { contra, co, data: vec![0.0; pow3(contra + co)] }
    }

    pub fn from_fn(contra: usize, co: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = TensorAtPoint::zeros(contra, co);
        let mut idx = vec![0; contra + co];
        for slot in t.data.iter_mut() {
            *slot = f(&idx);
            increment(&mut idx);
        }
        t
    }

    pub fn from_data(contra: usize, co: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), pow3(contra + co), "component count must be 3^rank");
        TensorAtPoint { contra, co, data }
    }

    pub fn valence(&self) -> (usize, usize) {
        (self.contra, self.co)
    }

    pub fn rank(&self) -> usize {
        self.contra + self.co
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * DIM + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let k = self.flat_index(idx);
        self.data[k] = v;
    }

    /// Every multi-index with its component.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let rank = self.rank();
        self.data.iter().enumerate().map(move |(k, v)| (unflatten(k, rank), *v))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        TensorAtPoint { contra: self.contra, co: self.co, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Largest componentwise difference; `None` for mismatched valences.
    pub fn max_abs_diff(&self, other: &TensorAtPoint) -> Option<f64> {
        (self.valence() == other.valence())
            .then(|| self.data.iter().zip(&other.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Reorders slots: slot `s` of the result is slot `perm[s]` of `self`.
    /// Only permutations that keep the contravariant block in front are
    /// meaningful for mixed tensors.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let rank = self.rank();
        assert_eq!(perm.len(), rank);
        let mut src = vec![0; rank];
        TensorAtPoint::from_fn(self.contra, self.co, |idx| {
            for (s, &p) in perm.iter().enumerate() {
                src[p] = idx[s];
            }
            self.get(&src)
        })
    }

    /// Applies `new[.., i, ..] = sum_j m[i][j] old[.., j, ..]` along one slot.
    fn transform_slot(&mut self, slot: usize, m: &Matrix3<f64>) {
        let rank = self.rank();
        let stride = pow3(rank - 1 - slot);
        let block = stride * DIM;
        let mut out = vec![0.0; self.data.len()];
        for base in (0..self.data.len()).step_by(block) {
            for inner in 0..stride {
                let old = [
                    self.data[base + inner],
                    self.data[base + stride + inner],
                    self.data[base + 2 * stride + inner],
                ];
                for i in 0..DIM {
                    out[base + i * stride + inner] = m[(i, 0)] * old[0] + m[(i, 1)] * old[1] + m[(i, 2)] * old[2];
                }
            }
        }
        self.data = out;
    }

    /// Components of the same tensor on the basis given by `frame`:
    /// covariant slots precompose with the frame, contravariant slots
    /// transform with its inverse.
    pub fn pullback(&self, frame: &Frame) -> TensorAtPoint {
        let cov = frame.0.transpose();
        let contra = frame.inverse().0;
        let mut out = self.clone();
        for slot in 0..self.rank() {
            out.transform_slot(slot, if slot < self.contra { &contra } else { &cov });
        }
        out
    }

    /// `(0, k)` to `(1, k - 1)`: the last covariant slot is contracted with
    /// the inverse metric and becomes the leading contravariant slot.
    pub fn raise_last_index(&self, g: &Metric) -> Result<TensorAtPoint, TensorError> {
        if self.contra != 0 || self.co == 0 {
            return Err(TensorError::Valence { expected: "(0, k), k >= 1", contra: self.contra, co: self.co });
        }
        let rank = self.rank();
        let mut t = self.clone();
        t.transform_slot(rank - 1, &g.inv);
        let mut perm: Vec<usize> = vec![rank - 1];
        perm.extend(0..rank - 1);
        let mut out = t.permute(&perm);
        out.contra = 1;
        out.co = rank - 1;
        Ok(out)
    }

    /// Inverse of [`raise_last_index`](Self::raise_last_index).
    pub fn lower_last_index(&self, g: &Metric) -> Result<TensorAtPoint, TensorError> {
        if self.contra != 1 {
            return Err(TensorError::Valence { expected: "(1, k)", contra: self.contra, co: self.co });
        }
        let rank = self.rank();
        let mut perm: Vec<usize> = (1..rank).collect();
        perm.push(0);
        let mut out = self.permute(&perm);
        out.contra = 0;
        out.co = rank;
        out.transform_slot(rank - 1, &g.g);
        Ok(out)
    }

    /// Trace over two slots. Mixed pairs contract directly; two covariant
    /// slots use the inverse metric, two contravariant slots the metric.
    pub fn contract(&self, a: usize, b: usize, g: Option<&Metric>) -> Result<TensorAtPoint, TensorError> {
        let rank = self.rank();
        for s in [a, b] {
            if s >= rank {
                return Err(TensorError::SlotOutOfRange { slot: s, rank });
            }
        }
        if a == b {
            return Err(TensorError::SameSlot(a));
        }
        let (a, b) = (a.min(b), a.max(b));
        let up_a = a < self.contra;
        let up_b = b < self.contra;
        let weights = match (up_a, up_b) {
            (true, false) | (false, true) => Matrix3::identity(),
            (false, false) => *g.ok_or(TensorError::MissingMetric)?.inverse(),
            (true, true) => *g.ok_or(TensorError::MissingMetric)?.matrix(),
        };
        let contra = self.contra - usize::from(up_a) - usize::from(up_b);
        let co = self.co - usize::from(!up_a) - usize::from(!up_b);
        let mut full = vec![0; rank];
        Ok(TensorAtPoint::from_fn(contra, co, |idx| {
            let mut rest = idx.iter();
            for (s, slot) in full.iter_mut().enumerate() {
                if s != a && s != b {
                    *slot = *rest.next().unwrap();
                }
            }
            let mut sum = 0.0;
            for i in 0..DIM {
                for j in 0..DIM {
                    let w = weights[(i, j)];
                    if w != 0.0 {
                        full[a] = i;
                        full[b] = j;
                        sum += w * self.get(&full);
                    }
                }
            }
            sum
        }))
    }

    /// The scalar of a rank-zero tensor.
    pub fn scalar(&self) -> Option<f64> {
        (self.rank() == 0).then(|| self.data[0])
    }
}

fn increment(idx: &mut [usize]) {
    for i in idx.iter_mut().rev() {
        *i += 1;
        if *i < DIM {
            return;
        }
        *i = 0;
    }
}

fn unflatten(mut k: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in idx.iter_mut().rev() {
        *slot = k % DIM;
        k /= DIM;
    }
    idx
}
