//! Small fixed-size vectors and matrices (dimension 1 or 2).
//!
//! All models in the crate have at most two components, so states are stored
//! inline and are `Copy`. This keeps the inner loops of the schemes free of
//! allocation.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// A state vector with one or two components.
#[derive(Clone, Copy, PartialEq)]
pub struct State {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl State {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension must be 1 or 2");
        State { dim, c: [0.0; MAX_DIM] }
    }

    pub fn scalar(u: f64) -> Self {
        State { dim: 1, c: [u, 0.0] }
    }

    pub fn pair(a: f64, b: f64) -> Self {
        State { dim: 2, c: [a, b] }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v.len() {
            1 => Ok(State::scalar(v[0])),
            2 => Ok(State::pair(v[0], v[1])),
            n => Err(Error::InvalidParameter(format!(
                "state must have 1 or 2 components, got {n}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    /// First component; the value itself for scalar states.
    pub fn x(&self) -> f64 {
        self.c[0]
    }

    pub fn y(&self) -> f64 {
        debug_assert!(self.dim == 2);
        self.c[1]
    }

    pub fn dot(&self, o: &State) -> f64 {
        debug_assert_eq!(self.dim, o.dim);
        (0..self.dim).map(|i| self.c[i] * o.c[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn dist(&self, o: &State) -> f64 {
        (*self - *o).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> State {
        let mut out = *self;
        for i in 0..self.dim {
            out.c[i] = f(self.c[i]);
        }
        out
    }

    /// Unit basis vector `e_i`.
    pub fn basis(dim: usize, i: usize) -> State {
        let mut s = State::zeros(dim);
        s.c[i] = 1.0;
        s
    }

    /// 2D cross product `a_x b_y - a_y b_x`; zero for scalars.
    pub fn cross(&self, o: &State) -> f64 {
        if self.dim == 2 {
            self.c[0] * o.c[1] - self.c[1] * o.c[0]
        } else {
            0.0
        }
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_slice())
    }
}

impl Index<usize> for State {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim);
        &self.c[i]
    }
}

impl IndexMut<usize> for State {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.dim);
        &mut self.c[i]
    }
}

impl Add for State {
    type Output = State;
    fn add(mut self, o: State) -> State {
        debug_assert_eq!(self.dim, o.dim);
        self.c[0] += o.c[0];
        self.c[1] += o.c[1];
        self
    }
}

impl AddAssign for State {
    fn add_assign(&mut self, o: State) {
        *self = *self + o;
    }
}

impl Sub for State {
    type Output = State;
    fn sub(mut self, o: State) -> State {
        debug_assert_eq!(self.dim, o.dim);
        self.c[0] -= o.c[0];
        self.c[1] -= o.c[1];
        self
    }
}

impl SubAssign for State {
    fn sub_assign(&mut self, o: State) {
        *self = *self - o;
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(mut self, s: f64) -> State {
        self.c[0] *= s;
        self.c[1] *= s;
        self
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, s: State) -> State {
        s * self
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        self * -1.0
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        State::from_slice(&v).map_err(D::Error::custom)
    }
}

/// A square matrix of dimension 1 or 2.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    dim: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "[[{}]]", self.a[0][0])
        } else {
            write!(f, "{:?}", self.a)
        }
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

/// Eigenvalues of a real 2x2 (or 1x1) matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eigenvalues {
    /// Real eigenvalues sorted ascending.
    Real([f64; MAX_DIM]),
    /// Complex pair `re +- i im` with `im > 0`.
    Complex { re: f64, im: f64 },
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Mat { dim, a: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        let mut m = Mat::zeros(1);
        m.a[0][0] = v;
        m
    }

    pub fn new2(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        Mat { dim: 2, a: [[a00, a01], [a10, a11]] }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.a[i][i] = *v;
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[State]) -> Self {
        let n = cols.len();
        let mut m = Mat::zeros(n);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                m.a[i][j] = c[i];
            }
        }
        m
    }

    /// Matrix whose rows are the given vectors.
    pub fn from_rows(rows: &[State]) -> Self {
        Mat::from_columns(rows).transpose()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.a[i][..self.dim].to_vec()).collect()
    }

    pub fn row(&self, i: usize) -> State {
        let mut s = State::zeros(self.dim);
        for j in 0..self.dim {
            s[j] = self.a[i][j];
        }
        s
    }

    pub fn col(&self, j: usize) -> State {
        let mut s = State::zeros(self.dim);
        for i in 0..self.dim {
            s[i] = self.a[i][j];
        }
        s
    }

    pub fn transpose(&self) -> Mat {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] = self.a[j][i];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &State) -> State {
        debug_assert_eq!(self.dim, v.dim());
        let mut out = State::zeros(self.dim);
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.a[i][j] * v[j]).sum();
        }
        out
    }

    /// Row vector times matrix: `v^T A`.
    pub fn vec_mul(&self, v: &State) -> State {
        self.transpose().mul_vec(v)
    }

    pub fn mul_mat(&self, o: &Mat) -> Mat {
        debug_assert_eq!(self.dim, o.dim);
        let mut m = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] = (0..self.dim).map(|k| self.a[i][k] * o.a[k][j]).sum();
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] *= s;
            }
        }
        m
    }

    pub fn add(&self, o: &Mat) -> Mat {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] += o.a[i][j];
            }
        }
        m
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        self.add(&o.scale(-1.0))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.a[0][0]
        } else {
            self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.a[i][j].is_finite()))
    }

    pub fn inverse(&self) -> Result<Mat> {
        let d = self.det();
        let scale = self.norm().max(f64::MIN_POSITIVE);
        if !d.is_finite() || d.abs() <= 1e-14 * scale.powi(self.dim as i32) {
            return Err(Error::SolverFailure(format!("singular matrix {self:?}")));
        }
        if self.dim == 1 {
            return Ok(Mat::scalar(1.0 / d));
        }
        Ok(Mat::new2(
            self.a[1][1] / d,
            -self.a[0][1] / d,
            -self.a[1][0] / d,
            self.a[0][0] / d,
        ))
    }

    pub fn solve(&self, b: &State) -> Result<State> {
        Ok(self.inverse()?.mul_vec(b))
    }

    /// Closed-form eigenvalues.
    pub fn eigenvalues(&self) -> Eigenvalues {
        if self.dim == 1 {
            return Eigenvalues::Real([self.a[0][0], 0.0]);
        }
        let (a, b, c, d) = (self.a[0][0], self.a[0][1], self.a[1][0], self.a[1][1]);
        let half_tr = 0.5 * (a + d);
        // Discriminant written to avoid cancellation for nearly diagonal matrices.
        let half_diff = 0.5 * (a - d);
        let disc = half_diff * half_diff + b * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            // Avoid cancellation in the smaller-magnitude root.
            let (l1, l2) = if half_tr >= 0.0 {
                let big = half_tr + s;
                let small = if big != 0.0 { self.det() / big } else { half_tr - s };
                (small, big)
            } else {
                let big = half_tr - s;
                let small = if big != 0.0 { self.det() / big } else { half_tr + s };
                (big, small)
            };
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            Eigenvalues::Real([lo, hi])
        } else {
            Eigenvalues::Complex { re: half_tr, im: (-disc).sqrt() }
        }
    }

    /// Right eigenvector for a real eigenvalue `mu`, unit Euclidean norm.
    pub fn eigenvector(&self, mu: f64) -> State {
        if self.dim == 1 {
            return State::scalar(1.0);
        }
        let (a, b, c, d) = (self.a[0][0], self.a[0][1], self.a[1][0], self.a[1][1]);
        // Two candidate null vectors of (A - mu I); take the better conditioned one.
        let v1 = State::pair(b, mu - a);
        let v2 = State::pair(mu - d, c);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        let n = v.norm();
        if n == 0.0 {
            // A = mu I: any vector is an eigenvector.
            return State::pair(1.0, 0.0);
        }
        v * (1.0 / n)
    }
}
