//! Symmetric 3×3 tensors stored by their six independent components.
//!
//! Every strain and stress measure of the material model is a symmetric tensor,
//! so this is the only value type the rest of the crate needs. Components are
//! kept in the canonical order `(a11, a22, a33, a12, a13, a23)`.
//!
//! Spectral functions (square root, exponential) go through a closed-form
//! eigensolver. Diagonal tensors, which is what coaxial loading produces, take
//! an exact fast path that never calls the solver.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative gap below which two eigenvalues are treated as repeated.
pub const EIGEN_TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SymTensor3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

/// Principal invariants plus the second deviatoric invariant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariants {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub j2: f64,
}

/// Eigenvalues sorted descending, eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralDecomp {
    pub values: [f64; 3],
    pub vectors: Mat3,
}

/// Dense 3×3 matrix, row-major. Used for eigenvector bases and for the
/// non-symmetric factor of congruence transforms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_columns(c0: [f64; 3], c1: [f64; 3], c2: [f64; 3]) -> Self {
        Mat3([
            [c0[0], c1[0], c2[0]],
            [c0[1], c1[1], c2[1]],
            [c0[2], c1[2], c2[2]],
        ])
    }

    pub fn column(&self, j: usize) -> [f64; 3] {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn matmul(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    /// Max-abs deviation of `QᵀQ` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let qtq = self.transpose().matmul(self);
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((qtq.0[i][j] - target).abs());
            }
        }
        err
    }
}

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: SymTensor3 = SymTensor3::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0);

    /// Components in canonical order `(a11, a22, a33, a12, a13, a23)`.
    pub const fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        Self { xx, yy, zz, xy, xz, yz }
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, b, c, 0.0, 0.0, 0.0)
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }

    /// Symmetric part of a dense matrix.
    pub fn from_mat3_sym(m: &Mat3) -> Self {
        let m = &m.0;
        Self::new(
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            0.5 * (m[1][2] + m[2][1]),
        )
    }

    pub fn to_mat3(&self) -> Mat3 {
        Mat3([
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ])
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [self.xx, self.yy, self.zz]
    }

    pub fn is_diagonal(&self) -> bool {
        self.xy == 0.0 && self.xz == 0.0 && self.yz == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn det(&self) -> f64 {
        if self.is_diagonal() {
            return self.xx * self.yy * self.zz;
        }
        self.xx * (self.yy * self.zz - self.yz * self.yz)
            - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    pub fn dev(&self) -> Self {
        let m = self.trace() / 3.0;
        Self::new(self.xx - m, self.yy - m, self.zz - m, self.xy, self.xz, self.yz)
    }

    /// Double contraction `A : B`.
    pub fn ddot(&self, other: &Self) -> f64 {
        self.xx * other.xx
            + self.yy * other.yy
            + self.zz * other.zz
            + 2.0 * (self.xy * other.xy + self.xz * other.xz + self.yz * other.yz)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn invariants(&self) -> Invariants {
        let i1 = self.trace();
        let i2 = 0.5 * (i1 * i1 - self.ddot(self));
        let d = self.dev();
        Invariants { i1, i2, i3: self.det(), j2: 0.5 * d.ddot(&d) }
    }

    /// `(Ĩ1, Ĩ2, I3)` with `Ĩ1 = I1·I3^(-1/3)` and `Ĩ2 = I2·I3^(-2/3)`.
    pub fn isochoric_invariants(&self) -> Result<(f64, f64, f64)> {
        let inv = self.invariants();
        if !(inv.i3 > 0.0) {
            return Err(Error::NonPositiveDeterminant(inv.i3));
        }
        let s = inv.i3.cbrt().recip();
        Ok((inv.i1 * s, inv.i2 * s * s, inv.i3))
    }

    /// `A·A`, which is symmetric.
    pub fn square(&self) -> Self {
        self.sym_product(self)
    }

    /// Symmetric part of `A·B`. Equals `A·B` when the two commute, which is the
    /// case for an isotropic function's argument and its derivative.
    pub fn sym_product(&self, other: &Self) -> Self {
        if self.is_diagonal() && other.is_diagonal() {
            return Self::diag(self.xx * other.xx, self.yy * other.yy, self.zz * other.zz);
        }
        Self::from_mat3_sym(&self.to_mat3().matmul(&other.to_mat3()))
    }

    /// `A·X·A` for symmetric `A`.
    pub fn sandwich(&self, x: &Self) -> Self {
        if self.is_diagonal() && x.is_diagonal() {
            return Self::diag(
                self.xx * x.xx * self.xx,
                self.yy * x.yy * self.yy,
                self.zz * x.zz * self.zz,
            );
        }
        let a = self.to_mat3();
        Self::from_mat3_sym(&a.matmul(&x.to_mat3()).matmul(&a))
    }

    /// `Mᵀ·X·M` for an arbitrary `M`.
    pub fn congruence(x: &Self, m: &Mat3) -> Self {
        Self::from_mat3_sym(&m.transpose().matmul(&x.to_mat3()).matmul(m))
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.is_diagonal() {
            if self.xx == 0.0 || self.yy == 0.0 || self.zz == 0.0 {
                return Err(Error::SingularTensor);
            }
            return Ok(Self::diag(1.0 / self.xx, 1.0 / self.yy, 1.0 / self.zz));
        }
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::SingularTensor);
        }
        let inv = 1.0 / det;
        let out = Self::new(
            (self.yy * self.zz - self.yz * self.yz) * inv,
            (self.xx * self.zz - self.xz * self.xz) * inv,
            (self.xx * self.yy - self.xy * self.xy) * inv,
            (self.xz * self.yz - self.xy * self.zz) * inv,
            (self.xy * self.yz - self.xz * self.yy) * inv,
            (self.xy * self.xz - self.xx * self.yz) * inv,
        );
        if !out.is_finite() {
            return Err(Error::SingularTensor);
        }
        Ok(out)
    }

    /// Inverse of a symmetric positive definite tensor.
    pub fn spd_inv(&self) -> Result<Self> {
        self.inverse()
    }

    /// Sylvester's criterion on the leading principal minors.
    pub fn is_spd(&self) -> bool {
        let m1 = self.xx;
        let m2 = self.xx * self.yy - self.xy * self.xy;
        m1 > 0.0 && m2 > 0.0 && self.det() > 0.0
    }

    pub fn spectral(&self) -> SpectralDecomp {
        if self.is_diagonal() {
            let d = self.diagonal();
            // stable sort keeps ex, ey, ez order for ties
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap_or(std::cmp::Ordering::Equal));
            let axis = |i: usize| {
                let mut e = [0.0; 3];
                e[i] = 1.0;
                e
            };
            return SpectralDecomp {
                values: [d[idx[0]], d[idx[1]], d[idx[2]]],
                vectors: Mat3::from_columns(axis(idx[0]), axis(idx[1]), axis(idx[2])),
            };
        }
        eigen_sym3(self)
    }

    /// `f(A)` for an isotropic scalar function applied to the eigenvalues.
    pub fn map_spectral(&self, f: impl Fn(f64) -> f64) -> Self {
        if self.is_diagonal() {
            return Self::diag(f(self.xx), f(self.yy), f(self.zz));
        }
        self.spectral().reconstruct_with(f)
    }

    pub fn spd_sqrt(&self) -> Result<Self> {
        if self.is_diagonal() {
            if !(self.xx > 0.0 && self.yy > 0.0 && self.zz > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            return Ok(Self::diag(self.xx.sqrt(), self.yy.sqrt(), self.zz.sqrt()));
        }
        let sd = self.spectral();
        if !(sd.values[2] > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(sd.reconstruct_with(f64::sqrt))
    }

    pub fn sym_exp(&self) -> Self {
        self.map_spectral(f64::exp)
    }
}

impl SpectralDecomp {
    pub fn reconstruct(&self) -> SymTensor3 {
        self.reconstruct_with(|x| x)
    }

    /// `Q·diag(f(λ))·Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymTensor3 {
        let q = &self.vectors.0;
        let fv = self.values.map(f);
        let entry = |i: usize, j: usize| (0..3).map(|k| fv[k] * q[i][k] * q[j][k]).sum::<f64>();
        SymTensor3::new(
            entry(0, 0),
            entry(1, 1),
            entry(2, 2),
            entry(0, 1),
            entry(0, 2),
            entry(1, 2),
        )
    }
}

impl Add for SymTensor3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.xx + o.xx,
            self.yy + o.yy,
            self.zz + o.zz,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yz + o.yz,
        )
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for SymTensor3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.xx - o.xx,
            self.yy - o.yy,
            self.zz - o.zz,
            self.xy - o.xy,
            self.xz - o.xz,
            self.yz - o.yz,
        )
    }
}

impl Neg for SymTensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(
            self.xx * s,
            self.yy * s,
            self.zz * s,
            self.xy * s,
            self.xz * s,
            self.yz * s,
        )
    }
}

impl Mul<SymTensor3> for f64 {
    type Output = SymTensor3;
    fn mul(self, t: SymTensor3) -> SymTensor3 {
        t * self
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scaled(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn normalized(a: [f64; 3]) -> [f64; 3] {
    scaled(a, 1.0 / dot(a, a).sqrt())
}

/// Non-iterative symmetric 3×3 eigensolver. The trigonometric roots only
/// identify the best-separated eigenvalue; its eigenvector comes from cross
/// products of the shifted rows, and the remaining pair is the closed-form
/// rotation that diagonalizes the 2×2 block on the orthogonal complement.
/// This keeps near-double roots accurate to round-off. Near-repeated
/// eigenvalues then get a basis built deterministically from the axes.
fn eigen_sym3(a: &SymTensor3) -> SpectralDecomp {
    let max_abs = a.max_abs();
    if max_abs == 0.0 {
        return SpectralDecomp { values: [0.0; 3], vectors: Mat3::IDENTITY };
    }
    let s = *a * (1.0 / max_abs);
    let q = s.trace() / 3.0;
    let b00 = s.xx - q;
    let b11 = s.yy - q;
    let b22 = s.zz - q;
    let p = ((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * (s.xy * s.xy + s.xz * s.xz + s.yz * s.yz))
        / 6.0)
        .sqrt();
    if p == 0.0 {
        let v = q * max_abs;
        return SpectralDecomp { values: [v; 3], vectors: Mat3::IDENTITY };
    }
    let c00 = b11 * b22 - s.yz * s.yz;
    let c01 = s.xy * b22 - s.yz * s.xz;
    let c02 = s.xy * s.yz - b11 * s.xz;
    let det = (b00 * c00 - s.xy * c01 + s.xz * c02) / (p * p * p);
    let half_det: f64 = (0.5 * det).clamp(-1.0, 1.0);
    let angle = half_det.acos() / 3.0;
    // largest root is isolated when half_det >= 0, smallest otherwise
    let isolated = if half_det >= 0.0 {
        q + 2.0 * p * angle.cos()
    } else {
        q + 2.0 * p * (angle + 2.0 * std::f64::consts::FRAC_PI_3).cos()
    };

    let m = s.to_mat3().0;
    let apply = |x: [f64; 3]| [dot(m[0], x), dot(m[1], x), dot(m[2], x)];
    let v0 = eigenvector_isolated(&s, isolated);
    let l0 = dot(v0, apply(v0));
    let (u, w) = orthogonal_complement(v0);
    let su = apply(u);
    let sw = apply(w);
    let m00 = dot(u, su);
    let m01 = dot(u, sw);
    let m11 = dot(w, sw);
    let theta = 0.5 * (2.0 * m01).atan2(m00 - m11);
    let (sn, cs) = theta.sin_cos();
    let v1 = [cs * u[0] + sn * w[0], cs * u[1] + sn * w[1], cs * u[2] + sn * w[2]];
    let v2 = cross(v0, v1);
    let l1 = m00 * cs * cs + 2.0 * m01 * cs * sn + m11 * sn * sn;
    let l2 = m00 * sn * sn - 2.0 * m01 * cs * sn + m11 * cs * cs;

    let mut pairs = [(l0, v0), (l1, v1), (l2, v2)];
    // stable, so equal values keep the order above
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let values = pairs.map(|(l, _)| l * max_abs);
    let mut vectors = pairs.map(|(_, v)| v);
    resolve_ties(&values, &mut vectors, a.norm());
    SpectralDecomp { values, vectors: Mat3::from_columns(vectors[0], vectors[1], vectors[2]) }
}

fn eigenvector_isolated(s: &SymTensor3, eval: f64) -> [f64; 3] {
    let r0 = [s.xx - eval, s.xy, s.xz];
    let r1 = [s.xy, s.yy - eval, s.yz];
    let r2 = [s.xz, s.yz, s.zz - eval];
    let c01 = cross(r0, r1);
    let c02 = cross(r0, r2);
    let c12 = cross(r1, r2);
    let d01 = dot(c01, c01);
    let d02 = dot(c02, c02);
    let d12 = dot(c12, c12);
    if d01 >= d02 && d01 >= d12 {
        scaled(c01, 1.0 / d01.sqrt())
    } else if d02 >= d12 {
        scaled(c02, 1.0 / d02.sqrt())
    } else {
        scaled(c12, 1.0 / d12.sqrt())
    }
}

fn orthogonal_complement(w: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let u = if w[0].abs() > w[1].abs() {
        let inv = 1.0 / (w[0] * w[0] + w[2] * w[2]).sqrt();
        [-w[2] * inv, 0.0, w[0] * inv]
    } else {
        let inv = 1.0 / (w[1] * w[1] + w[2] * w[2]).sqrt();
        [0.0, w[2] * inv, -w[1] * inv]
    };
    (u, cross(w, u))
}

/// Replace eigenvectors of (near-)repeated eigenvalues by a Gram–Schmidt basis
/// seeded with `ex`, `ey`, `ez` in that order.
fn resolve_ties(values: &[f64; 3], vectors: &mut [[f64; 3]; 3], scale: f64) {
    let tol = EIGEN_TIE_TOL * scale;
    let t01 = (values[0] - values[1]).abs() < tol;
    let t12 = (values[1] - values[2]).abs() < tol;
    const SEEDS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if t01 && t12 {
        *vectors = SEEDS;
        return;
    }
    let (pair, single) = if t01 {
        ([0usize, 1], 2usize)
    } else if t12 {
        ([1, 2], 0)
    } else {
        return;
    };
    let fixed = vectors[single];
    let first = SEEDS
        .iter()
        .map(|&e| {
            let c = dot(e, fixed);
            [e[0] - c * fixed[0], e[1] - c * fixed[1], e[2] - c * fixed[2]]
        })
        .find(|r| dot(*r, *r) > 0.25)
        .map(normalized)
        .expect("a unit vector is far from parallel to at least one axis");
    let second = cross(fixed, first);
    vectors[pair[0]] = first;
    vectors[pair[1]] = second;
}
