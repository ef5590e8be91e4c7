//! Second-rank tensors in three dimensions.
//!
//! [`Tensor3`] is a general 3×3 tensor; [`SymTensor3`] stores only the six
//! independent components of a symmetric tensor, in the order
//! `(11, 22, 33, 12, 13, 23)`. Components are always reached through the
//! accessors so the storage order stays an internal detail.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative determinant threshold below which [`Tensor3::invert`] refuses.
pub const SINGULARITY_THRESHOLD: f64 = 1e-14;

/// General second-rank tensor.
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor3(Matrix3<f64>);

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Tensor3").field(&self.to_rows()).finish()
    }
}

impl Tensor3 {
    pub fn zero() -> Self {
        Self(Matrix3::zeros())
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self(Matrix3::from_diagonal(&nalgebra::Vector3::new(a, b, c)))
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub(crate) fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    /// Scalar product `A : B = tr(A·Bᵀ)`.
    pub fn double_dot(&self, other: &Self) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.double_dot(self).sqrt()
    }

    /// Largest singular value, i.e. the norm induced by the Euclidean vector norm.
    pub fn spectral_norm(&self) -> f64 {
        let ata = SymTensor3::from_tensor_unchecked(&(self.transpose() * *self));
        let (values, _) = ata.eigen();
        values[2].max(0.0).sqrt()
    }

    /// `A − tr(A)/3 · 1`.
    pub fn deviator(&self) -> Self {
        let mean = self.trace() / 3.0;
        let mut m = self.0;
        for i in 0..3 {
            m[(i, i)] -= mean;
        }
        Self(m)
    }

    /// `det(A)^(−1/3) · A`.
    pub fn unimodular(&self) -> Result<Self> {
        let det = self.det();
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::NonPositiveDeterminant { det });
        }
        Ok(*self * det.cbrt().recip())
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn sym(&self) -> SymTensor3 {
        let m = &self.0;
        SymTensor3::new(
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * (m[(0, 2)] + m[(2, 0)]),
            0.5 * (m[(1, 2)] + m[(2, 1)]),
        )
    }

    /// Skew part `(A − Aᵀ)/2`.
    pub fn skew(&self) -> Self {
        (*self - self.transpose()) * 0.5
    }

    pub fn invert(&self) -> Result<Self> {
        let det = self.det();
        let scale = self.frobenius_norm();
        if !det.is_finite() || det.abs() <= SINGULARITY_THRESHOLD * scale * scale * scale {
            return Err(Error::SingularTensor { det });
        }
        self.0
            .try_inverse()
            .map(Self)
            .ok_or(Error::SingularTensor { det })
    }

    /// Matrix exponential by scaling and squaring with a truncated Taylor series.
    pub fn exp(&self) -> Self {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return Self::identity();
        }
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let a = self.0 / 2f64.powi(squarings);
        let mut sum = Matrix3::identity();
        let mut term = Matrix3::identity();
        for n in 1..=40 {
            term = term * a / n as f64;
            sum += term;
            if term.norm() <= 1e-16 * sum.norm() {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        Self(sum)
    }
}

impl Add for Tensor3 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl AddAssign for Tensor3 {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for Tensor3 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Neg for Tensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Mul for Tensor3 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl Mul<f64> for Tensor3 {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self(self.0 * rhs)
    }
}

impl Mul<Tensor3> for f64 {
    type Output = Tensor3;
    fn mul(self, rhs: Tensor3) -> Tensor3 {
        rhs * self
    }
}

/// Symmetric second-rank tensor stored as `(11, 22, 33, 12, 13, 23)`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor3([f64; 6]);

impl fmt::Debug for SymTensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SymTensor3").field(&self.0).finish()
    }
}

impl SymTensor3 {
    /// Components in the order `11, 22, 33, 12, 13, 23`.
    pub const fn new(c11: f64, c22: f64, c33: f64, c12: f64, c13: f64, c23: f64) -> Self {
        Self([c11, c22, c33, c12, c13, c23])
    }

    pub const fn zero() -> Self {
        Self([0.0; 6])
    }

    pub const fn identity() -> Self {
        Self([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Self([a, b, c, 0.0, 0.0, 0.0])
    }

    pub const fn from_components(c: [f64; 6]) -> Self {
        Self(c)
    }

    /// Components in storage order `11, 22, 33, 12, 13, 23`.
    pub const fn components(&self) -> [f64; 6] {
        self.0
    }

    /// Builds from the upper triangle of `a` without checking symmetry.
    pub fn from_tensor_unchecked(a: &Tensor3) -> Self {
        Self::new(a.get(0, 0), a.get(1, 1), a.get(2, 2), a.get(0, 1), a.get(0, 2), a.get(1, 2))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.0[0],
            (1, 1) => self.0[1],
            (2, 2) => self.0[2],
            (0, 1) => self.0[3],
            (0, 2) => self.0[4],
            (1, 2) => self.0[5],
            _ => panic!("tensor index ({i}, {j}) out of range"),
        }
    }

    pub fn to_tensor(&self) -> Tensor3 {
        let [a11, a22, a33, a12, a13, a23] = self.0;
        Tensor3::from_rows([[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn det(&self) -> f64 {
        let [a11, a22, a33, a12, a13, a23] = self.0;
        a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) + a13 * (a12 * a23 - a22 * a13)
    }

    pub fn double_dot(&self, other: &Self) -> f64 {
        let a = &self.0;
        let b = &other.0;
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.double_dot(self).sqrt()
    }

    pub fn deviator(&self) -> Self {
        let mean = self.trace() / 3.0;
        let mut c = self.0;
        for v in c.iter_mut().take(3) {
            *v -= mean;
        }
        Self(c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|v| v * s))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order and the matching orthonormal eigenvectors
    /// as columns of the returned tensor.
    pub fn eigen(&self) -> ([f64; 3], Tensor3) {
        let [a11, a22, a33, a12, a13, a23] = self.0;
        if a12 == 0.0 && a13 == 0.0 && a23 == 0.0 {
            let mut order = [(a11, 0usize), (a22, 1), (a33, 2)];
            order.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut vectors = Matrix3::zeros();
            for (col, &(_, axis)) in order.iter().enumerate() {
                vectors[(axis, col)] = 1.0;
            }
            return ([order[0].0, order[1].0, order[2].0], Tensor3(vectors));
        }
        let eig = SymmetricEigen::new(*self.to_tensor().matrix());
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.map(|i| eig.eigenvalues[i]);
        let vectors = Matrix3::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);
        (values, Tensor3(vectors))
    }

    pub fn is_positive_definite(&self) -> bool {
        let (values, _) = self.eigen();
        values[0] > 0.0 && values.iter().all(|v| v.is_finite())
    }

    /// Returns `self` unchanged if all eigenvalues are positive.
    pub fn checked_spd(self) -> Result<Self> {
        let (values, _) = self.eigen();
        if values[0] > 0.0 && values[2].is_finite() {
            Ok(self)
        } else {
            Err(Error::NotPositiveDefinite { min_eigenvalue: values[0] })
        }
    }

    /// Applies `g` to the eigenvalues, keeping the eigenvectors.
    fn spectral_map(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        let (values, vectors) = self.eigen();
        if !(values[0] > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: values[0] });
        }
        let q = vectors.matrix();
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::from(values.map(g)));
        Ok(Self::from_tensor_unchecked(&Tensor3(q * d * q.transpose())))
    }

    /// Principal square root of a symmetric positive definite tensor.
    pub fn sqrt(&self) -> Result<Self> {
        self.spectral_map(f64::sqrt)
    }

    /// `A^(−1/2)` for symmetric positive definite `A`.
    pub fn inv_sqrt(&self) -> Result<Self> {
        self.spectral_map(|v| v.sqrt().recip())
    }

    pub fn inverse(&self) -> Result<Self> {
        self.to_tensor().invert().map(|t| t.sym())
    }

    pub fn unimodular(&self) -> Result<Self> {
        let det = self.det();
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::NonPositiveDeterminant { det });
        }
        Ok(self.scale(det.cbrt().recip()))
    }
}

impl Add for SymTensor3 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.0;
        for (v, r) in c.iter_mut().zip(rhs.0) {
            *v += r;
        }
        Self(c)
    }
}

impl Sub for SymTensor3 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut c = self.0;
        for (v, r) in c.iter_mut().zip(rhs.0) {
            *v -= r;
        }
        Self(c)
    }
}

impl From<SymTensor3> for Tensor3 {
    fn from(s: SymTensor3) -> Self {
        s.to_tensor()
    }
}

pub fn frobenius_norm(a: &Tensor3) -> f64 {
    a.frobenius_norm()
}

pub fn spectral_norm(a: &Tensor3) -> f64 {
    a.spectral_norm()
}

pub fn deviator(a: &Tensor3) -> Tensor3 {
    a.deviator()
}

pub fn unimodular(a: &Tensor3) -> Result<Tensor3> {
    a.unimodular()
}

pub fn sym(a: &Tensor3) -> SymTensor3 {
    a.sym()
}

pub fn sym_sqrt(a: &SymTensor3) -> Result<SymTensor3> {
    a.sqrt()
}

pub fn tensor_exp(a: &Tensor3) -> Tensor3 {
    a.exp()
}

pub fn invert(a: &Tensor3) -> Result<Tensor3> {
    a.invert()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use proptest::strategy::ValueTree;

    const SQRT_3: f64 = 1.732_050_807_568_877_2;

    fn close(a: &Tensor3, b: &Tensor3, tol: f64) -> bool {
        (*a - *b).frobenius_norm() <= tol
    }

    fn arb_tensor() -> impl Strategy<Value = Tensor3> {
        proptest::array::uniform9(-2.0f64..2.0).prop_map(|v| {
            Tensor3::from_rows([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
        })
    }

    fn arb_spd() -> impl Strategy<Value = SymTensor3> {
        arb_tensor().prop_map(|g| {
            let s = (g.transpose() * g).sym();
            s + SymTensor3::identity().scale(0.1)
        })
    }

    #[test]
    fn frobenius_examples() {
        assert!((Tensor3::identity().frobenius_norm() - SQRT_3).abs() < 1e-15);
        assert_eq!(Tensor3::zero().frobenius_norm(), 0.0);
        assert!((Tensor3::diag(3.0, 4.0, 0.0).frobenius_norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_examples() {
        assert!((Tensor3::identity().spectral_norm() - 1.0).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((Tensor3::diag(2.0, s, s).spectral_norm() - 2.0).abs() < 1e-14);
        let shear = Tensor3::from_rows([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        // singular values of the unit shear are the golden ratio and its inverse
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((shear.spectral_norm() - golden).abs() < 1e-13);
    }

    #[test]
    fn deviator_examples() {
        assert_eq!(Tensor3::identity().deviator(), Tensor3::zero());
        let d = Tensor3::diag(3.0, 0.0, 0.0).deviator();
        assert!(close(&d, &Tensor3::diag(2.0, -1.0, -1.0), 1e-15));
    }

    #[test]
    fn unimodular_examples() {
        assert!(close(&Tensor3::identity().unimodular().unwrap(), &Tensor3::identity(), 1e-15));
        let two = Tensor3::identity() * 2.0;
        assert!(close(&two.unimodular().unwrap(), &Tensor3::identity(), 1e-15));
        let u = Tensor3::diag(2.0, 1.0, 1.0).unimodular().unwrap();
        let s = 2f64.powf(-1.0 / 3.0);
        assert!(close(&u, &Tensor3::diag(2.0 * s, s, s), 1e-15));
        assert!((u.det() - 1.0).abs() < 1e-12);
        assert!(matches!(
            Tensor3::diag(-1.0, 1.0, 1.0).unimodular(),
            Err(Error::NonPositiveDeterminant { .. })
        ));
        assert!(Tensor3::zero().unimodular().is_err());
    }

    #[test]
    fn sym_examples() {
        let s = SymTensor3::new(1.0, 2.0, 3.0, 0.4, 0.5, 0.6);
        assert_eq!(s.to_tensor().sym(), s);
        let skew = Tensor3::from_rows([[0.0, 1.0, -2.0], [-1.0, 0.0, 3.0], [2.0, -3.0, 0.0]]);
        assert_eq!(skew.sym(), SymTensor3::zero());
        let shear = Tensor3::from_rows([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(shear.sym(), SymTensor3::new(1.0, 1.0, 1.0, 0.5, 0.0, 0.0));
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(SymTensor3::identity().sqrt().unwrap(), SymTensor3::identity());
        assert_eq!(
            SymTensor3::diag(4.0, 9.0, 1.0).sqrt().unwrap(),
            SymTensor3::diag(2.0, 3.0, 1.0)
        );
        assert!(matches!(
            SymTensor3::diag(1.0, -1.0, 1.0).sqrt(),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(SymTensor3::diag(1.0, 0.0, 1.0).sqrt().is_err());
    }

    #[test]
    fn exp_examples() {
        assert_eq!(Tensor3::zero().exp(), Tensor3::identity());
        let e = Tensor3::diag(0.3, -1.2, 2.5).exp();
        let expected = Tensor3::diag(0.3f64.exp(), (-1.2f64).exp(), 2.5f64.exp());
        assert!(close(&e, &expected, 1e-13 * expected.frobenius_norm()));
    }

    #[test]
    fn exp_matches_second_order_taylor_to_third_order() {
        let dir = Tensor3::from_rows([[0.3, -0.7, 0.2], [0.5, 0.1, -0.4], [-0.6, 0.9, -0.2]]);
        let mut ratios = Vec::new();
        for s in [1e-1, 1e-2, 1e-3] {
            let a = dir * s;
            let taylor = Tensor3::identity() + a + (a * a) * 0.5;
            let residual = (a.exp() - taylor).frobenius_norm();
            ratios.push(residual / a.frobenius_norm().powi(3));
        }
        // the cubic coefficient is bounded by 1/6 · ‖A‖³ / ‖A‖³ ≤ 1/6
        for r in &ratios {
            assert!(*r < 1.0 / 6.0 + 1e-3, "ratio {r}");
        }
        assert!((ratios[1] - ratios[2]).abs() < 0.05 * ratios[2]);
    }

    #[test]
    fn invert_examples() {
        assert_eq!(Tensor3::identity().invert().unwrap(), Tensor3::identity());
        let inv = Tensor3::diag(2.0, 4.0, 0.125).invert().unwrap();
        assert!(close(&inv, &Tensor3::diag(0.5, 0.25, 8.0), 1e-15));
        let singular = Tensor3::from_rows([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        assert!(matches!(singular.invert(), Err(Error::SingularTensor { .. })));
    }

    #[test]
    fn sym_storage_accessors_agree() {
        let s = SymTensor3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        let t = s.to_tensor();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.get(i, j), t.get(i, j));
            }
        }
        assert!((s.det() - t.det()).abs() < 1e-12);
        assert!((s.frobenius_norm() - t.frobenius_norm()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn deviator_is_traceless_and_idempotent(a in arb_tensor()) {
            let d = a.deviator();
            prop_assert!(d.trace().abs() <= 1e-14 * (1.0 + a.frobenius_norm()));
            prop_assert!(close(&d.deviator(), &d, 1e-14 * (1.0 + a.frobenius_norm())));
        }

        #[test]
        fn unimodular_has_unit_determinant(a in arb_tensor()) {
            prop_assume!(a.det() > 1e-3);
            prop_assert!((a.unimodular().unwrap().det() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sqrt_round_trip_and_commutes(a in arb_spd()) {
            let r = a.sqrt().unwrap();
            prop_assert!(r.is_positive_definite());
            let rt = r.to_tensor();
            let at = a.to_tensor();
            prop_assert!(close(&(rt * rt), &at, 1e-10 * (1.0 + a.frobenius_norm())));
            prop_assert!(close(&(rt * at), &(at * rt), 1e-10 * (1.0 + a.frobenius_norm())));
        }

        #[test]
        fn exp_of_traceless_is_unimodular(a in arb_tensor()) {
            let e = a.deviator().exp();
            prop_assert!((e.det() - 1.0).abs() < 1e-10 * e.frobenius_norm().powi(3).max(1.0));
        }

        #[test]
        fn exp_of_commuting_sum(d in proptest::array::uniform3(-1.0f64..1.0), s in -1.0f64..1.0) {
            let a = Tensor3::diag(d[0], d[1], d[2]);
            let b = a * s + Tensor3::identity() * 0.3;
            let lhs = a.exp() * b.exp();
            let rhs = (a + b).exp();
            prop_assert!(close(&lhs, &rhs, 1e-12 * rhs.frobenius_norm()));
        }

        #[test]
        fn invert_round_trip(a in arb_tensor()) {
            let shifted = a + Tensor3::identity() * 7.0;
            let inv = shifted.invert().unwrap();
            prop_assert!(close(&(shifted * inv), &Tensor3::identity(), 1e-10));
        }
    }

    #[test]
    fn norm_equivalence_on_many_tensors() {
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        for _ in 0..1000 {
            let a = arb_tensor().new_tree(&mut runner).unwrap().current();
            let s = a.spectral_norm();
            let f = a.frobenius_norm();
            assert!(s <= f * (1.0 + 1e-12) + 1e-15);
            assert!(f <= SQRT_3 * s * (1.0 + 1e-12) + 1e-15);
        }
    }
}
