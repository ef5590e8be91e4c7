//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the library routine it is used to check.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viscoflow::material::{free_energy, MaterialParams};
use viscoflow::{SymTensor3, Tensor3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, scale: f64) -> Tensor3 {
    let mut rows = [[0.0; 3]; 3];
    for v in rows.iter_mut().flatten() {
        *v = scale * rng.random_range(-1.0..1.0);
    }
    Tensor3::from_rows(rows)
}

/// Random symmetric traceless direction with unit Frobenius norm.
pub fn random_deviatoric_direction(rng: &mut ChaCha8Rng) -> Tensor3 {
    let a = random_tensor(rng, 1.0);
    let s = (a + a.transpose()) * 0.5;
    let d = s - Tensor3::identity() * (s.trace() / 3.0);
    d * (1.0 / d.frobenius_norm())
}

/// `exp(S)` for symmetric `S` by eigendecomposition-free power series;
/// adequate for the small arguments used here.
pub fn series_exp(s: &Tensor3) -> Tensor3 {
    let mut term = Tensor3::identity();
    let mut sum = Tensor3::identity();
    for k in 1..40 {
        term = term * *s * (1.0 / k as f64);
        sum += term;
    }
    sum
}

/// Unimodular SPD tensor `exp(S)` with `S` traceless and `‖S‖ = size`.
pub fn random_unimodular_spd(rng: &mut ChaCha8Rng, size: f64) -> SymTensor3 {
    let d = random_deviatoric_direction(rng);
    let m = series_exp(&(d * size));
    let m = (m + m.transpose()) * 0.5;
    let det = m.det();
    let m = m * det.cbrt().recip();
    SymTensor3::new(m.get(0, 0), m.get(1, 1), m.get(2, 2), m.get(0, 1), m.get(0, 2), m.get(1, 2))
}

/// Random unimodular `F0 = unimodular(1 + scale·R)` with positive determinant.
pub fn random_unimodular_f(rng: &mut ChaCha8Rng, scale: f64) -> Tensor3 {
    loop {
        let f = Tensor3::identity() + random_tensor(rng, scale);
        let det = f.det();
        if det > 0.1 {
            return f * det.cbrt().recip();
        }
    }
}

/// Symmetric square root by Denman-Beavers iteration.
pub fn sqrt_db(a: &Tensor3) -> Tensor3 {
    let mut y = *a;
    let mut z = Tensor3::identity();
    for _ in 0..60 {
        let yi = y.invert().unwrap();
        let zi = z.invert().unwrap();
        y = (y + zi) * 0.5;
        z = (z + yi) * 0.5;
    }
    y
}

/// `q̂(Ci)` by maximizing `(B1⁰:Y)(B2⁰:Y)` over `n` directions
/// `Y = cos φ·e1 + sin φ·e2`, `φ ∈ [0, π)`, in the plane spanned by the
/// projected tensors. Full tensor arithmetic throughout.
pub fn q_hat_sweep(ci: &SymTensor3, n: usize) -> f64 {
    let c = ci.to_tensor();
    let c_inv = c.invert().unwrap();
    let root = sqrt_db(&c);
    let inv_root = root.invert().unwrap();
    let dev = c_inv - Tensor3::identity() * (c_inv.trace() / 3.0);
    let b1 = inv_root * dev * (-2.0 / dev.frobenius_norm());
    let b2 = inv_root;
    let ss = root.double_dot(&root);
    let project = |b: Tensor3| b - root * (b.double_dot(&root) / ss);
    let (p1, p2) = (project(b1), project(b2));
    let e1 = p1 * (1.0 / p1.frobenius_norm());
    let rest = p2 - e1 * p2.double_dot(&e1);
    let e2 = rest * (1.0 / rest.frobenius_norm());
    (0..n)
        .map(|i| {
            let phi = std::f64::consts::PI * i as f64 / n as f64;
            let y = e1 * phi.cos() + e2 * phi.sin();
            p1.double_dot(&y) * p2.double_dot(&y)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `2·∂ψ(C·Ci⁻¹)/∂C` by central differences over all nine entries of `C`.
pub fn fd_stress(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams, h: f64) -> Tensor3 {
    let ci_inv = ci.to_tensor().invert().unwrap();
    let psi = |m: &Tensor3| free_energy(&(*m * ci_inv), params).unwrap();
    let base = c.to_tensor().to_rows();
    let mut grad = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut plus = base;
            let mut minus = base;
            plus[i][j] += h;
            minus[i][j] -= h;
            let d = psi(&Tensor3::from_rows(plus)) - psi(&Tensor3::from_rows(minus));
            grad[i][j] = d / h;
        }
    }
    Tensor3::from_rows(grad)
}
