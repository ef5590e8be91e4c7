//! Multiplicative viscoplasticity with a generalized Neo-Hooke potential and
//! Perzyna-type flow.
//!
//! All energies are returned already multiplied by the reference density,
//! i.e. as `ρ_R·ψ_el` in MPa, so `rho_r` only enters the dissipation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{SymTensor3, Tensor3};

/// `√(2/3)`, the factor that maps the yield stress onto the driving-force norm.
pub const SQRT_2_3: f64 = 0.816_496_580_927_726;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Bulk modulus [MPa].
    pub k: f64,
    /// Shear modulus [MPa].
    pub mu: f64,
    /// Yield stress [MPa].
    #[serde(rename = "K")]
    pub yield_stress: f64,
    /// Perzyna exponent.
    pub m: f64,
    /// Viscosity parameter.
    pub eta: f64,
    /// Stress normalizer [MPa].
    pub k0: f64,
    #[serde(rename = "rho_R", default = "one")]
    pub rho_r: f64,
}

impl MaterialParams {
    /// The parameter set used for the long-time accuracy experiments.
    pub const TABLE1: MaterialParams = MaterialParams {
        k: 73_500.0,
        mu: 28_200.0,
        yield_stress: 270.0,
        m: 3.6,
        eta: 2.0e6,
        k0: 1.0,
        rho_r: 1.0,
    };

    /// Aluminium alloy values used for the stability-domain estimate; only
    /// `K` and `mu` matter there, the remaining entries follow [`Self::TABLE1`].
    pub fn aluminium(m: f64) -> Self {
        Self {
            mu: 25_000.0,
            yield_stress: 300.0,
            m,
            ..Self::TABLE1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool, &'static str); 7] = [
            ("k", self.k, self.k > 0.0, "k > 0"),
            ("mu", self.mu, self.mu > 0.0, "mu > 0"),
            ("K", self.yield_stress, self.yield_stress > 0.0, "K > 0"),
            ("m", self.m, self.m >= 1.0, "m >= 1"),
            ("eta", self.eta, self.eta > 0.0, "eta > 0"),
            ("k0", self.k0, self.k0 > 0.0, "k0 > 0"),
            ("rho_R", self.rho_r, self.rho_r > 0.0, "rho_R > 0"),
        ];
        for (name, value, ok, constraint) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter { name, constraint, value });
            }
        }
        Ok(())
    }

    /// Yield threshold on the driving-force norm, `√(2/3)·K`.
    pub fn yield_threshold(&self) -> f64 {
        SQRT_2_3 * self.yield_stress
    }

    /// Perzyna rate `(1/η)·⟨f/k0⟩^m`.
    pub fn perzyna_rate(&self, overstress: f64) -> f64 {
        if overstress > 0.0 {
            (overstress / self.k0).powf(self.m) / self.eta
        } else {
            0.0
        }
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::TABLE1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowQuantities {
    /// Second Piola-Kirchhoff stress [MPa].
    pub t_tilde: SymTensor3,
    /// Norm of the driving force [MPa].
    pub driving_norm: f64,
    /// Overstress [MPa].
    pub overstress: f64,
    /// Inelastic multiplier [1/s].
    pub multiplier: f64,
}

/// `ρ_R·ψ_el(A) = k/2·(ln√det A)² + μ/2·(tr Ā − 3)`.
pub fn free_energy(a: &Tensor3, params: &MaterialParams) -> Result<f64> {
    let det = a.det();
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::NonPositiveDeterminant { det });
    }
    let ln_sqrt_j = 0.5 * det.ln();
    let volumetric = 0.5 * params.k * ln_sqrt_j * ln_sqrt_j;
    let isochoric = 0.5 * params.mu * (a.trace() / det.cbrt() - 3.0);
    Ok(volumetric + isochoric)
}

/// Derivative of `ρ_R·ψ_el` with respect to a general argument `A`.
pub fn free_energy_gradient(a: &Tensor3, params: &MaterialParams) -> Result<Tensor3> {
    let det = a.det();
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::NonPositiveDeterminant { det });
    }
    let inv_t = a.invert()?.transpose();
    let iso = inv_t * a.unimodular()?.transpose().deviator();
    Ok(inv_t * (0.25 * params.k * det.ln()) + iso * (0.5 * params.mu))
}

fn check_symmetric(t: &Tensor3, what: &str) {
    if cfg!(debug_assertions) {
        let skew = t.skew().frobenius_norm();
        assert!(
            skew <= 1e-10 * t.frobenius_norm(),
            "{what} has skew residual {skew:e} relative to {:e}",
            t.frobenius_norm()
        );
    }
}

/// `T̃ = k·ln√(det C)·C⁻¹ + μ·C⁻¹·(C̄·Ci⁻¹)^D`.
pub fn pk2_stress(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams) -> Result<SymTensor3> {
    Ok(pk2_tensor(c, ci, params)?.sym())
}

fn pk2_tensor(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams) -> Result<Tensor3> {
    let ct = c.to_tensor();
    let c_inv = ct.invert()?;
    let ci_inv = ci.to_tensor().invert()?;
    let det = ct.det();
    let c_bar = ct.unimodular()?;
    let t = c_inv * (0.5 * params.k * det.ln()) + c_inv * (c_bar * ci_inv).deviator() * params.mu;
    check_symmetric(&t, "second Piola-Kirchhoff stress");
    Ok(t)
}

/// `(C·T̃)^D`, the driving force of the inelastic flow.
pub fn driving_force(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams) -> Result<Tensor3> {
    let t = pk2_stress(c, ci, params)?;
    Ok((c.to_tensor() * t.to_tensor()).deviator())
}

/// `sqrt(tr(X·X))`, the norm used for the driving force `X = (C·T̃)^D`.
pub fn driving_norm(x: &Tensor3) -> f64 {
    (*x * *x).trace().max(0.0).sqrt()
}

pub fn flow_quantities(
    c: &SymTensor3,
    ci: &SymTensor3,
    params: &MaterialParams,
) -> Result<FlowQuantities> {
    let t_tilde = pk2_stress(c, ci, params)?;
    let x = (c.to_tensor() * t_tilde.to_tensor()).deviator();
    let driving_norm = driving_norm(&x);
    let overstress = driving_norm - params.yield_threshold();
    Ok(FlowQuantities {
        t_tilde,
        driving_norm,
        overstress,
        multiplier: params.perzyna_rate(overstress),
    })
}

/// Overstress `f(C, Ci) = 𝔉 − √(2/3)·K`.
pub fn overstress(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams) -> Result<f64> {
    Ok(flow_quantities(c, ci, params)?.overstress)
}

/// `Ċi = 2·(λ_i/𝔉)·(C·T̃)^D·Ci`, zero whenever the multiplier vanishes.
pub fn evolution_rhs(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams) -> Result<SymTensor3> {
    let t_tilde = pk2_stress(c, ci, params)?;
    let x = (c.to_tensor() * t_tilde.to_tensor()).deviator();
    let norm = driving_norm(&x);
    let multiplier = params.perzyna_rate(norm - params.yield_threshold());
    if multiplier == 0.0 {
        return Ok(SymTensor3::zero());
    }
    let rate = x * ci.to_tensor() * (2.0 * multiplier / norm);
    check_symmetric(&rate, "evolution right-hand side");
    Ok(rate.sym())
}

/// Dissipation `δ_i = T̃:Ċ/(2ρ_R) − d/dt ψ_el(C·Ci⁻¹)`, with the time
/// derivative of the energy expanded by the chain rule.
pub fn dissipation(
    c: &SymTensor3,
    c_dot: &SymTensor3,
    ci: &SymTensor3,
    ci_dot: &SymTensor3,
    params: &MaterialParams,
) -> Result<f64> {
    let t_tilde = pk2_stress(c, ci, params)?;
    let ct = c.to_tensor();
    let ci_inv = ci.to_tensor().invert()?;
    let a = ct * ci_inv;
    let a_dot = c_dot.to_tensor() * ci_inv - ct * ci_inv * ci_dot.to_tensor() * ci_inv;
    let energy_rate = free_energy_gradient(&a, params)?.double_dot(&a_dot);
    Ok((0.5 * t_tilde.double_dot(c_dot) - energy_rate) / params.rho_r)
}

/// Pulls `C` and `Ci` back to the reference configuration given by the
/// isochoric `F0`: `F0⁻ᵀ·(·)·F0⁻¹`.
pub fn change_reference(
    c: &SymTensor3,
    ci: &SymTensor3,
    f0: &Tensor3,
) -> Result<(SymTensor3, SymTensor3)> {
    let det = f0.det();
    if (det - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnimodular { det });
    }
    let f_inv = f0.invert()?;
    let pull = |s: &SymTensor3| (f_inv.transpose() * s.to_tensor() * f_inv).sym();
    Ok((pull(c), pull(ci)))
}
