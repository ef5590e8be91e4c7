//! Exponential stability of the inelastic flow.
//!
//! Contains the distance between inelastic states, a decay-rate fit for pairs
//! of trajectories, a one-dimensional rheological model with a closed-form
//! implicit update, and the curvature bound `q` that delimits the region in
//! which two solutions are guaranteed to approach each other.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::step_count;
use crate::material::{MaterialParams, SQRT_2_3};
use crate::tensor::SymTensor3;

/// `dist(A, B) = ‖A^(−1/2)·B·A^(−1/2) − 1‖`.
pub fn dist(a: &SymTensor3, b: &SymTensor3) -> Result<f64> {
    let h = a.inv_sqrt()?.to_tensor();
    let _ = b.checked_spd()?;
    let m = h * b.to_tensor() * h;
    Ok((m - crate::tensor::Tensor3::identity()).frobenius_norm())
}

/// Maxwell-type element: spring `E`, friction threshold `K`, dashpot `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rheo1DParams {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub eta: f64,
    /// `ε̇` of the prescribed strain `ε(t) = ε̇·t + ε̈·t²/2`.
    pub strain_rate: f64,
    #[serde(default)]
    pub strain_accel: f64,
}

impl Rheo1DParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    constraint: "a positive finite value",
                    value,
                })
            }
        };
        positive("E", self.e)?;
        positive("K", self.k)?;
        positive("eta", self.eta)?;
        for (name, v) in [("strain_rate", self.strain_rate), ("strain_accel", self.strain_accel)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    constraint: "a finite value",
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn strain(&self, t: f64) -> f64 {
        self.strain_rate * t + 0.5 * self.strain_accel * t * t
    }

    /// Decay rate `E/η` of the difference between two flowing solutions.
    pub fn decay_rate(&self) -> f64 {
        self.e / self.eta
    }

    /// One implicit Euler step from `eps_i` to the strain `eps_next`.
    pub fn step(&self, eps_i: f64, eps_next: f64, dt: f64) -> f64 {
        let d = eps_next - eps_i;
        let trial = self.e * d.abs() - self.k;
        if trial <= 0.0 {
            return eps_i;
        }
        let r = dt / self.eta;
        eps_i + d.signum() * r * trial / (1.0 + self.e * r)
    }
}

/// `(t, εi)` on the grid `t_n = n·dt`, `0 ≤ t_n ≤ t_end`.
pub fn simulate_1d(params: &Rheo1DParams, eps_i0: f64, t_end: f64, dt: f64) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    let steps = step_count(t_end, dt)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut eps_i = eps_i0;
    out.push((0.0, eps_i));
    for n in 1..=steps {
        let t = n as f64 * dt;
        eps_i = params.step(eps_i, params.strain(t), dt);
        out.push((t, eps_i));
    }
    Ok(out)
}

/// Least-squares line through `(t, ln dist)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// `max(0, −slope)`.
    pub gamma: f64,
    pub slope: f64,
    pub intercept: f64,
    pub samples: usize,
}

/// Fits `dist(a(t), b(t)) ≈ exp(intercept + slope·t)` over `window`, by
/// default the last 80 % of the common time range.
pub fn estimate_decay_rate<S, F>(
    a: &[(f64, S)],
    b: &[(f64, S)],
    distance: F,
    window: Option<(f64, f64)>,
) -> Result<DecayFit>
where
    F: Fn(&S, &S) -> Result<f64>,
{
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x.0 - y.0).abs() > 1e-9 * x.0.abs().max(1.0)) {
        return Err(Error::MismatchedTimes);
    }
    let (lo, hi) = match window {
        Some(w) => w,
        None => {
            let (Some(first), Some(last)) = (a.first(), a.last()) else {
                return Err(Error::EmptyWindow { lo: 0.0, hi: 0.0 });
            };
            (first.0 + 0.2 * (last.0 - first.0), last.0)
        }
    };
    let mut pts = Vec::new();
    for ((t, x), (_, y)) in a.iter().zip(b) {
        if !(lo..=hi).contains(t) {
            continue;
        }
        let d = distance(x, y)?;
        if !(d > 0.0) {
            return Err(Error::NonPositiveDistance { t: *t, value: d });
        }
        pts.push((*t, d.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        gamma: (-slope).max(0.0),
        slope,
        intercept: my - slope * mt,
        samples: pts.len(),
    })
}

/// Curvature bound at a diagonal inelastic state `diag(λ)` with `Πλ = 1`.
/// The bound is invariant under rotations, so general states are reduced to
/// their eigenvalues.
fn q_hat_diag(lam: [f64; 3]) -> Result<f64> {
    let inv = lam.map(|l| 1.0 / l);
    let mean = (inv[0] + inv[1] + inv[2]) / 3.0;
    let dev = inv.map(|v| v - mean);
    let dev_norm = dev.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dev_norm <= 1e-14 * inv.iter().map(|v| v * v).sum::<f64>().sqrt() {
        return Err(Error::ZeroDeviator);
    }
    let s = lam.map(f64::sqrt);
    let b1: [f64; 3] = std::array::from_fn(|i| -2.0 * dev[i] / (s[i] * dev_norm));
    let b2: [f64; 3] = std::array::from_fn(|i| 1.0 / s[i]);
    let dot = |x: &[f64; 3], y: &[f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    let ss = dot(&s, &s);
    let project = |b: [f64; 3]| {
        let c = dot(&b, &s) / ss;
        [b[0] - c * s[0], b[1] - c * s[1], b[2] - c * s[2]]
    };
    let (p1, p2) = (project(b1), project(b2));
    let (b11, b12, b22) = (dot(&p1, &p1), dot(&p1, &p2), dot(&p2, &p2));
    // largest eigenvalue of ½·[[b12, b22], [b11, b12]]
    Ok(0.5 * (b12 + (b11 * b22).max(0.0).sqrt()))
}

/// `q̂(Ci)` for a unimodular symmetric positive definite `Ci`.
pub fn q_hat(ci: &SymTensor3) -> Result<f64> {
    let det = ci.det();
    if (det - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnimodular { det });
    }
    let (lam, _) = ci.eigen();
    if !(lam[0] > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lam[0] });
    }
    q_hat_diag(lam)
}

/// `q(θ) = max q̂(Ci)` over unimodular `Ci` with `‖(Ci⁻¹)^D‖ ≤ θ`, searched
/// on a log-spaced grid of diagonal states followed by one tenfold
/// refinement around the best cell.
pub fn q_theta(theta: f64, resolution: usize) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "theta",
            constraint: "theta > 0",
            value: theta,
        });
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            constraint: "resolution >= 2",
            value: resolution as f64,
        });
    }
    // eigenvalues of admissible states lie within exp(±2θ) for small θ
    let span = 2.0 * theta;
    let h = 2.0 * span / (resolution - 1) as f64;
    let eval = |u: f64, v: f64| -> Option<f64> {
        let lam = [u.exp(), v.exp(), (-u - v).exp()];
        let inv = lam.map(|l| 1.0 / l);
        let mean = (inv[0] + inv[1] + inv[2]) / 3.0;
        let norm = inv.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt();
        if norm > theta {
            return None;
        }
        q_hat_diag(lam).ok()
    };
    let better = |a: Option<(f64, f64, f64)>, b: Option<(f64, f64, f64)>| match (a, b) {
        (Some(x), Some(y)) => Some(if y.0 > x.0 { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    };

    let coarse = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let u = -span + i as f64 * h;
            (0..resolution)
                .filter_map(|j| {
                    let v = -span + j as f64 * h;
                    eval(u, v).map(|q| (q, u, v))
                })
                .fold(None, |acc, p| better(acc, Some(p)))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None, better);
    let Some((_, u0, v0)) = coarse else {
        return Err(Error::InfeasibleTheta { theta });
    };

    let fine = h / 10.0;
    let refined = (-10..=10)
        .flat_map(|i| (-10..=10).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let (u, v) = (u0 + i as f64 * fine, v0 + j as f64 * fine);
            eval(u, v).map(|q| (q, u, v))
        })
        .fold(coarse, |acc, p| better(acc, Some(p)));
    Ok(refined.map(|r| r.0).expect("coarse optimum is feasible"))
}

/// Quantities delimiting the guaranteed-stability region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityDomain {
    /// Radius `2·√(2/3)·K/μ` of the region reachable by a flowing state.
    pub theta: f64,
    pub q: f64,
    pub x_cr: f64,
    pub f_cr: f64,
    /// Leading-order estimates `√(2/3)·K/μ + m·q` and `m·μ·q`.
    pub x_cr_estimate: f64,
    pub f_cr_estimate: f64,
}

pub fn theta_for(params: &MaterialParams) -> f64 {
    2.0 * SQRT_2_3 * params.yield_stress / params.mu
}

/// Critical values for a given curvature bound `q ≥ 0`.
pub fn critical_values(params: &MaterialParams, q: f64) -> Result<StabilityDomain> {
    params.validate()?;
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::InvalidParameter {
            name: "q",
            constraint: "q >= 0",
            value: q,
        });
    }
    let (mu, m) = (params.mu, params.m);
    let s = params.yield_threshold();
    let a = s + (m - 1.0) * mu * q;
    let root = (a * a + 4.0 * mu * q * s).sqrt();
    // μ·x_cr − s rewritten to avoid cancelling two O(s) terms
    let f_cr = (m - 1.0) * mu * q + 2.0 * mu * q * s / (root + a);
    Ok(StabilityDomain {
        theta: theta_for(params),
        q,
        x_cr: (s + f_cr) / mu,
        f_cr,
        x_cr_estimate: s / mu + m * q,
        f_cr_estimate: m * mu * q,
    })
}

/// Evaluates `q(θ)` for the material's `θ` and the resulting critical values.
pub fn stability_domain(params: &MaterialParams, resolution: usize) -> Result<StabilityDomain> {
    stability_domain_at(params, theta_for(params), resolution)
}

/// As [`stability_domain`] with `q` taken at an explicitly given `θ`.
pub fn stability_domain_at(params: &MaterialParams, theta: f64, resolution: usize) -> Result<StabilityDomain> {
    params.validate()?;
    let q = q_theta(theta, resolution)?;
    Ok(StabilityDomain {
        theta,
        ..critical_values(params, q)?
    })
}
