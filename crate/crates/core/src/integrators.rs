//! Implicit one-step integrators for the inelastic right Cauchy-Green tensor.
//!
//! All three schemes share the same structure: given `ⁿ⁺¹C` and `ⁿCi`, find
//! `ⁿ⁺¹Ci` and the increment `ξ ≥ 0` such that
//!
//! ```text
//! ⁿ⁺¹Ci = Φ(ⁿCi, B(ⁿ⁺¹C, ⁿ⁺¹Ci, ξ)),    ξ = Δt/η·⟨f(ⁿ⁺¹C, ⁿ⁺¹Ci)/k0⟩^m
//! ```
//!
//! with `B = 2ξ/𝔉·(C·T̃)^D`. The schemes differ only in `Φ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loading::LoadingProgram;
use crate::material::{driving_force, driving_norm, overstress, MaterialParams};
use crate::tensor::{SymTensor3, Tensor3};
use crate::trajectory::Trajectory;

/// Below this driving-force norm the flow direction is treated as undefined.
const DEGENERATE_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntegratorKind {
    /// Implicit Euler with the multiplicative update `[1 − B]⁻¹·ⁿCi`.
    #[serde(rename = "EBM")]
    Ebm,
    /// As [`IntegratorKind::Ebm`] followed by projection onto `det = 1`.
    #[serde(rename = "MEBM")]
    Mebm,
    /// Exponential map `exp(B)·ⁿCi`, projected onto `det = 1`.
    #[serde(rename = "EM")]
    Em,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 3] = [IntegratorKind::Ebm, IntegratorKind::Mebm, IntegratorKind::Em];

    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::Ebm => "EBM",
            IntegratorKind::Mebm => "MEBM",
            IntegratorKind::Em => "EM",
        }
    }

    /// Whether the scheme keeps `det Ci = 1` exactly.
    pub fn preserves_determinant(self) -> bool {
        !matches!(self, IntegratorKind::Ebm)
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EBM" => Ok(IntegratorKind::Ebm),
            "MEBM" => Ok(IntegratorKind::Mebm),
            "EM" => Ok(IntegratorKind::Em),
            _ => Err(Error::Config(format!("unknown integrator `{s}` (expected EBM, MEBM or EM)"))),
        }
    }
}

/// One implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepProblem {
    pub c_next: SymTensor3,
    pub ci_prev: SymTensor3,
    pub dt: f64,
    pub params: MaterialParams,
    pub kind: IntegratorKind,
    /// Starting value for `ξ`, typically the increment of the previous step.
    pub xi_guess: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSolution {
    pub ci_next: SymTensor3,
    pub xi: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Convergence when `‖R_C‖ + |R_ξ| < rel_tol·(1 + ‖ⁿCi‖)`.
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iterations: 50,
            max_halvings: 10,
        }
    }
}

/// `B = 2ξ/𝔉·(C·T̃)^D` evaluated at `(ⁿ⁺¹C, Ci)`.
pub fn operator_b(
    c_next: &SymTensor3,
    ci: &SymTensor3,
    xi: f64,
    params: &MaterialParams,
) -> Result<Tensor3> {
    if !(xi >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "xi",
            constraint: "xi >= 0",
            value: xi,
        });
    }
    operator_b_unchecked(c_next, ci, xi, params)
}

fn operator_b_unchecked(
    c_next: &SymTensor3,
    ci: &SymTensor3,
    xi: f64,
    params: &MaterialParams,
) -> Result<Tensor3> {
    if xi == 0.0 {
        return Ok(Tensor3::zero());
    }
    let x = driving_force(c_next, ci, params)?;
    let norm = driving_norm(&x);
    if norm < DEGENERATE_NORM {
        return Err(Error::DegenerateDrivingForce { norm });
    }
    Ok(x * (2.0 * xi / norm))
}

/// The scheme-specific update `Φ(ⁿCi, B)`.
pub fn update_map(kind: IntegratorKind, ci_prev: &SymTensor3, b: &Tensor3) -> Result<SymTensor3> {
    let ci = ci_prev.to_tensor();
    match kind {
        IntegratorKind::Ebm => Ok(euler_update(&ci, b)?.sym()),
        IntegratorKind::Mebm => euler_update(&ci, b)?.sym().unimodular(),
        IntegratorKind::Em => (b.exp() * ci).sym().unimodular(),
    }
}

fn euler_update(ci: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    Ok((Tensor3::identity() - *b).invert()? * *ci)
}

/// Residuals `(Ci − Φ(ⁿCi, B), ξ − Δt·λ_i)` of the step equations at a trial point.
pub fn step_residual(problem: &StepProblem, ci: &SymTensor3, xi: f64) -> Result<(SymTensor3, f64)> {
    let b = operator_b_unchecked(&problem.c_next, ci, xi, &problem.params)?;
    let phi = update_map(problem.kind, &problem.ci_prev, &b)?;
    let f = overstress(&problem.c_next, ci, &problem.params)?;
    let r_xi = xi - problem.dt * problem.params.perzyna_rate(f);
    Ok((*ci - phi, r_xi))
}

pub fn solve_step(problem: &StepProblem) -> Result<StepSolution> {
    solve_step_with(problem, &SolverSettings::default())
}

pub fn solve_step_with(problem: &StepProblem, settings: &SolverSettings) -> Result<StepSolution> {
    if !(problem.dt > 0.0) || !problem.dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            constraint: "dt > 0",
            value: problem.dt,
        });
    }
    let f_trial = overstress(&problem.c_next, &problem.ci_prev, &problem.params)?;
    if f_trial <= 0.0 {
        return Ok(StepSolution {
            ci_next: problem.ci_prev,
            xi: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }

    let predicted = predict_xi(problem, f_trial);
    let mut starts = Vec::with_capacity(2);
    if let Some(g) = problem.xi_guess.filter(|g| *g > 0.0 && g.is_finite()) {
        starts.push(g);
    }
    starts.push(predicted);

    let tol = settings.rel_tol * (1.0 + problem.ci_prev.frobenius_norm());
    let mut last_err = None;
    for xi0 in starts {
        match newton(problem, settings, initial_point(problem, xi0), FlowForm::Direct, tol) {
            Ok((x, iterations)) => return finish(problem, &x, iterations, tol),
            Err(e) => last_err = Some(e),
        }
    }
    // Large trial overstress: converge the inverted form first, then polish.
    let x = initial_point(problem, predicted);
    if let Ok((x, n1)) = newton(problem, settings, x, FlowForm::Inverted, tol) {
        if let Ok((x, n2)) = newton(problem, settings, x, FlowForm::Direct, tol) {
            return finish(problem, &x, n1 + n2, tol);
        }
    }
    Err(last_err.expect("at least one starting point"))
}

/// Scalar estimate of `ξ` from the radial-return model `f ≈ f_trial − 2μξ`,
/// solved by bisection so that stiff steps do not start far outside the
/// basin of the Newton iteration.
fn predict_xi(problem: &StepProblem, f_trial: f64) -> f64 {
    let p = &problem.params;
    let g = |xi: f64| xi - problem.dt * p.perzyna_rate(f_trial - 2.0 * p.mu * xi);
    let (mut lo, mut hi) = (0.0, f_trial / (2.0 * p.mu));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

type Vec7 = SVector<f64, 7>;

fn pack(ci: &SymTensor3, xi: f64) -> Vec7 {
    let c = ci.components();
    Vec7::from_column_slice(&[c[0], c[1], c[2], c[3], c[4], c[5], xi])
}

fn unpack(x: &Vec7) -> (SymTensor3, f64) {
    (SymTensor3::from_components([x[0], x[1], x[2], x[3], x[4], x[5]]), x[6])
}

/// Leading principal minors; cheaper than an eigendecomposition.
fn is_spd(s: &SymTensor3) -> bool {
    let a11 = s.get(0, 0);
    let m2 = a11 * s.get(1, 1) - s.get(0, 1) * s.get(0, 1);
    a11 > 0.0 && m2 > 0.0 && s.det() > 0.0
}

/// How the flow rule enters the Newton system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FlowForm {
    /// `ξ − Δt·λ_i`, as in [`step_residual`].
    Direct,
    /// `(f − k0·(η·ξ/Δt)^(1/m))/2μ`: smooth for `ξ > 0` and well scaled
    /// when the trial overstress is large, where `⟨f/k0⟩^m` spans many
    /// orders of magnitude. Used to reach the basin of the direct form.
    Inverted,
}

fn residual_vec(problem: &StepProblem, x: &Vec7, form: FlowForm) -> Result<(Vec7, f64)> {
    let (ci, xi) = unpack(x);
    if !is_spd(&ci) || xi < 0.0 || (form == FlowForm::Inverted && xi == 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: f64::NAN });
    }
    let (r_c, r_xi) = match form {
        FlowForm::Direct => step_residual(problem, &ci, xi)?,
        FlowForm::Inverted => {
            let p = &problem.params;
            let b = operator_b_unchecked(&problem.c_next, &ci, xi, p)?;
            let r_c = ci - update_map(problem.kind, &problem.ci_prev, &b)?;
            let f = overstress(&problem.c_next, &ci, p)?;
            (r_c, (f - p.k0 * (p.eta * xi / problem.dt).powf(1.0 / p.m)) / (2.0 * p.mu))
        }
    };
    let norm = r_c.frobenius_norm() + r_xi.abs();
    if !norm.is_finite() {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: norm,
            step: None,
        });
    }
    Ok((pack(&r_c, r_xi), norm))
}

fn initial_point(problem: &StepProblem, xi0: f64) -> Vec7 {
    let ci0 = operator_b_unchecked(&problem.c_next, &problem.ci_prev, xi0, &problem.params)
        .and_then(|b| update_map(problem.kind, &problem.ci_prev, &b))
        .ok()
        .filter(is_spd)
        .unwrap_or(problem.ci_prev);
    pack(&ci0, xi0)
}

/// Damped Newton iteration from `x` until the residual norm drops below
/// `tol`. Returns the final point and the number of iterations used.
fn newton(
    problem: &StepProblem,
    settings: &SolverSettings,
    mut x: Vec7,
    form: FlowForm,
    tol: f64,
) -> Result<(Vec7, usize)> {
    let (mut r, mut norm) = residual_vec(problem, &x, form)?;
    for iteration in 0..settings.max_iterations {
        if norm < tol {
            return Ok((x, iteration));
        }
        let jac = jacobian(problem, &x, &r, form)?;
        let dx = jac.lu().solve(&(-r)).ok_or(Error::NoConvergence {
            iterations: iteration,
            residual: norm,
            step: None,
        })?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let mut trial = x + dx * alpha;
            if trial[6] <= 0.0 {
                trial[6] = match form {
                    FlowForm::Direct => 0.0,
                    FlowForm::Inverted => 0.1 * x[6],
                };
            }
            if let Ok((rt, nt)) = residual_vec(problem, &trial, form) {
                if nt < norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xt, rt, nt)) => {
                x = xt;
                r = rt;
                norm = nt;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iteration + 1,
                    residual: norm,
                    step: None,
                })
            }
        }
    }
    if norm < tol {
        return Ok((x, settings.max_iterations));
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        residual: norm,
        step: None,
    })
}

/// Forward-difference Jacobian; falls back to a backward difference where
/// the forward point leaves the admissible set.
fn jacobian(problem: &StepProblem, x: &Vec7, r: &Vec7, form: FlowForm) -> Result<SMatrix<f64, 7, 7>> {
    let mut jac = SMatrix::<f64, 7, 7>::zeros();
    for j in 0..7 {
        let h = 1e-7 * (1.0 + x[j].abs());
        let mut xp = *x;
        xp[j] += h;
        let column = match residual_vec(problem, &xp, form) {
            Ok((rp, _)) => (rp - r) / h,
            Err(_) => {
                xp[j] = x[j] - h;
                let (rm, _) = residual_vec(problem, &xp, form)?;
                (r - rm) / h
            }
        };
        jac.set_column(j, &column);
    }
    Ok(jac)
}

/// Re-applies the update map at the converged point so that the returned
/// state carries the structural properties of `Φ` (e.g. `det = 1`) to
/// rounding precision rather than to solver tolerance.
fn finish(problem: &StepProblem, x: &Vec7, iterations: usize, tol: f64) -> Result<StepSolution> {
    let (ci, xi) = unpack(x);
    let b = operator_b_unchecked(&problem.c_next, &ci, xi, &problem.params)?;
    let ci_next = update_map(problem.kind, &problem.ci_prev, &b)?;
    let (r_c, r_xi) = step_residual(problem, &ci_next, xi)?;
    let residual = r_c.frobenius_norm() + r_xi.abs();
    if residual >= tol {
        // The re-projected point is marginally worse; keep the iterate.
        let (r_c, r_xi) = step_residual(problem, &ci, xi)?;
        return Ok(StepSolution {
            ci_next: ci,
            xi,
            iterations,
            residual: r_c.frobenius_norm() + r_xi.abs(),
        });
    }
    Ok(StepSolution {
        ci_next,
        xi,
        iterations,
        residual,
    })
}

/// Integrates `Ci` along `loading` from its first knot to `t_end` with a
/// uniform step.
pub fn integrate(
    loading: &LoadingProgram,
    params: &MaterialParams,
    kind: IntegratorKind,
    dt: f64,
    t_end: f64,
    ci0: &SymTensor3,
) -> Result<Trajectory> {
    integrate_with(loading, params, kind, dt, t_end, ci0, &SolverSettings::default())
}

#[allow(clippy::too_many_arguments)]
pub fn integrate_with(
    loading: &LoadingProgram,
    params: &MaterialParams,
    kind: IntegratorKind,
    dt: f64,
    t_end: f64,
    ci0: &SymTensor3,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    params.validate()?;
    let t0 = loading.start();
    let steps = step_count(t_end - t0, dt)?;
    if t_end > loading.end() * (1.0 + 1e-12) {
        return Err(Error::InvalidTimeGrid(format!(
            "t_end = {t_end} lies beyond the last loading knot at {}",
            loading.end()
        )));
    }
    let det0 = ci0.det();
    if (det0 - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnimodular { det: det0 });
    }
    let ci0 = ci0.checked_spd()?;

    let mut traj = Trajectory::with_capacity(dt, steps + 1);
    let c0 = loading.right_cauchy_green(t0)?;
    traj.push(t0, c0, ci0, overstress(&c0, &ci0, params)?, 0.0, 0);

    let mut ci = ci0;
    let mut xi_prev = None;
    for n in 1..=steps {
        let t = t0 + n as f64 * dt;
        let c_next = loading.right_cauchy_green(t)?;
        let problem = StepProblem {
            c_next,
            ci_prev: ci,
            dt,
            params: *params,
            kind,
            xi_guess: xi_prev,
        };
        let sol = solve_step_with(&problem, settings).map_err(|e| match e {
            Error::NoConvergence {
                iterations,
                residual,
                ..
            } => Error::NoConvergence {
                iterations,
                residual,
                step: Some(n),
            },
            other => other,
        })?;
        ci = sol.ci_next;
        xi_prev = (sol.xi > 0.0).then_some(sol.xi);
        traj.push(t, c_next, ci, overstress(&c_next, &ci, params)?, sol.xi, sol.iterations);
    }
    Ok(traj)
}

/// Number of uniform steps of size `dt` covering `span`, which must be an
/// integer multiple of `dt`.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidTimeGrid(format!("step size must be positive, got {dt}")));
    }
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::InvalidTimeGrid(format!("time span must be positive, got {span}")));
    }
    let n = (span / dt).round();
    if n < 1.0 || (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidTimeGrid(format!(
            "time span {span} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}
