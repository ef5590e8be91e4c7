//! C ABI for the viscoflow library.
//!
//! Every function returns a [`VfStatus`]; results are written through out
//! pointers. Objects created by the library are opaque handles released with
//! the matching `*_free` function. After a failing call,
//! [`vf_last_error_message`] describes the error on the calling thread.
//!
//! Symmetric tensors cross the boundary as six doubles in the order
//! `(11, 22, 33, 12, 13, 23)`; general tensors as nine doubles, row major.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use viscoflow::integrators::{integrate, solve_step, IntegratorKind, StepProblem};
use viscoflow::loading::paper_loading;
use viscoflow::material::{free_energy, MaterialParams};
use viscoflow::stability::{critical_values, dist, q_hat, q_theta};
use viscoflow::tensor::{SymTensor3, Tensor3};
use viscoflow::trajectory::Trajectory;
use viscoflow::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidTensor = 3,
    NoConvergence = 4,
    DegenerateDrivingForce = 5,
    OutOfRange = 6,
    Panic = 7,
    Other = 8,
}

/// Integrator selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfIntegrator {
    Ebm = 0,
    Mebm = 1,
    Em = 2,
}

impl From<VfIntegrator> for IntegratorKind {
    fn from(k: VfIntegrator) -> Self {
        match k {
            VfIntegrator::Ebm => IntegratorKind::Ebm,
            VfIntegrator::Mebm => IntegratorKind::Mebm,
            VfIntegrator::Em => IntegratorKind::Em,
        }
    }
}

/// Plain material parameters, field for field.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfMaterialParams {
    pub k: f64,
    pub mu: f64,
    pub yield_stress: f64,
    pub m: f64,
    pub eta: f64,
    pub k0: f64,
}

/// Output of [`vf_solve_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfStepResult {
    pub ci_next: [f64; 6],
    pub xi: f64,
    pub iterations: u32,
    pub residual: f64,
}

/// Output of [`vf_critical_values`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfStabilityDomain {
    pub theta: f64,
    pub q: f64,
    pub x_cr: f64,
    pub f_cr: f64,
    pub x_cr_estimate: f64,
    pub f_cr_estimate: f64,
}

/// Validated material, opaque to C.
pub struct VfMaterial(MaterialParams);

/// Integrated trajectory, opaque to C.
pub struct VfTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> VfStatus {
    match err {
        Error::InvalidParameter { .. }
        | Error::InvalidLoading(_)
        | Error::InvalidTimeGrid(_)
        | Error::Config(_)
        | Error::InfeasibleTheta { .. } => VfStatus::InvalidArgument,
        Error::NonPositiveDeterminant { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::SingularTensor { .. }
        | Error::NotUnimodular { .. }
        | Error::ZeroDeviator => VfStatus::InvalidTensor,
        Error::NoConvergence { .. } => VfStatus::NoConvergence,
        Error::DegenerateDrivingForce { .. } => VfStatus::DegenerateDrivingForce,
        _ => VfStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (VfStatus, String)>) -> VfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            VfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            VfStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (VfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VfStatus, String) {
    (VfStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn read<'a, T>(p: *const T, what: &str) -> Result<&'a T, (VfStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, what: &str, value: T) -> Result<(), (VfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn sym_from(p: *const f64, what: &str) -> Result<SymTensor3, (VfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let mut c = [0.0; 6];
    c.copy_from_slice(std::slice::from_raw_parts(p, 6));
    Ok(SymTensor3::from_components(c))
}

unsafe fn write_sym(p: *mut f64, what: &str, s: &SymTensor3) -> Result<(), (VfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts_mut(p, 6).copy_from_slice(&s.components());
    Ok(())
}

/// Message for the most recent failure on this thread, or null after a
/// successful call. The pointer stays valid until the next call.
#[no_mangle]
pub extern "C" fn vf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn vf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reference parameters (k = 73500, μ = 28200, K = 270, m = 3.6, η = 2e6, k0 = 1).
#[no_mangle]
pub extern "C" fn vf_default_params() -> VfMaterialParams {
    let p = MaterialParams::TABLE1;
    VfMaterialParams {
        k: p.k,
        mu: p.mu,
        yield_stress: p.yield_stress,
        m: p.m,
        eta: p.eta,
        k0: p.k0,
    }
}

/// Validates `params` and creates a material handle.
#[no_mangle]
pub unsafe extern "C" fn vf_material_new(params: *const VfMaterialParams, out: *mut *mut VfMaterial) -> VfStatus {
    guard(|| {
        let p = read(params, "params")?;
        let m = MaterialParams {
            k: p.k,
            mu: p.mu,
            yield_stress: p.yield_stress,
            m: p.m,
            eta: p.eta,
            k0: p.k0,
            ..MaterialParams::TABLE1
        };
        m.validate().map_err(lib_err)?;
        write(out, "out", Box::into_raw(Box::new(VfMaterial(m))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn vf_material_free(material: *mut VfMaterial) {
    if !material.is_null() {
        drop(Box::from_raw(material));
    }
}

/// Free energy of `A = C·Ci⁻¹`, with `a` given as nine doubles, row major.
#[no_mangle]
pub unsafe extern "C" fn vf_free_energy(material: *const VfMaterial, a: *const f64, out: *mut f64) -> VfStatus {
    guard(|| {
        let m = read(material, "material")?;
        if a.is_null() {
            return Err(null("a"));
        }
        let v = std::slice::from_raw_parts(a, 9);
        let t = Tensor3::from_rows([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]);
        write(out, "out", free_energy(&t, &m.0).map_err(lib_err)?)
    })
}

/// One implicit step. A negative `xi_guess` means no starting value.
#[no_mangle]
pub unsafe extern "C" fn vf_solve_step(
    material: *const VfMaterial,
    kind: VfIntegrator,
    c_next: *const f64,
    ci_prev: *const f64,
    dt: f64,
    xi_guess: f64,
    out: *mut VfStepResult,
) -> VfStatus {
    guard(|| {
        let m = read(material, "material")?;
        let problem = StepProblem {
            c_next: sym_from(c_next, "c_next")?,
            ci_prev: sym_from(ci_prev, "ci_prev")?,
            dt,
            params: m.0,
            kind: kind.into(),
            xi_guess: (xi_guess >= 0.0).then_some(xi_guess),
        };
        let sol = solve_step(&problem).map_err(lib_err)?;
        write(
            out,
            "out",
            VfStepResult {
                ci_next: sol.ci_next.components(),
                xi: sol.xi,
                iterations: sol.iterations as u32,
                residual: sol.residual,
            },
        )
    })
}

/// Integrates the built-in four-knot loading program from `Ci = 1`.
#[no_mangle]
pub unsafe extern "C" fn vf_integrate_benchmark(
    material: *const VfMaterial,
    kind: VfIntegrator,
    dt: f64,
    t_end: f64,
    out: *mut *mut VfTrajectory,
) -> VfStatus {
    guard(|| {
        let m = read(material, "material")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let traj = integrate(&paper_loading(), &m.0, kind.into(), dt, t_end, &SymTensor3::identity())
            .map_err(lib_err)?;
        write(out, "out", Box::into_raw(Box::new(VfTrajectory(traj))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn vf_trajectory_free(traj: *mut VfTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of stored states, including the initial one.
#[no_mangle]
pub unsafe extern "C" fn vf_trajectory_len(traj: *const VfTrajectory, out: *mut usize) -> VfStatus {
    guard(|| {
        let t = read(traj, "traj")?;
        write(out, "out", t.0.len())
    })
}

/// Time, `Ci`, `det Ci` and overstress of state `index`. Any out pointer
/// may be null to skip that value.
#[no_mangle]
pub unsafe extern "C" fn vf_trajectory_state(
    traj: *const VfTrajectory,
    index: usize,
    t: *mut f64,
    ci: *mut f64,
    det_ci: *mut f64,
    overstress: *mut f64,
) -> VfStatus {
    guard(|| {
        let tr = &read(traj, "traj")?.0;
        if index >= tr.len() {
            return Err((
                VfStatus::OutOfRange,
                format!("index {index} out of range for {} states", tr.len()),
            ));
        }
        if !t.is_null() {
            t.write(tr.times[index]);
        }
        if !ci.is_null() {
            write_sym(ci, "ci", &tr.ci[index])?;
        }
        if !det_ci.is_null() {
            det_ci.write(tr.det_ci[index]);
        }
        if !overstress.is_null() {
            overstress.write(tr.overstress[index]);
        }
        Ok(())
    })
}

/// `dist(A, B)` between two symmetric positive definite tensors.
#[no_mangle]
pub unsafe extern "C" fn vf_dist(a: *const f64, b: *const f64, out: *mut f64) -> VfStatus {
    guard(|| {
        let d = dist(&sym_from(a, "a")?, &sym_from(b, "b")?).map_err(lib_err)?;
        write(out, "out", d)
    })
}

#[no_mangle]
pub unsafe extern "C" fn vf_q_hat(ci: *const f64, out: *mut f64) -> VfStatus {
    guard(|| {
        let q = q_hat(&sym_from(ci, "ci")?).map_err(lib_err)?;
        write(out, "out", q)
    })
}

#[no_mangle]
pub unsafe extern "C" fn vf_q_theta(theta: f64, resolution: usize, out: *mut f64) -> VfStatus {
    guard(|| write(out, "out", q_theta(theta, resolution).map_err(lib_err)?))
}

#[no_mangle]
pub unsafe extern "C" fn vf_critical_values(
    material: *const VfMaterial,
    q: f64,
    out: *mut VfStabilityDomain,
) -> VfStatus {
    guard(|| {
        let m = read(material, "material")?;
        let d = critical_values(&m.0, q).map_err(lib_err)?;
        write(
            out,
            "out",
            VfStabilityDomain {
                theta: d.theta,
                q: d.q,
                x_cr: d.x_cr,
                f_cr: d.f_cr,
                x_cr_estimate: d.x_cr_estimate,
                f_cr_estimate: d.f_cr_estimate,
            },
        )
    })
}
