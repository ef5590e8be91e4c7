//! Piecewise-linear deformation programs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{SymTensor3, Tensor3};

/// Uniform samples over the whole program when checking `det F > 0`.
const DET_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knot {
    pub t: f64,
    #[serde(rename = "F")]
    pub f: [[f64; 3]; 3],
}

/// `F(t)` is the isochoric part of the linear interpolation between knots.
/// Outside the knot range the end values are held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Knot>", into = "Vec<Knot>")]
pub struct LoadingProgram {
    times: Vec<f64>,
    values: Vec<Tensor3>,
}

impl LoadingProgram {
    pub fn new(knots: Vec<(f64, Tensor3)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidLoading(format!(
                "need at least two knots, got {}",
                knots.len()
            )));
        }
        for (t, f) in &knots {
            if !t.is_finite() || f.to_rows().iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidLoading(format!("non-finite knot at t = {t}")));
            }
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidLoading(format!(
                    "knot times must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        let (times, values): (Vec<f64>, Vec<Tensor3>) = knots.into_iter().unzip();
        let program = Self { times, values };
        let (t0, t1) = (program.start(), program.end());
        for i in 0..DET_SAMPLES {
            let t = t0 + (t1 - t0) * i as f64 / (DET_SAMPLES - 1) as f64;
            let det = program.interpolate(t).det();
            if !(det > 0.0) {
                return Err(Error::InvalidLoading(format!(
                    "interpolated deformation gradient has det {det:e} at t = {t}"
                )));
            }
        }
        Ok(program)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("validated non-empty")
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, Tensor3)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    fn interpolate(&self, t: f64) -> Tensor3 {
        if t <= self.start() {
            return self.values[0];
        }
        if t >= self.end() {
            return *self.values.last().expect("validated non-empty");
        }
        let k = self.times.partition_point(|&tk| tk <= t) - 1;
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k] * (1.0 - s) + self.values[k + 1] * s
    }

    /// Deformation gradient at time `t`.
    pub fn deformation_gradient(&self, t: f64) -> Result<Tensor3> {
        self.interpolate(t).unimodular()
    }

    /// `C(t) = Fᵀ·F`.
    pub fn right_cauchy_green(&self, t: f64) -> Result<SymTensor3> {
        let f = self.deformation_gradient(t)?;
        Ok((f.transpose() * f).sym())
    }

    /// The four-knot program used throughout the error studies: uniaxial
    /// tension along 1, simple shear, then uniaxial tension along 2.
    pub fn benchmark() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![
            (0.0, Tensor3::identity()),
            (100.0, Tensor3::diag(2.0, r, r)),
            (200.0, Tensor3::from_rows([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])),
            (300.0, Tensor3::diag(r, 2.0, r)),
        ])
        .expect("built-in loading program is valid")
    }
}

impl TryFrom<Vec<Knot>> for LoadingProgram {
    type Error = Error;

    fn try_from(knots: Vec<Knot>) -> Result<Self> {
        Self::new(knots.into_iter().map(|k| (k.t, Tensor3::from_rows(k.f))).collect())
    }
}

impl From<LoadingProgram> for Vec<Knot> {
    fn from(p: LoadingProgram) -> Self {
        p.knots().map(|(t, f)| Knot { t, f: f.to_rows() }).collect()
    }
}

pub fn paper_loading() -> LoadingProgram {
    LoadingProgram::benchmark()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Tensor3, b: &Tensor3, tol: f64) -> bool {
        (*a - *b).frobenius_norm() <= tol
    }

    #[test]
    fn paper_knots_are_reproduced() {
        let p = paper_loading();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&p.deformation_gradient(0.0).unwrap(), &Tensor3::identity(), 0.0));
        assert!(close(&p.deformation_gradient(100.0).unwrap(), &Tensor3::diag(2.0, r, r), 1e-15));
        let shear = Tensor3::from_rows([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(close(&p.deformation_gradient(200.0).unwrap(), &shear, 1e-15));
        assert!(close(&p.deformation_gradient(300.0).unwrap(), &Tensor3::diag(r, 2.0, r), 1e-15));
    }

    #[test]
    fn midpoint_is_isochoric_interpolant() {
        let p = paper_loading();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let lin = Tensor3::diag(1.5, 0.5 * (1.0 + r), 0.5 * (1.0 + r));
        let expected = lin * lin.det().cbrt().recip();
        let f = p.deformation_gradient(50.0).unwrap();
        assert!(close(&f, &expected, 1e-15));
        assert!((f.det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn clamped_outside_range() {
        let p = paper_loading();
        assert_eq!(p.deformation_gradient(-5.0).unwrap(), Tensor3::identity());
        assert_eq!(
            p.deformation_gradient(400.0).unwrap(),
            p.deformation_gradient(300.0).unwrap()
        );
    }

    #[test]
    fn right_cauchy_green_is_unimodular() {
        let p = paper_loading();
        for i in 0..=60 {
            let c = p.right_cauchy_green(5.0 * i as f64).unwrap();
            assert!((c.det() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_programs() {
        let id = Tensor3::identity();
        assert!(LoadingProgram::new(vec![(0.0, id)]).is_err());
        assert!(LoadingProgram::new(vec![(0.0, id), (0.0, id)]).is_err());
        assert!(LoadingProgram::new(vec![(1.0, id), (0.0, id)]).is_err());
        // passes through a singular gradient halfway
        let flipped = Tensor3::diag(-1.0, 1.0, 1.0);
        assert!(matches!(
            LoadingProgram::new(vec![(0.0, id), (1.0, flipped)]),
            Err(Error::InvalidLoading(_))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let p = paper_loading();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"F\""));
        let back: LoadingProgram = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let bad = r#"[{"t": 0, "F": [[1,0,0],[0,1,0],[0,0,1]]}]"#;
        assert!(serde_json::from_str::<LoadingProgram>(bad).is_err());
    }
}
