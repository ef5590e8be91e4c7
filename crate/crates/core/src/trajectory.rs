//! Time histories produced by the integrators, and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::SymTensor3;

const COMPONENTS: [&str; 6] = ["11", "22", "33", "12", "13", "23"];

/// Sampled solution on a uniform grid `t_n = t_0 + n·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub c: Vec<SymTensor3>,
    pub ci: Vec<SymTensor3>,
    pub det_ci: Vec<f64>,
    pub overstress: Vec<f64>,
    pub xi: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl Trajectory {
    pub fn with_capacity(dt: f64, n: usize) -> Self {
        Self {
            dt,
            times: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            ci: Vec::with_capacity(n),
            det_ci: Vec::with_capacity(n),
            overstress: Vec::with_capacity(n),
            xi: Vec::with_capacity(n),
            iterations: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, c: SymTensor3, ci: SymTensor3, f: f64, xi: f64, iterations: usize) {
        self.times.push(t);
        self.c.push(c);
        self.ci.push(ci);
        self.det_ci.push(ci.det());
        self.overstress.push(f);
        self.xi.push(xi);
        self.iterations.push(iterations);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid point at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let t0 = *self.times.first()?;
        let n = ((t - t0) / self.dt).round();
        if n < 0.0 || n as usize >= self.len() {
            return None;
        }
        let idx = n as usize;
        ((self.times[idx] - t).abs() <= 1e-9 * t.abs().max(1.0)).then_some(idx)
    }

    pub fn ci_at(&self, t: f64) -> Option<&SymTensor3> {
        self.index_of(t).map(|i| &self.ci[i])
    }

    /// `(t, Ci)` pairs, the form consumed by the decay-rate estimator.
    pub fn samples(&self) -> Vec<(f64, SymTensor3)> {
        self.times.iter().copied().zip(self.ci.iter().copied()).collect()
    }

    /// Largest `|det Ci − 1|` over samples with `lo ≤ t ≤ hi`.
    pub fn max_det_drift(&self, lo: f64, hi: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.det_ci)
            .filter(|(t, _)| (lo..=hi).contains(*t))
            .map(|(_, d)| (d - 1.0).abs())
            .reduce(f64::max)
    }

    pub fn header() -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(COMPONENTS.iter().map(|c| format!("C{c}")));
        h.extend(COMPONENTS.iter().map(|c| format!("Ci{c}")));
        h.extend(["det_Ci", "overstress", "xi", "iterations"].map(String::from));
        h
    }

    /// Writes one row per grid point, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::header())?;
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(17);
            row.push(fmt_float(self.times[i]));
            row.extend(self.c[i].components().map(fmt_float));
            row.extend(self.ci[i].components().map(fmt_float));
            row.push(fmt_float(self.det_ci[i]));
            row.push(fmt_float(self.overstress[i]));
            row.push(fmt_float(self.xi[i]));
            row.push(self.iterations[i].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`Trajectory::write_csv`]; the step size is supplied by the
    /// caller because it is not part of the table.
    pub fn read_csv<R: Read>(reader: R, dt: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != Self::header() {
            return Err(Error::Format(format!("unexpected trajectory header {header:?}")));
        }
        let mut traj = Trajectory::with_capacity(dt, 0);
        for record in r.records() {
            let record = record?;
            let v = |i: usize| parse_float(&record[i]);
            let sym = |start: usize| -> Result<SymTensor3> {
                let mut c = [0.0; 6];
                for (k, slot) in c.iter_mut().enumerate() {
                    *slot = v(start + k)?;
                }
                Ok(SymTensor3::from_components(c))
            };
            traj.times.push(v(0)?);
            traj.c.push(sym(1)?);
            traj.ci.push(sym(7)?);
            traj.det_ci.push(v(13)?);
            traj.overstress.push(v(14)?);
            traj.xi.push(v(15)?);
            traj.iterations.push(
                record[16]
                    .parse()
                    .map_err(|e| Error::Format(format!("bad iteration count: {e}")))?,
            );
        }
        Ok(traj)
    }
}

pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::Format(format!("bad number `{s}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let mut t = Trajectory::with_capacity(0.5, 3);
        for n in 0..3 {
            let x = 1.0 + 0.1 * n as f64 + 1.0 / 3.0 * 1e-7;
            let ci = SymTensor3::new(x, 1.0 / x, 1.0, 1e-3 / 7.0, 0.0, -2e-17);
            t.push(0.5 * n as f64, SymTensor3::identity(), ci, -std::f64::consts::PI, 0.1 / 3.0, n);
        }
        t
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice(), 0.5).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn header_row_names_columns() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,C11,C22,C33,C12,C13,C23,Ci11,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn index_lookup() {
        let t = sample();
        assert_eq!(t.index_of(0.5), Some(1));
        assert_eq!(t.index_of(1.0), Some(2));
        assert_eq!(t.index_of(0.25), None);
        assert_eq!(t.index_of(1.5), None);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(matches!(
            Trajectory::read_csv("a,b\n1,2\n".as_bytes(), 1.0),
            Err(Error::Format(_))
        ));
    }
}
