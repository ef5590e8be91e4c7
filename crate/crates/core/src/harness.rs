//! Error studies against a fine-step reference solution.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrators::{integrate, IntegratorKind};
use crate::loading::LoadingProgram;
use crate::material::MaterialParams;
use crate::tensor::SymTensor3;
use crate::trajectory::{fmt_float, parse_float, Trajectory};

/// Bump when the cache layout or the reference computation changes.
pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Method used for every reference solution.
pub const REFERENCE_METHOD: IntegratorKind = IntegratorKind::Mebm;

/// `‖Ci(t) − Ci_ref(t)‖` sampled at whole seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub method: IntegratorKind,
    pub dt: f64,
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ErrorCurve {
    pub fn at(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| self.errors[i])
    }
}

/// Maximum of the curve over `lo ≤ t ≤ hi`, `None` if no sample falls inside.
pub fn window_max(curve: &ErrorCurve, lo: f64, hi: f64) -> Option<f64> {
    curve
        .times
        .iter()
        .zip(&curve.errors)
        .filter(|(t, _)| (lo..=hi).contains(*t))
        .map(|(_, e)| *e)
        .reduce(f64::max)
}

/// Cache key over everything the reference depends on.
pub fn reference_key(loading: &LoadingProgram, params: &MaterialParams, dt_ref: f64) -> String {
    let mut h = Sha256::new();
    h.update(format!("viscoflow-reference-v{CACHE_FORMAT_VERSION}:{}", REFERENCE_METHOD.name()));
    for v in [params.k, params.mu, params.yield_stress, params.m, params.eta, params.k0, params.rho_r, dt_ref] {
        h.update(v.to_bits().to_le_bytes());
    }
    for (t, f) in loading.knots() {
        h.update(t.to_bits().to_le_bytes());
        for v in f.to_rows().iter().flatten() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("reference-{}.csv", &key[..16]))
}

fn metadata_line(key: &str, dt_ref: f64) -> String {
    format!(
        "# viscoflow-reference format={CACHE_FORMAT_VERSION} key={key} method={} dt={}\n",
        REFERENCE_METHOD.name(),
        fmt_float(dt_ref)
    )
}

/// Reads a cache file; `Ok(None)` when it belongs to a different key or version.
fn read_cache(path: &Path, key: &str, dt_ref: f64) -> Result<Option<Trajectory>> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first != metadata_line(key, dt_ref) {
        return Ok(None);
    }
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    Trajectory::read_csv(rest.as_slice(), dt_ref).map(Some)
}

fn write_cache(path: &Path, key: &str, traj: &Trajectory) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    // write to a unique temporary then rename, so readers never see a partial file
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("reference"),
        std::process::id()
    ));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(metadata_line(key, traj.dt).as_bytes())?;
        traj.write_csv(&mut file)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Fine-step solution over the whole loading program starting from `Ci = 1`.
/// With a cache directory the result is stored on first use and reloaded
/// afterwards; a stale or unreadable cache entry is recomputed.
pub fn reference_solution(
    loading: &LoadingProgram,
    params: &MaterialParams,
    dt_ref: f64,
    cache_dir: Option<&Path>,
) -> Result<Trajectory> {
    params.validate()?;
    let key = reference_key(loading, params, dt_ref);
    let path = cache_dir.map(|d| cache_path(d, &key));
    if let Some(path) = &path {
        if path.exists() {
            if let Ok(Some(traj)) = read_cache(path, &key, dt_ref) {
                return Ok(traj);
            }
        }
    }
    let traj = integrate(
        loading,
        params,
        REFERENCE_METHOD,
        dt_ref,
        loading.end(),
        &SymTensor3::identity(),
    )?;
    if let Some(path) = &path {
        write_cache(path, &key, &traj)?;
    }
    Ok(traj)
}

/// Compares `numerical` with `reference` at every whole second present on
/// both grids.
pub fn error_curve(numerical: &Trajectory, reference: &Trajectory, method: IntegratorKind) -> Result<ErrorCurve> {
    let (Some(&t0), Some(&t1)) = (numerical.times.first(), numerical.times.last()) else {
        return Err(Error::MismatchedTimes);
    };
    let mut times = Vec::new();
    let mut errors = Vec::new();
    let mut s = t0.ceil();
    while s <= t1 + 1e-9 {
        if let (Some(i), Some(j)) = (numerical.index_of(s), reference.index_of(s)) {
            times.push(s);
            errors.push((numerical.ci[i] - reference.ci[j]).frobenius_norm());
        }
        s += 1.0;
    }
    if times.is_empty() {
        return Err(Error::MismatchedTimes);
    }
    Ok(ErrorCurve {
        method,
        dt: numerical.dt,
        times,
        errors,
    })
}

/// Runs every `(method, dt)` pair against a precomputed reference. Output
/// order is methods-major, then step sizes, independent of scheduling.
pub fn error_study_against(
    reference: &Trajectory,
    loading: &LoadingProgram,
    params: &MaterialParams,
    methods: &[IntegratorKind],
    dts: &[f64],
) -> Result<Vec<ErrorCurve>> {
    let dt_ref = reference.dt;
    for &dt in dts {
        if !(dt > 0.0) || dt_ref > dt / 10.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidTimeGrid(format!(
                "reference step {dt_ref} must be at most a tenth of every study step (got {dt})"
            )));
        }
        let ratio = (dt / dt_ref).round();
        if (ratio * dt_ref - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidTimeGrid(format!(
                "study step {dt} is not a multiple of the reference step {dt_ref}"
            )));
        }
    }
    let jobs: Vec<(IntegratorKind, f64)> = methods
        .iter()
        .flat_map(|&m| dts.iter().map(move |&dt| (m, dt)))
        .collect();
    jobs.par_iter()
        .map(|&(method, dt)| {
            let traj = integrate(loading, params, method, dt, loading.end(), &SymTensor3::identity())?;
            error_curve(&traj, reference, method)
        })
        .collect()
}

pub fn error_study(
    loading: &LoadingProgram,
    params: &MaterialParams,
    methods: &[IntegratorKind],
    dts: &[f64],
    dt_ref: f64,
    cache_dir: Option<&Path>,
) -> Result<Vec<ErrorCurve>> {
    if let Some(&min_dt) = dts.iter().min_by(|a, b| a.total_cmp(b)) {
        if dt_ref > min_dt / 10.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidTimeGrid(format!(
                "reference step {dt_ref} must be at most a tenth of the smallest study step {min_dt}"
            )));
        }
    }
    let reference = reference_solution(loading, params, dt_ref, cache_dir)?;
    error_study_against(&reference, loading, params, methods, dts)
}

const CURVE_HEADER: [&str; 4] = ["t", "value", "method", "dt"];

/// Long-format table `t,value,method,dt`, one row per sample.
pub fn write_curves_csv<W: Write>(curves: &[ErrorCurve], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVE_HEADER)?;
    for curve in curves {
        for (t, e) in curve.times.iter().zip(&curve.errors) {
            w.write_record([fmt_float(*t), fmt_float(*e), curve.method.name().to_string(), fmt_float(curve.dt)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Groups consecutive rows with the same method and step size back into curves.
pub fn read_curves_csv<R: Read>(reader: R) -> Result<Vec<ErrorCurve>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(CURVE_HEADER) {
        return Err(Error::Format("expected header t,value,method,dt".into()));
    }
    let mut curves: Vec<ErrorCurve> = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Format(format!("expected 4 fields, got {}", record.len())));
        }
        let t = parse_float(&record[0])?;
        let e = parse_float(&record[1])?;
        let method: IntegratorKind = record[2].parse().map_err(|_| Error::Format(format!("bad method `{}`", &record[2])))?;
        let dt = parse_float(&record[3])?;
        match curves.last_mut() {
            Some(c) if c.method == method && c.dt == dt => {
                c.times.push(t);
                c.errors.push(e);
            }
            _ => curves.push(ErrorCurve {
                method,
                dt,
                times: vec![t],
                errors: vec![e],
            }),
        }
    }
    Ok(curves)
}

pub fn emit_csv(curves: &[ErrorCurve], path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    write_curves_csv(curves, std::io::BufWriter::new(file))
}

/// Window maxima used to summarize a study.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub method: IntegratorKind,
    pub dt: f64,
    pub max_50_150: Option<f64>,
    pub max_150_300: Option<f64>,
    pub max_200_300: Option<f64>,
    pub final_error: Option<f64>,
}

pub fn summarize(curve: &ErrorCurve) -> CurveSummary {
    CurveSummary {
        method: curve.method,
        dt: curve.dt,
        max_50_150: window_max(curve, 50.0, 150.0),
        max_150_300: window_max(curve, 150.0, 300.0),
        max_200_300: window_max(curve, 200.0, 300.0),
        final_error: curve.errors.last().copied(),
    }
}

pub fn write_summary_csv<W: Write>(curves: &[ErrorCurve], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "dt", "max_50_150", "max_150_300", "max_200_300", "final"])?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    for s in curves.iter().map(summarize) {
        w.write_record([
            s.method.name().to_string(),
            fmt_float(s.dt),
            opt(s.max_50_150),
            opt(s.max_150_300),
            opt(s.max_200_300),
            opt(s.final_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor3;

    fn curve(method: IntegratorKind, dt: f64, values: &[(f64, f64)]) -> ErrorCurve {
        ErrorCurve {
            method,
            dt,
            times: values.iter().map(|v| v.0).collect(),
            errors: values.iter().map(|v| v.1).collect(),
        }
    }

    fn short_loading() -> LoadingProgram {
        LoadingProgram::new(vec![(0.0, Tensor3::identity()), (4.0, Tensor3::diag(1.2, 1.0, 1.0))]).unwrap()
    }

    #[test]
    fn window_max_examples() {
        let c = curve(IntegratorKind::Em, 1.0, &[(0.0, 1.0), (1.0, 5.0), (2.0, 3.0)]);
        assert_eq!(window_max(&c, 0.0, 2.0), Some(5.0));
        assert_eq!(window_max(&c, 2.0, 2.0), Some(3.0));
        assert_eq!(window_max(&c, 10.0, 20.0), None);
    }

    #[test]
    fn curves_csv_round_trip_exact() {
        let curves = vec![
            curve(IntegratorKind::Ebm, 1.0, &[(0.0, 0.0), (1.0, 1.0 / 3.0)]),
            curve(IntegratorKind::Ebm, 0.5, &[(0.0, 0.0), (1.0, 2e-17)]),
            curve(IntegratorKind::Mebm, 0.5, &[(0.0, std::f64::consts::E)]),
        ];
        let mut buf = Vec::new();
        write_curves_csv(&curves, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,value,method,dt\n"));
        assert!(text.contains("3.3333333333333331e-1"));
        assert_eq!(read_curves_csv(buf.as_slice()).unwrap(), curves);
    }

    #[test]
    fn empty_study_writes_header_only() {
        let mut buf = Vec::new();
        write_curves_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,value,method,dt\n");
    }

    #[test]
    fn reference_must_be_finer() {
        let err = error_study(&short_loading(), &MaterialParams::TABLE1, &[IntegratorKind::Em], &[0.5], 0.1, None);
        assert!(matches!(err, Err(Error::InvalidTimeGrid(_))));
    }

    #[test]
    fn curve_compared_with_itself_is_zero() {
        let loading = short_loading();
        let p = MaterialParams::TABLE1;
        let reference = reference_solution(&loading, &p, 0.05, None).unwrap();
        let c = error_curve(&reference, &reference, IntegratorKind::Mebm).unwrap();
        assert_eq!(c.times, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(c.errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn study_is_deterministic_and_ordered() {
        let loading = short_loading();
        let p = MaterialParams::TABLE1;
        let methods = [IntegratorKind::Ebm, IntegratorKind::Em];
        let a = error_study(&loading, &p, &methods, &[1.0, 0.5], 0.05, None).unwrap();
        let b = error_study(&loading, &p, &methods, &[1.0, 0.5], 0.05, None).unwrap();
        assert_eq!(a, b);
        let order: Vec<_> = a.iter().map(|c| (c.method, c.dt)).collect();
        assert_eq!(
            order,
            vec![
                (IntegratorKind::Ebm, 1.0),
                (IntegratorKind::Ebm, 0.5),
                (IntegratorKind::Em, 1.0),
                (IntegratorKind::Em, 0.5)
            ]
        );
        assert_eq!(a[0].at(0.0), Some(0.0));
    }

    #[test]
    fn cache_round_trip_and_key_sensitivity() {
        let dir = tempfile::tempdir().unwrap();
        let loading = short_loading();
        let p = MaterialParams::TABLE1;
        let first = reference_solution(&loading, &p, 0.05, Some(dir.path())).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let second = reference_solution(&loading, &p, 0.05, Some(dir.path())).unwrap();
        assert_eq!(first, second);

        let other = MaterialParams { m: 3.0, ..p };
        assert_ne!(reference_key(&loading, &p, 0.05), reference_key(&loading, &other, 0.05));
        assert_ne!(reference_key(&loading, &p, 0.05), reference_key(&loading, &p, 0.025));
    }

    #[test]
    fn corrupt_cache_is_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let loading = short_loading();
        let p = MaterialParams::TABLE1;
        let key = reference_key(&loading, &p, 0.05);
        let path = cache_path(dir.path(), &key);
        fs::write(&path, "garbage\n").unwrap();
        let traj = reference_solution(&loading, &p, 0.05, Some(dir.path())).unwrap();
        assert_eq!(traj.len(), 81);
        assert!(read_cache(&path, &key, 0.05).unwrap().is_some());
    }
}
