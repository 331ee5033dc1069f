//! Monte-Carlo calibration of the inverse curve `g⁻¹`.
//!
//! A table of mean scores is measured on a grid of known correlations, made
//! monotone, and a polynomial `R ≈ P(y)` is fitted from score to correlation.
//! Estimation then scores a batch and evaluates `P` with clamping.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::csvio::{self, Cell};
use crate::error::{Error, Result};
use crate::price::linspace;
use crate::pwl::{self, CorrelatorSpec};
use crate::sampling::{sample_nongaussian, Family, RngStream};
use crate::wht;

pub const DEFAULT_GRID_POINTS: usize = 41;
pub const DEFAULT_GRID_EDGE: f64 = 0.95;
pub const DEFAULT_N: usize = 4096;
pub const DEFAULT_TRIALS: usize = 200;

/// Largest |R| accepted in a calibration grid.
pub const MAX_GRID_EDGE: f64 = 0.99;
/// Smallest batch size accepted for calibration.
pub const MIN_N: usize = 16;

pub const MODEL_VERSION: u32 = 1;

// Ratio below which a singular value counts as zero in the fit.
const RANK_TOL: f64 = 1e-12;

/// The default 41-point calibration grid on `[-0.95, 0.95]`.
pub fn default_grid() -> Vec<f64> {
    linspace(DEFAULT_GRID_EDGE, DEFAULT_GRID_POINTS)
}

/// Mean correlator output measured on a grid of known correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub r_grid: Vec<f64>,
    /// Mean score per grid point after isotonic repair.
    pub mean_scores: Vec<f64>,
    /// Standard error of the raw mean score per grid point.
    pub stderr: Vec<f64>,
    pub n_per_trial: usize,
    pub trials: usize,
    pub spec: CorrelatorSpec,
    pub used_wht: bool,
    pub family: Family,
    pub seed: u64,
}

impl CalibrationTable {
    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let rows: Vec<Vec<Cell>> = (0..self.r_grid.len())
            .map(|i| {
                vec![
                    self.r_grid[i].into(),
                    self.mean_scores[i].into(),
                    self.stderr[i].into(),
                ]
            })
            .collect();
        csvio::emit_csv(out, comments, &["R", "mean_score", "stderr"], &rows)
    }
}

/// Polynomial inverse map from score to correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    /// Ascending-degree coefficients of `P(y)`.
    pub coefficients: Vec<f64>,
    pub degree: usize,
    /// Score range seen during fitting; inputs are clamped to it.
    pub domain: (f64, f64),
    pub spec: CorrelatorSpec,
    /// `max |P(mean_score) − R|` over the fitting table.
    pub max_residual: f64,
}

/// Mean score of a pair of vectors, optionally after the WHT front-end.
///
/// Padded transforms are normalized by the real pair count, so the
/// empirical score is unchanged by the transform.
pub fn score(xs: &[f64], ys: &[f64], spec: &CorrelatorSpec, use_wht: bool) -> Result<f64> {
    pwl::check_pair(xs, ys)?;
    spec.validate()?;
    if use_wht {
        let tx = wht::pad_pow2(xs)?.transform();
        let ty = wht::pad_pow2(ys)?.transform();
        Ok(spec.sum_scores(&tx, &ty) / xs.len() as f64)
    } else {
        Ok(spec.sum_scores(xs, ys) / xs.len() as f64)
    }
}

/// Measures `ĝ(R)` on `r_grid` by averaging `trials` fresh batches per point.
///
/// Cell `(i, t)` draws from `rng.child(i).child(t)`, so the table does not
/// depend on how cells are scheduled across threads.
pub fn build_table(
    spec: &CorrelatorSpec,
    r_grid: &[f64],
    n: usize,
    trials: usize,
    rng: RngStream,
    use_wht: bool,
    family: Family,
) -> Result<CalibrationTable> {
    spec.validate()?;
    if r_grid.is_empty() {
        return Err(Error::Empty("calibration grid"));
    }
    if let Some(r) = r_grid.iter().find(|r| !(r.abs() <= MAX_GRID_EDGE)) {
        return Err(Error::domain(format!(
            "calibration grid point {r} outside [-0.99, 0.99]"
        )));
    }
    if n < MIN_N {
        return Err(Error::param(format!(
            "calibration batch size must be >= {MIN_N}, got {n}"
        )));
    }
    if trials == 0 {
        return Err(Error::param("calibration needs at least one trial"));
    }

    let scores = (0..r_grid.len() * trials)
        .into_par_iter()
        .map(|cell| {
            let (i, t) = (cell / trials, cell % trials);
            let stream = rng.child(i as u64).child(t as u64);
            let b = sample_nongaussian(n, r_grid[i], family, stream)?;
            score(&b.xs, &b.ys, spec, use_wht)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut raw = Vec::with_capacity(r_grid.len());
    let mut stderr = Vec::with_capacity(r_grid.len());
    for chunk in scores.chunks(trials) {
        let (m, se) = mean_and_stderr(chunk);
        raw.push(m);
        stderr.push(se);
    }
    let mean_scores = if r_grid.windows(2).all(|w| w[0] <= w[1]) {
        isotonic(&raw)
    } else {
        raw
    };

    Ok(CalibrationTable {
        r_grid: r_grid.to_vec(),
        mean_scores,
        stderr,
        n_per_trial: n,
        trials,
        spec: spec.clone(),
        used_wht: use_wht,
        family,
        seed: rng.seed,
    })
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares non-decreasing fit (pool adjacent violators, equal weights).
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    // (block mean, block size)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, c2) = blocks[blocks.len() - 1];
            let (m1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let c = c1 + c2;
            *blocks.last_mut().expect("two blocks") =
                ((m1 * c1 as f64 + m2 * c2 as f64) / c as f64, c);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, c)| std::iter::repeat_n(m, c))
        .collect()
}

/// Fits `R ≈ P(y)` of the given degree by least squares on the table.
pub fn fit_inverse(table: &CalibrationTable, degree: usize) -> Result<CalibrationModel> {
    if degree == 0 {
        return Err(Error::param("polynomial degree must be >= 1"));
    }
    let m = table.mean_scores.len();
    if m < degree + 2 || table.r_grid.len() != m {
        return Err(Error::param(format!(
            "degree {degree} fit needs at least {} table points, got {m}",
            degree + 2
        )));
    }
    let ys = &table.mean_scores;
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Numeric {
            message: "table contains non-finite scores".into(),
            achieved: f64::NAN,
        });
    }
    let scale = ys.iter().fold(0.0f64, |a, y| a.max(y.abs()));
    if scale == 0.0 {
        return Err(Error::Numeric {
            message: "all table scores are zero".into(),
            achieved: 0.0,
        });
    }

    // Vandermonde in y/scale keeps the columns comparable in size.
    let vander = DMatrix::from_fn(m, degree + 1, |i, j| (ys[i] / scale).powi(j as i32));
    let target = DVector::from_column_slice(&table.r_grid);
    let svd = vander.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::Numeric {
            message: format!("rank-deficient degree {degree} fit"),
            achieved: smin / smax,
        });
    }
    let scaled = svd
        .solve(&target, RANK_TOL * smax)
        .map_err(|e| Error::Numeric {
            message: e.to_string(),
            achieved: f64::NAN,
        })?;
    let coefficients: Vec<f64> = scaled
        .iter()
        .enumerate()
        .map(|(j, c)| c / scale.powi(j as i32))
        .collect();

    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut model = CalibrationModel {
        coefficients,
        degree,
        domain: (lo, hi),
        spec: table.spec.clone(),
        max_residual: 0.0,
    };
    model.max_residual = ys
        .iter()
        .zip(&table.r_grid)
        .map(|(y, r)| (model.poly(*y) - r).abs())
        .fold(0.0, f64::max);
    Ok(model)
}

impl CalibrationModel {
    fn poly(&self, y: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * y + c)
    }

    /// `P(y)` with `y` clamped to the fitted domain and the result to `[-1, 1]`.
    pub fn invert(&self, y: f64) -> f64 {
        let (lo, hi) = self.domain;
        self.poly(y.clamp(lo, hi)).clamp(-1.0, 1.0)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| {
            v.iter()
                .map(|c| format!("{c:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "# corrkit calibration model");
        let _ = writeln!(s, "version = {MODEL_VERSION}");
        let _ = writeln!(s, "spec = {}", self.spec);
        let _ = writeln!(s, "degree = {}", self.degree);
        let _ = writeln!(s, "domain = {}", join(&[self.domain.0, self.domain.1]));
        let _ = writeln!(s, "coefficients = {}", join(&self.coefficients));
        let _ = writeln!(s, "max_residual = {:e}", self.max_residual);
        s
    }

    pub fn from_text(text: &str) -> Result<CalibrationModel> {
        let mut version = None;
        let mut spec = None;
        let mut degree = None;
        let mut domain = None;
        let mut coefficients = None;
        let mut max_residual = None;

        let floats = |line: usize, v: &str| -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("`{t}` is not a number"),
                    })
                })
                .collect()
        };

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, got `{l}`"),
            })?;
            let v = v.trim();
            match k.trim() {
                "version" => {
                    if v != MODEL_VERSION.to_string() {
                        return Err(Error::Version {
                            found: v.to_owned(),
                            expected: MODEL_VERSION,
                        });
                    }
                    version = Some(());
                }
                "spec" => {
                    spec = Some(v.parse::<CorrelatorSpec>().map_err(|e| Error::Parse {
                        line,
                        message: e.to_string(),
                    })?)
                }
                "degree" => {
                    degree = Some(v.parse::<usize>().map_err(|_| Error::Parse {
                        line,
                        message: format!("`{v}` is not a degree"),
                    })?)
                }
                "domain" => {
                    let d = floats(line, v)?;
                    if d.len() != 2 || !(d[0] <= d[1]) {
                        return Err(Error::Parse {
                            line,
                            message: "domain needs `lo hi` with lo <= hi".into(),
                        });
                    }
                    domain = Some((d[0], d[1]));
                }
                "coefficients" => coefficients = Some(floats(line, v)?),
                "max_residual" => {
                    let r = floats(line, v)?;
                    if r.len() != 1 {
                        return Err(Error::Parse {
                            line,
                            message: "max_residual needs one value".into(),
                        });
                    }
                    max_residual = Some(r[0]);
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key `{other}`"),
                    });
                }
            }
        }

        let end = text.lines().count() + 1;
        let missing = |what: &str| Error::Parse {
            line: end,
            message: format!("missing `{what}`"),
        };
        version.ok_or_else(|| missing("version"))?;
        let spec = spec.ok_or_else(|| missing("spec"))?;
        let degree = degree.ok_or_else(|| missing("degree"))?;
        let domain = domain.ok_or_else(|| missing("domain"))?;
        let coefficients = coefficients.ok_or_else(|| missing("coefficients"))?;
        let max_residual = max_residual.ok_or_else(|| missing("max_residual"))?;
        if coefficients.len() != degree + 1 {
            return Err(Error::Parse {
                line: end,
                message: format!(
                    "degree {degree} needs {} coefficients, got {}",
                    degree + 1,
                    coefficients.len()
                ),
            });
        }
        Ok(CalibrationModel {
            coefficients,
            degree,
            domain,
            spec,
            max_residual,
        })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<CalibrationModel> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        Self::from_text(&text)
    }
}

/// See [`CalibrationModel::invert`].
pub fn invert(model: &CalibrationModel, y: f64) -> f64 {
    model.invert(y)
}

/// Correlation estimate: optional WHT, mean score, then `g⁻¹`.
pub fn estimate_r(
    xs: &[f64],
    ys: &[f64],
    spec: &CorrelatorSpec,
    model: &CalibrationModel,
    use_wht: bool,
) -> Result<f64> {
    if model.spec != *spec {
        return Err(Error::SpecMismatch {
            model: model.spec.to_string(),
            requested: spec.to_string(),
        });
    }
    Ok(model.invert(score(xs, ys, spec, use_wht)?))
}

pub fn save_model(model: &CalibrationModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_text())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CalibrationModel> {
    CalibrationModel::from_text(&std::fs::read_to_string(path)?)
}

/// Builds a default-sized table for `spec` and fits its default degree.
pub fn calibrate_default(
    spec: &CorrelatorSpec,
    family: Family,
    rng: RngStream,
    use_wht: bool,
) -> Result<CalibrationModel> {
    let table = build_table(
        spec,
        &default_grid(),
        DEFAULT_N,
        DEFAULT_TRIALS,
        rng,
        use_wht,
        family,
    )?;
    fit_inverse(&table, spec.default_degree())
}
