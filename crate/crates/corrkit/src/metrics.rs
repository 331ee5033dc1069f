//! Cramér–Rao bound, estimation-error sweeps and SNR.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::calibration::{estimate_r, CalibrationModel};
use crate::csvio::{self, Cell};
use crate::error::{Error, Result};
use crate::price::linspace;
use crate::pwl::CorrelatorSpec;
use crate::sampling::{sample_nongaussian, Family, RngStream};

/// Bootstrap resamples used for the standard error of σ.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Default correlation grid for sweeps: −0.9, −0.8, …, 0.9.
pub fn default_sweep_grid() -> Vec<f64> {
    linspace(0.9, 19)
        .into_iter()
        .map(|r| (r * 10.0).round() / 10.0)
        .collect()
}

/// Desk-scale correlator lengths 16, 32, …, 4096.
pub fn default_n_values() -> Vec<usize> {
    (4..=12).map(|k| 1usize << k).collect()
}

fn check_open(r: f64) -> Result<()> {
    if r.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "correlation must satisfy |R| < 1, got {r}"
        )))
    }
}

/// Fisher information of one Gaussian pair about its correlation,
/// `(1 + R²) / (1 − R²)²`.
pub fn fisher_info(r: f64) -> Result<f64> {
    check_open(r)?;
    let q = 1.0 - r * r;
    Ok((1.0 + r * r) / (q * q))
}

/// Lower bound on the standard deviation of any unbiased estimate of `R`
/// from `n` Gaussian pairs, `√((1 − R²)² / (n (1 + R²)))`.
pub fn crb_sigma(r: f64, n: usize) -> Result<f64> {
    check_open(r)?;
    if n == 0 {
        return Err(Error::Empty("sample count"));
    }
    let q = 1.0 - r * r;
    Ok((q * q / (n as f64 * (1.0 + r * r))).sqrt())
}

/// `20·log₁₀(1/σ̄)`.
pub fn snr_db(sigma_bar: f64) -> Result<f64> {
    if !(sigma_bar > 0.0) || !sigma_bar.is_finite() {
        return Err(Error::param(format!(
            "sigma must be positive and finite, got {sigma_bar}"
        )));
    }
    Ok(-20.0 * sigma_bar.log10())
}

/// Sample standard deviation (denominator `n − 1`).
pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Bootstrap standard error of [`std_dev`].
pub fn bootstrap_std_se(v: &[f64], resamples: usize, rng: RngStream) -> f64 {
    let mut r = rng.rng();
    let mut buf = vec![0.0; v.len()];
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = v[r.gen_range(0..v.len())];
            }
            std_dev(&buf)
        })
        .collect();
    std_dev(&stats)
}

/// Sample variance of the per-pair products `x·y`.
pub fn product_variance(xs: &[f64], ys: &[f64]) -> Result<f64> {
    crate::pwl::check_pair(xs, ys)?;
    if xs.len() < 2 {
        return Err(Error::Degenerate("need at least two pairs".into()));
    }
    let p: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    Ok(std_dev(&p).powi(2))
}

/// Estimation-error statistics over a `(N, R)` grid.
///
/// Matrices are indexed `[n_index][r_index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: CorrelatorSpec,
    pub family: Family,
    pub r_grid: Vec<f64>,
    pub n_values: Vec<usize>,
    /// Standard deviation of `R̂ − R`.
    pub sigma: Vec<Vec<f64>>,
    /// Bootstrap standard error of each `sigma`.
    pub sigma_se: Vec<Vec<f64>>,
    /// Mean of `R̂ − R`.
    pub bias: Vec<Vec<f64>>,
    pub crb_sigma: Vec<Vec<f64>>,
    /// SNR per N from the σ averaged uniformly over the R grid.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub use_wht: bool,
}

struct Row {
    sigma: Vec<f64>,
    sigma_se: Vec<f64>,
    bias: Vec<f64>,
    crb: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn sweep_row(
    spec: &CorrelatorSpec,
    model: &CalibrationModel,
    family: Family,
    r_grid: &[f64],
    n: usize,
    trials: usize,
    rng: RngStream,
    use_wht: bool,
) -> Result<Row> {
    if trials < 2 {
        return Err(Error::param("error sweeps need at least two trials"));
    }
    let crb = r_grid
        .iter()
        .map(|r| crb_sigma(*r, n))
        .collect::<Result<Vec<_>>>()?;
    let base = rng.child(n as u64);
    let errors = (0..r_grid.len() * trials)
        .into_par_iter()
        .map(|cell| {
            let (i, t) = (cell / trials, cell % trials);
            let b = sample_nongaussian(n, r_grid[i], family, base.child(i as u64).child(t as u64))?;
            Ok(estimate_r(&b.xs, &b.ys, spec, model, use_wht)? - r_grid[i])
        })
        .collect::<Result<Vec<f64>>>()?;

    let boot = base.child(u64::MAX);
    let stats: Vec<(f64, f64, f64)> = errors
        .par_chunks(trials)
        .enumerate()
        .map(|(i, e)| {
            let mean = e.iter().sum::<f64>() / trials as f64;
            (
                std_dev(e),
                bootstrap_std_se(e, BOOTSTRAP_RESAMPLES, boot.child(i as u64)),
                mean,
            )
        })
        .collect();
    Ok(Row {
        sigma: stats.iter().map(|s| s.0).collect(),
        sigma_se: stats.iter().map(|s| s.1).collect(),
        bias: stats.iter().map(|s| s.2).collect(),
        crb,
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    spec: &CorrelatorSpec,
    model: &CalibrationModel,
    family: Family,
    r_grid: &[f64],
    n_values: &[usize],
    trials: usize,
    rng: RngStream,
    use_wht: bool,
) -> Result<SweepResult> {
    if r_grid.is_empty() {
        return Err(Error::Empty("correlation grid"));
    }
    if n_values.is_empty() {
        return Err(Error::Empty("sample-size list"));
    }
    let mut out = SweepResult {
        spec: spec.clone(),
        family,
        r_grid: r_grid.to_vec(),
        n_values: n_values.to_vec(),
        sigma: Vec::new(),
        sigma_se: Vec::new(),
        bias: Vec::new(),
        crb_sigma: Vec::new(),
        snr_db: Vec::new(),
        trials,
        seed: rng.seed,
        use_wht,
    };
    for &n in n_values {
        let row = sweep_row(spec, model, family, r_grid, n, trials, rng, use_wht)?;
        let sigma_bar = row.sigma.iter().sum::<f64>() / row.sigma.len() as f64;
        out.snr_db.push(snr_db(sigma_bar)?);
        out.sigma.push(row.sigma);
        out.sigma_se.push(row.sigma_se);
        out.bias.push(row.bias);
        out.crb_sigma.push(row.crb);
    }
    Ok(out)
}

/// σ(R̂ − R) at one correlator length for every R in the grid.
#[allow(clippy::too_many_arguments)]
pub fn error_std_sweep(
    spec: &CorrelatorSpec,
    model: &CalibrationModel,
    family: Family,
    r_grid: &[f64],
    n: usize,
    trials: usize,
    rng: RngStream,
    use_wht: bool,
) -> Result<SweepResult> {
    sweep(spec, model, family, r_grid, &[n], trials, rng, use_wht)
}

/// SNR versus correlator length. Rows for a given N are identical to the
/// ones [`error_std_sweep`] produces with the same stream.
#[allow(clippy::too_many_arguments)]
pub fn snr_sweep(
    spec: &CorrelatorSpec,
    model: &CalibrationModel,
    family: Family,
    r_grid: &[f64],
    n_values: &[usize],
    trials: usize,
    rng: RngStream,
    use_wht: bool,
) -> Result<SweepResult> {
    sweep(spec, model, family, r_grid, n_values, trials, rng, use_wht)
}

pub const SWEEP_HEADER: [&str; 9] = [
    "spec", "family", "R", "N", "sigma", "crb", "snr_db", "trials", "seed",
];

impl SweepResult {
    /// Long-form rows matching [`SWEEP_HEADER`].
    pub fn rows(&self) -> Vec<Vec<Cell>> {
        let mut rows = Vec::new();
        for (j, &n) in self.n_values.iter().enumerate() {
            for (i, &r) in self.r_grid.iter().enumerate() {
                rows.push(vec![
                    Cell::Text(self.spec.to_string()),
                    Cell::Text(self.family.to_string()),
                    r.into(),
                    n.into(),
                    self.sigma[j][i].into(),
                    self.crb_sigma[j][i].into(),
                    self.snr_db[j].into(),
                    self.trials.into(),
                    self.seed.into(),
                ]);
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        csvio::emit_csv(out, comments, &SWEEP_HEADER, &self.rows())
    }
}
