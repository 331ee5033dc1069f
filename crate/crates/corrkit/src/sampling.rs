//! Paired samples with a known population correlation.
//!
//! Two independent zero-mean unit-variance sources `s₁, s₂` are mixed as
//! `x = s₁`, `y = R·s₁ + √(1−R²)·s₂`, which gives `E[xy] = R` for any source
//! family.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::csvio::{self, Cell};
use crate::error::{Error, Result};

/// Shape of the gamma source; its skewness is `2/√k`.
pub const GAMMA_SHAPE: f64 = 2.0;

/// Reproducible random stream: a seed plus a stream index.
///
/// Backed by ChaCha8, whose output depends only on `(seed, stream_index)`
/// and not on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            stream_index: 0,
        }
    }

    pub fn with_stream(seed: u64, stream_index: u64) -> Self {
        RngStream { seed, stream_index }
    }

    /// Derived stream for sub-task `idx`. Children of distinct indices are
    /// distinct streams of the same seed.
    pub fn child(&self, idx: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream_index: splitmix64(self.stream_index ^ splitmix64(idx)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Source distribution, always standardized to zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// Gamma(k = 2, θ = 1), shifted by −2 and scaled by `1/√2`.
    Gamma,
    /// Each draw picks uniform, Gaussian or gamma with equal probability.
    MixedUniformGaussianGamma,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Gaussian,
        Family::Uniform,
        Family::Gamma,
        Family::MixedUniformGaussianGamma,
    ];

    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Uniform => {
                let h = 3f64.sqrt();
                rng.gen_range(-h..h)
            }
            Family::Gamma => {
                let g = Gamma::new(GAMMA_SHAPE, 1.0).expect("valid gamma parameters");
                (g.sample(rng) - GAMMA_SHAPE) / GAMMA_SHAPE.sqrt()
            }
            Family::MixedUniformGaussianGamma => {
                let pick = match rng.gen_range(0..3u8) {
                    0 => Family::Uniform,
                    1 => Family::Gaussian,
                    _ => Family::Gamma,
                };
                pick.draw(rng)
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Uniform => "uniform",
            Family::Gamma => "gamma",
            Family::MixedUniformGaussianGamma => "mixed",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "uniform" => Ok(Family::Uniform),
            "gamma" => Ok(Family::Gamma),
            "mixed" => Ok(Family::MixedUniformGaussianGamma),
            other => Err(Error::param(format!("unknown family `{other}`"))),
        }
    }
}

/// Paired samples plus the metadata that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub family: Family,
    pub true_r: f64,
    pub seed: u64,
    /// Number of real pairs. Larger than `xs.len()` never; smaller when the
    /// vectors were zero-padded before a transform.
    pub original_len: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn is_padded(&self) -> bool {
        self.original_len != self.xs.len()
    }

    /// Writes `x,y` rows under a comment header with family, r and seed.
    pub fn write_csv<W: Write>(&self, out: W, extra_comments: &[String]) -> Result<()> {
        let mut comments = vec![
            format!("family = {}", self.family),
            format!("r = {}", self.true_r),
            format!("seed = {}", self.seed),
            format!("original_len = {}", self.original_len),
        ];
        comments.extend_from_slice(extra_comments);
        let rows: Vec<Vec<Cell>> = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, y)| vec![Cell::Num(*x), Cell::Num(*y)])
            .collect();
        csvio::emit_csv(out, &comments, &["x", "y"], &rows)
    }

    /// Reads a two-column pair file. Metadata comes from the comment header
    /// when present; otherwise the family is reported as Gaussian, r as NaN.
    pub fn read_csv<R: Read>(mut input: R) -> Result<SampleBatch> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut family = Family::Gaussian;
        let mut true_r = f64::NAN;
        let mut seed = 0;
        let mut original_len = None;
        for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
            if let Some((k, v)) = line.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "family" => family = v.parse()?,
                    "r" => true_r = v.parse().unwrap_or(f64::NAN),
                    "seed" => seed = v.parse().unwrap_or(0),
                    "original_len" => original_len = v.parse().ok(),
                    _ => {}
                }
            }
        }
        let data = csvio::read_csv(text.as_bytes())?;
        if data.header.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                message: "expected two columns x,y".into(),
            });
        }
        let xs = data.numeric_column(0)?;
        let ys = data.numeric_column(1)?;
        let original_len = original_len.unwrap_or(xs.len()).min(xs.len());
        Ok(SampleBatch {
            xs,
            ys,
            family,
            true_r,
            seed,
            original_len,
        })
    }
}

fn check_request(n: usize, r: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("batch size"));
    }
    if !(r.abs() <= 1.0) {
        return Err(Error::domain(format!(
            "correlation must satisfy |r| <= 1, got {r}"
        )));
    }
    Ok(())
}

fn mix_sources(n: usize, r: f64, family: Family, stream: RngStream) -> SampleBatch {
    let mut rng = stream.rng();
    let s1: Vec<f64> = (0..n).map(|_| family.draw(&mut rng)).collect();
    let s2: Vec<f64> = (0..n).map(|_| family.draw(&mut rng)).collect();
    let q = (1.0 - r * r).sqrt();
    let ys = s1.iter().zip(&s2).map(|(a, b)| r * a + q * b).collect();
    SampleBatch {
        xs: s1,
        ys,
        family,
        true_r: r,
        seed: stream.seed,
        original_len: n,
    }
}

/// Jointly Gaussian pairs with correlation `r`.
pub fn sample_bivariate_gaussian(n: usize, r: f64, rng: RngStream) -> Result<SampleBatch> {
    check_request(n, r)?;
    Ok(mix_sources(n, r, Family::Gaussian, rng))
}

/// Pairs with correlation `r` whose sources come from `family`.
pub fn sample_nongaussian(n: usize, r: f64, family: Family, rng: RngStream) -> Result<SampleBatch> {
    check_request(n, r)?;
    Ok(mix_sources(n, r, family, rng))
}

/// Subtracts the sample mean and divides by the (population, `1/N`) standard deviation.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 values, got {}",
            v.len()
        )));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Degenerate("vector has zero variance".into()));
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}
