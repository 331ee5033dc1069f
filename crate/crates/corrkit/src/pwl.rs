//! Correlator family `f(x, y) = h(x + y) - h(x - y)`.
//!
//! Every nonlinear kind is defined by an even generating function `h`. The
//! empirical correlator is the product `x·y` and is kept as its own kind.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weighted mixture of shifted absolute values,
/// `h(x) = ½ Σ w_l (|x − α_l| + |x + α_l|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlMixture {
    weights: Vec<f64>,
    offsets: Vec<f64>,
}

impl PwlMixture {
    pub fn new(weights: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        let m = PwlMixture { weights, offsets };
        m.validate()?;
        Ok(m)
    }

    /// Single unit-weight term with offset `alpha`.
    pub fn single(alpha: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![alpha])
    }

    /// `L` equal-weight terms with offsets `c·l/L`, `l = 1..=L`. In the limit
    /// this generates the scaled empirical correlator `2xy/c`.
    pub fn uniform_ramp(terms: usize, range: f64) -> Result<Self> {
        if terms == 0 {
            return Err(Error::param("ramp mixture needs at least one term"));
        }
        let w = 1.0 / terms as f64;
        let offsets = (1..=terms)
            .map(|l| range * l as f64 / terms as f64)
            .collect();
        Self::new(vec![w; terms], offsets)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::param("mixture needs at least one term"));
        }
        if self.weights.len() != self.offsets.len() {
            return Err(Error::param(format!(
                "mixture has {} weights but {} offsets",
                self.weights.len(),
                self.offsets.len()
            )));
        }
        if let Some(w) = self
            .weights
            .iter()
            .find(|w| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(Error::param(format!(
                "mixture weight {w} is negative or not finite"
            )));
        }
        if let Some(a) = self
            .offsets
            .iter()
            .find(|a| !(**a >= 0.0) || !a.is_finite())
        {
            return Err(Error::param(format!(
                "mixture offset {a} is negative or not finite"
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::param(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&self.offsets)
            .map(|(w, a)| w * ((x - a).abs() + (x + a).abs()))
            .sum::<f64>()
    }
}

/// Mixture generating function `h(x)`.
pub fn pwl_h(x: f64, m: &PwlMixture) -> Result<f64> {
    m.validate()?;
    Ok(m.eval(x))
}

/// Huber function: quadratic `x²/(2δ)` inside `|x| < δ`, linear `|x| − δ/2` outside.
pub fn huber_h(x: f64, delta: f64) -> Result<f64> {
    check_positive("huber delta", delta)?;
    Ok(huber_unchecked(x, delta))
}

/// Log-sum-exp `(1/a)·log(e^{ax} + e^{−ax})`, evaluated without overflow.
pub fn lse_h(x: f64, a: f64) -> Result<f64> {
    check_positive("lse scale a", a)?;
    Ok(lse_unchecked(x, a))
}

/// Margin-propagation output: the `z` solving `(x − z)₊ + (−x − z)₊ = γ`.
pub fn mp_h(x: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::param(format!("mp gamma must be >= 0, got {gamma}")));
    }
    Ok(mp_unchecked(x, gamma))
}

#[inline]
fn huber_unchecked(x: f64, delta: f64) -> f64 {
    let ax = x.abs();
    if ax < delta {
        0.5 * x * x / delta
    } else {
        ax - 0.5 * delta
    }
}

#[inline]
fn lse_unchecked(x: f64, a: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * a * ax).exp().ln_1p() / a
}

#[inline]
fn mp_unchecked(x: f64, gamma: f64) -> f64 {
    // Closed form of the two-term MP constraint.
    x.abs().max(0.5 * gamma) - gamma
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be > 0, got {v}")))
    }
}

/// Which correlator to apply, with exactly the parameters that kind needs.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelatorSpec {
    /// Sample product `x·y`.
    Empirical,
    /// `|x + y| − |x − y|`.
    LinearRectifier,
    Mp {
        gamma: f64,
    },
    Huber {
        delta: f64,
    },
    Lse {
        a: f64,
    },
    Mixture(PwlMixture),
}

impl CorrelatorSpec {
    /// The built-in parameterizations used for default calibration runs.
    pub fn defaults() -> Vec<CorrelatorSpec> {
        vec![
            CorrelatorSpec::Empirical,
            CorrelatorSpec::LinearRectifier,
            CorrelatorSpec::Mp { gamma: 1.45 },
            CorrelatorSpec::Huber { delta: 1.4 },
            CorrelatorSpec::Lse { a: 1.0 },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelatorSpec::Empirical | CorrelatorSpec::LinearRectifier => Ok(()),
            CorrelatorSpec::Mp { gamma } => mp_h(0.0, *gamma).map(|_| ()),
            CorrelatorSpec::Huber { delta } => check_positive("huber delta", *delta),
            CorrelatorSpec::Lse { a } => check_positive("lse scale a", *a),
            CorrelatorSpec::Mixture(m) => m.validate(),
        }
    }

    /// Polynomial degree used for the inverse map unless overridden.
    /// Offset-bearing kinds have a less regular `g` and get one extra degree.
    pub fn default_degree(&self) -> usize {
        match self {
            CorrelatorSpec::Mp { .. } => 5,
            CorrelatorSpec::Mixture(m) if m.offsets().iter().any(|a| *a > 0.0) => 5,
            _ => 4,
        }
    }

    /// Generating function `h`; `None` for the empirical kind.
    pub fn h(&self, x: f64) -> Result<Option<f64>> {
        self.validate()?;
        Ok(match self {
            CorrelatorSpec::Empirical => None,
            CorrelatorSpec::LinearRectifier => Some(x.abs()),
            CorrelatorSpec::Mp { gamma } => Some(mp_unchecked(x, *gamma)),
            CorrelatorSpec::Huber { delta } => Some(huber_unchecked(x, *delta)),
            CorrelatorSpec::Lse { a } => Some(lse_unchecked(x, *a)),
            CorrelatorSpec::Mixture(m) => Some(m.eval(x)),
        })
    }

    /// Sum of `f(x_n, y_n)` over all pairs. Parameters must already be valid.
    pub(crate) fn sum_scores(&self, xs: &[f64], ys: &[f64]) -> f64 {
        fn diff_sum(xs: &[f64], ys: &[f64], h: impl Fn(f64) -> f64) -> f64 {
            xs.iter().zip(ys).map(|(&x, &y)| h(x + y) - h(x - y)).sum()
        }
        match self {
            CorrelatorSpec::Empirical => xs.iter().zip(ys).map(|(x, y)| x * y).sum(),
            CorrelatorSpec::LinearRectifier => diff_sum(xs, ys, f64::abs),
            CorrelatorSpec::Mp { gamma } => diff_sum(xs, ys, |v| mp_unchecked(v, *gamma)),
            CorrelatorSpec::Huber { delta } => diff_sum(xs, ys, |v| huber_unchecked(v, *delta)),
            CorrelatorSpec::Lse { a } => diff_sum(xs, ys, |v| lse_unchecked(v, *a)),
            CorrelatorSpec::Mixture(m) => diff_sum(xs, ys, |v| m.eval(v)),
        }
    }
}

/// Score of a single pair.
pub fn correlator_f(x: f64, y: f64, spec: &CorrelatorSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.sum_scores(&[x], &[y]))
}

/// Mean score `(1/N) Σ f(x_n, y_n)`.
pub fn batch_score(xs: &[f64], ys: &[f64], spec: &CorrelatorSpec) -> Result<f64> {
    check_pair(xs, ys)?;
    spec.validate()?;
    Ok(spec.sum_scores(xs, ys) / xs.len() as f64)
}

pub(crate) fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::Empty("sample vectors"));
    }
    Ok(())
}

impl fmt::Display for CorrelatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(v: &[f64]) -> String {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        match self {
            CorrelatorSpec::Empirical => f.write_str("empirical"),
            CorrelatorSpec::LinearRectifier => f.write_str("l1"),
            CorrelatorSpec::Mp { gamma } => write!(f, "mp:gamma={gamma}"),
            CorrelatorSpec::Huber { delta } => write!(f, "huber:delta={delta}"),
            CorrelatorSpec::Lse { a } => write!(f, "lse:a={a}"),
            CorrelatorSpec::Mixture(m) => {
                write!(f, "mix:w={};alpha={}", join(m.weights()), join(m.offsets()))
            }
        }
    }
}

/// Parses compact descriptors: `empirical`, `l1`, `mp:gamma=1.45`,
/// `huber:delta=0.5`, `lse:a=1`, `mix:w=0.5,0.5;alpha=0,2`.
impl FromStr for CorrelatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), p.trim()),
            None => (s, ""),
        };
        let mut fields = Vec::new();
        for part in params.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::param(format!("expected key=value in `{part}`")))?;
            fields.push((k.trim(), v.trim()));
        }
        let scalar = |key: &str| -> Result<f64> {
            if fields.len() != 1 || fields[0].0 != key {
                return Err(Error::param(format!(
                    "`{kind}` takes exactly `{key}=<value>`"
                )));
            }
            parse_f64(fields[0].1)
        };
        let no_params = || -> Result<()> {
            if fields.is_empty() {
                Ok(())
            } else {
                Err(Error::param(format!("`{kind}` takes no parameters")))
            }
        };
        let spec = match kind.to_ascii_lowercase().as_str() {
            "empirical" | "emp" => {
                no_params()?;
                CorrelatorSpec::Empirical
            }
            "l1" | "linear-rectifier" | "lr" => {
                no_params()?;
                CorrelatorSpec::LinearRectifier
            }
            "mp" => CorrelatorSpec::Mp {
                gamma: scalar("gamma")?,
            },
            "huber" => CorrelatorSpec::Huber {
                delta: scalar("delta")?,
            },
            "lse" => CorrelatorSpec::Lse { a: scalar("a")? },
            "mix" => {
                let mut w = None;
                let mut alpha = None;
                for (k, v) in &fields {
                    let list = v.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
                    match *k {
                        "w" => w = Some(list),
                        "alpha" => alpha = Some(list),
                        other => return Err(Error::param(format!("unknown mix key `{other}`"))),
                    }
                }
                let alpha = alpha.ok_or_else(|| Error::param("mix needs alpha=..."))?;
                let w = w.unwrap_or_else(|| vec![1.0 / alpha.len() as f64; alpha.len()]);
                CorrelatorSpec::Mixture(PwlMixture::new(w, alpha)?)
            }
            other => return Err(Error::param(format!("unknown correlator kind `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::param(format!("`{s}` is not a number")))
}
