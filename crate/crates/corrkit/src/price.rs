//! Expected correlator output `g(R) = E[f(X, Y)]` for jointly Gaussian,
//! zero-mean, unit-variance inputs with correlation `R`.
//!
//! Price's theorem gives `dg/dR = E[∂²f/∂x∂y]`. For a mixture `h` the mixed
//! partial is a sum of Dirac deltas on the lines `x ± y = ±α_l`, whose
//! expectations are Gaussian densities of `x ± y ~ N(0, 2(1 ± R))`:
//!
//! ```text
//! dg/dR = Σ w_l [ exp(−α_l²/(4(1+R))) / √(π(1+R)) + exp(−α_l²/(4(1−R))) / √(π(1−R)) ]
//! ```
//!
//! Both terms blow up like `1/√(1 ∓ R)` at the ends. Integrating in
//! `u = √(1 ± ρ)` absorbs the singular factor exactly:
//!
//! ```text
//! g(R) = (2/√π) [ K(√(1+R)) − K(√(1−R)) ],   K(s) = ∫₁ˢ Σ w_l exp(−α_l²/(4u²)) du
//! ```
//!
//! and the remaining integrand is smooth on `(0, √2]`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pwl::PwlMixture;
use crate::quad;

/// Absolute tolerance for every `g(R)` evaluation.
pub const G_TOLERANCE: f64 = 1e-9;

/// Number of points in the default curve grid.
pub const DEFAULT_GRID_POINTS: usize = 199;
/// Half-width of the default curve grid.
pub const DEFAULT_GRID_EDGE: f64 = 0.99;

fn check_open(r: f64) -> Result<()> {
    if r.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "correlation must satisfy |R| < 1, got {r}"
        )))
    }
}

/// Slope `dg/dR` of the expected output curve.
pub fn dg_dr(r: f64, m: &PwlMixture) -> Result<f64> {
    check_open(r)?;
    m.validate()?;
    let term = |s: f64| -> f64 {
        let sum: f64 = m
            .weights()
            .iter()
            .zip(m.offsets())
            .map(|(w, a)| w * (-a * a / (4.0 * s)).exp())
            .sum();
        sum / (PI * s).sqrt()
    };
    Ok(term(1.0 + r) + term(1.0 - r))
}

// Integrand after the u = √(1 ± ρ) substitution.
fn kernel(u: f64, m: &PwlMixture) -> f64 {
    let inv = 1.0 / (4.0 * u * u);
    m.weights()
        .iter()
        .zip(m.offsets())
        .map(|(w, a)| {
            if *a == 0.0 {
                *w
            } else {
                w * (-a * a * inv).exp()
            }
        })
        .sum()
}

/// `g(r1) − g(r0)` to absolute tolerance `tol`.
fn increment(r0: f64, r1: f64, m: &PwlMixture, tol: f64) -> Result<f64> {
    let scale = 2.0 / PI.sqrt();
    let part_tol = 0.5 * tol / scale;
    let k = |u: f64| kernel(u, m);
    let plus = quad::integrate(k, (1.0 + r0).sqrt(), (1.0 + r1).sqrt(), part_tol)?;
    let minus = quad::integrate(k, (1.0 - r0).sqrt(), (1.0 - r1).sqrt(), part_tol)?;
    Ok(scale * (plus - minus))
}

/// Expected correlator output `g(R)`, integrated from `g(0) = 0`.
pub fn g_of_r(r: f64, m: &PwlMixture) -> Result<f64> {
    check_open(r)?;
    m.validate()?;
    increment(0.0, r, m, G_TOLERANCE)
}

/// Closed form for the linear rectifier, `(2/√π)(√(1+R) − √(1−R))`.
pub fn g_l1_closed(r: f64) -> Result<f64> {
    if !(r.abs() <= 1.0) {
        return Err(Error::domain(format!("g_l1 needs |R| <= 1, got {r}")));
    }
    Ok(2.0 / PI.sqrt() * ((1.0 + r).sqrt() - (1.0 - r).sqrt()))
}

/// Limit of the ramp mixture with range `c`: `g(R) = 2R/c`.
pub fn g_l2_closed(r: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param(format!("input range c must be > 0, got {c}")));
    }
    Ok(2.0 * r / c)
}

/// Squared correlation recovered from a linear-rectifier output `y`:
/// `R² = (π/4)y² − (π²/64)y⁴`.
pub fn l1_quartic_identity(y: f64) -> Result<f64> {
    let y_max = g_l1_closed(1.0)?;
    if !(y.abs() <= y_max * (1.0 + 1e-12)) {
        return Err(Error::domain(format!("|y| must be <= {y_max}, got {y}")));
    }
    let y2 = y * y;
    Ok(PI / 4.0 * y2 - PI * PI / 64.0 * y2 * y2)
}

/// Tabulated `g(R)` for one mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GCurve {
    pub r_grid: Vec<f64>,
    pub g_values: Vec<f64>,
    pub mixture: PwlMixture,
}

impl GCurve {
    pub fn len(&self) -> usize {
        self.r_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_grid.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r_grid
            .iter()
            .copied()
            .zip(self.g_values.iter().copied())
    }
}

/// `points` evenly spaced values on `[-edge, edge]`.
pub fn linspace(edge: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = 2.0 * edge / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    // snap the midpoint of odd grids to exactly zero
                    if 2 * i + 1 == points {
                        0.0
                    } else {
                        -edge + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// The default 199-point grid on `[-0.99, 0.99]`.
pub fn default_grid() -> Vec<f64> {
    linspace(DEFAULT_GRID_EDGE, DEFAULT_GRID_POINTS)
}

/// Tabulates `g` on a sorted grid inside `(-1, 1)`.
///
/// Each value is accumulated from its neighbour nearest `R = 0`, so every
/// panel is integrated once. Panels are evaluated in parallel; the summation
/// order is fixed, so the result does not depend on scheduling.
pub fn build_gcurve(m: &PwlMixture, r_grid: &[f64]) -> Result<GCurve> {
    m.validate()?;
    if r_grid.is_empty() {
        return Err(Error::Empty("correlation grid"));
    }
    for r in r_grid {
        check_open(*r)?;
    }
    if r_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain(
            "correlation grid must be strictly increasing",
        ));
    }

    let anchor = r_grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let n = r_grid.len();
    let tol = G_TOLERANCE / n as f64;

    // Panel i spans from the neighbour on the anchor side to r_grid[i].
    let panels = (0..n)
        .into_par_iter()
        .map(|i| {
            let from = match i.cmp(&anchor) {
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => r_grid[i - 1],
                std::cmp::Ordering::Less => r_grid[i + 1],
            };
            increment(from, r_grid[i], m, tol)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut g_values = vec![0.0; n];
    g_values[anchor] = panels[anchor];
    for i in anchor + 1..n {
        g_values[i] = g_values[i - 1] + panels[i];
    }
    for i in (0..anchor).rev() {
        g_values[i] = g_values[i + 1] + panels[i];
    }
    Ok(GCurve {
        r_grid: r_grid.to_vec(),
        g_values,
        mixture: m.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(alpha: f64) -> PwlMixture {
        PwlMixture::single(alpha).unwrap()
    }

    // Plain trapezoid rule on dg/dR in the original variable.
    fn trapezoid_g(r: f64, m: &PwlMixture, panels: usize) -> f64 {
        let h = r / panels as f64;
        let mut acc = 0.5 * (dg_dr(0.0, m).unwrap() + dg_dr(r, m).unwrap());
        for i in 1..panels {
            acc += dg_dr(h * i as f64, m).unwrap();
        }
        acc * h
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn slope_at_zero_for_rectifier() {
        let v = dg_dr(0.0, &single(0.0)).unwrap();
        assert!((v - 2.0 / PI.sqrt()).abs() < 1e-15);
        assert!((v - 1.128_379_167_1).abs() < 1e-10);
    }

    #[test]
    fn slope_is_even() {
        let m = single(0.5);
        assert!((dg_dr(0.3, &m).unwrap() - dg_dr(-0.3, &m).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn slope_near_one_follows_singular_term() {
        let r = 1.0 - 1e-6;
        let v = dg_dr(r, &single(0.0)).unwrap();
        let closed = 1.0 / (PI * (1.0 + r)).sqrt() + 1.0 / (PI * (1.0 - r)).sqrt();
        assert!(((v - closed) / closed).abs() < 1e-6);
        let lead = (PI * (1.0 - r)).powf(-0.5);
        let ratio = v / lead;
        // the regular term contributes √((1−R)/(1+R)) ≈ 7.07e-4
        assert!((ratio - 1.0 - ((1.0 - r) / (1.0 + r)).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        let m = single(0.0);
        assert!(matches!(dg_dr(1.0, &m), Err(Error::Domain(_))));
        assert!(matches!(g_of_r(-1.0, &m), Err(Error::Domain(_))));
        assert!(matches!(g_of_r(f64::NAN, &m), Err(Error::Domain(_))));
        assert!(g_l1_closed(1.0 + 1e-9).is_err());
        assert!(g_l2_closed(0.1, 0.0).is_err());
        assert!(l1_quartic_identity(1.6).is_err());
    }

    #[test]
    fn g_at_zero_vanishes() {
        for a in [0.0, 0.5, 3.0] {
            assert_eq!(g_of_r(0.0, &single(a)).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadrature_matches_rectifier_closed_form() {
        let g = g_of_r(0.8, &single(0.0)).unwrap();
        assert!((g - g_l1_closed(0.8).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn quadrature_matches_trapezoid_oracle() {
        let m = single(0.5);
        let oracle = trapezoid_g(0.5, &m, 1_000_000);
        assert!((g_of_r(0.5, &m).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(g_l1_closed(0.0).unwrap(), 0.0);
        assert!((g_l1_closed(1.0).unwrap() - 1.595_769_121_6).abs() < 1e-10);
        assert!((g_l1_closed(0.8).unwrap() - 1.0092).abs() < 1e-4);
        assert_eq!(g_l2_closed(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(g_l2_closed(0.5, 2.0).unwrap(), 0.5);
        let (a, b) = (0.2, 0.35);
        let sum = g_l2_closed(a, 1.5).unwrap() + g_l2_closed(b, 1.5).unwrap();
        assert!((sum - g_l2_closed(a + b, 1.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn quartic_identity_inverts_rectifier_curve() {
        assert_eq!(l1_quartic_identity(0.0).unwrap(), 0.0);
        for r in [0.0, 0.3, -0.3, 0.8, -0.8, 1.0, -1.0] {
            let y = g_l1_closed(r).unwrap();
            assert!((l1_quartic_identity(y).unwrap() - r * r).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_matches_closed_form_on_grid() {
        let grid = linspace(0.9, 19);
        let c = build_gcurve(&single(0.0), &grid).unwrap();
        for (r, g) in c.points() {
            assert!((g - g_l1_closed(r).unwrap()).abs() < 1e-8, "R = {r}");
        }
    }

    #[test]
    fn curve_is_odd_and_increasing() {
        let grid = default_grid();
        assert_eq!(grid.len(), 199);
        assert_eq!(grid[99], 0.0);
        for a in [0.0, 0.5, 1.0, 2.0] {
            let c = build_gcurve(&single(a), &grid).unwrap();
            assert!(c.g_values.windows(2).all(|w| w[0] < w[1]));
            assert!(c.g_values[99].abs() < 1e-9);
            for i in 0..199 {
                assert!((c.g_values[i] + c.g_values[198 - i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curve_is_nearly_linear_around_zero() {
        let grid = [-0.05, 0.0, 0.05];
        for a in [0.0, 0.5, 1.0] {
            let m = single(a);
            let c = build_gcurve(&m, &grid).unwrap();
            let slope = (c.g_values[2] - c.g_values[0]) / 0.1;
            let s0 = dg_dr(0.0, &m).unwrap();
            assert!(((slope - s0) / s0).abs() < 0.01, "alpha = {a}");
        }
    }

    #[test]
    fn curve_rejects_bad_grids() {
        let m = single(0.0);
        assert!(build_gcurve(&m, &[]).is_err());
        assert!(build_gcurve(&m, &[0.1, 0.1]).is_err());
        assert!(build_gcurve(&m, &[0.2, 0.1]).is_err());
        assert!(build_gcurve(&m, &[0.0, 1.0]).is_err());
    }
}
