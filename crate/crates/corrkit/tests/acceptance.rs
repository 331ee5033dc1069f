//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use corrkit::calibration::{self, build_table, estimate_r, fit_inverse, CalibrationModel};
use corrkit::csvio::body_of;
use corrkit::metrics::{self, default_n_values, default_sweep_grid, product_variance};
use corrkit::price::{self, build_gcurve, g_l1_closed, g_of_r, l1_quartic_identity};
use corrkit::wht::fwht;
use corrkit::{CorrelatorSpec, Family, PwlMixture, RngStream};
use rand::Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 2024;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Models {
    specs: Vec<CorrelatorSpec>,
    models: Vec<CalibrationModel>,
}

impl Models {
    fn build() -> Models {
        let mut specs = CorrelatorSpec::defaults();
        specs.push("mp:gamma=2".parse().unwrap());
        let grid = calibration::default_grid();
        let models = specs
            .iter()
            .map(|s| {
                let t = build_table(
                    s,
                    &grid,
                    calibration::DEFAULT_N,
                    calibration::DEFAULT_TRIALS,
                    root().child(1),
                    false,
                    Family::Gaussian,
                )
                .unwrap();
                fit_inverse(&t, s.default_degree()).unwrap()
            })
            .collect();
        Models { specs, models }
    }

    fn get(&self, desc: &str) -> (&CorrelatorSpec, &CalibrationModel) {
        let spec: CorrelatorSpec = desc.parse().unwrap();
        let i = self.specs.iter().position(|s| *s == spec).unwrap();
        (&self.specs[i], &self.models[i])
    }

    fn defaults(&self) -> impl Iterator<Item = (&CorrelatorSpec, &CalibrationModel)> {
        self.specs
            .iter()
            .zip(&self.models)
            .take(CorrelatorSpec::defaults().len())
    }
}

fn root() -> RngStream {
    RngStream::new(SEED)
}

fn closed_form_agreement() -> Outcome {
    let t = Instant::now();
    let curve = build_gcurve(&PwlMixture::single(0.0).unwrap(), &price::default_grid()).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let err = curve
        .points()
        .map(|(r, g)| (g - g_l1_closed(r).unwrap()).abs())
        .fold(0.0, f64::max);
    check(
        curve.len() == 199 && err <= 1e-8 && elapsed < 5.0,
        format!("199 points, max |g - closed| = {err:.2e} (tol 1e-8), {elapsed:.3} s (limit 5 s)"),
    )
}

fn quartic_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [0.0, 0.3, -0.3, 0.8, -0.8, 1.0, -1.0] {
        let y = g_l1_closed(r).unwrap();
        worst = worst.max((l1_quartic_identity(y).unwrap() - r * r).abs());
    }
    check(
        worst <= 1e-12,
        format!("max |Q(g(R)) - R^2| = {worst:.2e} (tol 1e-12)"),
    )
}

fn empirical_limit() -> Outcome {
    let (terms, c) = (4096, 16.0);
    let m = PwlMixture::uniform_ramp(terms, c).unwrap();
    let mut worst: f64 = 0.0;
    for k in -10..=10 {
        let r = k as f64 / 20.0;
        worst = worst.max((c / 2.0 * g_of_r(r, &m).unwrap() - r).abs());
    }
    check(
        worst <= 1e-3,
        format!("L=4096, c=16: max |(c/2) g(R) - R| on [-0.5, 0.5] = {worst:.2e} (tol 1e-3)"),
    )
}

fn calibration_round_trip(models: &Models) -> Outcome {
    let t = Instant::now();
    let grid = default_sweep_grid();
    let mut parts = Vec::new();
    let mut ok = true;
    for (spec, model) in models.defaults() {
        let res = metrics::error_std_sweep(
            spec,
            model,
            Family::Gaussian,
            &grid,
            4096,
            500,
            root().child(2),
            false,
        )
        .unwrap();
        let worst = res.bias[0].iter().fold(0.0f64, |a, b| a.max(b.abs()));
        ok &= worst <= 0.01;
        parts.push(format!("{spec} {worst:.4}"));
    }
    check(
        ok,
        format!(
            "max |mean(R_hat) - R| (tol 0.01): {} [{:.1} s]",
            parts.join(", "),
            t.elapsed().as_secs_f64()
        ),
    )
}

struct Profiles {
    specs: Vec<String>,
    sweeps: Vec<metrics::SweepResult>,
}

impl Profiles {
    fn build(models: &Models) -> Profiles {
        let grid = default_sweep_grid();
        let mut specs = Vec::new();
        let mut sweeps = Vec::new();
        for (spec, model) in models.specs.iter().zip(&models.models) {
            specs.push(spec.to_string());
            sweeps.push(
                metrics::error_std_sweep(
                    spec,
                    model,
                    Family::Gaussian,
                    &grid,
                    256,
                    2000,
                    root().child(3),
                    false,
                )
                .unwrap(),
            );
        }
        Profiles { specs, sweeps }
    }

    fn get(&self, desc: &str) -> &metrics::SweepResult {
        let spec: CorrelatorSpec = desc.parse().unwrap();
        &self.sweeps[self
            .specs
            .iter()
            .position(|s| *s == spec.to_string())
            .unwrap()]
    }
}

fn crb_dominance(p: &Profiles) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut at = String::new();
    for s in &p.sweeps {
        for (i, r) in s.r_grid.iter().enumerate() {
            let margin = s.sigma[0][i] - (s.crb_sigma[0][i] - 2.0 * s.sigma_se[0][i]);
            if margin < worst {
                worst = margin;
                at = format!("{} at R={r:+.1}", s.spec);
            }
        }
    }
    let emp = p.get("empirical");
    let i0 = emp.r_grid.iter().position(|r| *r == 0.0).unwrap();
    let s0 = emp.sigma[0][i0];
    let rel = (s0 - 0.0625).abs() / 0.0625;
    check(
        worst >= 0.0 && rel <= 0.10,
        format!(
            "min sigma - (CRB - 2 SE) = {worst:+.5} ({at}), empirical sigma(0, 256) = {s0:.5} ({:.1}% from 0.0625, tol 10%)",
            rel * 100.0
        ),
    )
}

fn crossover(p: &Profiles) -> Outcome {
    let (emp, l1) = (p.get("empirical"), p.get("l1"));
    let at = |s: &metrics::SweepResult, r: f64| {
        s.sigma[0][s.r_grid.iter().position(|x| (x - r).abs() < 1e-12).unwrap()]
    };
    let high = [0.9, -0.9].iter().all(|&r| at(l1, r) < at(emp, r));
    let mid = at(emp, 0.0) < at(l1, 0.0);
    check(
        high && mid,
        format!(
            "sigma at R=+0.9: l1 {:.4} vs empirical {:.4}; R=-0.9: l1 {:.4} vs {:.4}; R=0: empirical {:.4} vs l1 {:.4}",
            at(l1, 0.9),
            at(emp, 0.9),
            at(l1, -0.9),
            at(emp, -0.9),
            at(emp, 0.0),
            at(l1, 0.0)
        ),
    )
}

fn snr_laws(models: &Models) -> Outcome {
    let grid = default_sweep_grid();
    let ns = default_n_values();
    let snr = |d: &str| {
        let (spec, model) = models.get(d);
        metrics::snr_sweep(
            spec,
            model,
            Family::Gaussian,
            &grid,
            &ns,
            500,
            root().child(4),
            false,
        )
        .unwrap()
        .snr_db
    };
    let (emp, l1, mp2) = (snr("empirical"), snr("l1"), snr("mp:gamma=2"));
    let steps = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let (se, sl) = (steps(&emp), steps(&l1));
    let slope_ok = se.iter().chain(&sl).all(|d| (d - 3.0).abs() <= 0.5);
    let l1_best = l1.iter().zip(&emp).all(|(a, b)| a >= b);
    let mp_failures: Vec<usize> = ns
        .iter()
        .zip(mp2.iter().zip(&emp))
        .filter(|(_, (m, e))| m > e)
        .map(|(n, _)| *n)
        .collect();
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    check(
        slope_ok && l1_best && mp_failures.is_empty(),
        format!(
            "dB per doubling (3 +/- 0.5): empirical [{}], l1 [{}]; l1 >= empirical at every N: {l1_best}; \
             mp:gamma=2 <= empirical at every N: {} (mp - empirical dB: [{}])",
            fmt(&se),
            fmt(&sl),
            if mp_failures.is_empty() { "yes".to_owned() } else { format!("no, violated at N = {mp_failures:?}") },
            fmt(&mp2.iter().zip(&emp).map(|(m, e)| m - e).collect::<Vec<_>>()),
        ),
    )
}

fn wht_exactness() -> Outcome {
    let mut rng = root().child(6).rng();
    let (mut inv, mut pars, mut dot) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..=16 {
        let n = 1usize << k;
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let (hx, hy) = (fwht(&x).unwrap(), fwht(&y).unwrap());
        let back = fwht(&hx).unwrap();
        inv = inv.max(
            back.iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let ny: f64 = y.iter().map(|v| v * v).sum();
        let nhx: f64 = hx.iter().map(|v| v * v).sum();
        pars = pars.max((nhx - nx).abs() / nx);
        let d: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let dh: f64 = hx.iter().zip(&hy).map(|(a, b)| a * b).sum();
        dot = dot.max((dh - d).abs() / (nx * ny).sqrt());
    }
    let small = fwht(&[1.0, 1.0, 1.0, 1.0]).unwrap();
    let small_ok = small == [2.0, 0.0, 0.0, 0.0];
    check(
        inv <= 1e-10 && pars <= 1e-10 && dot <= 1e-10 && small_ok,
        format!(
            "lengths 2^0..2^16: involution {inv:.1e}, Parseval {pars:.1e}, inner product {dot:.1e} (tol 1e-10); \
             fwht([1,1,1,1]) = {small:?}"
        ),
    )
}

fn distribution_agnostic(models: &Models) -> Outcome {
    let (r, n, trials) = (0.8, 1024, 500);
    let mut parts = Vec::new();
    let mut ok = true;
    for (fi, family) in [Family::Uniform, Family::Gamma].into_iter().enumerate() {
        for (spec, model) in models.defaults() {
            let base = root().child(5).child(fi as u64);
            let sum: f64 = (0..trials)
                .map(|t| {
                    let b =
                        corrkit::sampling::sample_nongaussian(n, r, family, base.child(t)).unwrap();
                    estimate_r(&b.xs, &b.ys, spec, model, true).unwrap()
                })
                .sum();
            let err = (sum / trials as f64 - r).abs();
            ok &= err <= 0.015;
            parts.push(format!("{family}/{spec} {err:.4}"));
        }
    }
    check(
        ok,
        format!("|mean(R_hat) - 0.8| (tol 0.015): {}", parts.join(", ")),
    )
}

fn variance_anchor() -> Outcome {
    let n = 1 << 21;
    let mut parts = Vec::new();
    let mut ok = true;
    for (fi, family) in [Family::Gaussian, Family::Uniform].into_iter().enumerate() {
        for (ri, r) in [0.0, 0.5, 0.8].into_iter().enumerate() {
            let b = corrkit::sampling::sample_nongaussian(
                n,
                r,
                family,
                root().child(7).child(fi as u64).child(ri as u64),
            )
            .unwrap();
            let v = product_variance(&b.xs, &b.ys).unwrap();
            let expect = match family {
                Family::Gaussian => 1.0 + r * r,
                _ => 1.0 - r * r / 5.0,
            };
            let rel = (v - expect).abs() / expect;
            ok &= rel <= 0.10;
            parts.push(format!("{family} R={r}: {v:.4} vs {expect:.4}"));
        }
    }
    check(
        ok,
        format!("{n} products each (tol 10%): {}", parts.join(", ")),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_corrkit");
    let run = |tag: &str, args: &[&str], stamp: bool| -> String {
        let out = dir.path().join(format!("{tag}.csv"));
        let mut cmd = Command::new(bin);
        cmd.args(["--seed", "77", "--out"]).arg(&out).args(args);
        if !stamp {
            cmd.arg("--no-timestamp");
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "corrkit {args:?} failed");
        std::fs::read_to_string(&out).unwrap()
    };
    let cases: [(&str, &[&str]); 3] = [
        (
            "sample",
            &["sample", "--n", "512", "--r", "0.6", "--family", "mixed"],
        ),
        ("gtable", &["gtable", "--alpha", "0,1.5", "--grid", "41"]),
        (
            "sweep",
            &[
                "sweep",
                "--spec",
                "l1",
                "--spec",
                "huber:delta=1.4",
                "--n",
                "64",
                "--trials",
                "40",
                "--grid",
                "7",
                "--cal-grid",
                "21",
                "--cal-n",
                "256",
                "--cal-trials",
                "20",
            ],
        ),
    ];
    let mut identical = Vec::new();
    for (tag, args) in cases {
        let a = run(&format!("{tag}-a"), args, false);
        let b = run(&format!("{tag}-b"), args, false);
        let c = run(&format!("{tag}-c"), args, true);
        let same = !body_of(&a).is_empty() && a == b && body_of(&a) == body_of(&c);
        identical.push((tag, same));
    }
    let ok = identical.iter().all(|(_, s)| *s);
    check(
        ok,
        format!("byte-identical bodies across runs: {identical:?}"),
    )
}

fn main() {
    let models = Models::build();
    let profiles = Profiles::build(&models);
    let criteria: Vec<Criterion> = vec![
        ("closed-form agreement", Box::new(closed_form_agreement)),
        ("quartic identity", Box::new(quartic_identity)),
        ("empirical-limit recovery", Box::new(empirical_limit)),
        (
            "calibration round-trip",
            Box::new(|| calibration_round_trip(&models)),
        ),
        ("CRB dominance", Box::new(|| crb_dominance(&profiles))),
        ("error-profile crossover", Box::new(|| crossover(&profiles))),
        ("SNR laws", Box::new(|| snr_laws(&models))),
        ("WHT exactness", Box::new(wht_exactness)),
        (
            "distribution-agnostic calibration",
            Box::new(|| distribution_agnostic(&models)),
        ),
        ("non-Gaussian variance anchor", Box::new(variance_anchor)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{tag}] {name}: {detail}", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
