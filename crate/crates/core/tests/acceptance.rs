//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use pdebs_core::actuation::{
    build_phi, condition_number, pseudoinverse, ActuatorBank, PhiMatrix, ShapeFunction,
};
use pdebs_core::control::LawKind;
use pdebs_core::experiments::{
    run_scenario, ActuatorSpec, Geometry, InitPreset, LawSpec, Scenario, ScenarioReport,
};
use pdebs_core::kernels::{kernel_1d, kernel_residual_1d, PlantParams};
use pdebs_core::modal::{
    angular_coeffs, angular_reconstruct, sine_coeffs, sine_reconstruct, AngularBasis,
};
use pdebs_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_budget(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.1}s < {limit_s}s"))
}

fn plant(epsilon: f64, lambda: f64, c: f64) -> PlantParams {
    PlantParams::new(epsilon, lambda, c).expect("valid plant")
}

fn rate(r: &ScenarioReport) -> f64 {
    r.rate.unwrap_or(f64::NAN)
}

/// Kernel residual converges at second order; diagonal and edge identities.
fn ac1() -> Outcome {
    let start = Instant::now();
    let p = plant(1.0, 7.0, 1.0);
    let coarse = kernel_residual_1d(&p, 2f64.powi(-8)).unwrap();
    let fine = kernel_residual_1d(&p, 2f64.powi(-9)).unwrap();
    let ratio = fine / coarse;
    let mut identity_err: f64 = 0.0;
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        identity_err = identity_err.max((kernel_1d(&p, x, x).unwrap() + 4.0 * x).abs());
        identity_err = identity_err.max(kernel_1d(&p, x, 0.0).unwrap().abs());
    }
    let (fast, time) = within_budget(start.elapsed(), 5.0);
    outcome(
        (0.2..=0.35).contains(&ratio) && identity_err <= 1e-12 && fast,
        format!("residual ratio {ratio:.4} in [0.2, 0.35]; identity error {identity_err:.1e} <= 1e-12; {time}"),
    )
}

fn square(lambda: f64, c: f64, n: usize) -> Scenario {
    Scenario::new(
        "square",
        plant(1.0, lambda, c),
        Geometry::Square {
            extent: 1.0,
            nx: n,
            ny: n,
        },
    )
}

/// Full-boundary square law.
fn ac2() -> Outcome {
    let start = Instant::now();
    let mut s = square(25.0, 2.0, 64);
    s.name = "ac2-square-full".into();
    s.compare_open_loop = true;
    let r = run_scenario(&s).unwrap();
    let growth = -r.open_loop.map_or(f64::NAN, |o| o.rate);
    let expected = 25.0 - 2.0 * PI * PI;
    let growth_ok = (growth - expected).abs() <= 0.1 * expected;
    let m = r.overshoot.unwrap_or(f64::NAN);
    let (fast, time) = within_budget(start.elapsed(), 60.0);
    outcome(
        growth_ok && rate(&r) >= 1.8 && m >= 1.0 && fast,
        format!(
            "open-loop growth {growth:.3} vs {expected:.3} (10%); closed-loop rate {:.3} >= 1.8; M = {m:.3}; {time}",
            rate(&r)
        ),
    )
}

/// Finite-dimensional square law with three piecewise actuators.
fn ac3() -> Outcome {
    let start = Instant::now();
    let mut s = square(25.0, 1.0, 64);
    s.name = "ac3-square-findim".into();
    s.law = LawSpec {
        kind: LawKind::SquareFindim,
        n: None,
        actuators: Some(ActuatorSpec::Piecewise { m: 3 }),
        enabled: true,
    };
    let bank = ActuatorBank::piecewise(3, 2).unwrap();
    let rank = bank.phi().rank();
    let r = run_scenario(&s).unwrap();
    let single = ActuatorBank::new(vec![ShapeFunction::PiecewiseConstant { m: 1, k: 1 }], 2);
    let rejected = matches!(single, Err(Error::Stabilizability(_)));
    let (fast, time) = within_budget(start.elapsed(), 90.0);
    outcome(
        r.budget.n == 2 && rank == 2 && rate(&r) >= 0.9 && rejected && fast,
        format!(
            "N = {} (N0 = {:.3}); rank(Φ) = {rank}; H1 rate {:.3} >= 0.9; single actuator rejected: {rejected}; {time}",
            r.budget.n,
            r.budget.n0,
            rate(&r)
        ),
    )
}

/// Strip ensemble: uncontrolled high wavenumbers and controlled low ones.
fn ac4() -> Outcome {
    let start = Instant::now();
    let mut s = Scenario::new(
        "ac4-strip",
        plant(1.0, 30.0, 2.0),
        Geometry::Strip {
            ny: 63,
            k_max: 4.0,
            dk: 0.25,
        },
    );
    s.init.preset = InitPreset::TwoModeMix;
    let r = run_scenario(&s).unwrap();
    let worst = |controlled: bool| {
        r.mode_fits
            .iter()
            .filter(|m| m.controlled == controlled)
            .map(|m| m.fit.map_or(f64::NAN, |f| f.rate))
            .fold(f64::INFINITY, f64::min)
    };
    let (free, ctrl) = (worst(false), worst(true));
    let split_ok = r
        .mode_fits
        .iter()
        .all(|m| m.controlled == (m.k.abs() < 1.0));
    let (fast, time) = within_budget(start.elapsed(), 60.0);
    outcome(
        r.budget.n == 1 && split_ok && free >= 1.8 && ctrl >= 1.8 && rate(&r) >= 1.8 && fast,
        format!(
            "N0 = {:.3}, N = {}; slowest |k|>=1 rate {free:.3}; slowest |k|<1 rate {ctrl:.3}; ensemble rate {:.3} (all >= 1.8); {time}",
            r.budget.n0,
            r.budget.n,
            rate(&r)
        ),
    )
}

/// Sector law on a quarter disc.
fn ac5() -> Outcome {
    let start = Instant::now();
    let mut s = Scenario::new(
        "ac5-sector",
        plant(1.0, 3.0, 1.0),
        Geometry::Sector {
            theta1: 0.0,
            theta2: PI / 2.0,
            radius: 1.0,
            nr: 64,
            ntheta: 48,
        },
    );
    s.compare_open_loop = true;
    s.record_every = 2;
    let r = run_scenario(&s).unwrap();
    let open = r.open_loop.map_or(f64::NAN, |o| o.rate);
    let (fast, time) = within_budget(start.elapsed(), 90.0);
    outcome(
        r.budget.n == 2 && rate(&r) >= 0.9 && open < rate(&r) && fast,
        format!(
            "threshold {:.3}, N = {}; closed-loop rate {:.3} >= 0.9; open-loop rate {open:.3} (slower); {time}",
            r.budget.n0,
            r.budget.n,
            rate(&r)
        ),
    )
}

/// Piano domain through the extended square.
fn ac6() -> Outcome {
    let start = Instant::now();
    let s = Scenario::new(
        "ac6-piano",
        plant(1.0, 25.0, 2.0),
        Geometry::Piano {
            extent: 1.0,
            cut: Some(pdebs_core::sim::Cut {
                start: [0.0, 0.5],
                end: [0.5, 1.0],
            }),
            n: 64,
        },
    );
    let r = run_scenario(&s).unwrap();
    let omega = r.restricted.map_or(f64::NAN, |f| f.rate);
    let gap = r.replay_discrepancy.unwrap_or(f64::NAN);
    let tol = r.replay_tolerance.unwrap_or(f64::NAN);
    let (fast, time) = within_budget(start.elapsed(), 120.0);
    outcome(
        rate(&r) >= 1.8 && omega >= 1.8 && gap <= tol && fast,
        format!(
            "extended rate {:.3}; Ω rate {omega:.3} (both >= 1.8); replay discrepancy {gap:.2e} <= {tol:.2e}; {time}",
            rate(&r)
        ),
    )
}

/// Pseudoinverse, sinusoidal banks and conditioning of piecewise banks.
fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 50 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(n..=12);
        let entries = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let phi = PhiMatrix::from_matrix(entries).unwrap();
        if !phi.is_full_row_rank() {
            continue;
        }
        let pinv = pseudoinverse(&phi).unwrap();
        let prod = phi.entries() * &pinv;
        worst = worst.max((prod - DMatrix::identity(n, n)).amax());
        tested += 1;
    }
    let mut identity_ok = true;
    for n in 1..=6 {
        for m in n..=8 {
            let shapes: Vec<_> = (1..=m).map(|k| ShapeFunction::Sinusoidal { k }).collect();
            let phi = build_phi(&shapes, n).unwrap();
            identity_ok &= *phi.entries() == DMatrix::identity(n, m);
        }
    }
    let conds: Vec<f64> = (2..=6)
        .map(|n| condition_number(ActuatorBank::piecewise(n, n).unwrap().phi()))
        .collect();
    let increasing = conds.windows(2).all(|w| w[1] > w[0]);
    outcome(
        worst <= 1e-10 && identity_ok && increasing,
        format!(
            "max |ΦΦ† − I| = {worst:.1e} over 50 matrices; sinusoidal Φ = [I 0]: {identity_ok}; cond(Φ) N=2..6: {}",
            conds.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn trapezoid_sq(samples: &[f64]) -> f64 {
    let h = 1.0 / (samples.len() - 1) as f64;
    let last = samples.len() - 1;
    samples
        .iter()
        .enumerate()
        .map(|(i, u)| {
            if i == 0 || i == last {
                0.5 * h * u * u
            } else {
                h * u * u
            }
        })
        .sum()
}

/// Sine and angular round trips; discrete Parseval at second order.
fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for points in [33usize, 65, 129] {
        let n_max = (points - 1) / 4;
        let a: Vec<f64> = (0..n_max).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..points)
            .map(|i| i as f64 / (points - 1) as f64)
            .collect();
        let samples: Vec<f64> = ys.iter().map(|&y| sine_reconstruct(&a, y)).collect();
        let c = sine_coeffs(&samples, n_max).unwrap();
        for (&y, u) in ys.iter().zip(&samples) {
            worst = worst.max((sine_reconstruct(&c, y) - u).abs());
        }
        let basis = AngularBasis::new(0.3, 1.9, n_max).unwrap();
        let thetas: Vec<f64> = (0..points)
            .map(|i| 0.3 + 1.6 * i as f64 / (points - 1) as f64)
            .collect();
        let samples: Vec<f64> = thetas
            .iter()
            .map(|&t| angular_reconstruct(&a, &basis, t))
            .collect();
        let c = angular_coeffs(&samples, &basis).unwrap();
        for (&t, u) in thetas.iter().zip(&samples) {
            worst = worst.max((angular_reconstruct(&c, &basis, t) - u).abs());
        }
    }
    // Parseval for a smooth non-band-limited profile: ∫u² = ½Σc_n² + O(h²)
    let f = |y: f64| y * (1.0 - y) * y.exp();
    let mut gaps = Vec::new();
    for points in [65usize, 129, 257] {
        let samples: Vec<f64> = (0..points)
            .map(|i| f(i as f64 / (points - 1) as f64))
            .collect();
        let c = sine_coeffs(&samples, (points - 1) / 2 - 1).unwrap();
        let gap = (trapezoid_sq(&samples) - 0.5 * c.iter().map(|x| x * x).sum::<f64>()).abs();
        let h = 1.0 / (points - 1) as f64;
        gaps.push((gap, h));
    }
    let parseval_ok = gaps.iter().all(|(g, h)| *g <= h * h);
    outcome(
        worst <= 1e-10 && parseval_ok,
        format!(
            "round-trip error {worst:.1e} <= 1e-10; Parseval gaps {} (each <= h²)",
            gaps.iter()
                .map(|(g, _)| format!("{g:.1e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

/// Fixed seed, identical CSV bytes.
fn ac9() -> Outcome {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut s = square(10.0, 2.0, 24);
        s.name = "ac9-determinism".into();
        s.init.preset = InitPreset::RandomBandLimited;
        s.init.seed = 42;
        s.output_dir = Some(dir.path().to_path_buf());
        let r = run_scenario(&s).unwrap();
        let files: Vec<(String, Vec<u8>)> = r
            .files
            .iter()
            .filter(|f| f.ends_with(".csv"))
            .map(|f| (f.clone(), std::fs::read(dir.path().join(f)).unwrap()))
            .collect();
        files
    };
    let (a, b) = (run(), run());
    let same = !a.is_empty() && a == b;
    outcome(
        same,
        format!(
            "{} CSV files bit-identical across two runs: {same}",
            a.len()
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("AC-1", "kernel correctness", ac1),
        ("AC-2", "square, full-boundary law", ac2),
        ("AC-3", "square, finite-dimensional law", ac3),
        ("AC-4", "strip ensemble", ac4),
        ("AC-5", "sector", ac5),
        ("AC-6", "piano extension", ac6),
        ("AC-7", "actuation algebra", ac7),
        ("AC-8", "transform fidelity", ac8),
        ("AC-9", "determinism", ac9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with("AC-"))
        .collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("{id} {verdict} {name}: {}", result.detail);
        failed += usize::from(!result.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
