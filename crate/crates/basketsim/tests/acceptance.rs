//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.
//!
//! The full run takes several minutes on one core (10,000 closed-form
//! replicates per scenario and 24,000 MCMC chains).

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use basket_core::beta::BetaShape;
use basket_core::bma;
use basket_core::design::{Design, DesignParams};
use basket_core::fujikawa::{self, jsd, FujikawaParams};
use basket_core::powerprior::{self, build_weights, hellinger_gamma, power_prior_posterior, CppParams, Variant};
use basket_core::quad::integrate;
use basket_core::tuning::{fwer_from_sorted, inactive_maxima, lambda_at, ScenarioBank};
use basket_core::{catalog, Basket, BasketData, OperatingCharacteristics, Pattern, SizeFamily, WeightMatrix};
use basketsim::{LoadedConfig, Runner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240101;
const CLOSED_FORM: [Design; 5] = [Design::Cpp, Design::App, Design::Lcpp, Design::Fujikawa, Design::Bma];

/// Grouped ECD per pattern, in `Pattern::ALL` order.
const ECD_GROUPED: [(Design, [f64; 6]); 5] = [
    (Design::Cpp, [4.919, 4.609, 3.717, 3.097, 4.347, 4.269]),
    (Design::App, [4.927, 4.547, 4.031, 3.021, 4.519, 4.114]),
    (Design::Lcpp, [4.925, 4.593, 4.147, 2.997, 4.435, 4.251]),
    (Design::Fujikawa, [4.900, 4.673, 3.568, 3.159, 4.242, 4.105]),
    (Design::Bma, [4.913, 4.527, 3.827, 2.890, 4.547, 4.113]),
];

const ECD_MEAN_GROUPED: [(Design, f64); 5] = [
    (Design::Cpp, 4.160),
    (Design::App, 4.193),
    (Design::Lcpp, 4.225),
    (Design::Fujikawa, 4.108),
    (Design::Bma, 4.136),
];

/// Grouped basket-wise rejection rates, per pattern in `Pattern::ALL` order.
const REJECTION_GROUPED: [(Design, [[f64; 5]; 6]); 5] = [
    (
        Design::Cpp,
        [
            [0.020, 0.019, 0.014, 0.014, 0.013],
            [0.886, 0.893, 0.942, 0.942, 0.946],
            [0.319, 0.322, 0.621, 0.863, 0.874],
            [0.495, 0.494, 0.274, 0.084, 0.082],
            [0.137, 0.133, 0.086, 0.081, 0.784],
            [0.386, 0.046, 0.024, 0.024, 0.024],
        ],
    ),
    (
        Design::App,
        [
            [0.008, 0.009, 0.020, 0.018, 0.018],
            [0.832, 0.839, 0.955, 0.954, 0.967],
            [0.160, 0.164, 0.609, 0.859, 0.887],
            [0.443, 0.448, 0.389, 0.129, 0.129],
            [0.060, 0.057, 0.083, 0.081, 0.800],
            [0.276, 0.042, 0.041, 0.042, 0.039],
        ],
    ),
    (
        Design::Lcpp,
        [
            [0.015, 0.013, 0.015, 0.015, 0.016],
            [0.838, 0.843, 0.969, 0.968, 0.975],
            [0.165, 0.167, 0.699, 0.876, 0.904],
            [0.472, 0.475, 0.305, 0.131, 0.123],
            [0.061, 0.057, 0.104, 0.099, 0.756],
            [0.389, 0.047, 0.029, 0.030, 0.031],
        ],
    ),
    (
        Design::Fujikawa,
        [
            [0.018, 0.019, 0.022, 0.022, 0.020],
            [0.915, 0.918, 0.945, 0.946, 0.950],
            [0.406, 0.405, 0.621, 0.876, 0.882],
            [0.514, 0.514, 0.352, 0.114, 0.106],
            [0.185, 0.183, 0.096, 0.091, 0.797],
            [0.269, 0.056, 0.037, 0.037, 0.034],
        ],
    ),
    (
        Design::Bma,
        [
            [0.012, 0.012, 0.021, 0.020, 0.021],
            [0.855, 0.859, 0.932, 0.933, 0.948],
            [0.218, 0.217, 0.533, 0.848, 0.881],
            [0.388, 0.395, 0.334, 0.111, 0.116],
            [0.059, 0.055, 0.068, 0.064, 0.793],
            [0.261, 0.032, 0.037, 0.038, 0.041],
        ],
    ),
];

struct Report {
    lines: Vec<(u32, bool, String)>,
}

impl Report {
    fn record(&mut self, id: u32, pass: bool, detail: String, started: Instant) {
        let line = format!(
            "[{}] criterion {id}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
        println!("{line}");
        self.lines.push((id, pass, line));
    }
}

fn bell_brute_force(k: usize) -> usize {
    (0..k.pow(k as u32))
        .filter(|code| {
            let labels: Vec<usize> = (0..k).map(|i| (code / k.pow(i as u32)) % k).collect();
            let mut next = 0;
            labels.iter().all(|&l| {
                if l > next {
                    return false;
                }
                if l == next {
                    next += 1;
                }
                true
            })
        })
        .count()
}

fn partitions(report: &mut Report) {
    let t = Instant::now();
    let k3 = bma::enumerate_partitions(3).unwrap().len();
    let mismatches: Vec<String> = (2..=6)
        .filter_map(|k| {
            let (got, want) = (bma::enumerate_partitions(k).unwrap().len(), bell_brute_force(k));
            (got != want).then(|| format!("K={k}: {got} vs {want}"))
        })
        .collect();
    let pass = k3 == 5 && mismatches.is_empty() && t.elapsed().as_secs_f64() < 1.0;
    report.record(1, pass, format!("K=3 gives {k3} models; Bell mismatches {mismatches:?}"), t);
}

fn hellinger_quadrature(d_k: Basket, d_i: Basket) -> f64 {
    let f = powerprior::downweighted_shape(d_k, d_i.size);
    let g = powerprior::downweighted_shape(d_i, d_k.size);
    let d2 = integrate(
        |x| {
            let diff = f.pdf(x).sqrt() - g.pdf(x).sqrt();
            0.5 * diff * diff
        },
        0.0,
        1.0,
        1e-13,
    )
    .unwrap();
    d2.clamp(0.0, 1.0).sqrt()
}

fn hellinger(report: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (n_k, n_i) = (rng.random_range(5..=100u32), rng.random_range(5..=100u32));
        let d_k = Basket::new(rng.random_range(0..=n_k), n_k).unwrap();
        let d_i = Basket::new(rng.random_range(0..=n_i), n_i).unwrap();
        worst = worst.max((hellinger_gamma(d_k, d_i) - hellinger_quadrature(d_k, d_i)).abs());
    }
    let pass = worst < 1e-8 && t.elapsed().as_secs_f64() < 30.0;
    report.record(2, pass, format!("max |closed form - quadrature| = {worst:.2e} over 1000 pairs"), t);
}

fn jsd_properties(report: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5a5a);
    let mut shape = || BetaShape::new(rng.random_range(0.5..200.0), rng.random_range(0.5..200.0)).unwrap();
    let (mut asym, mut out_of_range, mut self_max) = (0.0f64, 0usize, 0.0f64);
    for _ in 0..500 {
        let (f, g) = (shape(), shape());
        let (fg, gf) = (jsd(f, g).unwrap(), jsd(g, f).unwrap());
        asym = asym.max((fg - gf).abs());
        out_of_range += !(0.0..=1.0).contains(&fg) as usize;
        self_max = self_max.max(jsd(f, f).unwrap().abs());
    }
    let pass = asym < 1e-6 && out_of_range == 0 && self_max < 1e-6 && t.elapsed().as_secs_f64() < 60.0;
    report.record(
        3,
        pass,
        format!("max asymmetry {asym:.1e}, {out_of_range} outside [0,1], max JSD(f,f) {self_max:.1e} over 500 pairs"),
        t,
    );
}

fn degenerate_weights(report: &mut Report) {
    let t = Instant::now();
    let d = BasketData::from_counts(&[1, 4, 9, 0, 12], &[10, 10, 25, 25, 30]).unwrap();
    let priors: Vec<BetaShape> = (0..5).map(|k| BetaShape::new(1.0 + 0.5 * k as f64, 1.0).unwrap()).collect();
    let stratified: Vec<BetaShape> = d
        .iter()
        .zip(&priors)
        .map(|(b, s)| BetaShape { alpha: s.alpha + b.responses as f64, beta: s.beta + b.failures() as f64 })
        .collect();
    let (r_sum, f_sum) = d.iter().fold((0.0, 0.0), |(r, f), b| (r + b.responses as f64, f + b.failures() as f64));
    let pooled: Vec<BetaShape> = priors.iter().map(|s| BetaShape { alpha: s.alpha + r_sum, beta: s.beta + f_sum }).collect();
    let (s1, s2) = priors.iter().fold((0.0, 0.0), |(a, b), s| (a + s.alpha, b + s.beta));
    let fujikawa_pooled = vec![BetaShape { alpha: s1 + r_sum, beta: s2 + f_sum }; 5];

    let mut failures = Vec::new();
    let cpp = Some(CppParams::new(4.0, 4.5).unwrap());
    for (variant, params) in [(Variant::Cpp, cpp), (Variant::App, None), (Variant::Lcpp, cpp)] {
        let built = build_weights(&d, variant, params).unwrap().matrix;
        let zeroed = WeightMatrix::from_rows(5, (0..25).map(|j| if j / 5 == j % 5 { built.get(j / 5, j % 5) } else { 0.0 }).collect()).unwrap();
        if power_prior_posterior(&d, &zeroed, &priors).unwrap() != stratified {
            failures.push(format!("{variant:?} stratified"));
        }
    }
    if power_prior_posterior(&d, &WeightMatrix::ones(5), &priors).unwrap() != pooled {
        failures.push("power prior pooling".into());
    }
    let individual = fujikawa::individual_posteriors(&d, &priors).unwrap();
    let no_borrowing = fujikawa::fujikawa_weights(&individual, FujikawaParams::new(1.5, 1.0).unwrap()).unwrap();
    if fujikawa::fujikawa_posterior(&d, &priors, &no_borrowing).unwrap() != stratified {
        failures.push("Fujikawa stratified".into());
    }
    if fujikawa::fujikawa_posterior(&d, &priors, &WeightMatrix::ones(5)).unwrap() != fujikawa_pooled {
        failures.push("Fujikawa pooling".into());
    }
    let pass = failures.is_empty() && t.elapsed().as_secs_f64() < 1.0;
    report.record(4, pass, format!("bit-exact reductions, mismatches {failures:?}"), t);
}

fn grouped(pattern: Pattern) -> basket_core::Scenario {
    catalog::scenario(pattern, SizeFamily::Grouped)
}

fn runner(reps: u32) -> Runner {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    Runner::new(LoadedConfig::builtin(), SEED, reps, 10_000, jobs).unwrap()
}

fn closed_form_tables(report: &mut Report) {
    let t = Instant::now();
    let runner = runner(10_000);
    let mut results: Vec<(Design, Vec<OperatingCharacteristics>)> = Vec::new();
    for design in CLOSED_FORM {
        let ocs = Pattern::ALL.iter().map(|&p| runner.simulate_one(design, &grouped(p)).unwrap().1).collect();
        results.push((design, ocs));
    }
    let of = |design: Design| &results.iter().find(|(d, _)| *d == design).unwrap().1;

    let mut ecd_misses = Vec::new();
    let mut cells = 0;
    for (design, expected) in ECD_GROUPED {
        for (j, &want) in expected.iter().enumerate() {
            let got = of(design)[j].ecd_mean;
            cells += 1;
            if (got - want).abs() > 0.05 {
                ecd_misses.push(format!("{design} {}: {got:.3} vs {want:.3}", Pattern::ALL[j].name()));
            }
        }
    }
    for (design, want) in ECD_MEAN_GROUPED {
        let got = of(design).iter().map(|oc| oc.ecd_mean).sum::<f64>() / 6.0;
        cells += 1;
        if (got - want).abs() > 0.05 {
            ecd_misses.push(format!("{design} mean: {got:.3} vs {want:.3}"));
        }
    }
    report.record(5, ecd_misses.is_empty(), format!("{} of {cells} ECD cells within 0.05; misses {ecd_misses:?}", cells - ecd_misses.len()), t);

    let t6 = Instant::now();
    let mut rr_misses = Vec::new();
    let mut cells = 0;
    for (design, expected) in REJECTION_GROUPED {
        for (j, row) in expected.iter().enumerate() {
            for (k, &want) in row.iter().enumerate() {
                let got = of(design)[j].rejection_rate[k];
                cells += 1;
                if (got - want).abs() > 0.02 {
                    rr_misses.push(format!("{design} {} basket {}: {got:.3} vs {want:.3}", Pattern::ALL[j].name(), k + 1));
                }
            }
        }
    }
    let alt = Pattern::ALL.iter().position(|&p| p == Pattern::Alternative).unwrap();
    let alt_fwer: Vec<f64> = CLOSED_FORM.iter().map(|&d| of(d)[alt].fwer).collect();
    let pass = rr_misses.is_empty() && alt_fwer.iter().all(|&f| f == 0.0);
    report.record(
        6,
        pass,
        format!("{} of {cells} rejection cells within 0.02; Alternative FWER {alt_fwer:?}; misses {rr_misses:?}", cells - rr_misses.len()),
        t6,
    );

    let t8 = Instant::now();
    let null = Pattern::ALL.iter().position(|&p| p == Pattern::Null).unwrap();
    let cpp = of(Design::Cpp)[null].bias[0];
    let fuj = of(Design::Fujikawa)[null].bias[0];
    let pass = (cpp - 0.011).abs() <= 0.005 && (fuj - 0.038).abs() <= 0.005;
    report.record(8, pass, format!("Null basket 1 bias CPP {cpp:.4} (0.011), Fujikawa {fuj:.4} (0.038)"), t8);
}

/// FWER(lambda) <= 0.05 < FWER(lambda - 0.001) on the calibration bank.
fn minimal(runner: &Runner, design: Design) -> (bool, f64) {
    let null = grouped(Pattern::Null);
    let config = runner.design_config(DesignParams::tuned(design, SizeFamily::Grouped, 5), 5);
    let lambda = runner.calibrate_config(&config, &null).unwrap().lambda;
    let outputs = runner.outputs(&config, &null).unwrap();
    let mut maxima = inactive_maxima(&outputs, &null.active(runner.p0())).unwrap();
    maxima.sort_by(f64::total_cmp);
    let step = (lambda * 1000.0).round() as u32;
    let strict = design.strict_inequality();
    let ok = lambda_at(step) == lambda
        && fwer_from_sorted(&maxima, lambda, strict) <= 0.05
        && (step == 1 || fwer_from_sorted(&maxima, lambda_at(step - 1), strict) > 0.05);
    (ok, lambda)
}

fn mcmc_and_tuning(report: &mut Report) {
    let t = Instant::now();
    let runner = runner(2_000);
    let mut lines = Vec::new();
    let mut pass = true;
    for (design, fwer_target, ecd_target) in [(Design::Bhm, 0.052, 4.146), (Design::Exnex, 0.049, 4.145)] {
        let ocs: Vec<OperatingCharacteristics> = Pattern::ALL.iter().map(|&p| runner.simulate_one(design, &grouped(p)).unwrap().1).collect();
        let fwer = ocs[0].fwer;
        let ecd = ocs.iter().map(|oc| oc.ecd_mean).sum::<f64>() / 6.0;
        pass &= (fwer - fwer_target).abs() <= 0.015 && (ecd - ecd_target).abs() <= 0.10;
        lines.push(format!("{design} Null FWER {fwer:.3} ({fwer_target}), mean ECD {ecd:.3} ({ecd_target})"));
    }
    lines.push(format!("{} chains warned", runner.mcmc_warnings()));
    report.record(7, pass, lines.join("; "), t);

    let t9 = Instant::now();
    let mut failures = Vec::new();
    let mut lambdas = Vec::new();
    for design in Design::ALL {
        let (ok, lambda) = minimal(&runner, design);
        lambdas.push(format!("{design} {lambda:.3}"));
        if !ok {
            failures.push(design.name());
        }
    }
    let banks: Vec<ScenarioBank> = Pattern::ALL
        .iter()
        .map(|&p| {
            let s = catalog::scenario(p, SizeFamily::Linear);
            ScenarioBank { replicates: runner.bank(&s).as_ref().clone(), scenario: s }
        })
        .collect();
    let result = runner.grid_search(Design::Fujikawa, 5, &banks).unwrap();
    let best = result.best().and_then(|r| r.mean_ecd).unwrap_or(f64::NAN);
    let reference = result
        .records
        .iter()
        .find(|r| matches!(r.params, DesignParams::Fujikawa(p) if (p.epsilon - 1.5).abs() < 1e-9 && (p.tau - 0.2).abs() < 1e-9))
        .and_then(|r| r.mean_ecd)
        .unwrap_or(f64::NAN);
    let pass = failures.is_empty() && (best - reference).abs() <= 0.02;
    report.record(
        9,
        pass,
        format!(
            "lambda minimal for all designs except {failures:?} [{}]; Fujikawa linear-family grid best mean ECD {best:.4} vs (1.5, 0.2) {reference:.4}",
            lambdas.join(", ")
        ),
        t9,
    );
}

fn run_cli(dir: &Path, args: &[&str]) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_basketsim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("BASKETSIM_JOBS")
        .status()
        .unwrap();
    assert!(status.success(), "basketsim {args:?} failed");
    let name = format!("{}.csv", args[0]);
    std::fs::read(dir.join(name)).unwrap()
}

fn determinism(report: &mut Report) {
    let t = Instant::now();
    let commands: [&[&str]; 3] = [
        &["simulate", "--design", "cpp,fujikawa,bhm,exnex", "--scenario", "grouped", "--reps", "40", "--mcmc-samples", "900"],
        &["calibrate", "--design", "all", "--scenario", "linear", "--reps", "40", "--mcmc-samples", "900"],
        &["tune", "--design", "bma,exnex", "--scenario", "high-variance", "--reps", "12", "--mcmc-samples", "300"],
    ];
    let mut differing = Vec::new();
    for args in commands {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let jobs_one = [args, &["--jobs", "1"]].concat();
        if run_cli(a.path(), args) != run_cli(b.path(), &jobs_one) {
            differing.push(args[0]);
        }
    }
    report.record(10, differing.is_empty(), format!("reruns byte-identical, differing commands {differing:?}"), t);
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    partitions(&mut report);
    hellinger(&mut report);
    jsd_properties(&mut report);
    degenerate_weights(&mut report);
    closed_form_tables(&mut report);
    mcmc_and_tuning(&mut report);
    determinism(&mut report);
    report.lines.sort_by_key(|(id, _, _)| *id);
    println!("\nsummary:");
    for (_, _, line) in &report.lines {
        println!("{line}");
    }
    let failed: Vec<&String> = report.lines.iter().filter(|(_, ok, _)| !ok).map(|(_, _, l)| l).collect();
    assert!(failed.is_empty(), "{} criteria failed", failed.len());
}
