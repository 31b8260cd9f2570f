//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails. Tolerances are pinned in the constants below.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ivddpc::bench::{
    collect_dataset, derive_seed, last_window, monte_carlo, restriction, run_campaign,
    CampaignOptions, ExperimentConfig, NoiseLevel, RunRecord,
};
use ivddpc::control::{predictor_step, rddpc_step, RegNorm};
use ivddpc::hankel::{build_bundle, data_equation_residual};
use ivddpc::iv::{build_iv, iv_noise_correlation, lcf, markov_parameters, IvVariant};
use ivddpc::linalg::{rel_diff, spectral_radius};
use ivddpc::qp::{self, SolverSettings};
use ivddpc::sslib::benchmarks::{mimo_controller, siso_controller};
use ivddpc::sslib::{gaussian_noise, simulate_closed_loop, ControllerModel, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::*;

const DATA_EQ_TOL: f64 = 1e-6;
const MARKOV_TOL: f64 = 1e-8;
const MARKOV_COUNT: usize = 50;
const SPC_TOL: f64 = 1e-8;
const COMBINED_SLOPE: (f64, f64) = (-0.7, -0.3);
const OPEN_LOOP_SLOPE_MIN: f64 = -0.15;
const LIMIT_LAMBDA: f64 = 1e8;
const LIMIT_TOL: f64 = 1e-4;
const WIN_RATE_MIN: f64 = 0.6;
const RESTRICTION_RATIO_MAX: f64 = 0.5;
const QP_TOL: f64 = 1e-6;
const CAMPAIGN_SNR_DB: f64 = 25.0;
const SEEDS: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Least-squares slope of `ln y` on `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

fn criterion_1() -> Outcome {
    let cfg = load_config("siso_benchmark.json", &[]);
    let plant = cfg.plant_with_gain(0.0).unwrap();
    let ctrl = cfg.controller().unwrap();
    let r = cfg.collection.reference_signal(derive_seed(cfg.base_seed, 0, "reference")).unwrap();
    let e = DMatrix::zeros(1, r.ncols());
    let traj = simulate_closed_loop(&plant, &ctrl, &r, &e, &DVector::zeros(2), &DVector::zeros(ctrl.n())).unwrap();
    let bundle = build_bundle(&traj, 30, 30).unwrap();
    let resid = data_equation_residual(&plant, &bundle).unwrap();
    let rho = spectral_radius(&plant.a_k());
    outcome(
        resid <= DATA_EQ_TOL,
        format!("residual {resid:.3e} <= {DATA_EQ_TOL:e}; rho(A_K) {rho:.4}, rho^L_p {:.2e}", rho.powi(30)),
    )
}

fn markov_error(ctrl: &ControllerModel) -> (f64, f64) {
    let f = lcf(ctrl).unwrap();
    let rec = f.reconstruct().unwrap();
    let want = markov_parameters(ctrl.a(), ctrl.b(), ctrl.c(), ctrl.d(), MARKOV_COUNT);
    let got = markov_parameters(rec.a(), rec.b(), rec.c(), rec.d(), MARKOV_COUNT);
    let err = want.iter().zip(&got).map(|(w, g)| (w - g).amax()).fold(0.0, f64::max);
    (err, spectral_radius(f.v.a()))
}

fn criterion_2() -> Outcome {
    let (e1, r1) = markov_error(&siso_controller());
    let (e2, r2) = markov_error(&mimo_controller());
    let pass = e1 <= MARKOV_TOL && e2 <= MARKOV_TOL && r1 < 1.0 && r2 < 1.0;
    outcome(
        pass,
        format!("siso err {e1:.2e} rho {r1:.4}; mimo err {e2:.2e} rho {r2:.4}; tol {MARKOV_TOL:e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = rng(1000 + seed);
        let n = rng.random_range(400..900);
        let l = rng.random_range(4..9);
        let bundle = siso_bundle(n, l, l, rng.random_range(0.02..0.3), 3000 + seed);
        let mut iv = build_iv(&bundle, IvVariant::OpenLoop, None).unwrap();
        let omega = iv.attach_predictor(&bundle).unwrap().clone();
        let direct = normal_equation_predictor(&bundle);
        worst = worst.max(rel_diff(&omega, &direct));
    }
    outcome(worst <= SPC_TOL, format!("max relative difference {worst:.2e} <= {SPC_TOL:e}"))
}

fn criterion_4() -> Outcome {
    // the benchmark's offline experiment; shorter records are prefixes of
    // the full one, so σ stays fixed across N̄
    let sizes = [500usize, 1000, 2000, 4000];
    let cfg = campaign_config();
    let (lp, lf) = (cfg.task.lp, cfg.task.lf);
    let level = NoiseLevel::Snr { snr_db: CAMPAIGN_SNR_DB };
    let factors = lcf(&cfg.controller().unwrap()).unwrap();
    let mut combined = vec![0.0; sizes.len()];
    let mut open = vec![0.0; sizes.len()];
    let mut sigma = 0.0;
    for rep in 0..20 {
        let ds = collect_dataset(&cfg, &level, rep).unwrap();
        sigma = ds.noise.sigma;
        for (k, &nbar) in sizes.iter().enumerate() {
            let n = nbar + lp + lf - 1;
            let t = &ds.trajectory;
            let prefix = Trajectory {
                u: t.u.columns(0, n).into_owned(),
                y: t.y.columns(0, n).into_owned(),
                r: t.r.as_ref().map(|m| m.columns(0, n).into_owned()),
                e: t.e.as_ref().map(|m| m.columns(0, n).into_owned()),
            };
            let bundle = build_bundle(&prefix, lp, lf).unwrap();
            let e_f = bundle.e_f.as_ref().unwrap();
            let ivc = build_iv(&bundle, IvVariant::Combined, Some(&factors)).unwrap();
            let ivo = build_iv(&bundle, IvVariant::OpenLoop, None).unwrap();
            combined[k] += iv_noise_correlation(e_f, &ivc.phi).unwrap() / 20.0;
            open[k] += iv_noise_correlation(e_f, &ivo.phi).unwrap() / 20.0;
        }
    }
    let x: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let sc = loglog_slope(&x, &combined);
    let so = loglog_slope(&x, &open);
    let pass = sc >= COMBINED_SLOPE.0 && sc <= COMBINED_SLOPE.1 && so > OPEN_LOOP_SLOPE_MIN;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
    outcome(
        pass,
        format!(
            "sigma {sigma:.4}; combined [{}] slope {sc:.3} in [{}, {}]; open-loop [{}] slope {so:.3} > {OPEN_LOOP_SLOPE_MIN}",
            fmt(&combined),
            COMBINED_SLOPE.0,
            COMBINED_SLOPE.1,
            fmt(&open)
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    let ctrl = siso_controller();
    let factors = lcf(&ctrl).unwrap();
    for seed in 0..20u64 {
        let mut rng = rng(7000 + seed);
        let l = rng.random_range(6..9);
        let n = rng.random_range(250..400);
        let traj = siso_closed_loop(n, rng.random_range(0.05..0.3), 8000 + seed);
        let bundle = build_bundle(&traj, l, l).unwrap();
        let task = siso_task(l, l);
        let mut iv = build_iv(&bundle, IvVariant::Combined, Some(&factors)).unwrap();
        iv.attach_predictor(&bundle).unwrap();
        let z_p = last_window(&traj.u, &traj.y, l).unwrap();
        let y_r = DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0));
        let a = predictor_step(&iv, &z_p, &y_r, &task).unwrap();
        let b = rddpc_step(&bundle, &iv, &task, &z_p, &y_r, LIMIT_LAMBDA, RegNorm::SquaredTwo).unwrap();
        let rel = (&a.u_f - &b.u_f).norm() / a.u_f.norm().max(1e-12);
        worst = worst.max(rel);
    }
    outcome(worst <= LIMIT_TOL, format!("max relative u_f difference {worst:.2e} <= {LIMIT_TOL:e}"))
}

fn campaign_config() -> ExperimentConfig {
    load_config(
        "siso_benchmark.json",
        &[
            ("noise", &format!("[{{\"snr_db\": {CAMPAIGN_SNR_DB}}}]")),
            ("replicates", &SEEDS.to_string()),
        ],
    )
}

/// J per replicate for each variant label (`rddpc_iv@λ` for the sweep).
fn costs_by_variant(records: &[RunRecord]) -> BTreeMap<String, BTreeMap<usize, f64>> {
    let mut out: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in records {
        let label = match r.lambda {
            Some(l) => format!("rddpc_iv@{l:e}"),
            None => r.variant.clone(),
        };
        if let Some(j) = r.j {
            out.entry(label).or_default().insert(r.replicate, j);
        }
    }
    out
}

fn criterion_6(records: &[RunRecord]) -> Outcome {
    let costs = costs_by_variant(records);
    let failed = records.iter().filter(|r| r.failed()).count();
    let med = |k: &str| costs.get(k).map(|m| median(m.values().copied().collect())).unwrap_or(f64::NAN);
    let (best_label, rddpc) = costs
        .keys()
        .filter(|k| k.starts_with("rddpc_iv@"))
        .map(|k| (k.clone(), med(k)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or_default();
    let (oracle, iv, iv1, iv2, spc) = (med("oracle"), med("ddpc_iv"), med("ddpc_iv1"), med("ddpc_iv2"), med("spc"));
    let ordering = oracle <= rddpc && rddpc <= iv && iv <= iv1.min(iv2).min(spc);
    let (wins, paired) = match (costs.get("ddpc_iv"), costs.get("spc")) {
        (Some(a), Some(b)) => {
            let pairs: Vec<(f64, f64)> = a.iter().filter_map(|(k, ja)| b.get(k).map(|jb| (*ja, *jb))).collect();
            (pairs.iter().filter(|(ja, jb)| ja < jb).count(), pairs.len())
        }
        _ => (0, 0),
    };
    let rate = wins as f64 / paired.max(1) as f64;
    outcome(
        ordering && rate >= WIN_RATE_MIN && failed == 0,
        format!(
            "median J oracle {oracle:.5}, {best_label} {rddpc:.5}, ddpc_iv {iv:.5}, ddpc_iv1 {iv1:.5}, \
             ddpc_iv2 {iv2:.5}, spc {spc:.5}; ddpc_iv beats spc in {wins}/{paired} ({:.0}% >= {:.0}%); \
             failed runs {failed}",
            rate * 100.0,
            WIN_RATE_MIN * 100.0
        ),
    )
}

fn criterion_7(records: &[RunRecord]) -> Outcome {
    let mut by_lambda: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let (Some(l), Some(j)) = (r.lambda, r.j) {
            if (10.0 - 1e-9..=1e5 + 1e-3).contains(&l) {
                by_lambda.entry(l.to_bits()).or_insert((l, Vec::new())).1.push(j);
            }
        }
    }
    // descending λ
    let mut grid: Vec<(f64, Vec<f64>)> = by_lambda.into_values().collect();
    grid.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut violations = Vec::new();
    let mut trail = Vec::new();
    for w in grid.windows(2) {
        let (l0, j0) = (&w[0].0, &w[0].1);
        let (l1, j1) = (&w[1].0, &w[1].1);
        let se = ((sample_var(j0) + sample_var(j1)) / 2.0 / j0.len().min(j1.len()) as f64).sqrt();
        let (m0, m1) = (mean(j0), mean(j1));
        if m1 > m0 + se {
            violations.push(format!("λ {l0:.3e} -> {l1:.3e}: {m0:.5} -> {m1:.5} (se {se:.5})"));
        }
    }
    for (l, j) in &grid {
        trail.push(format!("{l:.0e}:{:.4}", mean(j)));
    }
    let pass = grid.len() >= 2 && violations.is_empty();
    outcome(
        pass,
        format!(
            "mean J by λ [{}]; {} violation(s){}{}",
            trail.join(" "),
            violations.len(),
            if violations.is_empty() { "" } else { ": " },
            violations.join("; ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = load_config(
        "siso_benchmark.json",
        &[
            ("collection.reference", r#"[{"kind": "white_noise", "std": 1.0}]"#),
            ("noise", &format!("[{{\"snr_db\": {CAMPAIGN_SNR_DB}}}]")),
        ],
    );
    let ctrl = cfg.controller().unwrap();
    let y_r = cfg.task.reference_window(&cfg.task.reference_signal().unwrap(), 1).unwrap();
    let level = NoiseLevel::Snr { snr_db: CAMPAIGN_SNR_DB };
    let (mut past, mut comb) = (Vec::new(), Vec::new());
    let mut errors = 0;
    for rep in 0..SEEDS {
        let ds = collect_dataset(&cfg, &level, rep).unwrap();
        // fresh past window: regulation at r = 0 under new noise
        let warm = 4 * cfg.task.lp;
        let e = gaussian_noise(derive_seed(cfg.base_seed, rep, "online"), &[ds.noise.sigma], warm).unwrap();
        let traj = simulate_closed_loop(
            &ds.plant,
            &ctrl,
            &DMatrix::zeros(1, warm),
            &e,
            &DVector::zeros(ds.plant.n()),
            &DVector::zeros(ctrl.n()),
        )
        .unwrap();
        let z_p = last_window(&traj.u, &traj.y, cfg.task.lp).unwrap();
        match restriction(&ds.bundle, &ctrl, &cfg.task, &z_p, &y_r, &[IvVariant::PastOnly, IvVariant::Combined]) {
            Ok(res) => {
                past.push(res[0].residual);
                comb.push(res[1].residual);
            }
            Err(_) => errors += 1,
        }
    }
    let (mp, mc) = (median(past), median(comb));
    let ratio = mp / mc;
    outcome(
        errors == 0 && ratio <= RESTRICTION_RATIO_MAX,
        format!(
            "median residual past_only {mp:.4}, combined {mc:.4}; ratio {ratio:.3} <= {RESTRICTION_RATIO_MAX}; \
             planning errors {errors}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let settings = SolverSettings {
        eps_abs: 1e-10,
        eps_rel: 1e-10,
        max_iter: 200_000,
        ..SolverSettings::default()
    };
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for seed in 0..100u64 {
        let mut rng = rng(90_000 + seed);
        let d = rng.random_range(2..=30);
        let meq = rng.random_range(0..=3.min(d - 1));
        let nb = rng.random_range(0..=7.min(d));
        let prob = random_qp(&mut rng, d, meq, nb);
        let want = active_set_oracle(&prob);
        match qp::solve(&prob, &settings) {
            Ok(sol) => worst = worst.max((&sol.x - &want).amax() / (1.0 + want.amax())),
            Err(_) => errors += 1,
        }
    }
    outcome(
        errors == 0 && worst <= QP_TOL,
        format!("max scaled deviation {worst:.2e} <= {QP_TOL:e}; solver errors {errors}"),
    )
}

fn criterion_10() -> Outcome {
    let cfg = load_config("smoke.json", &[]);
    let root = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for jobs in [1usize, 4] {
        let dir = root.path().join(format!("jobs{jobs}"));
        let opts = CampaignOptions {
            out_dir: dir.clone(),
            jobs,
            cache_dir: None,
            traces: true,
        };
        run_campaign(&cfg, &opts).unwrap();
        let read = |name: &str| std::fs::read(dir.join(name)).unwrap();
        files.push((read("records.csv"), read("metadata.json")));
    }
    let same_records = files[0].0 == files[1].0;
    let same_meta = files[0].1 == files[1].1;
    outcome(
        same_records && same_meta,
        format!("records.csv identical: {same_records}; metadata.json identical: {same_meta} (jobs 1 vs 4)"),
    )
}

fn report(n: usize, started: Instant, o: &Outcome) -> bool {
    let t: Duration = started.elapsed();
    println!(
        "criterion {n}: {} [{:.1} s] {}",
        if o.pass { "PASS" } else { "FAIL" },
        t.as_secs_f64(),
        o.detail
    );
    o.pass
}

fn main() -> ExitCode {
    let mut all = true;
    let simple: [(usize, fn() -> Outcome); 5] =
        [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5)];
    for (n, f) in simple {
        let t = Instant::now();
        all &= report(n, t, &f());
    }
    let t = Instant::now();
    let records = monte_carlo(&campaign_config(), 0).unwrap();
    let campaign_time = t.elapsed();
    println!("campaign: {} runs in {:.1} s", records.len(), campaign_time.as_secs_f64());
    all &= report(6, Instant::now() - campaign_time, &criterion_6(&records));
    all &= report(7, Instant::now() - campaign_time, &criterion_7(&records));
    let tail: [(usize, fn() -> Outcome); 3] = [(8, criterion_8), (9, criterion_9), (10, criterion_10)];
    for (n, f) in tail {
        let t = Instant::now();
        all &= report(n, t, &f());
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
