//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ivddpc::bench::{derive_seed, ExperimentConfig};
use ivddpc::control::{ChannelReference, ControlTask};
use ivddpc::hankel::{build_bundle, HankelBundle};
use ivddpc::qp::{QuadraticProgram, SolverSettings};
use ivddpc::sslib::benchmarks::{siso_controller, siso_plant, with_innovation_gain};
use ivddpc::sslib::{gaussian_noise, simulate_closed_loop, StateSpaceModel, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn load_config(name: &str, overrides: &[(&str, &str)]) -> ExperimentConfig {
    let ov: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::load(&configs_dir().join(name), &ov).expect("config loads")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn siso_with_gain(sigma: f64) -> StateSpaceModel {
    with_innovation_gain(siso_plant(), 0.01, (sigma * sigma).max(1e-6)).unwrap()
}

/// Closed-loop record of the SISO benchmark under a white-noise reference.
pub fn siso_closed_loop(n: usize, sigma: f64, seed: u64) -> Trajectory {
    let plant = siso_with_gain(sigma);
    let ctrl = siso_controller();
    let r = gaussian_noise(derive_seed(seed, 0, "reference"), &[1.0], n).unwrap();
    let e = gaussian_noise(derive_seed(seed, 0, "offline"), &[sigma], n).unwrap();
    simulate_closed_loop(&plant, &ctrl, &r, &e, &DVector::zeros(2), &DVector::zeros(2)).unwrap()
}

pub fn siso_bundle(n: usize, lp: usize, lf: usize, sigma: f64, seed: u64) -> HankelBundle {
    build_bundle(&siso_closed_loop(n, sigma, seed), lp, lf).unwrap()
}

pub fn siso_task(lp: usize, lf: usize) -> ControlTask {
    ControlTask {
        lp,
        lf,
        n_c: 20,
        reference: vec![ChannelReference::Square {
            period: 20,
            duty: 0.5,
            amplitude: 1.0,
            offset: 0.0,
            phase: 0,
        }],
        q: vec![1.0],
        r: vec![0.01],
        u_box: None,
        y_box: None,
        solver: SolverSettings::default(),
    }
}

/// Least-squares predictor by the normal equations: `Y_f Wᵀ (W Wᵀ)^{-1}`.
pub fn normal_equation_predictor(bundle: &HankelBundle) -> DMatrix<f64> {
    let w = bundle.regressor();
    let gram = &w * w.transpose();
    let chol = gram.cholesky().expect("regressor has full row rank");
    // X = Y_f Wᵀ G^{-1}  <=>  G Xᵀ = W Y_fᵀ
    chol.solve(&(&w * bundle.y_f.transpose())).transpose()
}

/// Random convex QP with `d` variables, `meq` equalities and bounds on the
/// first `nb` variables (a feasible point is built in).
pub fn random_qp(rng: &mut ChaCha8Rng, d: usize, meq: usize, nb: usize) -> QuadraticProgram {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let p = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    let p = (&p + p.transpose()) * 0.5;
    let q = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
    let x_feas = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
    let aeq = DMatrix::from_fn(meq, d, |_, _| rng.random_range(-1.0..1.0));
    let beq = &aeq * &x_feas;
    let mut lb = DVector::from_element(d, f64::NEG_INFINITY);
    let mut ub = DVector::from_element(d, f64::INFINITY);
    for i in 0..nb {
        lb[i] = x_feas[i] - rng.random_range(0.0..1.0);
        ub[i] = x_feas[i] + rng.random_range(0.0..1.0);
    }
    QuadraticProgram::new(p, q, aeq, beq, lb, ub).unwrap()
}

/// Exhaustive active-set oracle for a strictly convex QP: every
/// free/lower/upper assignment of the bounded variables gives a KKT system;
/// the unique point that is primal feasible with correctly signed
/// multipliers is the optimum.
pub fn active_set_oracle(qp: &QuadraticProgram) -> DVector<f64> {
    let d = qp.q.len();
    let bounded: Vec<usize> = (0..d).filter(|&i| qp.lb[i].is_finite() || qp.ub[i].is_finite()).collect();
    let meq = qp.aeq.nrows();
    let combos = 3usize.pow(bounded.len() as u32);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..combos {
        let mut c = code;
        let mut fixed: Vec<(usize, f64, f64)> = Vec::new(); // (index, value, sign)
        let mut skip = false;
        for &i in &bounded {
            match c % 3 {
                1 if qp.lb[i].is_finite() => fixed.push((i, qp.lb[i], -1.0)),
                2 if qp.ub[i].is_finite() => fixed.push((i, qp.ub[i], 1.0)),
                0 => {}
                _ => skip = true,
            }
            c /= 3;
        }
        if skip {
            continue;
        }
        let k = meq + fixed.len();
        let mut kkt = DMatrix::zeros(d + k, d + k);
        let mut rhs = DVector::zeros(d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(&qp.p);
        rhs.rows_mut(0, d).copy_from(&(-&qp.q));
        for r in 0..meq {
            for j in 0..d {
                kkt[(d + r, j)] = qp.aeq[(r, j)];
                kkt[(j, d + r)] = qp.aeq[(r, j)];
            }
            rhs[d + r] = qp.beq[r];
        }
        for (t, &(i, v, _)) in fixed.iter().enumerate() {
            kkt[(d + meq + t, i)] = 1.0;
            kkt[(i, d + meq + t)] = 1.0;
            rhs[d + meq + t] = v;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, d).into_owned();
        let feasible = (0..d).all(|i| x[i] >= qp.lb[i] - 1e-9 && x[i] <= qp.ub[i] + 1e-9);
        // stationarity: P x + q + Aeqᵀ y + Σ μ_i e_i = 0 with μ ≥ 0 at the
        // upper bound and μ ≤ 0 at the lower bound
        let signs_ok = fixed
            .iter()
            .enumerate()
            .all(|(t, &(_, _, s))| s * sol[d + meq + t] >= -1e-9);
        if feasible && signs_ok {
            let f = qp.objective(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.expect("oracle found a KKT point").1
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}
