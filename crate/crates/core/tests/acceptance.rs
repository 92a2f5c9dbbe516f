//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use setdm::darcy::{darcy_velocity, PermeabilityField};
use setdm::grid::Grid;
use setdm::harness::{run_study, ConvergenceReport, StudyConfig};
use setdm::integrators::{linear_folded, run_with, SchemeConfig, SchemeKind};
use setdm::krylov::{dense_phi, phi0_action, phi1_action, KrylovConfig};
use setdm::noise::{make_path, NoiseSpec, Spectrum};
use setdm::reference::{exact_linear_step, SpectralState};
use setdm::sparse::{SparseOperator, TripletBuilder};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / n
}

fn random_sparse(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> SparseOperator {
    let mut b = TripletBuilder::new(n, n);
    let density = rng.random_range(0.03..0.15);
    for i in 0..n {
        b.push(i, i, rng.random_range(-1.0..0.5));
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                b.push(i, j, rng.random_range(-1.0..1.0));
            }
        }
    }
    let a = b.build();
    // ||A||_inf bounds the spectral radius
    let s = radius * rng.random_range(0.1..1.0) / a.norm_inf();
    a.scale_rows(&vec![s; n])
}

fn phi_oracle() -> Outcome {
    let cfg = KrylovConfig { m: 6, tol: 1e-6, ..KrylovConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = random_sparse(&mut rng, 64, 10.0);
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = a.to_dense();
        let dv = DVector::from_vec(v.clone());
        let e0 = dense_phi(&dense, 0, 1.0).unwrap() * &dv;
        let e1 = dense_phi(&dense, 1, 1.0).unwrap() * &dv;
        let k0 = phi0_action(&a, &v, 1.0, &cfg).unwrap();
        let k1 = phi1_action(&a, &v, 1.0, &cfg).unwrap();
        worst = worst.max(rel_err(&k0.vector, e0.as_slice())).max(rel_err(&k1.vector, e1.as_slice()));
    }
    outcome(worst <= 1e-8, format!("worst relative error {worst:.2e} (limit 1e-8)"))
}

fn etd_exactness() -> Outcome {
    let grid = Grid::unit_square(8).unwrap();
    let noise = NoiseSpec::exponential(1.0, 0.2, 0.2, &grid).unwrap();
    let x0: Vec<f64> = grid
        .dof_coords(setdm::DofLayout::Nodes)
        .iter()
        .map(|&(x, y)| (3.0 * x).cos() + x * y * y)
        .collect();
    let problem = linear_folded(&grid, 1.0, noise, false, x0.clone()).unwrap();
    let (dt, steps) = (0.05, 10);
    let krylov = KrylovConfig::default();
    let cfg = SchemeConfig::new(SchemeKind::Setdm1, dt, steps).unwrap().with_krylov(krylov);
    let n = problem.dof_count();
    let traj = run_with(&problem, &cfg, |_| Ok(vec![0.0; n]), false).unwrap();
    let exact = dense_phi(&problem.a_h().to_dense(), 0, dt * steps as f64).unwrap() * DVector::from_vec(x0);
    let err = traj.final_state.iter().zip(exact.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let limit = 10.0 * steps as f64 * krylov.tol;
    outcome(err <= limit, format!("max error {err:.2e} (limit {limit:.0e})"))
}

fn orders_line(report: &ConvergenceReport) -> String {
    report
        .fitted_orders
        .iter()
        .map(|f| format!("{} {}", f.scheme.label(), f.order.map_or("none".into(), |o| format!("{o:.3}"))))
        .collect::<Vec<_>>()
        .join(", ")
}

fn print_rows(report: &ConvergenceReport) {
    for r in &report.rows {
        println!("    {:<8} dt={:<8} rms={:.4e} used={} flagged={}", r.scheme.label(), r.dt, r.rms_error, r.realizations, r.flagged_count);
    }
}

fn additive_order() -> Outcome {
    let mut cfg = StudyConfig::linear_additive(32, 10);
    cfg.study.threads = Some(1);
    let report = run_study(&cfg).unwrap();
    print_rows(&report);
    let spec = cfg.noise.build(&cfg.grid().unwrap()).unwrap();
    let mut oracle = Vec::new();
    for s in SchemeKind::ALL {
        let e = common::rms_errors(&spec, 1.0, s, &cfg.study.dt_list, 1.0);
        let (p, _) = setdm::harness::fit_order(&cfg.study.dt_list, &e).unwrap();
        oracle.push(format!("{} {p:.3}", s.label()));
    }
    println!("    mean-square recursion orders (continuum, no sampling): {}", oracle.join(", "));
    let pass = SchemeKind::ALL.iter().all(|&s| report.order(s).is_some_and(|o| (0.75..=1.0).contains(&o)));
    outcome(pass, format!("orders {} (band [0.75, 1.0])", orders_line(&report)))
}

fn multiplicative_study(threads: usize) -> ConvergenceReport {
    let mut cfg = StudyConfig::advection(32, 20, false);
    cfg.study.threads = Some(threads);
    run_study(&cfg).unwrap()
}

fn multiplicative_order(report: &ConvergenceReport) -> Outcome {
    print_rows(report);
    let pass = [SchemeKind::Setdm0, SchemeKind::Setdm1]
        .iter()
        .all(|&s| report.order(s).is_some_and(|o| (0.4..=0.75).contains(&o)));
    outcome(pass && report.total_flagged() == 0, format!("orders {} (band [0.4, 0.75])", orders_line(report)))
}

fn darcy() -> Outcome {
    let grid = Grid::unit_square(32).unwrap();
    let perm = PermeabilityField::homogeneous(&grid, 1.0, 1.0).unwrap();
    let (p, q) = darcy_velocity(&grid, &perm, 1.0, 0.0).unwrap();
    let mut e_hom: f64 = 0.0;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            e_hom = e_hom.max((p[grid.cell_index(i, j)] - (1.0 - grid.cell_x(i))).abs());
        }
    }
    for v in &q.x_faces {
        e_hom = e_hom.max((v - 1.0).abs());
    }
    for v in &q.y_faces {
        e_hom = e_hom.max(v.abs());
    }

    let grid = Grid::unit_square(64).unwrap();
    let perm = PermeabilityField::default_streaks(&grid).unwrap();
    let (_, q) = darcy_velocity(&grid, &perm, 1.0, 0.0).unwrap();
    let qmax = q.max_abs();
    let div = q.divergence(&grid).iter().fold(0.0f64, |m, d| m.max(d.abs())) / qmax;
    let (inflow, outflow) = (q.inflow(&grid), q.outflow(&grid));
    let balance = (inflow - outflow).abs() / inflow.abs();
    let pass = e_hom <= 1e-10 && div <= 1e-10 && balance <= 1e-10;
    outcome(pass, format!("homogeneous {e_hom:.1e}, divergence/|q| {div:.1e}, flux balance {balance:.1e} (limits 1e-10)"))
}

/// Pairwise sum in the same split order as a midpoint tree.
fn tree_sum(v: &[f64]) -> f64 {
    if v.len() == 1 {
        return v[0];
    }
    let h = v.len() / 2;
    tree_sum(&v[..h]) + tree_sum(&v[h..])
}

fn path_refinement() -> Outcome {
    let spec = NoiseSpec::new(Spectrum::PowerLaw { r: 2.01 }, 20, 20, 1.0, 1.0).unwrap();
    let path = make_path(&spec, 42, 3, 1.0 / 1600.0, 1600).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut probes = 0;
    for &p in &[2usize, 4, 8, 16] {
        for _ in 0..250 {
            let m = rng.random_range(0..spec.mode_count());
            let k = rng.random_range(0..1600 / p);
            let coarse = path.draw_sums(k, p).unwrap()[m];
            let fine: Vec<f64> = (k * p..(k + 1) * p).map(|s| path.draws(s).unwrap()[m]).collect();
            let halves = path.draw_sums(2 * k, p / 2).unwrap()[m] + path.draw_sums(2 * k + 1, p / 2).unwrap()[m];
            let inc = path.increments(k, p).unwrap()[m];
            if coarse.to_bits() != tree_sum(&fine).to_bits()
                || coarse.to_bits() != halves.to_bits()
                || inc.to_bits() != (coarse * path.finest_dt().sqrt()).to_bits()
            {
                mismatches += 1;
            }
            probes += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in {probes} probes"))
}

fn ou_law() -> Outcome {
    let spec = NoiseSpec::new(Spectrum::Exponential { gamma: 1.0, b1: 0.2, b2: 0.2 }, 2, 0, 1.0, 1.0).unwrap();
    let q = spec.eigenvalues();
    let dt = 0.5;
    let mu = [0.01 / dt, 0.3 / dt, 10.0 / dt];
    let z0 = [0.7, -1.3, 2.0];
    let n = 100_000;
    let path = make_path(&spec, 7, 0, dt, n).unwrap();
    let base = SpectralState::zero(&spec, 1.0).unwrap();
    let mut samples: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    let mut dbetas: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    for k in 0..n {
        let mut st = base.clone().with_coeffs(z0.to_vec()).unwrap();
        st.mu = mu.to_vec();
        exact_linear_step(&mut st, &path, k, dt).unwrap();
        let db = path.increments(k, 1).unwrap();
        for m in 0..3 {
            samples[m].push(st.coeffs[m]);
            dbetas[m].push(db[m]);
        }
    }
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for m in 0..3 {
        let x = mu[m] * dt;
        let mean = (-x).exp() * z0[m];
        let var = q[m] * -(-2.0 * x).exp_m1() / (2.0 * mu[m]);
        let cov = q[m].sqrt() * -(-x).exp_m1() / mu[m];
        let s = &samples[m];
        let nf = n as f64;
        let sm = s.iter().sum::<f64>() / nf;
        let sv = s.iter().map(|v| (v - sm).powi(2)).sum::<f64>() / (nf - 1.0);
        let prods: Vec<f64> = s.iter().zip(&dbetas[m]).map(|(v, b)| (v - mean) * b).collect();
        let sc = prods.iter().sum::<f64>() / nf;
        let sc_sd = (prods.iter().map(|p| (p - sc).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        let z_mean = (sm - mean) / (var / nf).sqrt();
        let z_var = (sv - var) / (var * (2.0 / (nf - 1.0)).sqrt());
        let z_cov = (sc - cov) / (sc_sd / nf.sqrt());
        worst = worst.max(z_mean.abs()).max(z_var.abs()).max(z_cov.abs());
        lines.push(format!("mu*dt={x}: z=({z_mean:.2}, {z_var:.2}, {z_cov:.2})"));
    }
    outcome(worst <= 3.0, format!("{}; worst |z| {worst:.2} (limit 3)", lines.join("; ")))
}

fn reproducibility(single: &ConvergenceReport) -> Outcome {
    let multi = multiplicative_study(4);
    let same = single.to_csv_string() == multi.to_csv_string();
    outcome(same, "report.csv with 1 and 4 worker threads".to_string())
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {id} {name}: {} [{secs:.1}s] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };
    record(1, "phi-function oracle equivalence", &mut phi_oracle);
    record(2, "ETD exactness", &mut etd_exactness);
    record(3, "additive convergence order", &mut additive_order);
    let mut mult = None;
    record(4, "multiplicative convergence order", &mut || {
        let r = multiplicative_study(1);
        let o = multiplicative_order(&r);
        mult = Some(r);
        o
    });
    record(5, "Darcy correctness", &mut darcy);
    record(6, "noise path refinement", &mut path_refinement);
    record(7, "spectral reference law", &mut ou_law);
    let mult = mult.expect("criterion 4 ran");
    record(8, "reproducibility", &mut || reproducibility(&mult));

    println!();
    println!("acceptance summary:");
    for (id, name, o, _) in &results {
        println!("  {id}. {name}: {}", if o.pass { "PASS" } else { "FAIL" });
    }
    let failed = results.iter().filter(|r| !r.2.pass).count();
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
