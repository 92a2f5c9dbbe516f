//! Krylov evaluation of `phi_0(dt A) v = exp(dt A) v` and
//! `phi_1(dt A) v = (exp(dt A) - I)(dt A)^{-1} v`.
//!
//! Both actions are obtained from one primitive, [`affine_flow`], which
//! integrates `w' = A w + u` exactly (up to the Krylov tolerance) with
//! adaptive sub-stepping. Each sub-step projects `A w + u` onto an
//! `m`-dimensional Arnoldi space and evaluates the small `phi` functions
//! through an augmented matrix exponential, in the style of Expokit's `phiv`.

mod dense;

pub use dense::{dense_phi, expm_taylor, DENSE_PHI_MAX_DIM};

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Subspace dimension.
    pub m: usize,
    /// Absolute tolerance on the returned vector.
    pub tol: f64,
    /// Cap on the number of extra sub-steps (accepted or rejected) per call.
    pub max_restarts: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { m: 6, tol: 1e-6, max_restarts: 100_000 }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("krylov dimension must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("krylov tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiResult {
    pub vector: Vec<f64>,
    /// Accumulated a-posteriori error estimate (absolute).
    pub est_error: f64,
    pub restarts_used: usize,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_dims(a: &SparseOperator, v: &[f64], dt: f64) -> Result<()> {
    if !a.is_square() {
        return Err(invalid("operator must be square"));
    }
    if v.len() != a.n_rows() {
        return Err(invalid(format!("vector length {} != operator dimension {}", v.len(), a.n_rows())));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(invalid(format!("time step must be non-negative, got {dt}")));
    }
    Ok(())
}

/// `exp(dt A) v`.
pub fn phi0_action(a: &SparseOperator, v: &[f64], dt: f64, cfg: &KrylovConfig) -> Result<PhiResult> {
    check_dims(a, v, dt)?;
    let zero = vec![0.0; v.len()];
    affine_flow(a, v, &zero, dt, cfg)
}

/// `phi_1(dt A) v`, with `phi_1(0) = 1`.
pub fn phi1_action(a: &SparseOperator, v: &[f64], dt: f64, cfg: &KrylovConfig) -> Result<PhiResult> {
    check_dims(a, v, dt)?;
    cfg.validate()?;
    if dt == 0.0 || a.nnz() == 0 {
        return Ok(PhiResult { vector: v.to_vec(), est_error: 0.0, restarts_used: 0 });
    }
    // dt * phi_1(dt A) v is the flow of w' = A w + v from w = 0
    let zero = vec![0.0; v.len()];
    let scaled = KrylovConfig { tol: cfg.tol * dt, ..*cfg };
    let mut res = affine_flow(a, &zero, v, dt, &scaled)?;
    for x in &mut res.vector {
        *x /= dt;
    }
    res.est_error /= dt;
    Ok(res)
}

/// Solution at time `t` of `w' = A w + u`, `w(0) = w0`, i.e.
/// `exp(t A) w0 + t phi_1(t A) u`.
pub fn affine_flow(
    a: &SparseOperator,
    w0: &[f64],
    u: &[f64],
    t: f64,
    cfg: &KrylovConfig,
) -> Result<PhiResult> {
    check_dims(a, w0, t)?;
    if u.len() != w0.len() {
        return Err(invalid("forcing length does not match state"));
    }
    cfg.validate()?;
    let n = w0.len();
    if t == 0.0 {
        return Ok(PhiResult { vector: w0.to_vec(), est_error: 0.0, restarts_used: 0 });
    }
    if a.nnz() == 0 {
        let vector = w0.iter().zip(u).map(|(w, f)| if *f == 0.0 { *w } else { w + t * f }).collect();
        return Ok(PhiResult { vector, est_error: 0.0, restarts_used: 0 });
    }

    let m = cfg.m.min(n);
    let anorm = a.norm_inf();
    let breakdown_tol = anorm * 1e-12;
    let mut w = w0.to_vec();
    let mut t_now = 0.0;
    let mut tau = t;
    let mut est_total = 0.0;
    let mut substeps = 0usize;
    let mut p = vec![0.0; n];
    // basis holds m + 1 Arnoldi vectors
    let mut basis: Vec<Vec<f64>> = vec![vec![0.0; n]; m + 1];
    let mut hess = DMatrix::<f64>::zeros(m + 1, m);
    let mut av = vec![0.0; n];

    while t_now < t {
        if substeps > cfg.max_restarts {
            return Err(Error::Convergence { what: "krylov phi action", estimate: est_total });
        }
        tau = tau.min(t - t_now);

        a.mul_vec_into(&w, &mut p);
        for (pi, ui) in p.iter_mut().zip(u) {
            *pi += ui;
        }
        let beta = norm2(&p);
        if beta == 0.0 {
            break;
        }
        for (b, pi) in basis[0].iter_mut().zip(&p) {
            *b = pi / beta;
        }
        hess.fill(0.0);
        let mut k = m;
        let mut happy = false;
        for j in 0..m {
            a.mul_vec_into(&basis[j], &mut av);
            for i in 0..=j {
                let h: f64 = basis[i].iter().zip(&av).map(|(x, y)| x * y).sum();
                hess[(i, j)] = h;
                for (z, b) in av.iter_mut().zip(&basis[i]) {
                    *z -= h * b;
                }
            }
            let h = norm2(&av);
            if h <= breakdown_tol {
                k = j + 1;
                happy = true;
                break;
            }
            hess[(j + 1, j)] = h;
            for (b, z) in basis[j + 1].iter_mut().zip(&av) {
                *b = z / h;
            }
        }

        if happy {
            // the Krylov space is invariant: the projected flow is exact
            let mut aug = DMatrix::<f64>::zeros(k + 1, k + 1);
            for i in 0..k {
                for j in 0..k {
                    aug[(i, j)] = tau * hess[(i, j)];
                }
            }
            aug[(0, k)] = tau;
            let f = aug.exp();
            for (i, b) in basis.iter().enumerate().take(k) {
                let c = beta * f[(i, k)];
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi += c * bi;
                }
            }
            t_now += tau;
            tau = t - t_now;
            continue;
        }

        let h_last = hess[(m, m - 1)];
        a.mul_vec_into(&basis[m], &mut av);
        let avnorm = norm2(&av);

        // the basis does not depend on tau, so rejected trials only redo the
        // small exponential
        loop {
            // [[tau*Hbar, tau*e1, 0], [0, 0, 1], [0, 0, 0]] with Hbar the
            // (m+1)x(m+1) Hessenberg matrix padded with a zero column
            let dim = m + 3;
            let mut aug = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..m {
                for j in 0..m {
                    aug[(i, j)] = tau * hess[(i, j)];
                }
            }
            aug[(m, m - 1)] = tau * h_last;
            aug[(0, m + 1)] = tau;
            aug[(m + 1, m + 2)] = 1.0;
            let f = aug.exp();

            let err1 = beta * f[(m, m + 1)].abs();
            let err2 = beta * tau * f[(m, m + 2)].abs() * avnorm;
            // err1 bounds the size of the correction term itself, so accepting on
            // it leaves the corrected update well inside the tolerance
            let err_loc = err1.max(err2);
            let allowed = cfg.tol * tau / t;

            if err_loc <= allowed {
                for (i, b) in basis.iter().enumerate() {
                    let c = beta * f[(i, m + 1)];
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi += c * bi;
                    }
                }
                t_now += tau;
                est_total += err_loc;
                if t_now < t {
                    substeps += 1;
                }
                if err_loc <= allowed * 0.5f64.powi(m as i32) {
                    tau *= 2.0;
                }
                break;
            }
            tau *= 0.5;
            substeps += 1;
            if substeps > cfg.max_restarts {
                return Err(Error::Convergence { what: "krylov phi action", estimate: err_loc });
            }
        }
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::Convergence { what: "krylov phi action", estimate: f64::INFINITY });
        }
    }
    Ok(PhiResult { vector: w, est_error: est_total, restarts_used: substeps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        d / norm2(b)
    }

    fn random_sparse(n: usize, density: f64, radius: f64, seed: u64) -> SparseOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, rng.random_range(-1.0..0.5));
            for j in 0..n {
                if i != j && rng.random::<f64>() < density {
                    b.push(i, j, rng.random_range(-1.0..1.0));
                }
            }
        }
        let a = b.build();
        let s = radius / a.norm_inf();
        a.scale_rows(&vec![s; n])
    }

    #[test]
    fn zero_operator_is_identity() {
        let a = SparseOperator::zeros(5, 5);
        let v = vec![0.3, -1.0, 2.5, 1e-9, 7.0];
        let cfg = KrylovConfig::default();
        assert_eq!(phi0_action(&a, &v, 1.0, &cfg).unwrap().vector, v);
        assert_eq!(phi1_action(&a, &v, 1.0, &cfg).unwrap().vector, v);
    }

    #[test]
    fn diagonal_closed_forms() {
        let a = SparseOperator::from_diagonal(&[-1.0, -2.0]);
        let cfg = KrylovConfig::default();
        let e0 = phi0_action(&a, &[1.0, 1.0], 1.0, &cfg).unwrap();
        assert!((e0.vector[0] - (-1f64).exp()).abs() < cfg.tol);
        assert!((e0.vector[1] - (-2f64).exp()).abs() < cfg.tol);
        let e1 = phi1_action(&a, &[1.0, 1.0], 1.0, &cfg).unwrap();
        assert!((e1.vector[0] - (1.0 - (-1f64).exp())).abs() < cfg.tol);
        assert!((e1.vector[1] - (1.0 - (-2f64).exp()) / 2.0).abs() < cfg.tol);
    }

    #[test]
    fn matches_dense_oracle() {
        let cfg = KrylovConfig::default();
        for seed in 0..5 {
            let a = random_sparse(64, 0.08, 10.0, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dense = a.to_dense();
            let dv = nalgebra::DVector::from_vec(v.clone());
            let exact0 = (dense_phi(&dense, 0, 1.0).unwrap() * &dv).as_slice().to_vec();
            let exact1 = (dense_phi(&dense, 1, 1.0).unwrap() * &dv).as_slice().to_vec();
            let r0 = phi0_action(&a, &v, 1.0, &cfg).unwrap();
            let r1 = phi1_action(&a, &v, 1.0, &cfg).unwrap();
            assert!(rel_err(&r0.vector, &exact0) < 1e-8, "phi0 seed {seed}: {}", rel_err(&r0.vector, &exact0));
            assert!(rel_err(&r1.vector, &exact1) < 1e-8, "phi1 seed {seed}: {}", rel_err(&r1.vector, &exact1));
            assert!(r0.est_error <= cfg.tol && r1.est_error <= cfg.tol);
        }
    }

    #[test]
    fn phi_identity() {
        // exp(z) = 1 + z phi_1(z)
        let cfg = KrylovConfig::default();
        let a = random_sparse(32, 0.1, 8.0, 7);
        let v: Vec<f64> = (0..32).map(|i| ((i * 7) as f64).cos()).collect();
        let dt = 0.7;
        let e0 = phi0_action(&a, &v, dt, &cfg).unwrap().vector;
        let e1 = phi1_action(&a, &v, dt, &cfg).unwrap().vector;
        let ae1 = a.mul_vec(&e1);
        let lhs: Vec<f64> = v.iter().zip(&ae1).map(|(x, y)| x + dt * y).collect();
        assert!(rel_err(&lhs, &e0) < 1e-8);
    }

    #[test]
    fn semigroup_property() {
        let cfg = KrylovConfig::default();
        let a = random_sparse(40, 0.1, 6.0, 11);
        let v: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let direct = phi0_action(&a, &v, 0.9, &cfg).unwrap().vector;
        let half = phi0_action(&a, &v, 0.4, &cfg).unwrap().vector;
        let two = phi0_action(&a, &half, 0.5, &cfg).unwrap().vector;
        let d: f64 = direct.iter().zip(&two).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(d <= 10.0 * cfg.tol);
    }

    #[test]
    fn deterministic() {
        let cfg = KrylovConfig::default();
        let a = random_sparse(50, 0.1, 10.0, 3);
        let v: Vec<f64> = (0..50).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let r1 = phi1_action(&a, &v, 1.0, &cfg).unwrap();
        let r2 = phi1_action(&a, &v, 1.0, &cfg).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn stiff_diffusion_needs_substeps() {
        let n = 100;
        let mut b = TripletBuilder::new(n, n);
        let h2 = (n as f64).powi(2);
        for i in 0..n {
            let mut diag = 0.0;
            if i > 0 {
                b.push(i, i - 1, h2);
                diag -= h2;
            }
            if i + 1 < n {
                b.push(i, i + 1, h2);
                diag -= h2;
            }
            b.push(i, i, diag);
        }
        let a = b.build();
        let v: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect();
        let cfg = KrylovConfig::default();
        let r = phi0_action(&a, &v, 0.1, &cfg).unwrap();
        assert!(r.restarts_used > 0);
        let exact = dense_phi(&a.to_dense(), 0, 0.1).unwrap() * nalgebra::DVector::from_vec(v);
        let err: f64 = r.vector.iter().zip(exact.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 10.0 * cfg.tol, "err {err}");
        // mass is conserved by the Neumann Laplacian
        let mass: f64 = r.vector.iter().sum();
        assert!((mass - 50.0).abs() < 1e-6);
    }

    #[test]
    fn restart_cap_reports_convergence_error() {
        let a = SparseOperator::from_diagonal(&(0..30).map(|i| -(i as f64) * 100.0).collect::<Vec<_>>());
        let v = vec![1.0; 30];
        let cfg = KrylovConfig { m: 2, tol: 1e-12, max_restarts: 3 };
        assert!(matches!(phi0_action(&a, &v, 1.0, &cfg), Err(Error::Convergence { .. })));
    }

    #[test]
    fn rejects_mismatch() {
        let a = SparseOperator::identity(3);
        let cfg = KrylovConfig::default();
        assert!(matches!(phi0_action(&a, &[1.0], 1.0, &cfg), Err(Error::InvalidArgument(_))));
        assert!(matches!(phi1_action(&a, &[1.0; 3], -1.0, &cfg), Err(Error::InvalidArgument(_))));
    }
}
