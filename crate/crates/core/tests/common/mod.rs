//! Semi-analytic mean-square error of the schemes on the linear additive
//! problem, mode by mode in the continuum eigenbasis. Each mode is a scalar
//! OU process; the pair (exact, scheme) is a Gaussian linear recursion, so
//! its covariance is propagated exactly with no sampling.

#![allow(dead_code)]

use std::f64::consts::PI;

use setdm::integrators::SchemeKind;
use setdm::noise::NoiseSpec;

pub const REACTION: f64 = 0.5;

/// `E ||X(T) - X_N||^2` summed over the retained modes of `spec`.
pub fn mean_square_error(spec: &NoiseSpec, diffusion: f64, scheme: SchemeKind, dt: f64, t_end: f64) -> f64 {
    let steps = (t_end / dt).round() as usize;
    let q = spec.eigenvalues();
    let mut total = 0.0;
    for (m, &qm) in q.iter().enumerate() {
        if qm == 0.0 {
            continue;
        }
        let (i, j) = spec.mode(m);
        let li = i as f64 * PI / spec.l1;
        let lj = j as f64 * PI / spec.l2;
        let lam = diffusion * (li * li + lj * lj);
        let mu = lam + REACTION;
        let e = (-lam * dt).exp();
        let (a, c) = match scheme {
            SchemeKind::Setdm0 => (e * (1.0 - REACTION * dt), e),
            SchemeKind::Setdm1 => {
                let phi1 = if lam == 0.0 { dt } else { -(-lam * dt).exp_m1() / lam };
                (e - REACTION * phi1, e)
            }
            SchemeKind::SemiImplicit => ((1.0 - REACTION * dt) / (1.0 + lam * dt), 1.0 / (1.0 + lam * dt)),
        };
        let ex = (-mu * dt).exp();
        let var_i = -(-2.0 * mu * dt).exp_m1() / (2.0 * mu);
        let cov_ib = -(-mu * dt).exp_m1() / mu;
        // covariance of (exact, scheme)
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..steps {
            sxx = ex * ex * sxx + var_i;
            sxy = ex * a * sxy + c * cov_ib;
            syy = a * a * syy + c * c * dt;
        }
        total += qm * (sxx - 2.0 * sxy + syy);
    }
    total
}

pub fn rms_errors(spec: &NoiseSpec, diffusion: f64, scheme: SchemeKind, dts: &[f64], t_end: f64) -> Vec<f64> {
    dts.iter().map(|&dt| mean_square_error(spec, diffusion, scheme, dt, t_end).sqrt()).collect()
}
