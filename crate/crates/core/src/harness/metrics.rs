//! Error norms and order fitting.

use crate::error::{invalid, Error, Result};
use crate::grid::{DofLayout, Grid};

/// `sum_k w_k (a_k - b_k)^2`: the squared discrete `L2` distance.
pub fn squared_l2_distance(a: &[f64], b: &[f64], weights: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != weights.len() {
        return Err(invalid("vectors and weights must have equal length"));
    }
    Ok(a.iter().zip(b).zip(weights).map(|((x, y), w)| w * (x - y) * (x - y)).sum())
}

/// `sqrt(mean_r ||approx_r - ref_r||^2)` with quadrature weights of `layout`.
pub fn rms_l2_error(samples: &[(Vec<f64>, Vec<f64>)], grid: &Grid, layout: DofLayout) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    let w = grid.quadrature_weights(layout);
    let mut total = 0.0;
    for (a, r) in samples {
        total += squared_l2_distance(a, r, &w)?;
    }
    Ok((total / samples.len() as f64).sqrt())
}

/// Least-squares fit of `log(error) = order * log(dt) + intercept`.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if dts.len() != errors.len() {
        return Err(invalid("dts and errors differ in length"));
    }
    if dts.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", dts.len())));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit(format!("non-positive error {e}")));
    }
    if dts.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::DegenerateFit("non-positive step".into()));
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all steps are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let order = sxy / sxx;
    Ok((order, my - order * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_examples() {
        let g = Grid::unit_square(4).unwrap();
        let n = g.node_count();
        let zero = vec![0.0; n];
        assert_eq!(rms_l2_error(&[(zero.clone(), zero.clone())], &g, DofLayout::Nodes).unwrap(), 0.0);
        let d = rms_l2_error(&[(vec![2.5; n], zero.clone())], &g, DofLayout::Nodes).unwrap();
        assert!((d - 2.5).abs() < 1e-14);
        let s = [(vec![3.0; n], zero.clone()), (vec![4.0; n], zero.clone())];
        let e = rms_l2_error(&s, &g, DofLayout::Nodes).unwrap();
        assert!((e - 5.0 / 2f64.sqrt()).abs() < 1e-14);
        let c = g.cell_count();
        let e = rms_l2_error(&[(vec![-1.5; c], vec![0.0; c])], &g, DofLayout::Cells).unwrap();
        assert!((e - 1.5).abs() < 1e-14);
        assert!(rms_l2_error(&[], &g, DofLayout::Nodes).is_err());
        assert!(rms_l2_error(&[(vec![0.0; 3], zero)], &g, DofLayout::Nodes).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let dts = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        for order in [0.9, 0.5] {
            let errs: Vec<f64> = dts.iter().map(|d: &f64| 3.0 * d.powf(order)).collect();
            let (p, c) = fit_order(&dts, &errs).unwrap();
            assert!((p - order).abs() < 1e-12);
            assert!((c - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(fit_order(&[0.1, 0.05], &[1.0, 0.5]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_order(&[0.1, 0.05, 0.02], &[1.0, 0.0, 0.5]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_order(&[0.1, 0.1, 0.1], &[1.0, 0.9, 0.5]), Err(Error::DegenerateFit(_))));
    }
}
