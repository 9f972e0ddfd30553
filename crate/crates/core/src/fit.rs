//! Least-squares fits for the cost model.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

/// Coefficient of determination; 1 for an exact fit of constant data.
fn r_squared(ys: &[f64], predicted: impl Iterator<Item = f64>) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = ys.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn affine_fit(xs: &[f64], ys: &[f64]) -> AffineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let r2 = r_squared(ys, xs.iter().map(|x| intercept + slope * x));
    AffineFit { intercept, slope, r2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `||y - fit||_2 / ||y||_2`.
    pub relative_residual: f64,
    pub r2: f64,
}

pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> QuadraticFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3, "quadratic fit needs three points");
    let a = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let c = a.clone().svd(true, true).solve(&b, 1e-14).expect("SVD with both factors");
    let fitted = &a * &c;
    let res = (&b - &fitted).norm();
    QuadraticFit {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        relative_residual: res / b.norm().max(f64::MIN_POSITIVE),
        r2: r_squared(ys, fitted.iter().copied()),
    }
}
