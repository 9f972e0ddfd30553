//! One-dimensional nodal basis and quadrature rules.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 10;

/// Uniform polynomial order of approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct BasisOrder(usize);

impl BasisOrder {
    pub fn new(p: usize) -> Result<Self> {
        if (1..=MAX_ORDER).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::InvalidOrder(p))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(+-1) = (+-1)^(n-1) n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss-Legendre rule with `n` points on `[-1, 1]`, points ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        pts[i] = x;
        wts[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (pts, wts)
}

/// The `p + 1` Gauss-Lobatto points on `[-1, 1]`, ascending.
pub fn gauss_lobatto_points(p: usize) -> Vec<f64> {
    assert!(p >= 1);
    let mut pts = vec![0.0; p + 1];
    pts[0] = -1.0;
    pts[p] = 1.0;
    let pf = p as f64;
    for i in 1..p {
        // Interior points are the roots of P_p'.
        let mut x = -(std::f64::consts::PI * i as f64 / pf).cos();
        for _ in 0..100 {
            let (pp, dp) = legendre(p, x);
            let ddp = (2.0 * x * dp - pf * (pf + 1.0) * pp) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        pts[i] = x;
    }
    // Exact symmetry keeps mirrored edges bitwise identical.
    for i in 0..(p + 1) / 2 {
        let s = 0.5 * (pts[p - i] - pts[i]);
        pts[i] = -s;
        pts[p - i] = s;
    }
    if p % 2 == 0 {
        pts[p / 2] = 0.0;
    }
    pts
}

/// Lagrange basis interpolating at a set of nodes.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl LagrangeBasis {
    pub fn gauss_lobatto(p: usize) -> Self {
        Self { nodes: gauss_lobatto_points(p) }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, t: f64) -> ShapeValues {
        let x = &self.nodes;
        let n = x.len();
        let mut values = vec![0.0; n];
        let mut derivatives = vec![0.0; n];
        for i in 0..n {
            let mut denom = 1.0;
            let mut v = 1.0;
            for m in 0..n {
                if m != i {
                    denom *= x[i] - x[m];
                    v *= t - x[m];
                }
            }
            values[i] = v / denom;
            let mut d = 0.0;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let mut prod = 1.0;
                for m in 0..n {
                    if m != i && m != k {
                        prod *= t - x[m];
                    }
                }
                d += prod;
            }
            derivatives[i] = d / denom;
        }
        ShapeValues { values, derivatives }
    }
}

/// Values and derivatives of the order-`p` Gauss-Lobatto-Lagrange basis at `t`.
pub fn shape_functions_1d(p: usize, t: f64) -> ShapeValues {
    LagrangeBasis::gauss_lobatto(p).eval(t)
}

/// Which half of a coarse edge a fine edge covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeHalf {
    Lower,
    Upper,
}

/// Row `i` expresses fine-edge basis function `i` as a combination of the
/// coarse-edge basis functions.
pub fn constraint_coefficients(p: usize, half: EdgeHalf) -> DenseMatrix {
    let basis = LagrangeBasis::gauss_lobatto(p);
    let mut c = DenseMatrix::zeros(p + 1, p + 1);
    for (i, &t) in basis.nodes().iter().enumerate() {
        let mapped = match half {
            EdgeHalf::Lower => 0.5 * (t - 1.0),
            EdgeHalf::Upper => 0.5 * (t + 1.0),
        };
        let vals = basis.eval(mapped).values;
        for (j, v) in vals.into_iter().enumerate() {
            c[(i, j)] = v;
        }
    }
    c
}
