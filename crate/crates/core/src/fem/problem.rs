//! Model problems `-div(a grad u) = f` with Dirichlet data on the whole boundary.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh2d::{self, Mesh, Point2};

pub trait ModelProblem: Send + Sync {
    fn diffusion(&self, _p: &Point2) -> f64 {
        1.0
    }

    fn source(&self, p: &Point2) -> f64;

    fn dirichlet(&self, p: &Point2) -> f64;

    /// Exact solution value and gradient, when known.
    fn exact(&self, _p: &Point2) -> Option<(f64, [f64; 2])> {
        None
    }
}

/// `u = sum_k r_k^alpha` with `r_k` the distance to singular point `k`.
#[derive(Debug, Clone)]
pub struct SingularPower {
    pub centers: Vec<Point2>,
    pub alpha: f64,
}

impl ModelProblem for SingularPower {
    fn source(&self, p: &Point2) -> f64 {
        // Laplacian of r^alpha in 2D is alpha^2 r^(alpha - 2)
        let a2 = self.alpha * self.alpha;
        -self
            .centers
            .iter()
            .map(|c| {
                let r = p.distance(c);
                if r == 0.0 {
                    0.0
                } else {
                    a2 * r.powf(self.alpha - 2.0)
                }
            })
            .sum::<f64>()
    }

    fn dirichlet(&self, p: &Point2) -> f64 {
        self.exact(p).map(|(u, _)| u).unwrap_or(0.0)
    }

    fn exact(&self, p: &Point2) -> Option<(f64, [f64; 2])> {
        let mut u = 0.0;
        let mut g = [0.0, 0.0];
        for c in &self.centers {
            let (dx, dy) = (p.x - c.x, p.y - c.y);
            let r = dx.hypot(dy);
            if r == 0.0 {
                continue;
            }
            u += r.powf(self.alpha);
            let s = self.alpha * r.powf(self.alpha - 2.0);
            g[0] += s * dx;
            g[1] += s * dy;
        }
        Some((u, g))
    }
}

/// Harmonic corner solution `r^(2/3) sin(2 theta / 3)` with `theta` in
/// `[0, 2 pi)`, vanishing on both faces of the reentrant corner at the origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct LShapeCorner;

impl ModelProblem for LShapeCorner {
    fn source(&self, _p: &Point2) -> f64 {
        0.0
    }

    fn dirichlet(&self, p: &Point2) -> f64 {
        self.exact(p).map(|(u, _)| u).unwrap_or(0.0)
    }

    fn exact(&self, p: &Point2) -> Option<(f64, [f64; 2])> {
        let r = p.x.hypot(p.y);
        if r == 0.0 {
            return Some((0.0, [0.0, 0.0]));
        }
        let mut theta = p.y.atan2(p.x);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        let k = 2.0 / 3.0;
        let u = r.powf(k) * (k * theta).sin();
        // grad in polar: u_r = k r^(k-1) sin, u_theta / r = k r^(k-1) cos
        let ur = k * r.powf(k - 1.0) * (k * theta).sin();
        let ut = k * r.powf(k - 1.0) * (k * theta).cos();
        let (c, s) = (theta.cos(), theta.sin());
        Some((u, [ur * c - ut * s, ur * s + ut * c]))
    }
}

/// `u = c0 + cx x + cy y`, reproduced exactly by any conforming discretization.
#[derive(Debug, Clone, Copy)]
pub struct AffineSolution {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
}

impl ModelProblem for AffineSolution {
    fn source(&self, _p: &Point2) -> f64 {
        0.0
    }

    fn dirichlet(&self, p: &Point2) -> f64 {
        self.c0 + self.cx * p.x + self.cy * p.y
    }

    fn exact(&self, p: &Point2) -> Option<(f64, [f64; 2])> {
        Some((self.dirichlet(p), [self.cx, self.cy]))
    }
}

/// The shipped grid sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Radical1,
    Radical2,
    Lshape,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Radical1, ProblemKind::Radical2, ProblemKind::Lshape];

    pub fn initial_mesh(self) -> Mesh {
        match self {
            ProblemKind::Radical1 => mesh2d::new_two_element_mesh(2.0, 1.0, Point2::new(1.0, 0.0))
                .expect("fixed radical geometry is valid"),
            ProblemKind::Radical2 => mesh2d::new_two_singularity_mesh(),
            ProblemKind::Lshape => mesh2d::new_lshape_mesh(),
        }
    }

    /// Manufactured problem for this geometry; `alpha` only affects the
    /// radical meshes.
    pub fn model(self, alpha: f64) -> Arc<dyn ModelProblem> {
        match self {
            ProblemKind::Radical1 | ProblemKind::Radical2 => Arc::new(SingularPower {
                centers: self.initial_mesh().singularities().to_vec(),
                alpha,
            }),
            ProblemKind::Lshape => Arc::new(LShapeCorner),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Radical1 => "radical1",
            ProblemKind::Radical2 => "radical2",
            ProblemKind::Lshape => "lshape",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radical1" => Ok(ProblemKind::Radical1),
            "radical2" => Ok(ProblemKind::Radical2),
            "lshape" => Ok(ProblemKind::Lshape),
            other => Err(Error::InvalidConfig(format!("unknown problem `{other}`"))),
        }
    }
}
