//! Dense partial factorization of fronts and Schur-complement propagation.
//!
//! Flop convention: one flop per scalar divide, multiply, and add/subtract.
//! Eliminating pivot `j` (1-based) of an `n x n` front costs `n - j` divides
//! for the multipliers plus `2 (n - j)^2` for the trailing update. Right-hand
//! side condensation and back substitution are counted separately.

use std::collections::HashMap;

use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::elimination::{EliminationTree, Front};
use crate::error::{Error, Result};
use crate::fem::{CondensedElement, DofKey, DofMap};
use crate::mesh2d::ElementId;

/// Pivots smaller than this fraction of the largest front diagonal are
/// treated as breakdown.
pub const PIVOT_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CostCounters {
    /// Matrix factorization flops.
    pub factor_flops: u64,
    /// Right-hand side condensation flops during forward elimination.
    pub rhs_flops: u64,
    /// Back substitution flops.
    pub back_flops: u64,
    /// Stored factor entries.
    pub nnz_factors: u64,
    /// Largest front dimension seen.
    pub peak_front: usize,
}

impl CostCounters {
    pub fn forward_flops(&self) -> u64 {
        self.factor_flops + self.rhs_flops
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseFront {
    pub front_id: usize,
    /// Eliminate block first, then keep block.
    pub dofs: Vec<DofKey>,
    pub n_eliminate: usize,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
}

/// Factors of the eliminated block of one front.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialLU {
    pub front_id: usize,
    pub dofs: Vec<DofKey>,
    /// Eliminated count `k`.
    pub k: usize,
    /// `k x k`, unit lower factor below the diagonal and upper factor on and
    /// above it.
    pub lu11: DenseMatrix,
    /// `k x (n - k)` coupling block of the upper factor.
    pub u12: DenseMatrix,
    /// `(n - k) x k` coupling block of the lower factor.
    pub l21: DenseMatrix,
    /// Forward-solved right-hand side of the eliminated block.
    pub rhs_partial: Vec<f64>,
}

impl PartialLU {
    pub fn n(&self) -> usize {
        self.dofs.len()
    }

    pub fn nnz(&self) -> u64 {
        let (k, n) = (self.k as u64, self.n() as u64);
        k * k + 2 * k * (n - k)
    }

    /// `[L11 U11, L11 U12; L21 U11, .]` rebuilt from the factors, as an
    /// `n x n` matrix whose trailing block is zero.
    pub fn reconstruct(&self) -> DenseMatrix {
        let (k, n) = (self.k, self.n());
        let mut out = DenseMatrix::zeros(n, n);
        let l = |i: usize, m: usize| -> f64 {
            if i < k {
                match i.cmp(&m) {
                    std::cmp::Ordering::Greater => self.lu11[(i, m)],
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Less => 0.0,
                }
            } else {
                self.l21[(i - k, m)]
            }
        };
        let u = |m: usize, j: usize| -> f64 {
            if j < k {
                if m <= j {
                    self.lu11[(m, j)]
                } else {
                    0.0
                }
            } else {
                self.u12[(m, j - k)]
            }
        };
        for i in 0..n {
            for j in 0..n {
                if i >= k && j >= k {
                    continue;
                }
                let mut hi = k;
                if i < k {
                    hi = hi.min(i + 1);
                }
                if j < k {
                    hi = hi.min(j + 1);
                }
                let mut s = 0.0;
                for m in 0..hi {
                    s += l(i, m) * u(m, j);
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Largest deviation of the reconstructed eliminated rows and columns
    /// from `a`, relative to the largest entry of `a`.
    pub fn reconstruction_error(&self, a: &DenseMatrix) -> f64 {
        let r = self.reconstruct();
        let (k, n) = (self.k, self.n());
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if i < k || j < k {
                    worst = worst.max((r[(i, j)] - a[(i, j)]).abs());
                }
            }
        }
        worst / scale
    }
}

/// Condensed system passed to the next front.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurComplement {
    pub dofs: Vec<DofKey>,
    pub s: DenseMatrix,
    pub g: Vec<f64>,
}

impl SchurComplement {
    pub fn empty() -> Self {
        Self { dofs: Vec::new(), s: DenseMatrix::zeros(0, 0), g: Vec::new() }
    }
}

/// Scatters element systems and inherited Schur complements into a dense
/// front, eliminate DOFs first.
pub fn assemble_front<'a>(
    front: &Front,
    elements: impl Fn(ElementId) -> Option<&'a CondensedElement>,
    inherited: &[&SchurComplement],
) -> Result<DenseFront> {
    let dofs: Vec<DofKey> = front.dofs().copied().collect();
    let pos: HashMap<DofKey, usize> = dofs.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let n = dofs.len();
    let mut a = DenseMatrix::zeros(n, n);
    let mut b = vec![0.0; n];

    let mut scatter = |keys: &[DofKey], m: &DenseMatrix, v: &[f64], what: &str| -> Result<()> {
        let idx: Vec<usize> = keys
            .iter()
            .map(|k| {
                pos.get(k).copied().ok_or_else(|| {
                    Error::Structural(format!("{what} dof {k:?} is not part of front {}", front.front_id))
                })
            })
            .collect::<Result<_>>()?;
        for (r, &gi) in idx.iter().enumerate() {
            b[gi] += v[r];
            let row = m.row(r);
            for (c, &gj) in idx.iter().enumerate() {
                a[(gi, gj)] += row[c];
            }
        }
        Ok(())
    };

    for s in inherited {
        scatter(&s.dofs, &s.s, &s.g, "inherited Schur")?;
    }
    for &id in &front.element_ids {
        let el = elements(id).ok_or_else(|| {
            Error::Structural(format!("no element system for element {id} of front {}", front.front_id))
        })?;
        scatter(&el.dofs, &el.k, &el.f, "element")?;
    }
    Ok(DenseFront { front_id: front.front_id, dofs, n_eliminate: front.eliminate_dofs.len(), a, b })
}

/// Eliminates the first `k` DOFs of a front without pivoting.
pub fn partial_factorize(
    df: &DenseFront,
    k: usize,
    counters: &mut CostCounters,
) -> Result<(PartialLU, SchurComplement)> {
    let n = df.dofs.len();
    assert!(k <= n, "cannot eliminate {k} of {n} dofs");
    let mut w = df.a.clone();
    let mut b = df.b.clone();
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(w[(i, i)].abs()));
    let guard = PIVOT_GUARD * max_diag;

    let mut factor_flops = 0u64;
    let mut rhs_flops = 0u64;
    for j in 0..k {
        let pivot = w[(j, j)];
        if !(pivot.abs() > guard) {
            return Err(Error::SingularFront { front: df.front_id, dof: df.dofs[j], pivot });
        }
        let (head, tail) = w.as_rows_split(j + 1);
        let prow = &head[j * n..(j + 1) * n];
        for i in 0..n - j - 1 {
            let row = &mut tail[i * n..(i + 1) * n];
            let l = row[j] / pivot;
            row[j] = l;
            for c in j + 1..n {
                row[c] -= l * prow[c];
            }
            b[j + 1 + i] -= l * b[j];
        }
        let m = (n - j - 1) as u64;
        factor_flops += m + 2 * m * m;
        rhs_flops += 2 * m;
    }

    let mut lu11 = DenseMatrix::zeros(k, k);
    let mut u12 = DenseMatrix::zeros(k, n - k);
    let mut l21 = DenseMatrix::zeros(n - k, k);
    let mut s = DenseMatrix::zeros(n - k, n - k);
    for i in 0..n {
        let row = w.row(i);
        for j in 0..n {
            match (i < k, j < k) {
                (true, true) => lu11[(i, j)] = row[j],
                (true, false) => u12[(i, j - k)] = row[j],
                (false, true) => l21[(i - k, j)] = row[j],
                (false, false) => s[(i - k, j - k)] = row[j],
            }
        }
    }

    let lu = PartialLU {
        front_id: df.front_id,
        dofs: df.dofs.clone(),
        k,
        lu11,
        u12,
        l21,
        rhs_partial: b[..k].to_vec(),
    };
    counters.factor_flops += factor_flops;
    counters.rhs_flops += rhs_flops;
    counters.nnz_factors += lu.nnz();
    counters.peak_front = counters.peak_front.max(n);
    let schur = SchurComplement { dofs: df.dofs[k..].to_vec(), s, g: b[k..].to_vec() };
    Ok((lu, schur))
}

/// Factors and Schur outputs of a contiguous run of fronts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardOutput {
    pub factors: Vec<PartialLU>,
    pub schurs: Vec<SchurComplement>,
}

/// Processes fronts `start..` in elimination order, seeding front `start`
/// with `inherited` (empty when `start == 0`).
pub fn forward_eliminate_from<'a>(
    tree: &EliminationTree,
    start: usize,
    inherited: Option<&SchurComplement>,
    elements: impl Fn(ElementId) -> Option<&'a CondensedElement> + Copy,
    counters: &mut CostCounters,
) -> Result<ForwardOutput> {
    let mut out = ForwardOutput::default();
    let mut carry: Option<SchurComplement> = inherited.cloned();
    for front in &tree.fronts[start..] {
        let inh: Vec<&SchurComplement> = carry.iter().collect();
        let df = assemble_front(front, elements, &inh)?;
        let (lu, schur) = partial_factorize(&df, df.n_eliminate, counters)?;
        out.factors.push(lu);
        out.schurs.push(schur.clone());
        carry = Some(schur);
    }
    Ok(out)
}

/// Forward elimination of the whole tree.
pub fn forward_eliminate<'a>(
    tree: &EliminationTree,
    elements: impl Fn(ElementId) -> Option<&'a CondensedElement> + Copy,
    counters: &mut CostCounters,
) -> Result<ForwardOutput> {
    forward_eliminate_from(tree, 0, None, elements, counters)
}

/// Recovers all free unknowns from stored factors, finest front first.
/// Returns values in the DOF map's free order.
pub fn back_substitute(
    tree: &EliminationTree,
    factors: &[PartialLU],
    dofmap: &DofMap,
    counters: &mut CostCounters,
) -> Result<Vec<f64>> {
    let mut x = vec![f64::NAN; dofmap.n_dofs()];
    let mut flops = 0u64;
    for front in tree.fronts.iter().rev() {
        let lu = factors
            .get(front.front_id)
            .filter(|f| f.front_id == front.front_id)
            .ok_or(Error::MissingFactor(front.front_id))?;
        let (k, n) = (lu.k, lu.n());
        let idx: Vec<usize> = lu
            .dofs
            .iter()
            .map(|d| {
                dofmap.index_of(d).ok_or_else(|| Error::Structural(format!("front dof {d:?} is not free")))
            })
            .collect::<Result<_>>()?;
        let x2: Vec<f64> = idx[k..].iter().map(|&i| x[i]).collect();
        let mut x1 = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = lu.rhs_partial[i];
            for (c, v) in lu.u12.row(i).iter().zip(&x2) {
                s -= c * v;
            }
            let row = lu.lu11.row(i);
            for c in i + 1..k {
                s -= row[c] * x1[c];
            }
            x1[i] = s / row[i];
        }
        let (ku, nu) = (k as u64, n as u64);
        flops += 2 * ku * (nu - ku) + ku * ku;
        for (i, v) in idx[..k].iter().zip(x1) {
            x[*i] = v;
        }
    }
    counters.back_flops += flops;
    if let Some(i) = x.iter().position(|v| v.is_nan()) {
        return Err(Error::Structural(format!(
            "dof {:?} was never eliminated",
            dofmap.free_dofs()[i]
        )));
    }
    Ok(x)
}

/// Factorization flops for eliminating `k` pivots of an `n x n` front.
pub fn factor_flop_count(n: usize, k: usize) -> u64 {
    (1..=k as u64).map(|j| {
        let m = n as u64 - j;
        m + 2 * m * m
    }).sum()
}
