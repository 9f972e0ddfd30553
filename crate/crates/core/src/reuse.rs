//! Solving a whole refinement sequence, optionally reusing factors of the
//! unrefined part of the mesh from grid to grid.
//!
//! In reuse mode the cache keeps, for every front of the previous grid, its
//! partial LU factors, the Schur complement it passed on, and the element
//! systems it assembled. A new grid recomputes only the fronts after the
//! longest structurally identical prefix of the elimination order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::elimination::{build_tree, extend_tree, EliminationTree};
use crate::error::{Error, Result};
use crate::fem::{
    apply_constraints, build_dof_map, compute_error, element_stiffness_load, BasisOrder, CondensedElement,
    DofMap, ElementDofMap, ModelProblem, Norm, ProblemKind,
};
use crate::fit::{affine_fit, AffineFit};
use crate::frontal::{back_substitute, forward_eliminate_from, CostCounters, PartialLU, SchurComplement};
use crate::mesh2d::{ElementId, Mesh, Point2};
use crate::oracle::{assemble_global, dense_lu_flops, dense_lu_solve};

/// Relative max-norm agreement required between modes.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Reuse,
    NoReuse,
    Oracle,
}

impl SolveMode {
    pub const ALL: [SolveMode; 3] = [SolveMode::Reuse, SolveMode::NoReuse, SolveMode::Oracle];
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMode::Reuse => "reuse",
            SolveMode::NoReuse => "noreuse",
            SolveMode::Oracle => "oracle",
        })
    }
}

impl FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reuse" => Ok(SolveMode::Reuse),
            "noreuse" => Ok(SolveMode::NoReuse),
            "oracle" => Ok(SolveMode::Oracle),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub l: usize,
    pub mode: SolveMode,
    pub n_dofs: usize,
    /// Forward elimination flops spent on this grid.
    pub flops_new: u64,
    pub flops_back: u64,
    /// Factor entries computed on this grid.
    pub nnz_new: u64,
    pub peak_front: usize,
    pub wall_time_ns: u128,
    pub error_l2: Option<f64>,
    pub error_h1: Option<f64>,
    pub fronts_total: usize,
    pub fronts_recomputed: usize,
    pub elements_recomputed: usize,
}

/// Fronts to factorize on a new grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecomputationPlan {
    pub reuse_prefix: usize,
    pub recompute: Vec<usize>,
    /// Cached fronts of the previous grid that are invalidated.
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ReuseCache {
    pub factor_store: Vec<PartialLU>,
    pub schur_snapshots: Vec<SchurComplement>,
    pub tree_prev: Option<EliminationTree>,
    /// Element systems keyed by element, with the map they were condensed with.
    pub element_systems: HashMap<ElementId, (ElementDofMap, CondensedElement)>,
}

impl ReuseCache {
    pub fn clear(&mut self) {
        *self = ReuseCache::default();
    }

    /// Checks that the stored factors and snapshots line up with the cached tree.
    pub fn validate(&self) -> Result<()> {
        let Some(tree) = &self.tree_prev else {
            if self.factor_store.is_empty() && self.schur_snapshots.is_empty() {
                return Ok(());
            }
            return Err(Error::CacheInvalid { front: 0, detail: "factors without a tree".into() });
        };
        if self.factor_store.len() != tree.len() || self.schur_snapshots.len() != tree.len() {
            return Err(Error::CacheInvalid {
                front: self.factor_store.len().min(self.schur_snapshots.len()),
                detail: format!(
                    "{} factors and {} snapshots for {} fronts",
                    self.factor_store.len(),
                    self.schur_snapshots.len(),
                    tree.len()
                ),
            });
        }
        for (i, (front, lu)) in tree.fronts.iter().zip(&self.factor_store).enumerate() {
            let dofs_match = lu.front_id == i
                && lu.k == front.eliminate_dofs.len()
                && lu.dofs.iter().eq(front.dofs())
                && self.schur_snapshots[i].dofs == front.keep_dofs;
            if !dofs_match {
                return Err(Error::CacheInvalid { front: i, detail: "structural key mismatch".into() });
            }
        }
        Ok(())
    }
}

/// Builds the new tree and decides which fronts must be refactorized. Cached
/// entries past the reusable prefix are dropped.
pub fn refine_and_patch(
    cache: &mut ReuseCache,
    new_mesh: &Mesh,
    new_dofmap: &DofMap,
) -> Result<(EliminationTree, RecomputationPlan)> {
    cache.validate()?;
    let Some(old) = cache.tree_prev.as_ref() else {
        let tree = build_tree(new_mesh, new_dofmap)?;
        let plan = RecomputationPlan { reuse_prefix: 0, recompute: (0..tree.len()).collect(), dropped: vec![] };
        return Ok((tree, plan));
    };
    let (tree, structural_prefix) = extend_tree(old, new_mesh, new_dofmap)?;

    // Element systems of a reused front must also be unchanged.
    let unchanged = |id: &ElementId| match (cache.element_systems.get(id), new_dofmap.element_map(*id)) {
        (Some((cached, _)), Some(new)) => cached == new,
        _ => false,
    };
    let prefix = tree.fronts[..structural_prefix]
        .iter()
        .take_while(|f| f.element_ids.iter().all(unchanged))
        .count();

    let dropped: Vec<usize> = (prefix..old.len()).collect();
    cache.factor_store.truncate(prefix);
    cache.schur_snapshots.truncate(prefix);
    let plan = RecomputationPlan { reuse_prefix: prefix, recompute: (prefix..tree.len()).collect(), dropped };
    Ok((tree, plan))
}

/// Everything produced for one grid.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub report: GridReport,
    /// Free unknowns in DOF map order.
    pub solution: Vec<f64>,
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub tree: Option<EliminationTree>,
    pub plan: Option<RecomputationPlan>,
}

/// Step-by-step solver over a refinement sequence.
pub struct SequenceSolver {
    problem: Arc<dyn ModelProblem>,
    order: BasisOrder,
    mode: SolveMode,
    mesh: Mesh,
    grid: usize,
    cache: ReuseCache,
    compute_errors: bool,
}

impl SequenceSolver {
    pub fn new(initial: Mesh, problem: Arc<dyn ModelProblem>, order: BasisOrder, mode: SolveMode) -> Self {
        let compute_errors = problem.exact(&Point2::new(0.0, 0.0)).is_some();
        Self { problem, order, mode, mesh: initial, grid: 0, cache: ReuseCache::default(), compute_errors }
    }

    pub fn with_errors(mut self, on: bool) -> Self {
        self.compute_errors = on && self.problem.exact(&Point2::new(0.0, 0.0)).is_some();
        self
    }

    pub fn mode(&self) -> SolveMode {
        self.mode
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn cache(&self) -> &ReuseCache {
        &self.cache
    }

    /// Mutable cache access, for fault injection in tests.
    pub fn cache_mut(&mut self) -> &mut ReuseCache {
        &mut self.cache
    }

    /// Refines once and solves the new grid.
    pub fn step(&mut self) -> Result<GridOutcome> {
        let mesh = self.mesh.refine_towards_singularities();
        let l = self.grid + 1;
        let started = Instant::now();
        let dofmap = build_dof_map(&mesh, self.order, self.problem.as_ref())?;

        let mut systems: HashMap<ElementId, CondensedElement> = HashMap::new();
        let mut elements_recomputed = 0;
        for id in mesh.active_elements() {
            let map = dofmap.element_map(id).expect("active element has a DOF map");
            if self.mode == SolveMode::Reuse {
                if let Some((cached_map, sys)) = self.cache.element_systems.get(&id) {
                    if cached_map == map {
                        systems.insert(id, sys.clone());
                        continue;
                    }
                }
            }
            let em = element_stiffness_load(mesh.node(id), self.problem.as_ref(), self.order)?;
            systems.insert(id, apply_constraints(&em, map));
            elements_recomputed += 1;
        }

        let mut counters = CostCounters::default();
        let (solution, tree, plan, fronts_total) = match self.mode {
            SolveMode::Oracle => {
                let mut ordered: Vec<CondensedElement> = mesh
                    .active_elements()
                    .into_iter()
                    .map(|id| systems[&id].clone())
                    .collect();
                ordered.sort_by_key(|e| e.element);
                let sys = assemble_global(&dofmap, &ordered);
                let x = dense_lu_solve(&sys)?;
                let n = sys.n() as u64;
                // same convention as the frontal path with k = n
                counters.factor_flops = dense_lu_flops(sys.n());
                counters.rhs_flops = n * n.saturating_sub(1);
                counters.back_flops = n * n;
                counters.nnz_factors = n * n;
                counters.peak_front = sys.n();
                (x, None, None, 1)
            }
            SolveMode::NoReuse => {
                let tree = build_tree(&mesh, &dofmap)?;
                let fwd = forward_eliminate_from(&tree, 0, None, |id| systems.get(&id), &mut counters)?;
                let mut back = CostCounters::default();
                let x = back_substitute(&tree, &fwd.factors, &dofmap, &mut back)?;
                counters.back_flops = back.back_flops;
                let plan = RecomputationPlan { reuse_prefix: 0, recompute: (0..tree.len()).collect(), dropped: vec![] };
                let n = tree.len();
                (x, Some(tree), Some(plan), n)
            }
            SolveMode::Reuse => {
                let (tree, plan) = match refine_and_patch(&mut self.cache, &mesh, &dofmap) {
                    Err(Error::CacheInvalid { .. }) => {
                        self.cache.clear();
                        refine_and_patch(&mut self.cache, &mesh, &dofmap)?
                    }
                    other => other?,
                };
                let prefix = plan.reuse_prefix;
                let inherited = prefix.checked_sub(1).map(|i| self.cache.schur_snapshots[i].clone());
                let fwd =
                    forward_eliminate_from(&tree, prefix, inherited.as_ref(), |id| systems.get(&id), &mut counters)?;
                self.cache.factor_store.extend(fwd.factors);
                self.cache.schur_snapshots.extend(fwd.schurs);
                let mut back = CostCounters::default();
                let x = back_substitute(&tree, &self.cache.factor_store, &dofmap, &mut back)?;
                counters.back_flops = back.back_flops;
                self.cache.tree_prev = Some(tree.clone());
                self.cache.element_systems = systems
                    .into_iter()
                    .map(|(id, s)| (id, (dofmap.element_map(id).expect("active").clone(), s)))
                    .collect();
                let n = tree.len();
                (x, Some(tree), Some(plan), n)
            }
        };
        let wall_time_ns = started.elapsed().as_nanos();

        let (error_l2, error_h1) = if self.compute_errors {
            (
                Some(compute_error(&mesh, &dofmap, &solution, self.problem.as_ref(), Norm::L2)?),
                Some(compute_error(&mesh, &dofmap, &solution, self.problem.as_ref(), Norm::H1Semi)?),
            )
        } else {
            (None, None)
        };

        let report = GridReport {
            l,
            mode: self.mode,
            n_dofs: dofmap.n_dofs(),
            flops_new: counters.forward_flops(),
            flops_back: counters.back_flops,
            nnz_new: counters.nnz_factors,
            peak_front: counters.peak_front,
            wall_time_ns,
            error_l2,
            error_h1,
            fronts_total,
            fronts_recomputed: plan.as_ref().map_or(1, |p| p.recompute.len()),
            elements_recomputed,
        };
        self.mesh = mesh.clone();
        self.grid = l;
        Ok(GridOutcome { report, solution, mesh, dofmap, tree, plan })
    }
}

/// Affine and constant fits of the per-grid cost model.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CostModelFit {
    /// No-reuse forward flops per grid against `N_l`.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub r2_cost: Option<f64>,
    /// `N_l` against `l`.
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub r2_unknowns: Option<f64>,
    /// No-reuse factor entries per grid against `N_l`.
    pub c5: Option<f64>,
    pub c6: Option<f64>,
    pub r2_memory: Option<f64>,
    /// Mean reuse-mode forward flops per grid for `l >= 3`.
    pub c7: Option<f64>,
    /// Largest deviation from `c7` over those grids.
    pub c7_spread: Option<f64>,
}

impl CostModelFit {
    /// Fits use grids with `l >= 2`.
    pub fn from_reports(noreuse: Option<&[GridReport]>, reuse: Option<&[GridReport]>) -> Self {
        let mut fit = CostModelFit::default();
        let sample = |rs: &[GridReport], from: usize| -> Vec<GridReport> {
            rs.iter().filter(|r| r.l >= from).cloned().collect()
        };
        let apply = |f: AffineFit| (Some(f.intercept), Some(f.slope), Some(f.r2));
        if let Some(rs) = noreuse.or(reuse) {
            let s = sample(rs, 2);
            if s.len() >= 2 {
                let ls: Vec<f64> = s.iter().map(|r| r.l as f64).collect();
                let ns: Vec<f64> = s.iter().map(|r| r.n_dofs as f64).collect();
                (fit.c3, fit.c4, fit.r2_unknowns) = apply(affine_fit(&ls, &ns));
            }
        }
        if let Some(rs) = noreuse {
            let s = sample(rs, 2);
            if s.len() >= 2 {
                let ns: Vec<f64> = s.iter().map(|r| r.n_dofs as f64).collect();
                let fl: Vec<f64> = s.iter().map(|r| r.flops_new as f64).collect();
                let nz: Vec<f64> = s.iter().map(|r| r.nnz_new as f64).collect();
                (fit.c1, fit.c2, fit.r2_cost) = apply(affine_fit(&ns, &fl));
                (fit.c5, fit.c6, fit.r2_memory) = apply(affine_fit(&ns, &nz));
            }
        }
        if let Some(rs) = reuse {
            let s = sample(rs, 3);
            if !s.is_empty() {
                let mean = s.iter().map(|r| r.flops_new as f64).sum::<f64>() / s.len() as f64;
                let spread = s.iter().map(|r| (r.flops_new as f64 - mean).abs()).fold(0.0, f64::max);
                fit.c7 = Some(mean);
                fit.c7_spread = Some(spread);
            }
        }
        fit
    }
}

/// Which grid sequence to run.
#[derive(Clone)]
pub struct SequenceConfig {
    pub initial: Mesh,
    pub problem: Arc<dyn ModelProblem>,
    pub order: BasisOrder,
    pub levels: usize,
    pub compute_errors: bool,
}

impl SequenceConfig {
    pub fn for_problem(kind: ProblemKind, p: usize, levels: usize, alpha: f64) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidConfig("at least one grid is required".into()));
        }
        Ok(Self {
            initial: kind.initial_mesh(),
            problem: kind.model(alpha),
            order: BasisOrder::new(p)?,
            levels,
            compute_errors: true,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SequenceRun {
    pub mode: SolveMode,
    pub reports: Vec<GridReport>,
    pub solutions: Vec<Vec<f64>>,
    pub fit: CostModelFit,
}

impl SequenceRun {
    pub fn cumulative_forward_flops(&self) -> Vec<u64> {
        self.reports
            .iter()
            .scan(0u64, |acc, r| {
                *acc += r.flops_new;
                Some(*acc)
            })
            .collect()
    }
}

/// Runs grids `1..=levels` in one mode.
pub fn solve_sequence(config: &SequenceConfig, mode: SolveMode) -> Result<SequenceRun> {
    if config.levels == 0 {
        return Err(Error::InvalidConfig("at least one grid is required".into()));
    }
    let mut solver = SequenceSolver::new(config.initial.clone(), config.problem.clone(), config.order, mode)
        .with_errors(config.compute_errors);
    let mut reports = Vec::with_capacity(config.levels);
    let mut solutions = Vec::with_capacity(config.levels);
    for _ in 0..config.levels {
        let out = solver.step()?;
        reports.push(out.report);
        solutions.push(out.solution);
    }
    let fit = match mode {
        SolveMode::Reuse => CostModelFit::from_reports(None, Some(&reports)),
        _ => CostModelFit::from_reports(Some(&reports), None),
    };
    Ok(SequenceRun { mode, reports, solutions, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDiff {
    pub l: usize,
    pub reuse_vs_noreuse: f64,
    pub reuse_vs_oracle: f64,
    pub noreuse_vs_oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub first_failure: Option<usize>,
    pub grids: Vec<GridDiff>,
}

/// `||a - b||_inf / ||b||_inf`.
pub fn relative_max_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let d = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let s = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if d == 0.0 {
        0.0
    } else {
        d / s.max(f64::MIN_POSITIVE)
    }
}

/// Per-grid agreement of the three modes' solutions.
pub fn verify_solution_consistency(
    reuse: &SequenceRun,
    noreuse: &SequenceRun,
    oracle: &SequenceRun,
) -> ConsistencyReport {
    let n = reuse.solutions.len().max(noreuse.solutions.len()).max(oracle.solutions.len());
    let mut grids = Vec::with_capacity(n);
    let mut first_failure = None;
    for i in 0..n {
        let (a, b, c) = (reuse.solutions.get(i), noreuse.solutions.get(i), oracle.solutions.get(i));
        let diff = |x: Option<&Vec<f64>>, y: Option<&Vec<f64>>| match (x, y) {
            (Some(x), Some(y)) => relative_max_diff(x, y),
            _ => f64::INFINITY,
        };
        let d = GridDiff {
            l: i + 1,
            reuse_vs_noreuse: diff(a, b),
            reuse_vs_oracle: diff(a, c),
            noreuse_vs_oracle: diff(b, c),
        };
        let ok = d.reuse_vs_noreuse <= CONSISTENCY_TOLERANCE
            && d.reuse_vs_oracle <= CONSISTENCY_TOLERANCE
            && d.noreuse_vs_oracle <= CONSISTENCY_TOLERANCE;
        if !ok && first_failure.is_none() {
            first_failure = Some(i + 1);
        }
        grids.push(d);
    }
    ConsistencyReport { consistent: first_failure.is_none(), first_failure, grids }
}
