//! Invariant suite run by `hfront verify`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::elimination::{build_tree, EliminationTree};
use crate::error::Result;
use crate::fem::{build_dof_map, condensed_elements, CondensedElement, DofMap};
use crate::frontal::{assemble_front, forward_eliminate, CostCounters, SchurComplement};
use crate::mesh2d::{ElementId, Mesh};
use crate::reuse::{solve_sequence, verify_solution_consistency, SequenceConfig, SequenceSolver, SolveMode};

/// The suite never runs more grids than this.
pub const MAX_VERIFY_LEVELS: usize = 6;
pub const REPRODUCTION_TOLERANCE: f64 = 1e-11;
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-9;
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &'static str, failure: Option<String>, ok: impl Into<String>) -> Self {
        match failure {
            None => Self { name, passed: true, detail: ok.into() },
            Some(detail) => Self { name, passed: false, detail },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub levels: usize,
    pub checks: Vec<InvariantCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn overlap(a: &crate::mesh2d::ElementNode, b: &crate::mesh2d::ElementNode, tol: f64) -> bool {
    a.min.x < b.max.x - tol && b.min.x < a.max.x - tol && a.min.y < b.max.y - tol && b.min.y < a.max.y - tol
}

/// Active elements cover the domain without overlap.
pub fn check_tiling(mesh: &Mesh) -> Option<String> {
    let rel = (mesh.active_area() - mesh.domain_area()).abs() / mesh.domain_area();
    if rel > 1e-12 {
        return Some(format!("active area differs from domain area by {rel:.3e}"));
    }
    let active = mesh.active_elements();
    for (i, &a) in active.iter().enumerate() {
        for &b in &active[i + 1..] {
            if overlap(mesh.node(a), mesh.node(b), mesh.snap_tol()) {
                return Some(format!("elements {a} and {b} overlap"));
            }
        }
    }
    None
}

pub fn check_irregularity(mesh: &Mesh) -> Option<String> {
    mesh.check_one_irregularity().err().map(|e| e.to_string())
}

/// Mesh-only part of the suite.
pub fn check_mesh(mesh: &Mesh) -> Vec<InvariantCheck> {
    vec![
        InvariantCheck::new("mesh_tiling", check_tiling(mesh), "active elements tile the domain"),
        InvariantCheck::new("one_irregularity", check_irregularity(mesh), "at most one hanging node per edge"),
    ]
}

/// Every element sits in one front and every free DOF is eliminated once.
pub fn check_partition(mesh: &Mesh, dofmap: &DofMap, tree: &EliminationTree) -> Option<String> {
    let mut seen_el: BTreeSet<ElementId> = BTreeSet::new();
    for f in &tree.fronts {
        for &e in &f.element_ids {
            if !seen_el.insert(e) {
                return Some(format!("element {e} appears in two fronts"));
            }
        }
    }
    let active: BTreeSet<ElementId> = mesh.active_elements().into_iter().collect();
    if seen_el != active {
        return Some("fronts do not cover exactly the active elements".into());
    }
    let total: usize = tree.fronts.iter().map(|f| f.eliminate_dofs.len()).sum();
    if total != dofmap.n_dofs() {
        return Some(format!("sum of eliminate sizes {total} != N = {}", dofmap.n_dofs()));
    }
    let mut seen = BTreeSet::new();
    for f in &tree.fronts {
        for k in &f.eliminate_dofs {
            if dofmap.index_of(k).is_none() || !seen.insert(*k) {
                return Some(format!("dof {k:?} eliminated twice or not free"));
            }
        }
        if f.keep_dofs.iter().any(|k| f.eliminate_dofs.contains(k)) {
            return Some(format!("front {} keeps a dof it eliminates", f.front_id));
        }
    }
    if tree.fronts.last().is_some_and(|f| !f.keep_dofs.is_empty()) {
        return Some("final front keeps dofs".into());
    }
    None
}

/// Constraint rows reproduce every tensor polynomial of degree `p` at the
/// slave nodes.
pub fn check_constraint_reproduction(dofmap: &DofMap) -> Option<String> {
    let p = dofmap.p() as i32;
    for (slave, row) in dofmap.constraints() {
        let Some(ps) = dofmap.point(slave) else {
            return Some(format!("slave {slave:?} has no location"));
        };
        for a in 0..=p {
            for b in 0..=p {
                let q = |x: f64, y: f64| x.powi(a) * y.powi(b);
                let mut v = 0.0;
                let mut scale = 0.0_f64;
                for (m, c) in row {
                    let Some(pm) = dofmap.point(m) else {
                        return Some(format!("master {m:?} has no location"));
                    };
                    let t = c * q(pm.x, pm.y);
                    v += t;
                    scale = scale.max(t.abs());
                }
                let err = (v - q(ps.x, ps.y)).abs();
                if err > REPRODUCTION_TOLERANCE * scale.max(1.0) {
                    return Some(format!("slave {slave:?} misses x^{a} y^{b} by {err:.3e}"));
                }
            }
        }
    }
    None
}

/// `(|eliminate|, |keep|)` of every front at level `2..=levels-1`, by chain.
pub fn interior_front_sizes(tree: &EliminationTree, levels: usize) -> BTreeMap<usize, Vec<(u32, usize, usize)>> {
    let mut by_chain: BTreeMap<usize, Vec<(u32, usize, usize)>> = BTreeMap::new();
    for f in &tree.fronts {
        if f.chain > 0 && f.level >= 2 && (f.level as usize) < levels {
            by_chain.entry(f.chain).or_default().push((f.level, f.eliminate_dofs.len(), f.keep_dofs.len()));
        }
    }
    by_chain
}

pub fn check_constant_front_size(tree: &EliminationTree, levels: usize) -> Option<String> {
    for (chain, sizes) in interior_front_sizes(tree, levels) {
        if let Some((l, e, k)) = sizes.iter().find(|s| (s.1, s.2) != (sizes[0].1, sizes[0].2)) {
            return Some(format!(
                "chain {chain}: level {l} front has ({e}, {k}), level {} has ({}, {})",
                sizes[0].0, sizes[0].1, sizes[0].2
            ));
        }
    }
    None
}

fn check_spd(s: &SchurComplement) -> Option<String> {
    let n = s.dofs.len();
    if n == 0 {
        return None;
    }
    let asym = s.s.asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Some(format!("asymmetry {asym:.3e}"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (s.s[(i, j)] + s.s[(j, i)]));
    if m.cholesky().is_none() {
        return Some("not positive definite".into());
    }
    None
}

struct Grid {
    mesh: Mesh,
    dofmap: DofMap,
    tree: EliminationTree,
    elements: Vec<CondensedElement>,
}

fn first_failure(checks: impl IntoIterator<Item = (usize, Option<String>)>) -> Option<String> {
    checks.into_iter().find_map(|(l, f)| f.map(|d| format!("l={l}: {d}")))
}

/// Runs the full suite on grids `1..=min(levels, MAX_VERIFY_LEVELS)`.
pub fn verify_sequence(config: &SequenceConfig) -> Result<VerifyReport> {
    let levels = config.levels.clamp(1, MAX_VERIFY_LEVELS);
    let config = SequenceConfig { levels, compute_errors: false, ..config.clone() };
    let problem = config.problem.as_ref();

    let mut grids = Vec::with_capacity(levels);
    let mut mesh = config.initial.clone();
    for _ in 0..levels {
        mesh = mesh.refine_towards_singularities();
        let dofmap = build_dof_map(&mesh, config.order, problem)?;
        let tree = build_tree(&mesh, &dofmap)?;
        let elements = condensed_elements(&mesh, &dofmap, problem)?;
        grids.push(Grid { mesh: mesh.clone(), dofmap, tree, elements });
    }
    let range = format!("grids 1..={levels}");
    let mut checks = Vec::new();

    let numbered = || grids.iter().enumerate().map(|(i, g)| (i + 1, g));
    checks.push(InvariantCheck::new(
        "mesh_tiling",
        first_failure(numbered().map(|(l, g)| (l, check_tiling(&g.mesh)))),
        &range,
    ));
    checks.push(InvariantCheck::new(
        "one_irregularity",
        first_failure(numbered().map(|(l, g)| (l, check_irregularity(&g.mesh)))),
        &range,
    ));
    checks.push(InvariantCheck::new(
        "dof_partition",
        first_failure(numbered().map(|(l, g)| (l, check_partition(&g.mesh, &g.dofmap, &g.tree)))),
        &range,
    ));
    checks.push(InvariantCheck::new(
        "constraint_reproduction",
        first_failure(numbered().map(|(l, g)| (l, check_constraint_reproduction(&g.dofmap)))),
        &range,
    ));
    let last = grids.last().expect("at least one grid");
    checks.push(InvariantCheck::new(
        "constant_front_size",
        check_constant_front_size(&last.tree, levels),
        if levels >= 4 { format!("levels 2..={} per chain", levels - 1) } else { "fewer than two interior levels".into() },
    ));

    // Fresh forward passes: SPD Schur complements, and references for the cache check.
    let mut fresh = Vec::with_capacity(levels);
    let mut spd = None;
    for (l, g) in numbered() {
        let by_id: HashMap<ElementId, &CondensedElement> = g.elements.iter().map(|e| (e.element, e)).collect();
        let out = forward_eliminate(&g.tree, |id| by_id.get(&id).copied(), &mut CostCounters::default())?;
        if spd.is_none() {
            spd = first_failure(out.schurs.iter().map(|s| (l, check_spd(s))));
        }
        fresh.push(out);
    }
    checks.push(InvariantCheck::new("spd_schur", spd, &range));

    // Every cached factor must reconstruct the front a fresh pass assembles.
    let mut solver = SequenceSolver::new(config.initial.clone(), config.problem.clone(), config.order, SolveMode::Reuse)
        .with_errors(false);
    let mut cache_failure = None;
    for (l, g) in numbered() {
        solver.step()?;
        let cache = solver.cache();
        let failure = cache.validate().err().map(|e| e.to_string()).or_else(|| {
            let by_id: HashMap<ElementId, &CondensedElement> = g.elements.iter().map(|e| (e.element, e)).collect();
            g.tree.fronts.iter().enumerate().find_map(|(i, front)| {
                let inherited: Vec<&SchurComplement> =
                    i.checked_sub(1).map(|j| &fresh[l - 1].schurs[j]).into_iter().collect();
                let df = match assemble_front(front, |id| by_id.get(&id).copied(), &inherited) {
                    Ok(df) => df,
                    Err(e) => return Some(e.to_string()),
                };
                let err = cache.factor_store[i].reconstruction_error(&df.a);
                (err > RECONSTRUCTION_TOLERANCE).then(|| format!("front {i} reconstruction error {err:.3e}"))
            })
        });
        if cache_failure.is_none() {
            cache_failure = failure.map(|f| format!("l={l}: {f}"));
        }
    }
    checks.push(InvariantCheck::new("cache_integrity", cache_failure, &range));

    let runs = [SolveMode::Reuse, SolveMode::NoReuse, SolveMode::Oracle]
        .map(|m| solve_sequence(&config, m));
    let [reuse, noreuse, oracle] = runs;
    let consistency = verify_solution_consistency(&reuse?, &noreuse?, &oracle?);
    checks.push(InvariantCheck::new(
        "cross_mode_consistency",
        consistency.first_failure.map(|l| format!("modes disagree on grid {l}")),
        format!("{range}, tolerance 1e-8"),
    ));

    Ok(VerifyReport { levels, checks })
}
