//! Top-down elimination ordering derived from the refinement trees.
//!
//! Active elements are grouped into fronts by `(chain, level)`. Chain 0 holds
//! the coarse region (every active element of level 0 or 1, plus any element
//! not descending from a singularity), and is eliminated first. Chain `s + 1`
//! holds the elements refined around singularity `s`; its fronts follow in
//! breadth-first order by level, coarse to fine. A single frontal matrix is
//! carried through the order: front `i` inherits the Schur complement of
//! front `i - 1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{DofKey, DofMap};
use crate::mesh2d::{ElementId, Mesh};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Front {
    pub front_id: usize,
    pub chain: usize,
    pub level: u32,
    pub element_ids: Vec<ElementId>,
    /// Fully assembled after this front; eliminated here.
    pub eliminate_dofs: Vec<DofKey>,
    /// Shared with elements of later fronts; passed on in the Schur complement.
    pub keep_dofs: Vec<DofKey>,
    pub successor: Option<usize>,
}

impl Front {
    /// Front DOFs, eliminate block first.
    pub fn dofs(&self) -> impl Iterator<Item = &DofKey> {
        self.eliminate_dofs.iter().chain(&self.keep_dofs)
    }

    pub fn size(&self) -> usize {
        self.eliminate_dofs.len() + self.keep_dofs.len()
    }

    /// Same elements and DOF classification, ignoring position.
    pub fn same_structure(&self, other: &Front) -> bool {
        self.chain == other.chain
            && self.level == other.level
            && self.element_ids == other.element_ids
            && self.eliminate_dofs == other.eliminate_dofs
            && self.keep_dofs == other.keep_dofs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EliminationTree {
    pub fronts: Vec<Front>,
    /// Refinement count of the mesh the tree was built from.
    pub refinement_count: usize,
}

impl EliminationTree {
    pub fn len(&self) -> usize {
        self.fronts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fronts.is_empty()
    }

    pub fn elements(&self) -> BTreeSet<ElementId> {
        self.fronts.iter().flat_map(|f| f.element_ids.iter().copied()).collect()
    }

    /// Fronts belonging to `chain`, in elimination order.
    pub fn chain(&self, chain: usize) -> impl Iterator<Item = &Front> {
        self.fronts.iter().filter(move |f| f.chain == chain)
    }

    pub fn chains(&self) -> BTreeSet<usize> {
        self.fronts.iter().map(|f| f.chain).collect()
    }
}

/// Chain of an active element: 0 for the coarse region, `s + 1` when its
/// level-1 ancestor touches singularity `s`.
pub fn element_chain(mesh: &Mesh, id: ElementId) -> Result<usize> {
    let node = mesh.node(id);
    if node.level <= 1 {
        return Ok(0);
    }
    let ancestor = mesh.node(mesh.ancestor_at_level(id, 1));
    let touching: Vec<usize> = mesh
        .singularities()
        .iter()
        .enumerate()
        .filter(|(_, s)| ancestor.closure_contains(s, mesh.snap_tol()))
        .map(|(i, _)| i)
        .collect();
    match touching.as_slice() {
        [] => Ok(0),
        [s] => Ok(s + 1),
        _ => Err(Error::Structural(format!(
            "element {id} belongs to the refinement regions of singularities {touching:?}"
        ))),
    }
}

/// Splits a DOF set into those fully assembled once `front_elements` join
/// `processed`, and those still shared with unprocessed elements.
///
/// Candidates are all DOFs touched by `processed` or `front_elements`; DOFs
/// already fully assembled before this front are skipped.
pub fn classify_dofs(
    front_elements: &[ElementId],
    dofmap: &DofMap,
    processed: &BTreeSet<ElementId>,
) -> (Vec<DofKey>, Vec<DofKey>) {
    let front: BTreeSet<ElementId> = front_elements.iter().copied().collect();
    let mut eliminate = Vec::new();
    let mut keep = Vec::new();
    for key in dofmap.free_dofs() {
        let support = dofmap.support(key);
        let in_front = support.iter().any(|e| front.contains(e));
        let in_processed = support.iter().any(|e| processed.contains(e));
        if !in_front && !in_processed {
            continue;
        }
        let all_done = support.iter().all(|e| front.contains(e) || processed.contains(e));
        match (all_done, in_front) {
            (true, true) => eliminate.push(*key),
            (true, false) => {} // eliminated by an earlier front
            (false, _) => keep.push(*key),
        }
    }
    (eliminate, keep)
}

pub fn build_tree(mesh: &Mesh, dofmap: &DofMap) -> Result<EliminationTree> {
    // (group rank, level, chain) -> elements
    let mut groups: BTreeMap<(u8, u32, usize), Vec<ElementId>> = BTreeMap::new();
    for id in mesh.active_elements() {
        let chain = element_chain(mesh, id)?;
        let level = mesh.node(id).level;
        let key = if chain == 0 { (0, 0, 0) } else { (1, level, chain) };
        groups.entry(key).or_default().push(id);
    }

    let n_fronts = groups.len();
    let mut fronts = Vec::with_capacity(n_fronts);
    let mut processed: BTreeSet<ElementId> = BTreeSet::new();
    for (i, ((_, level, chain), mut elements)) in groups.into_iter().enumerate() {
        elements.sort_unstable();
        let level = if chain == 0 {
            elements.iter().map(|&e| mesh.node(e).level).min().unwrap_or(0)
        } else {
            level
        };
        let (eliminate_dofs, keep_dofs) = classify_dofs(&elements, dofmap, &processed);
        processed.extend(elements.iter().copied());
        fronts.push(Front {
            front_id: i,
            chain,
            level,
            element_ids: elements,
            eliminate_dofs,
            keep_dofs,
            successor: (i + 1 < n_fronts).then_some(i + 1),
        });
    }
    Ok(EliminationTree { fronts, refinement_count: mesh.refinement_count() })
}

/// Builds the tree of a once-refined mesh and counts the leading fronts that
/// are structurally unchanged, and hence reusable.
pub fn extend_tree(
    old: &EliminationTree,
    new_mesh: &Mesh,
    new_dofmap: &DofMap,
) -> Result<(EliminationTree, usize)> {
    if new_mesh.refinement_count() != old.refinement_count + 1 {
        return Err(Error::NotRefinementOf {
            old: old.refinement_count,
            new: new_mesh.refinement_count(),
        });
    }
    for f in &old.fronts {
        for &e in &f.element_ids {
            if e >= new_mesh.nodes().len() {
                return Err(Error::NotRefinementOf {
                    old: old.refinement_count,
                    new: new_mesh.refinement_count(),
                });
            }
        }
    }
    let new = build_tree(new_mesh, new_dofmap)?;
    let prefix = common_prefix(old, &new);
    Ok((new, prefix))
}

pub fn common_prefix(old: &EliminationTree, new: &EliminationTree) -> usize {
    old.fronts.iter().zip(&new.fronts).take_while(|(a, b)| a.same_structure(b)).count()
}
