//! Global degree-of-freedom numbering with constrained (hanging) and
//! Dirichlet DOFs.
//!
//! DOFs live on mesh entities (vertices, edges, element interiors). An entity
//! is owned by the lowest-id tree node (active or not) that has it, so keys
//! never change under further refinement.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::Result;
use crate::fem::basis::{constraint_coefficients, gauss_lobatto_points, BasisOrder, EdgeHalf};
use crate::fem::problem::ModelProblem;
use crate::mesh2d::{EdgeKey, ElementId, ElementNode, Mesh, Point2, Side, SnapKey};

/// Coefficients below this magnitude are dropped from constraint rows.
const CONSTRAINT_DROP: f64 = 1e-14;

/// Stable identity of one basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DofKey {
    /// Owning tree node.
    pub owner: u32,
    /// 0..=3 corner vertex (SW, SE, NE, NW), 4..=7 edge (bottom, right, top, left), 8 interior.
    pub entity: u8,
    pub index: u16,
}

impl DofKey {
    const INTERIOR: u8 = 8;

    fn vertex(owner: ElementId, corner: usize) -> Self {
        Self { owner: owner as u32, entity: corner as u8, index: 0 }
    }

    fn edge(owner: ElementId, side: Side, k: usize) -> Self {
        Self { owner: owner as u32, entity: 4 + side as u8, index: k as u16 }
    }

    fn interior(owner: ElementId, k: usize) -> Self {
        Self { owner: owner as u32, entity: Self::INTERIOR, index: k as u16 }
    }

    pub fn is_vertex(&self) -> bool {
        self.entity < 4
    }

    pub fn is_edge(&self) -> bool {
        (4..8).contains(&self.entity)
    }

    pub fn is_interior(&self) -> bool {
        self.entity == Self::INTERIOR
    }
}

/// A local basis function expressed through free global DOFs:
/// `u_local = sum(coef * u[key]) + offset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedDof {
    pub terms: Vec<(DofKey, f64)>,
    pub offset: f64,
}

/// Local-to-global map of one active element, in local node order
/// `j * (p + 1) + i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementDofMap {
    pub element: ElementId,
    pub local: Vec<ResolvedDof>,
}

impl ElementDofMap {
    /// Distinct free DOFs the element couples, sorted.
    pub fn free_dofs(&self) -> Vec<DofKey> {
        let set: BTreeSet<DofKey> =
            self.local.iter().flat_map(|r| r.terms.iter().map(|t| t.0)).collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    order: BasisOrder,
    free: Vec<DofKey>,
    index: HashMap<DofKey, usize>,
    element_maps: BTreeMap<ElementId, ElementDofMap>,
    raw_keys: BTreeMap<ElementId, Vec<DofKey>>,
    constraints: BTreeMap<DofKey, Vec<(DofKey, f64)>>,
    dirichlet: BTreeMap<DofKey, f64>,
    points: HashMap<DofKey, Point2>,
    support: Vec<Vec<ElementId>>,
    dof_level: Vec<u32>,
}

/// Entity that a local node sits on.
enum LocalEntity {
    Vertex(usize),
    Edge(Side, usize),
    Interior(usize),
}

fn local_entity(p: usize, i: usize, j: usize) -> LocalEntity {
    let corner = |i: usize, j: usize| -> Option<usize> {
        match (i == 0, i == p, j == 0, j == p) {
            (true, _, true, _) => Some(0),
            (_, true, true, _) => Some(1),
            (_, true, _, true) => Some(2),
            (true, _, _, true) => Some(3),
            _ => None,
        }
    };
    if let Some(c) = corner(i, j) {
        return LocalEntity::Vertex(c);
    }
    if j == 0 {
        LocalEntity::Edge(Side::Bottom, i)
    } else if i == p {
        LocalEntity::Edge(Side::Right, j)
    } else if j == p {
        LocalEntity::Edge(Side::Top, i)
    } else if i == 0 {
        LocalEntity::Edge(Side::Left, j)
    } else {
        LocalEntity::Interior((j - 1) * (p - 1) + (i - 1))
    }
}

fn node_point(node: &ElementNode, xi: f64, eta: f64) -> Point2 {
    Point2::new(
        node.min.x + 0.5 * (xi + 1.0) * node.width(),
        node.min.y + 0.5 * (eta + 1.0) * node.height(),
    )
}

enum Class {
    Free,
    Dirichlet(f64),
    Slave(Vec<(DofKey, f64)>),
}

impl DofMap {
    pub fn build(mesh: &Mesh, order: BasisOrder, problem: &dyn ModelProblem) -> Result<DofMap> {
        let p = order.get();
        let hanging = mesh.hanging_edges()?;
        let gll = gauss_lobatto_points(p);

        let mut vertex_owner: HashMap<SnapKey, DofKey> = HashMap::new();
        let mut edge_owner: HashMap<EdgeKey, (ElementId, Side)> = HashMap::new();
        for node in mesh.nodes() {
            for (c, corner) in node.corners().iter().enumerate() {
                vertex_owner.entry(mesh.snap(corner)).or_insert(DofKey::vertex(node.id, c));
            }
            for side in Side::ALL {
                edge_owner.entry(mesh.edge_key(node, side)).or_insert((node.id, side));
            }
        }
        let edge_dof = |key: &EdgeKey, k: usize| -> DofKey {
            let (owner, side) = edge_owner[key];
            DofKey::edge(owner, side, k)
        };

        // Raw local keys and node locations of every active element.
        let active = mesh.active_elements();
        let mut raw: BTreeMap<ElementId, Vec<DofKey>> = BTreeMap::new();
        let mut points: HashMap<DofKey, Point2> = HashMap::new();
        let mut boundary_edge_keys: BTreeSet<DofKey> = BTreeSet::new();
        for &id in &active {
            let node = mesh.node(id);
            let corners = node.corners();
            let mut keys = Vec::with_capacity((p + 1) * (p + 1));
            for j in 0..=p {
                for i in 0..=p {
                    let key = match local_entity(p, i, j) {
                        LocalEntity::Vertex(c) => vertex_owner[&mesh.snap(&corners[c])],
                        LocalEntity::Edge(side, k) => {
                            let key = edge_dof(&mesh.edge_key(node, side), k);
                            let (a, b) = node.side_endpoints(side);
                            if mesh.segment_on_boundary(&a, &b) {
                                boundary_edge_keys.insert(key);
                            }
                            key
                        }
                        LocalEntity::Interior(k) => DofKey::interior(id, k),
                    };
                    points.entry(key).or_insert_with(|| node_point(node, gll[i], gll[j]));
                    keys.push(key);
                }
            }
            raw.insert(id, keys);
        }

        // Constraint rows for nodes on fine half-edges.
        let lower = constraint_coefficients(p, EdgeHalf::Lower);
        let upper = constraint_coefficients(p, EdgeHalf::Upper);
        let mut constraints: BTreeMap<DofKey, Vec<(DofKey, f64)>> = BTreeMap::new();
        for h in &hanging {
            let coarse = mesh.node(h.coarse_element);
            let (a, b) = coarse.side_endpoints(h.coarse_side);
            let m = a.midpoint(&b);
            let masters: Vec<DofKey> = (0..=p)
                .map(|j| match j {
                    0 => vertex_owner[&mesh.snap(&a)],
                    j if j == p => vertex_owner[&mesh.snap(&b)],
                    j => edge_dof(&h.coarse, j),
                })
                .collect();
            let mid_key = vertex_owner[&mesh.snap(&m)];
            for (half, coeffs, fine_edge) in
                [(EdgeHalf::Lower, &lower, &h.fine[0]), (EdgeHalf::Upper, &upper, &h.fine[1])]
            {
                for i in 0..=p {
                    // the fine node on a coarse endpoint is that endpoint itself
                    let slave = match half {
                        EdgeHalf::Lower if i == 0 => continue,
                        EdgeHalf::Upper if i == p => continue,
                        EdgeHalf::Lower if i == p => mid_key,
                        EdgeHalf::Upper if i == 0 => mid_key,
                        _ => edge_dof(fine_edge, i),
                    };
                    let row: Vec<(DofKey, f64)> = masters
                        .iter()
                        .zip(coeffs.row(i))
                        .filter(|(_, c)| c.abs() >= CONSTRAINT_DROP)
                        .map(|(k, c)| (*k, *c))
                        .collect();
                    constraints.entry(slave).or_insert(row);
                }
            }
        }

        let mut class: BTreeMap<DofKey, Class> = BTreeMap::new();
        for keys in raw.values() {
            for &key in keys {
                if class.contains_key(&key) {
                    continue;
                }
                let pt = points[&key];
                let c = if let Some(row) = constraints.get(&key) {
                    Class::Slave(row.clone())
                } else if (key.is_vertex() && mesh.on_boundary(&pt))
                    || (key.is_edge() && boundary_edge_keys.contains(&key))
                {
                    Class::Dirichlet(problem.dirichlet(&pt))
                } else {
                    Class::Free
                };
                class.insert(key, c);
            }
        }

        let free: Vec<DofKey> =
            class.iter().filter(|(_, c)| matches!(c, Class::Free)).map(|(k, _)| *k).collect();
        let index: HashMap<DofKey, usize> = free.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let dirichlet: BTreeMap<DofKey, f64> = class
            .iter()
            .filter_map(|(k, c)| match c {
                Class::Dirichlet(v) => Some((*k, *v)),
                _ => None,
            })
            .collect();

        let mut memo: HashMap<DofKey, ResolvedDof> = HashMap::new();
        let mut element_maps = BTreeMap::new();
        let mut support: Vec<Vec<ElementId>> = vec![Vec::new(); free.len()];
        let mut dof_level = vec![0u32; free.len()];
        for (&id, keys) in &raw {
            let local: Vec<ResolvedDof> =
                keys.iter().map(|k| resolve(*k, &class, &mut memo, 0)).collect::<Result<_>>()?;
            let map = ElementDofMap { element: id, local };
            let level = mesh.node(id).level;
            for key in map.free_dofs() {
                let i = index[&key];
                support[i].push(id);
                dof_level[i] = dof_level[i].max(level);
            }
            element_maps.insert(id, map);
        }

        Ok(DofMap {
            order,
            free,
            index,
            element_maps,
            raw_keys: raw,
            constraints,
            dirichlet,
            points,
            support,
            dof_level,
        })
    }

    pub fn order(&self) -> BasisOrder {
        self.order
    }

    pub fn p(&self) -> usize {
        self.order.get()
    }

    /// Number of free unknowns.
    pub fn n_dofs(&self) -> usize {
        self.free.len()
    }

    /// Free DOFs in global (sorted key) order.
    pub fn free_dofs(&self) -> &[DofKey] {
        &self.free
    }

    pub fn index_of(&self, key: &DofKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn element_map(&self, id: ElementId) -> Option<&ElementDofMap> {
        self.element_maps.get(&id)
    }

    pub fn element_maps(&self) -> impl Iterator<Item = &ElementDofMap> {
        self.element_maps.values()
    }

    /// Entity DOF of each local node before constraint resolution.
    pub fn raw_local_keys(&self, id: ElementId) -> Option<&[DofKey]> {
        self.raw_keys.get(&id).map(Vec::as_slice)
    }

    /// Raw constraint rows: slave key to `(master key, coefficient)`.
    pub fn constraints(&self) -> &BTreeMap<DofKey, Vec<(DofKey, f64)>> {
        &self.constraints
    }

    pub fn dirichlet(&self) -> &BTreeMap<DofKey, f64> {
        &self.dirichlet
    }

    pub fn point(&self, key: &DofKey) -> Option<Point2> {
        self.points.get(key).copied()
    }

    /// Active elements whose basis couples the given free DOF.
    pub fn support(&self, key: &DofKey) -> &[ElementId] {
        self.index.get(key).map(|&i| self.support[i].as_slice()).unwrap_or(&[])
    }

    /// Finest level of any supporting element.
    pub fn dof_level(&self, key: &DofKey) -> Option<u32> {
        self.index.get(key).map(|&i| self.dof_level[i])
    }

    /// Expansion coefficients of an element's local basis given free values.
    pub fn local_coefficients(&self, id: ElementId, free_values: &[f64]) -> Option<Vec<f64>> {
        let map = self.element_maps.get(&id)?;
        Some(
            map.local
                .iter()
                .map(|r| r.offset + r.terms.iter().map(|(k, c)| c * free_values[self.index[k]]).sum::<f64>())
                .collect(),
        )
    }
}

fn resolve(
    key: DofKey,
    class: &BTreeMap<DofKey, Class>,
    memo: &mut HashMap<DofKey, ResolvedDof>,
    depth: usize,
) -> Result<ResolvedDof> {
    if let Some(r) = memo.get(&key) {
        return Ok(r.clone());
    }
    if depth > 64 {
        return Err(crate::error::Error::Structural(format!("constraint cycle through {key:?}")));
    }
    let resolved = match class.get(&key) {
        Some(Class::Free) => ResolvedDof { terms: vec![(key, 1.0)], offset: 0.0 },
        Some(Class::Dirichlet(v)) => ResolvedDof { terms: Vec::new(), offset: *v },
        Some(Class::Slave(row)) => {
            let mut acc: BTreeMap<DofKey, f64> = BTreeMap::new();
            let mut offset = 0.0;
            for &(master, c) in row {
                let m = resolve(master, class, memo, depth + 1)?;
                offset += c * m.offset;
                for (k, v) in m.terms {
                    *acc.entry(k).or_default() += c * v;
                }
            }
            ResolvedDof { terms: acc.into_iter().collect(), offset }
        }
        None => {
            return Err(crate::error::Error::Structural(format!(
                "constraint master {key:?} is not a DOF of any active element"
            )))
        }
    };
    memo.insert(key, resolved.clone());
    Ok(resolved)
}
