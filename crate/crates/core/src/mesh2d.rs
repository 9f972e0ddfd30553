//! Quadrilateral meshes stored as forests of refinement trees.
//!
//! Every element is an axis-aligned rectangle. Refinement splits an element
//! into four congruent quadrants; children are created in the order SW, SE,
//! NW, NE and receive sequential ids, so two meshes produced by the same
//! sequence of refinements are structurally identical.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};

pub type ElementId = usize;

/// Relative snapping tolerance for geometric keys.
const SNAP_RELATIVE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// Integer lattice coordinates of a snapped point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SnapKey(pub i64, pub i64);

/// Geometric edge identity: the two snapped endpoints, sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey(pub SnapKey, pub SnapKey);

impl EdgeKey {
    pub fn new(a: SnapKey, b: SnapKey) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }
}

/// Element sides, in the order used for edge entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    Bottom = 0,
    Right = 1,
    Top = 2,
    Left = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementNode {
    pub id: ElementId,
    pub level: u32,
    /// Lower-left corner.
    pub min: Point2,
    /// Upper-right corner.
    pub max: Point2,
    pub parent: Option<ElementId>,
    /// SW, SE, NW, NE.
    pub children: Option<[ElementId; 4]>,
}

impl ElementNode {
    pub fn active(&self) -> bool {
        self.children.is_none()
    }

    /// Corners in counterclockwise order: SW, SE, NE, NW.
    pub fn corners(&self) -> [Point2; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point2 {
        self.min.midpoint(&self.max)
    }

    /// Endpoints of a side, ordered by increasing coordinate along it.
    pub fn side_endpoints(&self, side: Side) -> (Point2, Point2) {
        let [sw, se, ne, nw] = self.corners();
        match side {
            Side::Bottom => (sw, se),
            Side::Right => (se, ne),
            Side::Top => (nw, ne),
            Side::Left => (sw, nw),
        }
    }

    pub fn closure_contains(&self, p: &Point2, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }
}

/// One nonconforming interface: a coarse element edge and the two half-edges
/// of its finer neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct HangingEdge {
    pub coarse: EdgeKey,
    pub fine: [EdgeKey; 2],
    pub coarse_element: ElementId,
    pub coarse_side: Side,
    pub fine_elements: [ElementId; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefineStats {
    /// Elements split because they touch a singularity.
    pub marked: usize,
    /// Extra splits needed to restore 1-irregularity.
    pub closure: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<ElementNode>,
    roots: Vec<ElementId>,
    singularities: Vec<Point2>,
    refinement_count: usize,
    /// Edges of the initial grid that are not shared by two roots.
    boundary: Vec<(Point2, Point2)>,
    snap_tol: f64,
}

impl Mesh {
    /// Builds a mesh from initial rectangles `(min, max)`. The rectangles must
    /// form a conforming grid.
    pub fn from_rectangles(rects: &[(Point2, Point2)], singularities: &[Point2]) -> Result<Mesh> {
        if rects.is_empty() {
            return Err(Error::InvalidGeometry("no initial elements".into()));
        }
        let mut nodes = Vec::with_capacity(rects.len());
        for (id, &(min, max)) in rects.iter().enumerate() {
            if !min.is_finite() || !max.is_finite() {
                return Err(Error::InvalidGeometry(format!("element {id} has non-finite corners")));
            }
            if !(max.x > min.x && max.y > min.y) {
                return Err(Error::InvalidGeometry(format!("element {id} has non-positive area")));
            }
            nodes.push(ElementNode { id, level: 0, min, max, parent: None, children: None });
        }
        let (mut lo, mut hi) = (nodes[0].min, nodes[0].max);
        for n in &nodes {
            lo = Point2::new(lo.x.min(n.min.x), lo.y.min(n.min.y));
            hi = Point2::new(hi.x.max(n.max.x), hi.y.max(n.max.y));
        }
        let snap_tol = SNAP_RELATIVE * lo.distance(&hi);

        let mut mesh = Mesh {
            roots: (0..nodes.len()).collect(),
            nodes,
            singularities: Vec::new(),
            refinement_count: 0,
            boundary: Vec::new(),
            snap_tol,
        };

        let mut edge_count: HashMap<EdgeKey, usize> = HashMap::new();
        for n in &mesh.nodes {
            for side in Side::ALL {
                *edge_count.entry(mesh.edge_key(n, side)).or_default() += 1;
            }
        }
        let mut boundary = Vec::new();
        for n in &mesh.nodes {
            for side in Side::ALL {
                if edge_count[&mesh.edge_key(n, side)] == 1 {
                    boundary.push(n.side_endpoints(side));
                }
            }
        }
        mesh.boundary = boundary;

        for s in singularities {
            if !s.is_finite() || !mesh.in_closed_domain(s) {
                return Err(Error::SingularityOutsideDomain { x: s.x, y: s.y });
            }
            mesh.singularities.push(*s);
        }
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[ElementNode] {
        &self.nodes
    }

    pub fn node(&self, id: ElementId) -> &ElementNode {
        &self.nodes[id]
    }

    pub fn roots(&self) -> &[ElementId] {
        &self.roots
    }

    pub fn singularities(&self) -> &[Point2] {
        &self.singularities
    }

    pub fn refinement_count(&self) -> usize {
        self.refinement_count
    }

    pub fn snap_tol(&self) -> f64 {
        self.snap_tol
    }

    pub fn snap(&self, p: &Point2) -> SnapKey {
        SnapKey((p.x / self.snap_tol).round() as i64, (p.y / self.snap_tol).round() as i64)
    }

    pub fn edge_key(&self, node: &ElementNode, side: Side) -> EdgeKey {
        let (a, b) = node.side_endpoints(side);
        EdgeKey::new(self.snap(&a), self.snap(&b))
    }

    pub fn domain_area(&self) -> f64 {
        self.roots.iter().map(|&r| self.nodes[r].area()).sum()
    }

    pub fn active_area(&self) -> f64 {
        self.nodes.iter().filter(|n| n.active()).map(ElementNode::area).sum()
    }

    pub fn in_closed_domain(&self, p: &Point2) -> bool {
        self.roots.iter().any(|&r| self.nodes[r].closure_contains(p, self.snap_tol))
    }

    /// True when `p` lies on the boundary of the domain.
    pub fn on_boundary(&self, p: &Point2) -> bool {
        self.boundary.iter().any(|(a, b)| point_on_segment(p, a, b, self.snap_tol))
    }

    /// True when the whole segment `[a, b]` lies on the domain boundary.
    pub fn segment_on_boundary(&self, a: &Point2, b: &Point2) -> bool {
        self.boundary.iter().any(|(s0, s1)| {
            point_on_segment(a, s0, s1, self.snap_tol) && point_on_segment(b, s0, s1, self.snap_tol)
        })
    }

    /// Active elements ordered by `(level, id)`.
    pub fn active_elements(&self) -> Vec<ElementId> {
        let mut ids: Vec<ElementId> =
            self.nodes.iter().filter(|n| n.active()).map(|n| n.id).collect();
        ids.sort_by_key(|&id| (self.nodes[id].level, id));
        ids
    }

    pub fn max_level(&self) -> u32 {
        self.nodes.iter().filter(|n| n.active()).map(|n| n.level).max().unwrap_or(0)
    }

    /// Active elements whose closure contains `p`.
    pub fn elements_touching(&self, p: &Point2) -> Vec<ElementId> {
        self.nodes
            .iter()
            .filter(|n| n.active() && n.closure_contains(p, self.snap_tol))
            .map(|n| n.id)
            .collect()
    }

    /// Ancestor of `id` at `level` (or `id` itself when already at or above it).
    pub fn ancestor_at_level(&self, mut id: ElementId, level: u32) -> ElementId {
        while self.nodes[id].level > level {
            id = self.nodes[id].parent.expect("non-root element has a parent");
        }
        id
    }

    /// Splits an active element into four children. Does not restore
    /// 1-irregularity; see [`Mesh::enforce_one_irregularity`].
    pub fn refine_element(&mut self, id: ElementId) -> Result<[ElementId; 4]> {
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| Error::Structural(format!("element {id} does not exist")))?;
        if !node.active() {
            return Err(Error::Structural(format!("element {id} is already refined")));
        }
        let (min, max, level) = (node.min, node.max, node.level);
        let mid = min.midpoint(&max);
        let quads = [
            (min, mid),
            (Point2::new(mid.x, min.y), Point2::new(max.x, mid.y)),
            (Point2::new(min.x, mid.y), Point2::new(mid.x, max.y)),
            (mid, max),
        ];
        let first = self.nodes.len();
        let children = [first, first + 1, first + 2, first + 3];
        for (k, (cmin, cmax)) in quads.into_iter().enumerate() {
            self.nodes.push(ElementNode {
                id: first + k,
                level: level + 1,
                min: cmin,
                max: cmax,
                parent: Some(id),
                children: None,
            });
        }
        self.nodes[id].children = Some(children);
        Ok(children)
    }

    /// Refines every active element touching a singularity, then restores
    /// 1-irregularity. Returns a new mesh.
    pub fn refine_towards_singularities(&self) -> Mesh {
        self.refine_towards_singularities_with_stats().0
    }

    pub fn refine_towards_singularities_with_stats(&self) -> (Mesh, RefineStats) {
        let mut mesh = self.clone();
        let mut marked: BTreeSet<ElementId> = BTreeSet::new();
        for s in &self.singularities {
            marked.extend(self.elements_touching(s));
        }
        for &id in &marked {
            mesh.refine_element(id).expect("marked elements are active");
        }
        let closure = mesh.enforce_one_irregularity();
        mesh.refinement_count += 1;
        (mesh, RefineStats { marked: marked.len(), closure })
    }

    /// Repeatedly refines elements that have a neighbour more than one level
    /// finer. Returns the number of extra refinements.
    pub fn enforce_one_irregularity(&mut self) -> usize {
        let mut total = 0;
        loop {
            let offenders = self.irregular_elements();
            if offenders.is_empty() {
                return total;
            }
            for id in offenders {
                self.refine_element(id).expect("offenders are active");
                total += 1;
            }
        }
    }

    /// Active elements with an active vertex inside one of their edges at a
    /// position other than the edge midpoint.
    pub fn irregular_elements(&self) -> Vec<ElementId> {
        let index = VertexIndex::new(self);
        let mut out = Vec::new();
        for n in self.nodes.iter().filter(|n| n.active()) {
            let bad = Side::ALL.iter().any(|&side| {
                let (a, b) = n.side_endpoints(side);
                let (ka, kb, km) = (self.snap(&a), self.snap(&b), self.snap(&a.midpoint(&b)));
                index.interior_vertices(ka, kb).into_iter().any(|v| v != km)
            });
            if bad {
                out.push(n.id);
            }
        }
        out
    }

    pub fn check_one_irregularity(&self) -> Result<()> {
        match self.irregular_elements().first() {
            None => Ok(()),
            Some(&element) => Err(Error::Irregular {
                element,
                detail: "a neighbour across an edge is at least two levels finer".into(),
            }),
        }
    }

    /// Pairs every coarse active edge that carries a hanging node with the two
    /// half-edges of its finer neighbours.
    pub fn hanging_edges(&self) -> Result<Vec<HangingEdge>> {
        let mut edges: HashMap<EdgeKey, Vec<ElementId>> = HashMap::new();
        for n in self.nodes.iter().filter(|n| n.active()) {
            for side in Side::ALL {
                edges.entry(self.edge_key(n, side)).or_default().push(n.id);
            }
        }

        let mut hanging = Vec::new();
        let mut covered: BTreeSet<EdgeKey> = BTreeSet::new();
        for n in self.nodes.iter().filter(|n| n.active()) {
            for side in Side::ALL {
                let key = self.edge_key(n, side);
                if edges[&key].len() > 1 {
                    continue;
                }
                let (a, b) = n.side_endpoints(side);
                let m = a.midpoint(&b);
                let lower = EdgeKey::new(self.snap(&a), self.snap(&m));
                let upper = EdgeKey::new(self.snap(&m), self.snap(&b));
                if let (Some(lo), Some(up)) = (edges.get(&lower), edges.get(&upper)) {
                    if lo.len() == 1 && up.len() == 1 {
                        covered.insert(lower);
                        covered.insert(upper);
                        hanging.push(HangingEdge {
                            coarse: key,
                            fine: [lower, upper],
                            coarse_element: n.id,
                            coarse_side: side,
                            fine_elements: [lo[0], up[0]],
                        });
                    }
                }
            }
        }

        for n in self.nodes.iter().filter(|n| n.active()) {
            for side in Side::ALL {
                let key = self.edge_key(n, side);
                if edges[&key].len() > 2 {
                    return Err(Error::Structural(format!(
                        "edge of element {} is shared by {} elements",
                        n.id,
                        edges[&key].len()
                    )));
                }
                if edges[&key].len() == 2 || covered.contains(&key) {
                    continue;
                }
                if hanging.iter().any(|h| h.coarse == key) {
                    continue;
                }
                let (a, b) = n.side_endpoints(side);
                if self.segment_on_boundary(&a, &b) {
                    continue;
                }
                return Err(Error::Irregular {
                    element: n.id,
                    detail: format!("{side:?} edge matches no neighbour edge or half-edge"),
                });
            }
        }
        hanging.sort_by_key(|h| (h.coarse_element, h.coarse_side));
        Ok(hanging)
    }
}

/// Active vertices indexed along horizontal and vertical lines for edge
/// containment queries.
struct VertexIndex {
    by_row: BTreeSet<(i64, i64)>,
    by_col: BTreeSet<(i64, i64)>,
}

impl VertexIndex {
    fn new(mesh: &Mesh) -> Self {
        let mut by_row = BTreeSet::new();
        let mut by_col = BTreeSet::new();
        for n in mesh.nodes.iter().filter(|n| n.active()) {
            for c in n.corners() {
                let k = mesh.snap(&c);
                by_row.insert((k.1, k.0));
                by_col.insert((k.0, k.1));
            }
        }
        Self { by_row, by_col }
    }

    /// Vertices strictly inside the axis-aligned segment `a`-`b`.
    fn interior_vertices(&self, a: SnapKey, b: SnapKey) -> Vec<SnapKey> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a.1 == b.1 {
            let lo = (a.1, a.0 + 1);
            let hi = (a.1, b.0 - 1);
            if lo > hi {
                return Vec::new();
            }
            self.by_row.range(lo..=hi).map(|&(y, x)| SnapKey(x, y)).collect()
        } else {
            let lo = (a.0, a.1 + 1);
            let hi = (a.0, b.1 - 1);
            if lo > hi {
                return Vec::new();
            }
            self.by_col.range(lo..=hi).map(|&(x, y)| SnapKey(x, y)).collect()
        }
    }
}

/// Axis-aligned segment containment with tolerance.
fn point_on_segment(p: &Point2, a: &Point2, b: &Point2, tol: f64) -> bool {
    let (xlo, xhi) = (a.x.min(b.x), a.x.max(b.x));
    let (ylo, yhi) = (a.y.min(b.y), a.y.max(b.y));
    p.x >= xlo - tol && p.x <= xhi + tol && p.y >= ylo - tol && p.y <= yhi + tol
}

/// Two side-by-side elements `[0, w/2] x [0, h]` and `[w/2, w] x [0, h]`.
pub fn new_two_element_mesh(width: f64, height: f64, singularity: Point2) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(Error::InvalidGeometry(format!(
            "domain dimensions must be positive, got {width} x {height}"
        )));
    }
    let half = 0.5 * width;
    Mesh::from_rectangles(
        &[
            (Point2::new(0.0, 0.0), Point2::new(half, height)),
            (Point2::new(half, 0.0), Point2::new(width, height)),
        ],
        &[singularity],
    )
}

/// `[-1, 1]^2` without the open quadrant `(0, 1) x (-1, 0)`, singular at the
/// reentrant corner.
pub fn new_lshape_mesh() -> Mesh {
    Mesh::from_rectangles(
        &[
            (Point2::new(-1.0, 0.0), Point2::new(0.0, 1.0)),
            (Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)),
            (Point2::new(-1.0, -1.0), Point2::new(0.0, 0.0)),
        ],
        &[Point2::new(0.0, 0.0)],
    )
    .expect("fixed L-shape geometry is valid")
}

/// Strip `[0, 4] x [0, 1]` of four unit squares with singular points at
/// `(1, 0)` and `(3, 0)`.
pub fn new_two_singularity_mesh() -> Mesh {
    let rects: Vec<_> = (0..4)
        .map(|i| (Point2::new(i as f64, 0.0), Point2::new(i as f64 + 1.0, 1.0)))
        .collect();
    Mesh::from_rectangles(&rects, &[Point2::new(1.0, 0.0), Point2::new(3.0, 0.0)])
        .expect("fixed strip geometry is valid")
}

/// Serializable element record for mesh dumps.
#[derive(Debug, Clone, Serialize)]
pub struct ElementRecord {
    pub id: ElementId,
    pub level: u32,
    pub corners: [[f64; 2]; 4],
    pub parent: Option<ElementId>,
    pub children: Vec<ElementId>,
    pub active: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshDocument {
    pub schema_version: u32,
    pub refinement_count: usize,
    pub singularities: Vec<[f64; 2]>,
    pub elements: Vec<ElementRecord>,
}

impl Mesh {
    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            schema_version: 1,
            refinement_count: self.refinement_count,
            singularities: self.singularities.iter().map(|p| [p.x, p.y]).collect(),
            elements: self
                .nodes
                .iter()
                .map(|n| ElementRecord {
                    id: n.id,
                    level: n.level,
                    corners: n.corners().map(|c| [c.x, c.y]),
                    parent: n.parent,
                    children: n.children.map(|c| c.to_vec()).unwrap_or_default(),
                    active: n.active(),
                })
                .collect(),
        }
    }

    /// Counts active elements per level.
    pub fn level_histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for n in self.nodes.iter().filter(|n| n.active()) {
            *h.entry(n.level).or_default() += 1;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radical(levels: usize) -> Mesh {
        let mut m = new_two_element_mesh(2.0, 1.0, Point2::new(1.0, 0.0)).unwrap();
        for _ in 0..levels {
            m = m.refine_towards_singularities();
        }
        m
    }

    #[test]
    fn two_element_mesh_layout() {
        let m = radical(0);
        let ids = m.active_elements();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(m.node(0).min, Point2::new(0.0, 0.0));
        assert_eq!(m.node(0).max, Point2::new(1.0, 1.0));
        assert_eq!(m.node(1).min, Point2::new(1.0, 0.0));
        assert_eq!(m.elements_touching(&Point2::new(1.0, 0.0)), vec![0, 1]);
    }

    #[test]
    fn singularity_outside_rejected() {
        let err = new_two_element_mesh(2.0, 1.0, Point2::new(3.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularityOutsideDomain { .. }));
        assert!(new_two_element_mesh(0.0, 1.0, Point2::new(0.0, 0.0)).is_err());
        assert!(new_two_element_mesh(2.0, -1.0, Point2::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn corner_singularity_touches_one_element() {
        let m = new_two_element_mesh(2.0, 1.0, Point2::new(0.0, 0.0)).unwrap();
        assert_eq!(m.elements_touching(&Point2::new(0.0, 0.0)), vec![0]);
    }

    #[test]
    fn lshape_layout() {
        let m = new_lshape_mesh();
        assert_eq!(m.active_elements().len(), 3);
        assert_eq!(m.singularities(), &[Point2::new(0.0, 0.0)]);
        assert_eq!(m.elements_touching(&Point2::new(0.0, 0.0)).len(), 3);
        assert!(m.check_one_irregularity().is_ok());
        assert!((m.domain_area() - 3.0).abs() < 1e-15);
        // Reentrant faces are boundary, the shared root edges are not.
        assert!(m.on_boundary(&Point2::new(0.5, 0.0)));
        assert!(m.on_boundary(&Point2::new(0.0, -0.5)));
        assert!(!m.on_boundary(&Point2::new(-0.5, 0.0)));
        assert!(!m.on_boundary(&Point2::new(0.0, 0.5)));
    }

    #[test]
    fn two_singularity_layout() {
        let m = new_two_singularity_mesh();
        assert_eq!(m.active_elements().len(), 4);
        assert_eq!(m.singularities().len(), 2);
        assert_eq!(m.elements_touching(&Point2::new(1.0, 0.0)), vec![0, 1]);
        assert_eq!(m.elements_touching(&Point2::new(3.0, 0.0)), vec![2, 3]);
    }

    #[test]
    fn radical_element_counts() {
        assert_eq!(radical(1).active_elements().len(), 8);
        let m2 = radical(2);
        let h = m2.level_histogram();
        assert_eq!(h.get(&1), Some(&6));
        assert_eq!(h.get(&2), Some(&8));
        let ids = m2.active_elements();
        assert!(ids[..6].iter().all(|&i| m2.node(i).level == 1));
        assert!(ids[6..].iter().all(|&i| m2.node(i).level == 2));
    }

    #[test]
    fn refinement_returns_new_value() {
        let m = radical(1);
        let before = m.clone();
        let _ = m.refine_towards_singularities();
        assert_eq!(m, before);
        assert_eq!(m.refine_towards_singularities(), m.refine_towards_singularities());
    }

    #[test]
    fn closure_is_noop_on_model_sequences() {
        for start in [
            new_two_element_mesh(2.0, 1.0, Point2::new(1.0, 0.0)).unwrap(),
            new_lshape_mesh(),
            new_two_singularity_mesh(),
        ] {
            let mut m = start;
            for _ in 0..8 {
                let (next, stats) = m.refine_towards_singularities_with_stats();
                assert_eq!(stats.closure, 0);
                m = next;
            }
        }
    }

    #[test]
    fn closure_restores_irregularity() {
        let mut m = new_two_element_mesh(2.0, 1.0, Point2::new(1.0, 0.0)).unwrap();
        let c = m.refine_element(0).unwrap();
        m.refine_element(c[1]).unwrap();
        assert_eq!(m.irregular_elements(), vec![1]);
        assert!(matches!(m.check_one_irregularity(), Err(Error::Irregular { element: 1, .. })));
        assert!(matches!(m.hanging_edges(), Err(Error::Irregular { .. })));
        assert_eq!(m.enforce_one_irregularity(), 1);
        assert!(m.check_one_irregularity().is_ok());
        assert!(m.hanging_edges().is_ok());
    }

    #[test]
    fn uniform_mesh_has_no_hanging_edges() {
        assert!(radical(1).hanging_edges().unwrap().is_empty());
        assert!(new_lshape_mesh().hanging_edges().unwrap().is_empty());
    }

    #[test]
    fn refining_an_inactive_element_fails() {
        let mut m = radical(1);
        assert!(m.refine_element(0).is_err());
        assert!(m.refine_element(10_000).is_err());
    }
}
