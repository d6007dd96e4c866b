//! Structured quadrilateral grid over the chamber interior and its labelling.
//!
//! Nodes are numbered row-major from the bottom-left corner,
//! `node = j * (nx + 1) + i`, elements likewise `elem = j * nx + i`.
//! Element nodes run counter-clockwise starting at the bottom-left corner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    boundary: Vec<BoundaryEdge>,
}

impl Mesh {
    /// Uniform `nx` × `ny` grid on `[0, lx] × [0, ly]`.
    pub fn build_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidMesh(format!(
                "element counts must be at least 2, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        let stride = nx + 1;
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary.push(BoundaryEdge {
                nodes: [i, i + 1],
                side: Side::Bottom,
            });
        }
        for j in 0..ny {
            boundary.push(BoundaryEdge {
                nodes: [j * stride + nx, (j + 1) * stride + nx],
                side: Side::Right,
            });
        }
        for i in (0..nx).rev() {
            boundary.push(BoundaryEdge {
                nodes: [ny * stride + i + 1, ny * stride + i],
                side: Side::Top,
            });
        }
        for j in (0..ny).rev() {
            boundary.push(BoundaryEdge {
                nodes: [(j + 1) * stride, j * stride],
                side: Side::Left,
            });
        }
        Ok(Mesh {
            nx,
            ny,
            lx,
            ly,
            boundary,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_elems(&self) -> usize {
        self.nx * self.ny
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn elem_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn elem_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Grid column and row of an element.
    pub fn elem_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % (self.nx + 1), n / (self.nx + 1))
    }

    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(n);
        [i as f64 * self.dx(), j as f64 * self.dy()]
    }

    pub fn elem_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.elem_ij(e);
        let n0 = self.node_index(i, j);
        let n3 = self.node_index(i, j + 1);
        [n0, n0 + 1, n3 + 1, n3]
    }

    pub fn elem_centroid(&self, e: usize) -> [f64; 2] {
        let (i, j) = self.elem_ij(e);
        [(i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy()]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Elements sharing a face with `e`, in (left, right, bottom, top) order.
    pub fn elem_neighbors(&self, e: usize) -> [Option<usize>; 4] {
        let (i, j) = self.elem_ij(e);
        [
            (i > 0).then(|| e - 1),
            (i + 1 < self.nx).then(|| e + 1),
            (j > 0).then(|| e - self.nx),
            (j + 1 < self.ny).then(|| e + self.nx),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Design,
    FixedSolid,
    FixedFluid,
}

/// Thermal condition applied along a boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeCondition {
    /// Dirichlet at the hot-wall temperature.
    Hot,
    /// Dirichlet at the ambient temperature.
    Cold,
    /// Homogeneous Neumann.
    Insulated,
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]` carrying a region label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub region: Region,
}

impl RegionRect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SideConditions {
    pub bottom: EdgeCondition,
    pub right: EdgeCondition,
    pub top: EdgeCondition,
    pub left: EdgeCondition,
}

impl Default for SideConditions {
    fn default() -> Self {
        SideConditions::uniform(EdgeCondition::Hot)
    }
}

impl SideConditions {
    pub fn uniform(c: EdgeCondition) -> Self {
        SideConditions {
            bottom: c,
            right: c,
            top: c,
            left: c,
        }
    }

    pub fn get(&self, side: Side) -> EdgeCondition {
        match side {
            Side::Bottom => self.bottom,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Left => self.left,
        }
    }
}

/// Rectangles (later entries win where they overlap) plus per-side conditions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySpec {
    pub rects: Vec<RegionRect>,
    pub sides: SideConditions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionMap {
    elem: Vec<Region>,
    edge: Vec<EdgeCondition>,
}

impl RegionMap {
    /// Labels every element by centroid-in-rectangle membership.
    pub fn classify(mesh: &Mesh, geometry: &GeometrySpec) -> Result<RegionMap> {
        for (idx, r) in geometry.rects.iter().enumerate() {
            let ok = [r.x0, r.y0, r.x1, r.y1].iter().all(|v| v.is_finite())
                && r.x0 <= r.x1
                && r.y0 <= r.y1
                && r.x0 >= 0.0
                && r.y0 >= 0.0
                && r.x1 <= mesh.lx()
                && r.y1 <= mesh.ly();
            if !ok {
                return Err(Error::InvalidGeometry(format!(
                    "rectangle {idx} [{}, {}]x[{}, {}] is not inside [0, {}]x[0, {}]",
                    r.x0,
                    r.x1,
                    r.y0,
                    r.y1,
                    mesh.lx(),
                    mesh.ly()
                )));
            }
        }
        let elem: Vec<Region> = (0..mesh.n_elems())
            .map(|e| {
                let c = mesh.elem_centroid(e);
                geometry
                    .rects
                    .iter()
                    .rev()
                    .find(|r| r.contains(c))
                    .map_or(Region::Design, |r| r.region)
            })
            .collect();
        if !elem.contains(&Region::Design) {
            return Err(Error::InvalidGeometry(
                "geometry leaves zero design elements".into(),
            ));
        }
        let edge = mesh
            .boundary_edges()
            .iter()
            .map(|b| geometry.sides.get(b.side))
            .collect();
        Ok(RegionMap { elem, edge })
    }

    /// Every element in the design region, every wall hot.
    pub fn all_design(mesh: &Mesh) -> RegionMap {
        RegionMap {
            elem: vec![Region::Design; mesh.n_elems()],
            edge: vec![EdgeCondition::Hot; mesh.boundary_edges().len()],
        }
    }

    pub fn with_sides(mut self, mesh: &Mesh, sides: SideConditions) -> RegionMap {
        self.edge = mesh
            .boundary_edges()
            .iter()
            .map(|b| sides.get(b.side))
            .collect();
        self
    }

    pub fn region(&self, e: usize) -> Region {
        self.elem[e]
    }

    pub fn regions(&self) -> &[Region] {
        &self.elem
    }

    pub fn edge_conditions(&self) -> &[EdgeCondition] {
        &self.edge
    }

    pub fn count(&self, region: Region) -> usize {
        self.elem.iter().filter(|&&r| r == region).count()
    }

    /// Dirichlet nodes with their condition; a node touching both a hot and
    /// a cold edge is hot.
    pub fn dirichlet_nodes(&self, mesh: &Mesh) -> Vec<(usize, EdgeCondition)> {
        let mut tag: Vec<Option<EdgeCondition>> = vec![None; mesh.n_nodes()];
        for (edge, cond) in mesh.boundary_edges().iter().zip(&self.edge) {
            for &n in &edge.nodes {
                tag[n] = match (tag[n], cond) {
                    (_, EdgeCondition::Insulated) => tag[n],
                    (Some(EdgeCondition::Hot), _) => Some(EdgeCondition::Hot),
                    (_, c) => Some(*c),
                };
            }
        }
        tag.into_iter()
            .enumerate()
            .filter_map(|(n, t)| t.map(|t| (n, t)))
            .collect()
    }
}
