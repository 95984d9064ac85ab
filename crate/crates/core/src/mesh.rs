//! Conforming triangle meshes with newest-vertex bisection (NVB).
//!
//! Cells are stored counterclockwise. Local face `i` of a cell is the edge
//! opposite its local vertex `i`. Every cell carries a refinement-edge tag:
//! the local index of the edge opposite its newest vertex. Bisection splits
//! that edge and the new midpoint becomes the newest vertex of both children,
//! which are stored with the midpoint first and tag 0.

use std::collections::{HashMap, HashSet};

use crate::{Error, Point, Result};

/// An edge of the triangulation together with its adjacent cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Endpoint vertex indices, lower index first.
    pub vertices: [usize; 2],
    /// Adjacent cells, lower index first; `None` on the boundary.
    pub cells: (usize, Option<usize>),
    pub length: f64,
    /// Unit normal pointing from `cells.0` to `cells.1`, outward on the boundary.
    pub normal: Point,
    pub midpoint: Point,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

/// Diagnostics produced while building a mesh from raw input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    /// Cells given clockwise whose vertices were swapped to fix orientation.
    pub flipped_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    refinement_edge: Vec<u8>,
    faces: Vec<Face>,
    cell_faces: Vec<[usize; 3]>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
    centroids: Vec<Point>,
}

/// Summary returned by [`Mesh::quality`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub min_angle: f64,
    pub max_diameter: f64,
    pub cells: usize,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Local index of the longest edge, ties broken by the smallest global index
/// of the opposite vertex.
fn longest_edge(vertices: &[Point], cell: &[usize; 3]) -> u8 {
    let len = |i: usize| dist(vertices[cell[(i + 1) % 3]], vertices[cell[(i + 2) % 3]]);
    let lengths = [len(0), len(1), len(2)];
    let longest = lengths.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-12 * longest;
    (0..3)
        .filter(|&i| lengths[i] >= longest - tol)
        .min_by_key(|&i| cell[i])
        .unwrap() as u8
}

impl Mesh {
    /// Builds a mesh, tagging each cell's longest edge for refinement.
    pub fn new(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self> {
        Self::build_with_report(vertices, cells).map(|(mesh, _)| mesh)
    }

    /// Like [`Mesh::new`], also reporting cells whose orientation was fixed.
    pub fn build_with_report(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<(Self, BuildReport)> {
        let (cells, report) = Self::validate(&vertices, cells)?;
        let tags = cells.iter().map(|c| longest_edge(&vertices, c)).collect();
        Ok((Self::assemble(vertices, cells, tags)?, report))
    }

    /// Builds a mesh with explicit refinement-edge tags.
    pub fn with_refinement_edges(vertices: Vec<Point>, cells: Vec<[usize; 3]>, mut tags: Vec<u8>) -> Result<Self> {
        if tags.len() != cells.len() {
            return Err(Error::InvalidInput(format!(
                "{} refinement tags for {} cells",
                tags.len(),
                cells.len()
            )));
        }
        for (cell, &tag) in tags.iter().enumerate() {
            if tag > 2 {
                return Err(Error::InvalidRefinementEdge { cell, tag });
            }
        }
        let (cells, report) = Self::validate(&vertices, cells)?;
        for &c in &report.flipped_cells {
            // vertices 1 and 2 were swapped, so are their opposite edges
            tags[c] = match tags[c] {
                1 => 2,
                2 => 1,
                t => t,
            };
        }
        Self::assemble(vertices, cells, tags)
    }

    fn validate(vertices: &[Point], mut cells: Vec<[usize; 3]>) -> Result<(Vec<[usize; 3]>, BuildReport)> {
        let mut report = BuildReport::default();
        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        for (c, cell) in cells.iter_mut().enumerate() {
            for &v in cell.iter() {
                if v >= vertices.len() {
                    return Err(Error::InvalidVertex {
                        cell: c,
                        vertex: v,
                        count: vertices.len(),
                    });
                }
            }
            if cell[0] == cell[1] || cell[1] == cell[2] || cell[0] == cell[2] {
                return Err(Error::RepeatedVertex { cell: c });
            }
            let mut key = *cell;
            key.sort_unstable();
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicateCell { first, second: c });
            }
            seen.insert(key, c);
            let area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            let scale = dist(vertices[cell[0]], vertices[cell[1]])
                .max(dist(vertices[cell[1]], vertices[cell[2]]))
                .max(dist(vertices[cell[2]], vertices[cell[0]]));
            if area.abs() <= 1e-14 * scale * scale {
                return Err(Error::DegenerateCell(c));
            }
            if area < 0.0 {
                cell.swap(1, 2);
                report.flipped_cells.push(c);
            }
        }
        Ok((cells, report))
    }

    fn assemble(vertices: Vec<Point>, cells: Vec<[usize; 3]>, tags: Vec<u8>) -> Result<Self> {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut adjacency: Vec<Vec<usize>> = Vec::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let key = edge_key(cell[(i + 1) % 3], cell[(i + 2) % 3]);
                let f = *lookup.entry(key).or_insert_with(|| {
                    adjacency.push(Vec::new());
                    adjacency.len() - 1
                });
                adjacency[f].push(c);
                if adjacency[f].len() > 2 {
                    return Err(Error::NonManifoldFace(key.0, key.1));
                }
                *slot = f;
            }
            cell_faces.push(local);
        }
        let mut keys = vec![(0, 0); adjacency.len()];
        for (key, &f) in &lookup {
            keys[f] = *key;
        }

        let areas: Vec<f64> = cells
            .iter()
            .map(|c| signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]))
            .collect();
        let diameters = cells
            .iter()
            .map(|c| {
                dist(vertices[c[0]], vertices[c[1]])
                    .max(dist(vertices[c[1]], vertices[c[2]]))
                    .max(dist(vertices[c[2]], vertices[c[0]]))
            })
            .collect();
        let centroids: Vec<Point> = cells
            .iter()
            .map(|c| {
                let (a, b, d) = (vertices[c[0]], vertices[c[1]], vertices[c[2]]);
                [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
            })
            .collect();

        let faces = adjacency
            .iter()
            .zip(&keys)
            .map(|(adj, &(a, b))| {
                let (pa, pb) = (vertices[a], vertices[b]);
                let length = dist(pa, pb);
                let midpoint = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                let mut normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                let first = adj[0].min(*adj.last().unwrap());
                let second = if adj.len() == 2 { Some(adj[0].max(adj[1])) } else { None };
                // orient away from the first cell
                let to_mid = sub(midpoint, centroids[first]);
                if normal[0] * to_mid[0] + normal[1] * to_mid[1] < 0.0 {
                    normal = [-normal[0], -normal[1]];
                }
                Face {
                    vertices: [a, b],
                    cells: (first, second),
                    length,
                    normal,
                    midpoint,
                }
            })
            .collect();

        Ok(Self {
            vertices,
            cells,
            refinement_edge: tags,
            faces,
            cell_faces,
            areas,
            diameters,
            centroids,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    /// Global face indices of a cell; entry `i` is the face opposite vertex `i`.
    pub fn cell_faces(&self, cell: usize) -> [usize; 3] {
        self.cell_faces[cell]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn area(&self, cell: usize) -> f64 {
        self.areas[cell]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn diameter(&self, cell: usize) -> f64 {
        self.diameters[cell]
    }

    pub fn centroid(&self, cell: usize) -> Point {
        self.centroids[cell]
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| f.is_boundary())
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    /// Flags vertices lying on the boundary.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for (_, f) in self.boundary_faces() {
            flags[f.vertices[0]] = true;
            flags[f.vertices[1]] = true;
        }
        flags
    }

    /// For every vertex, the cells containing it (ascending).
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v].push(c);
            }
        }
        out
    }

    /// For every vertex, the faces having it as an endpoint (ascending).
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            out[face.vertices[0]].push(f);
            out[face.vertices[1]].push(f);
        }
        out
    }

    /// Cells sharing at least one vertex with each cell, the cell included.
    pub fn vertex_patches(&self) -> Vec<Vec<usize>> {
        let vc = self.vertex_cells();
        self.cells
            .iter()
            .map(|cell| {
                let mut patch: Vec<usize> = cell.iter().flat_map(|&v| vc[v].iter().copied()).collect();
                patch.sort_unstable();
                patch.dedup();
                patch
            })
            .collect()
    }

    /// Minimum interior angle, maximum cell diameter and cell count.
    pub fn quality(&self) -> MeshQuality {
        let mut min_angle = f64::INFINITY;
        for c in 0..self.num_cells() {
            let p = self.cell_points(c);
            for i in 0..3 {
                let u = sub(p[(i + 1) % 3], p[i]);
                let v = sub(p[(i + 2) % 3], p[i]);
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        MeshQuality {
            min_angle,
            max_diameter: self.diameters.iter().cloned().fold(0.0, f64::max),
            cells: self.num_cells(),
        }
    }

    /// Vertices lying in the relative interior of some face; empty iff the
    /// mesh has no hanging nodes.
    pub fn hanging_vertices(&self) -> Vec<usize> {
        if self.faces.is_empty() {
            return Vec::new();
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let n = (self.faces.len() as f64).sqrt().ceil().max(1.0) as usize;
        let extent = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
        let bin = |p: f64, d: usize| (((p - lo[d]) / extent[d] * n as f64) as usize).min(n - 1);
        let mut grid: Vec<Vec<usize>> = vec![Vec::new(); n * n];
        for (f, face) in self.faces.iter().enumerate() {
            let (a, b) = (self.vertices[face.vertices[0]], self.vertices[face.vertices[1]]);
            for i in bin(a[0].min(b[0]), 0)..=bin(a[0].max(b[0]), 0) {
                for j in bin(a[1].min(b[1]), 1)..=bin(a[1].max(b[1]), 1) {
                    grid[i * n + j].push(f);
                }
            }
        }
        let mut hanging = Vec::new();
        for (v, p) in self.vertices.iter().enumerate() {
            let bucket = &grid[bin(p[0], 0) * n + bin(p[1], 1)];
            let on_face = bucket.iter().any(|&f| {
                let face = &self.faces[f];
                if face.vertices.contains(&v) {
                    return false;
                }
                let (a, b) = (self.vertices[face.vertices[0]], self.vertices[face.vertices[1]]);
                let ab = sub(b, a);
                let ap = sub(*p, a);
                let len2 = ab[0] * ab[0] + ab[1] * ab[1];
                let t = (ap[0] * ab[0] + ap[1] * ab[1]) / len2;
                let cross = (ab[0] * ap[1] - ab[1] * ap[0]).abs() / len2.sqrt();
                t > 1e-12 && t < 1.0 - 1e-12 && cross <= 1e-12 * len2.sqrt()
            });
            if on_face {
                hanging.push(v);
            }
        }
        hanging
    }

    /// Checks the structural invariants: positive orientation, at most two
    /// cells per face and no hanging vertices.
    pub fn is_conforming(&self) -> bool {
        self.areas.iter().all(|&a| a > 0.0) && self.hanging_vertices().is_empty()
    }

    /// Newest-vertex bisection of the marked cells plus conformity closure.
    pub fn refine_nvb(&self, marked: &[usize]) -> Result<Mesh> {
        self.refine_nvb_with_parents(marked).map(|(mesh, _)| mesh)
    }

    /// Like [`Mesh::refine_nvb`], also returning for every new cell the index
    /// of its ancestor in `self`.
    pub fn refine_nvb_with_parents(&self, marked: &[usize]) -> Result<(Mesh, Vec<usize>)> {
        let mut flags = vec![false; self.num_cells()];
        for &c in marked {
            if c >= self.num_cells() {
                return Err(Error::InvalidCell {
                    index: c,
                    count: self.num_cells(),
                });
            }
            flags[c] = true;
        }
        let mut vertices = self.vertices.clone();
        let mut cells = self.cells.clone();
        let mut tags = self.refinement_edge.clone();
        let mut parents: Vec<usize> = (0..cells.len()).collect();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();

        loop {
            let pending: Vec<usize> = flags.iter().enumerate().filter_map(|(c, &f)| f.then_some(c)).collect();
            if pending.is_empty() {
                break;
            }
            for &c in &pending {
                let t = tags[c] as usize;
                let cell = cells[c];
                let (p, q, r) = (cell[t], cell[(t + 1) % 3], cell[(t + 2) % 3]);
                let key = edge_key(q, r);
                let m = *midpoints.entry(key).or_insert_with(|| {
                    let (a, b) = (vertices[q], vertices[r]);
                    vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                    vertices.len() - 1
                });
                cells[c] = [m, p, q];
                tags[c] = 0;
                cells.push([m, r, p]);
                tags.push(0);
                parents.push(parents[c]);
            }
            // closure: any cell still owning a split edge has a hanging node
            flags = cells
                .iter()
                .map(|cell| (0..3).any(|i| midpoints.contains_key(&edge_key(cell[(i + 1) % 3], cell[(i + 2) % 3]))))
                .collect();
        }
        let mesh = Self::assemble(vertices, cells, tags)?;
        Ok((mesh, parents))
    }

    /// Bisects every cell twice, so each parent is split into four children.
    pub fn uniform_refine(&self) -> Result<Mesh> {
        self.uniform_refine_with_parents().map(|(mesh, _)| mesh)
    }

    pub fn uniform_refine_with_parents(&self) -> Result<(Mesh, Vec<usize>)> {
        let all: Vec<usize> = (0..self.num_cells()).collect();
        let (once, p1) = self.refine_nvb_with_parents(&all)?;
        let all: Vec<usize> = (0..once.num_cells()).collect();
        let (twice, p2) = once.refine_nvb_with_parents(&all)?;
        let parents = p2.into_iter().map(|p| p1[p]).collect();
        Ok((twice, parents))
    }

    /// Checks that every input vertex survives with an unchanged index.
    pub fn preserves_vertices_of(&self, parent: &Mesh) -> bool {
        parent.vertices.len() <= self.vertices.len() && parent.vertices.iter().zip(&self.vertices).all(|(a, b)| a == b)
    }

    /// Distinct cells by unordered vertex set; used to check duplicates.
    pub fn has_duplicate_cells(&self) -> bool {
        let mut seen = HashSet::new();
        self.cells.iter().any(|c| {
            let mut k = *c;
            k.sort_unstable();
            !seen.insert(k)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn reference_triangle() -> Mesh {
        Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    fn two_cell_square() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_cell_has_three_boundary_faces() {
        let m = reference_triangle();
        assert_eq!(m.num_faces(), 3);
        assert_eq!(m.boundary_faces().count(), 3);
        assert_eq!(m.num_interior_faces(), 0);
        assert!((m.area(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn square_has_one_interior_face() {
        let m = two_cell_square();
        assert_eq!(m.num_interior_faces(), 1);
        assert_eq!(m.boundary_faces().count(), 4);
        // both cells tag the shared diagonal
        for c in 0..2 {
            let f = m.cell_faces(c)[m.refinement_edges()[c] as usize];
            assert_eq!(m.faces()[f].vertices, [0, 2]);
        }
        let diag = m.faces().iter().find(|f| !f.is_boundary()).unwrap();
        assert_eq!(diag.cells, (0, Some(1)));
        // normal points from cell 0 (below the diagonal) into cell 1
        assert!(diag.normal[1] > 0.0 && diag.normal[0] < 0.0);
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = two_cell_square();
        for (_, f) in m.boundary_faces() {
            let c = m.centroid(f.cells.0);
            let d = sub(f.midpoint, c);
            assert!(d[0] * f.normal[0] + d[1] * f.normal[1] > 0.0);
        }
    }

    #[test]
    fn clockwise_cells_are_flipped_and_reported() {
        let (m, report) = Mesh::build_with_report(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap();
        assert_eq!(report.flipped_cells, vec![0]);
        assert!(m.area(0) > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 2], [2, 1, 0]]),
            Err(Error::DuplicateCell { first: 0, second: 1 })
        ));
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 7]]),
            Err(Error::InvalidVertex { .. })
        ));
        assert!(matches!(
            Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]),
            Err(Error::DegenerateCell(0))
        ));
        // three triangles on the edge (1, 2)
        let v5 = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(
            Mesh::new(v5, vec![[0, 1, 2], [1, 3, 2], [1, 4, 2]]),
            Err(Error::NonManifoldFace(1, 2))
        ));
    }

    #[test]
    fn bisecting_single_triangle() {
        let m = reference_triangle();
        // longest edge is the hypotenuse, opposite vertex 0
        assert_eq!(m.refinement_edges(), &[0]);
        let r = m.refine_nvb(&[0]).unwrap();
        assert_eq!(r.num_cells(), 2);
        assert_eq!(r.vertices()[3], [0.5, 0.5]);
        assert!(r.cells().iter().all(|c| c[0] == 3));
        assert!(r.is_conforming());
        assert!(r.preserves_vertices_of(&m));
    }

    #[test]
    fn bisecting_both_square_cells() {
        let r = two_cell_square().refine_nvb(&[0, 1]).unwrap();
        assert_eq!(r.num_cells(), 4);
        assert_eq!(r.num_vertices(), 5);
        assert_eq!(r.vertices()[4], [0.5, 0.5]);
        assert!(r.is_conforming());
    }

    #[test]
    fn closure_bisects_neighbour() {
        let r = two_cell_square().refine_nvb(&[0]).unwrap();
        assert_eq!(r.num_cells(), 4);
        assert_eq!(r.num_vertices(), 5);
        assert!(r.is_conforming());
    }

    #[test]
    fn closure_propagates_through_chain() {
        // refine one corner cell repeatedly; closure must keep conformity
        let mut m = two_cell_square();
        for _ in 0..12 {
            let target = (0..m.num_cells())
                .find(|&c| m.cells()[c].iter().any(|&v| m.vertices()[v] == [0.0, 0.0]))
                .unwrap();
            m = m.refine_nvb(&[target]).unwrap();
            assert!(m.is_conforming());
            assert!(!m.has_duplicate_cells());
        }
    }

    #[test]
    fn uniform_refinement_counts_and_area() {
        let m = reference_triangle().uniform_refine().unwrap();
        assert_eq!(m.num_cells(), 4);
        let sq = two_cell_square();
        let r = sq.uniform_refine().unwrap();
        assert_eq!(r.num_cells(), 8);
        assert!(r.is_conforming());
        assert!((r.total_area() - sq.total_area()).abs() <= 1e-14 * sq.total_area());
    }

    #[test]
    fn uniform_parents_map_four_children() {
        let sq = two_cell_square();
        let (r, parents) = sq.uniform_refine_with_parents().unwrap();
        for p in 0..2 {
            let kids: Vec<_> = (0..r.num_cells()).filter(|&c| parents[c] == p).collect();
            assert_eq!(kids.len(), 4);
            let area: f64 = kids.iter().map(|&c| r.area(c)).sum();
            assert!((area - sq.area(p)).abs() < 1e-15);
        }
    }

    #[test]
    fn quality_of_simple_triangles() {
        let q = reference_triangle().quality();
        assert!((q.min_angle - PI / 4.0).abs() < 1e-14);
        assert_eq!(q.cells, 1);
        let eq = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]], vec![[0, 1, 2]]).unwrap();
        assert!((eq.quality().min_angle - PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn min_angle_bounded_under_repeated_local_refinement() {
        // a skewed mesh whose similarity classes change under bisection
        let mut m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.1], [0.3, 0.8], [1.2, 1.0], [-0.4, 0.6]],
            vec![[0, 1, 2], [1, 3, 2], [0, 2, 4]],
        )
        .unwrap();
        let initial = m.quality().min_angle;
        let mut running = Vec::new();
        for round in 0..40 {
            let target = [0.31, 0.42];
            let marked: Vec<usize> = (0..m.num_cells())
                .filter(|&c| {
                    let x = m.centroid(c);
                    (x[0] - target[0]).hypot(x[1] - target[1]) < 2.0 * m.diameter(c)
                })
                .collect();
            m = m.refine_nvb(&marked).unwrap();
            let q = m.quality().min_angle;
            assert!(q >= 0.5 * initial, "round {round}: {q} < {initial}/2");
            running.push(q);
        }
        assert!(m.is_conforming());
        let mut cumulative = running.clone();
        for i in 1..cumulative.len() {
            cumulative[i] = cumulative[i].min(cumulative[i - 1]);
        }
        // only finitely many similarity classes: the worst angle is reached early
        assert!(cumulative[4..].iter().all(|&q| q >= cumulative[4] - 1e-9));
    }

    #[test]
    fn refinement_is_deterministic() {
        let m = two_cell_square().uniform_refine().unwrap();
        let a = m.refine_nvb(&[1, 5, 6]).unwrap();
        let b = m.refine_nvb(&[6, 1, 5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_marked_index() {
        assert!(matches!(
            two_cell_square().refine_nvb(&[2]),
            Err(Error::InvalidCell { index: 2, count: 2 })
        ));
    }
}
