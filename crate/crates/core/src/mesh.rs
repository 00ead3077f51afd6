//! Conforming triangle meshes of the square `[-1,1]²`.
//!
//! Faces (edges) are numbered once and shared by their one or two adjacent
//! elements. Element `e` stores the face ids of its local edges `(0,1)`,
//! `(1,2)`, `(2,0)` in that order, which the P2 numbering in
//! [`crate::spaces`] relies on.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector2;
use thiserror::Error;

pub type Point = Vector2<f64>;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("structured mesh needs at least one subdivision per axis")]
    ZeroSubdivisions,
    #[error("element {element} has non-positive signed area {area:e}")]
    Orientation { element: usize, area: f64 },
    #[error("element {element} references vertex {vertex} but the mesh has {n_vertices} vertices")]
    VertexIndex { element: usize, vertex: usize, n_vertices: usize },
    #[error("face ({a}, {b}) is shared by more than two elements")]
    NonManifold { a: usize, b: usize },
    #[error("vertex {vertex} hangs on face ({a}, {b})")]
    HangingVertex { vertex: usize, a: usize, b: usize },
    #[error("malformed mesh file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An edge with its adjacent elements.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    /// First adjacent element; the second is `None` on the boundary.
    pub elements: (usize, Option<usize>),
    /// `max(h_Ta, h_Tb)`, or `h_Ta` on the boundary.
    pub h: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.elements.1.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    diameters: Vec<f64>,
    parents: Option<Vec<usize>>,
    level: usize,
}

impl Mesh {
    /// Builds a mesh from raw vertex and element arrays, checking orientation
    /// and conformity.
    pub fn from_parts(vertices: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self::assemble(vertices, elements, None, 0)?;
        mesh.check_hanging_vertices()?;
        Ok(mesh)
    }

    fn assemble(
        vertices: Vec<Point>,
        elements: Vec<[usize; 3]>,
        parents: Option<Vec<usize>>,
        level: usize,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut diameters = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::VertexIndex { element: e, vertex: v, n_vertices: nv });
                }
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(&a, &b, &c);
            if !(area > 0.0) {
                return Err(MeshError::Orientation { element: e, area });
            }
            diameters.push((b - a).norm().max((c - b).norm()).max((a - c).norm()));
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(elements.len() * 2);
        let mut faces: Vec<Face> = Vec::with_capacity(elements.len() * 2);
        let mut element_faces = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            let mut local = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let f = match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.elements.1.is_some() {
                            return Err(MeshError::NonManifold { a: key.0, b: key.1 });
                        }
                        face.elements.1 = Some(e);
                        face.h = face.h.max(diameters[e]);
                        f
                    }
                    None => {
                        faces.push(Face { vertices: [key.0, key.1], elements: (e, None), h: diameters[e] });
                        lookup.insert(key, faces.len() - 1);
                        faces.len() - 1
                    }
                };
                local[k] = f;
            }
            element_faces.push(local);
        }

        Ok(Self { vertices, elements, faces, element_faces, diameters, parents, level })
    }

    /// Criss-cross mesh of `[-1,1]²`: `n × n` squares, each split into four
    /// triangles through its centroid.
    pub fn structured(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        let step = 2.0 / n as f64;
        let grid = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(Point::new(-1.0 + i as f64 * step, -1.0 + j as f64 * step));
            }
        }
        let mut elements = Vec::with_capacity(4 * n * n);
        for j in 0..n {
            for i in 0..n {
                let c = vertices.len();
                vertices.push(Point::new(-1.0 + (i as f64 + 0.5) * step, -1.0 + (j as f64 + 0.5) * step));
                let (v00, v10, v11, v01) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
                elements.extend_from_slice(&[[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]);
            }
        }
        Self::assemble(vertices, elements, None, 0)
    }

    /// Red refinement: every triangle is split into four through its edge
    /// midpoints. The midpoint of face `f` becomes vertex `n_vertices + f`.
    pub fn refine_uniform(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.faces.iter().map(|f| (self.vertices[f.vertices[0]] + self.vertices[f.vertices[1]]) * 0.5));
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        let mut parents = Vec::with_capacity(4 * self.elements.len());
        for (e, (&[a, b, c], &[fab, fbc, fca])) in self.elements.iter().zip(&self.element_faces).enumerate() {
            let (mab, mbc, mca) = (nv + fab, nv + fbc, nv + fca);
            elements.extend_from_slice(&[[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]]);
            parents.extend_from_slice(&[e; 4]);
        }
        Self::assemble(vertices, elements, Some(parents), self.level + 1)
            .expect("red refinement of a valid mesh is valid")
    }

    fn check_hanging_vertices(&self) -> Result<(), MeshError> {
        // A hanging vertex shows up as an interior point of a face with only
        // one adjacent element.
        for face in self.faces.iter().filter(|f| f.is_boundary()) {
            let [a, b] = face.vertices;
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len = (pb - pa).norm();
            for (v, p) in self.vertices.iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let t = (p - pa).dot(&(pb - pa)) / (len * len);
                let dist = ((p - pa) - (pb - pa) * t).norm();
                if t > 1e-12 && t < 1.0 - 1e-12 && dist < 1e-12 * len {
                    return Err(MeshError::HangingVertex { vertex: v, a, b });
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Face list with neighbour pairs and `h_F`.
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn element_faces(&self, element: usize) -> [usize; 3] {
        self.element_faces[element]
    }

    pub fn element_vertices(&self, element: usize) -> [Point; 3] {
        self.elements[element].map(|v| self.vertices[v])
    }

    pub fn diameter(&self, element: usize) -> f64 {
        self.diameters[element]
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn area(&self, element: usize) -> f64 {
        let [a, b, c] = self.element_vertices(element);
        signed_area(&a, &b, &c)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Parent element in the previous level, if this mesh came from refinement.
    pub fn parent(&self, element: usize) -> Option<usize> {
        self.parents.as_ref().map(|p| p[element])
    }

    /// Number of P2 nodes: vertices followed by one midpoint per face.
    pub fn n_p2_nodes(&self) -> usize {
        self.vertices.len() + self.faces.len()
    }

    /// Global P2 node ids of an element: three vertices, then the midpoints
    /// of edges `(0,1)`, `(1,2)`, `(2,0)`.
    pub fn p2_nodes(&self, element: usize) -> [usize; 6] {
        let [a, b, c] = self.elements[element];
        let [f0, f1, f2] = self.element_faces[element];
        let nv = self.vertices.len();
        [a, b, c, nv + f0, nv + f1, nv + f2]
    }

    pub fn p2_node_position(&self, node: usize) -> Point {
        let nv = self.vertices.len();
        if node < nv {
            self.vertices[node]
        } else {
            let [a, b] = self.faces[node - nv].vertices;
            (self.vertices[a] + self.vertices[b]) * 0.5
        }
    }

    /// Parses the plain-text format: `NV NE`, then `NV` lines `x y`, then
    /// `NE` lines `i j k` (0-based, counter-clockwise).
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, reason: &str| MeshError::Parse { line: line + 1, reason: reason.to_string() };
        let (hl, header) = lines.next().ok_or_else(|| err(0, "missing header"))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(hl, "expected `NV NE`")))
            .collect::<Result<_, _>>()?;
        let [nv, ne] = counts[..] else { return Err(err(hl, "expected `NV NE`")) };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, line) = lines.next().ok_or_else(|| err(hl, "too few vertex lines"))?;
            let xy: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(l, "expected `x y`")))
                .collect::<Result<_, _>>()?;
            let [x, y] = xy[..] else { return Err(err(l, "expected `x y`")) };
            vertices.push(Point::new(x, y));
        }
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (l, line) = lines.next().ok_or_else(|| err(hl, "too few element lines"))?;
            let ijk: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(l, "expected `i j k`")))
                .collect::<Result<_, _>>()?;
            let [i, j, k] = ijk[..] else { return Err(err(l, "expected `i j k`")) };
            elements.push([i, j, k]);
        }
        if let Some((l, _)) = lines.next() {
            return Err(err(l, "trailing content"));
        }
        Self::from_parts(vertices, elements)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.vertices.len(), self.elements.len()).unwrap();
        for v in &self.vertices {
            writeln!(out, "{:?} {:?}", v.x, v.y).unwrap();
        }
        for [i, j, k] in &self.elements {
            writeln!(out, "{i} {j} {k}").unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Barycentric coordinates of `p` with respect to triangle `tri`.
pub fn barycentric(tri: &[Point; 3], p: &Point) -> [f64; 3] {
    let area = signed_area(&tri[0], &tri[1], &tri[2]);
    let l1 = signed_area(&tri[0], p, &tri[2]) / area;
    let l2 = signed_area(&tri[0], &tri[1], p) / area;
    [1.0 - l1 - l2, l1, l2]
}
