//! Level set functions, their P1 interpolation and the resulting cut
//! topology.
//!
//! Phase one is `{φ < 0}`, phase two is `{φ > 0}`. Jumps are taken as
//! `v|Ω₁ − v|Ω₂` and interface normals point from phase one into phase two.

use crate::mesh::{Mesh, Point};

/// Relative snapping threshold for nodal level set values.
pub const SNAP_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    One,
    Two,
}

impl Phase {
    pub const BOTH: [Phase; 2] = [Phase::One, Phase::Two];

    pub fn index(self) -> usize {
        match self {
            Phase::One => 0,
            Phase::Two => 1,
        }
    }

    pub fn other(self) -> Phase {
        match self {
            Phase::One => Phase::Two,
            Phase::Two => Phase::One,
        }
    }

    /// Phase containing a point with level set value `value`.
    pub fn of_value(value: f64) -> Phase {
        if value < 0.0 {
            Phase::One
        } else {
            Phase::Two
        }
    }
}

/// A scalar field with a closed-form gradient.
pub trait LevelSet: Send + Sync {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn name(&self) -> &str;
}

/// `φ(x) = ‖x − c‖ − r`.
#[derive(Clone, Debug)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }
}

impl LevelSet for Circle {
    fn value(&self, x: &Point) -> f64 {
        (x - self.center).norm() - self.radius
    }

    fn gradient(&self, x: &Point) -> Point {
        let d = x - self.center;
        let r = d.norm();
        if r == 0.0 {
            Point::zeros()
        } else {
            d / r
        }
    }

    fn name(&self) -> &str {
        "circle"
    }
}

/// `φ(x) = n·x − offset`.
#[derive(Clone, Debug)]
pub struct Plane {
    pub normal: Point,
    pub offset: f64,
}

impl LevelSet for Plane {
    fn value(&self, x: &Point) -> f64 {
        self.normal.dot(x) - self.offset
    }

    fn gradient(&self, _x: &Point) -> Point {
        self.normal
    }

    fn name(&self) -> &str {
        "plane"
    }
}

/// Built-in level sets by CLI key.
pub fn level_set_by_name(name: &str) -> Option<Box<dyn LevelSet>> {
    match name {
        "circle" => Some(Box::new(Circle::new(Point::zeros(), 2.0 / 3.0))),
        _ => None,
    }
}

/// Vertex values of the P1 interpolant `I_h φ`.
#[derive(Clone, Debug)]
pub struct NodalLevelSet {
    pub values: Vec<f64>,
}

impl NodalLevelSet {
    pub fn element_values(&self, mesh: &Mesh, element: usize) -> [f64; 3] {
        mesh.elements()[element].map(|v| self.values[v])
    }
}

/// Interpolates `φ` at the vertices. Values with `|φ| < SNAP_EPS·h` are
/// replaced by `+SNAP_EPS·h`, where `h` is the largest diameter among the
/// elements touching the vertex.
pub fn interpolate_p1(ls: &dyn LevelSet, mesh: &Mesh) -> NodalLevelSet {
    let mut h = vec![0.0f64; mesh.n_vertices()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        for &v in tri {
            h[v] = h[v].max(mesh.diameter(e));
        }
    }
    let values = mesh
        .vertices()
        .iter()
        .zip(&h)
        .map(|(x, &hv)| {
            let v = ls.value(x);
            if v.abs() < SNAP_EPS * hv {
                SNAP_EPS * hv
            } else {
                v
            }
        })
        .collect();
    NodalLevelSet { values }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementClass {
    Neg,
    Pos,
    Cut,
}

impl ElementClass {
    pub fn contains(self, phase: Phase) -> bool {
        matches!(
            (self, phase),
            (ElementClass::Cut, _) | (ElementClass::Neg, Phase::One) | (ElementClass::Pos, Phase::Two)
        )
    }
}

#[derive(Clone, Debug)]
pub struct CutTopology {
    pub classes: Vec<ElementClass>,
    /// `|T ∩ Ω₁^lin| / |T|` per element: 1 on `Neg`, 0 on `Pos`, strictly
    /// inside `(0,1)` on `Cut` elements.
    pub cut_fraction: Vec<f64>,
    /// Ghost-penalty faces per phase.
    pub ghost_faces: [Vec<usize>; 2],
    /// Membership in the extended domains `Ω_i^+` per phase.
    pub extended: [Vec<bool>; 2],
}

impl CutTopology {
    pub fn class(&self, element: usize) -> ElementClass {
        self.classes[element]
    }

    pub fn is_cut(&self, element: usize) -> bool {
        self.classes[element] == ElementClass::Cut
    }

    pub fn in_extended(&self, phase: Phase, element: usize) -> bool {
        self.extended[phase.index()][element]
    }

    pub fn cut_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes.iter().enumerate().filter(|(_, c)| **c == ElementClass::Cut).map(|(e, _)| e)
    }

    pub fn count(&self, class: ElementClass) -> usize {
        self.classes.iter().filter(|c| **c == class).count()
    }
}

pub fn classify_values(values: &[f64; 3]) -> ElementClass {
    if values.iter().all(|&v| v < 0.0) {
        ElementClass::Neg
    } else if values.iter().all(|&v| v > 0.0) {
        ElementClass::Pos
    } else {
        ElementClass::Cut
    }
}

/// Area fraction of `{I_h φ < 0}` inside a triangle with vertex values
/// `values` (none of them zero).
pub fn negative_fraction(values: &[f64; 3]) -> f64 {
    match classify_values(values) {
        ElementClass::Neg => 1.0,
        ElementClass::Pos => 0.0,
        ElementClass::Cut => {
            // The lone vertex k cuts off a similar corner triangle with
            // area ratio t_i·t_j along its two edges.
            let neg = values.iter().filter(|&&v| v < 0.0).count();
            let k = (0..3).find(|&k| (values[k] < 0.0) == (neg == 1)).unwrap();
            let vk = values[k];
            let corner: f64 = (1..3)
                .map(|s| {
                    let vi = values[(k + s) % 3];
                    vk / (vk - vi)
                })
                .product();
            if neg == 1 {
                corner
            } else {
                1.0 - corner
            }
        }
    }
}

pub fn classify(nls: &NodalLevelSet, mesh: &Mesh) -> CutTopology {
    let n = mesh.n_elements();
    let mut classes = Vec::with_capacity(n);
    let mut cut_fraction = Vec::with_capacity(n);
    for e in 0..n {
        let vals = nls.element_values(mesh, e);
        classes.push(classify_values(&vals));
        cut_fraction.push(negative_fraction(&vals));
    }
    let extended = [
        classes.iter().map(|c| c.contains(Phase::One)).collect::<Vec<_>>(),
        classes.iter().map(|c| c.contains(Phase::Two)).collect::<Vec<_>>(),
    ];
    let mut ghost_faces = [Vec::new(), Vec::new()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let (a, Some(b)) = face.elements else { continue };
        if classes[a] != ElementClass::Cut && classes[b] != ElementClass::Cut {
            continue;
        }
        for phase in Phase::BOTH {
            let i = phase.index();
            if extended[i][a] && extended[i][b] {
                ghost_faces[i].push(f);
            }
        }
    }
    CutTopology { classes, cut_fraction, ghost_faces, extended }
}
