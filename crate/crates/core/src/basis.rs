//! Lagrange P1/P2 shape functions in barycentric form.
//!
//! Local P2 ordering: vertices 0, 1, 2, then edge midpoints (0,1), (1,2),
//! (2,0).

use crate::mesh::{signed_area, Point};

pub const P2_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Affine triangle with cached barycentric gradients.
#[derive(Clone, Debug)]
pub struct AffineElement {
    pub vertices: [Point; 3],
    pub grad_lambda: [Point; 3],
    pub area: f64,
}

impl AffineElement {
    pub fn new(vertices: [Point; 3]) -> Self {
        let area = signed_area(&vertices[0], &vertices[1], &vertices[2]);
        let grad_lambda = std::array::from_fn(|a| {
            let (b, c) = (vertices[(a + 1) % 3], vertices[(a + 2) % 3]);
            Point::new(b.y - c.y, c.x - b.x) / (2.0 * area)
        });
        Self { vertices, grad_lambda, area }
    }

    pub fn barycentric(&self, x: &Point) -> [f64; 3] {
        let l1 = self.grad_lambda[1].dot(&(x - self.vertices[0]));
        let l2 = self.grad_lambda[2].dot(&(x - self.vertices[0]));
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn point(&self, lambda: &[f64; 3]) -> Point {
        self.vertices[0] * lambda[0] + self.vertices[1] * lambda[1] + self.vertices[2] * lambda[2]
    }

    /// P2 node positions in local order.
    pub fn p2_nodes(&self) -> [Point; 6] {
        let v = &self.vertices;
        [v[0], v[1], v[2], (v[0] + v[1]) * 0.5, (v[1] + v[2]) * 0.5, (v[2] + v[0]) * 0.5]
    }
}

pub fn p1_values(lambda: &[f64; 3]) -> [f64; 3] {
    *lambda
}

pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Gradients with respect to the affine (undeformed) coordinates.
pub fn p2_gradients(l: &[f64; 3], g: &[Point; 3]) -> [Point; 6] {
    [
        g[0] * (4.0 * l[0] - 1.0),
        g[1] * (4.0 * l[1] - 1.0),
        g[2] * (4.0 * l[2] - 1.0),
        (g[1] * l[0] + g[0] * l[1]) * 4.0,
        (g[2] * l[1] + g[1] * l[2]) * 4.0,
        (g[0] * l[2] + g[2] * l[0]) * 4.0,
    ]
}
