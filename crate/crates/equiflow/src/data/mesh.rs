//! Triangle meshes for the toy geometries: subdivided icospheres and closed
//! tubes (cylinder walls with fan caps).

use std::collections::HashMap;

use crate::pga::{add3, cross3, norm3, scale3, sub3};

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub verts: Vec<[f64; 3]>,
    pub tris: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn n_verts(&self) -> usize {
        self.verts.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tris[t];
        let u = sub3(self.verts[b], self.verts[a]);
        let v = sub3(self.verts[c], self.verts[a]);
        0.5 * norm3(cross3(u, v))
    }
}

/// Unit icosphere: icosahedron subdivided `subdiv` times, vertices projected
/// onto the unit sphere. Vertex counts: 12, 42, 162, 642, 2562 for
/// subdiv 0..=4.
pub fn icosphere(subdiv: usize) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    for v in verts.iter_mut() {
        *v = scale3(*v, 1.0 / norm3(*v));
    }
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let mut mid = |i: usize, j: usize, verts: &mut Vec<[f64; 3]>| -> usize {
                let key = (i.min(j), i.max(j));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = add3(verts[i], verts[j]);
                    let m = scale3(m, 1.0 / norm3(m));
                    verts.push(m);
                    verts.len() - 1
                })
            };
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    TriMesh { verts, tris }
}

/// Closed tube along +z, centered at the origin: `n_ring` vertices around,
/// `n_seg` segments along the length, fan caps with center vertices at both
/// ends. Returns the mesh and per-vertex outward unit normals (radial on the
/// wall, axial on the cap centers).
pub fn tube(radius: f64, length: f64, n_ring: usize, n_seg: usize) -> (TriMesh, Vec<[f64; 3]>) {
    assert!(n_ring >= 3 && n_seg >= 1);
    let mut verts = Vec::new();
    let mut normals = Vec::new();
    for i in 0..=n_seg {
        let z = -length / 2.0 + length * i as f64 / n_seg as f64;
        for j in 0..n_ring {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n_ring as f64;
            let (s, c) = theta.sin_cos();
            verts.push([radius * c, radius * s, z]);
            normals.push([c, s, 0.0]);
        }
    }
    let bottom_center = verts.len();
    verts.push([0.0, 0.0, -length / 2.0]);
    normals.push([0.0, 0.0, -1.0]);
    let top_center = verts.len();
    verts.push([0.0, 0.0, length / 2.0]);
    normals.push([0.0, 0.0, 1.0]);

    let mut tris = Vec::new();
    let ring = |i: usize, j: usize| i * n_ring + (j % n_ring);
    for i in 0..n_seg {
        for j in 0..n_ring {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            tris.push([a, b, d]);
            tris.push([a, d, c]);
        }
    }
    for j in 0..n_ring {
        tris.push([bottom_center, ring(0, j + 1), ring(0, j)]);
        tris.push([top_center, ring(n_seg, j), ring(n_seg, j + 1)]);
    }
    (TriMesh { verts, tris }, normals)
}
