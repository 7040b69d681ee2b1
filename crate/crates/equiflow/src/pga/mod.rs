//! Projective geometric algebra G(3,0,1): 16-component multivectors, the
//! embeddings of scalars, planes, points and translations, and versor
//! realizations of E(3) rigid motions.
//!
//! Coefficients are stored in the fixed order documented in [`tables`]. Points
//! live in the e0-trivectors with the Hodge-consistent slot assignment
//!
//!   point rho = rho_x * e023 - rho_y * e013 + rho_z * e012 + e123,
//!
//! which is the unique assignment (up to a global sign) under which a single
//! versor rotates plane normals and point coordinates by the same rotation
//! matrix. See docs/algebra_tables.md for the full convention sheet.

pub mod tables;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tables::*;

/// Homogeneous-coordinate threshold for point normalization.
pub const POINT_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PgaError {
    #[error("degenerate point: |x123| = {0:e} <= {POINT_EPS:e}")]
    DegeneratePoint(f64),
    #[error("rotation matrix is not orthogonal: max |R^T R - I| = {0:e}")]
    NonOrthogonal(f64),
}

/// General element of G(3,0,1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multivector(pub [f64; 16]);

impl Default for Multivector {
    fn default() -> Self {
        Multivector([0.0; 16])
    }
}

impl Multivector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(s: f64) -> Self {
        let mut c = [0.0; 16];
        c[0] = s;
        Multivector(c)
    }

    pub fn basis(i: usize) -> Self {
        let mut c = [0.0; 16];
        c[i] = 1.0;
        Multivector(c)
    }

    /// Projection onto grade k (k in 0..=4).
    pub fn grade(&self, k: usize) -> Self {
        let (lo, hi) = GRADE_RANGES[k];
        let mut c = [0.0; 16];
        c[lo..hi].copy_from_slice(&self.0[lo..hi]);
        Multivector(c)
    }

    pub fn reverse(&self) -> Self {
        let mut c = self.0;
        for (i, v) in c.iter_mut().enumerate() {
            *v *= REVERSE_SIGN[i] as f64;
        }
        Multivector(c)
    }

    pub fn involution(&self) -> Self {
        let mut c = self.0;
        for (i, v) in c.iter_mut().enumerate() {
            *v *= INVOLUTION_SIGN[i] as f64;
        }
        Multivector(c)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = self.0;
        for v in c.iter_mut() {
            *v *= s;
        }
        Multivector(c)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Add for Multivector {
    type Output = Multivector;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(rhs.0.iter()) {
            *a += b;
        }
        Multivector(c)
    }
}

impl std::ops::Sub for Multivector {
    type Output = Multivector;
    fn sub(self, rhs: Self) -> Self {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(rhs.0.iter()) {
            *a -= b;
        }
        Multivector(c)
    }
}

/// Geometric (Clifford) product from the frozen Cayley table.
pub fn geometric_product(a: &Multivector, b: &Multivector) -> Multivector {
    let mut out = [0.0; 16];
    for &(i, j, k, s) in GEOMETRIC_PRODUCT.iter() {
        out[k as usize] += s as f64 * a.0[i as usize] * b.0[j as usize];
    }
    Multivector(out)
}

/// Join a ∨ b = comp(comp(a) ^ comp(b)), fused into a single pair table.
pub fn dual_and_join(a: &Multivector, b: &Multivector) -> Multivector {
    let mut out = [0.0; 16];
    for &(i, j, k, s) in JOIN_PRODUCT.iter() {
        out[k as usize] += s as f64 * a.0[i as usize] * b.0[j as usize];
    }
    Multivector(out)
}

/// Outer (wedge) product.
pub fn outer_product(a: &Multivector, b: &Multivector) -> Multivector {
    let mut out = [0.0; 16];
    for &(i, j, k, s) in OUTER_PRODUCT.iter() {
        out[k as usize] += s as f64 * a.0[i as usize] * b.0[j as usize];
    }
    Multivector(out)
}

/// Right complement (the dual convention used throughout).
pub fn right_complement(a: &Multivector) -> Multivector {
    let mut out = [0.0; 16];
    for (i, &(ci, s)) in RIGHT_COMPLEMENT.iter().enumerate() {
        out[ci as usize] = s as f64 * a.0[i];
    }
    Multivector(out)
}

/// E(3)-invariant inner product: sum over the 8 blades without e0.
pub fn invariant_inner(a: &Multivector, b: &Multivector) -> f64 {
    INNER_INDICES.iter().map(|&i| a.0[i] * b.0[i]).sum()
}

/// Embed a scalar into the grade-0 slot.
pub fn embed_scalar(s: f64) -> Multivector {
    Multivector::scalar(s)
}

/// Embed a plane {x : nu . x = delta} as delta*e0 + nu.e.
pub fn embed_plane(nu: [f64; 3], delta: f64) -> Multivector {
    let mut c = [0.0; 16];
    c[1] = delta;
    c[2] = nu[0];
    c[3] = nu[1];
    c[4] = nu[2];
    Multivector(c)
}

/// Embed a point with homogeneous weight 1.
pub fn embed_point(rho: [f64; 3]) -> Multivector {
    let mut c = [0.0; 16];
    c[13] = rho[0]; // e023
    c[12] = -rho[1]; // e013
    c[11] = rho[2]; // e012
    c[14] = 1.0; // e123
    Multivector(c)
}

/// Embed a translation by t as the even versor 1 + (t . (e01,e02,e03))/2,
/// the sign being fixed by sandwich(embed_translation(t), embed_point(p)) =
/// embed_point(p + t).
pub fn embed_translation(t: [f64; 3]) -> Multivector {
    let mut c = [0.0; 16];
    c[0] = 1.0;
    c[5] = 0.5 * t[0];
    c[6] = 0.5 * t[1];
    c[7] = 0.5 * t[2];
    Multivector(c)
}

/// Scalar part.
pub fn extract_scalar(x: &Multivector) -> f64 {
    x.0[0]
}

/// Grade-1 Euclidean components (x1, x2, x3): rotation-equivariant and
/// translation-invariant.
pub fn extract_vector(x: &Multivector) -> [f64; 3] {
    [x.0[2], x.0[3], x.0[4]]
}

/// Normalized point coordinates; errors when the homogeneous weight is
/// numerically zero.
pub fn extract_point(x: &Multivector) -> Result<[f64; 3], PgaError> {
    let w = x.0[14];
    if w.abs() <= POINT_EPS {
        return Err(PgaError::DegeneratePoint(w.abs()));
    }
    Ok([x.0[13] / w, -x.0[12] / w, x.0[11] / w])
}

/// A rigid motion of E(3): x -> R x + t with R orthogonal (det = +-1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl RigidMotion {
    pub fn identity() -> Self {
        RigidMotion {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    pub fn rotation_only(rotation: [[f64; 3]; 3]) -> Self {
        RigidMotion { rotation, translation: [0.0; 3] }
    }

    pub fn translation_only(t: [f64; 3]) -> Self {
        RigidMotion { rotation: RigidMotion::identity().rotation, translation: t }
    }

    /// Rotation about a unit axis by angle (radians), right-handed.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = norm3(axis);
        let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (s, c) = angle.sin_cos();
        let ic = 1.0 - c;
        RigidMotion::rotation_only([
            [c + x * x * ic, x * y * ic - z * s, x * z * ic + y * s],
            [y * x * ic + z * s, c + y * y * ic, y * z * ic - x * s],
            [z * x * ic - y * s, z * y * ic + x * s, c + z * z * ic],
        ])
    }

    /// Reflection through the plane through the origin with unit normal n.
    pub fn reflection(normal: [f64; 3]) -> Self {
        let nn = norm3(normal);
        let n = [normal[0] / nn, normal[1] / nn, normal[2] / nn];
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = if i == j { 1.0 } else { 0.0 } - 2.0 * n[i] * n[j];
            }
        }
        RigidMotion::rotation_only(r)
    }

    /// Composition: (self o other)(x) = self(other(x)).
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        let r = mat_mul(&self.rotation, &other.rotation);
        let t = add3(mat_vec(&self.rotation, other.translation), self.translation);
        RigidMotion { rotation: r, translation: t }
    }

    pub fn inverse(&self) -> RigidMotion {
        let rt = transpose(&self.rotation);
        let t = mat_vec(&rt, self.translation);
        RigidMotion { rotation: rt, translation: [-t[0], -t[1], -t[2]] }
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        add3(mat_vec(&self.rotation, x), self.translation)
    }

    pub fn apply_vector(&self, v: [f64; 3]) -> [f64; 3] {
        mat_vec(&self.rotation, v)
    }

    pub fn det(&self) -> f64 {
        det3(&self.rotation)
    }

    /// Max deviation of R^T R from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let rt_r = mat_mul(&transpose(&self.rotation), &self.rotation);
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((rt_r[i][j] - target).abs());
            }
        }
        worst
    }
}

/// Versor: an invertible algebra element acting by conjugation, with the
/// parity flag selecting the grade-involution correction of the sandwich.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Versor {
    pub mv: Multivector,
    pub odd: bool,
}

impl Versor {
    pub fn identity() -> Self {
        Versor { mv: Multivector::scalar(1.0), odd: false }
    }

    /// Compose actions: (self * other) applies `other` first.
    pub fn compose(&self, other: &Versor) -> Versor {
        Versor {
            mv: geometric_product(&self.mv, &other.mv),
            odd: self.odd ^ other.odd,
        }
    }
}

/// Sandwich action v x v~ (with grade involution of x for odd versors).
/// Linear in x; maps embedded primitives to embedded primitives.
pub fn sandwich(v: &Versor, x: &Multivector) -> Multivector {
    let inner = if v.odd { x.involution() } else { *x };
    geometric_product(&geometric_product(&v.mv, &inner), &v.mv.reverse())
}

/// The 16x16 matrix of the (linear) sandwich action, column k = sandwich of
/// basis blade k. Used to push rigid motions through batched tensors.
pub fn sandwich_matrix(v: &Versor) -> [[f64; 16]; 16] {
    let mut m = [[0.0; 16]; 16];
    for k in 0..16 {
        let img = sandwich(v, &Multivector::basis(k));
        for (r, row) in m.iter_mut().enumerate() {
            row[k] = img.0[r];
        }
    }
    m
}

/// Tolerance for the rotation orthogonality precondition.
pub const ORTHO_TOL: f64 = 1e-12;

/// Build the versor realizing a rigid motion. Improper rotations are factored
/// through a reflection in the z=0 plane.
pub fn versor_from_motion(m: &RigidMotion) -> Result<Versor, PgaError> {
    let defect = m.orthogonality_defect();
    if defect > ORTHO_TOL {
        return Err(PgaError::NonOrthogonal(defect));
    }
    let translator = Versor { mv: embed_translation(m.translation), odd: false };
    let det = m.det();
    let rotor = if det > 0.0 {
        rotor_from_matrix(&m.rotation)
    } else {
        // R = H_z * R' with H_z = diag(1,1,-1); versor = plane(z) * rotor(R')
        let hz = RigidMotion::reflection([0.0, 0.0, 1.0]).rotation;
        let r_proper = mat_mul(&hz, &m.rotation);
        let mirror = Versor { mv: embed_plane([0.0, 0.0, 1.0], 0.0), odd: true };
        mirror.compose(&rotor_from_matrix(&r_proper))
    };
    Ok(translator.compose(&rotor))
}

/// Rotor for a proper rotation via the unit quaternion of the matrix:
/// (w, x, y, z) -> w - x e23 + y e13 - z e12.
fn rotor_from_matrix(r: &[[f64; 3]; 3]) -> Versor {
    let q = quaternion_from_matrix(r);
    let mut c = [0.0; 16];
    c[0] = q[0];
    c[10] = -q[1];
    c[9] = q[2];
    c[8] = -q[3];
    Versor { mv: Multivector(c), odd: false }
}

/// Shepperd's method, branch chosen by the largest diagonal combination.
fn quaternion_from_matrix(r: &[[f64; 3]; 3]) -> [f64; 4] {
    let tr = r[0][0] + r[1][1] + r[2][2];
    let (w, x, y, z);
    if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (r[2][1] - r[1][2]) / s;
        y = (r[0][2] - r[2][0]) / s;
        z = (r[1][0] - r[0][1]) / s;
    } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
        let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
        w = (r[2][1] - r[1][2]) / s;
        x = 0.25 * s;
        y = (r[0][1] + r[1][0]) / s;
        z = (r[0][2] + r[2][0]) / s;
    } else if r[1][1] > r[2][2] {
        let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
        w = (r[0][2] - r[2][0]) / s;
        x = (r[0][1] + r[1][0]) / s;
        y = 0.25 * s;
        z = (r[1][2] + r[2][1]) / s;
    } else {
        let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
        w = (r[1][0] - r[0][1]) / s;
        x = (r[0][2] + r[2][0]) / s;
        y = (r[1][2] + r[2][1]) / s;
        z = 0.25 * s;
    }
    let n = (w * w + x * x + y * y + z * z).sqrt();
    [w / n, x / n, y / n, z / n]
}

// Small 3-vector / 3x3 helpers shared across the crate.

pub fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

pub fn transpose(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
