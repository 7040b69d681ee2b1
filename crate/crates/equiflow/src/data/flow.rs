//! Analytic flow fields and the two toy sample generators.
//!
//! External flow: incompressible potential flow past a sphere of radius `a`
//! in a free stream `U d`, with surface pressure coefficient
//! C_p = 1 - (9/4) sin^2(theta). Internal flow: Poiseuille flow through a
//! tube, u = u_max (1 - (s/R)^2) along the axis, wall shear stress
//! 2 mu u_max / R with unit viscosity.

use rand::Rng;
use serde_json::json;

use super::mesh::{icosphere, tube};
use super::motion::random_unit_vector;
use super::{Sample, TargetField, TargetKind};
use crate::pga::{dot3, norm3, scale3, sub3};

/// Parameters of one external-flow (sphere) sample.
#[derive(Debug, Clone)]
pub struct ToyAeroParams {
    /// obstacle radius, in [0.5, 1.5] for the stock datasets
    pub radius: f64,
    /// free-stream speed, in [0.5, 2]
    pub u_inf: f64,
    /// unit inflow direction (+x in canonical mode)
    pub inflow: [f64; 3],
    /// icosphere subdivision level
    pub mesh_subdiv: usize,
    /// number of volume sample points
    pub n_volume: usize,
}

impl ToyAeroParams {
    pub fn validate(&self) -> bool {
        self.radius > 0.0 && self.u_inf > 0.0 && (norm3(self.inflow) - 1.0).abs() < 1e-9
    }
}

/// Parameters of one internal-flow (tube) sample.
#[derive(Debug, Clone)]
pub struct ToyHemoParams {
    pub radius: f64,
    /// tube length, must exceed 2 * radius
    pub length: f64,
    /// peak axial speed
    pub u_max: f64,
    /// unit axis direction
    pub axis: [f64; 3],
    /// centerline offset
    pub center: [f64; 3],
    pub n_ring: usize,
    pub n_seg: usize,
    pub n_volume: usize,
}

impl ToyHemoParams {
    pub fn validate(&self) -> bool {
        self.radius > 0.0
            && self.length > 2.0 * self.radius
            && self.u_max > 0.0
            && (norm3(self.axis) - 1.0).abs() < 1e-9
    }
}

/// Potential-flow velocity around a sphere of radius `a` centered at
/// `center`, free stream `u_inf * inflow`.
pub fn aero_velocity(
    x: [f64; 3],
    center: [f64; 3],
    a: f64,
    u_inf: f64,
    inflow: [f64; 3],
) -> [f64; 3] {
    let rv = sub3(x, center);
    let r = norm3(rv);
    let rhat = scale3(rv, 1.0 / r);
    let k = a * a * a / (r * r * r);
    let cos_theta = dot3(inflow, rhat);
    let stream = scale3(inflow, u_inf * (1.0 + 0.5 * k));
    let radial = scale3(rhat, -1.5 * u_inf * k * cos_theta);
    [stream[0] + radial[0], stream[1] + radial[1], stream[2] + radial[2]]
}

/// Surface pressure coefficient of potential flow past a sphere.
pub fn aero_cp(x: [f64; 3], center: [f64; 3], inflow: [f64; 3]) -> f64 {
    let rv = sub3(x, center);
    let rhat = scale3(rv, 1.0 / norm3(rv));
    let cos_theta = dot3(inflow, rhat);
    let sin_sq = (1.0 - cos_theta * cos_theta).max(0.0);
    1.0 - 2.25 * sin_sq
}

/// Poiseuille velocity inside a tube: axis through `center` along `axis`.
pub fn hemo_velocity(
    x: [f64; 3],
    center: [f64; 3],
    axis: [f64; 3],
    radius: f64,
    u_max: f64,
) -> [f64; 3] {
    let d = sub3(x, center);
    let axial = dot3(d, axis);
    let radial = sub3(d, scale3(axis, axial));
    let s2 = dot3(radial, radial);
    scale3(axis, u_max * (1.0 - s2 / (radius * radius)))
}

/// Wall shear stress vector of Poiseuille flow (unit viscosity).
pub fn hemo_wss(axis: [f64; 3], radius: f64, u_max: f64) -> [f64; 3] {
    scale3(axis, 2.0 * u_max / radius)
}

/// Volume points must stay clear of the sphere surface by this relative
/// margin to dodge the interpolation singularity there.
pub const AERO_SHELL_MARGIN: f64 = 1e-3;

/// Generate one external-flow sample: icosphere surface plus volume points
/// in the shell r in (a, 4a].
pub fn gen_external_flow_sample(p: &ToyAeroParams, rng: &mut impl Rng) -> Sample {
    assert!(p.validate(), "invalid aero params: {p:?}");
    let base = icosphere(p.mesh_subdiv);
    let surface_pos: Vec<[f64; 3]> = base.verts.iter().map(|&v| scale3(v, p.radius)).collect();
    let normals: Vec<[f64; 3]> = base.verts.clone();

    let r_min = p.radius * (1.0 + AERO_SHELL_MARGIN);
    let r_max = 4.0 * p.radius;
    let mut volume_pos = Vec::with_capacity(p.n_volume);
    for _ in 0..p.n_volume {
        let dir = random_unit_vector(rng);
        let u: f64 = rng.gen_range(0.0..1.0);
        let r = (r_min.powi(3) + u * (r_max.powi(3) - r_min.powi(3))).cbrt();
        volume_pos.push(scale3(dir, r));
    }

    let center = [0.0; 3];
    let cp: Vec<f64> =
        surface_pos.iter().map(|&x| aero_cp(x, center, p.inflow)).collect();
    let u: Vec<f64> = volume_pos
        .iter()
        .flat_map(|&x| aero_velocity(x, center, p.radius, p.u_inf, p.inflow))
        .collect();

    let n_s = surface_pos.len();
    let n_v = volume_pos.len();
    Sample {
        surface_pos,
        volume_pos,
        surface_vectors: vec![
            ("normal".into(), normals),
            ("flow_prior".into(), vec![p.inflow; n_s]),
        ],
        volume_vectors: vec![("flow_prior".into(), vec![p.inflow; n_v])],
        surface_scalars: vec![("u_inf".into(), vec![p.u_inf; n_s])],
        volume_scalars: vec![("u_inf".into(), vec![p.u_inf; n_v])],
        surface_target: TargetField { name: "cp".into(), kind: TargetKind::Scalar, data: cp },
        volume_target: TargetField { name: "u".into(), kind: TargetKind::Vector, data: u },
        triangles: base.tris,
        meta: json!({
            "kind": "aero",
            "radius": p.radius,
            "u_inf": p.u_inf,
            "inflow": p.inflow,
        }),
    }
}

/// Generate one internal-flow sample: closed tube surface plus interior
/// volume points. Surface target is the wall shear stress vector, volume
/// target the Poiseuille velocity; volume tokens carry their distance to the
/// side wall as an invariant scalar feature.
pub fn gen_internal_flow_sample(p: &ToyHemoParams, rng: &mut impl Rng) -> Sample {
    assert!(p.validate(), "invalid hemo params: {p:?}");
    // build in the canonical frame (+z axis, origin center), then move
    let (base, local_normals) = tube(p.radius, p.length, p.n_ring, p.n_seg);
    let frame = frame_from_axis(p.axis);
    let to_world = |v: [f64; 3]| -> [f64; 3] {
        [
            frame[0][0] * v[0] + frame[0][1] * v[1] + frame[0][2] * v[2] + p.center[0],
            frame[1][0] * v[0] + frame[1][1] * v[1] + frame[1][2] * v[2] + p.center[1],
            frame[2][0] * v[0] + frame[2][1] * v[1] + frame[2][2] * v[2] + p.center[2],
        ]
    };
    let rot_world = |v: [f64; 3]| -> [f64; 3] {
        [
            frame[0][0] * v[0] + frame[0][1] * v[1] + frame[0][2] * v[2],
            frame[1][0] * v[0] + frame[1][1] * v[1] + frame[1][2] * v[2],
            frame[2][0] * v[0] + frame[2][1] * v[1] + frame[2][2] * v[2],
        ]
    };
    let surface_pos: Vec<[f64; 3]> = base.verts.iter().map(|&v| to_world(v)).collect();
    let normals: Vec<[f64; 3]> = local_normals.iter().map(|&n| rot_world(n)).collect();

    let mut volume_pos = Vec::with_capacity(p.n_volume);
    let mut wall_dist = Vec::with_capacity(p.n_volume);
    for _ in 0..p.n_volume {
        let u: f64 = rng.gen_range(0.0..1.0);
        let s = p.radius * u.sqrt();
        let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let z = rng.gen_range(-p.length / 2.0..p.length / 2.0);
        volume_pos.push(to_world([s * phi.cos(), s * phi.sin(), z]));
        wall_dist.push(p.radius - s);
    }

    let wss = hemo_wss(p.axis, p.radius, p.u_max);
    let u: Vec<f64> = volume_pos
        .iter()
        .flat_map(|&x| hemo_velocity(x, p.center, p.axis, p.radius, p.u_max))
        .collect();

    let n_s = surface_pos.len();
    let n_v = volume_pos.len();
    Sample {
        surface_pos,
        volume_pos,
        surface_vectors: vec![
            ("normal".into(), normals),
            ("flow_prior".into(), vec![p.axis; n_s]),
        ],
        volume_vectors: vec![("flow_prior".into(), vec![p.axis; n_v])],
        surface_scalars: vec![],
        volume_scalars: vec![("wall_dist".into(), wall_dist)],
        surface_target: TargetField {
            name: "wss".into(),
            kind: TargetKind::Vector,
            data: (0..n_s).flat_map(|_| wss).collect(),
        },
        volume_target: TargetField { name: "u".into(), kind: TargetKind::Vector, data: u },
        triangles: base.tris,
        meta: json!({
            "kind": "hemo",
            "radius": p.radius,
            "length": p.length,
            "u_max": p.u_max,
            "axis": p.axis,
            "center": p.center,
        }),
    }
}

/// Orthonormal frame whose third column is `axis`.
fn frame_from_axis(axis: [f64; 3]) -> [[f64; 3]; 3] {
    let z = scale3(axis, 1.0 / norm3(axis));
    let helper = if z[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let x = {
        let proj = dot3(helper, z);
        let v = sub3(helper, scale3(z, proj));
        scale3(v, 1.0 / norm3(v))
    };
    let y = crate::pga::cross3(z, x);
    [[x[0], y[0], z[0]], [x[1], y[1], z[1]], [x[2], y[2], z[2]]]
}
