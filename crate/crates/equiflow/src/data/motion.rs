//! Random rotations for augmentation and evaluation regimes.

use rand::Rng;

use super::DataError;
use crate::pga::RigidMotion;

/// How rotations are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationMode {
    /// Uniform over SO(3) via a normalized 4-component Gaussian quaternion.
    Haar,
    /// Uniform axis, angle uniform in [0, x] degrees.
    Bounded(f64),
    /// Intrinsic XYZ composition R_x(a) R_y(b) R_z(c), each angle uniform in
    /// [-x, +x] degrees (the rotation-rate sweep convention).
    PerAxisBounded(f64),
}

impl RotationMode {
    pub fn parse(text: &str) -> Option<RotationMode> {
        if text == "haar" {
            return Some(RotationMode::Haar);
        }
        if let Some(rest) = text.strip_prefix("bounded:") {
            return rest.parse().ok().map(RotationMode::Bounded);
        }
        if let Some(rest) = text.strip_prefix("per_axis_bounded:") {
            return rest.parse().ok().map(RotationMode::PerAxisBounded);
        }
        None
    }

    pub fn label(&self) -> String {
        match self {
            RotationMode::Haar => "haar".into(),
            RotationMode::Bounded(x) => format!("bounded:{x}"),
            RotationMode::PerAxisBounded(x) => format!("per_axis_bounded:{x}"),
        }
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn quat_to_matrix(w: f64, x: f64, y: f64, z: f64) -> [[f64; 3]; 3] {
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Uniform unit vector on the sphere.
pub fn random_unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [gaussian(rng), gaussian(rng), gaussian(rng)];
        let n = crate::pga::norm3(v);
        if n > 1e-9 {
            return crate::pga::scale3(v, 1.0 / n);
        }
    }
}

/// Draw a rotation-only rigid motion in the given mode.
pub fn random_rotation(mode: RotationMode, rng: &mut impl Rng) -> Result<RigidMotion, DataError> {
    match mode {
        RotationMode::Haar => {
            let q = [gaussian(rng), gaussian(rng), gaussian(rng), gaussian(rng)];
            let n = (q.iter().map(|v| v * v).sum::<f64>()).sqrt();
            Ok(RigidMotion::rotation_only(quat_to_matrix(
                q[0] / n,
                q[1] / n,
                q[2] / n,
                q[3] / n,
            )))
        }
        RotationMode::Bounded(deg) => {
            check_deg(deg)?;
            let axis = random_unit_vector(rng);
            let angle = rng.gen_range(0.0..=deg.max(f64::MIN_POSITIVE)).to_radians();
            Ok(RigidMotion::from_axis_angle(axis, if deg == 0.0 { 0.0 } else { angle }))
        }
        RotationMode::PerAxisBounded(deg) => {
            check_deg(deg)?;
            let mut draw = || {
                if deg == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-deg..=deg).to_radians()
                }
            };
            let (a, b, c) = (draw(), draw(), draw());
            let rx = RigidMotion::from_axis_angle([1.0, 0.0, 0.0], a);
            let ry = RigidMotion::from_axis_angle([0.0, 1.0, 0.0], b);
            let rz = RigidMotion::from_axis_angle([0.0, 0.0, 1.0], c);
            Ok(rx.compose(&ry).compose(&rz))
        }
    }
}

fn check_deg(deg: f64) -> Result<(), DataError> {
    if !(0.0..=180.0).contains(&deg) {
        return Err(DataError::AngleOutOfRange(deg));
    }
    Ok(())
}

/// Rotation about a pivot point: x -> R (x - pivot) + pivot.
pub fn rotation_about(m: &RigidMotion, pivot: [f64; 3]) -> RigidMotion {
    let rp = m.apply_vector(pivot);
    RigidMotion {
        rotation: m.rotation,
        translation: [
            pivot[0] - rp[0] + m.translation[0],
            pivot[1] - rp[1] + m.translation[1],
            pivot[2] - rp[2] + m.translation[2],
        ],
    }
}
