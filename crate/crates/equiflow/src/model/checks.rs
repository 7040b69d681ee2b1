//! Equivariance test harness: drive a prediction pipeline with random rigid
//! motions of the raw sample and measure how far the outputs are from
//! transforming covariantly (scalar targets invariant, vector targets
//! rotated).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::data::motion::{random_rotation, RotationMode};
use crate::data::{apply_rigid_motion, Sample, TargetKind};
use crate::pga::{mat_mul, RigidMotion};

/// Outcome of an equivariance sweep; deviations are Frobenius-relative per
/// target, maxed over targets.
#[derive(Debug, Clone)]
pub struct EquivarianceReport {
    pub max_rel_dev: f64,
    pub per_motion: Vec<f64>,
}

/// A reproducible motion suite: rotations with translations, at least two
/// reflections and two pure translations.
pub fn standard_motion_suite(n: usize, seed: u64) -> Vec<RigidMotion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i % 5 == 1 {
            // pure translation
            out.push(RigidMotion::translation_only(std::array::from_fn(|_| {
                rng.gen_range(-0.8..0.8)
            })));
            continue;
        }
        let mut m = random_rotation(RotationMode::Haar, &mut rng).unwrap();
        if i % 5 == 3 {
            let refl = RigidMotion::reflection([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..1.0),
            ]);
            m.rotation = mat_mul(&refl.rotation, &m.rotation);
        }
        m.translation = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
        out.push(m);
    }
    out
}

fn rel_dev(got: &[f64], want: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in got.iter().zip(want) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    (num / den.max(1e-300)).sqrt()
}

fn rotate_field(data: &[f64], kind: TargetKind, m: &RigidMotion) -> Vec<f64> {
    match kind {
        TargetKind::Scalar => data.to_vec(),
        TargetKind::Vector => data
            .chunks_exact(3)
            .flat_map(|v| m.apply_vector([v[0], v[1], v[2]]))
            .collect(),
    }
}

/// Run `predict` on the raw sample and on each moved sample; report the
/// relative deviation of f(rho X) from rho f(X).
pub fn equivariance_check<F>(
    predict: F,
    sample: &Sample,
    kinds: (TargetKind, TargetKind),
    motions: &[RigidMotion],
) -> Result<EquivarianceReport, ModelError>
where
    F: Fn(&Sample) -> Result<(Vec<f64>, Vec<f64>), ModelError>,
{
    let (base_surface, base_volume) = predict(sample)?;
    let mut per_motion = Vec::with_capacity(motions.len());
    for m in motions {
        let moved = apply_rigid_motion(sample, m);
        let (got_surface, got_volume) = predict(&moved)?;
        let want_surface = rotate_field(&base_surface, kinds.0, m);
        let want_volume = rotate_field(&base_volume, kinds.1, m);
        let dev = rel_dev(&got_surface, &want_surface).max(rel_dev(&got_volume, &want_volume));
        per_motion.push(dev);
    }
    let max_rel_dev = per_motion.iter().cloned().fold(0.0, f64::max);
    Ok(EquivarianceReport { max_rel_dev, per_motion })
}
