use super::flow::*;
use super::mesh::{icosphere, tube};
use super::motion::*;
use super::nsf::*;
use super::*;
use crate::pga::{self, norm3, sub3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn aero_params() -> ToyAeroParams {
    ToyAeroParams { radius: 1.2, u_inf: 1.5, inflow: [1.0, 0.0, 0.0], mesh_subdiv: 2, n_volume: 64 }
}

fn hemo_params() -> ToyHemoParams {
    ToyHemoParams {
        radius: 0.8,
        length: 4.0,
        u_max: 0.16,
        axis: [0.0, 0.0, 1.0],
        center: [0.3, -0.2, 0.1],
        n_ring: 10,
        n_seg: 8,
        n_volume: 64,
    }
}

#[test]
fn icosphere_vertex_counts_and_closedness() {
    for (subdiv, want) in [(0usize, 12usize), (1, 42), (2, 162), (3, 642)] {
        let m = icosphere(subdiv);
        assert_eq!(m.n_verts(), want);
        // closed manifold: every edge shared by exactly two triangles
        let mut edges = std::collections::HashMap::new();
        for t in &m.tris {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
        // vertices on the unit sphere
        for v in &m.verts {
            assert!((norm3(*v) - 1.0).abs() <= 1e-12);
        }
    }
    let (t, normals) = tube(0.8, 4.0, 10, 8);
    assert_eq!(normals.len(), t.n_verts());
    let mut edges = std::collections::HashMap::new();
    for tri in &t.tris {
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            *edges.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
        }
    }
    assert!(edges.values().all(|&c| c == 2), "tube not closed");
    for i in 0..t.tris.len() {
        assert!(t.triangle_area(i) > 1e-12);
    }
}

#[test]
fn aero_no_penetration_and_stagnation() {
    let p = aero_params();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let s = gen_external_flow_sample(&p, &mut rng);
    // u_r = 0 on the surface (evaluate the analytic field at surface points)
    for &x in &s.surface_pos {
        let u = aero_velocity(x, [0.0; 3], p.radius, p.u_inf, p.inflow);
        let rhat = pga::scale3(x, 1.0 / norm3(x));
        assert!(pga::dot3(u, rhat).abs() <= 1e-12);
    }
    // stagnation point theta = 0: C_p = 1
    let cp = aero_cp([p.radius, 0.0, 0.0], [0.0; 3], p.inflow);
    assert!((cp - 1.0).abs() <= 1e-15);
    // in-sample extremes match the analytic range [-1.25, 1]
    let min = s.surface_target.data.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -1.25 - 1e-12);
}

#[test]
fn aero_divergence_free_by_finite_differences() {
    let p = aero_params();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let s = gen_external_flow_sample(&p, &mut rng);
    let h = 1e-4 * p.radius;
    let bound = 1e-5 * p.u_inf / p.radius;
    for &x in s.volume_pos.iter().take(32) {
        let mut div = 0.0;
        for d in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let up = aero_velocity(xp, [0.0; 3], p.radius, p.u_inf, p.inflow);
            let um = aero_velocity(xm, [0.0; 3], p.radius, p.u_inf, p.inflow);
            div += (up[d] - um[d]) / (2.0 * h);
        }
        assert!(div.abs() <= bound, "divergence {div:e} at {x:?}");
    }
}

#[test]
fn hemo_profile_no_slip_and_wss() {
    let p = hemo_params();
    // peak speed on the axis
    let u0 = hemo_velocity(p.center, p.center, p.axis, p.radius, p.u_max);
    assert!((norm3(u0) - p.u_max).abs() <= 1e-15);
    // no slip at the wall
    let wall = [p.center[0] + p.radius, p.center[1], p.center[2]];
    let uw = hemo_velocity(wall, p.center, p.axis, p.radius, p.u_max);
    assert!(norm3(uw) <= 1e-15);
    // wall shear stress magnitude vs one-sided second-order finite difference
    // of the axial profile at s = R
    let h = 1e-4 * p.radius;
    let u_at = |s: f64| p.u_max * (1.0 - (s / p.radius).powi(2));
    let fd = (-4.0 * u_at(p.radius - h) + u_at(p.radius - 2.0 * h)) / (2.0 * h);
    let tau = norm3(hemo_wss(p.axis, p.radius, p.u_max));
    assert!(
        ((fd.abs() - tau) / tau).abs() <= 1e-4,
        "wss {tau} vs fd {fd}"
    );
}

#[test]
fn hemo_sample_fields_consistent() {
    let p = hemo_params();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let s = gen_internal_flow_sample(&p, &mut rng);
    // every volume point inside the tube, wall_dist = R - s
    let (_, wall_dist) = (&s.volume_scalars[0].0, &s.volume_scalars[0].1);
    for (i, &x) in s.volume_pos.iter().enumerate() {
        let d = sub3(x, p.center);
        let axial = pga::dot3(d, p.axis);
        let radial = sub3(d, pga::scale3(p.axis, axial));
        let srad = norm3(radial);
        assert!(srad < p.radius && axial.abs() <= p.length / 2.0);
        assert!((wall_dist[i] - (p.radius - srad)).abs() <= 1e-12);
    }
}

#[test]
fn rotation_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    // zero degrees -> identity
    for mode in [RotationMode::Bounded(0.0), RotationMode::PerAxisBounded(0.0)] {
        let m = random_rotation(mode, &mut rng).unwrap();
        assert_eq!(m.rotation, pga::RigidMotion::identity().rotation);
    }
    // out-of-range angle rejected
    assert!(matches!(
        random_rotation(RotationMode::Bounded(181.0), &mut rng),
        Err(DataError::AngleOutOfRange(_))
    ));
    // haar: mean of rotation matrices approaches zero
    let mut mean = [[0.0f64; 3]; 3];
    let n = 100_000;
    for _ in 0..n {
        let m = random_rotation(RotationMode::Haar, &mut rng).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                mean[i][j] += m.rotation[i][j];
            }
        }
    }
    for row in &mean {
        for v in row {
            assert!((v / n as f64).abs() <= 0.01, "haar mean entry {}", v / n as f64);
        }
    }
    // determinism and orthogonality of every mode
    for mode in [RotationMode::Haar, RotationMode::Bounded(35.0), RotationMode::PerAxisBounded(60.0)]
    {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a = random_rotation(mode, &mut r1).unwrap();
        let b = random_rotation(mode, &mut r2).unwrap();
        assert_eq!(a.rotation, b.rotation);
        assert!(a.orthogonality_defect() <= 1e-12);
    }
}

#[test]
fn rigid_motion_roundtrip_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let s = gen_external_flow_sample(&aero_params(), &mut rng);
    // identity -> bitwise equal
    let id = pga::RigidMotion::identity();
    assert_eq!(apply_rigid_motion(&s, &id), s);
    // m then m^{-1} -> original within 1e-12
    let m = random_rotation(RotationMode::Haar, &mut rng).unwrap();
    let m = pga::RigidMotion { rotation: m.rotation, translation: [0.4, -0.1, 0.9] };
    let back = apply_rigid_motion(&apply_rigid_motion(&s, &m), &m.inverse());
    for (a, b) in back.surface_pos.iter().zip(&s.surface_pos) {
        assert!(norm3(sub3(*a, *b)) <= 1e-12);
    }
    for (a, b) in back.volume_target.data.iter().zip(&s.volume_target.data) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn rotated_sample_matches_rotated_inflow_regeneration() {
    // analytic covariance: rotating the sample equals evaluating the fields
    // with the rotated inflow at the rotated positions
    let p = aero_params();
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let s = gen_external_flow_sample(&p, &mut rng);
    let m = random_rotation(RotationMode::Haar, &mut rng).unwrap();
    let rotated = apply_rigid_motion(&s, &m);
    let inflow_rot = m.apply_vector(p.inflow);
    for (i, &x) in rotated.volume_pos.iter().enumerate() {
        let want = aero_velocity(x, [0.0; 3], p.radius, p.u_inf, inflow_rot);
        let got = &rotated.volume_target.data[i * 3..(i + 1) * 3];
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() <= 1e-10);
        }
    }
    for (i, &x) in rotated.surface_pos.iter().enumerate() {
        let want = aero_cp(x, [0.0; 3], inflow_rot);
        assert!((rotated.surface_target.data[i] - want).abs() <= 1e-10);
    }
}

#[test]
fn nsf_roundtrip_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let s = gen_internal_flow_sample(&hemo_params(), &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample_000000.nsf");
    nsf_write(&path, &s).unwrap();
    let back = nsf_read(&path).unwrap();
    assert_eq!(back, s);
    // bitwise: re-serialize and compare bytes
    let b1 = s.to_nsf().to_bytes().unwrap();
    let b2 = back.to_nsf().to_bytes().unwrap();
    assert_eq!(b1, b2);
}

#[test]
fn nsf_rejects_corruption() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let s = gen_external_flow_sample(&aero_params(), &mut rng);
    let bytes = s.to_nsf().to_bytes().unwrap();

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(NsfFile::from_bytes(&bad_magic), Err(DataError::BadMagic(_))));

    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    assert!(matches!(NsfFile::from_bytes(&bad_version), Err(DataError::VersionUnsupported(9))));

    let truncated = &bytes[..bytes.len() - 7];
    assert!(matches!(NsfFile::from_bytes(truncated), Err(DataError::TruncatedPayload { .. })));

    let mut padded = bytes.clone();
    padded.extend_from_slice(&[0u8; 4]);
    assert!(matches!(NsfFile::from_bytes(&padded), Err(DataError::ShapeMismatch { .. })));
}

#[test]
fn nsf_preserves_meta_and_f64_precision() {
    let value = std::f64::consts::PI * 1e-7;
    let file = NsfFile {
        fields: vec![NsfField {
            name: "x".into(),
            shape: vec![1],
            data: NsfData::F64(vec![value]),
        }],
        meta: serde_json::json!({"custom_key": {"nested": [1, 2, 3]}, "other": "kept"}),
    };
    let back = NsfFile::from_bytes(&file.to_bytes().unwrap()).unwrap();
    match &back.fields[0].data {
        NsfData::F64(v) => assert_eq!(v[0].to_bits(), value.to_bits()),
        _ => panic!("dtype changed"),
    }
    assert_eq!(back.meta, file.meta);
}

#[test]
fn generator_determinism() {
    let gen = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gen_internal_flow_sample(&hemo_params(), &mut rng).to_nsf().to_bytes().unwrap()
    };
    assert_eq!(gen(5), gen(5));
    assert_ne!(gen(5), gen(6));
}

#[test]
fn inclusion_of_alignment_meta() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let s = gen_external_flow_sample(&aero_params(), &mut rng);
    assert_eq!(s.meta["kind"], "aero");
}
