use super::*;
use crate::pga::{self, RigidMotion};
use crate::tensor::ops::{geometric_product_table, join_table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0f64..1.0));
    let n = (q.iter().map(|x| x * x).sum::<f64>()).sqrt().max(1e-9);
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub(crate) fn rand_versor(rng: &mut ChaCha8Rng, reflect: bool) -> pga::Versor {
    let mut m = RigidMotion {
        rotation: rand_rotation(rng),
        translation: std::array::from_fn(|_| rng.gen_range(-1.5..1.5)),
    };
    if reflect {
        let refl = RigidMotion::reflection([
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.5..1.0),
        ]);
        m.rotation = pga::mat_mul(&refl.rotation, &m.rotation);
    }
    pga::versor_from_motion(&m).unwrap()
}

/// Tokens whose multivector channels carry embedded points, planes and
/// random multivector noise, so point-distance attention paths are exercised.
pub(crate) fn rand_tokens(
    rng: &mut ChaCha8Rng,
    n: usize,
    n_mv: usize,
    n_s: usize,
) -> TokenSet<f64> {
    let mut mv = Vec::with_capacity(n * n_mv * 16);
    for _ in 0..n {
        for c in 0..n_mv {
            let m = match c % 3 {
                0 => pga::embed_point(std::array::from_fn(|_| rng.gen_range(-2.0..2.0))),
                1 => pga::embed_plane(
                    std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
                    rng.gen_range(-1.0..1.0),
                ),
                _ => {
                    let mut c = [0.0; 16];
                    for v in c.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                    pga::Multivector(c)
                }
            };
            mv.extend_from_slice(&m.0);
        }
    }
    let s: Vec<f64> = (0..n * n_s).map(|_| rng.gen_range(-1.0..1.0)).collect();
    TokenSet {
        mv: Tensor::from_f64_slice(&[n, n_mv, 16], &mv, false),
        s: Tensor::from_f64_slice(&[n, n_s], &s, false),
    }
}

fn rand_weight(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let scale = 1.0 / (shape[shape.len() - 1] as f64 * shape.len() as f64).sqrt();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::from_vec(shape, data, false)
}

pub(crate) fn rand_token_linear(
    rng: &mut ChaCha8Rng,
    in_mv: usize,
    out_mv: usize,
    in_s: usize,
    out_s: usize,
) -> TokenLinear<f64> {
    TokenLinear {
        w_mv: rand_weight(rng, &[out_mv, in_mv, 9]),
        w_s: rand_weight(rng, &[out_s, in_s.max(1)]).slice(1, 0, in_s).unwrap(),
        w_s_to_mv: rand_weight(rng, &[out_mv, in_s.max(1)]).slice(1, 0, in_s).unwrap(),
        w_mv_to_s: rand_weight(rng, &[out_s, in_mv]),
        b_mv: rand_weight(rng, &[out_mv]),
        b_s: rand_weight(rng, &[out_s]),
    }
}

pub(crate) fn rand_attention(
    rng: &mut ChaCha8Rng,
    n_mv: usize,
    n_s: usize,
    heads: usize,
) -> GeometricAttention<f64> {
    let pre = softplus_inverse_one();
    let mut head_pre = Vec::new();
    for _ in 0..heads * 3 {
        head_pre.push(pre + rng.gen_range(-0.2..0.2));
    }
    GeometricAttention {
        heads,
        w_k_mv: rand_weight(rng, &[heads * n_mv, n_mv, 9]),
        w_q_mv: rand_weight(rng, &[heads * n_mv, n_mv, 9]),
        w_v_mv: rand_weight(rng, &[heads * n_mv, n_mv, 9]),
        w_k_s: rand_weight(rng, &[n_s, n_s.max(1)]).slice(1, 0, n_s).unwrap(),
        w_q_s: rand_weight(rng, &[n_s, n_s.max(1)]).slice(1, 0, n_s).unwrap(),
        w_v_s: rand_weight(rng, &[n_s, n_s.max(1)]).slice(1, 0, n_s).unwrap(),
        head_pre: Tensor::from_f64_slice(&[heads, 3], &head_pre, false),
        out: rand_token_linear(rng, heads * n_mv, n_mv, n_s, n_s),
    }
}

fn rel_dev(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    let (da, db) = (a.data(), b.data());
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in da.iter().zip(db) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num / den.max(1e-300)).sqrt()
}

fn tokens_rel_dev(a: &TokenSet<f64>, b: &TokenSet<f64>) -> f64 {
    let mv = rel_dev(&a.mv, &b.mv);
    if b.n_s() == 0 {
        mv
    } else {
        mv.max(rel_dev(&a.s, &b.s))
    }
}

#[test]
fn equi_linear_grade0_identity_and_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let x = rand_tokens(&mut rng, 4, 2, 0);
    // weights selecting only grade-0 with w_0 = 1, on the diagonal pair
    let mut w = vec![0.0; 2 * 2 * 9];
    w[0] = 1.0; // out 0 <- in 0, map 0
    w[(1 * 2 + 1) * 9] = 1.0; // out 1 <- in 1, map 0
    let w = Tensor::from_f64_slice(&[2, 2, 9], &w, false);
    let y = equi_linear(&w, &x.mv).unwrap();
    for tok in 0..4 {
        for c in 0..2 {
            for comp in 0..16 {
                let got = y.data()[(tok * 2 + c) * 16 + comp];
                let want = if comp == 0 { x.mv.data()[(tok * 2 + c) * 16] } else { 0.0 };
                assert_eq!(got, want);
            }
        }
    }
    let zero_w = Tensor::<f64>::zeros(&[3, 2, 9]);
    let z = equi_linear(&zero_w, &x.mv).unwrap();
    assert!(z.data().iter().all(|&v| v == 0.0));
}

#[test]
fn equi_linear_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..10 {
        let x = rand_tokens(&mut rng, 5, 3, 0);
        let w = rand_weight(&mut rng, &[4, 3, 9]);
        let v = rand_versor(&mut rng, i % 2 == 0);
        let lhs = equi_linear(&w, &transform_tokens(&x, &v).unwrap().mv).unwrap();
        let moved = transform_tokens(
            &TokenSet { mv: equi_linear(&w, &x.mv).unwrap(), s: x.s.clone() },
            &v,
        )
        .unwrap();
        assert!(rel_dev(&lhs, &moved.mv) <= 1e-10, "dev {}", rel_dev(&lhs, &moved.mv));
    }
}

#[test]
fn bilinear_unit_scalar_and_linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let gp = geometric_product_table();
    let join = join_table();
    let x = rand_tokens(&mut rng, 3, 4, 0);
    // y: product half = embedded scalar 1, join half = zero
    let mut y = vec![0.0; 3 * 4 * 16];
    for tok in 0..3 {
        for c in 0..2 {
            y[(tok * 4 + c) * 16] = 1.0;
        }
    }
    let y = Tensor::from_f64_slice(&[3, 4, 16], &y, false);
    let paired = bilinear_pair(&x.mv, &y, &gp, &join).unwrap();
    // product half returns x's product half
    for tok in 0..3 {
        for c in 0..2 {
            for comp in 0..16 {
                let got = paired.data()[(tok * 4 + c) * 16 + comp];
                let want = x.mv.data()[(tok * 4 + c) * 16 + comp];
                assert!((got - want).abs() <= 1e-15);
            }
        }
    }
    // bilinearity: f(2x, y) = 2 f(x, y) for a fixed reference
    let y2 = rand_tokens(&mut rng, 3, 4, 0);
    let mix = rand_weight(&mut rng, &[4, 4, 9]);
    let reference = Tensor::from_f64_slice(&[1], &[0.7], false);
    let f1 = geometric_bilinear(&x.mv.mul_scalar(2.0), &y2.mv, &mix, &reference, &gp, &join)
        .unwrap();
    let f2 = geometric_bilinear(&x.mv, &y2.mv, &mix, &reference, &gp, &join)
        .unwrap()
        .mul_scalar(2.0);
    assert!(rel_dev(&f1, &f2) <= 1e-12);
}

#[test]
fn bilinear_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let gp = geometric_product_table();
    let join = join_table();
    for i in 0..10 {
        let x = rand_tokens(&mut rng, 4, 4, 0);
        let y = rand_tokens(&mut rng, 4, 4, 0);
        let mix = rand_weight(&mut rng, &[4, 4, 9]);
        // the orientation reference comes from a covariant token set, so the
        // block is equivariant for both parities
        let v = rand_versor(&mut rng, i % 2 == 0);
        let xt = transform_tokens(&x, &v).unwrap();
        let yt = transform_tokens(&y, &v).unwrap();
        let ref0 = pseudoscalar_reference(&x).unwrap();
        let ref_t = pseudoscalar_reference(&xt).unwrap();
        let lhs = geometric_bilinear(&xt.mv, &yt.mv, &mix, &ref_t, &gp, &join).unwrap();
        let rhs = transform_tokens(
            &TokenSet {
                mv: geometric_bilinear(&x.mv, &y.mv, &mix, &ref0, &gp, &join).unwrap(),
                s: x.s.clone(),
            },
            &v,
        )
        .unwrap();
        assert!(rel_dev(&lhs, &rhs.mv) <= 1e-10, "dev {}", rel_dev(&lhs, &rhs.mv));
    }
}

#[test]
fn gated_nonlinearity_gate_behavior() {
    // zero grade-0 gate kills the channel
    let mut mv = vec![0.0; 16];
    mv[3] = 2.0; // some non-scalar content, x_s = 0
    let x = Tensor::<f64>::from_vec(&[1, 1, 16], mv, false);
    let y = gated_nonlinearity(&x).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));

    // tail: gate/x_s -> 1, so a channel with x_s = 10 passes with gain
    // gelu(10) = 10 within 1e-6 relative
    let mut mv = vec![0.0; 16];
    mv[0] = 10.0;
    mv[4] = 1.0;
    let x = Tensor::<f64>::from_vec(&[1, 1, 16], mv, false);
    let y = gated_nonlinearity(&x).unwrap();
    let gate_ratio = y.data()[4] / (10.0 * x.data()[4]);
    assert!((gate_ratio - 1.0).abs() <= 1e-6, "gate ratio {gate_ratio}");
}

#[test]
fn gated_nonlinearity_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for i in 0..10 {
        let x = rand_tokens(&mut rng, 5, 3, 0);
        let v = rand_versor(&mut rng, i % 2 == 0);
        let lhs = gated_nonlinearity(&transform_tokens(&x, &v).unwrap().mv).unwrap();
        let rhs = transform_tokens(
            &TokenSet { mv: gated_nonlinearity(&x.mv).unwrap(), s: x.s.clone() },
            &v,
        )
        .unwrap();
        assert!(rel_dev(&lhs, &rhs.mv) <= 1e-10);
    }
}

#[test]
fn layer_norm_fixed_point_and_scale_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    // build tokens with mean inner norm exactly 1 per token
    let x = rand_tokens(&mut rng, 4, 3, 0);
    let normed = equi_layer_norm(&x.mv, 1e-6).unwrap();
    let twice = equi_layer_norm(&normed, 1e-6).unwrap();
    assert!(rel_dev(&twice, &normed) <= 1e-6);

    let scaled = equi_layer_norm(&x.mv.mul_scalar(10.0), 1e-6).unwrap();
    assert!(rel_dev(&scaled, &normed) <= 1e-6);
}

#[test]
fn layer_norm_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for i in 0..10 {
        let x = rand_tokens(&mut rng, 5, 3, 4);
        let v = rand_versor(&mut rng, i % 2 == 0);
        let lhs = token_norm(&transform_tokens(&x, &v).unwrap(), 1e-6).unwrap();
        let rhs = transform_tokens(&token_norm(&x, 1e-6).unwrap(), &v).unwrap();
        assert!(tokens_rel_dev(&lhs, &rhs) <= 1e-10);
    }
}

#[test]
fn attention_weight_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let head = HeadWeights {
        pre: Tensor::from_f64_slice(&[3], &[softplus_inverse_one(); 3], false),
    };
    // single key
    let q = rand_tokens(&mut rng, 3, 2, 2);
    let k = rand_tokens(&mut rng, 1, 2, 2);
    let w = attention_weights(&q, &k, &head, None).unwrap();
    assert!(w.data().iter().all(|&v| (v - 1.0).abs() <= 1e-15));

    // two identical keys
    let k1 = rand_tokens(&mut rng, 1, 2, 2);
    let k2 = TokenSet {
        mv: Tensor::concat(&[k1.mv.clone(), k1.mv.clone()], 0).unwrap(),
        s: Tensor::concat(&[k1.s.clone(), k1.s.clone()], 0).unwrap(),
    };
    let w = attention_weights(&q, &k2, &head, None).unwrap();
    assert!(w.data().iter().all(|&v| (v - 0.5).abs() <= 1e-12));
}

#[test]
fn attention_logit_hand_value() {
    // q = k = embedded origin point, n_mv = 1, n_s = 0, alpha = beta = 1:
    // inner term 1, distance term 0 => logit = 1/sqrt(13)
    let p = pga::embed_point([0.0, 0.0, 0.0]);
    let tokens = TokenSet::<f64> {
        mv: Tensor::from_f64_slice(&[1, 1, 16], &p.0, false),
        s: Tensor::zeros(&[1, 0]),
    };
    let head = HeadWeights {
        pre: Tensor::from_f64_slice(&[3], &[softplus_inverse_one(); 3], false),
    };
    let logits = attention_logits(&tokens, &tokens, &head, None).unwrap();
    let want = 1.0 / 13f64.sqrt();
    assert!((logits.data()[0] - want).abs() <= 1e-12, "logit {}", logits.data()[0]);
    assert!((logits.data()[0] - 0.27735).abs() <= 1e-5);
}

#[test]
fn attention_weights_motion_invariant_rows_sum_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let head = HeadWeights {
        pre: Tensor::from_f64_slice(&[3], &[softplus_inverse_one(); 3], false),
    };
    for i in 0..10 {
        let q = rand_tokens(&mut rng, 6, 2, 3);
        let k = rand_tokens(&mut rng, 4, 2, 3);
        let w0 = attention_weights(&q, &k, &head, None).unwrap();
        for row in w0.data().chunks(4) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
        let v = rand_versor(&mut rng, i % 2 == 0);
        let w1 = attention_weights(
            &transform_tokens(&q, &v).unwrap(),
            &transform_tokens(&k, &v).unwrap(),
            &head,
            None,
        )
        .unwrap();
        assert!(rel_dev(&w1, &w0) <= 1e-12, "weights moved by {}", rel_dev(&w1, &w0));
    }
}

#[test]
fn self_attention_single_token_and_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let attn = rand_attention(&mut rng, 2, 4, 2);
    let x = rand_tokens(&mut rng, 1, 2, 4);
    let got = attn.self_attention(&x).unwrap();
    // single token: weights are 1, so output = out(value projection)
    let v = TokenSet {
        mv: equi_linear(&attn.w_v_mv, &x.mv).unwrap(),
        s: scalar_linear(&attn.w_v_s, None, &x.s).unwrap(),
    };
    let want = attn.out.apply(&v).unwrap();
    assert!(tokens_rel_dev(&got, &want) <= 1e-14);

    // permutation equivariance
    let x8 = rand_tokens(&mut rng, 8, 2, 4);
    let perm = [3usize, 7, 1, 0, 5, 2, 6, 4];
    let y = attn.self_attention(&x8).unwrap();
    let y_perm = attn.self_attention(&x8.gather(&perm).unwrap()).unwrap();
    let y_then_perm = y.gather(&perm).unwrap();
    assert!(tokens_rel_dev(&y_perm, &y_then_perm) <= 1e-12);
}

#[test]
fn self_attention_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let attn = rand_attention(&mut rng, 2, 4, 2);
    for i in 0..8 {
        let x = rand_tokens(&mut rng, 8, 2, 4);
        let v = rand_versor(&mut rng, i % 2 == 0);
        let lhs = attn.self_attention(&transform_tokens(&x, &v).unwrap()).unwrap();
        let rhs = transform_tokens(&attn.self_attention(&x).unwrap(), &v).unwrap();
        let dev = tokens_rel_dev(&lhs, &rhs);
        assert!(dev <= 1e-9, "self attention equivariance dev {dev}");
    }
}

#[test]
fn anchor_attention_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let attn = rand_attention(&mut rng, 2, 4, 2);
    let x = rand_tokens(&mut rng, 10, 2, 4);

    // anchors = all tokens reproduces self-attention
    let all: Vec<usize> = (0..10).collect();
    let a = attn.anchor_attention(&x, &all).unwrap();
    let s = attn.self_attention(&x).unwrap();
    assert!(tokens_rel_dev(&a, &s) <= 1e-12);

    // removing a non-anchor token leaves all other outputs unchanged
    let anchors = vec![0usize, 2, 5];
    let full = attn.anchor_attention(&x, &anchors).unwrap();
    // removing index 7 shifts only tokens after it, so anchors 0,2,5 keep
    // their positions in the reduced set
    let keep: Vec<usize> = (0..10).filter(|&i| i != 7).collect();
    let reduced = attn.anchor_attention(&x.gather(&keep).unwrap(), &anchors).unwrap();
    for (new_row, &old_row) in keep.iter().enumerate() {
        for c in 0..2 * 16 {
            let got = reduced.mv.data()[new_row * 32 + c];
            let want = full.mv.data()[old_row * 32 + c];
            assert!((got - want).abs() <= 1e-12);
        }
    }

    // errors
    assert!(matches!(attn.anchor_attention(&x, &[]), Err(LayersError::EmptyAnchors)));
    assert!(matches!(
        attn.anchor_attention(&x, &[1, 1]),
        Err(LayersError::DuplicateAnchor(1))
    ));

    // equivariance
    let v = rand_versor(&mut rng, true);
    let lhs = attn.anchor_attention(&transform_tokens(&x, &v).unwrap(), &anchors).unwrap();
    let rhs = transform_tokens(&attn.anchor_attention(&x, &anchors).unwrap(), &v).unwrap();
    assert!(tokens_rel_dev(&lhs, &rhs) <= 1e-9);
}

#[test]
fn positional_feature_layout() {
    let feats = scalar_positional_features(&[0.0, 0.0], 1, 2, 3);
    assert_eq!(feats.len(), 2 * 2 * 3);
    assert_eq!(&feats[0..3], &[0.0, 0.0, 0.0]);
    assert_eq!(&feats[3..6], &[1.0, 1.0, 1.0]);

    let narrow = scalar_positional_features(&[0.7], 1, 1, 4);
    let wide = scalar_positional_features(&[0.7], 1, 1, 8);
    assert_eq!(wide.len(), 2 * narrow.len());
}

#[test]
fn rope_identity_norm_and_relative_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let s_data: Vec<f64> = (0..2 * 12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = Tensor::<f64>::from_vec(&[2, 12], s_data.clone(), false);

    // position 0 -> identity
    let id = rope_rotate(&s, Some((&[0.0, 0.0], 1))).unwrap();
    assert!(rel_dev(&id, &s) <= 1e-15);

    // norm preservation per token
    let rot = rope_rotate(&s, Some((&[0.9, -2.3], 1))).unwrap();
    for row in 0..2 {
        let n0: f64 = s.data()[row * 12..(row + 1) * 12].iter().map(|v| v * v).sum();
        let n1: f64 = rot.data()[row * 12..(row + 1) * 12].iter().map(|v| v * v).sum();
        assert!((n0 - n1).abs() <= 1e-12);
    }

    // R(q, p1) . R(k, p2) depends only on p1 - p2
    let q_row: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let k_row: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dot = |p1: f64, p2: f64| -> f64 {
        let q = Tensor::<f64>::from_vec(&[1, 12], q_row.clone(), false);
        let k = Tensor::<f64>::from_vec(&[1, 12], k_row.clone(), false);
        let qr = rope_rotate(&q, Some((&[p1], 1))).unwrap();
        let kr = rope_rotate(&k, Some((&[p2], 1))).unwrap();
        qr.data().iter().zip(kr.data()).map(|(a, b)| a * b).sum()
    };
    for (p1, p2, shift) in [(0.3, 1.1, 0.7), (-2.0, 0.5, 3.3), (5.0, 5.0, -1.0)] {
        let d0 = dot(p1, p2);
        let d1 = dot(p1 + shift, p2 + shift);
        assert!((d0 - d1).abs() <= 1e-10, "relative property violated: {d0} vs {d1}");
    }

    // odd grouping is rejected
    let bad = Tensor::<f64>::zeros(&[1, 6]);
    assert!(matches!(
        rope_rotate(&bad, Some((&[0.0, 0.0, 0.0, 0.0], 4))),
        Err(LayersError::OddChannelCount { .. })
    ));
}

#[test]
fn rope_invariant_under_motion_of_underlying_geometry() {
    // rope acts on invariant scalars only; moving the geometry does not
    // change them, so the encoding is unchanged by construction
    let s = Tensor::<f64>::from_vec(&[1, 4], vec![0.1, 0.2, 0.3, 0.4], false);
    let a = rope_rotate(&s, Some((&[1.25], 1))).unwrap();
    let b = rope_rotate(&s, Some((&[1.25], 1))).unwrap();
    assert_eq!(a.data(), b.data());
}
