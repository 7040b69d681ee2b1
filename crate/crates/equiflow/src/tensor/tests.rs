use super::ops::{geometric_product_table, join_table};
use super::*;
use crate::pga;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize], rg: bool) -> Tensor<f64> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data, rg)
}

#[test]
fn softmax_symmetry_and_identity_matmul() {
    let x = Tensor::<f64>::from_vec(&[1, 2], vec![0.0, 0.0], false);
    let y = x.softmax(1).unwrap();
    assert_eq!(y.data(), &[0.5, 0.5]);

    let eye = Tensor::<f64>::from_vec(&[3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.], false);
    let a = Tensor::<f64>::from_vec(&[3, 2], vec![1., 2., 3., 4., 5., 6.], false);
    let b = eye.matmul(&a).unwrap();
    assert_eq!(b.data(), a.data());
}

#[test]
fn softmax_shift_stable() {
    // double path: exact row sum
    let x = Tensor::<f64>::from_vec(&[1, 3], vec![1000.0, 1000.0, 999.0], false);
    let y = x.softmax(1).unwrap();
    assert!(y.data().iter().all(|v| v.is_finite()));
    let sum: f64 = y.data().iter().sum();
    assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");

    // single path vs extended-precision oracle
    let xf = Tensor::<f32>::from_vec(&[1, 3], vec![1000.0, 1000.0, 999.0], false);
    let yf = xf.softmax(1).unwrap();
    let m = 1000.0f64;
    let exps: Vec<f64> = [1000.0, 1000.0, 999.0].iter().map(|v| (v - m).exp()).collect();
    let denom: f64 = exps.iter().sum();
    for (got, want) in yf.data().iter().zip(exps.iter().map(|e| e / denom)) {
        assert!(
            (got.as_f64() - want).abs() <= 1e-6,
            "f32 softmax {got} vs oracle {want}"
        );
    }
}

#[test]
fn backward_simple_cases() {
    // d(x*x)/dx at x=3 -> 6
    let x = Tensor::<f64>::from_vec(&[1], vec![3.0], true);
    let y = x.mul(&x).unwrap().sum();
    let g = y.backward().unwrap();
    assert_eq!(g.grad(&x).unwrap(), &[6.0]);

    // gradient of mean over n elements -> 1/n each
    let x = Tensor::<f64>::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0], true);
    let g = x.mean().backward().unwrap();
    assert_eq!(g.grad(&x).unwrap(), &[0.25; 4]);
}

#[test]
fn backward_linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = randn(&mut rng, &[6], true);
    let w = randn(&mut rng, &[6], false);
    let l1 = x.mul(&w).unwrap().sum();
    let l2 = x.tanh().sum();
    let combined = l1.add(&l2).unwrap().sum();
    let g_comb = combined.backward().unwrap().grad_or_zero(&x);
    let g1 = l1.backward().unwrap().grad_or_zero(&x);
    let g2 = l2.backward().unwrap().grad_or_zero(&x);
    for i in 0..6 {
        assert!((g_comb[i] - (g1[i] + g2[i])).abs() <= 1e-12);
    }
}

#[test]
fn backward_three_layer_vs_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w1 = randn(&mut rng, &[5, 4], false);
    let w2 = randn(&mut rng, &[4, 3], false);
    let x0 = randn(&mut rng, &[2, 5], false);
    let f = |x: &Tensor<f64>| -> TensorResult<f64> {
        let h = x.matmul(&w1)?.gelu();
        let h = h.matmul(&w2)?.tanh();
        Ok(h.mul(&h)?.sum())
    };
    let report = grad_check(f, &x0, 1e-5).unwrap();
    assert!(report.max_rel_err <= 1e-5, "max rel err {:?}", report);
}

#[test]
fn grad_check_sum_of_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = randn(&mut rng, &[7], false);
    let report = grad_check(|x| Ok(x.mul(x)?.sum()), &x, 1e-5).unwrap();
    assert!(report.max_rel_err <= 1e-8, "{report:?}");
}

#[test]
fn grad_check_covers_structural_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = randn(&mut rng, &[4, 6], false);
    let f = |x: &Tensor<f64>| -> TensorResult<f64> {
        let a = x.slice(1, 0, 3)?;
        let b = x.slice(1, 3, 6)?;
        let c = Tensor::concat(&[a.clone(), b.mul(&a)?], 1)?;
        let g = c.gather_rows(&[2, 0, 2])?;
        let p = g.permute(&[1, 0])?;
        let s = p.softmax(0)?;
        // weight the softmax rows so the loss is not a constant
        let w: Vec<f64> = (0..18).map(|i| (i as f64 + 1.0) * 0.1).collect();
        let z = s.reshape(&[18])?.mul(&Tensor::from_vec(&[18], w, false))?.sum_axis(0)?;
        Ok(z.sum())
    };
    let report = grad_check(f, &x, 1e-6).unwrap();
    assert!(report.max_rel_err <= 1e-7, "{report:?}");
}

#[test]
fn grad_check_reductions_and_scalars() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = randn(&mut rng, &[3, 5], false);
    let f = |x: &Tensor<f64>| -> TensorResult<f64> {
        let m = x.mean_axis_keep(1)?;
        let centered = x.sub(&m)?;
        let v = centered.mul(&centered)?.mean_axis_keep(1)?.add_scalar(1e-3);
        let n = centered.div(&v.sqrt())?;
        Ok(n.exp().sum().mul_scalar(0.1))
    };
    let report = grad_check(f, &x, 1e-6).unwrap();
    assert!(report.max_rel_err <= 1e-6, "{report:?}");
}

#[test]
fn grad_check_matmul_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = randn(&mut rng, &[3, 4], false);
    let b = randn(&mut rng, &[4, 2], false);
    let c = randn(&mut rng, &[5, 4], false);
    let w = randn(&mut rng, &[2, 4], false);
    let batched = randn(&mut rng, &[3, 4, 2], false);

    let r1 = grad_check(|x| x.matmul(&b)?.power(2.0).sum().mul_scalar(0.5).sum_axis(0), &a, 1e-6)
        .unwrap();
    assert!(r1.max_rel_err <= 1e-7, "nn {r1:?}");
    let r2 = grad_check(|x| Ok(x.matmul_nt(&c)?.tanh().sum()), &a, 1e-6).unwrap();
    assert!(r2.max_rel_err <= 1e-7, "nt {r2:?}");
    let r3 = grad_check(|x| Ok(x.matmul_tn(&a)?.sum()), &randn(&mut rng, &[3, 5], false), 1e-6)
        .unwrap();
    assert!(r3.max_rel_err <= 1e-7, "tn {r3:?}");
    let r4 = grad_check(|x| Ok(w.bmm_left(&x.gelu())?.power(2.0).sum()), &batched, 1e-6).unwrap();
    assert!(r4.max_rel_err <= 1e-6, "bmm {r4:?}");
}

#[test]
fn pair_product_matches_pga_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gp = geometric_product_table();
    let join = join_table();
    for _ in 0..20 {
        let a = randn(&mut rng, &[3, 16], false);
        let b = randn(&mut rng, &[3, 16], false);
        let prod = a.pair_product(&b, &gp).unwrap();
        let jn = a.pair_product(&b, &join).unwrap();
        for lane in 0..3 {
            let mv_a = pga::Multivector(a.data()[lane * 16..(lane + 1) * 16].try_into().unwrap());
            let mv_b = pga::Multivector(b.data()[lane * 16..(lane + 1) * 16].try_into().unwrap());
            let want_p = pga::geometric_product(&mv_a, &mv_b);
            let want_j = pga::dual_and_join(&mv_a, &mv_b);
            for k in 0..16 {
                assert!((prod.data()[lane * 16 + k] - want_p.0[k]).abs() <= 1e-12);
                assert!((jn.data()[lane * 16 + k] - want_j.0[k]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn pair_product_and_equi_basis_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gp = geometric_product_table();
    let other = randn(&mut rng, &[2, 16], false);
    let x = randn(&mut rng, &[2, 16], false);
    let r = grad_check(|x| Ok(x.pair_product(&other, &gp)?.power(2.0).sum()), &x, 1e-6).unwrap();
    assert!(r.max_rel_err <= 1e-7, "pair fwd {r:?}");
    let r2 =
        grad_check(|x| Ok(other.pair_product(&x.tanh(), &gp)?.sum()), &x, 1e-6).unwrap();
    assert!(r2.max_rel_err <= 1e-7, "pair rhs {r2:?}");
    let r3 = grad_check(|x| Ok(x.equi_basis()?.power(2.0).sum()), &x, 1e-6).unwrap();
    assert!(r3.max_rel_err <= 1e-7, "equi basis {r3:?}");
}

#[test]
fn equi_basis_matches_direct_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = randn(&mut rng, &[1, 1, 16], false);
    let e = x.equi_basis().unwrap();
    let mv = pga::Multivector(x.data().try_into().unwrap());
    let e0 = pga::Multivector::basis(1);
    for k in 0..5 {
        let want = mv.grade(k);
        for c in 0..16 {
            assert_eq!(e.data()[k * 16 + c], want.0[c], "grade map {k}");
        }
    }
    for k in 0..4 {
        let want = pga::geometric_product(&e0, &mv.grade(k));
        for c in 0..16 {
            assert_eq!(e.data()[(5 + k) * 16 + c], want.0[c], "e0 map {k}");
        }
    }
}

#[test]
fn scatter_add_and_gather_roundtrip() {
    let base = Tensor::<f64>::zeros(&[4, 2]);
    let upd = Tensor::<f64>::from_vec(&[2, 2], vec![1., 2., 3., 4.], true);
    let out = base.scatter_add_rows(&[3, 1], &upd).unwrap();
    assert_eq!(out.data(), &[0., 0., 3., 4., 0., 0., 1., 2.]);
    let g = out.power(2.0).sum().backward().unwrap();
    let gu = g.grad_or_zero(&upd);
    assert_eq!(gu, vec![2., 4., 6., 8.]);

    assert!(matches!(
        base.gather_rows(&[9]),
        Err(TensorError::IndexOutOfRange { index: 9, len: 4 })
    ));
}

#[test]
fn sign_has_zero_gradient() {
    let x = Tensor::<f64>::from_vec(&[3], vec![-2.0, 0.0, 5.0], true);
    let y = x.sign_stopgrad();
    assert_eq!(y.data(), &[-1.0, 0.0, 1.0]);
    let loss = y.mul(&x).unwrap().sum();
    let g = loss.backward().unwrap().grad_or_zero(&x);
    // only the product path contributes: d/dx sign(x)*x = sign(x)
    assert_eq!(g, vec![-1.0, 0.0, 1.0]);
}

#[test]
fn shape_errors() {
    let a = Tensor::<f64>::zeros(&[2, 3]);
    let b = Tensor::<f64>::zeros(&[4, 2]);
    assert!(matches!(a.matmul(&b), Err(TensorError::ShapeMismatch { .. })));
    assert!(matches!(a.add(&b), Err(TensorError::ShapeMismatch { .. })));
    let loss = Tensor::<f64>::zeros(&[3]);
    assert!(matches!(loss.backward(), Err(TensorError::NotScalarLoss { numel: 3 })));
}

#[test]
fn broadcast_add_mul() {
    let a = Tensor::<f64>::from_vec(&[2, 2, 2], (1..=8).map(|v| v as f64).collect(), true);
    let b = Tensor::<f64>::from_vec(&[2, 1, 1], vec![10.0, 100.0], true);
    let y = a.mul(&b).unwrap();
    assert_eq!(y.shape(), &[2, 2, 2]);
    assert_eq!(y.data(), &[10., 20., 30., 40., 500., 600., 700., 800.]);
    let g = y.sum().backward().unwrap();
    assert_eq!(g.grad_or_zero(&b), vec![1.0 + 2.0 + 3.0 + 4.0, 5.0 + 6.0 + 7.0 + 8.0]);
    assert_eq!(g.grad_or_zero(&a), vec![10., 10., 10., 10., 100., 100., 100., 100.]);
}

#[test]
fn repeated_run_is_bitwise_reproducible() {
    let run = || -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = randn(&mut rng, &[8, 8], true);
        let w = randn(&mut rng, &[8, 8], false);
        let loss = x.matmul(&w).unwrap().gelu().softmax(1).unwrap().power(2.0).sum();
        let g = loss.backward().unwrap();
        g.grad_or_zero(&x)
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
