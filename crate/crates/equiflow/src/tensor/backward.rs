//! Adjoint rules for every primitive.

use super::ops::{matmul_nn_kernel, matmul_nt_kernel, matmul_tn_kernel};
use super::*;

/// Graph inputs of a node, in a fixed order (drives the topological sort).
pub(crate) fn inputs<T: Real>(t: &Tensor<T>) -> Vec<&Tensor<T>> {
    match &t.0.op {
        Op::Leaf => vec![],
        Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::Div(a, b)
        | Op::MatmulNN(a, b)
        | Op::MatmulNT(a, b)
        | Op::MatmulTN(a, b)
        | Op::BmmLeft(a, b)
        | Op::PairProduct(a, b, _)
        | Op::ScatterAdd(a, b, _) => vec![a, b],
        Op::AddScalar(a, _)
        | Op::MulScalar(a, _)
        | Op::Exp(a)
        | Op::Ln(a)
        | Op::Tanh(a)
        | Op::Gelu(a)
        | Op::Sqrt(a)
        | Op::Power(a, _)
        | Op::SignStopGrad(a)
        | Op::Sum(a)
        | Op::Mean(a)
        | Op::Max(a)
        | Op::SumAxis(a, _)
        | Op::Softmax(a, _)
        | Op::Gather(a, _)
        | Op::Slice(a, _, _, _)
        | Op::Reshape(a)
        | Op::Permute(a, _)
        | Op::EquiBasis(a) => vec![a],
        Op::Concat(parts, _) => parts.iter().collect(),
    }
}

fn add_into<T: Real>(grads: &mut HashMap<u64, Vec<T>>, t: &Tensor<T>, delta: Vec<T>) {
    if !t.requires_grad() {
        return;
    }
    match grads.entry(t.id()) {
        std::collections::hash_map::Entry::Occupied(mut e) => {
            for (g, d) in e.get_mut().iter_mut().zip(delta) {
                *g += d;
            }
        }
        std::collections::hash_map::Entry::Vacant(e) => {
            e.insert(delta);
        }
    }
}

/// Push the output gradient of `t` onto its inputs.
pub(crate) fn accumulate<T: Real>(t: &Tensor<T>, gout: &[T], grads: &mut HashMap<u64, Vec<T>>) {
    match &t.0.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            let map = BroadcastMap::new("add", a.shape(), b.shape()).unwrap();
            if map.identical() {
                add_into(grads, a, gout.to_vec());
                add_into(grads, b, gout.to_vec());
            } else {
                add_into(grads, a, map.reduce_to(gout, a.shape(), true));
                add_into(grads, b, map.reduce_to(gout, b.shape(), false));
            }
        }
        Op::Sub(a, b) => {
            let map = BroadcastMap::new("sub", a.shape(), b.shape()).unwrap();
            if map.identical() {
                add_into(grads, a, gout.to_vec());
                add_into(grads, b, gout.iter().map(|&g| -g).collect());
            } else {
                add_into(grads, a, map.reduce_to(gout, a.shape(), true));
                let mut gb = map.reduce_to(gout, b.shape(), false);
                for g in gb.iter_mut() {
                    *g = -*g;
                }
                add_into(grads, b, gb);
            }
        }
        Op::Mul(a, b) => {
            binary_pointwise_backward(a, b, gout, grads, |g, av, bv| (g * bv, g * av));
        }
        Op::Div(a, b) => {
            binary_pointwise_backward(a, b, gout, grads, |g, av, bv| {
                (g / bv, -g * av / (bv * bv))
            });
        }
        Op::AddScalar(a, _) => add_into(grads, a, gout.to_vec()),
        Op::MulScalar(a, c) => {
            add_into(grads, a, gout.iter().map(|&g| g * *c).collect());
        }
        Op::Exp(a) => {
            let y = t.data();
            add_into(grads, a, gout.iter().zip(y).map(|(&g, &y)| g * y).collect());
        }
        Op::Ln(a) => {
            let x = a.data();
            add_into(grads, a, gout.iter().zip(x).map(|(&g, &x)| g / x).collect());
        }
        Op::Tanh(a) => {
            let y = t.data();
            add_into(
                grads,
                a,
                gout.iter().zip(y).map(|(&g, &y)| g * (T::one() - y * y)).collect(),
            );
        }
        Op::Gelu(a) => {
            let x = a.data();
            let half = T::from_f64(0.5);
            let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
            let inv_sqrt_2pi = T::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt());
            let delta: Vec<T> = gout
                .iter()
                .zip(x)
                .map(|(&g, &x)| {
                    let cdf = half * (T::one() + (x * inv_sqrt2).erf());
                    let pdf = inv_sqrt_2pi * (-half * x * x).exp();
                    g * (cdf + x * pdf)
                })
                .collect();
            add_into(grads, a, delta);
        }
        Op::Sqrt(a) => {
            let y = t.data();
            let half = T::from_f64(0.5);
            add_into(grads, a, gout.iter().zip(y).map(|(&g, &y)| g * half / y).collect());
        }
        Op::Power(a, p) => {
            let x = a.data();
            add_into(
                grads,
                a,
                gout.iter().zip(x).map(|(&g, &x)| g * *p * x.powf(*p - T::one())).collect(),
            );
        }
        Op::SignStopGrad(_) => {}
        Op::Sum(a) => {
            let g = gout[0];
            add_into(grads, a, vec![g; a.numel()]);
        }
        Op::Mean(a) => {
            let g = gout[0] / T::from_f64(a.numel() as f64);
            add_into(grads, a, vec![g; a.numel()]);
        }
        Op::Max(a) => {
            // subgradient routed to the first maximum
            let x = a.data();
            let mut best = 0;
            for (i, v) in x.iter().enumerate() {
                if *v > x[best] {
                    best = i;
                }
            }
            let mut delta = vec![T::zero(); a.numel()];
            delta[best] = gout[0];
            add_into(grads, a, delta);
        }
        Op::SumAxis(a, axis) => {
            let shape = a.shape();
            let outer: usize = shape[..*axis].iter().product();
            let len = shape[*axis];
            let inner: usize = shape[*axis + 1..].iter().product();
            let mut delta = vec![T::zero(); a.numel()];
            for o in 0..outer {
                for k in 0..len {
                    let dst = &mut delta[(o * len + k) * inner..(o * len + k + 1) * inner];
                    dst.copy_from_slice(&gout[o * inner..(o + 1) * inner]);
                }
            }
            add_into(grads, a, delta);
        }
        Op::Softmax(a, axis) => {
            let y = t.data();
            let shape = a.shape();
            let outer: usize = shape[..*axis].iter().product();
            let len = shape[*axis];
            let inner: usize = shape[*axis + 1..].iter().product();
            let mut delta = vec![T::zero(); a.numel()];
            for o in 0..outer {
                for i in 0..inner {
                    let mut dot = T::zero();
                    for k in 0..len {
                        let off = (o * len + k) * inner + i;
                        dot += gout[off] * y[off];
                    }
                    for k in 0..len {
                        let off = (o * len + k) * inner + i;
                        delta[off] = (gout[off] - dot) * y[off];
                    }
                }
            }
            add_into(grads, a, delta);
        }
        Op::Gather(a, idx) => {
            let row_len: usize = a.shape()[1..].iter().product();
            let mut delta = vec![T::zero(); a.numel()];
            for (m, &ix) in idx.iter().enumerate() {
                let dst = &mut delta[ix * row_len..(ix + 1) * row_len];
                for (d, g) in dst.iter_mut().zip(&gout[m * row_len..(m + 1) * row_len]) {
                    *d += *g;
                }
            }
            add_into(grads, a, delta);
        }
        Op::ScatterAdd(base, updates, idx) => {
            add_into(grads, base, gout.to_vec());
            if updates.requires_grad() {
                let row_len: usize = base.shape()[1..].iter().product();
                let mut delta = vec![T::zero(); updates.numel()];
                for (m, &ix) in idx.iter().enumerate() {
                    delta[m * row_len..(m + 1) * row_len]
                        .copy_from_slice(&gout[ix * row_len..(ix + 1) * row_len]);
                }
                add_into(grads, updates, delta);
            }
        }
        Op::Concat(parts, axis) => {
            let first = parts[0].shape();
            let outer: usize = first[..*axis].iter().product();
            let inner: usize = first[*axis + 1..].iter().product();
            let total: usize = parts.iter().map(|p| p.shape()[*axis]).sum();
            let out_row = total * inner;
            let mut offset = 0;
            for p in parts {
                let plen = p.shape()[*axis] * inner;
                let mut delta = vec![T::zero(); p.numel()];
                for o in 0..outer {
                    delta[o * plen..(o + 1) * plen]
                        .copy_from_slice(&gout[o * out_row + offset..o * out_row + offset + plen]);
                }
                add_into(grads, p, delta);
                offset += plen;
            }
        }
        Op::Slice(a, axis, start, end) => {
            let shape = a.shape();
            let outer: usize = shape[..*axis].iter().product();
            let len = shape[*axis];
            let inner: usize = shape[*axis + 1..].iter().product();
            let mut delta = vec![T::zero(); a.numel()];
            let cut = (end - start) * inner;
            for o in 0..outer {
                let base = (o * len + start) * inner;
                delta[base..base + cut].copy_from_slice(&gout[o * cut..(o + 1) * cut]);
            }
            add_into(grads, a, delta);
        }
        Op::Reshape(a) => add_into(grads, a, gout.to_vec()),
        Op::Permute(a, perm) => {
            // inverse permutation of the gradient
            let mut inv = vec![0; perm.len()];
            for (i, &p) in perm.iter().enumerate() {
                inv[p] = i;
            }
            let out_shape: Vec<usize> = perm.iter().map(|&p| a.shape()[p]).collect();
            let g_t = Tensor::from_vec(&out_shape, gout.to_vec(), false);
            let delta = g_t.permute(&inv).expect("permute backward");
            add_into(grads, a, delta.data().to_vec());
        }
        Op::MatmulNN(a, b) => {
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            if a.requires_grad() {
                add_into(grads, a, matmul_nt_kernel(gout, b.data(), m, n, k));
            }
            if b.requires_grad() {
                add_into(grads, b, matmul_tn_kernel(a.data(), gout, m, k, n));
            }
        }
        Op::MatmulNT(a, b) => {
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[0];
            if a.requires_grad() {
                add_into(grads, a, matmul_nn_kernel(gout, b.data(), m, n, k));
            }
            if b.requires_grad() {
                add_into(grads, b, matmul_tn_kernel(gout, a.data(), m, n, k));
            }
        }
        Op::MatmulTN(a, b) => {
            let (k, m) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            if a.requires_grad() {
                add_into(grads, a, matmul_nt_kernel(b.data(), gout, k, n, m));
            }
            if b.requires_grad() {
                add_into(grads, b, matmul_nn_kernel(a.data(), gout, k, m, n));
            }
        }
        Op::BmmLeft(a, b) => {
            let (p, q) = (a.shape()[0], a.shape()[1]);
            let (batch, r) = (b.shape()[0], b.shape()[2]);
            if a.requires_grad() {
                let mut da = vec![T::zero(); p * q];
                for bi in 0..batch {
                    let gb = &gout[bi * p * r..(bi + 1) * p * r];
                    let bb = &b.data()[bi * q * r..(bi + 1) * q * r];
                    let part = matmul_nt_kernel(gb, bb, p, r, q);
                    for (d, v) in da.iter_mut().zip(part) {
                        *d += v;
                    }
                }
                add_into(grads, a, da);
            }
            if b.requires_grad() {
                let mut db = vec![T::zero(); batch * q * r];
                for bi in 0..batch {
                    let gb = &gout[bi * p * r..(bi + 1) * p * r];
                    let part = matmul_tn_kernel(a.data(), gb, p, q, r);
                    db[bi * q * r..(bi + 1) * q * r].copy_from_slice(&part);
                }
                add_into(grads, b, db);
            }
        }
        Op::PairProduct(a, b, table) => {
            let lane = table.lane;
            let lanes = a.numel() / lane;
            let entries: Vec<(usize, usize, usize, T)> = table
                .entries
                .iter()
                .map(|&(i, j, k, s)| (i as usize, j as usize, k as usize, T::from_f64(s as f64)))
                .collect();
            let (da_src, db_src) = (a.data(), b.data());
            if a.requires_grad() {
                let mut da = vec![T::zero(); a.numel()];
                for li in 0..lanes {
                    let g = &gout[li * lane..(li + 1) * lane];
                    let bl = &db_src[li * lane..(li + 1) * lane];
                    let dl = &mut da[li * lane..(li + 1) * lane];
                    for &(i, j, k, s) in &entries {
                        dl[i] += s * g[k] * bl[j];
                    }
                }
                add_into(grads, a, da);
            }
            if b.requires_grad() {
                let mut db = vec![T::zero(); b.numel()];
                for li in 0..lanes {
                    let g = &gout[li * lane..(li + 1) * lane];
                    let al = &da_src[li * lane..(li + 1) * lane];
                    let dl = &mut db[li * lane..(li + 1) * lane];
                    for &(i, j, k, s) in &entries {
                        dl[j] += s * g[k] * al[i];
                    }
                }
                add_into(grads, b, db);
            }
        }
        Op::EquiBasis(a) => {
            let lanes = a.numel() / 16;
            let mut delta = vec![T::zero(); a.numel()];
            for li in 0..lanes {
                let g = &gout[li * 144..(li + 1) * 144];
                let dl = &mut delta[li * 16..(li + 1) * 16];
                for (m, map) in crate::pga::tables::EQUI_BASIS_MAPS.iter().enumerate() {
                    for &(s, d) in map.iter() {
                        dl[s] += g[m * 16 + d];
                    }
                }
            }
            add_into(grads, a, delta);
        }
    }
}

fn binary_pointwise_backward<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    gout: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
    f: impl Fn(T, T, T) -> (T, T),
) {
    let map = BroadcastMap::new("mul", a.shape(), b.shape()).unwrap();
    let (da_src, db_src) = (a.data(), b.data());
    let mut da = vec![T::zero(); a.numel()];
    let mut db = vec![T::zero(); b.numel()];
    if map.identical() {
        for i in 0..gout.len() {
            let (ga, gb) = f(gout[i], da_src[i], db_src[i]);
            da[i] += ga;
            db[i] += gb;
        }
    } else {
        for (flat, &g) in gout.iter().enumerate() {
            let (oa, ob) = map.offsets(flat);
            let (ga, gb) = f(g, da_src[oa], db_src[ob]);
            da[oa] += ga;
            db[ob] += gb;
        }
    }
    add_into(grads, a, da);
    add_into(grads, b, db);
}
