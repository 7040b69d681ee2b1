//! Forward kernels and graph-node constructors.

use super::*;
use rayon::prelude::*;

/// Work below this many output elements stays single-threaded.
const PAR_THRESHOLD: usize = 16_384;

fn gelu_val<T: Real>(x: T) -> T {
    let half = T::from_f64(0.5);
    let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    half * x * (T::one() + (x * inv_sqrt2).erf())
}

impl<T: Real> Tensor<T> {
    fn binary_elementwise(
        op_name: &'static str,
        a: &Tensor<T>,
        b: &Tensor<T>,
        f: impl Fn(T, T) -> T + Sync,
        op: Op<T>,
    ) -> TensorResult<T> {
        let map = BroadcastMap::new(op_name, a.shape(), b.shape())?;
        let n = numel(&map.out_shape);
        let (da, db) = (a.data(), b.data());
        let data = if map.identical() {
            da.iter().zip(db.iter()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let mut out = vec![T::zero(); n];
            for (flat, o) in out.iter_mut().enumerate() {
                let (oa, ob) = map.offsets(flat);
                *o = f(da[oa], db[ob]);
            }
            out
        };
        let rg = a.requires_grad() || b.requires_grad();
        Ok(Tensor::make(map.out_shape, data, op, rg))
    }

    pub fn add(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        Self::binary_elementwise("add", self, rhs, |x, y| x + y, Op::Add(self.clone(), rhs.clone()))
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        Self::binary_elementwise("sub", self, rhs, |x, y| x - y, Op::Sub(self.clone(), rhs.clone()))
    }

    pub fn mul(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        Self::binary_elementwise("mul", self, rhs, |x, y| x * y, Op::Mul(self.clone(), rhs.clone()))
    }

    pub fn div(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        Self::binary_elementwise("div", self, rhs, |x, y| x / y, Op::Div(self.clone(), rhs.clone()))
    }

    fn unary(&self, f: impl Fn(T) -> T, op: Op<T>) -> Tensor<T> {
        let data = self.data().iter().map(|&x| f(x)).collect();
        Tensor::make(self.shape().to_vec(), data, op, self.requires_grad())
    }

    pub fn add_scalar(&self, c: T) -> Tensor<T> {
        self.unary(|x| x + c, Op::AddScalar(self.clone(), c))
    }

    pub fn mul_scalar(&self, c: T) -> Tensor<T> {
        self.unary(|x| x * c, Op::MulScalar(self.clone(), c))
    }

    pub fn neg(&self) -> Tensor<T> {
        self.mul_scalar(-T::one())
    }

    pub fn exp(&self) -> Tensor<T> {
        self.unary(|x| x.exp(), Op::Exp(self.clone()))
    }

    pub fn ln(&self) -> Tensor<T> {
        self.unary(|x| x.ln(), Op::Ln(self.clone()))
    }

    /// softplus(x) = ln(1 + e^x), the positive reparameterization used for
    /// attention head weights.
    pub fn softplus(&self) -> Tensor<T> {
        self.exp().add_scalar(T::one()).ln()
    }

    pub fn tanh(&self) -> Tensor<T> {
        self.unary(|x| x.tanh(), Op::Tanh(self.clone()))
    }

    /// Exact erf-based GELU.
    pub fn gelu(&self) -> Tensor<T> {
        self.unary(gelu_val, Op::Gelu(self.clone()))
    }

    pub fn sqrt(&self) -> Tensor<T> {
        self.unary(|x| x.sqrt(), Op::Sqrt(self.clone()))
    }

    pub fn power(&self, p: T) -> Tensor<T> {
        self.unary(|x| x.powf(p), Op::Power(self.clone(), p))
    }

    /// sign(x) with zero gradient everywhere; sign(0) = 0.
    pub fn sign_stopgrad(&self) -> Tensor<T> {
        self.unary(
            |x| {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            },
            Op::SignStopGrad(self.clone()),
        )
    }

    pub fn sum(&self) -> Tensor<T> {
        let s = self.data().iter().copied().sum();
        Tensor::make(vec![1], vec![s], Op::Sum(self.clone()), self.requires_grad())
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = T::from_f64(self.numel() as f64);
        let s: T = self.data().iter().copied().sum();
        Tensor::make(vec![1], vec![s / n], Op::Mean(self.clone()), self.requires_grad())
    }

    pub fn max_all(&self) -> Tensor<T> {
        let m = self.data().iter().copied().fold(T::neg_infinity(), |a, b| a.max(b));
        Tensor::make(vec![1], vec![m], Op::Max(self.clone()), self.requires_grad())
    }

    /// Sum along one axis (the axis is removed).
    pub fn sum_axis(&self, axis: usize) -> TensorResult<T> {
        if axis >= self.shape().len() {
            return Err(TensorError::ShapeMismatch {
                op: "sum_axis",
                a: self.shape().to_vec(),
                b: vec![axis],
            });
        }
        let shape = self.shape();
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out = vec![T::zero(); outer * inner];
        let src = self.data();
        for o in 0..outer {
            for k in 0..len {
                let base = (o * len + k) * inner;
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(&src[base..base + inner]) {
                    *d += *s;
                }
            }
        }
        let mut out_shape: Vec<usize> = shape.to_vec();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        Ok(Tensor::make(out_shape, out, Op::SumAxis(self.clone(), axis), self.requires_grad()))
    }

    /// Mean along one axis, keeping the axis with extent 1.
    pub fn mean_axis_keep(&self, axis: usize) -> TensorResult<T> {
        let len = self.shape()[axis];
        let summed = self.sum_axis(axis)?;
        let mut shape = self.shape().to_vec();
        shape[axis] = 1;
        summed.mul_scalar(T::one() / T::from_f64(len as f64)).reshape(&shape)
    }

    /// Shift-stabilized softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> TensorResult<T> {
        if axis >= self.shape().len() {
            return Err(TensorError::ShapeMismatch {
                op: "softmax",
                a: self.shape().to_vec(),
                b: vec![axis],
            });
        }
        let shape = self.shape();
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.data();
        let mut out = vec![T::zero(); src.len()];

        let lane = |o: usize, i: usize, buf: &mut [T]| {
            let at = |k: usize| src[(o * len + k) * inner + i];
            let mut mx = T::neg_infinity();
            for k in 0..len {
                mx = mx.max(at(k));
            }
            let mut denom = T::zero();
            for k in 0..len {
                let e = (at(k) - mx).exp();
                buf[k] = e;
                denom += e;
            }
            for v in buf.iter_mut() {
                *v /= denom;
            }
        };

        if inner == 1 && outer * len >= PAR_THRESHOLD {
            out.par_chunks_mut(len).enumerate().for_each(|(o, chunk)| {
                lane(o, 0, chunk);
            });
        } else {
            let mut buf = vec![T::zero(); len];
            for o in 0..outer {
                for i in 0..inner {
                    lane(o, i, &mut buf);
                    for k in 0..len {
                        out[(o * len + k) * inner + i] = buf[k];
                    }
                }
            }
        }
        Ok(Tensor::make(shape.to_vec(), out, Op::Softmax(self.clone(), axis), self.requires_grad()))
    }

    /// Select rows along axis 0.
    pub fn gather_rows(&self, indices: &[usize]) -> TensorResult<T> {
        let shape = self.shape();
        let rows = shape[0];
        let row_len: usize = shape[1..].iter().product();
        for &ix in indices {
            if ix >= rows {
                return Err(TensorError::IndexOutOfRange { index: ix, len: rows });
            }
        }
        let src = self.data();
        let mut out = Vec::with_capacity(indices.len() * row_len);
        for &ix in indices {
            out.extend_from_slice(&src[ix * row_len..(ix + 1) * row_len]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[0] = indices.len();
        Ok(Tensor::make(
            out_shape,
            out,
            Op::Gather(self.clone(), Arc::new(indices.to_vec())),
            self.requires_grad(),
        ))
    }

    /// out = self with updates[m] added into row indices[m].
    pub fn scatter_add_rows(&self, indices: &[usize], updates: &Tensor<T>) -> TensorResult<T> {
        let rows = self.shape()[0];
        let row_len: usize = self.shape()[1..].iter().product();
        if updates.shape()[0] != indices.len()
            || updates.shape()[1..] != self.shape()[1..]
        {
            return Err(TensorError::ShapeMismatch {
                op: "scatter_add_rows",
                a: self.shape().to_vec(),
                b: updates.shape().to_vec(),
            });
        }
        for &ix in indices {
            if ix >= rows {
                return Err(TensorError::IndexOutOfRange { index: ix, len: rows });
            }
        }
        let mut out = self.data().to_vec();
        let upd = updates.data();
        for (m, &ix) in indices.iter().enumerate() {
            let dst = &mut out[ix * row_len..(ix + 1) * row_len];
            for (d, u) in dst.iter_mut().zip(&upd[m * row_len..(m + 1) * row_len]) {
                *d += *u;
            }
        }
        Ok(Tensor::make(
            self.shape().to_vec(),
            out,
            Op::ScatterAdd(self.clone(), updates.clone(), Arc::new(indices.to_vec())),
            self.requires_grad() || updates.requires_grad(),
        ))
    }

    pub fn concat(parts: &[Tensor<T>], axis: usize) -> TensorResult<T> {
        assert!(!parts.is_empty());
        let first = parts[0].shape().to_vec();
        let mut axis_total = 0;
        for p in parts {
            if p.shape().len() != first.len()
                || p.shape().iter().enumerate().any(|(i, &d)| i != axis && d != first[i])
            {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    a: first.clone(),
                    b: p.shape().to_vec(),
                });
            }
            axis_total += p.shape()[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out = vec![T::zero(); numel(&out_shape)];
        let out_row = axis_total * inner;
        let mut offset = 0;
        for p in parts {
            let plen = p.shape()[axis] * inner;
            let src = p.data();
            for o in 0..outer {
                out[o * out_row + offset..o * out_row + offset + plen]
                    .copy_from_slice(&src[o * plen..(o + 1) * plen]);
            }
            offset += plen;
        }
        let rg = parts.iter().any(|p| p.requires_grad());
        Ok(Tensor::make(out_shape, out, Op::Concat(parts.to_vec(), axis), rg))
    }

    /// Contiguous range [start, end) along `axis`.
    pub fn slice(&self, axis: usize, start: usize, end: usize) -> TensorResult<T> {
        let shape = self.shape();
        if axis >= shape.len() || start > end || end > shape[axis] {
            return Err(TensorError::ShapeMismatch {
                op: "slice",
                a: shape.to_vec(),
                b: vec![axis, start, end],
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let len = shape[axis];
        let mut out_shape = shape.to_vec();
        out_shape[axis] = end - start;
        let mut out = Vec::with_capacity(numel(&out_shape));
        let src = self.data();
        for o in 0..outer {
            let base = (o * len + start) * inner;
            out.extend_from_slice(&src[base..base + (end - start) * inner]);
        }
        Ok(Tensor::make(
            out_shape,
            out,
            Op::Slice(self.clone(), axis, start, end),
            self.requires_grad(),
        ))
    }

    /// Same data, new shape (buffer is shared, not copied).
    pub fn reshape(&self, shape: &[usize]) -> TensorResult<T> {
        if numel(shape) != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                a: self.shape().to_vec(),
                b: shape.to_vec(),
            });
        }
        Ok(Tensor::make_shared(
            shape.to_vec(),
            Arc::clone(&self.0.data),
            Op::Reshape(self.clone()),
            self.requires_grad(),
        ))
    }

    /// Permute axes (general transpose).
    pub fn permute(&self, perm: &[usize]) -> TensorResult<T> {
        let shape = self.shape();
        if perm.len() != shape.len() {
            return Err(TensorError::ShapeMismatch {
                op: "permute",
                a: shape.to_vec(),
                b: perm.to_vec(),
            });
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let in_strides = strides(shape);
        let out_strides = strides(&out_shape);
        let src = self.data();
        let mut out = vec![T::zero(); src.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            let mut rem = flat;
            let mut src_off = 0;
            for (i, &os) in out_strides.iter().enumerate() {
                let idx = rem / os;
                rem %= os;
                src_off += idx * in_strides[perm[i]];
            }
            *o = src[src_off];
        }
        Ok(Tensor::make(out_shape, out, Op::Permute(self.clone(), perm.to_vec()), self.requires_grad()))
    }

    /// [m,k] x [k,n] -> [m,n]
    pub fn matmul(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        let (a, b) = (self.shape(), rhs.shape());
        if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
            return Err(TensorError::ShapeMismatch { op: "matmul", a: a.to_vec(), b: b.to_vec() });
        }
        let (m, k, n) = (a[0], a[1], b[1]);
        let data = matmul_nn_kernel(self.data(), rhs.data(), m, k, n);
        Ok(Tensor::make(
            vec![m, n],
            data,
            Op::MatmulNN(self.clone(), rhs.clone()),
            self.requires_grad() || rhs.requires_grad(),
        ))
    }

    /// [m,k] x [n,k]^T -> [m,n] (row dot products).
    pub fn matmul_nt(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        let (a, b) = (self.shape(), rhs.shape());
        if a.len() != 2 || b.len() != 2 || a[1] != b[1] {
            return Err(TensorError::ShapeMismatch { op: "matmul_nt", a: a.to_vec(), b: b.to_vec() });
        }
        let (m, k, n) = (a[0], a[1], b[0]);
        let data = matmul_nt_kernel(self.data(), rhs.data(), m, k, n);
        Ok(Tensor::make(
            vec![m, n],
            data,
            Op::MatmulNT(self.clone(), rhs.clone()),
            self.requires_grad() || rhs.requires_grad(),
        ))
    }

    /// [k,m]^T x [k,n] -> [m,n]
    pub fn matmul_tn(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        let (a, b) = (self.shape(), rhs.shape());
        if a.len() != 2 || b.len() != 2 || a[0] != b[0] {
            return Err(TensorError::ShapeMismatch { op: "matmul_tn", a: a.to_vec(), b: b.to_vec() });
        }
        let (k, m, n) = (a[0], a[1], b[1]);
        let data = matmul_tn_kernel(self.data(), rhs.data(), k, m, n);
        Ok(Tensor::make(
            vec![m, n],
            data,
            Op::MatmulTN(self.clone(), rhs.clone()),
            self.requires_grad() || rhs.requires_grad(),
        ))
    }

    /// Broadcast-left batched matmul: [p,q] x [batch,q,r] -> [batch,p,r].
    pub fn bmm_left(&self, rhs: &Tensor<T>) -> TensorResult<T> {
        let (a, b) = (self.shape(), rhs.shape());
        if a.len() != 2 || b.len() != 3 || a[1] != b[1] {
            return Err(TensorError::ShapeMismatch { op: "bmm_left", a: a.to_vec(), b: b.to_vec() });
        }
        let (p, q, batch, r) = (a[0], a[1], b[0], b[2]);
        let lhs = self.data();
        let src = rhs.data();
        let mut out = vec![T::zero(); batch * p * r];
        let body = |(chunk, bi): (&mut [T], usize)| {
            let bmat = &src[bi * q * r..(bi + 1) * q * r];
            for i in 0..p {
                let row = &mut chunk[i * r..(i + 1) * r];
                for kk in 0..q {
                    let av = lhs[i * q + kk];
                    let brow = &bmat[kk * r..(kk + 1) * r];
                    for (o, bv) in row.iter_mut().zip(brow) {
                        *o += av * *bv;
                    }
                }
            }
        };
        if batch * p * r >= PAR_THRESHOLD {
            out.par_chunks_mut(p * r).enumerate().for_each(|(bi, chunk)| body((chunk, bi)));
        } else {
            for (bi, chunk) in out.chunks_mut(p * r).enumerate() {
                body((chunk, bi));
            }
        }
        Ok(Tensor::make(
            vec![batch, p, r],
            out,
            Op::BmmLeft(self.clone(), rhs.clone()),
            self.requires_grad() || rhs.requires_grad(),
        ))
    }

    /// Sparse bilinear product on the last axis (Cayley-table style).
    pub fn pair_product(&self, rhs: &Tensor<T>, table: &Arc<PairTable>) -> TensorResult<T> {
        if self.shape() != rhs.shape() || self.shape().last() != Some(&table.lane) {
            return Err(TensorError::ShapeMismatch {
                op: "pair_product",
                a: self.shape().to_vec(),
                b: rhs.shape().to_vec(),
            });
        }
        let lane = table.lane;
        let entries: Vec<(usize, usize, usize, T)> = table
            .entries
            .iter()
            .map(|&(i, j, k, s)| (i as usize, j as usize, k as usize, T::from_f64(s as f64)))
            .collect();
        let (da, db) = (self.data(), rhs.data());
        let mut out = vec![T::zero(); da.len()];
        let body = |(chunk, li): (&mut [T], usize)| {
            let a = &da[li * lane..(li + 1) * lane];
            let b = &db[li * lane..(li + 1) * lane];
            for &(i, j, k, s) in &entries {
                chunk[k] += s * a[i] * b[j];
            }
        };
        if da.len() >= PAR_THRESHOLD {
            out.par_chunks_mut(lane).enumerate().for_each(|(li, chunk)| body((chunk, li)));
        } else {
            for (li, chunk) in out.chunks_mut(lane).enumerate() {
                body((chunk, li));
            }
        }
        Ok(Tensor::make(
            self.shape().to_vec(),
            out,
            Op::PairProduct(self.clone(), rhs.clone(), Arc::clone(table)),
            self.requires_grad() || rhs.requires_grad(),
        ))
    }

    /// Expand multivector channels [.., C, 16] into the nine equivariant
    /// basis maps [.., C, 9, 16] (grade projections + e0 products).
    pub fn equi_basis(&self) -> TensorResult<T> {
        let shape = self.shape();
        if shape.last() != Some(&16) {
            return Err(TensorError::ShapeMismatch {
                op: "equi_basis",
                a: shape.to_vec(),
                b: vec![16],
            });
        }
        let lanes = self.numel() / 16;
        let src = self.data();
        let mut out = vec![T::zero(); lanes * 9 * 16];
        let body = |(chunk, li): (&mut [T], usize)| {
            let x = &src[li * 16..(li + 1) * 16];
            for (m, map) in crate::pga::tables::EQUI_BASIS_MAPS.iter().enumerate() {
                for &(s, d) in map.iter() {
                    chunk[m * 16 + d] = x[s];
                }
            }
        };
        if lanes * 144 >= PAR_THRESHOLD {
            out.par_chunks_mut(144).enumerate().for_each(|(li, chunk)| body((chunk, li)));
        } else {
            for (li, chunk) in out.chunks_mut(144).enumerate() {
                body((chunk, li));
            }
        }
        let mut out_shape = shape.to_vec();
        out_shape.pop();
        out_shape.push(9);
        out_shape.push(16);
        Ok(Tensor::make(out_shape, out, Op::EquiBasis(self.clone()), self.requires_grad()))
    }
}

pub(crate) fn matmul_nn_kernel<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    if out.is_empty() || n == 0 {
        return out;
    }
    let body = |(row, i): (&mut [T], usize)| {
        for kk in 0..k {
            let av = a[i * k + kk];
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * *bv;
            }
        }
    };
    if m * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| body((row, i)));
    } else {
        for (i, row) in out.chunks_mut(n).enumerate() {
            body((row, i));
        }
    }
    out
}

pub(crate) fn matmul_nt_kernel<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    if out.is_empty() || n == 0 {
        return out;
    }
    let body = |(row, i): (&mut [T], usize)| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (x, y) in arow.iter().zip(brow) {
                acc += *x * *y;
            }
            *o = acc;
        }
    };
    if m * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| body((row, i)));
    } else {
        for (i, row) in out.chunks_mut(n).enumerate() {
            body((row, i));
        }
    }
    out
}

pub(crate) fn matmul_tn_kernel<T: Real>(a: &[T], b: &[T], k: usize, m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    if out.is_empty() || n == 0 {
        return out;
    }
    let body = |(row, i): (&mut [T], usize)| {
        for kk in 0..k {
            let av = a[kk * m + i];
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * *bv;
            }
        }
    };
    if m * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| body((row, i)));
    } else {
        for (i, row) in out.chunks_mut(n).enumerate() {
            body((row, i));
        }
    }
    out
}

/// Geometric-product pair table (lane 16).
pub fn geometric_product_table() -> Arc<PairTable> {
    Arc::new(PairTable {
        lane: 16,
        entries: crate::pga::tables::GEOMETRIC_PRODUCT.to_vec(),
    })
}

/// Join pair table (lane 16).
pub fn join_table() -> Arc<PairTable> {
    Arc::new(PairTable { lane: 16, entries: crate::pga::tables::JOIN_PRODUCT.to_vec() })
}
