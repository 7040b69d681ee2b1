//! Central-difference verification of reverse-mode gradients.

use super::*;

/// Outcome of a gradient check over every coordinate of the probed tensor.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub n_coords: usize,
}

/// Compare backward() against central finite differences of `f` at `x`,
/// coordinate by coordinate in index order. `f` must produce a scalar.
///
/// The relative error uses a small absolute floor so coordinates whose true
/// gradient is zero do not blow up the ratio.
pub fn grad_check<T: Real>(
    f: impl Fn(&Tensor<T>) -> TensorResult<T>,
    x: &Tensor<T>,
    h: f64,
) -> Result<GradReport, TensorError> {
    let x0 = x.to_f64_vec();
    let probe = Tensor::<T>::from_f64_slice(x.shape(), &x0, true);
    let loss = f(&probe)?;
    if loss.numel() != 1 {
        return Err(TensorError::NotScalarLoss { numel: loss.numel() });
    }
    let grads = loss.backward()?;
    let analytic = grads.grad_or_zero(&probe);

    let eval = |coords: &[f64]| -> Result<f64, TensorError> {
        let t = Tensor::<T>::from_f64_slice(x.shape(), coords, false);
        Ok(f(&t)?.item().as_f64())
    };

    let mut report = GradReport { max_rel_err: 0.0, worst_index: 0, n_coords: x0.len() };
    let mut work = x0.clone();
    for i in 0..x0.len() {
        let orig = work[i];
        work[i] = orig + h;
        let fp = eval(&work)?;
        work[i] = orig - h;
        let fm = eval(&work)?;
        work[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i].as_f64();
        let denom = (a.abs() + numeric.abs()).max(1e-6);
        let rel = (a - numeric).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    Ok(report)
}
