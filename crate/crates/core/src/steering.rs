use crate::error::{Error, Result};
use crate::model::{AtomicModel, FrequencyTuple};
use crate::shape::Shape;
use crate::{C64, CMatrix, CVector};
use std::f64::consts::TAU;

/// Unit-norm steering vector `n^{-1/2} (1, e^{i2\pi f}, ..., e^{i2\pi(n-1)f})`.
pub fn steering_vector(n: usize, f: f64) -> CVector {
    let scale = 1.0 / (n as f64).sqrt();
    CVector::from_shape_fn(n, |m| C64::from_polar(scale, TAU * f * m as f64))
}

/// Multidimensional steering vector, the Kronecker product of per-dimension
/// steering vectors with dimension 1 outermost. Unit norm.
pub fn md_steering_vector(shape: &Shape, f: &[f64]) -> Result<CVector> {
    if f.len() != shape.ndim() {
        return Err(Error::DimensionMismatch(format!(
            "frequency tuple has {} coordinates, shape {} has {}",
            f.len(),
            shape,
            shape.ndim()
        )));
    }
    let mut out = CVector::from_elem(1, C64::new(1.0, 0.0));
    for (l, &fl) in f.iter().enumerate() {
        let a = steering_vector(shape.size(l), fl);
        let mut next = CVector::zeros(out.len() * a.len());
        for (i, &x) in out.iter().enumerate() {
            for (j, &y) in a.iter().enumerate() {
                next[i * a.len() + j] = x * y;
            }
        }
        out = next;
    }
    Ok(out)
}

/// `N x r` matrix whose columns are the steering vectors of `freqs`.
pub fn steering_matrix(shape: &Shape, freqs: &[FrequencyTuple]) -> Result<CMatrix> {
    let n = shape.total();
    let mut a = CMatrix::zeros((n, freqs.len()));
    for (j, f) in freqs.iter().enumerate() {
        a.column_mut(j).assign(&md_steering_vector(shape, f)?);
    }
    Ok(a)
}

/// Noiseless uniform samples `sum_j c_j a(f_j)` of a model with amplitudes.
pub fn model_signal(shape: &Shape, model: &AtomicModel) -> Result<CVector> {
    let amps = model.amplitudes.as_ref().ok_or_else(|| {
        Error::InvalidArgument("signal synthesis requires complex amplitudes".into())
    })?;
    let mut y = CVector::zeros(shape.total());
    for (f, &c) in model.freqs.iter().zip(amps) {
        let a = md_steering_vector(shape, f)?;
        y.scaled_add(c, &a);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::Norm;

    #[test]
    fn steering_vector_values() {
        let a = steering_vector(4, 0.25);
        assert!((a.norm_l2() - 1.0).abs() < 1e-14);
        assert!((a[1] - C64::new(0.0, 0.5)).norm() < 1e-14);
        assert!((a[2] - C64::new(-0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn kron_order_dim1_outermost() {
        let shape = Shape::new(vec![2, 3]).unwrap();
        let f = [0.3, 0.7];
        let a = md_steering_vector(&shape, &f).unwrap();
        assert!((a.norm_l2() - 1.0).abs() < 1e-14);
        let a1 = steering_vector(2, 0.3);
        let a2 = steering_vector(3, 0.7);
        for k1 in 0..2 {
            for k2 in 0..3 {
                let got = a[shape.flatten(&[k1, k2])];
                let want = a1[k1] * a2[k2];
                assert!((got - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn unit_norm_many_dims() {
        let shape = Shape::new(vec![2, 3, 4]).unwrap();
        let a = md_steering_vector(&shape, &[0.11, 0.52, 0.93]).unwrap();
        assert!((a.norm_l2() - 1.0).abs() < 1e-13);
    }
}
