use crate::error::Result;
use crate::{C64, CMatrix, CVector};
use ndarray_linalg::{Eig, Eigh, UPLO};

/// Conjugate transpose, materialized.
pub fn adjoint(m: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros((m.ncols(), m.nrows()));
    for ((i, j), &v) in m.indexed_iter() {
        out[[j, i]] = v.conj();
    }
    out
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
        }
    }
    out
}

pub fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Fresh row-major copy with contiguous strides. Some routines return
/// stride-0 single-element arrays that LAPACK wrappers then reject.
pub fn repack(m: &CMatrix) -> CMatrix {
    CMatrix::from_shape_vec(m.raw_dim(), m.iter().copied().collect())
        .expect("copy preserves the element count")
}

/// Hermitian eigendecomposition, ascending. Copies into column-major storage
/// first: zheev on a row-major buffer silently factors the transpose, which
/// conjugates the eigenvectors of a complex Hermitian matrix.
pub fn hermitian_eig_asc(m: &CMatrix) -> Result<(ndarray::Array1<f64>, CMatrix)> {
    use ndarray::ShapeBuilder;
    let mut f = CMatrix::zeros(m.raw_dim().f());
    f.assign(m);
    let (vals, vecs) = f.eigh(UPLO::Lower)?;
    Ok((vals, vecs))
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
pub fn hermitian_eig_desc(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (vals, vecs) = hermitian_eig_asc(m)?;
    let n = vals.len();
    let vals_desc: Vec<f64> = vals.iter().rev().copied().collect();
    let mut vecs_desc = CMatrix::zeros((n, n));
    for k in 0..n {
        vecs_desc.column_mut(k).assign(&vecs.column(n - 1 - k));
    }
    Ok((vals_desc, vecs_desc))
}

/// Eigendecomposition of a general complex square matrix (right eigenvectors).
pub fn general_eig(m: &CMatrix) -> Result<(CVector, CMatrix)> {
    let (vals, vecs) = m.eig()?;
    Ok((vals, vecs))
}

/// Projection onto the Hermitian PSD cone.
///
/// Returns the projected matrix, the most negative eigenvalue of the input
/// (0 if none), and the rank of the projection. Reconstructs from whichever
/// side of the spectrum is smaller.
pub fn psd_projection(e: &CMatrix) -> Result<(CMatrix, f64, usize)> {
    let (vals, q) = hermitian_eig_asc(e)?;
    let n = vals.len();
    let npos = vals.iter().filter(|&&v| v > 0.0).count();
    let min_eig = if vals[0] < 0.0 { vals[0] } else { 0.0 };
    if npos == 0 {
        return Ok((CMatrix::zeros((n, n)), min_eig, 0));
    }
    let nneg = n - npos;
    let z = if npos <= nneg {
        let mut b = CMatrix::zeros((n, npos));
        for (c, k) in (n - npos..n).enumerate() {
            let s = vals[k].sqrt();
            b.column_mut(c).assign(&q.column(k).mapv(|z| z * s));
        }
        let bh = adjoint(&b);
        b.dot(&bh)
    } else {
        let mut b = CMatrix::zeros((n, nneg));
        for k in 0..nneg {
            let s = (-vals[k]).max(0.0).sqrt();
            b.column_mut(k).assign(&q.column(k).mapv(|z| z * s));
        }
        let bh = adjoint(&b);
        let mut z = e + &b.dot(&bh);
        // round off the skew part introduced by the subtraction
        let zh = hermitian_part(&z);
        z.assign(&zh);
        z
    };
    Ok((z, min_eig, npos))
}

/// Haar-ish random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: rand::Rng>(n: usize, rng: &mut R) -> CMatrix {
    use ndarray_linalg::QR;
    use rand_distr::StandardNormal;
    let g = CMatrix::from_shape_fn((n, n), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let (q, r) = g.qr().expect("qr of random matrix");
    let mut q = q;
    for k in 0..n {
        let d = r[[k, k]];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q.column_mut(k).mapv_inplace(|z| z * phase.conj());
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn eig_desc_order() {
        let m = array![
            [C64::new(2.0, 0.0), C64::new(0.0, 1.0)],
            [C64::new(0.0, -1.0), C64::new(3.0, 0.0)]
        ];
        let (vals, vecs) = hermitian_eig_desc(&m).unwrap();
        assert!(vals[0] >= vals[1]);
        let recon = vecs.dot(&CMatrix::from_diag(&CVector::from_iter(
            vals.iter().map(|&v| C64::new(v, 0.0)),
        )))
        .dot(&adjoint(&vecs));
        assert!(frob(&(&recon - &m)) < 1e-12);
    }

    #[test]
    fn psd_projection_splits_spectrum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(6, &mut rng);
        let vals = [3.0, 1.5, 0.7, -0.2, -1.0, -4.0];
        let d = CMatrix::from_diag(&CVector::from_iter(vals.iter().map(|&v| C64::new(v, 0.0))));
        let m = u.dot(&d).dot(&adjoint(&u));
        let m = hermitian_part(&m);
        let (z, min_eig, rank) = psd_projection(&m).unwrap();
        assert_eq!(rank, 3);
        assert!((min_eig + 4.0).abs() < 1e-10);
        let (zvals, _) = hermitian_eig_desc(&z).unwrap();
        assert!(zvals.iter().all(|&v| v > -1e-12));
        assert!((zvals[0] - 3.0).abs() < 1e-10 && (zvals[2] - 0.7).abs() < 1e-10);
        assert!(zvals[3].abs() < 1e-10);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(5, &mut rng);
        let id = adjoint(&u).dot(&u);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[[i, j]] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }
}
