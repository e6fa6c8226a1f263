use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Grid dimensions `(n_1, ..., n_d)` of a d-level Toeplitz structure.
///
/// Flat indices are row-major: dimension 1 is the slowest axis, so the flat
/// order matches the Kronecker product order of per-dimension steering
/// vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shape {
    sizes: Vec<usize>,
}

impl Shape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("shape must have at least one dimension".into()));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("shape {sizes:?} has a zero dimension")));
        }
        Ok(Shape { sizes })
    }

    pub fn ndim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, dim: usize) -> usize {
        self.sizes[dim]
    }

    /// Total number of grid points `N = n_1 ... n_d`.
    pub fn total(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn min_size(&self) -> usize {
        *self.sizes.iter().min().unwrap()
    }

    /// Row-major strides; `strides()[l]` is the flat step of dimension `l`.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.ndim();
        let mut s = vec![1usize; d];
        for l in (0..d.saturating_sub(1)).rev() {
            s[l] = s[l + 1] * self.sizes[l + 1];
        }
        s
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.ndim());
        let mut flat = 0;
        for (l, &k) in idx.iter().enumerate() {
            debug_assert!(k < self.sizes[l]);
            flat = flat * self.sizes[l] + k;
        }
        flat
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        debug_assert!(flat < self.total());
        let d = self.ndim();
        let mut idx = vec![0usize; d];
        for l in (0..d).rev() {
            idx[l] = flat % self.sizes[l];
            flat /= self.sizes[l];
        }
        idx
    }

    /// All multi-indices in flat (row-major) order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.total()).map(|i| self.unflatten(i))
    }

    /// Shape with the first dimension removed. Panics on 1-D shapes.
    pub fn tail(&self) -> Shape {
        assert!(self.ndim() >= 2);
        Shape { sizes: self.sizes[1..].to_vec() }
    }

    /// Dimensions of the offset box `{-(n_l - 1), ..., n_l - 1}^d`.
    pub fn offset_box(&self) -> Vec<usize> {
        self.sizes.iter().map(|&n| 2 * n - 1).collect()
    }

    /// Number of distinct entry offsets, `prod (2 n_l - 1)`.
    pub fn offset_count(&self) -> usize {
        self.sizes.iter().map(|&n| 2 * n - 1).product()
    }

    /// Flat position of an offset inside the offset box.
    pub fn offset_flatten(&self, offset: &[isize]) -> usize {
        debug_assert_eq!(offset.len(), self.ndim());
        let mut flat = 0usize;
        for (l, &k) in offset.iter().enumerate() {
            let n = self.sizes[l] as isize;
            debug_assert!(k.abs() < n);
            flat = flat * (2 * self.sizes[l] - 1) + (k + n - 1) as usize;
        }
        flat
    }

    pub fn offset_unflatten(&self, mut flat: usize) -> Vec<isize> {
        let d = self.ndim();
        let mut off = vec![0isize; d];
        for l in (0..d).rev() {
            let b = 2 * self.sizes[l] - 1;
            off[l] = (flat % b) as isize - (self.sizes[l] as isize - 1);
            flat /= b;
        }
        off
    }

    /// All offsets in offset-box flat order.
    pub fn offsets(&self) -> impl Iterator<Item = Vec<isize>> + '_ {
        (0..self.offset_count()).map(|i| self.offset_unflatten(i))
    }

    /// Negated offset's flat position: the box position of `-k` given that of `k`.
    pub fn offset_negate(&self, flat: usize) -> usize {
        let off = self.offset_unflatten(flat);
        let neg: Vec<isize> = off.iter().map(|&k| -k).collect();
        self.offset_flatten(&neg)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (l, n) in self.sizes.iter().enumerate() {
            if l > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

/// Flat-index permutation that brings dimension `dim` to the front.
///
/// The permuted grid has shape `(n_dim, n_1, ..., n_{dim-1}, n_{dim+1}, ...,
/// n_d)` and `forward[p]` is the new flat position of old position `p`.
#[derive(Debug, Clone)]
pub struct DimPermutation {
    pub forward: Vec<usize>,
    pub permuted: Shape,
}

pub fn dimension_permutation(shape: &Shape, dim: usize) -> Result<DimPermutation> {
    let d = shape.ndim();
    if dim >= d {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} out of range for {d}-dimensional shape"
        )));
    }
    let mut order: Vec<usize> = Vec::with_capacity(d);
    order.push(dim);
    order.extend((0..d).filter(|&l| l != dim));
    let permuted = Shape::new(order.iter().map(|&l| shape.size(l)).collect())?;

    let n = shape.total();
    let mut forward = vec![0usize; n];
    let mut new_idx = vec![0usize; d];
    for (p, idx) in shape.indices().enumerate() {
        for (pos, &l) in order.iter().enumerate() {
            new_idx[pos] = idx[l];
        }
        forward[p] = permuted.flatten(&new_idx);
    }
    debug_assert!(p_is_permutation(&forward));
    Ok(DimPermutation { forward, permuted })
}

fn p_is_permutation(forward: &[usize]) -> bool {
    let mut seen = vec![false; forward.len()];
    for &p in forward {
        if p >= forward.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

impl DimPermutation {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn permute_vector(&self, v: &crate::CVector) -> crate::CVector {
        assert_eq!(v.len(), self.len());
        let mut out = crate::CVector::zeros(v.len());
        for (i, &p) in self.forward.iter().enumerate() {
            out[p] = v[i];
        }
        out
    }

    /// Applies the permutation to the rows of a matrix (columns untouched).
    pub fn permute_rows(&self, m: &crate::CMatrix) -> crate::CMatrix {
        assert_eq!(m.nrows(), self.len());
        let mut out = crate::CMatrix::zeros(m.raw_dim());
        for (i, &p) in self.forward.iter().enumerate() {
            out.row_mut(p).assign(&m.row(i));
        }
        out
    }

    /// Conjugation `P M P^T`, relabeling both rows and columns.
    pub fn permute_matrix(&self, m: &crate::CMatrix) -> crate::CMatrix {
        let n = self.len();
        assert_eq!(m.nrows(), n);
        assert_eq!(m.ncols(), n);
        let mut out = crate::CMatrix::zeros((n, n));
        for i in 0..n {
            let pi = self.forward[i];
            for j in 0..n {
                out[[pi, self.forward[j]]] = m[[i, j]];
            }
        }
        out
    }
}
