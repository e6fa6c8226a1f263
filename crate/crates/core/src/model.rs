use crate::error::{Error, Result};
use crate::C64;

/// One d-dimensional frequency, each coordinate on the unit circle `[0, 1)`.
pub type FrequencyTuple = Vec<f64>;

/// Wraps a frequency coordinate into `[0, 1)`.
pub fn wrap_unit(f: f64) -> f64 {
    let w = f - f.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Wrap-around distance of two frequency coordinates on the unit circle.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Wrap-around Chebyshev distance of two frequency tuples.
pub fn tuple_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| wrap_dist(x, y)).fold(0.0, f64::max)
}

/// A sparse mixture of multidimensional sinusoids.
///
/// `powers[j]` is the energy of atom `j`; `amplitudes` carries the complex
/// coefficients when a signed/phased representation exists (then
/// `powers[j] == |amplitudes[j]|^2`).
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicModel {
    pub freqs: Vec<FrequencyTuple>,
    pub powers: Vec<f64>,
    pub amplitudes: Option<Vec<C64>>,
}

impl AtomicModel {
    pub fn new(freqs: Vec<FrequencyTuple>, powers: Vec<f64>) -> Result<Self> {
        let m = AtomicModel { freqs, powers, amplitudes: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_amplitudes(freqs: Vec<FrequencyTuple>, amplitudes: Vec<C64>) -> Result<Self> {
        let powers = amplitudes.iter().map(|c| c.norm_sqr()).collect();
        let m = AtomicModel { freqs, powers, amplitudes: Some(amplitudes) };
        m.validate()?;
        Ok(m)
    }

    pub fn empty(ndim: usize) -> Self {
        let _ = ndim;
        AtomicModel { freqs: Vec::new(), powers: Vec::new(), amplitudes: None }
    }

    /// Number of atoms.
    pub fn order(&self) -> usize {
        self.freqs.len()
    }

    pub fn ndim(&self) -> Option<usize> {
        self.freqs.first().map(|f| f.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.powers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequency tuples vs {} powers",
                self.freqs.len(),
                self.powers.len()
            )));
        }
        if let Some(amps) = &self.amplitudes {
            if amps.len() != self.freqs.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} frequency tuples vs {} amplitudes",
                    self.freqs.len(),
                    amps.len()
                )));
            }
        }
        if let Some(d) = self.ndim() {
            if self.freqs.iter().any(|f| f.len() != d) {
                return Err(Error::DimensionMismatch("ragged frequency tuples".into()));
            }
        }
        if self.freqs.iter().flatten().any(|f| !f.is_finite()) {
            return Err(Error::InvalidArgument("non-finite frequency".into()));
        }
        if self.powers.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("powers must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Wraps all coordinates into `[0, 1)`.
    pub fn wrap(&mut self) {
        for f in &mut self.freqs {
            for x in f.iter_mut() {
                *x = wrap_unit(*x);
            }
        }
    }

    /// Minimum pairwise wrap-around Chebyshev separation; `None` below two atoms.
    pub fn min_separation(&self) -> Option<f64> {
        let r = self.freqs.len();
        if r < 2 {
            return None;
        }
        let mut best = f64::INFINITY;
        for j in 0..r {
            for k in j + 1..r {
                best = best.min(tuple_dist(&self.freqs[j], &self.freqs[k]));
            }
        }
        Some(best)
    }

    /// Reorders atoms lexicographically by frequency for stable output.
    pub fn sort_canonical(&mut self) {
        let mut order: Vec<usize> = (0..self.freqs.len()).collect();
        order.sort_by(|&a, &b| {
            self.freqs[a]
                .partial_cmp(&self.freqs[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.freqs = order.iter().map(|&j| self.freqs[j].clone()).collect();
        self.powers = order.iter().map(|&j| self.powers[j]).collect();
        if let Some(amps) = &self.amplitudes {
            self.amplitudes = Some(order.iter().map(|&j| amps[j]).collect());
        }
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_metric() {
        assert!((wrap_dist(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert!((wrap_dist(0.0, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(wrap_dist(0.3, 0.3), 0.0);
        assert!((tuple_dist(&[0.1, 0.4], &[0.9, 0.5]) - 0.2).abs() < 1e-15);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-1e-18), 0.0);
    }

    #[test]
    fn separation_and_sort() {
        let mut m = AtomicModel::new(
            vec![vec![0.9, 0.2], vec![0.1, 0.3], vec![0.5, 0.5]],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let sep = m.min_separation().unwrap();
        assert!((sep - 0.2).abs() < 1e-15);
        m.sort_canonical();
        assert_eq!(m.freqs[0], vec![0.1, 0.3]);
        assert_eq!(m.powers, vec![2.0, 3.0, 1.0]);
    }
}
