//! JSON wire types.
//!
//! Complex numbers travel as `[re, im]` pairs, shapes as integer arrays,
//! models as `{"freqs": [[..]], "powers": [..]}` with optional amplitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapp::{MappMethod, VandermondeDecomposition};
use crate::model::AtomicModel;
use crate::sequence::MltSequence;
use crate::shape::Shape;
use crate::superres::{
    Certificate, ObservationModel, Retrieval, Sampling, SdpSolution, SolverStats,
};
use crate::{C64, CMatrix, CVector};

pub fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn unpair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDto {
    pub freqs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

impl ModelDto {
    pub fn from_model(m: &AtomicModel) -> Self {
        ModelDto {
            freqs: m.freqs.clone(),
            powers: Some(m.powers.clone()),
            amplitudes: m.amplitudes.as_ref().map(|a| a.iter().map(|&z| pair(z)).collect()),
        }
    }

    pub fn into_model(self) -> Result<AtomicModel> {
        match (self.amplitudes, self.powers) {
            (Some(amps), _) => {
                let amps = amps.into_iter().map(unpair).collect();
                AtomicModel::with_amplitudes(self.freqs, amps)
            }
            (None, Some(powers)) => AtomicModel::new(self.freqs, powers),
            (None, None) => {
                Err(Error::InvalidArgument("model needs powers or amplitudes".into()))
            }
        }
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDto {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixDto {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixDto {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().map(|&z| pair(z)).collect(),
        }
    }

    pub fn into_matrix(self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::InvalidArgument(format!(
                "matrix data has {} entries, expected {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        let v: Vec<C64> = self.data.into_iter().map(unpair).collect();
        CMatrix::from_shape_vec((self.rows, self.cols), v)
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Sequence values in offset-box order: offsets `k` with `-n < k < n`
/// scanned row-major over `(k_1 + n_1 - 1, ..., k_d + n_d - 1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceDto {
    pub shape: Vec<usize>,
    pub values: Vec<[f64; 2]>,
}

impl SequenceDto {
    pub fn from_sequence(s: &MltSequence) -> Self {
        SequenceDto {
            shape: s.shape().sizes().to_vec(),
            values: s.values().iter().map(|&z| pair(z)).collect(),
        }
    }

    pub fn into_sequence(self) -> Result<MltSequence> {
        let shape = Shape::new(self.shape)?;
        MltSequence::new(shape, self.values.into_iter().map(unpair).collect())
    }
}

/// Input for the decompose command: a grid plus exactly one matrix source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeInputDto {
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDto>,
}

impl DecomposeInputDto {
    pub fn into_parts(self) -> Result<(Shape, CMatrix)> {
        let shape = Shape::new(self.shape)?;
        let sources =
            self.matrix.is_some() as u8 + self.sequence.is_some() as u8 + self.model.is_some() as u8;
        if sources != 1 {
            return Err(Error::InvalidArgument(
                "provide exactly one of matrix, sequence, model".into(),
            ));
        }
        let t = if let Some(m) = self.matrix {
            m.into_matrix()?
        } else if let Some(s) = self.sequence {
            let seq = s.into_sequence()?;
            if seq.shape() != &shape {
                return Err(Error::DimensionMismatch(format!(
                    "sequence grid {} vs shape {shape}",
                    seq.shape()
                )));
            }
            crate::sequence::mlt_matrix(&seq)
        } else {
            let model = self.model.unwrap().into_model()?;
            crate::sequence::mlt_from_model(&shape, &model)?
        };
        let n = shape.total();
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, shape {shape} needs {n}x{n}",
                t.nrows(),
                t.ncols()
            )));
        }
        Ok((shape, t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationDto {
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_map: Option<MatrixDto>,
    pub measurements: Vec<[f64; 2]>,
    /// Squared noise ball radius; the in-memory model keeps the radius itself.
    #[serde(default)]
    pub eta2: f64,
}

impl ObservationDto {
    pub fn from_observation(o: &ObservationModel) -> Self {
        let (mask, linear_map) = match &o.sampling {
            Sampling::Mask(m) => (Some(m.clone()), None),
            Sampling::Linear(l) => (None, Some(MatrixDto::from_matrix(l))),
        };
        ObservationDto {
            shape: o.shape.sizes().to_vec(),
            mask,
            linear_map,
            measurements: o.measurements.iter().map(|&z| pair(z)).collect(),
            eta2: o.noise_bound * o.noise_bound,
        }
    }

    pub fn into_observation(self) -> Result<ObservationModel> {
        let shape = Shape::new(self.shape)?;
        let sampling = match (self.mask, self.linear_map) {
            (Some(m), None) => Sampling::Mask(m),
            (None, Some(l)) => Sampling::Linear(l.into_matrix()?),
            (None, None) => {
                let n = shape.total();
                Sampling::Mask((0..n).collect())
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument(
                    "observation takes a mask or a linear map, not both".into(),
                ))
            }
        };
        if self.eta2 < 0.0 {
            return Err(Error::InvalidArgument("eta2 must be >= 0".into()));
        }
        let z = CVector::from_vec(self.measurements.into_iter().map(unpair).collect());
        ObservationModel::new(shape, sampling, z, self.eta2.sqrt())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverStatsDto {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rho: f64,
    pub converged: bool,
    pub min_eig_x: f64,
}

impl SolverStatsDto {
    pub fn from_stats(s: &SolverStats) -> Self {
        SolverStatsDto {
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            rho: s.rho,
            converged: s.converged,
            min_eig_x: s.min_eig_x,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionDto {
    pub model: ModelDto,
    pub order: usize,
    pub residual: f64,
    pub method: String,
}

impl DecompositionDto {
    pub fn from_decomposition(d: &VandermondeDecomposition) -> Self {
        let method = match d.method {
            MappMethod::Recursive => "recursive",
            MappMethod::Search => "search",
        };
        DecompositionDto {
            model: ModelDto::from_model(&d.model),
            order: d.model.order(),
            residual: d.residual,
            method: method.into(),
        }
    }
}

/// Full output of the superres command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperresOutputDto {
    pub model: ModelDto,
    pub certificate: String,
    pub rank: usize,
    pub objective: f64,
    pub stats: SolverStatsDto,
    /// Eigenvalues of `T'` per outer iteration, descending.
    pub iterate_eigenvalues: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SuperresOutputDto {
    pub fn new(sol: &SdpSolution, ret: &Retrieval, iterate_eigenvalues: Vec<Vec<f64>>) -> Self {
        let certificate = match ret.certificate {
            Certificate::Guaranteed => "guaranteed",
            Certificate::VerifiedByMapp => "verified_by_mapp",
            Certificate::Unverified => "unverified",
        };
        SuperresOutputDto {
            model: ModelDto::from_model(&ret.model),
            certificate: certificate.into(),
            rank: ret.rank,
            objective: sol.objective,
            stats: SolverStatsDto::from_stats(&sol.stats),
            iterate_eigenvalues,
            note: ret.note.clone(),
        }
    }
}
