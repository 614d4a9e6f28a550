//! Local data and Fisher matrices in factored form, their spectra,
//! projections onto the distribution and the kernel, second-order KL checks
//! and finite-difference Lie brackets.
//!
//! Both matrices have the form `M = Σ_i p_i g_i g_iᵀ` with `Σ_i p_i g_i = 0`,
//! so rank is at most `C - 1`. Nothing here materializes `M`: the nonzero
//! spectrum comes from the `C x C` Gram matrix `K_ij = sqrt(p_i p_j) <g_i, g_j>`,
//! and projections go through the `C x C` normal system of the factors.

mod bracket;
pub mod jacobi;
mod kl;
mod projection;

pub use bracket::{
    involutivity_residual, param_involutivity_residual, region_probe, BracketResidual,
    DEFAULT_BRACKET_STEP, REGION_PROBE_TOL,
};
pub use kl::{kl_divergence, kl_from_log_probs, kl_from_scores, kl_quadratic_check, KlCheck};
pub use projection::{project_onto_distribution, project_onto_kernel, RowSpace, PINV_CUTOFF};

use crate::net::{self, InputJacobian, NetError, NetParams};

/// Eigenvalues at or below `SOFT_RANK_TOL * λ_max` do not count towards the soft rank.
pub const SOFT_RANK_TOL: f64 = 1e-8;
/// Floor for denominators of relative residuals (0/0 reads as 0).
pub const RESIDUAL_FLOOR: f64 = 1e-30;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("linear region crossed within step {step:e}; retry with a smaller step")]
    RegionCrossing { step: f64 },
    #[error("not a probability vector: {0}")]
    NotProbability(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// `M = Σ_i weights_i · factors_i factors_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredPSD {
    pub weights: Vec<f64>,
    pub factors: Vec<Vec<f64>>,
}

impl FactoredPSD {
    pub fn dim(&self) -> usize {
        self.factors.first().map_or(0, Vec::len)
    }

    /// Reals actually stored (`C · dim`).
    pub fn stored_len(&self) -> usize {
        self.factors.iter().map(Vec::len).sum()
    }

    /// `K_ij = sqrt(w_i w_j) <f_i, f_j>`, row-major `C x C`.
    pub fn gram(&self) -> Vec<f64> {
        let c = self.factors.len();
        let mut k = vec![0.0; c * c];
        for i in 0..c {
            for j in i..c {
                let v = (self.weights[i] * self.weights[j]).sqrt() * dot(&self.factors[i], &self.factors[j]);
                k[i * c + j] = v;
                k[j * c + i] = v;
            }
        }
        k
    }

    /// `Σ_i w_i ||f_i||²`.
    pub fn trace(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.factors)
            .map(|(w, f)| w * dot(f, f))
            .sum()
    }

    /// `Σ_i w_i f_i`, which vanishes for log-probability factors.
    pub fn weighted_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim()];
        for (w, f) in self.weights.iter().zip(&self.factors) {
            axpy(&mut s, *w, f);
        }
        s
    }

    /// `Mv` through the factors.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, f) in self.weights.iter().zip(&self.factors) {
            axpy(&mut out, w * dot(f, v), f);
        }
        out
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.factors)
            .map(|(w, f)| {
                let d = dot(f, v);
                w * d * d
            })
            .sum()
    }

    /// Dense row-major `dim x dim` matrix. Only for small-instance checks.
    pub fn densify(&self) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![0.0; n * n];
        for (w, f) in self.weights.iter().zip(&self.factors) {
            for a in 0..n {
                let wa = w * f[a];
                for b in 0..n {
                    m[a * n + b] += wa * f[b];
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// The `C` eigenvalues of the Gram matrix, descending. All further
    /// eigenvalues of `M` are exactly zero.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    pub soft_rank: usize,
}

impl Spectrum {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

pub fn spectrum(m: &FactoredPSD) -> Spectrum {
    let c = m.factors.len();
    let eigen = jacobi::symmetric_eigen(&m.gram(), c);
    let lambda_max = eigen.values.first().copied().unwrap_or(0.0);
    let soft_rank = if lambda_max > 0.0 {
        eigen
            .values
            .iter()
            .filter(|&&l| l > SOFT_RANK_TOL * lambda_max)
            .count()
    } else {
        0
    };
    Spectrum {
        eigenvalues: eigen.values,
        trace: m.trace(),
        soft_rank,
    }
}

impl From<&InputJacobian> for FactoredPSD {
    fn from(j: &InputJacobian) -> Self {
        FactoredPSD {
            weights: j.probs.clone(),
            factors: j.rows.clone(),
        }
    }
}

/// `G(x,w)` with factors `∇_x log p_i`.
pub fn local_data_matrix(params: &NetParams, x: &[f64]) -> Result<FactoredPSD, GeometryError> {
    let j = net::input_jacobian(params, x)?;
    Ok(FactoredPSD {
        weights: j.probs,
        factors: j.rows,
    })
}

/// `F(x,w)` with factors the flattened `∇_w log p_i`.
pub fn local_fisher_matrix(params: &NetParams, x: &[f64]) -> Result<FactoredPSD, GeometryError> {
    let (grads, probs) = net::param_log_jacobian(params, x)?;
    Ok(FactoredPSD {
        weights: probs,
        factors: grads.iter().map(NetParams::flatten).collect(),
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(a, b)| *a += alpha * b);
}
