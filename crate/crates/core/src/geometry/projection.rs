use super::jacobi::symmetric_eigen;
use super::{axpy, dot};
use crate::net::InputJacobian;

/// Eigenvalues of the normal matrix below `PINV_CUTOFF * λ_max` are dropped.
/// The rows are always dependent (their probability-weighted sum vanishes),
/// so the normal system is singular and this cutoff is always active.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Orthonormal basis of the span of a set of rows, built from the
/// eigen-decomposition of their Gram matrix `R Rᵀ`.
#[derive(Debug, Clone)]
pub struct RowSpace {
    basis: Vec<Vec<f64>>,
    dim: usize,
}

impl RowSpace {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let c = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        let mut gram = vec![0.0; c * c];
        for i in 0..c {
            for j in i..c {
                let v = dot(&rows[i], &rows[j]);
                gram[i * c + j] = v;
                gram[j * c + i] = v;
            }
        }
        let eigen = symmetric_eigen(&gram, c);
        let lambda_max = eigen.values.first().copied().unwrap_or(0.0);
        let mut basis = Vec::new();
        if lambda_max > 0.0 {
            for (lambda, q) in eigen.values.iter().zip(&eigen.vectors) {
                if *lambda <= PINV_CUTOFF * lambda_max {
                    break;
                }
                // u = Rᵀq / sqrt(λ) has unit norm
                let mut u = vec![0.0; dim];
                for (coef, row) in q.iter().zip(rows) {
                    axpy(&mut u, *coef, row);
                }
                let s = 1.0 / lambda.sqrt();
                u.iter_mut().for_each(|v| *v *= s);
                basis.push(u);
            }
        }
        RowSpace { basis, dim }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Whether the rows span the whole space.
    pub fn is_full(&self) -> bool {
        self.basis.len() >= self.dim
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "vector length must match the rows");
        if self.is_full() {
            // Summing over a complete basis would only add rounding.
            return v.to_vec();
        }
        let mut out = vec![0.0; self.dim];
        for u in &self.basis {
            axpy(&mut out, dot(u, v), u);
        }
        out
    }

    pub fn project_complement(&self, v: &[f64]) -> Vec<f64> {
        if self.is_full() {
            assert_eq!(v.len(), self.dim, "vector length must match the rows");
            return vec![0.0; self.dim];
        }
        let p = self.project(v);
        v.iter().zip(&p).map(|(a, b)| a - b).collect()
    }
}

/// Orthogonal projection onto the span of the Jacobian rows (the distribution at x).
pub fn project_onto_distribution(v: &[f64], j: &InputJacobian) -> Vec<f64> {
    RowSpace::new(&j.rows).project(v)
}

/// `v - project_onto_distribution(v, j)`: the component in `ker G`.
pub fn project_onto_kernel(v: &[f64], j: &InputJacobian) -> Vec<f64> {
    RowSpace::new(&j.rows).project_complement(v)
}
