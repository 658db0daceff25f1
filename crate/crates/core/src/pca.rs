//! Principal component analysis for the embedding-space reduction applied
//! before mixture fitting.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::numeric;
use crate::{Error, Result};

/// A fitted linear projection onto the leading principal axes.
///
/// Rows of `components` are orthonormal and ordered by descending
/// explained variance. The sign of each axis is fixed so its
/// largest-magnitude entry is positive, making fits reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    input_dim: usize,
    output_dim: usize,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
}

impl PcaTransform {
    /// Assembles a transform from raw parts, validating dimensions and
    /// row orthonormality (within 1e-8).
    pub fn new(mean: Vec<f64>, components: Vec<Vec<f64>>) -> Result<Self> {
        let input_dim = mean.len();
        let output_dim = components.len();
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid("PCA dimensions must be >= 1"));
        }
        if output_dim > input_dim {
            return Err(Error::invalid(format!(
                "PCA output dimensionality {output_dim} exceeds input {input_dim}"
            )));
        }
        for row in &components {
            if row.len() != input_dim {
                return Err(Error::invalid("PCA component row has wrong dimensionality"));
            }
            if !numeric::all_finite(row) {
                return Err(Error::invalid("PCA component row has non-finite entries"));
            }
        }
        if !numeric::all_finite(&mean) {
            return Err(Error::invalid("PCA mean has non-finite entries"));
        }
        for i in 0..output_dim {
            for j in i..output_dim {
                let expected = if i == j { 1.0 } else { 0.0 };
                let got = numeric::dot(&components[i], &components[j]);
                if (got - expected).abs() > 1e-8 {
                    return Err(Error::invalid(format!(
                        "PCA rows {i} and {j} are not orthonormal (inner product {got})"
                    )));
                }
            }
        }
        Ok(PcaTransform {
            input_dim,
            output_dim,
            mean,
            components,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Orthonormal projection rows, descending variance order.
    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Projects one vector: `P (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "cannot project a {}-dimensional vector through a {}-dimensional PCA",
                x.len(),
                self.input_dim
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self
            .components
            .iter()
            .map(|row| numeric::dot(row, &centered))
            .collect())
    }

    pub fn project_all(&self, data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        data.iter().map(|x| self.project(x)).collect()
    }

    /// Maps a projection back into the input space: `mean + P^T y`.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.output_dim {
            return Err(Error::invalid("reconstruction input has wrong dimensionality"));
        }
        let mut x = self.mean.clone();
        for (coeff, row) in y.iter().zip(&self.components) {
            for (xi, ri) in x.iter_mut().zip(row) {
                *xi += coeff * ri;
            }
        }
        Ok(x)
    }
}

/// Fits a PCA with `output_dim` axes on `data`.
///
/// Axes are eigenvectors of the (population) covariance matrix, ordered by
/// descending eigenvalue, with the deterministic sign convention described
/// on [`PcaTransform`]. Requires strictly more observations than output
/// dimensions.
pub fn fit(data: &[Vec<f64>], output_dim: usize) -> Result<PcaTransform> {
    if output_dim == 0 {
        return Err(Error::invalid("PCA output dimensionality must be >= 1"));
    }
    if data.len() <= output_dim {
        return Err(Error::invalid(format!(
            "PCA needs more than {output_dim} observations, got {}",
            data.len()
        )));
    }
    let input_dim = data[0].len();
    if output_dim > input_dim {
        return Err(Error::invalid(format!(
            "PCA output dimensionality {output_dim} exceeds input {input_dim}"
        )));
    }
    for x in data {
        if x.len() != input_dim {
            return Err(Error::invalid("observations have mixed dimensionalities"));
        }
        if !numeric::all_finite(x) {
            return Err(Error::invalid("observations must be finite"));
        }
    }

    let n = data.len() as f64;
    let mut mean = vec![0.0; input_dim];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }

    let mut covariance = DMatrix::<f64>::zeros(input_dim, input_dim);
    for x in data {
        let centered: Vec<f64> = x.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for i in 0..input_dim {
            for j in i..input_dim {
                covariance[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..input_dim {
        for j in i..input_dim {
            covariance[(i, j)] /= n;
            covariance[(j, i)] = covariance[(i, j)];
        }
    }

    let eigen = SymmetricEigen::new(covariance);
    let mut order: Vec<usize> = (0..input_dim).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut components = Vec::with_capacity(output_dim);
    for &idx in order.iter().take(output_dim) {
        let column = eigen.eigenvectors.column(idx);
        let mut axis: Vec<f64> = column.iter().copied().collect();
        // Deterministic sign: largest-magnitude entry positive.
        let dominant = (0..axis.len())
            .max_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()).then(b.cmp(&a)))
            .expect("axis is nonempty");
        if axis[dominant] < 0.0 {
            for v in axis.iter_mut() {
                *v = -*v;
            }
        }
        components.push(axis);
    }

    PcaTransform::new(mean, components)
}
