use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residues of the trace formula down to this (relative) size are treated
/// as round-off and clamped to zero.
const FID_NEG_TOL: f64 = 1e-8;

/// Builds an `n × d` matrix from feature rows.
pub fn matrix_from_rows<const D: usize>(rows: &[[f64; D]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), D, |i, j| rows[i][j])
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::DegenerateInput(format!("{what} contains non-finite values")))
    }
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / x.nrows() as f64)
}

/// Sample covariance with `1/(n−1)` normalization.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mu = column_means(x);
    let mut c = x.clone();
    for j in 0..c.ncols() {
        c.column_mut(j).add_scalar_mut(-mu[j]);
    }
    let cov = c.transpose() * &c / (x.nrows() as f64 - 1.0);
    (&cov + cov.transpose()) * 0.5
}

/// Eigen-decomposition sorted by descending eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Rank("covariance is not finite".into()));
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerics("symmetric eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_means: Vec<f64>,
    /// Column-major `d × d`, one eigenvector per column.
    pub eigenvectors: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.feature_means.len()
    }

    pub fn eigenvector_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim(), self.dim(), &self.eigenvectors)
    }

    /// Share of total variance carried by each component.
    pub fn explained_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|v| v / total).collect()
    }
}

pub fn pca_fit(features: &DMatrix<f64>) -> Result<PcaModel> {
    let (n, d) = features.shape();
    if d == 0 || n < d + 1 {
        return Err(Error::Length(format!("PCA on {d} features needs at least {} rows, got {n}", d + 1)));
    }
    check_finite(features, "feature matrix")?;
    let (values, vectors) = sorted_eigen(covariance(features))?;
    Ok(PcaModel {
        feature_means: column_means(features).iter().copied().collect(),
        eigenvectors: vectors.as_slice().to_vec(),
        eigenvalues: values.iter().map(|&v| v.max(0.0)).collect(),
    })
}

/// Scores on the first `k` components: centered features times eigenvectors.
pub fn pca_project(model: &PcaModel, features: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let d = model.dim();
    if features.ncols() != d || k == 0 || k > d {
        return Err(Error::Shape(format!(
            "projection of {} features onto {k} of {d} components",
            features.ncols()
        )));
    }
    let mut c = features.clone();
    for j in 0..d {
        c.column_mut(j).add_scalar_mut(-model.feature_means[j]);
    }
    Ok(c * model.eigenvector_matrix().columns(0, k))
}

/// Z-scoring by reference statistics. Constant columns are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(reference: &DMatrix<f64>) -> Result<Self> {
        if reference.nrows() < 2 {
            return Err(Error::Length("standardization needs at least 2 rows".into()));
        }
        check_finite(reference, "reference features")?;
        let means: Vec<f64> = column_means(reference).iter().copied().collect();
        let stds = (0..reference.ncols())
            .map(|j| {
                let ss: f64 = reference.column(j).iter().map(|v| (v - means[j]).powi(2)).sum();
                let s = (ss / (reference.nrows() as f64 - 1.0)).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, stds })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.means[j]) / self.stds[j])
    }
}

/// Fréchet distance between Gaussian fits of two feature sets.
///
/// `Tr((ΣxΣg)^½)` is taken as `Tr((sx Σg sx)^½)` with `sx = Σx^½`, which is
/// symmetric positive semidefinite and so has a real eigendecomposition.
pub fn fid(x: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
    let d = x.ncols();
    if g.ncols() != d {
        return Err(Error::Shape(format!("FID between {d} and {} features", g.ncols())));
    }
    for (m, name) in [(x, "first"), (g, "second")] {
        if m.nrows() < d + 1 {
            return Err(Error::Length(format!(
                "FID on {d} features needs at least {} rows in the {name} set, got {}",
                d + 1,
                m.nrows()
            )));
        }
        check_finite(m, "feature matrix")?;
    }
    let mean_term = (column_means(x) - column_means(g)).norm_squared();
    let (cx, cg) = (covariance(x), covariance(g));
    let (lx, vx) = sorted_eigen(cx.clone())?;
    let sx = &vx * DMatrix::from_diagonal(&lx.map(|v| v.max(0.0).sqrt())) * vx.transpose();
    let inner = &sx * &cg * &sx;
    let (li, _) = sorted_eigen((&inner + inner.transpose()) * 0.5)?;
    let tr_sqrt: f64 = li.iter().map(|v| v.max(0.0).sqrt()).sum();
    let value = mean_term + cx.trace() + cg.trace() - 2.0 * tr_sqrt;
    let scale = 1.0 + mean_term + cx.trace() + cg.trace();
    if value < -FID_NEG_TOL * scale {
        return Err(Error::Numerics(format!("FID trace formula went negative ({value:e})")));
    }
    Ok(value.max(0.0))
}

/// Feature space in which FID is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidSpace {
    /// Features z-scored by the reference set statistics.
    #[default]
    Standardized,
    /// Scores on all principal components of the standardized reference.
    Pca,
}

/// FID of `other` against `reference`, both mapped through the reference
/// statistics of the chosen space.
pub fn fid_in_space(reference: &DMatrix<f64>, other: &DMatrix<f64>, space: FidSpace) -> Result<f64> {
    let z = Standardizer::fit(reference)?;
    let (a, b) = (z.apply(reference), z.apply(other));
    match space {
        FidSpace::Standardized => fid(&a, &b),
        FidSpace::Pca => {
            let model = pca_fit(&a)?;
            let d = model.dim();
            fid(&pca_project(&model, &a, d)?, &pca_project(&model, &b, d)?)
        }
    }
}
