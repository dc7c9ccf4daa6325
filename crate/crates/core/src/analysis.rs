//! Latent-space analytics: 2-D PCA projection of factor rows and Pearson
//! correlation between latent dimensions of the dynamic factors.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::LatentModel;

/// A 2-D PCA view of labeled K-dimensional rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection2D {
    pub labels: Vec<String>,
    /// P×2 projected coordinates (rows centered before projection).
    pub coords: DMatrix<f64>,
    /// Fractions of total variance captured by the two components,
    /// first ≥ second.
    pub explained: [f64; 2],
    /// K×2 component loadings.
    pub loadings: DMatrix<f64>,
}

impl Projection2D {
    /// Write `label,pc1,pc2` rows sorted by label.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let order = crate::cube::label_order(&self.labels);
        let mut out = String::from("label,pc1,pc2\n");
        for &i in &order {
            out.push_str(&format!(
                "{},{},{}\n",
                self.labels[i],
                self.coords[(i, 0)],
                self.coords[(i, 1)]
            ));
        }
        let mut file = fs::File::create(path).map_err(Error::io(path))?;
        file.write_all(out.as_bytes()).map_err(Error::io(path))?;
        Ok(())
    }
}

/// Pearson correlations between latent dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    /// K×K, symmetric, unit diagonal, entries in [−1, 1].
    pub values: DMatrix<f64>,
    /// Dimensions with zero variance; their off-diagonal entries are 0.
    pub degenerate_dims: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    /// Write the matrix with a header row/column of dimension indices.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let k = self.k();
        let mut out = String::from("dim");
        for j in 0..k {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for i in 0..k {
            out.push_str(&i.to_string());
            for j in 0..k {
                out.push_str(&format!(",{}", self.values[(i, j)]));
            }
            out.push('\n');
        }
        let mut file = fs::File::create(path).map_err(Error::io(path))?;
        file.write_all(out.as_bytes()).map_err(Error::io(path))?;
        Ok(())
    }
}

/// Project P labeled K-dimensional rows onto the top two principal
/// components of their covariance (1/(P−1) normalization).
///
/// Deterministic: each component is oriented so its entry of largest
/// absolute value is positive (ties resolved toward the earliest index).
pub fn pca_2d(rows: &DMatrix<f64>, labels: &[String]) -> Result<Projection2D> {
    let (p, k) = (rows.nrows(), rows.ncols());
    if p < 2 || k < 2 {
        return Err(Error::DimensionMismatch(format!(
            "PCA needs at least 2 rows and 2 columns, got {p}×{k}"
        )));
    }
    if labels.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {p} rows",
            labels.len()
        )));
    }
    if rows.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("non-finite entry in PCA input".into()));
    }

    let mut centered = rows.clone();
    for j in 0..k {
        let mean = centered.column(j).sum() / p as f64;
        for i in 0..p {
            centered[(i, j)] -= mean;
        }
    }
    let cov = centered.transpose() * &centered / (p as f64 - 1.0);
    let eigen = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let total: f64 = eigen.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput(
            "all rows are identical; covariance has rank 0".into(),
        ));
    }

    let mut loadings = DMatrix::zeros(k, 2);
    let mut explained = [0.0; 2];
    for c in 0..2 {
        let idx = order[c];
        explained[c] = eigen.eigenvalues[idx].max(0.0) / total;
        let mut component = eigen.eigenvectors.column(idx).clone_owned();
        // Orient: largest-|entry| coordinate positive, earliest index on ties.
        let max_abs = component.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if let Some(lead) = component.iter().position(|x| x.abs() == max_abs) {
            if component[lead] < 0.0 {
                component.neg_mut();
            }
        }
        loadings.set_column(c, &component);
    }
    let coords = centered * &loadings;
    Ok(Projection2D {
        labels: labels.to_vec(),
        coords,
        explained,
        loadings,
    })
}

/// Pearson correlation between every pair of latent dimensions over the
/// pooled T·N samples of the dynamic node factors.
///
/// A zero-variance dimension is reported in `degenerate_dims`; its row and
/// column are 0 off the diagonal and 1 on it.
pub fn latent_correlations(model: &LatentModel) -> Result<CorrelationMatrix> {
    let (n, t, k) = (model.n_nodes(), model.n_steps(), model.k());
    let samples = n * t;
    if samples < 2 {
        return Err(Error::DimensionMismatch(
            "correlation needs at least 2 pooled samples (T·N ≥ 2)".into(),
        ));
    }

    // Column k of `pooled` is dimension k sampled over all (n, t).
    let mut pooled = DMatrix::zeros(samples, k);
    for ti in 0..t {
        let slice = model.u_hat(ti);
        for ni in 0..n {
            for ki in 0..k {
                pooled[(ti * n + ni, ki)] = slice[(ni, ki)];
            }
        }
    }

    let mut means = vec![0.0; k];
    let mut stds = vec![0.0; k];
    for ki in 0..k {
        let (mean, std) = crate::stats::pop_mean_std(pooled.column(ki).iter().copied());
        means[ki] = mean;
        stds[ki] = std;
    }
    let degenerate: Vec<usize> = (0..k)
        .filter(|&ki| stds[ki] <= 1e-12 * (1.0 + means[ki].abs()))
        .collect();

    let mut values = DMatrix::identity(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let r = if degenerate.contains(&i) || degenerate.contains(&j) {
                0.0
            } else {
                let mut cov = 0.0;
                for s in 0..samples {
                    cov += (pooled[(s, i)] - means[i]) * (pooled[(s, j)] - means[j]);
                }
                cov /= samples as f64;
                (cov / (stds[i] * stds[j])).clamp(-1.0, 1.0)
            };
            values[(i, j)] = r;
            values[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix {
        values,
        degenerate_dims: degenerate,
    })
}
