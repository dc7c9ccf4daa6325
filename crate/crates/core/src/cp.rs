//! Canonical polyadic (rank-R) decomposition of the usage cube via
//! alternating least squares, used as a comparison anomaly scorer.
//!
//! The cube is approximated by `z_nmt ≈ Σ_r w_r · a_nr · b_mr · c_tr`. Each
//! ALS sweep solves the normal equations for the node, metric, and time
//! factors in turn and then renormalizes to canonical form (unit-norm factor
//! columns, non-negative weights). Every sub-step minimizes its block
//! exactly, so the Frobenius reconstruction error is non-increasing across
//! sweeps.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::anomaly::AnomalyScoreSeries;
use crate::cube::UsageCube;
use crate::error::{Error, Result};

/// Ridge jitter added to the normal-equations Gram matrix.
const GRAM_JITTER: f64 = 1e-10;

/// Canonical-form CP factors.
#[derive(Clone, Debug, PartialEq)]
pub struct CpModel {
    rank: usize,
    a: DMatrix<f64>,   // N×R node factors
    b: DMatrix<f64>,   // M×R metric factors
    c: DMatrix<f64>,   // T×R time factors
    weights: Vec<f64>, // R component weights, ≥ 0
}

/// Fit result: the model plus per-sweep diagnostics.
#[derive(Clone, Debug)]
pub struct CpFit {
    pub model: CpModel,
    /// Frobenius reconstruction error after each sweep.
    pub sweep_errors: Vec<f64>,
    /// Number of block solves that fell back to the least-norm solution
    /// because the Gram matrix was singular.
    pub least_norm_fallbacks: usize,
}

impl CpModel {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn node_factors(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn metric_factors(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn time_factors(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `N×M` reconstruction at timestep `t`.
    pub fn reconstruct_slice(&self, t: usize) -> Result<DMatrix<f64>> {
        if t >= self.c.nrows() {
            return Err(Error::IndexOutOfRange(format!(
                "t={t} outside T={}",
                self.c.nrows()
            )));
        }
        let mut scaled = self.a.clone();
        for r in 0..self.rank {
            let s = self.weights[r] * self.c[(t, r)];
            scaled.column_mut(r).scale_mut(s);
        }
        Ok(scaled * self.b.transpose())
    }

    /// Unit-normalize all factor columns, absorbing norms into the weights.
    fn canonicalize(&mut self) {
        for r in 0..self.rank {
            let mut w = self.weights[r];
            for factor in [&mut self.a, &mut self.b, &mut self.c] {
                let norm = factor.column(r).norm();
                if norm > 0.0 {
                    factor.column_mut(r).scale_mut(1.0 / norm);
                    w *= norm;
                } else {
                    // Dead component: zero weight, arbitrary unit column.
                    w = 0.0;
                    factor.column_mut(r).fill(0.0);
                    factor.column_mut(r)[0] = 1.0;
                }
            }
            self.weights[r] = w;
        }
    }
}

/// Solve `G Xᵀ = RHSᵀ` for `X` (each row of `rhs` is one least-squares
/// problem). Returns the solution and whether the least-norm fallback was
/// used.
fn solve_gram(g: &DMatrix<f64>, rhs: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if let Some(chol) = g.clone().cholesky() {
        (chol.solve(&rhs.transpose()).transpose(), false)
    } else {
        // Least-norm solution through the eigendecomposition pseudo-inverse.
        let eigen = SymmetricEigen::new(g.clone());
        let max_ev = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        let tol = max_ev * 1e-12;
        let mut inv = DMatrix::zeros(g.nrows(), g.ncols());
        for i in 0..g.nrows() {
            let l = eigen.eigenvalues[i];
            if l.abs() > tol {
                inv[(i, i)] = 1.0 / l;
            }
        }
        let pinv = &eigen.eigenvectors * inv * eigen.eigenvectors.transpose();
        (rhs * pinv, true)
    }
}

/// Fit a rank-`rank` CP model by `sweeps` rounds of alternating least
/// squares. Deterministic given `seed`; requires a complete cube.
pub fn cp_als_fit(cube: &UsageCube, rank: usize, sweeps: usize, seed: u64) -> Result<CpFit> {
    if rank < 1 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    if sweeps < 1 {
        return Err(Error::InvalidConfig("need at least one sweep".into()));
    }
    if !cube.is_fully_observed() {
        return Err(Error::InvalidConfig(
            "the tensor baseline needs a complete cube (no masked cells)".into(),
        ));
    }
    let (n, m, t) = (cube.n_nodes(), cube.n_metrics(), cube.n_steps());

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| {
        let mut out = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = StandardNormal.sample(&mut rng);
            }
        }
        out
    };
    let mut model = CpModel {
        rank,
        a: draw(n, rank),
        b: draw(m, rank),
        c: draw(t, rank),
        weights: vec![1.0; rank],
    };
    model.canonicalize();

    let jitter = DMatrix::identity(rank, rank) * GRAM_JITTER;
    let mut fallbacks = 0usize;
    let mut sweep_errors = Vec::with_capacity(sweeps);

    for _ in 0..sweeps {
        // Node factors: rows of A solve G = (BᵀB)∘(CᵀC).
        let g = (model.b.transpose() * &model.b)
            .component_mul(&(model.c.transpose() * &model.c))
            + &jitter;
        let mut rhs = DMatrix::zeros(n, rank);
        for ti in 0..t {
            let p = cube.slice(ti) * &model.b; // N×R
            for r in 0..rank {
                rhs.column_mut(r).axpy(model.c[(ti, r)], &p.column(r), 1.0);
            }
        }
        let (a_new, fell) = solve_gram(&g, &rhs);
        fallbacks += fell as usize;
        model.a = a_new;

        // Metric factors.
        let g = (model.a.transpose() * &model.a)
            .component_mul(&(model.c.transpose() * &model.c))
            + &jitter;
        let mut rhs = DMatrix::zeros(m, rank);
        for ti in 0..t {
            let p = cube.slice(ti).transpose() * &model.a; // M×R
            for r in 0..rank {
                rhs.column_mut(r).axpy(model.c[(ti, r)], &p.column(r), 1.0);
            }
        }
        let (b_new, fell) = solve_gram(&g, &rhs);
        fallbacks += fell as usize;
        model.b = b_new;

        // Time factors: row t is diag(Aᵀ X_t B).
        let g = (model.a.transpose() * &model.a)
            .component_mul(&(model.b.transpose() * &model.b))
            + &jitter;
        let mut rhs = DMatrix::zeros(t, rank);
        for ti in 0..t {
            let q = model.a.transpose() * cube.slice(ti) * &model.b; // R×R
            for r in 0..rank {
                rhs[(ti, r)] = q[(r, r)];
            }
        }
        let (c_new, fell) = solve_gram(&g, &rhs);
        fallbacks += fell as usize;
        model.c = c_new;

        // The block solves work on the weight-free parameterization, so the
        // old weights are fully absorbed into the factors at this point.
        model.weights.fill(1.0);
        model.canonicalize();

        let mut sq = 0.0;
        for ti in 0..t {
            sq += (cube.slice(ti) - model.reconstruct_slice(ti)?).norm_squared();
        }
        sweep_errors.push(sq.sqrt());
    }

    Ok(CpFit {
        model,
        sweep_errors,
        least_norm_fallbacks: fallbacks,
    })
}

/// Per-node, per-timestep score from the CP reconstruction: mean absolute
/// residual over observed metrics, the same aggregation as the factor-model
/// score so the two detectors are directly comparable.
pub fn cp_node_scores(model: &CpModel, cube: &UsageCube) -> Result<AnomalyScoreSeries> {
    let (n, m, t) = (cube.n_nodes(), cube.n_metrics(), cube.n_steps());
    if model.a.nrows() != n || model.b.nrows() != m || model.c.nrows() != t {
        return Err(Error::DimensionMismatch(format!(
            "CP model is {}×{}×{}, cube is {n}×{m}×{t}",
            model.a.nrows(),
            model.b.nrows(),
            model.c.nrows()
        )));
    }
    let mut scores = DMatrix::zeros(t, n);
    for ti in 0..t {
        let recon = model.reconstruct_slice(ti)?;
        for ni in 0..n {
            let mut sum = 0.0;
            let mut count = 0usize;
            for mi in 0..m {
                if cube.is_observed(ni, mi, ti) {
                    sum += (cube.value(ni, mi, ti) - recon[(ni, mi)]).abs();
                    count += 1;
                }
            }
            if count > 0 {
                scores[(ti, ni)] = sum / count as f64;
            }
        }
    }
    AnomalyScoreSeries::new(cube.node_ids().to_vec(), cube.timestamps().to_vec(), scores)
}
