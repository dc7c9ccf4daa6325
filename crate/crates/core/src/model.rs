//! The latent factor model: static node factors, metric factors, and
//! per-timestep dynamic node factors, combined multiplicatively.
//!
//! A cell is reconstructed as `ẑ_nmt = Σ_k ū_nk · û_ntk · v_mk`, i.e. the
//! static node vector is modulated element-wise by the dynamic node vector
//! and projected onto the metric vector. Fitting minimizes the squared
//! Frobenius reconstruction error summed over timesteps, restricted to
//! observed cells.
//!
//! Gradients are analytic. With `W_t = Ū ∘ Û_t` (element-wise product) and
//! `R_t` the masked residual `Z_t − W_t Vᵀ`:
//!
//! ```text
//! ∂L/∂V   = −2 Σ_t R_tᵀ W_t
//! ∂L/∂Û_t = −2 (R_t V) ∘ Ū
//! ∂L/∂Ū   = −2 Σ_t (R_t V) ∘ Û_t
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::UsageCube;
use crate::error::{Error, Result};
use crate::matcsv::{read_matrix_csv, write_matrix_csv};

const MODEL_FORMAT_VERSION: &str = "1";

/// Fitted (or planted) factors for a node×metric×time cube.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentModel {
    node_ids: Vec<String>,
    metric_ids: Vec<String>,
    timestamps: Vec<i64>,
    u_bar: DMatrix<f64>,        // N×K static node factors
    v: DMatrix<f64>,            // M×K metric factors
    u_hat: Vec<DMatrix<f64>>,   // T slices of N×K dynamic node factors
}

/// Gradient blocks in model layout.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub u_bar: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub u_hat: Vec<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    format_version: String,
    k: usize,
    node_ids: Vec<String>,
    metric_ids: Vec<String>,
    timestamps: Vec<i64>,
}

impl LatentModel {
    /// Build a model from factor matrices, validating shapes and finiteness.
    /// `K` may exceed `min(N, M)`; it only has to be at least 1.
    pub fn new(
        node_ids: Vec<String>,
        metric_ids: Vec<String>,
        timestamps: Vec<i64>,
        u_bar: DMatrix<f64>,
        v: DMatrix<f64>,
        u_hat: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let (n, m, t) = (node_ids.len(), metric_ids.len(), timestamps.len());
        let k = u_bar.ncols();
        if n == 0 || m == 0 || t == 0 || k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "need N, M, T, K ≥ 1, got N={n}, M={m}, T={t}, K={k}"
            )));
        }
        if u_bar.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "static node factors are {}×{}, expected {n}×{k}",
                u_bar.nrows(),
                u_bar.ncols()
            )));
        }
        if v.nrows() != m || v.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "metric factors are {}×{}, expected {m}×{k}",
                v.nrows(),
                v.ncols()
            )));
        }
        if u_hat.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "expected {t} dynamic factor slices, got {}",
                u_hat.len()
            )));
        }
        for (ti, slice) in u_hat.iter().enumerate() {
            if slice.nrows() != n || slice.ncols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "dynamic factor slice {ti} is {}×{}, expected {n}×{k}",
                    slice.nrows(),
                    slice.ncols()
                )));
            }
        }
        let finite = u_bar.iter().all(|x| x.is_finite())
            && v.iter().all(|x| x.is_finite())
            && u_hat.iter().all(|s| s.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidConfig("non-finite factor entry".into()));
        }
        Ok(LatentModel {
            node_ids,
            metric_ids,
            timestamps,
            u_bar,
            v,
            u_hat,
        })
    }

    pub fn k(&self) -> usize {
        self.u_bar.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.u_bar.nrows()
    }

    pub fn n_metrics(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.u_hat.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    /// Static node factors, `N×K`.
    pub fn u_bar(&self) -> &DMatrix<f64> {
        &self.u_bar
    }

    /// Metric factors, `M×K`.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Dynamic node factors at timestep `t`, `N×K`.
    /// Panics when `t` is out of range.
    pub fn u_hat(&self, t: usize) -> &DMatrix<f64> {
        &self.u_hat[t]
    }

    pub fn u_hat_slices(&self) -> &[DMatrix<f64>] {
        &self.u_hat
    }

    fn check_cell(&self, n: usize, m: usize, t: usize) -> Result<()> {
        if n >= self.n_nodes() || m >= self.n_metrics() || t >= self.n_steps() {
            return Err(Error::IndexOutOfRange(format!(
                "(n={n}, m={m}, t={t}) outside {}×{}×{}",
                self.n_nodes(),
                self.n_metrics(),
                self.n_steps()
            )));
        }
        Ok(())
    }

    /// `Σ_k ū_nk · û_ntk · v_mk`.
    pub fn reconstruct_cell(&self, n: usize, m: usize, t: usize) -> Result<f64> {
        self.check_cell(n, m, t)?;
        let mut sum = 0.0;
        for k in 0..self.k() {
            sum += self.u_bar[(n, k)] * self.u_hat[t][(n, k)] * self.v[(m, k)];
        }
        Ok(sum)
    }

    /// The full `N×M` reconstruction `(Ū ∘ Û_t) Vᵀ` at timestep `t`.
    pub fn reconstruct_slice(&self, t: usize) -> Result<DMatrix<f64>> {
        if t >= self.n_steps() {
            return Err(Error::IndexOutOfRange(format!(
                "t={t} outside T={}",
                self.n_steps()
            )));
        }
        let w = self.u_bar.component_mul(&self.u_hat[t]);
        Ok(w * self.v.transpose())
    }

    fn check_dims(&self, cube: &UsageCube) -> Result<()> {
        if self.n_nodes() != cube.n_nodes()
            || self.n_metrics() != cube.n_metrics()
            || self.n_steps() != cube.n_steps()
        {
            return Err(Error::DimensionMismatch(format!(
                "model is {}×{}×{}, cube is {}×{}×{}",
                self.n_nodes(),
                self.n_metrics(),
                self.n_steps(),
                cube.n_nodes(),
                cube.n_metrics(),
                cube.n_steps()
            )));
        }
        Ok(())
    }

    /// Masked residual `Z_t − (Ū ∘ Û_t) Vᵀ` with unobserved cells set to 0.
    fn residual_slice(&self, cube: &UsageCube, t: usize) -> DMatrix<f64> {
        let w = self.u_bar.component_mul(&self.u_hat[t]);
        let mut r = cube.slice(t) - w * self.v.transpose();
        if !cube.is_fully_observed() {
            for n in 0..r.nrows() {
                for m in 0..r.ncols() {
                    if !cube.is_observed(n, m, t) {
                        r[(n, m)] = 0.0;
                    }
                }
            }
        }
        r
    }

    /// Squared Frobenius reconstruction error over observed cells.
    pub fn objective(&self, cube: &UsageCube) -> Result<f64> {
        self.check_dims(cube)?;
        Ok((0..self.n_steps())
            .map(|t| self.residual_slice(cube, t).norm_squared())
            .sum())
    }

    /// Analytic gradients of the objective with respect to all factor blocks.
    pub fn gradients(&self, cube: &UsageCube) -> Result<Gradients> {
        Ok(self.objective_and_gradients(cube)?.1)
    }

    /// Objective and gradients in one pass over the residuals.
    pub fn objective_and_gradients(&self, cube: &UsageCube) -> Result<(f64, Gradients)> {
        self.check_dims(cube)?;
        Ok(self.objective_and_gradients_over(cube, None, true))
    }

    /// Worker shared by the public entry points and the trainer.
    ///
    /// `slices` restricts the computation to a subset of timesteps (the
    /// gradient blocks of unsampled timesteps stay zero). Per-timestep terms
    /// are computed in parallel; with `ordered` the cross-timestep sums are
    /// folded in ascending `t` order, which makes the result independent of
    /// the thread count.
    pub(crate) fn objective_and_gradients_over(
        &self,
        cube: &UsageCube,
        slices: Option<&[usize]>,
        ordered: bool,
    ) -> (f64, Gradients) {
        let all: Vec<usize>;
        let subset: &[usize] = match slices {
            Some(s) => s,
            None => {
                all = (0..self.n_steps()).collect();
                &all
            }
        };
        let (n, m, k) = (self.n_nodes(), self.n_metrics(), self.k());

        struct Term {
            t: usize,
            sq_err: f64,
            g_v: DMatrix<f64>,
            g_u_bar: DMatrix<f64>,
            g_u_hat: DMatrix<f64>,
        }

        let term_for = |&t: &usize| {
            let w = self.u_bar.component_mul(&self.u_hat[t]);
            let r = self.residual_slice(cube, t);
            let p = &r * &self.v; // N×K
            Term {
                t,
                sq_err: r.norm_squared(),
                g_v: r.transpose() * w * -2.0,
                g_u_bar: p.component_mul(&self.u_hat[t]) * -2.0,
                g_u_hat: p.component_mul(&self.u_bar) * -2.0,
            }
        };

        let terms: Vec<Term> = subset.par_iter().map(term_for).collect();

        let mut g_u_hat = vec![DMatrix::zeros(n, k); self.n_steps()];
        for term in &terms {
            g_u_hat[term.t] = term.g_u_hat.clone();
        }

        let (sq_err, g_v, g_u_bar) = if ordered {
            let mut sq = 0.0;
            let mut g_v = DMatrix::zeros(m, k);
            let mut g_u_bar = DMatrix::zeros(n, k);
            for term in &terms {
                sq += term.sq_err;
                g_v += &term.g_v;
                g_u_bar += &term.g_u_bar;
            }
            (sq, g_v, g_u_bar)
        } else {
            terms
                .par_iter()
                .map(|term| (term.sq_err, term.g_v.clone(), term.g_u_bar.clone()))
                .reduce(
                    || (0.0, DMatrix::zeros(m, k), DMatrix::zeros(n, k)),
                    |(s1, v1, u1), (s2, v2, u2)| (s1 + s2, v1 + v2, u1 + u2),
                )
        };

        (
            sq_err,
            Gradients {
                u_bar: g_u_bar,
                v: g_v,
                u_hat: g_u_hat,
            },
        )
    }

    /// Mean absolute residual over observed cells.
    pub fn avg_abs_error(&self, cube: &UsageCube) -> Result<f64> {
        self.check_dims(cube)?;
        let total: f64 = (0..self.n_steps())
            .map(|t| self.residual_slice(cube, t).iter().map(|r| r.abs()).sum::<f64>())
            .sum();
        Ok(total / cube.n_observed() as f64)
    }

    /// Number of scalar parameters across all blocks.
    pub fn param_len(&self) -> usize {
        let (n, m, t, k) = (self.n_nodes(), self.n_metrics(), self.n_steps(), self.k());
        n * k + m * k + t * n * k
    }

    /// Flatten all factors into one vector: static node block, metric block,
    /// then each dynamic slice, each in nalgebra's column-major layout.
    pub fn to_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        out.extend_from_slice(self.u_bar.as_slice());
        out.extend_from_slice(self.v.as_slice());
        for slice in &self.u_hat {
            out.extend_from_slice(slice.as_slice());
        }
        out
    }

    /// Overwrite all factors from a flat vector laid out like
    /// [`LatentModel::to_params`]. Panics on length mismatch.
    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_len(), "parameter length mismatch");
        let mut off = 0;
        let nb = self.u_bar.len();
        self.u_bar.as_mut_slice().copy_from_slice(&params[off..off + nb]);
        off += nb;
        let mb = self.v.len();
        self.v.as_mut_slice().copy_from_slice(&params[off..off + mb]);
        off += mb;
        for slice in &mut self.u_hat {
            let sb = slice.len();
            slice.as_mut_slice().copy_from_slice(&params[off..off + sb]);
            off += sb;
        }
    }

    /// Persist the model as a directory: JSON manifest plus one CSV per
    /// factor matrix (`U_bar.csv`, `V.csv`, `U_hat/t<index>.csv`).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let manifest = ModelManifest {
            format_version: MODEL_FORMAT_VERSION.into(),
            k: self.k(),
            node_ids: self.node_ids.clone(),
            metric_ids: self.metric_ids.clone(),
            timestamps: self.timestamps.clone(),
        };
        let mp = dir.join("manifest.json");
        fs::write(&mp, serde_json::to_string_pretty(&manifest)?).map_err(Error::io(&mp))?;
        write_matrix_csv(&dir.join("U_bar.csv"), &self.u_bar)?;
        write_matrix_csv(&dir.join("V.csv"), &self.v)?;
        let hat_dir = dir.join("U_hat");
        fs::create_dir_all(&hat_dir).map_err(Error::io(&hat_dir))?;
        for (t, slice) in self.u_hat.iter().enumerate() {
            write_matrix_csv(&hat_dir.join(format!("t{t}.csv")), slice)?;
        }
        Ok(())
    }

    /// Load a model previously written by [`LatentModel::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mp = dir.join("manifest.json");
        let text = fs::read_to_string(&mp).map_err(Error::io(&mp))?;
        let manifest: ModelManifest = serde_json::from_str(&text)?;
        if manifest.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {:?}",
                manifest.format_version
            )));
        }
        let (n, m, t, k) = (
            manifest.node_ids.len(),
            manifest.metric_ids.len(),
            manifest.timestamps.len(),
            manifest.k,
        );
        let u_bar = read_matrix_csv(&dir.join("U_bar.csv"), n, k)?;
        let v = read_matrix_csv(&dir.join("V.csv"), m, k)?;
        let mut u_hat = Vec::with_capacity(t);
        for ti in 0..t {
            u_hat.push(read_matrix_csv(&dir.join("U_hat").join(format!("t{ti}.csv")), n, k)?);
        }
        LatentModel::new(
            manifest.node_ids,
            manifest.metric_ids,
            manifest.timestamps,
            u_bar,
            v,
            u_hat,
        )
    }
}
