//! Shared fixtures for unit tests.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cube::UsageCube;
use crate::model::LatentModel;

pub(crate) fn labels(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i:03}")).collect()
}

pub(crate) fn tiny_model(
    n: usize,
    m: usize,
    t: usize,
    k: usize,
    u_bar: DMatrix<f64>,
    v: DMatrix<f64>,
    u_hat: Vec<DMatrix<f64>>,
) -> LatentModel {
    assert_eq!(u_bar.ncols(), k);
    LatentModel::new(
        labels("n", n),
        labels("m", m),
        (0..t as i64).map(|i| i * 600).collect(),
        u_bar,
        v,
        u_hat,
    )
    .unwrap()
}

pub(crate) fn random_model(n: usize, m: usize, t: usize, k: usize, seed: u64) -> LatentModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    };
    let u_bar = draw(n, k);
    let v = draw(m, k);
    let u_hat = (0..t).map(|_| draw(n, k)).collect();
    tiny_model(n, m, t, k, u_bar, v, u_hat)
}

pub(crate) fn cube_from_model(model: &LatentModel, noise: f64, seed: u64) -> UsageCube {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let values = (0..model.n_steps())
        .map(|t| {
            let mut s = model.reconstruct_slice(t).unwrap();
            if noise > 0.0 {
                for x in s.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *x += noise * e;
                }
            }
            s
        })
        .collect();
    UsageCube::new(
        model.node_ids().to_vec(),
        model.metric_ids().to_vec(),
        model.timestamps().to_vec(),
        values,
        None,
    )
    .unwrap()
}
