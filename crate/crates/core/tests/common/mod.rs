//! Dense reference implementations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qnet_core::{GateOrder, GivensMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// N x N identity with the rotation block on coordinates (k-1, k).
pub fn embedded_gate(n: usize, k: usize, theta: f64) -> DMatrix<f64> {
    let mut g = DMatrix::identity(n, n);
    let (s, c) = theta.sin_cos();
    g[(k - 1, k - 1)] = c;
    g[(k - 1, k)] = -s;
    g[(k, k - 1)] = s;
    g[(k, k)] = c;
    g
}

/// Product of embedded gates, read straight off the angle array.
pub fn dense_mesh(mesh: &GivensMesh) -> DMatrix<f64> {
    let n = mesh.dim();
    let g = n - 1;
    let mut u = DMatrix::identity(n, n);
    for layer in 0..mesh.layer_count() {
        let ks: Vec<usize> = match mesh.order() {
            GateOrder::Ascending => (1..n).collect(),
            GateOrder::Descending => (1..n).rev().collect(),
        };
        for k in ks {
            let theta = mesh.thetas()[layer * g + k - 1];
            u = embedded_gate(n, k, theta) * u;
        }
    }
    u
}

pub fn random_mesh(rng: &mut impl Rng, n: usize, layers: usize) -> GivensMesh {
    let order = if rng.random_bool(0.5) { GateOrder::Ascending } else { GateOrder::Descending };
    let thetas = (0..layers * (n - 1)).map(|_| rng.random_range(-4.0..4.0)).collect();
    GivensMesh::from_thetas(n, layers, order, thetas).unwrap()
}

pub fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn dense_apply(u: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (u * DVector::from_column_slice(x)).iter().copied().collect()
}

/// Smallest possible `sum_i ||y_i - P y_i||^2` over rank-`d` orthogonal
/// projections `P`: the tail of the squared singular values of the data
/// matrix.
pub fn subspace_bound(columns: &[Vec<f64>], d: usize) -> f64 {
    let n = columns[0].len();
    let y = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let mut sv: Vec<f64> = y.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv.iter().skip(d).map(|s| s * s).sum()
}
