//! Parameter gradients of an [`Objective`] and the gate-by-gate sweep.

use serde::{Deserialize, Serialize};

use super::loss::Objective;
use crate::mesh::{gate_derivative, mix, rotate, GivensMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMode {
    /// `[T(t + delta) - T(t)] / delta`
    #[default]
    FiniteDifference,
    /// `[T(t + delta) - T(t - delta)] / (2 delta)`
    CentralDifference,
    /// Closed-form derivative of the rotation block.
    Analytic,
}

/// Partials of the loss, indexed like the mesh angles.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
    gates_per_layer: usize,
}

impl GradientVector {
    pub fn new(values: Vec<f64>, gates_per_layer: usize) -> Self {
        Self { values, gates_per_layer }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Partial for gate `k` (1-indexed) in layer `layer`.
    pub fn get(&self, layer: usize, k: usize) -> f64 {
        self.values[layer * self.gates_per_layer + k - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Forward-difference partials of every sample's projected output with respect
/// to gate `k` of layer `layer`.
pub fn fd_partial(mesh: &GivensMesh, layer: usize, k: usize, delta: f64, obj: &Objective) -> Vec<Vec<f64>> {
    let base = obj.outputs(mesh);
    let mut bumped = mesh.clone();
    bumped.set_theta(layer, k, mesh.theta(layer, k) + delta);
    let moved = obj.outputs(&bumped);
    moved
        .iter()
        .zip(&base)
        .map(|(m, b)| m.iter().zip(b).map(|(m, b)| (m - b) / delta).collect())
        .collect()
}

/// Exact partials: the chain re-applied with gate `(layer, k)` replaced by its
/// derivative block.
pub fn analytic_partial(mesh: &GivensMesh, layer: usize, k: usize, obj: &Objective) -> Vec<Vec<f64>> {
    let target = mesh.param_index(layer, k);
    let thetas = mesh.thetas();
    let seq = mesh.gate_sequence();
    obj.inputs
        .iter()
        .map(|x| {
            let mut y = x.clone();
            for &(idx, mode) in &seq {
                if idx == target {
                    differentiate(&mut y, mode, thetas[idx]);
                } else {
                    let (s, c) = thetas[idx].sin_cos();
                    rotate(&mut y, mode, c, s);
                }
            }
            obj.project(&mut y);
            y
        })
        .collect()
}

/// `2 * scale * sum_i sum_j r_ij * dy_ij`
pub fn contract(obj: &Objective, residuals: &[Vec<f64>], partials: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (r, d) in residuals.iter().zip(partials) {
        for (r, d) in r.iter().zip(d) {
            acc += r * d;
        }
    }
    2.0 * obj.scale * acc
}

/// Gradient of the loss with every angle held at its current value.
pub fn loss_gradient(obj: &Objective, mesh: &GivensMesh, mode: GradMode, delta: f64) -> GradientVector {
    let mut frozen = mesh.clone();
    sweep(obj, &mut frozen, mode, delta, 0.0, false)
}

/// `theta - eta * gradient`
pub fn gd_step(theta: &[f64], gradient: &[f64], eta: f64) -> Vec<f64> {
    theta.iter().zip(gradient).map(|(t, g)| t - eta * g).collect()
}

/// One pass over every gate in application order.
///
/// With `immediate`, each angle is updated right after its partial is taken,
/// so later partials see the new value. Otherwise all partials are taken at
/// the starting angles and applied together at the end (a no-op when
/// `eta == 0`). Returns the partials that were used.
///
/// Per-sample states in front of the current gate are cached, so each partial
/// only replays the suffix of the chain.
pub fn sweep(obj: &Objective, mesh: &mut GivensMesh, mode: GradMode, delta: f64, eta: f64, immediate: bool) -> GradientVector {
    let seq = mesh.gate_sequence();
    let mut cs: Vec<(f64, f64)> = seq
        .iter()
        .map(|&(idx, _)| {
            let (s, c) = mesh.thetas()[idx].sin_cos();
            (c, s)
        })
        .collect();
    let mut prefix = obj.inputs.clone();
    let mut grads = vec![0.0; mesh.param_count()];
    let n = obj.dim;
    let mut base = vec![0.0; n];
    let mut moved = vec![0.0; n];
    let mut back = vec![0.0; n];

    let replay = |buf: &mut [f64], cs: &[(f64, f64)], from: usize| {
        for (&(_, mode), &(c, s)) in seq[from..].iter().zip(&cs[from..]) {
            rotate(buf, mode, c, s);
        }
    };

    for (pos, &(idx, m)) in seq.iter().enumerate() {
        let theta = mesh.thetas()[idx];
        let mut acc = 0.0;
        for (x, t) in prefix.iter().zip(&obj.targets) {
            base.copy_from_slice(x);
            replay(&mut base, &cs, pos);
            obj.project(&mut base);

            moved.copy_from_slice(x);
            match mode {
                GradMode::Analytic => {
                    differentiate(&mut moved, m, theta);
                    replay(&mut moved, &cs, pos + 1);
                    obj.project(&mut moved);
                }
                GradMode::FiniteDifference => {
                    let (s, c) = (theta + delta).sin_cos();
                    rotate(&mut moved, m, c, s);
                    replay(&mut moved, &cs, pos + 1);
                    obj.project(&mut moved);
                    for (d, b) in moved.iter_mut().zip(&base) {
                        *d = (*d - b) / delta;
                    }
                }
                GradMode::CentralDifference => {
                    let (s, c) = (theta + delta).sin_cos();
                    rotate(&mut moved, m, c, s);
                    replay(&mut moved, &cs, pos + 1);
                    obj.project(&mut moved);
                    back.copy_from_slice(x);
                    let (s, c) = (theta - delta).sin_cos();
                    rotate(&mut back, m, c, s);
                    replay(&mut back, &cs, pos + 1);
                    obj.project(&mut back);
                    for (d, b) in moved.iter_mut().zip(&back) {
                        *d = (*d - b) / (2.0 * delta);
                    }
                }
            }
            for j in 0..n {
                if obj.mask[j] {
                    acc += (base[j] - t[j]) * moved[j];
                }
            }
        }
        let g = 2.0 * obj.scale * acc;
        grads[idx] = g;

        if immediate {
            let updated = theta - eta * g;
            mesh.thetas_mut()[idx] = updated;
            let (s, c) = updated.sin_cos();
            cs[pos] = (c, s);
        }
        let (c, s) = cs[pos];
        for x in prefix.iter_mut() {
            rotate(x, m, c, s);
        }
    }

    if !immediate && eta != 0.0 {
        let next = gd_step(mesh.thetas(), &grads, eta);
        mesh.thetas_mut().copy_from_slice(&next);
    }
    GradientVector::new(grads, mesh.gates_per_layer())
}

/// The embedded derivative of a gate is zero outside its 2x2 block.
fn differentiate(amps: &mut [f64], i: usize, theta: f64) {
    let (a, b) = (amps[i], amps[i + 1]);
    amps.fill(0.0);
    amps[i] = a;
    amps[i + 1] = b;
    mix(amps, i, &gate_derivative(theta));
}
