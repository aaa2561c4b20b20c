//! Layered chains of real two-mode beam splitters.
//!
//! Gate `k` (1-indexed, `1 <= k <= N-1`) mixes coordinates `k-1` and `k` with
//! the rotation `[[cos t, -sin t], [sin t, cos t]]`. A layer holds one gate per
//! adjacent pair. A mesh stacks layers, applies them first to last, and applies
//! the gates inside each layer in ascending or descending `k`.
//!
//! Angles are stored layer-major, gate-minor (`index = p*(N-1) + (k-1)`),
//! independent of the application order.

use std::f64::consts::{FRAC_PI_4, TAU};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::StateVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateOrder {
    Ascending,
    Descending,
}

impl GateOrder {
    pub fn reversed(self) -> Self {
        match self {
            GateOrder::Ascending => GateOrder::Descending,
            GateOrder::Descending => GateOrder::Ascending,
        }
    }
}

/// `[[cos t, -sin t], [sin t, cos t]]`
pub fn gate_matrix(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// d/dt of [`gate_matrix`].
pub fn gate_derivative(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[-s, -c], [c, -s]]
}

/// Applies a 2x2 block to coordinates `(i, i+1)` in place.
#[inline]
pub(crate) fn mix(amps: &mut [f64], i: usize, block: &[[f64; 2]; 2]) {
    let x = amps[i];
    let y = amps[i + 1];
    amps[i] = block[0][0] * x + block[0][1] * y;
    amps[i + 1] = block[1][0] * x + block[1][1] * y;
}

/// Rotation fast path of [`mix`].
#[inline]
pub(crate) fn rotate(amps: &mut [f64], i: usize, c: f64, s: f64) {
    let x = amps[i];
    let y = amps[i + 1];
    amps[i] = c * x - s * y;
    amps[i + 1] = s * x + c * y;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterGate {
    /// 1-indexed; couples modes `k` and `k+1`.
    pub k: usize,
    pub theta: f64,
}

impl BeamSplitterGate {
    pub fn new(k: usize, theta: f64) -> Self {
        Self { k, theta }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        gate_matrix(self.theta)
    }

    /// Angle folded into `[0, 2*pi)`.
    pub fn reported_theta(&self) -> f64 {
        self.theta.rem_euclid(TAU)
    }
}

pub fn apply_gate(state: &StateVector, gate: &BeamSplitterGate) -> Result<StateVector> {
    let n = state.dim();
    if gate.k == 0 || gate.k >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: gate.k + 1,
        });
    }
    let mut out = state.clone();
    let (s, c) = gate.theta.sin_cos();
    rotate(&mut out.amplitudes, gate.k - 1, c, s);
    Ok(out)
}

/// One gate per adjacent pair, stored with ascending `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshLayer {
    pub gates: Vec<BeamSplitterGate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitScheme {
    /// Each angle uniform in `[0, 2*pi)`.
    #[default]
    Random,
    /// Every angle set to the same constant.
    Uniform(f64),
}

impl InitScheme {
    pub fn uniform_default() -> Self {
        InitScheme::Uniform(FRAC_PI_4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MeshRecord", try_from = "MeshRecord")]
pub struct GivensMesh {
    n: usize,
    layers: usize,
    order: GateOrder,
    thetas: Vec<f64>,
}

/// Serialized form of a mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeshRecord {
    n: usize,
    layers: usize,
    order: GateOrder,
    thetas: Vec<f64>,
}

impl From<GivensMesh> for MeshRecord {
    fn from(m: GivensMesh) -> Self {
        MeshRecord {
            n: m.n,
            layers: m.layers,
            order: m.order,
            thetas: m.thetas,
        }
    }
}

impl TryFrom<MeshRecord> for GivensMesh {
    type Error = Error;

    fn try_from(r: MeshRecord) -> Result<Self> {
        GivensMesh::from_thetas(r.n, r.layers, r.order, r.thetas)
    }
}

impl GivensMesh {
    /// Mesh with every angle zero (the identity).
    pub fn identity(n: usize, layers: usize, order: GateOrder) -> Self {
        let gates = n.saturating_sub(1);
        Self {
            n,
            layers,
            order,
            thetas: vec![0.0; layers * gates],
        }
    }

    pub fn from_thetas(n: usize, layers: usize, order: GateOrder, thetas: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("mesh dimension must be at least 1".into()));
        }
        let expected = layers * (n - 1);
        if thetas.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: thetas.len(),
            });
        }
        Ok(Self {
            n,
            layers,
            order,
            thetas,
        })
    }

    pub fn from_layers(n: usize, layers: &[MeshLayer], order: GateOrder) -> Result<Self> {
        let mut thetas = Vec::with_capacity(layers.len() * n.saturating_sub(1));
        for layer in layers {
            if layer.gates.len() != n.saturating_sub(1) {
                return Err(Error::DimensionMismatch {
                    expected: n.saturating_sub(1),
                    actual: layer.gates.len(),
                });
            }
            for (i, g) in layer.gates.iter().enumerate() {
                if g.k != i + 1 {
                    return Err(Error::InvalidConfig(format!(
                        "layer gates must have k = 1..N-1 in order, found k = {} at slot {}",
                        g.k,
                        i + 1
                    )));
                }
                thetas.push(g.theta);
            }
        }
        Self::from_thetas(n, layers.len(), order, thetas)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn layer_count(&self) -> usize {
        self.layers
    }

    pub fn gates_per_layer(&self) -> usize {
        self.n - 1
    }

    pub fn param_count(&self) -> usize {
        self.thetas.len()
    }

    pub fn order(&self) -> GateOrder {
        self.order
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn thetas_mut(&mut self) -> &mut [f64] {
        &mut self.thetas
    }

    pub fn param_index(&self, layer: usize, k: usize) -> usize {
        debug_assert!(layer < self.layers && k >= 1 && k < self.n);
        layer * (self.n - 1) + (k - 1)
    }

    pub fn theta(&self, layer: usize, k: usize) -> f64 {
        self.thetas[self.param_index(layer, k)]
    }

    pub fn set_theta(&mut self, layer: usize, k: usize, theta: f64) {
        let i = self.param_index(layer, k);
        self.thetas[i] = theta;
    }

    pub fn layers(&self) -> Vec<MeshLayer> {
        if self.n < 2 {
            return vec![MeshLayer { gates: Vec::new() }; self.layers];
        }
        self.thetas
            .chunks(self.n - 1)
            .map(|chunk| MeshLayer {
                gates: chunk
                    .iter()
                    .enumerate()
                    .map(|(i, &theta)| BeamSplitterGate::new(i + 1, theta))
                    .collect(),
            })
            .collect()
    }

    /// `(parameter index, lower 0-indexed mode)` for every gate, in the order
    /// the gates act on a state.
    pub fn gate_sequence(&self) -> Vec<(usize, usize)> {
        let g = self.n.saturating_sub(1);
        let mut seq = Vec::with_capacity(self.thetas.len());
        for p in 0..self.layers {
            match self.order {
                GateOrder::Ascending => seq.extend((0..g).map(|m| (p * g + m, m))),
                GateOrder::Descending => seq.extend((0..g).rev().map(|m| (p * g + m, m))),
            }
        }
        seq
    }

    /// The exact inverse: layers reversed, in-layer order flipped, angles negated.
    pub fn inverse(&self) -> Self {
        let g = self.n.saturating_sub(1);
        let mut thetas = Vec::with_capacity(self.thetas.len());
        for p in (0..self.layers).rev() {
            thetas.extend(self.thetas[p * g..(p + 1) * g].iter().map(|t| -t));
        }
        Self {
            n: self.n,
            layers: self.layers,
            order: self.order.reversed(),
            thetas,
        }
    }

    /// Applies the mesh to a raw amplitude buffer of length `N`.
    pub fn apply_in_place(&self, amps: &mut [f64]) {
        debug_assert_eq!(amps.len(), self.n);
        for (idx, mode) in self.gate_sequence() {
            let (s, c) = self.thetas[idx].sin_cos();
            rotate(amps, mode, c, s);
        }
    }

    fn check_dim(&self, state: &StateVector) -> Result<()> {
        if state.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: state.dim(),
            });
        }
        Ok(())
    }
}

pub fn apply_mesh(state: &StateVector, mesh: &GivensMesh) -> Result<StateVector> {
    mesh.check_dim(state)?;
    let mut out = state.clone();
    mesh.apply_in_place(&mut out.amplitudes);
    Ok(out)
}

/// Dense `N x N` matrix of the mesh; column `j` is the image of `e_j`.
pub fn mesh_matrix(mesh: &GivensMesh) -> DMatrix<f64> {
    let n = mesh.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.fill(0.0);
        col[j] = 1.0;
        mesh.apply_in_place(&mut col);
        m.column_mut(j).copy_from_slice(&col);
    }
    m
}

pub fn init_mesh(layers: usize, n: usize, scheme: InitScheme, order: GateOrder, seed: u64) -> Result<GivensMesh> {
    if layers == 0 {
        return Err(Error::InvalidConfig("a mesh needs at least one layer".into()));
    }
    let count = layers * n.saturating_sub(1);
    let thetas = match scheme {
        InitScheme::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| rng.random_range(0.0..TAU)).collect()
        }
        InitScheme::Uniform(theta) => vec![theta; count],
    };
    GivensMesh::from_thetas(n, layers, order, thetas)
}

/// Coordinate projector `P1` onto a retained index set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projector {
    n: usize,
    retained: Vec<usize>,
}

impl Projector {
    pub fn new(n: usize, mut retained: Vec<usize>) -> Result<Self> {
        retained.sort_unstable();
        retained.dedup();
        if retained.is_empty() {
            return Err(Error::InvalidConfig("retained set must be nonempty".into()));
        }
        if let Some(&bad) = retained.iter().find(|&&j| j >= n) {
            return Err(Error::InvalidConfig(format!(
                "retained index {bad} out of range for dimension {n}"
            )));
        }
        Ok(Self { n, retained })
    }

    /// Retains the last `d` coordinates, `{N-d, ..., N-1}`.
    pub fn tail(n: usize, d: usize) -> Result<Self> {
        if d == 0 || d > n {
            return Err(Error::InvalidConfig(format!(
                "compressed dimension d = {d} must satisfy 0 < d <= {n}"
            )));
        }
        Self::new(n, (n - d..n).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn rank(&self) -> usize {
        self.retained.len()
    }

    /// `mask[j]` is true for retained coordinates.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &j in &self.retained {
            m[j] = true;
        }
        m
    }

    /// `P0 = I - P1`. `None` when `P1` is the identity.
    pub fn complement(&self) -> Option<Self> {
        let mask = self.mask();
        let rest: Vec<usize> = (0..self.n).filter(|&j| !mask[j]).collect();
        if rest.is_empty() {
            None
        } else {
            Some(Self {
                n: self.n,
                retained: rest,
            })
        }
    }

    pub fn apply_in_place(&self, amps: &mut [f64]) {
        let mask = self.mask();
        for (a, keep) in amps.iter_mut().zip(mask) {
            if !keep {
                *a = 0.0;
            }
        }
    }
}

pub fn apply_projector(state: &StateVector, p: &Projector, renormalize: bool) -> Result<StateVector> {
    if state.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: state.dim(),
        });
    }
    let mut out = state.clone();
    p.apply_in_place(&mut out.amplitudes);
    if renormalize {
        let norm = out.norm();
        if norm == 0.0 {
            return Err(Error::ZeroProjection);
        }
        out.amplitudes.iter_mut().for_each(|a| *a /= norm);
    }
    Ok(out)
}

/// `P1 U_C |psi>`
pub fn compress(state: &StateVector, u_c: &GivensMesh, p: &Projector) -> Result<StateVector> {
    let mixed = apply_mesh(state, u_c)?;
    apply_projector(&mixed, p, false)
}

/// `U_R |phi>`
pub fn reconstruct(compressed: &StateVector, u_r: &GivensMesh) -> Result<StateVector> {
    apply_mesh(compressed, u_r)
}
