//! Shared fixtures for the benchmarks.

use qnet_core::{generate_dataset, init_mesh, DatasetKind, GateOrder, GivensMesh, ImageDataset, InitScheme};

/// Twenty-five 4x4 binary images, the scale of the reference experiment.
pub fn reference_dataset() -> ImageDataset {
    generate_dataset(25, 4, 42, DatasetKind::Binary).expect("25 distinct 4x4 images exist")
}

pub fn random_mesh(layers: usize, n: usize, seed: u64) -> GivensMesh {
    init_mesh(layers, n, InitScheme::Random, GateOrder::Ascending, seed).expect("layers > 0")
}
