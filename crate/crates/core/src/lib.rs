//! Image compression and reconstruction with trainable real beam-splitter
//! meshes.
//!
//! Images are amplitude-encoded into unit state vectors ([`codec`]), mixed by
//! a compression mesh and projected onto a `d`-dimensional coordinate
//! subspace, then mapped back by a reconstruction mesh ([`mesh`]). Both
//! meshes are trained by gradient descent over their gate angles
//! ([`trainer`]), scored by pixel accuracy ([`metrics`]), and compared with a
//! K-SVD sparse-coding baseline ([`baseline`]).

pub mod baseline;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod mesh;
pub mod metrics;
pub mod pnm;
pub mod trainer;

pub use baseline::{fit_dictionary, sparse_code, Dictionary, DictionaryFit};
pub use codec::{decode, encode, flatten, EncodedSet, ImageSample, NormContext, StateVector};
pub use dataset::{generate_dataset, load_images, save_images, DatasetKind, ImageDataset, ImageFormat};
pub use error::{Error, Result};
pub use mesh::{
    apply_gate, apply_mesh, apply_projector, compress, gate_matrix, init_mesh, mesh_matrix, reconstruct,
    BeamSplitterGate, GateOrder, GivensMesh, InitScheme, MeshLayer, Projector,
};
pub use metrics::{accuracy, binarize_amplitudes, threshold_pixels, AccuracyReport, PostProcess};
pub use trainer::{
    compression_loss, reconstruction_loss, train, CompressionTarget, GradMode, LossNorm, LossRecord, TrainConfig,
    TrainOutcome,
};
