//! Squared-error objectives over a mesh.
//!
//! Every loss here has the form `scale * sum_i sum_{j in mask} (y_ij - t_ij)^2`
//! with `y_i = Q (U x_i)`, where `Q` zeroes the coordinates outside `mask`.
//! The compression and reconstruction losses differ only in inputs, mask and
//! targets.

use serde::{Deserialize, Serialize};

use crate::codec::{EncodedSet, StateVector};
use crate::error::{Error, Result};
use crate::mesh::{compress, GivensMesh, Projector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossNorm {
    /// Divide by `M * N`.
    #[default]
    Mean,
    Sum,
}

impl LossNorm {
    pub fn scale(self, samples: usize, dim: usize) -> f64 {
        match self {
            LossNorm::Mean => 1.0 / (samples * dim) as f64,
            LossNorm::Sum => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    #[default]
    Leakage,
    Explicit,
}

/// What the compressed state of each sample should look like.
#[derive(Debug, Clone, PartialEq)]
pub enum CompressionTarget {
    /// Penalize only amplitude that leaves the retained subspace.
    Leakage,
    /// One target state per sample, supported on the retained set.
    Explicit(Vec<StateVector>),
}

impl CompressionTarget {
    /// Every sample targets the same state, uniform over the retained set.
    pub fn uniform(p: &Projector, samples: usize) -> Self {
        let amp = 1.0 / (p.rank() as f64).sqrt();
        let mut b = StateVector::zeros(p.dim());
        for &j in p.retained() {
            b.amplitudes[j] = amp;
        }
        CompressionTarget::Explicit(vec![b; samples])
    }

    pub fn mode(&self) -> TargetMode {
        match self {
            CompressionTarget::Leakage => TargetMode::Leakage,
            CompressionTarget::Explicit(_) => TargetMode::Explicit,
        }
    }

    pub fn validate(&self, p: &Projector, samples: usize) -> Result<()> {
        let CompressionTarget::Explicit(b) = self else {
            return Ok(());
        };
        if b.len() != samples {
            return Err(Error::TargetShapeMismatch(format!(
                "{} targets for {} samples",
                b.len(),
                samples
            )));
        }
        let mask = p.mask();
        for (i, t) in b.iter().enumerate() {
            if t.dim() != p.dim() {
                return Err(Error::TargetShapeMismatch(format!(
                    "target {i} has dimension {}, expected {}",
                    t.dim(),
                    p.dim()
                )));
            }
            if (t.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::TargetShapeMismatch(format!("target {i} is not unit norm")));
            }
            if t.amplitudes.iter().zip(&mask).any(|(a, &keep)| !keep && *a != 0.0) {
                return Err(Error::TargetShapeMismatch(format!(
                    "target {i} has support outside the retained set"
                )));
            }
        }
        Ok(())
    }
}

/// Least-squares objective for one mesh with everything else held fixed.
#[derive(Debug, Clone)]
pub struct Objective {
    pub(crate) dim: usize,
    pub(crate) inputs: Vec<Vec<f64>>,
    pub(crate) targets: Vec<Vec<f64>>,
    pub(crate) mask: Vec<bool>,
    pub(crate) scale: f64,
}

impl Objective {
    /// `L_C` for the compression mesh.
    ///
    /// In leakage mode the output is `P0 U_C psi` with a zero target, which
    /// equals `sum_i (1 - ||P1 U_C psi_i||^2)` for unit inputs.
    pub fn compression(set: &EncodedSet, p: &Projector, target: &CompressionTarget, norm: LossNorm) -> Result<Self> {
        let n = check_set(set, p)?;
        target.validate(p, set.len())?;
        let inputs: Vec<Vec<f64>> = set.states.iter().map(|s| s.amplitudes.clone()).collect();
        let (mask, targets) = match target {
            CompressionTarget::Leakage => {
                let mask = p.mask().into_iter().map(|keep| !keep).collect();
                (mask, vec![vec![0.0; n]; set.len()])
            }
            CompressionTarget::Explicit(b) => (p.mask(), b.iter().map(|t| t.amplitudes.clone()).collect()),
        };
        Ok(Self {
            dim: n,
            inputs,
            targets,
            mask,
            scale: norm.scale(set.len(), n),
        })
    }

    /// `L_R` for the reconstruction mesh, given the fixed compressed states.
    pub fn reconstruction(set: &EncodedSet, compressed: &[StateVector], norm: LossNorm) -> Result<Self> {
        let n = set.dim();
        if compressed.len() != set.len() {
            return Err(Error::DimensionMismatch {
                expected: set.len(),
                actual: compressed.len(),
            });
        }
        if let Some(bad) = compressed.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.dim(),
            });
        }
        Ok(Self {
            dim: n,
            inputs: compressed.iter().map(|s| s.amplitudes.clone()).collect(),
            targets: set.states.iter().map(|s| s.amplitudes.clone()).collect(),
            mask: vec![true; n],
            scale: norm.scale(set.len(), n),
        })
    }

    pub fn samples(&self) -> usize {
        self.inputs.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn project(&self, amps: &mut [f64]) {
        for (a, &keep) in amps.iter_mut().zip(&self.mask) {
            if !keep {
                *a = 0.0;
            }
        }
    }

    /// Projected mesh outputs, one per sample.
    pub fn outputs(&self, mesh: &GivensMesh) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .map(|x| {
                let mut y = x.clone();
                mesh.apply_in_place(&mut y);
                self.project(&mut y);
                y
            })
            .collect()
    }

    pub fn residuals(&self, outputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        outputs
            .iter()
            .zip(&self.targets)
            .map(|(y, t)| self.residual(y, t))
            .collect()
    }

    pub(crate) fn residual(&self, y: &[f64], t: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(t)
            .zip(&self.mask)
            .map(|((y, t), &keep)| if keep { y - t } else { 0.0 })
            .collect()
    }

    pub fn loss(&self, mesh: &GivensMesh) -> f64 {
        let outputs = self.outputs(mesh);
        self.scale * self.residuals(&outputs).iter().flatten().map(|r| r * r).sum::<f64>()
    }
}

fn check_set(set: &EncodedSet, p: &Projector) -> Result<usize> {
    let n = set.dim();
    if n != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: n,
        });
    }
    Ok(n)
}

pub fn compression_loss(
    set: &EncodedSet,
    u_c: &GivensMesh,
    p: &Projector,
    target: &CompressionTarget,
    norm: LossNorm,
) -> Result<f64> {
    check_mesh(u_c, p.dim())?;
    Ok(Objective::compression(set, p, target, norm)?.loss(u_c))
}

pub fn reconstruction_loss(
    set: &EncodedSet,
    u_c: &GivensMesh,
    p: &Projector,
    u_r: &GivensMesh,
    norm: LossNorm,
) -> Result<f64> {
    check_mesh(u_r, p.dim())?;
    let compressed = compress_all(set, u_c, p)?;
    Ok(Objective::reconstruction(set, &compressed, norm)?.loss(u_r))
}

pub fn compress_all(set: &EncodedSet, u_c: &GivensMesh, p: &Projector) -> Result<Vec<StateVector>> {
    set.states.iter().map(|s| compress(s, u_c, p)).collect()
}

pub(crate) fn check_mesh(mesh: &GivensMesh, n: usize) -> Result<()> {
    if mesh.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: mesh.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::ImageSample;
    use crate::mesh::{init_mesh, GateOrder, InitScheme};
    use approx::assert_abs_diff_eq;

    fn set_of(pixels: Vec<Vec<f64>>) -> EncodedSet {
        let samples: Vec<ImageSample> = pixels.into_iter().enumerate().map(|(i, p)| ImageSample::new(i, p)).collect();
        EncodedSet::encode_all(&samples).unwrap()
    }

    #[test]
    fn leakage_of_uniform_state_through_identity() {
        let set = set_of(vec![vec![1.0; 8]]);
        let p = Projector::tail(8, 4).unwrap();
        let id = GivensMesh::identity(8, 1, GateOrder::Ascending);
        let l = compression_loss(&set, &id, &p, &CompressionTarget::Leakage, LossNorm::Sum).unwrap();
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
        let l = compression_loss(&set, &id, &p, &CompressionTarget::Leakage, LossNorm::Mean).unwrap();
        assert_abs_diff_eq!(l, 0.5 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn leakage_is_zero_inside_subspace() {
        let set = set_of(vec![vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 1.0]]);
        let p = Projector::tail(8, 4).unwrap();
        let id = GivensMesh::identity(8, 2, GateOrder::Ascending);
        assert_eq!(compression_loss(&set, &id, &p, &CompressionTarget::Leakage, LossNorm::Sum).unwrap(), 0.0);
    }

    #[test]
    fn leakage_equals_one_minus_retained_norm() {
        let set = set_of(vec![vec![0.3, 0.1, 0.9, 0.4, 0.0, 0.7, 0.2, 0.5], vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]]);
        let p = Projector::tail(8, 3).unwrap();
        let u = init_mesh(2, 8, InitScheme::Random, GateOrder::Ascending, 4).unwrap();
        let l = compression_loss(&set, &u, &p, &CompressionTarget::Leakage, LossNorm::Sum).unwrap();
        let expected: f64 = compress_all(&set, &u, &p).unwrap().iter().map(|c| 1.0 - c.norm_sq()).sum();
        assert_abs_diff_eq!(l, expected, epsilon = 1e-14);
    }

    #[test]
    fn explicit_target_zero_residual() {
        let set = set_of(vec![vec![0.0, 0.0, 3.0, 4.0]]);
        let p = Projector::tail(4, 2).unwrap();
        let id = GivensMesh::identity(4, 1, GateOrder::Ascending);
        let target = CompressionTarget::Explicit(vec![StateVector::new(vec![0.0, 0.0, 0.6, 0.8])]);
        assert_eq!(compression_loss(&set, &id, &p, &target, LossNorm::Sum).unwrap(), 0.0);
    }

    #[test]
    fn explicit_target_shape_errors() {
        let set = set_of(vec![vec![0.0, 0.0, 3.0, 4.0]]);
        let p = Projector::tail(4, 2).unwrap();
        let id = GivensMesh::identity(4, 1, GateOrder::Ascending);
        let two = CompressionTarget::uniform(&p, 2);
        assert!(matches!(
            compression_loss(&set, &id, &p, &two, LossNorm::Sum),
            Err(Error::TargetShapeMismatch(_))
        ));
        let outside = CompressionTarget::Explicit(vec![StateVector::new(vec![1.0, 0.0, 0.0, 0.0])]);
        assert!(matches!(
            compression_loss(&set, &id, &p, &outside, LossNorm::Sum),
            Err(Error::TargetShapeMismatch(_))
        ));
        let wrong_n = CompressionTarget::Explicit(vec![StateVector::new(vec![0.0, 1.0])]);
        assert!(compression_loss(&set, &id, &p, &wrong_n, LossNorm::Sum).is_err());
    }

    #[test]
    fn uniform_target_fills_retained_set() {
        let p = Projector::tail(8, 4).unwrap();
        let CompressionTarget::Explicit(b) = CompressionTarget::uniform(&p, 1) else {
            unreachable!()
        };
        let sq: Vec<f64> = b[0].amplitudes.iter().map(|a| a * a).collect();
        for (s, e) in sq.iter().zip([0.0, 0.0, 0.0, 0.0, 0.25, 0.25, 0.25, 0.25]) {
            assert_abs_diff_eq!(*s, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn reconstruction_loss_examples() {
        let set = set_of(vec![vec![0.2, 0.9, 0.4, 0.1, 0.0, 0.3, 0.8, 0.6]]);
        let u_c = init_mesh(3, 8, InitScheme::Random, GateOrder::Ascending, 9).unwrap();
        let p = Projector::tail(8, 8).unwrap();
        let l = reconstruction_loss(&set, &u_c, &p, &u_c.inverse(), LossNorm::Sum).unwrap();
        assert!(l < 1e-20, "{l}");

        // Output e_1 against input e_0: ||B - A||^2 = 2.
        let set = set_of(vec![vec![1.0, 0.0]]);
        let p = Projector::tail(2, 2).unwrap();
        let id = GivensMesh::identity(2, 1, GateOrder::Ascending);
        let swap = GivensMesh::from_thetas(2, 1, GateOrder::Descending, vec![std::f64::consts::FRAC_PI_2]).unwrap();
        assert_abs_diff_eq!(reconstruction_loss(&set, &id, &p, &swap, LossNorm::Sum).unwrap(), 2.0, epsilon = 1e-15);
    }
}
