//! Classical sparse-coding baseline: K-SVD dictionary learning with
//! orthogonal matching pursuit codes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Square dictionary whose columns are unit-norm atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub atoms: DMatrix<f64>,
    /// Maximum nonzeros per code.
    pub sparsity: usize,
}

impl Dictionary {
    pub fn new(atoms: DMatrix<f64>, sparsity: usize) -> Self {
        Self { atoms, sparsity }
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn reconstruct(&self, code: &[f64]) -> Vec<f64> {
        (&self.atoms * DVector::from_column_slice(code)).as_slice().to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct DictionaryFit {
    pub dictionary: Dictionary,
    pub codes: Vec<Vec<f64>>,
    /// `sum_i ||y_i - D s_i||^2`, entry 0 before any update.
    pub losses: Vec<f64>,
    /// Unused atoms replaced by the worst-fit residual.
    pub reseeded: usize,
}

impl DictionaryFit {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("fit always records the initial loss")
    }
}

/// Greedy orthogonal matching pursuit with at most `dict.sparsity` atoms.
pub fn sparse_code(y: &[f64], dict: &Dictionary) -> Result<Vec<f64>> {
    if y.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            actual: y.len(),
        });
    }
    let target = DVector::from_column_slice(y);
    let y_norm_sq = target.norm_squared();
    let mut code = vec![0.0; dict.atom_count()];
    if y_norm_sq == 0.0 {
        return Ok(code);
    }
    let mut support: Vec<usize> = Vec::new();
    let mut residual = target.clone();
    let mut coeffs = DVector::zeros(0);
    for _ in 0..dict.sparsity.min(dict.atom_count()) {
        if residual.norm_squared() <= 1e-28 * y_norm_sq {
            break;
        }
        let corr = dict.atoms.tr_mul(&residual);
        let best = (0..dict.atom_count())
            .filter(|j| !support.contains(j))
            .max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()));
        let Some(j) = best else { break };
        if corr[j] == 0.0 {
            break;
        }
        support.push(j);
        let sub = dict.atoms.select_columns(&support);
        coeffs = sub
            .clone()
            .svd(true, true)
            .solve(&target, 1e-14)
            .map_err(|e| Error::InvalidConfig(format!("least squares failed: {e}")))?;
        residual = &target - &sub * &coeffs;
    }
    for (&j, &c) in support.iter().zip(coeffs.iter()) {
        code[j] = c;
    }
    Ok(code)
}

fn residual_sq(y: &DVector<f64>, atoms: &DMatrix<f64>, code: &[f64]) -> f64 {
    (y - atoms * DVector::from_column_slice(code)).norm_squared()
}

/// Eigenvectors of `Y Y^T` ordered by decreasing eigenvalue, i.e. the left
/// singular vectors of the data matrix completed to a full basis.
fn svd_basis(data: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = data * data.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = eig.eigenvectors.select_columns(&order);
    for mut col in basis.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    basis
}

/// K-SVD on the samples `data` (each of length `N`) with an `N x N`
/// dictionary initialized from the data's left singular vectors.
///
/// Each iteration re-codes every sample (keeping its previous code when OMP
/// finds a worse one) and then refits each atom with the rank-1 SVD of the
/// residual restricted to the samples that use it. An atom no sample uses is
/// replaced by the normalized residual of the worst-fit sample.
pub fn fit_dictionary(data: &[Vec<f64>], sparsity: usize, iterations: usize) -> Result<DictionaryFit> {
    fit_dictionary_with(data, sparsity, iterations, |_, _, _, _| {})
}

/// [`fit_dictionary`] that reports `(iteration, dictionary, codes, loss)`
/// after initialization and after every iteration.
pub fn fit_dictionary_with(
    data: &[Vec<f64>],
    sparsity: usize,
    iterations: usize,
    mut observe: impl FnMut(usize, &Dictionary, &[Vec<f64>], f64),
) -> Result<DictionaryFit> {
    let Some(first) = data.first() else {
        return Err(Error::InvalidConfig("dataset is empty".into()));
    };
    let n = first.len();
    if sparsity == 0 || sparsity > n {
        return Err(Error::InvalidConfig(format!(
            "sparsity must satisfy 1 <= d <= {n}, got {sparsity}"
        )));
    }
    if let Some(bad) = data.iter().find(|y| y.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    let ys: Vec<DVector<f64>> = data.iter().map(|y| DVector::from_column_slice(y)).collect();
    let y_mat = DMatrix::from_columns(&ys);
    let mut dict = Dictionary::new(svd_basis(&y_mat), sparsity);

    let mut codes: Vec<Vec<f64>> = data.iter().map(|y| sparse_code(y, &dict)).collect::<Result<_>>()?;
    let total = |dict: &Dictionary, codes: &[Vec<f64>]| -> f64 {
        ys.iter().zip(codes).map(|(y, c)| residual_sq(y, &dict.atoms, c)).sum()
    };
    let mut losses = vec![total(&dict, &codes)];
    observe(0, &dict, &codes, losses[0]);
    let mut reseeded = 0;

    for t in 1..=iterations {
        for (y, code) in ys.iter().zip(codes.iter_mut()) {
            let fresh = sparse_code(y.as_slice(), &dict)?;
            if residual_sq(y, &dict.atoms, &fresh) < residual_sq(y, &dict.atoms, code) {
                *code = fresh;
            }
        }

        for a in 0..dict.atom_count() {
            let users: Vec<usize> = (0..ys.len()).filter(|&i| codes[i][a] != 0.0).collect();
            if users.is_empty() {
                if reseed_atom(&mut dict, a, &ys, &codes) {
                    reseeded += 1;
                }
                continue;
            }
            let mut err = DMatrix::zeros(n, users.len());
            for (col, &i) in users.iter().enumerate() {
                let mut c = codes[i].clone();
                c[a] = 0.0;
                let r = &ys[i] - &dict.atoms * DVector::from_column_slice(&c);
                err.set_column(col, &r);
            }
            let svd = err.svd(true, true);
            let (top, sigma) = svd
                .singular_values
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .map(|(i, s)| (i, *s))
                .expect("nonempty residual");
            if sigma == 0.0 {
                for &i in &users {
                    codes[i][a] = 0.0;
                }
                continue;
            }
            let u = svd.u.as_ref().expect("computed").column(top).into_owned();
            let v_t = svd.v_t.as_ref().expect("computed").row(top).into_owned();
            dict.atoms.set_column(a, &u);
            for (col, &i) in users.iter().enumerate() {
                codes[i][a] = sigma * v_t[col];
            }
        }
        let loss = total(&dict, &codes);
        observe(t, &dict, &codes, loss);
        losses.push(loss);
    }

    Ok(DictionaryFit {
        dictionary: dict,
        codes,
        losses,
        reseeded,
    })
}

fn reseed_atom(dict: &mut Dictionary, a: usize, ys: &[DVector<f64>], codes: &[Vec<f64>]) -> bool {
    let worst = ys
        .iter()
        .zip(codes)
        .map(|(y, c)| y - &dict.atoms * DVector::from_column_slice(c))
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()));
    match worst {
        Some(r) if r.norm() > 0.0 => {
            dict.atoms.set_column(a, &(&r / r.norm()));
            true
        }
        _ => false,
    }
}
