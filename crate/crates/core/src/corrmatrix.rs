//! Equal-time correlation matrices and their canonical eigendecomposition.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::NormalizedReturns;

const SYMMETRY_TOL: f64 = 1e-12;
const RANGE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-9;

/// N × N real symmetric correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    assets: Vec<String>,
    values: DMatrix<f64>,
    n_observations: usize,
}

impl CorrelationMatrix {
    /// Validates a matrix supplied from outside the pipeline (file, fixture,
    /// analytic model). The diagonal must already be exactly 1.
    pub fn new(assets: Vec<String>, values: DMatrix<f64>, n_observations: usize) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::Validation(format!(
                "correlation matrix must be square, got {}x{}",
                n,
                values.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::InsufficientData(
                "correlation matrix needs N >= 2".into(),
            ));
        }
        if assets.len() != n {
            return Err(Error::Validation(format!(
                "{} asset names for N = {n}",
                assets.len()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 1.0 {
                return Err(Error::Validation(format!(
                    "diagonal entry {i} is {}, expected 1",
                    values[(i, i)]
                )));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + RANGE_TOL {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - values[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        let min_eig = values
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::Validation(format!(
                "matrix is not positive semi-definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self {
            assets,
            values,
            n_observations,
        })
    }

    /// Same as [`CorrelationMatrix::new`] with generated asset names `0..N`.
    pub fn from_values(values: DMatrix<f64>, n_observations: usize) -> Result<Self> {
        let assets = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::new(assets, values, n_observations)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.values.nrows()
    }

    /// Number of return observations T behind the estimate.
    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// C_ij = (1/T) Σ_t r_i(t) r_j(t), symmetrized, with the diagonal set to 1.
pub fn correlation_matrix(nr: &NormalizedReturns) -> Result<CorrelationMatrix> {
    let (n, t) = (nr.n_assets(), nr.n_observations());
    if n < 2 || t < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs N >= 2 and T >= 2, got N = {n}, T = {t}"
        )));
    }
    let r = nr.values();
    let mut c = r * r.transpose() / t as f64;
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix {
        assets: nr.assets().to_vec(),
        values: c,
        n_observations: t,
    })
}

/// Arithmetic mean of the N(N−1) off-diagonal entries.
pub fn mean_offdiagonal(c: &CorrelationMatrix) -> f64 {
    let n = c.n_assets();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += c.values[(i, j)];
            }
        }
    }
    sum / (n * (n - 1)) as f64
}

/// Eigenvalues in descending order with unit eigenvectors as columns.
///
/// Each eigenvector is oriented so that its largest-magnitude component is
/// positive (ties go to the lowest asset index). This fixes an otherwise
/// arbitrary sign, so "positive" and "negative" subsectors are labels of
/// this convention rather than intrinsic properties.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    assets: Vec<String>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    n_observations: usize,
}

impl EigenSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column α is the eigenvector of `eigenvalues()[α]`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, alpha: usize) -> Result<Vec<f64>> {
        self.check_mode(alpha)?;
        Ok(self.eigenvectors.column(alpha).iter().copied().collect())
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    /// Q = T / N.
    pub fn aspect_ratio(&self) -> f64 {
        self.n_observations as f64 / self.n_assets() as f64
    }

    pub(crate) fn check_mode(&self, alpha: usize) -> Result<()> {
        if alpha >= self.n_assets() {
            return Err(Error::Index {
                index: alpha,
                len: self.n_assets(),
            });
        }
        Ok(())
    }

    /// Σ_α λ_α u_α u_αᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let u = &self.eigenvectors;
        let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |i, a| u[(i, a)] * self.eigenvalues[a]);
        scaled * u.transpose()
    }

    /// Returns a copy with the eigenvector of `alpha` negated. Breaks the
    /// canonical sign convention; meant for invariance checks.
    pub fn with_flipped_mode(&self, alpha: usize) -> Result<Self> {
        self.check_mode(alpha)?;
        let mut out = self.clone();
        out.eigenvectors.column_mut(alpha).neg_mut();
        Ok(out)
    }

    /// Builds a spectrum from raw parts, applying the canonical sign and
    /// ordering. Columns must be orthonormal.
    pub fn from_parts(
        assets: Vec<String>,
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<f64>,
        n_observations: usize,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n || assets.len() != n {
            return Err(Error::Validation(
                "eigen parts have inconsistent sizes".into(),
            ));
        }
        Ok(canonicalize(
            assets,
            eigenvalues,
            eigenvectors,
            n_observations,
        ))
    }
}

/// Index of the largest-magnitude component, lowest index on ties.
fn anchor(v: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in v.enumerate() {
        if x.abs() > best_abs {
            best = i;
            best_abs = x.abs();
        }
    }
    best
}

fn canonicalize(
    assets: Vec<String>,
    eigenvalues: Vec<f64>,
    mut vectors: DMatrix<f64>,
    n_observations: usize,
) -> EigenSpectrum {
    let n = eigenvalues.len();
    let mut anchors = Vec::with_capacity(n);
    for a in 0..n {
        let k = anchor(vectors.column(a).iter().copied());
        if vectors[(k, a)] < 0.0 {
            vectors.column_mut(a).neg_mut();
        }
        anchors.push(k);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| match eigenvalues[b].total_cmp(&eigenvalues[a]) {
        Ordering::Equal => anchors[a].cmp(&anchors[b]),
        o => o,
    });
    let sorted_values = order.iter().map(|&a| eigenvalues[a]).collect();
    let sorted_vectors = vectors.select_columns(order.iter());
    EigenSpectrum {
        assets,
        eigenvalues: sorted_values,
        eigenvectors: sorted_vectors,
        n_observations,
    }
}

/// Full eigendecomposition with descending eigenvalues and canonical signs.
pub fn eigendecompose(c: &CorrelationMatrix) -> Result<EigenSpectrum> {
    let n = c.n_assets();
    let m = c.values.clone();
    let max_iter = 1000 * n.max(1);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, max_iter).ok_or_else(|| {
        let v = &c.values;
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (v[(i, j)] - v[(j, i)]).abs())
            .fold(0.0, f64::max);
        Error::Numerical(format!(
            "symmetric eigensolver did not converge after {max_iter} iterations \
             (N = {n}, Frobenius norm {:.6e}, max asymmetry {asym:.3e})",
            v.norm()
        ))
    })?;
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "eigensolver produced non-finite eigenvalues".into(),
        ));
    }
    Ok(canonicalize(
        c.assets.clone(),
        eig.eigenvalues.iter().copied().collect(),
        eig.eigenvectors,
        c.n_observations,
    ))
}

/// Sidecar stored next to a serialized correlation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationMeta {
    pub n_assets: usize,
    pub n_observations: usize,
}

/// Writes the matrix as a square grid under an asset header row.
pub fn write_grid<W: Write>(c: &CorrelationMatrix, sink: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    w.write_record(&c.assets)?;
    for i in 0..c.n_assets() {
        w.write_record((0..c.n_assets()).map(|j| c.values[(i, j)].to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn read_grid<R: Read>(
    source: R,
    delimiter: u8,
    meta: &CorrelationMeta,
) -> Result<CorrelationMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let assets: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let n = assets.len();
    if n != meta.n_assets {
        return Err(Error::Validation(format!(
            "grid has {n} assets but sidecar says {}",
            meta.n_assets
        )));
    }
    let mut values = DMatrix::zeros(n, n);
    let mut rows = 0;
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if rows >= n || record.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("correlation grid must be {n}x{n}"),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            values[(rows, j)] = cell.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad correlation value {cell:?}: {e}"),
            })?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse {
            line: rows as u64 + 1,
            message: format!("correlation grid has {rows} rows, expected {n}"),
        });
    }
    CorrelationMatrix::new(assets, values, meta.n_observations)
}

pub fn save_correlation(
    c: &CorrelationMatrix,
    grid: impl AsRef<Path>,
    sidecar: impl AsRef<Path>,
) -> Result<()> {
    let f = std::fs::File::create(grid.as_ref()).map_err(|e| Error::io(grid.as_ref(), e))?;
    write_grid(c, f, b',')?;
    let meta = CorrelationMeta {
        n_assets: c.n_assets(),
        n_observations: c.n_observations(),
    };
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(sidecar.as_ref(), json + "\n").map_err(|e| Error::io(sidecar.as_ref(), e))
}

pub fn load_correlation(
    grid: impl AsRef<Path>,
    sidecar: impl AsRef<Path>,
) -> Result<CorrelationMatrix> {
    let text =
        std::fs::read_to_string(sidecar.as_ref()).map_err(|e| Error::io(sidecar.as_ref(), e))?;
    let meta: CorrelationMeta = serde_json::from_str(&text)?;
    let f = std::fs::File::open(grid.as_ref()).map_err(|e| Error::io(grid.as_ref(), e))?;
    read_grid(std::io::BufReader::new(f), b',', &meta)
}
