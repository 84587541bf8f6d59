//! Anti-correlation between the positive and negative subsectors of an
//! eigenmode.
//!
//! Three views are provided:
//!
//! * the rank-one contribution C^α = u_α u_αᵀ of a mode to the correlation
//!   matrix, negative wherever two components have opposite signs;
//! * C₊₋, the equal-time correlation between the two subsector combination
//!   series, compared against random disjoint combinations of the same size
//!   and weight scale;
//! * average correlation within each subsector and between the two.
//!
//! # Orientation of C₊₋
//!
//! The combination I⁻ = Σ u_i r_i over the negative subsector carries the
//! (negative) signed weights. The random baseline, however, uses positive
//! weights on both combinations. To compare like with like, [`mode_scan`]
//! reports C₊₋ between I⁺ and the magnitude-weighted negative combination
//! Σ |u_i| r_i = −I⁻. The literal signed-weight values are reported alongside
//! as `signed_raw` / `signed_pearson`; they differ only in sign.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrmatrix::{CorrelationMatrix, EigenSpectrum};
use crate::error::{Error, Result};
use crate::sectors::{Side, SubsectorPartition};
use crate::timeseries::NormalizedReturns;

/// Default number of random-combination trials per mode.
pub const DEFAULT_TRIALS: usize = 1000;

/// Rank-one contribution of one eigenmode, C^α_ij = u_i^α u_j^α.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCorrelation {
    pub alpha: usize,
    pub values: DMatrix<f64>,
}

impl ModeCorrelation {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }
}

pub fn eigenmode_correlation(spec: &EigenSpectrum, alpha: usize) -> Result<ModeCorrelation> {
    spec.check_mode(alpha)?;
    let u = spec.eigenvectors().column(alpha);
    Ok(ModeCorrelation {
        alpha,
        values: u * u.transpose(),
    })
}

/// Weighted combination I(t) = Σ_k w_k r_{i_k}(t). `by_asset` is the T × N
/// transpose of the return matrix, so each asset's series is contiguous.
fn combination(by_asset: &DMatrix<f64>, members: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; by_asset.nrows()];
    for (&i, &w) in members.iter().zip(weights) {
        for (acc, x) in out.iter_mut().zip(by_asset.column(i).iter()) {
            *acc += w * x;
        }
    }
    out
}

/// I(t) = Σ_{i ∈ side} u_i r_i(t) with the signed eigenvector components as
/// weights.
pub fn subsector_series(
    nr: &NormalizedReturns,
    part: &SubsectorPartition,
    side: Side,
) -> Result<Vec<f64>> {
    let members = part.members(side);
    if members.is_empty() {
        return Err(Error::EmptySubsector {
            mode: part.mode_index,
            side: side.as_str(),
        });
    }
    if let Some(&i) = members.iter().find(|&&i| i >= nr.n_assets()) {
        return Err(Error::Index {
            index: i,
            len: nr.n_assets(),
        });
    }
    Ok(combination(
        &nr.values().transpose(),
        members,
        part.weights(side),
    ))
}

/// ⟨I⁺ I⁻⟩ and its Pearson-normalized variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    /// Time average of the product, no centering.
    pub raw: f64,
    /// Mean-centered and unit-variance scaled; `None` if either series is flat.
    pub pearson: Option<f64>,
}

pub fn cross_corr_pm(i_plus: &[f64], i_minus: &[f64]) -> Result<PairCorrelation> {
    if i_plus.len() != i_minus.len() {
        return Err(Error::Argument(format!(
            "series lengths differ ({} vs {})",
            i_plus.len(),
            i_minus.len()
        )));
    }
    let t = i_plus.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!("need T >= 2, got {t}")));
    }
    let tf = t as f64;
    let raw = i_plus.iter().zip(i_minus).map(|(a, b)| a * b).sum::<f64>() / tf;
    Ok(PairCorrelation {
        raw,
        pearson: pearson(i_plus, i_minus),
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale_a = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let scale_b = b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let flat =
        |s: f64, scale: f64| s.is_nan() || s.sqrt() <= 16.0 * f64::EPSILON * scale * n.sqrt();
    if flat(saa, scale_a) || flat(sbb, scale_b) {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Summary of the random-combination null distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub mean: f64,
    /// Sample standard deviation over trials (0 for a single trial).
    pub std: f64,
    pub trials: usize,
    pub seed: u64,
    pub samples: Vec<f64>,
}

/// Pearson correlation between two random disjoint positive-weight
/// combinations, repeated `trials` times.
///
/// Each trial draws `sizes.0 + sizes.1` distinct assets uniformly, splits them
/// into two groups of the given sizes and assigns the weight magnitudes in
/// random order. Trial k uses ChaCha stream k of `seed`, so results do not
/// depend on thread scheduling.
pub fn random_baseline(
    nr: &NormalizedReturns,
    sizes: (usize, usize),
    weights: (&[f64], &[f64]),
    trials: usize,
    seed: u64,
) -> Result<BaselineStats> {
    let n = nr.n_assets();
    let (n_plus, n_minus) = sizes;
    if n_plus == 0 || n_minus == 0 {
        return Err(Error::Argument(
            "baseline sizes must both be positive".into(),
        ));
    }
    if n_plus + n_minus > n {
        return Err(Error::Argument(format!(
            "baseline sizes ({n_plus}, {n_minus}) exceed N = {n}"
        )));
    }
    if weights.0.len() != n_plus || weights.1.len() != n_minus {
        return Err(Error::Argument(format!(
            "weight counts ({}, {}) do not match sizes ({n_plus}, {n_minus})",
            weights.0.len(),
            weights.1.len()
        )));
    }
    if trials == 0 {
        return Err(Error::Argument("trials must be >= 1".into()));
    }
    let w_plus: Vec<f64> = weights.0.iter().map(|w| w.abs()).collect();
    let w_minus: Vec<f64> = weights.1.iter().map(|w| w.abs()).collect();
    // Rows are zero-mean, so the covariance of two combinations is a bilinear
    // form in the Gram matrix and each trial costs O(k²) instead of O(k·T).
    let r = nr.values();
    let gram = (r * r.transpose()) / nr.n_observations() as f64;
    let form = |ia: &[usize], wa: &[f64], ib: &[usize], wb: &[f64]| {
        let mut acc = 0.0;
        for (&i, &x) in ia.iter().zip(wa) {
            let mut row = 0.0;
            for (&j, &y) in ib.iter().zip(wb) {
                row += gram[(i, j)] * y;
            }
            acc += x * row;
        }
        acc
    };

    let samples = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let picked = index::sample(&mut rng, n, n_plus + n_minus).into_vec();
            let mut wp = w_plus.clone();
            let mut wm = w_minus.clone();
            wp.shuffle(&mut rng);
            wm.shuffle(&mut rng);
            let (ia, ib) = picked.split_at(n_plus);
            let cov = form(ia, &wp, ib, &wm);
            let var_a = form(ia, &wp, ia, &wp);
            let var_b = form(ib, &wm, ib, &wm);
            let floor = 1e-12 * wp.iter().chain(&wm).map(|w| w * w).sum::<f64>();
            if !(var_a > floor && var_b > floor) {
                return Err(Error::Numerical(format!(
                    "random combination in trial {k} has zero variance"
                )));
            }
            Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mean = samples.iter().sum::<f64>() / trials as f64;
    let std = if trials > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BaselineStats {
        mean,
        std,
        trials,
        seed,
        samples,
    })
}

/// C₊₋ for one mode next to its random baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScanRow {
    pub alpha: usize,
    pub eigenvalue: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    /// ⟨I⁺ · Σ|u|r⟩ over the negative side (see module docs).
    pub raw: f64,
    pub pearson: Option<f64>,
    /// Literal ⟨I⁺ I⁻⟩ with signed weights.
    pub signed_raw: f64,
    pub signed_pearson: Option<f64>,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    /// (pearson − baseline_mean) / baseline_std.
    pub z_score: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScan {
    pub u_c: f64,
    pub rows: Vec<ModeScanRow>,
    /// Modes left out because one subsector was empty.
    pub skipped: Vec<usize>,
}

impl ModeScan {
    pub fn row(&self, alpha: usize) -> Option<&ModeScanRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }

    /// Spearman rank correlation between mode index and Pearson C₊₋.
    /// Positive values mean C₊₋ tends to rise with α.
    pub fn trend(&self) -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter_map(|r| r.pearson.map(|p| (r.alpha as f64, p)))
            .unzip();
        spearman(&xs, &ys)
    }
}

/// Per-mode RNG seed derived from the run seed.
pub fn mode_seed(seed: u64, alpha: usize) -> u64 {
    seed ^ (alpha as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Scans every mode (from 1, or from 0 with `include_market`) whose
/// subsectors at `u_c` are both non-empty.
pub fn mode_scan(
    nr: &NormalizedReturns,
    spec: &EigenSpectrum,
    u_c: f64,
    trials: usize,
    seed: u64,
    include_market: bool,
) -> Result<ModeScan> {
    if nr.n_assets() != spec.n_assets() {
        return Err(Error::Argument(format!(
            "returns have {} assets, spectrum has {}",
            nr.n_assets(),
            spec.n_assets()
        )));
    }
    let start = if include_market { 0 } else { 1 };
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for alpha in start..spec.n_assets() {
        let u = spec.eigenvector(alpha)?;
        let part = SubsectorPartition::from_components(alpha, &u, u_c)?;
        if !part.both_sides_nonempty() {
            skipped.push(alpha);
            continue;
        }
        let plus = subsector_series(nr, &part, Side::Positive)?;
        let minus = subsector_series(nr, &part, Side::Negative)?;
        let signed = cross_corr_pm(&plus, &minus)?;
        let flipped: Vec<f64> = minus.iter().map(|x| -x).collect();
        let aligned = cross_corr_pm(&plus, &flipped)?;
        let s = mode_seed(seed, alpha);
        let base = random_baseline(
            nr,
            (part.positive.len(), part.negative.len()),
            (&part.positive_weights, &part.negative_weights),
            trials,
            s,
        )?;
        let z_score = aligned
            .pearson
            .filter(|_| base.std > 0.0)
            .map(|p| (p - base.mean) / base.std);
        rows.push(ModeScanRow {
            alpha,
            eigenvalue: spec.eigenvalues()[alpha],
            n_positive: part.positive.len(),
            n_negative: part.negative.len(),
            raw: aligned.raw,
            pearson: aligned.pearson,
            signed_raw: signed.raw,
            signed_pearson: signed.pearson,
            baseline_mean: base.mean,
            baseline_std: base.std,
            z_score,
            trials,
            seed: s,
        });
    }
    Ok(ModeScan { u_c, rows, skipped })
}

/// Mean correlation inside each subsector and between them. A side with
/// fewer than two members has no within-average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockAverages {
    pub within_positive: Option<f64>,
    pub within_negative: Option<f64>,
    pub between: Option<f64>,
}

fn within(c: &CorrelationMatrix, members: &[usize]) -> Option<f64> {
    if members.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, &i) in members.iter().enumerate() {
        for &j in &members[k + 1..] {
            sum += c.get(i, j);
            count += 1;
        }
    }
    Some(sum / count as f64)
}

pub fn block_averages(c: &CorrelationMatrix, part: &SubsectorPartition) -> BlockAverages {
    let between = if part.both_sides_nonempty() {
        let mut sum = 0.0;
        for &i in &part.positive {
            for &j in &part.negative {
                sum += c.get(i, j);
            }
        }
        Some(sum / (part.positive.len() * part.negative.len()) as f64)
    } else {
        None
    };
    BlockAverages {
        within_positive: within(c, &part.positive),
        within_negative: within(c, &part.negative),
        between,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub alpha: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    #[serde(flatten)]
    pub averages: BlockAverages,
}

/// Settings for [`anticorr_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub u_c: f64,
    pub trials: usize,
    pub seed: u64,
    pub include_market_mode: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            u_c: 0.08,
            trials: DEFAULT_TRIALS,
            seed: 0,
            include_market_mode: false,
        }
    }
}

/// Thresholded and full-weight mode scans plus block averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticorrReport {
    pub config: ScanConfig,
    pub orientation: String,
    pub thresholded: ModeScan,
    /// Same scan with u_c = 0 (every component weighted).
    pub full_weight: ModeScan,
    pub thresholded_trend: Option<f64>,
    pub full_weight_trend: Option<f64>,
    pub blocks: Vec<BlockRow>,
}

pub const ORIENTATION: &str =
    "raw/pearson pair the positive combination with the magnitude-weighted negative combination; signed_* use signed weights";

pub fn anticorr_report(
    nr: &NormalizedReturns,
    c: &CorrelationMatrix,
    spec: &EigenSpectrum,
    config: &ScanConfig,
) -> Result<AnticorrReport> {
    let thresholded = mode_scan(
        nr,
        spec,
        config.u_c,
        config.trials,
        config.seed,
        config.include_market_mode,
    )?;
    let full_weight = mode_scan(
        nr,
        spec,
        0.0,
        config.trials,
        config.seed,
        config.include_market_mode,
    )?;
    let start = if config.include_market_mode { 0 } else { 1 };
    let mut blocks = Vec::new();
    for alpha in start..spec.n_assets() {
        let u = spec.eigenvector(alpha)?;
        let part = SubsectorPartition::from_components(alpha, &u, config.u_c)?;
        if !part.both_sides_nonempty() {
            continue;
        }
        blocks.push(BlockRow {
            alpha,
            n_positive: part.positive.len(),
            n_negative: part.negative.len(),
            averages: block_averages(c, &part),
        });
    }
    Ok(AnticorrReport {
        config: config.clone(),
        orientation: ORIENTATION.into(),
        thresholded_trend: thresholded.trend(),
        full_weight_trend: full_weight.trend(),
        thresholded,
        full_weight,
        blocks,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Plot-ready scan file. The first five columns are mode, C₊₋ raw, C₊₋
/// pearson, baseline mean and baseline std.
pub fn write_scan<W: Write>(scan: &ModeScan, sink: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    w.write_record([
        "mode",
        "c_pm_raw",
        "c_pm_pearson",
        "baseline_mean",
        "baseline_std",
        "eigenvalue",
        "n_positive",
        "n_negative",
        "signed_raw",
        "signed_pearson",
        "z_score",
    ])?;
    for r in &scan.rows {
        w.write_record([
            r.alpha.to_string(),
            r.raw.to_string(),
            opt(r.pearson),
            r.baseline_mean.to_string(),
            r.baseline_std.to_string(),
            r.eigenvalue.to_string(),
            r.n_positive.to_string(),
            r.n_negative.to_string(),
            r.signed_raw.to_string(),
            opt(r.signed_pearson),
            opt(r.z_score),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn write_blocks<W: Write>(rows: &[BlockRow], sink: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    w.write_record([
        "mode",
        "n_positive",
        "n_negative",
        "within_positive",
        "within_negative",
        "between",
    ])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.n_positive.to_string(),
            r.n_negative.to_string(),
            opt(r.averages.within_positive),
            opt(r.averages.within_negative),
            opt(r.averages.between),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}
