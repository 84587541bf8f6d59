//! Gaussian factor-model markets with known structure.
//!
//! r_i(t) = m·f₀(t) + s_i·g_b·f_b(t) + σ·ε_i(t), where asset i belongs to at
//! most one block b and s_i = ±1 is its planted sign. Rows are normalized
//! afterwards, so only the ratios m : g_b : σ matter.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrmatrix::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::timeseries::{normalize_returns, Metadata, NormalizedReturns, PricePanel, ReturnMatrix};

/// One group of assets driven by a shared factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub assets: Vec<usize>,
    pub loading: f64,
    /// +1 / −1 per asset, same order as `assets`. Absent means all +1.
    #[serde(default)]
    pub signs: Option<Vec<i8>>,
}

impl BlockSpec {
    fn sign(&self, k: usize) -> f64 {
        self.signs.as_ref().map_or(1.0, |s| f64::from(s[k]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub n_assets: usize,
    pub n_observations: usize,
    #[serde(default)]
    pub market_strength: f64,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    #[serde(default = "unit")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn unit() -> f64 {
    1.0
}

impl MarketSpec {
    /// Pure noise, no factors.
    pub fn noise(n_assets: usize, n_observations: usize, seed: u64) -> Self {
        Self {
            n_assets,
            n_observations,
            market_strength: 0.0,
            blocks: Vec::new(),
            noise_std: 1.0,
            seed,
        }
    }

    /// N = 50, T = 2000 with a market factor and one 20-asset block whose
    /// first ten members load positively and last ten negatively.
    pub fn planted_pair(seed: u64) -> Self {
        Self {
            n_assets: 50,
            n_observations: 2000,
            market_strength: 2.0,
            blocks: vec![BlockSpec {
                assets: (0..20).collect(),
                loading: 1.0,
                signs: Some((0..20).map(|i| if i < 10 { 1 } else { -1 }).collect()),
            }],
            noise_std: 1.0,
            seed,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("market spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("market spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_assets < 2 {
            return bad(format!("n_assets must be >= 2, got {}", self.n_assets));
        }
        if self.n_observations < 2 {
            return bad(format!(
                "n_observations must be >= 2, got {}",
                self.n_observations
            ));
        }
        if !(self.market_strength.is_finite() && self.market_strength >= 0.0) {
            return bad(format!(
                "market_strength must be finite and >= 0, got {}",
                self.market_strength
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad(format!(
                "noise_std must be finite and > 0, got {}",
                self.noise_std
            ));
        }
        let mut seen = BTreeSet::new();
        for (b, block) in self.blocks.iter().enumerate() {
            if block.assets.is_empty() {
                return bad(format!("block {b} has no assets"));
            }
            if !block.loading.is_finite() {
                return bad(format!("block {b} loading is not finite"));
            }
            if let Some(signs) = &block.signs {
                if signs.len() != block.assets.len() {
                    return bad(format!(
                        "block {b} has {} signs for {} assets",
                        signs.len(),
                        block.assets.len()
                    ));
                }
                if signs.iter().any(|&s| s != 1 && s != -1) {
                    return bad(format!("block {b} signs must be +1 or -1"));
                }
            }
            for &i in &block.assets {
                if i >= self.n_assets {
                    return bad(format!(
                        "block {b} asset {i} out of range (N = {})",
                        self.n_assets
                    ));
                }
                if !seen.insert(i) {
                    return bad(format!("asset {i} appears in more than one block"));
                }
            }
        }
        Ok(())
    }

    /// Block membership per asset: (block index, sign, loading).
    fn membership(&self) -> Vec<Option<(usize, f64, f64)>> {
        let mut out = vec![None; self.n_assets];
        for (b, block) in self.blocks.iter().enumerate() {
            for (k, &i) in block.assets.iter().enumerate() {
                out[i] = Some((b, block.sign(k), block.loading));
            }
        }
        out
    }

    pub fn asset_names(&self) -> Vec<String> {
        let width = (self.n_assets - 1).to_string().len();
        (0..self.n_assets)
            .map(|i| format!("A{i:0width$}"))
            .collect()
    }
}

/// Intended split of one factor's assets by planted sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFactor {
    /// 0 for the market factor, b + 1 for block b.
    pub factor: usize,
    pub loading: f64,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub assets: Vec<String>,
    pub factors: Vec<PlantedFactor>,
    pub categories: Metadata,
}

#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub spec: MarketSpec,
    pub returns: NormalizedReturns,
    /// Factor series, row 0 the market factor and row b + 1 block b.
    pub factors: DMatrix<f64>,
    pub truth: GroundTruth,
}

const ASSET_STREAM_OFFSET: u64 = 1 << 32;

fn gaussian_row(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn categories(spec: &MarketSpec, names: &[String]) -> Metadata {
    let membership = spec.membership();
    names
        .iter()
        .zip(&membership)
        .map(|(name, m)| {
            let label = match m {
                None => "noise".to_string(),
                Some((b, _, _)) if spec.blocks[*b].signs.is_none() => format!("block{b}"),
                Some((b, s, _)) if *s > 0.0 => format!("block{b}_pos"),
                Some((b, _, _)) => format!("block{b}_neg"),
            };
            (name.clone(), label)
        })
        .collect()
}

fn ground_truth(spec: &MarketSpec, names: Vec<String>) -> GroundTruth {
    let mut factors = Vec::new();
    if spec.market_strength > 0.0 {
        factors.push(PlantedFactor {
            factor: 0,
            loading: spec.market_strength,
            positive: (0..spec.n_assets).collect(),
            negative: Vec::new(),
        });
    }
    for (b, block) in spec.blocks.iter().enumerate() {
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for (k, &i) in block.assets.iter().enumerate() {
            if block.sign(k) > 0.0 {
                positive.push(i);
            } else {
                negative.push(i);
            }
        }
        positive.sort_unstable();
        negative.sort_unstable();
        factors.push(PlantedFactor {
            factor: b + 1,
            loading: block.loading,
            positive,
            negative,
        });
    }
    GroundTruth {
        categories: categories(spec, &names),
        assets: names,
        factors,
    }
}

/// Samples a market. Factor k uses ChaCha stream k and asset i's noise uses
/// stream 2³² + i, all from `spec.seed`.
pub fn generate(spec: &MarketSpec) -> Result<SyntheticMarket> {
    spec.validate()?;
    let (n, t) = (spec.n_assets, spec.n_observations);
    let k = spec.blocks.len() + 1;
    let factor_rows: Vec<Vec<f64>> = (0..k as u64)
        .into_par_iter()
        .map(|f| gaussian_row(spec.seed, f, t))
        .collect();
    let factors = DMatrix::from_fn(k, t, |f, s| factor_rows[f][s]);
    let membership = spec.membership();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = gaussian_row(spec.seed, ASSET_STREAM_OFFSET + i as u64, t);
            for (s, x) in row.iter_mut().enumerate() {
                *x = spec.noise_std * *x + spec.market_strength * factors[(0, s)];
                if let Some((b, sign, g)) = membership[i] {
                    *x += sign * g * factors[(b + 1, s)];
                }
            }
            row
        })
        .collect();
    let names = spec.asset_names();
    let raw = ReturnMatrix::new(names.clone(), DMatrix::from_fn(n, t, |i, s| rows[i][s]), 1)?;
    Ok(SyntheticMarket {
        spec: spec.clone(),
        returns: normalize_returns(&raw)?,
        factors,
        truth: ground_truth(spec, names),
    })
}

/// Exact T → ∞ correlation matrix of the factor model.
pub fn population_correlation(spec: &MarketSpec) -> Result<CorrelationMatrix> {
    spec.validate()?;
    let n = spec.n_assets;
    let membership = spec.membership();
    let m2 = spec.market_strength * spec.market_strength;
    let s2 = spec.noise_std * spec.noise_std;
    let var: Vec<f64> = membership
        .iter()
        .map(|m| m2 + s2 + m.map_or(0.0, |(_, _, g)| g * g))
        .collect();
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let mut cov = m2;
        if let (Some((bi, si, gi)), Some((bj, sj, gj))) = (membership[i], membership[j]) {
            if bi == bj {
                cov += si * sj * gi * gj;
            }
        }
        cov / (var[i] * var[j]).sqrt()
    });
    CorrelationMatrix::new(spec.asset_names(), values, spec.n_observations)
}

/// First calendar date of exported panels.
pub fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

/// `count` consecutive weekdays starting at `start` (moved forward off a
/// weekend).
pub fn weekdays(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Price scale applied to normalized returns when exporting.
pub const EXPORT_VOLATILITY: f64 = 0.01;
pub const EXPORT_START_PRICE: f64 = 100.0;

impl SyntheticMarket {
    /// Price panel with P(0) = 100 and ln P(t+1) − ln P(t) = 0.01·r(t), on
    /// consecutive weekdays. Carries the block categories as metadata.
    pub fn to_price_panel(&self, start: NaiveDate) -> Result<PricePanel> {
        let r = self.returns.values();
        let t = r.ncols();
        let prices = (0..r.nrows())
            .map(|i| {
                let mut p = EXPORT_START_PRICE;
                let mut row = Vec::with_capacity(t + 1);
                row.push(Some(p));
                for s in 0..t {
                    p *= (EXPORT_VOLATILITY * r[(i, s)]).exp();
                    row.push(Some(p));
                }
                row
            })
            .collect();
        Ok(
            PricePanel::new(weekdays(start, t + 1), self.truth.assets.clone(), prices)?
                .with_metadata(self.truth.categories.clone()),
        )
    }
}
