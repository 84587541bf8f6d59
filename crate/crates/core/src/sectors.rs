//! Sign-split subsectors of significant eigenmodes and their category labels.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corrmatrix::EigenSpectrum;
use crate::error::{Error, Result};
use crate::rmt::SignificantSet;
use crate::timeseries::Metadata;

/// Label used when no category reaches half of a subsector.
pub const NULL_LABEL: &str = "Null";
/// Label used when no metadata is available at all.
pub const UNLABELED: &str = "Unlabeled";

/// Default thresholds for stock panels and for index panels.
pub const STOCK_THRESHOLDS: [f64; 2] = [0.08, 0.10];
pub const INDEX_THRESHOLDS: [f64; 1] = [0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Positive => Side::Negative,
            Side::Negative => Side::Positive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Positive => "positive",
            Side::Negative => "negative",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Assets of one eigenmode with u_i ≥ u_c (positive side) or u_i ≤ −u_c
/// (negative side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsectorPartition {
    pub mode_index: usize,
    pub threshold: f64,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    /// Eigenvector components of `positive`, same order.
    pub positive_weights: Vec<f64>,
    /// Eigenvector components of `negative`, same order (all ≤ 0).
    pub negative_weights: Vec<f64>,
    /// Set when u_c ≤ 1/√N, i.e. inside the typical size of a random component.
    pub below_noise_floor: bool,
}

impl SubsectorPartition {
    /// Thresholds a component vector. With `u_c = 0` exact zeros go to the
    /// positive side so the two sides stay disjoint.
    pub fn from_components(mode_index: usize, components: &[f64], u_c: f64) -> Result<Self> {
        if !(u_c.is_finite() && u_c >= 0.0) {
            return Err(Error::Argument(format!(
                "threshold u_c must be finite and >= 0, got {u_c}"
            )));
        }
        let n = components.len();
        let floor = 1.0 / (n as f64).sqrt();
        let below_noise_floor = u_c <= floor;
        if below_noise_floor && u_c > 0.0 {
            log::warn!("mode {mode_index}: u_c = {u_c} is not above 1/sqrt(N) = {floor:.4}");
        }
        let mut part = SubsectorPartition {
            mode_index,
            threshold: u_c,
            positive: Vec::new(),
            negative: Vec::new(),
            positive_weights: Vec::new(),
            negative_weights: Vec::new(),
            below_noise_floor,
        };
        for (i, &u) in components.iter().enumerate() {
            if u >= u_c {
                part.positive.push(i);
                part.positive_weights.push(u);
            } else if u <= -u_c && u < 0.0 {
                part.negative.push(i);
                part.negative_weights.push(u);
            }
        }
        Ok(part)
    }

    pub fn members(&self, side: Side) -> &[usize] {
        match side {
            Side::Positive => &self.positive,
            Side::Negative => &self.negative,
        }
    }

    pub fn weights(&self, side: Side) -> &[f64] {
        match side {
            Side::Positive => &self.positive_weights,
            Side::Negative => &self.negative_weights,
        }
    }

    pub fn size(&self, side: Side) -> usize {
        self.members(side).len()
    }

    pub fn both_sides_nonempty(&self) -> bool {
        !self.positive.is_empty() && !self.negative.is_empty()
    }

    /// The partition of the negated eigenvector.
    pub fn flipped(&self) -> Self {
        SubsectorPartition {
            mode_index: self.mode_index,
            threshold: self.threshold,
            positive: self.negative.clone(),
            negative: self.positive.clone(),
            positive_weights: self.negative_weights.iter().map(|w| -w).collect(),
            negative_weights: self.positive_weights.iter().map(|w| -w).collect(),
            below_noise_floor: self.below_noise_floor,
        }
    }
}

/// Splits eigenvector `alpha` at ±`u_c`.
pub fn select_components(
    spec: &EigenSpectrum,
    alpha: usize,
    u_c: f64,
) -> Result<SubsectorPartition> {
    let u = spec.eigenvector(alpha)?;
    SubsectorPartition::from_components(alpha, &u, u_c)
}

/// Dominant category of one subsector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelReport {
    pub mode_index: usize,
    pub side: Side,
    pub members: Vec<String>,
    pub dominant_category: String,
    pub matched: usize,
    pub total: usize,
}

impl LabelReport {
    /// "matched/total", as printed in subsector tables.
    pub fn fraction(&self) -> String {
        format!("{}/{}", self.matched, self.total)
    }
}

/// Labels one side of a partition with its modal category.
///
/// Members missing from `metadata` count toward the total only. The label is
/// [`NULL_LABEL`] when the modal category covers less than half of the
/// members, and [`UNLABELED`] when no metadata is supplied. Ties between
/// categories go to the lexicographically smallest name.
pub fn label_subsector(
    part: &SubsectorPartition,
    side: Side,
    assets: &[String],
    metadata: Option<&Metadata>,
) -> Result<LabelReport> {
    let idx = part.members(side);
    let members = idx
        .iter()
        .map(|&i| {
            assets.get(i).cloned().ok_or(Error::Index {
                index: i,
                len: assets.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = members.len();
    let Some(metadata) = metadata else {
        return Ok(LabelReport {
            mode_index: part.mode_index,
            side,
            members,
            dominant_category: UNLABELED.into(),
            matched: 0,
            total,
        });
    };
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &members {
        if let Some(cat) = metadata.get(m) {
            *counts.entry(cat.as_str()).or_default() += 1;
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (cat, &k) in &counts {
        if best.is_none_or(|(_, b)| k > b) {
            best = Some((cat, k));
        }
    }
    let (category, matched) = best.unwrap_or((NULL_LABEL, 0));
    let dominant_category = if total == 0 || 2 * matched < total {
        NULL_LABEL.to_string()
    } else {
        category.to_string()
    };
    Ok(LabelReport {
        mode_index: part.mode_index,
        side,
        members,
        dominant_category,
        matched,
        total,
    })
}

/// One (mode, threshold, side) line of a subsector table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub eigenvalue: f64,
    pub threshold: f64,
    /// Asset whose component is positive by the sign convention.
    pub anchor_asset: String,
    #[serde(flatten)]
    pub label: LabelReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorTable {
    pub sign_convention: String,
    pub thresholds: Vec<f64>,
    /// Set when mode 0 was dropped because all its components share a sign.
    pub market_mode_excluded: bool,
    pub rows: Vec<SectorRow>,
}

fn anchor_asset(u: &[f64], assets: &[String]) -> String {
    let mut best = 0;
    for (i, x) in u.iter().enumerate() {
        if x.abs() > u[best].abs() {
            best = i;
        }
    }
    assets.get(best).cloned().unwrap_or_default()
}

pub const SIGN_CONVENTION: &str =
    "each eigenvector is oriented so that its largest-magnitude component is positive";

/// Labels every significant mode at every threshold, both sides.
pub fn sector_table(
    spec: &EigenSpectrum,
    significant: &SignificantSet,
    thresholds: &[f64],
    metadata: Option<&Metadata>,
) -> Result<SectorTable> {
    if let Some(t) = thresholds.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::Argument(format!(
            "thresholds must be positive, got {t}"
        )));
    }
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut rows = Vec::new();
    let mut market_mode_excluded = false;
    for &alpha in &significant.indices {
        let u = spec.eigenvector(alpha)?;
        if alpha == 0 && (u.iter().all(|&x| x >= 0.0) || u.iter().all(|&x| x <= 0.0)) {
            market_mode_excluded = true;
            continue;
        }
        let anchor = anchor_asset(&u, spec.assets());
        for &u_c in &thresholds {
            let part = SubsectorPartition::from_components(alpha, &u, u_c)?;
            for side in [Side::Positive, Side::Negative] {
                rows.push(SectorRow {
                    eigenvalue: spec.eigenvalues()[alpha],
                    threshold: u_c,
                    anchor_asset: anchor.clone(),
                    label: label_subsector(&part, side, spec.assets(), metadata)?,
                });
            }
        }
    }
    Ok(SectorTable {
        sign_convention: SIGN_CONVENTION.into(),
        thresholds,
        market_mode_excluded,
        rows,
    })
}

/// Delimited form of a sector table, one row per (mode, threshold, side).
pub fn write_sector_table<W: Write>(table: &SectorTable, sink: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    w.write_record([
        "mode",
        "eigenvalue",
        "threshold",
        "side",
        "category",
        "fraction",
        "matched",
        "total",
        "anchor_asset",
        "members",
    ])?;
    for r in &table.rows {
        w.write_record([
            r.label.mode_index.to_string(),
            r.eigenvalue.to_string(),
            r.threshold.to_string(),
            r.label.side.to_string(),
            r.label.dominant_category.clone(),
            r.label.fraction(),
            r.label.matched.to_string(),
            r.label.total.to_string(),
            r.anchor_asset.clone(),
            r.label.members.join(" "),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
