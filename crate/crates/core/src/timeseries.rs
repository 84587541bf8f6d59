//! Price ingestion, calendar alignment, gap repair and return normalization.
//!
//! The flow is `load_prices` → `align_calendar` → `forward_fill` →
//! `apply_range_policy` → `log_returns` → `normalize_returns`. Every step is a
//! pure function that returns a new value.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";
const MISSING_TOKENS: [&str; 6] = ["", "NA", "N/A", "NaN", "nan", "null"];

/// Asset → category label.
pub type Metadata = BTreeMap<String, String>;

/// Aligned date × asset grid of prices. Cells may be missing until repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    /// `prices[asset][date]`
    prices: Vec<Vec<Option<f64>>>,
    metadata: Metadata,
}

impl PricePanel {
    /// Builds a panel, checking the grid shape, date order and price positivity.
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        prices: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if assets.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "panel needs at least 2 assets, got {}",
                assets.len()
            )));
        }
        if dates.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "panel needs at least 3 dates, got {}",
                dates.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let mut seen = BTreeSet::new();
        for a in &assets {
            if !seen.insert(a.as_str()) {
                return Err(Error::Validation(format!("duplicate asset {a}")));
            }
        }
        if prices.len() != assets.len() {
            return Err(Error::Validation(format!(
                "price grid has {} rows for {} assets",
                prices.len(),
                assets.len()
            )));
        }
        for (asset, row) in assets.iter().zip(&prices) {
            if row.len() != dates.len() {
                return Err(Error::Validation(format!(
                    "asset {asset} has {} cells for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            for (date, p) in dates.iter().zip(row) {
                if let Some(p) = p {
                    check_price(asset, date, *p)?;
                }
            }
        }
        Ok(Self {
            dates,
            assets,
            prices,
            metadata: Metadata::new(),
        })
    }

    pub fn with_metadata(mut self, metadata: Metadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Price cells of one asset, in date order.
    pub fn row(&self, asset: usize) -> &[Option<f64>] {
        &self.prices[asset]
    }

    pub fn get(&self, asset: usize, date: usize) -> Option<f64> {
        self.prices[asset][date]
    }

    pub fn asset_index(&self, name: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == name)
    }

    pub fn is_complete(&self) -> bool {
        self.prices.iter().all(|r| r.iter().all(Option::is_some))
    }

    pub fn missing_count(&self) -> usize {
        self.prices
            .iter()
            .map(|r| r.iter().filter(|p| p.is_none()).count())
            .sum()
    }

    /// Index of the first observed date of each asset (`None` if never observed).
    pub fn first_valid_indices(&self) -> Vec<Option<usize>> {
        self.prices
            .iter()
            .map(|r| r.iter().position(Option::is_some))
            .collect()
    }

    /// First observed date of each asset.
    pub fn first_valid_dates(&self) -> Vec<Option<NaiveDate>> {
        self.first_valid_indices()
            .into_iter()
            .map(|i| i.map(|i| self.dates[i]))
            .collect()
    }

    /// Combines panels with disjoint asset sets onto the union of their dates.
    pub fn merge(panels: Vec<PricePanel>) -> Result<PricePanel> {
        let mut cells: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
        let mut order = Vec::new();
        let mut metadata = Metadata::new();
        for panel in panels {
            for (i, asset) in panel.assets.iter().enumerate() {
                if cells.contains_key(asset) {
                    return Err(Error::Config(format!(
                        "asset {asset} appears in more than one input"
                    )));
                }
                let obs = panel
                    .dates
                    .iter()
                    .zip(&panel.prices[i])
                    .filter_map(|(d, p)| p.map(|p| (*d, p)))
                    .collect();
                cells.insert(asset.clone(), obs);
                order.push(asset.clone());
            }
            metadata.extend(panel.metadata);
        }
        let (dates, prices) = grid_from_cells(&order, &cells);
        Ok(PricePanel::new(dates, order, prices)?.with_metadata(metadata))
    }

    /// Keeps only the listed asset indices, in the given order.
    pub fn select_assets(&self, keep: &[usize]) -> Result<PricePanel> {
        let assets = keep.iter().map(|&i| self.assets[i].clone()).collect();
        let prices = keep.iter().map(|&i| self.prices[i].clone()).collect();
        Ok(PricePanel::new(self.dates.clone(), assets, prices)?
            .with_metadata(self.metadata.clone()))
    }

    /// Keeps the date range `start..` for every asset.
    pub fn trim_dates(&self, start: usize) -> Result<PricePanel> {
        let dates = self.dates[start..].to_vec();
        let prices = self.prices.iter().map(|r| r[start..].to_vec()).collect();
        Ok(PricePanel::new(dates, self.assets.clone(), prices)?
            .with_metadata(self.metadata.clone()))
    }
}

fn check_price(asset: &str, date: &NaiveDate, p: f64) -> Result<()> {
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::InvalidPrice {
            asset: asset.to_string(),
            date: date.to_string(),
            message: format!("price must be finite and positive, got {p}"),
        });
    }
    Ok(())
}

fn grid_from_cells(
    order: &[String],
    cells: &BTreeMap<String, BTreeMap<NaiveDate, f64>>,
) -> (Vec<NaiveDate>, Vec<Vec<Option<f64>>>) {
    let dates: Vec<NaiveDate> = cells
        .values()
        .flat_map(|m| m.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let prices = order
        .iter()
        .map(|a| {
            let obs = &cells[a];
            dates.iter().map(|d| obs.get(d).copied()).collect()
        })
        .collect();
    (dates, prices)
}

/// Layout of a price file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceFormat {
    /// One `(date, asset, price)` observation per row.
    Long,
    /// A date column followed by one column per asset.
    Wide,
}

/// Column mapping for `load_prices`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceSchema {
    pub format: PriceFormat,
    pub delimiter: u8,
    pub date_column: String,
    /// Long format only.
    pub asset_column: String,
    /// Long format only.
    pub price_column: String,
}

impl PriceSchema {
    pub fn long() -> Self {
        Self {
            format: PriceFormat::Long,
            delimiter: b',',
            date_column: "date".into(),
            asset_column: "asset".into(),
            price_column: "price".into(),
        }
    }

    pub fn wide() -> Self {
        Self {
            format: PriceFormat::Wide,
            ..Self::long()
        }
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }
}

impl Default for PriceSchema {
    fn default() -> Self {
        Self::long()
    }
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).map_err(|e| Error::Parse {
        line,
        message: format!("bad date {s:?}: {e}"),
    })
}

fn parse_cell(s: &str, line: u64) -> Result<Option<f64>> {
    let s = s.trim();
    if MISSING_TOKENS.contains(&s) {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| Error::Parse {
        line,
        message: format!("bad price {s:?}: {e}"),
    })
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })
}

/// Reads a delimited price file into a panel on the union of its dates and
/// assets. Absent cells are marked missing.
pub fn load_prices<R: Read>(source: R, schema: &PriceSchema) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let date_col = column(&headers, &schema.date_column)?;

    let mut cells: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();

    match schema.format {
        PriceFormat::Long => {
            let asset_col = column(&headers, &schema.asset_column)?;
            let price_col = column(&headers, &schema.price_column)?;
            for record in reader.records() {
                let record = record?;
                let line = record.position().map_or(0, |p| p.line());
                let field = |i: usize| {
                    record.get(i).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("row has {} fields", record.len()),
                    })
                };
                let date = parse_date(field(date_col)?, line)?;
                let asset = field(asset_col)?.to_string();
                if asset.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "empty asset identifier".into(),
                    });
                }
                let Some(price) = parse_cell(field(price_col)?, line)? else {
                    continue;
                };
                check_price(&asset, &date, price)?;
                let obs = cells.entry(asset.clone()).or_insert_with(|| {
                    order.push(asset.clone());
                    BTreeMap::new()
                });
                if obs.insert(date, price).is_some() {
                    return Err(Error::Parse {
                        line,
                        message: format!("duplicate observation for {asset} on {date}"),
                    });
                }
            }
        }
        PriceFormat::Wide => {
            let asset_cols: Vec<(usize, String)> = headers
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != date_col)
                .map(|(i, h)| (i, h.trim().to_string()))
                .collect();
            for (_, a) in &asset_cols {
                if cells.insert(a.clone(), BTreeMap::new()).is_some() {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("duplicate asset column {a:?}"),
                    });
                }
                order.push(a.clone());
            }
            let mut seen_dates = BTreeSet::new();
            for record in reader.records() {
                let record = record?;
                let line = record.position().map_or(0, |p| p.line());
                if record.len() != headers.len() {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "row has {} fields, header has {}",
                            record.len(),
                            headers.len()
                        ),
                    });
                }
                let date = parse_date(&record[date_col], line)?;
                if !seen_dates.insert(date) {
                    return Err(Error::Parse {
                        line,
                        message: format!("duplicate date {date}"),
                    });
                }
                for (i, asset) in &asset_cols {
                    if let Some(price) = parse_cell(&record[*i], line)? {
                        check_price(asset, &date, price)?;
                        cells.get_mut(asset).map(|m| m.insert(date, price));
                    }
                }
            }
        }
    }

    let (dates, prices) = grid_from_cells(&order, &cells);
    PricePanel::new(dates, order, prices)
}

pub fn load_prices_path(path: impl AsRef<Path>, schema: &PriceSchema) -> Result<PricePanel> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    load_prices(std::io::BufReader::new(file), schema)
}

/// Reads `(asset, category)` rows. A leading `asset,category` header is skipped.
pub fn load_metadata<R: Read>(source: R, delimiter: u8) -> Result<Metadata> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut out = Metadata::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("metadata row needs 2 fields, got {}", record.len()),
            });
        }
        if k == 0
            && record[0].eq_ignore_ascii_case("asset")
            && record[1].eq_ignore_ascii_case("category")
        {
            continue;
        }
        out.insert(record[0].to_string(), record[1].to_string());
    }
    Ok(out)
}

pub fn load_metadata_path(path: impl AsRef<Path>, delimiter: u8) -> Result<Metadata> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    load_metadata(std::io::BufReader::new(file), delimiter)
}

/// Writes `asset,category` rows under a header, readable by [`load_metadata`].
pub fn write_metadata<W: Write>(metadata: &Metadata, sink: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    w.write_record(["asset", "category"])?;
    for (asset, category) in metadata {
        w.write_record([asset, category])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Writes the panel in wide format. Missing cells are left empty.
pub fn write_wide<W: Write>(panel: &PricePanel, sink: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    let mut header = vec!["date".to_string()];
    header.extend(panel.assets.iter().cloned());
    w.write_record(&header)?;
    for (d, date) in panel.dates.iter().enumerate() {
        let mut row = vec![date.format(DATE_FORMAT).to_string()];
        row.extend(
            panel
                .prices
                .iter()
                .map(|r| r[d].map(|p| p.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Moves observations made on `from` to the nearest preceding `to` for the
/// listed assets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftRule {
    pub assets: Vec<String>,
    pub from: Weekday,
    pub to: Weekday,
}

impl ShiftRule {
    pub fn new(
        assets: impl IntoIterator<Item = impl Into<String>>,
        from: Weekday,
        to: Weekday,
    ) -> Self {
        Self {
            assets: assets.into_iter().map(Into::into).collect(),
            from,
            to,
        }
    }

    fn days_back(&self) -> i64 {
        let d = (self.from.num_days_from_monday() as i64 - self.to.num_days_from_monday() as i64)
            .rem_euclid(7);
        if d == 0 {
            7
        } else {
            d
        }
    }
}

/// Parses `ASSET[,ASSET...]:FROM:TO`, e.g. `TLV1,TLV2:sun:fri`.
impl std::str::FromStr for ShiftRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("shift rule {s:?} is not ASSETS:FROM:TO"));
        let mut parts = s.rsplitn(3, ':');
        let (to, from, assets) = (
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
        );
        let day = |d: &str| {
            d.trim()
                .parse::<Weekday>()
                .map_err(|_| Error::Config(format!("unknown weekday {d:?} in shift rule")))
        };
        let names: Vec<&str> = assets
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .collect();
        if names.is_empty() {
            return Err(bad());
        }
        Ok(ShiftRule::new(names, day(from)?, day(to)?))
    }
}

/// Reassigns weekday observations according to `rules`.
///
/// If the target day already holds an observation, the target value is kept
/// and the shifted one discarded. When two shifted observations land on the
/// same day the one from the earlier rule wins. The date axis becomes the
/// union of dates that still carry an observation.
pub fn align_calendar(panel: &PricePanel, rules: &[ShiftRule]) -> Result<PricePanel> {
    if rules.is_empty() {
        return Ok(panel.clone());
    }
    let mut per_asset: HashMap<usize, Vec<&ShiftRule>> = HashMap::new();
    for rule in rules {
        if rule.from == rule.to {
            return Err(Error::Config(format!(
                "shift rule maps {} onto itself",
                rule.from
            )));
        }
        for name in &rule.assets {
            let i = panel.asset_index(name).ok_or_else(|| {
                Error::Config(format!("shift rule references unknown asset {name}"))
            })?;
            let list = per_asset.entry(i).or_default();
            if list.iter().any(|r| r.from == rule.from) {
                return Err(Error::Config(format!(
                    "asset {name} has two shift rules for {}",
                    rule.from
                )));
            }
            list.push(rule);
        }
    }

    let mut cells: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for (i, asset) in panel.assets.iter().enumerate() {
        let observed = panel
            .dates
            .iter()
            .zip(&panel.prices[i])
            .filter_map(|(d, p)| p.map(|p| (*d, p)));
        let obs = match per_asset.get(&i) {
            None => observed.collect(),
            Some(asset_rules) => {
                let is_source = |d: &NaiveDate| asset_rules.iter().any(|r| r.from == d.weekday());
                let mut kept: BTreeMap<NaiveDate, f64> =
                    observed.clone().filter(|(d, _)| !is_source(d)).collect();
                for rule in asset_rules {
                    for (d, p) in observed.clone().filter(|(d, _)| d.weekday() == rule.from) {
                        let target = d - Duration::days(rule.days_back());
                        kept.entry(target).or_insert(p);
                    }
                }
                kept
            }
        };
        cells.insert(asset.clone(), obs);
    }
    let (dates, prices) = grid_from_cells(&panel.assets, &cells);
    Ok(PricePanel::new(dates, panel.assets.clone(), prices)?.with_metadata(panel.metadata.clone()))
}

/// Fills each missing cell with the most recent prior observation of the same
/// asset. Cells before an asset's first observation stay missing; see
/// [`apply_range_policy`].
pub fn forward_fill(panel: &PricePanel) -> Result<PricePanel> {
    let mut out = panel.clone();
    for (asset, row) in out.assets.iter().zip(out.prices.iter_mut()) {
        if row.iter().all(Option::is_none) {
            return Err(Error::Validation(format!(
                "asset {asset} has no observed prices"
            )));
        }
        let mut last = None;
        for cell in row.iter_mut() {
            match cell {
                Some(p) => last = Some(*p),
                None => *cell = last,
            }
        }
    }
    Ok(out)
}

/// How to reconcile assets whose first observation comes after the panel start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangePolicy {
    /// Truncate every asset to the common date range.
    #[default]
    Intersect,
    /// Drop assets that do not cover the full date range.
    DropIncomplete,
}

/// Applies `policy` to a forward-filled panel. Returns the complete panel and
/// the names of any dropped assets.
pub fn apply_range_policy(
    panel: &PricePanel,
    policy: RangePolicy,
) -> Result<(PricePanel, Vec<String>)> {
    let first = panel.first_valid_indices();
    if let Some(i) = first.iter().position(Option::is_none) {
        return Err(Error::Validation(format!(
            "asset {} has no observed prices",
            panel.assets[i]
        )));
    }
    let first: Vec<usize> = first.into_iter().flatten().collect();
    let out = match policy {
        RangePolicy::Intersect => {
            let start = first.iter().copied().max().unwrap_or(0);
            (panel.trim_dates(start)?, Vec::new())
        }
        RangePolicy::DropIncomplete => {
            let keep: Vec<usize> = (0..first.len()).filter(|&i| first[i] == 0).collect();
            let dropped = (0..first.len())
                .filter(|&i| first[i] != 0)
                .map(|i| panel.assets[i].clone())
                .collect();
            (panel.select_assets(&keep)?, dropped)
        }
    };
    if !out.0.is_complete() {
        return Err(Error::Validation(
            "panel still has gaps after range policy; forward-fill first".into(),
        ));
    }
    Ok(out)
}

/// N × T log returns, one row per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    assets: Vec<String>,
    returns: DMatrix<f64>,
    delta_t: usize,
}

impl ReturnMatrix {
    pub fn new(assets: Vec<String>, returns: DMatrix<f64>, delta_t: usize) -> Result<Self> {
        if assets.len() != returns.nrows() {
            return Err(Error::Validation(format!(
                "{} asset names for {} return rows",
                assets.len(),
                returns.nrows()
            )));
        }
        if let Some(i) =
            (0..returns.nrows()).find(|&i| returns.row(i).iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Validation(format!(
                "asset {} has non-finite returns",
                assets[i]
            )));
        }
        Ok(Self {
            assets,
            returns,
            delta_t,
        })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn delta_t(&self) -> usize {
        self.delta_t
    }

    pub fn n_assets(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_observations(&self) -> usize {
        self.returns.ncols()
    }

    /// Splits off rows with zero variance. Returns the remaining matrix and the
    /// dropped asset names.
    pub fn drop_zero_variance(&self) -> Result<(ReturnMatrix, Vec<String>)> {
        let (keep, drop): (Vec<usize>, Vec<usize>) = (0..self.n_assets())
            .partition(|&i| row_moments(self.returns.row(i).iter().copied()).is_some());
        let returns = self.returns.select_rows(keep.iter());
        let assets = keep.iter().map(|&i| self.assets[i].clone()).collect();
        let dropped = drop.iter().map(|&i| self.assets[i].clone()).collect();
        Ok((ReturnMatrix::new(assets, returns, self.delta_t)?, dropped))
    }
}

/// ln P(t + Δt) − ln P(t) for every asset of a complete panel.
pub fn log_returns(panel: &PricePanel, delta_t: usize) -> Result<ReturnMatrix> {
    if delta_t == 0 {
        return Err(Error::Argument(
            "delta_t must be a positive step count".into(),
        ));
    }
    let d = panel.n_dates();
    if delta_t >= d {
        return Err(Error::InsufficientData(format!(
            "delta_t = {delta_t} leaves no returns from {d} dates"
        )));
    }
    if !panel.is_complete() {
        return Err(Error::Validation(
            "panel has missing prices; repair it before computing returns".into(),
        ));
    }
    let t = d - delta_t;
    let logs: Vec<Vec<f64>> = panel
        .prices
        .iter()
        .map(|r| r.iter().map(|p| p.unwrap_or(f64::NAN).ln()).collect())
        .collect();
    let returns = DMatrix::from_fn(panel.n_assets(), t, |i, k| {
        logs[i][k + delta_t] - logs[i][k]
    });
    ReturnMatrix::new(panel.assets.clone(), returns, delta_t)
}

/// Returns with each row shifted to mean 0 and scaled to unit population
/// standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedReturns {
    assets: Vec<String>,
    returns: DMatrix<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl NormalizedReturns {
    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    /// N × T normalized returns.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn n_assets(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_observations(&self) -> usize {
        self.returns.ncols()
    }
}

/// Population mean and standard deviation, or `None` when the row is flat.
fn row_moments(row: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let n = row.clone().count() as f64;
    let mean = row.clone().sum::<f64>() / n;
    let var = row.clone().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = row.fold(0.0_f64, |m, x| m.max(x.abs()));
    // rounding in the mean leaves ~eps * |x| residue on constant rows
    if std.is_nan() || std <= 16.0 * f64::EPSILON * scale {
        return None;
    }
    Some((mean, std))
}

pub fn normalize_returns(rm: &ReturnMatrix) -> Result<NormalizedReturns> {
    let n = rm.n_assets();
    if rm.n_observations() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 return observations, got {}",
            rm.n_observations()
        )));
    }
    let mut means = Vec::with_capacity(n);
    let mut stds = Vec::with_capacity(n);
    for i in 0..n {
        let (mean, std) =
            row_moments(rm.returns.row(i).iter().copied()).ok_or_else(|| Error::ZeroVariance {
                asset: rm.assets[i].clone(),
            })?;
        means.push(mean);
        stds.push(std);
    }
    let returns = DMatrix::from_fn(n, rm.n_observations(), |i, t| {
        (rm.returns[(i, t)] - means[i]) / stds[i]
    });
    Ok(NormalizedReturns {
        assets: rm.assets.clone(),
        returns,
        means,
        stds,
    })
}
