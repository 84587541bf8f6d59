//! Shared front half of every analysis command: load, align, repair,
//! normalize, correlate, decompose.

use eigensector::corrmatrix::{
    correlation_matrix, eigendecompose, CorrelationMatrix, EigenSpectrum,
};
use eigensector::timeseries::{
    align_calendar, apply_range_policy, forward_fill, load_metadata_path, load_prices_path,
    log_returns, normalize_returns, Metadata, NormalizedReturns, PricePanel, PriceSchema,
    RangePolicy, ShiftRule,
};
use eigensector::{Error, Result};
use serde::Serialize;

use crate::args::{Format, InputArgs, RangePolicyArg};

pub fn delimiter(c: char) -> Result<u8> {
    if c.is_ascii() && c != '\n' && c != '"' {
        Ok(c as u8)
    } else {
        Err(Error::Config(format!(
            "delimiter {c:?} must be a single ASCII character"
        )))
    }
}

/// What happened to the raw panel on its way to the return matrix.
#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    pub assets_loaded: usize,
    pub dates_loaded: usize,
    pub missing_cells: usize,
    pub dates_used: usize,
    pub first_date: String,
    pub last_date: String,
    pub n_assets: usize,
    pub n_observations: usize,
    pub dropped_incomplete: Vec<String>,
    pub dropped_zero_variance: Vec<String>,
}

pub struct Prepared {
    pub returns: NormalizedReturns,
    pub correlation: CorrelationMatrix,
    pub spectrum: EigenSpectrum,
    pub metadata: Option<Metadata>,
    pub summary: DataSummary,
}

fn load_panel(args: &InputArgs, delim: u8) -> Result<PricePanel> {
    let schema = match args.format {
        Format::Long => PriceSchema::long(),
        Format::Wide => PriceSchema::wide(),
    }
    .with_delimiter(delim);
    for path in &args.inputs {
        if !path.exists() {
            return Err(Error::Config(format!(
                "input {} does not exist",
                path.display()
            )));
        }
    }
    let panels = args
        .inputs
        .iter()
        .map(|p| load_prices_path(p, &schema))
        .collect::<Result<Vec<_>>>()?;
    if panels.len() == 1 {
        Ok(panels.into_iter().next().expect("one panel"))
    } else {
        PricePanel::merge(panels)
    }
}

pub fn prepare(args: &InputArgs) -> Result<Prepared> {
    let delim = delimiter(args.delimiter)?;
    let raw = load_panel(args, delim)?;
    log::info!(
        "loaded {} assets over {} dates",
        raw.n_assets(),
        raw.n_dates()
    );

    let rules = args
        .shift_rules
        .iter()
        .map(|r| r.parse::<ShiftRule>())
        .collect::<Result<Vec<_>>>()?;
    let aligned = align_calendar(&raw, &rules)?;
    let filled = forward_fill(&aligned)?;
    let policy = match args.range_policy {
        RangePolicyArg::Intersect => RangePolicy::Intersect,
        RangePolicyArg::DropIncomplete => RangePolicy::DropIncomplete,
    };
    let (panel, dropped_incomplete) = apply_range_policy(&filled, policy)?;

    let rm = log_returns(&panel, args.delta_t)?;
    let (rm, dropped_zero_variance) = if args.drop_zero_variance {
        rm.drop_zero_variance()?
    } else {
        (rm, Vec::new())
    };
    for a in &dropped_zero_variance {
        log::warn!("dropped zero-variance asset {a}");
    }
    let returns = normalize_returns(&rm)?;
    let correlation = correlation_matrix(&returns)?;
    let spectrum = eigendecompose(&correlation)?;

    let metadata = match &args.metadata {
        Some(path) => {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "metadata {} does not exist",
                    path.display()
                )));
            }
            Some(load_metadata_path(path, delim)?)
        }
        None if !panel.metadata().is_empty() => Some(panel.metadata().clone()),
        None => None,
    };

    let summary = DataSummary {
        assets_loaded: raw.n_assets(),
        dates_loaded: raw.n_dates(),
        missing_cells: raw.missing_count(),
        dates_used: panel.n_dates(),
        first_date: panel.dates()[0].to_string(),
        last_date: panel.dates()[panel.n_dates() - 1].to_string(),
        n_assets: returns.n_assets(),
        n_observations: returns.n_observations(),
        dropped_incomplete,
        dropped_zero_variance,
    };
    Ok(Prepared {
        returns,
        correlation,
        spectrum,
        metadata,
        summary,
    })
}
