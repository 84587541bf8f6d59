use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use eigensector::anticorr::{
    anticorr_report, write_blocks, write_scan, AnticorrReport, ScanConfig,
};
use eigensector::corrmatrix::{mean_offdiagonal, save_correlation};
use eigensector::rmt::{fraction_outside, significant_eigenvalues, SignificantSet, WishartLaw};
use eigensector::sectors::{sector_table, write_sector_table, SectorTable, STOCK_THRESHOLDS};
use eigensector::synth::{default_start_date, generate, GroundTruth, MarketSpec};
use eigensector::timeseries::{write_metadata, write_wide};
use eigensector::{Error, Result};
use serde::Serialize;

use crate::args::{AnalyzeArgs, AnticorrArgs, SectorsArgs, SynthArgs};
use crate::pipeline::{delimiter, prepare, DataSummary, Prepared};

/// Every JSON report carries the tool version, the command and its full
/// configuration.
#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
    result: R,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

fn write_json<C: Serialize, R: Serialize>(
    path: &Path,
    command: &'static str,
    config: &C,
    result: R,
) -> Result<()> {
    let envelope = Envelope {
        tool: "eigensector",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        result,
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &envelope)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    data: &'a DataSummary,
    aspect_ratio: f64,
    law: WishartLaw,
    mean_offdiagonal: f64,
    fraction_outside_bounds: f64,
    significant: &'a SignificantSet,
    eigenvalues: &'a [f64],
}

fn spectrum_report<'a>(p: &'a Prepared, significant: &'a SignificantSet) -> SpectrumReport<'a> {
    SpectrumReport {
        data: &p.summary,
        aspect_ratio: p.spectrum.aspect_ratio(),
        law: significant.law,
        mean_offdiagonal: mean_offdiagonal(&p.correlation),
        fraction_outside_bounds: fraction_outside(p.spectrum.eigenvalues(), &significant.law),
        significant,
        eigenvalues: p.spectrum.eigenvalues(),
    }
}

fn print_summary(r: &SpectrumReport<'_>) {
    println!(
        "N = {}  T = {}  Q = {:.4}",
        r.data.n_assets, r.data.n_observations, r.aspect_ratio
    );
    println!(
        "lambda_min = {:.4}  lambda_max = {:.4}  mean C_ij = {:.4}",
        r.law.lambda_min, r.law.lambda_max, r.mean_offdiagonal
    );
    println!(
        "significant modes: {}  largest eigenvalue: {:.4}",
        r.significant.len(),
        r.eigenvalues.first().copied().unwrap_or(f64::NAN)
    );
    for a in r
        .data
        .dropped_incomplete
        .iter()
        .chain(&r.data.dropped_zero_variance)
    {
        println!("dropped: {a}");
    }
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let p = prepare(&args.input)?;
    let significant = significant_eigenvalues(&p.spectrum, args.margin)?;
    let report = spectrum_report(&p, &significant);
    out_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    save_correlation(
        &p.correlation,
        dir.join("correlation.csv"),
        dir.join("correlation.json"),
    )?;
    with_file(&dir.join("eigenvalues.csv"), |w| {
        let lines = (|| -> std::io::Result<()> {
            writeln!(w, "mode,eigenvalue,ratio_to_lambda_max,significant")?;
            for (alpha, l) in p.spectrum.eigenvalues().iter().enumerate() {
                writeln!(
                    w,
                    "{alpha},{l},{},{}",
                    l / significant.law.lambda_max,
                    significant.indices.contains(&alpha)
                )?;
            }
            w.flush()
        })();
        lines.map_err(|source| Error::Io {
            path: dir.join("eigenvalues.csv").display().to_string(),
            source,
        })
    })?;
    write_json(&dir.join("spectrum.json"), "analyze", args, &report)?;
    print_summary(&report);
    Ok(())
}

#[derive(Serialize)]
struct SectorsReport<'a> {
    data: &'a DataSummary,
    significant: &'a SignificantSet,
    labeled: bool,
    table: &'a SectorTable,
}

pub fn sectors(args: &SectorsArgs) -> Result<()> {
    let p = prepare(&args.input)?;
    let significant = significant_eigenvalues(&p.spectrum, args.margin)?;
    let thresholds = if args.u_c.is_empty() {
        STOCK_THRESHOLDS.to_vec()
    } else {
        args.u_c.clone()
    };
    if p.metadata.is_none() {
        log::warn!("no metadata supplied; subsectors are reported as Unlabeled");
    }
    let table = sector_table(&p.spectrum, &significant, &thresholds, p.metadata.as_ref())?;
    out_dir(&args.out_dir)?;
    let delim = delimiter(args.input.delimiter)?;
    with_file(&args.out_dir.join("sectors.csv"), |w| {
        write_sector_table(&table, w, delim)
    })?;
    write_json(
        &args.out_dir.join("sectors.json"),
        "sectors",
        args,
        SectorsReport {
            data: &p.summary,
            significant: &significant,
            labeled: p.metadata.is_some(),
            table: &table,
        },
    )?;
    println!(
        "{} significant modes, {} table rows{}",
        significant.len(),
        table.rows.len(),
        if table.market_mode_excluded {
            " (market mode excluded)"
        } else {
            ""
        }
    );
    for r in &table.rows {
        println!(
            "mode {:>3}  u_c {:.3}  {:<8} {:<16} {}",
            r.label.mode_index,
            r.threshold,
            r.label.side,
            r.label.dominant_category,
            r.label.fraction()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct AnticorrEnvelope<'a> {
    data: &'a DataSummary,
    report: &'a AnticorrReport,
}

pub fn anticorr(args: &AnticorrArgs) -> Result<()> {
    if args.trials < 100 {
        log::warn!(
            "{} baseline trials; at least 100 are recommended",
            args.trials
        );
    }
    let p = prepare(&args.input)?;
    let config = ScanConfig {
        u_c: args.u_c,
        trials: args.trials,
        seed: args.seed,
        include_market_mode: args.include_market_mode,
    };
    let report = anticorr_report(&p.returns, &p.correlation, &p.spectrum, &config)?;
    out_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    let delim = delimiter(args.input.delimiter)?;
    with_file(&dir.join("mode_scan.csv"), |w| {
        write_scan(&report.thresholded, w, delim)
    })?;
    with_file(&dir.join("mode_scan_full.csv"), |w| {
        write_scan(&report.full_weight, w, delim)
    })?;
    with_file(&dir.join("block_averages.csv"), |w| {
        write_blocks(&report.blocks, w, delim)
    })?;
    write_json(
        &dir.join("anticorr.json"),
        "anticorr",
        args,
        AnticorrEnvelope {
            data: &p.summary,
            report: &report,
        },
    )?;
    println!(
        "scanned {} modes at u_c = {} ({} skipped), {} at u_c = 0",
        report.thresholded.rows.len(),
        args.u_c,
        report.thresholded.skipped.len(),
        report.full_weight.rows.len()
    );
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "trend (rank correlation of C+- with mode index): thresholded {}, full weight {}",
        fmt(report.thresholded_trend),
        fmt(report.full_weight_trend)
    );
    Ok(())
}

#[derive(Serialize)]
struct SynthReport<'a> {
    spec: &'a MarketSpec,
    truth: &'a GroundTruth,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    if !args.spec.exists() {
        return Err(Error::Config(format!(
            "spec {} does not exist",
            args.spec.display()
        )));
    }
    let mut spec = MarketSpec::from_path(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let market = generate(&spec)?;
    let panel = market.to_price_panel(default_start_date())?;
    out_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    with_file(&dir.join("panel.csv"), |w| write_wide(&panel, w, b','))?;
    with_file(&dir.join("metadata.csv"), |w| {
        write_metadata(&market.truth.categories, w, b',')
    })?;
    write_json(
        &dir.join("ground_truth.json"),
        "synth",
        args,
        SynthReport {
            spec: &spec,
            truth: &market.truth,
        },
    )?;
    println!(
        "wrote {} assets x {} dates to {}",
        panel.n_assets(),
        panel.n_dates(),
        dir.join("panel.csv").display()
    );
    Ok(())
}
