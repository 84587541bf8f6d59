//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p eigensector-cli --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use eigensector::anticorr::{block_averages, eigenmode_correlation, mode_scan};
use eigensector::corrmatrix::{
    correlation_matrix, eigendecompose, CorrelationMatrix, EigenSpectrum,
};
use eigensector::rmt::{
    bulk_ks_distance, fraction_outside, mp_bounds, mp_density, significant_eigenvalues, WishartLaw,
};
use eigensector::sectors::SubsectorPartition;
use eigensector::synth::{generate, MarketSpec, SyntheticMarket};
use eigensector::timeseries::{
    align_calendar, apply_range_policy, forward_fill, load_prices, normalize_returns, PricePanel,
    PriceSchema, RangePolicy, ReturnMatrix, ShiftRule,
};
use eigensector::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const SEEDS: std::ops::Range<u64> = 0..10;
const PLANTED_U_C: f64 = 0.15;
const TRIALS: usize = 1000;

fn spectrum(m: &SyntheticMarket) -> (CorrelationMatrix, EigenSpectrum) {
    let c = correlation_matrix(&m.returns).unwrap();
    let s = eigendecompose(&c).unwrap();
    (c, s)
}

/// Planted class per asset: +1, −1 or 0 (not in the block).
fn planted_classes(m: &SyntheticMarket) -> Vec<i8> {
    let block = m
        .truth
        .factors
        .iter()
        .find(|f| f.factor == 1)
        .expect("block factor");
    let mut out = vec![0i8; m.spec.n_assets];
    for &i in &block.positive {
        out[i] = 1;
    }
    for &i in &block.negative {
        out[i] = -1;
    }
    out
}

fn partition_classes(p: &SubsectorPartition, n: usize) -> Vec<i8> {
    let mut out = vec![0i8; n];
    for &i in &p.positive {
        out[i] = 1;
    }
    for &i in &p.negative {
        out[i] = -1;
    }
    out
}

/// Membership accuracy up to a global sign flip.
fn accuracy(found: &[i8], truth: &[i8]) -> f64 {
    let n = truth.len() as f64;
    let same = found.iter().zip(truth).filter(|(a, b)| a == b).count() as f64;
    let flipped = found.iter().zip(truth).filter(|(a, b)| -**a == **b).count() as f64;
    same.max(flipped) / n
}

/// The significant non-market mode whose eigenvector overlaps most with the
/// planted sign pattern.
fn planted_mode(s: &EigenSpectrum, truth: &[i8]) -> Option<usize> {
    let sig = significant_eigenvalues(s, 1.0).ok()?;
    sig.indices
        .iter()
        .copied()
        .filter(|&a| a > 0)
        .max_by(|&a, &b| {
            let overlap = |alpha: usize| {
                let u = s.eigenvector(alpha).unwrap();
                u.iter()
                    .zip(truth)
                    .map(|(x, &t)| x * f64::from(t))
                    .sum::<f64>()
                    .abs()
            };
            overlap(a).total_cmp(&overlap(b))
        })
}

fn criterion_1() -> Outcome {
    let cases = [
        (259usize, 2632usize, "0.47", "1.73"),
        (259, 4285, "0.54", "1.55"),
        (66, 2668, "0.72", "1.33"),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (n, t, lo, hi) in cases {
        let law = mp_bounds(t as f64 / n as f64).map_err(|e| e.to_string())?;
        let got = (
            format!("{:.2}", law.lambda_min),
            format!("{:.2}", law.lambda_max),
        );
        let hit = got.0 == lo && got.1 == hi;
        ok &= hit;
        details.push(format!(
            "N={n} T={t}: ({}, {}) vs ({lo}, {hi}){}",
            got.0,
            got.1,
            if hit { "" } else { " MISMATCH" }
        ));
    }
    check(ok, details.join("; "))
}

fn criterion_2() -> Outcome {
    let panels = 2_000_000usize;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for q in [1.5, 4.0, 10.0] {
        let law = mp_bounds(q).map_err(|e| e.to_string())?;
        let h = (law.lambda_max - law.lambda_min) / panels as f64;
        let integral: f64 = (0..panels)
            .map(|k| mp_density(law.lambda_min + (k as f64 + 0.5) * h, q).unwrap())
            .sum::<f64>()
            * h;
        let err = (integral - 1.0).abs();
        worst = worst.max(err);
        details.push(format!("Q={q}: {integral:.9}"));
    }
    check(
        worst < 1e-6,
        format!("{} (max error {worst:.2e})", details.join(", ")),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = rng.random_range(2..=100usize);
        let t = rng.random_range(2..=3 * n);
        let factors = rng.random_range(0..=5usize);
        let loadings = DMatrix::from_fn(n, factors, |_, _| rng.random_range(-1.5..1.5));
        let f = DMatrix::from_fn(factors, t, |_, _| rng.random_range(-1.0..1.0));
        let noise = DMatrix::from_fn(n, t, |_, _| rng.random_range(-1.0..1.0));
        let raw = &loadings * &f + noise;
        let rm = ReturnMatrix::new((0..n).map(|i| format!("a{i}")).collect(), raw, 1)
            .map_err(|e| e.to_string())?;
        let c = correlation_matrix(&normalize_returns(&rm).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let s = eigendecompose(&c).map_err(|e| e.to_string())?;
        let mut sum = DMatrix::zeros(n, n);
        for alpha in 0..n {
            sum += eigenmode_correlation(&s, alpha)
                .map_err(|e| e.to_string())?
                .values
                * s.eigenvalues()[alpha];
        }
        let err = (sum - c.values()).amax();
        if err.is_nan() || err >= 1e-9 {
            return Err(format!("matrix {k} (N={n}, T={t}): error {err:.3e}"));
        }
        worst = worst.max(err);
    }
    check(true, format!("50 matrices, max error {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let mut worst_out = 0.0f64;
    let mut worst_ks = 0.0f64;
    for seed in SEEDS {
        let m = generate(&MarketSpec::noise(100, 1000, seed)).map_err(|e| e.to_string())?;
        let (_, s) = spectrum(&m);
        let law = WishartLaw::from_shape(100, 1000).map_err(|e| e.to_string())?;
        worst_out = worst_out.max(fraction_outside(s.eigenvalues(), &law));
        worst_ks = worst_ks.max(bulk_ks_distance(s.eigenvalues(), &law));
    }
    check(
        worst_out <= 0.02 && worst_ks < 0.05,
        format!("10 seeds, max fraction outside {worst_out:.3}, max bulk KS {worst_ks:.4}"),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = 1.0f64;
    for seed in SEEDS {
        let m = generate(&MarketSpec::planted_pair(seed)).map_err(|e| e.to_string())?;
        let (_, s) = spectrum(&m);
        let truth = planted_classes(&m);
        let alpha = planted_mode(&s, &truth)
            .ok_or(format!("seed {seed}: no significant non-market mode"))?;
        let u = s.eigenvector(alpha).unwrap();
        let p = SubsectorPartition::from_components(alpha, &u, PLANTED_U_C)
            .map_err(|e| e.to_string())?;
        let acc = accuracy(&partition_classes(&p, u.len()), &truth);
        worst = worst.min(acc);
    }
    check(
        worst >= 0.95,
        format!("N=50 T=2000 u_c={PLANTED_U_C}, min accuracy over 10 seeds {worst:.3}"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst_z = f64::NEG_INFINITY;
    let mut worst_trend = f64::INFINITY;
    for seed in SEEDS {
        let m = generate(&MarketSpec::planted_pair(seed)).map_err(|e| e.to_string())?;
        let (_, s) = spectrum(&m);
        let alpha = planted_mode(&s, &planted_classes(&m))
            .ok_or(format!("seed {seed}: no planted mode"))?;
        let scan = mode_scan(&m.returns, &s, PLANTED_U_C, TRIALS, seed, false)
            .map_err(|e| e.to_string())?;
        let row = scan
            .row(alpha)
            .ok_or(format!("seed {seed}: planted mode skipped"))?;
        let z = row.z_score.ok_or(format!("seed {seed}: z undefined"))?;
        worst_z = worst_z.max(z);
        let full =
            mode_scan(&m.returns, &s, 0.0, TRIALS, seed, false).map_err(|e| e.to_string())?;
        let trend = full
            .trend()
            .ok_or(format!("seed {seed}: trend undefined"))?;
        worst_trend = worst_trend.min(trend);
    }
    check(
        worst_z <= -3.0 && worst_trend > 0.7,
        format!(
            "10 seeds, {TRIALS} trials: max planted-mode z {worst_z:.1} (need <= -3), min rank trend {worst_trend:.3} (need > 0.7)"
        ),
    )
}

fn criterion_7() -> Outcome {
    #[rustfmt::skip]
    let v = DMatrix::from_row_slice(4, 4, &[
        1.0,  0.55, 0.15, 0.11,
        0.55, 1.0,  0.39, 0.34,
        0.15, 0.39, 1.0,  0.95,
        0.11, 0.34, 0.95, 1.0,
    ]);
    let c = CorrelationMatrix::from_values(v, 100).map_err(|e| e.to_string())?;
    let part = SubsectorPartition {
        mode_index: 6,
        threshold: 0.1,
        positive: vec![0, 1],
        negative: vec![2, 3],
        positive_weights: vec![0.5, 0.5],
        negative_weights: vec![-0.5, -0.5],
        below_noise_floor: false,
    };
    let b = block_averages(&c, &part);
    let (wp, wn, bt) = (
        b.within_positive.unwrap_or(f64::NAN),
        b.within_negative.unwrap_or(f64::NAN),
        b.between.unwrap_or(f64::NAN),
    );
    let fixture = wp == 0.55 && wn == 0.95 && (bt - 0.2475).abs() < 1e-15;

    let mut min_gap = f64::INFINITY;
    for seed in SEEDS {
        let m = generate(&MarketSpec::planted_pair(seed)).map_err(|e| e.to_string())?;
        let (c, s) = spectrum(&m);
        let alpha = planted_mode(&s, &planted_classes(&m))
            .ok_or(format!("seed {seed}: no planted mode"))?;
        let p =
            SubsectorPartition::from_components(alpha, &s.eigenvector(alpha).unwrap(), PLANTED_U_C)
                .map_err(|e| e.to_string())?;
        let b = block_averages(&c, &p);
        let between = b.between.ok_or(format!("seed {seed}: empty side"))?;
        let within = b
            .within_positive
            .unwrap_or(f64::NAN)
            .min(b.within_negative.unwrap_or(f64::NAN));
        min_gap = min_gap.min(within - between);
    }
    check(
        fixture && min_gap > 0.0,
        format!("fixture ({wp}, {wn}, {bt}); planted market min(within) - between >= {min_gap:.3} over 10 seeds"),
    )
}

fn run_bin(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_eigensector"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    fs::write(
        d.join("spec.toml"),
        MarketSpec::planted_pair(11)
            .to_toml()
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let input = ["--input", "syn/panel.csv", "--format", "wide"];
    let pipeline = |d: &Path| -> Result<Vec<(String, Vec<u8>)>, String> {
        run_bin(d, &["synth", "--spec", "spec.toml", "--out-dir", "syn"])?;
        run_bin(
            d,
            &[&["analyze"][..], &input, &["--out-dir", "out"]].concat(),
        )?;
        run_bin(
            d,
            &[
                &["sectors"][..],
                &input,
                &[
                    "--metadata",
                    "syn/metadata.csv",
                    "--u-c",
                    "0.15",
                    "--out-dir",
                    "out",
                ],
            ]
            .concat(),
        )?;
        run_bin(
            d,
            &[
                &["anticorr"][..],
                &input,
                &[
                    "--u-c",
                    "0.15",
                    "--trials",
                    "1000",
                    "--seed",
                    "5",
                    "--out-dir",
                    "out",
                ],
            ]
            .concat(),
        )?;
        let mut files = Vec::new();
        for sub in ["syn", "out"] {
            let mut names: Vec<_> = fs::read_dir(d.join(sub))
                .map_err(|e| e.to_string())?
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            names.sort();
            for p in names {
                files.push((
                    p.display().to_string(),
                    fs::read(&p).map_err(|e| e.to_string())?,
                ));
            }
        }
        Ok(files)
    };
    let first = pipeline(d)?;
    let second = pipeline(d)?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    check(
        first.len() == 5 && second.len() == 5 && differing.is_empty(),
        format!(
            "{} JSON reports compared byte-for-byte, differing: {differing:?}",
            first.len()
        ),
    )
}

fn panel(text: &str) -> Result<PricePanel, String> {
    load_prices(text.as_bytes(), &PriceSchema::wide()).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    // Forward fill.
    let p = panel("date,A,B\n2020-01-01,10,1\n2020-01-02,,1\n2020-01-03,,1\n2020-01-06,11,1\n")?;
    let f = forward_fill(&p).map_err(|e| e.to_string())?;
    expect(
        "fill [10, _, _, 11]",
        f.row(0) == [Some(10.0), Some(10.0), Some(10.0), Some(11.0)],
    );
    let full = panel("date,A,B\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6\n")?;
    expect(
        "fill without gaps",
        forward_fill(&full).map_err(|e| e.to_string())? == full,
    );
    let lead = panel("date,A,B\n2020-01-01,,1\n2020-01-02,5,2\n2020-01-03,6,3\n2020-01-06,7,4\n")?;
    let filled = forward_fill(&lead).map_err(|e| e.to_string())?;
    expect(
        "first valid index",
        filled.first_valid_indices()[0] == Some(1),
    );
    let (trimmed, _) =
        apply_range_policy(&filled, RangePolicy::Intersect).map_err(|e| e.to_string())?;
    expect(
        "common range excludes index 0",
        trimmed.dates()[0] == lead.dates()[1] && trimmed.n_dates() == 3,
    );

    // Calendar shift. 2020-01-05 is a Sunday, 2020-01-03 the prior Friday.
    let sunday: ShiftRule = "A:sun:fri".parse().map_err(|e: Error| e.to_string())?;
    expect(
        "empty rules",
        align_calendar(&full, &[]).map_err(|e| e.to_string())? == full,
    );
    let p = panel("date,A,B\n2020-01-02,1,5\n2020-01-03,,6\n2020-01-05,2,\n2020-01-06,3,7\n")?;
    let a = align_calendar(&p, std::slice::from_ref(&sunday)).map_err(|e| e.to_string())?;
    let fri = a.dates().iter().position(|d| d.to_string() == "2020-01-03");
    expect(
        "sunday moves to friday",
        fri.is_some_and(|k| a.get(0, k) == Some(2.0)),
    );
    expect(
        "sunday date removed",
        a.dates().iter().all(|d| d.to_string() != "2020-01-05"),
    );
    let p = panel("date,A,B\n2020-01-02,1,5\n2020-01-03,7,6\n2020-01-05,8,\n2020-01-06,9,7\n")?;
    let a = align_calendar(&p, &[sunday]).map_err(|e| e.to_string())?;
    let fri = a.dates().iter().position(|d| d.to_string() == "2020-01-03");
    expect(
        "collision keeps friday",
        fri.is_some_and(|k| a.get(0, k) == Some(7.0)),
    );

    // Normalization.
    let rm = |rows: Vec<Vec<f64>>| {
        let (n, t) = (rows.len(), rows[0].len());
        ReturnMatrix::new(
            (0..n).map(|i| format!("a{i}")).collect(),
            DMatrix::from_fn(n, t, |i, k| rows[i][k]),
            1,
        )
        .map_err(|e| e.to_string())
    };
    let nr =
        normalize_returns(&rm(vec![vec![1.0, 3.0], vec![0.0, 1.0]])?).map_err(|e| e.to_string())?;
    expect(
        "[1, 3] -> [-1, 1]",
        nr.values()[(0, 0)] == -1.0
            && nr.values()[(0, 1)] == 1.0
            && nr.means()[0] == 2.0
            && nr.stds()[0] == 1.0,
    );
    let unit = vec![1.0, -1.0, 1.0, -1.0];
    let nr = normalize_returns(&rm(vec![unit.clone(), vec![0.0, 1.0, 2.0, 3.0]])?)
        .map_err(|e| e.to_string())?;
    expect(
        "normalized row unchanged",
        unit.iter()
            .enumerate()
            .all(|(k, x)| (nr.values()[(0, k)] - x).abs() < 1e-12),
    );
    let zero = normalize_returns(&rm(vec![vec![0.0, 1.0, 2.0], vec![5.0, 5.0, 5.0]])?);
    expect(
        "[5, 5, 5] rejected",
        matches!(zero, Err(Error::ZeroVariance { ref asset }) if asset == "a1"),
    );

    check(
        failures.is_empty(),
        if failures.is_empty() {
            "forward-fill, calendar-shift and normalization examples".to_string()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("Wishart bounds for the three reference panels", criterion_1),
        ("Wishart density normalization", criterion_2),
        ("spectral reconstruction", criterion_3),
        ("Wishart bulk agreement", criterion_4),
        ("planted subsector recovery", criterion_5),
        ("anti-correlation detection", criterion_6),
        ("block averages", criterion_7),
        ("pipeline determinism", criterion_8),
        ("data-repair examples", criterion_9),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {} ({name}): {d} [{secs:.1}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {d} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
