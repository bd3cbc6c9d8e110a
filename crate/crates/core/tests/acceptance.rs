//! One line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rpl_core::cli::main_with;
use rpl_core::dimension::theoretical_bounds;
use rpl_core::geometry::{Angle, PlaneHeight};
use rpl_core::multiplicity::{build_index, m_pi, m_pi_restricted, Band};
use rpl_core::tangency::count_tangent_pairs;
use rpl_core::verify::{conjugation_residual, implication_violations, window_calibration, CONJUGATION_HEIGHTS};

use common::OracleBand;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: u32, name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (mut passed, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(l) = limit {
        if elapsed > l {
            passed = false;
            detail.push_str(&format!("; over the {:.0} s budget", l.as_secs_f64()));
        }
    }
    Outcome { id, name, passed, detail, elapsed }
}

fn rpl(threads: usize, out: &Path, args: &[&str]) -> i32 {
    let mut v = vec![
        "rpl".to_string(),
        "--threads".into(),
        threads.to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    v.extend(args.iter().map(|s| s.to_string()));
    main_with(v)
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(col)?.parse().ok())
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        return f64::NAN;
    }
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().into(), fs::read(&p).unwrap());
    }
    out
}

/// Criteria 6, 7 and 9 as CLI pipelines writing into `root/{sweep6,sweep7,mult9}`.
fn pipelines(threads: usize, root: &Path) -> [(i32, Duration); 3] {
    let c6 = root.join("sweep6");
    let c7 = root.join("sweep7");
    let c9 = root.join("mult9");
    let start = Instant::now();
    let g6 = rpl(threads, &c6, &["generate", "--kind", "cantor", "--depth", "6"]);
    let s6 = rpl(threads, &c6, &["sweep", "--input", c6.join("measure.csv").to_str().unwrap()]);
    let d6 = start.elapsed();
    let g7 = rpl(threads, &c7, &["generate", "--kind", "plane", "--per-side", "363"]);
    let s7 = rpl(
        threads,
        &c7,
        &["sweep", "--t", "0.0009765625", "--input", c7.join("measure.csv").to_str().unwrap()],
    );
    let d7 = start.elapsed() - d6;
    let g9 = rpl(threads, &c9, &["generate", "--kind", "cantor", "--depth", "5"]);
    let m9 = rpl(threads, &c9, &["multiplicity", "--input", c9.join("measure.csv").to_str().unwrap()]);
    let d9 = start.elapsed() - d6 - d7;
    [(g6.max(s6), d6), (g7.max(s7), d7), (g9.max(m9), d9)]
}

/// Charges the pipeline time to an outcome and applies the budget.
fn charge(mut o: Outcome, pipeline: Duration, limit: Option<Duration>) -> Outcome {
    o.elapsed += pipeline;
    if let Some(l) = limit {
        if o.elapsed > l {
            o.passed = false;
            o.detail.push_str(&format!("; over the {:.0} s budget", l.as_secs_f64()));
        }
    }
    o
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = Vec::new();

    results.push(timed(1, "conjugation identity", Some(secs(10)), || {
        let worst = CONJUGATION_HEIGHTS
            .iter()
            .enumerate()
            .map(|(k, &t)| conjugation_residual(PlaneHeight::new(t).unwrap(), 100_000, 1 + k as u64, false))
            .fold(0.0, f64::max);
        (worst <= 1e-12, format!("max residual {worst:.3e} over 7 heights x 1e5 samples"))
    }));

    results.push(timed(2, "tube implies tangency", Some(secs(10)), || {
        let (bad, worst) = implication_violations(100_000, 2, false);
        (bad == 0, format!("{bad} violations in 1e5 tuples, max Δ/δ {worst:.4}"))
    }));

    results.push(timed(3, "sublevel set is one short arc", Some(secs(60)), || {
        let narrow = window_calibration(10_000, 4096, (1e-2, 0.5), 3).unwrap();
        let wide = window_calibration(2_500, 4096, (0.5, 2.0), 4).unwrap();
        let c = narrow.constant.max(wide.constant);
        (
            narrow.multi_arc == 0 && c <= 32.0,
            format!("{} multi-arc of 1e4, C = {c:.4}", narrow.multi_arc),
        )
    }));

    // criteria 4 and 5 share configurations
    let mut identity_ok = true;
    let mut identity_checked = 0usize;
    results.push(timed(4, "index matches brute force", Some(secs(120)), || {
        let t = PlaneHeight::standard();
        let mut configs = 0;
        let mut mismatches = 0;
        for (m, n) in [1000usize, 2500, 5000, 10000].into_iter().enumerate() {
            let mu = common::random_measure(n, 400 + m as u64);
            let mut r = common::rng(500 + m as u64);
            for cfg in 0..50 {
                let delta = 10f64.powf(r.random_range(-3.0..-0.7));
                let index = build_index(&mu, if cfg % 2 == 0 { 2.0 * delta } else { 0.03 }).unwrap();
                let theta = Angle::new(r.random_range(0.0..TAU));
                let z = if cfg % 4 == 0 {
                    common::region_point(&mut r)
                } else {
                    mu.points()[r.random_range(0..n)]
                };
                let tau = 0.5f64.powi(r.random_range(0..9));
                let full = m_pi(&mu, &index, t, theta, &z, delta).unwrap();
                let mut ok = full == common::m_pi(&mu, t, theta, &z, delta);
                for (band, ob) in [
                    (Band::Annulus(tau), OracleBand::Annulus(tau)),
                    (Band::Ball(tau), OracleBand::Ball(tau)),
                    (Band::TangencyOnly, OracleBand::TangencyOnly),
                ] {
                    let fast = m_pi_restricted(&mu, &index, t, theta, &z, delta, band).unwrap();
                    ok &= fast == common::m_pi_restricted(&mu, t, theta, &z, delta, ob);
                    if band == Band::TangencyOnly {
                        identity_ok &= fast == full;
                        identity_checked += 1;
                    }
                }
                configs += 1;
                mismatches += usize::from(!ok);
            }
        }
        let mut pair_configs = 0;
        for (m, n) in [1000usize, 2000].into_iter().enumerate() {
            let mu = common::random_measure(n, 600 + m as u64);
            let mut r = common::rng(700 + m as u64);
            for _ in 0..100 {
                let delta = 10f64.powf(r.random_range(-3.0..-1.0));
                let tau = 0.5f64.powi(r.random_range(0..10));
                let index = build_index(&mu, 2.0 * delta).unwrap();
                let c = count_tangent_pairs(&mu, &index, delta, tau).unwrap();
                let (count, mass) = common::pair_count(&mu, delta, tau, 2.0 * tau);
                pair_configs += 1;
                mismatches += usize::from(c.pair_count != count || c.weighted_mass != mass);
            }
        }
        (
            mismatches == 0,
            format!("{mismatches} mismatches over {configs} tube and {pair_configs} pair configurations"),
        )
    }));

    results.push(Outcome {
        id: 5,
        name: "tube mass equals tangency-restricted mass",
        passed: identity_ok && identity_checked > 0,
        detail: format!("{identity_checked} configurations from criterion 4"),
        elapsed: Duration::ZERO,
    });

    let tmp = tempfile::tempdir().unwrap();
    let root1 = tmp.path().join("threads1");
    let runs = pipelines(1, &root1);
    let codes = runs.map(|r| r.0);

    let c6 = timed(6, "sweep at s = 3/2, t = 1/√2", None, || {
        let mu = rpl_core::io::read_measure(&root1.join("sweep6/measure.csv"));
        let atoms = mu.map(|m| m.len()).unwrap_or(0);
        let dims = csv_column(&root1.join("sweep6/sweep.csv"), 1);
        let frac = dims.iter().filter(|&&d| d >= 1.35).count() as f64 / dims.len().max(1) as f64;
        let med = median(&dims);
        (
            codes[0] == 0 && atoms >= 100_000 && dims.len() == 256 && frac >= 0.9 && med >= 1.40,
            format!("{atoms} atoms, {:.1}% of 256 angles >= 1.35, median {med:.4}", 100.0 * frac),
        )
    });
    results.push(charge(c6, runs[0].1, Some(secs(600))));

    let c7 = timed(7, "plane slice counterexample", None, || {
        let dims = csv_column(&root1.join("sweep7/sweep.csv"), 1);
        let med = median(&dims);
        let contrast = tmp.path().join("contrast");
        fs::create_dir_all(&contrast).unwrap();
        let input = root1.join("sweep7/measure.csv");
        let code = rpl(1, &contrast, &["sweep", "--t", &FRAC_1_SQRT_2.to_string(), "--input", input.to_str().unwrap()]);
        let med_std = median(&csv_column(&contrast.join("sweep.csv"), 1));
        (
            codes[1] == 0 && code == 0 && dims.len() == 256 && med <= 1.10,
            format!("median {med:.4} at t = 2^-10 (t = 1/√2 for contrast: {med_std:.4})"),
        )
    });
    results.push(charge(c7, runs[1].1, Some(secs(300))));

    results.push(timed(8, "bound curves", Some(secs(1)), || {
        let b = |s: f64| theoretical_bounds(s).unwrap();
        let mut ok = b(1.5).new == 1.5 && b(3.0).new == 2.0;
        ok &= b(2.25).new == 1.75 && b(2.25).oberlin == 1.75;
        let mut worst = f64::INFINITY;
        for k in 0..1000 {
            let s = 1.0 + 1.25 * k as f64 / 999.0;
            let x = b(s);
            worst = worst.min(x.new - x.oberlin);
        }
        ok &= worst >= 0.0;
        (ok, format!("min(new - oberlin) on [1, 9/4] = {worst:.3e}"))
    }));

    let c9 = timed(9, "high-multiplicity mass trend", None, || {
        let z = csv_column(&root1.join("mult9/z_mass.csv"), 2);
        let monotone = z.windows(2).all(|w| w[1] <= w[0]);
        (
            codes[2] == 0 && z.len() == 3 && monotone,
            format!("Z_mass at 2^-6, 2^-7, 2^-8 = {z:?}"),
        )
    });
    results.push(charge(c9, runs[2].1, Some(secs(600))));

    results.push(timed(10, "bit-identical outputs at 1, 4, 8 threads", None, || {
        let base: Vec<_> = ["sweep6", "sweep7", "mult9"].iter().map(|d| snapshot(&root1.join(d))).collect();
        let mut diffs = Vec::new();
        for threads in [4, 8] {
            let root = tmp.path().join(format!("threads{threads}"));
            let c = pipelines(threads, &root);
            let c = c.map(|r| r.0);
            if c != [0, 0, 0] {
                diffs.push(format!("exit codes {c:?} at {threads} threads"));
            }
            for (k, d) in ["sweep6", "sweep7", "mult9"].iter().enumerate() {
                if snapshot(&root.join(d)) != base[k] {
                    diffs.push(format!("{d} differs at {threads} threads"));
                }
            }
        }
        let files: usize = base.iter().map(|m| m.len()).sum();
        let detail = if diffs.is_empty() {
            format!("{files} files identical")
        } else {
            diffs.join("; ")
        };
        (diffs.is_empty(), detail)
    }));

    println!();
    let mut failed = 0;
    for r in &results {
        println!(
            "criterion {:>2} {} {} ({}) [{:.2} s]",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail,
            r.elapsed.as_secs_f64()
        );
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
