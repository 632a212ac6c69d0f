use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use bdsense::eval::{
    aggregate, evaluate_echo, identifiability_check, nmse, run_sweep, trial_scene, AggregateRow, Method, SweepConfig,
    TrialRecord,
};
use bdsense::io::{
    append_trials, config_to_string, load_config, read_aggregates, read_header, read_trials, write_aggregates,
    write_trials, Dataset,
};
use bdsense::scene::{gen_pilots, synthesize_per_sample};
use bdsense::{Error, Result};

use crate::Command;

/// Slots used by the synthesis self-check; keeps `check` instant.
const CHECK_SLOTS: usize = 16;
const CHECK_TOLERANCE: f64 = 1e-10;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Csv(c) if c.is_io_error() => 3,
        _ => 2,
    }
}

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Check { config, method } => check(config.as_deref(), &method),
        Command::Simulate { config, out, seed, snr } => simulate(config.as_deref(), &out, seed, snr),
        Command::Estimate { dataset, method, out } => estimate(&dataset, method, &out),
        Command::Sweep { config, out, workers, seed, snr, trials, method } => {
            let mut cfg = config_or_default(config.as_deref())?.0;
            if let Some(seed) = seed {
                cfg.sweep.seed = seed;
            }
            if let Some(snr) = snr {
                cfg.sweep.snr_db = snr;
            }
            if let Some(trials) = trials {
                cfg.sweep.trials = trials;
            }
            if !method.is_empty() {
                cfg.sweep.methods = method;
            }
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            sweep(&cfg, &out, workers)
        }
        Command::Report { csv, config } => report(&csv, config.as_deref()),
    }
}

fn config_or_default(path: Option<&Path>) -> Result<(SweepConfig, String)> {
    match path {
        Some(p) => load_config(p),
        None => {
            let cfg = SweepConfig::default();
            let text = config_to_string(&cfg)?;
            Ok((cfg, text))
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn check(config: Option<&Path>, methods: &[Method]) -> Result<ExitCode> {
    let (mut cfg, _) = config_or_default(config)?;
    if !methods.is_empty() {
        cfg.sweep.methods = methods.to_vec();
    }
    let mut all_ok = true;
    println!("{:<6} {:<12} {:>10} {:>10}  verdict", "method", "condition", "lhs", "rhs");
    for c in identifiability_check(&cfg.system, &cfg.sweep.methods) {
        all_ok &= c.holds();
        println!("{:<6} {:<12} {:>10} {:>10}  {}", c.method, c.label, c.lhs, c.rhs, verdict(c.holds()));
    }

    // Tucker synthesis against the per-sample generator on a shortened scene.
    cfg.system.t = cfg.system.t.min(CHECK_SLOTS);
    let pilots = gen_pilots(&cfg.system)?;
    let scene = trial_scene(&cfg, &pilots, 0)?;
    let direct = synthesize_per_sample(&scene.truth, &cfg.system, &scene.codebook, &pilots)?;
    let error = nmse(&direct.to_column(), &scene.clean.to_column())?.sqrt();
    let synth_ok = error <= CHECK_TOLERANCE;
    all_ok &= synth_ok;
    println!(
        "synthesis self-check (T = {}): relative error {error:.3e} <= {CHECK_TOLERANCE:e}  {}",
        cfg.system.t,
        verdict(synth_ok)
    );
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn simulate(config: Option<&Path>, out: &Path, seed: Option<u64>, snr: Option<f64>) -> Result<ExitCode> {
    let (mut cfg, mut text) = config_or_default(config)?;
    if let Some(seed) = seed {
        cfg.sweep.seed = seed;
        cfg.validate()?;
        // Keep the stored config consistent with the scene it describes.
        text = config_to_string(&cfg)?;
    }
    let snr_db = snr.unwrap_or(cfg.sweep.snr_db[0]);
    let ds = Dataset::simulate(&cfg, &text, snr_db)?;
    ds.save(out)?;
    println!(
        "wrote {} (seed {}, SNR {} dB, realized {:.3} dB, echo {:?})",
        out.display(),
        ds.master_seed,
        ds.snr_db,
        ds.realized_snr_db,
        ds.echo.shape()
    );
    Ok(ExitCode::SUCCESS)
}

fn estimate(dataset: &Path, method: Method, out: &Path) -> Result<ExitCode> {
    let ds = Dataset::load(dataset)?;
    let mut cfg = ds.config()?;
    cfg.sweep.methods = vec![method];
    let scene = ds.trial_scene(&cfg)?;
    let rows = evaluate_echo(&cfg, &ds.pilots, &scene, &ds.echo, ds.snr_db, 0)?;
    append_trials(out, &rows)?;
    for row in &rows {
        print_trial(row);
    }
    Ok(ExitCode::SUCCESS)
}

fn print_trial(row: &TrialRecord) {
    println!("method  {}   status {}", row.method, row.status);
    let pair = |name: &str, truth: f64, est: Option<f64>| match est {
        Some(e) => println!("{name:<8} true {truth:<14.6e} est {e:<14.6e} rel err {:.3e}", ((e - truth) / truth).abs()),
        None => println!("{name:<8} true {truth:<14.6e} est -"),
    };
    pair("delay", row.tau_true, row.tau_est);
    pair("doppler", row.nu_true, row.nu_est);
    pair("azimuth", row.phi_true, row.phi_est);
    pair("elev", row.theta_true, row.theta_est);
    if let Some(a) = row.alpha_err_rel {
        println!("gain     rel err {a:.3e}");
    }
    if let Some(n) = row.nmse_heff {
        println!("NMSE(H_eff) {n:.3e} ({:.2} dB)", 10.0 * n.log10());
    }
}

fn sweep(cfg: &SweepConfig, out: &Path, workers: usize) -> Result<ExitCode> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let progress = |done: usize, total: usize| {
        if done == total || done.is_multiple_of(10) {
            eprintln!("  {done}/{total} work units");
        }
    };
    let report = run_sweep(cfg, workers, Some(&progress))?;
    for c in report.conditions.iter().filter(|c| !c.holds()) {
        eprintln!("{} blocked: {} ({} < {})", c.method, c.label, c.lhs, c.rhs);
    }
    let mut trials = BufWriter::new(File::create(out.join("trials.csv"))?);
    write_trials(&mut trials, &report.trials)?;
    trials.flush()?;
    let mut agg = BufWriter::new(File::create(out.join("aggregate.csv"))?);
    write_aggregates(&mut agg, &report.aggregates)?;
    agg.flush()?;
    print_table(&report.aggregates);
    Ok(ExitCode::SUCCESS)
}

fn report(csv: &Path, config: Option<&Path>) -> Result<ExitCode> {
    let header = read_header(File::open(csv)?)?;
    let rows = if header.iter().any(|h| h == "status") {
        let cfg = config_or_default(config)?.0;
        aggregate_trials(&read_trials(File::open(csv)?)?, cfg.system.symbol_duration())
    } else {
        read_aggregates(File::open(csv)?)?
    };
    print_table(&rows);
    Ok(ExitCode::SUCCESS)
}

/// Groups per-trial rows by (method, SNR) in order of first appearance.
fn aggregate_trials(trials: &[TrialRecord], symbol_duration: f64) -> Vec<AggregateRow> {
    let mut order: Vec<(Method, u64)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for row in trials {
        let key = (row.method, row.snr_db.to_bits());
        let idx = order.iter().position(|k| *k == key).unwrap_or_else(|| {
            order.push(key);
            order.len() - 1
        });
        groups.entry(idx).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|(idx, rows)| aggregate(&rows, order[idx].0, f64::from_bits(order[idx].1), symbol_duration))
        .collect()
}

fn print_table(rows: &[AggregateRow]) {
    let num = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3e}"));
    println!(
        "{:<6} {:>8} {:>12} {:>11} {:>11} {:>11} {:>11} {:>6} {:>6}",
        "method", "snr_db", "nmse_db", "rmse_tau", "rmse_nu", "rmse_angle", "rmse_alpha", "n_ok", "n_fail"
    );
    for r in rows {
        println!(
            "{:<6} {:>8} {:>12} {:>11} {:>11} {:>11} {:>11} {:>6} {:>6}",
            r.method,
            r.snr_db,
            r.nmse_heff_db.map_or("-".to_string(), |x| format!("{x:.2}")),
            num(r.rmse_tau_norm),
            num(r.rmse_nu_norm),
            num(r.rmse_angle_rad),
            num(r.rmse_alpha),
            r.n_ok,
            r.n_fail
        );
    }
}
