use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use hopp_core::harness::metrics::{publish_records, success_by_hop, write_metrics, HopStats};
use hopp_core::harness::report::{checks, render};
use hopp_core::harness::{run, ProtocolKind, Scenario};
use hopp_core::sim::ConfigError;
use hopp_core::trace::Trace;

#[derive(Parser)]
#[command(name = "hopp", version, about = "Run and analyse HoPP mesh simulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct RunOpts {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Base seed; trial k uses seed + k. HOPP_SEED overrides it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario and write traces and metrics.
    Run {
        #[command(flatten)]
        opts: RunOpts,
        /// Overrides the scenario's protocol.
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<ProtocolKind>,
    },
    /// Run HoPP and the push baseline on the same topology and seeds.
    Compare {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Recompute metrics from a stored trace.
    Replay {
        trace: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario and check audits and expectations.
    Report {
        #[command(flatten)]
        opts: RunOpts,
    },
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    match s {
        "hopp" => Ok(ProtocolKind::Hopp),
        "baseline" => Ok(ProtocolKind::Baseline),
        _ => Err(format!("unknown protocol {s:?} (hopp|baseline)")),
    }
}

enum Failure {
    Config(String),
    Acceptance,
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<ConfigError>() {
            Ok(c) => Failure::Config(c.to_string()),
            Err(e) => Failure::Other(e),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn seeds(opts: &RunOpts) -> Result<Vec<u64>, Failure> {
    let base = match std::env::var("HOPP_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("HOPP_SEED={v:?} is not an unsigned integer")))?,
        Err(_) => opts.seed,
    };
    if opts.trials == 0 {
        return Err(Failure::Config("--trials must be at least 1".into()));
    }
    Ok((0..opts.trials as u64).map(|k| base.wrapping_add(k)).collect())
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| Failure::Config(format!("{e:#}")))?;
    Ok(Scenario::from_json(&text)?)
}

fn run_all(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<Trace>, Failure> {
    let traces: Result<Vec<Trace>, ConfigError> = seeds.par_iter().map(|&s| run(scenario, s)).collect();
    Ok(traces?)
}

fn write_trial(dir: &Path, trace: &Trace) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = fs::File::create(dir.join("trace.jsonl"))?;
    trace.write_jsonl(std::io::BufWriter::new(file))?;
    write_metrics(trace, dir)?;
    Ok(())
}

fn trial_dir(out: &Path, n: usize, k: usize) -> PathBuf {
    if n == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("trial-{k}"))
    }
}

fn pooled_success(traces: &[Trace]) -> Vec<HopStats> {
    let records: Vec<_> = traces.iter().flat_map(publish_records).collect();
    success_by_hop(&records)
}

fn cmd_run(opts: &RunOpts, protocol: Option<ProtocolKind>) -> Result<(), Failure> {
    let mut scenario = load(&opts.scenario)?;
    if let Some(p) = protocol {
        scenario.protocol = p;
    }
    let seeds = seeds(opts)?;
    let traces = run_all(&scenario, &seeds)?;
    for (k, t) in traces.iter().enumerate() {
        write_trial(&trial_dir(&opts.out, traces.len(), k), t)?;
    }
    let stats = pooled_success(&traces);
    if traces.len() > 1 {
        let csv = hopp_core::harness::metrics::success_csv(&stats);
        fs::write(opts.out.join("success.csv"), csv).map_err(anyhow::Error::from)?;
    }
    println!("{} ({:?}, {} trial(s))", scenario.name, scenario.protocol, traces.len());
    for s in &stats {
        println!("  hop {:>2}: {}/{} = {:.4}", fmt_hop(s.hop), s.delivered, s.published, s.rate());
    }
    println!("wrote {}", opts.out.display());
    Ok(())
}

fn fmt_hop(h: Option<u32>) -> String {
    h.map_or("-".into(), |h| h.to_string())
}

fn compare_table(hopp: &[HopStats], base: &[HopStats]) -> String {
    let mut hops: Vec<Option<u32>> = hopp.iter().chain(base).map(|s| s.hop).collect();
    hops.sort();
    hops.dedup();
    let find = |v: &[HopStats], h| v.iter().find(|s| s.hop == h).copied();
    let mut s = String::from("hop,hopp_published,hopp_delivered,hopp_rate,baseline_published,baseline_delivered,baseline_rate\n");
    for h in hops {
        let cell = |x: Option<HopStats>| match x {
            Some(x) => format!("{},{},{:.4}", x.published, x.delivered, x.rate()),
            None => "0,0,".into(),
        };
        let _ = writeln!(s, "{},{},{}", fmt_hop(h), cell(find(hopp, h)), cell(find(base, h)));
    }
    s
}

fn cmd_compare(opts: &RunOpts) -> Result<(), Failure> {
    let scenario = load(&opts.scenario)?;
    let seeds = seeds(opts)?;
    let mut hopp = scenario.clone();
    hopp.protocol = ProtocolKind::Hopp;
    let mut base = scenario.clone();
    base.protocol = ProtocolKind::Baseline;
    let (h, b) = rayon::join(|| run_all(&hopp, &seeds), || run_all(&base, &seeds));
    let (h, b) = (h?, b?);
    let table = compare_table(&pooled_success(&h), &pooled_success(&b));
    fs::create_dir_all(&opts.out).map_err(anyhow::Error::from)?;
    fs::write(opts.out.join("compare.csv"), &table).map_err(anyhow::Error::from)?;
    print!("{table}");
    Ok(())
}

fn cmd_replay(trace: &Path, out: &Path) -> Result<(), Failure> {
    let file = fs::File::open(trace)
        .with_context(|| format!("opening {}", trace.display()))
        .map_err(|e| Failure::Config(format!("{e:#}")))?;
    let t = Trace::read_jsonl(BufReader::new(file)).map_err(|e| Failure::Config(format!("{}: {e}", trace.display())))?;
    for p in write_metrics(&t, out).map_err(anyhow::Error::from)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_report(opts: &RunOpts) -> Result<(), Failure> {
    let scenario = load(&opts.scenario)?;
    let seeds = seeds(opts)?;
    let traces = run_all(&scenario, &seeds)?;
    let cs = checks(&scenario.expect, &traces);
    print!("{}", render(&format!("{} ({} trial(s))", scenario.name, traces.len()), &cs));
    if cs.iter().all(|c| c.pass) {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run { opts, protocol } => cmd_run(opts, *protocol),
        Cmd::Compare { opts } => cmd_compare(opts),
        Cmd::Replay { trace, out } => cmd_replay(trace, out),
        Cmd::Report { opts } => cmd_report(opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance) => ExitCode::from(3),
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
