use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ianet::bottleneck::{detect_bottlenecks, uv_statistics, BottleneckSummary};
use ianet::bounds::matching_upper_bound;
use ianet::eia::run_pairing;
use ianet::experiments::Sweep;
use ianet::network::{estimate_limit, instance_gains, ChannelGains, NodeLayout, RateMatrix};
use serde::Serialize;

use crate::config::{CliConfig, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Where artifacts go.
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Per-instance CSV for `sweep`.
    pub instances: Option<PathBuf>,
}

impl Output {
    fn open(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
        Ok(match path {
            Some(p) => {
                Box::new(BufWriter::new(File::create(p).map_err(|e| {
                    Failure::Runtime(format!("cannot write {}: {e}", p.display()))
                })?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn writer(&self) -> Result<Box<dyn Write>, Failure> {
        Self::open(self.path.as_deref())
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<(), Failure> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Runtime(e.to_string()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(io_failure)
    }

    /// One header row and one data row.
    fn csv_row<T: Serialize>(&self, value: &T) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(self.writer()?);
        w.serialize(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        w.flush().map_err(io_failure)
    }
}

fn io_failure(e: io::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(Serialize)]
struct Generated<'a> {
    layout: &'a NodeLayout,
    gains: &'a ChannelGains,
}

pub fn gen(cfg: &CliConfig, out: &Output) -> Result<(), Failure> {
    let net = cfg.network()?;
    let (layout, gains) = instance_gains(net, net.n, cfg.instance)?;
    match out.format {
        Format::Json => out.json(&Generated {
            layout: &layout,
            gains: &gains,
        }),
        Format::Csv => {
            let dir = out
                .path
                .as_deref()
                .ok_or_else(|| Failure::config("--out", "`gen --format csv` needs an output directory"))?;
            std::fs::create_dir_all(dir).map_err(io_failure)?;
            layout.write_csv(Output::open(Some(&dir.join("layout.csv")))?)?;
            gains.write_csv(Output::open(Some(&dir.join("gains.csv")))?)?;
            Ok(())
        }
    }
}

fn e_for_analysis(cfg: &CliConfig) -> Result<f64, Failure> {
    let a = cfg.analyze.clone().unwrap_or_default();
    if let Some(e) = a.e {
        if !(e.is_finite() && e >= 0.0) {
            return Err(Failure::config("analyze.e", "must be finite and nonnegative"));
        }
        return Ok(e);
    }
    let samples = cfg
        .estimate_e
        .as_ref()
        .ok_or_else(|| Failure::config("analyze.e", "give `analyze.e` or an `estimate_e` section"))?
        .samples;
    let net = cfg.network()?;
    Ok(estimate_limit(net, checked_samples(samples)?)?.e_hat)
}

fn checked_samples(samples: u64) -> Result<u64, Failure> {
    if samples < 2 {
        return Err(Failure::config("estimate_e.samples", "need at least two samples"));
    }
    Ok(samples)
}

pub fn analyze(cfg: &CliConfig, out: &Output) -> Result<(), Failure> {
    let epsilon = cfg
        .analyze
        .as_ref()
        .and_then(|a| a.epsilon)
        .ok_or_else(|| Failure::config("analyze.epsilon", "epsilon is required"))?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Failure::config("analyze.epsilon", "must be positive"));
    }
    let net = cfg.network()?;
    let e = e_for_analysis(cfg)?;
    let (_, gains) = instance_gains(net, net.n, cfg.instance)?;
    let s = RateMatrix::from_gains(&gains);
    let set = detect_bottlenecks(&s, e, epsilon)?;
    let uv = uv_statistics(&set, &s.diagonal())?;
    match out.format {
        Format::Json => out.json(&BottleneckSummary::new(&set, &uv)),
        Format::Csv => Ok(set.write_csv(&s, out.writer()?)?),
    }
}

#[derive(Serialize)]
struct BracketRow {
    lower: f64,
    upper: f64,
    single_user_upper: f64,
    per_user_lower: f64,
    per_user_upper: f64,
    matched_pairs: usize,
}

pub fn bounds(cfg: &CliConfig, out: &Output) -> Result<(), Failure> {
    let net = cfg.network()?;
    let (_, gains) = instance_gains(net, net.n, cfg.instance)?;
    let s = RateMatrix::from_gains(&gains);
    let b = matching_upper_bound(&gains, &s)?;
    match out.format {
        Format::Json => out.json(&b),
        Format::Csv => out.csv_row(&BracketRow {
            lower: b.lower,
            upper: b.upper,
            single_user_upper: b.single_user_upper,
            per_user_lower: b.per_user_lower,
            per_user_upper: b.per_user_upper,
            matched_pairs: b.matched_pairs.len(),
        }),
    }
}

pub fn eia(cfg: &CliConfig, out: &Output) -> Result<(), Failure> {
    let section = cfg
        .eia
        .as_ref()
        .ok_or_else(|| Failure::config("eia", "section is required for `eia`"))?;
    let gains = match &section.gains {
        Some(g) => g.clone(),
        None => {
            let net = cfg.network()?;
            instance_gains(net, section.users, cfg.instance)?.1
        }
    };
    let mut ecfg = cfg.eia_config(gains)?;
    if out.format == Format::Csv {
        ecfg.trace = true;
    }
    let report = run_pairing(&ecfg)?;
    match out.format {
        Format::Json => out.json(&report),
        Format::Csv => Ok(report.write_trace_csv(out.writer()?)?),
    }
}

pub fn sweep(cfg: &CliConfig, out: &Output) -> Result<(), Failure> {
    let scfg = cfg.sweep_config()?;
    let report = Sweep::new(scfg)?.convergence()?;
    if let Some(p) = &out.instances {
        report.write_instances_csv(Output::open(Some(p))?)?;
    }
    match out.format {
        Format::Json => out.json(&report),
        Format::Csv => Ok(report.write_summary_csv(out.writer()?)?),
    }
}

pub fn estimate_e(cfg: &CliConfig, out: &Output) -> Result<(), Failure> {
    let samples = cfg
        .estimate_e
        .as_ref()
        .ok_or_else(|| Failure::config("estimate_e.samples", "section is required for `estimate-e`"))?
        .samples;
    let net = cfg.network()?;
    let est = estimate_limit(net, checked_samples(samples)?)?;
    match out.format {
        Format::Json => out.json(&est),
        Format::Csv => out.csv_row(&est),
    }
}
