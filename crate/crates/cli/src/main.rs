//! `susy-invert`: phase shifts to effective-range model, S-matrix poles and
//! inversion potential, with forward verification.

mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{load_config, Mode, Order, PipelineConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "susy-invert", version, about)]
struct Cli {
    /// fit-erf | fit-poles | poles | potential | verify | pipeline
    #[arg(value_enum)]
    mode: Mode,

    /// Phase-shift table, pole record or model record (`bundled:1S0`,
    /// `bundled:1D2` for the shipped samples).
    #[arg(long)]
    input: Option<String>,

    /// JSON configuration; flags override its keys.
    #[arg(long, env = "SUSY_INVERT_CONFIG")]
    config: Option<PathBuf>,

    /// Orbital angular momentum.
    #[arg(long)]
    l: Option<u32>,

    /// Effective-range orders `M/N` (`M` alone for Taylor).
    #[arg(long)]
    order: Option<Order>,

    #[arg(long)]
    npoles: Option<usize>,

    /// Numerator coefficients for `poles` without an input file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    numerator: Option<Vec<f64>>,

    /// Denominator coefficients, starting with 1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    denominator: Option<Vec<f64>>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write plot-ready tables.
    #[arg(long)]
    emit_plots: bool,
}

impl Cli {
    fn into_config(self) -> Result<(PipelineConfig, Mode), CliError> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(m) = cfg.mode {
            if m != self.mode {
                eprintln!(
                    "note: config mode {} overridden by command {}",
                    m.name(),
                    self.mode.name()
                );
            }
        }
        cfg.mode = Some(self.mode);
        cfg.input = self.input.or(cfg.input);
        cfg.l = self.l.or(cfg.l);
        cfg.order = self.order.or(cfg.order);
        cfg.npoles = self.npoles.or(cfg.npoles);
        cfg.numerator = self.numerator.or(cfg.numerator);
        cfg.denominator = self.denominator.or(cfg.denominator);
        if let Some(out) = self.out {
            cfg.out = out;
        }
        cfg.emit_plots |= self.emit_plots;
        Ok((cfg, self.mode))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.into_config().and_then(|(cfg, mode)| run::run(cfg, mode));
    match result {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", summary(&report));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn summary(r: &run::RunReport) -> String {
    let mut parts = vec![format!("{} done", r.mode.name())];
    if let Some(f) = r.stages.fit_erf.as_ref().and_then(|s| s.fit.as_ref()) {
        parts.push(format!("ERF rms {:.3} deg", f.rms_deg));
    }
    if let Some(p) = &r.stages.poles {
        parts.push(format!("{} poles", p.kappas.len()));
    }
    if let Some(p) = &r.stages.potential {
        parts.push(format!("nu = {}", p.nu));
    }
    if let Some(v) = &r.stages.verification {
        parts.push(format!("max |delta diff| {:.2e} deg", v.max_abs_deg));
    }
    parts.push(format!("output in {}", r.config.out.display()));
    parts.join(", ")
}
