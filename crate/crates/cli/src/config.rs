use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use susy_inversion::fitting::{FitConfig, InitialGuess, PenaltySchedule, WeightScheme};
use susy_inversion::solver::SolverConfig;
use susy_inversion::{ErfKind, PartialWave, PhysicalConstants};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FitErf,
    FitPoles,
    /// Poles of a given effective-range model.
    #[serde(alias = "poles-from-erf")]
    Poles,
    Potential,
    Verify,
    Pipeline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::FitErf => "fit-erf",
            Mode::FitPoles => "fit-poles",
            Mode::Poles => "poles",
            Mode::Potential => "potential",
            Mode::Verify => "verify",
            Mode::Pipeline => "pipeline",
        }
    }
}

/// `M/N`; a bare `M` or `N = 0` selects a Taylor model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Order {
    pub m: usize,
    pub n: usize,
}

impl Order {
    pub fn kind(self) -> ErfKind {
        if self.n == 0 {
            ErfKind::Taylor
        } else {
            ErfKind::Pade
        }
    }
}

impl FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("order must look like M/N, found {s:?}"))
        };
        match s.split_once('/') {
            Some((m, n)) => Ok(Order { m: parse(m)?, n: parse(n)? }),
            None => Ok(Order { m: parse(s)?, n: 0 }),
        }
    }
}

impl TryFrom<String> for Order {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Order> for String {
    fn from(o: Order) -> String {
        o.to_string()
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.m, self.n)
    }
}

/// Fit tunables; orders, pole count and constants live at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub weights: WeightScheme,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub penalty: PenaltySchedule,
    pub constraint_tolerance: f64,
    pub initial_guess: InitialGuess,
    pub fixed_poles: Vec<f64>,
    pub min_separation: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            weights: d.weights,
            max_iterations: d.max_iterations,
            tolerance: d.tolerance,
            penalty: d.penalty,
            constraint_tolerance: d.constraint_tolerance,
            initial_guess: d.initial_guess,
            fixed_poles: d.fixed_poles,
            min_separation: d.min_separation,
            restarts: d.restarts,
            seed: d.seed,
        }
    }
}

/// Radial grid of the potential table (fm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self {
            r_min: 0.02,
            r_max: 10.0,
            points: 500,
        }
    }
}

impl RadialGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.r_min, self.r_max, self.points)
    }
}

/// Laboratory energies (MeV) for verification and model curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyGrid {
    pub e_min: f64,
    pub e_max: f64,
    pub points: usize,
}

impl Default for EnergyGrid {
    fn default() -> Self {
        Self {
            e_min: 1.0,
            e_max: 350.0,
            points: 50,
        }
    }
}

impl EnergyGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.e_min, self.e_max, self.points)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Option<Mode>,
    /// Dataset, pole record or model record depending on the mode;
    /// `bundled:1S0` and `bundled:1D2` name the shipped samples.
    pub input: Option<String>,
    pub l: Option<u32>,
    pub order: Option<Order>,
    pub npoles: Option<usize>,
    /// Effective-range coefficients for `poles` without an input file.
    pub numerator: Option<Vec<f64>>,
    pub denominator: Option<Vec<f64>>,
    pub constants: PhysicalConstants,
    pub fit: FitSettings,
    pub solver: SolverConfig,
    pub potential_grid: RadialGrid,
    pub energies: EnergyGrid,
    pub out: PathBuf,
    pub emit_plots: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: None,
            input: None,
            l: None,
            order: None,
            npoles: None,
            numerator: None,
            denominator: None,
            constants: PhysicalConstants::default(),
            fit: FitSettings::default(),
            solver: SolverConfig::default(),
            potential_grid: RadialGrid::default(),
            energies: EnergyGrid::default(),
            out: PathBuf::from("out"),
            emit_plots: false,
        }
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        file: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

pub const BUNDLED_PREFIX: &str = "bundled:";

impl PipelineConfig {
    pub fn partial_wave(&self) -> Option<PartialWave> {
        self.l.map(PartialWave)
    }

    pub fn fit_config(&self, order: Option<Order>) -> FitConfig {
        let f = self.fit.clone();
        let (kind, orders) = match order {
            Some(o) => (o.kind(), (o.m, o.n)),
            None => (ErfKind::Pade, (3, 2)),
        };
        FitConfig {
            kind,
            orders,
            weights: f.weights,
            max_iterations: f.max_iterations,
            tolerance: f.tolerance,
            penalty: f.penalty,
            constraint_tolerance: f.constraint_tolerance,
            initial_guess: f.initial_guess,
            fixed_poles: f.fixed_poles,
            min_separation: f.min_separation,
            restarts: f.restarts,
            seed: f.seed,
            constants: self.constants,
        }
    }

    /// Mode-specific checks, run before any computation.
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Usage(format!("mode {} requires {what}", mode.name())))
            }
        };
        let bundled = self.input.as_deref().is_some_and(|s| s.starts_with(BUNDLED_PREFIX));
        match mode {
            Mode::FitErf | Mode::Pipeline => {
                need(self.input.is_some(), "--input (phase-shift table)")?;
                need(self.l.is_some() || bundled, "--l")?;
                need(self.order.is_some(), "--order M/N")?;
            }
            Mode::FitPoles => {
                need(self.input.is_some(), "--input (phase-shift table)")?;
                need(self.l.is_some() || bundled, "--l")?;
                need(self.npoles.is_some_and(|n| n > 0), "--npoles (at least 1)")?;
            }
            Mode::Poles => {
                need(
                    self.input.is_some() || (self.numerator.is_some() && self.l.is_some()),
                    "--input (model record) or --numerator with --l",
                )?;
            }
            Mode::Potential | Mode::Verify => {
                need(self.input.is_some(), "--input (pole record)")?;
            }
        }
        if let Some(o) = self.order {
            need(o.m >= 1 || o.n > 0, "a nonzero numerator order")?;
        }
        self.constants
            .validate()
            .and_then(|_| self.solver.validate())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let g = self.potential_grid;
        if !(g.r_min > 0.0 && g.r_max > g.r_min && g.points >= 2) {
            return Err(CliError::Usage(
                "potential_grid needs 0 < r_min < r_max and at least 2 points".into(),
            ));
        }
        let e = self.energies;
        if !(e.e_min > 0.0 && e.e_max > e.e_min && e.points >= 2) {
            return Err(CliError::Usage(
                "energies need 0 < e_min < e_max and at least 2 points".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_parsing() {
        assert_eq!("3/2".parse::<Order>().unwrap(), Order { m: 3, n: 2 });
        assert_eq!("2".parse::<Order>().unwrap().kind(), ErfKind::Taylor);
        assert!("3-2".parse::<Order>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"mode": "poles-from-erf", "l": 0, "order": "3/2", "fit": {"weights": "by-sigma"}}"#;
        let c: PipelineConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.mode, Some(Mode::Poles));
        assert_eq!(c.fit.weights, WeightScheme::BySigma);
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"lx": 0}"#).is_err());
    }

    #[test]
    fn required_fields() {
        let c = PipelineConfig::default();
        assert!(c.validate(Mode::FitErf).is_err());
        let c = PipelineConfig {
            input: Some("bundled:1S0".into()),
            order: Some(Order { m: 3, n: 2 }),
            ..Default::default()
        };
        assert!(c.validate(Mode::FitErf).is_ok());
        assert!(c.validate(Mode::FitPoles).is_err());
    }
}
