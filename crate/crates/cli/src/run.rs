use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use susy_inversion::fitting::{fit_erf, fit_poles, seed_from_extraction, FitReport, InitialGuess};
use susy_inversion::io::{self, BundledDataset};
use susy_inversion::solver::{verify_potential, VerificationReport};
use susy_inversion::susy::{build_potential, PotentialModel};
use susy_inversion::{
    delta_from_kappas, delta_from_model, effective_range_function, ere_parameters, extract_poles, k_from_elab,
    validate_pole_set, EreParameters, ErfKind, ErfModel, PartialWave, PhaseShiftDataset, PoleExtractionReport,
    PoleSet, PoleValidation, SumRuleTolerance,
};

use crate::config::{Mode, PipelineConfig, BUNDLED_PREFIX};
use crate::error::{CliError, StageContext};
use crate::output::OutputDir;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: Mode,
    pub config: PipelineConfig,
    pub stages: Stages,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    /// Wall-clock data; the only part of the report that varies between runs.
    pub timing: Timing,
}

#[derive(Debug, Default, Serialize)]
pub struct Stages {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_erf: Option<ErfStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poles: Option<PoleStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_poles: Option<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerifyStage>,
}

#[derive(Debug, Serialize)]
pub struct ErfStage {
    pub kind: ErfKind,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub correct_high_energy_limit: bool,
    pub ere: Option<EreParameters>,
    pub fit: Option<FitReport>,
}

#[derive(Debug, Serialize)]
pub struct PoleStage {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extraction: Option<PoleExtractionReport>,
    /// Where the final pole set came from.
    pub source: &'static str,
    pub kappas: Vec<f64>,
    pub validation: Option<PoleValidation>,
}

#[derive(Debug, Serialize)]
pub struct PotentialStage {
    pub l: u32,
    pub nu: i64,
    pub n_left: usize,
    pub n_right: usize,
    /// Limit of `r^2 V` at the origin.
    pub origin_coefficient: f64,
    /// Limit of `r^2 (V - l(l+1)/r^2)` at the origin.
    pub central_origin_coefficient: f64,
    pub table: String,
}

#[derive(Debug, Serialize)]
pub struct VerifyStage {
    pub e_lab_mev: Vec<f64>,
    pub delta_forward_deg: Vec<f64>,
    pub delta_poles_deg: Vec<f64>,
    pub max_abs_deg: f64,
    pub rms_deg: f64,
    pub r_max_fm: f64,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix_s: u64,
    pub stages_s: Vec<(String, f64)>,
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    out: OutputDir,
    stages: Stages,
    warnings: Vec<String>,
    timing: Vec<(String, f64)>,
}

impl Ctx<'_> {
    fn warn(&mut self, stage: &str, msgs: impl IntoIterator<Item = String>) {
        for m in msgs {
            let line = format!("{stage}: {m}");
            if !self.warnings.contains(&line) {
                self.warnings.push(line);
            }
        }
    }

    fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let v = f(self)?;
        self.timing.push((name.to_string(), t.elapsed().as_secs_f64()));
        Ok(v)
    }
}

pub fn run(cfg: PipelineConfig, mode: Mode) -> Result<RunReport, CliError> {
    cfg.validate(mode)?;
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let out = OutputDir::create(&cfg.out)?;
    let mut ctx = Ctx {
        cfg: &cfg,
        out,
        stages: Stages::default(),
        warnings: Vec::new(),
        timing: Vec::new(),
    };
    match mode {
        Mode::FitErf => {
            let data = load_dataset(&cfg)?;
            let model = ctx.timed("fit-erf", |c| stage_fit_erf(c, &data))?;
            if cfg.emit_plots {
                write_plots(&mut ctx, &data, Some(&model), None)?;
            }
        }
        Mode::FitPoles => {
            let data = load_dataset(&cfg)?;
            let n = cfg.npoles.expect("validated");
            let poles = ctx.timed("fit-poles", |c| stage_fit_poles(c, &data, n, cfg.fit.initial_guess.clone()))?;
            record_poles(&mut ctx, None, "direct-fit", &poles);
            ctx.out.write("poles.txt", &io::format_pole_set(&poles))?;
            if cfg.emit_plots {
                write_plots(&mut ctx, &data, None, Some(&poles))?;
            }
        }
        Mode::Poles => {
            let model = load_model(&cfg)?;
            ctx.stages.fit_erf = Some(erf_stage(&model, None));
            ctx.timed("poles", |c| {
                let mut ext = extract_poles(&model).stage("poles")?;
                if ext.has_complex() {
                    // nothing to put in a pole record; the report lists all roots
                    c.warn("poles", std::mem::take(&mut ext.warnings));
                    c.warn("poles", ["complex poles present; no pole record written".to_string()]);
                    c.stages.poles = Some(PoleStage {
                        extraction: Some(ext),
                        source: "extracted-from-erf",
                        kappas: Vec::new(),
                        validation: None,
                    });
                    return Ok(());
                }
                let set = ext.pole_set().stage("poles")?;
                c.out.write("poles.txt", &io::format_pole_set(&set))?;
                record_poles(c, Some(ext), "extracted-from-erf", &set);
                Ok(())
            })?;
        }
        Mode::Potential | Mode::Verify => {
            let poles = load_poles(&cfg)?;
            record_poles(&mut ctx, None, "input", &poles);
            let pot = ctx.timed("potential", |c| stage_potential(c, &poles))?;
            if mode == Mode::Verify {
                ctx.timed("verify", |c| stage_verify(c, &pot))?;
            }
        }
        Mode::Pipeline => {
            let data = load_dataset(&cfg)?;
            let model = ctx.timed("fit-erf", |c| stage_fit_erf(c, &data))?;
            let poles = ctx.timed("poles", |c| stage_pipeline_poles(c, &data, &model))?;
            ctx.out.write("poles.txt", &io::format_pole_set(&poles))?;
            let pot = ctx.timed("potential", |c| stage_potential(c, &poles))?;
            ctx.timed("verify", |c| stage_verify(c, &pot))?;
            if cfg.emit_plots {
                write_plots(&mut ctx, &data, Some(&model), Some(&poles))?;
            }
        }
    }
    let mut artifacts = ctx.out.written().to_vec();
    artifacts.push("report.json".into());
    let report = RunReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode,
        config: cfg.clone(),
        stages: ctx.stages,
        warnings: ctx.warnings,
        artifacts,
        timing: Timing {
            started_unix_s,
            stages_s: ctx.timing,
        },
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    ctx.out.write("report.json", &json)?;
    Ok(report)
}

fn input_label(cfg: &PipelineConfig) -> String {
    cfg.input.clone().unwrap_or_default()
}

fn read_input(cfg: &PipelineConfig) -> Result<String, CliError> {
    let path = input_label(cfg);
    std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{path}: {e}")))
}

fn load_dataset(cfg: &PipelineConfig) -> Result<PhaseShiftDataset, CliError> {
    let label = input_label(cfg);
    if let Some(name) = label.strip_prefix(BUNDLED_PREFIX) {
        let set = match name {
            "1S0" => BundledDataset::Np1S0,
            "1D2" => BundledDataset::Np1D2,
            _ => return Err(CliError::Usage(format!("unknown bundled dataset {name:?} (1S0, 1D2)"))),
        };
        if let Some(l) = cfg.l {
            if PartialWave(l) != set.l() {
                return Err(CliError::Usage(format!("bundled {name} is l = {}, not {l}", set.l())));
            }
        }
        return set.load().map_err(|e| CliError::from_input(&label, e));
    }
    let l = cfg.partial_wave().expect("validated");
    io::parse_dataset(&read_input(cfg)?, l).map_err(|e| CliError::from_input(&label, e))
}

fn load_model(cfg: &PipelineConfig) -> Result<ErfModel, CliError> {
    if cfg.input.is_some() {
        let label = input_label(cfg);
        return io::parse_model(&read_input(cfg)?).map_err(|e| CliError::from_input(&label, e));
    }
    let l = cfg.partial_wave().expect("validated");
    let num = cfg.numerator.clone().expect("validated");
    let built = match &cfg.denominator {
        Some(den) if den.len() > 1 => ErfModel::pade(l, num, den.clone()),
        _ => ErfModel::taylor(l, num),
    };
    built.map_err(|e| CliError::Usage(e.to_string()))
}

fn load_poles(cfg: &PipelineConfig) -> Result<PoleSet, CliError> {
    let label = input_label(cfg);
    io::parse_pole_set(&read_input(cfg)?, cfg.partial_wave()).map_err(|e| CliError::from_input(&label, e))
}

fn erf_stage(model: &ErfModel, fit: Option<FitReport>) -> ErfStage {
    ErfStage {
        kind: model.kind,
        numerator: model.numerator().to_vec(),
        denominator: model.denominator().to_vec(),
        correct_high_energy_limit: model.has_correct_high_energy_limit(),
        ere: ere_parameters(model).ok(),
        fit,
    }
}

fn stage_fit_erf(c: &mut Ctx, data: &PhaseShiftDataset) -> Result<ErfModel, CliError> {
    let fc = c.cfg.fit_config(c.cfg.order);
    let (model, mut rep) = fit_erf(data, &fc).stage("fit-erf")?;
    c.warn("fit-erf", std::mem::take(&mut rep.warnings));
    c.out.write("model.json", &io::format_model(&model))?;
    c.stages.fit_erf = Some(erf_stage(&model, Some(rep)));
    Ok(model)
}

fn stage_fit_poles(c: &mut Ctx, data: &PhaseShiftDataset, n: usize, guess: InitialGuess) -> Result<PoleSet, CliError> {
    let mut fc = c.cfg.fit_config(c.cfg.order);
    fc.initial_guess = guess;
    let (set, mut rep) = fit_poles(data, n, &fc).stage("fit-poles")?;
    c.warn("fit-poles", std::mem::take(&mut rep.warnings));
    c.stages.fit_poles = Some(rep);
    Ok(set)
}

fn record_poles(c: &mut Ctx, mut extraction: Option<PoleExtractionReport>, source: &'static str, set: &PoleSet) {
    if let Some(e) = extraction.as_mut() {
        let w = std::mem::take(&mut e.warnings);
        c.warn("poles", w);
    }
    let mut validation = validate_pole_set(set.kappas(), set.l(), SumRuleTolerance::STRICT);
    c.warn("poles", std::mem::take(&mut validation.issues));
    c.stages.poles = Some(PoleStage {
        extraction,
        source,
        kappas: set.kappas().to_vec(),
        validation: Some(validation),
    });
}

/// Poles of the fitted model when they are real and admissible; otherwise a
/// direct pole fit seeded from them.
fn stage_pipeline_poles(c: &mut Ctx, data: &PhaseShiftDataset, model: &ErfModel) -> Result<PoleSet, CliError> {
    let ext = extract_poles(model).stage("poles")?;
    let direct = if ext.has_complex() {
        Err("the fitted model has complex poles".to_string())
    } else {
        ext.pole_set()
            .map_err(|e| e.to_string())
            .and_then(|set| {
                let v = validate_pole_set(set.kappas(), set.l(), SumRuleTolerance::STRICT);
                if v.valid {
                    Ok(set)
                } else {
                    Err(v.issues.join("; "))
                }
            })
    };
    match direct {
        Ok(set) => {
            record_poles(c, Some(ext), "extracted-from-erf", &set);
            Ok(set)
        }
        Err(reason) => {
            let n = c.cfg.npoles.unwrap_or(ext.real_poles.len() + ext.complex_poles.len());
            c.warn(
                "poles",
                [format!("{reason}; fitting {n} real poles directly to the phase shifts")],
            );
            let guess = match &c.cfg.fit.initial_guess {
                InitialGuess::FromErf => {
                    let mut seed = seed_from_extraction(&ext);
                    for f in &c.cfg.fit.fixed_poles {
                        if let Some((i, _)) = seed
                            .iter()
                            .enumerate()
                            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
                        {
                            seed.remove(i);
                        }
                    }
                    if seed.len() + c.cfg.fit.fixed_poles.len() == n {
                        InitialGuess::Manual(seed)
                    } else {
                        InitialGuess::FromErf
                    }
                }
                other => other.clone(),
            };
            let set = stage_fit_poles(c, data, n, guess)?;
            record_poles(c, Some(ext), "direct-fit", &set);
            Ok(set)
        }
    }
}

fn stage_potential(c: &mut Ctx, poles: &PoleSet) -> Result<PotentialModel, CliError> {
    let pot = build_potential(poles).stage("potential")?;
    let consts = c.cfg.constants;
    let l = poles.l();
    let mut rows = Vec::new();
    for r in c.cfg.potential_grid.values() {
        let v = pot.eval(r).stage("potential")?;
        let centrifugal = l.centrifugal() / (r * r);
        rows.push(vec![r, consts.to_mev(v), consts.to_mev(v - centrifugal)]);
    }
    let meta = vec![
        format!(
            "inversion potential, l = {}, nu = {}, hbar^2/2mu = {} MeV fm^2",
            l.l(),
            pot.nu(),
            consts.hbar2_over_2mu
        ),
        format!(
            "kappa (fm^-1): {}",
            poles.kappas().iter().map(|k| format!("{k:?}")).collect::<Vec<_>>().join(" ")
        ),
    ];
    let name = "potential.dat";
    c.out
        .write(name, &io::format_table(&meta, &["r_fm", "V_MeV", "V_minus_centrifugal_MeV"], &rows))?;
    c.stages.potential = Some(PotentialStage {
        l: l.l(),
        nu: pot.nu(),
        n_left: pot.n_left(),
        n_right: pot.n_right(),
        origin_coefficient: pot.origin_coefficient().stage("potential")?,
        central_origin_coefficient: pot.central_origin_coefficient().stage("potential")?,
        table: name.into(),
    });
    Ok(pot)
}

fn stage_verify(c: &mut Ctx, pot: &PotentialModel) -> Result<(), CliError> {
    let energies = c.cfg.energies.values();
    let ks = energies
        .iter()
        .map(|&e| k_from_elab(e, &c.cfg.constants))
        .collect::<Result<Vec<_>, _>>()
        .stage("verify")?;
    let rep: VerificationReport = verify_potential(pot, &ks, &c.cfg.solver).stage("verify")?;
    let deg = |v: &[f64]| v.iter().map(|x| x.to_degrees()).collect::<Vec<_>>();
    let rows: Vec<Vec<f64>> = (0..ks.len())
        .map(|i| {
            vec![
                energies[i],
                rep.delta_forward[i].to_degrees(),
                rep.delta_poles[i].to_degrees(),
                rep.residuals[i].to_degrees(),
            ]
        })
        .collect();
    c.out.write(
        "verification.dat",
        &io::format_table(
            &["forward-solved phase shifts against the pole arctangent sum".into()],
            &["E_lab_MeV", "delta_forward_deg", "delta_poles_deg", "difference_deg"],
            &rows,
        ),
    )?;
    c.stages.verification = Some(VerifyStage {
        e_lab_mev: energies,
        delta_forward_deg: deg(&rep.delta_forward),
        delta_poles_deg: deg(&rep.delta_poles),
        max_abs_deg: rep.max_abs.to_degrees(),
        rms_deg: rep.rms.to_degrees(),
        r_max_fm: rep.r_max,
    });
    Ok(())
}

/// Plot data: phase shifts against energy, K against k^2.
fn write_plots(
    c: &mut Ctx,
    data: &PhaseShiftDataset,
    model: Option<&ErfModel>,
    poles: Option<&PoleSet>,
) -> Result<(), CliError> {
    let consts = c.cfg.constants;
    let l = data.l;
    let ks = data.wave_numbers(&consts).stage("plots")?;
    let rows: Vec<Vec<f64>> = data
        .points()
        .iter()
        .zip(&ks)
        .map(|(p, &k)| {
            let kv = effective_range_function(k, p.delta, l).unwrap_or(f64::NAN);
            vec![p.e_lab, p.delta.to_degrees(), p.sigma.unwrap_or(0.0).to_degrees(), k * k, kv]
        })
        .collect();
    c.out.write(
        "plot_data.dat",
        &io::format_table(
            &[format!("phase-shift data, l = {}", l.l())],
            &["E_lab_MeV", "delta_deg", "error_deg", "k2_fm-2", "K"],
            &rows,
        ),
    )?;

    let e_top = data.points().last().map(|p| p.e_lab).unwrap_or(350.0).max(c.cfg.energies.e_max);
    let n = 400;
    let energies: Vec<f64> = (1..=n).map(|i| e_top * i as f64 / n as f64).collect();
    let kd = energies
        .iter()
        .map(|&e| k_from_elab(e, &consts))
        .collect::<Result<Vec<_>, _>>()
        .stage("plots")?;
    let mut columns = vec!["E_lab_MeV", "k2_fm-2"];
    let mut cols: Vec<Vec<f64>> = vec![energies.clone(), kd.iter().map(|k| k * k).collect()];
    if let Some(m) = model {
        columns.push("delta_erf_deg");
        cols.push(delta_from_model(m, &kd).stage("plots")?.iter().map(|d| d.to_degrees()).collect());
        columns.push("K_erf");
        cols.push(kd.iter().map(|k| m.eval(k * k)).collect());
    }
    if let Some(p) = poles {
        columns.push("delta_poles_deg");
        cols.push(delta_from_kappas(p.kappas(), &kd).iter().map(|d| d.to_degrees()).collect());
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    c.out.write(
        "plot_model.dat",
        &io::format_table(&[format!("model curves, l = {}", l.l())], &columns, &rows),
    )?;
    Ok(())
}
