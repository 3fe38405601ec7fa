//! One PASS/FAIL line per acceptance criterion, written straight to stderr so
//! that it shows without `--nocapture`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use susy_inversion::fitting::{fit_erf, fit_poles, FitConfig, InitialGuess, WeightScheme};
use susy_inversion::io::BundledDataset;
use susy_inversion::solver::{phase_shift_from_potential, verify_inversion, SolverConfig};
use susy_inversion::susy::*;
use susy_inversion::*;

const S_POLES: [f64; 6] = [-0.0401, -0.7540, 0.6152, 2.0424, 4.1650, 4.6];
const D_POLES: [f64; 5] = [-0.4294, -0.8827, -8.7653, 0.7750, 0.4376];

type Outcome = (bool, String);

fn s_set() -> PoleSet {
    PoleSet::new(PartialWave(0), S_POLES.to_vec(), Provenance::Manual).unwrap()
}

fn d_set() -> PoleSet {
    PoleSet::new(PartialWave(2), D_POLES.to_vec(), Provenance::Manual).unwrap()
}

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    sorted(a)
        .iter()
        .zip(sorted(b))
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn real_roots(model: &ErfModel) -> Result<Vec<f64>> {
    let rep = extract_poles(model)?;
    Ok(rep.pole_set()?.kappas().to_vec())
}

fn c1_taylor_s_wave() -> Result<Outcome> {
    let model = ErfModel::taylor(PartialWave(0), vec![0.04219, 1.30386, 0.06883])?;
    let roots = real_roots(&model)?;
    let gap = max_gap(&roots, &[-0.0401, -4.6917, 0.8365, 3.8953]);
    let ere = ere_parameters(&model)?;
    let ok = gap <= 1e-3 && (ere.a + 23.70).abs() <= 0.01 && (ere.r - 2.608).abs() <= 1e-3;
    Ok((ok, format!("poles {roots:.4?} (max dev {gap:.1e}), a = {:.3} fm, r = {:.4} fm", ere.a, ere.r)))
}

fn c2_taylor_d_wave() -> Result<Outcome> {
    let ere = EreParameters {
        a: 0.88762,
        r: 15.33061,
        shape: -0.00246,
        shape_defined: true,
    };
    let model = ErfModel::from_ere_with_convention(PartialWave(2), &ere, LengthConvention::Flipped)?;
    let roots = real_roots(&model)?;
    let gap = max_gap(&roots, &D_POLES);
    Ok((gap <= 5e-3, format!("poles {roots:.4?} (max dev {gap:.1e})")))
}

fn c3_d_wave_sum_rules() -> Result<Outcome> {
    let res = sum_rule_residuals(&d_set());
    let ok = res.len() == 2 && res[0].abs() <= 5e-3 && res[1].abs() <= 1e-2;
    Ok((ok, format!("sum 1/kappa = {:.2e} fm, sum 1/kappa^3 = {:.2e} fm^3", res[0], res[1])))
}

fn c4_pade_round_trip() -> Result<Outcome> {
    let model = erf_from_poles(&s_set())?;
    let expected_p = [0.0422, 1.3793, 2.0105, -0.058];
    let expected_q = [1.0, 1.5986, -0.6164];
    let rel = |got: &[f64], want: &[f64]| {
        if got.len() != want.len() {
            return f64::INFINITY;
        }
        got.iter().zip(want).fold(0.0, |m, (g, w)| f64::max(m, ((g - w) / w).abs()))
    };
    let worst = rel(model.numerator(), &expected_p).max(rel(model.denominator(), &expected_q));
    Ok((
        worst <= 0.05,
        format!(
            "P = {:.4?}, Q = {:.4?} (max rel dev {:.2}%)",
            model.numerator(),
            model.denominator(),
            100.0 * worst
        ),
    ))
}

fn c5_high_energy_limits() -> Result<Outcome> {
    let s = delta_from_poles(&s_set(), &[100.0])[0];
    let d = delta_from_poles(&d_set(), &[100.0])[0];
    let ok = (s + PI).abs() <= 1e-3
        && (d - FRAC_PI_2).abs() <= 1e-3
        && s_set().high_energy_limit() == -PI
        && d_set().high_energy_limit() == FRAC_PI_2;
    Ok((
        ok,
        format!(
            "at k = 100: delta_S + pi = {:.4}, delta_D - pi/2 = {:.4} rad (sum of atan(kappa/k))",
            s + PI,
            d - FRAC_PI_2
        ),
    ))
}

/// The approach to the limit is `delta = delta_inf + sum_j atan(kappa_j / k)`,
/// about `sum kappa / k`; 1e-3 rad at k = 100 fm^-1 would need `|sum kappa| < 0.1`.
fn c5_explained() -> Result<Outcome> {
    let mut ok = true;
    let mut msg = Vec::new();
    for set in [s_set(), d_set()] {
        let limit = set.high_energy_limit();
        let correction: f64 = set.kappas().iter().map(|&c| (c / 100.0).atan()).sum();
        let at_100 = delta_from_poles(&set, &[100.0])[0];
        let far = delta_from_poles(&set, &[1e5])[0];
        ok &= (at_100 - limit - correction).abs() <= 1e-12 && (far - limit).abs() <= 1e-3;
        msg.push(format!("{}: |delta(1e5) - limit| = {:.1e}", set.l(), (far - limit).abs()));
    }
    Ok((ok, msg.join(", ")))
}

fn c6_susy_exactness() -> Result<Outcome> {
    let c = PhysicalConstants::default();
    let k = grid(1.0, 350.0, 50)
        .into_iter()
        .map(|e| k_from_elab(e, &c))
        .collect::<Result<Vec<_>>>()?;
    let mut ok = true;
    let mut msg = Vec::new();
    for (name, set) in [("S", s_set()), ("D", d_set())] {
        let t = Instant::now();
        let rep = verify_inversion(&set, &k, &SolverConfig::default())?;
        let secs = t.elapsed().as_secs_f64();
        let dev = rep.max_abs.to_degrees();
        ok &= dev < 0.1 && secs < 60.0;
        msg.push(format!("{name}: max dev {dev:.1e} deg in {secs:.1} s"));
    }
    Ok((ok, msg.join(", ")))
}

fn c7_compact_forms() -> Result<Outcome> {
    let set = s_set();
    let generic = build_potential(&set)?;
    let six = s_wave_compact_potential(&set, CompactForm::Wronskian)?;
    let four = s_wave_compact_potential(&set, CompactForm::Reduced)?;
    let (mut forms, mut engine) = (0.0_f64, 0.0_f64);
    for r in grid(0.1, 20.0, 500) {
        let (g, a, b) = (generic.eval(r)?, six.eval(r)?, four.eval(r)?);
        forms = forms.max(((a - b) / a).abs());
        engine = engine.max(((a - g) / g).abs()).max(((b - g) / g).abs());
    }
    Ok((
        forms <= 1e-8 && engine <= 1e-8,
        format!("6x6 vs 4x4 {forms:.1e}, compact vs generic {engine:.1e} (relative)"),
    ))
}

fn c8_singularity_law() -> Result<Outcome> {
    let s = build_potential(&s_set())?;
    let d = build_potential(&d_set())?;
    let cs = s.origin_coefficient()?;
    let cd = d.central_origin_coefficient()?;
    let ok = s.nu() == 2 && d.nu() == 1 && (cs - 6.0).abs() <= 0.06 && (cd + 4.0).abs() <= 0.04;
    Ok((ok, format!("S: nu = {}, r^2 V -> {cs:.6}; D: nu = {}, r^2 V_central -> {cd:.6}", s.nu(), d.nu())))
}

fn c9_one_pole() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for kappa in [0.3, 1.0, 3.0] {
        let pot = build_potential(&PoleSet::new(PartialWave(0), vec![kappa], Provenance::Manual)?)?;
        for r in grid(0.05, 15.0, 300) {
            let sh = (kappa * r).sinh();
            let exact = 2.0 * kappa * kappa / (sh * sh);
            worst = worst.max(((pot.eval(r)? - exact) / exact).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max relative deviation {worst:.1e}")))
}

fn c10_fit_quality() -> Result<Outcome> {
    let data = BundledDataset::Np1S0.load()?;
    let (_, pade) = fit_erf(
        &data,
        &FitConfig {
            kind: ErfKind::Pade,
            orders: (3, 2),
            ..FitConfig::default()
        },
    )?;
    let (_, taylor) = fit_erf(
        &data,
        &FitConfig {
            kind: ErfKind::Taylor,
            orders: (2, 0),
            ..FitConfig::default()
        },
    )?;
    let mut above = Vec::new();
    let mut low = 0.0_f64;
    for (p, res) in data.points().iter().zip(&taylor.residuals_deg) {
        if p.e_lab > 50.0 {
            above.push(res.abs());
        } else if p.e_lab <= 30.0 {
            low = low.max(res.abs());
        }
    }
    let min_above = above.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = pade.rms_deg <= 1.0 && !above.is_empty() && min_above > 1.0;
    Ok((
        ok,
        format!(
            "[3/2] RMS {:.3} deg; Taylor max {low:.2} deg up to 30 MeV, min {min_above:.2} deg above 50 MeV",
            pade.rms_deg
        ),
    ))
}

fn order_estimate(set: &PoleSet, k: f64) -> Result<f64> {
    let pot = build_potential(set)?;
    let delta = |step: f64| -> Result<f64> {
        let cfg = SolverConfig {
            step,
            ..SolverConfig::default()
        };
        Ok(phase_shift_from_potential(&pot, &[k], &cfg)?[0])
    };
    let (a, b, c) = (delta(0.01)?, delta(0.005)?, delta(0.0025)?);
    Ok(((a - b) / (b - c)).abs().log2())
}

fn c11_property_suites() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // erf <-> poles
    let mut round_trip = 0.0_f64;
    let p_wave = [0.7, -1.9, 3.1, 1.0 / (1.0 / 1.9 - 1.0 / 0.7 - 1.0 / 3.1)];
    for (l, ks) in [(0, S_POLES.to_vec()), (0, vec![-0.3, 0.9, 2.2]), (1, p_wave.to_vec())] {
        let set = PoleSet::new(PartialWave(l), ks, Provenance::Manual)?;
        let back = real_roots(&erf_from_poles(&set)?)?;
        round_trip = round_trip.max(
            set.kappas()
                .iter()
                .zip(&back)
                .fold(0.0, |m, (a, b)| f64::max(m, ((a - b) / a).abs())),
        );
    }

    // |S| = 1
    let mut unitarity = 0.0_f64;
    let models = [
        erf_from_poles(&s_set())?,
        ErfModel::taylor(PartialWave(0), vec![0.04219, 1.30386, 0.06883])?,
        ErfModel::pade(PartialWave(2), vec![1.1, -0.4, 0.2, 0.05], vec![1.0, 0.3])?,
    ];
    for m in &models {
        for k in grid(0.01, 5.0, 200) {
            if let Ok(s) = s_matrix_from_model(m, k) {
                unitarity = unitarity.max((s.norm() - 1.0).abs());
            }
        }
    }

    // normalization and permutation
    let mut invariance = 0.0_f64;
    for set in [s_set(), d_set()] {
        let sols = set
            .kappas()
            .iter()
            .map(|&k| FactorizationSolution::new(k, set.l()))
            .collect::<Result<Vec<_>>>()?;
        for r in [0.05, 0.3, 1.0, 3.0, 8.0] {
            let base = wronskian_bundle(&sols, r)?.d2;
            let norms: Vec<f64> = sols
                .iter()
                .map(|_| {
                    let sign = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                    sign * 10f64.powf(rng.gen_range(-3.0..3.0))
                })
                .collect();
            let scaled = wronskian_bundle_normalized(&sols, &norms, r)?.d2;
            let mut perm = sols.clone();
            perm.shuffle(&mut rng);
            let permuted = wronskian_bundle(&perm, r)?.d2;
            invariance = invariance
                .max(((scaled - base) / base).abs())
                .max(((permuted - base) / base).abs());
        }
    }

    // step halving
    let orders = [
        order_estimate(&PoleSet::new(PartialWave(0), vec![1.0], Provenance::Manual)?, 1.0)?,
        order_estimate(&s_set(), 1.0)?,
        order_estimate(&d_set(), 2.05)?,
    ];
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);

    // weight scaling
    let truth = [-0.04, 0.8, 3.0];
    let c = PhysicalConstants::default();
    let energies = grid(2.0, 300.0, 15);
    let ks = energies
        .iter()
        .map(|&e| k_from_elab(e, &c))
        .collect::<Result<Vec<_>>>()?;
    let clean = delta_from_kappas(&truth, &ks);
    let dataset = |scale: f64| {
        let pts = energies
            .iter()
            .zip(&clean)
            .enumerate()
            .map(|(i, (&e, &d))| PhaseShiftPoint {
                e_lab: e,
                delta: d + 1e-3 * ((i * 7 % 5) as f64 - 2.0),
                sigma: Some(scale * (0.01 + 0.002 * i as f64)),
            })
            .collect();
        PhaseShiftDataset::new(PartialWave(0), pts)
    };
    let (base, scaled) = (dataset(1.0)?, dataset(3.7)?);
    let pole_cfg = FitConfig {
        weights: WeightScheme::BySigma,
        initial_guess: InitialGuess::Manual(vec![-0.05, 0.7, 2.5]),
        ..FitConfig::default()
    };
    let erf_cfg = FitConfig {
        kind: ErfKind::Pade,
        orders: (2, 1),
        weights: WeightScheme::BySigma,
        ..FitConfig::default()
    };
    let (a, _) = fit_poles(&base, 3, &pole_cfg)?;
    let (b, _) = fit_poles(&scaled, 3, &pole_cfg)?;
    let (ma, _) = fit_erf(&base, &erf_cfg)?;
    let (mb, _) = fit_erf(&scaled, &erf_cfg)?;
    let rel = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0, |m, (p, q)| f64::max(m, ((p - q) / p).abs()));
    let weights = rel(a.kappas(), b.kappas())
        .max(rel(ma.numerator(), mb.numerator()))
        .max(rel(ma.denominator(), mb.denominator()));

    let ok = round_trip <= 1e-8
        && unitarity <= 1e-10
        && invariance <= 1e-10
        && min_order >= 3.95
        && weights <= 1e-10;
    Ok((
        ok,
        format!(
            "round trip {round_trip:.1e}, |S|-1 {unitarity:.1e}, invariance {invariance:.1e}, \
             step order {orders:.3?}, weight scaling {weights:.1e}"
        ),
    ))
}

#[test]
fn acceptance() {
    type Check = fn() -> Result<Outcome>;
    // A criterion with an explanation check is unattainable as stated; it
    // still prints FAIL, and the explanation must hold instead.
    let criteria: [(&str, Check, Option<Check>); 11] = [
        ("Taylor pole extraction, 1S0", c1_taylor_s_wave, None),
        ("Taylor pole extraction, 1D2", c2_taylor_d_wave, None),
        ("D-wave sum rules", c3_d_wave_sum_rules, None),
        ("Pade round trip, 1S0", c4_pade_round_trip, None),
        ("high-energy phase limits within 1e-3 rad at k = 100", c5_high_energy_limits, Some(c5_explained)),
        ("forward-solved phases match the pole sum", c6_susy_exactness, None),
        ("compact S-wave forms", c7_compact_forms, None),
        ("singularity law at the origin", c8_singularity_law, None),
        ("one-pole closed form", c9_one_pole, None),
        ("fit quality on bundled 1S0 data", c10_fit_quality, None),
        ("property suites", c11_property_suites, None),
    ];
    let run = |check: Check| match check() {
        Ok(o) => o,
        Err(e) => (false, format!("error: {e}")),
    };
    let mut failed = Vec::new();
    for (i, (name, check, explained)) in criteria.iter().enumerate() {
        let (ok, detail) = run(*check);
        let line = format!("{} {:>2}. {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
        let _ = writeln!(std::io::stderr(), "{line}");
        if ok {
            continue;
        }
        match explained {
            Some(explain) => {
                let (holds, why) = run(*explain);
                let _ = writeln!(
                    std::io::stderr(),
                    "        known: limit approached as sum atan(kappa/k); {why}"
                );
                if !holds {
                    failed.push(i + 1);
                }
            }
            None => failed.push(i + 1),
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
