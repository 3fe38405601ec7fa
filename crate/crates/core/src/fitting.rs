//! Fits to measured phase shifts: linearized least squares for Taylor/Padé
//! effective-range functions, and a damped least-squares fit of the pole
//! parameters of the arctangent sum with the threshold sum rules as penalties.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::erf::{delta_from_model, effective_range_function, ErfKind, ErfModel, PhaseShiftDataset};
use crate::error::{Error, Result};
use crate::kinematics::{PartialWave, PhysicalConstants};
use crate::poles::{
    delta_from_kappas, delta_gradient, extract_poles, sum_rule_residuals_of, validate_pole_set, PoleExtractionReport,
    PoleSet, Provenance, SumRuleTolerance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// K-variance for effective-range fits, by-sigma for pole fits when the
    /// data carry uncertainties, uniform otherwise.
    #[default]
    Auto,
    Uniform,
    /// `1 / sigma_delta^2`.
    BySigma,
    /// `1 / sigma_K^2` with `sigma_K = k^(2l+1) sigma_delta / sin^2(delta)`.
    KVariance,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Poles extracted from an effective-range fit of matching degree.
    #[default]
    FromErf,
    /// Alternating signs on a logarithmic grid of magnitudes.
    CoarseGrid,
    Manual(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltySchedule {
    pub initial: f64,
    pub factor: f64,
    pub stages: usize,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            factor: 10.0,
            stages: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub kind: ErfKind,
    /// `(M, N)`; for Taylor models `N` is ignored.
    pub orders: (usize, usize),
    pub weights: WeightScheme,
    pub max_iterations: usize,
    /// Relative parameter step below which an iteration counts as converged.
    pub tolerance: f64,
    pub penalty: PenaltySchedule,
    /// Required `|sum_j kappa_j^-alpha|` for returned pole sets.
    pub constraint_tolerance: f64,
    pub initial_guess: InitialGuess,
    /// Poles held at given values in pole fits; they count towards `n`, and a
    /// manual initial guess then lists only the free poles.
    pub fixed_poles: Vec<f64>,
    /// Smallest relative gap `|a - b| / max(|a|, |b|)` kept between same-sign
    /// poles; 0 disables the separation penalty.
    pub min_separation: f64,
    /// Extra pole-fit starts from perturbed initial guesses.
    pub restarts: usize,
    pub seed: u64,
    pub constants: PhysicalConstants,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kind: ErfKind::Pade,
            orders: (3, 2),
            weights: WeightScheme::Auto,
            max_iterations: 5000,
            tolerance: 1e-10,
            penalty: PenaltySchedule::default(),
            constraint_tolerance: 1e-6,
            initial_guess: InitialGuess::FromErf,
            fixed_poles: Vec::new(),
            min_separation: 0.05,
            restarts: 0,
            seed: 0,
            constants: PhysicalConstants::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// ERF fits: numerator then `q_1..q_N`. Pole fits: sorted `kappa_j`.
    pub parameters: Vec<f64>,
    /// Model minus data per point (degrees); excluded points are absent.
    pub residuals_deg: Vec<f64>,
    pub rms_deg: f64,
    /// Sum-rule residuals `sum_j kappa_j^-alpha`, alpha = 1, 3, ... (pole fits).
    pub constraint_residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every accepted step of the final stage.
    pub objective_history: Vec<f64>,
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Indices of data points left out of the fit.
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter_mut().for_each(|x| *x /= mean);
    w
}

fn sigma_or_default(data: &PhaseShiftDataset, warnings: &mut Vec<String>) -> Vec<f64> {
    if !data.has_sigmas() {
        warnings.push("dataset has no uncertainties; unit uncertainties assumed".into());
    }
    data.points().iter().map(|p| p.sigma.unwrap_or(1.0)).collect()
}

/// Linearized least-squares fit of `K = P(k^2)/Q(k^2)`.
///
/// Minimizes `sum_i w_i (P(k_i^2) - K_i Q(k_i^2))^2 / Q_prev(k_i^2)^2` with
/// `q_0 = 1`, repeating with the previous denominator until the coefficients
/// settle.
pub fn fit_erf(data: &PhaseShiftDataset, cfg: &FitConfig) -> Result<(ErfModel, FitReport)> {
    let l = data.l;
    let (m, n) = match cfg.kind {
        ErfKind::Taylor => (cfg.orders.0, 0),
        ErfKind::Pade => cfg.orders,
    };
    let mut warnings = Vec::new();
    if m as i64 - n as i64 != l.l() as i64 + 1 {
        warnings.push(format!(
            "orders [{m}/{n}] do not satisfy M - N = l + 1 = {}; the model misses the delta ~ 1/k high-energy behaviour",
            l.l() + 1
        ));
    }
    let ks = data.wave_numbers(&cfg.constants)?;
    let deltas = data.deltas();
    let mut excluded = Vec::new();
    let mut idx = Vec::new();
    let mut kvals = Vec::new();
    for (i, (&k, &d)) in ks.iter().zip(&deltas).enumerate() {
        match effective_range_function(k, d, l) {
            Ok(kv) if kv.is_finite() => {
                idx.push(i);
                kvals.push(kv);
            }
            _ => {
                excluded.push(i);
                warnings.push(format!("point {i} has delta = 0 mod pi; K is undefined there and the point is excluded"));
            }
        }
    }
    let p = m + 1 + n;
    if idx.len() < p {
        return Err(Error::IllConditioned(format!(
            "{} usable points for {p} coefficients; lower the orders",
            idx.len()
        )));
    }
    let sigmas = match cfg.weights {
        WeightScheme::Uniform => None,
        _ => Some(sigma_or_default(data, &mut warnings)),
    };
    let raw_w: Vec<f64> = idx
        .iter()
        .map(|&i| match (cfg.weights, &sigmas) {
            (WeightScheme::Uniform, _) | (_, None) => 1.0,
            (WeightScheme::BySigma, Some(s)) => 1.0 / (s[i] * s[i]),
            (WeightScheme::KVariance | WeightScheme::Auto, Some(s)) => {
                let sin = deltas[i].sin();
                let sk = ks[i].powi(l.k_power()) * s[i] / (sin * sin);
                1.0 / (sk * sk)
            }
        })
        .collect();
    let w = normalized(raw_w);
    let x2: Vec<f64> = idx.iter().map(|&i| ks[i] * ks[i]).collect();

    let mut q_prev = vec![1.0_f64; idx.len()];
    let mut coef = vec![0.0_f64; p];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_solve = None;
    for it in 0..cfg.max_iterations.max(1) {
        iterations = it + 1;
        let q_floor = q_prev.iter().fold(0.0_f64, |a, q| a.max(q.abs())) * 1e-12;
        let mut a = DMatrix::<f64>::zeros(idx.len(), p);
        let mut b = DVector::<f64>::zeros(idx.len());
        for row in 0..idx.len() {
            let s = w[row].sqrt() / q_prev[row].abs().max(q_floor);
            let mut pw = 1.0;
            for c in 0..=m {
                a[(row, c)] = s * pw;
                pw *= x2[row];
            }
            let mut pw = x2[row];
            for c in 0..n {
                a[(row, m + 1 + c)] = -s * kvals[row] * pw;
                pw *= x2[row];
            }
            b[row] = s * kvals[row];
        }
        let (sol, cov_unscaled) = solve_least_squares(&a, &b)?;
        let resid = &a * &sol - &b;
        history.push(resid.norm_squared());
        let step = sol
            .iter()
            .zip(&coef)
            .map(|(x, y)| (x - y).abs() / x.abs().max(1e-300))
            .fold(0.0_f64, f64::max);
        coef = sol.iter().copied().collect();
        last_solve = Some((cov_unscaled, resid.norm_squared()));
        for (row, q) in q_prev.iter_mut().enumerate() {
            *q = 1.0 + (0..n).map(|c| coef[m + 1 + c] * x2[row].powi(c as i32 + 1)).sum::<f64>();
        }
        if n == 0 || step < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!("reweighting did not settle within {iterations} iterations"));
    }
    let numerator = coef[..=m].to_vec();
    let mut denominator = vec![1.0];
    denominator.extend_from_slice(&coef[m + 1..]);
    let model = match cfg.kind {
        ErfKind::Taylor => ErfModel::taylor(l, numerator)?,
        ErfKind::Pade => ErfModel::pade(l, numerator, denominator)?,
    };

    let fit_k: Vec<f64> = idx.iter().map(|&i| ks[i]).collect();
    let model_delta = delta_from_model(&model, &fit_k)?;
    let residuals_deg: Vec<f64> = model_delta
        .iter()
        .zip(&idx)
        .map(|(d, &i)| (d - deltas[i]).to_degrees())
        .collect();
    let covariance = last_solve.and_then(|(cov, ss)| {
        let dof = idx.len().checked_sub(p).filter(|&d| d > 0)?;
        let s2 = ss / dof as f64;
        Some((0..p).map(|i| (0..p).map(|j| s2 * cov[(i, j)]).collect()).collect())
    });
    let report = FitReport {
        parameters: coef,
        rms_deg: rms(&residuals_deg),
        residuals_deg,
        constraint_residuals: Vec::new(),
        converged,
        iterations,
        objective_history: history,
        covariance,
        excluded,
        warnings,
    };
    Ok((model, report))
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Least squares by SVD with column equilibration. Returns the solution and
/// `(A^T A)^-1`.
fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = a.ncols();
    let scales: Vec<f64> = (0..p)
        .map(|c| {
            let nrm = a.column(c).norm();
            if nrm > 0.0 {
                1.0 / nrm
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (c, s) in scales.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*s);
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > smax * 1e-13) {
        return Err(Error::IllConditioned(format!(
            "normal system is rank deficient (singular values {smin:e} / {smax:e}); lower the orders"
        )));
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let utb = u.transpose() * b;
    let mut y = DVector::<f64>::zeros(p);
    for i in 0..p {
        y[i] = utb[i] / sv[i];
    }
    let mut x = vt.transpose() * y;
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            cov[(i, j)] = (0..p).map(|s| vt[(s, i)] * vt[(s, j)] / (sv[s] * sv[s])).sum::<f64>()
                * scales[i]
                * scales[j];
        }
    }
    for (i, s) in scales.iter().enumerate() {
        x[i] *= s;
    }
    Ok((x, cov))
}

/// ERF orders whose pole polynomial has degree `n`.
pub fn erf_orders_for_poles(n: usize, l: PartialWave) -> Option<(ErfKind, usize, usize)> {
    let l = l.l() as usize;
    if n % 2 == 1 {
        let big = n.checked_sub(2 * l + 1)?;
        let nn = big / 2;
        let mm = nn + l;
        Some((if nn == 0 { ErfKind::Taylor } else { ErfKind::Pade }, mm, nn))
    } else {
        let mm = n / 2;
        if n < 2 * l + 1 {
            return None;
        }
        match mm.checked_sub(l + 1) {
            Some(nn) if nn > 0 => Some((ErfKind::Pade, mm, nn)),
            _ => Some((ErfKind::Taylor, mm, 0)),
        }
    }
}

fn coarse_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let mag = 0.1 * (50.0_f64).powf(if n > 1 { j as f64 / (n - 1) as f64 } else { 0.5 });
            if j % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

struct PoleProblem<'a> {
    l: PartialWave,
    k: &'a [f64],
    delta: &'a [f64],
    sqrt_w: Vec<f64>,
    fixed: &'a [f64],
    min_sep: f64,
}

const SEPARATION_WEIGHT: f64 = 1e6;

impl PoleProblem<'_> {
    fn n_data(&self) -> usize {
        self.k.len()
    }

    /// Same-sign pairs closer than the minimum gap: `(i, j, violation)`.
    fn gap_violations(&self, all: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        if self.min_sep <= 0.0 {
            return out;
        }
        for a in 0..all.len() {
            for b in a + 1..all.len() {
                if all[a].signum() != all[b].signum() {
                    continue;
                }
                let g = self.min_sep - (all[a] - all[b]).abs() / all[a].abs().max(all[b].abs());
                if g > 0.0 {
                    out.push((a, b, g));
                }
            }
        }
        out
    }

    fn full(&self, free: &[f64]) -> Vec<f64> {
        free.iter().chain(self.fixed).copied().collect()
    }

    /// Residual vector (data then sqrt(mu) * sum rules) and its Jacobian with
    /// respect to the free poles.
    fn residuals(&self, kappas: &[f64], mu: f64, jac: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let nd = self.n_data();
        let nc = if mu > 0.0 { self.l.l() as usize } else { 0 };
        let np = kappas.len();
        let all = self.full(kappas);
        let gaps = self.gap_violations(&all);
        let ng = gaps.len();
        let model = delta_from_kappas(&all, self.k);
        let mut r = DVector::<f64>::zeros(nd + nc + ng);
        for i in 0..nd {
            r[i] = self.sqrt_w[i] * (model[i] - self.delta[i]);
        }
        let sm = mu.sqrt();
        let sums = sum_rule_residuals_of(&all, self.l);
        for c in 0..nc {
            r[nd + c] = sm * sums[c];
        }
        let sg = SEPARATION_WEIGHT.sqrt();
        for (g, gap) in gaps.iter().enumerate() {
            r[nd + nc + g] = sg * gap.2;
        }
        let j = jac.then(|| {
            let mut j = DMatrix::<f64>::zeros(nd + nc + ng, np);
            for i in 0..nd {
                for (c, g) in delta_gradient(kappas, self.k[i]).enumerate() {
                    j[(i, c)] = self.sqrt_w[i] * g;
                }
            }
            for c in 0..nc {
                let alpha = 2 * c as i32 + 1;
                for (p, &kap) in kappas.iter().enumerate() {
                    j[(nd + c, p)] = -sm * alpha as f64 * kap.powi(-alpha - 1);
                }
            }
            for (g, &(a, b, _)) in gaps.iter().enumerate() {
                // g = s - |x_a - x_b| / m, m = max(|x_a|, |x_b|)
                let (xa, xb) = (all[a], all[b]);
                let m = xa.abs().max(xb.abs());
                let d = (xa - xb).abs();
                let sd = (xa - xb).signum();
                let (dma, dmb) = if xa.abs() >= xb.abs() { (xa.signum(), 0.0) } else { (0.0, xb.signum()) };
                if a < np {
                    j[(nd + nc + g, a)] = sg * (-sd / m + d * dma / (m * m));
                }
                if b < np {
                    j[(nd + nc + g, b)] = sg * (sd / m + d * dmb / (m * m));
                }
            }
            j
        });
        (r, j)
    }
}

struct LmOutcome {
    kappas: Vec<f64>,
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
}

/// Levenberg–Marquardt with Marquardt scaling. Steps that move a pole through
/// zero are rejected like uphill steps.
fn levenberg_marquardt(prob: &PoleProblem, start: &[f64], mu: f64, cfg: &FitConfig) -> LmOutcome {
    let mut x = start.to_vec();
    let (mut r, mut j) = prob.residuals(&x, mu, true);
    let mut obj = r.norm_squared();
    let mut history = vec![obj];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let jm = j.take().expect("jacobian present");
        let jtj = jm.transpose() * &jm;
        let g = jm.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let crosses = trial
                .iter()
                .zip(&x)
                .any(|(t, o)| t.signum() != o.signum() || t.abs() < 1e-8 || !t.is_finite());
            if !crosses {
                let (rt, _) = prob.residuals(&trial, mu, false);
                let ot = rt.norm_squared();
                if ot <= obj {
                    let rel = step
                        .iter()
                        .zip(&trial)
                        .map(|(s, t)| s.abs() / t.abs())
                        .fold(0.0_f64, f64::max);
                    x = trial;
                    obj = ot;
                    history.push(obj);
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    if rel < cfg.tolerance {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = true;
        }
        let (rn, jn) = prob.residuals(&x, mu, true);
        r = rn;
        j = jn;
        if converged {
            break;
        }
    }
    LmOutcome {
        kappas: x,
        converged,
        iterations,
        history,
    }
}

/// Minimum-norm Newton steps onto `sum_j kappa_j^-alpha = 0`.
fn project_onto_sum_rules(kappas: &mut [f64], fixed: &[f64], l: PartialWave) -> bool {
    let nc = l.l() as usize;
    if nc == 0 {
        return true;
    }
    let sums = |k: &[f64]| {
        let all: Vec<f64> = k.iter().chain(fixed).copied().collect();
        sum_rule_residuals_of(&all, l)
    };
    for _ in 0..100 {
        let s = sums(kappas);
        let scale: Vec<f64> = (0..nc)
            .map(|c| {
                kappas
                    .iter()
                    .chain(fixed)
                    .map(|k| k.abs().powi(-(2 * c as i32 + 1)))
                    .sum::<f64>()
            })
            .collect();
        if s.iter().zip(&scale).all(|(v, sc)| v.abs() <= 1e-14 * sc) {
            return true;
        }
        let jc = DMatrix::from_fn(nc, kappas.len(), |c, p| {
            let alpha = 2 * c as i32 + 1;
            -(alpha as f64) * kappas[p].powi(-alpha - 1)
        });
        let jjt = &jc * jc.transpose();
        let Some(y) = jjt.lu().solve(&DVector::from_vec(s)) else {
            return false;
        };
        let step = -(jc.transpose() * y);
        for (k, d) in kappas.iter_mut().zip(step.iter()) {
            *k += d;
        }
        if kappas.iter().any(|k| !k.is_finite() || *k == 0.0) {
            return false;
        }
    }
    sums(kappas).iter().all(|v| v.abs() < 1e-10)
}

/// Real seeds for a complex pair `a +- ib`: two poles on the side of `a`
/// bracketing `|a + ib|`.
fn real_pair_seed(re: f64, im: f64) -> [f64; 2] {
    let m = re.hypot(im) * if re < 0.0 { -1.0 } else { 1.0 };
    [0.9 * m, 1.1 * m]
}

/// Real pole seeds from an extraction: real roots as they are, each complex
/// pair replaced by two real poles near its modulus.
pub fn seed_from_extraction(rep: &PoleExtractionReport) -> Vec<f64> {
    let mut ks = rep.real_poles.clone();
    for (re, im) in rep.complex_poles.iter().filter(|(_, im)| *im > 0.0) {
        ks.extend(real_pair_seed(*re, *im));
    }
    ks
}

/// Drops, for each fixed pole, the nearest seed pole.
fn remove_fixed(mut seed: Vec<f64>, fixed: &[f64]) -> Vec<f64> {
    for f in fixed {
        if let Some((i, _)) = seed
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
        {
            seed.remove(i);
        }
    }
    seed
}

fn initial_poles(data: &PhaseShiftDataset, n: usize, cfg: &FitConfig, warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let free = n - cfg.fixed_poles.len();
    match &cfg.initial_guess {
        InitialGuess::Manual(v) => {
            if v.len() != free {
                return Err(Error::InvalidInput(format!(
                    "initial guess has {} poles, expected {free} free poles",
                    v.len()
                )));
            }
            if v.iter().any(|k| *k == 0.0 || !k.is_finite()) {
                return Err(Error::InvalidInput("initial poles must be finite and nonzero".into()));
            }
            Ok(v.clone())
        }
        InitialGuess::CoarseGrid => Ok(remove_fixed(coarse_grid(n), &cfg.fixed_poles)),
        InitialGuess::FromErf => {
            let mut from_erf = || -> Result<Vec<f64>> {
                let (kind, m, nn) = erf_orders_for_poles(n, data.l)
                    .ok_or_else(|| Error::InvalidInput(format!("no ERF orders give {n} poles")))?;
                let sub = FitConfig {
                    kind,
                    orders: (m, nn),
                    ..cfg.clone()
                };
                let (model, _) = fit_erf(data, &sub)?;
                let rep = extract_poles(&model)?;
                if rep.has_complex() {
                    warnings.push("effective-range seed has complex poles; each pair seeds two real poles".into());
                }
                let ks = seed_from_extraction(&rep);
                if ks.len() != n || ks.contains(&0.0) {
                    return Err(Error::InvalidInput("seed model has a different pole count".into()));
                }
                Ok(remove_fixed(ks, &cfg.fixed_poles))
            };
            from_erf().or_else(|e| {
                warnings.push(format!("effective-range seed unavailable ({e}); using a coarse grid"));
                Ok(remove_fixed(coarse_grid(n), &cfg.fixed_poles))
            })
        }
    }
}

/// Fits `n` real poles to the phase shifts, `delta(k) = -sum_j arctan(k/kappa_j)`.
///
/// For l > 0 the sum rules enter as a penalty whose weight grows by
/// `penalty.factor` per stage; the result is then projected onto the
/// constraint surface.
pub fn fit_poles(data: &PhaseShiftDataset, n: usize, cfg: &FitConfig) -> Result<(PoleSet, FitReport)> {
    if n <= cfg.fixed_poles.len() {
        return Err(Error::InvalidInput(format!(
            "pole count {n} leaves no free poles besides {} fixed ones",
            cfg.fixed_poles.len()
        )));
    }
    if cfg.fixed_poles.iter().any(|k| *k == 0.0 || !k.is_finite()) {
        return Err(Error::InvalidInput("fixed poles must be finite and nonzero".into()));
    }
    let l = data.l;
    let mut warnings = Vec::new();
    let ks = data.wave_numbers(&cfg.constants)?;
    let deltas = data.deltas();
    let raw_w: Vec<f64> = match cfg.weights {
        WeightScheme::Uniform => vec![1.0; ks.len()],
        WeightScheme::Auto if !data.has_sigmas() => vec![1.0; ks.len()],
        WeightScheme::KVariance => {
            warnings.push("K-variance weights do not apply to pole fits; using 1/sigma^2".into());
            sigma_or_default(data, &mut warnings).iter().map(|s| 1.0 / (s * s)).collect()
        }
        _ => sigma_or_default(data, &mut warnings).iter().map(|s| 1.0 / (s * s)).collect(),
    };
    let prob = PoleProblem {
        l,
        k: &ks,
        delta: &deltas,
        sqrt_w: normalized(raw_w).iter().map(|w| w.sqrt()).collect(),
        fixed: &cfg.fixed_poles,
        min_sep: cfg.min_separation,
    };
    let start = initial_poles(data, n, cfg, &mut warnings)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![start.clone()];
    for _ in 0..cfg.restarts {
        starts.push(
            start
                .iter()
                .map(|k| k * (1.0 + 0.2 * (rng.gen::<f64>() - 0.5)))
                .collect(),
        );
    }

    let mut best: Option<(f64, Vec<f64>, LmOutcome)> = None;
    for s in &starts {
        let run = run_stages(&prob, s, cfg);
        let mut kap = run.kappas.clone();
        if !project_onto_sum_rules(&mut kap, &cfg.fixed_poles, l) {
            continue;
        }
        let (r, _) = prob.residuals(&kap, 0.0, false);
        let obj = r.norm_squared();
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, kap, run));
        }
    }
    let (_, free, run) = best.ok_or(Error::SumRuleViolation {
        alpha: 1,
        residual: f64::NAN,
    })?;
    let kappas = prob.full(&free);

    let residuals = sum_rule_residuals_of(&kappas, l);
    if let Some((c, v)) = residuals
        .iter()
        .enumerate()
        .find(|(_, v)| v.abs() > cfg.constraint_tolerance)
    {
        return Err(Error::SumRuleViolation {
            alpha: 2 * c as u32 + 1,
            residual: *v,
        });
    }
    let validation = validate_pole_set(&kappas, l, SumRuleTolerance::STRICT);
    if !validation.valid {
        warnings.extend(validation.issues);
    }
    let mut sorted = kappas.clone();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        if (w[1] - w[0]).abs() <= 1e-3 * w[1].abs().max(w[0].abs()) {
            warnings.push(format!(
                "poles {} and {} nearly coincide; the data do not determine them separately",
                w[0], w[1]
            ));
        }
    }
    if !run.converged {
        warnings.push(format!("pole fit did not converge in {} iterations", run.iterations));
    }
    let set = PoleSet::new(l, kappas, Provenance::DirectFit)?;
    let model = delta_from_kappas(set.kappas(), &ks);
    let residuals_deg: Vec<f64> = model
        .iter()
        .zip(&deltas)
        .map(|(m, d)| (m - d).to_degrees())
        .collect();
    let report = FitReport {
        parameters: set.kappas().to_vec(),
        rms_deg: rms(&residuals_deg),
        residuals_deg,
        constraint_residuals: residuals,
        converged: run.converged,
        iterations: run.iterations,
        objective_history: run.history,
        covariance: None,
        excluded: Vec::new(),
        warnings,
    };
    Ok((set, report))
}

fn run_stages(prob: &PoleProblem, start: &[f64], cfg: &FitConfig) -> LmOutcome {
    if prob.l.l() == 0 {
        return levenberg_marquardt(prob, start, 0.0, cfg);
    }
    let mut x = start.to_vec();
    let mut total = 0;
    let mut mu = cfg.penalty.initial;
    let mut last = None;
    for _ in 0..cfg.penalty.stages.max(1) {
        let out = levenberg_marquardt(prob, &x, mu, cfg);
        total += out.iterations;
        x = out.kappas.clone();
        last = Some(out);
        mu *= cfg.penalty.factor;
    }
    let mut out = last.expect("at least one stage");
    out.iterations = total;
    out
}
