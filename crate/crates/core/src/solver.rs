//! Forward radial solver: Numerov integration of `u'' = (V(r) - k^2) u` and
//! phase-shift extraction by matching to free Riccati–Bessel solutions.
//!
//! The inner region `[r_start, inner_radius]` is integrated in `t = ln r` with
//! `u = sqrt(r) w`, which turns the `nu(nu+1)/r^2` core into a bounded
//! coefficient `w'' = (r^2 (V - k^2) + 1/4) w`. The log grid is chosen so that
//! it lands on the first two points of the uniform outer grid.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::PartialWave;
use crate::poles::{delta_from_poles, PoleSet};
use crate::susy::{build_potential, PotentialModel};

/// A radial potential (fm^-2) including the centrifugal term, with
/// `r^2 V(r) -> nu(nu+1)` at the origin.
pub trait RadialPotential {
    fn l(&self) -> PartialWave;
    fn nu(&self) -> i64;
    fn eval(&self, r: f64) -> Result<f64>;
}

impl RadialPotential for PotentialModel {
    fn l(&self) -> PartialWave {
        PotentialModel::l(self)
    }

    fn nu(&self) -> i64 {
        PotentialModel::nu(self)
    }

    fn eval(&self, r: f64) -> Result<f64> {
        PotentialModel::eval(self, r)
    }
}

/// The bare centrifugal barrier `l(l+1)/r^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreePotential(pub PartialWave);

impl RadialPotential for FreePotential {
    fn l(&self) -> PartialWave {
        self.0
    }

    fn nu(&self) -> i64 {
        self.0.l() as i64
    }

    fn eval(&self, r: f64) -> Result<f64> {
        Ok(self.0.centrifugal() / (r * r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// First radius of the integration (fm).
    pub r_start: f64,
    /// End of the log-variable inner region (fm).
    pub inner_radius: f64,
    /// Initial outer radius (fm); extended while the short-range part of V is
    /// above `tail_threshold` there, or above `match_threshold` at the
    /// innermost default matching radius.
    pub r_max: f64,
    /// Uniform step of the outer grid (fm).
    pub step: f64,
    /// Explicit matching radii `(r1, r2)`; default is `r2 = r_max` and
    /// `r1 = r2 - min(pi/(2k), 10 fm)`.
    pub match_radii: Option<(f64, f64)>,
    pub auto_extend: bool,
    /// `|V - l(l+1)/r^2|` bound (fm^-2) at `r_max` when extending.
    pub tail_threshold: f64,
    /// `|V - l(l+1)/r^2|` bound (fm^-2) required at the matching radii.
    pub match_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            r_start: 1e-3,
            inner_radius: 0.5,
            r_max: 40.0,
            step: 1e-3,
            match_radii: None,
            auto_extend: true,
            tail_threshold: 1e-10,
            match_threshold: 1e-8,
        }
    }
}

/// Largest radius `auto_extend` may reach (fm).
const R_MAX_LIMIT: f64 = 2000.0;
/// Widest default gap between the matching radii (fm).
const MATCH_GAP_MAX: f64 = 10.0;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_start > 0.0
            && self.r_start < self.inner_radius
            && self.inner_radius < self.r_max
            && self.step > 0.0
            && self.step < self.inner_radius
            && self.r_max.is_finite()
            && self.tail_threshold > 0.0
            && self.match_threshold > 0.0;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "solver config needs 0 < r_start < inner_radius < r_max and 0 < step < inner_radius: {self:?}"
            )));
        }
        if let Some((r1, r2)) = self.match_radii {
            if !(self.inner_radius < r1 && r1 < r2) {
                return Err(Error::InvalidInput(format!(
                    "matching radii must satisfy inner_radius < r1 < r2, got ({r1}, {r2})"
                )));
            }
        }
        Ok(())
    }
}

/// Riccati–Bessel functions `j = x j_l(x)`, `n = x y_l(x)` and derivatives.
/// `j n' - j' n = 1`; for l = 0, `j = sin x` and `n = -cos x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiBessel {
    pub j: f64,
    pub n: f64,
    pub dj: f64,
    pub dn: f64,
}

pub fn riccati_bessel(l: PartialWave, x: f64) -> Result<RiccatiBessel> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Riccati-Bessel argument must be > 0, got {x}")));
    }
    let l = l.l() as usize;
    let (s, c) = x.sin_cos();
    // n: upward recurrence is stable for all x
    let mut n_prev = -c;
    let mut n_cur = -c / x - s;
    let mut ns = vec![n_prev, n_cur];
    for m in 1..l {
        let next = (2 * m + 1) as f64 / x * n_cur - n_prev;
        n_prev = n_cur;
        n_cur = next;
        ns.push(next);
    }
    let js = riccati_j_sequence(l + 1, x, s, c);
    let (j, n) = (js[l], ns[l]);
    let (dj, dn) = if l == 0 {
        (c, s)
    } else {
        let lf = l as f64;
        (js[l - 1] - lf / x * j, ns[l - 1] - lf / x * n)
    };
    Ok(RiccatiBessel { j, n, dj, dn })
}

/// `x j_m(x)` for `m = 0..=max_l`.
fn riccati_j_sequence(max_l: usize, x: f64, s: f64, c: f64) -> Vec<f64> {
    if x > max_l as f64 {
        let mut out = vec![s, s / x - c];
        for m in 1..max_l {
            let next = (2 * m + 1) as f64 / x * out[m] - out[m - 1];
            out.push(next);
        }
        out.truncate(max_l + 1);
        return out;
    }
    // Miller: downward from well above max_l, normalized to j_0 or j_1
    let start = max_l + 20 + (x as usize) + (40.0 * x.sqrt().max(1.0)) as usize / 4;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for m in (1..=start).rev() {
        vals[m - 1] = (2 * m + 1) as f64 / x * vals[m] - vals[m + 1];
        if vals[m - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(m - 1) {
                *v *= 1e-250;
            }
        }
    }
    let j1 = s / x - c;
    let scale = if s.abs() >= j1.abs() { s / vals[0] } else { j1 / vals[1] };
    vals.truncate(max_l + 1);
    vals.iter().map(|v| v * scale).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    /// Wave number (fm^-1).
    pub k: f64,
    /// Radii (fm): the inner log grid followed by the uniform outer grid.
    pub r: Vec<f64>,
    /// `u(r)`, arbitrary normalization.
    pub u: Vec<f64>,
    /// Phase shift modulo pi, in `(-pi/2, pi/2]`.
    pub delta: f64,
    pub match_radii: (f64, f64),
}

/// k-independent part of a forward solve: grids and tabulated potential.
#[derive(Debug, Clone)]
pub struct RadialProblem {
    l: PartialWave,
    nu: i64,
    cfg: SolverConfig,
    r_max: f64,
    /// log grid, increasing in r, ending at the first two outer points
    t_step: f64,
    inner_r: Vec<f64>,
    inner_r2v: Vec<f64>,
    /// V at `inner_radius + i * step`
    outer_v: Vec<f64>,
    /// `V(r_start) - nu(nu+1)/r_start^2`
    v_reg0: f64,
}

impl RadialProblem {
    pub fn new<P: RadialPotential + ?Sized>(pot: &P, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let nu = pot.nu();
        if nu < 0 {
            return Err(Error::UnsupportedSingularity { nu });
        }
        let l = pot.l();
        let short_range = |r: f64| -> Result<f64> { Ok(pot.eval(r)? - l.centrifugal() / (r * r)) };

        let mut r_max = cfg.match_radii.map_or(cfg.r_max, |(_, r2)| r2.max(cfg.r_max));
        if cfg.auto_extend {
            // the default r1 can sit MATCH_GAP_MAX inside r_max
            let needs_more = |r: f64| -> Result<bool> {
                Ok(short_range(r)?.abs() >= cfg.tail_threshold
                    || (cfg.match_radii.is_none()
                        && short_range((r - MATCH_GAP_MAX).max(cfg.inner_radius))?.abs() >= cfg.match_threshold))
            };
            while needs_more(r_max)? {
                if r_max >= R_MAX_LIMIT {
                    return Err(Error::Numeric(format!(
                        "potential tail still above {:e} fm^-2 at r = {R_MAX_LIMIT} fm",
                        cfg.tail_threshold
                    )));
                }
                r_max = (1.5 * r_max).min(R_MAX_LIMIT);
            }
        }

        let h = cfg.step;
        let r_in = cfg.inner_radius;
        // log grid: t_i = ln(r_in) - i dt, one log step covers the first outer step
        let dt = (1.0 + h / r_in).ln();
        let n_inner = ((r_in / cfg.r_start).ln() / dt).ceil() as usize;
        let mut inner_r = Vec::with_capacity(n_inner + 2);
        for i in (0..=n_inner).rev() {
            inner_r.push((r_in.ln() - i as f64 * dt).exp());
        }
        inner_r.push(r_in + h);
        let inner_r2v = inner_r
            .iter()
            .map(|&r| Ok(r * r * pot.eval(r)?))
            .collect::<Result<Vec<_>>>()?;

        let n_outer = ((r_max - r_in) / h).round() as usize;
        let outer_v = (0..=n_outer)
            .map(|i| pot.eval(r_in + i as f64 * h))
            .collect::<Result<Vec<_>>>()?;

        let r0 = inner_r[0];
        let core = (nu * (nu + 1)) as f64;
        let v_reg0 = inner_r2v[0] / (r0 * r0) - core / (r0 * r0);
        Ok(Self {
            l,
            nu,
            cfg: *cfg,
            r_max: r_in + n_outer as f64 * h,
            t_step: dt,
            inner_r,
            inner_r2v,
            outer_v,
            v_reg0,
        })
    }

    /// Outer radius actually used (fm).
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    fn outer_r(&self, i: usize) -> f64 {
        self.cfg.inner_radius + i as f64 * self.cfg.step
    }

    /// Integrates at wave number `k`; returns `(r, u)` on the full grid.
    fn integrate(&self, k: f64) -> (Vec<f64>, Vec<f64>) {
        let k2 = k * k;
        let dt2 = self.t_step * self.t_step / 12.0;
        let nu = self.nu as f64;
        let a = (self.v_reg0 - k2) / (2.0 * (2.0 * nu + 3.0));
        let frob = |r: f64| r.powf(nu + 0.5) * (1.0 + a * r * r);

        // inner: w = u / sqrt(r), w'' = g w in t
        let g: Vec<f64> = self
            .inner_r
            .iter()
            .zip(&self.inner_r2v)
            .map(|(&r, &r2v)| r2v - r * r * k2 + 0.25)
            .collect();
        let m = self.inner_r.len();
        let mut w = vec![0.0; m];
        w[0] = frob(self.inner_r[0]);
        w[1] = frob(self.inner_r[1]);
        numerov(&mut w, &g, dt2);
        let mut r_all: Vec<f64> = self.inner_r[..m - 1].to_vec();
        let mut u: Vec<f64> = self.inner_r[..m - 1]
            .iter()
            .zip(&w)
            .map(|(r, w)| r.sqrt() * w)
            .collect();

        // outer: uniform Numerov, seeded with the last two inner points
        let h2 = self.cfg.step * self.cfg.step / 12.0;
        let n = self.outer_v.len();
        let f: Vec<f64> = self.outer_v.iter().map(|v| v - k2).collect();
        let mut uo = vec![0.0; n];
        uo[0] = *u.last().expect("inner grid is nonempty");
        uo[1] = (self.cfg.inner_radius + self.cfg.step).sqrt() * w[m - 1];
        let rescale = numerov(&mut uo, &f, h2);
        if rescale != 1.0 {
            u.iter_mut().for_each(|x| *x *= rescale);
        }
        r_all.pop();
        u.pop();
        r_all.extend((0..n).map(|i| self.outer_r(i)));
        u.extend(uo);
        (r_all, u)
    }

    fn match_indices(&self, k: f64) -> (usize, usize) {
        let h = self.cfg.step;
        let n = self.outer_v.len() - 1;
        let idx = |r: f64| (((r - self.cfg.inner_radius) / h).round() as usize).min(n);
        match self.cfg.match_radii {
            Some((r1, r2)) => (idx(r1), idx(r2)),
            None => {
                let gap = (FRAC_PI_2 / k).clamp(1.0, MATCH_GAP_MAX);
                (idx(self.r_max - gap), n)
            }
        }
    }

    pub fn solve(&self, k: f64) -> Result<RadialSolution> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Domain(format!("wave number must be > 0, got {k}")));
        }
        let (r, u) = self.integrate(k);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite radial solution at k = {k}")));
        }
        let offset = r.len() - self.outer_v.len();
        let (mut i1, i2) = self.match_indices(k);
        let short = |i: usize| {
            let rr = self.outer_r(i);
            (self.outer_v[i] - self.l.centrifugal() / (rr * rr)).abs()
        };
        for attempt in 0..4 {
            if i1 == 0 || i1 >= i2 {
                break;
            }
            let (r1, r2) = (self.outer_r(i1), self.outer_r(i2));
            if short(i1) >= self.cfg.match_threshold {
                return Err(Error::Matching {
                    k,
                    reason: format!(
                        "potential not negligible at r1 = {r1} fm (|V| = {:e} fm^-2)",
                        short(i1)
                    ),
                });
            }
            let f1 = riccati_bessel(self.l, k * r1)?;
            let f2 = riccati_bessel(self.l, k * r2)?;
            let (u1, u2) = (u[offset + i1], u[offset + i2]);
            let det = f1.j * f2.n - f2.j * f1.n;
            let num = f2.j * u1 - f1.j * u2;
            let den = u1 * f2.n - u2 * f1.n;
            let scale = f1.j.hypot(f2.j) * f1.n.hypot(f2.n);
            if det.abs() > 1e-8 * scale && (num != 0.0 || den != 0.0) {
                let delta = principal(num.atan2(den));
                return Ok(RadialSolution {
                    k,
                    r,
                    u,
                    delta,
                    match_radii: (r1, r2),
                });
            }
            // shift r1 inward by a third of the gap and retry
            let _ = attempt;
            i1 -= (i2 - i1) / 3;
        }
        Err(Error::Matching {
            k,
            reason: "matching system singular at every tried radius".into(),
        })
    }

    /// Phase shifts on an increasing grid, unwrapped to the branch that
    /// vanishes as `k -> 0`.
    pub fn phase_shifts(&self, k_grid: &[f64]) -> Result<Vec<f64>> {
        validate_k_grid(k_grid)?;
        // ramp up from a k where |delta| < pi/2 is assumed
        let mut ramp = Vec::new();
        let mut kk = RAMP_START;
        while kk < k_grid[0] {
            ramp.push(kk);
            kk *= RAMP_RATIO;
        }
        let mut prev_k = None;
        let mut prev_delta = 0.0;
        let mut out = Vec::with_capacity(k_grid.len());
        for (i, &k) in ramp.iter().chain(k_grid).enumerate() {
            let raw = self.solve(k)?.delta;
            let d = match prev_k {
                None => raw,
                Some(pk) => self.continue_branch(pk, prev_delta, k, raw, 0)?,
            };
            prev_k = Some(k);
            prev_delta = d;
            if i >= ramp.len() {
                out.push(d);
            }
        }
        Ok(out)
    }

    fn continue_branch(&self, k0: f64, d0: f64, k1: f64, raw1: f64, depth: u32) -> Result<f64> {
        let d1 = nearest_branch(raw1, d0);
        if (d1 - d0).abs() <= FRAC_PI_4 {
            return Ok(d1);
        }
        if depth >= MAX_REFINE {
            return Err(Error::UnwrapAmbiguity { k0, k1 });
        }
        let km = 0.5 * (k0 + k1);
        let dm = self.continue_branch(k0, d0, km, self.solve(km)?.delta, depth + 1)?;
        self.continue_branch(km, dm, k1, raw1, depth + 1)
    }
}

/// Numerov recurrence for `y'' = f y` on a uniform grid, seeded by `y[0]` and
/// `y[1]`; `c = step^2 / 12`. Uses the summed form
/// `z_n = (1 - c f_n) y_n`, `z_(n+1) - z_n = z_n - z_(n-1) + 12 c f_n y_n`,
/// which keeps roundoff from growing quadratically with the step count.
/// Returns the overall factor applied when rescaling against overflow.
fn numerov(y: &mut [f64], f: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut total = 1.0;
    let mut z_prev = (1.0 - c * f[0]) * y[0];
    let mut z = (1.0 - c * f[1]) * y[1];
    let mut diff = z - z_prev;
    for i in 1..n - 1 {
        diff += 12.0 * c * f[i] * y[i];
        z_prev = z;
        z += diff;
        y[i + 1] = z / (1.0 - c * f[i + 1]);
        if y[i + 1].abs() > 1e200 {
            y.iter_mut().take(i + 2).for_each(|x| *x *= 1e-200);
            z *= 1e-200;
            z_prev *= 1e-200;
            diff = z - z_prev;
            total *= 1e-200;
        }
    }
    total
}

const RAMP_START: f64 = 1e-3;
const RAMP_RATIO: f64 = 1.5;
const MAX_REFINE: u32 = 24;

fn principal(x: f64) -> f64 {
    let mut y = x % PI;
    if y > FRAC_PI_2 {
        y -= PI;
    } else if y <= -FRAC_PI_2 {
        y += PI;
    }
    y
}

fn nearest_branch(raw: f64, reference: f64) -> f64 {
    raw + PI * ((reference - raw) / PI).round()
}

fn validate_k_grid(k_grid: &[f64]) -> Result<()> {
    if k_grid.is_empty() {
        return Err(Error::InvalidInput("empty k grid".into()));
    }
    let mut prev = 0.0;
    for &k in k_grid {
        if !(k > prev) || !k.is_finite() {
            return Err(Error::InvalidInput(
                "k grid must be positive, finite and strictly increasing".into(),
            ));
        }
        prev = k;
    }
    Ok(())
}

pub fn integrate_radial<P: RadialPotential + ?Sized>(
    pot: &P,
    k: f64,
    cfg: &SolverConfig,
) -> Result<RadialSolution> {
    RadialProblem::new(pot, cfg)?.solve(k)
}

pub fn phase_shift_from_potential<P: RadialPotential + ?Sized>(
    pot: &P,
    k_grid: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    RadialProblem::new(pot, cfg)?.phase_shifts(k_grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub k: Vec<f64>,
    /// Forward-solved phase shifts (rad).
    pub delta_forward: Vec<f64>,
    /// Arctangent sum over the poles (rad).
    pub delta_poles: Vec<f64>,
    /// `delta_forward - delta_poles` (rad).
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub rms: f64,
    /// Outer radius used by the solver (fm).
    pub r_max: f64,
}

pub fn verify_inversion(poles: &PoleSet, k_grid: &[f64], cfg: &SolverConfig) -> Result<VerificationReport> {
    let pot = build_potential(poles)?;
    verify_potential(&pot, k_grid, cfg)
}

/// Same as [`verify_inversion`] for an already built potential.
pub fn verify_potential(pot: &PotentialModel, k_grid: &[f64], cfg: &SolverConfig) -> Result<VerificationReport> {
    let problem = RadialProblem::new(pot, cfg)?;
    let forward = problem.phase_shifts(k_grid)?;
    let oracle = delta_from_poles(pot.poles(), k_grid);
    let residuals: Vec<f64> = forward.iter().zip(&oracle).map(|(a, b)| a - b).collect();
    let max_abs = residuals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let rms = (residuals.iter().map(|x| x * x).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(VerificationReport {
        k: k_grid.to_vec(),
        delta_forward: forward,
        delta_poles: oracle,
        residuals,
        max_abs,
        rms,
        r_max: problem.r_max(),
    })
}
