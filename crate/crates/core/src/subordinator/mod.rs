//! β-stable subordinators and their inverses.
//!
//! The subordinator `U(τ)` is the increasing Lévy process with
//! `E[exp(-u U(τ))] = exp(-τ u^β)`, `β ∈ (0,1)`. Its inverse
//! `E_t = inf{τ > 0 : U(τ) > t}` is the random operational clock driving
//! every time-changed process in this crate. `β = 1` is accepted everywhere
//! as the degenerate identity clock and is the analytic regression baseline.
//!
//! Simulation conventions:
//! - increments of `U` are exact draws via the Kanter transform, treated as
//!   jumps at the right grid endpoint;
//! - the inverse snaps to the first grid point where `U` exceeds the level,
//!   so `E` is nondecreasing, right-continuous, and constant across jumps;
//! - the full subordinator path is always generated before any Brownian
//!   coordinate is drawn, so conditioning on the whole clock is realized by
//!   simulation order.

mod ml;

pub use ml::{mittag_leffler, MlParams};

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::stats;

/// Stability index β ∈ (0, 1], validated at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaIndex(f64);

impl BetaIndex {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::parameter(format!(
                "stability index must lie in (0, 1], got {beta}"
            )));
        }
        Ok(BetaIndex(beta))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The degenerate identity clock.
    #[inline]
    pub fn is_identity(self) -> bool {
        self.0 == 1.0
    }
}

/// Sample path of the subordinator on an operational-time grid.
///
/// `values[k] = U(tau_grid[k])`, nondecreasing with `values[0] = 0`.
#[derive(Debug, Clone)]
pub struct SubordinatorPath {
    pub tau_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SubordinatorPath {
    pub fn new(tau_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if tau_grid.len() != values.len() {
            return Err(Error::parameter("grid and value lengths differ"));
        }
        crate::grid::validate(&tau_grid)?;
        if values[0] != 0.0 {
            return Err(Error::parameter("subordinator must start at 0"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::parameter("subordinator path must be nondecreasing"));
        }
        Ok(SubordinatorPath { tau_grid, values })
    }

    pub fn horizon(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn d_tau(&self) -> f64 {
        self.tau_grid[1] - self.tau_grid[0]
    }
}

/// Inverse-subordinator path on a physical-time grid.
///
/// `values[m] = E(t_grid[m])`, nondecreasing. Between stored times the path
/// is piecewise constant (right-continuous), matching the first-exceedance
/// convention of the inversion.
#[derive(Debug, Clone)]
pub struct InversePath {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl InversePath {
    pub fn new(t_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t_grid.len() != values.len() {
            return Err(Error::parameter("grid and value lengths differ"));
        }
        if t_grid.len() < 2 {
            return Err(Error::parameter("inverse path needs at least two points"));
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::parameter("t grid must be strictly increasing"));
        }
        if values[0] < 0.0 || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::parameter("inverse path must be nonnegative and nondecreasing"));
        }
        Ok(InversePath { t_grid, values })
    }

    /// Identity clock `E(t) = t`, the β = 1 baseline.
    pub fn identity(t_grid: &[f64]) -> Result<Self> {
        InversePath::new(t_grid.to_vec(), t_grid.to_vec())
    }

    /// Piecewise-constant evaluation: the value at the largest stored time
    /// `<= t` (clamped to the ends of the grid).
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= self.t_grid[0] {
            return self.values[0];
        }
        match self.t_grid.binary_search_by(|g| g.total_cmp(&t)) {
            Ok(i) => self.values[i],
            Err(i) => self.values[(i - 1).min(self.values.len() - 1)],
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Increments `E(t_{m+1}) - E(t_m)`.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// One increment of the subordinator over operational time `dt`:
/// `S` with `E[exp(-u S)] = exp(-dt u^β)`, via the Kanter transform
/// scaled by `dt^{1/β}`. Exact in law, O(1) per draw.
pub fn sample_stable_increment(beta: BetaIndex, dt: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::parameter(format!("dt must be positive, got {dt}")));
    }
    if beta.is_identity() {
        return Ok(dt);
    }
    Ok(dt.powf(1.0 / beta.value()) * sample_unit_stable(beta.value(), rng))
}

/// Standard one-sided stable draw with `E[exp(-u S)] = exp(-u^β)`.
fn sample_unit_stable(beta: f64, rng: &mut impl Rng) -> f64 {
    let u = clamp_open01(rng.random::<f64>()) * PI;
    let w = -clamp_open01(rng.random::<f64>()).ln();
    let s1 = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let s2 = (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    s1 * s2
}

#[inline]
fn clamp_open01(u: f64) -> f64 {
    u.clamp(1e-15, 1.0 - 1e-15)
}

/// Subordinator path on the uniform grid `0, d_tau, ..., tau_max` with
/// i.i.d. stable increments.
pub fn simulate_subordinator_path(
    beta: BetaIndex,
    tau_max: f64,
    d_tau: f64,
    rng: &mut impl Rng,
) -> Result<SubordinatorPath> {
    if !(tau_max > 0.0) || !(d_tau > 0.0) || d_tau >= tau_max {
        return Err(Error::parameter(format!(
            "need 0 < d_tau < tau_max, got d_tau = {d_tau}, tau_max = {tau_max}"
        )));
    }
    let steps = (tau_max / d_tau).round() as usize;
    let mut tau_grid = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    tau_grid.push(0.0);
    values.push(0.0);
    let mut level = 0.0;
    for k in 1..=steps {
        level += sample_stable_increment(beta, d_tau, rng)?;
        tau_grid.push(k as f64 * d_tau);
        values.push(level);
    }
    SubordinatorPath::new(tau_grid, values)
}

/// Subordinator path extended until it strictly exceeds `t_target`, so the
/// inversion of any level `<= t_target` is always defined. Errors if the
/// path has not crossed after `max_steps` increments.
pub fn simulate_until_exceeds(
    beta: BetaIndex,
    t_target: f64,
    d_tau: f64,
    rng: &mut impl Rng,
    max_steps: usize,
) -> Result<SubordinatorPath> {
    if !(t_target > 0.0) || !(d_tau > 0.0) {
        return Err(Error::parameter("t_target and d_tau must be positive"));
    }
    let mut tau_grid = vec![0.0];
    let mut values = vec![0.0];
    let mut level = 0.0;
    let mut k = 0usize;
    while level <= t_target {
        k += 1;
        if k > max_steps {
            return Err(Error::horizon(format!(
                "subordinator did not exceed {t_target} after {max_steps} steps; \
                 increase max_steps or d_tau"
            )));
        }
        level += sample_stable_increment(beta, d_tau, rng)?;
        tau_grid.push(k as f64 * d_tau);
        values.push(level);
    }
    SubordinatorPath::new(tau_grid, values)
}

/// First-exceedance inversion: `E(t)` is the smallest grid `τ_k` with
/// `U(τ_k) > t`. Nondecreasing and constant across jumps of `U` by
/// construction. Level zero inverts to zero exactly: the subordinator has
/// strictly positive increments, so it exits the origin immediately and
/// snapping `E(0)` up to the first grid node would insert a spurious
/// initial segment into every pathwise identity.
pub fn invert_path(path: &SubordinatorPath, t_grid: &[f64]) -> Result<InversePath> {
    if t_grid.len() < 2 {
        return Err(Error::parameter("t grid needs at least two points"));
    }
    if t_grid[0] < 0.0 {
        return Err(Error::parameter("inversion levels must be nonnegative"));
    }
    let t_max = *t_grid.last().unwrap();
    if t_max >= path.horizon() {
        return Err(Error::horizon(format!(
            "t grid reaches {t_max} but the subordinator only attains {}; \
             simulate a longer operational-time horizon",
            path.horizon()
        )));
    }
    let mut values = Vec::with_capacity(t_grid.len());
    let mut k = 0usize;
    for &t in t_grid {
        if t == 0.0 {
            values.push(0.0);
            continue;
        }
        while path.values[k] <= t {
            k += 1;
        }
        values.push(path.tau_grid[k]);
    }
    InversePath::new(t_grid.to_vec(), values)
}

/// One draw of the marginal `E_t`, using self-similarity of the stable law:
/// `E_t` has the law of `(t / S)^β` with `S` a unit stable draw.
pub fn sample_inverse_marginal(beta: BetaIndex, t: f64, rng: &mut impl Rng) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::parameter(format!("t must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if beta.is_identity() {
        return Ok(t);
    }
    let s = sample_unit_stable(beta.value(), rng);
    Ok((t / s).powf(beta.value()))
}

/// Exact moments of the inverse subordinator:
/// `E[E_t^n] = t^{nβ} n! / Γ(nβ + 1)`.
pub fn inverse_moment(beta: BetaIndex, t: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::parameter("moment order must be at least 1"));
    }
    if t < 0.0 {
        return Err(Error::parameter(format!("t must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let b = beta.value();
    let nb = n as f64 * b;
    let log_val = nb * t.ln() + ln_gamma(n as f64 + 1.0) - ln_gamma(nb + 1.0);
    let val = log_val.exp();
    if !val.is_finite() {
        return Err(Error::numeric(format!(
            "moment overflows: exp({log_val:.1}) is not representable"
        )));
    }
    Ok(val)
}

/// A test function together with its Laplace transform, for the
/// subordination identity check.
pub trait LaplacePair: Sync {
    fn eval(&self, tau: f64) -> f64;
    fn laplace(&self, s: f64) -> f64;
    fn name(&self) -> &'static str;
}

/// h(τ) = 1, Laplace transform 1/s.
pub struct ConstantOne;

impl LaplacePair for ConstantOne {
    fn eval(&self, _tau: f64) -> f64 {
        1.0
    }
    fn laplace(&self, s: f64) -> f64 {
        1.0 / s
    }
    fn name(&self) -> &'static str {
        "one"
    }
}

/// h(τ) = τ, Laplace transform 1/s².
pub struct Ramp;

impl LaplacePair for Ramp {
    fn eval(&self, tau: f64) -> f64 {
        tau
    }
    fn laplace(&self, s: f64) -> f64 {
        1.0 / (s * s)
    }
    fn name(&self) -> &'static str {
        "ramp"
    }
}

/// h(τ) = exp(-a τ), Laplace transform 1/(s + a).
pub struct ExpDecay {
    pub a: f64,
}

impl LaplacePair for ExpDecay {
    fn eval(&self, tau: f64) -> f64 {
        (-self.a * tau).exp()
    }
    fn laplace(&self, s: f64) -> f64 {
        1.0 / (s + self.a)
    }
    fn name(&self) -> &'static str {
        "exp-decay"
    }
}

/// Result of [`laplace_subordination_check`].
#[derive(Debug, Clone)]
pub struct LaplaceReport {
    pub s_grid: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub max_rel_err: f64,
}

/// Checks the subordination identity in Laplace space: the transform of
/// `t ↦ E[h(E_t)]` equals `s^{β-1} h̃(s^β)`.
///
/// The left side is Monte Carlo over marginal draws of `E_t` (one stable
/// draw per replication, reused across the whole quadrature grid in `t`)
/// followed by composite-Simpson quadrature of the transform truncated where
/// `exp(-s t)` is below 1e-17. The right side is analytic.
pub fn laplace_subordination_check(
    h: &dyn LaplacePair,
    beta: BetaIndex,
    s_grid: &[f64],
    mc: usize,
    streams: &Streams,
) -> Result<LaplaceReport> {
    if s_grid.is_empty() || s_grid.iter().any(|&s| s <= 0.0) {
        return Err(Error::parameter("s grid must be positive"));
    }
    if mc == 0 {
        return Err(Error::parameter("mc must be positive"));
    }
    let b = beta.value();
    // One unit stable draw per replication; E_t = (t/S)^β = t^β S^{-β}.
    let neg_pow: Vec<f64> = (0..mc as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.replication(i);
            if beta.is_identity() {
                1.0
            } else {
                sample_unit_stable(b, &mut rng).powf(-b)
            }
        })
        .collect();

    let n_panels = 2048usize;
    let mut lhs = Vec::with_capacity(s_grid.len());
    let mut rhs = Vec::with_capacity(s_grid.len());
    let mut max_rel_err: f64 = 0.0;
    for &s in s_grid {
        let t_max = 40.0 / s;
        let dt = t_max / n_panels as f64;
        // q(t_k) = mean over replications of h(t_k^β S_i^{-β})
        let q: Vec<f64> = (0..=n_panels)
            .into_par_iter()
            .map(|k| {
                let t = k as f64 * dt;
                let tb = t.powf(b);
                let vals: Vec<f64> = neg_pow.iter().map(|&a| h.eval(tb * a)).collect();
                stats::mean(&vals)
            })
            .collect();
        let integrand: Vec<f64> = (0..=n_panels)
            .map(|k| (-s * k as f64 * dt).exp() * q[k])
            .collect();
        let l = simpson(&integrand, dt);
        let r = s.powf(b - 1.0) * h.laplace(s.powf(b));
        if !l.is_finite() || !r.is_finite() {
            return Err(Error::numeric("Laplace quadrature produced a non-finite value"));
        }
        max_rel_err = max_rel_err.max((l - r).abs() / r.abs().max(1e-300));
        lhs.push(l);
        rhs.push(r);
    }
    Ok(LaplaceReport {
        s_grid: s_grid.to_vec(),
        lhs,
        rhs,
        max_rel_err,
    })
}

/// Composite Simpson on a uniform grid with an even number of panels.
fn simpson(f: &[f64], dx: f64) -> f64 {
    assert!(f.len() >= 3 && f.len() % 2 == 1, "need an even panel count");
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, &v) in f.iter().enumerate().skip(1).take(f.len() - 2) {
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    dx / 3.0 * (f[0] + f[f.len() - 1] + 4.0 * odd + 2.0 * even)
}
