//! Fractional Fokker-Planck-Kolmogorov verification in weak form.
//!
//! Marginal laws are represented by sample clouds only; every statement is
//! checked against cylindrical test functionals `φ(x) = g(⟨x, h⟩)` whose
//! Fréchet derivatives are closed-form, so the Kolmogorov operator is exact
//! and the only error sources are Monte Carlo noise, the Euler scheme, and
//! the L1 kernel of the Caputo derivative.
//!
//! The central check: for the autonomous equation
//! `dX = (A X + F(X)) dE_t + C dW_{E_t}` with `m(t) = E[φ(X_t)]` and
//! `r(t) = E[L₀φ(X_t)]`, the weak fractional equation `D_t^β m = r` holds,
//! where `L₀φ(x) = ⟨x, A*Dφ⟩ + ⟨F(x), Dφ⟩ + ½ tr[(CQ^{1/2})(CQ^{1/2})* D²φ]`.
//! The adjoint never appears: the differential form of the equation is
//! covered exactly through these weak residuals.

use std::sync::Arc;

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::sde::{solve_classical_em, SdeCoefficients};
use crate::spectral::{
    simulate_noise, simulate_qwiener, HVector, HsOperator, SimGrid, SpectralBasis,
};
use crate::stats;
use crate::subordinator::{mittag_leffler, sample_inverse_marginal, BetaIndex};
use crate::{grid, spectral};

/// Cylindrical test functional `φ(x) = g(⟨x, h⟩)` with closed-form first
/// and second derivatives `Dφ = g'(⟨x,h⟩) h`, `D²φ = g''(⟨x,h⟩) h⊗h`.
#[derive(Clone)]
pub enum TestFunctional {
    /// `g(v) = v`
    Linear { h: HVector },
    /// `g(v) = v²`
    Quadratic { h: HVector },
    /// user-supplied `g, g', g''`
    SmoothCylindrical {
        h: HVector,
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        g1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        g2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl TestFunctional {
    pub fn smooth(
        h: HVector,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunctional::SmoothCylindrical {
            h,
            g: Arc::new(g),
            g1: Arc::new(g1),
            g2: Arc::new(g2),
        }
    }

    pub fn direction(&self) -> &HVector {
        match self {
            TestFunctional::Linear { h } => h,
            TestFunctional::Quadratic { h } => h,
            TestFunctional::SmoothCylindrical { h, .. } => h,
        }
    }

    fn g012(&self, v: f64) -> (f64, f64, f64) {
        match self {
            TestFunctional::Linear { .. } => (v, 1.0, 0.0),
            TestFunctional::Quadratic { .. } => (v * v, 2.0 * v, 2.0),
            TestFunctional::SmoothCylindrical { g, g1, g2, .. } => (g(v), g1(v), g2(v)),
        }
    }

    pub fn value(&self, x: &HVector) -> f64 {
        self.g012(self.direction().dot(x)).0
    }
}

/// Coefficients of the autonomous verification problem
/// `dX = (A X + F(X)) dE_t + C dW_{E_t}`.
#[derive(Clone)]
pub struct FpkProblem {
    pub beta: BetaIndex,
    pub basis: SpectralBasis,
    pub coeffs: SdeCoefficients,
    /// Constant diffusion operator; must match `coeffs.diffusion`.
    pub c: HsOperator,
}

impl FpkProblem {
    /// `X = x0 + C W_{E_t}` (no drift).
    pub fn pure_noise(
        beta: BetaIndex,
        basis: SpectralBasis,
        c: HsOperator,
        x0: crate::sde::InitialCondition,
    ) -> Self {
        let coeffs = SdeCoefficients {
            a: crate::sde::Generator::Zero,
            drift: crate::sde::StateDrift::Zero,
            diffusion: crate::sde::Diffusion::Constant(c.clone()),
            x0,
        };
        FpkProblem {
            beta,
            basis,
            coeffs,
            c,
        }
    }

    /// Diagonal Ornstein-Uhlenbeck: `dX = -diag(μ) X dE_t + C dW_{E_t}`.
    pub fn diagonal_ou(
        beta: BetaIndex,
        basis: SpectralBasis,
        mu: Vec<f64>,
        c: HsOperator,
        x0: crate::sde::InitialCondition,
    ) -> Self {
        let coeffs = SdeCoefficients {
            a: crate::sde::Generator::Diagonal(mu),
            drift: crate::sde::StateDrift::Zero,
            diffusion: crate::sde::Diffusion::Constant(c.clone()),
            x0,
        };
        FpkProblem {
            beta,
            basis,
            coeffs,
            c,
        }
    }
}

/// The Kolmogorov operator on a cylindrical functional:
/// `L₀φ(x) = ⟨x, A*Dφ⟩ + ⟨F(x), Dφ⟩ + ½ g''(⟨x,h⟩) ‖(CQ^{1/2})*h‖²`.
pub fn apply_l0(phi: &TestFunctional, x: &HVector, problem: &FpkProblem) -> f64 {
    let h = phi.direction();
    let v = h.dot(x);
    let (_, g1, g2) = phi.g012(v);
    let mut acc = 0.0;
    if !problem.coeffs.a.is_zero() {
        // ⟨x, A* Dφ⟩ = g' ⟨A x, h⟩
        acc += g1 * problem.coeffs.a.apply(x).dot(h);
    }
    if let Some(f) = problem.coeffs.drift.value_at(0.0, x) {
        acc += g1 * f.dot(h);
    }
    if g2 != 0.0 {
        acc += 0.5 * g2 * c_weighted_norm_sq(&problem.c, h, &problem.basis);
    }
    acc
}

/// `‖(C Q^{1/2})* h‖² = Σ_j λ_j (Σ_i C_{ij} h_i)²`
fn c_weighted_norm_sq(c: &HsOperator, h: &HVector, basis: &SpectralBasis) -> f64 {
    let mut total = 0.0;
    for j in 0..c.cols() {
        let mut col = 0.0;
        for i in 0..c.rows() {
            col += c.get(i, j) * h.0[i];
        }
        total += basis.lambda()[j] * col * col;
    }
    total
}

/// L1 discretization of the Caputo derivative on a uniform grid,
/// order `2-β` on smooth curves. `β = 1` degenerates to the backward
/// difference, so classical checks reuse the same code path. The value at
/// the first node is reported as zero (the kernel is empty there).
pub fn caputo_derivative(t_grid: &[f64], f: &[f64], beta: BetaIndex) -> Result<Vec<f64>> {
    if t_grid.len() != f.len() {
        return Err(Error::parameter("grid and sample lengths differ"));
    }
    let dt = grid::uniform_spacing(t_grid)?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::parameter("samples must be finite"));
    }
    let b = beta.value();
    let n = f.len();
    let mut out = vec![0.0; n];
    if beta.is_identity() {
        for m in 1..n {
            out[m] = (f[m] - f[m - 1]) / dt;
        }
        return Ok(out);
    }
    let weights: Vec<f64> = (0..n - 1)
        .map(|j| ((j + 1) as f64).powf(1.0 - b) - (j as f64).powf(1.0 - b))
        .collect();
    let scale = 1.0 / (dt.powf(b) * gamma(2.0 - b));
    let df: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
    for m in 1..n {
        let mut acc = 0.0;
        for (k, &d) in df[..m].iter().enumerate() {
            acc += weights[m - 1 - k] * d;
        }
        out[m] = scale * acc;
    }
    Ok(out)
}

/// Weak fractional FPK residual `D_t^β m(t) - r(t)` with per-path pooled
/// standard errors. Linearity of the L1 kernel lets the residual be
/// averaged path by path: `y_i(t) = D_t^β[φ(X_i(·))](t) - L₀φ(X_i(t))`,
/// so the reported standard error is an honest i.i.d. one.
///
/// `assess_from` marks the first grid index outside the L1 initial layer
/// (the kernel's relative bias on `t^β`-type curves depends only on the
/// node index: ~0.6% at node 8, ~0.2% at node 16); the pass/fail scan in
/// callers should start there.
#[derive(Debug, Clone)]
pub struct FpkResidualReport {
    pub t_grid: Vec<f64>,
    pub m_curve: Vec<f64>,
    pub r_curve: Vec<f64>,
    pub residual: Vec<f64>,
    pub se: Vec<f64>,
    pub assess_from: usize,
}

impl FpkResidualReport {
    /// Largest |residual| / se over the assessed range.
    pub fn max_z(&self) -> f64 {
        self.residual
            .iter()
            .zip(&self.se)
            .skip(self.assess_from)
            .map(|(r, s)| (r / s).abs())
            .fold(0.0, f64::max)
    }
}

/// Samples the time-changed solution through the duality route (classical
/// Euler-Maruyama on the operational grid, composed with the inverse clock)
/// and evaluates the weak residual.
pub fn fractional_fpk_residual(
    problem: &FpkProblem,
    phi: &TestFunctional,
    sim: &SimGrid,
    mc: usize,
    streams: &Streams,
) -> Result<FpkResidualReport> {
    if mc < 2 {
        return Err(Error::parameter("mc must be at least 2"));
    }
    let t_grid = sim.t_grid();
    let n = t_grid.len();
    let dt = t_grid[1] - t_grid[0];
    let per_path: Vec<Vec<f64>> = (0..mc as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = streams.replication(i);
            let noise = simulate_noise(problem.beta, &problem.basis, sim, &mut rng)?;
            let x0 = problem.coeffs.x0.sample(&mut rng);
            let classical = solve_classical_em(&problem.coeffs, &noise.qwiener, Some(&x0))?;
            let phi_curve: Vec<f64> = noise
                .inverse
                .values
                .iter()
                .map(|&e| phi.value(&classical.value_at(e)))
                .collect();
            let dbeta = caputo_derivative(&t_grid, &phi_curve, problem.beta)?;
            let mut row = Vec::with_capacity(3 * n);
            for m in 0..n {
                let x = classical.value_at(noise.inverse.values[m]);
                let l0 = apply_l0(phi, &x, problem);
                row.push(dbeta[m] - l0);
                row.push(phi_curve[m]);
                row.push(l0);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut residual = Vec::with_capacity(n);
    let mut se = Vec::with_capacity(n);
    let mut m_curve = Vec::with_capacity(n);
    let mut r_curve = Vec::with_capacity(n);
    for m in 0..n {
        let ys: Vec<f64> = per_path.iter().map(|row| row[3 * m]).collect();
        let (mu, s) = stats::mean_se(&ys);
        residual.push(mu);
        se.push(s);
        let phis: Vec<f64> = per_path.iter().map(|row| row[3 * m + 1]).collect();
        m_curve.push(stats::mean(&phis));
        let l0s: Vec<f64> = per_path.iter().map(|row| row[3 * m + 2]).collect();
        r_curve.push(stats::mean(&l0s));
    }
    // first index past the L1 initial layer, at least one physical step in
    let assess_from = (16usize).min(n.saturating_sub(1)).max(1);
    let _ = dt;
    Ok(FpkResidualReport {
        t_grid,
        m_curve,
        r_curve,
        residual,
        se,
        assess_from,
    })
}

/// Two-sampler check of the subordination identity: the law of `X(t)`
/// equals the law of `Y(E')` with an independent marginal clock draw.
#[derive(Debug, Clone)]
pub struct SubordinationReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub pooled_se: f64,
}

impl SubordinationReport {
    pub fn within(&self, k: f64) -> bool {
        (self.lhs - self.rhs).abs() <= k * self.pooled_se
    }
}

/// `lhs = E[φ(X(t))]` via the time-changed solve along its coupled clock
/// (the recommended route: classical scheme on the operational grid,
/// composed with the inverted clock — the direct physical-clock scheme is
/// cross-validated separately by the duality check, whose `O(Δt^β)` weak
/// bias would otherwise drown the identity at large sample counts);
/// `rhs = E[φ(Y(E'))]` with the classical scheme run to an independently
/// drawn marginal clock value. Any integrable observable is admitted.
pub fn subordination_identity_check(
    problem: &FpkProblem,
    observable: &(dyn Fn(&HVector) -> f64 + Sync),
    t: f64,
    sim: &SimGrid,
    mc: usize,
    streams: &Streams,
) -> Result<SubordinationReport> {
    if !(t > 0.0) || t > sim.t_max {
        return Err(Error::parameter("t must lie inside the grid horizon"));
    }
    if mc < 2 {
        return Err(Error::parameter("mc must be at least 2"));
    }
    let lhs_streams = streams.child(1);
    let rhs_streams = streams.child(2);

    let lhs_vals: Vec<f64> = (0..mc as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = lhs_streams.replication(i);
            let noise = simulate_noise(problem.beta, &problem.basis, sim, &mut rng)?;
            let x0 = problem.coeffs.x0.sample(&mut rng);
            let classical = solve_classical_em(&problem.coeffs, &noise.qwiener, Some(&x0))?;
            Ok(observable(&classical.value_at(noise.inverse.value_at(t))))
        })
        .collect::<Result<_>>()?;

    let rhs_vals: Vec<f64> = (0..mc as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = rhs_streams.replication(i);
            // marginal clock draw first, then an independent driving path
            let e = sample_inverse_marginal(problem.beta, t, &mut rng)?;
            let x0 = problem.coeffs.x0.sample(&mut rng);
            if e == 0.0 {
                return Ok(observable(&x0));
            }
            let steps = ((e / sim.d_tau).ceil() as usize).max(2);
            let tau_grid = grid::uniform(e, steps)?;
            let qpath = simulate_qwiener(&problem.basis, &tau_grid, &mut rng)?;
            let sol = solve_classical_em(&problem.coeffs, &qpath, Some(&x0))?;
            Ok(observable(sol.final_value()))
        })
        .collect::<Result<_>>()?;

    let (lm, ls) = stats::mean_se(&lhs_vals);
    let (rm, rs) = stats::mean_se(&rhs_vals);
    Ok(SubordinationReport {
        lhs: lm,
        lhs_se: ls,
        rhs: rm,
        rhs_se: rs,
        pooled_se: (ls * ls + rs * rs).sqrt(),
    })
}

/// Analytic characteristic function of one mode of the time-changed
/// Q-Wiener process: `E[exp(i u λ_j^{1/2} w_j(E_t))] = E_β(-λ_j u² t^β / 2)`.
pub fn mode_characteristic_function(
    lambda_j: f64,
    beta: BetaIndex,
    u: f64,
    t: f64,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::parameter("t must be nonnegative"));
    }
    mittag_leffler(beta.value(), -lambda_j * u * u * t.powf(beta.value()) / 2.0)
}

/// Empirical measure at one output time: a cloud of H-valued samples with
/// uniform weights; the expectation functional is the sample mean.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    pub samples: Vec<HVector>,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<HVector>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::parameter("empirical measure needs at least one sample"));
        }
        Ok(EmpiricalMeasure { samples })
    }

    pub fn expect(&self, f: &dyn Fn(&HVector) -> f64) -> (f64, f64) {
        let vals: Vec<f64> = self.samples.iter().map(|x| f(x)).collect();
        stats::mean_se(&vals)
    }
}

/// Convenience: sample the marginal law of the time-changed solution at one
/// time through the duality route.
pub fn sample_marginal(
    problem: &FpkProblem,
    t: f64,
    sim: &SimGrid,
    mc: usize,
    streams: &Streams,
) -> Result<EmpiricalMeasure> {
    let samples: Vec<HVector> = (0..mc as u64)
        .into_par_iter()
        .map(|i| -> Result<HVector> {
            let mut rng = streams.replication(i);
            let noise = simulate_noise(problem.beta, &problem.basis, sim, &mut rng)?;
            let x0 = problem.coeffs.x0.sample(&mut rng);
            let classical = solve_classical_em(&problem.coeffs, &noise.qwiener, Some(&x0))?;
            Ok(classical.value_at(noise.inverse.value_at(t)))
        })
        .collect::<Result<_>>()?;
    EmpiricalMeasure::new(samples)
}

pub use spectral::norm_second_moment;
