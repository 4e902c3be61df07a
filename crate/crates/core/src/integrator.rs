//! Itô integration against the time-changed Q-Wiener process.
//!
//! The integral is the coordinate expansion
//!
//! ```text
//! ∫_0^t Φ(s) dW_{E_s} = Σ_j ∫_0^t Φ(s)(λ_j^{1/2} f_j) dw_j(E_s),
//! ```
//!
//! using that the K_Q pairing of the path against the j-th scaled basis
//! vector is exactly the j-th coordinate Brownian motion evaluated at the
//! clock: `⟨W_{E_s}, λ_j^{1/2} f_j⟩_{K_Q} = Σ_i λ_i^{-1} ⟨W_{E_s}, f_i⟩_K
//! ⟨λ_j^{1/2} f_j, f_i⟩_K = w_j(E_s)`. Sums are left-point (Itô) on the
//! physical grid.
//!
//! Operational-clock sums (the right-hand sides of the change-of-variable
//! formulas and of the Itô formula) follow two grid conventions:
//! - the left limit `U(s-)` over the step `[τ_k, τ_{k+1})` is the value at
//!   the step's left node, because increments of `U` are jumps at right
//!   grid endpoints;
//! - state composition `X(U(s-))` reads the physical-time path strictly
//!   before `U(τ_k)`, which lands on the flat piece of the clock where
//!   `E = τ_k` and so undoes the first-exceedance overshoot of the
//!   discrete inversion.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::spectral::{
    interp_linear, simulate_noise, HVector, HsOperator, NoiseRealization, QWienerPath,
    SimGrid, SpectralBasis, TimeChangedQWienerPath,
};
use crate::stats;
use crate::subordinator::BetaIndex;

type OperatorRule = Arc<dyn Fn(f64, &HVector) -> HsOperator + Send + Sync>;

/// Integrand in the admissible class: an elementary step process with
/// deterministic operator values, or a rule evaluated left-point on
/// `(t, W_{E_t})`. Adaptedness is structural: rules can only read the
/// driving state at the left endpoint of each step.
#[derive(Clone)]
pub enum Integrand {
    Elementary {
        /// `0 <= t_0 < t_1 < ... < t_n`; value `i` applies on `[t_i, t_{i+1})`
        /// when evaluated at left points, zero outside.
        breakpoints: Vec<f64>,
        values: Vec<HsOperator>,
    },
    PathFunctional(OperatorRule),
}

impl Integrand {
    pub fn elementary(breakpoints: Vec<f64>, values: Vec<HsOperator>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::parameter(
                "an elementary integrand needs one more breakpoint than values",
            ));
        }
        if breakpoints[0] < 0.0 || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::parameter(
                "breakpoints must be nonnegative and strictly increasing",
            ));
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter("operator values must be finite and nonempty"));
        }
        let (r, c) = (values[0].rows(), values[0].cols());
        if values.iter().any(|v| v.rows() != r || v.cols() != c) {
            return Err(Error::parameter("operator values must share one shape"));
        }
        Ok(Integrand::Elementary {
            breakpoints,
            values,
        })
    }

    /// Constant operator on all of `[0, ∞)`.
    pub fn constant(op: HsOperator) -> Self {
        let dim = op.cols();
        Integrand::PathFunctional(Arc::new(move |_, _| {
            let _ = dim;
            op.clone()
        }))
    }

    /// Deterministic time-dependent rule.
    pub fn time_varying(
        f: impl Fn(f64) -> HsOperator + Send + Sync + 'static,
    ) -> Self {
        Integrand::PathFunctional(Arc::new(move |t, _| f(t)))
    }

    /// Rule reading the driving state at the left point.
    pub fn path_functional(
        f: impl Fn(f64, &HVector) -> HsOperator + Send + Sync + 'static,
    ) -> Self {
        Integrand::PathFunctional(Arc::new(f))
    }

    /// Left-point evaluation at time `t` with driving state `state`.
    pub fn value_at(&self, t: f64, state: &HVector) -> HsOperator {
        match self {
            Integrand::Elementary {
                breakpoints,
                values,
            } => {
                let dim = state.dim().max(values[0].cols());
                if t < breakpoints[0] || t >= *breakpoints.last().unwrap() {
                    return HsOperator::zeros(values[0].rows().max(dim), values[0].cols());
                }
                let i = match breakpoints.binary_search_by(|b| b.total_cmp(&t)) {
                    Ok(i) => i,
                    Err(i) => i - 1,
                };
                values[i.min(values.len() - 1)].clone()
            }
            Integrand::PathFunctional(f) => f(t, state),
        }
    }
}

/// H-valued integral path on a physical grid; piecewise linear between
/// nodes for evaluation at intermediate times.
#[derive(Debug, Clone)]
pub struct IntegralPath {
    pub t_grid: Vec<f64>,
    pub values: Vec<HVector>,
}

impl IntegralPath {
    pub fn final_value(&self) -> &HVector {
        self.values.last().unwrap()
    }

    pub fn value_at(&self, t: f64) -> HVector {
        let dim = self.values[0].dim();
        let mut out = Vec::with_capacity(dim);
        for c in 0..dim {
            let coords: Vec<f64> = self.values.iter().map(|v| v.0[c]).collect();
            out.push(interp_linear(&self.t_grid, &coords, t));
        }
        HVector(out)
    }
}

/// Left-point Itô sums of `Φ` against the time-changed path:
/// `I_{m+1} = I_m + Φ(t_m, W_{E_{t_m}}) D_{λ^{1/2}} Δw(E)_m`.
pub fn integrate_tc(phi: &Integrand, path: &TimeChangedQWienerPath) -> Result<IntegralPath> {
    let basis = &path.basis;
    let mut values = Vec::with_capacity(path.t_grid.len());
    let first_op = phi.value_at(path.t_grid[0], &path.value(0));
    if first_op.cols() != basis.dim() {
        return Err(Error::parameter(format!(
            "integrand acts on dimension {} but the path has {} modes",
            first_op.cols(),
            basis.dim()
        )));
    }
    let h_dim = first_op.rows();
    let mut acc = HVector::zeros(h_dim);
    values.push(acc.clone());
    for m in 0..path.steps() {
        let state = path.value(m);
        let op = phi.value_at(path.t_grid[m], &state);
        if !op.is_finite() {
            return Err(Error::numeric(format!(
                "integrand produced a non-finite operator at t = {}",
                path.t_grid[m]
            )));
        }
        for j in 0..basis.dim() {
            let scale = basis.sqrt_lambda()[j] * path.coord_increment(j, m);
            if scale != 0.0 {
                for i in 0..h_dim {
                    acc.0[i] += op.get(i, j) * scale;
                }
            }
        }
        values.push(acc.clone());
    }
    Ok(IntegralPath {
        t_grid: path.t_grid.clone(),
        values,
    })
}

/// The same sums against the plain Q-Wiener path on its operational grid.
pub fn integrate_classical(phi: &Integrand, qpath: &QWienerPath) -> Result<IntegralPath> {
    let basis = &qpath.basis;
    let first_op = phi.value_at(qpath.tau_grid[0], &qpath.value(0));
    if first_op.cols() != basis.dim() {
        return Err(Error::parameter("integrand dimension mismatch"));
    }
    let h_dim = first_op.rows();
    let mut acc = HVector::zeros(h_dim);
    let mut values = Vec::with_capacity(qpath.tau_grid.len());
    values.push(acc.clone());
    for k in 0..qpath.tau_grid.len() - 1 {
        let state = qpath.value(k);
        let op = phi.value_at(qpath.tau_grid[k], &state);
        for j in 0..basis.dim() {
            let scale = basis.sqrt_lambda()[j] * (qpath.coords[j][k + 1] - qpath.coords[j][k]);
            for i in 0..h_dim {
                acc.0[i] += op.get(i, j) * scale;
            }
        }
        values.push(acc.clone());
    }
    Ok(IntegralPath {
        t_grid: qpath.tau_grid.clone(),
        values,
    })
}

/// `∫_0^T ‖Φ‖²_{L₂(K_Q,H)} dE` along one realization, left-point.
pub fn hs_norm_integral(phi: &Integrand, path: &TimeChangedQWienerPath) -> f64 {
    let basis = &path.basis;
    let mut acc = 0.0;
    for m in 0..path.steps() {
        let de = path.inverse.values[m + 1] - path.inverse.values[m];
        if de > 0.0 {
            let op = phi.value_at(path.t_grid[m], &path.value(m));
            acc += op.hs_norm_sq(basis) * de;
        }
    }
    acc
}

/// Monte Carlo report of the Itô isometry on coupled paths.
#[derive(Debug, Clone)]
pub struct IsometryReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// Standard error of the paired difference; the natural scale for
    /// `|lhs - rhs|`.
    pub diff_se: f64,
    pub mc: usize,
}

impl IsometryReport {
    pub fn within(&self, k: f64) -> bool {
        (self.lhs - self.rhs).abs() <= k * self.diff_se
    }
}

/// Estimates `E‖∫_0^T Φ dW_E‖²` and `E ∫_0^T ‖Φ‖² dE` on the same
/// realizations and reports the paired standard error of their difference.
pub fn ito_isometry_report(
    phi: &Integrand,
    beta: BetaIndex,
    basis: &SpectralBasis,
    sim: &SimGrid,
    mc: usize,
    streams: &Streams,
) -> Result<IsometryReport> {
    if mc < 2 {
        return Err(Error::parameter("mc must be at least 2"));
    }
    let pairs: Vec<(f64, f64)> = (0..mc as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = streams.replication(i);
            let noise = simulate_noise(beta, basis, sim, &mut rng)?;
            let integral = integrate_tc(phi, &noise.tc)?;
            let lhs = integral.final_value().norm_sq();
            let rhs = hs_norm_integral(phi, &noise.tc);
            Ok((lhs, rhs))
        })
        .collect::<Result<_>>()?;
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (lm, ls) = stats::mean_se(&lhs);
    let (rm, rs) = stats::mean_se(&rhs);
    let (_, ds) = stats::mean_se(&diff);
    Ok(IsometryReport {
        lhs: lm,
        lhs_se: ls,
        rhs: rm,
        rhs_se: rs,
        diff_se: ds,
        mc,
    })
}

/// Pathwise comparison of two integral formulations sharing one noise
/// realization.
#[derive(Debug, Clone)]
pub struct CovReport {
    pub t_grid: Vec<f64>,
    pub left: Vec<HVector>,
    pub right: Vec<HVector>,
    pub max_gap: f64,
}

fn max_gap(left: &[HVector], right: &[HVector]) -> f64 {
    left.iter()
        .zip(right)
        .map(|(l, r)| l.sub(r).norm())
        .fold(0.0, f64::max)
}

/// First change of variable: `∫_0^{E_t} Φ(s) dW_s` (operational clock)
/// against `∫_0^t Φ(E_s) dW_{E_s}` (physical clock), pathwise.
pub fn change_of_variable_1(phi: &Integrand, noise: &NoiseRealization) -> Result<CovReport> {
    let classical = integrate_classical(phi, &noise.qwiener)?;
    let left: Vec<HVector> = noise
        .inverse
        .values
        .iter()
        .map(|&e| classical.value_at(e))
        .collect();

    // Right side: the integrand's time argument is composed with the clock.
    let tc = &noise.tc;
    let basis = &tc.basis;
    let h_dim = left[0].dim();
    let mut acc = HVector::zeros(h_dim);
    let mut right = Vec::with_capacity(tc.t_grid.len());
    right.push(acc.clone());
    for m in 0..tc.steps() {
        let state = tc.value(m);
        let op = phi.value_at(tc.inverse.values[m], &state);
        for j in 0..basis.dim() {
            let scale = basis.sqrt_lambda()[j] * tc.coord_increment(j, m);
            for i in 0..h_dim {
                acc.0[i] += op.get(i, j) * scale;
            }
        }
        right.push(acc.clone());
    }
    let gap = max_gap(&left, &right);
    Ok(CovReport {
        t_grid: tc.t_grid.clone(),
        left,
        right,
        max_gap: gap,
    })
}

/// Second change of variable: `∫_0^t Φ(s) dW_{E_s}` against
/// `∫_0^{E_t} Φ(U_{s-}) dW_s`, pathwise on shared noise.
pub fn change_of_variable_2(phi: &Integrand, noise: &NoiseRealization) -> Result<CovReport> {
    let tc_integral = integrate_tc(phi, &noise.tc)?;
    let left = tc_integral.values.clone();

    // Operational-clock side: step k carries Φ(U at the step's left node),
    // the left limit of U over the open step.
    let qpath = &noise.qwiener;
    let basis = &qpath.basis;
    let h_dim = left[0].dim();
    let mut acc = HVector::zeros(h_dim);
    let mut cumulative = Vec::with_capacity(qpath.tau_grid.len());
    cumulative.push(acc.clone());
    for k in 0..qpath.tau_grid.len() - 1 {
        let state = qpath.value(k);
        let op = phi.value_at(noise.subordinator.values[k], &state);
        for j in 0..basis.dim() {
            let scale = basis.sqrt_lambda()[j] * (qpath.coords[j][k + 1] - qpath.coords[j][k]);
            for i in 0..h_dim {
                acc.0[i] += op.get(i, j) * scale;
            }
        }
        cumulative.push(acc.clone());
    }
    let cum_path = IntegralPath {
        t_grid: qpath.tau_grid.clone(),
        values: cumulative,
    };
    let right: Vec<HVector> = noise
        .inverse
        .values
        .iter()
        .map(|&e| cum_path.value_at(e))
        .collect();
    let gap = max_gap(&left, &right);
    Ok(CovReport {
        t_grid: noise.tc.t_grid.clone(),
        left,
        right,
        max_gap: gap,
    })
}

/// Deterministic H-valued drift rule.
#[derive(Clone)]
pub enum DriftRule {
    Zero,
    Constant(HVector),
    TimeVarying(Arc<dyn Fn(f64) -> HVector + Send + Sync>),
}

impl DriftRule {
    pub fn value_at(&self, t: f64, dim: usize) -> HVector {
        match self {
            DriftRule::Zero => HVector::zeros(dim),
            DriftRule::Constant(v) => v.clone(),
            DriftRule::TimeVarying(f) => f(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DriftRule::Zero)
    }
}

/// Built-in twice-differentiable functionals with closed-form derivatives.
#[derive(Debug, Clone)]
pub enum ObservableF {
    /// `F(x) = ‖x‖²_H`
    NormSq,
    /// `F(x) = p(x_j)` for a polynomial `p` in one coordinate.
    CoordinatePoly { index: usize, coeffs: Vec<f64> },
    /// `F(x) = ⟨h, x⟩_H` (no curvature; exercises exact telescoping).
    Linear { h: HVector },
}

impl ObservableF {
    pub fn value(&self, x: &HVector) -> f64 {
        match self {
            ObservableF::NormSq => x.norm_sq(),
            ObservableF::CoordinatePoly { index, coeffs } => poly_eval(coeffs, x.0[*index]),
            ObservableF::Linear { h } => h.dot(x),
        }
    }

    pub fn gradient(&self, x: &HVector) -> HVector {
        match self {
            ObservableF::NormSq => x.scaled(2.0),
            ObservableF::CoordinatePoly { index, coeffs } => {
                let d = poly_eval(&poly_derivative(coeffs), x.0[*index]);
                let mut g = HVector::zeros(x.dim());
                g.0[*index] = d;
                g
            }
            ObservableF::Linear { h } => h.clone(),
        }
    }

    /// `tr(F_xx(x) (φ Q^{1/2})(φ Q^{1/2})^*)`.
    pub fn hessian_trace(&self, x: &HVector, op: &HsOperator, basis: &SpectralBasis) -> f64 {
        match self {
            ObservableF::NormSq => 2.0 * op.hs_norm_sq(basis),
            ObservableF::CoordinatePoly { index, coeffs } => {
                let second = poly_eval(&poly_derivative(&poly_derivative(coeffs)), x.0[*index]);
                let mut row_sq = 0.0;
                for j in 0..op.cols() {
                    let v = op.get(*index, j);
                    row_sq += basis.lambda()[j] * v * v;
                }
                second * row_sq
            }
            ObservableF::Linear { .. } => 0.0,
        }
    }
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Itô process assembled on the physical grid from
/// `dX = ψ dt + γ dE + Φ dW_E`.
#[derive(Debug, Clone)]
pub struct ItoProcessPath {
    pub t_grid: Vec<f64>,
    pub values: Vec<HVector>,
}

pub fn build_ito_process(
    x0: &HVector,
    psi: &DriftRule,
    gamma: &DriftRule,
    phi: &Integrand,
    noise: &NoiseRealization,
) -> Result<ItoProcessPath> {
    let tc = &noise.tc;
    let basis = &tc.basis;
    let dim = x0.dim();
    let mut values = Vec::with_capacity(tc.t_grid.len());
    let mut x = x0.clone();
    values.push(x.clone());
    for m in 0..tc.steps() {
        let t = tc.t_grid[m];
        let dt = tc.t_grid[m + 1] - t;
        let de = tc.inverse.values[m + 1] - tc.inverse.values[m];
        if !psi.is_zero() {
            x.axpy(dt, &psi.value_at(t, dim));
        }
        if !gamma.is_zero() && de > 0.0 {
            x.axpy(de, &gamma.value_at(t, dim));
        }
        let op = phi.value_at(t, &tc.value(m));
        for j in 0..basis.dim() {
            let scale = basis.sqrt_lambda()[j] * tc.coord_increment(j, m);
            if scale != 0.0 {
                for i in 0..dim {
                    x.0[i] += op.get(i, j) * scale;
                }
            }
        }
        values.push(x.clone());
    }
    Ok(ItoProcessPath {
        t_grid: tc.t_grid.clone(),
        values,
    })
}

/// Pathwise residual of the change-of-variable identity
///
/// ```text
/// F(X(t)) - F(X(0)) = ∫_0^t ⟨F_x(X), ψ⟩ ds
///                   + ∫_0^{E_t} ⟨F_x(X(U(s-))), γ(U(s-))⟩ ds
///                   + ∫_0^{E_t} ⟨F_x(X(U(s-))), φ(U(s-)) dW_s⟩
///                   + ½ ∫_0^{E_t} tr(F_xx(X(U(s-))) (φ(U(s-))Q^{1/2})(φ(U(s-))Q^{1/2})^*) ds,
/// ```
///
/// evaluated on one realization. Returns the residual curve over the
/// physical grid and its max absolute value.
#[derive(Debug, Clone)]
pub struct ItoResidualReport {
    pub t_grid: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

pub fn ito_formula_residual(
    f: &ObservableF,
    psi: &DriftRule,
    gamma: &DriftRule,
    phi: &Integrand,
    x0: &HVector,
    noise: &NoiseRealization,
) -> Result<ItoResidualReport> {
    let x_path = build_ito_process(x0, psi, gamma, phi, noise)?;
    let tc = &noise.tc;
    let basis = &tc.basis;
    let dim = x0.dim();
    let tau = &noise.subordinator.tau_grid;
    let u_vals = &noise.subordinator.values;
    let qpath = &noise.qwiener;

    // Physical-time drift primitive, for rebuilding the composed state on
    // the operational clock.
    let psi_primitive = psi_primitive(psi, *u_vals.last().unwrap(), dim, tc.t_grid.len() * 4);

    // Operational-clock integrals, cumulative over tau nodes. The state is
    // the composed process at the left limit of the clock,
    // `X(U(s-)) = x0 + ∫_0^{U_k} ψ ds + ∫_0^{τ_k} γ(U(s-)) ds
    //            + ∫_0^{τ_k} φ(U(s-)) dW_s`,
    // rebuilt node by node so every noise increment pairs with a state that
    // is measurable at the step's start.
    let n_tau = tau.len();
    let mut cum_de_drift = vec![0.0; n_tau];
    let mut cum_noise = vec![0.0; n_tau];
    let mut cum_trace = vec![0.0; n_tau];
    let mut composed = x0.clone();
    let mut gamma_acc = HVector::zeros(dim);
    let mut noise_acc = HVector::zeros(dim);
    for k in 0..n_tau - 1 {
        let d_tau = tau[k + 1] - tau[k];
        let u_left = u_vals[k];
        let grad = f.gradient(&composed);
        let op = phi.value_at(u_left, &composed);

        let gamma_val = if gamma.is_zero() {
            None
        } else {
            Some(gamma.value_at(u_left, dim))
        };
        let de_drift = gamma_val
            .as_ref()
            .map_or(0.0, |g| grad.dot(g) * d_tau);

        let mut noise_inc = 0.0;
        for j in 0..basis.dim() {
            let dw = basis.sqrt_lambda()[j] * (qpath.coords[j][k + 1] - qpath.coords[j][k]);
            if dw != 0.0 {
                let mut dir = 0.0;
                for i in 0..dim {
                    dir += grad.0[i] * op.get(i, j);
                    noise_acc.0[i] += op.get(i, j) * dw;
                }
                noise_inc += dir * dw;
            }
        }

        let trace_inc = 0.5 * f.hessian_trace(&composed, &op, basis) * d_tau;

        cum_de_drift[k + 1] = cum_de_drift[k] + de_drift;
        cum_noise[k + 1] = cum_noise[k] + noise_inc;
        cum_trace[k + 1] = cum_trace[k] + trace_inc;

        // advance the composed state to the next node
        if let Some(g) = gamma_val {
            gamma_acc.axpy(d_tau, &g);
        }
        composed = x0.clone();
        composed.axpy(1.0, &psi_primitive(u_vals[k + 1]));
        composed.axpy(1.0, &gamma_acc);
        composed.axpy(1.0, &noise_acc);
    }
    let eval_cum = |cum: &[f64], e: f64| interp_linear(tau, cum, e);

    // Physical-clock ds drift, cumulative over the t grid.
    let mut cum_ds = vec![0.0; tc.t_grid.len()];
    if !psi.is_zero() {
        for m in 0..tc.steps() {
            let t = tc.t_grid[m];
            let dt = tc.t_grid[m + 1] - t;
            let grad = f.gradient(&x_path.values[m]);
            cum_ds[m + 1] = cum_ds[m] + grad.dot(&psi.value_at(t, dim)) * dt;
        }
    }

    let f0 = f.value(x0);
    let mut residuals = Vec::with_capacity(tc.t_grid.len());
    let mut max_abs: f64 = 0.0;
    for m in 0..tc.t_grid.len() {
        let e = tc.inverse.values[m];
        let rhs = cum_ds[m]
            + eval_cum(&cum_de_drift, e)
            + eval_cum(&cum_noise, e)
            + eval_cum(&cum_trace, e);
        let r = f.value(&x_path.values[m]) - f0 - rhs;
        max_abs = max_abs.max(r.abs());
        residuals.push(r);
    }
    Ok(ItoResidualReport {
        t_grid: tc.t_grid.clone(),
        residuals,
        max_abs,
    })
}

/// Primitive `u ↦ ∫_0^u ψ(s) ds` of a deterministic drift rule. Exact for
/// zero and constant rules; cumulative trapezoid on a fine uniform grid for
/// time-varying ones.
fn psi_primitive(
    psi: &DriftRule,
    u_max: f64,
    dim: usize,
    fine_steps: usize,
) -> Box<dyn Fn(f64) -> HVector + '_> {
    match psi {
        DriftRule::Zero => Box::new(move |_| HVector::zeros(dim)),
        DriftRule::Constant(v) => {
            let v = v.clone();
            Box::new(move |u| v.scaled(u))
        }
        DriftRule::TimeVarying(rule) => {
            let n = fine_steps.max(64);
            let h = u_max.max(1e-12) / n as f64;
            let grid_pts: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
            let mut cum: Vec<HVector> = Vec::with_capacity(n + 1);
            cum.push(HVector::zeros(dim));
            let mut prev = rule(0.0);
            for i in 1..=n {
                let cur = rule(grid_pts[i]);
                let mut next = cum[i - 1].clone();
                next.axpy(0.5 * h, &prev);
                next.axpy(0.5 * h, &cur);
                cum.push(next);
                prev = cur;
            }
            Box::new(move |u| {
                let mut out = Vec::with_capacity(dim);
                for c in 0..dim {
                    let coords: Vec<f64> = cum.iter().map(|v| v.0[c]).collect();
                    out.push(interp_linear(&grid_pts, &coords, u.clamp(0.0, u_max)));
                }
                HVector(out)
            })
        }
    }
}

/// Random elementary integrand for property sweeps: a few breakpoints in
/// `(0, t_max)` with independent Gaussian operator entries.
pub fn random_elementary(
    dim: usize,
    t_max: f64,
    pieces: usize,
    rng: &mut impl rand::Rng,
) -> Integrand {
    use rand_distr::StandardNormal;
    let mut cuts: Vec<f64> = (0..pieces - 1)
        .map(|_| t_max * rng.random::<f64>())
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut breakpoints = vec![0.0];
    for c in cuts {
        if c > *breakpoints.last().unwrap() + 1e-9 && c < t_max - 1e-9 {
            breakpoints.push(c);
        }
    }
    breakpoints.push(t_max);
    let scale = 1.0 / (dim as f64).sqrt();
    let values: Vec<HsOperator> = (0..breakpoints.len() - 1)
        .map(|_| {
            let mut op = HsOperator::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    op.set(i, j, scale * z);
                }
            }
            op
        })
        .collect();
    Integrand::elementary(breakpoints, values).expect("construction is valid")
}
