//! SDE solvers on the physical and operational clocks, the duality check
//! between them, and mild solutions through the semigroup.
//!
//! The two equations solved are
//!
//! ```text
//! dY(τ) = (A Y + F(τ, Y)) dτ   + B(τ, Y) dW_τ          (operational clock)
//! dX(t) = (A X + F(E_t, X)) dE_t + B(E_t, X) dW_{E_t}  (physical clock)
//! ```
//!
//! with the duality `X(t) = Y(E_t)` on shared noise. The recommended route
//! to the time-changed solution is therefore: solve the classical equation
//! on the operational grid and compose with the inverse clock; the direct
//! Euler-Maruyama iteration on the physical grid is kept for
//! cross-validation, with `dE`-increments read off the realized inverse
//! path (the equation is a pathwise Lebesgue-Stieltjes integral against E).

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{
    interp_linear, HVector, HsOperator, NoiseRealization, QWienerPath, SpectralBasis,
    TimeChangedQWienerPath,
};

/// Blow-up guard: Lipschitz test problems never approach this, so hitting
/// it signals a configuration bug rather than dynamics.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// The linear part of the drift.
#[derive(Clone)]
pub enum Generator {
    Zero,
    /// `A = diag(-μ_j)`.
    Diagonal(Vec<f64>),
    Dense(HsOperator),
}

impl Generator {
    pub fn apply(&self, x: &HVector) -> HVector {
        match self {
            Generator::Zero => HVector::zeros(x.dim()),
            Generator::Diagonal(mu) => {
                HVector(x.0.iter().zip(mu).map(|(v, m)| -m * v).collect())
            }
            Generator::Dense(op) => op.apply(x),
        }
    }

    /// Adjoint action (transpose for the dense case, self-adjoint otherwise).
    pub fn apply_adjoint(&self, x: &HVector) -> HVector {
        match self {
            Generator::Dense(op) => op.apply_adjoint(x),
            _ => self.apply(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Generator::Zero)
    }
}

/// Nonlinear drift `F(t, x)`.
#[derive(Clone)]
pub enum StateDrift {
    Zero,
    Rule(Arc<dyn Fn(f64, &HVector) -> HVector + Send + Sync>),
}

impl StateDrift {
    pub fn rule(f: impl Fn(f64, &HVector) -> HVector + Send + Sync + 'static) -> Self {
        StateDrift::Rule(Arc::new(f))
    }

    pub fn value_at(&self, t: f64, x: &HVector) -> Option<HVector> {
        match self {
            StateDrift::Zero => None,
            StateDrift::Rule(f) => Some(f(t, x)),
        }
    }
}

/// Diffusion coefficient `B(t, x)`.
#[derive(Clone)]
pub enum Diffusion {
    Constant(HsOperator),
    Rule(Arc<dyn Fn(f64, &HVector) -> HsOperator + Send + Sync>),
}

impl Diffusion {
    pub fn rule(f: impl Fn(f64, &HVector) -> HsOperator + Send + Sync + 'static) -> Self {
        Diffusion::Rule(Arc::new(f))
    }

    pub fn value_at(&self, t: f64, x: &HVector) -> HsOperator {
        match self {
            Diffusion::Constant(op) => op.clone(),
            Diffusion::Rule(f) => f(t, x),
        }
    }
}

/// Initial condition: a point or a coordinatewise Gaussian.
#[derive(Clone)]
pub enum InitialCondition {
    Point(HVector),
    ProductGaussian { mean: HVector, sd: Vec<f64> },
}

impl InitialCondition {
    pub fn sample(&self, rng: &mut impl Rng) -> HVector {
        match self {
            InitialCondition::Point(x) => x.clone(),
            InitialCondition::ProductGaussian { mean, sd } => {
                let mut x = mean.clone();
                for (v, s) in x.0.iter_mut().zip(sd) {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += s * z;
                }
                x
            }
        }
    }

    pub fn point(&self) -> Option<&HVector> {
        match self {
            InitialCondition::Point(x) => Some(x),
            _ => None,
        }
    }
}

/// Coefficients of the semilinear test problem.
#[derive(Clone)]
pub struct SdeCoefficients {
    pub a: Generator,
    pub drift: StateDrift,
    pub diffusion: Diffusion,
    pub x0: InitialCondition,
}

/// Solution path on its driving grid.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub t_grid: Vec<f64>,
    pub values: Vec<HVector>,
}

impl SolutionPath {
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

fn resolve_x0<'a>(coeffs: &'a SdeCoefficients, x0: Option<&'a HVector>) -> Result<&'a HVector> {
    match x0 {
        Some(x) => Ok(x),
        None => coeffs.x0.point().ok_or_else(|| {
            Error::parameter("random initial condition must be sampled by the caller")
        }),
    }
}

fn check_norm(x: &HVector, t: f64) -> Result<()> {
    let norm = x.norm();
    if !norm.is_finite() || norm > BLOWUP_THRESHOLD {
        return Err(Error::Diverged {
            t,
            norm,
            threshold: BLOWUP_THRESHOLD,
        });
    }
    Ok(())
}

/// Euler-Maruyama on the operational clock.
pub fn solve_classical_em(
    coeffs: &SdeCoefficients,
    qpath: &QWienerPath,
    x0: Option<&HVector>,
) -> Result<SolutionPath> {
    let basis = &qpath.basis;
    let mut y = resolve_x0(coeffs, x0)?.clone();
    let dim = y.dim();
    let mut values = Vec::with_capacity(qpath.tau_grid.len());
    values.push(y.clone());
    for k in 0..qpath.tau_grid.len() - 1 {
        let tau = qpath.tau_grid[k];
        let d_tau = qpath.tau_grid[k + 1] - tau;
        let mut next = y.clone();
        if !coeffs.a.is_zero() {
            next.axpy(d_tau, &coeffs.a.apply(&y));
        }
        if let Some(f) = coeffs.drift.value_at(tau, &y) {
            next.axpy(d_tau, &f);
        }
        let op = coeffs.diffusion.value_at(tau, &y);
        for j in 0..basis.dim() {
            let scale = basis.sqrt_lambda()[j] * (qpath.coords[j][k + 1] - qpath.coords[j][k]);
            if scale != 0.0 {
                for i in 0..dim {
                    next.0[i] += op.get(i, j) * scale;
                }
            }
        }
        check_norm(&next, qpath.tau_grid[k + 1])?;
        y = next;
        values.push(y.clone());
    }
    Ok(SolutionPath {
        t_grid: qpath.tau_grid.clone(),
        values,
    })
}

/// Euler-Maruyama on the physical clock, driven by realized `dE` and
/// `dW_E` increments. Over flat-clock intervals the state is bitwise
/// constant: both increments vanish and no arithmetic touches it.
pub fn solve_timechanged_em(
    coeffs: &SdeCoefficients,
    tc: &TimeChangedQWienerPath,
    x0: Option<&HVector>,
) -> Result<SolutionPath> {
    let basis = &tc.basis;
    let mut x = resolve_x0(coeffs, x0)?.clone();
    let dim = x.dim();
    let mut values = Vec::with_capacity(tc.t_grid.len());
    values.push(x.clone());
    for m in 0..tc.steps() {
        let e = tc.inverse.values[m];
        let de = tc.inverse.values[m + 1] - e;
        if de != 0.0 {
            let mut next = x.clone();
            if !coeffs.a.is_zero() {
                next.axpy(de, &coeffs.a.apply(&x));
            }
            if let Some(f) = coeffs.drift.value_at(e, &x) {
                next.axpy(de, &f);
            }
            let op = coeffs.diffusion.value_at(e, &x);
            for j in 0..basis.dim() {
                let scale = basis.sqrt_lambda()[j] * tc.coord_increment(j, m);
                if scale != 0.0 {
                    for i in 0..dim {
                        next.0[i] += op.get(i, j) * scale;
                    }
                }
            }
            check_norm(&next, tc.t_grid[m + 1])?;
            x = next;
        }
        values.push(x.clone());
    }
    Ok(SolutionPath {
        t_grid: tc.t_grid.clone(),
        values,
    })
}

/// Pathwise duality gap `sup_t ‖X(t) - Y(E_t)‖` on shared noise.
#[derive(Debug, Clone)]
pub struct DualityReport {
    pub t_grid: Vec<f64>,
    pub gaps: Vec<f64>,
    pub sup_gap: f64,
}

pub fn duality_check(
    coeffs: &SdeCoefficients,
    noise: &NoiseRealization,
    x0: Option<&HVector>,
) -> Result<DualityReport> {
    let x0 = resolve_x0(coeffs, x0)?;
    let classical = solve_classical_em(coeffs, &noise.qwiener, Some(x0))?;
    let time_changed = solve_timechanged_em(coeffs, &noise.tc, Some(x0))?;
    let mut gaps = Vec::with_capacity(time_changed.t_grid.len());
    let mut sup_gap: f64 = 0.0;
    for (m, &e) in noise.inverse.values.iter().enumerate() {
        let composed = classical.value_at(e);
        let gap = time_changed.values[m].sub(&composed).norm();
        sup_gap = sup_gap.max(gap);
        gaps.push(gap);
    }
    Ok(DualityReport {
        t_grid: time_changed.t_grid,
        gaps,
        sup_gap,
    })
}

/// Diagonal contraction semigroup `S(t) = diag(exp(-μ_j t))`.
#[derive(Debug, Clone)]
pub struct Semigroup {
    mu: Vec<f64>,
}

impl Semigroup {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::parameter("semigroup rates must be finite and nonempty"));
        }
        Ok(Semigroup { mu })
    }

    /// Uses the generator eigenvalues attached to a basis.
    pub fn from_basis(basis: &SpectralBasis) -> Result<Self> {
        basis
            .generator_mu()
            .map(|mu| Semigroup { mu: mu.to_vec() })
            .ok_or_else(|| Error::parameter("basis carries no generator eigenvalues"))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.mu
    }

    pub fn apply(&self, t: f64, x: &HVector) -> HVector {
        HVector(
            x.0.iter()
                .zip(&self.mu)
                .map(|(v, m)| (-m * t).exp() * v)
                .collect(),
        )
    }

    pub fn is_contraction(&self) -> bool {
        self.mu.iter().all(|&m| m >= 0.0)
    }
}

/// Mild solution by stochastic convolution with left-point increments:
/// `u(t_m) = S(t_m) u_0 + Σ_{l<m} S(t_m - t_l) B(t_l, u_l) Δw(E)_l`,
/// computed by the exact recursion `u_{m+1} = S(Δt)(u_m + B Δw_m)`.
#[derive(Debug, Clone)]
pub struct MildSolution {
    pub path: SolutionPath,
    pub warnings: Vec<String>,
}

pub fn solve_mild(
    semigroup: &Semigroup,
    diffusion: &Diffusion,
    tc: &TimeChangedQWienerPath,
    u0: &HVector,
) -> Result<MildSolution> {
    if semigroup.dim() != u0.dim() {
        return Err(Error::parameter("semigroup and initial state dimensions differ"));
    }
    let mut warnings = Vec::new();
    if !semigroup.is_contraction() {
        warnings.push(format!(
            "semigroup is not a contraction (min rate {:.3e}); mild solution computed anyway",
            semigroup.rates().iter().cloned().fold(f64::INFINITY, f64::min)
        ));
    }
    let basis = &tc.basis;
    let dim = u0.dim();
    let mut u = u0.clone();
    let mut values = Vec::with_capacity(tc.t_grid.len());
    values.push(u.clone());
    for m in 0..tc.steps() {
        let t = tc.t_grid[m];
        let dt = tc.t_grid[m + 1] - t;
        let op = diffusion.value_at(t, &u);
        let mut kicked = u.clone();
        for j in 0..basis.dim() {
            let scale = basis.sqrt_lambda()[j] * tc.coord_increment(j, m);
            if scale != 0.0 {
                for i in 0..dim {
                    kicked.0[i] += op.get(i, j) * scale;
                }
            }
        }
        u = semigroup.apply(dt, &kicked);
        check_norm(&u, tc.t_grid[m + 1])?;
        values.push(u.clone());
    }
    Ok(MildSolution {
        path: SolutionPath {
            t_grid: tc.t_grid.clone(),
            values,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate_tc, Integrand};
    use crate::rng::Streams;
    use crate::spectral::{simulate_noise, LambdaRule, SimGrid};
    use crate::stats::{mean, mean_se, variance};
    use crate::subordinator::BetaIndex;
    use approx::assert_relative_eq;
    use rayon::prelude::*;

    fn beta(b: f64) -> BetaIndex {
        BetaIndex::new(b).unwrap()
    }

    fn three_mode() -> SpectralBasis {
        SpectralBasis::new(3, LambdaRule::Explicit(vec![0.5, 0.3, 0.2])).unwrap()
    }

    fn pure_noise(dim: usize) -> SdeCoefficients {
        SdeCoefficients {
            a: Generator::Zero,
            drift: StateDrift::Zero,
            diffusion: Diffusion::Constant(HsOperator::identity(dim)),
            x0: InitialCondition::Point(HVector::zeros(dim)),
        }
    }

    fn diagonal_ou(mu: Vec<f64>) -> SdeCoefficients {
        let dim = mu.len();
        SdeCoefficients {
            a: Generator::Diagonal(mu),
            drift: StateDrift::Zero,
            diffusion: Diffusion::Constant(HsOperator::identity(dim)),
            x0: InitialCondition::Point(HVector::zeros(dim)),
        }
    }

    #[test]
    fn deterministic_decay_matches_exponential() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 512, 1.0 / 512.0).unwrap();
        let mut rng = Streams::new(70, 0).replication(0);
        let noise = simulate_noise(beta(1.0), &basis, &sim, &mut rng).unwrap();
        let mu = vec![0.5, 1.0, 2.0];
        let coeffs = SdeCoefficients {
            a: Generator::Diagonal(mu.clone()),
            drift: StateDrift::Zero,
            diffusion: Diffusion::Constant(HsOperator::zeros(3, 3)),
            x0: InitialCondition::Point(HVector(vec![1.0, -2.0, 0.5])),
        };
        let sol = solve_classical_em(&coeffs, &noise.qwiener, None).unwrap();
        let y = sol.final_value();
        for j in 0..3 {
            let exact = coeffs.x0.point().unwrap().0[j] * (-mu[j]).exp();
            assert_relative_eq!(y.0[j], exact, max_relative = 5e-3);
        }
    }

    #[test]
    fn additive_noise_with_no_drift_telescopes() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 128, 1.0 / 128.0).unwrap();
        let mut rng = Streams::new(70, 1).replication(0);
        let noise = simulate_noise(beta(1.0), &basis, &sim, &mut rng).unwrap();
        let x0 = HVector(vec![0.3, -0.4, 1.1]);
        let mut coeffs = pure_noise(3);
        coeffs.x0 = InitialCondition::Point(x0.clone());
        let sol = solve_classical_em(&coeffs, &noise.qwiener, None).unwrap();
        for (k, v) in sol.values.iter().enumerate() {
            let w = noise.qwiener.value(k);
            assert!(v.sub(&w).sub(&x0).norm() <= 1e-12);
        }
    }

    #[test]
    fn ou_stationary_variance() {
        // Mode j of dY = -mu_j Y dtau + dW has stationary variance
        // lambda_j / (2 mu_j).
        let basis = three_mode();
        let mu = vec![0.8, 1.0, 1.5];
        let coeffs = diagonal_ou(mu.clone());
        let sim = SimGrid::new(10.0, 1280, 10.0 / 1280.0).unwrap();
        let streams = Streams::new(71, 2);
        let finals: Vec<HVector> = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = streams.replication(i);
                let noise = simulate_noise(beta(1.0), &basis, &sim, &mut rng).unwrap();
                solve_classical_em(&coeffs, &noise.qwiener, None)
                    .unwrap()
                    .final_value()
                    .clone()
            })
            .collect();
        for j in 0..3 {
            let xs: Vec<f64> = finals.iter().map(|v| v.0[j]).collect();
            let var = variance(&xs);
            let target = basis.lambda()[j] / (2.0 * mu[j]);
            assert!(
                (var - target).abs() / target < 0.05,
                "mode {j}: var {var} vs {target}"
            );
        }
    }

    #[test]
    fn flat_clock_keeps_state_bitwise_constant() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 256, 1.0 / 64.0).unwrap();
        let mut rng = Streams::new(72, 3).replication(0);
        let noise = simulate_noise(beta(0.4), &basis, &sim, &mut rng).unwrap();
        let coeffs = diagonal_ou(vec![1.0, 1.0, 1.0]);
        let sol = solve_timechanged_em(&coeffs, &noise.tc, None).unwrap();
        let mut seen_flat = false;
        for m in 0..noise.tc.steps() {
            if noise.inverse.values[m + 1] == noise.inverse.values[m] {
                seen_flat = true;
                assert_eq!(sol.values[m + 1], sol.values[m]);
            }
        }
        assert!(seen_flat, "grid too coarse to exhibit flat intervals");
    }

    #[test]
    fn time_changed_pure_noise_is_the_path() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 128, 1.0 / 256.0).unwrap();
        let mut rng = Streams::new(72, 4).replication(0);
        let noise = simulate_noise(beta(0.5), &basis, &sim, &mut rng).unwrap();
        let coeffs = pure_noise(3);
        let sol = solve_timechanged_em(&coeffs, &noise.tc, None).unwrap();
        for (m, v) in sol.values.iter().enumerate() {
            assert!(v.sub(&noise.tc.value(m)).norm() <= 1e-12);
        }
    }

    #[test]
    fn duality_exact_for_pure_noise_and_degenerate_clock() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 128, 1.0 / 256.0).unwrap();
        let mut rng = Streams::new(73, 5).replication(0);
        let noise = simulate_noise(beta(0.5), &basis, &sim, &mut rng).unwrap();
        let rep = duality_check(&pure_noise(3), &noise, None).unwrap();
        assert!(rep.sup_gap <= 1e-10, "pure-noise gap {}", rep.sup_gap);

        let sim1 = SimGrid::new(1.0, 128, 1.0 / 128.0).unwrap();
        let mut rng = Streams::new(73, 6).replication(0);
        let noise1 = simulate_noise(beta(1.0), &basis, &sim1, &mut rng).unwrap();
        let rep1 = duality_check(&diagonal_ou(vec![0.5, 1.0, 2.0]), &noise1, None).unwrap();
        assert!(rep1.sup_gap <= 1e-10, "degenerate-clock gap {}", rep1.sup_gap);
    }

    #[test]
    fn duality_gap_decays_for_diagonal_ou() {
        let basis = three_mode();
        let coeffs = diagonal_ou(vec![0.5, 1.0, 2.0]);
        let streams = Streams::new(74, 7);
        let mut gaps = Vec::new();
        for (lvl, steps) in [1usize << 7, 1 << 9].into_iter().enumerate() {
            let sim = SimGrid::new(1.0, steps, 1.0 / steps as f64).unwrap();
            let level_gaps: Vec<f64> = (0..32u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = streams.child(lvl as u64).replication(i);
                    let noise = simulate_noise(beta(0.5), &basis, &sim, &mut rng).unwrap();
                    duality_check(&coeffs, &noise, None).unwrap().sup_gap
                })
                .collect();
            gaps.push(mean(&level_gaps));
        }
        assert!(
            gaps[1] < gaps[0] / 1.6,
            "duality gaps {gaps:?} did not decay"
        );
    }

    #[test]
    fn semigroup_laws() {
        let s = Semigroup::new(vec![0.5, 1.0, 2.0]).unwrap();
        let x = HVector(vec![1.0, -1.0, 2.0]);
        assert!(s.apply(0.0, &x).sub(&x).norm() <= 1e-12);
        let st = s.apply(0.7, &s.apply(0.3, &x));
        let direct = s.apply(1.0, &x);
        assert!(st.sub(&direct).norm() <= 1e-12);
        assert!(s.is_contraction());
        assert!(s.apply(2.0, &x).norm() <= x.norm());
        assert!(!Semigroup::new(vec![0.5, -0.1]).unwrap().is_contraction());
    }

    #[test]
    fn mild_without_noise_is_the_semigroup_orbit() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 64, 1.0 / 128.0).unwrap();
        let mut rng = Streams::new(75, 8).replication(0);
        let noise = simulate_noise(beta(0.5), &basis, &sim, &mut rng).unwrap();
        let sg = Semigroup::new(vec![0.5, 1.0, 2.0]).unwrap();
        let u0 = HVector(vec![1.0, 2.0, -1.0]);
        let sol = solve_mild(
            &sg,
            &Diffusion::Constant(HsOperator::zeros(3, 3)),
            &noise.tc,
            &u0,
        )
        .unwrap();
        assert!(sol.warnings.is_empty());
        for (m, v) in sol.path.values.iter().enumerate() {
            let exact = sg.apply(noise.tc.t_grid[m], &u0);
            assert!(v.sub(&exact).norm() <= 1e-12);
        }
    }

    #[test]
    fn mild_with_zero_rates_is_the_stochastic_integral() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 64, 1.0 / 128.0).unwrap();
        let mut rng = Streams::new(75, 9).replication(0);
        let noise = simulate_noise(beta(0.5), &basis, &sim, &mut rng).unwrap();
        let sg = Semigroup::new(vec![0.0, 0.0, 0.0]).unwrap();
        let u0 = HVector(vec![0.2, -0.1, 0.4]);
        let op = HsOperator::from_diag(&[1.0, 0.5, 2.0]);
        let sol = solve_mild(&sg, &Diffusion::Constant(op.clone()), &noise.tc, &u0).unwrap();
        let integral = integrate_tc(&Integrand::constant(op), &noise.tc).unwrap();
        for m in 0..sol.path.values.len() {
            let expect = integral.values[m].add(&u0);
            assert!(sol.path.values[m].sub(&expect).norm() <= 1e-12);
        }
    }

    #[test]
    fn mild_warns_when_not_contractive() {
        let basis = three_mode();
        let sim = SimGrid::new(0.5, 16, 1.0 / 64.0).unwrap();
        let mut rng = Streams::new(75, 10).replication(0);
        let noise = simulate_noise(beta(0.5), &basis, &sim, &mut rng).unwrap();
        let sg = Semigroup::new(vec![0.5, -0.25, 1.0]).unwrap();
        let sol = solve_mild(
            &sg,
            &Diffusion::Constant(HsOperator::zeros(3, 3)),
            &noise.tc,
            &HVector::zeros(3),
        )
        .unwrap();
        assert_eq!(sol.warnings.len(), 1);
    }

    #[test]
    fn mild_per_mode_variance_matches_coupled_clock_integral() {
        // Var(u_j(T)) = lambda_j E[ int_0^T exp(-2 mu_j (T-s)) dE_s ],
        // the right side estimated on the same inverse paths.
        let basis = three_mode();
        let mu = vec![0.5, 1.0, 2.0];
        let sg = Semigroup::new(mu.clone()).unwrap();
        let sim = SimGrid::new(1.0, 128, 1.0 / 256.0).unwrap();
        let streams = Streams::new(76, 11);
        let t_max = 1.0;
        let rows: Vec<(HVector, Vec<f64>)> = (0..20_000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = streams.replication(i);
                let noise = simulate_noise(beta(0.5), &basis, &sim, &mut rng).unwrap();
                let sol = solve_mild(
                    &sg,
                    &Diffusion::Constant(HsOperator::identity(3)),
                    &noise.tc,
                    &HVector::zeros(3),
                )
                .unwrap();
                let mut clock_integrals = vec![0.0; 3];
                for m in 0..noise.tc.steps() {
                    let de = noise.inverse.values[m + 1] - noise.inverse.values[m];
                    if de > 0.0 {
                        let t = noise.tc.t_grid[m];
                        for (j, cj) in clock_integrals.iter_mut().enumerate() {
                            *cj += (-2.0 * mu[j] * (t_max - t)).exp() * de;
                        }
                    }
                }
                (sol.path.final_value().clone(), clock_integrals)
            })
            .collect();
        for j in 0..3 {
            let us: Vec<f64> = rows.iter().map(|r| r.0 .0[j]).collect();
            let var = variance(&us);
            let rhs: Vec<f64> = rows
                .iter()
                .map(|r| basis.lambda()[j] * r.1[j])
                .collect();
            let (rhs_mean, rhs_se) = mean_se(&rhs);
            assert!(
                (var - rhs_mean).abs() <= 4.0 * rhs_se + 0.05 * rhs_mean,
                "mode {j}: var {var} vs coupled {rhs_mean} (se {rhs_se})"
            );
        }
    }

    #[test]
    fn blowup_is_reported() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 64, 1.0 / 64.0).unwrap();
        let mut rng = Streams::new(77, 12).replication(0);
        let noise = simulate_noise(beta(1.0), &basis, &sim, &mut rng).unwrap();
        let coeffs = SdeCoefficients {
            a: Generator::Zero,
            drift: StateDrift::rule(|_, x| x.scaled(1e9)),
            diffusion: Diffusion::Constant(HsOperator::zeros(3, 3)),
            x0: InitialCondition::Point(HVector(vec![1.0, 0.0, 0.0])),
        };
        assert!(matches!(
            solve_classical_em(&coeffs, &noise.qwiener, None),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn random_initial_condition_requires_explicit_sample() {
        let basis = three_mode();
        let sim = SimGrid::new(1.0, 16, 1.0 / 32.0).unwrap();
        let mut rng = Streams::new(77, 13).replication(0);
        let noise = simulate_noise(beta(1.0), &basis, &sim, &mut rng).unwrap();
        let coeffs = SdeCoefficients {
            x0: InitialCondition::ProductGaussian {
                mean: HVector::zeros(3),
                sd: vec![1.0, 1.0, 1.0],
            },
            ..pure_noise(3)
        };
        assert!(solve_classical_em(&coeffs, &noise.qwiener, None).is_err());
        let x0 = coeffs.x0.sample(&mut rng);
        assert!(solve_classical_em(&coeffs, &noise.qwiener, Some(&x0)).is_ok());
    }
}
