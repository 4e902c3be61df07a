//! Spectral truncation of the covariance operator and simulation of
//! Q-Wiener and time-changed Q-Wiener processes.
//!
//! Everything is expressed in the eigenbasis of `Q`: an element of the
//! Hilbert space is its coefficient vector, an operator is a dense matrix
//! acting on coefficients, and the Q-Wiener path is a family of independent
//! standard Brownian coordinates `w_j` scaled by `λ_j^{1/2}` whenever a
//! vector is materialized. Basis vectors themselves never appear.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid;
use crate::rng::Streams;
use crate::stats;
use crate::subordinator::{
    invert_path, simulate_until_exceeds, BetaIndex, InversePath, SubordinatorPath,
};

/// Eigenvalue law for the covariance operator.
#[derive(Debug, Clone)]
pub enum LambdaRule {
    /// `λ_j = j^{-p}`, summable for p > 1.
    Power { p: f64 },
    /// Explicit positive eigenvalues; the intended tail is zero.
    Explicit(Vec<f64>),
}

/// Finite spectral truncation of `Q` (and, optionally, of a diagonal
/// generator for test problems).
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    lambda: Vec<f64>,
    sqrt_lambda: Vec<f64>,
    generator_mu: Option<Vec<f64>>,
    trace_q: f64,
    tail: f64,
}

impl SpectralBasis {
    pub fn new(dim_j: usize, rule: LambdaRule) -> Result<Self> {
        if dim_j == 0 {
            return Err(Error::parameter("truncation level must be at least 1"));
        }
        let (lambda, tail) = match rule {
            LambdaRule::Power { p } => {
                if !(p > 1.0) {
                    return Err(Error::parameter(format!(
                        "power rule needs p > 1 for a trace-class tail, got p = {p}"
                    )));
                }
                let lambda: Vec<f64> =
                    (1..=dim_j).map(|j| (j as f64).powf(-p)).collect();
                (lambda, power_tail(dim_j as f64, p))
            }
            LambdaRule::Explicit(lambda) => {
                if lambda.len() != dim_j {
                    return Err(Error::parameter(format!(
                        "explicit rule supplies {} eigenvalues for dimension {dim_j}",
                        lambda.len()
                    )));
                }
                if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return Err(Error::parameter("eigenvalues must be positive and finite"));
                }
                (lambda, 0.0)
            }
        };
        let trace_q = stats::pairwise_sum(&lambda);
        let sqrt_lambda = lambda.iter().map(|&l| l.sqrt()).collect();
        Ok(SpectralBasis {
            lambda,
            sqrt_lambda,
            generator_mu: None,
            trace_q,
            tail,
        })
    }

    /// Attach diagonal generator eigenvalues (`A = diag(-μ_j)`).
    pub fn with_generator(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.dim() {
            return Err(Error::parameter("generator eigenvalue count must match dimension"));
        }
        self.generator_mu = Some(mu);
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    #[inline]
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    #[inline]
    pub fn sqrt_lambda(&self) -> &[f64] {
        &self.sqrt_lambda
    }

    pub fn generator_mu(&self) -> Option<&[f64]> {
        self.generator_mu.as_deref()
    }

    #[inline]
    pub fn trace_q(&self) -> f64 {
        self.trace_q
    }

    /// `Σ_{j>J} λ_j` under the intended infinite rule, so truncation bias
    /// stays visible in reports.
    #[inline]
    pub fn truncation_tail(&self) -> f64 {
        self.tail
    }
}

/// Euler-Maclaurin tail of `Σ_{j>J} j^{-p}`.
fn power_tail(j: f64, p: f64) -> f64 {
    j.powf(1.0 - p) / (p - 1.0) - 0.5 * j.powf(-p) + p / 12.0 * j.powf(-p - 1.0)
        - p * (p + 1.0) * (p + 2.0) / 720.0 * j.powf(-p - 3.0)
}

/// Coefficient vector in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct HVector(pub Vec<f64>);

impl HVector {
    pub fn zeros(dim: usize) -> Self {
        HVector(vec![0.0; dim])
    }

    pub fn unit(dim: usize, j: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[j] = 1.0;
        HVector(v)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &HVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &HVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> HVector {
        HVector(self.0.iter().map(|a| c * a).collect())
    }

    pub fn sub(&self, other: &HVector) -> HVector {
        HVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &HVector) -> HVector {
        HVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Dense operator from K to H in eigencoordinates (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct HsOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl HsOperator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        HsOperator {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = HsOperator::zeros(dim, dim);
        for j in 0..dim {
            op.data[j * dim + j] = 1.0;
        }
        op
    }

    pub fn scaled_identity(c: f64, dim: usize) -> Self {
        let mut op = HsOperator::zeros(dim, dim);
        for j in 0..dim {
            op.data[j * dim + j] = c;
        }
        op
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut op = HsOperator::zeros(dim, dim);
        for (j, &d) in diag.iter().enumerate() {
            op.data[j * dim + j] = d;
        }
        op
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        if r == 0 || rows.iter().any(|row| row.len() != rows[0].len()) {
            return Err(Error::parameter("operator rows must be nonempty and rectangular"));
        }
        let c = rows[0].len();
        Ok(HsOperator {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn apply(&self, x: &HVector) -> HVector {
        assert_eq!(x.dim(), self.cols, "operator/vector dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(&x.0).map(|(a, b)| a * b).sum();
        }
        HVector(out)
    }

    /// Adjoint action `Aᵀ y` (real coefficients, so adjoint = transpose).
    pub fn apply_adjoint(&self, y: &HVector) -> HVector {
        assert_eq!(y.dim(), self.rows, "operator/vector dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * y.0[i];
            }
        }
        HVector(out)
    }

    pub fn column(&self, j: usize) -> HVector {
        HVector((0..self.rows).map(|i| self.get(i, j)).collect())
    }

    /// `a*X + b*Y`
    pub fn linear_combination(a: f64, x: &HsOperator, b: f64, y: &HsOperator) -> HsOperator {
        assert_eq!((x.rows, x.cols), (y.rows, y.cols));
        HsOperator {
            rows: x.rows,
            cols: x.cols,
            data: x
                .data
                .iter()
                .zip(&y.data)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        }
    }

    /// Hilbert-Schmidt norm squared against `Q`: `Σ_j λ_j ‖column_j‖²`,
    /// the squared norm of the operator from `K_Q` to `H`.
    pub fn hs_norm_sq(&self, basis: &SpectralBasis) -> f64 {
        assert_eq!(self.cols, basis.dim(), "operator does not act on the basis space");
        let mut total = 0.0;
        for j in 0..self.cols {
            let mut col_sq = 0.0;
            for i in 0..self.rows {
                let v = self.get(i, j);
                col_sq += v * v;
            }
            total += basis.lambda()[j] * col_sq;
        }
        total
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Q-Wiener path: independent standard Brownian coordinates on an
/// operational-time grid. `coords[j][k] = w_j(tau_grid[k])`.
#[derive(Debug, Clone)]
pub struct QWienerPath {
    pub tau_grid: Vec<f64>,
    pub coords: Vec<Vec<f64>>,
    pub basis: SpectralBasis,
}

impl QWienerPath {
    /// The H-valued path value `Σ_j λ_j^{1/2} w_j(τ_k) f_j` at node `k`.
    pub fn value(&self, k: usize) -> HVector {
        HVector(
            self.coords
                .iter()
                .zip(self.basis.sqrt_lambda())
                .map(|(w, s)| s * w[k])
                .collect(),
        )
    }

    pub fn norm_sq_at(&self, k: usize) -> f64 {
        self.coords
            .iter()
            .zip(self.basis.lambda())
            .map(|(w, l)| l * w[k] * w[k])
            .sum()
    }

    pub fn horizon(&self) -> f64 {
        *self.tau_grid.last().unwrap()
    }

    /// Linear interpolation of coordinate `j` at operational time `tau`.
    /// Exact grid hits return the stored value bit-for-bit.
    pub fn coord_at(&self, j: usize, tau: f64) -> f64 {
        interp_linear(&self.tau_grid, &self.coords[j], tau)
    }
}

pub(crate) fn interp_linear(grid_pts: &[f64], values: &[f64], x: f64) -> f64 {
    debug_assert!(x >= grid_pts[0] - 1e-12 && x <= *grid_pts.last().unwrap() + 1e-12);
    match grid_pts.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(i) => values[i],
        Err(i) => {
            if i == 0 {
                return values[0];
            }
            if i >= grid_pts.len() {
                return *values.last().unwrap();
            }
            let (a, b) = (grid_pts[i - 1], grid_pts[i]);
            let w = (x - a) / (b - a);
            values[i - 1] + w * (values[i] - values[i - 1])
        }
    }
}

/// Simulate a Q-Wiener path: each coordinate is an independent standard
/// Brownian motion, drawn coordinate-by-coordinate in grid order.
pub fn simulate_qwiener(
    basis: &SpectralBasis,
    tau_grid: &[f64],
    rng: &mut impl Rng,
) -> Result<QWienerPath> {
    grid::validate(tau_grid)?;
    let mut coords = Vec::with_capacity(basis.dim());
    for _ in 0..basis.dim() {
        let mut w = Vec::with_capacity(tau_grid.len());
        w.push(0.0);
        let mut level = 0.0;
        for step in tau_grid.windows(2) {
            let dt = step[1] - step[0];
            let z: f64 = rng.sample(StandardNormal);
            level += dt.sqrt() * z;
            w.push(level);
        }
        coords.push(w);
    }
    Ok(QWienerPath {
        tau_grid: tau_grid.to_vec(),
        coords,
        basis: basis.clone(),
    })
}

/// Time-changed Q-Wiener path: coordinate values at `E(t_m)`.
#[derive(Debug, Clone)]
pub struct TimeChangedQWienerPath {
    pub t_grid: Vec<f64>,
    pub inverse: InversePath,
    pub coords_at_e: Vec<Vec<f64>>,
    pub basis: SpectralBasis,
}

impl TimeChangedQWienerPath {
    /// `W_{E_t}` at node `m`, as an H vector.
    pub fn value(&self, m: usize) -> HVector {
        HVector(
            self.coords_at_e
                .iter()
                .zip(self.basis.sqrt_lambda())
                .map(|(w, s)| s * w[m])
                .collect(),
        )
    }

    pub fn norm_sq_at(&self, m: usize) -> f64 {
        self.coords_at_e
            .iter()
            .zip(self.basis.lambda())
            .map(|(w, l)| l * w[m] * w[m])
            .sum()
    }

    pub fn steps(&self) -> usize {
        self.t_grid.len() - 1
    }

    /// Coordinate increment `w_j(E_{t_{m+1}}) - w_j(E_{t_m})`.
    #[inline]
    pub fn coord_increment(&self, j: usize, m: usize) -> f64 {
        self.coords_at_e[j][m + 1] - self.coords_at_e[j][m]
    }
}

/// Compose a Q-Wiener path with an inverse-subordinator path by evaluating
/// each coordinate at `E(t_m)` (linear interpolation between operational
/// grid nodes; exact node hits are exact lookups). Wherever `E` is flat the
/// composed coordinates are bitwise constant.
pub fn compose_time_change(
    qpath: &QWienerPath,
    inverse: &InversePath,
) -> Result<TimeChangedQWienerPath> {
    if inverse.horizon() > qpath.horizon() + 1e-12 {
        return Err(Error::horizon(format!(
            "inverse path reaches operational time {} but the Q-Wiener path stops at {}",
            inverse.horizon(),
            qpath.horizon()
        )));
    }
    let coords_at_e = qpath
        .coords
        .iter()
        .map(|w| {
            inverse
                .values
                .iter()
                .map(|&e| interp_linear(&qpath.tau_grid, w, e))
                .collect()
        })
        .collect();
    Ok(TimeChangedQWienerPath {
        t_grid: inverse.t_grid.clone(),
        inverse: inverse.clone(),
        coords_at_e,
        basis: qpath.basis.clone(),
    })
}

/// Brownian-bridge variant: inverse times strictly inside an operational
/// grid cell get an exact conditional draw instead of linear interpolation,
/// conditioning sequentially on the previously refined point and the cell's
/// right node. Off by default; used for interpolation-error studies.
pub fn compose_time_change_bridge(
    qpath: &QWienerPath,
    inverse: &InversePath,
    rng: &mut impl Rng,
) -> Result<TimeChangedQWienerPath> {
    if inverse.horizon() > qpath.horizon() + 1e-12 {
        return Err(Error::horizon("inverse path exceeds the Q-Wiener horizon"));
    }
    let tau = &qpath.tau_grid;
    let mut coords_at_e: Vec<Vec<f64>> = Vec::with_capacity(qpath.coords.len());
    for w in &qpath.coords {
        let mut out: Vec<f64> = Vec::with_capacity(inverse.values.len());
        // (time, value) of the last refined point inside the current cell
        let mut last: Option<(f64, f64)> = None;
        let mut prev_e = f64::NEG_INFINITY;
        for &e in &inverse.values {
            let v = match tau.binary_search_by(|g| g.total_cmp(&e)) {
                Ok(i) => {
                    last = None;
                    w[i]
                }
                Err(i) => {
                    let (a, b) = (tau[i - 1], tau[i]);
                    if e == prev_e {
                        // flat clock: repeat the refined value exactly
                        *out.last().unwrap()
                    } else {
                        let (ta, va) = match last {
                            Some((t, v)) if t >= a && t < e => (t, v),
                            _ => (a, w[i - 1]),
                        };
                        let wb = w[i];
                        let mean = va + (e - ta) / (b - ta) * (wb - va);
                        let var = (e - ta) * (b - e) / (b - ta);
                        let z: f64 = rng.sample(StandardNormal);
                        let v = mean + var.max(0.0).sqrt() * z;
                        last = Some((e, v));
                        v
                    }
                }
            };
            prev_e = e;
            out.push(v);
        }
        coords_at_e.push(out);
    }
    Ok(TimeChangedQWienerPath {
        t_grid: inverse.t_grid.clone(),
        inverse: inverse.clone(),
        coords_at_e,
        basis: qpath.basis.clone(),
    })
}

/// Cumulative realized quadratic variation `Σ_m ‖ΔW_E‖²_K` along the
/// physical grid; converges to `tr(Q)·E_t` under refinement.
pub fn realized_quadratic_variation(path: &TimeChangedQWienerPath) -> Vec<f64> {
    let mut qv = Vec::with_capacity(path.t_grid.len());
    qv.push(0.0);
    let mut acc = 0.0;
    for m in 0..path.steps() {
        let mut inc_sq = 0.0;
        for (j, l) in path.basis.lambda().iter().enumerate() {
            let d = path.coord_increment(j, m);
            inc_sq += l * d * d;
        }
        acc += inc_sq;
        qv.push(acc);
    }
    qv
}

/// Per-mode realized quadratic variation; mode `j` converges to `λ_j·E_t`.
pub fn realized_qv_per_mode(path: &TimeChangedQWienerPath) -> Vec<Vec<f64>> {
    (0..path.basis.dim())
        .map(|j| {
            let l = path.basis.lambda()[j];
            let mut acc = 0.0;
            let mut qv = Vec::with_capacity(path.t_grid.len());
            qv.push(0.0);
            for m in 0..path.steps() {
                let d = path.coord_increment(j, m);
                acc += l * d * d;
                qv.push(acc);
            }
            qv
        })
        .collect()
}

/// Grid description shared by the Monte Carlo drivers: physical horizon and
/// step count, and the operational-time resolution of the subordinator.
#[derive(Debug, Clone, Copy)]
pub struct SimGrid {
    pub t_max: f64,
    pub t_steps: usize,
    pub d_tau: f64,
}

impl SimGrid {
    pub fn new(t_max: f64, t_steps: usize, d_tau: f64) -> Result<Self> {
        if !(t_max > 0.0) || t_steps == 0 || !(d_tau > 0.0) {
            return Err(Error::parameter(
                "SimGrid needs positive t_max, t_steps, and d_tau",
            ));
        }
        Ok(SimGrid {
            t_max,
            t_steps,
            d_tau,
        })
    }

    pub fn t_grid(&self) -> Vec<f64> {
        grid::uniform(self.t_max, self.t_steps).expect("validated in constructor")
    }
}

/// One coupled realization of the driving noise: the subordinator, its
/// inverse on the physical grid, the Q-Wiener path on the subordinator's
/// operational grid, and their composition.
///
/// The subordinator is always drawn before any Brownian coordinate. For
/// β = 1 the operational grid coincides with the physical grid and the
/// inverse is the exact identity, so the composed path is bit-identical to
/// the Q-Wiener path.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub subordinator: SubordinatorPath,
    pub inverse: InversePath,
    pub qwiener: QWienerPath,
    pub tc: TimeChangedQWienerPath,
}

pub fn simulate_noise(
    beta: BetaIndex,
    basis: &SpectralBasis,
    sim: &SimGrid,
    rng: &mut impl Rng,
) -> Result<NoiseRealization> {
    let t_grid = sim.t_grid();
    if beta.is_identity() {
        let subordinator = SubordinatorPath::new(t_grid.clone(), t_grid.clone())?;
        let inverse = InversePath::identity(&t_grid)?;
        let qwiener = simulate_qwiener(basis, &t_grid, rng)?;
        let tc = compose_time_change(&qwiener, &inverse)?;
        return Ok(NoiseRealization {
            subordinator,
            inverse,
            qwiener,
            tc,
        });
    }
    let subordinator = simulate_until_exceeds(beta, sim.t_max, sim.d_tau, rng, 1 << 26)?;
    let inverse = invert_path(&subordinator, &t_grid)?;
    let qwiener = simulate_qwiener(basis, &subordinator.tau_grid, rng)?;
    let tc = compose_time_change(&qwiener, &inverse)?;
    Ok(NoiseRealization {
        subordinator,
        inverse,
        qwiener,
        tc,
    })
}

/// Report for the fourth moment of time-changed increments. Conditioning on
/// the clock makes the increment Gaussian with covariance `ΔE·Q`, so
///
/// ```text
/// E‖W_{E_{t2}} - W_{E_{t1}}‖⁴ = ((trQ)² + 2 tr(Q²)) · E[(E_{t2} - E_{t1})²],
/// ```
///
/// with `3 (trQ)² E[(ΔE)²]` as an upper bound (equality only for a single
/// mode). Both sides are estimated on the same inverse paths; `rhs` is the
/// exact identity and `upper` the single-mode-style bound.
#[derive(Debug, Clone)]
pub struct FourthMomentReport {
    pub pairs: Vec<(f64, f64)>,
    pub lhs: Vec<f64>,
    pub lhs_se: Vec<f64>,
    pub rhs: Vec<f64>,
    pub rhs_se: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn increment_fourth_moment_check(
    basis: &SpectralBasis,
    beta: BetaIndex,
    t_pairs: &[(f64, f64)],
    mc: usize,
    sim: &SimGrid,
    streams: &Streams,
) -> Result<FourthMomentReport> {
    use rayon::prelude::*;
    if t_pairs.iter().any(|&(a, b)| !(a < b) || a < 0.0) {
        return Err(Error::parameter("t pairs must be increasing and nonnegative"));
    }
    if t_pairs.iter().any(|&(_, b)| b > sim.t_max) {
        return Err(Error::parameter("t pairs must lie within the grid horizon"));
    }
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..mc as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.replication(i);
            let noise = simulate_noise(beta, basis, sim, &mut rng).expect("simulation");
            let t_grid = &noise.tc.t_grid;
            let locate = |t: f64| -> usize {
                t_grid
                    .iter()
                    .position(|&g| (g - t).abs() < 1e-9)
                    .expect("pair times must be grid points")
            };
            let mut fourth = Vec::with_capacity(t_pairs.len());
            let mut de_sq = Vec::with_capacity(t_pairs.len());
            for &(t1, t2) in t_pairs {
                let (m1, m2) = (locate(t1), locate(t2));
                let d = noise.tc.value(m2).sub(&noise.tc.value(m1));
                let n2 = d.norm_sq();
                fourth.push(n2 * n2);
                let de = noise.inverse.values[m2] - noise.inverse.values[m1];
                de_sq.push(de * de);
            }
            (fourth, de_sq)
        })
        .collect();

    let trq = basis.trace_q();
    let tr_q_sq: f64 = basis.lambda().iter().map(|l| l * l).sum();
    let exact_coef = trq * trq + 2.0 * tr_q_sq;
    let mut report = FourthMomentReport {
        pairs: t_pairs.to_vec(),
        lhs: Vec::new(),
        lhs_se: Vec::new(),
        rhs: Vec::new(),
        rhs_se: Vec::new(),
        upper: Vec::new(),
    };
    for p in 0..t_pairs.len() {
        let fourth: Vec<f64> = per_rep.iter().map(|r| r.0[p]).collect();
        let de_sq: Vec<f64> = per_rep.iter().map(|r| exact_coef * r.1[p]).collect();
        let (lm, ls) = stats::mean_se(&fourth);
        let (rm, rs) = stats::mean_se(&de_sq);
        report.lhs.push(lm);
        report.lhs_se.push(ls);
        report.rhs.push(rm);
        report.rhs_se.push(rs);
        report.upper.push(rm / exact_coef * 3.0 * trq * trq);
    }
    Ok(report)
}

/// Columnar CSV layout `t, E_t, w_1..w_J` (coordinate values at `E_t`).
pub fn write_path_csv(path: &TimeChangedQWienerPath, out: &mut impl Write) -> io::Result<()> {
    write!(out, "t,E_t")?;
    for j in 1..=path.basis.dim() {
        write!(out, ",w_{j}")?;
    }
    writeln!(out)?;
    for m in 0..path.t_grid.len() {
        write!(out, "{:?},{:?}", path.t_grid[m], path.inverse.values[m])?;
        for j in 0..path.basis.dim() {
            write!(out, ",{:?}", path.coords_at_e[j][m])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// `tr(Q) · t^β / Γ(β+1)`, the second-moment law of `‖W_{E_t}‖`.
pub fn norm_second_moment(basis: &SpectralBasis, beta: BetaIndex, t: f64) -> f64 {
    basis.trace_q() * t.powf(beta.value()) / gamma(beta.value() + 1.0)
}
