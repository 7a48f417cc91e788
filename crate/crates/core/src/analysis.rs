//! Boundedness and secrecy analysis.
//!
//! The legitimate user's expected prediction covariance is bounded by the
//! iterates of a modified algebraic Riccati equation (MARE)
//!
//! ```text
//! g(X) = A X Aᵀ + Q − A X Hᵀ [𝒲 ⊙ (H X Hᵀ + I)]⁻¹ H X Aᵀ
//! ```
//!
//! with `H_i = w R_i^{-1/2} C_i` and `𝒲 = 11ᵀ + diag((1 − γ̄_i)/γ̄_i) · blockdiag(11ᵀ)`.
//! The scalar `w` shrinks the measurement to absorb the quantization error
//! through the matrix `V` built from per-channel distortion rates.

use log::warn;
use nalgebra::{Complex, DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::total_capacity;
use crate::codec::{quantize, CodecParams};
use crate::linalg::{self, block_diag, lambda_max, lambda_min, psd_sqrt, spd_inverse, vstack};
use crate::model::{SensorModel, SystemModel};
use crate::rng::{substream, Role};
use crate::{Error, Result};

/// Reception probabilities are capped here before entering `𝒲`.
pub const GAMMA_CAP: f64 = 1.0 - 1e-9;
/// Upper clamp for the default distortion rate.
pub const DELTA_N_CAP: f64 = 1.0 - 1e-6;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DIVERGENCE_TRACE: f64 = 1e12;

fn cap_gamma(gamma: &[f64]) -> Result<Vec<f64>> {
    gamma
        .iter()
        .map(|&g| {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::param("gamma", format!("probability {g} outside (0, 1]")));
            }
            if g > GAMMA_CAP {
                warn!("reception probability {g} capped at {GAMMA_CAP} for the Riccati bound");
                Ok(GAMMA_CAP)
            } else {
                Ok(g)
            }
        })
        .collect()
}

/// Inputs of the legitimate-user bound.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub a: DMatrix<f64>,
    /// Effective process covariance `D Q Dᵀ`.
    pub qeff: DMatrix<f64>,
    pub sensors: Vec<SensorModel>,
    /// Capped reception probabilities.
    pub gamma: Vec<f64>,
    /// Quantization steps, used for the default distortion rate.
    pub delta: Vec<f64>,
    pub s: f64,
    /// Fixed distortion rates; `None` derives them from the covariance.
    pub delta_n: Option<Vec<f64>>,
    /// Per-channel `η`; `None` uses the minimizer `√δ_N / |s|`.
    pub eta: Option<Vec<f64>>,
}

impl BoundParams {
    pub fn new(model: &SystemModel, sensors: &[SensorModel], gamma: &[f64], codec: &CodecParams) -> Result<Self> {
        Self::from_matrices(model.a().clone(), model.effective_q(), sensors, gamma, codec)
    }

    pub fn from_matrices(a: DMatrix<f64>, qeff: DMatrix<f64>, sensors: &[SensorModel], gamma: &[f64], codec: &CodecParams) -> Result<Self> {
        linalg::require_square("A", &a)?;
        linalg::require_shape("Qeff", &qeff, a.nrows(), a.nrows())?;
        linalg::check_psd("Qeff", &qeff)?;
        if sensors.is_empty() || gamma.len() != sensors.len() || codec.channels() != sensors.len() {
            return Err(Error::dim("bound channels", sensors.len(), format!("{} gamma / {} codec", gamma.len(), codec.channels())));
        }
        for s in sensors {
            linalg::require_shape("sensor C", s.c(), s.output_dim(), a.nrows())?;
        }
        Ok(Self {
            a,
            qeff,
            sensors: sensors.to_vec(),
            gamma: cap_gamma(gamma)?,
            delta: if codec.transparent { vec![0.0; codec.channels()] } else { codec.delta.clone() },
            s: codec.s,
            delta_n: None,
            eta: None,
        })
    }

    pub fn with_delta_n(mut self, delta_n: Vec<f64>) -> Result<Self> {
        if delta_n.len() != self.sensors.len() {
            return Err(Error::dim("delta_n", self.sensors.len(), delta_n.len()));
        }
        if let Some(d) = delta_n.iter().find(|d| !(**d >= 0.0 && **d < 1.0)) {
            return Err(Error::param("delta_n", format!("distortion rate {d} outside [0, 1)")));
        }
        self.delta_n = Some(delta_n);
        Ok(self)
    }

    pub fn with_eta(mut self, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != self.sensors.len() {
            return Err(Error::dim("eta", self.sensors.len(), eta.len()));
        }
        if eta.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::param("eta", "must be positive"));
        }
        self.eta = Some(eta);
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn dims(&self) -> Vec<usize> {
        self.sensors.iter().map(SensorModel::output_dim).collect()
    }

    pub fn stacked_c(&self) -> DMatrix<f64> {
        vstack(&self.sensors.iter().map(SensorModel::c).collect::<Vec<_>>(), self.state_dim())
    }

    pub fn stacked_r(&self) -> DMatrix<f64> {
        block_diag(&self.sensors.iter().map(SensorModel::effective_r).collect::<Vec<_>>())
    }

    /// Distortion rates for the covariance `sigma`: the fixed ones, or the default rule.
    pub fn distortion_rates(&self, sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
        match &self.delta_n {
            Some(d) => Ok(d.clone()),
            None => self
                .sensors
                .iter()
                .zip(&self.delta)
                .map(|(sensor, &delta)| default_distortion_rate(sensor, sigma, delta, self.s))
                .collect(),
        }
    }

    /// `V` for the distortion rates `delta_n`.
    pub fn v_matrix(&self, delta_n: &[f64]) -> DMatrix<f64> {
        let blocks: Vec<f64> = delta_n
            .iter()
            .enumerate()
            .map(|(i, &d)| v_block(d, self.s, self.eta.as_ref().map(|e| e[i])))
            .collect();
        v_matrix(&blocks, &self.dims())
    }

    /// Stacked `H = w R^{-1/2} C`.
    pub fn h_matrix(&self, w: f64) -> Result<DMatrix<f64>> {
        let blocks: Vec<DMatrix<f64>> = self
            .sensors
            .iter()
            .map(|s| Ok(psd_sqrt(&spd_inverse(&s.effective_r(), "sensor R")?) * s.c() * w))
            .collect::<Result<_>>()?;
        Ok(vstack(&blocks.iter().collect::<Vec<_>>(), self.state_dim()))
    }

    /// `𝒲 = 11ᵀ + diag((1 − γ̄_i)/γ̄_i I) · blockdiag(11ᵀ)`.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let dims = self.dims();
        let total: usize = dims.iter().sum();
        let mut w = DMatrix::from_element(total, total, 1.0);
        let mut row = 0;
        for (&g, &d) in self.gamma.iter().zip(&dims) {
            let extra = (1.0 - g) / g;
            w.view_mut((row, row), (d, d)).add_scalar_mut(extra);
            row += d;
        }
        w
    }

    /// `Γ̄ = diag(γ̄_i I)`.
    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        let diag: Vec<f64> = self.gamma.iter().zip(self.dims()).flat_map(|(&g, d)| std::iter::repeat_n(g, d)).collect();
        DMatrix::from_diagonal(&DVector::from_vec(diag))
    }
}

/// `min(1 − 1e−6, s² δ²/4 / λ_min(C Σ Cᵀ + R))`.
pub fn default_distortion_rate(sensor: &SensorModel, sigma: &DMatrix<f64>, delta: f64, s: f64) -> Result<f64> {
    let innov = sensor.c() * sigma * sensor.c().transpose() + sensor.effective_r();
    let lmin = lambda_min(&innov);
    if lmin <= 0.0 {
        return Err(Error::NotPd { what: "sensor innovation covariance".into(), min_eig: lmin });
    }
    Ok((s * s * delta * delta / 4.0 / lmin).min(DELTA_N_CAP))
}

/// `√(s² δ_N + |s| η + δ_N / (|s| η))`, `η` defaulting to `√δ_N / |s|`.
pub fn v_block(delta_n: f64, s: f64, eta: Option<f64>) -> f64 {
    let s_abs = s.abs();
    let eta = eta.unwrap_or(delta_n.sqrt() / s_abs);
    if delta_n == 0.0 && eta == 0.0 {
        return 0.0;
    }
    (s * s * delta_n + s_abs * eta + delta_n / (s_abs * eta)).sqrt()
}

/// Block diagonal `diag(v_i I_{d_i})`.
pub fn v_matrix(blocks: &[f64], dims: &[usize]) -> DMatrix<f64> {
    let diag: Vec<f64> = blocks.iter().zip(dims).flat_map(|(&v, &d)| std::iter::repeat_n(v, d)).collect();
    DMatrix::from_diagonal(&DVector::from_vec(diag))
}

/// `w = √(λ_min(S − V S V) / λ_max(S))` with `S = C Σ Cᵀ + R`; zero (with a
/// warning) when `S − V S V` is indefinite.
pub fn w_scalar(sigma: &DMatrix<f64>, c: &DMatrix<f64>, r: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let (w, clamped) = w_unlogged(sigma, c, r, v)?;
    if clamped {
        warn!("S - VSV is indefinite; w clamped to 0");
    }
    Ok(w)
}

fn w_unlogged(sigma: &DMatrix<f64>, c: &DMatrix<f64>, r: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<(f64, bool)> {
    let s = linalg::symmetrize(&(c * sigma * c.transpose() + r));
    let smin = lambda_min(&s);
    if smin <= 0.0 {
        return Err(Error::NotPd { what: "stacked innovation covariance".into(), min_eig: smin });
    }
    let num = lambda_min(&(&s - v * &s * v));
    if num < 0.0 {
        return Ok((0.0, true));
    }
    Ok(((num / lambda_max(&s)).sqrt(), false))
}

fn inner_matrix(x: &DMatrix<f64>, h: &DMatrix<f64>, weights: &DMatrix<f64>) -> DMatrix<f64> {
    let m = h * x * h.transpose() + DMatrix::identity(h.nrows(), h.nrows());
    weights.component_mul(&m)
}

/// The MARE map `g(X)` for a given `w`.
pub fn mare_g(x: &DMatrix<f64>, params: &BoundParams, w: f64) -> Result<DMatrix<f64>> {
    let n = params.state_dim();
    linalg::require_shape("MARE X", x, n, n)?;
    let h = params.h_matrix(w)?;
    let a = &params.a;
    let axa = a * x * a.transpose() + &params.qeff;
    let inner = inner_matrix(x, &h, &params.weight_matrix());
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(&inner)).ok_or(Error::Singular("MARE inner matrix"))?;
    let hxa = &h * x * a.transpose();
    let correction = hxa.transpose() * chol.solve(&hxa);
    Ok(linalg::symmetrize(&(axa - correction)))
}

/// `K̄ = A X Hᵀ [𝒲 ⊙ (H X Hᵀ + I)]⁻¹ Γ̄⁻¹`.
pub fn steady_state_gain(x: &DMatrix<f64>, params: &BoundParams, w: f64) -> Result<DMatrix<f64>> {
    let h = params.h_matrix(w)?;
    let inner = inner_matrix(x, &h, &params.weight_matrix());
    let inv = spd_inverse(&inner, "MARE inner matrix")?;
    let gamma_inv = params.gamma_matrix().map_diagonal(|g| 1.0 / g);
    Ok(&params.a * x * h.transpose() * inv * DMatrix::from_diagonal(&gamma_inv))
}

/// How `w` (and `δ_N`) evolve along the bound iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WPolicy {
    /// Refresh `δ_N` and `w` from every iterate.
    Recompute,
    /// Compute once from the initial iterate.
    FromInitial,
    /// Use the given `w` throughout.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub policy: WPolicy,
    /// Relative Frobenius change that declares convergence.
    pub tol: f64,
    pub divergence_trace: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { policy: WPolicy::Recompute, tol: DEFAULT_TOL, divergence_trace: DIVERGENCE_TRACE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequence {
    /// `𝒱_0, 𝒱_1, …` up to convergence, divergence or the step limit.
    pub iterates: Vec<DMatrix<f64>>,
    /// `w` used to produce each following iterate.
    pub w: Vec<f64>,
    /// Iterations at which `w` was clamped to zero.
    pub w_clamped: usize,
    pub converged: bool,
    pub diverged: bool,
    pub fixed_point: Option<DMatrix<f64>>,
}

impl BoundSequence {
    /// `trace 𝒱_k`, continued by the fixed point after convergence and by
    /// infinity after divergence or an unfinished run.
    pub fn trace_at(&self, k: usize) -> f64 {
        match self.iterates.get(k) {
            Some(v) => v.trace(),
            None => self.fixed_point.as_ref().map_or(f64::INFINITY, |f| f.trace()),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,trace\n");
        for (k, v) in self.iterates.iter().enumerate() {
            out.push_str(&format!("{k},{}\n", crate::report::fmt_f64(v.trace())));
        }
        out
    }
}

fn w_for(params: &BoundParams, sigma: &DMatrix<f64>) -> Result<(f64, bool)> {
    let delta_n = params.distortion_rates(sigma)?;
    w_unlogged(sigma, &params.stacked_c(), &params.stacked_r(), &params.v_matrix(&delta_n))
}

/// Iterates `𝒱_{k+1} = g(𝒱_k)` from `v_init` for at most `max_steps` steps.
pub fn iterate_bound(v_init: &DMatrix<f64>, params: &BoundParams, max_steps: usize, opts: BoundOptions) -> Result<BoundSequence> {
    linalg::check_psd("initial bound iterate", v_init)?;
    let mut iterates = vec![v_init.clone()];
    let mut ws = Vec::new();
    let mut clamped = 0;
    let fixed_w = match opts.policy {
        WPolicy::Fixed(w) => Some(w),
        WPolicy::FromInitial => {
            let (w, c) = w_for(params, v_init)?;
            clamped += usize::from(c);
            Some(w)
        }
        WPolicy::Recompute => None,
    };
    let mut converged = false;
    let mut diverged = false;
    for _ in 0..max_steps {
        let cur = iterates.last().expect("non-empty");
        let w = match fixed_w {
            Some(w) => w,
            None => {
                let (w, c) = w_for(params, cur)?;
                clamped += usize::from(c);
                w
            }
        };
        let next = mare_g(cur, params, w)?;
        ws.push(w);
        let change = (&next - cur).norm() / cur.norm().max(1.0);
        let trace = next.trace();
        iterates.push(next);
        if !trace.is_finite() || trace > opts.divergence_trace {
            diverged = true;
            break;
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if clamped > 0 {
        warn!("S - VSV indefinite at {clamped} bound iterations; w clamped to 0 there");
    }
    let fixed_point = converged.then(|| iterates.last().cloned()).flatten();
    Ok(BoundSequence { iterates, w: ws, w_clamped: clamped, converged, diverged, fixed_point })
}

/// Mahler measure `Π max(|λ_i|, 1)` and topological entropy `ln M`.
pub fn mahler_entropy(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    linalg::require_square("A", a)?;
    let log_m: f64 = eigenvalues(a).iter().map(|l| l.norm().max(1.0).ln()).sum();
    Ok((log_m.exp(), log_m))
}

fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    a.complex_eigenvalues().iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub capacity: f64,
    pub mahler: f64,
    pub entropy: f64,
    pub holds: bool,
}

/// Total capacity against the plant's topological entropy.
pub fn capacity_condition(a: &DMatrix<f64>, gamma: &[f64]) -> Result<CapacityReport> {
    let (mahler, entropy) = mahler_entropy(a)?;
    let capacity = total_capacity(gamma)?;
    Ok(CapacityReport { capacity, mahler, entropy, holds: capacity > entropy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbhReport {
    /// Unit-circle eigenvalues as `(re, im)`.
    pub unit_circle: Vec<(f64, f64)>,
    /// Those at which `[A − λI, 𝓑]` loses row rank.
    pub failing: Vec<(f64, f64)>,
    pub holds: bool,
}

/// Full row rank of `[A − λI, 𝓑]` at every unit-circle eigenvalue, `𝓑𝓑ᵀ = Qeff`.
pub fn pbh_unit_circle(a: &DMatrix<f64>, qeff: &DMatrix<f64>) -> Result<PbhReport> {
    linalg::require_square("A", a)?;
    linalg::require_shape("Qeff", qeff, a.nrows(), a.nrows())?;
    linalg::check_psd("Qeff", qeff)?;
    let n = a.nrows();
    let b = psd_sqrt(qeff);
    let mut unit_circle = Vec::new();
    let mut failing = Vec::new();
    for lambda in eigenvalues(a) {
        if (lambda.norm() - 1.0).abs() >= 1e-8 {
            continue;
        }
        unit_circle.push((lambda.re, lambda.im));
        let mut m = DMatrix::<Complex<f64>>::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = Complex::new(a[(r, c)], 0.0) - if r == c { lambda } else { Complex::new(0.0, 0.0) };
                m[(r, n + c)] = Complex::new(b[(r, c)], 0.0);
            }
        }
        let sv = m.svd(false, false).singular_values;
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
        if smax == 0.0 || rank < n {
            failing.push((lambda.re, lambda.im));
        }
    }
    let holds = failing.is_empty();
    Ok(PbhReport { unit_circle, failing, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub holds: bool,
    /// Minimum eigenvalue of left minus right side.
    pub margin: f64,
}

/// Evaluates
/// `Σ̆ − (A − K Γ̄ H) Σ̆ (A − K Γ̄ H)ᵀ − K ([R̆_γ blockdiag(11ᵀ)] ⊙ H Σ̆ Hᵀ) Kᵀ`
/// and reports strict positivity. `R̆_γ = diag(γ̄_i (1 − γ̄_i) I)`.
pub fn check_stability_inequality(
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    k: &DMatrix<f64>,
    gamma: &[f64],
    h: &DMatrix<f64>,
    dims: &[usize],
) -> Result<StabilityReport> {
    let n = a.nrows();
    let total: usize = dims.iter().sum();
    linalg::require_shape("Sigma", sigma, n, n)?;
    linalg::require_shape("K", k, n, total)?;
    linalg::require_shape("H", h, total, n)?;
    if gamma.len() != dims.len() {
        return Err(Error::dim("gamma", dims.len(), gamma.len()));
    }
    let gbar: Vec<f64> = gamma.iter().zip(dims).flat_map(|(&g, &d)| std::iter::repeat_n(g, d)).collect();
    let gbar = DMatrix::from_diagonal(&DVector::from_vec(gbar));
    let blocks: Vec<DMatrix<f64>> = gamma.iter().zip(dims).map(|(&g, &d)| DMatrix::from_element(d, d, g * (1.0 - g))).collect();
    let closed = a - k * &gbar * h;
    let hadamard = block_diag(&blocks).component_mul(&(h * sigma * h.transpose()));
    let diff = sigma - &closed * sigma * closed.transpose() - k * hadamard * k.transpose();
    let margin = lambda_min(&linalg::symmetrize(&diff));
    Ok(StabilityReport { holds: margin > 0.0, margin })
}

/// Coarse search for a feasible `(K, Σ̆)` of the scalar inequality:
/// `K ∈ [−10, 10]` step 0.01, `Σ̆` on a log grid over `[1e−3, 1e3]`.
pub fn scalar_stability_search(a: f64, gamma: f64, h: f64) -> Option<(f64, f64)> {
    let am = DMatrix::from_element(1, 1, a);
    let hm = DMatrix::from_element(1, 1, h);
    for si in 0..=6 {
        let sigma = 10f64.powi(si - 3);
        let sm = DMatrix::from_element(1, 1, sigma);
        for ki in 0..=2000 {
            let k = -10.0 + 0.01 * ki as f64;
            let km = DMatrix::from_element(1, 1, k);
            if check_stability_inequality(&am, &sm, &km, &[gamma], &hm, &[1]).is_ok_and(|r| r.holds) {
                return Some((k, sigma));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    /// `λ_min(Kᵉᵀ Kᵉ − κ̄ I)`.
    pub gap: f64,
    pub holds: bool,
}

/// Lower bound `κ̄ = λ_min(Qeff)² λ_min(C Cᵀ) / λ_max(C P Cᵀ + R)²` on
/// `Kᵉᵀ Kᵉ`, checked against the gain computed from `(P, C, R)`.
pub fn kappa_bound(qeff: &DMatrix<f64>, c: &DMatrix<f64>, p: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<KappaReport> {
    let n = qeff.nrows();
    linalg::require_shape("C", c, c.nrows(), n)?;
    linalg::require_shape("P", p, n, n)?;
    linalg::require_shape("R", r, c.nrows(), c.nrows())?;
    if c.iter().all(|&x| x == 0.0) {
        return Err(Error::param("C", "stacked measurement matrix is zero"));
    }
    let s = linalg::symmetrize(&(c * p * c.transpose() + r));
    let s_inv = spd_inverse(&s, "eavesdropper innovation covariance")?;
    let q_min = lambda_min(qeff).max(0.0);
    if q_min == 0.0 {
        warn!("Qeff is singular; the gain lower bound is vacuous");
    }
    let kappa = q_min * q_min * lambda_min(&(c * c.transpose())).max(0.0) / lambda_max(&s).powi(2);
    let gain = p * c.transpose() * s_inv;
    let dy = c.nrows();
    let gram = gain.transpose() * &gain;
    let gap = lambda_min(&(&gram - DMatrix::identity(dy, dy) * kappa));
    // Roundoff scales with the gain, not with κ̄, which is zero for rank-deficient C.
    let tol = 1e-12 * lambda_max(&gram).max(kappa).max(f64::MIN_POSITIVE);
    Ok(KappaReport { kappa, gap, holds: gap >= -tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDominationReport {
    pub delta_n: Vec<f64>,
    /// `λ_min(middle − left)` and its standard error.
    pub middle_margin: f64,
    pub middle_se: f64,
    /// `λ_min(right − middle)`; deterministic.
    pub right_margin: f64,
    pub holds: bool,
}

/// Monte Carlo check of
/// `R̆_dec + s E[v̆ĕᵀ + ĕv̆ᵀ] ⪯ diag((s²δ_N + |s|η + δ_N/(|s|η)) S_i) ⪯ V S V`
/// at the prediction covariance `sigma`, where `e` is the real quantizer's
/// error on `z̄ = (C x̃ + v)/s`.
pub fn noise_domination_check(
    sigma: &DMatrix<f64>,
    sensors: &[SensorModel],
    codec: &CodecParams,
    received: &[bool],
    samples: usize,
    seed: u64,
) -> Result<NoiseDominationReport> {
    if samples < 10_000 {
        return Err(Error::param("samples", "at least 10^4 samples are required"));
    }
    if received.len() != sensors.len() || codec.channels() != sensors.len() {
        return Err(Error::dim("noise domination channels", sensors.len(), received.len()));
    }
    let n = sigma.nrows();
    let idx: Vec<usize> = (0..sensors.len()).filter(|&i| received[i]).collect();
    let s = codec.s;
    let dims: Vec<usize> = idx.iter().map(|&i| sensors[i].output_dim()).collect();
    let total: usize = dims.iter().sum();
    if total == 0 {
        return Ok(NoiseDominationReport { delta_n: vec![], middle_margin: 0.0, middle_se: 0.0, right_margin: 0.0, holds: true });
    }
    let delta_n: Vec<f64> = idx
        .iter()
        .map(|&i| default_distortion_rate(&sensors[i], sigma, if codec.transparent { 0.0 } else { codec.delta[i] }, s))
        .collect::<Result<_>>()?;
    let c = vstack(&idx.iter().map(|&i| sensors[i].c()).collect::<Vec<_>>(), n);
    let r = block_diag(&idx.iter().map(|&i| sensors[i].effective_r()).collect::<Vec<_>>());
    let big_s = linalg::symmetrize(&(&c * sigma * c.transpose() + &r));
    let v_blocks: Vec<f64> = delta_n.iter().map(|&d| v_block(d, s, None)).collect();
    let mut middle = DMatrix::zeros(total, total);
    let mut row = 0;
    for (b, &d) in v_blocks.iter().zip(&dims) {
        let blk = big_s.view((row, row), (d, d)) * (b * b);
        middle.view_mut((row, row), (d, d)).copy_from(&blk);
        row += d;
    }
    let v = v_matrix(&v_blocks, &dims);
    let right = &v * &big_s * &v;
    let right_margin = lambda_min(&linalg::symmetrize(&(&right - &middle)));

    let x_factor = psd_sqrt(sigma);
    let r_factors: Vec<DMatrix<f64>> = idx.iter().map(|&i| psd_sqrt(sensors[i].r())).collect();
    let mut noise_rng = substream(seed, Role::MeasurementNoise, 0, 0);
    let mut quant_rng = substream(seed, Role::Quantizer, 0, 0);
    // Per-sample contributions, block diagonal by construction.
    let mut draws: Vec<DMatrix<f64>> = Vec::with_capacity(samples);
    let mut mean = DMatrix::zeros(total, total);
    for _ in 0..samples {
        let xt = &x_factor * DVector::from_fn(n, |_, _| StandardNormal.sample(&mut noise_rng));
        let mut sample = DMatrix::zeros(total, total);
        let mut row = 0;
        for (j, &i) in idx.iter().enumerate() {
            let sensor = &sensors[i];
            let vi = sensor.e() * (&r_factors[j] * DVector::from_fn(sensor.r().nrows(), |_, _| StandardNormal.sample(&mut noise_rng)));
            let zbar = (sensor.c() * &xt + &vi) / s;
            let e = if codec.transparent {
                DVector::zeros(zbar.len())
            } else {
                quantize(&zbar, codec.delta[i], &mut quant_rng)?.value(codec.delta[i]) - &zbar
            };
            let d = dims[j];
            let blk = &e * e.transpose() * (s * s) + (&vi * e.transpose() + &e * vi.transpose()) * s;
            sample.view_mut((row, row), (d, d)).copy_from(&blk);
            row += d;
        }
        mean += &sample;
        draws.push(sample);
    }
    mean /= samples as f64;
    let gap = linalg::symmetrize(&(&middle - &mean));
    let eig = nalgebra::SymmetricEigen::new(gap.clone());
    let (imin, middle_margin) = eig.eigenvalues.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (i, l)| if l < acc.1 { (i, l) } else { acc });
    let u = eig.eigenvectors.column(imin).into_owned();
    let proj: Vec<f64> = draws.iter().map(|d| (u.transpose() * d * &u)[(0, 0)]).collect();
    let m = proj.iter().sum::<f64>() / samples as f64;
    let var = proj.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
    let middle_se = (var / samples as f64).sqrt();
    let holds = middle_margin > -3.0 * middle_se && right_margin >= -1e-12 * lambda_max(&right).max(1.0);
    Ok(NoiseDominationReport { delta_n, middle_margin, middle_se, right_margin, holds })
}
