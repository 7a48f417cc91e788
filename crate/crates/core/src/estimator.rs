//! Centralized fusion filter.
//!
//! Both the legitimate user and the eavesdropper run this recursion on their
//! own decoded streams. Erased channels are dropped from the stacked
//! measurement instead of being entered as zero rows, which keeps the
//! innovation covariance invertible and is algebraically the same update.

use nalgebra::{DMatrix, DVector};

use crate::codec::CodecParams;
use crate::linalg::{self, block_diag, require_len, require_shape, spd_condition, vstack, vstack_vectors};
use crate::model::{SensorModel, SystemModel};
use crate::{Error, Result};

/// Innovation covariances with a larger condition number are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Predicted,
    Updated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
    pub k: usize,
    pub phase: Phase,
}

impl FilterState {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>, k: usize, phase: Phase) -> Result<Self> {
        require_shape("filter covariance", &p, x.len(), x.len())?;
        linalg::check_psd("filter covariance", &p)?;
        Ok(Self { x, p, k, phase })
    }

    /// `(x̂_{0|-1}, P_{0|-1}) = (x̄_0, P̄_0)`.
    pub fn prior(model: &SystemModel) -> Self {
        Self { x: model.x0_mean().clone(), p: model.p0().clone(), k: 0, phase: Phase::Predicted }
    }
}

/// `x ← A x + B u`, `P ← A P Aᵀ + D Q Dᵀ`.
pub fn predict(state: &FilterState, model: &SystemModel, u: &DVector<f64>) -> Result<FilterState> {
    if state.phase != Phase::Updated {
        return Err(Error::param("phase", "predict expects an updated state"));
    }
    require_len("predict x", &state.x, model.state_dim())?;
    require_len("predict u", u, model.input_dim())?;
    let a = model.a();
    let x = a * &state.x + model.b() * u;
    let p = linalg::symmetrize(&(a * &state.p * a.transpose() + model.effective_q()));
    Ok(FilterState { x, p, k: state.k + 1, phase: Phase::Predicted })
}

/// How the filter accounts for the decoding error of received packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeNoise {
    /// Treat decoded values as exact.
    Ignore,
    /// Decoder-side bound `s² δ² / 4` per component.
    #[default]
    Bound,
    /// Realized `s² q (1 - q) δ²` when the packet carries `q`, else the bound.
    Realized,
}

/// A decoded measurement as handed to the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub y: DVector<f64>,
    /// Realized rounding probabilities, when known.
    pub q: Option<Vec<f64>>,
}

impl Received {
    pub fn exact(y: DVector<f64>) -> Self {
        Self { y, q: None }
    }
}

/// Stacked measurement over the received channels.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMeasurement {
    pub received: Vec<usize>,
    /// Output dimension of each received channel, in stacking order.
    pub dims: Vec<usize>,
    pub y: DVector<f64>,
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub rdec: DMatrix<f64>,
}

impl AugmentedMeasurement {
    pub fn is_empty(&self) -> bool {
        self.received.is_empty()
    }
}

pub fn build_augmented(
    outcomes: &[bool],
    decoded: &[Option<Received>],
    sensors: &[SensorModel],
    codec: &CodecParams,
    noise: DecodeNoise,
) -> Result<AugmentedMeasurement> {
    if outcomes.len() != sensors.len() || decoded.len() != sensors.len() {
        return Err(Error::dim("augmentation channels", sensors.len(), format!("{}/{}", outcomes.len(), decoded.len())));
    }
    if codec.channels() != sensors.len() {
        return Err(Error::dim("codec channels", sensors.len(), codec.channels()));
    }
    let n = sensors.first().map_or(0, |s| s.c().ncols());
    let (mut received, mut dims) = (Vec::new(), Vec::new());
    let (mut ys, mut cs, mut rs, mut rdecs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, ((&got, dec), sensor)) in outcomes.iter().zip(decoded).zip(sensors).enumerate() {
        match (got, dec) {
            (false, None) => continue,
            (true, Some(m)) => {
                require_len("decoded measurement", &m.y, sensor.output_dim())?;
                let ch = codec.channel(i);
                let var: Vec<f64> = match (noise, &m.q) {
                    (DecodeNoise::Ignore, _) => vec![0.0; m.y.len()],
                    (DecodeNoise::Realized, Some(q)) => {
                        if q.len() != m.y.len() {
                            return Err(Error::dim("realized q", m.y.len(), q.len()));
                        }
                        q.iter().map(|&ql| ch.decode_variance(ql)).collect()
                    }
                    _ => vec![ch.decode_variance_bound(); m.y.len()],
                };
                received.push(i);
                dims.push(m.y.len());
                ys.push(&m.y);
                cs.push(sensor.c());
                rs.push(sensor.effective_r());
                rdecs.push(DMatrix::from_diagonal(&DVector::from_vec(var)));
            }
            _ => return Err(Error::param("decoded", format!("channel {i}: payload must be present exactly when received"))),
        }
    }
    Ok(AugmentedMeasurement {
        received,
        dims,
        y: vstack_vectors(&ys),
        c: vstack(&cs, n),
        r: block_diag(&rs),
        rdec: block_diag(&rdecs),
    })
}

/// Measurement update. An empty augmentation only flips the phase.
pub fn update(state: &FilterState, aug: &AugmentedMeasurement) -> Result<FilterState> {
    if state.phase != Phase::Predicted {
        return Err(Error::param("phase", "update expects a predicted state"));
    }
    if aug.is_empty() {
        return Ok(FilterState { phase: Phase::Updated, ..state.clone() });
    }
    require_shape("stacked C", &aug.c, aug.y.len(), state.x.len())?;
    let pct = &state.p * aug.c.transpose();
    let s = linalg::symmetrize(&(&aug.c * &pct + &aug.r));
    let condition = spd_condition(&s);
    let chol = if condition <= CONDITION_LIMIT { nalgebra::Cholesky::new(s.clone()) } else { None };
    let Some(chol) = chol else {
        return Err(Error::IllConditioned { condition, channels: offending_channels(aug, &state.p) });
    };
    // K = P Cᵀ S⁻¹, solved as S Kᵀ = C P.
    let k_gain = chol.solve(&pct.transpose()).transpose();
    let x = &state.x + &k_gain * (&aug.y - &aug.c * &state.x);
    let p = &state.p - &k_gain * &s * k_gain.transpose() + &k_gain * &aug.rdec * k_gain.transpose();
    Ok(FilterState { x, p: linalg::symmetrize(&p), k: state.k, phase: Phase::Updated })
}

/// Channels whose own innovation block is ill-conditioned, or every received
/// channel when the problem only shows up jointly.
fn offending_channels(aug: &AugmentedMeasurement, p: &DMatrix<f64>) -> Vec<usize> {
    let mut row = 0;
    let mut bad = Vec::new();
    for (&i, &len) in aug.received.iter().zip(&aug.dims) {
        let c = aug.c.rows(row, len).into_owned();
        let r = aug.r.view((row, row), (len, len)).into_owned();
        if spd_condition(&(&c * p * c.transpose() + r)) > CONDITION_LIMIT {
            bad.push(i);
        }
        row += len;
    }
    if bad.is_empty() {
        aug.received.clone()
    } else {
        bad
    }
}

/// Filter trajectory: priors `x̂_{k|k-1}` and posteriors `x̂_{k|k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrace {
    pub prior: Vec<FilterState>,
    pub posterior: Vec<FilterState>,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posterior.is_empty()
    }

    /// Rows `k, x̂..., diag(P)..., trace(P)` of the posteriors.
    pub fn to_csv(&self) -> String {
        let n = self.posterior.first().map_or(0, |s| s.x.len());
        let mut out = String::from("k");
        for j in 0..n {
            out.push_str(&format!(",x_{j}"));
        }
        for j in 0..n {
            out.push_str(&format!(",p_{j}{j}"));
        }
        out.push_str(",trace_p\n");
        for s in &self.posterior {
            out.push_str(&s.k.to_string());
            for v in s.x.iter().chain(s.p.diagonal().iter()) {
                out.push(',');
                out.push_str(&crate::report::fmt_f64(*v));
            }
            out.push(',');
            out.push_str(&crate::report::fmt_f64(s.p.trace()));
            out.push('\n');
        }
        out
    }
}

/// Runs the filter for steps `0..horizon`. `outcomes[i][k]` and
/// `decoded[i][k]` describe what this party received on channel `i` at `k`.
pub fn run_filter(
    model: &SystemModel,
    sensors: &[SensorModel],
    codec: &CodecParams,
    outcomes: &[Vec<bool>],
    decoded: &[Vec<Option<Received>>],
    noise: DecodeNoise,
    horizon: usize,
) -> Result<FilterTrace> {
    if outcomes.len() != sensors.len() || decoded.len() != sensors.len() {
        return Err(Error::dim("filter streams", sensors.len(), format!("{}/{}", outcomes.len(), decoded.len())));
    }
    if outcomes.iter().any(|o| o.len() < horizon) || decoded.iter().any(|d| d.len() < horizon) {
        return Err(Error::param("horizon", "streams shorter than the horizon"));
    }
    let mut prior = Vec::with_capacity(horizon);
    let mut posterior = Vec::with_capacity(horizon);
    let mut state = FilterState::prior(model);
    let mut bits = vec![false; sensors.len()];
    let mut packets: Vec<Option<Received>> = vec![None; sensors.len()];
    for k in 0..horizon {
        if k > 0 {
            state = predict(&state, model, model.input().at(k - 1))?;
        }
        for i in 0..sensors.len() {
            bits[i] = outcomes[i][k];
            packets[i] = decoded[i][k].clone();
        }
        let aug = build_augmented(&bits, &packets, sensors, codec, noise)?;
        prior.push(state.clone());
        state = update(&state, &aug)?;
        posterior.push(state.clone());
    }
    Ok(FilterTrace { prior, posterior })
}
