//! Monte Carlo runner.
//!
//! One trial runs the full pipeline: plant → encoder (with acknowledgement
//! mirror) → authorized and wiretap erasures → legitimate and eavesdropper
//! decoders → fusion filters. Trials are spread over a worker pool and folded
//! back in trial order, so results do not depend on the number of workers.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, BoundOptions, BoundParams, BoundSequence};
use crate::channel::{sample_outcomes, ChannelModel, ChannelStreams, OutcomeTrace};
use crate::codec::{ack, CodecParams, CodecState, EavesdropperPolicy};
use crate::estimator::{run_filter, DecodeNoise, FilterTrace, Received};
use crate::model::{simulate_plant, PlantStreams, SensorModel, SystemModel, Trajectory};
use crate::rng::{substream, Role};
use crate::{Error, Result};

/// Eavesdropper decode errors beyond this norm stop its tracking.
pub const SATURATION_NORM: f64 = 1e15;
/// MSE recorded for a trial once the eavesdropper has saturated.
pub const SATURATED_MSE: f64 = 1e30;

/// Settings of the legitimate-user bound computed alongside a run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    pub options: BoundOptions,
    pub delta_n: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    /// Step limit for standalone bound runs.
    pub max_steps: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { options: BoundOptions::default(), delta_n: None, eta: None, max_steps: 100_000 }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: SystemModel,
    pub sensors: Vec<SensorModel>,
    pub channels: ChannelModel,
    pub codec: CodecParams,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    /// Deterministic outcomes replacing the sampled ones in every trial.
    pub outcome_override: Option<OutcomeTrace>,
    pub policy: EavesdropperPolicy,
    pub decode_noise: DecodeNoise,
    /// Attach the bound trace to the run result.
    pub with_bound: bool,
    pub bound: BoundConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        if self.trials < 1 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        let m = self.sensors.len();
        if m == 0 {
            return Err(Error::param("sensors", "at least one sensor is required"));
        }
        if self.channels.channels() != m {
            return Err(Error::dim("channel probabilities", m, self.channels.channels()));
        }
        self.codec.validate()?;
        if self.codec.channels() != m {
            return Err(Error::dim("codec parameters", m, self.codec.channels()));
        }
        for s in &self.sensors {
            if s.c().ncols() != self.model.state_dim() {
                return Err(Error::dim("sensor C columns", self.model.state_dim(), s.c().ncols()));
            }
        }
        if let Some(o) = &self.outcome_override {
            o.check_shape(m, self.horizon)?;
        }
        Ok(())
    }

    pub fn bound_params(&self) -> Result<BoundParams> {
        let mut p = BoundParams::new(&self.model, &self.sensors, self.channels.authorized(), &self.codec)?;
        if let Some(d) = &self.bound.delta_n {
            p = p.with_delta_n(d.clone())?;
        }
        if let Some(e) = &self.bound.eta {
            p = p.with_eta(e.clone())?;
        }
        Ok(p)
    }

    /// Bound iterates started from `𝒱_0 = P̄_0`, so `𝒱_k` bounds `E[Σ_{k|k-1}]`.
    pub fn compute_bound(&self, max_steps: usize) -> Result<BoundSequence> {
        analysis::iterate_bound(self.model.p0(), &self.bound_params()?, max_steps, self.bound.options)
    }
}

/// Everything one trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub trajectory: Trajectory,
    pub outcomes: OutcomeTrace,
    pub legit: FilterTrace,
    /// Eavesdropper filter, truncated at saturation.
    pub eve: FilterTrace,
    /// `‖ȳ_legit − y‖` per channel and step (0 when not received).
    pub legit_decode_error: Vec<Vec<f64>>,
    /// `ȳ_eve − y` per channel and step, `None` when not received or saturated.
    pub eve_decode_error: Vec<Vec<Option<DVector<f64>>>>,
    /// First step from which the eavesdropper is saturated.
    pub eve_saturated_at: Option<usize>,
}

pub fn run_trial(scenario: &Scenario, trial: u64) -> Result<TrialOutput> {
    let m = scenario.sensors.len();
    let h = scenario.horizon;
    let mut plant_streams = PlantStreams::new(scenario.seed, trial, m);
    let trajectory = simulate_plant(&scenario.model, &scenario.sensors, h, &mut plant_streams)?;
    let outcomes = match &scenario.outcome_override {
        Some(o) => o.clone(),
        None => sample_outcomes(&scenario.channels, h, &mut ChannelStreams::new(scenario.seed, trial))?,
    };

    let mut legit_rx: Vec<Vec<Option<Received>>> = vec![vec![None; h]; m];
    let mut eve_rx: Vec<Vec<Option<Received>>> = vec![vec![None; h]; m];
    let mut legit_err = vec![vec![0.0; h]; m];
    let mut eve_err: Vec<Vec<Option<DVector<f64>>>> = vec![vec![None; h]; m];
    let mut saturated_at: Option<usize> = None;

    for (i, sensor) in scenario.sensors.iter().enumerate() {
        let codec = scenario.codec.channel(i);
        let mut rng = substream(scenario.seed, Role::Quantizer, trial, i as u32);
        let dim = sensor.output_dim();
        let (mut enc, mut legit, mut eve) = (CodecState::bootstrap(dim), CodecState::bootstrap(dim), CodecState::bootstrap(dim));
        let mut eve_alive = true;
        for k in 0..h {
            let y = &trajectory.measurements[i][k];
            let packet = codec.encode(&enc, y, k, &mut rng)?;
            let legit_t_ref = legit.t_ref;
            if outcomes.authorized[i][k] {
                let (yd, next) = codec.decode(&legit, &packet)?;
                legit_err[i][k] = (&yd - y).norm();
                enc = ack(&yd, k);
                legit = next;
                legit_rx[i][k] = Some(Received { y: yd, q: Some(packet.q.clone()) });
            }
            if eve_alive && outcomes.wiretap[i][k] {
                let decoded = codec.eavesdrop_decode(&eve, &packet, scenario.policy, legit_t_ref);
                match decoded {
                    Ok((ye, next)) if (&ye - y).norm() <= SATURATION_NORM => {
                        eve_err[i][k] = Some(&ye - y);
                        eve = next;
                        eve_rx[i][k] = Some(Received::exact(ye));
                    }
                    Ok(_) | Err(Error::ExponentOverflow { .. }) => {
                        eve_alive = false;
                        saturated_at = Some(saturated_at.map_or(k, |s| s.min(k)));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let legit = run_filter(&scenario.model, &scenario.sensors, &scenario.codec, &outcomes.authorized, &legit_rx, scenario.decode_noise, h)?;
    let eve_steps = saturated_at.unwrap_or(h);
    for row in eve_err.iter_mut() {
        for e in row.iter_mut().skip(eve_steps) {
            *e = None;
        }
    }
    let eve = run_filter(&scenario.model, &scenario.sensors, &scenario.codec, &outcomes.wiretap, &eve_rx, DecodeNoise::Bound, eve_steps)?;
    Ok(TrialOutput {
        trajectory,
        outcomes,
        legit,
        eve,
        legit_decode_error: legit_err,
        eve_decode_error: eve_err,
        eve_saturated_at: saturated_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CriticalEvent {
    pub channel: usize,
    pub k: usize,
    /// The wiretap stream of this channel is all ones after `k`.
    pub worst_case: bool,
}

/// All `(i, k)` with an authorized reception and a simultaneous wiretap miss.
pub fn detect_critical_events(trace: &OutcomeTrace) -> Vec<CriticalEvent> {
    let mut events = Vec::new();
    for (i, (auth, tap)) in trace.authorized.iter().zip(&trace.wiretap).enumerate() {
        for k in 0..auth.len() {
            if auth[k] && !tap[k] {
                events.push(CriticalEvent { channel: i, k, worst_case: tap[k + 1..].iter().all(|&b| b) });
            }
        }
    }
    events
}

/// Lossless authorized channels; the eavesdropper misses only `(channel, k_bar)`.
pub fn build_worst_case(channels: usize, horizon: usize, channel: usize, k_bar: usize) -> Result<OutcomeTrace> {
    if channel >= channels {
        return Err(Error::param("channel", format!("{channel} out of range for {channels} channels")));
    }
    if k_bar >= horizon {
        return Err(Error::param("k_bar", format!("{k_bar} outside horizon {horizon}")));
    }
    let mut trace = OutcomeTrace::all_ones(channels, horizon);
    trace.wiretap[channel][k_bar] = false;
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    pub trial: usize,
    pub channel: usize,
    pub k: usize,
    pub worst_case: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub horizon: usize,
    pub trials: usize,
    /// Mean `‖x_k − x̂_{k|k}‖²`.
    pub mse_legit: Vec<f64>,
    /// Mean `‖x_k − x̂ᵉ_{k|k}‖²`, saturated trials counted at [`SATURATED_MSE`].
    pub mse_eve: Vec<f64>,
    /// Number of saturated trials at each step.
    pub eve_saturated: Vec<usize>,
    /// Empirical `E[Σ_{k|k-1}]`.
    pub emp_cov: Vec<DMatrix<f64>>,
    /// Standard error of `trace E[Σ_{k|k-1}]`.
    pub emp_cov_trace_se: Vec<f64>,
    /// `‖E[x_k − x̂ᵉ_{k|k}]‖` over trials not yet saturated (NaN when none).
    pub eve_mean_error_norm: Vec<f64>,
    pub events: Vec<EventRecord>,
    pub bound: Option<BoundSequence>,
}

impl RunResult {
    pub fn trace_emp_cov(&self) -> Vec<f64> {
        self.emp_cov.iter().map(|c| c.trace()).collect()
    }

    pub fn trace_bound(&self) -> Option<Vec<f64>> {
        self.bound.as_ref().map(|b| (0..self.horizon).map(|k| b.trace_at(k)).collect())
    }
}

/// Per-trial quantities the fold needs.
struct TrialSummary {
    legit_sq: Vec<f64>,
    eve_sq: Vec<f64>,
    prior_err: Vec<DVector<f64>>,
    eve_err: Vec<DVector<f64>>,
    saturated_at: usize,
    events: Vec<CriticalEvent>,
}

fn summarize(out: TrialOutput) -> TrialSummary {
    let h = out.legit.len();
    let states = &out.trajectory.states;
    let legit_sq = (0..h).map(|k| (&states[k] - &out.legit.posterior[k].x).norm_squared()).collect();
    let prior_err = (0..h).map(|k| &states[k] - &out.legit.prior[k].x).collect();
    let eve_err: Vec<DVector<f64>> = out.eve.posterior.iter().map(|s| &states[s.k] - &s.x).collect();
    let eve_sq = eve_err.iter().map(|e| e.norm_squared()).collect();
    TrialSummary {
        legit_sq,
        eve_sq,
        prior_err,
        eve_err,
        saturated_at: out.eve_saturated_at.unwrap_or(h),
        events: detect_critical_events(&out.outcomes),
    }
}

pub fn run_monte_carlo(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scenario.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let summaries: Vec<TrialSummary> = pool.install(|| {
        (0..scenario.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(scenario, t).map(summarize))
            .collect::<Result<Vec<_>>>()
    })?;

    let h = scenario.horizon;
    let n = scenario.model.state_dim();
    let trials = summaries.len() as f64;
    let mut mse_legit = vec![0.0; h];
    let mut mse_eve = vec![0.0; h];
    let mut eve_saturated = vec![0usize; h];
    let mut emp_cov = vec![DMatrix::zeros(n, n); h];
    let mut sq_sum = vec![0.0; h];
    let mut sq_sq_sum = vec![0.0; h];
    let mut eve_sum = vec![DVector::zeros(n); h];
    let mut eve_active = vec![0usize; h];
    let mut events = Vec::new();
    for (t, s) in summaries.iter().enumerate() {
        for k in 0..h {
            mse_legit[k] += s.legit_sq[k];
            let e = &s.prior_err[k];
            emp_cov[k] += e * e.transpose();
            let sq = e.norm_squared();
            sq_sum[k] += sq;
            sq_sq_sum[k] += sq * sq;
            if k < s.saturated_at {
                mse_eve[k] += s.eve_sq[k];
                eve_sum[k] += &s.eve_err[k];
                eve_active[k] += 1;
            } else {
                mse_eve[k] += SATURATED_MSE;
                eve_saturated[k] += 1;
            }
        }
        events.extend(s.events.iter().map(|e| EventRecord { trial: t, channel: e.channel, k: e.k, worst_case: e.worst_case }));
    }
    let emp_cov_trace_se = (0..h)
        .map(|k| {
            if trials < 2.0 {
                return f64::NAN;
            }
            let mean = sq_sum[k] / trials;
            let var = ((sq_sq_sum[k] - trials * mean * mean) / (trials - 1.0)).max(0.0);
            (var / trials).sqrt()
        })
        .collect();
    for k in 0..h {
        mse_legit[k] /= trials;
        mse_eve[k] /= trials;
        emp_cov[k] /= trials;
    }
    let eve_mean_error_norm = (0..h)
        .map(|k| if eve_active[k] == 0 { f64::NAN } else { (&eve_sum[k] / eve_active[k] as f64).norm() })
        .collect();
    let bound = if scenario.with_bound { Some(scenario.compute_bound(h)?) } else { None };
    Ok(RunResult {
        horizon: h,
        trials: scenario.trials,
        mse_legit,
        mse_eve,
        eve_saturated,
        emp_cov,
        emp_cov_trace_se,
        eve_mean_error_norm,
        events,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionVerdict {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecrecyReport {
    /// Bounded legitimate covariance.
    pub legitimate_bounded: CriterionVerdict,
    /// Divergent eavesdropper error.
    pub eavesdropper_diverges: CriterionVerdict,
}

impl SecrecyReport {
    pub fn secrecy(&self) -> bool {
        self.legitimate_bounded.pass && self.eavesdropper_diverges.pass
    }
}

/// Least-squares slope of `ln y` against `k` over finite positive entries.
pub fn log_slope(values: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values.iter().filter(|(_, y)| y.is_finite() && *y > 0.0).map(|&(k, y)| (k as f64, y.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Empirical check of both secrecy criteria.
///
/// (i) `trace E[Σ_{k|k-1}] ≤ trace 𝒱_k + 3 SE` at every step with a bounded
/// `𝒱`. (ii) the eavesdropper saturated in some trial, or its mean error norm
/// grows at least like `min{a_i > 1}` (log slope within 0.05) after the first
/// critical event on such a channel.
pub fn secrecy_report(result: &RunResult, bound: &BoundSequence, codec: &CodecParams) -> SecrecyReport {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_k = 0;
    for k in 0..result.horizon {
        let emp = result.emp_cov[k].trace();
        let se = if result.emp_cov_trace_se[k].is_finite() { result.emp_cov_trace_se[k] } else { 0.0 };
        let excess = emp - bound.trace_at(k) - 3.0 * se;
        if excess > worst {
            worst = excess;
            worst_k = k;
        }
    }
    let bounded = !bound.diverged && (0..result.horizon).all(|k| bound.trace_at(k).is_finite());
    let legitimate_bounded = CriterionVerdict {
        pass: bounded && worst <= 0.0,
        detail: format!(
            "max(trace emp - trace bound - 3 SE) = {worst:.3e} at k = {worst_k}; bound {}",
            if bound.converged { "converged" } else if bound.diverged { "diverged" } else { "unfinished" }
        ),
    };

    let growing: Vec<usize> = (0..codec.channels()).filter(|&i| codec.a[i] > 1.0).collect();
    let saturated = result.eve_saturated.iter().any(|&n| n > 0);
    let eavesdropper_diverges = if growing.is_empty() {
        CriterionVerdict { pass: false, detail: "no channel with a_i > 1".into() }
    } else if saturated {
        let first = result.eve_saturated.iter().position(|&n| n > 0).unwrap_or(0);
        CriterionVerdict { pass: true, detail: format!("eavesdropper saturated (decode error > {SATURATION_NORM:e}) from k = {first}") }
    } else {
        let a_min = growing.iter().map(|&i| codec.a[i]).fold(f64::INFINITY, f64::min);
        let first_event = result.events.iter().filter(|e| codec.a[e.channel] > 1.0).map(|e| e.k).min();
        match first_event {
            None => CriterionVerdict { pass: false, detail: "no critical event on a channel with a_i > 1".into() },
            Some(k0) => {
                let window: Vec<(usize, f64)> = (k0 + 2..result.horizon).map(|k| (k, result.eve_mean_error_norm[k])).collect();
                match log_slope(&window) {
                    Some(slope) => CriterionVerdict {
                        pass: slope >= a_min.ln() - 0.05,
                        detail: format!("log slope {slope:.4} vs ln(a_min) = {:.4}", a_min.ln()),
                    },
                    None => CriterionVerdict { pass: false, detail: "post-event window too short".into() },
                }
            }
        }
    };
    SecrecyReport { legitimate_bounded, eavesdropper_diverges }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(auth: &[&[u8]], tap: &[&[u8]]) -> OutcomeTrace {
        let rows = |r: &[&[u8]]| r.iter().map(|row| row.iter().map(|&b| b == 1).collect()).collect();
        OutcomeTrace { authorized: rows(auth), wiretap: rows(tap) }
    }

    #[test]
    fn event_examples() {
        let ev = detect_critical_events(&trace(&[&[1, 1, 1]], &[&[1, 0, 1]]));
        assert_eq!(ev, vec![CriticalEvent { channel: 0, k: 1, worst_case: true }]);
        assert!(detect_critical_events(&trace(&[&[1, 1, 1]], &[&[1, 1, 1]])).is_empty());
        assert!(detect_critical_events(&trace(&[&[0, 0, 0]], &[&[0, 1, 0]])).is_empty());
        let ev = detect_critical_events(&trace(&[&[1, 1, 1, 1]], &[&[0, 1, 0, 1]]));
        assert_eq!(ev.iter().map(|e| (e.k, e.worst_case)).collect::<Vec<_>>(), vec![(0, false), (2, true)]);
    }

    #[test]
    fn worst_case_examples() {
        let t = build_worst_case(1, 5, 0, 2).unwrap();
        assert_eq!(t.wiretap[0], vec![true, true, false, true, true]);
        assert!(t.authorized[0].iter().all(|&b| b));
        let ev = detect_critical_events(&t);
        assert_eq!(ev, vec![CriticalEvent { channel: 0, k: 2, worst_case: true }]);
        let t = build_worst_case(3, 4, 1, 0).unwrap();
        assert!(!t.wiretap[1][0]);
        assert_eq!(detect_critical_events(&t).len(), 1);
        assert!(build_worst_case(1, 5, 0, 5).is_err());
        assert!(build_worst_case(1, 5, 1, 0).is_err());
    }

    #[test]
    fn log_slope_recovers_rate() {
        let pts: Vec<(usize, f64)> = (0..10).map(|k| (k, 3.0 * 5f64.powi(k as i32))).collect();
        assert!((log_slope(&pts).unwrap() - 5f64.ln()).abs() < 1e-12);
        assert!(log_slope(&pts[..2]).is_none());
    }
}
