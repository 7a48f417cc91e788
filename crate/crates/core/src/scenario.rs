//! Scenario files and named presets.
//!
//! A scenario file is TOML. Every table is optional when `preset` names a
//! base scenario; given keys override the preset.
//!
//! ```toml
//! preset = "three-tank"          # optional base
//! name = "my-run"
//!
//! [model]
//! a = [[2.0]]
//! q = [[1.0]]
//! x0 = [0.0]
//! p0 = [[1.0]]
//! # b, d, u optional
//!
//! [[sensors]]
//! c = [[1.0]]
//! r = [[1.0]]
//!
//! [channels]
//! gamma = [0.5]
//! gamma_e = [0.5]
//!
//! [codec]
//! a = [2.0]
//! delta = [0.01]
//! s = 1.0
//!
//! [run]
//! horizon = 200
//! trials = 100
//! seed = 1
//!
//! [bound]
//! policy = "recompute"          # or "from-initial", or a number for a fixed w
//! tol = 1e-10
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{BoundOptions, WPolicy, DEFAULT_TOL, DIVERGENCE_TRACE};
use crate::channel::ChannelModel;
use crate::codec::{CodecParams, EavesdropperPolicy};
use crate::estimator::DecodeNoise;
use crate::harness::{build_worst_case, BoundConfig, Scenario};
use crate::model::{three_tank_preset, Input, SensorModel, SystemModel};
use crate::{Error, Result};

pub const DEFAULT_HORIZON: usize = 500;
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 2024;

/// Authorized and wiretap probabilities of the three-tank experiments.
pub const THREE_TANK_GAMMA: [f64; 3] = [0.9, 0.95, 0.85];
pub const THREE_TANK_GAMMA_E: [f64; 3] = [0.9, 0.85, 0.95];

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 7] = [
    "three-tank",
    "three-tank-groupA1",
    "three-tank-groupA2",
    "three-tank-groupA3",
    "three-tank-groupD1",
    "three-tank-groupD2",
    "three-tank-groupD3",
];

fn three_tank(name: &str, a: [f64; 3], delta: [f64; 3]) -> Scenario {
    let (model, sensors) = three_tank_preset();
    Scenario {
        name: name.to_string(),
        model,
        sensors,
        channels: ChannelModel::new(THREE_TANK_GAMMA.to_vec(), THREE_TANK_GAMMA_E.to_vec()).expect("valid probabilities"),
        codec: CodecParams::new(a.to_vec(), delta.to_vec(), 1.0).expect("valid codec"),
        horizon: DEFAULT_HORIZON,
        trials: DEFAULT_TRIALS,
        seed: DEFAULT_SEED,
        workers: 0,
        outcome_override: None,
        policy: EavesdropperPolicy::OwnHistory,
        decode_noise: DecodeNoise::Bound,
        with_bound: true,
        bound: BoundConfig::default(),
    }
}

/// Named scenario. `three-tank` is the first `a`-group.
pub fn preset(name: &str) -> Result<Scenario> {
    let s = match name {
        "three-tank" | "three-tank-groupA1" => three_tank(name, [0.5, 0.5, 5.0], [0.01; 3]),
        "three-tank-groupA2" => three_tank(name, [0.5, 5.0, 5.0], [0.01; 3]),
        "three-tank-groupA3" => three_tank(name, [0.5, 0.5, 10.0], [0.01; 3]),
        "three-tank-groupD1" => three_tank(name, [5.0; 3], [0.1, 0.1, 0.1]),
        "three-tank-groupD2" => three_tank(name, [5.0; 3], [0.1, 0.01, 0.001]),
        "three-tank-groupD3" => three_tank(name, [5.0; 3], [0.001, 0.001, 0.001]),
        _ => return Err(Error::Config(format!("unknown preset '{name}' (known: {})", PRESETS.join(", ")))),
    };
    Ok(s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub a: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub p0: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub c: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub gamma: Vec<f64>,
    pub gamma_e: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub eavesdropper_policy: Option<EavesdropperPolicy>,
    pub decode_noise: Option<DecodeNoise>,
    pub bound: Option<bool>,
    /// `[channel, k]` of a single wiretap miss; everything else is delivered.
    pub worst_case: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Named(String),
    FixedW(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub policy: Option<PolicySpec>,
    pub tol: Option<f64>,
    pub divergence_trace: Option<f64>,
    pub max_steps: Option<usize>,
    pub delta_n: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub model: Option<ModelSpec>,
    pub sensors: Option<Vec<SensorSpec>>,
    pub channels: Option<ChannelSpec>,
    pub codec: Option<CodecParams>,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub bound: BoundSpec,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{name}: ragged matrix rows")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Resolves the file into a validated scenario.
    pub fn build(&self) -> Result<Scenario> {
        let mut s = match &self.preset {
            Some(p) => preset(p)?,
            None => {
                if self.model.is_none() || self.sensors.is_none() || self.channels.is_none() || self.codec.is_none() {
                    return Err(Error::Config("without a preset, [model], [[sensors]], [channels] and [codec] are required".into()));
                }
                three_tank("custom", [1.0; 3], [0.01; 3])
            }
        };
        if let Some(name) = &self.name {
            s.name = name.clone();
        }
        if let Some(m) = &self.model {
            let a = matrix("model.a", &m.a)?;
            let n = a.nrows();
            let d = match &m.d {
                Some(d) => matrix("model.d", d)?,
                None => DMatrix::identity(n, n),
            };
            let b = match &m.b {
                Some(b) => matrix("model.b", b)?,
                None => DMatrix::zeros(n, 0),
            };
            let u = DVector::from_vec(m.u.clone().unwrap_or_default());
            s.model = SystemModel::with_all(a, b, d, matrix("model.q", &m.q)?, DVector::from_vec(m.x0.clone()), matrix("model.p0", &m.p0)?, Input::Constant(u))?;
        }
        if let Some(sensors) = &self.sensors {
            s.sensors = sensors
                .iter()
                .map(|sp| {
                    let c = matrix("sensors.c", &sp.c)?;
                    let r = matrix("sensors.r", &sp.r)?;
                    match &sp.e {
                        Some(e) => SensorModel::with_gain(c, matrix("sensors.e", e)?, r),
                        None => SensorModel::new(c, r),
                    }
                })
                .collect::<Result<_>>()?;
        }
        if let Some(ch) = &self.channels {
            s.channels = ChannelModel::new(ch.gamma.clone(), ch.gamma_e.clone())?;
        }
        if let Some(codec) = &self.codec {
            codec.validate()?;
            s.codec = codec.clone();
        }
        let run = &self.run;
        s.horizon = run.horizon.unwrap_or(s.horizon);
        s.trials = run.trials.unwrap_or(s.trials);
        s.seed = run.seed.unwrap_or(s.seed);
        s.workers = run.workers.unwrap_or(s.workers);
        s.policy = run.eavesdropper_policy.unwrap_or(s.policy);
        s.decode_noise = run.decode_noise.unwrap_or(s.decode_noise);
        s.with_bound = run.bound.unwrap_or(s.with_bound);
        if let Some([channel, k]) = run.worst_case {
            s.outcome_override = Some(build_worst_case(s.sensors.len(), s.horizon, channel, k)?);
        }
        let b = &self.bound;
        let policy = match &b.policy {
            None => s.bound.options.policy,
            Some(PolicySpec::FixedW(w)) if (0.0..=1.0).contains(w) => WPolicy::Fixed(*w),
            Some(PolicySpec::FixedW(w)) => return Err(Error::Config(format!("bound.policy: fixed w = {w} outside [0, 1]"))),
            Some(PolicySpec::Named(n)) => match n.as_str() {
                "recompute" => WPolicy::Recompute,
                "from-initial" => WPolicy::FromInitial,
                other => return Err(Error::Config(format!("bound.policy: unknown policy '{other}'"))),
            },
        };
        s.bound = BoundConfig {
            options: BoundOptions {
                policy,
                tol: b.tol.unwrap_or(DEFAULT_TOL),
                divergence_trace: b.divergence_trace.unwrap_or(DIVERGENCE_TRACE),
            },
            delta_n: b.delta_n.clone(),
            eta: b.eta.clone(),
            max_steps: b.max_steps.unwrap_or(s.bound.max_steps),
        };
        s.validate()?;
        // Surface bound-parameter errors at load time.
        s.bound_params()?;
        Ok(s)
    }
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario> {
    ScenarioFile::load(path)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let s = preset(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.channels.authorized(), &THREE_TANK_GAMMA);
            assert_eq!(s.channels.wiretap(), &THREE_TANK_GAMMA_E);
        }
        assert_eq!(preset("three-tank-groupA3").unwrap().codec.a, vec![0.5, 0.5, 10.0]);
        assert_eq!(preset("three-tank-groupD2").unwrap().codec.delta, vec![0.1, 0.01, 0.001]);
        assert!(matches!(preset("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn scalar_file_round_trips() {
        let text = r#"
            name = "scalar"
            [model]
            a = [[2.0]]
            q = [[1.0]]
            x0 = [0.0]
            p0 = [[1.0]]
            [[sensors]]
            c = [[1.0]]
            r = [[1.0]]
            [channels]
            gamma = [0.5]
            gamma_e = [0.5]
            [codec]
            a = [2.0]
            delta = [0.01]
            s = 1.0
            [run]
            horizon = 50
            trials = 3
            worst_case = [0, 4]
            [bound]
            policy = 1.0
        "#;
        let file = ScenarioFile::parse(text).unwrap();
        let s = file.build().unwrap();
        assert_eq!(s.model.a()[(0, 0)], 2.0);
        assert_eq!((s.horizon, s.trials), (50, 3));
        assert_eq!(s.bound.options.policy, WPolicy::Fixed(1.0));
        assert!(!s.outcome_override.as_ref().unwrap().wiretap[0][4]);
        let back = ScenarioFile::parse(&toml::to_string(&file).unwrap()).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn preset_overrides() {
        let s = ScenarioFile::parse("preset = \"three-tank-groupD1\"\n[run]\ntrials = 7\neavesdropper_policy = \"overhear-acks\"\n").unwrap().build().unwrap();
        assert_eq!(s.trials, 7);
        assert_eq!(s.policy, EavesdropperPolicy::OverhearAcks);
        assert_eq!(s.codec.delta, vec![0.1; 3]);
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in [
            "preset = \"missing\"",
            "[run]\nhorizon = 3",
            "preset = \"three-tank\"\n[run]\nunknown = 1",
            "preset = \"three-tank\"\n[channels]\ngamma = [0.5]\ngamma_e = [0.5]",
            "preset = \"three-tank\"\n[bound]\npolicy = \"sometimes\"",
            "preset = \"three-tank\"\n[run]\ntrials = 0",
            "not toml at all [",
        ] {
            assert!(ScenarioFile::parse(text).and_then(|f| f.build()).is_err(), "{text}");
        }
    }
}
