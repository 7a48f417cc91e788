//! Authorized and wiretap Bernoulli erasure channels.

use rand::Rng;

use crate::rng::{substream, Role, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    authorized: Vec<f64>,
    wiretap: Vec<f64>,
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(name, format!("probability {p} outside (0, 1]")));
    }
    Ok(())
}

impl ChannelModel {
    pub fn new(authorized: Vec<f64>, wiretap: Vec<f64>) -> Result<Self> {
        if authorized.is_empty() {
            return Err(Error::param("gamma", "at least one channel is required"));
        }
        if authorized.len() != wiretap.len() {
            return Err(Error::dim("wiretap probabilities", authorized.len(), wiretap.len()));
        }
        for &p in &authorized {
            check_probability("gamma", p)?;
        }
        for &p in &wiretap {
            check_probability("gamma_e", p)?;
        }
        Ok(Self { authorized, wiretap })
    }

    pub fn channels(&self) -> usize {
        self.authorized.len()
    }
    pub fn authorized(&self) -> &[f64] {
        &self.authorized
    }
    pub fn wiretap(&self) -> &[f64] {
        &self.wiretap
    }
}

/// Per-step reception outcomes, indexed `[channel][k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeTrace {
    pub authorized: Vec<Vec<bool>>,
    pub wiretap: Vec<Vec<bool>>,
}

impl OutcomeTrace {
    pub fn channels(&self) -> usize {
        self.authorized.len()
    }

    pub fn horizon(&self) -> usize {
        self.authorized.first().map_or(0, Vec::len)
    }

    /// Every channel delivers to both parties at every step.
    pub fn all_ones(channels: usize, horizon: usize) -> Self {
        Self { authorized: vec![vec![true; horizon]; channels], wiretap: vec![vec![true; horizon]; channels] }
    }

    pub fn check_shape(&self, channels: usize, horizon: usize) -> Result<()> {
        let ok = |rows: &Vec<Vec<bool>>| rows.len() == channels && rows.iter().all(|r| r.len() == horizon);
        if !ok(&self.authorized) || !ok(&self.wiretap) {
            return Err(Error::dim("outcome trace", format!("{channels} x {horizon}"), format!("{} x {}", self.channels(), self.horizon())));
        }
        Ok(())
    }

    /// CSV with columns `k, gamma_1..gamma_M, gamma_e_1..gamma_e_M`.
    pub fn to_csv(&self) -> String {
        let m = self.channels();
        let mut out = String::from("k");
        for i in 1..=m {
            out.push_str(&format!(",gamma_{i}"));
        }
        for i in 1..=m {
            out.push_str(&format!(",gamma_e_{i}"));
        }
        out.push('\n');
        for k in 0..self.horizon() {
            out.push_str(&k.to_string());
            for row in self.authorized.iter().chain(&self.wiretap) {
                out.push_str(if row[k] { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

pub struct ChannelStreams {
    pub authorized: Stream,
    pub wiretap: Stream,
}

impl ChannelStreams {
    pub fn new(master_seed: u64, trial: u64) -> Self {
        Self {
            authorized: substream(master_seed, Role::AuthorizedChannel, trial, 0),
            wiretap: substream(master_seed, Role::WiretapChannel, trial, 0),
        }
    }
}

fn bernoulli_rows(probs: &[f64], horizon: usize, rng: &mut Stream) -> Vec<Vec<bool>> {
    probs
        .iter()
        .map(|&p| (0..horizon).map(|_| p >= 1.0 || rng.random::<f64>() < p).collect())
        .collect()
}

pub fn sample_outcomes(chan: &ChannelModel, horizon: usize, streams: &mut ChannelStreams) -> Result<OutcomeTrace> {
    if horizon < 1 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    Ok(OutcomeTrace {
        authorized: bernoulli_rows(&chan.authorized, horizon, &mut streams.authorized),
        wiretap: bernoulli_rows(&chan.wiretap, horizon, &mut streams.wiretap),
    })
}

/// Channel output: the payload when delivered, `None` when erased.
pub fn erase<T>(outcome: bool, payload: T) -> Option<T> {
    outcome.then_some(payload)
}

/// `-ln(1 - p) / 2`; a lossless channel has infinite capacity.
pub fn channel_capacity(p: f64) -> Result<f64> {
    check_probability("gamma", p)?;
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-0.5 * (-p).ln_1p())
}

pub fn total_capacity(probs: &[f64]) -> Result<f64> {
    probs.iter().map(|&p| channel_capacity(p)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn lossless_channel_delivers_everything() {
        let chan = ChannelModel::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let tr = sample_outcomes(&chan, 100, &mut ChannelStreams::new(1, 0)).unwrap();
        assert_eq!(tr, OutcomeTrace::all_ones(2, 100));
    }

    #[test]
    fn empirical_rates_match_nominal() {
        let n = 100_000;
        let probs = vec![0.9, 0.95, 0.85];
        let chan = ChannelModel::new(probs.clone(), vec![0.9, 0.85, 0.95]).unwrap();
        let tr = sample_outcomes(&chan, n, &mut ChannelStreams::new(42, 0)).unwrap();
        for (row, p) in tr.authorized.iter().zip(&probs) {
            let mean = row.iter().filter(|&&b| b).count() as f64 / n as f64;
            assert!((mean - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{mean} vs {p}");
        }
        // Pairwise independence across every stream (authorized and wiretap).
        let rows: Vec<&Vec<bool>> = tr.authorized.iter().chain(&tr.wiretap).collect();
        for a in 0..rows.len() {
            for b in a + 1..rows.len() {
                let corr = correlation(rows[a], rows[b]);
                assert!(corr.abs() < 0.02, "streams {a},{b}: {corr}");
            }
        }
    }

    fn correlation(x: &[bool], y: &[bool]) -> f64 {
        let n = x.len() as f64;
        let f = |b: bool| if b { 1.0 } else { 0.0 };
        let mx = x.iter().map(|&b| f(b)).sum::<f64>() / n;
        let my = y.iter().map(|&b| f(b)).sum::<f64>() / n;
        let cov = x.iter().zip(y).map(|(&a, &b)| (f(a) - mx) * (f(b) - my)).sum::<f64>() / n;
        cov / (mx * (1.0 - mx) * my * (1.0 - my)).sqrt()
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let chan = ChannelModel::new(vec![0.5], vec![0.5]).unwrap();
        let a = sample_outcomes(&chan, 64, &mut ChannelStreams::new(9, 4)).unwrap();
        let b = sample_outcomes(&chan, 64, &mut ChannelStreams::new(9, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("k,gamma_1,gamma_e_1\n0,"));
    }

    #[test]
    fn invalid_probabilities_rejected() {
        assert!(ChannelModel::new(vec![0.0], vec![0.5]).is_err());
        assert!(ChannelModel::new(vec![0.5], vec![1.5]).is_err());
        assert!(ChannelModel::new(vec![0.5, 0.5], vec![0.5]).is_err());
        assert!(ChannelModel::new(vec![], vec![]).is_err());
    }

    #[test]
    fn erase_uses_an_absence_marker() {
        assert_eq!(erase(true, vec![1.0, 2.0]), Some(vec![1.0, 2.0]));
        assert_eq!(erase(false, vec![1.0, 2.0]), None);
        assert_eq!(erase(true, vec![0.0, 0.0]), Some(vec![0.0, 0.0]));
    }

    #[test]
    fn capacity_examples() {
        assert_relative_eq!(channel_capacity(1.0 - (-2.0f64).exp()).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(channel_capacity(0.9).unwrap(), 1.151_292_546_497_022_8, epsilon = 1e-14);
        assert!(channel_capacity(1e-12).unwrap() < 1e-11);
        assert_eq!(channel_capacity(1.0).unwrap(), f64::INFINITY);
        assert!(channel_capacity(0.0).is_err());
        assert!(channel_capacity(-0.1).is_err());
        assert!(channel_capacity(f64::NAN).is_err());

        let single = channel_capacity(0.7).unwrap();
        assert_eq!(total_capacity(&[0.7]).unwrap(), single);
        assert_relative_eq!(total_capacity(&[0.9, 0.95, 0.85]).unwrap(), 3.597_718_675_716_959, epsilon = 1e-12);
        let g = 1.0 - (-2.0f64).exp();
        assert_relative_eq!(total_capacity(&[g, g]).unwrap(), 2.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn capacity_is_monotone(a in 1e-6f64..0.999, b in 1e-6f64..0.999) {
            prop_assume!(a < b);
            prop_assert!(channel_capacity(a).unwrap() < channel_capacity(b).unwrap());
        }

        #[test]
        fn capacity_is_additive(l1 in prop::collection::vec(1e-6f64..0.999, 1..5), l2 in prop::collection::vec(1e-6f64..0.999, 1..5)) {
            let joined: Vec<f64> = l1.iter().chain(&l2).copied().collect();
            let lhs = total_capacity(&joined).unwrap();
            let rhs = total_capacity(&l1).unwrap() + total_capacity(&l2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }
    }
}
