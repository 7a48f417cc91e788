//! Encoding-based privacy mechanism.
//!
//! Each sensor transmits the probabilistically quantized residual
//!
//! ```text
//! z_{i,k} = Q_i((y_{i,k} - a_i^{k - t_{i,k}} ȳ_{t_{i,k}}) / s)
//! ```
//!
//! against the last value the legitimate decoder reconstructed. The encoder
//! learns channel outcomes through instant acknowledgements and keeps an exact
//! copy of the decoder's reference `(t_ref, y_ref)`. A receiver that misses a
//! packet the legitimate user got loses that reference and its decoding error
//! then grows like `a_i^k`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::Stream;
use crate::{Error, Result};

/// Reference growth above this magnitude is treated as overflow.
pub const EXPONENT_LIMIT: f64 = 1e300;

/// Largest representable lattice index magnitude.
const LATTICE_LIMIT: f64 = 4.0e18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecParams {
    /// Growth base per channel.
    pub a: Vec<f64>,
    /// Quantization step per channel.
    pub delta: Vec<f64>,
    /// Global scaling.
    pub s: f64,
    /// Identity quantizer (zero encoding error), for exact recursion checks.
    #[serde(default)]
    pub transparent: bool,
}

impl CodecParams {
    pub fn new(a: Vec<f64>, delta: Vec<f64>, s: f64) -> Result<Self> {
        let p = Self { a, delta, s, transparent: false };
        p.validate()?;
        Ok(p)
    }

    pub fn transparent(mut self) -> Self {
        self.transparent = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.delta.len() {
            return Err(Error::dim("codec delta", self.a.len(), self.delta.len()));
        }
        if self.a.is_empty() {
            return Err(Error::param("a", "at least one channel is required"));
        }
        if let Some(a) = self.a.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::param("a", format!("growth base must be finite and > 0, got {a}")));
        }
        if let Some(d) = self.delta.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::param("delta", format!("quantization step must be finite and > 0, got {d}")));
        }
        if !(self.s.is_finite() && self.s != 0.0) {
            return Err(Error::param("s", "scaling must be finite and nonzero"));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.a.len()
    }

    pub fn channel(&self, i: usize) -> ChannelCodec {
        ChannelCodec { index: i, a: self.a[i], delta: self.delta[i], s: self.s, transparent: self.transparent }
    }
}

/// Codec parameters of a single channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCodec {
    pub index: usize,
    pub a: f64,
    pub delta: f64,
    pub s: f64,
    pub transparent: bool,
}

/// Reference kept by an encoder or a decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecState {
    pub t_ref: usize,
    pub y_ref: DVector<f64>,
    /// Set after the first successful reception.
    pub initialized: bool,
}

impl CodecState {
    /// Pre-reception bootstrap: `(t_ref, y_ref) = (0, 0)`.
    pub fn bootstrap(dim: usize) -> Self {
        Self { t_ref: 0, y_ref: DVector::zeros(dim), initialized: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// `z(l) = steps[l] * delta`.
    Lattice { steps: Vec<i64>, delta: f64 },
    /// Unquantized residual (transparent mode only).
    Exact(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedPacket {
    pub k: usize,
    pub channel: usize,
    pub payload: Payload,
    /// Realized rounding-up probabilities. Known to the encoder only; never
    /// consumed by a decoder.
    #[serde(skip)]
    pub q: Vec<f64>,
}

impl EncodedPacket {
    pub fn value(&self) -> DVector<f64> {
        match &self.payload {
            Payload::Lattice { steps, delta } => DVector::from_iterator(steps.len(), steps.iter().map(|&d| d as f64 * delta)),
            Payload::Exact(v) => DVector::from_column_slice(v),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.payload {
            Payload::Lattice { steps, .. } => steps.len(),
            Payload::Exact(v) => v.len(),
        }
    }
}

/// Output of [`quantize`]: lattice indices and the per-component probability
/// `q` of rounding up.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub steps: Vec<i64>,
    pub q: Vec<f64>,
}

impl Quantized {
    pub fn value(&self, delta: f64) -> DVector<f64> {
        DVector::from_iterator(self.steps.len(), self.steps.iter().map(|&d| d as f64 * delta))
    }
}

/// Probabilistic uniform quantizer.
///
/// Each component `x` with `d = floor(x / delta)`, `q = x / delta - d` maps to
/// `d * delta` with probability `1 - q` and `(d + 1) * delta` with probability
/// `q`, so the error is zero-mean with variance `q (1 - q) delta^2`.
pub fn quantize(x: &DVector<f64>, delta: f64, rng: &mut Stream) -> Result<Quantized> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("quantization step must be > 0, got {delta}")));
    }
    let mut steps = Vec::with_capacity(x.len());
    let mut qs = Vec::with_capacity(x.len());
    for &xl in x.iter() {
        if !xl.is_finite() {
            return Err(Error::param("quantizer input", format!("non-finite value {xl}")));
        }
        let scaled = xl / delta;
        if scaled.abs() >= LATTICE_LIMIT {
            return Err(Error::param("quantizer input", format!("{xl} exceeds the lattice range for step {delta}")));
        }
        let d = scaled.floor();
        let q = (scaled - d).clamp(0.0, 1.0);
        let up = q > 0.0 && rng.random::<f64>() < q;
        steps.push(d as i64 + i64::from(up));
        qs.push(q);
    }
    Ok(Quantized { steps, q: qs })
}

/// `base^exponent`, rejecting results beyond [`EXPONENT_LIMIT`].
pub fn growth(base: f64, exponent: usize) -> Result<f64> {
    if exponent == 0 {
        return Ok(1.0);
    }
    let log_mag = exponent as f64 * base.abs().ln();
    if log_mag > EXPONENT_LIMIT.ln() || exponent > i32::MAX as usize {
        return Err(Error::ExponentOverflow { base, exponent: exponent as u64 });
    }
    Ok(base.powi(exponent as i32))
}

/// How an eavesdropper picks the reference time for decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EavesdropperPolicy {
    /// The public decoding rule applied to the eavesdropper's own receptions.
    #[default]
    OwnHistory,
    /// The eavesdropper also overhears acknowledgements, so it knows the
    /// legitimate reference time, but still only holds its own decoded values.
    OverhearAcks,
}

impl ChannelCodec {
    fn reference_term(&self, state: &CodecState, ref_time: usize, k: usize) -> Result<DVector<f64>> {
        if k < ref_time {
            return Err(Error::param("k", format!("step {k} precedes reference time {ref_time}")));
        }
        Ok(&state.y_ref * growth(self.a, k - ref_time)?)
    }

    /// Encodes `y` at step `k`. The reference only moves on [`ack`].
    pub fn encode(&self, state: &CodecState, y: &DVector<f64>, k: usize, rng: &mut Stream) -> Result<EncodedPacket> {
        if y.len() != state.y_ref.len() {
            return Err(Error::dim("encode y", state.y_ref.len(), y.len()));
        }
        let residual = (y - self.reference_term(state, state.t_ref, k)?) / self.s;
        let (payload, q) = if self.transparent {
            (Payload::Exact(residual.iter().copied().collect()), vec![0.0; residual.len()])
        } else {
            let qz = quantize(&residual, self.delta, rng)?;
            (Payload::Lattice { steps: qz.steps, delta: self.delta }, qz.q)
        };
        Ok(EncodedPacket { k, channel: self.index, payload, q })
    }

    fn reconstruct(&self, packet: &EncodedPacket, reference: DVector<f64>) -> Result<DVector<f64>> {
        if packet.dim() != reference.len() {
            return Err(Error::dim("packet", reference.len(), packet.dim()));
        }
        Ok(packet.value() * self.s + reference)
    }

    /// Legitimate decoding `ȳ = z s + a^{k - t_ref} y_ref`; the returned state
    /// has `(t_ref, y_ref) = (k, ȳ)`.
    pub fn decode(&self, state: &CodecState, packet: &EncodedPacket) -> Result<(DVector<f64>, CodecState)> {
        let y = self.reconstruct(packet, self.reference_term(state, state.t_ref, packet.k)?)?;
        let next = CodecState { t_ref: packet.k, y_ref: y.clone(), initialized: true };
        Ok((y, next))
    }

    /// Decoding by a receiver that holds its own reference. `legit_t_ref` is
    /// only consulted under [`EavesdropperPolicy::OverhearAcks`].
    pub fn eavesdrop_decode(
        &self,
        state: &CodecState,
        packet: &EncodedPacket,
        policy: EavesdropperPolicy,
        legit_t_ref: usize,
    ) -> Result<(DVector<f64>, CodecState)> {
        let ref_time = match policy {
            EavesdropperPolicy::OwnHistory => state.t_ref,
            EavesdropperPolicy::OverhearAcks => legit_t_ref,
        };
        let y = self.reconstruct(packet, self.reference_term(state, ref_time, packet.k)?)?;
        let next = CodecState { t_ref: packet.k, y_ref: y.clone(), initialized: true };
        Ok((y, next))
    }

    /// Per-component decoding-error variance bound `s^2 delta^2 / 4`.
    pub fn decode_variance_bound(&self) -> f64 {
        if self.transparent {
            0.0
        } else {
            self.s * self.s * self.delta * self.delta / 4.0
        }
    }

    /// Exact per-component decoding-error variance `s^2 q (1 - q) delta^2`.
    pub fn decode_variance(&self, q: f64) -> f64 {
        if self.transparent {
            0.0
        } else {
            self.s * self.s * q * (1.0 - q) * self.delta * self.delta
        }
    }
}

/// Encoder-side acknowledgement: mirror the legitimate decoder.
pub fn ack(decoded: &DVector<f64>, k: usize) -> CodecState {
    CodecState { t_ref: k, y_ref: decoded.clone(), initialized: true }
}

/// Sample mean and (population) variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl SampleMoments {
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        // Welford update keeps 10^6-sample variances accurate near zero.
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        Self { n, mean, variance: if n > 0 { m2 / n as f64 } else { f64::NAN } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Statistical self-test of the quantizer and the legitimate decoder.
pub fn statistical_suite(seed: u64, draws: usize) -> Result<Vec<SuiteLine>> {
    use crate::rng::{substream, Role};
    let mut lines = Vec::new();
    let delta = 0.01;
    let sem = |sd: f64| 3.0 * sd / (draws as f64).sqrt();
    for (label, x) in [("on-lattice", 0.02f64), ("mid-cell", 0.025), ("q=0.7 cell", -0.013)] {
        let mut rng = substream(seed, Role::Auxiliary, 0, lines.len() as u32);
        let input = DVector::from_element(1, x);
        let q = {
            let scaled = x / delta;
            scaled - scaled.floor()
        };
        let mut samples = Vec::with_capacity(draws);
        for _ in 0..draws {
            samples.push(quantize(&input, delta, &mut rng)?.value(delta)[0]);
        }
        let m = SampleMoments::from_samples(samples);
        let mean_ok = (m.mean - x).abs() < sem(delta / 2.0);
        let var_cap = q * (1.0 - q) * delta * delta * 1.05;
        let var_ok = m.variance <= var_cap + 1e-300;
        lines.push(SuiteLine {
            name: format!("quantizer {label}"),
            pass: mean_ok && var_ok,
            detail: format!("mean {:.6e} (target {x}), var {:.6e} <= {:.6e}", m.mean, m.variance, var_cap),
        });
    }
    for s in [1.0, 2.0] {
        let codec = CodecParams::new(vec![5.0], vec![delta], s)?.channel(0);
        let mut rng = substream(seed, Role::Auxiliary, 1, s as u32);
        let state = CodecState { t_ref: 0, y_ref: DVector::from_element(1, 0.137), initialized: true };
        let mut errors = Vec::with_capacity(draws);
        for j in 0..draws {
            let y = DVector::from_element(1, 0.3 + 1e-4 * (j % 997) as f64);
            let packet = codec.encode(&state, &y, 1, &mut rng)?;
            let (decoded, _) = codec.decode(&state, &packet)?;
            errors.push(decoded[0] - y[0]);
        }
        let m = SampleMoments::from_samples(errors);
        let tol = sem(s * delta / 2.0);
        lines.push(SuiteLine {
            name: format!("decode mean error s={s}"),
            pass: m.mean.abs() < tol && m.variance <= s * s * delta * delta / 4.0 * 1.01,
            detail: format!("|mean| {:.3e} < {:.3e}, var {:.3e}", m.mean.abs(), tol, m.variance),
        });
    }
    Ok(lines)
}
