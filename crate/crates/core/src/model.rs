//! Linear multi-sensor plant
//!
//! ```text
//! x_{k+1} = A x_k + B u_k + D w_k,      w_k ~ N(0, Q)
//! y_{i,k} = C_i x_k + E_i v_{i,k},      v_{i,k} ~ N(0, R_i)
//! ```
//!
//! with `x_0 ~ N(x̄_0, P̄_0)`. `B` defaults to an empty input, `D` and `E_i`
//! to identities.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, check_pd, check_psd, psd_sqrt, require_len, require_shape, require_square};
use crate::rng::{substream, Role, Stream};
use crate::{Error, Result};

/// Known plant input.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Constant(DVector<f64>),
    /// Per-step inputs; the last entry is held once the sequence runs out.
    Sequence(Vec<DVector<f64>>),
}

impl Input {
    pub fn at(&self, k: usize) -> &DVector<f64> {
        match self {
            Input::Constant(u) => u,
            Input::Sequence(seq) => &seq[k.min(seq.len() - 1)],
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Input::Constant(u) => Some(u.len()),
            Input::Sequence(seq) => {
                let d = seq.first()?.len();
                seq.iter().all(|u| u.len() == d).then_some(d)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DMatrix<f64>,
    q: DMatrix<f64>,
    x0_mean: DVector<f64>,
    p0: DMatrix<f64>,
    input: Input,
    q_factor: DMatrix<f64>,
    p0_factor: DMatrix<f64>,
}

impl SystemModel {
    /// Plant without input and with `D = I`.
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>, x0_mean: DVector<f64>, p0: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::with_all(a, DMatrix::zeros(n, 0), DMatrix::identity(n, n), q, x0_mean, p0, Input::Constant(DVector::zeros(0)))
    }

    pub fn with_all(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        q: DMatrix<f64>,
        x0_mean: DVector<f64>,
        p0: DMatrix<f64>,
        input: Input,
    ) -> Result<Self> {
        require_square("A", &a)?;
        let n = a.nrows();
        if n == 0 {
            return Err(Error::param("A", "state dimension must be at least 1"));
        }
        require_shape("B", &b, n, b.ncols())?;
        require_shape("D", &d, n, d.ncols())?;
        require_shape("Q", &q, d.ncols(), d.ncols())?;
        require_len("x0", &x0_mean, n)?;
        require_shape("P0", &p0, n, n)?;
        match input.dim() {
            Some(du) if du == b.ncols() => {}
            Some(du) => return Err(Error::dim("input u", b.ncols(), du)),
            None => return Err(Error::param("u", "input sequence empty or ragged")),
        }
        check_psd("Q", &q)?;
        check_psd("P0", &p0)?;
        let q_factor = psd_sqrt(&q);
        let p0_factor = psd_sqrt(&p0);
        Ok(Self { a, b, d, q, x0_mean, p0, input, q_factor, p0_factor })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn noise_dim(&self) -> usize {
        self.d.ncols()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn x0_mean(&self) -> &DVector<f64> {
        &self.x0_mean
    }
    pub fn p0(&self) -> &DMatrix<f64> {
        &self.p0
    }
    pub fn input(&self) -> &Input {
        &self.input
    }

    /// Process covariance seen by the state, `D Q D^T`.
    pub fn effective_q(&self) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.d * &self.q * self.d.transpose()))
    }

    /// Known input contribution `B u_k`.
    pub fn input_term(&self, k: usize) -> DVector<f64> {
        &self.b * self.input.at(k)
    }
}

#[derive(Debug, Clone)]
pub struct SensorModel {
    c: DMatrix<f64>,
    e: DMatrix<f64>,
    r: DMatrix<f64>,
    r_factor: DMatrix<f64>,
}

impl SensorModel {
    /// Sensor with `E = I`.
    pub fn new(c: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let m = c.nrows();
        Self::with_gain(c, DMatrix::identity(m, m), r)
    }

    pub fn with_gain(c: DMatrix<f64>, e: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let m = c.nrows();
        if m == 0 {
            return Err(Error::param("C", "sensor must have at least one output"));
        }
        require_shape("E", &e, m, e.ncols())?;
        require_shape("R", &r, e.ncols(), e.ncols())?;
        check_pd("R", &r)?;
        if linalg::rank(&c, 1e-10) < m {
            return Err(Error::param("C", "measurement matrix must have full row rank"));
        }
        let r_factor = psd_sqrt(&r);
        Ok(Self { c, e, r, r_factor })
    }

    /// Like [`SensorModel::new`] but accepts `R = 0`; noiseless test plants only.
    pub fn noiseless(c: DMatrix<f64>) -> Result<Self> {
        let m = c.nrows();
        if m == 0 || linalg::rank(&c, 1e-10) < m {
            return Err(Error::param("C", "measurement matrix must have full row rank"));
        }
        Ok(Self { c, e: DMatrix::identity(m, m), r: DMatrix::zeros(m, m), r_factor: DMatrix::zeros(m, m) })
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Measurement noise covariance as seen at the output, `E R E^T`.
    pub fn effective_r(&self) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.e * &self.r * self.e.transpose()))
    }
}

/// `A x + B u + D w`.
pub fn step_state(model: &SystemModel, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    require_len("step_state x", x, model.state_dim())?;
    require_len("step_state u", u, model.input_dim())?;
    require_len("step_state w", w, model.noise_dim())?;
    Ok(&model.a * x + &model.b * u + &model.d * w)
}

/// `C_i x + E_i v`.
pub fn measure(sensor: &SensorModel, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    require_len("measure x", x, sensor.c.ncols())?;
    require_len("measure v", v, sensor.e.ncols())?;
    Ok(&sensor.c * x + &sensor.e * v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0 ..= x_horizon`.
    pub states: Vec<DVector<f64>>,
    /// `measurements[i][k] = y_{i,k}` for `k = 0 ..= horizon`.
    pub measurements: Vec<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// Rows `k, x..., y_1..., y_M...` with round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, x) in self.states.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in x.iter().chain(self.measurements.iter().flat_map(|m| m[k].iter())) {
                out.push(',');
                out.push_str(&crate::report::fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn gaussian(factor: &DMatrix<f64>, rng: &mut Stream) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(rng));
    factor * z
}

/// Random streams consumed by [`simulate_plant`].
pub struct PlantStreams {
    pub initial: Stream,
    pub process: Stream,
    pub measurement: Vec<Stream>,
}

impl PlantStreams {
    pub fn new(master_seed: u64, trial: u64, sensors: usize) -> Self {
        Self {
            initial: substream(master_seed, Role::InitialState, trial, 0),
            process: substream(master_seed, Role::ProcessNoise, trial, 0),
            measurement: (0..sensors)
                .map(|i| substream(master_seed, Role::MeasurementNoise, trial, i as u32))
                .collect(),
        }
    }
}

/// Samples a trajectory of `horizon` transitions.
pub fn simulate_plant(
    model: &SystemModel,
    sensors: &[SensorModel],
    horizon: usize,
    streams: &mut PlantStreams,
) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    if streams.measurement.len() != sensors.len() {
        return Err(Error::dim("measurement streams", sensors.len(), streams.measurement.len()));
    }
    for s in sensors {
        if s.c.ncols() != model.state_dim() {
            return Err(Error::dim("sensor C columns", model.state_dim(), s.c.ncols()));
        }
    }
    let mut x = &model.x0_mean + gaussian(&model.p0_factor, &mut streams.initial);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut measurements: Vec<Vec<DVector<f64>>> = vec![Vec::with_capacity(horizon + 1); sensors.len()];
    for k in 0..=horizon {
        for (i, s) in sensors.iter().enumerate() {
            let v = gaussian(&s.r_factor, &mut streams.measurement[i]);
            measurements[i].push(&s.c * &x + &s.e * v);
        }
        states.push(x.clone());
        if k < horizon {
            let w = gaussian(&model.q_factor, &mut streams.process);
            x = &model.a * &x + model.input_term(k) + &model.d * w;
        }
    }
    Ok(Trajectory { states, measurements })
}

/// Three-tank plant with its three two-output sensors.
pub fn three_tank_preset() -> (SystemModel, Vec<SensorModel>) {
    let a = DMatrix::from_row_slice(3, 3, &[
        0.9889, 0.0001, 0.0110,
        0.0001, 0.9774, 0.0119,
        0.0110, 0.0119, 0.9770,
    ]);
    let b = DMatrix::from_row_slice(3, 2, &[
        64.5993, 0.0015,
        0.0015, 64.2236,
        0.3604, 0.3910,
    ]);
    // w enters through D = B, so Q lives in the two-dimensional input space.
    let q = DMatrix::identity(2, 2) * 1e-10;
    let x0 = DVector::from_vec(vec![0.3, 0.1, 0.2]);
    let p0 = DMatrix::identity(3, 3);
    let u = DVector::from_vec(vec![3.0e-5, 2.0e-5]);
    let model = SystemModel::with_all(a, b.clone(), b, q, x0, p0, Input::Constant(u))
        .expect("three-tank preset is valid");

    let select = |rows: [[f64; 3]; 2]| DMatrix::from_fn(2, 3, |r, c| rows[r][c]);
    let r = DMatrix::identity(2, 2) * 1e-4;
    let sensors = [
        select([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        select([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        select([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
    ]
    .into_iter()
    .map(|c| SensorModel::new(c, r.clone()).expect("three-tank sensor is valid"))
    .collect();
    (model, sensors)
}
