//! Interference-channel environment and reward functions.
//!
//! A [`ChannelRealization`] describes one `n`-cell network instance: a
//! square matrix of power gains, the receiver noise power, the per-cell
//! power budget and the per-cell circuit power. Two rewards are defined on
//! top of it: sum spectral efficiency (SE) and network energy efficiency
//! (EE). Both are pure functions of the channel and a [`PowerAction`].

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_N_CELLS: usize = 3;
pub const DEFAULT_P_MAX: f64 = 10.0;
pub const DEFAULT_P_CIRCUIT: f64 = 1.0;
pub const DEFAULT_NOISE_POWER: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Which reward the environment reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    /// Sum spectral efficiency, bits/s/Hz.
    #[serde(rename = "SE", alias = "se")]
    Se,
    /// Network energy efficiency, bits/Joule/Hz.
    #[serde(rename = "EE", alias = "ee")]
    Ee,
}

impl Objective {
    pub fn units(self) -> &'static str {
        match self {
            Objective::Se => "bits/s/Hz",
            Objective::Ee => "bits/Joule/Hz",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Se => "SE",
            Objective::Ee => "EE",
        })
    }
}

impl std::str::FromStr for Objective {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SE" => Ok(Objective::Se),
            "EE" => Ok(Objective::Ee),
            other => Err(EnvError::InvalidArgument(format!("unknown objective `{other}`"))),
        }
    }
}

/// Scalar instance parameters that are not drawn at random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub noise_power: f64,
    pub p_max: f64,
    pub p_circuit: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            noise_power: DEFAULT_NOISE_POWER,
            p_max: DEFAULT_P_MAX,
            p_circuit: DEFAULT_P_CIRCUIT,
        }
    }
}

/// One network instance. `gains` is stored row-major: entry `(i, j)` is the
/// power gain from transmitter `j` into receiver `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelDocument", into = "ChannelDocument")]
pub struct ChannelRealization {
    n_cells: usize,
    gains: Vec<f64>,
    noise_power: f64,
    p_max: f64,
    p_circuit: f64,
    seed: u64,
}

/// JSON form of a channel instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDocument {
    n_cells: usize,
    gains: Vec<f64>,
    noise_power: f64,
    p_max: f64,
    p_circuit: f64,
    seed: u64,
}

impl TryFrom<ChannelDocument> for ChannelRealization {
    type Error = EnvError;

    fn try_from(doc: ChannelDocument) -> Result<Self, Self::Error> {
        ChannelRealization::new(
            doc.n_cells,
            doc.gains,
            ChannelParams {
                noise_power: doc.noise_power,
                p_max: doc.p_max,
                p_circuit: doc.p_circuit,
            },
            doc.seed,
        )
    }
}

impl From<ChannelRealization> for ChannelDocument {
    fn from(c: ChannelRealization) -> Self {
        Self {
            n_cells: c.n_cells,
            gains: c.gains,
            noise_power: c.noise_power,
            p_max: c.p_max,
            p_circuit: c.p_circuit,
            seed: c.seed,
        }
    }
}

impl ChannelRealization {
    /// Builds a channel from explicit row-major gains, validating every invariant.
    pub fn new(
        n_cells: usize,
        gains: Vec<f64>,
        params: ChannelParams,
        seed: u64,
    ) -> Result<Self, EnvError> {
        if n_cells == 0 {
            return Err(EnvError::InvalidArgument("n_cells must be at least 1".into()));
        }
        if gains.len() != n_cells * n_cells {
            return Err(EnvError::InvalidArgument(format!(
                "expected {} gains for {n_cells} cells, got {}",
                n_cells * n_cells,
                gains.len()
            )));
        }
        if let Some(g) = gains.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(EnvError::InvalidArgument(format!(
                "gains must be finite and non-negative, found {g}"
            )));
        }
        if (0..n_cells).any(|i| gains[i * n_cells + i] <= 0.0) {
            return Err(EnvError::InvalidArgument("direct-link gains must be positive".into()));
        }
        if !(params.noise_power.is_finite() && params.noise_power > 0.0) {
            return Err(EnvError::InvalidArgument("noise_power must be positive".into()));
        }
        if !(params.p_max.is_finite() && params.p_max > 0.0) {
            return Err(EnvError::InvalidArgument("p_max must be positive".into()));
        }
        if !(params.p_circuit.is_finite() && params.p_circuit >= 0.0) {
            return Err(EnvError::InvalidArgument("p_circuit must be non-negative".into()));
        }
        Ok(Self {
            n_cells,
            gains,
            noise_power: params.noise_power,
            p_max: params.p_max,
            p_circuit: params.p_circuit,
            seed,
        })
    }

    /// Interference-free channel with unit direct gains.
    pub fn identity(n_cells: usize, params: ChannelParams) -> Result<Self, EnvError> {
        let mut gains = vec![0.0; n_cells * n_cells];
        for i in 0..n_cells {
            gains[i * n_cells + i] = 1.0;
        }
        Self::new(n_cells, gains, params, 0)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Power gain from transmitter `tx` into receiver `rx`.
    #[inline]
    pub fn gain(&self, rx: usize, tx: usize) -> f64 {
        self.gains[rx * self.n_cells + tx]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn p_circuit(&self) -> f64 {
        self.p_circuit
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            noise_power: self.noise_power,
            p_max: self.p_max,
            p_circuit: self.p_circuit,
        }
    }

    /// Same gains, different scalar parameters.
    pub fn with_params(&self, params: ChannelParams) -> Result<Self, EnvError> {
        Self::new(self.n_cells, self.gains.clone(), params, self.seed)
    }

    /// Returns an error unless `p` has one finite entry per cell inside `[0, p_max]`.
    pub fn check_admissible(&self, p: &PowerAction) -> Result<(), EnvError> {
        if p.len() != self.n_cells {
            return Err(EnvError::InvalidArgument(format!(
                "power vector has {} entries, channel has {} cells",
                p.len(),
                self.n_cells
            )));
        }
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0 && **x <= self.p_max)) {
            return Err(EnvError::InvalidArgument(format!(
                "power {x} outside [0, {}]",
                self.p_max
            )));
        }
        Ok(())
    }

    /// Total consumed power: transmit plus circuit.
    pub fn consumed_power(&self, p: &PowerAction) -> f64 {
        p.iter().sum::<f64>() + self.n_cells as f64 * self.p_circuit
    }
}

/// A candidate transmit-power vector, one entry per cell, in Watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerAction(Vec<f64>);

impl PowerAction {
    pub fn new(powers: Vec<f64>) -> Self {
        Self(powers)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn splat(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn powers(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Draws each entry uniformly from `[0, p_max]`.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, p_max: f64) -> Self {
        Self((0..n).map(|_| rng.random::<f64>() * p_max).collect())
    }

    /// Canonical text identity: entries printed with three decimals.
    pub fn canonical_key(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|v| format_power(*v)).collect();
        parts.join(", ")
    }
}

impl std::ops::Index<usize> for PowerAction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for PowerAction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Three-decimal rendering shared by prompts, mock output and dedup keys.
pub fn format_power(v: f64) -> String {
    let s = format!("{v:.3}");
    // "-0.000" and "0.000" must map to the same key
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Evaluated reward with its objective tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub value: f64,
    pub objective: Objective,
}

/// Draws a Rayleigh-fading instance with default scalar parameters.
pub fn sample_channel(n_cells: usize, seed: u64) -> Result<ChannelRealization, EnvError> {
    sample_channel_with(n_cells, seed, ChannelParams::default())
}

/// Draws a Rayleigh-fading instance: every link coefficient is circularly
/// symmetric complex Gaussian with unit variance, and the gain is its
/// squared magnitude.
pub fn sample_channel_with(
    n_cells: usize,
    seed: u64,
    params: ChannelParams,
) -> Result<ChannelRealization, EnvError> {
    if n_cells == 0 {
        return Err(EnvError::InvalidArgument("n_cells must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std dev");
    let mut gains = Vec::with_capacity(n_cells * n_cells);
    for _ in 0..n_cells * n_cells {
        let re: f64 = half.sample(&mut rng);
        let im: f64 = half.sample(&mut rng);
        gains.push(re * re + im * im);
    }
    // a zero direct gain has probability zero but would break the invariant
    for i in 0..n_cells {
        let d = &mut gains[i * n_cells + i];
        if *d <= 0.0 {
            *d = f64::MIN_POSITIVE;
        }
    }
    ChannelRealization::new(n_cells, gains, params, seed)
}

fn sinr_unchecked(chan: &ChannelRealization, p: &[f64], out: &mut [f64]) {
    let n = chan.n_cells;
    for i in 0..n {
        let mut interference = chan.noise_power;
        for (j, pj) in p.iter().enumerate() {
            if j != i {
                interference += chan.gain(i, j) * pj;
            }
        }
        out[i] = chan.gain(i, i) * p[i] / interference;
    }
}

fn check_shape(chan: &ChannelRealization, p: &PowerAction) -> Result<(), EnvError> {
    if p.len() != chan.n_cells {
        return Err(EnvError::InvalidArgument(format!(
            "power vector has {} entries, channel has {} cells",
            p.len(),
            chan.n_cells
        )));
    }
    Ok(())
}

/// Per-receiver signal-to-interference-plus-noise ratio.
pub fn sinr(chan: &ChannelRealization, p: &PowerAction) -> Result<Vec<f64>, EnvError> {
    chan.check_admissible(p)?;
    let mut out = vec![0.0; chan.n_cells];
    sinr_unchecked(chan, p.powers(), &mut out);
    Ok(out)
}

/// Sum rate in bits, without admissibility checks. Used by hot loops that
/// already guarantee `p` is inside the box.
pub(crate) fn sum_rate_bits(chan: &ChannelRealization, p: &[f64]) -> f64 {
    let n = chan.n_cells;
    let mut total = 0.0;
    for i in 0..n {
        let mut interference = chan.noise_power;
        for (j, pj) in p.iter().enumerate() {
            if j != i {
                interference += chan.gain(i, j) * pj;
            }
        }
        total += (chan.gain(i, i) * p[i] / interference).ln_1p();
    }
    total / std::f64::consts::LN_2
}

pub(crate) fn energy_efficiency_raw(chan: &ChannelRealization, p: &[f64]) -> f64 {
    let denom = p.iter().sum::<f64>() + chan.n_cells as f64 * chan.p_circuit;
    sum_rate_bits(chan, p) / denom
}

pub(crate) fn evaluate_raw(objective: Objective, chan: &ChannelRealization, p: &[f64]) -> f64 {
    match objective {
        Objective::Se => sum_rate_bits(chan, p),
        Objective::Ee => energy_efficiency_raw(chan, p),
    }
}

/// Sum spectral efficiency `Σ log2(1 + sinr_i)`.
pub fn spectral_efficiency(chan: &ChannelRealization, p: &PowerAction) -> Result<Reward, EnvError> {
    chan.check_admissible(p)?;
    Ok(Reward {
        value: sum_rate_bits(chan, p.powers()),
        objective: Objective::Se,
    })
}

/// Network energy efficiency: SE divided by total transmit plus circuit power.
pub fn energy_efficiency(chan: &ChannelRealization, p: &PowerAction) -> Result<Reward, EnvError> {
    check_shape(chan, p)?;
    let se = spectral_efficiency(chan, p)?.value;
    Ok(Reward {
        value: se / chan.consumed_power(p),
        objective: Objective::Ee,
    })
}

pub fn evaluate(
    objective: Objective,
    chan: &ChannelRealization,
    p: &PowerAction,
) -> Result<Reward, EnvError> {
    match objective {
        Objective::Se => spectral_efficiency(chan, p),
        Objective::Ee => energy_efficiency(chan, p),
    }
}
