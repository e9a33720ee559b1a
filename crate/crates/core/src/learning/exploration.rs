use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    /// rad
    pub phase: f64,
}

impl Sinusoid {
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).sin()
    }
}

/// Knobs for the random sum-of-sinusoids probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationConfig {
    /// Sinusoids per input channel.
    pub num_sinusoids: usize,
    pub freq_min: f64,
    pub freq_max: f64,
    /// Peak budget per channel; each sinusoid gets `amplitude / num_sinusoids`.
    pub amplitude: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            num_sinusoids: 100,
            freq_min: 0.5,
            freq_max: 50.0,
            amplitude: 1.0,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sinusoids == 0 {
            return Err(Error::InvalidArgument("need at least one sinusoid per channel".into()));
        }
        if !(self.freq_min > 0.0 && self.freq_max >= self.freq_min && self.freq_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid frequency range [{}, {}]",
                self.freq_min, self.freq_max
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument("amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// Per-channel probe `u0_j(t) = sum_i a_ji sin(w_ji t + phi_ji)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSignal {
    channels: Vec<Vec<Sinusoid>>,
    seed: Option<u64>,
}

impl ExplorationSignal {
    pub fn from_channels(channels: Vec<Vec<Sinusoid>>) -> Result<Self> {
        if channels.is_empty() || channels.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("every channel needs at least one sinusoid".into()));
        }
        let bad = channels.iter().flatten().any(|s| {
            !(s.frequency > 0.0) || !s.frequency.is_finite() || !s.amplitude.is_finite() || !s.phase.is_finite()
        });
        if bad {
            return Err(Error::InvalidArgument("sinusoid frequencies must be positive and finite".into()));
        }
        Ok(Self { channels, seed: None })
    }

    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    pub fn components(&self, channel: usize) -> &[Sinusoid] {
        &self.channels[channel]
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|ch| ch.iter().map(|s| s.value(t)).sum::<f64>()),
        )
    }

    /// `sum |a_i|` for one channel, an upper bound on `|u0_j(t)|`.
    pub fn peak_bound(&self, channel: usize) -> f64 {
        self.channels[channel].iter().map(|s| s.amplitude.abs()).sum()
    }
}

/// Draws a seeded probe for `m` channels: frequencies uniform in
/// `[freq_min, freq_max]`, phases uniform in `[0, 2 pi)`.
pub fn make_exploration(seed: u64, m: usize, cfg: &ExplorationConfig) -> Result<ExplorationSignal> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one channel".into()));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude = cfg.amplitude / cfg.num_sinusoids as f64;
    let channels = (0..m)
        .map(|_| {
            (0..cfg.num_sinusoids)
                .map(|_| {
                    let frequency = if cfg.freq_max > cfg.freq_min {
                        rng.random_range(cfg.freq_min..cfg.freq_max)
                    } else {
                        cfg.freq_min
                    };
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    Sinusoid {
                        amplitude,
                        frequency,
                        phase,
                    }
                })
                .collect()
        })
        .collect();
    let mut signal = ExplorationSignal::from_channels(channels)?;
    signal.seed = Some(seed);
    Ok(signal)
}
