//! Mono PCM primitives: the buffer type, WAV I/O, resampling, cross-fading and
//! the three distortion effects.

mod crossfade;
mod effects;
mod resample;
mod wav;

pub use crossfade::{crossfade_append, crossfade_concat, fade_len};
pub use effects::{apply_echo, apply_speed, apply_tempo, EFFECT_FACTOR_RANGE};
pub use resample::{resample, RESAMPLER_BETA, RESAMPLER_TAPS};
pub use wav::{decode_wav, encode_wav, quantize, read_wav, write_wav};

use crate::error::{Error, Result};

/// Single-channel audio with a sample rate. Samples are finite and nominally
/// in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmBuffer {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl PcmBuffer {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidBuffer("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidBuffer(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn silence(len: usize, sample_rate_hz: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    /// Caller guarantees the invariants; used on outputs of our own DSP.
    pub(crate) fn from_parts(samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        debug_assert!(sample_rate_hz > 0);
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Samples per `ms` milliseconds at this buffer's rate, rounded.
    pub fn ms_to_samples(&self, ms: f64) -> usize {
        ms_to_samples(ms, self.sample_rate_hz)
    }
}

pub(crate) fn ms_to_samples(ms: f64, rate: u32) -> usize {
    (ms * rate as f64 / 1000.0).round().max(0.0) as usize
}
