use std::f64::consts::PI;

use super::PcmBuffer;
use crate::error::{Error, Result};

/// Filter taps evaluated per output sample (one polyphase branch).
pub const RESAMPLER_TAPS: usize = 32;
/// Kaiser window shape parameter.
pub const RESAMPLER_BETA: f64 = 8.6;

/// Passband edge as a fraction of the lower of the two Nyquist rates.
const CUTOFF: f64 = 0.9;
/// Up to this many phases every branch is tabulated exactly. Beyond it the
/// kernel is tabulated at this resolution and neighbouring branches are
/// linearly interpolated.
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

struct Kernel {
    cutoff: f64,
    i0_beta: f64,
}

impl Kernel {
    const HALF: i64 = (RESAMPLER_TAPS / 2) as i64;

    fn new(up: u64, down: u64) -> Self {
        let ratio = up as f64 / down as f64;
        Self {
            cutoff: CUTOFF * ratio.min(1.0),
            i0_beta: bessel_i0(RESAMPLER_BETA),
        }
    }

    /// Coefficients for an output sample lying `frac` (in `[0, 1]`) input
    /// samples past input index `n0`; tap `t` multiplies `x[n0 - HALF + 1 + t]`.
    /// Normalized to unit DC gain.
    fn branch(&self, frac: f64, out: &mut [f32; RESAMPLER_TAPS]) {
        let half = Self::HALF as f64;
        let mut coeffs = [0.0f64; RESAMPLER_TAPS];
        for (t, c) in coeffs.iter_mut().enumerate() {
            let x = (t as i64 - Self::HALF + 1) as f64 - frac;
            let r = x / half;
            let w = if r.abs() >= 1.0 {
                0.0
            } else {
                bessel_i0(RESAMPLER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta
            };
            *c = self.cutoff * sinc(self.cutoff * x) * w;
        }
        let sum: f64 = coeffs.iter().sum();
        for (o, c) in out.iter_mut().zip(coeffs) {
            *o = (c / sum) as f32;
        }
    }
}

/// Band-limited rational resampling by `up / down` (already reduced or not).
pub(crate) fn resample_ratio(input: &[f32], up: u64, down: u64) -> Vec<f32> {
    let g = gcd(up, down);
    let (up, down) = (up / g, down / g);
    if up == down {
        return input.to_vec();
    }
    let out_len = ((input.len() as u128 * up as u128 + down as u128 / 2) / down as u128) as usize;
    let kernel = Kernel::new(up, down);

    let exact = up <= MAX_TABLE_PHASES;
    let rows = if exact { up } else { MAX_TABLE_PHASES + 1 };
    let grid = if exact { up } else { MAX_TABLE_PHASES };
    let table: Vec<[f32; RESAMPLER_TAPS]> = (0..rows)
        .map(|p| {
            let mut b = [0.0; RESAMPLER_TAPS];
            kernel.branch(p as f64 / grid as f64, &mut b);
            b
        })
        .collect();

    let n = input.len() as i64;
    let mut scratch = [0.0f32; RESAMPLER_TAPS];
    let mut out = Vec::with_capacity(out_len);
    for k in 0..out_len as u64 {
        let pos = k as u128 * down as u128;
        let n0 = (pos / up as u128) as i64;
        let phase = (pos % up as u128) as u64;
        let coeffs = if exact {
            &table[phase as usize]
        } else {
            let x = phase as f64 * MAX_TABLE_PHASES as f64 / up as f64;
            let i = x as usize;
            let t = (x - i as f64) as f32;
            for ((s, a), b) in scratch.iter_mut().zip(&table[i]).zip(&table[i + 1]) {
                *s = a + t * (b - a);
            }
            &scratch
        };
        let first = n0 - Kernel::HALF + 1;
        let mut acc = 0.0f32;
        if first >= 0 && first + RESAMPLER_TAPS as i64 <= n {
            let window = &input[first as usize..first as usize + RESAMPLER_TAPS];
            for (c, x) in coeffs.iter().zip(window) {
                acc += c * x;
            }
        } else {
            for (t, c) in coeffs.iter().enumerate() {
                let idx = first + t as i64;
                if (0..n).contains(&idx) {
                    acc += c * input[idx as usize];
                }
            }
        }
        out.push(acc);
    }
    out
}

/// Resample to `target_rate_hz` with a Kaiser-windowed sinc polyphase filter.
pub fn resample(buf: &PcmBuffer, target_rate_hz: u32) -> Result<PcmBuffer> {
    if target_rate_hz == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    let out = resample_ratio(buf.samples(), target_rate_hz as u64, buf.sample_rate_hz() as u64);
    Ok(PcmBuffer::from_parts(out, target_rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference() {
        // Reference values from scipy.special.i0.
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-12);
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(8.6) / 750.461_159_563_165_9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_ratio() {
        let buf = PcmBuffer::new(vec![0.1; 24000], 24000).unwrap();
        let out = resample(&buf, 16000).unwrap();
        assert_eq!(out.sample_rate_hz(), 16000);
        assert!((out.len() as i64 - 16000).abs() <= 1);
        let up = resample(&buf, 44100).unwrap();
        assert!((up.len() as i64 - 44100).abs() <= 1);
    }

    #[test]
    fn same_rate_is_identity() {
        let buf = PcmBuffer::new(vec![0.1, -0.3, 0.7], 24000).unwrap();
        assert_eq!(resample(&buf, 24000).unwrap(), buf);
    }

    #[test]
    fn dc_preserved_away_from_edges() {
        let buf = PcmBuffer::new(vec![0.25; 24000], 24000).unwrap();
        for target in [16000, 22050, 48000, 8000] {
            let out = resample(&buf, target).unwrap();
            let s = out.samples();
            for &v in &s[64..s.len() - 64] {
                assert!((v - 0.25).abs() < 1e-3, "{target}: {v}");
            }
        }
    }

    #[test]
    fn large_phase_count_uses_direct_path() {
        // 24000 -> 24001 has 24001 phases: exercises per-sample coefficients.
        let buf = PcmBuffer::new(vec![0.25; 4800], 24000).unwrap();
        let out = resample(&buf, 24001).unwrap();
        assert_eq!(out.len(), 4800);
        for &v in &out.samples()[64..out.len() - 64] {
            assert!((v - 0.25).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_target_rejected() {
        let buf = PcmBuffer::new(vec![0.0; 4], 24000).unwrap();
        assert!(resample(&buf, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let buf = PcmBuffer::new(
            (0..5000).map(|i| ((i * 37 % 101) as f32 / 101.0) - 0.5).collect(),
            24000,
        )
        .unwrap();
        let a = resample(&buf, 16000).unwrap();
        let b = resample(&buf, 16000).unwrap();
        assert_eq!(a, b);
    }
}
