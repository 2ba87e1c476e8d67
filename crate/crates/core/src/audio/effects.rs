use std::f32::consts::PI;

use super::resample::resample_ratio;
use super::{ms_to_samples, PcmBuffer};
use crate::error::{Error, Result};

/// Allowed range for tempo and speed factors.
pub const EFFECT_FACTOR_RANGE: (f64, f64) = (0.5, 2.0);

const WSOLA_FRAME_MS: f64 = 25.0;
const WSOLA_SEEK_MS: f64 = 5.0;

fn check_factor(name: &'static str, factor: f64) -> Result<()> {
    let (min, max) = EFFECT_FACTOR_RANGE;
    if !(min..=max).contains(&factor) {
        return Err(Error::OutOfRange {
            name,
            value: factor,
            min,
            max,
        });
    }
    Ok(())
}

/// Time-stretch without changing pitch (WSOLA).
///
/// Frames of 25 ms are overlap-added with a periodic Hann window at 50%
/// overlap. Each analysis frame is shifted by up to ±5 ms from its nominal
/// position to best match the natural continuation of the previous frame.
/// A factor above one shortens the signal; the output has exactly
/// `round(len / factor)` samples.
pub fn apply_tempo(buf: &PcmBuffer, factor: f64) -> Result<PcmBuffer> {
    check_factor("tempo factor", factor)?;
    if factor == 1.0 {
        return Ok(buf.clone());
    }
    let x = buf.samples();
    let sr = buf.sample_rate_hz();
    let out_len = (x.len() as f64 / factor).round() as usize;
    let frame = ms_to_samples(WSOLA_FRAME_MS, sr).max(2) & !1;
    let hop = frame / 2;
    let seek = ms_to_samples(WSOLA_SEEK_MS, sr) as i64;

    // Zero padding on both sides turns every read below into a plain slice.
    // Candidate starts stay within hop + seek of the nominal grid, which ends
    // about two hops past the input.
    let pad = 4 * frame + seek as usize;
    let mut padded = vec![0.0f32; x.len() + 2 * pad];
    padded[pad..pad + x.len()].copy_from_slice(x);
    let seg = |start: i64, n: usize| -> &[f32] {
        let i = (start + pad as i64) as usize;
        &padded[i..i + n]
    };

    let window: Vec<f32> = (0..frame)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f32 / frame as f32).cos())
        .collect();

    // Frame k lands at output offset k*hop - hop so that every output sample
    // is covered by two frames whose windows sum to one.
    let padded_len = out_len + frame + hop;
    let mut acc = vec![0.0f32; padded_len];
    let mut norm = vec![0.0f32; padded_len];
    let analysis_hop = hop as f64 * factor;

    let mut prev_start: i64 = -(hop as i64);
    let mut k = 0usize;
    loop {
        let out_start = k as i64 * hop as i64 - hop as i64;
        if out_start >= out_len as i64 {
            break;
        }
        let start = if k == 0 {
            prev_start
        } else {
            let nominal = (k as f64 * analysis_hop).round() as i64 - hop as i64;
            let natural = prev_start + hop as i64;
            let target = seg(natural, hop);
            let mut best = nominal;
            let mut best_score = f32::NEG_INFINITY;
            for delta in -seek..=seek {
                let cand = nominal + delta;
                let score: f32 = seg(cand, hop).iter().zip(target).map(|(a, b)| a * b).sum();
                if score > best_score {
                    best_score = score;
                    best = cand;
                }
            }
            best
        };
        let base = (out_start + hop as i64) as usize;
        let src = seg(start, frame);
        for (i, (&w, &v)) in window.iter().zip(src).enumerate() {
            acc[base + i] += w * v;
            norm[base + i] += w;
        }
        prev_start = start;
        k += 1;
    }

    let out = acc[hop..hop + out_len]
        .iter()
        .zip(&norm[hop..hop + out_len])
        .map(|(&a, &n)| if n > 1e-6 { a / n } else { 0.0 })
        .collect();
    Ok(PcmBuffer::from_parts(out, sr))
}

/// Change playback rate: resample by `1 / factor` and keep the original rate
/// label, so duration scales by `1 / factor` and pitch by `factor`.
pub fn apply_speed(buf: &PcmBuffer, factor: f64) -> Result<PcmBuffer> {
    check_factor("speed factor", factor)?;
    if factor == 1.0 {
        return Ok(buf.clone());
    }
    const SCALE: f64 = (1u64 << 20) as f64;
    let down = (factor * SCALE).round() as u64;
    let out = resample_ratio(buf.samples(), SCALE as u64, down);
    Ok(PcmBuffer::from_parts(out, buf.sample_rate_hz()))
}

/// Single feed-forward echo `y[t] = x[t] + decay * x[t - d]`, output length
/// `len + d`, clamped to `[-1, 1]`.
pub fn apply_echo(buf: &PcmBuffer, delay_ms: f64, decay: f64) -> Result<PcmBuffer> {
    if !(delay_ms.is_finite() && delay_ms > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "echo delay must be positive, got {delay_ms} ms"
        )));
    }
    if !(0.0..1.0).contains(&decay) {
        return Err(Error::OutOfRange {
            name: "echo decay",
            value: decay,
            min: 0.0,
            max: 1.0,
        });
    }
    let d = buf.ms_to_samples(delay_ms);
    if d == 0 {
        return Err(Error::InvalidArgument(format!(
            "echo delay {delay_ms} ms is shorter than one sample"
        )));
    }
    let x = buf.samples();
    let decay = decay as f32;
    let out = (0..x.len() + d)
        .map(|t| {
            let dry = x.get(t).copied().unwrap_or(0.0);
            let wet = if t >= d { x[t - d] } else { 0.0 };
            (dry + decay * wet).clamp(-1.0, 1.0)
        })
        .collect();
    Ok(PcmBuffer::from_parts(out, buf.sample_rate_hz()))
}
