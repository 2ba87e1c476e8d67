use super::{ms_to_samples, PcmBuffer};
use crate::error::{Error, Result};

/// Overlap length used when joining buffers of length `a_len` and `b_len`.
pub fn fade_len(fade_ms: f64, sample_rate_hz: u32, a_len: usize, b_len: usize) -> usize {
    ms_to_samples(fade_ms, sample_rate_hz).min(a_len).min(b_len)
}

/// Append `next` to `acc`, linearly cross-fading the last `fade_n` samples
/// of `acc` with the first `fade_n` samples of `next`.
///
/// Within the overlap, sample `i` is `a * (1 - t) + b * t` with
/// `t = (i + 1) / (fade_n + 1)`, so the two ramps always sum to one.
pub fn crossfade_append(acc: &mut Vec<f32>, next: &[f32], fade_n: usize) {
    let fade_n = fade_n.min(acc.len()).min(next.len());
    let start = acc.len() - fade_n;
    let denom = (fade_n + 1) as f32;
    for (i, (a, &b)) in acc[start..].iter_mut().zip(&next[..fade_n]).enumerate() {
        let t = (i + 1) as f32 / denom;
        *a = *a * (1.0 - t) + b * t;
    }
    acc.extend_from_slice(&next[fade_n..]);
}

/// Cross-fade concatenate two buffers of the same rate.
///
/// The result has `len(a) + len(b) - fade_n` samples where
/// `fade_n = min(round(fade_ms * sr / 1000), len(a), len(b))`.
pub fn crossfade_concat(a: &PcmBuffer, b: &PcmBuffer, fade_ms: f64) -> Result<PcmBuffer> {
    if a.sample_rate_hz() != b.sample_rate_hz() {
        return Err(Error::RateMismatch {
            left: a.sample_rate_hz(),
            right: b.sample_rate_hz(),
        });
    }
    if !(fade_ms.is_finite() && fade_ms >= 0.0) {
        return Err(Error::InvalidArgument(format!("fade_ms must be >= 0, got {fade_ms}")));
    }
    let fade_n = fade_len(fade_ms, a.sample_rate_hz(), a.len(), b.len());
    let mut out = Vec::with_capacity(a.len() + b.len() - fade_n);
    out.extend_from_slice(a.samples());
    crossfade_append(&mut out, b.samples(), fade_n);
    Ok(PcmBuffer::from_parts(out, a.sample_rate_hz()))
}
