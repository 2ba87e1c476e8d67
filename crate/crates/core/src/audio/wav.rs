use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::PcmBuffer;
use crate::error::{Error, Result};

/// Map a float sample to PCM16: `clamp(round(s * 32767), -32768, 32767)`,
/// rounding half away from zero.
pub fn quantize(sample: f32) -> i16 {
    let scaled = (sample as f64 * 32767.0).round();
    scaled.clamp(-32768.0, 32767.0) as i16
}

fn dequantize(value: i16) -> f32 {
    value as f32 / 32768.0
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::MalformedWav(e.to_string()),
        hound::Error::Unsupported => Error::UnsupportedWav("unsupported format".into()),
        hound::Error::TooWide => Error::UnsupportedWav("sample too wide".into()),
        hound::Error::InvalidSampleFormat => Error::UnsupportedWav("invalid sample format".into()),
        other => Error::MalformedWav(other.to_string()),
    }
}

fn decode<R: Read>(reader: hound::WavReader<R>) -> Result<PcmBuffer> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::MalformedWav("zero channels".into()));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(dequantize))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (format, bits) => {
            return Err(Error::UnsupportedWav(format!(
                "{bits}-bit {}",
                match format {
                    SampleFormat::Int => "integer PCM",
                    SampleFormat::Float => "float",
                }
            )))
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::MalformedWav("data chunk ends mid-frame".into()));
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    PcmBuffer::new(samples, spec.sample_rate).map_err(|e| Error::MalformedWav(e.to_string()))
}

/// Read a PCM16 or float32 RIFF/WAVE file, downmixing to mono by averaging
/// the channels of each frame.
pub fn read_wav(path: impl AsRef<Path>) -> Result<PcmBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(map_hound)?;
    decode(reader)
}

/// Decode an in-memory WAV file.
pub fn decode_wav(bytes: &[u8]) -> Result<PcmBuffer> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    decode(reader)
}

fn encode_into<W: Write + Seek>(buf: &PcmBuffer, sink: W) -> std::result::Result<(), hound::Error> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::new(sink, spec)?;
    {
        let mut w = writer.get_i16_writer(buf.len() as u32);
        for &s in buf.samples() {
            w.write_sample(quantize(s));
        }
        w.flush()?;
    }
    writer.finalize()
}

/// Encode as mono PCM16 little-endian WAV bytes.
pub fn encode_wav(buf: &PcmBuffer) -> Vec<u8> {
    let mut cursor = Cursor::new(Vec::with_capacity(44 + buf.len() * 2));
    encode_into(buf, &mut cursor).expect("writing to memory cannot fail");
    cursor.into_inner()
}

/// Write mono PCM16 WAV to `path`.
pub fn write_wav(buf: &PcmBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_into(buf, BufWriter::new(file)).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => map_hound(other),
    })
}
