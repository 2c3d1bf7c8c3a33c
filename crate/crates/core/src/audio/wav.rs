//! RIFF/WAVE reader and writer for 16- and 24-bit linear PCM.

use std::fs;
use std::path::Path;

use chrono::DateTime;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Pcm24,
}

impl BitDepth {
    fn bytes(self) -> usize {
        match self {
            BitDepth::Pcm16 => 2,
            BitDepth::Pcm24 => 3,
        }
    }

    fn full_scale(self) -> f64 {
        match self {
            BitDepth::Pcm16 => 32768.0,
            BitDepth::Pcm24 => 8_388_608.0,
        }
    }
}

/// Reads a WAV file. The source id is the file stem.
pub fn decode_audio(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_wav_bytes(&bytes, id)
}

struct Format {
    channels: usize,
    sample_rate: u32,
    depth: BitDepth,
    block_align: usize,
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16, AudioError> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| truncated(at, "expected 2-byte field"))
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, AudioError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| truncated(at, "expected 4-byte field"))
}

fn truncated(offset: usize, detail: &str) -> AudioError {
    AudioError::Truncated {
        offset: offset as u64,
        detail: detail.to_string(),
    }
}

fn parse_fmt(bytes: &[u8], at: usize, len: usize) -> Result<Format, AudioError> {
    if len < 16 {
        return Err(AudioError::UnsupportedFormat(format!("fmt chunk of {len} bytes")));
    }
    let mut tag = read_u16(bytes, at)?;
    let channels = read_u16(bytes, at + 2)? as usize;
    let sample_rate = read_u32(bytes, at + 4)?;
    let block_align = read_u16(bytes, at + 12)? as usize;
    let bits = read_u16(bytes, at + 14)?;
    if tag == FORMAT_EXTENSIBLE {
        if len < 40 {
            return Err(AudioError::UnsupportedFormat("short WAVE_FORMAT_EXTENSIBLE header".into()));
        }
        // First two bytes of the sub-format GUID carry the codec tag.
        tag = read_u16(bytes, at + 24)?;
    }
    if tag != FORMAT_PCM {
        return Err(AudioError::UnsupportedFormat(format!("codec tag {tag:#06x}")));
    }
    let depth = match bits {
        16 => BitDepth::Pcm16,
        24 => BitDepth::Pcm24,
        other => return Err(AudioError::UnsupportedFormat(format!("{other}-bit PCM"))),
    };
    if channels == 0 || sample_rate == 0 {
        return Err(AudioError::UnsupportedFormat("zero channels or sample rate".into()));
    }
    if block_align != channels * depth.bytes() {
        return Err(AudioError::UnsupportedFormat(format!("block align {block_align}")));
    }
    Ok(Format {
        channels,
        sample_rate,
        depth,
        block_align,
    })
}

/// Decodes an in-memory WAV image.
pub fn decode_wav_bytes(bytes: &[u8], source_id: impl Into<String>) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(truncated(bytes.len(), "missing RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::UnsupportedFormat("not a RIFF/WAVE container".into()));
    }
    let mut pos = 12;
    let mut format = None;
    loop {
        if pos + 8 > bytes.len() {
            return Err(truncated(pos, "missing data chunk"));
        }
        let id = &bytes[pos..pos + 4];
        let len = read_u32(bytes, pos + 4)? as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if body + len > bytes.len() {
                    return Err(truncated(bytes.len(), "fmt chunk runs past end of file"));
                }
                format = Some(parse_fmt(bytes, body, len)?);
            }
            b"data" => {
                let fmt = format
                    .ok_or_else(|| AudioError::UnsupportedFormat("data chunk before fmt chunk".into()))?;
                return decode_payload(bytes, body, len, &fmt, source_id.into());
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + len + (len & 1);
    }
}

fn decode_payload(
    bytes: &[u8],
    body: usize,
    len: usize,
    fmt: &Format,
    source_id: String,
) -> Result<AudioClip, AudioError> {
    if len == 0 {
        return Err(truncated(body, "empty data chunk"));
    }
    let available = bytes.len().saturating_sub(body);
    if len > available {
        return Err(truncated(bytes.len(), &format!("data chunk declares {len} bytes, {available} present")));
    }
    if !len.is_multiple_of(fmt.block_align) {
        let end = body + len - len % fmt.block_align;
        return Err(truncated(end, "partial sample frame"));
    }
    let frames = len / fmt.block_align;
    let width = fmt.depth.bytes();
    let scale = fmt.depth.full_scale();
    let mut channels = vec![Vec::with_capacity(frames); fmt.channels];
    for frame in bytes[body..body + len].chunks_exact(fmt.block_align) {
        for (ch, raw) in channels.iter_mut().zip(frame.chunks_exact(width)) {
            let v = match fmt.depth {
                BitDepth::Pcm16 => i16::from_le_bytes([raw[0], raw[1]]) as i32,
                // sign-extend by placing the 3 bytes in the top of an i32
                BitDepth::Pcm24 => i32::from_le_bytes([0, raw[0], raw[1], raw[2]]) >> 8,
            };
            ch.push(v as f64 / scale);
        }
    }
    AudioClip::new(channels, fmt.sample_rate, DateTime::UNIX_EPOCH, source_id)
}

/// Encodes a clip as a canonical 44-byte-header PCM WAV image.
///
/// Samples are rounded to the nearest integer step and clamped to the
/// representable range.
pub fn encode_wav_bytes(clip: &AudioClip, depth: BitDepth) -> Vec<u8> {
    let n_ch = clip.n_channels();
    let width = depth.bytes();
    let data_len = clip.len() * n_ch * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * (n_ch * width) as u32).to_le_bytes());
    out.extend_from_slice(&((n_ch * width) as u16).to_le_bytes());
    out.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    let scale = depth.full_scale();
    let (lo, hi) = (-scale, scale - 1.0);
    for i in 0..clip.len() {
        for ch in clip.channels() {
            let v = (ch[i] * scale).round().clamp(lo, hi) as i32;
            match depth {
                BitDepth::Pcm16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
                BitDepth::Pcm24 => out.extend_from_slice(&v.to_le_bytes()[..3]),
            }
        }
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, encode_wav_bytes(clip, depth)).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}
