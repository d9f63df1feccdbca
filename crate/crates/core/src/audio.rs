//! RIFF/WAVE PCM 16-bit helpers.
//!
//! Test clips may carry a `tscr` chunk holding the UTF-8 transcript the mock
//! ASR backend returns, which keeps audio-input tests deterministic.

/// Chunk id of the embedded transcript.
pub const TRANSCRIPT_CHUNK: &[u8; 4] = b"tscr";

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WavError {
    #[error("truncated WAV: {0}")]
    Truncated(&'static str),
    #[error("not a RIFF/WAVE container")]
    NotWave,
    #[error("missing {0} chunk")]
    MissingChunk(&'static str),
    #[error("unsupported format: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wav {
    pub sample_rate: u32,
    pub channels: u16,
    pub samples: Vec<i16>,
    pub transcript: Option<String>,
}

impl Wav {
    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.channels as f64 / self.sample_rate as f64
    }
}

fn push_chunk(out: &mut Vec<u8>, id: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
    if body.len() % 2 == 1 {
        out.push(0);
    }
}

/// Encodes mono PCM 16-bit samples, optionally with a transcript chunk.
pub fn encode_wav(samples: &[i16], sample_rate: u32, transcript: Option<&str>) -> Vec<u8> {
    let mut fmt = Vec::with_capacity(16);
    fmt.extend_from_slice(&1u16.to_le_bytes()); // PCM
    fmt.extend_from_slice(&1u16.to_le_bytes()); // mono
    fmt.extend_from_slice(&sample_rate.to_le_bytes());
    fmt.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    fmt.extend_from_slice(&2u16.to_le_bytes());
    fmt.extend_from_slice(&16u16.to_le_bytes());

    let mut body = Vec::with_capacity(36 + samples.len() * 2);
    body.extend_from_slice(b"WAVE");
    push_chunk(&mut body, b"fmt ", &fmt);
    if let Some(t) = transcript {
        push_chunk(&mut body, TRANSCRIPT_CHUNK, t.as_bytes());
    }
    let data: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
    push_chunk(&mut body, b"data", &data);

    let mut out = Vec::with_capacity(8 + body.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a PCM 16-bit WAV file. Only mono and stereo are accepted here;
/// callers that need mono check `channels`.
pub fn parse_wav(bytes: &[u8]) -> Result<Wav, WavError> {
    if bytes.len() < 12 {
        return Err(WavError::Truncated("RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotWave);
    }
    let riff_len = u32_at(bytes, 4) as usize;
    if riff_len + 8 > bytes.len() {
        return Err(WavError::Truncated("RIFF length exceeds file"));
    }
    let end = riff_len + 8;

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut transcript = None;
    let mut pos = 12;
    while pos + 8 <= end {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(len).filter(|&e| e <= end).ok_or(WavError::Truncated("chunk body"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(WavError::Truncated("fmt chunk"));
                }
                fmt = Some((u16_at(body, 0), u16_at(body, 2), u32_at(body, 4), u16_at(body, 14)));
            }
            b"data" => data = Some(body),
            id if id == TRANSCRIPT_CHUNK => {
                let text = std::str::from_utf8(body)
                    .map_err(|_| WavError::Unsupported("transcript chunk is not UTF-8".into()))?;
                transcript = Some(text.to_string());
            }
            _ => {}
        }
        pos = body_end + (len % 2);
    }
    if pos != end && pos != end + 1 {
        return Err(WavError::Truncated("trailing partial chunk header"));
    }

    let (format, channels, sample_rate, bits) = fmt.ok_or(WavError::MissingChunk("fmt"))?;
    if format != 1 || bits != 16 {
        return Err(WavError::Unsupported(format!("format {format}, {bits} bits; expected PCM 16-bit")));
    }
    if channels == 0 || channels > 2 || sample_rate == 0 {
        return Err(WavError::Unsupported(format!("{channels} channels at {sample_rate} Hz")));
    }
    let data = data.ok_or(WavError::MissingChunk("data"))?;
    if data.len() % (2 * channels as usize) != 0 {
        return Err(WavError::Truncated("partial sample frame"));
    }
    let samples = data.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
    Ok(Wav { sample_rate, channels, samples, transcript })
}

/// Sine tone at half amplitude, `round(duration * rate)` samples long.
pub fn sine_tone(frequency_hz: f64, duration_secs: f64, sample_rate: u32) -> Vec<i16> {
    let n = (duration_secs * sample_rate as f64).round() as usize;
    let amp = 0.5 * i16::MAX as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            (amp * (std::f64::consts::TAU * frequency_hz * t).sin()).round() as i16
        })
        .collect()
}
