//! Audio buffers and the spectral front-end: framing, power spectrum,
//! triangular mel filterbank and mel-cepstra.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor applied to mel energies before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("unsupported WAV format in {path}: {message}")]
    Unsupported { path: PathBuf, message: String },
    #[error("signal has {samples} samples, shorter than one frame of {frame_length}")]
    TooShort { samples: usize, frame_length: usize },
    #[error("invalid spectral config: {0}")]
    Config(String),
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
}

/// Mono audio with samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::InvalidAudio(
                "sample rate must be positive".into(),
            ));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(SignalError::InvalidAudio("non-finite sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a mono 16-bit PCM WAV file, scaling samples by 1/32768.
pub fn load_audio(path: &Path) -> Result<AudioBuffer, SignalError> {
    let read_err = |e: hound::Error| SignalError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::Unsupported | hound::Error::FormatError(_) => SignalError::Unsupported {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        other => read_err(other),
    })?;
    let spec = reader.spec();
    let unsupported = |message: &str| SignalError::Unsupported {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    if spec.channels != 1 {
        return Err(unsupported("mono required"));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(unsupported("16-bit PCM required"));
    }
    let expected = reader.len() as usize;
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(read_err)?;
    if samples.len() != expected {
        return Err(SignalError::Read {
            path: path.to_path_buf(),
            message: format!(
                "truncated: expected {expected} samples, got {}",
                samples.len()
            ),
        });
    }
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1).
pub fn write_audio(path: &Path, audio: &AudioBuffer) -> Result<(), SignalError> {
    let err = |e: hound::Error| SignalError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(err)?;
    for &s in &audio.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(err)?;
    }
    writer.finalize().map_err(err)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub frame_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    pub mel_bands: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub cepstral_order: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            hop_length: 256,
            fft_size: 1024,
            mel_bands: 80,
            fmin: 0.0,
            fmax: 11025.0,
            cepstral_order: 13,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<(), SignalError> {
        let fail = |m: String| Err(SignalError::Config(m));
        if self.hop_length == 0 || self.hop_length > self.frame_length {
            return fail(format!(
                "need 0 < hop_length ({}) <= frame_length ({})",
                self.hop_length, self.frame_length
            ));
        }
        if self.frame_length > self.fft_size {
            return fail(format!(
                "frame_length ({}) exceeds fft_size ({})",
                self.frame_length, self.fft_size
            ));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return fail(format!(
                "need 0 <= fmin ({}) < fmax ({}) <= {nyquist}",
                self.fmin, self.fmax
            ));
        }
        if self.mel_bands == 0 || self.cepstral_order == 0 || self.cepstral_order > self.mel_bands {
            return fail(format!(
                "need 0 < cepstral_order ({}) <= mel_bands ({})",
                self.cepstral_order, self.mel_bands
            ));
        }
        Ok(())
    }

    pub fn hop_seconds(&self, sample_rate: u32) -> f64 {
        self.hop_length as f64 / sample_rate as f64
    }
}

/// `floor((n - frame) / hop) + 1` for `n >= frame`, otherwise 0.
pub fn frame_count(n_samples: usize, frame_length: usize, hop_length: usize) -> usize {
    if n_samples < frame_length || hop_length == 0 {
        0
    } else {
        (n_samples - frame_length) / hop_length + 1
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of the `bands` triangular filters, equally spaced
/// on the mel scale between `fmin` and `fmax`.
pub fn mel_band_centers(bands: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    mel_edges(bands, fmin, fmax)[1..=bands].to_vec()
}

fn mel_edges(bands: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let lo = hz_to_mel(fmin);
    let hi = hz_to_mel(fmax);
    (0..bands + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
        .collect()
}

/// Triangular filterbank, `bands x (fft_size/2 + 1)`, unit peak height.
pub fn mel_filterbank(cfg: &SpectralConfig, sample_rate: u32) -> Array2<f64> {
    let n_bins = cfg.fft_size / 2 + 1;
    let edges = mel_edges(cfg.mel_bands, cfg.fmin, cfg.fmax);
    let bin_hz = sample_rate as f64 / cfg.fft_size as f64;
    Array2::from_shape_fn((cfg.mel_bands, n_bins), |(m, k)| {
        let f = k as f64 * bin_hz;
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        if f <= left || f >= right {
            0.0
        } else if f <= center {
            (f - left) / (center - left)
        } else {
            (right - f) / (right - center)
        }
    })
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Log-mel spectrogram, `frames x mel_bands`. Frames start at multiples of
/// the hop with no padding.
pub fn mel_spectrogram(
    audio: &AudioBuffer,
    cfg: &SpectralConfig,
) -> Result<Array2<f64>, SignalError> {
    cfg.validate(audio.sample_rate)?;
    let n_frames = frame_count(audio.samples.len(), cfg.frame_length, cfg.hop_length);
    if n_frames == 0 {
        return Err(SignalError::TooShort {
            samples: audio.samples.len(),
            frame_length: cfg.frame_length,
        });
    }
    let window = hann_window(cfg.frame_length);
    let bank = mel_filterbank(cfg, audio.sample_rate);
    let n_bins = cfg.fft_size / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut power = vec![0.0; n_bins];
    let mut out = Array2::zeros((n_frames, cfg.mel_bands));
    for frame in 0..n_frames {
        let start = frame * cfg.hop_length;
        let chunk = &audio.samples[start..start + cfg.frame_length];
        for (slot, (x, w)) in buf.iter_mut().zip(chunk.iter().zip(&window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        for slot in buf[cfg.frame_length..].iter_mut() {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (m, row) in bank.outer_iter().enumerate() {
            let energy: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            out[[frame, m]] = energy.max(LOG_FLOOR).ln();
        }
    }
    Ok(out)
}

/// Mel-cepstra: coefficients `c_1..c_K` per frame, with `c_0` kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct MelCepstra {
    /// `frames x K`
    pub coeffs: Array2<f64>,
    pub c0: Vec<f64>,
}

impl MelCepstra {
    pub fn frames(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn order(&self) -> usize {
        self.coeffs.ncols()
    }
}

pub fn mel_cepstra(
    melspec: &Array2<f64>,
    cepstral_order: usize,
) -> Result<MelCepstra, SignalError> {
    let bands = melspec.ncols();
    if cepstral_order == 0 || cepstral_order > bands {
        return Err(SignalError::Config(format!(
            "cepstral order {cepstral_order} must be in 1..={bands}"
        )));
    }
    // Precomputed orthonormal DCT-II basis for rows 0..=K.
    let basis = Array2::from_shape_fn((cepstral_order + 1, bands), |(k, i)| {
        let scale = if k == 0 {
            (1.0 / bands as f64).sqrt()
        } else {
            (2.0 / bands as f64).sqrt()
        };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * bands) as f64).cos()
    });
    let all = melspec.dot(&basis.t());
    Ok(MelCepstra {
        coeffs: all.slice(ndarray::s![.., 1..]).to_owned(),
        c0: all.column(0).to_vec(),
    })
}

/// Writes a matrix as little-endian f64 in row-major order to `<prefix>.bin`
/// with a JSON sidecar `<prefix>.json` holding shape and dtype.
pub fn dump_matrix(prefix: &Path, m: &Array2<f64>) -> Result<(), SignalError> {
    let bin = prefix.with_extension("bin");
    let json = prefix.with_extension("json");
    let mut bytes = Vec::with_capacity(m.len() * 8);
    for v in m.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let sidecar = serde_json::json!({
        "shape": [m.nrows(), m.ncols()],
        "dtype": "<f8",
        "order": "C",
    });
    let werr = |path: &Path, e: std::io::Error| SignalError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    fs::write(&bin, bytes).map_err(|e| werr(&bin, e))?;
    fs::write(&json, format!("{sidecar}\n")).map_err(|e| werr(&json, e))?;
    Ok(())
}

/// Reads a matrix written by [`dump_matrix`].
pub fn load_matrix(prefix: &Path) -> Result<Array2<f64>, SignalError> {
    let bin = prefix.with_extension("bin");
    let json = prefix.with_extension("json");
    let rerr = |path: &Path, message: String| SignalError::Read {
        path: path.to_path_buf(),
        message,
    };
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).map_err(|e| rerr(&json, e.to_string()))?)
            .map_err(|e| rerr(&json, e.to_string()))?;
    let shape: Vec<usize> =
        serde_json::from_value(meta["shape"].clone()).map_err(|e| rerr(&json, e.to_string()))?;
    let bytes = fs::read(&bin).map_err(|e| rerr(&bin, e.to_string()))?;
    if shape.len() != 2 || bytes.len() != shape[0] * shape[1] * 8 {
        return Err(rerr(&bin, "size does not match sidecar shape".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Array2::from_shape_vec((shape[0], shape[1]), data).map_err(|e| rerr(&bin, e.to_string()))
}
