//! YIN-style F0 and voicing estimation on the spectral front-end's frame grid.
//!
//! Frame `i` covers samples `[i * hop, i * hop + frame_length)`, the same
//! window the mel front-end uses, so pitch rows line up with cepstra rows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{frame_count, AudioBuffer, SpectralConfig};

#[derive(Debug, Error)]
pub enum PitchError {
    #[error("audio has {samples} samples, shorter than two periods ({needed}) at {fmin} Hz")]
    TooShort {
        samples: usize,
        needed: usize,
        fmin: f64,
    },
    #[error("invalid pitch config: {0}")]
    Config(String),
    #[error("invalid pitch track: {0}")]
    InvalidTrack(String),
    #[error("pitch CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub fmin: f64,
    pub fmax: f64,
    /// Voicing threshold on the cumulative-mean-normalized difference.
    pub threshold: f64,
    pub frame_length: usize,
    pub hop_length: usize,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self::for_spectral(&SpectralConfig::default())
    }
}

impl PitchConfig {
    /// Default search range and threshold on the given front-end's frame grid.
    pub fn for_spectral(cfg: &SpectralConfig) -> Self {
        Self {
            fmin: 60.0,
            fmax: 500.0,
            threshold: 0.15,
            frame_length: cfg.frame_length,
            hop_length: cfg.hop_length,
        }
    }

    fn lags(&self, sample_rate: u32) -> Result<(usize, usize, usize), PitchError> {
        let sr = sample_rate as f64;
        if !(self.fmin > 0.0 && self.fmin < self.fmax && self.fmax < sr / 2.0) {
            return Err(PitchError::Config(format!(
                "need 0 < fmin ({}) < fmax ({}) < {}",
                self.fmin,
                self.fmax,
                sr / 2.0
            )));
        }
        if !(self.threshold > 0.0) || self.hop_length == 0 {
            return Err(PitchError::Config(
                "threshold and hop_length must be positive".into(),
            ));
        }
        let min_lag = ((sr / self.fmax).floor() as usize).max(2);
        let max_lag = (sr / self.fmin).ceil() as usize;
        // One extra lag is needed for interpolation around max_lag.
        if self.frame_length <= max_lag + 2 {
            return Err(PitchError::Config(format!(
                "frame_length {} too short for lags up to {max_lag}",
                self.frame_length
            )));
        }
        let window = self.frame_length - max_lag - 1;
        Ok((min_lag, max_lag, window))
    }
}

/// Per-frame F0 in Hz (0 where unvoiced) and voicing flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub hop_seconds: f64,
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl PitchTrack {
    pub fn new(hop_seconds: f64, f0: Vec<f64>, voiced: Vec<bool>) -> Result<Self, PitchError> {
        if !(hop_seconds > 0.0) {
            return Err(PitchError::InvalidTrack("hop must be positive".into()));
        }
        if f0.len() != voiced.len() {
            return Err(PitchError::InvalidTrack(format!(
                "{} f0 values but {} voicing flags",
                f0.len(),
                voiced.len()
            )));
        }
        for (i, (&f, &v)) in f0.iter().zip(&voiced).enumerate() {
            if !f.is_finite() || (f > 0.0) != v || f < 0.0 {
                return Err(PitchError::InvalidTrack(format!(
                    "frame {i}: f0 {f} inconsistent with voiced={v}"
                )));
            }
        }
        Ok(Self {
            hop_seconds,
            f0,
            voiced,
        })
    }

    /// Builds a track from f0 values, treating non-positive values as unvoiced.
    pub fn from_f0(hop_seconds: f64, f0: Vec<f64>) -> Result<Self, PitchError> {
        let f0: Vec<f64> = f0
            .into_iter()
            .map(|f| if f > 0.0 { f } else { 0.0 })
            .collect();
        let voiced = f0.iter().map(|&f| f > 0.0).collect();
        Self::new(hop_seconds, f0, voiced)
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    /// `frame,time_s,f0_hz,voiced` with voicing as 0/1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,time_s,f0_hz,voiced\n");
        for (i, (f, v)) in self.f0.iter().zip(&self.voiced).enumerate() {
            let _ = writeln!(
                out,
                "{i},{:.6},{:.4},{}",
                i as f64 * self.hop_seconds,
                f,
                u8::from(*v)
            );
        }
        out
    }

    /// Parses [`PitchTrack::to_csv`] output. The hop is taken from the time
    /// column; `fallback_hop` is used for tracks with fewer than two rows.
    pub fn from_csv(text: &str, fallback_hop: f64) -> Result<Self, PitchError> {
        let mut f0 = Vec::new();
        let mut voiced = Vec::new();
        let mut times = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| PitchError::Csv {
                line: idx + 1,
                message,
            };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cols.len())));
            }
            let t: f64 = cols[1].parse().map_err(|e| bad(format!("time: {e}")))?;
            let f: f64 = cols[2].parse().map_err(|e| bad(format!("f0: {e}")))?;
            let v = match cols[3] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(bad(format!("voiced flag {other:?}"))),
            };
            times.push(t);
            f0.push(f);
            voiced.push(v);
        }
        let hop = if times.len() >= 2 {
            (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
        } else {
            fallback_hop
        };
        Self::new(hop, f0, voiced)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), PitchError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Difference function `d(tau)` for `tau` in `0..=max_lag + 1` over a frame,
/// with an integration window of `window` samples. Uses FFT correlation.
fn difference_function(
    frame: &[f64],
    window: usize,
    max_lag: usize,
    fft: &Arc<dyn Fft<f64>>,
    ifft: &Arc<dyn Fft<f64>>,
) -> Vec<f64> {
    let n = fft.len();
    let mut head: Vec<Complex<f64>> = (0..n)
        .map(|i| Complex::new(if i < window { frame[i] } else { 0.0 }, 0.0))
        .collect();
    let mut full: Vec<Complex<f64>> = (0..n)
        .map(|i| Complex::new(frame.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    fft.process(&mut head);
    fft.process(&mut full);
    let mut prod: Vec<Complex<f64>> = head.iter().zip(&full).map(|(a, b)| a.conj() * b).collect();
    ifft.process(&mut prod);

    let mut prefix = vec![0.0; frame.len() + 1];
    for (i, x) in frame.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x * x;
    }
    let e0 = prefix[window];
    (0..=max_lag + 1)
        .map(|tau| {
            let shifted = prefix[tau + window] - prefix[tau];
            let corr = prod[tau].re / n as f64;
            (e0 + shifted - 2.0 * corr).max(0.0)
        })
        .collect()
}

/// Cumulative-mean-normalized difference; `d'(0) = 1`, and 1 wherever the
/// running sum is zero.
fn normalized_difference(diff: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0; diff.len()];
    let mut running = 0.0;
    for tau in 1..diff.len() {
        running += diff[tau];
        out[tau] = if running > 0.0 {
            diff[tau] * tau as f64 / running
        } else {
            1.0
        };
    }
    out
}

fn estimate_frame(
    diff: &[f64],
    min_lag: usize,
    max_lag: usize,
    threshold: f64,
    sample_rate: f64,
) -> Option<f64> {
    let cmnd = normalized_difference(diff);
    let mut tau = (min_lag..=max_lag).find(|&t| cmnd[t] < threshold)?;
    while tau < max_lag && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }
    let (a, b, c) = (diff[tau - 1], diff[tau], diff[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom > 0.0 {
        (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Some(sample_rate / (tau as f64 + shift))
}

/// Estimates F0 per frame. Frames whose best lag falls outside the search
/// range are reported unvoiced. Signals shorter than one frame (but at least
/// two periods at `fmin`) are zero-padded to a single frame.
pub fn extract_f0(audio: &AudioBuffer, cfg: &PitchConfig) -> Result<PitchTrack, PitchError> {
    let sr = audio.sample_rate as f64;
    let (min_lag, max_lag, window) = cfg.lags(audio.sample_rate)?;
    let needed = (2.0 * sr / cfg.fmin).ceil() as usize;
    if audio.samples.len() < needed {
        return Err(PitchError::TooShort {
            samples: audio.samples.len(),
            needed,
            fmin: cfg.fmin,
        });
    }
    let padded;
    let samples: &[f64] = if audio.samples.len() < cfg.frame_length {
        let mut v = audio.samples.clone();
        v.resize(cfg.frame_length, 0.0);
        padded = v;
        &padded
    } else {
        &audio.samples
    };
    let n_frames = frame_count(samples.len(), cfg.frame_length, cfg.hop_length);
    let n_fft = cfg.frame_length.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let ifft = planner.plan_fft_inverse(n_fft);

    let f0: Vec<f64> = (0..n_frames)
        .into_par_iter()
        .map(|i| {
            let start = i * cfg.hop_length;
            let frame = &samples[start..start + cfg.frame_length];
            let diff = difference_function(frame, window, max_lag, &fft, &ifft);
            match estimate_frame(&diff, min_lag, max_lag, cfg.threshold, sr) {
                Some(f) if f >= cfg.fmin && f <= cfg.fmax => f,
                _ => 0.0,
            }
        })
        .collect();
    PitchTrack::from_f0(cfg.hop_length as f64 / sr, f0)
}
