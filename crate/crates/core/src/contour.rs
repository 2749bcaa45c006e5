//! Sentence-type conditioned F0 contours, harmonic tone rendering, and a
//! toy-grammar synthetic corpus with matching audio.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{write_manifest, SentenceType, Utterance};
use crate::pitch::{PitchError, PitchTrack};
use crate::signal::{write_audio, AudioBuffer, SignalError, SpectralConfig};

/// Fraction of the post-onset region over which the boundary ramp climbs;
/// the remainder holds at the full rise ratio.
pub const RAMP_SPAN: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ContourError {
    #[error("invalid contour spec: {0}")]
    Spec(String),
    #[error("invalid tone config: {0}")]
    Tone(String),
    #[error("n_per_class must be positive")]
    EmptyDataset,
    #[error(transparent)]
    Pitch(#[from] PitchError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub base_f0: f64,
    /// Hz per second; negative for the usual downward drift.
    pub declination: f64,
    /// Seconds.
    pub duration: f64,
    pub rise_onset_fraction: f64,
    pub rise_ratio: f64,
    /// Standard deviation (Hz) of per-frame Gaussian jitter.
    pub jitter_std: f64,
    pub jitter_seed: u64,
    pub hop_seconds: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        let spectral = SpectralConfig::default();
        Self {
            base_f0: 200.0,
            declination: 0.0,
            duration: 1.0,
            rise_onset_fraction: 0.8,
            rise_ratio: 1.3,
            jitter_std: 0.0,
            jitter_seed: 0,
            hop_seconds: spectral.hop_seconds(22050),
        }
    }
}

impl ContourSpec {
    pub fn validate(&self) -> Result<(), ContourError> {
        let fail = |m: String| Err(ContourError::Spec(m));
        if !(self.base_f0 > 0.0) {
            return fail(format!("base_f0 {} must be positive", self.base_f0));
        }
        if !(self.duration > 0.0) || !(self.hop_seconds > 0.0) {
            return fail("duration and hop must be positive".into());
        }
        if !(self.rise_onset_fraction > 0.0 && self.rise_onset_fraction < 1.0) {
            return fail(format!(
                "rise onset {} outside (0, 1)",
                self.rise_onset_fraction
            ));
        }
        if !(self.rise_ratio >= 1.0) {
            return fail(format!("rise ratio {} below 1", self.rise_ratio));
        }
        if !(self.jitter_std >= 0.0) {
            return fail("jitter must be non-negative".into());
        }
        if self.base_f0 + self.declination * self.duration <= 0.0 {
            return fail("declination drives f0 to zero".into());
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        ((self.duration / self.hop_seconds).round() as usize).max(1)
    }
}

/// Multiplier applied to frame `i` of `n` for a rising boundary.
fn rise_multiplier(i: usize, n: usize, spec: &ContourSpec) -> f64 {
    let onset = (spec.rise_onset_fraction * n as f64).ceil() as usize;
    if i < onset {
        return 1.0;
    }
    let region = n - onset;
    let ramp = ((region as f64 * RAMP_SPAN).ceil() as usize).max(1);
    let progress = ((i - onset + 1) as f64 / ramp as f64).min(1.0);
    1.0 + (spec.rise_ratio - 1.0) * progress
}

/// Renders a fully voiced contour: a declination line, multiplied by a
/// boundary ramp from 1 to `rise_ratio` after the onset for declarative
/// questions. Statements and normal questions share the non-rising shape.
pub fn render_contour(spec: &ContourSpec, t: SentenceType) -> Result<PitchTrack, ContourError> {
    spec.validate()?;
    let n = spec.frames();
    let rising = t == SentenceType::DeclarativeQuestion;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.jitter_seed);
    let noise = Normal::new(0.0, spec.jitter_std).map_err(|e| ContourError::Spec(e.to_string()))?;
    let f0 = (0..n)
        .map(|i| {
            let line = spec.base_f0 + spec.declination * i as f64 * spec.hop_seconds;
            let f = if rising {
                line * rise_multiplier(i, n, spec)
            } else {
                line
            };
            let jitter = if spec.jitter_std > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            (f + jitter).max(1.0)
        })
        .collect();
    Ok(PitchTrack::from_f0(spec.hop_seconds, f0)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneConfig {
    pub sample_rate: u32,
    pub harmonics: usize,
    /// Analysis frame the track is centered on; frame `i` sits at sample
    /// `i * hop + frame_length / 2`.
    pub frame_length: usize,
    /// Output peak scale.
    pub amplitude: f64,
}

impl Default for ToneConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            harmonics: 6,
            frame_length: SpectralConfig::default().frame_length,
            amplitude: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tone {
    pub audio: AudioBuffer,
    /// (voiced frame, harmonic) pairs skipped for exceeding Nyquist.
    pub dropped_harmonics: usize,
}

/// Phase-continuous harmonic tone (harmonic `k` at amplitude `1/k`) whose
/// fundamental follows the track, linearly interpolated between frame
/// centers. Samples nearest an unvoiced frame are silent. The output has
/// `(frames - 1) * hop + frame_length` samples so that analysis on the same
/// grid yields the same frame count.
pub fn tone_from_contour(track: &PitchTrack, cfg: &ToneConfig) -> Result<Tone, ContourError> {
    if track.is_empty() {
        return Err(ContourError::Tone("empty track".into()));
    }
    if cfg.sample_rate == 0 || cfg.harmonics == 0 || cfg.frame_length == 0 {
        return Err(ContourError::Tone(
            "sample rate, harmonics and frame length must be positive".into(),
        ));
    }
    let sr = cfg.sample_rate as f64;
    let hop = (track.hop_seconds * sr).round() as usize;
    if hop == 0 {
        return Err(ContourError::Tone("hop rounds to zero samples".into()));
    }
    let nyquist = sr / 2.0;
    let dropped_harmonics = track
        .f0
        .iter()
        .filter(|&&f| f > 0.0)
        .map(|&f| {
            (1..=cfg.harmonics)
                .filter(|&k| k as f64 * f >= nyquist)
                .count()
        })
        .sum();
    if dropped_harmonics > 0 {
        log::warn!("dropped {dropped_harmonics} harmonic/frame pairs above Nyquist");
    }

    let n_frames = track.len();
    let n_samples = (n_frames - 1) * hop + cfg.frame_length;
    let center = cfg.frame_length as f64 / 2.0;
    let norm: f64 = (1..=cfg.harmonics).map(|k| 1.0 / k as f64).sum();
    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let pos = ((n as f64 - center) / hop as f64).clamp(0.0, (n_frames - 1) as f64);
        let nearest = pos.round() as usize;
        if !track.voiced[nearest] {
            samples.push(0.0);
            continue;
        }
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n_frames - 1);
        let frac = pos - lo as f64;
        let f0 = if track.voiced[lo] && track.voiced[hi] {
            track.f0[lo] * (1.0 - frac) + track.f0[hi] * frac
        } else {
            track.f0[nearest]
        };
        phase = (phase + 2.0 * PI * f0 / sr) % (2.0 * PI);
        let value: f64 = (1..=cfg.harmonics)
            .take_while(|&k| k as f64 * f0 < nyquist)
            .map(|k| (k as f64 * phase).sin() / k as f64)
            .sum();
        samples.push(cfg.amplitude * value / norm);
    }
    Ok(Tone {
        audio: AudioBuffer::new(samples, cfg.sample_rate)?,
        dropped_harmonics,
    })
}

const SUBJECTS: &[&str] = &[
    "他", "她", "我", "你", "我们", "他们", "老师", "妈妈", "小明", "同学",
];
const TIMES: &[&str] = &["", "", "今天", "明天", "昨天", "现在"];
const VERBS: &[&str] = &["去", "看", "买", "吃", "喝", "写", "读", "找", "等", "学"];
const OBJECTS: &[&str] = &[
    "学校", "电影", "书", "水果", "报纸", "公园", "朋友", "晚饭", "咖啡", "医院",
];

/// Sentence triple from one skeleton: statement, normal question and
/// declarative question, e.g. 他去学校。/ 他去不去学校？/ 他去学校？
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceTriple {
    pub statement: String,
    pub normal_question: String,
    pub declarative_question: String,
}

impl SentenceTriple {
    pub fn get(&self, t: SentenceType) -> &str {
        match t {
            SentenceType::Statement => &self.statement,
            SentenceType::NormalQuestion => &self.normal_question,
            SentenceType::DeclarativeQuestion => &self.declarative_question,
        }
    }
}

pub fn sample_triple(rng: &mut ChaCha8Rng) -> SentenceTriple {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&'static str]| *xs.choose(rng).expect("nonempty");
    let time = pick(rng, TIMES);
    let subject = pick(rng, SUBJECTS);
    let verb = pick(rng, VERBS);
    let object = pick(rng, OBJECTS);
    let core = format!("{time}{subject}{verb}{object}");
    let normal_question = if rng.gen_bool(0.5) {
        format!("{time}{subject}{verb}不{verb}{object}？")
    } else {
        format!("{core}吗？")
    };
    SentenceTriple {
        statement: format!("{core}。"),
        normal_question,
        declarative_question: format!("{core}？"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_per_class: usize,
    pub seed: u64,
    pub jitter_std: f64,
    pub rise_onset_fraction: f64,
    pub rise_ratio: f64,
    /// Render every utterance without a boundary rise.
    pub flat: bool,
    pub tone: ToneConfig,
    pub hop_length: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let spectral = SpectralConfig::default();
        Self {
            n_per_class: 10,
            seed: 0,
            jitter_std: 0.0,
            rise_onset_fraction: 0.8,
            rise_ratio: 1.3,
            flat: false,
            tone: ToneConfig::default(),
            hop_length: spectral.hop_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub utterance: Utterance,
    pub contour: ContourSpec,
    pub track: PitchTrack,
    pub audio: AudioBuffer,
}

/// Utterance duration from text: 0.15 s per non-punctuation character,
/// clamped to [0.8, 2.0] s.
pub fn duration_for_text(text: &str) -> f64 {
    let chars = text
        .chars()
        .filter(|c| !crate::corpus::END_PUNCTUATION.contains(c))
        .count();
    (0.15 * chars as f64).clamp(0.8, 2.0)
}

/// Contour parameters drawn per skeleton: base 170-250 Hz, declination
/// -15..-5 Hz/s.
fn contour_for(
    text: &str,
    rng: &mut ChaCha8Rng,
    cfg: &SyntheticConfig,
    jitter_seed: u64,
) -> ContourSpec {
    ContourSpec {
        base_f0: rng.gen_range(170.0..250.0),
        declination: rng.gen_range(-15.0..-5.0),
        duration: duration_for_text(text),
        rise_onset_fraction: cfg.rise_onset_fraction,
        rise_ratio: cfg.rise_ratio,
        jitter_std: cfg.jitter_std,
        jitter_seed,
        hop_seconds: cfg.hop_length as f64 / cfg.tone.sample_rate as f64,
    }
}

/// `n_per_class` skeletons, each emitted once per sentence type, so the
/// i-th statement and declarative question differ only in the final mark.
/// Ids are `syn{index:04}-{label}`; audio paths are `wav/<id>.wav`.
pub fn make_synthetic_dataset(
    cfg: &SyntheticConfig,
) -> Result<Vec<SyntheticUtterance>, ContourError> {
    if cfg.n_per_class == 0 {
        return Err(ContourError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(3 * cfg.n_per_class);
    for index in 0..cfg.n_per_class {
        let triple = sample_triple(&mut rng);
        let spec_rng_seed: u64 = rng.gen();
        for class in SentenceType::ALL {
            let text = triple.get(class);
            // Same prosodic skeleton for all three renditions.
            let mut spec_rng = ChaCha8Rng::seed_from_u64(spec_rng_seed);
            let jitter_seed = spec_rng_seed.wrapping_add(class.code() as u64 + 1);
            let contour = contour_for(text, &mut spec_rng, cfg, jitter_seed);
            let render_as = if cfg.flat {
                SentenceType::Statement
            } else {
                class
            };
            let track = render_contour(&contour, render_as)?;
            let audio = tone_from_contour(&track, &cfg.tone)?.audio;
            let id = format!("syn{index:04}-{}", class.label());
            let utterance = Utterance {
                audio_path: Some(PathBuf::from(format!("wav/{id}.wav"))),
                ..Utterance::new(id, text, class)
            };
            out.push(SyntheticUtterance {
                utterance,
                contour,
                track,
                audio,
            });
        }
    }
    Ok(out)
}

/// Writes `manifest.tsv`, `wav/<id>.wav` and `contours/<id>.csv` under `dir`.
pub fn write_synthetic_corpus(
    dir: &Path,
    items: &[SyntheticUtterance],
) -> Result<(), ContourError> {
    fs::create_dir_all(dir.join("wav"))?;
    fs::create_dir_all(dir.join("contours"))?;
    for item in items {
        let id = &item.utterance.id;
        write_audio(&dir.join("wav").join(format!("{id}.wav")), &item.audio)?;
        item.track
            .write_csv(&dir.join("contours").join(format!("{id}.csv")))?;
    }
    let utts: Vec<Utterance> = items.iter().map(|i| i.utterance.clone()).collect();
    write_manifest(&dir.join("manifest.tsv"), &utts)?;
    Ok(())
}
