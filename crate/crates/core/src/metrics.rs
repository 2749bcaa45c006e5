//! Intonation metrics: F0 frame error and its voicing/gross-pitch parts,
//! boundary-rise detection, perception accuracy, and the full
//! reference-vs-hypothesis evaluation pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{dtw, map_frames, AlignError};
use crate::corpus::SentenceType;
use crate::pitch::{extract_f0, PitchConfig, PitchError, PitchTrack};
use crate::signal::{
    load_audio, mel_cepstra, mel_spectrogram, AudioBuffer, SignalError, SpectralConfig,
};

/// Relative F0 deviation above which a frame counts as a gross pitch error.
pub const DEFAULT_DEVIATION_TOL: f64 = 0.20;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("frame count mismatch: reference {0}, hypothesis {1}")]
    FrameMismatch(usize, usize),
    #[error("no frames to evaluate")]
    NoFrames,
    #[error("undecidable: {tail} voiced tail frames and {head} voiced frames before the tail, need {needed} each")]
    Undecidable {
        tail: usize,
        head: usize,
        needed: usize,
    },
    #[error("invalid rise config: {0}")]
    RiseConfig(String),
    #[error("no verdicts to score")]
    NoVerdicts,
    #[error("perception scoring covers statements and declarative questions only, got {0}")]
    UnsupportedLabel(SentenceType),
    #[error("{id}: {source}")]
    Item {
        id: String,
        #[source]
        source: Box<MetricsError>,
    },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Pitch(#[from] PitchError),
    #[error(transparent)]
    Align(#[from] AlignError),
}

/// Frame error rates, each counted over all reference frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameErrors {
    pub ffe: f64,
    pub gpe: f64,
    pub vde: f64,
    pub frames: usize,
}

/// Computes VDE, GPE and FFE = VDE + GPE over aligned tracks.
pub fn ffe_report(
    reference: &PitchTrack,
    hyp_mapped: &PitchTrack,
    deviation_tol: f64,
) -> Result<FrameErrors, MetricsError> {
    let n = reference.len();
    if n != hyp_mapped.len() {
        return Err(MetricsError::FrameMismatch(n, hyp_mapped.len()));
    }
    if n == 0 {
        return Err(MetricsError::NoFrames);
    }
    let mut voicing_errors = 0usize;
    let mut pitch_errors = 0usize;
    for i in 0..n {
        let (vr, vh) = (reference.voiced[i], hyp_mapped.voiced[i]);
        if vr != vh {
            voicing_errors += 1;
        } else if vr {
            let (fr, fh) = (reference.f0[i], hyp_mapped.f0[i]);
            if (fh - fr).abs() / fr > deviation_tol {
                pitch_errors += 1;
            }
        }
    }
    let vde = voicing_errors as f64 / n as f64;
    let gpe = pitch_errors as f64 / n as f64;
    Ok(FrameErrors {
        ffe: vde + gpe,
        gpe,
        vde,
        frames: n,
    })
}

/// Reindexes `hyp` so that frame `i` of the result is `hyp[mapping[i]]`.
pub fn remap_track(hyp: &PitchTrack, mapping: &[usize]) -> PitchTrack {
    PitchTrack {
        hop_seconds: hyp.hop_seconds,
        f0: mapping.iter().map(|&j| hyp.f0[j]).collect(),
        voiced: mapping.iter().map(|&j| hyp.voiced[j]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiseConfig {
    /// Fraction of frames at the end of the track treated as the boundary.
    pub tail_fraction: f64,
    /// Tail-to-body median ratio above which the contour counts as rising.
    pub rise_ratio_threshold: f64,
    /// Minimum voiced frames required in the tail and in the body.
    pub min_voiced_tail: usize,
}

impl Default for RiseConfig {
    fn default() -> Self {
        Self {
            tail_fraction: 0.2,
            rise_ratio_threshold: 1.10,
            min_voiced_tail: 3,
        }
    }
}

impl RiseConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 0.5) {
            return Err(MetricsError::RiseConfig(format!(
                "tail_fraction {} outside (0, 0.5]",
                self.tail_fraction
            )));
        }
        if !(self.rise_ratio_threshold > 1.0) {
            return Err(MetricsError::RiseConfig(format!(
                "threshold {} must exceed 1",
                self.rise_ratio_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiseVerdict {
    pub is_rising: bool,
    pub rise_ratio: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Compares the median voiced F0 of the final `tail_fraction` of frames
/// (`round(tail_fraction * n)`, at least one) with the median voiced F0 of
/// everything before it.
pub fn detect_rising(track: &PitchTrack, cfg: &RiseConfig) -> Result<RiseVerdict, MetricsError> {
    cfg.validate()?;
    let n = track.len();
    let tail_len = ((cfg.tail_fraction * n as f64).round() as usize).clamp(1, n.max(1));
    let split = n.saturating_sub(tail_len);
    let voiced_in = |range: std::ops::Range<usize>| -> Vec<f64> {
        range
            .filter(|&i| track.voiced[i])
            .map(|i| track.f0[i])
            .collect()
    };
    let head = voiced_in(0..split);
    let tail = voiced_in(split..n);
    if head.len() < cfg.min_voiced_tail
        || tail.len() < cfg.min_voiced_tail
        || head.is_empty()
        || tail.is_empty()
    {
        return Err(MetricsError::Undecidable {
            tail: tail.len(),
            head: head.len(),
            needed: cfg.min_voiced_tail,
        });
    }
    let rise_ratio = median(tail) / median(head);
    Ok(RiseVerdict {
        is_rising: rise_ratio > cfg.rise_ratio_threshold,
        rise_ratio,
    })
}

/// Perceived class from a rise verdict: rising reads as a declarative
/// question, anything else as a statement.
pub fn perceived_from_rise(is_rising: bool) -> SentenceType {
    if is_rising {
        SentenceType::DeclarativeQuestion
    } else {
        SentenceType::Statement
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionAccuracy {
    /// `None` when no statements were scored.
    pub statement: Option<f64>,
    pub declarative_question: Option<f64>,
    pub overall: f64,
    pub total: usize,
}

/// Scores `(perceived, true)` pairs. True labels must be statements or
/// declarative questions.
pub fn perception_accuracy(
    verdicts: &[(SentenceType, SentenceType)],
) -> Result<PerceptionAccuracy, MetricsError> {
    if verdicts.is_empty() {
        return Err(MetricsError::NoVerdicts);
    }
    let mut correct = [0usize; 3];
    let mut count = [0usize; 3];
    for &(perceived, truth) in verdicts {
        if truth == SentenceType::NormalQuestion {
            return Err(MetricsError::UnsupportedLabel(truth));
        }
        count[truth.code()] += 1;
        if perceived == truth {
            correct[truth.code()] += 1;
        }
    }
    let rate = |c: usize| (count[c] > 0).then(|| correct[c] as f64 / count[c] as f64);
    Ok(PerceptionAccuracy {
        statement: rate(0),
        declarative_question: rate(2),
        overall: correct.iter().sum::<usize>() as f64 / verdicts.len() as f64,
        total: verdicts.len(),
    })
}

/// All tunables of the evaluation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub spectral: SpectralConfig,
    pub pitch: PitchConfig,
    pub rise: RiseConfig,
    pub deviation_tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let spectral = SpectralConfig::default();
        Self {
            spectral,
            pitch: PitchConfig::for_spectral(&spectral),
            rise: RiseConfig::default(),
            deviation_tol: DEFAULT_DEVIATION_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ffe: f64,
    pub gpe: f64,
    pub vde: f64,
    pub mean_mcd: f64,
    pub frames: usize,
    /// `None` when the reference contour is undecidable.
    pub rising_ref: Option<bool>,
    pub rising_hyp: Option<bool>,
}

/// Per-frame detail behind a [`MetricReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairAnalysis {
    pub report: MetricReport,
    pub reference: PitchTrack,
    pub hyp_mapped: PitchTrack,
    pub mapping: Vec<usize>,
}

fn rising_flag(track: &PitchTrack, cfg: &RiseConfig) -> Result<Option<bool>, MetricsError> {
    match detect_rising(track, cfg) {
        Ok(v) => Ok(Some(v.is_rising)),
        Err(MetricsError::Undecidable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Cepstra, DTW, frame mapping, pitch extraction and frame-error scoring for
/// one reference/hypothesis pair.
pub fn analyze_pair(
    reference: &AudioBuffer,
    hypothesis: &AudioBuffer,
    cfg: &EvalConfig,
) -> Result<PairAnalysis, MetricsError> {
    let ref_cep = mel_cepstra(
        &mel_spectrogram(reference, &cfg.spectral)?,
        cfg.spectral.cepstral_order,
    )?;
    let hyp_cep = mel_cepstra(
        &mel_spectrogram(hypothesis, &cfg.spectral)?,
        cfg.spectral.cepstral_order,
    )?;
    let path = dtw(&ref_cep, &hyp_cep)?;
    let mapping = map_frames(&path);

    let ref_track = extract_f0(reference, &cfg.pitch)?;
    let hyp_track = extract_f0(hypothesis, &cfg.pitch)?;
    if ref_track.len() != ref_cep.frames() {
        return Err(MetricsError::FrameMismatch(
            ref_cep.frames(),
            ref_track.len(),
        ));
    }
    if hyp_track.len() != hyp_cep.frames() {
        return Err(MetricsError::FrameMismatch(
            hyp_cep.frames(),
            hyp_track.len(),
        ));
    }
    let hyp_mapped = remap_track(&hyp_track, &mapping);
    let errors = ffe_report(&ref_track, &hyp_mapped, cfg.deviation_tol)?;
    let report = MetricReport {
        ffe: errors.ffe,
        gpe: errors.gpe,
        vde: errors.vde,
        mean_mcd: path.mean_cost(),
        frames: errors.frames,
        rising_ref: rising_flag(&ref_track, &cfg.rise)?,
        rising_hyp: rising_flag(&hyp_track, &cfg.rise)?,
    };
    Ok(PairAnalysis {
        report,
        reference: ref_track,
        hyp_mapped,
        mapping,
    })
}

pub fn evaluate_pair(
    reference: &AudioBuffer,
    hypothesis: &AudioBuffer,
    cfg: &EvalConfig,
) -> Result<MetricReport, MetricsError> {
    analyze_pair(reference, hypothesis, cfg).map(|a| a.report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchItem {
    pub id: String,
    pub class: SentenceType,
    pub reference: PathBuf,
    pub hypothesis: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub id: String,
    pub class: SentenceType,
    pub report: MetricReport,
}

/// Mean FFE per class and overall, in the Sta / Que / DecQue / All layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTable {
    pub statement: Option<f64>,
    pub normal_question: Option<f64>,
    pub declarative_question: Option<f64>,
    pub all: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub count: usize,
    pub counts: BTreeMap<String, usize>,
    pub ffe: ClassTable,
    pub gpe: ClassTable,
    pub vde: ClassTable,
    pub mean_mcd: ClassTable,
}

/// Evaluates every item on the current rayon pool. Rows come back sorted by
/// id. On failure the error of the first failing id is returned.
pub fn evaluate_batch(
    items: &[BatchItem],
    cfg: &EvalConfig,
) -> Result<Vec<BatchRow>, MetricsError> {
    use rayon::prelude::*;
    let mut sorted: Vec<&BatchItem> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
        .par_iter()
        .map(|item| {
            let run = || -> Result<MetricReport, MetricsError> {
                let r = load_audio(&item.reference)?;
                let h = load_audio(&item.hypothesis)?;
                evaluate_pair(&r, &h, cfg)
            };
            run()
                .map(|report| BatchRow {
                    id: item.id.clone(),
                    class: item.class,
                    report,
                })
                .map_err(|e| MetricsError::Item {
                    id: item.id.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn class_table(rows: &[BatchRow], metric: impl Fn(&MetricReport) -> f64) -> ClassTable {
    let mean = |filter: &dyn Fn(&BatchRow) -> bool| {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| filter(r))
            .map(|r| metric(&r.report))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    ClassTable {
        statement: mean(&|r| r.class == SentenceType::Statement),
        normal_question: mean(&|r| r.class == SentenceType::NormalQuestion),
        declarative_question: mean(&|r| r.class == SentenceType::DeclarativeQuestion),
        all: mean(&|_| true),
    }
}

/// Aggregates rows in id order, so the result does not depend on the order
/// in which pairs were evaluated.
pub fn summarize(rows: &[BatchRow]) -> BatchSummary {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut counts = BTreeMap::new();
    for class in SentenceType::ALL {
        counts.insert(
            class.label().to_string(),
            sorted.iter().filter(|r| r.class == class).count(),
        );
    }
    BatchSummary {
        count: sorted.len(),
        counts,
        ffe: class_table(&sorted, |r| r.ffe),
        gpe: class_table(&sorted, |r| r.gpe),
        vde: class_table(&sorted, |r| r.vde),
        mean_mcd: class_table(&sorted, |r| r.mean_mcd),
    }
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "undecidable",
    }
}

/// CSV with columns `id,class,ffe,gpe,vde,mean_mcd,rising_ref,rising_hyp`.
pub fn batch_csv(rows: &[BatchRow]) -> String {
    let mut sorted: Vec<&BatchRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::from("id,class,ffe,gpe,vde,mean_mcd,rising_ref,rising_hyp\n");
    for row in sorted {
        let r = &row.report;
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
            row.id,
            row.class,
            r.ffe,
            r.gpe,
            r.vde,
            r.mean_mcd,
            flag(r.rising_ref),
            flag(r.rising_hyp)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HOP: f64 = 256.0 / 22050.0;

    fn track(f0: Vec<f64>) -> PitchTrack {
        PitchTrack::from_f0(HOP, f0).unwrap()
    }

    fn arb_track(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), 80.0f64..400.0], n)
    }

    #[test]
    fn identical_tracks_score_zero() {
        let t = track(vec![0.0, 120.0, 130.0, 0.0, 150.0]);
        let e = ffe_report(&t, &t, 0.2).unwrap();
        assert_eq!((e.ffe, e.gpe, e.vde, e.frames), (0.0, 0.0, 0.0, 5));
    }

    #[test]
    fn scaled_voiced_frames_are_gross_errors() {
        let f0 = vec![0.0, 200.0, 210.0, 0.0, 190.0, 185.0, 0.0, 0.0, 220.0, 230.0];
        let reference = track(f0.clone());
        let hyp = track(f0.iter().map(|f| f * 1.3).collect());
        let voiced_fraction = reference.voiced_count() as f64 / reference.len() as f64;
        let e = ffe_report(&reference, &hyp, 0.2).unwrap();
        assert_eq!(e.vde, 0.0);
        assert_eq!(e.gpe, voiced_fraction);
        assert_eq!(e.ffe, voiced_fraction);
    }

    #[test]
    fn flipped_voicing_counts_as_vde() {
        let reference = track(vec![200.0; 10]);
        let mut f0 = vec![200.0; 10];
        f0[2] = 0.0;
        f0[7] = 0.0;
        f0[9] = 0.0;
        let e = ffe_report(&reference, &track(f0), 0.2).unwrap();
        assert_eq!(e.vde, 0.3);
        assert_eq!(e.ffe, e.vde);
        assert_eq!(e.gpe, 0.0);
    }

    #[test]
    fn ffe_errors() {
        assert!(matches!(
            ffe_report(&track(vec![1.0]), &track(vec![1.0, 2.0]), 0.2),
            Err(MetricsError::FrameMismatch(1, 2))
        ));
        assert!(matches!(
            ffe_report(&track(vec![]), &track(vec![]), 0.2),
            Err(MetricsError::NoFrames)
        ));
    }

    #[test]
    fn flat_contour_is_not_rising() {
        let v = detect_rising(&track(vec![200.0; 100]), &RiseConfig::default()).unwrap();
        assert_eq!(v.rise_ratio, 1.0);
        assert!(!v.is_rising);
    }

    #[test]
    fn final_fifth_at_260_is_rising() {
        let mut f0 = vec![200.0; 80];
        f0.extend(vec![260.0; 20]);
        let v = detect_rising(&track(f0), &RiseConfig::default()).unwrap();
        assert!((v.rise_ratio - 1.3).abs() < 1e-12);
        assert!(v.is_rising);
    }

    #[test]
    fn unvoiced_track_is_undecidable() {
        assert!(matches!(
            detect_rising(&track(vec![0.0; 50]), &RiseConfig::default()),
            Err(MetricsError::Undecidable { .. })
        ));
        assert!(matches!(
            detect_rising(&track(vec![]), &RiseConfig::default()),
            Err(MetricsError::Undecidable { .. })
        ));
        let bad = RiseConfig {
            tail_fraction: 0.7,
            ..RiseConfig::default()
        };
        assert!(matches!(
            detect_rising(&track(vec![200.0; 50]), &bad),
            Err(MetricsError::RiseConfig(_))
        ));
    }

    #[test]
    fn perception_scores() {
        use SentenceType::*;
        let all_right = vec![
            (Statement, Statement),
            (DeclarativeQuestion, DeclarativeQuestion),
        ];
        let acc = perception_accuracy(&all_right).unwrap();
        assert_eq!(
            (acc.statement, acc.declarative_question, acc.overall),
            (Some(1.0), Some(1.0), 1.0)
        );

        let mut verdicts = vec![(Statement, Statement); 28];
        verdicts.extend(vec![(DeclarativeQuestion, DeclarativeQuestion); 22]);
        verdicts.extend(vec![(Statement, DeclarativeQuestion); 6]);
        let acc = perception_accuracy(&verdicts).unwrap();
        assert_eq!(acc.total, 56);
        assert_eq!(acc.statement, Some(1.0));
        assert!((acc.declarative_question.unwrap() * 100.0 - 78.57).abs() < 5e-3);
        assert!((acc.overall * 100.0 - 89.29).abs() < 5e-3);

        assert!(matches!(
            perception_accuracy(&[]),
            Err(MetricsError::NoVerdicts)
        ));
        assert!(matches!(
            perception_accuracy(&[(Statement, NormalQuestion)]),
            Err(MetricsError::UnsupportedLabel(NormalQuestion))
        ));
        assert_eq!(perceived_from_rise(true), DeclarativeQuestion);
    }

    #[test]
    fn summary_layout_and_csv() {
        let row = |id: &str, class, ffe| BatchRow {
            id: id.into(),
            class,
            report: MetricReport {
                ffe,
                gpe: ffe,
                vde: 0.0,
                mean_mcd: 1.0,
                frames: 10,
                rising_ref: Some(false),
                rising_hyp: None,
            },
        };
        let rows = vec![
            row("b", SentenceType::DeclarativeQuestion, 0.4),
            row("a", SentenceType::Statement, 0.1),
            row("c", SentenceType::Statement, 0.3),
        ];
        let s = summarize(&rows);
        assert_eq!(s.ffe.statement, Some(0.2));
        assert_eq!(s.ffe.normal_question, None);
        assert_eq!(s.ffe.declarative_question, Some(0.4));
        assert!((s.ffe.all.unwrap() - 0.8 / 3.0).abs() < 1e-15);
        assert_eq!(s.counts["sta"], 2);
        let csv = batch_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "id,class,ffe,gpe,vde,mean_mcd,rising_ref,rising_hyp"
        );
        assert_eq!(
            lines[1],
            "a,sta,0.100000,0.100000,0.000000,1.000000,false,undecidable"
        );
        assert!(lines[2].starts_with("b,decq,"));
    }

    proptest! {
        #[test]
        fn ffe_is_vde_plus_gpe(pairs in (5usize..60).prop_flat_map(|n| (arb_track(n), arb_track(n)))) {
            let (a, b) = (track(pairs.0), track(pairs.1));
            let e = ffe_report(&a, &b, 0.2).unwrap();
            prop_assert_eq!(e.ffe, e.vde + e.gpe);
            prop_assert!(e.ffe >= e.vde);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e.ffe));
        }

        #[test]
        fn ffe_permutation_invariant(pairs in (5usize..40).prop_flat_map(|n| (arb_track(n), arb_track(n))),
                                     seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..pairs.0.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = track(pairs.0.clone());
            let b = track(pairs.1.clone());
            let pa = remap_track(&a, &order);
            let pb = remap_track(&b, &order);
            prop_assert_eq!(ffe_report(&a, &b, 0.2).unwrap(), ffe_report(&pa, &pb, 0.2).unwrap());
        }

        #[test]
        fn rising_is_scale_free(f0 in arb_track(60), g in 0.25f64..4.0) {
            let a = track(f0.clone());
            let b = track(f0.iter().map(|f| f * g).collect());
            let cfg = RiseConfig::default();
            match (detect_rising(&a, &cfg), detect_rising(&b, &cfg)) {
                (Ok(x), Ok(y)) => {
                    prop_assert!((x.rise_ratio - y.rise_ratio).abs() < 1e-12 * x.rise_ratio.max(1.0));
                }
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "verdicts disagree: {:?}", other),
            }
        }

        #[test]
        fn summary_is_order_free(ffes in proptest::collection::vec((0.0f64..1.0, 0usize..3), 1..20), seed in 0u64..100) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let rows: Vec<BatchRow> = ffes.iter().enumerate().map(|(i, &(ffe, c))| BatchRow {
                id: format!("u{i:03}"),
                class: SentenceType::from_code(c).unwrap(),
                report: MetricReport { ffe, gpe: ffe, vde: 0.0, mean_mcd: ffe, frames: 1,
                                       rising_ref: None, rising_hyp: None },
            }).collect();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(summarize(&rows), summarize(&shuffled));
            prop_assert_eq!(batch_csv(&rows), batch_csv(&shuffled));
        }
    }
}
