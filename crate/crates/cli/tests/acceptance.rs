//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use intonation::align::{dtw, mcd_frame};
use intonation::classifier::{attention_pool, gradient_check, softmax, PoolingParams};
use intonation::contour::{render_contour, tone_from_contour, ContourSpec, ToneConfig};
use intonation::corpus::{
    parse_manifest, strip_end_punctuation, write_manifest, SentenceType, Utterance,
};
use intonation::metrics::{
    ffe_report, perceived_from_rise, perception_accuracy, DEFAULT_DEVIATION_TOL,
};
use intonation::pitch::{extract_f0, PitchConfig, PitchTrack};
use intonation::signal::MelCepstra;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_intonation"))
}

fn run_ok(args: &[&str]) -> Vec<u8> {
    let out = bin().args(args).output().expect("spawn binary");
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn random_cepstra(rng: &mut ChaCha8Rng, frames: usize, order: usize) -> MelCepstra {
    MelCepstra {
        coeffs: Array2::from_shape_simple_fn((frames, order), || rng.gen_range(-2.0..2.0)),
        c0: vec![0.0; frames],
    }
}

/// Minimum path cost over every monotone path, by exhaustive recursion.
fn brute_force_cost(a: &MelCepstra, b: &MelCepstra, i: usize, j: usize) -> f64 {
    let local = mcd_frame(a.coeffs.row(i), b.coeffs.row(j)).unwrap();
    let (r, h) = (a.frames(), b.frames());
    if i == r - 1 && j == h - 1 {
        return local;
    }
    let mut best = f64::INFINITY;
    for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
        if i + di < r && j + dj < h {
            best = best.min(brute_force_cost(a, b, i + di, j + dj));
        }
    }
    local + best
}

fn dtw_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut valid = true;
    for _ in 0..20 {
        let (r, h, k) = (
            rng.gen_range(1..=6),
            rng.gen_range(1..=6),
            rng.gen_range(1..=13),
        );
        let (a, b) = (
            random_cepstra(&mut rng, r, k),
            random_cepstra(&mut rng, h, k),
        );
        let path = dtw(&a, &b).unwrap();
        let oracle = brute_force_cost(&a, &b, 0, 0);
        let along: f64 = path
            .pairs
            .iter()
            .map(|&(i, j)| mcd_frame(a.coeffs.row(i), b.coeffs.row(j)).unwrap())
            .sum();
        worst = worst
            .max((path.total_cost - oracle).abs())
            .max((along - oracle).abs());
        valid &= path.is_valid(r, h);
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-9 && valid && elapsed < Duration::from_secs(1),
        format!("20 instances, max |dtw - exhaustive| = {worst:.2e}, paths valid = {valid}, {elapsed:.2?}"),
    )
}

fn mcd_closed_form() -> Outcome {
    let zero = Array1::<f64>::zeros(13);
    let mut one = zero.clone();
    one[4] = 1.0;
    let frame = mcd_frame(zero.view(), one.view()).unwrap();
    let single = |v: &Array1<f64>| MelCepstra {
        coeffs: v.clone().insert_axis(ndarray::Axis(0)),
        c0: vec![0.0],
    };
    let via_dtw = dtw(&single(&zero), &single(&one)).unwrap().mean_cost();
    let ok = (frame - 6.1418).abs() <= 1e-3 && (via_dtw - frame).abs() < 1e-12;
    check(
        ok,
        format!("unit single-coefficient difference = {frame:.6} dB (dtw mean {via_dtw:.6})"),
    )
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let report = gradient_check(50, 1e-5, 7).unwrap();
    let elapsed = start.elapsed();
    check(
        report.configurations >= 50
            && report.max_relative_error < 1e-4
            && elapsed < Duration::from_secs(10),
        format!(
            "{} configurations, {} entries, max relative error {:.2e}, {elapsed:.2?}",
            report.configurations, report.checked_entries, report.max_relative_error
        ),
    )
}

fn pooling_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut sum_err, mut min_alpha, mut hull_violation, mut shift_err) =
        (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (t, d, d_a) = (
            rng.gen_range(1..=12),
            rng.gen_range(1..=8),
            rng.gen_range(1..=8),
        );
        let h = Array2::from_shape_simple_fn((t, d), || rng.gen_range(-3.0..3.0));
        let pooling = PoolingParams {
            w: Array2::from_shape_simple_fn((d_a, d), || rng.gen_range(-2.0..2.0)),
            b: Array1::from_shape_simple_fn(d_a, || rng.gen_range(-1.0..1.0)),
            v: Array1::from_shape_simple_fn(d_a, || rng.gen_range(-3.0..3.0)),
        };
        let out = attention_pool(&h, &pooling).unwrap();
        sum_err = sum_err.max((out.alpha.sum() - 1.0).abs());
        min_alpha = min_alpha.min(out.alpha.fold(f64::INFINITY, |m, &a| m.min(a)));
        for c in 0..d {
            let col = h.column(c);
            let lo = col.fold(f64::INFINITY, |m, &x| m.min(x));
            let hi = col.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            hull_violation = hull_violation.max(lo - out.s[c]).max(out.s[c] - hi);
        }
        let shift = rng.gen_range(-50.0..50.0);
        let shifted = softmax((&out.scores + shift).view());
        shift_err = shift_err.max((&shifted - &out.alpha).fold(0.0f64, |m, &x| m.max(x.abs())));
    }
    let ok = sum_err <= 1e-12 && min_alpha >= 0.0 && hull_violation <= 1e-12 && shift_err <= 1e-10;
    check(
        ok,
        format!(
            "1000 inputs, max |sum(alpha)-1| {sum_err:.1e}, min alpha {min_alpha:.2e}, hull excess {hull_violation:.1e}, shift drift {shift_err:.1e}"
        ),
    )
}

fn random_track(rng: &mut ChaCha8Rng, n: usize) -> PitchTrack {
    let f0 = (0..n)
        .map(|_| {
            if rng.gen_bool(0.7) {
                rng.gen_range(80.0..400.0)
            } else {
                0.0
            }
        })
        .collect();
    PitchTrack::from_f0(0.01, f0).unwrap()
}

fn ffe_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sum_exact, mut identical_zero, mut scaled_exact) = (true, true, true);
    for _ in 0..500 {
        let n = rng.gen_range(1..200);
        let (a, b) = (random_track(&mut rng, n), random_track(&mut rng, n));
        let r = ffe_report(&a, &b, DEFAULT_DEVIATION_TOL).unwrap();
        sum_exact &= r.ffe == r.vde + r.gpe;
        let same = ffe_report(&a, &a, DEFAULT_DEVIATION_TOL).unwrap();
        identical_zero &= same.ffe == 0.0 && same.gpe == 0.0 && same.vde == 0.0;
        let scaled =
            PitchTrack::from_f0(a.hop_seconds, a.f0.iter().map(|f| f * 1.3).collect()).unwrap();
        let s = ffe_report(&a, &scaled, DEFAULT_DEVIATION_TOL).unwrap();
        let voiced_fraction = a.voiced_count() as f64 / n as f64;
        scaled_exact &= s.ffe == voiced_fraction && s.gpe == voiced_fraction && s.vde == 0.0;
    }
    check(
        sum_exact && identical_zero && scaled_exact,
        format!("500 random track pairs: ffe=vde+gpe {sum_exact}, identical->0 {identical_zero}, x1.3 -> voiced fraction {scaled_exact}"),
    )
}

struct ToyCorpus {
    dir: PathBuf,
    train: PathBuf,
    test: PathBuf,
    checkpoint: PathBuf,
}

fn accuracy_from_predictions(csv: &[u8]) -> (usize, usize, Vec<(String, String)>) {
    let text = String::from_utf8(csv.to_vec()).unwrap();
    let rows: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].to_string())
        })
        .collect();
    let correct = rows.iter().filter(|(t, p)| t == p).count();
    (correct, rows.len(), rows)
}

fn classify_manifest(checkpoint: &Path, manifest: &Path) -> Vec<u8> {
    run_ok(&[
        "classify",
        "--checkpoint",
        p(checkpoint),
        "--manifest",
        p(manifest),
    ])
}

fn train(corpus: &ToyCorpus, checkpoint: &Path, augment: bool) {
    let history = checkpoint.with_extension("csv");
    let mut args = vec![
        "train",
        "--manifest",
        p(&corpus.train),
        "--checkpoint",
        p(checkpoint),
        "--history",
        p(&history),
        "--epochs",
        "500",
        "--seed",
        "0",
    ];
    if augment {
        args.push("--augment-strip-punct");
    }
    run_ok(&args);
}

fn desk_scale_expsep(corpus: &ToyCorpus) -> Outcome {
    let start = Instant::now();
    let plain = corpus.dir.join("plain.json");
    train(corpus, &plain, false);
    let (correct, total, _) = accuracy_from_predictions(&classify_manifest(&plain, &corpus.test));
    let plain_acc = correct as f64 / total as f64;

    train(corpus, &corpus.checkpoint, true);
    let (correct, total, _) =
        accuracy_from_predictions(&classify_manifest(&corpus.checkpoint, &corpus.test));
    let augmented_acc = correct as f64 / total as f64;

    let test = parse_manifest(&corpus.test).unwrap();
    let decq: Vec<Utterance> = test
        .into_iter()
        .filter(|u| u.label == SentenceType::DeclarativeQuestion)
        .collect();
    let stripped = strip_end_punctuation(&decq).utterances;
    let stripped_path = corpus.dir.join("stripped_decq.tsv");
    write_manifest(&stripped_path, &stripped).unwrap();
    let (_, n, rows) =
        accuracy_from_predictions(&classify_manifest(&corpus.checkpoint, &stripped_path));
    let as_statement = rows.iter().filter(|(_, p)| p == "sta").count() as f64 / n as f64;
    let elapsed = start.elapsed();
    check(
        plain_acc >= 0.99 && augmented_acc >= 0.99 && as_statement >= 0.99 && elapsed < Duration::from_secs(120),
        format!(
            "300 train / {total} test, 500 epochs: test accuracy {:.1}% (augmented {:.1}%), stripped decq -> sta {:.1}% of {n}, {elapsed:.1?}",
            100.0 * plain_acc,
            100.0 * augmented_acc,
            100.0 * as_statement
        ),
    )
}

/// Classifier-driven (or label-forced) `say` over the statement and
/// declarative-question test sentences; returns (statement, decq) accuracy.
fn say_perception(corpus: &ToyCorpus, jitter: f64, force: Option<&str>) -> (f64, f64) {
    let test = parse_manifest(&corpus.test).unwrap();
    let out_dir = corpus
        .dir
        .join(format!("say-{jitter}-{}", force.unwrap_or("clf")));
    let mut verdicts = Vec::new();
    for (i, u) in test
        .iter()
        .filter(|u| u.label != SentenceType::NormalQuestion)
        .enumerate()
    {
        let wav = out_dir.join(format!("{}.wav", u.id));
        let (jitter_s, seed, base) = (
            jitter.to_string(),
            i.to_string(),
            (170 + (i * 7) % 80).to_string(),
        );
        let mut args = vec![
            "say",
            u.text.as_str(),
            "--checkpoint",
            p(&corpus.checkpoint),
            "--out",
            p(&wav),
            "--jitter",
            &jitter_s,
            "--seed",
            &seed,
            "--base-f0",
            &base,
            "--declination",
            "-10",
        ];
        if let Some(label) = force {
            args.extend_from_slice(&["--label", label]);
        }
        run_ok(&args);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(wav.with_extension("json")).unwrap()).unwrap();
        // An undecidable self-check counts as a miss for either class.
        let perceived = match report["rise_detected"].as_bool() {
            Some(r) => perceived_from_rise(r),
            None => SentenceType::NormalQuestion,
        };
        let perceived = if perceived == SentenceType::NormalQuestion {
            match u.label {
                SentenceType::Statement => SentenceType::DeclarativeQuestion,
                _ => SentenceType::Statement,
            }
        } else {
            perceived
        };
        verdicts.push((perceived, u.label));
    }
    let acc = perception_accuracy(&verdicts).unwrap();
    (acc.statement.unwrap(), acc.declarative_question.unwrap())
}

fn end_to_end_loop(corpus: &ToyCorpus) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for jitter in [0.0, 2.5, 5.0] {
        let (sta, decq) = say_perception(corpus, jitter, None);
        ok &= sta >= 0.95 && decq >= 0.95;
        parts.push(format!(
            "jitter {jitter} Hz: sta {:.1}% decq {:.1}%",
            100.0 * sta,
            100.0 * decq
        ));
    }
    let (_, ablated) = say_perception(corpus, 5.0, Some("sta"));
    ok &= ablated <= 0.05;
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    check(
        ok,
        format!(
            "{}; forced-statement ablation decq {:.1}%, {elapsed:.1?}",
            parts.join(", "),
            100.0 * ablated
        ),
    )
}

fn pitch_roundtrip() -> Outcome {
    let hop = 256.0 / 22050.0;
    let mut tracks = Vec::new();
    for f in (100..=400).step_by(10) {
        tracks.push(PitchTrack::from_f0(hop, vec![f as f64; 86]).unwrap());
    }
    for base in [100.0, 140.0, 180.0, 220.0, 260.0, 300.0] {
        for t in [SentenceType::Statement, SentenceType::DeclarativeQuestion] {
            let spec = ContourSpec {
                base_f0: base,
                declination: -10.0,
                ..ContourSpec::default()
            };
            tracks.push(render_contour(&spec, t).unwrap());
        }
    }
    let cfg = PitchConfig::default();
    let mut errors = Vec::new();
    let mut unvoiced = 0usize;
    for track in &tracks {
        let audio = tone_from_contour(track, &ToneConfig::default())
            .unwrap()
            .audio;
        let est = extract_f0(&audio, &cfg).unwrap();
        for i in 1..track.len() - 1 {
            if !est.voiced[i] {
                unvoiced += 1;
                continue;
            }
            errors.push((est.f0[i] / track.f0[i] - 1.0).abs());
        }
    }
    let frames = errors.len() + unvoiced;
    let gross = errors.iter().filter(|&&e| e > 0.2).count() + unvoiced;
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    let gross_rate = gross as f64 / frames as f64;
    check(
        median <= 0.01 && gross_rate < 0.02,
        format!(
            "{} tones, {frames} interior frames: median error {:.3}%, gross (incl. unvoiced) {:.2}%",
            tracks.len(),
            100.0 * median,
            100.0 * gross_rate
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let corpus = dir.join("det");
    run_ok(&[
        "synth-corpus",
        "--out-dir",
        p(&corpus),
        "--n-per-class",
        "8",
        "--seed",
        "4",
        "--jitter",
        "3",
    ]);
    let manifest = corpus.join("manifest.tsv");
    let mut checkpoints = Vec::new();
    for (run, jobs) in [(0, "1"), (1, "1"), (2, "4")] {
        let ck = dir.join(format!("det-{run}.json"));
        let hist = dir.join(format!("det-{run}.csv"));
        run_ok(&[
            "train",
            "--manifest",
            p(&manifest),
            "--checkpoint",
            p(&ck),
            "--history",
            p(&hist),
            "--epochs",
            "40",
            "--seed",
            "3",
            "--augment-strip-punct",
            "--jobs",
            jobs,
        ]);
        checkpoints.push((fs::read(&ck).unwrap(), fs::read(&hist).unwrap()));
    }
    let train_same = checkpoints.windows(2).all(|w| w[0] == w[1]);

    let hyp = dir.join("det-hyp");
    run_ok(&[
        "synth-corpus",
        "--out-dir",
        p(&hyp),
        "--n-per-class",
        "8",
        "--seed",
        "4",
        "--flat",
    ]);
    let mut csvs = Vec::new();
    for jobs in ["1", "2", "4"] {
        let csv = dir.join(format!("eval-{jobs}.csv"));
        run_ok(&[
            "eval",
            "--manifest",
            p(&manifest),
            "--ref-dir",
            p(&corpus),
            "--hyp-dir",
            p(&hyp),
            "--out-csv",
            p(&csv),
            "--out-json",
            p(&dir.join(format!("eval-{jobs}.json"))),
            "--jobs",
            jobs,
        ]);
        csvs.push(fs::read(&csv).unwrap());
    }
    let eval_same = csvs.windows(2).all(|w| w[0] == w[1]);
    check(
        train_same && eval_same,
        format!("train checkpoints/history byte-identical across reruns and --jobs 1/4: {train_same}; eval CSV identical for --jobs 1/2/4: {eval_same}"),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    let corpus = ToyCorpus {
        train: dir.join("train/manifest.tsv"),
        test: dir.join("test/manifest.tsv"),
        checkpoint: dir.join("augmented.json"),
        dir: dir.clone(),
    };
    run_ok(&[
        "synth-corpus",
        "--out-dir",
        p(&dir.join("train")),
        "--n-per-class",
        "100",
        "--seed",
        "1",
    ]);
    run_ok(&[
        "synth-corpus",
        "--out-dir",
        p(&dir.join("test")),
        "--n-per-class",
        "30",
        "--seed",
        "2",
    ]);

    let criteria: Vec<Criterion> = vec![
        ("dtw-oracle-equivalence", Box::new(dtw_oracle)),
        ("mcd-closed-form", Box::new(mcd_closed_form)),
        ("gradient-correctness", Box::new(gradient_correctness)),
        ("pooling-invariants", Box::new(pooling_invariants)),
        ("ffe-identities", Box::new(ffe_identities)),
        ("desk-scale-expsep", Box::new(|| desk_scale_expsep(&corpus))),
        (
            "end-to-end-intonation-loop",
            Box::new(|| end_to_end_loop(&corpus)),
        ),
        ("pitch-roundtrip", Box::new(pitch_roundtrip)),
        ("determinism", Box::new(|| determinism(&dir))),
    ];
    let mut failed = 0;
    for (name, criterion) in &criteria {
        let outcome = criterion();
        failed += usize::from(!outcome.pass);
        println!(
            "{} {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
