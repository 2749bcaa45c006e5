//! Labeled utterance manifests: parsing, stratified splitting, and the
//! end-punctuation augmentation pass.
//!
//! Manifests are UTF-8 TSV without a header:
//!
//! ```text
//! id<TAB>text<TAB>label<TAB>[audio_path]
//! ```
//!
//! where `label` is one of `sta`, `que`, `decq`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters removed from the end of a sentence by [`strip_end_punctuation`].
pub const END_PUNCTUATION: &[char] = &['。', '，', '？', '！', '.', ',', '?', '!'];

/// Suffix appended to the ids of augmented utterances.
pub const NOPUNCT_SUFFIX: &str = "-nopunct";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown label {label:?} (expected sta, que or decq)")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("class {0} has no utterances")]
    EmptyClass(SentenceType),
    #[error("class {0} would have no training utterances left")]
    EmptyTrainClass(SentenceType),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
}

/// The three sentence categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceType {
    Statement,
    NormalQuestion,
    DeclarativeQuestion,
}

impl SentenceType {
    pub const ALL: [SentenceType; 3] = [
        SentenceType::Statement,
        SentenceType::NormalQuestion,
        SentenceType::DeclarativeQuestion,
    ];

    /// Stable integer code used in checkpoints and tensors.
    pub fn code(self) -> usize {
        match self {
            SentenceType::Statement => 0,
            SentenceType::NormalQuestion => 1,
            SentenceType::DeclarativeQuestion => 2,
        }
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Manifest label string.
    pub fn label(self) -> &'static str {
        match self {
            SentenceType::Statement => "sta",
            SentenceType::NormalQuestion => "que",
            SentenceType::DeclarativeQuestion => "decq",
        }
    }
}

impl fmt::Display for SentenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SentenceType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sta" => Ok(SentenceType::Statement),
            "que" => Ok(SentenceType::NormalQuestion),
            "decq" => Ok(SentenceType::DeclarativeQuestion),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    /// Raw text with punctuation retained.
    pub text: String,
    pub label: SentenceType,
    pub audio_path: Option<PathBuf>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: SentenceType) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            audio_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

pub fn parse_manifest(path: &Path) -> Result<Vec<Utterance>, CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest_str(&content)
}

/// Parses manifest content. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn parse_manifest_str(content: &str) -> Result<Vec<Utterance>, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(CorpusError::Malformed {
                line,
                message: format!(
                    "expected 3 or 4 tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let id = fields[0];
        let text = fields[1];
        if id.is_empty() {
            return Err(CorpusError::Malformed {
                line,
                message: "empty id".into(),
            });
        }
        if text.is_empty() {
            return Err(CorpusError::Malformed {
                line,
                message: "empty text".into(),
            });
        }
        let label = fields[2]
            .parse::<SentenceType>()
            .map_err(|_| CorpusError::UnknownLabel {
                line,
                label: fields[2].to_string(),
            })?;
        if !seen.insert(id.to_string()) {
            return Err(CorpusError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        let audio_path = fields.get(3).filter(|p| !p.is_empty()).map(PathBuf::from);
        out.push(Utterance {
            id: id.to_string(),
            text: text.to_string(),
            label,
            audio_path,
        });
    }
    Ok(out)
}

pub fn format_manifest(utts: &[Utterance]) -> String {
    let mut out = String::new();
    for u in utts {
        out.push_str(&u.id);
        out.push('\t');
        out.push_str(&u.text);
        out.push('\t');
        out.push_str(u.label.label());
        if let Some(p) = &u.audio_path {
            out.push('\t');
            out.push_str(&p.to_string_lossy());
        }
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, utts: &[Utterance]) -> std::io::Result<()> {
    fs::write(path, format_manifest(utts))
}

/// Number of utterances of a class of size `count` that go to the test side:
/// `test_fraction * count` rounded half-up.
pub fn test_count(count: usize, test_fraction: f64) -> usize {
    ((test_fraction * count as f64) + 0.5).floor() as usize
}

/// Splits per class so both sides keep the same class proportions. Each
/// class is shuffled with a seeded generator and the first
/// [`test_count`] utterances go to test. Both sides keep input order.
pub fn stratified_split(
    utts: &[Utterance],
    test_fraction: f64,
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; utts.len()];
    for class in SentenceType::ALL {
        let mut members: Vec<usize> = utts
            .iter()
            .enumerate()
            .filter(|(_, u)| u.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(CorpusError::EmptyClass(class));
        }
        let n_test = test_count(members.len(), test_fraction);
        if n_test >= members.len() {
            return Err(CorpusError::EmptyTrainClass(class));
        }
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            in_test[i] = true;
        }
    }
    let mut split = CorpusSplit {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (u, test) in utts.iter().zip(in_test) {
        if test {
            split.test.push(u.clone());
        } else {
            split.train.push(u.clone());
        }
    }
    Ok(split)
}

/// Removes every trailing character in [`END_PUNCTUATION`].
pub fn strip_trailing_punct(text: &str) -> &str {
    text.trim_end_matches(END_PUNCTUATION)
}

/// Result of [`strip_end_punctuation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripped {
    pub utterances: Vec<Utterance>,
    /// Utterances dropped because nothing was left after stripping.
    pub dropped: usize,
}

/// Builds punctuation-free copies of `utts`. Declarative questions become
/// statements once their question mark is gone; the other classes keep
/// their labels. Ids already carrying [`NOPUNCT_SUFFIX`] are not suffixed
/// again.
pub fn strip_end_punctuation(utts: &[Utterance]) -> Stripped {
    let mut dropped = 0;
    let mut utterances = Vec::with_capacity(utts.len());
    for u in utts {
        let text = strip_trailing_punct(&u.text);
        if text.is_empty() {
            dropped += 1;
            continue;
        }
        let label = match u.label {
            SentenceType::DeclarativeQuestion => SentenceType::Statement,
            other => other,
        };
        let id = if u.id.ends_with(NOPUNCT_SUFFIX) {
            u.id.clone()
        } else {
            format!("{}{}", u.id, NOPUNCT_SUFFIX)
        };
        utterances.push(Utterance {
            id,
            text: text.to_string(),
            label,
            audio_path: u.audio_path.clone(),
        });
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} utterances that were empty after stripping punctuation");
    }
    Stripped {
        utterances,
        dropped,
    }
}

/// Keeps utterances for which `keep` returns true. This is the place to plug
/// in a corpus-specific exclusion rule, e.g. for code-mixed text.
pub fn filter_utterances<F>(utts: Vec<Utterance>, keep: F) -> Vec<Utterance>
where
    F: Fn(&Utterance) -> bool,
{
    utts.into_iter().filter(|u| keep(u)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub count: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub statement: ClassCount,
    pub normal_question: ClassCount,
    pub declarative_question: ClassCount,
}

impl CorpusStats {
    pub fn get(&self, class: SentenceType) -> ClassCount {
        match class {
            SentenceType::Statement => self.statement,
            SentenceType::NormalQuestion => self.normal_question,
            SentenceType::DeclarativeQuestion => self.declarative_question,
        }
    }
}

pub fn corpus_stats(utts: &[Utterance]) -> CorpusStats {
    let mut counts = [0usize; 3];
    for u in utts {
        counts[u.label.code()] += 1;
    }
    let total = utts.len();
    let entry = |c: usize| ClassCount {
        count: c,
        ratio: if total == 0 {
            0.0
        } else {
            c as f64 / total as f64
        },
    };
    CorpusStats {
        total,
        statement: entry(counts[0]),
        normal_question: entry(counts[1]),
        declarative_question: entry(counts[2]),
    }
}
