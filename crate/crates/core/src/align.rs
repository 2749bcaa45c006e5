//! DTW alignment of a hypothesis utterance to its reference in mel-cepstral
//! space, using mel-cepstral distortion as the local cost.

use std::f64::consts::LN_10;
use std::fmt::Write as _;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::MelCepstra;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("cepstral vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot align an empty sequence")]
    Empty,
}

/// `10 / ln 10 * sqrt(2)`: the dB scale factor of mel-cepstral distortion.
pub const MCD_SCALE: f64 = 10.0 / LN_10 * std::f64::consts::SQRT_2;

/// Mel-cepstral distortion in dB between two `c_1..c_K` vectors.
pub fn mcd_frame(
    c_ref: ArrayView1<'_, f64>,
    c_hyp: ArrayView1<'_, f64>,
) -> Result<f64, AlignError> {
    if c_ref.len() != c_hyp.len() {
        return Err(AlignError::LengthMismatch(c_ref.len(), c_hyp.len()));
    }
    Ok(mcd_unchecked(c_ref, c_hyp))
}

fn mcd_unchecked(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    10.0 / LN_10 * (2.0 * sq).sqrt()
}

/// Monotonic alignment between reference frames `i` and hypothesis frames `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPath {
    pub pairs: Vec<(usize, usize)>,
    /// Sum of local MCD costs along the path.
    pub total_cost: f64,
}

impl AlignmentPath {
    /// Total cost divided by the number of path pairs.
    pub fn mean_cost(&self) -> f64 {
        self.total_cost / self.pairs.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ref_idx,hyp_idx\n");
        for (i, j) in &self.pairs {
            let _ = writeln!(out, "{i},{j}");
        }
        out
    }

    /// Checks the path shape: starts at `(0,0)`, ends at `(r-1,h-1)`, and
    /// every step is one of `(1,0)`, `(0,1)`, `(1,1)`.
    pub fn is_valid(&self, r: usize, h: usize) -> bool {
        if r == 0 || h == 0 {
            return false;
        }
        if self.pairs.first() != Some(&(0, 0)) || self.pairs.last() != Some(&(r - 1, h - 1)) {
            return false;
        }
        self.pairs.windows(2).all(|w| {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }
}

/// Full-matrix DTW with steps `(1,0)`, `(0,1)`, `(1,1)` and no band
/// constraint. Backtrace ties prefer the diagonal, then `(1,0)`, then `(0,1)`.
pub fn dtw(reference: &MelCepstra, hypothesis: &MelCepstra) -> Result<AlignmentPath, AlignError> {
    let (r, h) = (reference.frames(), hypothesis.frames());
    if r == 0 || h == 0 {
        return Err(AlignError::Empty);
    }
    if reference.order() != hypothesis.order() {
        return Err(AlignError::LengthMismatch(
            reference.order(),
            hypothesis.order(),
        ));
    }
    let cost =
        |i: usize, j: usize| mcd_unchecked(reference.coeffs.row(i), hypothesis.coeffs.row(j));
    let mut acc = vec![f64::INFINITY; r * h];
    let at = |i: usize, j: usize| i * h + j;
    for i in 0..r {
        for j in 0..h {
            let local = cost(i, j);
            acc[at(i, j)] = if i == 0 && j == 0 {
                local
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(acc[at(i - 1, j - 1)]);
                }
                if i > 0 {
                    best = best.min(acc[at(i - 1, j)]);
                }
                if j > 0 {
                    best = best.min(acc[at(i, j - 1)]);
                }
                local + best
            };
        }
    }

    let mut pairs = vec![(r - 1, h - 1)];
    let (mut i, mut j) = (r - 1, h - 1);
    while (i, j) != (0, 0) {
        // Candidates in tie-break order; strict `<` keeps the earliest.
        let candidates = [
            (i > 0 && j > 0).then(|| (i - 1, j - 1)),
            (i > 0).then(|| (i - 1, j)),
            (j > 0).then(|| (i, j - 1)),
        ];
        let mut best: Option<(usize, usize)> = None;
        for c in candidates.into_iter().flatten() {
            if best.map_or(true, |b| acc[at(c.0, c.1)] < acc[at(b.0, b.1)]) {
                best = Some(c);
            }
        }
        (i, j) = best.expect("non-origin cell has a predecessor");
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(AlignmentPath {
        pairs,
        total_cost: acc[at(r - 1, h - 1)],
    })
}

/// For each reference frame, the hypothesis frame of the first path pair
/// that contains it.
pub fn map_frames(path: &AlignmentPath) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &(i, j) in &path.pairs {
        if i == out.len() {
            out.push(j);
        }
    }
    out
}
