//! Structure-recovery scores against a known graph.
//!
//! The candidate universe is one slot per unordered label pair in the
//! layering: the undirected edge for a within-layer pair, the
//! earlier-to-later directed edge otherwise. An estimated edge on a pair
//! whose kind or orientation disagrees with the pair's candidate is a
//! false positive, and if the true graph has that pair's edge it is also a
//! false negative, so such pairs are counted twice.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Layering};
use crate::sampler::candidate_index;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Index of the universe slot on the pair of `e`, and whether `e` is that
/// slot's candidate.
fn slot(layering: &Layering, e: Edge) -> Result<(usize, bool)> {
    let p = layering.p();
    let (a, b) = e.endpoints();
    if a == b || a >= p || b >= p {
        return Err(Error::EdgeOutsideUniverse(e.to_string()));
    }
    let (u, v) = (a.min(b), a.max(b));
    Ok((candidate_index(p, u, v), layering.permits(e)))
}

fn truth_slots(layering: &Layering, truth: &[Edge]) -> Result<Vec<bool>> {
    let p = layering.p();
    let mut on = vec![false; p * p.saturating_sub(1) / 2];
    for &e in truth {
        match slot(layering, e)? {
            (i, true) => on[i] = true,
            (_, false) => return Err(Error::EdgeOutsideUniverse(e.to_string())),
        }
    }
    Ok(on)
}

pub fn confusion(estimated: &[Edge], truth: &[Edge], layering: &Layering) -> Result<Confusion> {
    let truth_on = truth_slots(layering, truth)?;
    let n = truth_on.len();
    let mut correct = vec![false; n];
    let mut wrong: Vec<BTreeSet<Edge>> = vec![BTreeSet::new(); n];
    for &e in estimated {
        match slot(layering, e)? {
            (i, true) => correct[i] = true,
            (i, false) => {
                wrong[i].insert(e);
            }
        }
    }
    let mut c = Confusion::default();
    for i in 0..n {
        c.fp += wrong[i].len();
        match (truth_on[i], correct[i]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) if wrong[i].is_empty() => c.tn += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Matthews correlation coefficient; 0 when any marginal sum is 0.
pub fn mcc(c: &Confusion) -> f64 {
    let [tp, tn, fp, fn_] = [c.tp, c.tn, c.fp, c.fn_].map(|x| x as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(1 − specificity, sensitivity)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    /// Area over `1 − specificity ∈ [0, 0.2]`, divided by 0.2.
    pub pauc: f64,
}

/// Upper limit of the false positive rate for the partial area.
pub const PAUC_FPR: f64 = 0.2;

/// ROC curve of `scores` against binary `labels`, thresholding at every
/// distinct score; tied scores move along one straight segment.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateTruth);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &i) in idx.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        if k + 1 == idx.len() || scores[idx[k + 1]] != scores[i] {
            points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    let auc = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    let mut partial = 0.0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= PAUC_FPR {
            break;
        }
        let x_end = x1.min(PAUC_FPR);
        let y_end = if x1 > x0 { y0 + (y1 - y0) * (x_end - x0) / (x1 - x0) } else { y1 };
        partial += (x_end - x0) * (y0 + y_end) / 2.0;
    }
    Ok(Roc { points, auc, pauc: partial / PAUC_FPR })
}

/// Scores and truth labels over the candidate universe; candidates
/// without a score rank below every scored one.
fn universe_scores(scores: &[(Edge, f64)], truth: &[Edge], layering: &Layering) -> Result<(Vec<f64>, Vec<bool>)> {
    let labels = truth_slots(layering, truth)?;
    let mut s = vec![f64::NEG_INFINITY; labels.len()];
    for &(e, g) in scores {
        match slot(layering, e)? {
            (i, true) => s[i] = g,
            (_, false) => return Err(Error::EdgeOutsideUniverse(e.to_string())),
        }
    }
    Ok((s, labels))
}

pub fn roc(scores: &[(Edge, f64)], truth: &[Edge], layering: &Layering) -> Result<Roc> {
    let (s, labels) = universe_scores(scores, truth, layering)?;
    roc_curve(&s, &labels)
}

/// MCC after selecting every candidate scoring at least each distinct
/// score, starting from no discoveries.
pub fn mcc_curve(scores: &[(Edge, f64)], truth: &[Edge], layering: &Layering) -> Result<Vec<(usize, f64)>> {
    let (s, labels) = universe_scores(scores, truth, layering)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut c = Confusion { tp: 0, fp: 0, fn_: pos, tn: s.len() - pos };
    let mut out = vec![(0, mcc(&c))];
    for (k, &i) in idx.iter().enumerate() {
        if labels[i] {
            c.tp += 1;
            c.fn_ -= 1;
        } else {
            c.fp += 1;
            c.tn -= 1;
        }
        if k + 1 == idx.len() || s[idx[k + 1]] != s[i] {
            out.push((k + 1, mcc(&c)));
        }
    }
    Ok(out)
}

/// One replicate's row of the structure-recovery table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub true_edges: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub mcc: f64,
    pub discoveries: usize,
    pub pauc: f64,
    pub auc: f64,
}

impl Evaluation {
    pub const COLUMNS: [&'static str; 7] =
        ["true_edges", "sensitivity", "specificity", "mcc", "discoveries", "pauc", "auc"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.true_edges as f64,
            self.sensitivity,
            self.specificity,
            self.mcc,
            self.discoveries as f64,
            self.pauc,
            self.auc,
        ]
    }
}

/// Scores a selected edge set and the full score vector that produced it.
pub fn evaluate(selected: &[Edge], scores: &[(Edge, f64)], truth: &[Edge], layering: &Layering) -> Result<Evaluation> {
    let c = confusion(selected, truth, layering)?;
    let r = roc(scores, truth, layering)?;
    Ok(Evaluation {
        true_edges: truth.len(),
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        mcc: mcc(&c),
        discoveries: selected.len(),
        pauc: r.pauc,
        auc: r.auc,
    })
}

/// Mean, standard deviation and standard error across replicates, per
/// column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

pub fn aggregate(rows: &[Evaluation]) -> Vec<Aggregate> {
    let n = rows.len() as f64;
    Evaluation::COLUMNS
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let xs: Vec<f64> = rows.iter().map(|r| r.values()[c]).collect();
            let mean = if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / n };
            let sd = if xs.len() < 2 {
                0.0
            } else {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            Aggregate { column: name.to_string(), mean, sd, se: sd / n.max(1.0).sqrt() }
        })
        .collect()
}
