//! Day-to-day pattern dynamics: transition matrices, run-collapsed
//! subsequences, pattern spells and season simulation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::CalendarIndex;
use crate::matrix::Matrix;
use crate::spells::runs;
use crate::stats::sample_categorical;
use crate::{Error, Result};

/// Row-sum tolerance accepted for externally supplied matrices.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    pub labels: Vec<usize>,
    /// `matrix[i][j] = P(U(t+1) = labels[j] | U(t) = labels[i])`.
    pub matrix: Matrix<f64>,
    pub counts: Matrix<usize>,
    /// Rows without observed transitions; these are uniform.
    pub empty_rows: Vec<bool>,
    pub include_cross_season: bool,
    /// Positions grouped by family (identity until families are known).
    pub family_order: Vec<usize>,
}

impl TransitionModel {
    /// Wraps an explicit matrix, checking it is row-stochastic.
    pub fn from_matrix(labels: Vec<usize>, matrix: Matrix<f64>) -> Result<Self> {
        let k = labels.len();
        if k == 0 {
            return Err(Error::NoLabels);
        }
        if matrix.rows() != k || matrix.cols() != k {
            return Err(Error::Dimension(format!("{}x{} matrix for {k} labels", matrix.rows(), matrix.cols())));
        }
        check_stochastic(&matrix)?;
        Ok(Self {
            labels,
            matrix,
            counts: Matrix::filled(k, k, 0),
            empty_rows: alloc::vec![false; k],
            include_cross_season: false,
            family_order: (0..k).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Orders positions by family tag (stable); untagged labels go last.
    pub fn set_family_order(&mut self, families: &[Option<u8>]) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| families.get(i).copied().flatten().unwrap_or(u8::MAX));
        self.family_order = order;
    }

    /// Stationary distribution of the (lazy) chain by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let k = self.len();
        let mut pi = alloc::vec![1.0 / k as f64; k];
        for _ in 0..1_000_000 {
            let mut next = alloc::vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    next[j] += pi[i] * 0.5 * (self.matrix.get(i, j) + if i == j { 1.0 } else { 0.0 });
                }
            }
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }
}

pub fn check_stochastic(matrix: &Matrix<f64>) -> Result<()> {
    for i in 0..matrix.rows() {
        let row = matrix.row(i);
        if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::NotStochastic(format!("row {i} has entry {bad}")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Maximum-likelihood transition matrix over `labels`.
///
/// Pairs involving a label outside `labels` are dropped rather than bridged.
/// Unless `include_cross_season`, only pairs of consecutive calendar days count.
pub fn estimate_transitions(
    u: &[usize],
    calendar: &CalendarIndex,
    labels: &[usize],
    include_cross_season: bool,
) -> Result<TransitionModel> {
    let k = labels.len();
    if k == 0 {
        return Err(Error::NoLabels);
    }
    if u.len() != calendar.len() {
        return Err(Error::Dimension(format!("{} labels for {} days", u.len(), calendar.len())));
    }
    let index: BTreeMap<usize, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut counts = Matrix::filled(k, k, 0usize);
    for t in 0..u.len().saturating_sub(1) {
        if !include_cross_season && !calendar.is_consecutive(t) {
            continue;
        }
        if let (Some(&i), Some(&j)) = (index.get(&u[t]), index.get(&u[t + 1])) {
            counts.set(i, j, counts.get(i, j) + 1);
        }
    }
    let mut matrix = Matrix::filled(k, k, 0.0);
    let mut empty_rows = alloc::vec![false; k];
    for i in 0..k {
        let total: usize = counts.row(i).iter().sum();
        if total == 0 {
            empty_rows[i] = true;
            matrix.row_mut(i).iter_mut().for_each(|p| *p = 1.0 / k as f64);
        } else {
            for j in 0..k {
                matrix.set(i, j, counts.get(i, j) as f64 / total as f64);
            }
        }
    }
    Ok(TransitionModel {
        labels: labels.to_vec(),
        matrix,
        counts,
        empty_rows,
        include_cross_season,
        family_order: (0..k).collect(),
    })
}

/// `out[i][j] = m[perm[i]][perm[j]]`.
pub fn permute(m: &Matrix<f64>, perm: &[usize]) -> Matrix<f64> {
    let k = perm.len();
    let mut out = Matrix::filled(k, k, 0.0);
    for i in 0..k {
        for j in 0..k {
            out.set(i, j, m.get(perm[i], perm[j]));
        }
    }
    out
}

/// The matrix with its diagonal zeroed (not renormalized) and the matrix
/// reordered by family.
pub fn views(model: &TransitionModel) -> (Matrix<f64>, Matrix<f64>) {
    let mut zero_diag = model.matrix.clone();
    for i in 0..model.len() {
        zero_diag.set(i, i, 0.0);
    }
    (zero_diag, permute(&model.matrix, &model.family_order))
}

/// Merges consecutive duplicates.
pub fn collapse_runs<T: PartialEq + Clone>(seq: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(seq.len());
    for v in seq {
        if out.last() != Some(v) {
            out.push(v.clone());
        }
    }
    out
}

/// Counts of length-`k` windows of the run-collapsed label sequence of
/// every season, most frequent first (ties in lexicographic order).
pub fn frequent_ksubseq(
    u: &[usize],
    calendar: &CalendarIndex,
    k: usize,
    top_n: Option<usize>,
) -> Result<Vec<(Vec<usize>, usize)>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("subsequence length must be >= 2, got {k}")));
    }
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for season in calendar.seasons() {
        let collapsed = collapse_runs(&u[season.clone()]);
        for w in collapsed.windows(k) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(Vec<usize>, usize)> = counts.into_iter().collect();
    // BTreeMap order is lexicographic; a stable sort by count keeps it for ties
    out.sort_by(|a, b| b.1.cmp(&a.1));
    if let Some(n) = top_n {
        out.truncate(n);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSpellStats {
    pub labels: Vec<usize>,
    pub mean_length: Vec<f64>,
    pub mean_spells_per_season: Vec<f64>,
    pub n_seasons: usize,
}

/// Spells are maximal within-season runs of one label. Labels that never
/// occur are omitted.
pub fn pattern_spell_stats(u: &[usize], calendar: &CalendarIndex, labels: &[usize]) -> PatternSpellStats {
    let mut per_label: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (label, spell) in runs(u, calendar.seasons()) {
        if labels.contains(&label) {
            let e = per_label.entry(label).or_insert((0, 0));
            e.0 += 1;
            e.1 += spell.len();
        }
    }
    let n_seasons = calendar.seasons().len();
    let mut out = PatternSpellStats { labels: Vec::new(), mean_length: Vec::new(), mean_spells_per_season: Vec::new(), n_seasons };
    for (label, (spells, days)) in per_label {
        out.labels.push(label);
        out.mean_length.push(days as f64 / spells as f64);
        out.mean_spells_per_season.push(spells as f64 / n_seasons.max(1) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSeason {
    pub labels: Vec<usize>,
    /// `S × length` rainfall, each day the CRP of its pattern.
    pub rain: Matrix<f64>,
}

/// Simulates `n_seasons` seasons from one generator seeded by `seed`.
///
/// `crp[i]` is the rainfall pattern of `model.labels[i]`.
pub fn simulate_seasons(
    model: &TransitionModel,
    crp: &[Vec<f64>],
    initial: &[f64],
    length: usize,
    n_seasons: usize,
    seed: u64,
) -> Result<Vec<SimulatedSeason>> {
    let k = model.len();
    check_stochastic(&model.matrix)?;
    if initial.len() != k || (initial.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::InvalidParameter("initial distribution must have one entry per label and sum to 1".into()));
    }
    if initial.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidParameter("initial distribution has a negative entry".into()));
    }
    if crp.len() != k {
        return Err(Error::Dimension(format!("{} patterns for {k} labels", crp.len())));
    }
    let n_loc = crp.first().map_or(0, Vec::len);
    if crp.iter().any(|c| c.len() != n_loc) {
        return Err(Error::Dimension("patterns differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_seasons);
    for _ in 0..n_seasons {
        let mut positions = Vec::with_capacity(length);
        if length > 0 {
            let mut cur = sample_categorical(initial, rng.random());
            positions.push(cur);
            for _ in 1..length {
                cur = sample_categorical(model.matrix.row(cur), rng.random());
                positions.push(cur);
            }
        }
        let mut rain = Matrix::filled(n_loc, length, 0.0);
        for (t, &p) in positions.iter().enumerate() {
            for s in 0..n_loc {
                rain.set(s, t, crp[p][s]);
            }
        }
        out.push(SimulatedSeason { labels: positions.iter().map(|&p| model.labels[p]).collect(), rain });
    }
    Ok(out)
}

pub fn simulate_season(
    model: &TransitionModel,
    crp: &[Vec<f64>],
    initial: &[f64],
    length: usize,
    seed: u64,
) -> Result<SimulatedSeason> {
    Ok(simulate_seasons(model, crp, initial, length, 1, seed)?.remove(0))
}
