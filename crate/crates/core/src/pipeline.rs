//! The three culling stages: per-observation probabilities, per-time
//! aggregation with FOV reinstatement, consecutive-run refinement.
//!
//! Labels only ever move good -> bad after Stage 2: Stage 3 flips whole
//! time columns bad when enough consecutive columns hide a low-probability
//! region that the Stage-2 mean washed out, and FOV-forced cells stay bad
//! throughout. A probability of exactly `threshold` is good at every stage
//! (the threshold is inclusive).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::forest::Forest;
use crate::model::{ArcGrid, EsaStep, Label, OrbitArcId};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Inclusive good-time probability threshold.
    pub threshold: f64,
    /// Stage 3: a cell counts as low-probability when its Stage-1
    /// probability is strictly below this.
    pub stage3_low: f64,
    /// Stage 3: fraction of a column's unmasked cells that must be
    /// low-probability.
    pub stage3_col_frac: f64,
    /// Stage 3: minimum run of consecutive qualifying columns.
    pub stage3_run_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            threshold: 0.40,
            stage3_low: 0.40,
            stage3_col_frac: 0.5,
            stage3_run_len: 3,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (v, what) in [
            (self.threshold, "threshold"),
            (self.stage3_low, "stage3_low"),
            (self.stage3_col_frac, "stage3_col_frac"),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{what} must be in [0, 1]")));
            }
        }
        if self.stage3_run_len == 0 {
            return Err(Error::config("stage3_run_len must be >= 1"));
        }
        Ok(())
    }
}

/// Per-cell probabilities over an arc's grid shape; masked where the grid
/// has no data.
#[derive(Debug, Clone)]
pub struct ProbabilityGrid {
    pub arc: OrbitArcId,
    pub esa_steps: Vec<EsaStep>,
    pub angle_count: usize,
    pub n_time: usize,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl ProbabilityGrid {
    pub fn masked(arc: OrbitArcId, esa_steps: Vec<EsaStep>, angle_count: usize, n_time: usize) -> Self {
        let cells = esa_steps.len() * angle_count * n_time;
        ProbabilityGrid {
            arc,
            esa_steps,
            angle_count,
            n_time,
            values: vec![0.0; cells],
            present: vec![false; cells],
        }
    }

    #[inline]
    pub fn cell_index(&self, esa_pos: usize, angle: usize, t: usize) -> usize {
        (esa_pos * self.angle_count + angle) * self.n_time + t
    }

    pub fn get(&self, esa_pos: usize, angle: usize, t: usize) -> Option<f64> {
        let i = self.cell_index(esa_pos, angle, t);
        self.present[i].then(|| self.values[i])
    }

    pub fn set(&mut self, esa_pos: usize, angle: usize, t: usize, p: f64) {
        let i = self.cell_index(esa_pos, angle, t);
        debug_assert!((0.0..=1.0).contains(&p));
        self.values[i] = p;
        self.present[i] = true;
    }
}

/// Per-cell good/bad labels for one stage; `None` where masked.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub arc: OrbitArcId,
    pub stage: u8,
    pub esa_steps: Vec<EsaStep>,
    pub angle_count: usize,
    pub n_time: usize,
    labels: Vec<Option<Label>>,
}

impl LabelGrid {
    pub fn masked(
        arc: OrbitArcId,
        stage: u8,
        esa_steps: Vec<EsaStep>,
        angle_count: usize,
        n_time: usize,
    ) -> Self {
        let cells = esa_steps.len() * angle_count * n_time;
        LabelGrid {
            arc,
            stage,
            esa_steps,
            angle_count,
            n_time,
            labels: vec![None; cells],
        }
    }

    #[inline]
    pub fn cell_index(&self, esa_pos: usize, angle: usize, t: usize) -> usize {
        (esa_pos * self.angle_count + angle) * self.n_time + t
    }

    pub fn get(&self, esa_pos: usize, angle: usize, t: usize) -> Option<Label> {
        self.labels[self.cell_index(esa_pos, angle, t)]
    }

    pub fn set(&mut self, esa_pos: usize, angle: usize, t: usize, label: Label) {
        let i = self.cell_index(esa_pos, angle, t);
        self.labels[i] = Some(label);
    }

    pub fn good_cells(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| matches!(l, Some(Label::Good)))
            .count()
    }
}

/// Per-(angle, time) mask of cells forced bad by the FOV filter, derived
/// from the observation visibility flags (a cell is forced when any body's
/// not-visible flag is down anywhere in its ESA stack).
#[derive(Debug, Clone)]
pub struct FovCellMask {
    pub angle_count: usize,
    pub n_time: usize,
    bad: Vec<bool>,
}

impl FovCellMask {
    pub fn none(angle_count: usize, n_time: usize) -> Self {
        FovCellMask {
            angle_count,
            n_time,
            bad: vec![false; angle_count * n_time],
        }
    }

    pub fn from_grid(grid: &ArcGrid) -> Self {
        let (na, nt) = (grid.angle_count(), grid.n_time());
        let mut bad = vec![false; na * nt];
        for a in 0..na {
            for t in 0..nt {
                let flagged = (0..grid.esa_steps().len()).any(|e| {
                    grid.visibility(e, a, t)
                        .map(|(earth, moon, sun)| !(earth && moon && sun))
                        .unwrap_or(false)
                });
                bad[a * nt + t] = flagged;
            }
        }
        FovCellMask {
            angle_count: na,
            n_time: nt,
            bad,
        }
    }

    #[inline]
    pub fn is_bad(&self, angle: usize, t: usize) -> bool {
        self.bad[angle * self.n_time + t]
    }

    pub fn set_bad(&mut self, angle: usize, t: usize) {
        self.bad[angle * self.n_time + t] = true;
    }
}

/// Stage 1: per-observation good-time probabilities from the forest.
///
/// The feature matrix must cover exactly the arc's unmasked cells (the
/// output of [`crate::features::compute_features`] on the same grid).
pub fn stage1(forest: &Forest, features: &FeatureMatrix, grid: &ArcGrid) -> Result<ProbabilityGrid> {
    let probs = forest.predict_matrix(features)?;
    let mut out = ProbabilityGrid::masked(
        grid.arc,
        grid.esa_steps().to_vec(),
        grid.angle_count(),
        grid.n_time(),
    );
    for (key, p) in features.keys.iter().zip(&probs) {
        if key.arc != grid.arc {
            return Err(Error::contract(format!(
                "feature row for arc {} fed to stage 1 of arc {}",
                key.arc, grid.arc
            )));
        }
        let epos = grid.esa_position(key.esa).ok_or_else(|| {
            Error::contract(format!("feature row for ESA {} not in grid", key.esa))
        })?;
        out.set(epos, key.angle as usize, key.time as usize, *p);
    }
    Ok(out)
}

/// Everything Stage 2 produces: the per-time aggregated probability grid,
/// cell labels after FOV reinstatement, the per-column aggregate decision,
/// and diagnostics for columns with no data at all.
#[derive(Debug, Clone)]
pub struct Stage2Output {
    pub prob: ProbabilityGrid,
    pub labels: LabelGrid,
    /// Aggregate >= threshold per (esa_pos, time); false for empty columns.
    pub column_good: Vec<bool>,
    /// (esa_pos, time) columns with zero unmasked cells, labeled bad.
    pub empty_columns: Vec<(usize, usize)>,
}

impl Stage2Output {
    #[inline]
    pub fn column_good(&self, esa_pos: usize, t: usize) -> bool {
        self.column_good[esa_pos * self.prob.n_time + t]
    }
}

/// Stage 2: average each (esa, time) column's probabilities over angle
/// bins (unweighted mean of unmasked cells), label the column good when
/// the aggregate meets the inclusive threshold, then force FOV-flagged
/// cells bad regardless of the aggregate.
pub fn stage2(
    stage1_prob: &ProbabilityGrid,
    fov: &FovCellMask,
    config: &PipelineConfig,
) -> Result<Stage2Output> {
    config.validate()?;
    if fov.angle_count != stage1_prob.angle_count || fov.n_time != stage1_prob.n_time {
        return Err(Error::contract("FOV mask shape does not match the grid"));
    }
    let (ne, na, nt) = (
        stage1_prob.esa_steps.len(),
        stage1_prob.angle_count,
        stage1_prob.n_time,
    );
    let mut prob = ProbabilityGrid::masked(
        stage1_prob.arc,
        stage1_prob.esa_steps.clone(),
        na,
        nt,
    );
    let mut labels = LabelGrid::masked(
        stage1_prob.arc,
        2,
        stage1_prob.esa_steps.clone(),
        na,
        nt,
    );
    let mut column_good = vec![false; ne * nt];
    let mut empty_columns = Vec::new();

    for e in 0..ne {
        for t in 0..nt {
            let mut sum = 0.0;
            let mut n = 0usize;
            for a in 0..na {
                if let Some(p) = stage1_prob.get(e, a, t) {
                    sum += p;
                    n += 1;
                }
            }
            if n == 0 {
                empty_columns.push((e, t));
                continue;
            }
            let aggregate = sum / n as f64;
            let good = aggregate >= config.threshold;
            column_good[e * nt + t] = good;
            for a in 0..na {
                if stage1_prob.get(e, a, t).is_none() {
                    continue;
                }
                prob.set(e, a, t, aggregate);
                let label = if good && !fov.is_bad(a, t) {
                    Label::Good
                } else {
                    Label::Bad
                };
                labels.set(e, a, t, label);
            }
        }
    }
    Ok(Stage2Output {
        prob,
        labels,
        column_good,
        empty_columns,
    })
}

/// Stage 3: per ESA, find maximal runs of consecutive time columns that
/// Stage 2 called good but where at least `stage3_col_frac` of the
/// unmasked cells have Stage-1 probability strictly below `stage3_low`;
/// runs of length >= `stage3_run_len` flip entirely bad. Never flips
/// bad -> good.
pub fn stage3(
    stage1_prob: &ProbabilityGrid,
    stage2_out: &Stage2Output,
    config: &PipelineConfig,
) -> Result<LabelGrid> {
    config.validate()?;
    let (ne, na, nt) = (
        stage1_prob.esa_steps.len(),
        stage1_prob.angle_count,
        stage1_prob.n_time,
    );
    let mut labels = stage2_out.labels.clone();
    labels.stage = 3;

    for e in 0..ne {
        // Column qualifies when it is nonempty, Stage-2 good, and mostly low.
        let qualifies: Vec<bool> = (0..nt)
            .map(|t| {
                let mut low = 0usize;
                let mut n = 0usize;
                for a in 0..na {
                    if let Some(p) = stage1_prob.get(e, a, t) {
                        n += 1;
                        if p < config.stage3_low {
                            low += 1;
                        }
                    }
                }
                n > 0
                    && stage2_out.column_good(e, t)
                    && low as f64 / n as f64 >= config.stage3_col_frac
            })
            .collect();

        let mut t = 0;
        while t < nt {
            if !qualifies[t] {
                t += 1;
                continue;
            }
            let start = t;
            while t < nt && qualifies[t] {
                t += 1;
            }
            if t - start >= config.stage3_run_len {
                for col in start..t {
                    for a in 0..na {
                        if labels.get(e, a, col).is_some() {
                            labels.set(e, a, col, Label::Bad);
                        }
                    }
                }
            }
        }
    }
    Ok(labels)
}

/// Contiguous good spans per ESA step plus per-cell exceptions (cells that
/// are bad inside a good span, i.e. FOV-forced bins).
#[derive(Debug, Clone, PartialEq)]
pub struct GoodTimesList {
    pub arc: OrbitArcId,
    /// Per esa_pos: half-open [start, end) column spans.
    pub spans: Vec<Vec<(u32, u32)>>,
    /// (esa_pos, angle, time) cells labeled bad inside a good span.
    pub exceptions: Vec<(usize, usize, usize)>,
}

/// Export Stage-3 labels as good spans: a column is good when it contains
/// at least one good cell; bad cells inside good columns become exceptions.
pub fn export_goodtimes(labels: &LabelGrid) -> GoodTimesList {
    let (ne, na, nt) = (labels.esa_steps.len(), labels.angle_count, labels.n_time);
    let mut spans = vec![Vec::new(); ne];
    let mut exceptions = Vec::new();
    for (e, esa_spans) in spans.iter_mut().enumerate().take(ne) {
        let col_good: Vec<bool> = (0..nt)
            .map(|t| (0..na).any(|a| labels.get(e, a, t) == Some(Label::Good)))
            .collect();
        let mut t = 0;
        while t < nt {
            if !col_good[t] {
                t += 1;
                continue;
            }
            let start = t;
            while t < nt && col_good[t] {
                for a in 0..na {
                    if labels.get(e, a, t) == Some(Label::Bad) {
                        exceptions.push((e, a, t));
                    }
                }
                t += 1;
            }
            esa_spans.push((start as u32, t as u32));
        }
    }
    GoodTimesList {
        arc: labels.arc,
        spans,
        exceptions,
    }
}

/// Rebuild a label grid from a good-times list (the masked-cell pattern
/// must be supplied by the original grid). Inverse of [`export_goodtimes`].
pub fn expand_goodtimes(list: &GoodTimesList, like: &LabelGrid) -> LabelGrid {
    let mut out = LabelGrid::masked(
        like.arc,
        like.stage,
        like.esa_steps.clone(),
        like.angle_count,
        like.n_time,
    );
    for e in 0..like.esa_steps.len() {
        for a in 0..like.angle_count {
            for t in 0..like.n_time {
                if like.get(e, a, t).is_none() {
                    continue;
                }
                let in_span = list.spans[e].iter().any(|&(lo, hi)| (lo..hi).contains(&(t as u32)));
                out.set(e, a, t, if in_span { Label::Good } else { Label::Bad });
            }
        }
    }
    for &(e, a, t) in &list.exceptions {
        if out.get(e, a, t).is_some() {
            out.set(e, a, t, Label::Bad);
        }
    }
    out
}
