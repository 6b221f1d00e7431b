//! Canonical data model: arcs, observations, and the dense per-arc grid.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of spin-phase angle bins in production data (6 degrees each).
pub const ANGLE_BINS: usize = 60;

/// Electrostatic-analyzer energy step. Only steps 2 through 6 feed end
/// products, so those are the only valid values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EsaStep(u8);

impl EsaStep {
    pub const ALL: [EsaStep; 5] = [EsaStep(2), EsaStep(3), EsaStep(4), EsaStep(5), EsaStep(6)];

    pub fn new(value: u8) -> Result<Self> {
        if (2..=6).contains(&value) {
            Ok(EsaStep(value))
        } else {
            Err(Error::config(format!("ESA step {value} outside 2..=6")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl fmt::Display for EsaStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the 60 six-degree spin-phase bins; circular (59 adjacent to 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleBin(u8);

impl AngleBin {
    pub fn new(index: u8) -> Result<Self> {
        if (index as usize) < ANGLE_BINS {
            Ok(AngleBin(index))
        } else {
            Err(Error::config(format!(
                "angle bin {index} outside 0..{ANGLE_BINS}"
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AngleBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One observation window within an arc. All pipeline math runs on
/// `index`; the epoch fields are metadata for reporting and exposure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub index: u32,
    pub start_epoch_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcLetter {
    A,
    B,
}

impl ArcLetter {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcLetter::A => "a",
            ArcLetter::B => "b",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(ArcLetter::A),
            "b" => Ok(ArcLetter::B),
            other => Err(Error::config(format!("arc letter must be a|b, got {other:?}"))),
        }
    }
}

/// Identity of one orbit arc, e.g. `471a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrbitArcId {
    pub orbit: u32,
    pub arc: ArcLetter,
}

impl OrbitArcId {
    pub fn new(orbit: u32, arc: ArcLetter) -> Self {
        OrbitArcId { orbit, arc }
    }
}

impl fmt::Display for OrbitArcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.orbit, self.arc.as_str())
    }
}

/// Good/bad time classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Good => "good",
            Label::Bad => "bad",
        }
    }

    pub fn parse(s: &str) -> Result<Option<Self>> {
        match s {
            "" => Ok(None),
            "good" => Ok(Some(Label::Good)),
            "bad" => Ok(Some(Label::Bad)),
            other => Err(Error::config(format!(
                "label must be good|bad|empty, got {other:?}"
            ))),
        }
    }
}

/// One count record at (arc, ESA step, angle bin, time interval).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub arc: OrbitArcId,
    pub esa: EsaStep,
    pub angle: AngleBin,
    pub time: TimeInterval,
    pub count: u32,
    pub bg_low: u32,
    pub bg_high: u32,
    pub earth_nv: bool,
    pub moon_nv: bool,
    pub sun_nv: bool,
    pub sme_label: Option<Label>,
    pub truth_label: Option<Label>,
}

/// Dense per-arc grid over (ESA, angle, time) with a missing-data mask.
///
/// Missing cells are masked, never imputed; every downstream statistic
/// skips masked cells. Besides the counts the grid carries the per-cell
/// monitor channels, visibility flags, and optional labels, because the
/// feature and pipeline stages consume them cell-wise.
///
/// `angle_count` is 60 everywhere in production (asserted on ingest); the
/// constructor accepts other sizes so small toy grids can exercise the
/// wrap/clamp arithmetic directly.
#[derive(Debug, Clone)]
pub struct ArcGrid {
    pub arc: OrbitArcId,
    esa_steps: Vec<EsaStep>,
    angle_count: usize,
    times: Vec<Option<TimeInterval>>,
    present: Vec<bool>,
    counts: Vec<u32>,
    bg_low: Vec<u32>,
    bg_high: Vec<u32>,
    earth_nv: Vec<bool>,
    moon_nv: Vec<bool>,
    sun_nv: Vec<bool>,
    sme: Vec<Option<Label>>,
    truth: Vec<Option<Label>>,
}

impl ArcGrid {
    /// Empty grid with the given dimensions (all cells masked).
    pub fn empty(
        arc: OrbitArcId,
        esa_steps: Vec<EsaStep>,
        angle_count: usize,
        n_time: usize,
    ) -> Self {
        let cells = esa_steps.len() * angle_count * n_time;
        ArcGrid {
            arc,
            esa_steps,
            angle_count,
            times: vec![None; n_time],
            present: vec![false; cells],
            counts: vec![0; cells],
            bg_low: vec![0; cells],
            bg_high: vec![0; cells],
            earth_nv: vec![true; cells],
            moon_nv: vec![true; cells],
            sun_nv: vec![true; cells],
            sme: vec![None; cells],
            truth: vec![None; cells],
        }
    }

    pub fn esa_steps(&self) -> &[EsaStep] {
        &self.esa_steps
    }

    pub fn angle_count(&self) -> usize {
        self.angle_count
    }

    pub fn n_time(&self) -> usize {
        self.times.len()
    }

    pub fn time(&self, t: usize) -> Option<TimeInterval> {
        self.times.get(t).copied().flatten()
    }

    pub fn esa_position(&self, esa: EsaStep) -> Option<usize> {
        self.esa_steps.iter().position(|&e| e == esa)
    }

    #[inline]
    pub fn cell_index(&self, esa_pos: usize, angle: usize, t: usize) -> usize {
        debug_assert!(esa_pos < self.esa_steps.len());
        debug_assert!(angle < self.angle_count);
        debug_assert!(t < self.times.len());
        (esa_pos * self.angle_count + angle) * self.times.len() + t
    }

    #[inline]
    pub fn is_present(&self, esa_pos: usize, angle: usize, t: usize) -> bool {
        self.present[self.cell_index(esa_pos, angle, t)]
    }

    /// Count at a cell, `None` when masked.
    pub fn count(&self, esa_pos: usize, angle: usize, t: usize) -> Option<u32> {
        let i = self.cell_index(esa_pos, angle, t);
        self.present[i].then(|| self.counts[i])
    }

    /// Raw count without a mask check (callers must check presence).
    #[inline]
    pub fn count_unchecked(&self, esa_pos: usize, angle: usize, t: usize) -> u32 {
        self.counts[self.cell_index(esa_pos, angle, t)]
    }

    pub fn monitor(&self, esa_pos: usize, angle: usize, t: usize) -> Option<(u32, u32)> {
        let i = self.cell_index(esa_pos, angle, t);
        self.present[i].then(|| (self.bg_low[i], self.bg_high[i]))
    }

    /// (earth, moon, sun) not-visible flags for a cell.
    pub fn visibility(&self, esa_pos: usize, angle: usize, t: usize) -> Option<(bool, bool, bool)> {
        let i = self.cell_index(esa_pos, angle, t);
        self.present[i].then(|| (self.earth_nv[i], self.moon_nv[i], self.sun_nv[i]))
    }

    pub fn sme_label(&self, esa_pos: usize, angle: usize, t: usize) -> Option<Label> {
        let i = self.cell_index(esa_pos, angle, t);
        if self.present[i] {
            self.sme[i]
        } else {
            None
        }
    }

    pub fn truth_label(&self, esa_pos: usize, angle: usize, t: usize) -> Option<Label> {
        let i = self.cell_index(esa_pos, angle, t);
        if self.present[i] {
            self.truth[i]
        } else {
            None
        }
    }

    /// Number of unmasked cells.
    pub fn present_cells(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Low-level cell fill used by [`build_grid`] and the simulator.
    /// Callers are responsible for the time-interval ordering invariants
    /// that `build_grid` validates.
    pub fn fill_cell(&mut self, esa_pos: usize, angle: usize, t: usize, obs: &Observation) {
        let i = self.cell_index(esa_pos, angle, t);
        self.present[i] = true;
        self.counts[i] = obs.count;
        self.bg_low[i] = obs.bg_low;
        self.bg_high[i] = obs.bg_high;
        self.earth_nv[i] = obs.earth_nv;
        self.moon_nv[i] = obs.moon_nv;
        self.sun_nv[i] = obs.sun_nv;
        self.sme[i] = obs.sme_label;
        self.truth[i] = obs.truth_label;
        self.times[t] = Some(obs.time);
    }

    pub(crate) fn set_sme_label(&mut self, esa_pos: usize, angle: usize, t: usize, label: Option<Label>) {
        let i = self.cell_index(esa_pos, angle, t);
        self.sme[i] = label;
    }

    pub(crate) fn add_count(&mut self, esa_pos: usize, angle: usize, t: usize, extra: u32) {
        let i = self.cell_index(esa_pos, angle, t);
        self.counts[i] += extra;
    }

    pub(crate) fn set_truth_label(&mut self, esa_pos: usize, angle: usize, t: usize, label: Option<Label>) {
        let i = self.cell_index(esa_pos, angle, t);
        self.truth[i] = label;
    }

    /// Set one body's not-visible flag at a cell.
    pub(crate) fn set_body_visibility(
        &mut self,
        esa_pos: usize,
        angle: usize,
        t: usize,
        body: crate::fov::Body,
        not_visible: bool,
    ) {
        let i = self.cell_index(esa_pos, angle, t);
        match body {
            crate::fov::Body::Earth => self.earth_nv[i] = not_visible,
            crate::fov::Body::Moon => self.moon_nv[i] = not_visible,
            crate::fov::Body::Sun => self.sun_nv[i] = not_visible,
        }
    }

    /// Flatten back to observations in canonical (esa, angle, time) order.
    pub fn flatten(&self) -> Vec<Observation> {
        let mut out = Vec::with_capacity(self.present_cells());
        for (epos, &esa) in self.esa_steps.iter().enumerate() {
            for angle in 0..self.angle_count {
                for t in 0..self.times.len() {
                    let i = self.cell_index(epos, angle, t);
                    if !self.present[i] {
                        continue;
                    }
                    out.push(Observation {
                        arc: self.arc,
                        esa,
                        angle: AngleBin::new(angle as u8).expect("angle in range"),
                        time: self.times[t].expect("present cell has interval metadata"),
                        count: self.counts[i],
                        bg_low: self.bg_low[i],
                        bg_high: self.bg_high[i],
                        earth_nv: self.earth_nv[i],
                        moon_nv: self.moon_nv[i],
                        sun_nv: self.sun_nv[i],
                        sme_label: self.sme[i],
                        truth_label: self.truth[i],
                    });
                }
            }
        }
        out
    }
}

/// Assemble the dense grid for one arc from its observations.
///
/// Every observation must belong to `arc`; each (esa, angle, time) cell may
/// be filled at most once; cells with no row stay masked. Time-interval
/// metadata must be consistent between rows sharing a time index, ordered,
/// and non-overlapping.
pub fn build_grid(observations: &[Observation], arc: OrbitArcId) -> Result<ArcGrid> {
    for (i, obs) in observations.iter().enumerate() {
        if obs.arc != arc {
            return Err(Error::Validation {
                row: i + 1,
                message: format!("observation belongs to arc {}, expected {}", obs.arc, arc),
            });
        }
    }

    let esa_steps: Vec<EsaStep> = observations
        .iter()
        .map(|o| o.esa)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_time = observations
        .iter()
        .map(|o| o.time.index as usize + 1)
        .max()
        .unwrap_or(0);

    let mut grid = ArcGrid::empty(arc, esa_steps, ANGLE_BINS, n_time);
    let mut filled_by: Vec<usize> = vec![0; grid.present.len()];

    for (i, obs) in observations.iter().enumerate() {
        let epos = grid.esa_position(obs.esa).expect("esa collected above");
        let t = obs.time.index as usize;
        let cell = grid.cell_index(epos, obs.angle.index(), t);
        if grid.present[cell] {
            return Err(Error::Conflict {
                key: format!("{arc},esa={},angle={},t={t}", obs.esa, obs.angle),
                first_row: filled_by[cell],
                second_row: i + 1,
            });
        }
        if let Some(prev) = grid.times[t] {
            if prev != obs.time {
                return Err(Error::Validation {
                    row: i + 1,
                    message: format!(
                        "time index {t} has inconsistent interval metadata \
                         ({} s @ {} vs {} s @ {})",
                        prev.duration_s, prev.start_epoch_s, obs.time.duration_s,
                        obs.time.start_epoch_s
                    ),
                });
            }
        }
        if obs.time.duration_s <= 0.0 {
            return Err(Error::Validation {
                row: i + 1,
                message: format!("interval duration must be positive, got {}", obs.time.duration_s),
            });
        }
        grid.fill_cell(epos, obs.angle.index(), t, obs);
        filled_by[cell] = i + 1;
    }

    // Intervals must be ordered and non-overlapping across present indices.
    let mut prev: Option<TimeInterval> = None;
    for ti in grid.times.iter().flatten() {
        if let Some(p) = prev {
            if ti.start_epoch_s < p.start_epoch_s + p.duration_s - 1e-9 {
                return Err(Error::Validation {
                    row: 0,
                    message: format!(
                        "time intervals overlap: index {} starts at {} before {} ends",
                        ti.index,
                        ti.start_epoch_s,
                        p.index
                    ),
                });
            }
        }
        prev = Some(*ti);
    }

    Ok(grid)
}
