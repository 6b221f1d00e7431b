//! Synthetic arc generation with known ground truth.
//!
//! Counts are Poisson draws around a per-angle signal profile plus an
//! isotropic background, with anisotropic contamination layered on top as
//! additive burst rates, elevated FOV bands, and angle-scrambled "spun"
//! spans. Contamination is phenomenological — there is no magnetosphere or
//! solar-wind model — but its geometry (blocky, multi-ESA, column-spanning)
//! mirrors what the culling stages must detect.
//!
//! Truth labels a cell bad exactly when at least one contamination span
//! covers it. Expert-style block labels are emulated separately by dilating
//! truth-bad regions to whole time columns once a column's bad fraction
//! crosses `sme_dilate_ratio`.
//!
//! Everything is drawn from a single [`Stream`] per arc in a documented
//! order (interval durations, then counts/monitors cell by cell in
//! (esa, angle, time) order), so a seed pins the arc bit-exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fov::Body;
use crate::model::{
    AngleBin, ArcGrid, ArcLetter, EsaStep, Label, Observation, OrbitArcId, TimeInterval,
    ANGLE_BINS,
};
use crate::rng::Stream;

/// Stream tag for arc generation.
const TAG_ARC: u64 = 0x41524347; // "ARCG"
/// Stream tag for post-hoc band injection.
const TAG_INJECT: u64 = 0x494e4a42; // "INJB"

/// Additive contamination over an (esa set) x [angle span) x [time span) box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    /// ESA steps the burst was declared on. Coverage closes single gaps:
    /// a burst on steps e-1 and e+1 also contaminates step e.
    pub esa_steps: Vec<u8>,
    /// Half-open angle span [lo, hi); empty when lo == hi.
    pub angle_span: (u16, u16),
    /// Half-open time span [lo, hi).
    pub time_span: (u32, u32),
    /// Added rate, counts per interval.
    pub rate: f64,
}

/// A celestial body parked in the field of view over a span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FovBandSpec {
    pub target: Body,
    pub angle_span: (u16, u16),
    pub time_span: (u32, u32),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub orbit: u32,
    pub arc: ArcLetter,
    pub n_time: u32,
    pub esa_steps: Vec<u8>,
    /// Mean signal rate per angle bin, counts per interval (length 60).
    pub signal_profile: Vec<f64>,
    pub isotropic_bg_rate: f64,
    pub bursts: Vec<BurstSpec>,
    pub fov_bands: Vec<FovBandSpec>,
    /// Added rate inside FOV bands (self-chosen default; the source
    /// material gives no quantitative contamination intensity).
    pub fov_band_rate: f64,
    /// Half-open time span during which angle allocation is scrambled.
    pub spun_span: Option<(u32, u32)>,
    /// How strongly the background-monitor channels track the anisotropic
    /// rate at a cell.
    pub monitor_coupling: f64,
    pub monitor_base_low: f64,
    pub monitor_base_high: f64,
    /// Column bad-fraction above which emulated expert labels dilate to the
    /// whole time column.
    pub sme_dilate_ratio: f64,
    /// Interval durations are drawn uniformly from this range (seconds).
    pub duration_range: (f64, f64),
    pub start_epoch_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            orbit: 1,
            arc: ArcLetter::A,
            n_time: 100,
            esa_steps: vec![2, 3, 4, 5, 6],
            signal_profile: vec![4.0; ANGLE_BINS],
            isotropic_bg_rate: 1.0,
            bursts: Vec::new(),
            fov_bands: Vec::new(),
            fov_band_rate: 12.0,
            spun_span: None,
            monitor_coupling: 0.8,
            monitor_base_low: 1.0,
            monitor_base_high: 0.5,
            sme_dilate_ratio: 0.25,
            duration_range: (30.0, 30.0),
            start_epoch_s: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_time == 0 {
            return Err(Error::config("n_time must be >= 1"));
        }
        if self.esa_steps.is_empty() {
            return Err(Error::config("esa_steps must not be empty"));
        }
        for &e in &self.esa_steps {
            EsaStep::new(e)?;
        }
        if self.signal_profile.len() != ANGLE_BINS {
            return Err(Error::config(format!(
                "signal_profile must have {ANGLE_BINS} entries, got {}",
                self.signal_profile.len()
            )));
        }
        for (rate, what) in [
            (self.isotropic_bg_rate, "isotropic_bg_rate"),
            (self.fov_band_rate, "fov_band_rate"),
            (self.monitor_coupling, "monitor_coupling"),
            (self.monitor_base_low, "monitor_base_low"),
            (self.monitor_base_high, "monitor_base_high"),
        ] {
            if rate < 0.0 || !rate.is_finite() {
                return Err(Error::config(format!("{what} must be >= 0")));
            }
        }
        if self.signal_profile.iter().any(|&r| r < 0.0 || !r.is_finite()) {
            return Err(Error::config("signal_profile rates must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.sme_dilate_ratio) {
            return Err(Error::config("sme_dilate_ratio must be in [0, 1]"));
        }
        if self.duration_range.0 <= 0.0 || self.duration_range.1 < self.duration_range.0 {
            return Err(Error::config("duration_range must satisfy 0 < lo <= hi"));
        }
        for (i, b) in self.bursts.iter().enumerate() {
            self.check_span(b.angle_span, b.time_span, &format!("burst {i}"))?;
            if b.rate < 0.0 || !b.rate.is_finite() {
                return Err(Error::config(format!("burst {i} rate must be >= 0")));
            }
            for &e in &b.esa_steps {
                if !self.esa_steps.contains(&e) {
                    return Err(Error::config(format!(
                        "burst {i} declares ESA {e} not present in the arc"
                    )));
                }
            }
        }
        for (i, f) in self.fov_bands.iter().enumerate() {
            self.check_span(f.angle_span, f.time_span, &format!("fov band {i}"))?;
        }
        if let Some(span) = self.spun_span {
            if span.0 > span.1 || span.1 > self.n_time {
                return Err(Error::config(format!(
                    "spun span {span:?} out of bounds (n_time = {})",
                    self.n_time
                )));
            }
        }
        Ok(())
    }

    fn check_span(&self, angle: (u16, u16), time: (u32, u32), what: &str) -> Result<()> {
        if angle.0 > angle.1 || angle.1 as usize > ANGLE_BINS {
            return Err(Error::config(format!(
                "{what}: angle span {angle:?} out of bounds (0..{ANGLE_BINS})"
            )));
        }
        if time.0 > time.1 || time.1 > self.n_time {
            return Err(Error::config(format!(
                "{what}: time span {time:?} out of bounds (n_time = {})",
                self.n_time
            )));
        }
        Ok(())
    }
}

/// Close single-step gaps in a burst's declared ESA coverage: whenever
/// steps e-1 and e+1 are covered, step e is too. Iterates to a fixpoint.
fn effective_esa_coverage(declared: &[u8]) -> [bool; 7] {
    let mut covered = [false; 7]; // indexed by ESA value, 2..=6 used
    for &e in declared {
        covered[e as usize] = true;
    }
    loop {
        let mut changed = false;
        for e in 3..=5usize {
            if !covered[e] && covered[e - 1] && covered[e + 1] {
                covered[e] = true;
                changed = true;
            }
        }
        if !changed {
            return covered;
        }
    }
}

#[inline]
fn in_span2(angle: usize, t: u32, angle_span: (u16, u16), time_span: (u32, u32)) -> bool {
    (angle_span.0 as usize..angle_span.1 as usize).contains(&angle)
        && (time_span.0..time_span.1).contains(&t)
}

/// One simulated arc: the filled grid plus ground truth and the per-body
/// FOV mask actually injected.
#[derive(Debug, Clone)]
pub struct TruthLabeledArc {
    pub grid: ArcGrid,
    pub config: SimConfig,
    /// True where the cell is good (signal + isotropic only), indexed like
    /// the grid's cells.
    truth_good: Vec<bool>,
    /// Per (body, angle, time): true where that body's band covers the cell.
    fov_mask: Vec<bool>,
    injections: u64,
}

impl TruthLabeledArc {
    pub fn truth_good(&self, esa_pos: usize, angle: usize, t: usize) -> bool {
        self.truth_good[self.grid.cell_index(esa_pos, angle, t)]
    }

    pub fn fov_masked(&self, body: Body, angle: usize, t: usize) -> bool {
        let b = Body::ALL.iter().position(|&x| x == body).expect("body");
        self.fov_mask[(b * self.grid.angle_count() + angle) * self.grid.n_time() + t]
    }

    /// Cells flagged by any body's band, per (angle, time).
    pub fn fov_masked_any(&self, angle: usize, t: usize) -> bool {
        Body::ALL.iter().any(|&b| self.fov_masked(b, angle, t))
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.grid.flatten()
    }
}

struct RateModel<'a> {
    cfg: &'a SimConfig,
    burst_cover: Vec<[bool; 7]>,
    mean_signal: f64,
}

impl RateModel<'_> {
    /// Anisotropic (burst + band) rate added at a cell.
    fn anisotropic_rate(&self, esa: u8, angle: usize, t: u32) -> f64 {
        let mut rate = 0.0;
        for (b, cover) in self.cfg.bursts.iter().zip(&self.burst_cover) {
            if cover[esa as usize] && in_span2(angle, t, b.angle_span, b.time_span) {
                rate += b.rate;
            }
        }
        for band in &self.cfg.fov_bands {
            if in_span2(angle, t, band.angle_span, band.time_span) {
                rate += self.cfg.fov_band_rate;
            }
        }
        rate
    }

    fn is_spun(&self, t: u32) -> bool {
        self.cfg
            .spun_span
            .is_some_and(|(lo, hi)| (lo..hi).contains(&t))
    }

    /// Total Poisson rate at a cell. Spun columns lose angle structure, so
    /// the signal term flattens to the profile mean there.
    fn total_rate(&self, esa: u8, angle: usize, t: u32) -> f64 {
        let signal = if self.is_spun(t) {
            self.mean_signal
        } else {
            self.cfg.signal_profile[angle]
        };
        signal + self.cfg.isotropic_bg_rate + self.anisotropic_rate(esa, angle, t)
    }

    fn truth_bad(&self, esa: u8, angle: usize, t: u32) -> bool {
        if self.is_spun(t) {
            return true;
        }
        for (b, cover) in self.cfg.bursts.iter().zip(&self.burst_cover) {
            if cover[esa as usize] && in_span2(angle, t, b.angle_span, b.time_span) {
                return true;
            }
        }
        self.cfg
            .fov_bands
            .iter()
            .any(|band| in_span2(angle, t, band.angle_span, band.time_span))
    }
}

/// Generate one arc. Deterministic given `config.seed`.
pub fn simulate_arc(config: &SimConfig) -> Result<TruthLabeledArc> {
    config.validate()?;
    let mut stream = Stream::derive(
        config.seed,
        &[TAG_ARC, config.orbit as u64, config.arc as u64],
    );

    let n_time = config.n_time as usize;
    let mut esa_steps: Vec<EsaStep> = config
        .esa_steps
        .iter()
        .map(|&e| EsaStep::new(e))
        .collect::<Result<_>>()?;
    esa_steps.sort_unstable();
    esa_steps.dedup();

    // Interval durations first, cumulative epochs.
    let mut times = Vec::with_capacity(n_time);
    let mut epoch = config.start_epoch_s;
    for t in 0..n_time {
        let (lo, hi) = config.duration_range;
        let duration = if hi > lo { stream.next_range(lo, hi) } else { lo };
        times.push(TimeInterval {
            index: t as u32,
            start_epoch_s: epoch,
            duration_s: duration,
        });
        epoch += duration;
    }

    let model = RateModel {
        cfg: config,
        burst_cover: config
            .bursts
            .iter()
            .map(|b| effective_esa_coverage(&b.esa_steps))
            .collect(),
        mean_signal: config.signal_profile.iter().sum::<f64>() / ANGLE_BINS as f64,
    };

    let mut grid = ArcGrid::empty(
        OrbitArcId::new(config.orbit, config.arc),
        esa_steps.clone(),
        ANGLE_BINS,
        n_time,
    );
    let cells = esa_steps.len() * ANGLE_BINS * n_time;
    let mut truth_good = vec![true; cells];
    let mut fov_mask = vec![false; 3 * ANGLE_BINS * n_time];

    for band in &config.fov_bands {
        let b = Body::ALL.iter().position(|&x| x == band.target).expect("body");
        for angle in band.angle_span.0 as usize..band.angle_span.1 as usize {
            for t in band.time_span.0..band.time_span.1 {
                fov_mask[(b * ANGLE_BINS + angle) * n_time + t as usize] = true;
            }
        }
    }

    let arc_id = OrbitArcId::new(config.orbit, config.arc);
    // First pass: draw counts and monitors, record truth.
    for (epos, &esa) in esa_steps.iter().enumerate() {
        for angle in 0..ANGLE_BINS {
            for t in 0..n_time as u32 {
                let rate = model.total_rate(esa.value(), angle, t);
                let count = stream.poisson(rate) as u32;
                let aniso = model.anisotropic_rate(esa.value(), angle, t);
                let bg_low = stream
                    .poisson(config.monitor_base_low + config.monitor_coupling * aniso)
                    as u32;
                let bg_high = stream
                    .poisson(config.monitor_base_high + 0.5 * config.monitor_coupling * aniso)
                    as u32;
                let in_view = |body: Body| {
                    let b = Body::ALL.iter().position(|&x| x == body).expect("body");
                    fov_mask[(b * ANGLE_BINS + angle) * n_time + t as usize]
                };
                let earth_in_view = in_view(Body::Earth);
                let moon_in_view = in_view(Body::Moon);
                let sun_in_view = in_view(Body::Sun);
                let bad = model.truth_bad(esa.value(), angle, t);
                let obs = Observation {
                    arc: arc_id,
                    esa,
                    angle: AngleBin::new(angle as u8)?,
                    time: times[t as usize],
                    count,
                    bg_low,
                    bg_high,
                    earth_nv: !earth_in_view,
                    moon_nv: !moon_in_view,
                    sun_nv: !sun_in_view,
                    sme_label: None, // second pass
                    truth_label: Some(if bad { Label::Bad } else { Label::Good }),
                };
                grid.fill_cell(epos, angle, t as usize, &obs);
                truth_good[grid.cell_index(epos, angle, t as usize)] = !bad;
            }
        }
    }

    apply_sme_labels(&mut grid, &truth_good, config.sme_dilate_ratio);

    Ok(TruthLabeledArc {
        grid,
        config: config.clone(),
        truth_good,
        fov_mask,
        injections: 0,
    })
}

/// Emulated expert labels: every truth-bad cell is bad, and any (esa, time)
/// column whose truth-bad fraction exceeds `dilate_ratio` goes entirely bad.
fn apply_sme_labels(grid: &mut ArcGrid, truth_good: &[bool], dilate_ratio: f64) {
    let (ne, na, nt) = (grid.esa_steps().len(), grid.angle_count(), grid.n_time());
    for e in 0..ne {
        for t in 0..nt {
            let mut present = 0usize;
            let mut bad = 0usize;
            for a in 0..na {
                if grid.is_present(e, a, t) {
                    present += 1;
                    if !truth_good[grid.cell_index(e, a, t)] {
                        bad += 1;
                    }
                }
            }
            let dilate = present > 0 && bad as f64 / present as f64 > dilate_ratio;
            for a in 0..na {
                if grid.is_present(e, a, t) {
                    let cell_bad = dilate || !truth_good[grid.cell_index(e, a, t)];
                    let label = if cell_bad { Label::Bad } else { Label::Good };
                    grid.set_sme_label(e, a, t, Some(label));
                }
            }
        }
    }
}

/// Add a FOV band to an existing arc: band cells gain Poisson(band rate)
/// extra counts (Poisson additivity keeps the cell distribution exact),
/// the target's visibility flag drops, truth goes bad, and the mask is set.
///
/// An empty span (lo == hi) leaves the arc unchanged. Each injection draws
/// from its own derived stream, counted per arc.
pub fn inject_fov_band(
    mut arc: TruthLabeledArc,
    target: Body,
    angle_span: (u16, u16),
    time_span: (u32, u32),
) -> Result<TruthLabeledArc> {
    arc.config
        .check_span(angle_span, time_span, "injected fov band")?;
    let mut stream = Stream::derive(
        arc.config.seed,
        &[
            TAG_INJECT,
            arc.config.orbit as u64,
            arc.config.arc as u64,
            arc.injections,
        ],
    );
    arc.injections += 1;

    let b = Body::ALL.iter().position(|&x| x == target).expect("body");
    let (ne, nt) = (arc.grid.esa_steps().len(), arc.grid.n_time());
    for angle in angle_span.0 as usize..angle_span.1 as usize {
        for t in time_span.0 as usize..time_span.1 as usize {
            arc.fov_mask[(b * arc.grid.angle_count() + angle) * nt + t] = true;
            for e in 0..ne {
                if !arc.grid.is_present(e, angle, t) {
                    continue;
                }
                let extra = stream.poisson(arc.config.fov_band_rate) as u32;
                arc.grid.add_count(e, angle, t, extra);
                arc.grid.set_body_visibility(e, angle, t, target, false);
                arc.grid.set_truth_label(e, angle, t, Some(Label::Bad));
                arc.truth_good[arc.grid.cell_index(e, angle, t)] = false;
            }
        }
    }
    // Refresh emulated expert labels against the updated truth.
    let truth = arc.truth_good.clone();
    apply_sme_labels(&mut arc.grid, &truth, arc.config.sme_dilate_ratio);
    arc.fov_bands_recorded(target, angle_span, time_span);
    Ok(arc)
}

impl TruthLabeledArc {
    fn fov_bands_recorded(&mut self, target: Body, angle_span: (u16, u16), time_span: (u32, u32)) {
        self.config.fov_bands.push(FovBandSpec {
            target,
            angle_span,
            time_span,
        });
    }
}
