//! Run configuration: one TOML file drives every command.
//!
//! All tunables surface as named keys with their conventional defaults
//! (0.40 threshold, 250k training sample, 14-degree FOV, 12 Earth-radius
//! magnetosphere, 48 spins per sample, the six exposure-group bounds are
//! fixed in the library). Relative paths resolve against the process
//! working directory; outputs land in `out_dir`, overridable with the
//! `ENACULL_OUT_DIR` environment variable.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use enacull::forest::TrainConfig;
use enacull::fov::FovConfig;
use enacull::model::{ArcLetter, ANGLE_BINS};
use enacull::pipeline::PipelineConfig;
use enacull::rng::Stream;
use enacull::sim::{BurstSpec, FovBandSpec, SimConfig};

/// Stream tag for corpus expansion (per-arc randomized contamination).
const TAG_CORPUS: u64 = 0x434f5250; // "CORP"

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub observations: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub pointing: Option<PathBuf>,
    pub ephemeris: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_orbits: u32,
    pub first_orbit: u32,
    pub arcs_per_orbit: u8,
    pub n_time: u32,
    pub esa_steps: Vec<u8>,
    /// Per-angle signal profile: base + amplitude * sin(angle phase),
    /// clamped at zero.
    pub signal_base: f64,
    pub signal_amplitude: f64,
    pub isotropic_bg_rate: f64,
    /// Bursts per arc, drawn uniformly from this inclusive range.
    pub bursts_per_arc: (u32, u32),
    pub burst_rate: (f64, f64),
    pub burst_angle_extent: (u16, u16),
    pub burst_time_extent: (u32, u32),
    /// Consecutive ESA steps a burst spans (inclusive range).
    pub burst_esa_extent: (u8, u8),
    pub fov_band_probability: f64,
    pub fov_band_rate: f64,
    pub fov_band_angle_extent: (u16, u16),
    pub fov_band_time_extent: (u32, u32),
    pub spun_probability: f64,
    pub spun_time_extent: (u32, u32),
    pub monitor_coupling: f64,
    pub sme_dilate_ratio: f64,
    pub duration_range: (f64, f64),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_orbits: 5,
            first_orbit: 1,
            arcs_per_orbit: 2,
            n_time: 200,
            esa_steps: vec![2, 3, 4, 5, 6],
            signal_base: 3.5,
            signal_amplitude: 2.0,
            isotropic_bg_rate: 1.5,
            bursts_per_arc: (1, 4),
            burst_rate: (5.0, 14.0),
            burst_angle_extent: (18, 50),
            burst_time_extent: (12, 60),
            burst_esa_extent: (2, 5),
            fov_band_probability: 0.5,
            fov_band_rate: 12.0,
            fov_band_angle_extent: (2, 6),
            fov_band_time_extent: (20, 120),
            spun_probability: 0.2,
            spun_time_extent: (4, 12),
            monitor_coupling: 0.8,
            sme_dilate_ratio: 0.25,
            duration_range: (12.0, 450.0),
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n_orbits == 0 {
            return Err(enacull::Error::Config("n_orbits must be >= 1".into()).into());
        }
        if self.n_time == 0 {
            return Err(enacull::Error::Config("n_time must be >= 1".into()).into());
        }
        let spans: [(&str, (u64, u64)); 6] = [
            ("bursts_per_arc", (self.bursts_per_arc.0 as u64, self.bursts_per_arc.1 as u64)),
            (
                "burst_angle_extent",
                (self.burst_angle_extent.0 as u64, self.burst_angle_extent.1 as u64),
            ),
            (
                "burst_time_extent",
                (self.burst_time_extent.0 as u64, self.burst_time_extent.1 as u64),
            ),
            (
                "burst_esa_extent",
                (self.burst_esa_extent.0 as u64, self.burst_esa_extent.1 as u64),
            ),
            (
                "fov_band_angle_extent",
                (
                    self.fov_band_angle_extent.0 as u64,
                    self.fov_band_angle_extent.1 as u64,
                ),
            ),
            (
                "spun_time_extent",
                (self.spun_time_extent.0 as u64, self.spun_time_extent.1 as u64),
            ),
        ];
        for (name, (lo, hi)) in spans {
            if lo > hi {
                return Err(enacull::Error::Config(format!(
                    "{name} span ({lo}, {hi}) is inverted"
                ))
                .into());
            }
        }
        if self.burst_rate.0 > self.burst_rate.1 || self.burst_rate.0 < 0.0 {
            return Err(enacull::Error::Config(format!(
                "burst_rate span {:?} invalid",
                self.burst_rate
            ))
            .into());
        }
        Ok(())
    }

    pub fn orbits(&self) -> impl Iterator<Item = u32> + '_ {
        self.first_orbit..self.first_orbit + self.n_orbits
    }

    pub fn arcs(&self) -> Vec<ArcLetter> {
        if self.arcs_per_orbit >= 2 {
            vec![ArcLetter::A, ArcLetter::B]
        } else {
            vec![ArcLetter::A]
        }
    }

    /// Expand one (orbit, arc) into a concrete simulator config. All
    /// contamination geometry is drawn from a stream keyed by
    /// (seed, orbit, arc), independent of every other arc.
    pub fn arc_sim_config(&self, seed: u64, orbit: u32, arc: ArcLetter) -> SimConfig {
        let mut stream = Stream::derive(seed, &[TAG_CORPUS, orbit as u64, arc as u64]);
        let phase = orbit as f64;
        let signal_profile: Vec<f64> = (0..ANGLE_BINS)
            .map(|a| {
                let theta = a as f64 * std::f64::consts::TAU / ANGLE_BINS as f64 + phase;
                (self.signal_base + self.signal_amplitude * theta.sin()).max(0.0)
            })
            .collect();

        let draw_range_u32 = |s: &mut Stream, (lo, hi): (u32, u32)| {
            if hi > lo {
                lo + s.next_below((hi - lo + 1) as u64) as u32
            } else {
                lo
            }
        };

        let n_bursts = draw_range_u32(&mut stream, self.bursts_per_arc);
        let mut bursts = Vec::with_capacity(n_bursts as usize);
        for _ in 0..n_bursts {
            let extent_e = draw_range_u32(
                &mut stream,
                (self.burst_esa_extent.0 as u32, self.burst_esa_extent.1 as u32),
            ) as usize;
            let extent_e = extent_e.clamp(1, self.esa_steps.len());
            let start_e = stream.next_below((self.esa_steps.len() - extent_e + 1) as u64) as usize;
            let esa_steps: Vec<u8> = self.esa_steps[start_e..start_e + extent_e].to_vec();

            let extent_a = draw_range_u32(
                &mut stream,
                (self.burst_angle_extent.0 as u32, self.burst_angle_extent.1 as u32),
            )
            .min(ANGLE_BINS as u32) as u16;
            let start_a = stream.next_below((ANGLE_BINS as u32 - extent_a as u32 + 1) as u64) as u16;

            let extent_t = draw_range_u32(&mut stream, self.burst_time_extent).min(self.n_time);
            let start_t = stream.next_below((self.n_time - extent_t + 1) as u64) as u32;

            let rate = stream.next_range(self.burst_rate.0, self.burst_rate.1);
            bursts.push(BurstSpec {
                esa_steps,
                angle_span: (start_a, start_a + extent_a),
                time_span: (start_t, start_t + extent_t),
                rate,
            });
        }

        let mut fov_bands = Vec::new();
        if stream.next_f64() < self.fov_band_probability {
            let targets = [
                enacull::fov::Body::Earth,
                enacull::fov::Body::Moon,
                enacull::fov::Body::Sun,
            ];
            let target = targets[stream.next_below(3) as usize];
            let extent_a = draw_range_u32(
                &mut stream,
                (
                    self.fov_band_angle_extent.0 as u32,
                    self.fov_band_angle_extent.1 as u32,
                ),
            )
            .min(ANGLE_BINS as u32) as u16;
            let start_a = stream.next_below((ANGLE_BINS as u32 - extent_a as u32 + 1) as u64) as u16;
            let extent_t = draw_range_u32(&mut stream, self.fov_band_time_extent).min(self.n_time);
            let start_t = stream.next_below((self.n_time - extent_t + 1) as u64) as u32;
            fov_bands.push(FovBandSpec {
                target,
                angle_span: (start_a, start_a + extent_a),
                time_span: (start_t, start_t + extent_t),
            });
        }

        let spun_span = if stream.next_f64() < self.spun_probability {
            let extent = draw_range_u32(&mut stream, self.spun_time_extent).min(self.n_time);
            let start = stream.next_below((self.n_time - extent + 1) as u64) as u32;
            Some((start, start + extent))
        } else {
            None
        };

        SimConfig {
            seed,
            orbit,
            arc,
            n_time: self.n_time,
            esa_steps: self.esa_steps.clone(),
            signal_profile,
            isotropic_bg_rate: self.isotropic_bg_rate,
            bursts,
            fov_bands,
            fov_band_rate: self.fov_band_rate,
            spun_span,
            monitor_coupling: self.monitor_coupling,
            sme_dilate_ratio: self.sme_dilate_ratio,
            duration_range: self.duration_range,
            start_epoch_s: 0.0,
            ..SimConfig::default()
        }
    }
}

/// Which labels a rates/map/evaluate run reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    /// Expert labels straight from the observation table.
    Sme,
    /// Ground-truth labels from the observation table (synthetic data).
    Truth,
    /// Per-cell thresholded Stage-1 labels from cull output files.
    Stage1,
    /// Stage-2 labels from cull output files.
    Stage2,
    /// Final Stage-3 labels from cull output files.
    Stage3,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Sme => "sme",
            LabelSource::Truth => "truth",
            LabelSource::Stage1 => "stage1",
            LabelSource::Stage2 => "stage2",
            LabelSource::Stage3 => "stage3",
        }
    }

    pub fn stage(self) -> Option<u8> {
        match self {
            LabelSource::Stage1 => Some(1),
            LabelSource::Stage2 => Some(2),
            LabelSource::Stage3 => Some(3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub candidate: LabelSource,
    pub reference: LabelSource,
    pub alpha: f64,
    pub bonferroni: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            candidate: LabelSource::Stage3,
            reference: LabelSource::Sme,
            alpha: 0.01,
            bonferroni: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Half-year tag stamped on sky maps.
    pub map_tag: String,
    /// Label source used by `rates` and `map`.
    pub rates_source: LabelSource,
    pub isotropic_bg_override: Option<f64>,
    /// Also render maps as PGM images.
    pub render_maps: bool,
    /// Time range sampled by the `fov` command (seconds).
    pub fov_time_range: (f64, f64),
    pub paths: Paths,
    pub sim: CorpusConfig,
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
    pub fov: FovConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            map_tag: "2019B".into(),
            rates_source: LabelSource::Stage3,
            isotropic_bg_override: None,
            render_maps: false,
            fov_time_range: (0.0, 86_400.0),
            paths: Paths::default(),
            sim: CorpusConfig::default(),
            train: TrainConfig::default(),
            pipeline: PipelineConfig::default(),
            fov: FovConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| enacull::Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        if let Ok(dir) = std::env::var("ENACULL_OUT_DIR") {
            if !dir.is_empty() {
                config.out_dir = PathBuf::from(dir);
            }
        }
        // The run seed feeds training unless the config pinned one there.
        if config.train.seed == 0 {
            config.train.seed = config.seed;
        }
        Ok(config)
    }

    pub fn observations_path(&self) -> PathBuf {
        self.paths
            .observations
            .clone()
            .unwrap_or_else(|| self.out_dir.join("observations.csv"))
    }

    pub fn truth_path(&self) -> PathBuf {
        self.paths
            .truth
            .clone()
            .unwrap_or_else(|| self.out_dir.join("observations_truth.csv"))
    }

    pub fn geometry_path(&self) -> PathBuf {
        self.paths
            .geometry
            .clone()
            .unwrap_or_else(|| self.out_dir.join("geometry.csv"))
    }

    pub fn pointing_path(&self) -> PathBuf {
        self.paths
            .pointing
            .clone()
            .unwrap_or_else(|| self.out_dir.join("pointing.csv"))
    }

    pub fn ephemeris_path(&self) -> PathBuf {
        self.paths
            .ephemeris
            .clone()
            .unwrap_or_else(|| self.out_dir.join("ephemeris.csv"))
    }

    pub fn forest_path(&self, orbit: u32) -> PathBuf {
        self.out_dir.join(format!("forest_{orbit}.json"))
    }

    pub fn stage_labels_path(&self, orbit: u32, arc: ArcLetter, stage: u8) -> PathBuf {
        self.out_dir
            .join(format!("cull_{orbit}{}_stage{stage}.csv", arc.as_str()))
    }

    pub fn goodtimes_path(&self, orbit: u32, arc: ArcLetter) -> PathBuf {
        self.out_dir
            .join(format!("goodtimes_{orbit}{}.csv", arc.as_str()))
    }

    pub fn goodtimes_exceptions_path(&self, orbit: u32, arc: ArcLetter) -> PathBuf {
        self.out_dir
            .join(format!("goodtimes_{orbit}{}_exceptions.csv", arc.as_str()))
    }

    pub fn rates_path(&self, source: LabelSource) -> PathBuf {
        self.out_dir.join(format!("rates_{}.csv", source.as_str()))
    }

    pub fn map_paths(&self, source: LabelSource) -> (PathBuf, PathBuf) {
        let base = format!("map_{}_{}", self.map_tag, source.as_str());
        (
            self.out_dir.join(format!("{base}.values.csv")),
            self.out_dir.join(format!("{base}.exposure.csv")),
        )
    }
}
