//! Field-of-view exclusion: which spin bins are contaminated by the Sun,
//! Moon, or Earth (plus magnetosphere) at each sampled time.
//!
//! The detector sweeps the great circle perpendicular to the spin axis.
//! Spin bins are 6-degree sectors of that circle. Bin numbering is anchored
//! to the +z axis of the common inertial frame (taken as ecliptic north):
//! bin 0's center is the spin-plane direction with maximum +z component,
//! and azimuth increases right-handed about the spin axis. When the spin
//! axis is within 1e-9 of +/-z the anchor falls back to the +x projection.
//! This is a documented convention of this artifact, not a mission claim.
//!
//! A body whose direction lies farther from the spin plane than half the
//! FOV diameter (plus the Earth's magnetospheric extent) never enters the
//! sweep and excludes nothing. Otherwise the nearest bin plus every bin
//! whose center falls within that half-width of the body direction is
//! marked bad. Marking bin centers is slightly conservative for targets
//! out of the spin plane, which is accepted. Light-travel aberration is
//! ignored; ephemeris positions interpolate linearly between samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AngleBin, ANGLE_BINS};

const DEG_PER_BIN: f64 = 6.0;
const UNIT_TOL: f64 = 1e-6;

pub type Vec3 = [f64; 3];

#[inline]
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalize(a: Vec3) -> Result<Vec3> {
    let n = norm(a);
    if n < 1e-12 {
        return Err(Error::Geometry("cannot normalize zero vector".into()));
    }
    Ok(scale(a, 1.0 / n))
}

fn require_unit(v: Vec3, what: &str) -> Result<()> {
    if (norm(v) - 1.0).abs() > UNIT_TOL {
        return Err(Error::Geometry(format!(
            "{what} must be a unit vector (|v| = {})",
            norm(v)
        )));
    }
    Ok(())
}

/// Angular separation between two unit vectors, in degrees within [0, 180].
pub fn angular_separation(a: Vec3, b: Vec3) -> Result<f64> {
    require_unit(a, "first vector")?;
    require_unit(b, "second vector")?;
    Ok(dot(a, b).clamp(-1.0, 1.0).acos().to_degrees())
}

/// One spacecraft pointing entry from the maneuvering log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingRecord {
    pub valid_from_s: f64,
    pub spin_axis: Vec3,
}

impl PointingRecord {
    pub fn new(valid_from_s: f64, spin_axis: Vec3) -> Result<Self> {
        if (norm(spin_axis) - 1.0).abs() > 1e-9 {
            return Err(Error::Geometry(format!(
                "spin axis at t={valid_from_s} is not unit (|v| = {})",
                norm(spin_axis)
            )));
        }
        Ok(PointingRecord {
            valid_from_s,
            spin_axis,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    Sun,
    Earth,
    Moon,
}

impl Body {
    pub const ALL: [Body; 3] = [Body::Sun, Body::Earth, Body::Moon];

    pub fn as_str(self) -> &'static str {
        match self {
            Body::Sun => "sun",
            Body::Earth => "earth",
            Body::Moon => "moon",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sun" => Ok(Body::Sun),
            "earth" => Ok(Body::Earth),
            "moon" => Ok(Body::Moon),
            other => Err(Error::config(format!(
                "unknown target {other:?} (expected sun|earth|moon)"
            ))),
        }
    }
}

/// Position of a body relative to the spacecraft at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EphemerisSample {
    pub epoch_s: f64,
    pub position_km: Vec3,
    pub distance_km: f64,
}

impl EphemerisSample {
    pub fn new(epoch_s: f64, position_km: Vec3) -> Result<Self> {
        let distance_km = norm(position_km);
        if distance_km <= 0.0 {
            return Err(Error::Geometry(format!(
                "ephemeris sample at t={epoch_s} has zero distance"
            )));
        }
        Ok(EphemerisSample {
            epoch_s,
            position_km,
            distance_km,
        })
    }
}

/// Time-ordered ephemeris for one body.
#[derive(Debug, Clone)]
pub struct BodyEphemeris {
    pub body: Body,
    samples: Vec<EphemerisSample>,
}

impl BodyEphemeris {
    pub fn new(body: Body, samples: Vec<EphemerisSample>) -> Result<Self> {
        for w in samples.windows(2) {
            if w[1].epoch_s <= w[0].epoch_s {
                return Err(Error::Validation {
                    row: 0,
                    message: format!(
                        "{} ephemeris not strictly time-ordered at t={}",
                        body.as_str(),
                        w[1].epoch_s
                    ),
                });
            }
        }
        Ok(BodyEphemeris { body, samples })
    }

    pub fn samples(&self) -> &[EphemerisSample] {
        &self.samples
    }

    /// Unit direction and distance at `t`, linearly interpolated between the
    /// bracketing samples. Exact at sample epochs.
    pub fn direction_at(&self, t: f64) -> Result<(Vec3, f64)> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].epoch_s || t > s[s.len() - 1].epoch_s {
            return Err(Error::Coverage(format!(
                "no {} ephemeris bracketing t={t}",
                self.body.as_str()
            )));
        }
        let hi = s.partition_point(|x| x.epoch_s < t);
        if hi < s.len() && s[hi].epoch_s == t {
            return Ok((normalize(s[hi].position_km)?, s[hi].distance_km));
        }
        let (a, b) = (&s[hi - 1], &s[hi]);
        let f = (t - a.epoch_s) / (b.epoch_s - a.epoch_s);
        let pos = [
            a.position_km[0] + f * (b.position_km[0] - a.position_km[0]),
            a.position_km[1] + f * (b.position_km[1] - a.position_km[1]),
            a.position_km[2] + f * (b.position_km[2] - a.position_km[2]),
        ];
        let dist = norm(pos);
        if dist <= 0.0 {
            return Err(Error::Geometry(format!(
                "interpolated {} position degenerate at t={t}",
                self.body.as_str()
            )));
        }
        Ok((scale(pos, 1.0 / dist), dist))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FovConfig {
    pub fov_diameter_deg: f64,
    pub magnetosphere_radius_re: f64,
    pub earth_radius_km: f64,
    pub spins_per_sample: u32,
    pub spin_period_s: f64,
}

impl Default for FovConfig {
    fn default() -> Self {
        FovConfig {
            fov_diameter_deg: 14.0,
            magnetosphere_radius_re: 12.0,
            earth_radius_km: 6371.0,
            spins_per_sample: 48,
            spin_period_s: 15.0,
        }
    }
}

impl FovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fov_diameter_deg <= 0.0
            || self.magnetosphere_radius_re <= 0.0
            || self.earth_radius_km <= 0.0
            || self.spins_per_sample == 0
            || self.spin_period_s <= 0.0
        {
            return Err(Error::config("all FOV parameters must be positive"));
        }
        Ok(())
    }

    /// Angular half-width excluded around a body: half the FOV diameter plus
    /// the magnetospheric extent for Earth (point source otherwise).
    pub fn exclusion_half_width_deg(&self, body: Body, distance_km: f64) -> f64 {
        let extent = match body {
            Body::Earth => {
                let r = self.magnetosphere_radius_re * self.earth_radius_km;
                (r / distance_km).min(1.0).asin().to_degrees()
            }
            Body::Sun | Body::Moon => 0.0,
        };
        self.fov_diameter_deg / 2.0 + extent
    }
}

/// Orthonormal in-plane basis (bin-0 center, azimuth-90 direction) for a
/// spin axis. See the module docs for the anchoring convention.
fn spin_plane_basis(spin_axis: Vec3) -> Result<(Vec3, Vec3)> {
    require_unit(spin_axis, "spin axis")?;
    let north = [0.0, 0.0, 1.0];
    let mut proj = sub(north, scale(spin_axis, dot(north, spin_axis)));
    if norm(proj) < 1e-9 {
        let x = [1.0, 0.0, 0.0];
        proj = sub(x, scale(spin_axis, dot(x, spin_axis)));
    }
    let e1 = normalize(proj)?;
    let e2 = normalize(cross(spin_axis, e1))?;
    Ok((e1, e2))
}

/// Azimuth of a direction about the spin axis, degrees in [0, 360).
fn spin_azimuth_deg(target: Vec3, e1: Vec3, e2: Vec3) -> f64 {
    let az = f64::atan2(dot(target, e2), dot(target, e1)).to_degrees();
    if az < 0.0 {
        az + 360.0
    } else {
        az
    }
}

#[inline]
fn circular_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// The spin bin whose center direction is nearest the target.
///
/// At an exact half-bin boundary the lower bin index wins (identical to a
/// 0..59 scan keeping strict improvements). Targets within 1e-6 rad of the
/// spin axis have no defined azimuth and are rejected.
pub fn nearest_spin_bin(target: Vec3, spin_axis: Vec3) -> Result<AngleBin> {
    require_unit(target, "target")?;
    let sep = angular_separation(target, spin_axis)?;
    let off_axis = sep.min(180.0 - sep).to_radians();
    if off_axis < 1e-6 {
        return Err(Error::Geometry(
            "target is parallel to the spin axis; azimuth undefined".into(),
        ));
    }
    let (e1, e2) = spin_plane_basis(spin_axis)?;
    let az = spin_azimuth_deg(target, e1, e2);
    let q = az / DEG_PER_BIN;
    let lower = q.floor() as usize % ANGLE_BINS;
    let frac = q - q.floor();
    let upper = (lower + 1) % ANGLE_BINS;
    let pick = if frac > 0.5 {
        upper
    } else if frac < 0.5 {
        lower
    } else {
        lower.min(upper)
    };
    AngleBin::new(pick as u8)
}

fn active_pointing(pointings: &[PointingRecord], t: f64) -> Result<&PointingRecord> {
    let idx = pointings.partition_point(|p| p.valid_from_s <= t);
    if idx == 0 {
        return Err(Error::Coverage(format!("no pointing record covers t={t}")));
    }
    Ok(&pointings[idx - 1])
}

/// Spin bins contaminated by `body` at `time`.
///
/// Returns the empty set when the body sits farther from the spin-plane
/// sweep than the exclusion half-width; otherwise the nearest bin plus all
/// bins whose centers lie within the half-width of the body direction.
/// `pointings` must be time-sorted and de-duplicated (see [`build_masks`]).
pub fn mark_bad_bins(
    time: f64,
    body: Body,
    pointings: &[PointingRecord],
    ephemeris: &BodyEphemeris,
    config: &FovConfig,
) -> Result<Vec<AngleBin>> {
    let axis = active_pointing(pointings, time)?.spin_axis;
    let (dir, distance) = ephemeris.direction_at(time)?;
    let half_width = config.exclusion_half_width_deg(body, distance);

    let sep_axis = angular_separation(dir, axis)?;
    let elevation = (90.0 - sep_axis).abs();
    if elevation > half_width {
        return Ok(Vec::new());
    }

    let nearest = nearest_spin_bin(dir, axis)?;
    let (e1, e2) = spin_plane_basis(axis)?;
    let target_az = spin_azimuth_deg(dir, e1, e2);

    // A bin center c at azimuth offset da satisfies
    //   cos(sep(c, dir)) = cos(elevation) * cos(da),
    // so the in-FOV condition sep <= half_width becomes
    //   cos(da) >= cos(half_width) / cos(elevation).
    let cos_e = elevation.to_radians().cos();
    let ratio = half_width.to_radians().cos() / cos_e;
    let mut bad = vec![nearest];
    if ratio <= 1.0 {
        let max_da = ratio.clamp(-1.0, 1.0).acos().to_degrees();
        for bin in 0..ANGLE_BINS {
            let center_az = bin as f64 * DEG_PER_BIN;
            if circular_diff_deg(center_az, target_az) <= max_da {
                bad.push(AngleBin::new(bin as u8)?);
            }
        }
    }
    bad.sort_unstable();
    bad.dedup();
    Ok(bad)
}

/// Per-sample exclusion sets for every body, plus the merged good-bin list.
#[derive(Debug, Clone)]
pub struct MaskSample {
    pub epoch_s: f64,
    bad: [Vec<AngleBin>; 3],
    pub merged_good: Vec<AngleBin>,
}

impl MaskSample {
    pub fn bad_bins(&self, body: Body) -> &[AngleBin] {
        let i = Body::ALL.iter().position(|&b| b == body).expect("body in ALL");
        &self.bad[i]
    }
}

#[derive(Debug, Clone)]
pub struct ExclusionMask {
    pub samples: Vec<MaskSample>,
}

/// Validate and de-duplicate a pointing log: sorted by validity epoch,
/// exact duplicates collapsed, conflicting duplicates rejected.
pub fn prepare_pointings(records: &[PointingRecord]) -> Result<Vec<PointingRecord>> {
    if records.is_empty() {
        return Err(Error::Coverage("pointing log is empty".into()));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| {
        a.valid_from_s
            .partial_cmp(&b.valid_from_s)
            .expect("finite epochs")
    });
    let mut out: Vec<PointingRecord> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match out.last() {
            Some(prev) if prev.valid_from_s == r.valid_from_s => {
                if prev.spin_axis != r.spin_axis {
                    return Err(Error::Validation {
                        row: 0,
                        message: format!(
                            "conflicting pointing records at t={}",
                            r.valid_from_s
                        ),
                    });
                }
                // exact duplicate maneuver entry: collapse
            }
            _ => out.push(r),
        }
    }
    Ok(out)
}

/// Evaluate the FOV filter over evenly spaced sample times.
///
/// Cadence is `spins_per_sample * spin_period_s`; samples run from
/// `time_range.0` up to and including any sample that lands on or before
/// `time_range.1`. Bodies present in `ephemerides` are checked; each must
/// bracket every sample time.
pub fn build_masks(
    pointings: &[PointingRecord],
    ephemerides: &[BodyEphemeris],
    config: &FovConfig,
    time_range: (f64, f64),
) -> Result<ExclusionMask> {
    config.validate()?;
    let pointings = prepare_pointings(pointings)?;
    if time_range.1 < time_range.0 {
        return Err(Error::config(format!(
            "time range end {} precedes start {}",
            time_range.1, time_range.0
        )));
    }
    let cadence = config.spins_per_sample as f64 * config.spin_period_s;
    let n_samples = ((time_range.1 - time_range.0) / cadence).floor() as usize + 1;

    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = time_range.0 + i as f64 * cadence;
        let mut bad: [Vec<AngleBin>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (slot, &body) in Body::ALL.iter().enumerate() {
            if let Some(eph) = ephemerides.iter().find(|e| e.body == body) {
                bad[slot] = mark_bad_bins(t, body, &pointings, eph, config)?;
            }
        }
        let mut is_bad = [false; ANGLE_BINS];
        for set in &bad {
            for b in set {
                is_bad[b.index()] = true;
            }
        }
        let merged_good = (0..ANGLE_BINS)
            .filter(|&i| !is_bad[i])
            .map(|i| AngleBin::new(i as u8).expect("in range"))
            .collect();
        samples.push(MaskSample {
            epoch_s: t,
            bad,
            merged_good,
        });
    }
    Ok(ExclusionMask { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z: Vec3 = [0.0, 0.0, 1.0];
    const X: Vec3 = [1.0, 0.0, 0.0];
    const Y: Vec3 = [0.0, 1.0, 0.0];

    fn unit(v: Vec3) -> Vec3 {
        normalize(v).unwrap()
    }

    /// Direction at a given azimuth (degrees) in the spin plane of `axis`.
    fn in_plane_dir(axis: Vec3, az_deg: f64) -> Vec3 {
        let (e1, e2) = spin_plane_basis(axis).unwrap();
        let r = az_deg.to_radians();
        unit([
            e1[0] * r.cos() + e2[0] * r.sin(),
            e1[1] * r.cos() + e2[1] * r.sin(),
            e1[2] * r.cos() + e2[2] * r.sin(),
        ])
    }

    #[test]
    fn separation_identity_and_orthogonal() {
        assert_eq!(angular_separation(X, X).unwrap(), 0.0);
        assert!((angular_separation(X, Y).unwrap() - 90.0).abs() < 1e-12);
        assert!((angular_separation(X, Z).unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn separation_45_degrees() {
        let b = unit([1.0, 1.0, 0.0]);
        let got = angular_separation(X, b).unwrap();
        assert!((got - 45.0).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn separation_is_symmetric() {
        let a = unit([0.3, -0.2, 0.9]);
        let b = unit([-0.5, 0.7, 0.1]);
        assert_eq!(
            angular_separation(a, b).unwrap(),
            angular_separation(b, a).unwrap()
        );
    }

    #[test]
    fn separation_rejects_non_unit() {
        assert!(angular_separation([2.0, 0.0, 0.0], X).is_err());
    }

    #[test]
    fn bin_zero_anchor() {
        // Spin axis along +x: bin 0's center is the projection of +z = +z.
        let bin = nearest_spin_bin(Z, X).unwrap();
        assert_eq!(bin.index(), 0);
    }

    #[test]
    fn rotating_six_degrees_advances_one_bin() {
        let axis = unit([0.2, 0.5, 0.1]);
        for k in 0..60 {
            let dir = in_plane_dir(axis, k as f64 * 6.0);
            assert_eq!(nearest_spin_bin(dir, axis).unwrap().index(), k, "k={k}");
        }
    }

    #[test]
    fn azimuth_93_ties_to_lower_bin() {
        let axis = X;
        let dir = in_plane_dir(axis, 93.0);
        // 93 / 6 = 15.5: equidistant between bins 15 and 16, lower index wins.
        assert_eq!(nearest_spin_bin(dir, axis).unwrap().index(), 15);
    }

    #[test]
    fn axis_parallel_target_is_degenerate() {
        assert!(nearest_spin_bin(X, X).is_err());
    }

    #[test]
    fn far_body_marks_nothing() {
        let cfg = FovConfig::default();
        let pointings = vec![PointingRecord::new(0.0, X).unwrap()];
        // Moon 90 degrees from the spin plane (along the axis direction,
        // but slightly tilted to keep the azimuth defined is unnecessary:
        // elevation check fires first).
        let eph = BodyEphemeris::new(
            Body::Moon,
            vec![
                EphemerisSample::new(0.0, [384_400.0, 0.0, 0.0]).unwrap(),
                EphemerisSample::new(1000.0, [384_400.0, 0.0, 0.0]).unwrap(),
            ],
        )
        .unwrap();
        let bad = mark_bad_bins(500.0, Body::Moon, &pointings, &eph, &cfg).unwrap();
        assert!(bad.is_empty());
    }

    #[test]
    fn point_body_at_bin_center_marks_neighbors() {
        let cfg = FovConfig::default(); // 14 deg FOV -> half width 7 deg
        let axis = X;
        let pointings = vec![PointingRecord::new(0.0, axis).unwrap()];
        let dir = in_plane_dir(axis, 30.0); // exactly bin 5's center
        let eph = BodyEphemeris::new(
            Body::Moon,
            vec![
                EphemerisSample::new(0.0, scale(dir, 384_400.0)).unwrap(),
                EphemerisSample::new(1000.0, scale(dir, 384_400.0)).unwrap(),
            ],
        )
        .unwrap();
        let bad = mark_bad_bins(0.0, Body::Moon, &pointings, &eph, &cfg).unwrap();
        let got: Vec<usize> = bad.iter().map(|b| b.index()).collect();
        assert_eq!(got, vec![4, 5, 6]);
    }

    #[test]
    fn magnetosphere_widens_earth_arc() {
        let cfg = FovConfig::default();
        // Distance where 12 R_E subtends 10 degrees.
        let dist = 12.0 * cfg.earth_radius_km / (10.0f64).to_radians().sin();
        let half = cfg.exclusion_half_width_deg(Body::Earth, dist);
        assert!((half - 17.0).abs() < 1e-9, "got {half}");
        let point = cfg.exclusion_half_width_deg(Body::Moon, dist);
        assert!((point - 7.0).abs() < 1e-12);
    }

    #[test]
    fn earth_arc_is_superset_of_point_arc() {
        let cfg = FovConfig::default();
        let axis = unit([0.1, 0.9, 0.2]);
        let pointings = vec![PointingRecord::new(0.0, axis).unwrap()];
        let dir = in_plane_dir(axis, 200.0);
        let pos = scale(dir, 50_000.0);
        let earth_eph = BodyEphemeris::new(
            Body::Earth,
            vec![
                EphemerisSample::new(0.0, pos).unwrap(),
                EphemerisSample::new(10.0, pos).unwrap(),
            ],
        )
        .unwrap();
        let moon_eph = BodyEphemeris::new(
            Body::Moon,
            vec![
                EphemerisSample::new(0.0, pos).unwrap(),
                EphemerisSample::new(10.0, pos).unwrap(),
            ],
        )
        .unwrap();
        let earth_bad = mark_bad_bins(5.0, Body::Earth, &pointings, &earth_eph, &cfg).unwrap();
        let moon_bad = mark_bad_bins(5.0, Body::Moon, &pointings, &moon_eph, &cfg).unwrap();
        for b in &moon_bad {
            assert!(earth_bad.contains(b));
        }
        assert!(earth_bad.len() > moon_bad.len());
    }

    #[test]
    fn duplicate_pointing_records_collapse() {
        let r = PointingRecord::new(0.0, X).unwrap();
        let deduped = prepare_pointings(&[r, r, r]).unwrap();
        assert_eq!(deduped.len(), 1);
    }

    #[test]
    fn conflicting_pointing_records_rejected() {
        let a = PointingRecord::new(0.0, X).unwrap();
        let b = PointingRecord::new(0.0, Y).unwrap();
        assert!(prepare_pointings(&[a, b]).is_err());
    }

    #[test]
    fn build_masks_merges_and_wraps() {
        let cfg = FovConfig::default();
        let axis = X;
        let pointings = vec![PointingRecord::new(0.0, axis).unwrap()];
        // Body straddling the bin 59/0 seam (azimuth 1 degree).
        let dir = in_plane_dir(axis, 1.0);
        let eph = BodyEphemeris::new(
            Body::Moon,
            vec![
                EphemerisSample::new(0.0, scale(dir, 384_400.0)).unwrap(),
                EphemerisSample::new(100_000.0, scale(dir, 384_400.0)).unwrap(),
            ],
        )
        .unwrap();
        let mask = build_masks(&pointings, &[eph], &cfg, (0.0, 1440.0)).unwrap();
        assert_eq!(mask.samples.len(), 3); // cadence 720 s: t = 0, 720, 1440
        let s = &mask.samples[0];
        let bad: Vec<usize> = s.bad_bins(Body::Moon).iter().map(|b| b.index()).collect();
        assert_eq!(bad, vec![0, 1, 59]);
        assert_eq!(s.merged_good.len(), 57);
        assert!(s.merged_good.iter().all(|b| !bad.contains(&b.index())));
    }

    #[test]
    fn no_bracketing_ephemeris_is_coverage_error() {
        let cfg = FovConfig::default();
        let pointings = vec![PointingRecord::new(0.0, X).unwrap()];
        let eph = BodyEphemeris::new(
            Body::Sun,
            vec![EphemerisSample::new(100.0, [1.0e8, 0.0, 0.0]).unwrap()],
        )
        .unwrap();
        let err = mark_bad_bins(50.0, Body::Sun, &pointings, &eph, &cfg).unwrap_err();
        assert!(matches!(err, Error::Coverage(_)));
    }
}
