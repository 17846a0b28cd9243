//! Translational search, training-sample generation and the per-frame loop.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{Ensemble, EnsembleConfig, UpdateReport};
use crate::error::TrackError;
use crate::imaging::{Frame, IntegralImage, Rect};
use crate::weak_learn::Label;

/// How classifier-mode training samples get their labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Fused confidence above the threshold means positive.
    #[default]
    Classifier,
    /// Label by sampling region.
    Geometric,
}

impl FromStr for LabelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classifier" => Ok(LabelMode::Classifier),
            "geometric" => Ok(LabelMode::Geometric),
            other => Err(format!("unknown label mode '{other}', expected classifier or geometric")),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::Classifier => "classifier",
            LabelMode::Geometric => "geometric",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    pub ensemble: EnsembleConfig,
    pub search_radius: f64,
    pub stride: usize,
    pub pos_radius: f64,
    pub neg_inner: f64,
    pub neg_outer: f64,
    pub neg_count: usize,
    pub label_mode: LabelMode,
    pub label_threshold: f64,
    /// Updates on geometric samples of the first frame before tracking.
    pub init_rounds: usize,
    /// Seeds the feature pools and sample draws.
    pub seed: u64,
    /// Solver dumps go to `seed<seed>/` below this directory.
    pub dump_dir: Option<PathBuf>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            ensemble: EnsembleConfig::default(),
            search_radius: 25.0,
            stride: 1,
            pos_radius: 4.0,
            neg_inner: 8.0,
            neg_outer: 50.0,
            neg_count: 50,
            label_mode: LabelMode::Classifier,
            label_threshold: 0.5,
            init_rounds: 5,
            seed: 0,
            dump_dir: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        self.ensemble.validate()?;
        let fail = |m: String| Err(TrackError::Config(m));
        if !(self.search_radius >= 0.0 && self.search_radius.is_finite()) {
            return fail(format!("search radius must be non-negative, got {}", self.search_radius));
        }
        if self.stride == 0 {
            return fail("stride must be at least 1".into());
        }
        if !(0.0 < self.pos_radius && self.pos_radius < self.neg_inner && self.neg_inner < self.neg_outer) {
            return fail(format!(
                "sampling radii must satisfy 0 < pos {} < inner {} < outer {}",
                self.pos_radius, self.neg_inner, self.neg_outer
            ));
        }
        if !self.neg_outer.is_finite() {
            return fail("outer negative radius must be finite".into());
        }
        if self.neg_count == 0 {
            return fail("need at least one negative sample".into());
        }
        if !(0.0..1.0).contains(&self.label_threshold) {
            return fail(format!("label threshold must lie in [0, 1), got {}", self.label_threshold));
        }
        Ok(())
    }
}

/// Integer offsets on the `stride` lattice with `inner < |d| <= outer`
/// (`inner < 0` admits the origin), dy outer and dx inner, ascending.
fn lattice_offsets(inner: f64, outer: f64, stride: usize) -> Vec<(i32, i32)> {
    let s = stride as i32;
    let steps = (outer / stride as f64).floor() as i32;
    let (in2, out2) = (inner * inner, outer * outer);
    let mut out = Vec::new();
    for ky in -steps..=steps {
        for kx in -steps..=steps {
            let (dx, dy) = (kx * s, ky * s);
            let d2 = f64::from(dx * dx + dy * dy);
            if d2 <= out2 && (inner < 0.0 || d2 > in2) {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn check_state(r: &Rect, width: usize, height: usize) -> Result<(), TrackError> {
    if r.is_valid() && r.inside(width, height) {
        Ok(())
    } else {
        Err(TrackError::State { rect: *r, width, height })
    }
}

/// Every in-frame translation of `prev` by a strided offset of length at most
/// `radius`, in scan order. Includes `prev` itself.
pub fn generate_candidates(
    prev: &Rect,
    radius: f64,
    stride: usize,
    width: usize,
    height: usize,
) -> Result<Vec<Rect>, TrackError> {
    check_state(prev, width, height)?;
    if stride == 0 || !(radius >= 0.0) {
        return Err(TrackError::Config(format!("invalid search radius {radius} or stride {stride}")));
    }
    Ok(lattice_offsets(-1.0, radius, stride)
        .into_iter()
        .map(|(dx, dy)| prev.translate(dx, dy))
        .filter(|r| r.inside(width, height))
        .collect())
}

/// Highest-scoring candidate. `score` returns `(ranking key, confidence)`;
/// the first candidate wins ties.
pub fn locate_by<E>(
    candidates: &[Rect],
    mut score: impl FnMut(&Rect) -> Result<(f64, f64), E>,
) -> Result<(Rect, f64), TrackError>
where
    TrackError: From<E>,
{
    let mut best: Option<(Rect, f64, f64)> = None;
    for c in candidates {
        let (key, conf) = score(c)?;
        if best.map_or(true, |(_, k, _)| key > k) {
            best = Some((*c, key, conf));
        }
    }
    best.map(|(r, _, c)| (r, c)).ok_or(TrackError::NoCandidates)
}

/// Candidate with the highest fused confidence.
pub fn locate(candidates: &[Rect], ensemble: &Ensemble, ii: &IntegralImage) -> Result<(Rect, f64), TrackError> {
    locate_by(candidates, |r| ensemble.score(ii, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabeledSample {
    pub location: Rect,
    pub label: Label,
    /// Sampling region the location was drawn from.
    pub origin: Origin,
}

impl LabeledSample {
    pub fn geometric_label(&self) -> Label {
        match self.origin {
            Origin::Positive => Label::Pos,
            Origin::Negative => Label::Neg,
        }
    }
}

/// Fraction of samples whose label disagrees with their region.
pub fn label_noise(samples: &[LabeledSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let wrong = samples.iter().filter(|s| s.label != s.geometric_label()).count();
    wrong as f64 / samples.len() as f64
}

/// Sampling positions around `center`: every strided offset within the
/// positive radius, then `neg_count` uniform draws from the in-frame annulus.
pub fn sample_positions<R: Rng + ?Sized>(
    center: &Rect,
    config: &TrackerConfig,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<Vec<(Rect, Origin)>, TrackError> {
    check_state(center, width, height)?;
    let mut out: Vec<(Rect, Origin)> = lattice_offsets(-1.0, config.pos_radius, config.stride)
        .into_iter()
        .map(|(dx, dy)| center.translate(dx, dy))
        .filter(|r| r.inside(width, height))
        .map(|r| (r, Origin::Positive))
        .collect();
    let annulus: Vec<Rect> = lattice_offsets(config.neg_inner, config.neg_outer, 1)
        .into_iter()
        .map(|(dx, dy)| center.translate(dx, dy))
        .filter(|r| r.inside(width, height))
        .collect();
    if annulus.is_empty() {
        return Err(TrackError::EmptyAnnulus {
            inner: config.neg_inner,
            outer: config.neg_outer,
        });
    }
    for _ in 0..config.neg_count {
        out.push((annulus[rng.gen_range(0..annulus.len())], Origin::Negative));
    }
    Ok(out)
}

/// Draws sample positions and labels them per `mode`.
pub fn generate_training_samples<R: Rng + ?Sized>(
    p_star: &Rect,
    config: &TrackerConfig,
    mode: LabelMode,
    ensemble: &Ensemble,
    ii: &IntegralImage,
    rng: &mut R,
) -> Result<Vec<LabeledSample>, TrackError> {
    let positions = sample_positions(p_star, config, ii.width(), ii.height(), rng)?;
    positions
        .into_iter()
        .map(|(location, origin)| {
            let label = match (mode, origin) {
                (LabelMode::Geometric, Origin::Positive) => Label::Pos,
                (LabelMode::Geometric, Origin::Negative) => Label::Neg,
                (LabelMode::Classifier, _) => {
                    if ensemble.confidence(ii, &location)? > config.label_threshold {
                        Label::Pos
                    } else {
                        Label::Neg
                    }
                }
            };
            Ok(LabeledSample { location, label, origin })
        })
        .collect()
}

/// Outcome of one tracked frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackStep {
    pub frame: usize,
    pub location: Rect,
    pub confidence: f64,
    /// Disagreement of training labels with sampling regions.
    pub label_noise: f64,
    /// The classifier produced a one-sided batch and region labels were used.
    pub geometric_fallback: bool,
    pub update: UpdateReport,
}

/// Single-object tracker state.
#[derive(Clone, Debug)]
pub struct Tracker {
    config: TrackerConfig,
    ensemble: Ensemble,
    location: Rect,
    frame_index: usize,
    rng: ChaCha8Rng,
}

impl Tracker {
    /// Builds the ensemble and trains it on region-labelled samples around
    /// `init` in the first frame.
    pub fn init(config: TrackerConfig, frame: &Frame, init: Rect) -> Result<Self, TrackError> {
        config.validate()?;
        check_state(&init, frame.width(), frame.height())?;
        let mut ens_cfg = config.ensemble.clone();
        ens_cfg.seed = config.seed;
        let mut ensemble = Ensemble::new(ens_cfg, init.w, init.h)?;
        ensemble.set_dump_dir(config.dump_dir.as_ref().map(|d| d.join(format!("seed{}", config.seed))));
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xA076_1D64_78BD_642F);
        let mut tracker = Self {
            config,
            ensemble,
            location: init,
            frame_index: 0,
            rng,
        };
        let ii = IntegralImage::new(frame);
        for _ in 0..tracker.config.init_rounds {
            let samples = generate_training_samples(
                &init,
                &tracker.config,
                LabelMode::Geometric,
                &tracker.ensemble,
                &ii,
                &mut tracker.rng,
            )?;
            tracker.train(&ii, &samples)?;
        }
        Ok(tracker)
    }

    pub fn location(&self) -> Rect {
        self.location
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn ensemble_mut(&mut self) -> &mut Ensemble {
        &mut self.ensemble
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    fn train(&mut self, ii: &IntegralImage, samples: &[LabeledSample]) -> Result<UpdateReport, TrackError> {
        let batch: Vec<(Rect, Label)> = samples.iter().map(|s| (s.location, s.label)).collect();
        Ok(self.ensemble.update(ii, &batch)?)
    }

    /// Search, localize, relabel and update on the next frame.
    pub fn track_frame(&mut self, frame: &Frame) -> Result<TrackStep, TrackError> {
        let ii = IntegralImage::new(frame);
        let candidates = generate_candidates(
            &self.location,
            self.config.search_radius,
            self.config.stride,
            frame.width(),
            frame.height(),
        )?;
        let (location, confidence) = locate(&candidates, &self.ensemble, &ii)?;
        self.location = location;
        self.frame_index += 1;

        let mut samples = generate_training_samples(
            &location,
            &self.config,
            self.config.label_mode,
            &self.ensemble,
            &ii,
            &mut self.rng,
        )?;
        let noise = label_noise(&samples);
        let one_sided = samples.iter().all(|s| s.label == samples[0].label);
        if one_sided {
            log::debug!("frame {}: one-sided classifier labels, using region labels", self.frame_index);
            for s in &mut samples {
                s.label = s.geometric_label();
            }
        }
        let update = self.train(&ii, &samples)?;
        Ok(TrackStep {
            frame: self.frame_index,
            location,
            confidence,
            label_noise: noise,
            geometric_fallback: one_sided,
            update,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_radius_is_the_previous_box() {
        let prev = Rect::new(10, 10, 5, 5);
        assert_eq!(generate_candidates(&prev, 0.0, 1, 40, 40).unwrap(), vec![prev]);
    }

    #[test]
    fn radius_five_interior_count() {
        // integer points with dx² + dy² <= 25, counted directly
        let mut count = 0;
        for dy in -5i32..=5 {
            for dx in -5i32..=5 {
                if dx * dx + dy * dy <= 25 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 81);
        let prev = Rect::new(20, 20, 10, 10);
        let c = generate_candidates(&prev, 5.0, 1, 100, 100).unwrap();
        assert_eq!(c.len(), 81);
        assert!(c.contains(&prev));
        assert_eq!(c[0], prev.translate(0, -5));
        // scan order: dy outer, dx inner
        for w in c.windows(2) {
            assert!((w[0].y, w[0].x) < (w[1].y, w[1].x));
        }
    }

    #[test]
    fn candidates_are_clipped() {
        let prev = Rect::new(0, 0, 10, 10);
        let c = generate_candidates(&prev, 6.0, 2, 30, 20).unwrap();
        assert!(c.iter().all(|r| r.inside(30, 20)));
        assert!(c.iter().all(|r| r.x % 2 == 0 && r.y % 2 == 0));
        assert!(matches!(
            generate_candidates(&Rect::new(25, 0, 10, 10), 3.0, 1, 30, 20),
            Err(TrackError::State { .. })
        ));
    }

    #[test]
    fn locate_ties_go_to_the_first() {
        let c = [Rect::new(0, 0, 1, 1), Rect::new(1, 0, 1, 1), Rect::new(2, 0, 1, 1)];
        let (r, conf) = locate_by(&c, |_| Ok::<_, TrackError>((0.5, 0.5))).unwrap();
        assert_eq!((r, conf), (c[0], 0.5));
        let (r, _) = locate_by(&c, |r| Ok::<_, TrackError>((-f64::from((r.x - 1).abs()), 0.0))).unwrap();
        assert_eq!(r, c[1]);
        assert!(matches!(
            locate_by(&[], |_| Ok::<_, TrackError>((0.0, 0.0))),
            Err(TrackError::NoCandidates)
        ));
    }

    #[test]
    fn sample_geometry() {
        let cfg = TrackerConfig::default();
        let center = Rect::new(60, 60, 20, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_positions(&center, &cfg, 200, 200, &mut rng).unwrap();
        let pos: Vec<_> = s.iter().filter(|x| x.1 == Origin::Positive).collect();
        assert_eq!(pos.len(), 49);
        assert!(pos.iter().any(|x| x.0 == center));
        let neg: Vec<_> = s.iter().filter(|x| x.1 == Origin::Negative).collect();
        assert_eq!(neg.len(), 50);
        for (r, _) in neg {
            let d = f64::from((r.x - center.x).pow(2) + (r.y - center.y).pow(2)).sqrt();
            assert!(d > 8.0 && d <= 50.0, "{d}");
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(s, sample_positions(&center, &cfg, 200, 200, &mut rng2).unwrap());
    }

    #[test]
    fn empty_annulus_is_an_error() {
        let cfg = TrackerConfig { neg_inner: 8.0, neg_outer: 9.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // the frame is exactly the box, so no translation fits
        let err = sample_positions(&Rect::new(0, 0, 10, 10), &cfg, 10, 10, &mut rng).unwrap_err();
        assert!(matches!(err, TrackError::EmptyAnnulus { .. }));
    }

    #[test]
    fn label_mode_parses() {
        assert_eq!("geometric".parse::<LabelMode>().unwrap(), LabelMode::Geometric);
        assert!("other".parse::<LabelMode>().is_err());
        assert_eq!(LabelMode::Classifier.to_string(), "classifier");
    }

    #[test]
    fn config_checks_radii() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = TrackerConfig { neg_inner: 3.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrackerConfig { stride: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
