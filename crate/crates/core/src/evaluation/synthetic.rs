//! Synthetic sequences with exact ground truth.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imaging::{Frame, Rect};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MotionPath {
    Static,
    /// Constant speed with a slowly turning heading, reflected at the frame border.
    Bounce { speed: f64, turn_sigma: f64 },
}

/// A box covering part of the target over an inclusive frame range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Occlusion {
    pub first: usize,
    pub last: usize,
    /// Covered fraction of the target width, taken from the left edge.
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub target_size: usize,
    /// Side of the square texture cells of the target.
    pub texture_cell: usize,
    pub noise_sigma: f64,
    pub path: MotionPath,
    pub occlusion: Option<Occlusion>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Preset::Motion.spec(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Motion,
    Occlusion,
    Static,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Motion, Preset::Occlusion, Preset::Static];

    pub fn spec(self, seed: u64) -> SyntheticSpec {
        let base = SyntheticSpec {
            frames: 100,
            width: 160,
            height: 120,
            target_size: 30,
            texture_cell: 5,
            noise_sigma: 0.1,
            path: MotionPath::Bounce {
                speed: 3.5,
                turn_sigma: 0.25,
            },
            occlusion: None,
            seed,
        };
        match self {
            Preset::Motion => base,
            Preset::Occlusion => SyntheticSpec {
                occlusion: Some(Occlusion {
                    first: 40,
                    last: 60,
                    fraction: 0.5,
                }),
                ..base
            },
            Preset::Static => SyntheticSpec {
                frames: 51,
                path: MotionPath::Static,
                ..base
            },
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "motion" => Ok(Preset::Motion),
            "occlusion" => Ok(Preset::Occlusion),
            "static" => Ok(Preset::Static),
            other => Err(format!("unknown preset '{other}', expected motion, occlusion or static")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Motion => "motion",
            Preset::Occlusion => "occlusion",
            Preset::Static => "static",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSequence {
    pub frames: Vec<Frame>,
    pub ground_truth: Vec<Rect>,
    /// Occluder box per frame, if any.
    pub occluders: Vec<Option<Rect>>,
}

fn block_texture(rng: &mut ChaCha8Rng, size: usize, cell: usize) -> Vec<f64> {
    let cells = size.div_ceil(cell.max(1));
    let values: Vec<f64> = (0..cells * cells).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            out[y * size + x] = values[(y / cell) * cells + x / cell];
        }
    }
    out
}

fn path_positions(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<(i32, i32)> {
    let s = spec.target_size as f64;
    let (max_x, max_y) = ((spec.width as f64 - s).max(0.0), (spec.height as f64 - s).max(0.0));
    let (mut x, mut y) = (max_x / 2.0, max_y / 2.0);
    let mut out = Vec::with_capacity(spec.frames);
    match spec.path {
        MotionPath::Static => out.resize(spec.frames, (x.round() as i32, y.round() as i32)),
        MotionPath::Bounce { speed, turn_sigma } => {
            let turn = Normal::new(0.0, turn_sigma.max(0.0)).expect("finite sigma");
            let mut heading = rng.gen_range(0.0..std::f64::consts::TAU);
            for _ in 0..spec.frames {
                out.push((x.round() as i32, y.round() as i32));
                heading += turn.sample(rng);
                let (mut vx, mut vy) = (speed * heading.cos(), speed * heading.sin());
                if !(0.0..=max_x).contains(&(x + vx)) {
                    vx = -vx;
                }
                if !(0.0..=max_y).contains(&(y + vy)) {
                    vy = -vy;
                }
                heading = vy.atan2(vx);
                x = (x + vx).clamp(0.0, max_x);
                y = (y + vy).clamp(0.0, max_y);
            }
        }
    }
    out
}

/// Renders a textured square target over per-frame noise.
///
/// Frame pixels are `N(0.5, σ)` background, the target texture plus
/// `N(0, σ)`, and an occluder texture plus `N(0, σ)` where it applies; all
/// clamped to `[0, 1]`. The occluder moves with the target.
pub fn make_synthetic_sequence(spec: &SyntheticSpec) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let size = spec.target_size;
    let texture = block_texture(&mut rng, size, spec.texture_cell);
    let occluder_texture = block_texture(&mut rng, size, spec.texture_cell);
    let positions = path_positions(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("finite sigma");

    let mut frames = Vec::with_capacity(spec.frames);
    let mut ground_truth = Vec::with_capacity(spec.frames);
    let mut occluders = Vec::with_capacity(spec.frames);
    for (t, &(tx, ty)) in positions.iter().enumerate() {
        let target = Rect::new(tx, ty, size as i32, size as i32);
        let occluder = spec.occlusion.and_then(|o| {
            let covered = (o.fraction * size as f64).round() as i32;
            (o.first <= t && t <= o.last && covered > 0).then(|| Rect::new(tx, ty, covered, size as i32))
        });
        let mut pixels = Vec::with_capacity(spec.width * spec.height);
        for y in 0..spec.height as i32 {
            for x in 0..spec.width as i32 {
                let inside = |r: &Rect| x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h;
                let base = if occluder.as_ref().is_some_and(inside) {
                    occluder_texture[((y - ty) as usize) * size + (x - tx) as usize]
                } else if inside(&target) {
                    texture[((y - ty) as usize) * size + (x - tx) as usize]
                } else {
                    0.5
                };
                pixels.push((base + noise.sample(&mut rng)).clamp(0.0, 1.0));
            }
        }
        frames.push(Frame::new(spec.width, spec.height, pixels).expect("dimensions match"));
        ground_truth.push(target);
        occluders.push(occluder);
    }
    SyntheticSequence {
        frames,
        ground_truth,
        occluders,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(path: MotionPath, occlusion: Option<Occlusion>) -> SyntheticSpec {
        SyntheticSpec {
            frames: 70,
            width: 80,
            height: 60,
            target_size: 20,
            texture_cell: 4,
            noise_sigma: 0.1,
            path,
            occlusion,
            seed: 4,
        }
    }

    #[test]
    fn static_path_keeps_ground_truth() {
        let seq = make_synthetic_sequence(&small(MotionPath::Static, None));
        assert!(seq.ground_truth.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn motion_stays_in_frame_and_under_five_pixels() {
        let spec = Preset::Motion.spec(9);
        let seq = make_synthetic_sequence(&spec);
        assert_eq!(seq.frames.len(), 100);
        for r in &seq.ground_truth {
            assert!(r.inside(spec.width, spec.height));
        }
        for w in seq.ground_truth.windows(2) {
            let d = f64::from((w[1].x - w[0].x).pow(2) + (w[1].y - w[0].y).pow(2)).sqrt();
            assert!(d <= 5.0, "{d}");
        }
    }

    #[test]
    fn occluder_covers_half_the_target() {
        let occ = Occlusion { first: 40, last: 60, fraction: 0.5 };
        let seq = make_synthetic_sequence(&small(MotionPath::Bounce { speed: 3.0, turn_sigma: 0.2 }, Some(occ)));
        for (t, (gt, o)) in seq.ground_truth.iter().zip(&seq.occluders).enumerate() {
            match o {
                Some(o) => {
                    assert!((40..=60).contains(&t));
                    // pixel count of the covered part of the target
                    let mut covered = 0;
                    for y in gt.y..gt.y + gt.h {
                        for x in gt.x..gt.x + gt.w {
                            if x >= o.x && x < o.x + o.w && y >= o.y && y < o.y + o.h {
                                covered += 1;
                            }
                        }
                    }
                    let half = gt.area() / 2.0;
                    assert!((covered as f64 - half).abs() <= f64::from(gt.h), "{covered}");
                }
                None => assert!(!(40..=60).contains(&t)),
            }
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let a = make_synthetic_sequence(&small(MotionPath::Bounce { speed: 3.0, turn_sigma: 0.2 }, None));
        let b = make_synthetic_sequence(&small(MotionPath::Bounce { speed: 3.0, turn_sigma: 0.2 }, None));
        assert_eq!(a, b);
    }

    #[test]
    fn preset_names() {
        for p in Preset::ALL {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }
}
