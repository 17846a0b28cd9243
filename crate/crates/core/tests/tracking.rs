use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sparsetrack::evaluation::{center_error, track_sequence};
use sparsetrack::motion_sampling::{generate_candidates, TrackerConfig, Tracker};
use sparsetrack::{Frame, Rect};

/// Block-textured 30x30 square at `(x, y)` over a noisy background, with
/// texture and background fixed by `seed`.
fn scene(seed: u64, width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<f64> = (0..36).map(|_| rng.gen_range(0.0..1.0)).collect();
    let texture = (0..900).map(|i| cells[(i / 30 / 5) * 6 + (i % 30) / 5]).collect();
    let noise = Normal::new(0.5f64, 0.1).unwrap();
    let background = (0..width * height).map(|_| noise.sample(&mut rng).clamp(0.0, 1.0)).collect();
    (texture, background)
}

fn render(texture: &[f64], background: &[f64], width: usize, height: usize, x: i32, y: i32) -> Frame {
    Frame::from_fn(width, height, |px, py| {
        let (dx, dy) = (px as i32 - x, py as i32 - y);
        if (0..30).contains(&dx) && (0..30).contains(&dy) {
            texture[dy as usize * 30 + dx as usize]
        } else {
            background[py * width + px]
        }
    })
    .unwrap()
}

#[test]
fn identical_frames_do_not_drift() {
    let (w, h) = (120, 100);
    let (tex, bg) = scene(3, w, h);
    let frame = render(&tex, &bg, w, h, 45, 35);
    let frames = vec![frame; 51];
    let init = Rect::new(45, 35, 30, 30);
    let traj = track_sequence(&frames, init, &TrackerConfig::default(), |_| {}).unwrap();
    let worst = traj.iter().map(|p| center_error(&init, &p.rect)).fold(0.0, f64::max);
    println!("identical frames: worst drift {worst:.3} px");
    assert!(worst <= 1.0, "drifted {worst} px");
}

#[test]
fn constant_motion_is_followed() {
    let (w, h) = (200, 100);
    let (tex, bg) = scene(5, w, h);
    let frames: Vec<Frame> = (0..40).map(|t| render(&tex, &bg, w, h, 10 + 3 * t, 35)).collect();
    let gt: Vec<Rect> = (0..40).map(|t| Rect::new(10 + 3 * t, 35, 30, 30)).collect();
    let traj = track_sequence(&frames, gt[0], &TrackerConfig::default(), |_| {}).unwrap();
    let errors: Vec<f64> = traj.iter().map(|p| center_error(&gt[p.frame], &p.rect)).collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    println!("constant motion: worst error {worst:.3} px, errors {errors:.1?}");
    assert!(worst <= 3.0, "worst per-frame error {worst} px");
}

#[test]
fn each_step_stays_within_the_search_radius() {
    let (w, h) = (120, 100);
    let (tex, bg) = scene(8, w, h);
    let frames: Vec<Frame> = (0..8).map(|t| render(&tex, &bg, w, h, 20 + 4 * t, 30)).collect();
    let cfg = TrackerConfig { search_radius: 6.0, ..Default::default() };
    let mut tracker = Tracker::init(cfg, &frames[0], Rect::new(20, 30, 30, 30)).unwrap();
    for f in &frames[1..] {
        let prev = tracker.location();
        let step = tracker.track_frame(f).unwrap();
        let cands = generate_candidates(&prev, 6.0, 1, w, h).unwrap();
        assert!(cands.contains(&step.location));
    }
}

#[test]
fn same_seed_same_trajectory() {
    let (w, h) = (120, 100);
    let (tex, bg) = scene(2, w, h);
    let frames: Vec<Frame> = (0..10).map(|t| render(&tex, &bg, w, h, 30 + 2 * t, 30 + t)).collect();
    let cfg = TrackerConfig { seed: 9, ..Default::default() };
    let a = track_sequence(&frames, Rect::new(30, 30, 30, 30), &cfg, |_| {}).unwrap();
    let b = track_sequence(&frames, Rect::new(30, 30, 30, 30), &cfg, |_| {}).unwrap();
    assert_eq!(a, b);
}
