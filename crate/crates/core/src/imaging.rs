//! Grayscale frames, integral images and Haar-like features.
//!
//! Features are described in normalized patch coordinates and scaled to a
//! concrete patch size with [`HaarFeature::scale_to`]. A scaled feature keeps
//! pixel offsets relative to the patch origin, so evaluating it at many patch
//! positions of the same size is a handful of integral-image lookups.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ImagingError;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyFrame { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImagingError::PixelCount {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(ImagingError::NonFinite { index: i });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImagingError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn contains(&self, r: &Rect) -> bool {
        r.inside(self.width, self.height)
    }
}

/// Axis-aligned pixel box. `x`, `y` is the top-left corner (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0 && self.h > 0
    }

    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.is_valid()
            && self.x >= 0
            && self.y >= 0
            && (self.x as i64 + self.w as i64) <= width as i64
            && (self.y as i64 + self.h as i64) <= height as i64
    }

    pub fn area(&self) -> f64 {
        self.w as f64 * self.h as f64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn translate(&self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Intersection, or `None` when the boxes do not overlap.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }
}

/// Summed-area table with a zero first row and column.
#[derive(Clone, Debug)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    stride: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(frame: &Frame) -> Self {
        let (w, h) = (frame.width, frame.height);
        let stride = w + 1;
        let mut sums = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += frame.pixels[y * w + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { width: w, height: h, stride, sums }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Cumulative sum `S(i, j)` of all pixels with `x < i` and `y < j`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.sums[j * self.stride + i]
    }

    pub fn rect_sum(&self, r: &Rect) -> Result<f64, ImagingError> {
        if !r.inside(self.width, self.height) {
            return Err(ImagingError::OutOfBounds {
                rect: *r,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.sum_unchecked(r.x as usize, r.y as usize, r.w as usize, r.h as usize))
    }

    #[inline]
    fn sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        let s = self.stride;
        let top = y * s;
        let bottom = (y + h) * s;
        self.sums[bottom + x + w] - self.sums[bottom + x] - self.sums[top + x + w]
            + self.sums[top + x]
    }
}

/// Convenience wrapper matching the free-function form used in tests.
pub fn build_integral(frame: &Frame) -> IntegralImage {
    IntegralImage::new(frame)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HaarKind {
    /// Top half against bottom half.
    TwoRectHorizontal,
    /// Left half against right half.
    TwoRectVertical,
    /// Outer vertical strips against the middle strip.
    ThreeRect,
    /// 2x2 checkerboard.
    FourRect,
}

impl HaarKind {
    pub const ALL: [HaarKind; 4] = [
        HaarKind::TwoRectHorizontal,
        HaarKind::TwoRectVertical,
        HaarKind::ThreeRect,
        HaarKind::FourRect,
    ];

    /// Sub-rectangle grid (columns, rows) and per-cell weights in row-major order.
    fn layout(self) -> (usize, usize, &'static [f64]) {
        match self {
            HaarKind::TwoRectHorizontal => (1, 2, &[1.0, -1.0]),
            HaarKind::TwoRectVertical => (2, 1, &[1.0, -1.0]),
            HaarKind::ThreeRect => (3, 1, &[1.0, -2.0, 1.0]),
            HaarKind::FourRect => (2, 2, &[1.0, -1.0, -1.0, 1.0]),
        }
    }
}

/// A box in normalized `[0,1]²` patch coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HaarFeature {
    pub kind: HaarKind,
    pub unit_box: UnitBox,
}

/// One weighted pixel sub-rectangle, offset from the patch origin.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cell {
    dx: usize,
    dy: usize,
    w: usize,
    h: usize,
    weight: f64,
}

/// A feature bound to a concrete patch size.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledHaar {
    patch_w: usize,
    patch_h: usize,
    inv_area: f64,
    cells: Vec<Cell>,
}

impl HaarFeature {
    /// Per-sub-rectangle weights, row-major over the feature grid.
    pub fn weights(&self) -> &'static [f64] {
        self.kind.layout().2
    }

    /// Maps the feature to pixel sub-rectangles of a `patch_w × patch_h` patch.
    ///
    /// The box is snapped to the pixel grid and trimmed so every cell has the
    /// same pixel area, which keeps the weighted sum exactly zero-mean.
    pub fn scale_to(&self, patch_w: usize, patch_h: usize) -> Result<ScaledHaar, ImagingError> {
        let (cols, rows, weights) = self.kind.layout();
        let b = &self.unit_box;
        let x0 = (b.x * patch_w as f64).round() as usize;
        let y0 = (b.y * patch_h as f64).round() as usize;
        let x1 = ((b.x + b.w) * patch_w as f64).round().min(patch_w as f64) as usize;
        let y1 = ((b.y + b.h) * patch_h as f64).round().min(patch_h as f64) as usize;
        let cell_w = x1.saturating_sub(x0) / cols;
        let cell_h = y1.saturating_sub(y0) / rows;
        if cell_w == 0 || cell_h == 0 {
            return Err(ImagingError::DegenerateFeature { patch_w, patch_h });
        }
        let mut cells = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(Cell {
                    dx: x0 + c * cell_w,
                    dy: y0 + r * cell_h,
                    w: cell_w,
                    h: cell_h,
                    weight: weights[r * cols + c],
                });
            }
        }
        Ok(ScaledHaar {
            patch_w,
            patch_h,
            inv_area: 1.0 / (patch_w * patch_h) as f64,
            cells,
        })
    }

    /// Pixel sub-rectangles and weights for a concrete patch, for inspection and oracles.
    pub fn pixel_cells(&self, patch: &Rect) -> Result<Vec<(Rect, f64)>, ImagingError> {
        let scaled = self.scale_to(patch.w as usize, patch.h as usize)?;
        Ok(scaled
            .cells
            .iter()
            .map(|c| {
                (
                    Rect::new(
                        patch.x + c.dx as i32,
                        patch.y + c.dy as i32,
                        c.w as i32,
                        c.h as i32,
                    ),
                    c.weight,
                )
            })
            .collect())
    }
}

impl ScaledHaar {
    pub fn patch_size(&self) -> (usize, usize) {
        (self.patch_w, self.patch_h)
    }

    /// Response at patch origin `(x, y)`; the caller guarantees the patch is in bounds.
    #[inline]
    pub fn eval_at(&self, ii: &IntegralImage, x: usize, y: usize) -> f64 {
        let mut acc = 0.0;
        for c in &self.cells {
            acc += c.weight * ii.sum_unchecked(x + c.dx, y + c.dy, c.w, c.h);
        }
        acc * self.inv_area
    }

    pub fn eval(&self, ii: &IntegralImage, patch: &Rect) -> Result<f64, ImagingError> {
        if !patch.inside(ii.width, ii.height) {
            return Err(ImagingError::OutOfBounds {
                rect: *patch,
                width: ii.width,
                height: ii.height,
            });
        }
        if patch.w as usize != self.patch_w || patch.h as usize != self.patch_h {
            return Err(ImagingError::PatchSize {
                expected: (self.patch_w, self.patch_h),
                actual: (patch.w as usize, patch.h as usize),
            });
        }
        Ok(self.eval_at(ii, patch.x as usize, patch.y as usize))
    }
}

/// Weighted sum of sub-rectangle sums inside `patch`, normalized by patch area.
pub fn eval_haar(ii: &IntegralImage, f: &HaarFeature, patch: &Rect) -> Result<f64, ImagingError> {
    if !patch.is_valid() {
        return Err(ImagingError::OutOfBounds {
            rect: *patch,
            width: ii.width,
            height: ii.height,
        });
    }
    f.scale_to(patch.w as usize, patch.h as usize)?.eval(ii, patch)
}

/// Feature responses of one patch, one entry per pool member.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchFeatures {
    pub responses: Vec<f64>,
}

impl PatchFeatures {
    pub fn extract(ii: &IntegralImage, pool: &[ScaledHaar], patch: &Rect) -> Result<Self, ImagingError> {
        if !patch.inside(ii.width, ii.height) {
            return Err(ImagingError::OutOfBounds {
                rect: *patch,
                width: ii.width,
                height: ii.height,
            });
        }
        let (x, y) = (patch.x as usize, patch.y as usize);
        let responses = pool
            .iter()
            .map(|f| {
                debug_assert_eq!(f.patch_size(), (patch.w as usize, patch.h as usize));
                f.eval_at(ii, x, y)
            })
            .collect();
        Ok(Self { responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Draws one feature: kind uniform, box sides uniform in `[min_size, 1]`, position uniform.
pub fn random_feature<R: Rng + ?Sized>(rng: &mut R, min_size: f64) -> HaarFeature {
    let kind = HaarKind::ALL[rng.gen_range(0..HaarKind::ALL.len())];
    let w = rng.gen_range(min_size..=1.0);
    let h = rng.gen_range(min_size..=1.0);
    let x = rng.gen_range(0.0..=(1.0 - w));
    let y = rng.gen_range(0.0..=(1.0 - h));
    HaarFeature {
        kind,
        unit_box: UnitBox { x, y, w, h },
    }
}

/// Deterministic pool of `m` random features.
pub fn generate_feature_pool(seed: u64, m: usize, min_size: f64) -> Vec<HaarFeature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| random_feature(&mut rng, min_size)).collect()
}

/// Like [`generate_feature_pool`], but redraws features that degenerate at the
/// given patch size. Returns the features together with their scaled forms.
pub fn generate_scaled_pool(
    seed: u64,
    m: usize,
    min_size: f64,
    patch_w: usize,
    patch_h: usize,
) -> Result<(Vec<HaarFeature>, Vec<ScaledHaar>), ImagingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(m);
    let mut scaled = Vec::with_capacity(m);
    while features.len() < m {
        let (f, s) = draw_scaled(&mut rng, min_size, patch_w, patch_h)?;
        features.push(f);
        scaled.push(s);
    }
    Ok((features, scaled))
}

/// Draws until a feature maps to non-empty cells at the given patch size.
pub fn draw_scaled<R: Rng + ?Sized>(
    rng: &mut R,
    min_size: f64,
    patch_w: usize,
    patch_h: usize,
) -> Result<(HaarFeature, ScaledHaar), ImagingError> {
    const MAX_DRAWS: usize = 10_000;
    for _ in 0..MAX_DRAWS {
        let f = random_feature(rng, min_size);
        if let Ok(s) = f.scale_to(patch_w, patch_h) {
            return Ok((f, s));
        }
    }
    Err(ImagingError::DegenerateFeature { patch_w, patch_h })
}
