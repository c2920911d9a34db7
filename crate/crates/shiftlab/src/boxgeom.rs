//! Box representations and pairwise box arithmetic.
//!
//! Everything here is pure: boxes are immutable after construction and all
//! similarity functions are plain `f64 -> f64` math, safe to call from any
//! thread. Coordinates are continuous pixel units in center form; nothing is
//! ever snapped to an integer grid because corrections are sub-pixel.

use crate::error::{Error, Result};

/// Axis-aligned box in center form `(cx, cy, w, h)`.
///
/// Extents are strictly positive and all fields finite; this is enforced at
/// construction so downstream similarity code never sees a degenerate box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxH {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

impl BoxH {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite())
            || w <= 0.0
            || h <= 0.0
        {
            return Err(Error::InvalidBox { cx, cy, w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Build from corner form `(x0, y0, x1, y1)`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    /// Corner form `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same extents, new center.
    pub fn with_center(&self, cx: f64, cy: f64) -> Result<Self> {
        Self::new(cx, cy, self.w, self.h)
    }

    /// Translate by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }

    /// True when `(x, y)` lies inside the box (borders inclusive).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }
}

/// A box with a category id attached. Categories are small dense indices;
/// mapping from string labels happens at the file boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledBox {
    pub bbox: BoxH,
    pub category: usize,
}

impl LabeledBox {
    pub fn new(bbox: BoxH, category: usize) -> Self {
        Self { bbox, category }
    }
}

/// Which pairwise box similarity to use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimilarityKind {
    Iou,
    Giou,
    /// `exp(-W2 / C)` on box-fitted Gaussians. `c: None` selects the
    /// scale-adaptive default `C = (area_a * area_b)^(1/4)`, which keeps the
    /// value invariant when both boxes and their separation are scaled
    /// together. A fixed `c` must be positive.
    GaussianWasserstein {
        c: Option<f64>,
    },
}

impl SimilarityKind {
    /// Gaussian-Wasserstein with the scale-adaptive normalization.
    pub fn gw_adaptive() -> Self {
        SimilarityKind::GaussianWasserstein { c: None }
    }

    /// Evaluate this similarity on a pair of boxes.
    pub fn eval(&self, a: BoxH, b: BoxH) -> f64 {
        match *self {
            SimilarityKind::Iou => iou(a, b),
            SimilarityKind::Giou => giou(a, b),
            SimilarityKind::GaussianWasserstein { c } => {
                let c = c.unwrap_or_else(|| (a.area() * b.area()).sqrt().sqrt());
                gw_similarity(a, b, c)
            }
        }
    }

    /// Lower bound of the similarity range (0 except for GIoU's -1).
    pub fn floor(&self) -> f64 {
        match self {
            SimilarityKind::Giou => -1.0,
            _ => 0.0,
        }
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: BoxH, b: BoxH) -> f64 {
    let (inter, union, _) = overlap_terms(a, b);
    inter / union
}

/// Generalized IoU, in `[-1, 1]`: IoU minus the fraction of the enclosing
/// hull not covered by the union.
pub fn giou(a: BoxH, b: BoxH) -> f64 {
    let (inter, union, hull) = overlap_terms(a, b);
    inter / union - (hull - union) / hull
}

// Every term comes from the same corner-derived extents, so identical boxes
// give inter == union == hull and the identity cases are exact.
fn overlap_terms(a: BoxH, b: BoxH) -> (f64, f64, f64) {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let area_a = (ax1 - ax0) * (ay1 - ay0);
    let area_b = (bx1 - bx0) * (by1 - by0);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = area_a + area_b - inter;
    let hull = (ax1.max(bx1) - ax0.min(bx0)) * (ay1.max(by1) - ay0.min(by0));
    (inter, union, hull)
}

/// 2-Wasserstein distance between the Gaussians fitted to two boxes,
/// `N(center, diag((w/2)^2, (h/2)^2))`. For diagonal covariances this has the
/// closed form `sqrt(|mu_a - mu_b|^2 + ((w_a - w_b)/2)^2 + ((h_a - h_b)/2)^2)`.
pub fn gaussian_w2(a: BoxH, b: BoxH) -> f64 {
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    let dw = (a.w - b.w) / 2.0;
    let dh = (a.h - b.h) / 2.0;
    (dx * dx + dy * dy + dw * dw + dh * dh).sqrt()
}

/// Gaussian-Wasserstein similarity `exp(-W2 / C)`, in `(0, 1]`.
///
/// Equals 1 exactly when the boxes coincide and decays smoothly with center
/// distance and size difference, which keeps it informative for boxes too
/// small to overlap.
pub fn gw_similarity(a: BoxH, b: BoxH, c: f64) -> f64 {
    assert!(c > 0.0, "gw_similarity: C must be positive, got {c}");
    (-gaussian_w2(a, b) / c).exp()
}

/// Blend the box center toward `sample_center` with weight `beta`, keeping
/// width and height untouched.
///
/// `beta` 0 returns `prev` bit-exactly and `beta` 1 returns `sample_center`
/// bit-exactly; intermediate values use the delta form
/// `prev + beta * (sample - prev)` so an already-converged center stays fixed.
pub fn correct_center(prev: BoxH, sample_center: (f64, f64), beta: f64) -> BoxH {
    assert!(
        (0.0..=1.0).contains(&beta),
        "correct_center: beta must lie in [0, 1], got {beta}"
    );
    let (px, py) = (prev.cx, prev.cy);
    let (sx, sy) = sample_center;
    let (cx, cy) = if beta == 0.0 {
        (px, py)
    } else if beta == 1.0 {
        (sx, sy)
    } else {
        (px + beta * (sx - px), py + beta * (sy - py))
    };
    // extents are copied from a valid box, so this cannot fail
    BoxH::new(cx, cy, prev.w, prev.h).expect("valid extents preserved")
}

/// Progressive correction weight for epoch `k` of `E`.
///
/// Ramps linearly from 0 to 1 over the first `round(gamma * E)` epochs, then
/// stays at 1. `round` is half-up. When the ramp length comes out at or below
/// 1 (including the `gamma = 0` limit) the schedule is the constant 1.
pub fn beta_schedule(k: usize, max_epochs: usize, gamma: f64) -> f64 {
    assert!(max_epochs >= 1, "beta_schedule: E must be at least 1");
    assert!(
        k < max_epochs,
        "beta_schedule: epoch {k} out of range 0..{max_epochs}"
    );
    assert!(
        (0.0..=1.0).contains(&gamma),
        "beta_schedule: gamma must lie in [0, 1], got {gamma}"
    );
    let ramp = (gamma * max_epochs as f64 + 0.5).floor() as usize;
    if ramp <= 1 || k >= ramp {
        1.0
    } else {
        k as f64 / (ramp - 1) as f64
    }
}
