//! Optimal one-to-one box assignment, the aSim metric, and the shift-subset
//! selection rule.
//!
//! aSim scores how well two annotation sets of the same scene agree: boxes
//! are matched one-to-one per image (and per category) by an exact Hungarian
//! solver, matched pairs contribute their box similarity, unmatched boxes
//! contribute zero, and the corpus-level score is the mean over all boxes,
//! reported on a 0-100 scale.

use std::collections::BTreeMap;

use crate::boxgeom::{BoxH, LabeledBox, SimilarityKind};
use crate::error::{Error, Result};

/// Dense rectangular similarity matrix, rows = reference boxes, cols =
/// sensed boxes. All entries finite.
#[derive(Clone, Debug)]
pub struct SimMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::MatrixShape {
                rows,
                cols,
                expected: rows * cols,
                got: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: i / cols.max(1),
                    col: i % cols.max(1),
                });
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, values)
    }

    /// Pairwise similarities between two box sets under `kind`.
    pub fn between(refs: &[BoxH], senseds: &[BoxH], kind: SimilarityKind) -> Result<Self> {
        Self::from_fn(refs.len(), senseds.len(), |r, c| {
            kind.eval(refs[r], senseds[c])
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

/// A one-to-one matching: `min(rows, cols)` pairs of (ref index, sensed
/// index), unique on each side, plus the summed similarity of the matched
/// entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Exact maximum-similarity assignment via the Hungarian algorithm
/// (shortest augmenting paths with potentials, O(n^2 m)).
///
/// Maximization is reduced to minimization with `cost = max_entry - sim`,
/// which keeps all costs non-negative. An empty matrix yields an empty
/// assignment with total 0. Pairs are returned sorted by reference index,
/// and the total is accumulated in that order.
pub fn hungarian_max(m: &SimMatrix) -> Assignment {
    if m.rows == 0 || m.cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }

    // solve with rows <= cols; transpose back afterwards
    let transposed = m.rows > m.cols;
    let (n, w) = if transposed {
        (m.cols, m.rows)
    } else {
        (m.rows, m.cols)
    };
    let at = |r: usize, c: usize| -> f64 {
        if transposed {
            m.get(c, r)
        } else {
            m.get(r, c)
        }
    };
    let offset = m.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cost = |r: usize, c: usize| offset - at(r, c);

    // 1-based with a virtual row/col 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; w + 1];
    let mut row_of_col = vec![0usize; w + 1]; // 0 = unassigned
    let mut way = vec![0usize; w + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; w + 1];
        let mut used = vec![false; w + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=w {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=w {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n);
    for (j, &row) in row_of_col.iter().enumerate().skip(1) {
        if row != 0 {
            let (r, c) = (row - 1, j - 1);
            if transposed {
                pairs.push((c, r));
            } else {
                pairs.push((r, c));
            }
        }
    }
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(r, c)| m.get(r, c)).sum();
    Assignment { pairs, total }
}

/// Whether aSim matches boxes within each category separately (the default)
/// or ignores categories entirely.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CategoryGrouping {
    PerCategory,
    Pooled,
}

/// One image's pair of annotation sets, joined by image id upstream.
#[derive(Clone, Debug)]
pub struct ImagePair {
    pub id: String,
    pub refs: Vec<LabeledBox>,
    pub senseds: Vec<LabeledBox>,
}

/// Per-image and corpus-level aSim values on the 0-100 scale.
#[derive(Clone, Debug)]
pub struct ASimReport {
    /// `(image id, image aSim)`; images with both sets empty are absent.
    pub per_image: Vec<(String, f64)>,
    /// Instance-weighted mean over all boxes of all images.
    pub aggregate: f64,
}

/// Average similarity between two annotation sets after optimal one-to-one
/// matching.
///
/// Per image (and per category under [`CategoryGrouping::PerCategory`]) the
/// two sets are Hungarian-matched under `kind`; the image contributes the sum
/// of matched similarities weighted by `max(|refs|, |senseds|)`, so missing
/// and extra boxes both count as zero-similarity instances. An image whose
/// two sets are both empty carries no weight and is skipped. A corpus with no
/// boxes at all is vacuously aligned and reports 100.
pub fn asim(images: &[ImagePair], kind: SimilarityKind, grouping: CategoryGrouping) -> ASimReport {
    let mut per_image = Vec::new();
    let mut total_sim = 0.0;
    let mut total_weight = 0usize;

    for img in images {
        let (matched, weight) = match grouping {
            CategoryGrouping::Pooled => image_match(&img.refs, &img.senseds, kind),
            CategoryGrouping::PerCategory => {
                let mut by_cat: BTreeMap<usize, (Vec<BoxH>, Vec<BoxH>)> = BTreeMap::new();
                for b in &img.refs {
                    by_cat.entry(b.category).or_default().0.push(b.bbox);
                }
                for b in &img.senseds {
                    by_cat.entry(b.category).or_default().1.push(b.bbox);
                }
                let mut matched = 0.0;
                let mut weight = 0usize;
                for (r, s) in by_cat.values() {
                    let (m, w) = sets_match(r, s, kind);
                    matched += m;
                    weight += w;
                }
                (matched, weight)
            }
        };
        if weight == 0 {
            continue;
        }
        per_image.push((img.id.clone(), 100.0 * matched / weight as f64));
        total_sim += matched;
        total_weight += weight;
    }

    let aggregate = if total_weight == 0 {
        100.0
    } else {
        100.0 * total_sim / total_weight as f64
    };
    ASimReport {
        per_image,
        aggregate,
    }
}

fn image_match(refs: &[LabeledBox], senseds: &[LabeledBox], kind: SimilarityKind) -> (f64, usize) {
    let r: Vec<BoxH> = refs.iter().map(|b| b.bbox).collect();
    let s: Vec<BoxH> = senseds.iter().map(|b| b.bbox).collect();
    sets_match(&r, &s, kind)
}

fn sets_match(refs: &[BoxH], senseds: &[BoxH], kind: SimilarityKind) -> (f64, usize) {
    let weight = refs.len().max(senseds.len());
    if refs.is_empty() || senseds.is_empty() {
        return (0.0, weight);
    }
    // matrices of valid boxes are always finite
    let m = SimMatrix::between(refs, senseds, kind).expect("finite similarities");
    // similarities below zero (GIoU) would make matched pairs worse than
    // unmatched ones; clamp contributions at the metric floor of 0
    let total = hungarian_max(&m)
        .pairs
        .iter()
        .map(|&(r, c)| m.get(r, c).max(0.0))
        .sum();
    (total, weight)
}

/// Ids of the image pairs whose aSim falls strictly below `mean - std`
/// (population std) of the per-image values, in input order.
pub fn select_shift_subset(per_image: &[(String, f64)]) -> Result<Vec<String>> {
    if per_image.is_empty() {
        return Err(Error::EmptyInput {
            what: "per-image aSim list",
        });
    }
    let n = per_image.len() as f64;
    let mean = per_image.iter().map(|(_, v)| v).sum::<f64>() / n;
    let var = per_image
        .iter()
        .map(|(_, v)| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let threshold = mean - var.sqrt();
    Ok(per_image
        .iter()
        .filter(|(_, v)| *v < threshold)
        .map(|(id, _)| id.clone())
        .collect())
}
