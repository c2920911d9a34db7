//! Shifted-window cascaded alignment forward pass.
//!
//! Two successive blocks, one with a regular window partition and one with
//! the partition shifted by half a window, each predict a per-cell offset
//! field from windowed cross-attention between the reference and sensed
//! grids and then resample the sensed grid along those offsets. The
//! reference grid is read-only throughout; only the sensed grid is deformed.
//!
//! The pass is pure given its parameters: windows are independent, nothing
//! is mutated, and identical inputs yield bit-identical outputs.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense `h x w x c` feature grid, row-major with channels innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    h: usize,
    w: usize,
    c: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(h: usize, w: usize, c: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != h * w * c || h * w * c == 0 {
            return Err(Error::GridLen {
                h,
                w,
                c,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGrid { index: i });
        }
        Ok(Self { h, w, c, values })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self {
            h,
            w,
            c,
            values: vec![0.0; h * w * c],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.values[(y * self.w + x) * self.c + ch]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, v: f64) {
        self.values[(y * self.w + x) * self.c + ch] = v;
    }

    pub fn from_fn(
        h: usize,
        w: usize,
        c: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut g = Self::zeros(h, w, c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    g.set(y, x, ch, f(y, x, ch));
                }
            }
        }
        g
    }
}

/// Window partition geometry: square windows of side `window`, optionally
/// cyclically shifted by `shift` (0 or `window / 2`). Grids whose sides are
/// not multiples of the window are zero-padded; the reverse crops the pad.
#[derive(Clone, Copy, Debug)]
pub struct WindowLayout {
    pub window: usize,
    pub shift: usize,
}

impl WindowLayout {
    pub fn regular(window: usize) -> Self {
        assert!(window >= 1, "window side must be at least 1");
        Self { window, shift: 0 }
    }

    pub fn shifted(window: usize) -> Self {
        assert!(window >= 1, "window side must be at least 1");
        Self {
            window,
            shift: window / 2,
        }
    }
}

/// Tokens of one window: `n_tokens x c`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenBlock {
    pub n_tokens: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl TokenBlock {
    #[inline]
    pub fn token(&self, t: usize) -> &[f64] {
        &self.data[t * self.c..(t + 1) * self.c]
    }
}

/// Bookkeeping needed to undo a partition.
#[derive(Clone, Copy, Debug)]
pub struct PartitionMeta {
    pub orig_h: usize,
    pub orig_w: usize,
    pub padded_h: usize,
    pub padded_w: usize,
    pub window: usize,
    pub shift: usize,
}

impl PartitionMeta {
    pub fn windows_y(&self) -> usize {
        self.padded_h / self.window
    }

    pub fn windows_x(&self) -> usize {
        self.padded_w / self.window
    }

    pub fn n_windows(&self) -> usize {
        self.windows_y() * self.windows_x()
    }
}

/// A partitioned grid: per-window token blocks plus the geometry to invert.
#[derive(Clone, Debug)]
pub struct Partition {
    pub windows: Vec<TokenBlock>,
    pub meta: PartitionMeta,
}

/// Split a grid into `window x window` token blocks in row-major window
/// order. With a non-zero shift the padded grid is first rolled cyclically
/// by `(-shift, -shift)`; [`attention_masks`] marks the token pairs such a
/// roll brings together across the wrap boundary.
pub fn window_partition(grid: &FeatureGrid, layout: WindowLayout) -> Partition {
    assert!(
        layout.shift < layout.window,
        "shift must be smaller than the window"
    );
    let ws = layout.window;
    let padded_h = grid.h.div_ceil(ws) * ws;
    let padded_w = grid.w.div_ceil(ws) * ws;
    let meta = PartitionMeta {
        orig_h: grid.h,
        orig_w: grid.w,
        padded_h,
        padded_w,
        window: ws,
        shift: layout.shift,
    };

    let sample = |y: usize, x: usize, ch: usize| -> f64 {
        // cyclic roll by (-shift, -shift) on the padded canvas
        let sy = (y + layout.shift) % padded_h;
        let sx = (x + layout.shift) % padded_w;
        if sy < grid.h && sx < grid.w {
            grid.get(sy, sx, ch)
        } else {
            0.0
        }
    };

    let mut windows = Vec::with_capacity(meta.n_windows());
    for wy in 0..meta.windows_y() {
        for wx in 0..meta.windows_x() {
            let mut data = Vec::with_capacity(ws * ws * grid.c);
            for ty in 0..ws {
                for tx in 0..ws {
                    for ch in 0..grid.c {
                        data.push(sample(wy * ws + ty, wx * ws + tx, ch));
                    }
                }
            }
            windows.push(TokenBlock {
                n_tokens: ws * ws,
                c: grid.c,
                data,
            });
        }
    }
    Partition { windows, meta }
}

/// Invert a partition: reassemble the padded grid, undo the roll, and crop
/// back to the original size. `windows` may carry a different channel count
/// than the grid that was partitioned (offset prediction yields 2 channels).
pub fn window_reverse(windows: &[TokenBlock], meta: &PartitionMeta) -> Result<FeatureGrid> {
    if windows.len() != meta.n_windows() {
        return Err(Error::LengthMismatch {
            what: "window count for reverse",
            left: windows.len(),
            right: meta.n_windows(),
        });
    }
    let c = windows.first().map_or(0, |b| b.c);
    let ws = meta.window;
    let mut padded = FeatureGrid::zeros(meta.padded_h, meta.padded_w, c);
    for (wi, block) in windows.iter().enumerate() {
        if block.c != c || block.n_tokens != ws * ws {
            return Err(Error::LengthMismatch {
                what: "token block shape for reverse",
                left: block.data.len(),
                right: ws * ws * c,
            });
        }
        let wy = wi / meta.windows_x();
        let wx = wi % meta.windows_x();
        for ty in 0..ws {
            for tx in 0..ws {
                // undo the roll: rolled (y, x) came from ((y + s) mod H, (x + s) mod W)
                let ry = (wy * ws + ty + meta.shift) % meta.padded_h;
                let rx = (wx * ws + tx + meta.shift) % meta.padded_w;
                for ch in 0..c {
                    padded.set(ry, rx, ch, block.token(ty * ws + tx)[ch]);
                }
            }
        }
    }
    if meta.padded_h == meta.orig_h && meta.padded_w == meta.orig_w {
        return Ok(padded);
    }
    Ok(FeatureGrid::from_fn(
        meta.orig_h,
        meta.orig_w,
        c,
        |y, x, ch| padded.get(y, x, ch),
    ))
}

/// Additive attention masks for a shifted partition: one `n_tokens^2` matrix
/// per window with `-inf` on token pairs that a cyclic roll wrapped together
/// from opposite sides of the grid, `None` for windows with nothing to mask
/// (and for unshifted layouts).
pub fn attention_masks(meta: &PartitionMeta) -> Vec<Option<Vec<f64>>> {
    let ws = meta.window;
    let n = ws * ws;
    let mut masks = Vec::with_capacity(meta.n_windows());
    for wy in 0..meta.windows_y() {
        for wx in 0..meta.windows_x() {
            if meta.shift == 0 {
                masks.push(None);
                continue;
            }
            // a rolled cell wrapped iff its padded coordinate crossed the end
            let wrapped: Vec<(bool, bool)> = (0..n)
                .map(|t| {
                    let y = wy * ws + t / ws;
                    let x = wx * ws + t % ws;
                    (
                        y + meta.shift >= meta.padded_h,
                        x + meta.shift >= meta.padded_w,
                    )
                })
                .collect();
            if wrapped.iter().all(|&f| f == wrapped[0]) {
                masks.push(None);
                continue;
            }
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    if wrapped[i] != wrapped[j] {
                        m[i * n + j] = f64::NEG_INFINITY;
                    }
                }
            }
            masks.push(Some(m));
        }
    }
    masks
}

/// Per-token affine map `c -> out`.
#[derive(Clone, Debug)]
pub struct Projection {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `in_dim x out_dim`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Projection {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn seeded(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let scale = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim)
                .map(|_| rng.range_f64(-scale, scale))
                .collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn apply(&self, token: &[f64]) -> Vec<f64> {
        debug_assert_eq!(token.len(), self.in_dim);
        let mut out = self.bias.clone();
        for (i, &x) in token.iter().enumerate() {
            let row = &self.weight[i * self.out_dim..(i + 1) * self.out_dim];
            for (o, wv) in row.iter().enumerate() {
                out[o] += x * wv;
            }
        }
        out
    }
}

/// Learned per-modality pieces of the cross-attention: layer-norm affine,
/// query/key/value projections, and a relative position bias table of side
/// `(2 * window - 1)^2` per head.
#[derive(Clone, Debug)]
pub struct ModalityParams {
    pub ln_scale: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub query: Projection,
    pub key: Projection,
    pub value: Projection,
    /// `(2w - 1)^2 x heads`, row-major.
    pub pos_bias: Vec<f64>,
}

/// Cross-attention parameters for one block. The two modalities keep
/// separate layer norms, projections, and bias tables.
#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub window: usize,
    pub heads: usize,
    pub d_k: usize,
    pub reference: ModalityParams,
    pub sensed: ModalityParams,
}

impl AttentionParams {
    pub fn seeded(c: usize, d_k: usize, heads: usize, window: usize, rng: &mut Rng) -> Self {
        assert!(
            heads >= 1 && d_k.is_multiple_of(heads),
            "d_k must be a positive multiple of heads"
        );
        let table = (2 * window - 1) * (2 * window - 1) * heads;
        let modality = |rng: &mut Rng| ModalityParams {
            ln_scale: vec![1.0; c],
            ln_bias: vec![0.0; c],
            query: Projection::seeded(c, d_k, rng),
            key: Projection::seeded(c, d_k, rng),
            value: Projection::seeded(c, d_k, rng),
            pos_bias: (0..table).map(|_| 0.02 * rng.normal()).collect(),
        };
        Self {
            window,
            heads,
            d_k,
            reference: modality(rng),
            sensed: modality(rng),
        }
    }
}

fn layer_norm(block: &TokenBlock, scale: &[f64], bias: &[f64]) -> TokenBlock {
    const EPS: f64 = 1e-5;
    let c = block.c;
    let mut data = Vec::with_capacity(block.data.len());
    for t in 0..block.n_tokens {
        let tok = block.token(t);
        let mean = tok.iter().sum::<f64>() / c as f64;
        let var = tok.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let inv = 1.0 / (var + EPS).sqrt();
        for (ch, v) in tok.iter().enumerate() {
            data.push((v - mean) * inv * scale[ch] + bias[ch]);
        }
    }
    TokenBlock {
        n_tokens: block.n_tokens,
        c,
        data,
    }
}

/// Outputs of one window's bidirectional cross-attention: the exchanged
/// embeddings plus the attention matrices (`heads x n x n`, row-major) for
/// inspection.
#[derive(Clone, Debug)]
pub struct CrossAttention {
    pub r2s: TokenBlock,
    pub s2r: TokenBlock,
    pub attn_r2s: Vec<f64>,
    pub attn_s2r: Vec<f64>,
}

/// Bidirectional windowed cross-attention.
///
/// The sensed queries attend over reference keys/values (yielding `r2s`)
/// and vice versa; each side adds its own relative position bias, plus the
/// shared shift mask when one is present. Inputs are layer-normalized before
/// projection. Every attention row is a softmax and sums to 1.
pub fn cross_attention(
    x_r: &TokenBlock,
    x_s: &TokenBlock,
    params: &AttentionParams,
    mask: Option<&Vec<f64>>,
) -> Result<CrossAttention> {
    if x_r.n_tokens != x_s.n_tokens || x_r.c != x_s.c {
        return Err(Error::LengthMismatch {
            what: "cross-attention token blocks",
            left: x_r.data.len(),
            right: x_s.data.len(),
        });
    }
    let n = x_r.n_tokens;

    let ln_r = layer_norm(x_r, &params.reference.ln_scale, &params.reference.ln_bias);
    let ln_s = layer_norm(x_s, &params.sensed.ln_scale, &params.sensed.ln_bias);

    let project = |block: &TokenBlock, p: &Projection| -> Vec<Vec<f64>> {
        (0..n).map(|t| p.apply(block.token(t))).collect()
    };
    let (q_r, k_r, v_r) = (
        project(&ln_r, &params.reference.query),
        project(&ln_r, &params.reference.key),
        project(&ln_r, &params.reference.value),
    );
    let (q_s, k_s, v_s) = (
        project(&ln_s, &params.sensed.query),
        project(&ln_s, &params.sensed.key),
        project(&ln_s, &params.sensed.value),
    );

    let r2s = attend(
        &q_s,
        &k_r,
        &v_r,
        params,
        &params.reference.pos_bias,
        mask,
        n,
    )?;
    let s2r = attend(&q_r, &k_s, &v_s, params, &params.sensed.pos_bias, mask, n)?;
    Ok(CrossAttention {
        r2s: r2s.0,
        s2r: s2r.0,
        attn_r2s: r2s.1,
        attn_s2r: s2r.1,
    })
}

fn attend(
    q: &[Vec<f64>],
    k: &[Vec<f64>],
    v: &[Vec<f64>],
    params: &AttentionParams,
    pos_bias: &[f64],
    mask: Option<&Vec<f64>>,
    n: usize,
) -> Result<(TokenBlock, Vec<f64>)> {
    let heads = params.heads;
    let dh = params.d_k / heads;
    let ws = params.window;
    let side = 2 * ws - 1;
    let scale = 1.0 / (dh as f64).sqrt();

    let rel_index = |i: usize, j: usize| -> usize {
        let (yi, xi) = (i / ws, i % ws);
        let (yj, xj) = (j / ws, j % ws);
        (yi + ws - 1 - yj) * side + (xi + ws - 1 - xj)
    };

    let mut out = vec![0.0; n * params.d_k];
    let mut attn = vec![0.0; heads * n * n];
    let mut row = vec![0.0; n];
    for h in 0..heads {
        let span = h * dh..(h + 1) * dh;
        for i in 0..n {
            for (j, kj) in k.iter().enumerate() {
                let dot: f64 = q[i][span.clone()]
                    .iter()
                    .zip(&kj[span.clone()])
                    .map(|(a, b)| a * b)
                    .sum();
                let mut s = dot * scale + pos_bias[rel_index(i, j) * heads + h];
                if let Some(m) = mask {
                    s += m[i * n + j];
                }
                row[j] = s;
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                denom += *x;
            }
            for (j, x) in row.iter().enumerate() {
                let a = x / denom;
                attn[(h * n + i) * n + j] = a;
                for (o, vo) in v[j][span.clone()].iter().enumerate() {
                    out[i * params.d_k + span.start + o] += a * vo;
                }
            }
        }
    }
    Ok((
        TokenBlock {
            n_tokens: n,
            c: params.d_k,
            data: out,
        },
        attn,
    ))
}

/// The offset predictor: a single affine map from the channel-concatenated
/// embedding pair to an `(dx, dy)` pair per token.
#[derive(Clone, Debug)]
pub struct OffsetPredictor(pub Projection);

impl OffsetPredictor {
    /// Zero map: the block starts as the identity alignment.
    pub fn zeros(d_k: usize) -> Self {
        Self(Projection::zeros(2 * d_k, 2))
    }

    pub fn seeded(d_k: usize, rng: &mut Rng) -> Self {
        let mut p = Projection::zeros(2 * d_k, 2);
        let scale = 1.0 / (2.0 * d_k as f64).sqrt();
        for wv in p.weight.iter_mut() {
            *wv = rng.range_f64(-scale, scale);
        }
        Self(p)
    }
}

/// Per-cell `(dx, dy)` offsets in feature-cell units, same spatial shape as
/// the grid they deform.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetField {
    h: usize,
    w: usize,
    /// `(y, x, 2)` with dx innermost-first: `[dx, dy]` per cell.
    values: Vec<f64>,
}

impl OffsetField {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            values: vec![0.0; h * w * 2],
        }
    }

    pub fn new(h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != h * w * 2 {
            return Err(Error::GridLen {
                h,
                w,
                c: 2,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGrid { index: i });
        }
        Ok(Self { h, w, values })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    #[inline]
    pub fn dx(&self, y: usize, x: usize) -> f64 {
        self.values[(y * self.w + x) * 2]
    }

    #[inline]
    pub fn dy(&self, y: usize, x: usize) -> f64 {
        self.values[(y * self.w + x) * 2 + 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set(&mut self, y: usize, x: usize, dx: f64, dy: f64) {
        self.values[(y * self.w + x) * 2] = dx;
        self.values[(y * self.w + x) * 2 + 1] = dy;
    }
}

/// Concatenate the two cross-modality embeddings channel-wise, apply the
/// offset predictor per token, and reassemble the tokens into an offset
/// field on the original grid.
pub fn predict_offsets(
    r2s: &[TokenBlock],
    s2r: &[TokenBlock],
    op: &OffsetPredictor,
    meta: &PartitionMeta,
) -> Result<OffsetField> {
    if r2s.len() != s2r.len() {
        return Err(Error::LengthMismatch {
            what: "cross-modality window lists",
            left: r2s.len(),
            right: s2r.len(),
        });
    }
    let mut offset_windows = Vec::with_capacity(r2s.len());
    for (a, b) in r2s.iter().zip(s2r) {
        if a.n_tokens != b.n_tokens || a.c != b.c {
            return Err(Error::LengthMismatch {
                what: "cross-modality token blocks",
                left: a.data.len(),
                right: b.data.len(),
            });
        }
        let mut data = Vec::with_capacity(a.n_tokens * 2);
        let mut cat = vec![0.0; 2 * a.c];
        for t in 0..a.n_tokens {
            cat[..a.c].copy_from_slice(a.token(t));
            cat[a.c..].copy_from_slice(b.token(t));
            data.extend(op.0.apply(&cat));
        }
        offset_windows.push(TokenBlock {
            n_tokens: a.n_tokens,
            c: 2,
            data,
        });
    }
    let grid = window_reverse(&offset_windows, meta)?;
    OffsetField::new(grid.h(), grid.w(), grid.values().to_vec())
}

/// Resample a grid along per-cell offsets with bilinear interpolation.
///
/// `out(y, x) = grid(y + dy, x + dx)`, with sample coordinates clamped to
/// the grid border so edge features are replicated rather than zero-filled.
/// Zero offsets reproduce the input exactly.
pub fn warp(grid: &FeatureGrid, offsets: &OffsetField) -> Result<FeatureGrid> {
    if offsets.shape() != (grid.h, grid.w) {
        return Err(Error::GridShape {
            expected_h: grid.h,
            expected_w: grid.w,
            expected_c: 2,
            got_h: offsets.h,
            got_w: offsets.w,
            got_c: 2,
        });
    }
    let mut out = FeatureGrid::zeros(grid.h, grid.w, grid.c);
    for y in 0..grid.h {
        for x in 0..grid.w {
            let sx = (x as f64 + offsets.dx(y, x)).clamp(0.0, (grid.w - 1) as f64);
            let sy = (y as f64 + offsets.dy(y, x)).clamp(0.0, (grid.h - 1) as f64);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(grid.w - 1);
            let y1 = (y0 + 1).min(grid.h - 1);
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            for ch in 0..grid.c {
                let top = (1.0 - fx) * grid.get(y0, x0, ch) + fx * grid.get(y0, x1, ch);
                let bottom = (1.0 - fx) * grid.get(y1, x0, ch) + fx * grid.get(y1, x1, ch);
                out.set(y, x, ch, (1.0 - fy) * top + fy * bottom);
            }
        }
    }
    Ok(out)
}

/// Parameters of one alignment block.
#[derive(Clone, Debug)]
pub struct SwcaBlockParams {
    pub attention: AttentionParams,
    pub offset: OffsetPredictor,
}

/// How to initialize the offset predictors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpInit {
    /// Zero weights: the whole pass starts as the identity.
    Zero,
    Random,
}

/// Parameters of the two-block cascade.
#[derive(Clone, Debug)]
pub struct SwcaParams {
    pub window: usize,
    pub block1: SwcaBlockParams,
    pub block2: SwcaBlockParams,
}

impl SwcaParams {
    /// Seeded initialization: attention projections random, offset
    /// predictors per `op_init`.
    pub fn seeded(
        c: usize,
        d_k: usize,
        heads: usize,
        window: usize,
        seed: u64,
        op_init: OpInit,
    ) -> Self {
        let mut rng = Rng::new(seed);
        let block = |rng: &mut Rng| SwcaBlockParams {
            attention: AttentionParams::seeded(c, d_k, heads, window, rng),
            offset: match op_init {
                OpInit::Zero => OffsetPredictor::zeros(d_k),
                OpInit::Random => OffsetPredictor::seeded(d_k, rng),
            },
        };
        Self {
            window,
            block1: block(&mut rng),
            block2: block(&mut rng),
        }
    }
}

/// One block: partition both grids, run cross-attention per window, predict
/// offsets, warp the sensed grid.
pub fn swca_block(
    f_r: &FeatureGrid,
    f_s: &FeatureGrid,
    layout: WindowLayout,
    params: &SwcaBlockParams,
) -> Result<(FeatureGrid, OffsetField)> {
    let p_r = window_partition(f_r, layout);
    let p_s = window_partition(f_s, layout);
    let masks = attention_masks(&p_r.meta);
    let mut r2s = Vec::with_capacity(p_r.windows.len());
    let mut s2r = Vec::with_capacity(p_r.windows.len());
    for ((wr, ws_), mask) in p_r.windows.iter().zip(&p_s.windows).zip(&masks) {
        let out = cross_attention(wr, ws_, &params.attention, mask.as_ref())?;
        r2s.push(out.r2s);
        s2r.push(out.s2r);
    }
    let offsets = predict_offsets(&r2s, &s2r, &params.offset, &p_r.meta)?;
    let warped = warp(f_s, &offsets)?;
    Ok((warped, offsets))
}

/// The full cascade: a regular-window block followed by a shifted-window
/// block, the second refining the output of the first. Returns the aligned
/// sensed grid together with both predicted offset fields.
pub fn swca_align_with_fields(
    f_r: &FeatureGrid,
    f_s: &FeatureGrid,
    params: &SwcaParams,
) -> Result<(FeatureGrid, OffsetField, OffsetField)> {
    if f_r.shape() != f_s.shape() {
        let (h, w, c) = f_s.shape();
        return Err(Error::GridShape {
            expected_h: f_r.h,
            expected_w: f_r.w,
            expected_c: f_r.c,
            got_h: h,
            got_w: w,
            got_c: c,
        });
    }
    let (s1, off1) = swca_block(
        f_r,
        f_s,
        WindowLayout::regular(params.window),
        &params.block1,
    )?;
    let (s2, off2) = swca_block(
        f_r,
        &s1,
        WindowLayout::shifted(params.window),
        &params.block2,
    )?;
    Ok((s2, off1, off2))
}

/// The full cascade, aligned grid only.
pub fn swca_align(
    f_r: &FeatureGrid,
    f_s: &FeatureGrid,
    params: &SwcaParams,
) -> Result<FeatureGrid> {
    swca_align_with_fields(f_r, f_s, params).map(|(g, _, _)| g)
}
