//! Embedding + single linear map function approximators.
//!
//! All heads turn an [`ObjectGrid`] into four outputs, one per [`Action`],
//! read either as Q-values or as softmax logits:
//!
//! * [`LinearHead`]: one full-width weight matrix over the flattened embedded
//!   grid (row-major cells, embedding dimension innermost).
//! * [`RotationalHead`]: one kernel over the right-facing triangular wedge of
//!   the ego grid. Output `d` is the kernel dotted with the grid turned so
//!   that wedge `d` lines up with it.
//! * [`MirrorHead`]: one kernel over the lower half of that wedge, applied to
//!   the aligned grid and to its reflection about the centre row and summed.
//!   Centre-row cells are therefore counted twice for every direction.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::encoding::{
    build_octant_mask, embed_slot, build_quadrant_mask, reflect_cells, rotate_cells, EmbeddingTable, ObjectGrid,
    Representation, EMBED_DIM,
};
use crate::error::{Error, Result};
use crate::gridworld::Action;

pub const NUM_ACTIONS: usize = 4;

/// Half-width of the uniform initialisation range for head weights.
pub const INIT_SCALE: f64 = 0.05;

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Linear,
    Rotational,
    Mirror,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Linear => "linear",
            HeadKind::Rotational => "rotational",
            HeadKind::Mirror => "mirror",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            HeadKind::Linear => 0,
            HeadKind::Rotational => 1,
            HeadKind::Mirror => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(HeadKind::Linear),
            1 => Some(HeadKind::Rotational),
            2 => Some(HeadKind::Mirror),
            _ => None,
        }
    }

    /// Number of head weights for a grid of the given side.
    pub fn param_count(self, side: usize) -> usize {
        let c = (side - 1) / 2;
        match self {
            HeadKind::Linear => side * side * EMBED_DIM * NUM_ACTIONS,
            HeadKind::Rotational => (c + 1) * (c + 1) * EMBED_DIM,
            HeadKind::Mirror => (c + 1) * (c + 2) / 2 * EMBED_DIM,
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full-width matrix of shape `(side^2 * 2) x 4`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    side: usize,
    weights: Vec<f64>,
}

/// Shared wedge kernel, one weight per wedge cell per embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationalHead {
    side: usize,
    weights: Vec<f64>,
    /// For each direction, the source cell in the unrotated grid of each
    /// wedge cell after alignment.
    gather: [Vec<usize>; NUM_ACTIONS],
}

/// Shared octant kernel used for both halves of every wedge.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorHead {
    side: usize,
    weights: Vec<f64>,
    /// Per direction: sources for the aligned grid, then for its reflection.
    gather: [[Vec<usize>; 2]; NUM_ACTIONS],
}

/// Source index of every cell after `turns` quarter turns, optionally
/// followed by the centre-row reflection.
fn alignment(side: usize, turns: usize, reflect: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..side * side).collect();
    for _ in 0..turns {
        idx = rotate_cells(&idx, side);
    }
    if reflect {
        idx = reflect_cells(&idx, side);
    }
    idx
}

/// Quarter turns that bring wedge `d` onto the right-facing wedge.
fn turns_for(direction: usize) -> usize {
    (Action::Right.index() + NUM_ACTIONS - direction) % NUM_ACTIONS
}

impl RotationalHead {
    fn new(side: usize, weights: Vec<f64>) -> Result<Self> {
        let mask = build_quadrant_mask(Action::Right, side)?;
        let gather = std::array::from_fn(|d| {
            let src = alignment(side, turns_for(d), false);
            mask.cells.iter().map(|&(i, j)| src[i * side + j]).collect()
        });
        Ok(Self { side, weights, gather })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl MirrorHead {
    fn new(side: usize, weights: Vec<f64>) -> Result<Self> {
        let mask = build_octant_mask(side)?;
        let gather = std::array::from_fn(|d| {
            std::array::from_fn(|r| {
                let src = alignment(side, turns_for(d), r == 1);
                mask.cells.iter().map(|&(i, j)| src[i * side + j]).collect()
            })
        });
        Ok(Self { side, weights, gather })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl LinearHead {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Linear(LinearHead),
    Rotational(RotationalHead),
    Mirror(MirrorHead),
}

impl Head {
    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Linear(_) => HeadKind::Linear,
            Head::Rotational(_) => HeadKind::Rotational,
            Head::Mirror(_) => HeadKind::Mirror,
        }
    }

    fn build(kind: HeadKind, side: usize, weights: Vec<f64>) -> Result<Self> {
        let expected = kind.param_count(side);
        if weights.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: weights.len() });
        }
        Ok(match kind {
            HeadKind::Linear => Head::Linear(LinearHead { side, weights }),
            HeadKind::Rotational => Head::Rotational(RotationalHead::new(side, weights)?),
            HeadKind::Mirror => Head::Mirror(MirrorHead::new(side, weights)?),
        })
    }

    fn weights(&self) -> &[f64] {
        match self {
            Head::Linear(h) => &h.weights,
            Head::Rotational(h) => &h.weights,
            Head::Mirror(h) => &h.weights,
        }
    }

    fn weights_mut(&mut self) -> &mut [f64] {
        match self {
            Head::Linear(h) => &mut h.weights,
            Head::Rotational(h) => &mut h.weights,
            Head::Mirror(h) => &mut h.weights,
        }
    }

    fn side(&self) -> usize {
        match self {
            Head::Linear(h) => h.side,
            Head::Rotational(h) => h.side,
            Head::Mirror(h) => h.side,
        }
    }
}

/// Four Q-values or logits, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOutput {
    pub values: [f64; NUM_ACTIONS],
}

impl ModelOutput {
    /// Softmax of the values.
    pub fn probs(&self) -> [f64; NUM_ACTIONS] {
        softmax(&self.values)
    }

    /// Index of the largest value; ties go to the lowest index.
    pub fn argmax(&self) -> Action {
        Action::ALL[argmax(&self.values)]
    }
}

pub fn softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|z| (z - max).exp());
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// First index of the maximum.
pub fn argmax(values: &[f64; NUM_ACTIONS]) -> usize {
    let mut best = 0;
    for a in 1..NUM_ACTIONS {
        if values[a] > values[best] {
            best = a;
        }
    }
    best
}

/// What `backward` needs from a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardContext<'a> {
    cells: &'a [u8],
    model_id: u64,
    version: u64,
}

/// Parameter gradients laid out like the model's parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: Vec<f64>,
    pub head: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            embedding: vec![0.0; EmbeddingTable::LEN],
            head: vec![0.0; model.head.weights().len()],
        }
    }

    pub fn reset(&mut self) {
        self.embedding.fill(0.0);
        self.head.fill(0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|g| *g *= factor);
    }

    /// Clamp every component to `[-limit, limit]`.
    pub fn clip(&mut self, limit: f64) {
        self.iter_mut().for_each(|g| *g = g.clamp(-limit, limit));
    }

    pub fn is_finite(&self) -> bool {
        self.embedding.iter().chain(&self.head).all(|g| g.is_finite())
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.embedding.iter().chain(self.head.iter())
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.embedding.iter_mut().chain(self.head.iter_mut())
    }
}

/// Embedding table plus one head.
#[derive(Debug, PartialEq)]
pub struct Model {
    representation: Representation,
    embedding: EmbeddingTable,
    head: Head,
    id: u64,
    version: u64,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self {
            representation: self.representation,
            embedding: self.embedding.clone(),
            head: self.head.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl Model {
    /// Fresh model: default embeddings and head weights uniform in
    /// `[-INIT_SCALE, INIT_SCALE]`.
    pub fn new<R: Rng + ?Sized>(
        kind: HeadKind,
        representation: Representation,
        rng: &mut R,
    ) -> Result<Self> {
        let side = representation.side();
        let weights = (0..kind.param_count(side))
            .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
            .collect();
        Self::from_parts(kind, representation, EmbeddingTable::default(), weights)
    }

    pub fn from_parts(
        kind: HeadKind,
        representation: Representation,
        embedding: EmbeddingTable,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if kind != HeadKind::Linear && representation != Representation::Egocentric {
            return Err(Error::Config(format!("the {kind} head needs the egocentric representation")));
        }
        let head = Head::build(kind, representation.side(), weights)?;
        Ok(Self { representation, embedding, head, id: fresh_id(), version: 0 })
    }

    /// A model over `side` x `side` grids of any odd size, for exercising
    /// the head geometry away from the board sizes. Its representation is
    /// nominal; encode grids yourself.
    pub fn with_side(kind: HeadKind, side: usize, embedding: EmbeddingTable, weights: Vec<f64>) -> Result<Self> {
        let head = Head::build(kind, side, weights)?;
        let representation = if side == Representation::Absolute.side() {
            Representation::Absolute
        } else {
            Representation::Egocentric
        };
        Ok(Self { representation, embedding, head, id: fresh_id(), version: 0 })
    }

    pub fn kind(&self) -> HeadKind {
        self.head.kind()
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn side(&self) -> usize {
        self.head.side()
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    pub fn head_weights(&self) -> &[f64] {
        self.head.weights()
    }

    pub fn param_count(&self) -> usize {
        EmbeddingTable::LEN + self.head.weights().len()
    }

    /// Mutable parameter blocks (embedding, head). Invalidates outstanding
    /// forward contexts.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        self.version += 1;
        (self.embedding.as_mut_slice(), self.head.weights_mut())
    }

    pub fn params_finite(&self) -> bool {
        self.embedding.as_slice().iter().chain(self.head.weights()).all(|p| p.is_finite())
    }

    pub fn forward(&self, grid: &ObjectGrid) -> Result<ModelOutput> {
        self.forward_ctx(grid).map(|(out, _)| out)
    }

    pub fn forward_ctx<'a>(&self, grid: &'a ObjectGrid) -> Result<(ModelOutput, ForwardContext<'a>)> {
        let side = self.side();
        if grid.side() != side {
            return Err(Error::ShapeMismatch { expected: side, got: grid.side() });
        }
        let cells = grid.cells();
        let values = match &self.head {
            Head::Linear(h) => forward_linear(cells, &self.embedding, h),
            Head::Rotational(h) => forward_rotational(cells, &self.embedding, h),
            Head::Mirror(h) => forward_mirror(cells, &self.embedding, h),
        };
        let ctx = ForwardContext { cells, model_id: self.id, version: self.version };
        Ok((ModelOutput { values }, ctx))
    }

    /// Accumulate `d loss / d params` into `grads` given `d loss / d outputs`.
    pub fn backward(
        &self,
        ctx: &ForwardContext<'_>,
        d_values: &[f64; NUM_ACTIONS],
        grads: &mut Gradients,
    ) -> Result<()> {
        if ctx.model_id != self.id || ctx.version != self.version {
            return Err(Error::StaleContext);
        }
        if grads.head.len() != self.head.weights().len() {
            return Err(Error::ShapeMismatch { expected: self.head.weights().len(), got: grads.head.len() });
        }
        match &self.head {
            Head::Linear(h) => backward_linear(ctx.cells, &self.embedding, h, d_values, grads),
            Head::Rotational(h) => {
                for (d, src) in h.gather.iter().enumerate() {
                    backward_kernel(ctx.cells, &self.embedding, &h.weights, src, d_values[d], grads);
                }
            }
            Head::Mirror(h) => {
                for (d, halves) in h.gather.iter().enumerate() {
                    for src in halves {
                        backward_kernel(ctx.cells, &self.embedding, &h.weights, src, d_values[d], grads);
                    }
                }
            }
        }
        Ok(())
    }
}

fn forward_linear(cells: &[u8], emb: &EmbeddingTable, head: &LinearHead) -> [f64; NUM_ACTIONS] {
    let mut out = [0.0; NUM_ACTIONS];
    let stride = EMBED_DIM * NUM_ACTIONS;
    for (k, &obj) in cells.iter().enumerate() {
        let e = emb.row(obj);
        let w = &head.weights[k * stride..(k + 1) * stride];
        for a in 0..NUM_ACTIONS {
            out[a] += e[0] * w[a] + e[1] * w[NUM_ACTIONS + a];
        }
    }
    out
}

fn backward_linear(
    cells: &[u8],
    emb: &EmbeddingTable,
    head: &LinearHead,
    g: &[f64; NUM_ACTIONS],
    grads: &mut Gradients,
) {
    let stride = EMBED_DIM * NUM_ACTIONS;
    for (k, &obj) in cells.iter().enumerate() {
        let e = emb.row(obj);
        let w = &head.weights[k * stride..(k + 1) * stride];
        let dw = &mut grads.head[k * stride..(k + 1) * stride];
        for dim in 0..EMBED_DIM {
            let mut de = 0.0;
            for a in 0..NUM_ACTIONS {
                dw[dim * NUM_ACTIONS + a] += e[dim] * g[a];
                de += w[dim * NUM_ACTIONS + a] * g[a];
            }
            grads.embedding[embed_slot(obj) * EMBED_DIM + dim] += de;
        }
    }
}

#[inline]
fn kernel_dot(cells: &[u8], emb: &EmbeddingTable, kernel: &[f64], src: &[usize]) -> f64 {
    let mut acc = 0.0;
    for (m, &s) in src.iter().enumerate() {
        let e = emb.row(cells[s]);
        acc += kernel[2 * m] * e[0] + kernel[2 * m + 1] * e[1];
    }
    acc
}

fn backward_kernel(
    cells: &[u8],
    emb: &EmbeddingTable,
    kernel: &[f64],
    src: &[usize],
    g: f64,
    grads: &mut Gradients,
) {
    if g == 0.0 {
        return;
    }
    for (m, &s) in src.iter().enumerate() {
        let obj = embed_slot(cells[s]);
        let e = emb.row(cells[s]);
        for dim in 0..EMBED_DIM {
            grads.head[2 * m + dim] += g * e[dim];
            grads.embedding[obj * EMBED_DIM + dim] += g * kernel[2 * m + dim];
        }
    }
}

fn forward_rotational(cells: &[u8], emb: &EmbeddingTable, head: &RotationalHead) -> [f64; NUM_ACTIONS] {
    std::array::from_fn(|d| kernel_dot(cells, emb, &head.weights, &head.gather[d]))
}

fn forward_mirror(cells: &[u8], emb: &EmbeddingTable, head: &MirrorHead) -> [f64; NUM_ACTIONS] {
    std::array::from_fn(|d| {
        let [a, r] = &head.gather[d];
        kernel_dot(cells, emb, &head.weights, a) + kernel_dot(cells, emb, &head.weights, r)
    })
}
