//! Feed-forward networks with dense and permutation-equivariant layers.
//!
//! Four layer kinds are supported:
//!
//! * `dense`: `y = act(W x + b)` on the flattened activation.
//! * `equivariant_set`: per object `i`,
//!   `y_i = act(x_i W1 + mean_j(x_j) W2 + b)`.
//! * `equivariant_2d`: per ordered pair `(i, j)`,
//!   `y_ij = act(x_ij W1 + mean_a(x_aj) W2 + mean_b(x_ib) W3 + mean_ab(x_ab) W4 + [i = j] x_ii W5 + b)`.
//! * `diag_readout`: `y_k = act(x_kk W + b)`, mapping pair features to
//!   per-object outputs.
//!
//! Activations flow through the network as row-major batches whose inner
//! layout is object-major, feature-minor. Weight blocks are stored
//! `in_width x out_width` row-major, followed by the bias.

mod layers;
mod optim;

use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

pub use layers::{backward, forward, forward_batch, loss_mse};
pub use optim::{adam_step, rmsprop_step, OptimizerKind, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Dense,
    EquivariantSet,
    Equivariant2d,
    DiagReadout,
}

impl LayerKind {
    /// Number of `in x out` weight blocks.
    pub fn weight_blocks(self) -> usize {
        match self {
            LayerKind::Dense | LayerKind::DiagReadout => 1,
            LayerKind::EquivariantSet => 2,
            LayerKind::Equivariant2d => 5,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::EquivariantSet => "equivariant_set",
            LayerKind::Equivariant2d => "equivariant_2d",
            LayerKind::DiagReadout => "diag_readout",
        }
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(LayerKind::Dense),
            "equivariant_set" => Ok(LayerKind::EquivariantSet),
            "equivariant_2d" => Ok(LayerKind::Equivariant2d),
            "diag_readout" => Ok(LayerKind::DiagReadout),
            other => Err(Error::Config(format!("unknown layer kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Softplus,
    Sigmoid,
    /// `min(max(z, 0), 6) / 6`
    Relu6Over6,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => {
                if z > 30.0 {
                    z
                } else {
                    z.exp().ln_1p()
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu6Over6 => z.clamp(0.0, 6.0) / 6.0,
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Relu6Over6 => {
                if z > 0.0 && z < 6.0 {
                    1.0 / 6.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu6Over6 => "relu6_over_6",
            Activation::Identity => "identity",
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "softplus" => Ok(Activation::Softplus),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu6_over_6" => Ok(Activation::Relu6Over6),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Per-object (or per-pair) feature width for equivariant kinds, total
    /// width for dense.
    pub in_width: usize,
    pub out_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, in_width: usize, out_width: usize, activation: Activation) -> Self {
        Self {
            kind,
            in_width,
            out_width,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.kind.weight_blocks() * self.in_width * self.out_width + self.out_width
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.kind.as_str(),
            self.in_width,
            self.out_width,
            self.activation.as_str()
        )
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!("layer `{s}` is not kind:in:out:activation")));
        }
        let width = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad width `{v}` in layer `{s}`")))
        };
        Ok(LayerSpec::new(parts[0].parse()?, width(parts[1])?, width(parts[2])?, parts[3].parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputShape {
    /// N objects, one scalar state each.
    Vector(usize),
    /// K x K matrix of pair states.
    Matrix(usize),
}

impl InputShape {
    pub fn len(self) -> usize {
        match self {
            InputShape::Vector(n) => n,
            InputShape::Matrix(k) => k * k,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn objects(self) -> usize {
        match self {
            InputShape::Vector(n) | InputShape::Matrix(n) => n,
        }
    }
}

/// Shape of the activation between two layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layout {
    Flat(usize),
    Set { n: usize, w: usize },
    Pairs { k: usize, w: usize },
}

impl Layout {
    pub(crate) fn len(self) -> usize {
        match self {
            Layout::Flat(d) => d,
            Layout::Set { n, w } => n * w,
            Layout::Pairs { k, w } => k * k * w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input: InputShape, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { input, layers };
        spec.layouts()?;
        Ok(spec)
    }

    /// Activation layouts: entry `i` feeds layer `i`, the last is the output.
    pub(crate) fn layouts(&self) -> Result<Vec<Layout>> {
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        let mut current = match self.input {
            InputShape::Vector(n) if n > 0 => Layout::Set { n, w: 1 },
            InputShape::Matrix(k) if k > 0 => Layout::Pairs { k, w: 1 },
            _ => return Err(Error::Shape("empty input".into())),
        };
        let mut out = vec![current];
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_width == 0 || layer.out_width == 0 {
                return Err(Error::Shape(format!("layer {i} has zero width")));
            }
            let mismatch = || {
                Error::Shape(format!(
                    "layer {i} ({layer}) cannot consume activation {current:?}"
                ))
            };
            current = match (layer.kind, current) {
                (LayerKind::Dense, l) if l.len() == layer.in_width => Layout::Flat(layer.out_width),
                (LayerKind::EquivariantSet, Layout::Set { n, w }) if w == layer.in_width => {
                    Layout::Set { n, w: layer.out_width }
                }
                (LayerKind::Equivariant2d, Layout::Pairs { k, w }) if w == layer.in_width => {
                    Layout::Pairs { k, w: layer.out_width }
                }
                (LayerKind::DiagReadout, Layout::Pairs { k, w }) if w == layer.in_width => {
                    Layout::Set { n: k, w: layer.out_width }
                }
                _ => return Err(mismatch()),
            };
            out.push(current);
        }
        let objects = self.input.objects();
        if current.len() != objects {
            return Err(Error::Shape(format!(
                "network emits {} values for {objects} objects",
                current.len()
            )));
        }
        Ok(out)
    }

    pub fn output_len(&self) -> usize {
        self.input.objects()
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.input {
            InputShape::Vector(n) => write!(f, "vector:{n}")?,
            InputShape::Matrix(k) => write!(f, "matrix:{k}")?,
        }
        for l in &self.layers {
            write!(f, "|{l}")?;
        }
        Ok(())
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('|');
        let input = parts.next().unwrap_or_default();
        let (kind, size) = input
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("bad input shape `{input}`")))?;
        let size: usize = size
            .parse()
            .map_err(|_| Error::Config(format!("bad input size `{size}`")))?;
        let input = match kind {
            "vector" => InputShape::Vector(size),
            "matrix" => InputShape::Matrix(size),
            other => return Err(Error::Config(format!("unknown input kind `{other}`"))),
        };
        let layers = parts.map(str::parse).collect::<Result<Vec<LayerSpec>>>()?;
        NetworkSpec::new(input, layers)
    }
}

/// Number of trainable parameters of a spec.
pub fn count_params(spec: &NetworkSpec) -> usize {
    spec.layers.iter().map(LayerSpec::param_count).sum()
}

/// Where one layer's parameters live inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSlices {
    pub weights: Vec<Range<usize>>,
    pub bias: Range<usize>,
}

/// Flat parameter vector plus the per-layer block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub values: Vec<f64>,
    slices: Vec<LayerSlices>,
}

impl ParamStore {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let mut slices = Vec::with_capacity(spec.layers.len());
        let mut offset = 0;
        for l in &spec.layers {
            let block = l.in_width * l.out_width;
            let weights = (0..l.kind.weight_blocks())
                .map(|b| offset + b * block..offset + (b + 1) * block)
                .collect();
            offset += l.kind.weight_blocks() * block;
            slices.push(LayerSlices {
                weights,
                bias: offset..offset + l.out_width,
            });
            offset += l.out_width;
        }
        Self {
            values: vec![0.0; offset],
            slices,
        }
    }

    /// A store with the same layout and all-zero values.
    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            slices: self.slices.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layer(&self, i: usize) -> &LayerSlices {
        &self.slices[i]
    }

    pub fn weight(&self, layer: usize, block: usize) -> &[f64] {
        &self.values[self.slices[layer].weights[block].clone()]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.values[self.slices[layer].bias.clone()]
    }

    fn matches(&self, spec: &NetworkSpec) -> bool {
        self.slices.len() == spec.layers.len() && self.values.len() == count_params(spec)
    }
}

/// Glorot-uniform weights `U(±sqrt(6 / (in + out)))` per block, zero biases.
pub fn init_params<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> ParamStore {
    let mut store = ParamStore::zeros(spec);
    for (i, l) in spec.layers.iter().enumerate() {
        let limit = (6.0 / (l.in_width + l.out_width) as f64).sqrt();
        for block in store.slices[i].weights.clone() {
            for v in &mut store.values[block] {
                *v = rng.random_range(-limit..=limit);
            }
        }
    }
    store
}

const CHECKPOINT_MAGIC: &str = "pelearn-checkpoint v1";

/// Text checkpoint: magic line, `spec=<spec>`, `params=<count>`, then one
/// value per line with 17 significant digits.
pub fn encode_checkpoint(spec: &NetworkSpec, params: &ParamStore) -> String {
    let mut out = format!("{CHECKPOINT_MAGIC}\nspec={spec}\nparams={}\n", params.len());
    for v in &params.values {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out
}

pub fn decode_checkpoint(text: &str) -> Result<(NetworkSpec, ParamStore)> {
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::parse(1, "not a checkpoint file"));
    }
    let spec: NetworkSpec = lines
        .next()
        .and_then(|l| l.strip_prefix("spec="))
        .ok_or_else(|| Error::parse(2, "missing spec line"))?
        .parse()
        .map_err(|e: Error| Error::parse(2, e.to_string()))?;
    let count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("params="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(3, "missing parameter count"))?;
    let mut store = ParamStore::zeros(&spec);
    if count != store.len() {
        return Err(Error::Schema(format!(
            "checkpoint lists {count} parameters, spec needs {}",
            store.len()
        )));
    }
    let mut filled = 0;
    for (offset, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if filled == count {
            return Err(Error::parse(offset + 4, "too many parameter values"));
        }
        store.values[filled] = line
            .trim()
            .parse()
            .map_err(|_| Error::parse(offset + 4, format!("bad parameter `{line}`")))?;
        filled += 1;
    }
    if filled != count {
        return Err(Error::Schema(format!("expected {count} parameters, read {filled}")));
    }
    Ok((spec, store))
}

pub fn save_checkpoint(spec: &NetworkSpec, params: &ParamStore, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(spec, params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(NetworkSpec, ParamStore)> {
    decode_checkpoint(&fs::read_to_string(path)?)
}
