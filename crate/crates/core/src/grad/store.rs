use serde::{Deserialize, Serialize};

use super::GradError;

/// Handle to a named parameter block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

/// All real trainable parameters of a model, grouped in named flat blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<ParamId, GradError> {
        let name = name.into();
        if self.id(&name).is_some() {
            return Err(GradError::DuplicateBlock(name));
        }
        let grads = vec![0.0; values.len()];
        self.blocks.push(ParamBlock { name, values, grads });
        Ok(ParamId(self.blocks.len() - 1))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.blocks.iter().position(|b| b.name == name).map(ParamId)
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.blocks[id.0].values
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.blocks[id.0].values
    }

    pub fn grads(&self, id: ParamId) -> &[f64] {
        &self.blocks[id.0].grads
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total number of real parameters.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grads(&mut self) {
        for b in &mut self.blocks {
            b.grads.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// A zeroed gradient buffer shaped like this store.
    pub fn grad_buffer(&self) -> GradBuffer {
        GradBuffer { blocks: self.blocks.iter().map(|b| vec![0.0; b.values.len()]).collect() }
    }

    /// Adds a worker's buffer into the store's own gradient buffers.
    pub fn accumulate(&mut self, buf: &GradBuffer) {
        for (b, g) in self.blocks.iter_mut().zip(&buf.blocks) {
            for (dst, src) in b.grads.iter_mut().zip(g) {
                *dst += src;
            }
        }
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.grads.iter().copied()).collect()
    }

    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<(), GradError> {
        if flat.len() != self.len() {
            return Err(GradError::Shape { expected: self.len(), got: flat.len() });
        }
        let mut k = 0;
        for b in &mut self.blocks {
            let n = b.values.len();
            b.values.copy_from_slice(&flat[k..k + n]);
            k += n;
        }
        Ok(())
    }
}

/// Per-worker gradient accumulator with the same block layout as a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradBuffer {
    blocks: Vec<Vec<f64>>,
}

impl GradBuffer {
    pub fn block(&self, id: ParamId) -> &[f64] {
        &self.blocks[id.0]
    }

    pub(crate) fn block_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.blocks[id.0]
    }

    pub fn add_assign(&mut self, other: &GradBuffer) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|g| g.is_finite())
    }
}
