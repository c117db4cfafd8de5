use std::path::Path;

use numkit::{read_checkpoint, write_checkpoint, Tape, Tensor, Var};

use crate::{NetError, Result};

/// Ordered, named collection of parameter tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Registers a tensor and returns its slot index.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> usize {
        self.entries.push((name.into(), tensor));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn tensor(&self, idx: usize) -> &Tensor {
        &self.entries[idx].1
    }

    pub fn tensor_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.entries[idx].1
    }

    /// Registers every tensor on the tape, in slot order.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.entries
            .iter()
            .map(|(_, t)| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    /// Copies current tape values back into the set after training.
    pub fn read_back(&mut self, tape: &Tape, vars: &[Var]) {
        debug_assert_eq!(vars.len(), self.entries.len());
        for ((_, t), v) in self.entries.iter_mut().zip(vars) {
            *t = tape.value(*v).clone();
            t.requires_grad = false;
            t.grad = None;
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let entries: Vec<(String, &Tensor)> = self
            .entries
            .iter()
            .map(|(n, t)| (n.clone(), t))
            .collect();
        write_checkpoint(path, &entries)?;
        Ok(())
    }

    /// Loads a checkpoint into this set; names and shapes must match exactly.
    pub fn load(&mut self, path: &Path) -> Result<()> {
        let loaded = read_checkpoint(path)?;
        if loaded.len() != self.entries.len() {
            return Err(NetError::Config(format!(
                "checkpoint has {} tensors, net expects {}",
                loaded.len(),
                self.entries.len()
            )));
        }
        for ((name, tensor), (want_name, want)) in loaded.into_iter().zip(&self.entries) {
            if &name != want_name || tensor.shape() != want.shape() {
                return Err(NetError::Config(format!(
                    "checkpoint tensor {name} {:?} does not match net slot {want_name} {:?}",
                    tensor.shape(),
                    want.shape()
                )));
            }
        }
        let loaded = read_checkpoint(path)?;
        for ((_, slot), (_, tensor)) in self.entries.iter_mut().zip(loaded) {
            *slot = tensor;
        }
        Ok(())
    }

    /// Sets every parameter to zero (test hook for the zero-net contracts).
    pub fn zero_all(&mut self) {
        for (_, t) in &mut self.entries {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
    }
}
