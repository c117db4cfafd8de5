//! On-disk demonstration store.
//!
//! A dataset is a directory of three files: `meta.json` (dimensions,
//! normalization statistics, version), `episodes.bin` (concatenated binary
//! records: an 8-byte little-endian step count, then states and actions as
//! little-endian f64), and `index.json` (byte offsets plus per-episode
//! bookkeeping).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{EnvError, Result};

pub const DATASET_MAGIC: &str = "SDLB-DATASET";
pub const FORMAT_VERSION: u32 = 1;

/// One recorded demonstration. States are `t_len x state_dim`, actions are
/// `(t_len - 1) x action_dim`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub env_name: String,
    pub seed: u64,
    pub success: bool,
    pub t_len: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl Episode {
    pub fn state_at(&self, t: usize, state_dim: usize) -> &[f64] {
        &self.states[t * state_dim..(t + 1) * state_dim]
    }

    pub fn action_at(&self, t: usize, action_dim: usize) -> &[f64] {
        &self.actions[t * action_dim..(t + 1) * action_dim]
    }
}

/// Per-dimension min/max ranges mapping raw values into [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub state_min: Vec<f64>,
    pub state_max: Vec<f64>,
    pub action_min: Vec<f64>,
    pub action_max: Vec<f64>,
}

impl NormStats {
    pub fn from_episodes(episodes: &[Episode], state_dim: usize, action_dim: usize) -> NormStats {
        let mut stats = NormStats {
            state_min: vec![f64::INFINITY; state_dim],
            state_max: vec![f64::NEG_INFINITY; state_dim],
            action_min: vec![f64::INFINITY; action_dim],
            action_max: vec![f64::NEG_INFINITY; action_dim],
        };
        for ep in episodes {
            for row in ep.states.chunks_exact(state_dim) {
                for (d, &v) in row.iter().enumerate() {
                    stats.state_min[d] = stats.state_min[d].min(v);
                    stats.state_max[d] = stats.state_max[d].max(v);
                }
            }
            for row in ep.actions.chunks_exact(action_dim) {
                for (d, &v) in row.iter().enumerate() {
                    stats.action_min[d] = stats.action_min[d].min(v);
                    stats.action_max[d] = stats.action_max[d].max(v);
                }
            }
        }
        // degenerate dims (no data, or constant) normalize to zero
        for d in 0..state_dim {
            if !stats.state_min[d].is_finite() {
                stats.state_min[d] = 0.0;
                stats.state_max[d] = 0.0;
            }
        }
        for d in 0..action_dim {
            if !stats.action_min[d].is_finite() {
                stats.action_min[d] = 0.0;
                stats.action_max[d] = 0.0;
            }
        }
        stats
    }

    fn map(v: f64, lo: f64, hi: f64) -> f64 {
        let span = hi - lo;
        if span <= 1e-12 {
            0.0
        } else {
            2.0 * (v - lo) / span - 1.0
        }
    }

    fn unmap(v: f64, lo: f64, hi: f64) -> f64 {
        let span = hi - lo;
        if span <= 1e-12 {
            lo
        } else {
            (v + 1.0) / 2.0 * span + lo
        }
    }

    pub fn normalize_state(&self, raw: &[f64], out: &mut [f64]) {
        for (d, (&v, o)) in raw.iter().zip(out.iter_mut()).enumerate() {
            *o = Self::map(v, self.state_min[d], self.state_max[d]);
        }
    }

    pub fn denormalize_state(&self, norm: &[f64], out: &mut [f64]) {
        for (d, (&v, o)) in norm.iter().zip(out.iter_mut()).enumerate() {
            *o = Self::unmap(v, self.state_min[d], self.state_max[d]);
        }
    }

    pub fn normalize_action(&self, raw: &[f64], out: &mut [f64]) {
        for (d, (&v, o)) in raw.iter().zip(out.iter_mut()).enumerate() {
            *o = Self::map(v, self.action_min[d], self.action_max[d]);
        }
    }

    pub fn denormalize_action(&self, norm: &[f64], out: &mut [f64]) {
        for (d, (&v, o)) in norm.iter().zip(out.iter_mut()).enumerate() {
            *o = Self::unmap(v, self.action_min[d], self.action_max[d]);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub magic: String,
    pub format_version: u32,
    pub env_name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub n_episodes: usize,
    pub normalization: NormStats,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    offset: u64,
    t_len: usize,
    seed: u64,
    success: bool,
    metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn new(
        env_name: &str,
        state_dim: usize,
        action_dim: usize,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        episodes: Vec<Episode>,
    ) -> Dataset {
        let normalization = NormStats::from_episodes(&episodes, state_dim, action_dim);
        Dataset {
            meta: DatasetMeta {
                magic: DATASET_MAGIC.to_string(),
                format_version: FORMAT_VERSION,
                env_name: env_name.to_string(),
                state_dim,
                action_dim,
                n_episodes: episodes.len(),
                normalization,
                action_low,
                action_high,
            },
            episodes,
        }
    }

    /// A dataset restricted to the first `n` episodes, with stats recomputed.
    pub fn truncated(&self, n: usize) -> Dataset {
        let episodes: Vec<Episode> = self.episodes.iter().take(n).cloned().collect();
        Dataset::new(
            &self.meta.env_name,
            self.meta.state_dim,
            self.meta.action_dim,
            self.meta.action_low.clone(),
            self.meta.action_high.clone(),
            episodes,
        )
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut blob = Vec::new();
        let mut index = Vec::with_capacity(self.episodes.len());
        for ep in &self.episodes {
            index.push(IndexEntry {
                offset: blob.len() as u64,
                t_len: ep.t_len,
                seed: ep.seed,
                success: ep.success,
                metadata: ep.metadata.clone(),
            });
            blob.extend_from_slice(&(ep.t_len as u64).to_le_bytes());
            for v in ep.states.iter().chain(ep.actions.iter()) {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(dir.join("episodes.bin"), blob)?;
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta)?)?;
        fs::write(dir.join("index.json"), serde_json::to_string(&index)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Dataset> {
        let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        if meta.magic != DATASET_MAGIC {
            return Err(EnvError::Dataset(format!(
                "{}: bad magic {:?}",
                dir.display(),
                meta.magic
            )));
        }
        if meta.format_version != FORMAT_VERSION {
            return Err(EnvError::Dataset(format!(
                "{}: format version {} (expected {FORMAT_VERSION})",
                dir.display(),
                meta.format_version
            )));
        }
        let index: Vec<IndexEntry> =
            serde_json::from_str(&fs::read_to_string(dir.join("index.json"))?)?;
        if index.len() != meta.n_episodes {
            return Err(EnvError::Dataset(format!(
                "{}: index has {} entries, meta says {}",
                dir.display(),
                index.len(),
                meta.n_episodes
            )));
        }
        let blob = fs::read(dir.join("episodes.bin"))?;
        let mut episodes = Vec::with_capacity(index.len());
        for entry in index {
            let at = entry.offset as usize;
            let need_header = at + 8;
            if need_header > blob.len() {
                return Err(EnvError::Dataset(format!(
                    "{}: truncated episode header at offset {at}",
                    dir.display()
                )));
            }
            let t_len = u64::from_le_bytes(blob[at..at + 8].try_into().unwrap()) as usize;
            if t_len != entry.t_len || t_len == 0 {
                return Err(EnvError::Dataset(format!(
                    "{}: inconsistent step count at offset {at}",
                    dir.display()
                )));
            }
            let n_state = t_len * meta.state_dim;
            let n_action = (t_len - 1) * meta.action_dim;
            let end = need_header + (n_state + n_action) * 8;
            if end > blob.len() {
                return Err(EnvError::Dataset(format!(
                    "{}: truncated episode payload at offset {at}",
                    dir.display()
                )));
            }
            let floats: Vec<f64> = blob[need_header..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            episodes.push(Episode {
                env_name: meta.env_name.clone(),
                seed: entry.seed,
                success: entry.success,
                t_len,
                states: floats[..n_state].to_vec(),
                actions: floats[n_state..].to_vec(),
                metadata: entry.metadata,
            });
        }
        Ok(Dataset { meta, episodes })
    }
}
