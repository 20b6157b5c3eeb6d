use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::encoder::{HeadCoord, HeadMask};
use crate::error::{Error, Result};
use crate::importance::{HeadImportanceMatrix, HeadRanking};
use crate::runner::{check_format_version, write_atomic, FORMAT_VERSION};
use crate::seed;

/// Heads to prune, in pruning order. Also the mask exchange file format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrunePlan {
    pub format_version: String,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "H")]
    pub heads: usize,
    pub pruned: Vec<HeadCoord>,
}

impl PrunePlan {
    pub fn new(layers: usize, heads: usize, pruned: Vec<HeadCoord>) -> Self {
        Self { format_version: FORMAT_VERSION.to_string(), layers, heads, pruned }
    }

    pub fn k(&self) -> usize {
        self.pruned.len()
    }

    pub fn to_mask(&self) -> Result<HeadMask> {
        HeadMask::with_pruned(self.layers, self.heads, &self.pruned)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: Self = serde_json::from_str(&text)?;
        check_format_version(&plan.format_version, path)?;
        plan.to_mask()?;
        Ok(plan)
    }
}

/// The longest plan a sweep needs; the plan for `k` is its first `k` heads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSchedule {
    pub layers: usize,
    pub heads: usize,
    pub prefix: Vec<HeadCoord>,
    /// Heads passed over because pruning them would empty their layer.
    pub skipped: Vec<HeadCoord>,
}

impl PlanSchedule {
    pub fn plan(&self, k: usize) -> PrunePlan {
        PrunePlan::new(self.layers, self.heads, self.prefix[..k].to_vec())
    }

    /// Walks `order`, keeping each head unless it is the last active head
    /// of its layer, until `limit` heads are kept.
    pub fn from_order(order: &[HeadCoord], layers: usize, heads: usize, limit: usize) -> Result<Self> {
        check_order(order, layers, heads)?;
        let mut mask = HeadMask::full(layers, heads);
        let mut s = Self { layers, heads, prefix: Vec::new(), skipped: Vec::new() };
        for &c in order {
            if s.prefix.len() == limit {
                break;
            }
            if mask.active_in_layer(c.layer) == 1 {
                log::info!("skipping {c}: pruning it would empty layer {}", c.layer);
                s.skipped.push(c);
                continue;
            }
            mask.prune(c)?;
            s.prefix.push(c);
        }
        if s.prefix.len() < limit {
            return Err(Error::Validation(format!(
                "only {} of {limit} heads can be pruned without emptying a layer",
                s.prefix.len()
            )));
        }
        Ok(s)
    }

    /// Uniform draws without replacement from a generator seeded with
    /// `random_seed`. A draw that would empty a layer is rejected and
    /// redrawn.
    pub fn random(layers: usize, heads: usize, limit: usize, random_seed: u64) -> Result<Self> {
        let mut rng = seed::rng(random_seed);
        let mut pool: Vec<HeadCoord> = (0..layers)
            .flat_map(|l| (0..heads).map(move |h| HeadCoord::new(l, h)))
            .collect();
        let mut mask = HeadMask::full(layers, heads);
        let mut s = Self { layers, heads, prefix: Vec::new(), skipped: Vec::new() };
        while s.prefix.len() < limit {
            if pool.is_empty() {
                return Err(Error::Validation(format!(
                    "cannot draw {limit} heads without emptying a layer"
                )));
            }
            let c = pool.remove(rng.random_range(0..pool.len()));
            if mask.active_in_layer(c.layer) == 1 {
                s.skipped.push(c);
                continue;
            }
            mask.prune(c)?;
            s.prefix.push(c);
        }
        Ok(s)
    }
}

fn check_order(order: &[HeadCoord], layers: usize, heads: usize) -> Result<()> {
    let mut seen = vec![false; layers * heads];
    for c in order {
        if c.layer >= layers || c.head >= heads || std::mem::replace(&mut seen[c.layer * heads + c.head], true) {
            return Err(Error::Validation(format!(
                "ranking is not a permutation of the {layers}x{heads} heads ({c})"
            )));
        }
    }
    if order.len() != layers * heads {
        return Err(Error::Validation(format!(
            "ranking has {} heads, model has {}",
            order.len(),
            layers * heads
        )));
    }
    Ok(())
}

/// Most important first; ties broken by (layer, head) ascending.
pub fn descending_order(m: &HeadImportanceMatrix) -> Vec<HeadCoord> {
    let flat = m.flat();
    let mut idx: Vec<usize> = (0..flat.len()).collect();
    idx.sort_by(|&a, &b| flat[b].total_cmp(&flat[a]).then(a.cmp(&b)));
    idx.into_iter().map(|i| HeadCoord::new(i / m.heads, i % m.heads)).collect()
}

pub fn low_rank_schedule(ranking: &HeadRanking, layers: usize, heads: usize, limit: usize) -> Result<PlanSchedule> {
    PlanSchedule::from_order(&ranking.order, layers, heads, limit)
}
