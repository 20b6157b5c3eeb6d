use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates of one attention head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeadCoord {
    pub layer: usize,
    pub head: usize,
}

impl HeadCoord {
    pub fn new(layer: usize, head: usize) -> Self {
        Self { layer, head }
    }
}

impl fmt::Display for HeadCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}H{}", self.layer, self.head)
    }
}

/// Which heads take part in the forward pass. Every layer keeps at least
/// one active head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadMask {
    layers: usize,
    heads: usize,
    active: Vec<bool>,
}

impl HeadMask {
    pub fn full(layers: usize, heads: usize) -> Self {
        Self {
            layers,
            heads,
            active: vec![true; layers * heads],
        }
    }

    pub fn with_pruned(layers: usize, heads: usize, pruned: &[HeadCoord]) -> Result<Self> {
        let mut mask = Self::full(layers, heads);
        for &c in pruned {
            mask.prune(c)?;
        }
        Ok(mask)
    }

    /// Switches one head off. Refuses to empty a layer.
    pub fn prune(&mut self, c: HeadCoord) -> Result<()> {
        if c.layer >= self.layers || c.head >= self.heads {
            return Err(Error::Validation(format!(
                "head {c} outside a {}x{} model",
                self.layers, self.heads
            )));
        }
        if self.active[c.layer * self.heads + c.head] && self.active_in_layer(c.layer) == 1 {
            return Err(Error::Validation(format!(
                "pruning {c} would leave layer {} without heads",
                c.layer
            )));
        }
        self.active[c.layer * self.heads + c.head] = false;
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn is_active(&self, layer: usize, head: usize) -> bool {
        self.active[layer * self.heads + head]
    }

    pub fn active_in_layer(&self, layer: usize) -> usize {
        self.active[layer * self.heads..(layer + 1) * self.heads]
            .iter()
            .filter(|&&a| a)
            .count()
    }

    /// Pruned heads in row-major order.
    pub fn pruned(&self) -> Vec<HeadCoord> {
        (0..self.layers)
            .flat_map(|l| (0..self.heads).map(move |h| HeadCoord::new(l, h)))
            .filter(|c| !self.is_active(c.layer, c.head))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cannot_empty_a_layer() {
        let mut m = HeadMask::full(2, 2);
        m.prune(HeadCoord::new(0, 0)).unwrap();
        assert!(m.prune(HeadCoord::new(0, 1)).is_err());
        assert!(m.is_active(0, 1));
        m.prune(HeadCoord::new(1, 1)).unwrap();
        assert_eq!(m.pruned(), vec![HeadCoord::new(0, 0), HeadCoord::new(1, 1)]);
    }

    #[test]
    fn out_of_range_head_rejected() {
        assert!(HeadMask::with_pruned(2, 2, &[HeadCoord::new(2, 0)]).is_err());
    }
}
