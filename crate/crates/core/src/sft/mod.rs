//! SFT (spatial-first-time) index over a batch of query segments, and the
//! batched infected-rate join built on it.
//!
//! The spatial layer is a quadtree over the indexing world keyed by each
//! segment's MBR min corner; only populated branches are materialised. Each
//! leaf at depth `resolution` holds a [`TTree`] over its segments' time ranges.

mod join;
mod ttree;

pub use join::{irjq, irjq_unpruned, irjq_with, JoinOutcome, PairKey};
pub use ttree::{Envelope, TLeaf, TTree, TTreeNode};

use crate::trajectory::{Mbr, Segment};
use crate::xz::MAX_RESOLUTION;

/// Build parameters for the SFT index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SftConfig {
    pub resolution: u8,
    /// Time-tree leaf capacity.
    pub leaf_capacity: usize,
    /// Longest time span a time-tree leaf may cover, seconds.
    pub max_leaf_span: i64,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self { resolution: 15, leaf_capacity: 64, max_leaf_span: 86_400 }
    }
}

/// Quadtree node. Children are ordered NE, SE, SW, NW.
#[derive(Debug, Clone)]
pub struct SftQuadNode {
    pub cell: Mbr,
    pub depth: u8,
    pub children: [Option<Box<SftQuadNode>>; 4],
    pub time_tree: Option<TTree>,
}

impl SftQuadNode {
    fn new(cell: Mbr, depth: u8) -> Self {
        Self { cell, depth, children: Default::default(), time_tree: None }
    }

    fn child_cell(&self, q: usize) -> Mbr {
        let cx = (self.cell.min_lon + self.cell.max_lon) / 2.0;
        let cy = (self.cell.min_lat + self.cell.max_lat) / 2.0;
        let c = &self.cell;
        match q {
            0 => Mbr { min_lon: cx, min_lat: cy, max_lon: c.max_lon, max_lat: c.max_lat },
            1 => Mbr { min_lon: cx, min_lat: c.min_lat, max_lon: c.max_lon, max_lat: cy },
            2 => Mbr { min_lon: c.min_lon, min_lat: c.min_lat, max_lon: cx, max_lat: cy },
            _ => Mbr { min_lon: c.min_lon, min_lat: cy, max_lon: cx, max_lat: c.max_lat },
        }
    }

    fn quadrant_of(&self, lon: f64, lat: f64) -> usize {
        let east = lon >= (self.cell.min_lon + self.cell.max_lon) / 2.0;
        let north = lat >= (self.cell.min_lat + self.cell.max_lat) / 2.0;
        match (east, north) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.time_tree.is_some()
    }

    /// Time-tree leaves in depth-first order (quadrants NE, SE, SW, NW).
    pub fn leaves_dfs(&self) -> Vec<&TLeaf> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a TLeaf>) {
        if let Some(t) = &self.time_tree {
            out.extend(t.leaves_dfs());
        }
        for c in self.children.iter().flatten() {
            c.collect(out);
        }
    }
}

/// SFT index: segments plus the quadtree referring to them by position.
#[derive(Debug, Clone)]
pub struct Sft {
    pub root: SftQuadNode,
    pub segments: Vec<Segment>,
}

impl Sft {
    /// Builds the index over `segments` within `world`.
    pub fn build(segments: Vec<Segment>, world: Mbr, cfg: &SftConfig) -> Sft {
        let resolution = cfg.resolution.min(MAX_RESOLUTION);
        let envs: Vec<Envelope> = segments.iter().map(|s| Envelope { tr: s.time_range(), mbr: s.mbr }).collect();
        let mut root = SftQuadNode::new(world, 0);
        for (i, s) in segments.iter().enumerate() {
            let lon = s.mbr.min_lon.clamp(world.min_lon, world.max_lon);
            let lat = s.mbr.min_lat.clamp(world.min_lat, world.max_lat);
            let mut node = &mut root;
            while node.depth < resolution {
                let q = node.quadrant_of(lon, lat);
                let cell = node.child_cell(q);
                let depth = node.depth + 1;
                node = node.children[q].get_or_insert_with(|| Box::new(SftQuadNode::new(cell, depth)));
            }
            node.time_tree
                .get_or_insert_with(|| TTree::new(cfg.leaf_capacity, cfg.max_leaf_span))
                .insert(i, envs[i], &envs);
        }
        log::debug!("sft over {} segments: {} leaves", segments.len(), root.leaves_dfs().len());
        Sft { root, segments }
    }

    pub fn leaves(&self) -> Vec<&TLeaf> {
        self.root.leaves_dfs()
    }
}
