use std::fmt;

use super::XzConfig;
use crate::error::{Error, Result};
use crate::trajectory::Mbr;

/// A quadtree element, identified by its path of quadrant digits from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct XzElement {
    pub digits: Vec<u8>,
}

impl XzElement {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn level(&self) -> usize {
        self.digits.len()
    }

    /// Cell of this element in unit-square coordinates: `(x0, y0, width)`.
    pub fn cell(&self) -> (f64, f64, f64) {
        let (mut x0, mut y0, mut w) = (0.0, 0.0, 1.0);
        for &d in &self.digits {
            w *= 0.5;
            if d & 1 == 1 {
                x0 += w;
            }
            if d & 2 == 2 {
                y0 += w;
            }
        }
        (x0, y0, w)
    }
}

impl std::str::FromStr for XzElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .bytes()
            .map(|b| match b {
                b'0'..=b'3' => Ok(b - b'0'),
                _ => Err(Error::Decode(format!("invalid quadrant digit in {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { digits })
    }
}

impl fmt::Display for XzElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Number of elements in the subtree rooted at depth `level` (itself included),
/// i.e. `(4^(g - level + 1) - 1) / 3`.
pub fn subtree_size(level: usize, resolution: u8) -> u64 {
    let depth = resolution as u32 + 1 - level as u32;
    ((1u128 << (2 * depth)) / 3) as u64
}

/// Number of distinct codes at resolution `g`.
pub fn total_elements(resolution: u8) -> u64 {
    subtree_size(0, resolution)
}

/// Depth-first pre-order position of `e` in the full quadtree of depth `g`.
pub fn sequence_code(e: &XzElement, cfg: &XzConfig) -> u64 {
    e.digits
        .iter()
        .enumerate()
        .map(|(i, &d)| d as u64 * subtree_size(i + 1, cfg.resolution) + 1)
        .sum()
}

/// Deepest element that contains the box's min corner and whose x-extension
/// covers the whole box.
pub fn xz2_element(mbr: &Mbr, cfg: &XzConfig) -> Result<XzElement> {
    if !cfg.world.contains(mbr) {
        return Err(Error::InvalidParam(format!("box {mbr:?} lies outside the index world")));
    }
    let [min_x, min_y, max_x, max_y] = cfg.normalize(mbr);
    let mut digits = Vec::with_capacity(cfg.resolution as usize);
    let (mut x0, mut y0, mut w) = (0.0f64, 0.0f64, 1.0f64);
    while digits.len() < cfg.resolution as usize {
        let half = w * 0.5;
        let xb = min_x >= x0 + half;
        let yb = min_y >= y0 + half;
        let cx = if xb { x0 + half } else { x0 };
        let cy = if yb { y0 + half } else { y0 };
        // child x-extension is [c, c + 2 * half]
        if max_x > cx + w || max_y > cy + w {
            break;
        }
        digits.push(xb as u8 + 2 * yb as u8);
        x0 = cx;
        y0 = cy;
        w = half;
    }
    Ok(XzElement { digits })
}
