//! Connected-component labeling on binary time-frequency grids and
//! gap-tolerant region merging.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn push(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.size.push(1);
        self.parent.len() - 1
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Cells as `(frame, bin)` pairs in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    pub cells: Vec<(usize, usize)>,
}

impl Region {
    /// `(first_frame, last_frame, first_bin, last_bin)`, inclusive.
    pub fn bounds(&self) -> (usize, usize, usize, usize) {
        self.cells.iter().fold((usize::MAX, 0, usize::MAX, 0), |(f0, f1, b0, b1), &(f, b)| {
            (f0.min(f), f1.max(f), b0.min(b), b1.max(b))
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Two-pass labeling of the `true` cells of a `rows × cols` row-major grid.
/// Regions are returned ordered by their first cell.
pub fn connected_regions(grid: &[bool], rows: usize, cols: usize, connectivity: Connectivity) -> Vec<Region> {
    assert_eq!(grid.len(), rows * cols);
    const NONE: usize = usize::MAX;
    let mut labels = vec![NONE; grid.len()];
    let mut sets = DisjointSet::new(0);
    for r in 0..rows {
        for c in 0..cols {
            if !grid[r * cols + c] {
                continue;
            }
            let mut neighbours = [NONE; 4];
            if c > 0 {
                neighbours[0] = labels[r * cols + c - 1];
            }
            if r > 0 {
                let up = (r - 1) * cols;
                neighbours[1] = labels[up + c];
                if connectivity == Connectivity::Eight {
                    if c > 0 {
                        neighbours[2] = labels[up + c - 1];
                    }
                    if c + 1 < cols {
                        neighbours[3] = labels[up + c + 1];
                    }
                }
            }
            let mut label = NONE;
            for &n in neighbours.iter().filter(|&&n| n != NONE) {
                if label == NONE {
                    label = n;
                } else {
                    sets.union(label, n);
                }
            }
            if label == NONE {
                label = sets.push();
            }
            labels[r * cols + c] = label;
        }
    }
    let mut slot = vec![NONE; sets.parent.len()];
    let mut regions: Vec<Region> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == NONE {
            continue;
        }
        let root = sets.find(l);
        if slot[root] == NONE {
            slot[root] = regions.len();
            regions.push(Region { cells: Vec::new() });
        }
        regions[slot[root]].cells.push((i / cols, i % cols));
    }
    regions
}

/// Gap between two inclusive intervals; zero when they touch or overlap.
fn interval_gap(a: (usize, usize), b: (usize, usize)) -> usize {
    if a.1 < b.0 {
        b.0 - a.1 - 1
    } else if b.1 < a.0 {
        a.0 - b.1 - 1
    } else {
        0
    }
}

/// Joins regions whose bounding boxes are at most `max_gap_frames` apart in
/// time and `max_gap_bins` apart in frequency, transitively. The result does
/// not depend on input order: cells are sorted within each merged region and
/// regions are ordered by their first cell.
pub fn merge_regions(regions: &[Region], max_gap_frames: usize, max_gap_bins: usize) -> Vec<Region> {
    let bounds: Vec<_> = regions.iter().map(Region::bounds).collect();
    let mut sets = DisjointSet::new(regions.len());
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            let (a, b) = (bounds[i], bounds[j]);
            if interval_gap((a.0, a.1), (b.0, b.1)) <= max_gap_frames && interval_gap((a.2, a.3), (b.2, b.3)) <= max_gap_bins {
                sets.union(i, j);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for (i, r) in regions.iter().enumerate() {
        groups.entry(sets.find(i)).or_default().extend_from_slice(&r.cells);
    }
    let mut merged: Vec<Region> = groups
        .into_values()
        .map(|mut cells| {
            cells.sort_unstable();
            cells.dedup();
            Region { cells }
        })
        .collect();
    merged.sort();
    merged
}
