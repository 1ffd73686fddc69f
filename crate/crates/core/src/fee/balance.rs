//! 2:1 grading of a dyadic leaf partition.

use rustc_hash::FxHashSet;

use crate::dataset::Transform;
use crate::error::{OptError, Result};
use crate::geometry::{Region, MAX_CODE_LEN};
use crate::pcdensity::{grow, Growth, HmapTree, NodeKind};

#[derive(Clone, Debug)]
struct Node {
    region: Region,
    split: Option<(usize, [usize; 2])>,
    /// Log-density inherited from the leaf of the source tree.
    log_density: Option<f64>,
}

/// Resolution of [`IntBox`] coordinates: one bit finer than the deepest
/// representable code, so every box center is an integer point.
pub const RES: u32 = MAX_CODE_LEN + 1;

/// Closed axis-aligned box in integer coordinates at resolution `2^RES`.
/// Dimensions with `lo == hi` are fixed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntBox {
    pub lo: Vec<u64>,
    pub hi: Vec<u64>,
}

impl IntBox {
    pub fn of_region(region: &Region) -> IntBox {
        let (lo, hi) = (0..region.dims()).map(|d| region.int_bounds(d, RES)).unzip();
        IntBox { lo, hi }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    /// Number of free dimensions.
    pub fn face_dim(&self) -> usize {
        self.lo.iter().zip(&self.hi).filter(|(l, h)| l < h).count()
    }

    /// Whether the closed box `other` meets `self` in a set of full
    /// dimension relative to `self`.
    pub fn touches_fully(&self, other: &IntBox) -> bool {
        (0..self.dims()).all(|d| {
            let lo = self.lo[d].max(other.lo[d]);
            let hi = self.hi[d].min(other.hi[d]);
            if self.lo[d] < self.hi[d] {
                lo < hi
            } else {
                lo <= hi
            }
        })
    }

    pub fn intersect(&self, other: &IntBox) -> IntBox {
        IntBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.max(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.min(b)).collect(),
        }
    }

    pub fn center(&self) -> Vec<u64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (l + h) / 2).collect()
    }

    /// The `2k` facets of a `k`-dimensional box.
    pub fn facets(&self) -> Vec<IntBox> {
        let mut out = Vec::new();
        for d in 0..self.dims() {
            if self.lo[d] < self.hi[d] {
                for v in [self.lo[d], self.hi[d]] {
                    let mut f = self.clone();
                    f.lo[d] = v;
                    f.hi[d] = v;
                    out.push(f);
                }
            }
        }
        out
    }
}

/// A leaf partition of the unit cube in which leaves sharing a facet differ
/// by at most one split in every dimension. Carries the piecewise-constant
/// density of the tree it was built from.
#[derive(Clone, Debug)]
pub struct GradedPartition {
    p: usize,
    transform: Transform,
    nodes: Vec<Node>,
    leaves: Vec<usize>,
}

impl GradedPartition {
    pub fn dims(&self) -> usize {
        self.p
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_region(&self, leaf: usize) -> &Region {
        &self.nodes[self.leaves[leaf]].region
    }

    pub fn leaf_log_density(&self, leaf: usize) -> Option<f64> {
        self.nodes[self.leaves[leaf]].log_density
    }

    pub fn leaf_density(&self, leaf: usize) -> f64 {
        self.leaf_log_density(leaf).map_or(0.0, f64::exp)
    }

    pub fn leaf_regions(&self) -> impl Iterator<Item = &Region> {
        self.leaves.iter().map(|&i| &self.nodes[i].region)
    }

    /// Largest code length over all leaves and dimensions.
    pub fn max_code_len(&self) -> u32 {
        self.leaf_regions().map(|r| r.max_code_len()).max().unwrap_or(0)
    }

    /// The leaves of `tree` as they are, without grading.
    pub fn from_leaves_of(tree: &HmapTree) -> GradedPartition {
        let src = tree.nodes();
        let mut nodes: Vec<Node> = src
            .iter()
            .map(|n| Node {
                region: n.region.clone(),
                split: None,
                log_density: None,
            })
            .collect();
        for (i, n) in src.iter().enumerate() {
            match n.kind {
                NodeKind::Split { dim, children, .. } => nodes[i].split = Some((dim, children)),
                NodeKind::Leaf { log_density } => nodes[i].log_density = log_density,
            }
        }
        let mut g = GradedPartition {
            p: tree.dims(),
            transform: tree.transform().clone(),
            nodes,
            leaves: Vec::new(),
        };
        g.reindex();
        g
    }

    fn reindex(&mut self) {
        self.leaves = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].split.is_none())
            .collect();
    }

    /// Leaf containing a unit-cube point.
    pub fn locate(&self, u: &[f64]) -> Option<usize> {
        if u.len() != self.p || u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return None;
        }
        let mut i = 0;
        while let Some((dim, children)) = self.nodes[i].split {
            i = children[self.nodes[i].region.upper_side(dim, u[dim]) as usize];
        }
        self.leaves.binary_search(&i).ok()
    }

    /// Node indices of leaves whose closure meets `face` in its full
    /// dimension.
    fn touching_nodes(&self, face: &IntBox) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let b = IntBox::of_region(&self.nodes[i].region);
            if !face.touches_fully(&b) {
                continue;
            }
            match self.nodes[i].split {
                Some((_, children)) => stack.extend(children),
                None => out.push(i),
            }
        }
        out
    }

    /// Positions in the leaf list of leaves touching `face` in its full
    /// dimension.
    pub fn touching_leaves(&self, face: &IntBox) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .touching_nodes(face)
            .into_iter()
            .map(|i| self.leaves.binary_search(&i).expect("touching node is a leaf"))
            .collect();
        v.sort_unstable();
        v
    }

    fn split_node(&mut self, i: usize, dim: usize) -> Result<[usize; 2]> {
        let region = self.nodes[i].region.clone();
        if region.code_len(dim) >= MAX_CODE_LEN {
            return Err(OptError::DepthCap {
                dim,
                len: region.code_len(dim),
                cap: MAX_CODE_LEN,
            });
        }
        let ld = self.nodes[i].log_density;
        let lo = self.nodes.len();
        for upper in [false, true] {
            self.nodes.push(Node {
                region: region.child(dim, upper),
                split: None,
                log_density: ld,
            });
        }
        self.nodes[i].split = Some((dim, [lo, lo + 1]));
        Ok([lo, lo + 1])
    }

    /// Checks the 2:1 condition across every shared facet.
    pub fn is_graded(&self) -> bool {
        self.leaves.iter().all(|&i| {
            let r = &self.nodes[i].region;
            IntBox::of_region(r).facets().iter().all(|f| {
                self.touching_nodes(f)
                    .into_iter()
                    .all(|j| (0..self.p).all(|d| r.code_len(d).abs_diff(self.nodes[j].region.code_len(d)) <= 1))
            })
        })
    }

    /// The same density as a tree; leaves added by grading carry the exact
    /// log-density of the leaf they came from.
    pub fn to_tree(&self) -> Result<HmapTree> {
        let mut leaf_lds = Vec::with_capacity(self.leaves.len());
        let mut tree = grow(self.p, self.transform.clone(), 0usize, |_, i| {
            Ok(match self.nodes[i].split {
                None => {
                    leaf_lds.push(self.nodes[i].log_density);
                    Growth::Leaf
                }
                Some((dim, [lo, hi])) => {
                    let (ml, mh) = (self.subtree_mass(lo), self.subtree_mass(hi));
                    let theta = if ml + mh > 0.0 {
                        let t = ml / (ml + mh);
                        [t, 1.0 - t]
                    } else {
                        [0.5, 0.5]
                    };
                    Growth::Split {
                        dim,
                        theta,
                        lower: lo,
                        upper: hi,
                    }
                }
            })
        })?;
        tree.override_leaf_log_densities(&leaf_lds);
        Ok(tree)
    }

    fn subtree_mass(&self, i: usize) -> f64 {
        match self.nodes[i].split {
            Some((_, [a, b])) => self.subtree_mass(a) + self.subtree_mass(b),
            None => self.nodes[i]
                .log_density
                .map_or(0.0, |l| (l + self.nodes[i].region.log_volume()).exp()),
        }
    }
}

/// Splits coarse leaves until neighbours across any facet differ by at most
/// one level in every dimension. The density is unchanged as a function.
pub fn balance_partition(tree: &HmapTree) -> Result<GradedPartition> {
    let mut g = GradedPartition::from_leaves_of(tree);
    let p = g.p;
    let mut queue: Vec<usize> = g.leaves.clone();
    let mut queued: FxHashSet<usize> = queue.iter().copied().collect();
    while let Some(i) = queue.pop() {
        queued.remove(&i);
        if g.nodes[i].split.is_some() {
            continue;
        }
        let region = g.nodes[i].region.clone();
        let mut refined = false;
        for facet in IntBox::of_region(&region).facets() {
            // Only coarse neighbours are split here; finer ones check from their side.
            for j in g.touching_nodes(&facet) {
                if j == i {
                    continue;
                }
                let other = &g.nodes[j].region;
                if let Some(d) = (0..p).find(|&d| region.code_len(d) > other.code_len(d) + 1) {
                    for k in g.split_node(j, d)? {
                        if queued.insert(k) {
                            queue.push(k);
                        }
                    }
                    refined = true;
                }
            }
        }
        if refined && queued.insert(i) {
            queue.push(i);
        }
    }
    g.reindex();
    debug_assert!(g.is_graded());
    Ok(g)
}
