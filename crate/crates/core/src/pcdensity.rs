//! Piecewise-constant densities carried by a binary partition tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Transform;
use crate::error::{OptError, Result};
use crate::geometry::{Region, MAX_CODE_LEN};

pub const TREE_FORMAT_VERSION: u32 = 1;

const THETA_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Split {
        dim: usize,
        /// Mass fractions sent to the lower and upper child.
        theta: [f64; 2],
        children: [usize; 2],
    },
    Leaf {
        /// `None` for a zero-mass leaf.
        log_density: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub region: Region,
    pub kind: NodeKind,
    /// Probability mass of the region.
    pub mass: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    /// Unit-cube density on a leaf, `0` for internal nodes.
    pub fn density(&self) -> f64 {
        match self.kind {
            NodeKind::Leaf {
                log_density: Some(l),
            } => l.exp(),
            _ => 0.0,
        }
    }
}

/// What to do with a region while growing a tree.
pub enum Growth<S> {
    Leaf,
    Split {
        dim: usize,
        theta: [f64; 2],
        lower: S,
        upper: S,
    },
}

/// A piecewise-constant density on the unit cube, with the affine map back
/// to data coordinates. Nodes are stored in preorder; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct HmapTree {
    p: usize,
    transform: Transform,
    nodes: Vec<TreeNode>,
}

/// Builds a tree top-down. `decide` sees each region once, in preorder, with
/// the state handed down by its parent.
pub fn grow<S, F>(p: usize, transform: Transform, root_state: S, mut decide: F) -> Result<HmapTree>
where
    F: FnMut(&Region, S) -> Result<Growth<S>>,
{
    if p == 0 {
        return Err(OptError::Config("tree dimension must be at least 1".into()));
    }
    if transform.dims() != p {
        return Err(OptError::Config(format!(
            "transform has {} dimensions, tree has {p}",
            transform.dims()
        )));
    }
    let mut nodes = Vec::new();
    grow_into(&mut nodes, Region::root(p), 1.0, root_state, &mut decide)?;
    Ok(HmapTree { p, transform, nodes })
}

fn grow_into<S, F>(nodes: &mut Vec<TreeNode>, region: Region, mass: f64, state: S, decide: &mut F) -> Result<usize>
where
    F: FnMut(&Region, S) -> Result<Growth<S>>,
{
    let idx = nodes.len();
    match decide(&region, state)? {
        Growth::Leaf => {
            let log_density = leaf_log_density(mass, &region);
            nodes.push(TreeNode {
                region,
                kind: NodeKind::Leaf { log_density },
                mass,
            });
        }
        Growth::Split {
            dim,
            theta,
            lower,
            upper,
        } => {
            if dim >= region.dims() {
                return Err(OptError::BadDimension {
                    dim,
                    p: region.dims(),
                });
            }
            if region.code_len(dim) >= MAX_CODE_LEN {
                return Err(OptError::DepthCap {
                    dim,
                    len: region.code_len(dim),
                    cap: MAX_CODE_LEN,
                });
            }
            check_theta(&region, theta)?;
            let lo_region = region.child(dim, false);
            let hi_region = region.child(dim, true);
            nodes.push(TreeNode {
                region,
                kind: NodeKind::Split {
                    dim,
                    theta,
                    children: [0, 0],
                },
                mass,
            });
            let lo = grow_into(nodes, lo_region, mass * theta[0], lower, decide)?;
            let hi = grow_into(nodes, hi_region, mass * theta[1], upper, decide)?;
            if let NodeKind::Split { children, .. } = &mut nodes[idx].kind {
                *children = [lo, hi];
            }
        }
    }
    Ok(idx)
}

fn leaf_log_density(mass: f64, region: &Region) -> Option<f64> {
    (mass > 0.0).then(|| mass.ln() - region.log_volume())
}

fn check_theta(region: &Region, theta: [f64; 2]) -> Result<()> {
    let ok = theta.iter().all(|t| t.is_finite() && (0.0..=1.0).contains(t))
        && (theta[0] + theta[1] - 1.0).abs() <= THETA_TOL;
    if ok {
        Ok(())
    } else {
        Err(OptError::Integrity(format!(
            "mass split {theta:?} at {} is not a probability pair",
            region.code()
        )))
    }
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    format_version: u32,
    p: usize,
    transform: Transform,
    nodes: Vec<NodeJson>,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    code: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<[f64; 2]>,
    /// Absent for split nodes, `null` for zero-density leaves.
    #[serde(default, skip_serializing_if = "skip_logdens")]
    logdens: Option<Option<f64>>,
}

fn skip_logdens(v: &Option<Option<f64>>) -> bool {
    v.is_none()
}

impl HmapTree {
    /// Single-leaf tree: the uniform density on the cube.
    pub fn uniform(p: usize, transform: Transform) -> Result<HmapTree> {
        grow(p, transform, (), |_, ()| Ok(Growth::Leaf))
    }

    pub fn dims(&self) -> usize {
        self.p
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> u32 {
        let root_level = self.nodes[0].region.level();
        self.leaves()
            .map(|n| n.region.level() - root_level)
            .max()
            .unwrap_or(0)
    }

    /// Index of the leaf containing a unit-cube point, if inside the cube.
    pub fn leaf_index(&self, u: &[f64]) -> Option<usize> {
        if u.len() != self.p || u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return None;
        }
        let mut i = 0;
        loop {
            match &self.nodes[i].kind {
                NodeKind::Leaf { .. } => return Some(i),
                NodeKind::Split { dim, children, .. } => {
                    let upper = self.nodes[i].region.upper_side(*dim, u[*dim]);
                    i = children[upper as usize];
                }
            }
        }
    }

    /// Density on the unit cube.
    pub fn eval_unit(&self, u: &[f64]) -> f64 {
        self.leaf_index(u).map_or(0.0, |i| self.nodes[i].density())
    }

    /// Density in data coordinates; zero outside the bounding box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x.len() != self.p || x.iter().any(|v| !v.is_finite()) {
            return 0.0;
        }
        let u = self.transform.to_unit(x);
        self.eval_unit(&u) * self.transform.jacobian()
    }

    /// `m` draws in data coordinates.
    pub fn sample(&self, seed: u64, m: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| {
                let u = self.sample_unit(&mut rng);
                self.transform.to_raw(&u)
            })
            .collect()
    }

    /// One draw on the unit cube.
    pub fn sample_unit<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut i = 0;
        loop {
            match &self.nodes[i].kind {
                NodeKind::Leaf { .. } => break,
                NodeKind::Split {
                    theta, children, ..
                } => {
                    let go_upper = rng.random::<f64>() >= theta[0];
                    i = children[go_upper as usize];
                }
            }
        }
        let region = &self.nodes[i].region;
        (0..self.p)
            .map(|d| {
                let (lo, hi) = region.interval(d);
                lo + (hi - lo) * rng.random::<f64>()
            })
            .collect()
    }

    /// Replaces leaf log-densities, in preorder, keeping the stored masses.
    pub(crate) fn override_leaf_log_densities(&mut self, values: &[Option<f64>]) {
        let mut it = values.iter();
        for node in &mut self.nodes {
            if let NodeKind::Leaf { log_density } = &mut node.kind {
                *log_density = *it.next().expect("one value per leaf");
            }
        }
    }

    /// Sum of leaf masses after checking every mass split.
    pub fn total_mass(&self) -> Result<f64> {
        for node in &self.nodes {
            if let NodeKind::Split { theta, .. } = node.kind {
                check_theta(&node.region, theta)?;
            }
        }
        let total: f64 = self.leaves().map(|n| n.density() * n.region.volume()).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(OptError::Integrity(format!("leaf masses sum to {total}, not 1")));
        }
        Ok(total)
    }

    /// Same leaf regions and split directions, ignoring masses.
    pub fn same_partition(&self, other: &HmapTree) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
                a.region == b.region
                    && match (&a.kind, &b.kind) {
                        (NodeKind::Leaf { .. }, NodeKind::Leaf { .. }) => true,
                        (NodeKind::Split { dim: da, .. }, NodeKind::Split { dim: db, .. }) => da == db,
                        _ => false,
                    }
            })
    }

    /// Exact Hellinger distance to another tree on the same cube, by
    /// overlaying the two partitions.
    pub fn hellinger(&self, other: &HmapTree) -> Result<f64> {
        if self.p != other.p || self.transform != other.transform {
            return Err(OptError::Config(
                "Hellinger distance needs trees over the same bounding box".into(),
            ));
        }
        let bc = self.overlap(other, 0, 0);
        Ok((1.0 - bc).max(0.0).sqrt())
    }

    /// `∫ √(f g)` over the intersection of node `a` of `self` and node `b`
    /// of `other`.
    fn overlap(&self, other: &HmapTree, a: usize, b: usize) -> f64 {
        let (na, nb) = (&self.nodes[a], &other.nodes[b]);
        match (&na.kind, &nb.kind) {
            (NodeKind::Split { children, .. }, _) => children
                .iter()
                .filter(|&&c| !self.nodes[c].region.is_disjoint(&nb.region))
                .map(|&c| self.overlap(other, c, b))
                .sum(),
            (_, NodeKind::Split { children, .. }) => children
                .iter()
                .filter(|&&c| !other.nodes[c].region.is_disjoint(&na.region))
                .map(|&c| self.overlap(other, a, c))
                .sum(),
            _ => {
                let (la, lb) = match (&na.kind, &nb.kind) {
                    (
                        NodeKind::Leaf {
                            log_density: Some(la),
                        },
                        NodeKind::Leaf {
                            log_density: Some(lb),
                        },
                    ) => (*la, *lb),
                    _ => return 0.0,
                };
                let level: u32 = (0..self.p)
                    .map(|d| na.region.code_len(d).max(nb.region.code_len(d)))
                    .sum();
                (0.5 * (la + lb) - level as f64 * std::f64::consts::LN_2).exp()
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Split { dim, theta, .. } => NodeJson {
                    code: n.region.code(),
                    kind: "split".into(),
                    dim: Some(*dim),
                    theta: Some(*theta),
                    logdens: None,
                },
                NodeKind::Leaf { log_density } => NodeJson {
                    code: n.region.code(),
                    kind: "leaf".into(),
                    dim: None,
                    theta: None,
                    logdens: Some(*log_density),
                },
            })
            .collect();
        serde_json::to_value(TreeJson {
            format_version: TREE_FORMAT_VERSION,
            p: self.p,
            transform: self.transform.clone(),
            nodes,
        })
        .expect("tree JSON serialization cannot fail")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("tree JSON serialization cannot fail")
    }

    /// Loads a tree saved by [`HmapTree::to_json`], checking structure and
    /// normalization.
    pub fn from_json(value: &serde_json::Value) -> Result<HmapTree> {
        let raw: TreeJson = serde_json::from_value(value.clone())?;
        if raw.format_version != TREE_FORMAT_VERSION {
            return Err(OptError::Format(format!(
                "unsupported tree format version {}",
                raw.format_version
            )));
        }
        raw.transform.validate()?;
        let mut cursor = 0;
        let tree = grow(raw.p, raw.transform, (), |region, ()| {
            let node = raw.nodes.get(cursor).ok_or_else(|| {
                OptError::Format(format!("tree ends before region {}", region.code()))
            })?;
            cursor += 1;
            if Region::parse(&node.code)? != *region {
                return Err(OptError::Format(format!(
                    "node {} has code {}, expected {}",
                    cursor - 1,
                    node.code,
                    region.code()
                )));
            }
            match node.kind.as_str() {
                "leaf" => Ok(Growth::Leaf),
                "split" => {
                    let dim = node
                        .dim
                        .ok_or_else(|| OptError::Format(format!("split {} has no dim", node.code)))?;
                    let theta = node
                        .theta
                        .ok_or_else(|| OptError::Format(format!("split {} has no theta", node.code)))?;
                    Ok(Growth::Split {
                        dim,
                        theta,
                        lower: (),
                        upper: (),
                    })
                }
                other => Err(OptError::Format(format!("unknown node kind {other:?}"))),
            }
        })?;
        if cursor != raw.nodes.len() {
            return Err(OptError::Format(format!(
                "{} trailing nodes after a complete tree",
                raw.nodes.len() - cursor
            )));
        }
        // Leaf densities are recomputed from theta; the stored values must agree.
        for (node, stored) in tree.nodes.iter().zip(&raw.nodes) {
            if let (NodeKind::Leaf { log_density }, Some(saved)) = (&node.kind, &stored.logdens) {
                let agree = match (log_density, saved) {
                    (None, None) => true,
                    (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                    _ => false,
                };
                if !agree {
                    return Err(OptError::Integrity(format!(
                        "leaf {} log-density {saved:?} disagrees with its mass splits",
                        stored.code
                    )));
                }
            }
        }
        tree.total_mass()?;
        Ok(tree)
    }

    pub fn from_json_str(s: &str) -> Result<HmapTree> {
        HmapTree::from_json(&serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_split(theta: [f64; 2]) -> HmapTree {
        grow(1, Transform::identity(1), 0u8, |_, depth| {
            Ok(if depth == 0 {
                Growth::Split {
                    dim: 0,
                    theta,
                    lower: 1,
                    upper: 1,
                }
            } else {
                Growth::Leaf
            })
        })
        .unwrap()
    }

    #[test]
    fn uniform_tree() {
        let t = HmapTree::uniform(2, Transform::identity(2)).unwrap();
        assert_eq!(t.eval(&[0.2, 0.9]), 1.0);
        assert_eq!(t.eval(&[1.0, 1.0]), 1.0);
        assert_eq!(t.eval(&[1.2, 0.5]), 0.0);
        assert_eq!(t.eval(&[-0.1, 0.5]), 0.0);
        assert_eq!(t.depth(), 0);
        assert_eq!(t.total_mass().unwrap(), 1.0);
    }

    #[test]
    fn one_split_densities() {
        let t = one_split([0.75, 0.25]);
        assert!((t.eval(&[0.2]) - 1.5).abs() < 1e-15);
        assert!((t.eval(&[0.7]) - 0.5).abs() < 1e-15);
        assert!((t.eval(&[0.5]) - 0.5).abs() < 1e-15);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.total_mass().unwrap(), 1.0);
    }

    #[test]
    fn raw_units_scale_density() {
        let tr = Transform::from_box(&[0.0], &[4.0]).unwrap();
        let t = HmapTree::uniform(1, tr).unwrap();
        assert!((t.eval(&[3.0]) - 0.25).abs() < 1e-15);
        assert_eq!(t.eval(&[5.0]), 0.0);
    }

    #[test]
    fn degenerate_theta_sends_all_samples_left() {
        let t = one_split([1.0, 0.0]);
        assert!(t.sample(3, 1000).iter().all(|x| x[0] < 0.5));
        assert_eq!(t.eval(&[0.7]), 0.0);
        let back = HmapTree::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn bad_theta_rejected() {
        let r = grow(1, Transform::identity(1), false, |_, done| {
            Ok(if done {
                Growth::Leaf
            } else {
                Growth::Split {
                    dim: 0,
                    theta: [0.6, 0.6],
                    lower: true,
                    upper: true,
                }
            })
        });
        assert!(matches!(r, Err(OptError::Integrity(_))));
    }

    #[test]
    fn tampered_json_is_rejected() {
        let t = one_split([0.75, 0.25]);
        let mut v = t.to_json();
        v["nodes"][0]["theta"] = serde_json::json!([0.75, 0.3]);
        assert!(matches!(HmapTree::from_json(&v), Err(OptError::Integrity(_))));

        let mut v = t.to_json();
        v["nodes"][1]["code"] = serde_json::json!("1");
        assert!(matches!(HmapTree::from_json(&v), Err(OptError::Format(_))));

        let mut v = t.to_json();
        v["nodes"][1]["logdens"] = serde_json::json!(0.0);
        assert!(matches!(HmapTree::from_json(&v), Err(OptError::Integrity(_))));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let t = one_split([0.3, 0.7]);
        let s = t.to_json_string();
        assert!(s.contains("\"format_version\""));
        let back = HmapTree::from_json_str(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json_string(), s);
    }

    #[test]
    fn hellinger_between_trees() {
        let u = HmapTree::uniform(1, Transform::identity(1)).unwrap();
        assert_eq!(u.hellinger(&u).unwrap(), 0.0);
        let left = one_split([1.0, 0.0]);
        // ∫ √(1·2) over [0, 1/2] = √2/2.
        let h = u.hellinger(&left).unwrap();
        assert!((h - (1.0 - 0.5f64.sqrt()).sqrt()).abs() < 1e-15);
        let right = one_split([0.0, 1.0]);
        assert_eq!(left.hellinger(&right).unwrap(), 1.0);
        assert!((left.hellinger(&u).unwrap() - h).abs() < 1e-15);
    }

    #[test]
    fn sample_frequencies_match_masses() {
        let t = one_split([0.3, 0.7]);
        let m = 100_000;
        let lower = t.sample(11, m).iter().filter(|x| x[0] < 0.5).count() as f64;
        let sd = (m as f64 * 0.3 * 0.7).sqrt();
        assert!((lower - 0.3 * m as f64).abs() < 3.0 * sd);
        assert_eq!(t.sample(5, 10), t.sample(5, 10));
    }
}
