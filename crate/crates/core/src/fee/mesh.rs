//! Conforming simplicial mesh of a graded dyadic partition.
//!
//! Every box face is triangulated once and reused by every box that shares
//! it. A face is first cut along the boundaries of all leaves touching it;
//! each resulting cell is then coned from its center over the triangulations
//! of its own facets. Edges that no leaf cuts stay single segments. Because a
//! face's triangulation depends only on the face, neighbouring boxes see the
//! same simplices on their common boundary.

use std::rc::Rc;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use super::balance::{GradedPartition, IntBox, RES};
use super::simplex::simplex_volume;
use crate::error::{OptError, Result};

const VOLUME_RTOL: f64 = 1e-9;

type FacetKey = SmallVec<[u32; 8]>;

/// Simplicial mesh of the unit cube subordinate to a leaf partition.
#[derive(Clone, Debug)]
pub struct Triangulation {
    p: usize,
    /// Vertex coordinates in the unit cube, `p` per vertex.
    coords: Vec<f64>,
    /// Vertex indices, `p + 1` per simplex.
    simplices: Vec<u32>,
    simplex_leaf: Vec<u32>,
    leaf_simplices: Vec<Vec<u32>>,
    volumes: Vec<f64>,
    adjacency: Vec<SmallVec<[u32; 6]>>,
}

impl Triangulation {
    pub fn dims(&self) -> usize {
        self.p
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.p
    }

    pub fn simplex_count(&self) -> usize {
        self.volumes.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.p..(i + 1) * self.p]
    }

    pub fn simplex(&self, s: usize) -> &[u32] {
        let k = self.p + 1;
        &self.simplices[s * k..(s + 1) * k]
    }

    pub fn simplex_vertices(&self, s: usize) -> Vec<&[f64]> {
        self.simplex(s).iter().map(|&v| self.vertex(v as usize)).collect()
    }

    pub fn volume(&self, s: usize) -> f64 {
        self.volumes[s]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Leaf (position in the partition's leaf list) containing simplex `s`.
    pub fn leaf_of(&self, s: usize) -> usize {
        self.simplex_leaf[s] as usize
    }

    pub fn leaf_simplices(&self, leaf: usize) -> &[u32] {
        &self.leaf_simplices[leaf]
    }

    /// Simplices sharing a facet with `s`.
    pub fn neighbours(&self, s: usize) -> &[u32] {
        &self.adjacency[s]
    }

    pub(crate) fn from_parts(p: usize, coords: Vec<f64>, simplices: Vec<u32>, simplex_leaf: Vec<u32>, leaves: usize) -> Result<Triangulation> {
        let k = p + 1;
        if !simplices.len().is_multiple_of(k) || simplex_leaf.len() * k != simplices.len() {
            return Err(OptError::Format("simplex list does not match the dimension".into()));
        }
        let nv = coords.len() / p;
        if simplices.iter().any(|&v| v as usize >= nv) {
            return Err(OptError::Format("simplex refers to a missing vertex".into()));
        }
        let mut leaf_simplices = vec![Vec::new(); leaves];
        for (s, &l) in simplex_leaf.iter().enumerate() {
            leaf_simplices
                .get_mut(l as usize)
                .ok_or_else(|| OptError::Format(format!("simplex {s} refers to missing leaf {l}")))?
                .push(s as u32);
        }
        let mut tri = Triangulation {
            p,
            coords,
            simplices,
            simplex_leaf,
            leaf_simplices,
            volumes: Vec::new(),
            adjacency: Vec::new(),
        };
        tri.volumes = (0..tri.simplex_leaf.len())
            .map(|s| simplex_volume(&tri.simplex_vertices(s)))
            .collect::<Result<_>>()?;
        Ok(tri)
    }

    fn facet_map(&self) -> FxHashMap<FacetKey, SmallVec<[u32; 2]>> {
        let mut map: FxHashMap<FacetKey, SmallVec<[u32; 2]>> = FxHashMap::default();
        for s in 0..self.simplex_count() {
            let verts = self.simplex(s);
            for skip in 0..verts.len() {
                let mut key: FacetKey = verts
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                map.entry(key).or_default().push(s as u32);
            }
        }
        map
    }

    fn on_cube_boundary(&self, facet: &[u32]) -> bool {
        (0..self.p).any(|d| {
            let first = self.vertex(facet[0] as usize)[d];
            (first == 0.0 || first == 1.0) && facet.iter().all(|&v| self.vertex(v as usize)[d] == first)
        })
    }

    /// Checks that interior facets are shared by exactly two simplices,
    /// boundary facets lie on the cube boundary, and each leaf's simplices
    /// fill it. Fills in the adjacency lists.
    pub fn audit(&mut self, partition: &GradedPartition) -> Result<()> {
        let map = self.facet_map();
        let mut adjacency = vec![SmallVec::new(); self.simplex_count()];
        for (facet, owners) in &map {
            match owners.len() {
                1 if self.on_cube_boundary(facet) => {}
                2 => {
                    adjacency[owners[0] as usize].push(owners[1]);
                    adjacency[owners[1] as usize].push(owners[0]);
                }
                n => {
                    return Err(OptError::Internal(format!(
                        "non-conforming mesh: facet {facet:?} belongs to {n} simplices"
                    )))
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        self.adjacency = adjacency;
        for leaf in 0..partition.leaf_count() {
            let want = partition.leaf_region(leaf).volume();
            let got: f64 = self.leaf_simplices[leaf].iter().map(|&s| self.volumes[s as usize]).sum();
            if (got - want).abs() > VOLUME_RTOL * want {
                return Err(OptError::Internal(format!(
                    "simplices of leaf {} cover volume {got}, expected {want}",
                    partition.leaf_region(leaf)
                )));
            }
        }
        Ok(())
    }
}

struct Builder<'a> {
    partition: &'a GradedPartition,
    memo: FxHashMap<IntBox, Rc<Vec<u32>>>,
    vertex_ids: FxHashMap<Vec<u64>, u32>,
    int_coords: Vec<Vec<u64>>,
}

impl Builder<'_> {
    fn vertex(&mut self, point: Vec<u64>) -> u32 {
        if let Some(&id) = self.vertex_ids.get(&point) {
            return id;
        }
        let id = self.int_coords.len() as u32;
        self.int_coords.push(point.clone());
        self.vertex_ids.insert(point, id);
        id
    }

    /// Simplices of face `f`, flattened with `dim(f) + 1` vertices each.
    fn face(&mut self, f: &IntBox) -> Result<Rc<Vec<u32>>> {
        if let Some(s) = self.memo.get(f) {
            return Ok(s.clone());
        }
        let cells = self.cut(f)?;
        let out = if cells.len() == 1 {
            self.cell(f)?
        } else {
            let mut all = Vec::new();
            for c in &cells {
                all.extend_from_slice(&self.cell(c)?);
            }
            Rc::new(all)
        };
        self.memo.insert(f.clone(), out.clone());
        Ok(out)
    }

    /// Triangulation of a box no leaf cuts.
    fn cell(&mut self, c: &IntBox) -> Result<Rc<Vec<u32>>> {
        if let Some(s) = self.memo.get(c) {
            return Ok(s.clone());
        }
        let k = c.face_dim();
        let out = match k {
            0 => vec![self.vertex(c.lo.clone())],
            1 => vec![self.vertex(c.lo.clone()), self.vertex(c.hi.clone())],
            _ => {
                let center = self.vertex(c.center());
                let mut out = Vec::new();
                for facet in c.facets() {
                    for s in self.face(&facet)?.chunks(k) {
                        out.extend_from_slice(s);
                        out.push(center);
                    }
                }
                out
            }
        };
        let out = Rc::new(out);
        self.memo.insert(c.clone(), out.clone());
        Ok(out)
    }

    /// Common refinement of face `f` by the leaves around it: one cell per
    /// combination of neighbouring leaves, one leaf per side of `f`.
    fn cut(&self, f: &IntBox) -> Result<Vec<IntBox>> {
        let p = f.dims();
        let leaves = self.partition.touching_leaves(f);
        let boxes: Vec<IntBox> = leaves
            .iter()
            .map(|&l| IntBox::of_region(self.partition.leaf_region(l)))
            .collect();
        let pieces: Vec<IntBox> = boxes.iter().map(|b| f.intersect(b)).collect();
        if pieces.iter().all(|q| q == f) {
            return Ok(vec![f.clone()]);
        }
        let free: Vec<usize> = (0..p).filter(|&d| f.lo[d] < f.hi[d]).collect();
        let fixed: Vec<usize> = (0..p).filter(|&d| f.lo[d] == f.hi[d]).collect();
        let top = 1u64 << RES;
        // Sides of `f` that lie inside the cube.
        let sides: Vec<Vec<bool>> = (0..1usize << fixed.len())
            .map(|mask| (0..fixed.len()).map(|i| mask >> i & 1 == 1).collect::<Vec<bool>>())
            .filter(|side| {
                side.iter().zip(&fixed).all(|(&up, &d)| {
                    let v = f.lo[d];
                    if up {
                        v < top
                    } else {
                        v > 0
                    }
                })
            })
            .collect();
        let breaks: Vec<Vec<u64>> = free
            .iter()
            .map(|&d| {
                let mut b: Vec<u64> = pieces.iter().flat_map(|q| [q.lo[d], q.hi[d]]).collect();
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        let mut groups: FxHashMap<Vec<usize>, IntBox> = FxHashMap::default();
        let mut idx = vec![0usize; free.len()];
        loop {
            let mut cell = f.clone();
            for (i, &d) in free.iter().enumerate() {
                cell.lo[d] = breaks[i][idx[i]];
                cell.hi[d] = breaks[i][idx[i] + 1];
            }
            let mut key = Vec::with_capacity(sides.len());
            for side in &sides {
                let owner = boxes.iter().position(|b| {
                    free.iter().all(|&d| b.lo[d] <= cell.lo[d] && cell.hi[d] <= b.hi[d])
                        && side.iter().zip(&fixed).all(|(&up, &d)| {
                            let v = f.lo[d];
                            if up {
                                b.lo[d] <= v && v < b.hi[d]
                            } else {
                                b.lo[d] < v && v <= b.hi[d]
                            }
                        })
                });
                key.push(owner.ok_or_else(|| {
                    OptError::Internal(format!("no leaf covers a side of face {f:?}"))
                })?);
            }
            let merged = key.iter().fold(f.clone(), |acc, &i| acc.intersect(&pieces[i]));
            let fits = free.iter().all(|&d| merged.lo[d] <= cell.lo[d] && cell.hi[d] <= merged.hi[d]);
            if !fits {
                return Err(OptError::Internal(format!("face {f:?} has a non-box refinement cell")));
            }
            groups.entry(key).or_insert(merged);

            let mut i = 0;
            loop {
                if i == free.len() {
                    let mut cells: Vec<IntBox> = groups.into_values().collect();
                    cells.sort_by(|a, b| (&a.lo, &a.hi).cmp(&(&b.lo, &b.hi)));
                    return Ok(cells);
                }
                idx[i] += 1;
                if idx[i] + 1 < breaks[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }
}

/// Triangulates every leaf as the cone from its center over the shared
/// triangulations of its facets, then audits conformity.
pub fn triangulate(partition: &GradedPartition) -> Result<Triangulation> {
    let p = partition.dims();
    let mut b = Builder {
        partition,
        memo: FxHashMap::default(),
        vertex_ids: FxHashMap::default(),
        int_coords: Vec::new(),
    };
    let mut simplices = Vec::new();
    let mut simplex_leaf = Vec::new();
    for leaf in 0..partition.leaf_count() {
        let bx = IntBox::of_region(partition.leaf_region(leaf));
        let center = b.vertex(bx.center());
        for facet in bx.facets() {
            for s in b.face(&facet)?.chunks(p) {
                simplices.extend_from_slice(s);
                simplices.push(center);
                simplex_leaf.push(leaf as u32);
            }
        }
    }
    let scale = (-(RES as f64)).exp2();
    let coords = b
        .int_coords
        .iter()
        .flat_map(|v| v.iter().map(move |&x| x as f64 * scale))
        .collect();
    let mut tri = Triangulation::from_parts(p, coords, simplices, simplex_leaf, partition.leaf_count())?;
    tri.audit(partition)?;
    Ok(tri)
}
