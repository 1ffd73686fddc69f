//! Sample ingestion into the unit cube and per-region sample counting.

use serde::{Deserialize, Serialize};

use crate::error::{OptError, Result};
use crate::geometry::Region;

/// Relative padding applied to constant columns.
const DEGENERATE_PAD: f64 = 1e-9;

/// Per-dimension affine map `unit = raw * scale + offset` into `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Transform {
    pub fn identity(p: usize) -> Transform {
        Transform {
            scale: vec![1.0; p],
            offset: vec![0.0; p],
        }
    }

    /// Map taking the box `[lower, upper]` onto the unit cube.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Transform> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(OptError::Config("bounding box dimension mismatch".into()));
        }
        let mut scale = Vec::with_capacity(lower.len());
        let mut offset = Vec::with_capacity(lower.len());
        for (j, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(OptError::Config(format!(
                    "bounding box dimension {j} is empty or not finite: [{lo}, {hi}]"
                )));
            }
            let s = 1.0 / (hi - lo);
            scale.push(s);
            offset.push(-lo * s);
        }
        Ok(Transform { scale, offset })
    }

    pub fn dims(&self) -> usize {
        self.scale.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale.len() != self.offset.len() || self.scale.is_empty() {
            return Err(OptError::Format("transform scale/offset length mismatch".into()));
        }
        if self
            .scale
            .iter()
            .chain(&self.offset)
            .any(|v| !v.is_finite())
            || self.scale.contains(&0.0)
        {
            return Err(OptError::Format("transform is not invertible".into()));
        }
        Ok(())
    }

    pub fn to_unit(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(&x, (&s, &o))| x * s + o)
            .collect()
    }

    pub fn to_raw(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(&u, (&s, &o))| (u - o) / s)
            .collect()
    }

    /// Jacobian of the raw-to-unit map; densities in raw units are unit-cube
    /// densities times this factor.
    pub fn jacobian(&self) -> f64 {
        self.scale.iter().map(|s| s.abs()).product()
    }

    pub fn is_identity(&self) -> bool {
        self.scale.iter().all(|&s| s == 1.0) && self.offset.iter().all(|&o| o == 0.0)
    }
}

/// `n × p` samples rescaled into `[0,1]^p`, stored row-major.
#[derive(Clone, Debug)]
pub struct SampleSet {
    data: Vec<f64>,
    n: usize,
    p: usize,
    transform: Transform,
    ids: Option<Vec<String>>,
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    if rows.is_empty() {
        return Err(OptError::Empty("no samples".into()));
    }
    let p = rows[0].len();
    if p == 0 {
        return Err(OptError::Empty("samples have no columns".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(OptError::Data {
                row: i,
                col: row.len().min(p),
                reason: format!("expected {p} columns, found {}", row.len()),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(OptError::Data {
                row: i,
                col: j,
                reason: format!("non-finite value {}", row[j]),
            });
        }
    }
    Ok(p)
}

impl SampleSet {
    /// Min–max rescaling per dimension. Constant columns are padded by a
    /// width of `1e-9` times the overall data scale.
    pub fn ingest(rows: &[Vec<f64>]) -> Result<SampleSet> {
        let p = check_rows(rows)?;
        let mut lower = rows[0].clone();
        let mut upper = rows[0].clone();
        for row in rows {
            for j in 0..p {
                lower[j] = lower[j].min(row[j]);
                upper[j] = upper[j].max(row[j]);
            }
        }
        let overall = {
            let range = (0..p).map(|j| upper[j] - lower[j]).fold(0.0, f64::max);
            if range > 0.0 {
                range
            } else {
                let mag = lower.iter().chain(&upper).fold(0.0f64, |m, v| m.max(v.abs()));
                if mag > 0.0 {
                    mag
                } else {
                    1.0
                }
            }
        };
        for j in 0..p {
            if upper[j] <= lower[j] {
                let pad = 0.5 * DEGENERATE_PAD * overall;
                lower[j] -= pad;
                upper[j] += pad;
            }
        }
        let transform = Transform::from_box(&lower, &upper)?;
        Self::build(rows, p, transform)
    }

    /// Rescaling from an explicit bounding box; every sample must lie inside it.
    pub fn ingest_with_bounds(rows: &[Vec<f64>], lower: &[f64], upper: &[f64]) -> Result<SampleSet> {
        let p = check_rows(rows)?;
        if lower.len() != p || upper.len() != p {
            return Err(OptError::Config(format!(
                "bounding box has {} dimensions, data has {p}",
                lower.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            for j in 0..p {
                if row[j] < lower[j] || row[j] > upper[j] {
                    return Err(OptError::Data {
                        row: i,
                        col: j,
                        reason: format!(
                            "value {} outside bounding box [{}, {}]",
                            row[j], lower[j], upper[j]
                        ),
                    });
                }
            }
        }
        let transform = Transform::from_box(lower, upper)?;
        Self::build(rows, p, transform)
    }

    /// Samples already in the unit cube, identity transform.
    pub fn unit_cube(rows: &[Vec<f64>]) -> Result<SampleSet> {
        let p = check_rows(rows)?;
        Self::ingest_with_bounds(rows, &vec![0.0; p], &vec![1.0; p])
    }

    fn build(rows: &[Vec<f64>], p: usize, transform: Transform) -> Result<SampleSet> {
        let mut data = Vec::with_capacity(rows.len() * p);
        for row in rows {
            data.extend(transform.to_unit(row).into_iter().map(|u| u.clamp(0.0, 1.0)));
        }
        Ok(SampleSet {
            data,
            n: rows.len(),
            p,
            transform,
            ids: None,
        })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<SampleSet> {
        if ids.len() != self.n {
            return Err(OptError::Config(format!(
                "{} identifiers for {} samples",
                ids.len(),
                self.n
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dims(&self) -> usize {
        self.p
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Unit-cube coordinates of sample `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn coord(&self, i: usize, dim: usize) -> f64 {
        self.data[i * self.p + dim]
    }

    pub fn all_members(&self) -> Vec<u32> {
        (0..self.n as u32).collect()
    }

    /// Splits `members` of `region` by the midpoint of `dim`.
    pub fn partition(&self, region: &Region, dim: usize, members: &[u32]) -> (Vec<u32>, Vec<u32>) {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for &i in members {
            if region.upper_side(dim, self.coord(i as usize, dim)) {
                upper.push(i);
            } else {
                lower.push(i);
            }
        }
        (lower, upper)
    }

    /// Number of members in the lower child along `dim`.
    pub fn count_lower(&self, region: &Region, dim: usize, members: &[u32]) -> usize {
        members
            .iter()
            .filter(|&&i| !region.upper_side(dim, self.coord(i as usize, dim)))
            .count()
    }

    /// Counts and membership lists for all `p` midpoint splits of `region`.
    /// Touches only the member rows.
    pub fn count_children(&self, region: &Region, members: &[u32]) -> Result<ChildCounts> {
        if let Some(&bad) = members.iter().find(|&&i| !region.contains(self.row(i as usize))) {
            return Err(OptError::Internal(format!(
                "sample {bad} is not inside region {}",
                region.code()
            )));
        }
        let mut counts = Vec::with_capacity(self.p);
        let mut children = Vec::with_capacity(self.p);
        for dim in 0..self.p {
            let (lo, hi) = self.partition(region, dim, members);
            counts.push([lo.len(), hi.len()]);
            children.push((lo, hi));
        }
        Ok(ChildCounts {
            counts: RegionCounts { counts },
            children,
        })
    }
}

/// Per-split child counts `(n_lower, n_upper)` for one region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionCounts {
    pub counts: Vec<[usize; 2]>,
}

impl RegionCounts {
    pub fn total(&self) -> usize {
        self.counts.first().map(|c| c[0] + c[1]).unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct ChildCounts {
    pub counts: RegionCounts,
    /// `(lower, upper)` member lists for each split dimension.
    pub children: Vec<(Vec<u32>, Vec<u32>)>,
}
