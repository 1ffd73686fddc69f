//! Dyadic hyperrectangles in the unit cube and the binary midpoint partition.
//!
//! A region is identified by one binary code per dimension: the digits
//! `b1..bk` select the interval `[s/2^k, (s+1)/2^k)` where `s` is the binary
//! value of the digits. The text form joins the per-dimension codes with `|`
//! and spells an empty code as `ε` (or `e` in ASCII mode), so the level-3
//! region `[0,1]×[.25,.5]×[.5,1]` reads `ε|01|1`.
//!
//! Points on a midpoint belong to the upper child. The upper face of the unit
//! cube belongs to the last interval in each dimension.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{OptError, Result};

/// Hard limit on digits per dimension; dyadic bounds stay exact in `f64`.
pub const MAX_CODE_LEN: u32 = 52;

/// Default per-dimension cap used by [`PartitionScheme::new`].
pub const DEFAULT_DEPTH_CAP: u32 = 40;

/// Empty-segment symbol in the canonical code.
pub const EMPTY_SEGMENT: char = 'ε';
const EMPTY_SEGMENT_ASCII: char = 'e';

/// Per-dimension code packed as a leading sentinel bit followed by the digits.
/// The root interval is `1`, digits "01" are `0b101`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct DimCode(u64);

impl DimCode {
    const ROOT: DimCode = DimCode(1);

    #[inline]
    fn len(self) -> u32 {
        63 - self.0.leading_zeros()
    }

    #[inline]
    fn bits(self) -> u64 {
        self.0 ^ (1u64 << self.len())
    }

    #[inline]
    fn push(self, digit: u64) -> DimCode {
        DimCode((self.0 << 1) | digit)
    }
}

/// A dyadic hyperrectangle reachable from `[0,1]^p` by midpoint splits.
///
/// Equality, ordering and hashing all go through the per-dimension codes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    codes: SmallVec<[DimCode; 4]>,
}

impl Region {
    pub fn root(p: usize) -> Region {
        assert!(p >= 1, "region dimension must be at least 1");
        Region {
            codes: SmallVec::from_elem(DimCode::ROOT, p),
        }
    }

    /// Builds a region from explicit `(digits, length)` pairs per dimension.
    pub fn from_bits(parts: &[(u64, u32)]) -> Result<Region> {
        if parts.is_empty() {
            return Err(OptError::Config("region needs at least one dimension".into()));
        }
        let mut codes = SmallVec::with_capacity(parts.len());
        for (dim, &(bits, len)) in parts.iter().enumerate() {
            if len > MAX_CODE_LEN {
                return Err(OptError::DepthCap {
                    dim,
                    len,
                    cap: MAX_CODE_LEN,
                });
            }
            if len < 64 && bits >> len != 0 {
                return Err(OptError::Config(format!(
                    "digits {bits:#b} do not fit in {len} positions"
                )));
            }
            codes.push(DimCode((1u64 << len) | bits));
        }
        Ok(Region { codes })
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.codes.len()
    }

    /// Number of digits in dimension `dim`.
    #[inline]
    pub fn code_len(&self, dim: usize) -> u32 {
        self.codes[dim].len()
    }

    /// Binary value of the digits in dimension `dim`.
    #[inline]
    pub fn code_bits(&self, dim: usize) -> u64 {
        self.codes[dim].bits()
    }

    /// Level in the partition tree: total number of digits.
    pub fn level(&self) -> u32 {
        self.codes.iter().map(|c| c.len()).sum()
    }

    /// Closed-open bounds `[lo, hi)` of dimension `dim`.
    pub fn interval(&self, dim: usize) -> (f64, f64) {
        let c = self.codes[dim];
        let width = (-(c.len() as f64)).exp2();
        let lo = c.bits() as f64 * width;
        (lo, lo + width)
    }

    pub fn lower(&self) -> Vec<f64> {
        (0..self.dims()).map(|d| self.interval(d).0).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dims()).map(|d| self.interval(d).1).collect()
    }

    pub fn width(&self, dim: usize) -> f64 {
        (-(self.code_len(dim) as f64)).exp2()
    }

    /// Lebesgue measure, an exact power of two.
    pub fn volume(&self) -> f64 {
        (-(self.level() as f64)).exp2()
    }

    pub fn log_volume(&self) -> f64 {
        -(self.level() as f64) * std::f64::consts::LN_2
    }

    /// Lower (`false`) or upper (`true`) child along `dim`, without cap checks
    /// beyond the hard representability limit.
    pub fn child(&self, dim: usize, upper: bool) -> Region {
        debug_assert!(self.code_len(dim) < MAX_CODE_LEN);
        let mut codes = self.codes.clone();
        codes[dim] = codes[dim].push(upper as u64);
        Region { codes }
    }

    /// Parent along `dim`, or `None` if that dimension has no digits.
    pub fn parent_along(&self, dim: usize) -> Option<Region> {
        let c = self.codes[dim];
        if c.len() == 0 {
            return None;
        }
        let mut codes = self.codes.clone();
        codes[dim] = DimCode(c.0 >> 1);
        Some(Region { codes })
    }

    /// Dyadic cell index of coordinate `x` at resolution `2^len`.
    #[inline]
    fn cell(x: f64, len: u32) -> u64 {
        let n = 1u64 << len;
        let scaled = (x * n as f64).floor();
        if scaled <= 0.0 {
            0
        } else if scaled >= n as f64 {
            n - 1
        } else {
            scaled as u64
        }
    }

    /// Whether coordinate `x` falls in the upper child along `dim`.
    #[inline]
    pub fn upper_side(&self, dim: usize, x: f64) -> bool {
        Self::cell(x, self.code_len(dim) + 1) & 1 == 1
    }

    /// Membership test for a point of the unit cube.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dims() {
            return false;
        }
        self.codes.iter().zip(x).all(|(c, &xi)| {
            (0.0..=1.0).contains(&xi) && Self::cell(xi, c.len()) == c.bits()
        })
    }

    /// True if `self` is contained in (or equal to) `other`.
    pub fn is_within(&self, other: &Region) -> bool {
        self.dims() == other.dims()
            && self.codes.iter().zip(&other.codes).all(|(a, b)| {
                let (la, lb) = (a.len(), b.len());
                la >= lb && a.bits() >> (la - lb) == b.bits()
            })
    }

    /// Interior-disjointness for two dyadic regions.
    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.codes.iter().zip(&other.codes).any(|(a, b)| {
            let l = a.len().min(b.len());
            a.bits() >> (a.len() - l) != b.bits() >> (b.len() - l)
        })
    }

    /// Canonical code with `ε` for empty segments.
    pub fn code(&self) -> String {
        self.code_with(EMPTY_SEGMENT)
    }

    /// Code with `e` in place of `ε`.
    pub fn code_ascii(&self) -> String {
        self.code_with(EMPTY_SEGMENT_ASCII)
    }

    fn code_with(&self, empty: char) -> String {
        let mut out = String::new();
        for (i, c) in self.codes.iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            let len = c.len();
            if len == 0 {
                out.push(empty);
            } else {
                let bits = c.bits();
                for k in (0..len).rev() {
                    out.push(if (bits >> k) & 1 == 1 { '1' } else { '0' });
                }
            }
        }
        out
    }

    /// Parses a code produced by [`Region::code`] or [`Region::code_ascii`].
    pub fn parse(code: &str) -> Result<Region> {
        let err = |segment: usize, reason: &str| OptError::RegionParse {
            code: code.to_string(),
            segment,
            reason: reason.to_string(),
        };
        let mut codes = SmallVec::new();
        for (i, seg) in code.split('|').enumerate() {
            if seg.is_empty() {
                return Err(err(i + 1, "empty segment must be written as 'ε'"));
            }
            if seg == "ε" || seg == "e" {
                codes.push(DimCode::ROOT);
                continue;
            }
            if seg.len() as u32 > MAX_CODE_LEN {
                return Err(err(i + 1, "too many digits"));
            }
            let mut c = DimCode::ROOT;
            for ch in seg.chars() {
                match ch {
                    '0' => c = c.push(0),
                    '1' => c = c.push(1),
                    _ => return Err(err(i + 1, &format!("unexpected symbol {ch:?}"))),
                }
            }
            codes.push(c);
        }
        Ok(Region { codes })
    }

    /// Integer bounds at resolution `2^res` per dimension (`res` ≥ every code length).
    pub fn int_bounds(&self, dim: usize, res: u32) -> (u64, u64) {
        let c = self.codes[dim];
        let shift = res - c.len();
        (c.bits() << shift, (c.bits() + 1) << shift)
    }

    pub fn max_code_len(&self) -> u32 {
        self.codes.iter().map(|c| c.len()).max().unwrap_or(0)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Region({})", self.code())
    }
}

impl Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Region::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Binary midpoint partition of `[0,1]^p`: `p` candidate splits per region,
/// two children each.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionScheme {
    pub dims: usize,
    /// Maximum digits per dimension.
    pub depth_cap: u32,
}

impl PartitionScheme {
    pub fn new(dims: usize) -> PartitionScheme {
        PartitionScheme {
            dims,
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    pub fn with_depth_cap(dims: usize, depth_cap: u32) -> Result<PartitionScheme> {
        if depth_cap > MAX_CODE_LEN {
            return Err(OptError::Config(format!(
                "depth cap {depth_cap} exceeds the representable maximum {MAX_CODE_LEN}"
            )));
        }
        Ok(PartitionScheme { dims, depth_cap })
    }

    pub fn root(&self) -> Region {
        Region::root(self.dims)
    }

    /// Midpoint split along `dim` (0-based): `{t_dim < mid}` and its complement.
    pub fn split(&self, region: &Region, dim: usize) -> Result<(Region, Region)> {
        if dim >= self.dims || region.dims() != self.dims {
            return Err(OptError::BadDimension { dim, p: self.dims });
        }
        let len = region.code_len(dim);
        if len >= self.depth_cap {
            return Err(OptError::DepthCap {
                dim,
                len,
                cap: self.depth_cap,
            });
        }
        Ok((region.child(dim, false), region.child(dim, true)))
    }
}

fn binomial(n: u32, k: u32) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of distinct regions at level `k` in dimension `p`: `C(k+p-1, k) 2^k`.
pub fn count_regions(k: u32, p: u32) -> Result<u128> {
    if p == 0 {
        return Err(OptError::Config("dimension must be at least 1".into()));
    }
    let overflow = || OptError::CountOverflow { level: k, p };
    let choose = binomial(k + p - 1, k).ok_or_else(overflow)?;
    let pow = 1u128.checked_shl(k).ok_or_else(overflow)?;
    choose.checked_mul(pow).ok_or_else(overflow)
}

/// Number of distinct regions at levels `0..=k`.
pub fn count_regions_cumulative(k: u32, p: u32) -> Result<u128> {
    let mut total: u128 = 0;
    for i in 0..=k {
        total = total
            .checked_add(count_regions(i, p)?)
            .ok_or(OptError::CountOverflow { level: k, p })?;
    }
    Ok(total)
}
