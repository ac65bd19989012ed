//! Integer-lattice geometry, iterated-logarithm normalizers, and rectangular
//! sums over d-dimensional prefix tables.
//!
//! Window sites are 1-based: a window with sizes `(N_1, .., N_d)` holds sites
//! `1 ≼ i ≼ N`, and site `i` carries the field value at lattice point
//! `origin + i - 1`. Prefix tables carry an extra zero layer at coordinate 0.

use std::fmt;
use std::ops::{Add, Index, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeIndex(Vec<i64>);

impl LatticeIndex {
    pub fn new(coords: Vec<i64>) -> Self {
        Self(coords)
    }

    pub fn splat(d: usize, v: i64) -> Self {
        Self(vec![v; d])
    }

    pub fn zeros(d: usize) -> Self {
        Self::splat(d, 0)
    }

    pub fn ones(d: usize) -> Self {
        Self::splat(d, 1)
    }

    /// The unit vector `e_q` (0-based axis).
    pub fn unit(d: usize, q: usize) -> Self {
        let mut v = vec![0; d];
        v[q] = 1;
        Self(v)
    }

    /// Componentwise `2^{n_q}`.
    pub fn pow2(exponents: &LatticeIndex) -> Self {
        Self(exponents.0.iter().map(|&k| 1i64 << k).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }

    /// Coordinatewise order `self ≼ other`.
    pub fn precedes(&self, other: &LatticeIndex) -> bool {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn meet(&self, other: &LatticeIndex) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }

    pub fn join(&self, other: &LatticeIndex) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a.max(b)).collect())
    }

    pub fn hadamard(&self, other: &LatticeIndex) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    /// `|n| = ∏ n_q`.
    pub fn volume(&self) -> i64 {
        self.0.iter().product()
    }

    pub fn with(&self, q: usize, v: i64) -> Self {
        let mut c = self.0.clone();
        c[q] = v;
        Self(c)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.dim() });
        }
        Ok(())
    }
}

impl Index<usize> for LatticeIndex {
    type Output = i64;
    fn index(&self, q: usize) -> &i64 {
        &self.0[q]
    }
}

impl From<Vec<i64>> for LatticeIndex {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[i64; N]> for LatticeIndex {
    fn from(v: [i64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl Add for &LatticeIndex {
    type Output = LatticeIndex;
    fn add(self, rhs: &LatticeIndex) -> LatticeIndex {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticeIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Add for LatticeIndex {
    type Output = LatticeIndex;
    fn add(self, rhs: LatticeIndex) -> LatticeIndex {
        &self + &rhs
    }
}

impl Sub for &LatticeIndex {
    type Output = LatticeIndex;
    fn sub(self, rhs: &LatticeIndex) -> LatticeIndex {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticeIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Sub for LatticeIndex {
    type Output = LatticeIndex;
    fn sub(self, rhs: LatticeIndex) -> LatticeIndex {
        &self - &rhs
    }
}

impl Neg for &LatticeIndex {
    type Output = LatticeIndex;
    fn neg(self) -> LatticeIndex {
        LatticeIndex(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (q, c) in self.0.iter().enumerate() {
            if q > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A subset of the axes `[d]`, stored as a bitmask over 0-based axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AxisSet(u32);

impl AxisSet {
    pub const EMPTY: AxisSet = AxisSet(0);

    pub fn full(d: usize) -> Self {
        Self(((1u64 << d) - 1) as u32)
    }

    pub fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub fn from_axes(axes: &[usize]) -> Self {
        Self(axes.iter().fold(0, |b, &q| b | (1 << q)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, q: usize) -> bool {
        self.0 >> q & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: AxisSet) -> Self {
        Self(self.0 | other.0)
    }

    pub fn intersection(self, other: AxisSet) -> Self {
        Self(self.0 & other.0)
    }

    pub fn difference(self, other: AxisSet) -> Self {
        Self(self.0 & !other.0)
    }

    pub fn is_subset(self, other: AxisSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn axes(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&q| self.contains(q))
    }

    /// Every subset of `self`, starting with the empty set.
    pub fn subsets(self) -> impl Iterator<Item = AxisSet> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(AxisSet(cur))
        })
    }

    /// All subsets of `[d]`.
    pub fn all(d: usize) -> impl Iterator<Item = AxisSet> {
        AxisSet::full(d).subsets()
    }

    /// Indicator vector `1_I`.
    pub fn indicator(self, d: usize) -> LatticeIndex {
        LatticeIndex((0..d).map(|q| self.contains(q) as i64).collect())
    }
}

impl fmt::Display for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, q) in self.axes().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", q + 1)?;
        }
        write!(f, "}}")
    }
}

/// An inclusive box `lo ≼ ℓ ≼ hi` of lattice points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub lo: LatticeIndex,
    pub hi: LatticeIndex,
}

impl Region {
    pub fn new(lo: LatticeIndex, hi: LatticeIndex) -> Result<Self> {
        lo.check_dim(hi.dim())?;
        if !lo.precedes(&hi) {
            return Err(Error::Domain(format!("empty region {lo}..{hi}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(p: &LatticeIndex) -> Self {
        Self { lo: p.clone(), hi: p.clone() }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn extent(&self, q: usize) -> usize {
        (self.hi[q] - self.lo[q] + 1) as usize
    }

    pub fn volume(&self) -> usize {
        (0..self.dim()).map(|q| self.extent(q)).product()
    }

    pub fn contains(&self, p: &LatticeIndex) -> bool {
        self.lo.precedes(p) && p.precedes(&self.hi)
    }

    pub fn union(&self, other: &Region) -> Region {
        Region { lo: self.lo.meet(&other.lo), hi: self.hi.join(&other.hi) }
    }

    pub fn translate(&self, by: &LatticeIndex) -> Region {
        Region { lo: &self.lo + by, hi: &self.hi + by }
    }

    /// Row-major offset (last axis fastest) of `p`, if inside.
    pub fn offset(&self, p: &[i64]) -> Option<usize> {
        let mut off = 0usize;
        for (q, &c) in p.iter().enumerate().take(self.dim()) {
            if c < self.lo[q] || c > self.hi[q] {
                return None;
            }
            off = off * self.extent(q) + (c - self.lo[q]) as usize;
        }
        Some(off)
    }

    /// Lattice point at a row-major offset.
    pub fn point_at(&self, mut offset: usize) -> LatticeIndex {
        let d = self.dim();
        let mut c = vec![0i64; d];
        for q in (0..d).rev() {
            let e = self.extent(q);
            c[q] = self.lo[q] + (offset % e) as i64;
            offset /= e;
        }
        LatticeIndex(c)
    }
}

/// A finite rectangular window of sites `1 ≼ i ≼ sizes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    sizes: Vec<usize>,
    origin: LatticeIndex,
}

impl Window {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        let d = sizes.len();
        Self::with_origin(sizes, LatticeIndex::zeros(d))
    }

    pub fn with_origin(sizes: Vec<usize>, origin: LatticeIndex) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Domain("window dimension must be at least 1".into()));
        }
        origin.check_dim(sizes.len())?;
        if sizes.contains(&0) {
            return Err(Error::Domain(format!("window sizes {sizes:?} must be ≥ 1")));
        }
        let mut vol: usize = 1;
        for &s in &sizes {
            vol = vol.checked_mul(s + 1).ok_or_else(|| Error::Domain(format!("window {sizes:?} is too large")))?;
        }
        Ok(Self { sizes, origin })
    }

    pub fn cube(d: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; d])
    }

    /// The window with sizes `2^{n_q}`.
    pub fn dyadic(exponents: &[u32]) -> Result<Self> {
        if exponents.iter().any(|&e| e > 40) {
            return Err(Error::Domain(format!("dyadic exponents {exponents:?} too large")));
        }
        Self::new(exponents.iter().map(|&e| 1usize << e).collect())
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn origin(&self) -> &LatticeIndex {
        &self.origin
    }

    /// `|window| = ∏ sizes_q`.
    pub fn volume(&self) -> usize {
        self.sizes.iter().product()
    }

    /// `max n` over the window.
    pub fn max_extent(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    /// Largest site as a lattice index.
    pub fn corner(&self) -> LatticeIndex {
        LatticeIndex(self.sizes.iter().map(|&s| s as i64).collect())
    }

    pub fn contains_site(&self, site: &[i64]) -> bool {
        site.len() == self.dim() && site.iter().zip(&self.sizes).all(|(&i, &s)| i >= 1 && i as usize <= s)
    }

    /// Row-major offset of a 1-based site.
    pub fn site_offset(&self, site: &[i64]) -> Option<usize> {
        if !self.contains_site(site) {
            return None;
        }
        Some(site.iter().zip(&self.sizes).fold(0usize, |acc, (&i, &s)| acc * s + (i - 1) as usize))
    }

    /// The 1-based site at a row-major offset.
    pub fn site_at(&self, mut offset: usize) -> LatticeIndex {
        let d = self.dim();
        let mut c = vec![0i64; d];
        for q in (0..d).rev() {
            c[q] = (offset % self.sizes[q]) as i64 + 1;
            offset /= self.sizes[q];
        }
        LatticeIndex(c)
    }

    /// Lattice point carried by a site: `origin + site - 1`.
    pub fn lattice_point(&self, site: &LatticeIndex) -> LatticeIndex {
        LatticeIndex(site.0.iter().zip(&self.origin.0).map(|(i, o)| i - 1 + o).collect())
    }

    /// Lattice points covered by the window.
    pub fn region(&self) -> Region {
        Region {
            lo: self.origin.clone(),
            hi: LatticeIndex(self.origin.0.iter().zip(&self.sizes).map(|(o, &s)| o + s as i64 - 1).collect()),
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = LatticeIndex> + '_ {
        (0..self.volume()).map(move |o| self.site_at(o))
    }

    /// The window with the same origin and sizes clipped to `sizes`.
    pub fn sub_window(&self, sizes: &[usize]) -> Result<Window> {
        if sizes.len() != self.dim() || sizes.iter().zip(&self.sizes).any(|(a, b)| a > b) {
            return Err(Error::Domain(format!("sub-window {sizes:?} does not fit in {:?}", self.sizes)));
        }
        Window::with_origin(sizes.to_vec(), self.origin.clone())
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// `L(x) = max(ln x, 1)`.
pub fn log_plus(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("log_plus requires x > 0, got {x}")));
    }
    Ok(x.ln().max(1.0))
}

/// `LL(x) = L(L(x))`.
pub fn ll(x: f64) -> Result<f64> {
    log_plus(log_plus(x)?)
}

/// `LL(n)` for a positive count; `n ≥ 1` always lies in the domain.
#[inline]
pub(crate) fn ll_count(n: u64) -> f64 {
    (n as f64).ln().max(1.0).ln().max(1.0)
}

/// `sqrt(n · LL(n))` for a positive count.
#[inline]
pub(crate) fn axis_normalizer(n: u64) -> f64 {
    (n as f64 * ll_count(n)).sqrt()
}

/// `|n|^{1/2} ∏_q LL(n_q)^{1/2}`.
pub fn lil_normalizer(n: &LatticeIndex) -> Result<f64> {
    if n.dim() == 0 || n.coords().iter().any(|&c| c < 1) {
        return Err(Error::Domain(format!("lil_normalizer requires n ≽ 1, got {n}")));
    }
    Ok(n.coords().iter().map(|&c| axis_normalizer(c as u64)).product())
}

/// Values that can live in a prefix table: `f64` for measurements, `i64` for
/// exact oracle comparisons.
pub trait Summand:
    Copy + Default + PartialEq + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Send + Sync
{
}

impl<T> Summand for T where T: Copy + Default + PartialEq + fmt::Debug + Add<Output = T> + Sub<Output = T> + Send + Sync {}

/// Inclusive prefix sums of a line by recursive halving: each output is a sum
/// of `O(log n)` block totals, so rounding error grows logarithmically.
pub(crate) fn pairwise_scan<T: Summand>(line: &mut [T]) {
    if line.len() <= 1 {
        return;
    }
    let mid = line.len() / 2;
    let (left, right) = line.split_at_mut(mid);
    pairwise_scan(left);
    pairwise_scan(right);
    let carry = left[mid - 1];
    for v in right.iter_mut() {
        *v = carry + *v;
    }
}

/// Cumulative sums `C[i] = Σ_{1 ≼ j ≼ i} values[j]` for `0 ≼ i ≼ sizes`.
#[derive(Clone, Debug)]
pub struct PrefixSumTable<T = f64> {
    window: Window,
    extents: Vec<usize>,
    strides: Vec<usize>,
    cumulative: Vec<T>,
}

impl<T: Summand> PrefixSumTable<T> {
    /// Builds the table axis by axis. `values` is row-major over window sites.
    pub fn build(window: &Window, values: &[T]) -> Result<Self> {
        if values.len() != window.volume() {
            return Err(Error::ShapeMismatch { expected: window.volume(), got: values.len() });
        }
        let d = window.dim();
        let extents: Vec<usize> = window.sizes().iter().map(|s| s + 1).collect();
        let mut strides = vec![1usize; d];
        for q in (0..d.saturating_sub(1)).rev() {
            strides[q] = strides[q + 1] * extents[q + 1];
        }
        let total: usize = extents.iter().product();
        let mut cumulative = vec![T::default(); total];
        for (off, &v) in values.iter().enumerate() {
            let site = window.site_at(off);
            let idx: usize = site.coords().iter().zip(&strides).map(|(&c, &s)| c as usize * s).sum();
            cumulative[idx] = v;
        }

        let mut buf: Vec<T> = Vec::new();
        for q in 0..d {
            let len = extents[q];
            let stride = strides[q];
            buf.resize(len - 1, T::default());
            for base in 0..total {
                if !(base / stride).is_multiple_of(len) {
                    continue;
                }
                for (t, slot) in buf.iter_mut().enumerate() {
                    *slot = cumulative[base + (t + 1) * stride];
                }
                pairwise_scan(&mut buf);
                for (t, v) in buf.iter().enumerate() {
                    cumulative[base + (t + 1) * stride] = *v;
                }
            }
        }

        Ok(Self { window: window.clone(), extents, strides, cumulative })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// `C[i]` for `0 ≼ i ≼ sizes`.
    pub fn cumulative(&self, index: &[i64]) -> Result<T> {
        if index.len() != self.extents.len() {
            return Err(Error::DimensionMismatch { expected: self.extents.len(), got: index.len() });
        }
        let mut off = 0usize;
        for (q, &c) in index.iter().enumerate() {
            if c < 0 || c as usize >= self.extents[q] {
                return Err(Error::OutOfWindow { index: LatticeIndex::new(index.to_vec()) });
            }
            off += c as usize * self.strides[q];
        }
        Ok(self.cumulative[off])
    }

    #[inline]
    pub(crate) fn cumulative_unchecked(&self, index: &[i64]) -> T {
        let off: usize = index.iter().zip(&self.strides).map(|(&c, &s)| c as usize * s).sum();
        self.cumulative[off]
    }

    /// Sum over all sites.
    pub fn total(&self) -> T {
        *self.cumulative.last().expect("table is never empty")
    }

    /// `Σ_{lo ≼ i ≼ hi} values[i]` by `2^d`-term inclusion–exclusion.
    pub fn rect_sum(&self, lo: &LatticeIndex, hi: &LatticeIndex) -> Result<T> {
        let d = self.window.dim();
        lo.check_dim(d)?;
        hi.check_dim(d)?;
        if !self.window.contains_site(lo.coords()) {
            return Err(Error::OutOfWindow { index: lo.clone() });
        }
        if !self.window.contains_site(hi.coords()) {
            return Err(Error::OutOfWindow { index: hi.clone() });
        }
        if !lo.precedes(hi) {
            return Err(Error::Domain(format!("rect_sum requires lo ≼ hi, got {lo} and {hi}")));
        }
        Ok(self.rect_sum_unchecked(lo.coords(), hi.coords()))
    }

    pub(crate) fn rect_sum_unchecked(&self, lo: &[i64], hi: &[i64]) -> T {
        let d = lo.len();
        let mut pos = T::default();
        let mut neg = T::default();
        let mut corner = vec![0i64; d];
        for mask in 0u32..(1 << d) {
            for q in 0..d {
                corner[q] = if mask >> q & 1 == 1 { lo[q] - 1 } else { hi[q] };
            }
            let v = self.cumulative_unchecked(&corner);
            if mask.count_ones() % 2 == 0 {
                pos = pos + v;
            } else {
                neg = neg + v;
            }
        }
        pos - neg
    }

    /// `S_i^I`: sums the lattice points `0 ≤ j_q ≤ i_q - 1` on the axes of `I`,
    /// with coordinate `i_q` held fixed on the other axes.
    pub fn directional_sum(&self, i: &LatticeIndex, axes: AxisSet) -> Result<T> {
        let d = self.window.dim();
        i.check_dim(d)?;
        if !axes.is_subset(AxisSet::full(d)) {
            return Err(Error::Domain(format!("axis set {axes} is not a subset of [{d}]")));
        }
        let mut lo = vec![0i64; d];
        let mut hi = vec![0i64; d];
        for q in 0..d {
            let size = self.window.sizes()[q] as i64;
            if axes.contains(q) {
                if i[q] < 1 || i[q] > size {
                    return Err(Error::OutOfWindow { index: i.clone() });
                }
                lo[q] = 1;
                hi[q] = i[q];
            } else {
                if i[q] < 0 || i[q] >= size {
                    return Err(Error::OutOfWindow { index: i.clone() });
                }
                lo[q] = i[q] + 1;
                hi[q] = i[q] + 1;
            }
        }
        Ok(self.rect_sum_unchecked(&lo, &hi))
    }
}

/// Per-axis candidates for the index set `N_i`: free axes `q < i` range over
/// `1..=size`, the remaining ones over powers of two.
pub fn dyadic_candidates(window: &Window, i: usize) -> Vec<Vec<i64>> {
    window
        .sizes()
        .iter()
        .enumerate()
        .map(|(q, &s)| {
            if q < i {
                (1..=s as i64).collect()
            } else {
                std::iter::successors(Some(1i64), |&p| Some(p * 2)).take_while(|&p| p <= s as i64).collect()
            }
        })
        .collect()
}

/// Enumerates `N_i ∩ window`: indices `n ≽ 1` whose coordinates `i+1..d`
/// (1-based) are powers of two. `i = 0` is the fully dyadic set, `i = d` the
/// whole window.
pub fn dyadic_indices(window: &Window, i: usize) -> Result<DyadicIndices> {
    if i > window.dim() {
        return Err(Error::Domain(format!("restriction {i} exceeds dimension {}", window.dim())));
    }
    Ok(DyadicIndices::new(dyadic_candidates(window, i)))
}

/// Odometer over a product of per-axis candidate lists.
#[derive(Clone, Debug)]
pub struct DyadicIndices {
    candidates: Vec<Vec<i64>>,
    cursor: Option<Vec<usize>>,
}

impl DyadicIndices {
    fn new(candidates: Vec<Vec<i64>>) -> Self {
        let cursor = if candidates.iter().all(|c| !c.is_empty()) { Some(vec![0; candidates.len()]) } else { None };
        Self { candidates, cursor }
    }
}

impl Iterator for DyadicIndices {
    type Item = LatticeIndex;

    fn next(&mut self) -> Option<LatticeIndex> {
        let cur = self.cursor.as_mut()?;
        let out = LatticeIndex(cur.iter().zip(&self.candidates).map(|(&k, c)| c[k]).collect());
        let mut q = cur.len();
        loop {
            if q == 0 {
                self.cursor = None;
                break;
            }
            q -= 1;
            cur[q] += 1;
            if cur[q] < self.candidates[q].len() {
                break;
            }
            cur[q] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn brute_rect(window: &Window, values: &[i64], lo: &[i64], hi: &[i64]) -> i64 {
        window
            .sites()
            .filter(|s| (0..lo.len()).all(|q| s[q] >= lo[q] && s[q] <= hi[q]))
            .map(|s| values[window.site_offset(s.coords()).unwrap()])
            .sum()
    }

    #[test]
    fn log_plus_examples() {
        assert_eq!(log_plus(1.0).unwrap(), 1.0);
        assert!((log_plus(std::f64::consts::E.powi(2)).unwrap() - 2.0).abs() < 1e-15);
        // ln 10 = 2.3026, ln 2.3026 = 0.834 < 1
        assert_eq!(ll(10.0).unwrap(), 1.0);
        assert!(log_plus(0.0).is_err());
        assert!(log_plus(-3.0).is_err());
        assert!(ll(f64::NAN).is_err());
    }

    #[test]
    fn lil_normalizer_examples() {
        assert_eq!(lil_normalizer(&[1, 1].into()).unwrap(), 1.0);
        assert_eq!(lil_normalizer(&[4].into()).unwrap(), 2.0);
        // ll(16) = ln ln 16 = 1.01978..., so the value is 16 · ll(16).
        let expected = 16.0 * (16f64).ln().ln();
        let got = lil_normalizer(&[16, 16].into()).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 16.3165).abs() < 1e-3);
        assert!(lil_normalizer(&[0, 3].into()).is_err());
    }

    #[test]
    fn prefix_table_small_cases() {
        let w = Window::new(vec![2, 2]).unwrap();
        let t = PrefixSumTable::build(&w, &[1i64; 4]).unwrap();
        assert_eq!(t.cumulative(&[2, 2]).unwrap(), 4);
        assert_eq!(t.cumulative(&[0, 2]).unwrap(), 0);

        let z = PrefixSumTable::build(&w, &[0.0f64; 4]).unwrap();
        for i in 0..=2 {
            for j in 0..=2 {
                assert_eq!(z.cumulative(&[i, j]).unwrap(), 0.0);
            }
        }
        assert!(matches!(PrefixSumTable::build(&w, &[1.0; 3]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn prefix_table_matches_brute_force_4x4() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let w = Window::new(vec![4, 4]).unwrap();
        let vals: Vec<i64> = (0..16).map(|_| rng.gen_range(-9..=9)).collect();
        let t = PrefixSumTable::build(&w, &vals).unwrap();
        for i in 0..=4 {
            for j in 0..=4 {
                let brute = if i == 0 || j == 0 { 0 } else { brute_rect(&w, &vals, &[1, 1], &[i, j]) };
                assert_eq!(t.cumulative(&[i, j]).unwrap(), brute);
            }
        }
    }

    #[test]
    fn rect_sum_examples() {
        let w = Window::new(vec![4, 4]).unwrap();
        let t = PrefixSumTable::build(&w, &[1.0; 16]).unwrap();
        assert_eq!(t.rect_sum(&[1, 1].into(), &[3, 2].into()).unwrap(), 6.0);
        let vals: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let t = PrefixSumTable::build(&w, &vals).unwrap();
        let lo: LatticeIndex = [3, 2].into();
        assert_eq!(t.rect_sum(&lo, &lo).unwrap(), vals[w.site_offset(&[3, 2]).unwrap()]);
        assert!(t.rect_sum(&[0, 1].into(), &[2, 2].into()).is_err());
        assert!(t.rect_sum(&[1, 1].into(), &[5, 2].into()).is_err());
        assert!(t.rect_sum(&[3, 1].into(), &[2, 2].into()).is_err());
    }

    #[test]
    fn rect_sum_random_rectangles_8x8x8() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let w = Window::cube(3, 8).unwrap();
        let vals: Vec<f64> = (0..w.volume()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = PrefixSumTable::build(&w, &vals).unwrap();
        for _ in 0..100 {
            let mut lo = vec![0; 3];
            let mut hi = vec![0; 3];
            for q in 0..3 {
                let a = rng.gen_range(1..=8);
                let b = rng.gen_range(1..=8);
                lo[q] = a.min(b);
                hi[q] = a.max(b);
            }
            let brute: f64 = w
                .sites()
                .filter(|s| (0..3).all(|q| s[q] >= lo[q] && s[q] <= hi[q]))
                .map(|s| vals[w.site_offset(s.coords()).unwrap()])
                .sum();
            let got = t.rect_sum(&lo.clone().into(), &hi.clone().into()).unwrap();
            assert!((got - brute).abs() <= 1e-9 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn directional_sum_examples() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let w = Window::new(vec![5, 5]).unwrap();
        let vals: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = PrefixSumTable::build(&w, &vals).unwrap();
        // value at lattice point (a, b) lives at site (a+1, b+1)
        let at = |a: i64, b: i64| vals[w.site_offset(&[a + 1, b + 1]).unwrap()];

        let i: LatticeIndex = [3, 2].into();
        let direct: f64 = (0..=2).map(|j1| at(j1, 2)).sum();
        let got = t.directional_sum(&i, AxisSet::from_axes(&[0])).unwrap();
        assert!((got - direct).abs() < 1e-12);

        let full = t.directional_sum(&i, AxisSet::full(2)).unwrap();
        assert_eq!(full, t.rect_sum(&[1, 1].into(), &i).unwrap());

        let single = t.directional_sum(&i, AxisSet::EMPTY).unwrap();
        assert_eq!(single, at(3, 2));

        assert!(t.directional_sum(&[0, 2].into(), AxisSet::from_axes(&[0])).is_err());
        assert!(t.directional_sum(&[5, 2].into(), AxisSet::EMPTY).is_err());
    }

    #[test]
    fn dyadic_index_examples() {
        let w = Window::new(vec![8]).unwrap();
        let v: Vec<i64> = dyadic_indices(&w, 0).unwrap().map(|n| n[0]).collect();
        assert_eq!(v, vec![1, 2, 4, 8]);

        let w = Window::new(vec![4, 4]).unwrap();
        assert_eq!(dyadic_indices(&w, 2).unwrap().count(), 16);
        let n0: Vec<LatticeIndex> = dyadic_indices(&w, 0).unwrap().collect();
        let mut expected = Vec::new();
        for a in [1, 2, 4] {
            for b in [1, 2, 4] {
                expected.push(LatticeIndex::from([a, b]));
            }
        }
        assert_eq!(n0, expected);
        assert!(dyadic_indices(&w, 3).is_err());
    }

    #[test]
    fn axis_set_subsets() {
        let s = AxisSet::from_axes(&[0, 2]);
        let subs: Vec<u32> = s.subsets().map(|x| x.bits()).collect();
        assert_eq!(subs, vec![0, 1, 4, 5]);
        assert_eq!(AxisSet::all(3).count(), 8);
        assert_eq!(AxisSet::EMPTY.subsets().count(), 1);
        assert_eq!(format!("{s}"), "{1,3}");
    }

    fn window_and_values() -> impl Strategy<Value = (Vec<usize>, Vec<i64>)> {
        prop::collection::vec(1usize..=16, 1..=3)
            .prop_filter("keep tables small", |s| s.iter().product::<usize>() <= 1024)
            .prop_flat_map(|sizes| {
                let n = sizes.iter().product::<usize>();
                (Just(sizes), prop::collection::vec(-50i64..=50, n))
            })
    }

    proptest! {
        #[test]
        fn total_is_telescoping_sum((sizes, vals) in window_and_values()) {
            let w = Window::new(sizes).unwrap();
            let t = PrefixSumTable::build(&w, &vals).unwrap();
            prop_assert_eq!(t.total(), vals.iter().sum::<i64>());
            let fl: Vec<f64> = vals.iter().map(|&v| v as f64).collect();
            let tf = PrefixSumTable::build(&w, &fl).unwrap();
            prop_assert_eq!(tf.total(), vals.iter().sum::<i64>() as f64);
        }

        #[test]
        fn full_directional_sum_is_partial_sum((sizes, vals) in window_and_values(), pick in 0usize..1024) {
            let w = Window::new(sizes).unwrap();
            let t = PrefixSumTable::build(&w, &vals).unwrap();
            let n = w.site_at(pick % w.volume());
            let full = AxisSet::full(w.dim());
            prop_assert_eq!(t.directional_sum(&n, full).unwrap(),
                            t.rect_sum(&LatticeIndex::ones(w.dim()), &n).unwrap());
        }

        #[test]
        fn nonnegative_fields_give_monotone_tables((sizes, vals) in window_and_values()) {
            let w = Window::new(sizes).unwrap();
            let vals: Vec<i64> = vals.into_iter().map(|v| v.abs()).collect();
            let t = PrefixSumTable::build(&w, &vals).unwrap();
            for s in w.sites() {
                for q in 0..w.dim() {
                    let lower = s.with(q, s[q] - 1);
                    prop_assert!(t.cumulative(lower.coords()).unwrap() <= t.cumulative(s.coords()).unwrap());
                }
            }
        }

        #[test]
        fn lil_normalizer_is_monotone(a in 1i64..5000, b in 1i64..5000, q in 0usize..2) {
            let n = LatticeIndex::from([a, b]);
            let m = n.with(q, n[q] + 1);
            prop_assert!(lil_normalizer(&n).unwrap() <= lil_normalizer(&m).unwrap());
        }

        #[test]
        fn dyadic_sets_are_nested(sizes in prop::collection::vec(1usize..=12, 1..=3)) {
            let w = Window::new(sizes).unwrap();
            for i in 0..w.dim() {
                let small: std::collections::BTreeSet<_> = dyadic_indices(&w, i).unwrap().collect();
                let big: std::collections::BTreeSet<_> = dyadic_indices(&w, i + 1).unwrap().collect();
                prop_assert!(small.is_subset(&big));
            }
        }
    }
}
