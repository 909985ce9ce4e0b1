//! Multi-indices, index sets and lower-set combinatorics.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly_basis::Scenario;
use crate::weights::WeightVector;

/// Default guard on the number of indices a builder may produce.
pub const DEFAULT_CARDINALITY_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Number of nonzero entries.
    pub fn norm_0(&self) -> usize {
        self.0.iter().filter(|&&k| k != 0).count()
    }

    pub fn norm_1(&self) -> u64 {
        self.0.iter().map(|&k| k as u64).sum()
    }

    pub fn norm_inf(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Graded-lexicographic comparison: total degree first, then lexicographic.
    pub fn graded_cmp(&self, other: &Self) -> Ordering {
        self.norm_1().cmp(&other.norm_1()).then_with(|| self.0.cmp(&other.0))
    }

    fn step_down(&self, j: usize) -> Option<MultiIndex> {
        if self.0[j] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[j] -= 1;
        Some(MultiIndex(v))
    }

    fn step_up(&self, j: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[j] += 1;
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, k) in self.0.iter().enumerate() {
            if j > 0 {
                f.write_char(' ')?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// A finite, duplicate-free set of multi-indices in graded-lexicographic order.
///
/// The position of an index in the set is the column it occupies in the
/// measurement matrix and the slot it occupies in weight and coefficient
/// vectors.
#[derive(Debug, Clone)]
pub struct IndexSet {
    dimension: usize,
    indices: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

impl PartialEq for IndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension && self.indices == other.indices
    }
}

impl IndexSet {
    /// Builds a set from arbitrary indices; duplicates are dropped and the
    /// result is put in canonical order.
    pub fn from_indices<I>(dimension: usize, indices: I) -> Result<Self>
    where
        I: IntoIterator<Item = MultiIndex>,
    {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut v: Vec<MultiIndex> = indices.into_iter().collect();
        for i in &v {
            if i.dimension() != dimension {
                return Err(Error::DimensionMismatch { expected: dimension, found: i.dimension() });
            }
        }
        v.sort_by(MultiIndex::graded_cmp);
        v.dedup();
        Ok(Self::from_sorted(dimension, v))
    }

    fn from_sorted(dimension: usize, indices: Vec<MultiIndex>) -> Self {
        let positions = indices.iter().cloned().enumerate().map(|(p, i)| (i, p)).collect();
        IndexSet { dimension, indices, positions }
    }

    pub fn empty(dimension: usize) -> Result<Self> {
        Self::from_indices(dimension, std::iter::empty())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    pub fn contains(&self, index: &MultiIndex) -> bool {
        self.positions.contains_key(index)
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    /// Largest univariate degree occurring in any coordinate.
    pub fn max_degree(&self) -> u32 {
        self.indices.iter().map(MultiIndex::norm_inf).max().unwrap_or(0)
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.dimension == other.dimension && self.indices.iter().all(|i| other.contains(i))
    }

    pub fn union(&self, other: &IndexSet) -> Result<IndexSet> {
        self.same_dim(other)?;
        IndexSet::from_indices(self.dimension, self.indices.iter().chain(other.iter()).cloned())
    }

    pub fn intersection(&self, other: &IndexSet) -> Result<IndexSet> {
        self.same_dim(other)?;
        let kept = self.indices.iter().filter(|i| other.contains(i)).cloned().collect();
        Ok(Self::from_sorted(self.dimension, kept))
    }

    pub fn difference(&self, other: &IndexSet) -> Result<IndexSet> {
        self.same_dim(other)?;
        let kept = self.indices.iter().filter(|i| !other.contains(i)).cloned().collect();
        Ok(Self::from_sorted(self.dimension, kept))
    }

    fn same_dim(&self, other: &IndexSet) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: other.dimension });
        }
        Ok(())
    }

    /// Text form: a `d=<d>` header, then one index per line with
    /// space-separated entries.
    pub fn to_text(&self) -> String {
        let mut s = format!("d={}\n", self.dimension);
        for i in &self.indices {
            let _ = writeln!(s, "{i}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let d: usize = header
            .trim()
            .strip_prefix("d=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected `d=<dimension>`, got `{header}`") })?;
        if d == 0 {
            return Err(Error::Parse { line: 1, msg: "dimension must be at least 1".into() });
        }
        let mut seen = HashSet::new();
        let mut v = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let entries = line
                .split_whitespace()
                .map(str::parse::<u32>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
            if entries.len() != d {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected {d} entries, found {}", entries.len()),
                });
            }
            let i = MultiIndex(entries);
            if !seen.insert(i.clone()) {
                return Err(Error::Parse { line: n + 1, msg: format!("duplicate index {i}") });
            }
            v.push(i);
        }
        IndexSet::from_indices(d, v)
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a MultiIndex;
    type IntoIter = std::slice::Iter<'a, MultiIndex>;

    fn into_iter(self) -> Self::IntoIter {
        self.indices.iter()
    }
}

/// Which of the three standard index-set families to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndexSetKind {
    /// `|i|_inf <= K`
    TP,
    /// `|i|_1 <= K`
    TD,
    /// `prod_j (i_j + 1) <= K`
    HC,
}

impl IndexSetKind {
    pub fn build(self, d: usize, k: u32) -> Result<IndexSet> {
        match self {
            IndexSetKind::TP => build_tensor_product(d, k),
            IndexSetKind::TD => build_total_degree(d, k),
            IndexSetKind::HC => build_hyperbolic_cross(d, k),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidParameter("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

pub fn build_tensor_product(d: usize, k: u32) -> Result<IndexSet> {
    build_tensor_product_capped(d, k, DEFAULT_CARDINALITY_CAP)
}

pub fn build_tensor_product_capped(d: usize, k: u32, cap: usize) -> Result<IndexSet> {
    check_dim(d)?;
    let side = k as usize + 1;
    let total = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(side).filter(|&n| n <= cap));
    if total.is_none() {
        return Err(Error::CardinalityCap { cap });
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    loop {
        out.push(MultiIndex(cur.clone()));
        let mut j = 0;
        loop {
            if j == d {
                return IndexSet::from_indices(d, out);
            }
            if cur[j] < k {
                cur[j] += 1;
                break;
            }
            cur[j] = 0;
            j += 1;
        }
    }
}

pub fn build_total_degree(d: usize, k: u32) -> Result<IndexSet> {
    build_total_degree_capped(d, k, DEFAULT_CARDINALITY_CAP)
}

pub fn build_total_degree_capped(d: usize, k: u32, cap: usize) -> Result<IndexSet> {
    check_dim(d)?;
    match binomial(k as u64 + d as u64, d as u64) {
        Some(n) if n <= cap as u128 => {}
        _ => return Err(Error::CardinalityCap { cap }),
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    total_degree_rec(&mut cur, 0, k, &mut out);
    IndexSet::from_indices(d, out)
}

fn total_degree_rec(cur: &mut Vec<u32>, j: usize, budget: u32, out: &mut Vec<MultiIndex>) {
    if j == cur.len() {
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for v in 0..=budget {
        cur[j] = v;
        total_degree_rec(cur, j + 1, budget - v, out);
    }
    cur[j] = 0;
}

pub fn build_hyperbolic_cross(d: usize, k: u32) -> Result<IndexSet> {
    build_hyperbolic_cross_capped(d, k, DEFAULT_CARDINALITY_CAP)
}

pub fn build_hyperbolic_cross_capped(d: usize, k: u32, cap: usize) -> Result<IndexSet> {
    check_dim(d)?;
    if k == 0 {
        return Err(Error::InvalidParameter("hyperbolic cross order must be at least 1".into()));
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    hyperbolic_rec(&mut cur, 0, k as u64, cap, &mut out)?;
    IndexSet::from_indices(d, out)
}

fn hyperbolic_rec(cur: &mut Vec<u32>, j: usize, budget: u64, cap: usize, out: &mut Vec<MultiIndex>) -> Result<()> {
    if j == cur.len() {
        if out.len() == cap {
            return Err(Error::CardinalityCap { cap });
        }
        out.push(MultiIndex(cur.clone()));
        return Ok(());
    }
    // (v + 1) * rest <= budget with rest >= 1
    let mut v = 0u64;
    while v < budget {
        cur[j] = v as u32;
        hyperbolic_rec(cur, j + 1, budget / (v + 1), cap, out)?;
        v += 1;
    }
    cur[j] = 0;
    Ok(())
}

pub(crate) fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// True iff every one-step-down neighbour of every member is also a member.
pub fn is_lower(set: &IndexSet) -> bool {
    set.iter().all(|i| (0..set.dimension()).filter_map(|j| i.step_down(j)).all(|n| set.contains(&n)))
}

/// `|set|_w = sum_i w_i^2`, with `weights` aligned to `set` order.
pub fn weighted_cardinality(set: &IndexSet, weights: &WeightVector) -> Result<f64> {
    if weights.len() != set.len() {
        return Err(Error::MissingWeight { expected: set.len(), found: weights.len() });
    }
    Ok(weights.values().iter().map(|w| w * w).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Exponent `log(3)/log(2)` of the CC lower-set bound.
pub fn cc_exponent() -> f64 {
    3f64.ln() / 2f64.ln()
}

/// Exponent `log(1 + 4/pi)/log(2)` of the LC lower-set bound.
pub fn lc_exponent() -> f64 {
    (1.0 + 4.0 / PI).ln() / 2f64.ln()
}

/// Compares the weighted cardinality of a lower set with its combinatorial
/// bound in `s = |set|`.
///
/// * CC: `sum 2^{|i|_0} <= s^{log 3 / log 2}`
/// * LU: `sum prod_j (2 i_j + 1) <= s^2`
/// * LC: `sum (4/pi)^{|i|_0} <= s^{log(1 + 4/pi) / log 2}`
pub fn lower_set_bound_check(set: &IndexSet, scenario: Scenario) -> Result<BoundCheck> {
    if !is_lower(set) {
        return Err(Error::NotLower);
    }
    let s = set.len() as f64;
    let (lhs, rhs) = match scenario {
        Scenario::CC => (set.iter().map(|i| 2f64.powi(i.norm_0() as i32)).sum(), s.powf(cc_exponent())),
        Scenario::LU => {
            (set.iter().map(|i| i.entries().iter().map(|&k| 2.0 * k as f64 + 1.0).product::<f64>()).sum(), s * s)
        }
        Scenario::LC => (set.iter().map(|i| (4.0 / PI).powi(i.norm_0() as i32)).sum(), s.powf(lc_exponent())),
    };
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs })
}

/// Grows a lower set from `{0}` by repeatedly adding a uniformly chosen
/// admissible index (one whose one-step-down neighbours are all present).
pub fn random_lower_set(d: usize, target_size: usize, seed: u64) -> Result<IndexSet> {
    check_dim(d)?;
    if target_size == 0 {
        return Err(Error::InvalidParameter("target size must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let zero = MultiIndex::zero(d);
    let mut members: HashSet<MultiIndex> = HashSet::from([zero.clone()]);
    // BTreeSet keeps frontier order independent of hashing
    let mut frontier: BTreeSet<Vec<u32>> = (0..d).map(|j| zero.step_up(j).0).collect();
    while members.len() < target_size {
        let pick = rng.random_range(0..frontier.len());
        let chosen = MultiIndex(frontier.iter().nth(pick).cloned().expect("frontier is never empty"));
        frontier.remove(&chosen.0);
        for j in 0..d {
            let cand = chosen.step_up(j);
            let admissible = (0..d).filter_map(|l| cand.step_down(l)).all(|n| n == chosen || members.contains(&n));
            if admissible {
                frontier.insert(cand.0);
            }
        }
        members.insert(chosen);
    }
    IndexSet::from_indices(d, members)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(d: usize, v: &[&[u32]]) -> IndexSet {
        IndexSet::from_indices(d, v.iter().map(|e| MultiIndex::new(e.to_vec()))).unwrap()
    }

    fn brute_force(d: usize, k: u32, keep: impl Fn(&[u32]) -> bool) -> usize {
        let mut count = 0;
        let side = k as usize + 1;
        for flat in 0..side.pow(d as u32) {
            let mut e = Vec::with_capacity(d);
            let mut r = flat;
            for _ in 0..d {
                e.push((r % side) as u32);
                r /= side;
            }
            if keep(&e) {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn tensor_product_examples() {
        let s = build_tensor_product(1, 3).unwrap();
        assert_eq!(s, set(1, &[&[0], &[1], &[2], &[3]]));
        let s = build_tensor_product(2, 1).unwrap();
        assert_eq!(s, set(2, &[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]));
        assert_eq!(build_tensor_product(3, 4).unwrap().len(), 125);
    }

    #[test]
    fn total_degree_examples() {
        assert_eq!(build_total_degree(2, 3).unwrap().len(), brute_force(2, 3, |e| e.iter().sum::<u32>() <= 3));
        assert_eq!(build_total_degree(2, 3).unwrap().len(), 10);
        assert_eq!(build_total_degree(1, 7).unwrap(), build_tensor_product(1, 7).unwrap());
        let s = build_total_degree(4, 10).unwrap();
        assert_eq!(s.len(), 1001);
        assert_eq!(s.len(), brute_force(4, 10, |e| e.iter().sum::<u32>() <= 10));
    }

    #[test]
    fn hyperbolic_cross_examples() {
        assert_eq!(build_hyperbolic_cross(2, 2).unwrap(), set(2, &[&[0, 0], &[1, 0], &[0, 1]]));
        assert_eq!(build_hyperbolic_cross(1, 5).unwrap(), build_tensor_product(1, 4).unwrap());
        assert!(build_hyperbolic_cross(2, 0).is_err());
        let hc = build_hyperbolic_cross(3, 9).unwrap();
        let expected = brute_force(3, 8, |e| e.iter().map(|&k| k as u64 + 1).product::<u64>() <= 9);
        assert_eq!(hc.len(), expected);
    }

    #[test]
    fn cardinality_formulas() {
        for d in 1..=4usize {
            for k in 0..=10u32 {
                assert_eq!(build_tensor_product(d, k).unwrap().len(), (k as usize + 1).pow(d as u32));
                let td = build_total_degree(d, k).unwrap().len();
                assert_eq!(td as u128, binomial(k as u64 + d as u64, d as u64).unwrap());
            }
        }
    }

    #[test]
    fn hyperbolic_cross_cardinality_bound() {
        for d in 1..=6usize {
            for k in 1..=20u32 {
                let n = build_hyperbolic_cross(d, k).unwrap().len() as f64;
                let kf = k as f64;
                let bound = (2.0 * kf.powi(3) * 4f64.powi(d as i32))
                    .min(std::f64::consts::E.powi(2) * kf.powf(2.0 + (d as f64).log2()));
                assert!(n <= bound, "d={d} K={k}: {n} > {bound}");
            }
        }
    }

    #[test]
    fn caps_are_enforced() {
        assert!(matches!(build_tensor_product_capped(3, 9, 999), Err(Error::CardinalityCap { cap: 999 })));
        assert!(build_tensor_product_capped(3, 9, 1000).is_ok());
        assert!(matches!(build_total_degree(40, 40), Err(Error::CardinalityCap { .. })));
        assert!(matches!(build_hyperbolic_cross_capped(2, 50, 10), Err(Error::CardinalityCap { .. })));
    }

    #[test]
    fn canonical_order_is_graded_lex() {
        let s = build_total_degree(2, 2).unwrap();
        let expect: Vec<Vec<u32>> = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 0]];
        let got: Vec<Vec<u32>> = s.iter().map(|i| i.entries().to_vec()).collect();
        assert_eq!(got, expect);
        assert_eq!(s.position(&MultiIndex::new(vec![1, 1])), Some(4));
    }

    #[test]
    fn lower_examples() {
        assert!(is_lower(&set(2, &[&[0, 0], &[1, 0], &[0, 1]])));
        assert!(!is_lower(&set(2, &[&[0, 0], &[2, 0]])));
        assert!(is_lower(&IndexSet::empty(3).unwrap()));
        assert!(is_lower(&build_hyperbolic_cross(4, 12).unwrap()));
    }

    #[test]
    fn weighted_cardinality_examples() {
        let s = build_tensor_product(1, 4).unwrap();
        assert_eq!(weighted_cardinality(&s, &WeightVector::unit(5)).unwrap(), 5.0);
        let s = build_tensor_product(1, 2).unwrap();
        let w = WeightVector::custom(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(weighted_cardinality(&s, &w).unwrap(), 14.0);
        assert!(matches!(
            weighted_cardinality(&s, &WeightVector::unit(2)),
            Err(Error::MissingWeight { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn bound_check_examples() {
        let zero = set(1, &[&[0]]);
        let c = lower_set_bound_check(&zero, Scenario::CC).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (1.0, 1.0, true));

        let td = build_total_degree(2, 2).unwrap();
        let c = lower_set_bound_check(&td, Scenario::LU).unwrap();
        // (0,0):1 (0,1):3 (1,0):3 (0,2):5 (1,1):9 (2,0):5
        assert_eq!(c.lhs, 26.0);
        assert_eq!(c.rhs, 36.0);
        assert!(c.holds);

        assert!(matches!(lower_set_bound_check(&set(2, &[&[0, 0], &[2, 0]]), Scenario::CC), Err(Error::NotLower)));
    }

    #[test]
    fn random_lower_set_examples() {
        assert_eq!(random_lower_set(1, 4, 99).unwrap(), build_tensor_product(1, 3).unwrap());
        assert_eq!(random_lower_set(2, 1, 5).unwrap(), set(2, &[&[0, 0]]));
        let s = random_lower_set(3, 10, 7).unwrap();
        assert_eq!(s.len(), 10);
        assert!(is_lower(&s));
        assert_eq!(s, random_lower_set(3, 10, 7).unwrap());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let s = build_hyperbolic_cross(3, 6).unwrap();
        let text = s.to_text();
        assert!(text.starts_with("d=3\n0 0 0\n"));
        let back = IndexSet::from_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
        assert!(IndexSet::from_text("d=2\n0 0\n0 0\n").is_err());
        assert!(IndexSet::from_text("d=2\n0 0 1\n").is_err());
        assert!(IndexSet::from_text("dim=2\n").is_err());
        assert_eq!(IndexSet::from_text("d=2\n").unwrap().len(), 0);
    }

    #[test]
    fn set_algebra() {
        let a = set(2, &[&[0, 0], &[1, 0]]);
        let b = set(2, &[&[0, 0], &[0, 1]]);
        assert_eq!(a.union(&b).unwrap().len(), 3);
        assert_eq!(a.intersection(&b).unwrap(), set(2, &[&[0, 0]]));
        assert_eq!(a.difference(&b).unwrap(), set(2, &[&[1, 0]]));
        assert!(a.intersection(&b).unwrap().is_subset_of(&a));
        assert!(a.union(&set(1, &[&[0]])).is_err());
    }
}
