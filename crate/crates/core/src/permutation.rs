//! Finite permutations of lattice sites, cyclic-permutation combinatorics,
//! derangement counts and the cover-selection rules used by the couplings.
//!
//! Permutations are stored in canonical cycle form. The combinatorial
//! routines work on a [`RangeSet`] through *index maps*: for a range
//! `R = [r_0, …, r_{k-1}]` (sorted) an index map `img` encodes
//! `σ(r_i) = r_{img[i]}`. Occupancy words on `R` are bitmasks where bit `i`
//! is the occupancy of `r_i`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::process::Configuration;

/// Bijection of ℤ^d displacing finitely many sites.
///
/// Canonical form: each cycle starts at its minimal site, cycles are sorted by
/// that site, no fixed points are stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FinitePermutation {
    cycles: Vec<Vec<Site>>,
}

impl FinitePermutation {
    pub fn identity() -> Self {
        FinitePermutation { cycles: Vec::new() }
    }

    /// Builds a permutation from disjoint cycles. Singleton cycles are
    /// dropped; repeated sites and empty cycles are rejected.
    pub fn from_cycles(cycles: Vec<Vec<Site>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut dim = None;
        let mut out = Vec::with_capacity(cycles.len());
        for cyc in cycles {
            if cyc.is_empty() {
                return Err(Error::InvalidPermutation("empty cycle".into()));
            }
            for &x in &cyc {
                if *dim.get_or_insert(x.dim()) != x.dim() {
                    return Err(Error::InvalidPermutation(format!(
                        "mixed dimensions at site {x}"
                    )));
                }
                if !seen.insert(x) {
                    return Err(Error::InvalidPermutation(format!(
                        "site {x} appears more than once"
                    )));
                }
            }
            if cyc.len() >= 2 {
                out.push(cyc);
            }
        }
        Ok(Self::canonical(out))
    }

    /// Builds a permutation from its action `x ↦ σ(x)` on a finite set.
    /// Pairs with `x == σ(x)` may be included or omitted.
    pub fn from_map(map: &BTreeMap<Site, Site>) -> Result<Self> {
        let targets: BTreeSet<Site> = map.values().copied().collect();
        if targets.len() != map.len() || targets.iter().any(|t| !map.contains_key(t)) {
            return Err(Error::InvalidPermutation(
                "map is not a bijection of its domain".into(),
            ));
        }
        let mut visited = BTreeSet::new();
        let mut cycles = Vec::new();
        for &start in map.keys() {
            if visited.contains(&start) || map[&start] == start {
                continue;
            }
            let mut cyc = vec![start];
            visited.insert(start);
            let mut x = map[&start];
            while x != start {
                visited.insert(x);
                cyc.push(x);
                x = map[&x];
            }
            cycles.push(cyc);
        }
        Ok(Self::canonical(cycles))
    }

    fn canonical(mut cycles: Vec<Vec<Site>>) -> Self {
        for cyc in cycles.iter_mut() {
            let pos = cyc
                .iter()
                .enumerate()
                .min_by_key(|(_, s)| **s)
                .map(|(i, _)| i)
                .unwrap_or(0);
            cyc.rotate_left(pos);
        }
        cycles.sort_by_key(|c| c[0]);
        FinitePermutation { cycles }
    }

    pub fn cycles(&self) -> &[Vec<Site>] {
        &self.cycles
    }

    pub fn is_identity(&self) -> bool {
        self.cycles.is_empty()
    }

    /// A single cycle covering the whole range.
    pub fn is_cyclic(&self) -> bool {
        self.cycles.len() == 1
    }

    /// `Range(σ) = {x : σ(x) ≠ x}`, sorted.
    pub fn range(&self) -> Vec<Site> {
        let mut r: Vec<Site> = self.cycles.iter().flatten().copied().collect();
        r.sort();
        r
    }

    pub fn range_len(&self) -> usize {
        self.cycles.iter().map(Vec::len).sum()
    }

    pub fn displaces(&self, x: Site) -> bool {
        self.cycles.iter().any(|c| c.contains(&x))
    }

    pub fn image(&self, x: Site) -> Site {
        for c in &self.cycles {
            if let Some(i) = c.iter().position(|&s| s == x) {
                return c[(i + 1) % c.len()];
            }
        }
        x
    }

    pub fn preimage(&self, x: Site) -> Site {
        for c in &self.cycles {
            if let Some(i) = c.iter().position(|&s| s == x) {
                return c[(i + c.len() - 1) % c.len()];
            }
        }
        x
    }

    pub fn inverse(&self) -> Self {
        let cycles = self
            .cycles
            .iter()
            .map(|c| c.iter().rev().copied().collect())
            .collect();
        Self::canonical(cycles)
    }

    /// `self ∘ other`: `other` acts first.
    pub fn compose(&self, other: &Self) -> Self {
        let mut support: BTreeSet<Site> = self.range().into_iter().collect();
        support.extend(other.range());
        let map = support
            .into_iter()
            .map(|x| (x, self.image(other.image(x))))
            .collect();
        Self::from_map(&map).expect("composition of bijections is a bijection")
    }

    /// `σ^i` for any integer `i` (negative powers invert).
    pub fn power(&self, i: i64) -> Self {
        let mut map = BTreeMap::new();
        for c in &self.cycles {
            let k = c.len() as i64;
            let step = i.rem_euclid(k) as usize;
            for (j, &x) in c.iter().enumerate() {
                map.insert(x, c[(j + step) % c.len()]);
            }
        }
        Self::from_map(&map).expect("power of a bijection is a bijection")
    }

    /// Orbit `[x, σ(x), σ²(x), …]` up to the return to `x`.
    pub fn orbit(&self, x: Site) -> Vec<Site> {
        for c in &self.cycles {
            if let Some(i) = c.iter().position(|&s| s == x) {
                let mut o = c[i..].to_vec();
                o.extend_from_slice(&c[..i]);
                return o;
            }
        }
        vec![x]
    }

    /// Least common multiple of the cycle lengths.
    pub fn order(&self) -> u64 {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        self.cycles
            .iter()
            .map(|c| c.len() as u64)
            .fold(1, |acc, k| acc / gcd(acc, k) * k)
    }

    /// Conjugation by the translation `v` (wrapped on a torus).
    pub fn shifted(&self, v: Site, lattice: &Lattice) -> Self {
        let cycles = self
            .cycles
            .iter()
            .map(|c| c.iter().map(|&x| lattice.shift(x, v)).collect())
            .collect();
        Self::canonical(cycles)
    }

    /// Index map of this permutation on `range` (which must contain its range).
    pub fn index_map(&self, range: &RangeSet) -> Result<Vec<usize>> {
        range
            .sites()
            .iter()
            .map(|&x| {
                let y = self.image(x);
                range.position(y).ok_or_else(|| {
                    Error::InvalidPermutation(format!("range does not contain image {y}"))
                })
            })
            .collect()
    }

    /// Inverse of [`FinitePermutation::index_map`].
    pub fn from_index_map(range: &RangeSet, img: &[usize]) -> Self {
        let map = range
            .sites()
            .iter()
            .zip(img)
            .map(|(&x, &j)| (x, range.sites()[j]))
            .collect();
        Self::from_map(&map).expect("index map must be a bijection")
    }
}

impl fmt::Display for FinitePermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cycles.is_empty() {
            return write!(f, "()");
        }
        for c in &self.cycles {
            write!(f, "(")?;
            for (i, x) in c.iter().enumerate() {
                if i > 0 {
                    write!(f, " ")?;
                }
                if x.dim() == 1 {
                    write!(f, "{}", x.coord(0))?;
                } else {
                    write!(f, "{x}")?;
                }
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for FinitePermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses cycle notation: `(0 1 2)(4 5)` or `((0,0) (0,1) (1,1))`.
impl FromStr for FinitePermutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace() || *c == ' ').collect();
        let mut cycles = Vec::new();
        let mut i = 0;
        let bad = |msg: &str| Error::Parse(format!("{msg} in cycle notation {s:?}"));
        while i < chars.len() {
            match chars[i] {
                ' ' => i += 1,
                '(' => {
                    i += 1;
                    let mut cyc = Vec::new();
                    loop {
                        while i < chars.len() && chars[i] == ' ' {
                            i += 1;
                        }
                        if i >= chars.len() {
                            return Err(bad("unterminated cycle"));
                        }
                        match chars[i] {
                            ')' => {
                                i += 1;
                                break;
                            }
                            '(' => {
                                let end = chars[i..]
                                    .iter()
                                    .position(|&c| c == ')')
                                    .ok_or_else(|| bad("unterminated site"))?;
                                let tok: String = chars[i..i + end + 1].iter().collect();
                                cyc.push(tok.parse::<Site>()?);
                                i += end + 1;
                            }
                            _ => {
                                let end = chars[i..]
                                    .iter()
                                    .position(|&c| c == ' ' || c == ')')
                                    .ok_or_else(|| bad("unterminated cycle"))?;
                                let tok: String = chars[i..i + end].iter().collect();
                                cyc.push(tok.parse::<Site>()?);
                                i += end;
                            }
                        }
                    }
                    if !cyc.is_empty() {
                        cycles.push(cyc);
                    }
                }
                _ => return Err(bad("unexpected character")),
            }
        }
        FinitePermutation::from_cycles(cycles)
    }
}

/// A range set: a sorted set of at least two sites.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct RangeSet {
    sites: Vec<Site>,
}

impl RangeSet {
    pub fn new(mut sites: Vec<Site>) -> Result<Self> {
        sites.sort();
        sites.dedup();
        if sites.len() < 2 {
            return Err(Error::Precondition(
                "a range set needs at least two sites".into(),
            ));
        }
        if sites.len() > 31 {
            return Err(Error::Precondition("range sets are limited to 31 sites".into()));
        }
        Ok(RangeSet { sites })
    }

    /// Shorthand for one-dimensional ranges.
    pub fn line(xs: &[i64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| Site::new(&[x])).collect())
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn min(&self) -> Site {
        self.sites[0]
    }

    pub fn contains(&self, x: Site) -> bool {
        self.sites.binary_search(&x).is_ok()
    }

    pub fn position(&self, x: Site) -> Option<usize> {
        self.sites.binary_search(&x).ok()
    }

    /// Translation without wrapping.
    pub fn translated(&self, v: Site) -> Self {
        RangeSet {
            sites: self.sites.iter().map(|&x| x + v).collect(),
        }
    }
}

/// Occupancy word on a range: bit `i` is the occupancy of the `i`-th site.
pub type Word = u32;

/// `σ(a)` for an index map: `σ(a)(img[i]) = a(i)`.
pub fn apply_word(img: &[usize], a: Word) -> Word {
    let mut out = 0;
    for (i, &j) in img.iter().enumerate() {
        if a >> i & 1 == 1 {
            out |= 1 << j;
        }
    }
    out
}

/// `σ(η)(x) = η(σ⁻¹(x))`; sites outside `Range(σ)` are untouched.
pub fn apply(sigma: &FinitePermutation, eta: &Configuration) -> Configuration {
    let mut out = eta.clone();
    out.apply(sigma);
    out
}

pub fn inverse(sigma: &FinitePermutation) -> FinitePermutation {
    sigma.inverse()
}

pub fn compose(a: &FinitePermutation, b: &FinitePermutation) -> FinitePermutation {
    a.compose(b)
}

pub fn power(sigma: &FinitePermutation, i: i64) -> FinitePermutation {
    sigma.power(i)
}

pub fn orbit(sigma: &FinitePermutation, x: Site) -> Vec<Site> {
    sigma.orbit(x)
}

/// Number of derangements 𝒫(n), via Euler's recurrence
/// `𝒫(n) = (n-1)(𝒫(n-1) + 𝒫(n-2))`.
///
/// Defined for `2 ≤ n ≤ 20` (the largest value fitting in `u64`).
pub fn derangement_count(n: usize) -> Result<u64> {
    check_derangement_arg(n)?;
    let (mut prev, mut cur) = (1u64, 0u64); // 𝒫(0), 𝒫(1)
    for k in 2..=n as u64 {
        let next = (k - 1) * (cur + prev);
        prev = cur;
        cur = next;
    }
    debug_assert_eq!(Some(cur), derangement_count_inclusion_exclusion(n).ok());
    Ok(cur)
}

/// 𝒫(n) = Σ_k C(n,k)(−1)^k (n−k)!.
pub fn derangement_count_inclusion_exclusion(n: usize) -> Result<u64> {
    check_derangement_arg(n)?;
    let n = n as i128;
    let mut fact = vec![1i128; n as usize + 1];
    for k in 1..=n as usize {
        fact[k] = fact[k - 1] * k as i128;
    }
    let total: i128 = (0..=n)
        .map(|k| {
            let binom = fact[n as usize] / (fact[k as usize] * fact[(n - k) as usize]);
            let sign = if k % 2 == 0 { 1 } else { -1 };
            sign * binom * fact[(n - k) as usize]
        })
        .sum();
    Ok(total as u64)
}

fn check_derangement_arg(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "derangement count needs n ≥ 2 (got {n})"
        )));
    }
    if n > 20 {
        return Err(Error::Precondition(format!(
            "derangement count overflows u64 beyond n = 20 (got {n})"
        )));
    }
    Ok(())
}

/// Next lexicographic permutation in place; false when `v` was the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Index maps of all single-cycle permutations of `r` points, in canonical
/// order: the cycle is read from point 0 and sequences are compared
/// lexicographically.
pub fn cyclic_index_maps(r: usize) -> Vec<Vec<usize>> {
    assert!(r >= 2);
    let mut rest: Vec<usize> = (1..r).collect();
    let mut out = Vec::new();
    loop {
        let mut img = vec![0; r];
        let mut prev = 0;
        for &x in &rest {
            img[prev] = x;
            prev = x;
        }
        img[prev] = 0;
        out.push(img);
        if !next_permutation(&mut rest) {
            break;
        }
    }
    out
}

/// Index maps of all fixed-point-free permutations of `r` points, in
/// lexicographic order of the image vector.
pub fn derangement_index_maps(r: usize) -> Vec<Vec<usize>> {
    let mut img: Vec<usize> = (0..r).collect();
    let mut out = Vec::new();
    loop {
        if img.iter().enumerate().all(|(i, &j)| i != j) {
            out.push(img.clone());
        }
        if !next_permutation(&mut img) {
            break;
        }
    }
    out
}

/// All `(|R|-1)!` single-cycle permutations with range exactly `R`.
///
/// The order is determined by positions relative to `min(R)`, so the list
/// for `R + y` is the `y`-translate of the list for `R`.
pub fn enumerate_cyclic(range: &RangeSet) -> Vec<FinitePermutation> {
    cyclic_index_maps(range.len())
        .iter()
        .map(|img| FinitePermutation::from_index_map(range, img))
        .collect()
}

/// All `𝒫(|R|)` permutations with range exactly `R`.
pub fn enumerate_derangements(range: &RangeSet) -> Vec<FinitePermutation> {
    derangement_index_maps(range.len())
        .iter()
        .map(|img| FinitePermutation::from_index_map(range, img))
        .collect()
}

/// Which candidate wins when several cyclic permutations qualify.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// First qualifying permutation in canonical order.
    #[default]
    CanonicalFirst,
    /// Last qualifying permutation in canonical order.
    CanonicalLast,
}

/// Qualification rule for a cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverRule {
    /// `σ(a) = b`.
    Exact,
    /// `σ(a) ≥ b` pointwise.
    Dominating,
}

/// Index of the selected candidate among `candidates` (index maps in
/// canonical order), or `None` when no candidate qualifies.
pub fn select_cover<'a, I>(
    candidates: I,
    a: Word,
    b: Word,
    rule: CoverRule,
    policy: SelectionPolicy,
) -> Option<usize>
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let ok = |img: &[usize]| {
        let s = apply_word(img, a);
        match rule {
            CoverRule::Exact => s == b,
            CoverRule::Dominating => s & b == b,
        }
    };
    let mut found = None;
    for (k, img) in candidates.into_iter().enumerate() {
        if ok(img) {
            found = Some(k);
            if policy == SelectionPolicy::CanonicalFirst {
                break;
            }
        }
    }
    found
}

fn word_mask(r: usize) -> Word {
    if r >= 32 {
        Word::MAX
    } else {
        (1 << r) - 1
    }
}

/// Cyclic `σ_R` with `σ_R(a) = b` on `R`, first in canonical order.
///
/// Requires equal popcounts and exactly two differing positions.
pub fn select_sigma_two_discrepancy(range: &RangeSet, a: Word, b: Word) -> Result<FinitePermutation> {
    select_sigma_two_discrepancy_with(range, a, b, SelectionPolicy::CanonicalFirst)
}

pub fn select_sigma_two_discrepancy_with(
    range: &RangeSet,
    a: Word,
    b: Word,
    policy: SelectionPolicy,
) -> Result<FinitePermutation> {
    let mask = word_mask(range.len());
    let (a, b) = (a & mask, b & mask);
    if a.count_ones() != b.count_ones() || (a ^ b).count_ones() != 2 {
        return Err(Error::Precondition(
            "words must have equal popcount and differ in exactly two positions".into(),
        ));
    }
    let maps = cyclic_index_maps(range.len());
    let k = select_cover(maps.iter().map(Vec::as_slice), a, b, CoverRule::Exact, policy)
        .ok_or(Error::NoCover)?;
    Ok(FinitePermutation::from_index_map(range, &maps[k]))
}

/// Cyclic `σ_R` with `σ_R(a) ≥ b` on `R`, first in canonical order.
///
/// Requires `popcount(a) ≥ popcount(b)`. Fails with [`Error::NoCover`] when
/// `a = b` is non-constant on `R`, the one configuration no cyclic
/// permutation can fix.
pub fn select_sigma_general(range: &RangeSet, a: Word, b: Word) -> Result<FinitePermutation> {
    select_sigma_general_with(range, a, b, SelectionPolicy::CanonicalFirst)
}

pub fn select_sigma_general_with(
    range: &RangeSet,
    a: Word,
    b: Word,
    policy: SelectionPolicy,
) -> Result<FinitePermutation> {
    let mask = word_mask(range.len());
    let (a, b) = (a & mask, b & mask);
    if a.count_ones() < b.count_ones() {
        return Err(Error::Precondition("popcount(a) must be at least popcount(b)".into()));
    }
    let maps = cyclic_index_maps(range.len());
    let k = select_cover(maps.iter().map(Vec::as_slice), a, b, CoverRule::Dominating, policy)
        .ok_or(Error::NoCover)?;
    Ok(FinitePermutation::from_index_map(range, &maps[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use proptest::prelude::*;

    fn s(x: i64) -> Site {
        Site::new(&[x])
    }

    fn cyc(xs: &[i64]) -> FinitePermutation {
        FinitePermutation::from_cycles(vec![xs.iter().map(|&x| s(x)).collect()]).unwrap()
    }

    /// Oracle: all index maps of `r` points by brute force.
    fn all_maps(r: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..r {
            let mut next = Vec::new();
            for p in &out {
                for j in 0..r {
                    if !p.contains(&j) {
                        let mut q = p.clone();
                        q.push(j);
                        next.push(q);
                    }
                }
            }
            out = next;
        }
        out
    }

    fn is_single_cycle(img: &[usize]) -> bool {
        let mut x = img[0];
        let mut len = 1;
        while x != 0 {
            x = img[x];
            len += 1;
        }
        len == img.len()
    }

    #[test]
    fn canonical_form_and_notation() {
        let p = FinitePermutation::from_cycles(vec![vec![s(2), s(0), s(1)], vec![s(7)]]).unwrap();
        assert_eq!(p.cycles(), &[vec![s(0), s(1), s(2)]]);
        assert_eq!(p.to_string(), "(0 1 2)");
        let q: FinitePermutation = "(5 4)(2 3 1)".parse().unwrap();
        assert_eq!(q.to_string(), "(1 2 3)(4 5)");
        let r: FinitePermutation = "((0,1) (0,0))".parse().unwrap();
        assert_eq!(r.to_string(), "((0,0) (0,1))");
        assert_eq!(r.to_string().parse::<FinitePermutation>().unwrap(), r);
        assert!("(0 1 0)".parse::<FinitePermutation>().is_err());
        assert!("(0 1".parse::<FinitePermutation>().is_err());
    }

    #[test]
    fn group_operations() {
        let c = cyc(&[0, 1, 2]);
        assert_eq!(c.inverse(), cyc(&[0, 2, 1]));
        assert!(c.power(3).is_identity());
        assert_eq!(c.power(-1), c.inverse());
        assert_eq!(c.power(2), c.inverse());
        let t = cyc(&[0, 1]);
        assert!(t.compose(&t).is_identity());
        assert_eq!(c.order(), 3);
        let pq: FinitePermutation = "(0 1)(2 3 4)".parse().unwrap();
        assert_eq!(pq.order(), 6);
        assert!(pq.power(6).is_identity());
        assert_eq!(cyc(&[0, 1, 2, 3]).power(2).to_string(), "(0 2)(1 3)");
    }

    #[test]
    fn orbits() {
        let c = cyc(&[0, 1, 2]);
        assert_eq!(c.orbit(s(0)), vec![s(0), s(1), s(2)]);
        assert_eq!(c.orbit(s(1)), vec![s(1), s(2), s(0)]);
        assert_eq!(c.orbit(s(5)), vec![s(5)]);
        let pq: FinitePermutation = "(0 1)(2 3)".parse().unwrap();
        assert_eq!(pq.orbit(s(2)), vec![s(2), s(3)]);
    }

    #[test]
    fn apply_moves_particle_along_cycle() {
        let lat = Lattice::torus(&[3]).unwrap();
        let eta = Configuration::from_sites(&lat, &[s(0)]).unwrap();
        let out = apply(&cyc(&[0, 1, 2]), &eta);
        assert_eq!(out.occupied_sites(), vec![s(1)]);
        let empty = Configuration::empty(&lat);
        assert_eq!(apply(&cyc(&[0, 1, 2]), &empty), empty);
    }

    #[test]
    fn derangement_values() {
        assert_eq!(derangement_count(2).unwrap(), 1);
        assert_eq!(derangement_count(3).unwrap(), 2);
        assert_eq!(derangement_count(4).unwrap(), 9);
        assert_eq!(derangement_count(5).unwrap(), 44);
        assert!(derangement_count(1).is_err());
        assert!(derangement_count(0).is_err());
        for n in 2..=8 {
            let brute = all_maps(n)
                .iter()
                .filter(|p| p.iter().enumerate().all(|(i, &j)| i != j))
                .count() as u64;
            assert_eq!(derangement_count(n).unwrap(), brute, "n = {n}");
            assert_eq!(derangement_count_inclusion_exclusion(n).unwrap(), brute);
        }
        for n in 2..=20 {
            assert_eq!(
                derangement_count(n).unwrap(),
                derangement_count_inclusion_exclusion(n).unwrap()
            );
            if n > 2 {
                assert!(derangement_count(n).unwrap() > derangement_count(n - 1).unwrap());
            }
        }
    }

    #[test]
    fn cyclic_enumeration() {
        let r2 = RangeSet::line(&[0, 1]).unwrap();
        assert_eq!(enumerate_cyclic(&r2), vec![cyc(&[0, 1])]);
        let r3 = RangeSet::line(&[0, 1, 2]).unwrap();
        assert_eq!(enumerate_cyclic(&r3), vec![cyc(&[0, 1, 2]), cyc(&[0, 2, 1])]);
        for r in 2..=6 {
            let oracle: Vec<Vec<usize>> =
                all_maps(r).into_iter().filter(|m| is_single_cycle(m)).collect();
            let maps = cyclic_index_maps(r);
            assert_eq!(maps.len(), oracle.len());
            let fact: usize = (1..r).product();
            assert_eq!(maps.len(), fact);
            for m in &maps {
                assert!(oracle.contains(m));
                assert!(m.iter().enumerate().all(|(i, &j)| i != j));
            }
        }
    }

    #[test]
    fn derangement_enumeration() {
        for r in 2..=6 {
            let range = RangeSet::line(&(0..r as i64).collect::<Vec<_>>()).unwrap();
            let ds = enumerate_derangements(&range);
            assert_eq!(ds.len() as u64, derangement_count(r).unwrap());
            for d in &ds {
                assert_eq!(d.range(), range.sites());
            }
        }
    }

    #[test]
    fn cyclic_order_is_shift_covariant() {
        let lat = Lattice::unbounded(2).unwrap();
        let r = RangeSet::new(vec![
            Site::new(&[0, 0]),
            Site::new(&[0, 1]),
            Site::new(&[1, 0]),
            Site::new(&[1, 1]),
        ])
        .unwrap();
        let y = Site::new(&[-3, 5]);
        let shifted: Vec<_> = enumerate_cyclic(&r).iter().map(|p| p.shifted(y, &lat)).collect();
        assert_eq!(enumerate_cyclic(&r.translated(y)), shifted);
    }

    #[test]
    fn two_discrepancy_selection_worked_example() {
        // y = 1: range {0,1,2} holds A = 1,1,0 and B = 1,0,1.
        let r = RangeSet::line(&[0, 1, 2]).unwrap();
        let sigma = select_sigma_two_discrepancy(&r, 0b011, 0b101).unwrap();
        assert_eq!(sigma, cyc(&[0, 1, 2]).inverse());
        let cands = enumerate_cyclic(&r)
            .into_iter()
            .filter(|p| apply_word(&p.index_map(&r).unwrap(), 0b011) == 0b101)
            .count();
        assert_eq!(cands, 1);
        assert!(matches!(
            select_sigma_two_discrepancy(&r, 0b011, 0b011),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn two_discrepancy_selection_exhaustive() {
        for r in 2..=5usize {
            let range = RangeSet::line(&(0..r as i64).collect::<Vec<_>>()).unwrap();
            let maps = cyclic_index_maps(r);
            for a in 0..(1u32 << r) {
                for b in 0..(1u32 << r) {
                    if a.count_ones() != b.count_ones() || (a ^ b).count_ones() != 2 {
                        continue;
                    }
                    let sigma = select_sigma_two_discrepancy(&range, a, b).unwrap();
                    let img = sigma.index_map(&range).unwrap();
                    assert_eq!(apply_word(&img, a), b);
                    let first = maps.iter().position(|m| apply_word(m, a) == b).unwrap();
                    assert_eq!(img, maps[first]);
                }
            }
        }
    }

    #[test]
    fn general_selection() {
        let r = RangeSet::line(&[0, 1, 2]).unwrap();
        let first = select_sigma_general(&r, 0b111, 0b111).unwrap();
        assert_eq!(first, enumerate_cyclic(&r)[0]);
        let sigma = select_sigma_general(&r, 0b011, 0b010).unwrap();
        let img = sigma.index_map(&r).unwrap();
        assert_eq!(apply_word(&img, 0b011) & 0b010, 0b010);
        assert!(matches!(select_sigma_general(&r, 0b011, 0b011), Err(Error::NoCover)));
        assert!(matches!(
            select_sigma_general(&r, 0b001, 0b011),
            Err(Error::Precondition(_))
        ));
        let last = select_sigma_general_with(&r, 0b111, 0b111, SelectionPolicy::CanonicalLast)
            .unwrap();
        assert_eq!(last, enumerate_cyclic(&r)[1]);
    }

    #[test]
    fn general_selection_is_shift_covariant() {
        let lat = Lattice::unbounded(1).unwrap();
        for r in 2..=4usize {
            let range = RangeSet::line(&(0..r as i64).collect::<Vec<_>>()).unwrap();
            for a in 0..(1u32 << r) {
                for b in 0..(1u32 << r) {
                    if a.count_ones() < b.count_ones() {
                        continue;
                    }
                    let base = select_sigma_general(&range, a, b);
                    for y in [-7i64, 1, 3, 100] {
                        let v = s(y);
                        let moved = select_sigma_general(&range.translated(v), a, b);
                        match (&base, &moved) {
                            (Ok(p), Ok(q)) => assert_eq!(&p.shifted(v, &lat), q),
                            (Err(_), Err(_)) => {}
                            _ => panic!("selection existence differs under shift"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn index_map_round_trip() {
        let r = RangeSet::line(&[3, 5, 9]).unwrap();
        for p in enumerate_derangements(&r) {
            let img = p.index_map(&r).unwrap();
            assert_eq!(FinitePermutation::from_index_map(&r, &img), p);
        }
    }

    fn arb_perm(max_site: i64) -> impl Strategy<Value = FinitePermutation> {
        proptest::sample::subsequence((0..max_site).collect::<Vec<_>>(), 0..=max_site as usize)
            .prop_flat_map(|sites| {
                let n = sites.len();
                (Just(sites), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            })
            .prop_map(|(sites, perm)| {
                let map = sites
                    .iter()
                    .zip(&perm)
                    .map(|(&x, &j)| (s(x), s(sites[j])))
                    .collect();
                FinitePermutation::from_map(&map).unwrap()
            })
    }

    proptest! {
        #[test]
        fn compose_matches_sequential_apply(p in arb_perm(8), q in arb_perm(8), bits in 0u32..256) {
            let lat = Lattice::torus(&[8]).unwrap();
            let occ: Vec<Site> = (0..8).filter(|i| bits >> i & 1 == 1).map(s).collect();
            let eta = Configuration::from_sites(&lat, &occ).unwrap();
            prop_assert_eq!(apply(&p.compose(&q), &eta), apply(&p, &apply(&q, &eta)));
            let back = apply(&p.inverse(), &apply(&p, &eta));
            prop_assert_eq!(&back, &eta);
            // pointwise oracle: σ(η)(x) = η(σ⁻¹(x))
            let out = apply(&p, &eta);
            for x in 0..8 {
                prop_assert_eq!(out.get(s(x)), eta.get(p.preimage(s(x))));
            }
            prop_assert_eq!(out.count(), eta.count());
        }

        #[test]
        fn ranges_under_inverse_and_power(p in arb_perm(9), i in -6i64..7) {
            prop_assert_eq!(p.inverse().range(), p.range());
            let pr = p.range();
            for x in p.power(i).range() {
                prop_assert!(pr.contains(&x));
            }
            prop_assert!(p.power(p.order() as i64).is_identity());
        }
    }
}
