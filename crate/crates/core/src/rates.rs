//! Shift-invariant rate families and their validation.
//!
//! A family is given by base permutations anchored at the origin (the minimal
//! site of each range is the origin) together with positive rates; every
//! translate of a base permutation fires at the base rate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeMode, Site};
use crate::permutation::{apply_word, derangement_count, derangement_index_maps, FinitePermutation, RangeSet, Word};

/// Relative tolerance used when comparing rates for equality.
pub const RATE_EQ_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BasePermutation {
    pub perm: FinitePermutation,
    pub rate: f64,
}

/// Base permutations sharing one anchored range set.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeClass {
    pub range: RangeSet,
    /// Indices into [`RateFamily::base`].
    pub members: Vec<usize>,
    /// m(R): minimal rate over the members.
    pub min_rate: f64,
    /// Z(R): total rate of the members.
    pub total_rate: f64,
}

/// One translate of a base permutation on a torus.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedPermutation {
    /// `base * num_sites + index_of(shift)`.
    pub id: usize,
    pub base: usize,
    pub shift: Site,
    pub perm: FinitePermutation,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFamily {
    lattice: Lattice,
    base: Vec<BasePermutation>,
    classes: Vec<RangeClass>,
    class_of: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureMode {
    /// Every derangement of every occurring range is in the family.
    Strict,
    /// Every ordered pair of distinct equal-popcount words on a range is
    /// connected by some member of that range.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureReport {
    pub mode: ClosureMode,
    pub passed: bool,
    /// Strict mode: missing derangements in cycle notation.
    pub missing: Vec<String>,
    /// Relaxed mode: `(range, a, b)` word pairs no member maps `a` to `b`.
    pub failing_pairs: Vec<(String, Word, Word)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    pub m_pl: f64,
    pub m_i: usize,
    /// Only defined for strictly range-closed families.
    pub m_ii: Option<f64>,
    pub symmetric: bool,
    pub range_closed: bool,
    pub range_closed_relaxed: bool,
    pub irreducible: bool,
    /// `m(R)·M_II·𝒫(M_I) ≥ Z(R)` on every range (strictly closed families only).
    pub success_bound_consistent: Option<bool>,
}

impl RateFamily {
    /// Anchors every base permutation, rejects non-positive rates, identities
    /// and duplicates, and checks the torus size constraint.
    pub fn new(lattice: Lattice, base: Vec<(FinitePermutation, f64)>) -> Result<Self> {
        let mut anchored: Vec<BasePermutation> = Vec::with_capacity(base.len());
        for (perm, rate) in base {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidRate(rate));
            }
            if perm.is_identity() {
                return Err(Error::InvalidPermutation(
                    "identity has empty range and cannot carry a rate".into(),
                ));
            }
            let range = perm.range();
            for &x in &range {
                lattice.check_site(x)?;
            }
            let anchor = range[0];
            let perm = perm.shifted(-anchor, &Lattice::unbounded(lattice.dim())?);
            if anchored.iter().any(|b| b.perm == perm) {
                return Err(Error::DuplicatePermutation(perm.to_string()));
            }
            anchored.push(BasePermutation { perm, rate });
        }

        if let Some(sides) = lattice.sides() {
            let extent = Self::extent_of(&anchored, lattice.dim());
            if sides.iter().zip(&extent).any(|(&l, &e)| l <= 2 * e) {
                return Err(Error::TorusTooSmall {
                    sides: sides.to_vec(),
                    extent,
                });
            }
        }

        let mut by_range: BTreeMap<RangeSet, Vec<usize>> = BTreeMap::new();
        for (i, b) in anchored.iter().enumerate() {
            let r = RangeSet::new(b.perm.range())?;
            by_range.entry(r).or_default().push(i);
        }
        let mut class_of = vec![0; anchored.len()];
        let classes = by_range
            .into_iter()
            .enumerate()
            .map(|(ci, (range, members))| {
                for &m in &members {
                    class_of[m] = ci;
                }
                let rates = members.iter().map(|&m| anchored[m].rate);
                RangeClass {
                    min_rate: rates.clone().fold(f64::INFINITY, f64::min),
                    total_rate: rates.sum(),
                    range,
                    members,
                }
            })
            .collect();

        Ok(RateFamily {
            lattice,
            base: anchored,
            classes,
            class_of,
        })
    }

    fn extent_of(base: &[BasePermutation], dim: usize) -> Vec<i64> {
        let mut extent = vec![0; dim];
        for b in base {
            let r = b.perm.range();
            for (i, e) in extent.iter_mut().enumerate() {
                let lo = r.iter().map(|x| x.coord(i)).min().unwrap_or(0);
                let hi = r.iter().map(|x| x.coord(i)).max().unwrap_or(0);
                *e = (*e).max(hi - lo);
            }
        }
        extent
    }

    /// Same base family on another lattice of the same dimension.
    pub fn with_lattice(&self, lattice: Lattice) -> Result<Self> {
        if lattice.dim() != self.lattice.dim() {
            return Err(Error::InvalidDimension(lattice.dim()));
        }
        Self::new(
            lattice,
            self.base.iter().map(|b| (b.perm.clone(), b.rate)).collect(),
        )
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn base(&self) -> &[BasePermutation] {
        &self.base
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn classes(&self) -> &[RangeClass] {
        &self.classes
    }

    pub fn class_of(&self, base: usize) -> usize {
        self.class_of[base]
    }

    /// Base-permutation translate `perm + shift`, wrapped on a torus.
    pub fn translate(&self, base: usize, shift: Site) -> FinitePermutation {
        self.base[base].perm.shifted(shift, &self.lattice)
    }

    /// `y − shift` in the anchored frame; on a torus the representative
    /// closest to the origin, which is unique for range sites.
    fn local(&self, shift: Site, y: Site) -> Site {
        let z = y - shift;
        match self.lattice.sides() {
            None => z,
            Some(sides) => {
                let c: Vec<i64> = sides
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| {
                        let c = z.coord(i).rem_euclid(l);
                        if 2 * c > l {
                            c - l
                        } else {
                            c
                        }
                    })
                    .collect();
                Site::new(&c)
            }
        }
    }

    /// Image of `y` under the translate `base + shift`, without building it.
    pub fn translate_image(&self, base: usize, shift: Site, y: Site) -> Site {
        let z = self.local(shift, y);
        let w = self.base[base].perm.image(z);
        if w == z {
            y
        } else {
            self.lattice.shift(w, shift)
        }
    }

    pub fn translate_displaces(&self, base: usize, shift: Site, y: Site) -> bool {
        self.base[base].perm.displaces(self.local(shift, y))
    }

    /// Every translate of every base permutation over the torus.
    pub fn expand(&self) -> Result<Vec<ExpandedPermutation>> {
        let sites = self.lattice.sites()?;
        let n = sites.len();
        let mut out = Vec::with_capacity(self.base.len() * n);
        for (bi, b) in self.base.iter().enumerate() {
            for (si, &shift) in sites.iter().enumerate() {
                out.push(ExpandedPermutation {
                    id: bi * n + si,
                    base: bi,
                    shift,
                    perm: b.perm.shifted(shift, &self.lattice),
                    rate: b.rate,
                });
            }
        }
        Ok(out)
    }

    /// Translates of base permutations whose range contains `x`, as
    /// `(base, shift)` pairs in base order then range-site order.
    pub fn covering(&self, x: Site) -> impl Iterator<Item = (usize, Site)> + '_ {
        self.base.iter().enumerate().flat_map(move |(bi, b)| {
            b.perm
                .range()
                .into_iter()
                .map(move |s| (bi, self.lattice.wrap(x - s)))
        })
    }

    /// M_PL = sup_x Σ_{σ ∋ x} q(σ) = Σ_base q(σ)·|Range(σ)|.
    pub fn m_pl(&self) -> f64 {
        self.base
            .iter()
            .map(|b| b.rate * b.perm.range_len() as f64)
            .sum()
    }

    /// M_I: largest range size.
    pub fn m_i(&self) -> usize {
        self.base.iter().map(|b| b.perm.range_len()).max().unwrap_or(0)
    }

    /// M_II: largest rate ratio among permutations sharing a range.
    pub fn m_ii(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::InvalidFamily("empty family".into()));
        }
        let closure = self.range_closure(ClosureMode::Strict);
        if !closure.passed {
            return Err(Error::NotRangeClosed(closure.missing.join(", ")));
        }
        Ok(self
            .classes
            .iter()
            .map(|c| {
                let max = c
                    .members
                    .iter()
                    .map(|&m| self.base[m].rate)
                    .fold(0.0, f64::max);
                max / c.min_rate
            })
            .fold(1.0, f64::max))
    }

    fn find_base(&self, perm: &FinitePermutation) -> Option<usize> {
        self.base.iter().position(|b| &b.perm == perm)
    }

    /// q(σ) = q(σ⁻¹) for every base permutation.
    pub fn is_symmetric(&self) -> bool {
        self.base.iter().all(|b| {
            let inv = b.perm.inverse();
            match self.find_base(&inv) {
                Some(j) => {
                    let r = self.base[j].rate;
                    (r - b.rate).abs() <= RATE_EQ_TOL * r.max(b.rate)
                }
                None => false,
            }
        })
    }

    pub fn range_closure(&self, mode: ClosureMode) -> ClosureReport {
        let mut missing = Vec::new();
        let mut failing_pairs = Vec::new();
        for class in &self.classes {
            let r = class.range.len();
            let member_maps: Vec<Vec<usize>> = class
                .members
                .iter()
                .map(|&m| self.base[m].perm.index_map(&class.range).expect("member range"))
                .collect();
            match mode {
                ClosureMode::Strict => {
                    for img in derangement_index_maps(r) {
                        if !member_maps.contains(&img) {
                            missing.push(
                                FinitePermutation::from_index_map(&class.range, &img).to_string(),
                            );
                        }
                    }
                }
                ClosureMode::Relaxed => {
                    for a in 0..(1 as Word) << r {
                        for b in 0..(1 as Word) << r {
                            if a == b || a.count_ones() != b.count_ones() {
                                continue;
                            }
                            if !member_maps.iter().any(|m| apply_word(m, a) == b) {
                                failing_pairs.push((format!("{:?}", class.range.sites()), a, b));
                            }
                        }
                    }
                }
            }
        }
        ClosureReport {
            mode,
            passed: missing.is_empty() && failing_pairs.is_empty(),
            missing,
            failing_pairs,
        }
    }

    /// Jump vectors `σ(x) − x` of a single walker.
    fn steps(&self) -> BTreeSet<Site> {
        let mut steps = BTreeSet::new();
        for b in &self.base {
            for c in b.perm.cycles() {
                for (i, &x) in c.iter().enumerate() {
                    steps.insert(c[(i + 1) % c.len()] - x);
                }
            }
        }
        steps
    }

    /// Irreducibility of the one-walker chain: strong connectivity of the
    /// site graph on a torus, or steps generating ℤ^d on the unbounded
    /// lattice.
    pub fn is_irreducible(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let steps: Vec<Site> = self.steps().into_iter().collect();
        match self.lattice.mode() {
            LatticeMode::Torus(_) => {
                let n = self.lattice.num_sites().unwrap();
                let reach = |sign: i64| {
                    let mut seen = vec![false; n];
                    let origin = Site::origin(self.dim());
                    let mut queue = VecDeque::from([origin]);
                    seen[0] = true;
                    let mut count = 1;
                    while let Some(x) = queue.pop_front() {
                        for &v in &steps {
                            let v = if sign > 0 { v } else { -v };
                            let y = self.lattice.shift(x, v);
                            let iy = self.lattice.index_of(y);
                            if !seen[iy] {
                                seen[iy] = true;
                                count += 1;
                                queue.push_back(y);
                            }
                        }
                    }
                    count == n
                };
                reach(1) && reach(-1)
            }
            LatticeMode::Unbounded => generates_full_lattice(&steps, self.dim()),
        }
    }

    /// Range set → (m(R), Z(R)). On a torus the keys are the wrapped range
    /// sets of all translates; on ℤ^d the anchored representatives.
    pub fn range_stats(&self) -> BTreeMap<RangeSet, (f64, f64)> {
        let mut out = BTreeMap::new();
        match self.lattice.sites() {
            Ok(sites) => {
                for class in &self.classes {
                    for &y in &sites {
                        let r = RangeSet::new(
                            class.range.sites().iter().map(|&x| self.lattice.shift(x, y)).collect(),
                        )
                        .expect("translate of a range set");
                        out.insert(r, (class.min_rate, class.total_rate));
                    }
                }
            }
            Err(_) => {
                for class in &self.classes {
                    out.insert(class.range.clone(), (class.min_rate, class.total_rate));
                }
            }
        }
        out
    }

    /// Translates `(class, shift)` of range sets containing both `u` and `v`.
    pub fn ranges_containing(&self, u: Site, v: Site) -> Vec<(usize, Site)> {
        let u = self.lattice.wrap(u);
        let v = self.lattice.wrap(v);
        let mut out = Vec::new();
        for (ci, class) in self.classes.iter().enumerate() {
            for &s in class.range.sites() {
                let y = self.lattice.wrap(u - s);
                let hit = class
                    .range
                    .sites()
                    .iter()
                    .any(|&x| self.lattice.shift(x, y) == v);
                if hit && !out.contains(&(ci, y)) {
                    out.push((ci, y));
                }
            }
        }
        out
    }

    /// z_d(u, v) = Σ Z(R) over range sets containing both sites.
    pub fn z_d(&self, u: Site, v: Site) -> f64 {
        let z: f64 = self
            .ranges_containing(u, v)
            .iter()
            .map(|&(c, _)| self.classes[c].total_rate)
            .sum();
        debug_assert!(z <= self.m_pl() * (1.0 + RATE_EQ_TOL));
        z
    }

    pub fn report(&self) -> FamilyReport {
        let m_ii = self.m_ii().ok();
        let success_bound_consistent = m_ii.map(|m_ii| {
            let p = derangement_count(self.m_i().max(2)).unwrap_or(u64::MAX) as f64;
            self.classes
                .iter()
                .all(|c| c.min_rate * m_ii * p >= c.total_rate * (1.0 - RATE_EQ_TOL))
        });
        FamilyReport {
            m_pl: self.m_pl(),
            m_i: self.m_i(),
            m_ii,
            symmetric: self.is_symmetric(),
            range_closed: self.range_closure(ClosureMode::Strict).passed,
            range_closed_relaxed: self.range_closure(ClosureMode::Relaxed).passed,
            irreducible: self.is_irreducible(),
            success_bound_consistent,
        }
    }

    /// Gate used by the simulation engines.
    pub fn validate_for_simulation(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidFamily("empty family".into()));
        }
        if !self.is_irreducible() {
            return Err(Error::InvalidFamily("family is not irreducible".into()));
        }
        Ok(())
    }

    pub fn to_spec(&self) -> FamilySpec {
        FamilySpec {
            dimension: self.dim(),
            lattice: match self.lattice.mode() {
                LatticeMode::Torus(l) => LatticeSpec::Torus { torus: l.clone() },
                LatticeMode::Unbounded => LatticeSpec::Named("unbounded".into()),
            },
            permutations: self
                .base
                .iter()
                .map(|b| PermutationSpec {
                    cycles: b
                        .perm
                        .cycles()
                        .iter()
                        .map(|c| c.iter().map(|x| x.coords().to_vec()).collect())
                        .collect(),
                    rate: b.rate,
                })
                .collect(),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.to_spec()).expect("family spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Whether the integer vectors generate all of ℤ^d (row echelon over ℤ).
pub fn generates_full_lattice(vectors: &[Site], dim: usize) -> bool {
    let mut rows: Vec<Vec<i64>> = vectors.iter().map(|v| v.coords().to_vec()).collect();
    let mut det = 1i64;
    for col in 0..dim {
        let start = col;
        loop {
            let pivot = (start..rows.len())
                .filter(|&i| rows[i][col] != 0)
                .min_by_key(|&i| rows[i][col].abs());
            let Some(p) = pivot else { return false };
            rows.swap(start, p);
            let mut done = true;
            for i in start + 1..rows.len() {
                if rows[i][col] != 0 {
                    let f = rows[i][col] / rows[start][col];
                    let pivot_row = rows[start].clone();
                    for (x, p) in rows[i].iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                    if rows[i][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        det *= rows[start][col].abs();
    }
    det == 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeSpec {
    Torus { torus: Vec<i64> },
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationSpec {
    pub cycles: Vec<Vec<Vec<i64>>>,
    pub rate: f64,
}

/// On-disk family description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub dimension: usize,
    pub lattice: LatticeSpec,
    pub permutations: Vec<PermutationSpec>,
}

impl FamilySpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &std::path::Path) -> Result<RateFamily> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)?.build()
    }

    pub fn build(&self) -> Result<RateFamily> {
        if self.permutations.is_empty() {
            return Err(Error::InvalidFamily("permutation list is empty".into()));
        }
        let lattice = match &self.lattice {
            LatticeSpec::Torus { torus } => {
                if torus.len() != self.dimension {
                    return Err(Error::InvalidFamily(format!(
                        "torus has {} sides but dimension is {}",
                        torus.len(),
                        self.dimension
                    )));
                }
                Lattice::torus(torus)?
            }
            LatticeSpec::Named(name) if name == "unbounded" => Lattice::unbounded(self.dimension)?,
            LatticeSpec::Named(name) => {
                return Err(Error::Parse(format!("unknown lattice {name:?}")))
            }
        };
        let base = self
            .permutations
            .iter()
            .map(|p| {
                let cycles = p
                    .cycles
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|v| {
                                if v.len() != self.dimension {
                                    Err(Error::InvalidFamily(format!(
                                        "offset {v:?} does not have dimension {}",
                                        self.dimension
                                    )))
                                } else {
                                    Ok(Site::new(v))
                                }
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((FinitePermutation::from_cycles(cycles)?, p.rate))
            })
            .collect::<Result<Vec<_>>>()?;
        RateFamily::new(lattice, base)
    }
}

/// Families used throughout the examples and tests.
pub mod presets {
    use super::*;

    fn line_cycle(xs: &[i64]) -> FinitePermutation {
        FinitePermutation::from_cycles(vec![xs.iter().map(|&x| Site::new(&[x])).collect()])
            .expect("valid cycle")
    }

    /// Three-cycles of consecutive integers and their inverses, both at rate `q`.
    pub fn three_cycles(lattice: Lattice, q: f64) -> Result<RateFamily> {
        three_cycles_with_rates(lattice, q, q)
    }

    /// `(0 1 2)` at rate `forward`, `(0 2 1)` at rate `backward`.
    pub fn three_cycles_with_rates(lattice: Lattice, forward: f64, backward: f64) -> Result<RateFamily> {
        RateFamily::new(
            lattice,
            vec![(line_cycle(&[0, 1, 2]), forward), (line_cycle(&[0, 2, 1]), backward)],
        )
    }

    /// `(0 1 2)` alone: violates symmetry and closure.
    pub fn single_three_cycle(lattice: Lattice, q: f64) -> Result<RateFamily> {
        RateFamily::new(lattice, vec![(line_cycle(&[0, 1, 2]), q)])
    }

    /// Nearest-neighbour transpositions along each axis at rate `q`.
    pub fn nearest_neighbor_transpositions(lattice: Lattice, q: f64) -> Result<RateFamily> {
        let d = lattice.dim();
        let base = (0..d)
            .map(|axis| {
                let mut e = vec![0; d];
                e[axis] = 1;
                let p = FinitePermutation::from_cycles(vec![vec![Site::origin(d), Site::new(&e)]])
                    .expect("valid transposition");
                (p, q)
            })
            .collect();
        RateFamily::new(lattice, base)
    }

    /// Three-cycles plus the nearest-neighbour transposition.
    pub fn three_cycles_and_swaps(lattice: Lattice, q_cycle: f64, q_swap: f64) -> Result<RateFamily> {
        RateFamily::new(
            lattice,
            vec![
                (line_cycle(&[0, 1, 2]), q_cycle),
                (line_cycle(&[0, 2, 1]), q_cycle),
                (line_cycle(&[0, 1]), q_swap),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    fn s(x: i64) -> Site {
        Site::new(&[x])
    }

    fn torus(l: i64) -> Lattice {
        Lattice::torus(&[l]).unwrap()
    }

    fn transposition(a: i64, b: i64) -> FinitePermutation {
        FinitePermutation::from_cycles(vec![vec![s(a), s(b)]]).unwrap()
    }

    #[test]
    fn expansion_counts() {
        let fam = three_cycles(torus(6), 1.0).unwrap();
        assert_eq!(fam.expand().unwrap().len(), 12);
        let t = RateFamily::new(torus(4), vec![(transposition(0, 1), 1.0)]).unwrap();
        let ex = t.expand().unwrap();
        assert_eq!(ex.len(), 4);
        assert!(ex.iter().all(|e| e.rate == 1.0));
        let empty = RateFamily::new(torus(4), vec![]).unwrap();
        assert!(empty.expand().unwrap().is_empty());
        assert!(three_cycles(Lattice::unbounded(1).unwrap(), 1.0)
            .unwrap()
            .expand()
            .is_err());
    }

    #[test]
    fn torus_too_small_is_rejected() {
        assert!(matches!(
            three_cycles(torus(4), 1.0),
            Err(Error::TorusTooSmall { .. })
        ));
        assert!(three_cycles(torus(5), 1.0).is_ok());
    }

    #[test]
    fn anchoring_and_validation() {
        let fam = RateFamily::new(
            Lattice::unbounded(1).unwrap(),
            vec![(FinitePermutation::from_cycles(vec![vec![s(5), s(6), s(7)]]).unwrap(), 2.0)],
        )
        .unwrap();
        assert_eq!(fam.base()[0].perm.to_string(), "(0 1 2)");
        assert!(matches!(
            RateFamily::new(torus(8), vec![(transposition(0, 1), 0.0)]),
            Err(Error::InvalidRate(_))
        ));
        assert!(matches!(
            RateFamily::new(torus(8), vec![(transposition(0, 1), 1.0), (transposition(3, 4), 2.0)]),
            Err(Error::DuplicatePermutation(_))
        ));
    }

    #[test]
    fn worked_example_constants() {
        let q = 1.5;
        let fam = three_cycles(Lattice::unbounded(1).unwrap(), q).unwrap();
        assert_eq!(fam.m_pl(), 6.0 * q);
        assert_eq!(fam.m_i(), 3);
        assert_eq!(fam.m_ii().unwrap(), 1.0);
        assert!(fam.is_symmetric());
        for (_, (m, z)) in fam.range_stats() {
            assert_eq!(m, q);
            assert_eq!(z, 2.0 * q);
        }
        assert_eq!(fam.z_d(s(4), s(5)), 4.0 * q);
        assert_eq!(fam.z_d(s(4), s(6)), 2.0 * q);
        assert_eq!(fam.z_d(s(4), s(7)), 0.0);
        assert_eq!(fam.z_d(s(4), s(1)), 0.0);
    }

    #[test]
    fn m_pl_is_sum_over_base_and_matches_brute_force() {
        let fam = three_cycles_and_swaps(torus(9), 1.0, 0.25).unwrap();
        assert!((fam.m_pl() - (6.0 + 0.5)).abs() < 1e-12);
        let ex = fam.expand().unwrap();
        let brute = fam
            .lattice()
            .sites()
            .unwrap()
            .into_iter()
            .map(|x| ex.iter().filter(|e| e.perm.displaces(x)).map(|e| e.rate).sum::<f64>())
            .fold(0.0, f64::max);
        assert!((brute - fam.m_pl()).abs() < 1e-12);
        let single = RateFamily::new(torus(4), vec![(transposition(0, 1), 1.0)]).unwrap();
        assert_eq!(single.m_pl(), 2.0);
    }

    #[test]
    fn m_i_and_m_ii() {
        let t = RateFamily::new(torus(5), vec![(transposition(0, 1), 1.0)]).unwrap();
        assert_eq!(t.m_i(), 2);
        assert_eq!(t.m_ii().unwrap(), 1.0);
        let asym = three_cycles_with_rates(torus(8), 1.0, 3.0).unwrap();
        assert_eq!(asym.m_ii().unwrap(), 3.0);
        let single = single_three_cycle(torus(8), 1.0).unwrap();
        assert!(matches!(single.m_ii(), Err(Error::NotRangeClosed(_))));
    }

    #[test]
    fn symmetry() {
        assert!(three_cycles(torus(8), 1.0).unwrap().is_symmetric());
        assert!(!single_three_cycle(torus(8), 1.0).unwrap().is_symmetric());
        assert!(!three_cycles_with_rates(torus(8), 1.0, 3.0).unwrap().is_symmetric());
        let t = RateFamily::new(
            torus(9),
            vec![(transposition(0, 1), 1.0), (transposition(0, 3), 0.2)],
        )
        .unwrap();
        assert!(t.is_symmetric());
    }

    #[test]
    fn closure() {
        let fam = three_cycles(torus(8), 1.0).unwrap();
        assert!(fam.range_closure(ClosureMode::Strict).passed);
        assert!(fam.range_closure(ClosureMode::Relaxed).passed);
        let mixed = three_cycles_and_swaps(torus(8), 1.0, 1.0).unwrap();
        assert!(mixed.range_closure(ClosureMode::Strict).passed);
        let single = single_three_cycle(torus(8), 1.0).unwrap();
        let strict = single.range_closure(ClosureMode::Strict);
        assert!(!strict.passed);
        assert_eq!(strict.missing, vec!["(0 2 1)".to_string()]);
        let relaxed = single.range_closure(ClosureMode::Relaxed);
        assert!(!relaxed.passed);
        // (0 1 2) sends 1,1,0 to 0,1,1; the reverse direction needs (0 2 1).
        assert!(relaxed.failing_pairs.iter().any(|(_, a, b)| (*a, *b) == (0b110, 0b011)));
        assert!(!relaxed.failing_pairs.iter().any(|(_, a, b)| (*a, *b) == (0b011, 0b110)));
    }

    #[test]
    fn irreducibility() {
        assert!(three_cycles(torus(6), 1.0).unwrap().is_irreducible());
        let even = RateFamily::new(torus(6), vec![(transposition(0, 2), 1.0)]).unwrap();
        assert!(!even.is_irreducible());
        assert!(!RateFamily::new(torus(6), vec![]).unwrap().is_irreducible());
        let z = Lattice::unbounded(1).unwrap();
        assert!(three_cycles(z.clone(), 1.0).unwrap().is_irreducible());
        let even_z = RateFamily::new(z, vec![(transposition(0, 2), 1.0)]).unwrap();
        assert!(!even_z.is_irreducible());
        let z3 = nearest_neighbor_transpositions(Lattice::unbounded(3).unwrap(), 1.0).unwrap();
        assert!(z3.is_irreducible());
        let diag = RateFamily::new(
            Lattice::unbounded(2).unwrap(),
            vec![(
                FinitePermutation::from_cycles(vec![vec![Site::new(&[0, 0]), Site::new(&[1, 1])]])
                    .unwrap(),
                1.0,
            )],
        )
        .unwrap();
        assert!(!diag.is_irreducible());
    }

    /// Oracle: BFS over the expanded site graph.
    #[test]
    fn torus_irreducibility_matches_bfs() {
        for (fam, expected) in [
            (three_cycles(torus(6), 1.0).unwrap(), true),
            (RateFamily::new(torus(6), vec![(transposition(0, 2), 1.0)]).unwrap(), false),
            (RateFamily::new(torus(7), vec![(transposition(0, 2), 1.0)]).unwrap(), true),
        ] {
            let ex = fam.expand().unwrap();
            let n = fam.lattice().num_sites().unwrap();
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                let x = fam.lattice().site_at(i);
                for e in &ex {
                    let j = fam.lattice().index_of(e.perm.image(x));
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            assert_eq!(seen.iter().all(|&b| b), expected);
            assert_eq!(fam.is_irreducible(), expected);
        }
    }

    #[test]
    fn range_stats_and_success_bound() {
        let asym = three_cycles_with_rates(torus(8), 1.0, 3.0).unwrap();
        let stats = asym.range_stats();
        assert_eq!(stats.len(), 8);
        for (m, z) in stats.values() {
            assert_eq!((*m, *z), (1.0, 4.0));
        }
        let t = RateFamily::new(torus(5), vec![(transposition(0, 1), 1.0)]).unwrap();
        for (_, (m, z)) in t.range_stats() {
            assert_eq!((m, z), (1.0, 1.0));
        }
        for fam in [asym, three_cycles(torus(8), 2.0).unwrap(), t] {
            assert_eq!(fam.report().success_bound_consistent, Some(true));
        }
    }

    #[test]
    fn z_d_is_bounded_by_m_pl() {
        let fam = three_cycles_and_swaps(torus(10), 1.0, 0.7).unwrap();
        let sites = fam.lattice().sites().unwrap();
        for &u in &sites {
            for &v in &sites {
                if u != v {
                    assert!(fam.z_d(u, v) <= fam.m_pl() + 1e-12);
                }
            }
        }
        assert!((fam.z_d(s(0), s(1)) - (4.0 + 0.7)).abs() < 1e-12);
        assert!((fam.z_d(s(9), s(0)) - (4.0 + 0.7)).abs() < 1e-12);
    }

    #[test]
    fn validation_invariant_under_reanchoring_and_enlargement() {
        let shifted = RateFamily::new(
            torus(8),
            vec![
                (FinitePermutation::from_cycles(vec![vec![s(3), s(4), s(5)]]).unwrap(), 1.0),
                (FinitePermutation::from_cycles(vec![vec![s(-2), s(0), s(-1)]]).unwrap(), 1.0),
            ],
        )
        .unwrap();
        let reference = three_cycles(torus(8), 1.0).unwrap();
        assert_eq!(shifted.report(), reference.report());
        assert_eq!(shifted.hash(), reference.hash());
        let bigger = reference.with_lattice(torus(13)).unwrap();
        assert_eq!(bigger.report(), reference.report());
    }

    #[test]
    fn family_file_round_trip() {
        let json = r#"{"dimension": 1, "lattice": {"torus": [6]},
            "permutations": [{"cycles": [[[0],[1],[2]]], "rate": 1.0},
                             {"cycles": [[[0],[2],[1]]], "rate": 1.0}]}"#;
        let fam = FamilySpec::from_json(json).unwrap().build().unwrap();
        assert_eq!(fam, three_cycles(torus(6), 1.0).unwrap());
        let back = fam.to_spec().build().unwrap();
        assert_eq!(back, fam);
        let unbounded = r#"{"dimension": 1, "lattice": "unbounded",
            "permutations": [{"cycles": [[[0],[1]]], "rate": 2.0}]}"#;
        assert!(!FamilySpec::from_json(unbounded).unwrap().build().unwrap().lattice().is_torus());
        let empty = r#"{"dimension": 1, "lattice": {"torus": [6]}, "permutations": []}"#;
        assert!(matches!(
            FamilySpec::from_json(empty).unwrap().build(),
            Err(Error::InvalidFamily(_))
        ));
        let small = r#"{"dimension": 1, "lattice": {"torus": [4]},
            "permutations": [{"cycles": [[[0],[1],[2]]], "rate": 1.0}]}"#;
        assert!(matches!(
            FamilySpec::from_json(small).unwrap().build(),
            Err(Error::TorusTooSmall { .. })
        ));
    }

    #[test]
    fn covering_lists_every_translate_once() {
        let fam = three_cycles(Lattice::unbounded(1).unwrap(), 1.0).unwrap();
        let cov: Vec<_> = fam.covering(s(0)).collect();
        assert_eq!(cov.len(), 6);
        for &(b, y) in &cov {
            assert!(fam.translate(b, y).displaces(s(0)));
        }
        let mut dedup = cov.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 6);
    }

    #[test]
    fn translate_queries_match_built_translates() {
        for fam in [
            three_cycles(torus(7), 1.0).unwrap(),
            three_cycles(Lattice::unbounded(1).unwrap(), 1.0).unwrap(),
            nearest_neighbor_transpositions(Lattice::torus(&[3, 4]).unwrap(), 1.0).unwrap(),
        ] {
            let d = fam.dim();
            let pts: Vec<Site> = match fam.lattice().sites() {
                Ok(s) => s,
                Err(_) => (-5..5).map(|x| Site::new(&vec![x; d])).collect(),
            };
            for b in 0..fam.base().len() {
                for &shift in &pts {
                    let p = fam.translate(b, shift);
                    for &y in &pts {
                        assert_eq!(fam.translate_image(b, shift, y), p.image(y));
                        assert_eq!(fam.translate_displaces(b, shift, y), p.displaces(y));
                    }
                }
            }
        }
    }

    #[test]
    fn full_lattice_generation() {
        let v = |c: &[i64]| Site::new(c);
        assert!(generates_full_lattice(&[v(&[2]), v(&[3])], 1));
        assert!(!generates_full_lattice(&[v(&[2]), v(&[4])], 1));
        assert!(generates_full_lattice(&[v(&[1, 0]), v(&[0, 1])], 2));
        assert!(!generates_full_lattice(&[v(&[1, 1]), v(&[1, -1])], 2));
        assert!(generates_full_lattice(&[v(&[1, 1]), v(&[1, -1]), v(&[1, 0])], 2));
        assert!(!generates_full_lattice(&[v(&[1, 0, 0]), v(&[0, 1, 0])], 3));
    }
}
