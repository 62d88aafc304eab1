//! Per-range coupled rate tables.

use rand_distr::weighted::WeightedAliasIndex;

use super::TransitionKind;
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::permutation::{cyclic_index_maps, select_cover, CoverRule, RangeSet, SelectionPolicy, Word};
use crate::rates::RateFamily;

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub base: usize,
    /// Index map on the anchored range.
    pub map: Vec<usize>,
    pub rate: f64,
}

/// Members of one range class, with the cyclic candidates of its range.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassTable {
    pub range: RangeSet,
    pub members: Vec<Member>,
    pub min_rate: f64,
    pub total_rate: f64,
    cyclic: Vec<Vec<usize>>,
}

impl ClassTable {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn rate_of(&self, map: &[usize]) -> Option<f64> {
        self.members.iter().find(|m| m.map == map).map(|m| m.rate)
    }

    pub fn member_of(&self, map: &[usize]) -> Option<&Member> {
        self.members.iter().find(|m| m.map == map)
    }

    fn require(&self, map: &[usize]) -> Result<f64> {
        self.rate_of(map).ok_or_else(|| {
            Error::NotRangeClosed(format!(
                "{} is needed by the coupling but has no rate",
                crate::permutation::FinitePermutation::from_index_map(&self.range, map)
            ))
        })
    }

    /// Cyclic `σ` with `σ(a) = b` (`Exact`) or `σ(a) ≥ b` (`Dominating`).
    pub fn select(&self, a: Word, b: Word, rule: CoverRule, policy: SelectionPolicy) -> Result<&[usize]> {
        select_cover(self.cyclic.iter().map(Vec::as_slice), a, b, rule, policy)
            .map(|k| self.cyclic[k].as_slice())
            .ok_or(Error::NoCover)
    }
}

pub fn identity_map(r: usize) -> Vec<usize> {
    (0..r).collect()
}

/// Powers `σ^0, …, σ^{r-1}` of an index map.
pub fn map_powers(img: &[usize]) -> Vec<Vec<usize>> {
    let r = img.len();
    let mut out = vec![identity_map(r)];
    for k in 1..r {
        let prev = &out[k - 1];
        out.push(prev.iter().map(|&j| img[j]).collect());
    }
    out
}

/// One translate of a range class on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeGroup {
    /// `class * num_sites + index_of(shift)`.
    pub id: usize,
    pub class: usize,
    pub shift: Site,
    /// Translated anchored range sites, in anchored order.
    pub sites: Vec<Site>,
}

/// All translated range groups of a torus family with a static proposal
/// table weighted by `Z(R) + m(R)`, an upper bound on any coupled table's
/// total rate on that range.
pub struct RangeGroups {
    classes: Vec<ClassTable>,
    groups: Vec<RangeGroup>,
    alias: WeightedAliasIndex<f64>,
    bound_rate: f64,
}

impl RangeGroups {
    pub fn new(fam: &RateFamily) -> Result<Self> {
        let lattice = fam.lattice();
        let sites = lattice.sites()?;
        if fam.is_empty() {
            return Err(Error::InvalidFamily("empty family".into()));
        }
        let classes: Vec<ClassTable> = fam
            .classes()
            .iter()
            .map(|c| ClassTable {
                range: c.range.clone(),
                members: c
                    .members
                    .iter()
                    .map(|&b| Member {
                        base: b,
                        map: fam.base()[b].perm.index_map(&c.range).expect("member range"),
                        rate: fam.base()[b].rate,
                    })
                    .collect(),
                min_rate: c.min_rate,
                total_rate: c.total_rate,
                cyclic: cyclic_index_maps(c.range.len()),
            })
            .collect();
        let n = sites.len();
        let mut groups = Vec::with_capacity(classes.len() * n);
        let mut weights = Vec::with_capacity(classes.len() * n);
        for (ci, c) in classes.iter().enumerate() {
            for (si, &y) in sites.iter().enumerate() {
                groups.push(RangeGroup {
                    id: ci * n + si,
                    class: ci,
                    shift: y,
                    sites: c.range.sites().iter().map(|&x| lattice.shift(x, y)).collect(),
                });
                weights.push(c.total_rate + c.min_rate);
            }
        }
        let bound_rate = weights.iter().sum();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::InvalidFamily(format!("range table: {e}")))?;
        Ok(RangeGroups {
            classes,
            groups,
            alias,
            bound_rate,
        })
    }

    pub fn classes(&self) -> &[ClassTable] {
        &self.classes
    }

    pub fn groups(&self) -> &[RangeGroup] {
        &self.groups
    }

    pub fn bound_rate(&self) -> f64 {
        self.bound_rate
    }

    pub fn alias(&self) -> &WeightedAliasIndex<f64> {
        &self.alias
    }

    pub fn bound_of(&self, group: usize) -> f64 {
        let c = &self.classes[self.groups[group].class];
        c.total_rate + c.min_rate
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingKind {
    /// Two-discrepancy coupling for recurrent families.
    Recurrent,
    /// Discrepancy-monotone coupling for arbitrary pairs.
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub a_map: Vec<usize>,
    pub b_map: Vec<usize>,
    pub rate: f64,
    pub kind: TransitionKind,
}

fn diagonal(class: &ClassTable, kind: TransitionKind) -> Vec<Transition> {
    class
        .members
        .iter()
        .map(|m| Transition {
            a_map: m.map.clone(),
            b_map: m.map.clone(),
            rate: m.rate,
            kind,
        })
        .collect()
}

/// Residual diagonal moves: powers of `σ` at `q − m`, other members at `q`.
fn residuals(class: &ClassTable, powers: &[Vec<usize>], out: &mut Vec<Transition>) -> Result<()> {
    let m = class.min_rate;
    for p in &powers[1..] {
        let q = class.require(p)?;
        if q > m {
            out.push(Transition {
                a_map: p.clone(),
                b_map: p.clone(),
                rate: q - m,
                kind: TransitionKind::Diagonal,
            });
        }
    }
    for mem in &class.members {
        if !powers[1..].contains(&mem.map) {
            out.push(Transition {
                a_map: mem.map.clone(),
                b_map: mem.map.clone(),
                rate: mem.rate,
                kind: TransitionKind::Diagonal,
            });
        }
    }
    Ok(())
}

/// The coupled transitions on one range given the words of `A` and `B` on
/// it and the global discrepancy count.
pub fn build_table(
    kind: CouplingKind,
    class: &ClassTable,
    a: Word,
    b: Word,
    global_d: usize,
    policy: SelectionPolicy,
) -> Result<Vec<Transition>> {
    let r = class.len();
    let local_d = (a ^ b).count_ones() as usize;
    let m = class.min_rate;
    match kind {
        CouplingKind::Recurrent if local_d == 2 && global_d == 2 => {
            let sigma = class.select(a, b, CoverRule::Exact, policy)?;
            let p = map_powers(sigma);
            let mut out = Vec::new();
            if r == 2 {
                for i in 0..2 {
                    out.push(Transition {
                        a_map: p[(i + 1) % 2].clone(),
                        b_map: p[i].clone(),
                        rate: m,
                        kind: TransitionKind::Staircase(i),
                    });
                }
            } else {
                for i in 1..=r - 2 {
                    out.push(Transition {
                        a_map: p[i + 1].clone(),
                        b_map: p[i].clone(),
                        rate: m,
                        kind: TransitionKind::Staircase(i),
                    });
                }
                out.push(Transition {
                    a_map: p[1].clone(),
                    b_map: p[r - 1].clone(),
                    rate: m,
                    kind: TransitionKind::Swap,
                });
            }
            residuals(class, &p, &mut out)?;
            Ok(out)
        }
        CouplingKind::General if local_d > 0 => {
            let a_leads = a.count_ones() >= b.count_ones();
            let sigma = if a_leads {
                class.select(a, b, CoverRule::Dominating, policy)?
            } else {
                class.select(b, a, CoverRule::Dominating, policy)?
            };
            let p = map_powers(sigma);
            let mut out = Vec::new();
            for i in 0..r {
                let (hi, lo) = (p[(i + 1) % r].clone(), p[i].clone());
                let (a_map, b_map) = if a_leads { (hi, lo) } else { (lo, hi) };
                out.push(Transition {
                    a_map,
                    b_map,
                    rate: m,
                    kind: TransitionKind::Staircase(i),
                });
            }
            residuals(class, &p, &mut out)?;
            Ok(out)
        }
        _ => Ok(diagonal(class, TransitionKind::OffRange)),
    }
}

/// Per-copy marginal of a table: summed rate by index map must equal the
/// member rate for every member; only the identity may carry extra rate.
pub fn check_marginals(class: &ClassTable, table: &[Transition]) -> Result<()> {
    let id = identity_map(class.len());
    for side in 0..2 {
        let mut sums: Vec<(Vec<usize>, f64)> = Vec::new();
        for t in table {
            let map = if side == 0 { &t.a_map } else { &t.b_map };
            match sums.iter_mut().find(|(m, _)| m == map) {
                Some((_, s)) => *s += t.rate,
                None => sums.push((map.clone(), t.rate)),
            }
        }
        for (map, total) in &sums {
            if *map == id {
                continue;
            }
            let q = class.rate_of(map).ok_or_else(|| {
                Error::PropertyViolation(format!("marginal fires non-member {map:?}"))
            })?;
            if (total - q).abs() > 1e-12 * q.max(1.0) {
                return Err(Error::PropertyViolation(format!(
                    "marginal rate of {map:?} is {total}, family rate is {q}"
                )));
            }
        }
        for mem in &class.members {
            if !sums.iter().any(|(m, _)| *m == mem.map) {
                return Err(Error::PropertyViolation(format!(
                    "member {:?} missing from marginal",
                    mem.map
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::rates::presets::*;

    fn classes(fam: &RateFamily) -> Vec<ClassTable> {
        RangeGroups::new(fam).unwrap().classes().to_vec()
    }

    #[test]
    fn powers_of_a_cycle() {
        let p = map_powers(&[1, 2, 0]);
        assert_eq!(p, vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]]);
    }

    #[test]
    fn recurrent_table_for_three_cycles() {
        let fam = three_cycles(Lattice::torus(&[8]).unwrap(), 1.0).unwrap();
        let c = &classes(&fam)[0];
        // Discrepancies at positions 0 (A only) and 1 (B only).
        let t = build_table(CouplingKind::Recurrent, c, 0b001, 0b010, 2, SelectionPolicy::CanonicalFirst)
            .unwrap();
        let total: f64 = t.iter().map(|x| x.rate).sum();
        assert_eq!(total, 2.0);
        let merging: f64 = t
            .iter()
            .filter(|x| crate::permutation::apply_word(&x.a_map, 0b001) == crate::permutation::apply_word(&x.b_map, 0b010))
            .map(|x| x.rate)
            .sum();
        assert_eq!(merging, 1.0);
        check_marginals(c, &t).unwrap();
    }

    #[test]
    fn transposition_table_always_merges() {
        let fam = nearest_neighbor_transpositions(Lattice::torus(&[6]).unwrap(), 1.0).unwrap();
        let c = &classes(&fam)[0];
        let t = build_table(CouplingKind::Recurrent, c, 0b01, 0b10, 2, SelectionPolicy::CanonicalFirst)
            .unwrap();
        assert!(t.iter().all(|x| crate::permutation::apply_word(&x.a_map, 0b01)
            == crate::permutation::apply_word(&x.b_map, 0b10)));
        check_marginals(c, &t).unwrap();
    }

    #[test]
    fn general_tables_conserve_marginals_exhaustively() {
        for fam in [
            three_cycles(Lattice::torus(&[8]).unwrap(), 1.0).unwrap(),
            three_cycles_with_rates(Lattice::torus(&[8]).unwrap(), 1.0, 3.0).unwrap(),
            three_cycles_and_swaps(Lattice::torus(&[8]).unwrap(), 1.0, 0.5).unwrap(),
        ] {
            for c in classes(&fam) {
                let r = c.len();
                for a in 0..1u32 << r {
                    for b in 0..1u32 << r {
                        for kind in [CouplingKind::General, CouplingKind::Recurrent] {
                            if kind == CouplingKind::Recurrent && a.count_ones() != b.count_ones() {
                                continue;
                            }
                            let t = build_table(kind, &c, a, b, (a ^ b).count_ones() as usize, SelectionPolicy::CanonicalFirst);
                            match t {
                                Ok(t) => check_marginals(&c, &t).unwrap(),
                                Err(e) => panic!("{kind:?} r={r} a={a:b} b={b:b}: {e}"),
                            }
                        }
                    }
                }
            }
        }
    }
}
