//! Exact finite-state computations on small tori.
//!
//! States are configuration codes: bit `i` is the occupancy of the `i`-th
//! site in canonical order. The generator is stored sparsely by row.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::permutation::FinitePermutation;
use crate::process::{Configuration, DualState};
use crate::rates::RateFamily;

/// Largest torus for which a generator is built.
pub const MAX_SITES: usize = 16;
/// Largest torus for which [`GeneratorMatrix::to_dense`] is allowed.
pub const MAX_DENSE_SITES: usize = 12;
/// Largest sector solved densely.
pub const MAX_SECTOR_STATES: usize = 5000;

/// Relative Poisson tail left out by uniformization.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;

/// Site-index action of one permutation: `(from, to)` pairs.
#[derive(Clone, Debug, PartialEq)]
struct IndexAction {
    pairs: Vec<(u32, u32)>,
    mask: u64,
}

impl IndexAction {
    fn new(lattice: &Lattice, perm: &FinitePermutation) -> Self {
        let mut pairs = Vec::new();
        let mut mask = 0;
        for c in perm.cycles() {
            for (i, &x) in c.iter().enumerate() {
                let from = lattice.index_of(x) as u32;
                let to = lattice.index_of(c[(i + 1) % c.len()]) as u32;
                pairs.push((from, to));
                mask |= 1 << from;
            }
        }
        IndexAction { pairs, mask }
    }

    fn apply(&self, code: u64) -> u64 {
        let mut out = code & !self.mask;
        for &(from, to) in &self.pairs {
            out |= (code >> from & 1) << to;
        }
        out
    }

    fn apply_set(&self, set: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = set
            .iter()
            .map(|&x| {
                self.pairs
                    .iter()
                    .find(|&&(f, _)| f == x)
                    .map_or(x, |&(_, t)| t)
            })
            .collect();
        out.sort_unstable();
        out
    }
}

fn actions(lattice: &Lattice, perms: &[(FinitePermutation, f64)]) -> Vec<(IndexAction, f64)> {
    perms
        .iter()
        .map(|(p, q)| (IndexAction::new(lattice, p), *q))
        .collect()
}

fn check_size(lattice: &Lattice) -> Result<usize> {
    let n = lattice.num_sites().ok_or(Error::UnboundedLattice)?;
    if n > MAX_SITES {
        return Err(Error::TooLarge {
            sites: n,
            limit: MAX_SITES,
        });
    }
    Ok(n)
}

/// Generator `Q` on `{0,1}^N`, one sparse row per configuration code.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix {
    n_sites: usize,
    /// Off-diagonal entries `(column, rate)`, sorted by column.
    rows: Vec<Vec<(u64, f64)>>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    /// Generator of an explicit list of permutations with rates on a torus.
    pub fn from_permutations(lattice: &Lattice, perms: &[(FinitePermutation, f64)]) -> Result<Self> {
        let n = check_size(lattice)?;
        for (p, q) in perms {
            if !(q.is_finite() && *q >= 0.0) {
                return Err(Error::InvalidRate(*q));
            }
            for x in p.range() {
                lattice.check_site(x)?;
            }
        }
        let acts = actions(lattice, perms);
        let size = 1usize << n;
        let mut rows = Vec::with_capacity(size);
        let mut diag = Vec::with_capacity(size);
        for code in 0..size as u64 {
            let mut row: Vec<(u64, f64)> = Vec::new();
            for (act, q) in &acts {
                let to = act.apply(code);
                if to != code && *q > 0.0 {
                    row.push((to, *q));
                }
            }
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(u64, f64)> = Vec::with_capacity(row.len());
            for (c, q) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += q,
                    _ => merged.push((c, q)),
                }
            }
            diag.push(-merged.iter().map(|e| e.1).sum::<f64>());
            rows.push(merged);
        }
        Ok(GeneratorMatrix {
            n_sites: n,
            rows,
            diag,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of states, `2^N`.
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, code: u64) -> &[(u64, f64)] {
        &self.rows[code as usize]
    }

    pub fn diagonal(&self, code: u64) -> f64 {
        self.diag[code as usize]
    }

    pub fn entry(&self, from: u64, to: u64) -> f64 {
        if from == to {
            return self.diagonal(from);
        }
        self.row(from)
            .binary_search_by_key(&to, |e| e.0)
            .map_or(0.0, |i| self.row(from)[i].1)
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n_sites > MAX_DENSE_SITES {
            return Err(Error::TooLarge {
                sites: self.n_sites,
                limit: MAX_DENSE_SITES,
            });
        }
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            m[(i, i)] = self.diag[i];
            for &(j, q) in row {
                m[(i, j as usize)] = q;
            }
        }
        Ok(m)
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, d)| (r.iter().map(|e| e.1).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }

    /// Every transition preserves the particle count.
    pub fn is_sector_block_diagonal(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| {
            r.iter()
                .all(|&(j, _)| j.count_ones() == (i as u64).count_ones())
        })
    }

    /// Row vector product `νQ`.
    pub fn left_mul(&self, nu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = nu.iter().zip(&self.diag).map(|(v, d)| v * d).collect();
        for (i, row) in self.rows.iter().enumerate() {
            if nu[i] != 0.0 {
                for &(j, q) in row {
                    out[j as usize] += nu[i] * q;
                }
            }
        }
        out
    }

    /// Column vector product `Qf`.
    pub fn right_mul(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| self.diag[i] * f[i] + row.iter().map(|&(j, q)| q * f[j as usize]).sum::<f64>())
            .collect()
    }

    /// Uniformization rate `Λ = max |Q_ii|`.
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }

    /// `e^{tQ} f` by uniformization.
    pub fn expm_apply(&self, f: &[f64], t: f64, extra_terms: usize) -> Vec<f64> {
        let lambda = self.max_exit_rate();
        uniformize(f, lambda, t, extra_terms, |v| {
            let qv = self.right_mul(v);
            v.iter().zip(qv).map(|(a, b)| a + b / lambda).collect()
        })
    }
}

/// Poisson-weighted sum `Σ_k Pois(Λt; k) P^k v` with `P` given by `step`,
/// truncated once the remaining mass is below the tail tolerance, plus
/// `extra_terms` more terms.
fn uniformize(v: &[f64], lambda: f64, t: f64, extra_terms: usize, step: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    if t == 0.0 || lambda == 0.0 {
        return v.to_vec();
    }
    let mean = lambda * t;
    let mut log_w = -mean;
    let mut cum = 0.0;
    let mut out = vec![0.0; v.len()];
    let mut cur = v.to_vec();
    let mut k = 0usize;
    let mut extra = None;
    loop {
        let w = log_w.exp();
        cum += w;
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += w * c;
        }
        if extra.is_none() && k as f64 > mean && 1.0 - cum < UNIFORMIZATION_TAIL {
            extra = Some(extra_terms);
        }
        match extra {
            Some(0) => break,
            Some(ref mut e) => *e -= 1,
            None => {}
        }
        k += 1;
        log_w += mean.ln() - (k as f64).ln();
        cur = step(&cur);
    }
    out
}

pub fn build_generator(fam: &RateFamily) -> Result<GeneratorMatrix> {
    check_size(fam.lattice())?;
    let perms: Vec<(FinitePermutation, f64)> = fam
        .expand()?
        .into_iter()
        .map(|e| (e.perm, e.rate))
        .collect();
    GeneratorMatrix::from_permutations(fam.lattice(), &perms)
}

/// Product Bernoulli(ρ) law over configuration codes.
pub fn product_measure(n_sites: usize, rho: f64) -> Vec<f64> {
    (0..1u64 << n_sites)
        .map(|c| {
            let k = c.count_ones() as i32;
            rho.powi(k) * (1.0 - rho).powi(n_sites as i32 - k)
        })
        .collect()
}

/// Uniform law on configurations with `n` particles.
pub fn uniform_on_sector(n_sites: usize, n: usize) -> Vec<f64> {
    let states = sector_states(n_sites, n);
    let mut nu = vec![0.0; 1 << n_sites];
    for &c in &states {
        nu[c as usize] = 1.0 / states.len() as f64;
    }
    nu
}

pub fn sector_states(n_sites: usize, n: usize) -> Vec<u64> {
    (0..1u64 << n_sites)
        .filter(|c| c.count_ones() as usize == n)
        .collect()
}

/// `‖νQ‖∞`.
pub fn stationarity_residual(nu: &[f64], q: &GeneratorMatrix) -> Result<f64> {
    if nu.len() != q.size() {
        return Err(Error::Precondition(format!(
            "distribution has {} entries, generator has {} states",
            nu.len(),
            q.size()
        )));
    }
    let total: f64 = nu.iter().sum();
    if nu.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition("not a probability vector".into()));
    }
    Ok(q.left_mul(nu).iter().map(|x| x.abs()).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorDistribution {
    pub n: usize,
    pub states: Vec<u64>,
    pub probabilities: Vec<f64>,
}

fn sector_connected(q: &GeneratorMatrix, states: &[u64], index: &HashMap<u64, usize>) -> bool {
    let m = states.len();
    let mut adj = vec![Vec::new(); m];
    let mut radj = vec![Vec::new(); m];
    for (i, &c) in states.iter().enumerate() {
        for &(j, r) in q.row(c) {
            if r > 0.0 {
                let j = index[&j];
                adj[i].push(j);
                radj[j].push(i);
            }
        }
    }
    let reach = |g: &Vec<Vec<usize>>| {
        let mut seen = vec![false; m];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &g[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == m
    };
    reach(&adj) && reach(&radj)
}

/// Unique stationary law of the `n`-particle sector.
pub fn sector_stationary(q: &GeneratorMatrix, n: usize) -> Result<SectorDistribution> {
    if n > q.n_sites() {
        return Err(Error::Precondition(format!("{n} particles on {} sites", q.n_sites())));
    }
    let states = sector_states(q.n_sites(), n);
    let m = states.len();
    if m > MAX_SECTOR_STATES {
        return Err(Error::TooLarge {
            sites: m,
            limit: MAX_SECTOR_STATES,
        });
    }
    if m == 1 {
        return Ok(SectorDistribution {
            n,
            states,
            probabilities: vec![1.0],
        });
    }
    let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    if !sector_connected(q, &states, &index) {
        return Err(Error::SectorReducible(n));
    }
    // Transposed sector generator: column i holds row i of Q.
    let mut qt = DMatrix::<f64>::zeros(m, m);
    for (i, &c) in states.iter().enumerate() {
        qt[(i, i)] = q.diagonal(c);
        for &(j, r) in q.row(c) {
            qt[(index[&j], i)] += r;
        }
    }
    let sv = qt.clone().singular_values();
    let smax = sv.max();
    let nullity = sv.iter().filter(|&&s| s <= 1e-10 * smax.max(1.0)).count();
    if nullity != 1 {
        return Err(Error::PropertyViolation(format!(
            "sector {n} generator has nullity {nullity}"
        )));
    }
    let mut a = qt;
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::zeros(m);
    rhs[m - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::PropertyViolation("singular normalized sector system".into()))?;
    Ok(SectorDistribution {
        n,
        states,
        probabilities: pi.iter().copied().collect(),
    })
}

/// Generator of the set process on `k`-subsets, stored by row.
struct DualChain {
    states: Vec<Vec<u32>>,
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl DualChain {
    fn new(lattice: &Lattice, perms: &[(FinitePermutation, f64)], k: usize) -> Result<Self> {
        let n = check_size(lattice)? as u32;
        let acts = actions(lattice, perms);
        let mut states: Vec<Vec<u32>> = Vec::new();
        let mut cur: Vec<u32> = (0..k as u32).collect();
        if k as u32 <= n {
            loop {
                states.push(cur.clone());
                // Next k-combination in lexicographic order.
                let mut i = k;
                while i > 0 && cur[i - 1] == n - (k - i) as u32 - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                cur[i - 1] += 1;
                for j in i..k {
                    cur[j] = cur[j - 1] + 1;
                }
            }
        }
        let index: HashMap<Vec<u32>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut rows = Vec::with_capacity(states.len());
        let mut diag = Vec::with_capacity(states.len());
        for s in &states {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (act, q) in &acts {
                let to = act.apply_set(s);
                if &to != s && *q > 0.0 {
                    let j = index[&to];
                    match row.iter_mut().find(|e| e.0 == j) {
                        Some(e) => e.1 += q,
                        None => row.push((j, *q)),
                    }
                }
            }
            diag.push(-row.iter().map(|e| e.1).sum::<f64>());
            rows.push(row);
        }
        Ok(DualChain { states, rows, diag })
    }

    fn index_of(&self, set: &[u32]) -> Option<usize> {
        self.states.binary_search_by(|s| s.as_slice().cmp(set)).ok()
    }

    /// Law of `A_t` started from the state `start`.
    fn distribution(&self, start: usize, t: f64, extra_terms: usize) -> Vec<f64> {
        let lambda = self.diag.iter().map(|d| d.abs()).fold(0.0, f64::max);
        let mut p0 = vec![0.0; self.states.len()];
        p0[start] = 1.0;
        uniformize(&p0, lambda, t, extra_terms, |p| {
            let mut out: Vec<f64> = p
                .iter()
                .zip(&self.diag)
                .map(|(v, d)| v * (1.0 + d / lambda))
                .collect();
            for (i, row) in self.rows.iter().enumerate() {
                if p[i] != 0.0 {
                    for &(j, q) in row {
                        out[j] += p[i] * q / lambda;
                    }
                }
            }
            out
        })
    }
}

fn expanded(fam: &RateFamily) -> Result<Vec<(FinitePermutation, f64)>> {
    Ok(fam.expand()?.into_iter().map(|e| (e.perm, e.rate)).collect())
}

fn indicator_on(n_sites: usize, set_mask: u64) -> Vec<f64> {
    (0..1u64 << n_sites)
        .map(|c| (c & set_mask == set_mask) as u8 as f64)
        .collect()
}

fn set_indices(lattice: &Lattice, a: &DualState) -> Result<Vec<u32>> {
    let mut idx = Vec::with_capacity(a.len());
    for &x in &a.sites {
        lattice.check_site(x)?;
        if lattice.wrap(x) != x {
            return Err(Error::BadInitial(format!("site {x} is not a wrapped torus site")));
        }
        idx.push(lattice.index_of(x) as u32);
    }
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactDuality {
    pub lhs: f64,
    pub rhs: f64,
}

/// Both sides of the self-duality identity, computed independently.
pub fn duality_exact(fam: &RateFamily, eta0: &Configuration, a: &DualState, t: f64) -> Result<ExactDuality> {
    duality_exact_with(fam, eta0, a, t, 0)
}

pub fn duality_exact_with(
    fam: &RateFamily,
    eta0: &Configuration,
    a: &DualState,
    t: f64,
    extra_terms: usize,
) -> Result<ExactDuality> {
    if !fam.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    duality_unchecked(fam, eta0, a, t, extra_terms)
}

fn duality_unchecked(
    fam: &RateFamily,
    eta0: &Configuration,
    a: &DualState,
    t: f64,
    extra_terms: usize,
) -> Result<ExactDuality> {
    let lat = fam.lattice();
    let n = check_size(lat)?;
    if eta0.lattice() != lat {
        return Err(Error::BadInitial("configuration lives on another lattice".into()));
    }
    let code = eta0.code()?;
    let idx = set_indices(lat, a)?;
    let mask = idx.iter().fold(0u64, |m, &i| m | 1 << i);

    let q = build_generator(fam)?;
    let lhs = q.expm_apply(&indicator_on(n, mask), t, extra_terms)[code as usize];

    let dual = DualChain::new(lat, &expanded(fam)?, idx.len())?;
    let start = dual.index_of(&idx).expect("subset enumerated");
    let p = dual.distribution(start, t, extra_terms);
    let rhs = dual
        .states
        .iter()
        .zip(&p)
        .filter(|(s, _)| s.iter().all(|&i| code >> i & 1 == 1))
        .map(|(_, w)| w)
        .sum();
    Ok(ExactDuality { lhs, rhs })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualityWitness {
    pub eta0: u64,
    pub a: Vec<String>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FalsifierReport {
    pub t: f64,
    pub instances: u64,
    pub max_difference: f64,
    pub witness: Option<DualityWitness>,
}

/// Searches every `(η₀, A)` with `|A| ∈ set_sizes` for a violation of the
/// duality identity larger than `1e-6`. Symmetry is deliberately not
/// required.
pub fn asymmetric_duality_falsifier(fam: &RateFamily, t: f64, set_sizes: &[usize]) -> Result<FalsifierReport> {
    let lat = fam.lattice();
    let n = check_size(lat)?;
    let q = build_generator(fam)?;
    let perms = expanded(fam)?;
    let mut report = FalsifierReport {
        t,
        instances: 0,
        max_difference: 0.0,
        witness: None,
    };
    let sites = lat.sites()?;
    for &k in set_sizes {
        if k > n {
            continue;
        }
        let dual = DualChain::new(lat, &perms, k)?;
        for (ai, a) in dual.states.iter().enumerate() {
            let mask = a.iter().fold(0u64, |m, &i| m | 1 << i);
            let lhs = q.expm_apply(&indicator_on(n, mask), t, 0);
            let p = dual.distribution(ai, t, 0);
            for code in 0..1u64 << n {
                let rhs: f64 = dual
                    .states
                    .iter()
                    .zip(&p)
                    .filter(|(s, _)| s.iter().all(|&i| code >> i & 1 == 1))
                    .map(|(_, w)| w)
                    .sum();
                let diff = (lhs[code as usize] - rhs).abs();
                report.instances += 1;
                if diff > report.max_difference {
                    report.max_difference = diff;
                }
                if diff > 1e-6 && report.witness.is_none() {
                    report.witness = Some(DualityWitness {
                        eta0: code,
                        a: a.iter().map(|&i| sites[i as usize].to_string()).collect(),
                        lhs: lhs[code as usize],
                        rhs,
                    });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;
    use crate::rates::presets::*;

    fn s(x: i64) -> Site {
        Site::new(&[x])
    }

    fn torus(l: i64) -> Lattice {
        Lattice::torus(&[l]).unwrap()
    }

    #[test]
    fn single_transposition_on_two_sites() {
        let lat = torus(2);
        let t: FinitePermutation = "(0 1)".parse().unwrap();
        let q = GeneratorMatrix::from_permutations(&lat, &[(t, 1.0)]).unwrap();
        let dense = q.to_dense().unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 1.0, 0.0,
            0.0, 1.0, -1.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        assert_eq!(dense, expected);
    }

    #[test]
    fn empty_family_gives_zero_matrix() {
        let q = GeneratorMatrix::from_permutations(&torus(4), &[]).unwrap();
        assert!(q.to_dense().unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn structure_of_three_cycle_generator() {
        let fam = three_cycles(torus(6), 1.0).unwrap();
        let q = build_generator(&fam).unwrap();
        assert!(q.max_row_sum() <= 1e-12);
        assert!(q.is_sector_block_diagonal());
        assert!(q.rows.iter().flatten().all(|e| e.1 > 0.0));
        // One particle at 0: moves to 1 (two translates) and to 4 (one translate)
        // under (0 1 2); to 5 (two) and to 2 (one) under (0 2 1).
        assert_eq!(q.entry(0b1, 0b10), 2.0);
        assert_eq!(q.entry(0b1, 0b10000), 1.0);
        assert_eq!(q.entry(0b1, 0b100000), 2.0);
        assert_eq!(q.entry(0b1, 0b100), 1.0);
    }

    /// Oracle: dense generator assembled directly from Configuration::apply.
    #[test]
    fn sparse_generator_matches_configuration_oracle() {
        let fam = three_cycles_with_rates(torus(7), 1.0, 2.5).unwrap();
        let q = build_generator(&fam).unwrap();
        let ex = fam.expand().unwrap();
        let n = 1u64 << 7;
        let mut dense = DMatrix::<f64>::zeros(n as usize, n as usize);
        for code in 0..n {
            let eta = Configuration::from_code(fam.lattice(), code).unwrap();
            for e in &ex {
                let mut to = eta.clone();
                to.apply(&e.perm);
                let j = to.code().unwrap();
                if j != code {
                    dense[(code as usize, j as usize)] += e.rate;
                    dense[(code as usize, code as usize)] -= e.rate;
                }
            }
        }
        assert!((q.to_dense().unwrap() - dense).abs().max() < 1e-12);
    }

    #[test]
    fn product_and_sector_measures_are_stationary() {
        for fam in [
            three_cycles(torus(8), 1.0).unwrap(),
            three_cycles_with_rates(torus(8), 1.0, 3.0).unwrap(),
            single_three_cycle(torus(8), 1.0).unwrap(),
        ] {
            let q = build_generator(&fam).unwrap();
            for rho in [0.0, 0.3, 0.5, 1.0] {
                let r = stationarity_residual(&product_measure(8, rho), &q).unwrap();
                assert!(r <= 1e-12, "rho {rho}: {r}");
            }
            for n in 0..=8 {
                assert!(stationarity_residual(&uniform_on_sector(8, n), &q).unwrap() <= 1e-12);
            }
            let mut point = vec![0.0; 256];
            point[0b1011] = 1.0;
            assert!(stationarity_residual(&point, &q).unwrap() > 0.0);
        }
    }

    #[test]
    fn sector_stationary_is_uniform() {
        for fam in [
            three_cycles(torus(6), 1.0).unwrap(),
            three_cycles_with_rates(torus(6), 1.0, 3.0).unwrap(),
        ] {
            let q = build_generator(&fam).unwrap();
            let pi = sector_stationary(&q, 2).unwrap();
            assert_eq!(pi.states.len(), 15);
            assert!(pi.probabilities.iter().all(|p| (p - 1.0 / 15.0).abs() <= 1e-10));
            for n in [0, 6] {
                assert_eq!(sector_stationary(&q, n).unwrap().probabilities, vec![1.0]);
            }
        }
        let even = RateFamily::new(
            torus(6),
            vec![("(0 2)".parse().unwrap(), 1.0)],
        )
        .unwrap();
        let q = build_generator(&even).unwrap();
        assert!(matches!(sector_stationary(&q, 1), Err(Error::SectorReducible(1))));
    }

    #[test]
    fn duality_trivial_cases() {
        let fam = three_cycles(torus(8), 1.0).unwrap();
        let eta = Configuration::from_sites(fam.lattice(), &[s(0), s(1), s(5)]).unwrap();
        let a = DualState::new([s(0), s(1)]);
        let d = duality_exact(&fam, &eta, &a, 0.0).unwrap();
        assert_eq!((d.lhs, d.rhs), (1.0, 1.0));
        let b = DualState::new([s(0), s(2)]);
        let d = duality_exact(&fam, &eta, &b, 0.0).unwrap();
        assert_eq!((d.lhs, d.rhs), (0.0, 0.0));
        let d = duality_exact(&fam, &eta, &DualState::default(), 3.0).unwrap();
        assert!((d.lhs - 1.0).abs() < 1e-12 && (d.rhs - 1.0).abs() < 1e-12);
        let asym = single_three_cycle(torus(8), 1.0).unwrap();
        assert!(matches!(
            duality_exact(&asym, &eta, &a, 1.0),
            Err(Error::NotSymmetric)
        ));
    }

    #[test]
    fn duality_holds_and_truncation_is_converged() {
        let fam = three_cycles(torus(8), 1.0).unwrap();
        let eta = Configuration::from_sites(fam.lattice(), &[s(0), s(3), s(4)]).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let a = DualState::new([s(3), s(5)]);
            let d = duality_exact(&fam, &eta, &a, t).unwrap();
            assert!((d.lhs - d.rhs).abs() <= 1e-9, "t={t}: {d:?}");
            let more = duality_exact_with(&fam, &eta, &a, t, 5).unwrap();
            assert!((more.lhs - d.lhs).abs() < 1e-10);
            assert!((more.rhs - d.rhs).abs() < 1e-10);
        }
    }

    /// Oracle: dense eigen-free exponential by scaling and squaring of a
    /// Taylor series on the full state space.
    #[test]
    fn uniformization_matches_dense_exponential() {
        let fam = three_cycles_with_rates(torus(5), 1.0, 1.0).unwrap();
        let q = build_generator(&fam).unwrap();
        let dense = q.to_dense().unwrap();
        let t = 0.7;
        let k = 10;
        let a = &dense * (t / f64::from(1 << k));
        let mut term = DMatrix::<f64>::identity(32, 32);
        let mut e = term.clone();
        for i in 1..20 {
            term = &term * &a / i as f64;
            e += &term;
        }
        for _ in 0..k {
            e = &e * &e;
        }
        let f: Vec<f64> = (0..32).map(|c| (c as f64).sin()).collect();
        let got = q.expm_apply(&f, t, 0);
        let want = &e * nalgebra::DVector::from_vec(f);
        for i in 0..32 {
            assert!((got[i] - want[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn falsifier() {
        let sym = three_cycles(torus(6), 1.0).unwrap();
        let rep = asymmetric_duality_falsifier(&sym, 1.0, &[1, 2]).unwrap();
        assert!(rep.witness.is_none());
        assert!(rep.max_difference < 1e-9);
        let asym = single_three_cycle(torus(6), 1.0).unwrap();
        assert!(asymmetric_duality_falsifier(&asym, 0.0, &[2]).unwrap().witness.is_none());
        let rep = asymmetric_duality_falsifier(&asym, 1.0, &[2]).unwrap();
        assert!(rep.witness.is_some());
    }

    #[test]
    fn size_limits() {
        let fam = three_cycles(torus(17), 1.0).unwrap();
        assert!(matches!(build_generator(&fam), Err(Error::TooLarge { .. })));
        let fam = three_cycles(torus(13), 1.0).unwrap();
        assert!(matches!(build_generator(&fam).unwrap().to_dense(), Err(Error::TooLarge { .. })));
    }
}
