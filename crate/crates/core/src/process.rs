//! Continuous-time simulation of the permutation process, of finite-support
//! set processes, and Monte Carlo estimation of both sides of self-duality.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::permutation::{FinitePermutation, Word};
use crate::rates::{ExpandedPermutation, RateFamily};

/// Replica RNG: ChaCha8 keyed by the run seed, one stream per replica.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Occupancy {
    /// Bit `i` is the occupancy of the `i`-th site in canonical order.
    Packed(Vec<u64>),
    Sparse(BTreeSet<Site>),
}

/// Occupancy map η. Bit-packed on a torus, a finite occupied set on ℤ^d.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    lattice: Lattice,
    occ: Occupancy,
}

impl Configuration {
    pub fn empty(lattice: &Lattice) -> Self {
        let occ = match lattice.num_sites() {
            Some(n) => Occupancy::Packed(vec![0; n.div_ceil(64)]),
            None => Occupancy::Sparse(BTreeSet::new()),
        };
        Configuration {
            lattice: lattice.clone(),
            occ,
        }
    }

    /// All sites occupied; torus only.
    pub fn full(lattice: &Lattice) -> Result<Self> {
        let n = lattice.num_sites().ok_or(Error::UnboundedLattice)?;
        let mut c = Self::empty(lattice);
        for i in 0..n {
            c.set_index(i, true);
        }
        Ok(c)
    }

    pub fn from_sites(lattice: &Lattice, sites: &[Site]) -> Result<Self> {
        let mut c = Self::empty(lattice);
        for &x in sites {
            lattice.check_site(x)?;
            c.set(x, true);
        }
        Ok(c)
    }

    /// Configuration whose bit `i` is the occupancy of site `i`; torus with at
    /// most 64 sites.
    pub fn from_code(lattice: &Lattice, code: u64) -> Result<Self> {
        let n = lattice.num_sites().ok_or(Error::UnboundedLattice)?;
        if n > 64 {
            return Err(Error::TooLarge { sites: n, limit: 64 });
        }
        let mut c = Self::empty(lattice);
        if let Occupancy::Packed(w) = &mut c.occ {
            w[0] = code;
        }
        Ok(c)
    }

    pub fn code(&self) -> Result<u64> {
        match &self.occ {
            Occupancy::Packed(w) if w.len() <= 1 => Ok(w.first().copied().unwrap_or(0)),
            Occupancy::Packed(_) => Err(Error::TooLarge {
                sites: self.lattice.num_sites().unwrap_or(0),
                limit: 64,
            }),
            Occupancy::Sparse(_) => Err(Error::UnboundedLattice),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn set_index(&mut self, i: usize, v: bool) {
        if let Occupancy::Packed(w) = &mut self.occ {
            if v {
                w[i / 64] |= 1 << (i % 64);
            } else {
                w[i / 64] &= !(1 << (i % 64));
            }
        }
    }

    pub fn get(&self, x: Site) -> bool {
        match &self.occ {
            Occupancy::Packed(w) => {
                let i = self.lattice.index_of(x);
                w[i / 64] >> (i % 64) & 1 == 1
            }
            Occupancy::Sparse(s) => s.contains(&x),
        }
    }

    pub fn set(&mut self, x: Site, v: bool) {
        match &mut self.occ {
            Occupancy::Packed(_) => {
                let i = self.lattice.index_of(x);
                self.set_index(i, v);
            }
            Occupancy::Sparse(s) => {
                if v {
                    s.insert(x);
                } else {
                    s.remove(&x);
                }
            }
        }
    }

    pub fn count(&self) -> usize {
        match &self.occ {
            Occupancy::Packed(w) => w.iter().map(|b| b.count_ones() as usize).sum(),
            Occupancy::Sparse(s) => s.len(),
        }
    }

    /// Occupied sites in canonical order.
    pub fn occupied_sites(&self) -> Vec<Site> {
        match &self.occ {
            Occupancy::Packed(w) => {
                let mut out = Vec::new();
                for (k, &word) in w.iter().enumerate() {
                    let mut b = word;
                    while b != 0 {
                        let i = k * 64 + b.trailing_zeros() as usize;
                        out.push(self.lattice.site_at(i));
                        b &= b - 1;
                    }
                }
                out
            }
            Occupancy::Sparse(s) => s.iter().copied().collect(),
        }
    }

    /// η ≡ 1 on every listed site.
    pub fn all_occupied(&self, sites: impl IntoIterator<Item = Site>) -> bool {
        sites.into_iter().all(|x| self.get(x))
    }

    /// Occupancy word on the listed sites: bit `i` is the occupancy of `sites[i]`.
    pub fn word_on(&self, sites: &[Site]) -> Word {
        sites
            .iter()
            .enumerate()
            .fold(0, |w, (i, &x)| w | (self.get(x) as Word) << i)
    }

    /// Writes `w` onto the listed sites, bit `i` going to `sites[i]`.
    pub fn set_word_on(&mut self, sites: &[Site], w: Word) {
        for (i, &x) in sites.iter().enumerate() {
            self.set(x, w >> i & 1 == 1);
        }
    }

    /// In-place `η ← σ(η)`, i.e. `η(σ(x)) ← η(x)`.
    pub fn apply(&mut self, sigma: &FinitePermutation) {
        for cycle in sigma.cycles() {
            let last = self.get(cycle[cycle.len() - 1]);
            for i in (1..cycle.len()).rev() {
                let v = self.get(cycle[i - 1]);
                self.set(cycle[i], v);
            }
            self.set(cycle[0], last);
        }
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.occ {
            Occupancy::Packed(_) => {
                let n = self.lattice.num_sites().unwrap();
                let bits: String = (0..n)
                    .map(|i| if self.get(self.lattice.site_at(i)) { '1' } else { '0' })
                    .collect();
                write!(f, "Configuration[{bits}]")
            }
            Occupancy::Sparse(s) => write!(f, "Configuration{s:?}"),
        }
    }
}

/// Finite set A of the dual process.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualState {
    pub sites: BTreeSet<Site>,
}

impl DualState {
    pub fn new(sites: impl IntoIterator<Item = Site>) -> Self {
        DualState {
            sites: sites.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, x: Site) -> bool {
        self.sites.contains(&x)
    }

    /// `A ← σ(A)`.
    pub fn apply(&mut self, sigma: &FinitePermutation) {
        if self.sites.iter().any(|&x| sigma.displaces(x)) {
            self.sites = self.sites.iter().map(|&x| sigma.image(x)).collect();
        }
    }
}

/// One firing of a translated base permutation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    /// `base * num_sites + index_of(shift)` on a torus, `base` on ℤ^d.
    pub perm_id: usize,
    pub base: usize,
    pub shift: Site,
    /// Particle count after the event.
    pub popcount: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub seed: u64,
    pub events: Vec<Event>,
    pub terminal: S,
}

impl<S> Trajectory<S> {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "time,perm_id,shift,popcount")?;
        for e in &self.events {
            writeln!(w, "{:.17e},{},\"{}\",{}", e.time, e.perm_id, e.shift, e.popcount)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over √n.
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 1, "an estimate needs at least one sample");
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    pub fn from_indicators(hits: &[bool]) -> Self {
        let xs: Vec<f64> = hits.iter().map(|&b| b as u8 as f64).collect();
        Self::from_samples(&xs)
    }
}

/// Product Bernoulli(ρ) configuration on a torus.
pub fn sample_product_with<R: Rng>(rho: f64, lattice: &Lattice, rng: &mut R) -> Result<Configuration> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Precondition(format!("density {rho} outside [0, 1]")));
    }
    let n = lattice.num_sites().ok_or(Error::UnboundedLattice)?;
    let mut c = Configuration::empty(lattice);
    for i in 0..n {
        let u: f64 = rng.random();
        if u < rho {
            c.set_index(i, true);
        }
    }
    Ok(c)
}

pub fn sample_product(rho: f64, lattice: &Lattice, seed: u64) -> Result<Configuration> {
    sample_product_with(rho, lattice, &mut rng_for(seed, 0))
}

fn exp_wait<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Gillespie simulator of η_t on a torus with a static alias table over the
/// expanded family.
pub struct ConfigSimulator {
    expanded: Vec<ExpandedPermutation>,
    alias: Option<WeightedAliasIndex<f64>>,
    total_rate: f64,
}

impl ConfigSimulator {
    pub fn new(fam: &RateFamily) -> Result<Self> {
        fam.validate_for_simulation()?;
        let expanded = fam.expand()?;
        let weights: Vec<f64> = expanded.iter().map(|e| e.rate).collect();
        let total_rate = weights.iter().sum();
        let alias = Some(
            WeightedAliasIndex::new(weights)
                .map_err(|e| Error::InvalidFamily(format!("rate table: {e}")))?,
        );
        Ok(ConfigSimulator {
            expanded,
            alias,
            total_rate,
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn expanded(&self) -> &[ExpandedPermutation] {
        &self.expanded
    }

    /// Runs to time `horizon`, reporting each event with the updated state.
    pub fn run<R: Rng>(
        &self,
        eta: &mut Configuration,
        horizon: f64,
        rng: &mut R,
        mut on_event: impl FnMut(&Event, &Configuration),
    ) -> usize {
        let Some(alias) = &self.alias else { return 0 };
        let count = eta.count();
        let mut t = 0.0;
        let mut fired = 0;
        loop {
            t += exp_wait(rng, self.total_rate);
            if t > horizon {
                return fired;
            }
            let e = &self.expanded[alias.sample(rng)];
            eta.apply(&e.perm);
            debug_assert_eq!(eta.count(), count, "particle count must be conserved");
            fired += 1;
            on_event(
                &Event {
                    time: t,
                    perm_id: e.id,
                    base: e.base,
                    shift: e.shift,
                    popcount: count,
                },
                eta,
            );
        }
    }
}

/// Simulates η_t on a torus up to `horizon`.
pub fn run_config(
    eta0: &Configuration,
    fam: &RateFamily,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory<Configuration>> {
    if eta0.lattice() != fam.lattice() {
        return Err(Error::BadInitial("configuration lives on another lattice".into()));
    }
    let sim = ConfigSimulator::new(fam)?;
    let mut eta = eta0.clone();
    let mut events = Vec::new();
    let mut rng = rng_for(seed, 0);
    sim.run(&mut eta, horizon, &mut rng, |e, c| {
        assert_eq!(c.count(), eta0.count(), "particle count changed");
        events.push(*e);
    });
    Ok(Trajectory {
        seed,
        events,
        terminal: eta,
    })
}

/// Translates `(base, shift)` covering at least one support site, in order of
/// first occurrence over sorted support, then base, then range site.
pub fn candidates(fam: &RateFamily, support: &BTreeSet<Site>) -> Vec<(usize, Site)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &x in support {
        for c in fam.covering(x) {
            if seen.insert(c) {
                out.push(c);
            }
        }
    }
    out
}

/// Runs the set process A_t (torus or ℤ^d), scheduling only translates that
/// meet the current support.
pub fn run_finite_with<R: Rng>(
    a: &mut DualState,
    fam: &RateFamily,
    horizon: f64,
    rng: &mut R,
    mut on_event: impl FnMut(&Event, &DualState),
) -> usize {
    let n_sites = fam.lattice().num_sites();
    let size = a.len();
    let mut t = 0.0;
    let mut fired = 0;
    if a.is_empty() {
        return 0;
    }
    loop {
        let cands = candidates(fam, &a.sites);
        let total: f64 = cands.iter().map(|&(b, _)| fam.base()[b].rate).sum();
        if total <= 0.0 {
            return fired;
        }
        t += exp_wait(rng, total);
        if t > horizon {
            return fired;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = cands[cands.len() - 1];
        for &c in &cands {
            let r = fam.base()[c.0].rate;
            if u < r {
                pick = c;
                break;
            }
            u -= r;
        }
        let (base, shift) = pick;
        a.apply(&fam.translate(base, shift));
        debug_assert_eq!(a.len(), size);
        fired += 1;
        let perm_id = match n_sites {
            Some(n) => base * n + fam.lattice().index_of(shift),
            None => base,
        };
        on_event(
            &Event {
                time: t,
                perm_id,
                base,
                shift,
                popcount: size,
            },
            a,
        );
    }
}

pub fn run_finite(a0: &DualState, fam: &RateFamily, horizon: f64, seed: u64) -> Result<Trajectory<DualState>> {
    fam.validate_for_simulation()?;
    for &x in &a0.sites {
        fam.lattice().check_site(x)?;
        if fam.lattice().wrap(x) != x {
            return Err(Error::BadInitial(format!("site {x} is not a wrapped torus site")));
        }
    }
    let mut a = a0.clone();
    let mut events = Vec::new();
    let mut rng = rng_for(seed, 0);
    run_finite_with(&mut a, fam, horizon, &mut rng, |e, s| {
        assert_eq!(s.len(), a0.len(), "set size changed");
        events.push(*e);
    });
    Ok(Trajectory {
        seed,
        events,
        terminal: a,
    })
}

/// Initial law for duality estimates.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    Product(f64),
    Explicit(Configuration),
}

impl InitialLaw {
    fn sample<R: Rng>(&self, lattice: &Lattice, rng: &mut R) -> Result<Configuration> {
        match self {
            InitialLaw::Product(rho) => sample_product_with(*rho, lattice, rng),
            InitialLaw::Explicit(c) => Ok(c.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualityEstimate {
    /// P^η[η_t ≡ 1 on A].
    pub lhs: Estimate,
    /// P^A[η ≡ 1 on A_t].
    pub rhs: Estimate,
}

impl DualityEstimate {
    pub fn combined_se(&self) -> f64 {
        self.lhs.std_error.hypot(self.rhs.std_error)
    }
}

/// Both sides of the self-duality identity from `n` independent replicas of
/// each side. Replica `i` uses stream `2i` for the left and `2i + 1` for the
/// right side.
pub fn duality_mc(
    init: &InitialLaw,
    a: &DualState,
    fam: &RateFamily,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<DualityEstimate> {
    if !fam.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if n == 0 {
        return Err(Error::Precondition("at least one replica is required".into()));
    }
    if let InitialLaw::Explicit(c) = init {
        if c.lattice() != fam.lattice() {
            return Err(Error::BadInitial("configuration lives on another lattice".into()));
        }
    }
    let sim = ConfigSimulator::new(fam)?;
    let results: Vec<Result<(bool, bool)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, 2 * i);
            let mut eta = init.sample(fam.lattice(), &mut rng)?;
            sim.run(&mut eta, t, &mut rng, |_, _| {});
            let lhs = eta.all_occupied(a.sites.iter().copied());

            let mut rng = rng_for(seed, 2 * i + 1);
            let eta0 = init.sample(fam.lattice(), &mut rng)?;
            let mut dual = a.clone();
            run_finite_with(&mut dual, fam, t, &mut rng, |_, _| {});
            let rhs = eta0.all_occupied(dual.sites.iter().copied());
            Ok((lhs, rhs))
        })
        .collect();
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for r in results {
        let (l, r) = r?;
        lhs.push(l);
        rhs.push(r);
    }
    Ok(DualityEstimate {
        lhs: Estimate::from_indicators(&lhs),
        rhs: Estimate::from_indicators(&rhs),
    })
}
