//! Coupled constructions: the two-point triple coupling, the recurrent
//! two-discrepancy coupling, the general discrepancy-monotone coupling, and
//! exhaustive checks of the word lemmas they rest on.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::permutation::apply_word;
use crate::process::Configuration;

mod engine;
mod lemmas;
mod table;
mod triple;

pub use engine::*;
pub use lemmas::*;
pub use table::*;
pub use triple::*;

/// Two copies `(A, B)` with cached discrepancy sets.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub a: Configuration,
    pub b: Configuration,
    dplus: BTreeSet<Site>,
    dminus: BTreeSet<Site>,
}

impl CoupledState {
    pub fn new(a: Configuration, b: Configuration) -> Result<Self> {
        if a.lattice() != b.lattice() {
            return Err(Error::BadInitial("configurations live on different lattices".into()));
        }
        let sites = a.lattice().sites()?;
        let mut s = CoupledState {
            a,
            b,
            dplus: BTreeSet::new(),
            dminus: BTreeSet::new(),
        };
        s.refresh(&sites);
        Ok(s)
    }

    /// Sites with `A = 1, B = 0`.
    pub fn dplus(&self) -> &BTreeSet<Site> {
        &self.dplus
    }

    /// Sites with `A = 0, B = 1`.
    pub fn dminus(&self) -> &BTreeSet<Site> {
        &self.dminus
    }

    /// Total number of discrepancies.
    pub fn d(&self) -> usize {
        self.dplus.len() + self.dminus.len()
    }

    fn refresh(&mut self, sites: &[Site]) {
        for &x in sites {
            let (p, q) = (self.a.get(x), self.b.get(x));
            if p && !q {
                self.dplus.insert(x);
            } else {
                self.dplus.remove(&x);
            }
            if q && !p {
                self.dminus.insert(x);
            } else {
                self.dminus.remove(&x);
            }
        }
    }

    /// Applies index maps on the listed sites to `A` and `B` respectively.
    pub fn apply_maps(&mut self, sites: &[Site], a_map: &[usize], b_map: &[usize]) {
        let a = self.a.word_on(sites);
        let b = self.b.word_on(sites);
        self.a.set_word_on(sites, apply_word(a_map, a));
        self.b.set_word_on(sites, apply_word(b_map, b));
        self.refresh(sites);
    }

    /// `(|D⁺ ∩ R|, |D⁻ ∩ R|)`.
    pub fn counts_on(&self, sites: &[Site]) -> (usize, usize) {
        sites.iter().fold((0, 0), |(p, m), x| {
            (p + self.dplus.contains(x) as usize, m + self.dminus.contains(x) as usize)
        })
    }
}

/// Label of a coupled transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    /// `(σ^{i+1}, σ^i)` on a range holding discrepancies.
    Staircase(usize),
    /// `(σ, σ⁻¹)`: the two discrepancies trade places.
    Swap,
    /// Common move on a range holding discrepancies.
    Diagonal,
    /// Common move on a range without the relevant discrepancies.
    OffRange,
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionKind::Staircase(i) => write!(f, "staircase-{i}"),
            TransitionKind::Swap => write!(f, "swap"),
            TransitionKind::Diagonal => write!(f, "diagonal"),
            TransitionKind::OffRange => write!(f, "off-range"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingEvent {
    pub time: f64,
    pub kind: TransitionKind,
    /// `class * num_sites + index_of(shift)`.
    pub range_id: usize,
    pub d_before: usize,
    pub d_after: usize,
}

pub fn write_coupling_csv(events: &[CouplingEvent], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "time,kind,range_id,d_before,d_after")?;
    for e in events {
        writeln!(w, "{:.17e},{},{},{},{}", e.time, e.kind, e.range_id, e.d_before, e.d_after)?;
    }
    Ok(())
}
