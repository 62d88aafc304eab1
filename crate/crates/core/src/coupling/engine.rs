//! Event engine shared by the recurrent and general couplings.
//!
//! Range groups are proposed at the static rate `Σ (Z + m)`; a proposal on a
//! group builds that group's coupled table for the current words and is
//! accepted with probability `table total / (Z + m)`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use super::table::{build_table, check_marginals, identity_map, CouplingKind, RangeGroups};
use super::{CoupledState, CouplingEvent, TransitionKind};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::permutation::{derangement_count, SelectionPolicy};
use crate::process::{rng_for, sample_product_with, Configuration, Estimate};
use crate::rates::{ClosureMode, RateFamily};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingOptions {
    pub policy: SelectionPolicy,
    /// Closure the family must satisfy; the recurrent coupling always
    /// requires strict closure.
    pub closure: ClosureMode,
    pub record: bool,
    /// Stop at the first time `A = B`.
    pub stop_when_coupled: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions {
            policy: SelectionPolicy::CanonicalFirst,
            closure: ClosureMode::Strict,
            record: true,
            stop_when_coupled: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingRun {
    pub seed: u64,
    pub events: Vec<CouplingEvent>,
    pub terminal: CoupledState,
    pub coupled: bool,
    pub t_couple: Option<f64>,
    pub initial_d: usize,
    /// Events fired on a range holding both discrepancies (recurrent only).
    pub both_events: u64,
    /// Those of them that merged the discrepancies.
    pub merges: u64,
    /// Non-identity marginal moves of `A` (resp. `B`) per base permutation.
    pub a_counts: Vec<u64>,
    pub b_counts: Vec<u64>,
}

pub struct CouplingEngine<'f> {
    fam: &'f RateFamily,
    groups: RangeGroups,
    kind: CouplingKind,
    options: CouplingOptions,
}

impl<'f> CouplingEngine<'f> {
    pub fn new(fam: &'f RateFamily, kind: CouplingKind, options: CouplingOptions) -> Result<Self> {
        fam.validate_for_simulation()?;
        if !fam.lattice().is_torus() {
            return Err(Error::UnboundedLattice);
        }
        let mode = match kind {
            CouplingKind::Recurrent => ClosureMode::Strict,
            CouplingKind::General => options.closure,
        };
        let report = fam.range_closure(mode);
        if !report.passed {
            let detail = if report.missing.is_empty() {
                format!("{} word pairs unreachable", report.failing_pairs.len())
            } else {
                format!("missing {}", report.missing.join(", "))
            };
            return Err(Error::NotRangeClosed(detail));
        }
        Ok(CouplingEngine {
            fam,
            groups: RangeGroups::new(fam)?,
            kind,
            options,
        })
    }

    pub fn groups(&self) -> &RangeGroups {
        &self.groups
    }

    fn check_initial(&self, state: &CoupledState) -> Result<()> {
        if state.a.lattice() != self.fam.lattice() {
            return Err(Error::BadInitial("configurations live on another lattice".into()));
        }
        if self.kind == CouplingKind::Recurrent
            && (state.dplus().len() != 1 || state.dminus().len() != 1)
        {
            return Err(Error::BadInitial(format!(
                "recurrent coupling needs exactly one discrepancy of each type, got {} and {}",
                state.dplus().len(),
                state.dminus().len()
            )));
        }
        Ok(())
    }

    /// Coupled tables of every range for the current state, checked for
    /// marginal rate conservation.
    pub fn check_state_marginals(&self, state: &CoupledState) -> Result<()> {
        for g in self.groups.groups() {
            let class = &self.groups.classes()[g.class];
            let a = state.a.word_on(&g.sites);
            let b = state.b.word_on(&g.sites);
            let table = build_table(self.kind, class, a, b, state.d(), self.options.policy)?;
            check_marginals(class, &table)?;
            let total: f64 = table.iter().map(|t| t.rate).sum();
            if total > self.groups.bound_of(g.id) * (1.0 + 1e-12) {
                return Err(Error::PropertyViolation(format!(
                    "table rate {total} exceeds proposal bound on range {}",
                    g.id
                )));
            }
        }
        Ok(())
    }

    pub fn run<R: Rng>(&self, mut state: CoupledState, horizon: f64, seed: u64, rng: &mut R) -> Result<CouplingRun> {
        self.check_initial(&state)?;
        let n_base = self.fam.base().len();
        let initial_d = state.d();
        let a_dominates = state.dminus().is_empty();
        let b_dominates = state.dplus().is_empty();
        let mut run = CouplingRun {
            seed,
            events: Vec::new(),
            terminal: state.clone(),
            coupled: initial_d == 0,
            t_couple: (initial_d == 0).then_some(0.0),
            initial_d,
            both_events: 0,
            merges: 0,
            a_counts: vec![0; n_base],
            b_counts: vec![0; n_base],
        };
        let bound = self.groups.bound_rate();
        let mut t = 0.0;
        loop {
            if run.coupled && self.options.stop_when_coupled {
                break;
            }
            let e: f64 = Exp1.sample(rng);
            t += e / bound;
            if t > horizon {
                break;
            }
            let gi = self.groups.alias().sample(rng);
            let g = &self.groups.groups()[gi];
            let class = &self.groups.classes()[g.class];
            let a = state.a.word_on(&g.sites);
            let b = state.b.word_on(&g.sites);
            let d_before = state.d();
            let table = build_table(self.kind, class, a, b, d_before, self.options.policy)?;
            let total: f64 = table.iter().map(|x| x.rate).sum();
            let u: f64 = rng.random::<f64>() * self.groups.bound_of(gi);
            if u >= total {
                continue;
            }
            let pick = WeightedIndex::new(table.iter().map(|x| x.rate))
                .map_err(|e| Error::PropertyViolation(format!("empty coupled table: {e}")))?
                .sample(rng);
            let tr = &table[pick];
            let before_local = state.counts_on(&g.sites);
            state.apply_maps(&g.sites, &tr.a_map, &tr.b_map);
            let d_after = state.d();
            let after_local = state.counts_on(&g.sites);

            let id = identity_map(class.len());
            if tr.a_map != id {
                run.a_counts[class.member_of(&tr.a_map).expect("member").base] += 1;
            }
            if tr.b_map != id {
                run.b_counts[class.member_of(&tr.b_map).expect("member").base] += 1;
            }

            if d_after > d_before {
                return Err(Error::PropertyViolation(format!(
                    "discrepancy count rose from {d_before} to {d_after} at t = {t}"
                )));
            }
            if after_local.0 > before_local.0 && after_local.1 > before_local.1 {
                return Err(Error::PropertyViolation(format!(
                    "both discrepancy types grew on range {} at t = {t}",
                    g.id
                )));
            }
            if (a_dominates && !state.dminus().is_empty()) || (b_dominates && !state.dplus().is_empty()) {
                return Err(Error::PropertyViolation(format!("ordering lost at t = {t}")));
            }
            if self.kind == CouplingKind::Recurrent {
                if d_after != 0 && d_after != 2 {
                    return Err(Error::PropertyViolation(format!(
                        "recurrent coupling reached {d_after} discrepancies"
                    )));
                }
                if d_before == 2 && (a ^ b).count_ones() == 2 {
                    run.both_events += 1;
                    if d_after == 0 {
                        run.merges += 1;
                    }
                }
            }
            if d_after == 0 && !run.coupled {
                run.coupled = true;
                run.t_couple = Some(t);
            }
            if self.options.record {
                run.events.push(CouplingEvent {
                    time: t,
                    kind: tr.kind,
                    range_id: g.id,
                    d_before,
                    d_after,
                });
            }
        }
        run.terminal = state;
        Ok(run)
    }
}

/// Two-discrepancy coupling from `(A₀, B₀)` up to `horizon`.
pub fn run_recurrent_coupling(
    a0: &Configuration,
    b0: &Configuration,
    fam: &RateFamily,
    horizon: f64,
    seed: u64,
) -> Result<CouplingRun> {
    run_coupling(CouplingKind::Recurrent, a0, b0, fam, horizon, seed, CouplingOptions::default())
}

/// Discrepancy-monotone coupling from `(A₀, B₀)` up to `horizon`.
pub fn run_general_coupling(
    a0: &Configuration,
    b0: &Configuration,
    fam: &RateFamily,
    horizon: f64,
    seed: u64,
    closure: ClosureMode,
) -> Result<CouplingRun> {
    let options = CouplingOptions {
        closure,
        ..CouplingOptions::default()
    };
    run_coupling(CouplingKind::General, a0, b0, fam, horizon, seed, options)
}

pub fn run_coupling(
    kind: CouplingKind,
    a0: &Configuration,
    b0: &Configuration,
    fam: &RateFamily,
    horizon: f64,
    seed: u64,
    options: CouplingOptions,
) -> Result<CouplingRun> {
    let engine = CouplingEngine::new(fam, kind, options)?;
    let state = CoupledState::new(a0.clone(), b0.clone())?;
    engine.run(state, horizon, seed, &mut rng_for(seed, 0))
}

/// Random product configuration with a particle at `x` moved to `x + e₁`
/// in the second copy.
pub fn adjacent_discrepancy_pair<R: Rng>(
    fam: &RateFamily,
    rho: f64,
    rng: &mut R,
) -> Result<(Configuration, Configuration)> {
    let lat = fam.lattice();
    let n = lat.num_sites().ok_or(Error::UnboundedLattice)?;
    let mut a = sample_product_with(rho, lat, rng)?;
    let x = lat.site_at(rng.random_range(0..n));
    let mut e1 = vec![0; lat.dim()];
    e1[0] = 1;
    let y = lat.shift(x, Site::new(&e1));
    a.set(x, true);
    a.set(y, false);
    let mut b = a.clone();
    b.set(x, false);
    b.set(y, true);
    Ok((a, b))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuccessBoundReport {
    pub bound: f64,
    pub runs: usize,
    pub both_events: u64,
    pub merges: u64,
    pub fraction: Estimate,
    pub coupled_runs: usize,
    pub pass: bool,
}

/// Empirical merge fraction at both-discrepancy events over `n` recurrent
/// runs from adjacent discrepancies, against `1 / (𝒫(M_I)·M_II)`.
pub fn success_bound_check(fam: &RateFamily, n: usize, horizon: f64, seed: u64) -> Result<SuccessBoundReport> {
    if n == 0 {
        return Err(Error::Precondition("at least one run is required".into()));
    }
    let m_ii = fam.m_ii()?;
    let bound = 1.0 / (derangement_count(fam.m_i())? as f64 * m_ii);
    let options = CouplingOptions {
        record: false,
        stop_when_coupled: true,
        ..CouplingOptions::default()
    };
    let engine = CouplingEngine::new(fam, CouplingKind::Recurrent, options)?;
    let runs: Vec<Result<CouplingRun>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let (a, b) = adjacent_discrepancy_pair(fam, 0.5, &mut rng)?;
            engine.run(CoupledState::new(a, b)?, horizon, seed, &mut rng)
        })
        .collect();
    let mut both = 0;
    let mut merges = 0;
    let mut coupled = 0;
    for r in runs {
        let r = r?;
        both += r.both_events;
        merges += r.merges;
        coupled += r.coupled as usize;
    }
    let p = if both > 0 { merges as f64 / both as f64 } else { 0.0 };
    let fraction = Estimate {
        mean: p,
        std_error: if both > 0 { (p * (1.0 - p) / both as f64).sqrt() } else { 0.0 },
        n: both as usize,
    };
    Ok(SuccessBoundReport {
        bound,
        runs: n,
        both_events: both,
        merges,
        pass: both > 0 && p >= bound - 3.0 * fraction.std_error,
        fraction,
        coupled_runs: coupled,
    })
}

/// Number of events of a run with the given kind.
pub fn kind_count(run: &CouplingRun, kind: TransitionKind) -> usize {
    run.events.iter().filter(|e| e.kind == kind).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::process::sample_product;
    use crate::rates::presets::*;

    fn s(x: i64) -> Site {
        Site::new(&[x])
    }

    fn torus(l: i64) -> Lattice {
        Lattice::torus(&[l]).unwrap()
    }

    #[test]
    fn recurrent_rejects_bad_initial_states() {
        let fam = three_cycles(torus(10), 1.0).unwrap();
        let a = Configuration::from_sites(fam.lattice(), &[s(1), s(4)]).unwrap();
        assert!(matches!(
            run_recurrent_coupling(&a, &a, &fam, 1.0, 1),
            Err(Error::BadInitial(_))
        ));
        let b = Configuration::from_sites(fam.lattice(), &[s(1)]).unwrap();
        assert!(matches!(
            run_recurrent_coupling(&a, &b, &fam, 1.0, 1),
            Err(Error::BadInitial(_))
        ));
        let single = single_three_cycle(torus(10), 1.0).unwrap();
        let c = Configuration::from_sites(fam.lattice(), &[s(2), s(4)]).unwrap();
        assert!(matches!(
            run_recurrent_coupling(&a, &c, &single, 1.0, 1),
            Err(Error::NotRangeClosed(_))
        ));
    }

    #[test]
    fn adjacent_discrepancies_have_four_live_transitions() {
        let fam = three_cycles(torus(10), 1.0).unwrap();
        let a = Configuration::from_sites(fam.lattice(), &[s(4)]).unwrap();
        let b = Configuration::from_sites(fam.lattice(), &[s(5)]).unwrap();
        let engine = CouplingEngine::new(&fam, CouplingKind::Recurrent, CouplingOptions::default()).unwrap();
        let state = CoupledState::new(a, b).unwrap();
        let mut live = 0;
        let mut live_rate = 0.0;
        let mut merge_rate = 0.0;
        for g in engine.groups().groups() {
            let class = &engine.groups().classes()[g.class];
            let (wa, wb) = (state.a.word_on(&g.sites), state.b.word_on(&g.sites));
            if (wa ^ wb).count_ones() != 2 {
                continue;
            }
            let table = build_table(CouplingKind::Recurrent, class, wa, wb, 2, SelectionPolicy::CanonicalFirst).unwrap();
            for t in table.iter().filter(|t| t.rate > 0.0) {
                live += 1;
                live_rate += t.rate;
                let mut next = state.clone();
                next.apply_maps(&g.sites, &t.a_map, &t.b_map);
                if next.d() == 0 {
                    merge_rate += t.rate;
                }
            }
        }
        assert_eq!(live, 4);
        assert_eq!(live_rate, fam.z_d(s(4), s(5)));
        assert_eq!(live_rate, 4.0);
        assert_eq!(merge_rate, 2.0);
    }

    #[test]
    fn recurrent_runs_merge_and_are_reproducible() {
        let fam = three_cycles(torus(12), 1.0).unwrap();
        let a = Configuration::from_sites(fam.lattice(), &[s(0), s(3), s(4)]).unwrap();
        let b = Configuration::from_sites(fam.lattice(), &[s(0), s(3), s(8)]).unwrap();
        let r1 = run_recurrent_coupling(&a, &b, &fam, 200.0, 5).unwrap();
        let r2 = run_recurrent_coupling(&a, &b, &fam, 200.0, 5).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.coupled);
        assert_eq!(r1.terminal.a, r1.terminal.b);
        assert!(r1.events.iter().all(|e| e.d_after <= e.d_before));
        let t = r1.t_couple.unwrap();
        assert!(r1.events.iter().filter(|e| e.time > t).all(|e| e.d_after == 0));
    }

    #[test]
    fn general_coupling_keeps_order_and_monotone_d() {
        let fam = three_cycles(torus(12), 1.0).unwrap();
        for seed in 0..40 {
            let a = sample_product(0.5, fam.lattice(), 2 * seed).unwrap();
            let b = sample_product(0.5, fam.lattice(), 2 * seed + 1).unwrap();
            let run = run_general_coupling(&a, &b, &fam, 20.0, seed, ClosureMode::Strict).unwrap();
            assert!(run.terminal.d() <= run.initial_d);
            assert_eq!(run.terminal.a.count(), a.count());
            assert_eq!(run.terminal.b.count(), b.count());

            let mut hi = a.clone();
            for x in b.occupied_sites() {
                hi.set(x, true);
            }
            let run = run_general_coupling(&hi, &b, &fam, 20.0, seed, ClosureMode::Strict).unwrap();
            assert!(run.terminal.dminus().is_empty());
        }
        let a = sample_product(0.5, fam.lattice(), 99).unwrap();
        let run = run_general_coupling(&a, &a, &fam, 10.0, 1, ClosureMode::Strict).unwrap();
        assert!(run.events.iter().all(|e| e.d_after == 0 && e.kind == TransitionKind::OffRange));
    }

    #[test]
    fn marginals_conserved_on_random_states() {
        for fam in [
            three_cycles(torus(8), 1.0).unwrap(),
            three_cycles_with_rates(torus(8), 1.0, 3.0).unwrap(),
            three_cycles_and_swaps(torus(8), 1.0, 0.4).unwrap(),
        ] {
            let engine = CouplingEngine::new(&fam, CouplingKind::General, CouplingOptions::default()).unwrap();
            for seed in 0..20 {
                let a = sample_product(0.5, fam.lattice(), 3 * seed).unwrap();
                let b = sample_product(0.5, fam.lattice(), 3 * seed + 1).unwrap();
                engine.check_state_marginals(&CoupledState::new(a, b).unwrap()).unwrap();
            }
        }
    }

    #[test]
    fn transposition_family_always_merges() {
        let fam = nearest_neighbor_transpositions(torus(10), 1.0).unwrap();
        let rep = success_bound_check(&fam, 200, 1e4, 3).unwrap();
        assert_eq!(rep.bound, 1.0);
        assert_eq!(rep.merges, rep.both_events);
        assert!(rep.pass);
    }
}
