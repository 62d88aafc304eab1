//! Two-point triple coupling of `I` (independent walkers), `J` (one
//! permutation acting on both points, doubled rate on both-point
//! permutations) and `E` (the exclusion-type two-point process).
//!
//! Until the first both-point arrival the three processes share every move.
//! Each walker copy owns a clock for the permutations covering it, so a
//! permutation covering both points is scheduled twice. An arrival from copy
//! `k` moves `I_k` only, moves both `J` points, and moves both `E` points
//! unless it is a copy-2 arrival of a both-point permutation. The first
//! both-point arrival decouples the three; afterwards each runs
//! independently with its own law.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::permutation::derangement_count;
use crate::process::{rng_for, Estimate};
use crate::rates::{FamilyReport, RateFamily};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripleState {
    pub i: [Site; 2],
    pub j: [Site; 2],
    pub e: [Site; 2],
    pub decoupled: bool,
    pub t_dec: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TripleProcess {
    /// Common move before decoupling.
    Shared,
    I,
    J,
    E,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripleEvent {
    pub time: f64,
    pub process: TripleProcess,
    /// Walker copy whose clock rang (0 or 1).
    pub copy: usize,
    pub base: usize,
    pub shift: Site,
    pub state: TripleState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripleRun {
    pub seed: u64,
    pub events: Vec<TripleEvent>,
    pub terminal: TripleState,
    /// First time `I₁ = I₂`.
    pub t_meet: Option<f64>,
    /// First both-point jump of `J`.
    pub t_j: Option<f64>,
    /// First both-point jump of `E`.
    pub t_e: Option<f64>,
    /// Arrivals of both-point permutations on `E`'s doubled clock.
    pub e_both_arrivals: u64,
    /// Those that moved `E`.
    pub e_both_acted: u64,
}

/// Samples a translate covering a given site with probability proportional
/// to its rate.
struct CoverSampler<'f> {
    fam: &'f RateFamily,
    by_base: WeightedIndex<f64>,
}

impl<'f> CoverSampler<'f> {
    fn new(fam: &'f RateFamily) -> Result<Self> {
        let w: Vec<f64> = fam
            .base()
            .iter()
            .map(|b| b.rate * b.perm.range_len() as f64)
            .collect();
        let by_base = WeightedIndex::new(w).map_err(|e| Error::InvalidFamily(e.to_string()))?;
        Ok(CoverSampler { fam, by_base })
    }

    fn sample<R: Rng>(&self, x: Site, rng: &mut R) -> (usize, Site) {
        let b = self.by_base.sample(rng);
        let range = self.fam.base()[b].perm.range();
        let s = range[rng.random_range(0..range.len())];
        (b, self.fam.lattice().wrap(x - s))
    }
}

pub struct TripleEngine<'f> {
    fam: &'f RateFamily,
    sampler: CoverSampler<'f>,
    m_pl: f64,
}

impl<'f> TripleEngine<'f> {
    pub fn new(fam: &'f RateFamily) -> Result<Self> {
        fam.validate_for_simulation()?;
        Ok(TripleEngine {
            fam,
            sampler: CoverSampler::new(fam)?,
            m_pl: fam.m_pl(),
        })
    }

    fn move_both(&self, p: [Site; 2], b: usize, y: Site) -> [Site; 2] {
        [
            self.fam.translate_image(b, y, p[0]),
            self.fam.translate_image(b, y, p[1]),
        ]
    }

    /// Runs up to `horizon`; with `stop_early` the run ends once all three
    /// first-passage times are known.
    pub fn run<R: Rng>(
        &self,
        x: (Site, Site),
        horizon: f64,
        seed: u64,
        rng: &mut R,
        record: bool,
        stop_early: bool,
    ) -> Result<TripleRun> {
        let lat = self.fam.lattice();
        lat.check_site(x.0)?;
        lat.check_site(x.1)?;
        let (x0, x1) = (lat.wrap(x.0), lat.wrap(x.1));
        if x0 == x1 {
            return Err(Error::Precondition("the two starting points must differ".into()));
        }
        let start = [x0, x1];
        let mut st = TripleState {
            i: start,
            j: start,
            e: start,
            decoupled: false,
            t_dec: None,
        };
        let mut run = TripleRun {
            seed,
            events: Vec::new(),
            terminal: st,
            t_meet: None,
            t_j: None,
            t_e: None,
            e_both_arrivals: 0,
            e_both_acted: 0,
        };
        let mut t = 0.0;
        loop {
            if stop_early && run.t_meet.is_some() && run.t_j.is_some() && run.t_e.is_some() {
                break;
            }
            let rate = if st.decoupled { 6.0 * self.m_pl } else { 2.0 * self.m_pl };
            let w: f64 = Exp1.sample(rng);
            t += w / rate;
            if t > horizon {
                break;
            }
            let k = rng.random_range(0..2usize);
            let other = 1 - k;
            let process;
            let (b, y);
            if !st.decoupled {
                process = TripleProcess::Shared;
                (b, y) = self.sampler.sample(st.i[k], rng);
                let covers_other = self.fam.translate_displaces(b, y, st.i[other]);
                st.i[k] = self.fam.translate_image(b, y, st.i[k]);
                st.j = self.move_both(st.j, b, y);
                if k == 0 || !covers_other {
                    st.e = self.move_both(st.e, b, y);
                }
                if covers_other {
                    st.decoupled = true;
                    st.t_dec = Some(t);
                    run.t_j = Some(t);
                    run.e_both_arrivals += 1;
                    if k == 0 {
                        run.e_both_acted += 1;
                        run.t_e = Some(t);
                    }
                } else if st.i != st.j || st.j != st.e {
                    return Err(Error::PropertyViolation(format!(
                        "processes separated before decoupling at t = {t}"
                    )));
                }
            } else {
                let which = rng.random_range(0..3u8);
                match which {
                    0 => {
                        process = TripleProcess::I;
                        (b, y) = self.sampler.sample(st.i[k], rng);
                        st.i[k] = self.fam.translate_image(b, y, st.i[k]);
                    }
                    1 => {
                        process = TripleProcess::J;
                        (b, y) = self.sampler.sample(st.j[k], rng);
                        let covers_other = self.fam.translate_displaces(b, y, st.j[other]);
                        st.j = self.move_both(st.j, b, y);
                        if covers_other && run.t_j.is_none() {
                            run.t_j = Some(t);
                        }
                    }
                    _ => {
                        process = TripleProcess::E;
                        (b, y) = self.sampler.sample(st.e[k], rng);
                        let covers_other = self.fam.translate_displaces(b, y, st.e[other]);
                        if covers_other {
                            run.e_both_arrivals += 1;
                            if k == 1 {
                                continue;
                            }
                            run.e_both_acted += 1;
                            if run.t_e.is_none() {
                                run.t_e = Some(t);
                            }
                        }
                        st.e = self.move_both(st.e, b, y);
                    }
                }
            }
            if st.i[0] == st.i[1] && run.t_meet.is_none() {
                run.t_meet = Some(t);
            }
            if st.j[0] == st.j[1] || st.e[0] == st.e[1] {
                return Err(Error::PropertyViolation("exclusion-type points collided".into()));
            }
            if record {
                run.events.push(TripleEvent {
                    time: t,
                    process,
                    copy: k,
                    base: b,
                    shift: y,
                    state: st,
                });
            }
        }
        let before = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (_, None) => true,
            (Some(a), Some(b)) => a <= b,
            (None, Some(_)) => false,
        };
        if !before(run.t_j, run.t_e) {
            return Err(Error::PropertyViolation("E jumped on both points before J".into()));
        }
        if !before(run.t_j, run.t_meet) {
            return Err(Error::PropertyViolation("I met before J jumped on both points".into()));
        }
        run.terminal = st;
        Ok(run)
    }
}

pub fn run_triple(x: (Site, Site), fam: &RateFamily, horizon: f64, seed: u64) -> Result<TripleRun> {
    TripleEngine::new(fam)?.run(x, horizon, seed, &mut rng_for(seed, 0), true, false)
}

/// Per-run first-passage indicators before the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GIndicators {
    pub met: bool,
    pub j_both: bool,
    pub e_both: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GEstimates {
    /// Probability that `I₁` and `I₂` meet.
    pub g2: Estimate,
    /// Probability that `E` jumps on both points.
    pub gbar2: Estimate,
    /// Probability that `J` jumps on both points.
    pub gbarbar2: Estimate,
    pub horizon: f64,
    #[serde(skip)]
    pub runs: Vec<GIndicators>,
}

pub fn estimate_g(x: (Site, Site), fam: &RateFamily, horizon: f64, n: usize, seed: u64) -> Result<GEstimates> {
    if n == 0 {
        return Err(Error::Precondition("at least one run is required".into()));
    }
    if fam.lattice().wrap(x.0) == fam.lattice().wrap(x.1) {
        return Err(Error::Precondition("the two starting points must differ".into()));
    }
    let engine = TripleEngine::new(fam)?;
    let runs: Vec<Result<GIndicators>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let r = engine.run(x, horizon, seed, &mut rng_for(seed, i), false, true)?;
            Ok(GIndicators {
                met: r.t_meet.is_some(),
                j_both: r.t_j.is_some(),
                e_both: r.t_e.is_some(),
            })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let ind = |f: fn(&GIndicators) -> bool| {
        Estimate::from_indicators(&runs.iter().map(f).collect::<Vec<_>>())
    };
    Ok(GEstimates {
        g2: ind(|r| r.met),
        gbar2: ind(|r| r.e_both),
        gbarbar2: ind(|r| r.j_both),
        horizon,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Mean of the per-run difference `lhs − rhs`.
    pub difference: Estimate,
    /// Runs violating the inequality pathwise (pathwise checks only).
    pub violations: Option<usize>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GInequalityReport {
    pub checks: Vec<InequalityCheck>,
    pub pass: bool,
}

/// Inequalities between the three estimates. Pathwise checks must hold in
/// every run; statistical ones allow a one-sided 3σ slack on the paired
/// difference.
pub fn check_g_inequalities(g: &GEstimates, report: &FamilyReport) -> GInequalityReport {
    let stat = |name: &str, f: &dyn Fn(&GIndicators) -> f64| {
        let d = Estimate::from_samples(&g.runs.iter().map(f).collect::<Vec<_>>());
        InequalityCheck {
            name: name.into(),
            pass: d.mean >= -3.0 * d.std_error,
            difference: d,
            violations: None,
        }
    };
    let path = |name: &str, f: &dyn Fn(&GIndicators) -> f64| {
        let mut c = stat(name, f);
        let v = g.runs.iter().filter(|r| f(r) < 0.0).count();
        c.violations = Some(v);
        c.pass = v == 0;
        c
    };
    let b = |x: bool| x as u8 as f64;
    let mut checks = vec![
        path("gbarbar2 >= gbar2", &|r| b(r.j_both) - b(r.e_both)),
        path("gbarbar2 >= g2", &|r| b(r.j_both) - b(r.met)),
        stat("gbar2 >= g2", &|r| b(r.e_both) - b(r.met)),
        stat("gbar2 >= gbarbar2 / 2", &|r| b(r.e_both) - 0.5 * b(r.j_both)),
    ];
    if let (Some(m_ii), Ok(p)) = (report.m_ii, derangement_count(report.m_i)) {
        let f = 1.0 / (m_ii * p as f64);
        checks.push(stat(
            &format!("g2 >= gbarbar2 * {f}"),
            &|r| b(r.met) - f * b(r.j_both),
        ));
    }
    let pass = checks.iter().all(|c| c.pass);
    GInequalityReport { checks, pass }
}
