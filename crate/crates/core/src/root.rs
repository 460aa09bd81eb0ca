//! Root finding on the scalar value function of the budget `c0`.
//!
//! The value function is the infimum of the max-ratio objective over
//! configurations. It is non-increasing and continuous in `c0` and equals 1
//! exactly at the optimal objective value, so the localizer brackets a sign
//! change of `psi(c0) - 1` and bisects. Each evaluation is a multistart
//! minimax solve that yields a certified *upper* bound on `psi(c0)` (any
//! configuration witnesses one); there is no certified lower bound because
//! the solves are local. Consequently a `Negative` sign decision is
//! certified by its witness while a `Positive` decision trusts the
//! multistart upper bound to be near-tight.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fileio::fmt_real;
use crate::lagrangian::{smoothing_gap_bound, LagrangianCoefficients};
use crate::network::{Configuration, FeasibilityReport, NetworkInstance};
use crate::solver::{
    minimize_lagrangian_with_starts, BoxRegion, ExtraStart, MinimaxSolution, SolveTrace,
    SolverConfig,
};

/// Default half-band around 1 inside which an estimate counts as a root.
pub const DEFAULT_ROOT_TOL: f64 = 1e-2;

/// Expansion/contraction budget while searching for a sign change.
const MAX_BRACKET_STEPS: usize = 40;

/// One evaluation of the value function at a budget `c0`.
#[derive(Debug, Clone)]
pub struct PsiEstimate {
    pub c0: f64,
    /// Best exact max-ratio value found; a true upper bound on `psi(c0)`.
    pub upper: f64,
    /// The minimax solution behind `upper`.
    pub witness: MinimaxSolution,
    /// Smoothing gap at the witness, `final_mu * log(r + 1)`.
    pub uncertainty: f64,
    /// Outer iterations summed over every start of this evaluation.
    pub solver_iterations: usize,
}

/// Sign classification of `upper - 1` against the root tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignDecision {
    /// `upper - 1 > root_tol`; heuristic, trusts the multistart minimum.
    Positive,
    /// `upper - 1 < -root_tol`; certified by the witness configuration.
    Negative,
    /// `|upper - 1| <= root_tol`.
    Root,
}

impl std::fmt::Display for SignDecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SignDecision::Positive => "positive",
            SignDecision::Negative => "negative",
            SignDecision::Root => "root",
        })
    }
}

/// Classifies an estimate per the asymmetric sign rule.
pub fn decide_sign(est: &PsiEstimate, root_tol: f64) -> SignDecision {
    let residual = est.upper - 1.0;
    if residual.abs() <= root_tol {
        SignDecision::Root
    } else if residual < 0.0 {
        SignDecision::Negative
    } else {
        SignDecision::Positive
    }
}

/// An interval whose endpoints were decided `Positive` (low side) and
/// `Negative` (high side).
#[derive(Debug, Clone)]
pub struct Bracket {
    pub c_lo: f64,
    pub c_hi: f64,
    pub psi_lo: PsiEstimate,
    pub psi_hi: PsiEstimate,
}

/// Result of the bracket search.
#[derive(Debug, Clone)]
pub enum BracketOutcome {
    /// The search landed inside the root band and short-circuited.
    RootFound(PsiEstimate),
    /// A sign-changing interval.
    Bracket(Bracket),
}

/// Full localization output.
#[derive(Debug, Clone)]
pub struct LocalizationResult {
    pub c0_star: f64,
    /// Witness configuration of the final estimate.
    pub x_star: Configuration,
    /// `upper - 1` at `c0_star`. Non-positive residuals are certified by
    /// the witness; positive ones rely on the multistart upper bound.
    pub residual: f64,
    /// Constraint check of `x_star` at `rel_tol = root_tol`.
    pub feasibility: FeasibilityReport,
    pub bisection_iterations: usize,
    /// Solver outer iterations summed over every evaluation performed.
    pub total_solver_iterations: usize,
    /// Whether `|residual| <= root_tol`.
    pub converged: bool,
}

/// One row of the root-finder trace.
#[derive(Debug, Clone)]
pub struct RootTraceRow {
    pub step: usize,
    /// Best known lower endpoint at evaluation time (0 before one exists).
    pub c_lo: f64,
    /// Best known upper endpoint (+inf before one exists).
    pub c_hi: f64,
    /// The budget evaluated at this step.
    pub c_mid: f64,
    pub psi_upper: f64,
    pub sign: SignDecision,
}

/// Writes root-trace rows as CSV.
pub fn write_root_trace_csv<W: Write>(rows: &[RootTraceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,c_lo,c_hi,c_mid,psi_upper,sign")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step,
            fmt_real(r.c_lo),
            fmt_real(r.c_hi),
            fmt_real(r.c_mid),
            fmt_real(r.psi_upper),
            r.sign
        )?;
    }
    Ok(())
}

/// Continuation smoothing level for a warm start at evaluation index `i`:
/// `max(epsilon, min(mu0, 1 / i))`. A warm start resumes near a previous
/// solution and does not need the full annealing schedule.
fn warm_mu0(cfg: &SolverConfig, outer_index: usize) -> f64 {
    (1.0 / outer_index.max(1) as f64)
        .min(cfg.mu0)
        .max(cfg.epsilon)
}

/// Worst ratio over the distance constraints only (`k >= 1`), independent
/// of the budget. Ranks witnesses by how realizable their geometry is.
fn edge_ratio_score(net: &NetworkInstance, x: &Configuration) -> Result<f64> {
    let r = net.constraint_count();
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=r {
        let value = net.constraint_value(k, x)?;
        let coeff = if k <= net.edge_count() {
            net.edges()[k - 1].upper_sq
        } else {
            net.edges()[k - net.edge_count() - 1].lower_sq
        };
        worst = worst.max(value / coeff);
    }
    Ok(worst)
}

/// Shared core of the value-function evaluation: multistart minimization
/// at `c0` with per-evaluation exploration streams plus the given warm
/// starts.
fn evaluate_psi(
    net: &NetworkInstance,
    c0: f64,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
    outer_index: usize,
    extra: &[ExtraStart],
    want_trace: bool,
) -> Result<(PsiEstimate, Option<SolveTrace>)> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "c0 must be a positive real, got {c0}"
        )));
    }
    let coef = LagrangianCoefficients::from_instance(net, c0)?;
    // Fresh exploration starts come from a substream keyed by the
    // evaluation index, so every evaluation probes new basins while warm
    // starts carry the best geometry found so far.
    let mut cfg_eval = cfg.clone();
    cfg_eval.rng_seed = crate::harness::derive_seed(cfg.rng_seed, 3, outer_index as u64, 0);
    let outcome = minimize_lagrangian_with_starts(net, &coef, box_region, &cfg_eval, extra, want_trace)
        .map_err(|e| Error::Solver {
            c0,
            source: Box::new(e),
        })?;
    let num_terms = net.constraint_count() + 1;
    let est = PsiEstimate {
        c0,
        upper: outcome.best.exact_max_value,
        uncertainty: smoothing_gap_bound(outcome.best.final_mu, num_terms),
        solver_iterations: outcome.total_outer_iterations,
        witness: outcome.best,
    };
    Ok((est, outcome.best_trace))
}

/// Evaluates the value function at `c0` without warm starts.
pub fn estimate_psi(
    net: &NetworkInstance,
    c0: f64,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
    outer_index: usize,
) -> Result<PsiEstimate> {
    evaluate_psi(net, c0, box_region, cfg, outer_index, &[], false).map(|(est, _)| est)
}

/// As [`estimate_psi`], optionally injecting a warm start (run on the
/// continuation schedule) and returning the winning run's trace.
pub fn estimate_psi_with_warm(
    net: &NetworkInstance,
    c0: f64,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
    outer_index: usize,
    warm: Option<&Configuration>,
    want_trace: bool,
) -> Result<(PsiEstimate, Option<SolveTrace>)> {
    let extra: Vec<ExtraStart> = warm
        .map(|x| ExtraStart {
            x: x.clone(),
            mu0: Some(warm_mu0(cfg, outer_index)),
        })
        .into_iter()
        .collect();
    evaluate_psi(net, c0, box_region, cfg, outer_index, &extra, want_trace)
}

/// Stateful driver that shares the evaluation index, warm starts, and
/// iteration counters across the bracket and bisection phases.
pub struct RootFinder<'a> {
    net: &'a NetworkInstance,
    box_region: BoxRegion,
    cfg: SolverConfig,
    root_tol: f64,
    c_tol: f64,
    outer_index: usize,
    /// Witness of the previous evaluation.
    warm_last: Option<Configuration>,
    /// Most realizable witness seen so far: its edge-ratio score, its
    /// objective value, and the configuration. It certifies the upper
    /// bound `psi(c) <= max(f0 / c, score)` for every budget at once.
    warm_best: Option<BestWitness>,
    total_solver_iterations: usize,
    trace: Option<Vec<RootTraceRow>>,
}

#[derive(Debug, Clone)]
struct BestWitness {
    score: f64,
    f0: f64,
    x: Configuration,
}

/// Internal verdict of one bisection pass.
enum BisectStep {
    Done(PsiEstimate, usize),
    /// The lower endpoint's heuristic `Positive` was refuted by a later
    /// witness; the payload is a fresh `Negative`-decided estimate there.
    Refuted(PsiEstimate),
}

impl<'a> RootFinder<'a> {
    pub fn new(
        net: &'a NetworkInstance,
        box_region: BoxRegion,
        cfg: SolverConfig,
        root_tol: f64,
        c_tol: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(root_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "root_tol must be positive, got {root_tol}"
            )));
        }
        if !(c_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c_tol must be positive, got {c_tol}"
            )));
        }
        Ok(Self {
            net,
            box_region,
            cfg,
            root_tol,
            c_tol,
            outer_index: 1,
            warm_last: None,
            warm_best: None,
            total_solver_iterations: 0,
            trace: None,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[RootTraceRow]> {
        self.trace.as_deref()
    }

    pub fn total_solver_iterations(&self) -> usize {
        self.total_solver_iterations
    }

    fn evaluate(&mut self, c0: f64) -> Result<PsiEstimate> {
        let mu0 = warm_mu0(&self.cfg, self.outer_index);
        let mut extra: Vec<ExtraStart> = Vec::with_capacity(2);
        if let Some(x) = &self.warm_last {
            extra.push(ExtraStart {
                x: x.clone(),
                mu0: Some(mu0),
            });
        }
        if let Some(best) = &self.warm_best {
            if self.warm_last.as_ref() != Some(&best.x) {
                extra.push(ExtraStart {
                    x: best.x.clone(),
                    mu0: Some(mu0),
                });
            }
        }
        let (est, _) = evaluate_psi(
            self.net,
            c0,
            &self.box_region,
            &self.cfg,
            self.outer_index,
            &extra,
            false,
        )?;
        self.outer_index += 1;
        self.total_solver_iterations += est.solver_iterations;
        let score = edge_ratio_score(self.net, &est.witness.x_star)?;
        if self.warm_best.as_ref().map_or(true, |b| score < b.score) {
            let x = est.witness.x_star.clone();
            let f0 = x.coords().iter().map(|v| v * v).sum();
            self.warm_best = Some(BestWitness { score, f0, x });
        }
        self.warm_last = Some(est.witness.x_star.clone());
        Ok(est)
    }

    /// Certified upper bound the best witness implies at budget `c0`.
    fn witness_bound(&self, c0: f64) -> Option<f64> {
        self.warm_best
            .as_ref()
            .map(|b| (b.f0 / c0).max(b.score))
    }

    fn record(&mut self, c_lo: f64, c_hi: f64, est: &PsiEstimate, sign: SignDecision) {
        if let Some(rows) = self.trace.as_mut() {
            rows.push(RootTraceRow {
                step: rows.len(),
                c_lo,
                c_hi,
                c_mid: est.c0,
                psi_upper: est.upper,
                sign,
            });
        }
    }

    /// Searches for a sign-changing interval starting from `c_init`: a
    /// `Positive` start expands upward by doubling offsets, a `Negative`
    /// start contracts geometrically toward zero.
    pub fn bracket(&mut self, c_init: f64) -> Result<BracketOutcome> {
        if !(c_init > 0.0 && c_init.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "c_init must be a positive real, got {c_init}"
            )));
        }
        let first = self.evaluate(c_init)?;
        let sign = decide_sign(&first, self.root_tol);
        self.record(0.0, f64::INFINITY, &first, sign);
        match sign {
            SignDecision::Root => Ok(BracketOutcome::RootFound(first)),
            SignDecision::Positive => self.expand_up(first),
            SignDecision::Negative => self.contract_down(first),
        }
    }

    /// Doubles the offset above a `Positive`-decided starting estimate
    /// until a `Negative` or `Root` decision appears.
    fn expand_up(&mut self, first: PsiEstimate) -> Result<BracketOutcome> {
        let c_init = first.c0;
        let mut lo = first;
        let mut offset = c_init;
        for _ in 0..MAX_BRACKET_STEPS {
            let c = c_init + offset;
            let est = self.evaluate(c)?;
            let sign = decide_sign(&est, self.root_tol);
            self.record(lo.c0, f64::INFINITY, &est, sign);
            match sign {
                SignDecision::Root => return Ok(BracketOutcome::RootFound(est)),
                SignDecision::Positive => lo = est,
                SignDecision::Negative => {
                    return Ok(BracketOutcome::Bracket(Bracket {
                        c_lo: lo.c0,
                        c_hi: est.c0,
                        psi_lo: lo,
                        psi_hi: est,
                    }))
                }
            }
            offset *= 2.0;
        }
        Err(Error::NoBracket {
            last_c0: c_init + offset / 2.0,
            last_upper: lo.upper,
        })
    }

    /// Halves downward below a `Negative`-decided starting estimate until
    /// a `Positive` or `Root` decision appears.
    fn contract_down(&mut self, first: PsiEstimate) -> Result<BracketOutcome> {
        let c_init = first.c0;
        let mut hi = first;
        for k in 1..=MAX_BRACKET_STEPS {
            let c = c_init / f64::powi(2.0, k as i32);
            let est = self.evaluate(c)?;
            let sign = decide_sign(&est, self.root_tol);
            self.record(0.0, hi.c0, &est, sign);
            match sign {
                SignDecision::Root => return Ok(BracketOutcome::RootFound(est)),
                SignDecision::Negative => hi = est,
                SignDecision::Positive => {
                    return Ok(BracketOutcome::Bracket(Bracket {
                        c_lo: est.c0,
                        c_hi: hi.c0,
                        psi_lo: est,
                        psi_hi: hi,
                    }))
                }
            }
        }
        Err(Error::NoBracket {
            last_c0: c_init / f64::powi(2.0, MAX_BRACKET_STEPS as i32),
            last_upper: hi.upper,
        })
    }

    /// One bisection pass. `Positive` decisions are heuristic, so before
    /// each midpoint the lower endpoint is checked against the certified
    /// bound of the best witness; a refuted endpoint is re-evaluated and
    /// handed back so the search can restart below it.
    fn bisect_inner(&mut self, bracket: Bracket, steps: &mut usize) -> Result<BisectStep> {
        let Bracket {
            mut psi_lo,
            mut psi_hi,
            ..
        } = bracket;
        let mut refutation_checked_at = f64::NAN;
        loop {
            if let Some(bound) = self.witness_bound(psi_lo.c0) {
                if bound < 1.0 - self.root_tol && refutation_checked_at != psi_lo.c0 {
                    refutation_checked_at = psi_lo.c0;
                    let est = self.evaluate(psi_lo.c0)?;
                    *steps += 1;
                    let sign = decide_sign(&est, self.root_tol);
                    self.record(psi_lo.c0, psi_hi.c0, &est, sign);
                    match sign {
                        SignDecision::Root => return Ok(BisectStep::Done(est, *steps)),
                        SignDecision::Negative => return Ok(BisectStep::Refuted(est)),
                        SignDecision::Positive => psi_lo = est,
                    }
                }
            }
            let width = psi_hi.c0 - psi_lo.c0;
            if width < self.c_tol {
                let lo_resid = (psi_lo.upper - 1.0).abs();
                let hi_resid = (psi_hi.upper - 1.0).abs();
                let best = if lo_resid <= hi_resid { psi_lo } else { psi_hi };
                return Ok(BisectStep::Done(best, *steps));
            }
            let mid = 0.5 * (psi_lo.c0 + psi_hi.c0);
            let est = self.evaluate(mid)?;
            *steps += 1;
            let sign = decide_sign(&est, self.root_tol);
            self.record(psi_lo.c0, psi_hi.c0, &est, sign);
            match sign {
                SignDecision::Root => return Ok(BisectStep::Done(est, *steps)),
                SignDecision::Positive => psi_lo = est,
                SignDecision::Negative => psi_hi = est,
            }
        }
    }

    /// Bisects a bracket until the root band is hit or the interval is
    /// narrower than `c_tol`, in which case the endpoint with the smaller
    /// residual is returned. A lower endpoint refuted by a later witness
    /// restarts the search below it.
    pub fn bisect(&mut self, bracket: Bracket) -> Result<LocalizationResult> {
        let mut steps = 0usize;
        let mut current = bracket;
        // each refutation moves the whole interval below its old lower
        // endpoint, so the number of restarts is bounded
        for _ in 0..MAX_BRACKET_STEPS {
            match self.bisect_inner(current, &mut steps)? {
                BisectStep::Done(est, steps) => return self.finalize(est, steps),
                BisectStep::Refuted(new_hi) => match self.contract_down(new_hi)? {
                    BracketOutcome::RootFound(est) => return self.finalize(est, steps),
                    BracketOutcome::Bracket(b) => current = b,
                },
            }
        }
        Err(Error::NoBracket {
            last_c0: 0.0,
            last_upper: f64::NAN,
        })
    }

    /// Bracket search followed by bisection.
    pub fn localize(&mut self, c_init: f64) -> Result<LocalizationResult> {
        match self.bracket(c_init)? {
            BracketOutcome::RootFound(est) => self.finalize(est, 0),
            BracketOutcome::Bracket(bracket) => self.bisect(bracket),
        }
    }

    fn finalize(&self, est: PsiEstimate, steps: usize) -> Result<LocalizationResult> {
        let residual = est.upper - 1.0;
        let feasibility = self
            .net
            .feasibility_check(&est.witness.x_star, self.root_tol)?;
        Ok(LocalizationResult {
            c0_star: est.c0,
            x_star: est.witness.x_star,
            residual,
            feasibility,
            bisection_iterations: steps,
            total_solver_iterations: self.total_solver_iterations,
            converged: residual.abs() <= self.root_tol,
        })
    }
}

/// Stateless bracket search with the default root tolerance.
pub fn bracket_root(
    net: &NetworkInstance,
    c_init: f64,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
) -> Result<BracketOutcome> {
    let c_tol = 1e-3 * c_init;
    RootFinder::new(net, *box_region, cfg.clone(), DEFAULT_ROOT_TOL, c_tol)?.bracket(c_init)
}

/// Stateless bisection of an existing bracket.
pub fn find_root(
    net: &NetworkInstance,
    bracket: Bracket,
    root_tol: f64,
    c_tol: f64,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
) -> Result<LocalizationResult> {
    let mut finder = RootFinder::new(net, *box_region, cfg.clone(), root_tol, c_tol)?;
    let hi = &bracket.psi_hi.witness.x_star;
    finder.warm_best = Some(BestWitness {
        score: edge_ratio_score(net, hi)?,
        f0: hi.coords().iter().map(|v| v * v).sum(),
        x: hi.clone(),
    });
    finder.warm_last = Some(hi.clone());
    finder.outer_index = 3;
    finder.bisect(bracket)
}
