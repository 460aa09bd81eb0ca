//! Smoothing gradient descent for the finite minimax problem.
//!
//! The descent direction is always the negative gradient of the smoothed
//! objective at the current smoothing level `mu`. Step lengths come from a
//! Wolfe line search that brackets by doubling and then bisects: a
//! sufficient-decrease violation caps the bracket from above, a curvature
//! violation raises it from below. After each step the gradient at the new
//! point (still at the current `mu`) decides whether `mu` shrinks by the
//! factor `gamma1`; the run terminates once `mu` falls below `epsilon`.
//! Iterates are clamped into a compact box after every step, which keeps
//! the whole trajectory inside the region where the minimax attains its
//! infimum.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fileio::fmt_real;
use crate::lagrangian::{evaluate_coords, max_ratio_coords, LagrangianCoefficients};
use crate::network::{Configuration, NetworkInstance};

/// Parameters of the smoothing gradient method.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Sufficient-decrease constant, in (0, 0.5).
    pub sigma1: f64,
    /// Curvature constant, in (sigma1, 1).
    pub sigma2: f64,
    /// Gradient threshold factor for shrinking the smoothing level.
    pub gamma: f64,
    /// Smoothing shrink factor, in (0, 1).
    pub gamma1: f64,
    /// Terminal smoothing level; the solve stops once `mu < epsilon`.
    pub epsilon: f64,
    /// Initial smoothing level.
    pub mu0: f64,
    /// Cap on descent iterations per solve.
    pub max_outer_iterations: usize,
    /// Cap on probes per line search.
    pub max_line_search_iterations: usize,
    /// Number of independent random starts per minimization.
    pub multistart_count: usize,
    /// Seed for the multistart sampling streams.
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sigma1: 0.1,
            sigma2: 0.9,
            gamma: 1.0,
            gamma1: 0.5,
            epsilon: 1e-4,
            mu0: 1.0,
            max_outer_iterations: 5000,
            max_line_search_iterations: 60,
            multistart_count: 5,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.sigma1 > 0.0 && self.sigma1 < 0.5) {
            return bad(format!("sigma1 must lie in (0, 0.5), got {}", self.sigma1));
        }
        if !(self.sigma2 > self.sigma1 && self.sigma2 < 1.0) {
            return bad(format!(
                "sigma2 must lie in (sigma1, 1), got {}",
                self.sigma2
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.gamma1 > 0.0 && self.gamma1 < 1.0) {
            return bad(format!("gamma1 must lie in (0, 1), got {}", self.gamma1));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad(format!("mu0 must be positive, got {}", self.mu0));
        }
        if self.max_outer_iterations == 0 {
            return bad("max_outer_iterations must be at least 1".into());
        }
        if self.max_line_search_iterations == 0 {
            return bad("max_line_search_iterations must be at least 1".into());
        }
        if self.multistart_count == 0 {
            return bad("multistart_count must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-coordinate compact box the minimization is restricted to.
#[derive(Debug, Clone, Copy)]
pub struct BoxRegion {
    lower: f64,
    upper: f64,
}

impl BoxRegion {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidParameter(format!(
                "box requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-half_width, half_width]`.
    pub fn centered(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn clamp_slice(&self, coords: &mut [f64]) {
        for v in coords {
            *v = v.clamp(self.lower, self.upper);
        }
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.iter().all(|&v| v >= self.lower && v <= self.upper)
    }

    pub fn sample(&self, rng: &mut impl Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(self.lower..=self.upper)).collect()
    }
}

/// Outcome of one line search.
#[derive(Debug, Clone, Copy)]
pub struct LineSearchResult {
    /// Chosen step length along the direction.
    pub step: f64,
    /// Whether both Wolfe conditions were confirmed at `step`. When the
    /// probe budget is exhausted this is false and `step` is the probed
    /// point with the lowest value (possibly 0).
    pub verified: bool,
}

/// Wolfe search on a one-dimensional restriction `phi(t)`, given
/// `phi(0) = value0` and `phi'(0) = slope0 < 0`. The callback returns
/// `(value, slope)` at the probed step.
fn wolfe_search_1d<F: FnMut(f64) -> (f64, f64)>(
    mut phi: F,
    value0: f64,
    slope0: f64,
    sigma1: f64,
    sigma2: f64,
    max_iters: usize,
) -> LineSearchResult {
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut t = 1.0f64;
    let mut best_step = 0.0f64;
    let mut best_value = value0;
    for _ in 0..max_iters {
        let (value, slope) = phi(t);
        if value.is_finite() && value < best_value {
            best_value = value;
            best_step = t;
        }
        // NaN counts as a decrease violation and shrinks the bracket.
        if !(value <= value0 + sigma1 * t * slope0) {
            hi = t;
            t = 0.5 * (lo + hi);
        } else if slope < sigma2 * slope0 {
            lo = t;
            t = if hi.is_infinite() { 2.0 * lo } else { 0.5 * (lo + hi) };
        } else {
            return LineSearchResult {
                step: t,
                verified: true,
            };
        }
    }
    LineSearchResult {
        step: best_step,
        verified: false,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Line search on the smoothed objective from `x` along `direction`.
/// `direction` must be a descent direction; the usual caller passes the
/// negative smoothed gradient.
#[allow(clippy::too_many_arguments)]
pub fn wolfe_line_search(
    net: &NetworkInstance,
    coef: &LagrangianCoefficients,
    x: &Configuration,
    direction: &[f64],
    mu: f64,
    sigma1: f64,
    sigma2: f64,
    max_iters: usize,
) -> Result<LineSearchResult> {
    if !(sigma1 > 0.0 && sigma1 < 0.5 && sigma2 > sigma1 && sigma2 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "wolfe constants out of range: sigma1 = {sigma1}, sigma2 = {sigma2}"
        )));
    }
    if direction.len() != x.coords().len() {
        return Err(Error::ShapeMismatch {
            expected: x.coords().len(),
            got: direction.len(),
        });
    }
    if direction.iter().all(|&d| d == 0.0) {
        return Err(Error::NotDescentDirection);
    }
    let eval = evaluate_coords(net, coef, x.coords(), mu)?;
    let slope0 = dot(&eval.gradient, direction);
    if !(slope0 < 0.0) {
        return Err(Error::NotDescentDirection);
    }
    Ok(wolfe_search_1d(
        |t| probe_along(net, coef, x.coords(), direction, t, mu),
        eval.value,
        slope0,
        sigma1,
        sigma2,
        max_iters,
    ))
}

/// Evaluates value and directional slope at `x + t * direction`; numeric
/// failures surface as +inf so the search backs off.
fn probe_along(
    net: &NetworkInstance,
    coef: &LagrangianCoefficients,
    x: &[f64],
    direction: &[f64],
    t: f64,
    mu: f64,
) -> (f64, f64) {
    let trial: Vec<f64> = x
        .iter()
        .zip(direction)
        .map(|(xi, di)| xi + t * di)
        .collect();
    match evaluate_coords(net, coef, &trial, mu) {
        Ok(eval) => (eval.value, dot(&eval.gradient, direction)),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    }
}

/// One recorded descent iteration.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub iter: usize,
    /// Smoothing level during the iteration.
    pub mu: f64,
    /// Smoothed value at the iterate before the step.
    pub smoothed_value: f64,
    /// Gradient norm at the iterate before the step.
    pub grad_norm: f64,
    /// Accepted step length (0 when the iterate did not move).
    pub step: f64,
    /// Whether the step passed both Wolfe conditions.
    pub verified: bool,
    /// Whether the iterate moved.
    pub moved: bool,
    /// The iterate before the step, kept for independent re-verification.
    pub x: Vec<f64>,
}

/// Full iteration trace of one solve.
#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub steps: Vec<StepRecord>,
}

impl SolveTrace {
    /// CSV with one row per outer iteration.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,mu,smoothed_value,grad_norm,step")?;
        for s in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.iter,
                fmt_real(s.mu),
                fmt_real(s.smoothed_value),
                fmt_real(s.grad_norm),
                fmt_real(s.step)
            )?;
        }
        Ok(())
    }
}

/// Result of one minimax minimization.
#[derive(Debug, Clone)]
pub struct MinimaxSolution {
    /// Final iterate.
    pub x_star: Configuration,
    /// Smoothed objective at the final iterate and final `mu`.
    pub smoothed_value: f64,
    /// Exact max-ratio objective at the final iterate.
    pub exact_max_value: f64,
    /// Smoothing level at termination (below `epsilon` iff converged).
    pub final_mu: f64,
    /// Gradient norm recorded at the last smoothing shrink.
    pub final_gradient_norm: f64,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// Runs the smoothing gradient descent from `x0`.
pub fn smoothing_gradient_solve(
    net: &NetworkInstance,
    coef: &LagrangianCoefficients,
    x0: &Configuration,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
) -> Result<MinimaxSolution> {
    solve_inner(net, coef, x0.coords(), box_region, cfg, None)
}

/// As [`smoothing_gradient_solve`], returning the full iteration trace.
pub fn smoothing_gradient_solve_traced(
    net: &NetworkInstance,
    coef: &LagrangianCoefficients,
    x0: &Configuration,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
) -> Result<(MinimaxSolution, SolveTrace)> {
    let mut trace = SolveTrace::default();
    let solution = solve_inner(net, coef, x0.coords(), box_region, cfg, Some(&mut trace))?;
    Ok((solution, trace))
}

fn solve_inner(
    net: &NetworkInstance,
    coef: &LagrangianCoefficients,
    x0: &[f64],
    box_region: &BoxRegion,
    cfg: &SolverConfig,
    mut trace: Option<&mut SolveTrace>,
) -> Result<MinimaxSolution> {
    cfg.validate()?;
    if x0.len() != net.dof() {
        return Err(Error::ShapeMismatch {
            expected: net.dof(),
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    box_region.clamp_slice(&mut x);
    let mut mu = cfg.mu0;
    let mut iterations = 0usize;
    let mut last_shrink_grad_norm = f64::NAN;
    let mut cached: Option<crate::lagrangian::SmoothedEvaluation> = None;

    while mu >= cfg.epsilon && iterations < cfg.max_outer_iterations {
        let eval = match cached.take() {
            Some(e) => e,
            None => evaluate_coords(net, coef, &x, mu)?,
        };
        let grad_norm = norm(&eval.gradient);
        let mut record = trace.is_some().then(|| StepRecord {
            iter: iterations,
            mu,
            smoothed_value: eval.value,
            grad_norm,
            step: 0.0,
            verified: true,
            moved: false,
            x: x.clone(),
        });

        if grad_norm == 0.0 {
            // stationary at this smoothing level
            last_shrink_grad_norm = 0.0;
            mu *= cfg.gamma1;
        } else {
            let direction: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
            let slope0 = -(grad_norm * grad_norm);
            let ls = wolfe_search_1d(
                |t| probe_along(net, coef, &x, &direction, t, mu),
                eval.value,
                slope0,
                cfg.sigma1,
                cfg.sigma2,
                cfg.max_line_search_iterations,
            );
            let mut candidate: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(xi, di)| xi + ls.step * di)
                .collect();
            box_region.clamp_slice(&mut candidate);
            let next = evaluate_coords(net, coef, &candidate, mu)?;
            let accept = ls.step > 0.0
                && if ls.verified {
                    next.value <= eval.value
                } else {
                    next.value < eval.value
                };
            if accept {
                x = candidate;
                if let Some(r) = record.as_mut() {
                    r.step = ls.step;
                    r.verified = ls.verified;
                    r.moved = true;
                }
                let next_grad_norm = norm(&next.gradient);
                if next_grad_norm >= cfg.gamma * mu {
                    cached = Some(next);
                } else {
                    last_shrink_grad_norm = next_grad_norm;
                    mu *= cfg.gamma1;
                }
            } else {
                // no usable step at this smoothing level; shrink instead
                if let Some(r) = record.as_mut() {
                    r.verified = ls.verified;
                }
                last_shrink_grad_norm = grad_norm;
                mu *= cfg.gamma1;
            }
        }
        iterations += 1;
        if let (Some(tr), Some(rec)) = (trace.as_deref_mut(), record) {
            tr.steps.push(rec);
        }
    }

    let converged = mu < cfg.epsilon;
    let final_mu = mu;
    let smoothed = evaluate_coords(net, coef, &x, final_mu)?;
    let final_gradient_norm = if last_shrink_grad_norm.is_nan() {
        norm(&smoothed.gradient)
    } else {
        last_shrink_grad_norm
    };
    Ok(MinimaxSolution {
        smoothed_value: smoothed.value,
        exact_max_value: max_ratio_coords(net, coef, &x)?,
        x_star: Configuration::new(x)?,
        final_mu,
        final_gradient_norm,
        outer_iterations: iterations,
        converged,
    })
}

/// Best solution over several starts plus aggregate counters.
#[derive(Debug, Clone)]
pub struct MultistartOutcome {
    pub best: MinimaxSolution,
    /// Outer iterations summed over every start.
    pub total_outer_iterations: usize,
    /// Trace of the winning run, when requested.
    pub best_trace: Option<SolveTrace>,
}

/// Seeded substream `stream` of the generator identified by `seed`.
pub(crate) fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// An additional start for a multistart minimization, optionally running
/// with its own initial smoothing level (warm starts near a previous
/// solution do not need the full annealing schedule).
#[derive(Debug, Clone)]
pub struct ExtraStart {
    pub x: Configuration,
    pub mu0: Option<f64>,
}

/// Minimizes the smoothed maximum from `multistart_count` seeded random
/// starts plus any `extra_starts`, keeping the solution with the smallest
/// exact objective. Start `i` always samples the same point for a given
/// seed, so growing the start count can only improve the result.
pub fn minimize_lagrangian_with_starts(
    net: &NetworkInstance,
    coef: &LagrangianCoefficients,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
    extra_starts: &[ExtraStart],
    want_trace: bool,
) -> Result<MultistartOutcome> {
    cfg.validate()?;
    let dof = net.dof();
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.multistart_count + extra_starts.len());
    for i in 0..cfg.multistart_count {
        let mut rng = derive_rng(cfg.rng_seed, i as u64);
        starts.push((box_region.sample(&mut rng, dof), cfg.mu0));
    }
    for extra in extra_starts {
        starts.push((extra.x.coords().to_vec(), extra.mu0.unwrap_or(cfg.mu0)));
    }

    let mut best: Option<MinimaxSolution> = None;
    let mut best_trace: Option<SolveTrace> = None;
    let mut total = 0usize;
    let mut first_err: Option<Error> = None;
    for (start, mu0) in &starts {
        let mut tr = want_trace.then(SolveTrace::default);
        let mut cfg_start = cfg.clone();
        cfg_start.mu0 = *mu0;
        match solve_inner(net, coef, start, box_region, &cfg_start, tr.as_mut()) {
            Ok(sol) => {
                total += sol.outer_iterations;
                let better = best
                    .as_ref()
                    .map_or(true, |b| sol.exact_max_value < b.exact_max_value);
                if better {
                    best = Some(sol);
                    best_trace = tr;
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match best {
        Some(b) => Ok(MultistartOutcome {
            best: b,
            total_outer_iterations: total,
            best_trace,
        }),
        None => Err(first_err
            .unwrap_or_else(|| Error::InvalidParameter("multistart produced no runs".into()))),
    }
}

/// Multistart minimization of the exact max-ratio objective.
pub fn minimize_lagrangian(
    net: &NetworkInstance,
    coef: &LagrangianCoefficients,
    box_region: &BoxRegion,
    cfg: &SolverConfig,
) -> Result<MinimaxSolution> {
    minimize_lagrangian_with_starts(net, coef, box_region, cfg, &[], false).map(|o| o.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{smoothed_evaluation, smoothing_gap_bound};
    use crate::network::Edge;
    use approx::assert_abs_diff_eq;

    fn tight_two_node(dist: f64, half_width: f64) -> NetworkInstance {
        let lower = dist - half_width;
        let upper = dist + half_width;
        NetworkInstance::new(
            2,
            vec![Edge {
                i: 0,
                j: 1,
                lower_sq: lower * lower,
                upper_sq: upper * upper,
            }],
        )
        .unwrap()
    }

    /// Independent oracle for the 2-node instance: translation to the
    /// centroid and a rotation reduce any configuration to x = ((a,0),
    /// (-a,0)), so the minimax value is a one-dimensional minimization
    /// solved here on a dense grid.
    fn psi_grid_oracle(lower_sq: f64, upper_sq: f64, c0: f64) -> f64 {
        let value = |a: f64| {
            let sq = 4.0 * a * a;
            let f0 = 2.0 * a * a;
            (f0 / c0)
                .max(sq / upper_sq)
                .max((2.0 * lower_sq - sq) / lower_sq)
        };
        let mut best = f64::INFINITY;
        let mut a = 0.0;
        while a <= 3.0 {
            best = best.min(value(a));
            a += 1e-5;
        }
        best
    }

    #[test]
    fn config_validation_ranges() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());
        for f in [
            |c: &mut SolverConfig| c.sigma1 = 0.0,
            |c: &mut SolverConfig| c.sigma1 = 0.5,
            |c: &mut SolverConfig| c.sigma2 = 1.0,
            |c: &mut SolverConfig| c.sigma2 = 0.05,
            |c: &mut SolverConfig| c.gamma = 0.0,
            |c: &mut SolverConfig| c.gamma1 = 1.0,
            |c: &mut SolverConfig| c.epsilon = 0.0,
            |c: &mut SolverConfig| c.mu0 = -1.0,
            |c: &mut SolverConfig| c.multistart_count = 0,
        ] {
            let mut bad = SolverConfig::default();
            f(&mut bad);
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn quadratic_line_search_hits_the_minimizer() {
        // phi(t) = (1 - 2t)^2: x = 1, d = -2 on f(x) = x^2. The first probe
        // t = 1 violates sufficient decrease, the bisection to t = 0.5
        // lands exactly on the minimizer and satisfies both conditions.
        let phi = |t: f64| {
            let v = (1.0 - 2.0 * t) * (1.0 - 2.0 * t);
            let slope = -4.0 * (1.0 - 2.0 * t);
            (v, slope)
        };
        let res = wolfe_search_1d(phi, 1.0, -4.0, 0.1, 0.9, 60);
        assert!(res.verified);
        assert_eq!(res.step, 0.5);
    }

    #[test]
    fn direction_errors() {
        let net = tight_two_node(2.0, 0.5);
        let coef = LagrangianCoefficients::from_instance(&net, 2.0).unwrap();
        let x = Configuration::from_points(&[(1.0, 0.0), (-1.0, 0.0)]).unwrap();
        let zero = vec![0.0; 4];
        assert!(matches!(
            wolfe_line_search(&net, &coef, &x, &zero, 0.5, 0.1, 0.9, 60),
            Err(Error::NotDescentDirection)
        ));
        // the gradient itself is an ascent direction
        let g = smoothed_evaluation(&net, &coef, &x, 0.5).unwrap().gradient;
        if g.iter().any(|&v| v != 0.0) {
            assert!(matches!(
                wolfe_line_search(&net, &coef, &x, &g, 0.5, 0.1, 0.9, 60),
                Err(Error::NotDescentDirection)
            ));
        }
    }

    #[test]
    fn accepted_steps_satisfy_wolfe_on_recheck() {
        let mut rng = derive_rng(99, 0);
        let net = tight_two_node(2.0, 0.2);
        for trial in 0..100 {
            let c0 = rng.gen_range(0.5..6.0);
            let coef = LagrangianCoefficients::from_instance(&net, c0).unwrap();
            let coords: Vec<f64> = (0..4).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let x = Configuration::new(coords).unwrap();
            let mu = 10f64.powf(rng.gen_range(-3.0..0.0));
            let eval = smoothed_evaluation(&net, &coef, &x, mu).unwrap();
            let gnorm = norm(&eval.gradient);
            if gnorm == 0.0 {
                continue;
            }
            let d: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
            let res = wolfe_line_search(&net, &coef, &x, &d, mu, 0.1, 0.9, 60).unwrap();
            assert!(res.verified, "line search unverified on trial {trial}");
            // independent recheck of both inequalities
            let (value, slope) = probe_along(&net, &coef, x.coords(), &d, res.step, mu);
            let slope0 = -(gnorm * gnorm);
            assert!(value <= eval.value + 0.1 * res.step * slope0);
            assert!(slope >= 0.9 * slope0);
        }
    }

    #[test]
    fn analytic_two_node_minimax() {
        let net = tight_two_node(2.0, 1e-3);
        let coef = LagrangianCoefficients::from_instance(&net, 2.0).unwrap();
        let box_region = BoxRegion::centered(5.0).unwrap();
        let cfg = SolverConfig {
            rng_seed: 42,
            ..SolverConfig::default()
        };
        let oracle = psi_grid_oracle(1.999 * 1.999, 2.001 * 2.001, 2.0);
        // the balance of objective and reflected constraint sits just
        // below 1
        assert_abs_diff_eq!(oracle, 0.9995, epsilon = 1e-3);
        let sol = minimize_lagrangian(&net, &coef, &box_region, &cfg).unwrap();
        assert!(sol.converged);
        assert_abs_diff_eq!(sol.exact_max_value, oracle, epsilon = 1e-2);
    }

    #[test]
    fn stationary_start_shrinks_straight_down() {
        // every constraint gradient vanishes at the origin, so the solve
        // only shrinks mu: 1 -> 2^-14 < 1e-4 in exactly 14 iterations
        let net = tight_two_node(2.0, 0.5);
        let coef = LagrangianCoefficients::from_instance(&net, 2.0).unwrap();
        let x0 = Configuration::from_points(&[(0.0, 0.0), (0.0, 0.0)]).unwrap();
        let box_region = BoxRegion::centered(5.0).unwrap();
        let cfg = SolverConfig::default();
        let sol = smoothing_gradient_solve(&net, &coef, &x0, &box_region, &cfg).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.outer_iterations, 14);
        assert!(sol.final_gradient_norm <= cfg.gamma * cfg.epsilon);
        assert_eq!(sol.x_star.coords(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn trace_is_monotone_at_fixed_mu_and_mu_never_grows() {
        let net = tight_two_node(2.0, 0.1);
        let coef = LagrangianCoefficients::from_instance(&net, 3.0).unwrap();
        let box_region = BoxRegion::centered(5.0).unwrap();
        let cfg = SolverConfig {
            rng_seed: 7,
            ..SolverConfig::default()
        };
        let x0 = Configuration::new(box_region.sample(&mut derive_rng(7, 0), 4)).unwrap();
        let (sol, trace) =
            smoothing_gradient_solve_traced(&net, &coef, &x0, &box_region, &cfg).unwrap();
        assert!(sol.converged);
        assert!(sol.final_mu < cfg.epsilon);
        for pair in trace.steps.windows(2) {
            assert!(pair[1].mu <= pair[0].mu);
            if pair[1].mu == pair[0].mu {
                assert!(
                    pair[1].smoothed_value <= pair[0].smoothed_value,
                    "value rose at fixed mu: {} -> {}",
                    pair[0].smoothed_value,
                    pair[1].smoothed_value
                );
            }
        }
        // sandwich invariant of the returned solution
        let r1 = net.constraint_count() + 1;
        assert!(sol.exact_max_value <= sol.smoothed_value);
        assert!(
            sol.smoothed_value
                <= sol.exact_max_value + smoothing_gap_bound(sol.final_mu, r1) + 1e-12
        );
        // the last shrink was triggered by a small gradient
        assert!(sol.final_gradient_norm <= cfg.gamma * sol.final_mu / cfg.gamma1 + 1e-12);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let net = tight_two_node(2.0, 0.3);
        let coef = LagrangianCoefficients::from_instance(&net, 2.5).unwrap();
        let box_region = BoxRegion::centered(4.0).unwrap();
        let cfg = SolverConfig {
            rng_seed: 21,
            ..SolverConfig::default()
        };
        let x0 = Configuration::new(box_region.sample(&mut derive_rng(21, 0), 4)).unwrap();
        let (a, ta) = smoothing_gradient_solve_traced(&net, &coef, &x0, &box_region, &cfg).unwrap();
        let (b, tb) = smoothing_gradient_solve_traced(&net, &coef, &x0, &box_region, &cfg).unwrap();
        assert_eq!(a.x_star.coords(), b.x_star.coords());
        assert_eq!(a.exact_max_value.to_bits(), b.exact_max_value.to_bits());
        assert_eq!(ta.steps.len(), tb.steps.len());
        for (ra, rb) in ta.steps.iter().zip(tb.steps.iter()) {
            assert_eq!(ra.x, rb.x);
            assert_eq!(ra.step.to_bits(), rb.step.to_bits());
        }
    }

    #[test]
    fn multistart_count_one_equals_first_start() {
        let net = tight_two_node(2.0, 0.2);
        let coef = LagrangianCoefficients::from_instance(&net, 2.0).unwrap();
        let box_region = BoxRegion::centered(5.0).unwrap();
        let cfg = SolverConfig {
            multistart_count: 1,
            rng_seed: 5,
            ..SolverConfig::default()
        };
        let multi = minimize_lagrangian(&net, &coef, &box_region, &cfg).unwrap();
        let x0 = Configuration::new(box_region.sample(&mut derive_rng(5, 0), 4)).unwrap();
        let single = smoothing_gradient_solve(&net, &coef, &x0, &box_region, &cfg).unwrap();
        assert_eq!(multi.x_star.coords(), single.x_star.coords());
        assert_eq!(
            multi.exact_max_value.to_bits(),
            single.exact_max_value.to_bits()
        );
    }

    #[test]
    fn more_starts_never_hurt() {
        let net = tight_two_node(2.0, 0.2);
        let coef = LagrangianCoefficients::from_instance(&net, 2.0).unwrap();
        let box_region = BoxRegion::centered(5.0).unwrap();
        let mut prev = f64::INFINITY;
        for count in 1..=5 {
            let cfg = SolverConfig {
                multistart_count: count,
                rng_seed: 11,
                ..SolverConfig::default()
            };
            let sol = minimize_lagrangian(&net, &coef, &box_region, &cfg).unwrap();
            assert!(sol.exact_max_value <= prev);
            prev = sol.exact_max_value;
        }
    }

    #[test]
    fn warm_start_can_only_improve() {
        let net = tight_two_node(2.0, 1e-3);
        let coef = LagrangianCoefficients::from_instance(&net, 2.0).unwrap();
        let box_region = BoxRegion::centered(5.0).unwrap();
        let cfg = SolverConfig {
            multistart_count: 2,
            rng_seed: 3,
            ..SolverConfig::default()
        };
        let cold = minimize_lagrangian_with_starts(&net, &coef, &box_region, &cfg, &[], false)
            .unwrap()
            .best;
        let warm_point = ExtraStart {
            x: Configuration::from_points(&[(1.0, 0.0), (-1.0, 0.0)]).unwrap(),
            mu0: None,
        };
        let warm =
            minimize_lagrangian_with_starts(&net, &coef, &box_region, &cfg, &[warm_point], false)
                .unwrap()
                .best;
        assert!(warm.exact_max_value <= cold.exact_max_value);
    }
}
