//! Experiment harness: random instances, rigid alignment, error metrics,
//! and density sweeps.
//!
//! Instances are generated on a square field: node positions uniform in
//! the square, a uniform random connected edge subset, and one signed
//! uniform noise sample per edge distance. The noisy measurement `d + e`
//! with `e` in `[-eta, eta]` becomes the bound pair
//! `[max(delta_min, d + e - eta), d + e + eta]`, widened minimally if the
//! floor would exclude the true distance, so the generating configuration
//! is always feasible.
//!
//! Estimates are compared to the truth modulo rigid motions: a closed-form
//! planar Procrustes alignment (translation, rotation, and reflection when
//! it lowers the squared error) precedes the per-node offset metrics.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fileio::fmt_real;
use crate::network::{Configuration, Edge, NetworkInstance, DIMENSION};
use crate::root::{LocalizationResult, RootFinder, DEFAULT_ROOT_TOL};
use crate::solver::{BoxRegion, SolverConfig};

/// Smallest admissible lower distance bound.
pub const DELTA_MIN: f64 = 1e-3;

/// Parameters of one random instance.
#[derive(Debug, Clone)]
pub struct GenerationSpec {
    pub n: usize,
    pub field_lower: f64,
    pub field_upper: f64,
    /// Desired fraction of the `n (n - 1) / 2` possible edges, in (0, 1].
    pub target_density: f64,
    /// Noise half-range as a fraction of the field diameter, in [0, 0.5].
    pub noise_fraction: f64,
    pub rng_seed: u64,
}

impl GenerationSpec {
    pub fn new(n: usize, target_density: f64, noise_fraction: f64, rng_seed: u64) -> Self {
        Self {
            n,
            field_lower: 0.0,
            field_upper: 10.0,
            target_density,
            noise_fraction,
            rng_seed,
        }
    }

    /// Edge count implied by the target density.
    pub fn edge_count(&self) -> usize {
        let max_edges = self.n * (self.n - 1) / 2;
        (self.target_density * max_edges as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 nodes, got {}",
                self.n
            )));
        }
        if !(self.field_lower.is_finite()
            && self.field_upper.is_finite()
            && self.field_lower < self.field_upper)
        {
            return Err(Error::InvalidParameter(format!(
                "field bounds must satisfy lower < upper, got [{}, {}]",
                self.field_lower, self.field_upper
            )));
        }
        if !(self.target_density > 0.0 && self.target_density <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target density must lie in (0, 1], got {}",
                self.target_density
            )));
        }
        if !(0.0..=0.5).contains(&self.noise_fraction) {
            return Err(Error::InvalidParameter(format!(
                "noise fraction must lie in [0, 0.5], got {}",
                self.noise_fraction
            )));
        }
        if self.edge_count() < self.n - 1 {
            return Err(Error::InvalidParameter(format!(
                "density {} yields {} edges, below the {} needed for connectivity",
                self.target_density,
                self.edge_count(),
                self.n - 1
            )));
        }
        Ok(())
    }
}

/// A generated instance together with the configuration that produced it.
#[derive(Debug, Clone)]
pub struct TruthAndInstance {
    pub truth: Configuration,
    pub instance: NetworkInstance,
}

fn connected(n: usize, pairs: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut components = n;
    for &(i, j) in pairs {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            components -= 1;
        }
    }
    components == 1
}

/// Samples a random instance whose ground truth is feasible by
/// construction. Edge subsets are resampled until the graph is connected.
pub fn generate_network(spec: &GenerationSpec) -> Result<TruthAndInstance> {
    spec.validate()?;
    let n = spec.n;
    let n0 = spec.edge_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let coords: Vec<f64> = (0..DIMENSION * n)
        .map(|_| rng.gen_range(spec.field_lower..=spec.field_upper))
        .collect();

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    let mut chosen: Option<Vec<(usize, usize)>> = None;
    for _ in 0..1000 {
        for k in 0..n0 {
            let j = rng.gen_range(k..pairs.len());
            pairs.swap(k, j);
        }
        if connected(n, &pairs[..n0]) {
            let mut subset = pairs[..n0].to_vec();
            subset.sort_unstable();
            chosen = Some(subset);
            break;
        }
    }
    let chosen = chosen.ok_or_else(|| {
        Error::Generation(format!(
            "no connected edge subset of size {n0} found in 1000 attempts"
        ))
    })?;

    let diameter = (spec.field_upper - spec.field_lower) * std::f64::consts::SQRT_2;
    let eta = spec.noise_fraction * diameter;
    let mut edges = Vec::with_capacity(n0);
    for &(i, j) in &chosen {
        let dx = coords[DIMENSION * i] - coords[DIMENSION * j];
        let dy = coords[DIMENSION * i + 1] - coords[DIMENSION * j + 1];
        let dist = (dx * dx + dy * dy).sqrt();
        if dist <= 0.0 {
            return Err(Error::Generation(format!(
                "nodes {i} and {j} coincide; cannot bound their distance"
            )));
        }
        let noisy = dist + rng.gen_range(-eta..=eta);
        let mut lower = (noisy - eta).max(DELTA_MIN);
        if lower > dist {
            lower = dist;
        }
        let mut upper = noisy + eta;
        if upper < dist {
            upper = dist;
        }
        edges.push(Edge {
            i,
            j,
            lower_sq: lower * lower,
            upper_sq: upper * upper,
        });
    }
    Ok(TruthAndInstance {
        truth: Configuration::new(coords)?,
        instance: NetworkInstance::new(n, edges)?,
    })
}

fn centroid(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
    (sx / n, sy / n)
}

/// Optimal rigid alignment of `estimate` onto `truth`: translation plus
/// rotation, with a reflection exactly when it lowers the sum of squared
/// offsets. Coincident estimates degrade to pure translation.
pub fn align(estimate: &Configuration, truth: &Configuration) -> Result<Configuration> {
    if estimate.coords().len() != truth.coords().len() {
        return Err(Error::ShapeMismatch {
            expected: truth.coords().len(),
            got: estimate.coords().len(),
        });
    }
    let est: Vec<(f64, f64)> = estimate.points().collect();
    let tru: Vec<(f64, f64)> = truth.points().collect();
    if est.len() < 2 {
        return Err(Error::InvalidParameter(
            "alignment needs at least 2 nodes".into(),
        ));
    }
    let ce = centroid(&est);
    let ct = centroid(&tru);

    // cross-covariance terms for the rotation-only and reflected branches
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let (mut ar, mut br) = (0.0f64, 0.0f64);
    for ((ex, ey), (tx, ty)) in est.iter().zip(tru.iter()) {
        let (ex, ey) = (ex - ce.0, ey - ce.1);
        let (tx, ty) = (tx - ct.0, ty - ct.1);
        a += ex * tx + ey * ty;
        b += ex * ty - ey * tx;
        ar += ex * tx - ey * ty;
        br += ex * ty + ey * tx;
    }
    // the aligned correlation is sqrt(a^2 + b^2); reflect only when the
    // reflected branch is strictly better
    let reflect = ar.hypot(br) > a.hypot(b);
    let (a, b) = if reflect { (ar, br) } else { (a, b) };
    let theta = b.atan2(a);
    let (sin, cos) = theta.sin_cos();

    let mut out = Vec::with_capacity(estimate.coords().len());
    for (ex, ey) in est {
        let (ex, ey) = (ex - ce.0, ey - ce.1);
        let ey = if reflect { -ey } else { ey };
        out.push(cos * ex - sin * ey + ct.0);
        out.push(sin * ex + cos * ey + ct.1);
    }
    Configuration::new(out)
}

/// Offsets without any alignment, one per node.
pub fn offsets_raw(truth: &Configuration, estimate: &Configuration) -> Result<Vec<f64>> {
    if estimate.coords().len() != truth.coords().len() {
        return Err(Error::ShapeMismatch {
            expected: truth.coords().len(),
            got: estimate.coords().len(),
        });
    }
    Ok(truth
        .points()
        .zip(estimate.points())
        .map(|((tx, ty), (ex, ey))| (tx - ex).hypot(ty - ey))
        .collect())
}

/// Positional accuracy of an estimate against the truth.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// Mean per-node offset after alignment.
    pub mean_error: f64,
    /// Largest per-node offset after alignment.
    pub max_error: f64,
    pub per_node_offsets: Vec<f64>,
    /// Instance density when known (NaN when the report was computed from
    /// bare position files).
    pub density: f64,
    pub aligned_estimate: Configuration,
}

/// Aligns the estimate onto the truth, then reports per-node offsets and
/// their mean and max.
pub fn error_metrics(truth: &Configuration, estimate: &Configuration) -> Result<ErrorReport> {
    let aligned = align(estimate, truth)?;
    let offsets = offsets_raw(truth, &aligned)?;
    let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    let max = offsets.iter().cloned().fold(0.0f64, f64::max);
    Ok(ErrorReport {
        mean_error: mean,
        max_error: max,
        per_node_offsets: offsets,
        density: f64::NAN,
        aligned_estimate: aligned,
    })
}

/// Localization knobs derived from the generation field.
#[derive(Debug, Clone, Copy)]
pub struct LocalizeOptions {
    /// Half-width of the symmetric solve box.
    pub box_half_width: f64,
    /// Starting budget for the bracket search.
    pub c_init: f64,
    pub root_tol: f64,
    pub c_tol: f64,
}

impl LocalizeOptions {
    /// Scales for an instance drawn from a square field of the given
    /// extent: the box spans one field extent on each side of the origin
    /// and the budget starts at the box-corner objective scale.
    pub fn for_field(n: usize, field_extent: f64) -> Self {
        let m = field_extent;
        let c_init = n as f64 * m * m * DIMENSION as f64 / 4.0;
        Self {
            box_half_width: m,
            c_init,
            root_tol: DEFAULT_ROOT_TOL,
            c_tol: 1e-3 * c_init,
        }
    }
}

/// Bracket plus bisection on one instance.
pub fn localize_instance(
    net: &NetworkInstance,
    cfg: &SolverConfig,
    opts: &LocalizeOptions,
) -> Result<LocalizationResult> {
    let box_region = BoxRegion::centered(opts.box_half_width)?;
    let mut finder = RootFinder::new(net, box_region, cfg.clone(), opts.root_tol, opts.c_tol)?;
    finder.localize(opts.c_init)
}

/// Density sweep inputs.
#[derive(Debug, Clone)]
pub struct SweepParams {
    /// Densities in ascending order.
    pub densities: Vec<f64>,
    pub trials_per_density: usize,
    pub n: usize,
    pub noise_fraction: f64,
    pub field_lower: f64,
    pub field_upper: f64,
    pub solver: SolverConfig,
    pub rng_seed: u64,
    /// Worker threads for the trials.
    pub jobs: usize,
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.densities.is_empty() {
            return Err(Error::InvalidParameter("no densities given".into()));
        }
        if self.densities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "densities must be strictly ascending".into(),
            ));
        }
        if self.trials_per_density == 0 {
            return Err(Error::InvalidParameter(
                "trials_per_density must be at least 1".into(),
            ));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidParameter("jobs must be at least 1".into()));
        }
        self.solver.validate()
    }
}

/// One aggregated sweep row; averages cover successful trials only.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub density: f64,
    pub avg_mean_error: f64,
    pub avg_max_error: f64,
    /// Successful trials included in the averages.
    pub trials: usize,
    /// Trials that failed to bracket or converge, excluded from averages.
    pub failures: usize,
}

/// Outcome of one sweep trial.
#[derive(Debug, Clone)]
enum TrialRecord {
    Success { mean_error: f64, max_error: f64 },
    Failure,
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-(tag, density, trial) seed stream.
pub(crate) fn derive_seed(master: u64, tag: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(mix64(master) ^ tag) ^ a) ^ b)
}

/// Generates, localizes, and scores a single trial.
pub fn run_trial(
    params: &SweepParams,
    density_index: usize,
    trial_index: usize,
) -> Result<(TruthAndInstance, LocalizationResult, ErrorReport)> {
    let di = density_index as u64;
    let ti = trial_index as u64;
    let spec = GenerationSpec {
        n: params.n,
        field_lower: params.field_lower,
        field_upper: params.field_upper,
        target_density: params.densities[density_index],
        noise_fraction: params.noise_fraction,
        rng_seed: derive_seed(params.rng_seed, 1, di, ti),
    };
    let generated = generate_network(&spec)?;
    let mut cfg = params.solver.clone();
    cfg.rng_seed = derive_seed(params.rng_seed, 2, di, ti);
    let opts = LocalizeOptions::for_field(params.n, params.field_upper - params.field_lower);
    let result = localize_instance(&generated.instance, &cfg, &opts)?;
    let mut report = error_metrics(&generated.truth, &result.x_star)?;
    report.density = generated.instance.density();
    Ok((generated, result, report))
}

/// Runs every (density, trial) pair and aggregates averages per density.
/// Failed trials (generation, bracketing, or convergence failures) are
/// counted and excluded from the averages. Results are reduced in trial
/// order, so the table is identical for any job count.
pub fn density_sweep(params: &SweepParams) -> Result<Vec<SweepRow>> {
    params.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;

    let records: Vec<Vec<TrialRecord>> = pool.install(|| {
        (0..params.densities.len())
            .into_par_iter()
            .map(|di| {
                (0..params.trials_per_density)
                    .into_par_iter()
                    .map(|ti| match run_trial(params, di, ti) {
                        Ok((_, result, report)) if result.converged => TrialRecord::Success {
                            mean_error: report.mean_error,
                            max_error: report.max_error,
                        },
                        _ => TrialRecord::Failure,
                    })
                    .collect()
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(params.densities.len());
    for (di, density) in params.densities.iter().enumerate() {
        let mut sum_mean = 0.0;
        let mut sum_max = 0.0;
        let mut successes = 0usize;
        let mut failures = 0usize;
        for rec in &records[di] {
            match rec {
                TrialRecord::Success {
                    mean_error,
                    max_error,
                } => {
                    sum_mean += mean_error;
                    sum_max += max_error;
                    successes += 1;
                }
                TrialRecord::Failure => failures += 1,
            }
        }
        rows.push(SweepRow {
            density: *density,
            avg_mean_error: sum_mean / successes as f64,
            avg_max_error: sum_max / successes as f64,
            trials: successes,
            failures,
        });
    }
    Ok(rows)
}

/// Sweep table as CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("density,avg_mean_error,avg_max_error,trials,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_real(r.density),
            fmt_real(r.avg_mean_error),
            fmt_real(r.avg_max_error),
            r.trials,
            r.failures
        );
    }
    out
}

/// Per-node scatter rows (truth vs aligned estimate) as CSV.
pub fn scatter_csv(truth: &Configuration, report: &ErrorReport) -> String {
    let mut out = String::from("node,truth_x,truth_y,est_x,est_y,offset\n");
    for (i, ((tx, ty), (ex, ey))) in truth
        .points()
        .zip(report.aligned_estimate.points())
        .enumerate()
    {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            fmt_real(tx),
            fmt_real(ty),
            fmt_real(ex),
            fmt_real(ey),
            fmt_real(report.per_node_offsets[i])
        );
    }
    out
}

/// Static SVG scatter: circles for truth, crosses for estimates, and a
/// segment per node joining the two.
pub fn scatter_svg(truth: &Configuration, report: &ErrorReport) -> String {
    let est = &report.aligned_estimate;
    let xs: Vec<f64> = truth
        .coords()
        .iter()
        .step_by(2)
        .chain(est.coords().iter().step_by(2))
        .cloned()
        .collect();
    let ys: Vec<f64> = truth.coords()[1..]
        .iter()
        .step_by(2)
        .chain(est.coords()[1..].iter().step_by(2))
        .cloned()
        .collect();
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1, y0, y1) = (min(&xs), max(&xs), min(&ys), max(&ys));
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let pad = 0.05 * span;
    let view = span + 2.0 * pad;
    let size = 640.0;
    let scale = size / view;
    let map = |x: f64, y: f64| {
        (
            (x - x0 + pad) * scale,
            // svg y grows downward
            size - (y - y0 + pad) * scale,
        )
    };
    let marker = 0.008 * size;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(out, "<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>");
    for ((tx, ty), (ex, ey)) in truth.points().zip(est.points()) {
        let (tx, ty) = map(tx, ty);
        let (ex, ey) = map(ex, ey);
        let _ = writeln!(
            out,
            "<line class=\"offset\" x1=\"{tx:.2}\" y1=\"{ty:.2}\" x2=\"{ex:.2}\" y2=\"{ey:.2}\" stroke=\"#999999\" stroke-width=\"1\"/>"
        );
    }
    for (tx, ty) in truth.points() {
        let (cx, cy) = map(tx, ty);
        let _ = writeln!(
            out,
            "<circle class=\"truth\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{marker:.2}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>"
        );
    }
    for (ex, ey) in est.points() {
        let (cx, cy) = map(ex, ey);
        let (x_lo, x_hi) = (cx - marker, cx + marker);
        let (y_lo, y_hi) = (cy - marker, cy + marker);
        let _ = writeln!(
            out,
            "<path class=\"est\" d=\"M {x_lo:.2} {y_lo:.2} L {x_hi:.2} {y_hi:.2} M {x_lo:.2} {y_hi:.2} L {x_hi:.2} {y_lo:.2}\" stroke=\"#d62728\" stroke-width=\"1.5\" fill=\"none\"/>"
        );
    }
    out.push_str("</svg>\n");
    out
}
