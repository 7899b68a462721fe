//! Seeded Monte Carlo replication of the mixture-normal and
//! mixture-uniform designs.
//!
//! Every replicate draws from its own ChaCha8 stream, `(seed, rep + 1)`;
//! stream 0 is reserved for quantities drawn once for the whole study. The
//! replicates can therefore run in any order or in parallel and still
//! produce the same report.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{fit_cdfdr, FitConfig, NullSpec, TransformMode};

pub const DEFAULT_REPLICATES: usize = 20;
pub const FULL_REPLICATES: usize = 150;

const Z_GRID_MIN: f64 = -6.0;
const Z_GRID_STEP: f64 = 0.05;
const Z_GRID_POINTS: usize = 241;
const U_GRID_HALF: usize = 200;
/// A study fails when more than this fraction of its replicates fail.
const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuRedraw {
    /// Nonnull means drawn once for the whole study.
    Once,
    /// Nonnull means drawn afresh in every replicate.
    PerReplicate,
}

/// `n_null` statistics from N(0, 1) and `n - n_null` from N(μ_i, 1), with
/// μ_i ~ N(μ, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureNormalDesign {
    pub n: usize,
    pub n_null: usize,
    pub mu: f64,
    pub replicates: usize,
    pub seed: u64,
    pub mu_redraw: MuRedraw,
}

impl Default for MixtureNormalDesign {
    fn default() -> Self {
        Self {
            n: 5000,
            n_null: 4500,
            mu: 2.0,
            replicates: DEFAULT_REPLICATES,
            seed: 1,
            mu_redraw: MuRedraw::Once,
        }
    }
}

/// p-values from `π₀ U[0, 1] + (1 - π₀) U[0, a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureUniformDesign {
    pub pi0: f64,
    pub a: f64,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for MixtureUniformDesign {
    fn default() -> Self {
        Self {
            pi0: 0.9,
            a: 0.02,
            n: 5000,
            replicates: DEFAULT_REPLICATES,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "kebab-case")]
pub enum Design {
    Mixnorm(MixtureNormalDesign),
    Mixunif(MixtureUniformDesign),
}

impl MixtureNormalDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n_null > self.n {
            return Err(Error::Config(format!("n_null = {} exceeds n = {}", self.n_null, self.n)));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !self.mu.is_finite() {
            return Err(Error::Config(format!("mu must be finite, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn pi0(&self) -> f64 {
        self.n_null as f64 / self.n as f64
    }
}

impl MixtureUniformDesign {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(Error::Config(format!("pi0 must lie in [0, 1], got {}", self.pi0)));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::Config(format!("a must lie in (0, 1), got {}", self.a)));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        Ok(())
    }
}

impl Design {
    pub fn validate(&self) -> Result<()> {
        match self {
            Design::Mixnorm(d) => d.validate(),
            Design::Mixunif(d) => d.validate(),
        }
    }

    pub fn replicates(&self) -> usize {
        match self {
            Design::Mixnorm(d) => d.replicates,
            Design::Mixunif(d) => d.replicates,
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn replicate_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    stream(seed, rep as u64 + 1)
}

/// Nonnull means used in replicate `rep`.
pub fn nonnull_means(design: &MixtureNormalDesign, rep: usize) -> Vec<f64> {
    let k = design.n - design.n_null;
    let mut rng = match design.mu_redraw {
        MuRedraw::Once => stream(design.seed, 0),
        // the replicate stream, offset so it does not overlap the statistics
        MuRedraw::PerReplicate => {
            let mut rng = replicate_rng(design.seed, rep);
            rng.set_word_pos(1 << 40);
            rng
        }
    };
    (0..k)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            design.mu + e
        })
        .collect()
}

/// Statistics of replicate `rep`: nulls first, then nonnulls.
pub fn gen_mixture_normal(design: &MixtureNormalDesign, rep: usize) -> Vec<f64> {
    let means = nonnull_means(design, rep);
    let mut rng = replicate_rng(design.seed, rep);
    let mut out = Vec::with_capacity(design.n);
    for _ in 0..design.n_null {
        out.push(StandardNormal.sample(&mut rng));
    }
    for mean in means {
        let e: f64 = StandardNormal.sample(&mut rng);
        out.push(mean + e);
    }
    out
}

/// Local fdr of the marginal mixture `π₀ N(0, 1) + (1 - π₀) N(μ, 2)`,
/// evaluated on the log scale so it stays defined far in the tails.
pub fn true_fdr_mixture_normal(z: f64, pi0: f64, mu: f64) -> f64 {
    let log_null = pi0.ln() - 0.5 * z * z;
    let log_alt = (1.0 - pi0).ln() - 0.25 * (z - mu).powi(2) - 0.5 * std::f64::consts::LN_2;
    1.0 / (1.0 + (log_alt - log_null).exp())
}

pub fn gen_mixture_uniform(design: &MixtureUniformDesign, rep: usize) -> Vec<f64> {
    let mut rng = replicate_rng(design.seed, rep);
    (0..design.n)
        .map(|_| {
            let from_null = rng.random::<f64>() < design.pi0;
            let u: f64 = rng.random();
            if from_null { u } else { u * design.a }
        })
        .collect()
}

/// `π₀ / (π₀ + (1 - π₀)/a)` on [0, a] and 1 above.
pub fn true_fdr_mixture_uniform(u: f64, pi0: f64, a: f64) -> f64 {
    if u <= a {
        pi0 / (pi0 + (1.0 - pi0) / a)
    } else {
        1.0
    }
}

/// z from -6 to 6 in steps of 0.05.
pub fn z_grid() -> Vec<f64> {
    (0..Z_GRID_POINTS).map(|i| Z_GRID_MIN + Z_GRID_STEP * i as f64).collect()
}

/// 200 equispaced points on [0, a] followed by 200 on (a, 1].
pub fn u_grid(a: f64) -> Vec<f64> {
    let low = (0..U_GRID_HALF).map(|i| a * i as f64 / (U_GRID_HALF - 1) as f64);
    let high = (1..=U_GRID_HALF).map(|i| a + (1.0 - a) * i as f64 / U_GRID_HALF as f64);
    low.chain(high).collect()
}

/// Trapezoid integral of `(x - y)²` over the grid points inside [lo, hi].
pub fn integrated_squared_error(grid: &[f64], x: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..grid.len() {
        let (g0, g1) = (grid[k - 1], grid[k]);
        if g0 < lo || g1 > hi {
            continue;
        }
        let e0 = (x[k - 1] - y[k - 1]).powi(2);
        let e1 = (x[k] - y[k]).powi(2);
        total += 0.5 * (g1 - g0) * (e0 + e1);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub design: Design,
    pub config: FitConfig,
    pub grid: Vec<f64>,
    pub true_fdr: Vec<f64>,
    pub mean_fdr: Vec<f64>,
    pub sd_fdr: Vec<f64>,
    pub mise: f64,
    /// Over the signal region [0, a]; mixture-uniform only.
    pub tail_mise: Option<f64>,
    /// `sqrt(tail_mise / a)`.
    pub tail_rmse: Option<f64>,
    /// One per successful replicate, in replicate order.
    pub pi0_estimates: Vec<f64>,
    pub n_replicates: usize,
    pub failed_replicates: Vec<usize>,
}

struct Replicate {
    fdr: Vec<f64>,
    pi0: f64,
}

fn run_one(design: &Design, config: &FitConfig, grid: &[f64], rep: usize) -> Result<Replicate> {
    match design {
        Design::Mixnorm(d) => {
            let stats = gen_mixture_normal(d, rep);
            let config = FitConfig { mode: TransformMode::Pit, ..*config };
            let model = fit_cdfdr(&stats, &NullSpec::StandardNormal, &config)?.model;
            Ok(Replicate {
                fdr: grid.iter().map(|&z| model.local_fdr(z)).collect(),
                pi0: model.pi0,
            })
        }
        Design::Mixunif(d) => {
            let u = gen_mixture_uniform(d, rep);
            let model = fit_cdfdr(&u, &NullSpec::PrecomputedPvalues, config)?.model;
            Ok(Replicate {
                fdr: grid.iter().map(|&u| model.local_fdr_at_pvalue(u)).collect(),
                pi0: model.pi0,
            })
        }
    }
}

/// Runs every replicate of `design` and aggregates pointwise.
///
/// `threads = 0` uses the rayon default. Results are gathered by replicate
/// index before any reduction, so the report does not depend on the
/// thread count or scheduling.
pub fn run_replicates(design: &Design, config: &FitConfig, threads: usize) -> Result<SimReport> {
    design.validate()?;
    let (grid, true_fdr, signal) = match design {
        Design::Mixnorm(d) => {
            let grid = z_grid();
            let truth: Vec<f64> = grid.iter().map(|&z| true_fdr_mixture_normal(z, d.pi0(), d.mu)).collect();
            (grid, truth, None)
        }
        Design::Mixunif(d) => {
            let grid = u_grid(d.a);
            let truth: Vec<f64> = grid.iter().map(|&u| true_fdr_mixture_uniform(u, d.pi0, d.a)).collect();
            (grid, truth, Some(d.a))
        }
    };

    let reps = design.replicates();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Harness(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Replicate>> =
        pool.install(|| (0..reps).into_par_iter().map(|rep| run_one(design, config, &grid, rep)).collect());

    let mut ok = Vec::with_capacity(reps);
    let mut failed = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => ok.push(r),
            Err(_) => failed.push(rep),
        }
    }
    if ok.is_empty() || failed.len() as f64 > MAX_FAILURE_RATE * reps as f64 {
        return Err(Error::Harness(format!("{} of {reps} replicates failed", failed.len())));
    }

    let count = ok.len() as f64;
    let points = grid.len();
    let mut mean_fdr = vec![0.0; points];
    for r in &ok {
        for (m, f) in mean_fdr.iter_mut().zip(&r.fdr) {
            *m += f;
        }
    }
    mean_fdr.iter_mut().for_each(|m| *m /= count);
    let sd_fdr = if ok.len() < 2 {
        vec![0.0; points]
    } else {
        (0..points)
            .map(|k| {
                let ss: f64 = ok.iter().map(|r| (r.fdr[k] - mean_fdr[k]).powi(2)).sum();
                (ss / (count - 1.0)).sqrt()
            })
            .collect()
    };

    let (lo, hi) = (grid[0], grid[points - 1]);
    let mise = ok
        .iter()
        .map(|r| integrated_squared_error(&grid, &r.fdr, &true_fdr, lo, hi))
        .sum::<f64>()
        / count;
    let tail_mise = signal.map(|a| {
        ok.iter()
            .map(|r| integrated_squared_error(&grid, &r.fdr, &true_fdr, 0.0, a))
            .sum::<f64>()
            / count
    });
    let tail_rmse = signal.zip(tail_mise).map(|(a, m)| (m / a).sqrt());

    Ok(SimReport {
        design: *design,
        config: *config,
        grid,
        true_fdr,
        mean_fdr,
        sd_fdr,
        mise,
        tail_mise,
        tail_rmse,
        pi0_estimates: ok.iter().map(|r| r.pi0).collect(),
        n_replicates: reps,
        failed_replicates: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let z = z_grid();
        assert_eq!(z.len(), 241);
        assert_eq!(z[0], -6.0);
        assert!((z[240] - 6.0).abs() < 1e-12);
        let u = u_grid(0.02);
        assert_eq!(u.len(), 400);
        assert_eq!(u[0], 0.0);
        assert!((u[199] - 0.02).abs() < 1e-15);
        assert!(u[200] > 0.02);
        assert!((u[399] - 1.0).abs() < 1e-15);
        assert!(u.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn true_fdr_values() {
        let want = 0.9 / (0.9 + 0.1 / std::f64::consts::SQRT_2);
        assert!((true_fdr_mixture_normal(0.0, 0.9, 0.0) - want).abs() < 1e-14);
        assert!((true_fdr_mixture_normal(0.0, 0.9, 0.0) - 0.927).abs() < 1e-3);
        assert!(true_fdr_mixture_normal(40.0, 0.9, 2.0) < 1e-100);
        assert!(true_fdr_mixture_normal(-40.0, 0.9, 2.0) < 1e-100);
        assert_eq!(true_fdr_mixture_normal(1.0, 1.0, 2.0), 1.0);
        assert_eq!(true_fdr_mixture_normal(1.0, 0.0, 2.0), 0.0);
        for z in [0.3, 1.0, 2.5] {
            assert_eq!(true_fdr_mixture_normal(z, 0.9, 0.0), true_fdr_mixture_normal(-z, 0.9, 0.0));
        }
        assert!((true_fdr_mixture_uniform(0.01, 0.9, 0.02) - 0.9 / 5.9).abs() < 1e-15);
        assert!((true_fdr_mixture_uniform(0.001, 0.99, 0.002) - 0.99 / 5.99).abs() < 1e-15);
        assert_eq!(true_fdr_mixture_uniform(0.5, 0.9, 0.02), 1.0);
    }

    #[test]
    fn mixture_normal_generation() {
        let design = MixtureNormalDesign { mu: 0.0, ..Default::default() };
        let x = gen_mixture_normal(&design, 0);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 3.0 / (x.len() as f64).sqrt());
        assert_eq!(x, gen_mixture_normal(&design, 0));
        assert_ne!(x, gen_mixture_normal(&design, 1));

        let design = MixtureNormalDesign { mu_redraw: MuRedraw::PerReplicate, ..Default::default() };
        let x = gen_mixture_normal(&design, 3);
        let block = &x[design.n_null..];
        let m = block.iter().sum::<f64>() / block.len() as f64;
        let var = block.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (block.len() - 1) as f64;
        assert!((var - 2.0).abs() <= 0.2, "variance {var}");

        let once = MixtureNormalDesign::default();
        assert_eq!(nonnull_means(&once, 0), nonnull_means(&once, 5));
        assert_ne!(nonnull_means(&design, 0), nonnull_means(&design, 5));
    }

    #[test]
    fn mixture_uniform_generation() {
        let design = MixtureUniformDesign { pi0: 1.0, ..Default::default() };
        let mut u = gen_mixture_uniform(&design, 0);
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / n.sqrt());

        let design = MixtureUniformDesign { n: 200_000, ..Default::default() };
        let u = gen_mixture_uniform(&design, 0);
        let frac = u.iter().filter(|&&x| x <= 0.02).count() as f64 / u.len() as f64;
        assert!((frac - 0.118).abs() < 0.005);
        assert_eq!(u, gen_mixture_uniform(&design, 0));
    }

    #[test]
    fn squared_error_restriction() {
        let grid = u_grid(0.02);
        let x: Vec<f64> = grid.iter().map(|u| u * u).collect();
        let y = vec![0.0; grid.len()];
        let full = integrated_squared_error(&grid, &x, &y, 0.0, 1.0);
        assert_eq!(full, integrated_squared_error(&grid, &x, &y, grid[0], grid[grid.len() - 1]));
        assert!((full - 0.2).abs() < 1e-4);
        let tail = integrated_squared_error(&grid, &x, &y, 0.0, 0.02);
        assert!(tail >= 0.0 && tail < full);
    }

    #[test]
    fn single_replicate_has_zero_sd() {
        let design = Design::Mixnorm(MixtureNormalDesign { replicates: 1, ..Default::default() });
        let report = run_replicates(&design, &FitConfig::default(), 1).unwrap();
        assert!(report.sd_fdr.iter().all(|&s| s == 0.0));
        assert_eq!(report.pi0_estimates.len(), 1);
        assert!(report.mise >= 0.0);
        assert!(report.tail_mise.is_none());
    }

    #[test]
    fn thread_count_does_not_change_report() {
        let design = Design::Mixunif(MixtureUniformDesign { replicates: 4, n: 2000, ..Default::default() });
        let a = run_replicates(&design, &FitConfig::default(), 1).unwrap();
        let b = run_replicates(&design, &FitConfig::default(), 3).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.sd_fdr.iter().all(|&s| s >= 0.0));
        assert!(a.tail_mise.unwrap() >= 0.0);
    }

    #[test]
    fn invalid_designs() {
        let bad = Design::Mixunif(MixtureUniformDesign { pi0: 1.5, ..Default::default() });
        assert!(matches!(run_replicates(&bad, &FitConfig::default(), 1), Err(Error::Config(_))));
        let bad = Design::Mixunif(MixtureUniformDesign { a: 1.0, ..Default::default() });
        assert!(bad.validate().is_err());
        let bad = Design::Mixnorm(MixtureNormalDesign { n_null: 6000, ..Default::default() });
        assert!(bad.validate().is_err());
        let bad = Design::Mixnorm(MixtureNormalDesign { replicates: 0, ..Default::default() });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn too_many_failures_is_a_harness_error() {
        // n below the pipeline minimum makes every replicate fail
        let design = Design::Mixunif(MixtureUniformDesign { n: 50, replicates: 3, ..Default::default() });
        assert!(matches!(run_replicates(&design, &FitConfig::default(), 1), Err(Error::Harness(_))));
    }
}
