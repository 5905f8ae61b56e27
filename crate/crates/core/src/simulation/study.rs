use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DidError, Result};
use crate::estimators::{estimate, Method};
use crate::panel::{build_design, CovariateSpec};

use super::{draw_replication, efficiency_bound, BoundEstimate, DgpConfig, StandardizationConstants, COVARIATE_NAMES};

/// Independent generator for replication `rep` of a study seeded by `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub dgp: DgpConfig,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Oracle draws for the efficiency bound; `None` skips it.
    pub bound_draws: Option<usize>,
}

impl StudyConfig {
    pub fn new(dgp: DgpConfig, reps: usize, seed: u64) -> Self {
        StudyConfig { dgp, reps, seed, methods: Method::ALL.to_vec(), bound_draws: None }
    }
}

/// Per-estimator Monte Carlo summary. Bias is measured against the true ATT
/// of zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub method: Method,
    pub av_bias: f64,
    pub med_bias: f64,
    pub rmse: f64,
    pub asy_v: f64,
    pub cover: f64,
    pub cil: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<MetricsRow>,
    pub efficiency_bound: Option<BoundEstimate>,
    /// Mean treated share across replications.
    pub mean_treated_share: f64,
    /// Total units whose simulated propensity hit the clamp.
    pub clamped_propensities: usize,
}

impl StudyReport {
    pub fn row(&self, method: Method) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub const CSV_HEADER: [&'static str; 13] = [
        "dgp", "n", "reps", "seed", "method", "av_bias", "med_bias", "rmse", "asy_v", "cover", "cil",
        "failures", "efficiency_bound",
    ];

    /// One row per method, full precision.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(Self::CSV_HEADER)?;
        let bound = self.efficiency_bound.as_ref().map_or(String::new(), |b| b.value.to_string());
        let c = &self.config;
        for r in &self.rows {
            wtr.write_record([
                c.dgp.dgp_id.to_string(),
                c.dgp.n.to_string(),
                c.reps.to_string(),
                c.seed.to_string(),
                r.method.label().to_string(),
                r.av_bias.to_string(),
                r.med_bias.to_string(),
                r.rmse.to_string(),
                r.asy_v.to_string(),
                r.cover.to_string(),
                r.cil.to_string(),
                r.failures.to_string(),
                bound.clone(),
            ])?;
        }
        wtr.flush()
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    tau: f64,
    asy_var: f64,
    covers: bool,
    ci_length: f64,
}

struct RepResult {
    per_method: Vec<Option<Outcome>>,
    treated_share: f64,
    clamped: usize,
}

fn run_replication(cfg: &StudyConfig, consts: &StandardizationConstants, rep: usize) -> RepResult {
    let mut rng = replication_rng(cfg.seed, rep as u64);
    let sim = draw_replication(&cfg.dgp, consts, &mut rng);
    let ds = &sim.dataset;
    let spec = CovariateSpec::linear(&COVARIATE_NAMES).expect("distinct names");
    let design = build_design(ds, &spec);
    let dy = ds.delta_y();
    let per_method = cfg
        .methods
        .iter()
        .map(|&m| {
            let x = design.as_ref().ok()?;
            let r = estimate(m, x, &dy, ds.d()).ok()?;
            Some(Outcome { tau: r.tau, asy_var: r.asy_var, covers: r.covers(sim.true_att), ci_length: r.ci_length() })
        })
        .collect();
    RepResult { per_method, treated_share: ds.n_treated() as f64 / ds.n() as f64, clamped: sim.clamped }
}

fn summarize(method: Method, outcomes: &[Outcome], failures: usize) -> MetricsRow {
    let k = outcomes.len() as f64;
    let mean = |f: fn(&Outcome) -> f64| outcomes.iter().map(f).sum::<f64>() / k;
    let mut taus: Vec<f64> = outcomes.iter().map(|o| o.tau).collect();
    MetricsRow {
        method,
        av_bias: mean(|o| o.tau),
        med_bias: median(&mut taus),
        rmse: mean(|o| o.tau * o.tau).sqrt(),
        asy_v: mean(|o| o.asy_var),
        cover: outcomes.iter().filter(|o| o.covers).count() as f64 / k,
        cil: mean(|o| o.ci_length),
        successes: outcomes.len(),
        failures,
    }
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Runs the Monte Carlo study on the current rayon pool. Replication `r`
/// draws from [`replication_rng`]`(seed, r)` and results are reduced in
/// replication order, so the report does not depend on the thread count.
/// Replications where an estimator fails are dropped for that estimator
/// and counted in `failures`.
pub fn run_study(cfg: &StudyConfig, consts: &StandardizationConstants) -> Result<StudyReport> {
    if cfg.reps == 0 {
        return Err(DidError::OutOfDomain("reps must be at least 1".into()));
    }
    if cfg.methods.is_empty() {
        return Err(DidError::OutOfDomain("no estimators selected".into()));
    }
    let results: Vec<RepResult> = (0..cfg.reps).into_par_iter().map(|r| run_replication(cfg, consts, r)).collect();

    let rows = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let ok: Vec<Outcome> = results.iter().filter_map(|r| r.per_method[j]).collect();
            summarize(m, &ok, cfg.reps - ok.len())
        })
        .collect();
    let efficiency_bound = match cfg.bound_draws {
        Some(draws) => Some(efficiency_bound(&cfg.dgp, draws, cfg.seed, consts)?),
        None => None,
    };
    Ok(StudyReport {
        config: cfg.clone(),
        rows,
        efficiency_bound,
        mean_treated_share: results.iter().map(|r| r.treated_share).sum::<f64>() / cfg.reps as f64,
        clamped_propensities: results.iter().map(|r| r.clamped).sum(),
    })
}

/// [`run_study`] on a dedicated pool with `threads` workers.
pub fn run_study_with_threads(
    cfg: &StudyConfig,
    consts: &StandardizationConstants,
    threads: usize,
) -> Result<StudyReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| DidError::OutOfDomain(format!("thread pool: {e}")))?;
    pool.install(|| run_study(cfg, consts))
}
