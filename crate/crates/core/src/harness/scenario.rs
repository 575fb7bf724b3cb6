use super::{HarnessError, ScenarioConfig};
use crate::bath::{ou_path, BathPath};
use crate::cpt::CptParams;
use crate::crlb::CrlbReport;
use crate::estimators::{
    estimation_variance, run_average_count, run_ou_bayes, run_simple_bayes, EstimateSeries, GridModel, VarianceSummary,
};
use crate::photon::{bin_events, sse_trajectory, steady_emission_counts, thin_detect, CountSeries};
use crate::seed::{derive, Purpose};
use rayon::prelude::*;
use serde::Serialize;

/// One Monte Carlo run. `truth` is the bath sampled at each bin start.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub truth: BathPath,
    pub counts: CountSeries,
    pub average: EstimateSeries,
    pub simple: EstimateSeries,
    pub ou: EstimateSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub runs: usize,
    pub bins_analyzed: usize,
    pub bath_variance: f64,
    pub var_average: VarianceSummary,
    pub var_simple: VarianceSummary,
    pub var_ou: VarianceSummary,
    pub crlb: CrlbReport,
    pub mean_rate: f64,
    pub mean_rate_se: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub records: Vec<RunRecord>,
    pub summary: ScenarioSummary,
}

pub(crate) fn simulate_bath(cfg: &ScenarioConfig, run: usize) -> Result<BathPath, HarnessError> {
    let b = cfg.bath_params()?;
    let mut rng = derive(cfg.master_seed, run as u64, Purpose::Bath);
    Ok(ou_path(&b, cfg.sim.duration_s, cfg.sim.bath_dt_s, &mut rng)?)
}

fn steady_counts(cfg: &ScenarioConfig, p: &CptParams, bath: &BathPath, run: usize) -> Result<CountSeries, HarnessError> {
    let mut rng = derive(cfg.master_seed, run as u64, Purpose::Counts);
    Ok(steady_emission_counts(p, bath, cfg.sim.update_interval_s, &mut rng)?)
}

fn sse_counts(cfg: &ScenarioConfig, p: &CptParams, bath: &BathPath, run: usize) -> Result<CountSeries, HarnessError> {
    let traj = sse_trajectory(p, bath, cfg.sim.sse_dt_s, &mut derive(cfg.master_seed, run as u64, Purpose::Sse), false)?;
    let detected = thin_detect(&traj.events, p.eta(), &mut derive(cfg.master_seed, run as u64, Purpose::Thinning))?;
    Ok(bin_events(&detected, cfg.sim.update_interval_s, bath.t_start, cfg.sim.duration_s)?)
}

fn truth_on_bins(bath: &BathPath, counts: &CountSeries) -> Result<BathPath, HarnessError> {
    Ok(bath.resample(counts.t_start, counts.bin_width, counts.len())?)
}

/// Bath, counts and all three estimates for run `run`.
pub fn simulate_run(cfg: &ScenarioConfig, model: &GridModel, run: usize) -> Result<RunRecord, HarnessError> {
    let inner = || -> Result<RunRecord, HarnessError> {
        let p = cfg.cpt_params()?;
        let bath = simulate_bath(cfg, run)?;
        let counts = if cfg.sim.sse { sse_counts(cfg, &p, &bath, run)? } else { steady_counts(cfg, &p, &bath, run)? };
        let truth = truth_on_bins(&bath, &counts)?;
        Ok(RunRecord {
            run,
            average: run_average_count(&counts, model.config())?,
            simple: run_simple_bayes(&counts, model)?,
            ou: run_ou_bayes(&counts, model)?,
            truth,
            counts,
        })
    };
    inner().map_err(|e| e.in_run(run))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(cfg: &ScenarioConfig, records: &[RunRecord]) -> Result<ScenarioSummary, HarnessError> {
    let discard = cfg.sim.t_discard_s;
    let pooled = |pick: fn(&RunRecord) -> &EstimateSeries| {
        let pairs: Vec<_> = records.iter().map(|r| (pick(r), &r.truth)).collect();
        estimation_variance(&pairs, discard)
    };
    let var_average = pooled(|r| &r.average)?;
    let var_simple = pooled(|r| &r.simple)?;
    let var_ou = pooled(|r| &r.ou)?;
    let rates: Vec<f64> = records.iter().map(|r| r.counts.mean_rate()).collect();
    let (mean_rate, mean_rate_se) = mean_and_se(&rates);
    let b = cfg.bath_params()?;
    Ok(ScenarioSummary {
        runs: records.len(),
        bins_analyzed: var_ou.n_bins,
        bath_variance: b.variance(),
        var_average,
        var_simple,
        var_ou,
        crlb: CrlbReport::compute(&cfg.cpt_params()?, &b)?,
        mean_rate,
        mean_rate_se,
    })
}

/// Runs every Monte Carlo repetition in parallel; results are ordered by run
/// index, so output does not depend on the thread count.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    cfg.validate()?;
    let model = GridModel::new(&cfg.estimator_config()?)?;
    let records = (0..cfg.runs)
        .into_par_iter()
        .map(|r| simulate_run(cfg, &model, r))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(cfg, &records)?;
    Ok(ScenarioResult { records, summary })
}

/// OU-Bayes variance from quantum-jump counts against adiabatic counts on
/// the same bath paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SseComparison {
    pub runs: usize,
    pub duration_s: f64,
    pub t_discard_s: f64,
    pub steady: VarianceSummary,
    pub sse: VarianceSummary,
    pub steady_rate: f64,
    pub sse_rate: f64,
    pub difference: f64,
    pub combined_std_error: f64,
    pub agree_within_two_se: bool,
}

pub fn compare_sse_steady(cfg: &ScenarioConfig) -> Result<SseComparison, HarnessError> {
    cfg.validate()?;
    let p = cfg.cpt_params()?;
    let model = GridModel::new(&cfg.estimator_config()?)?;
    let per_run = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let inner = || -> Result<_, HarnessError> {
                let bath = simulate_bath(cfg, run)?;
                let steady = steady_counts(cfg, &p, &bath, run)?;
                let sse = sse_counts(cfg, &p, &bath, run)?;
                let truth = truth_on_bins(&bath, &steady)?;
                let est_steady = run_ou_bayes(&steady, &model)?;
                let est_sse = run_ou_bayes(&sse, &model)?;
                Ok((truth, est_steady, est_sse, steady.mean_rate(), sse.mean_rate()))
            };
            inner().map_err(|e| e.in_run(run))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let discard = cfg.sim.t_discard_s;
    let steady = estimation_variance(&per_run.iter().map(|r| (&r.1, &r.0)).collect::<Vec<_>>(), discard)?;
    let sse = estimation_variance(&per_run.iter().map(|r| (&r.2, &r.0)).collect::<Vec<_>>(), discard)?;
    let n = per_run.len() as f64;
    let combined = (steady.std_error.powi(2) + sse.std_error.powi(2)).sqrt();
    let difference = sse.mean - steady.mean;
    Ok(SseComparison {
        runs: per_run.len(),
        duration_s: cfg.sim.duration_s,
        t_discard_s: discard,
        steady,
        sse,
        steady_rate: per_run.iter().map(|r| r.3).sum::<f64>() / n,
        sse_rate: per_run.iter().map(|r| r.4).sum::<f64>() / n,
        difference,
        combined_std_error: combined,
        agree_within_two_se: difference.abs() <= 2.0 * combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig { runs: 3, ..ScenarioConfig::default() };
        cfg.sim.duration_s = 3e-3;
        cfg.sim.t_discard_s = 1e-3;
        cfg
    }

    #[test]
    fn records_are_aligned() {
        let res = run_scenario(&small()).unwrap();
        assert_eq!(res.records.len(), 3);
        for (i, r) in res.records.iter().enumerate() {
            assert_eq!(r.run, i);
            assert_eq!(r.counts.len(), 300);
            for s in [&r.truth.samples, &r.average.estimates, &r.simple.estimates, &r.ou.estimates] {
                assert_eq!(s.len(), 300);
            }
        }
        assert_eq!(res.summary.bins_analyzed, 200);
        assert!(res.summary.var_ou.mean.is_finite() && res.summary.var_ou.mean >= 0.0);
    }

    #[test]
    fn repeatable_and_independent_of_thread_count() {
        let cfg = small();
        let a = run_scenario(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_scenario(&cfg).unwrap());
        assert_eq!(a.records, b.records);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn runs_are_independent_of_run_count() {
        let cfg = small();
        let mut more = cfg.clone();
        more.runs = 5;
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&more).unwrap();
        assert_eq!(a.records[..], b.records[..3]);
    }

    #[test]
    fn sse_pipeline_shares_the_bath() {
        let mut cfg = small();
        cfg.runs = 2;
        cfg.sim.duration_s = 1e-3;
        cfg.sim.t_discard_s = 0.0;
        let steady = run_scenario(&cfg).unwrap();
        cfg.sim.sse = true;
        let sse = run_scenario(&cfg).unwrap();
        for (a, b) in steady.records.iter().zip(&sse.records) {
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.counts.len(), b.counts.len());
        }
        let cmp = compare_sse_steady(&cfg).unwrap();
        assert_eq!(cmp.runs, 2);
        assert!(cmp.combined_std_error >= 0.0);
    }

    #[test]
    fn errors_name_the_run() {
        let mut cfg = small();
        cfg.sim.sse = true;
        cfg.sim.sse_dt_s = 1e-8;
        let err = run_scenario(&cfg).unwrap_err();
        assert!(matches!(err, HarnessError::Run { .. }), "{err}");
        assert_eq!(err.kind(), "photon");
    }
}
