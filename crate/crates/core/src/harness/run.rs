use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::json;

use crate::atomicity::{atom_decay_scan, count_paths_by_turns, turn_census_enumerated, EnvDist, MAX_ENUMERATED_PATHS};
use crate::diagnostics::{a_delta_mass, b_delta_indicator, ball_cover};
use crate::error::{Error, Result};
use crate::exact::ExactGibbs;
use crate::flows::{ou_variance_experiment, temperature_equivalence_test};
use crate::model::{ModelKind, ModelSpec};
use crate::sampling::SamplerConfig;
use crate::stats::mean_se;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{artifact_version, Cell, Check, Summary, Table, RESULTS_FILE, SUMMARY_FILE};

/// What a run produced before it is written to disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: Table,
    pub checks: Vec<Check>,
    pub results: serde_json::Value,
}

impl ExperimentOutput {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub config_hash: String,
    pub output: ExperimentOutput,
}

/// Execute `cfg` and write `results.csv` and `summary.json` under its output
/// directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let output = execute(cfg)?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let hash = cfg.hash();
    output.table.write_csv(&dir.join(RESULTS_FILE), &hash)?;
    let summary = Summary {
        experiment: cfg.experiment,
        config_hash: hash.clone(),
        version: artifact_version(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: serde_json::to_value(cfg)?,
        checks: output.checks.clone(),
        all_pass: output.all_pass(),
        results: output.results.clone(),
    };
    summary.write(&dir.join(SUMMARY_FILE))?;
    Ok(RunOutcome {
        dir,
        config_hash: hash,
        output,
    })
}

/// Compute an experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentKind::IdentityCheck => identity_check(cfg),
        ExperimentKind::Moments => moments(cfg),
        ExperimentKind::LocalizationScan => localization_scan(cfg),
        ExperimentKind::BallCover => ball_cover_scan(cfg),
        ExperimentKind::OuVariance => ou_variance(cfg),
        ExperimentKind::TemperatureEquivalence => temperature_equivalence(cfg),
        ExperimentKind::AtomDecay => atom_decay(cfg),
        ExperimentKind::TurnCensus => turn_census(cfg),
    }
}

fn replica_map<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..cfg.replicas as u64).into_par_iter().map(f).collect()
}

fn gibbs(cfg: &ExperimentConfig, model: &ModelSpec, beta: f64, replica: u64) -> Result<ExactGibbs> {
    let env = model.sample_environment_replica(cfg.seed, replica);
    ExactGibbs::with_budget(model, &env, beta, &cfg.budget)
}

fn identity_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.model_spec()?;
    cfg.budget.check(&model)?;
    let mut table = Table::new(&["beta", "replica", "free_energy_derivative", "mean_overlap", "difference"]);
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &beta in &cfg.beta {
        let vals = replica_map(cfg, |r| {
            let g = gibbs(cfg, &model, beta, r)?;
            Ok((g.summary().free_energy_derivative, g.mean_overlap()))
        })?;
        let diffs: Vec<f64> = vals.iter().map(|(fp, r)| fp - beta * (1.0 - r)).collect();
        for (r, ((fp, ov), d)) in vals.iter().zip(&diffs).enumerate() {
            table.push(vec![beta.into(), r.into(), (*fp).into(), (*ov).into(), (*d).into()]);
        }
        let (residual, se) = mean_se(&diffs);
        let three_se = 3.0 * se.max(0.0);
        checks.push(Check::at_most(
            format!("identity beta={beta}"),
            "|mean(F') - beta(1 - mean<R>)| <= 3 SE",
            residual.abs(),
            three_se,
        ));
        results.push(json!({"beta": beta, "residual": residual, "se": se, "three_se": three_se}));
    }
    Ok(ExperimentOutput {
        table,
        checks,
        results: json!(results),
    })
}

fn moments(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.model_spec()?;
    cfg.budget.check(&model)?;
    let n = model.n() as f64;
    let mut table = Table::new(&["beta", "replica", "log_z", "z_ratio", "inverse_ratio"]);
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &beta in &cfg.beta {
        let half = 0.5 * beta * beta * n;
        let logz = replica_map(cfg, |r| Ok(gibbs(cfg, &model, beta, r)?.log_partition()))?;
        let z: Vec<f64> = logz.iter().map(|l| (l - half).exp()).collect();
        let inv: Vec<f64> = logz.iter().map(|l| (-l - half).exp()).collect();
        for (r, l) in logz.iter().enumerate() {
            table.push(vec![beta.into(), r.into(), (*l).into(), z[r].into(), inv[r].into()]);
        }
        let (zm, zse) = mean_se(&z);
        let (im, ise) = mean_se(&inv);
        checks.push(Check::at_most(
            format!("first moment beta={beta}"),
            "|mean(Z / e^(beta^2 n/2)) - 1| <= 3 SE",
            (zm - 1.0).abs(),
            3.0 * zse,
        ));
        checks.push(Check::at_most(
            format!("negative moment beta={beta}"),
            "mean(Z^-1 / e^(beta^2 n/2)) - 3 SE <= 1",
            im - 3.0 * ise,
            1.0,
        ));
        results.push(json!({
            "beta": beta, "z_ratio_mean": zm, "z_ratio_se": zse,
            "inverse_ratio_mean": im, "inverse_ratio_se": ise,
        }));
    }
    Ok(ExperimentOutput {
        table,
        checks,
        results: json!(results),
    })
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

fn localization_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.model_spec()?;
    cfg.budget.check(&model)?;
    let mut table = Table::new(&["beta", "delta", "replica", "a_delta_mass", "b_delta"]);
    // Per beta, per delta: (mean A mass, SE, fraction of B events).
    let mut grid = vec![vec![(0.0, 0.0, 0.0); cfg.delta.len()]; cfg.beta.len()];
    for (bi, &beta) in cfg.beta.iter().enumerate() {
        let vals = replica_map(cfg, |r| {
            let g = gibbs(cfg, &model, beta, r)?;
            cfg.delta
                .iter()
                .map(|&d| Ok((a_delta_mass(&g, d, &cfg.budget)?, b_delta_indicator(&g, d)?)))
                .collect::<Result<Vec<_>>>()
        })?;
        for (di, &delta) in cfg.delta.iter().enumerate() {
            for (r, v) in vals.iter().enumerate() {
                table.push(vec![beta.into(), delta.into(), r.into(), v[di].0.into(), v[di].1.into()]);
            }
            let a: Vec<f64> = vals.iter().map(|v| v[di].0).collect();
            let (m, se) = mean_se(&a);
            let b = vals.iter().filter(|v| v[di].1).count() as f64 / cfg.replicas as f64;
            grid[bi][di] = (m, se, b);
        }
    }
    let mut order: Vec<usize> = (0..cfg.beta.len()).collect();
    order.sort_by(|&i, &j| cfg.beta[i].total_cmp(&cfg.beta[j]));
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for (di, &delta) in cfg.delta.iter().enumerate() {
        let a: Vec<f64> = order.iter().map(|&bi| grid[bi][di].0).collect();
        let b: Vec<f64> = order.iter().map(|&bi| grid[bi][di].2).collect();
        if order.len() > 1 {
            checks.push(Check::flag(
                format!("A mass monotone delta={delta}"),
                "mean A_delta mass non-increasing in beta",
                a[0],
                a[a.len() - 1],
                non_increasing(&a),
            ));
            checks.push(Check::flag(
                format!("B frequency monotone delta={delta}"),
                "P(B_delta) non-increasing in beta",
                b[0],
                b[b.len() - 1],
                non_increasing(&b),
            ));
        }
        for &bi in &order {
            let (m, se, bf) = grid[bi][di];
            results.push(json!({
                "beta": cfg.beta[bi], "delta": delta,
                "a_delta_mass_mean": m, "a_delta_mass_se": se, "b_delta_frequency": bf,
            }));
        }
    }
    Ok(ExperimentOutput {
        table,
        checks,
        results: json!(results),
    })
}

fn ball_cover_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.model_spec()?;
    cfg.budget.check(&model)?;
    let k = cfg.params.centers.unwrap_or(4);
    let eval = cfg.params.eval_samples.unwrap_or(2000);
    let mut table = Table::new(&["beta", "delta", "replica", "k", "covered_fraction", "standard_error", "exact"]);
    let mut results = Vec::new();
    for &beta in &cfg.beta {
        for &delta in &cfg.delta {
            let vals = replica_map(cfg, |r| {
                let g = gibbs(cfg, &model, beta, r)?;
                let mut sampler = SamplerConfig::new(cfg.seed, eval);
                sampler.stream = r;
                ball_cover(&g, &sampler, k, delta, eval, &cfg.budget)
            })?;
            for (r, c) in vals.iter().enumerate() {
                table.push(vec![
                    beta.into(),
                    delta.into(),
                    r.into(),
                    c.k.into(),
                    c.covered_fraction.into(),
                    c.standard_error.unwrap_or(0.0).into(),
                    c.exact.into(),
                ]);
            }
            let cov: Vec<f64> = vals.iter().map(|c| c.covered_fraction).collect();
            let (m, se) = mean_se(&cov);
            results.push(json!({"beta": beta, "delta": delta, "k": k, "covered_fraction_mean": m, "se": se}));
        }
    }
    Ok(ExperimentOutput {
        table,
        checks: Vec::new(),
        results: json!(results),
    })
}

fn ou_variance(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.model_spec()?;
    let horizons = cfg.params.horizons.clone().unwrap_or_else(|| vec![2.0, 4.0, 8.0]);
    let mut table = Table::new(&[
        "beta",
        "horizon",
        "trajectories",
        "variance_lhs",
        "lhs_se",
        "variance_rhs",
        "rhs_se",
        "integrand_mean",
        "integrand_se",
        "refinement_change",
    ]);
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &beta in &cfg.beta {
        for &t in &horizons {
            let r = ou_variance_experiment(&model, beta, t, cfg.replicas, cfg.seed, &cfg.budget)?;
            table.push(vec![
                beta.into(),
                t.into(),
                cfg.replicas.into(),
                r.variance_lhs.into(),
                r.lhs_se.into(),
                r.variance_rhs.into(),
                r.rhs_se.into(),
                r.integrand_mean.into(),
                r.integrand_se.into(),
                r.refinement_change.into(),
            ]);
            checks.push(Check::at_most(
                format!("ou variance beta={beta} T={t}"),
                "LHS <= RHS + 3 combined SE",
                r.variance_lhs,
                r.variance_rhs + 3.0 * r.combined_se,
            ));
            checks.push(Check::at_most(
                format!("generator mean beta={beta} T={t}"),
                "|mean Lf| <= 3 SE",
                r.integrand_mean.abs(),
                3.0 * r.integrand_se,
            ));
            results.push(serde_json::to_value(&r)?);
        }
    }
    Ok(ExperimentOutput {
        table,
        checks,
        results: json!(results),
    })
}

fn temperature_equivalence(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.model_spec()?;
    let k = cfg.params.k.unwrap_or(1);
    let mut table = Table::new(&[
        "beta",
        "k",
        "beta_effective",
        "ks_statistic_free_energy",
        "ks_p_free_energy",
        "ks_statistic_mean_overlap",
        "ks_p_mean_overlap",
    ]);
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &beta in &cfg.beta {
        let r = temperature_equivalence_test(&model, beta, k, cfg.replicas, cfg.seed, &cfg.budget)?;
        table.push(vec![
            beta.into(),
            k.into(),
            r.beta_effective.into(),
            r.ks_free_energy.statistic.into(),
            r.ks_free_energy.p_value.into(),
            r.ks_mean_overlap.statistic.into(),
            r.ks_mean_overlap.p_value.into(),
        ]);
        checks.push(Check::flag(
            format!("equivalence beta={beta} k={k}"),
            "KS p-value on F_n > 0.01",
            r.ks_free_energy.p_value,
            0.01,
            r.ks_free_energy.p_value > 0.01,
        ));
        results.push(serde_json::to_value(&r)?);
    }
    Ok(ExperimentOutput {
        table,
        checks,
        results: json!(results),
    })
}

fn atom_decay(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let block = cfg.model.as_ref().ok_or_else(|| Error::config("model", "missing"))?;
    if block.kind != ModelKind::DirectedPolymer {
        return Err(Error::config("model.kind", "atom_decay needs a polymer model"));
    }
    let d = block.d.unwrap_or(1);
    let n_list = cfg.params.n_list.clone().unwrap_or_else(|| vec![block.n]);
    let dist: EnvDist = cfg.params.env_dist.as_deref().unwrap_or("gaussian").parse()?;
    let mut table = Table::new(&[
        "n",
        "beta",
        "replica",
        "L_n",
        "max_atom",
        "n_times_atom",
        "turns_of_argmax",
    ]);
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &beta in &cfg.beta {
        let scan = atom_decay_scan(d, beta, &n_list, cfg.replicas, dist, cfg.seed)?;
        for row in &scan.rows {
            table.push(vec![
                row.n.into(),
                row.beta.into(),
                row.replica.into(),
                row.passage_time.into(),
                row.max_atom.into(),
                row.n_times_atom.into(),
                row.turns_of_argmax.into(),
            ]);
        }
        let mut aggs = scan.aggregates.clone();
        aggs.sort_by_key(|a| a.n);
        if aggs.len() > 1 {
            let (first, last) = (&aggs[0], &aggs[aggs.len() - 1]);
            checks.push(Check::flag(
                format!("atom decay beta={beta}"),
                "median max_atom strictly decreasing in n",
                first.median_max_atom,
                last.median_max_atom,
                scan.median_max_atom_decreasing,
            ));
            checks.push(Check::at_most(
                format!("scaled atom bounded beta={beta}"),
                "median n*max_atom at largest n <= 2 x value at smallest n",
                last.median_n_times_atom,
                2.0 * first.median_n_times_atom,
            ));
        }
        results.push(serde_json::to_value(&scan.aggregates)?);
        results.push(json!({
            "beta": beta, "lambda_estimate": scan.lambda_estimate,
            "env_mean": scan.env_mean, "exceeds_env_mean": scan.exceeds_env_mean,
        }));
    }
    Ok(ExperimentOutput {
        table,
        checks,
        results: json!(results),
    })
}

fn turn_census(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n_list = cfg
        .params
        .n_list
        .clone()
        .or_else(|| cfg.model.as_ref().map(|m| vec![m.n]))
        .ok_or_else(|| Error::config("params.n_list", "required for turn_census"))?;
    let d_list = cfg
        .params
        .d_list
        .clone()
        .unwrap_or_else(|| vec![cfg.model.as_ref().and_then(|m| m.d).unwrap_or(1)]);
    let mut table = Table::new(&["n", "d", "turns", "count", "enumerated"]);
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for &d in &d_list {
        for &n in &n_list {
            let formula = count_paths_by_turns(n, d)?;
            let brute = match (2 * d as u64).checked_pow(n as u32) {
                Some(t) if t <= MAX_ENUMERATED_PATHS => Some(turn_census_enumerated(n, d)?),
                _ => None,
            };
            for (j, c) in formula.iter().enumerate() {
                let enumerated = brute.as_ref().map(|b| b[j]);
                if let Some(e) = enumerated {
                    compared += 1;
                    if num_bigint::BigUint::from(e) != *c {
                        mismatches += 1;
                    }
                }
                table.push(vec![
                    n.into(),
                    d.into(),
                    j.into(),
                    Cell::Text(c.to_string()),
                    Cell::Text(enumerated.map(|e| e.to_string()).unwrap_or_default()),
                ]);
            }
        }
    }
    let checks = vec![Check::at_most(
        "turn count formula",
        "mismatches between closed form and enumeration <= 0",
        mismatches as f64,
        0.0,
    )];
    Ok(ExperimentOutput {
        table,
        checks,
        results: json!({"compared": compared, "mismatches": mismatches}),
    })
}

