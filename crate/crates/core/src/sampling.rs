//! Replica samplers: exact table and sequential polymer sampling, and
//! single-spin-flip Metropolis for p-spin models.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{ExactBudget, ExactGibbs};
use crate::model::{path_positions, spin_inner_product, Environment, ModelSpec, StateId};
use crate::models::spins_from_bits;
use crate::rng::{Purpose, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    /// Exact when the instance fits the exact budget, Metropolis otherwise.
    #[default]
    Auto,
    Exact,
    Metropolis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub sweeps_per_sample: usize,
    pub burn_in: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            sweeps_per_sample: 10,
            burn_in: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    pub num_samples: usize,
    pub mcmc: McmcConfig,
    pub method: SamplerMethod,
    /// Substream index, so independent samplers can share a seed.
    pub stream: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_samples: 1000,
            mcmc: McmcConfig::default(),
            method: SamplerMethod::Auto,
            stream: 0,
        }
    }
}

impl SamplerConfig {
    pub fn new(seed: u64, num_samples: usize) -> Self {
        Self {
            seed,
            num_samples,
            ..Default::default()
        }
    }

    fn validate(&self, mcmc: bool) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::InvalidParameter("num_samples must be >= 1".into()));
        }
        if mcmc && self.mcmc.sweeps_per_sample == 0 {
            return Err(Error::InvalidParameter("sweeps_per_sample must be >= 1".into()));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha20Rng {
        StreamKey::new(self.seed, Purpose::Sampler, self.stream).rng()
    }
}

/// Sampled replicas plus provenance of the law they follow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    #[serde(skip)]
    pub states: Vec<StateId>,
    /// True when drawn from the exact Gibbs law.
    pub exact: bool,
    /// Split-chain potential scale reduction of the energy trace (MCMC only).
    pub split_rhat: Option<f64>,
    pub acceptance_rate: Option<f64>,
}

/// Draw i.i.d. replicas from an exactly solved Gibbs measure.
pub fn sample_states(gibbs: &ExactGibbs, cfg: &SamplerConfig) -> Result<SampleSet> {
    cfg.validate(false)?;
    if cfg.method == SamplerMethod::Metropolis {
        return Err(Error::Unsupported(
            "Metropolis requested on an exactly solved instance; use the exact sampler".into(),
        ));
    }
    let mut rng = cfg.rng();
    let states = match gibbs.model() {
        ModelSpec::Rem(_) | ModelSpec::PSpin(_) => {
            let probs = gibbs.probabilities().expect("spin table");
            let n = gibbs.model().n();
            let mut cdf = Vec::with_capacity(probs.len());
            let mut acc = 0.0;
            for p in probs {
                acc += p;
                cdf.push(acc);
            }
            let total = acc;
            (0..cfg.num_samples)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() * total;
                    let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                    StateId::spins(n, idx as u64)
                })
                .collect()
        }
        ModelSpec::Polymer(_) => sample_polymer_paths(gibbs, cfg.num_samples, &mut rng),
    };
    Ok(SampleSet {
        states,
        exact: true,
        split_rhat: None,
        acceptance_rate: None,
    })
}

fn sample_polymer_paths(gibbs: &ExactGibbs, count: usize, rng: &mut ChaCha20Rng) -> Vec<StateId> {
    let t = gibbs.polymer_tables().expect("polymer tables");
    let p = &t.polymer;
    let l = p.slice_len();
    let beta = gibbs.beta();
    let g = &gibbs.env().g;
    let ns = 2 * p.d;
    let offs: Vec<isize> = (0..ns as u8).map(|s| p.step_offset(s)).collect();
    let logk: Vec<f64> = (0..ns as u8).map(|s| p.kernel.log_prob(s)).collect();
    let origin = p.site_index(&[0, 0, 0]);
    let mut weights = vec![0.0; ns];
    (0..count)
        .map(|_| {
            let mut y = origin;
            let mut steps = Vec::with_capacity(p.n);
            for i in 1..=p.n {
                let here = t.bwd[(i - 1) * l + y];
                for s in 0..ns {
                    let x = (y as isize + offs[s]) as usize;
                    let b = t.bwd[i * l + x];
                    weights[s] = if b == f64::NEG_INFINITY || logk[s] == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (logk[s] + beta * g[(i - 1) * l + x] + b - here).exp()
                    };
                }
                let total: f64 = weights.iter().sum();
                let u: f64 = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = ns - 1;
                for (s, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = s;
                        break;
                    }
                }
                while weights[pick] == 0.0 {
                    pick -= 1;
                }
                steps.push(pick as u8);
                y = (y as isize + offs[pick]) as usize;
            }
            StateId::path(p.d, steps)
        })
        .collect()
}

/// Single-spin-flip Metropolis chain for p-spin models.
pub fn sample_metropolis(model: &ModelSpec, env: &Environment, beta: f64, cfg: &SamplerConfig) -> Result<SampleSet> {
    cfg.validate(true)?;
    let m = match model {
        ModelSpec::PSpin(m) => m,
        _ => {
            return Err(Error::Unsupported(
                "Metropolis is only offered for p-spin models; REM and polymers have exact samplers".into(),
            ))
        }
    };
    if env.len() != model.feature_count() {
        return Err(Error::dims(model.feature_count(), env.len()));
    }
    let n = m.n;
    let c = m.couplings(&env.g);
    let mut rng = cfg.rng();
    let init: u64 = rng.random::<u64>() & if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut s = spins_from_bits(n, init);
    let mut fields = c.local_fields(&s);
    let mut h = c.energy(&s);
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut sweep = |s: &mut Vec<f64>, fields: &mut Vec<f64>, h: &mut f64, rng: &mut ChaCha20Rng| {
        for _ in 0..n {
            let k = rng.random_range(0..n);
            let dh = -2.0 * s[k] * fields[k];
            proposed += 1;
            if beta * dh >= 0.0 || rng.random::<f64>() < (beta * dh).exp() {
                *h += c.flip(s, fields, k);
                accepted += 1;
            }
        }
    };
    for _ in 0..cfg.mcmc.burn_in {
        sweep(&mut s, &mut fields, &mut h, &mut rng);
    }
    let mut states = Vec::with_capacity(cfg.num_samples);
    let mut trace = Vec::with_capacity(cfg.num_samples);
    for _ in 0..cfg.num_samples {
        for _ in 0..cfg.mcmc.sweeps_per_sample {
            sweep(&mut s, &mut fields, &mut h, &mut rng);
        }
        let bits = s
            .iter()
            .enumerate()
            .fold(0u64, |b, (i, &x)| if x > 0.0 { b | 1 << i } else { b });
        states.push(StateId::spins(n, bits));
        trace.push(h);
    }
    Ok(SampleSet {
        states,
        exact: false,
        split_rhat: split_rhat(&trace),
        acceptance_rate: Some(accepted as f64 / proposed.max(1) as f64),
    })
}

/// Dispatch on `cfg.method`: exact sampling when the instance fits the
/// budget, Metropolis for p-spin otherwise.
pub fn sample(
    model: &ModelSpec,
    env: &Environment,
    beta: f64,
    cfg: &SamplerConfig,
    budget: &ExactBudget,
) -> Result<SampleSet> {
    match cfg.method {
        SamplerMethod::Metropolis => sample_metropolis(model, env, beta, cfg),
        SamplerMethod::Exact => sample_states(&ExactGibbs::with_budget(model, env, beta, budget)?, cfg),
        SamplerMethod::Auto => match ExactGibbs::with_budget(model, env, beta, budget) {
            Ok(gibbs) => sample_states(&gibbs, cfg),
            Err(Error::BudgetExceeded(_)) if matches!(model, ModelSpec::PSpin(_)) => {
                log::info!("p-spin instance beyond exact budget; falling back to Metropolis");
                sample_metropolis(model, env, beta, cfg)
            }
            Err(e) => Err(e),
        },
    }
}

/// Gelman-Rubin statistic on the two halves of one chain.
pub fn split_rhat(trace: &[f64]) -> Option<f64> {
    let half = trace.len() / 2;
    if half < 2 {
        return None;
    }
    let chains = [&trace[..half], &trace[half..2 * half]];
    let m = half as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / m).collect();
    let vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m - 1.0))
        .collect();
    let w = (vars[0] + vars[1]) / 2.0;
    let grand = (means[0] + means[1]) / 2.0;
    let b = m * ((means[0] - grand).powi(2) + (means[1] - grand).powi(2));
    if w == 0.0 {
        return Some(1.0);
    }
    let var_plus = (m - 1.0) / m * w + b / m;
    Some((var_plus / w).sqrt())
}

/// Pairwise overlap kernel with per-sample precomputation.
enum OverlapKernel {
    Rem(Vec<u64>),
    Spin(Vec<u64>),
    Path(Vec<Vec<[i32; 3]>>),
}

impl OverlapKernel {
    fn eval(&self, model: &ModelSpec, a: usize, b: usize) -> f64 {
        match self {
            OverlapKernel::Rem(bits) => (bits[a] == bits[b]) as u8 as f64,
            OverlapKernel::Spin(bits) => match model {
                ModelSpec::PSpin(m) => m.xi.eval(spin_inner_product(m.n, bits[a], bits[b])),
                _ => unreachable!(),
            },
            OverlapKernel::Path(pos) => {
                let same = pos[a].iter().zip(&pos[b]).filter(|(x, y)| x == y).count();
                same as f64 / pos[a].len() as f64
            }
        }
    }
}

/// U-statistic estimate of `⟨R_{1,2}⟩` over all unordered sample pairs,
/// with a jackknife standard error.
pub fn estimate_mean_overlap(model: &ModelSpec, samples: &[StateId]) -> Result<(f64, f64)> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    for s in samples {
        model.validate_state(s)?;
    }
    let bits = || {
        samples
            .iter()
            .map(|s| match s {
                StateId::Spins { bits, .. } => *bits,
                _ => unreachable!("validated"),
            })
            .collect::<Vec<_>>()
    };
    let kernel = match model {
        ModelSpec::Rem(_) => OverlapKernel::Rem(bits()),
        ModelSpec::PSpin(_) => OverlapKernel::Spin(bits()),
        ModelSpec::Polymer(_) => OverlapKernel::Path(
            samples
                .iter()
                .map(|s| match s {
                    StateId::Path { steps, .. } => path_positions(steps),
                    _ => unreachable!("validated"),
                })
                .collect(),
        ),
    };
    // Row sums r_i = Σ_{j≠i} R_ij.
    let mut row = vec![0.0; m];
    if let OverlapKernel::Rem(b) = &kernel {
        let mut counts = std::collections::HashMap::new();
        for x in b {
            *counts.entry(*x).or_insert(0u64) += 1;
        }
        for (i, x) in b.iter().enumerate() {
            row[i] = (counts[x] - 1) as f64;
        }
    } else {
        for a in 0..m {
            for b in a + 1..m {
                let r = kernel.eval(model, a, b);
                row[a] += r;
                row[b] += r;
            }
        }
    }
    let total: f64 = row.iter().sum::<f64>() / 2.0;
    let mf = m as f64;
    let pairs = mf * (mf - 1.0) / 2.0;
    let estimate = total / pairs;
    if m < 3 {
        return Ok((estimate, f64::NAN));
    }
    let loo_pairs = (mf - 1.0) * (mf - 2.0) / 2.0;
    let loo: Vec<f64> = row.iter().map(|r| (total - r) / loo_pairs).collect();
    let mean_loo = loo.iter().sum::<f64>() / mf;
    let var = (mf - 1.0) / mf * loo.iter().map(|u| (u - mean_loo).powi(2)).sum::<f64>();
    Ok((estimate, var.sqrt()))
}

/// Write one canonical state string per line.
pub fn write_sample_dump(path: &Path, samples: &[StateId]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}
