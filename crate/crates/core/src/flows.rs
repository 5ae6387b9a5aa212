//! Environment dynamics: the Ornstein-Uhlenbeck flow on the disorder and
//! discrete perturbations `g + n^{-1/2} Σ_j h^{(j)}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{ExactBudget, ExactGibbs};
use crate::model::{Environment, ModelSpec, StateId};
use crate::models::rem_limit_mean_overlap;
use crate::rng::{splitmix64, Purpose, StreamKey};
use crate::stats::{ks_two_sample, mean_se, variance_se, KsResult, LogSumExp};

/// Quadrature points on `[0, T/n]`; the refinement check doubles the
/// interval count.
pub const QUADRATURE_POINTS: usize = 32;

/// Exact OU transition `e^{-t} g + sqrt(1 - e^{-2t}) ξ` driven by `key`.
pub fn ou_evolve_with(env: &Environment, t: f64, key: StreamKey) -> Result<Environment> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(env.clone());
    }
    let a = (-t).exp();
    let b = (-(-2.0 * t).exp_m1()).sqrt();
    let xi = key.normals(env.len());
    Ok(Environment {
        g: env.g.iter().zip(&xi).map(|(g, x)| a * g + b * x).collect(),
        seed: env.seed,
        replica_id: env.replica_id,
    })
}

/// OU transition with fresh noise keyed by `(noise_seed, env.replica_id)`.
pub fn ou_evolve(env: &Environment, t: f64, noise_seed: u64) -> Result<Environment> {
    ou_evolve_with(env, t, StreamKey::new(noise_seed, Purpose::OuNoise, env.replica_id))
}

/// `Lf = β²(1 - ⟨R⟩) - β F'` for `f = F_n`.
pub fn generator_integrand(gibbs: &ExactGibbs) -> f64 {
    let b = gibbs.beta();
    let s = gibbs.summary();
    b * b * (1.0 - s.mean_overlap) - b * s.free_energy_derivative
}

pub fn ou_generator_integrand(model: &ModelSpec, env: &Environment, beta: f64) -> Result<f64> {
    Ok(generator_integrand(&ExactGibbs::new(model, env, beta)?))
}

/// A sampled OU path of environments with the generator integrand.
#[derive(Debug, Clone)]
pub struct OuTrajectory {
    pub times: Vec<f64>,
    pub envs: Vec<Environment>,
    pub integrand: Vec<f64>,
    pub mean_overlap: Vec<f64>,
}

/// Evolve `env0` through increasing `times` (starting at 0), one exact
/// transition per interval.
pub fn ou_trajectory(
    model: &ModelSpec,
    env0: &Environment,
    beta: f64,
    times: &[f64],
    key: StreamKey,
    budget: &ExactBudget,
) -> Result<OuTrajectory> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must start at 0 and increase".into()));
    }
    let mut envs = Vec::with_capacity(times.len());
    let mut integrand = Vec::with_capacity(times.len());
    let mut mean_overlap = Vec::with_capacity(times.len());
    let mut cur = env0.clone();
    for (j, &t) in times.iter().enumerate() {
        if j > 0 {
            cur = ou_evolve_with(&cur, t - times[j - 1], key.child(j as u64))?;
        }
        let gb = ExactGibbs::with_budget(model, &cur, beta, budget)?;
        integrand.push(generator_integrand(&gb));
        mean_overlap.push(gb.mean_overlap());
        envs.push(cur.clone());
    }
    Ok(OuTrajectory {
        times: times.to_vec(),
        envs,
        integrand,
        mean_overlap,
    })
}

fn uniform_grid(t: f64, points: usize) -> Vec<f64> {
    (0..points).map(|j| t * j as f64 / (points - 1) as f64).collect()
}

/// Trapezoid time average on a uniform grid.
fn trapezoid_average(values: &[f64]) -> f64 {
    let k = values.len();
    if k == 1 {
        return values[0];
    }
    let inner: f64 = values[1..k - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[k - 1])) / (k - 1) as f64
}

/// Per-trajectory time averages on the fine grid and on its every-other
/// subgrid, plus the averaged overlap.
struct TrajectoryAverages {
    fine: f64,
    coarse: f64,
    overlap: f64,
    overlap_coarse: f64,
}

fn simulate_averages(
    model: &ModelSpec,
    beta: f64,
    t: f64,
    seed: u64,
    replica: u64,
    budget: &ExactBudget,
) -> Result<TrajectoryAverages> {
    let fine_points = 2 * QUADRATURE_POINTS - 1;
    let env0 = model.sample_environment_replica(seed, replica);
    let key = StreamKey::new(seed, Purpose::OuNoise, replica);
    let tr = if t == 0.0 {
        ou_trajectory(model, &env0, beta, &[0.0], key, budget)?
    } else {
        ou_trajectory(model, &env0, beta, &uniform_grid(t, fine_points), key, budget)?
    };
    let every_other = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<_>>();
    Ok(TrajectoryAverages {
        fine: trapezoid_average(&tr.integrand),
        coarse: trapezoid_average(&every_other(&tr.integrand)),
        overlap: trapezoid_average(&tr.mean_overlap),
        overlap_coarse: trapezoid_average(&every_other(&tr.mean_overlap)),
    })
}

/// Monte Carlo check of `Var((1/t)∫₀ᵗ Lf ds) <= (2/t) E‖∇f‖²`, `t = T/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuVarianceReport {
    pub beta: f64,
    pub big_t: f64,
    pub t: f64,
    pub trajectories: usize,
    pub variance_lhs: f64,
    pub lhs_se: f64,
    pub variance_rhs: f64,
    pub rhs_se: f64,
    /// `(2/t) β²/n`, the deterministic ceiling of the right-hand side.
    pub rhs_ceiling: f64,
    pub combined_se: f64,
    pub holds: bool,
    /// Change in the left-hand side between the fine and coarse grids.
    pub refinement_change: f64,
    pub refinement_ok: bool,
    pub integrand_mean: f64,
    pub integrand_se: f64,
    pub mean_overlap: f64,
}

pub fn ou_variance_experiment(
    model: &ModelSpec,
    beta: f64,
    big_t: f64,
    trajectories: usize,
    seed: u64,
    budget: &ExactBudget,
) -> Result<OuVarianceReport> {
    if trajectories < 30 {
        return Err(Error::InvalidParameter(format!("need >= 30 trajectories, got {trajectories}")));
    }
    if !(big_t > 0.0) {
        return Err(Error::InvalidParameter(format!("T must be > 0, got {big_t}")));
    }
    budget.check(model)?;
    let n = model.n() as f64;
    let t = big_t / n;
    let avgs: Vec<TrajectoryAverages> = (0..trajectories as u64)
        .into_par_iter()
        .map(|r| simulate_averages(model, beta, t, seed, r, budget))
        .collect::<Result<_>>()?;
    let fine: Vec<f64> = avgs.iter().map(|a| a.fine).collect();
    let coarse: Vec<f64> = avgs.iter().map(|a| a.coarse).collect();
    let grad: Vec<f64> = avgs.iter().map(|a| (2.0 / t) * beta * beta / n * a.overlap).collect();
    let (lhs, lhs_se) = variance_se(&fine);
    let (lhs_coarse, _) = variance_se(&coarse);
    let (rhs, rhs_se) = mean_se(&grad);
    let (im, ise) = mean_se(&fine);
    let combined_se = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    let refinement_change = (lhs - lhs_coarse).abs();
    Ok(OuVarianceReport {
        beta,
        big_t,
        t,
        trajectories,
        variance_lhs: lhs,
        lhs_se,
        variance_rhs: rhs,
        rhs_se,
        rhs_ceiling: 2.0 / t * beta * beta / n,
        combined_se,
        holds: lhs <= rhs + 3.0 * combined_se,
        refinement_change,
        refinement_ok: refinement_change <= lhs_se || refinement_change == 0.0,
        integrand_mean: im,
        integrand_se: ise,
        mean_overlap: avgs.iter().map(|a| a.overlap).sum::<f64>() / trajectories as f64,
    })
}

/// Which limit the time-averaged overlap is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaKind {
    /// Closed-form REM reference `(β - p'(β))/β`.
    Reference,
    /// `1 - E F'/β` at the same `n`.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeAverageReport {
    pub beta: f64,
    pub big_t: f64,
    pub replicas: usize,
    /// Disorder average of `(1/t) ∫₀ᵗ ⟨R⟩_s ds`.
    pub value: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub kappa: f64,
    pub kappa_kind: KappaKind,
    /// Mean over replicas of `|time average - κ|`.
    pub gap: f64,
    pub gap_se: f64,
    /// Change of `value` under grid coarsening.
    pub refinement_change: f64,
}

/// Disorder-averaged time average of `⟨R_{1,2}⟩_t` over `[0, T/n]`.
pub fn time_averaged_overlap(
    model: &ModelSpec,
    beta: f64,
    big_t: f64,
    replicas: usize,
    seed: u64,
    budget: &ExactBudget,
) -> Result<TimeAverageReport> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("need >= 2 replicas".into()));
    }
    if !(big_t >= 0.0) {
        return Err(Error::InvalidParameter(format!("T must be >= 0, got {big_t}")));
    }
    budget.check(model)?;
    let t = big_t / model.n() as f64;
    let avgs: Vec<TrajectoryAverages> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| simulate_averages(model, beta, t, seed, r, budget))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = avgs.iter().map(|a| a.overlap).collect();
    let (value, se) = mean_se(&values);
    let coarse = avgs.iter().map(|a| a.overlap_coarse).sum::<f64>() / replicas as f64;
    let (kappa, kappa_kind) = match model {
        ModelSpec::Rem(_) => (rem_limit_mean_overlap(beta)?, KappaKind::Reference),
        _ => {
            let fp: Vec<f64> = (0..replicas as u64)
                .into_par_iter()
                .map(|r| {
                    let env = model.sample_environment_replica(seed, r);
                    ExactGibbs::with_budget(model, &env, beta, budget).map(|g| g.summary().free_energy_derivative)
                })
                .collect::<Result<_>>()?;
            let mean_fp = fp.iter().sum::<f64>() / replicas as f64;
            let k = if beta == 0.0 { value } else { 1.0 - mean_fp / beta };
            (k, KappaKind::Surrogate)
        }
    };
    let gaps: Vec<f64> = values.iter().map(|v| (v - kappa).abs()).collect();
    let (gap, gap_se) = mean_se(&gaps);
    Ok(TimeAverageReport {
        beta,
        big_t,
        replicas,
        value,
        se,
        ci_low: value - 1.96 * se,
        ci_high: value + 1.96 * se,
        kappa,
        kappa_kind,
        gap,
        gap_se,
        refinement_change: (value - coarse).abs(),
    })
}

/// Base environment plus `k` independent perturbation fields.
#[derive(Debug, Clone)]
pub struct PerturbationStack {
    pub base: Environment,
    pub h: Vec<Environment>,
    pub n: usize,
}

impl PerturbationStack {
    pub fn new(base: Environment, h: Vec<Environment>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        if let Some(bad) = h.iter().find(|e| e.len() != base.len()) {
            return Err(Error::dims(base.len(), bad.len()));
        }
        Ok(Self { base, h, n })
    }

    /// Base environment of `replica` and `k` perturbation fields, all keyed
    /// by `(seed, replica)`.
    pub fn sample(model: &ModelSpec, seed: u64, replica: u64, k: usize) -> Self {
        let base = model.sample_environment_replica(seed, replica);
        let key = StreamKey::new(seed, Purpose::Perturbation, replica);
        let h = (0..k)
            .map(|j| Environment {
                g: key.child(j as u64).normals(base.len()),
                seed,
                replica_id: replica,
            })
            .collect();
        Self {
            base,
            h,
            n: model.n(),
        }
    }
}

/// `g + n^{-1/2} Σ_j h^{(j)}`.
pub fn perturb(stack: &PerturbationStack) -> Result<Environment> {
    let s = 1.0 / (stack.n as f64).sqrt();
    let mut g = stack.base.g.clone();
    for h in &stack.h {
        if h.len() != g.len() {
            return Err(Error::dims(g.len(), h.len()));
        }
        for (x, y) in g.iter_mut().zip(&h.g) {
            *x += s * y;
        }
    }
    Ok(Environment {
        g,
        seed: stack.base.seed,
        replica_id: stack.base.replica_id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub beta: f64,
    pub k: usize,
    pub beta_effective: f64,
    pub replicas: usize,
    pub ks_free_energy: KsResult,
    pub ks_mean_overlap: KsResult,
    pub mean_free_energy_perturbed: f64,
    pub mean_free_energy_fresh: f64,
}

/// Compare `F_n` at `β` under `k` stacked perturbations with `F_n` at
/// `β sqrt(1 + k/n)` under a fresh environment (two-sample KS).
pub fn temperature_equivalence_test(
    model: &ModelSpec,
    beta: f64,
    k: usize,
    replicas: usize,
    seed: u64,
    budget: &ExactBudget,
) -> Result<EquivalenceReport> {
    if replicas < 100 {
        return Err(Error::InvalidParameter(format!("need >= 100 replicas, got {replicas}")));
    }
    budget.check(model)?;
    let n = model.n() as f64;
    let beta_eff = beta * (1.0 + k as f64 / n).sqrt();
    let fresh_seed = splitmix64(seed ^ 0x5eed_f1e5);
    let pairs: Vec<((f64, f64), (f64, f64))> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let env = perturb(&PerturbationStack::sample(model, seed, r, k))?;
            let a = ExactGibbs::with_budget(model, &env, beta, budget)?;
            let fresh = model.sample_environment_replica(fresh_seed, r);
            let b = ExactGibbs::with_budget(model, &fresh, beta_eff, budget)?;
            Ok((
                (a.summary().free_energy, a.mean_overlap()),
                (b.summary().free_energy, b.mean_overlap()),
            ))
        })
        .collect::<Result<_>>()?;
    let fa: Vec<f64> = pairs.iter().map(|p| p.0 .0).collect();
    let fb: Vec<f64> = pairs.iter().map(|p| p.1 .0).collect();
    let ra: Vec<f64> = pairs.iter().map(|p| p.0 .1).collect();
    let rb: Vec<f64> = pairs.iter().map(|p| p.1 .1).collect();
    Ok(EquivalenceReport {
        beta,
        k,
        beta_effective: beta_eff,
        replicas,
        ks_free_energy: ks_two_sample(&fa, &fb),
        ks_mean_overlap: ks_two_sample(&ra, &rb),
        mean_free_energy_perturbed: fa.iter().sum::<f64>() / replicas as f64,
        mean_free_energy_fresh: fb.iter().sum::<f64>() / replicas as f64,
    })
}

/// `log ⟨e^{a H_h}⟩` under `gibbs`, with `H_h` the Hamiltonian of `h`.
fn log_tilt(gibbs: &ExactGibbs, h: &Environment, a: f64, budget: &ExactBudget) -> Result<f64> {
    let model = gibbs.model();
    let mut acc = LogSumExp::default();
    let mut err = None;
    gibbs.for_each_state(budget, |s, p| {
        if p > 0.0 {
            match model.hamiltonian(h, s) {
                Ok(e) => acc.push(p.ln() + a * e),
                Err(e) => err = Some(e),
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(acc.value()),
    }
}

/// `X = sqrt(2⟨e^{2βH_h/√n}⟩) ⟨e^{-βH_h/√n}⟩` under the Gibbs measure of `env`.
pub fn inclusion_factor(model: &ModelSpec, env: &Environment, h_env: &Environment, beta: f64) -> Result<f64> {
    let budget = ExactBudget::default();
    let gibbs = ExactGibbs::with_budget(model, env, beta, &budget)?;
    inclusion_factor_from(&gibbs, h_env, &budget)
}

pub fn inclusion_factor_from(gibbs: &ExactGibbs, h_env: &Environment, budget: &ExactBudget) -> Result<f64> {
    let model = gibbs.model();
    if h_env.len() != model.feature_count() {
        return Err(Error::dims(model.feature_count(), h_env.len()));
    }
    let a = gibbs.beta() / (model.n() as f64).sqrt();
    let up = log_tilt(gibbs, h_env, 2.0 * a, budget)?;
    let down = log_tilt(gibbs, h_env, -a, budget)?;
    Ok(std::f64::consts::SQRT_2 * (0.5 * up + down).exp())
}

/// State-by-state check of `R'(σ) <= (X/√2) sqrt(R(σ))`, hence of
/// `A_δ ⊆ A'_{X√δ}`, where primes refer to `env + h/√n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionCheck {
    pub x: f64,
    pub states_checked: usize,
    pub in_a_delta: usize,
    pub violations: usize,
    /// `max R'(σ) / ((X/√2) sqrt(R(σ)))` over all states.
    pub max_ratio: f64,
}

pub fn inclusion_check(
    model: &ModelSpec,
    env: &Environment,
    h_env: &Environment,
    beta: f64,
    delta: f64,
    budget: &ExactBudget,
) -> Result<InclusionCheck> {
    let g0 = ExactGibbs::with_budget(model, env, beta, budget)?;
    let x = inclusion_factor_from(&g0, h_env, budget)?;
    let pert = perturb(&PerturbationStack::new(env.clone(), vec![h_env.clone()], model.n())?)?;
    let g1 = ExactGibbs::with_budget(model, &pert, beta, budget)?;
    let mut out = InclusionCheck {
        x,
        states_checked: 0,
        in_a_delta: 0,
        violations: 0,
        max_ratio: 0.0,
    };
    let mut err = None;
    let mut visit = |s: &StateId| -> Result<()> {
        let r0 = g0.conditional_overlap(s)?;
        let r1 = g1.conditional_overlap(s)?;
        let bound = x / std::f64::consts::SQRT_2 * r0.max(0.0).sqrt();
        out.states_checked += 1;
        if bound > 0.0 {
            out.max_ratio = out.max_ratio.max(r1 / bound);
        }
        let tol = 1e-12 * (1.0 + bound);
        if r1 > bound + tol {
            out.violations += 1;
        }
        if r0 <= delta {
            out.in_a_delta += 1;
            if r1 > x * delta.sqrt() + tol {
                out.violations += 1;
            }
        }
        Ok(())
    };
    g0.for_each_state(budget, |s, _| {
        if err.is_none() {
            if let Err(e) = visit(s) {
                err = Some(e);
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Exact `Var_h ⟨f e^{(t/√n) H_h}⟩` and its two upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HVarianceReport {
    pub t: f64,
    pub variance: f64,
    /// `e^{2t²} ⟨f²⟩ sqrt(⟨R⟩)`.
    pub bound_a: f64,
    /// `e^{2t²} ⟨f(σ) R(σ)⟩`, valid for `f` with values in `[0, 1]`.
    pub bound_b: Option<f64>,
}

/// Largest state space for the pairwise double sum.
pub const H_VARIANCE_MAX_STATES: usize = 1 << 14;

/// Evaluate `e^{t²} ⟨f(σ¹) f(σ²) (e^{t² R₁₂} - 1)⟩` by double enumeration.
pub fn perturbed_gibbs_variance(
    gibbs: &ExactGibbs,
    f: impl Fn(&StateId) -> f64,
    t: f64,
    budget: &ExactBudget,
) -> Result<HVarianceReport> {
    let mut states = Vec::new();
    gibbs.for_each_state(budget, |s, p| {
        if p > 0.0 {
            states.push((s.clone(), p));
        }
    })?;
    if states.len() > H_VARIANCE_MAX_STATES {
        return Err(Error::BudgetExceeded(format!(
            "{} states exceed the pairwise cap {H_VARIANCE_MAX_STATES}",
            states.len()
        )));
    }
    let model = gibbs.model();
    let fv: Vec<f64> = states.iter().map(|(s, _)| f(s)).collect();
    let t2 = t * t;
    let mut pair_sum = 0.0;
    for (a, (sa, pa)) in states.iter().enumerate() {
        for (b, (sb, pb)) in states.iter().enumerate().skip(a) {
            let r = model.overlap(sa, sb)?;
            let term = pa * pb * fv[a] * fv[b] * (t2 * r).exp_m1();
            pair_sum += if a == b { term } else { 2.0 * term };
        }
    }
    let variance = t2.exp() * pair_sum;
    let f2: f64 = states.iter().zip(&fv).map(|((_, p), v)| p * v * v).sum();
    let bound_a = (2.0 * t2).exp() * f2 * gibbs.mean_overlap().max(0.0).sqrt();
    let unit = fv.iter().all(|v| (0.0..=1.0).contains(v));
    let bound_b = if unit {
        let mut fr = 0.0;
        for ((s, p), v) in states.iter().zip(&fv) {
            fr += p * v * gibbs.conditional_overlap(s)?;
        }
        Some((2.0 * t2).exp() * fr)
    } else {
        None
    };
    Ok(HVarianceReport {
        t,
        variance,
        bound_a,
        bound_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Polymer, Rem};
    use approx::assert_relative_eq;

    #[test]
    fn ou_zero_time_is_identity() {
        let m = ModelSpec::Rem(Rem::new(5).unwrap());
        let env = m.sample_environment(1);
        assert_eq!(ou_evolve(&env, 0.0, 3).unwrap(), env);
        assert!(ou_evolve(&env, -1.0, 3).is_err());
    }

    #[test]
    fn integrand_vanishes_at_beta_zero() {
        let m = ModelSpec::Rem(Rem::new(6).unwrap());
        let env = m.sample_environment(2);
        assert_eq!(ou_generator_integrand(&m, &env, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn variance_experiment_beta_zero() {
        let m = ModelSpec::Rem(Rem::new(4).unwrap());
        let r = ou_variance_experiment(&m, 0.0, 2.0, 30, 1, &ExactBudget::default()).unwrap();
        assert_eq!(r.variance_lhs, 0.0);
        assert_eq!(r.variance_rhs, 0.0);
        assert!(r.holds);
        assert!(ou_variance_experiment(&m, 1.0, 2.0, 29, 1, &ExactBudget::default()).is_err());
    }

    #[test]
    fn perturb_k_zero_is_identity() {
        let m = ModelSpec::Polymer(Polymer::simple(4, 1).unwrap());
        let st = PerturbationStack::sample(&m, 3, 0, 0);
        assert_eq!(perturb(&st).unwrap().g, st.base.g);
        let bad = PerturbationStack::new(st.base.clone(), vec![Environment::zeros(3)], 4);
        assert!(bad.is_err());
    }

    #[test]
    fn inclusion_factor_zero_field() {
        let m = ModelSpec::Polymer(Polymer::simple(5, 1).unwrap());
        let env = m.sample_environment(4);
        let x = inclusion_factor(&m, &env, &Environment::zeros(m.feature_count()), 1.3).unwrap();
        assert_relative_eq!(x, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn time_average_at_beta_zero_is_constant() {
        let m = ModelSpec::Rem(Rem::new(6).unwrap());
        let r = time_averaged_overlap(&m, 0.0, 4.0, 10, 1, &ExactBudget::default()).unwrap();
        assert_relative_eq!(r.value, 2f64.powi(-6), epsilon = 1e-14);
    }

    #[test]
    fn equivalence_needs_replicas() {
        let m = ModelSpec::Rem(Rem::new(4).unwrap());
        assert!(temperature_equivalence_test(&m, 1.0, 1, 99, 0, &ExactBudget::default()).is_err());
    }
}
