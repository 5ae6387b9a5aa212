//! Exact Gibbs computation: exhaustive enumeration for spin models and
//! forward/backward transfer tables for polymers. All weights live in the
//! log domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{path_positions, Environment, ModelSpec, Site, StateId};
use crate::models::{spins_from_bits, MixedPSpin, Polymer};
use crate::stats::{log_sum_exp, LogSumExp};

/// Size limits for exact engines. Instances beyond them must use sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactBudget {
    pub max_rem_n: usize,
    pub max_pspin_n: usize,
    pub max_polymer_n: usize,
    pub max_polymer_d: usize,
    /// Cap on explicit path enumeration (energy concentration, A-mass).
    pub max_enumerated_paths: u64,
}

impl Default for ExactBudget {
    fn default() -> Self {
        Self {
            max_rem_n: 20,
            max_pspin_n: 12,
            max_polymer_n: 64,
            max_polymer_d: 2,
            max_enumerated_paths: 1 << 22,
        }
    }
}

impl ExactBudget {
    pub fn check(&self, model: &ModelSpec) -> Result<()> {
        let over = |what: String| Err(Error::BudgetExceeded(what));
        match model {
            ModelSpec::Rem(m) if m.n > self.max_rem_n => {
                over(format!("REM n = {} > {}", m.n, self.max_rem_n))
            }
            ModelSpec::PSpin(m) if m.n > self.max_pspin_n => {
                over(format!("p-spin n = {} > {}", m.n, self.max_pspin_n))
            }
            ModelSpec::Polymer(p) if p.n > self.max_polymer_n || p.d > self.max_polymer_d => over(format!(
                "polymer n = {}, d = {} exceeds n <= {}, d <= {}",
                p.n, p.d, self.max_polymer_n, self.max_polymer_d
            )),
            _ => Ok(()),
        }
    }

    pub fn check_enumeration(&self, model: &ModelSpec) -> Result<()> {
        self.check(model)?;
        if model.state_count() > self.max_enumerated_paths as u128 {
            return Err(Error::BudgetExceeded(format!(
                "{} states exceed the enumeration cap {}",
                model.state_count(),
                self.max_enumerated_paths
            )));
        }
        Ok(())
    }

    /// Rough bytes needed by the exact tables of `model`.
    pub fn memory_estimate(model: &ModelSpec) -> u64 {
        match model {
            ModelSpec::Rem(m) => 16 * (1u64 << m.n),
            ModelSpec::PSpin(m) => 16 * (1u64 << m.n) + 8 * (m.n as u64).pow(3),
            ModelSpec::Polymer(p) => 8 * 4 * (p.n as u64 + 1) * p.slice_len() as u64,
        }
    }
}

/// Thermodynamic summary at one inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GibbsSummary {
    pub beta: f64,
    /// `log Z` with the reference measure folded in, so `log Z(0) = 0`.
    pub log_z: f64,
    /// `F = log Z / n`.
    pub free_energy: f64,
    /// `F' = ⟨H⟩ / n`.
    pub free_energy_derivative: f64,
    /// `F'' = (⟨H²⟩ - ⟨H⟩²) / n`.
    pub free_energy_second: f64,
    /// `⟨R_{1,2}⟩ = (1/n) Σ_i ⟨φ_i⟩²`.
    pub mean_overlap: f64,
}

/// `mu[i][x] = P(σ(i) = x)` over the box layout of the polymer.
#[derive(Debug, Clone)]
pub struct PolymerMarginals {
    pub polymer: Polymer,
    /// Row `i - 1` holds the time-`i` slice, indexed by `Polymer::site_index`.
    pub mu: Vec<f64>,
}

impl PolymerMarginals {
    pub fn slice(&self, i: usize) -> &[f64] {
        let l = self.polymer.slice_len();
        &self.mu[(i - 1) * l..i * l]
    }

    pub fn get(&self, i: usize, x: &Site) -> f64 {
        let b = self.polymer.n as i32;
        if x.iter().any(|c| c.abs() > b) {
            return 0.0;
        }
        self.slice(i)[self.polymer.site_index(x)]
    }

    /// Nonzero entries of slice `i` as `(site, probability)`.
    pub fn support(&self, i: usize) -> Vec<(Site, f64)> {
        self.slice(i)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (self.polymer.site_at(k), p))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct SpinTable {
    energies: Vec<f64>,
    probs: Vec<f64>,
    log_norm: f64,
    moments: Option<SpinMoments>,
}

/// Correlation functions of a p-spin Gibbs measure.
#[derive(Debug, Clone)]
struct SpinMoments {
    m1: Vec<f64>,
    /// `m2[i*n + j]` for `i < j`.
    m2: Vec<f64>,
    /// `m3[(i*n + j)*n + k]` for `i < j < k`; empty without a cubic term.
    m3: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct PolymerTables {
    pub(crate) polymer: Polymer,
    /// `bwd[i*L + x]`: log weight of completing the path from `(i, x)`.
    pub(crate) bwd: Vec<f64>,
    pub(crate) log_z_raw: f64,
    pub(crate) log_admissible: f64,
    mu: Vec<f64>,
    mean_h: f64,
    var_h: f64,
}

#[derive(Debug, Clone)]
enum Inner {
    Spin(SpinTable),
    Polymer(PolymerTables),
}

/// An exactly solved Gibbs measure `μ(σ) ∝ e^{βH(σ)} P(dσ)`.
#[derive(Debug, Clone)]
pub struct ExactGibbs {
    model: ModelSpec,
    env: Environment,
    beta: f64,
    inner: Inner,
    summary: GibbsSummary,
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be finite, got {beta}")));
    }
    Ok(())
}

impl ExactGibbs {
    pub fn new(model: &ModelSpec, env: &Environment, beta: f64) -> Result<Self> {
        Self::with_budget(model, env, beta, &ExactBudget::default())
    }

    pub fn with_budget(model: &ModelSpec, env: &Environment, beta: f64, budget: &ExactBudget) -> Result<Self> {
        check_beta(beta)?;
        budget.check(model)?;
        if env.len() != model.feature_count() {
            return Err(Error::dims(model.feature_count(), env.len()));
        }
        log::trace!(
            "exact tables for n = {}: ~{} bytes",
            model.n(),
            ExactBudget::memory_estimate(model)
        );
        let n = model.n() as f64;
        let inner = match model {
            ModelSpec::Rem(m) => {
                let s = (m.n as f64).sqrt();
                Inner::Spin(spin_table(env.g.iter().map(|g| s * g).collect(), beta, None, m.n))
            }
            ModelSpec::PSpin(m) => {
                let energies = pspin_energies(m, &env.g);
                Inner::Spin(spin_table(energies, beta, Some(m), m.n))
            }
            ModelSpec::Polymer(p) => Inner::Polymer(polymer_tables(p, &env.g, beta)),
        };
        let (log_z, mean_h, var_h) = match &inner {
            Inner::Spin(t) => {
                let mean: f64 = t.probs.iter().zip(&t.energies).map(|(p, e)| p * e).sum();
                let var: f64 = t.probs.iter().zip(&t.energies).map(|(p, e)| p * (e - mean).powi(2)).sum();
                (t.log_norm - model.n() as f64 * std::f64::consts::LN_2, mean, var)
            }
            Inner::Polymer(t) => (t.log_z_raw - t.log_admissible, t.mean_h, t.var_h),
        };
        let mut gibbs = Self {
            model: model.clone(),
            env: env.clone(),
            beta,
            inner,
            summary: GibbsSummary {
                beta,
                log_z,
                free_energy: log_z / n,
                free_energy_derivative: mean_h / n,
                free_energy_second: var_h / n,
                mean_overlap: 0.0,
            },
        };
        gibbs.summary.mean_overlap = gibbs.compute_mean_overlap();
        Ok(gibbs)
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn summary(&self) -> &GibbsSummary {
        &self.summary
    }

    pub fn log_partition(&self) -> f64 {
        self.summary.log_z
    }

    pub fn mean_overlap(&self) -> f64 {
        self.summary.mean_overlap
    }

    /// `⟨H⟩`.
    pub fn mean_energy(&self) -> f64 {
        self.summary.free_energy_derivative * self.model.n() as f64
    }

    /// `⟨H²⟩ - ⟨H⟩²`.
    pub fn energy_variance(&self) -> f64 {
        self.summary.free_energy_second * self.model.n() as f64
    }

    /// Gibbs probabilities indexed by spin bitmask (spin models only).
    pub fn probabilities(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Spin(t) => Some(&t.probs),
            Inner::Polymer(_) => None,
        }
    }

    /// Energies indexed by spin bitmask (spin models only).
    pub fn energies(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Spin(t) => Some(&t.energies),
            Inner::Polymer(_) => None,
        }
    }

    pub(crate) fn polymer_tables(&self) -> Option<&PolymerTables> {
        match &self.inner {
            Inner::Polymer(t) => Some(t),
            Inner::Spin(_) => None,
        }
    }

    /// `log μ(σ)`.
    pub fn log_prob(&self, sigma: &StateId) -> Result<f64> {
        self.model.validate_state(sigma)?;
        match (&self.inner, sigma) {
            (Inner::Spin(t), StateId::Spins { bits, .. }) => Ok(self.beta * t.energies[*bits as usize] - t.log_norm),
            (Inner::Polymer(t), StateId::Path { steps, .. }) => {
                let p = &t.polymer;
                if !p.admits(steps) {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(p.log_path_prob(steps) + self.beta * p.path_energy(&self.env.g, steps) - t.log_z_raw)
            }
            _ => unreachable!("validated state"),
        }
    }

    fn compute_mean_overlap(&self) -> f64 {
        match (&self.inner, &self.model) {
            (Inner::Spin(t), ModelSpec::Rem(_)) => t.probs.iter().map(|p| p * p).sum(),
            (Inner::Spin(t), ModelSpec::PSpin(m)) => {
                let mo = t.moments.as_ref().expect("p-spin moments");
                let n = m.n;
                pspin_overlap_sum(
                    m,
                    mo,
                    |i| mo.m1[i],
                    |i, j| mo.m2[i * n + j],
                    |i, j, k| mo.m3[(i * n + j) * n + k],
                )
            }
            (Inner::Polymer(t), ModelSpec::Polymer(p)) => t.mu.iter().map(|x| x * x).sum::<f64>() / p.n as f64,
            _ => unreachable!("engine matches model"),
        }
    }

    /// `R(σ) = (1/n) Σ_i φ_i(σ) ⟨φ_i⟩`.
    pub fn conditional_overlap(&self, sigma: &StateId) -> Result<f64> {
        self.model.validate_state(sigma)?;
        Ok(match (&self.inner, &self.model, sigma) {
            (Inner::Spin(t), ModelSpec::Rem(_), StateId::Spins { bits, .. }) => t.probs[*bits as usize],
            (Inner::Spin(t), ModelSpec::PSpin(m), StateId::Spins { bits, .. }) => {
                let mo = t.moments.as_ref().expect("p-spin moments");
                let s = spins_from_bits(m.n, *bits);
                pspin_overlap_sum(m, mo, |i| s[i], |i, j| s[i] * s[j], |i, j, k| s[i] * s[j] * s[k])
            }
            (Inner::Polymer(t), ModelSpec::Polymer(p), StateId::Path { steps, .. }) => {
                let l = p.slice_len();
                path_positions(steps)
                    .iter()
                    .enumerate()
                    .map(|(i, x)| t.mu[i * l + p.site_index(x)])
                    .sum::<f64>()
                    / p.n as f64
            }
            _ => unreachable!("validated state"),
        })
    }

    /// Dense Gibbs feature means `⟨φ_i⟩`.
    pub fn feature_means(&self) -> Vec<f64> {
        match (&self.inner, &self.model) {
            (Inner::Spin(t), ModelSpec::Rem(m)) => {
                let s = (m.n as f64).sqrt();
                t.probs.iter().map(|p| s * p).collect()
            }
            (Inner::Spin(t), ModelSpec::PSpin(m)) => {
                let mut out = vec![0.0; m.feature_count()];
                let mut phi = vec![0.0; m.feature_count()];
                for (bits, &p) in t.probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    m.fill_features(bits as u64, &mut phi);
                    for (o, f) in out.iter_mut().zip(&phi) {
                        *o += p * f;
                    }
                }
                out
            }
            (Inner::Polymer(t), _) => t.mu.clone(),
            _ => unreachable!("engine matches model"),
        }
    }

    pub fn polymer_marginals(&self) -> Result<PolymerMarginals> {
        match &self.inner {
            Inner::Polymer(t) => Ok(PolymerMarginals {
                polymer: t.polymer.clone(),
                mu: t.mu.clone(),
            }),
            Inner::Spin(_) => Err(Error::Unsupported("marginals are defined for polymers only".into())),
        }
    }

    /// Visit every state with positive Gibbs probability.
    pub fn for_each_state(&self, budget: &ExactBudget, mut f: impl FnMut(&StateId, f64)) -> Result<()> {
        match &self.inner {
            Inner::Spin(t) => {
                let n = self.model.n();
                for (bits, &p) in t.probs.iter().enumerate() {
                    f(&StateId::spins(n, bits as u64), p);
                }
                Ok(())
            }
            Inner::Polymer(t) => {
                budget.check_enumeration(&self.model)?;
                let beta = self.beta;
                let z = t.log_z_raw;
                for_each_path(&t.polymer, &self.env.g, |steps, h, logp| {
                    f(&StateId::path(t.polymer.d, steps.to_vec()), (logp + beta * h - z).exp());
                });
                Ok(())
            }
        }
    }

    /// `⟨f(σ)⟩` by enumeration.
    pub fn expectation(&self, budget: &ExactBudget, mut f: impl FnMut(&StateId) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        self.for_each_state(budget, |s, p| {
            if p > 0.0 {
                acc += p * f(s);
            }
        })?;
        Ok(acc)
    }

    /// `⟨|H/n - F'|⟩`.
    pub fn energy_concentration(&self, budget: &ExactBudget) -> Result<f64> {
        let n = self.model.n() as f64;
        let fp = self.summary.free_energy_derivative;
        match &self.inner {
            Inner::Spin(t) => Ok(t.probs.iter().zip(&t.energies).map(|(p, e)| p * (e / n - fp).abs()).sum()),
            Inner::Polymer(t) => {
                let (p, g) = (&t.polymer, &self.env.g);
                self.expectation(budget, |s| match s {
                    StateId::Path { steps, .. } => (p.path_energy(g, steps) / n - fp).abs(),
                    StateId::Spins { .. } => unreachable!("polymer state"),
                })
            }
        }
    }
}

fn spin_table(energies: Vec<f64>, beta: f64, pspin: Option<&MixedPSpin>, n: usize) -> SpinTable {
    let logw: Vec<f64> = energies.iter().map(|e| beta * e).collect();
    let log_norm = log_sum_exp(&logw);
    let probs: Vec<f64> = logw.iter().map(|w| (w - log_norm).exp()).collect();
    let moments = pspin.map(|m| spin_moments(m, &probs, n));
    SpinTable {
        energies,
        probs,
        log_norm,
        moments,
    }
}

/// Energies of all `2^n` configurations by Gray-code traversal with
/// cached local fields.
pub fn pspin_energies(m: &MixedPSpin, g: &[f64]) -> Vec<f64> {
    let n = m.n;
    let c = m.couplings(g);
    let mut s = vec![-1.0; n];
    let mut fields = c.local_fields(&s);
    let mut h = c.energy(&s);
    let mut out = vec![0.0; 1 << n];
    out[0] = h;
    for i in 1u64..(1 << n) {
        let k = i.trailing_zeros() as usize;
        h += c.flip(&mut s, &mut fields, k);
        out[(i ^ (i >> 1)) as usize] = h;
    }
    out
}

fn spin_moments(m: &MixedPSpin, probs: &[f64], n: usize) -> SpinMoments {
    let cubic = m.xi.beta_p(3) != 0.0;
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n * n];
    let mut m3 = if cubic { vec![0.0; n * n * n] } else { Vec::new() };
    let mut s = vec![0.0; n];
    for (bits, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (i, si) in s.iter_mut().enumerate() {
            *si = if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        for i in 0..n {
            let pi = p * s[i];
            m1[i] += pi;
            for j in i + 1..n {
                let pij = pi * s[j];
                m2[i * n + j] += pij;
                if cubic {
                    let row = &mut m3[(i * n + j) * n..(i * n + j + 1) * n];
                    for k in j + 1..n {
                        row[k] += pij * s[k];
                    }
                }
            }
        }
    }
    SpinMoments { m1, m2, m3 }
}

/// `Σ_p β_p² n^{-p} Σ_{tuples} w(tuple) ⟨σ_tuple⟩` after collapsing
/// repeated indices; `w` is given per distinct-index pattern.
fn pspin_overlap_sum(
    m: &MixedPSpin,
    mo: &SpinMoments,
    w1: impl Fn(usize) -> f64,
    w2: impl Fn(usize, usize) -> f64,
    w3: impl Fn(usize, usize, usize) -> f64,
) -> f64 {
    let n = m.n;
    let nf = n as f64;
    let mut total = 0.0;
    for &(p, b) in m.xi.terms() {
        let scale = b * b / nf.powi(p as i32);
        match p {
            2 => {
                let mut pairs = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        pairs += w2(i, j) * mo.m2[i * n + j];
                    }
                }
                total += scale * (nf + 2.0 * pairs);
            }
            3 => {
                let single: f64 = (0..n).map(|i| w1(i) * mo.m1[i]).sum();
                let mut triple = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        for k in j + 1..n {
                            triple += w3(i, j, k) * mo.m3[(i * n + j) * n + k];
                        }
                    }
                }
                total += scale * ((3.0 * nf - 2.0) * single + 6.0 * triple);
            }
            _ => unreachable!("validated p"),
        }
    }
    total
}

/// Depth-first enumeration of admissible polymer paths with their energy
/// and log reference probability.
pub fn for_each_path(p: &Polymer, g: &[f64], mut f: impl FnMut(&[u8], f64, f64)) {
    let mut steps = vec![0u8; p.n];
    let l = p.slice_len();
    let origin = p.site_index(&[0, 0, 0]);
    let offs: Vec<isize> = (0..2 * p.d as u8).map(|s| p.step_offset(s)).collect();
    let logk: Vec<f64> = (0..2 * p.d as u8).map(|s| p.kernel.log_prob(s)).collect();
    let end = p.endpoint.map(|e| p.site_index(&e));
    type Ctx<'a> = (&'a Polymer, &'a [f64], usize, &'a [isize], &'a [f64], Option<usize>);
    #[allow(clippy::too_many_arguments)]
    fn rec(
        depth: usize,
        site: usize,
        h: f64,
        lp: f64,
        steps: &mut [u8],
        ctx: Ctx<'_>,
        f: &mut dyn FnMut(&[u8], f64, f64),
    ) {
        let (p, g, l, offs, logk, end) = ctx;
        if depth == p.n {
            if end.is_none_or(|e| e == site) {
                f(steps, h, lp);
            }
            return;
        }
        for s in 0..offs.len() {
            if logk[s] == f64::NEG_INFINITY {
                continue;
            }
            let next = (site as isize + offs[s]) as usize;
            steps[depth] = s as u8;
            rec(depth + 1, next, h + g[depth * l + next], lp + logk[s], steps, ctx, f);
        }
    }
    rec(0, origin, 0.0, 0.0, &mut steps, (p, g, l, &offs, &logk, end), &mut f);
}

/// Visit every state of any model with `(state, H(σ), log P(σ))`.
pub fn enumerate_states(
    model: &ModelSpec,
    env: &Environment,
    budget: &ExactBudget,
    mut f: impl FnMut(&StateId, f64, f64),
) -> Result<()> {
    budget.check_enumeration(model)?;
    if env.len() != model.feature_count() {
        return Err(Error::dims(model.feature_count(), env.len()));
    }
    match model {
        ModelSpec::Polymer(p) => {
            for_each_path(p, &env.g, |steps, h, lp| f(&StateId::path(p.d, steps.to_vec()), h, lp));
        }
        _ => {
            let n = model.n();
            let lp = -(n as f64) * std::f64::consts::LN_2;
            let energies = match model {
                ModelSpec::PSpin(m) => pspin_energies(m, &env.g),
                _ => {
                    let s = (n as f64).sqrt();
                    env.g.iter().map(|x| s * x).collect()
                }
            };
            for (bits, h) in energies.into_iter().enumerate() {
                f(&StateId::spins(n, bits as u64), h, lp);
            }
        }
    }
    Ok(())
}

fn polymer_tables(p: &Polymer, g: &[f64], beta: f64) -> PolymerTables {
    let n = p.n;
    let l = p.slice_len();
    let origin = p.site_index(&[0, 0, 0]);
    let ns = 2 * p.d;
    let offs: Vec<isize> = (0..ns as u8).map(|s| p.step_offset(s)).collect();
    let logk: Vec<f64> = (0..ns as u8).map(|s| p.kernel.log_prob(s)).collect();
    let ninf = f64::NEG_INFINITY;

    let forward = |beta: f64| {
        let mut fwd = vec![ninf; (n + 1) * l];
        fwd[origin] = 0.0;
        let mut acc = vec![LogSumExp::default(); l];
        for i in 1..=n {
            acc.iter_mut().for_each(|a| *a = LogSumExp::default());
            let (prev, cur) = fwd.split_at_mut(i * l);
            let prev = &prev[(i - 1) * l..];
            for (y, &fy) in prev.iter().enumerate() {
                if fy == ninf {
                    continue;
                }
                for s in 0..ns {
                    let x = (y as isize + offs[s]) as usize;
                    acc[x].push(fy + logk[s]);
                }
            }
            for x in 0..l {
                let v = acc[x].value();
                cur[x] = if v == ninf { ninf } else { v + beta * g[(i - 1) * l + x] };
            }
        }
        fwd
    };
    let fwd = forward(beta);

    let mut bwd = vec![ninf; (n + 1) * l];
    match p.endpoint {
        Some(e) => bwd[n * l + p.site_index(&e)] = 0.0,
        None => {
            for x in 0..l {
                if fwd[n * l + x] != ninf {
                    bwd[n * l + x] = 0.0;
                }
            }
        }
    }
    for i in (1..=n).rev() {
        for y in 0..l {
            if fwd[(i - 1) * l + y] == ninf {
                continue;
            }
            let mut a = LogSumExp::default();
            for s in 0..ns {
                let x = (y as isize + offs[s]) as usize;
                let b = bwd[i * l + x];
                if b != ninf {
                    a.push(logk[s] + beta * g[(i - 1) * l + x] + b);
                }
            }
            bwd[(i - 1) * l + y] = a.value();
        }
    }
    let log_z_raw = bwd[origin];
    let log_admissible = match p.endpoint {
        Some(e) => forward(0.0)[n * l + p.site_index(&e)],
        None => 0.0,
    };

    let mut mu = vec![0.0; n * l];
    for i in 1..=n {
        for x in 0..l {
            let (f, b) = (fwd[i * l + x], bwd[i * l + x]);
            if f != ninf && b != ninf {
                mu[(i - 1) * l + x] = (f + b - log_z_raw).exp();
            }
        }
    }

    // Conditional mean and variance of the partial energy given the site,
    // propagated forward; mixing uses the law of total variance.
    let mut m_prev = vec![0.0; l];
    let mut v_prev = vec![0.0; l];
    let mut m_cur = vec![0.0; l];
    let mut v_cur = vec![0.0; l];
    for i in 1..=n {
        m_cur.iter_mut().for_each(|x| *x = 0.0);
        v_cur.iter_mut().for_each(|x| *x = 0.0);
        let fprev = &fwd[(i - 1) * l..i * l];
        let fcur = &fwd[i * l..(i + 1) * l];
        let base = |x: usize| fcur[x] - beta * g[(i - 1) * l + x];
        for (y, &fy) in fprev.iter().enumerate() {
            if fy == ninf {
                continue;
            }
            for s in 0..ns {
                let x = (y as isize + offs[s]) as usize;
                let w = (fy + logk[s] - base(x)).exp();
                m_cur[x] += w * m_prev[y];
            }
        }
        for (y, &fy) in fprev.iter().enumerate() {
            if fy == ninf {
                continue;
            }
            for s in 0..ns {
                let x = (y as isize + offs[s]) as usize;
                let w = (fy + logk[s] - base(x)).exp();
                v_cur[x] += w * (v_prev[y] + (m_prev[y] - m_cur[x]).powi(2));
            }
        }
        for x in 0..l {
            if fcur[x] != ninf {
                m_cur[x] += g[(i - 1) * l + x];
            }
        }
        std::mem::swap(&mut m_prev, &mut m_cur);
        std::mem::swap(&mut v_prev, &mut v_cur);
    }
    let last = &mu[(n - 1) * l..];
    let mean_h: f64 = last.iter().zip(&m_prev).map(|(p, m)| p * m).sum();
    let var_h: f64 = last
        .iter()
        .zip(m_prev.iter().zip(&v_prev))
        .map(|(p, (m, v))| p * (v + (m - mean_h).powi(2)))
        .sum();

    PolymerTables {
        polymer: p.clone(),
        bwd,
        log_z_raw,
        log_admissible,
        mu,
        mean_h,
        var_h,
    }
}

pub fn log_partition(model: &ModelSpec, env: &Environment, beta: f64) -> Result<f64> {
    Ok(ExactGibbs::new(model, env, beta)?.log_partition())
}

pub fn mean_overlap(model: &ModelSpec, env: &Environment, beta: f64) -> Result<f64> {
    Ok(ExactGibbs::new(model, env, beta)?.mean_overlap())
}

pub fn conditional_overlap(model: &ModelSpec, env: &Environment, beta: f64, sigma: &StateId) -> Result<f64> {
    ExactGibbs::new(model, env, beta)?.conditional_overlap(sigma)
}

pub fn polymer_marginals(model: &ModelSpec, env: &Environment, beta: f64) -> Result<PolymerMarginals> {
    if !matches!(model, ModelSpec::Polymer(_)) {
        return Err(Error::Unsupported("marginals are defined for polymers only".into()));
    }
    ExactGibbs::new(model, env, beta)?.polymer_marginals()
}

pub fn energy_concentration(model: &ModelSpec, env: &Environment, beta: f64) -> Result<f64> {
    let budget = ExactBudget::default();
    ExactGibbs::with_budget(model, env, beta, &budget)?.energy_concentration(&budget)
}

/// Summaries over a β grid, in grid order.
pub fn free_energy_profile(model: &ModelSpec, env: &Environment, betas: &[f64]) -> Result<Vec<GibbsSummary>> {
    betas
        .iter()
        .map(|&b| ExactGibbs::new(model, env, b).map(|g| *g.summary()))
        .collect()
}

/// Whether `F'' >= 0` everywhere and `F` has nonnegative discrete second
/// differences on the (sorted) grid, up to `tol`.
pub fn profile_is_convex(profile: &[GibbsSummary], tol: f64) -> bool {
    if profile.iter().any(|s| s.free_energy_second < -tol) {
        return false;
    }
    let mut pts: Vec<(f64, f64)> = profile.iter().map(|s| (s.beta, s.free_energy)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(3).all(|w| {
        let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
        s2 >= s1 - tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{MixedXi, Rem};
    use approx::assert_relative_eq;

    fn rem(n: usize) -> ModelSpec {
        ModelSpec::Rem(Rem::new(n).unwrap())
    }

    #[test]
    fn beta_zero_log_z_is_zero() {
        for m in [
            rem(5),
            ModelSpec::PSpin(MixedPSpin::pure(5, 2).unwrap()),
            ModelSpec::Polymer(Polymer::simple(5, 2).unwrap()),
        ] {
            let env = m.sample_environment(1);
            assert!(log_partition(&m, &env, 0.0).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn rem_four_state_oracle() {
        let m = rem(2);
        let env = Environment::from_values(vec![0.5, -0.5, 0.0, 1.0]).unwrap();
        let s = 2f64.sqrt();
        let expect = (0.25 * ((s * 0.5).exp() + (-s * 0.5).exp() + 1.0 + s.exp())).ln();
        assert_relative_eq!(log_partition(&m, &env, 1.0).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn rem_uniform_overlap() {
        let m = rem(4);
        let env = m.sample_environment(3);
        let gb = ExactGibbs::new(&m, &env, 0.0).unwrap();
        assert_relative_eq!(gb.mean_overlap(), 0.0625, epsilon = 1e-15);
        assert_relative_eq!(gb.conditional_overlap(&StateId::spins(4, 7)).unwrap(), 0.0625, epsilon = 1e-15);
        let fp: f64 = env.g.iter().map(|x| 2.0 * x).sum::<f64>() / 16.0 / 4.0;
        assert_relative_eq!(gb.summary().free_energy_derivative, fp, epsilon = 1e-14);
    }

    #[test]
    fn low_temperature_concentrates() {
        let m = rem(6);
        let env = m.sample_environment(11);
        let gb = ExactGibbs::new(&m, &env, 50.0).unwrap();
        assert!(gb.mean_overlap() >= 0.99);
        assert!(gb.energy_concentration(&ExactBudget::default()).unwrap() <= 1e-3);
    }

    #[test]
    fn polymer_beta_zero_marginals() {
        let m = ModelSpec::Polymer(Polymer::simple(4, 1).unwrap());
        let env = m.sample_environment(0);
        let mu = polymer_marginals(&m, &env, 0.0).unwrap();
        assert_relative_eq!(mu.get(1, &[1, 0, 0]), 0.5, epsilon = 1e-15);
        assert_relative_eq!(mu.get(1, &[-1, 0, 0]), 0.5, epsilon = 1e-15);
        assert_relative_eq!(mu.get(2, &[0, 0, 0]), 0.5, epsilon = 1e-15);
        assert_relative_eq!(mu.get(2, &[2, 0, 0]), 0.25, epsilon = 1e-15);
        assert_relative_eq!(mu.get(2, &[-2, 0, 0]), 0.25, epsilon = 1e-15);
        assert_eq!(mu.get(2, &[1, 0, 0]), 0.0);
    }

    #[test]
    fn pspin_gray_code_matches_direct() {
        let m = MixedPSpin::new(7, MixedXi::new(vec![(2, 0.8), (3, 0.6)]).unwrap()).unwrap();
        let spec = ModelSpec::PSpin(m.clone());
        let env = spec.sample_environment(4);
        let e = pspin_energies(&m, &env.g);
        for bits in 0..128u64 {
            assert_relative_eq!(e[bits as usize], m.hamiltonian_direct(&env.g, bits), epsilon = 1e-11);
        }
    }

    #[test]
    fn budget_errors() {
        let m = rem(21);
        let env = Environment::zeros(1 << 21);
        assert!(matches!(ExactGibbs::new(&m, &env, 1.0), Err(Error::BudgetExceeded(_))));
        let p = ModelSpec::Polymer(Polymer::simple(3, 3).unwrap());
        let env = p.sample_environment(0);
        assert!(matches!(ExactGibbs::new(&p, &env, 1.0), Err(Error::BudgetExceeded(_))));
        let relaxed = ExactBudget {
            max_polymer_d: 3,
            ..Default::default()
        };
        assert!(ExactGibbs::with_budget(&p, &env, 1.0, &relaxed).is_ok());
    }

    #[test]
    fn profile_convexity() {
        let m = rem(8);
        let env = m.sample_environment(9);
        let betas: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
        let prof = free_energy_profile(&m, &env, &betas).unwrap();
        assert!(profile_is_convex(&prof, 1e-12));
    }

    #[test]
    fn endpoint_constraint_normalizes() {
        let p = Polymer::new(4, crate::models::WalkKernel::simple(1).unwrap(), Some([0, 0, 0])).unwrap();
        let m = ModelSpec::Polymer(p);
        let env = m.sample_environment(2);
        let gb = ExactGibbs::new(&m, &env, 0.0).unwrap();
        assert!(gb.log_partition().abs() < 1e-12);
        let mu = gb.polymer_marginals().unwrap();
        assert_relative_eq!(mu.get(4, &[0, 0, 0]), 1.0, epsilon = 1e-12);
    }
}
