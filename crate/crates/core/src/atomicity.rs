//! Directed-polymer passage times, turns, turn flips and the decay of the
//! largest Gibbs atom.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{step_vector, Environment, Site, StateId};
use crate::models::Polymer;
use crate::rng::{Purpose, StreamKey};
use crate::stats::{log_add_exp, mean_se, quantile_sorted, sorted_copy};

/// Largest path count walked by [`turn_census_enumerated`].
pub const MAX_ENUMERATED_PATHS: u64 = 1 << 24;

/// Nearest-neighbour lattice path from the origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LatticePath {
    pub d: usize,
    /// Step indices, see [`step_vector`].
    pub steps: Vec<u8>,
}

impl LatticePath {
    pub fn new(d: usize, steps: Vec<u8>) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("d must be 1, 2 or 3, got {d}")));
        }
        if let Some(&s) = steps.iter().find(|&&s| s as usize >= 2 * d) {
            return Err(Error::Encoding(format!("step index {s} invalid for d = {d}")));
        }
        Ok(Self { d, steps })
    }

    /// The straight path along `+e_1`, lexicographically first.
    pub fn straight(d: usize, n: usize) -> Result<Self> {
        Self::new(d, vec![0; n])
    }

    pub fn from_state(state: &StateId) -> Result<Self> {
        match state {
            StateId::Path { d, steps } => Self::new(*d, steps.clone()),
            StateId::Spins { .. } => Err(Error::Encoding("expected a path state".into())),
        }
    }

    pub fn to_state(&self) -> StateId {
        StateId::path(self.d, self.steps.clone())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Positions `x_0 = 0, x_1, …, x_n`.
    pub fn positions(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut x = [0i32; 3];
        out.push(x);
        for &s in &self.steps {
            let v = step_vector(s);
            for a in 0..3 {
                x[a] += v[a];
            }
            out.push(x);
        }
        out
    }

    /// Turn set: times `1 <= i <= n-1` where step `i+1` differs from step `i`.
    pub fn turns(&self) -> Vec<usize> {
        (1..self.steps.len()).filter(|&i| self.steps[i] != self.steps[i - 1]).collect()
    }

    pub fn turn_count(&self) -> usize {
        self.steps.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

impl fmt::Display for LatticePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_state().fmt(f)
    }
}

/// Swap steps `i` and `i+1`; only `x_i` moves.
pub fn flip_at_turn(path: &LatticePath, i: usize) -> Result<LatticePath> {
    let n = path.steps.len();
    if i == 0 || i >= n || path.steps[i] == path.steps[i - 1] {
        return Err(Error::InvalidParameter(format!("{i} is not a turn of {path}")));
    }
    let mut steps = path.steps.clone();
    steps.swap(i - 1, i);
    Ok(LatticePath { d: path.d, steps })
}

/// Number of length-`n` paths in `Z^d` with exactly `j` turns, `j = 0..n-1`:
/// `2d C(n-1, j) (2d-1)^j`.
pub fn count_paths_by_turns(n: usize, d: usize) -> Result<Vec<BigUint>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    let two_d = BigUint::from(2 * d);
    let other = BigUint::from(2 * d - 1);
    let mut binom = BigUint::from(1u32);
    let mut pow = BigUint::from(1u32);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        out.push(&two_d * &binom * &pow);
        binom = binom * BigUint::from(n - 1 - j) / BigUint::from(j + 1);
        pow *= &other;
    }
    Ok(out)
}

/// Turn histogram by walking every path (odometer over step sequences).
pub fn turn_census_enumerated(n: usize, d: usize) -> Result<Vec<u64>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be >= 1".into()));
    }
    let total = (2 * d as u64).checked_pow(n as u32);
    if total.is_none_or(|t| t > MAX_ENUMERATED_PATHS) {
        return Err(Error::BudgetExceeded(format!(
            "(2d)^n paths for n = {n}, d = {d} exceed {MAX_ENUMERATED_PATHS}"
        )));
    }
    let base = 2 * d as u8;
    let mut steps = vec![0u8; n];
    let mut hist = vec![0u64; n];
    loop {
        hist[steps.windows(2).filter(|w| w[0] != w[1]).count()] += 1;
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(hist);
            }
            k -= 1;
            steps[k] += 1;
            if steps[k] < base {
                break;
            }
            steps[k] = 0;
        }
    }
}

fn check_env(polymer: &Polymer, env: &Environment) -> Result<()> {
    if env.len() != polymer.feature_count() {
        return Err(Error::dims(polymer.feature_count(), env.len()));
    }
    Ok(())
}

/// Backward tables over the box: best future gain and log future weight.
struct PathTables {
    polymer: Polymer,
    /// `best[i][x]`: max of `Σ_{k>i} ω(k, x_k)` over continuations from `(i, x)`.
    best: Vec<Vec<f64>>,
    log_weight: Vec<f64>,
}

fn path_tables(polymer: &Polymer, env: &Environment, beta: Option<f64>) -> PathTables {
    let n = polymer.n;
    let slice = polymer.slice_len();
    let sites: Vec<Site> = (0..slice).map(|k| polymer.site_at(k)).collect();
    let offsets: Vec<isize> = (0..2 * polymer.d as u8).map(|s| polymer.step_offset(s)).collect();
    let mut best = vec![vec![f64::NEG_INFINITY; slice]; n + 1];
    best[n].iter_mut().for_each(|v| *v = 0.0);
    let mut lw_next = vec![0.0; slice];
    let mut lw = vec![f64::NEG_INFINITY; slice];
    for i in (0..n).rev() {
        let w = &env.g[i * slice..(i + 1) * slice];
        let (head, tail) = best.split_at_mut(i + 1);
        let (cur, next) = (&mut head[i], &tail[0]);
        for (k, x) in sites.iter().enumerate() {
            if x.iter().any(|c| c.unsigned_abs() as usize > i) {
                continue;
            }
            let mut m = f64::NEG_INFINITY;
            let mut l = f64::NEG_INFINITY;
            for &off in &offsets {
                let y = (k as isize + off) as usize;
                m = m.max(w[y] + next[y]);
                if let Some(b) = beta {
                    l = log_add_exp(l, b * w[y] + lw_next[y]);
                }
            }
            cur[k] = m;
            lw[k] = l;
        }
        std::mem::swap(&mut lw, &mut lw_next);
        lw.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
    }
    PathTables {
        polymer: polymer.clone(),
        best,
        log_weight: lw_next,
    }
}

impl PathTables {
    fn origin(&self) -> usize {
        self.polymer.site_index(&[0; 3])
    }

    /// Lexicographically first maximizer: at each time take the smallest
    /// step whose continuation attains the stored optimum exactly.
    fn argmax(&self, env: &Environment) -> LatticePath {
        let p = &self.polymer;
        let slice = p.slice_len();
        let mut k = self.origin();
        let mut steps = Vec::with_capacity(p.n);
        for i in 0..p.n {
            let target = self.best[i][k];
            let w = &env.g[i * slice..(i + 1) * slice];
            let s = (0..2 * p.d as u8)
                .find(|&s| {
                    let y = (k as isize + p.step_offset(s)) as usize;
                    w[y] + self.best[i + 1][y] == target
                })
                .expect("optimum is attained by some step");
            k = (k as isize + p.step_offset(s)) as usize;
            steps.push(s);
        }
        LatticePath { d: p.d, steps }
    }
}

/// `L_n = max_x H_n(x)` by max-plus dynamic programming, with the
/// lexicographically first maximizing path.
pub fn passage_time(d: usize, n: usize, env: &Environment) -> Result<(f64, LatticePath)> {
    let polymer = Polymer::simple(n, d)?;
    check_env(&polymer, env)?;
    let t = path_tables(&polymer, env, None);
    Ok((t.best[0][t.origin()], t.argmax(env)))
}

/// Largest Gibbs atom of the polymer measure at inverse temperature `beta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomReport {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    pub passage_time: f64,
    /// `log Σ_x e^{β H_n(x)}` over all `(2d)^n` paths.
    pub log_weight_sum: f64,
    pub max_atom: f64,
    pub argmax: LatticePath,
    pub n_times_atom: f64,
    pub turns_of_argmax: usize,
}

pub fn max_atom(d: usize, n: usize, env: &Environment, beta: f64) -> Result<AtomReport> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    let polymer = Polymer::simple(n, d)?;
    check_env(&polymer, env)?;
    let t = path_tables(&polymer, env, Some(beta));
    let origin = t.origin();
    let lt = t.best[0][origin];
    let log_sum = t.log_weight[origin];
    let atom = (beta * lt - log_sum).exp().min(1.0);
    let argmax = t.argmax(env);
    Ok(AtomReport {
        n,
        d,
        beta,
        passage_time: lt,
        log_weight_sum: log_sum,
        max_atom: atom,
        turns_of_argmax: argmax.turn_count(),
        argmax,
        n_times_atom: n as f64 * atom,
    })
}

/// `H_n(x) = Σ_i ω(i, x_i)`.
pub fn path_energy(env: &Environment, path: &LatticePath) -> Result<f64> {
    let polymer = Polymer::simple(path.len(), path.d)?;
    check_env(&polymer, env)?;
    Ok(polymer.path_energy(&env.g, &path.steps))
}

/// `e^{βH(y)} / Σ_{i ∈ T(y)} e^{βH(y^{(i)})}`; infinite when `y` has no turns.
pub fn atom_bound(env: &Environment, path: &LatticePath, beta: f64) -> Result<f64> {
    let h = path_energy(env, path)?;
    let mut acc = f64::NEG_INFINITY;
    for i in path.turns() {
        acc = log_add_exp(acc, beta * path_energy(env, &flip_at_turn(path, i)?)?);
    }
    Ok((beta * h - acc).exp())
}

/// `(ω(i, x_i), ω(i, x_i^{(i)}))` for every turn `i` of `path`.
pub fn turn_flip_pairs(env: &Environment, path: &LatticePath) -> Result<Vec<(f64, f64)>> {
    let polymer = Polymer::simple(path.len(), path.d)?;
    check_env(&polymer, env)?;
    let pos = path.positions();
    path.turns()
        .into_iter()
        .map(|i| {
            let flipped = flip_at_turn(path, i)?.positions();
            Ok((
                env.g[polymer.feature_index(i, &pos[i])],
                env.g[polymer.feature_index(i, &flipped[i])],
            ))
        })
        .collect()
}

/// `|{i : ω_i > ω'_i + D}|`.
pub fn gap_census(pairs: &[(f64, f64)], big_d: f64) -> usize {
    pairs.iter().filter(|(a, b)| *a > *b + big_d).count()
}

/// Site-disorder law for the polymer scans. Both laws are centred with
/// unit variance and have all exponential moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvDist {
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    BoundedUniform,
}

impl FromStr for EnvDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "bounded_uniform" | "bounded-uniform" => Ok(Self::BoundedUniform),
            other => Err(Error::Unsupported(format!(
                "environment distribution '{other}' (supported: gaussian, bounded_uniform)"
            ))),
        }
    }
}

impl EnvDist {
    pub fn mean(self) -> f64 {
        0.0
    }

    pub fn variance(self) -> f64 {
        1.0
    }

    /// `log E e^{tω}`.
    pub fn log_mgf(self, t: f64) -> f64 {
        match self {
            Self::Gaussian => 0.5 * t * t,
            Self::BoundedUniform => {
                let a = 3f64.sqrt() * t;
                if a.abs() < 1e-8 {
                    a * a / 6.0
                } else {
                    a.abs() + (-(-2.0 * a.abs()).exp_m1()).ln() - (2.0 * a.abs()).ln()
                }
            }
        }
    }

    /// Finite exponential moment at `t` and positive variance.
    pub fn validate(self, t: f64) -> Result<()> {
        if !self.log_mgf(t).is_finite() || !(self.variance() > 0.0) {
            return Err(Error::Unsupported(format!("{self:?} lacks E e^(tω) < ∞ at t = {t}")));
        }
        Ok(())
    }

    pub fn sample(self, len: usize, key: StreamKey) -> Vec<f64> {
        match self {
            Self::Gaussian => key.normals(len),
            Self::BoundedUniform => {
                let a = 3f64.sqrt();
                let mut rng = key.rng();
                (0..len).map(|_| rng.random_range(-a..=a)).collect()
            }
        }
    }
}

/// Environment for a length-`n` scan row; each `(n, replica)` gets its own
/// substream.
pub fn scan_environment(dist: EnvDist, d: usize, n: usize, seed: u64, replica: u64) -> Result<Environment> {
    let polymer = Polymer::simple(n, d)?;
    let key = StreamKey::new(seed, Purpose::Environment, replica).child(n as u64);
    Environment::new(dist.sample(polymer.feature_count(), key), seed, replica)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomScanRow {
    pub n: usize,
    pub beta: f64,
    pub replica: u64,
    pub passage_time: f64,
    pub max_atom: f64,
    pub n_times_atom: f64,
    pub turns_of_argmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomScanAggregate {
    pub n: usize,
    pub median_max_atom: f64,
    pub q1_max_atom: f64,
    pub q3_max_atom: f64,
    pub median_n_times_atom: f64,
    pub q1_n_times_atom: f64,
    pub q3_n_times_atom: f64,
    /// Disorder mean of `L_n / n` and its standard error.
    pub mean_passage_per_step: f64,
    pub passage_per_step_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomDecayScan {
    pub d: usize,
    pub beta: f64,
    pub dist: EnvDist,
    pub rows: Vec<AtomScanRow>,
    pub aggregates: Vec<AtomScanAggregate>,
    /// Running maximum of `E L_n / n` over the grid.
    pub lambda_estimate: f64,
    pub env_mean: f64,
    /// Whether `E L_n / n` exceeds `E ω` at the largest `n`.
    pub exceeds_env_mean: bool,
    pub median_max_atom_decreasing: bool,
}

pub fn atom_decay_scan(
    d: usize,
    beta: f64,
    n_list: &[usize],
    replicas: usize,
    dist: EnvDist,
    seed: u64,
) -> Result<AtomDecayScan> {
    if n_list.is_empty() || replicas == 0 {
        return Err(Error::InvalidParameter("n list and replicas must be non-empty".into()));
    }
    dist.validate(beta)?;
    let mut rows = Vec::with_capacity(n_list.len() * replicas);
    let mut aggregates = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let reports: Vec<AtomScanRow> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let env = scan_environment(dist, d, n, seed, r)?;
                let a = max_atom(d, n, &env, beta)?;
                Ok(AtomScanRow {
                    n,
                    beta,
                    replica: r,
                    passage_time: a.passage_time,
                    max_atom: a.max_atom,
                    n_times_atom: a.n_times_atom,
                    turns_of_argmax: a.turns_of_argmax,
                })
            })
            .collect::<Result<_>>()?;
        let atoms = sorted_copy(&reports.iter().map(|r| r.max_atom).collect::<Vec<_>>());
        let scaled = sorted_copy(&reports.iter().map(|r| r.n_times_atom).collect::<Vec<_>>());
        let per_step: Vec<f64> = reports.iter().map(|r| r.passage_time / n as f64).collect();
        let (mp, sp) = mean_se(&per_step);
        aggregates.push(AtomScanAggregate {
            n,
            median_max_atom: quantile_sorted(&atoms, 0.5),
            q1_max_atom: quantile_sorted(&atoms, 0.25),
            q3_max_atom: quantile_sorted(&atoms, 0.75),
            median_n_times_atom: quantile_sorted(&scaled, 0.5),
            q1_n_times_atom: quantile_sorted(&scaled, 0.25),
            q3_n_times_atom: quantile_sorted(&scaled, 0.75),
            mean_passage_per_step: mp,
            passage_per_step_se: sp,
        });
        rows.extend(reports);
    }
    let lambda_estimate = aggregates
        .iter()
        .map(|a| a.mean_passage_per_step)
        .fold(f64::NEG_INFINITY, f64::max);
    let largest = aggregates.iter().max_by_key(|a| a.n).expect("non-empty grid");
    let mut by_n: Vec<&AtomScanAggregate> = aggregates.iter().collect();
    by_n.sort_by_key(|a| a.n);
    let decreasing = by_n.windows(2).all(|w| w[1].median_max_atom < w[0].median_max_atom);
    Ok(AtomDecayScan {
        d,
        beta,
        dist,
        exceeds_env_mean: largest.mean_passage_per_step > dist.mean(),
        rows,
        aggregates,
        lambda_estimate,
        env_mean: dist.mean(),
        median_max_atom_decreasing: decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn turns_and_flip() {
        let p = LatticePath::new(1, vec![0, 1]).unwrap();
        assert_eq!(p.turns(), vec![1]);
        let f = flip_at_turn(&p, 1).unwrap();
        assert_eq!(f.steps, vec![1, 0]);
        assert_eq!(flip_at_turn(&f, 1).unwrap(), p);
        assert!(flip_at_turn(&LatticePath::straight(1, 3).unwrap(), 1).is_err());
        assert!(flip_at_turn(&p, 0).is_err());
    }

    #[test]
    fn turn_counts_small() {
        let c = count_paths_by_turns(3, 1).unwrap();
        assert_eq!(c, vec![2u32.into(), 4u32.into(), 2u32.into()]);
        assert_eq!(turn_census_enumerated(3, 1).unwrap(), vec![2, 4, 2]);
        assert!(count_paths_by_turns(0, 1).is_err());
    }

    #[test]
    fn zero_environment() {
        let p = Polymer::simple(4, 2).unwrap();
        let env = Environment::zeros(p.feature_count());
        let (l, path) = passage_time(2, 4, &env).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(path, LatticePath::straight(2, 4).unwrap());
        let a = max_atom(2, 4, &env, 0.0).unwrap();
        assert_relative_eq!(a.max_atom, 4f64.powi(-4), max_relative = 1e-12);
    }

    #[test]
    fn single_step() {
        let p = Polymer::simple(1, 1).unwrap();
        let mut g = vec![0.0; p.feature_count()];
        g[p.feature_index(1, &[1, 0, 0])] = 0.3;
        g[p.feature_index(1, &[-1, 0, 0])] = 0.7;
        let (l, path) = passage_time(1, 1, &Environment::from_values(g).unwrap()).unwrap();
        assert_eq!(l, 0.7);
        assert_eq!(path.steps, vec![1]);
    }

    #[test]
    fn env_dist_parsing() {
        assert_eq!("gaussian".parse::<EnvDist>().unwrap(), EnvDist::Gaussian);
        assert_eq!("bounded-uniform".parse::<EnvDist>().unwrap(), EnvDist::BoundedUniform);
        assert!("cauchy".parse::<EnvDist>().is_err());
        let xs = EnvDist::BoundedUniform.sample(1000, StreamKey::new(1, Purpose::Environment, 0));
        assert!(xs.iter().all(|x| x.abs() <= 3f64.sqrt()));
        assert_relative_eq!(EnvDist::BoundedUniform.log_mgf(1e-3), 1e-6 / 2.0, max_relative = 1e-5);
    }

    #[test]
    fn gap_census_limits() {
        let pairs = [(1.0, 0.0), (0.5, 0.5), (-1.0, 2.0)];
        assert_eq!(gap_census(&pairs, f64::INFINITY), 0);
        assert_eq!(gap_census(&pairs, 0.0), 1);
        assert_eq!(gap_census(&[(0.2, 0.2); 4], 0.1), 0);
    }
}
