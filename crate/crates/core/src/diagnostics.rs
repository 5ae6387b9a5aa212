//! Localization statistics: the `A_δ` mass, the `B_δ` event, overlap-ball
//! covers, pair-in-ball search and orthogonal extraction.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{ExactBudget, ExactGibbs};
use crate::model::{ModelSpec, StateId};
use crate::sampling::{sample_states, SamplerConfig};

/// Relative allowance when comparing computed overlaps against thresholds.
const REL_TOL: f64 = 1e-12;

fn at_most(x: f64, threshold: f64) -> bool {
    x <= threshold + REL_TOL * threshold.abs().max(f64::MIN_POSITIVE)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    Ok(())
}

/// Exact Gibbs mass of `{σ : R(σ) <= δ}`.
pub fn a_delta_mass(gibbs: &ExactGibbs, delta: f64, budget: &ExactBudget) -> Result<f64> {
    check_delta(delta)?;
    let mut mass = 0.0;
    let mut err = None;
    gibbs.for_each_state(budget, |s, p| match gibbs.conditional_overlap(s) {
        Ok(r) if at_most(r, delta) => mass += p,
        Ok(_) => {}
        Err(e) => err = Some(e),
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(mass.min(1.0)),
    }
}

/// Monte Carlo estimate of the `A_δ` mass from exact Gibbs samples, with
/// its binomial standard error.
pub fn a_delta_mass_sampled(gibbs: &ExactGibbs, delta: f64, samples: &[StateId]) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let mut hits = 0usize;
    for s in samples {
        if at_most(gibbs.conditional_overlap(s)?, delta) {
            hits += 1;
        }
    }
    let m = samples.len() as f64;
    let p = hits as f64 / m;
    Ok((p, (p * (1.0 - p) / m).sqrt()))
}

/// Whether `⟨R_{1,2}⟩ <= δ`.
pub fn b_delta_indicator(gibbs: &ExactGibbs, delta: f64) -> Result<bool> {
    check_delta(delta)?;
    Ok(at_most(gibbs.mean_overlap(), delta))
}

/// Coverage of a union of overlap balls `B(σ^j, δ) = {σ : R(σ^j, σ) >= δ}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    /// Number of distinct centers.
    pub k: usize,
    #[serde(skip)]
    pub centers: Vec<StateId>,
    pub covered_fraction: f64,
    /// Standard error when the coverage is estimated from samples.
    pub standard_error: Option<f64>,
    pub exact: bool,
    /// Coverage of the first `j` centers, for `j = 1..=k`.
    pub curve: Vec<f64>,
}

fn ball_hit(model: &ModelSpec, center: &StateId, sigma: &StateId, delta: f64) -> Result<bool> {
    let r = model.overlap(center, sigma)?;
    Ok(r >= delta - REL_TOL * delta.abs())
}

/// Index of the first center whose ball contains `sigma`.
fn first_cover(model: &ModelSpec, centers: &[StateId], sigma: &StateId, delta: f64) -> Result<Option<usize>> {
    for (j, c) in centers.iter().enumerate() {
        if ball_hit(model, c, sigma, delta)? {
            return Ok(Some(j));
        }
    }
    Ok(None)
}

/// Exact Gibbs mass of the union of balls around each prefix of `centers`.
pub fn covered_fraction_curve(
    gibbs: &ExactGibbs,
    centers: &[StateId],
    delta: f64,
    budget: &ExactBudget,
) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let model = gibbs.model();
    let mut first = vec![0.0; centers.len()];
    let mut err = None;
    gibbs.for_each_state(budget, |s, p| {
        if p == 0.0 {
            return;
        }
        match first_cover(model, centers, s, delta) {
            Ok(Some(j)) => first[j] += p,
            Ok(None) => {}
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let mut acc = 0.0;
    Ok(first
        .into_iter()
        .map(|p| {
            acc += p;
            acc.min(1.0)
        })
        .collect())
}

/// Draw i.i.d. Gibbs centers until `k` distinct ones are found (or the
/// draw cap is hit) and measure the mass of the union of their balls.
///
/// Coverage is exact when the instance can be enumerated; otherwise it is
/// estimated on `eval_samples` fresh draws.
pub fn ball_cover(
    gibbs: &ExactGibbs,
    sampler: &SamplerConfig,
    k: usize,
    delta: f64,
    eval_samples: usize,
    budget: &ExactBudget,
) -> Result<CoverReport> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    check_delta(delta)?;
    let centers = draw_distinct_centers(gibbs, sampler, k)?;
    let model = gibbs.model();
    match covered_fraction_curve(gibbs, &centers, delta, budget) {
        Ok(curve) => Ok(CoverReport {
            k: centers.len(),
            covered_fraction: *curve.last().unwrap(),
            centers,
            standard_error: None,
            exact: true,
            curve,
        }),
        Err(Error::BudgetExceeded(_)) => {
            let cfg = SamplerConfig {
                num_samples: eval_samples.max(1),
                stream: sampler.stream.wrapping_add(1),
                ..*sampler
            };
            let eval = sample_states(gibbs, &cfg)?.states;
            let mut first = vec![0usize; centers.len()];
            for s in &eval {
                if let Some(j) = first_cover(model, &centers, s, delta)? {
                    first[j] += 1;
                }
            }
            let m = eval.len() as f64;
            let mut acc = 0usize;
            let curve: Vec<f64> = first
                .iter()
                .map(|c| {
                    acc += c;
                    acc as f64 / m
                })
                .collect();
            let p = *curve.last().unwrap();
            Ok(CoverReport {
                k: centers.len(),
                centers,
                covered_fraction: p,
                standard_error: Some((p * (1.0 - p) / m).sqrt()),
                exact: false,
                curve,
            })
        }
        Err(e) => Err(e),
    }
}

fn draw_distinct_centers(gibbs: &ExactGibbs, sampler: &SamplerConfig, k: usize) -> Result<Vec<StateId>> {
    let cap = k.saturating_mul(1000).max(1000);
    let mut draws = k;
    loop {
        let cfg = SamplerConfig {
            num_samples: draws,
            ..*sampler
        };
        // Sequential draws from one stream, so every batch extends the previous.
        let states = sample_states(gibbs, &cfg)?.states;
        let mut centers: Vec<StateId> = Vec::with_capacity(k);
        for s in states {
            if !centers.contains(&s) {
                centers.push(s);
                if centers.len() == k {
                    return Ok(centers);
                }
            }
        }
        if draws >= cap {
            log::warn!("only {} distinct centers after {draws} draws", centers.len());
            return Ok(centers);
        }
        draws = (draws * 2).min(cap);
    }
}

/// Smallest `N` for which `N` states in a ball of radius `δ` must contain
/// a pair with overlap at least `δ²/2`.
pub fn pair_in_ball_threshold(delta: f64) -> usize {
    (2.0 / (delta * delta)).ceil() as usize + 1
}

/// Find the first pair `j < k` with `R(σ^j, σ^k) >= δ²/2`.
///
/// Every state must lie in `B(σ⁰, δ)`. A pair is guaranteed once
/// `states.len() >= pair_in_ball_threshold(δ)`.
pub fn pair_in_ball(
    model: &ModelSpec,
    states: &[StateId],
    sigma0: &StateId,
    delta: f64,
) -> Result<Option<(usize, usize)>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0, 1], got {delta}")));
    }
    for (j, s) in states.iter().enumerate() {
        let r = model.overlap(sigma0, s)?;
        if r < delta {
            return Err(Error::Precondition(format!(
                "state {j} has overlap {r} < {delta} with the ball center"
            )));
        }
    }
    let target = delta * delta / 2.0;
    for j in 0..states.len() {
        for k in j + 1..states.len() {
            if model.overlap(&states[j], &states[k])? >= target {
                return Ok(Some((j, k)));
            }
        }
    }
    Ok(None)
}

/// Greedily extract `count` states with pairwise overlaps below `eps2`
/// from `A_δ`, `δ = eps1·eps2/count`, visiting states by decreasing weight.
pub fn extract_orthogonal(
    gibbs: &ExactGibbs,
    eps1: f64,
    eps2: f64,
    count: usize,
    budget: &ExactBudget,
) -> Result<Vec<StateId>> {
    if count == 0 || !(eps1 > 0.0) || !(eps2 > 0.0) {
        return Err(Error::InvalidParameter("need eps1 > 0, eps2 > 0 and count >= 1".into()));
    }
    let delta = eps1 * eps2 / count as f64;
    let mut pool: Vec<(StateId, f64)> = Vec::new();
    let mut err = None;
    gibbs.for_each_state(budget, |s, p| {
        if p == 0.0 {
            return;
        }
        match gibbs.conditional_overlap(s) {
            Ok(r) if at_most(r, delta) => pool.push((s.clone(), p)),
            Ok(_) => {}
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let mass: f64 = pool.iter().map(|x| x.1).sum();
    if mass < eps1 {
        return Err(Error::Precondition(format!(
            "A_delta at delta = {delta} has mass {mass} < eps1 = {eps1}"
        )));
    }
    pool.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let model = gibbs.model();
    let mut chosen: Vec<StateId> = Vec::with_capacity(count);
    for (s, _) in &pool {
        let mut far = true;
        for c in &chosen {
            if model.overlap(c, s)? >= eps2 {
                far = false;
                break;
            }
        }
        if far {
            chosen.push(s.clone());
            if chosen.len() == count {
                return Ok(chosen);
            }
        }
    }
    Err(Error::Internal(format!(
        "greedy extraction stopped at {} of {count} states despite A-mass {mass}",
        chosen.len()
    )))
}

/// Overlap Gram matrix `(R(σ^j, σ^k))_{j,k}`.
pub fn overlap_gram(model: &ModelSpec, states: &[StateId]) -> Result<DMatrix<f64>> {
    let m = states.len();
    let mut gram = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in j..m {
            let r = model.overlap(&states[j], &states[k])?;
            gram[(j, k)] = r;
            gram[(k, j)] = r;
        }
    }
    Ok(gram)
}

/// Smallest eigenvalue of the overlap Gram matrix.
pub fn gram_min_eigenvalue(model: &ModelSpec, states: &[StateId]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("no states".into()));
    }
    let eig = SymmetricEigen::new(overlap_gram(model, states)?);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Localization diagnostics at one `(β, δ, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub a_delta_mass: f64,
    pub b_delta: bool,
    pub cover: Option<CoverReport>,
}

/// Collect `A_δ`, `B_δ` and optionally a `k`-center ball cover.
pub fn localization_report(
    gibbs: &ExactGibbs,
    delta: f64,
    epsilon: f64,
    cover: Option<(&SamplerConfig, usize, usize)>,
    budget: &ExactBudget,
) -> Result<LocalizationReport> {
    Ok(LocalizationReport {
        beta: gibbs.beta(),
        delta,
        epsilon,
        a_delta_mass: a_delta_mass(gibbs, delta, budget)?,
        b_delta: b_delta_indicator(gibbs, delta)?,
        cover: match cover {
            Some((cfg, k, eval)) => Some(ball_cover(gibbs, cfg, k, delta, eval, budget)?),
            None => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Polymer, Rem};

    fn rem_gibbs(n: usize, beta: f64, seed: u64) -> ExactGibbs {
        let m = ModelSpec::Rem(Rem::new(n).unwrap());
        let env = m.sample_environment(seed);
        ExactGibbs::new(&m, &env, beta).unwrap()
    }

    #[test]
    fn a_mass_at_infinite_temperature() {
        let b = ExactBudget::default();
        let gb = rem_gibbs(6, 0.0, 1);
        let u = 2f64.powi(-6);
        assert_eq!(a_delta_mass(&gb, u, &b).unwrap(), 1.0);
        assert_eq!(a_delta_mass(&gb, u / 2.0, &b).unwrap(), 0.0);
        assert!(a_delta_mass(&gb, -0.1, &b).is_err());
    }

    #[test]
    fn b_indicator_extremes() {
        let gb = rem_gibbs(6, 1.0, 2);
        assert!(b_delta_indicator(&gb, 1.0).unwrap());
        assert!(!b_delta_indicator(&gb, 0.0).unwrap());
        assert!(b_delta_indicator(&rem_gibbs(6, 50.0, 2), 1.0).unwrap());
    }

    #[test]
    fn cover_low_temperature() {
        let gb = rem_gibbs(8, 50.0, 3);
        let rep = ball_cover(&gb, &SamplerConfig::new(1, 1), 1, 0.5, 100, &ExactBudget::default()).unwrap();
        assert!(rep.covered_fraction >= 0.99);
        assert!(rep.exact);
    }

    #[test]
    fn cover_singletons_at_infinite_temperature() {
        let gb = rem_gibbs(12, 0.0, 4);
        let rep = ball_cover(&gb, &SamplerConfig::new(9, 1), 10, 0.5, 100, &ExactBudget::default()).unwrap();
        assert_eq!(rep.k, 10);
        assert!((rep.covered_fraction - 10.0 * 2f64.powi(-12)).abs() < 1e-15);
        assert!(rep.curve.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn pair_in_ball_cases() {
        let m = ModelSpec::Polymer(Polymer::simple(6, 1).unwrap());
        let s0 = m.parse_state("RRRRRR").unwrap();
        let same = vec![s0.clone(); 4];
        assert_eq!(pair_in_ball(&m, &same, &s0, 1.0).unwrap(), Some((0, 1)));
        let outside = vec![m.parse_state("LLLLLL").unwrap()];
        assert!(matches!(pair_in_ball(&m, &outside, &s0, 0.5), Err(Error::Precondition(_))));
        assert_eq!(pair_in_ball_threshold(0.5), 9);
        assert_eq!(pair_in_ball_threshold(1.0), 3);
    }

    #[test]
    fn orthogonal_extraction_rem() {
        let gb = rem_gibbs(12, 0.0, 5);
        let b = ExactBudget::default();
        let out = extract_orthogonal(&gb, 0.5, 0.5, 4, &b).unwrap();
        assert_eq!(out.len(), 4);
        let one = extract_orthogonal(&gb, 0.5, 0.5, 1, &b).unwrap();
        assert_eq!(one.len(), 1);
        let hot = rem_gibbs(6, 50.0, 5);
        assert!(matches!(extract_orthogonal(&hot, 0.5, 0.5, 2, &b), Err(Error::Precondition(_))));
    }

    #[test]
    fn gram_is_psd() {
        let m = ModelSpec::Polymer(Polymer::simple(6, 2).unwrap());
        let states: Vec<StateId> = (0..30u128).map(|i| m.state_at(i * 97 % m.state_count())).collect();
        assert!(gram_min_eigenvalue(&m, &states).unwrap() >= -1e-8);
    }
}
