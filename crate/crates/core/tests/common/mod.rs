//! Brute-force references built only from feature vectors and explicit
//! enumeration, independent of the dynamic-programming and Gray-code engines.
#![allow(dead_code)]

use gaussloc::model::step_vector;
use gaussloc::{Environment, ModelSpec, Polymer, Site, StateId};

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Every configuration with its feature vector and reference log-probability.
pub struct Enumerated {
    pub states: Vec<StateId>,
    pub features: Vec<Vec<f64>>,
    pub log_ref: Vec<f64>,
}

fn all_paths(n: usize, d: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..2 * d as u8).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn path_positions(steps: &[u8]) -> Vec<Site> {
    let mut x = [0i32; 3];
    steps
        .iter()
        .map(|&s| {
            let v = step_vector(s);
            for a in 0..3 {
                x[a] += v[a];
            }
            x
        })
        .collect()
}

pub fn enumerate(model: &ModelSpec) -> Enumerated {
    let states: Vec<StateId> = match model {
        ModelSpec::Polymer(p) => all_paths(p.n, p.d)
            .into_iter()
            .filter(|s| p.endpoint.is_none_or(|e| path_positions(s).last() == Some(&e)))
            .map(|s| StateId::path(p.d, s))
            .collect(),
        _ => (0..1u64 << model.n()).map(|b| StateId::spins(model.n(), b)).collect(),
    };
    let log_ref = states
        .iter()
        .map(|s| match (model, s) {
            (ModelSpec::Polymer(p), StateId::Path { steps, .. }) => {
                steps.iter().map(|&k| p.kernel.probs[k as usize].ln()).sum()
            }
            _ => -(model.n() as f64) * std::f64::consts::LN_2,
        })
        .collect();
    let features = states.iter().map(|s| model.feature_vector(s).unwrap()).collect();
    Enumerated {
        states,
        features,
        log_ref,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gibbs quantities by direct summation.
pub struct BruteGibbs {
    pub log_z: f64,
    pub probs: Vec<f64>,
    pub energies: Vec<f64>,
    pub mean_energy_per_n: f64,
    pub energy_var_per_n: f64,
}

pub fn brute_gibbs(model: &ModelSpec, en: &Enumerated, env: &Environment, beta: f64) -> BruteGibbs {
    let energies: Vec<f64> = en.features.iter().map(|f| dot(f, &env.g)).collect();
    let logw: Vec<f64> = energies.iter().zip(&en.log_ref).map(|(h, l)| l + beta * h).collect();
    let log_z_raw = log_sum_exp(&logw);
    let log_adm = log_sum_exp(&en.log_ref);
    let probs: Vec<f64> = logw.iter().map(|l| (l - log_z_raw).exp()).collect();
    let n = model.n() as f64;
    let mh: f64 = probs.iter().zip(&energies).map(|(p, h)| p * h).sum();
    let m2: f64 = probs.iter().zip(&energies).map(|(p, h)| p * h * h).sum();
    BruteGibbs {
        log_z: log_z_raw - log_adm,
        probs,
        mean_energy_per_n: mh / n,
        energy_var_per_n: (m2 - mh * mh) / n,
        energies,
    }
}

/// `Σ_{σ,τ} μ(σ) μ(τ) (φ(σ)·φ(τ))/n`.
pub fn double_replica_overlap(model: &ModelSpec, en: &Enumerated, probs: &[f64]) -> f64 {
    let n = model.n() as f64;
    let mut s = 0.0;
    for (a, fa) in en.features.iter().enumerate() {
        if probs[a] == 0.0 {
            continue;
        }
        for (b, fb) in en.features.iter().enumerate() {
            s += probs[a] * probs[b] * dot(fa, fb) / n;
        }
    }
    s
}

/// `(1/n) Σ_i Σ_x μ_i(x)²` from enumerated site marginals.
pub fn marginal_overlap(p: &Polymer, marginals: &[std::collections::HashMap<Site, f64>]) -> f64 {
    marginals.iter().map(|m| m.values().map(|v| v * v).sum::<f64>()).sum::<f64>() / p.n as f64
}

pub fn brute_marginals(p: &Polymer, en: &Enumerated, probs: &[f64]) -> Vec<std::collections::HashMap<Site, f64>> {
    let mut out = vec![std::collections::HashMap::new(); p.n];
    for (s, &w) in en.states.iter().zip(probs) {
        if let StateId::Path { steps, .. } = s {
            for (i, x) in path_positions(steps).into_iter().enumerate() {
                *out[i].entry(x).or_insert(0.0) += w;
            }
        }
    }
    out
}
