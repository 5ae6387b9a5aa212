//! Model-agnostic abstractions: states, environments, feature maps,
//! Hamiltonians and overlaps.
//!
//! Every built-in model is a centered Gaussian field
//! `H(σ) = Σ_i g_i φ_i(σ)` with `Σ_i φ_i(σ)² = n` and nonnegative
//! overlaps `R(σ¹, σ²) = (1/n) Σ_i φ_i(σ¹) φ_i(σ²)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::models::{MixedPSpin, Polymer, Rem};
use crate::rng::{Purpose, StreamKey};

/// Canonical encoding of a configuration.
///
/// Spins use bit `i` of `bits` for spin `i` (set means `+1`). Paths store
/// the step index of each of the `n` moves, see [`step_vector`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateId {
    Spins { n: usize, bits: u64 },
    Path { d: usize, steps: Vec<u8> },
}

const STEP_LETTERS: [char; 6] = ['R', 'L', 'U', 'D', 'F', 'B'];

/// Lattice site in up to three dimensions; unused axes stay 0.
pub type Site = [i32; 3];

/// Unit vector for step index `s`: `2a` is `+e_a`, `2a + 1` is `-e_a`.
pub fn step_vector(s: u8) -> Site {
    let mut v = [0; 3];
    v[(s / 2) as usize] = if s % 2 == 0 { 1 } else { -1 };
    v
}

impl StateId {
    pub fn spins(n: usize, bits: u64) -> Self {
        StateId::Spins { n, bits }
    }

    pub fn path(d: usize, steps: Vec<u8>) -> Self {
        StateId::Path { d, steps }
    }

    /// Spin value `±1` of site `i`.
    pub fn spin(&self, i: usize) -> Option<i8> {
        match self {
            StateId::Spins { bits, .. } => Some(if bits >> i & 1 == 1 { 1 } else { -1 }),
            StateId::Path { .. } => None,
        }
    }

    /// Positions `x_1, …, x_n` visited by a path (origin excluded).
    pub fn positions(&self) -> Option<Vec<Site>> {
        match self {
            StateId::Path { steps, .. } => Some(path_positions(steps)),
            StateId::Spins { .. } => None,
        }
    }
}

pub(crate) fn path_positions(steps: &[u8]) -> Vec<Site> {
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

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateId::Spins { n, bits } => {
                for i in 0..*n {
                    f.write_str(if bits >> i & 1 == 1 { "1" } else { "0" })?;
                }
                Ok(())
            }
            StateId::Path { steps, .. } => {
                for &s in steps {
                    write!(f, "{}", STEP_LETTERS[s as usize])?;
                }
                Ok(())
            }
        }
    }
}

/// A disorder realization `g` in the feature index space of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub g: Vec<f64>,
    pub seed: u64,
    pub replica_id: u64,
}

impl Environment {
    pub fn new(g: Vec<f64>, seed: u64, replica_id: u64) -> Result<Self> {
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "environment entry {i} is not finite"
            )));
        }
        Ok(Self { g, seed, replica_id })
    }

    /// Environment built from explicit values (no RNG provenance).
    pub fn from_values(g: Vec<f64>) -> Result<Self> {
        Self::new(g, 0, 0)
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            g: vec![0.0; len],
            seed: 0,
            replica_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    #[serde(rename = "rem")]
    Rem,
    #[serde(rename = "pspin")]
    MixedPSpin,
    #[serde(rename = "polymer")]
    DirectedPolymer,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rem" => Ok(ModelKind::Rem),
            "pspin" => Ok(ModelKind::MixedPSpin),
            "polymer" => Ok(ModelKind::DirectedPolymer),
            other => Err(Error::InvalidParameter(format!(
                "unknown model kind '{other}' (expected rem, pspin or polymer)"
            ))),
        }
    }
}

/// A concrete disordered model with a fixed feature layout.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Rem(Rem),
    PSpin(MixedPSpin),
    Polymer(Polymer),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Rem(_) => ModelKind::Rem,
            ModelSpec::PSpin(_) => ModelKind::MixedPSpin,
            ModelSpec::Polymer(_) => ModelKind::DirectedPolymer,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Rem(m) => m.n,
            ModelSpec::PSpin(m) => m.n,
            ModelSpec::Polymer(m) => m.n,
        }
    }

    pub fn feature_count(&self) -> usize {
        match self {
            ModelSpec::Rem(m) => m.feature_count(),
            ModelSpec::PSpin(m) => m.feature_count(),
            ModelSpec::Polymer(m) => m.feature_count(),
        }
    }

    /// Lower bound slack on overlaps; zero for every built-in model.
    pub fn nonneg_correlation_slack(&self) -> f64 {
        0.0
    }

    /// Number of configurations, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        match self {
            ModelSpec::Rem(m) => 1u128 << m.n,
            ModelSpec::PSpin(m) => 1u128 << m.n,
            ModelSpec::Polymer(m) => (2 * m.d as u128).checked_pow(m.n as u32).unwrap_or(u128::MAX),
        }
    }

    /// The `index`-th state in canonical order (lexicographic for paths).
    pub fn state_at(&self, index: u128) -> StateId {
        match self {
            ModelSpec::Rem(m) => StateId::spins(m.n, index as u64),
            ModelSpec::PSpin(m) => StateId::spins(m.n, index as u64),
            ModelSpec::Polymer(m) => {
                let base = 2 * m.d as u128;
                let mut steps = vec![0u8; m.n];
                let mut r = index;
                for s in steps.iter_mut().rev() {
                    *s = (r % base) as u8;
                    r /= base;
                }
                StateId::path(m.d, steps)
            }
        }
    }

    pub fn validate_state(&self, sigma: &StateId) -> Result<()> {
        match (self, sigma) {
            (ModelSpec::Rem(Rem { n }), StateId::Spins { n: sn, bits })
            | (ModelSpec::PSpin(MixedPSpin { n, .. }), StateId::Spins { n: sn, bits }) => {
                if sn != n {
                    return Err(Error::Encoding(format!("spin state has length {sn}, model n = {n}")));
                }
                if *n < 64 && bits >> n != 0 {
                    return Err(Error::Encoding(format!("spin bits exceed n = {n}")));
                }
                Ok(())
            }
            (ModelSpec::Polymer(p), StateId::Path { d, steps }) => {
                if *d != p.d {
                    return Err(Error::Encoding(format!("path dimension {d}, model d = {}", p.d)));
                }
                if steps.len() != p.n {
                    return Err(Error::Encoding(format!(
                        "path has {} steps, model n = {}",
                        steps.len(),
                        p.n
                    )));
                }
                if let Some(s) = steps.iter().find(|&&s| s as usize >= 2 * p.d) {
                    return Err(Error::Encoding(format!("step index {s} invalid in dimension {}", p.d)));
                }
                Ok(())
            }
            _ => Err(Error::Encoding("state kind does not match model".into())),
        }
    }

    /// Parse the canonical textual encoding of a state.
    pub fn parse_state(&self, text: &str) -> Result<StateId> {
        let text = text.trim();
        let sigma = match self {
            ModelSpec::Rem(_) | ModelSpec::PSpin(_) => {
                let mut bits = 0u64;
                for (i, c) in text.chars().enumerate() {
                    match c {
                        '1' => bits |= 1 << i,
                        '0' => {}
                        _ => return Err(Error::Encoding(format!("invalid spin character {c:?}"))),
                    }
                }
                StateId::spins(text.chars().count(), bits)
            }
            ModelSpec::Polymer(p) => {
                let steps = text
                    .chars()
                    .map(|c| {
                        STEP_LETTERS
                            .iter()
                            .position(|&l| l == c.to_ascii_uppercase())
                            .map(|s| s as u8)
                            .ok_or_else(|| Error::Encoding(format!("invalid step letter {c:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                StateId::path(p.d, steps)
            }
        };
        self.validate_state(&sigma)?;
        Ok(sigma)
    }

    /// Dense feature vector `(φ_i(σ))_i`.
    pub fn feature_vector(&self, sigma: &StateId) -> Result<Vec<f64>> {
        self.validate_state(sigma)?;
        let mut phi = vec![0.0; self.feature_count()];
        match (self, sigma) {
            (ModelSpec::Rem(m), StateId::Spins { bits, .. }) => {
                phi[*bits as usize] = (m.n as f64).sqrt();
            }
            (ModelSpec::PSpin(m), StateId::Spins { bits, .. }) => m.fill_features(*bits, &mut phi),
            (ModelSpec::Polymer(p), StateId::Path { steps, .. }) => {
                for (i, x) in path_positions(steps).iter().enumerate() {
                    phi[p.feature_index(i + 1, x)] = 1.0;
                }
            }
            _ => unreachable!("validated above"),
        }
        Ok(phi)
    }

    fn check_env(&self, env: &Environment) -> Result<()> {
        if env.len() != self.feature_count() {
            return Err(Error::dims(self.feature_count(), env.len()));
        }
        Ok(())
    }

    /// `H(σ) = Σ_i g_i φ_i(σ)`.
    pub fn hamiltonian(&self, env: &Environment, sigma: &StateId) -> Result<f64> {
        self.check_env(env)?;
        self.validate_state(sigma)?;
        Ok(match (self, sigma) {
            (ModelSpec::Rem(m), StateId::Spins { bits, .. }) => (m.n as f64).sqrt() * env.g[*bits as usize],
            (ModelSpec::PSpin(m), StateId::Spins { bits, .. }) => m.hamiltonian_direct(&env.g, *bits),
            (ModelSpec::Polymer(p), StateId::Path { steps, .. }) => p.path_energy(&env.g, steps),
            _ => unreachable!("validated above"),
        })
    }

    /// Closed-form overlap `R(σ¹, σ²)`.
    pub fn overlap(&self, a: &StateId, b: &StateId) -> Result<f64> {
        self.validate_state(a)?;
        self.validate_state(b)?;
        Ok(match (self, a, b) {
            (ModelSpec::Rem(_), StateId::Spins { bits: x, .. }, StateId::Spins { bits: y, .. }) => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
            (ModelSpec::PSpin(m), StateId::Spins { bits: x, .. }, StateId::Spins { bits: y, .. }) => {
                m.xi.eval(spin_inner_product(m.n, *x, *y))
            }
            (ModelSpec::Polymer(p), StateId::Path { steps: s1, .. }, StateId::Path { steps: s2, .. }) => {
                let same = path_positions(s1)
                    .iter()
                    .zip(path_positions(s2).iter())
                    .filter(|(u, v)| u == v)
                    .count();
                same as f64 / p.n as f64
            }
            _ => unreachable!("validated above"),
        })
    }

    /// `ρ(σ¹, σ²) = 1 - R(σ¹, σ²)`.
    pub fn metric_rho(&self, a: &StateId, b: &StateId) -> Result<f64> {
        Ok(1.0 - self.overlap(a, b)?)
    }

    /// Fresh i.i.d. standard normal environment for replica 0.
    pub fn sample_environment(&self, seed: u64) -> Environment {
        self.sample_environment_replica(seed, 0)
    }

    /// Environment keyed by `(seed, replica, feature index)`.
    pub fn sample_environment_replica(&self, seed: u64, replica: u64) -> Environment {
        let g = StreamKey::new(seed, Purpose::Environment, replica).normals(self.feature_count());
        Environment {
            g,
            seed,
            replica_id: replica,
        }
    }
}

/// Normalized spin inner product `q = (1/n) Σ σ¹_i σ²_i`.
pub fn spin_inner_product(n: usize, a: u64, b: u64) -> f64 {
    let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let disagree = ((a ^ b) & mask).count_ones() as f64;
    (n as f64 - 2.0 * disagree) / n as f64
}

pub fn feature_vector(model: &ModelSpec, sigma: &StateId) -> Result<Vec<f64>> {
    model.feature_vector(sigma)
}

pub fn hamiltonian(model: &ModelSpec, env: &Environment, sigma: &StateId) -> Result<f64> {
    model.hamiltonian(env, sigma)
}

pub fn overlap(model: &ModelSpec, a: &StateId, b: &StateId) -> Result<f64> {
    model.overlap(a, b)
}

pub fn metric_rho(model: &ModelSpec, a: &StateId, b: &StateId) -> Result<f64> {
    model.metric_rho(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{MixedXi, Polymer, WalkKernel};
    use approx::assert_relative_eq;

    fn polymer(n: usize, d: usize) -> ModelSpec {
        ModelSpec::Polymer(Polymer::new(n, WalkKernel::simple(d).unwrap(), None).unwrap())
    }

    #[test]
    fn rem_feature_vector() {
        let m = ModelSpec::Rem(Rem::new(4).unwrap());
        let phi = m.feature_vector(&StateId::spins(4, 5)).unwrap();
        assert_eq!(phi[5], 2.0);
        assert_eq!(phi.iter().map(|x| x * x).sum::<f64>(), 4.0);
    }

    #[test]
    fn rem_hamiltonian_unit_entry() {
        let m = ModelSpec::Rem(Rem::new(4).unwrap());
        let mut env = Environment::zeros(16);
        env.g[3] = 1.0;
        assert_eq!(m.hamiltonian(&env, &StateId::spins(4, 3)).unwrap(), 2.0);
        assert_eq!(m.hamiltonian(&env, &StateId::spins(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn pspin_two_spin_features() {
        let m = ModelSpec::PSpin(MixedPSpin::new(2, MixedXi::new(vec![(2, 1.0)]).unwrap()).unwrap());
        let phi = m.feature_vector(&StateId::spins(2, 0b11)).unwrap();
        assert_eq!(phi.len(), 4);
        for x in &phi {
            assert_relative_eq!(*x, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        }
        assert_relative_eq!(phi.iter().map(|x| x * x).sum::<f64>(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn polymer_two_step_energy() {
        let m = polymer(2, 1);
        let p = match &m {
            ModelSpec::Polymer(p) => p.clone(),
            _ => unreachable!(),
        };
        let mut env = Environment::zeros(m.feature_count());
        let path = m.parse_state("RL").unwrap();
        env.g[p.feature_index(1, &[1, 0, 0])] = 0.3;
        env.g[p.feature_index(2, &[0, 0, 0])] = -0.1;
        assert_relative_eq!(m.hamiltonian(&env, &path).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(m.hamiltonian(&Environment::zeros(m.feature_count()), &path).unwrap(), 0.0);
    }

    #[test]
    fn polymer_overlaps() {
        let m = polymer(4, 1);
        let a = m.parse_state("RRRR").unwrap();
        let b = m.parse_state("LLLL").unwrap();
        let c = m.parse_state("RRLL").unwrap();
        assert_eq!(m.overlap(&a, &a).unwrap(), 1.0);
        assert_eq!(m.overlap(&a, &b).unwrap(), 0.0);
        assert_eq!(m.metric_rho(&a, &b).unwrap(), 1.0);
        // RRRR visits 1,2,3,4; RRLL visits 1,2,1,0.
        assert_eq!(m.overlap(&a, &c).unwrap(), 0.5);
    }

    #[test]
    fn rem_distinct_states_are_orthogonal() {
        let m = ModelSpec::Rem(Rem::new(3).unwrap());
        let a = StateId::spins(3, 1);
        let b = StateId::spins(3, 2);
        assert_eq!(m.metric_rho(&a, &b).unwrap(), 1.0);
        assert_eq!(m.metric_rho(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn encoding_roundtrip_and_errors() {
        let m = polymer(3, 2);
        let s = m.parse_state("RUD").unwrap();
        assert_eq!(s.to_string(), "RUD");
        assert!(matches!(m.parse_state("RUF"), Err(Error::Encoding(_))));
        assert!(matches!(m.parse_state("RU"), Err(Error::Encoding(_))));
        let spin = ModelSpec::Rem(Rem::new(3).unwrap());
        assert_eq!(spin.parse_state("101").unwrap(), StateId::spins(3, 0b101));
        assert_eq!(StateId::spins(3, 0b101).to_string(), "101");
        assert!(spin.parse_state("10x").is_err());
        assert!(spin.parse_state("1010").is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let m = ModelSpec::Rem(Rem::new(3).unwrap());
        let env = Environment::zeros(7);
        assert!(matches!(
            m.hamiltonian(&env, &StateId::spins(3, 0)),
            Err(Error::DimensionMismatch { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn non_finite_environment_rejected() {
        assert!(Environment::from_values(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn state_enumeration_order() {
        let m = polymer(2, 1);
        let all: Vec<String> = (0..m.state_count()).map(|i| m.state_at(i).to_string()).collect();
        assert_eq!(all, vec!["RR", "RL", "LR", "LL"]);
    }
}
