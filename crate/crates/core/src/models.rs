//! Concrete models: REM, mixed p-spin Ising, directed polymer, plus the
//! REM limiting free energy.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::model::{path_positions, step_vector, ModelKind, ModelSpec, Site};

/// Largest REM size whose environment is materialized.
pub const REM_MAX_N: usize = 24;
/// Largest interaction order supported for mixed p-spin models.
pub const PSPIN_MAX_P: u32 = 3;
/// Largest spin count representable by a `StateId`.
pub const SPIN_MAX_N: usize = 64;
/// Cap on dense polymer feature layouts.
pub const POLYMER_MAX_FEATURES: usize = 1 << 26;

/// Random energy model on `{-1, +1}^n`: one feature per configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rem {
    pub n: usize,
}

impl Rem {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > REM_MAX_N {
            return Err(Error::InvalidParameter(format!(
                "REM requires 1 <= n <= {REM_MAX_N}, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn feature_count(&self) -> usize {
        1 << self.n
    }
}

/// Mixture `ξ(q) = Σ_p β_p² q^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedXi {
    /// `(p, β_p)` sorted by `p`, with nonzero coefficients only.
    terms: Vec<(u32, f64)>,
}

impl MixedXi {
    pub fn new(terms: Vec<(u32, f64)>) -> Result<Self> {
        let mut merged: Vec<(u32, f64)> = Vec::new();
        for (p, b) in terms {
            if !(2..=PSPIN_MAX_P).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "p-spin order {p} unsupported (2 <= p <= {PSPIN_MAX_P})"
                )));
            }
            if !b.is_finite() {
                return Err(Error::InvalidParameter(format!("beta_{p} is not finite")));
            }
            match merged.iter_mut().find(|(q, _)| *q == p) {
                // Independent fields of the same order add in variance.
                Some(t) => t.1 = (t.1 * t.1 + b * b).sqrt(),
                None => merged.push((p, b)),
            }
        }
        merged.retain(|&(_, b)| b != 0.0);
        merged.sort_by_key(|&(p, _)| p);
        let norm: f64 = merged.iter().map(|&(_, b)| b * b).sum();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("xi has no nonzero coefficient".into()));
        }
        if (norm - 1.0).abs() > 1e-12 {
            log::warn!("xi(1) = {norm}; renormalizing coefficients so that xi(1) = 1");
            let s = norm.sqrt();
            for t in &mut merged {
                t.1 /= s;
            }
        }
        let xi = Self { terms: merged };
        if let Some(q) = xi.first_negative_on_grid() {
            return Err(Error::InvalidParameter(format!(
                "xi({q}) < 0: negative overlaps are not supported"
            )));
        }
        Ok(xi)
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn beta_p(&self, p: u32) -> f64 {
        self.terms.iter().find(|t| t.0 == p).map_or(0.0, |t| t.1)
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.terms.iter().map(|&(p, b)| b * b * q.powi(p as i32)).sum()
    }

    fn first_negative_on_grid(&self) -> Option<f64> {
        (0..=2000)
            .map(|k| -1.0 + k as f64 * 1e-3)
            .find(|&q| self.eval(q) < -1e-12)
    }
}

/// Mixed p-spin model with features indexed by ordered tuples
/// `(p, i_1, …, i_p)`, laid out block by block in increasing `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPSpin {
    pub n: usize,
    pub xi: MixedXi,
    offsets: Vec<usize>,
}

impl MixedPSpin {
    pub fn new(n: usize, xi: MixedXi) -> Result<Self> {
        if n == 0 || n > SPIN_MAX_N {
            return Err(Error::InvalidParameter(format!(
                "p-spin requires 1 <= n <= {SPIN_MAX_N}, got {n}"
            )));
        }
        let mut offsets = Vec::with_capacity(xi.terms.len() + 1);
        let mut acc = 0usize;
        for &(p, _) in &xi.terms {
            offsets.push(acc);
            acc += n.pow(p);
        }
        offsets.push(acc);
        Ok(Self { n, xi, offsets })
    }

    /// Pure `p`-spin model with `ξ(q) = q^p`.
    pub fn pure(n: usize, p: u32) -> Result<Self> {
        Self::new(n, MixedXi::new(vec![(p, 1.0)])?)
    }

    pub fn feature_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn scale(&self, p: u32, beta: f64) -> f64 {
        beta / (self.n as f64).powf((p as f64 - 1.0) / 2.0)
    }

    pub(crate) fn fill_features(&self, bits: u64, phi: &mut [f64]) {
        let n = self.n;
        let s = |i: usize| if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
        for (k, &(p, b)) in self.xi.terms.iter().enumerate() {
            let w = self.scale(p, b);
            let off = self.offsets[k];
            for t in 0..n.pow(p) {
                let mut r = t;
                let mut prod = w;
                for _ in 0..p {
                    prod *= s(r % n);
                    r /= n;
                }
                phi[off + t] = prod;
            }
        }
    }

    /// `Σ_i g_i φ_i(σ)` by direct summation over tuples.
    pub(crate) fn hamiltonian_direct(&self, g: &[f64], bits: u64) -> f64 {
        let n = self.n;
        let s = |i: usize| if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
        let mut h = 0.0;
        for (k, &(p, b)) in self.xi.terms.iter().enumerate() {
            let off = self.offsets[k];
            let mut block = 0.0;
            for t in 0..n.pow(p) {
                let mut r = t;
                let mut prod = g[off + t];
                for _ in 0..p {
                    prod *= s(r % n);
                    r /= n;
                }
                block += prod;
            }
            h += self.scale(p, b) * block;
        }
        h
    }

    /// Reduce the tuple sum to a multilinear polynomial in distinct spins.
    pub fn couplings(&self, g: &[f64]) -> PSpinCouplings {
        let n = self.n;
        let mut c = PSpinCouplings {
            n,
            constant: 0.0,
            a: vec![0.0; n],
            b: vec![0.0; n * n],
            c: Vec::new(),
        };
        for (k, &(p, beta)) in self.xi.terms.iter().enumerate() {
            let w = self.scale(p, beta);
            let off = self.offsets[k];
            match p {
                2 => {
                    for i in 0..n {
                        for j in 0..n {
                            let v = w * g[off + i + n * j];
                            if i == j {
                                c.constant += v;
                            } else {
                                c.b[i * n + j] += v;
                                c.b[j * n + i] += v;
                            }
                        }
                    }
                }
                3 => {
                    if c.c.is_empty() {
                        c.c = vec![0.0; n * n * n];
                    }
                    let mut sorted = vec![0.0; n * n * n];
                    for i in 0..n {
                        for j in 0..n {
                            for l in 0..n {
                                let v = w * g[off + i + n * j + n * n * l];
                                if i == j && j == l {
                                    c.a[i] += v;
                                } else if i == j {
                                    c.a[l] += v;
                                } else if i == l {
                                    c.a[j] += v;
                                } else if j == l {
                                    c.a[i] += v;
                                } else {
                                    let mut t = [i, j, l];
                                    t.sort_unstable();
                                    sorted[t[0] * n * n + t[1] * n + t[2]] += v;
                                }
                            }
                        }
                    }
                    for i in 0..n {
                        for j in i + 1..n {
                            for l in j + 1..n {
                                let v = sorted[i * n * n + j * n + l];
                                for [x, y, z] in [[i, j, l], [i, l, j], [j, i, l], [j, l, i], [l, i, j], [l, j, i]] {
                                    c.c[x * n * n + y * n + z] = v;
                                }
                            }
                        }
                    }
                }
                _ => unreachable!("validated p"),
            }
        }
        c
    }
}

/// `H(σ) = c + Σ a_i σ_i + Σ_{i<j} b_ij σ_i σ_j + Σ_{i<j<k} c_ijk σ_i σ_j σ_k`
/// with `b` and `c` stored as fully symmetric dense arrays.
#[derive(Debug, Clone)]
pub struct PSpinCouplings {
    pub n: usize,
    pub constant: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Empty when there is no cubic term.
    pub c: Vec<f64>,
}

impl PSpinCouplings {
    pub fn energy(&self, s: &[f64]) -> f64 {
        let n = self.n;
        let mut h = self.constant;
        for i in 0..n {
            h += self.a[i] * s[i];
            for j in i + 1..n {
                h += self.b[i * n + j] * s[i] * s[j];
                if !self.c.is_empty() {
                    for k in j + 1..n {
                        h += self.c[i * n * n + j * n + k] * s[i] * s[j] * s[k];
                    }
                }
            }
        }
        h
    }

    /// `F_k = ∂H/∂σ_k`; flipping spin `k` changes `H` by `-2 σ_k F_k`.
    pub fn local_fields(&self, s: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut f = self.a[k];
                for j in 0..n {
                    if j == k {
                        continue;
                    }
                    f += self.b[k * n + j] * s[j];
                    if !self.c.is_empty() {
                        for l in j + 1..n {
                            if l != k {
                                f += self.c[k * n * n + j * n + l] * s[j] * s[l];
                            }
                        }
                    }
                }
                f
            })
            .collect()
    }

    /// Flip spin `k` in place, updating all local fields; returns `ΔH`.
    #[allow(clippy::needless_range_loop)]
    pub fn flip(&self, s: &mut [f64], fields: &mut [f64], k: usize) -> f64 {
        let n = self.n;
        let sk = s[k];
        let delta = -2.0 * sk * fields[k];
        for m in 0..n {
            if m == k {
                continue;
            }
            let mut coef = self.b[m * n + k];
            if !self.c.is_empty() {
                let row = &self.c[m * n * n + k * n..m * n * n + k * n + n];
                for l in 0..n {
                    if l != m && l != k {
                        coef += row[l] * s[l];
                    }
                }
            }
            fields[m] -= 2.0 * sk * coef;
        }
        s[k] = -sk;
        delta
    }
}

pub(crate) fn spins_from_bits(n: usize, bits: u64) -> Vec<f64> {
    (0..n).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

/// Step distribution over the `2d` nearest-neighbor moves.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkKernel {
    pub d: usize,
    /// Indexed by step index, see [`crate::model::step_vector`].
    pub probs: Vec<f64>,
}

impl WalkKernel {
    pub fn new(d: usize, probs: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("d must be in {{1,2,3}}, got {d}")));
        }
        if probs.len() != 2 * d {
            return Err(Error::InvalidParameter(format!(
                "kernel needs {} step probabilities, got {}",
                2 * d,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter("kernel probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("kernel probabilities sum to {total}, not 1")));
        }
        Ok(Self { d, probs })
    }

    /// Simple random walk: each of the `2d` steps with mass `1/(2d)`.
    pub fn simple(d: usize) -> Result<Self> {
        Self::new(d, vec![1.0 / (2 * d) as f64; 2 * d.max(1)])
    }

    pub fn log_prob(&self, step: u8) -> f64 {
        self.probs[step as usize].ln()
    }

    pub fn is_uniform(&self) -> bool {
        self.probs.iter().all(|&p| p == self.probs[0])
    }
}

/// Directed polymer with site features `(i, x)` for `1 <= i <= n` and
/// `x` in the box `|x|_∞ <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polymer {
    pub n: usize,
    pub d: usize,
    pub kernel: WalkKernel,
    /// Optional point-to-point constraint on `x_n`.
    pub endpoint: Option<Site>,
}

impl Polymer {
    pub fn new(n: usize, kernel: WalkKernel, endpoint: Option<Site>) -> Result<Self> {
        let d = kernel.d;
        if n == 0 {
            return Err(Error::InvalidParameter("polymer requires n >= 1".into()));
        }
        let side = 2 * n + 1;
        let features = side.checked_pow(d as u32).and_then(|b| b.checked_mul(n));
        if features.is_none_or(|f| f > POLYMER_MAX_FEATURES) {
            return Err(Error::InvalidParameter(format!(
                "polymer n = {n}, d = {d} exceeds the feature cap {POLYMER_MAX_FEATURES}"
            )));
        }
        if let Some(e) = endpoint {
            let l1: i64 = e.iter().map(|&c| (c as i64).abs()).sum();
            let off_axis = e[d..].iter().any(|&c| c != 0);
            if off_axis || l1 > n as i64 || (n as i64 - l1) % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "endpoint {e:?} is not reachable in exactly {n} steps"
                )));
            }
        }
        Ok(Self { n, d, kernel, endpoint })
    }

    pub fn simple(n: usize, d: usize) -> Result<Self> {
        Self::new(n, WalkKernel::simple(d)?, None)
    }

    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    /// Number of sites in one time slice of the box.
    pub fn slice_len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn feature_count(&self) -> usize {
        self.n * self.slice_len()
    }

    /// Index of `x` within a time slice.
    pub fn site_index(&self, x: &Site) -> usize {
        let side = self.side();
        let mut idx = 0;
        let mut stride = 1;
        for &c in &x[..self.d] {
            idx += (c + self.n as i32) as usize * stride;
            stride *= side;
        }
        idx
    }

    /// Inverse of [`Polymer::site_index`].
    pub fn site_at(&self, mut idx: usize) -> Site {
        let side = self.side();
        let mut x = [0i32; 3];
        for c in x.iter_mut().take(self.d) {
            *c = (idx % side) as i32 - self.n as i32;
            idx /= side;
        }
        x
    }

    /// Feature index of site `x` at time `i` (1-based).
    pub fn feature_index(&self, i: usize, x: &Site) -> usize {
        (i - 1) * self.slice_len() + self.site_index(x)
    }

    /// Slice-index offset of a unit step, usable as `site ± offset`.
    pub(crate) fn step_offset(&self, s: u8) -> isize {
        let v = step_vector(s);
        let side = self.side() as isize;
        let mut stride = 1isize;
        let mut off = 0isize;
        for c in v.iter().take(self.d) {
            off += *c as isize * stride;
            stride *= side;
        }
        off
    }

    /// `Σ_i g(i, x_i)` without materializing features.
    pub fn path_energy(&self, g: &[f64], steps: &[u8]) -> f64 {
        path_positions(steps)
            .iter()
            .enumerate()
            .map(|(i, x)| g[self.feature_index(i + 1, x)])
            .sum()
    }

    /// Whether a path satisfies the endpoint constraint, if any.
    pub fn admits(&self, steps: &[u8]) -> bool {
        match self.endpoint {
            None => true,
            Some(e) => path_positions(steps).last() == Some(&e),
        }
    }

    /// Log reference probability of a path under the unconstrained walk.
    pub fn log_path_prob(&self, steps: &[u8]) -> f64 {
        steps.iter().map(|&s| self.kernel.log_prob(s)).sum()
    }
}

/// Model-specific parameters for [`build_model`]; fields that do not apply
/// to the requested kind must be absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Mixture `ξ(q) = Σ β_p² q^p` as `(p, β_p)` pairs (p-spin only; defaults to `ξ(q) = q²`).
    pub xi: Option<Vec<(u32, f64)>>,
    /// Lattice dimension (polymer only; defaults to 1).
    pub d: Option<usize>,
    /// Step probabilities in step-index order (polymer only; defaults to uniform).
    pub kernel: Option<Vec<f64>>,
    /// Point-to-point endpoint (polymer only).
    pub endpoint: Option<Vec<i32>>,
}

pub fn build_model(kind: ModelKind, n: usize, params: &ModelParams) -> Result<ModelSpec> {
    let reject = |field: &str| Error::InvalidParameter(format!("'{field}' does not apply to {kind:?}"));
    match kind {
        ModelKind::Rem | ModelKind::MixedPSpin => {
            if params.d.is_some() {
                return Err(reject("d"));
            }
            if params.kernel.is_some() {
                return Err(reject("kernel"));
            }
            if params.endpoint.is_some() {
                return Err(reject("endpoint"));
            }
        }
        ModelKind::DirectedPolymer => {
            if params.xi.is_some() {
                return Err(reject("xi"));
            }
        }
    }
    match kind {
        ModelKind::Rem => {
            if params.xi.is_some() {
                return Err(reject("xi"));
            }
            Ok(ModelSpec::Rem(Rem::new(n)?))
        }
        ModelKind::MixedPSpin => {
            let xi = MixedXi::new(params.xi.clone().unwrap_or_else(|| vec![(2, 1.0)]))?;
            Ok(ModelSpec::PSpin(MixedPSpin::new(n, xi)?))
        }
        ModelKind::DirectedPolymer => {
            let d = params.d.unwrap_or(1);
            let kernel = match &params.kernel {
                Some(p) => WalkKernel::new(d, p.clone())?,
                None => WalkKernel::simple(d)?,
            };
            let endpoint = match &params.endpoint {
                None => None,
                Some(e) if e.len() == d => {
                    let mut x = [0i32; 3];
                    x[..d].copy_from_slice(e);
                    Some(x)
                }
                Some(e) => return Err(Error::dims(d, e.len())),
            };
            Ok(ModelSpec::Polymer(Polymer::new(n, kernel, endpoint)?))
        }
    }
}

/// `β_c = √(2 log 2)`.
pub fn rem_beta_c() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// Limiting REM free energy `p(β)`.
pub fn rem_limit_free_energy(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let bc = rem_beta_c();
    Ok(if beta <= bc {
        beta * beta / 2.0
    } else {
        bc * bc / 2.0 + (beta - bc) * bc
    })
}

/// `p'(β) = min(β, β_c)`.
pub fn rem_p_prime(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta.min(rem_beta_c()))
}

/// Limiting mean overlap `1 - p'(β)/β` (zero at `β = 0`).
pub fn rem_limit_mean_overlap(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - rem_p_prime(beta)? / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateId;
    use approx::assert_relative_eq;

    #[test]
    fn feature_counts() {
        assert_eq!(ModelSpec::Rem(Rem::new(3).unwrap()).feature_count(), 8);
        assert_eq!(Polymer::simple(2, 1).unwrap().feature_count(), 10);
        assert_eq!(MixedPSpin::pure(3, 2).unwrap().feature_count(), 9);
        let mixed = MixedPSpin::new(3, MixedXi::new(vec![(2, 0.8), (3, 0.6)]).unwrap()).unwrap();
        assert_eq!(mixed.feature_count(), 9 + 27);
    }

    #[test]
    fn xi_renormalizes() {
        let xi = MixedXi::new(vec![(2, 2.0)]).unwrap();
        assert_relative_eq!(xi.eval(1.0), 1.0, epsilon = 1e-15);
        let mixed = MixedXi::new(vec![(2, 1.0), (3, 1.0)]).unwrap();
        assert_relative_eq!(mixed.eval(1.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn xi_rejects_negative_and_large_p() {
        assert!(MixedXi::new(vec![(3, 1.0)]).is_err());
        assert!(MixedXi::new(vec![(2, 0.5), (3, 0.9)]).is_err());
        assert!(MixedXi::new(vec![(4, 1.0)]).is_err());
        assert!(MixedXi::new(vec![(1, 1.0)]).is_err());
        assert!(MixedXi::new(vec![(2, 0.0)]).is_err());
    }

    #[test]
    fn kernel_validation() {
        let k = WalkKernel::simple(2).unwrap();
        assert_eq!(k.probs, vec![0.25; 4]);
        assert!(WalkKernel::simple(4).is_err());
        assert!(WalkKernel::new(1, vec![0.7, 0.2]).is_err());
        assert!(WalkKernel::new(1, vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn polymer_layout_roundtrip() {
        let p = Polymer::simple(3, 2).unwrap();
        for idx in 0..p.slice_len() {
            assert_eq!(p.site_index(&p.site_at(idx)), idx);
        }
        let x = [1, -2, 0];
        let off = p.step_offset(2);
        assert_eq!(p.site_index(&[1, -1, 0]) as isize, p.site_index(&x) as isize + off);
    }

    #[test]
    fn endpoint_validation() {
        let k = WalkKernel::simple(1).unwrap();
        assert!(Polymer::new(4, k.clone(), Some([2, 0, 0])).is_ok());
        assert!(Polymer::new(4, k.clone(), Some([1, 0, 0])).is_err());
        assert!(Polymer::new(4, k, Some([0, 1, 0])).is_err());
    }

    #[test]
    fn couplings_match_direct_hamiltonian() {
        let m = MixedPSpin::new(5, MixedXi::new(vec![(2, 0.8), (3, 0.6)]).unwrap()).unwrap();
        let spec = ModelSpec::PSpin(m.clone());
        let env = spec.sample_environment(3);
        let c = m.couplings(&env.g);
        for bits in 0..32u64 {
            let s = spins_from_bits(5, bits);
            assert_relative_eq!(c.energy(&s), m.hamiltonian_direct(&env.g, bits), epsilon = 1e-12);
        }
    }

    #[test]
    fn flip_updates_fields() {
        let m = MixedPSpin::new(6, MixedXi::new(vec![(2, 0.8), (3, 0.6)]).unwrap()).unwrap();
        let env = ModelSpec::PSpin(m.clone()).sample_environment(5);
        let c = m.couplings(&env.g);
        let mut s = spins_from_bits(6, 0b101100);
        let mut f = c.local_fields(&s);
        let mut h = c.energy(&s);
        for k in [0, 3, 5, 3, 1, 2] {
            h += c.flip(&mut s, &mut f, k);
            assert_relative_eq!(h, c.energy(&s), epsilon = 1e-12);
            let fresh = c.local_fields(&s);
            for (a, b) in f.iter().zip(&fresh) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rem_reference_values() {
        let bc = rem_beta_c();
        assert_eq!(rem_limit_free_energy(0.0).unwrap(), 0.0);
        assert_eq!(rem_limit_mean_overlap(0.0).unwrap(), 0.0);
        assert_relative_eq!(rem_limit_free_energy(bc).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_relative_eq!(rem_limit_mean_overlap(bc).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(rem_limit_mean_overlap(2.0 * bc).unwrap(), 0.5, epsilon = 1e-15);
        assert!(rem_limit_free_energy(-0.1).is_err());
        assert!(rem_limit_mean_overlap(-1.0).is_err());
    }

    #[test]
    fn rem_reference_convex_and_continuous() {
        let grid: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
        let p: Vec<f64> = grid.iter().map(|&b| rem_limit_free_energy(b).unwrap()).collect();
        for w in p.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
        for w in p.windows(2) {
            assert!((w[1] - w[0]).abs() <= 0.01 * 4.0);
        }
    }

    #[test]
    fn environment_statistics() {
        let spec = ModelSpec::Rem(Rem::new(20).unwrap());
        let env = spec.sample_environment(2024);
        let (mean, _) = crate::stats::mean_se(&env.g);
        let (var, _) = crate::stats::variance_se(&env.g);
        let m = env.g.len() as f64;
        assert!(mean.abs() <= 4.0 / m.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "var {var}");
        assert_eq!(env, spec.sample_environment(2024));
        assert_ne!(env.g, spec.sample_environment_replica(2024, 1).g);
    }

    #[test]
    fn pspin_overlap_equals_xi() {
        let m = MixedPSpin::new(4, MixedXi::new(vec![(2, 0.8), (3, 0.6)]).unwrap()).unwrap();
        let spec = ModelSpec::PSpin(m.clone());
        for a in 0..16u64 {
            for b in 0..16u64 {
                let (sa, sb) = (StateId::spins(4, a), StateId::spins(4, b));
                let fa = spec.feature_vector(&sa).unwrap();
                let fb = spec.feature_vector(&sb).unwrap();
                let dot: f64 = fa.iter().zip(&fb).map(|(x, y)| x * y).sum::<f64>() / 4.0;
                assert_relative_eq!(dot, spec.overlap(&sa, &sb).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn build_model_dispatch() {
        let none = ModelParams::default();
        assert_eq!(build_model(ModelKind::Rem, 3, &none).unwrap().feature_count(), 8);
        assert_eq!(build_model(ModelKind::MixedPSpin, 3, &none).unwrap().feature_count(), 9);
        assert_eq!(build_model(ModelKind::DirectedPolymer, 2, &none).unwrap().feature_count(), 10);
        let d4 = ModelParams { d: Some(4), ..Default::default() };
        assert!(build_model(ModelKind::DirectedPolymer, 2, &d4).is_err());
        assert!(build_model(ModelKind::Rem, 3, &d4).is_err());
        let p5 = ModelParams { xi: Some(vec![(5, 1.0)]), ..Default::default() };
        assert!(build_model(ModelKind::MixedPSpin, 3, &p5).is_err());
    }
}
