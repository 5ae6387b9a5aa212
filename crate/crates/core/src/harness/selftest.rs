//! Fast invariant suite behind the `selftest` command.

use crate::atomicity::{count_paths_by_turns, passage_time, turn_census_enumerated};
use crate::diagnostics::gram_min_eigenvalue;
use crate::error::Result;
use crate::exact::{enumerate_states, ExactBudget, ExactGibbs};
use crate::model::{Environment, ModelSpec, StateId};
use crate::models::{MixedPSpin, MixedXi, Polymer, Rem};
use crate::stats::LogSumExp;

use super::output::Check;

fn models() -> Result<Vec<ModelSpec>> {
    Ok(vec![
        ModelSpec::Rem(Rem::new(6)?),
        ModelSpec::PSpin(MixedPSpin::new(6, MixedXi::new(vec![(2, 0.8), (3, 0.6)])?)?),
        ModelSpec::Polymer(Polymer::simple(5, 2)?),
    ])
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Run every suite; each returns one named pass/fail record.
pub fn selftest() -> Result<Vec<Check>> {
    let budget = ExactBudget::default();
    let mut out = Vec::new();
    for (k, model) in models()?.iter().enumerate() {
        let env = model.sample_environment_replica(11, k as u64);
        let label = format!("{:?}", model.kind());
        let g0 = ExactGibbs::new(model, &env, 0.0)?;
        out.push(Check::at_most(format!("{label}: log Z(0) = 0"), "|log Z(0)| <= 1e-12", g0.log_partition().abs(), 1e-12));

        let beta = 0.9;
        let g = ExactGibbs::with_budget(model, &env, beta, &budget)?;
        let mut acc = LogSumExp::default();
        let mut norm_err = 0.0f64;
        let mut states = Vec::new();
        enumerate_states(model, &env, &budget, |s, h, logp| {
            acc.push(logp + beta * h);
            if states.len() < 12 {
                states.push(s.clone());
            }
        })?;
        for s in &states {
            let phi = model.feature_vector(s)?;
            let norm: f64 = phi.iter().map(|x| x * x).sum();
            norm_err = norm_err.max((norm - model.n() as f64).abs() / model.n() as f64);
        }
        out.push(Check::flag(
            format!("{label}: engine log Z matches enumeration"),
            "relative error <= 1e-9",
            g.log_partition(),
            acc.value(),
            close(g.log_partition(), acc.value(), 1e-9),
        ));
        out.push(Check::at_most(format!("{label}: feature norm"), "|Σφ² - n|/n <= 1e-9", norm_err, 1e-9));
        out.push(Check::at_most(
            format!("{label}: overlap Gram is PSD"),
            "-min eigenvalue <= 1e-9",
            -gram_min_eigenvalue(model, &states)?,
            1e-9,
        ));
        let s = g.summary();
        out.push(Check::at_most(format!("{label}: F'' >= 0"), "-F'' <= 0", -s.free_energy_second, 0.0));
    }

    let mut mismatches = 0usize;
    for d in 1..=2 {
        for n in 1..=8 {
            let f = count_paths_by_turns(n, d)?;
            let e = turn_census_enumerated(n, d)?;
            mismatches += f.iter().zip(&e).filter(|(a, b)| **a != (**b).into()).count();
        }
    }
    out.push(Check::at_most("turn counts match enumeration", "mismatches <= 0", mismatches as f64, 0.0));

    let p = Polymer::simple(6, 2)?;
    let model = ModelSpec::Polymer(p.clone());
    let env = model.sample_environment(5);
    let (l, path) = passage_time(2, 6, &env)?;
    let mut best = f64::NEG_INFINITY;
    enumerate_states(&model, &env, &budget, |_, h, _| best = best.max(h))?;
    let attained = model.hamiltonian(&env, &StateId::path(2, path.steps.clone()))?;
    out.push(Check::flag(
        "passage time matches enumeration",
        "|L_n - max H| <= 1e-9 and argmax attains L_n",
        l,
        best,
        close(l, best, 1e-9) && close(attained, l, 1e-9),
    ));

    let zero = Environment::zeros(p.feature_count());
    let (l0, path0) = passage_time(2, 6, &zero)?;
    out.push(Check::flag(
        "zero environment gives straight argmax",
        "L_n = 0 and argmax = RRRRRR",
        l0,
        0.0,
        l0 == 0.0 && path0.steps.iter().all(|&s| s == 0),
    ));
    Ok(out)
}
