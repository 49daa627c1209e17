//! Event-driven simulation of the pure birth process and its fractional
//! version, plus chi-square comparison against analytic tables.
//!
//! The classical chain is exact: from state `k`, wait an
//! `Exponential(lambda_k)` holding time and step up. The fractional
//! process is the classical one evaluated at an independent random time,
//! so one draw of `T_{2 nu}(t)` followed by a classical run to that
//! horizon is exact in distribution as well — no discretization anywhere.
//!
//! Batches run in parallel with one counter-based RNG stream per run
//! (`stream = run index`, seeded identically), so reports are
//! bit-reproducible regardless of thread scheduling.

use crate::analytic::PmfTable;
use crate::error::{Error, Result};
use crate::random_time::RandomTimeLaw;
use crate::rates::ValidatedSchedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma_ur;
use std::collections::BTreeMap;

/// Guard against near-explosive schedules: one run may not exceed this
/// many birth events.
pub const EXPLOSION_GUARD: u64 = 10_000_000;

/// Empirical counts with chi-square comparison against an analytic PMF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub runs: u64,
    pub empirical: BTreeMap<u64, u64>,
    pub mean_hat: f64,
    pub var_hat: f64,
    pub chi_square: f64,
    pub dof: u32,
    pub p_value: f64,
    pub bins_merged: u32,
}

/// State of the classical chain at elapsed time `s`, starting from `n0`.
pub fn simulate_classical<R: Rng + ?Sized>(
    schedule: &ValidatedSchedule,
    s: f64,
    n0: usize,
    rng: &mut R,
) -> Result<u64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("horizon must be >= 0, got {s}")));
    }
    if n0 == 0 {
        return Err(Error::Domain("n0 must be >= 1".into()));
    }
    let mut state = n0 as u64;
    if s == 0.0 {
        return Ok(state);
    }
    let mut elapsed = 0.0f64;
    let mut events = 0u64;
    loop {
        let rate = match schedule.rate_at(state as usize) {
            Ok(r) => r,
            Err(Error::IndexOutOfRange { .. }) => {
                return Err(Error::PrefixExhausted(state as usize))
            }
            Err(e) => return Err(e),
        };
        let hold = -(1.0 - rng.random::<f64>()).ln() / rate;
        elapsed += hold;
        if elapsed > s {
            return Ok(state);
        }
        state += 1;
        events += 1;
        if events > EXPLOSION_GUARD {
            return Err(Error::ExplosionGuard(events));
        }
    }
}

/// State of the fractional chain at time `t`: a classical run to the
/// random horizon `T_{2 nu}(t)`.
pub fn simulate_fractional<R: Rng + ?Sized>(
    schedule: &ValidatedSchedule,
    nu: f64,
    t: f64,
    n0: usize,
    rng: &mut R,
) -> Result<u64> {
    if t == 0.0 {
        return Ok(n0 as u64);
    }
    let law = RandomTimeLaw::new(nu, t)?;
    let horizon = law.sample(rng)?;
    simulate_classical(schedule, horizon, n0, rng)
}

fn stream_rng(seed: u64, run: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// `runs` independent classical runs, counted by final state.
pub fn run_batch_classical(
    schedule: &ValidatedSchedule,
    s: f64,
    n0: usize,
    runs: u64,
    seed: u64,
) -> Result<BTreeMap<u64, u64>> {
    run_batch_with(runs, seed, |rng| simulate_classical(schedule, s, n0, rng))
}

/// `runs` independent fractional runs, counted by final state.
pub fn run_batch_fractional(
    schedule: &ValidatedSchedule,
    nu: f64,
    t: f64,
    n0: usize,
    runs: u64,
    seed: u64,
) -> Result<BTreeMap<u64, u64>> {
    // Validate (nu, t) once up front rather than per run.
    if t > 0.0 {
        RandomTimeLaw::new(nu, t)?;
    }
    run_batch_with(runs, seed, |rng| {
        simulate_fractional(schedule, nu, t, n0, rng)
    })
}

fn run_batch_with<F>(runs: u64, seed: u64, body: F) -> Result<BTreeMap<u64, u64>>
where
    F: Fn(&mut ChaCha12Rng) -> Result<u64> + Sync,
{
    if runs == 0 {
        return Err(Error::Domain("runs must be >= 1".into()));
    }
    (0..runs)
        .into_par_iter()
        .try_fold(BTreeMap::new, |mut acc: BTreeMap<u64, u64>, i| {
            let mut rng = stream_rng(seed, i);
            let state = body(&mut rng)?;
            *acc.entry(state).or_insert(0) += 1;
            Ok(acc)
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            Ok(a)
        })
}

/// Pearson chi-square of empirical counts against an analytic table.
///
/// States are scanned upward, pooling consecutive states until each bin's
/// expected count reaches `min_expected`; whatever remains (including the
/// table's tail mass) forms the last bin.
pub fn compare(
    empirical: &BTreeMap<u64, u64>,
    runs: u64,
    analytic: &PmfTable,
    min_expected: f64,
) -> Result<SimulationReport> {
    if runs == 0 {
        return Err(Error::Domain("runs must be >= 1".into()));
    }
    if !(min_expected > 0.0) {
        return Err(Error::Domain("min_expected must be positive".into()));
    }
    let total: u64 = empirical.values().sum();
    if total != runs {
        return Err(Error::Domain(format!(
            "counts sum to {total}, expected {runs}"
        )));
    }
    if let Some((&k_min, _)) = empirical.iter().next() {
        if (k_min as usize) < analytic.n0 {
            return Err(Error::Domain(format!(
                "observed state {k_min} below the table's n0 = {}",
                analytic.n0
            )));
        }
    }

    let runs_f = runs as f64;
    let mean_hat = empirical
        .iter()
        .map(|(&k, &c)| k as f64 * c as f64)
        .sum::<f64>()
        / runs_f;
    let var_hat = empirical
        .iter()
        .map(|(&k, &c)| (k as f64 - mean_hat).powi(2) * c as f64)
        .sum::<f64>()
        / runs_f;

    // Bin assembly over the table range; pooled tail picks up everything
    // past k_cut plus the analytic tail mass.
    let mut bins: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    let mut states_in_acc = 0u32;
    let mut bins_merged = 0u32;
    for (k, p) in analytic.iter() {
        acc_obs += empirical.get(&(k as u64)).copied().unwrap_or(0) as f64;
        acc_exp += p * runs_f;
        states_in_acc += 1;
        if acc_exp >= min_expected {
            bins.push((acc_obs, acc_exp));
            bins_merged += states_in_acc - 1;
            acc_obs = 0.0;
            acc_exp = 0.0;
            states_in_acc = 0;
        }
    }
    // Tail bin: remainder of the accumulator, observations beyond k_cut,
    // and the tail mass.
    let beyond: f64 = empirical
        .iter()
        .filter(|(&k, _)| k as usize > analytic.k_cut)
        .map(|(_, &c)| c as f64)
        .sum();
    acc_obs += beyond;
    acc_exp += analytic.tail_mass.max(0.0) * runs_f;
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = bins.last_mut() {
            if acc_exp < min_expected {
                last.0 += acc_obs;
                last.1 += acc_exp;
                bins_merged += states_in_acc;
            } else {
                bins.push((acc_obs, acc_exp));
            }
        } else {
            bins.push((acc_obs, acc_exp));
        }
    }

    if bins.len() < 2 {
        return Err(Error::DegenerateBinning(bins.len()));
    }
    let chi_square: f64 = bins
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e.max(f64::MIN_POSITIVE)
        })
        .sum();
    let dof = (bins.len() - 1) as u32;
    let p_value = gamma_ur(dof as f64 / 2.0, chi_square / 2.0).clamp(0.0, 1.0);

    Ok(SimulationReport {
        runs,
        empirical: empirical.clone(),
        mean_hat,
        var_hat,
        chi_square,
        dof,
        p_value,
        bins_merged,
    })
}
