//! Parallel drivers. Cells are independent; results keep input order, so
//! output does not depend on the thread count.

use photonsort_core::apps::sweeps::{
    analyze_lorentzian, beta_cell, emitter_cell, lorentzian_point, mismatch_line, BetaRow, EmitterRow, LorentzianSweep,
    MismatchRow,
};
use photonsort_core::objective::ObjectiveKind;
use photonsort_core::optimize::{gradient_flow, FlowParams, MultiSeedResult};
use photonsort_core::oracle::{dephasing_point, CascadeSystem, DephasingPoint};
use photonsort_core::{Emitter, EmitterChain, Pulse};
use rayon::prelude::*;

use crate::error::{AppError, AppResult};

/// Worker count override.
pub const THREADS_ENV: &str = "PHOTONSORT_THREADS";

/// Sizes the global pool from `PHOTONSORT_THREADS` if set. Safe to call
/// more than once; only the first call has an effect.
pub fn init_threads() -> AppResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| AppError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // fails only if the pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn multi_seed(chain: &EmitterChain, seeds: &[Pulse], params: &FlowParams) -> AppResult<MultiSeedResult> {
    let traces = seeds.par_iter().map(|s| gradient_flow(chain, s, params)).collect::<Result<Vec<_>, _>>()?;
    Ok(MultiSeedResult::from_traces(traces)?)
}

pub fn sweep_lorentzian(e: &Emitter, sigmas: &[f64]) -> AppResult<LorentzianSweep> {
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AppError::Usage("sigma values must be strictly increasing".into()));
    }
    let rows = sigmas.par_iter().map(|s| lorentzian_point(e, *s)).collect::<Result<Vec<_>, _>>()?;
    Ok(analyze_lorentzian(rows)?)
}

pub fn sweep_emitters(ne_list: &[usize], seeds: &[Pulse], params: &FlowParams) -> Vec<EmitterRow> {
    ne_list.par_iter().map(|ne| emitter_cell(*ne, seeds, params)).collect()
}

/// Lines of constant ratio run in parallel; each line warm-starts outward.
pub fn sweep_mismatch(ratios: &[f64], detunings: &[f64], seeds: &[Pulse], params: &FlowParams) -> Vec<MismatchRow> {
    ratios.par_iter().flat_map_iter(|r| mismatch_line(*r, detunings, seeds, params)).collect()
}

pub fn sweep_beta(
    base: &EmitterChain,
    reference: &Pulse,
    betas: &[f64],
    kind: ObjectiveKind,
    params: &FlowParams,
) -> Vec<BetaRow> {
    betas.par_iter().map(|b| beta_cell(base, reference, *b, kind, params)).collect()
}

pub fn dephasing_sweep(sys: &CascadeSystem, gamma_ps: &[f64]) -> AppResult<Vec<DephasingPoint>> {
    Ok(gamma_ps.par_iter().map(|g| dephasing_point(sys, *g)).collect::<Result<Vec<_>, _>>()?)
}
