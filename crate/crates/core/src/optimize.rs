//! Pulse-shape optimizers: normalized gradient flow and the iterative
//! scatter / filter / time-reverse protocol.

use alloc::vec::Vec;
use num_complex::Complex64 as C64;

use crate::emitter::EmitterChain;
use crate::error::{Error, Result};
use crate::grid::{exponential_pulse, gaussian_pulse, lorentzian_pulse, Grid, Pulse, DEFAULT_GAUSSIAN_WIDTH};
use crate::modal::decompose;
use crate::objective::{gradient_raw, GradientResult, ObjectiveKind};
use crate::scattering::{apply_single_photon, forward_chain};
use crate::state::{product_state, TwoPhotonState};
use crate::takagi::leading_mode;

/// Accepted steps after which a halved step size is restored.
const RESET_AFTER: usize = 10;

/// Backtracking gives up once the step has shrunk by this factor.
const MIN_STEP_FRACTION: f64 = 1e-12;

/// Settings of the gradient flow `φ ← normalize(φ − Δτ δObj/δφ*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub dtau: f64,
    pub max_iters: usize,
    /// Stop once `|Obj_n − Obj_{n−1}| < tol`.
    pub tol: f64,
    pub kind: ObjectiveKind,
    /// Pulse snapshot interval (iterations); 0 disables snapshots.
    pub snapshot_every: usize,
    /// Halve `Δτ` whenever a step would increase the objective.
    pub backtracking: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            dtau: 0.05,
            max_iters: 20_000,
            tol: 1e-10,
            kind: ObjectiveKind::Plain,
            snapshot_every: 100,
            backtracking: true,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return Err(Error::InvalidParameter { name: "dtau", value: self.dtau });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter { name: "tol", value: self.tol });
        }
        Ok(())
    }
}

/// One logged optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    /// Sorting error `E`.
    pub error: f64,
    pub n2: f64,
    /// `1 − E`.
    pub fidelity: f64,
    /// Step size used to reach this point (0 for the seed and filter rounds).
    pub dtau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub snapshots: Vec<(usize, Pulse)>,
    pub final_pulse: Pulse,
    pub converged: bool,
}

impl OptimizationTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace holds at least the seed")
    }

    pub fn final_objective(&self) -> f64 {
        self.last().objective
    }

    pub fn final_fidelity(&self) -> f64 {
        self.last().fidelity
    }

    /// Whether the objective never increased between consecutive records.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].objective <= w[0].objective)
    }
}

fn record(iter: usize, r: &GradientResult, dtau: f64) -> TraceRecord {
    TraceRecord {
        iter,
        objective: r.value,
        error: r.eval.error,
        n2: r.eval.n2,
        fidelity: 1.0 - r.eval.error,
        dtau,
    }
}

fn checked_gradient(chain: &EmitterChain, phi: &Pulse, kind: ObjectiveKind) -> Result<GradientResult> {
    let r = gradient_raw(chain, phi, kind);
    if !r.value.is_finite() || r.grad.amp().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("objective during gradient flow"));
    }
    Ok(r)
}

/// Normalized steepest descent on the unit sphere.
pub fn gradient_flow(chain: &EmitterChain, seed: &Pulse, params: &FlowParams) -> Result<OptimizationTrace> {
    params.validate()?;
    seed.require_normalized()?;
    let mut phi = seed.clone();
    let mut current = checked_gradient(chain, &phi, params.kind)?;
    let mut records = alloc::vec![record(0, &current, 0.0)];
    let mut snapshots = Vec::new();
    if params.snapshot_every > 0 {
        snapshots.push((0, phi.clone()));
    }
    let mut dtau = params.dtau;
    let mut successes = 0;
    let mut converged = false;
    let mut iter = 0;
    while iter < params.max_iters {
        iter += 1;
        let candidate = phi.axpy(C64::new(-dtau, 0.0), &current.grad)?.normalize()?;
        let next = checked_gradient(chain, &candidate, params.kind)?;
        if params.backtracking && next.value > current.value {
            dtau *= 0.5;
            successes = 0;
            if dtau < MIN_STEP_FRACTION * params.dtau {
                // No descent direction left at machine precision.
                converged = true;
                break;
            }
            continue;
        }
        let delta = (current.value - next.value).abs();
        phi = candidate;
        current = next;
        records.push(record(iter, &current, dtau));
        if params.snapshot_every > 0 && iter % params.snapshot_every == 0 {
            snapshots.push((iter, phi.clone()));
        }
        successes += 1;
        if successes >= RESET_AFTER {
            dtau = params.dtau;
            successes = 0;
        }
        if delta < params.tol {
            converged = true;
            break;
        }
    }
    if params.snapshot_every > 0 && snapshots.last().map(|s| s.0) != Some(records.last().unwrap().iter) {
        snapshots.push((records.last().unwrap().iter, phi.clone()));
    }
    Ok(OptimizationTrace { records, snapshots, final_pulse: phi, converged })
}

/// Stop tolerance on `|ΔE|` between filter rounds.
pub const FILTER_TOL: f64 = 1e-10;

fn filter_round(chain: &EmitterChain, phi: &Pulse) -> Result<(f64, f64, Pulse)> {
    let psi = apply_single_photon(chain, phi).normalize()?;
    let out = forward_chain(chain, &product_state(phi)?);
    let d = decompose(&psi, &out)?;
    let error = d.error();
    if !error.is_finite() {
        return Err(Error::NonFinite("filter round"));
    }
    let reversed = d.residual.negate_momenta();
    let second = forward_chain(chain, &reversed);
    let (_, f1) = leading_mode(&second)?;
    Ok((error, out.norm_sq(), f1.mirrored().normalize()?))
}

/// Iterative filtering: scatter `φφ`, remove the `ψ`-mode components, time
/// reverse, scatter again and take the time-reversed leading Takagi mode as
/// the next input. Returns the best pulse seen.
pub fn iterative_filter(chain: &EmitterChain, seed: &Pulse, max_rounds: usize) -> Result<OptimizationTrace> {
    iterative_filter_with_tol(chain, seed, max_rounds, FILTER_TOL)
}

pub fn iterative_filter_with_tol(
    chain: &EmitterChain,
    seed: &Pulse,
    max_rounds: usize,
    tol: f64,
) -> Result<OptimizationTrace> {
    seed.require_normalized()?;
    let mut phi = seed.clone();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut best: Option<(f64, Pulse)> = None;
    let mut converged = false;
    for round in 0..=max_rounds {
        let (error, n2, next) = filter_round(chain, &phi)?;
        records.push(TraceRecord { iter: round, objective: error, error, n2, fidelity: 1.0 - error, dtau: 0.0 });
        snapshots.push((round, phi.clone()));
        if best.as_ref().is_none_or(|(e, _)| error < *e) {
            best = Some((error, phi.clone()));
        }
        if round > 0 {
            let prev = records[records.len() - 2].error;
            if (prev - error).abs() < tol {
                converged = true;
                break;
            }
        }
        phi = next;
    }
    let (best_error, final_pulse) = best.expect("at least one round");
    // Report the best pulse as the final state of the trace.
    if records.last().unwrap().error != best_error {
        let r = records.iter().find(|r| r.error == best_error).copied().unwrap();
        records.push(TraceRecord { iter: records.len(), ..r });
    }
    Ok(OptimizationTrace { records, snapshots, final_pulse, converged })
}

/// Outcome of optimizing from several seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeedResult {
    pub best: OptimizationTrace,
    pub best_index: usize,
    pub final_objectives: Vec<f64>,
}

impl MultiSeedResult {
    /// Spread (max − min) of the final objectives.
    pub fn spread(&self) -> f64 {
        let max = self.final_objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.final_objectives.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Pick the lowest final objective; ties go to the earlier seed.
    pub fn from_traces(traces: Vec<OptimizationTrace>) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::InvalidParameter { name: "seeds", value: 0.0 });
        }
        let final_objectives: Vec<f64> = traces.iter().map(|t| t.final_objective()).collect();
        let mut best_index = 0;
        for (i, v) in final_objectives.iter().enumerate() {
            if *v < final_objectives[best_index] {
                best_index = i;
            }
        }
        let best = traces.into_iter().nth(best_index).unwrap();
        Ok(MultiSeedResult { best, best_index, final_objectives })
    }
}

/// Gradient flow from each seed in turn; keeps the best.
pub fn multi_seed(chain: &EmitterChain, seeds: &[Pulse], params: &FlowParams) -> Result<MultiSeedResult> {
    let traces = seeds.iter().map(|s| gradient_flow(chain, s, params)).collect::<Result<Vec<_>>>()?;
    MultiSeedResult::from_traces(traces)
}

/// Gaussian, unit-width Lorentzian and an asymmetric exponential decay.
pub fn default_seeds(grid: Grid) -> Result<Vec<Pulse>> {
    Ok(alloc::vec![
        gaussian_pulse(grid, DEFAULT_GAUSSIAN_WIDTH)?,
        lorentzian_pulse(grid, 1.0)?,
        exponential_pulse(grid, 1.0)?,
    ])
}

/// `‖φ(k) − φ*(−k)‖`, zero for pulses with a real time signal. The global
/// phase is fixed first so the value is gauge independent.
pub fn time_reversal_defect(p: &Pulse) -> f64 {
    // Choose the phase that makes ⟨φ*(−k)|φ⟩ real and positive.
    let partner = p.conj_mirrored();
    let ov = partner.inner_unchecked(p);
    if ov.norm() == 0.0 {
        return p.norm() * core::f64::consts::SQRT_2;
    }
    let rot = C64::from_polar(1.0, -0.5 * ov.arg());
    let q = p.scaled(rot);
    q.axpy(C64::new(-1.0, 0.0), &q.conj_mirrored()).expect("same grid").norm()
}

/// Two-photon output of the chain for a normalized input.
pub fn scatter_product(chain: &EmitterChain, p: &Pulse) -> Result<TwoPhotonState> {
    Ok(forward_chain(chain, &product_state(p)?))
}
