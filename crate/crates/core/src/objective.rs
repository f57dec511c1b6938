//! Sorting error `E[φ, φ*]`, its lossy variants and their gradients.
//!
//! With `ψ = Tφ`, `Ψ = S(φφ)`, `N₁ = ‖ψ‖²`, `g(k) = ∫ψ*(k₁)Ψ(k₁,k)` and
//! `P = ⟨ψ|g⟩` the error is `E = 2‖g‖²/N₁ − |P|²/N₁²`, which equals
//! `|c₁|² + |c₂|²` measured against `ψ/√N₁`. Gradients are Wirtinger
//! derivatives `δ/δφ*` obtained by pulling the output sensitivities back
//! through the adjoint chain.

use alloc::vec::Vec;
use num_complex::Complex64 as C64;

use crate::emitter::EmitterChain;
use crate::error::{Error, Result};
use crate::grid::Pulse;
use crate::scattering::{adjoint_chain, apply_single_photon, forward_chain};
use crate::state::TwoPhotonState;

/// Which functional of `E` and `N₂` is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveKind {
    /// `E`.
    #[default]
    Plain,
    /// `E − N₂`, maximizing the total fidelity.
    TotalMinusSurvival,
    /// `E / N₂`, maximizing the conditional fidelity.
    Conditional,
}

impl ObjectiveKind {
    pub fn combine(self, error: f64, n2: f64) -> f64 {
        match self {
            ObjectiveKind::Plain => error,
            ObjectiveKind::TotalMinusSurvival => error - n2,
            ObjectiveKind::Conditional => error / n2,
        }
    }

    /// Whether the gradient needs `δN₂/δφ*`.
    pub fn uses_survival(self) -> bool {
        !matches!(self, ObjectiveKind::Plain)
    }
}

/// Scalars of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub error: f64,
    pub n1: f64,
    pub n2: f64,
}

impl Evaluation {
    pub fn value(&self, kind: ObjectiveKind) -> f64 {
        kind.combine(self.error, self.n2)
    }
}

/// Objective value and `δObjective/δφ*` on the input grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub value: f64,
    pub eval: Evaluation,
    pub grad: Pulse,
}

struct Forward {
    psi: Pulse,
    out: TwoPhotonState,
    g: Pulse,
    p: C64,
    g_norm_sq: f64,
    eval: Evaluation,
}

fn forward(chain: &EmitterChain, phi: &Pulse) -> Forward {
    let psi = apply_single_photon(chain, phi);
    let out = forward_chain(chain, &TwoPhotonState::outer(phi, phi));
    let n1 = psi.norm_sq();
    let g = out.contract_first_unchecked(&psi);
    let p = psi.inner_unchecked(&g);
    let g_norm_sq = g.norm_sq();
    let error = 2.0 * g_norm_sq / n1 - p.norm_sqr() / (n1 * n1);
    let eval = Evaluation { error, n1, n2: out.norm_sq() };
    Forward { psi, out, g, p, g_norm_sq, eval }
}

/// Evaluation without the normalization precondition; used by finite
/// differences, which must leave the unit sphere.
pub(crate) fn evaluate_raw(chain: &EmitterChain, phi: &Pulse) -> Evaluation {
    forward(chain, phi).eval
}

fn check_finite(e: &Evaluation) -> Result<()> {
    if e.error.is_finite() && e.n1.is_finite() && e.n2.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("objective"))
    }
}

/// `E`, `N₁` and `N₂` for a normalized pulse.
pub fn evaluate(chain: &EmitterChain, p: &Pulse) -> Result<Evaluation> {
    p.require_normalized()?;
    let e = evaluate_raw(chain, p);
    check_finite(&e)?;
    Ok(e)
}

/// Sorting error `E = |c₁|² + |c₂|²` through the `L₁`/`L₂` contractions.
pub fn error_value(chain: &EmitterChain, p: &Pulse) -> Result<f64> {
    Ok(evaluate(chain, p)?.error)
}

pub fn objective_value(chain: &EmitterChain, p: &Pulse, kind: ObjectiveKind) -> Result<f64> {
    Ok(evaluate(chain, p)?.value(kind))
}

fn pulse_from(grid: crate::grid::Grid, amp: Vec<C64>) -> Pulse {
    Pulse::new(grid, amp).expect("length matches grid")
}

/// `((G + Gᵀ)·φ*) dk` for a two-photon sensitivity `G`.
fn pull_back_product(gs: &TwoPhotonState, phi: &Pulse) -> Pulse {
    let a = gs.contract_first_unchecked(phi);
    let b = gs.contract_second_unchecked(phi);
    a.axpy(C64::new(1.0, 0.0), &b).expect("same grid")
}

pub(crate) fn gradient_raw(chain: &EmitterChain, phi: &Pulse, kind: ObjectiveKind) -> GradientResult {
    let grid = *phi.grid();
    let f = forward(chain, phi);
    let Evaluation { error, n1, n2 } = f.eval;
    let (psi, g, p) = (&f.psi, &f.g, f.p);
    let n1sq = n1 * n1;

    // ∂E/∂Ψ* = 2 ψ⊗g/N₁ − P ψ⊗ψ/N₁².
    let d_out = {
        let n = grid.n();
        let (pa, ga) = (psi.amp(), g.amp());
        let c_g = 2.0 / n1;
        let c_p = p / n1sq;
        let mut amp = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                amp.push(pa[i] * (ga[j] * c_g - c_p * pa[j]));
            }
        }
        TwoPhotonState::new(grid, amp).expect("shape")
    };

    // ∂E/∂ψ* = 2Ψg*/N₁ − 2‖g‖²ψ/N₁² − P*(g + g̃)/N₁² + 2|P|²ψ/N₁³.
    let psi_g = f.out.contract_second_unchecked(g);
    let g_tilde = f.out.contract_second_unchecked(psi);
    let c_psi = -2.0 * f.g_norm_sq / n1sq + 2.0 * p.norm_sqr() / (n1sq * n1);
    let c_g = -p.conj() / n1sq;
    let d_psi: Vec<C64> = (0..grid.n())
        .map(|j| {
            psi_g.amp()[j] * (2.0 / n1)
                + psi.amp()[j] * c_psi
                + (g.amp()[j] + g_tilde.amp()[j]) * c_g
        })
        .collect();

    let back = adjoint_chain(chain, &d_out);
    let from_two = pull_back_product(&back, phi);
    let grad_e: Vec<C64> = d_psi
        .iter()
        .zip(grid.points())
        .zip(from_two.amp())
        .map(|((d, k), b)| chain.transmission(k).conj() * d + b)
        .collect();
    let grad_e = pulse_from(grid, grad_e);

    let grad = if kind.uses_survival() {
        // δN₂/δφ* = ((S†Ψ + (S†Ψ)ᵀ)·φ*) dk.
        let grad_n2 = pull_back_product(&adjoint_chain(chain, &f.out), phi);
        match kind {
            ObjectiveKind::TotalMinusSurvival => {
                grad_e.axpy(C64::new(-1.0, 0.0), &grad_n2).expect("same grid")
            }
            ObjectiveKind::Conditional => grad_e
                .scaled(C64::new(1.0 / n2, 0.0))
                .axpy(C64::new(-error / (n2 * n2), 0.0), &grad_n2)
                .expect("same grid"),
            ObjectiveKind::Plain => unreachable!(),
        }
    } else {
        grad_e
    };
    GradientResult { value: f.eval.value(kind), eval: f.eval, grad }
}

/// Objective value and its functional derivative with respect to `φ*`.
pub fn gradient(chain: &EmitterChain, p: &Pulse, kind: ObjectiveKind) -> Result<GradientResult> {
    p.require_normalized()?;
    let r = gradient_raw(chain, p, kind);
    check_finite(&r.eval)?;
    if r.grad.amp().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(r)
}

/// Central-difference check of a Wirtinger gradient.
///
/// With `φ_j = x_j + i y_j`, `∂F/∂x_j = 2 dk Re grad_j` and
/// `∂F/∂y_j = 2 dk Im grad_j`. Returns the largest deviation over the `2n`
/// real coordinates divided by the largest analytic component.
pub fn fd_check_fn(p: &Pulse, grad: &Pulse, eps: f64, mut f: impl FnMut(&Pulse) -> f64) -> Result<f64> {
    fd_check_coords(p, grad, eps, 0..p.grid().n(), &mut f)
}

pub(crate) fn fd_check_coords(
    p: &Pulse,
    grad: &Pulse,
    eps: f64,
    coords: impl Iterator<Item = usize> + Clone,
    f: &mut impl FnMut(&Pulse) -> f64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidParameter { name: "eps", value: eps });
    }
    if p.grid() != grad.grid() {
        return Err(Error::GridMismatch);
    }
    let dk = p.grid().dk();
    let scale = coords
        .clone()
        .map(|j| grad.amp()[j].re.abs().max(grad.amp()[j].im.abs()))
        .fold(0.0, f64::max)
        * 2.0
        * dk;
    let mut worst = 0.0f64;
    let mut probe = p.clone();
    for j in coords {
        for (dir, analytic) in [
            (C64::new(eps, 0.0), 2.0 * dk * grad.amp()[j].re),
            (C64::new(0.0, eps), 2.0 * dk * grad.amp()[j].im),
        ] {
            let base = probe.amp()[j];
            probe.amp_mut()[j] = base + dir;
            let up = f(&probe);
            probe.amp_mut()[j] = base - dir;
            let down = f(&probe);
            probe.amp_mut()[j] = base;
            worst = worst.max(((up - down) / (2.0 * eps) - analytic).abs());
        }
    }
    if !worst.is_finite() {
        return Err(Error::NonFinite("finite differences"));
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Finite-difference validation of [`gradient`] over all `2n` real coordinates.
pub fn fd_check(chain: &EmitterChain, p: &Pulse, kind: ObjectiveKind, eps: f64) -> Result<f64> {
    let r = gradient(chain, p, kind)?;
    fd_check_fn(p, &r.grad, eps, |q| evaluate_raw(chain, q).value(kind))
}

/// Same as [`fd_check`] restricted to every `stride`-th grid point.
pub fn fd_check_strided(
    chain: &EmitterChain,
    p: &Pulse,
    kind: ObjectiveKind,
    eps: f64,
    stride: usize,
) -> Result<f64> {
    let r = gradient(chain, p, kind)?;
    let coords = (0..p.grid().n()).step_by(stride.max(1));
    fd_check_coords(p, &r.grad, eps, coords, &mut |q| evaluate_raw(chain, q).value(kind))
}

/// The Hermitian kernel `H[φ]` with `E = ⟨φ|H φ⟩`, applied matrix-free.
///
/// `L₁ b = ∫dk₁ ψ*(k₁) [S sym(φ⊗b)](k₁, ·)` and `L₂ = L₁†ψ`; then
/// `H b = 2 L₁†L₁ b / N₁ − L₂ ⟨L₂|b⟩ / N₁²`.
#[derive(Debug, Clone)]
pub struct ErrorKernel {
    chain: EmitterChain,
    phi: Pulse,
    psi: Pulse,
    n1: f64,
    l2: Pulse,
}

impl ErrorKernel {
    pub fn new(chain: &EmitterChain, phi: &Pulse) -> Result<Self> {
        phi.require_normalized()?;
        let psi = apply_single_photon(chain, phi);
        let n1 = psi.norm_sq();
        let mut k = ErrorKernel { chain: chain.clone(), phi: phi.clone(), psi, n1, l2: Pulse::zeros(*phi.grid()) };
        k.l2 = k.l1_adjoint(&k.psi.clone());
        Ok(k)
    }

    fn l1(&self, b: &Pulse) -> Pulse {
        let s = TwoPhotonState::symmetric_product(&self.phi, b).expect("same grid");
        forward_chain(&self.chain, &s).contract_first_unchecked(&self.psi)
    }

    fn l1_adjoint(&self, c: &Pulse) -> Pulse {
        let x = TwoPhotonState::outer(&self.psi, c).symmetrized();
        adjoint_chain(&self.chain, &x).contract_first_unchecked(&self.phi)
    }

    pub fn apply(&self, b: &Pulse) -> Result<Pulse> {
        if b.grid() != self.phi.grid() {
            return Err(Error::GridMismatch);
        }
        let first = self.l1_adjoint(&self.l1(b)).scaled(C64::new(2.0 / self.n1, 0.0));
        let w = self.l2.inner_unchecked(b) / (self.n1 * self.n1);
        first.axpy(-w, &self.l2)
    }

    /// `⟨φ|H φ⟩`, which equals `E[φ]`.
    pub fn expectation(&self) -> f64 {
        let h = self.apply(&self.phi).expect("same grid");
        self.phi.inner_unchecked(&h).re
    }
}
