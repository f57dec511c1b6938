//! Decomposition of the scattered two-photon state against the single-photon
//! output mode `ψ`: `Ψ = c₂ ψψ + c₁ (ψθ + θψ)/√2 + Ψr`.

use num_complex::Complex64 as C64;

use crate::emitter::EmitterChain;
use crate::error::{Error, Result};
use crate::grid::Pulse;
use crate::scattering::{apply_single_photon, apply_two_photon_chain};
use crate::state::{product_state, TwoPhotonState};
use crate::takagi::{takagi, TakagiDecomposition};

/// `c₁` below this is treated as zero and `θ` is returned as the zero pulse.
pub const C1_FLOOR: f64 = 1e-14;

/// `c₂ = ∫∫ [ψ(k₁)ψ(k₂)]* Ψ(k₁,k₂)`.
pub fn extract_c2(psi: &Pulse, s: &TwoPhotonState) -> Result<C64> {
    psi.require_normalized()?;
    s.product_overlap(psi, psi)
}

/// `c₁θ(k) = √2 ∫dk₁ ψ*(k₁)Ψ(k₁,k) − √2 c₂ ψ(k)` with `c₁ ≥ 0` real and the
/// phase carried by the normalized `θ`.
pub fn extract_c1_theta(psi: &Pulse, s: &TwoPhotonState) -> Result<(f64, Pulse)> {
    let c2 = extract_c2(psi, s)?;
    let g = s.contract_first(psi)?;
    Ok(c1_theta_from(psi, &g, c2))
}

fn c1_theta_from(psi: &Pulse, g: &Pulse, c2: C64) -> (f64, Pulse) {
    let root2 = core::f64::consts::SQRT_2;
    let raw = g.axpy(-c2, psi).expect("same grid").scaled(C64::new(root2, 0.0));
    let c1 = raw.norm();
    if c1 <= C1_FLOOR {
        (0.0, Pulse::zeros(*psi.grid()))
    } else {
        (c1, raw.scaled(C64::new(1.0 / c1, 0.0)))
    }
}

/// The three orthogonal pieces of a two-photon state relative to `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalDecomposition {
    pub psi: Pulse,
    pub c1: f64,
    pub c2: C64,
    pub theta: Pulse,
    /// `Ψr = Ψ − c₂ψψ − c₁(ψθ + θψ)/√2`, free of photons in `ψ`.
    pub residual: TwoPhotonState,
}

impl ModalDecomposition {
    /// `Ψs = c₂ψψ + c₁(ψθ + θψ)/√2`.
    pub fn unwanted(&self) -> TwoPhotonState {
        let root2 = core::f64::consts::SQRT_2;
        let pp = TwoPhotonState::outer(&self.psi, &self.psi).scaled(self.c2);
        let cross = TwoPhotonState::symmetric_product(&self.psi, &self.theta)
            .expect("same grid")
            .scaled(C64::new(self.c1 * root2, 0.0));
        pp.axpy(C64::new(1.0, 0.0), &cross).expect("same grid")
    }

    pub fn error(&self) -> f64 {
        self.c1 * self.c1 + self.c2.norm_sqr()
    }
}

/// Full split of `s` against the normalized mode `psi`.
pub fn decompose(psi: &Pulse, s: &TwoPhotonState) -> Result<ModalDecomposition> {
    let c2 = extract_c2(psi, s)?;
    let g = s.contract_first(psi)?;
    let (c1, theta) = c1_theta_from(psi, &g, c2);
    let mut d = ModalDecomposition {
        psi: psi.clone(),
        c1,
        c2,
        theta,
        residual: TwoPhotonState::zeros(*s.grid()),
    };
    d.residual = s.axpy(C64::new(-1.0, 0.0), &d.unwanted())?;
    Ok(d)
}

/// Everything known about sorting one pulse with one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SortingReport {
    /// Single-photon survival `∫|ψ|²`.
    pub n1: f64,
    /// Two-photon survival `∫∫|Ψ|²`.
    pub n2: f64,
    pub c1: f64,
    pub c2: C64,
    pub theta: Pulse,
    /// `E = |c₁|² + |c₂|²`.
    pub error: f64,
    /// `1 − E`.
    pub fidelity: f64,
    /// `N₂ − E`.
    pub total_fidelity: f64,
    /// `1 − E/N₂`.
    pub conditional_fidelity: f64,
    pub takagi: TakagiDecomposition,
    /// Normalized single-photon output mode `ψ/√N₁`.
    pub psi_out: Pulse,
    pub output: TwoPhotonState,
}

impl SortingReport {
    /// `|a₁|²` of the output state.
    pub fn leading_population(&self) -> f64 {
        self.takagi.eigenvalues()[0].norm_sqr()
    }
}

/// Scatter `φ` and `φφ`, then decompose the two-photon output against the
/// renormalized single-photon output.
pub fn sorting_report(chain: &EmitterChain, p: &Pulse) -> Result<SortingReport> {
    let output = apply_two_photon_chain(chain, &product_state(p)?)?;
    let psi = apply_single_photon(chain, p);
    let n1 = psi.norm_sq();
    let psi_out = psi.normalize()?;
    let n2 = output.norm_sq();
    let d = decompose(&psi_out, &output)?;
    let error = d.error();
    if !error.is_finite() {
        return Err(Error::NonFinite("sorting error"));
    }
    Ok(SortingReport {
        n1,
        n2,
        c1: d.c1,
        c2: d.c2,
        theta: d.theta,
        error,
        fidelity: 1.0 - error,
        total_fidelity: n2 - error,
        conditional_fidelity: 1.0 - error / n2,
        takagi: takagi(&output)?,
        psi_out,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::Emitter;
    use crate::grid::{gaussian_pulse, lorentzian_pulse, Grid};

    fn orthogonal_pair(g: Grid) -> (Pulse, Pulse) {
        let psi = gaussian_pulse(g, 1.0).unwrap();
        let raw = psi.delayed(2.0).map_k(|k| C64::new(1.0 + 0.3 * k, 0.0));
        let theta = raw.axpy(-psi.inner(&raw).unwrap(), &psi).unwrap().normalize().unwrap();
        (psi, theta)
    }

    #[test]
    fn product_state_is_pure_c2() {
        let g = Grid::fast();
        let psi = lorentzian_pulse(g, 1.0).unwrap();
        let s = product_state(&psi).unwrap();
        assert!((extract_c2(&psi, &s).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
        let (c1, theta) = extract_c1_theta(&psi, &s).unwrap();
        assert!(c1 < 1e-10);
        assert!(c1 == 0.0 || theta.is_normalized());
    }

    #[test]
    fn constructed_cross_term_gives_c1_one() {
        let g = Grid::fast();
        let (psi, theta0) = orthogonal_pair(g);
        let s = TwoPhotonState::symmetric_product(&psi, &theta0)
            .unwrap()
            .scaled(C64::new(core::f64::consts::SQRT_2, 0.0));
        assert!((s.norm_sq() - 1.0).abs() < 1e-10);
        let (c1, theta) = extract_c1_theta(&psi, &s).unwrap();
        assert!((c1 - 1.0).abs() < 1e-10);
        assert!((theta.inner(&theta0).unwrap().norm() - 1.0).abs() < 1e-10);
        assert!(psi.inner(&theta).unwrap().norm() < 1e-10);
        assert!(extract_c2(&psi, &s).unwrap().norm() < 1e-12);
    }

    #[test]
    fn orthogonal_slots_give_zero_c2() {
        let g = Grid::fast();
        let (psi, theta) = orthogonal_pair(g);
        let s = product_state(&theta).unwrap();
        assert!(extract_c2(&psi, &s).unwrap().norm() < 1e-12);
    }

    #[test]
    fn pythagoras_and_residual_orthogonality() {
        let g = Grid::fast();
        let chain = EmitterChain::identical(1).unwrap();
        let p = gaussian_pulse(g, 2.0).unwrap();
        let out = apply_two_photon_chain(&chain, &product_state(&p).unwrap()).unwrap();
        let psi = apply_single_photon(&chain, &p).normalize().unwrap();
        let d = decompose(&psi, &out).unwrap();
        let total = d.c2.norm_sqr() + d.c1 * d.c1 + d.residual.norm_sq();
        assert!((total - out.norm_sq()).abs() < 1e-8);
        let leak = d.residual.contract_first(&psi).unwrap();
        assert!(leak.amp().iter().all(|v| v.norm() < 1e-8));
        assert!(psi.inner(&d.theta).unwrap().norm() < 1e-10);
    }

    #[test]
    fn report_consistency() {
        let g = Grid::fast();
        let chain = EmitterChain::new(alloc::vec![Emitter::new(1.0, 0.0, 0.9, 0.0).unwrap(); 2]).unwrap();
        let p = gaussian_pulse(g, 2.0).unwrap();
        let r = sorting_report(&chain, &p).unwrap();
        assert!((r.error - (r.c1 * r.c1 + r.c2.norm_sqr())).abs() < 1e-12);
        assert!(r.n1 < 1.0 && r.n2 < 1.0);
        assert!(r.total_fidelity <= r.n2);
        assert!((0.0..=1.0).contains(&r.conditional_fidelity));
        let lossless = sorting_report(&EmitterChain::identical(2).unwrap(), &p).unwrap();
        assert!((lossless.n1 - 1.0).abs() < 1e-12);
        // truncation of the bound part at k_max = 16 costs ~1e-4
        assert!((lossless.n2 - 1.0).abs() < 1e-3);
    }
}
