use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// A two-level emitter chirally coupled to the waveguide.
///
/// `gamma` is the decay rate into the guided mode, `beta = gamma / gamma_tot`
/// the directional efficiency, `delta` the resonance detuning and `gamma_p`
/// the pure-dephasing rate (only the master-equation oracle uses it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter {
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma_p: f64,
}

impl Emitter {
    pub fn new(gamma: f64, delta: f64, beta: f64, gamma_p: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidEmitter("gamma must be positive"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidEmitter("beta must lie in (0, 1]"));
        }
        if !(gamma_p >= 0.0) || !gamma_p.is_finite() {
            return Err(Error::InvalidEmitter("gamma_p must be non-negative"));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidEmitter("delta must be finite"));
        }
        Ok(Emitter { gamma, delta, beta, gamma_p })
    }

    /// Lossless, resonant emitter with unit coupling.
    pub fn resonant() -> Self {
        Emitter { gamma: 1.0, delta: 0.0, beta: 1.0, gamma_p: 0.0 }
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Emitter::new(self.gamma, self.delta, beta, self.gamma_p)
    }

    pub fn with_dephasing(self, gamma_p: f64) -> Result<Self> {
        Emitter::new(self.gamma, self.delta, self.beta, gamma_p)
    }

    #[inline]
    pub fn gamma_total(&self) -> f64 {
        self.gamma / self.beta
    }

    /// `k - δ + iΓ_tot/2`, the resonance denominator.
    #[inline]
    pub fn pole(&self, k: f64) -> C64 {
        C64::new(k - self.delta, 0.5 * self.gamma_total())
    }

    /// `t(k) = (k - δ + iΓ_tot(1-2β)/2) / (k - δ + iΓ_tot/2)`.
    #[inline]
    pub fn transmission(&self, k: f64) -> C64 {
        let gt = self.gamma_total();
        C64::new(k - self.delta, 0.5 * gt * (1.0 - 2.0 * self.beta)) / self.pole(k)
    }

    /// Bound-state prefactor `iΓ²/(2π)` multiplying
    /// `[(k₁-δ+iΓ_tot/2)(k₂-δ+iΓ_tot/2)]⁻¹ [(p₁-δ+iΓ_tot/2)⁻¹ + (p₂-δ+iΓ_tot/2)⁻¹] δ(k₁+k₂-p₁-p₂)`.
    #[inline]
    pub fn bound_constant(&self) -> C64 {
        C64::new(0.0, self.gamma * self.gamma / (2.0 * PI))
    }
}

/// Emitters in the order the pulse meets them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterChain {
    emitters: Vec<Emitter>,
}

impl EmitterChain {
    pub fn new(emitters: Vec<Emitter>) -> Result<Self> {
        if emitters.is_empty() {
            return Err(Error::EmptyChain);
        }
        Ok(EmitterChain { emitters })
    }

    /// `count` copies of the resonant lossless emitter.
    pub fn identical(count: usize) -> Result<Self> {
        EmitterChain::new(alloc::vec![Emitter::resonant(); count])
    }

    /// Chain with no emitters; scattering is the identity. Test fixture.
    pub fn identity() -> Self {
        EmitterChain { emitters: Vec::new() }
    }

    pub fn emitters(&self) -> &[Emitter] {
        &self.emitters
    }

    pub fn len(&self) -> usize {
        self.emitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emitters.is_empty()
    }

    pub fn is_lossless(&self) -> bool {
        self.emitters.iter().all(|e| e.beta == 1.0)
    }

    pub fn transmission(&self, k: f64) -> C64 {
        self.emitters.iter().map(|e| e.transmission(k)).product()
    }

    /// Same chain with every emitter's directional efficiency set to `beta`.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let emitters = self.emitters.iter().map(|e| e.with_beta(beta)).collect::<Result<_>>()?;
        Ok(EmitterChain { emitters })
    }

    /// Same chain with every emitter's pure-dephasing rate set to `gamma_p`.
    pub fn with_dephasing(&self, gamma_p: f64) -> Result<Self> {
        let emitters =
            self.emitters.iter().map(|e| e.with_dephasing(gamma_p)).collect::<Result<_>>()?;
        Ok(EmitterChain { emitters })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Emitter::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(Emitter::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(Emitter::new(1.0, 0.0, 1.1, 0.0).is_err());
        assert!(Emitter::new(1.0, 0.0, 1.0, -0.1).is_err());
        assert!(Emitter::new(1.0, f64::NAN, 1.0, 0.0).is_err());
        assert_eq!(EmitterChain::new(Vec::new()), Err(Error::EmptyChain));
        let e = Emitter::new(1.0, 0.0, 0.8, 0.0).unwrap();
        assert!((e.gamma_total() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn resonant_phase_flip() {
        let e = Emitter::resonant();
        assert!((e.transmission(0.0) - C64::new(-1.0, 0.0)).norm() < 1e-15);
        for k in [-30.0, -3.0, -0.4, 0.1, 2.0, 30.0] {
            assert!((e.transmission(k).norm() - 1.0).abs() < 1e-14);
        }
        assert!((e.transmission(1e6) - C64::new(1.0, 0.0)).norm() < 1e-5);
    }

    #[test]
    fn critical_coupling_blocks_resonance() {
        let e = Emitter::new(1.0, 0.0, 0.5, 0.0).unwrap();
        assert!(e.transmission(0.0).norm() < 1e-15);
        let d = Emitter::new(1.0, 0.7, 0.5, 0.0).unwrap();
        assert!(d.transmission(0.7).norm() < 1e-15);
    }

    #[test]
    fn lossy_transmission_below_unity() {
        let e = Emitter::new(1.0, 0.0, 0.9, 0.0).unwrap();
        for k in [-2.0, 0.0, 0.5, 3.0] {
            assert!(e.transmission(k).norm() < 1.0);
        }
    }

    #[test]
    fn chain_transmission_is_product() {
        let a = Emitter::new(1.0, 0.2, 1.0, 0.0).unwrap();
        let b = Emitter::new(0.7, -0.1, 0.9, 0.0).unwrap();
        let chain = EmitterChain::new(alloc::vec![a, b]).unwrap();
        let k = 0.33;
        assert!((chain.transmission(k) - a.transmission(k) * b.transmission(k)).norm() < 1e-15);
        assert_eq!(EmitterChain::identity().transmission(k), C64::new(1.0, 0.0));
    }
}
