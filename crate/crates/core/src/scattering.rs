//! One- and two-photon scattering through chirally coupled emitters.
//!
//! The two-photon kernel of one emitter is the linear part `t(k₁)t(k₂)` plus a
//! bound-state term supported on the energy shell `k₁+k₂ = p₁+p₂`. On the
//! uniform grid every shell is an anti-diagonal `i + j = s`, so a full
//! application costs `O(n²)`.

use alloc::vec::Vec;
use num_complex::Complex64 as C64;

use crate::emitter::{Emitter, EmitterChain};
use crate::error::{Error, Result};
use crate::grid::Pulse;
use crate::state::TwoPhotonState;

/// `T(k)` of the whole chain.
pub fn transmission(chain: &EmitterChain, k: f64) -> C64 {
    chain.transmission(k)
}

/// `ψ(k) = T(k)φ(k)`; not renormalized.
pub fn apply_single_photon(chain: &EmitterChain, p: &Pulse) -> Pulse {
    p.map_k(|k| chain.transmission(k))
}

/// Per-point coefficients for one emitter: `(1/a(k), t(k))`.
fn coefficients(e: &Emitter, grid_points: impl Iterator<Item = f64>) -> (Vec<C64>, Vec<C64>) {
    grid_points.map(|k| (e.pole(k).inv(), e.transmission(k))).unzip()
}

/// Shell sums `I[s] = dk Σ_{i+j=s} x_ij w_i w'_j`-style reductions are built by
/// the callers; this accumulates `Σ_{i+j=s} m_ij` for a row-major matrix.
fn shell_sums(n: usize, mut entry: impl FnMut(usize, usize) -> C64) -> Vec<C64> {
    let mut shells = alloc::vec![C64::new(0.0, 0.0); 2 * n - 1];
    for i in 0..n {
        let row = &mut shells[i..i + n];
        for (j, s) in row.iter_mut().enumerate() {
            *s += entry(i, j);
        }
    }
    shells
}

pub(crate) fn forward_emitter_with_constant(
    e: &Emitter,
    s: &TwoPhotonState,
    c: C64,
) -> TwoPhotonState {
    let grid = *s.grid();
    let n = grid.n();
    let dk = grid.dk();
    let (inv_a, t) = coefficients(e, grid.points());
    let psi = s.amp();
    let mut shells = shell_sums(n, |i, j| psi[i * n + j] * (inv_a[i] + inv_a[j]));
    for v in shells.iter_mut() {
        *v *= c * dk;
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let (ti, ai) = (t[i], inv_a[i]);
        for j in 0..n {
            out.push(ti * t[j] * psi[i * n + j] + ai * inv_a[j] * shells[i + j]);
        }
    }
    TwoPhotonState::new(grid, out).expect("shape preserved")
}

pub(crate) fn forward_emitter(e: &Emitter, s: &TwoPhotonState) -> TwoPhotonState {
    forward_emitter_with_constant(e, s, e.bound_constant())
}

/// Adjoint (conjugate transpose) of [`forward_emitter`] with respect to the
/// `dk²`-weighted inner product.
pub(crate) fn adjoint_emitter(e: &Emitter, x: &TwoPhotonState) -> TwoPhotonState {
    let grid = *x.grid();
    let n = grid.n();
    let dk = grid.dk();
    let (inv_a, t) = coefficients(e, grid.points());
    let inv_ac: Vec<C64> = inv_a.iter().map(|v| v.conj()).collect();
    let xs = x.amp();
    let mut shells = shell_sums(n, |i, j| xs[i * n + j] * inv_ac[i] * inv_ac[j]);
    let c = e.bound_constant().conj() * dk;
    for v in shells.iter_mut() {
        *v *= c;
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let (ti, ai) = (t[i].conj(), inv_ac[i]);
        for j in 0..n {
            out.push(ti * t[j].conj() * xs[i * n + j] + (ai + inv_ac[j]) * shells[i + j]);
        }
    }
    TwoPhotonState::new(grid, out).expect("shape preserved")
}

pub(crate) fn forward_chain(chain: &EmitterChain, s: &TwoPhotonState) -> TwoPhotonState {
    let mut cur = s.clone();
    for e in chain.emitters() {
        cur = forward_emitter(e, &cur);
    }
    cur
}

pub(crate) fn adjoint_chain(chain: &EmitterChain, x: &TwoPhotonState) -> TwoPhotonState {
    let mut cur = x.clone();
    for e in chain.emitters().iter().rev() {
        cur = adjoint_emitter(e, &cur);
    }
    cur
}

/// Two-photon scattering through one emitter.
pub fn apply_two_photon_emitter(e: &Emitter, s: &TwoPhotonState) -> Result<TwoPhotonState> {
    s.require_symmetric()?;
    Ok(forward_emitter(e, s))
}

/// Same as [`apply_two_photon_emitter`] with the bound-state prefactor
/// replaced by `c`; `c = 0` leaves only the linear part.
pub fn apply_two_photon_emitter_with_constant(
    e: &Emitter,
    s: &TwoPhotonState,
    c: C64,
) -> Result<TwoPhotonState> {
    s.require_symmetric()?;
    Ok(forward_emitter_with_constant(e, s, c))
}

/// Two-photon scattering through the chain, emitters applied in order.
pub fn apply_two_photon_chain(chain: &EmitterChain, s: &TwoPhotonState) -> Result<TwoPhotonState> {
    s.require_symmetric()?;
    let out = forward_chain(chain, s);
    if out.amp().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("two-photon scattering"));
    }
    Ok(out)
}

/// Adjoint `S†` of the chain's two-photon scattering.
pub fn apply_two_photon_chain_adjoint(
    chain: &EmitterChain,
    x: &TwoPhotonState,
) -> Result<TwoPhotonState> {
    x.require_symmetric()?;
    Ok(adjoint_chain(chain, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gaussian_pulse, lorentzian_pulse, Grid};
    use crate::state::product_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth random symmetric state: sum of symmetrized products of
    /// random Gaussian-envelope pulses.
    pub(crate) fn random_state(grid: Grid, rng: &mut ChaCha8Rng) -> TwoPhotonState {
        let mut acc = TwoPhotonState::zeros(grid);
        for _ in 0..3 {
            let mk = |rng: &mut ChaCha8Rng| {
                let c = rng.random_range(-1.5..1.5);
                let w = rng.random_range(0.4..1.5);
                let t0 = rng.random_range(-3.0..3.0);
                Pulse::from_fn(grid, |k| {
                    C64::from_polar((-(k - c) * (k - c) / (2.0 * w * w)).exp(), k * t0)
                })
            };
            let (a, b) = (mk(rng), mk(rng));
            let w = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            acc = acc.axpy(w, &TwoPhotonState::symmetric_product(&a, &b).unwrap()).unwrap();
        }
        let norm = acc.norm();
        acc.scaled(C64::new(1.0 / norm, 0.0))
    }

    #[test]
    fn zero_in_zero_out() {
        let g = Grid::fast();
        let out = apply_two_photon_emitter(&Emitter::resonant(), &TwoPhotonState::zeros(g)).unwrap();
        assert!(out.amp().iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn unitarity_single_and_pair() {
        let g = Grid::production();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pair = EmitterChain::identical(2).unwrap();
        for _ in 0..5 {
            let s = random_state(g, &mut rng);
            let one = apply_two_photon_emitter(&Emitter::resonant(), &s).unwrap();
            assert!((one.norm() - 1.0).abs() < 1e-5, "{}", one.norm());
            let two = apply_two_photon_chain(&pair, &s).unwrap();
            assert!((two.norm() - 1.0).abs() < 1e-5, "{}", two.norm());
            assert!(two.symmetry_defect() < 1e-12);
        }
    }

    #[test]
    fn detuned_emitter_is_unitary() {
        let g = Grid::production();
        let e = Emitter::new(0.8, 0.3, 1.0, 0.0).unwrap();
        let s = product_state(&lorentzian_pulse(g, 0.6).unwrap()).unwrap();
        let out = apply_two_photon_emitter(&e, &s).unwrap();
        assert!((out.norm_sq() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn lossy_emitter_contracts() {
        let g = Grid::fast();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Emitter::new(1.0, 0.0, 0.9, 0.0).unwrap();
        for _ in 0..3 {
            let s = random_state(g, &mut rng);
            assert!(apply_two_photon_emitter(&e, &s).unwrap().norm() < s.norm());
        }
    }

    #[test]
    fn linear_part_factorizes() {
        let g = Grid::fast();
        let e = Emitter::new(1.0, 0.1, 0.95, 0.0).unwrap();
        let s = product_state(&gaussian_pulse(g, 2.0).unwrap()).unwrap();
        let out = apply_two_photon_emitter_with_constant(&e, &s, C64::new(0.0, 0.0)).unwrap();
        let n = g.n();
        for i in (0..n).step_by(7) {
            for j in (0..n).step_by(5) {
                let expect = e.transmission(g.k(i)) * e.transmission(g.k(j)) * s.get(i, j);
                assert!((out.get(i, j) - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn bound_part_stays_on_shell() {
        let g = Grid::fast();
        let n = g.n();
        let shell = n; // i + j = n, total momentum ≈ 0
        let mut s = TwoPhotonState::zeros(g);
        for i in 1..n {
            let j = shell - i;
            s.amp_mut()[i * n + j] = C64::new(1.0 + 0.01 * (i.min(j) as f64), 0.0);
        }
        let e = Emitter::resonant();
        let full = apply_two_photon_emitter(&e, &s).unwrap();
        let lin = apply_two_photon_emitter_with_constant(&e, &s, C64::new(0.0, 0.0)).unwrap();
        for i in 0..n {
            for j in 0..n {
                let bound = full.get(i, j) - lin.get(i, j);
                if i + j != shell {
                    assert!(bound.norm() < 1e-14, "off-shell bound amplitude at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn adjoint_matches_inner_product() {
        let g = Grid::fast();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chain = EmitterChain::new(alloc::vec![
            Emitter::new(1.0, 0.2, 0.9, 0.0).unwrap(),
            Emitter::new(0.7, -0.3, 1.0, 0.0).unwrap(),
        ])
        .unwrap();
        let a = random_state(g, &mut rng);
        let b = random_state(g, &mut rng);
        let lhs = forward_chain(&chain, &a).inner(&b).unwrap();
        let rhs = a.inner(&adjoint_chain(&chain, &b)).unwrap();
        assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn narrowband_single_photon_flips_sign() {
        let g = Grid::new(2048, 4.0).unwrap();
        let p = lorentzian_pulse(g, 0.01).unwrap();
        let chain = EmitterChain::identical(1).unwrap();
        let psi = apply_single_photon(&chain, &p);
        assert!((p.inner(&psi).unwrap() + C64::new(1.0, 0.0)).norm() < 1e-2);
        assert!((psi.norm_sq() - p.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let g = Grid::fast();
        let a = gaussian_pulse(g, 1.0).unwrap();
        let b = lorentzian_pulse(g, 1.0).unwrap();
        let s = TwoPhotonState::outer(&a, &b);
        assert!(apply_two_photon_emitter(&Emitter::resonant(), &s).is_err());
    }

    #[test]
    fn unit_chain_matches_single_emitter() {
        let g = Grid::fast();
        let s = product_state(&gaussian_pulse(g, 2.0).unwrap()).unwrap();
        let e = Emitter::resonant();
        let a = apply_two_photon_emitter(&e, &s).unwrap();
        let b = apply_two_photon_chain(&EmitterChain::new(alloc::vec![e]).unwrap(), &s).unwrap();
        assert_eq!(a, b);
    }
}
