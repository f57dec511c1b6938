//! Bosonic two-photon amplitudes `Ψ(k₁, k₂)` on the grid × grid product.

use alloc::vec::Vec;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;


use crate::error::{Error, Result};
use crate::grid::{Grid, Pulse};

/// Symmetry defect (relative to the largest entry) accepted as bosonic.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Row-major `n × n` amplitude, `amp[i·n + j] = Ψ(k_i, k_j)`, with norm
/// `Σ_ij |Ψ_ij|² dk²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    grid: Grid,
    amp: Vec<C64>,
}

impl TwoPhotonState {
    pub fn new(grid: Grid, amp: Vec<C64>) -> Result<Self> {
        let n = grid.n();
        if amp.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, found: amp.len() });
        }
        Ok(TwoPhotonState { grid, amp })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n();
        TwoPhotonState { grid, amp: alloc::vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        let n = grid.n();
        let mut amp = Vec::with_capacity(n * n);
        for i in 0..n {
            let ki = grid.k(i);
            for j in 0..n {
                amp.push(f(ki, grid.k(j)));
            }
        }
        TwoPhotonState { grid, amp }
    }

    /// `(a(k₁)b(k₂) + b(k₁)a(k₂))/2` without normalization.
    pub fn symmetric_product(a: &Pulse, b: &Pulse) -> Result<Self> {
        if a.grid() != b.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = *a.grid();
        let (x, y) = (a.amp(), b.amp());
        let n = grid.n();
        let mut amp = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                amp.push((x[i] * y[j] + y[i] * x[j]) * 0.5);
            }
        }
        Ok(TwoPhotonState { grid, amp })
    }

    pub(crate) fn outer(a: &Pulse, b: &Pulse) -> Self {
        let grid = *a.grid();
        let (x, y) = (a.amp(), b.amp());
        let mut amp = Vec::with_capacity(x.len() * y.len());
        for xi in x {
            for yj in y {
                amp.push(xi * yj);
            }
        }
        TwoPhotonState { grid, amp }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    #[inline]
    pub fn amp(&self) -> &[C64] {
        &self.amp
    }

    #[inline]
    pub fn amp_mut(&mut self) -> &mut [C64] {
        &mut self.amp
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.amp[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[C64] {
        let n = self.n();
        &self.amp[i * n..(i + 1) * n]
    }

    pub fn norm_sq(&self) -> f64 {
        let dk = self.grid.dk();
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * dk * dk
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `⟨self|other⟩ = Σ_ij self_ij* other_ij dk²`.
    pub fn inner(&self, other: &TwoPhotonState) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &TwoPhotonState) -> C64 {
        let dk = self.grid.dk();
        let s: C64 = self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum();
        s * (dk * dk)
    }

    /// `max |Ψ_ij - Ψ_ji|` relative to `max |Ψ_ij|` (0 for the zero state).
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n();
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let a = self.amp[i * n + j];
                scale = scale.max(a.norm());
                if j > i {
                    defect = defect.max((a - self.amp[j * n + i]).norm());
                }
            }
        }
        if scale > 0.0 {
            defect / scale
        } else {
            0.0
        }
    }

    pub fn require_symmetric(&self) -> Result<()> {
        let defect = self.symmetry_defect();
        if defect <= SYMMETRY_TOL {
            Ok(())
        } else {
            Err(Error::Asymmetric { max_defect: defect })
        }
    }

    /// `(Ψ + Ψᵀ)/2`.
    pub fn symmetrized(&self) -> Self {
        let n = self.n();
        let mut amp = self.amp.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = (self.amp[i * n + j] + self.amp[j * n + i]) * 0.5;
                amp[i * n + j] = avg;
                amp[j * n + i] = avg;
            }
        }
        TwoPhotonState { grid: self.grid, amp }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        TwoPhotonState { grid: self.grid, amp: self.amp.iter().map(|a| a * factor).collect() }
    }

    /// `self + factor·other`.
    pub fn axpy(&self, factor: C64, other: &TwoPhotonState) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(TwoPhotonState {
            grid: self.grid,
            amp: self.amp.iter().zip(&other.amp).map(|(a, b)| a + factor * b).collect(),
        })
    }

    /// `Ψ(k₁,k₂) → Ψ(-k₁,-k₂)` using the grid's periodic mirror map.
    pub fn negate_momenta(&self) -> Self {
        let g = self.grid;
        let n = g.n();
        let mut amp = Vec::with_capacity(n * n);
        for i in 0..n {
            let mi = g.mirror_index(i);
            for j in 0..n {
                amp.push(self.amp[mi * n + g.mirror_index(j)]);
            }
        }
        TwoPhotonState { grid: g, amp }
    }

    /// Multiply by `e^{i(k₁+k₂)t_d}`.
    pub fn phase_ramp(&self, t_d: f64) -> Self {
        let g = self.grid;
        let n = g.n();
        let phases: Vec<C64> = g.points().map(|k| C64::from_polar(1.0, k * t_d)).collect();
        let mut amp = self.amp.clone();
        for i in 0..n {
            for j in 0..n {
                amp[i * n + j] *= phases[i] * phases[j];
            }
        }
        TwoPhotonState { grid: g, amp }
    }

    /// `g(k) = ∫dk₁ a*(k₁) Ψ(k₁, k)`.
    pub fn contract_first(&self, a: &Pulse) -> Result<Pulse> {
        if a.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.contract_first_unchecked(a))
    }

    pub(crate) fn contract_first_unchecked(&self, a: &Pulse) -> Pulse {
        let n = self.n();
        let mut out = alloc::vec![C64::new(0.0, 0.0); n];
        for (i, ai) in a.amp().iter().enumerate() {
            let w = ai.conj();
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += w * x;
            }
        }
        let dk = self.grid.dk();
        for o in out.iter_mut() {
            *o *= dk;
        }
        Pulse::new(self.grid, out).expect("length matches grid")
    }

    /// `h(k) = ∫dk₂ Ψ(k, k₂) a*(k₂)`.
    pub(crate) fn contract_second_unchecked(&self, a: &Pulse) -> Pulse {
        let dk = self.grid.dk();
        let ac: Vec<C64> = a.amp().iter().map(|x| x.conj()).collect();
        let out = (0..self.n())
            .map(|i| self.row(i).iter().zip(&ac).map(|(x, y)| x * y).sum::<C64>() * dk)
            .collect();
        Pulse::new(self.grid, out).expect("length matches grid")
    }

    /// `∫∫ [a(k₁) b(k₂)]* Ψ(k₁, k₂)`.
    pub fn product_overlap(&self, a: &Pulse, b: &Pulse) -> Result<C64> {
        if a.grid() != &self.grid || b.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(b.inner_unchecked(&self.contract_first_unchecked(a)))
    }

    pub fn max_abs_diff(&self, other: &TwoPhotonState) -> f64 {
        self.amp.iter().zip(&other.amp).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `Φ(k₁,k₂) = φ(k₁)φ(k₂)` for a normalized single-photon pulse.
pub fn product_state(p: &Pulse) -> Result<TwoPhotonState> {
    p.require_normalized()?;
    Ok(TwoPhotonState::outer(p, p))
}
