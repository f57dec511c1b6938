//! Uniform momentum grids, single-photon pulses and the continuum Fourier
//! transform between momentum and time.
//!
//! Amplitudes are continuum densities: a normalized pulse satisfies
//! `Σ_j |φ_j|² dk = 1`, and every integral `∫dk` is a plain Riemann sum over
//! the grid. The induced time grid has spacing `dt = 2π/(n·dk)` and covers one
//! period `[-π/dk, π/dk)` of the band-limited signal.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Tolerance on `norm² - 1` for a pulse to count as normalized.
pub const NORMALIZED_TOL: f64 = 1e-9;

/// Uniform momentum grid `k_j = -k_max + j·dk`, `dk = 2·k_max/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    k_max: f64,
}

impl Grid {
    pub fn new(n: usize, k_max: f64) -> Result<Self> {
        if n < 64 || n % 2 != 0 {
            return Err(Error::InvalidPointCount(n));
        }
        if !(k_max > 0.0) || !k_max.is_finite() {
            return Err(Error::InvalidExtent(k_max));
        }
        Ok(Grid { n, k_max })
    }

    /// Production grid: 512 points over ±32Γ (dk = Γ/8).
    pub fn production() -> Self {
        Grid { n: 512, k_max: 32.0 }
    }

    /// Fast-test grid: 256 points over ±16Γ (same spacing as production).
    pub fn fast() -> Self {
        Grid { n: 256, k_max: 16.0 }
    }

    /// Same spacing, twice the extent.
    pub fn doubled(&self) -> Self {
        Grid { n: 2 * self.n, k_max: 2.0 * self.k_max }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    #[inline]
    pub fn dk(&self) -> f64 {
        2.0 * self.k_max / self.n as f64
    }

    #[inline]
    pub fn k(&self, j: usize) -> f64 {
        -self.k_max + j as f64 * self.dk()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.k(j))
    }

    /// Time-grid spacing `2π/(n·dk)`.
    #[inline]
    pub fn dt(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dk())
    }

    /// Length of the periodic time window, `2π/dk`.
    #[inline]
    pub fn time_extent(&self) -> f64 {
        2.0 * PI / self.dk()
    }

    #[inline]
    pub fn time(&self, m: usize) -> f64 {
        -0.5 * self.time_extent() + m as f64 * self.dt()
    }

    /// Index of `-k_j`. Index 0 (`-k_max`) maps to itself by periodic wrap.
    #[inline]
    pub fn mirror_index(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }
}

/// Continuum single-photon wavefunction `φ(k_j)` on a momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    grid: Grid,
    amp: Vec<C64>,
}

/// Time-domain twin `φ̃(t_m)` of a [`Pulse`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimePulse {
    grid: Grid,
    amp: Vec<C64>,
}

impl Pulse {
    pub fn new(grid: Grid, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != grid.n() {
            return Err(Error::LengthMismatch { expected: grid.n(), found: amp.len() });
        }
        Ok(Pulse { grid, amp })
    }

    pub fn zeros(grid: Grid) -> Self {
        Pulse { grid, amp: alloc::vec![C64::new(0.0, 0.0); grid.n()] }
    }

    pub fn from_fn(grid: Grid, f: impl FnMut(f64) -> C64) -> Self {
        Pulse { grid, amp: grid.points().map(f).collect() }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn amp(&self) -> &[C64] {
        &self.amp
    }

    #[inline]
    pub fn amp_mut(&mut self) -> &mut [C64] {
        &mut self.amp
    }

    pub fn into_amp(self) -> Vec<C64> {
        self.amp
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dk()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized { norm_sq: self.norm_sq() })
        }
    }

    /// `⟨self|other⟩ = Σ_j self_j* other_j dk`.
    pub fn inner(&self, other: &Pulse) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Pulse) -> C64 {
        let s: C64 = self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.dk()
    }

    pub fn normalize(&self) -> Result<Pulse> {
        let norm = self.norm();
        if !(norm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite("pulse norm"));
        }
        Ok(self.scaled(C64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Pulse {
        Pulse { grid: self.grid, amp: self.amp.iter().map(|a| a * factor).collect() }
    }

    /// `self + factor·other`.
    pub fn axpy(&self, factor: C64, other: &Pulse) -> Result<Pulse> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Pulse {
            grid: self.grid,
            amp: self.amp.iter().zip(&other.amp).map(|(a, b)| a + factor * b).collect(),
        })
    }

    /// Pointwise product with a function of momentum.
    pub fn map_k(&self, mut f: impl FnMut(f64) -> C64) -> Pulse {
        Pulse {
            grid: self.grid,
            amp: self.amp.iter().enumerate().map(|(j, a)| a * f(self.grid.k(j))).collect(),
        }
    }

    /// `φ(-k)`.
    pub fn mirrored(&self) -> Pulse {
        let g = self.grid;
        Pulse { grid: g, amp: (0..g.n()).map(|j| self.amp[g.mirror_index(j)]).collect() }
    }

    /// `φ*(-k)`, the image of `φ` under time reversal of the real time signal.
    pub fn conj_mirrored(&self) -> Pulse {
        let g = self.grid;
        Pulse { grid: g, amp: (0..g.n()).map(|j| self.amp[g.mirror_index(j)].conj()).collect() }
    }

    /// Delay by `t0`: `φ(k) e^{ik t0}` so that `φ̃(t) → φ̃(t - t0)`.
    pub fn delayed(&self, t0: f64) -> Pulse {
        self.map_k(|k| C64::from_polar(1.0, k * t0))
    }

    /// Band-limited evaluation of `φ̃(t) = (2π)^{-1/2} Σ_j φ_j e^{-i k_j t} dk`.
    pub fn time_value(&self, t: f64) -> C64 {
        let g = &self.grid;
        let s: C64 = self
            .amp
            .iter()
            .enumerate()
            .map(|(j, a)| a * C64::from_polar(1.0, -g.k(j) * t))
            .sum();
        s * (g.dk() / (2.0 * PI).sqrt())
    }

    /// Samples `φ̃(t0 + m·h)` for `m = 0..count` with one phasor recurrence per
    /// grid point.
    pub fn time_samples(&self, t0: f64, h: f64, count: usize) -> Vec<C64> {
        let g = &self.grid;
        let scale = g.dk() / (2.0 * PI).sqrt();
        let mut out = alloc::vec![C64::new(0.0, 0.0); count];
        const RESYNC: usize = 1024;
        for (j, a) in self.amp.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            let k = g.k(j);
            let step = C64::from_polar(1.0, -k * h);
            let mut ph = C64::new(0.0, 0.0);
            for (m, slot) in out.iter_mut().enumerate() {
                if m % RESYNC == 0 {
                    ph = a * C64::from_polar(1.0, -k * (t0 + m as f64 * h));
                }
                *slot += ph;
                ph *= step;
            }
        }
        for v in out.iter_mut() {
            *v *= scale;
        }
        out
    }

    pub fn to_time_domain(&self) -> TimePulse {
        to_time_domain(self)
    }

    pub fn max_abs_diff(&self, other: &Pulse) -> f64 {
        self.amp.iter().zip(&other.amp).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl TimePulse {
    pub fn new(grid: Grid, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != grid.n() {
            return Err(Error::LengthMismatch { expected: grid.n(), found: amp.len() });
        }
        Ok(TimePulse { grid, amp })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn amp(&self) -> &[C64] {
        &self.amp
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    /// `∫dt a*(t) b(t)` on the time grid.
    pub fn inner(&self, other: &TimePulse) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: C64 = self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.dt())
    }

    pub fn max_imag(&self) -> f64 {
        self.amp.iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }

    pub fn to_momentum_domain(&self) -> Pulse {
        from_time_domain(self)
    }
}

/// Continuum DFT `φ̃(t_m) = (2π)^{-1/2} Σ_j φ(k_j) e^{-i k_j t_m} dk`.
pub fn to_time_domain(p: &Pulse) -> TimePulse {
    let g = p.grid;
    let amp = p.time_samples(g.time(0), g.dt(), g.n());
    TimePulse { grid: g, amp }
}

/// Inverse of [`to_time_domain`]: `φ(k_j) = (2π)^{-1/2} Σ_m φ̃(t_m) e^{i k_j t_m} dt`.
pub fn from_time_domain(p: &TimePulse) -> Pulse {
    let g = p.grid;
    let scale = g.dt() / (2.0 * PI).sqrt();
    let amp = (0..g.n())
        .map(|j| {
            let k = g.k(j);
            let s: C64 = p
                .amp
                .iter()
                .enumerate()
                .map(|(m, a)| a * C64::from_polar(1.0, k * g.time(m)))
                .sum();
            s * scale
        })
        .collect();
    Pulse { grid: g, amp }
}

pub fn make_grid(n: usize, k_max: f64) -> Result<Grid> {
    Grid::new(n, k_max)
}

/// Normalized Lorentzian `φ(k) ∝ 1/(k² + σ²)`.
pub fn lorentzian_pulse(grid: Grid, sigma: f64) -> Result<Pulse> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter { name: "sigma", value: sigma });
    }
    Pulse::from_fn(grid, |k| C64::new(1.0 / (k * k + sigma * sigma), 0.0)).normalize()
}

/// Exponent of the default Gaussian seed `φ(k) ∝ exp(-2 k²)`.
pub const DEFAULT_GAUSSIAN_WIDTH: f64 = 2.0;

/// Normalized Gaussian `φ(k) ∝ exp(-width_param · k²)`.
pub fn gaussian_pulse(grid: Grid, width_param: f64) -> Result<Pulse> {
    if !(width_param > 0.0) || !width_param.is_finite() {
        return Err(Error::InvalidParameter { name: "width_param", value: width_param });
    }
    Pulse::from_fn(grid, |k| C64::new((-width_param * k * k).exp(), 0.0)).normalize()
}

/// Normalized one-sided exponential in time, `φ̃(t) ∝ e^{-rate·t}θ(t)`,
/// i.e. `φ(k) ∝ 1/(rate - ik)`. Used as an asymmetric optimizer seed.
pub fn exponential_pulse(grid: Grid, rate: f64) -> Result<Pulse> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter { name: "rate", value: rate });
    }
    Pulse::from_fn(grid, |k| C64::new(1.0, 0.0) / C64::new(rate, -k)).normalize()
}

pub fn inner(a: &Pulse, b: &Pulse) -> Result<C64> {
    a.inner(b)
}

pub fn normalize(p: &Pulse) -> Result<Pulse> {
    p.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        assert_eq!(make_grid(256, 10.0).unwrap().dk(), 0.078125);
        assert_eq!(make_grid(64, 8.0).unwrap().dk(), 0.25);
        assert_eq!(make_grid(63, 8.0), Err(Error::InvalidPointCount(63)));
        assert_eq!(make_grid(32, 8.0), Err(Error::InvalidPointCount(32)));
        assert!(matches!(make_grid(64, 0.0), Err(Error::InvalidExtent(_))));
        assert!(matches!(make_grid(64, -1.0), Err(Error::InvalidExtent(_))));
    }

    #[test]
    fn grid_points_and_time_axis() {
        let g = make_grid(64, 8.0).unwrap();
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts[0], -8.0);
        assert_eq!(pts[32], 0.0);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
        for j in 1..64 {
            assert!((g.k(g.mirror_index(j)) + g.k(j)).abs() < 1e-12);
        }
        assert!((g.dt() - 2.0 * PI / (64.0 * 0.25)).abs() < 1e-15);
        assert!((g.time_extent() - 2.0 * PI / 0.25).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_shape() {
        let g = Grid::fast();
        let p = lorentzian_pulse(g, 1.0).unwrap();
        assert!((p.norm_sq() - 1.0).abs() < 1e-12);
        let peak = p.amp().iter().map(|a| a.norm()).fold(0.0, f64::max);
        assert_eq!(p.amp()[g.n() / 2].norm(), peak);
        assert!(lorentzian_pulse(g, 0.0).is_err());
        assert!(lorentzian_pulse(g, -1.0).is_err());
    }

    #[test]
    fn lorentzian_tail_deficit() {
        // Continuum normalization ∫dk/(k²+σ²)² = π/(2σ³).
        let sigma = 0.5;
        let g = make_grid(512, 20.0).unwrap();
        let raw = Pulse::from_fn(g, |k| C64::new(1.0 / (k * k + sigma * sigma), 0.0));
        let exact = PI / (2.0 * sigma * sigma * sigma);
        let deficit = (exact - raw.norm_sq()) / exact;
        assert!(deficit.abs() < 1e-3, "deficit {deficit}");
    }

    #[test]
    fn gaussian_shape() {
        let g = Grid::fast();
        let p = gaussian_pulse(g, DEFAULT_GAUSSIAN_WIDTH).unwrap();
        assert!((p.norm_sq() - 1.0).abs() < 1e-12);
        let c = g.n() / 2;
        for j in 1..g.n() {
            assert!(p.amp()[j].norm() <= p.amp()[c].norm());
            let m = p.amp()[g.mirror_index(j)];
            assert!((p.amp()[j] - m).norm() < 1e-12);
            assert_eq!(p.amp()[j].im, 0.0);
        }
        let ratio = p.amp()[c + 8].re / p.amp()[c].re;
        let k = g.k(c + 8);
        assert!((ratio - (-2.0 * k * k).exp()).abs() < 1e-14);
        assert!(gaussian_pulse(g, 0.0).is_err());
    }

    #[test]
    fn gaussian_fourier_pair() {
        // exp(-a k²) ↔ (2a)^{-1/2} exp(-t²/(4a)) under the unitary convention.
        let g = Grid::fast();
        let a = 2.0;
        let p = Pulse::from_fn(g, |k| C64::new((-a * k * k).exp(), 0.0));
        let t = p.to_time_domain();
        for m in (0..g.n()).step_by(7) {
            let tm = g.time(m);
            let expect = (-tm * tm / (4.0 * a)).exp() / (2.0 * a).sqrt();
            assert!((t.amp()[m] - C64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = make_grid(128, 8.0).unwrap();
        let p = Pulse::from_fn(g, |k| C64::new((-k * k).exp(), 0.3 * k * (-0.5 * k * k).exp()));
        let t = p.to_time_domain();
        assert!((t.norm_sq() - p.norm_sq()).abs() < 1e-10);
        let back = t.to_momentum_domain();
        assert!(back.max_abs_diff(&p) < 1e-10);
    }

    #[test]
    fn conjugate_parity_gives_real_time_signal() {
        let g = Grid::fast();
        let p = Pulse::from_fn(g, |k| C64::new((-k * k).exp(), 0.4 * k * (-k * k).exp()));
        // φ(-k) = φ*(k) holds by construction (even real part, odd imaginary part).
        assert!(p.conj_mirrored().max_abs_diff(&p) < 1e-12);
        assert!(p.to_time_domain().max_imag() < 1e-10);
        let q = Pulse::from_fn(g, |k| C64::new((-k * k).exp(), 0.4 * (-k * k).exp()));
        assert!(q.to_time_domain().max_imag() > 1e-3);
    }

    #[test]
    fn inner_products() {
        let g = Grid::fast();
        let even = gaussian_pulse(g, 1.0).unwrap();
        let odd = Pulse::from_fn(g, |k| C64::new(k * (-k * k).exp(), 0.0)).normalize().unwrap();
        assert!((even.inner(&even).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
        // Index 0 has no mirror partner on an even grid, but both pulses vanish there.
        assert!(even.inner(&odd).unwrap().norm() < 1e-12);
        let a = Pulse::from_fn(g, |k| C64::new((-k * k).exp(), k.sin()));
        let b = Pulse::from_fn(g, |k| C64::new(k.cos(), (-0.5 * k * k).exp()));
        assert!((a.inner(&b).unwrap() - b.inner(&a).unwrap().conj()).norm() < 1e-14);
        assert_eq!(
            a.inner(&Pulse::zeros(Grid::production())),
            Err(Error::GridMismatch)
        );
        assert_eq!(Pulse::zeros(g).normalize(), Err(Error::ZeroNorm));
    }

    #[test]
    fn doubling_resolution_is_spectrally_accurate() {
        let coarse = make_grid(128, 8.0).unwrap();
        let fine = make_grid(256, 8.0).unwrap();
        let f = |k: f64| C64::new((-k * k).exp(), 0.2 * k * (-0.7 * k * k).exp());
        let h = |k: f64| C64::new((-(k - 0.3) * (k - 0.3)).exp(), 0.0);
        let (a1, b1) = (Pulse::from_fn(coarse, f), Pulse::from_fn(coarse, h));
        let (a2, b2) = (Pulse::from_fn(fine, f), Pulse::from_fn(fine, h));
        assert!((a1.norm_sq() - a2.norm_sq()).abs() < 1e-8);
        assert!((a1.inner(&b1).unwrap() - a2.inner(&b2).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn time_value_matches_grid_transform() {
        let g = make_grid(64, 8.0).unwrap();
        let p = exponential_pulse(g, 1.0).unwrap();
        let t = p.to_time_domain();
        for m in [0usize, 5, 31, 63] {
            assert!((p.time_value(g.time(m)) - t.amp()[m]).norm() < 1e-12);
        }
        let s = p.time_samples(0.37, 0.01, 3000);
        assert!((s[2999] - p.time_value(0.37 + 29.99)).norm() < 1e-10);
    }

    #[test]
    fn delay_shifts_time_signal() {
        let g = Grid::fast();
        let p = gaussian_pulse(g, 2.0).unwrap();
        let d = p.delayed(3.0);
        assert!((d.time_value(4.0) - p.time_value(1.0)).norm() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parseval_random(coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
                let g = make_grid(64, 6.0).unwrap();
                let amp: Vec<C64> = coeffs.iter().map(|&(r, i)| C64::new(r, i)).collect();
                let p = Pulse::new(g, amp).unwrap();
                let t = p.to_time_domain();
                prop_assert!((t.norm_sq() - p.norm_sq()).abs() < 1e-10 * p.norm_sq().max(1.0));
                prop_assert!(t.to_momentum_domain().max_abs_diff(&p) < 1e-10);
            }

            #[test]
            fn conjugate_parity_transport(coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
                let g = make_grid(64, 6.0).unwrap();
                let raw = Pulse::new(g, coeffs.iter().map(|&(r, i)| C64::new(r, i)).collect()).unwrap();
                let sym_amp: Vec<C64> = (0..64)
                    .map(|j| (raw.amp()[j] + raw.amp()[g.mirror_index(j)].conj()) * 0.5)
                    .collect();
                let sym = Pulse::new(g, sym_amp).unwrap();
                prop_assert!(sym.to_time_domain().max_imag() < 1e-10);
            }
        }
    }
}
