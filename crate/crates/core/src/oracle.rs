//! Cascaded virtual-cavity master equation for pulse-mode scattering.
//!
//! An upstream cavity `a_φ` with coupling `g_φ(t)` releases the input pulse,
//! the emitters scatter it, and a downstream cavity `a_ψ` with coupling
//! `g_ψ(t)` absorbs exactly the part that lands in the target mode `ψ`. The
//! reduced state of `a_ψ` after the pulse has passed gives the sorting
//! probabilities without going through the scattering matrices.
//!
//! Basis ordering is `|n_φ⟩ ⊗ |e₁ … e_N⟩ ⊗ |n_ψ⟩`, upstream first.

use alloc::vec::Vec;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::emitter::EmitterChain;
use crate::error::{Error, Result};
use crate::grid::Pulse;
use crate::scattering::apply_single_photon;

pub const DEFAULT_N_MAX: usize = 2;
pub const DEFAULT_DT: f64 = 1e-3;
/// `g_φ` is clamped to zero once the input norm still to be released drops below this.
pub const PHI_GUARD: f64 = 1e-8;
/// `g_ψ` stays zero until the accumulated target norm exceeds this.
pub const PSI_GUARD: f64 = 1e-10;
/// Trace drift beyond this aborts the integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-4;
const CHECK_EVERY: usize = 100;
const HERMITIAN_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;
/// Samples used to locate the quietest point of the periodic time window.
const START_SCAN: usize = 4000;
/// The start is centered in a window of `1/START_WINDOW_FRACTION` of the period.
const START_WINDOW_FRACTION: usize = 8;
const MAX_EMITTERS: usize = 2;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Virtual-cavity couplings at one instant:
/// `g_φ = φ̃*/√(1 − ∫|φ̃|²)` and `g_ψ = −ψ̃*/√(∫|ψ̃|²)`, both guarded at the
/// singular ends.
pub fn couplings(phi: C64, psi: C64, phi_integral: f64, psi_integral: f64) -> (C64, C64) {
    let remaining = 1.0 - phi_integral;
    let g_phi = if remaining > PHI_GUARD { phi.conj() / remaining.sqrt() } else { ZERO };
    let g_psi = if psi_integral > PSI_GUARD { -psi.conj() / psi_integral.sqrt() } else { ZERO };
    (g_phi, g_psi)
}

/// Couplings on the half-step grid `t₀ + m·h/2`, `m = 0..=2N`, as consumed by
/// RK4 with step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSchedule {
    step: f64,
    g_phi: Vec<C64>,
    g_psi: Vec<C64>,
    phi_integral: Vec<f64>,
    psi_integral: Vec<f64>,
}

fn cumulative(samples: &[C64], h_half: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in samples.windows(2) {
        acc += 0.5 * (w[0].norm_sqr() + w[1].norm_sqr()) * h_half;
        out.push(acc);
    }
    out
}

impl CouplingSchedule {
    /// From mode amplitudes sampled every `step / 2`; the running norms are
    /// trapezoid integrals on that grid.
    pub fn from_samples(phi: &[C64], psi: &[C64], step: f64) -> Result<Self> {
        if phi.len() != psi.len() {
            return Err(Error::LengthMismatch { expected: phi.len(), found: psi.len() });
        }
        if phi.len() < 3 || phi.len() % 2 == 0 {
            return Err(Error::InvalidParameter { name: "sample count", value: phi.len() as f64 });
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter { name: "step", value: step });
        }
        let phi_integral = cumulative(phi, 0.5 * step);
        let psi_integral = cumulative(psi, 0.5 * step);
        let (g_phi, g_psi) = phi
            .iter()
            .zip(psi)
            .zip(phi_integral.iter().zip(&psi_integral))
            .map(|((a, b), (ia, ib))| couplings(*a, *b, *ia, *ib))
            .unzip();
        Ok(CouplingSchedule { step, g_phi, g_psi, phi_integral, psi_integral })
    }

    /// Both cavities decoupled for `steps` steps.
    pub fn decoupled(steps: usize, step: f64) -> Result<Self> {
        let zeros = alloc::vec![ZERO; 2 * steps + 1];
        Self::from_samples(&zeros, &zeros, step)
    }

    pub fn steps(&self) -> usize {
        (self.g_phi.len() - 1) / 2
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn g_phi(&self) -> &[C64] {
        &self.g_phi
    }

    pub fn g_psi(&self) -> &[C64] {
        &self.g_psi
    }

    /// `∫₀ᵗ|φ̃|²` at each half-step sample.
    pub fn phi_integral(&self) -> &[f64] {
        &self.phi_integral
    }

    pub fn psi_integral(&self) -> &[f64] {
        &self.psi_integral
    }
}

/// Dense density matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    fn pure_basis_state(dim: usize, idx: usize) -> Self {
        let mut data = alloc::vec![ZERO; dim * dim];
        data[idx * dim + idx] = ONE;
        DensityMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim;
        let m = Mat::<C64>::from_fn(d, d, |r, c| (self.get(r, c) + self.get(c, r).conj()) * 0.5);
        let ev = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::NonFinite("density matrix eigenvalues"))?;
        Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Trace, Hermiticity and positivity within the integration tolerances.
    pub fn validate(&self, n_expected_trace: f64) -> Result<()> {
        let drift = (self.trace() - C64::new(n_expected_trace, 0.0)).norm();
        if !drift.is_finite() || drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift { drift });
        }
        let herm = self.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix { what: "hermiticity", value: herm });
        }
        let min = self.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix { what: "positivity", value: min });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Space {
    n_max: usize,
    emitters: usize,
    dim: usize,
}

impl Space {
    fn new(n_max: usize, emitters: usize) -> Self {
        Space { n_max, emitters, dim: (n_max + 1) * (1 << emitters) * (n_max + 1) }
    }

    fn index(&self, n_phi: usize, bits: usize, n_psi: usize) -> usize {
        (n_phi * (1 << self.emitters) + bits) * (self.n_max + 1) + n_psi
    }

    fn decode(&self, idx: usize) -> (usize, usize, usize) {
        let m = self.n_max + 1;
        let n_psi = idx % m;
        let rest = idx / m;
        (rest >> self.emitters, rest & ((1 << self.emitters) - 1), n_psi)
    }

    fn zeros(&self) -> Vec<C64> {
        alloc::vec![ZERO; self.dim * self.dim]
    }

    /// Operator from its action on basis states: `f(n_φ, bits, n_ψ)` returns
    /// the target state and amplitude.
    fn operator(&self, f: impl Fn(usize, usize, usize) -> Option<((usize, usize, usize), f64)>) -> Vec<C64> {
        let mut m = self.zeros();
        for idx in 0..self.dim {
            let (a, b, c) = self.decode(idx);
            if let Some(((x, y, z), v)) = f(a, b, c) {
                m[self.index(x, y, z) * self.dim + idx] = C64::new(v, 0.0);
            }
        }
        m
    }

    fn lower_phi(&self) -> Vec<C64> {
        self.operator(|a, b, c| (a > 0).then(|| ((a - 1, b, c), (a as f64).sqrt())))
    }

    fn lower_psi(&self) -> Vec<C64> {
        self.operator(|a, b, c| (c > 0).then(|| ((a, b, c - 1), (c as f64).sqrt())))
    }

    fn lower_emitter(&self, i: usize) -> Vec<C64> {
        let bit = 1 << i;
        self.operator(move |a, b, c| (b & bit != 0).then_some(((a, b & !bit, c), 1.0)))
    }

    /// Total excitation number of each basis state.
    fn excitations(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|idx| {
                let (a, b, c) = self.decode(idx);
                (a + b.count_ones() as usize + c) as f64
            })
            .collect()
    }
}

fn matmul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
    let mut out = alloc::vec![ZERO; d * d];
    for r in 0..d {
        for k in 0..d {
            let x = a[r * d + k];
            if x == ZERO {
                continue;
            }
            for c in 0..d {
                out[r * d + c] += x * b[k * d + c];
            }
        }
    }
    out
}

fn dagger(a: &[C64], d: usize) -> Vec<C64> {
    let mut out = alloc::vec![ZERO; d * d];
    for r in 0..d {
        for c in 0..d {
            out[c * d + r] = a[r * d + c].conj();
        }
    }
    out
}

fn add_scaled(acc: &mut [C64], a: &[C64], s: C64) {
    for (x, y) in acc.iter_mut().zip(a) {
        *x += y * s;
    }
}

/// Sparse operator as `(row, col, value)` triplets.
#[derive(Debug, Clone)]
struct Sparse {
    entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    fn from_dense(a: &[C64], d: usize) -> Self {
        let mut entries = Vec::new();
        for r in 0..d {
            for c in 0..d {
                let v = a[r * d + c];
                if v != ZERO {
                    entries.push((r, c, v));
                }
            }
        }
        Sparse { entries }
    }
}

/// Several sparse operators on one union pattern, combined per time step as
/// `Σ_t coeff_t X_t`.
#[derive(Debug, Clone)]
struct Merged {
    pos: Vec<(usize, usize)>,
    vals: Vec<Vec<C64>>,
}

impl Merged {
    fn new(terms: &[Vec<C64>], d: usize) -> Self {
        let mut pos = Vec::new();
        for r in 0..d {
            for c in 0..d {
                if terms.iter().any(|t| t[r * d + c] != ZERO) {
                    pos.push((r, c));
                }
            }
        }
        let vals = terms.iter().map(|t| pos.iter().map(|&(r, c)| t[r * d + c]).collect()).collect();
        Merged { pos, vals }
    }

    fn combine(&self, coeffs: &[C64], out: &mut Vec<C64>) {
        out.clear();
        out.resize(self.pos.len(), ZERO);
        for (vals, c) in self.vals.iter().zip(coeffs) {
            if *c == ZERO {
                continue;
            }
            for (o, v) in out.iter_mut().zip(vals) {
                *o += v * c;
            }
        }
    }
}

/// `out += L ρ L†` for `L` given by `pos`/`vals`; returns `Tr(L ρ L†)`.
fn add_sandwich(pos: &[(usize, usize)], vals: &[C64], rho: &[C64], out: &mut [C64], scratch: &mut [C64], d: usize) -> f64 {
    scratch.fill(ZERO);
    for (&(r, c), v) in pos.iter().zip(vals) {
        let (dst, src) = (r * d, c * d);
        for j in 0..d {
            scratch[dst + j] += v * rho[src + j];
        }
    }
    let mut trace = 0.0;
    for (&(b, c), v) in pos.iter().zip(vals) {
        let w = v.conj();
        for a in 0..d {
            out[a * d + b] += scratch[a * d + c] * w;
        }
        trace += (scratch[b * d + c] * w).re;
    }
    trace
}

/// The time-dependent Lindblad generator of the cascade.
struct Generator {
    d: usize,
    /// `H_eff = H − (i/2)Σ L†L` as six coupling-weighted terms.
    h_eff: Merged,
    /// `L₀ = g_φ* a_φ + Σ√Γᵢ σᵢ + g_ψ* a_ψ`.
    l0: Merged,
    /// Extra channels; `true` marks photon loss (counted in the flux).
    extra: Vec<(Sparse, bool)>,
    excitations: Vec<f64>,
}

struct Rates {
    h: Vec<C64>,
    l0: Vec<C64>,
}

impl Generator {
    fn new(chain: &EmitterChain, space: Space) -> Self {
        let d = space.dim;
        let a_phi = space.lower_phi();
        let a_psi = space.lower_psi();
        let sig: Vec<Vec<C64>> = (0..space.emitters).map(|i| space.lower_emitter(i)).collect();
        let dag = |m: &[C64]| dagger(m, d);
        let em = chain.emitters();
        let root: Vec<f64> = em.iter().map(|e| e.gamma.sqrt()).collect();

        let mut constant = space.zeros();
        let mut sig_dag_aphi = space.zeros();
        let mut apsi_dag_sig = space.zeros();
        for (i, e) in em.iter().enumerate() {
            let n_i = matmul(&dag(&sig[i]), &sig[i], d);
            // σ_ee is also the dephasing generator: σ_ee†σ_ee = σ_ee.
            add_scaled(&mut constant, &n_i, C64::new(e.delta, -0.5 * (e.gamma_total() + e.gamma_p)));
            for j in (i + 1)..em.len() {
                let x = matmul(&dag(&sig[j]), &sig[i], d);
                add_scaled(&mut constant, &x, C64::new(0.0, -root[i] * root[j]));
            }
            add_scaled(&mut sig_dag_aphi, &matmul(&dag(&sig[i]), &a_phi, d), C64::new(root[i], 0.0));
            add_scaled(&mut apsi_dag_sig, &matmul(&dag(&a_psi), &sig[i], d), C64::new(root[i], 0.0));
        }
        let terms = [
            constant,
            matmul(&dag(&a_phi), &a_phi, d),
            matmul(&dag(&a_psi), &a_psi, d),
            sig_dag_aphi,
            matmul(&dag(&a_psi), &a_phi, d),
            apsi_dag_sig,
        ];
        let mut collective = space.zeros();
        for (i, s) in sig.iter().enumerate() {
            add_scaled(&mut collective, s, C64::new(root[i], 0.0));
        }
        let l0 = Merged::new(&[collective, a_phi, a_psi], d);

        let mut extra = Vec::new();
        for (i, e) in em.iter().enumerate() {
            if e.beta < 1.0 {
                let rate = ((1.0 - e.beta) * e.gamma_total()).sqrt();
                let l: Vec<C64> = sig[i].iter().map(|v| v * rate).collect();
                extra.push((Sparse::from_dense(&l, d), true));
            }
            if e.gamma_p > 0.0 {
                let n_i = matmul(&dag(&sig[i]), &sig[i], d);
                let l: Vec<C64> = n_i.iter().map(|v| v * e.gamma_p.sqrt()).collect();
                extra.push((Sparse::from_dense(&l, d), false));
            }
        }
        Generator { d, h_eff: Merged::new(&terms, d), l0, extra, excitations: space.excitations() }
    }

    fn coefficients(g_phi: C64, g_psi: C64) -> ([C64; 6], [C64; 3]) {
        let gpc = g_phi.conj();
        (
            [
                ONE,
                C64::new(0.0, -0.5 * g_phi.norm_sqr()),
                C64::new(0.0, -0.5 * g_psi.norm_sqr()),
                -I * gpc,
                -I * g_psi * gpc,
                -I * g_psi,
            ],
            [ONE, gpc, g_psi.conj()],
        )
    }

    fn rates(&self, g_phi: C64, g_psi: C64, out: &mut Rates) {
        let (h, l) = Self::coefficients(g_phi, g_psi);
        self.h_eff.combine(&h, &mut out.h);
        self.l0.combine(&l, &mut out.l0);
    }

    /// `dρ/dt = −iH_eff ρ + iρH_eff† + L₀ρL₀† + Σ LρL†`; returns the emitted
    /// and lost photon fluxes.
    fn apply(&self, rates: &Rates, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) -> (f64, f64) {
        let d = self.d;
        scratch.fill(ZERO);
        for (&(r, c), v) in self.h_eff.pos.iter().zip(&rates.h) {
            let w = -I * v;
            let (dst, src) = (r * d, c * d);
            for j in 0..d {
                scratch[dst + j] += w * rho[src + j];
            }
        }
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] = scratch[r * d + c] + scratch[c * d + r].conj();
            }
        }
        let emitted = add_sandwich(&self.l0.pos, &rates.l0, rho, out, scratch, d);
        let mut lost = 0.0;
        for (l, is_loss) in &self.extra {
            let pos: Vec<(usize, usize)> = l.entries.iter().map(|&(r, c, _)| (r, c)).collect();
            let vals: Vec<C64> = l.entries.iter().map(|&(_, _, v)| v).collect();
            let t = add_sandwich(&pos, &vals, rho, out, scratch, d);
            if *is_loss {
                lost += t;
            }
        }
        (emitted, lost)
    }

    fn excitation(&self, rho: &[C64]) -> f64 {
        let d = self.d;
        self.excitations.iter().enumerate().map(|(i, n)| n * rho[i * d + i].re).sum()
    }
}

/// Final state and bookkeeping of one master-equation run.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub rho: DensityMatrix,
    pub n_photons: usize,
    /// Diagonal of the reduced downstream-cavity state, `P(n_ψ = m)`.
    pub psi_populations: Vec<f64>,
    /// Largest off-diagonal element of the reduced downstream-cavity state.
    pub psi_coherence: f64,
    /// `|Tr ρ − 1|` at the end.
    pub trace_drift: f64,
    /// Excitations left in cavities and emitters.
    pub final_excitation: f64,
    /// `∫⟨L₀†L₀⟩dt`.
    pub emitted: f64,
    /// `∫Σ⟨L_loss†L_loss⟩dt`.
    pub lost: f64,
    pub steps: usize,
}

impl OracleOutcome {
    /// `ρ₁₁` for one photon, `ρ₀₀` for two: the probability of correct sorting.
    pub fn fidelity(&self) -> f64 {
        match self.n_photons {
            1 => self.psi_populations[1],
            2 => self.psi_populations[0],
            _ => 1.0,
        }
    }

    /// `|final excitation + emitted + lost − n|`.
    pub fn photon_balance_defect(&self) -> f64 {
        (self.final_excitation + self.emitted + self.lost - self.n_photons as f64).abs()
    }
}

/// Center of the periodic stretch `[m − half, m + half]` with the least
/// total density. A sliding sum rather than the pointwise minimum, which
/// would pick a node of an oscillating tail.
fn quietest_start(density: &[f64], half: usize) -> usize {
    let n = density.len();
    let half = half.min((n - 1) / 2);
    let at = |i: isize| density[i.rem_euclid(n as isize) as usize];
    let h = half as isize;
    let mut w: f64 = (-h..=h).map(at).sum();
    let mut best = (0, w);
    for m in 1..n as isize {
        w += at(m + h) - at(m - h - 1);
        if w < best.1 {
            best = (m as usize, w);
        }
    }
    best.0
}

/// Emitter chain plus input and target modes for the cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSystem {
    pub chain: EmitterChain,
    pub phi: Pulse,
    pub psi: Pulse,
    pub n_max: usize,
    pub dt: f64,
    /// Start of the integration window.
    pub t_start: f64,
    /// Window length; one full period `2π/dk` of the grid by default.
    pub t_span: f64,
}

impl CascadeSystem {
    /// Both modes must be normalized and on one grid. The window starts in the
    /// middle of the quietest stretch of `|φ̃|² + |ψ̃|²`, so both pulses fit
    /// inside one period.
    pub fn new(chain: EmitterChain, phi: Pulse, psi: Pulse) -> Result<Self> {
        if chain.len() > MAX_EMITTERS {
            return Err(Error::Unsupported("the oracle handles at most two emitters"));
        }
        phi.require_normalized()?;
        psi.require_normalized()?;
        if phi.grid() != psi.grid() {
            return Err(Error::GridMismatch);
        }
        let period = phi.grid().time_extent();
        let h = period / START_SCAN as f64;
        let a = phi.time_samples(-0.5 * period, h, START_SCAN);
        let b = psi.time_samples(-0.5 * period, h, START_SCAN);
        let density: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.norm_sqr() + y.norm_sqr()).collect();
        let best = quietest_start(&density, START_SCAN / (2 * START_WINDOW_FRACTION));
        Ok(CascadeSystem {
            chain,
            phi,
            psi,
            n_max: DEFAULT_N_MAX,
            dt: DEFAULT_DT,
            t_start: -0.5 * period + best as f64 * h,
            t_span: period,
        })
    }

    /// Target mode from the scattering module: `ψ = Tφ/√N₁`.
    pub fn for_sorter(chain: EmitterChain, phi: Pulse) -> Result<Self> {
        let psi = apply_single_photon(&chain, &phi).normalize()?;
        Self::new(chain, phi, psi)
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_chain(&self, chain: EmitterChain) -> Self {
        CascadeSystem { chain, ..self.clone() }
    }

    pub fn steps(&self) -> usize {
        (self.t_span / self.dt).round().max(1.0) as usize
    }

    pub fn schedule(&self) -> Result<CouplingSchedule> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter { name: "dt", value: self.dt });
        }
        let steps = self.steps();
        let h = self.t_span / steps as f64;
        let count = 2 * steps + 1;
        let a = self.phi.time_samples(self.t_start, 0.5 * h, count);
        let b = self.psi.time_samples(self.t_start, 0.5 * h, count);
        CouplingSchedule::from_samples(&a, &b, h)
    }
}

/// Run the cascade for an input Fock state `|n⟩_φ` with emitters in the
/// ground state and an empty target cavity.
pub fn evolve(sys: &CascadeSystem, n_photons: usize) -> Result<OracleOutcome> {
    evolve_schedule(&sys.chain, &sys.schedule()?, n_photons, sys.n_max)
}

/// RK4 on the vectorized generator with an explicit coupling schedule.
pub fn evolve_schedule(
    chain: &EmitterChain,
    schedule: &CouplingSchedule,
    n_photons: usize,
    n_max: usize,
) -> Result<OracleOutcome> {
    if chain.len() > MAX_EMITTERS {
        return Err(Error::Unsupported("the oracle handles at most two emitters"));
    }
    if n_photons > n_max || n_max > DEFAULT_N_MAX {
        return Err(Error::Unsupported("photon number above the cavity cutoff of 2"));
    }
    let space = Space::new(n_max, chain.len());
    let d = space.dim;
    let gen = Generator::new(chain, space);
    let h = schedule.step;
    let steps = schedule.steps();

    let mut rho = DensityMatrix::pure_basis_state(d, space.index(n_photons, 0, 0)).data;
    let mut rates = [(); 3].map(|_| Rates { h: Vec::new(), l0: Vec::new() });
    let mut k = [(); 4].map(|_| space.zeros());
    let mut tmp = space.zeros();
    let mut scratch = space.zeros();
    let mut emitted = 0.0;
    let mut lost = 0.0;
    let mut prev_flux: Option<(f64, f64)> = None;

    for s in 0..steps {
        let m = 2 * s;
        for (q, r) in rates.iter_mut().enumerate() {
            gen.rates(schedule.g_phi[m + q], schedule.g_psi[m + q], r);
        }
        let flux = gen.apply(&rates[0], &rho, &mut k[0], &mut scratch);
        if let Some((e0, l0)) = prev_flux {
            emitted += 0.5 * (e0 + flux.0) * h;
            lost += 0.5 * (l0 + flux.1) * h;
        }
        prev_flux = Some(flux);
        for (stage, (weight, rate_idx)) in [(0.5, 1), (0.5, 1), (1.0, 2)].into_iter().enumerate() {
            for ((t, r), kk) in tmp.iter_mut().zip(&rho).zip(&k[stage]) {
                *t = r + kk * (weight * h);
            }
            let (_, rest) = k.split_at_mut(stage + 1);
            gen.apply(&rates[rate_idx], &tmp, &mut rest[0], &mut scratch);
        }
        for (j, r) in rho.iter_mut().enumerate() {
            *r += (k[0][j] + (k[1][j] + k[2][j]) * 2.0 + k[3][j]) * (h / 6.0);
        }
        if (s + 1) % CHECK_EVERY == 0 || s + 1 == steps {
            let dm = DensityMatrix { dim: d, data: rho.clone() };
            dm.validate(1.0)?;
        }
    }
    let mut last = Rates { h: Vec::new(), l0: Vec::new() };
    gen.rates(schedule.g_phi[2 * steps], schedule.g_psi[2 * steps], &mut last);
    let flux = gen.apply(&last, &rho, &mut tmp, &mut scratch);
    if let Some((e0, l0)) = prev_flux {
        emitted += 0.5 * (e0 + flux.0) * h;
        lost += 0.5 * (l0 + flux.1) * h;
    }

    let rho = DensityMatrix { dim: d, data: rho };
    let final_excitation = gen.excitation(&rho.data);
    let m = n_max + 1;
    let mut reduced = alloc::vec![ZERO; m * m];
    for idx in 0..d {
        let (a, b, c) = space.decode(idx);
        for c2 in 0..m {
            reduced[c * m + c2] += rho.get(idx, space.index(a, b, c2));
        }
    }
    let psi_populations = (0..m).map(|i| reduced[i * m + i].re).collect();
    let mut psi_coherence: f64 = 0.0;
    for r in 0..m {
        for c in 0..m {
            if r != c {
                psi_coherence = psi_coherence.max(reduced[r * m + c].norm());
            }
        }
    }
    Ok(OracleOutcome {
        trace_drift: (rho.trace() - ONE).norm(),
        rho,
        n_photons,
        psi_populations,
        psi_coherence,
        final_excitation,
        emitted,
        lost,
        steps,
    })
}

/// One row of a dephasing sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingPoint {
    pub gamma_p: f64,
    /// `ρ₁₁` for a single-photon input.
    pub f1: f64,
    /// `ρ₀₀` for a two-photon input.
    pub f2: f64,
}

/// Both sorting fidelities with every emitter dephased at `gamma_p`.
pub fn dephasing_point(sys: &CascadeSystem, gamma_p: f64) -> Result<DephasingPoint> {
    let s = sys.with_chain(sys.chain.with_dephasing(gamma_p)?);
    let f1 = evolve(&s, 1)?.fidelity();
    let f2 = evolve(&s, 2)?.fidelity();
    Ok(DephasingPoint { gamma_p, f1, f2 })
}

pub fn dephasing_sweep(sys: &CascadeSystem, gamma_ps: &[f64]) -> Result<Vec<DephasingPoint>> {
    gamma_ps.iter().map(|&g| dephasing_point(sys, g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::Emitter;
    use crate::grid::{lorentzian_pulse, Grid};
    use crate::modal::sorting_report;

    #[test]
    fn couplings_at_the_ends() {
        let phi = C64::new(0.3, -0.4);
        let (gp, gs) = couplings(phi, C64::new(1.0, 0.0), 0.0, 0.0);
        assert_eq!(gp, phi.conj());
        assert_eq!(gs, ZERO);
        let (gp, _) = couplings(phi, ZERO, 1.0 - 1e-9, 0.5);
        assert_eq!(gp, ZERO);
        let (_, gs) = couplings(ZERO, C64::new(0.5, 0.0), 0.0, 0.25);
        assert!((gs - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn square_pulse_coupling_matches_closed_form() {
        let t_len = 4.0;
        let steps = 4000;
        let h = t_len / steps as f64;
        let amp = C64::new(0.0, 1.0 / t_len.sqrt());
        let phi = alloc::vec![amp; 2 * steps + 1];
        let s = CouplingSchedule::from_samples(&phi, &phi, h).unwrap();
        for m in (0..2 * steps).step_by(97) {
            let t = 0.5 * h * m as f64;
            if t > t_len - 0.1 {
                break;
            }
            let exact = amp.conj() / (1.0 - t / t_len).sqrt();
            assert!((s.g_phi()[m] - exact).norm() < 1e-8, "t = {t}");
        }
        assert_eq!(s.g_phi()[2 * steps], ZERO);
    }

    #[test]
    fn schedule_rejects_bad_shapes() {
        let a = alloc::vec![ZERO; 4];
        assert!(CouplingSchedule::from_samples(&a, &a, 0.1).is_err());
        let b = alloc::vec![ZERO; 5];
        assert!(CouplingSchedule::from_samples(&b, &a[..3], 0.1).is_err());
        assert!(CouplingSchedule::from_samples(&b, &b, 0.0).is_err());
    }

    #[test]
    fn vacuum_is_dark() {
        let chain = EmitterChain::identical(2).unwrap();
        let sched = CouplingSchedule::decoupled(500, 0.01).unwrap();
        let out = evolve_schedule(&chain, &sched, 0, 2).unwrap();
        let start = DensityMatrix::pure_basis_state(out.rho.dim(), 0);
        let diff = out.rho.data().iter().zip(start.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        assert_eq!(out.rho.dim(), 36);
    }

    #[test]
    fn unsupported_configurations() {
        let sched = CouplingSchedule::decoupled(2, 0.01).unwrap();
        let chain = EmitterChain::identical(3).unwrap();
        assert!(matches!(evolve_schedule(&chain, &sched, 1, 2), Err(Error::Unsupported(_))));
        let chain = EmitterChain::identical(1).unwrap();
        assert!(evolve_schedule(&chain, &sched, 3, 2).is_err());
    }

    fn lorentzian_system(chain: EmitterChain) -> CascadeSystem {
        let g = Grid::new(256, 16.0).unwrap();
        let phi = lorentzian_pulse(g, 0.5).unwrap();
        CascadeSystem::for_sorter(chain, phi).unwrap().with_dt(4e-3)
    }

    #[test]
    fn single_photon_lands_in_target_mode() {
        let sys = lorentzian_system(EmitterChain::identical(1).unwrap());
        let out = evolve(&sys, 1).unwrap();
        assert!((out.fidelity() - 1.0).abs() < 1e-4, "F1 = {}", out.fidelity());
        assert!(out.photon_balance_defect() < 1e-4);
        assert!(out.psi_coherence < 1e-8);
    }

    #[test]
    fn two_photons_match_scattering_kernel() {
        for chain in [
            EmitterChain::identical(1).unwrap(),
            EmitterChain::new(alloc::vec![Emitter::new(1.0, 0.3, 1.0, 0.0).unwrap()]).unwrap(),
        ] {
            let sys = lorentzian_system(chain.clone());
            let out = evolve(&sys, 2).unwrap();
            let r = sorting_report(&chain, &sys.phi).unwrap();
            assert!((out.psi_populations[1] - r.c1 * r.c1).abs() < 1e-4, "{:?} vs {}", out.psi_populations, r.c1 * r.c1);
            assert!((out.psi_populations[2] - r.c2.norm_sqr()).abs() < 1e-4);
            assert!(out.photon_balance_defect() < 1e-4);
            assert!(out.psi_coherence < 1e-8);
        }
    }

    #[test]
    fn window_start_skips_isolated_nodes() {
        // a node inside a busy stretch next to the pulse, and a quiet stretch
        let mut d = alloc::vec![1e-8; 400];
        for (i, v) in d.iter_mut().enumerate().take(260).skip(100) {
            *v = 1e-4;
            if i == 180 {
                *v = 0.0;
            }
        }
        for v in d.iter_mut().take(220).skip(200) {
            *v = 1.0;
        }
        let m = quietest_start(&d, 25);
        assert!(!(75..=285).contains(&m), "start {m} overlaps the busy stretch");
        // the pointwise minimum would have been the node
        assert_eq!(d.iter().cloned().enumerate().fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b }).0, 180);
        assert_eq!(quietest_start(&[3.0, 1.0, 2.0], 0), 1);
    }

    #[test]
    fn loss_is_accounted() {
        let chain = EmitterChain::identical(1).unwrap().with_beta(0.8).unwrap();
        let sys = lorentzian_system(chain.clone());
        let out = evolve(&sys, 1).unwrap();
        assert!(out.lost > 0.05);
        assert!(out.photon_balance_defect() < 1e-4);
        let n1 = apply_single_photon(&chain, &sys.phi).norm_sq();
        assert!((out.fidelity() - n1).abs() < 1e-4);
    }

    #[test]
    fn dephasing_reduces_fidelity() {
        let sys = lorentzian_system(EmitterChain::identical(1).unwrap());
        let rows = dephasing_sweep(&sys, &[0.0, 0.1]).unwrap();
        assert!(rows[1].f1 < rows[0].f1);
    }
}
