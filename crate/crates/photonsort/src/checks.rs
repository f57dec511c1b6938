//! Self-checks behind `photonsort validate`: unitarity under grid doubling,
//! finite-difference gradients and the master-equation cross-check.

use num_complex::Complex64 as C64;
use photonsort_core::grid::lorentzian_pulse;
use photonsort_core::modal::sorting_report;
use photonsort_core::objective::{fd_check_strided, ObjectiveKind};
use photonsort_core::oracle::{evolve, CascadeSystem};
use photonsort_core::scattering::apply_two_photon_chain;
use photonsort_core::{EmitterChain, Grid, Pulse, TwoPhotonState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::AppResult;

pub const UNITARITY_TOL: f64 = 1e-5;
pub const FD_TOL_PLAIN: f64 = 1e-5;
pub const FD_TOL_LOSSY: f64 = 1e-4;
pub const FD_EPS: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value < limit }
    }
}

/// Smooth random packet parameters: center, width, delay, chirp.
#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub center: f64,
    pub width: f64,
    pub delay: f64,
    pub chirp: f64,
}

impl Packet {
    pub fn random(rng: &mut impl Rng) -> Self {
        Packet {
            center: rng.random_range(-1.5..1.5),
            width: rng.random_range(0.5..2.5),
            delay: rng.random_range(-3.0..3.0),
            chirp: rng.random_range(-0.5..0.5),
        }
    }

    pub fn on(&self, g: Grid) -> Pulse {
        let Packet { center, width, delay, chirp } = *self;
        Pulse::from_fn(g, |k| {
            let x = k - center;
            C64::from_polar((-x * x / (2.0 * width * width)).exp(), k * delay + chirp * x * x)
        })
        .normalize()
        .expect("packet is inside the grid")
    }
}

/// `Σᵢ wᵢ sym(aᵢ, bᵢ)` with 1 to 3 random terms, so the same state can be
/// rebuilt on any grid.
#[derive(Debug, Clone)]
pub struct RandomPairState {
    terms: Vec<(C64, Packet, Packet)>,
}

impl RandomPairState {
    pub fn random(rng: &mut impl Rng) -> Self {
        let count = rng.random_range(1..=3);
        let terms = (0..count)
            .map(|_| {
                let w = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (w, Packet::random(rng), Packet::random(rng))
            })
            .collect();
        RandomPairState { terms }
    }

    pub fn on(&self, g: Grid) -> TwoPhotonState {
        let mut s = TwoPhotonState::zeros(g);
        for (w, a, b) in &self.terms {
            let t = TwoPhotonState::symmetric_product(&a.on(g), &b.on(g)).expect("same grid");
            s = s.axpy(*w, &t).expect("same grid");
        }
        let n = s.norm();
        s.scaled(C64::new(1.0 / n, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitarityOutcome {
    pub states: usize,
    /// Largest `|‖SΨ‖/‖Ψ‖ − 1|` on the base grid.
    pub max_deviation: f64,
    /// Same on the doubled grid.
    pub max_deviation_doubled: f64,
    /// Largest ratio doubled / base over states.
    pub worst_shrink: f64,
}

/// Lossless 1- and 2-emitter chains on random symmetric pair states.
pub fn unitarity(grid: Grid, states: usize, seed: u64) -> AppResult<UnitarityOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<RandomPairState> = (0..states).map(|_| RandomPairState::random(&mut rng)).collect();
    let chains = [EmitterChain::identical(1)?, EmitterChain::identical(2)?];
    let doubled = grid.doubled();
    let rows = inputs
        .par_iter()
        .flat_map_iter(|s| chains.iter().map(move |c| (s, c)))
        .map(|(s, c)| -> AppResult<(f64, f64)> {
            let dev = |g: Grid| -> AppResult<f64> {
                let input = s.on(g);
                Ok((apply_two_photon_chain(c, &input)?.norm() / input.norm() - 1.0).abs())
            };
            Ok((dev(grid)?, dev(doubled)?))
        })
        .collect::<AppResult<Vec<_>>>()?;
    let max_deviation = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_deviation_doubled = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let worst_shrink = rows.iter().map(|r| if r.0 > 0.0 { r.1 / r.0 } else { 0.0 }).fold(0.0, f64::max);
    Ok(UnitarityOutcome { states, max_deviation, max_deviation_doubled, worst_shrink })
}

pub fn unitarity_checks(u: &UnitarityOutcome) -> Vec<Check> {
    vec![
        Check::below("unitarity: norm deviation", u.max_deviation, UNITARITY_TOL),
        Check {
            name: "unitarity: deviation halves on doubling".into(),
            value: u.worst_shrink,
            limit: 0.5,
            passed: u.worst_shrink <= 0.5,
        },
    ]
}

/// Worst relative finite-difference error per objective on random pulses.
/// The lossless chain is checked with the plain error, the lossy one with
/// all three objectives.
pub fn gradients(grid: Grid, pulses: usize, stride: usize, seed: u64) -> AppResult<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let ps: Vec<Pulse> = (0..pulses).map(|_| Packet::random(&mut rng).on(grid)).collect();
    let lossless = EmitterChain::identical(2)?;
    let lossy = lossless.with_beta(0.9)?;
    let cases = [
        ("gradient: plain", &lossless, ObjectiveKind::Plain, FD_TOL_PLAIN),
        ("gradient: lossy plain", &lossy, ObjectiveKind::Plain, FD_TOL_LOSSY),
        ("gradient: lossy total", &lossy, ObjectiveKind::TotalMinusSurvival, FD_TOL_LOSSY),
        ("gradient: lossy conditional", &lossy, ObjectiveKind::Conditional, FD_TOL_LOSSY),
    ];
    cases
        .par_iter()
        .map(|(name, chain, kind, tol)| {
            let worst = ps
                .iter()
                .map(|p| fd_check_strided(chain, p, *kind, FD_EPS, stride))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok(Check::below(*name, worst, *tol))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub oracle_f1: f64,
    pub kernel_n1: f64,
    pub oracle_c1_sq: f64,
    pub kernel_c1_sq: f64,
    pub oracle_c2_sq: f64,
    pub kernel_c2_sq: f64,
    pub balance_defect: f64,
}

impl OracleComparison {
    pub fn worst_gap(&self) -> f64 {
        [
            self.oracle_f1 - self.kernel_n1,
            self.oracle_c1_sq - self.kernel_c1_sq,
            self.oracle_c2_sq - self.kernel_c2_sq,
        ]
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
    }
}

/// Master equation against the scattering kernel for one pulse.
pub fn oracle_comparison(chain: &EmitterChain, phi: &Pulse, dt: f64) -> AppResult<OracleComparison> {
    let sys = CascadeSystem::for_sorter(chain.clone(), phi.clone())?.with_dt(dt);
    let (one, two) = rayon::join(|| evolve(&sys, 1), || evolve(&sys, 2));
    let (one, two) = (one?, two?);
    let r = sorting_report(chain, phi)?;
    Ok(OracleComparison {
        oracle_f1: one.fidelity(),
        kernel_n1: r.n1,
        oracle_c1_sq: two.psi_populations[1],
        kernel_c1_sq: r.c1 * r.c1,
        oracle_c2_sq: two.psi_populations[2],
        kernel_c2_sq: r.c2.norm_sqr(),
        balance_defect: one.photon_balance_defect().max(two.photon_balance_defect()),
    })
}

/// Lorentzian `σ = 0.5` through one and (unless `fast`) two emitters.
pub fn oracle_checks(fast: bool) -> AppResult<(Vec<Check>, Vec<OracleComparison>)> {
    let g = Grid::new(256, 16.0)?;
    let phi = lorentzian_pulse(g, 0.5)?;
    let counts: &[usize] = if fast { &[1] } else { &[1, 2] };
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &ne in counts {
        let c = oracle_comparison(&EmitterChain::identical(ne)?, &phi, 4e-3)?;
        checks.push(Check::below(format!("oracle: {ne} emitter(s) vs kernel"), c.worst_gap(), ORACLE_TOL));
        checks.push(Check::below(format!("oracle: {ne} emitter(s) photon balance"), c.balance_defect, ORACLE_TOL));
        rows.push(c);
    }
    Ok((checks, rows))
}
