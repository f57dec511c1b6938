//! Takagi factorization `Ψ(k₁,k₂) = Σ_n a_n f_n(k₁) f_n(k₂)` of a bosonic
//! two-photon amplitude.

use alloc::vec::Vec;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::Pulse;
use crate::state::TwoPhotonState;

/// Eigenvalues sorted by `|a_n|` (descending) and orthonormal modes `f_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TakagiDecomposition {
    eigenvalues: Vec<C64>,
    modes: Vec<Pulse>,
}

impl TakagiDecomposition {
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[Pulse] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `|a_n|²` in descending order.
    pub fn populations(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn leading(&self) -> (C64, &Pulse) {
        (self.eigenvalues[0], &self.modes[0])
    }

    /// `Σ_n a_n f_n ⊗ f_n`.
    pub fn reconstruct(&self) -> TwoPhotonState {
        let grid = *self.modes[0].grid();
        let n = grid.n();
        let mut amp = alloc::vec![C64::new(0.0, 0.0); n * n];
        for (a, f) in self.eigenvalues.iter().zip(&self.modes) {
            if a.norm() == 0.0 {
                continue;
            }
            let fa = f.amp();
            for i in 0..n {
                let w = a * fa[i];
                for (o, fj) in amp[i * n..(i + 1) * n].iter_mut().zip(fa) {
                    *o += w * fj;
                }
            }
        }
        TwoPhotonState::new(grid, amp).expect("shape")
    }
}

/// Singular values closer than this (relative to the largest) form a block.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Mixing weight used to split the commuting real and imaginary parts of a
/// degenerate block; any value avoiding accidental collisions works.
const BLOCK_MIX: f64 = 0.618_033_988_749_894_8;

fn weighted_matrix(s: &TwoPhotonState) -> Mat<C64> {
    let n = s.n();
    let dk = s.grid().dk();
    let amp = s.amp();
    // Average with the transpose to remove rounding-level asymmetry.
    Mat::from_fn(n, n, |i, j| (amp[i * n + j] + amp[j * n + i]) * (0.5 * dk))
}

fn matvec(a: &Mat<C64>, x: &[C64]) -> Vec<C64> {
    let n = a.nrows();
    let mut out = alloc::vec![C64::new(0.0, 0.0); n];
    for (j, xj) in x.iter().enumerate() {
        let col = a.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * xj;
        }
    }
    out
}

fn dotc(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn vnorm(u: &[C64]) -> f64 {
    u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `u† A ū` for a column `u`.
fn takagi_value(a: &Mat<C64>, u: &[C64]) -> C64 {
    let ubar: Vec<C64> = u.iter().map(|x| x.conj()).collect();
    dotc(u, &matvec(a, &ubar))
}

fn to_pulse(s: &TwoPhotonState, u: &[C64]) -> Pulse {
    let scale = 1.0 / s.grid().dk().sqrt();
    Pulse::new(*s.grid(), u.iter().map(|x| x * scale).collect()).expect("length")
}

/// Full Takagi factorization via SVD of `Ψ·dk`.
///
/// For a nondegenerate singular value the left vector `u` already satisfies
/// `A ū = a u` with `|a| = σ`. Inside a degenerate block `U_b` the matrix
/// `Q = U_b† A Ū_b` is σ times a symmetric unitary, whose real and imaginary
/// parts commute; one real orthogonal rotation diagonalizes both.
pub fn takagi(s: &TwoPhotonState) -> Result<TakagiDecomposition> {
    s.require_symmetric()?;
    let a = weighted_matrix(s);
    let n = a.nrows();
    let svd = a.svd().map_err(|_| Error::NonFinite("takagi svd"))?;
    let u = svd.U();
    let sigma: Vec<f64> = (0..n).map(|i| svd.S()[i].re).collect();
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("takagi svd"));
    }
    let column = |c: usize| -> Vec<C64> { (0..n).map(|i| u[(i, c)]).collect() };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).unwrap().then(x.cmp(&y)));
    let smax = sigma[order[0]];
    let gap = DEGENERACY_GAP * smax.max(f64::MIN_POSITIVE);
    let negligible = 1e-13 * smax;

    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (sigma[order[end - 1]] - sigma[order[end]]).abs() < gap {
            end += 1;
        }
        let block: Vec<Vec<C64>> = order[start..end].iter().map(|&c| column(c)).collect();
        if block.len() == 1 || sigma[order[start]] <= negligible {
            for col in block {
                values.push(takagi_value(&a, &col));
                columns.push(col);
            }
        } else {
            let m = block.len();
            let images: Vec<Vec<C64>> = block
                .iter()
                .map(|b| matvec(&a, &b.iter().map(|x| x.conj()).collect::<Vec<_>>()))
                .collect();
            let q = Mat::<C64>::from_fn(m, m, |i, j| dotc(&block[i], &images[j]));
            let mix = Mat::<f64>::from_fn(m, m, |i, j| {
                let v = (q[(i, j)] + q[(j, i)]) * 0.5;
                v.re + BLOCK_MIX * v.im
            });
            let eig = mix.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NonFinite("takagi block"))?;
            let o = eig.U();
            for c in 0..m {
                let mut col = alloc::vec![C64::new(0.0, 0.0); n];
                for (r, b) in block.iter().enumerate() {
                    let w = o[(r, c)];
                    for (x, y) in col.iter_mut().zip(b) {
                        *x += y * w;
                    }
                }
                values.push(takagi_value(&a, &col));
                columns.push(col);
            }
        }
        start = end;
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| values[y].norm().partial_cmp(&values[x].norm()).unwrap().then(x.cmp(&y)));
    Ok(TakagiDecomposition {
        eigenvalues: idx.iter().map(|&i| values[i]).collect(),
        modes: idx.iter().map(|&i| to_pulse(s, &columns[i])).collect(),
    })
}

/// Leading Takagi pair `(a₁, f₁)` by power iteration on `A A† = A Ā`;
/// cheaper than a full factorization when only the most populated mode is
/// needed.
pub fn leading_mode(s: &TwoPhotonState) -> Result<(C64, Pulse)> {
    s.require_symmetric()?;
    let a = weighted_matrix(s);
    let n = a.nrows();
    // Start from the column of largest norm.
    let start = (0..n)
        .max_by(|&x, &y| a.col(x).norm_l2().partial_cmp(&a.col(y).norm_l2()).unwrap())
        .unwrap_or(0);
    let mut v: Vec<C64> = (0..n).map(|i| a[(i, start)]).collect();
    let norm = vnorm(&v);
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    let step = |v: &[C64]| -> (Vec<C64>, f64) {
        let x = matvec(&a, &v.iter().map(|z| z.conj()).collect::<Vec<_>>());
        let mut w = matvec(&a, &x.iter().map(|z| z.conj()).collect::<Vec<_>>());
        let lambda = vnorm(&w);
        w.iter_mut().for_each(|x| *x /= lambda);
        (w, lambda)
    };
    let mut last = 0.0;
    let mut settled = 0;
    for _ in 0..5000 {
        let (w, lambda) = step(&v);
        if !lambda.is_finite() {
            return Err(Error::NonFinite("takagi power iteration"));
        }
        v = w;
        // Keep iterating a while after the eigenvalue settles so the vector converges too.
        if (lambda - last).abs() <= 1e-15 * lambda {
            settled += 1;
            if settled > 20 {
                break;
            }
        } else {
            settled = 0;
        }
        last = lambda;
    }
    Ok((takagi_value(&a, &v), to_pulse(s, &v)))
}
