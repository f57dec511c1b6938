//! Success table of the two-photon Bell-state analyzer built from two
//! sorters: the polarization-parallel states only need single-photon
//! routing, the antiparallel ones succeed with the sorting fidelity `F`.

use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus];

    pub fn label(self) -> &'static str {
        match self {
            BellState::PhiPlus => "Phi+",
            BellState::PhiMinus => "Phi-",
            BellState::PsiPlus => "Psi+",
            BellState::PsiMinus => "Psi-",
        }
    }

    /// Detector sets, any one of which heralds this state.
    pub fn clicks(self) -> &'static [&'static [u8]] {
        match self {
            BellState::PhiPlus => &[&[1, 2], &[3, 4]],
            BellState::PhiMinus => &[&[1, 4], &[2, 3]],
            BellState::PsiPlus => &[&[5, 6], &[7, 8]],
            BellState::PsiMinus => &[&[5], &[6], &[7], &[8]],
        }
    }

    /// Whether success relies on a photon sorter.
    pub fn needs_sorting(self) -> bool {
        matches!(self, BellState::PsiPlus | BellState::PsiMinus)
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellRow {
    pub input: BellState,
    pub clicks: &'static [&'static [u8]],
    pub probability: f64,
}

impl BellRow {
    /// Click sets rendered as `{D1,D2} | {D3,D4}`.
    pub fn clicks_label(&self) -> alloc::string::String {
        use alloc::string::String;
        use core::fmt::Write;
        let mut s = String::new();
        for (i, set) in self.clicks.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            s.push('{');
            for (j, d) in set.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "D{d}");
            }
            s.push('}');
        }
        s
    }
}

pub fn bell_table(fidelity: f64) -> Result<[BellRow; 4]> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::FidelityOutOfRange(fidelity));
    }
    Ok(BellState::ALL.map(|input| BellRow {
        input,
        clicks: input.clicks(),
        probability: if input.needs_sorting() { fidelity } else { 1.0 },
    }))
}
