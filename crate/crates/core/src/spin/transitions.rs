use serde::{Deserialize, Serialize};

use super::hamiltonian::{electron_op, spin_one};
use super::{Eigensystem, NvParameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// m_s = 0 → +1
    #[serde(rename = "0->+1")]
    Plus,
    /// m_s = 0 → −1
    #[serde(rename = "0->-1")]
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub frequency_ghz: f64,
    /// `2|⟨f|Sx|i⟩|²`, so an isolated NV line has amplitude 1.
    pub amplitude: f64,
    pub branch: Branch,
    pub occupancy: usize,
    pub initial_state: usize,
    pub final_state: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TransitionOptions {
    /// Minimum weight of the dominant m_s block for an eigenstate to be
    /// assigned to that manifold.
    pub min_purity: f64,
    /// Lines weaker than this are dropped.
    pub amplitude_floor: f64,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        TransitionOptions {
            min_purity: 0.9,
            amplitude_floor: 1e-12,
        }
    }
}

/// m_s value of each eigenstate from its dominant block; ties go to the
/// lower m_s.
fn label_states(eig: &Eigensystem, occupancy: usize, opts: &TransitionOptions) -> Result<Vec<i8>> {
    let nd = 1usize << occupancy;
    let n = eig.dim();
    if n != 3 * nd {
        return Err(Error::InvalidParameter(format!(
            "eigensystem dimension {n} does not match occupancy {occupancy}"
        )));
    }
    let mut labels = Vec::with_capacity(n);
    let mut ambiguous = Vec::new();
    for col in 0..n {
        // blocks ordered +1, 0, −1
        let w: Vec<f64> = (0..3)
            .map(|b| (0..nd).map(|r| eig.vectors[(b * nd + r, col)].norm_sqr()).sum())
            .collect();
        let mut best = 2; // −1
        for b in [1usize, 0] {
            if w[b] > w[best] {
                best = b;
            }
        }
        if w[best] < opts.min_purity {
            ambiguous.push(col);
        }
        labels.push([1i8, 0, -1][best]);
    }
    if !ambiguous.is_empty() {
        return Err(Error::AmbiguousBranch {
            states: ambiguous,
            threshold: opts.min_purity,
        });
    }
    for ms in [1i8, 0, -1] {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == ms).collect();
        if members.len() != nd {
            return Err(Error::AmbiguousBranch {
                states: members,
                threshold: opts.min_purity,
            });
        }
    }
    Ok(labels)
}

/// ESR lines from every m_s = 0 eigenstate to every m_s = ±1 eigenstate.
///
/// Amplitudes are per initial state (all m_s = 0 states weighted 1), so for
/// pure manifolds each branch sums to `2^k`.
pub fn transition_lines(
    eig: &Eigensystem,
    nv: &NvParameters,
    occupancy: usize,
    opts: &TransitionOptions,
) -> Result<Vec<TransitionLine>> {
    nv.validate()?;
    let labels = label_states(eig, occupancy, opts)?;
    let sx = electron_op(&spin_one()[0], occupancy);
    let sx_v = &sx * &eig.vectors;
    let n = eig.dim();
    let mut lines = Vec::new();
    for i in (0..n).filter(|&i| labels[i] == 0) {
        for f in (0..n).filter(|&f| labels[f] != 0) {
            let m = eig.vectors.column(f).dotc(&sx_v.column(i));
            let amplitude = 2.0 * m.norm_sqr();
            if amplitude <= opts.amplitude_floor {
                continue;
            }
            lines.push(TransitionLine {
                frequency_ghz: (eig.values[f] - eig.values[i]).abs(),
                amplitude,
                branch: if labels[f] == 1 { Branch::Plus } else { Branch::Minus },
                occupancy,
                initial_state: i,
                final_state: f,
            });
        }
    }
    lines.sort_by(|a, b| a.frequency_ghz.total_cmp(&b.frequency_ghz));
    Ok(lines)
}
