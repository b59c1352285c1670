use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{FirstShellConfig, NvParameters, FIRST_SHELL_SITES};
use crate::error::{Error, Result};

const MHZ_TO_GHZ: f64 = 1e-3;

/// Product-basis label: electron `m_s` and twice each nuclear `m_I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisLabel {
    pub ms: i8,
    pub nuclear_twice_mi: Vec<i8>,
}

/// Hamiltonian in the `|m_s⟩ ⊗ |m_I1⟩ ⊗ … ⊗ |m_Ik⟩` product basis (GHz).
///
/// Index layout: `ms_index * 2^k + nuclear_index`, with `m_s` ordered
/// `[+1, 0, −1]` and each nucleus ordered `[+½, −½]`, first site most
/// significant.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<Complex64>,
    pub occupancy: usize,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nuclear_dim(&self) -> usize {
        1 << self.occupancy
    }

    pub fn label(&self, index: usize) -> BasisLabel {
        let nd = self.nuclear_dim();
        let ms = [1, 0, -1][index / nd];
        let nuc = index % nd;
        let nuclear_twice_mi = (0..self.occupancy)
            .map(|j| {
                let bit = (nuc >> (self.occupancy - 1 - j)) & 1;
                if bit == 0 { 1 } else { -1 }
            })
            .collect();
        BasisLabel { ms, nuclear_twice_mi }
    }

    pub fn labels(&self) -> Vec<BasisLabel> {
        (0..self.dim()).map(|i| self.label(i)).collect()
    }

    pub fn max_hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }
}

pub(crate) fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Spin operators `[Sx, Sy, Sz]` for spin 1 (basis +1, 0, −1).
pub(crate) fn spin_one() -> [DMatrix<Complex64>; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, r);
    let z = Complex64::new(0.0, 0.0);
    let sx = DMatrix::from_row_slice(3, 3, &[z, c(r), z, c(r), z, c(r), z, c(r), z]);
    let sy = DMatrix::from_row_slice(3, 3, &[z, -i, z, i, z, -i, z, i, z]);
    let sz = DMatrix::from_row_slice(3, 3, &[c(1.0), z, z, z, z, z, z, z, c(-1.0)]);
    [sx, sy, sz]
}

/// Spin operators `[Ix, Iy, Iz]` for spin ½ (basis +½, −½).
pub(crate) fn spin_half() -> [DMatrix<Complex64>; 3] {
    let z = Complex64::new(0.0, 0.0);
    let h = Complex64::new(0.0, 0.5);
    let ix = DMatrix::from_row_slice(2, 2, &[z, c(0.5), c(0.5), z]);
    let iy = DMatrix::from_row_slice(2, 2, &[z, -h, h, z]);
    let iz = DMatrix::from_row_slice(2, 2, &[c(0.5), z, z, c(-0.5)]);
    [ix, iy, iz]
}

fn identity(n: usize) -> DMatrix<Complex64> {
    DMatrix::identity(n, n)
}

/// Electron operator embedded in the full space.
pub(crate) fn electron_op(op: &DMatrix<Complex64>, k: usize) -> DMatrix<Complex64> {
    op.kronecker(&identity(1 << k))
}

/// Nuclear operator on site `j` of `k`, embedded in the full space.
fn nuclear_op(op: &DMatrix<Complex64>, j: usize, k: usize) -> DMatrix<Complex64> {
    identity(3 << j)
        .kronecker(op)
        .kronecker(&identity(1 << (k - j - 1)))
}

/// Full (non-secular) ground-state Hamiltonian
/// `D Sz² + γe B·S + Σ_j (S·A_j·I_j − γn B·I_j)` in GHz.
pub fn build_hamiltonian(nv: &NvParameters, shell: &FirstShellConfig) -> Result<HamiltonianMatrix> {
    nv.validate()?;
    let k = shell.occupancy();
    if k > FIRST_SHELL_SITES {
        return Err(Error::Capacity(k));
    }
    let dim = 3 << k;
    let s = spin_one();
    let (bx, bz) = (nv.theta_rad.sin(), nv.theta_rad.cos());

    let sz = electron_op(&s[2], k);
    let sx = electron_op(&s[0], k);
    let mut h = &sz * &sz * c(nv.zero_field_splitting_ghz);
    let ez = nv.gamma_e_ghz_per_t * nv.field_t;
    h += sz.clone() * c(ez * bz) + sx.clone() * c(ez * bx);

    let electron_ops = [sx, electron_op(&s[1], k), sz];
    let half = spin_half();
    let nz = nv.gamma_n_mhz_per_t * nv.field_t * MHZ_TO_GHZ;
    for (j, tensor) in shell.sites().iter().enumerate() {
        let nuc: Vec<_> = half.iter().map(|op| nuclear_op(op, j, k)).collect();
        let a = tensor.matrix();
        for (p, ep) in electron_ops.iter().enumerate() {
            for (q, nq) in nuc.iter().enumerate() {
                let apq = a[(p, q)];
                if apq != 0.0 {
                    h += ep * nq * c(apq * MHZ_TO_GHZ);
                }
            }
        }
        h -= &nuc[2] * c(nz * bz) + &nuc[0] * c(nz * bx);
    }

    // Remove rounding-level anti-Hermitian residue.
    let adj = h.adjoint();
    let h = (h + adj) * c(0.5);
    debug_assert_eq!(h.nrows(), dim);
    Ok(HamiltonianMatrix {
        matrix: h,
        occupancy: k,
    })
}
