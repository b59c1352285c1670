//! Fixtures and independent oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use nvdnp::signal::{DatasetStore, FidRecord};
use nvdnp::spin::{
    build_hamiltonian, eigendecompose, transition_lines, Branch, FirstShellConfig, HyperfineTensor, NvParameters,
    TransitionLine, TransitionOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn lines_for(nv: &NvParameters, tensors: &[HyperfineTensor]) -> Vec<TransitionLine> {
    let shell = FirstShellConfig::new(tensors.to_vec()).unwrap();
    let h = build_hamiltonian(nv, &shell).unwrap();
    let e = eigendecompose(&h.matrix).unwrap();
    transition_lines(&e, nv, shell.occupancy(), &TransitionOptions::default()).unwrap()
}

pub fn plus(lines: &[TransitionLine]) -> Vec<TransitionLine> {
    lines.iter().copied().filter(|l| l.branch == Branch::Plus).collect()
}

/// First-order oracle for the 0 → +1 branch at theta = 0: each nucleus sees
/// an effective field `m_s·(A_zx, A_zy, A_zz) − γnB ẑ` in manifold `m_s`.
/// Returns `(frequency GHz, amplitude)`.
pub fn perturbative_plus_lines(nv: &NvParameters, tensors: &[HyperfineTensor]) -> Vec<(f64, f64)> {
    // Eigenpairs of v·I for a spin ½: energies ±|v|/2 with spinor eigenvectors.
    fn spin_half_states(v: Vector3<f64>) -> [(f64, [Complex64; 2]); 2] {
        let r = v.norm();
        let (theta, phi) = if r == 0.0 {
            (0.0, 0.0)
        } else {
            ((v.z / r).clamp(-1.0, 1.0).acos(), v.y.atan2(v.x))
        };
        let up = [
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        ];
        let down = [
            Complex64::new(-(theta / 2.0).sin(), 0.0),
            Complex64::from_polar((theta / 2.0).cos(), phi),
        ];
        [(0.5 * r, up), (-0.5 * r, down)]
    }
    let gn_b = nv.gamma_n_mhz_per_t * nv.field_t;
    let per_nucleus: Vec<Vec<(f64, f64)>> = tensors
        .iter()
        .map(|t| {
            let a = t.matrix();
            let row = Vector3::new(a[(2, 0)], a[(2, 1)], a[(2, 2)]);
            let zeeman = Vector3::new(0.0, 0.0, -gn_b);
            let s0 = spin_half_states(zeeman);
            let s1 = spin_half_states(row + zeeman);
            let mut out = Vec::new();
            for (e0, v0) in &s0 {
                for (e1, v1) in &s1 {
                    let ov = v1[0].conj() * v0[0] + v1[1].conj() * v0[1];
                    out.push(((e1 - e0) * 1e-3, ov.norm_sqr()));
                }
            }
            out
        })
        .collect();
    let base = nv.aligned_transitions_ghz().0;
    let mut acc = vec![(base, 1.0)];
    for options in per_nucleus {
        acc = acc
            .iter()
            .flat_map(|&(f, a)| options.iter().map(move |&(df, w)| (f + df, a * w)))
            .collect();
    }
    acc.sort_by(|a, b| a.0.total_cmp(&b.0));
    acc
}

/// Largest distance from each strong oracle line to the nearest strong exact
/// line, relative to the oracle's total splitting.
pub fn worst_relative_offset(exact: &[TransitionLine], oracle: &[(f64, f64)], min_amp: f64) -> f64 {
    let strong: Vec<f64> = exact
        .iter()
        .filter(|l| l.amplitude > min_amp)
        .map(|l| l.frequency_ghz)
        .collect();
    let o: Vec<f64> = oracle.iter().filter(|l| l.1 > min_amp).map(|l| l.0).collect();
    let splitting = o.last().unwrap() - o.first().unwrap();
    o.iter()
        .map(|f| strong.iter().map(|g| (f - g).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        / splitting
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = &a + a.adjoint();
    h * Complex64::new(0.5, 0.0)
}

pub fn biexp_grid(t2_long: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 3.0 * t2_long * i as f64 / (n - 1) as f64).collect()
}

pub fn biexp_values(t: &[f64], a1: f64, t1: f64, a2: f64, t2: f64) -> Vec<f64> {
    t.iter().map(|x| a1 * (-x / t1).exp() + a2 * (-x / t2).exp()).collect()
}

pub fn gaussian_store(n: usize, sigma0: f64, seed: u64) -> DatasetStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma0).unwrap();
    let blocks = (0..n)
        .map(|_| {
            let a = 1.0 + noise.sample(&mut rng);
            FidRecord::new(vec![Complex64::new(a, 0.0); 8], 1e-6, 0.0).unwrap()
        })
        .collect();
    DatasetStore::new(blocks).unwrap()
}

pub fn first_point(r: &FidRecord) -> nvdnp::Result<f64> {
    Ok(r.samples[0].re)
}
