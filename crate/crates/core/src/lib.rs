//! Band structure, Chern numbers and band-crossing loci of the figure-eight
//! quantum graph, the Bloch fiber of a square-lattice quantum graph.

#![allow(clippy::needless_range_loop)]

pub mod chern;
pub mod config;
pub mod cxmat;
pub mod degeneracy;
pub mod error;
pub mod phasescan;
pub mod raster;
pub mod scatter;
pub mod spectral;

pub use chern::{chern_degree, chern_fhs, chern_fhs_with, jacobian_sign, pole_preimages, ChernVector, FhsOptions, Pole, PreimagePoint};
pub use cxmat::{cis, eig_unitary, pauli_exp, pauli_log, wrap_pi, wrap_tau, Cx, EigenSystem, PauliDecomp, UMat2, UMat4};
pub use degeneracy::{
    crossing_gammas, gamma_crossings, real_s_boundaries, small_coeffs, transition_sign, triangle_data, CrossingSolution, RealBoundaries,
    SmallCoeffs, TriangleData,
};
pub use error::{Error, Result};
pub use phasescan::{emit, run_scan, Axis, BandChoice, BoundaryCurve, Cell, CurvePoint, OutputKind, PhaseGrid, ScanSpec, ScanSummary};
pub use raster::Raster;
pub use scatter::{apply_gamma, blocks, build_s, build_s0, ParamName, SBlocks, ScatterParams};
pub use spectral::{band_set, h_field, lambda_of, reduced_s1, reduced_s2, BandSet, FluxPair, HField};

#[cfg(test)]
pub(crate) mod testutil {
    use std::f64::consts::{PI, TAU};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::cxmat::{CMat, Cx};
    use crate::scatter::{ParamName, ScatterParams};

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_params(r: &mut impl Rng) -> ScatterParams {
        let mut p = ScatterParams::default();
        for name in ParamName::ALL {
            if name != ParamName::Gamma {
                p.set(name, r.gen_range(0.0..TAU));
            }
        }
        p
    }

    pub fn random_real_params(r: &mut impl Rng) -> ScatterParams {
        ScatterParams { nu1: 0.0, nu2: 0.0, mu1: 0.0, mu2: 0.0, ..random_params(r) }
    }

    pub fn twisted_params() -> ScatterParams {
        ScatterParams {
            alpha: 1.0,
            beta: 0.3,
            theta1: PI / 4.0,
            theta2: PI / 3.0,
            eta1: PI / 2.0,
            eta2: PI / 6.0,
            nu1: 0.6,
            ..Default::default()
        }
    }

    /// Haar-ish unitary from Gram–Schmidt on a Gaussian-like matrix.
    pub fn random_unitary<const N: usize>(r: &mut impl Rng) -> CMat<N> {
        let mut cols = [[Cx::new(0.0, 0.0); N]; N];
        for c in cols.iter_mut() {
            for z in c.iter_mut() {
                *z = Cx::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            }
        }
        for j in 0..N {
            for i in 0..j {
                let dot: Cx = (0..N).map(|t| cols[i][t].conj() * cols[j][t]).sum();
                for t in 0..N {
                    let v = cols[i][t];
                    cols[j][t] -= dot * v;
                }
            }
            let n = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            cols[j].iter_mut().for_each(|z| *z /= n);
        }
        let mut m = CMat::<N>::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = cols[j][i];
            }
        }
        m
    }

    pub fn circ_dist(a: f64, b: f64) -> f64 {
        crate::cxmat::wrap_pi(a - b).abs()
    }
}
