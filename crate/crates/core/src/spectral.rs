//! Flux matrix, band wavenumbers of ΛS, one-loop reductions and the Pauli
//! field on (φ₁, φ₂, k).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::cxmat::{cis, eig_unitary_unchecked, pauli_log_unchecked, wrap_pi, wrap_tau, Cx, UMat2, UMat4, UNITARY_TOL};
use crate::error::{Error, Result};
use crate::scatter::blocks;

/// Below this |det| the one-loop reduction is refused.
pub const SINGULAR_TOL: f64 = 1e-12;
const REFINE_BELOW: f64 = 1e-8;

/// Aharonov–Bohm phases through the two loops, stored in [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxPair {
    pub phi1: f64,
    pub phi2: f64,
}

impl FluxPair {
    pub fn new(phi1: f64, phi2: f64) -> Self {
        FluxPair { phi1: wrap_tau(phi1), phi2: wrap_tau(phi2) }
    }

    pub fn shifted_by_pi(&self) -> Self {
        FluxPair::new(self.phi1 + PI, self.phi2 + PI)
    }

    /// Largest per-component circular distance.
    pub fn distance(&self, other: &FluxPair) -> f64 {
        wrap_pi(self.phi1 - other.phi1).abs().max(wrap_pi(self.phi2 - other.phi2).abs())
    }
}

/// [[0, e^{iφ}], [e^{−iφ}, 0]].
pub fn lambda_block(phi: f64) -> UMat2 {
    UMat2::new(Cx::new(0.0, 0.0), cis(phi), cis(-phi), Cx::new(0.0, 0.0))
}

pub fn lambda_of(flux: FluxPair) -> UMat4 {
    let mut m = UMat4::zeros();
    m.0[0][1] = cis(flux.phi1);
    m.0[1][0] = cis(-flux.phi1);
    m.0[2][3] = cis(flux.phi2);
    m.0[3][2] = cis(-flux.phi2);
    m
}

/// Four band wavenumbers at one flux point; e^{−ik_j} are the eigenvalues of ΛS.
#[derive(Clone, Debug)]
pub struct BandSet {
    pub k: [f64; 4],
    pub vectors: [[Cx; 4]; 4],
    pub flux: FluxPair,
}

impl BandSet {
    /// Gaps k₂−k₁, k₃−k₂, k₄−k₃ and the wrap-around gap k₁+2π−k₄.
    pub fn gaps(&self) -> [f64; 4] {
        let k = &self.k;
        [k[1] - k[0], k[2] - k[1], k[3] - k[2], k[0] + TAU - k[3]]
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Band pair (lower, upper) across the smallest gap; the wrap-around pair
    /// is (4, 1) in one-based terms, returned here as (3, 0).
    pub fn closest_pair(&self) -> (usize, usize) {
        let g = self.gaps();
        let i = (0..4).min_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
        (i, (i + 1) % 4)
    }
}

/// Band wavenumbers of ΛS.
///
/// Without `reference` the principal values in (−π, π] are sorted and the top
/// (or bottom) ones shifted by 2π until Σk_j equals −arg det S; this labelling
/// is the same at every flux point where no gap closes. With `reference` the
/// labels and 2π lifts minimizing Σ|k_j − k_j^ref| under the same sum are used.
pub fn band_set(s: &UMat4, flux: FluxPair, reference: Option<&BandSet>) -> Result<BandSet> {
    s.assert_unitary(UNITARY_TOL)?;
    band_set_unchecked(s, flux, reference)
}

pub(crate) fn band_set_unchecked(s: &UMat4, flux: FluxPair, reference: Option<&BandSet>) -> Result<BandSet> {
    let eig = eig_unitary_unchecked(&(lambda_of(flux) * *s))?;
    let mut order: Vec<(f64, [Cx; 4])> = eig.phases.iter().zip(eig.vectors).map(|(t, v)| (wrap_pi(-t), v)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let target = wrap_pi(-s.det().arg());
    let sum: f64 = order.iter().map(|e| e.0).sum();
    let m = ((sum - target) / TAU).round() as i64;
    if m > 0 {
        for e in order.iter_mut().rev().take(m as usize) {
            e.0 -= TAU;
        }
        order.rotate_right(m as usize);
    } else if m < 0 {
        for e in order.iter_mut().take((-m) as usize) {
            e.0 += TAU;
        }
        order.rotate_left((-m) as usize);
    }

    let mut bands =
        BandSet { k: [order[0].0, order[1].0, order[2].0, order[3].0], vectors: [order[0].1, order[1].1, order[2].1, order[3].1], flux };
    if let Some(r) = reference {
        bands = match_reference(bands, r);
    }
    Ok(bands)
}

/// Relabelling of `b` closest to `r` with the same band sum.
fn match_reference(b: BandSet, r: &BandSet) -> BandSet {
    let ref_sum: f64 = r.k.iter().sum();
    let mut best: Option<(f64, [usize; 4], [f64; 4])> = None;
    for perm in permutations4() {
        let mut k = [0.0; 4];
        for j in 0..4 {
            let v = b.k[perm[j]];
            k[j] = v + TAU * ((r.k[j] - v) / TAU).round();
        }
        if (k.iter().sum::<f64>() - ref_sum).abs() > 1e-6 {
            continue;
        }
        let cost: f64 = k.iter().zip(&r.k).map(|(a, c)| (a - c).abs()).sum();
        if best.as_ref().is_none_or(|(c, ..)| cost < *c) {
            best = Some((cost, perm, k));
        }
    }
    match best {
        Some((_, perm, k)) => {
            let vectors = [b.vectors[perm[0]], b.vectors[perm[1]], b.vectors[perm[2]], b.vectors[perm[3]]];
            BandSet { k, vectors, flux: b.flux }
        }
        None => b,
    }
}

fn permutations4() -> impl Iterator<Item = [usize; 4]> {
    (0..4usize).flat_map(|a| {
        (0..4usize).flat_map(move |b| {
            (0..4usize).filter_map(move |c| {
                if a == b || a == c || b == c {
                    return None;
                }
                Some([a, b, c, 6 - a - b - c])
            })
        })
    })
}

/// Continue bands from `start` along a path of nearby flux points, halving the
/// step wherever the smallest gap is below ten times the step change.
pub fn follow_path(s: &UMat4, start: &BandSet, path: &[FluxPair]) -> Result<Vec<BandSet>> {
    s.assert_unitary(UNITARY_TOL)?;
    let mut out = Vec::with_capacity(path.len());
    let mut cur = start.clone();
    for &to in path {
        cur = continue_to(s, &cur, to, 0)?;
        out.push(cur.clone());
    }
    Ok(out)
}

fn continue_to(s: &UMat4, from: &BandSet, to: FluxPair, depth: u32) -> Result<BandSet> {
    let next = band_set_unchecked(s, to, Some(from))?;
    let step = next.k.iter().zip(&from.k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if next.min_gap() >= 10.0 * step || depth >= 24 {
        return Ok(next);
    }
    let mid =
        FluxPair::new(from.flux.phi1 + wrap_pi(to.phi1 - from.flux.phi1) / 2.0, from.flux.phi2 + wrap_pi(to.phi2 - from.flux.phi2) / 2.0);
    let half = continue_to(s, from, mid, depth + 1)?;
    continue_to(s, &half, to, depth + 1)
}

fn solve_reduction(m: UMat2, rhs: &UMat2) -> Result<UMat2> {
    let det = m.det2().norm();
    if det < SINGULAR_TOL {
        return Err(Error::SingularReduction { det });
    }
    let inv = m.inverse().ok_or(Error::SingularReduction { det })?;
    let mut x = inv * *rhs;
    if det < REFINE_BELOW {
        let r = *rhs - m * x;
        x = x + inv * r;
    }
    Ok(x)
}

/// Ŝ₂ = S₂₁(e^{−ik}Λ₁ − S₁₁)⁻¹S₁₂ + S₂₂.
pub fn reduced_s2(s: &UMat4, k: f64, phi1: f64) -> Result<UMat2> {
    let b = blocks(s);
    let x = solve_reduction(lambda_block(phi1).scale(cis(-k)) - b.s11, &b.s12)?;
    Ok(b.s21 * x + b.s22)
}

/// Ŝ₁ = S₁₁ + S₁₂(e^{−ik}Λ₂ − S₂₂)⁻¹S₂₁.
pub fn reduced_s1(s: &UMat4, k: f64, phi2: f64) -> Result<UMat2> {
    let b = blocks(s);
    let x = solve_reduction(lambda_block(phi2).scale(cis(-k)) - b.s22, &b.s21)?;
    Ok(b.s11 + b.s12 * x)
}

/// Pauli field of e^{ik}Λ₂(φ₂)Ŝ₂(k, φ₁).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HField {
    pub h0: f64,
    pub h: [f64; 3],
    pub k: f64,
    pub flux: FluxPair,
}

impl HField {
    pub fn norm(&self) -> f64 {
        self.h.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn h_field(s: &UMat4, k: f64, flux: FluxPair) -> Result<HField> {
    h_field_raw(s, k, flux.phi1, flux.phi2)
}

/// Same as `h_field` but without reducing the fluxes, for finite differences.
pub(crate) fn h_field_raw(s: &UMat4, k: f64, phi1: f64, phi2: f64) -> Result<HField> {
    let m = lambda_block(phi2).scale(cis(k)) * reduced_s2(s, k, phi1)?;
    let p = pauli_log_unchecked(&m);
    Ok(HField { h0: p.h0, h: p.h, k, flux: FluxPair::new(phi1, phi2) })
}

/// Which one-loop reduction to use for the secular equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loop {
    /// det(Λ₁Ŝ₁(k) − e^{−ik}I) = 0.
    First,
    /// det(Λ₂Ŝ₂(k) − e^{−ik}I) = 0.
    Second,
}

fn reduced_unitary(s: &UMat4, flux: FluxPair, which: Loop, k: f64) -> Result<UMat2> {
    Ok(match which {
        Loop::First => lambda_block(flux.phi1).scale(cis(k)) * reduced_s1(s, k, flux.phi2)?,
        Loop::Second => lambda_block(flux.phi2).scale(cis(k)) * reduced_s2(s, k, flux.phi1)?,
    })
}

const BRANCH_SLIP: f64 = 1e-6;

/// Roots k ∈ [−π, π) of the one-loop secular equation det(e^{ik}Λ Ŝ − I) = 0.
///
/// With U(k) = e^{ik}ΛŜ, det(U − I)/√det U is real; its sign changes are
/// bracketed on a grid (with √det U continued along k) and refined by
/// bisection. The grid is refined until four roots are found.
pub fn reduced_band_roots(s: &UMat4, flux: FluxPair, which: Loop) -> Result<Vec<f64>> {
    let mut n = 512;
    loop {
        let roots = roots_on_grid(s, flux, which, n)?;
        if roots.len() >= 4 || n >= 1 << 16 {
            return Ok(roots);
        }
        n *= 4;
    }
}

fn roots_on_grid(s: &UMat4, flux: FluxPair, which: Loop, n: usize) -> Result<Vec<f64>> {
    // Real function with a continued square-root branch.
    let eval = |k: f64, root_hint: Option<Cx>| -> Result<(f64, Cx)> {
        let u = reduced_unitary(s, flux, which, k)?;
        let mut r = u.det2().sqrt();
        if let Some(h) = root_hint {
            if (r - h).norm() > (r + h).norm() {
                r = -r;
            }
        }
        let f = (u - UMat2::identity()).det2() / r;
        Ok((f.re, r))
    };
    // Nudge grid points that land on a singular reduction.
    let eval_safe = |k: f64, hint: Option<Cx>| -> Result<(f64, Cx, f64)> {
        let mut kk = k;
        for _ in 0..8 {
            match eval(kk, hint) {
                Ok((f, r)) => return Ok((f, r, kk)),
                Err(Error::SingularReduction { .. }) => kk += 1e-7,
                Err(e) => return Err(e),
            }
        }
        let (f, r) = eval(kk, hint)?;
        Ok((f, r, kk))
    };

    let mut roots = Vec::new();
    let (mut f0, mut r0, mut k0) = eval_safe(-PI, None)?;
    for i in 1..=n {
        let k = -PI + TAU * i as f64 / n as f64;
        let (f1, r1, k1) = eval_safe(k, Some(r0))?;
        if f0 == 0.0 {
            roots.push(k0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa, mut ra, mut fb) = (k0, k1, f0, r0, f1);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let (fm, rm, km) = eval_safe(m, Some(ra))?;
                if fa * fm <= 0.0 {
                    b = km;
                    fb = fm;
                } else {
                    a = km;
                    fa = fm;
                    ra = rm;
                }
            }
            // a square-root branch slip also flips the sign, without a zero
            if fa.abs().min(fb.abs()) < BRANCH_SLIP {
                roots.push(0.5 * (a + b));
            }
        }
        (f0, r0, k0) = (f1, r1, k1);
    }
    Ok(roots.into_iter().map(|k| if k >= PI { k - TAU } else { k }).collect())
}
