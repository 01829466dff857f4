//! Chern numbers of the four bands over the flux torus: lattice link variables
//! with local refinement, and an independent degree-of-map count.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cxmat::{cis, wrap_pi, Cx, UMat4, UNITARY_TOL};
use crate::degeneracy::{small_coeffs, Triangle};
use crate::error::{Error, Result};
use crate::spectral::{band_set_unchecked, h_field_raw, reduced_s2, BandSet, FluxPair};

/// Grids whose band gap falls below this refuse to produce Chern numbers.
pub const GAP_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChernVector {
    pub c: [i32; 4],
    pub grid_n: usize,
    pub converged: bool,
}

impl ChernVector {
    pub fn is_trivial(&self) -> bool {
        self.c == [0; 4]
    }

    /// (±1, ∓1, ±1, ∓1) in band order.
    pub fn is_alternating(&self) -> bool {
        let c = self.c;
        c[0].abs() == 1 && c[1] == -c[0] && c[2] == c[0] && c[3] == -c[0]
    }

    pub fn sum(&self) -> i32 {
        self.c.iter().sum()
    }

    pub fn abs_sum(&self) -> i32 {
        self.c.iter().map(|x| x.abs()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FhsOptions {
    pub n: usize,
    /// Recompute at 2n and require the same vector for `converged`.
    pub verify_doubling: bool,
    /// Levels of local plaquette bisection where the field is large.
    pub max_depth: u32,
}

impl FhsOptions {
    pub fn new(n: usize) -> Self {
        FhsOptions { n, verify_doubling: true, max_depth: 10 }
    }
}

pub(crate) fn is_decoupled(s: &UMat4) -> bool {
    (0..2).all(|i| (2..4).all(|j| s.0[i][j].norm() < 1e-14 && s.0[j][i].norm() < 1e-14))
}

/// Raw FHS result before rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FhsSums {
    /// Σ plaquette field / 2π per band.
    pub sums: [f64; 4],
    pub min_gap: f64,
    pub refined_plaquettes: usize,
}

impl FhsSums {
    pub fn rounded(&self) -> [i32; 4] {
        self.sums.map(|x| x.round() as i32)
    }

    pub fn residual(&self) -> f64 {
        self.sums.iter().map(|x| (x - x.round()).abs()).fold(0.0, f64::max)
    }
}

pub fn chern_fhs(s: &UMat4, n: usize) -> Result<ChernVector> {
    chern_fhs_with(s, &FhsOptions::new(n))
}

pub fn chern_fhs_with(s: &UMat4, opts: &FhsOptions) -> Result<ChernVector> {
    if opts.n < 8 {
        return Err(Error::InvalidScan(format!("FHS grid needs n >= 8, got {}", opts.n)));
    }
    if is_decoupled(s) {
        // Every eigenvector lives on one loop and depends on that loop's flux
        // only, so the curvature vanishes even where sorted bands cross.
        s.assert_unitary(UNITARY_TOL)?;
        return Ok(ChernVector { c: [0; 4], grid_n: opts.n, converged: true });
    }
    let base = fhs_sums(s, opts.n, opts.max_depth)?;
    let c = base.rounded();
    let mut converged = base.residual() < 1e-3;
    if converged && opts.verify_doubling {
        converged = fhs_sums(s, 2 * opts.n, opts.max_depth)?.rounded() == c;
    }
    Ok(ChernVector { c, grid_n: opts.n, converged })
}

/// Plaquette sums on an n×n flux grid.
///
/// Each plaquette carries arg of the product of the four link overlaps. Where
/// that angle exceeds π/2 in magnitude for some band, the plaquette is split
/// into four and the finer sum picks the 2π branch of the coarse value, so the
/// total stays an exact multiple of 2π.
pub fn fhs_sums(s: &UMat4, n: usize, max_depth: u32) -> Result<FhsSums> {
    if n < 8 {
        return Err(Error::InvalidScan(format!("FHS grid needs n >= 8, got {n}")));
    }
    s.assert_unitary(UNITARY_TOL)?;
    let step = TAU / n as f64;
    let grid: Vec<BandSet> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            checked_bands(s, i as f64 * step, j as f64 * step)
        })
        .collect::<Result<_>>()?;
    let min_gap = grid.iter().map(BandSet::min_gap).fold(f64::INFINITY, f64::min);

    let rows: Vec<([f64; 4], usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = [0.0; 4];
            let mut refined = 0;
            for j in 0..n {
                let at = |a: usize, b: usize| &grid[(a % n) * n + (b % n)];
                let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                let origin = (i as f64 * step, j as f64 * step);
                let (f, did) = plaquette(s, origin, step, corners.map(|b| b.vectors), max_depth)?;
                refined += did as usize;
                for b in 0..4 {
                    acc[b] += f[b];
                }
            }
            Ok((acc, refined))
        })
        .collect::<Result<_>>()?;

    let mut sums = [0.0; 4];
    let mut refined_plaquettes = 0;
    for (row, r) in &rows {
        for b in 0..4 {
            sums[b] += row[b];
        }
        refined_plaquettes += r;
    }
    Ok(FhsSums { sums: sums.map(|x| x / TAU), min_gap, refined_plaquettes })
}

fn checked_bands(s: &UMat4, phi1: f64, phi2: f64) -> Result<BandSet> {
    let b = band_set_unchecked(s, FluxPair::new(phi1, phi2), None)?;
    let gap = b.min_gap();
    if gap < GAP_TOL {
        return Err(Error::GapClosure { gap, phi1, phi2 });
    }
    Ok(b)
}

fn overlap(a: &[Cx; 4], b: &[Cx; 4]) -> Cx {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Loop field of each band around corners given counter-clockwise.
fn loop_field(v: &[[[Cx; 4]; 4]; 4]) -> ([f64; 4], bool) {
    let mut f = [0.0; 4];
    let mut large = false;
    for band in 0..4 {
        let links = [0, 1, 2, 3].map(|c| overlap(&v[c][band], &v[(c + 1) % 4][band]));
        let w: Cx = links.iter().product();
        f[band] = wrap_pi(w.arg());
        if f[band].abs() > PI / 2.0 || links.iter().any(|u| u.norm() < 0.5) {
            large = true;
        }
    }
    (f, large)
}

fn plaquette(s: &UMat4, origin: (f64, f64), size: f64, corners: [[[Cx; 4]; 4]; 4], depth: u32) -> Result<([f64; 4], bool)> {
    let (coarse, large) = loop_field(&corners);
    if !large || depth == 0 {
        return Ok((coarse, false));
    }
    let h = size / 2.0;
    let (x, y) = origin;
    let v = |dx: f64, dy: f64| -> Result<[[Cx; 4]; 4]> { Ok(checked_bands(s, x + dx, y + dy)?.vectors) };
    let bottom = v(h, 0.0)?;
    let right = v(size, h)?;
    let top = v(h, size)?;
    let left = v(0.0, h)?;
    let centre = v(h, h)?;
    let [c00, c10, c11, c01] = corners;
    let subs = [
        ((x, y), [c00, bottom, centre, left]),
        ((x + h, y), [bottom, c10, right, centre]),
        ((x + h, y + h), [centre, right, c11, top]),
        ((x, y + h), [left, centre, top, c01]),
    ];
    let mut fine = [0.0; 4];
    for (o, c) in subs {
        let (f, _) = plaquette(s, o, h, c, depth - 1)?;
        for b in 0..4 {
            fine[b] += f[b];
        }
    }
    let mut out = coarse;
    for b in 0..4 {
        out[b] += TAU * ((fine[b] - coarse[b]) / TAU).round();
    }
    Ok((out, true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pole {
    North,
    South,
}

/// A flux point where band `band_index` has Bloch vector at a pole of the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimagePoint {
    pub flux: FluxPair,
    pub k: f64,
    /// 1..=4
    pub band_index: usize,
    pub jacobian_sign: i8,
    pub pole: Pole,
}

/// Bloch vector of band `band` (0-based) from the Pauli field at its wavenumber.
fn band_map(s: &UMat4, band: usize, phi1: f64, phi2: f64) -> Result<[f64; 3]> {
    let b = band_set_unchecked(s, FluxPair::new(phi1, phi2), None)?;
    let h = h_field_raw(s, b.k[band], phi1, phi2)?;
    let r = h.h.iter().map(|x| x * x).sum::<f64>().sqrt();
    // Which eigenvalue h₀ ± |h| of the log vanishes decides the sign.
    let sign = if wrap_pi(h.h0 + r).abs() <= wrap_pi(h.h0 - r).abs() { 1.0 } else { -1.0 };
    Ok(h.h.map(|x| sign * x / r))
}

/// Sign of (∂φ₁f × ∂φ₂f)·f for the band map f at a preimage.
pub fn jacobian_sign(p: &PreimagePoint, s: &UMat4) -> Result<i8> {
    let (x, y) = (p.flux.phi1, p.flux.phi2);
    let band = p.band_index - 1;
    let f = band_map(s, band, x, y)?;
    let fx = sub(band_map(s, band, x + FD_STEP, y)?, band_map(s, band, x - FD_STEP, y)?);
    let fy = sub(band_map(s, band, x, y + FD_STEP)?, band_map(s, band, x, y - FD_STEP)?);
    let scale = 1.0 / (4.0 * FD_STEP * FD_STEP);
    let value = dot(cross(fx, fy), f) * scale;
    if value.abs() < 1e-9 {
        return Err(Error::DegenerateJacobian { value });
    }
    Ok(value.signum() as i8)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// All pole preimages of the band maps, with Jacobian signs.
///
/// Poles need Ŝ₂ off-diagonal, i.e. the direct ellipse relation at γ = 0 for
/// the full S. Each of its four (k, φ₁) solutions gives one north and one south
/// preimage through φ₂.
pub fn pole_preimages(s: &UMat4) -> Result<Vec<PreimagePoint>> {
    s.assert_unitary(UNITARY_TOL)?;
    let tri = Triangle::from_coeffs(&small_coeffs(s).direct)?;
    if !tri.solvable {
        return Ok(Vec::new());
    }
    if tri.tangency().abs() < 1e-9 {
        return Err(Error::TangentEllipses);
    }
    let mut out = Vec::with_capacity(8);
    for kappa in tri.wave_phases() {
        for shift in [0.0, PI] {
            let k = wrap_pi(kappa + shift);
            let phi1 = tri.flux_phase(k).ok_or(Error::DegenerateEllipse { product: 0.0 })?;
            let m = reduced_s2(s, k, phi1)?;
            let north = (cis(-k) * m.0[1][0].conj()).arg();
            let south = (cis(k) * m.0[0][1]).arg();
            for (pole, phi2) in [(Pole::North, north), (Pole::South, south)] {
                let flux = FluxPair::new(phi1, phi2);
                let band = assign_band(s, flux, k)?;
                let mut p = PreimagePoint { flux, k, band_index: band + 1, jacobian_sign: 0, pole };
                p.jacobian_sign = jacobian_sign(&p, s)?;
                out.push(p);
            }
        }
    }
    Ok(out)
}

fn assign_band(s: &UMat4, flux: FluxPair, k: f64) -> Result<usize> {
    let b = band_set_unchecked(s, flux, None)?;
    let mut d: Vec<(f64, usize)> = b.k.iter().enumerate().map(|(j, kj)| (wrap_pi(kj - k).abs(), j)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    if d[1].0 < 1e-6 || d[0].0 > 1e-6 {
        return Err(Error::AmbiguousBand { k });
    }
    Ok(d[0].1)
}

/// Chern numbers as degrees of the band maps, counted at both poles.
pub fn chern_degree(s: &UMat4) -> Result<ChernVector> {
    let pre = pole_preimages(s)?;
    let mut north = [0i32; 4];
    let mut south = [0i32; 4];
    for p in &pre {
        let slot = if p.pole == Pole::North { &mut north } else { &mut south };
        slot[p.band_index - 1] += p.jacobian_sign as i32;
    }
    if north != south {
        let deviation = north.iter().zip(&south).map(|(a, b)| (a - b).abs()).max().unwrap_or(0) as f64;
        return Err(Error::Inconsistent { deviation });
    }
    Ok(ChernVector { c: north, grid_n: 0, converged: true })
}
