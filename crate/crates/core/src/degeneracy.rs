//! Closed-form band crossings in the γ family S = diag(e^{iγ}I, e^{−iγ}I)·S₀.
//!
//! A crossing at (γ, k, φ₁, φ₂) needs Λ₂Ŝ₂ = e^{−ik}I and Λ₁Ŝ₁ = e^{−ik}I. The
//! vanishing diagonal of Ŝ₂ is an ellipse relation between e^{i(k+γ)} and e^{iφ₁},
//! that of Ŝ₁ one between e^{i(k−γ)} and e^{iφ₂}. Each relation is solvable
//! only when three lengths form a triangle, and the remaining diagonal
//! condition fixes γ.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::cxmat::{cis, wrap_pi, Cx, UMat2, UMat4};
use crate::error::{Error, Result};
use crate::scatter::{apply_gamma, build_s0, ScatterParams};
use crate::spectral::{h_field_raw, lambda_block, reduced_s1, reduced_s2, FluxPair};

const DEGENERATE_ELLIPSE: f64 = 1e-14;
/// Agreement required between the two closed forms for the crossing γ set.
pub const GAMMA_SET_TOL: f64 = 1e-7;
const MERGE_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;

/// Coefficients of one ellipse relation
/// `wave_fwd·e^{iκ} + wave_bwd·e^{−iκ} = flux_fwd·e^{iφ} + flux_bwd·e^{−iφ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseCoeffs {
    pub wave_fwd: Cx,
    pub wave_bwd: Cx,
    pub flux_fwd: Cx,
    pub flux_bwd: Cx,
}

impl EllipseCoeffs {
    /// Left minus right side of the relation.
    pub fn residual(&self, kappa: f64, phi: f64) -> Cx {
        self.wave_fwd * cis(kappa) + self.wave_bwd * cis(-kappa) - self.flux_fwd * cis(phi) - self.flux_bwd * cis(-phi)
    }
}

/// `direct`: Ŝ₂,₁₁ = 0 with κ = k+γ, φ = φ₁. `dual`: Ŝ₁,₁₁ = 0 with κ = k−γ, φ = φ₂.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallCoeffs {
    pub direct: EllipseCoeffs,
    pub dual: EllipseCoeffs,
}

fn entry(s: &UMat4) -> impl Fn(usize, usize) -> Cx + '_ {
    move |i, j| s.0[i - 1][j - 1]
}

/// Polynomial coefficients of the two reflectionless conditions, from the
/// γ = 0 representative.
pub fn small_coeffs(s0: &UMat4) -> SmallCoeffs {
    let s = entry(s0);
    let direct = EllipseCoeffs {
        wave_fwd: s(3, 1) * (s(1, 2) * s(2, 3) - s(2, 2) * s(1, 3))
            + s(3, 2) * (s(2, 1) * s(1, 3) - s(1, 1) * s(2, 3))
            + s(3, 3) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1)),
        wave_bwd: -s(3, 3),
        flux_fwd: s(3, 1) * s(2, 3) - s(3, 3) * s(2, 1),
        flux_bwd: s(3, 2) * s(1, 3) - s(3, 3) * s(1, 2),
    };
    let dual = EllipseCoeffs {
        wave_fwd: s(1, 3) * (s(3, 4) * s(4, 1) - s(4, 4) * s(3, 1))
            + s(1, 4) * (s(4, 3) * s(3, 1) - s(3, 3) * s(4, 1))
            + s(1, 1) * (s(3, 3) * s(4, 4) - s(3, 4) * s(4, 3)),
        wave_bwd: -s(1, 1),
        flux_fwd: s(1, 3) * s(4, 1) - s(1, 1) * s(4, 3),
        flux_bwd: s(1, 4) * s(3, 1) - s(1, 1) * s(3, 4),
    };
    SmallCoeffs { direct, dual }
}

/// Triangle geometry of one ellipse relation.
///
/// Eliminating φ gives `fwd·e^{iκ} + bwd·e^{−iκ} = flux_scale·e^{iφ}`, which has
/// solutions iff |fwd|, |bwd|, |flux_scale| are the sides of a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    /// a·c* − b*·d
    pub fwd: Cx,
    /// b·c* − a*·d
    pub bwd: Cx,
    /// |c|² − |d|²
    pub flux_scale: f64,
    /// |a|² − |b|²
    pub wave_scale: f64,
    /// |flux_scale² − |fwd|² − |bwd|²| / (|fwd||bwd|)
    pub ratio: f64,
    /// arg of (flux_scale² − |fwd|² − |bwd|²)/(fwd·bwd*)
    pub offset: f64,
    /// arccos(ratio/2), in [0, π/2]
    pub opening: f64,
    /// Same angle built from wave_scale instead of flux_scale.
    pub flux_opening: f64,
    pub solvable: bool,
}

impl Triangle {
    pub fn from_coeffs(c: &EllipseCoeffs) -> Result<Triangle> {
        let (a, b, cc, d) = (c.wave_fwd, c.wave_bwd, c.flux_fwd, c.flux_bwd);
        let fwd = a * cc.conj() - b.conj() * d;
        let bwd = b * cc.conj() - a.conj() * d;
        let flux_scale = cc.norm_sqr() - d.norm_sqr();
        let wave_scale = a.norm_sqr() - b.norm_sqr();
        let prod = fwd.norm() * bwd.norm();
        if prod < DEGENERATE_ELLIPSE {
            return Err(Error::DegenerateEllipse { product: prod });
        }
        let rest = flux_scale * flux_scale - fwd.norm_sqr() - bwd.norm_sqr();
        let z = rest / (fwd * bwd.conj());
        let ratio = z.norm();
        let dual_rest = wave_scale * wave_scale - fwd.norm_sqr() - bwd.norm_sqr();
        Ok(Triangle {
            fwd,
            bwd,
            flux_scale,
            wave_scale,
            ratio,
            offset: z.arg(),
            opening: (ratio / 2.0).min(1.0).acos(),
            flux_opening: (dual_rest.abs() / (2.0 * prod)).min(1.0).acos(),
            solvable: 2.0 * prod >= rest.abs(),
        })
    }

    /// C² − |A|² − |B|².
    pub fn remainder(&self) -> f64 {
        self.flux_scale * self.flux_scale - self.fwd.norm_sqr() - self.bwd.norm_sqr()
    }

    /// Side lengths |A|, |B|, |C| satisfy all three triangle inequalities.
    pub fn sides_form_triangle(&self) -> bool {
        let (x, y, z) = (self.fwd.norm(), self.bwd.norm(), self.flux_scale.abs());
        x + y >= z && x + z >= y && y + z >= x
    }

    /// Distance from tangency, relative to 2|A||B|.
    pub fn tangency(&self) -> f64 {
        let p = 2.0 * self.fwd.norm() * self.bwd.norm();
        (p - self.remainder().abs()) / p
    }

    /// κ = (δ ± ψ)/2; add π for the second pair of solutions.
    pub fn wave_phases(&self) -> [f64; 2] {
        [(self.offset + self.opening) / 2.0, (self.offset - self.opening) / 2.0]
    }

    /// e^{iφ} = (A e^{iκ} + B e^{−iκ}) / C; `None` when C vanishes.
    pub fn flux_phase(&self, kappa: f64) -> Option<f64> {
        if self.flux_scale.abs() < 1e-12 {
            return None;
        }
        Some(((self.fwd * cis(kappa) + self.bwd * cis(-kappa)) / self.flux_scale).arg())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleData {
    pub direct: Triangle,
    pub dual: Triangle,
}

impl TriangleData {
    pub fn solvable(&self) -> bool {
        self.direct.solvable && self.dual.solvable
    }
}

pub fn triangle_data(c: &SmallCoeffs) -> Result<TriangleData> {
    Ok(TriangleData { direct: Triangle::from_coeffs(&c.direct)?, dual: Triangle::from_coeffs(&c.dual)? })
}

/// Branch label: the ±ψ choice and whether π/2 was added to γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub sign: i8,
    pub quarter: bool,
}

impl Branch {
    /// 0..4 index, as printed in tables.
    pub fn index(&self) -> usize {
        (if self.sign > 0 { 0 } else { 2 }) + self.quarter as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingSolution {
    /// In [0, π).
    pub gamma: f64,
    pub branch: Branch,
    pub k: f64,
    pub flux_a: FluxPair,
    /// flux_a + (π, π); the crossing there sits at k + π.
    pub flux_b: FluxPair,
    /// Chern jump of the upper band for increasing γ, when it can be decided.
    pub sign: Option<i8>,
    /// Another branch produced the same γ within tolerance.
    pub merged: bool,
}

/// Coefficients of the second diagonal condition of Λ₂Ŝ₂ = e^{−ik}I.
struct DiagonalCoeffs {
    fwd1: Cx,
    bwd1: Cx,
    fwd2: Cx,
    bwd2: Cx,
    gauge: Cx,
    wave: Cx,
}

impl DiagonalCoeffs {
    fn new(s0: &UMat4, t: &Triangle) -> Self {
        let s = entry(s0);
        let q1 = s(4, 1) * (s(1, 2) * s(2, 3) - s(2, 2) * s(1, 3))
            + s(4, 2) * (s(2, 1) * s(1, 3) - s(1, 1) * s(2, 3))
            + s(4, 3) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1));
        let p1 = -s(4, 3);
        let r1 = s(4, 1) * s(2, 3) - s(4, 3) * s(2, 1);
        let s1 = s(4, 2) * s(1, 3) - s(4, 3) * s(1, 2);
        let q2 = s(3, 1) * (s(1, 2) * s(2, 4) - s(2, 2) * s(1, 4))
            + s(3, 2) * (s(2, 1) * s(1, 4) - s(1, 1) * s(2, 4))
            + s(3, 4) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1));
        let p2 = -s(3, 4);
        let r2 = s(3, 1) * s(2, 4) - s(3, 4) * s(2, 1);
        let s2 = s(3, 2) * s(1, 4) - s(3, 4) * s(1, 2);
        let u = s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1);
        let (v, w) = (s(2, 1), s(1, 2));
        let (a, b, c) = (t.fwd, t.bwd, t.flux_scale);
        DiagonalCoeffs {
            fwd1: q1 * c - r1 * a - s1 * b.conj(),
            bwd1: p1 * c - r1 * b - s1 * a.conj(),
            fwd2: q2 * c - r2 * a - s2 * b.conj(),
            bwd2: p2 * c - r2 * b - s2 * a.conj(),
            gauge: u * c + v * a + w * b.conj(),
            wave: -c + v * b + w * a.conj(),
        }
    }

    /// γ for θ = δ ± ψ, before adding π/2.
    fn gamma(&self, theta: f64) -> f64 {
        let e = cis(theta);
        let num = self.fwd1 * self.fwd2 * e + self.fwd1 * self.bwd2 + self.bwd1 * self.fwd2 + self.bwd1 * self.bwd2 / e;
        let den = self.gauge * self.gauge * e + self.gauge * self.wave * 2.0 + self.wave * self.wave / e;
        let chi = (num * den.conj()).arg();
        (chi + theta) / 4.0
    }

    /// e^{−iφ₂}·(U e^{2iγ} + Y e^{−2ik}) = Q₁ e^{i(k+γ)} + P₁ e^{−i(k+γ)}.
    fn flux2(&self, gamma: f64, k: f64) -> Option<f64> {
        let z = cis(k + gamma);
        let num = self.fwd1 * z + self.bwd1 / z;
        let den = self.gauge * cis(2.0 * gamma) + self.wave * cis(-2.0 * k);
        if num.norm() < 1e-10 || den.norm() < 1e-10 {
            return None;
        }
        Some(-(num / den).arg())
    }
}

fn mod_pi(x: f64) -> f64 {
    let t = x.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

pub(crate) fn dist_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// The four crossing γ (mod π) from the two triangle angles alone:
/// γ = (δ − δ̄ ± (ψ·sign(C·R) − ψ̄·sign(C̄·R̄)))/4, plus π/2.
/// `None` when one of the signs is undefined.
pub fn gamma_set_from_angles(t: &TriangleData) -> Option<[f64; 4]> {
    let sign = |tr: &Triangle| {
        let v = tr.flux_scale * tr.remainder();
        (v != 0.0).then(|| v.signum())
    };
    let (s, sb) = (sign(&t.direct)?, sign(&t.dual)?);
    let base = (t.direct.offset - t.dual.offset) / 4.0;
    let spread = (t.direct.opening * s - t.dual.opening * sb) / 4.0;
    let mut out = [base + spread, base + spread + FRAC_PI_2, base - spread, base - spread + FRAC_PI_2];
    out.iter_mut().for_each(|g| *g = mod_pi(*g));
    Some(out)
}

/// The eight γ (mod π) allowed by the two wave-number relations separately.
pub fn gamma_candidates(t: &TriangleData) -> [f64; 8] {
    let mut out = [0.0; 8];
    let mut i = 0;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let g = (t.direct.offset + s1 * t.direct.opening - t.dual.offset - s2 * t.dual.opening) / 4.0;
            out[i] = mod_pi(g);
            out[i + 1] = mod_pi(g + FRAC_PI_2);
            i += 2;
        }
    }
    out
}

/// Crossing γ values from the diagonal condition, before completion.
pub fn gamma_set_from_diagonal(s0: &UMat4, t: &TriangleData) -> [(Branch, f64); 4] {
    let diag = DiagonalCoeffs::new(s0, &t.direct);
    let mut out = [(Branch { sign: 1, quarter: false }, 0.0); 4];
    let mut i = 0;
    for sign in [1i8, -1] {
        let g = diag.gamma(t.direct.offset + sign as f64 * t.direct.opening);
        for quarter in [false, true] {
            out[i] = (Branch { sign, quarter }, mod_pi(g + if quarter { FRAC_PI_2 } else { 0.0 }));
            i += 1;
        }
    }
    out
}

/// The four crossing γ (mod π) by branch, without completing the solutions.
/// `None` when either triangle is unsolvable.
pub fn crossing_gammas(s0: &UMat4) -> Result<Option<[(Branch, f64); 4]>> {
    let tri = triangle_data(&small_coeffs(s0))?;
    Ok(tri.solvable().then(|| gamma_set_from_diagonal(s0, &tri)))
}

/// All band crossings of the γ family through S₀, with wavenumber and fluxes.
///
/// Empty when either triangle is unsolvable. Errors with `Inconsistent` when the
/// two closed forms of the γ set disagree beyond `GAMMA_SET_TOL`.
pub fn gamma_crossings(s0: &UMat4) -> Result<Vec<CrossingSolution>> {
    let tri = triangle_data(&small_coeffs(s0))?;
    if !tri.solvable() {
        return Ok(Vec::new());
    }
    let diag = DiagonalCoeffs::new(s0, &tri.direct);
    let gammas = gamma_set_from_diagonal(s0, &tri);

    if let Some(alt) = gamma_set_from_angles(&tri) {
        let deviation =
            gammas.iter().map(|(_, g)| alt.iter().map(|a| dist_mod_pi(*g, *a)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
        if deviation > GAMMA_SET_TOL {
            return Err(Error::Inconsistent { deviation });
        }
    }

    let mut out: Vec<CrossingSolution> = Vec::with_capacity(4);
    for (branch, gamma) in gammas {
        if let Some(prev) = out.iter_mut().find(|c| dist_mod_pi(c.gamma, gamma) < MERGE_TOL) {
            prev.merged = true;
            continue;
        }
        let theta = tri.direct.offset + branch.sign as f64 * tri.direct.opening;
        let k = wrap_pi(theta / 2.0 - gamma);
        let s = apply_gamma(s0, gamma);
        let phi1 = match tri.direct.flux_phase(k + gamma) {
            Some(p) => p,
            None => continue,
        };
        let phi2 = match diag.flux2(gamma, k) {
            Some(p) => p,
            None => flux2_from_reduction(&s, k, phi1)?,
        };
        let flux_a = FluxPair::new(phi1, phi2);
        let mut sol = CrossingSolution { gamma, branch, k, flux_a, flux_b: flux_a.shifted_by_pi(), sign: None, merged: false };
        sol.sign = transition_sign(&sol, s0).ok();
        out.push(sol);
    }
    Ok(out)
}

/// e^{iφ₂} = e^{−ik}/Ŝ₂,₂₁ when Ŝ₂ is off-diagonal.
fn flux2_from_reduction(s: &UMat4, k: f64, phi1: f64) -> Result<f64> {
    let m = reduced_s2(s, k, phi1)?;
    Ok((cis(-k) / m.0[1][0]).arg())
}

/// Residuals of Λ₂Ŝ₂ = e^{−ik}I and Λ₁Ŝ₁ = e^{−ik}I at a crossing.
pub fn crossing_residuals(sol: &CrossingSolution, s0: &UMat4) -> Result<(f64, f64)> {
    let s = apply_gamma(s0, sol.gamma);
    let target = UMat2::identity().scale(cis(-sol.k));
    let m2 = lambda_block(sol.flux_a.phi2) * reduced_s2(&s, sol.k, sol.flux_a.phi1)?;
    let m1 = lambda_block(sol.flux_a.phi1) * reduced_s1(&s, sol.k, sol.flux_a.phi2)?;
    Ok((m2.max_abs_diff(&target), m1.max_abs_diff(&target)))
}

/// Central-difference gradient of (h₀, h⃗) in (φ₁, φ₂, γ, k).
pub(crate) fn h_gradient(s0: &UMat4, gamma: f64, k: f64, phi1: f64, phi2: f64) -> Result<[[f64; 4]; 4]> {
    let eval = |dp1: f64, dp2: f64, dg: f64, dk: f64| -> Result<[f64; 4]> {
        let s = apply_gamma(s0, gamma + dg);
        let h = h_field_raw(&s, k + dk, phi1 + dp1, phi2 + dp2)?;
        Ok([h.h0, h.h[0], h.h[1], h.h[2]])
    };
    let mut grad = [[0.0; 4]; 4];
    for var in 0..4 {
        let mut d = [0.0; 4];
        d[var] = FD_STEP;
        let plus = eval(d[0], d[1], d[2], d[3])?;
        let minus = eval(-d[0], -d[1], -d[2], -d[3])?;
        for comp in 0..4 {
            grad[comp][var] = (plus[comp] - minus[comp]) / (2.0 * FD_STEP);
        }
    }
    Ok(grad)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let d = det3(m);
    if d.abs() < 1e-14 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = rhs[r];
        }
        *o = det3(mc) / d;
    }
    Some(out)
}

/// Jump of the upper band's Chern number when γ increases through a crossing.
///
/// −sign det(∂h⃗/∂(φ₁, φ₂, k)) · sign(∂h₀/∂k − φ_k·∂h₀/∂φ) with
/// φ = (φ₁, φ₂, γ) and φ_k = (∂h⃗/∂φ)⁻¹ ∂h⃗/∂k. The leading minus is because
/// the higher-k band of the pair solves h₀ − |h⃗| ≡ 0 when ∂h₀/∂k > 0.
pub fn transition_sign(sol: &CrossingSolution, s0: &UMat4) -> Result<i8> {
    let g = h_gradient(s0, sol.gamma, sol.k, sol.flux_a.phi1, sol.flux_a.phi2)?;
    let dh_dk = [g[1][3], g[2][3], g[3][3]];
    let dh0_dk = g[0][3];
    let dh_norm = dh_dk.iter().map(|x| x * x).sum::<f64>().sqrt();
    if dh0_dk.abs() <= dh_norm {
        return Err(Error::AssumptionViolated { dh0: dh0_dk.abs(), dh: dh_norm });
    }
    let jk = [[g[1][0], g[1][1], g[1][3]], [g[2][0], g[2][1], g[2][3]], [g[3][0], g[3][1], g[3][3]]];
    let det = det3(jk);
    if det.abs() < 1e-10 {
        return Err(Error::SingularJacobian { det });
    }
    let jphi = [[g[1][0], g[1][1], g[1][2]], [g[2][0], g[2][1], g[2][2]], [g[3][0], g[3][1], g[3][2]]];
    let phi_k = solve3(jphi, dh_dk).ok_or(Error::SingularJacobian { det: det3(jphi) })?;
    let term = dh0_dk - (phi_k[0] * g[0][0] + phi_k[1] * g[0][1] + phi_k[2] * g[0][2]);
    Ok((-det.signum() * term.signum()) as i8)
}

/// Real scatterers: closed forms for the crossing γ and the γ = 0 boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct RealBoundaries {
    /// Crossing γ (mod π), sorted; empty when a triangle is unsolvable.
    pub crossing_gammas: Vec<f64>,
    /// γ (mod π) from tan 2γ = (E − Ē)/(1 + EĒ) over all sign choices of E, Ē.
    pub tangent_gammas: Vec<f64>,
    /// E² = tan²(k+γ) at a direct-relation solution.
    pub e_sq: f64,
    /// Ē² = tan²(k−γ) at a dual-relation solution.
    pub ebar_sq: f64,
    /// |a+b| − |c+d|, |a−b| − |c−d| for the direct and then the dual relation.
    pub edge_residuals: [f64; 4],
    /// Closed-form boundary relations in (α, β, θ±, ε±); zero on a boundary.
    pub closed_form_residuals: [f64; 4],
}

impl RealBoundaries {
    /// The γ = 0 plane meets a phase boundary here.
    pub fn on_zero_gamma_boundary(&self, tol: f64) -> bool {
        self.edge_residuals[..2].iter().any(|r| r.abs() < tol)
    }
}

pub fn real_s_boundaries(p: &ScatterParams) -> Result<RealBoundaries> {
    let s0 = build_s0(p);
    let max_imag = s0.0.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_imag > 1e-12 {
        return Err(Error::ComplexInput { max_imag });
    }
    let coeffs = small_coeffs(&s0);
    let tri = triangle_data(&coeffs)?;

    let crossing_gammas = match (tri.solvable(), gamma_set_from_angles(&tri)) {
        (true, Some(set)) => {
            let mut v = set.to_vec();
            v.sort_by(f64::total_cmp);
            v
        }
        _ => Vec::new(),
    };

    let real = |c: &EllipseCoeffs| (c.wave_fwd.re, c.wave_bwd.re, c.flux_fwd.re, c.flux_bwd.re);
    let tan_sq = |c: &EllipseCoeffs| {
        let (a, b, cc, d) = real(c);
        let p = ((a + b) / (cc + d)).powi(2);
        let q = ((a - b) / (cc - d)).powi(2);
        -(p - 1.0) / (q - 1.0)
    };
    let (e_sq, ebar_sq) = (tan_sq(&coeffs.direct), tan_sq(&coeffs.dual));

    let mut tangent_gammas = Vec::new();
    if e_sq >= 0.0 && ebar_sq >= 0.0 {
        for e in [e_sq.sqrt(), -e_sq.sqrt()] {
            for eb in [ebar_sq.sqrt(), -ebar_sq.sqrt()] {
                let two_gamma = (e - eb).atan2(1.0 + e * eb);
                for shift in [0.0, FRAC_PI_2] {
                    let g = mod_pi(two_gamma / 2.0 + shift);
                    if !tangent_gammas.iter().any(|x| dist_mod_pi(*x, g) < MERGE_TOL) {
                        tangent_gammas.push(g);
                    }
                }
            }
        }
        tangent_gammas.sort_by(f64::total_cmp);
    }

    let edges = |c: &EllipseCoeffs| {
        let (a, b, cc, d) = real(c);
        [(a + b).abs() - (cc + d).abs(), (a - b).abs() - (cc - d).abs()]
    };
    let (ed, eu) = (edges(&coeffs.direct), edges(&coeffs.dual));

    let theta_p = p.theta1 + p.eta1 + p.theta2 + p.eta2;
    let eps_p = -p.theta1 - p.eta1 + p.theta2 + p.eta2;
    let theta_m = p.theta1 - p.eta1 + p.theta2 - p.eta2;
    let eps_m = -p.theta1 + p.eta1 + p.theta2 - p.eta2;
    let (diff, sum) = ((p.alpha - p.beta) / 2.0, (p.alpha + p.beta) / 2.0);
    let closed_form_residuals = [
        (diff.cos() * (theta_p / 2.0).sin()).abs() - (sum.cos() * (eps_p / 2.0).cos()).abs(),
        (diff.cos() * (theta_p / 2.0).cos()).abs() - (sum.cos() * (eps_p / 2.0).sin()).abs(),
        (diff.sin() * (theta_m / 2.0).sin()).abs() - (sum.sin() * (eps_m / 2.0).cos()).abs(),
        (diff.sin() * (theta_m / 2.0).cos()).abs() - (sum.sin() * (eps_m / 2.0).sin()).abs(),
    ];

    Ok(RealBoundaries {
        crossing_gammas,
        tangent_gammas,
        e_sq,
        ebar_sq,
        edge_residuals: [ed[0], ed[1], eu[0], eu[1]],
        closed_form_residuals,
    })
}
