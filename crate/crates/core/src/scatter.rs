//! Vertex scattering matrix of the figure-eight graph and its γ phase family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cxmat::{cis, Cx, UMat2, UMat4};
use crate::error::{Error, Result};

/// The topologically relevant angles of the U(4) scatterer.
///
/// Redundant parameters that only shift the fluxes are fixed to zero. `mu1`
/// and `mu2` enter V₁ = diag(e^{iμ₁}, e^{−iμ₁})·R(η₁) and
/// V₂ = diag(e^{−iμ₂}, e^{iμ₂})·R(η₂).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScatterParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub mu1: f64,
    pub mu2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    Alpha,
    Beta,
    Gamma,
    Theta1,
    Theta2,
    Eta1,
    Eta2,
    Nu1,
    Nu2,
    Mu1,
    Mu2,
}

impl ParamName {
    pub const ALL: [ParamName; 11] = [
        ParamName::Alpha,
        ParamName::Beta,
        ParamName::Gamma,
        ParamName::Theta1,
        ParamName::Theta2,
        ParamName::Eta1,
        ParamName::Eta2,
        ParamName::Nu1,
        ParamName::Nu2,
        ParamName::Mu1,
        ParamName::Mu2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Alpha => "alpha",
            ParamName::Beta => "beta",
            ParamName::Gamma => "gamma",
            ParamName::Theta1 => "theta1",
            ParamName::Theta2 => "theta2",
            ParamName::Eta1 => "eta1",
            ParamName::Eta2 => "eta2",
            ParamName::Nu1 => "nu1",
            ParamName::Nu2 => "nu2",
            ParamName::Mu1 => "mu1",
            ParamName::Mu2 => "mu2",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ParamName::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

impl ScatterParams {
    pub fn get(&self, name: ParamName) -> f64 {
        *self.field(name)
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        *self.field_mut(name) = value;
    }

    pub fn with(mut self, name: ParamName, value: f64) -> Self {
        self.set(name, value);
        self
    }

    fn field(&self, name: ParamName) -> &f64 {
        match name {
            ParamName::Alpha => &self.alpha,
            ParamName::Beta => &self.beta,
            ParamName::Gamma => &self.gamma,
            ParamName::Theta1 => &self.theta1,
            ParamName::Theta2 => &self.theta2,
            ParamName::Eta1 => &self.eta1,
            ParamName::Eta2 => &self.eta2,
            ParamName::Nu1 => &self.nu1,
            ParamName::Nu2 => &self.nu2,
            ParamName::Mu1 => &self.mu1,
            ParamName::Mu2 => &self.mu2,
        }
    }

    fn field_mut(&mut self, name: ParamName) -> &mut f64 {
        match name {
            ParamName::Alpha => &mut self.alpha,
            ParamName::Beta => &mut self.beta,
            ParamName::Gamma => &mut self.gamma,
            ParamName::Theta1 => &mut self.theta1,
            ParamName::Theta2 => &mut self.theta2,
            ParamName::Eta1 => &mut self.eta1,
            ParamName::Eta2 => &mut self.eta2,
            ParamName::Nu1 => &mut self.nu1,
            ParamName::Nu2 => &mut self.nu2,
            ParamName::Mu1 => &mut self.mu1,
            ParamName::Mu2 => &mut self.mu2,
        }
    }

    pub fn is_finite(&self) -> bool {
        ParamName::ALL.iter().all(|&p| self.get(p).is_finite())
    }

    /// True when no complex phases enter S₀.
    pub fn is_real(&self) -> bool {
        self.nu1 == 0.0 && self.nu2 == 0.0 && self.mu1 == 0.0 && self.mu2 == 0.0
    }

    /// Parse a flat `key = value` parameter file. `scan.*` keys are left to
    /// the scan spec; any other unknown key is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = ScatterParams::default();
        for entry in crate::config::entries(text)?.into_iter().filter(|e| !e.key.starts_with("scan.")) {
            let name: ParamName = entry.key.parse().map_err(|msg| Error::Parse { line: entry.line, msg })?;
            p.set(name, entry.angle()?);
        }
        Ok(p)
    }
}

/// R(t) = [[cos t, sin t], [−sin t, cos t]].
pub fn rotation(t: f64) -> UMat2 {
    let (s, c) = t.sin_cos();
    UMat2::new(Cx::new(c, 0.0), Cx::new(s, 0.0), Cx::new(-s, 0.0), Cx::new(c, 0.0))
}

fn phase_pair(t: f64) -> UMat2 {
    UMat2::from_diag([cis(t), cis(-t)])
}

fn block_diag(a: &UMat2, b: &UMat2) -> UMat4 {
    SBlocks { s11: *a, s12: UMat2::zeros(), s21: UMat2::zeros(), s22: *b }.assemble()
}

/// S₀ = diag(U₁, U₂)·[[D, D̄], [−D̄, D]]·diag(V₁, V₂) at γ = 0.
pub fn build_s0(p: &ScatterParams) -> UMat4 {
    let u1 = rotation(p.theta1) * phase_pair(p.nu1);
    let u2 = rotation(p.theta2) * phase_pair(p.nu2);
    let v1 = phase_pair(p.mu1) * rotation(p.eta1);
    let v2 = phase_pair(-p.mu2) * rotation(p.eta2);
    let d = UMat2::from_diag([Cx::new(p.alpha.cos(), 0.0), Cx::new(p.beta.cos(), 0.0)]);
    let db = UMat2::from_diag([Cx::new(p.alpha.sin(), 0.0), Cx::new(p.beta.sin(), 0.0)]);
    let centre = SBlocks { s11: d, s12: db, s21: -db, s22: d }.assemble();
    block_diag(&u1, &u2) * centre * block_diag(&v1, &v2)
}

/// diag(e^{iγ}I₂, e^{−iγ}I₂)·s0.
pub fn apply_gamma(s0: &UMat4, gamma: f64) -> UMat4 {
    let (up, down) = (cis(gamma), cis(-gamma));
    let mut s = *s0;
    for (i, row) in s.0.iter_mut().enumerate() {
        let f = if i < 2 { up } else { down };
        row.iter_mut().for_each(|e| *e *= f);
    }
    s
}

/// Full scatterer including the γ phase.
pub fn build_s(p: &ScatterParams) -> UMat4 {
    apply_gamma(&build_s0(p), p.gamma)
}

/// The four 2×2 blocks of a 4×4 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SBlocks {
    pub s11: UMat2,
    pub s12: UMat2,
    pub s21: UMat2,
    pub s22: UMat2,
}

impl SBlocks {
    pub fn assemble(&self) -> UMat4 {
        let mut m = UMat4::zeros();
        for (bi, bj, b) in [(0, 0, &self.s11), (0, 2, &self.s12), (2, 0, &self.s21), (2, 2, &self.s22)] {
            for i in 0..2 {
                for j in 0..2 {
                    m.0[bi + i][bj + j] = b.0[i][j];
                }
            }
        }
        m
    }
}

pub fn blocks(s: &UMat4) -> SBlocks {
    let take = |bi: usize, bj: usize| UMat2::new(s.0[bi][bj], s.0[bi][bj + 1], s.0[bi + 1][bj], s.0[bi + 1][bj + 1]);
    SBlocks { s11: take(0, 0), s12: take(0, 2), s21: take(2, 0), s22: take(2, 2) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxmat::eig_unitary;
    use crate::testutil::{random_params, random_unitary, rng};
    use std::f64::consts::PI;

    fn twisted() -> ScatterParams {
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

    #[test]
    fn zero_params_give_identity() {
        assert!(build_s0(&ScatterParams::default()).max_abs_diff(&UMat4::identity()) < 1e-15);
    }

    #[test]
    fn closed_centre_decouples_loops() {
        let p = ScatterParams { theta1: PI / 4.0, ..Default::default() };
        let s = build_s0(&p);
        let b = blocks(&s);
        assert!(b.s11.max_abs_diff(&rotation(PI / 4.0)) < 1e-15);
        assert!(b.s22.max_abs_diff(&UMat2::identity()) < 1e-15);
        assert!(b.s12.max_abs_diff(&UMat2::zeros()) == 0.0);
        assert!(b.s21.max_abs_diff(&UMat2::zeros()) == 0.0);
    }

    #[test]
    fn twisted_parameters_are_unitary() {
        assert!(build_s0(&twisted()).unitarity_defect() < 1e-12);
    }

    #[test]
    fn random_draws_are_unitary_with_unit_determinant() {
        let mut r = rng(10);
        for _ in 0..10_000 {
            let s = build_s0(&random_params(&mut r));
            assert!(s.unitarity_defect() < 1e-12);
        }
        let s = build_s0(&random_params(&mut r));
        assert!((s.det() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn gamma_zero_is_identity_map_and_pi_flips_upper_rows() {
        let mut r = rng(11);
        let s0 = build_s0(&random_params(&mut r));
        assert_eq!(apply_gamma(&s0, 0.0), s0);
        let s = apply_gamma(&s0, PI);
        for i in 0..4 {
            for j in 0..4 {
                assert!((s.0[i][j] + s0.0[i][j]).norm() < 1e-15);
            }
        }
        // The spectrum of S itself is only shifted by π, so its eigenphase
        // multiset is preserved modulo π.
        let e0 = eig_unitary(&s0).unwrap();
        let e1 = eig_unitary(&s).unwrap();
        let key = |t: f64| t.rem_euclid(PI);
        let mut a: Vec<f64> = e0.phases.iter().map(|&t| key(t)).collect();
        let mut b: Vec<f64> = e1.phases.iter().map(|&t| key(t)).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            let d = (x - y).abs();
            assert!(d.min(PI - d) < 1e-9);
        }
    }

    #[test]
    fn gamma_shifts_block_determinant_phases() {
        let mut r = rng(12);
        let s0 = build_s0(&random_params(&mut r));
        let g = 0.37;
        let marker = |s: &UMat4| {
            let b = blocks(s);
            (b.s11.det2().arg() - b.s22.det2().arg()) / 4.0
        };
        let shift = marker(&apply_gamma(&s0, g)) - marker(&s0);
        let d = (shift - g).rem_euclid(PI / 2.0);
        assert!(d.min(PI / 2.0 - d) < 1e-12);
    }

    #[test]
    fn block_examples() {
        let b = blocks(&UMat4::identity());
        assert_eq!(b.s11, UMat2::identity());
        assert_eq!(b.s22, UMat2::identity());
        assert_eq!(b.s12, UMat2::zeros());

        let p = ScatterParams { alpha: PI / 2.0, beta: PI / 2.0, ..Default::default() };
        let b = blocks(&build_s0(&p));
        assert!(b.s11.max_abs_diff(&UMat2::zeros()) < 1e-15);
        assert!(b.s22.max_abs_diff(&UMat2::zeros()) < 1e-15);
        assert!(b.s12.max_abs_diff(&UMat2::identity()) < 1e-15);
        assert!(b.s21.max_abs_diff(&-UMat2::identity()) < 1e-15);

        let mut r = rng(13);
        let u = random_unitary::<4>(&mut r);
        assert_eq!(blocks(&u).assemble(), u);
    }

    #[test]
    fn parse_parameter_file() {
        let text = "# twisted set\nalpha = 1.0\nbeta=0.3\ntheta1 = pi/4  # comment\nnu1 = 0.6\n\n";
        let p = ScatterParams::parse(text).unwrap();
        assert_eq!(p.alpha, 1.0);
        assert!((p.theta1 - PI / 4.0).abs() < 1e-15);
        assert_eq!(p.nu1, 0.6);
        assert!(matches!(ScatterParams::parse("zeta1 = 0"), Err(Error::Parse { line: 1, .. })));
        assert_eq!(ScatterParams::parse("alpha = 2\nscan.grid = 40").unwrap().alpha, 2.0);
    }

    #[test]
    fn param_names_round_trip() {
        for p in ParamName::ALL {
            assert_eq!(p.as_str().parse::<ParamName>().unwrap(), p);
        }
    }
}
