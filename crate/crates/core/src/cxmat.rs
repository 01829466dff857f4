//! Small dense complex matrices: products, determinants, unitary eigensystems
//! and the Pauli decomposition of 2×2 unitaries.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Cx = Complex64;

/// Unitarity tolerance applied to inputs of the eigensolver and `pauli_log`.
pub const UNITARY_TOL: f64 = 1e-9;

const QR_SWEEPS_PER_EIGENVALUE: usize = 40;

/// Unit-modulus complex number e^{it}.
#[inline]
pub fn cis(t: f64) -> Cx {
    Cx::new(t.cos(), t.sin())
}

/// Reduce an angle to (−π, π].
pub fn wrap_pi(x: f64) -> f64 {
    let t = (x + PI).rem_euclid(TAU) - PI;
    if t <= -PI {
        t + TAU
    } else {
        t
    }
}

/// Reduce an angle to [0, 2π).
pub fn wrap_tau(x: f64) -> f64 {
    let t = x.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize>(pub [[Cx; N]; N]);

pub type UMat2 = CMat<2>;
pub type UMat4 = CMat<4>;

impl<const N: usize> CMat<N> {
    pub fn zeros() -> Self {
        CMat([[Cx::new(0.0, 0.0); N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = Cx::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(d: [Cx; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn scale(&self, z: Cx) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|e| *e *= z);
        m
    }

    pub fn trace(&self) -> Cx {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    pub fn mul_vec(&self, v: &[Cx; N]) -> [Cx; N] {
        let mut out = [Cx::new(0.0, 0.0); N];
        for i in 0..N {
            out[i] = (0..N).map(|j| self.0[i][j] * v[j]).sum();
        }
        out
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> Cx {
        let mut a = self.0;
        let mut det = Cx::new(1.0, 0.0);
        for col in 0..N {
            let pivot = (col..N).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm())).unwrap();
            if a[pivot][col].norm() == 0.0 {
                return Cx::new(0.0, 0.0);
            }
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            let p = a[col][col];
            det *= p;
            for row in col + 1..N {
                let f = a[row][col] / p;
                for j in col..N {
                    let v = a[col][j];
                    a[row][j] -= f * v;
                }
            }
        }
        det
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().flatten().zip(other.0.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest entry of |M M† − I|.
    pub fn unitarity_defect(&self) -> f64 {
        (*self * self.adjoint()).max_abs_diff(&Self::identity())
    }

    pub fn assert_unitary(self, tol: f64) -> Result<Self> {
        let defect = self.unitarity_defect();
        if defect.is_finite() && defect <= tol {
            Ok(self)
        } else {
            Err(Error::NonUnitary { defect })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<const N: usize> Index<(usize, usize)> for CMat<N> {
    type Output = Cx;
    fn index(&self, (i, j): (usize, usize)) -> &Cx {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for CMat<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Mul for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                for j in 0..N {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}

impl<const N: usize> Add for CMat<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] += rhs.0[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Sub for CMat<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Neg for CMat<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(Cx::new(-1.0, 0.0))
    }
}

/// Exact matrix product.
pub fn mul<const N: usize>(a: &CMat<N>, b: &CMat<N>) -> CMat<N> {
    *a * *b
}

pub fn adjoint<const N: usize>(a: &CMat<N>) -> CMat<N> {
    a.adjoint()
}

impl UMat2 {
    pub fn new(a: Cx, b: Cx, c: Cx, d: Cx) -> Self {
        CMat([[a, b], [c, d]])
    }

    pub fn det2(&self) -> Cx {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Closed-form inverse; `None` when the determinant vanishes exactly.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det2();
        if det.norm() == 0.0 {
            return None;
        }
        let r = det.inv();
        let [[a, b], [c, d]] = self.0;
        Some(UMat2::new(d * r, -b * r, -c * r, a * r))
    }
}

/// Eigenphases and orthonormal eigenvectors of a unitary 4×4 matrix.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// θ_j ∈ (−π, π], eigenvalue e^{iθ_j}.
    pub phases: [f64; 4],
    /// `vectors[j]` belongs to `phases[j]`.
    pub vectors: [[Cx; 4]; 4],
}

impl EigenSystem {
    /// Σ_j e^{iθ_j} v_j v_j†.
    pub fn reconstruct(&self) -> UMat4 {
        let mut m = UMat4::zeros();
        for (t, v) in self.phases.iter().zip(&self.vectors) {
            let l = cis(*t);
            for i in 0..4 {
                for j in 0..4 {
                    m.0[i][j] += l * v[i] * v[j].conj();
                }
            }
        }
        m
    }
}

/// Eigen-decomposition of a unitary 4×4 matrix.
///
/// Uses a Hessenberg reduction followed by shifted complex QR. For a normal
/// matrix the Schur form is diagonal, so the Schur vectors are eigenvectors and
/// degenerate eigenvalues come with an orthonormal basis of their subspace.
pub fn eig_unitary(m: &UMat4) -> Result<EigenSystem> {
    m.assert_unitary(UNITARY_TOL)?;
    eig_unitary_unchecked(m)
}

pub(crate) fn eig_unitary_unchecked(m: &UMat4) -> Result<EigenSystem> {
    let (q, t) = schur(m)?;
    let mut phases = [0.0; 4];
    let mut vectors = [[Cx::new(0.0, 0.0); 4]; 4];
    for j in 0..4 {
        phases[j] = wrap_pi(t.0[j][j].arg());
        for i in 0..4 {
            vectors[j][i] = q.0[i][j];
        }
    }
    Ok(EigenSystem { phases, vectors })
}

/// Complex Schur decomposition m = Q T Q† with T upper triangular.
pub fn schur<const N: usize>(m: &CMat<N>) -> Result<(CMat<N>, CMat<N>)> {
    let mut h = *m;
    let mut q = CMat::<N>::identity();
    hessenberg(&mut h, &mut q);

    let cap = QR_SWEEPS_PER_EIGENVALUE * N;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = N - 1;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = h.0[lo][lo - 1].norm();
            let diag = h.0[lo][lo].norm() + h.0[lo - 1][lo - 1].norm();
            if sub <= f64::EPSILON * diag.max(f64::MIN_POSITIVE) {
                h.0[lo][lo - 1] = Cx::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > cap {
            return Err(Error::NoConvergence { iterations: total });
        }
        let shift = if since_deflation % 11 == 10 {
            h.0[hi][hi] + Cx::new(0.75 * h.0[hi][hi - 1].norm(), 0.0)
        } else {
            wilkinson_shift(h.0[hi - 1][hi - 1], h.0[hi - 1][hi], h.0[hi][hi - 1], h.0[hi][hi])
        };
        qr_sweep(&mut h, &mut q, lo, hi, shift);
    }
    Ok((q, h))
}

fn wilkinson_shift(a: Cx, b: Cx, c: Cx, d: Cx) -> Cx {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (l1, l2) = (mid + disc, mid - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg<const N: usize>(h: &mut CMat<N>, q: &mut CMat<N>) {
    for k in 0..N.saturating_sub(2) {
        let tail: f64 = (k + 2..N).map(|i| h.0[i][k].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = h.0[k + 1][k];
        let alpha = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Cx::new(1.0, 0.0) };
        let mut v = [Cx::new(0.0, 0.0); N];
        for i in k + 1..N {
            v[i] = h.0[i][k];
        }
        v[k + 1] += phase * alpha;
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        // P = I − 2 v v† / |v|², applied as P H P and Q P.
        for j in 0..N {
            let s: Cx = (k + 1..N).map(|i| v[i].conj() * h.0[i][j]).sum::<Cx>() * (2.0 / vn);
            for i in k + 1..N {
                h.0[i][j] -= v[i] * s;
            }
        }
        for mat in [&mut *h, &mut *q] {
            for i in 0..N {
                let s: Cx = (k + 1..N).map(|j| mat.0[i][j] * v[j]).sum::<Cx>() * (2.0 / vn);
                for j in k + 1..N {
                    mat.0[i][j] -= s * v[j].conj();
                }
            }
        }
    }
}

/// One explicitly shifted QR step on the active window `lo..=hi`.
fn qr_sweep<const N: usize>(h: &mut CMat<N>, q: &mut CMat<N>, lo: usize, hi: usize, shift: Cx) {
    for i in 0..N {
        h.0[i][i] -= shift;
    }
    let mut rots = [(Cx::new(1.0, 0.0), Cx::new(0.0, 0.0)); N];
    for k in lo..hi {
        let (x, y) = (h.0[k][k], h.0[k + 1][k]);
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (gx, gy) = if r == 0.0 { (Cx::new(1.0, 0.0), Cx::new(0.0, 0.0)) } else { (x / r, y / r) };
        // G = [[x̄, ȳ], [−y, x]] / r maps (x, y) to (r, 0).
        for j in 0..N {
            let (a, b) = (h.0[k][j], h.0[k + 1][j]);
            h.0[k][j] = gx.conj() * a + gy.conj() * b;
            h.0[k + 1][j] = -gy * a + gx * b;
        }
        rots[k] = (gx, gy);
    }
    for k in lo..hi {
        let (gx, gy) = rots[k];
        for mat in [&mut *h, &mut *q] {
            for i in 0..N {
                let (a, b) = (mat.0[i][k], mat.0[i][k + 1]);
                mat.0[i][k] = a * gx + b * gy;
                mat.0[i][k + 1] = -a * gy.conj() + b * gx.conj();
            }
        }
    }
    for i in 0..N {
        h.0[i][i] += shift;
    }
}

/// m = exp(i(h₀ I + σ⃗·h⃗)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliDecomp {
    pub h0: f64,
    pub h: [f64; 3],
}

impl PauliDecomp {
    pub fn norm(&self) -> f64 {
        self.h.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn exp(&self) -> UMat2 {
        pauli_exp(self.h0, self.h)
    }
}

pub fn pauli_exp(h0: f64, h: [f64; 3]) -> UMat2 {
    let r = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    let (c, s) = (r.cos(), if r > 0.0 { r.sin() / r } else { 1.0 });
    let i = Cx::new(0.0, 1.0);
    let (n1, n2, n3) = (h[0] * s, h[1] * s, h[2] * s);
    UMat2::new(Cx::new(c, 0.0) + i * n3, i * n1 + Cx::new(n2, 0.0), i * n1 - Cx::new(n2, 0.0), Cx::new(c, 0.0) - i * n3).scale(cis(h0))
}

/// Pauli logarithm of a 2×2 unitary.
///
/// Branch: h₀ = arg(det m)/2 ∈ (−π/2, π/2] and ‖h⃗‖ ∈ [0, π]. When m is −e^{ih₀}
/// times the identity the direction of h⃗ is undefined; that case returns
/// h⃗ = 0 with h₀ moved by π.
pub fn pauli_log(m: &UMat2) -> Result<PauliDecomp> {
    m.assert_unitary(UNITARY_TOL)?;
    Ok(pauli_log_unchecked(m))
}

pub(crate) fn pauli_log_unchecked(m: &UMat2) -> PauliDecomp {
    let h0 = m.det2().arg() / 2.0;
    let su = m.scale(cis(-h0));
    let [[a, b], [c, d]] = su.0;
    let cos = 0.5 * (a + d).re;
    let n = [0.5 * (b + c).im, 0.5 * (b - c).re, 0.5 * (a - d).im];
    let sin = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if sin == 0.0 {
        if cos < 0.0 {
            return PauliDecomp { h0: wrap_pi(h0 + PI), h: [0.0; 3] };
        }
        return PauliDecomp { h0, h: [0.0; 3] };
    }
    let theta = sin.atan2(cos);
    let f = theta / sin;
    PauliDecomp { h0, h: [n[0] * f, n[1] * f, n[2] * f] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_unitary, rng};

    fn cx(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    fn swap() -> UMat2 {
        UMat2::new(cx(0.0, 0.0), cx(1.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0))
    }

    // Leibniz expansion, independent of the elimination in `det`.
    fn cofactor_det4(m: &UMat4) -> Cx {
        fn det3(a: [[Cx; 3]; 3]) -> Cx {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        let mut total = cx(0.0, 0.0);
        for col in 0..4 {
            let mut minor = [[cx(0.0, 0.0); 3]; 3];
            for i in 1..4 {
                let mut jj = 0;
                for j in 0..4 {
                    if j != col {
                        minor[i - 1][jj] = m.0[i][j];
                        jj += 1;
                    }
                }
            }
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            total += m.0[0][col] * det3(minor) * sign;
        }
        total
    }

    #[test]
    fn identity_products() {
        let i4 = UMat4::identity();
        assert_eq!(mul(&i4, &i4), i4);
        let s = swap();
        assert_eq!(s * s, UMat2::identity());
    }

    #[test]
    fn random_unitary_times_adjoint() {
        let mut r = rng(1);
        for _ in 0..50 {
            let u = random_unitary::<4>(&mut r);
            assert!(mul(&u, &adjoint(&u)).max_abs_diff(&UMat4::identity()) < 1e-12);
        }
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let mut r = rng(2);
        for _ in 0..50 {
            let u = random_unitary::<4>(&mut r);
            let m = u + UMat4::identity().scale(cx(0.3, -0.2));
            assert!((m.det() - cofactor_det4(&m)).norm() < 1e-12);
        }
    }

    #[test]
    fn swap_blocks_have_phases_zero_and_pi() {
        let mut m = UMat4::zeros();
        m.0[0][1] = cx(1.0, 0.0);
        m.0[1][0] = cx(1.0, 0.0);
        m.0[2][3] = cx(1.0, 0.0);
        m.0[3][2] = cx(1.0, 0.0);
        let e = eig_unitary(&m).unwrap();
        let mut p: Vec<f64> = e.phases.iter().map(|t| t.abs()).collect();
        p.sort_by(f64::total_cmp);
        for (got, want) in p.iter().zip([0.0, 0.0, PI, PI]) {
            assert!((got - want).abs() < 1e-12, "{p:?}");
        }
        assert!(e.reconstruct().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn eigen_product_is_determinant() {
        let mut r = rng(3);
        for _ in 0..100 {
            let u = random_unitary::<4>(&mut r);
            let e = eig_unitary(&u).unwrap();
            let prod = cis(e.phases.iter().sum());
            assert!((prod - cofactor_det4(&u)).norm() < 1e-10);
        }
    }

    #[test]
    fn eigen_residuals_and_orthonormality() {
        let mut r = rng(4);
        for _ in 0..200 {
            let u = random_unitary::<4>(&mut r);
            let e = eig_unitary(&u).unwrap();
            for (t, v) in e.phases.iter().zip(&e.vectors) {
                let mv = u.mul_vec(v);
                let l = cis(*t);
                assert!(mv.iter().zip(v).all(|(a, b)| (a - l * b).norm() < 1e-9));
            }
            for a in 0..4 {
                for b in 0..4 {
                    let dot: Cx = (0..4).map(|i| e.vectors[a][i].conj() * e.vectors[b][i]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).norm() < 1e-9);
                }
            }
            assert!(e.reconstruct().max_abs_diff(&u) < 1e-8);
        }
    }

    #[test]
    fn degenerate_spectrum_gets_orthonormal_basis() {
        let mut r = rng(5);
        for _ in 0..50 {
            let v = random_unitary::<4>(&mut r);
            let d = UMat4::from_diag([cis(0.4), cis(0.4), cis(0.4), cis(-2.0)]);
            let m = v * d * v.adjoint();
            let e = eig_unitary(&m).unwrap();
            assert!(e.reconstruct().max_abs_diff(&m) < 1e-10);
            let mut p = e.phases;
            p.sort_by(f64::total_cmp);
            assert!((p[0] + 2.0).abs() < 1e-10 && p[1..].iter().all(|t| (t - 0.4).abs() < 1e-10));
        }
    }

    #[test]
    fn non_unitary_is_rejected() {
        let m = UMat4::identity().scale(cx(1.1, 0.0));
        assert!(matches!(eig_unitary(&m), Err(Error::NonUnitary { .. })));
        assert!(matches!(pauli_log(&UMat2::zeros()), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn pauli_log_examples() {
        let p = pauli_log(&UMat2::identity()).unwrap();
        assert_eq!((p.h0, p.h), (0.0, [0.0; 3]));

        let a = 0.7;
        let p = pauli_log(&UMat2::from_diag([cis(a), cis(-a)])).unwrap();
        assert!(p.h0.abs() < 1e-15);
        assert!((p.h[2] - a).abs() < 1e-14 && p.h[0].abs() < 1e-15 && p.h[1].abs() < 1e-15);

        let p = pauli_log(&swap()).unwrap();
        assert!((p.h0 - PI / 2.0).abs() < 1e-14);
        assert!((p.h[0] + PI / 2.0).abs() < 1e-14 && p.h[1].abs() < 1e-14 && p.h[2].abs() < 1e-14);
        assert!(p.exp().max_abs_diff(&swap()) < 1e-14);
    }

    #[test]
    fn pauli_log_round_trip() {
        let mut r = rng(6);
        for _ in 0..1000 {
            let u = random_unitary::<2>(&mut r);
            let p = pauli_log(&u).unwrap();
            assert!(p.exp().max_abs_diff(&u) < 1e-8);
            assert!(p.norm() <= PI + 1e-12);
        }
    }

    #[test]
    fn wrap_conventions() {
        assert_eq!(wrap_pi(-PI), PI);
        assert_eq!(wrap_pi(PI), PI);
        assert!((wrap_pi(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!(wrap_tau(-0.5) > 0.0 && wrap_tau(TAU) == 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn exp_log_round_trip(h0 in -1.5f64..1.5, x in -1.8f64..1.8, y in -1.8f64..1.8, z in -1.8f64..1.8) {
                let m = pauli_exp(h0, [x, y, z]);
                let p = pauli_log(&m).unwrap();
                prop_assert!(p.exp().max_abs_diff(&m) < 1e-10);
            }

            #[test]
            fn inverse_is_inverse(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in 0.5f64..2.0) {
                let m = UMat2::new(cx(d, a), cx(b, 0.1), cx(c, -0.3), cx(a, d));
                prop_assume!(m.det2().norm() > 1e-3);
                let inv = m.inverse().unwrap();
                prop_assert!((m * inv).max_abs_diff(&UMat2::identity()) < 1e-9);
            }
        }
    }
}
