//! Small dense unitary matrices: the Lie algebra basis, exponentials, Haar and
//! heat-kernel samplers, and finite-difference Casimir and carré-du-champ
//! operators acting on functions of a single group element.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default finite-difference step.
pub const DEFAULT_EPS: f64 = 1e-3;
/// Default heat-kernel time step.
pub const DEFAULT_DT: f64 = 1e-3;

pub fn identity(d: usize) -> Mat {
    Mat::identity(d, d)
}

pub fn trace(m: &Mat) -> Complex64 {
    m.trace()
}

/// `max |U U* - I|`.
pub fn unitary_defect(m: &Mat) -> f64 {
    let d = m.nrows();
    let p = m * m.adjoint();
    (p - identity(d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |W + W*|`.
pub fn antihermitian_defect(w: &Mat) -> f64 {
    (w + w.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Nearest unitary in the polar decomposition.
pub fn reunitarize(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let v_t = svd.v_t.expect("right singular vectors");
    u * v_t
}

/// Orthonormal basis of `u(d)` under `<A, B> = Tr(A B*)`: the diagonal
/// elements `i E_jj`, then `(E_ij - E_ji)/sqrt 2`, then `i (E_ij + E_ji)/sqrt 2`
/// for `i < j`.
pub fn lie_basis(d: usize) -> Vec<Mat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        let mut w = Mat::zeros(d, d);
        w[(j, j)] = I;
        out.push(w);
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut w = Mat::zeros(d, d);
            w[(i, j)] = Complex64::new(s, 0.0);
            w[(j, i)] = Complex64::new(-s, 0.0);
            out.push(w);
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut w = Mat::zeros(d, d);
            w[(i, j)] = Complex64::new(0.0, s);
            w[(j, i)] = Complex64::new(0.0, s);
            out.push(w);
        }
    }
    out
}

/// `exp(scale * W)` for antihermitian `W`.
pub fn expm(w: &Mat, scale: f64) -> Result<Mat> {
    let defect = antihermitian_defect(w);
    if defect > 1e-10 {
        return Err(Error::NotAntihermitian(defect));
    }
    Ok(expm_unchecked(w, scale))
}

pub(crate) fn expm_unchecked(w: &Mat, scale: f64) -> Mat {
    match w.nrows() {
        0 => Mat::zeros(0, 0),
        1 => Mat::from_element(1, 1, Complex64::from_polar(1.0, scale * w[(0, 0)].im)),
        2 => expm_2(w, scale),
        _ => expm_eigen(w, scale),
    }
}

/// `exp(s W) = exp(i s H)` with `H = -iW = h0 I + K`, `K` traceless Hermitian,
/// `K^2 = r^2 I`: `e^{i s h0} (cos(s r) I + i sin(s r)/r K)`.
fn expm_2(w: &Mat, s: f64) -> Mat {
    let h00 = w[(0, 0)].im;
    let h11 = w[(1, 1)].im;
    let h01 = -I * w[(0, 1)];
    let h0 = 0.5 * (h00 + h11);
    let hz = 0.5 * (h00 - h11);
    let r = (hz * hz + h01.norm_sqr()).sqrt();
    let c = (s * r).cos();
    let sinc = if r * s.abs() < 1e-8 { s * (1.0 - (s * r).powi(2) / 6.0) } else { (s * r).sin() / r };
    let phase = Complex64::from_polar(1.0, s * h0);
    let is = I * sinc;
    Mat::from_row_slice(
        2,
        2,
        &[
            phase * (c + is * hz),
            phase * is * h01,
            phase * is * h01.conj(),
            phase * (c - is * hz),
        ],
    )
}

fn expm_eigen(w: &Mat, s: f64) -> Mat {
    let h = w.map(|z| -I * z);
    let eig = h.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, s * l));
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * v.adjoint()
}

/// `sum_l xi_l W_l` with independent standard normal `xi_l`, times `scale`.
pub fn random_algebra<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> Mat {
    let s = scale * std::f64::consts::FRAC_1_SQRT_2;
    let mut x = Mat::zeros(d, d);
    for j in 0..d {
        let xi: f64 = rng.sample(StandardNormal);
        x[(j, j)] = Complex64::new(0.0, scale * xi);
    }
    for i in 0..d {
        for j in i + 1..d {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            x[(i, j)] = Complex64::new(s * a, s * b);
            x[(j, i)] = Complex64::new(-s * a, s * b);
        }
    }
    x
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Mat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = Mat::from_fn(d, d, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        Complex64::new(s * a, s * b)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        if n > 0.0 {
            col *= rjj / n;
        }
    }
    q
}

pub fn default_steps(t: f64) -> usize {
    (t / DEFAULT_DT).ceil().max(0.0) as usize
}

/// Brownian motion on U(d) with generator `sum_l L_{W_l}^2`:
/// `g <- exp(sqrt(2 dt) sum_l xi_l W_l) g`, `dt = t / steps`.
pub fn heat_sample<R: Rng + ?Sized>(g0: &Mat, t: f64, steps: usize, rng: &mut R) -> Mat {
    if t <= 0.0 || steps == 0 {
        return g0.clone();
    }
    let d = g0.nrows();
    let scale = (2.0 * t / steps as f64).sqrt();
    let mut g = g0.clone();
    for step in 1..=steps {
        let x = random_algebra(d, scale, rng);
        g = expm_unchecked(&x, 1.0) * g;
        if step % 256 == 0 && unitary_defect(&g) > 1e-10 {
            g = reunitarize(&g);
        }
    }
    if unitary_defect(&g) > 1e-10 {
        g = reunitarize(&g);
    }
    g
}

/// `sum_l [f(e^{eps W_l} g) + f(e^{-eps W_l} g) - 2 f(g)] / eps^2`.
pub fn fd_casimir<F>(f: F, g: &Mat, eps: f64) -> Complex64
where
    F: Fn(&Mat) -> Complex64,
{
    let f0 = f(g);
    let mut acc = Complex64::new(0.0, 0.0);
    for w in lie_basis(g.nrows()) {
        let plus = f(&(expm_unchecked(&w, eps) * g));
        let minus = f(&(expm_unchecked(&w, -eps) * g));
        acc += plus + minus - 2.0 * f0;
    }
    acc / (eps * eps)
}

/// `sum_l D_l f1(g) D_l f2(g)` with central first differences.
pub fn fd_gamma<F1, F2>(f1: F1, f2: F2, g: &Mat, eps: f64) -> Complex64
where
    F1: Fn(&Mat) -> Complex64,
    F2: Fn(&Mat) -> Complex64,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for w in lie_basis(g.nrows()) {
        let gp = expm_unchecked(&w, eps) * g;
        let gm = expm_unchecked(&w, -eps) * g;
        let d1 = (f1(&gp) - f1(&gm)) / (2.0 * eps);
        let d2 = (f2(&gp) - f2(&gm)) / (2.0 * eps);
        acc += d1 * d2;
    }
    acc
}

/// The trace functions of a single group element and their closed-form
/// second-order identities.
pub mod lemma {
    use super::*;

    pub fn t(g: &Mat, a: &Mat) -> Complex64 {
        (g * a).trace()
    }

    pub fn r(g: &Mat, a: &Mat) -> Complex64 {
        (g.adjoint() * a).trace()
    }

    pub fn u(g: &Mat, a: &Mat, b: &Mat) -> Complex64 {
        (g * a * g * b).trace()
    }

    pub fn v(g: &Mat, a: &Mat, b: &Mat) -> Complex64 {
        let gs = g.adjoint();
        (&gs * a * &gs * b).trace()
    }

    pub fn w(g: &Mat, a: &Mat, b: &Mat) -> Complex64 {
        (g * a * g.adjoint() * b).trace()
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Identity {
        CasimirT,
        CasimirR,
        CasimirU,
        CasimirV,
        CasimirW,
        GammaTT,
        GammaRR,
        GammaTR,
    }

    pub const ALL: [Identity; 8] = [
        Identity::CasimirT,
        Identity::CasimirR,
        Identity::CasimirU,
        Identity::CasimirV,
        Identity::CasimirW,
        Identity::GammaTT,
        Identity::GammaRR,
        Identity::GammaTR,
    ];

    impl Identity {
        pub fn name(self) -> &'static str {
            match self {
                Identity::CasimirT => "casimir_t",
                Identity::CasimirR => "casimir_r",
                Identity::CasimirU => "casimir_u",
                Identity::CasimirV => "casimir_v",
                Identity::CasimirW => "casimir_w",
                Identity::GammaTT => "gamma_t_t",
                Identity::GammaRR => "gamma_r_r",
                Identity::GammaTR => "gamma_t_r",
            }
        }

        /// Value of the closed form at `(g, a, b)`.
        pub fn closed_form(self, g: &Mat, a: &Mat, b: &Mat) -> Complex64 {
            let d = g.nrows() as f64;
            match self {
                Identity::CasimirT => -d * t(g, a),
                Identity::CasimirR => -d * r(g, a),
                Identity::CasimirU => -2.0 * d * u(g, a, b) - 2.0 * t(g, a) * t(g, b),
                Identity::CasimirV => -2.0 * d * v(g, a, b) - 2.0 * r(g, a) * r(g, b),
                Identity::CasimirW => -2.0 * d * w(g, a, b) + 2.0 * a.trace() * b.trace(),
                Identity::GammaTT => -u(g, a, b),
                Identity::GammaRR => -v(g, a, b),
                Identity::GammaTR => (a * b).trace(),
            }
        }

        /// Finite-difference evaluation of the left-hand side.
        pub fn finite_difference(self, g: &Mat, a: &Mat, b: &Mat, eps: f64) -> Complex64 {
            match self {
                Identity::CasimirT => fd_casimir(|h| t(h, a), g, eps),
                Identity::CasimirR => fd_casimir(|h| r(h, a), g, eps),
                Identity::CasimirU => fd_casimir(|h| u(h, a, b), g, eps),
                Identity::CasimirV => fd_casimir(|h| v(h, a, b), g, eps),
                Identity::CasimirW => fd_casimir(|h| w(h, a, b), g, eps),
                Identity::GammaTT => fd_gamma(|h| t(h, a), |h| t(h, b), g, eps),
                Identity::GammaRR => fd_gamma(|h| r(h, a), |h| r(h, b), g, eps),
                Identity::GammaTR => fd_gamma(|h| t(h, a), |h| r(h, b), g, eps),
            }
        }
    }
}

/// `|x - y| / max(1, |y|)`.
pub fn relative_error(x: Complex64, y: Complex64) -> f64 {
    (x - y).norm() / y.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &Mat) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn basis_identities() {
        for d in 1..=4 {
            let b = lie_basis(d);
            assert_eq!(b.len(), d * d);
            let sum: Mat = b.iter().fold(Mat::zeros(d, d), |acc, w| acc + w * w);
            assert!(max_abs(&(sum + identity(d) * Complex64::from(d as f64))) < 1e-13);
            for (i, x) in b.iter().enumerate() {
                assert!(antihermitian_defect(x) < 1e-15);
                for (j, y) in b.iter().enumerate() {
                    let g = (x * y.adjoint()).trace();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - Complex64::from(expect)).norm() < 1e-14);
                }
            }
        }
        assert_eq!(lie_basis(1)[0][(0, 0)], I);
    }

    #[test]
    fn expm_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=4 {
            for _ in 0..50 {
                let w = random_algebra(d, 1.3, &mut rng);
                let s = rng.random_range(-2.0..2.0);
                let e = expm(&w, s).unwrap();
                assert!(unitary_defect(&e) < 1e-12);
                assert!(max_abs(&(&e * expm(&w, -s).unwrap() - identity(d))) < 1e-12);
                if d <= 2 {
                    assert!(max_abs(&(e - expm_eigen(&w, s))) < 1e-12);
                }
            }
            assert!(max_abs(&(expm(&Mat::zeros(d, d), 1.0).unwrap() - identity(d))) < 1e-15);
        }
        let theta = 0.7;
        let e = expm(&Mat::from_element(1, 1, Complex64::new(0.0, theta)), 1.0).unwrap();
        assert!((e[(0, 0)] - Complex64::new(theta.cos(), theta.sin())).norm() < 1e-15);
        let bad = Mat::from_element(1, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(expm(&bad, 1.0), Err(Error::NotAntihermitian(_))));
    }

    #[test]
    fn haar_samples_are_unitary_with_haar_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = 2;
        let n = 100_000;
        let mut tr = Vec::with_capacity(n);
        for _ in 0..n {
            let u = haar_sample(d, &mut rng);
            assert!(unitary_defect(&u) < 1e-12);
            tr.push(u.trace());
        }
        let mean = tr.iter().sum::<Complex64>() / n as f64;
        let sq: Vec<f64> = tr.iter().map(|z| z.norm_sqr()).collect();
        let m2 = sq.iter().sum::<f64>() / n as f64;
        let var2 = sq.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / (n - 1) as f64;
        // E|Tr U|^2 = 1, so each component of Tr U has variance 1/2
        let se1 = (0.5 / n as f64).sqrt();
        assert!(mean.re.abs() < 4.0 * se1 && mean.im.abs() < 4.0 * se1, "{mean}");
        assert!((m2 - 1.0).abs() < 4.0 * (var2 / n as f64).sqrt(), "{m2}");
    }

    #[test]
    fn heat_mean_decays() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = 2;
        let t = 0.2;
        let g0 = haar_sample(d, &mut rng);
        let n = 10_000;
        let steps = 50;
        let mut acc = Mat::zeros(d, d);
        let mut acc2 = Mat::zeros(d, d);
        for _ in 0..n {
            let g = heat_sample(&g0, t, steps, &mut rng);
            acc2 += g.map(|z| Complex64::new(z.re * z.re, z.im * z.im));
            acc += g;
        }
        let mean = acc / Complex64::from(n as f64);
        let expect = &g0 * Complex64::from((-(d as f64) * t).exp());
        for i in 0..d {
            for j in 0..d {
                let m = mean[(i, j)];
                let var_re = acc2[(i, j)].re / n as f64 - m.re * m.re;
                let var_im = acc2[(i, j)].im / n as f64 - m.im * m.im;
                let e = expect[(i, j)];
                // O(dt) discretisation bias is far below the statistical error here
                assert!((m.re - e.re).abs() < 4.0 * (var_re / n as f64).sqrt() + 1e-3);
                assert!((m.im - e.im).abs() < 4.0 * (var_im / n as f64).sqrt() + 1e-3);
            }
        }
        assert_eq!(heat_sample(&g0, 0.0, 0, &mut rng), g0);
    }

    #[test]
    fn lemma_identities_hold_under_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for d in 1..=3 {
            for _ in 0..10 {
                let g = haar_sample(d, &mut rng);
                let a = haar_sample(d, &mut rng);
                let b = haar_sample(d, &mut rng);
                for id in lemma::ALL {
                    let fd = id.finite_difference(&g, &a, &b, DEFAULT_EPS);
                    let exact = id.closed_form(&g, &a, &b);
                    assert!(relative_error(fd, exact) < 1e-5, "{} d={d}: {fd} vs {exact}", id.name());
                }
            }
        }
        // w vanishes under the Casimir when a = b = I
        let g = haar_sample(3, &mut rng);
        let id = identity(3);
        assert!(lemma::Identity::CasimirW.finite_difference(&g, &id, &id, DEFAULT_EPS).norm() < 1e-5);
    }

    #[test]
    fn one_dimensional_casimir_is_second_derivative() {
        let f = |m: &Mat| {
            let z = m[(0, 0)];
            z + z.conj() * 2.0 + z * z.conj()
        };
        let omega: f64 = 0.4;
        let g = Mat::from_element(1, 1, Complex64::from_polar(1.0, omega));
        // f(e^{iw}) = e^{iw} + 2 e^{-iw} + 1
        let exact = -Complex64::from_polar(1.0, omega) - 2.0 * Complex64::from_polar(1.0, -omega);
        assert!((fd_casimir(f, &g, DEFAULT_EPS) - exact).norm() < 1e-6);
    }

    #[test]
    fn gamma_derivation_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let d = 2;
        let g = haar_sample(d, &mut rng);
        let a = haar_sample(d, &mut rng);
        let b = haar_sample(d, &mut rng);
        let c = haar_sample(d, &mut rng);
        let f1 = |h: &Mat| lemma::t(h, &a);
        let f2 = |h: &Mat| lemma::r(h, &b);
        let f3 = |h: &Mat| lemma::u(h, &c, &a);
        let lhs = fd_gamma(|h| f1(h) * f2(h), f3, &g, DEFAULT_EPS);
        let rhs = f2(&g) * fd_gamma(f1, f3, &g, DEFAULT_EPS) + f1(&g) * fd_gamma(f2, f3, &g, DEFAULT_EPS);
        assert!((lhs - rhs).norm() < 1e-5);
    }
}
