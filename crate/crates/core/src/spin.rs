//! Spin-1 algebra in the basis ordering (m = +1, 0, −1).

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

pub type Spinor = [Complex64; 3];
pub type Mat3 = [[Complex64; 3]; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Cartesian spin matrices (F_x, F_y, F_z).
pub fn spin_matrices() -> [Mat3; 3] {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let is = Complex64::new(0.0, FRAC_1_SQRT_2);
    let fx = [[ZERO, s, ZERO], [s, ZERO, s], [ZERO, s, ZERO]];
    let fy = [[ZERO, -is, ZERO], [is, ZERO, -is], [ZERO, is, ZERO]];
    let fz = [
        [ONE, ZERO, ZERO],
        [ZERO, ZERO, ZERO],
        [ZERO, ZERO, -ONE],
    ];
    [fx, fy, fz]
}

/// Unnormalized spin expectation ψ†Fψ and density ψ†ψ.
#[inline]
pub fn spin_density(psi: &Spinor) -> ([f64; 3], f64) {
    let [p, z, m] = *psi;
    let f_plus = std::f64::consts::SQRT_2 * (p.conj() * z + z.conj() * m);
    let np = p.norm_sqr();
    let nm = m.norm_sqr();
    ([f_plus.re, f_plus.im, np - nm], np + z.norm_sqr() + nm)
}

/// `(h·F + q F_z²) ψ`.
#[inline]
fn apply_spin_hamiltonian(h: [f64; 3], q: f64, psi: &Spinor) -> Spinor {
    let hp = Complex64::new(h[0], h[1]) * FRAC_1_SQRT_2;
    let hm = hp.conj();
    [
        (h[2] + q) * psi[0] + hm * psi[1],
        hp * psi[0] + hm * psi[2],
        hp * psi[1] + (q - h[2]) * psi[2],
    ]
}

/// `exp(−i·τ·(h·F + q F_z²)) ψ` where `τ` is the phase per unit of `h`/`q`.
///
/// Evaluated by a Taylor series of the action with scaling so that each
/// substep has norm ≤ 1/2; terms are summed until they fall below f64
/// resolution, so the result is unitary to rounding.
pub fn evolve_spin(psi: &Spinor, h: [f64; 3], q: f64, tau: f64) -> Spinor {
    let hn = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    let bound = tau.abs() * (hn + q.abs());
    if bound == 0.0 {
        return *psi;
    }
    let substeps = (bound / 0.5).ceil().max(1.0) as usize;
    let step = Complex64::new(0.0, -tau / substeps as f64);
    let mut out = *psi;
    for _ in 0..substeps {
        let mut term = out;
        let mut acc = out;
        let scale = norm_sqr(&out);
        for n in 1..40 {
            let ht = apply_spin_hamiltonian(h, q, &term);
            let c = step / n as f64;
            term = [c * ht[0], c * ht[1], c * ht[2]];
            for k in 0..3 {
                acc[k] += term[k];
            }
            if norm_sqr(&term) <= 1e-36 * scale {
                break;
            }
        }
        out = acc;
    }
    out
}

#[inline]
pub fn norm_sqr(psi: &Spinor) -> f64 {
    psi.iter().map(|c| c.norm_sqr()).sum()
}

#[inline]
pub fn mat_vec(m: &Mat3, v: &Spinor) -> Spinor {
    let mut out = [ZERO; 3];
    for (i, row) in m.iter().enumerate() {
        out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// n·F for a unit vector `n`.
pub fn axis_spin_matrix(n: [f64; 3]) -> Mat3 {
    let f = spin_matrices();
    let mut out = [[ZERO; 3]; 3];
    for (c, fc) in n.iter().zip(&f) {
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += *c * fc[i][j];
            }
        }
    }
    out
}

/// `exp(−i θ n·F)` using (n·F)³ = n·F for spin 1.
pub fn rotation_matrix(n: [f64; 3], theta: f64) -> Mat3 {
    let nf = axis_spin_matrix(n);
    let nf2 = mat_mul(&nf, &nf);
    let (s, c) = theta.sin_cos();
    let mut u = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { ONE } else { ZERO };
            u[i][j] = id - Complex64::new(0.0, s) * nf[i][j] + (c - 1.0) * nf2[i][j];
        }
    }
    u
}

/// SO(3) rotation of a vector by `theta` about unit axis `n` (right-handed).
pub fn rotate_vector(v: [f64; 3], n: [f64; 3], theta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    let dot = n[0] * v[0] + n[1] * v[1] + n[2] * v[2];
    let cross = [
        n[1] * v[2] - n[2] * v[1],
        n[2] * v[0] - n[0] * v[2],
        n[0] * v[1] - n[1] * v[0],
    ];
    std::array::from_fn(|i| v[i] * c + cross[i] * s + n[i] * dot * (1.0 - c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).norm() < tol))
    }

    fn commutator(a: &Mat3, b: &Mat3) -> Mat3 {
        let ab = mat_mul(a, b);
        let ba = mat_mul(b, a);
        std::array::from_fn(|i| std::array::from_fn(|j| ab[i][j] - ba[i][j]))
    }

    fn scaled(a: &Mat3, s: Complex64) -> Mat3 {
        std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
    }

    #[test]
    fn angular_momentum_algebra() {
        let [fx, fy, fz] = spin_matrices();
        let i = Complex64::i();
        assert!(close(&commutator(&fx, &fy), &scaled(&fz, i), 1e-15));
        assert!(close(&commutator(&fy, &fz), &scaled(&fx, i), 1e-15));
        assert!(close(&commutator(&fz, &fx), &scaled(&fy, i), 1e-15));
        // F² = 2
        let f2: Mat3 = {
            let (a, b, c) = (mat_mul(&fx, &fx), mat_mul(&fy, &fy), mat_mul(&fz, &fz));
            std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j] + c[i][j]))
        };
        let two: Mat3 = std::array::from_fn(|i| {
            std::array::from_fn(|j| if i == j { Complex64::new(2.0, 0.0) } else { ZERO })
        });
        assert!(close(&f2, &two, 1e-15));
    }

    #[test]
    fn density_matches_matrix_expectation() {
        let psi = [
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.5, 0.1),
            Complex64::new(0.25, 0.7),
        ];
        let (f, n) = spin_density(&psi);
        for (fc, m) in f.iter().zip(spin_matrices()) {
            let mv = mat_vec(&m, &psi);
            let e: Complex64 = psi.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
            assert!((e.re - fc).abs() < 1e-15 && e.im.abs() < 1e-15);
        }
        assert!((n - norm_sqr(&psi)).abs() < 1e-15);
    }

    #[test]
    fn evolve_spin_matches_rotation_for_pure_field() {
        // exp(−iτ h·F) is a rotation by τ|h| about ĥ
        let psi = [
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.5, 0.1),
            Complex64::new(0.25, 0.7),
        ];
        let h: [f64; 3] = [0.3, -1.2, 0.7];
        let hn = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        let n = [h[0] / hn, h[1] / hn, h[2] / hn];
        for tau in [1e-4, 0.3, 5.0] {
            let a = evolve_spin(&psi, h, 0.0, tau);
            let b = mat_vec(&rotation_matrix(n, tau * hn), &psi);
            for k in 0..3 {
                assert!((a[k] - b[k]).norm() < 1e-13, "tau={tau}");
            }
        }
    }

    #[test]
    fn evolve_spin_is_unitary_with_quadratic_term() {
        let psi = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.7),
            Complex64::new(0.5, 0.1),
        ];
        let n0 = norm_sqr(&psi);
        let out = evolve_spin(&psi, [0.4, 0.1, -0.3], 2.0, 3.7);
        assert!((norm_sqr(&out) - n0).abs() < 1e-14);
        // q alone: phases e^{-iτq} on m = ±1
        let out = evolve_spin(&psi, [0.0; 3], 2.0, 0.25);
        let ph = Complex64::from_polar(1.0, -0.5);
        assert!((out[0] - psi[0] * ph).norm() < 1e-15);
        assert!((out[1] - psi[1]).norm() < 1e-15);
        assert!((out[2] - psi[2] * ph).norm() < 1e-15);
    }

    #[test]
    fn rotation_of_vector_is_right_handed() {
        let v = rotate_vector([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        assert!((v[1] - 1.0).abs() < 1e-15 && v[0].abs() < 1e-15);
    }
}
