use super::{DMat, C64, I, ZERO};

pub fn kron_dense(a: &DMat, b: &DMat) -> DMat {
    a.kronecker(b)
}

pub fn hermitian_deviation(m: &DMat) -> f64 {
    (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &DMat) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `exp(s H)` for Hermitian `H` and complex scalar `s`.
pub fn hermitian_expm(h: &DMat, s: C64) -> DMat {
    let herm = (h + h.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let v = &eig.eigenvectors;
    let d = DMat::from_diagonal(&nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| (s * l).exp()),
    ));
    v * d * v.adjoint()
}

/// `exp(-i H t)`.
pub fn unitary_from_generator(h: &DMat, t: f64) -> DMat {
    hermitian_expm(h, -I * t)
}

pub fn commutes(a: &DMat, b: &DMat, tol: f64) -> bool {
    (a * b - b * a).iter().all(|v| v.norm() <= tol) || a.iter().all(|v| *v == ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_x_rotation() {
        let x = DMat::from_row_slice(
            2,
            2,
            &[ZERO, C64::new(1.0, 0.0), C64::new(1.0, 0.0), ZERO],
        );
        let theta = 0.7;
        let u = unitary_from_generator(&x, theta);
        assert!((u[(0, 0)] - C64::new(theta.cos(), 0.0)).norm() < 1e-12);
        assert!((u[(0, 1)] - C64::new(0.0, -theta.sin())).norm() < 1e-12);
        assert!(commutes(&x, &u, 1e-12));
        let ev = hermitian_eigenvalues(&x);
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }
}
