//! Dense eigen-helpers for small real matrices.
//!
//! The linearization work needs full eigenpairs (values and vectors) of
//! small nonsymmetric real matrices. Eigenvalues come from the real Schur
//! form; eigenvectors are recovered by shifted inverse iteration in complex
//! arithmetic and polished with Rayleigh-quotient steps, which is robust and
//! plenty accurate at the matrix sizes used here (tens of rows at most).

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;

/// An eigenpair with its backward residual `|A v - lambda v|_2`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    pub vector: DVector<C64>,
    pub residual: f64,
}

/// Symmetric part `(A + A^T) / 2`.
pub fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    sym.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
}

/// Hermitian quadratic form `v^H S v` of a real symmetric matrix; the result
/// is real up to roundoff.
pub fn hermitian_quadratic_form(sym: &DMatrix<f64>, v: &DVector<C64>) -> f64 {
    let n = v.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += v[i].conj() * C64::new(sym[(i, j)], 0.0) * v[j];
        }
    }
    acc.re
}

fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|v| C64::new(v, 0.0))
}

fn residual_of(ac: &DMatrix<C64>, value: C64, vector: &DVector<C64>) -> f64 {
    (ac * vector - vector * value).norm()
}

/// All eigenpairs of a small real matrix.
///
/// Each returned vector has unit 2-norm; `value` is the Rayleigh quotient of
/// the converged vector, so `A v = value * v` holds to the stated residual.
pub fn eigenpairs(a: &DMatrix<f64>) -> Vec<EigenPair> {
    assert_eq!(a.nrows(), a.ncols(), "matrix must be square");
    let n = a.nrows();
    let ac = to_complex(a);
    let scale = a.norm().max(1e-300);
    let values = a.clone().complex_eigenvalues();

    let mut out = Vec::with_capacity(n);
    for (idx, &lambda) in values.iter().enumerate() {
        let mut best: Option<EigenPair> = None;
        // A couple of shift magnitudes in case the first factorization is
        // too close to singular.
        for &shift_mag in &[1e-9, 1e-6, 1e-3] {
            let shift = C64::new(shift_mag * scale, 0.5 * shift_mag * scale);
            let mut mu = lambda + shift;
            let mut v = seeded_vector(n, idx);
            let mut value = lambda;
            for _ in 0..12 {
                let shifted = &ac - DMatrix::identity(n, n) * mu;
                let lu = shifted.lu();
                match lu.solve(&v) {
                    Some(w) => {
                        let norm = w.norm();
                        if !norm.is_finite() || norm == 0.0 {
                            break;
                        }
                        v = w / C64::new(norm, 0.0);
                    }
                    None => break,
                }
                // Rayleigh quotient of the current iterate.
                value = (v.adjoint() * &ac * &v)[(0, 0)];
                let res = residual_of(&ac, value, &v);
                if res <= 1e-13 * scale {
                    break;
                }
                mu = value + shift * C64::new(1e-3, 0.0);
            }
            let res = residual_of(&ac, value, &v);
            let candidate = EigenPair {
                value,
                vector: v,
                residual: res,
            };
            match &best {
                Some(b) if b.residual <= candidate.residual => {}
                _ => best = Some(candidate),
            }
            if best.as_ref().unwrap().residual <= 1e-12 * scale {
                break;
            }
        }
        out.push(best.expect("at least one candidate per eigenvalue"));
    }
    out
}

/// Deterministic pseudo-random start vector (splitmix64 driven).
fn seeded_vector(n: usize, idx: usize) -> DVector<C64> {
    let mut state = 0x9e3779b97f4a7c15u64.wrapping_mul(idx as u64 + 1);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z as f64 / u64::MAX as f64) - 0.5
    };
    let v = DVector::from_fn(n, |_, _| C64::new(next(), next()));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigenpairs_of_hand_matrix() {
        // [[-2, -0.5], [1, 0]] has eigenvalues -1 +- sqrt(1/2).
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, -0.5, 1.0, 0.0]);
        let mut pairs = eigenpairs(&a);
        pairs.sort_by(|l, r| l.value.re.partial_cmp(&r.value.re).unwrap());
        let s = 0.5f64.sqrt();
        assert_relative_eq!(pairs[0].value.re, -1.0 - s, epsilon = 1e-10);
        assert_relative_eq!(pairs[1].value.re, -1.0 + s, epsilon = 1e-10);
        for p in &pairs {
            assert!(p.value.im.abs() < 1e-10);
            assert!(p.residual < 1e-10);
        }
    }

    #[test]
    fn eigenpairs_of_rotation_like_matrix() {
        // [[0, -1], [1, 0]] has eigenvalues +-i.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let pairs = eigenpairs(&a);
        for p in &pairs {
            assert_relative_eq!(p.value.im.abs(), 1.0, epsilon = 1e-10);
            assert!(p.value.re.abs() < 1e-10);
            assert!(p.residual < 1e-10);
        }
    }

    #[test]
    fn eigenpairs_satisfy_definition_on_random_matrices() {
        let mut state = 12345u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for n in 2..=8usize {
            let a = DMatrix::from_fn(n, n, |_, _| 4.0 * next());
            for p in eigenpairs(&a) {
                assert!(
                    p.residual < 1e-8 * a.norm(),
                    "residual {} too large for n = {n}",
                    p.residual
                );
            }
        }
    }

    #[test]
    fn max_symmetric_eigenvalue_simple() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(max_symmetric_eigenvalue(&s), 3.0, epsilon = 1e-12);
    }
}
