use crate::error::{Error, Result};

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite(format!("objective around coordinate {i}")));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Largest elementwise relative error `|a - n| / max(1e-8, |a| + |n|)`.
pub fn check_gradient(analytic: &[f64], numeric: &[f64]) -> Result<f64> {
    if analytic.len() != numeric.len() {
        return Err(Error::DimensionMismatch {
            expected: analytic.len(),
            got: numeric.len(),
        });
    }
    Ok(analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_and_product() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_diff_gradient(|x| x[0] * x[1], &[2.0, 3.0], 1e-5).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn random_quadratic_matches_analytic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(1..8);
            let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = |v: &[f64]| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += v[i] * a[i * n + j] * v[j];
                    }
                }
                s
            };
            let num = finite_diff_gradient(f, &x, 1e-5).unwrap();
            for i in 0..n {
                let exact: f64 = (0..n).map(|j| (a[i * n + j] + a[j * n + i]) * x[j]).sum();
                assert!((num[i] - exact).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(finite_diff_gradient(|x| x[0].ln(), &[0.0], 1e-3).is_err());
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(check_gradient(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
        let e = check_gradient(&[1.0], &[1.000001]).unwrap();
        assert!((e - 5e-7).abs() < 1e-9);
        assert_eq!(check_gradient(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(check_gradient(&[0.0], &[0.0, 1.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn exact_on_quadratics(
            c in proptest::collection::vec(-3.0f64..3.0, 3),
            x in -10.0f64..10.0,
        ) {
            let f = |v: &[f64]| c[0] + c[1] * v[0] + c[2] * v[0] * v[0];
            let g = finite_diff_gradient(f, &[x], 1e-3).unwrap();
            let exact = c[1] + 2.0 * c[2] * x;
            proptest::prop_assert!((g[0] - exact).abs() < 1e-8 * (1.0 + exact.abs() + x * x));
        }
    }
}
