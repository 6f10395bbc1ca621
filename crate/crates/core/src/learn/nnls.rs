//! Lawson-Hanson active-set solver for nonnegative least squares, stated on
//! the normal equations.

use nalgebra::{DMatrix, DVector};

const MAX_OUTER_FACTOR: usize = 30;

fn solve_passive(g: &DMatrix<f64>, h: &DVector<f64>, passive: &[usize]) -> Option<DVector<f64>> {
    let k = passive.len();
    let ridge = 1e-12 * passive.iter().map(|&j| g[(j, j)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let gp = DMatrix::from_fn(k, k, |a, b| g[(passive[a], passive[b])] + if a == b { ridge } else { 0.0 });
    let hp = DVector::from_fn(k, |a, _| h[passive[a]]);
    gp.clone().cholesky().map(|c| c.solve(&hp)).or_else(|| gp.lu().solve(&hp))
}

/// Minimizes `u' G u / 2 - h' u` over `u >= 0`, where `G = A'A` and `h = A'b`
/// for the least-squares problem `min ||A u - b||^2`.
pub fn nnls_gram(g: &DMatrix<f64>, h: &DVector<f64>) -> DVector<f64> {
    let n = h.len();
    let mut u = DVector::zeros(n);
    if n == 0 {
        return u;
    }
    let scale = g.diagonal().amax().max(h.amax()).max(1.0);
    let tol = 1e-12 * scale * n as f64;
    let mut passive: Vec<usize> = Vec::new();
    for _ in 0..MAX_OUTER_FACTOR * n {
        let w = h - g * &u;
        let Some((t, wt)) = (0..n)
            .filter(|j| !passive.contains(j))
            .map(|j| (j, w[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        else {
            break;
        };
        if wt <= tol {
            break;
        }
        passive.push(t);
        passive.sort_unstable();
        loop {
            let Some(z) = solve_passive(g, h, &passive) else {
                passive.retain(|&j| j != t);
                return u;
            };
            if z.iter().all(|&v| v > 0.0) {
                for (a, &j) in passive.iter().enumerate() {
                    u[j] = z[a];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (a, &j) in passive.iter().enumerate() {
                if z[a] <= 0.0 {
                    let denom = u[j] - z[a];
                    let r = if denom > 0.0 { u[j] / denom } else { 0.0 };
                    alpha = alpha.min(r);
                }
            }
            for (a, &j) in passive.iter().enumerate() {
                u[j] += alpha * (z[a] - u[j]);
            }
            passive.retain(|&j| u[j] > 0.0);
            for j in 0..n {
                if !passive.contains(&j) {
                    u[j] = 0.0;
                }
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn objective(g: &DMatrix<f64>, h: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(g * u)) - h.dot(u)
    }

    #[test]
    fn interior_and_boundary() {
        let g = DMatrix::identity(2, 2);
        let h = DVector::from_vec(vec![1.5, -2.0]);
        let u = nnls_gram(&g, &h);
        assert!((u[0] - 1.5).abs() < 1e-10 && u[1] == 0.0);
    }

    #[test]
    fn kkt_on_random_problems() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let a = DMatrix::from_fn(n + 3, n, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(n + 3, |_, _| rng.random_range(-1.0..1.0));
            let g = a.transpose() * &a;
            let h = a.transpose() * &b;
            let u = nnls_gram(&g, &h);
            let grad = &g * &u - &h;
            for j in 0..n {
                assert!(u[j] >= 0.0);
                assert!(grad[j] >= -1e-9, "dual feasibility");
                assert!((u[j] * grad[j]).abs() < 1e-9, "complementarity");
            }
            // no coordinate step improves
            let f = objective(&g, &h, &u);
            for j in 0..n {
                for d in [-1e-4, 1e-4] {
                    let mut v = u.clone();
                    v[j] = (v[j] + d).max(0.0);
                    assert!(objective(&g, &h, &v) >= f - 1e-12);
                }
            }
        }
    }
}
