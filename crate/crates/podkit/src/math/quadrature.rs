//! Gauss quadrature rules built from the Jacobi matrix of the orthogonal
//! polynomial recurrence (Golub-Welsch).

use nalgebra::DMatrix;

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> QuadratureRule {
    let n = diag.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = diag[i];
    }
    for (i, &b) in offdiag.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let node = eig.eigenvalues[j];
            let first = eig.eigenvectors[(0, j)];
            (node, mu0 * first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Legendre rule on [-1, 1] with weight function 1 (weights sum to 2).
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let kf = k as f64;
            kf / (4.0 * kf * kf - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&diag, &offdiag, 2.0)
}

/// Gauss-Hermite rule for the standard normal weight
/// exp(-x^2/2)/sqrt(2 pi) (probabilists' convention, weights sum to 1).
pub fn gauss_hermite_prob(n: usize) -> QuadratureRule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    golub_welsch(&diag, &offdiag, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(6);
        // integral of x^k over [-1,1]
        for k in 0..=11usize {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum();
            let expect = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_moments_match_standard_normal() {
        let rule = gauss_hermite_prob(8);
        let moments = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0];
        for (k, expect) in moments.iter().enumerate() {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum();
            assert_abs_diff_eq!(got, *expect, epsilon = 1e-10);
        }
    }
}
