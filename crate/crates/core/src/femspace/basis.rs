//! One-dimensional Gauss–Lobatto and Gauss–Legendre rules on `[0, 1]` and
//! the nodal Lagrange basis built on the Gauss–Lobatto points.
//!
//! All tensor-product quantities of the finite element space are assembled
//! from these 1D building blocks.

use std::f64::consts::PI;

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1), valid away from the endpoints.
    let dp = if (x * x - 1.0).abs() < 1e-300 {
        let nf = n as f64;
        x.powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss–Lobatto points and weights for polynomial degree `p` (p + 1 points),
/// mapped to `[0, 1]`. Weights sum to one.
pub fn gauss_lobatto(p: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(p >= 1, "Gauss-Lobatto rule needs degree >= 1");
    let n = p + 1;
    let mut x = vec![0.0; n];
    // Interior points are the roots of P_p'; Newton on the Chebyshev-Lobatto guess
    // using x_{new} = x - (x P_p - P_{p-1}) / ((p+1) P_p).
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = -(PI * i as f64 / p as f64).cos();
    }
    for xi in x.iter_mut().take(n - 1).skip(1) {
        for _ in 0..100 {
            let (pp, _) = legendre(p, *xi);
            let (pm, _) = legendre(p - 1, *xi);
            let dx = (*xi * pp - pm) / ((p + 1) as f64 * pp);
            *xi -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
    }
    x[0] = -1.0;
    x[n - 1] = 1.0;
    // Symmetrise so that mirrored points are exactly opposite and the centre is 0.
    for i in 0..n / 2 {
        let m = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -m;
        x[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let pf = p as f64;
    let w: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let (pp, _) = legendre(p, xi);
            2.0 / (pf * (pf + 1.0) * pp * pp)
        })
        .collect();
    let nodes = x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect();
    let weights = w.iter().map(|&wi| 0.5 * wi).collect();
    (nodes, weights)
}

/// Gauss–Legendre points and weights with `n` points on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Nodal Lagrange basis on a fixed set of points in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `deriv[a * n + i]` = derivative of basis function `i` at node `a`.
    deriv: Vec<f64>,
}

impl LagrangeBasis {
    /// Basis on the degree-`p` Gauss–Lobatto points, carrying the matching weights.
    pub fn gauss_lobatto(p: usize) -> Self {
        let (nodes, weights) = gauss_lobatto(p);
        let n = nodes.len();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let prod: f64 = (0..n)
                    .filter(|&m| m != j)
                    .map(|m| nodes[j] - nodes[m])
                    .product();
                1.0 / prod
            })
            .collect();
        let mut deriv = vec![0.0; n * n];
        for a in 0..n {
            let mut diag = 0.0;
            for i in 0..n {
                if i != a {
                    let d = bary[i] / bary[a] / (nodes[a] - nodes[i]);
                    deriv[a * n + i] = d;
                    diag -= d;
                }
            }
            deriv[a * n + a] = diag;
        }
        Self {
            nodes,
            weights,
            deriv,
        }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights on `[0, 1]` attached to the nodes.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Derivative of basis function `i` at node `a` (reference interval `[0, 1]`).
    #[inline]
    pub fn d(&self, a: usize, i: usize) -> f64 {
        self.deriv[a * self.nodes.len() + i]
    }

    pub fn deriv_matrix(&self) -> &[f64] {
        &self.deriv
    }

    /// Values of all basis functions at `xi`. Exact Kronecker delta at the nodes.
    pub fn eval_into(&self, xi: f64, out: &mut [f64]) {
        let n = self.nodes.len();
        for j in 0..n {
            let mut v = 1.0;
            for m in 0..n {
                if m != j {
                    v *= (xi - self.nodes[m]) / (self.nodes[j] - self.nodes[m]);
                }
            }
            out[j] = v;
        }
    }

    pub fn eval(&self, xi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        self.eval_into(xi, &mut out);
        out
    }

    /// Derivatives of all basis functions at an arbitrary `xi`.
    pub fn eval_deriv_into(&self, xi: f64, out: &mut [f64]) {
        let n = self.nodes.len();
        for j in 0..n {
            let mut sum = 0.0;
            for k in 0..n {
                if k == j {
                    continue;
                }
                let mut term = 1.0 / (self.nodes[j] - self.nodes[k]);
                for m in 0..n {
                    if m != j && m != k {
                        term *= (xi - self.nodes[m]) / (self.nodes[j] - self.nodes[m]);
                    }
                }
                sum += term;
            }
            out[j] = sum;
        }
    }

    /// Largest generalized eigenvalue of the 1D reference stiffness matrix with
    /// respect to the lumped (nodal quadrature) mass matrix on `[0, 1]`.
    pub fn reference_eigenvalue(&self) -> f64 {
        let n = self.len();
        // Stiffness by nodal quadrature: K_ij = sum_a w_a D_ai D_aj (exact for degree 2p - 2).
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = (0..n)
                    .map(|a| self.weights[a] * self.d(a, i) * self.d(a, j))
                    .sum();
            }
        }
        // Symmetric form M^{-1/2} K M^{-1/2}, largest eigenvalue by power iteration.
        let s: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let a: Vec<f64> = (0..n * n)
            .map(|idx| s[idx / n] * k[idx] * s[idx % n])
            .collect();
        let mut v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -0.7 }).collect();
        let mut lambda = 0.0;
        for _ in 0..2000 {
            let w: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
            let rq: f64 = (0..n)
                .map(|i| next[i] * (0..n).map(|j| a[i * n + j] * next[j]).sum::<f64>())
                .sum();
            let done = (rq - lambda).abs() <= 1e-15 * rq.abs();
            lambda = rq;
            v = next;
            if done {
                break;
            }
        }
        lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_lobatto_rule() {
        let (x, w) = gauss_lobatto(2);
        assert_eq!(x, vec![0.0, 0.5, 1.0]);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w[1] - 4.0 / 6.0).abs() < 1e-15);
        assert!((w[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn lobatto_exactness() {
        for p in 1..=6 {
            let (x, w) = gauss_lobatto(p);
            for deg in 0..=(2 * p - 1) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "p={p} deg={deg}");
            }
        }
    }

    #[test]
    fn legendre_exactness() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn derivative_matrix_differentiates_polynomials() {
        let b = LagrangeBasis::gauss_lobatto(3);
        let f: Vec<f64> = b.nodes().iter().map(|x| x * x * x - 2.0 * x).collect();
        for a in 0..b.len() {
            let df: f64 = (0..b.len()).map(|i| b.d(a, i) * f[i]).sum();
            let x = b.nodes()[a];
            assert!((df - (3.0 * x * x - 2.0)).abs() < 1e-12);
        }
        let mut dv = vec![0.0; b.len()];
        b.eval_deriv_into(0.3, &mut dv);
        let df: f64 = dv.iter().zip(&f).map(|(d, v)| d * v).sum();
        assert!((df - (3.0 * 0.09 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn reference_eigenvalue_quadratic() {
        // 3x3 generalized eigenproblem with lumped mass diag(1/6, 2/3, 1/6).
        let b = LagrangeBasis::gauss_lobatto(2);
        assert!((b.reference_eigenvalue() - 24.0).abs() < 1e-10);
        let b1 = LagrangeBasis::gauss_lobatto(1);
        assert!((b1.reference_eigenvalue() - 4.0).abs() < 1e-10);
    }
}
