//! One-dimensional Gauss and Gauss-Lobatto rules on [-1, 1] and the
//! collapsed-coordinate cubature on the reference triangle.

/// Gauss-Legendre nodes and weights on [-1, 1], exact for degree 2n-1.
/// Closed-form values for n = 1..6.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let c = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * c) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * c) / 7.0).sqrt();
            let wa = (18.0 + 30.0f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let c = (10.0f64 / 7.0).sqrt();
            let a = (5.0 - 2.0 * c).sqrt() / 3.0;
            let b = (5.0 + 2.0 * c).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
            (
                vec![-b, -a, 0.0, a, b],
                vec![wb, wa, 128.0 / 225.0, wa, wb],
            )
        }
        6 => {
            let x = [
                0.2386191860831969,
                0.6612093864662645,
                0.9324695142031521,
            ];
            let w = [
                0.4679139345726910,
                0.3607615730481386,
                0.1713244923791704,
            ];
            (
                vec![-x[2], -x[1], -x[0], x[0], x[1], x[2]],
                vec![w[2], w[1], w[0], w[0], w[1], w[2]],
            )
        }
        _ => gauss_legendre_newton(n),
    }
}

/// Legendre polynomial value and derivative via the three-term recurrence.
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gauss_legendre_newton(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pd(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pd(n, x);
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Gauss-Lobatto nodes and weights on [-1, 1], exact for degree 2n-3.
/// Closed-form values for n = 2..5.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        2 => (vec![-1.0, 1.0], vec![1.0, 1.0]),
        3 => (vec![-1.0, 0.0, 1.0], vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]),
        4 => {
            let a = 1.0 / 5.0f64.sqrt();
            (
                vec![-1.0, -a, a, 1.0],
                vec![1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0],
            )
        }
        5 => {
            let a = (3.0f64 / 7.0).sqrt();
            (
                vec![-1.0, -a, 0.0, a, 1.0],
                vec![0.1, 49.0 / 90.0, 32.0 / 45.0, 49.0 / 90.0, 0.1],
            )
        }
        _ => panic!("gauss_lobatto: unsupported point count {n}"),
    }
}

fn binom_f(n: u32, k: u32) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

fn fact_f(n: u32) -> f64 {
    (1..=n).fold(1.0, |a, i| a * i as f64)
}

/// Exact integral of r^p s^q over the reference triangle
/// {(r,s): r,s >= -1, r+s <= 0}.
pub fn ref_tri_monomial_integral(p: u32, q: u32) -> f64 {
    let mut total = 0.0;
    for i in 0..=p {
        for j in 0..=q {
            let coeff = binom_f(p, i)
                * binom_f(q, j)
                * 2f64.powi((i + j) as i32)
                * (-1f64).powi((p - i + q - j) as i32);
            total += coeff * fact_f(i) * fact_f(j) / fact_f(i + j + 2);
        }
    }
    4.0 * total
}

/// Cubature on the reference triangle {(r,s): r,s >= -1, r+s <= 0}, exact for
/// bivariate polynomials of total degree `deg`. Built as a collapsed tensor
/// product of Gauss-Legendre rules; all weights are positive.
pub struct TriCubature {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

pub fn tri_cubature(deg: usize) -> TriCubature {
    // Exactness: f in P^deg becomes degree <= deg in a and <= deg+1 in b
    // (Jacobian contributes one power of (1-b)).
    let na = deg / 2 + 1;
    let nb = (deg + 1) / 2 + 1;
    let (xa, wa) = gauss_legendre(na);
    let (xb, wb) = gauss_legendre(nb);
    let mut points = Vec::with_capacity(na * nb);
    let mut weights = Vec::with_capacity(na * nb);
    for (ib, &b) in xb.iter().enumerate() {
        for (ia, &a) in xa.iter().enumerate() {
            // collapsed map: r = (1+a)(1-b)/2 - 1, s = b
            let r = 0.5 * (1.0 + a) * (1.0 - b) - 1.0;
            points.push((r, b));
            weights.push(wa[ia] * wb[ib] * 0.5 * (1.0 - b));
        }
    }
    TriCubature { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    use super::ref_tri_monomial_integral as monomial_integral_ref_tri;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for d in 0..(2 * n) {
                let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d as i32)).sum();
                let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                assert!(
                    (num - exact).abs() < 1e-13,
                    "GL{n} failed on degree {d}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn lobatto_rules_integrate_polynomials() {
        for n in 2..=5 {
            let (x, w) = gauss_lobatto(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for d in 0..(2 * n - 2) {
                let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d as i32)).sum();
                let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                assert!((num - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn tri_cubature_exact_to_stated_degree() {
        for deg in 1..=9usize {
            let cub = tri_cubature(deg);
            assert!(cub.weights.iter().all(|&w| w > 0.0));
            let area: f64 = cub.weights.iter().sum();
            assert!((area - 2.0).abs() < 1e-13);
            for p in 0..=deg as u32 {
                for q in 0..=(deg as u32 - p) {
                    let num: f64 = cub
                        .points
                        .iter()
                        .zip(&cub.weights)
                        .map(|(&(r, s), &w)| w * r.powi(p as i32) * s.powi(q as i32))
                        .sum();
                    let exact = monomial_integral_ref_tri(p, q);
                    assert!(
                        (num - exact).abs() < 1e-12,
                        "deg {deg} monomial r^{p} s^{q}: {num} vs {exact}"
                    );
                }
            }
        }
    }
}
