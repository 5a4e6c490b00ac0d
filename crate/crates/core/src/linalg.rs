//! Small dense-vector helpers on `&[f64]`, direction nets and quasi-random sequences.

use std::f64::consts::PI;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scaled(a, 1.0 / n))
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// Vectors whose residual norm falls below `tol` (relative to their input norm)
/// are dropped, so the output spans the same subspace with no duplicates.
pub fn gram_schmidt(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let scale = norm(v);
        if scale == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let n = norm(&w);
        if n > tol * scale {
            basis.push(scaled(&w, 1.0 / n));
        }
    }
    basis
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `count` unit vectors at uniform angles on the circle.
pub fn circle_net(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / count as f64;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

/// Fibonacci lattice on the unit sphere; `z` values are equally spaced midpoints.
pub fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            vec![s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}

/// The deterministic direction net used for property checks in `dim` dimensions.
pub fn direction_net(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => circle_net(360),
        3 => fibonacci_sphere(1024),
        n => {
            // coordinate directions and all normalized ±1 sign patterns
            let mut out = Vec::new();
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[i] = s;
                    out.push(v);
                }
            }
            for mask in 0..(1u32 << n) {
                let v: Vec<f64> = (0..n)
                    .map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 })
                    .collect();
                out.push(scaled(&v, 1.0 / (n as f64).sqrt()));
            }
            out
        }
    }
}

/// Radical inverse of `index` in the given prime `base` (Halton component).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Halton point `index` in `[0,1)^dim` (dim ≤ 6).
pub fn halton(index: u64, dim: usize) -> [f64; 6] {
    const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    let mut out = [0.0; 6];
    for (d, o) in out.iter_mut().enumerate().take(dim) {
        *o = radical_inverse(index, PRIMES[d]);
    }
    out
}

/// Solves the small dense system `m x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    Some(x)
}

/// Ordinary least squares `y ≈ c0 + c1·x`; returns `(c0, c1, rms_residual)`.
///
/// A single sample gives `(y, 0, 0)`.
pub fn fit_affine(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len().min(ys.len());
    if m == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    if m == 1 {
        return (ys[0], 0.0, 0.0);
    }
    let mx = compensated_sum(xs[..m].iter().copied()) / m as f64;
    let my = compensated_sum(ys[..m].iter().copied()) / m as f64;
    let sxx = compensated_sum(xs[..m].iter().map(|x| (x - mx) * (x - mx)));
    let sxy = compensated_sum((0..m).map(|i| (xs[i] - mx) * (ys[i] - my)));
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c0 = my - c1 * mx;
    let ss = compensated_sum((0..m).map(|i| (ys[i] - c0 - c1 * xs[i]).powi(2)));
    (c0, c1, (ss / m as f64).sqrt())
}

/// Least-squares `y ≈ c₀ + c₁x + c₂x²`; returns `(c₀, c₁, c₂, rms residual)`.
/// Falls back to the affine fit with fewer than four points.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let m = xs.len().min(ys.len());
    if m < 4 {
        let (c0, c1, rms) = fit_affine(xs, ys);
        return (c0, c1, 0.0, rms);
    }
    // centred and scaled abscissae keep the normal equations well conditioned
    let mx = compensated_sum(xs[..m].iter().copied()) / m as f64;
    let sx = xs[..m].iter().map(|x| (x - mx).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let z: Vec<f64> = xs[..m].iter().map(|x| (x - mx) / sx).collect();
    let mom = |p: i32| compensated_sum(z.iter().map(|v| v.powi(p)));
    let rhs = |p: i32| compensated_sum((0..m).map(|i| z[i].powi(p) * ys[i]));
    let a = vec![
        vec![m as f64, mom(1), mom(2)],
        vec![mom(1), mom(2), mom(3)],
        vec![mom(2), mom(3), mom(4)],
    ];
    let Some(b) = solve(a, vec![rhs(0), rhs(1), rhs(2)]) else {
        let (c0, c1, rms) = fit_affine(xs, ys);
        return (c0, c1, 0.0, rms);
    };
    // back to x: y = b0 + b1 (x−mx)/sx + b2 (x−mx)²/sx²
    let c2 = b[2] / (sx * sx);
    let c1 = b[1] / sx - 2.0 * c2 * mx;
    let c0 = b[0] - b[1] * mx / sx + c2 * mx * mx;
    let ss = compensated_sum((0..m).map(|i| (ys[i] - c0 - c1 * xs[i] - c2 * xs[i] * xs[i]).powi(2)));
    (c0, c1, c2, (ss / m as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let b = gram_schmidt(
            &[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 1.0, 0.0]],
            1e-12,
        );
        assert_eq!(b.len(), 2);
        assert!(dot(&b[0], &b[1]).abs() < 1e-14);
    }

    #[test]
    fn fibonacci_points_are_unit() {
        for p in fibonacci_sphere(100) {
            assert!((norm(&p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(4, 2), 0.125);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn quadratic_fit_recovers_exact_coefficients() {
        let xs: Vec<f64> = (0..8).map(|i| 0.01 * 1.5f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 + PI * x - 2.0 * x * x).collect();
        let (c0, c1, c2, rms) = fit_quadratic(&xs, &ys);
        assert!((c0 - 4.0).abs() < 1e-9 && (c1 - PI).abs() < 1e-7 && (c2 + 2.0).abs() < 1e-6);
        assert!(rms < 1e-9);
    }
}
