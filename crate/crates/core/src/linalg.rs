//! Dense linear algebra helpers: rank-revealing null spaces and the
//! trust-region subproblem over the Euclidean unit ball.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Singular values below `RANK_TOL * σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Residual below which a Gram–Schmidt candidate is considered dependent.
const GS_DROP: f64 = 1e-8;

/// Orthonormal bases of the row space and the null space of the `rows.len() x n`
/// matrix whose rows are `rows`.
///
/// The row space comes from an SVD with relative rank threshold [`RANK_TOL`]; the
/// null space is completed by Gram–Schmidt over the standard basis, so for
/// coordinate functionals it is spanned by the untouched coordinate vectors.
pub fn row_and_null_space(rows: &[Vec<f64>], n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let row_basis = row_space(rows, n);
    let rank = row_basis.len();
    let mut all = row_basis.clone();
    let mut null = Vec::with_capacity(n - rank);
    for j in 0..n {
        if null.len() == n - rank {
            break;
        }
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &all {
                let c = dot(&v, b);
                if c != 0.0 {
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= c * bi;
                    }
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > GS_DROP {
            v.iter_mut().for_each(|x| *x /= norm);
            all.push(v.clone());
            null.push(v);
        }
    }
    (row_basis, null)
}

/// Orthonormal basis of the span of `rows` (each of length `n`).
pub fn row_space(rows: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let rows: Vec<&Vec<f64>> = rows.iter().filter(|r| r.iter().any(|&v| v != 0.0)).collect();
    if rows.is_empty() || n == 0 {
        return Vec::new();
    }
    // Exact shortcut for rows that are multiples of distinct coordinate vectors.
    if let Some(basis) = coordinate_rows(&rows, n) {
        return basis;
    }
    let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut basis = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_TOL * smax {
            basis.push(vt.row(k).iter().copied().collect());
        }
    }
    basis
}

fn coordinate_rows(rows: &[&Vec<f64>], n: usize) -> Option<Vec<Vec<f64>>> {
    let mut seen = vec![false; n];
    let mut basis = Vec::new();
    for r in rows {
        let mut nz = r.iter().enumerate().filter(|(_, &v)| v != 0.0);
        let (j, _) = nz.next()?;
        if nz.next().is_some() {
            return None;
        }
        if !seen[j] {
            seen[j] = true;
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            basis.push(e);
        }
    }
    Some(basis)
}

/// Null-space basis only.
pub fn kernel_basis(rows: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    row_and_null_space(rows, n).1
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest deviation of the Gram matrix of `vectors` from the identity.
pub fn orthonormality_defect(vectors: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}

/// Solution of `max zᵀAz + 2bᵀz` subject to `‖z‖₂ ≤ 1`.
#[derive(Debug, Clone)]
pub struct QuadraticMax {
    pub value: f64,
    pub argmax: DVector<f64>,
    /// True when the solution needed the degenerate ("hard case") branch.
    pub hard_case: bool,
}

/// Maximizes the quadratic `zᵀAz + 2bᵀz` over the Euclidean unit ball.
///
/// Written as the trust-region subproblem `min ½zᵀHz + gᵀz` with `H = -2A`,
/// `g = -2b` and solved through the eigendecomposition of `H`: the multiplier
/// `σ ≥ max(0, -λ_min)` is bracketed and bisected on the secular equation
/// `Σ γ_i²/(λ_i+σ)² = 1`, with the hard case completed along the bottom
/// eigenvector.
pub fn maximize_quadratic_on_ball(a: &DMatrix<f64>, b: &DVector<f64>) -> QuadraticMax {
    let d = b.len();
    assert_eq!(a.shape(), (d, d));
    if d == 0 {
        return QuadraticMax { value: 0.0, argmax: DVector::zeros(0), hard_case: false };
    }
    let h = a.map(|v| -2.0 * v);
    let h = (&h + h.transpose()) * 0.5;
    let g = b.map(|v| -2.0 * v);
    let eig = SymmetricEigen::new(h);
    let lam = eig.eigenvalues;
    let q = eig.eigenvectors;
    let gamma = q.transpose() * &g;
    let (imin, lam_min) = lam.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (i, l)| {
        if l < acc.1 {
            (i, l)
        } else {
            acc
        }
    });
    let scale = lam.iter().fold(0.0_f64, |m, l| m.max(l.abs())) + 1.0;
    let gnorm = g.norm();

    let assemble = |sigma: f64, skip_degenerate: bool| -> DVector<f64> {
        let mut z = DVector::zeros(d);
        for i in 0..d {
            let denom = lam[i] + sigma;
            if skip_degenerate && (lam[i] - lam_min).abs() <= 1e-12 * scale {
                continue;
            }
            if denom != 0.0 {
                z -= q.column(i) * (gamma[i] / denom);
            }
        }
        z
    };
    let objective = |z: &DVector<f64>| -> f64 { (z.transpose() * a * z)[0] + 2.0 * b.dot(z) };

    if lam_min > 0.0 {
        let z = assemble(0.0, false);
        if z.norm() <= 1.0 {
            return QuadraticMax { value: objective(&z), argmax: z, hard_case: false };
        }
    }

    let degenerate_gamma = (0..d)
        .filter(|&i| (lam[i] - lam_min).abs() <= 1e-12 * scale)
        .all(|i| gamma[i].abs() <= 1e-12 * (gnorm + scale));
    if degenerate_gamma && lam_min <= 0.0 {
        let z0 = assemble(-lam_min, true);
        let n0 = z0.norm();
        if n0 <= 1.0 {
            let tau = (1.0 - n0 * n0).max(0.0).sqrt();
            let dir = q.column(imin).into_owned();
            let zp = &z0 + &dir * tau;
            let zm = &z0 - &dir * tau;
            let (vp, vm) = (objective(&zp), objective(&zm));
            let (z, v) = if vp >= vm { (zp, vp) } else { (zm, vm) };
            return QuadraticMax { value: v, argmax: z, hard_case: true };
        }
    }

    let phi = |sigma: f64| -> f64 {
        (0..d).map(|i| (gamma[i] / (lam[i] + sigma)).powi(2)).sum::<f64>()
    };
    let mut lo = (-lam_min).max(0.0);
    let mut hi = lo + gnorm + 1.0;
    debug_assert!(phi(hi) < 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z = assemble(hi, false);
    let n = z.norm();
    if n > 0.0 {
        z /= n.max(1.0);
    }
    QuadraticMax { value: objective(&z), argmax: z, hard_case: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_of_single_coordinate() {
        let null = kernel_basis(&[vec![1.0, 0.0, 0.0]], 3);
        assert_eq!(null, vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn empty_functionals_give_identity() {
        let null = kernel_basis(&[], 3);
        assert_eq!(null.len(), 3);
        assert_abs_diff_eq!(orthonormality_defect(&null), 0.0);
    }

    #[test]
    fn duplicate_functionals_collapse() {
        let rows = vec![vec![1.0, 1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0]];
        let (row, null) = row_and_null_space(&rows, 4);
        assert_eq!(row.len(), 1);
        assert_eq!(null.len(), 3);
        for v in &null {
            assert_abs_diff_eq!(dot(v, &rows[0]), 0.0, epsilon = 1e-12);
        }
        assert!(orthonormality_defect(&null) < 1e-12);
    }

    #[test]
    fn generic_kernel_is_orthonormal_and_annihilated() {
        let rows = vec![vec![0.3, -1.0, 2.0, 0.5, 0.0], vec![1.0, 1.0, 1.0, 1.0, 1.0]];
        let null = kernel_basis(&rows, 5);
        assert_eq!(null.len(), 3);
        assert!(orthonormality_defect(&null) < 1e-12);
        for v in &null {
            for r in &rows {
                assert!(dot(v, r).abs() < 1e-12);
            }
        }
    }

    /// Brute force over a fine polar grid of the 2-D unit disk boundary plus interior rings.
    fn grid_max(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for ring in 0..=200 {
            let rho = ring as f64 / 200.0;
            for k in 0..4000 {
                let th = k as f64 * std::f64::consts::TAU / 4000.0;
                let z = DVector::from_vec(vec![rho * th.cos(), rho * th.sin()]);
                best = best.max((z.transpose() * a * &z)[0] + 2.0 * b.dot(&z));
            }
        }
        best
    }

    #[test]
    fn trust_region_matches_grid_oracle() {
        let cases = [
            (DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), DVector::from_vec(vec![0.3, -0.2])),
            (DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]), DVector::from_vec(vec![0.0, 0.0])),
            (DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]), DVector::from_vec(vec![0.2, 0.1])),
            (DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), DVector::from_vec(vec![0.0, 0.4])),
        ];
        for (a, b) in cases {
            let sol = maximize_quadratic_on_ball(&a, &b);
            let oracle = grid_max(&a, &b);
            assert!(sol.argmax.norm() <= 1.0 + 1e-12);
            assert!(sol.value >= oracle - 1e-9, "{} < {}", sol.value, oracle);
            assert_abs_diff_eq!(sol.value, oracle, epsilon = 1e-5);
        }
    }

    #[test]
    fn isotropic_hard_case() {
        let a = DMatrix::identity(4, 4) * 0.64;
        let sol = maximize_quadratic_on_ball(&a, &DVector::zeros(4));
        assert!(sol.hard_case);
        assert_abs_diff_eq!(sol.value, 0.64, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.argmax.norm(), 1.0, epsilon = 1e-14);
    }
}
