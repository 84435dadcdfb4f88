//! Small dense linear algebra, numeric and symbolic.
//!
//! Matrices here are at most a handful of rows, so plain `Vec<Vec<_>>` and
//! textbook algorithms (partial-pivot elimination, cyclic Jacobi) suffice.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::expr::Expr;

pub type Matrix = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Matrix {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Matrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

/// LU factorisation with partial pivoting; returns the factors, the row
/// permutation and its sign, or `None` if a pivot vanishes exactly.
fn lu(a: &[Vec<f64>]) -> Option<(Matrix, Vec<usize>, f64)> {
    let n = a.len();
    let mut m: Matrix = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| libm::fabs(m[i][k]).total_cmp(&libm::fabs(m[j][k])))?;
        if m[p][k] == 0.0 {
            return None;
        }
        if p != k {
            m.swap(p, k);
            perm.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            m[i][k] = f;
            for j in k + 1..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det(a: &[Vec<f64>]) -> f64 {
    match lu(a) {
        Some((m, _, sign)) => (0..a.len()).fold(sign, |acc, i| acc * m[i][i]),
        None => 0.0,
    }
}

/// Solve `a x = b`; `None` for an exactly singular matrix.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let (m, perm, _) = lu(a)?;
    let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            y[i] -= m[i][j] * y[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            y[i] -= m[i][j] * y[j];
        }
        y[i] /= m[i][i];
    }
    Some(y)
}

pub fn inverse(a: &[Vec<f64>]) -> Option<Matrix> {
    let n = a.len();
    let cols: Option<Vec<Vec<f64>>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            solve(a, &e)
        })
        .collect();
    Some(transpose(&cols?))
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.
///
/// Eigenvalues are sorted ascending; column `k` of the returned matrix is
/// the eigenvector for eigenvalue `k`.
pub fn sym_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Matrix) {
    let n = a.len();
    let mut m: Matrix = a.to_vec();
    let mut v = identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = m.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n).map(|k| order.iter().map(|&i| v[k][i]).collect()).collect();
    (vals, vecs)
}

pub fn sym_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    sym_eigen(a).0
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Uses the real symmetric embedding `[[A, -B], [B, A]]` of `A + iB`, whose
/// spectrum is that of the original with every eigenvalue doubled.
pub fn hermitian_eigenvalues(h: &[Vec<Complex64>]) -> Vec<f64> {
    let n = h.len();
    let mut m = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = h[i][j];
            m[i][j] = z.re;
            m[i + n][j + n] = z.re;
            m[i][j + n] = -z.im;
            m[i + n][j] = z.im;
        }
    }
    sym_eigenvalues(&m).into_iter().step_by(2).collect()
}

/// Minimum-norm least-squares solution of `a x = b` and the residual norm.
///
/// Singular directions (relative eigenvalue below `1e-12`) of `aᵀa` are
/// dropped, which gives the pseudo-inverse solution.
pub fn lstsq(a: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let cols = a.first().map_or(0, Vec::len);
    let at = transpose(a);
    let ata = matmul(&at, a);
    let atb = matvec(&at, b);
    let (vals, vecs) = sym_eigen(&ata);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let mut x = vec![0.0; cols];
    for k in 0..cols {
        if vals[k] <= 1e-12 * top || vals[k] <= 0.0 {
            continue;
        }
        let coef: f64 = (0..cols).map(|i| vecs[i][k] * atb[i]).sum::<f64>() / vals[k];
        for i in 0..cols {
            x[i] += coef * vecs[i][k];
        }
    }
    let r = matvec(a, &x);
    let res = libm::sqrt(r.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum());
    (x, res)
}

/// Symbolic determinant by cofactor expansion along the first row.
pub fn det_expr(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        n => {
            let mut acc = Expr::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let term = &m[0][j] * det_expr(&minor(m, 0, j));
                acc = if j % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|&(i, _)| i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|&(j, _)| j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Symbolic inverse via the adjugate; `None` when the determinant folds to
/// the constant zero.
pub fn inverse_expr(m: &[Vec<Expr>]) -> Option<Vec<Vec<Expr>>> {
    let n = m.len();
    let d = det_expr(m);
    if d.is_zero() {
        return None;
    }
    if n == 1 {
        return Some(vec![vec![Expr::one() / &d]]);
    }
    Some(
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let c = det_expr(&minor(m, j, i));
                        let c = if (i + j) % 2 == 0 { c } else { -c };
                        c / &d
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Evaluate a matrix of expressions at a point.
pub fn eval_matrix(m: &[Vec<Expr>], scope: &dyn crate::expr::Scope) -> crate::Result<Matrix> {
    m.iter()
        .map(|row| row.iter().map(|e| e.eval_real(scope)).collect())
        .collect()
}
