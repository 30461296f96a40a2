//! Dense matrix helpers shared by the structural checks and the assemblers.

use nalgebra::{DMatrix, DVector};

/// Largest absolute entry, zero for empty matrices.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖A + Aᵀ‖_max`.
pub fn skew_violation(a: &DMatrix<f64>) -> f64 {
    debug_assert!(a.is_square());
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] + a[(j, i)]).abs());
        }
    }
    worst
}

/// `‖A − Aᵀ‖_max`.
pub fn symmetry_violation(a: &DMatrix<f64>) -> f64 {
    debug_assert!(a.is_square());
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn sym_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn skew_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a - a.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `a`; `+∞` for an empty matrix.
pub fn min_sym_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let s = sym_part(a);
    s.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Reciprocal 2-norm condition number `σ_min / σ_max`.
///
/// Empty matrices count as perfectly conditioned; the zero matrix has
/// reciprocal condition zero.
pub fn rcond(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let sv = a.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Block-diagonal assembly; accepts rectangular blocks.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Vertical stacking of blocks with equal column counts.
pub fn vstack(blocks: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn stack_vectors(parts: &[DVector<f64>]) -> DVector<f64> {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(n);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(p);
        r += p.len();
    }
    out
}

/// Half-open index ranges of consecutive blocks with the given sizes.
pub fn ranges(sizes: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_diag_of_rectangular_blocks() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let d = block_diag(&[&a, &b]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(1, 0)], 2.0);
        assert_eq!(d[(2, 2)], 4.0);
        assert_eq!(d[(0, 1)], 0.0);
    }

    #[test]
    fn rcond_edge_cases() {
        assert_eq!(rcond(&DMatrix::zeros(0, 0)), 1.0);
        assert_eq!(rcond(&DMatrix::zeros(2, 2)), 0.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-3]));
        assert!((rcond(&d) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn skew_and_symmetry_violations() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(skew_violation(&j), 0.0);
        assert_eq!(symmetry_violation(&j), 2.0);
        assert_eq!(min_sym_eigenvalue(&j), 0.0);
    }
}
