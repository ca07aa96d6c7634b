//! Small dense helpers shared by the model, LMI and analysis code.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// `X + X^T`.
pub fn sym(x: &Mat) -> Mat {
    x + x.transpose()
}

/// `(X + X^T) / 2`.
pub fn symmetrize(x: &Mat) -> Mat {
    (x + x.transpose()) * 0.5
}

pub fn max_abs(x: &Mat) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn all_finite(x: &Mat) -> bool {
    x.iter().all(|v| v.is_finite())
}

pub fn check_finite(x: &Mat, what: &'static str) -> Result<()> {
    if all_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn check_shape(x: &Mat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if x.nrows() == rows && x.ncols() == cols {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            x.nrows(),
            x.ncols()
        )))
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(x: &Mat) -> Vec<f64> {
    if x.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(x)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_sym_eigenvalue(x: &Mat) -> f64 {
    sym_eigenvalues(x).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn min_sym_eigenvalue(x: &Mat) -> f64 {
    sym_eigenvalues(x).first().copied().unwrap_or(f64::INFINITY)
}

/// Largest singular value (0 for empty matrices).
pub fn sigma_max(x: &Mat) -> f64 {
    if x.nrows() == 0 || x.ncols() == 0 {
        return 0.0;
    }
    x.singular_values().max()
}

/// Reciprocal 2-norm condition number of a square matrix.
pub fn rcond(x: &Mat) -> f64 {
    if x.nrows() == 0 {
        return 1.0;
    }
    let sv = x.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(x: &Mat) -> Result<Vec<Complex<f64>>> {
    if x.nrows() == 0 {
        return Ok(Vec::new());
    }
    // The default Schur iteration cap is generous; a `None` here means a
    // genuinely pathological matrix.
    let schur = x.clone().try_schur(1e-14, 10_000).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(x: &Mat) -> Result<f64> {
    Ok(eigenvalues(x)?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Block-diagonal concatenation.
pub fn blkdiag(blocks: &[&Mat]) -> Mat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Assemble a dense matrix from a grid of blocks; `None` entries are zero.
/// Row heights and column widths are given explicitly so that empty blocks
/// need no placeholder matrices.
pub fn from_blocks(heights: &[usize], widths: &[usize], blocks: &[&[Option<&Mat>]]) -> Mat {
    let rows = heights.iter().sum();
    let cols = widths.iter().sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for (bi, row) in blocks.iter().enumerate() {
        let mut c = 0;
        for (bj, blk) in row.iter().enumerate() {
            if let Some(b) = blk {
                debug_assert_eq!((b.nrows(), b.ncols()), (heights[bi], widths[bj]));
                out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
            }
            c += widths[bj];
        }
        r += heights[bi];
    }
    out
}

pub fn hstack(parts: &[&Mat]) -> Mat {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let widths: Vec<usize> = parts.iter().map(|p| p.ncols()).collect();
    let row: Vec<Option<&Mat>> = parts.iter().map(|p| Some(*p)).collect();
    from_blocks(&[rows], &widths, &[&row])
}

pub fn vstack(parts: &[&Mat]) -> Mat {
    let cols = parts.first().map_or(0, |p| p.ncols());
    let heights: Vec<usize> = parts.iter().map(|p| p.nrows()).collect();
    let rows: Vec<[Option<&Mat>; 1]> = parts.iter().map(|p| [Some(*p)]).collect();
    let refs: Vec<&[Option<&Mat>]> = rows.iter().map(|r| &r[..]).collect();
    from_blocks(&heights, &[cols], &refs)
}

/// Row-major constructor used throughout tests and the benchmark module.
pub fn mat(rows: usize, cols: usize, data: &[f64]) -> Mat {
    Mat::from_row_slice(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacking_matches_manual_layout() {
        let a = mat(1, 2, &[1.0, 2.0]);
        let b = mat(1, 1, &[3.0]);
        assert_eq!(hstack(&[&a, &b]), mat(1, 3, &[1.0, 2.0, 3.0]));
        let c = mat(1, 2, &[4.0, 5.0]);
        assert_eq!(vstack(&[&a, &c]), mat(2, 2, &[1.0, 2.0, 4.0, 5.0]));
        let d = blkdiag(&[&b, &b]);
        assert_eq!(d, mat(2, 2, &[3.0, 0.0, 0.0, 3.0]));
    }

    #[test]
    fn rotation_has_imaginary_spectrum() {
        let a = mat(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ev = eigenvalues(&a).unwrap();
        assert!(ev.iter().all(|l| l.re.abs() < 1e-14 && (l.im.abs() - 1.0).abs() < 1e-14));
    }
}
