//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Column-chunked products only pay off past this many output entries.
const PAR_MIN_ENTRIES: usize = 64 * 64;

/// `a * b`, optionally splitting the columns of `b` across rayon workers.
pub(crate) fn mul(a: &DMatrix<f64>, b: &DMatrix<f64>, parallel: bool) -> DMatrix<f64> {
    let cols = b.ncols();
    if !parallel || a.nrows() * cols < PAR_MIN_ENTRIES || cols < 2 {
        return a * b;
    }
    let chunk = cols.div_ceil(rayon::current_num_threads().max(1)).max(1);
    let starts: Vec<usize> = (0..cols).step_by(chunk).collect();
    let blocks: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&start| {
            let width = chunk.min(cols - start);
            a * b.columns(start, width)
        })
        .collect();
    let mut out = DMatrix::zeros(a.nrows(), cols);
    for (start, block) in starts.into_iter().zip(blocks) {
        out.columns_mut(start, block.ncols()).copy_from(&block);
    }
    out
}

/// Largest eigenvalue of the smaller Gram matrix, i.e. `‖a‖₂²`.
pub(crate) fn spectral_norm_sq(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// I.i.d. `N(0, 1/cols)` entries.
pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let std = 1.0 / (cols.max(1) as f64).sqrt();
    // Filled row by row so the draw order does not depend on storage layout.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = rng.sample(StandardNormal);
            m[(i, j)] = std * z;
        }
    }
    m
}

pub(crate) fn shape(m: &DMatrix<f64>) -> String {
    format!("{}×{}", m.nrows(), m.ncols())
}
