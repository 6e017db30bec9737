//! Dense Nystrom matrices with the diagonal excluded.
//!
//! Entries are `sqrt(w_i w_j) K(x_i - x_j)`, the similarity transform by `W^{1/2}`
//! of `w_j K(x_i - x_j)`, so the sigma-weighted inner product becomes the
//! Euclidean one.

use crate::error::Result;
use crate::surface::Surface;
use crate::{Mat4, Vec3, C64};
use nalgebra::DMatrix;
use rayon::prelude::*;

pub fn assemble<F>(s: &Surface, kernel: F) -> Result<DMatrix<C64>>
where
    F: Fn(&Vec3) -> Result<Mat4> + Sync,
{
    let n = s.len();
    let dim = 4 * n;
    let sw: Vec<f64> = s.weights.iter().map(|w| w.sqrt()).collect();
    let mut data = vec![C64::from(0.0); dim * dim];
    // column-major: the four columns of node j are one contiguous chunk
    data.par_chunks_mut(4 * dim).enumerate().try_for_each(|(j, chunk)| -> Result<()> {
        for i in 0..n {
            if i == j {
                continue;
            }
            let g = kernel(&(s.nodes[i] - s.nodes[j]))? * C64::from(sw[i] * sw[j]);
            for b in 0..4 {
                for a in 0..4 {
                    chunk[b * dim + 4 * i + a] = g[(a, b)];
                }
            }
        }
        Ok(())
    })?;
    Ok(DMatrix::from_vec(dim, dim, data))
}

pub fn to_coefficients(s: &Surface, f: &[crate::Spinor]) -> Vec<C64> {
    f.iter().zip(&s.weights).flat_map(|(v, w)| { let r = w.sqrt(); (0..4).map(move |a| v[a] * r) }).collect()
}

pub fn from_coefficients(s: &Surface, c: &[C64]) -> Vec<crate::Spinor> {
    s.weights
        .iter()
        .enumerate()
        .map(|(i, w)| { let r = 1.0 / w.sqrt(); crate::Spinor::new(c[4 * i] * r, c[4 * i + 1] * r, c[4 * i + 2] * r, c[4 * i + 3] * r) })
        .collect()
}
