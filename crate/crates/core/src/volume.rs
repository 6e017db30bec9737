//! Tensor midpoint quadrature over a box, used for volume potentials.

use crate::error::{Error, Result};
use crate::{Mat4, Spinor, Vec3, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub n: [usize; 3],
}

/// Sampled source: cell centers and values, negligible cells dropped.
pub struct Samples {
    pub points: Vec<Vec3>,
    pub values: Vec<Spinor>,
}

impl VolumeGrid {
    pub fn new(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Result<Self> {
        if n.contains(&0) {
            return Err(Error::Invalid("empty volume grid".into()));
        }
        if (0..3).any(|i| !(hi[i] > lo[i])) {
            return Err(Error::Invalid("volume grid box has non-positive extent".into()));
        }
        Ok(VolumeGrid { lo, hi, n })
    }

    /// Cube `center +- half` with `n` cells per side.
    pub fn cube(center: Vec3, half: f64, n: usize) -> Result<Self> {
        Self::new(
            [center[0] - half, center[1] - half, center[2] - half],
            [center[0] + half, center[1] + half, center[2] + half],
            [n; 3],
        )
    }

    pub fn spacing(&self) -> [f64; 3] {
        let mut h = [0.0; 3];
        for i in 0..3 {
            h[i] = (self.hi[i] - self.lo[i]) / self.n[i] as f64;
        }
        h
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        let h = self.spacing();
        let i = idx % self.n[0];
        let j = (idx / self.n[0]) % self.n[1];
        let k = idx / (self.n[0] * self.n[1]);
        Vec3::new(
            self.lo[0] + (i as f64 + 0.5) * h[0],
            self.lo[1] + (j as f64 + 0.5) * h[1],
            self.lo[2] + (k as f64 + 0.5) * h[2],
        )
    }

    pub fn points(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Samples `f` at the cell centers, keeping cells above `1e-15` of the peak.
    pub fn sample<F>(&self, f: F) -> Result<Samples>
    where
        F: Fn(&Vec3) -> Spinor + Sync,
    {
        if self.is_empty() {
            return Err(Error::Invalid("empty volume grid".into()));
        }
        let all: Vec<(Vec3, Spinor)> = (0..self.len()).into_par_iter().map(|i| { let x = self.point(i); (x, f(&x)) }).collect();
        Ok(Self::keep_significant(all))
    }

    pub fn keep_significant(all: Vec<(Vec3, Spinor)>) -> Samples {
        let peak = all.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
        let (points, values) = all.into_iter().filter(|(_, v)| peak > 0.0 && v.norm() > 1e-15 * peak).unzip();
        Samples { points, values }
    }

    /// `sum_cells |cell| K(x_t - y) f(y)` at each target, skipping the cell that
    /// contains the target.
    pub fn convolve_at<K>(&self, s: &Samples, targets: &[Vec3], kernel: K) -> Result<Vec<Spinor>>
    where
        K: Fn(&Vec3) -> Result<Mat4> + Sync,
    {
        let h = self.spacing();
        let vol = C64::from(self.cell_volume());
        targets
            .par_iter()
            .map(|t| {
                let mut acc = Spinor::zeros();
                for (y, f) in s.points.iter().zip(&s.values) {
                    let d = t - y;
                    if (0..3).all(|i| d[i].abs() < 0.5 * h[i]) {
                        continue;
                    }
                    acc += kernel(&d)? * f;
                }
                Ok(acc * vol)
            })
            .collect()
    }
}

/// Isotropic Gaussian `amplitude * exp(-|x - center|^2 / (2 width^2))`, a smooth
/// source whose support is numerically compact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub center: [f64; 3],
    pub width: f64,
    pub amplitude: [C64; 4],
}

impl Gaussian {
    pub fn eval(&self, x: &Vec3) -> Spinor {
        let c = Vec3::from(self.center);
        let e = (-(x - c).norm_squared() / (2.0 * self.width * self.width)).exp();
        Spinor::new(self.amplitude[0] * e, self.amplitude[1] * e, self.amplitude[2] * e, self.amplitude[3] * e)
    }

    /// Box covering the Gaussian down to `e^{-12.5}` (five widths) with `n` cells per side.
    pub fn grid(&self, n: usize) -> Result<VolumeGrid> {
        VolumeGrid::cube(Vec3::from(self.center), 5.0 * self.width, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_integrates_gaussian() {
        let g = Gaussian { center: [0.1, 0.0, -0.2], width: 0.3, amplitude: [C64::from(1.0); 4] };
        let grid = g.grid(24).unwrap();
        let s = grid.sample(|x| g.eval(x)).unwrap();
        let total: C64 = s.values.iter().map(|v| v[0]).sum::<C64>() * grid.cell_volume();
        let exact = (2.0 * std::f64::consts::PI).powf(1.5) * 0.3f64.powi(3);
        // mass beyond five widths is about 1.7e-6
        assert!((total.re - exact).abs() < 3e-6 * exact);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(VolumeGrid::new([0.0; 3], [1.0; 3], [0, 2, 2]).is_err());
    }
}
