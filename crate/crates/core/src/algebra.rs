//! Dirac matrices in the standard representation.

use crate::{Mat4, C64};

#[derive(Clone, Debug)]
pub struct DiracAlgebra {
    pub alpha: [Mat4; 3],
    pub beta: Mat4,
    pub p_plus: Mat4,
}

fn block(upper_right: [[C64; 2]; 2], diag: [f64; 2]) -> Mat4 {
    let mut m = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j + 2)] = upper_right[i][j];
            m[(i + 2, j)] = upper_right[i][j];
        }
    }
    m[(0, 0)] = C64::new(diag[0], 0.0);
    m[(1, 1)] = C64::new(diag[0], 0.0);
    m[(2, 2)] = C64::new(diag[1], 0.0);
    m[(3, 3)] = C64::new(diag[1], 0.0);
    m
}

impl DiracAlgebra {
    pub fn new() -> Self {
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let sigma = [[[o, one], [one, o]], [[o, -i], [i, o]], [[one, o], [o, -one]]];
        let alpha = [
            block(sigma[0], [0.0, 0.0]),
            block(sigma[1], [0.0, 0.0]),
            block(sigma[2], [0.0, 0.0]),
        ];
        let beta = block([[o, o], [o, o]], [1.0, -1.0]);
        let p_plus = block([[o, o], [o, o]], [1.0, 0.0]);
        DiracAlgebra { alpha, beta, p_plus }
    }

    /// `alpha_0 = beta, alpha_1..3`.
    pub fn generators(&self) -> [Mat4; 4] {
        [self.beta, self.alpha[0], self.alpha[1], self.alpha[2]]
    }

    /// `alpha . v` for a real vector.
    pub fn alpha_dot(&self, v: &crate::Vec3) -> Mat4 {
        self.alpha[0] * C64::from(v[0]) + self.alpha[1] * C64::from(v[1]) + self.alpha[2] * C64::from(v[2])
    }
}

impl Default for DiracAlgebra {
    fn default() -> Self {
        Self::new()
    }
}

/// Shared instance; the matrices are constants.
pub fn dirac() -> &'static DiracAlgebra {
    static ALG: std::sync::OnceLock<DiracAlgebra> = std::sync::OnceLock::new();
    ALG.get_or_init(DiracAlgebra::new)
}
