//! Off-grid evaluation of grid functions. Values outside the box are zero.

use serde::{Deserialize, Serialize};

use crate::state::VelocityGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Multilinear; preserves positivity.
    #[default]
    Linear,
    /// Tensor cubic convolution (Catmull-Rom); continuously differentiable.
    CatmullRom,
}

/// A borrowed grid function together with its interpolation rule.
#[derive(Debug, Clone, Copy)]
pub struct Interpolant<'a> {
    values: &'a [f64],
    n: usize,
    inv_h: f64,
    radius: f64,
    kind: Interpolation,
}

impl<'a> Interpolant<'a> {
    pub fn new(grid: &VelocityGrid, values: &'a [f64], kind: Interpolation) -> Self {
        assert_eq!(values.len(), grid.len(), "values do not match the grid");
        Interpolant {
            values,
            n: grid.n,
            inv_h: 1.0 / grid.h(),
            radius: grid.radius,
            kind,
        }
    }

    /// Stencil of width `L` along one axis. Out-of-range nodes get weight 0
    /// and a harmless index. Returns false when the whole stencil is outside.
    #[inline(always)]
    fn stencil<const L: usize>(&self, x: f64, idx: &mut [usize; L], w: &mut [f64; L]) -> bool {
        let s = (x + self.radius) * self.inv_h - 0.5;
        // truncating cast instead of floor(), which is a libm call on baseline x86-64
        let mut i0 = s as isize;
        if (i0 as f64) > s {
            i0 -= 1;
        }
        let t = s - i0 as f64;
        let first = i0 - (L as isize / 2 - 1);
        let n = self.n as isize;
        if first + L as isize <= 0 || first >= n {
            return false;
        }
        if L == 2 {
            w[0] = 1.0 - t;
            w[1] = t;
        } else {
            let t2 = t * t;
            let t3 = t2 * t;
            w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
            w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
            w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
            w[3] = 0.5 * (t3 - t2);
        }
        if first >= 0 && first + (L as isize) <= n {
            for (l, ix) in idx.iter_mut().enumerate() {
                *ix = first as usize + l;
            }
        } else {
            for l in 0..L {
                let i = first + l as isize;
                if i >= 0 && i < n {
                    idx[l] = i as usize;
                } else {
                    idx[l] = 0;
                    w[l] = 0.0;
                }
            }
        }
        true
    }

    #[inline(always)]
    fn eval_width<const D: usize, const L: usize>(&self, x: &[f64; D]) -> f64 {
        let mut idx = [[0usize; L]; D];
        let mut w = [[0.0; L]; D];
        for a in 0..D {
            if !self.stencil::<L>(x[a], &mut idx[a], &mut w[a]) {
                return 0.0;
            }
        }
        let n = self.n;
        let v = self.values;
        match D {
            2 => {
                let mut s = 0.0;
                for p in 0..L {
                    let row = idx[0][p] * n;
                    let mut r = 0.0;
                    for q in 0..L {
                        r += w[1][q] * v[row + idx[1][q]];
                    }
                    s += w[0][p] * r;
                }
                s
            }
            3 => {
                let mut s = 0.0;
                for p in 0..L {
                    let plane = idx[0][p] * n;
                    let mut r2 = 0.0;
                    for q in 0..L {
                        let row = (plane + idx[1][q]) * n;
                        let mut r = 0.0;
                        for l in 0..L {
                            r += w[2][l] * v[row + idx[2][l]];
                        }
                        r2 += w[1][q] * r;
                    }
                    s += w[0][p] * r2;
                }
                s
            }
            _ => panic!("dimension {D} not supported"),
        }
    }

    #[inline]
    pub fn eval<const D: usize>(&self, x: &[f64; D]) -> f64 {
        match self.kind {
            Interpolation::Linear => self.eval_width::<D, 2>(x),
            Interpolation::CatmullRom => self.eval_width::<D, 4>(x),
        }
    }
}
