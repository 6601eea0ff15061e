//! Exact Gaussian full conditional of the location parameters.
//!
//! Given the four scales the model is linear-Gaussian in
//! `x = (beta0, beta_w, beta_c, beta_h, beta1, b0[1..N], b1[1..N], b0m[1..M])`,
//! so `x | scales, y ~ N(Q^{-1} h, Q^{-1})` with
//! `Q = X'X / sigma^2 + D` and `h = X'y / sigma^2`, `D` the diagonal prior precision.

use crate::model::{ParameterDraw, FIXED_EFFECTS};
use crate::panel::Panel;
use crate::scalar::Real;

/// Up to eight non-zero covariates per observation.
#[derive(Clone, Debug)]
pub(crate) struct DesignRow<T> {
    pub y: T,
    pub cols: [usize; 8],
    pub vals: [T; 8],
}

impl<T: Real> DesignRow<T> {
    #[inline]
    pub fn mean(&self, x: &[T]) -> T {
        let mut mu = T::zero();
        for k in 0..8 {
            mu = mu + self.vals[k] * x[self.cols[k]];
        }
        mu
    }
}

/// Dense cross-products of the design, computed once per panel.
#[derive(Clone, Debug)]
pub(crate) struct Design<T> {
    pub players: usize,
    pub matches: usize,
    pub dim: usize,
    pub rows: Vec<DesignRow<T>>,
    pub xtx: Vec<T>,
    pub xty: Vec<T>,
}

impl<T: Real> Design<T> {
    pub fn new(panel: &Panel<T>) -> Self {
        let n = panel.player_count();
        let m = panel.match_count();
        let dim = FIXED_EFFECTS + 2 * n + m;
        let roster = panel.roster();
        let rows: Vec<DesignRow<T>> = panel
            .observations()
            .iter()
            .map(|o| {
                let e = roster.get(o.player).expect("panel invariant");
                let i = o.player - 1;
                let j = T::lit(o.match_index as f64);
                let ind = |b: bool| if b { T::one() } else { T::zero() };
                DesignRow {
                    y: o.value,
                    cols: [
                        0,
                        1,
                        2,
                        3,
                        4,
                        FIXED_EFFECTS + i,
                        FIXED_EFFECTS + n + i,
                        FIXED_EFFECTS + 2 * n + o.match_index - 1,
                    ],
                    vals: [
                        T::one(),
                        ind(e.is_female),
                        T::lit(e.classification.value()),
                        ind(o.home),
                        j,
                        T::one(),
                        j,
                        T::one(),
                    ],
                }
            })
            .collect();

        let mut xtx = vec![T::zero(); dim * dim];
        let mut xty = vec![T::zero(); dim];
        for r in &rows {
            for a in 0..8 {
                xty[r.cols[a]] = xty[r.cols[a]] + r.vals[a] * r.y;
                for b in 0..8 {
                    let idx = r.cols[a] * dim + r.cols[b];
                    xtx[idx] = xtx[idx] + r.vals[a] * r.vals[b];
                }
            }
        }
        Design {
            players: n,
            matches: m,
            dim,
            rows,
            xtx,
            xty,
        }
    }

    pub fn residual_sum_of_squares(&self, x: &[T]) -> T {
        self.rows
            .iter()
            .map(|r| {
                let e = r.y - r.mean(x);
                e * e
            })
            .sum()
    }

    /// Flattened location vector of a draw.
    pub fn locations(&self, d: &ParameterDraw<T>) -> Vec<T> {
        let mut x = Vec::with_capacity(self.dim);
        x.extend(d.fixed_effects());
        x.extend(&d.player_intercepts);
        x.extend(&d.player_slopes);
        x.extend(&d.match_effects);
        x
    }

    pub fn write_locations(&self, x: &[T], d: &mut ParameterDraw<T>) {
        let n = self.players;
        d.set_fixed_effects(std::array::from_fn(|k| x[k]));
        d.player_intercepts.copy_from_slice(&x[FIXED_EFFECTS..FIXED_EFFECTS + n]);
        d.player_slopes.copy_from_slice(&x[FIXED_EFFECTS + n..FIXED_EFFECTS + 2 * n]);
        d.match_effects.copy_from_slice(&x[FIXED_EFFECTS + 2 * n..]);
    }

    pub fn coordinate_name(&self, k: usize) -> String {
        let n = self.players;
        const FIXED: [&str; FIXED_EFFECTS] = ["beta0", "beta_w", "beta_c", "beta_h", "beta1"];
        if k < FIXED_EFFECTS {
            FIXED[k].to_string()
        } else if k < FIXED_EFFECTS + n {
            format!("b0[{}]", k - FIXED_EFFECTS + 1)
        } else if k < FIXED_EFFECTS + 2 * n {
            format!("b1[{}]", k - FIXED_EFFECTS - n + 1)
        } else {
            format!("b0m[{}]", k - FIXED_EFFECTS - 2 * n + 1)
        }
    }
}

/// In-place lower Cholesky factor of a symmetric positive definite matrix
/// (row-major `n x n`). The strict upper triangle is left untouched.
/// Returns `false` if a pivot is not strictly positive.
pub(crate) fn cholesky<T: Real>(a: &mut [T], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag = diag - a[j * n + k] * a[j * n + k];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    true
}

/// Solves `L v = b` in place.
pub(crate) fn solve_lower<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L' v = b` in place.
pub(crate) fn solve_lower_transpose<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}
