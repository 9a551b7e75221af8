//! Orthonormal DCT-II and its inverse (DCT-III) applied along one matrix axis.
//!
//! With `X_k = s_k * sum_n x_n cos(pi * k * (2n + 1) / (2L))`, where
//! `s_0 = sqrt(1/L)` and `s_k = sqrt(2/L)` otherwise, the transform matrix is
//! orthogonal: the inverse is its transpose and energy is preserved.
//! Evaluation is the direct `O(L^2)` sum over a cached cosine table, which is
//! ample for action chunks of a handful of rows and columns.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Axis the 1-D transform runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DctAxis {
    /// Each row (one timestep) is transformed across the action dimensions.
    #[default]
    AcrossDims,
    /// Each column (one action dimension) is transformed across time.
    AcrossTime,
}

impl DctAxis {
    /// Transform length for an `rows x cols` matrix.
    pub fn length(self, rows: usize, cols: usize) -> usize {
        match self {
            DctAxis::AcrossDims => cols,
            DctAxis::AcrossTime => rows,
        }
    }
}

impl std::str::FromStr for DctAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "across-dims" | "per-timestep" => Ok(DctAxis::AcrossDims),
            "across-time" | "per-dimension" => Ok(DctAxis::AcrossTime),
            other => Err(format!(
                "unknown DCT axis '{other}' (expected across-dims or across-time)"
            )),
        }
    }
}

/// Cached orthonormal DCT-II basis of one length.
#[derive(Debug, Clone)]
pub struct DctPlan {
    len: usize,
    /// Row-major `basis[k * len + n]`.
    basis: Vec<f64>,
}

impl DctPlan {
    pub fn new(len: usize) -> Self {
        let mut basis = Vec::with_capacity(len * len);
        let l = len as f64;
        for k in 0..len {
            let scale = if k == 0 {
                (1.0 / l).sqrt()
            } else {
                (2.0 / l).sqrt()
            };
            for n in 0..len {
                basis.push(scale * (PI * k as f64 * (2 * n + 1) as f64 / (2.0 * l)).cos());
            }
        }
        Self { len, basis }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        assert_eq!(input.len(), self.len);
        assert_eq!(out.len(), self.len);
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.basis[k * self.len..(k + 1) * self.len];
            *o = row.iter().zip(input).map(|(b, x)| b * x).sum();
        }
    }

    pub fn inverse_into(&self, coeffs: &[f64], out: &mut [f64]) {
        assert_eq!(coeffs.len(), self.len);
        assert_eq!(out.len(), self.len);
        for (n, o) in out.iter_mut().enumerate() {
            *o = (0..self.len)
                .map(|k| self.basis[k * self.len + n] * coeffs[k])
                .sum();
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.forward_into(input, &mut out);
        out
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.inverse_into(coeffs, &mut out);
        out
    }
}

/// 1-D orthonormal DCT-II.
pub fn dct2(input: &[f64]) -> Vec<f64> {
    DctPlan::new(input.len()).forward(input)
}

/// 1-D orthonormal inverse of [`dct2`].
pub fn idct2(coeffs: &[f64]) -> Vec<f64> {
    DctPlan::new(coeffs.len()).inverse(coeffs)
}

fn apply(m: &Matrix, axis: DctAxis, plan: &DctPlan, inverse: bool) -> Matrix {
    let (rows, cols) = m.shape();
    let mut out = Matrix::zeros(rows, cols);
    let run = |src: &[f64], dst: &mut [f64]| {
        if inverse {
            plan.inverse_into(src, dst)
        } else {
            plan.forward_into(src, dst)
        }
    };
    match axis {
        DctAxis::AcrossDims => {
            for r in 0..rows {
                run(m.row(r), out.row_mut(r));
            }
        }
        DctAxis::AcrossTime => {
            let mut buf = vec![0.0; rows];
            for c in 0..cols {
                run(&m.column(c), &mut buf);
                out.set_column(c, &buf);
            }
        }
    }
    out
}

/// Forward transform of every row (`AcrossDims`) or column (`AcrossTime`).
pub fn dct_forward(m: &Matrix, axis: DctAxis) -> Matrix {
    let plan = DctPlan::new(axis.length(m.rows(), m.cols()));
    apply(m, axis, &plan, false)
}

/// Exact inverse of [`dct_forward`] up to rounding.
pub fn dct_inverse(m: &Matrix, axis: DctAxis) -> Matrix {
    let plan = DctPlan::new(axis.length(m.rows(), m.cols()));
    apply(m, axis, &plan, true)
}

/// Same as [`dct_forward`] with a caller-held plan of the right length.
pub fn dct_forward_with(m: &Matrix, axis: DctAxis, plan: &DctPlan) -> Matrix {
    assert_eq!(plan.len(), axis.length(m.rows(), m.cols()), "plan length");
    apply(m, axis, plan, false)
}

pub fn dct_inverse_with(m: &Matrix, axis: DctAxis, plan: &DctPlan) -> Matrix {
    assert_eq!(plan.len(), axis.length(m.rows(), m.cols()), "plan length");
    apply(m, axis, plan, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_row_maps_to_dc() {
        let c = dct2(&[1.0, 1.0, 1.0, 1.0]);
        assert!((c[0] - 2.0).abs() < 1e-15);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-15));
        let x = idct2(&[2.0, 0.0, 0.0, 0.0]);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn impulse_matches_basis_column() {
        // Direct definition for x = e_0: X_k = s_k cos(pi k / 8).
        let c = dct2(&[1.0, 0.0, 0.0, 0.0]);
        let expected: Vec<f64> = (0..4)
            .map(|k| {
                let s = if k == 0 { 0.5 } else { 0.5f64.sqrt() };
                s * (PI * k as f64 / 8.0).cos()
            })
            .collect();
        for (a, b) in c.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_nonzero_row_leaves_other_rows_zero() {
        let mut m = Matrix::zeros(5, 7);
        m.row_mut(2)
            .copy_from_slice(&[1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0]);
        let f = dct_forward(&m, DctAxis::AcrossDims);
        for r in [0, 1, 3, 4] {
            assert!(f.row(r).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn axis_parsing() {
        assert_eq!(
            "across-dims".parse::<DctAxis>().unwrap(),
            DctAxis::AcrossDims
        );
        assert_eq!(
            "across-time".parse::<DctAxis>().unwrap(),
            DctAxis::AcrossTime
        );
        assert!("diagonal".parse::<DctAxis>().is_err());
        assert_eq!(DctAxis::default(), DctAxis::AcrossDims);
    }

    #[test]
    fn length_one_is_identity() {
        assert_eq!(dct2(&[3.5]), vec![3.5]);
        assert_eq!(idct2(&[3.5]), vec![3.5]);
    }
}
