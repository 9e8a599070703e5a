//! Nonnegative least squares (Lawson–Hanson active set) and isotonic regression.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `argmin ‖Ax - b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let max_iter = 30 * n.max(1);
    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n).filter(|j| !passive[*j] && w[*j] > tol).max_by(|i, j| w[*i].total_cmp(&w[*j]));
        let Some(j) = cand else {
            return Ok(x);
        };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|j| passive[*j]).collect();
            let sub = a.select_columns(&idx);
            let z_sub = sub.svd(true, true).solve(b, 1e-14).map_err(|e| Error::numeric(None, format!("least-squares step failed: {e}")))?;
            let mut z = DVector::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                z[j] = z_sub[k];
            }
            if idx.iter().all(|j| z[*j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &idx {
                if z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            x += (z - &x) * alpha;
            for &j in &idx {
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    Err(Error::numeric(None, "NNLS did not converge"))
}

/// Pool-adjacent-violators fit of a nondecreasing sequence.
pub fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (v2, n2) = blocks.pop().unwrap();
            let (v1, n1) = blocks.pop().unwrap();
            blocks.push(((v1 * n1 as f64 + v2 * n2 as f64) / (n1 + n2) as f64, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}
