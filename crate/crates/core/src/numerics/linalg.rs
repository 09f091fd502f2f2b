use crate::error::{Error, Result};

/// Ordinary least squares `argmin_b |X b - y|²` via the normal equations.
/// `rows` holds the design matrix row by row.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    if rows.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: y.len(),
        });
    }
    let k = rows.first().map_or(0, Vec::len);
    if k == 0 || rows.len() < k {
        return Err(Error::InsufficientData {
            needed: k.max(1),
            got: rows.len(),
        });
    }
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &target) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * target;
        }
    }
    solve_augmented(a)
}

// Gaussian elimination with partial pivoting on an augmented k × (k+1) system.
fn solve_augmented(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let k = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..k].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::invalid("singular least-squares system"));
        }
        a.swap(col, pivot);
        for r in col + 1..k {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..=k {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let tail: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][k] - tail) / a[r][r];
    }
    Ok(x)
}
