use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `final ≈ a0 + a1·initial + a2·initial²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModel {
    pub coefficients: [f64; 3],
    pub n: usize,
    pub train_r2: f64,
}

impl QuadraticModel {
    pub fn new(coefficients: [f64; 3]) -> Self {
        QuadraticModel {
            coefficients,
            n: 0,
            train_r2: f64::NAN,
        }
    }

    /// Unrounded prediction.
    pub fn predict(&self, initial_count: f64) -> f64 {
        let [a0, a1, a2] = self.coefficients;
        a0 + a1 * initial_count + a2 * initial_count * initial_count
    }
}

/// Least-squares quadratic through `(initial, final)` pairs.
///
/// The normal equations are formed on standardized `x` (which keeps the 3x3
/// system well conditioned), solved by Gaussian elimination with partial
/// pivoting, and mapped back to the raw polynomial.
pub fn fit_quadratic(pairs: &[(f64, f64)]) -> Result<QuadraticModel> {
    if pairs.len() < 3 {
        return Err(Error::Singular);
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Singular);
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let var = pairs.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::Singular);
    }
    let sd = var.sqrt();

    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for &(x, y) in pairs {
        let z = (x - mean) / sd;
        let row = [1.0, z, z * z];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let [b0, b1, b2] = solve3(ata, aty)?;

    let coefficients = [
        b0 - b1 * mean / sd + b2 * mean * mean / var,
        b1 / sd - 2.0 * b2 * mean / var,
        b2 / var,
    ];
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Singular);
    }
    let mut model = QuadraticModel {
        coefficients,
        n: pairs.len(),
        train_r2: f64::NAN,
    };
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = pairs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pairs.iter().map(|&(x, y)| (y - model.predict(x)).powi(2)).sum();
    if ss_tot > 0.0 {
        model.train_r2 = 1.0 - ss_res / ss_tot;
    }
    Ok(model)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = ((row + 1)..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}
