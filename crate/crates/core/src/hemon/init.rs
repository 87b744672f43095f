use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Matrix, ModelError, Result};

/// Glorot/Xavier uniform initialization: entries drawn from
/// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`, where
/// `fan_in = cols` and `fan_out = rows`.
pub fn xavier_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(ModelError::ZeroDim(rows, cols));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Ok(Matrix::from_vec(rows, cols, data))
}
