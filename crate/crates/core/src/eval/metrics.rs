use crate::error::{Error, Result};
use crate::tensor::ComplexMatrix;

/// `‖X - X̂‖²_F / ‖X‖²_F`.
pub fn nmse(reference: &ComplexMatrix, estimate: &ComplexMatrix) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(Error::Shape(format!("nmse of {:?} against {:?}", estimate.shape(), reference.shape())));
    }
    let energy = reference.norm_squared();
    if energy == 0.0 {
        return Err(Error::UndefinedReference);
    }
    Ok((reference - estimate).norm_squared() / energy)
}

/// Root of the mean of the squared errors.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Shape("rmse of an empty error list".into()));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

pub fn to_db(value: f64) -> f64 {
    10.0 * value.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn sample() -> ComplexMatrix {
        ComplexMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5))
    }

    #[test]
    fn nmse_examples() {
        let x = sample();
        assert_eq!(nmse(&x, &x).unwrap(), 0.0);
        assert_eq!(nmse(&x, &ComplexMatrix::zeros(3, 2)).unwrap(), 1.0);
        assert!((nmse(&x, &(&x * C64::new(2.0, 0.0))).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(to_db(1.0), 0.0);
        assert!((to_db(0.01) + 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reference_is_undefined() {
        let z = ComplexMatrix::zeros(2, 2);
        assert!(matches!(nmse(&z, &z), Err(Error::UndefinedReference)));
        assert!(matches!(nmse(&z, &sample()), Err(Error::Shape(_))));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[3.0, -3.0]).unwrap(), 3.0);
        assert!((rmse(&[1.0, 0.0, 0.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[]).is_err());
    }
}
