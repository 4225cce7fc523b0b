//! Plain (tape-free) versions of each stage after hypergraph construction.
//! The training path builds the same computations on a tape in `forward`.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, NumericsError, Scalar};

fn check_slope<T: Scalar>(slope: T) -> Result<()> {
    if slope > T::zero() && slope < T::one() {
        Ok(())
    } else {
        Err(NumericsError::InvalidSlope(slope.to_f64().unwrap_or(f64::NAN)).into())
    }
}

/// Hyperedge features `E = LeakyReLU(Hᵀ·X)`, H×d.
pub fn hyperedge_features<T: Scalar>(assignment: &Matrix<T>, x: &Matrix<T>, slope: T) -> Result<Matrix<T>> {
    check_slope(slope)?;
    Ok(assignment.t_matmul(x)?.leaky_relu(slope))
}

/// Node update `X' = LeakyReLU(H·E)`, N×d.
pub fn node_update<T: Scalar>(assignment: &Matrix<T>, e: &Matrix<T>, slope: T) -> Result<Matrix<T>> {
    check_slope(slope)?;
    Ok(assignment.matmul(e)?.leaky_relu(slope))
}

/// `½(x + x')`.
pub fn residual_fuse<T: Scalar>(x: &Matrix<T>, updated: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(x.mean_pair(updated)?)
}

/// Gated attention pooling. Returns the bag embedding `h` (1×d) and the
/// attention weights `a` (N×1).
pub fn attention_pool<T: Scalar>(
    x: &Matrix<T>,
    v: &Matrix<T>,
    u: &Matrix<T>,
    w: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    if x.rows() == 0 {
        return Err(Error::EmptyBag);
    }
    let gate = x.matmul_t(v)?.tanh().hadamard(&x.matmul_t(u)?.sigmoid())?;
    let scores = gate.matmul_t(w)?; // N×1
    let a_row = scores.transpose().row_softmax();
    let h = a_row.matmul(x)?;
    Ok((h, a_row.transpose()))
}

/// `softmax(h·W)`.
pub fn classify<T: Scalar>(h: &Matrix<T>, w_cls: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(h.matmul(w_cls)?.row_softmax())
}

/// `-ln(max(probs[label], 1e-12))` for a single `1×C` probability row.
pub fn cross_entropy<T: Scalar>(probs: &Matrix<T>, label: usize) -> Result<T> {
    if label >= probs.cols() {
        return Err(NumericsError::InvalidLabel {
            label,
            classes: probs.cols(),
        }
        .into());
    }
    Ok(-probs[(0, label)].max(T::from(1e-12).unwrap()).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    const SLOPE: f64 = 0.01;

    fn leaky(v: f64) -> f64 {
        if v >= 0.0 {
            v
        } else {
            SLOPE * v
        }
    }

    #[test]
    fn single_hyperedge_sums_rows() {
        let x = Matrix::from_rows(&[&[1.0, -3.0], &[2.0, 1.0]]);
        let e = hyperedge_features(&Matrix::filled(2, 1, 1.0), &x, SLOPE).unwrap();
        assert_eq!(e.shape(), (1, 2));
        assert!((e[(0, 0)] - 3.0).abs() < 1e-15);
        assert!((e[(0, 1)] - leaky(-2.0)).abs() < 1e-15);
        let zero = hyperedge_features(&Matrix::zeros(2, 3), &x, SLOPE).unwrap();
        assert_eq!(zero, Matrix::zeros(3, 2));
    }

    #[test]
    fn composition_oracles() {
        let mut rng = Rng::seed_from(10);
        let assign = rng.uniform_matrix::<f64>(4, 3, 0.0, 1.0);
        let x = rng.uniform_matrix::<f64>(4, 2, -1.0, 1.0);
        let e = hyperedge_features(&assign, &x, SLOPE).unwrap();
        let composed = assign.transpose().matmul(&x).unwrap().leaky_relu(SLOPE);
        assert!(e.max_abs_diff(&composed) < 1e-12);
        let xp = node_update(&assign, &e, SLOPE).unwrap();
        let composed = assign.matmul(&e).unwrap().leaky_relu(SLOPE);
        assert!(xp.max_abs_diff(&composed) < 1e-12);
    }

    #[test]
    fn one_hot_assignment_selects_hyperedge() {
        let assign = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let e = Matrix::from_rows(&[&[1.0, -2.0], &[3.0, 4.0]]);
        let xp = node_update(&assign, &e, SLOPE).unwrap();
        assert_eq!(xp.row(0), &[3.0, 4.0]);
        assert_eq!(xp.row(1), &[1.0, leaky(-2.0)]);
        assert_eq!(xp.row(2), &[3.0, 4.0]);
        assert_eq!(
            node_update(&assign, &Matrix::zeros(2, 2), SLOPE).unwrap(),
            Matrix::zeros(3, 2)
        );
    }

    #[test]
    fn shape_and_slope_errors() {
        let x = Matrix::<f64>::zeros(3, 2);
        assert!(hyperedge_features(&Matrix::zeros(4, 2), &x, SLOPE).is_err());
        assert!(node_update(&Matrix::zeros(3, 2), &Matrix::zeros(3, 2), SLOPE).is_err());
        assert!(hyperedge_features(&Matrix::zeros(3, 2), &x, 1.5).is_err());
        assert!(residual_fuse(&x, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn residual_fuse_cases() {
        let x = Matrix::from_rows(&[&[2.0, 4.0]]);
        assert_eq!(residual_fuse(&x, &x).unwrap(), x);
        assert_eq!(residual_fuse(&x, &x.scale(-1.0)).unwrap(), Matrix::zeros(1, 2));
        assert_eq!(
            residual_fuse(&x, &Matrix::zeros(1, 2)).unwrap(),
            Matrix::from_rows(&[&[1.0, 2.0]])
        );
    }

    #[test]
    fn attention_pool_cases() {
        let mut rng = Rng::seed_from(11);
        let v = rng.uniform_matrix::<f64>(5, 3, -1.0, 1.0);
        let u = rng.uniform_matrix::<f64>(5, 3, -1.0, 1.0);
        let w = rng.uniform_matrix::<f64>(1, 5, -1.0, 1.0);

        let single = Matrix::from_rows(&[&[0.3, -0.2, 0.9]]);
        let (h, a) = attention_pool(&single, &v, &u, &w).unwrap();
        assert_eq!(a.as_slice(), &[1.0]);
        assert!(h.max_abs_diff(&single) < 1e-15);

        let twins = Matrix::from_rows(&[&[0.3, -0.2, 0.9], &[0.3, -0.2, 0.9]]);
        let (h, a) = attention_pool(&twins, &v, &u, &w).unwrap();
        assert_eq!(a.as_slice(), &[0.5, 0.5]);
        assert!(h.max_abs_diff(&single) < 1e-15);

        let x = rng.uniform_matrix::<f64>(4, 3, -1.0, 1.0);
        let (_, a) = attention_pool(&x, &v, &u, &Matrix::zeros(1, 5)).unwrap();
        assert!(a.as_slice().iter().all(|&p| (p - 0.25).abs() < 1e-15));

        assert!(matches!(
            attention_pool(&Matrix::zeros(0, 3), &v, &u, &w),
            Err(Error::EmptyBag)
        ));
    }

    #[test]
    fn classify_cases() {
        let h = Matrix::from_rows(&[&[0.4f64, -1.0, 2.0]]);
        let p = classify(&h, &Matrix::zeros(3, 4)).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let z = 1.7f64;
        let p = classify(&Matrix::from_rows(&[&[1.0]]), &Matrix::from_rows(&[&[z, 0.0]])).unwrap();
        let s = 1.0 / (1.0 + (-z).exp());
        assert!((p[(0, 0)] - s).abs() < 1e-15);
        assert!((p[(0, 1)] - (1.0 - s)).abs() < 1e-15);

        let w = Rng::seed_from(12).uniform_matrix::<f64>(3, 2, -1.0, 1.0);
        let p = classify(&h, &w).unwrap();
        let logits: Vec<f64> = (0..2).map(|c| (0..3).map(|j| h[(0, j)] * w[(j, c)]).sum()).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        for c in 0..2 {
            assert!((p[(0, c)] - logits[c].exp() / z).abs() < 1e-12);
        }
        assert!(classify(&h, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn cross_entropy_cases() {
        assert_eq!(cross_entropy(&Matrix::from_rows(&[&[0.0, 1.0, 0.0]]), 1).unwrap(), 0.0);
        let l = cross_entropy(&Matrix::filled(1, 4, 0.25), 3).unwrap();
        assert!((l - 4.0f64.ln()).abs() < 1e-15);
        assert!((l - 1.3863).abs() < 1e-4);
        assert!(cross_entropy(&Matrix::filled(1, 4, 0.25), 4).is_err());
        assert!(cross_entropy(&Matrix::from_rows(&[&[1.0f64, 0.0]]), 1)
            .unwrap()
            .is_finite());
    }
}
