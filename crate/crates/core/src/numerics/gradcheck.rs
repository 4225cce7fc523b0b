use super::{Matrix, NumericsError};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(tensor, flat index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// Compares `analytic` gradients of `loss` at `params` against central
/// differences with the given step, coordinate by coordinate.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(
    mut loss: F,
    params: &[Matrix<f64>],
    analytic: &[Matrix<f64>],
    step: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: FnMut(&[Matrix<f64>]) -> f64,
{
    if !(step > 0.0) {
        return Err(NumericsError::GradCheck(format!("step must be positive, got {step}")));
    }
    if params.len() != analytic.len() {
        return Err(NumericsError::GradCheck(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            analytic.len()
        )));
    }
    for (p, g) in params.iter().zip(analytic) {
        p.check_same_shape(g, "grad_check")?;
        if !p.is_finite() {
            return Err(NumericsError::GradCheck("non-finite parameters".into()));
        }
    }

    let mut probe: Vec<Matrix<f64>> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    for t in 0..params.len() {
        for i in 0..params[t].len() {
            let orig = params[t].as_slice()[i];
            probe[t].as_mut_slice()[i] = orig + step;
            let up = loss(&probe);
            probe[t].as_mut_slice()[i] = orig - step;
            let down = loss(&probe);
            probe[t].as_mut_slice()[i] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(NumericsError::NonFiniteProbe { tensor: t, index: i });
            }
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[t].as_slice()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = (t, i);
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}
