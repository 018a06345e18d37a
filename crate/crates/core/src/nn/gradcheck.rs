use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub components: usize,
}

/// Compares `analytic` with central differences of `loss` around `theta`.
pub fn gradient_check<F>(theta: &[f64], analytic: &[f64], eps: f64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if theta.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradient components",
            theta.len(),
            analytic.len()
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let mut point = theta.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        components: theta.len(),
    };
    for i in 0..theta.len() {
        point[i] = theta[i] + eps;
        let plus = loss(&point);
        point[i] = theta[i] - eps;
        let minus = loss(&point);
        point[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss while perturbing component {i}")));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_error || i == 0 {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_index: i,
                analytic: a,
                numeric,
                components: theta.len(),
            };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_is_exact() {
        // loss(w) = w * x with x = 3: gradient 3 everywhere.
        let r = gradient_check(&[0.7], &[3.0], 1e-5, |w| w[0] * 3.0).unwrap();
        assert!(r.max_rel_error < 1e-10, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let theta = [0.3f64, -1.2];
        let loss = |t: &[f64]| t[0] * t[0] + (t[1]).sin();
        let exact = [2.0 * theta[0], theta[1].cos()];
        assert!(gradient_check(&theta, &exact, 1e-5, loss).unwrap().max_rel_error < 1e-8);
        let corrupted = [exact[0] * 1.1, exact[1]];
        let r = gradient_check(&theta, &corrupted, 1e-5, loss).unwrap();
        assert!(r.max_rel_error > 1e-2);
        assert_eq!(r.worst_index, 0);
    }

    #[test]
    fn non_finite_loss_is_error() {
        assert!(gradient_check(&[0.0], &[0.0], 1e-5, |_| f64::NAN).is_err());
        assert!(gradient_check(&[0.0], &[], 1e-5, |_| 0.0).is_err());
    }
}
