use crate::error::{Error, Result};

/// Least-squares line through (ln ε, ln E).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// root-mean-square of the log residuals
    pub residual: f64,
}

impl RateFit {
    /// Measured prefactor C in E ≈ C εᵖ.
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }
}

pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<RateFit> {
    if eps.len() != errors.len() {
        return Err(Error::Fit(format!("{} ε values but {} errors", eps.len(), errors.len())));
    }
    if eps.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", eps.len())));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Fit(format!("ε = {e} is not positive")));
    }
    if let Some((i, e)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Fit(format!(
            "error {e:e} at ε = {} is not positive (discretization floor)",
            eps[i]
        )));
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all ε values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}
