use super::AnalysisError;

/// Fraction of the way from the prior to a single survivor:
/// `(total - remaining) / (total - 1)`.
pub fn elimination_progress(total: usize, remaining: usize) -> Result<f64, AnalysisError> {
    if remaining == 0 {
        return Err(AnalysisError::InconsistentHistory);
    }
    if total < 2 || remaining > total {
        return Err(AnalysisError::InvalidInput(format!(
            "need 1 <= remaining ({remaining}) <= total ({total}) and total >= 2"
        )));
    }
    Ok((total - remaining) as f64 / (total - 1) as f64)
}

/// Progress relative to the random baseline; negative when slower than it.
pub fn normalized_progress(rho_model: f64, rho_random: f64) -> Result<f64, AnalysisError> {
    if rho_random >= 1.0 {
        return Err(AnalysisError::UndefinedNormalization(rho_random));
    }
    Ok((rho_model - rho_random) / (1.0 - rho_random))
}
