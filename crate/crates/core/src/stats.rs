//! Small statistics helpers shared by experiment aggregates and tests.

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator); 0 below two samples.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Standard deviation of a frequency estimate of a Bernoulli(p) over n draws.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Fraction of 0/1 records that are 1.
pub fn rate(accepts: &[u8]) -> f64 {
    if accepts.is_empty() {
        return 0.0;
    }
    accepts.iter().map(|&a| a as u64).sum::<u64>() as f64 / accepts.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((sample_variance(&xs) - 5.0 / 3.0).abs() < 1e-12);
        assert!((standard_error(&xs) - (5.0 / 12.0f64).sqrt()).abs() < 1e-12);
        assert_eq!(rate(&[1, 0, 1, 1]), 0.75);
        assert!((binomial_sigma(0.5, 100) - 0.05).abs() < 1e-12);
    }
}
