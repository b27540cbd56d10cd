//! Monthly percentile pair for a one-in-`block`-years event.

use alloc::format;

use crate::error::{Error, Result};

/// Upper and lower percentiles (in percent) of monthly data matching an
/// event that occurs once per `block_years` years when each year has
/// `periods_per_year` periods: `100 (1 - 1/(block periods))` and its
/// complement.
pub fn threshold_percentiles(block_years: f64, periods_per_year: f64) -> Result<(f64, f64)> {
    if !(block_years > 0.0 && block_years.is_finite())
        || !(periods_per_year > 0.0 && periods_per_year.is_finite())
    {
        return Err(Error::InvalidArgument(format!(
            "block length {block_years} and periods per year {periods_per_year} must be positive"
        )));
    }
    let tail = 100.0 / (block_years * periods_per_year);
    Ok((100.0 - tail, tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round(x: f64, digits: i32) -> f64 {
        let f = 10f64.powi(digits);
        (x * f).round() / f
    }

    #[test]
    fn examples() {
        let (u, l) = threshold_percentiles(10.0, 12.0).unwrap();
        assert_eq!((round(u, 2), round(l, 2)), (99.17, 0.83));
        let (u, l) = threshold_percentiles(20.0, 12.0).unwrap();
        assert_eq!((round(u, 3), round(l, 3)), (99.583, 0.417));
        assert_eq!(threshold_percentiles(1.0, 1.0).unwrap(), (0.0, 100.0));
        assert!(threshold_percentiles(0.0, 12.0).is_err());
    }
}
