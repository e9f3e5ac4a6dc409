//! Log-log least-squares rate fitting for eps sweeps.

use memsim_core::{Error, Result};

/// Least-squares line through (log eps, log value).
#[derive(Debug, Clone)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points dropped because they sat below the discretization floor.
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub enum FitOutcome {
    Fit(RateFit),
    /// Every value sat at (numerical) zero; no decay rate to measure.
    BelowFloor,
}

/// Fit the decay rate of positive values against eps. Values at or below
/// `floor` are excluded from the fit (a floor of 0 excludes exact zeros
/// only); if everything is excluded the sweep is flagged instead of fitted.
pub fn fit_loglog_rate(points: &[(f64, f64)], floor: f64) -> Result<FitOutcome> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(e, v)| e > 0.0 && v > floor && v.is_finite())
        .collect();
    if usable.is_empty() {
        return Ok(FitOutcome::BelowFloor);
    }
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} of {} sweep values usable for the rate fit",
            usable.len(),
            points.len()
        )));
    }
    let n = usable.len() as f64;
    let lx: Vec<f64> = usable.iter().map(|&(e, _)| e.ln()).collect();
    let ly: Vec<f64> = usable.iter().map(|&(_, v)| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "rate fit needs at least two distinct eps values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let p = slope * x + intercept;
            (y - p) * (y - p)
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FitOutcome::Fit(RateFit {
        points: usable,
        slope,
        intercept,
        r2,
        excluded: points.len() - lx.len(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic() {
        let pts = [(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)];
        match fit_loglog_rate(&pts, 0.0).unwrap() {
            FitOutcome::Fit(f) => {
                assert!((f.slope - 2.0).abs() < 1e-12);
                assert!((f.r2 - 1.0).abs() < 1e-12);
                assert_eq!(f.excluded, 0);
            }
            _ => panic!("expected a fit"),
        }
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let pts = [(1.0, 3.0), (0.5, 3.0), (0.25, 3.0)];
        match fit_loglog_rate(&pts, 0.0).unwrap() {
            FitOutcome::Fit(f) => {
                assert!(f.slope.abs() < 1e-12);
                assert_eq!(f.r2, 1.0);
            }
            _ => panic!("expected a fit"),
        }
    }

    #[test]
    fn all_zero_flagged_below_floor() {
        let pts = [(1.0, 0.0), (0.5, 0.0), (0.25, 0.0)];
        assert!(matches!(
            fit_loglog_rate(&pts, 0.0).unwrap(),
            FitOutcome::BelowFloor
        ));
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = [(1.0, 1.0), (0.5, 0.5)];
        assert!(fit_loglog_rate(&pts, 0.0).is_err());
    }

    #[test]
    fn floor_exclusion_counted() {
        let pts = [(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625), (0.125, 1e-18)];
        match fit_loglog_rate(&pts, 1e-12).unwrap() {
            FitOutcome::Fit(f) => {
                assert_eq!(f.excluded, 1);
                assert!((f.slope - 2.0).abs() < 1e-12);
            }
            _ => panic!("expected a fit"),
        }
    }
}
