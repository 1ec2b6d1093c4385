// SPDX-License-Identifier: MIT OR Apache-2.0

//! Finite-difference gradient checking.
//!
//! The training module implements backpropagation by hand, so an independent
//! referee is non-negotiable. This checker perturbs parameters one at a time
//! with central differences and compares against the analytic gradient. It
//! never calls the backward pass itself — only the scalar loss function — so
//! a bug in backprop cannot hide inside the oracle.

use crate::error::{Error, Result};
use crate::numerics::{Real, RngStream};

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest absolute difference `|analytic - numeric|` over the checked
    /// coordinates.
    pub max_abs_diff: Real,
    /// Largest relative difference, where each coordinate's difference is
    /// divided by `max(|analytic|, |numeric|)` floored at `1e-8`.
    pub max_rel_diff: Real,
    /// Index of the coordinate attaining `max_rel_diff`.
    pub worst_index: usize,
    /// How many coordinates were actually checked.
    pub checked: usize,
}

/// Compare `analytic` against central finite differences of `loss` at
/// `theta`.
///
/// `loss` must be a pure function of its argument. When `theta` has more than
/// `max_coords` entries, a uniform subsample of coordinates (drawn from
/// `rng`) is checked instead of all of them; the loss is still evaluated on
/// the full vector, only the probed coordinates are subsampled.
///
/// # Errors
///
/// Returns an error if the sizes disagree, `epsilon` is not a positive
/// finite value, or the loss function fails / returns a non-finite value.
pub fn finite_diff_gradcheck(
    loss: &mut dyn FnMut(&[Real]) -> Result<Real>,
    theta: &[Real],
    analytic: &[Real],
    epsilon: Real,
    max_coords: usize,
    rng: &mut RngStream,
) -> Result<GradCheckReport> {
    if theta.len() != analytic.len() {
        return Err(Error::shape(format!(
            "gradcheck: {} parameters but {} gradient entries",
            theta.len(),
            analytic.len()
        )));
    }
    if theta.is_empty() {
        return Err(Error::numeric("gradcheck on an empty parameter vector"));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::numeric("gradcheck epsilon must be positive"));
    }

    let coords: Vec<usize> = if theta.len() <= max_coords {
        (0..theta.len()).collect()
    } else {
        let mut all: Vec<usize> = (0..theta.len()).collect();
        rng.shuffle(&mut all);
        all.truncate(max_coords);
        all.sort_unstable();
        all
    };

    let mut probe = theta.to_vec();
    let mut report = GradCheckReport {
        max_abs_diff: 0.0,
        max_rel_diff: 0.0,
        worst_index: coords[0],
        checked: coords.len(),
    };

    for &i in &coords {
        let saved = probe[i];
        probe[i] = saved + epsilon;
        let up = loss(&probe)?;
        probe[i] = saved - epsilon;
        let down = loss(&probe)?;
        probe[i] = saved;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::numeric(format!(
                "loss returned a non-finite value while probing coordinate {i}"
            )));
        }
        let numeric = (up - down) / (2.0 * epsilon);
        let abs_diff = (analytic[i] - numeric).abs();
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        let rel_diff = abs_diff / denom;
        if abs_diff > report.max_abs_diff {
            report.max_abs_diff = abs_diff;
        }
        if rel_diff > report.max_rel_diff {
            report.max_rel_diff = rel_diff;
            report.worst_index = i;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::softmax_slice;

    #[test]
    fn quadratic_gradient_checks_out() {
        // loss = 0.5 * ||theta||^2, gradient = theta.
        let theta = vec![0.3, -1.2, 2.5, 0.0, 7.1];
        let analytic = theta.clone();
        let mut rng = RngStream::from_seed(1);
        let report = finite_diff_gradcheck(
            &mut |t| Ok(0.5 * t.iter().map(|v| v * v).sum::<Real>()),
            &theta,
            &analytic,
            1e-6,
            usize::MAX,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.checked, 5);
        assert!(
            report.max_rel_diff < 1e-6,
            "quadratic rel diff {}",
            report.max_rel_diff
        );
    }

    #[test]
    fn softmax_cross_entropy_gradient_checks_out() {
        // loss = -log softmax(theta)[target]; gradient = p - onehot(target).
        let theta = vec![0.2, -0.4, 1.1];
        let target = 2;
        let p = softmax_slice(&theta).unwrap();
        let analytic: Vec<Real> = p
            .iter()
            .enumerate()
            .map(|(i, pi)| pi - if i == target { 1.0 } else { 0.0 })
            .collect();
        let mut rng = RngStream::from_seed(2);
        let report = finite_diff_gradcheck(
            &mut |t| Ok(-softmax_slice(t)?[target].ln()),
            &theta,
            &analytic,
            1e-5,
            usize::MAX,
            &mut rng,
        )
        .unwrap();
        assert!(
            report.max_rel_diff < 1e-5,
            "softmax-CE rel diff {}",
            report.max_rel_diff
        );
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        // Same quadratic as above, but one analytic component inflated by
        // 10%; the checker must notice.
        let theta = vec![0.3, -1.2, 2.5, 0.9, 7.1];
        let mut analytic = theta.clone();
        analytic[3] *= 1.10;
        let mut rng = RngStream::from_seed(3);
        let report = finite_diff_gradcheck(
            &mut |t| Ok(0.5 * t.iter().map(|v| v * v).sum::<Real>()),
            &theta,
            &analytic,
            1e-6,
            usize::MAX,
            &mut rng,
        )
        .unwrap();
        assert!(
            report.max_rel_diff > 0.05,
            "corruption slipped through: {}",
            report.max_rel_diff
        );
        assert_eq!(report.worst_index, 3);
    }

    #[test]
    fn subsampling_caps_probe_count() {
        let theta = vec![1.0; 100];
        let analytic = vec![1.0; 100];
        let mut rng = RngStream::from_seed(4);
        let report = finite_diff_gradcheck(
            &mut |t| Ok(0.5 * t.iter().map(|v| v * v).sum::<Real>()),
            &theta,
            &analytic,
            1e-6,
            25,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.checked, 25);
    }

    #[test]
    fn invalid_inputs_error() {
        let mut rng = RngStream::from_seed(5);
        let mut f = |t: &[Real]| Ok(t.iter().sum());
        assert!(finite_diff_gradcheck(&mut f, &[1.0], &[1.0, 2.0], 1e-6, 10, &mut rng).is_err());
        assert!(finite_diff_gradcheck(&mut f, &[], &[], 1e-6, 10, &mut rng).is_err());
        assert!(finite_diff_gradcheck(&mut f, &[1.0], &[1.0], -1.0, 10, &mut rng).is_err());
    }
}
