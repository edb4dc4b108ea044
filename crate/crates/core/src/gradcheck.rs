//! Central finite-difference checks of analytic gradients (64-bit only).

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// A named, contiguous range of the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    /// Coordinate within the segment where `max_rel_err` occurs.
    pub argmax: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    /// The parameter check holding the largest error.
    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / Float::max(1e-12, analytic.abs() + numeric.abs())
}

/// Compares `analytic` against `(f(θ+h) − f(θ−h)) / 2h` coordinate by coordinate.
pub fn finite_diff_gradcheck<F>(
    mut loss: F,
    point: &[f64],
    analytic: &[f64],
    segments: &[Segment],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if analytic.len() != point.len() {
        return Err(Error::Shape {
            op: "gradcheck",
            expected: point.len(),
            got: analytic.len(),
        });
    }
    let mut theta = point.to_vec();
    let mut params = Vec::with_capacity(segments.len());
    for seg in segments {
        let mut worst = ParamCheck {
            name: seg.name.clone(),
            max_rel_err: 0.0,
            argmax: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for k in 0..seg.len {
            let i = seg.offset + k;
            let orig = theta[i];
            theta[i] = orig + h;
            let up = loss(&theta);
            theta[i] = orig - h;
            let down = loss(&theta);
            theta[i] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(alloc::format!(
                    "loss while probing {}[{}]",
                    seg.name,
                    k
                )));
            }
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[i], numeric);
            if err > worst.max_rel_err || k == 0 {
                worst.max_rel_err = err;
                worst.argmax = k;
                worst.analytic = analytic[i];
                worst.numeric = numeric;
            }
        }
        params.push(worst);
    }
    let pass = params.iter().all(|p| p.max_rel_err < tol);
    Ok(GradCheckReport {
        params,
        tolerance: tol,
        pass,
    })
}
