//! δ-local outgoing distributions via tent interpolation.

use super::caratheodory::caratheodory_reduce;
use super::certificate::{mixed_certificate, Moments, OutgoingCertificate};
use super::field::TentInterpolant;
use super::fixed_point::{outgoing_fixed_point, FixedPointOptions, FixedPointSolution};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mixed::{Locality, MixedForecast};
use crate::point::{norm, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostDetSolution {
    pub forecast: MixedForecast,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    /// Outgoing point of the interpolated field.
    pub center: Point,
    pub certificate: OutgoingCertificate,
    /// ‖E_η f(y) − f̃(z)‖.
    pub interpolation_residual: f64,
    pub reduction_degenerate: bool,
    pub fixed_point: Option<FixedPointSolution>,
}

/// Interpolates f with tents of width δ, finds an outgoing point z of the
/// interpolant, and returns the tent weights at z reduced to at most m+1
/// grid points. The support lies within δ of z.
pub fn outgoing_almost_det(grid: &Grid, values: &[Vec<f64>], delta: f64, opts: &FixedPointOptions) -> Result<AlmostDetSolution> {
    let domain = grid.domain();
    let m = domain.dim();
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
    }
    for v in values {
        Error::check_dim(m, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
    }
    grid.check_width(delta)?;
    let tolerance = opts.tolerance.unwrap_or(super::fixed_point::TOL_SEGMENT);
    if values.iter().all(|v| v.iter().all(|x| *x == 0.0)) {
        let y = grid.points()[0].clone();
        let moments = Moments::of([(y.coords(), values[0].as_slice(), 1.0)], m);
        return Ok(AlmostDetSolution {
            forecast: MixedForecast::point_mass(y.clone()),
            indices: vec![0],
            weights: vec![1.0],
            center: y,
            certificate: mixed_certificate(domain, &moments, delta, tolerance),
            interpolation_residual: 0.0,
            reduction_degenerate: false,
            fixed_point: None,
        });
    }
    let field = TentInterpolant::new(grid, values, delta);
    let fp = outgoing_fixed_point(&field, domain, opts)?;
    let z = fp.point.clone();
    let tw = field.weights(&z);
    let features: Vec<Vec<f64>> = tw.iter().map(|&(i, _)| values[i].clone()).collect();
    let w: Vec<f64> = tw.iter().map(|p| p.1).collect();
    let red = caratheodory_reduce(&features, &w)?;
    let indices: Vec<usize> = red.indices.iter().map(|&k| tw[k].0).collect();
    let weights = red.weights;

    let moments = Moments::of(
        indices.iter().zip(&weights).map(|(&i, &p)| (grid.points()[i].coords(), values[i].as_slice(), p)),
        m,
    );
    let certificate = mixed_certificate(domain, &moments, delta, tolerance);
    let resid: Vec<f64> = moments.mean_f.iter().zip(&fp.value).map(|(a, b)| a - b).collect();
    let forecast = MixedForecast::new(
        indices.iter().zip(&weights).map(|(&i, &p)| (grid.points()[i].clone(), p)).collect(),
        Some(Locality { center: z.clone(), radius: delta }),
    )?;
    Ok(AlmostDetSolution {
        forecast,
        indices,
        weights,
        center: z,
        certificate,
        interpolation_residual: norm(&resid),
        reduction_degenerate: red.degenerate,
        fixed_point: Some(fp),
    })
}
