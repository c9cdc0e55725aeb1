//! Inverse-mapping grids and bilinear resampling.

use crate::error::{Error, Result};
use crate::image::{ndc_to_pixel, FlowField, Image, Vec2};
use crate::tps::{self, ControlPointSet, TpsParameters};

/// Source locations within this many pixels of an integer are snapped to it,
/// so flows that hit pixel centers up to rounding reproduce samples exactly.
pub(crate) const SNAP_TOLERANCE: f64 = 1e-9;

/// Interpolation stencil along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Stencil {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
    /// False when the coordinate was clamped, so the sample does not vary with it.
    pub active: bool,
}

/// Locates continuous pixel coordinate `x` on an axis of `n` samples.
///
/// Out-of-range coordinates clamp to the edge. At an interior sample point
/// the stencil starting at that sample is used.
#[inline]
pub(crate) fn locate(x: f64, n: usize) -> Stencil {
    let nearest = x.round();
    let x = if (x - nearest).abs() < SNAP_TOLERANCE { nearest } else { x };
    if n == 1 {
        return Stencil {
            lo: 0,
            hi: 0,
            frac: 0.0,
            active: false,
        };
    }
    let last = (n - 1) as f64;
    if x < 0.0 {
        Stencil {
            lo: 0,
            hi: 1,
            frac: 0.0,
            active: false,
        }
    } else if x > last {
        Stencil {
            lo: n - 2,
            hi: n - 1,
            frac: 1.0,
            active: false,
        }
    } else {
        let lo = (x.floor() as usize).min(n - 2);
        Stencil {
            lo,
            hi: lo + 1,
            frac: x - lo as f64,
            active: true,
        }
    }
}

/// Evaluates `params` at every pixel center of an `height`×`width` grid.
pub fn build_flow(params: &TpsParameters, height: usize, width: usize) -> FlowField {
    FlowField::from_fn(height, width, |_, _, q| tps::evaluate(params, q))
}

/// Bilinearly samples `image` at the NDC location `at`, writing `channels` values into `out`.
#[inline]
pub(crate) fn sample_into(image: &Image, at: Vec2, out: &mut [f64]) {
    let sx = locate(ndc_to_pixel(at[0], image.width()), image.width());
    let sy = locate(ndc_to_pixel(at[1], image.height()), image.height());
    let (fx, fy) = (sx.frac, sy.frac);
    let w00 = (1.0 - fx) * (1.0 - fy);
    let w10 = fx * (1.0 - fy);
    let w01 = (1.0 - fx) * fy;
    let w11 = fx * fy;
    let data = image.data();
    let i00 = image.index(sy.lo, sx.lo, 0);
    let i10 = image.index(sy.lo, sx.hi, 0);
    let i01 = image.index(sy.hi, sx.lo, 0);
    let i11 = image.index(sy.hi, sx.hi, 0);
    for (c, o) in out.iter_mut().enumerate() {
        *o = w00 * data[i00 + c] + w10 * data[i10 + c] + w01 * data[i01 + c] + w11 * data[i11 + c];
    }
}

/// Resamples `image` through `flow`; the output takes the flow's dimensions.
pub fn resample(image: &Image, flow: &FlowField) -> Image {
    let channels = image.channels();
    let mut out = Image::zeros(flow.height(), flow.width(), channels);
    for (at, px) in flow.data().iter().zip(out.data_mut().chunks_exact_mut(channels)) {
        sample_into(image, *at, px);
    }
    out
}

/// Resamples `image` through a flow of the same height and width.
pub fn bilinear_sample(image: &Image, flow: &FlowField) -> Result<Image> {
    if image.height() != flow.height() || image.width() != flow.width() {
        return Err(Error::Shape(format!(
            "flow is {}x{} but image is {}x{}",
            flow.height(),
            flow.width(),
            image.height(),
            image.width()
        )));
    }
    Ok(resample(image, flow))
}

/// Warps `image` by the spline through `control` with displacements scaled by `alpha`.
pub fn warp_image(image: &Image, control: &ControlPointSet, alpha: f64, lambda: f64) -> Result<Image> {
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
    }
    let scaled = control.scaled(alpha);
    if scaled.is_identity() {
        // still validate the configuration the caller handed us
        tps::check_destinations(scaled.points())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("regularization must be finite and >= 0, got {lambda}")));
        }
        return Ok(image.clone());
    }
    let params = tps::fit(&scaled, lambda)?;
    bilinear_sample(image, &build_flow(&params, image.height(), image.width()))
}
