use super::MetricsError;
use crate::img::ImageF;

/// Peak signal-to-noise ratio in dB: `10 log10(peak^2 / MSE)`. Identical
/// images return `f64::INFINITY`.
pub fn psnr(x: &ImageF, y: &ImageF, peak: f64) -> Result<f64, MetricsError> {
    if !x.same_shape(y) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.width, x.height, x.channels, y.width, y.height, y.channels
        )));
    }
    let mse = x
        .data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5)
/// and the standard constants, averaged over channels and valid window
/// positions. Unit dynamic range.
pub fn ssim(x: &ImageF, y: &ImageF) -> Result<f64, MetricsError> {
    if !x.same_shape(y) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.width, x.height, x.channels, y.width, y.height, y.channels
        )));
    }
    let win = SSIM_WINDOW.min(x.width.min(x.height));
    let win = if win % 2 == 0 { win - 1 } else { win };
    if win < 3 {
        return Err(MetricsError::DimensionMismatch(
            "image too small for SSIM".into(),
        ));
    }
    let half = win / 2;
    let mut kernel = Vec::with_capacity(win * win);
    let mut ksum = 0.0;
    for dy in 0..win {
        for dx in 0..win {
            let u = dx as f64 - half as f64;
            let v = dy as f64 - half as f64;
            let g = (-(u * u + v * v) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            kernel.push(g);
            ksum += g;
        }
    }
    for k in kernel.iter_mut() {
        *k /= ksum;
    }

    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..x.channels {
        for wy in half..x.height - half {
            for wx in half..x.width - half {
                let mut mx = 0.0;
                let mut my = 0.0;
                let mut mxx = 0.0;
                let mut myy = 0.0;
                let mut mxy = 0.0;
                let mut ki = 0;
                for dy in 0..win {
                    for dx in 0..win {
                        let k = kernel[ki];
                        ki += 1;
                        let a = x.get(wx + dx - half, wy + dy - half, c);
                        let b = y.get(wx + dx - half, wy + dy - half, c);
                        mx += k * a;
                        my += k * b;
                        mxx += k * a * a;
                        myy += k * b * b;
                        mxy += k * a * b;
                    }
                }
                let vx = mxx - mx * mx;
                let vy = myy - my * my;
                let cov = mxy - mx * my;
                let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                total += s;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}
