//! Sum-of-absolute-differences baseline feature: block-mean downsampling
//! followed by per-patch normalization.

use crate::error::{Error, Result};
use crate::occupancy::TopViewImage;
use crate::Scalar;

pub const PATCH: usize = 8;
pub const STD_FLOOR: f64 = 1e-6;

pub fn sad_feature<T: Scalar>(image: &TopViewImage, down: usize) -> Result<Vec<T>> {
    if down == 0 || image.width % down != 0 || image.height % down != 0 {
        return Err(Error::invalid(format!(
            "downsampling factor {down} does not divide {}x{}",
            image.width, image.height
        )));
    }
    let (w, h) = (image.width / down, image.height / down);
    let area = T::of_usize(down * down);
    let mut small = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for dy in 0..down {
                for dx in 0..down {
                    acc += T::of_usize(image.get(y * down + dy, x * down + dx) as usize);
                }
            }
            small[y * w + x] = acc / area;
        }
    }
    let floor = T::lit(STD_FLOOR);
    let mut out = small.clone();
    for py in (0..h).step_by(PATCH) {
        for px in (0..w).step_by(PATCH) {
            let ys = py..(py + PATCH).min(h);
            let xs = px..(px + PATCH).min(w);
            let n = T::of_usize(ys.len() * xs.len());
            let cells = || ys.clone().flat_map(|y| xs.clone().map(move |x| y * w + x));
            let mean = cells().map(|i| small[i]).sum::<T>() / n;
            let var = cells().map(|i| (small[i] - mean) * (small[i] - mean)).sum::<T>() / n;
            let std = var.sqrt().max(floor);
            for i in cells() {
                out[i] = (small[i] - mean) / std;
            }
        }
    }
    Ok(out)
}

/// Mean absolute elementwise difference.
pub fn sad_difference<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: vec![a.len()],
            found: vec![b.len()],
        });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum::<T>() / T::of_usize(a.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64) -> TopViewImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TopViewImage::from_pixels(32, 32, (0..1024).map(|_| rng.gen_range(0..120u8)).collect()).unwrap()
    }

    #[test]
    fn self_difference_is_zero() {
        let f: Vec<f64> = sad_feature(&random_image(1), 2).unwrap();
        assert_eq!(f.len(), 256);
        assert_eq!(sad_difference(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn affine_pixel_change_is_invisible() {
        let img = random_image(2);
        let brighter = TopViewImage::from_pixels(32, 32, img.pixels.iter().map(|&p| 2 * p + 7).collect()).unwrap();
        let a: Vec<f64> = sad_feature(&img, 4).unwrap();
        let b: Vec<f64> = sad_feature(&brighter, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_images_normalize_to_zero() {
        let black = TopViewImage::from_pixels(16, 16, vec![0; 256]).unwrap();
        let white = TopViewImage::from_pixels(16, 16, vec![255; 256]).unwrap();
        let a: Vec<f64> = sad_feature(&black, 1).unwrap();
        let b: Vec<f64> = sad_feature(&white, 1).unwrap();
        assert!(a.iter().chain(&b).all(|&v| v == 0.0));
        assert_eq!(sad_difference(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn bad_factor() {
        assert!(sad_feature::<f64>(&random_image(3), 5).is_err());
    }
}
