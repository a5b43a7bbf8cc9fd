use crate::Scalar;

/// Rotate a square row-major image about its centre by `angle` radians
/// (counter-clockwise in the image plane), nearest-neighbour sampling;
/// pixels sourced from outside the image take `background`.
pub fn rotate_image<T: Scalar>(pixels: &[T], side: usize, angle: f64, background: T) -> Vec<T> {
    debug_assert_eq!(pixels.len(), side * side);
    let (s, c) = angle.sin_cos();
    let half = side as f64 / 2.0;
    let mut out = vec![background; side * side];
    for r in 0..side {
        for col in 0..side {
            let (u, v) = (col as f64 + 0.5 - half, r as f64 + 0.5 - half);
            // inverse rotation maps the output pixel back to its source
            let su = c * u + s * v + half;
            let sv = -s * u + c * v + half;
            if su >= 0.0 && sv >= 0.0 && su < side as f64 && sv < side as f64 {
                out[r * side + col] = pixels[sv as usize * side + su as usize];
            }
        }
    }
    out
}
