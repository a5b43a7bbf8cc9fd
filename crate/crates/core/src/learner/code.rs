//! Latent codes and the `SAFC` code file.
//!
//! Layout, all little-endian: magic `SAFC`, u32 version, u32 code_dim,
//! u32 frame count, then per frame a u32 frame id followed by code_dim
//! float32 values.

use std::path::Path;

use rayon::prelude::*;

use super::model::{image_batch, BiGanModel};
use crate::error::{Error, Result};
use crate::occupancy::TopViewImage;
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"SAFC";
pub const VERSION: u32 = 1;
const HEADER_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode<T> {
    pub frame_id: u32,
    pub values: Vec<T>,
}

/// Bytes one code occupies in a code file, excluding its frame id.
pub fn payload_bytes(code_dim: usize) -> usize {
    code_dim * 4
}

/// Pixel p ∈ [0, 255] → p/127.5 − 1 ∈ [−1, 1].
pub fn normalize_image<T: Scalar>(image: &TopViewImage) -> Vec<T> {
    image.pixels.iter().map(|&p| T::lit(p as f64 / 127.5 - 1.0)).collect()
}

pub fn encode<T: Scalar>(model: &BiGanModel<T>, image: &TopViewImage, frame_id: u32) -> Result<LatentCode<T>> {
    Ok(encode_all(model, std::slice::from_ref(image), &[frame_id])?.remove(0))
}

/// Encode many images; each is encoded on its own so results do not depend on batching.
pub fn encode_all<T: Scalar>(model: &BiGanModel<T>, images: &[TopViewImage], frame_ids: &[u32]) -> Result<Vec<LatentCode<T>>> {
    if images.len() != frame_ids.len() {
        return Err(Error::invalid("one frame id per image required"));
    }
    images
        .par_iter()
        .zip(frame_ids)
        .map(|(img, &frame_id)| {
            if img.width != model.image_side || img.height != model.image_side {
                return Err(Error::ShapeMismatch {
                    expected: vec![model.image_side, model.image_side],
                    found: vec![img.height, img.width],
                });
            }
            let px = normalize_image::<T>(img);
            let x = image_batch(model.image_side, &[&px])?;
            Ok(LatentCode {
                frame_id,
                values: model.encoder.predict(&x)?.into_data(),
            })
        })
        .collect()
}

pub fn encode_code_file<T: Scalar>(codes: &[LatentCode<T>], code_dim: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_BYTES + codes.len() * (4 + payload_bytes(code_dim)));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(code_dim as u32).to_le_bytes());
    out.extend_from_slice(&(codes.len() as u32).to_le_bytes());
    for c in codes {
        if c.values.len() != code_dim {
            return Err(Error::ShapeMismatch {
                expected: vec![code_dim],
                found: vec![c.values.len()],
            });
        }
        out.extend_from_slice(&c.frame_id.to_le_bytes());
        for v in &c.values {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_code_file<T: Scalar>(bytes: &[u8], path: &Path) -> Result<(usize, Vec<LatentCode<T>>)> {
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        return Err(Error::malformed(path, "missing SAFC header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(Error::malformed(path, format!("unsupported code file version {}", word(4))));
    }
    let (dim, count) = (word(8) as usize, word(12) as usize);
    let record = 4 + payload_bytes(dim);
    if bytes.len() != HEADER_BYTES + count * record {
        return Err(Error::malformed(path, format!("{count} codes of dim {dim} do not fit {} bytes", bytes.len())));
    }
    let codes = bytes[HEADER_BYTES..]
        .chunks_exact(record)
        .map(|r| LatentCode {
            frame_id: u32::from_le_bytes(r[..4].try_into().unwrap()),
            values: r[4..]
                .chunks_exact(4)
                .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect(),
        })
        .collect();
    Ok((dim, codes))
}

pub fn write_codes<T: Scalar>(path: impl AsRef<Path>, codes: &[LatentCode<T>], code_dim: usize) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_code_file(codes, code_dim)?).map_err(|e| Error::io(path, e))
}

pub fn read_codes<T: Scalar>(path: impl AsRef<Path>) -> Result<(usize, Vec<LatentCode<T>>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_code_file(&bytes, path)
}
