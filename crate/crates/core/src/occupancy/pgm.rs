//! Binary PGM (P5, maxval 255).

use std::fs;
use std::path::Path;

use super::TopViewImage;
use crate::error::{Error, Result};

pub fn encode_pgm(img: &TopViewImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<TopViewImage> {
    let bad = |why: &str| Error::malformed(path, why.to_owned());
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("non-ascii header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let data = &bytes[i + 1..];
    if data.len() != w * h {
        return Err(bad("pixel payload size mismatch"));
    }
    TopViewImage::from_pixels(w, h, data.to_vec())
}

pub fn write_pgm(path: impl AsRef<Path>, img: &TopViewImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<TopViewImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let img = TopViewImage::from_pixels(3, 2, vec![0, 255, 0, 255, 255, 0]).unwrap();
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        let back = decode_pgm(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.pixels, img.pixels);
        assert_eq!((back.width, back.height), (3, 2));
    }

    #[test]
    fn comments_and_errors() {
        let mut bytes = b"P5 # c\n2 1\n255\n".to_vec();
        bytes.extend([7, 9]);
        assert_eq!(decode_pgm(&bytes, Path::new("x")).unwrap().pixels, vec![7, 9]);
        assert!(decode_pgm(b"P2\n1 1\n255\n0", Path::new("x")).is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00", Path::new("x")).is_err());
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_file_name(42), "frame_000042.pgm");
    }
}
