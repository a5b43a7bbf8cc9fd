//! Binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SAFL" | u32 version | u32 meta_count | meta entries (str key, str value)
//! u32 network_count | per network:
//!     str name | u64 seed | u32 rank | rank × u32 input dims
//!     u32 layer_count | per layer: u8 kind | kind-specific fields
//!     per layer: u32 tensor_count | per tensor: u32 rank | dims | f64 data
//! u32 CRC32 of every preceding byte
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes.

use std::fs;
use std::path::Path;

use super::{LayerSpec, Network, Tensor};
use crate::error::{Error, Result};
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"SAFL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub meta: Vec<(String, String)>,
    pub networks: Vec<(String, Network<T>)>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn network(&self, name: &str) -> Option<&Network<T>> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, net)| net)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u32(self.meta.len() as u32);
        for (k, v) in &self.meta {
            w.str(k);
            w.str(v);
        }
        w.u32(self.networks.len() as u32);
        for (name, net) in &self.networks {
            w.str(name);
            w.0.extend_from_slice(&net.seed().to_le_bytes());
            w.dims(net.input_shape());
            w.u32(net.layers().len() as u32);
            for l in net.layers() {
                write_layer(&mut w, l);
            }
            for ps in &net.params {
                w.u32(ps.len() as u32);
                for t in ps {
                    w.dims(t.shape());
                    for v in t.data() {
                        w.0.extend_from_slice(&v.as_f64().to_le_bytes());
                    }
                }
            }
        }
        let crc = crc32fast::hash(&w.0);
        w.u32(crc);
        w.0
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |why: String| Error::malformed(path, why);
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing SAFL magic".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(bad("CRC32 mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32().map_err(&bad)?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let n_meta = r.u32().map_err(&bad)?;
        let mut meta = Vec::new();
        for _ in 0..n_meta {
            meta.push((r.str().map_err(&bad)?, r.str().map_err(&bad)?));
        }
        let n_net = r.u32().map_err(&bad)?;
        let mut networks = Vec::new();
        for _ in 0..n_net {
            let name = r.str().map_err(&bad)?;
            let seed = u64::from_le_bytes(r.take(8).map_err(&bad)?.try_into().unwrap());
            let input = r.dims().map_err(&bad)?;
            let n_layers = r.u32().map_err(&bad)?;
            let layers = (0..n_layers).map(|_| read_layer(&mut r)).collect::<Result<Vec<_>, _>>().map_err(&bad)?;
            let mut params = Vec::new();
            for _ in 0..n_layers {
                let n_t = r.u32().map_err(&bad)?;
                let mut ts = Vec::new();
                for _ in 0..n_t {
                    let dims = r.dims().map_err(&bad)?;
                    let n: usize = dims.iter().product();
                    let raw = r.take(n * 8).map_err(&bad)?;
                    let data = raw
                        .chunks_exact(8)
                        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
                        .collect();
                    ts.push(Tensor::from_vec(&dims, data)?);
                }
                params.push(ts);
            }
            let net = Network::from_parts(&input, layers, params, seed).map_err(|e| bad(e.to_string()))?;
            networks.push((name, net));
        }
        if r.pos != body.len() {
            return Err(bad("trailing bytes before CRC".into()));
        }
        Ok(Self { meta, networks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn dims(&mut self, d: &[usize]) {
        self.u32(d.len() as u32);
        for &v in d {
            self.u32(v as u32);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.pos + n > self.buf.len() {
            return Err("truncated".into());
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "invalid UTF-8".to_string())
    }
    fn dims(&mut self) -> Result<Vec<usize>, String> {
        let n = self.u32()?;
        if n > 8 {
            return Err(format!("rank {n} too large"));
        }
        (0..n).map(|_| self.u32().map(|v| v as usize)).collect()
    }
}

fn write_layer(w: &mut Writer, l: &LayerSpec) {
    match l {
        LayerSpec::Dense { fan_in, fan_out } => {
            w.0.push(0);
            w.u32(*fan_in as u32);
            w.u32(*fan_out as u32);
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
        } => {
            w.0.push(1);
            for v in [in_channels, out_channels, kernel, stride] {
                w.u32(*v as u32);
            }
        }
        LayerSpec::Upsample { factor } => {
            w.0.push(2);
            w.u32(*factor as u32);
        }
        LayerSpec::LeakyRelu { alpha } => {
            w.0.push(3);
            w.0.extend_from_slice(&alpha.to_le_bytes());
        }
        LayerSpec::Tanh => w.0.push(4),
        LayerSpec::Sigmoid => w.0.push(5),
        LayerSpec::Flatten => w.0.push(6),
        LayerSpec::Reshape { shape } => {
            w.0.push(7);
            w.dims(shape);
        }
    }
}

fn read_layer(r: &mut Reader) -> Result<LayerSpec, String> {
    Ok(match r.u8()? {
        0 => LayerSpec::Dense {
            fan_in: r.u32()? as usize,
            fan_out: r.u32()? as usize,
        },
        1 => LayerSpec::Conv2d {
            in_channels: r.u32()? as usize,
            out_channels: r.u32()? as usize,
            kernel: r.u32()? as usize,
            stride: r.u32()? as usize,
        },
        2 => LayerSpec::Upsample {
            factor: r.u32()? as usize,
        },
        3 => LayerSpec::LeakyRelu { alpha: r.f64()? },
        4 => LayerSpec::Tanh,
        5 => LayerSpec::Sigmoid,
        6 => LayerSpec::Flatten,
        7 => LayerSpec::Reshape { shape: r.dims()? },
        k => return Err(format!("unknown layer kind {k}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint<f64> {
        let layers = vec![
            LayerSpec::Conv2d { in_channels: 1, out_channels: 2, kernel: 3, stride: 2 },
            LayerSpec::LeakyRelu { alpha: 0.2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { fan_in: 2 * 4 * 4, fan_out: 3 },
            LayerSpec::Tanh,
            LayerSpec::Reshape { shape: vec![3, 1, 1] },
            LayerSpec::Upsample { factor: 2 },
            LayerSpec::Flatten,
            LayerSpec::Sigmoid,
        ];
        Checkpoint {
            meta: vec![("code_dim".into(), "3".into())],
            networks: vec![("en".into(), Network::new(&[1, 8, 8], layers, 77).unwrap())],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = ck.encode();
        assert_eq!(&bytes[..4], b"SAFL");
        let back = Checkpoint::<f64>::decode(&bytes, Path::new("x")).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.meta("code_dim"), Some("3"));
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = sample().encode();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        let err = Checkpoint::<f64>::decode(&bytes, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("CRC32"));
        assert!(Checkpoint::<f64>::decode(b"NOPE00000000", Path::new("x")).is_err());
    }

    #[test]
    fn loads_as_f32() {
        let ck = sample();
        let back = Checkpoint::<f32>::decode(&ck.encode(), Path::new("x")).unwrap();
        let a = ck.networks[0].1.params_flat();
        let b = back.networks[0].1.params_flat();
        assert!(a.iter().zip(&b).all(|(x, y)| (*x as f32) == *y));
    }
}
