//! Point-cloud and weight files.
//!
//! Text points: one point per line, `x y z [f0 f1 ...]`, whitespace
//! separated; blank lines and lines starting with `#` are skipped.
//!
//! `TSPT` (little-endian): magic, `u32` version 1, `u32` N, `u32` D, `u32` C,
//! N×D `f32` coordinates, N×C `f32` features.
//!
//! `TSPW` (little-endian): magic, `u32` version 1, `u32` layer count, then per
//! layer `u32` offsets (or relations), `u32` C_in, `u32` C_out and the `f32`
//! values in `[offset][c_in][c_out]` order.

use std::io::{Read, Write};

use crate::error::Error;
use crate::exec::WeightTensor;
use crate::real::{Dense, Real};
use crate::Result;

const TSPT_MAGIC: &[u8; 4] = b"TSPT";
const TSPW_MAGIC: &[u8; 4] = b"TSPW";
const VERSION: u32 = 1;

macro_rules! format_err {
    ($($arg:tt)*) => { Error::Format(format!($($arg)*)) };
}

/// Raw points with optional per-point features, both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub channels: usize,
    pub features: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>, channels: usize, features: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(crate::error::invalid!("{} coordinates do not form {dim}-D points", coords.len()));
        }
        let n = coords.len() / dim;
        if features.len() != n * channels {
            return Err(crate::error::invalid!("{} feature values for {n} points with {channels} channels", features.len()));
        }
        Ok(Self { dim, coords, channels, features })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Self {
        Self {
            dim: 3,
            coords: points.iter().flatten().copied().collect(),
            channels: 0,
            features: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Features as a dense matrix, or `None` when the cloud has no channels.
    pub fn feature_matrix<T: Real>(&self) -> Option<Dense<T>> {
        (self.channels > 0).then(|| Dense::from_fn(self.len(), self.channels, |r, c| T::from_f64(self.features[r * self.channels + c])))
    }
}

pub fn read_points_text(text: &str) -> Result<PointCloud> {
    let mut coords = Vec::new();
    let mut features = Vec::new();
    let mut width = None;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format_err!("line {}: `{t}` is not a number", no + 1)))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() < 3 {
            return Err(format_err!("line {}: expected at least 3 values, found {}", no + 1, vals.len()));
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(format_err!("line {}: {} values, earlier lines have {w}", no + 1, vals.len()))
            }
            _ => {}
        }
        coords.extend_from_slice(&vals[..3]);
        features.extend_from_slice(&vals[3..]);
    }
    let channels = width.map_or(0, |w| w - 3);
    PointCloud::new(3, coords, channels, features)
}

/// Text form of a 3-D cloud. `header` lines are written as `#` comments.
pub fn write_points_text(cloud: &PointCloud, header: &[String]) -> Result<String> {
    if cloud.dim != 3 {
        return Err(crate::error::invalid!("text points are 3-D, cloud is {}-D", cloud.dim));
    }
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    for i in 0..cloud.len() {
        let vals = cloud.coords[i * 3..i * 3 + 3].iter().chain(&cloud.features[i * cloud.channels..(i + 1) * cloud.channels]);
        let line: Vec<String> = vals.map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format_err!("truncated file while reading {what}"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = n.checked_mul(4).ok_or_else(|| format_err!("{what} size overflows"))?;
        let raw = self.take(bytes, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4, "magic")?;
        if m != magic {
            return Err(format_err!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(m), String::from_utf8_lossy(magic)));
        }
        let v = self.u32("version")?;
        if v != VERSION {
            return Err(format_err!("unsupported version {v}"));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(format_err!("{} trailing bytes", self.buf.len() - self.pos));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| format_err!("{v} does not fit in u32"))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f32(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&(v as f32).to_le_bytes());
}

pub fn encode_tspt(cloud: &PointCloud) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + 4 * (cloud.coords.len() + cloud.features.len()));
    out.extend_from_slice(TSPT_MAGIC);
    put_u32(&mut out, VERSION as usize)?;
    put_u32(&mut out, cloud.len())?;
    put_u32(&mut out, cloud.dim)?;
    put_u32(&mut out, cloud.channels)?;
    cloud.coords.iter().for_each(|&v| put_f32(&mut out, v));
    cloud.features.iter().for_each(|&v| put_f32(&mut out, v));
    Ok(out)
}

pub fn decode_tspt(bytes: &[u8]) -> Result<PointCloud> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(TSPT_MAGIC)?;
    let n = r.u32("point count")? as usize;
    let dim = r.u32("dimension")? as usize;
    let channels = r.u32("channel count")? as usize;
    if dim == 0 {
        return Err(format_err!("dimension must be positive"));
    }
    let coords = r.f32s(n.saturating_mul(dim), "coordinates")?;
    let features = r.f32s(n.saturating_mul(channels), "features")?;
    r.finish()?;
    Ok(PointCloud {
        dim,
        coords: coords.into_iter().map(f64::from).collect(),
        channels,
        features: features.into_iter().map(f64::from).collect(),
    })
}

pub fn encode_tspw<T: Real>(layers: &[WeightTensor<T>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(TSPW_MAGIC);
    put_u32(&mut out, VERSION as usize)?;
    put_u32(&mut out, layers.len())?;
    for w in layers {
        put_u32(&mut out, w.volume())?;
        put_u32(&mut out, w.c_in())?;
        put_u32(&mut out, w.c_out())?;
        w.as_slice().iter().for_each(|&v| put_f32(&mut out, v.to_f64()));
    }
    Ok(out)
}

pub fn decode_tspw<T: Real>(bytes: &[u8]) -> Result<Vec<WeightTensor<T>>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header(TSPW_MAGIC)?;
    let count = r.u32("layer count")?;
    let mut layers = Vec::new();
    for l in 0..count {
        let v = r.u32("offset count")? as usize;
        let ci = r.u32("input channels")? as usize;
        let co = r.u32("output channels")? as usize;
        let n = v.saturating_mul(ci).saturating_mul(co);
        let vals = r.f32s(n, "weights")?;
        let w = WeightTensor::new(v, ci, co, vals.into_iter().map(|x| T::from_f64(f64::from(x))).collect())
            .map_err(|e| format_err!("layer {l}: {e}"))?;
        layers.push(w);
    }
    r.finish()?;
    Ok(layers)
}

pub fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Reads a point file, choosing the binary reader when the file starts with
/// the `TSPT` magic.
pub fn read_points(path: &std::path::Path) -> Result<PointCloud> {
    let bytes = read_file(path)?;
    if bytes.starts_with(TSPT_MAGIC) {
        decode_tspt(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| format_err!("{}: neither TSPT nor UTF-8 text", path.display()))?;
        read_points_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_parses_comments_and_features() {
        let c = read_points_text("# hi\n0 0 0 1.5\n\n1 2 3 -2\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.channels, 1);
        assert_eq!(c.features, vec![1.5, -2.0]);
        assert!(read_points_text("0 0 0\n1 2 3 4\n").is_err());
        assert!(read_points_text("0 0\n").is_err());
        assert!(read_points_text("0 x 0\n").is_err());
    }

    #[test]
    fn tspt_round_trip_and_truncation() {
        let c = PointCloud::new(2, vec![1.0, -2.0, 3.5, 4.0], 1, vec![0.25, 8.0]).unwrap();
        let b = encode_tspt(&c).unwrap();
        assert_eq!(&b[..4], b"TSPT");
        assert_eq!(decode_tspt(&b).unwrap(), c);
        assert!(decode_tspt(&b[..b.len() - 1]).is_err());
        let mut v2 = b.clone();
        v2[4] = 2;
        assert!(decode_tspt(&v2).is_err());
    }

    #[test]
    fn tspw_round_trip() {
        let w = vec![
            WeightTensor::<f32>::from_fn(27, 2, 3, |k, c, o| (k + c + o) as f32 * 0.5),
            WeightTensor::<f32>::from_fn(1, 1, 1, |_, _, _| -1.0),
        ];
        let b = encode_tspw(&w).unwrap();
        assert_eq!(decode_tspw::<f32>(&b).unwrap(), w);
        assert_eq!(encode_tspw(&decode_tspw::<f64>(&b).unwrap()).unwrap(), b);
        assert!(decode_tspw::<f32>(&b[..30]).is_err());
    }
}
