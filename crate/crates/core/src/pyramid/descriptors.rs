use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SDSC";
const VERSION: u32 = 1;

/// Local descriptors of one image with their pixel positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub id: String,
    pub width: u32,
    pub height: u32,
    dim: usize,
    positions: Vec<(f64, f64)>,
    values: Vec<f64>,
}

impl DescriptorSet {
    /// Positions must lie in `[0, width] × [0, height]`; every descriptor
    /// must have length `dim`.
    pub fn new(
        id: impl Into<String>,
        width: u32,
        height: u32,
        dim: usize,
        points: Vec<((f64, f64), Vec<f64>)>,
    ) -> Result<Self> {
        let id = id.into();
        if width == 0 || height == 0 {
            return Err(Error::data(format!("image '{id}' has zero size")));
        }
        if dim == 0 {
            return Err(Error::data(format!(
                "image '{id}' has zero descriptor dimension"
            )));
        }
        let mut positions = Vec::with_capacity(points.len());
        let mut values = Vec::with_capacity(points.len() * dim);
        for (k, ((x, y), d)) in points.into_iter().enumerate() {
            if d.len() != dim {
                return Err(Error::data(format!(
                    "image '{id}' descriptor {k} has dimension {}, expected {dim}",
                    d.len()
                )));
            }
            if !(x >= 0.0 && x <= width as f64 && y >= 0.0 && y <= height as f64) {
                return Err(Error::data(format!(
                    "image '{id}' descriptor {k} at ({x}, {y}) lies outside {width}x{height}"
                )));
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "image '{id}' descriptor {k} is not finite"
                )));
            }
            positions.push((x, y));
            values.extend(d);
        }
        Ok(DescriptorSet {
            id,
            width,
            height,
            dim,
            positions,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, k: usize) -> (f64, f64) {
        self.positions[k]
    }

    pub fn descriptor(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((f64, f64), &[f64])> {
        self.positions
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.dim))
    }

    /// Binary form: magic, version, id, width, height, dim, count, then
    /// `x y d_1 .. d_dim` per descriptor, all little-endian (`f32` values).
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.id.len() as u32).to_le_bytes())?;
        w.write_all(self.id.as_bytes())?;
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for ((x, y), d) in self.iter() {
            for v in [x, y].iter().chain(d) {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let io = |e| Error::io("<descriptors>", e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::data("not a binary descriptor file"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::data(format!(
                "unsupported descriptor file version {version}"
            )));
        }
        let id_len = read_u32(r)? as usize;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(io)?;
        let id =
            String::from_utf8(id).map_err(|_| Error::data("descriptor file id is not UTF-8"))?;
        let width = read_u32(r)?;
        let height = read_u32(r)?;
        let dim = read_u32(r)? as usize;
        let mut count = [0u8; 8];
        r.read_exact(&mut count).map_err(io)?;
        let count = u64::from_le_bytes(count) as usize;
        let mut buf = vec![0u8; 4 * (dim + 2)];
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf).map_err(io)?;
            let row: Vec<f64> = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            points.push(((row[0], row[1]), row[2..].to_vec()));
        }
        Self::new(id, width, height, dim, points)
    }

    /// Text form: header `id width height dim count`, then one
    /// whitespace-separated `x y d_1 .. d_dim` row per descriptor.
    pub fn write_text(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "{} {} {} {} {}",
            self.id,
            self.width,
            self.height,
            self.dim,
            self.len()
        )?;
        for ((x, y), d) in self.iter() {
            write!(w, "{x} {y}")?;
            for v in d {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data("empty descriptor file"))?
            .map_err(|e| Error::io("<descriptors>", e))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 {
            return Err(Error::data(
                "descriptor header must be: id width height dim count",
            ));
        }
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::data(format!("bad descriptor header field '{s}'")))
        };
        let (width, height, dim, count) = (
            num(h[1])? as u32,
            num(h[2])? as u32,
            num(h[3])? as usize,
            num(h[4])?,
        );
        let mut points = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<descriptors>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::data(format!("descriptor row {}: not a number", n + 1)))?;
            if row.len() != dim + 2 {
                return Err(Error::data(format!(
                    "descriptor row {} has {} values, expected {}",
                    n + 1,
                    row.len(),
                    dim + 2
                )));
            }
            points.push(((row[0], row[1]), row[2..].to_vec()));
        }
        if points.len() as u64 != count {
            return Err(Error::data(format!(
                "descriptor header says {count} rows, found {}",
                points.len()
            )));
        }
        Self::new(h[0], width, height, dim, points)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::io("<descriptors>", e))?;
    Ok(u32::from_le_bytes(b))
}
