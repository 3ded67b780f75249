//! Binary cache of a fitted surface.
//!
//! Layout (little-endian): magic `MPUF`, version `u32`, epsilon `f64`, bbox
//! min/max `6 x f64`, cell count `u64`, then per cell center `3 x f64`,
//! radius `f64`, normal `3 x f64`, offset `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

use super::{CellFit, ImplicitSurface};

pub const MAGIC: &[u8; 4] = b"MPUF";
pub const VERSION: u32 = 1;

pub fn write_surface(surface: &ImplicitSurface, mut out: impl Write) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&surface.epsilon().to_le_bytes())?;
    let bbox = surface.bbox();
    for v in bbox.min.iter().chain(&bbox.max) {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&(surface.cells().len() as u64).to_le_bytes())?;
    for c in surface.cells() {
        let fields = [
            c.center.x, c.center.y, c.center.z, c.radius, c.normal.x, c.normal.y, c.normal.z, c.offset,
        ];
        for f in fields {
            out.write_all(&f.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_surface(mut input: impl Read) -> Result<ImplicitSurface> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MalformedHeader("not an MPUF surface cache".into()));
    }
    let mut v = [0u8; 4];
    input.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::MalformedHeader(format!("unsupported MPUF version {version}")));
    }
    let epsilon = read_f64(&mut input)?;
    let mut corners = [0.0; 6];
    for c in &mut corners {
        *c = read_f64(&mut input)?;
    }
    let bbox = Aabb {
        min: [corners[0], corners[1], corners[2]],
        max: [corners[3], corners[4], corners[5]],
    };
    let mut n = [0u8; 8];
    input.read_exact(&mut n)?;
    let count = u64::from_le_bytes(n) as usize;
    let mut cells = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        let mut f = [0.0; 8];
        for x in &mut f {
            *x = read_f64(&mut input)?;
        }
        cells.push(CellFit {
            center: Vec3::new(f[0], f[1], f[2]),
            radius: f[3],
            normal: Vec3::new(f[4], f[5], f[6]),
            offset: f[7],
        });
    }
    ImplicitSurface::from_cells(cells, bbox, epsilon)
}

impl ImplicitSurface {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        write_surface(self, &mut w)?;
        w.flush().map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        read_surface(std::io::BufReader::new(file))
    }
}
