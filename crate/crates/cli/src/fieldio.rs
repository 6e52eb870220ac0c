//! Binary field files and point CSVs.
//!
//! A field file is a 64-byte header followed by `nx · ny` little-endian
//! `f64` values in row-major order (row `j` holds `y` index `j`).
//!
//! | bytes  | content                      |
//! |--------|------------------------------|
//! | 0..4   | magic `CVST`                 |
//! | 4..8   | version, `u32`               |
//! | 8..16  | `nx`, `u64`                  |
//! | 16..24 | `ny`, `u64`                  |
//! | 24..32 | `h`, `f64`                   |
//! | 32..40 | `x_min`, `f64`               |
//! | 40..48 | `y_min`, `f64`               |
//! | 48..52 | signedness flag, `u32` (0/1) |
//! | 52..64 | zero                         |

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use cvst::grid::{BinaryField, GridSpec, ScalarField};
use cvst::setsim::PointPattern;

pub const MAGIC: &[u8; 4] = b"CVST";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

/// Header of a field file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldHeader {
    pub nx: u64,
    pub ny: u64,
    pub h: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub signed: bool,
}

impl FieldHeader {
    pub fn of(field: &ScalarField<f64>) -> Self {
        let g = field.spec();
        Self {
            nx: g.nx() as u64,
            ny: g.ny() as u64,
            h: g.h,
            x_min: g.x_min,
            y_min: g.y_min,
            signed: field.is_signed(),
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..8].copy_from_slice(&VERSION.to_le_bytes());
        b[8..16].copy_from_slice(&self.nx.to_le_bytes());
        b[16..24].copy_from_slice(&self.ny.to_le_bytes());
        b[24..32].copy_from_slice(&self.h.to_le_bytes());
        b[32..40].copy_from_slice(&self.x_min.to_le_bytes());
        b[40..48].copy_from_slice(&self.y_min.to_le_bytes());
        b[48..52].copy_from_slice(&(self.signed as u32).to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        ensure!(&b[0..4] == MAGIC, "not a field file (bad magic)");
        let u32_at = |k: usize| u32::from_le_bytes(b[k..k + 4].try_into().unwrap());
        let u64_at = |k: usize| u64::from_le_bytes(b[k..k + 8].try_into().unwrap());
        let f64_at = |k: usize| f64::from_le_bytes(b[k..k + 8].try_into().unwrap());
        let version = u32_at(4);
        ensure!(version == VERSION, "unsupported field file version {version}");
        let signed = match u32_at(48) {
            0 => false,
            1 => true,
            s => bail!("bad signedness flag {s}"),
        };
        Ok(Self { nx: u64_at(8), ny: u64_at(16), h: f64_at(24), x_min: f64_at(32), y_min: f64_at(40), signed })
    }

    /// Does the header describe the lattice of `grid`?
    pub fn matches(&self, grid: &GridSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * grid.h;
        self.nx == grid.nx() as u64
            && self.ny == grid.ny() as u64
            && close(self.h, grid.h)
            && close(self.x_min, grid.x_min)
            && close(self.y_min, grid.y_min)
    }
}

pub fn write_field(path: &Path, field: &ScalarField<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + 8 * field.values().len());
    bytes.extend_from_slice(&FieldHeader::of(field).to_bytes());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Reads a field written on the lattice of `grid`.
pub fn read_field(path: &Path, grid: &GridSpec) -> Result<ScalarField<f64>> {
    let (header, values) = read_raw(path)?;
    ensure!(
        header.matches(grid),
        "{}: field lattice {}x{} at h = {} does not match the grid {}x{} at h = {}",
        path.display(),
        header.nx,
        header.ny,
        header.h,
        grid.nx(),
        grid.ny(),
        grid.h
    );
    let f = if header.signed { ScalarField::signed(*grid, values) } else { ScalarField::new(*grid, values) };
    f.with_context(|| format!("reading {}", path.display()))
}

/// Header and raw values of a field file.
pub fn read_raw(path: &Path) -> Result<(FieldHeader, Vec<f64>)> {
    let mut file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut head = [0u8; HEADER_LEN];
    file.read_exact(&mut head).with_context(|| format!("{}: truncated header", path.display()))?;
    let header = FieldHeader::from_bytes(&head).with_context(|| path.display().to_string())?;
    let mut body = Vec::new();
    file.read_to_end(&mut body)?;
    let n = (header.nx * header.ny) as usize;
    ensure!(body.len() == 8 * n, "{}: expected {n} values, found {} bytes", path.display(), body.len());
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, values))
}

/// Binary sets are stored as 0/1 fields.
pub fn write_binary(path: &Path, set: &BinaryField) -> Result<()> {
    write_field(path, &set.to_field())
}

pub fn read_binary(path: &Path, grid: &GridSpec) -> Result<BinaryField> {
    let f = read_field(path, grid)?;
    let values = f.values().iter().map(|&v| v != 0.0).collect();
    Ok(BinaryField::new(*grid, values)?)
}

/// Writes `x,y` rows, one per point.
pub fn write_points(path: &Path, points: &PointPattern) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?);
    w.write_all(b"x,y\n")?;
    for [x, y] in &points.points {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points(path: &Path) -> Result<Vec<[f64; 2]>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize::<(f64, f64)>().map(|row| Ok(row.map(|(x, y)| [x, y])?)).collect()
}
