//! PLP1 binary field snapshots and CSV export of ω-fields.

use super::{LayeredField, PaddedField, PlateGrid, VecField};
use crate::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 4] = b"PLP1";
pub const HEADER_LEN: usize = 64;
const FLAG_PADDED: u32 = 1;

/// One array in (y, x, layer, component) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub ny: u32,
    pub nx: u32,
    pub nlayers: u32,
    pub ncomp: u32,
    pub padded: bool,
    pub lx: f64,
    pub ly: f64,
    pub time: f64,
    pub step: u64,
    pub data: Vec<f64>,
}

impl Block {
    fn expected_len(&self) -> usize {
        (self.ny as usize) * (self.nx as usize) * (self.nlayers as usize) * (self.ncomp as usize)
    }

    pub fn vector(grid: &PlateGrid, name: &str, f: &VecField, time: f64, step: u64) -> Self {
        Block {
            name: name.into(),
            ny: grid.my() as u32,
            nx: grid.mx() as u32,
            nlayers: 1,
            ncomp: 2,
            padded: false,
            lx: grid.lx(),
            ly: grid.ly(),
            time,
            step,
            data: f.values.iter().flat_map(|v| [v[0], v[1]]).collect(),
        }
    }

    pub fn padded_scalar(grid: &PlateGrid, name: &str, f: &PaddedField, time: f64, step: u64) -> Self {
        Block {
            name: name.into(),
            ny: grid.pmy() as u32,
            nx: grid.pmx() as u32,
            nlayers: 1,
            ncomp: 1,
            padded: true,
            lx: grid.lx(),
            ly: grid.ly(),
            time,
            step,
            data: f.values.clone(),
        }
    }

    pub fn layered(grid: &PlateGrid, name: &str, f: &LayeredField, time: f64, step: u64) -> Self {
        Block {
            name: name.into(),
            ny: grid.my() as u32,
            nx: grid.mx() as u32,
            nlayers: f.nlayers as u32,
            ncomp: 3,
            padded: false,
            lx: grid.lx(),
            ly: grid.ly(),
            time,
            step,
            data: f.values.iter().flat_map(|s| [s.a11, s.a22, s.a12]).collect(),
        }
    }

    pub fn to_layered(&self) -> Result<LayeredField> {
        if self.ncomp != 3 {
            return Err(Error::Format(format!("block {} has {} components, not 3", self.name, self.ncomp)));
        }
        Ok(LayeredField {
            nlayers: self.nlayers as usize,
            values: self.data.chunks(3).map(|c| crate::tensor::Sym2::new(c[0], c[1], c[2])).collect(),
        })
    }

    fn header(&self) -> Result<[u8; HEADER_LEN]> {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(MAGIC);
        let nb = self.name.as_bytes();
        if nb.len() > 8 {
            return Err(Error::Format(format!("block name {:?} longer than 8 bytes", self.name)));
        }
        h[4..4 + nb.len()].copy_from_slice(nb);
        let flags = if self.padded { FLAG_PADDED } else { 0 };
        for (k, v) in [self.ny, self.nx, self.nlayers, self.ncomp, flags].iter().enumerate() {
            h[12 + 4 * k..16 + 4 * k].copy_from_slice(&v.to_le_bytes());
        }
        for (k, v) in [self.lx, self.ly, self.time].iter().enumerate() {
            h[32 + 8 * k..40 + 8 * k].copy_from_slice(&v.to_le_bytes());
        }
        h[56..64].copy_from_slice(&self.step.to_le_bytes());
        Ok(h)
    }

    fn parse(bytes: &[u8]) -> Result<(Block, usize)> {
        if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
            return Err(Error::Format("missing PLP1 header".into()));
        }
        let u32at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let name = String::from_utf8_lossy(&bytes[4..12]).trim_end_matches('\0').to_string();
        let mut b = Block {
            name,
            ny: u32at(12),
            nx: u32at(16),
            nlayers: u32at(20),
            ncomp: u32at(24),
            padded: u32at(28) & FLAG_PADDED != 0,
            lx: f64at(32),
            ly: f64at(40),
            time: f64at(48),
            step: u64::from_le_bytes(bytes[56..64].try_into().unwrap()),
            data: Vec::new(),
        };
        let n = b.expected_len();
        let end = HEADER_LEN + 8 * n;
        if bytes.len() < end {
            return Err(Error::Format(format!("block {} truncated: need {} values", b.name, n)));
        }
        b.data = bytes[HEADER_LEN..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok((b, end))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Snapshot {
    pub blocks: Vec<Block>,
}

impl Snapshot {
    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if b.data.len() != b.expected_len() {
                return Err(Error::ShapeMismatch { expected: b.expected_len(), got: b.data.len() });
            }
            out.extend_from_slice(&b.header()?);
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut blocks = Vec::new();
        while !bytes.is_empty() {
            let (b, used) = Block::parse(bytes)?;
            blocks.push(b);
            bytes = &bytes[used..];
        }
        if blocks.is_empty() {
            return Err(Error::Format("empty snapshot".into()));
        }
        Ok(Snapshot { blocks })
    }

    /// Writes `path` and a key=value sidecar next to it (see [`meta_path`]).
    pub fn write(&self, path: &Path, meta: &[(String, String)]) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        let mut m = std::fs::File::create(meta_path(path))?;
        writeln!(m, "format=PLP1")?;
        writeln!(m, "blocks={}", self.blocks.iter().map(|b| b.name.as_str()).collect::<Vec<_>>().join(","))?;
        for (k, v) in meta {
            writeln!(m, "{k}={v}")?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl Block {
    /// Rows (i, j, x, y) then every (layer, component) value; padded blocks include the ghost ring at negative indices.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let off = if self.padded { 1 } else { 0 };
        let (mx, my) = (self.nx as usize - 2 * off, self.ny as usize - 2 * off);
        let hx = self.lx / (mx.max(2) - 1) as f64;
        let hy = self.ly / (my.max(2) - 1) as f64;
        let per = (self.nlayers * self.ncomp) as usize;
        let comp = |c: usize| -> String {
            match (self.ncomp, c) {
                (1, _) => String::new(),
                (2, c) => ["_1", "_2"][c].into(),
                (3, c) => ["_11", "_22", "_12"][c].into(),
                (_, c) => format!("_{c}"),
            }
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "i,j,x,y")?;
        for l in 0..self.nlayers as usize {
            for c in 0..self.ncomp as usize {
                if self.nlayers > 1 {
                    write!(f, ",{}_l{l}{}", self.name, comp(c))?;
                } else {
                    write!(f, ",{}{}", self.name, comp(c))?;
                }
            }
        }
        writeln!(f)?;
        for (r, row) in self.data.chunks(per).enumerate() {
            let (i, j) = ((r % self.nx as usize) as isize - off as isize, (r / self.nx as usize) as isize - off as isize);
            write!(f, "{i},{j},{},{}", i as f64 * hx, j as f64 * hy)?;
            for v in row {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Snapshot {
    /// One `<stem>_<block>.csv` per block in `dir`.
    pub fn dump_csv(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.blocks
            .iter()
            .map(|b| {
                let p = dir.join(format!("{stem}_{}.csv", b.name));
                b.write_csv(&p)?;
                Ok(p)
            })
            .collect()
    }
}

/// `snap_3.plp` → `snap_3.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn read_meta(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(meta_path(path))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

/// CSV with columns x, y and one per named nodal array.
pub fn write_field_csv(path: &Path, grid: &PlateGrid, columns: &[(&str, &[f64])]) -> Result<()> {
    for (_, c) in columns {
        grid.check_len(grid.n_nodes(), c.len())?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "x,y")?;
    for (name, _) in columns {
        write!(f, ",{name}")?;
    }
    writeln!(f)?;
    for n in 0..grid.n_nodes() {
        let (x, y) = grid.point(n);
        write!(f, "{x},{y}")?;
        for (_, c) in columns {
            write!(f, ",{}", c[n])?;
        }
        writeln!(f)?;
    }
    Ok(())
}
