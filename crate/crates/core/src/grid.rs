//! Uniform 2D grids, complex wave fields on them, and the overlap metric.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

const FIELD_MAGIC: &[u8; 4] = b"SCWF";
const FLAGS_MAGIC: &[u8; 4] = b"SCFL";
const FORMAT_VERSION: u32 = 1;

/// Uniform rectangular grid. Point `(ix, iy)` sits at
/// `origin + (ix * spacing[0], iy * spacing[1])`; storage is row-major with
/// `x` varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(origin: [f64; 2], spacing: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one point per axis".into(),
            ));
        }
        if !spacing.iter().all(|&h| h > 0.0 && h.is_finite())
            || !origin.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "bad grid origin {origin:?} / spacing {spacing:?}"
            )));
        }
        Ok(Grid {
            origin,
            spacing,
            nx,
            ny,
        })
    }

    /// `n` points per axis covering `[min, max)` on a periodic lattice.
    pub fn periodic(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        Grid::new(
            [x[0], y[0]],
            [(x[1] - x[0]) / nx as f64, (y[1] - y[0]) / ny as f64],
            nx,
            ny,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
        ]
    }

    pub fn point_at(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.coords(idx);
        self.point(ix, iy)
    }

    pub fn x_values(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|i| self.origin[0] + i as f64 * self.spacing[0])
            .collect()
    }

    pub fn y_values(&self) -> Vec<f64> {
        (0..self.ny)
            .map(|i| self.origin[1] + i as f64 * self.spacing[1])
            .collect()
    }

    /// Nearest grid node to `x`, clamped to the grid.
    pub fn nearest(&self, x: [f64; 2]) -> (usize, usize) {
        let ix = ((x[0] - self.origin[0]) / self.spacing[0])
            .round()
            .clamp(0.0, (self.nx - 1) as f64);
        let iy = ((x[1] - self.origin[1]) / self.spacing[1])
            .round()
            .clamp(0.0, (self.ny - 1) as f64);
        (ix as usize, iy as usize)
    }

    /// Sub-grid of the nodes lying in `[x0, x1] x [y0, y1]`, together with the
    /// index offset of its first node.
    pub fn window(&self, x: [f64; 2], y: [f64; 2]) -> Result<(Grid, [usize; 2])> {
        let lo = |o: f64, h: f64, v: f64| ((v - o) / h - 1e-9).ceil().max(0.0) as usize;
        let hi = |o: f64, h: f64, v: f64, n: usize| {
            (((v - o) / h + 1e-9).floor() as isize).min(n as isize - 1)
        };
        let (ix0, iy0) = (
            lo(self.origin[0], self.spacing[0], x[0]),
            lo(self.origin[1], self.spacing[1], y[0]),
        );
        let (ix1, iy1) = (
            hi(self.origin[0], self.spacing[0], x[1], self.nx),
            hi(self.origin[1], self.spacing[1], y[1], self.ny),
        );
        if ix1 < ix0 as isize || iy1 < iy0 as isize {
            return Err(Error::InvalidParameter(format!(
                "window {x:?} x {y:?} misses the grid"
            )));
        }
        let sub = Grid::new(
            self.point(ix0, iy0),
            self.spacing,
            ix1 as usize - ix0 + 1,
            iy1 as usize - iy0 + 1,
        )?;
        Ok((sub, [ix0, iy0]))
    }

    fn same_as(&self, other: &Grid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        self.nx == other.nx
            && self.ny == other.ny
            && (0..2).all(|k| {
                close(self.origin[k], other.origin[k]) && close(self.spacing[k], other.spacing[k])
            })
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Complex amplitudes on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub amplitudes: Vec<C64>,
}

impl WaveField {
    pub fn zeros(grid: Grid) -> Self {
        WaveField {
            grid,
            amplitudes: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a {}x{} grid",
                amplitudes.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(WaveField { grid, amplitudes })
    }

    pub fn at(&self, ix: usize, iy: usize) -> C64 {
        self.amplitudes[self.grid.index(ix, iy)]
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `sum |psi|^2 dA`.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr();
        if n > 0.0 {
            let s = n.sqrt().recip();
            self.amplitudes.iter_mut().for_each(|z| *z *= s);
        }
    }

    pub fn normalized(&self) -> Self {
        let mut f = self.clone();
        f.normalize();
        f
    }

    /// `sum conj(self) other dA`.
    pub fn inner(&self, other: &WaveField) -> Result<C64> {
        self.grid.ensure_same(&other.grid)?;
        let s: C64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_area())
    }

    /// Copy of the amplitudes restricted to a window of this grid.
    pub fn crop(&self, window: &Grid, offset: [usize; 2]) -> Result<Self> {
        if offset[0] + window.nx > self.grid.nx || offset[1] + window.ny > self.grid.ny {
            return Err(Error::GridMismatch("window exceeds field".into()));
        }
        let mut out = Vec::with_capacity(window.len());
        for iy in 0..window.ny {
            for ix in 0..window.nx {
                out.push(self.at(ix + offset[0], iy + offset[1]));
            }
        }
        WaveField::from_vec(*window, out)
    }

    /// Zero every amplitude whose node fails `keep`.
    pub fn masked(&self, keep: impl Fn([f64; 2]) -> bool) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                if keep(self.grid.point_at(i)) {
                    z
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        WaveField {
            grid: self.grid,
            amplitudes,
        }
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, FIELD_MAGIC, &self.grid)?;
        for z in &self.amplitudes {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let grid = read_header(&mut r, FIELD_MAGIC, path)?;
        let mut amplitudes = Vec::with_capacity(grid.len());
        let mut buf = [0u8; 16];
        for _ in 0..grid.len() {
            r.read_exact(&mut buf).map_err(|e| format_err(path, e))?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            amplitudes.push(C64::new(re, im));
        }
        WaveField::from_vec(grid, amplitudes)
    }

    /// Plot-ready CSV with columns `x,y,re,im,abs2`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "x,y,re,im,abs2")?;
        for (i, z) in self.amplitudes.iter().enumerate() {
            let [x, y] = self.grid.point_at(i);
            writeln!(w, "{x},{y},{},{},{}", z.re, z.im, z.norm_sqr())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-cell diagnostics of a semiclassical field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CellFlags(pub u8);

impl CellFlags {
    pub const CAUSTIC: CellFlags = CellFlags(1);
    pub const UNREACHABLE: CellFlags = CellFlags(2);
    pub const FILTERED: CellFlags = CellFlags(4);

    pub fn contains(self, other: CellFlags) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn insert(&mut self, other: CellFlags) {
        self.0 |= other.0;
    }

    pub fn is_clear(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlagField {
    pub grid: Grid,
    pub flags: Vec<CellFlags>,
}

impl FlagField {
    pub fn clear(grid: Grid) -> Self {
        FlagField {
            grid,
            flags: vec![CellFlags::default(); grid.len()],
        }
    }

    pub fn count(&self, flag: CellFlags) -> usize {
        self.flags.iter().filter(|f| f.contains(flag)).count()
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, FLAGS_MAGIC, &self.grid)?;
        let bytes: Vec<u8> = self.flags.iter().map(|f| f.0).collect();
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let grid = read_header(&mut r, FLAGS_MAGIC, path)?;
        let mut bytes = vec![0u8; grid.len()];
        r.read_exact(&mut bytes).map_err(|e| format_err(path, e))?;
        Ok(FlagField {
            grid,
            flags: bytes.into_iter().map(CellFlags).collect(),
        })
    }
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], grid: &Grid) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.nx as u64).to_le_bytes())?;
    w.write_all(&(grid.ny as u64).to_le_bytes())?;
    for v in grid.origin.iter().chain(&grid.spacing) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 4], path: &Path) -> Result<Grid> {
    let mut head = [0u8; 56];
    r.read_exact(&mut head).map_err(|e| format_err(path, e))?;
    if &head[..4] != magic {
        return Err(Error::Format {
            path: path.into(),
            reason: "bad magic".into(),
        });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            path: path.into(),
            reason: format!("unsupported version {version}"),
        });
    }
    let u = |k: usize| u64::from_le_bytes(head[k..k + 8].try_into().unwrap()) as usize;
    let f = |k: usize| f64::from_le_bytes(head[k..k + 8].try_into().unwrap());
    Grid::new([f(24), f(32)], [f(40), f(48)], u(8), u(16))
}

fn format_err(path: &Path, e: std::io::Error) -> Error {
    Error::Format {
        path: path.into(),
        reason: e.to_string(),
    }
}

/// Evaluate `f` at every node. Failures carry the node coordinates.
pub fn sample_on_grid<F>(f: F, grid: &Grid) -> Result<WaveField>
where
    F: Fn([f64; 2]) -> Result<C64> + Sync,
{
    let amplitudes = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point_at(i);
            f(x).map_err(|e| Error::Sampling {
                x: x[0],
                y: x[1],
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WaveField::from_vec(*grid, amplitudes)
}

const NORM_TOL: f64 = 1e-6;

/// `|<a|b>|^2` for two normalised fields on the same grid.
pub fn overlap(a: &WaveField, b: &WaveField) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    for f in [a, b] {
        let n = f.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized {
                norm: n,
                tol: NORM_TOL,
            });
        }
    }
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Overlap after normalising both fields; zero when either vanishes.
pub fn normalized_overlap(a: &WaveField, b: &WaveField) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    if a.norm_sqr() == 0.0 || b.norm_sqr() == 0.0 {
        return Ok(0.0);
    }
    overlap(&a.normalized(), &b.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavepacket::{coherent_state_amplitude, WavepacketParams};

    fn grid() -> Grid {
        Grid::periodic([-4.0, 4.0], [-3.0, 5.0], 32, 24).unwrap()
    }

    #[test]
    fn zero_function_gives_zero_field() {
        let f = sample_on_grid(|_| Ok(C64::new(0.0, 0.0)), &grid()).unwrap();
        assert!(f.amplitudes.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn coherent_state_is_normalized_on_wide_grid() {
        let w =
            WavepacketParams::new(vec![0.5, -0.2], vec![1.0, -2.0], vec![1.0, 0.7], 1.0).unwrap();
        let g = Grid::periodic([0.5 - 8.0, 0.5 + 8.0], [-0.2 - 5.6, -0.2 + 5.6], 256, 256).unwrap();
        let f = sample_on_grid(|x| Ok(coherent_state_amplitude(&x, &w)), &g).unwrap();
        assert!((f.norm_sqr() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn self_overlap_and_orthogonal_nodes() {
        let g = grid();
        let w = WavepacketParams::planar([0.0, 1.0], [1.0, 0.0], 0.8).unwrap();
        let f = sample_on_grid(|x| Ok(coherent_state_amplitude(&x, &w)), &g)
            .unwrap()
            .normalized();
        assert!((overlap(&f, &f).unwrap() - 1.0).abs() < 1e-10);

        let unit = |k: usize| {
            let mut a = WaveField::zeros(g);
            a.amplitudes[k] = C64::new(g.cell_area().sqrt().recip(), 0.0);
            a
        };
        assert_eq!(overlap(&unit(3), &unit(40)).unwrap(), 0.0);
    }

    #[test]
    fn overlap_is_symmetric() {
        let g = grid();
        let a = sample_on_grid(
            |x| {
                Ok(C64::new((x[0] * 0.3).cos(), x[1].sin())
                    * (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp())
            },
            &g,
        )
        .unwrap()
        .normalized();
        let b = sample_on_grid(
            |x| Ok(C64::new(1.0, 0.5 * x[0]) * (-((x[0] - 1.0).powi(2) + x[1] * x[1]) / 3.0).exp()),
            &g,
        )
        .unwrap()
        .normalized();
        assert_eq!(overlap(&a, &b).unwrap(), overlap(&b, &a).unwrap());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = WaveField::zeros(grid());
        let b = WaveField::zeros(Grid::periodic([-4.0, 4.0], [-3.0, 5.0], 32, 25).unwrap());
        assert!(matches!(overlap(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn sampling_error_carries_coordinates() {
        let g = grid();
        let err = sample_on_grid(
            |x| {
                if x[0] > 3.0 {
                    Err(Error::InvalidParameter("boom".into()))
                } else {
                    Ok(C64::new(1.0, 0.0))
                }
            },
            &g,
        )
        .unwrap_err();
        match err {
            Error::Sampling { x, .. } => assert!(x > 3.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_and_flags_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid();
        let f = sample_on_grid(|x| Ok(C64::new(x[0], -x[1] * 0.25)), &g).unwrap();
        let path = dir.path().join("f.bin");
        f.write_binary(&path).unwrap();
        assert_eq!(WaveField::read_binary(&path).unwrap(), f);

        let mut flags = FlagField::clear(g);
        flags.flags[7].insert(CellFlags::CAUSTIC);
        flags.flags[9].insert(CellFlags::UNREACHABLE);
        let path = dir.path().join("flags.bin");
        flags.write_binary(&path).unwrap();
        assert_eq!(FlagField::read_binary(&path).unwrap(), flags);
        assert!(WaveField::read_binary(&path).is_err());
    }

    #[test]
    fn window_selects_contained_nodes() {
        let g = Grid::periodic([-4.0, 4.0], [-4.0, 4.0], 16, 16).unwrap();
        let (w, off) = g.window([-1.0, 1.0], [0.0, 2.0]).unwrap();
        assert_eq!(off, [6, 8]);
        assert_eq!((w.nx, w.ny), (5, 5));
        assert_eq!(w.point(0, 0), [-1.0, 0.0]);
    }
}
