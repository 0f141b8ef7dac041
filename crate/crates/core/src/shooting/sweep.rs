use rayon::prelude::*;

use super::{ComplexRoot, RealRoot, ShootError};
use crate::grid::Grid;

/// A root that can be carried from one grid node to its neighbour.
pub trait SweepRoot: Clone + Send + Sync {
    fn family_id(&self) -> u32;
    /// Distance in scaled unknowns; roots closer than the sweep's
    /// deduplication tolerance are the same root.
    fn distance(&self, other: &Self) -> f64;
}

impl SweepRoot for ComplexRoot {
    fn family_id(&self) -> u32 {
        self.family_id
    }
    fn distance(&self, other: &Self) -> f64 {
        self.omega
            .iter()
            .zip(&other.omega)
            .map(|(u, v)| (u - v).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl SweepRoot for RealRoot {
    fn family_id(&self) -> u32 {
        self.family_id
    }
    fn distance(&self, other: &Self) -> f64 {
        self.unknowns
            .iter()
            .zip(&other.unknowns)
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Longest continuation step in scaled position units.
const PATH_STEP: f64 = 0.25;
const MIN_PATH_STEP: f64 = 1e-4;
const EDGE_MIN_STEP: f64 = 1e-2;

/// Carry `root` from `from` to `to` along a straight line with adaptive
/// steps, halving on failure. `scale` divides each coordinate.
pub fn follow_path<R, F>(
    root: R,
    from: &[f64],
    to: &[f64],
    scale: &[f64],
    step: F,
) -> Result<R, ShootError>
where
    F: Fn(&R, &[f64], &[f64]) -> Result<R, ShootError>,
{
    follow(root, from, to, scale, |_| MIN_PATH_STEP, step)
}

/// Like [`follow_path`] for one edge between neighbouring nodes, giving up
/// at `EDGE_MIN_STEP`: every resolution stops the same distance short of a
/// fold, and a node past it fails quickly.
pub fn follow_edge<R, F>(root: R, from: &[f64], to: &[f64], scale: &[f64], step: F) -> Result<R, ShootError>
where
    F: Fn(&R, &[f64], &[f64]) -> Result<R, ShootError>,
{
    follow(root, from, to, scale, |total| total.min(EDGE_MIN_STEP), step)
}

fn follow<R, F>(
    mut root: R,
    from: &[f64],
    to: &[f64],
    scale: &[f64],
    min_step: impl Fn(f64) -> f64,
    step: F,
) -> Result<R, ShootError>
where
    F: Fn(&R, &[f64], &[f64]) -> Result<R, ShootError>,
{
    let total = from
        .iter()
        .zip(to)
        .zip(scale)
        .map(|((u, v), s)| ((u - v) / s).powi(2))
        .sum::<f64>()
        .sqrt();
    if total == 0.0 {
        return Ok(root);
    }
    let at = |s: f64| -> Vec<f64> { from.iter().zip(to).map(|(u, v)| u + s * (v - u)).collect() };
    let floor = min_step(total);
    let (mut s, mut h) = (0.0, (PATH_STEP / total).min(1.0));
    while s < 1.0 {
        let next = (s + h).min(1.0);
        match step(&root, &at(s), &at(next)) {
            Ok(r) => {
                root = r;
                s = next;
                h = (h * 1.5).min(PATH_STEP / total);
            }
            Err(e) => {
                h *= 0.5;
                if h * total < floor * (1.0 - 1e-12) {
                    return Err(e);
                }
            }
        }
    }
    Ok(root)
}

/// Roots already solved at one grid node, from which a sweep starts.
#[derive(Clone, Debug)]
pub struct Anchor<R> {
    pub cell: (usize, usize),
    pub roots: Vec<R>,
}

#[derive(Clone, Debug)]
pub struct SweepResult<R> {
    pub grid: Grid,
    /// Row-major, one root list per node.
    pub roots: Vec<Vec<R>>,
    /// Continuation attempts that failed from every available neighbour.
    pub failures: usize,
}

impl<R> SweepResult<R> {
    pub fn reached(&self) -> usize {
        self.roots.iter().filter(|r| !r.is_empty()).count()
    }
}

fn push_unique<R: SweepRoot>(cell: &mut Vec<R>, r: R, tol: f64) {
    if let Some(i) = cell.iter().position(|o| o.distance(&r) < tol) {
        if r.family_id() < cell[i].family_id() {
            cell[i] = r;
        }
    } else {
        cell.push(r);
    }
}

/// Nodes at Manhattan distance `k` from `a`, in a fixed order.
fn layer(grid: &Grid, a: (usize, usize), k: usize) -> Vec<(usize, usize)> {
    let (ax, ay) = (a.0 as i64, a.1 as i64);
    let k = k as i64;
    let mut out = Vec::new();
    for dy in -k..=k {
        let rest = k - dy.abs();
        let dxs: &[i64] = if rest == 0 { &[0] } else { &[-rest, rest] };
        for &dx in dxs {
            let (ix, iy) = (ax + dx, ay + dy);
            if ix >= 0 && iy >= 0 && (ix as usize) < grid.nx && (iy as usize) < grid.ny {
                out.push((ix as usize, iy as usize));
            }
        }
    }
    out
}

/// The one or two neighbours one step closer to the anchor, the one along
/// the axis of larger offset first.
fn toward(a: (usize, usize), c: (usize, usize)) -> Vec<(usize, usize)> {
    let dx = c.0 as i64 - a.0 as i64;
    let dy = c.1 as i64 - a.1 as i64;
    let mut out = Vec::with_capacity(2);
    let step_x = (dx != 0).then(|| ((c.0 as i64 - dx.signum()) as usize, c.1));
    let step_y = (dy != 0).then(|| (c.0, (c.1 as i64 - dy.signum()) as usize));
    let (first, second) = if dy.abs() > dx.abs() {
        (step_y, step_x)
    } else {
        (step_x, step_y)
    };
    out.extend(first);
    out.extend(second);
    out
}

/// Carry the anchor's roots over the whole grid in wavefronts of increasing
/// Manhattan distance. Each node continues every family found at its inner
/// neighbours; nodes within a wavefront are processed in parallel and the
/// result does not depend on scheduling.
pub fn continuation_sweep<R, F>(
    grid: &Grid,
    anchor: Anchor<R>,
    dedup_tol: f64,
    step: F,
) -> SweepResult<R>
where
    R: SweepRoot,
    F: Fn(&R, [f64; 2], [f64; 2]) -> Result<R, ShootError> + Sync,
{
    let mut roots: Vec<Vec<R>> = vec![Vec::new(); grid.len()];
    let a = anchor.cell;
    let mut anchor_roots = Vec::new();
    for r in anchor.roots {
        push_unique(&mut anchor_roots, r, dedup_tol);
    }
    roots[grid.index(a.0, a.1)] = anchor_roots;
    let max_k = [
        (0, 0),
        (grid.nx - 1, 0),
        (0, grid.ny - 1),
        (grid.nx - 1, grid.ny - 1),
    ]
    .iter()
    .map(|&(x, y)| {
        (x as i64 - a.0 as i64).unsigned_abs() as usize
            + (y as i64 - a.1 as i64).unsigned_abs() as usize
    })
    .max()
    .unwrap_or(0);
    let mut failures = 0;
    for k in 1..=max_k {
        let cells = layer(grid, a, k);
        let results: Vec<(usize, Vec<R>, usize)> = cells
            .par_iter()
            .map(|&c| {
                let target = grid.point(c.0, c.1);
                let mut out: Vec<R> = Vec::new();
                let mut failed = 0;
                let sources = toward(a, c);
                let mut tried: Vec<u32> = Vec::new();
                for (si, &n) in sources.iter().enumerate() {
                    let from = grid.point(n.0, n.1);
                    for r in &roots[grid.index(n.0, n.1)] {
                        let fid = r.family_id();
                        if out.iter().any(|o| o.family_id() == fid) {
                            continue;
                        }
                        match step(r, from, target) {
                            Ok(next) => push_unique(&mut out, next, dedup_tol),
                            Err(_) => {
                                // Count it only when no other neighbour can supply the family.
                                let later = sources[si + 1..].iter().any(|m| {
                                    roots[grid.index(m.0, m.1)]
                                        .iter()
                                        .any(|o| o.family_id() == fid)
                                });
                                if !later && !tried.contains(&fid) {
                                    failed += 1;
                                }
                            }
                        }
                        tried.push(fid);
                    }
                }
                (grid.index(c.0, c.1), out, failed)
            })
            .collect();
        for (idx, cell, failed) in results {
            roots[idx] = cell;
            failures += failed;
        }
    }
    SweepResult {
        grid: grid.clone(),
        roots,
        failures,
    }
}

/// Union of two sweeps over the same grid; roots of `b` already present in
/// `a` are dropped.
pub fn merge_sweeps<R: SweepRoot>(
    mut a: SweepResult<R>,
    b: SweepResult<R>,
    dedup_tol: f64,
) -> SweepResult<R> {
    for (cell, extra) in a.roots.iter_mut().zip(b.roots) {
        for r in extra {
            if !cell.iter().any(|o| o.distance(&r) < dedup_tol) {
                cell.push(r);
            }
        }
    }
    a.failures += b.failures;
    a
}
