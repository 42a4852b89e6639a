//! In-process domain decomposition with deterministic results.
//!
//! Each level is cut into a `px x py` grid of tiles. A stencil application
//! gives every tile its own padded input buffer (the halo exchange: owned
//! values, neighbour values from the global field and boundary-closure ghosts)
//! and writes only the tile's own points. Every output value is computed by
//! the same arithmetic in the same order whatever the tiling, so results are
//! bitwise independent of the worker count.
//!
//! Global reductions sum fixed-size chunks, then combine the chunk sums in
//! ascending order. The chunking does not depend on the worker count either.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{HelmError, Result};
use crate::grid::{coarsen_count, GridHierarchy};
use crate::operators::{IndexRect, LevelOperator};
use crate::transfers::{prolong_rows, restrict_rows};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "HELMDEF_WORKERS";

/// Number of entries per partial sum in reductions.
pub const REDUCTION_CHUNK: usize = 1024;

/// Tiles of every level for a given worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub workers: usize,
    pub px: usize,
    pub py: usize,
    /// Non-empty tiles per level, row-major over the tile grid.
    pub tiles: Vec<Vec<IndexRect>>,
    /// Halo width each level's operator needs.
    pub halo_radius: Vec<usize>,
}

impl Partition {
    /// Tiles that are active on a 1-based level.
    pub fn active_workers(&self, level: usize) -> usize {
        self.tiles[level - 1].len()
    }
}

/// `px * py = workers` minimizing the largest tile perimeter on `nx x ny`.
pub fn tile_shape(workers: usize, nx: usize, ny: usize) -> (usize, usize) {
    let mut best = (workers, 1);
    let mut best_perim = f64::INFINITY;
    for px in 1..=workers {
        if !workers.is_multiple_of(px) {
            continue;
        }
        let py = workers / px;
        let perim = 2.0 * ((nx as f64 / px as f64).ceil() + (ny as f64 / py as f64).ceil());
        if perim < best_perim {
            best_perim = perim;
            best = (px, py);
        }
    }
    best
}

fn cuts(n: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|k| k * n / parts).collect()
}

fn tiles_from_cuts(xs: &[usize], ys: &[usize]) -> Vec<IndexRect> {
    let mut t = Vec::new();
    for w in ys.windows(2) {
        for v in xs.windows(2) {
            let r = IndexRect {
                i0: v[0],
                i1: v[1],
                j0: w[0],
                j1: w[1],
            };
            if !r.is_empty() {
                t.push(r);
            }
        }
    }
    t
}

/// Coarse cut of a fine cut: fine point `2I` lies in `[a, b)` iff `I` lies in
/// `[ceil(a/2), ceil(b/2))`, so coarse tiles nest under fine tiles.
fn coarsen_cuts(c: &[usize]) -> Vec<usize> {
    c.iter().map(|v| v.div_ceil(2)).collect()
}

/// Partition every level of `hierarchy` among `workers` tiles.
pub fn partition_grid(hierarchy: &GridHierarchy, workers: usize) -> Result<Partition> {
    if workers == 0 {
        return Err(HelmError::Hierarchy("worker count must be at least 1".into()));
    }
    let g = hierarchy.finest();
    let (px, py) = tile_shape(workers, g.nx, g.ny);
    let (mut xs, mut ys) = (cuts(g.nx, px), cuts(g.ny, py));
    let mut tiles = Vec::new();
    let mut halo_radius = Vec::new();
    for l in 1..=hierarchy.num_levels() {
        tiles.push(tiles_from_cuts(&xs, &ys));
        halo_radius.push(crate::operators::kernels_for_level(l).map(|(a, m)| a.radius().max(m.radius()))?);
        xs = coarsen_cuts(&xs);
        ys = coarsen_cuts(&ys);
    }
    Ok(Partition {
        workers,
        px,
        py,
        tiles,
        halo_radius,
    })
}

/// Padded input of one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBuffer {
    pub tile: IndexRect,
    pub radius: usize,
    pub data: Vec<Complex64>,
}

/// Build the padded buffers of all tiles: owned values plus a halo of the
/// operator's radius taken from neighbouring tiles, or from the boundary
/// closure on physical edges.
pub fn halo_exchange(op: &LevelOperator, u: &[Complex64], tiles: &[IndexRect]) -> Vec<TileBuffer> {
    tiles
        .iter()
        .map(|&tile| {
            let mut data = Vec::new();
            op.fill_padded(u, tile, &mut data);
            TileBuffer {
                tile,
                radius: op.radius(),
                data,
            }
        })
        .collect()
}

fn chunk_dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        acc += a.conj() * b;
    }
    acc
}

/// `sum conj(u_i) v_i` with a worker-independent summation order.
pub fn reduce_dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in u.chunks(REDUCTION_CHUNK).zip(v.chunks(REDUCTION_CHUNK)) {
        acc += chunk_dot(a, b);
    }
    acc
}

/// Worker count from, in order of precedence, an explicit flag, the
/// `HELMDEF_WORKERS` environment variable, a configuration value, or 1.
pub fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return check_workers(w);
    }
    if let Ok(s) = std::env::var(WORKERS_ENV) {
        let w = s
            .trim()
            .parse::<usize>()
            .map_err(|_| HelmError::config(0, format!("{WORKERS_ENV}={s} is not a worker count")))?;
        return check_workers(w);
    }
    check_workers(config.unwrap_or(1))
}

fn check_workers(w: usize) -> Result<usize> {
    if w == 0 {
        Err(HelmError::config(0, "workers must be at least 1"))
    } else {
        Ok(w)
    }
}

/// Worker pool plus tiling cache used for every kernel of a solve.
pub struct Executor {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
    tiles: Mutex<HashMap<(usize, usize), Vec<IndexRect>>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers).finish()
    }
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        check_workers(workers)?;
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| HelmError::Numerical(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Executor {
            workers,
            pool,
            tiles: Mutex::new(HashMap::new()),
        })
    }

    /// Executor whose tiles nest across the levels of `hierarchy`.
    pub fn for_hierarchy(hierarchy: &GridHierarchy, workers: usize) -> Result<Self> {
        let exec = Executor::new(workers)?;
        let part = partition_grid(hierarchy, workers)?;
        {
            let mut cache = exec.tiles.lock().expect("tile cache poisoned");
            for (g, t) in hierarchy.levels.iter().zip(part.tiles) {
                cache.insert((g.nx, g.ny), t);
            }
        }
        Ok(exec)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Tiles for an `nx x ny` grid. Grids not registered through a hierarchy
    /// get cuts nested under the next finer registered grid when there is one.
    pub fn tiles(&self, nx: usize, ny: usize) -> Vec<IndexRect> {
        let mut cache = self.tiles.lock().expect("tile cache poisoned");
        if let Some(t) = cache.get(&(nx, ny)) {
            return t.clone();
        }
        let (px, py) = tile_shape(self.workers, nx, ny);
        let t = tiles_from_cuts(&cuts(nx, px), &cuts(ny, py));
        // Sub-grids of a registered grid: derive the cuts from its tiles.
        let t = match (2 * nx).checked_sub(1).zip((2 * ny).checked_sub(1)) {
            Some((fx, fy)) if coarsen_count(fx) == Some(nx) && cache.contains_key(&(fx, fy)) => {
                let fine = &cache[&(fx, fy)];
                let mut xs: Vec<usize> = fine.iter().flat_map(|r| [r.i0, r.i1]).collect();
                let mut ys: Vec<usize> = fine.iter().flat_map(|r| [r.j0, r.j1]).collect();
                xs.sort_unstable();
                xs.dedup();
                ys.sort_unstable();
                ys.dedup();
                tiles_from_cuts(&coarsen_cuts(&xs), &coarsen_cuts(&ys))
            }
            _ => t,
        };
        cache.insert((nx, ny), t.clone());
        t
    }

    fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    /// `out = op(u)` tile by tile.
    pub fn apply(&self, op: &LevelOperator, u: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if u.len() != op.len() {
            return Err(HelmError::shape(op.len(), u.len()));
        }
        if out.len() != op.len() {
            return Err(HelmError::shape(op.len(), out.len()));
        }
        let tiles = self.tiles(op.nx, op.ny);
        if tiles.len() == 1 {
            let mut pad = Vec::new();
            op.fill_padded(u, tiles[0], &mut pad);
            op.apply_padded(u, &pad, tiles[0], out);
            return Ok(());
        }
        let results: Vec<(IndexRect, Vec<Complex64>)> = self.run(|| {
            tiles
                .par_iter()
                .map(|&tile| {
                    let mut pad = Vec::new();
                    op.fill_padded(u, tile, &mut pad);
                    let mut local = vec![Complex64::new(0.0, 0.0); tile.len()];
                    op.apply_padded(u, &pad, tile, &mut local);
                    (tile, local)
                })
                .collect()
        });
        for (tile, local) in results {
            for (row, src) in local.chunks(tile.width()).enumerate() {
                let start = (tile.j0 + row) * op.nx + tile.i0;
                out[start..start + tile.width()].copy_from_slice(src);
            }
        }
        Ok(())
    }

    /// Conjugated inner product `<u, v>`.
    pub fn dot(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        if self.pool.is_none() || u.len() <= REDUCTION_CHUNK {
            return reduce_dot(u, v);
        }
        let partials: Vec<Complex64> = self.run(|| {
            u.par_chunks(REDUCTION_CHUNK)
                .zip(v.par_chunks(REDUCTION_CHUNK))
                .map(|(a, b)| chunk_dot(a, b))
                .collect()
        });
        let mut acc = Complex64::new(0.0, 0.0);
        for p in partials {
            acc += p;
        }
        acc
    }

    pub fn norm(&self, u: &[Complex64]) -> f64 {
        self.dot(u, u).re.max(0.0).sqrt()
    }

    fn row_chunks(&self, rows: usize) -> usize {
        rows.div_ceil(self.workers.max(1)).max(1)
    }

    /// Restriction of a fine vector on `fnx x fny` to the next coarser grid.
    pub fn restrict(&self, fine: &[Complex64], fnx: usize, fny: usize) -> Result<(Vec<Complex64>, usize, usize)> {
        if self.pool.is_none() {
            return crate::transfers::restrict_vec(fine, fnx, fny);
        }
        if fine.len() != fnx * fny {
            return Err(HelmError::shape(fnx * fny, fine.len()));
        }
        let (cx, cy) = match (coarsen_count(fnx), coarsen_count(fny)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(HelmError::Level(format!("grid {fnx}x{fny} has no coarse level"))),
        };
        let mut out = vec![Complex64::new(0.0, 0.0); cx * cy];
        let rows = self.row_chunks(cy);
        self.run(|| {
            out.par_chunks_mut(rows * cx).enumerate().for_each(|(k, chunk)| {
                restrict_rows(fine, fnx, fny, cx, k * rows, chunk);
            })
        });
        Ok((out, cx, cy))
    }

    /// Prolongation of a coarse vector onto the `fnx x fny` grid.
    pub fn prolong(&self, coarse: &[Complex64], fnx: usize, fny: usize) -> Result<Vec<Complex64>> {
        if self.pool.is_none() {
            return crate::transfers::prolong_vec(coarse, fnx, fny);
        }
        let (cx, cy) = match (coarsen_count(fnx), coarsen_count(fny)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(HelmError::Level(format!("grid {fnx}x{fny} has no coarse level"))),
        };
        if coarse.len() != cx * cy {
            return Err(HelmError::shape(cx * cy, coarse.len()));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); fnx * fny];
        let rows = self.row_chunks(fny);
        self.run(|| {
            out.par_chunks_mut(rows * fnx).enumerate().for_each(|(k, chunk)| {
                prolong_rows(coarse, cx, cy, fnx, k * rows, chunk);
            })
        });
        Ok(out)
    }
}
