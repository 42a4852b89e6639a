//! Matrix-free Helmholtz and shifted-Laplacian operators on every level.
//!
//! An operator on level `l` applies
//!
//! ```text
//! v(x) = sum_p lap(p) u(x+p) / h_l^2  -  shift * sum_p mass(p) k^2(x+p) u(x+p)
//! ```
//!
//! where `shift` is 1 for the Helmholtz operator and `1 + i beta2` for the
//! complex shifted Laplacian. Level 1 uses the 5-point Laplacian with a
//! pointwise mass term; every coarser level uses the exact Galerkin kernels of
//! the previous one (5x5 on level 2, 7x7 from level 3 on).
//!
//! Boundary closure synthesizes only the first ghost ring from the interior
//! values; ghost rings further out are zero. Sommerfeld boundary points of the
//! wide coarse levels use the second-order 5-point row instead of the wide
//! kernel. Dirichlet boundary points are pinned to zero on every level.

pub mod tables;

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{HelmError, Result};
use crate::grid::{BoundaryKind, ComplexField, GridHierarchy, GridLevel};
use crate::transfers::galerkin_coarsen;

/// Exact-rational square stencil: `numerators[(dy + r) * (2r + 1) + dx + r] / 2^den_log2`,
/// scaled by `h^h_power`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilKernel {
    radius: usize,
    numerators: Vec<i128>,
    den_log2: u32,
    h_power: i32,
}

impl StencilKernel {
    pub fn new(radius: usize, numerators: Vec<i128>, den_log2: u32, h_power: i32) -> Result<Self> {
        let side = 2 * radius + 1;
        if numerators.len() != side * side {
            return Err(HelmError::shape(side * side, numerators.len()));
        }
        Ok(StencilKernel {
            radius,
            numerators,
            den_log2,
            h_power,
        })
    }

    /// `[-1; -1 4 -1; -1] / h^2`.
    pub fn laplace_5pt() -> Self {
        StencilKernel {
            radius: 1,
            numerators: vec![0, -1, 0, -1, 4, -1, 0, -1, 0],
            den_log2: 0,
            h_power: -2,
        }
    }

    /// Pointwise mass term.
    pub fn identity_mass() -> Self {
        StencilKernel {
            radius: 1,
            numerators: vec![0, 0, 0, 0, 1, 0, 0, 0, 0],
            den_log2: 0,
            h_power: 0,
        }
    }

    /// Build from a 7x7 table of numerators (row index is `dy + 3`).
    pub fn from_table(table: &[[i128; 7]; 7], den_log2: u32, h_power: i32) -> Self {
        StencilKernel {
            radius: 3,
            numerators: table.iter().flatten().copied().collect(),
            den_log2,
            h_power,
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn numerators(&self) -> &[i128] {
        &self.numerators
    }

    pub fn den_log2(&self) -> u32 {
        self.den_log2
    }

    pub fn h_power(&self) -> i32 {
        self.h_power
    }

    /// Numerator at offset `(dx, dy)`, zero outside the support.
    pub fn get(&self, dx: isize, dy: isize) -> i128 {
        let r = self.radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return 0;
        }
        self.numerators[((dy + r) * (2 * r + 1) + dx + r) as usize]
    }

    /// Coefficient at `(dx, dy)` in floating point.
    pub fn value(&self, dx: isize, dy: isize) -> f64 {
        self.get(dx, dy) as f64 * (-(self.den_log2 as f64)).exp2()
    }

    /// Remove common powers of two from numerators and denominator.
    pub fn normalized(mut self) -> Self {
        if self.numerators.iter().all(|&n| n == 0) {
            self.den_log2 = 0;
            return self;
        }
        while self.den_log2 > 0 && self.numerators.iter().all(|&n| n % 2 == 0) {
            for n in &mut self.numerators {
                *n /= 2;
            }
            self.den_log2 -= 1;
        }
        self
    }

    /// Shrink the radius while the outermost ring is zero.
    pub fn trimmed(self) -> Self {
        let mut r = self.radius as isize;
        while r > 0 {
            let ring_zero = (-r..=r).all(|t| {
                self.get(t, -r) == 0 && self.get(t, r) == 0 && self.get(-r, t) == 0 && self.get(r, t) == 0
            });
            if !ring_zero {
                break;
            }
            r -= 1;
        }
        self.truncated(r as usize)
    }

    /// Drop all entries outside `radius`.
    pub fn truncated(self, radius: usize) -> Self {
        if radius >= self.radius {
            return self;
        }
        let r = radius as isize;
        let mut nums = Vec::with_capacity((2 * radius + 1).pow(2));
        for dy in -r..=r {
            for dx in -r..=r {
                nums.push(self.get(dx, dy));
            }
        }
        StencilKernel {
            radius,
            numerators: nums,
            den_log2: self.den_log2,
            h_power: self.h_power,
        }
    }

    /// Invariance under the eight symmetries of the square.
    pub fn is_symmetric(&self) -> bool {
        let r = self.radius as isize;
        (-r..=r).all(|dy| {
            (-r..=r).all(|dx| {
                let v = self.get(dx, dy);
                v == self.get(-dx, dy) && v == self.get(dx, -dy) && v == self.get(dy, dx)
            })
        })
    }

    /// Numerator sum, i.e. the action on a constant field at a fully interior point.
    pub fn interior_constant_action(&self) -> i128 {
        self.numerators.iter().sum()
    }

    /// Exact rational equality of the coefficients, independent of representation.
    pub fn same_values(&self, other: &StencilKernel) -> bool {
        let r = self.radius.max(other.radius) as isize;
        let d = self.den_log2.max(other.den_log2);
        let scale = |k: &StencilKernel, v: i128| v.checked_mul(1i128 << (d - k.den_log2));
        (-r..=r).all(|dy| {
            (-r..=r).all(|dx| scale(self, self.get(dx, dy)) == scale(other, other.get(dx, dy)))
        })
    }
}

/// Deepest level whose kernels are precomputed.
pub const MAX_KERNEL_LEVEL: usize = 8;

fn kernel_chain() -> &'static Vec<(StencilKernel, StencilKernel)> {
    static CHAIN: OnceLock<Vec<(StencilKernel, StencilKernel)>> = OnceLock::new();
    CHAIN.get_or_init(|| {
        let mut chain = vec![(StencilKernel::laplace_5pt(), StencilKernel::identity_mass())];
        while chain.len() < MAX_KERNEL_LEVEL {
            let (l, m) = chain.last().unwrap();
            match galerkin_coarsen(l, m) {
                Ok(next) => chain.push(next),
                Err(_) => break,
            }
        }
        chain
    })
}

/// `(laplace, mass)` kernels of the given 1-based level.
pub fn kernels_for_level(level: usize) -> Result<(StencilKernel, StencilKernel)> {
    let chain = kernel_chain();
    if level == 0 || level > chain.len() {
        return Err(HelmError::Level(format!(
            "stencil kernels are available for levels 1..={}, requested {level}",
            chain.len()
        )));
    }
    Ok(chain[level - 1].clone())
}

/// Half-open index rectangle `[i0, i1) x [j0, j1)` of a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl IndexRect {
    pub fn full(nx: usize, ny: usize) -> Self {
        IndexRect { i0: 0, i1: nx, j0: 0, j1: ny }
    }

    pub fn width(&self) -> usize {
        self.i1 - self.i0
    }

    pub fn height(&self) -> usize {
        self.j1 - self.j0
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A ghost value expressed through at most four grid values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostTerms {
    pub len: usize,
    pub deps: [(usize, Complex64); 4],
}

impl GhostTerms {
    const NONE: GhostTerms = GhostTerms {
        len: 0,
        deps: [(0, Complex64::new(0.0, 0.0)); 4],
    };

    pub fn terms(&self) -> &[(usize, Complex64)] {
        &self.deps[..self.len]
    }

    fn push(&mut self, idx: usize, c: Complex64) {
        self.deps[self.len] = (idx, c);
        self.len += 1;
    }
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    dx: isize,
    dy: isize,
    lap: f64,
    mass: f64,
}

/// Stencil operator of one level with its `k^2` field and boundary closure.
#[derive(Debug, Clone)]
pub struct LevelOperator {
    pub level: usize,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub laplace: StencilKernel,
    pub mass: StencilKernel,
    /// 1 for Helmholtz, `1 + i beta2` for the shifted Laplacian.
    pub shift: Complex64,
    pub boundary: BoundaryKind,
    radius: usize,
    taps: Vec<Tap>,
    ksq: Vec<f64>,
    /// `k^2` padded by `radius` rings, ghost ring filled per boundary kind.
    ksq_pad: Vec<f64>,
}

impl LevelOperator {
    /// Helmholtz operator `A_l` of the hierarchy.
    pub fn helmholtz(hierarchy: &GridHierarchy, level: usize) -> Result<Self> {
        Self::with_shift(hierarchy, level, Complex64::new(1.0, 0.0))
    }

    /// Shifted Laplacian `M_l` with shift `1 + i beta2`.
    pub fn cslp(hierarchy: &GridHierarchy, level: usize, beta2: f64) -> Result<Self> {
        Self::with_shift(hierarchy, level, Complex64::new(1.0, beta2))
    }

    pub fn with_shift(hierarchy: &GridHierarchy, level: usize, shift: Complex64) -> Result<Self> {
        let grid = hierarchy.level(level)?;
        let (lap, mass) = kernels_for_level(level)?;
        Self::from_parts(grid, hierarchy.ksq(level)?.to_vec(), lap, mass, shift, hierarchy.boundary)
    }

    /// Operator from explicit kernels, e.g. a rediscretized multigrid level.
    pub fn from_parts(
        grid: &GridLevel,
        ksq: Vec<f64>,
        laplace: StencilKernel,
        mass: StencilKernel,
        shift: Complex64,
        boundary: BoundaryKind,
    ) -> Result<Self> {
        if ksq.len() != grid.len() {
            return Err(HelmError::shape(grid.len(), ksq.len()));
        }
        if grid.nx < 2 || grid.ny < 2 {
            return Err(HelmError::Hierarchy(format!("grid {}x{} is too small", grid.nx, grid.ny)));
        }
        if laplace.h_power() != -2 || mass.h_power() != 0 {
            return Err(HelmError::Numerical("unexpected kernel h-scaling".into()));
        }
        let radius = laplace.radius().max(mass.radius());
        let inv_h2 = 1.0 / (grid.h * grid.h);
        let r = radius as isize;
        let mut taps = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let (l, m) = (laplace.value(dx, dy), mass.value(dx, dy));
                if l != 0.0 || m != 0.0 {
                    taps.push(Tap {
                        dx,
                        dy,
                        lap: l * inv_h2,
                        mass: m,
                    });
                }
            }
        }
        let mut op = LevelOperator {
            level: grid.level,
            nx: grid.nx,
            ny: grid.ny,
            h: grid.h,
            laplace,
            mass,
            shift,
            boundary,
            radius,
            taps,
            ksq,
            ksq_pad: Vec::new(),
        };
        op.ksq_pad = op.pad_ksq();
        Ok(op)
    }

    /// Same kernels and field with a different shift.
    pub fn reshifted(&self, shift: Complex64) -> Self {
        let mut op = self.clone();
        op.shift = shift;
        op
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Number of nonzero stencil offsets.
    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    /// Nominal real flops per point of [`apply_padded`](Self::apply_padded):
    /// 4 for the Laplace and 5 for the mass contribution of each tap, 8 for
    /// the final shift multiply-subtract.
    pub fn flops_per_point(&self) -> u64 {
        9 * self.taps.len() as u64 + 8
    }

    /// Nominal bytes per point: one complex input and one `k^2` read per tap,
    /// one complex write.
    pub fn bytes_per_point(&self) -> u64 {
        24 * self.taps.len() as u64 + 16
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ksq(&self) -> &[f64] {
        &self.ksq
    }

    pub fn grid(&self) -> GridLevel {
        GridLevel {
            level: self.level,
            nx: self.nx,
            ny: self.ny,
            h: self.h,
            origin: (0.0, 0.0),
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Sommerfeld coefficient `2 h i k` at a boundary point.
    fn sommerfeld(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(0.0, 2.0 * self.h * self.ksq[self.idx(i, j)].sqrt())
    }

    /// 1D closure `g = a * u(near) + b * u(next)` for the ghost beside a boundary point.
    fn rule(&self, near: (usize, usize)) -> (Complex64, Complex64) {
        match self.boundary {
            BoundaryKind::Dirichlet => (Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0)),
            BoundaryKind::Sommerfeld => (self.sommerfeld(near.0, near.1), Complex64::new(1.0, 0.0)),
        }
    }

    /// The ghost formulas evaluated on the stored grid values, used for the
    /// Sommerfeld closure and for extrapolating `k^2` past a Dirichlet side.
    pub fn closure_terms(&self, i: isize, j: isize) -> GhostTerms {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let side = |v: isize, n: isize| -> Option<Option<(usize, usize)>> {
            if v >= 0 && v < n {
                Some(None)
            } else if v == -1 {
                Some(Some((0, 1)))
            } else if v == n {
                Some(Some(((n - 1) as usize, (n - 2) as usize)))
            } else {
                None
            }
        };
        let mut g = GhostTerms::NONE;
        let (Some(sx), Some(sy)) = (side(i, nx), side(j, ny)) else {
            return g;
        };
        match (sx, sy) {
            (None, None) => g.push(self.idx(i as usize, j as usize), Complex64::new(1.0, 0.0)),
            (Some((near, next)), None) => {
                let j = j as usize;
                let (a, b) = self.rule((near, j));
                g.push(self.idx(near, j), a);
                g.push(self.idx(next, j), b);
            }
            (None, Some((near, next))) => {
                let i = i as usize;
                let (a, b) = self.rule((i, near));
                g.push(self.idx(i, near), a);
                g.push(self.idx(i, next), b);
            }
            (Some((xn, xm)), Some((yn, ym))) => {
                // x-rule applied to the y-ghosts of columns xn and xm, with k
                // taken at the clamped corner point.
                let (a, b) = self.rule((xn, yn));
                let (an, bn) = self.rule((xn, yn));
                let (am, bm) = self.rule((xm, yn));
                g.push(self.idx(xn, yn), a * an);
                g.push(self.idx(xn, ym), a * bn);
                g.push(self.idx(xm, yn), b * am);
                g.push(self.idx(xm, ym), b * bm);
            }
        }
        g
    }

    /// `true` for boundary points of a Dirichlet operator, which hold `u = 0`.
    #[inline]
    pub fn is_pinned(&self, i: usize, j: usize) -> bool {
        self.boundary == BoundaryKind::Dirichlet && self.on_boundary(i, j)
    }

    /// Value read at `(i, j)` (possibly outside the grid) as a combination of
    /// grid values. Free points map to themselves and points beyond the first
    /// ghost ring have no terms. On Dirichlet sides the boundary value is 0,
    /// so the ghost `2 u_b - u_next` reduces to `-u_next`.
    pub fn ghost_terms(&self, i: isize, j: isize) -> GhostTerms {
        if self.boundary == BoundaryKind::Sommerfeld {
            return self.closure_terms(i, j);
        }
        let reflect = |v: isize, n: isize| -> Option<(usize, f64)> {
            if v >= 0 && v < n {
                Some((v as usize, 1.0))
            } else if v == -1 && n > 1 {
                Some((1, -1.0))
            } else if v == n && n > 1 {
                Some(((n - 2) as usize, -1.0))
            } else {
                None
            }
        };
        let mut g = GhostTerms::NONE;
        if let (Some((ri, si)), Some((rj, sj))) = (reflect(i, self.nx as isize), reflect(j, self.ny as isize)) {
            if !self.is_pinned(ri, rj) {
                g.push(self.idx(ri, rj), Complex64::new(si * sj, 0.0));
            }
        }
        g
    }

    /// Diagonal entry of the identity-like row of a pinned boundary point.
    fn pinned_coef(&self, i: usize, j: usize) -> Complex64 {
        let lap = self.laplace.value(0, 0) / (self.h * self.h);
        let mass = self.mass.value(0, 0) * self.ksq[self.idx(i, j)];
        Complex64::new(lap, 0.0) - self.shift * mass
    }

    fn ghost_ksq(&self, i: isize, j: isize) -> f64 {
        if i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny {
            return self.ksq[self.idx(i as usize, j as usize)];
        }
        match self.boundary {
            BoundaryKind::Sommerfeld => 0.0,
            BoundaryKind::Dirichlet => {
                let g = self.closure_terms(i, j);
                g.terms().iter().map(|(k, c)| c.re * self.ksq[*k]).sum()
            }
        }
    }

    fn pad_ksq(&self) -> Vec<f64> {
        let r = self.radius as isize;
        let (pw, ph) = (self.nx + 2 * self.radius, self.ny + 2 * self.radius);
        let mut out = Vec::with_capacity(pw * ph);
        for j in -r..self.ny as isize + r {
            for i in -r..self.nx as isize + r {
                out.push(self.ghost_ksq(i, j));
            }
        }
        out
    }

    /// Fill `pad` with the values of `u` on `rect` grown by `radius` rings,
    /// ghost ring from the boundary closure and zero beyond it.
    pub fn fill_padded(&self, u: &[Complex64], rect: IndexRect, pad: &mut Vec<Complex64>) {
        let r = self.radius as isize;
        pad.clear();
        pad.reserve((rect.width() + 2 * self.radius) * (rect.height() + 2 * self.radius));
        let (i_lo, i_hi) = (rect.i0 as isize - r, rect.i1 as isize + r);
        let ghost = |i: isize, j: isize| {
            let mut v = Complex64::new(0.0, 0.0);
            for (k, c) in self.ghost_terms(i, j).terms() {
                v += c * u[*k];
            }
            v
        };
        for j in rect.j0 as isize - r..rect.j1 as isize + r {
            if j < 0 || j >= self.ny as isize {
                pad.extend((i_lo..i_hi).map(|i| ghost(i, j)));
                continue;
            }
            let (a, b) = (i_lo.max(0), i_hi.min(self.nx as isize));
            let start = pad.len();
            pad.extend((i_lo..a).map(|i| ghost(i, j)));
            let row = j as usize * self.nx;
            pad.extend_from_slice(&u[row + a as usize..row + b as usize]);
            pad.extend((b..i_hi).map(|i| ghost(i, j)));
            if self.boundary == BoundaryKind::Dirichlet {
                for i in a..b {
                    if self.is_pinned(i as usize, j as usize) {
                        pad[start + (i - i_lo) as usize] = ghost(i, j);
                    }
                }
            }
        }
    }

    /// Apply the stencil on `rect` reading from a buffer produced by
    /// [`fill_padded`](Self::fill_padded) for the same rectangle. `u` is
    /// read only at pinned Dirichlet boundary points.
    pub fn apply_padded(&self, u: &[Complex64], pad: &[Complex64], rect: IndexRect, out: &mut [Complex64]) {
        let r = self.radius;
        let stride = rect.width() + 2 * r;
        let kstride = self.nx + 2 * r;
        let offs: Vec<(isize, isize)> = self
            .taps
            .iter()
            .map(|t| (t.dy * stride as isize + t.dx, t.dy * kstride as isize + t.dx))
            .collect();
        let w = rect.width();
        let zero = Complex64::new(0.0, 0.0);
        let (mut acc_l, mut acc_m) = (vec![zero; w], vec![zero; w]);
        for (row, orow) in out.chunks_mut(w).enumerate() {
            let j = rect.j0 + row;
            let pbase = ((row + r) * stride + r) as isize;
            let kbase = ((j + r) * kstride + rect.i0 + r) as isize;
            acc_l.fill(zero);
            acc_m.fill(zero);
            // Tap-outer order keeps the per-point summation order of a point-wise loop.
            for (t, &(po, ko)) in self.taps.iter().zip(&offs) {
                let ps = (pbase + po) as usize;
                let src = &pad[ps..ps + w];
                if t.lap != 0.0 {
                    for (a, &u) in acc_l.iter_mut().zip(src) {
                        *a += u * t.lap;
                    }
                }
                if t.mass != 0.0 {
                    let ks = (kbase + ko) as usize;
                    for ((a, &u), &k) in acc_m.iter_mut().zip(src).zip(&self.ksq_pad[ks..ks + w]) {
                        *a += u * (t.mass * k);
                    }
                }
            }
            for ((o, &l), &m) in orow.iter_mut().zip(&acc_l).zip(&acc_m) {
                *o = l - self.shift * m;
            }
        }
        match self.boundary {
            BoundaryKind::Dirichlet => self.for_boundary_in(rect, |i, j| {
                out[(j - rect.j0) * w + i - rect.i0] = self.pinned_coef(i, j) * u[self.idx(i, j)];
            }),
            BoundaryKind::Sommerfeld if r > 1 => self.for_boundary_in(rect, |i, j| {
                let p = |dx: isize, dy: isize| {
                    pad[((j - rect.j0 + r) as isize + dy) as usize * stride + ((i - rect.i0 + r) as isize + dx) as usize]
                };
                let lap = (p(0, 0) * 4.0 - p(-1, 0) - p(1, 0) - p(0, -1) - p(0, 1)) / (self.h * self.h);
                out[(j - rect.j0) * w + i - rect.i0] = lap - self.shift * (self.ksq[self.idx(i, j)] * p(0, 0));
            }),
            BoundaryKind::Sommerfeld => {}
        }
    }

    /// Call `f` for every physical boundary point inside `rect`.
    fn for_boundary_in(&self, rect: IndexRect, mut f: impl FnMut(usize, usize)) {
        for j in rect.j0..rect.j1 {
            if j == 0 || j + 1 == self.ny {
                (rect.i0..rect.i1).for_each(|i| f(i, j));
            } else {
                if rect.i0 == 0 {
                    f(0, j);
                }
                if rect.i1 == self.nx {
                    f(self.nx - 1, j);
                }
            }
        }
    }

    /// Whole-grid application on raw vectors.
    pub fn apply_slice(&self, u: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(HelmError::shape(self.len(), u.len()));
        }
        if out.len() != self.len() {
            return Err(HelmError::shape(self.len(), out.len()));
        }
        let rect = IndexRect::full(self.nx, self.ny);
        let mut pad = Vec::new();
        self.fill_padded(u, rect, &mut pad);
        self.apply_padded(u, &pad, rect, out);
        Ok(())
    }

    /// `A u` (or `M u`) for a field on this operator's level.
    pub fn apply(&self, u: &ComplexField) -> Result<ComplexField> {
        if u.level != self.level || u.nx != self.nx || u.ny != self.ny {
            return Err(HelmError::shape(
                format!("level {} ({}x{})", self.level, self.nx, self.ny),
                format!("level {} ({}x{})", u.level, u.nx, u.ny),
            ));
        }
        let mut v = ComplexField::zeros(self.level, self.nx, self.ny);
        self.apply_slice(&u.data, &mut v.data)?;
        Ok(v)
    }

    /// Matrix row of point `(i, j)`, sorted by column with duplicates merged.
    pub fn row_entries(&self, i: usize, j: usize, row: &mut Vec<(usize, Complex64)>) {
        row.clear();
        if self.is_pinned(i, j) {
            row.push((self.idx(i, j), self.pinned_coef(i, j)));
            return;
        }
        if self.boundary == BoundaryKind::Sommerfeld && self.radius > 1 && self.on_boundary(i, j) {
            let c = Complex64::new(1.0 / (self.h * self.h), 0.0);
            let me = Complex64::new(4.0, 0.0) * c - self.shift * self.ksq[self.idx(i, j)];
            let (i, j) = (i as isize, j as isize);
            for (ti, tj, w) in [(i, j, me), (i - 1, j, -c), (i + 1, j, -c), (i, j - 1, -c), (i, j + 1, -c)] {
                for (col, g) in self.ghost_terms(ti, tj).terms() {
                    row.push((*col, w * g));
                }
            }
        } else {
            self.stencil_row(i, j, row);
        }
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
        for &(col, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == col => last.1 += v,
                _ => merged.push((col, v)),
            }
        }
        // Closure terms can cancel exactly.
        merged.retain(|e| e.1 != Complex64::new(0.0, 0.0));
        *row = merged;
    }

    fn stencil_row(&self, i: usize, j: usize, row: &mut Vec<(usize, Complex64)>) {
        let r = self.radius as isize;
        let kstride = (self.nx + 2 * self.radius) as isize;
        for t in &self.taps {
            let (ti, tj) = (i as isize + t.dx, j as isize + t.dy);
            let k = self.ksq_pad[((tj + r) * kstride + ti + r) as usize];
            let c = Complex64::new(t.lap, 0.0) - self.shift * (t.mass * k);
            for (col, w) in self.ghost_terms(ti, tj).terms() {
                row.push((*col, c * w));
            }
        }
    }

    #[inline]
    fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Main diagonal of the operator including boundary-closure contributions.
    pub fn diagonal(&self) -> Vec<Complex64> {
        let mut row = Vec::new();
        let mut d = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                self.row_entries(i, j, &mut row);
                let me = self.idx(i, j);
                d.push(row.iter().find(|e| e.0 == me).map_or(Complex64::new(0.0, 0.0), |e| e.1));
            }
        }
        d
    }
}

/// Default row limit for explicit assembly.
pub const DEFAULT_ASSEMBLY_LIMIT: usize = 1 << 22;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n {
            return Err(HelmError::shape(self.n, x.len()));
        }
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                row[*c] = *v;
            }
        }
        d
    }
}

/// Explicit assembly of a level operator, refused above `limit` rows.
pub fn assemble_csr(op: &LevelOperator, limit: usize) -> Result<CsrMatrix> {
    let n = op.len();
    if n > limit {
        return Err(HelmError::Capacity { rows: n, limit });
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut row = Vec::new();
    row_ptr.push(0);
    for j in 0..op.ny {
        for i in 0..op.nx {
            op.row_entries(i, j, &mut row);
            for &(c, v) in &row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
    }
    Ok(CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    })
}

/// Matrix-vector product implementation being accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatvecKind {
    MatrixFree,
    Csr,
}

/// Nominal `(flops, bytes)` of a 5-point level-1 matvec on `n_points` points.
pub fn matvec_flop_byte_counters(kind: MatvecKind, n_points: u64) -> (u64, u64) {
    match kind {
        // 4 neighbour adds, 1 centre multiply-subtract, scaling and the k^2 term.
        MatvecKind::MatrixFree => (11 * n_points, 56 * n_points),
        // 5 multiply-adds per row; values, column indices, row pointer, x and y traffic.
        MatvecKind::Csr => (10 * n_points, 120 * n_points),
    }
}

/// Arithmetic intensity in flops per byte.
pub fn arithmetic_intensity(kind: MatvecKind) -> f64 {
    let (f, b) = matvec_flop_byte_counters(kind, 1);
    f as f64 / b as f64
}
