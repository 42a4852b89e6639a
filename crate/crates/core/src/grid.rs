//! Vertex-centered grid hierarchy, wavenumber fields and the benchmark media.
//!
//! Level 1 is the finest grid. Every coarser level keeps the physical extent
//! and origin of the finest grid and doubles the mesh width, so coarse point
//! `(I, J)` coincides with fine point `(2I, 2J)`. Wavenumber fields are
//! transferred to coarse levels by injection at those coincident points.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{HelmError, Result};

/// Boundary condition applied uniformly on all four sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Sommerfeld,
}

/// Axis-aligned rectangle `[x0, x0 + lx] x [y0, y0 + ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x0: f64,
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Domain {
    pub fn new(x0: f64, y0: f64, lx: f64, ly: f64) -> Self {
        Domain { x0, y0, lx, ly }
    }

    pub fn unit_square() -> Self {
        Domain::new(0.0, 0.0, 1.0, 1.0)
    }
}

/// Source of the wave: a frequency (combined with the velocity model) or a
/// wavenumber given directly, which is only meaningful for constant media.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    Frequency(f64),
    Wavenumber(f64),
}

/// One grid of the hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLevel {
    /// 1-based level number, 1 is the finest.
    pub level: usize,
    pub nx: usize,
    pub ny: usize,
    /// Mesh width, identical in both directions.
    pub h: f64,
    /// Physical coordinates of the first grid point.
    pub origin: (f64, f64),
}

impl GridLevel {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin.0 + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin.1 + j as f64 * self.h
    }

    /// Row-major index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Point count of the next coarser grid, if the vertex-centered rule applies.
pub fn coarsen_count(n: usize) -> Option<usize> {
    if n >= 3 && (n - 1).is_multiple_of(2) {
        Some((n - 1) / 2 + 1)
    } else {
        None
    }
}

/// Direct injection of a fine-grid scalar field onto the coarse grid.
pub fn inject(fine: &[f64], nx: usize, ny: usize) -> Option<(Vec<f64>, usize, usize)> {
    let cx = coarsen_count(nx)?;
    let cy = coarsen_count(ny)?;
    let mut out = Vec::with_capacity(cx * cy);
    for j in 0..cy {
        for i in 0..cx {
            out.push(fine[2 * j * nx + 2 * i]);
        }
    }
    Some((out, cx, cy))
}

/// The multilevel grid sequence together with per-level `k^2` fields.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    pub levels: Vec<GridLevel>,
    /// `k^2` at every grid point of every level, row-major.
    pub ksq: Vec<Vec<f64>>,
    pub boundary: BoundaryKind,
    pub excitation: Excitation,
}

impl GridHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Grid of the 1-based `level`.
    pub fn level(&self, level: usize) -> Result<&GridLevel> {
        if level == 0 || level > self.levels.len() {
            return Err(HelmError::Level(format!(
                "level {level} outside 1..={}",
                self.levels.len()
            )));
        }
        Ok(&self.levels[level - 1])
    }

    pub fn ksq(&self, level: usize) -> Result<&[f64]> {
        self.level(level)?;
        Ok(&self.ksq[level - 1])
    }

    pub fn finest(&self) -> &GridLevel {
        &self.levels[0]
    }

    /// Physical extent `(Lx, Ly)` of the computational domain.
    pub fn extent(&self) -> (f64, f64) {
        let g = self.finest();
        ((g.nx - 1) as f64 * g.h, (g.ny - 1) as f64 * g.h)
    }

    pub fn max_ksq(&self, level: usize) -> Result<f64> {
        Ok(self.ksq(level)?.iter().copied().fold(0.0, f64::max))
    }
}

/// Straight or piecewise-linear interface `y = f(x)`, extended flat beyond its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
}

impl Polyline {
    pub fn segment(a: (f64, f64), b: (f64, f64)) -> Self {
        Polyline { points: vec![a, b] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let (a, b) = (w[0], w[1]);
            if x <= b.0 {
                let t = if b.0 > a.0 { (x - a.0) / (b.0 - a.0) } else { 0.0 };
                return a.1 + t * (b.1 - a.1);
            }
        }
        p[p.len() - 1].1
    }
}

/// Layered medium. `velocities[0]` is the top layer; a point lies in layer
/// `m` when it is strictly below `m` of the interfaces (ordered top to bottom).
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredModel {
    pub interfaces: Vec<Polyline>,
    pub velocities: Vec<f64>,
}

impl LayeredModel {
    /// Three-layer wedge on `[0,600] x [-1000,0]`.
    pub fn wedge() -> Self {
        LayeredModel {
            interfaces: vec![
                Polyline::segment((0.0, -400.0), (600.0, -500.0)),
                Polyline::segment((0.0, -800.0), (600.0, -600.0)),
            ],
            velocities: vec![2000.0, 1500.0, 3000.0],
        }
    }

    pub fn velocity(&self, x: f64, y: f64) -> f64 {
        let below = self.interfaces.iter().filter(|l| y < l.eval(x)).count();
        self.velocities[below.min(self.velocities.len() - 1)]
    }
}

/// Velocity raster read from a grid file, sampled bilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
    /// Row-major, x fastest, m/s.
    pub values: Vec<f64>,
}

impl VelocityGrid {
    pub fn extent(&self) -> Domain {
        Domain::new(
            self.x0,
            self.y0,
            (self.nx - 1) as f64 * self.dx,
            (self.ny - 1) as f64 * self.dy,
        )
    }

    /// Bilinear interpolation, clamped to the raster.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.x0) / self.dx).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y0) / self.dy).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let j = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let i1 = (i + 1).min(self.nx - 1);
        let j1 = (j + 1).min(self.ny - 1);
        let v = |a: usize, b: usize| self.values[b * self.nx + a];
        (1.0 - ty) * ((1.0 - tx) * v(i, j) + tx * v(i1, j)) + ty * ((1.0 - tx) * v(i, j1) + tx * v(i1, j1))
    }
}

/// Propagation-speed model.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityModel {
    Constant(f64),
    Layered(LayeredModel),
    GridFile(VelocityGrid),
}

impl VelocityModel {
    pub fn velocity(&self, x: f64, y: f64) -> f64 {
        match self {
            VelocityModel::Constant(c) => *c,
            VelocityModel::Layered(m) => m.velocity(x, y),
            VelocityModel::GridFile(g) => g.sample(x, y),
        }
    }

    /// Smallest velocity anywhere in the model.
    pub fn min_velocity(&self) -> f64 {
        match self {
            VelocityModel::Constant(c) => *c,
            VelocityModel::Layered(m) => m.velocities.iter().copied().fold(f64::INFINITY, f64::min),
            VelocityModel::GridFile(g) => g.values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |c: f64| !(c.is_finite() && c > 0.0);
        let ok = match self {
            VelocityModel::Constant(c) => !bad(*c),
            VelocityModel::Layered(m) => {
                if m.velocities.len() != m.interfaces.len() + 1 {
                    return Err(HelmError::Model(format!(
                        "{} interfaces need {} layer velocities, got {}",
                        m.interfaces.len(),
                        m.interfaces.len() + 1,
                        m.velocities.len()
                    )));
                }
                if m.interfaces.iter().any(|l| l.points.is_empty()) {
                    return Err(HelmError::Model("empty interface polyline".into()));
                }
                !m.velocities.iter().any(|&c| bad(c))
            }
            VelocityModel::GridFile(g) => {
                if g.nx < 2 || g.ny < 2 || g.values.len() != g.nx * g.ny {
                    return Err(HelmError::Model("malformed velocity raster".into()));
                }
                !g.values.iter().any(|&c| bad(c))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(HelmError::Model("velocities must be finite and positive".into()))
        }
    }
}

/// Finest-level wavenumber bound of a model under an excitation.
pub fn max_wavenumber(velocity: &VelocityModel, excitation: Excitation) -> Result<f64> {
    match excitation {
        Excitation::Wavenumber(k) => Ok(k),
        Excitation::Frequency(f) => Ok(2.0 * PI * f / velocity.min_velocity()),
    }
}

/// Build the hierarchy on `domain` with finest mesh width `h` and `ml` levels.
pub fn build_hierarchy(
    domain: Domain,
    h: f64,
    ml: usize,
    velocity: &VelocityModel,
    excitation: Excitation,
    boundary: BoundaryKind,
) -> Result<GridHierarchy> {
    velocity.validate()?;
    if ml < 2 {
        return Err(HelmError::Hierarchy(format!("need at least 2 levels, got {ml}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(HelmError::Hierarchy(format!("mesh width must be positive, got {h}")));
    }
    let cells = |l: f64, axis: &str| -> Result<usize> {
        let c = (l / h).round();
        if c < 1.0 || ((c * h - l).abs() > 1e-9 * l.max(1.0)) {
            return Err(HelmError::Hierarchy(format!(
                "extent {l} along {axis} is not a multiple of h = {h}"
            )));
        }
        Ok(c as usize)
    };
    let cx = cells(domain.lx, "x")?;
    let cy = cells(domain.ly, "y")?;
    let step = 1usize << (ml - 1);
    if cx % step != 0 || cy % step != 0 {
        return Err(HelmError::Hierarchy(format!(
            "grid {}x{} cannot be coarsened {} times (n-1 must be divisible by {step})",
            cx + 1,
            cy + 1,
            ml - 1
        )));
    }

    let (nx, ny) = (cx + 1, cy + 1);
    let finest = GridLevel {
        level: 1,
        nx,
        ny,
        h,
        origin: (domain.x0, domain.y0),
    };
    let mut ksq0 = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v = match excitation {
                Excitation::Wavenumber(k) => {
                    if !matches!(velocity, VelocityModel::Constant(_)) {
                        return Err(HelmError::Model(
                            "a direct wavenumber requires a constant medium".into(),
                        ));
                    }
                    k * k
                }
                Excitation::Frequency(f) => {
                    let k = 2.0 * PI * f / velocity.velocity(finest.x(i), finest.y(j));
                    k * k
                }
            };
            if !(v.is_finite() && v >= 0.0) {
                return Err(HelmError::Model(format!("invalid k^2 = {v} at ({i},{j})")));
            }
            ksq0.push(v);
        }
    }

    let mut levels = vec![finest];
    let mut ksq = vec![ksq0];
    for l in 2..=ml {
        let prev = &levels[l - 2];
        let (field, cx, cy) = inject(&ksq[l - 2], prev.nx, prev.ny)
            .ok_or_else(|| HelmError::Hierarchy(format!("level {} cannot be coarsened", l - 1)))?;
        levels.push(GridLevel {
            level: l,
            nx: cx,
            ny: cy,
            h: prev.h * 2.0,
            origin: prev.origin,
        });
        ksq.push(field);
    }

    Ok(GridHierarchy {
        levels,
        ksq,
        boundary,
        excitation,
    })
}

/// `max sqrt(k^2) * h_l` on the given level.
pub fn kh_of(level: usize, hierarchy: &GridHierarchy) -> Result<f64> {
    let g = hierarchy.level(level)?;
    Ok(hierarchy.max_ksq(level)?.sqrt() * g.h)
}

/// Largest dimensionless wavenumber `sqrt(k^2 Lx Ly)` over the finest grid.
pub fn dimensionless_kmax(hierarchy: &GridHierarchy) -> f64 {
    let (lx, ly) = hierarchy.extent();
    (hierarchy.max_ksq(1).unwrap_or(0.0) * lx * ly).sqrt()
}

/// Complex grid function on one level, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub level: usize,
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(level: usize, nx: usize, ny: usize) -> Self {
        ComplexField {
            level,
            nx,
            ny,
            data: vec![Complex64::new(0.0, 0.0); nx * ny],
        }
    }

    pub fn zeros_on(grid: &GridLevel) -> Self {
        Self::zeros(grid.level, grid.nx, grid.ny)
    }

    pub fn from_vec(level: usize, nx: usize, ny: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(HelmError::shape(nx * ny, data.len()));
        }
        Ok(ComplexField { level, nx, ny, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Fails with a shape error unless the field lives on `grid`.
    pub fn check_on(&self, grid: &GridLevel) -> Result<()> {
        if self.level != grid.level || self.nx != grid.nx || self.ny != grid.ny {
            return Err(HelmError::shape(
                format!("level {} ({}x{})", grid.level, grid.nx, grid.ny),
                format!("level {} ({}x{})", self.level, self.nx, self.ny),
            ));
        }
        Ok(())
    }
}

/// Discrete Dirac delta: `1/h^2` at the grid point nearest to `location`.
pub fn point_source_rhs(hierarchy: &GridHierarchy, location: (f64, f64)) -> ComplexField {
    let g = hierarchy.finest();
    let mut f = ComplexField::zeros_on(g);
    let idx = |v: f64, o: f64, n: usize| -> usize {
        let t = ((v - o) / g.h).round();
        t.clamp(0.0, (n - 1) as f64) as usize
    };
    let i = idx(location.0, g.origin.0, g.nx);
    let j = idx(location.1, g.origin.1, g.ny);
    f.data[g.index(i, j)] = Complex64::new(1.0 / (g.h * g.h), 0.0);
    f
}

/// Grid resolution requested for a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    /// Target `k_max h` on the finest level.
    Kh(f64),
    /// Explicit point counts.
    Points(usize, usize),
}

/// Finest mesh width for a domain and resolution. For `Resolution::Kh` the
/// cell count along x is rounded to a multiple of `2^(ml-1)` and the y extent
/// must then be a whole number of cells (also a multiple of `2^(ml-1)`).
pub fn mesh_width(domain: &Domain, resolution: Resolution, kmax: f64, ml: usize) -> Result<f64> {
    match resolution {
        Resolution::Points(nx, ny) => {
            if nx < 2 || ny < 2 {
                return Err(HelmError::Hierarchy(format!("grid {nx}x{ny} is too small")));
            }
            let h = domain.lx / (nx - 1) as f64;
            let hy = domain.ly / (ny - 1) as f64;
            if (h - hy).abs() > 1e-9 * h {
                return Err(HelmError::Hierarchy(format!(
                    "grid {nx}x{ny} gives non-uniform spacing on a {}x{} domain",
                    domain.lx, domain.ly
                )));
            }
            Ok(h)
        }
        Resolution::Kh(kh) => {
            if !(kh > 0.0 && kmax > 0.0) {
                return Err(HelmError::Hierarchy(format!("cannot resolve kh = {kh} with k = {kmax}")));
            }
            let step = (1usize << (ml.max(1) - 1)) as f64;
            let cells = ((domain.lx * kmax / kh) / step).round().max(1.0) * step;
            Ok(domain.lx / cells)
        }
    }
}

/// Problem definition: hierarchy plus right-hand side.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub hierarchy: GridHierarchy,
    pub rhs: ComplexField,
    pub source: (f64, f64),
}

#[allow(clippy::too_many_arguments)]
fn assemble_problem(
    name: &str,
    domain: Domain,
    velocity: &VelocityModel,
    excitation: Excitation,
    resolution: Resolution,
    ml: usize,
    boundary: BoundaryKind,
    source: (f64, f64),
) -> Result<Problem> {
    velocity.validate()?;
    let kmax = max_wavenumber(velocity, excitation)?;
    let h = mesh_width(&domain, resolution, kmax, ml)?;
    let hierarchy = build_hierarchy(domain, h, ml, velocity, excitation, boundary)?;
    let rhs = point_source_rhs(&hierarchy, source);
    Ok(Problem {
        name: name.to_string(),
        hierarchy,
        rhs,
        source,
    })
}

/// Constant-wavenumber unit square with a centered point source.
pub fn constant_problem(
    boundary: BoundaryKind,
    k: f64,
    resolution: Resolution,
    ml: usize,
) -> Result<Problem> {
    let name = match boundary {
        BoundaryKind::Dirichlet => "mp1a",
        BoundaryKind::Sommerfeld => "mp1b",
    };
    assemble_problem(
        name,
        Domain::unit_square(),
        &VelocityModel::Constant(1.0),
        Excitation::Wavenumber(k),
        resolution,
        ml,
        boundary,
        (0.5, 0.5),
    )
}

/// Three-layer wedge, Sommerfeld on all sides, source on the top boundary.
pub fn wedge_problem(freq_hz: f64, resolution: Resolution, ml: usize) -> Result<Problem> {
    layered_problem(LayeredModel::wedge(), freq_hz, resolution, ml)
}

pub fn layered_problem(model: LayeredModel, freq_hz: f64, resolution: Resolution, ml: usize) -> Result<Problem> {
    assemble_problem(
        "wedge",
        Domain::new(0.0, -1000.0, 600.0, 1000.0),
        &VelocityModel::Layered(model),
        Excitation::Frequency(freq_hz),
        resolution,
        ml,
        BoundaryKind::Sommerfeld,
        (300.0, 0.0),
    )
}

/// Problem on the extent of a velocity raster (Marmousi-style input).
/// Without an explicit source the source sits at the top-center.
pub fn raster_problem(
    name: &str,
    grid: VelocityGrid,
    freq_hz: f64,
    resolution: Resolution,
    ml: usize,
    source: Option<(f64, f64)>,
) -> Result<Problem> {
    let domain = grid.extent();
    let source = source.unwrap_or((domain.x0 + 0.5 * domain.lx, domain.y0 + domain.ly));
    let model = VelocityModel::GridFile(grid);
    model.validate()?;
    let kmax = max_wavenumber(&model, Excitation::Frequency(freq_hz))?;
    let h = mesh_width(&domain, resolution, kmax, ml)?;
    // The raster height may not be a whole number of cells; trim it.
    let cy = (domain.ly / h).floor();
    let step = (1usize << (ml - 1)) as f64;
    let cy = (cy / step).floor() * step;
    let domain = Domain::new(domain.x0, domain.y0 + domain.ly - cy * h, domain.lx, cy * h);
    let hierarchy = build_hierarchy(
        domain,
        h,
        ml,
        &model,
        Excitation::Frequency(freq_hz),
        BoundaryKind::Sommerfeld,
    )?;
    let rhs = point_source_rhs(&hierarchy, source);
    Ok(Problem {
        name: name.to_string(),
        hierarchy,
        rhs,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_hier(n: usize, ml: usize, k: f64, boundary: BoundaryKind) -> GridHierarchy {
        let h = 1.0 / (n - 1) as f64;
        build_hierarchy(
            Domain::unit_square(),
            h,
            ml,
            &VelocityModel::Constant(1.0),
            Excitation::Wavenumber(k),
            boundary,
        )
        .unwrap()
    }

    #[test]
    fn k200_kh0625_is_321_points() {
        let p = constant_problem(BoundaryKind::Sommerfeld, 200.0, Resolution::Kh(0.625), 3).unwrap();
        let g = p.hierarchy.finest();
        assert_eq!((g.nx, g.ny), (321, 321));
        assert!(p.hierarchy.ksq[0].iter().all(|&v| v == 40000.0));
    }

    #[test]
    fn wedge_20hz_grid() {
        let p = wedge_problem(20.0, Resolution::Kh(0.349), 4).unwrap();
        let g = p.hierarchy.finest();
        assert_eq!((g.nx, g.ny), (145, 241));
        assert_eq!(g.origin, (0.0, -1000.0));
    }

    #[test]
    fn coarsening_rule() {
        let hier = const_hier(9, 3, 1.0, BoundaryKind::Dirichlet);
        let n: Vec<_> = hier.levels.iter().map(|g| g.nx).collect();
        assert_eq!(n, vec![9, 5, 3]);
        assert_eq!(hier.levels[2].h, 4.0 * hier.levels[0].h);
    }

    #[test]
    fn non_divisible_grid_is_rejected() {
        let err = build_hierarchy(
            Domain::unit_square(),
            1.0 / 10.0,
            3,
            &VelocityModel::Constant(1.0),
            Excitation::Wavenumber(1.0),
            BoundaryKind::Dirichlet,
        )
        .unwrap_err();
        assert!(matches!(err, HelmError::Hierarchy(_)));
    }

    #[test]
    fn nonpositive_velocity_is_rejected() {
        let err = build_hierarchy(
            Domain::unit_square(),
            0.25,
            2,
            &VelocityModel::Constant(-3.0),
            Excitation::Frequency(1.0),
            BoundaryKind::Dirichlet,
        )
        .unwrap_err();
        assert!(matches!(err, HelmError::Model(_)));
    }

    #[test]
    fn kh_per_level() {
        let h = 0.3125 / 200.0;
        let hier = build_hierarchy(
            Domain::new(0.0, 0.0, 64.0 * h, 64.0 * h),
            h,
            3,
            &VelocityModel::Constant(1.0),
            Excitation::Wavenumber(200.0),
            BoundaryKind::Sommerfeld,
        )
        .unwrap();
        assert!((kh_of(1, &hier).unwrap() - 0.3125).abs() < 1e-12);
        assert!((kh_of(3, &hier).unwrap() - 1.25).abs() < 1e-12);
        assert_eq!(kh_of(2, &hier).unwrap(), 2.0 * kh_of(1, &hier).unwrap());
    }

    #[test]
    fn dimensionless_k() {
        let hier = const_hier(17, 2, 100.0, BoundaryKind::Sommerfeld);
        assert!((dimensionless_kmax(&hier) - 100.0).abs() < 1e-9);

        // Wedge, f = 20 Hz: evaluated independently from c_min = 1500.
        let p = wedge_problem(20.0, Resolution::Kh(0.349), 4).unwrap();
        let expected = (2.0 * PI * 20.0 / 1500.0) * (600.0f64 * 1000.0).sqrt();
        assert!((dimensionless_kmax(&p.hierarchy) - expected).abs() < 1e-9 * expected);

        let p40 = wedge_problem(40.0, Resolution::Points(145, 241), 4).unwrap();
        assert!((dimensionless_kmax(&p40.hierarchy) - 2.0 * expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn point_sources() {
        let p = constant_problem(BoundaryKind::Sommerfeld, 200.0, Resolution::Kh(0.625), 3).unwrap();
        let g = p.hierarchy.finest();
        let nz: Vec<_> = p.rhs.data.iter().enumerate().filter(|(_, z)| z.norm() > 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0, g.index(160, 160));

        let w = wedge_problem(20.0, Resolution::Kh(0.349), 4).unwrap();
        let g = w.hierarchy.finest();
        let idx = w.rhs.data.iter().position(|z| z.norm() > 0.0).unwrap();
        assert_eq!(idx, g.index(72, 240));

        let hier = const_hier(9, 2, 1.0, BoundaryKind::Dirichlet);
        let f = point_source_rhs(&hier, (0.0, 0.0));
        let h = hier.finest().h;
        assert_eq!(f.data[0], Complex64::new(1.0 / (h * h), 0.0));
        let total: Complex64 = f.data.iter().sum::<Complex64>() * (h * h);
        assert!((total - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn coarse_points_are_nested_and_injected() {
        let p = wedge_problem(20.0, Resolution::Kh(0.349), 4).unwrap();
        let hier = &p.hierarchy;
        for l in 2..=hier.num_levels() {
            let (c, f) = (&hier.levels[l - 1], &hier.levels[l - 2]);
            for j in 0..c.ny {
                for i in 0..c.nx {
                    assert_eq!(c.x(i), f.x(2 * i));
                    assert_eq!(c.y(j), f.y(2 * j));
                    assert_eq!(hier.ksq[l - 1][c.index(i, j)], hier.ksq[l - 2][f.index(2 * i, 2 * j)]);
                }
            }
        }
    }

    #[test]
    fn wedge_layers() {
        let m = LayeredModel::wedge();
        assert_eq!(m.velocity(300.0, -10.0), 2000.0);
        assert_eq!(m.velocity(300.0, -600.0), 1500.0);
        assert_eq!(m.velocity(300.0, -990.0), 3000.0);
    }

    #[test]
    fn raster_bilinear() {
        let g = VelocityGrid {
            nx: 2,
            ny: 2,
            dx: 1.0,
            dy: 1.0,
            x0: 0.0,
            y0: 0.0,
            values: vec![1000.0, 2000.0, 3000.0, 4000.0],
        };
        assert_eq!(g.sample(0.5, 0.5), 2500.0);
        assert_eq!(g.sample(-5.0, 0.0), 1000.0);
        assert_eq!(g.sample(1.0, 1.0), 4000.0);
    }
}
