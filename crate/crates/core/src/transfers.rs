//! Higher-order grid transfers and the exact Galerkin coarsening of stencils.
//!
//! The prolongation `Z` uses the 1D weights `[1, 4, 6, 4, 1] / 8` on offsets
//! `-2..=2` around each coarse point (a quartic B-spline, the Bezier-derived
//! deflation vectors). The restriction used by the solver is `R = Z^T / 4`,
//! i.e. 1D weights `[1, 4, 6, 4, 1] / 16`, which reproduce constants. The
//! coarse operator on level `l + 1` is `R A_l Z`.
//!
//! Both transfers use zero extension outside the physical grid.

use num_complex::Complex64;

use crate::error::{HelmError, Result};
use crate::grid::{coarsen_count, ComplexField, GridHierarchy};
use crate::operators::StencilKernel;

/// Numerators of the 1D transfer weights on offsets `-2..=2`.
pub const TRANSFER_NUMERATORS: [i128; 5] = [1, 4, 6, 4, 1];
/// `log2` of the prolongation denominator (8).
pub const PROLONGATION_DEN_LOG2: u32 = 3;
/// `log2` of the restriction denominator (16).
pub const RESTRICTION_DEN_LOG2: u32 = 4;
/// `Z = Z_OVER_RT * R^T` as dense matrices in 2D.
pub const Z_OVER_RT: f64 = 4.0;
/// Largest stencil radius kept by [`galerkin_coarsen`].
pub const MAX_KERNEL_RADIUS: usize = 3;

const PW: [f64; 5] = [0.125, 0.5, 0.75, 0.5, 0.125];
const RW: [f64; 5] = [0.0625, 0.25, 0.375, 0.25, 0.0625];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    Restriction,
    Prolongation,
}

/// Exact 1D transfer weights, `weights[k] / 2^den_log2` at offset `k - radius`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferStencil {
    pub weights: Vec<i128>,
    pub den_log2: u32,
    pub mode: TransferMode,
}

impl TransferStencil {
    pub fn prolongation() -> Self {
        TransferStencil {
            weights: TRANSFER_NUMERATORS.to_vec(),
            den_log2: PROLONGATION_DEN_LOG2,
            mode: TransferMode::Prolongation,
        }
    }

    pub fn restriction() -> Self {
        TransferStencil {
            weights: TRANSFER_NUMERATORS.to_vec(),
            den_log2: RESTRICTION_DEN_LOG2,
            mode: TransferMode::Restriction,
        }
    }

    pub fn radius(&self) -> usize {
        self.weights.len() / 2
    }

    /// Weight at `offset`, zero outside the support.
    pub fn numerator(&self, offset: isize) -> i128 {
        let r = self.radius() as isize;
        if offset.abs() > r {
            0
        } else {
            self.weights[(offset + r) as usize]
        }
    }

    pub fn weight(&self, offset: isize) -> f64 {
        self.numerator(offset) as f64 / (1u128 << self.den_log2) as f64
    }

    pub fn is_symmetric(&self) -> bool {
        self.weights.len() % 2 == 1 && self.weights.iter().eq(self.weights.iter().rev())
    }
}

/// Exact triple product `Z^T K Z` of an interior stencil, with `Z` built from
/// the 1D prolongation weights `w`.
pub fn galerkin_triple(kernel: &StencilKernel, w: &TransferStencil) -> Result<StencilKernel> {
    let rw = w.radius() as isize;
    let r = kernel.radius() as isize;
    let rc = (2 * rw + r) / 2;
    let side = (2 * rc + 1) as usize;
    let overflow = || HelmError::Numerical("stencil coarsening overflowed i128".into());
    let mut out = vec![0i128; side * side];
    for qy in -rc..=rc {
        for qx in -rc..=rc {
            let mut s: i128 = 0;
            for b in -rw..=rw {
                for a in -rw..=rw {
                    let wab = w.numerator(a) * w.numerator(b);
                    for q in -r..=r {
                        let wy = w.numerator(b + q - 2 * qy);
                        if wy == 0 {
                            continue;
                        }
                        for p in -r..=r {
                            let k = kernel.get(p, q);
                            let wx = w.numerator(a + p - 2 * qx);
                            if k == 0 || wx == 0 {
                                continue;
                            }
                            let term = wab
                                .checked_mul(wx * wy)
                                .and_then(|t| t.checked_mul(k))
                                .ok_or_else(overflow)?;
                            s = s.checked_add(term).ok_or_else(overflow)?;
                        }
                    }
                }
            }
            out[((qy + rc) * (2 * rc + 1) + qx + rc) as usize] = s;
        }
    }
    let k = StencilKernel::new(
        rc as usize,
        out,
        kernel.den_log2() + 4 * w.den_log2,
        kernel.h_power(),
    )?;
    Ok(k.trimmed().truncated(MAX_KERNEL_RADIUS).normalized())
}

/// One coarsening step of the (Laplace, mass) kernel pair with the default
/// transfer weights. See [`galerkin_coarsen_with`].
pub fn galerkin_coarsen(
    laplace: &StencilKernel,
    mass: &StencilKernel,
) -> Result<(StencilKernel, StencilKernel)> {
    galerkin_coarsen_with(laplace, mass, &TransferStencil::prolongation())
}

/// Coarse kernels of `R A Z` with `R = Z^T / 4`. The Laplace kernel is
/// expressed relative to the coarse `1/h^2`, which absorbs the factor `1/4`;
/// the mass kernel keeps it.
pub fn galerkin_coarsen_with(
    laplace: &StencilKernel,
    mass: &StencilKernel,
    w: &TransferStencil,
) -> Result<(StencilKernel, StencilKernel)> {
    let lap = galerkin_triple(laplace, w)?;
    let m = galerkin_triple(mass, w)?;
    let m = StencilKernel::new(m.radius(), m.numerators().to_vec(), m.den_log2() + 2, m.h_power())?
        .normalized();
    Ok((lap, m))
}

/// First printed coefficient that the derived chain fails to reproduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilMismatch {
    pub level: usize,
    pub kernel: &'static str,
    pub dx: isize,
    pub dy: isize,
    pub printed: i128,
    /// Derived numerator on the printed denominator, if it is an integer there.
    pub derived: Option<i128>,
}

/// Comparison of one level of the derived chain with the printed tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelCheck {
    pub level: usize,
    /// Coefficients equal as exact integers.
    pub exact: usize,
    /// Coefficients beyond `2^53` whose printed value carries double-precision
    /// rounding and agrees to a relative `1e-15`.
    pub rounded: usize,
    pub mismatch: Option<StencilMismatch>,
}

/// Result of checking the level 3 to 6 kernels against the printed tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainCheck {
    pub levels: Vec<LevelCheck>,
}

impl ChainCheck {
    pub fn all_match(&self) -> bool {
        self.levels.iter().all(|l| l.mismatch.is_none())
    }

    pub fn first_mismatch(&self) -> Option<&StencilMismatch> {
        self.levels.iter().find_map(|l| l.mismatch.as_ref())
    }
}

/// Numerator of `kernel * 2^extra` on denominator `2^den`, if integral.
fn on_denominator(num: i128, kernel_den: u32, extra: u32, den: u32) -> Option<i128> {
    let shift = den as i64 + extra as i64 - kernel_den as i64;
    if shift >= 0 {
        num.checked_mul(1i128.checked_shl(shift as u32)?)
    } else {
        let d = 1i128 << (-shift);
        (num % d == 0).then(|| num / d)
    }
}

fn compare_table(
    level: usize,
    name: &'static str,
    kernel: &StencilKernel,
    table: &crate::operators::tables::Table,
    den: u32,
    extra: u32,
    check: &mut LevelCheck,
) {
    const EXACT_LIMIT: i128 = 1 << 53;
    for (q, row) in table.iter().enumerate() {
        for (p, &printed) in row.iter().enumerate() {
            let (dx, dy) = (p as isize - 3, q as isize - 3);
            let derived = on_denominator(kernel.get(dx, dy), kernel.den_log2(), extra, den);
            match derived {
                Some(d) if d == printed => check.exact += 1,
                Some(d) if printed.abs() >= EXACT_LIMIT
                    && ((d - printed).abs() as f64) <= 1e-15 * printed.abs() as f64 =>
                {
                    check.rounded += 1
                }
                _ => {
                    if check.mismatch.is_none() {
                        check.mismatch = Some(StencilMismatch {
                            level,
                            kernel: name,
                            dx,
                            dy,
                            printed,
                            derived,
                        });
                    }
                }
            }
        }
    }
}

/// Run the Galerkin chain from the level-1 kernels with 1D weights `w` and
/// compare levels 3 to 6 with the printed tables. The printed mass tables are
/// normalized to sum `4^(l-1)`; the comparison accounts for that factor.
pub fn verify_printed_chain(w: &TransferStencil) -> Result<ChainCheck> {
    use crate::operators::tables::PRINTED;
    let mut lap = StencilKernel::laplace_5pt();
    let mut mass = StencilKernel::identity_mass();
    let mut level = 1;
    let mut levels = Vec::new();
    for (lvl, lap_t, lap_den, mass_t, mass_den) in PRINTED {
        while level < lvl {
            let next = galerkin_coarsen_with(&lap, &mass, w)?;
            lap = next.0;
            mass = next.1;
            level += 1;
        }
        let mut check = LevelCheck {
            level: lvl,
            exact: 0,
            rounded: 0,
            mismatch: None,
        };
        compare_table(lvl, "laplace", &lap, lap_t, lap_den, 0, &mut check);
        compare_table(lvl, "mass", &mass, mass_t, mass_den, 2 * (lvl as u32 - 1), &mut check);
        levels.push(check);
    }
    Ok(ChainCheck { levels })
}

fn coarse_dims(nx: usize, ny: usize) -> Result<(usize, usize)> {
    match (coarsen_count(nx), coarsen_count(ny)) {
        (Some(cx), Some(cy)) => Ok((cx, cy)),
        _ => Err(HelmError::Level(format!("grid {nx}x{ny} has no coarse level"))),
    }
}

/// Restrict fine rows into coarse rows `j0..j0 + out.len() / cnx`.
pub fn restrict_rows(fine: &[Complex64], fnx: usize, fny: usize, cnx: usize, j0: usize, out: &mut [Complex64]) {
    for (row, chunk) in out.chunks_mut(cnx).enumerate() {
        let jc = (j0 + row) as isize;
        for (ic, o) in chunk.iter_mut().enumerate() {
            let ic = ic as isize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (bi, wb) in RW.iter().enumerate() {
                let j = 2 * jc + bi as isize - 2;
                if j < 0 || j >= fny as isize {
                    continue;
                }
                let base = j as usize * fnx;
                let mut racc = Complex64::new(0.0, 0.0);
                for (ai, wa) in RW.iter().enumerate() {
                    let i = 2 * ic + ai as isize - 2;
                    if i < 0 || i >= fnx as isize {
                        continue;
                    }
                    racc += fine[base + i as usize] * *wa;
                }
                acc += racc * *wb;
            }
            *o = acc;
        }
    }
}

/// Prolong coarse values into fine rows `j0..j0 + out.len() / fnx`.
pub fn prolong_rows(coarse: &[Complex64], cnx: usize, cny: usize, fnx: usize, j0: usize, out: &mut [Complex64]) {
    // Coarse neighbours of fine index i: I with |i - 2I| <= 2.
    let span = |i: usize, n: usize| -> (usize, usize) {
        let lo = i.saturating_sub(2).div_ceil(2);
        let hi = ((i + 2) / 2).min(n - 1);
        (lo, hi)
    };
    for (row, chunk) in out.chunks_mut(fnx).enumerate() {
        let j = j0 + row;
        let (jlo, jhi) = span(j, cny);
        for (i, o) in chunk.iter_mut().enumerate() {
            let (ilo, ihi) = span(i, cnx);
            let mut acc = Complex64::new(0.0, 0.0);
            for jc in jlo..=jhi {
                let wy = PW[(j as isize - 2 * jc as isize + 2) as usize];
                let base = jc * cnx;
                let mut racc = Complex64::new(0.0, 0.0);
                for ic in ilo..=ihi {
                    let wx = PW[(i as isize - 2 * ic as isize + 2) as usize];
                    racc += coarse[base + ic] * wx;
                }
                acc += racc * wy;
            }
            *o = acc;
        }
    }
}

/// Restriction of a raw fine-grid vector.
pub fn restrict_vec(fine: &[Complex64], fnx: usize, fny: usize) -> Result<(Vec<Complex64>, usize, usize)> {
    if fine.len() != fnx * fny {
        return Err(HelmError::shape(fnx * fny, fine.len()));
    }
    let (cx, cy) = coarse_dims(fnx, fny)?;
    let mut out = vec![Complex64::new(0.0, 0.0); cx * cy];
    restrict_rows(fine, fnx, fny, cx, 0, &mut out);
    Ok((out, cx, cy))
}

/// Prolongation of a raw coarse-grid vector onto the `fnx x fny` grid.
pub fn prolong_vec(coarse: &[Complex64], fnx: usize, fny: usize) -> Result<Vec<Complex64>> {
    let (cx, cy) = coarse_dims(fnx, fny)?;
    if coarse.len() != cx * cy {
        return Err(HelmError::shape(cx * cy, coarse.len()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); fnx * fny];
    prolong_rows(coarse, cx, cy, fnx, 0, &mut out);
    Ok(out)
}

/// `R v` from level `v.level` to the next coarser level of `hierarchy`.
pub fn restrict(hierarchy: &GridHierarchy, v: &ComplexField) -> Result<ComplexField> {
    let fine = hierarchy.level(v.level)?;
    v.check_on(fine)?;
    let coarse = hierarchy
        .level(v.level + 1)
        .map_err(|_| HelmError::Level(format!("no level below {}", v.level)))?;
    let (data, _, _) = restrict_vec(&v.data, fine.nx, fine.ny)?;
    ComplexField::from_vec(coarse.level, coarse.nx, coarse.ny, data)
}

/// `Z v` from level `v.level` to the next finer level of `hierarchy`.
pub fn prolong(hierarchy: &GridHierarchy, v: &ComplexField) -> Result<ComplexField> {
    if v.level < 2 {
        return Err(HelmError::Level(format!("no level above {}", v.level)));
    }
    let coarse = hierarchy.level(v.level)?;
    v.check_on(coarse)?;
    let fine = hierarchy.level(v.level - 1)?;
    let data = prolong_vec(&v.data, fine.nx, fine.ny)?;
    ComplexField::from_vec(fine.level, fine.nx, fine.ny, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::StencilKernel;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn weights_are_consistent() {
        let p = TransferStencil::prolongation();
        let r = TransferStencil::restriction();
        assert!(p.is_symmetric() && r.is_symmetric());
        let rs: f64 = (-2..=2).map(|o| r.weight(o)).sum();
        assert_eq!(rs, 1.0);
        for o in -2..=2 {
            assert_eq!(PW[(o + 2) as usize], p.weight(o));
            assert_eq!(RW[(o + 2) as usize], r.weight(o));
            assert_eq!(p.weight(o), 2.0 * r.weight(o));
        }
    }

    #[test]
    fn constants_are_preserved_in_the_interior() {
        let (nx, ny) = (17, 17);
        let ones = vec![c(1.0, 0.0); nx * ny];
        let (rc, cx, cy) = restrict_vec(&ones, nx, ny).unwrap();
        for j in 1..cy - 1 {
            for i in 1..cx - 1 {
                assert_eq!(rc[j * cx + i], c(1.0, 0.0));
            }
        }
        let cones = vec![c(1.0, 0.0); 9 * 9];
        let f = prolong_vec(&cones, nx, ny).unwrap();
        for j in 2..ny - 2 {
            for i in 2..nx - 2 {
                assert_eq!(f[j * nx + i], c(1.0, 0.0));
            }
        }
    }

    #[test]
    fn impulse_prolongs_to_tensor_footprint() {
        let mut v = vec![c(0.0, 0.0); 9 * 9];
        v[4 * 9 + 4] = c(1.0, 0.0);
        let f = prolong_vec(&v, 17, 17).unwrap();
        for j in 0..17isize {
            for i in 0..17isize {
                let (dx, dy) = (i - 8, j - 8);
                let expect = if dx.abs() <= 2 && dy.abs() <= 2 {
                    PW[(dx + 2) as usize] * PW[(dy + 2) as usize]
                } else {
                    0.0
                };
                assert_eq!(f[(j * 17 + i) as usize], c(expect, 0.0));
            }
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let (r, _, _) = restrict_vec(&vec![c(0.0, 0.0); 81], 9, 9).unwrap();
        assert!(r.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn missing_coarse_level_is_an_error() {
        assert!(matches!(restrict_vec(&vec![c(0.0, 0.0); 16], 4, 4), Err(HelmError::Level(_))));
    }

    #[test]
    fn second_level_kernels() {
        let (l2, m2) = galerkin_coarsen(&StencilKernel::laplace_5pt(), &StencilKernel::identity_mass()).unwrap();
        assert_eq!(l2.radius(), 2);
        assert_eq!(m2.radius(), 2);
        assert_eq!(l2.interior_constant_action(), 0);
        assert!(l2.is_symmetric() && m2.is_symmetric());
        let ms: f64 = m2.numerators().iter().map(|&n| n as f64).sum::<f64>() / (1u128 << m2.den_log2()) as f64;
        assert_eq!(ms, 1.0);
    }

    /// 1D prolongation matrix built from the weight list, row-major `fine x coarse`.
    fn dense_1d(cn: usize) -> Vec<Vec<f64>> {
        let w = [1.0, 4.0, 6.0, 4.0, 1.0];
        let fn_ = 2 * (cn - 1) + 1;
        let mut m = vec![vec![0.0; cn]; fn_];
        for c in 0..cn {
            for (o, wo) in w.iter().enumerate() {
                let f = 2 * c as isize + o as isize - 2;
                if (0..fn_ as isize).contains(&f) {
                    m[f as usize][c] = wo / 8.0;
                }
            }
        }
        m
    }

    fn random_field(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<Complex64> {
        use rand::Rng;
        (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let n: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (d / n).sqrt()
    }

    #[test]
    fn transfers_match_dense_tensor_products() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for (cx, cy) in [(3, 3), (5, 9), (9, 5), (17, 17)] {
            let (px, py) = (dense_1d(cx), dense_1d(cy));
            let (fx, fy) = (px.len(), py.len());
            let coarse = random_field(&mut rng, cx * cy);
            let mut want = vec![c(0.0, 0.0); fx * fy];
            for j in 0..fy {
                for i in 0..fx {
                    for q in 0..cy {
                        for p in 0..cx {
                            want[j * fx + i] += coarse[q * cx + p] * (py[j][q] * px[i][p]);
                        }
                    }
                }
            }
            let got = prolong_vec(&coarse, fx, fy).unwrap();
            assert!(rel_err(&got, &want) <= 1e-13, "prolong {cx}x{cy}");

            let fine = random_field(&mut rng, fx * fy);
            let mut want = vec![c(0.0, 0.0); cx * cy];
            for q in 0..cy {
                for p in 0..cx {
                    for j in 0..fy {
                        for i in 0..fx {
                            want[q * cx + p] += fine[j * fx + i] * (py[j][q] * px[i][p] / Z_OVER_RT);
                        }
                    }
                }
            }
            let (got, gx, gy) = restrict_vec(&fine, fx, fy).unwrap();
            assert_eq!((gx, gy), (cx, cy));
            assert!(rel_err(&got, &want) <= 1e-13, "restrict {cx}x{cy}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::SeedableRng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn transfers_are_linear(seed in any::<u64>(), size in 0usize..3, a in (-2.0f64..2.0, -2.0f64..2.0), b in (-2.0f64..2.0, -2.0f64..2.0)) {
                let n = [9usize, 17, 33][size];
                let (a, b) = (c(a.0, a.1), c(b.0, b.1));
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let (u, v) = (random_field(&mut rng, n * n), random_field(&mut rng, n * n));
                let mix: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
                let r = |x: &[Complex64]| restrict_vec(x, n, n).unwrap().0;
                let (ru, rv) = (r(&u), r(&v));
                let want: Vec<Complex64> = ru.iter().zip(&rv).map(|(x, y)| a * x + b * y).collect();
                prop_assert!(rel_err(&r(&mix), &want) <= 1e-13);

                let m = n / 2 + 1;
                let (cu, cv) = (&u[..m * m], &v[..m * m]);
                let cmix: Vec<Complex64> = cu.iter().zip(cv).map(|(x, y)| a * x + b * y).collect();
                let p = |x: &[Complex64]| prolong_vec(x, n, n).unwrap();
                let (pu, pv) = (p(cu), p(cv));
                let want: Vec<Complex64> = pu.iter().zip(&pv).map(|(x, y)| a * x + b * y).collect();
                prop_assert!(rel_err(&p(&cmix), &want) <= 1e-13);
            }
        }
    }
}
