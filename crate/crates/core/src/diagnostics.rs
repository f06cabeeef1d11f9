//! Ward-identity and Lagrange-identity statistics, Berezin kernel estimates,
//! reference kernels and the residual of the limiting Ward equation.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::estimator::{BlockedStats, RescaleFrame};
use crate::potential::PotentialSpec;
use crate::sampler::SampleSink;
use crate::scalar::{KahanSum, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("test function support D({center}, {radius}) is not inside the hard wall with margin {margin}")]
    SupportViolation { center: String, radius: f64, margin: f64 },
    #[error("bad input: {0}")]
    BadInput(String),
}

/// Smooth bump `f(z) = exp(1 − R²/(R² − |z − c|²))` on `D(c, R)`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction<T> {
    pub center: Complex<T>,
    pub radius: T,
}

impl<T: Real> TestFunction<T> {
    pub fn new(center: Complex<T>, radius: T) -> Result<Self, DiagnosticsError> {
        if !(radius > T::zero()) || !center.re.is_finite() || !center.im.is_finite() {
            return Err(DiagnosticsError::BadInput("bump needs a finite center and positive radius".into()));
        }
        Ok(Self { center, radius })
    }

    /// Rejects bumps whose support comes closer than `η₀` to the wall.
    pub fn check_support(&self, spec: &PotentialSpec<T>) -> Result<(), DiagnosticsError> {
        let c = self.center.norm();
        let m = spec.eta0();
        let outer_ok = c + self.radius + m <= spec.sigma_outer();
        let inner_ok = spec.sigma_inner() == T::zero() || c - self.radius - m >= spec.sigma_inner();
        if outer_ok && inner_ok {
            Ok(())
        } else {
            Err(DiagnosticsError::SupportViolation {
                center: format!("{}", self.center),
                radius: self.radius.f64(),
                margin: m.f64(),
            })
        }
    }

    #[inline]
    pub fn value(&self, z: Complex<T>) -> T {
        let r2 = self.radius * self.radius;
        let s = (z - self.center).norm_sqr();
        if s >= r2 {
            return T::zero();
        }
        (T::one() - r2 / (r2 - s)).exp()
    }

    /// `∂f = f · (−R²/(R² − s)²) · conj(z − c)` with `s = |z − c|²`.
    #[inline]
    pub fn d(&self, z: Complex<T>) -> Complex<T> {
        let r2 = self.radius * self.radius;
        let w = z - self.center;
        let s = w.norm_sqr();
        if s >= r2 {
            return Complex::new(T::zero(), T::zero());
        }
        let g = r2 - s;
        let f = (T::one() - r2 / g).exp();
        w.conj() * (-f * r2 / (g * g))
    }
}

/// The Ward statistic
/// `W⁺[f] = (1/β)Σ∂f(z_j) − nΣ(f∂Q)(z_j) + ½Σ_{j≠k}(f(z_j) − f(z_k))/(z_j − z_k)`.
pub fn ward_stat<T: Real>(spec: &PotentialSpec<T>, beta: T, config: &[Complex<T>], f: &TestFunction<T>) -> Result<Complex<T>, DiagnosticsError> {
    f.check_support(spec)?;
    Ok(ward_parts(spec, beta, config, f, true))
}

fn ward_parts<T: Real>(spec: &PotentialSpec<T>, beta: T, config: &[Complex<T>], f: &TestFunction<T>, pair_term: bool) -> Complex<T> {
    let n = T::of_usize(config.len());
    let values: Vec<T> = config.iter().map(|z| f.value(*z)).collect();
    let (mut re, mut im) = (KahanSum::new(), KahanSum::new());
    for (z, &fz) in config.iter().zip(&values) {
        if fz == T::zero() {
            continue;
        }
        let t = f.d(*z) / beta - spec.dq_unchecked(*z) * (n * fz);
        re.add(t.re);
        im.add(t.im);
    }
    if pair_term {
        // ½ Σ_{j≠k} is Σ_{j<k}; only pairs touching the support contribute
        for j in 0..config.len() {
            for k in j + 1..config.len() {
                let df = values[j] - values[k];
                if df == T::zero() {
                    continue;
                }
                let dz = config[j] - config[k];
                if dz.norm_sqr() == T::zero() {
                    continue;
                }
                let t = dz.inv() * df;
                re.add(t.re);
                im.add(t.im);
            }
        }
    }
    Complex::new(re.value(), im.value())
}

/// Chain-blocked Monte Carlo estimate of `E W⁺[f]` for several bumps.
#[derive(Debug, Clone)]
pub struct WardSink {
    spec: PotentialSpec<f64>,
    beta: f64,
    bumps: Vec<TestFunction<f64>>,
    pair_term: bool,
    pub stats: BlockedStats,
}

impl WardSink {
    pub fn new(spec: &PotentialSpec<f64>, beta: f64, bumps: &[TestFunction<f64>], block: usize) -> Result<Self, DiagnosticsError> {
        for f in bumps {
            f.check_support(spec)?;
        }
        Ok(Self {
            spec: spec.clone(),
            beta,
            bumps: bumps.to_vec(),
            pair_term: true,
            stats: BlockedStats::new(2 * bumps.len(), block),
        })
    }

    /// Drops the pair term: a statistic with nonzero mean, used to check that
    /// the test has power.
    pub fn corrupted(mut self) -> Self {
        self.pair_term = false;
        self
    }

    pub fn results(&self) -> Vec<WardResult> {
        let m = self.stats.mean();
        let se = self.stats.stderr();
        self.bumps
            .iter()
            .enumerate()
            .map(|(i, f)| WardResult {
                center: (f.center.re, f.center.im),
                radius: f.radius,
                mean: (m[2 * i], m[2 * i + 1]),
                stderr: (se[2 * i], se[2 * i + 1]),
                z_score: (m[2 * i] / se[2 * i], m[2 * i + 1] / se[2 * i + 1]),
                blocks: self.stats.blocks(),
            })
            .collect()
    }
}

impl SampleSink<f64> for WardSink {
    fn observe(&mut self, _chain: u64, _sweep: u64, config: &[Complex<f64>]) {
        let mut x = Vec::with_capacity(2 * self.bumps.len());
        for f in &self.bumps {
            let w = ward_parts(&self.spec, self.beta, config, f, self.pair_term);
            x.push(w.re);
            x.push(w.im);
        }
        self.stats.observe(&x);
    }

    fn merge(&mut self, other: Self) {
        self.stats.merge(other.stats);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WardResult {
    pub center: (f64, f64),
    pub radius: f64,
    pub mean: (f64, f64),
    pub stderr: (f64, f64),
    pub z_score: (f64, f64),
    pub blocks: usize,
}

impl WardResult {
    pub fn max_abs_z(&self) -> f64 {
        self.z_score.0.abs().max(self.z_score.1.abs())
    }
}

/// `log|ℓ_j(z)|` for the weighted Lagrange polynomial through the sample;
/// `−∞` at the other sample points.
pub fn lagrange_log_abs<T: Real>(spec: &PotentialSpec<T>, config: &[Complex<T>], j: usize, z: Complex<T>) -> T {
    let zj = config[j];
    if z == zj {
        return T::zero();
    }
    let mut s = KahanSum::new();
    for (i, zi) in config.iter().enumerate() {
        if i == j {
            continue;
        }
        let num = (z - zi).norm();
        if num == T::zero() {
            return T::neg_infinity();
        }
        s.add(num.ln() - (zj - zi).norm().ln());
    }
    let half_n = T::of_usize(config.len()) / T::of(2.0);
    s.value() - half_n * (spec.eval_q(z) - spec.eval_q(zj))
}

/// Accumulates `|ℓ_j(z)|^{2β}` averaged over `j`, at several points.
#[derive(Debug, Clone)]
pub struct LagrangeSink {
    spec: PotentialSpec<f64>,
    beta: f64,
    points: Vec<Complex<f64>>,
    pub stats: BlockedStats,
}

impl LagrangeSink {
    pub fn new(spec: &PotentialSpec<f64>, beta: f64, points: &[Complex<f64>], block: usize) -> Self {
        Self {
            spec: spec.clone(),
            beta,
            points: points.to_vec(),
            stats: BlockedStats::new(points.len(), block),
        }
    }

    /// Compares each Monte Carlo mean with `|Σ| R(z)/n`, where `reference`
    /// supplies `R(z)` and its standard error.
    pub fn report<F: Fn(Complex<f64>) -> (f64, f64)>(&self, n: usize, reference: F) -> Vec<LagrangeResult> {
        let m = self.stats.mean();
        let se = self.stats.stderr();
        let area = self.spec.wall_area();
        self.points
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let (r, rse) = reference(z);
                let expected = area * r / n as f64;
                let err = (se[i].powi(2) + (area * rse / n as f64).powi(2)).sqrt();
                LagrangeResult {
                    z: (z.re, z.im),
                    mean: m[i],
                    stderr: se[i],
                    expected,
                    z_score: (m[i] - expected) / err,
                }
            })
            .collect()
    }
}

impl SampleSink<f64> for LagrangeSink {
    fn observe(&mut self, _chain: u64, _sweep: u64, config: &[Complex<f64>]) {
        let n = config.len() as f64;
        let x: Vec<f64> = self
            .points
            .iter()
            .map(|&z| (0..config.len()).map(|j| (2.0 * self.beta * lagrange_log_abs(&self.spec, config, j, z)).exp()).sum::<f64>() / n)
            .collect();
        self.stats.observe(&x);
    }

    fn merge(&mut self, other: Self) {
        self.stats.merge(other.stats);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagrangeResult {
    pub z: (f64, f64),
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
    pub z_score: f64,
}

/// Tallies for the Berezin kernel at one anchor: hits in the anchor cell,
/// hits per grid cell and distinct pairs (anchor cell, grid cell).
#[derive(Debug, Clone)]
pub struct BerezinSink {
    frame: RescaleFrame,
    anchor: Complex<f64>,
    anchor_half: f64,
    grid: GridSpec,
    pub stats: BlockedStats,
}

/// A square grid of cells in microscopic coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Complex<f64>,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// `m × m` cells of side `step` centred on `c`.
    pub fn centered(c: Complex<f64>, step: f64, m: usize) -> Self {
        let half = step * m as f64 / 2.0;
        Self {
            origin: c - Complex::new(half, half),
            step,
            nx: m,
            ny: m,
        }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_of(&self, u: Complex<f64>) -> Option<usize> {
        let fx = (u.re - self.origin.re) / self.step;
        let fy = (u.im - self.origin.im) / self.step;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then_some(iy * self.nx + ix)
    }

    pub fn center(&self, k: usize) -> Complex<f64> {
        self.origin + Complex::new((k % self.nx) as f64 + 0.5, (k / self.nx) as f64 + 0.5) * self.step
    }

    /// Cell area in `dA` units.
    pub fn cell_area(&self) -> f64 {
        self.step * self.step / std::f64::consts::PI
    }
}

impl BerezinSink {
    /// `anchor` is in microscopic coordinates of `frame`; the anchor cell is a
    /// square of side `anchor_side`.
    pub fn new(frame: RescaleFrame, anchor: Complex<f64>, anchor_side: f64, grid: GridSpec, block: usize) -> Self {
        let dim = 1 + 2 * grid.cells();
        Self {
            frame,
            anchor,
            anchor_half: anchor_side / 2.0,
            grid,
            stats: BlockedStats::new(dim, block),
        }
    }

    fn in_anchor(&self, u: Complex<f64>) -> bool {
        (u.re - self.anchor.re).abs() < self.anchor_half && (u.im - self.anchor.im).abs() < self.anchor_half
    }

    /// Assembles `B̂(u, v) = (R̂(u)R̂(v) − R̂₂(u, v))/R̂(u)` in microscopic
    /// units, with jackknife errors over blocks.
    pub fn field(&self) -> Result<BerezinField, DiagnosticsError> {
        let blocks = &self.stats.means;
        let k = blocks.len();
        if k < 2 {
            return Err(DiagnosticsError::BadInput("need at least two blocks".into()));
        }
        let dim = self.stats.dim();
        let mut total = vec![0.0; dim];
        for b in blocks {
            for (t, x) in total.iter_mut().zip(b) {
                *t += x;
            }
        }
        let anchor_area = (2.0 * self.anchor_half).powi(2) / std::f64::consts::PI;
        let cells = self.grid.cells();
        let cell_area = self.grid.cell_area();
        // all quantities from per-configuration means
        let assemble = |m: &[f64]| -> (Vec<f64>, f64, f64) {
            let ra = m[0] / anchor_area;
            let mut b = Vec::with_capacity(cells);
            let mut integral = 0.0;
            for c in 0..cells {
                let rv = m[1 + c] / cell_area;
                let r2 = m[1 + cells + c] / (anchor_area * cell_area);
                let v = if ra > 0.0 { (ra * rv - r2) / ra } else { 0.0 };
                integral += v * cell_area;
                b.push(v);
            }
            (b, integral, ra)
        };
        let mean: Vec<f64> = total.iter().map(|t| t / k as f64).collect();
        let (values, integral, density) = assemble(&mean);
        let mut var = vec![0.0; cells];
        let (mut var_int, mut var_rho) = (0.0, 0.0);
        let mut leave = vec![0.0; dim];
        for b in blocks {
            for i in 0..dim {
                leave[i] = (total[i] - b[i]) / (k - 1) as f64;
            }
            let (bv, bi, br) = assemble(&leave);
            for c in 0..cells {
                var[c] += (bv[c] - values[c]).powi(2);
            }
            var_int += (bi - integral).powi(2);
            var_rho += (br - density).powi(2);
        }
        let jk = (k - 1) as f64 / k as f64;
        Ok(BerezinField {
            anchor: self.anchor,
            grid: self.grid,
            values,
            stderr: var.iter().map(|v| (v * jk).sqrt()).collect(),
            integral,
            integral_stderr: (var_int * jk).sqrt(),
            anchor_density: density,
            anchor_density_stderr: (var_rho * jk).sqrt(),
            anchor_hits: (mean[0] * (k * self.stats.block()) as f64).round() as u64,
        })
    }
}

impl SampleSink<f64> for BerezinSink {
    fn observe(&mut self, _chain: u64, _sweep: u64, config: &[Complex<f64>]) {
        let micro: Vec<Complex<f64>> = config.iter().map(|z| self.frame.to_micro(*z)).collect();
        let cells = self.grid.cells();
        let mut hits = Vec::new();
        let anchored: Vec<usize> = (0..micro.len()).filter(|&j| self.in_anchor(micro[j])).collect();
        hits.push((0, anchored.len() as f64));
        for (k, u) in micro.iter().enumerate() {
            if let Some(c) = self.grid.cell_of(*u) {
                hits.push((1 + c, 1.0));
                let pairs = anchored.iter().filter(|&&j| j != k).count();
                if pairs > 0 {
                    hits.push((1 + cells + c, pairs as f64));
                }
            }
        }
        self.stats.observe_sparse(hits);
    }

    fn merge(&mut self, other: Self) {
        self.stats.merge(other.stats);
    }
}

/// Estimated microscopic Berezin kernel `v ↦ B̂(u, v)` at one anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct BerezinField {
    pub anchor: Complex<f64>,
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `∫ B̂(u, v) dA(v)` over the grid.
    pub integral: f64,
    pub integral_stderr: f64,
    /// `ρ̂(u)` from the anchor cell.
    pub anchor_density: f64,
    pub anchor_density_stderr: f64,
    pub anchor_hits: u64,
}

impl BerezinField {
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,berezin,stderr")?;
        for k in 0..self.values.len() {
            let c = self.grid.center(k);
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", c.re, c.im, self.values[k], self.stderr[k])?;
        }
        Ok(())
    }
}

/// `e^{−β|u−v|²}`.
pub fn bulk_kernel(beta: f64, u: Complex<f64>, v: Complex<f64>) -> f64 {
    (-beta * (u - v).norm_sqr()).exp()
}

/// `e^{−β|u−v|²} · ½erfc(√(β/2) Re(u + v))`.
pub fn boundary_kernel(beta: f64, u: Complex<f64>, v: Complex<f64>) -> f64 {
    bulk_kernel(beta, u, v) * 0.5 * libm::erfc((beta / 2.0).sqrt() * (u + v).re)
}

/// `½erfc(w/√2)` for complex `w`, as `(1/√(2π)) ∫_0^∞ e^{−(w+t)²/2} dt`.
fn half_erfc_complex(w: Complex<f64>) -> Complex<f64> {
    use std::sync::OnceLock;
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let rule = RULE.get_or_init(|| crate::quadrature::composite_rule(0.0, 14.0, 28, 16));
    let mut s = Complex::new(0.0, 0.0);
    for &(t, wt) in rule {
        s += (-(w + t) * (w + t) / 2.0).exp() * wt;
    }
    s / (2.0 * std::f64::consts::PI).sqrt()
}

/// Limiting β = 1 Berezin kernel at a regular boundary point of the
/// Ginibre ensemble, `e^{−|u−v|²}|F(u+v̄)|²/F(2 Re u)` with `F(w) = ½erfc(w/√2)`.
/// Intended for `|Im(u − v)| ≲ 8`.
pub fn ginibre_edge_kernel(u: Complex<f64>, v: Complex<f64>) -> f64 {
    let f = half_erfc_complex(u + v.conj()).norm_sqr();
    (-(u - v).norm_sqr()).exp() * f / (0.5 * libm::erfc(std::f64::consts::SQRT_2 * u.re))
}

/// `½erfc(√(2β) Re u)`.
pub fn erfc_profile(beta: f64, u: Complex<f64>) -> f64 {
    0.5 * libm::erfc((2.0 * beta).sqrt() * u.re)
}

/// `F_s(x) = (1/√(2π)) ∫_{−s/2}^{s/2} e^{−(x−t)²/2} dt`, the normal mass of
/// `(x − s/2, x + s/2)`.
pub fn f_s_profile(s: f64, x: f64) -> f64 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    0.5 * (libm::erfc((x - s / 2.0) * r) - libm::erfc((x + s / 2.0) * r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefProfile {
    BulkKernel,
    BoundaryKernel,
    Erfc,
    /// Band profile `F_s(2 Im u)` of the almost-circular ensemble.
    Band { s: f64 },
}

impl RefProfile {
    /// Kernels take both arguments; profiles ignore `v`.
    pub fn eval(&self, beta: f64, u: Complex<f64>, v: Complex<f64>) -> f64 {
        match *self {
            RefProfile::BulkKernel => bulk_kernel(beta, u, v),
            RefProfile::BoundaryKernel => boundary_kernel(beta, u, v),
            RefProfile::Erfc => erfc_profile(beta, u),
            RefProfile::Band { s } => f_s_profile(s, 2.0 * u.im),
        }
    }
}

/// `∫∫ dx dy / (x + iy)` over `[x0, x1] × [y0, y1]`.
pub fn cauchy_cell(x0: f64, x1: f64, y0: f64, y1: f64) -> Complex<f64> {
    // Φ_xy = x/(x² + y²)
    fn phi(x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        let a = if x == 0.0 { 0.0 } else { x * (y / x).atan() };
        let b = if r2 == 0.0 { 0.0 } else { 0.5 * y * r2.ln() };
        a + b
    }
    let box_diff = |g: &dyn Fn(f64, f64) -> f64| g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0);
    let re = box_diff(&|x, y| phi(x, y));
    let im = -box_diff(&|x, y| phi(y, x));
    Complex::new(re, im)
}

/// Grid and stencil settings for [`ward_equation_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualGrid {
    /// Cell side of the Cauchy-transform grid.
    pub step: f64,
    /// Half-width of the square integration window about `u`.
    pub half_width: f64,
    /// Finite-difference step for `∂̄` and `∂∂̄`.
    pub fd_step: f64,
}

impl Default for ResidualGrid {
    fn default() -> Self {
        Self {
            step: 0.05,
            half_width: 6.0,
            fd_step: 0.05,
        }
    }
}

/// Residual of the limiting Ward equation
/// `∂̄_u ∫ B(u,v)/(u−v) dA(v) − B(u,u) + 1 + (1/β)∂∂̄ log B(u,u)` at each point.
pub fn ward_equation_residual<K: Fn(Complex<f64>, Complex<f64>) -> f64 + Sync>(kernel: K, beta: f64, points: &[Complex<f64>], grid: &ResidualGrid) -> Vec<Complex<f64>> {
    use rayon::prelude::*;
    let m = (2.0 * grid.half_width / grid.step).round() as usize | 1;
    let half = m as f64 * grid.step / 2.0;
    // cells w = v − u centred on the origin; 1/(u − v) = −1/w
    let cells: Vec<(Complex<f64>, Complex<f64>)> = (0..m * m)
        .map(|k| {
            let (ix, iy) = ((k % m) as f64, (k / m) as f64);
            let x0 = -half + ix * grid.step;
            let y0 = -half + iy * grid.step;
            let c = Complex::new(x0 + grid.step / 2.0, y0 + grid.step / 2.0);
            let w = -cauchy_cell(x0, x0 + grid.step, y0, y0 + grid.step) / std::f64::consts::PI;
            (c, w)
        })
        .collect();
    let transform = |u: Complex<f64>| -> Complex<f64> {
        let mut re = KahanSum::new();
        let mut im = KahanSum::new();
        for (c, w) in &cells {
            let t = *w * kernel(u, u + c);
            re.add(t.re);
            im.add(t.im);
        }
        Complex::new(re.value(), im.value())
    };
    let h = grid.fd_step;
    let diag_log = |u: Complex<f64>| kernel(u, u).ln();
    points
        .par_iter()
        .map(|&u| {
            let ex = Complex::new(h, 0.0);
            let ey = Complex::new(0.0, h);
            let dx = (transform(u + ex) - transform(u - ex)) / (2.0 * h);
            let dy = (transform(u + ey) - transform(u - ey)) / (2.0 * h);
            let dbar = (dx + Complex::new(0.0, 1.0) * dy) * 0.5;
            let lap = (diag_log(u + ex) + diag_log(u - ex) + diag_log(u + ey) + diag_log(u - ey) - 4.0 * diag_log(u)) / (h * h);
            dbar - (kernel(u, u) - 1.0 - lap / (4.0 * beta))
        })
        .collect()
}

/// `∂∂̄ log ρ` at `u` by the five-point Laplacian with step `h`.
pub fn laplacian_log<F: Fn(Complex<f64>) -> f64>(rho: F, u: Complex<f64>, h: f64) -> f64 {
    let l = |z: Complex<f64>| rho(z).ln();
    let (ex, ey) = (Complex::new(h, 0.0), Complex::new(0.0, h));
    (l(u + ex) + l(u - ex) + l(u + ey) + l(u - ey) - 4.0 * l(u)) / (4.0 * h * h)
}

/// `∫ K(u, v) dA(v)` over the square of half-width `half` about `u` by a
/// composite Gauss–Legendre rule.
pub fn kernel_mass<K: Fn(Complex<f64>, Complex<f64>) -> f64>(kernel: K, u: Complex<f64>, half: f64, panels: usize) -> f64 {
    let nodes = crate::quadrature::composite_rule(-half, half, panels, 16);
    let mut s = KahanSum::new();
    for (x, wx) in &nodes {
        for (y, wy) in &nodes {
            s.add(wx * wy * kernel(u, u + Complex::new(*x, *y)));
        }
    }
    s.value() / std::f64::consts::PI
}
