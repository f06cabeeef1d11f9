//! Statistics of sample streams: binned one-point densities, microscopic
//! rescalings, Lipschitz moduli, disc counts, overcrowding tails and checks of
//! the density upper bound.
//!
//! Everything here works in `f64`.

use std::io::{self, Write};

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::oracle::RadialKernelData;
use crate::potential::PotentialSpec;
use crate::sampler::SampleSink;

type Point = Complex<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("bins are too coarse: {per_unit:.2} bins per microscopic unit, at least 4 needed")]
    TooCoarse { per_unit: f64 },
    #[error("fields have different geometry")]
    GeometryMismatch,
    #[error("bad input: {0}")]
    BadInput(String),
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BBox {
    pub fn square(half: f64) -> Self {
        Self {
            x0: -half,
            x1: half,
            y0: -half,
            y1: half,
        }
    }
}

/// Histogram estimate of the one-point function `R_n` in `dA = dxdy/π` units.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub bbox: BBox,
    pub nx: usize,
    pub ny: usize,
    /// Row-major tallies, index `iy·nx + ix`.
    pub counts: Vec<u64>,
    pub samples: u64,
    /// Points seen, inside or outside the box.
    pub points: u64,
    /// Points that fell outside the box.
    pub spill: u64,
}

impl DensityField {
    pub fn new(bbox: BBox, nx: usize, ny: usize) -> Self {
        assert!(nx > 0 && ny > 0 && bbox.x1 > bbox.x0 && bbox.y1 > bbox.y0);
        Self {
            bbox,
            nx,
            ny,
            counts: vec![0; nx * ny],
            samples: 0,
            points: 0,
            spill: 0,
        }
    }

    fn dx(&self) -> f64 {
        (self.bbox.x1 - self.bbox.x0) / self.nx as f64
    }

    fn dy(&self) -> f64 {
        (self.bbox.y1 - self.bbox.y0) / self.ny as f64
    }

    pub fn bin_of(&self, z: Point) -> Option<usize> {
        let fx = (z.re - self.bbox.x0) / self.dx();
        let fy = (z.im - self.bbox.y0) / self.dy();
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then_some(iy * self.nx + ix)
    }

    pub fn accumulate(&mut self, config: &[Point]) {
        for z in config {
            match self.bin_of(*z) {
                Some(k) => self.counts[k] += 1,
                None => self.spill += 1,
            }
        }
        self.points += config.len() as u64;
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &DensityField) -> Result<(), EstimatorError> {
        if self.bbox != other.bbox || self.nx != other.nx || self.ny != other.ny {
            return Err(EstimatorError::GeometryMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.samples += other.samples;
        self.points += other.points;
        self.spill += other.spill;
        Ok(())
    }

    /// Bin area in `dA` units.
    pub fn bin_area(&self) -> f64 {
        self.dx() * self.dy() / std::f64::consts::PI
    }

    pub fn bin_rect(&self, k: usize) -> BBox {
        let (ix, iy) = (k % self.nx, k / self.nx);
        let x0 = self.bbox.x0 + ix as f64 * self.dx();
        let y0 = self.bbox.y0 + iy as f64 * self.dy();
        BBox {
            x0,
            x1: x0 + self.dx(),
            y0,
            y1: y0 + self.dy(),
        }
    }

    pub fn bin_center(&self, k: usize) -> Point {
        let r = self.bin_rect(k);
        Point::new(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1))
    }

    fn per_config(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.points as f64 / self.samples as f64
        }
    }

    /// `R̂ = counts / (samples · bin area)`.
    pub fn estimate(&self, k: usize) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        self.counts[k] as f64 / (self.samples as f64 * self.bin_area())
    }

    /// Binomial standard error of [`Self::estimate`], treating each of the
    /// `samples·n` points as an independent trial.
    pub fn stderr(&self, k: usize) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        let c = self.counts[k] as f64;
        let trials = self.samples as f64 * self.per_config();
        (c * (1.0 - c / trials)).max(0.0).sqrt() / (self.samples as f64 * self.bin_area())
    }

    /// `Σ R̂ · area` with its standard error; equals `n` minus the spill rate.
    pub fn mass(&self) -> (f64, f64) {
        let area = self.bin_area();
        let m = (0..self.counts.len()).map(|k| self.estimate(k) * area).sum();
        let v: f64 = (0..self.counts.len()).map(|k| (self.stderr(k) * area).powi(2)).sum();
        (m, v.sqrt())
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "x,y,density,stderr")?;
        for k in 0..self.counts.len() {
            let c = self.bin_center(k);
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", c.re, c.im, self.estimate(k), self.stderr(k))?;
        }
        Ok(())
    }
}

impl SampleSink<f64> for DensityField {
    fn observe(&mut self, _chain: u64, _sweep: u64, config: &[Point]) {
        self.accumulate(config);
    }

    fn merge(&mut self, other: Self) {
        DensityField::merge(self, &other).expect("sinks of one run share their geometry");
    }
}

/// Batch means of a vector statistic: observations are grouped in blocks of
/// `block` consecutive configurations and errors come from the spread of the
/// block means, which absorbs the autocorrelation of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedStats {
    dim: usize,
    block: usize,
    current: Vec<f64>,
    filled: usize,
    pub(crate) means: Vec<Vec<f64>>,
}

impl BlockedStats {
    pub fn new(dim: usize, block: usize) -> Self {
        assert!(block >= 1);
        Self {
            dim,
            block,
            current: vec![0.0; dim],
            filled: 0,
            means: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Adds `x[i]` for every `(i, x)` pair, then closes the observation.
    pub fn observe_sparse<I: IntoIterator<Item = (usize, f64)>>(&mut self, entries: I) {
        for (i, x) in entries {
            self.current[i] += x;
        }
        self.close();
    }

    pub fn observe(&mut self, x: &[f64]) {
        for (c, v) in self.current.iter_mut().zip(x) {
            *c += v;
        }
        self.close();
    }

    fn close(&mut self) {
        self.filled += 1;
        if self.filled == self.block {
            let b = self.block as f64;
            self.means.push(self.current.iter().map(|c| c / b).collect());
            self.current.iter_mut().for_each(|c| *c = 0.0);
            self.filled = 0;
        }
    }

    /// Appends the complete blocks of `other`; an incomplete block is dropped.
    pub fn merge(&mut self, other: BlockedStats) {
        assert_eq!(self.dim, other.dim);
        self.means.extend(other.means);
    }

    pub fn blocks(&self) -> usize {
        self.means.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let b = self.means.len().max(1) as f64;
        let mut m = vec![0.0; self.dim];
        for row in &self.means {
            for (a, x) in m.iter_mut().zip(row) {
                *a += x;
            }
        }
        m.iter_mut().for_each(|a| *a /= b);
        m
    }

    /// Standard error of [`Self::mean`] from the block means.
    pub fn stderr(&self) -> Vec<f64> {
        let k = self.means.len();
        if k < 2 {
            return vec![f64::INFINITY; self.dim];
        }
        let m = self.mean();
        let mut v = vec![0.0; self.dim];
        for row in &self.means {
            for ((a, x), mu) in v.iter_mut().zip(row).zip(&m) {
                *a += (x - mu).powi(2);
            }
        }
        v.iter().map(|s| (s / ((k - 1) as f64 * k as f64)).sqrt()).collect()
    }

    /// Standard error of a linear functional `Σ c_i·mean_i`.
    pub fn stderr_of(&self, coef: &[f64]) -> f64 {
        let k = self.means.len();
        if k < 2 {
            return f64::INFINITY;
        }
        let vals: Vec<f64> = self.means.iter().map(|row| row.iter().zip(coef).map(|(x, c)| x * c).sum()).collect();
        let mu = vals.iter().sum::<f64>() / k as f64;
        let v: f64 = vals.iter().map(|x| (x - mu).powi(2)).sum();
        (v / ((k - 1) as f64 * k as f64)).sqrt()
    }
}

/// Counts in annular bins `edges[i] ≤ |z| < edges[i+1]`, split into equal
/// angular sectors, with batch-means errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarHistogram {
    pub edges: Vec<f64>,
    pub sectors: usize,
    pub stats: BlockedStats,
}

impl PolarHistogram {
    pub fn new(edges: Vec<f64>, sectors: usize, block: usize) -> Self {
        assert!(edges.len() >= 2 && sectors >= 1);
        let dim = (edges.len() - 1) * sectors;
        Self {
            edges,
            sectors,
            stats: BlockedStats::new(dim, block),
        }
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn accumulate(&mut self, config: &[Point]) {
        let bins = self.bins();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        let tau = std::f64::consts::TAU;
        let mut hits = Vec::new();
        for z in config {
            let r = z.norm();
            if r < lo || r >= hi {
                continue;
            }
            let b = self.edges.partition_point(|&e| e <= r) - 1;
            let t = z.im.atan2(z.re).rem_euclid(tau);
            let s = ((t / tau * self.sectors as f64) as usize).min(self.sectors - 1);
            hits.push((s * bins + b, 1.0));
        }
        self.stats.observe_sparse(hits);
    }

    /// Ring area in `dA` units, divided among the sectors.
    fn cell_area(&self, b: usize) -> f64 {
        (self.edges[b + 1].powi(2) - self.edges[b].powi(2)) / self.sectors as f64
    }

    /// Sector-averaged density `R̂` per ring with its standard error.
    pub fn radial_density(&self) -> Vec<(f64, f64)> {
        let bins = self.bins();
        let mean = self.stats.mean();
        (0..bins)
            .map(|b| {
                let area = self.cell_area(b) * self.sectors as f64;
                let mut coef = vec![0.0; self.stats.dim()];
                let mut m = 0.0;
                for s in 0..self.sectors {
                    coef[s * bins + b] = 1.0 / area;
                    m += mean[s * bins + b] / area;
                }
                (m, self.stats.stderr_of(&coef))
            })
            .collect()
    }

    /// Density per (sector, ring) with standard errors.
    pub fn sector_density(&self) -> Vec<Vec<(f64, f64)>> {
        let bins = self.bins();
        let mean = self.stats.mean();
        let se = self.stats.stderr();
        (0..self.sectors)
            .map(|s| {
                (0..bins)
                    .map(|b| {
                        let a = self.cell_area(b);
                        (mean[s * bins + b] / a, se[s * bins + b] / a)
                    })
                    .collect()
            })
            .collect()
    }

    /// Aggregate test of angular invariance: for every ring the sector
    /// densities are compared with the ring mean; the chi-square sum over all
    /// cells is converted to a z-score `(χ² − ν)/√(2ν)`.
    pub fn angular_invariance_z(&self, rings: &[usize]) -> f64 {
        let bins = self.bins();
        let k = self.stats.blocks() as f64;
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for &b in rings {
            // deviations of each sector from the mean of the others, per block
            let mut dev_means = vec![0.0; self.sectors];
            let mut dev_vars = vec![0.0; self.sectors];
            let devs: Vec<Vec<f64>> = self
                .stats
                .means
                .iter()
                .map(|row| {
                    let ring: Vec<f64> = (0..self.sectors).map(|s| row[s * bins + b]).collect();
                    let avg = ring.iter().sum::<f64>() / self.sectors as f64;
                    ring.iter().map(|x| x - avg).collect()
                })
                .collect();
            for d in &devs {
                for s in 0..self.sectors {
                    dev_means[s] += d[s] / k;
                }
            }
            for d in &devs {
                for s in 0..self.sectors {
                    dev_vars[s] += (d[s] - dev_means[s]).powi(2) / ((k - 1.0) * k);
                }
            }
            // sector deviations sum to zero: one fewer degree of freedom
            for s in 0..self.sectors {
                if dev_vars[s] > 0.0 {
                    chi2 += dev_means[s].powi(2) / dev_vars[s] * (self.sectors - 1) as f64 / self.sectors as f64;
                }
            }
            dof += self.sectors - 1;
        }
        if dof == 0 {
            return 0.0;
        }
        (chi2 - dof as f64) / (2.0 * dof as f64).sqrt()
    }
}

impl SampleSink<f64> for PolarHistogram {
    fn observe(&mut self, _chain: u64, _sweep: u64, config: &[Point]) {
        self.accumulate(config);
    }

    fn merge(&mut self, other: Self) {
        self.stats.merge(other.stats);
    }
}

/// Microscopic coordinates about `center`: `u = rotation · scale · (z − center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleFrame {
    pub center: Point,
    pub scale: f64,
    pub rotation: Point,
}

impl RescaleFrame {
    /// Frame at `p` with the standard scale `√(nΔ)` and no rotation.
    pub fn new(center: Point, n: usize, delta: f64) -> Self {
        Self {
            center,
            scale: (n as f64 * delta).sqrt(),
            rotation: Point::new(1.0, 0.0),
        }
    }

    pub fn with_rotation(center: Point, scale: f64, rotation: Point) -> Result<Self, EstimatorError> {
        if !(scale > 0.0) || (rotation.norm() - 1.0).abs() > 1e-12 {
            return Err(EstimatorError::BadInput("frame needs scale > 0 and a unit rotation".into()));
        }
        Ok(Self { center, scale, rotation })
    }

    /// Frame at a boundary point `e^{iα}` of the unit circle, with `Re u`
    /// increasing outward.
    pub fn outward(alpha: f64, n: usize, delta: f64) -> Self {
        Self {
            center: Point::from_polar(1.0, alpha),
            scale: (n as f64 * delta).sqrt(),
            rotation: Point::from_polar(1.0, -alpha),
        }
    }

    /// The induced-ensemble map `T_n(z) = −i e^{iα}(n/s)(z − p_n)`.
    pub fn induced(n: usize, s: f64, alpha: f64) -> Result<Self, EstimatorError> {
        let p = crate::potential::induced_center(n, s, alpha).map_err(|e| EstimatorError::BadInput(e.to_string()))?;
        Ok(Self {
            center: p,
            scale: n as f64 / s,
            rotation: Point::new(0.0, -1.0) * Point::from_polar(1.0, alpha),
        })
    }

    pub fn to_micro(&self, z: Point) -> Point {
        self.rotation * (z - self.center) * self.scale
    }

    pub fn from_micro(&self, u: Point) -> Point {
        self.center + u / (self.rotation * self.scale)
    }

    /// `nΔ`: divides `R_n` to give the microscopic density.
    pub fn density_factor(&self) -> f64 {
        self.scale * self.scale
    }
}

/// A function on the regular grid `origin + (ix + i·iy)·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProfile {
    pub origin: Point,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl GridProfile {
    pub fn point(&self, ix: usize, iy: usize) -> Point {
        self.origin + Point::new(ix as f64, iy as f64) * self.step
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn from_fn<F: Fn(Point) -> f64>(origin: Point, step: f64, nx: usize, ny: usize, f: F) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(f(origin + Point::new(ix as f64, iy as f64) * step));
            }
        }
        Self {
            origin,
            step,
            nx,
            ny,
            stderr: vec![0.0; values.len()],
            values,
        }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "x,y,density,stderr")?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let p = self.point(ix, iy);
                let k = iy * self.nx + ix;
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p.re, p.im, self.values[k], self.stderr[k])?;
            }
        }
        Ok(())
    }
}

/// `ρ_n(u) = R_n(p + u/√(nΔ)) / (nΔ)` from the exact β = 1 kernel.
pub fn rescaled_exact(kernel: &RadialKernelData<f64>, frame: &RescaleFrame, u: Point) -> f64 {
    kernel.exact_r(frame.from_micro(u)) / frame.density_factor()
}

pub fn rescaled_exact_grid(kernel: &RadialKernelData<f64>, frame: &RescaleFrame, origin: Point, step: f64, nx: usize, ny: usize) -> GridProfile {
    GridProfile::from_fn(origin, step, nx, ny, |u| rescaled_exact(kernel, frame, u))
}

/// Microscopic profile read off a histogram: each grid point takes the value
/// of the bin containing its image.
pub fn rescaled_field(field: &DensityField, frame: &RescaleFrame, origin: Point, step: f64, nx: usize, ny: usize) -> Result<GridProfile, EstimatorError> {
    let bin = field.dx().max(field.dy()) * frame.scale;
    if bin > 0.25 {
        return Err(EstimatorError::TooCoarse { per_unit: 1.0 / bin });
    }
    let f = frame.density_factor();
    let mut out = GridProfile::from_fn(origin, step, nx, ny, |_| 0.0);
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            if let Some(b) = field.bin_of(frame.from_micro(out.point(ix, iy))) {
                out.values[k] = field.estimate(b) / f;
                out.stderr[k] = field.stderr(b) / f;
            }
        }
    }
    Ok(out)
}

/// Largest difference quotient `|ρ(z) − ρ(w)|/|z − w|` over grid pairs inside
/// `region` at separations in `[h, 2h]`.
pub fn lipschitz_modulus<F: Fn(Point) -> bool>(profile: &GridProfile, region: F, h: f64) -> Result<f64, EstimatorError> {
    if h < 2.0 * profile.step * (1.0 - 1e-12) {
        return Err(EstimatorError::BadInput("separation must be at least two grid steps".into()));
    }
    let kmax = (2.0 * h / profile.step).floor() as isize;
    let mut offsets = Vec::new();
    for dy in 0..=kmax {
        for dx in -kmax..=kmax {
            if dy == 0 && dx <= 0 {
                continue;
            }
            let d = ((dx * dx + dy * dy) as f64).sqrt() * profile.step;
            if d >= h * (1.0 - 1e-12) && d <= 2.0 * h * (1.0 + 1e-12) {
                offsets.push((dx, dy, d));
            }
        }
    }
    let inside: Vec<bool> = (0..profile.ny)
        .flat_map(|iy| (0..profile.nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| region(profile.point(ix, iy)))
        .collect();
    let mut best = 0.0f64;
    for iy in 0..profile.ny as isize {
        for ix in 0..profile.nx as isize {
            let k = (iy * profile.nx as isize + ix) as usize;
            if !inside[k] {
                continue;
            }
            for &(dx, dy, d) in &offsets {
                let (jx, jy) = (ix + dx, iy + dy);
                if jx < 0 || jy < 0 || jx >= profile.nx as isize || jy >= profile.ny as isize {
                    continue;
                }
                let j = (jy * profile.nx as isize + jx) as usize;
                if inside[j] {
                    best = best.max((profile.values[k] - profile.values[j]).abs() / d);
                }
            }
        }
    }
    Ok(best)
}

/// `N(p, r)`: points with `|z − p| ≤ r`.
pub fn count_disk(config: &[Point], p: Point, r: f64) -> usize {
    config.iter().filter(|z| (**z - p).norm() <= r).count()
}

/// Records `N(p, r)` for every retained configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscCounts {
    pub center: Point,
    pub radius: f64,
    pub counts: Vec<u32>,
}

impl DiscCounts {
    pub fn new(center: Point, radius: f64) -> Self {
        Self {
            center,
            radius,
            counts: Vec::new(),
        }
    }
}

impl SampleSink<f64> for DiscCounts {
    fn observe(&mut self, _chain: u64, _sweep: u64, config: &[Point]) {
        self.counts.push(count_disk(config, self.center, self.radius) as u32);
    }

    fn merge(&mut self, other: Self) {
        self.counts.extend(other.counts);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub m: usize,
    pub prob: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub samples: usize,
    pub points: Vec<TailPoint>,
    /// `(a, b, c)` of the weighted fit `−log P̂(N ≥ M) ≈ a M² − b M + c`.
    pub fit: Option<(f64, f64, f64)>,
}

/// Wilson-score standard error of a proportion `k/n` (one-sigma interval half-width).
pub fn wilson_stderr(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    (p * (1.0 - p) / n + 0.25 / (n * n)).sqrt() / (1.0 + 1.0 / n)
}

/// Empirical survival function `P̂(N ≥ M)` of disc counts, `M = 0 … n + 1`.
pub fn overcrowd_tail(counts: &[u32], n: usize) -> TailReport {
    let s = counts.len();
    let mut hist = vec![0usize; n + 2];
    for &c in counts {
        hist[(c as usize).min(n + 1)] += 1;
    }
    let mut points = Vec::with_capacity(n + 2);
    let mut above = s;
    for (m, h) in hist.iter().enumerate() {
        points.push(TailPoint {
            m,
            prob: if s == 0 { 0.0 } else { above as f64 / s as f64 },
            stderr: wilson_stderr(above, s),
        });
        above -= h;
    }
    let fit = fit_tail(&points, s);
    TailReport { samples: s, points, fit }
}

/// Weighted least squares on the well-populated part of the tail.
fn fit_tail(points: &[TailPoint], samples: usize) -> Option<(f64, f64, f64)> {
    let floor = 10.0 / samples.max(1) as f64;
    let used: Vec<&TailPoint> = points.iter().filter(|p| p.m >= 1 && p.prob >= floor && p.prob < 1.0).collect();
    if used.len() < 3 {
        return None;
    }
    // y = −log P ≈ a M² − b M + c, weights 1/var(log P)
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for p in used {
        let m = p.m as f64;
        let row = [m * m, -m, 1.0];
        let w = (p.prob / p.stderr.max(1e-300)).powi(2);
        let y = -p.prob.ln();
        for i in 0..3 {
            atb[i] += w * row[i] * y;
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let x = solve3(ata, atb)?;
    (x[0] > 0.0).then_some((x[0], x[1], x[2]))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Whether `log P̂(N ≥ M)` is strictly decreasing and concave over all `M`
/// with `P̂ ≥ 10/samples`.
pub fn tail_is_gaussian_shaped(report: &TailReport) -> bool {
    let floor = 10.0 / report.samples.max(1) as f64;
    let logs: Vec<f64> = report.points.iter().take_while(|p| p.prob >= floor).map(|p| p.prob.ln()).collect();
    let decreasing = logs.windows(2).all(|w| w[1] < w[0]);
    let concave = logs.windows(3).all(|w| w[2] - w[1] <= w[1] - w[0]);
    decreasing && concave
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub r: f64,
    pub density: f64,
    pub stderr: f64,
    /// `R / (nΔ · min{1, n e^{−nβ Q_eff}})`.
    pub ratio: f64,
    /// `e^β n² Δ e^{−nβ Q_eff}`.
    pub explicit_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub beta: f64,
    /// The fitted constant `C^β(1 + β^{−2})`: largest ratio on the grid.
    pub max_ratio: f64,
    pub argmax_r: f64,
    /// Every row satisfies `R − 3·stderr ≤ e^β n²Δ e^{−nβ Q_eff}`.
    pub explicit_bound_holds: bool,
    pub rows: Vec<BoundRow>,
}

/// Checks a radial density against the shape of the upper bound at the
/// given radii. `density(r)` returns the value and its standard error.
pub fn bound_report<F: Fn(f64) -> (f64, f64)>(spec: &PotentialSpec<f64>, n: usize, beta: f64, radii: &[f64], density: F) -> BoundReport {
    let nf = n as f64;
    let delta = spec.delta();
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let (d, se) = density(r);
        let q = spec.q_eff_radial(r);
        let shape = nf * delta * (nf * (-nf * beta * q).exp()).min(1.0);
        let explicit = beta.exp() * nf * nf * delta * (-nf * beta * q).exp();
        rows.push(BoundRow {
            r,
            density: d,
            stderr: se,
            ratio: if shape > 0.0 { d / shape } else { 0.0 },
            explicit_bound: explicit,
        });
    }
    let (argmax_r, max_ratio) = rows.iter().fold((f64::NAN, 0.0f64), |acc, row| if row.ratio > acc.1 { (row.r, row.ratio) } else { acc });
    let explicit_bound_holds = rows.iter().all(|row| row.density - 3.0 * row.stderr <= row.explicit_bound);
    BoundReport {
        n,
        beta,
        max_ratio,
        argmax_r,
        explicit_bound_holds,
        rows,
    }
}

/// Integral of `f` over a rectangle by a tensor Gauss–Legendre rule.
pub fn rect_integral<F: Fn(Point) -> f64>(r: &BBox, order: usize, f: F) -> f64 {
    let xs = crate::quadrature::composite_rule(r.x0, r.x1, 1, order);
    let ys = crate::quadrature::composite_rule(r.y0, r.y1, 1, order);
    let mut s = 0.0;
    for (x, wx) in &xs {
        for (y, wy) in &ys {
            s += wx * wy * f(Point::new(*x, *y));
        }
    }
    s / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::erfc_profile;
    use crate::oracle::radial_norms;
    use proptest::prelude::*;

    type C = Complex<f64>;

    #[test]
    fn empty_and_single_point_fields() {
        let f = DensityField::new(BBox::square(1.0), 4, 4);
        assert!(f.counts.iter().all(|&c| c == 0));
        assert_eq!(f.estimate(3), 0.0);
        let mut g = f.clone();
        let k = 5;
        g.accumulate(&[g.bin_center(k)]);
        assert_eq!(g.counts[k], 1);
        assert_eq!(g.counts.iter().sum::<u64>(), 1);
        g.accumulate(&[C::new(3.0, 0.0)]);
        assert_eq!(g.spill, 1);
    }

    proptest! {
        #[test]
        fn accumulation_is_associative(
            a in prop::collection::vec(prop::collection::vec((-1.2..1.2f64, -1.2..1.2f64), 3), 0..20),
            b in prop::collection::vec(prop::collection::vec((-1.2..1.2f64, -1.2..1.2f64), 3), 0..20),
        ) {
            let to = |v: &Vec<(f64, f64)>| v.iter().map(|&(x, y)| C::new(x, y)).collect::<Vec<_>>();
            let mut fa = DensityField::new(BBox::square(1.0), 5, 7);
            let mut fb = fa.clone();
            let mut fab = fa.clone();
            for c in &a { fa.accumulate(&to(c)); fab.accumulate(&to(c)); }
            for c in &b { fb.accumulate(&to(c)); fab.accumulate(&to(c)); }
            fa.merge(&fb).unwrap();
            prop_assert_eq!(fa, fab);
        }
    }

    #[test]
    fn mass_of_a_covering_field_is_n() {
        let mut f = DensityField::new(BBox::square(2.0), 8, 8);
        for k in 0..100 {
            let t = k as f64 * 0.1;
            f.accumulate(&[C::from_polar(0.5, t), C::from_polar(1.5, 2.0 * t)]);
        }
        let (m, _) = f.mass();
        assert!((m - 2.0).abs() < 1e-12);
    }

    #[test]
    fn blocked_stats_of_a_constant_and_an_alternating_sequence() {
        let mut b = BlockedStats::new(2, 2);
        for k in 0..10 {
            b.observe(&[1.0, if k % 2 == 0 { 1.0 } else { -1.0 }]);
        }
        assert_eq!(b.blocks(), 5);
        assert_eq!(b.mean(), vec![1.0, 0.0]);
        assert_eq!(b.stderr(), vec![0.0, 0.0]);
    }

    #[test]
    fn exact_bulk_profile_at_origin() {
        let k = radial_norms(&PotentialSpec::<f64>::ginibre(), 256).unwrap();
        let frame = RescaleFrame::new(C::new(0.0, 0.0), 256, 1.0);
        assert!((rescaled_exact(&k, &frame, C::new(0.0, 0.0)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_edge_profile_approaches_erfc() {
        let k = radial_norms(&PotentialSpec::<f64>::ginibre(), 256).unwrap();
        let frame = RescaleFrame::outward(0.0, 256, 1.0);
        assert!((rescaled_exact(&k, &frame, C::new(0.0, 0.0)) - 0.5).abs() < 0.01);
        let mut worst = 0.0f64;
        for i in 0..=600 {
            let u = C::new(-3.0 + 0.01 * i as f64, 0.0);
            worst = worst.max((rescaled_exact(&k, &frame, u) - erfc_profile(1.0, u)).abs());
        }
        assert!(worst <= 0.02, "{worst}");
        // rotating the frame does not matter for a radial potential
        let f2 = RescaleFrame::outward(1.3, 256, 1.0);
        let u = C::new(0.4, 0.7);
        assert!((rescaled_exact(&k, &frame, u) - rescaled_exact(&k, &f2, u)).abs() < 1e-12);
    }

    #[test]
    fn far_exterior_profile_vanishes() {
        let k = radial_norms(&PotentialSpec::<f64>::ginibre(), 256).unwrap();
        let frame = RescaleFrame::new(C::new(1.5, 0.0), 256, 1.0);
        for i in 0..=40 {
            let u = C::from_polar(2.0 * (i % 5) as f64 / 4.0, i as f64);
            assert!(rescaled_exact(&k, &frame, u) < 1e-12);
        }
    }

    #[test]
    fn induced_frame_matches_rescale_map() {
        let f = RescaleFrame::induced(100, 2.0, 0.4).unwrap();
        for z in [C::new(0.9, 0.2), C::new(-0.3, 0.95)] {
            let t = crate::potential::rescale_map(100, 2.0, 0.4, z).unwrap();
            assert!((f.to_micro(z) - t).norm() < 1e-12);
            assert!((f.from_micro(f.to_micro(z)) - z).norm() < 1e-12);
        }
        assert!((f.density_factor() - 100.0 * 25.0).abs() < 1e-9);
    }

    #[test]
    fn lipschitz_of_constant_and_linear_profiles() {
        let c = GridProfile::from_fn(C::new(-1.0, -1.0), 0.05, 41, 41, |_| 3.0);
        assert_eq!(lipschitz_modulus(&c, |_| true, 0.1).unwrap(), 0.0);
        let l = GridProfile::from_fn(C::new(-1.0, -1.0), 0.05, 41, 41, |u| u.re);
        let m = lipschitz_modulus(&l, |u| u.norm() < 0.8, 0.1).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
        assert!(lipschitz_modulus(&l, |_| true, 0.05).is_err());
    }

    #[test]
    fn counts_in_discs() {
        let cfg = [C::new(0.0, 0.0), C::new(0.5, 0.0), C::new(0.0, 1.0)];
        assert_eq!(count_disk(&cfg, C::new(5.0, 5.0), 0.1), 0);
        assert_eq!(count_disk(&cfg, C::new(0.0, 0.0), 2.0), 3);
        assert_eq!(count_disk(&cfg, C::new(0.0, 0.0), 0.5), 2);
    }

    #[test]
    fn tail_endpoints_and_shape() {
        let counts: Vec<u32> = (0..1000).map(|k| [0, 1, 1, 2, 1, 0, 3, 1, 2, 1][k % 10]).collect();
        let t = overcrowd_tail(&counts, 4);
        assert_eq!(t.points[0].prob, 1.0);
        assert_eq!(t.points[5].prob, 0.0);
        assert!((t.points[2].prob - 0.3).abs() < 1e-12);
        assert!(tail_is_gaussian_shaped(&t));
        // a Poisson-like tail fitted by the quadratic
        let mut c = Vec::new();
        for (m, k) in [(0u32, 3000usize), (1, 4000), (2, 2200), (3, 650), (4, 130), (5, 18), (6, 2)] {
            c.extend(std::iter::repeat(m).take(k));
        }
        let t = overcrowd_tail(&c, 64);
        assert!(t.fit.is_some_and(|(a, _, _)| a > 0.0));
        assert!(tail_is_gaussian_shaped(&t));
    }

    #[test]
    fn wilson_error_is_positive_at_the_extremes() {
        assert!(wilson_stderr(0, 100) > 0.0);
        assert!(wilson_stderr(100, 100) > 0.0);
        assert!((wilson_stderr(50, 10_000) - (0.005f64 * 0.995 / 1e4).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn polar_histogram_of_uniform_points_is_flat_and_invariant() {
        let mut h = PolarHistogram::new(vec![0.0, 0.5, 1.0], 4, 10);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4000 {
            let mut cfg = Vec::new();
            for _ in 0..8 {
                // uniform in area on the unit disc
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                cfg.push(C::from_polar(a.sqrt(), std::f64::consts::TAU * b));
            }
            h.accumulate(&cfg);
        }
        for (d, _) in h.radial_density() {
            assert!((d - 8.0).abs() < 0.2, "{d}");
        }
        let z = h.angular_invariance_z(&[0, 1]);
        assert!(z.abs() < 3.0, "{z}");
    }

    #[test]
    fn bound_report_on_exact_ginibre() {
        let s = PotentialSpec::<f64>::ginibre();
        let radii: Vec<f64> = (0..200).map(|i| 0.01 * i as f64).collect();
        let mut cs = Vec::new();
        for n in [16usize, 64] {
            let k = radial_norms(&s, n).unwrap();
            let rep = bound_report(&s, n, 1.0, &radii, |r| (k.exact_r_radial(r), 0.0));
            assert!(rep.explicit_bound_holds);
            cs.push(rep.max_ratio);
        }
        assert!((cs[0] / cs[1] - 1.0).abs() < 0.1);
        // exterior point r = 1.2 at n = 64, with margin
        let k = radial_norms(&s, 64).unwrap();
        let r = 1.2;
        let bound = std::f64::consts::E * 64.0 * 64.0 * (-64.0 * s.q_eff_radial(r)).exp();
        assert!(k.exact_r_radial(r) < 0.1 * bound);
    }

    #[test]
    fn rect_integral_of_constant_is_area() {
        let r = BBox { x0: 0.0, x1: 0.5, y0: 1.0, y1: 1.2 };
        assert!((rect_integral(&r, 4, |_| 1.0) - 0.1 / std::f64::consts::PI).abs() < 1e-15);
    }
}
