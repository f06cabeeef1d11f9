//! Thermal equilibrium density: the minimizer of
//! `F_n[δ] = I_Q[δ] + (1/nβ) ∫ δ log δ dA` over unit-mass radial densities on
//! the wall region, and its comparison with the β = 1 one-point function.
//!
//! Densities are continuous and piecewise linear in `r`. Masses and the
//! logarithmic potential are integrated exactly cell by cell; the remaining
//! integrals use four-point Gauss rules per cell.

use serde::Serialize;
use thiserror::Error;

use crate::oracle::{radial_norms, OracleError};
use crate::potential::PotentialSpec;
use crate::scalar::{log_add_exp, KahanSum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("no convergence after {iterations} iterations: residual {residual:.3e}, last decrease {last_decrease:.3e}, step {step:.3e}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last_decrease: f64,
        step: f64,
    },
    #[error("bad input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

const GAUSS: usize = 4;

fn gauss_unit() -> ([f64; GAUSS], [f64; GAUSS]) {
    let (x, w) = crate::quadrature::gauss_legendre(GAUSS);
    let mut t = [0.0; GAUSS];
    let mut v = [0.0; GAUSS];
    for i in 0..GAUSS {
        t[i] = 0.5 * (x[i] + 1.0);
        v[i] = 0.5 * w[i];
    }
    (t, v)
}

/// A radial density stored as `log δ` at the grid nodes, linear in `δ`
/// between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    pub radii: Vec<f64>,
    pub log_values: Vec<f64>,
}

/// Antiderivative of `(a ρ + b ρ²) log ρ`.
fn moment_log(a: f64, b: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let l = r.ln();
    a * r * r / 2.0 * (l - 0.5) + b * r * r * r / 3.0 * (l - 1.0 / 3.0)
}

/// Antiderivative of `a ρ + b ρ²`.
fn moment(a: f64, b: f64, r: f64) -> f64 {
    a * r * r / 2.0 + b * r * r * r / 3.0
}

impl RadialDensity {
    /// Uniform grid of `cells` cells on `[r0, r1]`.
    pub fn from_fn<F: Fn(f64) -> f64>(r0: f64, r1: f64, cells: usize, f: F) -> Self {
        let h = (r1 - r0) / cells as f64;
        let radii: Vec<f64> = (0..=cells).map(|i| if i == cells { r1 } else { r0 + h * i as f64 }).collect();
        let log_values = radii.iter().map(|&r| f(r).ln()).collect();
        let mut d = Self { radii, log_values };
        d.normalize();
        d
    }

    pub fn cells(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|v| v.exp()).collect()
    }

    fn line(&self, k: usize) -> (f64, f64) {
        let (x0, x1) = (self.radii[k], self.radii[k + 1]);
        let (d0, d1) = (self.log_values[k].exp(), self.log_values[k + 1].exp());
        let b = (d1 - d0) / (x1 - x0);
        (d0 - b * x0, b)
    }

    fn cell_of(&self, r: f64) -> Option<usize> {
        let n = self.radii.len();
        if r < self.radii[0] || r > self.radii[n - 1] {
            return None;
        }
        Some((self.radii.partition_point(|&x| x <= r).max(1) - 1).min(n - 2))
    }

    /// `log δ(r)`, with `−∞` outside the grid.
    pub fn log_value_at(&self, r: f64) -> f64 {
        match self.cell_of(r) {
            None => f64::NEG_INFINITY,
            Some(k) => {
                let t = (r - self.radii[k]) / (self.radii[k + 1] - self.radii[k]);
                log_interp(self.log_values[k], self.log_values[k + 1], t)
            }
        }
    }

    pub fn value_at(&self, r: f64) -> f64 {
        self.log_value_at(r).exp()
    }

    /// `∫ δ dA = 2∫ δ(r) r dr`, exact for the piecewise-linear density.
    pub fn mass(&self) -> f64 {
        (0..self.cells())
            .map(|k| {
                let (a, b) = self.line(k);
                2.0 * (moment(a, b, self.radii[k + 1]) - moment(a, b, self.radii[k]))
            })
            .sum()
    }

    /// Per-node weights `∫ φ_i dA` of the hat functions.
    fn hat_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.radii.len()];
        for k in 0..self.cells() {
            let (x0, x1) = (self.radii[k], self.radii[k + 1]);
            let h = x1 - x0;
            // ∫ (x1 − ρ)/h · 2ρ dρ and ∫ (ρ − x0)/h · 2ρ dρ
            m[k] += (x1 * (x1 * x1 - x0 * x0) - 2.0 * (x1.powi(3) - x0.powi(3)) / 3.0) / h;
            m[k + 1] += (2.0 * (x1.powi(3) - x0.powi(3)) / 3.0 - x0 * (x1 * x1 - x0 * x0)) / h;
        }
        m
    }

    pub fn normalize(&mut self) {
        let m = self.log_mass();
        self.log_values.iter_mut().for_each(|v| *v -= m);
    }

    /// `log ∫ δ dA` computed without underflow.
    fn log_mass(&self) -> f64 {
        let w = self.hat_masses();
        self.log_values
            .iter()
            .zip(&w)
            .filter(|(_, w)| **w > 0.0)
            .fold(f64::NEG_INFINITY, |acc, (v, w)| log_add_exp(acc, v + w.ln()))
    }

    /// `∫ |δ − other| dA` on a common grid.
    pub fn l1_distance(&self, other: &RadialDensity) -> f64 {
        assert_eq!(self.radii, other.radii);
        let (t, w) = gauss_unit();
        let mut s = 0.0;
        for k in 0..self.cells() {
            let (x0, x1) = (self.radii[k], self.radii[k + 1]);
            for g in 0..GAUSS {
                let r = x0 + t[g] * (x1 - x0);
                let a = log_interp(self.log_values[k], self.log_values[k + 1], t[g]).exp();
                let b = log_interp(other.log_values[k], other.log_values[k + 1], t[g]).exp();
                s += w[g] * (x1 - x0) * (a - b).abs() * 2.0 * r;
            }
        }
        s
    }

    /// `∫ |δ − f| dA` against a function, by Gauss rules on each cell.
    pub fn l1_distance_fn<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (t, w) = gauss_unit();
        let mut s = 0.0;
        for k in 0..self.cells() {
            let (x0, x1) = (self.radii[k], self.radii[k + 1]);
            for g in 0..GAUSS {
                let r = x0 + t[g] * (x1 - x0);
                let a = log_interp(self.log_values[k], self.log_values[k + 1], t[g]).exp();
                s += w[g] * (x1 - x0) * (a - f(r)).abs() * 2.0 * r;
            }
        }
        s
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "r,density")?;
        for (r, v) in self.radii.iter().zip(&self.log_values) {
            writeln!(w, "{:.16e},{:.16e}", r, v.exp())?;
        }
        Ok(())
    }
}

/// `log((1 − t)e^{v0} + t e^{v1})`.
fn log_interp(v0: f64, v1: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return v0;
    }
    if t >= 1.0 {
        return v1;
    }
    log_add_exp(v0 + (1.0 - t).ln(), v1 + t.ln())
}

/// Logarithmic potential `U(r) = ∫ log(1/|z − w|) δ(w) dA(w) = −2∫ δ(ρ) log max(r, ρ) ρ dρ`
/// of a radial density, from prefix sums of exact cell moments.
#[derive(Debug, Clone)]
pub struct LogPotential<'a> {
    density: &'a RadialDensity,
    lines: Vec<(f64, f64)>,
    /// `∫ δ ρ dρ` over cells `0..k`.
    mass_below: Vec<f64>,
    /// `∫ δ ρ log ρ dρ` over cells `k..`.
    log_above: Vec<f64>,
}

impl<'a> LogPotential<'a> {
    pub fn eval(&self, r: f64) -> f64 {
        let d = self.density;
        let n = d.radii.len();
        if r <= d.radii[0] {
            return -2.0 * self.log_above[0];
        }
        if r >= d.radii[n - 1] {
            return -2.0 * r.ln() * self.mass_below[n - 1];
        }
        let k = d.cell_of(r).unwrap();
        let (a, b) = self.lines[k];
        let below = self.mass_below[k] + moment(a, b, r) - moment(a, b, d.radii[k]);
        let above = self.log_above[k + 1] + moment_log(a, b, d.radii[k + 1]) - moment_log(a, b, r);
        -2.0 * (r.ln() * below + above)
    }
}

pub fn log_potential_radial(density: &RadialDensity) -> LogPotential<'_> {
    let c = density.cells();
    let lines: Vec<(f64, f64)> = (0..c).map(|k| density.line(k)).collect();
    let mut mass_below = vec![0.0; c + 1];
    for k in 0..c {
        let (a, b) = lines[k];
        mass_below[k + 1] = mass_below[k] + moment(a, b, density.radii[k + 1]) - moment(a, b, density.radii[k]);
    }
    let mut log_above = vec![0.0; c + 1];
    for k in (0..c).rev() {
        let (a, b) = lines[k];
        log_above[k] = log_above[k + 1] + moment_log(a, b, density.radii[k + 1]) - moment_log(a, b, density.radii[k]);
    }
    LogPotential {
        density,
        lines,
        mass_below,
        log_above,
    }
}

/// The pieces of `F_n` and its gradient with respect to the nodal values.
struct Evaluation {
    total: f64,
    energy: f64,
    /// `∂F/∂δ_i` divided by the hat mass, without the entropy part at the node.
    gradient: Vec<f64>,
}

fn evaluate(spec: &PotentialSpec<f64>, nb: f64, d: &RadialDensity, masses: &[f64], want_gradient: bool) -> Evaluation {
    let u = log_potential_radial(d);
    let (t, w) = gauss_unit();
    let mut total = KahanSum::new();
    let mut energy = KahanSum::new();
    let mut entropy = KahanSum::new();
    let mut g = vec![0.0; d.radii.len()];
    for k in 0..d.cells() {
        let (x0, x1) = (d.radii[k], d.radii[k + 1]);
        let h = x1 - x0;
        for q in 0..GAUSS {
            let r = x0 + t[q] * h;
            let ld = log_interp(d.log_values[k], d.log_values[k + 1], t[q]);
            let dv = ld.exp();
            let wr = w[q] * h * 2.0 * r;
            let (uu, qq) = (u.eval(r), spec.radial(r));
            let ent = if dv > 0.0 { dv * ld } else { 0.0 };
            energy.add(wr * dv * (uu + qq));
            entropy.add(wr * ent);
            total.add(wr * (dv * (uu + qq) + ent / nb));
            if want_gradient {
                let lg = if ld.is_finite() { ld } else { -745.0 };
                let gv = 2.0 * uu + qq + (lg + 1.0) / nb;
                g[k] += wr * (1.0 - t[q]) * gv;
                g[k + 1] += wr * t[q] * gv;
            }
        }
    }
    if want_gradient {
        for (i, gi) in g.iter_mut().enumerate() {
            if masses[i] > 0.0 {
                *gi /= masses[i];
            }
        }
    }
    Evaluation {
        total: total.value(),
        energy: energy.value(),
        gradient: g,
    }
}

/// `F_n[δ] = ∫ U δ dA + ∫ Q δ dA + (1/nβ) ∫ δ log δ dA`.
pub fn free_energy(spec: &PotentialSpec<f64>, n: usize, beta: f64, density: &RadialDensity) -> f64 {
    let nb = n as f64 * beta;
    evaluate(spec, nb, density, &[], false).total
}

/// `I_Q[δ]` alone.
pub fn weighted_energy(spec: &PotentialSpec<f64>, density: &RadialDensity) -> f64 {
    evaluate(spec, 1.0, density, &[], false).energy
}

/// Residual of `−δ + ∂∂̄Q + (1/nβ) ∂∂̄ log δ` at the interior nodes, with
/// `∂∂̄ = ¼(f'' + f'/r)` by central differences and `(f₁ − f₀)/h²` at `r = 0`.
pub fn del_residual(spec: &PotentialSpec<f64>, n: usize, beta: f64, d: &RadialDensity) -> Vec<(f64, f64)> {
    let nb = n as f64 * beta;
    let v = &d.log_values;
    let r = &d.radii;
    let mut out = Vec::with_capacity(r.len());
    for i in 0..r.len() - 1 {
        let lap = if r[i] == 0.0 {
            let h = r[1];
            (v[1] - v[0]) / (h * h)
        } else if i == 0 {
            continue;
        } else {
            let h = r[i + 1] - r[i];
            0.25 * ((v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h) + (v[i + 1] - v[i - 1]) / (2.0 * h * r[i]))
        };
        out.push((r[i], -v[i].exp() + spec.laplacian_radial(r[i]) + lap / nb));
    }
    out
}

/// Sup of the residual over the middle 90% of the droplet.
pub fn bulk_residual(spec: &PotentialSpec<f64>, n: usize, beta: f64, d: &RadialDensity) -> f64 {
    let drop = spec.radial_droplet();
    let w = drop.r_out - drop.r_in;
    let (lo, hi) = (drop.r_in + 0.05 * w, drop.r_out - 0.05 * w);
    del_residual(spec, n, beta, d)
        .into_iter()
        .filter(|(r, _)| *r >= lo && *r <= hi)
        .map(|(_, x)| x.abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThermalInit {
    /// Uniform on the wall region.
    Uniform,
    /// The equilibrium density `∂∂̄Q · 1_S`, floored outside `S`.
    Equilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalOptions {
    pub cells: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub init: ThermalInit,
    /// Convergence also needs the per-step decrease of `F_n` below this.
    /// With 0 the iteration runs until `F_n` stops decreasing in floating point.
    pub min_decrease: f64,
}

impl Default for ThermalOptions {
    fn default() -> Self {
        Self {
            cells: 4096,
            tol: 1e-5,
            max_iter: 200_000,
            init: ThermalInit::Uniform,
            min_decrease: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalSolveReport {
    pub iterations: usize,
    pub free_energy: f64,
    pub residual: f64,
    pub mass_defect: f64,
    /// `F_n` every 100 accepted iterations, and at the end.
    pub trace: Vec<f64>,
}

/// Initial density on the wall region for the given option.
pub fn initial_density(spec: &PotentialSpec<f64>, cells: usize, init: ThermalInit) -> RadialDensity {
    let (a, b) = (spec.sigma_inner(), spec.sigma_outer());
    let drop = spec.radial_droplet();
    match init {
        ThermalInit::Uniform => RadialDensity::from_fn(a, b, cells, |_| 1.0),
        ThermalInit::Equilibrium => RadialDensity::from_fn(a, b, cells, |r| if drop.contains_radius(r) { spec.laplacian_radial(r) } else { 1e-13 }),
    }
}

/// Minimizes `F_n` by mirror descent. Each step solves
/// `min η⟨∇E, δ⟩ + (η/nβ) ∫δ log δ + KL(δ | δ_old)` in closed form, i.e.
/// `log δ ← (log δ − η A)/(1 + η/nβ)` followed by renormalization, where `A`
/// is the gradient without the nodal entropy term. The step is halved until
/// `F_n` does not increase.
pub fn solve_thermal(spec: &PotentialSpec<f64>, n: usize, beta: f64, opts: &ThermalOptions) -> Result<(RadialDensity, ThermalSolveReport), ThermalError> {
    if n == 0 || !(beta > 0.0) || opts.cells < 8 {
        return Err(ThermalError::BadInput("need n ≥ 1, β > 0 and at least 8 cells".into()));
    }
    let nb = n as f64 * beta;
    let mut d = initial_density(spec, opts.cells, opts.init);
    let masses = d.hat_masses();
    let mut cur = evaluate(spec, nb, &d, &masses, true);
    let mut f = cur.total;
    let mut trace = vec![f];
    let mut eta = 1.0;
    let mut last_decrease = f64::INFINITY;
    let mut residual = bulk_residual(spec, n, beta, &d);
    for it in 1..=opts.max_iter {
        let mut accepted = false;
        while eta > 1e-12 {
            let mut next = d.clone();
            for i in 0..next.log_values.len() {
                let v = d.log_values[i];
                let a = cur.gradient[i] - (v.max(-745.0) + 1.0) / nb;
                next.log_values[i] = (v - eta * a) / (1.0 + eta / nb);
            }
            next.normalize();
            let e = evaluate(spec, nb, &next, &masses, true);
            let fn_next = e.total;
            if fn_next <= f {
                last_decrease = f - fn_next;
                d = next;
                cur = e;
                f = fn_next;
                accepted = true;
                eta = (eta * 1.5).min(1e6);
                break;
            }
            eta *= 0.5;
        }
        if it % 100 == 0 {
            trace.push(f);
        }
        if it % 10 == 0 || !accepted {
            residual = bulk_residual(spec, n, beta, &d);
        }
        if residual < opts.tol && (last_decrease < opts.min_decrease || !accepted) {
            trace.push(f);
            let mass_defect = (d.mass() - 1.0).abs();
            return Ok((
                d,
                ThermalSolveReport {
                    iterations: it,
                    free_energy: f,
                    residual,
                    mass_defect,
                    trace,
                },
            ));
        }
        if !accepted {
            return Err(ThermalError::NoConvergence {
                iterations: it,
                residual,
                last_decrease,
                step: eta,
            });
        }
    }
    Err(ThermalError::NoConvergence {
        iterations: opts.max_iter,
        residual,
        last_decrease,
        step: eta,
    })
}

/// `∂∂̄ log f` at radius `r` of a radial function, from the five-point
/// radial stencil with step `h`.
fn radial_log_laplacian<F: Fn(f64) -> f64>(f: F, r: f64, h: f64) -> f64 {
    let (a, b, c) = (f(r - h).ln(), f(r).ln(), f(r + h).ln());
    0.25 * ((a - 2.0 * b + c) / (h * h) + (c - a) / (2.0 * h * r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub n: usize,
    /// `ρ_n(0)` and `ρ̃_n(0)` at the edge point `p = 1`.
    pub rho_edge: f64,
    pub rho_tilde_edge: f64,
    /// `∂∂̄ log` of the rescaled oracle and thermal profiles at `u = 0`.
    pub oracle_log_laplacian: f64,
    pub thermal_log_laplacian: f64,
    /// `∂∂̄ log ρ̃(0) − (ρ̃(0) − 1)`.
    pub thermal_consistency: f64,
    /// `n⁻¹ sup |R_n − n δ_n|` over `|r − 1| ≤ 4/√n`.
    pub gap: f64,
    pub solve: ThermalSolveReport,
}

/// Ginibre at β = 1: exact one-point function against `n δ_n` near `p = 1`.
pub fn boundary_discrepancy(n: usize, opts: &ThermalOptions) -> Result<(BoundaryReport, RadialDensity), ThermalError> {
    let spec = PotentialSpec::<f64>::ginibre();
    let (d, solve) = solve_thermal(&spec, n, 1.0, opts)?;
    let k = radial_norms(&spec, n)?;
    let nf = n as f64;
    let h_macro = d.radii[1] - d.radii[0];
    // five-point stencil in microscopic units: ∂∂̄_u = ∂∂̄_z / n
    let oracle = radial_log_laplacian(|r| k.exact_r_radial(r), 1.0, 0.02 / nf.sqrt()) / nf;
    let i1 = d.radii.iter().position(|&r| (r - 1.0).abs() < 1e-9 * h_macro.max(1.0)).ok_or_else(|| ThermalError::BadInput("grid must have a node at r = 1".into()))?;
    let v = &d.log_values;
    let thermal = 0.25 * ((v[i1 + 1] - 2.0 * v[i1] + v[i1 - 1]) / (h_macro * h_macro) + (v[i1 + 1] - v[i1 - 1]) / (2.0 * h_macro)) / nf;
    let rho_tilde = v[i1].exp();
    let window = 4.0 / nf.sqrt();
    let mut gap = 0.0f64;
    for (r, lv) in d.radii.iter().zip(v) {
        if (r - 1.0).abs() <= window {
            gap = gap.max((k.exact_r_radial(*r) / nf - lv.exp()).abs());
        }
    }
    Ok((
        BoundaryReport {
            n,
            rho_edge: k.exact_r_radial(1.0) / nf,
            rho_tilde_edge: rho_tilde,
            oracle_log_laplacian: oracle,
            thermal_log_laplacian: thermal,
            thermal_consistency: thermal - (rho_tilde - 1.0),
            gap,
            solve,
        },
        d,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BulkReport {
    pub n: usize,
    pub radius: f64,
    /// `∂∂̄ log ∂∂̄Q(p)`.
    pub curvature: f64,
    /// `R_n(p) − n ∂∂̄Q(p)`, expected near `½ ∂∂̄ log ∂∂̄Q(p)`.
    pub oracle_excess: f64,
    /// `n δ_n(p) − n ∂∂̄Q(p)`, expected near `(1/β) ∂∂̄ log ∂∂̄Q(p)`.
    pub thermal_excess: f64,
    /// `|R_n(p) − n δ_n(p)|`.
    pub gap: f64,
}

/// β = 1 comparison at a bulk point of radius `radius`.
pub fn bulk_discrepancy(spec: &PotentialSpec<f64>, n: usize, radius: f64, opts: &ThermalOptions) -> Result<BulkReport, ThermalError> {
    if !spec.radial_droplet().contains_radius(radius) {
        return Err(ThermalError::BadInput(format!("radius {radius} is not in the droplet")));
    }
    let (d, _) = solve_thermal(spec, n, 1.0, opts)?;
    let k = radial_norms(spec, n)?;
    let nf = n as f64;
    let lap = spec.laplacian_radial(radius);
    let r_n = k.exact_r_radial(radius);
    let nd = nf * d.value_at(radius);
    Ok(BulkReport {
        n,
        radius,
        curvature: spec.log_laplacian_curvature(radius),
        oracle_excess: r_n - nf * lap,
        thermal_excess: nd - nf * lap,
        gap: (r_n - nd).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ginibre() -> PotentialSpec<f64> {
        PotentialSpec::ginibre()
    }

    #[test]
    fn potential_of_a_uniform_annulus() {
        let (a, b) = (0.5, 1.0);
        let d = RadialDensity::from_fn(a, b, 64, |_| 1.0);
        assert!((d.mass() - 1.0).abs() < 1e-14);
        let u = log_potential_radial(&d);
        // flat inside the hole
        let inner = u.eval(0.1);
        for r in [0.0, 0.2, 0.45, 0.5] {
            assert!((u.eval(r) - inner).abs() < 1e-13);
        }
        // −2∫_a^b log ρ · ρ dρ / (b² − a²)
        let c = -2.0 * (moment_log(1.0, 0.0, b) - moment_log(1.0, 0.0, a)) / (b * b - a * a);
        assert!((inner - c).abs() < 1e-13);
        // monopole outside
        for r in [1.0, 1.5, 30.0] {
            assert!((u.eval(r) + r.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn potential_of_the_unit_disc_against_planar_quadrature() {
        let d = RadialDensity::from_fn(0.0, 1.0, 16, |_| 1.0);
        let u = log_potential_radial(&d);
        assert!((u.eval(1.0)).abs() < 1e-14);
        assert!((u.eval(0.0) - 0.5).abs() < 1e-14);
        // ∫_D log(1/|z − w|) dA(w) over the unit disc by polar quadrature about 0
        for z in [0.0, 0.3, 0.7, 1.0, 1.4] {
            use crate::quadrature::{integrate, Tolerance};
            let rho_breaks: Vec<f64> = if z > 0.0 && z < 1.0 { vec![0.0, z, 1.0] } else { vec![0.0, 1.0] };
            let s = integrate(
                |rho: f64| {
                    let inner = integrate(
                        |t: f64| {
                            let dist2 = z * z + rho * rho - 2.0 * z * rho * t.cos();
                            if dist2 > 0.0 { -0.5 * dist2.ln() } else { 0.0 }
                        },
                        &[0.0, std::f64::consts::PI],
                        Tolerance::default(),
                    )
                    .unwrap();
                    rho * inner.value
                },
                &rho_breaks,
                Tolerance::default(),
            )
            .unwrap()
            .value;
            // the angular integral covers half the circle
            let quad = 2.0 * s / std::f64::consts::PI;
            assert!((u.eval(z) - quad).abs() < 1e-8, "z = {z}: {} vs {quad}", u.eval(z));
            let closed = if z <= 1.0 { 0.5 - z * z / 2.0 } else { -f64::ln(z) };
            assert!((u.eval(z) - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn free_energy_approaches_the_weighted_energy() {
        let s = ginibre();
        let d = RadialDensity::from_fn(0.0, 2.0, 256, |r| (-4.0 * r * r).exp());
        let i = weighted_energy(&s, &d);
        let f6 = free_energy(&s, 1_000_000, 1.0, &d);
        let f2 = free_energy(&s, 100, 1.0, &d);
        assert!((f6 - i).abs() < 1e-5);
        assert!((f2 - i).abs() > (f6 - i).abs());
    }

    #[test]
    fn free_energy_is_convex_along_segments() {
        let s = ginibre();
        let a = RadialDensity::from_fn(0.0, 2.0, 128, |r| 1.0 + r);
        let b = RadialDensity::from_fn(0.0, 2.0, 128, |r| (-3.0 * (r - 0.7) * (r - 0.7)).exp());
        let fs: Vec<f64> = (0..=10)
            .map(|k| {
                let t = k as f64 / 10.0;
                let mut m = a.clone();
                for i in 0..m.log_values.len() {
                    m.log_values[i] = ((1.0 - t) * a.log_values[i].exp() + t * b.log_values[i].exp()).ln();
                }
                free_energy(&s, 16, 1.0, &m)
            })
            .collect();
        for w in fs.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12, "{fs:?}");
        }
    }

    #[test]
    fn ginibre_thermal_solution_at_n64() {
        let s = ginibre();
        let opts = ThermalOptions::default();
        let (d, rep) = solve_thermal(&s, 64, 1.0, &opts).unwrap();
        assert!(rep.residual < 1e-5, "{rep:?}");
        assert!(rep.mass_defect < 1e-10);
        assert!(rep.trace.windows(2).all(|w| w[1] <= w[0]));
        // bulk value 1 up to O(1/n), tiny but positive outside
        assert!((d.value_at(0.5) - 1.0).abs() < 2.0 / 64.0);
        assert!(d.value_at(1.5) > 0.0 && d.value_at(1.5) < 1e-6);
        // the minimizer beats the equilibrium density
        let eq = initial_density(&s, opts.cells, ThermalInit::Equilibrium);
        assert!(free_energy(&s, 64, 1.0, &eq) >= rep.free_energy);
        // and a second start reaches the same density
        let (d2, _) = solve_thermal(
            &s,
            64,
            1.0,
            &ThermalOptions {
                init: ThermalInit::Equilibrium,
                ..opts
            },
        )
        .unwrap();
        assert!(d.l1_distance(&d2) < 1e-6, "{}", d.l1_distance(&d2));
    }

    #[test]
    fn free_energy_is_stable_under_refinement() {
        let s = ginibre();
        let (_, a) = solve_thermal(&s, 64, 1.0, &ThermalOptions { cells: 2048, tol: 2e-5, ..Default::default() }).unwrap();
        let (_, b) = solve_thermal(&s, 64, 1.0, &ThermalOptions { cells: 4096, ..Default::default() }).unwrap();
        assert!((a.free_energy - b.free_energy).abs() < 1e-6, "{} {}", a.free_energy, b.free_energy);
    }

    #[test]
    fn low_temperature_limit_is_the_equilibrium_measure() {
        let s = ginibre();
        let (d, _) = solve_thermal(
            &s,
            1_000_000,
            1.0,
            &ThermalOptions {
                cells: 512,
                tol: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        let l1 = d.l1_distance_fn(|r| if r <= 1.0 { 1.0 } else { 0.0 });
        assert!(l1 < 1e-2, "{l1}");
    }

    #[test]
    fn quartic_curvature_value() {
        let s = PotentialSpec::<f64>::quartic(1.0, 1.0, 1.5).unwrap();
        let c = s.log_laplacian_curvature(0.4);
        assert!((c - 4.0 / (1.64f64 * 1.64)).abs() < 1e-12);
        let fd = radial_log_laplacian(|r| s.laplacian_radial(r), 0.4, 1e-4);
        assert!((fd - c).abs() < 1e-6);
        assert!((c - 1.487).abs() < 1e-3);
    }

    #[test]
    fn quartic_bulk_excess_at_n128() {
        let s = PotentialSpec::<f64>::quartic(1.0, 1.0, 1.5).unwrap();
        let rep = bulk_discrepancy(&s, 128, 0.4, &ThermalOptions { tol: 1e-4, ..Default::default() }).unwrap();
        assert!((rep.oracle_excess - rep.curvature / 2.0).abs() < 0.02, "{rep:?}");
        assert!((rep.thermal_excess - rep.curvature).abs() < 0.05, "{rep:?}");
    }

    #[test]
    fn edge_comparison_at_n64() {
        let (rep, _) = boundary_discrepancy(64, &ThermalOptions::default()).unwrap();
        assert!(rep.thermal_consistency.abs() < 0.02, "{rep:?}");
        assert!(rep.gap > 0.05, "{rep:?}");
    }
}
