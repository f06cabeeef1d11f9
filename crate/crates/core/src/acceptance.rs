//! The acceptance suite: thirteen numbered criteria, each a list of named
//! checks with measured values and limits.

use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::diagnostics::{
    boundary_kernel, bulk_kernel, erfc_profile, f_s_profile, ginibre_edge_kernel, kernel_mass, laplacian_log, ward_equation_residual, LagrangeSink, ResidualGrid, TestFunction,
    WardSink,
};
use crate::estimator::{
    bound_report, overcrowd_tail, rect_integral, rescaled_exact, rescaled_exact_grid, tail_is_gaussian_shaped, lipschitz_modulus, BBox, BlockedStats, DensityField, DiscCounts, PolarHistogram,
    RescaleFrame,
};
use crate::oracle::{quadrature_n2, radial_norms, PairObservable, PairRule, RadialKernelData};
use crate::potential::{induced_center, PotentialParams, PotentialSpec};
use crate::quadrature::{integrate, Tolerance};
use crate::sampler::{run_chains, RunParams};
use crate::thermal::{boundary_discrepancy, bulk_discrepancy, initial_density, solve_thermal, ThermalInit, ThermalOptions};
use crate::Point;

#[derive(Debug, Error)]
#[error("{module}: {message}")]
pub struct AcceptanceError {
    pub module: &'static str,
    pub message: String,
}

macro_rules! from_module {
    ($t:ty, $m:expr) => {
        impl From<$t> for AcceptanceError {
            fn from(e: $t) -> Self {
                Self {
                    module: $m,
                    message: e.to_string(),
                }
            }
        }
    };
}
from_module!(crate::potential::PotentialError, "potential");
from_module!(crate::oracle::OracleError, "oracle");
from_module!(crate::sampler::SamplerError, "sampler");
from_module!(crate::estimator::EstimatorError, "estimator");
from_module!(crate::diagnostics::DiagnosticsError, "diagnostics");
from_module!(crate::thermal::ThermalError, "thermal");
from_module!(crate::quadrature::QuadratureError, "quadrature");

pub const TITLES: [&str; 13] = [
    "oracle mass",
    "sampler against oracle",
    "two-particle brute force",
    "Ward identity mean zero",
    "Lagrange identity",
    "edge profile",
    "reference kernel mass",
    "upper-bound shape",
    "equicontinuity proxy",
    "overcrowding tail",
    "induced ensemble band",
    "thermal solver",
    "Ward equation residual",
];

/// Checks that cannot pass as stated, with the reason. The acceptance test
/// expects exactly these to fail.
pub const KNOWN_FAILURES: [(usize, &str, &str); 3] = [
    (
        6,
        "log_laplacian_at_0",
        "at n = 256 the exact value is -0.6579; the distance to -2/pi decays like n^(-1/2) and is 0.0213 here",
    ),
    (
        7,
        "boundary_mass_edge_anchor",
        "the boundary kernel with a real erfc integrates to 1/beta only deep inside; at Re u = 0 it gives 1/(2 beta)",
    ),
    (
        13,
        "boundary_residual",
        "the boundary kernel with a real erfc leaves a residual of about 0.14 near Re u = 0; the true beta = 1 edge kernel, with the complex erfc of u + conj(v), has residual below 0.005",
    ),
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
    pub details: Value,
}

impl CriterionReport {
    /// Failing checks that are not listed in [`KNOWN_FAILURES`].
    pub fn unexpected_failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| !c.passed && !KNOWN_FAILURES.iter().any(|(id, name, _)| *id == self.id && *name == c.name))
            .collect()
    }

    pub fn summary_line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let mut s = format!(
            "criterion {:>2} {:<26} {} ({:.1} s)",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds
        );
        if !failed.is_empty() {
            s.push_str(&format!(" failed: {}", failed.join(", ")));
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AcceptanceOptions {
    pub seed: u64,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self { seed: 20_240_611 }
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn new() -> Self {
        Self(Vec::new())
    }

    /// `value ≤ limit`.
    fn le(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(Check {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
        });
    }

    fn truth(&mut self, name: impl Into<String>, ok: bool) {
        self.0.push(Check {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            limit: 1.0,
        });
    }
}

pub fn run_criterion(id: usize, opts: &AcceptanceOptions) -> Result<CriterionReport, AcceptanceError> {
    let t = Instant::now();
    let mut c = Checks::new();
    let details = match id {
        1 => oracle_mass(&mut c, t)?,
        2 => sampler_vs_oracle(&mut c, opts, t)?,
        3 => two_particles(&mut c, opts)?,
        4 => ward_mean_zero(&mut c, opts)?,
        5 => lagrange(&mut c, opts)?,
        6 => edge_profile(&mut c)?,
        7 => kernel_masses(&mut c),
        8 => upper_bound(&mut c)?,
        9 => equicontinuity(&mut c, opts)?,
        10 => overcrowding(&mut c, opts, t)?,
        11 => induced_band(&mut c, opts)?,
        12 => thermal(&mut c)?,
        13 => ward_equation(&mut c),
        _ => {
            return Err(AcceptanceError {
                module: "acceptance",
                message: format!("no criterion {id}"),
            })
        }
    };
    let checks = c.0;
    Ok(CriterionReport {
        id,
        title: TITLES[id - 1],
        passed: checks.iter().all(|c| c.passed),
        seconds: t.elapsed().as_secs_f64(),
        checks,
        details,
    })
}

pub fn run_all(opts: &AcceptanceOptions) -> Result<Vec<CriterionReport>, AcceptanceError> {
    (1..=13).map(|k| run_criterion(k, opts)).collect()
}

fn params(n: usize, beta: f64, chains: usize, retained: usize, thin: usize, burnin: usize, seed: u64) -> RunParams<f64> {
    RunParams {
        n,
        beta,
        chains,
        sweeps: burnin + retained * thin,
        burnin,
        thin,
        seed,
        step_scale: 1.0,
    }
}

fn exact_mass(k: &RadialKernelData<f64>) -> Result<f64, AcceptanceError> {
    let s = k.spec();
    let drop = s.radial_droplet();
    let mut breaks = vec![s.sigma_inner(), drop.r_in, drop.r_out, s.sigma_outer()];
    breaks.retain(|&x| x >= s.sigma_inner() && x <= s.sigma_outer());
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-13,
        max_intervals: 4000,
    };
    Ok(integrate(|r: f64| 2.0 * r * k.exact_r_radial(r), &breaks, tol)?.value)
}

fn oracle_mass(c: &mut Checks, t: Instant) -> Result<Value, AcceptanceError> {
    let mut rows = Vec::new();
    for n in [1usize, 8, 64, 256] {
        let specs = [("ginibre", Some(PotentialSpec::ginibre())), ("induced", PotentialSpec::induced(n, 2.0).ok())];
        for (name, spec) in specs {
            // induced(n, 2) needs s² < n, so n = 1 has no such spec
            let Some(spec) = spec else { continue };
            let m = exact_mass(&radial_norms(&spec, n)?)?;
            c.le(format!("{name}_n{n}"), (m - n as f64).abs(), 1e-8);
            rows.push(json!({"spec": name, "n": n, "mass": m}));
        }
    }
    c.le("runtime_seconds", t.elapsed().as_secs_f64(), 10.0);
    Ok(json!({ "masses": rows }))
}

fn sampler_vs_oracle(c: &mut Checks, opts: &AcceptanceOptions, t: Instant) -> Result<Value, AcceptanceError> {
    let spec = PotentialSpec::ginibre();
    let n = 32;
    let p = params(n, 1.0, 4, 25_000, 10, 2000, opts.seed ^ 2);
    let bins = 16;
    let (field, _) = run_chains(&spec, &p, |_| DensityField::new(BBox::square(1.0), bins, bins))?;
    let k = radial_norms(&spec, n)?;
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut used = 0;
    for b in 0..bins * bins {
        let r = field.bin_rect(b);
        let far = [(r.x0, r.y0), (r.x1, r.y0), (r.x0, r.y1), (r.x1, r.y1)].iter().map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max);
        if far > 0.7 {
            continue;
        }
        used += 1;
        let exact = rect_integral(&r, 8, |z| k.exact_r(z)) / field.bin_area();
        let allowed = (3.0 * field.stderr(b)).max(0.05 * exact);
        let dev = (field.estimate(b) - exact).abs();
        worst = worst.max(dev / allowed);
        if dev > allowed {
            failures += 1;
        }
    }
    c.le("bulk_bins_outside_band", failures as f64, 0.0);
    c.le("runtime_seconds", t.elapsed().as_secs_f64(), 300.0);
    Ok(json!({"configurations": field.samples, "bulk_bins": used, "worst_ratio": worst}))
}

fn two_particles(c: &mut Checks, opts: &AcceptanceOptions) -> Result<Value, AcceptanceError> {
    let spec = PotentialSpec::ginibre();
    let mut rows = Vec::new();
    let f = TestFunction::new(Point::new(0.3, -0.2), 0.5)?;
    for (i, beta) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let obs = PairObservable::DiscCount {
            center: Point::new(0.0, 0.0),
            radius: 0.5,
        };
        let q = quadrature_n2(&spec, beta, &obs, &PairRule::default())?;
        let p = params(2, beta, 4, 50_000, 1, 1000, opts.seed ^ (30 + i as u64));
        let (counts, _) = run_chains(&spec, &p, |_| DiscCounts::new(Point::new(0.0, 0.0), 0.5))?;
        let mut stats = BlockedStats::new(1, 500);
        for &x in &counts.counts {
            stats.observe(&[x as f64]);
        }
        let (m, se) = (stats.mean()[0], stats.stderr()[0]);
        let z = (m - q.value.re) / (se * se + q.error * q.error).sqrt();
        c.le(format!("disc_count_z_beta{beta}"), z.abs(), 3.0);
        let w = quadrature_n2(&spec, beta, &PairObservable::Ward(&f), &PairRule::default())?;
        c.le(format!("ward_expectation_beta{beta}"), w.value.norm(), 1e-4);
        rows.push(json!({"beta": beta, "quadrature": q.value.re, "mc_mean": m, "mc_stderr": se, "z": z, "ward_expectation": [w.value.re, w.value.im]}));
    }
    Ok(json!({ "rows": rows }))
}

fn bumps() -> Result<Vec<TestFunction<f64>>, AcceptanceError> {
    Ok(vec![
        TestFunction::new(Point::new(0.0, 0.0), 0.5)?,
        TestFunction::new(Point::new(0.75, 0.0), 0.4)?,
        TestFunction::new(Point::new(-0.3, 0.4), 0.3)?,
    ])
}

fn ward_mean_zero(c: &mut Checks, opts: &AcceptanceOptions) -> Result<Value, AcceptanceError> {
    let spec = PotentialSpec::ginibre();
    let fs = bumps()?;
    let mut rows = Vec::new();
    for (i, (n, beta)) in [16usize, 32].into_iter().flat_map(|n| [0.5, 1.0, 2.0].map(|b| (n, b))).enumerate() {
        let p = params(n, beta, 4, 4000, 1, 500, opts.seed ^ (40 + i as u64));
        let (sink, _) = run_chains(&spec, &p, |_| WardSink::new(&spec, beta, &fs, 50).expect("bumps fit inside the wall"))?;
        for (j, r) in sink.results().into_iter().enumerate() {
            c.le(format!("n{n}_beta{beta}_bump{j}"), r.max_abs_z(), 3.0);
            rows.push(json!({"n": n, "beta": beta, "result": r}));
        }
    }
    Ok(json!({ "rows": rows }))
}

fn lagrange(c: &mut Checks, opts: &AcceptanceOptions) -> Result<Value, AcceptanceError> {
    let n = 8;
    let points = [Point::new(0.3, 0.0), Point::new(-0.2, 0.6), Point::new(1.3, 0.0)];
    let run = |spec: &PotentialSpec<f64>| -> Result<_, AcceptanceError> {
        let p = params(n, 1.0, 8, 20_000, 1, 500, opts.seed ^ 5);
        let (sink, _) = run_chains(spec, &p, |_| LagrangeSink::new(spec, 1.0, &points, 500))?;
        let k = radial_norms(spec, n)?;
        Ok(sink.report(n, |z| (k.exact_r(z), 0.0)))
    };
    // With the wall at radius 2 the estimator is dominated by rare particles
    // near the wall and batch means do not see its tail; radius 1.5 keeps
    // the weights bounded enough for a 3σ test.
    let mut p = PotentialParams::ginibre();
    p.sigma_outer = 1.5;
    p.eta0 = 0.2;
    let near = PotentialSpec::new(p)?;
    let tested = run(&near)?;
    for (i, r) in tested.iter().enumerate() {
        c.le(format!("point{i}"), r.z_score.abs(), 3.0);
    }
    let default_wall = run(&PotentialSpec::ginibre())?;
    Ok(json!({"wall_1_5": tested, "wall_2_reported_only": default_wall}))
}

fn edge_profile(c: &mut Checks) -> Result<Value, AcceptanceError> {
    let n = 256;
    let k = radial_norms(&PotentialSpec::ginibre(), n)?;
    let frame = RescaleFrame::outward(0.0, n, 1.0);
    let mut worst = 0.0f64;
    for i in 0..=600 {
        let u = Point::new(-3.0 + 0.01 * i as f64, 0.0);
        worst = worst.max((rescaled_exact(&k, &frame, u) - erfc_profile(1.0, u)).abs());
    }
    c.le("sup_erfc_deviation", worst, 0.02);
    let lap = laplacian_log(|u| rescaled_exact(&k, &frame, u), Point::new(0.0, 0.0), 0.02);
    c.le("log_laplacian_at_0", (lap + 2.0 / PI).abs(), 0.02);
    Ok(json!({"sup_deviation": worst, "log_laplacian": lap, "target": -2.0 / PI}))
}

fn kernel_masses(c: &mut Checks) -> Value {
    let mut rows = Vec::new();
    for beta in [0.5, 1.0, 2.0] {
        let bulk = kernel_mass(|a, b| bulk_kernel(beta, a, b), Point::new(0.3, -0.7), 9.0, 12);
        c.le(format!("bulk_mass_beta{beta}"), (bulk - 1.0 / beta).abs(), 1e-6);
        let deep = kernel_mass(|a, b| boundary_kernel(beta, a, b), Point::new(-8.0, 0.0), 9.0, 12);
        c.le(format!("boundary_mass_deep_beta{beta}"), (deep - 1.0 / beta).abs(), 1e-6);
        let edge = kernel_mass(|a, b| boundary_kernel(beta, a, b), Point::new(0.0, 0.0), 9.0, 12);
        c.0.push(Check {
            name: "boundary_mass_edge_anchor".into(),
            passed: (edge - 1.0 / beta).abs() <= 1e-6,
            value: (edge - 1.0 / beta).abs(),
            limit: 1e-6,
        });
        if beta != 1.0 {
            c.truth(format!("integral_one_violated_beta{beta}"), (bulk - 1.0).abs() > 0.1 && (deep - 1.0).abs() > 0.1);
        }
        rows.push(json!({"beta": beta, "bulk": bulk, "boundary_deep": deep, "boundary_edge": edge}));
    }
    // the check name repeats per β; keep a single entry with the worst value
    let mut worst: Option<Check> = None;
    c.0.retain(|ch| {
        if ch.name == "boundary_mass_edge_anchor" {
            if worst.as_ref().is_none_or(|w| ch.value > w.value) {
                worst = Some(ch.clone());
            }
            false
        } else {
            true
        }
    });
    c.0.extend(worst);
    json!({ "masses": rows })
}

fn upper_bound(c: &mut Checks) -> Result<Value, AcceptanceError> {
    let spec = PotentialSpec::ginibre();
    let radii: Vec<f64> = (0..200).map(|i| 0.01 * i as f64).collect();
    let mut fitted = Vec::new();
    for n in [16usize, 64, 256] {
        let k = radial_norms(&spec, n)?;
        let rep = bound_report(&spec, n, 1.0, &radii, |r| (k.exact_r_radial(r), 0.0));
        c.truth(format!("explicit_bound_n{n}"), rep.explicit_bound_holds);
        fitted.push((n, rep.max_ratio));
    }
    let hi = fitted.iter().map(|x| x.1).fold(f64::MIN, f64::max);
    let lo = fitted.iter().map(|x| x.1).fold(f64::MAX, f64::min);
    c.le("fitted_constant_drift", hi / lo - 1.0, 0.1);
    Ok(json!({ "fitted": fitted }))
}

/// Largest difference quotient of a sampled 1D profile at separations in
/// `[h, 2h]`, with the standard error of the maximizing quotient.
fn modulus_1d(values: &[(f64, f64)], step: f64, h: f64) -> (f64, f64) {
    let kmin = (h / step).round() as usize;
    let mut best = (0.0, 0.0);
    for i in 0..values.len() {
        for k in kmin..=2 * kmin {
            let Some(&(b, sb)) = values.get(i + k) else { break };
            let (a, sa) = values[i];
            let q = (a - b).abs() / (k as f64 * step);
            if q > best.0 {
                best = (q, (sa * sa + sb * sb).sqrt() / (k as f64 * step));
            }
        }
    }
    best
}

fn equicontinuity(c: &mut Checks, opts: &AcceptanceOptions) -> Result<Value, AcceptanceError> {
    let spec = PotentialSpec::ginibre();
    let (step, m, h) = (0.05, 121, 0.5);
    let origin = Point::new(-3.0, -3.0);
    let mut exact = Vec::new();
    for n in [64usize, 128, 256] {
        let k = radial_norms(&spec, n)?;
        let edge = rescaled_exact_grid(&k, &RescaleFrame::outward(0.0, n, 1.0), origin, step, m, m);
        let bulk = rescaled_exact_grid(&k, &RescaleFrame::new(Point::new(0.0, 0.0), n, 1.0), origin, step, m, m);
        let me = lipschitz_modulus(&edge, |_| true, h)?;
        let mb = lipschitz_modulus(&bulk, |_| true, h)?;
        exact.push((n, me, mb));
    }
    let spread = |xs: Vec<f64>| {
        // moduli of profiles that are flat to 1e−6 carry no scale
        if xs.iter().all(|&x| x < 1e-6) {
            return 1.0;
        }
        xs.iter().cloned().fold(f64::MIN, f64::max) / xs.iter().cloned().fold(f64::MAX, f64::min)
    };
    c.le("exact_edge_moduli_ratio", spread(exact.iter().map(|e| e.1).collect()), 1.2);
    c.le("exact_bulk_moduli_ratio", spread(exact.iter().map(|e| e.2).collect()), 1.2);

    // Monte Carlo: radial edge profiles at n = 32 from two independent runs
    let n = 32;
    let scale = (n as f64).sqrt();
    let (u0, du, rings) = (-3.0, 0.25, 20);
    let edges: Vec<f64> = (0..=rings).map(|i| 1.0 + (u0 + du * i as f64) / scale).collect();
    let mut mc = Vec::new();
    for (i, beta) in [0.5, 2.0].into_iter().enumerate() {
        let mut runs = Vec::new();
        for rep in 0..2u64 {
            let p = params(n, beta, 4, 12_500, 4, 1000, opts.seed ^ (90 + 10 * i as u64 + rep));
            let (hist, _) = run_chains(&spec, &p, |_| PolarHistogram::new(edges.clone(), 1, 250))?;
            let profile: Vec<(f64, f64)> = hist.radial_density().into_iter().map(|(d, se)| (d / n as f64, se / n as f64)).collect();
            runs.push(modulus_1d(&profile, du, h));
        }
        let ((ma, ea), (mb, eb)) = (runs[0], runs[1]);
        c.le(format!("mc_moduli_consistent_beta{beta}"), (ma - mb).abs() / (ea * ea + eb * eb).sqrt(), 3.0);
        mc.push(json!({"beta": beta, "moduli": [ma, mb], "stderr": [ea, eb]}));
    }
    Ok(json!({"exact": exact, "mc": mc}))
}

fn overcrowding(c: &mut Checks, opts: &AcceptanceOptions, t: Instant) -> Result<Value, AcceptanceError> {
    let spec = PotentialSpec::ginibre();
    let n = 64;
    let p = params(n, 1.0, 4, 25_000, 5, 2000, opts.seed ^ 10);
    let radius = 1.0 / (n as f64).sqrt();
    let (counts, _) = run_chains(&spec, &p, |_| DiscCounts::new(Point::new(0.0, 0.0), radius))?;
    let rep = overcrowd_tail(&counts.counts, n);
    c.truth("decreasing_and_concave", tail_is_gaussian_shaped(&rep));
    c.le("runtime_seconds", t.elapsed().as_secs_f64(), 600.0);
    let floor = 10.0 / rep.samples as f64;
    let shown: Vec<_> = rep.points.iter().filter(|p| p.prob >= floor).collect();
    Ok(json!({"samples": rep.samples, "tail": shown, "fit": rep.fit}))
}

fn induced_band(c: &mut Checks, opts: &AcceptanceOptions) -> Result<Value, AcceptanceError> {
    let (n, s) = (1024usize, 2.0);
    let spec = PotentialSpec::induced(n, s)?;
    let centre = induced_center(n, s, 0.0)?.re;
    let scale = n as f64 / s;
    // rings of width 0.1 in Im w; outward radial steps are −Im w
    let (x0, dx, rings) = (-2.0, 0.1, 40);
    let edges: Vec<f64> = (0..=rings).map(|i| centre + (x0 + dx * i as f64) / scale).collect();
    let sectors = 8;
    let p = params(n, 1.0, 4, 5000, 1, 1000, opts.seed ^ 11);
    let (hist, _) = run_chains(&spec, &p, |_| PolarHistogram::new(edges.clone(), sectors, 100))?;
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut profile = Vec::new();
    for (i, (d, se)) in hist.radial_density().into_iter().enumerate() {
        let (a, b) = (edges[i], edges[i + 1]);
        // ring average of F_s(2 Im w) in area measure
        let gl = crate::quadrature::composite_rule(a, b, 1, 8);
        let num: f64 = gl.iter().map(|(r, w)| w * r * f_s_profile(s, 2.0 * (centre - r) * scale)).sum();
        let reference = num / ((b * b - a * a) / 2.0);
        let (rho, rse) = (d / (scale * scale), se / (scale * scale));
        let dev = (rho - reference).abs();
        let allowed = (3.0 * rse).max(0.05);
        worst = worst.max(dev);
        if dev > allowed {
            failures += 1;
        }
        profile.push(json!({"im_w": (centre - 0.5 * (a + b)) * scale, "rho": rho, "stderr": rse, "reference": reference}));
    }
    c.le("band_rings_outside_band", failures as f64, 0.0);
    let band: Vec<usize> = (0..rings).filter(|&i| (x0 + dx * (i as f64 + 0.5)).abs() < 0.5).collect();
    let z = hist.angular_invariance_z(&band);
    c.le("angular_invariance_z", z.abs(), 3.0);
    Ok(json!({"configurations": p.retained() * p.chains, "sup_deviation": worst, "invariance_z": z, "profile": profile}))
}

fn thermal(c: &mut Checks) -> Result<Value, AcceptanceError> {
    let g = PotentialSpec::ginibre();
    let opts = ThermalOptions::default();
    let (a, rep) = solve_thermal(&g, 64, 1.0, &opts)?;
    c.le("del_residual_n64", rep.residual, 1e-5);
    let (b, _) = solve_thermal(
        &g,
        64,
        1.0,
        &ThermalOptions {
            init: ThermalInit::Equilibrium,
            ..opts
        },
    )?;
    let l1 = a.l1_distance(&b);
    c.le("two_initializations_l1", l1, 1e-6);
    let eq = initial_density(&g, opts.cells, ThermalInit::Equilibrium);
    c.truth("equilibrium_not_better", crate::thermal::free_energy(&g, 64, 1.0, &eq) >= rep.free_energy);

    let (cold, _) = solve_thermal(
        &g,
        1_000_000,
        1.0,
        &ThermalOptions {
            cells: 1024,
            tol: 1e-3,
            ..opts
        },
    )?;
    let drop = g.radial_droplet();
    let cold_l1 = cold.l1_distance_fn(|r| if drop.contains_radius(r) { g.laplacian_radial(r) } else { 0.0 });
    c.le("low_temperature_l1", cold_l1, 1e-2);

    let mut edge = Vec::new();
    for n in [64usize, 128, 256] {
        let (r, _) = boundary_discrepancy(n, &opts)?;
        c.le(format!("self_consistency_n{n}"), r.thermal_consistency.abs(), 0.02);
        edge.push(r);
    }
    let gaps: Vec<f64> = edge.iter().map(|r| r.gap).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    c.truth("edge_gap_positive", gaps.iter().all(|&x| x > 0.0));
    c.le("edge_gap_spread", gaps.iter().map(|x| (x / mean - 1.0).abs()).fold(0.0, f64::max), 0.2);

    let q = PotentialSpec::quartic(1.0, 1.0, 1.5)?;
    let mut bulk = Vec::new();
    for n in [64usize, 128, 256] {
        // the residual floor of the quartic solve near its edge sits just
        // above 1e−5; the bulk value at |p| = 0.4 is unaffected
        bulk.push(bulk_discrepancy(&q, n, 0.4, &ThermalOptions { cells: 8192, tol: 1e-4, ..opts })?);
    }
    let last = bulk.last().expect("three sizes");
    c.le("bulk_two_term_n256", (last.oracle_excess - last.curvature / 2.0).abs(), 0.1);
    c.truth("bulk_gap_positive", bulk.iter().all(|r| r.gap > 0.1 * last.curvature));
    Ok(json!({
        "solve": rep,
        "two_init_l1": l1,
        "low_temperature_l1": cold_l1,
        "edge": edge.iter().map(|r| json!({"n": r.n, "gap": r.gap, "oracle_log_laplacian": r.oracle_log_laplacian, "thermal_log_laplacian": r.thermal_log_laplacian, "consistency": r.thermal_consistency})).collect::<Vec<_>>(),
        "bulk": bulk,
    }))
}

fn ward_equation(c: &mut Checks) -> Value {
    let g = ResidualGrid::default();
    let mut bulk_pts = Vec::new();
    for i in -2..=2 {
        for j in -2..=2 {
            let u = Point::new(0.5 * i as f64, 0.5 * j as f64);
            if u.norm() <= 1.0 {
                bulk_pts.push(u);
            }
        }
    }
    let bulk = ward_equation_residual(|u, v| bulk_kernel(1.0, u, v), 1.0, &bulk_pts, &g);
    let bulk_sup = bulk.iter().map(|r| r.norm()).fold(0.0, f64::max);
    c.le("bulk_residual", bulk_sup, 0.02);
    let edge_pts: Vec<Point> = (-4..=4).map(|i| Point::new(0.25 * i as f64, 0.0)).collect();
    let edge = ward_equation_residual(|u, v| boundary_kernel(1.0, u, v), 1.0, &edge_pts, &g);
    let edge_sup = edge.iter().map(|r| r.norm()).fold(0.0, f64::max);
    c.le("boundary_residual", edge_sup, 0.05);
    // the same grid on the exact β = 1 edge kernel
    let exact = ward_equation_residual(ginibre_edge_kernel, 1.0, &edge_pts, &g);
    let exact_sup = exact.iter().map(|r| r.norm()).fold(0.0, f64::max);
    c.le("exact_edge_kernel_residual", exact_sup, 0.05);
    json!({
        "bulk_sup": bulk_sup,
        "boundary": edge_pts.iter().zip(&edge).map(|(u, r)| json!({"re_u": u.re, "residual": [r.re, r.im]})).collect::<Vec<_>>(),
        "exact_edge_sup": exact_sup,
    })
}
