//! Reference values: the exact β = 1 one-point function of radial potentials
//! and brute-force quadrature for one and two particles at any β.
//!
//! For a radial `Q` the monomials are orthogonal in `L²(e^{−nQ} dA)`, so the
//! β = 1 correlation kernel is diagonal:
//! `K(z, w) = e^{−n(Q(z)+Q(w))/2} Σ_{k<n} (z w̄)^k / h_k`.

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::diagnostics::TestFunction;
use crate::potential::{radial_mass_radius, PotentialSpec};
use crate::quadrature::{composite_rule, gauss_legendre, integrate, Chebyshev, QuadratureError, Tolerance};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("norm h_{k} has relative error {rel_error:e}, above {limit:e}")]
    InaccurateNorm { k: usize, rel_error: f64, limit: f64 },
    #[error("two-particle quadrature error {error:e} exceeds {limit:e} (value {value:e})")]
    PairNotConverged { value: f64, error: f64, limit: f64 },
    #[error("bad input: {0}")]
    BadInput(String),
}

fn quad_tolerance<T: Real>() -> Tolerance {
    Tolerance {
        abs: 0.0,
        rel: (64.0 * T::epsilon().f64()).max(1e-13),
        max_intervals: 4000,
    }
}

/// Largest acceptable relative error of a norm in precision `T`.
fn norm_limit<T: Real>() -> f64 {
    (1e3 * T::epsilon().f64()).max(1e-10)
}

/// Result of [`log_radial_moment`]: `log I` with `I = 2∫ r^a e^{−c·g(r)} dr`
/// over the radii of `Σ`, a relative error estimate, and an estimate of the
/// mass the wall cuts off.
#[derive(Debug, Clone, Copy)]
struct LogMoment<T> {
    log_value: T,
    rel_error: T,
    log_tail: T,
}

fn log_radial_moment<T: Real>(spec: &PotentialSpec<T>, a: T, c: T) -> Result<LogMoment<T>, QuadratureError> {
    let lo = spec.sigma_inner();
    let hi = spec.sigma_outer();
    let g = |r: T| spec.radial(r);
    let phi = |r: T| a * r.ln() - c * g(r);
    // the log-integrand is concave with its mode where r g'(r) = a / c
    let mode = radial_mass_radius(spec.params(), a / c).max(lo).min(hi);
    let p = spec.params();
    let curv = a / (mode * mode)
        + c * (T::of(2.0) * p.delta + p.log_coef / (mode * mode) + T::of(12.0) * p.quartic_coef * mode * mode);
    let width = T::one() / curv.sqrt();
    let peak = phi(mode);
    let mut breaks = vec![lo, hi, mode];
    for k in [1.0, 3.0, 8.0, 20.0, 40.0] {
        for s in [-1.0, 1.0] {
            let x = mode + T::of(k * s) * width;
            if x > lo && x < hi {
                breaks.push(x);
            }
        }
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breaks.dedup();
    let two = T::of(2.0);
    let est = integrate(
        |r: T| {
            let v = phi(r) - peak;
            if v == T::neg_infinity() {
                T::zero()
            } else {
                two * v.exp()
            }
        },
        &breaks,
        quad_tolerance::<T>(),
    )?;
    let log_value = peak + est.value.ln();
    // Laplace estimate of the cut-off mass beyond each wall
    let tail_at = |r: T| {
        let slope = (a / r - c * spec.radial_derivative(r)).abs();
        phi(r) + (two / slope).ln()
    };
    let mut log_tail = tail_at(hi);
    if lo > T::zero() {
        log_tail = crate::scalar::log_add_exp(log_tail, tail_at(lo));
    }
    Ok(LogMoment {
        log_value,
        rel_error: est.error / est.value,
        log_tail,
    })
}

/// The weighted monomial norms `h_k = ∫_Σ |z|^{2k} e^{−nQ} dA`, stored as logarithms.
#[derive(Debug, Clone)]
pub struct RadialKernelData<T> {
    n: usize,
    log_norms: Vec<T>,
    rel_errors: Vec<T>,
    log_tails: Vec<T>,
    spec: PotentialSpec<T>,
}

/// Computes `h_k = 2∫ r^{2k+1} e^{−n g(r)} dr`, `k < n`, by adaptive
/// Gauss–Kronrod quadrature around the peak of each integrand.
pub fn radial_norms<T: Real>(spec: &PotentialSpec<T>, n: usize) -> Result<RadialKernelData<T>, OracleError> {
    if n == 0 {
        return Err(OracleError::BadInput("n must be at least 1".into()));
    }
    let nf = T::of_usize(n);
    let limit = norm_limit::<T>();
    let moments: Vec<Result<LogMoment<T>, QuadratureError>> = (0..n)
        .into_par_iter()
        .map(|k| log_radial_moment(spec, T::of_usize(2 * k + 1), nf))
        .collect();
    let mut data = RadialKernelData {
        n,
        log_norms: Vec::with_capacity(n),
        rel_errors: Vec::with_capacity(n),
        log_tails: Vec::with_capacity(n),
        spec: *spec,
    };
    for (k, m) in moments.into_iter().enumerate() {
        let m = m?;
        if !(m.rel_error.f64() <= limit) || !m.log_value.is_finite() {
            return Err(OracleError::InaccurateNorm {
                k,
                rel_error: m.rel_error.f64(),
                limit,
            });
        }
        data.log_norms.push(m.log_value);
        data.rel_errors.push(m.rel_error);
        data.log_tails.push(m.log_tail);
    }
    Ok(data)
}

impl<T: Real> RadialKernelData<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &PotentialSpec<T> {
        &self.spec
    }

    pub fn log_norms(&self) -> &[T] {
        &self.log_norms
    }

    /// `h_k`; may underflow for large `n`, prefer [`Self::log_norms`].
    pub fn norms(&self) -> Vec<T> {
        self.log_norms.iter().map(|l| l.exp()).collect()
    }

    pub fn max_rel_error(&self) -> T {
        self.rel_errors.iter().fold(T::zero(), |m, &e| m.max(e))
    }

    /// Largest ratio between the mass the hard wall removes from a norm
    /// integrand and the norm itself (exponentially small for admissible specs).
    pub fn max_truncation_tail(&self) -> T {
        self.log_tails
            .iter()
            .zip(&self.log_norms)
            .map(|(t, h)| (*t - *h).exp())
            .fold(T::zero(), |m, x| m.max(x))
    }

    /// `log R_n(z)` at radius `r`; `−∞` outside `Σ`.
    pub fn log_exact_r_radial(&self, r: T) -> T {
        let nq = T::of_usize(self.n) * self.spec.eval_q_norm_sqr(r * r);
        if !nq.is_finite() {
            return T::neg_infinity();
        }
        if r == T::zero() {
            return -nq - self.log_norms[0];
        }
        let lr = T::of(2.0) * r.ln();
        let mut m = T::neg_infinity();
        for (k, &lh) in self.log_norms.iter().enumerate() {
            m = m.max(T::of_usize(k) * lr - lh);
        }
        let mut s = T::zero();
        for (k, &lh) in self.log_norms.iter().enumerate() {
            s += (T::of_usize(k) * lr - lh - m).exp();
        }
        m + s.ln() - nq
    }

    /// `R_n(z) = e^{−nQ(z)} Σ_k |z|^{2k}/h_k`; zero outside `Σ`.
    pub fn exact_r(&self, z: Complex<T>) -> T {
        self.log_exact_r_radial(z.norm()).exp()
    }

    pub fn exact_r_radial(&self, r: T) -> T {
        self.log_exact_r_radial(r).exp()
    }

    /// `log |K(z, w)|`.
    pub fn kernel_log_abs(&self, z: Complex<T>, w: Complex<T>) -> T {
        let nf = T::of_usize(self.n);
        let q = self.spec.eval_q(z) + self.spec.eval_q(w);
        if !q.is_finite() {
            return T::neg_infinity();
        }
        let zeta = z * w.conj();
        let rho = zeta.norm();
        let half_nq = T::of(0.5) * nf * q;
        if rho == T::zero() {
            return -self.log_norms[0] - half_nq;
        }
        let (lr, theta) = (rho.ln(), zeta.arg());
        let mut m = T::neg_infinity();
        for (k, &lh) in self.log_norms.iter().enumerate() {
            m = m.max(T::of_usize(k) * lr - lh);
        }
        let mut s = Complex::new(T::zero(), T::zero());
        for (k, &lh) in self.log_norms.iter().enumerate() {
            let kf = T::of_usize(k);
            s = s + Complex::from_polar((kf * lr - lh - m).exp(), kf * theta);
        }
        m + s.norm().ln() - half_nq
    }

    /// Two-point function `R(z)R(w) − |K(z, w)|²`.
    pub fn two_point(&self, z: Complex<T>, w: Complex<T>) -> T {
        let k2 = (T::of(2.0) * self.kernel_log_abs(z, w)).exp();
        (self.exact_r(z) * self.exact_r(w) - k2).max(T::zero())
    }

    /// Berezin kernel `B(z, w) = |K(z, w)|² / K(z, z)`, a probability density in `w`.
    pub fn berezin(&self, z: Complex<T>, w: Complex<T>) -> T {
        let lz = self.log_exact_r_radial(z.norm());
        if lz == T::neg_infinity() {
            return T::zero();
        }
        (T::of(2.0) * self.kernel_log_abs(z, w) - lz).exp()
    }
}

/// `R_n^{β=1}(z)`; computes the norms on every call.
pub fn exact_r<T: Real>(spec: &PotentialSpec<T>, n: usize, z: Complex<T>) -> Result<T, OracleError> {
    Ok(radial_norms(spec, n)?.exact_r(z))
}

/// One particle at inverse temperature β: density `e^{−βQ}/∫_Σ e^{−βQ} dA`.
#[derive(Debug, Clone)]
pub struct OneParticleGibbs<T> {
    spec: PotentialSpec<T>,
    beta: T,
    log_z: T,
}

impl<T: Real> OneParticleGibbs<T> {
    pub fn new(spec: &PotentialSpec<T>, beta: T) -> Result<Self, OracleError> {
        if !(beta > T::zero()) {
            return Err(OracleError::BadInput("beta must be positive".into()));
        }
        let m = log_radial_moment(spec, T::one(), beta)?;
        Ok(Self {
            spec: *spec,
            beta,
            log_z: m.log_value,
        })
    }

    pub fn density(&self, z: Complex<T>) -> T {
        let q = self.spec.eval_q(z);
        if !q.is_finite() {
            return T::zero();
        }
        (-self.beta * q - self.log_z).exp()
    }

    pub fn density_radial(&self, r: T) -> T {
        self.density(Complex::new(r, T::zero()))
    }
}

pub fn quadrature_n1<T: Real>(spec: &PotentialSpec<T>, beta: T, z: Complex<T>) -> Result<T, OracleError> {
    Ok(OneParticleGibbs::new(spec, beta)?.density(z))
}

/// Node counts for the two-particle quadrature. Every count is scaled by
/// 3/2 for the refinement that provides the error estimate.
#[derive(Debug, Clone, Copy)]
pub struct PairRule {
    /// Degree of the Chebyshev interpolants in `|z₁|`.
    pub radial_degree: usize,
    /// Trapezoid nodes on each angular variable.
    pub angles: usize,
    /// Gauss–Legendre panels and order on each ray and radial segment.
    pub panels: usize,
    pub order: usize,
    /// Accepted error relative to `max(1, |value|)`.
    pub limit: f64,
}

impl Default for PairRule {
    fn default() -> Self {
        Self {
            radial_degree: 48,
            angles: 64,
            panels: 3,
            order: 12,
            limit: 1e-4,
        }
    }
}

impl PairRule {
    pub fn refined(&self) -> Self {
        let up = |k: usize| (3 * k).div_ceil(2);
        Self {
            radial_degree: up(self.radial_degree),
            angles: up(self.angles),
            panels: up(self.panels),
            order: up(self.order),
            limit: self.limit,
        }
    }
}

/// Two-particle expectation with its refinement error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate<T> {
    pub value: Complex<T>,
    pub error: T,
}

/// Observables for [`quadrature_n2`].
pub enum PairObservable<'a, T> {
    Constant,
    /// `N(c, r)`, the number of particles in the closed disc.
    DiscCount { center: Complex<T>, radius: T },
    /// The Ward statistic of a bump at β.
    Ward(&'a TestFunction<T>),
    /// Any bounded symmetric function, by direct four-dimensional quadrature.
    /// `radial_breaks` lists radii where the observable jumps in `|z₁|`.
    General {
        f: &'a (dyn Fn(Complex<T>, Complex<T>) -> Complex<T> + Sync),
        rotation_invariant: bool,
        radial_breaks: &'a [T],
    },
}

/// Pieces of the chord `{z + ρu : ρ ≥ 0}` inside the annulus `Σ`.
fn ray_segments<T: Real>(spec: &PotentialSpec<T>, z: Complex<T>, u: Complex<T>) -> ([(T, T); 2], usize) {
    let so = spec.sigma_outer();
    let si = spec.sigma_inner();
    let c = z.re * u.re + z.im * u.im;
    let r2 = z.norm_sqr();
    let rho_max = -c + (c * c - r2 + so * so).max(T::zero()).sqrt();
    let zero = (T::zero(), T::zero());
    if si > T::zero() {
        let disc = c * c - r2 + si * si;
        if disc > T::zero() {
            let (a, b) = (-c - disc.sqrt(), -c + disc.sqrt());
            if a > T::zero() {
                return ([(T::zero(), a), (b, rho_max)], 2);
            }
        }
    }
    ([(T::zero(), rho_max), zero], 1)
}

/// Gauss–Legendre rule on `[0, 1]` used along rays, with nodes and weights
/// for the substitution `ρ = L t²` on segments that start at `z₁`.
struct RayRule<T> {
    unit: Vec<(T, T)>,
}

impl<T: Real> RayRule<T> {
    fn new(panels: usize, order: usize) -> Self {
        Self {
            unit: composite_rule(0.0, 1.0, panels, order)
                .into_iter()
                .map(|(x, w)| (T::of(x), T::of(w)))
                .collect(),
        }
    }

    /// Calls `f(ρ, dρ-weight)` over the segment.
    fn each<F: FnMut(T, T)>(&self, lo: T, hi: T, mut f: F) {
        let len = hi - lo;
        if len <= T::zero() {
            return;
        }
        if lo == T::zero() {
            let two = T::of(2.0);
            for &(t, w) in &self.unit {
                f(len * t * t, w * two * len * t);
            }
        } else {
            for &(t, w) in &self.unit {
                f(lo + len * t, w * len);
            }
        }
    }
}

/// Marginals of the two-particle Gibbs measure: the one-point function
/// `R₁(z)` and the Cauchy-type field `G(z) = ∫ p(z, w)/(z − w) dA(w)`, both
/// radial up to the phase `e^{−i arg z}` for `G`.
pub struct PairDensity<T> {
    spec: PotentialSpec<T>,
    beta: T,
    mass: Chebyshev<T>,
    cauchy: Chebyshev<T>,
    log_norm: T,
}

impl<T: Real> PairDensity<T> {
    pub fn new(spec: &PotentialSpec<T>, beta: T, rule: &PairRule) -> Result<Self, OracleError> {
        if !(beta > T::zero()) {
            return Err(OracleError::BadInput("beta must be positive".into()));
        }
        let (a, b) = (spec.sigma_inner(), spec.sigma_outer());
        let g_min = spec.radial(spec.radial_droplet().r_in.max(a).max(T::of(1e-300)));
        let two_beta = T::of(2.0) * beta;
        let weight = |z: Complex<T>| (-two_beta * (spec.eval_q(z) - g_min)).exp();
        let ray = RayRule::<T>::new(rule.panels, rule.order);
        let m = rule.angles;
        let dirs: Vec<Complex<T>> = (0..m)
            .map(|j| Complex::from_polar(T::one(), T::of(2.0) * T::PI() * T::of_usize(j) / T::of_usize(m)))
            .collect();
        let radii = Chebyshev::nodes(a, b, rule.radial_degree);
        let vals: Vec<(T, T)> = radii
            .par_iter()
            .map(|&r| {
                let z1 = Complex::new(r, T::zero());
                let w1 = weight(z1);
                let (mut mass, mut cau) = (T::zero(), Complex::new(T::zero(), T::zero()));
                for &u in &dirs {
                    let (segs, count) = ray_segments(spec, z1, u);
                    for &(lo, hi) in &segs[..count] {
                        ray.each(lo, hi, |rho, w| {
                            let z2 = z1 + u * rho;
                            let p = w * rho.powf(two_beta) * weight(z2);
                            mass += p * rho;
                            // 1/(z₁ − z₂) = −ū/ρ
                            cau = cau - u.conj() * p;
                        });
                    }
                }
                let ang = T::of(2.0) / T::of_usize(m);
                (w1 * mass * ang, w1 * cau.re * ang)
            })
            .collect();
        let mass = Chebyshev::from_values(a, b, vals.iter().map(|v| v.0).collect());
        let cauchy = Chebyshev::from_values(a, b, vals.iter().map(|v| v.1).collect());
        let z = integrate(|r: T| T::of(2.0) * r * mass.eval(r), &[a, b], quad_tolerance::<T>())?;
        Ok(Self {
            spec: *spec,
            beta,
            mass,
            cauchy,
            log_norm: z.value.ln(),
        })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// `R₁(z)` of the two-particle ensemble (integrates to 2).
    pub fn one_point(&self, z: Complex<T>) -> T {
        if !self.spec.in_wall(z) {
            return T::zero();
        }
        T::of(2.0) * (self.mass.eval(z.norm()).max(T::zero()).ln() - self.log_norm).exp()
    }

    /// `G(z) = ∫ p(z, w)/(z − w) dA(w)` for the normalized joint density `p`.
    pub fn cauchy(&self, z: Complex<T>) -> Complex<T> {
        let r = z.norm();
        if !self.spec.in_wall(z) || r == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        let phase = z.conj() / r;
        phase * (self.cauchy.eval(r) * (-self.log_norm).exp())
    }
}

/// `∫_{D(c, R)} φ dA` in polar coordinates about `c`.
fn disc_integral<T: Real, F: Fn(Complex<T>) -> Complex<T> + Sync>(
    center: Complex<T>,
    radius: T,
    rule: &PairRule,
    phi: F,
) -> Complex<T> {
    let m = rule.angles;
    let ang = T::of(2.0) / T::of_usize(m);
    let dirs: Vec<Complex<T>> = (0..m)
        .map(|j| Complex::from_polar(T::one(), T::of(2.0) * T::PI() * (T::of_usize(j) + T::of(0.5)) / T::of_usize(m)))
        .collect();
    let nodes = composite_rule(0.0, radius.f64(), 2 * rule.panels, rule.order);
    nodes
        .par_iter()
        .map(|&(t, w)| {
            let t = T::of(t);
            let mut s = Complex::new(T::zero(), T::zero());
            for &u in &dirs {
                s = s + phi(center + u * t);
            }
            s * (T::of(w) * t * ang)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
}

fn pair_value<T: Real>(
    spec: &PotentialSpec<T>,
    beta: T,
    obs: &PairObservable<'_, T>,
    rule: &PairRule,
) -> Result<Complex<T>, OracleError> {
    match obs {
        PairObservable::Constant => general_pair(spec, beta, &|_, _| Complex::new(T::one(), T::zero()), true, &[], rule),
        PairObservable::DiscCount { center, radius } => {
            let d = PairDensity::new(spec, beta, rule)?;
            Ok(disc_integral(*center, *radius, rule, |z| Complex::new(d.one_point(z), T::zero())))
        }
        PairObservable::Ward(f) => {
            let d = PairDensity::new(spec, beta, rule)?;
            let two = T::of(2.0);
            // E W = ∫ [(1/β)∂f − 2f∂Q] R₁ dA + 2∫ f G dA
            Ok(disc_integral(f.center, f.radius, rule, |z| {
                let fz = f.value(z);
                let one_body = f.d(z) / beta - spec.dq_unchecked(z) * (two * fz);
                one_body * d.one_point(z) + d.cauchy(z) * (two * fz)
            }))
        }
        PairObservable::General {
            f,
            rotation_invariant,
            radial_breaks,
        } => general_pair(spec, beta, *f, *rotation_invariant, radial_breaks, rule),
    }
}

/// Direct quadrature: `z₁` in polar coordinates, `z₂ = z₁ + ρ e^{iψ}`.
fn general_pair<T: Real>(
    spec: &PotentialSpec<T>,
    beta: T,
    f: &(dyn Fn(Complex<T>, Complex<T>) -> Complex<T> + Sync),
    rotation_invariant: bool,
    radial_breaks: &[T],
    rule: &PairRule,
) -> Result<Complex<T>, OracleError> {
    let (a, b) = (spec.sigma_inner(), spec.sigma_outer());
    let drop = spec.radial_droplet();
    let mut breaks = vec![a, b];
    for &x in [drop.r_in, drop.r_out].iter().chain(radial_breaks) {
        if x > a && x < b {
            breaks.push(x);
        }
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breaks.dedup();
    let (gx, gw) = gauss_legendre(rule.order);
    let mut r_nodes = Vec::new();
    for w in breaks.windows(2) {
        let panels = 2 * rule.panels;
        let h = (w[1] - w[0]) / T::of_usize(panels);
        for p in 0..panels {
            let lo = w[0] + h * T::of_usize(p);
            for (x, wt) in gx.iter().zip(&gw) {
                r_nodes.push((lo + h * T::of(0.5 * (x + 1.0)), h * T::of(0.5 * wt)));
            }
        }
    }
    let m = rule.angles;
    let dirs: Vec<Complex<T>> = (0..m)
        .map(|j| Complex::from_polar(T::one(), T::of(2.0) * T::PI() * T::of_usize(j) / T::of_usize(m)))
        .collect();
    let thetas: Vec<Complex<T>> = if rotation_invariant {
        vec![Complex::new(T::one(), T::zero())]
    } else {
        dirs.clone()
    };
    let g_min = spec.radial(drop.r_in.max(a).max(T::of(1e-300)));
    let two_beta = T::of(2.0) * beta;
    let weight = |z: Complex<T>| (-two_beta * (spec.eval_q(z) - g_min)).exp();
    let ray = RayRule::<T>::new(rule.panels, rule.order);
    let parts: Vec<(Complex<T>, T)> = r_nodes
        .par_iter()
        .map(|&(r, wr)| {
            let mut num = Complex::new(T::zero(), T::zero());
            let mut den = T::zero();
            for &e in &thetas {
                let z1 = e * r;
                let w1 = weight(z1) * wr * r;
                if w1 == T::zero() {
                    continue;
                }
                for &u in &dirs {
                    let u = u * e;
                    let (segs, count) = ray_segments(spec, z1, u);
                    for &(lo, hi) in &segs[..count] {
                        ray.each(lo, hi, |rho, w| {
                            let z2 = z1 + u * rho;
                            let p = w1 * w * rho.powf(two_beta) * rho * weight(z2);
                            if p > T::zero() {
                                num = num + f(z1, z2) * p;
                                den += p;
                            }
                        });
                    }
                }
            }
            (num, den)
        })
        .collect();
    let (num, den) = parts
        .into_iter()
        .fold((Complex::new(T::zero(), T::zero()), T::zero()), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    if !(den > T::zero()) {
        return Err(OracleError::BadInput("two-particle weight vanishes".into()));
    }
    Ok(num / den)
}

/// `E₂^β[observable]` with an error estimate from one refinement of `rule`.
pub fn quadrature_n2<T: Real>(
    spec: &PotentialSpec<T>,
    beta: T,
    obs: &PairObservable<'_, T>,
    rule: &PairRule,
) -> Result<PairEstimate<T>, OracleError> {
    if !(beta > T::zero()) {
        return Err(OracleError::BadInput("beta must be positive".into()));
    }
    let coarse = pair_value(spec, beta, obs, rule)?;
    let fine = pair_value(spec, beta, obs, &rule.refined())?;
    let error = (fine - coarse).norm();
    let limit = rule.limit * fine.norm().f64().max(1.0);
    if !(error.f64() <= limit) {
        return Err(OracleError::PairNotConverged {
            value: fine.norm().f64(),
            error: error.f64(),
            limit,
        });
    }
    Ok(PairEstimate { value: fine, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialParams;

    type C = Complex<f64>;

    fn ginibre() -> PotentialSpec<f64> {
        PotentialSpec::ginibre()
    }

    /// `∫_0^R 2 r^{2k+1} e^{−n r²} dr = γ(k+1, nR²)/n^{k+1}` by the series of the
    /// lower incomplete gamma function.
    fn truncated_gamma_norm(k: usize, n: f64, radius: f64) -> f64 {
        log_truncated_gamma_norm(k, n, radius).exp()
    }

    /// `log ∫_0^R 2 r^{2k+1} e^{−n r²} dr = log γ(k+1, nR²) − (k+1) log n`, from the
    /// series `γ(a, x) = x^a e^{−x} Σ_j x^j / (a (a+1) … (a+j))` summed in logs.
    fn log_truncated_gamma_norm(k: usize, n: f64, radius: f64) -> f64 {
        let x = n * radius * radius;
        let a = (k + 1) as f64;
        let mut lt = -a.ln();
        let mut ls = lt;
        for j in 1..20_000 {
            lt += x.ln() - (a + j as f64).ln();
            ls = crate::scalar::log_add_exp(ls, lt);
            if j as f64 > x && lt < ls - 40.0 {
                break;
            }
        }
        a * x.ln() - x + ls - a * n.ln()
    }

    #[test]
    fn ginibre_norms_match_incomplete_gamma() {
        let d = radial_norms(&ginibre(), 1).unwrap();
        assert!((d.norms()[0] - (1.0 - (-4.0f64).exp())).abs() < 1e-13);
        assert!((d.norms()[0] - 0.981_684).abs() < 1e-6);
        let d = radial_norms(&ginibre(), 4).unwrap();
        let h = d.norms();
        assert!((h[2] - 0.031_25).abs() < 2.0 * (-16.0f64).exp() * 16.0f64.powi(2));
        for (k, hk) in h.iter().enumerate() {
            let exact = truncated_gamma_norm(k, 4.0, 2.0);
            assert!((hk / exact - 1.0).abs() < 1e-12, "k = {k}: {hk} vs {exact}");
        }
        assert!(d.max_rel_error() < 1e-10);
        assert!(d.max_truncation_tail() < 1e-4);
    }

    #[test]
    fn large_n_norms_stay_finite_in_log_domain() {
        let d = radial_norms(&ginibre(), 256).unwrap();
        for (k, l) in d.log_norms().iter().enumerate() {
            let exact = log_truncated_gamma_norm(k, 256.0, 2.0);
            assert!((l - exact).abs() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn density_at_origin_has_closed_form() {
        for n in [1usize, 3, 10, 64] {
            let r0 = exact_r(&ginibre(), n, C::new(0.0, 0.0)).unwrap();
            let nf = n as f64;
            assert!((r0 - nf / (1.0 - (-4.0 * nf).exp())).abs() < 1e-11 * nf);
        }
    }

    fn mass<T: Real>(d: &RadialKernelData<T>) -> T {
        let s = d.spec();
        let drop = s.radial_droplet();
        let mut breaks = vec![s.sigma_inner(), drop.r_in, drop.r_out, s.sigma_outer()];
        breaks.retain(|&x| x >= s.sigma_inner() && x <= s.sigma_outer());
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-13,
            max_intervals: 4000,
        };
        integrate(|r: T| T::of(2.0) * r * d.exact_r_radial(r), &breaks, tol).unwrap().value
    }

    #[test]
    fn exact_density_integrates_to_n() {
        for n in [1usize, 8, 64] {
            let d = radial_norms(&ginibre(), n).unwrap();
            assert!((mass(&d) - n as f64).abs() < 1e-8 * n as f64, "n = {n}");
        }
        let d = radial_norms(&PotentialSpec::<f64>::induced(64, 2.0).unwrap(), 64).unwrap();
        assert!((mass(&d) - 64.0).abs() < 1e-8 * 64.0);
    }

    #[test]
    fn exact_density_is_nonnegative_and_decays_outside() {
        let d = radial_norms(&ginibre(), 32).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let r = 2.0 * i as f64 / 200.0;
            let v = d.exact_r_radial(r);
            assert!(v >= 0.0);
            if r > 1.0 {
                assert!(v <= prev);
            }
            prev = v;
        }
        assert_eq!(d.exact_r(C::new(2.5, 0.0)), 0.0);
    }

    #[test]
    fn upper_bound_with_explicit_constant_holds() {
        let s = ginibre();
        for n in [16usize, 64] {
            let d = radial_norms(&s, n).unwrap();
            let nf = n as f64;
            for i in 0..400 {
                let r = 2.0 * (i as f64 + 0.5) / 400.0;
                let bound = std::f64::consts::E * nf * nf * (-nf * s.q_eff_radial(r)).exp();
                assert!(d.exact_r_radial(r) <= bound, "n = {n}, r = {r}");
            }
        }
    }

    #[test]
    fn sub_mean_value_inequality_on_bulk_points() {
        let s = ginibre();
        let n = 32;
        let d = radial_norms(&s, n).unwrap();
        let nf = n as f64;
        let rad = 1.0 / nf.sqrt();
        for p in [C::new(0.0, 0.0), C::new(0.3, 0.2), C::new(0.0, -0.6)] {
            let rule = PairRule::default();
            let avg = disc_integral(p, rad, &rule, |z| C::new(d.exact_r(z), 0.0)).re;
            assert!(nf * std::f64::consts::E * avg >= d.exact_r(p), "p = {p}");
        }
    }

    #[test]
    fn annulus_moments_reused_as_quadrature_checks() {
        // uniform probability measure on A(R/2, R − 2r): mean of Δ|w|²
        let moment = |delta: f64, a: f64, b: f64| {
            let area = b * b - a * a;
            let nodes = composite_rule(a, b, 4, 10);
            nodes.iter().map(|(s, w)| w * 2.0 * delta * s.powi(3) / area).sum::<f64>()
        };
        for (delta, big_r, r) in [(1.0, 0.4, 0.01), (3.0, 0.2, 0.015), (0.5, 1.0, 0.09)] {
            let m = moment(delta, big_r / 2.0, big_r - 2.0 * r);
            let closed = delta / 2.0 * ((big_r - 2.0 * r).powi(2) + (big_r / 2.0).powi(2));
            assert!((m - closed).abs() < 1e-13);
            assert!(m < delta * big_r * big_r);
        }
        for (n, delta) in [(16usize, 1.0), (100, 2.5), (1000, 0.3)] {
            let k = (n as f64 * delta).sqrt();
            for r in [0.01 / k, 0.1 / k, 0.24 / k] {
                let m = moment(delta, 0.5 / k, 1.0 / k - r);
                assert!(m <= 8.0 / (5.0 * n as f64));
            }
        }
    }

    #[test]
    fn one_particle_gibbs_matches_exact_kernel_at_beta_one() {
        let s = ginibre();
        let d = radial_norms(&s, 1).unwrap();
        for z in [C::new(0.0, 0.0), C::new(0.5, -0.7), C::new(1.9, 0.0)] {
            let q = quadrature_n1(&s, 1.0, z).unwrap();
            assert!((q - d.exact_r(z)).abs() < 1e-10);
        }
        assert_eq!(quadrature_n1(&s, 2.0, C::new(2.1, 0.0)).unwrap(), 0.0);
        let g = OneParticleGibbs::new(&s, 2.0).unwrap();
        let m = integrate(|r: f64| 2.0 * r * g.density_radial(r), &[0.0, 1.0, 2.0], Tolerance::default()).unwrap();
        assert!((m.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn berezin_kernel_is_a_probability_density() {
        let d = radial_norms(&ginibre(), 8).unwrap();
        let u = C::new(0.3, 0.1);
        let rule = PairRule::default();
        let total = disc_integral(C::new(0.0, 0.0), 2.0, &rule, |v| C::new(d.berezin(u, v), 0.0)).re;
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        assert!((d.berezin(u, u) - d.exact_r(u)).abs() < 1e-10 * d.exact_r(u));
        assert!(d.two_point(u, u).abs() < 1e-9);
    }

    #[test]
    fn pair_normalization() {
        let e = quadrature_n2(&ginibre(), 1.0, &PairObservable::Constant, &PairRule::default()).unwrap();
        assert!((e.value.re - 1.0).abs() < 1e-6 && e.value.im.abs() < 1e-12);
    }

    #[test]
    fn pair_disc_count_matches_determinantal_density() {
        let s = ginibre();
        let rule = PairRule::default();
        let e = quadrature_n2(
            &s,
            1.0,
            &PairObservable::DiscCount {
                center: C::new(0.0, 0.0),
                radius: 0.5,
            },
            &rule,
        )
        .unwrap();
        let d = radial_norms(&s, 2).unwrap();
        let exact = integrate(|r: f64| 2.0 * r * d.exact_r_radial(r), &[0.0, 0.5], Tolerance::default())
            .unwrap()
            .value;
        assert!((e.value.re - exact).abs() < 1e-4, "{} vs {exact}", e.value.re);
        // the direct four-dimensional route, exploiting exchangeability
        let count = |z1: C, _z2: C| C::new(if z1.norm() <= 0.5 { 2.0 } else { 0.0 }, 0.0);
        let direct = quadrature_n2(
            &s,
            1.0,
            &PairObservable::General {
                f: &count,
                rotation_invariant: true,
                radial_breaks: &[0.5],
            },
            &rule,
        )
        .unwrap();
        assert!((direct.value.re - exact).abs() < 1e-4, "{} vs {exact}", direct.value.re);
    }

    #[test]
    fn pair_one_point_function_matches_determinantal_density() {
        let s = ginibre();
        let pd = PairDensity::new(&s, 1.0, &PairRule::default()).unwrap();
        let d = radial_norms(&s, 2).unwrap();
        for r in [0.0, 0.4, 0.9, 1.3, 1.9] {
            let z = C::from_polar(r, 0.7);
            assert!((pd.one_point(z) - d.exact_r(z)).abs() < 1e-8, "r = {r}");
        }
    }

    fn ward_n2<'a>(spec: &'a PotentialSpec<f64>, beta: f64, f: &TestFunction<f64>) -> impl Fn(C, C) -> C + Sync + 'a {
        let f = *f;
        move |z1: C, z2: C| {
            let mut w = (f.d(z1) + f.d(z2)) / beta - (spec.dq_unchecked(z1) * f.value(z1) + spec.dq_unchecked(z2) * f.value(z2)) * 2.0;
            let dz = z1 - z2;
            if dz.norm() > 0.0 {
                w += (f.value(z1) - f.value(z2)) / dz;
            }
            w
        }
    }

    #[test]
    fn ward_statistic_has_mean_zero_for_two_particles() {
        let s = ginibre();
        let bumps = [
            TestFunction::new(C::new(0.0, 0.0), 0.5).unwrap(),
            TestFunction::new(C::new(0.6, 0.0), 0.3).unwrap(),
            TestFunction::new(C::new(0.0, 0.9), 0.5).unwrap(),
        ];
        for beta in [0.5, 1.0, 2.0] {
            for f in &bumps {
                let e = quadrature_n2(&s, beta, &PairObservable::Ward(f), &PairRule::default()).unwrap();
                assert!(e.value.norm() < 1e-4, "beta = {beta}, {f:?}: {e:?}");
            }
        }
    }

    #[test]
    fn ward_structured_and_direct_routes_agree() {
        let s = ginibre();
        let f = TestFunction::new(C::new(0.6, 0.0), 0.3).unwrap();
        let beta = 1.0;
        let obs = ward_n2(&s, beta, &f);
        let rule = PairRule {
            angles: 64,
            panels: 2,
            ..PairRule::default()
        };
        // one resolution only: the four-dimensional rule is expensive
        let direct = pair_value(
            &s,
            beta,
            &PairObservable::General {
                f: &obs,
                rotation_invariant: false,
                radial_breaks: &[0.3, 0.9],
            },
            &rule,
        )
        .unwrap();
        // sanity: the one-body part alone is clearly nonzero
        let pd = PairDensity::new(&s, beta, &PairRule::default()).unwrap();
        let one_body = disc_integral(f.center, f.radius, &PairRule::default(), |z| {
            (f.d(z) / beta - s.dq_unchecked(z) * (2.0 * f.value(z))) * pd.one_point(z)
        });
        assert!(one_body.norm() > 1e-2);
        assert!(direct.norm() < 2e-2 * one_body.norm(), "{direct} vs {one_body}");
    }

    #[test]
    fn annular_wall_rays_skip_the_hole() {
        let s = PotentialSpec::<f64>::induced(16, 2.0).unwrap();
        let (segs, count) = ray_segments(&s, C::new(1.0, 0.0), C::new(-1.0, 0.0));
        assert_eq!(count, 2);
        let si = s.sigma_inner();
        assert!((segs[0].1 - (1.0 - si)).abs() < 1e-12);
        assert!((segs[1].0 - (1.0 + si)).abs() < 1e-12);
        assert!((segs[1].1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_norms() {
        let s = PotentialSpec::<f32>::new(PotentialParams::<f32>::ginibre()).unwrap();
        let d = radial_norms(&s, 4).unwrap();
        assert!((d.norms()[2] - 0.031_25).abs() < 1e-5);
        assert!((d.exact_r(Complex::new(0.0f32, 0.0)) - 4.0).abs() < 1e-4);
    }
}
