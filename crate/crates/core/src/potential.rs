//! Radial external potentials `Q(z) = Δ|z|² + b·log(1/|z|) + c₄|z|⁴ + a` on an
//! annular hard wall `Σ = {σ_in ≤ |z| ≤ σ_out}`, with their droplet, obstacle
//! function and effective potential.
//!
//! Areas are measured in `dA = dx dy / π`, so a disc of radius `r` has area `r²`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("point lies outside the interior of the hard wall")]
    OutsideDomain,
    #[error("the logarithmic term is singular at the origin")]
    PoleAtOrigin,
    #[error("operation requires a Hele-Shaw potential (quartic coefficient must vanish)")]
    NotHeleShaw,
    #[error("droplet is {distance} from the hard wall, at least {required} is required")]
    DropletTouchesWall { distance: f64, required: f64 },
    #[error("bad parameters: {0}")]
    BadParameters(String),
}

/// Annular droplet `{r_in ≤ |z| ≤ r_out}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Droplet<T> {
    pub r_in: T,
    pub r_out: T,
}

impl<T: Real> Droplet<T> {
    pub fn contains_radius(&self, r: T) -> bool {
        r >= self.r_in && r <= self.r_out
    }

    /// Distance from a point at radius `r` to the droplet.
    pub fn distance(&self, r: T) -> T {
        if r < self.r_in {
            self.r_in - r
        } else if r > self.r_out {
            r - self.r_out
        } else {
            T::zero()
        }
    }
}

/// Raw coefficients; validated into a [`PotentialSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams<T> {
    pub delta: T,
    pub log_coef: T,
    pub quartic_coef: T,
    pub const_term: T,
    pub sigma_outer: T,
    pub sigma_inner: T,
    pub delta0: T,
    pub eta0: T,
}

impl<T: Real> PotentialParams<T> {
    /// `Q = |z|²` on the disc of radius 2.
    pub fn ginibre() -> Self {
        Self {
            delta: T::one(),
            log_coef: T::zero(),
            quartic_coef: T::zero(),
            const_term: T::zero(),
            sigma_outer: T::of(2.0),
            sigma_inner: T::zero(),
            delta0: T::of(0.1),
            eta0: T::of(0.5),
        }
    }
}

/// A validated potential. Immutable after construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec<T> {
    params: PotentialParams<T>,
    droplet: Droplet<T>,
}

/// Monotone root of `r ↦ r·g'(r) = target` by bisection.
pub(crate) fn radial_mass_radius<T: Real>(p: &PotentialParams<T>, target: T) -> T {
    let two = T::of(2.0);
    let four = T::of(4.0);
    // r g'(r) = 2Δr² − b + 4c₄r⁴, increasing in r
    let h = |r: T| two * p.delta * r * r - p.log_coef + four * p.quartic_coef * r.powi(4) - target;
    if h(T::zero()) >= T::zero() {
        return T::zero();
    }
    let mut lo = T::zero();
    let mut hi = T::one();
    while h(hi) < T::zero() {
        hi = hi * two;
    }
    let stop = T::of(1e-12).max(T::epsilon() * T::of(4.0));
    for _ in 0..200 {
        let mid = T::of(0.5) * (lo + hi);
        if h(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= stop * hi {
            break;
        }
    }
    T::of(0.5) * (lo + hi)
}

impl<T: Real> PotentialSpec<T> {
    pub fn new(params: PotentialParams<T>) -> Result<Self, PotentialError> {
        let p = &params;
        let all = [
            p.delta,
            p.log_coef,
            p.quartic_coef,
            p.const_term,
            p.sigma_outer,
            p.sigma_inner,
            p.delta0,
            p.eta0,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(PotentialError::BadParameters("coefficients must be finite".into()));
        }
        if p.delta <= T::zero() || p.delta0 <= T::zero() || p.eta0 <= T::zero() {
            return Err(PotentialError::BadParameters(
                "delta, delta0 and eta0 must be positive".into(),
            ));
        }
        if p.delta < p.delta0 {
            return Err(PotentialError::BadParameters(format!(
                "delta = {} is below delta0 = {}",
                p.delta, p.delta0
            )));
        }
        if p.log_coef < T::zero() || p.quartic_coef < T::zero() {
            return Err(PotentialError::BadParameters(
                "log and quartic coefficients must be nonnegative".into(),
            ));
        }
        if p.sigma_inner < T::zero() || p.sigma_outer <= p.sigma_inner {
            return Err(PotentialError::BadParameters(
                "hard wall needs 0 <= sigma_inner < sigma_outer".into(),
            ));
        }
        let droplet = if p.quartic_coef == T::zero() {
            let two = T::of(2.0);
            Droplet {
                r_in: (p.log_coef / (two * p.delta)).max(T::zero()).sqrt(),
                r_out: ((two + p.log_coef) / (two * p.delta)).sqrt(),
            }
        } else {
            Droplet {
                r_in: radial_mass_radius(p, T::zero()),
                r_out: radial_mass_radius(p, T::of(2.0)),
            }
        };
        if p.log_coef > T::zero() && p.sigma_inner == T::zero() && droplet.r_in == T::zero() {
            return Err(PotentialError::BadParameters(
                "a logarithmic term needs a hole in the wall or in the droplet".into(),
            ));
        }
        let required = T::of(2.0) * p.eta0;
        let mut distance = p.sigma_outer - droplet.r_out;
        if p.sigma_inner > T::zero() {
            distance = distance.min(droplet.r_in - p.sigma_inner);
        }
        if distance < required {
            return Err(PotentialError::DropletTouchesWall {
                distance: distance.f64(),
                required: required.f64(),
            });
        }
        Ok(Self { params, droplet })
    }

    /// `Q = |z|²` with `Σ = D(0, 2)`.
    pub fn ginibre() -> Self {
        Self::new(PotentialParams::ginibre()).expect("Ginibre spec is valid")
    }

    /// `Q = Δ|z|² + c₄|z|⁴` on `D(0, σ_out)`: strictly subharmonic with a
    /// non-harmonic `log ∂∂̄Q`. Not a Hele-Shaw potential.
    pub fn quartic(delta: T, quartic_coef: T, sigma_outer: T) -> Result<Self, PotentialError> {
        Self::new(PotentialParams {
            delta,
            quartic_coef,
            sigma_outer,
            delta0: delta.min(T::of(0.1)),
            eta0: T::of(0.25),
            ..PotentialParams::ginibre()
        })
    }

    /// Almost-circular induced ensemble: `Δ = n/s²`, with `a`, `b` chosen so
    /// that `g(1) = 1` and `g'(1) = 2`, giving the thin droplet
    /// `{√(1 − s²/n) ≤ |z| ≤ 1}`.
    pub fn induced(n: usize, s: T) -> Result<Self, PotentialError> {
        let nf = T::of_usize(n);
        if n == 0 || !(s > T::zero()) || s * s >= nf {
            return Err(PotentialError::BadParameters(format!(
                "induced ensemble needs n >= 1, s > 0 and s^2 < n (n = {n}, s = {s})"
            )));
        }
        let delta = nf / (s * s);
        let two = T::of(2.0);
        let log_coef = two * delta - two;
        let r_in = (T::one() - s * s / nf).sqrt();
        let sigma_inner = T::of(0.5) * r_in;
        Self::new(PotentialParams {
            delta,
            log_coef,
            quartic_coef: T::zero(),
            const_term: T::one() - delta,
            sigma_outer: two,
            sigma_inner,
            delta0: delta.min(T::of(0.1)),
            eta0: (T::of(0.25) * r_in).min(T::of(0.5)),
        })
    }

    pub fn params(&self) -> &PotentialParams<T> {
        &self.params
    }
    pub fn delta(&self) -> T {
        self.params.delta
    }
    pub fn log_coef(&self) -> T {
        self.params.log_coef
    }
    pub fn quartic_coef(&self) -> T {
        self.params.quartic_coef
    }
    pub fn const_term(&self) -> T {
        self.params.const_term
    }
    pub fn sigma_inner(&self) -> T {
        self.params.sigma_inner
    }
    pub fn sigma_outer(&self) -> T {
        self.params.sigma_outer
    }
    pub fn eta0(&self) -> T {
        self.params.eta0
    }
    pub fn delta0(&self) -> T {
        self.params.delta0
    }

    pub fn is_hele_shaw(&self) -> bool {
        self.params.quartic_coef == T::zero()
    }

    /// Normalized area `|Σ| = σ_out² − σ_in²`.
    pub fn wall_area(&self) -> T {
        self.params.sigma_outer.powi(2) - self.params.sigma_inner.powi(2)
    }

    pub fn in_wall(&self, z: Complex<T>) -> bool {
        self.in_wall_norm_sqr(z.norm_sqr())
    }

    #[inline]
    pub fn in_wall_norm_sqr(&self, r2: T) -> bool {
        let p = &self.params;
        r2 <= p.sigma_outer * p.sigma_outer && r2 >= p.sigma_inner * p.sigma_inner
    }

    /// Radial profile `g(r)` with no hard wall.
    #[inline]
    pub fn radial(&self, r: T) -> T {
        self.radial_norm_sqr(r * r)
    }

    #[inline]
    fn radial_norm_sqr(&self, r2: T) -> T {
        let p = &self.params;
        let mut q = p.delta * r2 + p.const_term;
        if p.log_coef != T::zero() {
            q -= T::of(0.5) * p.log_coef * r2.ln();
        }
        if p.quartic_coef != T::zero() {
            q += p.quartic_coef * r2 * r2;
        }
        q
    }

    /// `g'(r)`.
    pub fn radial_derivative(&self, r: T) -> T {
        let p = &self.params;
        T::of(2.0) * p.delta * r - p.log_coef / r + T::of(4.0) * p.quartic_coef * r.powi(3)
    }

    /// `Q(z)`; `+∞` outside `Σ`.
    pub fn eval_q(&self, z: Complex<T>) -> T {
        self.eval_q_norm_sqr(z.norm_sqr())
    }

    /// `Q` as a function of `|z|²`.
    #[inline]
    pub fn eval_q_norm_sqr(&self, r2: T) -> T {
        if !self.in_wall_norm_sqr(r2) {
            return T::infinity();
        }
        let q = self.radial_norm_sqr(r2);
        if q.is_nan() {
            T::infinity()
        } else {
            q
        }
    }

    fn check_interior(&self, z: Complex<T>) -> Result<(), PotentialError> {
        let r = z.norm();
        let p = &self.params;
        if !(r < p.sigma_outer && (r > p.sigma_inner || p.sigma_inner == T::zero())) {
            return Err(PotentialError::OutsideDomain);
        }
        if p.log_coef > T::zero() && r == T::zero() {
            return Err(PotentialError::PoleAtOrigin);
        }
        Ok(())
    }

    /// `∂Q = Δ z̄ − b/(2z) + 2c₄|z|² z̄` with `∂ = (∂ₓ − i∂ᵧ)/2`.
    pub fn eval_dq(&self, z: Complex<T>) -> Result<Complex<T>, PotentialError> {
        self.check_interior(z)?;
        Ok(self.dq_unchecked(z))
    }

    #[inline]
    pub(crate) fn dq_unchecked(&self, z: Complex<T>) -> Complex<T> {
        let p = &self.params;
        let conj = z.conj();
        let mut d = conj * p.delta;
        if p.log_coef != T::zero() {
            d = d - z.inv() * (T::of(0.5) * p.log_coef);
        }
        if p.quartic_coef != T::zero() {
            d = d + conj * (T::of(2.0) * p.quartic_coef * z.norm_sqr());
        }
        d
    }

    /// `∂∂̄Q = Δ + 4c₄|z|²` away from the origin.
    pub fn laplacian_density(&self, z: Complex<T>) -> Result<T, PotentialError> {
        self.check_interior(z)?;
        Ok(self.laplacian_radial(z.norm()))
    }

    pub fn laplacian_radial(&self, r: T) -> T {
        self.params.delta + T::of(4.0) * self.params.quartic_coef * r * r
    }

    /// `∂∂̄ log ∂∂̄Q` at radius `r`; identically zero for Hele-Shaw potentials.
    pub fn log_laplacian_curvature(&self, r: T) -> T {
        let p = &self.params;
        let d = p.delta + T::of(4.0) * p.quartic_coef * r * r;
        // ∂∂̄ log(Δ + 4c₄r²) = 4Δc₄ / (Δ + 4c₄r²)²
        T::of(4.0) * p.delta * p.quartic_coef / (d * d)
    }

    /// Droplet of a Hele-Shaw potential (closed form).
    pub fn droplet(&self) -> Result<Droplet<T>, PotentialError> {
        if !self.is_hele_shaw() {
            return Err(PotentialError::NotHeleShaw);
        }
        Ok(self.droplet)
    }

    /// Droplet of any radial potential in the family; the quartic case is
    /// solved from `r·g'(r) ∈ {0, 2}` by bisection.
    pub fn radial_droplet(&self) -> Droplet<T> {
        self.droplet
    }

    pub(crate) fn obstacle_radial(&self, r: T) -> T {
        let d = self.droplet;
        if r < d.r_in {
            self.radial(d.r_in)
        } else if r > d.r_out {
            self.radial(d.r_out) + T::of(2.0) * (r / d.r_out).ln()
        } else {
            self.radial(r)
        }
    }

    /// Obstacle function `Q̌`: equal to `Q` on the droplet, constant in its
    /// hole and `Q(r_out) + 2 log(r / r_out)` outside.
    pub fn obstacle(&self, z: Complex<T>) -> Result<T, PotentialError> {
        if !self.is_hele_shaw() {
            return Err(PotentialError::NotHeleShaw);
        }
        Ok(self.obstacle_radial(z.norm()))
    }

    /// `Q_eff = Q − Q̌ ≥ 0`, zero exactly on the droplet, `+∞` outside `Σ`.
    pub fn q_eff(&self, z: Complex<T>) -> Result<T, PotentialError> {
        if !self.is_hele_shaw() {
            return Err(PotentialError::NotHeleShaw);
        }
        Ok(self.q_eff_radial(z.norm()))
    }

    pub(crate) fn q_eff_radial(&self, r: T) -> T {
        if !self.in_wall_norm_sqr(r * r) {
            return T::infinity();
        }
        if self.droplet.contains_radius(r) {
            return T::zero();
        }
        (self.radial(r) - self.obstacle_radial(r)).max(T::zero())
    }
}

/// Center of the induced-ensemble band, `p_n = ½(1 + √(1 − s²/n)) e^{iα}`.
pub fn induced_center<T: Real>(n: usize, s: T, alpha: T) -> Result<Complex<T>, PotentialError> {
    let nf = T::of_usize(n);
    if n == 0 || !(s > T::zero()) || s * s >= nf {
        return Err(PotentialError::BadParameters("need s > 0 and s^2 < n".into()));
    }
    let radius = T::of(0.5) * (T::one() + (T::one() - s * s / nf).sqrt());
    Ok(Complex::from_polar(radius, alpha))
}

/// `T_n(z) = −i e^{iα} (n/s)(z − p_n)`.
pub fn rescale_map<T: Real>(n: usize, s: T, alpha: T, z: Complex<T>) -> Result<Complex<T>, PotentialError> {
    let p = induced_center(n, s, alpha)?;
    let rot = Complex::new(T::zero(), -T::one()) * Complex::from_polar(T::one(), alpha);
    Ok(rot * (z - p) * (T::of_usize(n) / s))
}
