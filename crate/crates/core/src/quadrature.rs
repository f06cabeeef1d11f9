//! Adaptive Gauss–Kronrod integration on intervals and Gauss–Legendre rules
//! for tensor-product quadrature.

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not reach tolerance {tolerance:e}: estimate {value:e}, error {error:e} after {intervals} intervals")]
    NotConverged {
        value: f64,
        error: f64,
        tolerance: f64,
        intervals: usize,
    },
    #[error("integrand is not finite near x = {0}")]
    NonFinite(f64),
}

/// Integral estimate with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

// Kronrod 15-point abscissae and weights; the Gauss 7-point rule uses every other node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Result<(T, T), QuadratureError> {
    let half = T::of(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite(center.f64()));
    }
    let mut kronrod = fc * T::of(WGK[7]);
    let mut gauss = fc * T::of(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::of(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(QuadratureError::NonFinite((center + dx).f64()));
        }
        let s = f1 + f2;
        kronrod += T::of(WGK[j]) * s;
        if j % 2 == 1 {
            gauss += T::of(WG[j / 2]) * s;
        }
    }
    let value = kronrod * half_len;
    let error = ((kronrod - gauss) * half_len).abs();
    Ok((value, error))
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration of `f` over the
/// union of consecutive intervals given by `breaks` (sorted, at least two).
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    breaks: &[T],
    tol: Tolerance,
) -> Result<Estimate<T>, QuadratureError> {
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut pieces: Vec<(T, T, T, T)> = Vec::with_capacity(64);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = kronrod15(&mut f, w[0], w[1])?;
            pieces.push((w[0], w[1], v, e));
        }
    }
    loop {
        let total: T = pieces.iter().map(|p| p.2).sum();
        let err: T = pieces.iter().map(|p| p.3).sum();
        let target = tol.abs.max(tol.rel * total.f64().abs());
        if err.f64() <= target {
            return Ok(Estimate { value: total, error: err });
        }
        if pieces.len() >= tol.max_intervals {
            return Err(QuadratureError::NotConverged {
                value: total.f64(),
                error: err.f64(),
                tolerance: target,
                intervals: pieces.len(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (a, b, _, _) = pieces.swap_remove(worst);
        let mid = T::of(0.5) * (a + b);
        if mid <= a || mid >= b {
            // interval cannot be split further at this precision
            return Err(QuadratureError::NotConverged {
                value: total.f64(),
                error: err.f64(),
                tolerance: target,
                intervals: pieces.len(),
            });
        }
        let (v1, e1) = kronrod15(&mut f, a, mid)?;
        let (v2, e2) = kronrod15(&mut f, mid, b)?;
        pieces.push((a, mid, v1, e1));
        pieces.push((mid, b, v2, e2));
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..(m + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_m and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_rule(a: f64, b: f64, panels: usize, per_panel: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(per_panel);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}


/// Polynomial interpolant through Chebyshev points of the second kind,
/// evaluated in barycentric form.
#[derive(Debug, Clone)]
pub struct Chebyshev<T> {
    a: T,
    b: T,
    nodes: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> Chebyshev<T> {
    /// The `degree + 1` interpolation nodes on `[a, b]`, in increasing order.
    pub fn nodes(a: T, b: T, degree: usize) -> Vec<T> {
        let half = T::of(0.5);
        (0..=degree)
            .map(|j| {
                let x = -(T::PI() * T::of_usize(j) / T::of_usize(degree)).cos();
                half * (a + b) + half * (b - a) * x
            })
            .collect()
    }

    pub fn fit<F: FnMut(T) -> T>(a: T, b: T, degree: usize, mut f: F) -> Self {
        assert!(degree >= 1 && b > a);
        let nodes = Self::nodes(a, b, degree);
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self { a, b, nodes, values }
    }

    pub fn from_values(a: T, b: T, values: Vec<T>) -> Self {
        assert!(values.len() >= 2 && b > a);
        let nodes = Self::nodes(a, b, values.len() - 1);
        Self { a, b, nodes, values }
    }

    pub fn domain(&self) -> (T, T) {
        (self.a, self.b)
    }

    pub fn eval(&self, x: T) -> T {
        let m = self.nodes.len() - 1;
        let mut num = T::zero();
        let mut den = T::zero();
        for (j, (&xj, &fj)) in self.nodes.iter().zip(&self.values).enumerate() {
            let d = x - xj;
            if d == T::zero() {
                return fj;
            }
            let mut w = if j % 2 == 0 { T::one() } else { -T::one() };
            if j == 0 || j == m {
                w = w * T::of(0.5);
            }
            let t = w / d;
            num += t * fj;
            den += t;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_integrate_constants() {
        let s: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((s - 2.0).abs() < 1e-15);
        let g: f64 = 2.0 * (WG[0] + WG[1] + WG[2]) + WG[3];
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_gaussian_to_tight_tolerance() {
        let est = integrate(|x: f64| (-x * x).exp(), &[-8.0, 0.0, 8.0], Tolerance::default()).unwrap();
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn integrates_in_single_precision() {
        let tol = Tolerance { abs: 1e-6, rel: 1e-5, max_intervals: 200 };
        let est = integrate(|x: f32| x.sin(), &[0.0, std::f32::consts::PI], tol).unwrap();
        assert!((est.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn reports_non_finite_integrand() {
        let r = integrate(|x: f64| 1.0 / x, &[0.0, 1.0], Tolerance::default());
        assert!(r.is_err());
        let r = integrate(|_x: f64| f64::NAN, &[0.0, 1.0], Tolerance::default());
        assert!(matches!(r, Err(QuadratureError::NonFinite(_))));
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for m in [1usize, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(m);
            let deg = 2 * m - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            // \int_{-1}^1 x^{deg-1} dx, deg-1 even
            let exact = 2.0 / deg as f64;
            assert!((s - exact).abs() < 1e-13, "m = {m}: {s} vs {exact}");
        }
    }

    #[test]
    fn composite_rule_integrates_exponential() {
        let s: f64 = composite_rule(0.0, 2.0, 4, 10).iter().map(|(x, w)| w * x.exp()).sum();
        assert!((s - (2.0_f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn chebyshev_interpolates_smooth_functions_spectrally() {
        let c = Chebyshev::fit(0.0, 2.0, 40, |x: f64| (-x * x).exp() * x.cos());
        for i in 0..=50 {
            let x = 2.0 * i as f64 / 50.0 + 1e-3 * (i % 3) as f64;
            let x = x.min(2.0);
            assert!((c.eval(x) - (-x * x).exp() * x.cos()).abs() < 1e-13, "x = {x}");
        }
        assert_eq!(c.eval(0.0), 1.0);
    }
}
