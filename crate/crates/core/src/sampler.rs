//! Metropolis sampling of the Gibbs measure `e^{−βH_n}` with systematic-scan
//! single-particle Gaussian moves and independent, reproducible chains.

use std::io::{self, Write};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::potential::PotentialSpec;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
}

/// An ordered list of particle positions.
pub type Configuration<T> = Vec<Complex<T>>;

/// `H_n = Σ_{i≠j} log(1/|z_i − z_j|) + n Σ_i Q(z_i)`, each unordered pair
/// counted twice; `+∞` if a point is outside `Σ` or two points coincide.
pub fn hamiltonian<T: Real>(spec: &PotentialSpec<T>, points: &[Complex<T>]) -> T {
    let n = points.len();
    let mut ext = T::zero();
    for z in points {
        ext += spec.eval_q(*z);
    }
    if !ext.is_finite() {
        return T::infinity();
    }
    let mut pair = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let d2 = (points[i] - points[j]).norm_sqr();
            if d2 == T::zero() {
                return T::infinity();
            }
            // 2 log(1/d) = −log d²
            pair -= d2.ln();
        }
    }
    pair + T::of_usize(n) * ext
}

/// `log Π_{i≠j} |new − z_i|² / |old − z_i|²`, multiplying squared distances in
/// chunks of [`Real::PRODUCT_CHUNK`] and taking one logarithm per chunk.
fn pair_log_ratio<T: Real>(points: &[Complex<T>], j: usize, old: Complex<T>, new: Complex<T>) -> T {
    let big = T::max_value().sqrt().sqrt();
    let small = big.recip();
    let mut logs = T::zero();
    let mut ratio = T::one();
    let mut pn = T::one();
    let mut po = T::one();
    let mut in_chunk = 0usize;
    let mut start = 0usize;
    let flush = |pn: T, po: T, start: usize, end: usize, ratio: &mut T, logs: &mut T| {
        if pn > T::zero() && po > T::zero() && pn.is_finite() && po.is_finite() {
            *ratio *= pn / po;
            if !(*ratio > small && *ratio < big) {
                *logs += ratio.ln();
                *ratio = T::one();
            }
        } else {
            // underflow, overflow or a coincidence: fall back to one log per term
            for (i, z) in points[start..end].iter().enumerate() {
                if start + i != j {
                    *logs += ((new - *z).norm_sqr() / (old - *z).norm_sqr()).ln();
                }
            }
        }
    };
    for (i, z) in points.iter().enumerate() {
        if i == j {
            continue;
        }
        pn *= (new - *z).norm_sqr();
        po *= (old - *z).norm_sqr();
        in_chunk += 1;
        if in_chunk == T::PRODUCT_CHUNK {
            flush(pn, po, start, i + 1, &mut ratio, &mut logs);
            pn = T::one();
            po = T::one();
            in_chunk = 0;
            start = i + 1;
        }
    }
    if in_chunk > 0 {
        flush(pn, po, start, points.len(), &mut ratio, &mut logs);
    }
    logs + ratio.ln()
}

/// `H_n` after moving particle `j` to `z_new`, minus `H_n` before, in `O(n)`.
pub fn delta_energy<T: Real>(spec: &PotentialSpec<T>, points: &[Complex<T>], j: usize, z_new: Complex<T>) -> T {
    let q_new = spec.eval_q(z_new);
    if !q_new.is_finite() {
        return T::infinity();
    }
    let old = points[j];
    if old == z_new {
        return T::zero();
    }
    let q_old = spec.eval_q(old);
    T::of_usize(points.len()) * (q_new - q_old) - pair_log_ratio(points, j, old, z_new)
}

/// 32-bit words reserved per (sweep, particle) slot of the random stream.
const WORDS_PER_MOVE: u128 = 8;

/// Random numbers addressed by `(seed, chain, sweep, particle)`: the seed fixes
/// the ChaCha key, the chain selects the stream, and each move reads a fixed
/// block of words. Sweep 0 is reserved for initialization.
#[derive(Debug, Clone)]
pub struct CounterRng {
    rng: ChaCha8Rng,
    particles: u128,
}

impl CounterRng {
    pub fn new(seed: u64, chain: u64, particles: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain);
        Self {
            rng,
            particles: particles as u128,
        }
    }

    pub fn seek(&mut self, sweep: u64, particle: usize) {
        let slot = sweep as u128 * self.particles + particle as u128;
        self.rng.set_word_pos(slot * WORDS_PER_MOVE);
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Two independent standard normals (Box–Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        (r * c, r * s)
    }
}

/// A Markov chain: configuration, temperature, proposal scale, random stream
/// and acceptance counters.
#[derive(Debug, Clone)]
pub struct ChainState<T> {
    pub config: Configuration<T>,
    pub beta: T,
    pub step_scale: T,
    pub rng: CounterRng,
    pub accepted: u64,
    pub proposed: u64,
    pub chain: u64,
    pub sweep: u64,
}

impl<T: Real> ChainState<T> {
    /// Points drawn uniformly (in area) on the droplet annulus.
    pub fn new(spec: &PotentialSpec<T>, n: usize, beta: T, step_scale: T, seed: u64, chain: u64) -> Self {
        let mut rng = CounterRng::new(seed, chain, n);
        let d = spec.radial_droplet();
        let (a2, b2) = (d.r_in.f64().powi(2), d.r_out.f64().powi(2));
        let config = (0..n)
            .map(|i| {
                rng.seek(0, i);
                let r = (a2 + rng.uniform() * (b2 - a2)).sqrt();
                let t = 2.0 * std::f64::consts::PI * rng.uniform();
                Complex::new(T::of(r * t.cos()), T::of(r * t.sin()))
            })
            .collect();
        Self {
            config,
            beta,
            step_scale,
            rng,
            accepted: 0,
            proposed: 0,
            chain,
            sweep: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One Metropolis move of particle `j` with per-coordinate standard deviation `scale`.
pub fn mh_move<T: Real>(spec: &PotentialSpec<T>, chain: &mut ChainState<T>, j: usize, scale: T) -> bool {
    chain.rng.seek(chain.sweep, j);
    let (g1, g2) = chain.rng.normal_pair();
    let u = chain.rng.uniform();
    let z_new = chain.config[j] + Complex::new(T::of(g1), T::of(g2)) * scale;
    let dh = delta_energy(spec, &chain.config, j, z_new);
    chain.proposed += 1;
    // dh = +∞ (wall, coincidence) and NaN are rejected
    let accept = dh <= T::zero() || (u < (-chain.beta * dh).exp().f64());
    if accept {
        chain.config[j] = z_new;
        chain.accepted += 1;
    }
    accept
}

/// One sweep: `n` systematic-scan proposals with scale `step_scale/√(nΔ)`.
pub fn mh_step<T: Real>(spec: &PotentialSpec<T>, chain: &mut ChainState<T>) {
    chain.sweep += 1;
    let n = chain.config.len();
    let scale = chain.step_scale / (T::of_usize(n) * spec.delta()).sqrt();
    for j in 0..n {
        mh_move(spec, chain, j, scale);
    }
}

/// Receives the retained configurations of one chain; partial results of
/// different chains are merged in chain order.
pub trait SampleSink<T>: Send {
    fn observe(&mut self, chain: u64, sweep: u64, config: &[Complex<T>]);
    fn merge(&mut self, other: Self)
    where
        Self: Sized;
}

/// Keeps every retained configuration in memory.
#[derive(Debug, Clone, Default)]
pub struct Recorder<T> {
    pub records: Vec<(u64, u64, Configuration<T>)>,
}

impl<T: Real> SampleSink<T> for Recorder<T> {
    fn observe(&mut self, chain: u64, sweep: u64, config: &[Complex<T>]) {
        self.records.push((chain, sweep, config.to_vec()));
    }

    fn merge(&mut self, other: Self) {
        self.records.extend(other.records);
    }
}

impl<T: Real, A: SampleSink<T>, B: SampleSink<T>> SampleSink<T> for (A, B) {
    fn observe(&mut self, chain: u64, sweep: u64, config: &[Complex<T>]) {
        self.0.observe(chain, sweep, config);
        self.1.observe(chain, sweep, config);
    }

    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

/// Writes one line `chain_id sweep x1 y1 x2 y2 …`.
pub fn write_sample_line<T: Real, W: Write>(w: &mut W, chain: u64, sweep: u64, config: &[Complex<T>]) -> io::Result<()> {
    write!(w, "{chain} {sweep}")?;
    for z in config {
        write!(w, " {:.16e} {:.16e}", z.re.f64(), z.im.f64())?;
    }
    writeln!(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams<T> {
    pub n: usize,
    pub beta: T,
    pub chains: usize,
    /// Total sweeps per chain, burn-in included.
    pub sweeps: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Initial proposal scale in units of `1/√(nΔ)`.
    pub step_scale: T,
}

impl<T: Real> RunParams<T> {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let mut bad = Vec::new();
        if self.n == 0 {
            bad.push("n must be at least 1");
        }
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            bad.push("beta must be positive and finite");
        }
        if self.chains == 0 {
            bad.push("chains must be at least 1");
        }
        if self.sweeps <= self.burnin {
            bad.push("sweeps must exceed burnin");
        }
        if self.thin == 0 {
            bad.push("thin must be at least 1");
        }
        if !(self.step_scale > T::zero()) {
            bad.push("step_scale must be positive");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SamplerError::Config(bad.join("; ")))
        }
    }

    /// Retained configurations per chain.
    pub fn retained(&self) -> usize {
        (self.sweeps - self.burnin).div_ceil(self.thin)
    }
}

/// Per-chain statistics of the production phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSummary {
    pub chain: u64,
    pub step_scale: f64,
    pub accepted: u64,
    pub proposed: u64,
}

impl ChainSummary {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }
}

/// Sweeps between step-scale updates during burn-in.
const ADAPT_EVERY: u64 = 10;

/// Runs one chain to completion, feeding retained configurations to `sink`.
pub fn run_chain<T: Real, S: SampleSink<T>>(spec: &PotentialSpec<T>, p: &RunParams<T>, chain_id: u64, sink: &mut S) -> ChainSummary {
    let mut chain = ChainState::new(spec, p.n, p.beta, p.step_scale, p.seed, chain_id);
    let (mut acc0, mut prop0) = (0, 0);
    for s in 1..=p.sweeps as u64 {
        mh_step(spec, &mut chain);
        if s <= p.burnin as u64 {
            if s % ADAPT_EVERY == 0 {
                let rate = (chain.accepted - acc0) as f64 / (chain.proposed - prop0).max(1) as f64;
                if rate < 0.3 {
                    chain.step_scale *= T::of(0.9);
                } else if rate > 0.6 {
                    chain.step_scale *= T::of(1.1);
                }
                acc0 = chain.accepted;
                prop0 = chain.proposed;
            }
            if s == p.burnin as u64 {
                chain.accepted = 0;
                chain.proposed = 0;
            }
        } else if (s - p.burnin as u64 - 1) % p.thin as u64 == 0 {
            sink.observe(chain_id, s, &chain.config);
        }
    }
    ChainSummary {
        chain: chain_id,
        step_scale: chain.step_scale.f64(),
        accepted: chain.accepted,
        proposed: chain.proposed,
    }
}

/// Runs `chains` independent chains in parallel. Each chain gets a sink from
/// `make_sink`; the sinks are merged in chain order, so the result depends only
/// on the parameters.
pub fn run_chains<T, S, F>(spec: &PotentialSpec<T>, p: &RunParams<T>, make_sink: F) -> Result<(S, Vec<ChainSummary>), SamplerError>
where
    T: Real,
    S: SampleSink<T>,
    F: Fn(u64) -> S + Sync,
{
    p.validate()?;
    let mut parts: Vec<(S, ChainSummary)> = (0..p.chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut sink = make_sink(c);
            let summary = run_chain(spec, p, c, &mut sink);
            (sink, summary)
        })
        .collect();
    let mut summaries = Vec::with_capacity(parts.len());
    let rest = parts.split_off(1);
    let (mut acc, first) = parts.pop().unwrap();
    summaries.push(first);
    for (s, summary) in rest {
        acc.merge(s);
        summaries.push(summary);
    }
    Ok((acc, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OneParticleGibbs;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn ginibre() -> PotentialSpec<f64> {
        PotentialSpec::ginibre()
    }

    fn params(n: usize, beta: f64, sweeps: usize, seed: u64) -> RunParams<f64> {
        RunParams {
            n,
            beta,
            chains: 2,
            sweeps,
            burnin: sweeps / 10,
            thin: 1,
            seed,
            step_scale: 1.0,
        }
    }

    #[test]
    fn two_point_hamiltonian() {
        let s = ginibre();
        assert_eq!(hamiltonian(&s, &[C::new(0.0, 0.0), C::new(1.0, 0.0)]), 2.0);
        assert_eq!(hamiltonian(&s, &[C::new(0.0, 0.0), C::new(2.5, 0.0)]), f64::INFINITY);
        assert_eq!(hamiltonian(&s, &[C::new(0.3, 0.4)]), 0.25);
        assert_eq!(hamiltonian(&s, &[C::new(0.3, 0.4), C::new(0.3, 0.4)]), f64::INFINITY);
    }

    #[test]
    fn delta_energy_edge_cases() {
        let s = ginibre();
        let pts = [C::new(0.1, 0.0), C::new(-0.5, 0.2)];
        assert_eq!(delta_energy(&s, &pts, 0, pts[0]), 0.0);
        assert_eq!(delta_energy(&s, &pts, 0, C::new(0.0, 2.01)), f64::INFINITY);
        assert_eq!(delta_energy(&s, &pts, 0, pts[1]), f64::INFINITY);
    }

    fn points_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0..1.9f64, 0.0..std::f64::consts::TAU), n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn delta_energy_matches_recomputation(
            pts in points_strategy(5),
            j in 0usize..5,
            mv in (0.0..1.9f64, 0.0..std::f64::consts::TAU),
        ) {
            let s = ginibre();
            let mut z: Vec<C> = pts.iter().map(|&(r, t)| C::from_polar(r, t)).collect();
            let before = hamiltonian(&s, &z);
            let new = C::from_polar(mv.0, mv.1);
            let d = delta_energy(&s, &z, j, new);
            z[j] = new;
            let after = hamiltonian(&s, &z);
            prop_assert!((d - (after - before)).abs() <= 1e-9 * (1.0 + after.abs() + before.abs()));
        }

        #[test]
        fn chunked_products_agree_with_term_logs(
            pts in points_strategy(40),
            mv in (0.0..1.9f64, 0.0..std::f64::consts::TAU),
        ) {
            let z: Vec<C> = pts.iter().map(|&(r, t)| C::from_polar(r, t)).collect();
            let new = C::from_polar(mv.0, mv.1);
            let direct: f64 = z.iter().skip(1).map(|w| ((new - w).norm_sqr() / (z[0] - w).norm_sqr()).ln()).sum();
            let chunked = pair_log_ratio(&z, 0, z[0], new);
            prop_assert!((direct - chunked).abs() < 1e-10 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn chunked_products_survive_extreme_distances() {
        // near-coincident points drive the chunk product below the normal range
        let mut z: Vec<C> = (0..64).map(|k| C::new(1e-60 * k as f64, 0.0)).collect();
        z[0] = C::new(1.0, 0.0);
        let new = C::new(0.5, 0.0);
        let direct: f64 = z.iter().skip(1).map(|w| ((new - w).norm_sqr() / (z[0] - w).norm_sqr()).ln()).sum();
        assert!((pair_log_ratio(&z, 0, z[0], new) - direct).abs() < 1e-10);
        let zf: Vec<Complex<f32>> = z.iter().map(|w| Complex::new(w.re as f32, w.im as f32)).collect();
        let got = pair_log_ratio(&zf, 0, zf[0], Complex::new(0.5f32, 0.0)) as f64;
        assert!((got - direct).abs() < 1e-3, "{got} vs {direct}");
    }

    #[test]
    fn hard_wall_is_never_crossed() {
        let s = ginibre();
        let p = RunParams {
            step_scale: 20.0,
            ..params(16, 1.0, 400, 3)
        };
        let (rec, _) = run_chains(&s, &p, |_| Recorder::default()).unwrap();
        assert!(!rec.records.is_empty());
        for (_, _, cfg) in &rec.records {
            assert!(cfg.iter().all(|z| z.norm() <= 2.0));
        }
    }

    #[test]
    fn runs_are_reproducible_and_seed_dependent() {
        let s = ginibre();
        let a = run_chains(&s, &params(8, 1.0, 200, 11), |_| Recorder::default()).unwrap();
        let b = run_chains(&s, &params(8, 1.0, 200, 11), |_| Recorder::default()).unwrap();
        let c = run_chains(&s, &params(8, 1.0, 200, 12), |_| Recorder::default()).unwrap();
        assert_eq!(a.0.records, b.0.records);
        assert_eq!(a.1, b.1);
        assert_ne!(a.0.records, c.0.records);
        // emission order: chain 0 first, sweeps increasing
        let order: Vec<(u64, u64)> = a.0.records.iter().map(|r| (r.0, r.1)).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
        assert_eq!(a.0.records.len(), 2 * params(8, 1.0, 200, 11).retained());
    }

    #[test]
    fn near_zero_beta_accepts_almost_everything() {
        let s = ginibre();
        // small moves so that the hard wall is rarely hit
        let p = RunParams {
            burnin: 1,
            step_scale: 0.02,
            ..params(8, 1e-6, 500, 5)
        };
        let (_, sums) = run_chains(&s, &p, |_| Recorder::<f64>::default()).unwrap();
        for c in sums {
            assert!(c.acceptance_rate() > 0.99, "{}", c.acceptance_rate());
        }
    }

    #[test]
    fn burn_in_adapts_toward_target_acceptance() {
        let s = ginibre();
        let p = RunParams {
            step_scale: 10.0,
            ..params(16, 1.0, 2000, 9)
        };
        let (_, sums) = run_chains(&s, &p, |_| Recorder::<f64>::default()).unwrap();
        for c in sums {
            let r = c.acceptance_rate();
            assert!((0.2..=0.7).contains(&r), "{r}");
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        let s = ginibre();
        let bad = RunParams {
            sweeps: 10,
            burnin: 10,
            ..params(4, -1.0, 10, 0)
        };
        let err = run_chains(&s, &bad, |_| Recorder::<f64>::default()).unwrap_err();
        let SamplerError::Config(msg) = err;
        assert!(msg.contains("beta") && msg.contains("burnin"));
    }

    #[test]
    fn detailed_balance_for_a_frozen_pair() {
        // particle 0 moves among two fixed particles; flows between two
        // regions must balance in the stationary chain
        let s = ginibre();
        let mut chain = ChainState::new(&s, 3, 1.0, 1.0, 77, 0);
        chain.config = vec![C::new(0.0, 0.0), C::new(0.5, 0.0), C::new(-0.5, 0.0)];
        let region = |z: C| {
            if z.im > 0.2 && z.re.abs() < 0.5 {
                Some(0)
            } else if z.im < -0.2 && z.re.abs() < 0.5 {
                Some(1)
            } else {
                None
            }
        };
        let (mut ab, mut ba) = (0u64, 0u64);
        for _ in 0..400_000 {
            chain.sweep += 1;
            let before = region(chain.config[0]);
            mh_move(&s, &mut chain, 0, 0.6);
            match (before, region(chain.config[0])) {
                (Some(0), Some(1)) => ab += 1,
                (Some(1), Some(0)) => ba += 1,
                _ => {}
            }
        }
        let (a, b) = (ab as f64, ba as f64);
        assert!(a > 1000.0 && b > 1000.0);
        assert!((a - b).abs() < 4.0 * (a + b).sqrt(), "{ab} vs {ba}");
    }

    /// Radial histogram of all emitted points against a density in `dA`.
    struct RadialHist {
        edges: Vec<f64>,
        counts: Vec<u64>,
        total: u64,
        first_only: bool,
    }

    impl SampleSink<f64> for RadialHist {
        fn observe(&mut self, _c: u64, _s: u64, config: &[C]) {
            let pts = if self.first_only { &config[..1] } else { config };
            for z in pts {
                let r = z.norm();
                if let Some(k) = self.edges.windows(2).position(|w| r >= w[0] && r < w[1]) {
                    self.counts[k] += 1;
                }
            }
            self.total += 1;
        }
        fn merge(&mut self, o: Self) {
            for (a, b) in self.counts.iter_mut().zip(o.counts) {
                *a += b;
            }
            self.total += o.total;
        }
    }

    fn radial_hist(first_only: bool) -> RadialHist {
        let edges: Vec<f64> = (0..=10).map(|k| 0.15 * k as f64).collect();
        RadialHist {
            counts: vec![0; edges.len() - 1],
            edges,
            total: 0,
            first_only,
        }
    }

    #[test]
    fn one_particle_density_matches_gibbs_weight() {
        let s = ginibre();
        let beta = 2.0;
        let p = RunParams {
            n: 1,
            beta,
            chains: 4,
            sweeps: 252_000,
            burnin: 2000,
            thin: 1,
            seed: 2024,
            step_scale: 1.0,
        };
        let (h, _) = run_chains(&s, &p, |_| radial_hist(false)).unwrap();
        assert_eq!(h.total, 1_000_000);
        let g = OneParticleGibbs::new(&s, beta).unwrap();
        for (k, w) in h.edges.windows(2).enumerate() {
            let mass: f64 = crate::quadrature::composite_rule(w[0], w[1], 2, 10)
                .iter()
                .map(|(r, wt)| wt * 2.0 * r * g.density_radial(*r))
                .sum();
            let est = h.counts[k] as f64 / h.total as f64;
            assert!((est / mass - 1.0).abs() < 0.05, "bin {k}: {est} vs {mass}");
        }
    }

    #[test]
    fn exchangeability_of_coordinates() {
        let s = ginibre();
        let p = RunParams {
            chains: 4,
            ..params(6, 1.0, 40_000, 8)
        };
        let (all, _) = run_chains(&s, &p, |_| radial_hist(false)).unwrap();
        let (first, _) = run_chains(&s, &p, |_| radial_hist(true)).unwrap();
        let n = 6.0;
        for k in 0..7 {
            let pa = all.counts[k] as f64 / (all.total as f64 * n);
            let pf = first.counts[k] as f64 / first.total as f64;
            // correlated samples: allow a generous multiple of the iid error
            let se = (pf * (1.0 - pf) / first.total as f64).sqrt();
            assert!((pa - pf).abs() < 8.0 * se + 1e-3, "bin {k}: {pa} vs {pf}");
        }
    }
}
