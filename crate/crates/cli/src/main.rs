mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use coulomb2d::acceptance::{self, AcceptanceOptions, KNOWN_FAILURES};
use coulomb2d::diagnostics::{boundary_kernel, bulk_kernel, ward_equation_residual, BerezinSink, GridSpec, ResidualGrid, TestFunction, WardSink};
use coulomb2d::estimator::{lipschitz_modulus, overcrowd_tail, rescaled_exact_grid, rescaled_field, tail_is_gaussian_shaped, BBox, DensityField, DiscCounts, RescaleFrame};
use coulomb2d::oracle::radial_norms;
use coulomb2d::quadrature::{integrate, Tolerance};
use coulomb2d::sampler::{run_chains, write_sample_line, Recorder, RunParams};
use coulomb2d::thermal::{solve_thermal, ThermalOptions};
use coulomb2d::Point;

use config::{parse_config, ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "coulomb2d", version, about = "Two-dimensional Coulomb gas laboratory")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed; overrides the config. COULOMB2D_SEED is the fallback.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Droplet radii and radial profiles of Q, its Laplacian and Q_eff.
    Droplet,
    /// Run the sampler and write every retained configuration.
    Sample,
    /// Histogram estimate of the one-point function.
    Density,
    /// Exact one-point function at beta = 1 for radial potentials.
    Oracle,
    /// Ward statistic means with z-scores for bumps at the frames.
    Ward,
    /// Monte Carlo Berezin kernel at the first frame.
    Berezin,
    /// Rescaled profiles, Lipschitz moduli and reference-kernel residuals.
    Profiles,
    /// Thermal equilibrium density.
    Thermal,
    /// Exact beta = 1 density against n times the thermal density.
    Compare,
    /// Overcrowding tail of microscopic disc counts at the first frame.
    Overcrowd,
    /// The acceptance suite with a JSON scorecard.
    Acceptance {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Droplet => "droplet",
            Command::Sample => "sample",
            Command::Density => "density",
            Command::Oracle => "oracle",
            Command::Ward => "ward",
            Command::Berezin => "berezin",
            Command::Profiles => "profiles",
            Command::Thermal => "thermal",
            Command::Compare => "compare",
            Command::Overcrowd => "overcrowd",
            Command::Acceptance { .. } => "acceptance",
        }
    }
}

enum Failure {
    Config(String),
    Run(String),
}

impl<E: std::fmt::Display> From<(&'static str, E)> for Failure {
    fn from((module, e): (&'static str, E)) -> Self {
        Failure::Run(format!("{module}: {e}"))
    }
}

trait Ctx<T> {
    fn ctx(self, module: &'static str) -> Result<T, Failure>;
}

impl<T, E: std::fmt::Display> Ctx<T> for Result<T, E> {
    fn ctx(self, module: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Run(format!("{module}: {e}")))
    }
}

/// Writes artifacts and remembers their digests for the manifest.
struct Out {
    dir: PathBuf,
    artifacts: Vec<Value>,
}

impl Out {
    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).ctx("io")?;
        self.artifacts.push(json!({
            "file": name,
            "bytes": bytes.len(),
            "sha256": hex(&Sha256::digest(&bytes)),
        }));
        Ok(())
    }

    fn csv<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(&mut self, name: &str, f: F) -> Result<(), Failure> {
        let mut buf = Vec::new();
        f(&mut buf).ctx("io")?;
        self.write(name, buf)
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), Failure> {
        let mut s = serde_json::to_vec_pretty(v).ctx("io")?;
        s.push(b'\n');
        self.write(name, s)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Ctx2<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    out: Out,
}

impl Ctx2<'_> {
    fn params(&self) -> RunParams<f64> {
        RunParams {
            n: self.cfg.n,
            beta: self.cfg.beta,
            chains: self.cfg.chains,
            sweeps: self.cfg.sweeps,
            burnin: self.cfg.burnin,
            thin: self.cfg.thin,
            seed: self.seed,
            step_scale: 1.0,
        }
    }

    fn radial_points(&self) -> Vec<f64> {
        let (a, b) = (self.cfg.spec.sigma_inner(), self.cfg.spec.sigma_outer());
        let m = self.cfg.grids.radial;
        (0..=m).map(|i| if i == m { b } else { a + (b - a) * i as f64 / m as f64 }).collect()
    }

    /// Microscopic frame `u = √(n ∂∂̄Q(p))·(z − p)` about a frame point.
    fn frame(&self, p: Point) -> Result<RescaleFrame, Failure> {
        let lap = self.cfg.spec.laplacian_density(p).map_err(|e| Failure::Config(format!("frames: {p} is not usable: {e}")))?;
        Ok(RescaleFrame::new(p, self.cfg.n, lap))
    }
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn droplet(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let d = spec.radial_droplet();
    let rs = c.radial_points();
    c.out.csv("droplet.csv", |w| {
        writeln!(w, "r,q,laplacian,q_eff")?;
        for &r in &rs {
            let qe = if spec.is_hele_shaw() && r > 0.0 { spec.q_eff(Point::new(r, 0.0)).map(f).unwrap_or_default() } else { String::new() };
            writeln!(w, "{},{},{},{}", f(r), f(spec.radial(r)), f(spec.laplacian_radial(r)), qe)?;
        }
        Ok(())
    })?;
    c.out.json(
        "droplet.json",
        &json!({"r_in": d.r_in, "r_out": d.r_out, "hele_shaw": spec.is_hele_shaw(), "params": spec.params(), "wall_area": spec.wall_area()}),
    )?;
    Ok(true)
}

fn sample(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let (rec, summaries) = run_chains(&spec, &c.params(), |_| Recorder::default()).ctx("sampler")?;
    c.out.csv("samples.txt", |w| {
        for (chain, sweep, cfg) in &rec.records {
            write_sample_line(w, *chain, *sweep, cfg)?;
        }
        Ok(())
    })?;
    let chains: Vec<Value> = summaries
        .iter()
        .map(|s| json!({"chain": s.chain, "step_scale": s.step_scale, "acceptance_rate": s.acceptance_rate()}))
        .collect();
    c.out.json("chains.json", &json!({ "chains": chains, "configurations": rec.records.len() }))?;
    Ok(true)
}

fn density(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let bins = c.cfg.grids.bins;
    let (field, _) = run_chains(&spec, &c.params(), |_| DensityField::new(BBox::square(c.cfg.half()), bins, bins)).ctx("sampler")?;
    c.out.csv("density.csv", |w| field.write_csv(w))?;
    let (mass, se) = field.mass();
    c.out.json("density.json", &json!({"samples": field.samples, "mass": mass, "mass_stderr": se, "spill": field.spill}))?;
    Ok(true)
}

fn oracle(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let k = radial_norms(&spec, c.cfg.n).ctx("oracle")?;
    let rs = c.radial_points();
    c.out.csv("oracle.csv", |w| {
        writeln!(w, "r,density")?;
        for &r in &rs {
            writeln!(w, "{},{}", f(r), f(k.exact_r_radial(r)))?;
        }
        Ok(())
    })?;
    let d = spec.radial_droplet();
    let mut breaks = vec![spec.sigma_inner(), d.r_in, d.r_out, spec.sigma_outer()];
    breaks.retain(|&x| x >= spec.sigma_inner() && x <= spec.sigma_outer());
    breaks.dedup();
    let mass = integrate(|r: f64| 2.0 * r * k.exact_r_radial(r), &breaks, Tolerance::default()).ctx("quadrature")?;
    c.out.json(
        "oracle.json",
        &json!({"n": c.cfg.n, "mass": mass.value, "mass_error": mass.error, "max_rel_norm_error": k.max_rel_error(), "max_truncation_tail": k.max_truncation_tail()}),
    )?;
    Ok(true)
}

/// Bumps at the frames, as large as the wall margin allows up to radius ½.
fn bumps(c: &Ctx2) -> Result<Vec<TestFunction<f64>>, Failure> {
    let spec = c.cfg.spec;
    c.cfg
        .frames
        .iter()
        .map(|&p| {
            let mut room = spec.sigma_outer() - p.norm() - spec.eta0();
            if spec.sigma_inner() > 0.0 {
                room = room.min(p.norm() - spec.sigma_inner() - spec.eta0());
            }
            let radius = (0.999 * room).min(0.5);
            if radius <= 0.0 {
                return Err(Failure::Config(format!("frames: no room for a bump at {p}")));
            }
            TestFunction::new(p, radius).ctx("diagnostics")
        })
        .collect()
}

fn ward(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let fs = bumps(c)?;
    let beta = c.cfg.beta;
    let (sink, _) = run_chains(&spec, &c.params(), |_| WardSink::new(&spec, beta, &fs, 50).expect("bumps checked against the wall")).ctx("sampler")?;
    let results = sink.results();
    c.out.csv("ward.csv", |w| {
        writeln!(w, "center_x,center_y,radius,mean_re,mean_im,stderr_re,stderr_im,z_re,z_im")?;
        for r in &results {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                f(r.center.0),
                f(r.center.1),
                f(r.radius),
                f(r.mean.0),
                f(r.mean.1),
                f(r.stderr.0),
                f(r.stderr.1),
                f(r.z_score.0),
                f(r.z_score.1)
            )?;
        }
        Ok(())
    })?;
    let pass = results.iter().all(|r| r.max_abs_z() <= c.cfg.tolerances.z);
    c.out.json("ward.json", &json!({"passed": pass, "z_limit": c.cfg.tolerances.z, "results": results}))?;
    Ok(pass)
}

fn berezin(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let frame = c.frame(c.cfg.frames[0])?;
    let grid = GridSpec::centered(Point::new(0.0, 0.0), 0.5, 21);
    let (sink, _) = run_chains(&spec, &c.params(), |_| BerezinSink::new(frame, Point::new(0.0, 0.0), 0.5, grid, 100)).ctx("sampler")?;
    let field = sink.field().ctx("diagnostics")?;
    c.out.csv("berezin.csv", |w| field.write_csv(w))?;
    c.out.json(
        "berezin.json",
        &json!({
            "frame": [c.cfg.frames[0].re, c.cfg.frames[0].im],
            "integral": field.integral,
            "integral_stderr": field.integral_stderr,
            "anchor_density": field.anchor_density,
            "anchor_density_stderr": field.anchor_density_stderr,
            "anchor_hits": field.anchor_hits,
        }),
    )?;
    Ok(true)
}

fn profiles(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let k = radial_norms(&spec, c.cfg.n).ctx("oracle")?;
    let bins = c.cfg.grids.bins;
    let (field, _) = run_chains(&spec, &c.params(), |_| DensityField::new(BBox::square(c.cfg.half()), bins, bins)).ctx("sampler")?;
    let (origin, step, m) = (Point::new(-3.0, -3.0), 0.1, 61);
    let mut summary = Vec::new();
    for (i, &p) in c.cfg.frames.clone().iter().enumerate() {
        let frame = c.frame(p)?;
        let exact = rescaled_exact_grid(&k, &frame, origin, step, m, m);
        c.out.csv(&format!("profile_{i}_exact.csv"), |w| exact.write_csv(w))?;
        let exact_mod = lipschitz_modulus(&exact, |_| true, 0.5).ctx("estimator")?;
        // the histogram is used only where it resolves the microscopic scale
        let mc = match rescaled_field(&field, &frame, Point::new(-2.0, -2.0), 0.25, 17, 17) {
            Ok(g) => {
                c.out.csv(&format!("profile_{i}_mc.csv"), |w| g.write_csv(w))?;
                json!({"modulus": lipschitz_modulus(&g, |_| true, 0.5).ctx("estimator")?})
            }
            Err(e) => json!({"skipped": e.to_string()}),
        };
        summary.push(json!({"frame": [p.re, p.im], "exact_modulus_beta1": exact_mod, "mc": mc}));
    }
    let beta = c.cfg.beta;
    let grid = ResidualGrid {
        step: 0.1,
        half_width: 5.0,
        fd_step: 0.05,
    };
    let pts: Vec<Point> = (-4..=4).map(|i| Point::new(0.25 * i as f64, 0.0)).collect();
    let bulk = ward_equation_residual(|u, v| bulk_kernel(beta, u, v), beta, &pts, &grid);
    let edge = ward_equation_residual(|u, v| boundary_kernel(beta, u, v), beta, &pts, &grid);
    c.out.csv("residual.csv", |w| {
        writeln!(w, "re_u,bulk_re,bulk_im,boundary_re,boundary_im")?;
        for ((u, b), e) in pts.iter().zip(&bulk).zip(&edge) {
            writeln!(w, "{},{},{},{},{}", f(u.re), f(b.re), f(b.im), f(e.re), f(e.im))?;
        }
        Ok(())
    })?;
    c.out.json("profiles.json", &json!({ "frames": summary }))?;
    Ok(true)
}

fn thermal(c: &mut Ctx2) -> Result<bool, Failure> {
    let opts = ThermalOptions {
        cells: c.cfg.grids.radial,
        tol: c.cfg.tolerances.thermal,
        ..Default::default()
    };
    let (d, rep) = solve_thermal(&c.cfg.spec, c.cfg.n, c.cfg.beta, &opts).ctx("thermal")?;
    c.out.csv("thermal.csv", |w| d.write_csv(w))?;
    c.out.json("thermal.json", &serde_json::to_value(&rep).ctx("io")?)?;
    Ok(true)
}

fn compare(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let n = c.cfg.n;
    let nf = n as f64;
    let opts = ThermalOptions {
        cells: c.cfg.grids.radial,
        tol: c.cfg.tolerances.thermal,
        ..Default::default()
    };
    let (d, rep) = solve_thermal(&spec, n, 1.0, &opts).ctx("thermal")?;
    let k = radial_norms(&spec, n).ctx("oracle")?;
    let mut sup = 0.0f64;
    c.out.csv("compare.csv", |w| {
        writeln!(w, "r,oracle,thermal,gap,gap_over_n")?;
        for (r, lv) in d.radii.iter().zip(&d.log_values) {
            let (o, t) = (k.exact_r_radial(*r), nf * lv.exp());
            sup = sup.max((o - t).abs());
            writeln!(w, "{},{},{},{},{}", f(*r), f(o), f(t), f((o - t).abs()), f((o - t).abs() / nf))?;
        }
        Ok(())
    })?;
    let frames: Vec<Value> = c
        .cfg
        .frames
        .iter()
        .map(|p| {
            let r = p.norm();
            let lap = spec.laplacian_radial(r);
            json!({
                "frame": [p.re, p.im],
                "oracle_excess": k.exact_r_radial(r) - nf * lap,
                "thermal_excess": nf * d.value_at(r) - nf * lap,
                "log_laplacian_curvature": spec.log_laplacian_curvature(r),
            })
        })
        .collect();
    c.out.json("compare.json", &json!({"n": n, "sup_gap": sup, "sup_gap_over_n": sup / nf, "frames": frames, "solve": rep}))?;
    Ok(true)
}

fn overcrowd(c: &mut Ctx2) -> Result<bool, Failure> {
    let spec = c.cfg.spec;
    let p = c.cfg.frames[0];
    let lap = spec.laplacian_density(p).map_err(|e| Failure::Config(format!("frames: {p} is not usable: {e}")))?;
    let radius = 1.0 / (c.cfg.n as f64 * lap).sqrt();
    let (counts, _) = run_chains(&spec, &c.params(), |_| DiscCounts::new(p, radius)).ctx("sampler")?;
    let rep = overcrowd_tail(&counts.counts, c.cfg.n);
    c.out.csv("overcrowd.csv", |w| {
        writeln!(w, "m,prob,stderr")?;
        for t in &rep.points {
            writeln!(w, "{},{},{}", t.m, f(t.prob), f(t.stderr))?;
        }
        Ok(())
    })?;
    let shaped = tail_is_gaussian_shaped(&rep);
    c.out.json("overcrowd.json", &json!({"radius": radius, "samples": rep.samples, "fit": rep.fit, "decreasing_and_concave": shaped}))?;
    Ok(shaped)
}

fn run_acceptance(c: &mut Ctx2, only: &[usize], seed: Option<u64>) -> Result<bool, Failure> {
    let ids: Vec<usize> = if only.is_empty() { (1..=13).collect() } else { only.to_vec() };
    if let Some(bad) = ids.iter().find(|&&i| !(1..=13).contains(&i)) {
        return Err(Failure::Config(format!("--only: no criterion {bad}")));
    }
    let opts = seed.map_or_else(AcceptanceOptions::default, |seed| AcceptanceOptions { seed });
    let mut reports = Vec::new();
    for id in ids {
        let r = acceptance::run_criterion(id, &opts).ctx("acceptance")?;
        println!("{}", r.summary_line());
        reports.push(r);
    }
    let unexpected: Vec<String> = reports
        .iter()
        .flat_map(|r| r.unexpected_failures().into_iter().map(move |ch| format!("{}:{}", r.id, ch.name)))
        .collect();
    let known: Vec<Value> = KNOWN_FAILURES.iter().map(|(id, name, why)| json!({"criterion": id, "check": name, "reason": why})).collect();
    c.out.json(
        "acceptance.json",
        &json!({
            "seed": opts.seed,
            "all_passed": reports.iter().all(|r| r.passed),
            "unexpected_failures": unexpected,
            "known_failures": known,
            "criteria": reports,
        }),
    )?;
    Ok(unexpected.is_empty())
}

fn resolve_seed(flag: Option<u64>, cfg: Option<u64>) -> Result<Option<u64>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    if cfg.is_some() {
        return Ok(cfg);
    }
    match std::env::var("COULOMB2D_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure::Config(format!("COULOMB2D_SEED: expected an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let cfg = parse_config(&text).map_err(|errs| Failure::Config(errs.iter().map(ConfigError::to_string).collect::<Vec<_>>().join("\n")))?;
    let seed = resolve_seed(cli.seed, cfg.seed)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().ctx("threads")?;
    }
    fs::create_dir_all(&cli.out).ctx("io")?;
    let start = Instant::now();
    let mut c = Ctx2 {
        cfg: &cfg,
        seed: seed.unwrap_or(1),
        out: Out {
            dir: cli.out.clone(),
            artifacts: Vec::new(),
        },
    };
    let passed = match &cli.command {
        Command::Droplet => droplet(&mut c),
        Command::Sample => sample(&mut c),
        Command::Density => density(&mut c),
        Command::Oracle => oracle(&mut c),
        Command::Ward => ward(&mut c),
        Command::Berezin => berezin(&mut c),
        Command::Profiles => profiles(&mut c),
        Command::Thermal => thermal(&mut c),
        Command::Compare => compare(&mut c),
        Command::Overcrowd => overcrowd(&mut c),
        Command::Acceptance { only } => run_acceptance(&mut c, only, seed),
    }?;
    let manifest = json!({
        "subcommand": cli.command.name(),
        "seed": c.seed,
        "config": cli.config.as_deref().map(Path::display).map(|d| d.to_string()),
        "config_sha256": hex(&Sha256::digest(text.as_bytes())),
        "versions": {"coulomb2d": env!("CARGO_PKG_VERSION")},
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "passed": passed,
        "artifacts": c.out.artifacts,
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest).ctx("io")?;
    bytes.push(b'\n');
    fs::write(cli.out.join("manifest.json"), bytes).ctx("io")?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: assertion failed, see {}", cli.command.name(), cli.out.display());
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error:\n{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
