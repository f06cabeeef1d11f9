//! Flat `key = value` run configuration with `#` comments.

use std::fmt;

use coulomb2d::{Point, PotentialParams, PotentialSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, 0 when the problem is not tied to one line.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.key, self.message)
        } else {
            write!(f, "line {}: {}: {}", self.line, self.key, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Ginibre,
    Induced,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grids {
    /// Histogram bins per side.
    pub bins: usize,
    /// Half-width of the histogram box; defaults to the outer wall radius.
    pub half: Option<f64>,
    /// Cells of radial grids (oracle profiles, thermal solver).
    pub radial: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Thermal residual tolerance.
    pub thermal: f64,
    /// Largest accepted |z-score| for Monte Carlo verdicts.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: PotentialKind,
    pub spec: PotentialSpec,
    pub induced_s: Option<f64>,
    pub n: usize,
    pub beta: f64,
    pub chains: usize,
    pub sweeps: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: Option<u64>,
    pub grids: Grids,
    pub frames: Vec<Point>,
    pub tolerances: Tolerances,
}

const KEYS: [&str; 18] = [
    "potential.kind",
    "potential.delta",
    "potential.log_coef",
    "potential.quartic_coef",
    "potential.const",
    "potential.sigma_outer",
    "potential.sigma_inner",
    "induced.s",
    "n",
    "beta",
    "chains",
    "sweeps",
    "burnin",
    "thin",
    "seed",
    "grids",
    "frames",
    "tolerances",
];

struct Parser {
    errors: Vec<ConfigError>,
}

impl Parser {
    fn err(&mut self, line: usize, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn float(&mut self, line: usize, key: &str, v: &str) -> Option<f64> {
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.err(line, key, format!("expected a finite number, got `{v}`"));
                None
            }
        }
    }

    fn uint(&mut self, line: usize, key: &str, v: &str) -> Option<u64> {
        match v.parse::<u64>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.err(line, key, format!("expected a nonnegative integer, got `{v}`"));
                None
            }
        }
    }
}

/// `name:value` items separated by commas.
fn items(v: &str) -> Vec<(&str, &str)> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.split_once(':') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s, ""),
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let mut p = Parser { errors: Vec::new() };
    let mut seen: Vec<(String, usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            p.err(line, body, "expected `key = value`");
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || !KEYS.contains(&k) {
            p.err(line, k, "unknown key");
            continue;
        }
        if let Some((_, first, _)) = seen.iter().find(|(key, _, _)| key == k) {
            let msg = format!("duplicate key, first set on line {first}");
            p.err(line, k, msg);
            continue;
        }
        seen.push((k.to_string(), line, v.to_string()));
    }
    let get = |k: &str| seen.iter().find(|(key, _, _)| key == k).map(|(_, l, v)| (*l, v.clone()));

    let kind_line = get("potential.kind").map_or(0, |x| x.0);
    let kind = match get("potential.kind") {
        None => PotentialKind::Ginibre,
        Some((l, v)) => match v.as_str() {
            "ginibre" => PotentialKind::Ginibre,
            "induced" => PotentialKind::Induced,
            "radial" => PotentialKind::Radial,
            other => {
                p.err(l, "potential.kind", format!("expected ginibre, induced or radial, got `{other}`"));
                PotentialKind::Ginibre
            }
        },
    };

    let uint_key = |p: &mut Parser, k: &str, default: u64, min: u64| -> u64 {
        match get(k) {
            None => default,
            Some((l, v)) => match p.uint(l, k, &v) {
                Some(x) if x >= min => x,
                Some(x) => {
                    p.err(l, k, format!("must be at least {min}, got {x}"));
                    default
                }
                None => default,
            },
        }
    };
    let n = uint_key(&mut p, "n", 32, 1) as usize;
    let chains = uint_key(&mut p, "chains", 4, 1) as usize;
    let sweeps = uint_key(&mut p, "sweeps", 5000, 1) as usize;
    let burnin = uint_key(&mut p, "burnin", 1000, 0) as usize;
    let thin = uint_key(&mut p, "thin", 1, 1) as usize;
    if sweeps <= burnin {
        let l = get("sweeps").or(get("burnin")).map_or(0, |x| x.0);
        p.err(l, "sweeps", format!("must exceed burnin ({sweeps} <= {burnin})"));
    }
    let seed = get("seed").and_then(|(l, v)| p.uint(l, "seed", &v));
    let beta = match get("beta") {
        None => 1.0,
        Some((l, v)) => match p.float(l, "beta", &v) {
            Some(b) if b > 0.0 => b,
            Some(b) => {
                p.err(l, "beta", format!("must be positive, got {b}"));
                1.0
            }
            None => 1.0,
        },
    };

    let coef_keys = [
        "potential.delta",
        "potential.log_coef",
        "potential.quartic_coef",
        "potential.const",
        "potential.sigma_outer",
        "potential.sigma_inner",
    ];
    let coef = |p: &mut Parser, k: &str| get(k).and_then(|(l, v)| p.float(l, k, &v));
    let s_value = get("induced.s").and_then(|(l, v)| p.float(l, "induced.s", &v));
    let spec = match kind {
        PotentialKind::Induced => {
            for k in coef_keys {
                if let Some((l, _)) = get(k) {
                    p.err(l, k, "not allowed with potential.kind = induced; the coefficients follow from n and induced.s");
                }
            }
            match s_value {
                None => {
                    if get("induced.s").is_none() {
                        p.err(kind_line, "induced.s", "required with potential.kind = induced");
                    }
                    None
                }
                Some(s) => match PotentialSpec::induced(n, s) {
                    Ok(spec) => Some(spec),
                    Err(e) => {
                        let l = get("induced.s").map_or(0, |x| x.0);
                        p.err(l, "induced.s", e.to_string());
                        None
                    }
                },
            }
        }
        PotentialKind::Ginibre | PotentialKind::Radial => {
            if let Some((l, _)) = get("induced.s") {
                p.err(l, "induced.s", "only used with potential.kind = induced");
            }
            if kind == PotentialKind::Ginibre {
                for k in &coef_keys[..4] {
                    if let Some((l, _)) = get(k) {
                        p.err(l, k, "not allowed with potential.kind = ginibre; use potential.kind = radial");
                    }
                }
            }
            let mut params = PotentialParams::ginibre();
            let fields: [(&str, &mut f64); 6] = [
                ("potential.delta", &mut params.delta),
                ("potential.log_coef", &mut params.log_coef),
                ("potential.quartic_coef", &mut params.quartic_coef),
                ("potential.const", &mut params.const_term),
                ("potential.sigma_outer", &mut params.sigma_outer),
                ("potential.sigma_inner", &mut params.sigma_inner),
            ];
            for (k, slot) in fields {
                if let Some(x) = coef(&mut p, k) {
                    *slot = x;
                }
            }
            build_radial(params).map_err(|e| p.err(kind_line, "potential", e)).ok()
        }
    };

    let mut grids = Grids {
        bins: 64,
        half: None,
        radial: 4096,
    };
    if let Some((l, v)) = get("grids") {
        for (name, val) in items(&v) {
            match name {
                "bins" => match p.uint(l, "grids.bins", val) {
                    Some(b) if b >= 1 => grids.bins = b as usize,
                    Some(_) => p.err(l, "grids.bins", "must be at least 1"),
                    None => {}
                },
                "half" => match p.float(l, "grids.half", val) {
                    Some(h) if h > 0.0 => grids.half = Some(h),
                    Some(_) => p.err(l, "grids.half", "must be positive"),
                    None => {}
                },
                "radial" => match p.uint(l, "grids.radial", val) {
                    Some(r) if r >= 8 => grids.radial = r as usize,
                    Some(_) => p.err(l, "grids.radial", "must be at least 8"),
                    None => {}
                },
                other => p.err(l, "grids", format!("unknown item `{other}`; expected bins, half or radial")),
            }
        }
    }

    let mut frames = Vec::new();
    match get("frames") {
        None => {}
        Some((l, v)) => {
            for item in v.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let parts: Vec<&str> = item.split(':').map(str::trim).collect();
                match parts.as_slice() {
                    [x, y] => {
                        if let (Some(x), Some(y)) = (p.float(l, "frames", x), p.float(l, "frames", y)) {
                            frames.push(Point::new(x, y));
                        }
                    }
                    _ => p.err(l, "frames", format!("expected `x:y` items separated by `;`, got `{item}`")),
                }
            }
        }
    }
    if frames.is_empty() {
        if let Some(spec) = &spec {
            frames.push(Point::new(0.5 * (spec.radial_droplet().r_in + spec.radial_droplet().r_out), 0.0));
            frames.push(Point::new(spec.radial_droplet().r_out, 0.0));
        }
    }

    let mut tolerances = Tolerances { thermal: 1e-5, z: 3.0 };
    if let Some((l, v)) = get("tolerances") {
        for (name, val) in items(&v) {
            let slot = match name {
                "thermal" => &mut tolerances.thermal,
                "z" => &mut tolerances.z,
                other => {
                    p.err(l, "tolerances", format!("unknown item `{other}`; expected thermal or z"));
                    continue;
                }
            };
            match p.float(l, &format!("tolerances.{name}"), val) {
                Some(x) if x > 0.0 => *slot = x,
                Some(_) => p.err(l, &format!("tolerances.{name}"), "must be positive"),
                None => {}
            }
        }
    }

    if !p.errors.is_empty() {
        p.errors.sort_by_key(|e| e.line);
        return Err(p.errors);
    }
    Ok(RunConfig {
        kind,
        spec: spec.expect("spec errors are reported above"),
        induced_s: s_value,
        n,
        beta,
        chains,
        sweeps,
        burnin,
        thin,
        seed,
        grids,
        frames,
        tolerances,
    })
}

/// Validates radial coefficients. The wall margin `η₀` is the largest value
/// up to ½ that the droplet admits, and `δ₀ = min(Δ, 0.1)`.
fn build_radial(mut params: PotentialParams) -> Result<PotentialSpec, String> {
    params.delta0 = params.delta.min(0.1);
    params.eta0 = 1e-9;
    if !(params.delta > 0.0) {
        return PotentialSpec::new(params).map_err(|e| e.to_string());
    }
    let probe = PotentialSpec::new(params).map_err(|e| e.to_string())?;
    let d = probe.radial_droplet();
    let mut gap = params.sigma_outer - d.r_out;
    if params.sigma_inner > 0.0 {
        gap = gap.min(d.r_in - params.sigma_inner);
    }
    params.eta0 = (gap / 2.0).min(0.5);
    PotentialSpec::new(params).map_err(|e| e.to_string())
}

impl RunConfig {
    /// Histogram half-width.
    pub fn half(&self) -> f64 {
        self.grids.half.unwrap_or(self.spec.sigma_outer())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ginibre_config_fills_defaults() {
        let c = parse_config("# nothing but a comment\npotential.kind = ginibre\n").unwrap();
        assert_eq!(c.spec, PotentialSpec::ginibre());
        assert_eq!((c.n, c.beta, c.chains, c.thin), (32, 1.0, 4, 1));
        assert_eq!(c.seed, None);
        assert_eq!(c.frames, vec![Point::new(0.5, 0.0), Point::new(1.0, 0.0)]);
        assert_eq!(c.half(), 2.0);
    }

    #[test]
    fn negative_beta_names_the_key_and_line() {
        let e = parse_config("n = 8\nbeta = -1\n").unwrap_err();
        assert_eq!(e.len(), 1);
        assert_eq!((e[0].line, e[0].key.as_str()), (2, "beta"));
    }

    #[test]
    fn induced_config_equals_programmatic_construction() {
        let c = parse_config("potential.kind = induced\ninduced.s = 2\nn = 100 # band\n").unwrap();
        assert_eq!(c.spec, PotentialSpec::induced(100, 2.0).unwrap());
        assert_eq!(c.induced_s, Some(2.0));
    }

    #[test]
    fn all_errors_are_reported_with_lines() {
        let text = "n = 0\nbogus = 1\nbeta = x\nsweeps = 10\nburnin = 20\ngrids = bins:0, depth:3\n";
        let e = parse_config(text).unwrap_err();
        let lines: Vec<usize> = e.iter().map(|e| e.line).collect();
        assert!(lines.contains(&1) && lines.contains(&2) && lines.contains(&3) && lines.contains(&6), "{e:?}");
        assert!(e.iter().any(|e| e.key == "sweeps"));
        assert!(e.iter().filter(|e| e.line == 6).count() == 2);
        assert!(e.iter().any(|e| e.key == "bogus" && e.message == "unknown key"));
    }

    #[test]
    fn induced_without_s_and_coefficient_conflicts() {
        let e = parse_config("potential.kind = induced\npotential.delta = 3\n").unwrap_err();
        assert!(e.iter().any(|e| e.key == "induced.s" && e.line == 1));
        assert!(e.iter().any(|e| e.key == "potential.delta" && e.line == 2));
        assert!(parse_config("induced.s = 2\n").is_err());
    }

    #[test]
    fn radial_quartic_config() {
        let c = parse_config("potential.kind = radial\npotential.quartic_coef = 1\npotential.sigma_outer = 1.5\n").unwrap();
        assert!((c.spec.radial_droplet().r_out - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(c.spec.eta0() <= 0.5);
        let bad = parse_config("potential.kind = radial\npotential.sigma_outer = 0.9\n").unwrap_err();
        assert_eq!(bad[0].key, "potential");
    }

    #[test]
    fn frames_grids_and_tolerances() {
        let c = parse_config("frames = 0:0; 1:0.5\ngrids = bins:32, half:1.5, radial:512\ntolerances = z:4, thermal:1e-6\nseed = 9\n").unwrap();
        assert_eq!(c.frames, vec![Point::new(0.0, 0.0), Point::new(1.0, 0.5)]);
        assert_eq!(c.grids, Grids { bins: 32, half: Some(1.5), radial: 512 });
        assert_eq!(c.tolerances, Tolerances { thermal: 1e-6, z: 4.0 });
        assert_eq!(c.seed, Some(9));
        assert!(parse_config("frames = 0\n").is_err());
        assert!(parse_config("n = 3\nn = 4\n").unwrap_err()[0].message.contains("line 1"));
    }
}
