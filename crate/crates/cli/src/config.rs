//! Flat `key = value` run configuration.

use serde::Serialize;

use ringbump::model::{default_sample_radii, validate_potential, ModelParams, Potential};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    Type { line: usize, key: String, expected: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    /// `None` resolves to `f0/2` at the middle of `S_k`.
    pub beta: Option<f64>,
    /// Grid half-width override.
    pub half_width: Option<f64>,
    /// Grid spacing override.
    pub spacing: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub n_coarse: usize,
    pub tol_r: f64,
    /// Single radius for `corrector`; defaults to the middle of `S_k`.
    pub radius: Option<f64>,
    pub ks: Vec<usize>,
    pub etas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Run the refinement study in `solve`.
    pub refine: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::default(),
            beta: None,
            half_width: None,
            spacing: None,
            tol: 1e-8,
            max_iter: 50,
            n_coarse: 9,
            tol_r: 1e-3,
            radius: None,
            ks: vec![12, 16, 24],
            etas: vec![0.5, 1.0, 2.0],
            samples: 1000,
            seed: 0,
            refine: false,
        }
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::Type { line, key: key.into(), expected: "a number", value: value.into() })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| ConfigError::Type {
        line,
        key: key.into(),
        expected: "a non-negative integer",
        value: value.into(),
    })
}

fn parse_list<T, F>(line: usize, key: &str, value: &str, f: F) -> Result<Vec<T>, ConfigError>
where
    F: Fn(usize, &str, &str) -> Result<T, ConfigError>,
{
    value.split(',').map(|s| f(line, key, s.trim())).collect()
}

/// Parses the configuration text; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::default();
    let mut core: Option<f64> = None;
    let mut form = "algebraic".to_string();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: raw.into() });
        };
        let (key, value) = (key.trim(), value.trim());
        let p = &mut c.params;
        match key {
            "lambda" => p.lambda = parse_f64(line, key, value)?,
            "alpha0" => p.alpha0 = parse_f64(line, key, value)?,
            "alpha1" => p.alpha1 = parse_f64(line, key, value)?,
            "beta" => c.beta = Some(parse_f64(line, key, value)?),
            "mu0" => p.mu0 = parse_f64(line, key, value)?,
            "a" => p.a = parse_f64(line, key, value)?,
            "m" => p.m = parse_f64(line, key, value)?,
            "theta" => p.theta = parse_f64(line, key, value)?,
            "k" => p.k = parse_usize(line, key, value)?,
            "N" => p.dim = parse_usize(line, key, value)?,
            "tau0" => p.tau0 = Some(parse_f64(line, key, value)?),
            "potential" => form = value.to_string(),
            "core" => core = Some(parse_f64(line, key, value)?),
            "L" => c.half_width = Some(parse_f64(line, key, value)?),
            "h" => c.spacing = Some(parse_f64(line, key, value)?),
            "tol" => c.tol = parse_f64(line, key, value)?,
            "max_iter" => c.max_iter = parse_usize(line, key, value)?,
            "n_coarse" => c.n_coarse = parse_usize(line, key, value)?,
            "tol_R" => c.tol_r = parse_f64(line, key, value)?,
            "R" => c.radius = Some(parse_f64(line, key, value)?),
            "ks" => c.ks = parse_list(line, key, value, parse_usize)?,
            "etas" => c.etas = parse_list(line, key, value, parse_f64)?,
            "samples" => c.samples = parse_usize(line, key, value)?,
            "seed" => {
                c.seed = value.parse().map_err(|_| ConfigError::Type {
                    line,
                    key: key.into(),
                    expected: "an unsigned integer",
                    value: value.into(),
                })?
            }
            "refine" => {
                c.refine = value.parse().map_err(|_| ConfigError::Type {
                    line,
                    key: key.into(),
                    expected: "true or false",
                    value: value.into(),
                })?
            }
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
    }
    let core = core.unwrap_or(1.0);
    c.params.potential = match form.as_str() {
        "algebraic" => Potential::Algebraic { core },
        "shifted" => Potential::Shifted { core },
        other => return Err(ConfigError::Invalid(format!("unknown potential form `{other}`"))),
    };
    if let Some(b) = c.beta {
        c.params.beta = b;
    }
    validate(&c)?;
    Ok(c)
}

fn validate(c: &RunConfig) -> Result<(), ConfigError> {
    let report = validate_potential(&c.params, &default_sample_radii(&c.params));
    if !report.passed {
        return Err(ConfigError::Invalid(format!(
            "potential assumption violated: {} (at r = {}, measured {})",
            report.clause, report.witness_radius, report.measured_bound
        )));
    }
    c.params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let positive = [("tol", c.tol), ("tol_R", c.tol_r)];
    for (name, v) in positive {
        if !(v > 0.0) {
            return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
        }
    }
    for (name, v) in [("L", c.half_width), ("h", c.spacing), ("R", c.radius)] {
        if let Some(v) = v {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
    }
    if c.max_iter == 0 {
        return Err(ConfigError::Invalid("max_iter must be positive".into()));
    }
    if c.etas.iter().any(|&e| !(e > 0.0 && e <= 2.0)) {
        return Err(ConfigError::Invalid("every eta must lie in (0, 2]".into()));
    }
    if c.ks.iter().any(|&k| k < 2) {
        return Err(ConfigError::Invalid("every k in ks must be at least 2".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn small_m_is_rejected_with_clause() {
        let err = parse_config("m = 0.4").unwrap_err().to_string();
        assert!(err.contains("m > 1/2"), "{err}");
    }

    #[test]
    fn overrides_merge_with_defaults() {
        let c = parse_config("k = 24\nbeta = 0.05").unwrap();
        assert_eq!(c.params.k, 24);
        assert_eq!(c.beta, Some(0.05));
        assert_eq!(c.params.beta, 0.05);
        let d = RunConfig::default();
        assert_eq!(c.params.m, d.params.m);
        assert_eq!(c.tol, d.tol);
    }

    #[test]
    fn unknown_key_and_bad_type() {
        assert!(matches!(parse_config("gamma = 1"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(parse_config("\nk = many"), Err(ConfigError::Type { line: 2, .. })));
        assert!(matches!(parse_config("k 16"), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn lists_and_potential() {
        let c = parse_config("ks = 8, 12\netas = 1\npotential = shifted\ntheta = 1\ncore = 2 # trailing").unwrap();
        assert_eq!(c.ks, vec![8, 12]);
        assert_eq!(c.etas, vec![1.0]);
        assert_eq!(c.params.potential, Potential::Shifted { core: 2.0 });
    }
}
