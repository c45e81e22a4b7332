//! Training configuration and its `key = value` text form.
//!
//! The text form is one `key = value` pair per line; `#` starts a comment.
//! Keys missing from a file take their [`Default`] values; unknown keys are
//! rejected. Floats are written with Rust's shortest round-trip formatting so
//! `parse(format(cfg)) == cfg` bit for bit.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the linearized step sizes are chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Tie each block's step to the Lipschitz constant of its smooth part.
    Spectral,
    /// Constant learning-rate parameters. The U step divides by
    /// `mu * (eta_q + eta_wq)`, the Q step by `mu * (eta_q + eta_wu)` and the
    /// W step by `mu * eta_qu`.
    Fixed {
        eta_q: f64,
        eta_wq: f64,
        eta_wu: f64,
        eta_qu: f64,
    },
}

/// Dual ascent step for the two constraint multipliers.
///
/// The Lagrangian weights the dual terms as `λ2⟨Y1, ·⟩` and `λ3⟨Y2, ·⟩`.
/// With `Mu` the update is `Y += μ·R`, so the effective multiplier `λY`
/// moves by `λμ·R`; once the primal block tracks its minimizer this maps
/// `Y ↦ (1 − λ)Y`, which diverges for `λ > 2`. `Scaled` uses
/// `Y += (μ/λ)·R`, the usual method-of-multipliers step on `λY`. Both agree
/// when `λ = 1`.
///
/// Under `Scaled` only the product `λY` enters the iteration, so any
/// positive `λ2`, `λ3` give the same primal trajectory; they still switch a
/// coupling off when set to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualStep {
    Mu,
    Scaled,
}

impl DualStep {
    pub fn as_str(self) -> &'static str {
        match self {
            DualStep::Mu => "mu",
            DualStep::Scaled => "scaled",
        }
    }
}

impl FromStr for DualStep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mu" => Ok(DualStep::Mu),
            "scaled" => Ok(DualStep::Scaled),
            other => Err(format!("unknown dual_step `{other}` (expected mu or scaled)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full structured model: dictionary, structuring transform, classifier.
    Sadl,
    /// Dictionary learning on the data term alone; a ridge classifier is fit
    /// on the learned codes afterwards.
    PlainAdl,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sadl => "sadl",
            Mode::PlainAdl => "plain_adl",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sadl" => Ok(Mode::Sadl),
            "plain_adl" => Ok(Mode::PlainAdl),
            other => Err(format!("unknown mode `{other}` (expected sadl or plain_adl)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// ℓ1 weight on the codes.
    pub lambda1: f64,
    /// Weight on the structure-constraint dual term.
    pub lambda2: f64,
    /// Weight on the classifier-constraint dual term.
    pub lambda3: f64,
    /// Ridge weight of the dictionary update.
    pub lambda4: f64,
    /// Number of atoms (rows of Ω).
    pub dict_size: usize,
    pub mu0: f64,
    /// Penalty growth factor, `mu <- min(rho * mu, mu_max)`.
    pub rho: f64,
    pub mu_max: f64,
    pub max_iter: usize,
    /// Relative objective change below which training stops.
    pub tol: f64,
    pub step_rule: StepRule,
    pub dual_step: DualStep,
    pub seed: u64,
    pub mode: Mode,
    /// Rows per class block of the structure target. `None` sizes each block
    /// by the class's sample count.
    pub block_rows: Option<usize>,
    /// Ridge weight of the classifier fit on codes in `plain_adl` mode.
    pub ridge_gamma: f64,
    /// Split large matrix products across threads. Off means strictly
    /// sequential, bit-reproducible execution.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 0.001,
            lambda2: 9.0,
            lambda3: 3.0,
            lambda4: 0.5,
            dict_size: 64,
            mu0: 0.1,
            rho: 1.01,
            mu_max: 1e6,
            max_iter: 300,
            tol: 1e-6,
            step_rule: StepRule::Spectral,
            dual_step: DualStep::Scaled,
            seed: 0,
            mode: Mode::Sadl,
            block_rows: None,
            ridge_gamma: 1e-3,
            parallel: false,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn check_nonneg(field: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(invalid(field, format!("must be finite and ≥ 0, got {v}")));
    }
    Ok(())
}

fn check_positive(field: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(invalid(field, format!("must be finite and > 0, got {v}")));
    }
    Ok(())
}

impl TrainConfig {
    /// Checks every invariant, reporting the first failing field.
    pub fn validate(&self) -> Result<()> {
        check_nonneg("lambda1", self.lambda1)?;
        check_nonneg("lambda2", self.lambda2)?;
        check_nonneg("lambda3", self.lambda3)?;
        check_nonneg("lambda4", self.lambda4)?;
        if self.dict_size == 0 {
            return Err(invalid("dict_size", "must be ≥ 1"));
        }
        check_positive("mu0", self.mu0)?;
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return Err(invalid("rho", format!("must be ≥ 1, got {}", self.rho)));
        }
        check_positive("mu_max", self.mu_max)?;
        if self.mu0 > self.mu_max {
            return Err(invalid(
                "mu0",
                format!("must not exceed mu_max ({} > {})", self.mu0, self.mu_max),
            ));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be ≥ 1"));
        }
        check_nonneg("tol", self.tol)?;
        if let StepRule::Fixed {
            eta_q,
            eta_wq,
            eta_wu,
            eta_qu,
        } = self.step_rule
        {
            check_positive("eta_q", eta_q)?;
            check_positive("eta_wq", eta_wq)?;
            check_positive("eta_wu", eta_wu)?;
            check_positive("eta_qu", eta_qu)?;
        }
        if self.block_rows == Some(0) {
            return Err(invalid("block_rows", "must be ≥ 1 or auto"));
        }
        check_nonneg("ridge_gamma", self.ridge_gamma)?;
        Ok(())
    }

    /// `(lambda1, lambda2, lambda3)` as used by the solver; the coupling
    /// weights vanish in `plain_adl` mode.
    pub fn effective_lambdas(&self) -> (f64, f64, f64) {
        match self.mode {
            Mode::Sadl => (self.lambda1, self.lambda2, self.lambda3),
            Mode::PlainAdl => (self.lambda1, 0.0, 0.0),
        }
    }

    pub fn to_kv_string(&self) -> String {
        self.to_string()
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::ConfigParse {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            cfg.set(key, value).map_err(|msg| Error::ConfigParse {
                line: line_no,
                msg,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_kv_string())?;
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "lambda1" => self.lambda1 = parse_num(key, value)?,
            "lambda2" => self.lambda2 = parse_num(key, value)?,
            "lambda3" => self.lambda3 = parse_num(key, value)?,
            "lambda4" => self.lambda4 = parse_num(key, value)?,
            "dict_size" => self.dict_size = parse_num(key, value)?,
            "mu0" => self.mu0 = parse_num(key, value)?,
            "rho" => self.rho = parse_num(key, value)?,
            "mu_max" => self.mu_max = parse_num(key, value)?,
            "max_iter" => self.max_iter = parse_num(key, value)?,
            "tol" => self.tol = parse_num(key, value)?,
            "step_rule" => self.step_rule = parse_step_rule(value)?,
            "dual_step" => self.dual_step = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "block_rows" => {
                self.block_rows = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "ridge_gamma" => self.ridge_gamma = parse_num(key, value)?,
            "parallel" => self.parallel = parse_num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as a value for `{key}`"))
}

fn parse_step_rule(value: &str) -> std::result::Result<StepRule, String> {
    if value == "spectral" {
        return Ok(StepRule::Spectral);
    }
    let inner = value
        .strip_prefix("fixed(")
        .and_then(|v| v.strip_suffix(')'))
        .ok_or_else(|| format!("step_rule must be `spectral` or `fixed(a, b, c, d)`, got `{value}`"))?;
    let etas = inner
        .split(',')
        .map(|t| parse_num::<f64>("step_rule", t.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match etas[..] {
        [eta_q, eta_wq, eta_wu, eta_qu] => Ok(StepRule::Fixed {
            eta_q,
            eta_wq,
            eta_wu,
            eta_qu,
        }),
        _ => Err(format!("fixed step rule takes 4 values, got {}", etas.len())),
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::Spectral => f.write_str("spectral"),
            StepRule::Fixed {
                eta_q,
                eta_wq,
                eta_wu,
                eta_qu,
            } => write!(f, "fixed({eta_q}, {eta_wq}, {eta_wu}, {eta_qu})"),
        }
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda1 = {}", self.lambda1)?;
        writeln!(f, "lambda2 = {}", self.lambda2)?;
        writeln!(f, "lambda3 = {}", self.lambda3)?;
        writeln!(f, "lambda4 = {}", self.lambda4)?;
        writeln!(f, "dict_size = {}", self.dict_size)?;
        writeln!(f, "mu0 = {}", self.mu0)?;
        writeln!(f, "rho = {}", self.rho)?;
        writeln!(f, "mu_max = {}", self.mu_max)?;
        writeln!(f, "max_iter = {}", self.max_iter)?;
        writeln!(f, "tol = {}", self.tol)?;
        writeln!(f, "step_rule = {}", self.step_rule)?;
        writeln!(f, "dual_step = {}", self.dual_step.as_str())?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "mode = {}", self.mode.as_str())?;
        match self.block_rows {
            Some(k) => writeln!(f, "block_rows = {k}")?,
            None => writeln!(f, "block_rows = auto")?,
        }
        writeln!(f, "ridge_gamma = {}", self.ridge_gamma)?;
        writeln!(f, "parallel = {}", self.parallel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rho_below_one_is_rejected() {
        let cfg = TrainConfig {
            rho: 0.5,
            ..TrainConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "rho", .. }));
        assert!(err.to_string().contains("rho must be ≥ 1"), "{err}");
    }

    #[test]
    fn yaleb_settings_are_valid() {
        let cfg = TrainConfig {
            lambda1: 0.001,
            lambda2: 9.0,
            lambda3: 3.0,
            lambda4: 0.5,
            rho: 1.01,
            dict_size: 570,
            max_iter: 780,
            ..TrainConfig::default()
        };
        cfg.validate().unwrap();
    }

    #[test]
    fn mu0_above_mu_max_is_rejected() {
        let cfg = TrainConfig {
            mu0: 10.0,
            mu_max: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig { field: "mu0", .. })
        ));
    }

    #[test]
    fn first_failing_field_is_reported() {
        let cfg = TrainConfig {
            lambda2: -1.0,
            dict_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig { field: "lambda2", .. })
        ));
    }

    #[test]
    fn plain_adl_zeroes_coupling_weights() {
        let cfg = TrainConfig {
            mode: Mode::PlainAdl,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.effective_lambdas(), (0.001, 0.0, 0.0));
    }

    #[test]
    fn parses_comments_and_partial_files() {
        let text = "# scene15\nlambda1 = 0.001\nlambda2=10 # inline\n\nlambda3 = 4\nlambda4 = 0.001\nmax_iter = 220\ndict_size = 450\nstep_rule = fixed(1, 1, 0.5, 2)\n";
        let cfg = TrainConfig::from_kv_str(text).unwrap();
        assert_eq!(cfg.lambda2, 10.0);
        assert_eq!(cfg.dict_size, 450);
        assert_eq!(cfg.max_iter, 220);
        assert_eq!(cfg.rho, 1.01);
        assert_eq!(
            cfg.step_rule,
            StepRule::Fixed {
                eta_q: 1.0,
                eta_wq: 1.0,
                eta_wu: 0.5,
                eta_qu: 2.0
            }
        );
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        let err = TrainConfig::from_kv_str("rho1 = 2\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 1, .. }), "{err}");
        let err = TrainConfig::from_kv_str("rho = 2\nrho = 3\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
        assert!(TrainConfig::from_kv_str("rho 2\n").is_err());
        assert!(TrainConfig::from_kv_str("step_rule = fixed(1, 2)\n").is_err());
    }

    #[test]
    fn parsed_config_is_validated() {
        assert!(matches!(
            TrainConfig::from_kv_str("rho = 0.9\n"),
            Err(Error::InvalidConfig { field: "rho", .. })
        ));
    }

    fn arb_config() -> impl Strategy<Value = TrainConfig> {
        let nonneg = 0.0..1e12f64;
        let step = prop_oneof![
            Just(StepRule::Spectral),
            (1e-9..1e9f64, 1e-9..1e9f64, 1e-9..1e9f64, 1e-9..1e9f64).prop_map(
                |(eta_q, eta_wq, eta_wu, eta_qu)| StepRule::Fixed {
                    eta_q,
                    eta_wq,
                    eta_wu,
                    eta_qu
                }
            ),
        ];
        (
            (nonneg.clone(), nonneg.clone(), nonneg.clone(), nonneg.clone()),
            (1usize..5000, 1e-12..1e3f64, 1.0..10f64, 1usize..100_000),
            (nonneg, step, any::<u64>(), any::<bool>(), any::<bool>()),
            (proptest::option::of(1usize..500), any::<bool>(), 0.0..1e3f64),
        )
            .prop_map(
                |(
                    (lambda1, lambda2, lambda3, lambda4),
                    (dict_size, mu0, rho, max_iter),
                    (tol, step_rule, seed, plain, scaled),
                    (block_rows, parallel, ridge_gamma),
                )| TrainConfig {
                    lambda1,
                    lambda2,
                    lambda3,
                    lambda4,
                    dict_size,
                    mu0,
                    rho,
                    mu_max: mu0 * 1e6,
                    max_iter,
                    tol,
                    step_rule,
                    dual_step: if scaled { DualStep::Scaled } else { DualStep::Mu },
                    seed,
                    mode: if plain { Mode::PlainAdl } else { Mode::Sadl },
                    block_rows,
                    ridge_gamma,
                    parallel,
                },
            )
    }

    proptest! {
        #[test]
        fn kv_round_trip_is_bit_exact(cfg in arb_config()) {
            let back = TrainConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
            prop_assert_eq!(back.to_kv_string(), cfg.to_kv_string());
            prop_assert_eq!(back.lambda1.to_bits(), cfg.lambda1.to_bits());
            prop_assert_eq!(back.mu_max.to_bits(), cfg.mu_max.to_bits());
            prop_assert_eq!(back.tol.to_bits(), cfg.tol.to_bits());
            prop_assert_eq!(back, cfg);
        }
    }
}
