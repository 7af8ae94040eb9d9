//! Flat `key = value` scenario files.

use std::fmt;
use std::path::PathBuf;

use nehari_shape::RectangleCase;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {field}: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

/// `f(x)` vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FExpr {
    X,
    SinHalfPi,
    OneMinusCosHalfPi,
}

/// `θ(y)` vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaExpr {
    Y,
    SinOverHeight,
}

impl FExpr {
    pub fn parse(s: &str) -> Option<Self> {
        match s.replace(' ', "").as_str() {
            "x" => Some(Self::X),
            "sin(pi*x/2)" | "sin_half_pi" => Some(Self::SinHalfPi),
            "1-cos(pi*x/2)" | "one_minus_cos_half_pi" => Some(Self::OneMinusCosHalfPi),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::X => "x",
            Self::SinHalfPi => "sin(pi*x/2)",
            Self::OneMinusCosHalfPi => "1-cos(pi*x/2)",
        }
    }
}

impl ThetaExpr {
    pub fn parse(s: &str) -> Option<Self> {
        match s.replace(' ', "").as_str() {
            "y" => Some(Self::Y),
            "sin(pi*y/2a)" | "sin_over_height" => Some(Self::SinOverHeight),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Y => "y",
            Self::SinOverHeight => "sin(pi*y/2a)",
        }
    }
}

pub fn case_of(f: FExpr, theta: ThetaExpr) -> RectangleCase {
    use RectangleCase::*;
    match (f, theta) {
        (FExpr::SinHalfPi, ThetaExpr::Y) => I,
        (FExpr::X, ThetaExpr::Y) => Ii,
        (FExpr::OneMinusCosHalfPi, ThetaExpr::Y) => Iii,
        (FExpr::SinHalfPi, ThetaExpr::SinOverHeight) => Iv,
        (FExpr::X, ThetaExpr::SinOverHeight) => V,
        (FExpr::OneMinusCosHalfPi, ThetaExpr::SinOverHeight) => Vi,
    }
}

pub fn expressions(case: RectangleCase) -> (FExpr, ThetaExpr) {
    use RectangleCase::*;
    let f = match case {
        I | Iv => FExpr::SinHalfPi,
        Ii | V => FExpr::X,
        Iii | Vi => FExpr::OneMinusCosHalfPi,
    };
    let theta = match case {
        I | Ii | Iii => ThetaExpr::Y,
        _ => ThetaExpr::SinOverHeight,
    };
    (f, theta)
}

/// Corrector identifiers accepted in `correctors`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorId {
    YTimesU,
    Phi(usize, usize),
    W(usize, usize),
    OptimalAnalytic,
}

impl CorrectorId {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        match s {
            "y_times_u" | "yu" => return Some(Self::YTimesU),
            "optimal_analytic" => return Some(Self::OptimalAnalytic),
            _ => {}
        }
        let pair = |rest: &str| -> Option<(usize, usize)> {
            let (m, k) = rest.split_once('_')?;
            let (m, k) = (m.parse().ok()?, k.parse().ok()?);
            (m >= 1 && k >= 1).then_some((m, k))
        };
        if let Some(rest) = s.strip_prefix("phi_") {
            return pair(rest).map(|(m, k)| Self::Phi(m, k));
        }
        if let Some(rest) = s.strip_prefix("w_") {
            return pair(rest).and_then(|(m, k)| ((m, k) != (1, 1)).then_some(Self::W(m, k)));
        }
        None
    }
}

impl fmt::Display for CorrectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::YTimesU => write!(f, "y_times_u"),
            Self::Phi(m, k) => write!(f, "phi_{m}_{k}"),
            Self::W(m, k) => write!(f, "w_{m}_{k}"),
            Self::OptimalAnalytic => write!(f, "optimal_analytic"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub cases: Vec<RectangleCase>,
    pub a_start: f64,
    pub a_stop: f64,
    pub a_step: f64,
    pub correctors: Vec<CorrectorId>,
    pub allow_a_below_one: bool,
    pub quad_panels: usize,
    pub quad_order: usize,
    pub oracle_fd: bool,
    pub oracle_grid: bool,
    pub grid_n: usize,
    pub fd_step: f64,
    pub rtilde_check: bool,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cases: RectangleCase::all().to_vec(),
            a_start: 1.0,
            a_stop: 1.1,
            a_step: 0.05,
            correctors: vec![
                CorrectorId::W(4, 6),
                CorrectorId::W(2, 2),
                CorrectorId::YTimesU,
                CorrectorId::Phi(1, 2),
            ],
            allow_a_below_one: false,
            quad_panels: 4,
            quad_order: 12,
            oracle_fd: true,
            oracle_grid: true,
            grid_n: 129,
            fd_step: 1e-3,
            rtilde_check: true,
            out_csv: None,
            out_json: None,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

fn parse_list<T>(v: &str, item: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, String> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        out.push(item(part).ok_or_else(|| format!("unknown entry `{part}`"))?);
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

impl ScenarioConfig {
    /// Parses a config file; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut pending = PendingPair::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            })?;
            cfg.set(key.trim(), value.trim(), &mut pending)
                .map_err(|message| ConfigError::Field {
                    line,
                    field: key.trim().to_string(),
                    message,
                })?;
        }
        pending.resolve(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides given on the command line.
    pub fn with_overrides(mut self, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut pending = PendingPair::default();
        for (i, o) in overrides.iter().enumerate() {
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: o.clone(),
            })?;
            self.set(key.trim(), value.trim(), &mut pending)
                .map_err(|message| ConfigError::Invalid {
                    field: key.trim().to_string(),
                    message,
                })?;
        }
        pending.resolve(&mut self)?;
        self.validate()?;
        Ok(self)
    }

    fn set(&mut self, key: &str, value: &str, pending: &mut PendingPair) -> Result<(), String> {
        let float = |v: &str| v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        let uint = |v: &str| v.parse::<usize>().map_err(|_| format!("`{v}` is not a non-negative integer"));
        let boolean = |v: &str| parse_bool(v).ok_or_else(|| format!("`{v}` is not a boolean"));
        match key {
            "cases" => {
                self.cases = if value == "all" {
                    RectangleCase::all().to_vec()
                } else {
                    parse_list(value, RectangleCase::parse)?
                };
                pending.explicit_cases = true;
            }
            "f" => pending.f = Some(FExpr::parse(value).ok_or_else(|| format!("unknown f(x) `{value}`"))?),
            "theta" => {
                pending.theta = Some(ThetaExpr::parse(value).ok_or_else(|| format!("unknown theta(y) `{value}`"))?)
            }
            "a_start" => self.a_start = float(value)?,
            "a_stop" => self.a_stop = float(value)?,
            "a_step" => self.a_step = float(value)?,
            "correctors" => self.correctors = parse_list(value, CorrectorId::parse)?,
            "allow_a_below_one" => self.allow_a_below_one = boolean(value)?,
            "quad_panels" => self.quad_panels = uint(value)?,
            "quad_order" => self.quad_order = uint(value)?,
            "oracle_fd" => self.oracle_fd = boolean(value)?,
            "oracle_grid" => self.oracle_grid = boolean(value)?,
            "grid_n" => self.grid_n = uint(value)?,
            "fd_step" => self.fd_step = float(value)?,
            "rtilde_check" => self.rtilde_check = boolean(value)?,
            "out_csv" => self.out_csv = Some(PathBuf::from(value)),
            "out_json" => self.out_json = Some(PathBuf::from(value)),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, message: String| ConfigError::Invalid {
            field: field.into(),
            message,
        };
        if !(self.a_step > 0.0) || !self.a_step.is_finite() {
            return Err(invalid("a_step", format!("must be positive, got {}", self.a_step)));
        }
        if !(self.a_stop >= self.a_start) {
            return Err(invalid("a_stop", format!("{} is below a_start = {}", self.a_stop, self.a_start)));
        }
        if !(self.a_start > 0.0) {
            return Err(invalid("a_start", format!("must be positive, got {}", self.a_start)));
        }
        if self.a_start < 1.0 && !self.allow_a_below_one {
            return Err(invalid(
                "a_start",
                format!("{} < 1 needs allow_a_below_one = true", self.a_start),
            ));
        }
        if self.quad_panels == 0 || self.quad_order == 0 {
            return Err(invalid("quad_order", "panels and order must be at least 1".into()));
        }
        if self.a_values().len() > 100_000 {
            return Err(invalid("a_step", "more than 100000 values of a".into()));
        }
        Ok(())
    }

    /// `a_start + i·a_step` up to `a_stop` (with a small tolerance).
    pub fn a_values(&self) -> Vec<f64> {
        let n = ((self.a_stop - self.a_start) / self.a_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.a_start + i as f64 * self.a_step).collect()
    }
}

/// A custom `(f, θ)` pair is resolved after all keys are read.
#[derive(Default)]
struct PendingPair {
    f: Option<FExpr>,
    theta: Option<ThetaExpr>,
    explicit_cases: bool,
}

impl PendingPair {
    fn resolve(&self, cfg: &mut ScenarioConfig) -> Result<(), ConfigError> {
        match (self.f, self.theta) {
            (None, None) => Ok(()),
            (Some(f), Some(theta)) => {
                let case = case_of(f, theta);
                if self.explicit_cases {
                    if !cfg.cases.contains(&case) {
                        cfg.cases.push(case);
                    }
                } else {
                    cfg.cases = vec![case];
                }
                Ok(())
            }
            _ => Err(ConfigError::Invalid {
                field: if self.f.is_some() { "theta" } else { "f" }.into(),
                message: "f and theta must be given together".into(),
            }),
        }
    }
}

/// `--only case=iv,a=1.05,corrector=w_2_2`; absent keys match everything.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OnlyFilter {
    pub case: Option<RectangleCase>,
    pub a: Option<f64>,
    pub corrector: Option<CorrectorId>,
}

impl OnlyFilter {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = |message: String| ConfigError::Invalid {
                field: "--only".into(),
                message,
            };
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            match k.trim() {
                "case" => out.case = Some(RectangleCase::parse(v).ok_or_else(|| bad(format!("unknown case `{v}`")))?),
                "a" => out.a = Some(v.trim().parse().map_err(|_| bad(format!("`{v}` is not a number")))?),
                "corrector" => {
                    out.corrector = Some(CorrectorId::parse(v).ok_or_else(|| bad(format!("unknown corrector `{v}`")))?)
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        Ok(out)
    }

    pub fn matches(&self, case: RectangleCase, a: f64, corrector: CorrectorId) -> bool {
        self.case.is_none_or(|c| c == case)
            && self.a.is_none_or(|x| (x - a).abs() <= 1e-9)
            && self.corrector.is_none_or(|c| c == corrector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_comments() {
        let cfg = ScenarioConfig::parse("# nothing\n\n  a_step = 0.01 # trailing\n").unwrap();
        assert_eq!(cfg.a_step, 0.01);
        assert_eq!(cfg.cases.len(), 6);
        assert_eq!(cfg.a_values().len(), 11);
    }

    #[test]
    fn parse_errors_carry_line_and_field() {
        let err = ScenarioConfig::parse("cases = i\ncorrectors = w_1_1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Field {
                line: 2,
                field: "correctors".into(),
                message: "unknown entry `w_1_1`".into()
            }
        );
        assert!(matches!(
            ScenarioConfig::parse("a_start 1.0").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            ScenarioConfig::parse("bogus = 1").unwrap_err(),
            ConfigError::Field { line: 1, .. }
        ));
    }

    #[test]
    fn heights_below_one_need_override() {
        let err = ScenarioConfig::parse("a_start = 0.9").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "a_start"));
        assert!(ScenarioConfig::parse("a_start = 0.9\nallow_a_below_one = true").is_ok());
    }

    #[test]
    fn custom_pair_selects_case() {
        let cfg = ScenarioConfig::parse("f = 1-cos(pi*x/2)\ntheta = sin(pi*y/2a)").unwrap();
        assert_eq!(cfg.cases, vec![RectangleCase::Vi]);
        assert!(ScenarioConfig::parse("f = x").is_err());
        assert!(ScenarioConfig::parse("f = x^2\ntheta = y").is_err());
        for case in RectangleCase::all() {
            let (f, t) = expressions(case);
            assert_eq!(case_of(f, t), case);
        }
    }

    #[test]
    fn corrector_ids_round_trip() {
        for s in ["y_times_u", "phi_1_2", "w_4_6", "w_20_20", "optimal_analytic"] {
            assert_eq!(CorrectorId::parse(s).unwrap().to_string(), s);
        }
        assert!(CorrectorId::parse("phi_0_1").is_none());
        assert!(CorrectorId::parse("w_x_2").is_none());
    }

    #[test]
    fn only_filter() {
        let f = OnlyFilter::parse("case=iv, a=1.05, corrector=w_2_2").unwrap();
        assert!(f.matches(RectangleCase::Iv, 1.0 + 5.0 * 0.01, CorrectorId::W(2, 2)));
        assert!(!f.matches(RectangleCase::V, 1.05, CorrectorId::W(2, 2)));
        assert!(OnlyFilter::parse("height=1").is_err());
    }

    #[test]
    fn overrides() {
        let cfg = ScenarioConfig::default()
            .with_overrides(&["grid_n=16".into(), "cases=i,ii".into()])
            .unwrap();
        assert_eq!(cfg.grid_n, 16);
        assert_eq!(cfg.cases, vec![RectangleCase::I, RectangleCase::Ii]);
        assert!(ScenarioConfig::default().with_overrides(&["grid_n".into()]).is_err());
    }
}
