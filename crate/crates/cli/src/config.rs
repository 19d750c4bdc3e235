use std::path::Path;

use ctdd::lti::{random_controllable_system, FnInput, InputSignal, LtiSystem, PolynomialInput};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const BUILTIN_EXAMPLE: &str = "builtin:example52";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Builtin(String),
    Random {
        random: RandomSystem,
    },
    Matrices {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSystem {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Excitation {
    /// One row of ascending monomial coefficients per input channel.
    Polynomial { coefficients: Vec<Vec<f64>> },
    /// `a_c sin(w_c t + phi_c)` per channel.
    Sine {
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        #[serde(default)]
        phases: Vec<f64>,
    },
    /// Seeded random polynomial, persistently exciting of `order`.
    Random { order: usize },
}

impl Default for Excitation {
    fn default() -> Self {
        Excitation::Polynomial {
            coefficients: vec![vec![0.0, 0.0, 1.0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Orders {
    pub l: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe_order: Option<usize>,
}

impl Default for Orders {
    fn default() -> Self {
        Self {
            l: 1,
            k: 2,
            pe_order: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    InputState,
    InputOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrConfig {
    /// `x0` for the input-state variant, `[u, y, u', y', ...](-1)` otherwise.
    pub x0: Vec<f64>,
    pub n: Vec<usize>,
    pub variant: Variant,
    pub riccati_intervals: usize,
}

fn default_riccati_intervals() -> usize {
    ctdd::lqr::DEFAULT_RICCATI_INTERVALS
}

impl Default for LqrConfig {
    fn default() -> Self {
        Self {
            x0: vec![1.0],
            n: (1..=10).collect(),
            variant: Variant::InputState,
            riccati_intervals: default_riccati_intervals(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Ascending monomial coefficients per input channel.
    pub u: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub n: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        // x = 1 + t/2 - t^2 is the response of the builtin system to this input
        Self {
            u: vec![vec![1.5, -1.5, -1.0]],
            x0: vec![-0.5],
            n: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub pe: f64,
    pub rank_rel: f64,
    pub kkt: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pe: 1e-9,
            rank_rel: 1e-10,
            kkt: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Initial state of the informative experiment; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    #[serde(default = "default_projection_order")]
    pub projection_order: usize,
    #[serde(default = "default_system")]
    pub system: SystemSpec,
    #[serde(default)]
    pub excitation: Excitation,
    #[serde(default)]
    pub orders: Orders,
    #[serde(default)]
    pub lqr: LqrConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_system() -> SystemSpec {
    SystemSpec::Builtin(BUILTIN_EXAMPLE.into())
}

fn default_quadrature() -> usize {
    200
}

fn default_projection_order() -> usize {
    32
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            x0: None,
            quadrature: default_quadrature(),
            projection_order: default_projection_order(),
            system: default_system(),
            excitation: Excitation::default(),
            orders: Orders::default(),
            lqr: LqrConfig::default(),
            simulate: SimulateConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Canonical TOML text, used for hashing.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.quadrature == 0 {
            return fail("quadrature node count must be positive".into());
        }
        if self.projection_order == 0 || self.projection_order > self.quadrature {
            return fail(format!(
                "projection_order must lie in 1..={}, got {}",
                self.quadrature, self.projection_order
            ));
        }
        let t = &self.tolerances;
        if !(t.pe > 0.0 && t.rank_rel > 0.0 && t.kkt > 0.0) {
            return fail("all tolerances must be positive".into());
        }
        if self.orders.l == 0 || self.orders.k == 0 {
            return fail("stacking orders must be positive".into());
        }
        if self.lqr.n.is_empty() {
            return fail("lqr.n must list at least one truncation order".into());
        }
        if self.lqr.n.contains(&0) {
            return fail("truncation orders must be at least 1".into());
        }
        if self.simulate.n == 0 {
            return fail("simulate.n must be at least 1".into());
        }
        if let SystemSpec::Builtin(name) = &self.system {
            if name != BUILTIN_EXAMPLE {
                return fail(format!("unknown builtin system '{name}'"));
            }
        }
        Ok(())
    }

    pub fn is_builtin(&self) -> bool {
        matches!(&self.system, SystemSpec::Builtin(_))
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!(
            "matrix {what} has rows of unequal length"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// A validated configuration with its system and excitation instantiated.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub sys: LtiSystem<f64>,
    pub input: Box<dyn InputSignal<f64>>,
    pub x0: DVector<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, seed: u64) -> Result<Self, CliError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = match &config.system {
            SystemSpec::Builtin(_) => LtiSystem::input_state(
                DMatrix::from_element(1, 1, -1.0),
                DMatrix::from_element(1, 1, 1.0),
            )
            .expect("scalar system"),
            SystemSpec::Random { random } => {
                if random.n == 0 || random.m == 0 {
                    return Err(CliError::Config(
                        "random system dimensions must be positive".into(),
                    ));
                }
                random_controllable_system(&mut rng, random.n, random.m)
            }
            SystemSpec::Matrices { a, b, c, d } => {
                let a = matrix(a, "a")?;
                let b = matrix(b, "b")?;
                let n = a.nrows();
                let c = match c {
                    Some(c) => matrix(c, "c")?,
                    None => DMatrix::identity(n, n),
                };
                let d = match d {
                    Some(d) => matrix(d, "d")?,
                    None => DMatrix::zeros(c.nrows(), b.ncols()),
                };
                LtiSystem::new(a, b, c, d).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        let (n, m) = (sys.n(), sys.m());
        let input: Box<dyn InputSignal<f64>> = match &config.excitation {
            Excitation::Polynomial { coefficients } => {
                if coefficients.len() != m {
                    return Err(CliError::Config(format!(
                        "excitation has {} channels, the system has {m} inputs",
                        coefficients.len()
                    )));
                }
                Box::new(PolynomialInput::new(matrix(
                    coefficients,
                    "excitation.coefficients",
                )?))
            }
            Excitation::Sine {
                amplitudes,
                frequencies,
                phases,
            } => {
                let phases = if phases.is_empty() {
                    vec![0.0; m]
                } else {
                    phases.clone()
                };
                if amplitudes.len() != m || frequencies.len() != m || phases.len() != m {
                    return Err(CliError::Config(format!(
                        "sine excitation needs {m} amplitudes, frequencies and phases"
                    )));
                }
                let (a, w) = (amplitudes.clone(), frequencies.clone());
                Box::new(FnInput::new(m, None, move |t: f64, k: usize| {
                    DVector::from_fn(m, |c, _| {
                        let shift = k as f64 * std::f64::consts::FRAC_PI_2;
                        a[c] * w[c].powi(k as i32) * (w[c] * t + phases[c] + shift).sin()
                    })
                }))
            }
            Excitation::Random { order } => {
                if *order == 0 {
                    return Err(CliError::Config(
                        "random excitation order must be positive".into(),
                    ));
                }
                Box::new(PolynomialInput::persistently_exciting(m, *order, &mut rng))
            }
        };
        let x0 = match &config.x0 {
            Some(v) if v.len() != n => {
                return Err(CliError::Config(format!(
                    "x0 has length {}, expected {n}",
                    v.len()
                )))
            }
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(n),
        };
        Ok(Self {
            config,
            sys,
            input,
            x0,
        })
    }

    /// Excitation order to certify: configured, or `L + n`.
    pub fn pe_order(&self) -> usize {
        self.config
            .orders
            .pe_order
            .unwrap_or(self.config.orders.l + self.sys.n())
    }
}
