//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//! output_dir = "out/synthetic"
//!
//! [problem]
//! kind = "synthetic"        # quadratic | synthetic | hyperrep | ot | minmax
//! n = 100
//! d = 50
//! r = 20
//! nu = 0.01
//!
//! [solver]
//! eta_x = 0.5
//! eta_y = 0.5
//! inner_steps = 50          # S
//! outer_iters = 200         # K
//! map_mode = "exponential"  # or "retraction"
//! batch_sizes = [5, 5, 5, 5]
//!
//! [solver.estimator]
//! kind = "ns"               # hinv | cg | ns | ad
//! ns_t = 50
//! ns_gamma = 1.0
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MapMode;
use crate::hypergrad::{EstimatorConfig, EstimatorKind};
use crate::linalg::Mat;
use crate::manifolds::{Spd, SpdRetraction};
use crate::problem::{
    BatchSizes, BilevelProblem, BilinearSaddle, HyperRep, HyperRepData, MinMax, OtDomainAdaptation, QuadraticOracle,
    SyntheticStiefelSpd, TwoDomainData,
};
use crate::solver::SolverConfig;
use crate::tscg::TscgConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds data generation, initial points and mini-batch sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Number of solver seeds (`seed`, `seed + 1`, ...) run on the same data.
    #[serde(default = "one")]
    pub repeats: usize,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverSection,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        a: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    Synthetic {
        n: usize,
        d: usize,
        r: usize,
        #[serde(default = "default_nu")]
        nu: f64,
        #[serde(default)]
        spd_retraction: SpdRetractionName,
    },
    Hyperrep {
        n_train: usize,
        n_val: usize,
        d: usize,
        r: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    Ot {
        n: usize,
        m: usize,
        d: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default)]
        map_strength: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        lambda: f64,
    },
    Minmax {
        b: Vec<f64>,
    },
}

fn default_nu() -> f64 {
    0.01
}

fn default_lambda() -> f64 {
    0.1
}

fn default_classes() -> usize {
    3
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpdRetractionName {
    #[default]
    Exp,
    SecondOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eta_x: f64,
    pub eta_y: f64,
    pub inner_steps: usize,
    pub outer_iters: usize,
    pub map_mode: MapMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_sizes: Option<[usize; 4]>,
    pub record_reference_error: bool,
    pub record_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    pub wall_clock: bool,
    pub estimator: EstimatorSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            eta_x: s.eta_x,
            eta_y: s.eta_y,
            inner_steps: s.inner_steps,
            outer_iters: s.outer_iters,
            map_mode: s.map_mode,
            batch_sizes: None,
            record_reference_error: s.record_reference_error,
            record_every: s.record_every,
            grad_tol: None,
            wall_clock: s.wall_clock,
            estimator: EstimatorSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub kind: EstimatorKind,
    pub cg_max_iters: usize,
    pub cg_tol: f64,
    pub ns_t: usize,
    pub ns_gamma: f64,
    pub ns_spectral_check: bool,
    /// Unrolling depth; defaults to `inner_steps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ad_s: Option<usize>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let e = EstimatorConfig::default();
        Self {
            kind: e.kind,
            cg_max_iters: e.cg.max_iters,
            cg_tol: e.cg.residual_tol,
            ns_t: e.ns_t,
            ns_gamma: e.ns_gamma,
            ns_spectral_check: e.ns_spectral_check,
            ad_s: None,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self, seed: u64) -> SolverConfig {
        let e = &self.estimator;
        SolverConfig {
            eta_x: self.eta_x,
            eta_y: self.eta_y,
            inner_steps: self.inner_steps,
            outer_iters: self.outer_iters,
            estimator: EstimatorConfig {
                kind: e.kind,
                cg: TscgConfig {
                    max_iters: e.cg_max_iters,
                    residual_tol: e.cg_tol,
                    warm_start: None,
                },
                ns_t: e.ns_t,
                ns_gamma: e.ns_gamma,
                ns_spectral_check: e.ns_spectral_check,
                ad_s: e.ad_s.unwrap_or(self.inner_steps),
                ad_eta_y: self.eta_y,
            },
            map_mode: self.map_mode,
            batch_sizes: self.batch_sizes.map(|[b1, b2, b3, b4]| BatchSizes { b1, b2, b3, b4 }),
            seed,
            record_reference_error: self.record_reference_error,
            record_every: self.record_every,
            grad_tol: self.grad_tol,
            wall_clock: self.wall_clock,
        }
    }
}

/// A problem instance with its starting points.
pub struct BuiltProblem {
    pub problem: Box<dyn BilevelProblem>,
    pub x0: Mat,
    pub y0: Mat,
    /// Generated two-domain data for the transport problem.
    pub domains: Option<TwoDomainData>,
}

impl std::fmt::Debug for BuiltProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltProblem")
            .field("problem", &self.problem.name())
            .field("x0", &self.x0.shape())
            .field("y0", &self.y0.shape())
            .finish()
    }
}

fn column(v: &[f64]) -> Mat {
    Mat::from_column_slice(v.len(), 1, v)
}

impl ProblemConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ProblemConfig::Quadratic { .. } => "quadratic",
            ProblemConfig::Synthetic { .. } => "synthetic",
            ProblemConfig::Hyperrep { .. } => "hyperrep",
            ProblemConfig::Ot { .. } => "ot",
            ProblemConfig::Minmax { .. } => "minmax",
        }
    }

    /// Generates data and starting points from `seed`.
    pub fn build(&self, seed: u64) -> Result<BuiltProblem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut domains = None;
        let problem: Box<dyn BilevelProblem> = match self {
            ProblemConfig::Quadratic { a, .. } => {
                let n = a.len();
                if n == 0 || a.iter().any(|row| row.len() != n) {
                    return Err(Error::Parse("quadratic `a` must be a nonempty square matrix".into()));
                }
                Box::new(QuadraticOracle::new(Mat::from_fn(n, n, |i, j| a[i][j]))?)
            }
            ProblemConfig::Synthetic {
                n,
                d,
                r,
                nu,
                spd_retraction,
            } => {
                let (x, y) = SyntheticStiefelSpd::generate_data(*n, *d, *r, &mut rng);
                let retraction = match spd_retraction {
                    SpdRetractionName::Exp => SpdRetraction::Exp,
                    SpdRetractionName::SecondOrder => SpdRetraction::SecondOrder,
                };
                Box::new(SyntheticStiefelSpd::with_lower(&x, &y, *nu, Spd::new(*d).with_retraction(retraction))?)
            }
            ProblemConfig::Hyperrep {
                n_train,
                n_val,
                d,
                r,
                lambda,
            } => {
                let data = HyperRepData::generate(*n_train, *n_val, *d, *r, &mut rng)?;
                Box::new(HyperRep::new(data, *r, *lambda)?)
            }
            ProblemConfig::Ot {
                n,
                m,
                d,
                classes,
                map_strength,
                alpha,
                lambda,
            } => {
                let data = TwoDomainData::generate(*n, *m, *d, *classes, *map_strength, &mut rng);
                let p = OtDomainAdaptation::new(data.source.clone(), data.target.clone(), *alpha, *lambda)?;
                domains = Some(data);
                Box::new(p)
            }
            ProblemConfig::Minmax { b } => Box::new(MinMax::new(BilinearSaddle::new(column(b))?)),
        };
        let x0 = match self {
            ProblemConfig::Quadratic { a, x0 } => match x0 {
                Some(v) if v.len() != a.len() => {
                    return Err(Error::Parse(format!("quadratic `x0` needs {} entries", a.len())));
                }
                Some(v) => column(v),
                None => Mat::from_element(a.len(), 1, 1.0),
            },
            _ => problem.upper().rand_point(&mut rng),
        };
        let y0 = problem.lower().rand_point(&mut rng);
        Ok(BuiltProblem {
            problem,
            x0,
            y0,
            domains,
        })
    }
}

/// One-line `line L, column C: message` diagnostic.
fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().trim().replace('\n', " ");
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            Error::Parse(format!("line {line}, column {column}: {msg}"))
        }
        None => Error::Parse(msg),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Parse("`repeats` must be at least 1".into()));
        }
        self.solver.to_config(self.seed).validate().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Cross product of estimator settings applied to a base experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axes: SweepAxes,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    pub estimators: Vec<EstimatorKind>,
    /// Inner iterations `S`.
    pub inner_steps: Vec<usize>,
    /// CG iterations or Neumann terms `T`.
    pub terms: Vec<usize>,
    pub ns_gamma: Vec<f64>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        spec.base.validate()?;
        let a = &spec.axes;
        if a.estimators.is_empty() && a.inner_steps.is_empty() && a.terms.is_empty() && a.ns_gamma.is_empty() {
            return Err(Error::Parse("sweep needs at least one nonempty axis".into()));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTHETIC: &str = r#"
seed = 3
[problem]
kind = "synthetic"
n = 12
d = 6
r = 3
[solver]
inner_steps = 10
outer_iters = 5
[solver.estimator]
kind = "ns"
ns_t = 20
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SYNTHETIC).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.solver.estimator.kind, EstimatorKind::Ns);
        assert_eq!(cfg.solver.to_config(3).estimator.ad_s, 10);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_named() {
        let bad = SYNTHETIC.replace("inner_steps", "inner_stepz");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("inner_stepz"), "{err}");
        let bad = SYNTHETIC.replace("nu", "mu").replace("r = 3", "r = 3\nmu = 0.1");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().to_string().contains("mu"));
    }

    #[test]
    fn invalid_solver_settings_are_parse_errors() {
        let bad = SYNTHETIC.replace("outer_iters = 5", "outer_iters = 0");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn builds_each_problem_kind() {
        let kinds = [
            "kind = \"quadratic\"\na = [[2.0, 0.0], [0.0, 1.0]]",
            "kind = \"synthetic\"\nn = 8\nd = 4\nr = 2",
            "kind = \"hyperrep\"\nn_train = 6\nn_val = 6\nd = 4\nr = 2",
            "kind = \"ot\"\nn = 6\nm = 5\nd = 2",
            "kind = \"minmax\"\nb = [1.0, 0.0]",
        ];
        for k in kinds {
            let cfg = ExperimentConfig::from_toml(&format!("[problem]\n{k}\n")).unwrap();
            let built = cfg.problem.build(1).unwrap();
            built.problem.upper().check_point(&built.x0).unwrap();
            built.problem.lower().check_point(&built.y0).unwrap();
        }
    }
}
