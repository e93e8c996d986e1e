//! Experiment configuration: a JSON-serializable mirror of the library
//! types, shipping the L2-gain case-study constants as defaults.

use serde::{Deserialize, Serialize};

use aid_core::design::DesignConfig;
use aid_core::estimator::{EstimatorOptions, Polytope, TruncationDomains, TruncationSchedule};
use aid_core::model::ModelParams;
use aid_core::poly::PolynomialCoeffs;
use aid_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Re-solve the design at the current estimate while identifying.
    Adaptive,
    /// Solve the design once at the true parameters, then identify.
    OptimalBaseline,
    /// White input of fixed power; no design solves.
    FixedWhite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub theta_a: Vec<f64>,
    pub theta_b: Vec<f64>,
    #[serde(default)]
    pub theta_f: Vec<f64>,
    #[serde(default)]
    pub theta_c: Vec<f64>,
    pub theta_d: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub gamma: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub beta_k: f64,
    pub beta_r: f64,
    pub beta_d: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainsSpec {
    pub kappa1: f64,
    pub kappa2: f64,
    /// `{"expanding": {"k0": 10.0}}` or `{"fixed": 25.0}`.
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub d_c_vertices: Vec<Vec<f64>>,
    #[serde(default)]
    pub d_f_vertices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSpec {
    Fixed(f64),
    Expanding { k0: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub sigma2_true: f64,
    pub design: DesignSpec,
    pub domains: DomainsSpec,
    pub seed: u64,
    pub n_steps: usize,
    /// Steps between design updates in adaptive mode; 1 re-solves every step.
    #[serde(default = "one")]
    pub redesign_every: usize,
    pub mode: Mode,
    /// Input power of the fixed-white mode.
    #[serde(default = "one_f64")]
    pub white_r0: f64,
    /// Initial estimate; zero vector when omitted.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    /// `R_0 = r0_scale * I`.
    #[serde(default = "one_f64")]
    pub r0_scale: f64,
    #[serde(default = "one_f64")]
    pub sigma2_init: f64,
    #[serde(default = "default_true")]
    pub clear_regressor_on_reset: bool,
}

fn one() -> usize {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl Default for ExperimentConfig {
    /// The ARARX L2-gain case study: `theta_B* = (0.9, 0.6, 0.2, 0.3)`,
    /// `theta_D* = (-1.2, 0.75, -0.2)`, `sigma2 = 0.1`, `N = 4000`,
    /// `gamma = 1e-4`, `m = 3`, expanding truncation `K_j = 10 + j`.
    fn default() -> Self {
        Self {
            model: ModelSpec {
                theta_a: vec![],
                theta_b: vec![0.9, 0.6, 0.2, 0.3],
                theta_f: vec![],
                theta_c: vec![],
                theta_d: vec![-1.2, 0.75, -0.2],
            },
            sigma2_true: 0.1,
            design: DesignSpec {
                gamma: 1e-4,
                r_min: 1e-3,
                r_max: 5.0,
                beta_k: 1e-3,
                beta_r: 1e-3,
                beta_d: 1e-6,
                m: 3,
            },
            domains: DomainsSpec {
                kappa1: 1e-6,
                kappa2: 1e10,
                schedule: ScheduleSpec::Expanding { k0: 10.0 },
                d_c_vertices: vec![],
                d_f_vertices: vec![],
            },
            seed: 20260808,
            n_steps: 4000,
            redesign_every: 1,
            mode: Mode::Adaptive,
            white_r0: 1.0,
            theta0: None,
            r0_scale: 1.0,
            sigma2_init: 1.0,
            clear_regressor_on_reset: true,
        }
    }
}

impl ExperimentConfig {
    pub fn truth(&self) -> Result<ModelParams> {
        ModelParams::new(
            PolynomialCoeffs::monic(self.model.theta_a.clone()),
            PolynomialCoeffs::fir(self.model.theta_b.clone()),
            PolynomialCoeffs::monic(self.model.theta_f.clone()),
            PolynomialCoeffs::monic(self.model.theta_c.clone()),
            PolynomialCoeffs::monic(self.model.theta_d.clone()),
        )
    }

    pub fn design_config(&self) -> DesignConfig {
        DesignConfig {
            gamma: self.design.gamma,
            n: self.n_steps,
            r_min: self.design.r_min,
            r_max: self.design.r_max,
            beta_k: self.design.beta_k,
            beta_r: self.design.beta_r,
            beta_d: self.design.beta_d,
            m: self.design.m,
        }
    }

    pub fn truncation_domains(&self) -> TruncationDomains {
        TruncationDomains {
            schedule: match self.domains.schedule {
                ScheduleSpec::Fixed(k) => TruncationSchedule::Fixed(k),
                ScheduleSpec::Expanding { k0 } => TruncationSchedule::Expanding { k0 },
            },
            d_c: Polytope { vertices: self.domains.d_c_vertices.clone() },
            d_f: Polytope { vertices: self.domains.d_f_vertices.clone() },
            kappa1: self.domains.kappa1,
            kappa2: self.domains.kappa2,
        }
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            clear_regressor_on_reset: self.clear_regressor_on_reset,
            sigma2_init: self.sigma2_init,
        }
    }

    pub fn theta0_model(&self) -> Result<ModelParams> {
        let truth = self.truth()?;
        match &self.theta0 {
            None => Ok(ModelParams::zero(truth.orders())),
            Some(v) => {
                let vec = nalgebra::DVector::from_vec(v.clone());
                ModelParams::from_vector(truth.orders(), &vec)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let truth = self.truth()?;
        truth.require_assumption1()?;
        self.design_config().validate()?;
        self.truncation_domains().validate(&truth.orders())?;
        if self.n_steps == 0 {
            return Err(Error::Shape("n_steps must be positive".into()));
        }
        if self.redesign_every == 0 {
            return Err(Error::Shape("redesign_every must be at least 1".into()));
        }
        if self.sigma2_true <= 0.0 {
            return Err(Error::Shape("sigma2_true must be positive".into()));
        }
        if self.mode == Mode::FixedWhite && self.white_r0 <= 0.0 {
            return Err(Error::Shape("white_r0 must be positive".into()));
        }
        self.theta0_model()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Shape(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.mode, Mode::Adaptive);
        assert_eq!(back.design.m, 3);
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn unstable_truth_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.model.theta_d = vec![-2.0];
        assert!(cfg.validate().is_err());
    }
}
