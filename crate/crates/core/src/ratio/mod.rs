//! Continuous ratio refinement for a fixed topology.
//!
//! Fractions are parameterized by unconstrained logits through a softmax, the
//! loss in [`loss`] is minimized by gradient descent with a backtracking step
//! rule, and [`simplify`] turns the continuous optimum into a manufacturable
//! recipe.

pub mod loss;
pub mod simplify;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hsp::MaterialTarget;
use crate::library::{Formulation, LibraryError, Role, SolventLibrary, MAX_COMPONENTS};
use crate::seed;

pub use loss::{loss_gradient, loss_total, LossBreakdown, LossModel};
pub use simplify::{simplify_recipe, SimplifyConfig, SimplifyError};

#[derive(Debug, Error)]
pub enum RatioError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("solvent {solvent:?} has no {field}, required by an active kinetics term")]
    MissingKineticsData { solvent: String, field: &'static str },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
    #[error("logit vector has length {got}, topology has {want} components")]
    LengthMismatch { got: usize, want: usize },
}

/// Unconstrained logits, one per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioParams {
    pub logits: Vec<f64>,
}

impl RatioParams {
    pub fn new(logits: Vec<f64>) -> Self {
        Self { logits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { logits: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub(crate) fn check_len(&self, want: usize) -> Result<(), RatioError> {
        if self.logits.len() != want {
            return Err(RatioError::LengthMismatch { got: self.logits.len(), want });
        }
        Ok(())
    }
}

/// Max-subtracted softmax; finite logits always give a strictly positive simplex point
/// as long as their spread stays below ~700.
pub fn softmax_fractions(params: &RatioParams) -> Vec<f64> {
    let max = params.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = params.logits.iter().map(|t| (t - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleThreshold {
    /// Minimum fraction mass carried by solvents with the role.
    pub tau: f64,
    pub beta: f64,
}

/// Weights and thresholds of the ratio loss. Only the swelling floor (0.55),
/// the RED bounds (1.0) and the hinge structure are fixed by the method; the
/// remaining weights are engineering defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub epsilon: f64,
    pub omega_diff: f64,
    pub omega_swell: f64,
    pub swelling_threshold: f64,
    pub red_target_max: f64,
    pub red_protect_min: f64,
    /// λ: overall multiplier on the RED hinges.
    pub penalty_weight: f64,
    pub hinge_target_weight: f64,
    pub hinge_protect_weight: f64,
    pub alpha_vm: f64,
    pub v_max: f64,
    pub alpha_bp: f64,
    pub t_max: f64,
    pub role_thresholds: BTreeMap<Role, RoleThreshold>,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            omega_diff: 0.05,
            omega_swell: 1.0,
            swelling_threshold: 0.55,
            red_target_max: 1.0,
            red_protect_min: 1.0,
            penalty_weight: 1.0,
            hinge_target_weight: 10.0,
            hinge_protect_weight: 10.0,
            alpha_vm: 0.0,
            v_max: 200.0,
            alpha_bp: 0.0,
            t_max: 250.0,
            role_thresholds: BTreeMap::new(),
            gamma: 0.01,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), RatioError> {
        let bad = |m: String| Err(RatioError::InvalidConfig(m));
        let weights = [
            ("omega_diff", self.omega_diff),
            ("omega_swell", self.omega_swell),
            ("penalty_weight", self.penalty_weight),
            ("hinge_target_weight", self.hinge_target_weight),
            ("hinge_protect_weight", self.hinge_protect_weight),
            ("alpha_vm", self.alpha_vm),
            ("alpha_bp", self.alpha_bp),
            ("gamma", self.gamma),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("{name} must be >= 0, got {w}"));
            }
        }
        for (role, th) in &self.role_thresholds {
            if !(th.beta.is_finite() && th.beta >= 0.0 && th.tau.is_finite()) {
                return bad(format!("role threshold for {} must have finite tau and beta >= 0", role.as_str()));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.swelling_threshold > 0.0 && self.swelling_threshold < self.red_target_max) {
            return bad(format!(
                "need 0 < swelling_threshold ({}) < red_target_max ({})",
                self.swelling_threshold, self.red_target_max
            ));
        }
        if !(self.red_protect_min.is_finite() && self.v_max.is_finite() && self.t_max.is_finite()) {
            return bad("thresholds must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// All logits zero: uniform fractions.
    Zeros,
    /// Zeros plus seeded uniform jitter in `±jitter`.
    Jitter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_steps: usize,
    pub learning_rate: f64,
    pub convergence_tol: f64,
    pub init_mode: InitMode,
    pub jitter: f64,
    pub seed: u64,
    /// Consecutive step halvings allowed before giving up on a step.
    pub max_halvings: u32,
    /// Step-size multiplier after an accepted step (1.0 disables growth).
    pub step_growth: f64,
    /// Upper bound on the step size reached through growth.
    pub max_learning_rate: f64,
    /// Also descend from one start per component with that logit raised by
    /// `vertex_logit`, keeping the lowest final loss. The pair loss is not
    /// convex, so a single uniform start can stall in an interior basin.
    pub multi_start: bool,
    pub vertex_logit: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_steps: 500,
            learning_rate: 0.1,
            convergence_tol: 1e-12,
            init_mode: InitMode::Zeros,
            jitter: 0.01,
            seed: 0,
            max_halvings: 20,
            step_growth: 1.5,
            max_learning_rate: 10.0,
            multi_start: true,
            vertex_logit: 3.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), RatioError> {
        let bad = |m: String| Err(RatioError::InvalidConfig(m));
        if self.max_steps < 1 {
            return bad("max_steps must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.convergence_tol >= 0.0) {
            return bad(format!("convergence_tol must be >= 0, got {}", self.convergence_tol));
        }
        if !(self.step_growth >= 1.0 && self.max_learning_rate >= self.learning_rate) {
            return bad("need step_growth >= 1 and max_learning_rate >= learning_rate".into());
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad(format!("jitter must be >= 0, got {}", self.jitter));
        }
        if !(self.vertex_logit.is_finite() && self.vertex_logit > 0.0) {
            return bad(format!("vertex_logit must be > 0, got {}", self.vertex_logit));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedRecipe {
    pub formulation: Formulation,
    pub final_loss: f64,
    pub loss_breakdown: LossBreakdown,
    pub steps_used: usize,
    pub converged: bool,
    /// Loss after initialization and after every accepted step.
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

/// Logit spread beyond which `exp` would underflow a fraction to zero.
const MAX_LOGIT_SPREAD: f64 = 700.0;

fn project_spread(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for t in logits.iter_mut() {
        if *t < max - MAX_LOGIT_SPREAD {
            *t = max - MAX_LOGIT_SPREAD;
        }
    }
}

fn initial_params(n: usize, cfg: &OptimizerConfig) -> RatioParams {
    match cfg.init_mode {
        InitMode::Zeros => RatioParams::zeros(n),
        InitMode::Jitter => {
            let mut rng = seed::rng(cfg.seed);
            RatioParams::new((0..n).map(|_| rng.random_range(-cfg.jitter..=cfg.jitter)).collect())
        }
    }
}

struct Descent {
    params: RatioParams,
    breakdown: LossBreakdown,
    steps_used: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn descend(model: &LossModel, mut params: RatioParams, cfg: &OptimizerConfig) -> Result<Descent, RatioError> {
    let mut current = model.evaluate(&params);
    let mut loss = current.total();
    if !loss.is_finite() {
        return Err(RatioError::NonFiniteLoss { step: 0 });
    }
    let mut trace = vec![loss];
    let mut steps_used = 0;
    let mut converged = false;
    let mut lr = cfg.learning_rate;

    'outer: for step in 1..=cfg.max_steps {
        let grad = model.gradient(&params);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(RatioError::NonFiniteLoss { step });
        }
        let mut halvings = 0;
        loop {
            let mut logits: Vec<f64> = params.logits.iter().zip(&grad).map(|(t, g)| t - lr * g).collect();
            project_spread(&mut logits);
            let candidate = RatioParams::new(logits);
            let b = model.evaluate(&candidate);
            let new_loss = b.total();
            if !new_loss.is_finite() {
                return Err(RatioError::NonFiniteLoss { step });
            }
            if new_loss <= loss {
                let delta = loss - new_loss;
                params = candidate;
                current = b;
                loss = new_loss;
                trace.push(loss);
                steps_used = step;
                lr = (lr * cfg.step_growth).min(cfg.max_learning_rate);
                if delta < cfg.convergence_tol {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            halvings += 1;
            if halvings > cfg.max_halvings {
                break 'outer;
            }
            lr *= 0.5;
        }
    }
    Ok(Descent { params, breakdown: current, steps_used, converged, trace })
}

/// Gradient descent on the logits of `topology`.
///
/// A step that would raise the loss is halved and retried, up to
/// `max_halvings` times; accepted steps grow the step size by `step_growth`.
/// The recorded loss trace of the returned start is therefore non-increasing.
/// With `multi_start`, the initial point is tried first and wins ties.
pub fn optimize_ratios(
    topology: &[String],
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    loss_cfg: &LossConfig,
    opt_cfg: &OptimizerConfig,
) -> Result<OptimizedRecipe, RatioError> {
    if topology.is_empty() || topology.len() > MAX_COMPONENTS {
        return Err(RatioError::InvalidTopology(format!(
            "topology must have 1..={MAX_COMPONENTS} components, got {}",
            topology.len()
        )));
    }
    opt_cfg.validate()?;
    let model = LossModel::new(topology, library, target, protect, loss_cfg)?;
    let n = model.dim();

    let best = if n == 1 {
        let params = RatioParams::zeros(1);
        let breakdown = model.evaluate(&params);
        if !breakdown.total().is_finite() {
            return Err(RatioError::NonFiniteLoss { step: 0 });
        }
        Descent { params, breakdown, steps_used: 0, converged: true, trace: vec![breakdown.total()] }
    } else {
        let init = initial_params(n, opt_cfg);
        let mut starts = vec![init.clone()];
        if opt_cfg.multi_start {
            for i in 0..n {
                let mut v = init.clone();
                v.logits[i] += opt_cfg.vertex_logit;
                starts.push(v);
            }
        }
        let mut best: Option<Descent> = None;
        for s in starts {
            let d = descend(&model, s, opt_cfg)?;
            if best.as_ref().is_none_or(|b| d.breakdown.total() < b.breakdown.total()) {
                best = Some(d);
            }
        }
        best.expect("at least one start")
    };

    let fractions = softmax_fractions(&best.params);
    let formulation = Formulation::new(topology.to_vec(), fractions)?;
    Ok(OptimizedRecipe {
        formulation,
        final_loss: best.breakdown.total(),
        loss_breakdown: best.breakdown,
        steps_used: best.steps_used,
        converged: best.converged,
        loss_trace: best.trace,
    })
}
