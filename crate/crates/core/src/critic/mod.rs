//! Stateless hybrid evaluation of a discretized formulation.
//!
//! ```text
//! score_pre      = 60 + (0.70 - RED_pre)  / 0.01
//! score_post     = 60 + (RED_post - 1.00) / 0.01
//! score_physics  = (score_pre + score_post) / 2
//! score_qual     = 10 * rubric points (0..=10)
//! score_total    = 0.5 * score_physics + 0.5 * score_qual
//! ```
//!
//! Scores are not clamped.

pub mod remote;
pub mod rubric;
pub mod validity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::ChatError;
use crate::hsp::{self, MaterialTarget};
use crate::library::{self, Formulation, LibraryError, SolventLibrary};

pub use remote::RemoteCritic;
pub use rubric::{rubric_score, RubricConfig, RubricEntry, RubricResult};
pub use validity::{check_physical_validity, pv_pass, CheckId, ValidityConfig, Verdict, VerdictStatus};

/// Upper end of the qualitative scale.
pub const RUBRIC_MAX: f64 = 10.0;

#[derive(Debug, Error)]
pub enum CriticError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("unparseable critic reply: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsScore {
    pub score_pre: f64,
    pub score_post: f64,
    pub score_physics: f64,
}

/// Written as `130 - 100 r` and `100 r - 40`, which equal the baseline-60 forms
/// but keep the anchor points exact in floating point.
pub fn physics_score(red_pre: f64, red_post: f64) -> PhysicsScore {
    let score_pre = 130.0 - 100.0 * red_pre;
    let score_post = 100.0 * red_post - 40.0;
    PhysicsScore { score_pre, score_post, score_physics: (score_pre + score_post) / 2.0 }
}

pub fn combine(score_physics: f64, score_qualitative: f64) -> f64 {
    0.5 * score_physics + 0.5 * score_qualitative
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualitativeBackend {
    #[default]
    Rubric,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticConfig {
    pub backend: QualitativeBackend,
    pub rubric: RubricConfig,
    pub validity: ValidityConfig,
}

pub struct QualitativeRequest<'a> {
    pub formulation: &'a Formulation,
    pub library: &'a SolventLibrary,
    pub red_pre: f64,
    pub red_post: f64,
    pub rubric: &'a RubricResult,
}

/// A source of 0–10 qualitative points other than the built-in rubric.
pub trait QualitativeCritic: Send + Sync {
    fn name(&self) -> &str;
    fn assess(&self, req: &QualitativeRequest<'_>) -> Result<f64, CriticError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub red_pre: f64,
    pub red_post: f64,
    pub score_pre: f64,
    pub score_post: f64,
    pub score_physics: f64,
    /// Qualitative points actually used, 0–10.
    pub rubric_points: f64,
    /// The deterministic rubric, always computed.
    pub rubric: RubricResult,
    /// `rubric` or the name of the external backend.
    pub qualitative_source: String,
    pub score_qualitative: f64,
    pub score_total: f64,
    pub pv_pass: bool,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    /// Backend fallbacks and similar.
    pub events: Vec<String>,
}

impl EvaluationReport {
    pub fn first_failure(&self) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.is_hard_failure())
    }
}

pub struct Critic {
    config: CriticConfig,
    backend: Option<Box<dyn QualitativeCritic>>,
}

impl std::fmt::Debug for Critic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Critic")
            .field("config", &self.config)
            .field("backend", &self.backend.as_ref().map(|b| b.name().to_string()))
            .finish()
    }
}

impl Critic {
    pub fn new(config: CriticConfig) -> Self {
        Self { config, backend: None }
    }

    pub fn with_backend(config: CriticConfig, backend: Box<dyn QualitativeCritic>) -> Self {
        Self { config, backend: Some(backend) }
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    pub fn hybrid_score(
        &self,
        formulation: &Formulation,
        library: &SolventLibrary,
        target: &MaterialTarget,
        protect: &MaterialTarget,
    ) -> Result<EvaluationReport, LibraryError> {
        let mix = library::mix_hsp(formulation, library)?;
        let red_pre = hsp::red(&mix, target);
        let red_post = hsp::red(&mix, protect);
        let phys = physics_score(red_pre, red_post);
        let rubric = rubric_score(formulation, red_pre, red_post, library, &self.config.rubric)?;
        let verdicts = check_physical_validity(formulation, library, target, protect, &self.config.validity)?;

        let mut events = Vec::new();
        let (points, source) = match &self.backend {
            None => (f64::from(rubric.points), "rubric".to_string()),
            Some(b) => {
                let req = QualitativeRequest { formulation, library, red_pre, red_post, rubric: &rubric };
                match b.assess(&req) {
                    Ok(p) => (p, b.name().to_string()),
                    Err(e) => {
                        events.push(format!("qualitative backend {} failed, used rubric: {e}", b.name()));
                        (f64::from(rubric.points), "rubric".to_string())
                    }
                }
            }
        };

        let mut warnings: Vec<String> =
            rubric.warn_solvents.iter().map(|n| format!("yellow warning: {n} is a warn-class solvent")).collect();
        for v in &verdicts {
            if v.status == VerdictStatus::Warn {
                warnings.push(format!("{}: {}", v.check.as_str(), v.detail));
            }
        }

        let score_qualitative = points * 10.0;
        Ok(EvaluationReport {
            red_pre,
            red_post,
            score_pre: phys.score_pre,
            score_post: phys.score_post,
            score_physics: phys.score_physics,
            rubric_points: points,
            rubric,
            qualitative_source: source,
            score_qualitative,
            score_total: combine(phys.score_physics, score_qualitative),
            pv_pass: pv_pass(&verdicts),
            verdicts,
            warnings,
            events,
        })
    }
}

/// Rubric-backed scoring with a default-configured critic.
pub fn hybrid_score(
    formulation: &Formulation,
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
) -> Result<EvaluationReport, LibraryError> {
    Critic::new(CriticConfig::default()).hybrid_score(formulation, library, target, protect)
}
