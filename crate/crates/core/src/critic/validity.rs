//! Physical-validity checks on a discretized formulation.

use serde::{Deserialize, Serialize};

use crate::hsp::{self, MaterialTarget};
use crate::library::{self, Formulation, LibraryError, SolventLibrary, MAX_COMPONENTS, MIN_COMPONENTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    RedTarget,
    RedProtect,
    Sparsity,
    FractionFloor,
    Prohibited,
    BoilingGradient,
    FlashPoint,
}

impl CheckId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckId::RedTarget => "red_target",
            CheckId::RedProtect => "red_protect",
            CheckId::Sparsity => "sparsity",
            CheckId::FractionFloor => "fraction_floor",
            CheckId::Prohibited => "prohibited",
            CheckId::BoilingGradient => "boiling_gradient",
            CheckId::FlashPoint => "flash_point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    /// Passes, with a flag attached.
    Warn,
    Fail,
    NotEvaluable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: CheckId,
    pub status: VerdictStatus,
    /// Hard checks decide `pv_pass`; soft ones only warn.
    pub hard: bool,
    pub detail: String,
}

impl Verdict {
    pub fn is_hard_failure(&self) -> bool {
        self.hard && self.status == VerdictStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidityConfig {
    /// RED against the target must be strictly below this.
    pub red_pre_max: f64,
    /// RED against the protected layer at or above this passes cleanly.
    pub red_post_min: f64,
    /// Lower edge of the conditional-pass band for RED against the protected layer.
    pub red_post_conditional: f64,
    pub fraction_floor: f64,
    /// Minimum boiling-point spread (°C) across components.
    pub bp_spread_min: f64,
    /// Minimum component flash point (°C); `None` disables the check.
    pub flash_point_min: Option<f64>,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        Self {
            red_pre_max: 1.0,
            red_post_min: 1.0,
            red_post_conditional: 0.8,
            fraction_floor: 0.05,
            bp_spread_min: 30.0,
            flash_point_min: None,
        }
    }
}

impl ValidityConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.red_pre_max > 0.0) {
            return Err(format!("red_pre_max must be > 0, got {}", self.red_pre_max));
        }
        if !(0.0 <= self.red_post_conditional && self.red_post_conditional <= self.red_post_min) {
            return Err(format!(
                "need 0 <= red_post_conditional <= red_post_min, got {} and {}",
                self.red_post_conditional, self.red_post_min
            ));
        }
        if !(0.0..1.0).contains(&self.fraction_floor) {
            return Err(format!("fraction_floor must lie in [0, 1), got {}", self.fraction_floor));
        }
        if !(self.bp_spread_min >= 0.0) {
            return Err(format!("bp_spread_min must be >= 0, got {}", self.bp_spread_min));
        }
        Ok(())
    }
}

/// Maximum minus minimum boiling point, or `None` when any component lacks one.
pub fn boiling_spread(formulation: &Formulation, library: &SolventLibrary) -> Result<Option<f64>, LibraryError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for name in &formulation.components {
        match library.require(name)?.boiling_point {
            Some(bp) => {
                lo = lo.min(bp);
                hi = hi.max(bp);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(hi - lo))
}

pub fn check_physical_validity(
    formulation: &Formulation,
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    cfg: &ValidityConfig,
) -> Result<Vec<Verdict>, LibraryError> {
    let mix = library::mix_hsp(formulation, library)?;
    let red_pre = hsp::red(&mix, target);
    let red_post = hsp::red(&mix, protect);
    let mut out = Vec::with_capacity(7);

    let pass = |ok: bool| if ok { VerdictStatus::Pass } else { VerdictStatus::Fail };

    out.push(Verdict {
        check: CheckId::RedTarget,
        status: pass(red_pre < cfg.red_pre_max),
        hard: true,
        detail: format!("RED vs {} = {red_pre:.4} (must be < {})", target.name, cfg.red_pre_max),
    });

    let status = if red_post >= cfg.red_post_min {
        VerdictStatus::Pass
    } else if red_post >= cfg.red_post_conditional {
        VerdictStatus::Warn
    } else {
        VerdictStatus::Fail
    };
    out.push(Verdict {
        check: CheckId::RedProtect,
        status,
        hard: true,
        detail: format!(
            "RED vs {} = {red_post:.4} (pass >= {}, conditional >= {})",
            protect.name, cfg.red_post_min, cfg.red_post_conditional
        ),
    });

    let n = formulation.len();
    out.push(Verdict {
        check: CheckId::Sparsity,
        status: pass((MIN_COMPONENTS..=MAX_COMPONENTS).contains(&n)),
        hard: true,
        detail: format!("{n} component(s), allowed {MIN_COMPONENTS}..={MAX_COMPONENTS}"),
    });

    let low: Vec<&str> = formulation.iter().filter(|(_, p)| *p < cfg.fraction_floor).map(|(c, _)| c).collect();
    out.push(Verdict {
        check: CheckId::FractionFloor,
        status: pass(low.is_empty()),
        hard: true,
        detail: if low.is_empty() {
            format!("all fractions >= {}", cfg.fraction_floor)
        } else {
            format!("below {}: {}", cfg.fraction_floor, low.join(", "))
        },
    });

    let mut banned = Vec::new();
    for name in &formulation.components {
        if library.require(name)?.is_prohibited() {
            banned.push(name.as_str());
        }
    }
    out.push(Verdict {
        check: CheckId::Prohibited,
        status: pass(banned.is_empty()),
        hard: true,
        detail: if banned.is_empty() { "no prohibited solvents".into() } else { format!("on the prohibited list: {}", banned.join(", ")) },
    });

    let (status, detail) = match boiling_spread(formulation, library)? {
        None => (VerdictStatus::NotEvaluable, "boiling point missing for at least one component".to_string()),
        Some(s) if s >= cfg.bp_spread_min => (VerdictStatus::Pass, format!("boiling-point spread {s:.0} °C")),
        Some(s) => (VerdictStatus::Warn, format!("boiling-point spread {s:.0} °C < {} °C", cfg.bp_spread_min)),
    };
    out.push(Verdict { check: CheckId::BoilingGradient, status, hard: false, detail });

    let (status, detail) = match cfg.flash_point_min {
        None => (VerdictStatus::NotEvaluable, "flash-point floor not configured".to_string()),
        Some(min) => {
            let mut fps = Vec::with_capacity(n);
            for name in &formulation.components {
                fps.push(library.require(name)?.flash_point);
            }
            if fps.iter().any(Option::is_none) {
                (VerdictStatus::NotEvaluable, "flash point missing for at least one component".to_string())
            } else {
                let lowest = fps.into_iter().flatten().fold(f64::INFINITY, f64::min);
                (pass(lowest >= min), format!("lowest component flash point {lowest:.0} °C (floor {min} °C)"))
            }
        }
    };
    out.push(Verdict { check: CheckId::FlashPoint, status, hard: cfg.flash_point_min.is_some(), detail });

    Ok(out)
}

pub fn pv_pass(verdicts: &[Verdict]) -> bool {
    !verdicts.iter().any(Verdict::is_hard_failure)
}
