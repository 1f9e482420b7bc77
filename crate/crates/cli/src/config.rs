//! Run configuration: one TOML file, `--set key=value` overrides, and a
//! generated reference of every key with its default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sds_core::chat::EndpointConfig;
use sds_core::critic::CriticConfig;
use sds_core::planner::{PlanThresholds, StrategyMode};
use sds_core::proposal::HeuristicConfig;
use sds_core::ratio::{LossConfig, OptimizerConfig, SimplifyConfig};
use sds_core::search::{EngineConfig, SearchConfig};
use sds_core::{HspVector, MaterialTarget};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub name: String,
    /// `[δd, δp, δh]` in MPa^0.5.
    pub hsp: [f64; 3],
    pub r0: f64,
}

impl MaterialSpec {
    fn from_target(t: &MaterialTarget) -> Self {
        Self { name: t.name.clone(), hsp: t.hsp.as_array(), r0: t.interaction_radius }
    }

    pub fn to_target(&self) -> MaterialTarget {
        MaterialTarget { name: self.name.clone(), hsp: HspVector::from_array(self.hsp), interaction_radius: self.r0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Heuristic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub heuristic: HeuristicConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub strategy: StrategyMode,
    pub thresholds: PlanThresholds,
    /// Memory file; defaults to `<output_dir>/memory.jsonl`, recreated per run.
    pub memory_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub best_candidates: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { best_candidates: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Library CSV; the bundled table when unset.
    pub library_path: Option<PathBuf>,
    /// Restrict the library to these names, in this order.
    pub library_subset: Option<Vec<String>>,
    /// Names refused in any formulation.
    pub prohibited: Vec<String>,
    pub output_dir: PathBuf,
    pub target: MaterialSpec,
    pub protect: MaterialSpec,
    pub search: SearchConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub simplify: SimplifyConfig,
    pub critic: CriticConfig,
    pub planner: PlannerConfig,
    pub generator: GeneratorConfig,
    pub endpoint: EndpointConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            library_path: None,
            library_subset: None,
            prohibited: sds_core::library::DEFAULT_PROHIBITED.iter().map(|s| s.to_string()).collect(),
            output_dir: PathBuf::from("sds-out"),
            target: MaterialSpec::from_target(&MaterialTarget::default_target()),
            protect: MaterialSpec::from_target(&MaterialTarget::default_protect()),
            search: SearchConfig::default(),
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            simplify: SimplifyConfig::default(),
            critic: CriticConfig::default(),
            planner: PlannerConfig::default(),
            generator: GeneratorConfig::default(),
            endpoint: EndpointConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies overrides in order,
    /// then deserializes and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let toml::Value::Table(mut root) = defaults_value() else { unreachable!("defaults are a table") };
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config("", format!("cannot read {}: {e}", p.display())))?;
            let file = text.parse::<toml::Table>().map_err(|e| CliError::config("", format!("{}: {e}", p.display())))?;
            merge(&mut root, file);
        }
        for (key, raw) in overrides {
            apply_override(&mut root, key, raw)?;
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(root)).map_err(|e| {
            let key = e.path().to_string();
            let key = if key == "." { String::new() } else { key };
            let msg = e.into_inner().to_string();
            CliError::config(&key, msg.lines().next().unwrap_or_default().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (key, m) in [("target", &self.target), ("protect", &self.protect)] {
            m.to_target().validate().map_err(|e| CliError::config(key, e.to_string()))?;
        }
        self.search.validate().map_err(|(k, m)| CliError::config(&format!("search.{k}"), m))?;
        self.loss.validate().map_err(|e| CliError::config("loss", e.to_string()))?;
        self.optimizer.validate().map_err(|e| CliError::config("optimizer", e.to_string()))?;
        self.simplify.validate().map_err(|m| CliError::config("simplify", m))?;
        self.critic.validity.validate().map_err(|m| CliError::config("critic.validity", m))?;
        self.planner.thresholds.validate().map_err(|m| CliError::config("planner.thresholds", m))?;
        self.generator.heuristic.validate().map_err(|m| CliError::config("generator.heuristic", m))?;
        if self.report.best_candidates == 0 {
            return Err(CliError::config("report.best_candidates", "must be >= 1"));
        }
        if self.library_subset.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(CliError::config("library_subset", "must name at least one solvent"));
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            search: self.search.clone(),
            loss: self.loss.clone(),
            optimizer: self.optimizer.clone(),
            simplify: self.simplify.clone(),
            thresholds: self.planner.thresholds.clone(),
            strategy: self.planner.strategy,
        }
    }
}

/// Parses `key=value` from the command line.
pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let k = k.trim();
    if k.is_empty() || k.split('.').any(|p| p.is_empty()) {
        return Err(format!("bad key {k:?}"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// Sections merge key by key; any other value replaces the default.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// The value is read as a TOML value; anything that does not parse is taken
/// as a bare string, so `--set search.mode=full` works unquoted.
fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<(), CliError> {
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("key has at least one part");
    let mut table = root;
    for (i, p) in parents.iter().enumerate() {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::config(&parts[..=i].join("."), "is not a section")),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Origin {
    /// Fixed by the method; changing it changes what is being computed.
    Method,
    /// A tuning or plumbing choice.
    Engineering,
}

struct KeyDoc {
    key: &'static str,
    origin: Origin,
    doc: &'static str,
}

const fn m(key: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, origin: Origin::Method, doc }
}

const fn e(key: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, origin: Origin::Engineering, doc }
}

const KEYS: &[KeyDoc] = &[
    e("library_path", "solvent library CSV; unset uses the bundled table"),
    e("library_subset", "restrict the library to these names"),
    m("prohibited", "solvents refused in any formulation"),
    e("output_dir", "directory for run outputs"),
    m("target.name", "layer that must dissolve"),
    m("target.hsp", "[dD, dP, dH] MPa^0.5"),
    m("target.r0", "interaction radius"),
    m("protect.name", "layer that must stay intact"),
    m("protect.hsp", "[dD, dP, dH] MPa^0.5"),
    m("protect.r0", "interaction radius"),
    e("search.max_iterations", "iteration budget T"),
    e("search.max_children", "children per node K"),
    e("search.exploration_constant", "UCB exploration constant C"),
    m("search.mode", "naive | sibling_aware | full"),
    e("search.seed", "root seed for every random draw"),
    e("search.max_depth", "nodes at this depth are never expanded"),
    e("search.failure_floor", "reward for candidates failing a hard check"),
    e("search.max_attempts", "generator calls per expansion"),
    e("search.plan_refresh", "plan refresh interval in full mode; unset means ceil(T/3)"),
    e("search.run_id", "memory provenance tag; unset means <mode>-<seed>"),
    e("loss.epsilon", "guard inside the ratio denominator"),
    e("loss.omega_diff", "weight on the RED difference term"),
    e("loss.omega_swell", "weight on the swelling hinge"),
    m("loss.swelling_threshold", "RED_pre below this is penalized as swelling"),
    m("loss.red_target_max", "hinge bound on RED_pre"),
    m("loss.red_protect_min", "hinge bound on RED_post"),
    e("loss.penalty_weight", "overall multiplier on the RED hinges"),
    e("loss.hinge_target_weight", "weight of the RED_pre hinge"),
    e("loss.hinge_protect_weight", "weight of the RED_post hinge"),
    e("loss.alpha_vm", "molar-volume kinetics weight; 0 disables"),
    e("loss.v_max", "molar-volume ceiling, cm3/mol"),
    e("loss.alpha_bp", "boiling-point kinetics weight; 0 disables"),
    e("loss.t_max", "boiling-point ceiling, C"),
    e("loss.role_thresholds", "per-role minimum mass: { role = { tau, beta } }"),
    e("loss.gamma", "entropy regularizer weight"),
    e("optimizer.max_steps", "descent steps per start"),
    e("optimizer.learning_rate", "initial step size"),
    e("optimizer.convergence_tol", "stop when the loss improves by less than this"),
    e("optimizer.init_mode", "zeros | jitter"),
    e("optimizer.jitter", "logit jitter half-width for init_mode = jitter"),
    e("optimizer.seed", "jitter seed; searches derive it per iteration"),
    e("optimizer.max_halvings", "backtracking halvings before a step is abandoned"),
    e("optimizer.step_growth", "step multiplier after an accepted step"),
    e("optimizer.max_learning_rate", "cap on the grown step size"),
    e("optimizer.multi_start", "also start from each vertex-leaning point"),
    e("optimizer.vertex_logit", "logit raise for the vertex-leaning starts"),
    m("simplify.increment_pct", "rounding step in percent"),
    m("simplify.prune_below", "components below this fraction are dropped"),
    e("critic.backend", "rubric | remote"),
    e("critic.rubric.excellent_red_pre", "RED_pre below this rates excellent"),
    e("critic.rubric.excellent_red_post", "RED_post above this rates excellent"),
    e("critic.rubric.fail_red_pre", "RED_pre above this rates 0"),
    e("critic.rubric.fraction_floor", "rubric penalty below this fraction"),
    e("critic.rubric.bp_spread_min", "rubric evaporation spread, C"),
    m("critic.validity.red_pre_max", "RED_pre must be below this"),
    m("critic.validity.red_post_min", "RED_post at or above this passes"),
    e("critic.validity.red_post_conditional", "RED_post in [this, red_post_min) warns"),
    m("critic.validity.fraction_floor", "minimum component fraction"),
    e("critic.validity.bp_spread_min", "minimum boiling-point spread, C"),
    e("critic.validity.flash_point_min", "minimum flash point, C; unset disables"),
    e("planner.strategy", "balanced | innovation | green | engineering"),
    e("planner.memory_path", "memory JSONL; unset means <output_dir>/memory.jsonl, recreated per run"),
    e("planner.thresholds.champion", "champion band lower edge"),
    e("planner.thresholds.yellow", "yellow-flag band lower edge"),
    e("planner.thresholds.kill", "kill-list upper edge"),
    e("planner.thresholds.section_cap", "entries per plan section"),
    e("generator.kind", "heuristic | remote"),
    e("generator.heuristic.separation_weight", "reward for distance from the protected layer"),
    e("generator.heuristic.exploration_bonus", "bonus for solvents the plan suggests"),
    e("generator.heuristic.usage_penalty", "penalty for frequently used solvents"),
    e("generator.heuristic.max_components", "largest topology assembled"),
    e("generator.heuristic.modifier_bp_spread", "pairs with a narrower bp spread get a modifier"),
    e("endpoint.base_url", "chat-completion service root"),
    e("endpoint.model", "model name sent with each request"),
    e("endpoint.token_env", "environment variable holding the bearer token"),
    e("endpoint.timeout_secs", "per-request timeout"),
    e("endpoint.max_retries", "retries on transport errors and 5xx"),
    e("endpoint.retry_backoff_ms", "base backoff between retries"),
    e("endpoint.temperature", "sampling temperature; unset omits it"),
    e("report.best_candidates", "rows in the best-candidates report"),
];

fn lookup<'a>(root: &'a toml::Value, key: &str) -> Option<&'a toml::Value> {
    key.split('.').try_fold(root, |v, k| v.get(k))
}

fn defaults_value() -> toml::Value {
    toml::Value::try_from(RunConfig::default()).expect("defaults serialize")
}

/// Every key with its default, grouped by section. Unset optional keys are
/// shown commented out.
pub fn reference() -> String {
    let root = defaults_value();
    let mut out = String::from(
        "# sds run configuration reference\n\
         # [method]      value fixed by the formulation method\n\
         # [engineering] tuning or plumbing default\n",
    );
    let mut section = "";
    for k in KEYS {
        let (sec, leaf) = k.key.rsplit_once('.').unwrap_or(("", k.key));
        if sec != section {
            out.push_str(&format!("\n[{sec}]\n"));
            section = sec;
        }
        let tag = match k.origin {
            Origin::Method => "method",
            Origin::Engineering => "engineering",
        };
        match lookup(&root, k.key) {
            Some(v) => out.push_str(&format!("{leaf} = {}  # [{tag}] {}\n", inline(v), k.doc)),
            None => out.push_str(&format!("# {leaf} =  # [{tag}] {}\n", k.doc)),
        }
    }
    out
}

fn inline(v: &toml::Value) -> String {
    match v {
        toml::Value::Table(t) if t.is_empty() => "{}".into(),
        toml::Value::Float(f) if f.fract() == 0.0 && f.abs() < 1e15 => format!("{f:.1}"),
        other => other.to_string(),
    }
}
