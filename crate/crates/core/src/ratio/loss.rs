//! The multi-objective ratio loss and its analytic gradient.
//!
//! Symbol table (one place, used throughout the optimizer):
//!
//! | code                     | term                                                     |
//! |--------------------------|----------------------------------------------------------|
//! | `ratio`                  | `Ra_t / (Ra_p + ε)`                                      |
//! | `diff`                   | `ω_diff · (Ra_t − Ra_p)`                                 |
//! | `penalty`                | `λ·[w_t·relu(RED_t − RED_max) + w_p·relu(RED_safe − RED_p)]` |
//! | `swelling`               | `ω_swell · relu(τ_swell − RED_t)`                        |
//! | `kinetics`               | `α_vm·relu(V̄m − V_max) + α_bp·relu(T̄b − T_max) + Σ_k β_k·relu(τ_k − f_k(φ))` |
//! | `entropy`                | `−γ Σ φ_i ln(φ_i + ε)`                                   |
//!
//! `ratio + diff + penalty + swelling` is the thermodynamic block, and the
//! penalty and kinetics hinges together play the role of the constraint term
//! `λ·C(M, φ)` of the scalar objective. The hybrid loss minimized by the search
//! is exactly the sum of all six terms.

use serde::{Deserialize, Serialize};

use super::{softmax_fractions, LossConfig, RatioError, RatioParams};
use crate::hsp::{self, HspVector, MaterialTarget};
use crate::library::{Role, SolventLibrary};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ratio: f64,
    pub diff: f64,
    pub penalty: f64,
    pub swelling: f64,
    pub kinetics: f64,
    pub entropy: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.ratio + self.diff + self.penalty + self.swelling + self.kinetics + self.entropy
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
fn active(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// The loss for one topology, with all per-solvent data gathered up front.
#[derive(Debug, Clone)]
pub struct LossModel {
    hsp: Vec<HspVector>,
    molar_volume: Vec<f64>,
    boiling_point: Vec<f64>,
    /// `(τ_k, β_k, membership mask)` for every role whose weight is non-zero.
    roles: Vec<(f64, f64, Vec<f64>)>,
    target: MaterialTarget,
    protect: MaterialTarget,
    cfg: LossConfig,
}

impl LossModel {
    pub fn new(
        topology: &[String],
        library: &SolventLibrary,
        target: &MaterialTarget,
        protect: &MaterialTarget,
        cfg: &LossConfig,
    ) -> Result<Self, RatioError> {
        if topology.is_empty() {
            return Err(RatioError::InvalidTopology("empty topology".into()));
        }
        cfg.validate()?;
        let solvents = topology
            .iter()
            .map(|n| library.require(n))
            .collect::<Result<Vec<_>, _>>()?;

        let kinetic_field = |weight: f64, field: &'static str, get: fn(&crate::library::Solvent) -> Option<f64>| {
            if weight <= 0.0 {
                return Ok(vec![0.0; solvents.len()]);
            }
            solvents
                .iter()
                .map(|s| get(s).ok_or_else(|| RatioError::MissingKineticsData { solvent: s.name.clone(), field }))
                .collect::<Result<Vec<_>, _>>()
        };
        let molar_volume = kinetic_field(cfg.alpha_vm, "molar_volume", |s| s.molar_volume)?;
        let boiling_point = kinetic_field(cfg.alpha_bp, "boiling_point", |s| s.boiling_point)?;

        let roles = Role::ALL
            .iter()
            .filter_map(|role| {
                let th = cfg.role_thresholds.get(role)?;
                if th.beta <= 0.0 {
                    return None;
                }
                let mask = solvents.iter().map(|s| if s.has_role(*role) { 1.0 } else { 0.0 }).collect();
                Some((th.tau, th.beta, mask))
            })
            .collect();

        Ok(Self {
            hsp: solvents.iter().map(|s| s.hsp).collect(),
            molar_volume,
            boiling_point,
            roles,
            target: target.clone(),
            protect: protect.clone(),
            cfg: cfg.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.hsp.len()
    }

    /// Loss terms at fractions `phi`.
    pub fn evaluate_fractions(&self, phi: &[f64]) -> LossBreakdown {
        let c = &self.cfg;
        let mix = hsp::mix_vectors(&self.hsp, phi);
        let ra_t = hsp::hsp_distance(&mix, &self.target.hsp);
        let ra_p = hsp::hsp_distance(&mix, &self.protect.hsp);
        let red_t = ra_t / self.target.interaction_radius;
        let red_p = ra_p / self.protect.interaction_radius;

        let mut kinetics = 0.0;
        if c.alpha_vm > 0.0 {
            kinetics += c.alpha_vm * relu(dot(phi, &self.molar_volume) - c.v_max);
        }
        if c.alpha_bp > 0.0 {
            kinetics += c.alpha_bp * relu(dot(phi, &self.boiling_point) - c.t_max);
        }
        for (tau, beta, mask) in &self.roles {
            kinetics += beta * relu(tau - dot(phi, mask));
        }

        LossBreakdown {
            ratio: ra_t / (ra_p + c.epsilon),
            diff: c.omega_diff * (ra_t - ra_p),
            penalty: c.penalty_weight
                * (c.hinge_target_weight * relu(red_t - c.red_target_max)
                    + c.hinge_protect_weight * relu(c.red_protect_min - red_p)),
            swelling: c.omega_swell * relu(c.swelling_threshold - red_t),
            kinetics,
            entropy: -c.gamma * phi.iter().map(|p| p * (p + c.epsilon).ln()).sum::<f64>(),
        }
    }

    /// `∂L/∂φ`, treating every hinge as inactive at its kink.
    pub fn gradient_fractions(&self, phi: &[f64]) -> Vec<f64> {
        let c = &self.cfg;
        let mix = hsp::mix_vectors(&self.hsp, phi);
        let ra_t = hsp::hsp_distance(&mix, &self.target.hsp);
        let ra_p = hsp::hsp_distance(&mix, &self.protect.hsp);
        let r0_t = self.target.interaction_radius;
        let r0_p = self.protect.interaction_radius;
        let red_t = ra_t / r0_t;
        let red_p = ra_p / r0_p;

        let denom = ra_p + c.epsilon;
        let coef_t = 1.0 / denom + c.omega_diff
            + c.penalty_weight * c.hinge_target_weight * active(red_t - c.red_target_max) / r0_t
            - c.omega_swell * active(c.swelling_threshold - red_t) / r0_t;
        let coef_p = -ra_t / (denom * denom) - c.omega_diff
            - c.penalty_weight * c.hinge_protect_weight * active(c.red_protect_min - red_p) / r0_p;

        let dt = distance_gradient(&mix, &self.target.hsp, ra_t);
        let dp = distance_gradient(&mix, &self.protect.hsp, ra_p);
        let dmix = [
            coef_t * dt[0] + coef_p * dp[0],
            coef_t * dt[1] + coef_p * dp[1],
            coef_t * dt[2] + coef_p * dp[2],
        ];

        let vm_on = if c.alpha_vm > 0.0 { c.alpha_vm * active(dot(phi, &self.molar_volume) - c.v_max) } else { 0.0 };
        let bp_on = if c.alpha_bp > 0.0 { c.alpha_bp * active(dot(phi, &self.boiling_point) - c.t_max) } else { 0.0 };
        let role_on: Vec<f64> = self.roles.iter().map(|(tau, beta, mask)| beta * active(tau - dot(phi, mask))).collect();

        (0..self.dim())
            .map(|i| {
                let h = self.hsp[i].as_array();
                let mut g = dmix[0] * h[0] + dmix[1] * h[1] + dmix[2] * h[2];
                g += vm_on * self.molar_volume[i] + bp_on * self.boiling_point[i];
                for (on, (_, _, mask)) in role_on.iter().zip(&self.roles) {
                    g -= on * mask[i];
                }
                let p = phi[i];
                g -= c.gamma * ((p + c.epsilon).ln() + p / (p + c.epsilon));
                g
            })
            .collect()
    }

    pub fn evaluate(&self, params: &RatioParams) -> LossBreakdown {
        self.evaluate_fractions(&softmax_fractions(params))
    }

    /// `∂L/∂θ = φ ⊙ (g − ⟨φ, g⟩)` with `g = ∂L/∂φ`.
    pub fn gradient(&self, params: &RatioParams) -> Vec<f64> {
        let phi = softmax_fractions(params);
        let g = self.gradient_fractions(&phi);
        let mean = dot(&phi, &g);
        phi.iter().zip(&g).map(|(p, gi)| p * (gi - mean)).collect()
    }

    pub fn red_pair(&self, phi: &[f64]) -> (f64, f64) {
        let mix = hsp::mix_vectors(&self.hsp, phi);
        (hsp::red(&mix, &self.target), hsp::red(&mix, &self.protect))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `∂Ra/∂mix`; the zero vector at `Ra = 0`.
fn distance_gradient(mix: &HspVector, other: &HspVector, ra: f64) -> [f64; 3] {
    if ra == 0.0 {
        return [0.0; 3];
    }
    [
        4.0 * (mix.delta_d - other.delta_d) / ra,
        (mix.delta_p - other.delta_p) / ra,
        (mix.delta_h - other.delta_h) / ra,
    ]
}

/// Total loss and its breakdown at `params`.
pub fn loss_total(
    params: &RatioParams,
    topology: &[String],
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    cfg: &LossConfig,
) -> Result<(f64, LossBreakdown), RatioError> {
    let model = LossModel::new(topology, library, target, protect, cfg)?;
    params.check_len(model.dim())?;
    let b = model.evaluate(params);
    Ok((b.total(), b))
}

pub fn loss_gradient(
    params: &RatioParams,
    topology: &[String],
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    cfg: &LossConfig,
) -> Result<Vec<f64>, RatioError> {
    let model = LossModel::new(topology, library, target, protect, cfg)?;
    params.check_len(model.dim())?;
    Ok(model.gradient(params))
}
