//! Training-quality metrics, the overall score, and the accept/revert rule.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::codegen::ModuleKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    pub tau: f64,
    pub eps: f64,
    pub kappa: f64,
    pub alpha_rob: f64,
    pub weights: [f64; 4],
    pub accuracy: AccuracyNorm,
    pub complexity: ComplexityMode,
    /// Convergence window; `None` means `(1, steps)`.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            tau: 1e-3,
            eps: 1e-8,
            kappa: 1e2,
            alpha_rob: 0.5,
            weights: [0.25; 4],
            accuracy: AccuracyNorm::Reciprocal,
            complexity: ComplexityMode::Inverted,
            t_min: None,
            t_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyNorm {
    /// `1 / (1 + mse)`.
    Reciprocal,
    /// `(max - mse) / (max - min)` over a candidate set.
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityMode {
    /// `1 - params / max_params`: smaller networks score higher.
    Inverted,
    /// `params / max_params` as written.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeedbackError {
    #[error("degenerate trace: {0}")]
    DegenerateTrace(&'static str),
    #[error("weights must be nonnegative and sum to 1")]
    WeightsInvalid,
}

/// First step with `L_t ≤ tau`, or `t_max` if the loss never gets there.
pub fn convergence_time(losses: &[f64], tau: f64, t_max: f64) -> f64 {
    losses
        .iter()
        .position(|l| *l <= tau)
        .map_or(t_max, |i| (i + 1) as f64)
}

/// `(T_max - T_conv) / (T_max - T_min)` clamped to `[0, 1]`.
pub fn convergence_score(t_conv: f64, t_min: f64, t_max: f64) -> f64 {
    ((t_max - t_conv) / (t_max - t_min)).clamp(0.0, 1.0)
}

/// `m̂_conv` for a trace; also returns `T_conv`.
pub fn convergence_metric(losses: &[f64], tau: f64, t_min: f64, t_max: f64) -> (f64, f64) {
    let t = convergence_time(losses, tau, t_max);
    (convergence_score(t, t_min, t_max), t)
}

/// Unnormalized `1 / T_conv`; never part of the overall score.
pub fn raw_convergence(t_conv: f64) -> f64 {
    1.0 / t_conv
}

/// `(m_acc, m̂_acc)` with `m̂_acc = 1 / (1 + mse)`.
pub fn accuracy_metric(mse: f64) -> (f64, f64) {
    (-mse, 1.0 / (1.0 + mse))
}

/// Min-max accuracy normalization across a candidate set; a set with one
/// distinct value scores 1.
pub fn accuracy_minmax(mse: f64, min: f64, max: f64) -> f64 {
    if max <= min {
        return 1.0;
    }
    ((max - mse) / (max - min)).clamp(0.0, 1.0)
}

/// `(m_comp, m̂_comp)`.
pub fn complexity_metric(params: usize, max_params: usize, mode: ComplexityMode) -> (f64, f64) {
    let m = params as f64 / max_params as f64;
    let norm = match mode {
        ComplexityMode::Inverted => 1.0 - m,
        ComplexityMode::Raw => m,
    };
    (m, norm.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub m_smooth: f64,
    pub m_grad: f64,
    pub score: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

pub fn smoothness(losses: &[f64]) -> Result<f64, FeedbackError> {
    if losses.len() < 2 {
        return Err(FeedbackError::DegenerateTrace("fewer than 2 steps"));
    }
    let (mean, _) = mean_std(losses);
    if mean.is_nan() || mean <= 0.0 {
        return Err(FeedbackError::DegenerateTrace("zero mean loss"));
    }
    let deltas: alloc::vec::Vec<f64> = losses.windows(2).map(|w| w[1] - w[0]).collect();
    let (_, std) = mean_std(&deltas);
    Ok((1.0 - std / mean).clamp(0.0, 1.0))
}

pub fn robustness_metric(
    losses: &[f64],
    final_grad_norm: f64,
    params: usize,
    eps: f64,
    kappa: f64,
    alpha_rob: f64,
) -> Result<Robustness, FeedbackError> {
    let m_smooth = smoothness(losses)?;
    let per_param = final_grad_norm / params as f64;
    let m_grad = if eps <= per_param && per_param <= kappa { 1.0 } else { 0.0 };
    Ok(Robustness {
        m_smooth,
        m_grad,
        score: alpha_rob * m_smooth + (1.0 - alpha_rob) * m_grad,
    })
}

pub fn overall_score(metrics: [f64; 4], weights: [f64; 4]) -> Result<f64, FeedbackError> {
    if weights.iter().any(|w| w.is_nan() || *w < 0.0) || libm::fabs(weights.iter().sum::<f64>() - 1.0) > 1e-9 {
        return Err(FeedbackError::WeightsInvalid);
    }
    Ok(metrics.iter().zip(weights).map(|(m, w)| m * w).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawInputs {
    pub t_conv: f64,
    pub mse: f64,
    pub params: usize,
    pub max_params: usize,
    pub m_smooth: f64,
    pub m_grad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub conv: f64,
    pub acc: f64,
    pub comp: f64,
    pub rob: f64,
    pub weights: [f64; 4],
    pub s: f64,
    pub raw: RawInputs,
}

/// Scores a completed trace with the configured metric variants.
pub fn score_trace(
    losses: &[f64],
    final_grad_norm: f64,
    mse: f64,
    params: usize,
    max_params: usize,
    cfg: &FeedbackConfig,
) -> Result<QualityScore, FeedbackError> {
    let t_min = cfg.t_min.unwrap_or(1.0);
    let t_max = cfg.t_max.unwrap_or(losses.len() as f64);
    let (conv, t_conv) = if t_max > t_min {
        convergence_metric(losses, cfg.tau, t_min, t_max)
    } else {
        let t = convergence_time(losses, cfg.tau, t_max);
        (if t <= t_min { 1.0 } else { 0.0 }, t)
    };
    let (_, acc) = accuracy_metric(mse);
    let (_, comp) = complexity_metric(params, max_params, cfg.complexity);
    let rob = robustness_metric(losses, final_grad_norm, params, cfg.eps, cfg.kappa, cfg.alpha_rob)?;
    let metrics = [conv, acc, comp, rob.score];
    let s = overall_score(metrics, cfg.weights)?;
    Ok(QualityScore {
        conv,
        acc,
        comp,
        rob: rob.score,
        weights: cfg.weights,
        s,
        raw: RawInputs {
            t_conv,
            mse,
            params,
            max_params,
            m_smooth: rob.m_smooth,
            m_grad: rob.m_grad,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Revert,
}

/// Strict improvement is required; ties revert.
pub fn refine_decision(s_t: f64, s_prev: Option<f64>) -> Decision {
    match s_prev {
        None => Decision::Accept,
        Some(p) if s_t > p => Decision::Accept,
        Some(_) => Decision::Revert,
    }
}

/// A module kind or an upstream agent; serialized as its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DirectiveTarget {
    Module(ModuleKind),
    PdeAgent,
    PinnAgent,
}

impl From<DirectiveTarget> for String {
    fn from(t: DirectiveTarget) -> String {
        String::from(t.label())
    }
}

impl TryFrom<String> for DirectiveTarget {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        match s.as_str() {
            "PDE-agent" => Ok(DirectiveTarget::PdeAgent),
            "PINN-agent" => Ok(DirectiveTarget::PinnAgent),
            other => ModuleKind::parse(other)
                .map(DirectiveTarget::Module)
                .ok_or_else(|| alloc::format!("unknown directive target `{other}`")),
        }
    }
}

impl DirectiveTarget {
    pub fn label(&self) -> &'static str {
        match self {
            DirectiveTarget::Module(k) => k.as_str(),
            DirectiveTarget::PdeAgent => "PDE-agent",
            DirectiveTarget::PinnAgent => "PINN-agent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub target: DirectiveTarget,
    pub reason: String,
    pub signature: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_examples() {
        assert_eq!(convergence_score(10.0, 5.0, 25.0), 0.75);
        assert_eq!(convergence_score(5.0, 5.0, 25.0), 1.0);
        let (m, t) = convergence_metric(&[1.0, 0.5, 0.1], 1e-3, 1.0, 3.0);
        assert_eq!((m, t), (0.0, 3.0));
    }

    #[test]
    fn accuracy_and_complexity_examples() {
        assert_eq!(accuracy_metric(0.0).1, 1.0);
        assert_eq!(accuracy_metric(1.0), (-1.0, 0.5));
        assert_eq!(complexity_metric(100, 100, ComplexityMode::Inverted).1, 0.0);
        assert_eq!(complexity_metric(50, 100, ComplexityMode::Inverted).1, 0.5);
        assert_eq!(complexity_metric(50, 100, ComplexityMode::Raw).1, 0.5);
    }

    #[test]
    fn robustness_examples() {
        let r = robustness_metric(&[4.0, 2.0, 4.0], 1.0, 10, 1e-8, 1e2, 0.5).unwrap();
        assert!((r.m_smooth - 0.4).abs() < 1e-12);
        assert_eq!(r.m_grad, 1.0);
        assert_eq!(smoothness(&[3.0, 3.0, 3.0]), Ok(1.0));
        assert_eq!(smoothness(&[1.0]), Err(FeedbackError::DegenerateTrace("fewer than 2 steps")));
        assert_eq!(smoothness(&[0.0, 0.0]), Err(FeedbackError::DegenerateTrace("zero mean loss")));
    }

    #[test]
    fn overall_examples() {
        assert_eq!(overall_score([1.0; 4], [0.25; 4]), Ok(1.0));
        assert_eq!(overall_score([0.3, 0.9, 0.1, 0.2], [1.0, 0.0, 0.0, 0.0]), Ok(0.3));
        let s = overall_score([0.75, 0.5, 0.5, 1.0], [0.25; 4]).unwrap();
        assert!((s - 0.6875).abs() < 1e-12);
        assert_eq!(overall_score([1.0; 4], [0.5; 4]), Err(FeedbackError::WeightsInvalid));
    }

    #[test]
    fn decisions() {
        assert_eq!(refine_decision(0.1, None), Decision::Accept);
        assert_eq!(refine_decision(0.8, Some(0.7)), Decision::Accept);
        assert_eq!(refine_decision(0.7, Some(0.7)), Decision::Revert);
    }
}
