//! Per-step composite reward and discounted trajectory return.

use serde::{Deserialize, Serialize};

use crate::fc::ValidationReport;
use crate::rollout::Trajectory;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub alpha_fmt: f64,
    pub alpha_schema: f64,
    pub alpha_acc: f64,
    pub lambda_pen: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha_fmt: 0.1,
            alpha_schema: 0.2,
            alpha_acc: 1.0,
            lambda_pen: 0.05,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let all = [self.alpha_fmt, self.alpha_schema, self.alpha_acc, self.lambda_pen];
        if all.iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err(RewardError::Domain(format!(
                "reward weights must be strictly positive, got {self:?}"
            )))
        }
    }

    /// Largest possible step reward.
    pub fn max_step(&self) -> f64 {
        self.alpha_fmt + self.alpha_schema + self.alpha_acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReward {
    pub fmt: u8,
    pub schema: u8,
    pub acc: u8,
    pub pen: u8,
    pub total: f64,
}

impl StepReward {
    pub fn from_indicators(fmt: bool, schema: bool, acc: bool, pen: bool, w: &RewardWeights) -> Self {
        let total = w.alpha_fmt * f64::from(u8::from(fmt))
            + w.alpha_schema * f64::from(u8::from(schema))
            + w.alpha_acc * f64::from(u8::from(acc))
            - w.lambda_pen * f64::from(u8::from(pen));
        Self {
            fmt: fmt.into(),
            schema: schema.into(),
            acc: acc.into(),
            pen: pen.into(),
            total,
        }
    }
}

pub const SUM_OPEN: &str = "<sum>";
pub const SUM_CLOSE: &str = "</sum>";
pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

const TAGS: [&str; 8] = [
    "<sum>", "</sum>", "<summary>", "</summary>", "<think>", "</think>", "<answer>", "</answer>",
];

/// The tagged regions of one action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionParts<'a> {
    pub summary: Option<&'a str>,
    pub think: &'a str,
    pub answer: &'a str,
}

fn take_block<'a>(text: &'a str, open: &str, close: &str) -> Option<(&'a str, &'a str)> {
    let rest = text.trim_start().strip_prefix(open)?;
    let end = rest.find(close)?;
    let body = &rest[..end];
    if TAGS.iter().any(|t| body.contains(t)) {
        return None;
    }
    Some((body, &rest[end + close.len()..]))
}

/// Splits `[<sum>..</sum>] <think>..</think> <answer>..</answer>`; `None` if
/// the text does not follow the tag grammar. `<summary>` is accepted as a
/// spelling of `<sum>`.
pub fn split_action(text: &str) -> Option<ActionParts<'_>> {
    let (summary, rest) = match take_block(text, SUM_OPEN, SUM_CLOSE) {
        Some((s, r)) => (Some(s), r),
        None => match take_block(text, "<summary>", "</summary>") {
            Some((s, r)) => (Some(s), r),
            None => (None, text),
        },
    };
    let (think, rest) = take_block(rest, THINK_OPEN, THINK_CLOSE)?;
    let (answer, rest) = take_block(rest, ANSWER_OPEN, ANSWER_CLOSE)?;
    if !rest.trim().is_empty() {
        return None;
    }
    Some(ActionParts {
        summary: summary.map(str::trim),
        think: think.trim(),
        answer: answer.trim(),
    })
}

pub fn template_check(action_text: &str) -> bool {
    split_action(action_text).is_some()
}

/// Composite step reward. `schema` can only be granted when the tags parse.
pub fn step_reward(
    action_text: &str,
    validation: &ValidationReport,
    success: bool,
    is_call_action: bool,
    w: &RewardWeights,
) -> StepReward {
    let fmt = template_check(action_text);
    StepReward::from_indicators(fmt, fmt && validation.pass(), success, is_call_action, w)
}

/// `Σ γ^t · r_t` over `(global_index, reward)` pairs.
pub fn discounted_return(
    rewards: impl IntoIterator<Item = (usize, f64)>,
    gamma: f64,
) -> Result<f64, RewardError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(RewardError::Domain(format!("gamma {gamma} outside (0, 1]")));
    }
    Ok(rewards
        .into_iter()
        .map(|(t, r)| gamma.powi(t as i32) * r)
        .sum())
}

pub fn trajectory_return(traj: &Trajectory, gamma: f64) -> Result<f64, RewardError> {
    discounted_return(
        traj.steps().map(|s| (s.global_index, s.reward.total)),
        gamma,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn template_examples() {
        assert!(template_check(r#"<think>t</think><answer>[done(message="ok")]</answer>"#));
        assert!(!template_check("<answer>x</answer><think>t</think>"));
        assert!(template_check("<sum>s</sum><think>t</think><answer>a</answer>"));
        assert!(template_check("<summary>s</summary> <think>t</think>\n<answer>a</answer>"));
        assert!(!template_check("hi <think>t</think><answer>a</answer>"));
        assert!(!template_check("<think>t</think><answer>a</answer> bye"));
        assert!(!template_check("<think>t</think><think>t</think><answer>a</answer>"));
        assert!(!template_check("<think>t<answer>a</answer></think><answer>a</answer>"));
        assert!(!template_check("<sum>s</sum><answer>a</answer>"));
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights::default();
        let ok = ValidationReport::default();
        let act = "<think>t</think><answer>[f()]</answer>";
        let all = step_reward(act, &ok, true, true, &w);
        assert!((all.total - 1.25).abs() < 1e-12);
        let no_success = step_reward(act, &ok, false, true, &w);
        assert!((no_success.total - 0.25).abs() < 1e-12);
        let bad = ValidationReport::unparseable("message");
        let msg = step_reward("<think>t</think><answer>I need more information.</answer>", &bad, false, false, &w);
        assert!((msg.total - 0.1).abs() < 1e-12);
        let garbage = step_reward("garbage", &ok, false, true, &w);
        assert_eq!((garbage.fmt, garbage.schema, garbage.acc, garbage.pen), (0, 0, 0, 1));
        assert!((garbage.total + 0.05).abs() < 1e-12);
    }

    #[test]
    fn returns() {
        assert!((discounted_return([(0, 0.25), (1, 1.25)], 1.0).unwrap() - 1.5).abs() < 1e-12);
        assert!((discounted_return([(0, 1.0), (1, 1.0)], 0.9).unwrap() - 1.9).abs() < 1e-12);
        assert_eq!(discounted_return([], 1.0).unwrap(), 0.0);
        assert!(discounted_return([], 0.0).is_err());
        assert!(discounted_return([], 1.5).is_err());
    }

    #[test]
    fn weights_must_be_positive() {
        let mut w = RewardWeights::default();
        assert!(w.validate().is_ok());
        w.lambda_pen = 0.0;
        assert!(w.validate().is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_schema_below_fmt(
            fmt_ok in any::<bool>(), valid in any::<bool>(), success in any::<bool>(), call in any::<bool>(),
            af in 0.01f64..2.0, as_ in 0.01f64..2.0, aa in 0.01f64..2.0, lp in 0.01f64..2.0,
        ) {
            let w = RewardWeights { alpha_fmt: af, alpha_schema: as_, alpha_acc: aa, lambda_pen: lp };
            let text = if fmt_ok { "<think></think><answer>[f()]</answer>" } else { "[f()]" };
            let report = if valid { ValidationReport::default() } else { ValidationReport::unparseable("x") };
            let r = step_reward(text, &report, success, call, &w);
            prop_assert!(r.schema <= r.fmt);
            prop_assert!(r.total >= -lp - 1e-12 && r.total <= w.max_step() + 1e-12);
            let expect = af * r.fmt as f64 + as_ * r.schema as f64 + aa * r.acc as f64 - lp * r.pen as f64;
            prop_assert_eq!(r.total, expect);
        }

        #[test]
        fn penalty_is_monotone(l1 in 0.01f64..1.0, dl in 0.001f64..1.0, success in any::<bool>()) {
            let w1 = RewardWeights { lambda_pen: l1, ..Default::default() };
            let w2 = RewardWeights { lambda_pen: l1 + dl, ..Default::default() };
            let ok = ValidationReport::default();
            let a = step_reward("<think></think><answer>[f()]</answer>", &ok, success, true, &w1);
            let b = step_reward("<think></think><answer>[f()]</answer>", &ok, success, true, &w2);
            prop_assert!(b.total < a.total);
        }

        #[test]
        fn unit_gamma_is_plain_sum(rs in proptest::collection::vec(-2.0f64..2.0, 0..20)) {
            let plain: f64 = rs.iter().sum();
            let got = discounted_return(rs.iter().copied().enumerate(), 1.0).unwrap();
            prop_assert!((plain - got).abs() < 1e-12);
        }
    }
}
