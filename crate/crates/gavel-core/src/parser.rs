//! Extraction and validation of judge verdicts from raw completion text.
//!
//! Parsing never fails with an exception: every input maps to exactly one
//! [`ParseOutcome`]. Malformed output is `Flagged` so the caller can decide
//! whether to re-query; soft contract violations (an over-long rationale)
//! still yield a usable judgment plus a note in `violations`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::prompt::PromptMode;
use crate::rubric::{
    rationale_word_count, AxisScores, Choice, Judgment, RubricAxis, ScalarReward,
    MAX_RATIONALE_WORDS,
};

/// Default re-query budget for flagged completions.
pub const DEFAULT_MAX_PARSE_ATTEMPTS: u32 = 3;

/// Reward substituted when a completion stays non-compliant after the full
/// re-query budget. Neutral, so persistent format failures do not bias the
/// policy update in either direction.
pub const NEUTRAL_FALLBACK_REWARD: f64 = 0.0;

/// One raw backend completion, as delivered by the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCompletion {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
}

/// Result of parsing one completion.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    /// A judgment satisfying the output contract, modulo the soft
    /// violations listed (e.g. "rationale over 20 words").
    Parsed {
        judgment: Judgment,
        violations: Vec<String>,
    },
    /// The completion broke the contract; `raw` keeps the original text for
    /// the flag log.
    Flagged { reason: String, raw: String },
}

impl ParseOutcome {
    pub fn is_flagged(&self) -> bool {
        matches!(self, ParseOutcome::Flagged { .. })
    }
}

/// Parser configuration for one judging run.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub mode: PromptMode,
    /// Strip a markdown code fence around the JSON instead of flagging it.
    /// Off by default: fenced output counts as content outside the object.
    pub lenient_fences: bool,
}

impl ParseOptions {
    pub fn for_mode(mode: &PromptMode) -> Self {
        ParseOptions {
            mode: *mode,
            lenient_fences: false,
        }
    }

    pub fn with_lenient_fences(mut self, on: bool) -> Self {
        self.lenient_fences = on;
        self
    }
}

/// Parse a raw completion against the output contract for `opts.mode`.
pub fn parse_judgment(raw: &RawCompletion, opts: &ParseOptions) -> ParseOutcome {
    parse_judgment_str(&raw.text, opts)
}

/// String-level parser; see [`parse_judgment`].
pub fn parse_judgment_str(text: &str, opts: &ParseOptions) -> ParseOutcome {
    let flag = |reason: &str| ParseOutcome::Flagged {
        reason: reason.to_string(),
        raw: text.to_string(),
    };

    let mut violations: Vec<String> = Vec::new();
    let mut body = text.trim();

    if opts.lenient_fences {
        if let Some(inner) = strip_code_fence(body) {
            body = inner.trim();
            violations.push("code fence stripped".to_string());
        }
    }

    if matches!(opts.mode, PromptMode::Naive) {
        return match body {
            "A" => ParseOutcome::Parsed {
                judgment: Judgment {
                    better: Some(Choice::A),
                    score: None,
                    subscores: None,
                    rationale: None,
                },
                violations,
            },
            "B" => ParseOutcome::Parsed {
                judgment: Judgment {
                    better: Some(Choice::B),
                    score: None,
                    subscores: None,
                    rationale: None,
                },
                violations,
            },
            _ => flag("naive reply not A or B"),
        };
    }

    let Some(start) = body.find('{') else {
        return flag("no JSON object found");
    };
    if !body[..start].trim().is_empty() {
        return flag("content outside JSON");
    }
    let Some(end) = find_object_end(&body[start..]) else {
        return flag("unterminated JSON object");
    };
    let object_text = &body[start..start + end];
    if !body[start + end..].trim().is_empty() {
        return flag("content outside JSON");
    }

    let value: Value = match serde_json::from_str(object_text) {
        Ok(v) => v,
        Err(e) => return flag(&format!("invalid JSON: {e}")),
    };
    let Value::Object(fields) = value else {
        return flag("top-level value is not an object");
    };

    // better
    let better = match fields.get("better") {
        None => None,
        Some(Value::String(s)) if s == "A" => Some(Choice::A),
        Some(Value::String(s)) if s == "B" => Some(Choice::B),
        Some(_) => return flag("better must be \"A\" or \"B\""),
    };

    // score must be a numeric literal; string-encoded numbers are backend drift
    let score = match fields.get("score") {
        None => None,
        Some(Value::Number(n)) => match n.as_f64() {
            Some(v) if (-1.0..=1.0).contains(&v) => Some(v),
            Some(_) => return flag("score out of range"),
            None => return flag("score not numeric"),
        },
        Some(_) => return flag("score not numeric"),
    };

    // subscores, when present, need exactly the five axes, each numeric in range
    let subscores = match fields.get("subscores") {
        None => None,
        Some(Value::Object(map)) => {
            for key in map.keys() {
                if !RubricAxis::ALL.iter().any(|a| a.name() == key) {
                    return flag(&format!("unknown subscore axis: {key}"));
                }
            }
            let axis_value = |axis: RubricAxis| -> Result<f64, ParseOutcome> {
                match map.get(axis.name()) {
                    None => Err(flag(&format!("subscores missing axis: {axis}"))),
                    Some(Value::Number(n)) => match n.as_f64() {
                        Some(v) if (-1.0..=1.0).contains(&v) => Ok(v),
                        Some(_) => Err(flag(&format!("subscore out of range: {axis}"))),
                        None => Err(flag(&format!("subscore not numeric: {axis}"))),
                    },
                    Some(_) => Err(flag(&format!("subscore not numeric: {axis}"))),
                }
            };
            let scores = AxisScores {
                correctness: match axis_value(RubricAxis::Correctness) {
                    Ok(v) => v,
                    Err(f) => return f,
                },
                safety: match axis_value(RubricAxis::Safety) {
                    Ok(v) => v,
                    Err(f) => return f,
                },
                reasoning: match axis_value(RubricAxis::Reasoning) {
                    Ok(v) => v,
                    Err(f) => return f,
                },
                factuality: match axis_value(RubricAxis::Factuality) {
                    Ok(v) => v,
                    Err(f) => return f,
                },
                clarity: match axis_value(RubricAxis::Clarity) {
                    Ok(v) => v,
                    Err(f) => return f,
                },
            };
            Some(scores)
        }
        Some(_) => return flag("subscores must be an object"),
    };

    // rationale
    let rationale = match fields.get("rationale") {
        None => None,
        Some(Value::String(s)) => {
            if rationale_word_count(s) > MAX_RATIONALE_WORDS {
                violations.push("rationale over 20 words".to_string());
            }
            Some(s.clone())
        }
        Some(_) => return flag("rationale must be a string"),
    };

    // Required fields depend on the judging mode: pairwise verdicts need a
    // preference; long-document / single-answer verdicts need the Eq-style
    // score-and-rationale pair.
    match opts.mode {
        PromptMode::ZeroShot | PromptMode::FewShot(_) => {
            if better.is_none() {
                return flag("missing field: better");
            }
        }
        PromptMode::LongDocument => {
            if score.is_none() {
                return flag("missing field: score");
            }
            if rationale.is_none() {
                return flag("missing field: rationale");
            }
        }
        PromptMode::Naive => unreachable!("handled above"),
    }

    let score = match score {
        Some(v) => match ScalarReward::new(v) {
            Ok(r) => Some(r),
            Err(_) => return flag("score out of range"),
        },
        None => None,
    };

    ParseOutcome::Parsed {
        judgment: Judgment {
            better,
            score,
            subscores,
            rationale,
        },
        violations,
    }
}

/// Byte offset one past the matching `}` for an object starting at `s[0] == '{'`,
/// honoring string literals and escapes. `None` if unbalanced.
fn find_object_end(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Strip one surrounding markdown fence (``` or ```json). Returns the inner
/// text only when both the opening and closing fence are present.
fn strip_code_fence(s: &str) -> Option<&str> {
    let rest = s.strip_prefix("```")?;
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    let rest = rest.strip_prefix('\n').unwrap_or(rest);
    let inner = rest.strip_suffix("```")?;
    Some(inner)
}

/// What to do with a parse outcome at the given attempt number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RequeueDecision {
    Retry,
    GiveUp { fallback_reward: f64 },
}

/// Flag-and-requeue policy: flagged completions are re-queried until the
/// attempt budget runs out, then surrendered with the neutral fallback
/// reward. Returns `None` for parsed outcomes; they never reach the policy.
pub fn requeue_policy(
    outcome: &ParseOutcome,
    attempt: u32,
    max_attempts: u32,
) -> Option<RequeueDecision> {
    debug_assert!(attempt >= 1);
    match outcome {
        ParseOutcome::Parsed { .. } => None,
        ParseOutcome::Flagged { .. } => {
            if attempt < max_attempts {
                Some(RequeueDecision::Retry)
            } else {
                Some(RequeueDecision::GiveUp {
                    fallback_reward: NEUTRAL_FALLBACK_REWARD,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise() -> ParseOptions {
        ParseOptions::for_mode(&PromptMode::ZeroShot)
    }

    fn longdoc() -> ParseOptions {
        ParseOptions::for_mode(&PromptMode::LongDocument)
    }

    fn expect_parsed(outcome: ParseOutcome) -> (Judgment, Vec<String>) {
        match outcome {
            ParseOutcome::Parsed {
                judgment,
                violations,
            } => (judgment, violations),
            ParseOutcome::Flagged { reason, .. } => panic!("unexpected flag: {reason}"),
        }
    }

    fn expect_flag(outcome: ParseOutcome) -> String {
        match outcome {
            ParseOutcome::Flagged { reason, .. } => reason,
            ParseOutcome::Parsed { .. } => panic!("expected a flag"),
        }
    }

    #[test]
    fn clean_pairwise_json_parses() {
        let (j, v) = expect_parsed(parse_judgment_str(
            r#"{"better":"A","score":0.7,"rationale":"A cites the document correctly"}"#,
            &pairwise(),
        ));
        assert_eq!(j.better, Some(Choice::A));
        assert_eq!(j.score.unwrap().value(), 0.7);
        assert!(v.is_empty());
    }

    #[test]
    fn prose_wrapped_json_is_flagged() {
        let reason = expect_flag(parse_judgment_str(
            r#"Sure! Here is my verdict: {"better":"B","score":-0.2,"rationale":"..."}"#,
            &pairwise(),
        ));
        assert_eq!(reason, "content outside JSON");
    }

    #[test]
    fn trailing_prose_is_flagged() {
        let reason = expect_flag(parse_judgment_str(
            r#"{"better":"B"} hope that helps!"#,
            &pairwise(),
        ));
        assert_eq!(reason, "content outside JSON");
    }

    #[test]
    fn surrounding_whitespace_is_tolerated() {
        let (j, v) = expect_parsed(parse_judgment_str(
            "  \n\t {\"better\":\"B\",\"score\":-0.2,\"rationale\":\"b wins\"} \n ",
            &pairwise(),
        ));
        assert_eq!(j.better, Some(Choice::B));
        assert!(v.is_empty());
    }

    #[test]
    fn out_of_range_score_is_flagged() {
        let reason = expect_flag(parse_judgment_str(
            r#"{"better":"A","score":1.5,"rationale":"ok"}"#,
            &pairwise(),
        ));
        assert_eq!(reason, "score out of range");
    }

    #[test]
    fn string_encoded_score_is_flagged() {
        let reason = expect_flag(parse_judgment_str(
            r#"{"better":"A","score":"0.5","rationale":"ok"}"#,
            &pairwise(),
        ));
        assert_eq!(reason, "score not numeric");
    }

    #[test]
    fn integer_score_is_accepted() {
        let (j, _) = expect_parsed(parse_judgment_str(
            r#"{"better":"A","score":1,"rationale":"ok"}"#,
            &pairwise(),
        ));
        assert_eq!(j.score.unwrap().value(), 1.0);
    }

    #[test]
    fn long_rationale_is_a_soft_violation() {
        let words = vec!["w"; 25].join(" ");
        let text = format!(r#"{{"score":0.4,"rationale":"{words}"}}"#);
        let (j, v) = expect_parsed(parse_judgment_str(&text, &longdoc()));
        assert_eq!(j.score.unwrap().value(), 0.4);
        assert_eq!(v, vec!["rationale over 20 words".to_string()]);
    }

    #[test]
    fn missing_better_is_flagged_in_pairwise_mode() {
        let reason = expect_flag(parse_judgment_str(
            r#"{"score":0.4,"rationale":"fine"}"#,
            &pairwise(),
        ));
        assert_eq!(reason, "missing field: better");
    }

    #[test]
    fn longdoc_requires_score_and_rationale() {
        let reason = expect_flag(parse_judgment_str(r#"{"rationale":"fine"}"#, &longdoc()));
        assert_eq!(reason, "missing field: score");
        let reason = expect_flag(parse_judgment_str(r#"{"score":0.4}"#, &longdoc()));
        assert_eq!(reason, "missing field: rationale");
    }

    #[test]
    fn fenced_json_is_flagged_by_default() {
        let text = "```json\n{\"better\":\"A\",\"score\":0.5,\"rationale\":\"ok\"}\n```";
        let reason = expect_flag(parse_judgment_str(text, &pairwise()));
        assert_eq!(reason, "content outside JSON");
    }

    #[test]
    fn lenient_fences_strips_and_notes() {
        let text = "```json\n{\"better\":\"A\",\"score\":0.5,\"rationale\":\"ok\"}\n```";
        let opts = pairwise().with_lenient_fences(true);
        let (j, v) = expect_parsed(parse_judgment_str(text, &opts));
        assert_eq!(j.better, Some(Choice::A));
        assert_eq!(v, vec!["code fence stripped".to_string()]);
    }

    #[test]
    fn naive_mode_accepts_bare_letters_only() {
        let opts = ParseOptions::for_mode(&PromptMode::Naive);
        let (j, _) = expect_parsed(parse_judgment_str("  A \n", &opts));
        assert_eq!(j.better, Some(Choice::A));
        assert_eq!(j.score, None);
        let reason = expect_flag(parse_judgment_str("Answer: A", &opts));
        assert_eq!(reason, "naive reply not A or B");
        assert!(parse_judgment_str("b", &opts).is_flagged());
    }

    #[test]
    fn subscores_must_cover_all_five_axes() {
        let text = r#"{"better":"A","subscores":{"correctness":0.5,"safety":0.5,"reasoning":0.5,"factuality":0.5}}"#;
        let reason = expect_flag(parse_judgment_str(text, &pairwise()));
        assert_eq!(reason, "subscores missing axis: clarity");
    }

    #[test]
    fn unknown_subscore_axis_is_flagged() {
        let text = r#"{"better":"A","subscores":{"correctness":0.5,"safety":0.5,"reasoning":0.5,"factuality":0.5,"clarity":0.5,"humor":1.0}}"#;
        let reason = expect_flag(parse_judgment_str(text, &pairwise()));
        assert_eq!(reason, "unknown subscore axis: humor");
    }

    #[test]
    fn out_of_range_subscore_is_flagged() {
        let text = r#"{"better":"A","subscores":{"correctness":0.5,"safety":-1.5,"reasoning":0.5,"factuality":0.5,"clarity":0.5}}"#;
        let reason = expect_flag(parse_judgment_str(text, &pairwise()));
        assert_eq!(reason, "subscore out of range: safety");
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_the_scanner() {
        let (j, _) = expect_parsed(parse_judgment_str(
            r#"{"better":"A","score":0.2,"rationale":"uses { and } and \" safely"}"#,
            &pairwise(),
        ));
        assert_eq!(j.rationale.as_deref(), Some("uses { and } and \" safely"));
    }

    #[test]
    fn unterminated_object_is_flagged() {
        let reason = expect_flag(parse_judgment_str(r#"{"better":"A""#, &pairwise()));
        assert_eq!(reason, "unterminated JSON object");
    }

    #[test]
    fn requeue_policy_retries_until_budget_exhausted() {
        let flagged = ParseOutcome::Flagged {
            reason: "x".into(),
            raw: String::new(),
        };
        assert_eq!(requeue_policy(&flagged, 1, 3), Some(RequeueDecision::Retry));
        assert_eq!(
            requeue_policy(&flagged, 3, 3),
            Some(RequeueDecision::GiveUp {
                fallback_reward: 0.0
            })
        );
        assert_eq!(
            requeue_policy(&flagged, 1, 1),
            Some(RequeueDecision::GiveUp {
                fallback_reward: 0.0
            })
        );
        let parsed = parse_judgment_str(r#"{"better":"A"}"#, &pairwise());
        assert_eq!(requeue_policy(&parsed, 1, 3), None);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Any input maps to exactly one outcome; no panic, and no parsed
            // judgment may carry an out-of-range score.
            #[test]
            fn parser_is_total(text in ".*") {
                let outcome = parse_judgment_str(&text, &pairwise());
                if let ParseOutcome::Parsed { judgment, .. } = outcome {
                    if let Some(score) = judgment.score {
                        prop_assert!((-1.0..=1.0).contains(&score.value()));
                    }
                }
            }

            #[test]
            fn parse_ignores_surrounding_whitespace(
                pre in "[ \\t\\n\\r]{0,8}",
                post in "[ \\t\\n\\r]{0,8}",
                score in -1.0f64..=1.0,
            ) {
                let body = format!("{{\"better\":\"A\",\"score\":{score},\"rationale\":\"ok\"}}");
                let padded = format!("{pre}{body}{post}");
                let a = parse_judgment_str(&body, &pairwise());
                let b = parse_judgment_str(&padded, &pairwise());
                prop_assert_eq!(a, b);
            }

            // Serialize → parse round-trip: a contract-clean judgment comes
            // back intact with no violations.
            #[test]
            fn round_trip_is_lossless(
                better in proptest::bool::ANY,
                score in -1.0f64..=1.0,
                with_sub in proptest::bool::ANY,
                words in 0usize..=20,
            ) {
                let judgment = Judgment {
                    better: Some(if better { Choice::A } else { Choice::B }),
                    score: Some(ScalarReward::new(score).unwrap()),
                    subscores: with_sub.then(|| AxisScores {
                        correctness: score,
                        safety: -score,
                        reasoning: 0.0,
                        factuality: score / 2.0,
                        clarity: 1.0,
                    }),
                    rationale: Some(vec!["w"; words].join(" ")),
                };
                let text = serde_json::to_string(&judgment).unwrap();
                match parse_judgment_str(&text, &pairwise()) {
                    ParseOutcome::Parsed { judgment: parsed, violations } => {
                        prop_assert!(violations.is_empty());
                        prop_assert_eq!(parsed, judgment);
                    }
                    ParseOutcome::Flagged { reason, .. } => {
                        prop_assert!(false, "round-trip flagged: {}", reason);
                    }
                }
            }
        }
    }
}
