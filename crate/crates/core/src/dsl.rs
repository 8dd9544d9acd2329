//! Textual form of hypotheses.
//!
//! The canonical line is `HYP mask=[0,1,1] rule=ALL`, where `ANY` is the
//! disjunctive rule and `ALL` the conjunctive one. [`extract_hypotheses`]
//! also recovers hypotheses from code-like model output such as
//! `mask = np.array([0, 1, 1]); return np.all(x[mask])`.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::env::{BlicketMask, Rule};
use crate::hypothesis::Hypothesis;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("mask has {found} entries, expected {expected}")]
    Arity { expected: usize, found: usize },
}

/// The two combinators of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combinator {
    Any,
    All,
}

impl Combinator {
    pub fn rule(self) -> Rule {
        match self {
            Combinator::Any => Rule::Disjunctive,
            Combinator::All => Rule::Conjunctive,
        }
    }

    pub fn from_rule(rule: Rule) -> Self {
        match rule {
            Rule::Disjunctive => Combinator::Any,
            Rule::Conjunctive => Combinator::All,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            Combinator::Any => "ANY",
            Combinator::All => "ALL",
        }
    }
}

/// Parsed but not yet arity-checked hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisExpr {
    pub mask_literal: Vec<bool>,
    pub combinator: Combinator,
}

impl HypothesisExpr {
    pub fn to_hypothesis(&self, num_objects: usize) -> Result<Hypothesis, DslError> {
        if self.mask_literal.len() != num_objects {
            return Err(DslError::Arity {
                expected: num_objects,
                found: self.mask_literal.len(),
            });
        }
        Ok(Hypothesis::new(
            BlicketMask::from_bools(&self.mask_literal),
            self.combinator.rule(),
        ))
    }
}

/// `HYP mask=[b0,...,b{N-1}] rule=ANY|ALL`
pub fn render_hypothesis(h: &Hypothesis) -> String {
    let bits: Vec<&str> = h.mask.iter().map(|b| if b { "1" } else { "0" }).collect();
    format!(
        "HYP mask=[{}] rule={}",
        bits.join(","),
        Combinator::from_rule(h.rule).keyword()
    )
}

const HYP_PATTERN: &str = r"(?i)\bhyp\s+mask\s*=\s*\[([^\]\[]*)\]\s*rule\s*=\s*([a-z_]+)";

static HYP_STRICT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"^\s*{HYP_PATTERN}\s*$")).unwrap());
static HYP_ANYWHERE: LazyLock<Regex> = LazyLock::new(|| Regex::new(HYP_PATTERN).unwrap());
static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
static COMBINATOR_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(all|every|any|some)\b").unwrap());

/// How far from a mask literal the combinator word may sit.
const COMBINATOR_WINDOW: usize = 240;

fn parse_rule_word(word: &str) -> Result<Combinator, DslError> {
    match word.to_ascii_uppercase().as_str() {
        "ANY" => Ok(Combinator::Any),
        "ALL" => Ok(Combinator::All),
        other => Err(DslError::Syntax(format!("unknown rule {other:?}"))),
    }
}

fn parse_strict_mask(body: &str) -> Result<Vec<bool>, DslError> {
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|t| match t.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(DslError::Syntax(format!(
                "mask entry {other:?} is not 0 or 1"
            ))),
        })
        .collect()
}

/// Lenient mask literal: 0/1 or true/false, separated by commas or spaces.
fn parse_loose_mask(body: &str) -> Option<Vec<bool>> {
    let tokens: Vec<&str> = body
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return None;
    }
    tokens
        .iter()
        .map(|t| match t.to_ascii_lowercase().as_str() {
            "0" | "false" => Some(false),
            "1" | "true" => Some(true),
            _ => None,
        })
        .collect()
}

/// Strict parse of one canonical line.
pub fn parse_hypothesis(text: &str, num_objects: usize) -> Result<Hypothesis, DslError> {
    let caps = HYP_STRICT.captures(text).ok_or_else(|| {
        DslError::Syntax(format!("expected `HYP mask=[..] rule=..`, got {text:?}"))
    })?;
    let expr = HypothesisExpr {
        mask_literal: parse_strict_mask(&caps[1])?,
        combinator: parse_rule_word(&caps[2])?,
    };
    expr.to_hypothesis(num_objects)
}

fn combinator_in(text: &str, take_last: bool) -> Option<Combinator> {
    let mut words = COMBINATOR_WORD.find_iter(text);
    let word = if take_last {
        words.last()
    } else {
        words.next()
    }?;
    match word.as_str().to_ascii_lowercase().as_str() {
        "all" | "every" => Some(Combinator::All),
        _ => Some(Combinator::Any),
    }
}

fn clamp_to_char_boundary(text: &str, mut i: usize, forward: bool) -> usize {
    while !text.is_char_boundary(i) {
        if forward {
            i += 1;
        } else {
            i -= 1;
        }
    }
    i
}

/// Recovers hypotheses from free-form text, in order of appearance and
/// without duplicates. Never fails; fragments that do not parse are skipped.
pub fn extract_hypotheses(freeform: &str, num_objects: usize) -> Vec<Hypothesis> {
    let mut found: Vec<(usize, Hypothesis)> = Vec::new();
    let mut canonical_spans = Vec::new();

    for caps in HYP_ANYWHERE.captures_iter(freeform) {
        let whole = caps.get(0).unwrap();
        canonical_spans.push(whole.range());
        let parsed = parse_strict_mask(&caps[1]).and_then(|mask_literal| {
            HypothesisExpr {
                mask_literal,
                combinator: parse_rule_word(&caps[2])?,
            }
            .to_hypothesis(num_objects)
        });
        if let Ok(h) = parsed {
            found.push((whole.start(), h));
        }
    }

    // Code-style fragments: a bracketed vector of the right length near a
    // combinator word. Vectors inside canonical lines are already handled.
    let vectors: Vec<(usize, usize, Vec<bool>)> = BRACKETED
        .captures_iter(freeform)
        .filter_map(|caps| {
            let m = caps.get(0).unwrap();
            if canonical_spans
                .iter()
                .any(|span| span.start <= m.start() && m.end() <= span.end)
            {
                return None;
            }
            let mask = parse_loose_mask(&caps[1])?;
            (mask.len() == num_objects).then_some((m.start(), m.end(), mask))
        })
        .collect();

    for (k, (start, end, mask)) in vectors.iter().enumerate() {
        let after_limit = vectors
            .get(k + 1)
            .map_or(freeform.len(), |next| next.0)
            .min(end + COMBINATOR_WINDOW);
        let after_limit = clamp_to_char_boundary(freeform, after_limit, false);
        let before_limit =
            if k == 0 { 0 } else { vectors[k - 1].1 }.max(start.saturating_sub(COMBINATOR_WINDOW));
        let before_limit = clamp_to_char_boundary(freeform, before_limit, true);

        let combinator = combinator_in(&freeform[*end..after_limit], false)
            .or_else(|| combinator_in(&freeform[before_limit..*start], true));
        if let Some(combinator) = combinator {
            let h = Hypothesis::new(BlicketMask::from_bools(mask), combinator.rule());
            found.push((*start, h));
        }
    }

    found.sort_by_key(|(pos, _)| *pos);
    let mut seen = HashSet::new();
    found
        .into_iter()
        .filter_map(|(_, h)| seen.insert(h).then_some(h))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::enumerate_space;

    fn h(mask: &str, rule: Rule) -> Hypothesis {
        Hypothesis::new(mask.parse().unwrap(), rule)
    }

    #[test]
    fn render_examples() {
        assert_eq!(
            render_hypothesis(&h("011", Rule::Conjunctive)),
            "HYP mask=[0,1,1] rule=ALL"
        );
        assert_eq!(
            render_hypothesis(&h("00", Rule::Disjunctive)),
            "HYP mask=[0,0] rule=ANY"
        );
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_hypothesis("HYP mask=[0,1,1] rule=ALL", 3),
            Ok(h("011", Rule::Conjunctive))
        );
        assert_eq!(
            parse_hypothesis("hyp MASK=[1,0] RULE=any", 2),
            Ok(h("10", Rule::Disjunctive))
        );
        assert_eq!(
            parse_hypothesis("HYP mask=[0,1] rule=ALL", 3),
            Err(DslError::Arity {
                expected: 3,
                found: 2
            })
        );
        assert!(matches!(
            parse_hypothesis("HYP mask=[0,1,1] rule=SUM", 3),
            Err(DslError::Syntax(_))
        ));
        assert!(matches!(
            parse_hypothesis("HYP mask=[0,2,1] rule=ALL", 3),
            Err(DslError::Syntax(_))
        ));
        assert!(parse_hypothesis("  HYP  mask = [ 0 , 1 ]   rule = all ", 2).is_ok());
    }

    #[test]
    fn parse_render_round_trip_exhaustive() {
        for n in 1..=4 {
            for hyp in enumerate_space(n).unwrap().iter() {
                assert_eq!(parse_hypothesis(&render_hypothesis(&hyp), n), Ok(hyp));
            }
        }
    }

    #[test]
    fn extracts_code_style_function() {
        let code = "def func(x):\n    mask = np.array([0, 1, 1], dtype=bool)\n    return np.all(x[mask])\n";
        assert_eq!(
            extract_hypotheses(code, 3),
            vec![h("011", Rule::Conjunctive)]
        );
    }

    #[test]
    fn extracts_several_functions_in_order() {
        let code = "\
```python
def hypothesis_1(x):
    mask = np.array([True, False, False, False])
    return np.any(x[mask])

def hypothesis_2(x):
    mask = np.array([0, 1, 0, 1], dtype=bool)
    return np.all(x[mask])
```";
        assert_eq!(
            extract_hypotheses(code, 4),
            vec![h("1000", Rule::Disjunctive), h("0101", Rule::Conjunctive)]
        );
    }

    #[test]
    fn dedups_and_ignores_noise() {
        let text = "HYP mask=[1,0,0] rule=ANY\nHYP mask=[1,0,0] rule=ANY";
        assert_eq!(
            extract_hypotheses(text, 3),
            vec![h("100", Rule::Disjunctive)]
        );
        assert!(extract_hypotheses("no idea, need more data", 3).is_empty());
        // Wrong arity and out-of-family rules are skipped.
        assert!(
            extract_hypotheses("HYP mask=[1,0] rule=ANY\nHYP mask=[1,0,1] rule=SUM", 3).is_empty()
        );
    }

    #[test]
    fn mixed_canonical_and_code() {
        let text = "Ideas:\nHYP mask=[0,0,1] rule=ALL\nalso maybe any of [1, 1, 0] turns it on";
        assert_eq!(
            extract_hypotheses(text, 3),
            vec![h("001", Rule::Conjunctive), h("110", Rule::Disjunctive)]
        );
    }
}
