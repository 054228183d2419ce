use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::env::PowerAction;

static ACTION_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)power\s*:\s*\[([^\]]*)\]").expect("valid regex"));
static NUMERAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$").expect("valid regex"));

/// Actions recovered from one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalBatch {
    pub raw_text: String,
    pub actions: Vec<PowerAction>,
    pub parse_failures: usize,
    pub clamped_count: usize,
}

fn parse_line(line: &str, n_cells: usize) -> Option<Vec<f64>> {
    let caps = ACTION_LINE.captures(line)?;
    let inner = caps.get(1)?.as_str();
    let values: Option<Vec<f64>> = inner
        .split(',')
        .map(|tok| {
            let tok = tok.trim();
            if !NUMERAL.is_match(tok) {
                return None;
            }
            tok.parse::<f64>().ok().filter(|v| v.is_finite())
        })
        .collect();
    values.filter(|v| v.len() == n_cells)
}

/// Extracts up to `max_actions` actions from free text.
///
/// Every non-blank line is either an action or a failure; out-of-range
/// coordinates are clamped into `[0, p_max]` and counted. Never fails.
pub fn parse_actions(text: &str, n_cells: usize, p_max: f64, max_actions: usize) -> ProposalBatch {
    let mut actions = Vec::new();
    let mut parse_failures = 0;
    let mut clamped_count = 0;
    for line in text.lines() {
        if actions.len() >= max_actions {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line, n_cells) {
            Some(mut values) => {
                for v in &mut values {
                    let c = v.clamp(0.0, p_max);
                    if c != *v {
                        clamped_count += 1;
                    }
                    // folds -0.0 as well
                    *v = c + 0.0;
                }
                actions.push(PowerAction::new(values));
            }
            None => parse_failures += 1,
        }
    }
    ProposalBatch {
        raw_text: text.to_string(),
        actions,
        parse_failures,
        clamped_count,
    }
}
