use std::fmt::Write as _;

use crate::env::format_power;

use super::{IclExample, LlmError};

/// Vocabulary that would leak the system model into the prompt. Checked
/// case-insensitively.
pub const FORBIDDEN_TOKENS: &[&str] = &["SINR", "channel", "gain", "log", "interference", "objective function"];

pub const COLLABORATION_SENTENCE: &str = "You are working together with other optimizers, and some of the examples below were discovered by other optimizers collaborating with you; they are the most effective candidates found so far.";

fn placeholder_list(n_cells: usize) -> String {
    let names: Vec<String> = (1..=n_cells).map(|i| format!("v{i}")).collect();
    format!("power: [{}]", names.join(", "))
}

/// Renders the knowledge-free prompt. Examples are listed in ascending
/// reward order so the best ones sit closest to the instruction.
pub fn render_prompt(
    n_cells: usize,
    p_max: f64,
    examples: &[IclExample],
    n_actions: usize,
    collaborative: bool,
) -> Result<String, LlmError> {
    if examples.is_empty() {
        return Err(LlmError::InvalidArgument("at least one example is required".into()));
    }
    if n_actions == 0 {
        return Err(LlmError::InvalidArgument("n_actions must be at least 1".into()));
    }
    let mut sorted: Vec<&IclExample> = examples.iter().collect();
    sorted.sort_by(|a, b| a.reward.total_cmp(&b.reward));

    let mut out = String::new();
    let _ = writeln!(
        out,
        "Your task is to choose a transmit power value for each of {n_cells} transmitters. \
         Each value must be a real number between 0 and {p_max}. Your goal is to maximize the reward."
    );
    if collaborative {
        let _ = writeln!(out, "{COLLABORATION_SENTENCE}");
    }
    let _ = writeln!(
        out,
        "\nBelow are previously evaluated power values with their rewards, in ascending order of reward:"
    );
    for ex in sorted {
        let values: Vec<String> = ex.action.iter().map(|v| format_power(*v)).collect();
        let _ = writeln!(out, "power: [{}], reward: {:.3}", values.join(", "), ex.reward);
    }
    let _ = write!(
        out,
        "\nPropose {n_actions} new power values that differ from all of the above and achieve a higher reward. \
         Output exactly {n_actions} line(s), each formatted exactly as {} and nothing else.",
        placeholder_list(n_cells)
    );
    Ok(out)
}
