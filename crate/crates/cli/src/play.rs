use std::io::{BufRead, Write};

use anyhow::Result;
use blicket_core::agents::parse_answer;
use blicket_core::env::{
    init_env, parse_command, render_initial_observation, Action, CommandError, EnvConfig,
    ObjectLabels, OpeningVariant, RenderOptions, Rule,
};
use blicket_core::harness::score_answers;
use clap::Args;

#[derive(Args)]
pub struct PlayArgs {
    #[arg(long, default_value_t = 4)]
    objects: usize,
    #[arg(long, default_value_t = 2)]
    blickets: usize,
    #[arg(long, default_value = "disjunctive")]
    rule: Rule,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    horizon: usize,
    #[arg(long)]
    letters: bool,
}

fn prompt_line(
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    prompt: &str,
) -> Result<Option<String>> {
    write!(out, "{prompt}")?;
    out.flush()?;
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

/// Interactive session: the same text a model would read, one command per
/// line, then one question per object.
pub fn play(args: PlayArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let labels = if args.letters {
        ObjectLabels::Letters
    } else {
        ObjectLabels::Numeric
    };
    let mut state = init_env(EnvConfig {
        num_objects: args.objects,
        num_blickets: args.blickets,
        rule: args.rule,
        horizon: args.horizon,
        seed: args.seed,
    })?
    .with_render(RenderOptions {
        labels,
        ..RenderOptions::default()
    });
    writeln!(
        out,
        "{}",
        render_initial_observation(&state, OpeningVariant::Default)
    )?;
    writeln!(
        out,
        "\nCommands: put object X on machine | take object X off machine | look | exit ({} steps)\n",
        args.horizon
    )?;
    while !state.is_closed() {
        let Some(line) = prompt_line(input, out, "> ")? else {
            break;
        };
        let action = match parse_command(&format!("> {line}"), args.objects) {
            Ok(a) => a,
            Err(CommandError::InvalidObject { action, .. }) => action,
            Err(CommandError::Unparseable(_)) => {
                writeln!(out, "Unrecognised command.")?;
                continue;
            }
        };
        let (next, event) = state.apply_action(action)?;
        writeln!(out, "{}", event.text)?;
        state = next;
        if action == Action::Exit {
            break;
        }
    }
    writeln!(out)?;
    let mut answers = Vec::with_capacity(args.objects);
    for i in 0..args.objects {
        let question = format!("Is object {} a blicket? (True/False) ", labels.label(i));
        let reply = prompt_line(input, out, &question)?.unwrap_or_default();
        answers.push(parse_answer(&format!("> {reply}")));
    }
    let score = score_answers(&answers, &state.blicket_mask);
    let blickets: Vec<String> = state.blicket_mask.ones().map(|i| labels.label(i)).collect();
    writeln!(
        out,
        "\nBlickets: {} ({} rule). {} of {} answers correct{}.",
        blickets.join(", "),
        state.rule,
        score.per_object.iter().filter(|&&c| c).count(),
        args.objects,
        if score.all_correct {
            ", all correct"
        } else {
            ""
        }
    )?;
    Ok(())
}
