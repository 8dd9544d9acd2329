//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use blicket_core::agents::{oracle_answer, SamplingRound};
use blicket_core::analysis::{normalized_progress, spearman, trial_metrics, welch_t_test};
use blicket_core::backend::{ChatBackend, ScriptedBackend, SimulatedSampler};
use blicket_core::env::{
    render_initial_observation, Action, BlicketMask, EnvState, OpeningVariant, Placement,
    RenderOptions, RenderStyle, Rule, Transcript,
};
use blicket_core::harness::{
    build_scenario, run_trial, run_trials, AgentKind, RunOptions, ScenarioKind, TrialConfig,
    TrialRecord,
};
use blicket_core::hypothesis::{Belief, Hypothesis, HypothesisSpace, ObservationPair};
use blicket_core::prompts::{question_prompt, PromptStyle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn oracle_records(n: usize, rule: Rule, seeds: u64) -> Vec<TrialRecord> {
    let config = TrialConfig::new(n, rule, AgentKind::Oracle, 0);
    let seeds: Vec<u64> = (0..seeds).collect();
    run_trials(&config, &seeds, &|_| None, RunOptions::default())
        .into_iter()
        .map(|r| r.expect("oracle trial"))
        .collect()
}

/// Number of events after which the support first computes a single function.
fn steps_to_resolution(record: &TrialRecord) -> Option<usize> {
    let space = HypothesisSpace::new(record.config.num_objects).unwrap();
    let mut belief = Belief::uniform(space);
    for (t, obs) in record.all_observations().iter().enumerate() {
        belief = belief.filter(obs).unwrap();
        if belief.is_resolved() {
            return Some(t);
        }
    }
    None
}

fn oracle_perfection() -> Outcome {
    let started = Instant::now();
    let mut trials = 0;
    for n in [3, 4, 8] {
        for rule in Rule::ALL {
            for record in oracle_records(n, rule, 100) {
                trials += 1;
                let seed = record.config.seed;
                let resolved = steps_to_resolution(&record);
                ensure!(
                    matches!(resolved, Some(t) if t < 32),
                    "N={n} {rule} seed {seed}: resolved at {resolved:?}"
                );
                ensure!(
                    record.all_correct,
                    "N={n} {rule} seed {seed}: answers {:?}",
                    record.qa_answers
                );
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "{trials} trials took {secs:.2} s (limit 10 s)");
    Ok(format!(
        "{trials}/{trials} resolved before step 32 and all-correct in {secs:.2} s"
    ))
}

fn oracle_symmetry() -> Outcome {
    let mean = |rule| {
        let steps: Vec<usize> = oracle_records(8, rule, 200)
            .iter()
            .map(|r| steps_to_resolution(r).expect("resolves"))
            .collect();
        steps.iter().sum::<usize>() as f64 / steps.len() as f64
    };
    let (d, c) = (mean(Rule::Disjunctive), mean(Rule::Conjunctive));
    ensure!((d - c).abs() <= 2.0, "DISJ {d:.2} vs CONJ {c:.2}");
    Ok(format!(
        "mean steps to resolution DISJ {d:.2}, CONJ {c:.2}, gap {:.2} <= 2.0",
        (d - c).abs()
    ))
}

fn eig_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = rng.random_range(1..=6);
        let space = HypothesisSpace::new(n).unwrap();
        let size = rng.random_range(1..=space.len().min(64));
        let picks = rand::seq::index::sample(&mut rng, space.len(), size);
        let belief = Belief::from_hypotheses(space, picks.iter().map(|j| space.get(j)));
        let x = Placement::from_bits(n, rng.random_range(0..(1u32 << n)));
        let k = belief.support_size() as f64;
        let mut sum = 0.0;
        for y in [false, true] {
            let k_y = belief.support().filter(|h| h.predict(&x) == y).count() as f64;
            if k_y > 0.0 {
                sum += k_y / k * belief.info_gain(&ObservationPair::new(x, y)).unwrap();
            }
        }
        let diff = (belief.expected_info_gain(&x).unwrap() - sum).abs();
        ensure!(diff <= 1e-12, "instance {i}: |EIG - sum| = {diff:e}");
        worst = worst.max(diff);
    }
    Ok(format!(
        "1000 instances, max |EIG - sum p*IG| = {worst:e} <= 1e-12"
    ))
}

fn table_arithmetic() -> Outcome {
    let a = normalized_progress(0.999, 0.944).unwrap();
    let b = normalized_progress(0.812, 0.944).unwrap();
    ensure!(
        (a - 0.982).abs() <= 0.002,
        "normalized_progress(0.999, 0.944) = {a}"
    );
    ensure!(
        (b + 2.357).abs() <= 0.02,
        "normalized_progress(0.812, 0.944) = {b}"
    );
    Ok(format!(
        "{a:.4} (0.982 +/- 0.002), {b:.4} (-2.357 +/- 0.02)"
    ))
}

fn random_band() -> Outcome {
    let space = HypothesisSpace::new(4).unwrap();
    let mut parts = Vec::new();
    for rule in Rule::ALL {
        let config = TrialConfig::new(4, rule, AgentKind::Random, 0);
        let seeds: Vec<u64> = (0..500).collect();
        let mut rhos = Vec::new();
        for result in run_trials(&config, &seeds, &|_| None, RunOptions::default()) {
            let record = result.map_err(|e| e.to_string())?;
            ensure!(
                record.events.len() == 32,
                "{rule} seed {}: {} steps",
                record.config.seed,
                record.events.len()
            );
            ensure!(
                record.events.iter().all(|e| e.action != Action::Exit),
                "{rule}: random agent exited"
            );
            rhos.push(
                trial_metrics(&record, space)
                    .map_err(|e| e.to_string())?
                    .final_progress,
            );
        }
        let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
        ensure!(
            (0.91..=1.0).contains(&mean),
            "{rule}: mean final rho {mean:.4}"
        );
        parts.push(format!("{rule} rho {mean:.4}"));
    }
    Ok(format!(
        "{}; all 1000 trials exactly 32 steps",
        parts.join(", ")
    ))
}

fn check_rounds(rounds: &[SamplingRound]) -> Result<usize, String> {
    for round in rounds {
        let expected = (round.active_size > 0).then(|| (round.active_size as f64).log2());
        ensure!(
            round.entropy_bits == expected,
            "step {}: entropy {:?} vs log2 {}",
            round.step,
            round.entropy_bits,
            round.active_size
        );
        ensure!(
            round.active_sizes.windows(2).all(|w| w[1] == w[0] + 1),
            "step {}: sizes {:?}",
            round.step,
            round.active_sizes
        );
        if let Some(&last) = round.active_sizes.last() {
            ensure!(
                last == round.active_size,
                "step {}: final size mismatch",
                round.step
            );
        }
    }
    Ok(rounds.len())
}

fn remark_one() -> Outcome {
    let mut total = 0;
    let space = HypothesisSpace::new(4).unwrap();
    for seed in 0..20u64 {
        let rule = if seed % 2 == 0 {
            Rule::Disjunctive
        } else {
            Rule::Conjunctive
        };
        let config = TrialConfig::new(4, rule, AgentKind::Sampling, seed);
        let backend: Arc<dyn ChatBackend> = Arc::new(SimulatedSampler::full_space(space));
        let record = run_trial(&config, Some(backend)).map_err(|e| e.to_string())?;
        total += check_rounds(record.sampling_rounds.as_deref().unwrap_or_default())?;
    }
    // Duplicates and contradicted samples interleaved with fresh ones.
    let noisy = ScriptedBackend::new()
        .route("Come up with", "HYP mask=[1,0,0] rule=ANY\nHYP mask=[1,0,0] rule=ANY\nHYP mask=[0,1,1] rule=ALL\nHYP mask=[0,0,1] rule=ANY\nHYP mask=[1,1,1] rule=ALL")
        .route("answer the following", "> False")
        .route("disprove", "> put object 1 on machine");
    let config = TrialConfig::new(3, Rule::Conjunctive, AgentKind::Sampling, 3);
    let record = run_trial(&config, Some(Arc::new(noisy) as Arc<dyn ChatBackend>))
        .map_err(|e| e.to_string())?;
    total += check_rounds(record.sampling_rounds.as_deref().unwrap_or_default())?;
    Ok(format!(
        "{total} sampling rounds: entropy == log2|active| exactly, |active| +1 per accepted sample"
    ))
}

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures");

fn fixture(name: &str, pin: &str) -> Result<String, String> {
    let path = Path::new(FIXTURES).join(name);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    ensure!(hash == pin, "{name}: hash {hash} does not match pin");
    Ok(text)
}

const TRAJECTORY_ACTIONS: [Action; 11] = [
    Action::Put(0),
    Action::Put(1),
    Action::Put(2),
    Action::Take(0),
    Action::Take(1),
    Action::Put(1),
    Action::Take(2),
    Action::Take(1),
    Action::Put(2),
    Action::Put(1),
    Action::Exit,
];

fn trajectory_state() -> EnvState {
    EnvState::new(
        BlicketMask::from_indices(3, &[1, 2]),
        Rule::Conjunctive,
        Placement::empty(3),
        32,
    )
    .with_render(RenderOptions {
        style: RenderStyle::OffOfThe,
        ..RenderOptions::default()
    })
}

fn transcript_fidelity() -> Outcome {
    let test = fixture(
        "test_trial.txt",
        "346c5c3e99019f2d9eadcd69bc2d890d26991a7c3e13d4e12ea18ab0128b8da8",
    )?;
    for (kind, name, pin) in [
        (
            ScenarioKind::DisjunctiveEvidence,
            "training_disjunctive.txt",
            "f82aaf97d2556687f891bb4ff824cbdf4a7d2f561f513355a8437f23d117a1db",
        ),
        (
            ScenarioKind::ConjunctiveEvidence,
            "training_conjunctive.txt",
            "21a3d2a7cfdeeeb05abb69ff10391a29881c1f3e0ddcf4d31fcd90dc1dc9f563",
        ),
        (
            ScenarioKind::AmbiguousEvidence,
            "training_ambiguous.txt",
            "0c214433d02e4113411eef15fda7f341701dff1eb851b65f23c0312520f47ace",
        ),
    ] {
        let expected = fixture(name, pin)?;
        let scenario = build_scenario(kind);
        ensure!(
            scenario.training_transcript == expected,
            "{kind}: training script differs"
        );
        ensure!(
            format!("{}\n\n{}", scenario.test_transcript, scenario.question) == test,
            "{kind}: test script differs"
        );
    }
    let expected = fixture(
        "trajectory_conjunctive_3.txt",
        "d59a8b46c385f2f98d5df0a0ed5d1a31bb774be8589ef6037c14bd9393bf10d0",
    )?;
    let mut state = trajectory_state();
    let mut transcript = Transcript::new(
        &render_initial_observation(&state, OpeningVariant::Default),
        "\n\n",
    );
    for action in TRAJECTORY_ACTIONS {
        let (next, event) = state.apply_action(action).map_err(|e| e.to_string())?;
        transcript.push(&event);
        state = next;
    }
    ensure!(
        question_prompt(transcript.as_str(), "2", PromptStyle::Default) == expected,
        "trajectory replay differs"
    );
    Ok(
        "3 training scripts + test script + 10-action trajectory byte-identical to pinned fixtures"
            .into(),
    )
}

fn trajectory_inference() -> Outcome {
    let space = HypothesisSpace::new(3).unwrap();
    ensure!(space.len() == 16, "space has {} hypotheses", space.len());
    let mut state = trajectory_state();
    let mut belief = Belief::uniform(space);
    let mut pairs = 0;
    for action in TRAJECTORY_ACTIONS {
        let (next, event) = state.apply_action(action).map_err(|e| e.to_string())?;
        if action != Action::Exit {
            belief = belief
                .filter(&ObservationPair::new(event.placement, event.light_on))
                .unwrap();
            pairs += 1;
        }
        state = next;
    }
    let survivors: Vec<Hypothesis> = belief.support().collect();
    let truth = Hypothesis::new(BlicketMask::from_indices(3, &[1, 2]), Rule::Conjunctive);
    ensure!(survivors == vec![truth], "survivors {survivors:?}");
    let answers: Vec<bool> = (0..3).map(|i| oracle_answer(&belief, i)).collect();
    ensure!(answers == vec![false, true, true], "answers {answers:?}");
    Ok(format!(
        "{pairs} observation pairs leave only ({{1,2}}, CONJ); answers (False, True, True)"
    ))
}

fn sampling_config(mask: u32, rule: Rule, start: u32) -> TrialConfig {
    let mut config = TrialConfig::new(4, rule, AgentKind::Sampling, u64::from(mask));
    config.num_blickets = mask.count_ones() as usize;
    config.fixed_blickets = Some(BlicketMask::from_bits(4, mask));
    config.fixed_placement = Some(Placement::from_bits(4, start));
    config
}

fn sampling_end_to_end() -> Outcome {
    let space = HypothesisSpace::new(4).unwrap();
    let mut resolved = 0;
    for mask in 1..16u32 {
        for rule in Rule::ALL {
            for start in [0u32, 0b0101, 0b1111] {
                let backend: Arc<dyn ChatBackend> = Arc::new(SimulatedSampler::full_space(space));
                let record = run_trial(&sampling_config(mask, rule, start), Some(backend))
                    .map_err(|e| e.to_string())?;
                ensure!(
                    record.all_correct && record.events.len() <= 32,
                    "full pool, mask {mask:04b} {rule} start {start:04b}: {:?} in {} steps",
                    record.qa_answers,
                    record.events.len()
                );
                resolved += 1;
            }
        }
    }
    let disjunctive: Vec<Hypothesis> = space
        .iter()
        .filter(|h| h.rule == Rule::Disjunctive)
        .collect();
    let mut emptied = 0;
    for mask in (1..16u32).filter(|m| m.count_ones() >= 2) {
        for start in [0u32, 0b0101, 0b1111] {
            let backend: Arc<dyn ChatBackend> =
                Arc::new(SimulatedSampler::new(4, disjunctive.clone()));
            let record = run_trial(
                &sampling_config(mask, Rule::Conjunctive, start),
                Some(backend),
            )
            .map_err(|e| e.to_string())?;
            let last = record
                .sampling_rounds
                .as_ref()
                .and_then(|r| r.last())
                .map(|r| r.active_size);
            ensure!(
                last == Some(0) && !record.all_correct,
                "disjunctive pool, mask {mask:04b} start {start:04b}: final active {last:?}, all_correct {}",
                record.all_correct
            );
            emptied += 1;
        }
    }
    Ok(format!(
        "full pool: {resolved}/{resolved} N=4 instances all-correct within 32 steps; \
         disjunctive-only pool: {emptied}/{emptied} conjunctive instances end with an empty active set"
    ))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn statistics_oracles() -> Outcome {
    let c = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0])
        .map_err(|e| e.to_string())?;
    ensure!(
        close(c.rho, 0.8, 1e-6) && close(c.p_value, 0.10408803866182788, 1e-3),
        "spearman {c:?}"
    );
    let c = spearman(
        &[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0],
        &[2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0],
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        close(c.rho, 0.19885368120992467, 1e-6) && close(c.p_value, 0.6368617833253285, 1e-3),
        "spearman ties {c:?}"
    );
    ensure!(
        spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().rho == 1.0,
        "monotone rho"
    );
    ensure!(
        spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap().rho == -1.0,
        "reversed rho"
    );

    let t = welch_t_test(&[1.0, 2.0, 3.0, 4.0], &[11.0, 12.0, 13.0, 14.0])
        .map_err(|e| e.to_string())?;
    ensure!(
        close(t.t, -10.954451150103322, 1e-6)
            && close(t.p_value, 3.436402807612147e-05, 1e-3)
            && t.stars == "***",
        "welch {t:?}"
    );
    let t = welch_t_test(&[1.0, 2.5, 2.0, 4.0, 3.3], &[2.0, 6.0, 3.5, 4.1])
        .map_err(|e| e.to_string())?;
    ensure!(
        close(t.t, -1.3722134668693928, 1e-6) && close(t.p_value, 0.2261033027375543, 1e-3),
        "welch {t:?}"
    );
    let same = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    ensure!(
        same.t == 0.0 && same.p_value == 1.0 && same.stars == "ns",
        "identical samples {same:?}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let n = rng.random_range(3..30);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let warped: Vec<f64> = xs.iter().map(|x| x * x * x + 5.0 * x).collect();
        let (a, b) = (spearman(&xs, &ys).unwrap(), spearman(&warped, &ys).unwrap());
        ensure!(
            close(a.rho, b.rho, 1e-12),
            "instance {i}: rank invariance {} vs {}",
            a.rho,
            b.rho
        );
        let m = rng.random_range(2..20);
        let zs: Vec<f64> = (0..m).map(|_| rng.random_range(-50.0..50.0)).collect();
        let (ab, ba) = (
            welch_t_test(&xs, &zs).unwrap(),
            welch_t_test(&zs, &xs).unwrap(),
        );
        ensure!(
            ab.t == -ba.t,
            "instance {i}: antisymmetry {} vs {}",
            ab.t,
            ba.t
        );
    }
    Ok("examples within 1e-6 (rho/t) and 1e-3 (p); 1000 rank-invariance and antisymmetry instances".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        r#"[
  {"matcher": "Is object 1 a blicket", "reply": "> True", "repeat": true},
  {"matcher": "a blicket?", "reply": "I think not.\n> False", "repeat": true},
  {"reply": "> put object 1 on machine"},
  {"reply": "> take object 0 off machine"},
  {"reply": "hmm"},
  {"reply": "> put object 2 on machine"},
  {"reply": "> exit"}
]"#,
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(
        dir.path().join("scripted.toml"),
        "kind = \"scripted\"\n[scripted]\nscript = \"script.json\"\n",
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("simulated.toml"), "kind = \"simulated\"\n")
        .map_err(|e| e.to_string())?;

    let run = |agent: &str, backend: &str, out: &str| -> Result<Vec<u8>, String> {
        let path = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_blicket"))
            .args([
                "run",
                "--objects",
                "4",
                "--rule",
                "conjunctive",
                "--agent",
                agent,
                "--seeds",
                "0..12",
            ])
            .arg("--backend-config")
            .arg(dir.path().join(backend))
            .arg("--out")
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            status.status.success(),
            "run failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let mut checked = Vec::new();
    for (agent, backend) in [("chat", "scripted.toml"), ("sampling", "simulated.toml")] {
        let a = run(agent, backend, &format!("{agent}-a.jsonl"))?;
        let b = run(agent, backend, &format!("{agent}-b.jsonl"))?;
        ensure!(
            !a.is_empty() && a == b,
            "{agent}: record files differ between runs"
        );
        checked.push(format!("{agent} ({} bytes)", a.len()));
    }
    Ok(format!(
        "repeated `run` produced byte-identical records: {}",
        checked.join(", ")
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle perfection", oracle_perfection),
        ("oracle rule symmetry", oracle_symmetry),
        ("EIG / info-gain consistency", eig_consistency),
        ("progress table arithmetic", table_arithmetic),
        ("random baseline band", random_band),
        ("sampling entropy = log2 |active|", remark_one),
        ("transcript fidelity", transcript_fidelity),
        ("trajectory inference oracle", trajectory_inference),
        ("sampling agent end to end", sampling_end_to_end),
        ("statistics oracles", statistics_oracles),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
