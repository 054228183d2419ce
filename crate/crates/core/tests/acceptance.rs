//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarm_opt::agent::{init_agent, step_agent, ActionRewardPair, AgentState, EliteBuffer, StepSettings};
use swarm_opt::coordinator::{best_so_far, CoordinatorState, Policy};
use swarm_opt::env::{self, sample_channel, sample_channel_with, ChannelRealization, Objective, PowerAction};
use swarm_opt::harness::{
    execute, median, read_transcript, run_experiment, run_isolated_agent, ExperimentConfig, Method,
    TranscriptRecord,
};
use swarm_opt::llm::{
    build_proposer, mock_propose, parse_actions, render_prompt, IclExample, MockParams, MockProposer, Origin,
    ProposerKind, FORBIDDEN_TOKENS,
};
use swarm_opt::solvers::{
    dinkelbach_max_ee, grid_oracle, local_optimum, subtracted_gradient, subtracted_objective, wmmse_max_se,
    DinkelbachConfig, WmmseConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Criterion 1: Multi-start local solvers reach 98% of the 101-point grid optimum on
/// at least 18 of 20 seeded 3-cell instances, per objective.
fn solvers_vs_grid() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut ok = true;
    for objective in [Objective::Se, Objective::Ee] {
        let mut hits = 0;
        let mut worst = f64::INFINITY;
        for seed in 0..20 {
            let chan = sample_channel(3, seed).map_err(|e| e.to_string())?;
            let local = local_optimum(objective, &chan, 5, seed).map_err(|e| e.to_string())?;
            let grid = grid_oracle(objective, &chan, 101).map_err(|e| e.to_string())?;
            let ratio = local.value.value / grid.value.value;
            worst = worst.min(ratio);
            if ratio >= 0.98 {
                hits += 1;
            }
        }
        ok &= hits >= 18;
        detail.push(format!("{objective} {hits}/20 (worst ratio {worst:.4})"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    check(ok, format!("{}, {secs:.1}s", detail.join(", ")))
}

/// Criterion 2: WMMSE sum rate never drops by more than 1e-9 per sweep; Dinkelbach
/// ratios never decrease and the final residual is within 1e-6.
fn solver_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (w, d) = (WmmseConfig::default(), DinkelbachConfig::default());
    let mut worst_drop: f64 = 0.0;
    let mut worst_lambda_drop: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    let mut runs = 0;
    for seed in 0..20 {
        for n in [2, 3, 5] {
            let chan = sample_channel(n, 1000 + seed).map_err(|e| e.to_string())?;
            for _ in 0..3 {
                let p0 = PowerAction::random(&mut rng, n, chan.p_max());
                let r = wmmse_max_se(&chan, &p0, w.max_iter, w.tol).map_err(|e| e.to_string())?;
                for pair in r.history.windows(2) {
                    worst_drop = worst_drop.max(pair[0] - pair[1]);
                }
                let r = dinkelbach_max_ee(&chan, &p0, d.max_outer, d.tol).map_err(|e| e.to_string())?;
                for pair in r.history.windows(2) {
                    worst_lambda_drop = worst_lambda_drop.max(pair[0] - pair[1]);
                }
                if !r.converged {
                    return Err(format!("Dinkelbach did not converge on seed {seed}, n={n}"));
                }
                worst_residual = worst_residual.max(r.residuals.last().copied().unwrap_or(0.0).abs());
                runs += 1;
            }
        }
    }
    check(
        worst_drop <= 1e-9 && worst_lambda_drop <= 0.0 && worst_residual <= 1e-6,
        format!(
            "{runs} runs; max SE drop {worst_drop:.2e}, max lambda drop {worst_lambda_drop:.2e}, max |F| {worst_residual:.2e}"
        ),
    )
}

/// Criterion 3: Analytic gradient of the subtracted objective against central
/// finite differences.
fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = 2 + k % 4;
        let chan = sample_channel(n, 500 + k as u64).map_err(|e| e.to_string())?;
        let lambda = rng.random::<f64>() * 2.0;
        let p: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>() * (chan.p_max() - 1.0)).collect();
        let mut g = vec![0.0; n];
        subtracted_gradient(&chan, lambda, &p, &mut g);
        for i in 0..n {
            let (mut up, mut dn) = (p.clone(), p.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (subtracted_objective(&chan, lambda, &up) - subtracted_objective(&chan, lambda, &dn)) / (2.0 * h);
            let rel = (g[i] - fd).abs() / fd.abs().max(1e-8);
            worst = worst.max(rel);
        }
    }
    check(worst <= 1e-4, format!("100 points, max relative error {worst:.2e}"))
}

fn sample_pair(rng: &mut ChaCha8Rng) -> ActionRewardPair {
    // Coarse values so that duplicates and full ties actually happen.
    let action = PowerAction::new((0..2).map(|_| rng.random_range(0..4) as f64).collect());
    ActionRewardPair {
        action,
        reward: rng.random_range(0..30) as f64 / 10.0,
        iteration_found: rng.random_range(0..5),
        agent_id: rng.random_range(0..3),
        origin: if rng.random_bool(0.5) { Origin::Local } else { Origin::Global },
    }
}

type RankKey = (i64, usize, usize, String);

fn rank_key(p: &ActionRewardPair) -> RankKey {
    (-(p.reward * 10.0).round() as i64, p.iteration_found, p.agent_id, p.key())
}

/// Buffer fuzz against a reference model: the buffer must equal the top
/// `capacity` of the best-ranked pair seen per canonical action.
fn buffer_fuzz(ops: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut done = 0;
    while done < ops {
        let cap = rng.random_range(1..8);
        let mut buf = EliteBuffer::new(cap);
        let mut best_per_key: BTreeMap<String, RankKey> = BTreeMap::new();
        for _ in 0..200 {
            let batch: Vec<ActionRewardPair> = (0..rng.random_range(0..6)).map(|_| sample_pair(&mut rng)).collect();
            for p in &batch {
                let k = rank_key(p);
                best_per_key
                    .entry(p.key())
                    .and_modify(|e| {
                        if k < *e {
                            *e = k.clone()
                        }
                    })
                    .or_insert(k);
            }
            buf.insert_pairs(batch);
            buf.check_invariants()?;
            let mut expect: Vec<RankKey> = best_per_key.values().cloned().collect();
            expect.sort();
            expect.truncate(cap);
            let got: Vec<RankKey> = buf.pairs().iter().map(rank_key).collect();
            if got != expect {
                return Err(format!("buffer diverged from model after {done} ops"));
            }
            done += 1;
        }
    }
    Ok(())
}

fn step_all(
    agents: &mut [AgentState],
    chan: &ChannelRealization,
    mock: &MockProposer,
    settings: &StepSettings,
    t: usize,
) -> Result<Vec<swarm_opt::agent::StepReport>, String> {
    agents
        .iter_mut()
        .map(|a| step_agent(a, chan, mock, settings, t).map_err(|e| e.to_string()))
        .collect()
}

/// Criterion 4: Coordinator invariants.
fn coordinator_invariants() -> Outcome {
    let mock = MockProposer::new(MockParams::default());
    let mut checks = 0usize;
    for policy in [Policy::Dynamic, Policy::Passive] {
        for seed in 0..5u64 {
            let chan = sample_channel(3, seed).map_err(|e| e.to_string())?;
            let mut agents: Vec<AgentState> = (0..4)
                .map(|a| init_agent(a, &chan, Objective::Ee, 5, 20, seed * 10 + a as u64))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let mut coord = CoordinatorState::new(policy, 4, 10);
            let settings = StepSettings {
                objective: Objective::Ee,
                n_actions: 5,
                icl_k: 10,
                collaborative: true,
            };
            let mut pushed_max = f64::NEG_INFINITY;
            let mut ever_max = agents.iter().map(|a| a.best_reward).fold(f64::NEG_INFINITY, f64::max);
            for t in 1..=60 {
                let reports = step_all(&mut agents, &chan, &mock, &settings, t)?;
                let before: Vec<EliteBuffer> = agents.iter().map(|a| a.buffer.clone()).collect();
                for r in &reports {
                    let m = r.new_pairs.iter().map(|p| p.reward).fold(f64::NEG_INFINITY, f64::max);
                    ever_max = ever_max.max(m);
                    if policy == Policy::Passive || r.improved {
                        pushed_max = pushed_max.max(m);
                    }
                }
                coord.sync(&mut agents, &reports).map_err(|e| e.to_string())?;
                if coord.global_buffer.top_reward() != Some(pushed_max).filter(|v| v.is_finite()) {
                    return Err(format!("{policy} seed {seed} t={t}: global top != max pushed reward"));
                }
                if best_so_far(&agents, &coord) != ever_max {
                    return Err(format!("{policy} seed {seed} t={t}: best_so_far != running max"));
                }
                if policy == Policy::Dynamic {
                    for ((a, r), b) in agents.iter().zip(&reports).zip(&before) {
                        if r.improved && a.buffer != *b {
                            return Err(format!("seed {seed} t={t}: improved agent {} was polluted", a.agent_id));
                        }
                    }
                }
                checks += 1;
            }
        }
    }

    // None policy against agents run alone, bit for bit.
    let cfg = ExperimentConfig {
        n_iterations: 40,
        policies: vec![Method::None],
        run_seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let out = execute(&cfg, &mock, false).map_err(|e| e.to_string())?;
    let chan = sample_channel_with(cfg.n_cells, cfg.channel_seed, cfg.channel_params()).map_err(|e| e.to_string())?;
    for run in &out.trajectories {
        let alone: Vec<Vec<f64>> = (0..cfg.n_agents)
            .map(|a| run_isolated_agent(&cfg, &chan, run.seed, a, &mock))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for (t, v) in run.best_so_far.iter().enumerate() {
            let expect = alone.iter().map(|c| c[t]).fold(f64::NEG_INFINITY, f64::max);
            if v.to_bits() != expect.to_bits() {
                return Err(format!("None seed {} differs from isolated agents at t={t}", run.seed));
            }
        }
    }

    let ops = 20_000;
    buffer_fuzz(ops)?;
    Ok(format!(
        "{checks} synced rounds checked, None == isolated on {} seeds, {ops} buffer operations fuzzed",
        out.trajectories.len()
    ))
}

/// Criterion 5: Every method has spent the same number of evaluations after every
/// iteration, recomputed from the transcript.
fn budget_fairness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        n_iterations: 40,
        run_seeds: vec![0, 1, 2],
        output_dir: dir.path().to_path_buf(),
        log_prompts: false,
        ..Default::default()
    };
    let art = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let records = read_transcript(&art.transcript_path).map_err(|e| e.to_string())?;
    let mut spent: BTreeMap<(Method, u64), usize> = BTreeMap::new();
    let mut table: BTreeMap<(u64, usize), Vec<usize>> = BTreeMap::new();
    for r in &records {
        match r {
            TranscriptRecord::Init { rewards, .. }
            | TranscriptRecord::Step { rewards, .. }
            | TranscriptRecord::BruteForce { rewards, .. } => {
                *spent.entry(r.method_seed()).or_default() += rewards.len();
            }
            TranscriptRecord::Iteration {
                seed,
                iteration,
                cumulative_evaluations,
                ..
            } => {
                let s = spent.get(&r.method_seed()).copied().unwrap_or(0);
                if s != *cumulative_evaluations {
                    return Err(format!("{:?} iteration {iteration}: logged {cumulative_evaluations}, counted {s}", r.method_seed()));
                }
                table.entry((*seed, *iteration)).or_default().push(s);
            }
            _ => {}
        }
    }
    let rows = table.len();
    let fair = table.values().all(|v| v.len() == cfg.policies.len() && v.iter().all(|c| *c == v[0]));
    check(fair, format!("{rows} (seed, iteration) cells, {} methods each", cfg.policies.len()))
}

fn median_crossings(objective: Objective, n_iterations: usize) -> Result<BTreeMap<Method, f64>, String> {
    let cfg = ExperimentConfig {
        objective,
        n_iterations,
        policies: vec![Method::Dynamic, Method::Passive, Method::None],
        ..Default::default()
    };
    let p = build_proposer(&cfg.proposer).map_err(|e| e.to_string())?;
    let out = execute(&cfg, p.as_ref(), false).map_err(|e| e.to_string())?;
    let b = out.baseline_value();
    Ok(cfg
        .policies
        .iter()
        .map(|m| {
            let c: Vec<f64> = out
                .runs_for(*m)
                .map(|r| {
                    r.best_so_far
                        .iter()
                        .position(|v| v / b >= 0.9)
                        .map_or(f64::INFINITY, |i| i as f64)
                })
                .collect();
            (*m, median(&c))
        })
        .collect())
}

/// Criterion 6: Ordering of median 0.9-crossing iterations under the default mock.
fn mock_ordering() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for objective in [Objective::Se, Objective::Ee] {
        let c = median_crossings(objective, 200)?;
        let (d, p, n) = (c[&Method::Dynamic], c[&Method::Passive], c[&Method::None]);
        let this = d < p && d < n && d <= 150.0;
        ok &= this;
        detail.push(format!(
            "{objective}: dynamic {d} passive {p} none {n} [dyn<passive {}, dyn<none {}, dyn<=150 {}]",
            d < p,
            d < n,
            d <= 150.0
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    check(ok, format!("{}; {secs:.1}s", detail.join("; ")))
}

/// Criterion 7: Dynamic's median normalized reward at iteration 50 does not drop as
/// agents are added (1% tolerance).
fn agent_scaling() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for objective in [Objective::Ee, Objective::Se] {
        let mut values = Vec::new();
        for n_agents in [1, 3, 5, 9] {
            let cfg = ExperimentConfig {
                objective,
                n_agents,
                n_iterations: 50,
                policies: vec![Method::Dynamic],
                ..Default::default()
            };
            let p = build_proposer(&cfg.proposer).map_err(|e| e.to_string())?;
            let out = execute(&cfg, p.as_ref(), false).map_err(|e| e.to_string())?;
            let b = out.baseline_value();
            let at50: Vec<f64> = out.runs_for(Method::Dynamic).map(|r| r.best_so_far[50] / b).collect();
            values.push(median(&at50));
        }
        ok &= values.windows(2).all(|w| w[1] >= w[0] * 0.99);
        let shown: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
        detail.push(format!("{objective} n=1,3,5,9 -> {}", shown.join(", ")));
    }
    check(ok, detail.join("; "))
}

fn violations(prompt: &str) -> Vec<&'static str> {
    let lower = prompt.to_lowercase();
    FORBIDDEN_TOKENS
        .iter()
        .copied()
        .filter(|t| lower.contains(&t.to_lowercase()))
        .collect()
}

/// Criterion 8: No rendered prompt contains system-model vocabulary.
fn prompt_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..2000 {
        let n_cells = rng.random_range(1..8);
        let p_max = [1.0, 10.0, 23.5, 100.0][rng.random_range(0..4)];
        let examples: Vec<IclExample> = (0..rng.random_range(1..12))
            .map(|_| IclExample {
                action: PowerAction::random(&mut rng, n_cells, p_max),
                reward: rng.random::<f64>() * 20.0,
                origin: Origin::Local,
            })
            .collect();
        let prompt = render_prompt(n_cells, p_max, &examples, rng.random_range(1..10), rng.random_bool(0.5))
            .map_err(|e| e.to_string())?;
        let bad = violations(&prompt);
        if !bad.is_empty() {
            return Err(format!("rendered prompt contains {bad:?}"));
        }
        checked += 1;
    }
    // and every prompt an actual run sends
    let cfg = ExperimentConfig {
        n_iterations: 10,
        run_seeds: vec![0],
        ..Default::default()
    };
    let p = build_proposer(&cfg.proposer).map_err(|e| e.to_string())?;
    let out = execute(&cfg, p.as_ref(), true).map_err(|e| e.to_string())?;
    for line in &out.transcript {
        if let Ok(TranscriptRecord::Step { prompt: Some(prompt), .. }) = serde_json::from_str(line) {
            let bad = violations(&prompt);
            if !bad.is_empty() {
                return Err(format!("run prompt contains {bad:?}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} prompts, case-insensitive"))
}

fn fuzz_text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &[
        "power", ":", "[", "]", ",", " ", "\n", "\r\n", "1.5", "-3", "1e3", "nan", "inf", "NaN", "reward", "x",
        "power: [1, 2, 3]", "power:[", "\u{00e9}", "\u{1F600}", "\t", "0.000", "99999999999999999999", ".",
    ];
    (0..rng.random_range(0..40))
        .map(|_| {
            if rng.random_bool(0.1) {
                char::from_u32(rng.random_range(0..0x11000)).map(String::from).unwrap_or_default()
            } else {
                PIECES[rng.random_range(0..PIECES.len())].to_string()
            }
        })
        .collect()
}

/// Criterion 9: Parsing never fails and mock output always round-trips.
fn parser_totality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let fuzz = 20_000;
    for _ in 0..fuzz {
        let text = fuzz_text(&mut rng);
        let n = rng.random_range(1..5);
        let max = rng.random_range(0..6);
        let batch = std::panic::catch_unwind(|| parse_actions(&text, n, 10.0, max))
            .map_err(|_| format!("parser panicked on {text:?}"))?;
        if batch.actions.len() > max || batch.actions.iter().any(|a| a.len() != n || a.iter().any(|v| !(0.0..=10.0).contains(v))) {
            return Err(format!("inadmissible batch from {text:?}"));
        }
    }
    let mut calls = 0;
    for trial in 0..2000u64 {
        let params = MockParams {
            exploit_sigma: [0.005, 0.1, 0.5, 3.0][trial as usize % 4],
            explore_prob: rng.random(),
            halluc_prob: if trial % 7 == 0 { 1.0 } else { rng.random() },
            seed: trial,
        };
        let n_cells = rng.random_range(1..7);
        let p_max = [1.0, 10.0, 7.3][rng.random_range(0..3)];
        let n_actions = rng.random_range(1..9);
        let examples: Vec<IclExample> = (0..rng.random_range(1..11))
            .map(|_| IclExample {
                action: PowerAction::random(&mut rng, n_cells, p_max),
                reward: rng.random(),
                origin: Origin::Local,
            })
            .collect();
        let mut stream = ChaCha8Rng::seed_from_u64(trial);
        let text = mock_propose(&params, &mut stream, &examples, n_actions, n_cells, p_max).map_err(|e| e.to_string())?;
        let batch = parse_actions(&text, n_cells, p_max, n_actions);
        if batch.actions.len() != n_actions || batch.parse_failures != 0 {
            return Err(format!("mock output did not round-trip: {text:?}"));
        }
        let chan = sample_channel(n_cells, trial).map_err(|e| e.to_string())?.with_params(env::ChannelParams {
            noise_power: 1.0,
            p_max,
            p_circuit: 1.0,
        })
        .map_err(|e| e.to_string())?;
        for a in &batch.actions {
            chan.check_admissible(a).map_err(|e| e.to_string())?;
        }
        calls += 1;
    }
    Ok(format!("{fuzz} fuzzed texts, {calls} mock round-trips"))
}

/// Criterion 10: Optional live run against a real endpoint.
fn live_smoke() -> Option<Outcome> {
    if std::env::var("SWARM_OPT_LIVE").as_deref() != Ok("1") {
        return None;
    }
    let run = || -> Outcome {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = ExperimentConfig {
            n_iterations: 20,
            policies: vec![Method::Dynamic],
            run_seeds: vec![0],
            output_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        cfg.proposer.kind = ProposerKind::Remote;
        if let Ok(e) = std::env::var("SWARM_OPT_ENDPOINT") {
            cfg.proposer.endpoint_url = e;
        }
        if let Ok(m) = std::env::var("SWARM_OPT_MODEL") {
            cfg.proposer.model_name = m;
        }
        let art = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let t = art.outcome.trajectories.first().ok_or("run failed")?;
        let steps = read_transcript(&art.transcript_path)
            .map_err(|e| e.to_string())?
            .iter()
            .filter(|r| matches!(r, TranscriptRecord::Step { raw_response: Some(_), .. }))
            .count();
        check(
            t.best_so_far.windows(2).all(|w| w[0] <= w[1]) && steps > 0,
            format!("{steps} logged calls, final normalized {:.3}", t.best_so_far.last().unwrap() / art.outcome.baseline_value()),
        )
    };
    Some(run())
}

fn main() {
    // `cargo test` passes filter/flags; this suite always runs in full.
    let criteria: Vec<Criterion> = vec![
        ("1 solver correctness vs grid oracle", solvers_vs_grid),
        ("2 WMMSE / Dinkelbach monotonicity", solver_monotonicity),
        ("3 gradient vs finite differences", gradient_check),
        ("4 coordinator invariant suite", coordinator_invariants),
        ("5 evaluation-budget fairness", budget_fairness),
        ("6 mock-calibrated policy ordering", mock_ordering),
        ("7 multi-agent scaling direction", agent_scaling),
        ("8 knowledge-free prompt contract", prompt_contract),
        ("9 parser totality and mock round-trip", parser_totality),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS criterion {name}: {d} ({secs:.1}s)"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d} ({secs:.1}s)");
            }
        }
    }
    match live_smoke() {
        None => println!("SKIP criterion 10 live smoke: set SWARM_OPT_LIVE=1 and SWARM_OPT_API_KEY to run"),
        Some(Ok(d)) => println!("PASS criterion 10 live smoke: {d}"),
        // non-blocking by definition
        Some(Err(d)) => println!("FAIL criterion 10 live smoke (non-blocking): {d}"),
    }
    println!("acceptance: {failed} blocking criterion/criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
