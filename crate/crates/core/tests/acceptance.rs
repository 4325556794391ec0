//! End-to-end acceptance checks. Runs every criterion in order, prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use uchrl::agents::{true_measures, Agent, AgentParams, UcHrlAgent};
use uchrl::analysis::{gram_determinant, rank_audit, RowIndex, RunRecord, DEFAULT_RANK_TOLERANCE};
use uchrl::envs::{make_block_riverswim, make_riverswim};
use uchrl::harness::{run_experiment, Algorithm, ExperimentConfig};
use uchrl::io::read_mdp;
use uchrl::linear_model::{beta_schedule, FeatureMap, GramState, TabularFeatures};
use uchrl::mdp::{optimal_values, policy_values};
use uchrl::rng::run_stream;

type Outcome = Result<String, String>;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn rank_bound() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for s in [8, 20, 100] {
        let mdp = make_riverswim(s, 20).map_err(|e| e.to_string())?;
        let report = rank_audit(&mdp, DEFAULT_RANK_TOLERANCE).map_err(|e| e.to_string())?;
        let ok = report.directly_reachable == 3
            && report.bound == s / 3
            && report.min_rank >= report.bound
            && report.satisfied
            && (s != 100 || report.min_rank == 100);
        notes.push(format!(
            "S={s} U={} bound={} rank={}",
            report.directly_reachable, report.bound, report.min_rank
        ));
        if !ok {
            return Err(notes.join("; "));
        }
    }
    let elapsed = start.elapsed();
    notes.push(format!("{:.3}s", elapsed.as_secs_f64()));
    check(elapsed < Duration::from_secs(1), notes.join("; "))
}

fn worked_kernel() -> Outcome {
    let mdp = read_mdp(&manifest().join("tests/fixtures/nine_state.toml")).map_err(|e| e.to_string())?;
    let report = rank_audit(&mdp, DEFAULT_RANK_TOLERANCE).map_err(|e| e.to_string())?;
    let cert = report.certificate();
    let rows: Vec<usize> = cert.iter().map(|r| r.state * mdp.actions() + r.action).collect();
    let matrix = mdp.kernel_matrix(0);
    let det = gram_determinant(&matrix, &rows);
    let named = [0, 6, 7];
    let contains = named.iter().all(|&s| cert.contains(&RowIndex { state: s, action: 0 }));
    let named_det = gram_determinant(&matrix, &named);
    check(
        report.directly_reachable == 3
            && report.bound == 3
            && cert.len() >= 3
            && contains
            && det > 1e-6
            && named_det > 1e-6,
        format!(
            "U={} bound={} certificate={:?} det={det:.3e}; rows s1,s7,s8 present={contains} det={named_det:.3e}",
            report.directly_reachable,
            report.bound,
            cert.iter().map(|r| r.state + 1).collect::<Vec<_>>()
        ),
    )
}

fn exact_aggregation() -> Outcome {
    let mut lines = Vec::new();
    for r in [1, 2, 4, 8] {
        let output = Command::new(env!("CARGO_BIN_EXE_uchrl"))
            .args(["agg-check", "--env", "block-riverswim", "--R", &r.to_string()])
            .output()
            .map_err(|e| e.to_string())?;
        let text = String::from_utf8_lossy(&output.stdout).trim().to_string();
        let ok = output.status.success() && text == "eps_r=0.000000000000 eps_p=0.000000000000";
        lines.push(format!("R={r}: {text}"));
        if !ok {
            return Err(lines.join("; "));
        }
    }
    Ok(lines.join("; "))
}

fn ridge_oracle() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        1usize..=4,
        1usize..=3,
        1usize..=5,
        prop_oneof![Just(1.0), 0.01f64..10.0],
        proptest::collection::vec((0usize..64, 0usize..64, 0usize..64), 0..120),
    );
    let worst_mu = Cell::new(0.0f64);
    let worst_inv = Cell::new(0.0f64);
    let result = runner.run(&strategy, |(states, actions, columns, lambda, raw)| {
        let features = TabularFeatures::new(states, actions);
        let mut gram = GramState::new(features.dim(), columns, lambda).unwrap();
        let mut counts = vec![vec![0.0; columns]; features.dim()];
        for (s, a, next) in raw {
            let (s, a, next) = (s % states, a % actions, next % columns);
            gram.update(&features.features(s, a), next).unwrap();
            counts[features.index(s, a)][next] += 1.0;
        }
        let mu = gram.estimate_measure();
        for (row, c) in counts.iter().enumerate() {
            let total: f64 = c.iter().sum();
            for (col, &n) in c.iter().enumerate() {
                let gap = (mu.0[(row, col)] - n / (total + lambda)).abs();
                worst_mu.set(worst_mu.get().max(gap));
                if gap > 1e-10 {
                    return Err(TestCaseError::fail(format!("mu gap {gap}")));
                }
            }
        }
        let direct = gram.gram().clone().try_inverse().unwrap();
        let gap = (gram.inverse() - direct).norm();
        worst_inv.set(worst_inv.get().max(gap));
        if gap > 1e-8 {
            return Err(TestCaseError::fail(format!("inverse gap {gap}")));
        }
        Ok(())
    });
    let detail = format!(
        "1000 sequences, max |mu - count oracle| = {:.2e}, max inverse gap = {:.2e}",
        worst_mu.get(),
        worst_inv.get()
    );
    match result {
        Ok(()) => Ok(detail),
        Err(e) => Err(format!("{detail}: {e}")),
    }
}

fn exact_model_planning() -> Outcome {
    let env = make_block_riverswim(2, 10).map_err(|e| e.to_string())?;
    let agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), AgentParams { lambda: 1.0, beta: 0.0 })
        .map_err(|e| e.to_string())?;
    let measures = true_measures(&env.mdp, &env.scheme).map_err(|e| e.to_string())?;
    let plan = agent.plan_with(&measures, 0.0).map_err(|e| e.to_string())?;
    let policy = uchrl::mdp::Policy::from_fn(&env.mdp, |s, h| plan.act(&env.scheme, s, h).unwrap())
        .map_err(|e| e.to_string())?;
    let s0 = env.mdp.initial_state();
    let optimal = optimal_values(&env.mdp).v(0, s0);
    let value = policy_values(&env.mdp, &policy).v(0, s0);
    check(
        (optimal - value).abs() <= 1e-9,
        format!("V^pi = {value:.12}, V* = {optimal:.12}"),
    )
}

fn optimism() -> Outcome {
    let start = Instant::now();
    let (horizon, episodes) = (10, 100);
    let env = make_block_riverswim(2, horizon).map_err(|e| e.to_string())?;
    let dim = env.scheme.max_aggregate_size() * env.mdp.actions();
    let beta = beta_schedule(1.0, dim, horizon, episodes * horizon, 0.05).map_err(|e| e.to_string())?;
    let optimal = optimal_values(&env.mdp);
    let (mut checked, mut optimistic) = (0usize, 0usize);
    for seed in 0..5 {
        let mut agent = UcHrlAgent::new(&env.mdp, env.scheme.clone(), AgentParams { lambda: 1.0, beta })
            .map_err(|e| e.to_string())?;
        let mut rng = run_stream("optimism", "uc-hrl", seed);
        for k in 1..=episodes {
            agent.begin_episode(k).map_err(|e| e.to_string())?;
            let plan = agent.plan().unwrap();
            for h in 0..horizon {
                for s in 0..env.mdp.states() {
                    for a in 0..env.mdp.actions() {
                        checked += 1;
                        if plan.state_q(&env.scheme, s, h, a).unwrap() >= optimal.q(h, s, a) - 1e-9 {
                            optimistic += 1;
                        }
                    }
                }
            }
            let mut state = env.mdp.initial_state();
            for h in 0..horizon {
                let action = agent.act(state, h).map_err(|e| e.to_string())?;
                let (reward, next) = env.mdp.step(state, action, h, &mut rng).map_err(|e| e.to_string())?;
                agent
                    .observe(state, action, reward, next, h)
                    .map_err(|e| e.to_string())?;
                state = next;
            }
        }
    }
    let fraction = optimistic as f64 / checked as f64;
    let elapsed = start.elapsed();
    check(
        fraction >= 0.99 && elapsed < Duration::from_secs(30),
        format!(
            "beta={beta:.1}, {optimistic}/{checked} optimistic ({fraction:.4}), {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

struct Advantage {
    hier: Vec<RunRecord>,
    naive: Vec<RunRecord>,
    elapsed: Duration,
}

fn run_advantage() -> Result<Advantage, String> {
    let config = ExperimentConfig::load(&manifest().join("configs/block_riverswim.toml")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let records = run_experiment(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let pick = |alg: Algorithm| {
        records
            .iter()
            .filter(|r| r.algorithm == alg.name())
            .cloned()
            .collect::<Vec<_>>()
    };
    Ok(Advantage {
        hier: pick(Algorithm::UcHrl),
        naive: pick(Algorithm::UcHrlNaive),
        elapsed,
    })
}

fn hierarchical_advantage(run: &Advantage) -> Outcome {
    if run.hier.len() != 10 || run.naive.len() != 10 || run.hier[0].rows.len() != 2000 {
        return Err("expected 10 seeds of 2000 episodes per agent".into());
    }
    let hier = median(run.hier.iter().map(RunRecord::cumulative_regret).collect());
    let naive = median(run.naive.iter().map(RunRecord::cumulative_regret).collect());
    let optimal = run.hier[0].optimal_value;
    let finals: Vec<f64> = run.hier.iter().map(|r| r.final_policy_value(100)).collect();
    let worst = finals.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    check(
        hier <= 0.7 * naive && mean >= 0.95 * optimal && run.elapsed < Duration::from_secs(300),
        format!(
            "median cum regret {hier:.1} vs naive {naive:.1} (ratio {:.3}); final-100 value mean {:.4}·V*, worst seed {:.4}·V*; {:.1}s",
            hier / naive,
            mean / optimal,
            worst / optimal,
            run.elapsed.as_secs_f64()
        ),
    )
}

fn sublinearity(run: &Advantage) -> Outcome {
    let late = median(run.hier.iter().map(|r| r.average_regret_at(2000)).collect());
    let early = median(run.hier.iter().map(|r| r.average_regret_at(200)).collect());
    check(
        late < 0.5 * early,
        format!(
            "cumregret/K: {late:.4} at K=2000 vs {early:.4} at K=200 (ratio {:.3})",
            late / early
        ),
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("config.toml");
    std::fs::write(
        &config,
        "env = \"block-riverswim\"\nR = 2\nH = 10\nalgorithms = [\"uc-hrl\", \"uc-hrl-naive\", \"lsvi-ucb\"]\n\
         K = 60\nseeds = [0, 1, 2]\nlambda = 0.01\n[beta]\nmode = \"auto\"\nC = 0.0002\ndelta = 0.05\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let dir = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_uchrl"))
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(files(&dir));
    }
    check(
        outputs[0].len() == 12 && outputs[0] == outputs[1],
        format!("{} CSV files compared byte for byte", outputs[0].len()),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 rank bound on RiverSwim", rank_bound()),
        ("2 nine-state worked kernel", worked_kernel()),
        ("3 exact Block-RiverSwim aggregation", exact_aggregation()),
        ("4 ridge estimate against count oracle", ridge_oracle()),
        ("5 exact-model planning", exact_model_planning()),
        ("6 optimism frequency", optimism()),
    ];
    match run_advantage() {
        Ok(run) => {
            results.push(("7 hierarchical advantage", hierarchical_advantage(&run)));
            results.push(("8 sublinear regret", sublinearity(&run)));
        }
        Err(e) => {
            results.push(("7 hierarchical advantage", Err(e.clone())));
            results.push(("8 sublinear regret", Err(e)));
        }
    }
    results.push(("9 byte-identical reruns", determinism()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
