//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use ehfl::energy::{Battery, HarvestProcess};
use ehfl::learner::{
    batch_train, finalize_training, forward, loss, loss_and_gradient, FeatureVector, Init,
    Minibatch, ModelParams,
};
use ehfl::metrics::{write_csv, EnergyEvent, EnergyLedger};
use ehfl::rng::{stream, Domain};
use ehfl::scheduler::{
    fedbacys_eligibility, fedbacys_odd_eligibility, vaoi_select, ClientView, GroupSchedule,
    SelectionRule,
};
use ehfl::semantics::{next_age, probe, VaoiState};
use ehfl::sweep::Grid;
use ehfl::{run_to_completion, Config, PolicyKind, RunArtifacts, SimulationRun};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_secs,
        format!("took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 1

fn energy_state_machine() -> Outcome {
    let started = Instant::now();
    let e_max = 25;

    // Debit-then-credit against the closed form over the full small domain.
    for e in 0..=e_max {
        for t in 0..=1u32 {
            for c in [false, true] {
                let mut b = Battery::new(e, e_max);
                let granted = b.try_debit(t);
                if c {
                    b.credit();
                }
                if e >= t {
                    check(granted, format!("E={e} T={t} denied"))?;
                    let want = ((e - t) + c as u32).min(e_max);
                    check(
                        b.level() == want,
                        format!("E={e} T={t} C={c}: got {} want {want}", b.level()),
                    )?;
                } else {
                    check(!granted, format!("E={e} T={t} granted"))?;
                    check(
                        b.level() == (c as u32).min(e_max),
                        "denied action cost energy",
                    )?;
                }
            }
        }
    }

    // Randomized slot steps with an independent ledger.
    let mut rng = stream(2024, Domain::Test, 1);
    let mut steps = 0u64;
    for trial in 0..20u64 {
        let cap = rng.random_range(1..=40u32);
        let kappa = rng.random_range(1..=cap);
        let p_bc = rng.random_range(0.0..=1.0);
        let init = rng.random_range(0..=cap);
        let mut battery = Battery::new(init, cap);
        let mut harvest = HarvestProcess::new(p_bc, stream(2024, Domain::Harvest, trial));
        let mut ledger = EnergyLedger::default();
        let mut credited = 0u64;
        for _ in 0..6000 {
            let before = battery.level();
            harvest.harvest(&mut battery);
            credited += (battery.level() - before) as u64;
            match rng.random_range(0..3) {
                0 if battery.try_transmit() => ledger.record(EnergyEvent::Transmit),
                1 if battery.try_start_training(kappa) => {
                    ledger.record(EnergyEvent::TrainStart { kappa })
                }
                _ => {}
            }
            check(battery.level() <= cap, "battery above capacity")?;
            check(
                init as u64 + credited - ledger.cum_energy == battery.level() as u64,
                "ledger conservation broken",
            )?;
            check(
                ledger.cum_energy == kappa as u64 * ledger.trainings + ledger.transmissions,
                "ledger counters inconsistent",
            )?;
            steps += 1;
        }
    }

    // The same invariants inside the full simulator, slot by slot.
    let cfg = Config {
        policy: PolicyKind::FedavgGreedy,
        p_bc: 0.3,
        epochs: 40,
        ..Config::desk(5)
    };
    let mut sim = SimulationRun::new(cfg.clone()).map_err(|e| e.to_string())?;
    while !sim.finished() {
        sim.step_slot().map_err(|e| e.to_string())?;
        let stored: u64 = sim.clients().iter().map(|c| c.battery.level() as u64).sum();
        let harvested: u64 = sim.clients().iter().map(|c| c.harvested_units).sum();
        check(
            sim.clients().iter().all(|c| c.battery.level() <= cfg.e_max),
            "client battery above capacity",
        )?;
        check(
            cfg.e_init as u64 * cfg.n_clients as u64 + harvested - sim.ledger().cum_energy
                == stored,
            "simulator conservation broken",
        )?;
        steps += cfg.n_clients as u64;
    }
    check(steps >= 100_000, format!("only {steps} steps"))?;
    within(started.elapsed(), 10.0)?;
    Ok(format!(
        "{steps} steps, {:.2}s",
        started.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

/// Age recomputed from the whole history: the number of rounds since the
/// last participation whose distance was missing or at least `mu`.
fn replay_age(history: &[(bool, Option<f64>)], mu: f64) -> u64 {
    let start = history.iter().rposition(|(q, _)| *q).map_or(0, |i| i + 1);
    history[start..]
        .iter()
        .filter(|(_, m)| m.is_none_or(|m| m >= mu))
        .count() as u64
}

fn vaoi_replay() -> Outcome {
    let started = Instant::now();
    let mut rng = stream(77, Domain::Test, 2);
    for trace in 0..1000 {
        let mu = [0.5, 0.1, 1.0, 2.5][trace % 4];
        let p_q = rng.random_range(0.0..0.5);
        let mut state = VaoiState::new(mu);
        let mut history = Vec::with_capacity(500);
        for _ in 0..500 {
            let q = rng.random_bool(p_q);
            let m = match rng.random_range(0..10) {
                0 => None,
                1 => Some(mu),
                _ => Some(rng.random_range(0.0..2.0 * mu)),
            };
            state.update(q, m);
            history.push((q, m));
        }
        check(
            state.age() == replay_age(&history, mu),
            format!("trace {trace} diverged"),
        )?;
    }
    within(started.elapsed(), 5.0)?;
    Ok(format!(
        "1000 traces x 500, {:.2}s",
        started.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 3

fn gradient_check() -> Outcome {
    let mut rng = stream(3, Domain::Test, 3);
    let mut worst = 0.0f64;
    for net in 0..10u64 {
        let d_in = rng.random_range(2..6);
        let mut sizes = vec![d_in];
        for _ in 0..rng.random_range(1..3) {
            sizes.push(rng.random_range(2..7));
        }
        let classes = rng.random_range(2..5);
        sizes.push(classes);
        let model = ModelParams::init(&sizes, Init::Uniform, &mut stream(3, Domain::Init, net));
        let rows = rng.random_range(1..6);
        let inputs: Vec<f64> = (0..rows * d_in)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes)).collect();
        let batch = Minibatch::new(inputs, d_in, labels).map_err(|e| e.to_string())?;
        let bp = loss_and_gradient(&model, &batch, sizes.len() - 1).map_err(|e| e.to_string())?;
        let h = 1e-6;
        for _ in 0..20 {
            let j = rng.random_range(0..model.len());
            let mut plus = model.clone();
            plus.values_mut()[j] += h;
            let mut minus = model.clone();
            minus.values_mut()[j] -= h;
            let fd = (loss(&plus, &batch).unwrap() - loss(&minus, &batch).unwrap()) / (2.0 * h);
            let an = bp.gradient[j];
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-7);
            worst = worst.max(rel);
            check(
                rel < 1e-4,
                format!("net {net} coord {j}: analytic {an} vs numeric {fd}"),
            )?;
        }
    }
    Ok(format!("200 coordinates, worst relative error {worst:.2e}"))
}

// ---------------------------------------------------------------- 4

type Key = (std::cmp::Reverse<u64>, u64, usize);

/// The size-`k` index set whose sorted priority keys are lexicographically
/// smallest among all size-`k` subsets.
fn brute_top_k(ages: &[u64], last: &[Option<u64>], k: usize) -> Vec<usize> {
    let n = ages.len();
    let key = |i: usize| -> Key { (std::cmp::Reverse(ages[i]), last[i].map_or(0, |v| v + 1), i) };
    let mut best: Option<(Vec<Key>, Vec<usize>)> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut keys: Vec<_> = set.iter().map(|&i| key(i)).collect();
        keys.sort();
        if best.as_ref().is_none_or(|(b, _)| keys < *b) {
            best = Some((keys, set));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

fn scheduler_correctness() -> Outcome {
    let mut rng = stream(4, Domain::Test, 4);
    let mut cases = 0u64;
    for n in 1..=6usize {
        let total = 4usize.pow(n as u32);
        for code in 0..total {
            let ages: Vec<u64> = (0..n)
                .map(|i| (code / 4usize.pow(i as u32) % 4) as u64)
                .collect();
            let mut last: Vec<Option<u64>> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        None
                    } else {
                        Some(rng.random_range(0..4))
                    }
                })
                .collect();
            if ages.iter().all(|&a| a == 0) && last.iter().all(Option::is_none) {
                // Only the fresh all-zero case is random; give it a history.
                last[0] = Some(0);
            }
            for k in 0..=n {
                let got = vaoi_select(&ages, &last, k, SelectionRule::TopK, &mut rng);
                let want = brute_top_k(&ages, &last, k);
                check(
                    got.selected == want,
                    format!(
                        "ages {ages:?} last {last:?} k={k}: {:?} vs {want:?}",
                        got.selected
                    ),
                )?;
                // Multiset of selected ages must be the k largest.
                let mut sorted = ages.clone();
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                let mut picked: Vec<u64> = got.selected.iter().map(|&i| ages[i]).collect();
                picked.sort_unstable_by(|a, b| b.cmp(a));
                check(picked == sorted[..k], "not the k largest ages")?;
                cases += 1;
            }
        }
    }
    // All-zero ages before any participation: any k-subset from the stream.
    for n in 1..=6usize {
        for k in 0..=n {
            let d = vaoi_select(
                &vec![0; n],
                &vec![None; n],
                k,
                SelectionRule::TopK,
                &mut rng,
            );
            check(d.selected.len() == k, "all-zero draw has wrong size")?;
        }
    }

    // FedBacys: at most one launch per G epochs, on random client traces.
    let mut launches_checked = 0u64;
    for trial in 0..200u64 {
        let groups = rng.random_range(1..6u64);
        let schedule = GroupSchedule {
            groups,
            slots_per_epoch: 30,
            kappa: 20,
        };
        let id = rng.random_range(0..12usize);
        let mut battery = Battery::new(rng.random_range(0..=25), 25);
        let mut harvest = HarvestProcess::new(
            rng.random_range(0.0..=1.0),
            stream(trial, Domain::Harvest, 0),
        );
        let mut busy_until = 0u64;
        let mut pending_until: Option<u64> = None;
        let mut launches: Vec<u64> = Vec::new();
        for slot in 0..30 * 60u64 {
            harvest.harvest(&mut battery);
            if pending_until.is_some_and(|p| slot >= p) && battery.try_transmit() {
                pending_until = None;
                continue;
            }
            let view = ClientView {
                id,
                idle: slot >= busy_until,
                has_pending: pending_until.is_some(),
                battery: battery.level(),
            };
            if fedbacys_eligibility(&view, slot, &schedule) && battery.try_start_training(20) {
                busy_until = slot + 20;
                pending_until = Some(busy_until);
                launches.push(slot / 30);
            }
        }
        for w in launches.windows(2) {
            check(
                w[1] - w[0] >= groups,
                format!("G={groups}: launches in epochs {} and {}", w[0], w[1]),
            )?;
        }
        check(
            launches.iter().all(|&e| e % groups == id as u64 % groups),
            "launch outside the client's group epochs",
        )?;
        launches_checked += launches.len() as u64;
    }

    // Same property inside the simulator.
    let cfg = Config {
        policy: PolicyKind::Fedbacys,
        p_bc: 1.0,
        epochs: 40,
        ..Config::desk(9)
    };
    let groups = cfg.groups();
    let mut sim = SimulationRun::new(cfg).map_err(|e| e.to_string())?;
    let mut seen: HashMap<usize, Vec<u64>> = HashMap::new();
    let mut prev: Vec<Option<u64>> = sim.clients().iter().map(|c| c.busy_until).collect();
    while !sim.finished() {
        let slot = sim.clock().slot();
        sim.step_slot().map_err(|e| e.to_string())?;
        for (i, c) in sim.clients().iter().enumerate() {
            if c.busy_until != prev[i] {
                seen.entry(i).or_default().push(slot / 30);
                prev[i] = c.busy_until;
            }
        }
    }
    for (i, epochs) in &seen {
        for w in epochs.windows(2) {
            check(
                w[1] - w[0] >= groups,
                format!("client {i} launched in {w:?}"),
            )?;
        }
    }

    // FedBacys-Odd: exactly the odd opportunities of a synthetic sequence.
    let schedule = GroupSchedule {
        groups: 2,
        slots_per_epoch: 30,
        kappa: 20,
    };
    for _ in 0..500 {
        let mut counter = 0u64;
        let mut opportunities = 0u64;
        for epoch in 0..100u64 {
            let slot = epoch * 30 + 9;
            let meets = rng.random_bool(0.6);
            let view = ClientView {
                id: 0,
                idle: true,
                has_pending: !meets,
                battery: 25,
            };
            let expect_opportunity = meets && epoch % 2 == 0;
            if expect_opportunity {
                opportunities += 1;
            }
            let trains = fedbacys_odd_eligibility(&view, slot, &schedule, &mut counter);
            check(
                trains == (expect_opportunity && opportunities % 2 == 1),
                format!("epoch {epoch}: opportunity #{opportunities}, trains={trains}"),
            )?;
        }
        check(
            counter == opportunities,
            "counter does not count opportunities",
        )?;
    }
    Ok(format!(
        "{cases} top-k cases, {launches_checked} FedBacys launches, 500 odd-rule sequences"
    ))
}

// ---------------------------------------------------------------- 5-7

fn desk_runs(
    policies: &[PolicyKind],
    alphas: &[f64],
    p_bc: f64,
) -> Result<Vec<RunArtifacts>, String> {
    let grid = Grid {
        policies: policies.to_vec(),
        alphas: alphas.to_vec(),
        p_bcs: vec![p_bc],
        seeds: (0..5).collect(),
    };
    let configs = grid.configs(&Config::desk(1)).map_err(|e| e.to_string())?;
    configs
        .par_iter()
        .map(|c| run_to_completion(c).map_err(|e| e.to_string()))
        .collect()
}

fn find(runs: &[RunArtifacts], policy: PolicyKind, alpha: f64, seed_idx: usize) -> &RunArtifacts {
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.config.seed).collect();
    seeds.dedup();
    let seed = seeds[seed_idx];
    runs.iter()
        .find(|r| r.config.policy == policy && r.config.alpha == alpha && r.config.seed == seed)
        .expect("run present")
}

fn lowest_version_age() -> Outcome {
    let started = Instant::now();
    let runs = desk_runs(&PolicyKind::ALL, &[0.1], 0.1)?;
    let mut wins = 0;
    let mut detail = Vec::new();
    for s in 0..5 {
        let v = find(&runs, PolicyKind::Vaoi, 0.1, s).tail_mean_vaoi(50);
        let best_baseline = [
            PolicyKind::FedavgGreedy,
            PolicyKind::Fedbacys,
            PolicyKind::FedbacysOdd,
        ]
        .iter()
        .map(|&p| find(&runs, p, 0.1, s).tail_mean_vaoi(50))
        .fold(f64::INFINITY, f64::min);
        if v < best_baseline {
            wins += 1;
        }
        detail.push(format!("{v:.2}<{best_baseline:.2}"));
    }
    within(started.elapsed(), 900.0)?;
    let msg = format!("{wins}/5 seeds [{}]", detail.join(" "));
    if wins >= 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn energy_savings() -> Outcome {
    let alphas = [0.1, 1.0, 10.0];
    let runs = desk_runs(&PolicyKind::ALL, &alphas, 1.0)?;
    let mut ratios = Vec::new();
    for s in 0..5 {
        let e = |p| find(&runs, p, 0.1, s).final_metrics().cum_energy as f64;
        let (vaoi, greedy, odd) = (
            e(PolicyKind::Vaoi),
            e(PolicyKind::FedavgGreedy),
            e(PolicyKind::FedbacysOdd),
        );
        check(
            vaoi <= 0.8 * greedy,
            format!("seed {s}: VAoI {vaoi} vs greedy {greedy}"),
        )?;
        check(
            odd <= vaoi,
            format!("seed {s}: FedBacys-Odd {odd} vs VAoI {vaoi}"),
        )?;
        ratios.push(vaoi / greedy);
        for &p in &PolicyKind::ALL {
            let series = |a: f64| -> Vec<u64> {
                find(&runs, p, a, s)
                    .metrics
                    .iter()
                    .map(|m| m.cum_energy)
                    .collect()
            };
            let base = series(alphas[0]);
            for &a in &alphas[1..] {
                check(
                    series(a) == base,
                    format!("{p} seed {s}: energy trace differs at alpha={a}"),
                )?;
            }
        }
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "VAoI/greedy energy <= {worst:.3} in 5/5 seeds, FedBacys-Odd <= VAoI, traces alpha-invariant"
    ))
}

fn scarce_energy_accuracy() -> Outcome {
    let runs = desk_runs(&[PolicyKind::Vaoi, PolicyKind::FedavgGreedy], &[0.1], 0.01)?;
    let mut wins = 0;
    let mut detail = Vec::new();
    for s in 0..5 {
        let v = find(&runs, PolicyKind::Vaoi, 0.1, s)
            .final_metrics()
            .macro_f1;
        let g = find(&runs, PolicyKind::FedavgGreedy, 0.1, s)
            .final_metrics()
            .macro_f1;
        if v >= g {
            wins += 1;
        }
        detail.push(format!("{v:.3}/{g:.3}"));
    }
    let msg = format!("{wins}/5 seeds [{}]", detail.join(" "));
    if wins >= 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 8

fn csv_bytes(cfg: &Config) -> Result<Vec<u8>, String> {
    let run = run_to_completion(cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    write_csv(&mut out, &[(&run.label, &run.metrics)]).map_err(|e| e.to_string())?;
    Ok(out)
}

fn determinism() -> Outcome {
    let mut total = 0;
    for policy in PolicyKind::ALL {
        for selection in [SelectionRule::TopK, SelectionRule::Proportional] {
            let cfg = Config {
                policy,
                selection,
                epochs: 60,
                p_bc: 0.3,
                ..Config::desk(42)
            };
            let a = csv_bytes(&cfg)?;
            let b = csv_bytes(&cfg)?;
            check(
                a == b,
                format!("{policy} {selection:?}: CSV differs between runs"),
            )?;
            total += a.len();
        }
    }
    Ok(format!(
        "8 configurations repeated, {total} bytes identical"
    ))
}

// ---------------------------------------------------------------- 9

fn feature_moment_worked_example() -> Outcome {
    // [2, 2, 1] network; the feature layer is the hidden layer.
    // W1 = [[1, -1], [2, 0.5]], b1 = [0.5, -1], W2 = [[1, 1]], b2 = [0].
    let model = ModelParams::from_values(
        &[2, 2, 1],
        vec![1.0, -1.0, 2.0, 0.5, 0.5, -1.0, 1.0, 1.0, 0.0],
    )
    .map_err(|e| e.to_string())?;
    let b1 = Minibatch::new(vec![2.0, 1.0, 0.0, 0.0], 2, vec![0, 0]).map_err(|e| e.to_string())?;
    let b2 = Minibatch::new(vec![1.0, 1.0], 2, vec![0]).map_err(|e| e.to_string())?;
    // relu(W1 x + b1): (2,1) -> (1.5, 3.5); (0,0) -> (0.5, 0); (1,1) -> (0.5, 1.5).
    let per_batch: Vec<FeatureVector> = [&b1, &b2]
        .iter()
        .map(|b| forward(&model, b, 1).map(|o| o.features))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    check(
        per_batch[0].0 == vec![2.0, 3.5],
        format!("batch 1 sums {:?}", per_batch[0].0),
    )?;
    check(
        per_batch[1].0 == vec![0.5, 1.5],
        format!("batch 2 sums {:?}", per_batch[1].0),
    )?;
    // h = ((2, 3.5) + (0.5, 1.5)) / 3 = (5/6, 5/3).
    let h = finalize_training(&per_batch, 3, 2).map_err(|e| e.to_string())?;
    let want_h = [5.0 / 6.0, 5.0 / 3.0];
    check(
        h.0.iter().zip(want_h).all(|(a, b)| (a - b).abs() < 1e-12),
        format!("h = {:?}", h.0),
    )?;
    // Training records pre-update feature sums, so the first step agrees.
    let step = batch_train(&model, &b1, 0.05, 1).map_err(|e| e.to_string())?;
    check(
        step.features == per_batch[0],
        "training features differ from forward pass",
    )?;

    // Global model: W1 = I, b1 = 0, so features are relu(x).
    let global = ModelParams::from_values(
        &[2, 2, 1],
        vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.3, -0.7, 0.2],
    )
    .map_err(|e| e.to_string())?;
    let probe_batch =
        Minibatch::new(vec![1.0, 2.0, 3.0, -1.0], 2, vec![0, 0]).map_err(|e| e.to_string())?;
    // Mean of (1, 2) and (3, 0) is (2, 1); M = |(7/6, -2/3)| = sqrt(65)/6.
    let m = probe(Some(&h), &global, &probe_batch, 1)
        .map_err(|e| e.to_string())?
        .ok_or("probe returned no distance")?;
    let want_m = 65f64.sqrt() / 6.0;
    check(
        (m - want_m).abs() < 1e-12,
        format!("M = {m}, want {want_m}"),
    )?;
    check(
        next_age(4, false, Some(m), 0.5) == 5,
        "age must grow when M >= mu",
    )?;
    check(
        next_age(4, false, Some(m), 1.5) == 4,
        "age must hold when M < mu",
    )?;
    Ok(format!("h = (5/6, 5/3), M = sqrt(65)/6 = {m:.6}"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 energy state machine", energy_state_machine),
        ("2 version-age replay oracle", vaoi_replay),
        ("3 gradient vs finite differences", gradient_check),
        ("4 scheduler brute force", scheduler_correctness),
        ("5 lowest version age (p_bc=0.1)", lowest_version_age),
        ("6 energy savings (p_bc=1.0)", energy_savings),
        (
            "7 scarce-energy macro-F1 (p_bc=0.01)",
            scarce_energy_accuracy,
        ),
        ("8 byte-identical reruns", determinism),
        (
            "9 feature moment and probe worked example",
            feature_moment_worked_example,
        ),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg} ({secs:.1}s)"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
