//! Acceptance suite: runs every criterion and prints one PASS/FAIL line each.
//!
//! `cargo test --release -p gdm-core --test acceptance`

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use gdm_core::datagen::{generate, CollectionSpec, Dataset};
use gdm_core::gwr::{activation, adapt_toward, global_context, habituate, habituation_floor};
use gdm_core::scenarios::{
    plan_nc, plan_ni, plan_nic, run, ScenarioConfig, ScenarioKind, ScenarioReport, SeqRef, Split, NC_BATCH_SIZES,
    NIC_BATCHES,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_close(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-12 * want.abs().max(f64::MIN_POSITIVE) || got == want
}

fn kernels() -> Outcome {
    let started = Instant::now();
    let mut bad = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if !rel_close(got, want) {
            bad.push(format!("{name}: {got} != {want}"));
        }
    };

    let mut ctx = [0.0; 2];
    global_context(&[2.0, 0.0, 0.0], 1, 2, 0.5, &mut ctx);
    check("C_1", ctx[0], 2.0);
    check("C_2", ctx[1], 0.5 * 2.0 + 0.5 * 0.0);

    check("a(0)", activation(0.0), 1.0);
    check("a(ln 2)", activation(std::f64::consts::LN_2), 0.5);

    check("h(1)", habituate(1.0, 0.3, 1.05), 0.7);
    check("h(0.5)", habituate(0.5, 0.1, 1.05), 0.5 + 0.1 * 1.05 * 0.5 - 0.1);
    let f = habituation_floor(1.05);
    check("fixed point", habituate(f, 0.3, 1.05), f);

    let mut w = [0.0, 0.0];
    adapt_toward(&mut w, &[1.0, 0.0], 0.5, 1.0);
    check("w_0", w[0], 0.5);
    check("w_1", w[1], 0.0);
    let mut c = [0.0];
    adapt_toward(&mut c, &[1.0], 0.001, 1.0);
    check("c", c[0], 0.001);
    let mut frozen = [3.0];
    adapt_toward(&mut frozen, &[7.0], 0.9, 0.0);
    check("frozen", frozen[0], 3.0);

    let secs = started.elapsed().as_secs_f64();
    let pass = bad.is_empty() && secs < 1.0;
    let detail = if bad.is_empty() { format!("11 values within 1e-12, {secs:.3}s") } else { bad.join("; ") };
    outcome(pass, detail)
}

fn oracle() -> Outcome {
    let started = Instant::now();
    let mut frames = 0;
    for seed in 0..20 {
        match common::oracle_stream(seed) {
            Ok(s) => frames += s.frames,
            Err(e) => return outcome(false, e),
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(secs < 10.0, format!("20 streams, {frames} frames identical, {secs:.2}s"))
}

fn habituation() -> Outcome {
    let started = Instant::now();
    let res = common::habituation_trajectories(100_000, 2024);
    let secs = started.elapsed().as_secs_f64();
    match res {
        Ok(()) => outcome(secs < 5.0, format!("100000 trajectories, {secs:.2}s")),
        Err(e) => outcome(false, e),
    }
}

fn config(kind: ScenarioKind) -> ScenarioConfig {
    ScenarioConfig {
        evaluate_train: false,
        ..ScenarioConfig::new(kind)
    }
}

fn timed_run(cfg: &ScenarioConfig, ds: &Dataset) -> (ScenarioReport, f64) {
    let started = Instant::now();
    let report = run(cfg, ds).expect("scenario run");
    (report, started.elapsed().as_secs_f64())
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn relative_change(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / hi
}

fn invariants_hold(report: &ScenarioReport) -> bool {
    let cfg = report.config.gdm_config();
    report.trials.iter().flat_map(|t| &t.records).all(|r| {
        r.max_edge_age_em <= cfg.episodic.max_edge_age
            && r.max_edge_age_sm <= cfg.semantic.max_edge_age
            && r.neurons_em >= 2
            && r.neurons_sm >= 2
    })
}

fn plans(ds: &Dataset) -> Outcome {
    let split = Split::new(ds, 3).expect("split");
    let order: Vec<u32> = split.train_categories(ds);
    let ni = plan_ni(ds, &split).expect("ni plan");
    let nc = plan_nc(ds, &split, &order).expect("nc plan");
    let nic = plan_nic(ds, &split, &order, &mut ChaCha8Rng::seed_from_u64(0)).expect("nic plan");
    let sizes: Vec<usize> = nc.iter().map(|b| b.categories.len()).collect();

    let test: BTreeSet<SeqRef> = split.test_refs(ds, |_| true).into_iter().collect();
    let train = split.train_refs(ds, |_| true);
    let disjoint = split.check_disjoint(ds).is_ok()
        && train.iter().all(|r| !test.contains(r))
        && [&ni, &nc, &nic]
            .iter()
            .flat_map(|p| p.iter())
            .flat_map(|b| &b.sequences)
            .all(|r| !test.contains(r));
    let pass = ni.len() == 12 && sizes == NC_BATCH_SIZES && nic.len() == NIC_BATCHES && disjoint;
    outcome(
        pass,
        format!("NI {} NC {} {:?} NIC {}, disjoint {disjoint}", ni.len(), nc.len(), sizes, nic.len()),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    report(1, "kernel exactness", kernels());
    report(2, "plain GWR oracle", oracle());
    report(3, "habituation invariants", habituation());

    let ds = generate(&CollectionSpec::default()).expect("default dataset");

    let batch = ScenarioConfig {
        epochs: Some(35),
        ..config(ScenarioKind::Batch)
    };
    let (batch_tc, batch_secs) = timed_run(&batch, &ds);
    let (batch_no_tc, no_tc_secs) = timed_run(&ScenarioConfig { temporal_context: false, ..batch.clone() }, &ds);
    let (tc, no_tc) = (batch_tc.final_category_accuracy(), batch_no_tc.final_category_accuracy());
    report(
        4,
        "batch accuracy",
        outcome(
            tc >= 0.90 && tc >= no_tc && batch_secs + no_tc_secs < 600.0,
            format!("with TC {tc:.4}, without TC {no_tc:.4}, {:.0}s", batch_secs + no_tc_secs),
        ),
    );

    let started = Instant::now();
    let inc = config(ScenarioKind::Incremental);
    let (inc_replay, _) = timed_run(&inc, &ds);
    let (inc_plain, _) = timed_run(&ScenarioConfig { replay: false, ..inc.clone() }, &ds);
    let nc = config(ScenarioKind::Nc);
    let (nc_replay, _) = timed_run(&nc, &ds);
    let (nc_plain, _) = timed_run(&ScenarioConfig { replay: false, ..nc.clone() }, &ds);
    let secs = started.elapsed().as_secs_f64();
    let inc_gap = inc_replay.final_category_accuracy() - inc_plain.final_category_accuracy();
    let nc_gap = nc_replay.final_category_accuracy() - nc_plain.final_category_accuracy();
    report(
        5,
        "replay benefit",
        outcome(
            inc_gap >= 0.05 && nc_gap >= 0.05 && secs < 900.0,
            format!(
                "incremental {:.4} vs {:.4}, NC {:.4} vs {:.4}, {secs:.0}s",
                inc_replay.final_category_accuracy(),
                inc_plain.final_category_accuracy(),
                nc_replay.final_category_accuracy(),
                nc_plain.final_category_accuracy()
            ),
        ),
    );

    let retained: Vec<f64> = inc_replay
        .trials
        .iter()
        .map(|t| t.last().acc_category_test_per_class.get(&t.category_order[0]).copied().unwrap_or(0.0))
        .collect();
    let kept = retained.iter().filter(|&&a| a >= 0.5).count();
    report(
        6,
        "first category retained",
        outcome(kept >= 4, format!("{kept}/5 trials >= 50%, accuracies {retained:.3?}")),
    );

    let tail = |f: fn(&gdm_core::scenarios::EpochRecord) -> f64| -> Vec<f64> {
        (30..35).map(|e| mean(batch_tc.trials.iter().map(|t| f(&t.records[e])))).collect()
    };
    let em_change = relative_change(&tail(|r| r.neurons_em as f64));
    let sm_change = relative_change(&tail(|r| r.neurons_sm as f64));
    let qe_first = mean(batch_tc.trials.iter().map(|t| t.records[0].qe_em));
    let qe_last = mean(batch_tc.trials.iter().map(|t| t.records[34].qe_em));
    report(
        7,
        "stabilisation",
        outcome(
            em_change <= 0.05 && sm_change <= 0.05 && qe_last < qe_first,
            format!(
                "EM change {:.2}%, SM change {:.2}%, qe_em {qe_first:.4} -> {qe_last:.4}",
                100.0 * em_change,
                100.0 * sm_change
            ),
        ),
    );

    let mut plain_prune = batch.clone();
    plain_prune.overrides.removal_threshold = Some(1.0);
    let (batch_nt1, _) = timed_run(&plain_prune, &ds);
    let nt1 = batch_nt1.final_category_accuracy();
    let inv = invariants_hold(&batch_tc) && invariants_hold(&batch_nt1);
    report(
        8,
        "controlled removal",
        outcome(tc >= nt1 && inv, format!("N_T=0.2 {tc:.4}, N_T=1.0 {nt1:.4}, invariants {inv}")),
    );

    report(9, "protocol plans", plans(&ds));

    let (again, _) = timed_run(&inc, &ds);
    let metrics_same = again.metrics_string() == inc_replay.metrics_string();
    let models_same = again.trials.iter().zip(&inc_replay.trials).all(|(a, b)| a.model.to_bytes() == b.model.to_bytes());
    report(
        10,
        "reproducibility",
        outcome(metrics_same && models_same, format!("metrics identical {metrics_same}, snapshots identical {models_same}")),
    );

    let batch_size = batch_tc.trials[0].model.to_bytes().len();
    let inc_size = inc_plain.trials[0].model.to_bytes().len();
    let fp = &batch_tc.trials[0].footprint;
    let neurons = batch_tc.trials[0].model.episodic().len();
    let infer_ms = fp.inference_ms * fp.frames as f64;
    report(
        11,
        "footprint",
        outcome(
            batch_size > inc_size && fp.frames == 50 && neurons <= 2000 && infer_ms < 1000.0,
            format!(
                "batch {batch_size} B > incremental {inc_size} B, {} frames in {infer_ms:.2} ms at {neurons} neurons",
                fp.frames
            ),
        ),
    );

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
