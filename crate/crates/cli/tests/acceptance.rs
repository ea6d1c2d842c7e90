//! Acceptance suite: one PASS/FAIL line per criterion, driven through the
//! `pac` binary where the criterion is about the tool and through the
//! library where it needs phase internals.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use pac_core::circuit::{generate_rand3reg, parse_circuit, Circuit};
use pac_core::division::{initial_partition, loss, refine_traced, swap_candidates, DivisionOptions, Partition};
use pac_core::hardware::ArraySpec;
use pac_core::metrics::{layer_reduction_ratio, speedup};
use pac_core::orchestrator::{pac_compile, PacOptions};
use pac_core::schedule::{QubitState, ScheduleFile};
use pac_core::verifier::{verify_pac, Rule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn pac(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pac")).args(args).current_dir(dir).output().expect("run pac")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// The ten end-to-end instances: sizes 8..14 on an 8x8 array.
const INSTANCES: [(usize, u64); 10] =
    [(8, 0), (8, 1), (10, 0), (10, 1), (10, 2), (12, 0), (12, 1), (12, 2), (14, 0), (14, 1)];

struct Compiled {
    circuit: Circuit,
    file: ScheduleFile,
    verify_code: Option<i32>,
}

fn compile_instances(dir: &Path) -> Vec<Compiled> {
    let mut out = Vec::new();
    for &(n, seed) in &INSTANCES {
        let gen_dir = format!("gen_{n}_{seed}");
        let gen = pac(&["gen", "--qubits", &n.to_string(), "--seed", &seed.to_string(), "--out-dir", &gen_dir], dir);
        assert!(gen.status.success());
        let edges = format!("{gen_dir}/rand3reg_{n}_0.edges");
        let sched = format!("{gen_dir}/pac.json");
        let c = pac(&["compile", &edges, "--array", "8", "--mode", "pac", "--seed", &seed.to_string(), "-o", &sched], dir);
        assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
        let v = pac(&["verify", &sched, &edges, "--array", "8"], dir);
        let circuit = parse_circuit(&fs::read_to_string(dir.join(&edges)).unwrap()).unwrap();
        let file = ScheduleFile::from_json(&fs::read_to_string(dir.join(&sched)).unwrap()).unwrap();
        out.push(Compiled { circuit, file, verify_code: v.status.code() });
    }
    out
}

fn criterion_2(runs: &[Compiled], secs: f64) -> Outcome {
    let clean = runs.iter().filter(|r| r.verify_code == Some(0)).count();
    outcome(clean == runs.len() && secs < 600.0, format!("{clean}/{} verify clean, {secs:.1} s", runs.len()))
}

fn criterion_3(runs: &[Compiled], a: &ArraySpec) -> Outcome {
    let mut bad = Vec::new();
    for (r, &(n, seed)) in runs.iter().zip(&INSTANCES) {
        let c = &r.circuit;
        let out = pac_compile(c, a, &PacOptions::for_circuit(c, seed)).unwrap();
        let ph = &out.phases;
        let (d1, d2, d3) = (ph.r1.schedule.depth(), ph.r2.schedule.depth(), ph.r3.schedule.depth());
        if out.schedule.depth() != d1.max(d2) + d3 {
            bad.push(format!("n={n} seed={seed}: {} != max({d1},{d2})+{d3}", out.schedule.depth()));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "depth = max(d1,d2)+d3 on all 10".to_string() } else { bad.join("; ") })
}

fn criterion_4(runs: &[Compiled]) -> Outcome {
    let exact = runs
        .iter()
        .filter(|r| {
            let mut count: BTreeMap<usize, usize> = BTreeMap::new();
            for g in r.file.schedule().fired_gates() {
                *count.entry(g).or_default() += 1;
            }
            count.len() == r.circuit.num_gates() && count.iter().all(|(&g, &k)| g < r.circuit.num_gates() && k == 1)
        })
        .count();
    outcome(exact == runs.len(), format!("{exact}/{} fire every gate exactly once", runs.len()))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut steps = 0;
    let mut failures = 0;
    for g in 0..100u64 {
        let n = rng.random_range(2..=10);
        let p = rng.random_range(0.2..0.8);
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|_| rng.random_bool(p)).collect();
        let c = Circuit::new(n, edges, "").unwrap();
        let opts = DivisionOptions { k: 0.5, max_iter: 10 * n, seed: g };
        let mut part = initial_partition(&c, g);
        let (_, trace) = refine_traced(&c, &part, &opts);
        for step in trace {
            let (s1, s2) = swap_candidates(&c, &part);
            let swap = |p: &Partition, u: usize, v: usize| {
                Partition::from_q1(&c, p.q1.iter().copied().filter(|&q| q != u).chain([v]).collect::<BTreeSet<_>>())
            };
            let best = s1
                .iter()
                .flat_map(|&u| s2.iter().map(move |&v| (u, v)))
                .map(|(u, v)| loss(&swap(&part, u, v), 0.5))
                .fold(f64::INFINITY, f64::min);
            if step.loss_after != best || step.loss_after >= step.loss_before {
                failures += 1;
            }
            part = swap(&part, step.u, step.v);
            steps += 1;
        }
    }
    outcome(failures == 0 && steps > 0, format!("{steps} steps checked, {failures} mismatches"))
}

fn criterion_6() -> Outcome {
    let k4 = generate_rand3reg(4, 0).unwrap();
    let l = loss(&Partition::from_q1(&k4, [0, 1]), 0.5);
    let split = Circuit::new(4, [(0, 1), (2, 3)], "").unwrap();
    let p = Partition::from_q1(&split, [0, 1]);
    let zeros = [0.0, 0.5, 1.0].iter().all(|&k| loss(&p, k) == 0.0);
    outcome(l == 4.0 && zeros, format!("K4 loss {l}, empty cut zero for all k: {zeros}"))
}

fn criterion_7() -> Outcome {
    let r = layer_reduction_ratio(13, 12).unwrap();
    let s = speedup(1728.42, 30.40);
    outcome((r - 8.33).abs() <= 0.01 && (s - 56.86).abs() <= 0.01, format!("R_cl {r:.4}%, speedup {s:.4}"))
}

fn criterion_8(runs: &[Compiled], a: &ArraySpec) -> Outcome {
    let mut broken = 0;
    for r in runs {
        let info = r.file.phases.as_ref().expect("PAC file carries phases");
        let report = verify_pac(&r.file.schedule(), &r.circuit, a, info);
        broken += report.count(Rule::Position) + report.count(Rule::Ordering);
    }
    outcome(broken == 0, format!("{broken} position/ordering violations over {} instances", runs.len()))
}

fn criterion_9(runs: &[Compiled], a: &ArraySpec) -> Outcome {
    let mut tried = 0;
    let mut exact = 0;
    for r in runs {
        let info = r.file.phases.clone().unwrap();
        let p = Partition::from_q1(&r.circuit, info.q1.iter().copied());
        let mut s = r.file.schedule();
        let l = info.local_stages;
        let (Some(&parked), Some(&active)) = (p.resolved().iter().next(), p.active().iter().next()) else { continue };
        let site = s.stages[l - 1].state(parked).unwrap().site();
        let last = s.stages.len() - 1;
        *s.stages[last].state_mut(active).unwrap() = QubitState::slm(site.0, site.1);
        tried += 1;
        if verify_pac(&s, &r.circuit, a, &info).count(Rule::Parked) == 1 {
            exact += 1;
        }
    }
    outcome(tried > 0 && exact == tried, format!("{exact}/{tried} injections gave exactly one EQ3 violation"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn criterion_10(dir: &Path) -> Outcome {
    let out = pac(&["bench", "--qubits", "16,20", "--count", "3", "--array", "12", "--seed", "0", "--timeout", "300"], dir);
    if !out.status.success() {
        return outcome(false, String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let mut reader = csv::Reader::from_reader(&out.stdout[..]);
    let (mut base, mut pac_t) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.unwrap();
        let (Ok(b), Ok(p)) = (rec[2].parse::<f64>(), rec[3].parse::<f64>()) else { continue };
        base.push(b);
        pac_t.push(p);
    }
    if base.len() < 5 {
        return outcome(false, format!("only {} comparable instances", base.len()));
    }
    let ratio = median(pac_t.clone()) / median(base.clone());
    outcome(ratio < 1.0, format!("{} instances, median pac/base time ratio {ratio:.3}", base.len()))
}

fn criterion_11(dir: &Path) -> Outcome {
    let twice = |args: &[&str], file: Option<&str>| -> bool {
        let mut outs = Vec::new();
        for _ in 0..2 {
            let o = pac(args, dir);
            if !o.status.success() {
                return false;
            }
            outs.push(match file {
                Some(f) => fs::read(dir.join(f)).unwrap(),
                None => o.stdout,
            });
        }
        outs[0] == outs[1]
    };
    let gen = twice(&["gen", "--qubits", "12", "--count", "2", "--seed", "11", "--out-dir", "det"], Some("det/rand3reg_12_1.edges"));
    let pac_mode = twice(&["compile", "det/rand3reg_12_1.edges", "--array", "8", "--seed", "11", "-o", "det/p.json"], Some("det/p.json"));
    let base = twice(
        &["compile", "det/rand3reg_12_1.edges", "--array", "8", "--mode", "baseline", "--seed", "11", "-o", "det/b.json"],
        Some("det/b.json"),
    );
    let bench = twice(&["bench", "--qubits", "8,10", "--count", "2", "--array", "8", "--seed", "11", "--jobs", "3", "--no-wall-time"], None);
    let render = twice(&["render", "det/p.json", "--out-dir", "det/svg"], Some("det/svg/stage_0000.svg"));
    let all = gen && pac_mode && base && bench && render;
    outcome(all, format!("gen {gen}, compile pac {pac_mode}, compile baseline {base}, bench csv {bench}, render {render}"))
}

#[test]
fn acceptance() {
    let dir = TempDir::new().unwrap();
    let a = ArraySpec::new(8).unwrap();
    let start = Instant::now();
    let runs = compile_instances(dir.path());
    let secs = start.elapsed().as_secs_f64();

    let results = [
        (2, criterion_2(&runs, secs)),
        (3, criterion_3(&runs, &a)),
        (4, criterion_4(&runs)),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8(&runs, &a)),
        (9, criterion_9(&runs, &a)),
        (10, criterion_10(dir.path())),
        (11, criterion_11(dir.path())),
    ];
    for (n, r) in &results {
        println!("criterion {n:>2}: {} ({})", if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    let failed: Vec<usize> = results.iter().filter(|(_, r)| !r.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
