//! Acceptance checks, one line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exits nonzero if any gating
//! criterion fails. The live-endpoint check runs only when
//! `FABLE_LIVE_CHAT_URL`, `FABLE_LIVE_EMBED_URL` and `FABLE_API_KEY` are set,
//! and never affects the exit status.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use fable::engine::{read_pool_file, write_pool_file, Limits};
use fable::eval::{centroid, cosine_similarity, homogeneity_score, EmbedderConfig, EmbedderKind, EmbeddingVector};
use fable::experiment::{run_experiment, ExperimentConfig};
use fable::writer::{render_first_prompt, render_next_prompt, ProviderConfig, ProviderKind};
use fable::{check_outline, default_spec, Condition, InstructionMap, Premise, SceneAssignment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    gating: bool,
    run: fn() -> Option<Outcome>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs, || {
        format!("{what} took {:.2} s, limit {limit_secs} s", elapsed.as_secs_f64())
    })
}

fn ac1() -> Option<Outcome> {
    Some((|| {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xAC1);
        let mut models = 0usize;
        let specs = 200;
        for i in 0..specs {
            let spec = common::random_spec(&mut rng);
            let want = common::brute_force(&spec);
            let got = common::engine_models(&spec);
            ensure(got == want, || {
                format!("spec #{i}: engine {} models, brute force {}\n{spec}", got.len(), want.len())
            })?;
            models += want.len();
        }
        let t = start.elapsed();
        within(t, 10.0, "oracle comparison")?;
        Ok(format!("{specs} specs, {models} models, exact set equality ({:.2} s)", t.as_secs_f64()))
    })())
}

const DEFAULT_SPEC_COUNT: u64 = 480_680;

fn ac2() -> Option<Outcome> {
    Some((|| {
        let spec = default_spec();
        ensure(spec.num_scenes == 7 && spec.functions.len() == 9, || "default spec shape changed".into())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (a, b) = (dir.path().join("a.pool"), dir.path().join("b.pool"));
        let start = Instant::now();
        let sa = write_pool_file(&spec, &a, Limits::default()).map_err(|e| e.to_string())?;
        let sb = write_pool_file(&spec, &b, Limits::default()).map_err(|e| e.to_string())?;
        let t = start.elapsed();
        within(t, 60.0, "two enumerations")?;
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        ensure(ba == bb, || "pool files differ between runs".into())?;
        ensure(sa.count == DEFAULT_SPEC_COUNT && sb.count == DEFAULT_SPEC_COUNT, || {
            format!("count {} differs from snapshot {DEFAULT_SPEC_COUNT}", sa.count)
        })?;
        let pool = read_pool_file(&a).map_err(|e| e.to_string())?;
        let mut checked = 0;
        for seed in 0..1000u64 {
            let (_, o) = pool.sample(seed).map_err(|e| e.to_string())?;
            let v = check_outline(&spec, &o).map_err(|e| e.to_string())?;
            ensure(v.is_empty(), || format!("sampled outline {o} violates: {}", v[0]))?;
            checked += 1;
        }
        Ok(format!(
            "{} outlines, byte-identical pools ({} bytes), {checked} samples valid ({:.2} s for 2 runs)",
            sa.count,
            ba.len(),
            t.as_secs_f64()
        ))
    })())
}

fn ac3() -> Option<Outcome> {
    Some((|| {
        let map = InstructionMap::builtin();
        let sunny = map
            .resolve(&SceneAssignment::with_param("introduce_character", "sunny"))
            .ok_or("no sunny entry")?;
        let cat = Premise::new("cat pirate").unwrap();
        let dwarf = Premise::new("dwarven courtroom drama").unwrap();
        let p = Premise::new("p").unwrap();
        let cases: Vec<(String, String)> = vec![
            (
                render_first_prompt(&cat, Some("X")),
                "You're writing a story about: cat pirate. Write the first paragraph of the story. In this paragraph, X.".into(),
            ),
            (
                render_first_prompt(&p, None),
                "You're writing a story about: p. Write the first paragraph of the story.".into(),
            ),
            (
                render_next_prompt(&dwarf, Some("Y")),
                "Write the next paragraph of the story. Remember the story is about: dwarven courtroom drama. In this paragraph, Y.".into(),
            ),
            (
                render_next_prompt(&p, None),
                "Write the next paragraph of the story. Remember the story is about: p.".into(),
            ),
            (
                render_next_prompt(&p, Some("Z.")),
                "Write the next paragraph of the story. Remember the story is about: p. In this paragraph, Z.".into(),
            ),
            (
                render_first_prompt(&cat, Some(&sunny)),
                format!("You're writing a story about: cat pirate. Write the first paragraph of the story. In this paragraph, {sunny}."),
            ),
        ];
        for (got, want) in &cases {
            ensure(got == want, || format!("got  {got:?}\nwant {want:?}"))?;
        }
        ensure(Premise::new("  ").is_err(), || "empty premise accepted".into())?;
        Ok(format!("{} golden strings match byte for byte", cases.len()))
    })())
}

fn vecs(rows: &[Vec<f64>]) -> Vec<EmbeddingVector> {
    rows.iter().map(|r| EmbeddingVector::new(r.clone()).unwrap()).collect()
}

/// Independent recomputation straight from the definition.
fn reference_score(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let c: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    rows.iter()
        .map(|r| {
            let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / (rn * cn)
        })
        .sum::<f64>()
        / n
}

fn ac4() -> Option<Outcome> {
    Some((|| {
        let start = Instant::now();
        let s = homogeneity_score(&vecs(&vec![vec![0.2, -0.7, 1.5]; 10])).map_err(|e| e.to_string())?;
        ensure((s - 1.0).abs() <= 1e-9, || format!("identical set scored {s}"))?;
        let s = homogeneity_score(&vecs(&[vec![1.0, 0.0], vec![0.0, 1.0]])).map_err(|e| e.to_string())?;
        ensure((s - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-5, || format!("orthogonal pair scored {s}"))?;

        let mut rng = ChaCha8Rng::seed_from_u64(0xAC4);
        let mut sets = 0;
        for _ in 0..5000 {
            let n = rng.gen_range(2..=5);
            let d = rng.gen_range(1..=4);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let vs = vecs(&rows);
            let Ok(c) = centroid(&vs) else { continue };
            if c.norm() < 1e-3 || vs.iter().any(|v| v.norm() < 1e-3) {
                continue;
            }
            sets += 1;
            let s = homogeneity_score(&vs).map_err(|e| e.to_string())?;
            let r = reference_score(&rows);
            ensure((s - r).abs() <= 1e-12, || format!("score {s} vs reference {r}"))?;

            let mut perm = rows.clone();
            perm.reverse();
            perm.rotate_left(rng.gen_range(0..n));
            let sp = homogeneity_score(&vecs(&perm)).unwrap();
            ensure((s - sp).abs() <= 1e-12, || format!("permutation changed {s} to {sp}"))?;

            let k = rng.gen_range(0.01..100.0);
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * k).collect()).collect();
            let ss = homogeneity_score(&vecs(&scaled)).unwrap();
            ensure((s - ss).abs() <= 1e-12, || format!("scaling by {k} changed {s} to {ss}"))?;

            let units: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let m = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                    r.iter().map(|x| x / m).collect()
                })
                .collect();
            let uv = vecs(&units);
            let uc = centroid(&uv).unwrap();
            if uc.norm() > 1e-3 {
                let su = homogeneity_score(&uv).unwrap();
                ensure((su - uc.norm()).abs() <= 1e-9, || format!("unit score {su} vs centroid norm {}", uc.norm()))?;
            }
        }
        let c = cosine_similarity(&vecs(&[vec![1.0, 0.0]])[0], &vecs(&[vec![1.0, 1.0]])[0]).unwrap();
        ensure((c - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-5, || format!("cos 45 degrees = {c}"))?;
        let degenerate = homogeneity_score(&vecs(&[vec![1.0, 0.0], vec![-1.0, 0.0]]));
        ensure(degenerate.is_err(), || "antipodal pair did not error".into())?;
        let t = start.elapsed();
        within(t, 1.0, "metric checks")?;
        Ok(format!("{sets} random sets within tolerance ({:.3} s)", t.as_secs_f64()))
    })())
}

fn files_under(dir: &Path) -> BTreeSet<String> {
    fn walk(base: &Path, d: &Path, out: &mut BTreeSet<String>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(dir, dir, &mut out);
    out
}

fn ac5() -> Option<Outcome> {
    Some((|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = |name: &str| ExperimentConfig {
            premises: vec!["cat pirate".into(), "dwarven courtroom drama".into()],
            stories_per_condition: 4,
            output_dir: dir.path().join(name),
            master_seed: 2024,
            ..Default::default()
        };
        let start = Instant::now();
        let first = run_experiment(config("run1")).map_err(|e| e.to_string())?;
        let t = start.elapsed();
        within(t, 5.0, "experiment")?;
        run_experiment(config("run2")).map_err(|e| e.to_string())?;

        let (d1, d2) = (dir.path().join("run1"), dir.path().join("run2"));
        let files = files_under(&d1);
        ensure(files == files_under(&d2), || "reruns produced different file sets".into())?;
        for f in &files {
            ensure(std::fs::read(d1.join(f)).unwrap() == std::fs::read(d2.join(f)).unwrap(), || {
                format!("{f} differs between reruns")
            })?;
        }
        let archives = files.iter().filter(|f| f.ends_with(".json") && f.contains("story_")).count();
        ensure(archives == 16, || format!("{archives} archives, expected 16"))?;
        let csv = std::fs::read_to_string(d1.join("report.csv")).unwrap();
        let rows = csv.lines().count() - 1;
        ensure(rows == 28, || format!("{rows} CSV rows, expected 28"))?;
        ensure(files.contains("homogeneity.svg") && files.contains("manifest.json"), || "missing chart or manifest".into())?;

        let report = &first.report;
        let mut worst_gap = f64::INFINITY;
        for premise in report.premises() {
            let g = report.series(premise, Condition::Guided);
            let u = report.series(premise, Condition::Unguided);
            ensure(g.len() == 7 && u.len() == 7, || format!("{premise}: series lengths {} / {}", g.len(), u.len()))?;
            for ((i, gs), (_, us)) in g.iter().zip(&u) {
                ensure(gs < us, || format!("{premise} paragraph {i}: guided {gs} not below unguided {us}"))?;
                worst_gap = worst_gap.min(us - gs);
            }
        }
        Ok(format!(
            "16 archives, 28 rows, byte-identical rerun, guided < unguided at all 14 indices (min gap {worst_gap:.3}; {:.2} s)",
            t.as_secs_f64()
        ))
    })())
}

fn ac6() -> Option<Outcome> {
    let chat = std::env::var("FABLE_LIVE_CHAT_URL").ok()?;
    let embed = std::env::var("FABLE_LIVE_EMBED_URL").ok()?;
    std::env::var("FABLE_API_KEY").ok()?;
    Some((|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut provider = ProviderConfig {
            kind: ProviderKind::Http,
            endpoint: Some(chat),
            ..Default::default()
        };
        if let Ok(m) = std::env::var("FABLE_LIVE_CHAT_MODEL") {
            provider.params.model_id = m;
        }
        let mut embedder = EmbedderConfig {
            kind: EmbedderKind::Http,
            endpoint: Some(embed),
            ..Default::default()
        };
        if let Ok(m) = std::env::var("FABLE_LIVE_EMBED_MODEL") {
            embedder.model = m;
        }
        let config = ExperimentConfig {
            premises: vec!["cat pirate".into(), "dwarven courtroom drama".into(), "Cold Emu War".into()],
            stories_per_condition: 10,
            provider,
            embedder,
            output_dir: dir.path().join("live"),
            ..Default::default()
        };
        let outcome = run_experiment(config).map_err(|e| e.to_string())?;
        let mut lines = Vec::new();
        for premise in outcome.report.premises() {
            let g = outcome.report.mean(premise, Condition::Guided).ok_or("no guided scores")?;
            let u = outcome.report.mean(premise, Condition::Unguided).ok_or("no unguided scores")?;
            ensure(g <= u, || format!("{premise}: guided mean {g:.4} above unguided {u:.4}"))?;
            lines.push(format!("{premise} {g:.3}/{u:.3}"));
        }
        Ok(lines.join(", "))
    })())
}

fn main() {
    let criteria = [
        Criterion { id: "AC1", name: "solver oracle equivalence", gating: true, run: ac1 },
        Criterion { id: "AC2", name: "default spec enumeration", gating: true, run: ac2 },
        Criterion { id: "AC3", name: "prompt fidelity", gating: true, run: ac3 },
        Criterion { id: "AC4", name: "metric correctness", gating: true, run: ac4 },
        Criterion { id: "AC5", name: "deterministic mock replication", gating: true, run: ac5 },
        Criterion { id: "AC6", name: "live ordering (optional)", gating: false, run: ac6 },
    ];
    // `cargo test -- --list` and similar harness flags: nothing to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = 0;
    for c in &criteria {
        match (c.run)() {
            Some(Ok(detail)) => println!("[PASS] {} {}: {detail}", c.id, c.name),
            Some(Err(why)) => {
                println!("[FAIL] {} {}: {why}", c.id, c.name);
                if c.gating {
                    failed += 1;
                }
            }
            None => println!("[SKIP] {} {}: live endpoints not configured", c.id, c.name),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criterion(s) failed");
        std::process::exit(1);
    }
}
