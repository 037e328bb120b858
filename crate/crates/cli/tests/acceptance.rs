//! Acceptance checks for the whole toolkit. Prints one PASS or FAIL line per
//! criterion and exits nonzero if any fails.
//!
//! Set `DEPSIM_RELEASED_CORPUS` to a corpus JSONL file to also check the
//! reference benchmark numbers on a full real-world corpus.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use depsim::bench::{
    build_benchmark, evaluate, precision_at_k, rank_for_entry, recall_at_k, reciprocal_rank, synth_corpus,
    SynthConfig,
};
use depsim::cluster::{agglomerate, gap_curve, kmeans, select_k, KMeansConfig};
use depsim::corpus::{idf_table, load_corpus, IdfScope};
use depsim::embed::{build_model, truncated_svd, DEFAULT_DIM};
use depsim::linalg::BinaryCsr;
use depsim::recommend::{
    recommend, score_candidates, ModelKind, Neighbors, Query, QuerySource, ScoringParams, SliceIndex,
};
use depsim::{parse_requirements, Corpus, LibraryName, ProjectSnapshot, Scaling};
use depsim_oracles::{
    adjusted_rand_index, brute_force_jaccard_ranking, jacobi_svd, naive_average_linkage, planted_blobs,
    random_binary, random_snapshots, recount_metrics, PlainSnapshot,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn params(kind: ModelKind, alpha: f64, beta: f64, k: Neighbors) -> ScoringParams {
    ScoringParams {
        alpha,
        beta,
        k_neighbors: k,
        model_kind: kind,
        top_n: usize::MAX,
    }
}

fn random_corpus(seed: u64, repos: usize, libs: usize, years: &[i32], max_deps: usize) -> Corpus {
    let snaps = random_snapshots(seed, repos, libs, years, max_deps)
        .into_iter()
        .map(|(r, y, d)| ProjectSnapshot::new(r, y, d.iter().map(|x| x.parse::<LibraryName>().unwrap())).unwrap())
        .collect();
    Corpus::new(snaps).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn svd_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let (mut worst_sigma, mut worst_err) = (0.0f64, 0.0f64);
    for case in 0..20u64 {
        let rows = rng.random_range(20..=80);
        let cols = rng.random_range(15..=60);
        let density = rng.random_range(0.05..=0.3);
        let dense = random_binary(rows, cols, density, 500 + case);
        let a = BinaryCsr::from_dense(&dense);
        let oracle = jacobi_svd(&dense);
        let f = truncated_svd(&a, 8, case).map_err(|e| format!("case {case}: {e}"))?;
        for k in 0..8 {
            let r = rel(f.sigma[k], oracle.sigma[k]);
            worst_sigma = worst_sigma.max(r);
            ensure(r < 1e-6, || format!("case {case} ({rows}x{cols}): sigma{k} off by {r:e}"))?;
        }
        let (got, want) = (f.reconstruction_error(&a), oracle.truncation_error(8));
        let r = if want > 1e-9 * a.frobenius_sq().sqrt() { rel(got, want) } else { got / a.frobenius_sq().sqrt() };
        worst_err = worst_err.max(r);
        ensure(r < 1e-6, || format!("case {case} ({rows}x{cols}): reconstruction error off by {r:e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 2.0, || format!("took {secs:.2}s"))?;
    Ok(format!("20 matrices, worst sigma rel {worst_sigma:.1e}, worst error rel {worst_err:.1e}, {secs:.2}s"))
}

fn baseline_equivalence() -> Check {
    let mut queries = 0;
    for seed in 0..100u64 {
        let c = random_corpus(seed, 30, 25, &[2020], 6);
        let model = build_model(&c, 6, Scaling::Sigma, seed).map_err(|e| e.to_string())?;
        let idf = idf_table(&c, IdfScope::Year(2020)).map_err(|e| e.to_string())?;
        let zero = |kind| params(kind, 0.0, 0.0, Neighbors::All);
        for kind in [ModelKind::Rle, ModelKind::Dre, ModelKind::Jaccard] {
            let index = SliceIndex::for_slice(&c, Some(2020), kind, Some(&model)).map_err(|e| e.to_string())?;
            for q in c.slice(2020).iter().step_by(3) {
                let query = Query::new(q.deps.clone(), kind, Some(&model), Some(q.key())).map_err(|e| e.to_string())?;
                let neighbors = index.nearest(&query, Neighbors::All).map_err(|e| e.to_string())?;
                let scored = score_candidates(&query.deps, &neighbors, &zero(kind), &idf, &index);
                let base = index.popularity(&query.deps, usize::MAX);
                match (scored, base) {
                    (Ok(a), Ok(b)) => {
                        let a: Vec<&str> = a.iter().map(|r| r.library.as_str()).collect();
                        let b: Vec<&str> = b.iter().map(|r| r.library.as_str()).collect();
                        ensure(a == b, || format!("corpus {seed}, {kind}, {}: {a:?} vs {b:?}", q.key()))?;
                    }
                    (Err(_), Err(_)) => {}
                    (a, b) => return Err(format!("corpus {seed}, {kind}: {:?} vs {:?}", a.is_ok(), b.is_ok())),
                }
                queries += 1;
            }
        }
    }
    Ok(format!("100 corpora, {queries} queries over rle, dre and jaccard"))
}

fn jaccard_oracle() -> Check {
    let mut rankings = 0;
    for seed in 0..30u64 {
        let c = random_corpus(1000 + seed, 28, 30, &[2019, 2020], 7);
        for year in [2019, 2020] {
            let slice = c.slice(year);
            ensure(slice.len() <= 50, || format!("slice of {}", slice.len()))?;
            let plain: Vec<PlainSnapshot> = slice
                .iter()
                .map(|s| PlainSnapshot {
                    repo: s.repo.clone(),
                    deps: s.deps.iter().map(|d| d.to_string()).collect(),
                })
                .collect();
            for q in &slice {
                let qdeps: BTreeSet<String> = q.deps.iter().map(|d| d.to_string()).collect();
                for (alpha, beta) in [(-1.0, 2.0), (3.0, 2.0), (0.0, 0.0), (1.0, 0.5)] {
                    for k in [Some(1), Some(5), Some(20), None] {
                        let nk = k.map_or(Neighbors::All, Neighbors::Top);
                        let p = params(ModelKind::Jaccard, alpha, beta, nk);
                        let want = brute_force_jaccard_ranking(&qdeps, Some(&q.repo), &plain, k, alpha, beta);
                        let got = match recommend(&QuerySource::Snapshot(q.key()), None, &c, &p, None) {
                            Ok(out) => out.recommendations,
                            Err(_) => Vec::new(),
                        };
                        let same = got.len() == want.len()
                            && got.iter().zip(&want).all(|(g, (l, s))| g.library.as_str() == l && g.score == *s);
                        ensure(same, || format!("{} alpha {alpha} beta {beta} k {nk}", q.key()))?;
                        rankings += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{rankings} full rankings identical in order and score"))
}

fn metric_suite() -> Check {
    let set = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<BTreeSet<String>>();
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<String>>();
    let run = |r: &[String], t: &BTreeSet<String>, k| precision_at_k(r, t, k).unwrap();
    let d = set(&["D"]);
    ensure(reciprocal_rank(&s(&["D", "x", "y"]), &d).unwrap() == 1.0, || "first: RR".into())?;
    ensure(run(&s(&["D", "x", "y"]), &d, 1) == 1.0, || "first: P@1".into())?;
    ensure(recall_at_k(&s(&["D", "x", "y"]), &d, 5).unwrap() == 1.0, || "first: R@5".into())?;
    ensure(reciprocal_rank(&s(&["x", "D", "y"]), &d).unwrap() == 0.5, || "second: RR".into())?;
    ensure(run(&s(&["x", "D", "y"]), &d, 1) == 0.0, || "second: P@1".into())?;
    ensure(reciprocal_rank(&s(&["x", "y"]), &d).unwrap() == 0.0, || "absent: RR".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let vocab: Vec<String> = (0..30).map(|i| format!("lib{i}")).collect();
    for case in 0..20 {
        let mut ranked = vocab.clone();
        for i in (1..ranked.len()).rev() {
            ranked.swap(i, rng.random_range(0..=i));
        }
        ranked.truncate(rng.random_range(0..=25));
        let n_targets = rng.random_range(1..=6);
        let targets: BTreeSet<String> = (0..n_targets).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect();
        let hashed: HashSet<String> = targets.iter().cloned().collect();
        for k in [1, 3, 5, 10] {
            let (p, r, rr) = recount_metrics(&ranked, &hashed, k);
            let got = (
                precision_at_k(&ranked, &targets, k).unwrap(),
                recall_at_k(&ranked, &targets, k).unwrap(),
                reciprocal_rank(&ranked, &targets).unwrap(),
            );
            ensure(got == (p, r, rr), || format!("case {case}, k {k}: {got:?} vs {:?}", (p, r, rr)))?;
        }
    }
    Ok("3 worked examples and 20 randomized cases".into())
}

fn mrr_pair(c: &Corpus, model_dim: usize, kind: ModelKind, k: usize) -> Result<(f64, f64), String> {
    let model = build_model(c, model_dim, Scaling::Sigma, 0).map_err(|e| e.to_string())?;
    let bench = build_benchmark(c).map_err(|e| e.to_string())?;
    let base = evaluate(&ScoringParams::relevant(ModelKind::Baseline), &bench, c, None).map_err(|e| e.to_string())?;
    let p = ScoringParams {
        top_n: 10,
        ..params(kind, -1.0, 2.0, Neighbors::Top(k))
    };
    let m = evaluate(&p, &bench, c, Some(&model)).map_err(|e| e.to_string())?;
    Ok((m.mrr, base.mrr))
}

fn released_corpus() -> Option<Check> {
    let path = std::env::var_os("DEPSIM_RELEASED_CORPUS")?;
    Some((|| {
        let c = load_corpus(Path::new(&path)).map_err(|e| e.to_string())?;
        let (dre, base) = mrr_pair(&c, DEFAULT_DIM, ModelKind::Dre, 500)?;
        ensure((base - 0.144).abs() <= 0.005, || format!("baseline MRR {base:.4}, want 0.144 +/- 0.005"))?;
        ensure((dre - 0.189).abs() <= 0.010, || format!("dre MRR {dre:.4}, want 0.189 +/- 0.010"))?;
        Ok(format!("released corpus: baseline MRR {base:.4}, dre MRR {dre:.4}"))
    })())
}

fn synthetic_lift() -> Check {
    let released = match released_corpus() {
        Some(r) => format!("; {}", r?),
        None => "; released corpus not supplied, checked the synthetic substitute only".into(),
    };
    let start = Instant::now();
    let (mut rle, mut base) = (0.0, 0.0);
    for seed in 0..5 {
        let s = synth_corpus(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let (r, b) = mrr_pair(&s.corpus, DEFAULT_DIM, ModelKind::Rle, 200)?;
        rle += r / 5.0;
        base += b / 5.0;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(rle >= 1.2 * base, || format!("rle MRR {rle:.4} vs baseline {base:.4}"))?;
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "synthetic corpora over 5 seeds: rle MRR {rle:.4}, baseline {base:.4} ({:.1}x), {secs:.1}s{released}",
        rle / base
    ))
}

fn gap_selection() -> Check {
    let config = KMeansConfig::default();
    let (mut hits, mut picks, mut worst_ari) = (0, Vec::new(), 1.0f64);
    for seed in 0..5u64 {
        let (points, labels) = planted_blobs(6, 30, 32, 0.1, 600 + seed);
        let curve = gap_curve(&points, 2..=12, 10, seed, &config).map_err(|e| e.to_string())?;
        let sel = select_k(&curve, 0.02, 3);
        picks.push(sel.k);
        if (5..=7).contains(&sel.k) {
            hits += 1;
        }
        let fit = kmeans(&points, 6, seed, &config).map_err(|e| e.to_string())?;
        worst_ari = worst_ari.min(adjusted_rand_index(&fit.assignments, &labels));
    }
    ensure(hits >= 4, || format!("selected {picks:?}"))?;
    ensure(worst_ari >= 0.95, || format!("worst adjusted agreement {worst_ari:.3}"))?;
    Ok(format!("selected {picks:?}, worst adjusted agreement {worst_ari:.3}"))
}

fn dendrogram_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut cases = 0;
    for n in (2..=64).step_by(3).chain([64]) {
        let dim = rng.random_range(2..=12);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let fast = agglomerate(&points).map_err(|e| e.to_string())?;
        let slow = naive_average_linkage(&points);
        ensure(fast.merges.len() == slow.len(), || format!("n {n}: merge count"))?;
        for (i, (m, &(a, b, h))) in fast.merges.iter().zip(&slow).enumerate() {
            ensure((m.a, m.b) == (a, b), || format!("n {n}, step {i}: ({}, {}) vs ({a}, {b})", m.a, m.b))?;
            ensure((m.height - h).abs() < 1e-9, || format!("n {n}, step {i}: height {} vs {h}", m.height))?;
        }
        cases += 1;
    }
    Ok(format!("{cases} point sets of 2 to 64 items"))
}

fn parser_fixtures() -> Check {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/requirements");
    let text = fs::read_to_string(dir.join("expected.json")).map_err(|e| e.to_string())?;
    let expected: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(expected.len() == 15, || format!("{} fixtures", expected.len()))?;
    let mut skippable = 0;
    for (file, want) in &expected {
        let body = fs::read_to_string(dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let report = parse_requirements(&body);
        let got: Vec<&str> = report.names.iter().map(|n| n.as_str()).collect();
        let names: Vec<&str> = want["names"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        ensure(got == names, || format!("{file}: {got:?} vs {names:?}"))?;
        let skip = want["skippable"].as_bool().unwrap();
        ensure(report.is_skippable() == skip, || format!("{file}: skippable {}", report.is_skippable()))?;
        skippable += usize::from(skip);
    }
    Ok(format!("15 files, {skippable} flagged skippable"))
}

fn depsim_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_depsim")).args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("depsim {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |tag: &str| -> Result<[Vec<u8>; 3], String> {
        let p = |name: &str| -> PathBuf { dir.path().join(format!("{tag}-{name}")) };
        let (corpus, model, part) = (p("corpus.jsonl"), p("model.json"), p("partition.csv"));
        let s = |x: &PathBuf| x.to_str().unwrap().to_string();
        depsim_cli(&["synth", "--projects", "600", "--seed", "11", "--out", &s(&corpus)])?;
        depsim_cli(&["embed", "--corpus", &s(&corpus), "--dim", "16", "--seed", "5", "--out", &s(&model)])?;
        depsim_cli(&["cluster", "--model", &s(&model), "--select-k", "2..16", "--seed", "5", "--out", &s(&part)])?;
        let read = |x: &PathBuf| fs::read(x).map_err(|e| e.to_string());
        Ok([read(&corpus)?, read(&model)?, read(&part)?])
    };
    let (a, b) = (run("first")?, run("second")?);
    for (name, (x, y)) in ["synth", "embed", "cluster"].iter().zip(a.iter().zip(&b)) {
        ensure(x == y, || format!("{name} output differs between runs"))?;
    }
    Ok(format!("synth, embed and cluster byte-identical ({}, {}, {} bytes)", a[0].len(), a[1].len(), a[2].len()))
}

fn poison() -> Check {
    let s = synth_corpus(&SynthConfig {
        n_projects: 400,
        seed: 8,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let sentinel: LibraryName = "sentinel-from-the-future".parse().unwrap();
    let snaps = s
        .corpus
        .snapshots()
        .iter()
        .map(|x| {
            let mut deps = x.deps.clone();
            if x.year == 2017 {
                deps.insert(sentinel.clone());
            }
            ProjectSnapshot::new(x.repo.clone(), x.year, deps).unwrap()
        })
        .collect();
    let c = Corpus::new(snaps).map_err(|e| e.to_string())?;
    let model = build_model(&c, 16, Scaling::Sigma, 0).map_err(|e| e.to_string())?;
    let entries: Vec<_> = build_benchmark(&c).map_err(|e| e.to_string())?.into_iter().filter(|e| e.year == 2016).collect();
    ensure(!entries.is_empty(), || "no year-2016 entries".into())?;
    let mut rankings = 0;
    for kind in ModelKind::ALL {
        for p in [
            ScoringParams::relevant(kind),
            ScoringParams::explore(kind),
            params(kind, 0.0, 0.0, Neighbors::All),
            params(kind, 3.0, 0.0, Neighbors::All),
        ] {
            for e in &entries {
                let ranked = rank_for_entry(e, &p, &c, Some(&model)).map_err(|e| e.to_string())?;
                ensure(!ranked.contains(&sentinel), || format!("{kind}: sentinel ranked for {}", e.key()))?;
                rankings += 1;
            }
        }
    }
    Ok(format!("{rankings} year-2016 rankings over all model types, sentinel never suggested"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("svd matches a dense oracle", svd_oracle),
        ("zero powers over all neighbors equal the baseline", baseline_equivalence),
        ("jaccard ranking matches brute force", jaccard_oracle),
        ("ranking metrics", metric_suite),
        ("embedding recommendations beat popularity", synthetic_lift),
        ("gap curve picks the planted cluster count", gap_selection),
        ("average linkage matches a naive oracle", dendrogram_oracle),
        ("requirement file fixtures", parser_fixtures),
        ("command outputs are deterministic", determinism),
        ("future libraries never leak into past rankings", poison),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
