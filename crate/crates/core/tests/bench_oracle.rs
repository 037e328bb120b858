use std::collections::{BTreeSet, HashSet};

use depsim::bench::{
    build_benchmark, evaluate, grid_search, precision_at_k, rank_for_entry, recall_at_k, reciprocal_rank, synth_corpus,
    BenchmarkEntry, GridSpec, SynthConfig,
};
use depsim::corpus::{stats, IdfScope};
use depsim::embed::build_model;
use depsim::recommend::{recommend, ModelKind, Neighbors, QuerySource, ScoringParams};
use depsim::{Corpus, LibraryName, ProjectSnapshot, Scaling};
use depsim_oracles::{random_snapshots, recount_metrics};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_projects: 300,
        seed,
        ..SynthConfig::default()
    }
}

fn params(kind: ModelKind, alpha: f64, beta: f64, k: Neighbors) -> ScoringParams {
    ScoringParams {
        alpha,
        beta,
        k_neighbors: k,
        model_kind: kind,
        top_n: 10,
    }
}

#[test]
fn metrics_match_set_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let pool: Vec<String> = (0..30).map(|i| format!("l{i}")).collect();
        let mut ranked = pool.clone();
        ranked.shuffle(&mut rng);
        ranked.truncate(rng.random_range(0..30));
        let targets: BTreeSet<String> = (0..rng.random_range(1..6)).map(|_| pool[rng.random_range(0..30)].clone()).collect();
        let as_hash: HashSet<String> = targets.iter().cloned().collect();
        for k in [1, 3, 5, 10] {
            let (p, r, rr) = recount_metrics(&ranked, &as_hash, k);
            assert_eq!(precision_at_k(&ranked, &targets, k).unwrap(), p);
            assert_eq!(recall_at_k(&ranked, &targets, k).unwrap(), r);
            assert_eq!(reciprocal_rank(&ranked, &targets).unwrap(), rr);
        }
    }
}

#[test]
fn rare_tail_in_every_year() {
    for seed in 0..3 {
        let s = synth_corpus(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
        for y in s.corpus.years() {
            let r = stats(&s.corpus, IdfScope::Year(y)).unwrap();
            let share = r.libraries.iter().filter(|l| l.df <= 2).count() as f64 / r.libraries.len() as f64;
            assert!(share > 0.5, "seed {seed} year {y}: {share}");
        }
    }
}

#[test]
fn zero_exponent_gives_flat_popularity() {
    let cfg = SynthConfig {
        zipf_s: 0.0,
        n_domains: 1,
        tail_rate: 0.0,
        common_libs: 1,
        n_projects: 3000,
        years: 1,
        ..small(3)
    };
    let s = synth_corpus(&cfg).unwrap();
    let r = stats(&s.corpus, IdfScope::Corpus).unwrap();
    let dfs: Vec<f64> = r.libraries.iter().filter(|l| l.library.as_str().starts_with("dom")).map(|l| l.df as f64).collect();
    assert_eq!(dfs.len(), 60);
    let mean = dfs.iter().sum::<f64>() / 60.0;
    let (lo, hi) = (dfs.iter().cloned().fold(f64::MAX, f64::min), dfs.iter().cloned().fold(0.0, f64::max));
    assert!(lo > 0.8 * mean && hi < 1.2 * mean, "{lo} {mean} {hi}");
}

#[test]
fn rle_suggestions_come_from_the_home_domain() {
    let s = synth_corpus(&SynthConfig { seed: 2, ..SynthConfig::default() }).unwrap();
    let model = build_model(&s.corpus, 32, Scaling::Sigma, 2).unwrap();
    let p = ScoringParams { top_n: 5, ..ScoringParams::relevant(ModelKind::Rle) };
    let (mut good, mut total) = (0, 0);
    for snap in s.corpus.slice(2016).iter().step_by(7) {
        let out = recommend(&QuerySource::Snapshot(snap.key()), Some(&model), &s.corpus, &p, None).unwrap();
        let home = s.repo_domains[&snap.repo];
        for r in &out.recommendations {
            total += 1;
            if s.library_domains[&r.library] == Some(home) {
                good += 1;
            }
        }
    }
    let share = good as f64 / total as f64;
    assert!(share >= 0.6, "{share}");
}

fn poisoned(seed: u64) -> (Corpus, LibraryName) {
    let s = synth_corpus(&small(seed)).unwrap();
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
    (Corpus::new(snaps).unwrap(), sentinel)
}

#[test]
fn future_libraries_never_leak() {
    let (c, sentinel) = poisoned(1);
    let model = build_model(&c, 16, Scaling::Sigma, 0).unwrap();
    let bench: Vec<BenchmarkEntry> = build_benchmark(&c).unwrap().into_iter().filter(|e| e.year == 2016).collect();
    assert!(!bench.is_empty());
    for kind in ModelKind::ALL {
        for p in [ScoringParams::relevant(kind), ScoringParams::explore(kind), params(kind, 0.0, 0.0, Neighbors::All)] {
            for e in &bench {
                let ranked = rank_for_entry(e, &p, &c, Some(&model)).unwrap();
                assert!(!ranked.contains(&sentinel), "{kind} {e:?}");
            }
        }
    }
}

#[test]
fn evaluate_ignores_entry_order() {
    let s = synth_corpus(&small(4)).unwrap();
    let model = build_model(&s.corpus, 16, Scaling::Sigma, 0).unwrap();
    let mut bench = build_benchmark(&s.corpus).unwrap();
    let p = ScoringParams::relevant(ModelKind::Dre);
    let a = evaluate(&p, &bench, &s.corpus, Some(&model)).unwrap();
    bench.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let b = evaluate(&p, &bench, &s.corpus, Some(&model)).unwrap();
    assert_eq!(a, b);
    for x in [a.prec1, a.prec3, a.prec5, a.prec10, a.rec5, a.rec10, a.mrr] {
        assert!((0.0..=1.0).contains(&x));
    }
    assert!(a.rec10 >= a.rec5);
}

#[test]
fn zero_powers_over_all_neighbors_equal_the_baseline() {
    let s = synth_corpus(&small(6)).unwrap();
    let model = build_model(&s.corpus, 16, Scaling::Sigma, 0).unwrap();
    let bench = build_benchmark(&s.corpus).unwrap();
    let base = evaluate(&ScoringParams::relevant(ModelKind::Baseline), &bench, &s.corpus, None).unwrap();
    for kind in [ModelKind::Rle, ModelKind::Dre, ModelKind::Jaccard] {
        let m = evaluate(&params(kind, 0.0, 0.0, Neighbors::All), &bench, &s.corpus, Some(&model)).unwrap();
        assert_eq!(m, base, "{kind}");
    }
}

#[test]
fn grid_rows_equal_single_evaluations() {
    let s = synth_corpus(&small(8)).unwrap();
    let model = build_model(&s.corpus, 16, Scaling::Sigma, 0).unwrap();
    let bench = build_benchmark(&s.corpus).unwrap();
    let spec = GridSpec {
        kinds: vec![ModelKind::Rle, ModelKind::Baseline, ModelKind::Jaccard],
        alphas: vec![-1.0, 0.0, 2.0],
        betas: vec![0.0, 2.0],
        neighbors: vec![Neighbors::Top(5), Neighbors::Top(40), Neighbors::All],
    };
    let rows = grid_search(&spec, &bench, &s.corpus, Some(&model)).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 2 * 3 + 1);
    for r in &rows {
        let p = match r.kind {
            ModelKind::Baseline => ScoringParams::relevant(ModelKind::Baseline),
            k => params(k, r.alpha.unwrap(), r.beta.unwrap(), r.k_neighbors.unwrap()),
        };
        assert_eq!(evaluate(&p, &bench, &s.corpus, Some(&model)).unwrap(), r.metrics, "{r:?}");
    }
}

#[test]
fn random_corpora_benchmarks_respect_the_rules() {
    for seed in 0..10 {
        let snaps: Vec<ProjectSnapshot> = random_snapshots(seed, 40, 25, &[2015, 2016, 2017], 12)
            .into_iter()
            .map(|(r, y, d)| ProjectSnapshot::new(r, y, d.iter().map(|x| x.parse::<LibraryName>().unwrap())).unwrap())
            .collect();
        let c = Corpus::new(snaps).unwrap();
        for e in build_benchmark(&c).unwrap() {
            let next = c.get(&e.repo, e.year + 1).unwrap();
            assert!(!e.targets.is_empty());
            assert!(e.targets.is_disjoint(&e.given));
            let removed = e.given.difference(&next.deps).count();
            assert!(e.targets.len() + removed <= 10);
            assert_eq!(e.targets, next.deps.difference(&e.given).cloned().collect());
        }
    }
}
