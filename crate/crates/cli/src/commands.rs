use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use depsim::bench::{
    build_benchmark, evaluate, grid_search, load_benchmark, synth_corpus, write_benchmark, write_results, GridRow,
    GridSpec, SynthConfig,
};
use depsim::cluster::{
    agglomerate, gap_curve, kmeans, normalized_vectors, partition_centroids, read_partition, select_k, write_partition,
    KMeansConfig, DEFAULT_REFS,
};
use depsim::corpus::{ingest_tree, load_corpus, stats, write_corpus, IdfScope};
use depsim::embed::{build_model, load_model, write_model, EmbeddingModel};
use depsim::recommend::{recommend, ModelKind, Neighbors, QuerySource, Recommendation, ScoringParams};
use depsim::{parse_requirements, Corpus, SnapshotKey};

use crate::output::{emit, render};
use crate::{BenchCommand, Cli, ClusterArgs, CliError, Command, Format, Mode, RecommendArgs, ScoringArgs, SynthArgs};

type Result<T = ()> = std::result::Result<T, CliError>;

fn usage(errors: Vec<String>) -> Result {
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(errors))
    }
}

fn open_corpus(path: &Path) -> anyhow::Result<Corpus> {
    load_corpus(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn open_model(path: &Path) -> anyhow::Result<EmbeddingModel> {
    load_model(path).with_context(|| format!("reading model {}", path.display()))
}

pub fn run(cli: Cli) -> Result {
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage(vec!["--threads: must be at least 1".into()]);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("cannot start {n} threads: {e}"))?;
    }
    match cli.command {
        Command::Ingest { root, out } => ingest(&root, out.as_deref()),
        Command::Stats { corpus, year, out } => {
            let corpus = open_corpus(&corpus)?;
            let scope = year.map_or(IdfScope::Corpus, IdfScope::Year);
            let report = stats(&corpus, scope)?;
            let bytes = render(|buf| Ok(report.write_csv(buf)?))?;
            Ok(emit(out.as_deref(), &bytes)?)
        }
        Command::Embed {
            corpus,
            dim,
            scaling,
            seed,
            out,
        } => {
            usage(if dim == 0 { vec!["--dim: must be at least 1".into()] } else { vec![] })?;
            let corpus = open_corpus(&corpus)?;
            let model = build_model(&corpus, dim, scaling.into(), seed)?;
            eprintln!(
                "embedded {} libraries and {} snapshots in {} dimensions",
                model.vocab().len(),
                model.repo_vectors().len(),
                model.dim()
            );
            let bytes = render(|buf| Ok(write_model(&model, buf)?))?;
            Ok(emit(out.as_deref(), &bytes)?)
        }
        Command::Cluster(args) => cluster(args),
        Command::Dendrogram {
            model,
            partition,
            out,
            json,
        } => {
            let model = open_model(&model)?;
            let file = fs::File::open(&partition).with_context(|| format!("reading partition {}", partition.display()))?;
            let assignments = read_partition(file).with_context(|| format!("reading partition {}", partition.display()))?;
            let centroids = partition_centroids(&model, &assignments)?;
            let tree = agglomerate(&centroids)?;
            let newick = format!("{}\n", tree.to_newick());
            let merges = json.map(|p| (p, serde_json::to_string_pretty(&tree).map(|s| s + "\n")));
            if let Some((path, text)) = merges {
                emit(Some(&path), text.map_err(anyhow::Error::from)?.as_bytes())?;
            }
            Ok(emit(out.as_deref(), newick.as_bytes())?)
        }
        Command::Recommend(args) => recommend_cmd(args),
        Command::Bench(cmd) => bench(cmd),
        Command::Synth(args) => synth(args),
    }
}

fn ingest(root: &Path, out: Option<&Path>) -> Result {
    let ingested = ingest_tree(root)?;
    for issue in &ingested.malformed {
        eprintln!("skipped {}: {}", issue.path.display(), issue.reason);
    }
    for path in &ingested.empty {
        eprintln!("skipped {}: no dependencies", path.display());
    }
    for w in &ingested.warnings {
        eprintln!("warning: {}: {}", w.path.display(), w.reason);
    }
    let c = &ingested.corpus;
    eprintln!(
        "ingested {} snapshots over {} years ({} malformed paths, {} empty files)",
        c.len(),
        c.years().count(),
        ingested.malformed.len(),
        ingested.empty.len()
    );
    let bytes = render(|buf| Ok(write_corpus(c, buf)?))?;
    Ok(emit(out, &bytes)?)
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    let (lo, hi) = s.split_once("..")?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?))
}

fn cluster(args: ClusterArgs) -> Result {
    let mut errors = Vec::new();
    if args.k == Some(0) {
        errors.push("--k: must be at least 1".into());
    }
    let range = match args.select_k.as_deref() {
        None => (2, 64),
        Some(s) => match parse_range(s) {
            Some((lo, hi)) if lo >= 1 && lo <= hi => (lo, hi),
            _ => {
                errors.push(format!("--select-k: expected LO..HI with 1 <= LO <= HI, got {s:?}"));
                (0, 0)
            }
        },
    };
    let refs = args.refs.unwrap_or(DEFAULT_REFS);
    if refs == 0 {
        errors.push("--refs: must be at least 1".into());
    }
    if !(args.epsilon >= 0.0 && args.epsilon.is_finite()) {
        errors.push("--epsilon: must be a finite value >= 0".into());
    }
    if args.window == 0 {
        errors.push("--window: must be at least 1".into());
    }
    if args.k.is_some() && args.gap_out.is_some() {
        errors.push("--gap-out: only available with --select-k".into());
    }
    usage(errors)?;

    let model = open_model(&args.model)?;
    let points = normalized_vectors(&model);
    let config = KMeansConfig::default();
    let k = match args.k {
        Some(k) => k,
        None => {
            let curve = gap_curve(&points, range.0..=range.1, refs, args.seed, &config)?;
            let sel = select_k(&curve, args.epsilon, args.window);
            if sel.saturated {
                eprintln!("selected k = {}", sel.k);
            } else {
                eprintln!("gap curve did not flatten; using the largest k = {}", sel.k);
            }
            if let Some(path) = &args.gap_out {
                let bytes = render(|buf| Ok(curve.write_csv(buf)?))?;
                emit(Some(path), &bytes)?;
            }
            sel.k
        }
    };
    let partition = kmeans(&points, k, args.seed, &config)?;
    let bytes = render(|buf| {
        write_partition(model.vocab().iter().zip(partition.assignments.iter().copied()), buf)?;
        Ok(())
    })?;
    Ok(emit(args.out.as_deref(), &bytes)?)
}

fn scoring(args: &ScoringArgs, top: usize, errors: &mut Vec<String>) -> ScoringParams {
    let kind: ModelKind = args.model_type.into();
    let mut p = match args.mode {
        Mode::Relevant => ScoringParams::relevant(kind),
        Mode::Explore => ScoringParams::explore(kind),
    };
    if let Some(a) = args.alpha {
        if !a.is_finite() {
            errors.push("--alpha: must be finite".into());
        }
        p.alpha = a;
    }
    if let Some(b) = args.beta {
        if !(b >= 0.0 && b.is_finite()) {
            errors.push("--beta: must be a finite value >= 0".into());
        }
        p.beta = b;
    }
    if let Some(k) = args.neighbors {
        p.k_neighbors = k;
    }
    if top == 0 {
        errors.push("--top: must be at least 1".into());
    }
    p.top_n = top.max(1);
    p
}

fn require_model(path: Option<&Path>, kinds: &[ModelKind], errors: &mut Vec<String>) {
    if path.is_none() {
        if let Some(k) = kinds.iter().find(|k| k.needs_model()) {
            errors.push(format!("--model: required for model type {k}"));
        }
    }
}

fn maybe_model(path: Option<&Path>, kinds: &[ModelKind]) -> anyhow::Result<Option<EmbeddingModel>> {
    match path {
        Some(p) if kinds.iter().any(|k| k.needs_model()) => Ok(Some(open_model(p)?)),
        _ => Ok(None),
    }
}

fn recommend_cmd(args: RecommendArgs) -> Result {
    let mut errors = Vec::new();
    let params = scoring(&args.scoring, args.top, &mut errors);
    require_model(args.model.as_deref(), &[params.model_kind], &mut errors);
    usage(errors)?;

    let source = match (&args.requirements, &args.repo, args.year) {
        (Some(path), _, _) => {
            let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let report = parse_requirements(&String::from_utf8_lossy(&text));
            for w in &report.warnings {
                eprintln!("warning: {}:{}: {}", path.display(), w.line, w.reason);
            }
            if report.is_skippable() {
                return Err(anyhow!("{}: no dependencies found", path.display()).into());
            }
            QuerySource::Deps(report.names)
        }
        (None, Some(repo), Some(year)) => QuerySource::Snapshot(SnapshotKey::new(repo.clone(), year)),
        _ => unreachable!("clap requires --requirements or --repo with --year"),
    };
    let corpus = open_corpus(&args.corpus)?;
    let model = maybe_model(args.model.as_deref(), &[params.model_kind])?;
    let out = recommend(&source, model.as_ref(), &corpus, &params, args.year)?;
    if !out.ignored.is_empty() {
        let names: Vec<&str> = out.ignored.iter().map(|l| l.as_str()).collect();
        eprintln!("ignored libraries unknown to the model: {}", names.join(", "));
    }
    if out.folded_in {
        eprintln!("query vector computed by fold-in (repository not in the model)");
    }
    let bytes = match args.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.recommendations).map_err(anyhow::Error::from)?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Text => text_table(&out.recommendations).into_bytes(),
    };
    Ok(emit(None, &bytes)?)
}

fn text_table(recs: &[Recommendation]) -> String {
    let width = recs.iter().map(|r| r.library.as_str().len()).max().unwrap_or(0).max("library".len());
    let mut s = format!("{:>4}  {:<width$}  {:>14}  {:>9}\n", "rank", "library", "score", "neighbors");
    for (i, r) in recs.iter().enumerate() {
        s += &format!(
            "{:>4}  {:<width$}  {:>14.6}  {:>9}\n",
            i + 1,
            r.library.as_str(),
            r.score,
            r.supporting_neighbors
        );
    }
    s
}

fn bench(cmd: BenchCommand) -> Result {
    match cmd {
        BenchCommand::Build { corpus, out } => {
            let corpus = open_corpus(&corpus)?;
            let entries = build_benchmark(&corpus)?;
            eprintln!("built {} benchmark entries", entries.len());
            let bytes = render(|buf| Ok(write_benchmark(&entries, buf)?))?;
            Ok(emit(out.as_deref(), &bytes)?)
        }
        BenchCommand::Run {
            bench,
            model,
            corpus,
            scoring: s,
            out,
        } => {
            let mut errors = Vec::new();
            let params = scoring(&s, 10, &mut errors);
            require_model(model.as_deref(), &[params.model_kind], &mut errors);
            usage(errors)?;
            let entries = load_benchmark(&bench).with_context(|| format!("reading benchmark {}", bench.display()))?;
            let corpus = open_corpus(&corpus)?;
            let model = maybe_model(model.as_deref(), &[params.model_kind])?;
            let metrics = evaluate(&params, &entries, &corpus, model.as_ref())?;
            let bytes = render(|buf| Ok(write_results(&[GridRow::single(&params, metrics)], buf)?))?;
            Ok(emit(out.as_deref(), &bytes)?)
        }
        BenchCommand::Grid {
            bench,
            model,
            corpus,
            models,
            alphas,
            betas,
            neighbors,
            out,
        } => {
            let kinds: Vec<ModelKind> = models.into_iter().map(Into::into).collect();
            let mut errors = Vec::new();
            if kinds.is_empty() {
                errors.push("--models: needs at least one model type".into());
            }
            if alphas.is_empty() || alphas.iter().any(|a| !a.is_finite()) {
                errors.push("--alphas: needs finite values".into());
            }
            if betas.is_empty() || betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
                errors.push("--betas: needs finite values >= 0".into());
            }
            if neighbors.is_empty() || neighbors.contains(&Neighbors::Top(0)) {
                errors.push("--neighbors: needs positive counts or \"all\"".into());
            }
            require_model(model.as_deref(), &kinds, &mut errors);
            usage(errors)?;
            let entries = load_benchmark(&bench).with_context(|| format!("reading benchmark {}", bench.display()))?;
            let corpus = open_corpus(&corpus)?;
            let model = maybe_model(model.as_deref(), &kinds)?;
            let spec = GridSpec {
                kinds,
                alphas,
                betas,
                neighbors,
            };
            let rows = grid_search(&spec, &entries, &corpus, model.as_ref())?;
            let bytes = render(|buf| Ok(write_results(&rows, buf)?))?;
            Ok(emit(out.as_deref(), &bytes)?)
        }
    }
}

fn synth(args: SynthArgs) -> Result {
    let config = SynthConfig {
        n_domains: args.domains,
        libs_per_domain: args.libs_per_domain,
        zipf_s: args.zipf,
        n_projects: args.projects,
        deps_min: args.deps_min,
        deps_max: args.deps_max,
        years: args.years,
        add_rate: args.add_rate,
        tail_rate: args.tail_rate,
        seed: args.seed,
        ..SynthConfig::default()
    };
    if let Err(e) = config.validate() {
        return usage(vec![e.to_string()]);
    }
    let s = synth_corpus(&config)?;
    let bytes = render(|buf| {
        write_corpus(&s.corpus, &mut *buf)?;
        buf.flush()?;
        Ok(())
    })?;
    Ok(emit(args.out.as_deref(), &bytes)?)
}
