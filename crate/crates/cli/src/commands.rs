use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::json;
use stance_scope::corpus::{
    extract_context_window, load_articles, load_dataset, save_dataset, stratified_entity_split, synthesize_with,
    AnnotatedExample, AnnotationContext, SplitRatios, StanceLabel, SynthConfig,
};
use stance_scope::ingest::{
    matches, FixtureProvider, HttpProvider, HttpProviderConfig, NewsProvider, ProminenceIndex, Query,
};
use stance_scope::model::{
    check_gradients, encode_examples, evaluate, train, GradCheckConfig, StanceModel, StanceModelConfig,
};
use stance_scope::nn::Checkpoint;
use stance_scope::text::{build_vocab, load_embeddings, tokenize};
use stance_scope::topics::{
    compose_topic_list, exclude_uris, filter_by_type, load_triples, named_entity_types, parse_topic_records,
    rank_by_outdegree, select_top_k, top_entities_by_month, topic_records, wiki_url_to_dbpedia_uri, FilterMode,
    TopicCandidate, TopicSource, TripleStore,
};
use stance_scope::Error;
use stance_scope_server::{stance_x, AppState};

use crate::{
    Aggregate, BuildDataset, Cli, Command, CurateTopics, Evaluate, Format, Gradcheck, Predict, ProviderKind, Serve,
    Split, SynthCorpus, Train,
};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) | Error::Provider(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    let seed = cli.seed;
    match cli.command {
        Command::CurateTopics(c) => curate_topics(c),
        Command::BuildDataset(c) => build_dataset(c),
        Command::Aggregate(c) => aggregate(c),
        Command::Split(c) => split(c, seed),
        Command::SynthCorpus(c) => synth_corpus(c, seed),
        Command::Train(c) => train_model(c, seed),
        Command::Evaluate(c) => evaluate_checkpoint(c),
        Command::Predict(c) => predict(c),
        Command::Gradcheck(c) => gradcheck(c, seed),
        Command::Serve(c) => serve(c),
    }
}

fn input(path: &Path) -> Result<&Path, Failure> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Failure::Data(format!("{}: no such file", path.display())))
    }
}

fn output(path: &Path) -> Result<&Path, Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Failure::Data(format!("{}: no such directory", dir.display())))
        }
        _ => Ok(path),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn lines(path: &Path) -> Result<Vec<String>, Failure> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn candidates(path: &Path, source: TopicSource, store: &TripleStore) -> Result<Vec<TopicCandidate>, Failure> {
    Ok(lines(path)?.iter().map(|uri| TopicCandidate::from_store(uri, source, store)).collect())
}

fn curate_topics(c: CurateTopics) -> Outcome {
    for path in [&c.triples, &c.controversial, &c.popular, &c.political] {
        input(path)?;
    }
    if let Some(p) = &c.exclude {
        input(p)?;
    }
    if let Some(p) = &c.articles {
        input(p)?;
    }
    output(&c.out)?;
    if c.top_k == 0 || c.per_month == 0 {
        return Err(Failure::Usage("--top-k and --per-month must be positive".into()));
    }

    let store = load_triples(&c.triples)?;
    let types = named_entity_types();
    let controversial = lines(&c.controversial)?
        .iter()
        .map(|url| Ok(TopicCandidate::from_store(&wiki_url_to_dbpedia_uri(url)?, TopicSource::Controversial, &store)))
        .collect::<Result<Vec<_>, Error>>()?;
    let controversial = select_top_k(
        rank_by_outdegree(&store, filter_by_type(controversial, &types, FilterMode::Drop)),
        c.top_k,
    )?;

    let mut popular = candidates(&c.popular, TopicSource::Popular, &store)?;
    if let Some(p) = &c.exclude {
        let excluded: BTreeSet<String> = lines(p)?.into_iter().collect();
        popular = exclude_uris(popular, &excluded);
    }
    popular = filter_by_type(popular, &types, FilterMode::Keep);
    if let Some(p) = &c.articles {
        popular = top_entities_by_month(&load_articles(p)?, &popular, c.per_month);
    }
    let political = candidates(&c.political, TopicSource::Political, &store)?;

    let all = compose_topic_list(popular, controversial, political);
    write(&c.out, topic_records(&all))?;
    let count = |s| all.iter().filter(|t| t.source == s).count();
    println!(
        "topics: {} (popular {}, controversial {}, political {})",
        all.len(),
        count(TopicSource::Popular),
        count(TopicSource::Controversial),
        count(TopicSource::Political)
    );
    Ok(())
}

fn build_dataset(c: BuildDataset) -> Outcome {
    input(&c.articles)?;
    input(&c.topics)?;
    output(&c.out)?;
    if c.window == 0 {
        return Err(Failure::Usage("--window must be >= 1".into()));
    }
    let articles = load_articles(&c.articles)?;
    let topics = parse_topic_records(&read(&c.topics)?)?;
    let mut out = String::new();
    let mut n = 0usize;
    for topic in &topics {
        let Ok(query) = Query::for_topic(&topic.display_name) else {
            continue;
        };
        for article in articles.iter().filter(|a| matches(&query, a)) {
            let Ok(ctx) = extract_context_window(article, &topic.display_name, c.window) else {
                continue;
            };
            let record = json!({
                "id": format!("ctx{n:06}"),
                "article_id": article.id,
                "topic": topic.display_name,
                "headline": ctx.headline,
                "excerpt": ctx.excerpt,
                "sentence_range": ctx.source_sentence_range,
            });
            out.push_str(&record.to_string());
            out.push('\n');
            n += 1;
        }
    }
    write(&c.out, out)?;
    println!("contexts: {n} from {} articles and {} topics", articles.len(), topics.len());
    Ok(())
}

#[derive(Deserialize)]
struct VoteRecord {
    id: String,
    article_id: String,
    topic: String,
    headline: String,
    excerpt: String,
    votes: Vec<StanceLabel>,
}

fn aggregate(c: Aggregate) -> Outcome {
    input(&c.votes)?;
    output(&c.out)?;
    let mut examples = Vec::new();
    for (i, line) in read(&c.votes)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: VoteRecord = serde_json::from_str(line)
            .map_err(|e| Failure::Data(format!("{}: line {}: {e}", c.votes.display(), i + 1)))?;
        let votes: [StanceLabel; 3] = r.votes.try_into().map_err(|v: Vec<StanceLabel>| {
            Failure::Data(format!("{}: line {}: expected 3 votes, found {}", c.votes.display(), i + 1, v.len()))
        })?;
        let ctx = AnnotationContext { headline: r.headline, excerpt: r.excerpt, source_sentence_range: None };
        examples.push(AnnotatedExample::from_votes(r.id, r.article_id, r.topic, ctx, votes));
    }
    save_dataset(&c.out, &examples)?;
    let retained = examples.iter().filter(|e| e.retained).count();
    println!("examples: {} retained, {} discarded", retained, examples.len() - retained);
    Ok(())
}

fn split(c: Split, seed: u64) -> Outcome {
    input(&c.dataset)?;
    fs::create_dir_all(&c.out_dir).map_err(|e| Failure::Data(format!("{}: {e}", c.out_dir.display())))?;
    let ratios = SplitRatios { train: c.train_ratio, validation: c.validation_ratio, test: c.test_ratio };
    let sum = ratios.train + ratios.validation + ratios.test;
    if (sum - 1.0).abs() > 1e-9 || [ratios.train, ratios.validation, ratios.test].iter().any(|r| *r < 0.0) {
        return Err(Failure::Usage("split ratios must be non-negative and sum to 1".into()));
    }
    let data = load_dataset(&c.dataset)?;
    let parts = stratified_entity_split(&data, ratios, seed)?;
    for warning in &parts.warnings {
        eprintln!("warning: {warning}");
    }
    for (name, part) in ["train", "validation", "test"].iter().zip(parts.parts()) {
        save_dataset(&c.out_dir.join(format!("{name}.jsonl")), part)?;
        println!("{name}: {}", part.len());
    }
    Ok(())
}

fn synth_corpus(c: SynthCorpus, seed: u64) -> Outcome {
    output(&c.out)?;
    if c.n == 0 {
        return Err(Failure::Usage("--n must be >= 1".into()));
    }
    let config = SynthConfig { topics: c.topics, ..SynthConfig::default() };
    let data = synthesize_with(&config, c.n, seed)?;
    save_dataset(&c.out, &data)?;
    let retained = data.iter().filter(|e| e.retained).count();
    println!("examples: {} ({} retained)", data.len(), retained);
    Ok(())
}

fn history_path(c: &Train) -> PathBuf {
    c.history.clone().unwrap_or_else(|| {
        let mut name = c.out.file_name().unwrap_or_default().to_os_string();
        name.push(".history.jsonl");
        c.out.with_file_name(name)
    })
}

fn train_model(c: Train, seed: u64) -> Outcome {
    input(&c.train)?;
    input(&c.validation)?;
    if let Some(p) = &c.embeddings {
        input(p)?;
    }
    output(&c.out)?;
    let history_out = history_path(&c);
    output(&history_out)?;
    let config = StanceModelConfig {
        embedding_dim: c.embedding_dim,
        hidden: c.hidden,
        lr: c.lr,
        batch_size: c.batch_size,
        max_epochs: c.epochs,
        patience: c.patience,
        seed,
        max_tokens: c.max_tokens,
        train_embeddings: !c.freeze_embeddings,
        ..StanceModelConfig::default()
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let train_set = load_dataset(&c.train)?;
    let validation = load_dataset(&c.validation)?;
    let vocab = build_vocab(
        train_set
            .iter()
            .filter(|e| e.class_index().is_some())
            .map(|e| tokenize(&format!("{} {}", e.topic, e.context.text()))),
        c.min_count,
    )?;
    let pretrained = match &c.embeddings {
        Some(p) => Some(load_embeddings(p, &vocab, c.embedding_dim)?),
        None => None,
    };
    let model = StanceModel::new(config, vocab, pretrained.as_ref())?;
    let (best, history) = train(model, &train_set, &validation)?;
    best.to_checkpoint().save(&c.out)?;
    write(&history_out, history.to_records())?;
    let last = history.epochs.last().expect("training runs at least one epoch");
    println!(
        "epochs: {}, best epoch: {}, final train loss: {:.6}, best validation accuracy: {:.4}",
        history.epochs.len(),
        history.best_epoch,
        last.train_loss,
        history.epochs[history.best_epoch - 1].val_accuracy
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<StanceModel, Failure> {
    Ok(StanceModel::from_checkpoint(&Checkpoint::load(input(path)?)?)?)
}

fn evaluate_checkpoint(c: Evaluate) -> Outcome {
    input(&c.split)?;
    let model = load_model(&c.checkpoint)?;
    let data = load_dataset(&c.split)?;
    let encoded = encode_examples(&model, &data);
    if encoded.is_empty() {
        return Err(Failure::Data(format!("{}: no examples with a 3-class label", c.split.display())));
    }
    let report = evaluate(&model, &encoded)?;
    match c.format {
        Format::Plain => print!("{}", report.to_plain()),
        Format::Records => print!("{}", report.to_records()),
    }
    Ok(())
}

fn predict(c: Predict) -> Outcome {
    let model = load_model(&c.checkpoint)?;
    if tokenize(&c.text).is_empty() || tokenize(&c.topic).is_empty() {
        return Err(Failure::Usage("--topic and --text must contain at least one token".into()));
    }
    let p = model.predict(&c.topic, &c.text)?;
    let x = stance_x(&p.distribution)?;
    match c.format {
        Format::Plain => {
            println!("label: {}", p.label);
            println!("probability: {:.6}", p.probability);
            for (label, v) in StanceLabel::CLASSES.iter().zip(p.distribution) {
                println!("p({label}): {v:.6}");
            }
            println!("x: {x:.6}");
        }
        Format::Records => {
            let record = json!({
                "label": p.label,
                "probability": p.probability,
                "distribution": {"favour": p.distribution[0], "against": p.distribution[1], "neutral": p.distribution[2]},
                "x": x,
            });
            println!("{record}");
        }
    }
    Ok(())
}

fn gradcheck(c: Gradcheck, seed: u64) -> Outcome {
    if c.seeds == 0 {
        return Err(Failure::Usage("--seeds must be >= 1".into()));
    }
    if !(c.eps.is_finite() && c.eps > 0.0) {
        return Err(Failure::Usage("--eps must be positive".into()));
    }
    let shape = GradCheckConfig {
        embedding_dim: c.embedding_dim,
        hidden: c.hidden,
        tokens: c.tokens,
        eps: c.eps,
        ..GradCheckConfig::default()
    };
    let mut worst = 0.0f64;
    for s in seed..seed + c.seeds {
        let report = check_gradients(shape, s).map_err(|e| Failure::Usage(e.to_string()))?;
        println!(
            "seed {s}: max relative error {:.3e} over {} components",
            report.max_rel_error, report.components
        );
        worst = worst.max(report.max_rel_error);
    }
    println!("max relative error: {worst:.3e}");
    if worst < c.tolerance {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("max relative error {worst:.3e} is not below {:.1e}", c.tolerance)))
    }
}

fn serve(c: Serve) -> Outcome {
    input(&c.ranks)?;
    if let Some(p) = &c.model {
        input(p)?;
    }
    let provider: Arc<dyn NewsProvider> = match c.provider {
        ProviderKind::Fixture => {
            let corpus = c.corpus.as_deref().ok_or_else(|| Failure::Usage("--provider fixture needs --corpus".into()))?;
            Arc::new(FixtureProvider::load(input(corpus)?)?)
        }
        ProviderKind::Http => {
            let path = c
                .provider_config
                .as_deref()
                .ok_or_else(|| Failure::Usage("--provider http needs --provider-config".into()))?;
            let config = HttpProviderConfig::load(input(path)?)?;
            Arc::new(HttpProvider::new(config).map_err(|e| Failure::Data(e.to_string()))?)
        }
    };
    let addr: SocketAddr = format!("{}:{}", c.host, c.port)
        .parse()
        .map_err(|e| Failure::Usage(format!("--host/--port: {e}")))?;
    let state = AppState::new(provider, ProminenceIndex::load(&c.ranks)?);
    if let Some(p) = &c.model {
        state.load_model(p)?;
    }

    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    runtime
        .block_on(stance_scope_server::serve(Arc::new(state), addr))
        .map_err(|e| Failure::Runtime(format!("{addr}: {e}")))
}
