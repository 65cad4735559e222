//! Subcommand implementations.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use phishscan_core::adversarial::{
    attribute_with_rerun, population_sigma, retraining_set, ManipulationParams,
};
use phishscan_core::config::ScorerKind;
use phishscan_core::corpus::{self, PageStyle};
use phishscan_core::detector::external::ExternalScorer;
use phishscan_core::detector::metrics::{cross_validate, evaluate, train_on_pages, CrossValidation, Metrics};
use phishscan_core::detector::chunk_document;
use phishscan_core::explainer::{explain, Codebook, TraceBundle, WarningGenerator};
use phishscan_core::parser::decode_page;
use phishscan_core::window::{chunk_dump, split_train_test};
use phishscan_core::{
    apply_manipulation, attribute_primary_attacks, augment_corpus, optimize, profile, render_parsed_text, Config,
    EvasionCategory, HidingStrategy, Label, Manipulation, ManipulationId, PatchConfig, ReferenceModel, Scorer,
};
use phishscan_service::ingest::Backoff;
use phishscan_service::{BlocklistStore, HttpGenerator, RecordFilter, ScanRecord, ScanStatus, Scanner};
use serde::Serialize;

use crate::{BlocklistAction, Cli, Command, Format, Global, ModelArgs, PageArgs, Style, Switch};

pub enum CliError {
    Usage(String),
    Operational(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Operational(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

struct Ctx {
    config: Config,
    format: Format,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self> {
        let mut config = Config::load(g.config.as_deref()).context("loading configuration")?;
        match g.patches {
            Some(Switch::On) => config.pipeline.patches = PatchConfig::all_on(),
            Some(Switch::Off) => config.pipeline.patches = PatchConfig::all_off(),
            None => {}
        }
        if let Some(seed) = g.seed {
            config.train.seed = seed;
            config.optimizer.params.seed = seed;
            config.explainer.importance.seed = seed;
        }
        if let Some(jobs) = g.jobs {
            if jobs == 0 {
                return usage("--jobs must be at least 1");
            }
            config.service.fetch_workers = jobs;
            config.service.classify_workers = jobs;
        }
        Ok(Ctx { config, format: g.format })
    }

    fn seed(&self) -> u64 {
        self.config.train.seed
    }

    fn scorer(&self, args: &ModelArgs) -> Result<Arc<dyn Scorer>> {
        if let Some(path) = &args.model {
            return load_model(path);
        }
        let c = &self.config.scorer;
        match c.kind {
            ScorerKind::External => {
                let Some(addr) = c.address.as_deref() else {
                    return usage("scorer.kind is external but scorer.address is not set");
                };
                let s = ExternalScorer::new(addr, Duration::from_millis(c.timeout_ms), c.max_in_flight)
                    .with_context(|| format!("connecting to scorer at {addr}"))?;
                Ok(Arc::new(s))
            }
            ScorerKind::Reference => match &c.model {
                Some(path) => load_model(path),
                None => usage("no model: pass --model or set scorer.model in the configuration"),
            },
        }
    }

    fn generator(&self) -> Result<Option<Arc<dyn WarningGenerator>>> {
        let g = HttpGenerator::from_config(&self.config.explainer).context("loading the prompt template")?;
        Ok(g.map(|g| Arc::new(g) as Arc<dyn WarningGenerator>))
    }

    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<()> {
        let out = match self.format {
            Format::Structured => serde_json::to_string(value)? + "\n",
            Format::Text => text(),
        };
        write_stdout(&out)
    }
}

fn load_model(path: &Path) -> Result<Arc<dyn Scorer>> {
    let m = ReferenceModel::load(path).with_context(|| format!("loading model {}", path.display()))?;
    Ok(Arc::new(m))
}

fn write_stdout(s: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(s.as_bytes()).and_then(|_| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(e.into()),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).context("reading stdin")?;
        return Ok(buf);
    }
    Ok(std::fs::read(path).with_context(|| format!("reading {}", path.display()))?)
}

fn doc_name(path: &Path) -> String {
    if path.as_os_str() == "-" {
        "stdin".into()
    } else {
        path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

/// Record JSON without the wall-clock timestamp, so stdout is reproducible.
fn record_json(r: &ScanRecord) -> serde_json::Value {
    let mut v = serde_json::to_value(r).expect("record serializes");
    if let Some(o) = v.as_object_mut() {
        o.remove("discovered_at");
    }
    v
}

fn record_line(r: &ScanRecord) -> String {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    format!(
        "{}\t{}\t{}\t{}\t{}\n",
        r.url,
        serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
        opt(r.label.map(|l| l.to_string())),
        opt(r.confidence.map(|c| format!("{c:.4}"))),
        opt(r.evasion.map(|e| e.as_str().to_string())),
    )
}

fn record_text(r: &ScanRecord) -> String {
    let mut s = record_line(r);
    if let Some(p) = &r.provenance {
        s += &format!("  flagged via {:?} follow-up: {} ({:.4})\n", p.via, p.url, p.confidence);
    }
    for f in &r.followed_links {
        let conf = f.verdict.as_ref().map_or("-".into(), |v| format!("{:.4}", v.confidence));
        s += &format!("  followed {:?} {} {conf}\n", f.via, f.url);
    }
    if let Some(e) = &r.error {
        s += &format!("  error: {e}\n");
    }
    if let Some(w) = &r.warning {
        s += &warning_text(w);
    }
    s
}

fn warning_text(w: &phishscan_core::ExplainableWarning) -> String {
    let mut s = String::new();
    if let Some(b) = &w.target_brand_guess {
        s += &format!("  imitated brand: {b}\n");
    }
    for f in &w.features {
        s += &format!("  - {} at {}: {}\n", f.name, f.location, f.description);
    }
    s
}

fn metrics_text(m: &Metrics) -> String {
    let c = &m.confusion;
    format!(
        "accuracy  {:.4}\nprecision {:.4}\nrecall    {:.4}\nf1        {:.4}\nconfusion tp={} fp={} tn={} fn={}\n",
        m.accuracy, m.precision, m.recall, m.f1, c.tp, c.fp, c.tn, c.fn_
    )
}

fn cv_text(cv: &CrossValidation) -> String {
    let mut s = String::from("fold  precision  recall  f1\n");
    for (i, f) in cv.folds.iter().enumerate() {
        s += &format!("{:<5} {:<10.4} {:<7.4} {:.4}\n", i + 1, f.precision, f.recall, f.f1);
    }
    s += &format!("mean  {:<10.4} {:<7.4} {:.4}\n", cv.mean_precision, cv.mean_recall, cv.mean_f1);
    s
}

fn parse_strategy(s: Option<&str>) -> Result<Option<HidingStrategy>> {
    match s {
        None => Ok(None),
        Some(s) => match s.parse() {
            Ok(v) => Ok(Some(v)),
            Err(e) => usage(format!("{e}")),
        },
    }
}

fn parse_manipulation(s: &str) -> Result<ManipulationId> {
    s.parse().or_else(|e| usage(format!("{e}")))
}

fn serde_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).or_else(|_| usage(format!("unknown {what} {s:?}")))
}

fn load_corpus(dir: &Path) -> Result<Vec<phishscan_core::LabeledPage>> {
    let pages = corpus::load_corpus(dir).with_context(|| format!("loading corpus {}", dir.display()))?;
    if pages.is_empty() {
        return Err(anyhow::anyhow!("corpus {} is empty", dir.display()).into());
    }
    Ok(pages)
}

fn store_at(path: Option<&Path>) -> Result<Arc<BlocklistStore>> {
    Ok(Arc::new(match path {
        Some(p) => BlocklistStore::open(p).with_context(|| format!("opening store {}", p.display()))?,
        None => BlocklistStore::in_memory(),
    }))
}

fn scanner(ctx: &Ctx, model: &ModelArgs, store: Arc<BlocklistStore>) -> Result<Arc<Scanner>> {
    let mut s = Scanner::new(&ctx.config, ctx.scorer(model)?, store)?;
    if let Some(g) = ctx.generator()? {
        s = s.with_generator(g);
    }
    Ok(Arc::new(s))
}

#[derive(Serialize)]
struct AttackSummary<'a> {
    document_id: &'a str,
    original_score: f64,
    best_score: f64,
    advantage: f64,
    queries_used: usize,
    baseline_queries: usize,
    primary_attacks: &'a [ManipulationId],
    scenario2: bool,
    trace: String,
}

#[derive(Serialize)]
struct RetrainSummary {
    target: ManipulationId,
    attacked: usize,
    adversarial_pages: usize,
    skipped: usize,
    sigma: f64,
    training_pages: usize,
    model: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli.global)?;
    match cli.command {
        Command::Parse { page } => cmd_parse(&ctx, &page),
        Command::Chunk { page, window, stride } => cmd_chunk(&ctx, &page, window, stride),
        Command::Corpus { out, phishing, benign, style } => cmd_corpus(&ctx, &out, phishing, benign, style),
        Command::Train { corpus, out, epochs, split } => cmd_train(&ctx, &corpus, &out, epochs, split),
        Command::Eval { corpus, model, cv } => cmd_eval(&ctx, &corpus, &model, cv),
        Command::Scan { url, model, store } => cmd_scan(&ctx, &url, &model, store.as_deref()),
        Command::Serve { model, bind, live } => cmd_serve(&ctx, &model, bind, live),
        Command::Replay { file, model, store, rate } => cmd_replay(&ctx, &file, &model, store.as_deref(), rate),
        Command::Attack { page, model, budget, strategy, rerun, out } => {
            cmd_attack(&ctx, &page, &model, budget, strategy.as_deref(), rerun, out)
        }
        Command::Manipulate { page, id, strategy, count } => cmd_manipulate(&ctx, &page, &id, strategy.as_deref(), count),
        Command::Retrain { corpus, model, target, out, weight } => cmd_retrain(&ctx, &corpus, &model, &target, &out, weight),
        Command::Explain { page, model, samples } => cmd_explain(&ctx, &page, &model, samples),
        Command::Profile { page } => cmd_profile(&ctx, &page),
        Command::Blocklist { action, store } => cmd_blocklist(&ctx, action, store),
    }
}

fn cmd_parse(ctx: &Ctx, page: &PageArgs) -> Result<()> {
    let bytes = read_input(&page.input)?;
    let doc = ctx.config.pipeline.parse(&bytes, &page.url);
    ctx.emit(&doc, || render_parsed_text(&doc))
}

fn cmd_chunk(ctx: &Ctx, page: &PageArgs, window: Option<usize>, stride: Option<usize>) -> Result<()> {
    let mut wcfg = ctx.config.pipeline.window;
    wcfg.window = window.unwrap_or(wcfg.window);
    wcfg.stride = stride.unwrap_or(wcfg.stride);
    if let Err(e) = wcfg.validate() {
        return usage(e.to_string());
    }
    let bytes = read_input(&page.input)?;
    let doc = ctx.config.pipeline.parse(&bytes, &page.url);
    let chunks = chunk_document(&doc, &wcfg)?;
    match ctx.format {
        Format::Structured => write_stdout(&chunk_dump(&doc_name(&page.input), &chunks)),
        Format::Text => {
            let mut s = String::new();
            for (i, c) in chunks.iter().enumerate() {
                s += &format!(
                    "chunk {i}: tokens {}..{} elements {}..{} ({} tokens{})\n{}\n\n",
                    c.token_span.0,
                    c.token_span.1,
                    c.element_range.0,
                    c.element_range.1,
                    c.len(),
                    if c.split { ", split" } else { "" },
                    c.text()
                );
            }
            write_stdout(&s)
        }
    }
}

fn cmd_corpus(ctx: &Ctx, out: &Path, phishing: usize, benign: usize, style: Style) -> Result<()> {
    let pages = match style {
        Style::Modern => corpus::generate(phishing, benign, PageStyle::Modern, ctx.seed()),
        Style::Saved => corpus::generate(phishing, benign, PageStyle::Saved, ctx.seed()),
        Style::Mixed => corpus::mixed_corpus(phishing, benign, ctx.seed()),
    };
    corpus::save_corpus(out, &pages).with_context(|| format!("writing corpus to {}", out.display()))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        out: &'a Path,
        pages: usize,
        phishing: usize,
        benign: usize,
    }
    let n_phish = pages.iter().filter(|p| p.label == Label::Phishing).count();
    let summary = Summary { out, pages: pages.len(), phishing: n_phish, benign: pages.len() - n_phish };
    ctx.emit(&summary, || {
        format!("wrote {} pages ({} phishing, {} benign) to {}\n", summary.pages, summary.phishing, summary.benign, out.display())
    })
}

fn cmd_train(ctx: &Ctx, dir: &Path, out: &Path, epochs: Option<usize>, split: Option<f64>) -> Result<()> {
    let mut tcfg = ctx.config.train;
    if let Some(e) = epochs {
        if e == 0 {
            return usage("--epochs must be at least 1");
        }
        tcfg.epochs = e;
    }
    if let Some(f) = split {
        if !(f > 0.0 && f < 1.0) {
            return usage("--split must be strictly between 0 and 1");
        }
    }
    let pages = load_corpus(dir)?;
    let (train, test) = match split {
        Some(f) => split_train_test(&pages, f, tcfg.seed),
        None => (pages, Vec::new()),
    };
    let started = Instant::now();
    let model = train_on_pages(&train, &ctx.config.pipeline, &tcfg)?;
    eprintln!("trained on {} pages in {:.1}s", train.len(), started.elapsed().as_secs_f64());
    model.save(out).with_context(|| format!("saving model to {}", out.display()))?;
    if test.is_empty() {
        return ctx.emit(&serde_json::json!({"model": out, "train_pages": train.len()}), || {
            format!("model written to {}\n", out.display())
        });
    }
    let m = evaluate(&model, &test, &ctx.config.pipeline)?;
    eprintln!("median latency {:.3} ms", m.median_latency_ms);
    ctx.emit(&serde_json::json!({"model": out, "train_pages": train.len(), "test_pages": test.len(), "precision": m.precision, "recall": m.recall, "f1": m.f1, "confusion": m.confusion}), || {
        format!("model written to {}\nheld-out {} pages\n{}", out.display(), test.len(), metrics_text(&m))
    })
}

fn cmd_eval(ctx: &Ctx, dir: &Path, model: &ModelArgs, cv: Option<usize>) -> Result<()> {
    let pages = load_corpus(dir)?;
    if let Some(k) = cv {
        if k < 2 || k > pages.len() {
            return usage(format!("--cv must be between 2 and the corpus size ({})", pages.len()));
        }
        let mut tcfg = ctx.config.train;
        tcfg.folds = k;
        let result = cross_validate(&pages, &ctx.config.pipeline, &tcfg)?;
        for (i, f) in result.folds.iter().enumerate() {
            eprintln!("fold {} median latency {:.3} ms", i + 1, f.median_latency_ms);
        }
        #[derive(Serialize)]
        struct Fold {
            precision: f64,
            recall: f64,
            f1: f64,
        }
        let folds: Vec<Fold> = result.folds.iter().map(|f| Fold { precision: f.precision, recall: f.recall, f1: f.f1 }).collect();
        let v = serde_json::json!({"folds": folds, "mean_precision": result.mean_precision, "mean_recall": result.mean_recall, "mean_f1": result.mean_f1});
        return ctx.emit(&v, || cv_text(&result));
    }
    let scorer = ctx.scorer(model)?;
    let m = evaluate(&*scorer, &pages, &ctx.config.pipeline)?;
    eprintln!("median latency {:.3} ms", m.median_latency_ms);
    let v = serde_json::json!({"pages": pages.len(), "accuracy": m.accuracy, "precision": m.precision, "recall": m.recall, "f1": m.f1, "confusion": m.confusion});
    ctx.emit(&v, || format!("pages     {}\n{}", pages.len(), metrics_text(&m)))
}

fn cmd_scan(ctx: &Ctx, url: &str, model: &ModelArgs, store: Option<&Path>) -> Result<()> {
    let scanner = scanner(ctx, model, store_at(store)?)?;
    let record = runtime()?.block_on(scanner.scan_url(url)).map_err(|e| match e {
        phishscan_service::ScanError::InvalidUrl(_) => CliError::Usage(e.to_string()),
        other => CliError::Operational(other.into()),
    })?;
    eprintln!("discovered_at {}", record.discovered_at.to_rfc3339());
    ctx.emit(&record_json(&record), || record_text(&record))
}

fn cmd_serve(ctx: &Ctx, model: &ModelArgs, bind: Option<String>, live: bool) -> Result<()> {
    let store = store_at(Some(&ctx.config.service.store_path))?;
    let scanner = scanner(ctx, model, store)?;
    let bind = bind.unwrap_or_else(|| ctx.config.service.bind.clone());
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        if live {
            let s = scanner.clone();
            tokio::spawn(async move {
                match phishscan_service::run_live(s, Backoff::default()).await {
                    Ok(stats) => tracing::info!(?stats, "live feed ended"),
                    Err(e) => tracing::error!(error = %e, "live feed stopped"),
                }
            });
        }
        phishscan_service::serve(listener, scanner).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

fn cmd_replay(ctx: &Ctx, file: &Path, model: &ModelArgs, store: Option<&Path>, rate: Option<f64>) -> Result<()> {
    if rate.is_some_and(|r| !(r > 0.0)) {
        return usage("--rate must be positive");
    }
    let scanner = scanner(ctx, model, store_at(store)?)?;
    let started = Instant::now();
    let outcome = runtime()?.block_on(phishscan_service::replay(scanner, file, rate))?;
    let s = outcome.stats;
    eprintln!(
        "replayed {} urls ({} duplicates, {} allowlisted, {} invalid) in {:.1}s",
        s.emitted,
        s.duplicates,
        s.allowlisted,
        s.invalid,
        started.elapsed().as_secs_f64()
    );
    let out: String = match ctx.format {
        Format::Structured => outcome.records.iter().map(|r| serde_json::to_string(&record_json(r)).expect("json") + "\n").collect(),
        Format::Text => outcome.records.iter().map(record_line).collect(),
    };
    write_stdout(&out)
}

fn cmd_attack(
    ctx: &Ctx,
    page: &PageArgs,
    model: &ModelArgs,
    budget: Option<usize>,
    strategy: Option<&str>,
    rerun: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut ocfg = ctx.config.optimizer.clone();
    if let Some(b) = budget {
        ocfg.budget = b;
    }
    if let Some(s) = parse_strategy(strategy)? {
        ocfg.params.strategy = s;
    }
    if let Err(e) = ocfg.validate() {
        return usage(e.to_string());
    }
    let scorer = ctx.scorer(model)?;
    let html = decode_page(&read_input(&page.input)?, &PatchConfig::all_off());
    let pipeline = ctx.config.pipeline;
    let url = page.url.as_str();
    let query = |h: &str| pipeline.confidence(&*scorer, h, url);
    let id = doc_name(&page.input);
    let mut run = optimize(&id, &html, url, query, &ocfg)?;
    let sigma = population_sigma(std::slice::from_ref(&run));
    let attribution = if rerun {
        attribute_with_rerun(&run, &html, query, sigma)?.0
    } else {
        attribute_primary_attacks(&run, sigma)
    };
    run.set_attribution(&attribution);
    let out = out.unwrap_or_else(|| {
        let base = if page.input.as_os_str() == "-" { PathBuf::from("stdin") } else { page.input.clone() };
        PathBuf::from(format!("{}.attack.json", base.display()))
    });
    std::fs::write(&out, serde_json::to_string_pretty(&run)? + "\n").with_context(|| format!("writing {}", out.display()))?;
    let summary = AttackSummary {
        document_id: &run.document_id,
        original_score: run.original_score,
        best_score: run.best_score,
        advantage: run.advantage(),
        queries_used: run.queries_used,
        baseline_queries: run.baseline_queries,
        primary_attacks: &run.primary_attacks,
        scenario2: run.scenario2,
        trace: out.display().to_string(),
    };
    ctx.emit(&summary, || {
        let primaries: Vec<String> = run.primary_attacks.iter().map(|m| format!("{m} ({})", m.name())).collect();
        format!(
            "original  {:.4}\nbest      {:.4}\nadvantage {:.4}\nqueries   {} of {} (+{} baseline)\nprimary   {}\ntrace     {}\n",
            run.original_score,
            run.best_score,
            run.advantage(),
            run.queries_used,
            run.config.budget,
            run.baseline_queries,
            if primaries.is_empty() { "none".into() } else { primaries.join(", ") },
            out.display()
        )
    })
}

fn cmd_manipulate(ctx: &Ctx, page: &PageArgs, id: &str, strategy: Option<&str>, count: Option<usize>) -> Result<()> {
    let id = parse_manipulation(id)?;
    let mut params = ManipulationParams { seed: ctx.config.optimizer.params.seed, ..ctx.config.optimizer.params };
    if let Some(s) = parse_strategy(strategy)? {
        params.strategy = s;
    }
    if let Some(c) = count {
        params.count = c;
    }
    let html = decode_page(&read_input(&page.input)?, &PatchConfig::all_off());
    let outcome = apply_manipulation(&html, &page.url, &Manipulation::with_params(id, params));
    eprintln!(
        "{id} ({}): {}{}",
        id.name(),
        if outcome.applied { format!("{} edits", outcome.edits) } else { "not applicable".into() },
        outcome.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
    );
    match ctx.format {
        Format::Text => write_stdout(&outcome.html),
        Format::Structured => write_stdout(&(serde_json::to_string(&outcome)? + "\n")),
    }
}

fn cmd_retrain(ctx: &Ctx, dir: &Path, model: &ModelArgs, target: &str, out: &Path, weight: usize) -> Result<()> {
    let target = parse_manipulation(target)?;
    if weight == 0 {
        return usage("--weight must be at least 1");
    }
    let pages = load_corpus(dir)?;
    let scorer = ctx.scorer(model)?;
    let pipeline = ctx.config.pipeline;
    let aug = augment_corpus(&pages, target, |h: &str, u: &str| pipeline.confidence(&*scorer, h, u), &ctx.config.optimizer)?;
    let set = retraining_set(&pages, &aug.pages, weight);
    let retrained = train_on_pages(&set, &pipeline, &ctx.config.train)?;
    retrained.save(out).with_context(|| format!("saving model to {}", out.display()))?;
    let summary = RetrainSummary {
        target,
        attacked: aug.runs.len(),
        adversarial_pages: aug.pages.len(),
        skipped: aug.skipped.len(),
        sigma: aug.sigma,
        training_pages: set.len(),
        model: out.to_path_buf(),
    };
    ctx.emit(&summary, || {
        format!(
            "target            {target} ({})\nattacked pages    {}\nadversarial pages {}\nskipped           {}\nsigma             {:.4}\ntraining pages    {}\nmodel written to  {}\n",
            target.name(),
            summary.attacked,
            summary.adversarial_pages,
            summary.skipped,
            summary.sigma,
            summary.training_pages,
            out.display()
        )
    })
}

fn cmd_explain(ctx: &Ctx, page: &PageArgs, model: &ModelArgs, samples: Option<usize>) -> Result<()> {
    let mut icfg = ctx.config.explainer.importance;
    if let Some(n) = samples {
        if n == 0 {
            return usage("--samples must be at least 1");
        }
        icfg.samples = n;
    }
    let scorer = ctx.scorer(model)?;
    let generator = ctx.generator()?;
    let doc = ctx.config.pipeline.parse(&read_input(&page.input)?, &page.url);
    let e = explain(&doc, &page.url, &*scorer, &ctx.config.pipeline, &icfg, &Codebook::default(), generator.as_deref())?;
    let bundle = TraceBundle {
        url: page.url.clone(),
        warning: e.warning,
        parsed_source: render_parsed_text(&doc),
        top_tags: e.importance.top(icfg.top_k).to_vec(),
    };
    ctx.emit(&bundle, || {
        let mut s = format!("phishing confidence {:.4}\n", e.confidence);
        s += &warning_text(&bundle.warning);
        for t in &bundle.top_tags {
            s += &format!("  element #{} weight {:.4}\n", t.order_index, t.weight);
        }
        s
    })
}

fn cmd_profile(ctx: &Ctx, page: &PageArgs) -> Result<()> {
    let bytes = read_input(&page.input)?;
    let doc = ctx.config.pipeline.parse(&bytes, &page.url);
    let p = profile(&bytes, &doc);
    ctx.emit(&p, || {
        let mut s = format!("{}\n", p.category.as_str());
        for sig in &p.signals {
            s += &format!("  {} {} bytes {}..{}\n", sig.category.as_str(), sig.id, sig.span.0, sig.span.1);
        }
        s
    })
}

fn cmd_blocklist(ctx: &Ctx, action: BlocklistAction, store: Option<PathBuf>) -> Result<()> {
    let path = store.unwrap_or_else(|| ctx.config.service.store_path.clone());
    if !path.exists() {
        return Err(anyhow::anyhow!("no blocklist at {}", path.display()).into());
    }
    let store = BlocklistStore::open(&path).with_context(|| format!("opening store {}", path.display()))?;
    match action {
        BlocklistAction::Get { url } => {
            let r = store.get(&url).ok_or_else(|| anyhow::anyhow!("no record for {url}"))?;
            ctx.emit(&record_json(&r), || record_text(&r))
        }
        BlocklistAction::List { label, category, status, page, page_size } => {
            let filter = RecordFilter {
                label: label.as_deref().map(|l| serde_enum::<Label>("label", l)).transpose()?,
                category: category
                    .as_deref()
                    .map(|c| c.parse::<EvasionCategory>().or_else(|e| usage(e)))
                    .transpose()?,
                status: status.as_deref().map(|s| serde_enum::<ScanStatus>("status", s)).transpose()?,
                since: None,
                until: None,
            };
            let listing = match store.list(&filter, page, page_size) {
                Ok(l) => l,
                Err(e @ phishscan_service::StoreError::InvalidPageSize) => return usage(e.to_string()),
                Err(e) => return Err(e.into()),
            };
            eprintln!("page {} of {} ({} records)", listing.page, listing.pages, listing.total);
            match ctx.format {
                Format::Structured => {
                    let records: Vec<_> = listing.records.iter().map(record_json).collect();
                    write_stdout(&(serde_json::to_string(&serde_json::json!({
                        "schema_version": listing.schema_version,
                        "page": listing.page,
                        "page_size": listing.page_size,
                        "total": listing.total,
                        "pages": listing.pages,
                        "records": records,
                    }))? + "\n"))
                }
                Format::Text => write_stdout(&listing.records.iter().map(record_line).collect::<String>()),
            }
        }
    }
}
