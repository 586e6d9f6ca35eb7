use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use talkprofiler::classifier::{
    evaluate, featurize_for, fit_units, load_model, save_model, FeatureSpec, TrainConfig,
    TrainedModel,
};
use talkprofiler::cohorts::{
    holdout_split, read_ids, speaker_units, turn_units, write_ids, Unit, UnitKind,
};
use talkprofiler::corpus::{category_of, load_corpus, Corpus, Scheme};
use talkprofiler::experiment::{
    experiment_units, folds_for, run_experiment, Evaluation, ExperimentConfig, DEFAULT_FOLDS,
    DEFAULT_TEST_FRACTION,
};
use talkprofiler::nonlex;
use talkprofiler::salience::{build_pair, plot_data, scaled_f_score, top_terms, CountOptions};
use talkprofiler::stats;
use talkprofiler::synth::{self, SynthSpec};
use talkprofiler::tokenizer::Stoplist;

use super::{
    Command, EvalArgs, EvaluateArgs, Failure, ModelArgs, SynthArgs, TermsArgs, UnitArgs,
};

type Result<T> = std::result::Result<T, Failure>;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest { corpus, out } => ingest(&corpus, out.as_deref()),
        Command::Stats { corpus, by, out } => {
            let rows = stats::stats(&load(&corpus)?, by).map_err(Failure::data)?;
            stats::write_csv(&rows, output(out.as_deref())?).map_err(Failure::data)
        }
        Command::Terms(args) => terms(args),
        Command::Nonlex { corpus, by, out } => {
            let profile = nonlex::profile(&load(&corpus)?, by).map_err(Failure::data)?;
            profile.write_csv(output(out.as_deref())?).map_err(Failure::data)
        }
        Command::Balance { units, out } => {
            let corpus = load(&units.corpus)?;
            let kept = experiment_units(&corpus, &unit_config(&units, None)).map_err(Failure::data)?;
            write_ids(&kept, 0..kept.len(), output(out.as_deref())?).map_err(Failure::data)
        }
        Command::Split { units, eval, out } => split(&units, &eval, &out),
        Command::Train {
            units,
            model,
            ids,
            out,
        } => train(&units, &model, ids.as_deref(), &out),
        Command::Predict {
            corpus,
            model,
            unit,
            ids,
            out,
        } => predict(&corpus, &model, unit, ids.as_deref(), out.as_deref()),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Synth(args) => synth_cmd(args),
    }
}

fn load(path: &Path) -> Result<Corpus> {
    load_corpus(path).map_err(|errors| {
        Failure::Data(
            errors
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("\nerror: "),
        )
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(Failure::data)?;
    writeln!(out).and_then(|()| out.flush()).map_err(Failure::data)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct IngestSummary {
    conversations: usize,
    speakers: usize,
    turns: usize,
    words: usize,
    speakers_by_category: BTreeMap<String, usize>,
}

fn ingest(path: &Path, out: Option<&Path>) -> Result<()> {
    let corpus = load(path)?;
    let mut by_category = BTreeMap::new();
    for scheme in [Scheme::Gender, Scheme::Age] {
        for p in corpus.speakers.values() {
            if let Some(c) = category_of(p, scheme) {
                *by_category.entry(c.to_string()).or_insert(0) += 1;
            }
        }
    }
    write_json(
        &IngestSummary {
            conversations: corpus.conversations.len(),
            speakers: corpus.speakers.len(),
            turns: corpus.turn_count(),
            words: corpus.word_count(),
            speakers_by_category: by_category,
        },
        out,
    )
}

fn terms(args: TermsArgs) -> Result<()> {
    let corpus = load(&args.corpus)?;
    let mut opts = CountOptions::new(args.by);
    opts.min_count = args.min_count;
    opts.per_conversation = args.per_conversation;
    opts.seed = args.seed;
    opts.lexical.stoplist = match (&args.stoplist, args.no_stoplist) {
        (_, true) => None,
        (Some(p), _) => Some(Stoplist::parse(&read_text(p)?)),
        (None, false) => Some(Stoplist::english()),
    };
    let (a, b) = build_pair(&corpus, &opts).map_err(Failure::data)?;
    let scores = scaled_f_score(&a, &b).map_err(Failure::data)?;
    if let Some(path) = &args.out {
        plot_data(&scores, output(Some(path))?).map_err(Failure::data)?;
    }
    let (top_a, top_b) = top_terms(&scores, args.top);
    let mut w = csv::Writer::from_writer(output(None)?);
    let mut rows = w.write_record(["category", "rank", "term", "sfs", "count_a", "count_b"]);
    for (category, side) in [(a.category, &top_a), (b.category, &top_b)] {
        for (rank, s) in side.iter().enumerate() {
            rows = rows.and_then(|()| {
                w.write_record([
                    category.to_string(),
                    (rank + 1).to_string(),
                    s.term.clone(),
                    s.sfs.to_string(),
                    s.count_a.to_string(),
                    s.count_b.to_string(),
                ])
            });
        }
    }
    rows.and_then(|()| w.flush().map_err(Into::into)).map_err(Failure::data)
}

fn unit_config(args: &UnitArgs, model: Option<&ModelArgs>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(&args.corpus, args.by, args.unit);
    c.min_tokens = args.min_tokens;
    c.seed = args.seed;
    c.drop_empty_turns = args.drop_empty_turns;
    c.balance = !args.no_balance;
    c.speaker_guard = !args.no_speaker_guard;
    if let Some(m) = model {
        apply_model_args(&mut c, m);
    }
    c
}

fn apply_model_args(c: &mut ExperimentConfig, m: &ModelArgs) {
    c.features = m.features;
    c.vocab_size = m.vocab_size;
    c.train = TrainConfig {
        lambda: m.lambda,
        tol: m.tol,
        max_epochs: m.max_epochs,
    };
}

fn stopwords(m: &ModelArgs) -> Result<Option<Vec<String>>> {
    let Some(path) = &m.stoplist else {
        return Ok(None);
    };
    let list = Stoplist::parse(&read_text(path)?);
    let mut words: Vec<String> = list.words().map(str::to_string).collect();
    words.sort();
    Ok(Some(words))
}

fn evaluation(eval: &EvalArgs, unit: UnitKind) -> Evaluation {
    match (eval.folds, eval.test_fraction) {
        (Some(k), Some(f)) => Evaluation::HoldoutWithCv {
            test_fraction: f,
            folds: k as usize,
        },
        (Some(k), None) => Evaluation::CrossValidation { folds: k as usize },
        (None, Some(f)) => Evaluation::Holdout { test_fraction: f },
        (None, None) => match unit {
            UnitKind::Speaker => Evaluation::CrossValidation {
                folds: DEFAULT_FOLDS,
            },
            UnitKind::Turn => Evaluation::Holdout {
                test_fraction: DEFAULT_TEST_FRACTION,
            },
        },
    }
}

fn write_manifest(dir: &Path, name: &str, units: &[Unit], idx: &[usize]) -> Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    write_ids(units, idx.iter().copied(), BufWriter::new(file)).map_err(Failure::data)
}

#[derive(Serialize)]
struct SplitSummary {
    units: usize,
    train: Option<usize>,
    test: Option<usize>,
    folds: Option<Vec<usize>>,
    seed: u64,
}

fn split(args: &UnitArgs, eval: &EvalArgs, dir: &Path) -> Result<()> {
    let corpus = load(&args.corpus)?;
    let config = unit_config(args, None);
    let units = experiment_units(&corpus, &config).map_err(Failure::data)?;
    let grouped = config.unit == UnitKind::Turn && config.speaker_guard;
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    let mut summary = SplitSummary {
        units: units.len(),
        train: None,
        test: None,
        folds: None,
        seed: config.seed,
    };
    let (pool, folds) = match evaluation(eval, config.unit) {
        Evaluation::CrossValidation { folds } => ((0..units.len()).collect::<Vec<_>>(), Some(folds)),
        Evaluation::Holdout { test_fraction } => (holdout(&units, test_fraction, &config, grouped, dir, &mut summary)?, None),
        Evaluation::HoldoutWithCv { test_fraction, folds } => {
            (holdout(&units, test_fraction, &config, grouped, dir, &mut summary)?, Some(folds))
        }
    };
    if let Some(k) = folds {
        let subset: Vec<Unit> = pool.iter().map(|&i| units[i].clone()).collect();
        let folds = folds_for(&subset, k, config.seed, grouped).map_err(Failure::data)?;
        let width = k.to_string().len();
        for (i, fold) in folds.iter().enumerate() {
            write_manifest(dir, &format!("fold_{:0width$}.txt", i + 1), &subset, fold)?;
        }
        summary.folds = Some(folds.iter().map(Vec::len).collect());
    }
    write_json(&summary, None)
}

fn holdout(
    units: &[Unit],
    test_fraction: f64,
    config: &ExperimentConfig,
    grouped: bool,
    dir: &Path,
    summary: &mut SplitSummary,
) -> Result<Vec<usize>> {
    let split = holdout_split(units, test_fraction, config.seed, grouped).map_err(Failure::data)?;
    write_manifest(dir, "train.txt", units, &split.train)?;
    write_manifest(dir, "test.txt", units, &split.test)?;
    summary.train = Some(split.train.len());
    summary.test = Some(split.test.len());
    Ok(split.train)
}

/// Keeps the units named in an id manifest; unknown ids are an error.
fn select(units: Vec<Unit>, ids: Option<&Path>) -> Result<Vec<Unit>> {
    let Some(path) = ids else {
        return Ok(units);
    };
    let wanted = read_ids(&read_text(path)?);
    let known: HashSet<&str> = units.iter().map(|u| u.id.as_str()).collect();
    if let Some(missing) = wanted.iter().find(|id| !known.contains(id.as_str())) {
        return Err(Failure::Data(format!(
            "{}: unit `{missing}` is not in the corpus",
            path.display()
        )));
    }
    let wanted: HashSet<String> = wanted.into_iter().collect();
    Ok(units.into_iter().filter(|u| wanted.contains(&u.id)).collect())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: &'a Path,
    units: usize,
    dimension: usize,
    epochs: usize,
    converged: bool,
    grad_inf_norm: f64,
}

fn train(args: &UnitArgs, model_args: &ModelArgs, ids: Option<&Path>, out: &Path) -> Result<()> {
    let corpus = load(&args.corpus)?;
    let config = unit_config(args, Some(model_args));
    let units = match ids {
        Some(_) => {
            let all = match config.unit {
                UnitKind::Speaker => speaker_units(&corpus, config.scheme),
                UnitKind::Turn => turn_units(&corpus, config.scheme, config.drop_empty_turns),
            };
            select(all, ids)?
        }
        None => experiment_units(&corpus, &config).map_err(Failure::data)?,
    };
    let refs: Vec<&Unit> = units.iter().collect();
    let spec = FeatureSpec {
        stopwords: stopwords(model_args)?,
        ..config.feature_spec()
    };
    let model = fit_units(&corpus, &refs, &spec, &config.train, config.seed).map_err(Failure::data)?;
    save_model(&model, out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    write_json(
        &TrainSummary {
            model: out,
            units: units.len(),
            dimension: model.weights.len(),
            epochs: model.diagnostics.epochs,
            converged: model.diagnostics.converged,
            grad_inf_norm: model.diagnostics.grad_inf_norm,
        },
        None,
    )
}

fn model_units(corpus: &Corpus, model: &TrainedModel, unit: UnitKind, ids: Option<&Path>) -> Result<Vec<Unit>> {
    let scheme = model.positive.scheme();
    let units = match unit {
        UnitKind::Speaker => speaker_units(corpus, scheme),
        UnitKind::Turn => turn_units(corpus, scheme, false),
    };
    select(units, ids)
}

fn predict(corpus: &Path, model: &Path, unit: UnitKind, ids: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let corpus = load(corpus)?;
    let model = load_model(model).map_err(Failure::data)?;
    let units = model_units(&corpus, &model, unit, ids)?;
    let refs: Vec<&Unit> = units.iter().collect();
    let vectors = featurize_for(&model, &corpus, &refs);
    let predictor = model.predictor();
    let mut w = csv::Writer::from_writer(output(out)?);
    let mut rows = w.write_record(["id", "speaker", "category", "probability", "predicted"]);
    for (u, v) in units.iter().zip(&vectors) {
        let p = predictor.probability(v).map_err(Failure::data)?;
        rows = rows.and_then(|()| {
            w.write_record([
                u.id.clone(),
                u.speaker.to_string(),
                u.category.to_string(),
                p.to_string(),
                model.label_for(p).to_string(),
            ])
        });
    }
    rows.and_then(|()| w.flush().map_err(Into::into)).map_err(Failure::data)
}

/// Reads an experiment config, or the config embedded in a report.
fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let config = match value.get("config") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(config).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    if let Some(path) = &args.config {
        if args.corpus.is_some() {
            return Err(Failure::Usage("--config replays a stored config; do not pass a corpus".into()));
        }
        let report = run_experiment(&read_config(path)?).map_err(Failure::data)?;
        eprintln!("{}", report.summary);
        return write_json(&report, args.out.as_deref());
    }
    let corpus_path = args
        .corpus
        .clone()
        .ok_or_else(|| Failure::Usage("a corpus directory is required unless --config is given".into()))?;
    if let Some(model_path) = &args.model {
        let corpus = load(&corpus_path)?;
        let model = load_model(model_path).map_err(Failure::data)?;
        let units = model_units(&corpus, &model, args.unit, args.ids.as_deref())?;
        let refs: Vec<&Unit> = units.iter().collect();
        let vectors = featurize_for(&model, &corpus, &refs);
        let report = evaluate(&model, &vectors, args.unit).map_err(Failure::data)?;
        eprintln!("{}", report.table_row());
        return write_json(&report, args.out.as_deref());
    }
    let units = UnitArgs {
        corpus: corpus_path,
        by: args.by,
        unit: args.unit,
        min_tokens: args.min_tokens,
        seed: args.seed,
        drop_empty_turns: args.drop_empty_turns,
        no_balance: args.no_balance,
        no_speaker_guard: args.no_speaker_guard,
    };
    let mut config = unit_config(&units, Some(&args.model_args));
    config.stopwords = stopwords(&args.model_args)?;
    config.evaluation = evaluation(&args.eval, config.unit);
    let report = run_experiment(&config).map_err(Failure::data)?;
    eprintln!("{}", report.summary);
    write_json(&report, args.out.as_deref())
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => serde_json::from_str::<SynthSpec>(&read_text(path)?)
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?,
        None => SynthSpec::preset(args.signal, args.by, args.speakers, args.turns, args.seed),
    };
    if args.emit_spec {
        spec.validate().map_err(Failure::data)?;
        return write_json(&spec, None);
    }
    let dir: PathBuf = args.out.expect("clap requires --out without --emit-spec");
    let summary = synth::write_corpus(&spec, &dir).map_err(Failure::data)?;
    write_json(&summary, None)
}
