use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use clonevet_core::classifiers::{
    decide, deserialize_model, serialize_model, train, train_fica, DecisionConfig, Model, NaiveBayesConfig,
    NeuralNetConfig, Prediction, TrainerConfig, TrainingSet,
};
use clonevet_core::corpus::{load_java_dir, synthetic_corpus};
use clonevet_core::evaluation::{
    chi_squared_feature_scores, compute_metrics, curve_and_auc, cv_summary, export_type_space, fmt6,
    k_fold_cross_validate, k_fold_cross_validate_pairs, metrics_summary, recommend_gamma, write_chi2_csv,
    write_curve_csv, write_epoch_trace_csv, write_type_space_csv, CVReport, CurveKind,
};
use clonevet_core::features::{
    distribution_report, extract_all, feature_names, read_feature_csv, write_feature_csv, FeatureRow,
};
use clonevet_core::mutation::{generate_benchmark, read_benchmark_dir, write_benchmark_dir};
use clonevet_core::store::{CloneStore, ImportFormat, ImportSpec, TrainingFilter};
use clonevet_core::{ClonePair, CodeFragment, Label};
use clonevet_service::{wire_probabilities, ServiceConfig};

use crate::config::Settings;

/// `println!` that reports a closed stdout instead of panicking.
macro_rules! out {
    ($($t:tt)*) => {
        writeln!(io::stdout().lock(), $($t)*).map_err(CliError::from)
    };
}

macro_rules! out_raw {
    ($($t:tt)*) => {
        write!(io::stdout().lock(), $($t)*).map_err(CliError::from)
    };
}
use crate::{Cli, CliError, Command, DataArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let section = match &cli.command {
        Command::Import(_) => "import",
        Command::Label(_) => "label",
        Command::Features(_) => "features",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Mutate(_) => "mutate",
        Command::Serve(_) => "serve",
        Command::Report(_) => "report",
        Command::Validate(_) => "validate",
    };
    let s = Settings::load(cli.config.as_deref(), section)?;
    match cli.command {
        Command::Import(a) => import(a, &s),
        Command::Label(a) => label(a, &s),
        Command::Features(a) => features(a, &s),
        Command::Train(a) => train_cmd(a, &s),
        Command::Evaluate(a) => evaluate(a, &s),
        Command::Mutate(a) => mutate(a, &s),
        Command::Serve(a) => serve(a, &s),
        Command::Report(a) => report(a, &s),
        Command::Validate(a) => validate(a, &s),
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn gamma_of(v: Option<f64>) -> Result<f64, CliError> {
    let g = v.unwrap_or(0.5);
    DecisionConfig::new(g).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(g)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?))
}

fn open_existing_store(path: &Path) -> Result<CloneStore, CliError> {
    if !path.exists() {
        return Err(CliError::Runtime(format!("no store at {}", path.display())));
    }
    Ok(CloneStore::open(path)?)
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(deserialize_model(&text)?)
}

/// Pairs, or feature rows read back from a feature CSV.
enum Data {
    Pairs(Vec<ClonePair>),
    Rows(Vec<FeatureRow>),
}

fn load_data(d: DataArgs, s: &Settings) -> Result<Data, CliError> {
    let store: Option<PathBuf> = s.or(d.store, "store")?;
    let bench: Option<PathBuf> = s.or(d.bench, "bench")?;
    let feats: Option<PathBuf> = s.or(d.features, "features")?;
    let labelers: Option<Vec<String>> = match d.labeler {
        Some(l) => Some(l),
        None => s.get::<String>("labeler")?.map(|v| v.split(',').map(str::to_string).collect()),
    };
    let given = [store.is_some(), bench.is_some(), feats.is_some()].iter().filter(|&&b| b).count();
    if given != 1 {
        return Err(CliError::Usage("give exactly one of --store, --bench, --features".into()));
    }
    if let Some(p) = store {
        let st = open_existing_store(&p)?;
        return Ok(Data::Pairs(match labelers {
            Some(ls) => st.labeled_pairs(&TrainingFilter { labelers: Some(ls), ..Default::default() }),
            None => st.snapshot().into_iter().map(|r| r.pair).collect(),
        }));
    }
    if let Some(p) = bench {
        return Ok(Data::Pairs(read_benchmark_dir(&p)?.0));
    }
    let p = feats.expect("one source");
    let f = File::open(&p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
    Ok(Data::Rows(read_feature_csv(f)?))
}

/// Feature rows in input order; pairs whose features cannot be computed
/// are dropped with a warning.
fn feature_rows(pairs: &[ClonePair], extras: bool) -> Vec<FeatureRow> {
    pairs
        .iter()
        .zip(extract_all(pairs, extras))
        .filter_map(|(p, r)| match r {
            Ok(features) => Some(FeatureRow { id: p.id.clone(), features, label: p.label }),
            Err(e) => {
                log::warn!("skipping {}: {e}", p.id);
                None
            }
        })
        .collect()
}

fn rows_of(data: &Data, extras: bool) -> Vec<FeatureRow> {
    match data {
        Data::Pairs(p) => feature_rows(p, extras),
        Data::Rows(r) => r.clone(),
    }
}

fn import(a: crate::ImportArgs, s: &Settings) -> Result<(), CliError> {
    let store = need(s.or(a.store, "store")?, "store")?;
    let format: ImportFormat = s
        .or(a.format, "format")?
        .unwrap_or_else(|| "generic-csv".to_string())
        .parse()
        .map_err(|e: clonevet_core::Error| CliError::Usage(e.to_string()))?;
    let path = need(s.or(a.path, "path")?, "path")?;
    let detector = s.or(a.detector, "detector")?;
    let st = CloneStore::open(&store)?;
    let rep = st.import_pairs(&ImportSpec { format, path, detector })?;
    for (row, why) in &rep.malformed {
        eprintln!("row {row}: {why}");
    }
    out!("imported {}", rep.imported)?;
    out!("duplicates {}", rep.duplicates)?;
    out!("malformed {}", rep.malformed.len())?;
    Ok(())
}

fn numbered(text: &str) -> String {
    text.lines().enumerate().map(|(i, l)| format!("{:>4} | {l}\n", i + 1)).collect()
}

fn label(a: crate::LabelArgs, s: &Settings) -> Result<(), CliError> {
    let store = need(s.or(a.store, "store")?, "store")?;
    let labeler = need(s.or(a.labeler, "labeler")?, "labeler")?;
    let limit = s.or(a.limit, "limit")?.unwrap_or(usize::MAX);
    let st = open_existing_store(&store)?;
    let (queue, total) = st.unlabeled_page(0, usize::MAX);
    eprintln!("{total} unlabeled pairs; answer t (true clone), f (false clone), s (skip) or q (quit)");
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut done = 0;
    'pairs: for rec in queue {
        if done >= limit {
            break;
        }
        let p = &rec.pair;
        eprintln!("\n== {} ({})", p.id, p.detector.as_deref().unwrap_or("no detector"));
        eprintln!("-- fragment 1\n{}-- fragment 2\n{}", numbered(&p.fragment1.source_text), numbered(&p.fragment2.source_text));
        loop {
            eprint!("[t/f/s/q] > ");
            let Some(line) = lines.next() else {
                break 'pairs;
            };
            match line?.trim() {
                "q" => break 'pairs,
                "s" => break,
                other => match other.parse::<Label>() {
                    Ok(l) => {
                        st.record_label(&p.id, &labeler, l)?;
                        done += 1;
                        break;
                    }
                    Err(_) => eprintln!("answer t, f, s or q"),
                },
            }
        }
    }
    out!("labeled {done}")?;
    Ok(())
}

fn features(a: crate::FeaturesArgs, s: &Settings) -> Result<(), CliError> {
    let extras = s.flag(a.extras, "extras")?;
    let out: Option<PathBuf> = s.or(a.out, "out")?;
    let data = load_data(a.data, s)?;
    let rows = rows_of(&data, extras);
    match out {
        Some(p) => write_feature_csv(create(&p)?, &rows)?,
        None => write_feature_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

enum Kind {
    Features(TrainerConfig),
    Fica,
}

fn trainer_kind(a: &crate::TrainArgs, s: &Settings, seed: u64) -> Result<Kind, CliError> {
    let name = s.or(a.model.clone(), "model")?.unwrap_or_else(|| "nn".into());
    let mut nn = match name.as_str() {
        "nn" => NeuralNetConfig::default(),
        "deep" => NeuralNetConfig::deep(),
        "nb" | "bayes" => return Ok(Kind::Features(TrainerConfig::NaiveBayes(NaiveBayesConfig::default()))),
        "fica" | "tfidf" => return Ok(Kind::Fica),
        other => return Err(CliError::Usage(format!("unknown model {other:?}; use nn, deep, nb or fica"))),
    };
    nn.seed = seed;
    if let Some(h) = s.or(a.hidden.clone(), "hidden")? {
        nn.hidden_layers = h
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("--hidden: {e}")))?;
    }
    if let Some(e) = s.or(a.epochs, "epochs")? {
        nn.max_epochs = e;
    }
    if let Some(lr) = s.or(a.learning_rate, "learning-rate")? {
        nn.learning_rate = lr;
    }
    if let Some(p) = s.or(a.dropout, "dropout")? {
        nn.dropout_p = p;
    }
    Ok(Kind::Features(TrainerConfig::NeuralNet(nn)))
}

fn labeled_pairs(data: &Data) -> Result<Vec<ClonePair>, CliError> {
    match data {
        Data::Pairs(p) => Ok(p.iter().filter(|p| p.label.is_some()).cloned().collect()),
        Data::Rows(_) => Err(CliError::Usage("the TF-IDF baseline needs --store or --bench, not --features".into())),
    }
}

fn write_cv_outputs(r: &CVReport, report: Option<PathBuf>, trace: Option<PathBuf>) -> Result<(), CliError> {
    if let Some(p) = report {
        let mut w = create(&p)?;
        serde_json::to_writer_pretty(&mut w, r)?;
        w.flush()?;
    }
    if let Some(p) = trace {
        write_epoch_trace_csv(create(&p)?, &r.epoch_trace)?;
    }
    Ok(())
}

fn train_cmd(a: crate::TrainArgs, s: &Settings) -> Result<(), CliError> {
    let seed = s.or(a.seed, "seed")?.unwrap_or(42);
    let k = s.or(a.k, "k")?.unwrap_or(10);
    let gamma = gamma_of(s.or(a.gamma, "gamma")?)?;
    let extras = s.flag(a.extras, "extras")?;
    let out: Option<PathBuf> = s.or(a.out.clone(), "out")?;
    let report: Option<PathBuf> = s.or(a.report.clone(), "report")?;
    let trace: Option<PathBuf> = s.or(a.trace.clone(), "trace")?;
    let kind = trainer_kind(&a, s, seed)?;
    let data = load_data(a.data, s)?;

    let (model, cv) = match kind {
        Kind::Fica => {
            let pairs = labeled_pairs(&data)?;
            let cv = if k >= 2 { Some(k_fold_cross_validate_pairs(&pairs, k, seed, gamma)?) } else { None };
            (Model::TfIdf(train_fica(&pairs)?), cv)
        }
        Kind::Features(cfg) => {
            let ts = TrainingSet::from_feature_rows(rows_of(&data, extras));
            ts.check_trainable()?;
            eprintln!("training on {} rows ({} true, {} false)", ts.len(), ts.class_counts()[0], ts.class_counts()[1]);
            let cv = if k >= 2 { Some(k_fold_cross_validate(&ts, k, &cfg, seed, gamma)?) } else { None };
            (train(&ts, &cfg)?, cv)
        }
    };
    if let Some(r) = &cv {
        out_raw!("{}", cv_summary(r))?;
        out!("cv mean accuracy {}", fmt6(r.mean.accuracy))?;
        write_cv_outputs(r, report, trace)?;
    }
    if let Some(p) = out {
        let mut w = create(&p)?;
        w.write_all(serialize_model(&model)?.as_bytes())?;
        w.flush()?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

/// Predictions and labels for every labeled item the model can score.
fn score(model: &Model, data: &Data) -> Result<(Vec<String>, Vec<FeatureRow>, Vec<Prediction>, Vec<Label>), CliError> {
    let extras = model.input_dim() > clonevet_core::features::FEATURE_NAMES.len();
    let rows: Vec<FeatureRow> = rows_of(data, extras).into_iter().filter(|r| r.label.is_some()).collect();
    let preds = match model {
        Model::TfIdf(_) => {
            let pairs = labeled_pairs(data)?;
            let by_id: std::collections::HashMap<&str, &ClonePair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
            rows.iter().map(|r| model.predict_pair(by_id[r.id.as_str()])).collect::<Result<Vec<_>, _>>()?
        }
        _ => rows.iter().map(|r| model.predict(&r.features)).collect::<Result<Vec<_>, _>>()?,
    };
    let labels = rows.iter().map(|r| r.label.expect("filtered")).collect();
    let ids = rows.iter().map(|r| r.id.clone()).collect();
    Ok((ids, rows, preds, labels))
}

fn evaluate(a: crate::EvaluateArgs, s: &Settings) -> Result<(), CliError> {
    let model = load_model(&need(s.or(a.model, "model")?, "model")?)?;
    let gamma = gamma_of(s.or(a.gamma, "gamma")?)?;
    let curves: Option<PathBuf> = s.or(a.curves, "curves")?;
    let chi2: Option<PathBuf> = s.or(a.chi2, "chi2")?;
    let data = load_data(a.data, s)?;
    let (_, rows, preds, labels) = score(&model, &data)?;
    if preds.is_empty() {
        return Err(CliError::Runtime("no labeled pairs to evaluate".into()));
    }
    let m = compute_metrics(&preds, &labels, gamma)?;
    out!("model      {}", model.kind())?;
    out!("pairs      {}", preds.len())?;
    out_raw!("{}", metrics_summary(&m))?;
    let both = labels.contains(&Label::TruePositive) && labels.contains(&Label::FalsePositive);
    if both {
        let roc = curve_and_auc(&preds, &labels, CurveKind::Roc)?;
        let pr = curve_and_auc(&preds, &labels, CurveKind::Pr)?;
        out!("roc_auc    {}", fmt6(roc.auc))?;
        out!("pr_auc     {}", fmt6(pr.auc))?;
        out!("recommended_gamma {}", fmt6(recommend_gamma(&roc)))?;
        if let Some(dir) = curves {
            fs::create_dir_all(&dir)?;
            write_curve_csv(create(&dir.join("roc.csv"))?, &roc)?;
            write_curve_csv(create(&dir.join("pr.csv"))?, &pr)?;
        }
        let pairs: Vec<_> = rows.iter().map(|r| (r.features.clone(), r.label.expect("labeled"))).collect();
        let names = feature_names(pairs[0].0.has_extras());
        let scores = chi_squared_feature_scores(&pairs, &names)?;
        out!("chi2")?;
        for sc in &scores {
            out!("  {:<22} {} {}", sc.name, fmt6(sc.chi2), fmt6(sc.normalized))?;
        }
        if let Some(p) = chi2 {
            write_chi2_csv(create(&p)?, &scores)?;
        }
    } else {
        eprintln!("only one class present; curves and chi-squared scores skipped");
    }
    Ok(())
}

fn parse_mix(s: &str) -> Result<[f64; 9], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--mix: {e}")))?;
    v.try_into().map_err(|v: Vec<f64>| CliError::Usage(format!("--mix needs 9 weights, got {}", v.len())))
}

fn mutate(a: crate::MutateArgs, s: &Settings) -> Result<(), CliError> {
    let seed = s.or(a.seed, "seed")?.unwrap_or(42);
    let t = s.or(a.true_count, "true")?.unwrap_or(500);
    let f = s.or(a.false_count, "false")?.unwrap_or(500);
    let out = need(s.or(a.out, "out")?, "out")?;
    let mix = match s.or(a.mix, "mix")? {
        Some(m) => parse_mix(&m)?,
        None => [1.0; 9],
    };
    let min_lines = s.or(a.min_lines, "min-lines")?.unwrap_or(3);
    let corpus_dir: Option<PathBuf> = s.or(a.corpus, "corpus")?;
    let synth: Option<usize> = s.or(a.synthetic_files, "synthetic-files")?;
    let corpus = match (corpus_dir, synth) {
        (Some(dir), None) => load_java_dir(&dir, min_lines)?,
        (None, Some(files)) => {
            let methods = s.or(a.synthetic_methods, "synthetic-methods")?.unwrap_or(10);
            synthetic_corpus(files, methods, seed)
        }
        _ => return Err(CliError::Usage("give exactly one of --corpus, --synthetic-files".into())),
    };
    eprintln!("corpus of {} fragments", corpus.len());
    let (pairs, manifest) = generate_benchmark(&corpus, t, f, &mix, seed)?;
    write_benchmark_dir(&out, &pairs, &manifest)?;
    out!("pairs {}", pairs.len())?;
    for (k, v) in manifest.counts_by_label() {
        out!("label {k} {v}")?;
    }
    for (k, v) in manifest.counts_by_clone_type() {
        out!("type {k} {v}")?;
    }
    for (k, v) in manifest.counts_by_operator() {
        out!("operator {k} {v}")?;
    }
    Ok(())
}

fn serve(a: crate::ServeArgs, s: &Settings) -> Result<(), CliError> {
    let defaults = ServiceConfig::default();
    let config = ServiceConfig {
        port: s.or(a.port, "port")?.unwrap_or(defaults.port),
        store_path: s.or(a.store, "store")?,
        model_path: s.or(a.model, "model")?,
        default_gamma: gamma_of(s.or(a.gamma, "gamma")?)?,
        cors_origin: s.or(a.cors_origin, "cors-origin")?,
        cv_folds: s.or(a.k, "k")?.unwrap_or(defaults.cv_folds),
        seed: s.or(a.seed, "seed")?.unwrap_or(defaults.seed),
        ..defaults
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(clonevet_service::serve(config))?;
    Ok(())
}

fn report(a: crate::ReportArgs, s: &Settings) -> Result<(), CliError> {
    let json_out: Option<PathBuf> = s.or(a.json, "json")?;
    let type_space: Option<PathBuf> = s.or(a.type_space, "type-space")?;
    let model_path: Option<PathBuf> = s.or(a.model, "model")?;
    let gamma = gamma_of(s.or(a.gamma, "gamma")?)?;
    let data = load_data(a.data, s)?;
    let rows: Vec<_> = rows_of(&data, false)
        .into_iter()
        .filter_map(|r| r.label.map(|l| (r.features, l)))
        .collect();
    let dist = distribution_report(&rows)?;
    out_raw!("{}", dist.summary())?;
    let names = feature_names(false);
    let scores = chi_squared_feature_scores(&rows, &names)?;
    out!("feature,chi2,normalized")?;
    for sc in &scores {
        out!("{},{},{}", sc.name, fmt6(sc.chi2), fmt6(sc.normalized))?;
    }
    if let Some(p) = json_out {
        let mut w = create(&p)?;
        serde_json::to_writer_pretty(&mut w, &dist)?;
        w.flush()?;
    }
    if let Some(p) = type_space {
        let model = load_model(&need(model_path, "model")?)?;
        let (ids, frows, preds, labels) = score(&model, &data)?;
        let feats: Vec<_> = frows.into_iter().map(|r| r.features).collect();
        let ts = export_type_space(&ids, &feats, &preds, &labels, gamma)?;
        write_type_space_csv(create(&p)?, &ts)?;
    }
    Ok(())
}

fn validate(a: crate::ValidateArgs, s: &Settings) -> Result<(), CliError> {
    let model = load_model(&need(s.or(a.model, "model")?, "model")?)?;
    let gamma = gamma_of(s.or(a.gamma, "gamma")?)?;
    let read = |p: PathBuf| {
        fs::read_to_string(&p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
    };
    let a_text = read(need(a.a, "a")?)?;
    let b_text = read(need(a.b, "b")?)?;
    let pair = ClonePair::new("cli", CodeFragment::java(a_text), CodeFragment::java(b_text));
    let pred = model.predict_pair(&pair)?;
    let (pf, pt) = wire_probabilities(&pred);
    let decision = decide(&pred, &DecisionConfig { gamma });
    let body = json!({
        "output": { "prob_false_clone_pair": pf, "prob_true_clone_pair": pt },
        "log_msg": format!("normalization, feature extraction, prediction: {}", model.kind()),
        "error_msg": null,
        "decision": decision.to_string(),
        "gamma_used": gamma,
    });
    out!("{}", serde_json::to_string_pretty(&body)?)?;
    Ok(())
}
