use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sentivec::baseline::{load_svm, save_svm, SvmClassifier, SvmConfig};
use sentivec::bilstm::train::{EpochRecord, TrainConfig};
use sentivec::bilstm::{load_model, save_model, InputMode};
use sentivec::corpus::{
    build_vocabulary, corpus_stats, corpus_to_jsonl, load_corpus_with, split, synth_corpus_annotated, Document, Label,
    NormalizationTable, PositionMode, Vocabulary,
};
use sentivec::embeddings::{load_embeddings_for, save_embeddings, train_skipgram, EmbeddingConfig, EmbeddingMatrix};
use sentivec::evaluation::{case_study, compare_predictions, CaseStudyRecord, DocumentClassifier};
use sentivec::format::write_atomic;
use sentivec::optim::AdamConfig;
use sentivec::paragraph_vector::{load_pv, save_pv, train_pv, ParagraphVectorizer, PvConfig, PvMode};
use sentivec::pipeline::{predict_all, train_classifier, BiLstmClassifier};
use sentivec::rng::derive_seed;

use crate::config::Settings;
use crate::exit::CliError;

type CmdResult = Result<String, CliError>;

/// Which classifier a command works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    We,
    PvWe,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::We, ModelKind::PvWe, ModelKind::Svm];

    fn parse(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "we" => Ok(ModelKind::We),
            "pv-we" | "pvwe" | "pv+we" => Ok(ModelKind::PvWe),
            "svm" | "baseline" => Ok(ModelKind::Svm),
            other => Err(CliError::usage(format!(
                "unknown mode {other:?} (expected we, pv-we or svm)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::We => "we",
            ModelKind::PvWe => "pv-we",
            ModelKind::Svm => "svm",
        }
    }

    fn input_mode(self) -> Option<InputMode> {
        match self {
            ModelKind::We => Some(InputMode::WordEmbedding),
            ModelKind::PvWe => Some(InputMode::ParagraphVector),
            ModelKind::Svm => None,
        }
    }
}

/// Artifact locations inside the output directory.
struct Layout {
    out: PathBuf,
}

impl Layout {
    fn new(settings: &Settings) -> Result<Self, CliError> {
        let out = settings.out();
        std::fs::create_dir_all(&out).map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
        Ok(Layout { out })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn corpus(&self) -> PathBuf {
        self.file("corpus.jsonl")
    }

    fn embeddings(&self) -> PathBuf {
        self.file("embeddings.bin")
    }

    fn pv(&self, mode: PvMode) -> PathBuf {
        match mode {
            PvMode::Dm => self.file("pv_dm.bin"),
            PvMode::Dbow => self.file("pv_dbow.bin"),
        }
    }

    fn model(&self, kind: ModelKind) -> PathBuf {
        self.file(&format!("model-{}.bin", kind.name()))
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(CliError::from)
}

fn norm_table(settings: &Settings) -> Result<NormalizationTable, CliError> {
    match settings.path("norm-table") {
        Some(p) => Ok(NormalizationTable::load(&p)?),
        None => Ok(NormalizationTable::default()),
    }
}

fn require(path: &Path, what: &str, command: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(what, path, command))
    }
}

/// The corpus in `<out>/corpus.jsonl`, split into training and validation
/// parts with the derived split seed.
struct Prepared {
    train: Vec<Document>,
    validation: Vec<Document>,
    vocab: Vocabulary,
}

fn prepared(settings: &Settings, layout: &Layout) -> Result<Prepared, CliError> {
    let path = layout.corpus();
    require(&path, "corpus", "preprocess` or `sentivec synth")?;
    let docs = load_corpus_with(&path, &norm_table(settings)?)?;
    let seed: u64 = settings.get("seed")?;
    let fraction: f64 = settings.get("validation-fraction")?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::usage(format!(
            "validation-fraction {fraction} outside (0, 1)"
        )));
    }
    let (train, validation) = split(&docs, fraction, derive_seed(seed, "split"))?;
    let vocab = build_vocabulary(&train, settings.get("min-count")?)?;
    Ok(Prepared {
        train,
        validation,
        vocab,
    })
}

fn embedding_config(settings: &Settings) -> Result<EmbeddingConfig, CliError> {
    let cfg = EmbeddingConfig {
        dim: settings.get("embedding-dim")?,
        window: settings.get("window")?,
        negatives: settings.get("negatives")?,
        epochs: settings.get("embedding-epochs")?,
        subsample: settings.get("subsample")?,
        seed: derive_seed(settings.get("seed")?, "embeddings"),
        ..EmbeddingConfig::default()
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn pv_config(settings: &Settings) -> Result<PvConfig, CliError> {
    let cfg = PvConfig {
        dim: settings.get("pv-dim")?,
        window: settings.get("window")?,
        negatives: settings.get("negatives")?,
        epochs: settings.get("pv-epochs")?,
        infer_steps: settings.get("infer-steps")?,
        seed: derive_seed(settings.get("seed")?, "paragraph-vectors"),
        ..PvConfig::default()
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn train_config(settings: &Settings, kind: ModelKind) -> Result<TrainConfig, CliError> {
    let cfg = TrainConfig {
        hidden_size: settings.get("hidden-size")?,
        dropout: settings.get("dropout")?,
        adam: AdamConfig {
            learning_rate: settings.get("learning-rate")?,
            ..AdamConfig::default()
        },
        batch_size: settings.get("batch-size")?,
        max_epochs: settings.get("epochs")?,
        patience: settings.get("patience")?,
        min_delta: settings.get("min-delta")?,
        seed: derive_seed(settings.get("seed")?, &format!("train-{}", kind.name())),
        target_accuracy: settings.opt("target-accuracy")?,
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn svm_config(settings: &Settings) -> Result<SvmConfig, CliError> {
    let cfg = SvmConfig {
        lambda: settings.get("svm-lambda")?,
        epochs: settings.get("svm-epochs")?,
        seed: derive_seed(settings.get("seed")?, "svm"),
    };
    if !(cfg.lambda > 0.0) || cfg.epochs == 0 {
        return Err(CliError::usage("svm-lambda must be positive and svm-epochs >= 1"));
    }
    Ok(cfg)
}

pub fn synth(settings: &Settings) -> CmdResult {
    let layout = Layout::new(settings)?;
    let seed: u64 = settings.get("seed")?;
    let n: usize = settings.get("n")?;
    let test_n: usize = settings.opt("test-n")?.unwrap_or(n / 5);
    // `--mode` doubles as the position flag here when it names a position.
    let position_text = settings
        .raw("mode")
        .filter(|m| m.parse::<PositionMode>().is_ok())
        .or(settings.raw("position"))
        .unwrap_or("mixed")
        .to_string();
    let position: PositionMode = position_text.parse().map_err(|e| CliError::usage(format!("{e}")))?;
    let test_position: PositionMode = match settings.raw("test-position") {
        Some(t) => t.parse().map_err(|e| CliError::usage(format!("{e}")))?,
        None => position,
    };
    if n < 2 {
        return Err(CliError::usage("synth needs n >= 2"));
    }

    let train = synth_corpus_annotated(n, position, derive_seed(seed, "synth"));
    let test = synth_corpus_annotated(test_n, test_position, derive_seed(seed, "synth-test"));
    let docs: Vec<Document> = train.into_iter().map(|s| s.document).collect();
    write_text(&layout.corpus(), &corpus_to_jsonl(&docs))?;
    let test_docs: Vec<Document> = test.iter().map(|s| s.document.clone()).collect();
    write_text(&layout.file("test.jsonl"), &corpus_to_jsonl(&test_docs))?;
    let mut carriers = String::new();
    for s in &test {
        let line = serde_json::to_string(&CarrierSpan {
            id: s.document.id.clone(),
            start: s.carrier.start,
            end: s.carrier.end,
        })
        .expect("span serializes");
        carriers.push_str(&line);
        carriers.push('\n');
    }
    write_text(&layout.file("carriers.jsonl"), &carriers)?;
    Ok(format!(
        "synth: wrote {n} training and {test_n} test documents ({position_text}) to {} (seed {seed})",
        layout.out.display()
    ))
}

pub fn preprocess(settings: &Settings) -> CmdResult {
    let layout = Layout::new(settings)?;
    let seed: u64 = settings.get("seed")?;
    let input = settings
        .path("input")
        .ok_or_else(|| CliError::usage("preprocess needs --input <raw corpus>"))?;
    let table = norm_table(settings)?;
    let docs = load_corpus_with(&input, &table)?;
    write_text(&layout.corpus(), &corpus_to_jsonl(&docs))?;
    let stats = corpus_stats(&docs);
    let mut summary = format!(
        "preprocess: {} documents ({} positive, {} negative), {} distinct tokens, longest {}",
        stats.total, stats.positive, stats.negative, stats.vocab_size, stats.max_sequence_length
    );
    if let Some(test_input) = settings.path("test-input") {
        let test = load_corpus_with(&test_input, &table)?;
        write_text(&layout.file("test.jsonl"), &corpus_to_jsonl(&test))?;
        write!(summary, "; {} test documents", test.len()).unwrap();
    }
    write!(summary, " (seed {seed})").unwrap();
    Ok(summary)
}

fn fit_embeddings(settings: &Settings, layout: &Layout, data: &Prepared) -> Result<EmbeddingMatrix, CliError> {
    let cfg = embedding_config(settings)?;
    let emb = train_skipgram(&data.train, &data.vocab, &cfg)?;
    save_embeddings(&emb, layout.embeddings())?;
    Ok(emb)
}

pub fn train_embeddings(settings: &Settings) -> CmdResult {
    let layout = Layout::new(settings)?;
    let data = prepared(settings, &layout)?;
    let emb = fit_embeddings(settings, &layout, &data)?;
    Ok(format!(
        "train-embeddings: {} words x {} dims -> {} (seed {})",
        emb.vocab().len(),
        emb.dim(),
        layout.embeddings().display(),
        settings.get::<u64>("seed")?
    ))
}

fn fit_pv(settings: &Settings, layout: &Layout, data: &Prepared) -> Result<ParagraphVectorizer, CliError> {
    let cfg = pv_config(settings)?;
    let dm = train_pv(&data.train, &data.vocab, PvMode::Dm, &cfg)?;
    let dbow = train_pv(&data.train, &data.vocab, PvMode::Dbow, &cfg)?;
    save_pv(&dm, layout.pv(PvMode::Dm))?;
    save_pv(&dbow, layout.pv(PvMode::Dbow))?;
    Ok(ParagraphVectorizer::new(dm, dbow)?)
}

pub fn train_pv_cmd(settings: &Settings) -> CmdResult {
    let layout = Layout::new(settings)?;
    let data = prepared(settings, &layout)?;
    let pv = fit_pv(settings, &layout, &data)?;
    Ok(format!(
        "train-pv: {} documents, {}-dim paragraph vectors -> {}, {} (seed {})",
        data.train.len(),
        pv.dim(),
        layout.pv(PvMode::Dm).display(),
        layout.pv(PvMode::Dbow).display(),
        settings.get::<u64>("seed")?
    ))
}

fn load_embeddings_checked(
    settings: &Settings,
    layout: &Layout,
    vocab: &Vocabulary,
) -> Result<EmbeddingMatrix, CliError> {
    let path = layout.embeddings();
    require(&path, "word embeddings", "train-embeddings")?;
    load_embeddings_for(&path, vocab, settings.get("embedding-dim")?).map_err(|e| {
        CliError::data(format!(
            "{e}; re-run `sentivec train-embeddings` for the current corpus"
        ))
    })
}

fn load_vectorizer(layout: &Layout) -> Result<ParagraphVectorizer, CliError> {
    let dm_path = layout.pv(PvMode::Dm);
    let dbow_path = layout.pv(PvMode::Dbow);
    require(&dm_path, "PV-DM model", "train-pv")?;
    require(&dbow_path, "PV-DBOW model", "train-pv")?;
    Ok(ParagraphVectorizer::new(load_pv(&dm_path)?, load_pv(&dbow_path)?)?)
}

fn epoch_line(e: &EpochRecord) -> String {
    format!(
        "{}\t{:.6}\t{:.6}\t{:.4}\n",
        e.epoch, e.train_loss, e.validation_loss, e.validation_accuracy
    )
}

pub fn train(settings: &Settings) -> CmdResult {
    let layout = Layout::new(settings)?;
    let seed: u64 = settings.get("seed")?;
    let kind = ModelKind::parse(settings.raw("mode").unwrap_or("pv-we"))?;
    let data = prepared(settings, &layout)?;
    let log_path = layout.file(&format!("train-{}.log", kind.name()));

    if kind == ModelKind::Svm {
        let model = SvmClassifier::fit(&data.train, &svm_config(settings)?)?;
        save_svm(&model, layout.model(kind))?;
        let preds = predict_all(&model, &data.validation)?;
        let correct = preds
            .iter()
            .zip(&data.validation)
            .filter(|(p, d)| **p == d.label)
            .count();
        let accuracy = correct as f64 / data.validation.len() as f64;
        write_text(
            &log_path,
            &format!("features\t{}\nvalidation_accuracy\t{accuracy:.4}\n", model.tfidf.dim()),
        )?;
        return Ok(format!(
            "train: svm validation accuracy {accuracy:.4} -> {} (seed {seed})",
            layout.model(kind).display()
        ));
    }

    let input_mode = kind.input_mode().expect("bilstm kinds have an input mode");
    let cfg = train_config(settings, kind)?;
    // Missing upstream artifacts are produced here rather than failing.
    let emb = if layout.embeddings().exists() {
        load_embeddings_checked(settings, &layout, &data.vocab)?
    } else {
        fit_embeddings(settings, &layout, &data)?
    };
    let pv = match input_mode {
        InputMode::WordEmbedding => None,
        InputMode::ParagraphVector => Some(if layout.pv(PvMode::Dm).exists() && layout.pv(PvMode::Dbow).exists() {
            load_vectorizer(&layout)?
        } else {
            fit_pv(settings, &layout, &data)?
        }),
    };

    let mut log = String::from("epoch\ttrain_loss\tvalidation_loss\tvalidation_accuracy\n");
    let (classifier, report) = train_classifier(
        kind.name(),
        &data.train,
        &data.validation,
        emb,
        pv,
        input_mode,
        &cfg,
        |e| log.push_str(&epoch_line(e)),
    )?;
    writeln!(log, "best_epoch\t{}", report.best_epoch).unwrap();
    writeln!(
        log,
        "stop\t{}",
        serde_json::to_string(&report.stop_reason).unwrap().trim_matches('"')
    )
    .unwrap();
    save_model(classifier.model(), layout.model(kind))?;
    write_text(&log_path, &log)?;
    let best = report.best();
    Ok(format!(
        "train: {} best epoch {} of {} (validation loss {:.4}, accuracy {:.4}) -> {} (seed {seed})",
        kind.name(),
        report.best_epoch,
        report.epochs.len(),
        best.validation_loss,
        best.validation_accuracy,
        layout.model(kind).display()
    ))
}

/// A trained classifier loaded back from `<out>`.
fn load_classifier(layout: &Layout, kind: ModelKind) -> Result<Box<dyn DocumentClassifier>, CliError> {
    let path = layout.model(kind);
    require(
        &path,
        &format!("{} model", kind.name()),
        &format!("train --mode {}", kind.name()),
    )?;
    if kind == ModelKind::Svm {
        return Ok(Box::new(load_svm(&path)?));
    }
    let model = load_model(&path)?;
    let emb_path = layout.embeddings();
    require(&emb_path, "word embeddings", "train-embeddings")?;
    let emb = sentivec::embeddings::load_embeddings(&emb_path)?;
    let pv = match model.input_mode {
        InputMode::WordEmbedding => None,
        InputMode::ParagraphVector => Some(load_vectorizer(layout)?),
    };
    let classifier = BiLstmClassifier::new(kind.name(), model, emb, pv)
        .map_err(|e| CliError::data(format!("{e}; re-run `sentivec train --mode {}`", kind.name())))?;
    Ok(Box::new(classifier))
}

/// The requested model, or every trained one when `--mode` is absent.
fn selected_models(
    settings: &Settings,
    layout: &Layout,
) -> Result<Vec<(ModelKind, Box<dyn DocumentClassifier>)>, CliError> {
    let kinds: Vec<ModelKind> = match settings.raw("mode") {
        Some(m) => vec![ModelKind::parse(m)?],
        None => {
            let present: Vec<ModelKind> = ModelKind::ALL
                .into_iter()
                .filter(|k| layout.model(*k).exists())
                .collect();
            if present.is_empty() {
                return Err(CliError::data(format!(
                    "no trained model in {}; run `sentivec train` first",
                    layout.out.display()
                )));
            }
            present
        }
    };
    kinds
        .into_iter()
        .map(|k| Ok((k, load_classifier(layout, k)?)))
        .collect()
}

fn test_docs(settings: &Settings, layout: &Layout) -> Result<Vec<Document>, CliError> {
    let path = settings.path("test").unwrap_or_else(|| layout.file("test.jsonl"));
    require(&path, "test corpus", "preprocess --test-input` or `sentivec synth")?;
    Ok(load_corpus_with(&path, &norm_table(settings)?)?)
}

pub fn evaluate(settings: &Settings) -> CmdResult {
    let layout = Layout::new(settings)?;
    let models = selected_models(settings, &layout)?;
    let docs = test_docs(settings, &layout)?;
    let mut names = Vec::new();
    let mut predictions = Vec::new();
    for (kind, model) in &models {
        names.push(kind.name().to_string());
        predictions.push(predict_all(model.as_ref(), &docs)?);
    }
    let comparison = compare_predictions(&docs, names, predictions)?;
    write_text(&layout.file("report.tsv"), &comparison.to_tsv())?;
    let json = serde_json::to_string_pretty(&comparison).expect("report serializes");
    write_text(&layout.file("report.json"), &(json + "\n"))?;
    let mut summary = format!("evaluate: {} test documents;", docs.len());
    for r in &comparison.reports {
        write!(
            summary,
            " {} f1 {:.4} acc {:.4};",
            r.model, r.metrics.weighted.f1, r.metrics.accuracy
        )
        .unwrap();
    }
    write!(
        summary,
        " {} disagreements -> {} (seed {})",
        comparison.disagreements.len(),
        layout.file("report.tsv").display(),
        settings.get::<u64>("seed")?
    )
    .unwrap();
    Ok(summary)
}

/// Input line for `predict`; the label is optional.
#[derive(Debug, Deserialize)]
struct PredictRecord {
    id: String,
    text: String,
}

#[derive(Debug, Serialize)]
struct PredictOutput<'a> {
    id: &'a str,
    model: &'a str,
    label: Label,
    score: f64,
}

pub fn predict(settings: &Settings) -> CmdResult {
    if settings.raw("text").is_none() && settings.raw("input").is_none() {
        return Err(CliError::usage("predict needs --text <document> or --input <jsonl>"));
    }
    let layout = Layout::new(settings)?;
    let models = selected_models(settings, &layout)?;
    let table = norm_table(settings)?;
    let mut docs = Vec::new();
    if let Some(text) = settings.raw("text") {
        docs.push(Document::from_text("text", text, Label::Positive, &table)?);
    } else if let Some(path) = settings.path("input") {
        let content = std::fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        for (i, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: PredictRecord =
                serde_json::from_str(line).map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
            docs.push(Document::from_text(r.id, &r.text, Label::Positive, &table)?);
        }
    }

    let mut lines = String::new();
    for doc in &docs {
        for (kind, model) in &models {
            let p = model.predict(doc)?;
            let out = PredictOutput {
                id: &doc.id,
                model: kind.name(),
                label: p.label,
                score: p.score,
            };
            lines.push_str(&serde_json::to_string(&out).expect("prediction serializes"));
            lines.push('\n');
        }
    }
    write_text(&layout.file("predictions.jsonl"), &lines)?;
    Ok(format!(
        "{}predict: {} documents x {} models -> {} (seed {})",
        lines,
        docs.len(),
        models.len(),
        layout.file("predictions.jsonl").display(),
        settings.get::<u64>("seed")?
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct CarrierSpan {
    id: String,
    start: usize,
    end: usize,
}

pub fn case_study_cmd(settings: &Settings) -> CmdResult {
    let layout = Layout::new(settings)?;
    let models = selected_models(settings, &layout)?;
    let docs = test_docs(settings, &layout)?;
    let carriers_path = settings
        .path("carriers")
        .unwrap_or_else(|| layout.file("carriers.jsonl"));
    require(&carriers_path, "carrier spans", "synth")?;
    let content = std::fs::read_to_string(&carriers_path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", carriers_path.display())))?;
    let mut spans = std::collections::HashMap::new();
    for (i, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let span: CarrierSpan = serde_json::from_str(line)
            .map_err(|e| CliError::data(format!("{}:{}: {e}", carriers_path.display(), i + 1)))?;
        spans.insert(span.id.clone(), span.start..span.end);
    }

    let refs: Vec<&dyn DocumentClassifier> = models.iter().map(|(_, m)| m.as_ref()).collect();
    let mut records: Vec<CaseStudyRecord> = Vec::new();
    for doc in &docs {
        let Some(span) = spans.get(&doc.id) else { continue };
        // Carriers already at the end cannot move.
        if span.end == doc.tokens.len() {
            continue;
        }
        records.push(case_study(doc, span.clone(), &refs)?);
    }
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    write_text(&layout.file("case_study.jsonl"), &out)?;
    let mut summary = format!("case-study: {} relocated documents;", records.len());
    for (m, (kind, _)) in models.iter().enumerate() {
        let flips = records.iter().filter(|r| r.outcomes[m].flipped).count();
        let fixed = records
            .iter()
            .filter(|r| r.outcomes[m].flipped && r.outcomes[m].after.label == r.gold)
            .count();
        write!(summary, " {} flipped {flips} ({fixed} to correct);", kind.name()).unwrap();
    }
    write!(
        summary,
        " -> {} (seed {})",
        layout.file("case_study.jsonl").display(),
        settings.get::<u64>("seed")?
    )
    .unwrap();
    Ok(summary)
}
