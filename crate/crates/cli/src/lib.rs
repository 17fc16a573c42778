//! The `textmatch` pipeline: prepare, train, predict and eval, driven by one JSON config.
//!
//! Every command reads and writes plain files in an output directory, so
//! the stages can be run separately and their outputs inspected.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use textmatch::dataprep::{
    load_embeddings, parse_raw_pairs, parse_relations, prepare, write_relations, Corpus, PrepareOptions, VocabFilter,
    Vocabulary,
};
use textmatch::evaluation::{
    evaluate_run, format_trec_run, parse_trec_run, EvalReport, Metric, QrelSet, RankedRun,
};
use textmatch::models::{ArciConfig, DrmmConfig, MatchPyramidConfig, MatchSrnnConfig, Model, ModelConfig, ModelKind};
use textmatch::training::{
    score_relations, train, BatchingConfig, Objective, OptimizerConfig, TrainReport, Validation,
};

pub const WORD_DICT_FILE: &str = "word_dict.txt";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const RELATION_FILE: &str = "relation.txt";
pub const QRELS_FILE: &str = "qrels.txt";
pub const MODEL_FILE: &str = "model.bin";
pub const REPORT_FILE: &str = "train_report.tsv";
pub const SCORES_FILE: &str = "scores.tsv";
pub const RUN_FILE: &str = "run.trec";
pub const EVAL_FILE: &str = "eval_per_query.tsv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or an invalid config file.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] textmatch::Error),
}

impl CliError {
    /// 1 for usage and config errors, 2 for data errors, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        use textmatch::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::Config(_) => 1,
                E::Parse { .. } | E::Data(_) | E::IndexOutOfRange { .. } | E::MissingInput(_) | E::Format(_) | E::Io(_) => 2,
                E::Shape { .. } | E::NonFinite(_) => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Io {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, format!("{what} not found")),
        })
    }
}

fn one() -> u64 {
    1
}
fn one_f() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// `label<TAB>text_left<TAB>text_right` lines, relative to the config file.
    pub raw: PathBuf,
    pub left_length: usize,
    pub right_length: usize,
    #[serde(default = "one")]
    pub min_count: u64,
    #[serde(default = "one_f")]
    pub max_doc_fraction: f64,
    #[serde(default)]
    pub stopwords: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub embedding_dim: usize,
    #[serde(default)]
    pub mlp: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Word vectors, relative to the config file; absent means random initialisation.
    #[serde(default)]
    pub embedding_file: Option<PathBuf>,
    #[serde(default = "yes")]
    pub trainable_embeddings: bool,
    #[serde(default)]
    pub arci: ArciConfig,
    #[serde(default)]
    pub matchpyramid: MatchPyramidConfig,
    #[serde(default)]
    pub drmm: DrmmConfig,
    #[serde(default)]
    pub matchsrnn: MatchSrnnConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub objective: Objective,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub batching: BatchingConfig,
    /// Metric computed on the training relations after each epoch, e.g. `map`.
    #[serde(default)]
    pub validation_metric: Option<String>,
}

fn default_metrics() -> Vec<String> {
    ["map", "ndcg", "p", "mrr"].map(String::from).to_vec()
}
fn default_k_values() -> Vec<usize> {
    vec![1, 3, 5]
}
fn default_run_name() -> String {
    "textmatch".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    /// `map`, `mrr`, `p@k`, `ndcg@k`, or `p` / `ndcg` expanded over `k_values`.
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default = "default_run_name")]
    pub run_name: String,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection { metrics: default_metrics(), k_values: default_k_values(), run_name: default_run_name() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

impl RunConfig {
    /// Parses and validates a config; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.data.raw = base.join(&cfg.data.raw);
        if let Some(p) = &cfg.model.embedding_file {
            cfg.model.embedding_file = Some(base.join(p));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Cross-section checks run before any command does work.
    pub fn validate(&self) -> Result<()> {
        if self.data.left_length == 0 || self.data.right_length == 0 {
            return Err(CliError::Usage("data.left_length and data.right_length must be at least 1".into()));
        }
        self.training.objective.validate()?;
        self.training.optimizer.validate()?;
        self.training.batching.check_compatible(&self.training.objective)?;
        self.metrics()?;
        self.validation_metric()?;
        let name = &self.evaluation.run_name;
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(CliError::Usage(format!("evaluation.run_name `{name}` must be one non-empty word")));
        }
        self.model_config(2).validate()?;
        Ok(())
    }

    /// Overrides both the model and the training seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.model.seed = seed;
        self.training.optimizer.seed = seed;
    }

    pub fn metrics(&self) -> Result<Vec<Metric>> {
        Ok(Metric::expand(&self.evaluation.metrics, &self.evaluation.k_values)?)
    }

    fn validation_metric(&self) -> Result<Option<Metric>> {
        Ok(self.training.validation_metric.as_deref().map(str::parse).transpose()?)
    }

    pub fn filter(&self) -> VocabFilter {
        VocabFilter {
            min_count: self.data.min_count,
            max_doc_fraction: self.data.max_doc_fraction,
            stopwords: self.data.stopwords.iter().cloned().collect(),
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            kind: m.kind,
            vocab_size,
            embedding_dim: m.embedding_dim,
            left_length: self.data.left_length,
            right_length: self.data.right_length,
            mlp: m.mlp.clone(),
            seed: m.seed,
            embedding_file: None,
            trainable_embeddings: m.trainable_embeddings,
            arci: m.arci.clone(),
            matchpyramid: m.matchpyramid.clone(),
            drmm: m.drmm.clone(),
            matchsrnn: m.matchsrnn.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrepareSummary {
    pub vocab_size: usize,
    pub left_texts: usize,
    pub right_texts: usize,
    pub relations: usize,
}

impl std::fmt::Display for PrepareSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "vocabulary size\t{}", self.vocab_size)?;
        writeln!(f, "left texts\t{}", self.left_texts)?;
        writeln!(f, "right texts\t{}", self.right_texts)?;
        write!(f, "relations\t{}", self.relations)
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })
}

/// Writes the word dictionary, corpus, relation and qrels files into `out`.
pub fn cmd_prepare(cfg: &RunConfig, out: &Path) -> Result<PrepareSummary> {
    require(&cfg.data.raw, "raw input file")?;
    let pairs = parse_raw_pairs(&read(&cfg.data.raw)?)?;
    let options = PrepareOptions {
        left_length: cfg.data.left_length,
        right_length: cfg.data.right_length,
        filter: cfg.filter(),
    };
    let prepared = prepare(&pairs, &options)?;
    create_dir(out)?;
    write(&out.join(WORD_DICT_FILE), prepared.vocab.to_dictionary())?;
    write(&out.join(CORPUS_FILE), prepared.corpus.to_text())?;
    write(&out.join(RELATION_FILE), write_relations(&prepared.relations))?;
    write(&out.join(QRELS_FILE), QrelSet::from_relations(&prepared.relations).to_text())?;
    Ok(PrepareSummary {
        vocab_size: prepared.vocab.size(),
        left_texts: prepared.num_left,
        right_texts: prepared.num_right,
        relations: prepared.relations.len(),
    })
}

struct PreparedFiles {
    vocab: Vocabulary,
    corpus: Corpus,
}

fn load_prepared(out: &Path) -> Result<PreparedFiles> {
    let dict = out.join(WORD_DICT_FILE);
    let corpus = out.join(CORPUS_FILE);
    require(&dict, "word dictionary")?;
    require(&corpus, "corpus file")?;
    Ok(PreparedFiles { vocab: Vocabulary::parse_dictionary(&read(&dict)?)?, corpus: Corpus::parse(&read(&corpus)?)? })
}

fn load_relations(path: &Path) -> Result<Vec<textmatch::dataprep::RelationRecord>> {
    require(path, "relation file")?;
    Ok(parse_relations(&read(path)?)?)
}

/// Trains a model on the prepared files in `out`; writes the model to `model_path` and the report into `out`.
pub fn cmd_train(cfg: &RunConfig, out: &Path, model_path: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    if let Some(p) = &cfg.model.embedding_file {
        require(p, "embedding file")?;
    }
    let prepared = load_prepared(out)?;
    let relations = load_relations(&out.join(RELATION_FILE))?;
    let config = cfg.model_config(prepared.vocab.size());
    let mut model = match &cfg.model.embedding_file {
        Some(path) => {
            let table = load_embeddings(&read(path)?, &prepared.vocab, config.embedding_dim, config.seed)?;
            Model::build_with_embeddings(&config, table)?
        }
        None => Model::build_with_vocab(&config, &prepared.vocab)?,
    };
    let validation = cfg.validation_metric()?.map(|metric| Validation {
        relations: &relations,
        corpus: &prepared.corpus,
        metric,
    });
    let t = &cfg.training;
    let report = train(&mut model, &relations, &prepared.corpus, &t.objective, &t.batching, &t.optimizer, validation)?;
    if let Some(dir) = model_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(model_path, model.to_bytes())?;
    write(&out.join(REPORT_FILE), report.to_text())?;
    Ok(report)
}

/// Scores every relation; writes `scores.tsv` and a TREC run into `out`. Returns the number of scored pairs.
pub fn cmd_predict(cfg: &RunConfig, out: &Path, model_path: &Path, relations_path: &Path) -> Result<usize> {
    require(model_path, "model file")?;
    let bytes = std::fs::read(model_path).map_err(|source| CliError::Io { path: model_path.to_path_buf(), source })?;
    let model = Model::from_bytes(&bytes)?;
    let corpus_path = out.join(CORPUS_FILE);
    require(&corpus_path, "corpus file")?;
    let corpus = Corpus::parse(&read(&corpus_path)?)?;
    let relations = load_relations(relations_path)?;
    let c = model.config();
    for r in &relations {
        for (tid, expected) in [(&r.left, c.left_length), (&r.right, c.right_length)] {
            let len = corpus.lookup(tid)?.wids.len();
            if len != expected {
                return Err(textmatch::Error::Data(format!(
                    "text `{tid}` has length {len} but the model expects {expected}"
                ))
                .into());
            }
        }
    }
    let scores = score_relations(&model, &relations, &corpus)?;

    let mut table = String::new();
    for (r, s) in relations.iter().zip(&scores) {
        let _ = writeln!(table, "{}\t{}\t{:.6}", r.left, r.right, s);
    }
    let mut seen = HashSet::new();
    let unique = relations
        .iter()
        .zip(&scores)
        .filter(|(r, _)| seen.insert((r.left.as_str(), r.right.as_str())))
        .map(|(r, &s)| (r.left.as_str(), r.right.as_str(), s));
    let run = RankedRun::from_scores(unique)?;
    create_dir(out)?;
    write(&out.join(SCORES_FILE), table)?;
    write(&out.join(RUN_FILE), format_trec_run(&run, &cfg.evaluation.run_name))?;
    Ok(relations.len())
}

/// Evaluates a TREC run against qrels; writes the per-query table to `table_path`.
pub fn cmd_eval(run_path: &Path, qrels_path: &Path, metrics: &[Metric], table_path: &Path) -> Result<EvalReport> {
    if metrics.is_empty() {
        return Err(CliError::Usage("no metrics requested".into()));
    }
    require(run_path, "run file")?;
    require(qrels_path, "qrels file")?;
    let run = parse_trec_run(&read(run_path)?)?;
    let qrels = QrelSet::parse(&read(qrels_path)?)?;
    let report = evaluate_run(&run, &qrels, metrics)?;
    if let Some(dir) = table_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(table_path, report.per_query_table())?;
    Ok(report)
}

