use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use textmatch::evaluation::Metric;
use textmatch_cli::{
    cmd_eval, cmd_predict, cmd_prepare, cmd_train, CliError, RunConfig, EVAL_FILE, MODEL_FILE, QRELS_FILE,
    RELATION_FILE, RUN_FILE,
};

#[derive(Parser)]
#[command(name = "textmatch", version, about = "Prepare, train, predict and evaluate text matching models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory holding prepared files and outputs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the model and training seeds.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the word dictionary, corpus, relation and qrels files from raw pairs.
    Prepare {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on prepared files.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model output path; defaults to OUT/model.bin.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score relations with a trained model and write scores and a TREC run.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Model path; defaults to OUT/model.bin.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Relations to score; defaults to OUT/relation.txt.
        #[arg(long)]
        relations: Option<PathBuf>,
    },
    /// Evaluate a TREC run against qrels.
    Eval {
        /// Run configuration supplying metrics when --metrics is absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run file; defaults to OUT/run.trec.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Qrels file; defaults to OUT/qrels.txt.
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Comma separated metrics, e.g. `map,ndcg@3,p@1`.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn or_default(path: Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    path.unwrap_or_else(|| out.join(name))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Prepare { common } => {
            let cfg = load(&common)?;
            println!("{}", cmd_prepare(&cfg, &common.out)?);
        }
        Command::Train { common, model } => {
            let cfg = load(&common)?;
            let model = or_default(model, &common.out, MODEL_FILE);
            let start = Instant::now();
            let report = cmd_train(&cfg, &common.out, &model)?;
            print!("{}", report.to_text());
            println!("wall time\t{:.3}s", start.elapsed().as_secs_f64());
            println!("model\t{}", model.display());
        }
        Command::Predict { common, model, relations } => {
            let cfg = load(&common)?;
            let model = or_default(model, &common.out, MODEL_FILE);
            let relations = or_default(relations, &common.out, RELATION_FILE);
            let n = cmd_predict(&cfg, &common.out, &model, &relations)?;
            println!("scored pairs\t{n}");
        }
        Command::Eval { config, out, run, qrels, metrics } => {
            let metrics = match (metrics, config) {
                (Some(names), _) => Metric::expand(&names, &[])?,
                (None, Some(path)) => RunConfig::load(&path)?.metrics()?,
                (None, None) => Metric::expand(&["map".to_string(), "mrr".to_string()], &[])?,
            };
            let run = or_default(run, &out, RUN_FILE);
            let qrels = or_default(qrels, &out, QRELS_FILE);
            let report = cmd_eval(&run, &qrels, &metrics, &out.join(EVAL_FILE))?;
            print!("{}", report.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
