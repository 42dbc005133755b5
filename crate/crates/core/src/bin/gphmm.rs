use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use gphmm::artifact::{self, ModelSetFile};
use gphmm::classify::Classification;
use gphmm::config::RunConfig;
use gphmm::evaluate::{render_table, sweep_csv, threshold_sweep, decisions_csv};
use gphmm::image_io::encode_pgm_normalized;
use gphmm::manifest::{Manifest, Role};
use gphmm::pipeline::{run_pipeline, FeatureExtractor, Recognizer};
use gphmm::{Error, Result};

const OUT_DIR_ENV: &str = "GPHMM_OUT_DIR";

#[derive(Parser)]
#[command(name = "gphmm", version, about = "Gabor features + cyclic pseudo-HMM face identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the fused Gabor feature image of one input image.
    Gabor {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a min-max normalized PGM preview.
        #[arg(long)]
        pgm: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the sampling plan summary, or every block with --dump.
    Plan {
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV of index,x0,y0 in scan order.
        #[arg(long)]
        dump: bool,
    },
    /// Turn a feature image into an observation sequence.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the train entries of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to $GPHMM_OUT_DIR, then the current directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Classify one image; prints the class id and the per-class score table.
    Classify {
        /// model.json (shared) or models.json (per-class).
        #[arg(long)]
        model: PathBuf,
        /// Required with a shared model.
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the full protocol and write the report.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to report.json under $GPHMM_OUT_DIR or the current directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-probe decisions CSV.
        #[arg(long)]
        decisions: Option<PathBuf>,
        /// Counts at every distinct probe distance, as CSV.
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Write every intermediate artifact under this directory.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Build a manifest from a root/<subject>/<image> tree.
    Manifest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 5)]
        train: usize,
        /// Positive probes per subject; all remaining images if omitted.
        #[arg(long)]
        probe: Option<usize>,
        /// Negative probes per subject, drawn from other subjects.
        #[arg(long, default_value_t = 0)]
        negatives: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
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

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gabor { input, out, pgm, config } => {
            let ex = FeatureExtractor::new(&load_config(config.as_deref())?)?;
            let gf = ex.feature_image(&ex.load(&input)?)?;
            artifact::write_feature_image(&out, &gf)?;
            if let Some(p) = pgm {
                artifact::write_bytes(&p, &encode_pgm_normalized(gf.grid(), true))?;
            }
            info!("wrote {}", out.display());
        }
        Command::Plan { config, dump } => {
            let ex = FeatureExtractor::new(&load_config(config.as_deref())?)?;
            let plan = ex.plan();
            if dump {
                println!("index,x0,y0");
                for (i, &b) in ex.order().iter().enumerate() {
                    let o = plan.blocks()[b];
                    println!("{i},{},{}", o.x0, o.y0);
                }
            } else {
                println!(
                    "strips={} rows_per_strip={} blocks_per_row={} T={}",
                    plan.n_strips,
                    plan.rows_per_strip,
                    plan.blocks_per_row,
                    plan.len()
                );
            }
        }
        Command::Extract { input, config, out } => {
            let ex = FeatureExtractor::new(&load_config(config.as_deref())?)?;
            let gf = artifact::read_feature_image(&input)?;
            let seq = ex.observations(&gf, &input.to_string_lossy())?;
            artifact::write_sequence(&out, &seq)?;
        }
        Command::Train { manifest, config, out_dir: dir } => {
            let config = load_config(config.as_deref())?;
            let mut m = Manifest::load(&manifest)?;
            m.entries.retain(|e| e.role == Role::Train);
            let a = run_pipeline(&m, &config)?;
            let dir = out_dir(dir);
            if let Some(f) = a.model_file() {
                artifact::write_json(&dir.join("model.json"), &f)?;
            }
            if let Some(f) = a.classifier_file() {
                artifact::write_json(&dir.join("classifier.json"), &f)?;
            }
            if let Some(f) = a.model_set_file() {
                artifact::write_json(&dir.join("models.json"), &f)?;
            }
            for t in &a.system.training {
                info!(
                    "baum-welch: {} iterations, converged={}, log-likelihood {:?}",
                    t.iterations,
                    t.converged,
                    t.log_likelihoods.last()
                );
            }
            println!("tau={}", a.system.tau);
        }
        Command::Classify {
            model,
            classifier,
            input,
            config,
        } => {
            let ex = FeatureExtractor::new(&load_config(config.as_deref())?)?;
            let recognizer = load_recognizer(&model, classifier.as_deref(), ex.fingerprint())?;
            let (_, seq) = ex.process(&ex.load(&input)?, &input.to_string_lossy())?;
            print_classification(&recognizer, &recognizer.score(&seq.values)?);
        }
        Command::Eval {
            manifest,
            config,
            out,
            decisions,
            sweep,
            artifacts,
        } => {
            let config = load_config(config.as_deref())?;
            let m = Manifest::load(&manifest)?;
            let a = run_pipeline(&m, &config)?;
            let out = out.unwrap_or_else(|| out_dir(None).join("report.json"));
            artifact::write_json(&out, &a.report)?;
            if let Some(p) = decisions {
                artifact::write_bytes(&p, decisions_csv(&a.outcomes, a.report.tau, a.report.negative_rule).as_bytes())?;
            }
            if let Some(p) = sweep {
                let mut taus: Vec<f64> = a
                    .outcomes
                    .iter()
                    .flat_map(|o| [o.best_score, o.own_class_score])
                    .chain([a.report.tau])
                    .collect();
                taus.sort_by(f64::total_cmp);
                taus.dedup();
                let rows = threshold_sweep(&a.outcomes, &taus, a.report.negative_rule);
                artifact::write_bytes(&p, sweep_csv(&rows).as_bytes())?;
            }
            if let Some(dir) = artifacts {
                a.write(&dir)?;
            }
            print!("{}", render_table(&a.report));
        }
        Command::Manifest {
            root,
            train,
            probe,
            negatives,
            seed,
            out,
        } => {
            let m = Manifest::from_subject_dirs(&root, train, probe, negatives, seed)?;
            artifact::write_bytes(&out, m.to_jsonl().as_bytes())?;
        }
    }
    Ok(())
}

fn load_recognizer(model: &Path, classifier: Option<&Path>, fingerprint: &str) -> Result<Recognizer> {
    let value: serde_json::Value = artifact::read_json(model)?;
    if value.get("models").is_some() {
        let set: ModelSetFile = artifact::read_json(model)?;
        artifact::check_fingerprint(&set.fingerprint, fingerprint)?;
        let models = set
            .models
            .iter()
            .map(|m| {
                artifact::check_fingerprint(&m.fingerprint, fingerprint)?;
                m.to_model()
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Recognizer::PerClass {
            classes: set.classes,
            models,
        });
    }
    let classifier = classifier.ok_or_else(|| Error::InvalidArgument("--classifier is required with a shared model".into()))?;
    let (hmm, digest) = artifact::load_model(model, fingerprint)?;
    let file = artifact::load_classifier(classifier, fingerprint, &digest)?;
    Ok(Recognizer::Shared {
        hmm,
        classifier: file.state,
    })
}

fn print_classification(recognizer: &Recognizer, c: &Classification) {
    println!("{}", c.class_id);
    println!("class,score");
    for (id, s) in recognizer.classes().iter().zip(&c.scores) {
        println!("{id},{s}");
    }
}
