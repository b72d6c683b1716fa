use std::fs;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use bmsi_core::gbdt::{lopo_tune, GbdtParams, LabeledFeatureSet};
use bmsi_core::session::{replay_file, Decoder};
use bmsi_core::stimulus::{layout_tsv, tag_for_target};
use bmsi_core::suggest::{bench_suggestion, PinyinDict, QueryLog, Strategy};
use bmsi_core::synth::{synth_satisfaction_dataset, synth_satisfaction_eeg_dataset, synth_ssvep, SynthSpec};
use bmsi_service::bench::{bench_speller, format_table};
use bmsi_service::setup::{load_config, load_model, search_context};
use bmsi_service::wire::SessionView;
use bmsi_service::{router, AppState};
use clap::{Parser, Subcommand};
use tracing::info;
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "bmsi", version, about = "SSVEP-driven search interface: service and tools")]
struct Cli {
    /// TOML file overriding the default system configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP/WebSocket session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Satisfaction model from `train-sat`; trained on synthetic EEG if absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Directory for per-session event logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        query_log: Option<PathBuf>,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Speller accuracy, decode time and ITR over synthetic EEG.
    BenchSpeller {
        #[arg(long, value_delimiter = ',', default_value = "-10,-5,0")]
        snr: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,1.5")]
        window: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 20190721)]
        seed: u64,
    },
    /// Match ratio and keys per character of query suggestion.
    BenchSuggest {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        /// `first_letter` or `full_letter`; both when omitted.
        #[arg(long)]
        strategy: Option<Strategy>,
    },
    /// Tune and train the satisfaction model with leave-one-participant-out.
    TrainSat {
        #[arg(long)]
        data: PathBuf,
        /// Grid file (`learning_rate n_estimators max_leaf_nodes max_depth` per line).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate synthetic data.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
    /// Rebuild a session from its log and print the final state.
    Replay { log: PathBuf },
    /// Print the key layout and flicker tags as tab-separated text.
    Layout,
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// One SSVEP window in the binary EEG format.
    Ssvep {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Omit for a noise-free window.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 9)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gaussian satisfaction features with participant offsets.
    Features {
        #[arg(long, default_value_t = 18)]
        participants: usize,
        #[arg(long, default_value_t = 60)]
        trials: usize,
        #[arg(long, default_value_t = 2.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// DE features of synthetic landing-page EEG, labeled by satisfaction.
    SatisfactionEeg {
        #[arg(long, default_value_t = 200)]
        windows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &PathBuf) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = load_config(cli.config.as_deref())?;

    match cli.command {
        Command::Serve {
            addr,
            model,
            log_dir,
            query_log,
            dict,
            corpus,
            seed,
        } => {
            if let Some(dir) = &log_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let model = load_model(model.as_deref(), config.sampling_rate, seed)?;
            let ctx = search_context(config.clone(), query_log.as_deref(), dict.as_deref(), corpus.as_deref())?;
            let decoder = Decoder::new(config, Arc::new(model));
            let app = router(Arc::new(AppState::new(decoder, ctx, log_dir)));
            let listener = tokio::net::TcpListener::bind(addr).await?;
            info!(%addr, "listening");
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Command::BenchSpeller {
            snr,
            window,
            trials,
            seed,
        } => {
            let rows = tokio::task::spawn_blocking(move || bench_speller(&config, &snr, &window, trials, seed)).await??;
            print!("{}", format_table(&rows));
            println!("# seed {seed}, {trials} trials per target");
        }
        Command::BenchSuggest { log, dict, strategy } => {
            let log = QueryLog::parse(&read(&log)?)?;
            let dict = PinyinDict::parse(&read(&dict)?)?;
            let strategies = match strategy {
                Some(s) => vec![s],
                None => vec![Strategy::FirstLetter, Strategy::FullLetter],
            };
            println!("strategy\tqueries\tmatched\tmatch_ratio\tkeys_per_char");
            for s in strategies {
                let b = bench_suggestion(&log, &dict, s)?;
                println!(
                    "{}\t{}\t{}\t{:.4}\t{:.4}",
                    b.strategy, b.n_queries, b.n_matched, b.match_ratio, b.keys_per_char
                );
            }
        }
        Command::TrainSat { data, grid, out, seed } => {
            let data = LabeledFeatureSet::parse(&read(&data)?)?;
            let grid = match grid {
                Some(p) => GbdtParams::parse_grid(&read(&p)?)?,
                None => GbdtParams::default_grid(),
            };
            let report = tokio::task::spawn_blocking(move || lopo_tune(&data, &grid, seed)).await??;
            for (params, score) in &report.grid_scores {
                println!(
                    "lr={} trees={} leaves={} depth={}\tauc={:.4}",
                    params.learning_rate, params.n_estimators, params.max_leaf_nodes, params.max_depth, score
                );
            }
            if !report.skipped.is_empty() {
                println!("# skipped single-class participants: {}", report.skipped.join(", "));
            }
            println!("# best {:?} mean LOPO AUC {:.4}", report.best_params, report.mean_auc);
            fs::write(&out, report.model.to_text()).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Synth { what } => synth(&config, what)?,
        Command::Replay { log } => {
            let ctx = search_context(config.clone(), None, None, None)?;
            let replay = replay_file(&log, &ctx)?;
            for w in &replay.warnings {
                eprintln!("warning: {w}");
            }
            let id = log.file_stem().and_then(|s| s.to_str()).unwrap_or("replay");
            let view = SessionView::new(id, &replay.state, &config);
            println!("{}", serde_json::to_string_pretty(&view)?);
        }
        Command::Layout => print!("{}", layout_tsv(&config.stimulus())?),
    }
    Ok(())
}

fn synth(config: &bmsi_core::SystemConfig, what: SynthCommand) -> anyhow::Result<()> {
    match what {
        SynthCommand::Ssvep {
            k,
            duration,
            snr,
            channels,
            seed,
            out,
        } => {
            if channels < 2 {
                bail!("need at least two channels");
            }
            let tag = tag_for_target(k, &config.stimulus())?;
            let spec = SynthSpec::new(Some(k), duration, config.sampling_rate, channels, config.n_harmonics)
                .with_snr(snr.unwrap_or(f64::INFINITY))
                .with_seed(seed);
            let window = synth_ssvep(&spec, &tag)?;
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            window.write_binary(&mut w)?;
            w.flush()?;
        }
        SynthCommand::Features {
            participants,
            trials,
            separation,
            seed,
            out,
        } => {
            let data = synth_satisfaction_dataset(participants, trials, separation, seed)?;
            fs::write(&out, data.to_text())?;
        }
        SynthCommand::SatisfactionEeg { windows, seed, out } => {
            let data = synth_satisfaction_eeg_dataset(windows, config.sampling_rate, seed)?;
            fs::write(&out, data.to_text())?;
        }
    }
    Ok(())
}
