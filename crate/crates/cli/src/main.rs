//! `mlicl`: plan, build, run, score and report multilingual ICL experiments.

mod config;
mod error;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing::info;

use mlicl_core::prompt::ModeDescriptor;
use mlicl_core::stats::significance_table;

use config::ExperimentConfig;
use error::CliError;
use pipeline::{iou_report, sets_json, write_file, Experiment};

#[derive(Parser)]
#[command(name = "mlicl", version, about = "Multilingual in-context learning evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment manifest (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    /// For `plan`, the plan file itself.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one dataset id.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args)]
struct ModeFilter {
    /// Restrict to these modes (repeatable); defaults to every configured mode.
    #[arg(long = "mode")]
    modes: Vec<ModeDescriptor>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sampling plan of each dataset.
    Plan {
        #[command(flatten)]
        common: Common,
    },
    /// Write the prompts of each dataset and mode as JSONL.
    Build {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modes: ModeFilter,
    },
    /// Send prompts to the model endpoint and append responses to the run logs.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modes: ModeFilter,
        /// Continue existing run logs, skipping completed prompts.
        #[arg(long)]
        resume: bool,
    },
    /// Accuracy tables with changes against the baseline.
    Score {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modes: ModeFilter,
    },
    /// Paired significance tests of modes against a base mode.
    Mcnemar {
        #[command(flatten)]
        common: Common,
        /// Base mode; defaults to the config baseline.
        #[arg(long)]
        base: Option<ModeDescriptor>,
        /// Compared modes (repeatable); defaults to every other configured mode.
        #[arg(long)]
        cmp: Vec<ModeDescriptor>,
    },
    /// Overlap of selected neuron sets between modes.
    NeuronIou {
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate every table and bundle them into one Markdown report.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn experiment(common: &Common, out_is_dir: bool) -> Result<Experiment, CliError> {
    let config = ExperimentConfig::load(&common.config)?;
    let out = if out_is_dir { common.out.clone() } else { None };
    Experiment::new(config, out)
}

fn plan(common: &Common) -> Result<(), CliError> {
    let exp = experiment(common, false)?;
    let datasets = exp.config.select_datasets(common.dataset.as_deref())?;
    if common.out.is_some() && datasets.len() != 1 {
        return Err(CliError::Usage("--out names one plan file; pick a dataset with --dataset".into()));
    }
    let pool = exp.cis_pool()?;
    for d in datasets {
        let dataset = exp.load_dataset(d)?;
        let plan = exp.plan(&dataset, pool.as_ref())?;
        let path = common.out.clone().unwrap_or_else(|| exp.layout.plan(&d.id));
        write_file(&path, &(plan.to_json() + "\n"))?;
        info!(dataset = %d.id, path = %path.display(), "plan written");
    }
    Ok(())
}

fn build(common: &Common, modes: &ModeFilter) -> Result<(), CliError> {
    let exp = experiment(common, true)?;
    let modes = exp.config.select_modes(&modes.modes)?;
    for d in exp.config.select_datasets(common.dataset.as_deref())? {
        for (mode, prompts) in exp.prompts(d, &modes)? {
            let mut text = String::new();
            for p in &prompts {
                text.push_str(&serde_json::to_string(p).expect("prompts serialize"));
                text.push('\n');
            }
            write_file(&exp.layout.prompts(&d.id, mode), &text)?;
            info!(dataset = %d.id, %mode, prompts = prompts.len(), "prompts written");
        }
    }
    Ok(())
}

fn run(common: &Common, modes: &ModeFilter, resume: bool) -> Result<(), CliError> {
    let exp = experiment(common, true)?;
    let modes = exp.config.select_modes(&modes.modes)?;
    let datasets = exp.config.select_datasets(common.dataset.as_deref())?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Backend(format!("cannot start runtime: {e}")))?;
    let mut failed = 0;
    for d in datasets {
        let summary = runtime.block_on(exp.run(d, &modes, resume))?;
        println!(
            "{}: {} completed, {} failed, {} skipped",
            d.id, summary.completed, summary.failed, summary.skipped
        );
        failed += summary.failed;
    }
    if failed > 0 {
        return Err(CliError::Backend(format!(
            "{failed} prompts failed after retries; rerun with --resume"
        )));
    }
    Ok(())
}

fn score(common: &Common, modes: &ModeFilter) -> Result<(), CliError> {
    let exp = experiment(common, true)?;
    let modes = exp.config.select_modes(&modes.modes)?;
    for d in exp.config.select_datasets(common.dataset.as_deref())? {
        let scored = exp.score(d, &modes)?;
        let (wide, long) = scored.accuracy_table()?;
        write_file(&exp.layout.scores(&d.id, "csv"), &long.to_csv())?;
        write_file(&exp.layout.scores(&d.id, "md"), &wide.to_markdown())?;
        print!("{}", wide.to_markdown());
    }
    Ok(())
}

fn mcnemar(common: &Common, base: Option<ModeDescriptor>, cmp: &[ModeDescriptor]) -> Result<(), CliError> {
    let mut exp = experiment(common, true)?;
    if let Some(b) = base {
        exp.config.select_modes(&[b])?;
        exp.config.baseline = b;
    }
    let cmp = exp.config.select_modes(cmp)?;
    for d in exp.config.select_datasets(common.dataset.as_deref())? {
        let scored = exp.score(d, &cmp)?;
        let table = significance_table(&scored.significance(&[])?);
        write_file(&exp.layout.significance(&d.id, "csv"), &table.to_csv())?;
        write_file(&exp.layout.significance(&d.id, "md"), &table.to_markdown())?;
        print!("{}", table.to_csv());
    }
    Ok(())
}

fn neuron_iou(common: &Common) -> Result<(), CliError> {
    let exp = experiment(common, true)?;
    let sets = exp.neuron_sets()?;
    let table = iou_report(&sets, &exp.neuron_modes());
    write_file(&exp.layout.neuron("iou.csv"), &table.to_csv())?;
    write_file(&exp.layout.neuron("iou.md"), &table.to_markdown())?;
    write_file(&exp.layout.neuron("sets.json"), &sets_json(&sets))?;
    print!("{}", table.to_markdown());
    Ok(())
}

fn report(common: &Common) -> Result<(), CliError> {
    let exp = experiment(common, true)?;
    let modes = exp.config.modes.clone();
    let mut md = String::from("# Results\n");
    for d in exp.config.select_datasets(common.dataset.as_deref())? {
        let scored = exp.score(d, &modes)?;
        let (wide, long) = scored.accuracy_table()?;
        let sig = significance_table(&scored.significance(&[])?);
        write_file(&exp.layout.scores(&d.id, "csv"), &long.to_csv())?;
        write_file(&exp.layout.scores(&d.id, "md"), &wide.to_markdown())?;
        write_file(&exp.layout.significance(&d.id, "csv"), &sig.to_csv())?;
        write_file(&exp.layout.significance(&d.id, "md"), &sig.to_markdown())?;
        md.push_str(&format!(
            "\n## {}\n\n### Accuracy (%), change against {}\n\n{}\n### McNemar tests\n\n{}",
            d.id,
            exp.config.baseline,
            wide.to_markdown(),
            sig.to_markdown()
        ));
    }
    if exp.config.neuron.is_some() {
        let sets = exp.neuron_sets()?;
        let iou = iou_report(&sets, &exp.neuron_modes());
        write_file(&exp.layout.neuron("iou.csv"), &iou.to_csv())?;
        write_file(&exp.layout.neuron("iou.md"), &iou.to_markdown())?;
        write_file(&exp.layout.neuron("sets.json"), &sets_json(&sets))?;
        md.push_str(&format!("\n## Neuron overlap (IoU, %)\n\n{}", iou.to_markdown()));
    }
    let path = exp.layout.report();
    write_file(&path, &md)?;
    println!("{}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Plan { common } => plan(common),
        Command::Build { common, modes } => build(common, modes),
        Command::Run { common, modes, resume } => run(common, modes, *resume),
        Command::Score { common, modes } => score(common, modes),
        Command::Mcnemar { common, base, cmp } => mcnemar(common, *base, cmp),
        Command::NeuronIou { common } => neuron_iou(common),
        Command::Report { common } => report(common),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
