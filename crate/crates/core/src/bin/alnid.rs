use std::path::PathBuf;
use std::process::ExitCode;

use alnid::alnid::{Grouping, LabelTarget};
use alnid::pipeline::{self, KnnMode, PipelineError, RunConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alnid", version, about = "Attribute learning and zero-shot inference on KDD Cup 99 records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Class census and attribute statistics
    Ingest(Common),
    /// Grow the decision tree on the seen classes
    Train(Common),
    /// Relearn attributes with a trained tree
    Relearn(Common),
    /// Train ESZSL and evaluate the unseen classes
    Zsl(Common),
    /// Run every stage and write report.json
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Class,
    Category,
}

impl From<Target> for LabelTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Class => LabelTarget::Class,
            Target::Category => LabelTarget::Category,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// KDD Cup 99 file, plain or gzip
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail (exit 3) when the census deviates from the reference counts
    #[arg(long)]
    strict: bool,
    /// Stratified subsample size
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Choose gamma and lambda on a held-out part of the seen classes
    #[arg(long)]
    grid_search: bool,
    /// Tree file for relearn/zsl (default <out>/tree.json)
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long)]
    min_leaf_size: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, value_enum)]
    tree_target: Option<Target>,
    #[arg(long, value_enum)]
    eszsl_target: Option<Target>,
    #[arg(long, value_enum)]
    knn_mode: Option<Mode>,
    #[arg(long, value_enum)]
    grouping: Option<Target>,
    /// Skip the original-feature comparison run
    #[arg(long)]
    no_baseline: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Signature,
    Instance,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { cfg.$f = v.into(); })* };
        }
        set!(data, out, tree, gamma, lambda, k, min_leaf_size, tree_target, eszsl_target);
        if self.subsample.is_some() {
            cfg.subsample = self.subsample;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.max_depth.is_some() {
            cfg.max_depth = self.max_depth;
        }
        if let Some(m) = self.knn_mode {
            cfg.knn_mode = match m {
                Mode::Signature => KnnMode::Signature,
                Mode::Instance => KnnMode::Instance,
            };
        }
        if let Some(g) = self.grouping {
            cfg.grouping = match g {
                Target::Class => Grouping::Class,
                Target::Category => Grouping::Category,
            };
        }
        cfg.strict |= self.strict;
        cfg.grid_search |= self.grid_search;
        cfg.baseline &= !self.no_baseline;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let (cmd, common) = match &cli.command {
        Command::Ingest(c) => ("ingest", c),
        Command::Train(c) => ("train", c),
        Command::Relearn(c) => ("relearn", c),
        Command::Zsl(c) => ("zsl", c),
        Command::Report(c) => ("report", c),
    };
    let cfg = common.resolve()?;
    // a tree given up front is checked before the slow load
    let preloaded_tree = match cmd {
        "relearn" | "zsl" => Some(pipeline::load_tree(&cfg)?),
        _ => None,
    };
    let data = pipeline::load(&cfg)?;
    eprintln!(
        "loaded {} instances ({} working, {} seen, {} unseen)",
        data.total_instances,
        data.working.len(),
        data.split.seen.len(),
        data.split.unseen.len()
    );
    match cmd {
        "ingest" => {
            let r = pipeline::ingest(&cfg, &data)?;
            for m in &r.mismatches {
                eprintln!("census: {} expected {} found {}", m.class, m.expected, m.found);
            }
            for c in r.reference_checks.iter().filter(|c| !c.matches) {
                eprintln!(
                    "stats: {} {} expected {} found {}",
                    c.attribute, c.statistic, c.expected, c.found
                );
            }
        }
        "train" => {
            let (_, r) = pipeline::train(&cfg, &data)?;
            println!(
                "accuracy {:.4}  leaves {}  depth {}  instances {}",
                r.accuracy, r.leaves, r.depth, r.instances
            );
        }
        "relearn" => {
            let r = pipeline::relearn(&cfg, &data, preloaded_tree.as_ref().expect("loaded"))?;
            println!("learned attributes better separated: {}/12", r.improved_attributes);
        }
        "zsl" => {
            let (r, _) = pipeline::zsl(&cfg, &data, preloaded_tree.as_ref().expect("loaded"))?;
            print_zsl(&r);
        }
        _ => {
            let r = pipeline::run_all(&cfg, &data)?;
            println!(
                "tree accuracy {:.4}  leaves {}  depth {}",
                r.train.accuracy, r.train.leaves, r.train.depth
            );
            println!("learned attributes better separated: {}/12", r.relearn.improved_attributes);
            print_zsl(&r.zsl);
        }
    }
    eprintln!("outputs in {}", cfg.out.display());
    Ok(())
}

fn print_zsl(r: &pipeline::ZslReport) {
    let evals = std::iter::once(&r.learned).chain(r.baseline.as_ref());
    for e in evals {
        println!(
            "{:>8}: eszsl {:.4}  knn {:.4}  residual {:.2e}{}",
            e.features,
            e.eszsl.overall_accuracy,
            e.knn.overall_accuracy,
            e.residual,
            if e.residual_ok { "" } else { "  (above tolerance)" }
        );
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
