use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aaa_lint::detector::IssueKind;
use aaa_lint::run::{run, RunConfig};
use aaa_lint::RuleConfig;

#[derive(Parser)]
#[command(name = "aaa-lint", version, about = "Checks JUnit tests against the arrange-act-assert structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze test sources under the given roots
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Root directories or files to analyze
    #[arg(required = true)]
    roots: Vec<PathBuf>,

    /// Include glob for test files (repeatable)
    #[arg(long)]
    include: Vec<String>,

    /// Exclude glob (repeatable)
    #[arg(long)]
    exclude: Vec<String>,

    /// Sample fraction of test cases in (0, 1]
    #[arg(long)]
    sample: Option<f64>,

    /// Seed for the sample selection
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Gold tag CSV to compute agreement against
    #[arg(long)]
    gold: Option<PathBuf>,

    /// Issue kinds to fix in place (comma-separated slugs)
    #[arg(long, value_delimiter = ',')]
    fix: Vec<String>,

    /// Report formats: json, csv, md, sarif (comma-separated)
    #[arg(long, value_delimiter = ',', default_value = "json")]
    format: Vec<String>,

    /// Directory for reports and patch files (default: print to stdout)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Rule-set overrides as a JSON file
    #[arg(long)]
    rules: Option<PathBuf>,

    /// Analyze tests that look like integration tests instead of skipping them
    #[arg(long)]
    include_it: bool,
}

fn build_config(args: AnalyzeArgs) -> Result<RunConfig, String> {
    let mut rules = match &args.rules {
        Some(path) => RuleConfig::from_file(path).map_err(|e| e.to_string())?,
        None => RuleConfig::default(),
    };
    rules.include_it |= args.include_it;
    let mut fix_kinds = Vec::new();
    for slug in &args.fix {
        let kind = IssueKind::from_slug(slug).ok_or_else(|| format!("unknown issue kind: {slug}"))?;
        fix_kinds.push(kind);
    }
    let defaults = RunConfig::default();
    Ok(RunConfig {
        roots: args.roots,
        include: if args.include.is_empty() {
            defaults.include
        } else {
            args.include
        },
        exclude: args.exclude,
        rules,
        sample: args.sample,
        seed: args.seed,
        fix_kinds,
        formats: args.format,
        gold: args.gold,
        out_dir: args.out,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Analyze(args) = cli.command;
    let print_to_stdout = args.out.is_none();
    let config = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("aaa-lint: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(outcome) => {
            for d in &outcome.diagnostics {
                eprintln!("aaa-lint: {d}");
            }
            if let Some(gold) = &outcome.gold_text {
                println!("{gold}");
            }
            if print_to_stdout {
                for format in &config.formats {
                    if let Some(doc) = outcome.reports.get(format) {
                        print!("{doc}");
                    }
                }
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("aaa-lint: {e}");
            ExitCode::from(2)
        }
    }
}
