use std::fs::{self, File};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use ivstat::iaa::build_agreement;
use ivstat::mixed::{write_rows, SimulationParams};
use ivstat::plot::{plot_iaa_svg, plot_intervals_svg, read_intervals, PlotSpec, PlotStyle};
use ivstat::survey::{ResponseStore, SurveyDefinition};
use ivstat::ScaleSpec;
use ivstat_cli::pipeline::{run_pipeline, Analysis, PipelineConfig};
use ivstat_cli::service::{self, AppState, DEFAULT_ADMIN_TOKEN_ENV};

#[derive(Parser)]
#[command(name = "ivstat", version, about = "Collect and analyse interval-valued survey responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve one survey and append responses to a log.
    Serve {
        #[arg(long)]
        survey: PathBuf,
        /// Response log (JSON lines), created if missing.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Environment variable holding the bearer token for GET /responses.
        #[arg(long, default_value = DEFAULT_ADMIN_TOKEN_ENV)]
        admin_token_env: String,
    },
    /// Run an analysis over a response log.
    Analyze {
        #[arg(value_enum)]
        analysis: AnalysisArg,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        survey: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Design table; repeat for several.
        #[arg(long = "design")]
        designs: Vec<PathBuf>,
        #[arg(long = "B", default_value_t = 10_000)]
        bootstrap: usize,
        #[arg(long = "M", default_value_t = 10_000)]
        permutations: usize,
        /// Parametric bootstrap replicates for variance-component intervals.
        #[arg(long, default_value_t = 0)]
        vc_replicates: usize,
        /// Round normalised intervals to integers before aggregation.
        #[arg(long)]
        round: bool,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw model rows from the crossed mixed model.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        participants: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render intervals (CSV with lo,hi columns) as SVG.
    Plot {
        #[arg(value_enum)]
        style: StyleArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min: f64,
        #[arg(long, default_value_t = 100.0)]
        max: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisArg {
    Iaa,
    Corr,
    Anova,
    McAnova,
    Mixed,
}

impl From<AnalysisArg> for Analysis {
    fn from(a: AnalysisArg) -> Self {
        match a {
            AnalysisArg::Iaa => Analysis::Iaa,
            AnalysisArg::Corr => Analysis::Corr,
            AnalysisArg::Anova => Analysis::Anova,
            AnalysisArg::McAnova => Analysis::McAnova,
            AnalysisArg::Mixed => Analysis::Mixed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Intervals,
    Iaa,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Serve { survey, out, port, admin_token_env } => {
            let survey = SurveyDefinition::from_path(&survey).with_context(|| format!("loading {}", survey.display()))?;
            let store = ResponseStore::open(&out).with_context(|| format!("opening {}", out.display()))?;
            let token = std::env::var(&admin_token_env).ok();
            if token.is_none() {
                eprintln!("{admin_token_env} is unset; GET /responses is disabled");
            }
            let state = AppState::new(survey, store, token)?;
            let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
            eprintln!("serving on {addr}");
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, addr))
        }
        Command::Analyze {
            analysis,
            responses,
            survey,
            truth,
            designs,
            bootstrap,
            permutations,
            vc_replicates,
            round,
            seed,
            out,
        } => {
            let mut cfg = PipelineConfig::new(responses, out, seed);
            cfg.survey = survey;
            cfg.truth = truth;
            cfg.designs = designs;
            cfg.analyses = vec![analysis.into()];
            cfg.bootstrap_resamples = bootstrap;
            cfg.permutation_resamples = permutations;
            cfg.vc_replicates = vc_replicates;
            cfg.round = round;
            let manifest = run_pipeline(&cfg)?;
            for note in &manifest.notes {
                eprintln!("note: {note}");
            }
            println!("wrote {} outputs to {}", manifest.outputs.len(), cfg.out.display());
            Ok(())
        }
        Command::Simulate { params, participants, seed, out } => {
            let text = fs::read_to_string(&params).with_context(|| format!("reading {}", params.display()))?;
            let params = SimulationParams::from_json(&text)?;
            let (rows, clamped) = params.simulate(participants, seed)?;
            write_rows(File::create(&out)?, &rows)?;
            if clamped > 0 {
                eprintln!("clamped {clamped} responses into [0, 1]");
            }
            println!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Plot { style, input, out, min, max } => {
            let intervals = read_intervals(File::open(&input).with_context(|| format!("opening {}", input.display()))?)?;
            let scale = ScaleSpec::new(min, max)?;
            let svg = match style {
                StyleArg::Intervals => plot_intervals_svg(&intervals, &scale, &PlotSpec::new(PlotStyle::IntervalStack))?,
                StyleArg::Iaa => plot_iaa_svg(&build_agreement(&intervals)?, &scale, &PlotSpec::new(PlotStyle::Iaa))?,
            };
            fs::write(&out, svg)?;
            Ok(())
        }
    }
}
