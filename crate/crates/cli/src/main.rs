use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surfcut::cost::{gradient_cost, normalize_cost, probability_to_cost, Polarity};
use surfcut::displacement::compute_gvf;
use surfcut::oracle::brute_force_minimize;
use surfcut::phantom::{generate_phantom, PhantomSpec};
use surfcut::pipeline::{
    emit_report, evaluate_surfaces, read_surface_csv, report_json, segment_with_graph, PipelineConfig, ProblemBundle,
};
use surfcut::{CapacityScale, Error, Volume};

#[derive(Parser)]
#[command(name = "surfcut", version, about = "Optimal multi-surface segmentation in irregularly sampled space")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration or problem bundle.
    #[arg(long)]
    config: PathBuf,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic layered volume from a JSON spec.
    Phantom {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Gradient vector flow of a volume, written as three component volumes.
    Gvf {
        /// Input volume (.raw with .json sidecar).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        mu: f64,
        #[arg(long, default_value_t = 80)]
        iterations: usize,
        #[arg(long)]
        dt: Option<f64>,
        /// Diffuse the raw gradient instead of the edge map gradient.
        #[arg(long)]
        raw: bool,
    },
    /// Build a cost volume from an intensity or probability volume.
    Cost {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// dark-to-bright or bright-to-dark
        #[arg(long, default_value = "dark-to-bright")]
        polarity: Polarity,
        /// Treat the input as a probability map.
        #[arg(long)]
        probability: bool,
        /// Shift the result so its minimum is zero.
        #[arg(long)]
        normalize: bool,
    },
    /// Segment a problem bundle.
    Segment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scale: Option<u64>,
        /// Write the flow network in DIMACS format.
        #[arg(long)]
        dump_graph: Option<PathBuf>,
    },
    /// Exhaustive minimum of a small problem bundle.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Compare two surface CSV files.
    Evaluate {
        #[arg(long)]
        auto: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Voxel spacing x,y,z for the symmetric surface distance.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0, 1.0, 1.0])]
        spacing: Vec<f64>,
    },
    /// Run the full configured pipeline and write a report.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        scale: Option<u64>,
        /// Also run the regular-grid comparison.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        dump_graph: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Infeasible => 3,
        Error::Io { .. } | Error::Format { .. } => 4,
        Error::ConfigInvalid(_)
        | Error::InvalidPenalty(_)
        | Error::InvalidProblem(_)
        | Error::NonMonotoneMapping { .. }
        | Error::UnstableStep { .. }
        | Error::FactorExceedsDim { .. }
        | Error::SurfacesOutOfOrder { .. }
        | Error::SearchSpaceTooLarge(_)
        | Error::CapacityOverflow(_) => 2,
        _ => 1,
    }
}

fn write(path: &Path, body: &str) -> Result<(), Error> {
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Error> {
    match out {
        Some(p) => write(p, body),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Phantom { common, seed } => {
            let mut spec: PhantomSpec = read_json(&common.config)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let out = common.out.unwrap_or_else(|| PathBuf::from("phantom.raw"));
            let phantom = generate_phantom(&spec)?;
            phantom.volume.write(&out)?;
            let ny = spec.dims[1];
            let mut truth = String::from("x,y,surface,position\n");
            for (i, heights) in phantom.truth.iter().enumerate() {
                for (a, z) in heights.iter().enumerate() {
                    truth.push_str(&format!("{},{},{i},{z}\n", a / ny, a % ny));
                }
            }
            write(&out.with_extension("truth.csv"), &truth)
        }
        Command::Gvf {
            input,
            out,
            mu,
            iterations,
            dt,
            raw,
        } => {
            let v = Volume::read(&input)?;
            let source = if raw { v.clone() } else { surfcut::displacement::edge_map(&v) };
            let field = compute_gvf(&source, mu, iterations, dt)?;
            field.write(&out, v.spacing())?;
            Ok(())
        }
        Command::Cost {
            input,
            out,
            polarity,
            probability,
            normalize,
        } => {
            let v = Volume::read(&input)?;
            let mut c = if probability {
                probability_to_cost(&v)?
            } else {
                gradient_cost(&v, polarity)
            };
            if normalize {
                c = normalize_cost(&c).0;
            }
            c.write(&out)
        }
        Command::Segment {
            common,
            scale,
            dump_graph,
        } => {
            let problem = ProblemBundle::load(&common.config)?;
            let scale = scale.map(CapacityScale::new).transpose()?.unwrap_or_default();
            let (result, graph) = segment_with_graph(&problem, scale)?;
            if let Some(p) = dump_graph {
                write(&p, &graph.network.to_dimacs())?;
            }
            emit(common.out.as_deref(), &json(&result))
        }
        Command::Oracle { common } => {
            let problem = ProblemBundle::load(&common.config)?;
            let (labels, energy) = brute_force_minimize(&problem)?;
            let body = json(&serde_json::json!({ "energy": energy, "labels": labels }));
            emit(common.out.as_deref(), &body)
        }
        Command::Evaluate {
            auto,
            reference,
            spacing,
        } => {
            let spacing = [spacing[0], spacing[1], spacing[2]];
            let metrics = evaluate_surfaces(&read_surface_csv(&auto)?, &read_surface_csv(&reference)?, spacing)?;
            emit(None, &json(&metrics))
        }
        Command::Pipeline {
            common,
            seed,
            scale,
            baseline,
            dump_graph,
        } => {
            let mut config = PipelineConfig::load(&common.config)?;
            if seed.is_some() {
                config.seed = seed;
            }
            if let Some(s) = scale {
                config.scale = s;
            }
            config.baseline |= baseline;
            if dump_graph.is_some() {
                config.dump_graph = dump_graph;
            }
            let out = surfcut::run_pipeline(&config)?;
            match common.out.or(config.output_dir) {
                Some(dir) => {
                    for p in emit_report(&out, &dir)? {
                        eprintln!("wrote {}", p.display());
                    }
                    Ok(())
                }
                None => emit(None, &report_json(&out, "")?),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
