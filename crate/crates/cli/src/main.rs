//! `assist-reasoner`: assess scene graphs for risk and suggest assistive
//! actions.
//!
//! Exit status: 0 safe, 3 unsafe, 1 input error, 2 internal error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use assist_core::action::CompletionParams;
use assist_core::io::{convert_action_genome_logged, parse_scene_graph};
use assist_core::pipeline::{run_loaded, Inputs, PipelineError, PipelineOutput, Stage};
use assist_core::{Config, ConnotationLexicon, EnrichmentParams, KnowledgeBase, Mode, RiskParams};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

const EXIT_SAFE: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_INTERNAL: u8 = 2;
const EXIT_UNSAFE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "assist-reasoner",
    version,
    about = "Commonsense risk assessment over scene graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the depicted activity is unsafe.
    Assess(RunArgs),
    /// Assess, and for unsafe scenes pick an object to bring or warn.
    Suggest(RunArgs),
    /// Convert ActionGenome-style annotations into scene-graph JSON files.
    Convert {
        /// Annotation file (JSON array of frame records).
        #[arg(long)]
        annotation: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a scene graph as Graphviz DOT. With --kb and --lexicon the
    /// enriched, sentiment-weighted graph is exported instead.
    ExportDot {
        graph: PathBuf,
        #[arg(long, requires = "lexicon")]
        kb: Option<PathBuf>,
        #[arg(long, requires = "kb")]
        lexicon: Option<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scene-graph JSON file(s).
    #[arg(required = true)]
    graphs: Vec<PathBuf>,
    /// Commonsense triples, CSV head,relation,tail,weight.
    #[arg(long)]
    kb: PathBuf,
    /// Connotation lexicon, TSV word<TAB>polarity.
    #[arg(long)]
    lexicon: PathBuf,
    /// Write the final graph as DOT (single graph only).
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write the enrichment provenance log (single graph only).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Directory for per-graph reports; required with several graphs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Number of graphs processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct ParamArgs {
    /// Knowledge triples kept per expanded node [default: 3].
    #[arg(long)]
    top_k: Option<usize>,
    /// Minimum context confidence for a triple [default: 0.5].
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Expansion depth from perceived nodes [default: 1].
    #[arg(long)]
    max_depth: Option<usize>,
    /// Neighbour weight in sentiment propagation [default: 0.3].
    #[arg(long)]
    alpha: Option<f64>,
    /// Propagation stops when no node moves more than this [default: 1e-6].
    #[arg(long)]
    tol: Option<f64>,
    /// Propagation sweep cap [default: 50].
    #[arg(long)]
    max_iters: Option<usize>,
    /// Amplification of negative sentiment near a person [default: 1.0].
    #[arg(long)]
    beta: Option<f64>,
    /// Risk above which the scene is unsafe [default: 0.5].
    #[arg(long)]
    threshold: Option<f64>,
    /// Threshold reduction when a child is present [default: 0.15].
    #[arg(long)]
    child_adjustment: Option<f64>,
    /// Lowest threshold the child adjustment can reach [default: 0.05].
    #[arg(long)]
    threshold_floor: Option<f64>,
    /// Treat the scene as containing a child.
    #[arg(long)]
    child_present: bool,
    /// Maximum completion rounds [default: 3].
    #[arg(long)]
    rounds: Option<usize>,
    /// Minimum sentiment gain for another completion round [default: 0.001].
    #[arg(long)]
    epsilon: Option<f64>,
}

impl ParamArgs {
    fn config(&self) -> Config {
        let e = EnrichmentParams::default();
        let r = RiskParams::default();
        let c = CompletionParams::default();
        Config {
            enrichment: EnrichmentParams {
                top_k: self.top_k.unwrap_or(e.top_k),
                min_confidence: self.min_confidence.unwrap_or(e.min_confidence),
                max_depth: self.max_depth.unwrap_or(e.max_depth),
            },
            risk: RiskParams {
                alpha: self.alpha.unwrap_or(r.alpha),
                tol: self.tol.unwrap_or(r.tol),
                max_iters: self.max_iters.unwrap_or(r.max_iters),
                beta: self.beta.unwrap_or(r.beta),
                threshold: self.threshold.unwrap_or(r.threshold),
                child_adjustment: self.child_adjustment.unwrap_or(r.child_adjustment),
                threshold_floor: self.threshold_floor.unwrap_or(r.threshold_floor),
            },
            completion: CompletionParams {
                max_rounds: self.rounds.unwrap_or(c.max_rounds),
                epsilon: self.epsilon.unwrap_or(c.epsilon),
            },
            child_present: self.child_present,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are input errors; clap's own status 2 means internal here
            return ExitCode::from(if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_SAFE
            });
        }
    };
    let code = match cli.command {
        Command::Assess(args) => run(args, Mode::Assess),
        Command::Suggest(args) => run(args, Mode::Suggest),
        Command::Convert {
            annotation,
            out_dir,
        } => convert(&annotation, &out_dir),
        Command::ExportDot {
            graph,
            kb,
            lexicon,
            out,
            params,
        } => export_dot(
            &graph,
            kb.as_deref(),
            lexicon.as_deref(),
            out.as_deref(),
            &params,
        ),
    };
    ExitCode::from(code)
}

fn fail(err: &PipelineError) -> u8 {
    eprintln!("error: {err}");
    err.exit_code() as u8
}

fn input_error(stage: Stage, message: impl std::fmt::Display) -> PipelineError {
    PipelineError::Input {
        stage,
        message: message.to_string(),
    }
}

fn load_shared(
    kb: &Path,
    lexicon: &Path,
) -> Result<(KnowledgeBase, ConnotationLexicon), PipelineError> {
    let kb = KnowledgeBase::load(kb).map_err(|e| input_error(Stage::LoadKb, e))?;
    let lexicon =
        ConnotationLexicon::load(lexicon).map_err(|e| input_error(Stage::LoadLexicon, e))?;
    Ok((kb, lexicon))
}

fn run_one(
    graph_path: &Path,
    args: &RunArgs,
    kb: &KnowledgeBase,
    lexicon: &ConnotationLexicon,
    config: &Config,
    mode: Mode,
) -> Result<PipelineOutput, PipelineError> {
    let graph = parse_scene_graph(graph_path).map_err(|e| input_error(Stage::Parse, e))?;
    let mut out = run_loaded(&graph, kb, lexicon, config, mode)?;
    out.report.inputs = Inputs {
        graph: Some(graph_path.display().to_string()),
        kb: Some(args.kb.display().to_string()),
        lexicon: Some(args.lexicon.display().to_string()),
    };
    if let Some(path) = &args.log {
        let body: String = out.provenance.iter().map(|p| format!("{p}\n")).collect();
        write_atomic(path, body.as_bytes()).map_err(|e| input_error(Stage::Enrich, e))?;
        out.report.enrichment.log = Some(path.display().to_string());
    }
    Ok(out)
}

fn run(args: RunArgs, mode: Mode) -> u8 {
    let config = args.params.config();
    if let Err(e) = config.validate() {
        return fail(&input_error(Stage::Config, e));
    }
    let (kb, lexicon) = match load_shared(&args.kb, &args.lexicon) {
        Ok(shared) => shared,
        Err(e) => return fail(&e),
    };

    if args.graphs.len() == 1 {
        let out = match run_one(&args.graphs[0], &args, &kb, &lexicon, &config, mode) {
            Ok(out) => out,
            Err(e) => return fail(&e),
        };
        if let Some(dot) = &args.dot {
            if let Err(e) = write_atomic(dot, out.graph.to_dot().as_bytes()) {
                return fail(&input_error(Stage::Config, e));
            }
        }
        let json = out.report.to_json();
        match &args.out_dir {
            Some(dir) => {
                if let Err(e) = write_report(dir, &args.graphs[0], &json) {
                    return fail(&input_error(Stage::Config, e));
                }
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                if stdout
                    .write_all(json.as_bytes())
                    .and_then(|_| stdout.flush())
                    .is_err()
                {
                    return EXIT_INTERNAL;
                }
            }
        }
        return out.report.exit_code() as u8;
    }

    let Some(dir) = args.out_dir.clone() else {
        return fail(&input_error(Stage::Config, "several graphs need --out-dir"));
    };
    if args.dot.is_some() || args.log.is_some() {
        return fail(&input_error(
            Stage::Config,
            "--dot and --log take a single graph",
        ));
    }
    let mut stems = std::collections::BTreeSet::new();
    if let Some(dup) = args
        .graphs
        .iter()
        .map(|g| report_stem(g))
        .find(|s| !stems.insert(s.clone()))
    {
        return fail(&input_error(
            Stage::Config,
            format!("two graphs would both write {dup}.report.json"),
        ));
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INTERNAL;
        }
    };
    let codes: Vec<u8> = pool.install(|| {
        args.graphs
            .par_iter()
            .map(
                |path| match run_one(path, &args, &kb, &lexicon, &config, mode) {
                    Ok(out) => match write_report(&dir, path, &out.report.to_json()) {
                        Ok(()) => out.report.exit_code() as u8,
                        Err(e) => fail(&input_error(Stage::Config, e)),
                    },
                    Err(e) => {
                        eprintln!("error: {}: {e}", path.display());
                        e.exit_code() as u8
                    }
                },
            )
            .collect()
    });
    batch_exit(&codes)
}

/// Internal failures dominate input errors, which dominate unsafe verdicts.
fn batch_exit(codes: &[u8]) -> u8 {
    [EXIT_INTERNAL, EXIT_INPUT, EXIT_UNSAFE]
        .into_iter()
        .find(|c| codes.contains(c))
        .unwrap_or(EXIT_SAFE)
}

fn write_report(dir: &Path, graph: &Path, json: &str) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(
        &dir.join(format!("{}.report.json", report_stem(graph))),
        json.as_bytes(),
    )
}

fn report_stem(graph: &Path) -> String {
    graph
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".to_string())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn convert(annotation: &Path, out_dir: &Path) -> u8 {
    match convert_action_genome_logged(annotation, out_dir) {
        Ok(c) => {
            println!(
                "{}",
                serde_json::json!({
                    "frames_written": c.frames_written,
                    "lossy_fields_logged": c.log.len(),
                })
            );
            EXIT_SAFE
        }
        Err(e) => {
            eprintln!("error: convert: {e}");
            EXIT_INPUT
        }
    }
}

fn export_dot(
    graph_path: &Path,
    kb: Option<&Path>,
    lexicon: Option<&Path>,
    out: Option<&Path>,
    params: &ParamArgs,
) -> u8 {
    let graph = match parse_scene_graph(graph_path) {
        Ok(g) => g,
        Err(e) => return fail(&input_error(Stage::Parse, e)),
    };
    let dot = match (kb, lexicon) {
        (Some(kb), Some(lexicon)) => {
            let (kb, lexicon) = match load_shared(kb, lexicon) {
                Ok(shared) => shared,
                Err(e) => return fail(&e),
            };
            match run_loaded(&graph, &kb, &lexicon, &params.config(), Mode::Assess) {
                Ok(out) => out.graph.to_dot(),
                Err(e) => return fail(&e),
            }
        }
        _ => graph.to_dot(),
    };
    let written = match out {
        Some(path) => write_atomic(path, dot.as_bytes()),
        None => std::io::stdout().write_all(dot.as_bytes()),
    };
    match written {
        Ok(()) => EXIT_SAFE,
        Err(e) => {
            eprintln!("error: export-dot: {e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_exit_priority() {
        assert_eq!(batch_exit(&[0, 0]), EXIT_SAFE);
        assert_eq!(batch_exit(&[0, 3]), EXIT_UNSAFE);
        assert_eq!(batch_exit(&[3, 1]), EXIT_INPUT);
        assert_eq!(batch_exit(&[1, 2, 3]), EXIT_INTERNAL);
    }

    #[test]
    fn flags_default_to_library_defaults() {
        let cli = Cli::parse_from([
            "assist-reasoner",
            "assess",
            "g.json",
            "--kb",
            "k",
            "--lexicon",
            "l",
        ]);
        let Command::Assess(args) = cli.command else {
            panic!()
        };
        assert_eq!(args.params.config(), Config::default());
    }

    #[test]
    fn flags_override() {
        let cli = Cli::parse_from([
            "assist-reasoner",
            "suggest",
            "g.json",
            "--kb",
            "k",
            "--lexicon",
            "l",
            "--threshold",
            "0.4",
            "--max-depth",
            "2",
            "--child-present",
            "--rounds",
            "5",
            "--top-k",
            "1",
        ]);
        let Command::Suggest(args) = cli.command else {
            panic!()
        };
        let c = args.params.config();
        assert_eq!(c.risk.threshold, 0.4);
        assert_eq!(c.enrichment.max_depth, 2);
        assert_eq!(c.enrichment.top_k, 1);
        assert_eq!(c.completion.max_rounds, 5);
        assert!(c.child_present);
    }
}
