//! `tree-itp`: thresholds, bound curves, recovery runs, phase experiments
//! and tree projection from the command line.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or input, 3 when
//! the numerics fail (no bracket, rank deficiency).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tree_itp::experiment::{
    comparison_table, emit_threshold_table, header_comment, phase_csv, run_phase_experiment,
    Algorithm, ComparisonRow, ExperimentSpec, PhaseMapRow, ThresholdRow,
};
use tree_itp::io::{
    instance_to_json, parse_instance, parse_topology, parse_vector, vector_to_text,
};
use tree_itp::measurement::{
    derive_seed, estimate_tree_rip, sample_gaussian_matrix, CoeffLaw, InstanceSpec, ProblemInstance,
};
use tree_itp::projection::project;
use tree_itp::solver::{solve, SolverConfig};
use tree_itp::theory::{
    linear_grid, theory_table, Analysis, Stepsize, TheoryQuery, TheoryRow, Variant,
};
use tree_itp::tree::build_complete_tree;
use tree_itp::Error;

#[derive(Parser)]
#[command(
    name = "tree-itp",
    version,
    about = "Iterative tree projection for tree-sparse compressed sensing"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Itp,
    Nitp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalysisArg {
    Rip,
    Sp,
    Prior,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LawArg {
    UnitGaussian,
    Rademacher,
    FlatOnes,
}

impl From<LawArg> for CoeffLaw {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::UnitGaussian => CoeffLaw::UnitGaussian,
            LawArg::Rademacher => CoeffLaw::Rademacher,
            LawArg::FlatOnes => CoeffLaw::FlatOnes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Oversampling thresholds rho_hat and their reciprocals.
    Thresholds {
        #[arg(long = "d", value_delimiter = ',', default_value = "2,4")]
        orders: Vec<usize>,
        #[arg(
            long = "variant",
            value_enum,
            value_delimiter = ',',
            default_value = "itp,nitp"
        )]
        variants: Vec<VariantArg>,
        #[arg(
            long = "analysis",
            value_enum,
            value_delimiter = ',',
            default_value = "rip,sp,prior"
        )]
        analyses: Vec<AnalysisArg>,
        #[arg(long, default_value_t = 1.1)]
        kappa: f64,
        /// Print the binary-tree comparison against the prior analysis
        /// instead.
        #[arg(long)]
        compare: bool,
    },
    /// Bound curves, factors and tail levels on a rho grid.
    Bounds {
        #[arg(long = "d", default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 0.001)]
        rho_min: f64,
        #[arg(long, default_value_t = 0.03)]
        rho_max: f64,
        #[arg(long, default_value_t = 30)]
        points: usize,
        /// ITP stepsize: `optimal`, `cap` or a number.
        #[arg(long, default_value = "optimal")]
        alpha: String,
        #[arg(long, default_value_t = 1.1)]
        kappa: f64,
    },
    /// Recover a signal from an instance file.
    Recover {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "itp")]
        variant: VariantArg,
        /// Constant ITP stepsize; defaults to the optimal one at k / n.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.1)]
        kappa: f64,
        /// NITP sufficient-decrease constant; needs kappa (1 - c) > 1.
        #[arg(long, default_value_t = 0.05)]
        c: f64,
        /// Sparsity; defaults to the instance's.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        /// Also write the recovered vector as text here.
        #[arg(long)]
        x_out: Option<PathBuf>,
    },
    /// Monte Carlo recovery rates over a rho grid.
    Phase {
        #[arg(long = "d", default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.005,0.01")]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "itp")]
        variant: VariantArg,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.1)]
        kappa: f64,
        /// NITP sufficient-decrease constant; needs kappa (1 - c) > 1.
        #[arg(long, default_value_t = 0.05)]
        c: f64,
        #[arg(long, default_value_t = 1e-6)]
        success_tol: f64,
        /// Tree size; defaults to the smallest complete tree with 20 k nodes.
        #[arg(long)]
        n_signal: Option<usize>,
        #[arg(long, value_enum, default_value = "unit-gaussian")]
        law: LawArg,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
    },
    /// Project a vector onto rooted subtrees of size k.
    Project {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        vector: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Empirical tree-RIP constants of Gaussian matrices.
    RipEstimate {
        #[arg(long = "d", default_value_t = 2)]
        order: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        n_signal: usize,
        /// Support size.
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        matrices: usize,
    },
    /// Draw an instance file.
    Generate {
        #[arg(long = "d", default_value_t = 2)]
        order: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        n_signal: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "unit-gaussian")]
        law: LawArg,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn read(path: &PathBuf) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

fn variant(v: VariantArg, kappa: f64) -> Variant {
    match v {
        VariantArg::Itp => Variant::itp_optimal(),
        VariantArg::Nitp => Variant::nitp(kappa),
    }
}

fn analysis(a: AnalysisArg) -> Analysis {
    match a {
        AnalysisArg::Rip => Analysis::Rip,
        AnalysisArg::Sp => Analysis::StablePoint,
        AnalysisArg::Prior => Analysis::Prior,
    }
}

fn csv_table<R>(header: String, columns: &str, rows: &[R], line: impl Fn(&R) -> String) -> String {
    let mut out = format!("{header}\n{columns}\n");
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn run(cli: &Cli) -> Outcome<String> {
    let format = cli.format;
    let seed = cli.seed;
    match &cli.command {
        Command::Thresholds {
            orders,
            variants,
            analyses,
            kappa,
            compare,
        } => {
            let params = [("seed", seed.to_string()), ("kappa", kappa.to_string())];
            if *compare {
                let rows = comparison_table(*kappa)?;
                return Ok(match format.unwrap_or(Format::Csv) {
                    Format::Json => json(&rows),
                    Format::Csv => csv_table(
                        header_comment("thresholds --compare", &params),
                        ComparisonRow::CSV_HEADER,
                        &rows,
                        ComparisonRow::csv_line,
                    ),
                });
            }
            let vs: Vec<Variant> = variants.iter().map(|&v| variant(v, *kappa)).collect();
            let ans: Vec<Analysis> = analyses.iter().map(|&a| analysis(a)).collect();
            let rows = emit_threshold_table(orders, &vs, &ans)?;
            Ok(match format.unwrap_or(Format::Csv) {
                Format::Json => json(&rows),
                Format::Csv => csv_table(
                    header_comment("thresholds", &params),
                    ThresholdRow::CSV_HEADER,
                    &rows,
                    ThresholdRow::csv_line,
                ),
            })
        }
        Command::Bounds {
            order,
            rho_min,
            rho_max,
            points,
            alpha,
            kappa,
        } => {
            let step = match alpha.as_str() {
                "optimal" => Stepsize::Optimal,
                "cap" => Stepsize::ConvergenceCap,
                other => Stepsize::Fixed(other.parse().map_err(|_| {
                    Failure::Config(format!(
                        "--alpha must be optimal, cap or a number, got {other:?}"
                    ))
                })?),
            };
            if !(rho_min > &0.0 && rho_min <= rho_max) {
                return Err(Failure::Config("need 0 < rho-min <= rho-max".into()));
            }
            let query = TheoryQuery {
                order: *order,
                alpha: step,
                kappa: *kappa,
            };
            tree_itp::tree::tree_count_exponent(*order)?;
            let rows = theory_table(&query, &linear_grid(*rho_min, *rho_max, *points));
            Ok(match format.unwrap_or(Format::Csv) {
                Format::Json => json(&rows),
                Format::Csv => csv_table(
                    header_comment(
                        "bounds",
                        &[
                            ("seed", seed.to_string()),
                            ("d", order.to_string()),
                            ("rho_min", rho_min.to_string()),
                            ("rho_max", rho_max.to_string()),
                            ("points", points.to_string()),
                            ("alpha", alpha.clone()),
                            ("kappa", kappa.to_string()),
                        ],
                    ),
                    TheoryRow::CSV_HEADER,
                    &rows,
                    TheoryRow::csv_line,
                ),
            })
        }
        Command::Recover {
            instance,
            variant,
            alpha,
            kappa,
            c,
            k,
            max_iters,
            x_out,
        } => {
            let inst = parse_instance(&read(instance)?)?;
            let k = k.unwrap_or(inst.k);
            let mut config = match (variant, alpha) {
                (VariantArg::Itp, Some(a)) => SolverConfig::itp(k, *a),
                (VariantArg::Itp, None) => {
                    SolverConfig::itp_optimal(k, inst.n(), inst.topology.order())?
                }
                (VariantArg::Nitp, _) => SolverConfig::nitp(k, *c, *kappa),
            };
            config.max_iters = *max_iters;
            config.seed = seed;
            let report = solve(&inst, &config)?;
            if let Some(path) = x_out {
                write(path, &vector_to_text(&report.x_hat))?;
            }
            Ok(match format.unwrap_or(Format::Json) {
                Format::Json => json(&report),
                Format::Csv => vector_to_text(&report.x_hat),
            })
        }
        Command::Phase {
            order,
            n,
            rho,
            trials,
            sigma,
            variant,
            alpha,
            kappa,
            c,
            success_tol,
            n_signal,
            law,
            max_iters,
        } => {
            let algorithm = match variant {
                VariantArg::Itp => Algorithm::Itp { alpha: *alpha },
                VariantArg::Nitp => Algorithm::Nitp {
                    c: *c,
                    kappa: *kappa,
                },
            };
            let mut spec = ExperimentSpec::new(*order, *n, rho.clone(), algorithm);
            spec.trials = *trials;
            spec.sigma = *sigma;
            spec.seed = seed;
            spec.success_tol = *success_tol;
            spec.n_signal = *n_signal;
            spec.law = (*law).into();
            spec.max_iters = *max_iters;
            let rows: Vec<PhaseMapRow> = run_phase_experiment(&spec)?;
            Ok(match format.unwrap_or(Format::Csv) {
                Format::Json => json(&serde_json::json!({ "spec": spec, "rows": rows })),
                Format::Csv => phase_csv(&spec, &rows),
            })
        }
        Command::Project {
            topology,
            vector,
            k,
        } => {
            let t = parse_topology(&read(topology)?)?;
            let x = parse_vector(&read(vector)?)?;
            let p = project(&t, &x, *k)?;
            Ok(match format {
                Some(Format::Json) => json(&serde_json::json!({
                    "support": p.support.indices(),
                    "captured_energy": p.captured_energy,
                    "clipped": p.clipped,
                    "projected": p.projected,
                })),
                Some(Format::Csv) => {
                    let mut s = String::from("index,value\n");
                    for &i in p.support.indices() {
                        s.push_str(&format!("{i},{}\n", p.projected[i]));
                    }
                    s
                }
                None => {
                    let idx: Vec<String> =
                        p.support.indices().iter().map(|i| i.to_string()).collect();
                    let mut s = format!(
                        "support: {}\ncaptured_energy: {}\n",
                        idx.join(" "),
                        p.captured_energy
                    );
                    if p.clipped {
                        s.push_str("clipped: k exceeds the tree size\n");
                    }
                    s
                }
            })
        }
        Command::RipEstimate {
            order,
            n,
            n_signal,
            s,
            samples,
            matrices,
        } => {
            let t = build_complete_tree(*n_signal, *order)?;
            let mut rows = Vec::with_capacity(*matrices);
            for m in 0..*matrices {
                let a = sample_gaussian_matrix(*n, *n_signal, derive_seed(seed, 2 * m as u64))?;
                rows.push(estimate_tree_rip(
                    &a,
                    &t,
                    *s,
                    *samples,
                    derive_seed(seed, 2 * m as u64 + 1),
                )?);
            }
            Ok(match format.unwrap_or(Format::Csv) {
                Format::Json => json(&rows),
                Format::Csv => {
                    let mut out = format!(
                        "{}\nmatrix,s,lower_hat,upper_hat,samples,singular,uniform\n",
                        header_comment(
                            "rip-estimate",
                            &[
                                ("seed", seed.to_string()),
                                ("d", order.to_string()),
                                ("n", n.to_string()),
                                ("n_signal", n_signal.to_string()),
                                ("s", s.to_string()),
                                ("samples", samples.to_string()),
                                ("matrices", matrices.to_string()),
                            ],
                        )
                    );
                    for (m, r) in rows.iter().enumerate() {
                        out.push_str(&format!(
                            "{m},{},{:.12e},{:.12e},{},{},{}\n",
                            r.order_s,
                            r.lower_hat,
                            r.upper_hat,
                            r.n_supports_sampled,
                            r.singular,
                            r.uniform
                        ));
                    }
                    out
                }
            })
        }
        Command::Generate {
            order,
            n,
            n_signal,
            k,
            sigma,
            law,
        } => {
            let inst = ProblemInstance::generate(&InstanceSpec {
                n: *n,
                topology: build_complete_tree(*n_signal, *order)?,
                k: *k,
                sigma: *sigma,
                law: (*law).into(),
                seed,
            })?;
            let mut s = instance_to_json(&inst);
            s.push('\n');
            Ok(s)
        }
    }
}

fn write(path: &PathBuf, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
