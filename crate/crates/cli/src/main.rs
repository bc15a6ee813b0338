use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sqc_cli::bench::{run_bench, BenchRequest};
use sqc_cli::verify::verify_paper;
use sqc_cli::{parse_count_list, parse_number_list};
use sqc_core::{
    compare_analytic, evaluate_direct, fmt_num, generate_random, json_num, parse_instance,
    scan_shift, simulate_path, solve_core_brute, solve_lcore, EvalParams, LcoreOptions, PathLocus,
    PathMetrics, ServiceModel, ShiftScan, SimConfig, SolveReport, TreeInstance,
};

#[derive(Parser)]
#[command(name = "sqc", version, about = "Stochastic queue core of a tree")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha2: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<EvalParams> {
        Ok(EvalParams::new(self.alpha1, self.alpha2, self.beta)?)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit a JSON report instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    /// Mean travel time per origin (matches the analytic delay exactly).
    Mean,
    /// Server position redrawn for every service.
    Sampled,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one path.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        /// Path such as `v5,v12` or `v1+0.5-v2-v3`.
        #[arg(long)]
        path: String,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Best vertex-to-vertex path by enumeration.
    Core {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Report wall time (JSON field, or stderr for CSV).
        #[arg(long)]
        timing: bool,
    },
    /// Best path of fixed length.
    Lcore {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        length: f64,
        /// Also consider vertex-to-vertex paths shorter than the length.
        #[arg(long)]
        at_most: bool,
        /// Extra offsets per gap between vertex-aligned windows.
        #[arg(long)]
        grid: Option<usize>,
        /// Also shift windows by multiples of this step from every
        /// vertex-aligned position.
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        timing: bool,
    },
    /// Slide a fixed-length window between two vertices.
    Scan {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        length: f64,
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Simulate the queue of a path.
    Sim {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        path: String,
        #[arg(long, default_value_t = 1_000_000)]
        arrivals: u64,
        #[arg(long, default_value_t = 10_000)]
        warmup: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        reps: u32,
        #[arg(long, value_enum, default_value_t = ModelArg::Mean)]
        model: ModelArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a random tree instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Edge lengths to draw from: `1..5` or a list such as `1,2.5`.
        #[arg(long, default_value = "1..5")]
        lengths: String,
        /// Total demand rate, split evenly.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Common handling time.
        #[arg(long, default_value_t = 0.0)]
        g: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Objective grid over sizes, seeds, rates and core lengths.
    Bench {
        #[arg(long, default_value = "20,50,90")]
        sizes: String,
        #[arg(long, default_value = "0.1,0.4,0.8")]
        lambdas: String,
        #[arg(long, default_value = "4,10,16")]
        lengths: String,
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        #[arg(long, default_value = "1..5")]
        edge_lengths: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add a per-cell wall time column.
        #[arg(long)]
        timing: bool,
    },
    /// Check the reference worked example.
    VerifyPaper {
        #[arg(long)]
        json: bool,
    },
}

enum Outcome {
    Done,
    VerificationFailed,
}

fn load(path: &PathBuf) -> Result<TreeInstance> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_instance(&text)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

fn vertex(inst: &TreeInstance, id: &str) -> Result<usize> {
    Ok(inst.vertex(id)?)
}

fn metrics_output(label: &str, m: &PathMetrics, json: bool) -> String {
    if json {
        json_text(&json!({"path": label, "metrics": m.to_json_value()}))
    } else {
        format!("{}\n{}\n", PathMetrics::CSV_HEADER, m.csv_row(label))
    }
}

fn report_output(r: &SolveReport, output: &OutputArgs, timing: bool) -> Result<()> {
    if output.json {
        emit(&output.out, &json_text(&r.to_json(timing)))
    } else {
        if timing {
            eprintln!("elapsed_ms={:.3}", r.elapsed.as_secs_f64() * 1e3);
        }
        emit(
            &output.out,
            &format!("{}\n{}\n", SolveReport::CSV_HEADER, r.csv_row()),
        )
    }
}

fn scan_json(inst: &TreeInstance, scan: &ShiftScan) -> serde_json::Value {
    let rows: Vec<_> = scan
        .offsets()
        .iter()
        .zip(scan.metrics())
        .enumerate()
        .map(|(i, (s, m))| {
            json!({
                "offset": json_num(*s),
                "path": scan.locus(inst, i).render(inst),
                "metrics": m.to_json_value(),
            })
        })
        .collect();
    json!({
        "spine": scan.spine().vertices().iter().map(|&v| inst.id(v)).collect::<Vec<_>>(),
        "length": json_num(scan.window_length()),
        "argmin_f": json_num(scan.offsets()[scan.argmin_f()]),
        "argmin_sbar": json_num(scan.offsets()[scan.argmin_sbar()]),
        "windows": rows,
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Eval {
            instance,
            path,
            params,
            output,
        } => {
            let inst = load(&instance)?;
            let locus = PathLocus::parse(&inst, &path)?;
            let m = evaluate_direct(&inst, &locus, &params.params()?)?;
            emit(&output.out, &metrics_output(&locus.render(&inst), &m, output.json))?;
        }
        Command::Core {
            instance,
            params,
            output,
            timing,
        } => {
            let inst = load(&instance)?;
            let r = solve_core_brute(&inst, &params.params()?)?;
            report_output(&r, &output, timing)?;
        }
        Command::Lcore {
            instance,
            length,
            at_most,
            grid,
            step,
            params,
            output,
            timing,
        } => {
            let inst = load(&instance)?;
            let opts = LcoreOptions { grid, step, at_most };
            let r = solve_lcore(&inst, length, &params.params()?, &opts)?;
            report_output(&r, &output, timing)?;
        }
        Command::Scan {
            instance,
            from,
            to,
            length,
            grid,
            params,
            output,
        } => {
            let inst = load(&instance)?;
            let (a, b) = (vertex(&inst, &from)?, vertex(&inst, &to)?);
            let scan = scan_shift(&inst, a, b, length, &params.params()?, grid)?;
            if output.json {
                emit(&output.out, &json_text(&scan_json(&inst, &scan)))?;
            } else {
                emit(&output.out, &scan.to_csv())?;
            }
        }
        Command::Sim {
            instance,
            path,
            arrivals,
            warmup,
            seed,
            reps,
            model,
            output,
        } => {
            let inst = load(&instance)?;
            let locus = PathLocus::parse(&inst, &path)?;
            let config = SimConfig {
                arrivals,
                warmup,
                seed,
                replications: reps,
                model: match model {
                    ModelArg::Mean => ServiceModel::MeanTravel,
                    ModelArg::Sampled => ServiceModel::SampledPosition,
                },
            };
            let sim = simulate_path(&inst, &locus, &config)?;
            let analytic = evaluate_direct(&inst, &locus, &EvalParams::default())?.qbar;
            let reference = sim.model_delay();
            let verdict = compare_analytic(&sim, reference);
            if output.json {
                let doc = json!({
                    "path": locus.render(&inst),
                    "result": serde_json::to_value(&sim)?,
                    "analytic_qbar": json_num(analytic),
                    "model_qbar": json_num(reference),
                    "verdict": verdict.label(),
                });
                emit(&output.out, &json_text(&doc))?;
            } else {
                let z = match verdict {
                    sqc_core::Verdict::Pass { z } | sqc_core::Verdict::Fail { z } => fmt_num(z),
                    sqc_core::Verdict::Unstable => "n/a".into(),
                };
                emit(
                    &output.out,
                    &format!(
                        "{}# {}\n# analytic_qbar={} model_qbar={} verdict={} z={}\n",
                        sim.to_csv(),
                        sim.summary_line(),
                        fmt_num(analytic),
                        fmt_num(reference),
                        verdict.label(),
                        z
                    ),
                )?;
            }
        }
        Command::Gen {
            n,
            seed,
            lengths,
            lambda,
            g,
            out,
        } => {
            let choices = parse_number_list(&lengths).map_err(anyhow::Error::msg)?;
            let inst = generate_random(n, &choices, seed)?
                .with_total_rate(lambda)?
                .with_handling_time(g)?;
            emit(&out, &format!("{}\n", inst.to_json()))?;
        }
        Command::Bench {
            sizes,
            lambdas,
            lengths,
            seeds,
            edge_lengths,
            params,
            out,
            timing,
        } => {
            let parse = |s: &str| parse_number_list(s).map_err(anyhow::Error::msg);
            let req = BenchRequest {
                sizes: parse_count_list(&sizes)
                    .map_err(anyhow::Error::msg)?
                    .into_iter()
                    .map(|x| x as usize)
                    .collect(),
                seeds: parse_count_list(&seeds).map_err(anyhow::Error::msg)?,
                lambdas: parse(&lambdas)?,
                lengths: parse(&lengths)?,
                edge_lengths: parse(&edge_lengths)?,
                params: params.params()?,
            };
            let grid = run_bench(&req)?;
            emit(&out, &grid.to_csv(timing))?;
        }
        Command::VerifyPaper { json } => {
            let report = verify_paper();
            if json {
                print!("{}", json_text(&report.to_json()));
            } else {
                print!("{}", report.render());
            }
            if !report.all_passed() {
                return Ok(Outcome::VerificationFailed);
            }
        }
    }
    Ok(Outcome::Done)
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
    let result = (|| {
        if let Some(t) = cli.threads {
            if t == 0 {
                bail!("--threads must be at least 1");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .context("configuring worker threads")?;
        }
        run(cli)
    })();
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
