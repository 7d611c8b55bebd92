use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use consensus_core::analysis::{
    leakage_audit, mutual_information, overlap_report, pareto_audit, worst_case_robustness,
    OverlapReport, ParetoReport, Robustness,
};
use consensus_core::consensus::{consensus_sample, exact_output_law, RoundBudget, SampleResult};
use consensus_core::harness::{
    abstention_curve, block_encoder_family, build_ensemble, chunk_rng, render_report, run_file,
    run_scenario, sampler_config, steg_demo, to_json, write_csv, write_table, Certificate, Format,
    LeakageSection, Report, RunOptions, ScenarioConfig, ScenarioFile,
};
use consensus_core::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ORACLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "consensus",
    version,
    about = "Consensus sampling over generative model ensembles"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario file (JSON, schema consensus-scenario/v1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides every scenario's trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only run the scenario with this name.
    #[arg(long, global = true)]
    scenario: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Table,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Table => Format::Table,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples with the consensus sampler (`--trials` draws, default 1).
    Sample,
    /// Exact output law of each scenario.
    Law,
    /// Overlap and maximal overlap of the hinted safe set (or all members).
    Overlap,
    /// Robustness certificates and worst-case robustness.
    Robustness,
    /// Abstention against the round budget: exact, bound and empirical.
    AbstentionCurve {
        #[arg(long, default_value_t = 20)]
        max_rounds: u64,
    },
    /// Leakage audits. Without --config, audits the block-encoder family.
    Leakage {
        #[arg(long, default_value_t = 8)]
        rounds: u64,
        #[arg(long, default_value_t = 8)]
        blocks: usize,
        #[arg(long, default_value_t = 2)]
        block_size: usize,
    },
    /// Steganography demonstration scenario.
    StegDemo,
    /// Pareto audit of the abstention / robustness trade-off.
    ParetoAudit {
        /// Random candidate laws per scenario.
        #[arg(long, default_value_t = 10_000)]
        candidates: usize,
    },
    /// Full scenario run with every applicable certificate.
    Run {
        /// Include wall-clock times (makes output non-reproducible).
        #[arg(long)]
        timings: bool,
    },
}

struct Output {
    text: String,
    violations: usize,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::OracleProtocol(_) => EXIT_ORACLE,
        _ => EXIT_CONFIG,
    }
}

fn scenarios(global: &Global) -> Result<Vec<ScenarioConfig>, Error> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut list = load(path)?.scenarios;
    if let Some(name) = &global.scenario {
        list.retain(|sc| &sc.name == name);
        if list.is_empty() {
            return Err(Error::Config(format!("no scenario named {name:?}")));
        }
    }
    for sc in &mut list {
        if let Some(seed) = global.seed {
            sc.seed = seed;
        }
        if let Some(trials) = global.trials {
            sc.trials = trials;
        }
    }
    Ok(list)
}

fn load(path: &Path) -> Result<ScenarioFile, Error> {
    ScenarioFile::load(path)
}

fn exact_views(
    sc: &ScenarioConfig,
) -> Result<Vec<consensus_core::model::FiniteDistribution>, Error> {
    build_ensemble(sc)?.exact_views().ok_or_else(|| {
        Error::Config(format!(
            "scenario {:?}: some member has no enumerable distribution",
            sc.name
        ))
    })
}

fn render_rows<T: Serialize>(
    value: &T,
    format: Format,
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<String, Error> {
    match format {
        Format::Json => to_json(value),
        Format::Csv => Ok(write_csv(header, &rows)),
        Format::Table => Ok(write_table(header, &rows)),
    }
}

#[derive(Serialize)]
struct Named<T> {
    name: String,
    #[serde(flatten)]
    value: T,
}

#[derive(Serialize)]
struct Draws {
    results: Vec<SampleResult>,
}

fn cmd_sample(global: &Global, format: Format) -> Result<Output, Error> {
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for sc in scenarios(global)? {
        let ensemble = build_ensemble(&sc)?;
        let cfg = sampler_config(&sc)?;
        let mut rng = chunk_rng(sc.seed, 0);
        let draws = global.trials.unwrap_or(1);
        let mut results = Vec::new();
        for i in 0..draws {
            let r = consensus_sample(&ensemble, &cfg, &mut rng)?;
            rows.push(vec![
                sc.name.clone(),
                i.to_string(),
                r.outcome()
                    .map(|o| o.to_string())
                    .unwrap_or_else(|| "abstain".into()),
                match &r {
                    SampleResult::Generated { rounds_used, .. } => rounds_used.to_string(),
                    SampleResult::Abstain => String::new(),
                },
            ]);
            results.push(r);
        }
        out.push(Named {
            name: sc.name.clone(),
            value: Draws { results },
        });
    }
    Ok(Output {
        text: render_rows(
            &out,
            format,
            &["name", "draw", "outcome", "rounds_used"],
            rows,
        )?,
        violations: 0,
    })
}

#[derive(Serialize)]
struct LawOut {
    rounds: RoundBudget,
    abstain_mass: f64,
    output_mass: Vec<f64>,
}

fn cmd_law(global: &Global, format: Format) -> Result<Output, Error> {
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for sc in scenarios(global)? {
        let dists = exact_views(&sc)?;
        let law = exact_output_law(&dists, sc.s, &sampler_config(&sc)?)?;
        for (y, q) in law.extended_mass().iter().enumerate() {
            let label = if y == law.space_size() {
                "abstain".to_string()
            } else {
                y.to_string()
            };
            rows.push(vec![sc.name.clone(), label, format!("{q:.12}")]);
        }
        out.push(Named {
            name: sc.name.clone(),
            value: LawOut {
                rounds: sc.rounds,
                abstain_mass: law.abstain_mass(),
                output_mass: law.output_mass(),
            },
        });
    }
    Ok(Output {
        text: render_rows(&out, format, &["name", "outcome", "mass"], rows)?,
        violations: 0,
    })
}

fn cmd_overlap(global: &Global, format: Format) -> Result<Output, Error> {
    let mut out: Vec<Named<OverlapReport>> = Vec::new();
    let mut rows = Vec::new();
    for sc in scenarios(global)? {
        let dists = exact_views(&sc)?;
        let subset = sc
            .safe_set_hint
            .clone()
            .unwrap_or_else(|| (0..dists.len()).collect());
        let report = overlap_report(&dists, &subset)?;
        for entry in &report.delta_c {
            rows.push(vec![
                sc.name.clone(),
                entry.c.to_string(),
                format!("{:.9}", entry.value),
                format!("{:?}", entry.witness),
            ]);
        }
        out.push(Named {
            name: sc.name.clone(),
            value: report,
        });
    }
    Ok(Output {
        text: render_rows(&out, format, &["name", "c", "delta_c", "witness"], rows)?,
        violations: 0,
    })
}

#[derive(Serialize)]
struct RobustnessOut {
    worst_case_robustness: Robustness,
    certificates: Vec<Certificate>,
}

fn cmd_robustness(global: &Global, format: Format) -> Result<Output, Error> {
    let mut out = Vec::new();
    let mut rows = Vec::new();
    let mut violations = 0;
    for mut sc in scenarios(global)? {
        sc.trials = 0;
        let dists = exact_views(&sc)?;
        let law = exact_output_law(&dists, sc.s, &sampler_config(&sc)?)?;
        let worst = worst_case_robustness(&law, &dists, sc.s)?;
        let report = run_scenario(&sc, RunOptions::default())?;
        violations += report.robustness.iter().filter(|c| !c.pass).count();
        for c in &report.robustness {
            rows.push(vec![
                sc.name.clone(),
                c.name.clone(),
                c.check.clone(),
                c.pass.to_string(),
                c.lhs.map(|v| format!("{v:.9}")).unwrap_or_default(),
                c.rhs.map(|v| format!("{v:.9}")).unwrap_or_default(),
            ]);
        }
        out.push(Named {
            name: sc.name.clone(),
            value: RobustnessOut {
                worst_case_robustness: worst,
                certificates: report.robustness,
            },
        });
    }
    Ok(Output {
        text: render_rows(
            &out,
            format,
            &["name", "set", "check", "pass", "lhs", "rhs"],
            rows,
        )?,
        violations,
    })
}

fn cmd_curve(global: &Global, format: Format, max_rounds: u64) -> Result<Output, Error> {
    let mut out = Vec::new();
    let mut rows = Vec::new();
    let mut violations = 0;
    for sc in scenarios(global)? {
        let curve = abstention_curve(&sc, max_rounds)?;
        for p in &curve {
            if let (Some(e), Some(b)) = (p.exact, p.bound) {
                if e > b + 1e-9 {
                    violations += 1;
                }
            }
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
            rows.push(vec![
                sc.name.clone(),
                p.rounds.to_string(),
                fmt(p.exact),
                fmt(p.bound),
                format!("{:.6}", p.empirical),
            ]);
        }
        out.push(Named {
            name: sc.name.clone(),
            value: serde_json::json!({ "points": curve }),
        });
    }
    Ok(Output {
        text: render_rows(
            &out,
            format,
            &["name", "rounds", "exact", "bound", "empirical"],
            rows,
        )?,
        violations,
    })
}

fn cmd_leakage(
    global: &Global,
    format: Format,
    rounds: u64,
    blocks: usize,
    block_size: usize,
) -> Result<Output, Error> {
    if global.config.is_none() {
        let (p, family) = block_encoder_family(blocks, block_size, rounds)?;
        let report = leakage_audit(&family, &p, rounds as f64)?;
        let mi = mutual_information(&family);
        let rows = vec![vec![
            "block-encoder".to_string(),
            rounds.to_string(),
            format!("{mi:.9}"),
            format!("{:.9}", report.maximal_leakage_bits),
            format!("{:.9}", report.bound_bits),
            report.pass().to_string(),
        ]];
        return Ok(Output {
            violations: usize::from(!report.pass()),
            text: render_rows(
                &report,
                format,
                &[
                    "name",
                    "rounds",
                    "mutual_information",
                    "maximal_leakage",
                    "bound",
                    "pass",
                ],
                rows,
            )?,
        });
    }
    let mut out: Vec<Named<Option<LeakageSection>>> = Vec::new();
    let mut rows = Vec::new();
    let mut violations = 0;
    for mut sc in scenarios(global)? {
        sc.trials = 0;
        let report = run_scenario(&sc, RunOptions::default())?;
        if let Some(l) = &report.leakage {
            violations += usize::from(!l.report.pass());
            rows.push(vec![
                sc.name.clone(),
                sc.rounds.to_string(),
                format!("{:.9}", l.report.mutual_information_bits),
                format!("{:.9}", l.report.maximal_leakage_bits),
                format!("{:.9}", l.report.bound_bits),
                l.report.pass().to_string(),
            ]);
        }
        out.push(Named {
            name: sc.name.clone(),
            value: report.leakage,
        });
    }
    Ok(Output {
        text: render_rows(
            &out,
            format,
            &[
                "name",
                "rounds",
                "mutual_information",
                "maximal_leakage",
                "bound",
                "pass",
            ],
            rows,
        )?,
        violations,
    })
}

fn emit_full(report: &Report, format: Format) -> Result<Output, Error> {
    Ok(Output {
        text: render_report(report, format)?,
        violations: report.violation_count(),
    })
}

fn cmd_steg_demo(global: &Global, format: Format) -> Result<Output, Error> {
    let mut sc = steg_demo(global.seed.unwrap_or(0));
    if let Some(t) = global.trials {
        sc.trials = t;
    }
    let report = Report::new(vec![run_scenario(&sc, RunOptions::default())?]);
    emit_full(&report, format)
}

fn cmd_pareto(global: &Global, format: Format, candidates: usize) -> Result<Output, Error> {
    let mut out: Vec<Named<ParetoReport>> = Vec::new();
    let mut rows = Vec::new();
    let mut violations = 0;
    for sc in scenarios(global)? {
        let dists = exact_views(&sc)?;
        let mut grid = vec![sc.rounds];
        if sc.rounds != RoundBudget::Unbounded {
            grid.push(RoundBudget::Unbounded);
        }
        let mut rng = chunk_rng(sc.seed, u64::MAX);
        let report = pareto_audit(&dists, sc.s, &grid, candidates, &mut rng)?;
        violations += usize::from(!report.pass());
        for r in &report.rounds {
            rows.push(vec![
                sc.name.clone(),
                r.rounds.to_string(),
                format!("{:.9}", r.abstain_mass),
                match r.robustness {
                    Robustness::Finite(v) => format!("{v:.9}"),
                    Robustness::Infinite => "inf".into(),
                },
                r.candidates.to_string(),
                r.dominated_by.is_none().to_string(),
            ]);
        }
        out.push(Named {
            name: sc.name.clone(),
            value: report,
        });
    }
    Ok(Output {
        text: render_rows(
            &out,
            format,
            &[
                "name",
                "rounds",
                "abstain",
                "robustness",
                "candidates",
                "undominated",
            ],
            rows,
        )?,
        violations,
    })
}

fn cmd_run(global: &Global, format: Format, timings: bool) -> Result<Output, Error> {
    let file = ScenarioFile::new(scenarios(global)?);
    let report = run_file(&file, RunOptions { timings })?;
    emit_full(&report, format)
}

fn execute(cli: &Cli) -> Result<Output, Error> {
    let g = &cli.global;
    let fmt = |default: Format| g.format.map(Format::from).unwrap_or(default);
    match &cli.command {
        Command::Sample => cmd_sample(g, fmt(Format::Json)),
        Command::Law => cmd_law(g, fmt(Format::Json)),
        Command::Overlap => cmd_overlap(g, fmt(Format::Json)),
        Command::Robustness => cmd_robustness(g, fmt(Format::Json)),
        Command::AbstentionCurve { max_rounds } => cmd_curve(g, fmt(Format::Csv), *max_rounds),
        Command::Leakage {
            rounds,
            blocks,
            block_size,
        } => cmd_leakage(g, fmt(Format::Json), *rounds, *blocks, *block_size),
        Command::StegDemo => cmd_steg_demo(g, fmt(Format::Json)),
        Command::ParetoAudit { candidates } => cmd_pareto(g, fmt(Format::Json), *candidates),
        Command::Run { timings } => cmd_run(g, fmt(Format::Json), *timings),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|out| {
        write_output(cli.global.out.as_deref(), &out.text)?;
        Ok(out.violations)
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("consensus: {n} certificate violation(s)");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(e) => {
            eprintln!("consensus: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
