// SPDX-License-Identifier: Apache-2.0

//! The `scmc` command line.
//!
//! Exit codes: 0 on success. `validate` exits 1 when the model has
//! findings, `verify` exits 1 on a counterexample and 2 when inconclusive.
//! Any other failure exits 1, or 3 under `verify` where 1 is taken.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::consolidation::{
    consolidate, register_closed_form, ConsolidatedScm, ConsolidationError, PassConfig, PassKind,
};
use crate::document::{
    consolidated_from_str, consolidated_to_string, is_consolidated, model_from_str,
    model_to_string, partition_from_str, partition_to_string, DocumentError,
};
use crate::dot::to_dot;
use crate::evaluation::{
    eval_scm_with_rng, sample_exogenous, seeded_rng, Assignment, EvalScmError,
};
use crate::expr::{Value, VarRef};
use crate::metrics::{consolidated_metrics, model_metrics, render_table};
use crate::scm::{reparameterize, validate, ExoDistribution, GraphError, InterventionSet, Scm};
use crate::verification::{verify_equivalence, EquivalenceStrategy, Verdict};
use crate::zoo::{self, ZooError};

#[derive(Debug, Parser)]
#[command(name = "scmc", version, about = "Consolidate structural causal models")]
pub struct Cli {
    /// Print errors and reports as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model document for structural problems.
    Validate { model: PathBuf },
    /// Evaluate a model and print endogenous values as CSV.
    Eval {
        model: PathBuf,
        /// Intervention `Var=value`; repeatable.
        #[arg(long = "do", value_name = "VAR=VALUE")]
        interventions: Vec<String>,
        /// Exogenous value `Var=value`; repeatable. Point masses need none.
        #[arg(long = "exo", value_name = "VAR=VALUE")]
        exogenous: Vec<String>,
        /// Draw this many exogenous samples instead of using --exo.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, env = "SCMC_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Consolidate a model with respect to a partition and targets.
    Consolidate {
        model: PathBuf,
        partition: PathBuf,
        /// Comma-separated target variables; all endogenous by default.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Comma-separated cluster indices, `all` or `none`.
        #[arg(long, default_value = "all")]
        clusters: String,
        /// Comma-separated pass names; all passes by default.
        #[arg(long, value_delimiter = ',')]
        passes: Vec<String>,
        /// Apply passes without checking each against the input mechanism.
        #[arg(long)]
        no_verify: bool,
        /// Replace random draws by uniform noise variables first.
        #[arg(long)]
        reparameterize: bool,
        #[arg(long, env = "SCMC_SEED", default_value_t = 0)]
        seed: u64,
        /// Where to write the consolidated document; stdout if absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a consolidated model against its base model.
    Verify {
        base: PathBuf,
        consolidated: PathBuf,
        #[arg(long, conflicts_with = "samples")]
        exhaustive: bool,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, env = "SCMC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = crate::expr::EPS_VAL)]
        eps: f64,
    },
    /// Node counts and linear-map sizes of a model or consolidated model.
    Metrics { path: PathBuf },
    /// Print the causal graph in Graphviz format.
    ExportDot { model: PathBuf },
    /// Write one of the built-in example models to disk.
    Demo {
        name: String,
        /// Size parameter for scalable models.
        param: Option<i64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Document {
        path: String,
        #[source]
        source: DocumentError,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Eval(#[from] EvalScmError),
    #[error(transparent)]
    Consolidation(#[from] ConsolidationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Zoo(#[from] ZooError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Document {
                source: DocumentError::Parse { .. },
                ..
            } => "ParseError",
            CliError::Document { .. } => "DocumentError",
            CliError::Usage(_) => "UsageError",
            CliError::Eval(EvalScmError::InterventionNotAllowed(_)) => "InterventionNotAllowed",
            CliError::Eval(EvalScmError::MissingExogenous(_)) => "MissingExogenous",
            CliError::Eval(_) => "EvalError",
            CliError::Consolidation(ConsolidationError::InvalidPartition(_)) => "InvalidPartition",
            CliError::Consolidation(ConsolidationError::InvalidTarget(_)) => "InvalidTarget",
            CliError::Consolidation(_) => "ConsolidationError",
            CliError::Graph(_) => "GraphError",
            CliError::Zoo(ZooError::InvalidParameter(_)) => "InvalidParameter",
            CliError::Zoo(ZooError::UnknownModel(_)) => "UnknownModel",
        }
    }
}

type Out<'a> = &'a mut dyn Write;

/// Runs the command line on `args` (including the program name) and
/// returns the exit code.
pub fn run<I, S>(args: I, out: Out, err: Out) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let json = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            if json {
                let _ = writeln!(
                    out,
                    "{}",
                    json!({"error": "UsageError", "message": e.to_string()})
                );
            } else {
                let _ = write!(err, "{e}");
            }
            return 2;
        }
    };
    let is_verify = matches!(cli.command, Command::Verify { .. });
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            if cli.json {
                let _ = writeln!(
                    out,
                    "{}",
                    json!({"error": e.kind(), "message": e.to_string()})
                );
            } else {
                let _ = writeln!(err, "error: {e}");
            }
            if is_verify {
                3
            } else {
                1
            }
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn doc_err(path: &Path) -> impl FnOnce(DocumentError) -> CliError + '_ {
    move |source| CliError::Document {
        path: path.display().to_string(),
        source,
    }
}

fn load_model(path: &Path) -> Result<Scm, CliError> {
    model_from_str(&read(path)?).map_err(doc_err(path))
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

fn dispatch(cli: &Cli, out: Out) -> Result<i32, CliError> {
    match &cli.command {
        Command::Validate { model } => cmd_validate(model, cli.json, out),
        Command::Eval {
            model,
            interventions,
            exogenous,
            samples,
            seed,
        } => cmd_eval(model, interventions, exogenous, *samples, *seed, out),
        Command::Consolidate {
            model,
            partition,
            targets,
            clusters,
            passes,
            no_verify,
            reparameterize,
            seed,
            output,
        } => {
            let opts = ConsolidateOpts {
                targets,
                clusters,
                passes,
                verify: !no_verify,
                reparameterize: *reparameterize,
                seed: *seed,
                output: output.as_deref(),
            };
            cmd_consolidate(model, partition, &opts, cli.json, out)
        }
        Command::Verify {
            base,
            consolidated,
            exhaustive,
            samples,
            seed,
            eps,
        } => {
            let mut strategy = match (exhaustive, samples) {
                (_, Some(n)) => EquivalenceStrategy::sampled(*n, *seed),
                _ => EquivalenceStrategy::exhaustive(),
            };
            strategy.eps = *eps;
            cmd_verify(base, consolidated, &strategy, cli.json, out)
        }
        Command::Metrics { path } => cmd_metrics(path, cli.json, out),
        Command::ExportDot { model } => {
            let scm = load_model(model)?;
            out.write_all(to_dot(&scm)?.as_bytes()).map_err(io)?;
            Ok(0)
        }
        Command::Demo {
            name,
            param,
            out: dir,
        } => cmd_demo(name, *param, dir, out),
    }
}

fn cmd_validate(model: &Path, json: bool, out: Out) -> Result<i32, CliError> {
    let scm = load_model(model)?;
    let report = validate(&scm);
    if json {
        let findings: Vec<_> = report
            .findings
            .iter()
            .map(|f| json!({"kind": f.kind(), "message": f.to_string()}))
            .collect();
        writeln!(
            out,
            "{}",
            json!({"valid": report.is_valid(), "findings": findings})
        )
        .map_err(io)?;
    } else {
        write!(out, "{report}").map_err(io)?;
    }
    Ok(if report.is_valid() { 0 } else { 1 })
}

/// Splits `Var=value` and parses the value against the variable's domain.
fn binding(scm: &Scm, text: &str) -> Result<(VarRef, Value), CliError> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected VAR=VALUE, got '{text}'")))?;
    let var = scm
        .resolve(name.trim())
        .ok_or_else(|| CliError::Usage(format!("unknown variable '{name}'")))?;
    let domain = scm.domain(&var).expect("resolved variables have domains");
    let v = domain
        .parse_value(value)
        .ok_or_else(|| CliError::Usage(format!("'{value}' is not a value of {var} ({domain})")))?;
    Ok((var, v))
}

fn cmd_eval(
    model: &Path,
    interventions: &[String],
    exogenous: &[String],
    samples: Option<usize>,
    seed: u64,
    out: Out,
) -> Result<i32, CliError> {
    let scm = load_model(model)?;
    let mut i = InterventionSet::new();
    for d in interventions {
        let (v, x) = binding(&scm, d)?;
        if !scm.is_endogenous(&v) {
            return Err(CliError::Usage(format!("{v} is not endogenous")));
        }
        i.insert(v, x);
    }
    if !scm.interventions.contains(&i) {
        return Err(EvalScmError::InterventionNotAllowed(i).into());
    }
    let draws: Vec<Assignment> = match samples {
        Some(n) => {
            if !exogenous.is_empty() {
                return Err(CliError::Usage("--exo and --samples are exclusive".into()));
            }
            sample_exogenous(&scm, seed, n, false)?
        }
        None => {
            let mut u: Assignment = scm
                .exogenous
                .iter()
                .filter_map(|x| match &x.dist {
                    ExoDistribution::PointMass(v) => Some((x.var.clone(), v.clone())),
                    _ => None,
                })
                .collect();
            for e in exogenous {
                let (v, x) = binding(&scm, e)?;
                if !scm.is_exogenous(&v) {
                    return Err(CliError::Usage(format!("{v} is not exogenous")));
                }
                u.insert(v, x);
            }
            vec![u]
        }
    };
    // a separate stream for draws inside equations
    let mut rng = seeded_rng(seed ^ 0x9e37_79b9);
    let mut csv = String::from("draw_index,variable,value\n");
    for (k, u) in draws.iter().enumerate() {
        let vals = eval_scm_with_rng(&scm, u, &i, &mut rng)?;
        for e in &scm.endogenous {
            csv.push_str(&format!("{k},{},{}\n", e.var, vals[&e.var]));
        }
    }
    out.write_all(csv.as_bytes()).map_err(io)?;
    Ok(0)
}

struct ConsolidateOpts<'a> {
    targets: &'a [String],
    clusters: &'a str,
    passes: &'a [String],
    verify: bool,
    reparameterize: bool,
    seed: u64,
    output: Option<&'a Path>,
}

fn cmd_consolidate(
    model: &Path,
    partition: &Path,
    opts: &ConsolidateOpts,
    json: bool,
    out: Out,
) -> Result<i32, CliError> {
    let mut scm = load_model(model)?;
    if opts.reparameterize {
        scm = reparameterize(&scm);
    }
    let p = partition_from_str(&read(partition)?, &scm).map_err(doc_err(partition))?;
    let targets: BTreeSet<VarRef> = if opts.targets.is_empty() {
        scm.endogenous_vars().into_iter().collect()
    } else {
        opts.targets
            .iter()
            .map(|t| {
                scm.resolve(t.trim())
                    .ok_or_else(|| ConsolidationError::InvalidTarget(t.clone()).into())
            })
            .collect::<Result<_, CliError>>()?
    };
    let selected: Option<BTreeSet<usize>> = match opts.clusters.trim() {
        "all" => None,
        "none" => Some(BTreeSet::new()),
        list => Some(
            list.split(',')
                .map(|c| {
                    c.trim()
                        .parse()
                        .map_err(|_| CliError::Usage(format!("bad cluster index '{c}'")))
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    let mut config = PassConfig {
        verify: opts.verify,
        seed: opts.seed,
        ..PassConfig::default()
    };
    if !opts.passes.is_empty() {
        config.passes = opts
            .passes
            .iter()
            .map(|n| {
                PassKind::from_name(n.trim())
                    .ok_or_else(|| CliError::Usage(format!("unknown pass '{n}'")))
            })
            .collect::<Result<_, _>>()?;
    }
    let c = consolidate(&scm, &p, &targets, selected.as_ref(), &config)?;
    let doc = consolidated_to_string(&c);
    let summary = consolidation_summary(&c);
    match opts.output {
        Some(path) => {
            write_file(path, &doc)?;
            if json {
                let r = serde_json::to_string(&c.report).expect("reports serialize");
                writeln!(out, "{r}").map_err(io)?;
            } else {
                out.write_all(summary.as_bytes()).map_err(io)?;
            }
        }
        None => out.write_all(doc.as_bytes()).map_err(io)?,
    }
    Ok(0)
}

fn consolidation_summary(c: &ConsolidatedScm) -> String {
    let mut s = String::new();
    for r in &c.report.clusters {
        s.push_str(&format!(
            "cluster {} [{}]: {} -> {} nodes\n",
            r.cluster,
            r.variables.join(", "),
            r.nodes_before,
            r.nodes_after
        ));
    }
    if !c.report.marginalized.is_empty() {
        s.push_str(&format!(
            "marginalized: {}\n",
            c.report.marginalized.join(", ")
        ));
    }
    if !c.report.dropped_atoms.is_empty() {
        s.push_str(&format!(
            "dropped atoms: {}\n",
            c.report.dropped_atoms.join(", ")
        ));
    }
    s.push_str(&format!(
        "total: {} -> {} nodes\n",
        c.report.nodes_before(),
        c.report.nodes_after()
    ));
    s
}

fn replay_command(base: &Path, c: &crate::verification::CounterExample) -> String {
    let mut s = format!("scmc eval {}", base.display());
    for (k, v) in &c.u {
        s.push_str(&format!(" --exo {k}={v}"));
    }
    for (k, v) in c.interventions.iter() {
        s.push_str(&format!(" --do {k}={v}"));
    }
    s
}

fn cmd_verify(
    base: &Path,
    consolidated: &Path,
    strategy: &EquivalenceStrategy,
    json: bool,
    out: Out,
) -> Result<i32, CliError> {
    let scm = load_model(base)?;
    let cons = consolidated_from_str(&read(consolidated)?).map_err(doc_err(consolidated))?;
    let report = verify_equivalence(&scm, &cons, strategy);
    if json {
        let mut j = report.to_json();
        if let Verdict::CounterExample(c) = &report.verdict {
            j["replay"] = json!(replay_command(base, c));
        }
        writeln!(out, "{j}").map_err(io)?;
    } else {
        let mut s = format!(
            "verdict: {}\ninterventions checked: {}\ncases checked: {}\nskipped: {}\nmax deviation: {:e}\n",
            report.verdict_name(),
            report.interventions_checked,
            report.cases_checked,
            report.skipped,
            report.max_deviation
        );
        match &report.verdict {
            Verdict::CounterExample(c) => {
                s.push_str(&format!(
                    "counterexample: {c}\nreplay:\n  {}\n",
                    replay_command(base, c)
                ));
            }
            Verdict::Inconclusive(why) => s.push_str(&format!("reason: {why}\n")),
            Verdict::Equal => {}
        }
        out.write_all(s.as_bytes()).map_err(io)?;
    }
    Ok(report.exit_code())
}

fn cmd_metrics(path: &Path, json: bool, out: Out) -> Result<i32, CliError> {
    let text = read(path)?;
    let m = if is_consolidated(&text) {
        consolidated_metrics(&consolidated_from_str(&text).map_err(doc_err(path))?)
    } else {
        model_metrics(&model_from_str(&text).map_err(doc_err(path))?)
    };
    if json {
        writeln!(
            out,
            "{}",
            serde_json::to_string(&m).expect("metrics serialize")
        )
        .map_err(io)?;
    } else {
        out.write_all(render_table(&m).as_bytes()).map_err(io)?;
    }
    Ok(0)
}

fn cmd_demo(name: &str, param: Option<i64>, dir: &Path, out: Out) -> Result<i32, CliError> {
    let e = zoo::entry(name, param)?;
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let stem = e.scm.name.clone();
    let model = dir.join(format!("{stem}.model.json"));
    let partition = dir.join(format!("{stem}.partition.json"));
    write_file(&model, &model_to_string(&e.scm))?;
    write_file(&partition, &partition_to_string(&e.partition))?;
    let mut s = format!("wrote {}\nwrote {}\n", model.display(), partition.display());
    let mut strategy = EquivalenceStrategy::exhaustive();
    strategy.schedule = e.schedule.clone();
    let mut forms: Vec<(String, crate::consolidation::Ccv)> = e
        .closed_forms
        .iter()
        .map(|c| ("closed_form".to_string(), c.clone()))
        .collect();
    if name == "platformer" {
        forms.push(("printed".into(), zoo::platformer_printed_ccv(&e.scm)));
    }
    for (tag, ccv) in forms {
        let path = dir.join(format!("{stem}.{tag}.json"));
        match register_closed_form(&e.scm, ccv.clone(), &strategy) {
            Ok(v) => s.push_str(&format!(
                "{tag}: verified over {} cases, {} nodes\n",
                v.report.cases_checked, v.node_count
            )),
            Err(ConsolidationError::EquivalenceFailed(c)) => {
                s.push_str(&format!("{tag}: disagrees with the model at {c}\n"))
            }
            Err(other) => s.push_str(&format!("{tag}: {other}\n")),
        }
        write_file(
            &path,
            &consolidated_to_string(&ConsolidatedScm::from_ccv(&e.scm, ccv)),
        )?;
        s.push_str(&format!("wrote {}\n", path.display()));
    }
    let targets: Vec<String> = e.targets.iter().map(VarRef::to_string).collect();
    s.push_str(&format!("targets: {}\n", targets.join(",")));
    if let Some(c) = &e.clusters {
        let c: Vec<String> = c.iter().map(usize::to_string).collect();
        s.push_str(&format!("clusters: {}\n", c.join(",")));
    }
    for n in &e.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    out.write_all(s.as_bytes()).map_err(io)?;
    Ok(0)
}
