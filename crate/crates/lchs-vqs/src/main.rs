use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lchs_vqs::commands::{self, sibling};
use lchs_vqs::config::{Settings, PRESETS};
use lchs_vqs::formats::{
    emit_gate_list, parse_calibration, parse_counts, parse_gate_list, parse_operator, parse_parameters, read_file,
    write_file,
};
use lchs_vqs::{init_threads, CliError, Result};
use lchs_vqs_core::circuit::AnsatzSpec;
use lchs_vqs_core::models::occupation;
use lchs_vqs_core::pauli::{Pauli, PauliSum, PauliTerm, PauliWord};
use lchs_vqs_core::C64;

#[derive(Parser)]
#[command(name = "lchs-vqs", version, about = "Variational simulation of non-Hermitian dynamics")]
struct Cli {
    /// Worker threads (overrides LCHS_VQS_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare LCHS and dense evolution for each (K, dk) pair.
    BenchLchs(RunArgs),
    /// Variational time evolution; writes a CSV and a JSON manifest.
    RunVqs(RunArgs),
    /// Dense-oracle observable curves.
    EvolveExact(RunArgs),
    /// Rewrite a controlled circuit pair for the Hadamard test.
    Simplify(SimplifyArgs),
    /// Readout-error mitigation of measured counts.
    Mitigate(MitigateArgs),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Preset applied before the config file.
    #[arg(long)]
    preset: Option<String>,
    /// Model name (ising, hatano-nelson, hatano-nelson-dual, ssh, custom).
    #[arg(long)]
    model: Option<String>,
    /// Individual overrides, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// CSV destination; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Manifest destination (run-vqs).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SimplifyArgs {
    /// Gate-list file; rotations without an angle are parameters.
    #[arg(long, conflicts_with = "hea", required_unless_present = "hea")]
    circuit: Option<PathBuf>,
    /// Hardware-efficient ansatz `QUBITS:LAYERS` instead of a file.
    #[arg(long)]
    hea: Option<String>,
    /// Parameters of the 0-controlled branch (`a,b,...` or `@file`).
    #[arg(long, allow_hyphen_values = true)]
    theta: String,
    /// Parameters of the 1-controlled branch.
    #[arg(long, allow_hyphen_values = true)]
    theta_m: String,
    /// Operator file of a node generator to append the controlled U_k block.
    #[arg(long, requires = "dt")]
    generator: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    /// Directory for reference.gates and simplified.gates.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MitigateArgs {
    /// Counts file.
    #[arg(long)]
    counts: PathBuf,
    /// Calibration file.
    #[arg(long)]
    calibration: PathBuf,
    /// Diagonal observable operator files; defaults to every Z_j and n_j.
    #[arg(long)]
    observable: Vec<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn settings(args: &RunArgs) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(p) = &args.preset {
        s.apply_preset(p)?;
    }
    if let Some(path) = &args.config {
        s.apply_file(path)?;
    }
    if let Some(m) = &args.model {
        s.set("model", m)?;
    }
    for o in &args.overrides {
        s.apply_override(o)?;
    }
    if let Some(out) = &args.out {
        s.set("output.csv", &out.display().to_string())?;
    }
    if let Some(m) = &args.manifest {
        s.set("output.manifest", &m.display().to_string())?;
    }
    Ok(s)
}

/// Output paths given on the command line are taken as-is, not relative to
/// the config file.
fn output_path(s: &Settings, args: &RunArgs, key: &str) -> Option<PathBuf> {
    let direct = match key {
        "output.csv" => args.out.clone(),
        _ => args.manifest.clone(),
    };
    direct.or_else(|| s.path(key))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source }),
    }
}

fn parameters(arg: &str) -> Result<Vec<f64>> {
    match arg.strip_prefix('@') {
        Some(path) => parse_parameters(&read_file(Path::new(path))?, path),
        None => parse_parameters(arg, "command line"),
    }
}

fn run_vqs(args: &RunArgs) -> Result<()> {
    let s = settings(args)?;
    let csv_path = output_path(&s, args, "output.csv");
    if s.flag("model.with_dual")? && csv_path.is_none() {
        return Err(CliError::Config("a paired run needs an output path (--out)".into()));
    }
    let runs = commands::run_vqs(&s)?;
    let mut entries = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let path = csv_path.as_ref().map(|p| if i == 0 { p.clone() } else { sibling(p, "-dual", "csv") });
        emit(path.as_deref(), &run.csv)?;
        if let Some(replay) = &run.replay_csv {
            match &path {
                Some(p) => write_file(&sibling(p, "-replay", "csv"), replay)?,
                None => emit(None, replay)?,
            }
        }
        let label = path.as_ref().map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string());
        entries.push((label, run.summary.clone()));
        if run.summary["all_converged"] == false {
            eprintln!("warning: {} had steps above the convergence threshold", run.model);
        }
    }
    let manifest_path = output_path(&s, args, "output.manifest").or_else(|| csv_path.as_ref().map(|p| p.with_extension("json")));
    if let Some(p) = manifest_path {
        write_file(&p, &commands::manifest(&s, "run-vqs", &entries)?)?;
    }
    Ok(())
}

fn simplify(args: &SimplifyArgs) -> Result<()> {
    let template = match (&args.circuit, &args.hea) {
        (Some(path), _) => parse_gate_list(&read_file(path)?, &path.display().to_string(), None)?,
        (None, Some(spec)) => {
            let parsed = spec.split_once(':').and_then(|(n, l)| Some((n.parse().ok()?, l.parse().ok()?)));
            let (n, layers) = parsed.ok_or_else(|| CliError::Config(format!("--hea `{spec}` is not QUBITS:LAYERS")))?;
            AnsatzSpec::new(n, layers).template()
        }
        (None, None) => unreachable!("clap requires one of --circuit and --hea"),
    };
    let theta = parameters(&args.theta)?;
    let theta_m = parameters(&args.theta_m)?;
    let generator = match &args.generator {
        Some(p) => Some(parse_operator(&read_file(p)?, &p.display().to_string())?),
        None => None,
    };
    let uk = generator.as_ref().zip(args.dt);
    let out = commands::simplify(&template, &theta, &theta_m, uk)?;
    let (reference, simplified) = (emit_gate_list(&out.reference), emit_gate_list(&out.simplified));
    match &args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.clone(), source })?;
            write_file(&dir.join("reference.gates"), &reference)?;
            write_file(&dir.join("simplified.gates"), &simplified)?;
            emit(None, &out.summary)?;
        }
        None => emit(None, &format!("## reference\n{reference}## simplified\n{simplified}## summary\n{}", out.summary))?,
    }
    if out.equivalent == Some(false) {
        return Err(CliError::Numerical(lchs_vqs_core::Error::InvalidArgument(
            "simplified circuit is not equivalent to the reference".into(),
        )));
    }
    Ok(())
}

fn default_observables(n: usize) -> Result<Vec<(String, PauliSum)>> {
    let mut out = Vec::new();
    for j in 0..n {
        let z = PauliSum::new(n, [PauliTerm::new(C64::new(1.0, 0.0), PauliWord::sparse(n, &[(j, Pauli::Z)])?)])?;
        out.push((format!("Z_{j}"), z));
    }
    for j in 0..n {
        out.push((format!("n_{j}"), occupation(n, j)?));
    }
    Ok(out)
}

fn mitigate(args: &MitigateArgs) -> Result<()> {
    let counts = parse_counts(&read_file(&args.counts)?, &args.counts.display().to_string())?;
    let cal = parse_calibration(&read_file(&args.calibration)?, &args.calibration.display().to_string())?;
    let observables = if args.observable.is_empty() {
        default_observables(counts.n_qubits()).map_err(|e| CliError::Config(e.to_string()))?
    } else {
        args.observable
            .iter()
            .map(|p| {
                let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                Ok((name, parse_operator(&read_file(p)?, &p.display().to_string())?))
            })
            .collect::<Result<Vec<_>>>()?
    };
    emit(args.out.as_deref(), &commands::mitigate_counts(&counts, &cal, &observables)?)
}

fn run(cli: &Cli) -> Result<()> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::BenchLchs(a) => {
            let s = settings(a)?;
            emit(output_path(&s, a, "output.csv").as_deref(), &commands::bench_lchs(&s)?)
        }
        Command::RunVqs(a) => run_vqs(a),
        Command::EvolveExact(a) => {
            let s = settings(a)?;
            emit(output_path(&s, a, "output.csv").as_deref(), &commands::evolve_exact(&s)?)
        }
        Command::Simplify(a) => simplify(a),
        Command::Mitigate(a) => mitigate(a),
        Command::Presets => emit(None, &(PRESETS.join("\n") + "\n")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
