use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use phnet::nalgebra::{DMatrix, DVector};
use phnet::{
    apply_transform, build_phdae, condense_general, condense_skew, constant_input, decouple_auto, decouple_with_ports,
    dynamic_iteration, eliminate_ports, energy_report, implicit_midpoint, strang_split, validate_structure,
    Condensation, CoupledNetwork, CouplingBlock, CouplingLaw, DynamicIteration, EnergyReport, InnerSolver,
    IterationMode, LinearPhSystem, LinearPortRelation, LinearTransform, Method, Partition, PortDecoupling,
    PortHamiltonian, StructureReport, Trajectory, DEFAULT_TOL,
};
use serde::Deserialize;

use crate::document::{self, Loaded, MatrixSpec};
use crate::error::Failure;
use crate::table;

#[derive(Debug, Parser)]
#[command(name = "phnet", version, about = "Couple, decouple and simulate linear port-Hamiltonian systems")]
pub struct Cli {
    /// Skip the structural check that runs when a document is loaded.
    #[arg(long, global = true)]
    pub no_validate: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CondenseMode {
    /// Dispatch on the coupling law.
    Auto,
    /// Skew interconnection only.
    Skew,
    /// Arbitrary coupling matrix; fails if the result is not dissipative.
    General,
    /// Keep the port variables and write a descriptor system.
    Phdae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMethod {
    Midpoint,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CosimMode {
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InnerArg {
    Midpoint,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    TwoMass,
    Poroelastic,
    Maxwell,
}

impl ModelName {
    fn key(self) -> &'static str {
        match self {
            ModelName::TwoMass => "two-mass",
            ModelName::Poroelastic => "poroelastic",
            ModelName::Maxwell => "maxwell",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check skew-symmetry, dissipation, gradient compatibility and regularity.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Sample states for the gradient compatibility check.
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Interconnect a network into one system.
    Condense {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = CondenseMode::Auto)]
        mode: CondenseMode,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split a system into subsystems coupled through ports.
    Decouple {
        file: PathBuf,
        /// Block sizes, e.g. `3,2`.
        #[arg(long, value_delimiter = ',', required = true)]
        partition: Vec<usize>,
        /// Zero-based state reordering applied first: new state `k` is old state `order[k]`.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
        /// Internal ports and coupling blocks to verify instead of the automatic split.
        #[arg(long)]
        ports: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Integrate a system with the implicit midpoint rule or Strang splitting.
    Simulate {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = SimMethod::Midpoint)]
        method: SimMethod,
        /// Constant input; zero when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Option<Vec<f64>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate a network by waveform relaxation over its subsystems.
    Cosim {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = CosimMode::Jacobi)]
        mode: CosimMode,
        #[arg(long)]
        window: f64,
        #[arg(long)]
        sweeps: usize,
        #[arg(long)]
        dt: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Option<Vec<f64>>,
        /// Per-subsystem integrator, e.g. `strang,midpoint`.
        #[arg(long, value_enum, value_delimiter = ',')]
        inner: Option<Vec<InnerArg>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Recompute the discrete energy balance of a stored trajectory.
    Report {
        trajectory: PathBuf,
        system: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Option<Vec<f64>>,
    },
    /// Write a built-in model as a document.
    Model {
        #[arg(value_enum)]
        name: ModelName,
        /// Parameter overrides, e.g. `m1=2,r1=0`.
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        /// Write the model's canonical network instead of the monolithic system.
        #[arg(long)]
        network: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// User-supplied ports for `decouple --ports`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortsDoc {
    version: u32,
    ports: Vec<MatrixSpec>,
    #[serde(default)]
    blocks: Vec<BlockDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    i: usize,
    j: usize,
    matrix: Vec<Vec<f64>>,
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    document::parse_document(&read_text(path)?).map_err(|f| Failure::new(f.code, format!("{}: {}", path.display(), f)))
}

fn emit(output: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn dense(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, Failure> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Failure::input(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn indefinite(min_eigenvalue: f64) -> Failure {
    Failure::validation(format!(
        "condensed dissipation is indefinite (minimum eigenvalue {min_eigenvalue:.3e}); \
         keep the ports with --mode phdae (build_phdae) instead"
    ))
}

fn monolithic(c: Condensation) -> Result<LinearPhSystem, Failure> {
    match c {
        Condensation::Monolithic(s) => Ok(s),
        Condensation::IndefiniteDissipation { min_eigenvalue } => Err(indefinite(min_eigenvalue)),
    }
}

/// A single system to integrate or report against; networks are condensed.
fn as_system(loaded: Loaded) -> Result<LinearPhSystem, Failure> {
    match loaded {
        Loaded::System(s) => Ok(s),
        Loaded::Network(n) => monolithic(n.condense()?),
        Loaded::Phdae(_) => Err(Failure::numerical(
            "descriptor system: integrate unsupported (flow matrix is singular); eliminate the ports first",
        )),
    }
}

fn input_vector(u: &Option<Vec<f64>>, m: usize) -> Result<DVector<f64>, Failure> {
    match u {
        None => Ok(DVector::zeros(m)),
        Some(v) if v.len() == m => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Failure::usage(format!("--u: expected {m} values, found {}", v.len()))),
    }
}

fn start_vector(x0: &[f64], n: usize) -> Result<DVector<f64>, Failure> {
    if x0.len() != n {
        return Err(Failure::usage(format!("--x0: expected {n} values, found {}", x0.len())));
    }
    Ok(DVector::from_column_slice(x0))
}

fn summary(traj: &Trajectory, rep: &EnergyReport) -> String {
    let h = traj.energy();
    let (first, last) = (h.first().copied().unwrap_or(0.0), h.last().copied().unwrap_or(0.0));
    let monotone = match rep.monotone {
        Some(true) => "yes",
        Some(false) => "NO",
        None => "n/a (forced)",
    };
    format!(
        "{}: {} steps, H {first:.6e} -> {last:.6e}, max balance residual {:.3e}, monotone {monotone}",
        traj.method(),
        traj.steps(),
        rep.max_residual
    )
}

fn write_run(
    output: &Option<PathBuf>,
    traj: &Trajectory,
    rep: &EnergyReport,
    n: usize,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let mut buf = Vec::new();
    table::write_trajectory(&mut buf, traj, rep, n)?;
    emit(output, std::str::from_utf8(&buf).expect("CSV is UTF-8"), stdout)?;
    writeln!(stderr, "{}", summary(traj, rep))?;
    Ok(())
}

fn parse_params(items: &[String]) -> Result<BTreeMap<String, f64>, Failure> {
    let mut out = BTreeMap::new();
    for item in items {
        let (k, v) =
            item.split_once('=').ok_or_else(|| Failure::usage(format!("--params: {item:?} is not key=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| Failure::usage(format!("--params: {k}: {v:?} is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Deterministic, well-spread sample states.
fn sample_states(n: usize, count: usize) -> Vec<DVector<f64>> {
    (0..count).map(|k| DVector::from_fn(n, |i, _| (1.3 * (k + 1) as f64 + 0.7 * i as f64).sin())).collect()
}

fn check(sys: &LinearPhSystem, tol: f64, samples: usize) -> Result<StructureReport, Failure> {
    Ok(validate_structure(sys, &sample_states(sys.state_dim(), samples), tol)?)
}

/// Writes structure reports for `loaded` and returns the labels of the
/// parts that fail. With `coupled` set, networks are also condensed and the
/// result checked.
fn inspect(
    loaded: &Loaded,
    tol: f64,
    samples: usize,
    coupled: bool,
    out: &mut dyn Write,
) -> Result<Vec<String>, Failure> {
    let mut failed = Vec::new();
    match loaded {
        Loaded::System(sys) => {
            let rep = check(sys, tol, samples)?;
            writeln!(out, "linear system n={} m={}\n{rep}", sys.state_dim(), sys.input_dim())?;
            if !rep.passed() {
                failed.push("system".to_string());
            }
            if !rep.flow_regular {
                writeln!(out, "note: flow matrix is singular; the system cannot be integrated directly")?;
            }
        }
        Loaded::Network(net) => {
            writeln!(out, "network of {} subsystems, n={}", net.len(), net.state_dim())?;
            for (i, s) in net.subsystems().iter().enumerate() {
                let rep = check(s, tol, samples)?;
                writeln!(out, "subsystem {i}:\n{rep}")?;
                if !rep.passed() {
                    failed.push(format!("subsystem {i}"));
                }
            }
            if coupled && failed.is_empty() {
                match net.condense() {
                    Ok(Condensation::Monolithic(sys)) => {
                        let rep = check(&sys, tol, samples)?;
                        writeln!(out, "condensed system:\n{rep}")?;
                        if !rep.passed() {
                            failed.push("condensed system".into());
                        }
                    }
                    Ok(Condensation::IndefiniteDissipation { min_eigenvalue }) => {
                        writeln!(out, "condensed dissipation is indefinite (minimum eigenvalue {min_eigenvalue:.3e})")?;
                        failed.push("coupling".into());
                    }
                    Err(e) => writeln!(out, "coupling cannot be eliminated: {e}")?,
                }
            }
        }
        Loaded::Phdae(dae) => {
            let violation = dae.structure_violation();
            let [n, k, l, q] = dae.block_sizes();
            writeln!(out, "descriptor system dim={} blocks=({n}, {k}, {l}, {q})", dae.dim())?;
            writeln!(out, "structure skew violation {violation:.3e}")?;
            if violation > tol * (1.0 + dae.operator().amax()) {
                failed.push("descriptor structure".into());
            }
            let rep = check(dae.base(), tol, samples)?;
            if !(rep.psd_ok && rep.skew_ok) {
                writeln!(out, "base system:\n{rep}")?;
                failed.push("base system".into());
            }
        }
    }
    Ok(failed)
}

fn validate_cmd(path: &Path, tol: f64, samples: usize, out: &mut dyn Write) -> Result<(), Failure> {
    let failed = inspect(&load(path)?, tol, samples, true, out)?;
    if failed.is_empty() {
        writeln!(out, "valid")?;
        Ok(())
    } else {
        Err(Failure::validation(format!("structure check failed: {}", failed.join(", "))))
    }
}

/// Loads a document and, unless disabled, rejects it when a part fails the
/// structural check. The reports are embedded in the error.
fn load_checked(path: &Path, no_validate: bool) -> Result<Loaded, Failure> {
    let loaded = load(path)?;
    if no_validate {
        return Ok(loaded);
    }
    let mut buf = Vec::new();
    let failed = inspect(&loaded, DEFAULT_TOL, 0, false, &mut buf)?;
    if failed.is_empty() {
        Ok(loaded)
    } else {
        Err(Failure::validation(format!(
            "{}: structure check failed: {} (use --no-validate to skip)\n{}",
            path.display(),
            failed.join(", "),
            String::from_utf8_lossy(&buf).trim_end()
        )))
    }
}

fn condense_cmd(
    path: &Path,
    no_validate: bool,
    mode: CondenseMode,
    output: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let net = match load_checked(path, no_validate)? {
        Loaded::Network(n) => n,
        Loaded::Phdae(dae) => {
            if mode != CondenseMode::Auto {
                return Err(Failure::usage("descriptor documents only support --mode auto"));
            }
            let sys = monolithic(eliminate_ports(&dae)?)?;
            return emit(output, &document::system_to_json(&sys), stdout);
        }
        Loaded::System(_) => return Err(Failure::usage("condense expects a network document")),
    };
    let sys = match mode {
        CondenseMode::Auto => monolithic(net.condense()?)?,
        CondenseMode::Skew => condense_skew(&net)?,
        CondenseMode::General => match net.law() {
            CouplingLaw::Matrix(c) => monolithic(condense_general(&net, c)?)?,
            CouplingLaw::Relation(_) => return Err(Failure::usage("--mode general needs a coupling matrix")),
        },
        CondenseMode::Phdae => {
            let rel = match net.law() {
                CouplingLaw::Relation(r) => r.clone(),
                CouplingLaw::Matrix(c) => LinearPortRelation::new(DMatrix::identity(c.nrows(), c.ncols()), c.clone())?,
            };
            let dae = build_phdae(&net, &rel)?;
            return emit(output, &document::phdae_to_json(&dae, &net), stdout);
        }
    };
    emit(output, &document::system_to_json(&sys), stdout)
}

fn decouple_cmd(
    path: &Path,
    no_validate: bool,
    partition: &[usize],
    order: &Option<Vec<usize>>,
    ports: &Option<PathBuf>,
    output: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let Loaded::System(mut sys) = load_checked(path, no_validate)? else {
        return Err(Failure::usage("decouple expects a linear system document"));
    };
    if let Some(order) = order {
        sys = apply_transform(&sys, &LinearTransform::permutation(order)?)?;
    }
    let p = Partition::new(partition.to_vec())?;
    let net: CoupledNetwork = match ports {
        None => decouple_auto(&sys, &p)?,
        Some(file) => {
            let doc: PortsDoc = serde_json::from_str(&read_text(file)?)
                .map_err(|e| Failure::input(format!("{}: {e}", file.display())))?;
            if doc.version != document::FORMAT_VERSION {
                return Err(Failure::input(format!("{}: unsupported format version {}", file.display(), doc.version)));
            }
            if doc.ports.len() != p.len() {
                return Err(Failure::usage(format!("expected {} port matrices, found {}", p.len(), doc.ports.len())));
            }
            let port_mats = doc
                .ports
                .iter()
                .zip(p.sizes())
                .enumerate()
                .map(|(i, (spec, &ni))| match spec {
                    MatrixSpec::Rows(rows) => dense(rows, &format!("ports[{i}]")),
                    MatrixSpec::Named(document::Shorthand::Identity) => Ok(DMatrix::identity(ni, ni)),
                    MatrixSpec::Named(document::Shorthand::Zeros) => {
                        Err(Failure::input(format!("ports[{i}]: \"zeros\" has no implied width")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let blocks = doc
                .blocks
                .iter()
                .map(|b| Ok(CouplingBlock::new(b.i, b.j, dense(&b.matrix, "blocks")?)))
                .collect::<Result<Vec<_>, Failure>>()?;
            match decouple_with_ports(&sys, &p, port_mats, &blocks)? {
                PortDecoupling::Verified(net) => net,
                PortDecoupling::Failed(f) => {
                    let rows: Vec<String> = f
                        .residual
                        .row_iter()
                        .map(|r| format!("  [{}]", r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", ")))
                        .collect();
                    return Err(Failure::verification(format!(
                        "port decoupling does not reproduce blocks ({}, {}); max residual {:.3e}\nresidual:\n{}",
                        f.pair.0,
                        f.pair.1,
                        f.max_residual,
                        rows.join("\n")
                    )));
                }
            }
        }
    };
    emit(output, &document::network_to_json(&net), stdout)
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    path: &Path,
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
    method: SimMethod,
    u: &Option<Vec<f64>>,
    no_validate: bool,
    output: &Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let sys = as_system(load_checked(path, no_validate)?)?;
    let x0 = start_vector(x0, sys.state_dim())?;
    let input = constant_input(input_vector(u, sys.input_dim())?);
    let traj = match method {
        SimMethod::Midpoint => implicit_midpoint(&sys, &input, &x0, t0, t1, dt)?,
        SimMethod::Strang => strang_split(&sys, &input, &x0, t0, t1, dt)?,
    };
    let rep = energy_report(&traj, &sys)?;
    write_run(output, &traj, &rep, sys.state_dim(), stdout, stderr)
}

#[allow(clippy::too_many_arguments)]
fn cosim_cmd(
    path: &Path,
    no_validate: bool,
    mode: CosimMode,
    window: f64,
    sweeps: usize,
    dt: f64,
    x0: &[f64],
    t0: f64,
    t1: f64,
    u: &Option<Vec<f64>>,
    inner: &Option<Vec<InnerArg>>,
    output: &Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let Loaded::Network(net) = load_checked(path, no_validate)? else {
        return Err(Failure::usage("cosim expects a network document"));
    };
    let mode = match mode {
        CosimMode::Jacobi => IterationMode::Jacobi,
        CosimMode::GaussSeidel => IterationMode::GaussSeidel,
    };
    let mut cfg = DynamicIteration::new(mode, window, sweeps);
    if let Some(list) = inner {
        cfg = cfg.with_inner(
            list.iter()
                .map(|a| match a {
                    InnerArg::Midpoint => InnerSolver::Midpoint,
                    InnerArg::Strang => InnerSolver::Strang,
                })
                .collect(),
        );
    }
    let x0 = start_vector(x0, net.state_dim())?;
    let input = constant_input(input_vector(u, net.external_dim())?);
    let traj = dynamic_iteration(&net, &cfg, &input, &x0, t0, t1, dt)?;
    let condensed = condense_skew(&net)?;
    let rep = energy_report(&traj, &condensed)?;
    write_run(output, &traj, &rep, net.state_dim(), stdout, stderr)
}

fn report_cmd(
    traj_path: &Path,
    sys_path: &Path,
    no_validate: bool,
    u: &Option<Vec<f64>>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let sys = as_system(load_checked(sys_path, no_validate)?)?;
    let file = fs::File::open(traj_path).map_err(|e| Failure::usage(format!("{}: {e}", traj_path.display())))?;
    let t = table::read_trajectory(file).map_err(|f| Failure::new(f.code, format!("{}: {f}", traj_path.display())))?;
    let input = constant_input(input_vector(u, sys.input_dim())?);
    let traj = Trajectory::from_states(Method::External, &sys, t.times.clone(), t.states.clone(), &input)?;
    let rep = energy_report(&traj, &sys)?;
    let stored_h = t.energy.iter().zip(traj.energy()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    writeln!(out, "{}", summary(&traj, &rep))?;
    writeln!(out, "max |H(table) - H(system)| {stored_h:.3e}")?;
    if let Some((k, _)) = rep.residuals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        writeln!(out, "largest residual at step {} (t = {})", k + 1, t.times[k + 1])?;
    }
    if rep.decay_violated() {
        return Err(Failure::validation("unforced trajectory gains energy"));
    }
    Ok(())
}

fn model_cmd(
    name: ModelName,
    params: &[String],
    network: bool,
    output: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let loaded = document::build_model(name.key(), &parse_params(params)?, network)?;
    emit(output, &document::loaded_to_json(&loaded)?, stdout)
}

/// Runs one parsed command. Data goes to `stdout`, run summaries to `stderr`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let nv = cli.no_validate;
    match &cli.command {
        Command::Validate { file, tol, samples } => validate_cmd(file, *tol, *samples, stdout),
        Command::Condense { file, mode, output } => condense_cmd(file, nv, *mode, output, stdout),
        Command::Decouple { file, partition, order, ports, output } => {
            decouple_cmd(file, nv, partition, order, ports, output, stdout)
        }
        Command::Simulate { file, x0, t0, t1, dt, method, u, output } => {
            simulate_cmd(file, x0, *t0, *t1, *dt, *method, u, nv, output, stdout, stderr)
        }
        Command::Cosim { file, mode, window, sweeps, dt, x0, t0, t1, u, inner, output } => {
            cosim_cmd(file, nv, *mode, *window, *sweeps, *dt, x0, *t0, *t1, u, inner, output, stdout, stderr)
        }
        Command::Report { trajectory, system, u } => report_cmd(trajectory, system, nv, u, stdout),
        Command::Model { name, params, network, output } => model_cmd(*name, params, *network, output, stdout),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. Help and version requests exit 0.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                crate::error::EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {f}");
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn params_parse() {
        let p = parse_params(&["m1=2".into(), " r1 = 0 ".into()]).unwrap();
        assert_eq!(p["m1"], 2.0);
        assert_eq!(p["r1"], 0.0);
        assert!(parse_params(&["m1".into()]).is_err());
    }
}
