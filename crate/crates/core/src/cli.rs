//! Command-line front end.
//!
//! Exit codes: 0 success, 1 solver error, 2 structure validation failure, 3 I/O error,
//! 4 parse error (problem files, matrices, command-line values).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::arnoldi::{run, Mode, SolveResult, SolverConfig, StartFunction};
use crate::error::{Error, Result};
use crate::io::{self, OutputSection, ProblemFile, ProblemSection, SolverSection, StartSpec};
use crate::problem::{DelayHamiltonianProblem, Shift, DEFAULT_STRUCTURE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "hamdelay",
    version,
    about = "Structure-preserving infinite Arnoldi for Hamiltonian delay eigenvalue problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the problem, run the solver and write the requested tables.
    Solve(SolveArgs),
    /// Run baseline, plain-R and J-enforced with the same start and compare them.
    Compare(SolveArgs),
    /// Check the Hamiltonian structure conditions of a problem.
    Validate(ValidateArgs),
    /// Write a built-in example as Matrix Market files plus a problem file.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Problem file (TOML).
    #[arg(long, conflicts_with = "example")]
    pub problem: Option<PathBuf>,
    /// Built-in example: 1 (scalar delay pair) or 2 (heated rod H-infinity level).
    #[arg(long)]
    pub example: Option<u32>,
    /// Grid size for example 2.
    #[arg(long)]
    pub n: Option<usize>,
    /// Level gamma for example 2.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Shift: 0, r:<x> or i:<x>.
    #[arg(long)]
    pub shift: Option<String>,
    /// Number of Arnoldi iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// baseline, plain-r or j-enforced (ignored by compare).
    #[arg(long)]
    pub mode: Option<String>,
    /// Constant start vector, comma separated, or "ones".
    #[arg(long, conflicts_with = "seed")]
    pub start: Option<String>,
    /// Seed for a random constant start vector.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub breakdown_tol: Option<f64>,
    #[arg(long)]
    pub real_mu_tol: Option<f64>,
    #[arg(long)]
    pub realness_tol: Option<f64>,
    #[arg(long)]
    pub chop_tol: Option<f64>,
    #[arg(long)]
    pub max_degree: Option<usize>,
    /// Relative tolerance of the structure check.
    #[arg(long, default_value_t = DEFAULT_STRUCTURE_TOL)]
    pub structure_tol: f64,
    /// Output directory for CSV artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub eigen_table: bool,
    #[arg(long)]
    pub convergence: bool,
    #[arg(long)]
    pub degrees: bool,
    #[arg(long)]
    pub neutrality: bool,
    /// Largest residual shown by compare.
    #[arg(long, default_value_t = 1e-6)]
    pub max_residual: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Problem file (TOML).
    pub path: Option<PathBuf>,
    #[arg(long)]
    pub example: Option<u32>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STRUCTURE_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Target directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EmitFlags {
    pub eigen_table: bool,
    pub convergence: bool,
    pub degrees: bool,
    pub neutrality: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSource {
    File(PathBuf),
    Example {
        id: u32,
        n: Option<usize>,
        gamma: Option<f64>,
    },
}

/// Everything a solve or compare needs, after merging the problem file and the flags.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub source: ProblemSource,
    pub config: SolverConfig,
    pub out_dir: Option<PathBuf>,
    pub emit: EmitFlags,
    pub structure_tol: f64,
    pub max_residual: f64,
}

fn parse_arg(what: &str, message: impl ToString) -> Error {
    Error::Parse {
        path: what.to_string(),
        message: message.to_string(),
    }
}

fn parse_start(text: &str) -> Result<StartFunction> {
    if text.trim().eq_ignore_ascii_case("ones") {
        return Ok(StartFunction::ConstantOnes);
    }
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| parse_arg("--start", e)))
        .collect::<Result<Vec<_>>>()
        .map(StartFunction::Constant)
}

fn start_from_spec(spec: &StartSpec) -> Result<StartFunction> {
    match spec {
        StartSpec::Named(s) => parse_start(s),
        StartSpec::Vector(v) => Ok(StartFunction::Constant(v.clone())),
        StartSpec::Seeded { seed } => Ok(StartFunction::Random(*seed)),
    }
}

impl RunSpec {
    /// Merges the flags over the `[solver]`/`[output]` tables of the problem file.
    pub fn from_args(args: &SolveArgs) -> Result<Self> {
        let (source, file) = resolve_source(&args.source)?;
        let solver = file.as_ref().and_then(|f| f.solver.clone()).unwrap_or_default();
        let output = file.as_ref().and_then(|f| f.output.clone()).unwrap_or_default();
        let SolverSection {
            shift,
            iters,
            mode,
            start,
            breakdown_tol,
            real_mu_tol,
            realness_tol,
            chop_tol,
            max_degree,
        } = solver;

        let shift_text = args.shift.clone().or(shift).unwrap_or_else(|| "0".into());
        let shift: Shift = shift_text.parse().map_err(|e: Error| parse_arg("--shift", e))?;
        let iters = args.iters.or(iters).unwrap_or(20);
        let mode_text = args.mode.clone().or(mode).unwrap_or_else(|| "j-enforced".into());
        let mode: Mode = mode_text.parse().map_err(|e: Error| parse_arg("--mode", e))?;

        let mut config = SolverConfig::new(shift, iters).with_mode(mode);
        config.start = match (&args.start, args.seed, &start) {
            (Some(s), _, _) => parse_start(s)?,
            (None, Some(seed), _) => StartFunction::Random(seed),
            (None, None, Some(spec)) => start_from_spec(spec)?,
            (None, None, None) => StartFunction::ConstantOnes,
        };
        if let Some(v) = args.breakdown_tol.or(breakdown_tol) {
            config.breakdown_tol = v;
        }
        if let Some(v) = args.real_mu_tol.or(real_mu_tol) {
            config.real_mu_tol = v;
        }
        if let Some(v) = args.realness_tol.or(realness_tol) {
            config.pipeline.realness_tol = v;
        }
        if let Some(v) = args.chop_tol.or(chop_tol) {
            config.pipeline.interp.chop_tol = v;
        }
        if let Some(v) = args.max_degree.or(max_degree) {
            config.pipeline.interp.max_degree = v;
        }

        let OutputSection {
            dir,
            eigen_table,
            convergence,
            degrees,
            neutrality,
        } = output;
        let base = match &source {
            ProblemSource::File(p) => p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ProblemSource::Example { .. } => PathBuf::new(),
        };
        let out_dir = args.out.clone().or_else(|| dir.map(|d| base.join(d)));
        let emit = EmitFlags {
            eigen_table: args.eigen_table || eigen_table.unwrap_or(false),
            convergence: args.convergence || convergence.unwrap_or(false),
            degrees: args.degrees || degrees.unwrap_or(false),
            neutrality: args.neutrality || neutrality.unwrap_or(false),
        };
        Ok(RunSpec {
            source,
            config,
            out_dir,
            emit,
            structure_tol: args.structure_tol,
            max_residual: args.max_residual,
        })
    }

    pub fn load_problem(&self) -> Result<DelayHamiltonianProblem> {
        match &self.source {
            ProblemSource::File(path) => io::load_problem(path).map(|(p, _)| p),
            ProblemSource::Example { id, n, gamma } => io::build_problem(
                &ProblemSection::Example {
                    id: *id,
                    n: *n,
                    gamma: *gamma,
                },
                Path::new("."),
            ),
        }
    }
}

fn resolve_source(args: &SourceArgs) -> Result<(ProblemSource, Option<ProblemFile>)> {
    match (&args.problem, args.example) {
        (Some(path), None) => {
            let file = io::read_problem_file(path)?;
            Ok((ProblemSource::File(path.clone()), Some(file)))
        }
        (None, Some(id)) => Ok((
            ProblemSource::Example {
                id,
                n: args.n,
                gamma: args.gamma,
            },
            None,
        )),
        _ => Err(Error::InvalidArgument(
            "give exactly one of --problem or --example".into(),
        )),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Csv(_) => EXIT_IO,
        Error::Parse { .. } => EXIT_PARSE,
        _ => EXIT_SOLVER,
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => RunSpec::from_args(a).and_then(|s| cmd_solve(&s)),
        Command::Compare(a) => RunSpec::from_args(a).and_then(|s| cmd_compare(&s)),
        Command::Validate(a) => cmd_validate(a),
        Command::Export(a) => cmd_export(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn check_structure(p: &DelayHamiltonianProblem, tol: f64) -> Option<i32> {
    let report = p.validate_structure(tol);
    if report.passed {
        None
    } else {
        eprint!("{report}");
        Some(EXIT_VALIDATION)
    }
}

fn write_artifacts(spec: &RunSpec, result: &SolveResult, prefix: &str) -> Result<()> {
    let Some(dir) = &spec.out_dir else { return Ok(()) };
    ensure_dir(dir)?;
    let name = |base: &str| dir.join(format!("{prefix}{base}.csv"));
    io::write_diagnostics(&name("diagnostics"), result)?;
    if spec.emit.eigen_table {
        io::write_eigen_table(&name("eigenvalues"), &[result])?;
    }
    if spec.emit.convergence {
        io::write_convergence(&name("convergence"), result)?;
    }
    if spec.emit.degrees {
        io::write_degrees(&name("degrees"), result)?;
    }
    if spec.emit.neutrality {
        io::write_neutrality(&name("neutrality"), result)?;
    }
    Ok(())
}

pub fn cmd_solve(spec: &RunSpec) -> Result<i32> {
    let p = spec.load_problem()?;
    if let Some(code) = check_structure(&p, spec.structure_tol) {
        return Ok(code);
    }
    let result = run(&p, &spec.config)?;
    println!(
        "mode {}, shift {}, {} iterations, final degree {}, {:.3} s{}",
        result.mode,
        result.shift,
        result.diagnostics.len(),
        result.final_degree(),
        result.elapsed.as_secs_f64(),
        match result.breakdown {
            Some(i) => format!(", breakdown at iteration {i}"),
            None => String::new(),
        }
    );
    print!("{}", io::format_eigen_table(&result));
    write_artifacts(spec, &result, "")?;
    Ok(EXIT_OK)
}

/// `|Re λ| <= tol·max(1, |λ|)`: on the imaginary axis up to the accuracy of the run.
fn near_imaginary(l: num_complex::Complex64, tol: f64) -> bool {
    l.re.abs() <= tol * l.norm().max(1.0)
}

pub fn cmd_compare(spec: &RunSpec) -> Result<i32> {
    let p = spec.load_problem()?;
    if let Some(code) = check_structure(&p, spec.structure_tol) {
        return Ok(code);
    }
    let mut results = Vec::new();
    for mode in Mode::ALL {
        let cfg = spec.config.clone().with_mode(mode);
        results.push(run(&p, &cfg)?);
    }

    // one column per mode, upper half-plane values ordered by imaginary part
    let columns: Vec<Vec<_>> = results
        .iter()
        .map(|r| {
            let mut vals: Vec<_> = r
                .eigenvalues()
                .into_iter()
                .filter(|(l, res, _)| *res <= spec.max_residual && l.im >= 0.0)
                .map(|(l, _, _)| l)
                .collect();
            vals.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
            vals
        })
        .collect();
    let width = 50;
    let header: Vec<String> = results
        .iter()
        .map(|r| format!("{:^width$}", r.mode.to_string()))
        .collect();
    println!("{}", header.join(" | "));
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..rows {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| match c.get(i) {
                Some(l) => format!("{:>24.16e} {:>+24.16e}j", l.re, l.im),
                None => format!("{:width$}", ""),
            })
            .collect();
        println!("{}", cells.join(" | "));
    }
    for (r, col) in results.iter().zip(&columns) {
        let max_re = col
            .iter()
            .filter(|l| near_imaginary(**l, 1e-6))
            .map(|l| l.re.abs())
            .fold(0.0, f64::max);
        println!("{}: max |Re lambda| over imaginary eigenvalues = {max_re:.3e}", r.mode);
    }

    if let Some(dir) = &spec.out_dir {
        ensure_dir(dir)?;
        let refs: Vec<&SolveResult> = results.iter().collect();
        io::write_eigen_table(&dir.join("compare_eigenvalues.csv"), &refs)?;
        for r in &results {
            write_artifacts(spec, r, &format!("{}_", r.mode))?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let p = match (&args.path, args.example) {
        (Some(path), None) => io::load_problem(path)?.0,
        (None, Some(id)) => io::build_problem(
            &ProblemSection::Example {
                id,
                n: args.n,
                gamma: args.gamma,
            },
            Path::new("."),
        )?,
        _ => return Err(Error::InvalidArgument("give a problem file or --example".into())),
    };
    let report = p.validate_structure(args.tol);
    print!("{report}");
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}

pub fn cmd_export(args: &ExportArgs) -> Result<i32> {
    let (source, _) = resolve_source(&args.source)?;
    let p = match source {
        ProblemSource::File(path) => io::load_problem(&path)?.0,
        ProblemSource::Example { id, n, gamma } => {
            io::build_problem(&ProblemSection::Example { id, n, gamma }, Path::new("."))?
        }
    };
    let path = io::export_problem(&args.out, &p)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_args(extra: &[&str]) -> SolveArgs {
        let mut argv = vec!["hamdelay", "solve"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Solve(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_build_the_config() {
        let spec = RunSpec::from_args(&solve_args(&[
            "--example",
            "1",
            "--shift",
            "i:2.5",
            "--iters",
            "7",
            "--mode",
            "plain-r",
            "--start",
            "0.6, 0.8",
        ]))
        .unwrap();
        assert_eq!(spec.config.shift, Shift::imaginary(2.5));
        assert_eq!(spec.config.m, 7);
        assert_eq!(spec.config.mode, Mode::PlainR);
        assert_eq!(spec.config.start, StartFunction::Constant(vec![0.6, 0.8]));
        assert_eq!(
            spec.source,
            ProblemSource::Example {
                id: 1,
                n: None,
                gamma: None
            }
        );
    }

    #[test]
    fn file_settings_are_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        fs::write(
            &path,
            "[problem]\nkind = \"example\"\nid = 1\n[solver]\nshift = \"r:0.5\"\niters = 9\nstart = { seed = 4 }\n[output]\ndir = \"out\"\ndegrees = true\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let spec = RunSpec::from_args(&solve_args(&["--problem", p, "--iters", "3"])).unwrap();
        assert_eq!(spec.config.shift, Shift::real(0.5));
        assert_eq!(spec.config.m, 3);
        assert_eq!(spec.config.start, StartFunction::Random(4));
        assert_eq!(spec.out_dir, Some(dir.path().join("out")));
        assert!(spec.emit.degrees && !spec.emit.convergence);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            main_with_args(["hamdelay", "solve", "--example", "1", "--shift", "x"]),
            EXIT_PARSE
        );
        assert_eq!(main_with_args(["hamdelay", "solve", "--bogus"]), EXIT_PARSE);
        assert_eq!(main_with_args(["hamdelay", "validate", "/nonexistent/p.toml"]), EXIT_IO);
        assert_eq!(main_with_args(["hamdelay", "validate", "--example", "1"]), EXIT_OK);
        // σ = jπ/2 is an eigenvalue of example 1
        assert_eq!(
            main_with_args(["hamdelay", "solve", "--example", "1", "--shift", "i:1.5707963267948966"]),
            EXIT_SOLVER
        );
    }

    #[test]
    fn corrupted_problem_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = io::export_problem(dir.path(), &crate::examples::make_example1()).unwrap();
        fs::write(
            dir.path().join("h0.mtx"),
            "%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        assert_eq!(main_with_args(["hamdelay", "validate", p]), EXIT_VALIDATION);
        assert_eq!(main_with_args(["hamdelay", "solve", "--problem", p]), EXIT_VALIDATION);
    }

    #[test]
    fn solve_writes_requested_tables() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let o = out.to_str().unwrap();
        let code = main_with_args([
            "hamdelay",
            "solve",
            "--example",
            "1",
            "--iters",
            "10",
            "--out",
            o,
            "--eigen-table",
            "--degrees",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.join("eigenvalues.csv").exists());
        assert!(out.join("degrees.csv").exists());
        assert!(out.join("diagnostics.csv").exists());
        assert!(!out.join("convergence.csv").exists());

        let code = main_with_args(["hamdelay", "compare", "--example", "1", "--iters", "10", "--out", o]);
        assert_eq!(code, EXIT_OK);
        assert!(out.join("compare_eigenvalues.csv").exists());
    }
}
