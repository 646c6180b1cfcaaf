//! Problem files, Matrix Market matrices and CSV artifacts.
//!
//! A problem file is TOML with a `[problem]` table in one of three forms:
//!
//! ```toml
//! [problem]
//! kind = "hamiltonian"
//! h0 = "h0.mtx"
//! hneg = ["hneg1.mtx"]
//! hpos = ["hpos1.mtx"]
//! delays = [1.0]
//! ```
//!
//! `kind = "hinf"` takes `a = [...]` (`A0` first, then one matrix per delay), `b`, `c`,
//! `gamma` and `delays`; `kind = "example"` takes `id` plus `n` and `gamma` for the rod.
//! Matrix paths are relative to the problem file. Optional `[solver]` and `[output]`
//! tables mirror the command-line options.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use nalgebra_sparse::io::{load_coo_from_matrix_market_file, save_to_matrix_market_file};
use nalgebra_sparse::CooMatrix;
use serde::{Deserialize, Serialize};

use crate::arnoldi::{SolveResult, SymmetryClass};
use crate::error::{Error, Result};
use crate::examples::{make_example1, make_example2};
use crate::linalg::C64;
use crate::problem::{build_hinf_problem, DelayHamiltonianProblem};

/// Residual below which a Ritz value is followed in the convergence history.
pub const TRACK_RESIDUAL: f64 = 1e-8;
const MAX_TRACKED: usize = 10;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, message: impl ToString) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

/// Reads a real Matrix Market file, array or coordinate.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    if !path.exists() {
        return Err(io_err(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let coo: CooMatrix<f64> = load_coo_from_matrix_market_file(path).map_err(|e| parse_err(path, e))?;
    Ok(DMatrix::from(&coo))
}

/// Writes the nonzeros of `m` in coordinate form, values in round-trip precision.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let coo = CooMatrix::from(m);
    save_to_matrix_market_file(&coo, path).map_err(|e| io_err(path, e))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub problem: ProblemSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSection {
    Hamiltonian {
        h0: PathBuf,
        #[serde(default)]
        hneg: Vec<PathBuf>,
        #[serde(default)]
        hpos: Vec<PathBuf>,
        #[serde(default)]
        delays: Vec<f64>,
    },
    Hinf {
        a: Vec<PathBuf>,
        b: PathBuf,
        c: PathBuf,
        gamma: f64,
        #[serde(default)]
        delays: Vec<f64>,
    },
    Example {
        id: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection::Example {
            id: 1,
            n: None,
            gamma: None,
        }
    }
}

pub const DEFAULT_ROD_N: usize = 1000;
pub const DEFAULT_ROD_GAMMA: f64 = 0.00018;

/// Starting vector: `"ones"`, an explicit list, or `{ seed = k }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Named(String),
    Vector(Vec<f64>),
    Seeded { seed: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub shift: Option<String>,
    pub iters: Option<usize>,
    pub mode: Option<String>,
    pub start: Option<StartSpec>,
    pub breakdown_tol: Option<f64>,
    pub real_mu_tol: Option<f64>,
    pub realness_tol: Option<f64>,
    pub chop_tol: Option<f64>,
    pub max_degree: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub eigen_table: Option<bool>,
    pub convergence: Option<bool>,
    pub degrees: Option<bool>,
    pub neutrality: Option<bool>,
}

pub fn read_problem_file(path: &Path) -> Result<ProblemFile> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    toml::from_str(&text).map_err(|e| parse_err(path, e.message()))
}

/// Builds the problem described by `section`, resolving matrix paths against `base`.
pub fn build_problem(section: &ProblemSection, base: &Path) -> Result<DelayHamiltonianProblem> {
    let load = |p: &PathBuf| read_matrix(&base.join(p));
    match section {
        ProblemSection::Hamiltonian { h0, hneg, hpos, delays } => {
            let hneg = hneg.iter().map(load).collect::<Result<Vec<_>>>()?;
            let hpos = hpos.iter().map(load).collect::<Result<Vec<_>>>()?;
            DelayHamiltonianProblem::new(load(h0)?, hneg, hpos, delays.clone())
        }
        ProblemSection::Hinf { a, b, c, gamma, delays } => {
            let a = a.iter().map(load).collect::<Result<Vec<_>>>()?;
            build_hinf_problem(&a, &load(b)?, &load(c)?, *gamma, delays)
        }
        ProblemSection::Example { id: 1, .. } => Ok(make_example1()),
        ProblemSection::Example { id: 2, n, gamma } => {
            make_example2(n.unwrap_or(DEFAULT_ROD_N))?.hinf_problem(gamma.unwrap_or(DEFAULT_ROD_GAMMA))
        }
        ProblemSection::Example { id, .. } => {
            Err(Error::InvalidArgument(format!("unknown example {id}, expected 1 or 2")))
        }
    }
}

/// Reads a problem file and builds its problem.
pub fn load_problem(path: &Path) -> Result<(DelayHamiltonianProblem, ProblemFile)> {
    let file = read_problem_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let problem = build_problem(&file.problem, base)?;
    Ok((problem, file))
}

/// Writes `p` as Matrix Market files plus a `problem.toml` in `dir`; returns the TOML path.
pub fn export_problem(dir: &Path, p: &DelayHamiltonianProblem) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_matrix(&dir.join("h0.mtx"), p.h0())?;
    let mut hneg = Vec::new();
    let mut hpos = Vec::new();
    for k in 0..p.num_delays() {
        let (neg, pos) = (
            PathBuf::from(format!("hneg{}.mtx", k + 1)),
            PathBuf::from(format!("hpos{}.mtx", k + 1)),
        );
        write_matrix(&dir.join(&neg), &p.hneg()[k])?;
        write_matrix(&dir.join(&pos), &p.hpos()[k])?;
        hneg.push(neg);
        hpos.push(pos);
    }
    let file = ProblemFile {
        problem: ProblemSection::Hamiltonian {
            h0: "h0.mtx".into(),
            hneg,
            hpos,
            delays: p.delays().to_vec(),
        },
        solver: None,
        output: None,
    };
    let path = dir.join("problem.toml");
    let text = toml::to_string_pretty(&file).map_err(|e| parse_err(&path, e))?;
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// One row of the eigenvalue table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub symmetry_class: String,
    pub mode: String,
}

pub fn eigen_rows(result: &SolveResult) -> Vec<EigenRow> {
    result
        .eigenvalues()
        .into_iter()
        .map(|(l, res, class)| EigenRow {
            re: l.re,
            im: l.im,
            residual: res,
            symmetry_class: class.to_string(),
            mode: result.mode.to_string(),
        })
        .collect()
}

/// Eigenvalue table for one or more runs, 17 significant digits.
pub fn write_eigen_table(path: &Path, results: &[&SolveResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["re", "im", "residual", "symmetry_class", "mode"])?;
    for r in results {
        for row in eigen_rows(r) {
            w.write_record([
                fmt(row.re),
                fmt(row.im),
                fmt(row.residual),
                row.symmetry_class,
                row.mode,
            ])?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_eigen_table(path: &Path) -> Result<Vec<EigenRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Principal values of the converged Ritz pairs, the ones followed in the history.
pub fn tracked_eigenvalues(result: &SolveResult) -> Vec<C64> {
    result
        .ritz
        .iter()
        .filter(|r| r.min_residual() <= TRACK_RESIDUAL)
        .map(|r| r.lambdas[0])
        .take(MAX_TRACKED)
        .collect()
}

/// Distance from `target` to the closest value in `estimates`, counting the images
/// `-λ`, `±λ̄` for structured runs.
pub fn forward_error(estimates: &[C64], target: C64, structured: bool) -> f64 {
    estimates
        .iter()
        .flat_map(|&l| {
            let images = if structured {
                vec![l, -l, l.conj(), -l.conj()]
            } else {
                vec![l]
            };
            images.into_iter().map(move |x| (x - target).norm())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Per-iteration forward error of every tracked eigenvalue.
pub fn write_convergence(path: &Path, result: &SolveResult) -> Result<()> {
    let tracked = tracked_eigenvalues(result);
    let mut w = csv_writer(path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(tracked.iter().map(|l| format!("{}{:+.16e}j", fmt(l.re), l.im)));
    w.write_record(&header)?;
    let structured = result.mode.is_structured();
    for (i, estimates) in result.history.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(tracked.iter().map(|&t| fmt(forward_error(estimates, t, structured))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_diagnostics(path: &Path, result: &SolveResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "degree", "neutrality", "orthogonality", "gram_dropped"])?;
    for d in &result.diagnostics {
        w.write_record([
            d.iteration.to_string(),
            d.basis_degree.to_string(),
            fmt(d.neutrality),
            fmt(d.orthogonality),
            d.gram_dropped.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_degrees(path: &Path, result: &SolveResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "candidate_degree", "basis_degree"])?;
    for d in &result.diagnostics {
        w.write_record([
            d.iteration.to_string(),
            d.candidate_degree.to_string(),
            d.basis_degree.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_neutrality(path: &Path, result: &SolveResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "neutrality"])?;
    for d in &result.diagnostics {
        w.write_record([d.iteration.to_string(), fmt(d.neutrality)])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Human-readable eigenvalue table: one line per reported value.
pub fn format_eigen_table(result: &SolveResult) -> String {
    let mut out = format!(
        "{:>26} {:>26} {:>11}  {}\n",
        "Re(lambda)", "Im(lambda)", "residual", "class"
    );
    for (l, res, class) in result.eigenvalues() {
        let tag = if class == SymmetryClass::Unstructured {
            String::new()
        } else {
            class.to_string()
        };
        out.push_str(&format!("{:>26.16e} {:>26.16e} {:>11.3e}  {tag}\n", l.re, l.im, res));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arnoldi::{run, SolverConfig};
    use crate::problem::Shift;

    #[test]
    fn matrix_round_trip_and_array_format() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -2.5, std::f64::consts::PI, 0.0, 1e-300]);
        let path = dir.path().join("m.mtx");
        write_matrix(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);

        let array = dir.path().join("a.mtx");
        fs::write(&array, "%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n").unwrap();
        assert_eq!(
            read_matrix(&array).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])
        );
    }

    #[test]
    fn read_errors_are_distinguished() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_matrix(&dir.path().join("none.mtx")),
            Err(Error::Io { .. })
        ));
        let bad = dir.path().join("bad.mtx");
        fs::write(&bad, "not a matrix\n").unwrap();
        assert!(matches!(read_matrix(&bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn export_and_reload_problem() {
        let dir = tempfile::tempdir().unwrap();
        let p = make_example1();
        let path = export_problem(dir.path(), &p).unwrap();
        let (q, _) = load_problem(&path).unwrap();
        assert_eq!(q.h0(), p.h0());
        assert_eq!(q.hneg(), p.hneg());
        assert_eq!(q.hpos(), p.hpos());
        assert_eq!(q.delays(), p.delays());
    }

    #[test]
    fn problem_file_forms() {
        let text = r#"
            [problem]
            kind = "example"
            id = 2
            n = 8
            gamma = 0.5

            [solver]
            shift = "i:4.5"
            iters = 5
            start = { seed = 3 }
        "#;
        let f: ProblemFile = toml::from_str(text).unwrap();
        assert_eq!(f.solver.as_ref().unwrap().start, Some(StartSpec::Seeded { seed: 3 }));
        let p = build_problem(&f.problem, Path::new(".")).unwrap();
        assert_eq!(p.dim(), 16);

        let f: ProblemFile =
            toml::from_str("[problem]\nkind = \"example\"\nid = 1\n[solver]\nstart = [0.6, 0.8]\n").unwrap();
        assert_eq!(f.solver.unwrap().start, Some(StartSpec::Vector(vec![0.6, 0.8])));
        assert!(toml::from_str::<ProblemFile>("[problem]\nkind = \"other\"\n").is_err());
        assert!(build_problem(
            &ProblemSection::Example {
                id: 9,
                n: None,
                gamma: None
            },
            Path::new(".")
        )
        .is_err());
    }

    #[test]
    fn eigen_table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(&make_example1(), &SolverConfig::new(Shift::zero(), 8)).unwrap();
        let path = dir.path().join("eig.csv");
        write_eigen_table(&path, &[&r]).unwrap();
        let rows = read_eigen_table(&path).unwrap();
        assert_eq!(rows, eigen_rows(&r));
        for name in ["conv.csv", "diag.csv", "deg.csv", "neut.csv"] {
            let p = dir.path().join(name);
            match name {
                "conv.csv" => write_convergence(&p, &r),
                "diag.csv" => write_diagnostics(&p, &r),
                "deg.csv" => write_degrees(&p, &r),
                _ => write_neutrality(&p, &r),
            }
            .unwrap();
            let lines = fs::read_to_string(&p).unwrap().lines().count();
            assert_eq!(lines, r.diagnostics.len() + 1, "{name}");
        }
    }

    #[test]
    fn forward_error_uses_images() {
        let l = C64::new(0.0, 2.0);
        assert_eq!(forward_error(&[-l], l, true), 0.0);
        assert_eq!(forward_error(&[-l], l, false), 4.0);
    }
}
