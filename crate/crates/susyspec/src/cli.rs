//! Command-line driver.
//!
//! Exit codes: 0 success, 2 bad config or arguments, 3 numerical failure, 4 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::config::{apply_overrides, parse_complex, parse_config, Config};
use crate::error::Error;
use crate::matcore::{herglotz_defect, principal_zeta, principal_zeta_with_margin, CMatrix};
use crate::potential::PotentialProfile;
use crate::spectral::{
    parseval_check, spectral_density, transform_hat, CompactFunction, MSource, ParsevalOptions,
};
use crate::susy::suite::DEFAULT_SUITE_ZETAS;
use crate::susy::{green_schrodinger_fullline, green_schrodinger_halfline, herglotz_identity, susy_identity_suite, SuiteRow};
use crate::uniqueness::{bm_decay_experiment, log_radii, BmOptions};
use crate::weyl::{green_dirac, BoundaryFrame, Side};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "susyspec", version, about = "Weyl-Titchmarsh data for supersymmetric Dirac operators and their Schroedinger partners")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Profile configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Write results here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Config override `key=value` or `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Half-line or full-line m-functions at complex energies.
    Mfun {
        #[command(flatten)]
        common: Common,
        /// Complex energy z; repeatable. Dirac sources use the principal sqrt(z).
        #[arg(long = "z", allow_hyphen_values = true, required = true)]
        z: Vec<String>,
        /// MD+, MD-, MD, Mhat+j, Mhat-j or Mhatj.
        #[arg(long, default_value = "Mhat+1")]
        which: String,
    },
    /// Green's function at one energy and several point pairs.
    Green {
        #[command(flatten)]
        common: Common,
        #[arg(long = "z", allow_hyphen_values = true)]
        z: String,
        /// D (Dirac), H1, H2 (whole line), H1+, H1-, H2+, H2- (Dirichlet at x0).
        #[arg(long, default_value = "H1")]
        op: String,
        #[arg(long, allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[arg(long, allow_hyphen_values = true, required = true)]
        xp: Vec<f64>,
    },
    /// Stieltjes-inverted spectral densities.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "Mhat1")]
        which: String,
        /// Grid points; repeatable.
        #[arg(long, allow_hyphen_values = true, required = true)]
        lambda: Vec<f64>,
    },
    /// Generalized Fourier coefficients of a test function, or a Parseval check.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        j: u8,
        /// indicator:a:b or exp:center:rate:half_width
        #[arg(long = "fn", allow_hyphen_values = true, default_value = "indicator:0:1")]
        function: String,
        /// Constant vector multiplying the profile of the function, comma separated; defaults to all ones.
        #[arg(long, allow_hyphen_values = true)]
        v: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Vec<f64>,
        /// Run the Parseval comparison instead of printing coefficients.
        #[arg(long)]
        parseval: bool,
        #[arg(long, default_value_t = 400.0)]
        window: f64,
        #[arg(long, default_value_t = 0.25)]
        k_panel: f64,
        #[arg(long, default_value_t = 0.02)]
        target: f64,
    },
    /// Identity suite; exits 4 if any residual exceeds its tolerance.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// High-energy decay of the difference of two full-line Mhat_1.
    Bm {
        #[command(flatten)]
        common: Common,
        /// Second profile.
        #[arg(long)]
        other: PathBuf,
        #[arg(long, allow_hyphen_values = true, default_value_t = std::f64::consts::FRAC_PI_2)]
        theta: f64,
        #[arg(long, default_value_t = 4.0)]
        r_min: f64,
        #[arg(long, default_value_t = 400.0)]
        r_max: f64,
        #[arg(long, default_value_t = 12)]
        n_radii: usize,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        log_z_weight: f64,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Mfun { common, .. }
            | Command::Green { common, .. }
            | Command::Density { common, .. }
            | Command::Transform { common, .. }
            | Command::Verify { common }
            | Command::Bm { common, .. } => common,
        }
    }
}

/// Failure of a run, carrying its exit code.
#[derive(Debug)]
pub struct RunError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT };
        RunError { code, message: e.to_string() }
    }
}

fn input_error(msg: impl Into<String>) -> RunError {
    RunError { code: EXIT_INPUT, message: msg.into() }
}

fn numerical<'a>(op: &'a str, params: &'a str) -> impl Fn(Error) -> RunError + 'a {
    move |e| {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT };
        RunError { code, message: format!("{op} ({params}): {e}") }
    }
}

/// Shortest representation that reads back to the same double.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<Config, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read config {}: {e}", path.display())))?;
    let text = apply_overrides(&text, overrides).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn parse_z(s: &str) -> Result<C64, RunError> {
    parse_complex(s).ok_or_else(|| input_error(format!("cannot parse complex number '{s}'")))
}

fn entries_header(prefix: &str, n: usize) -> String {
    let mut h = String::new();
    for r in 0..n {
        for c in 0..n {
            let _ = write!(h, ",{prefix}{}{}_re,{prefix}{}{}_im", r + 1, c + 1, r + 1, c + 1);
        }
    }
    h
}

fn entries(m: &CMatrix) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            let _ = write!(s, ",{},{}", fmt_num(v.re), fmt_num(v.im));
        }
    }
    s
}

fn json<T: Serialize>(v: &T) -> Result<String, RunError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| RunError { code: EXIT_NUMERICAL, message: format!("serialization failed: {e}") })
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct MfunRow {
    pub which: String,
    pub z: C64,
    pub value: CMatrix,
}

#[derive(Debug, Serialize)]
struct GreenRow {
    op: String,
    z: C64,
    x: f64,
    xp: f64,
    value: CMatrix,
}

fn eval_source(p: &PotentialProfile, source: MSource, x0: f64, z: C64, cfg: &Config) -> Result<CMatrix, Error> {
    let num = &cfg.numerics;
    if source.is_dirac() {
        let sp = principal_zeta(z)?;
        source.evaluate(p, x0, sp.zeta, num)
    } else {
        principal_zeta_with_margin(z, num.delta_spec)?;
        source.evaluate(p, x0, z, num)
    }
}

fn run_command(cmd: &Command) -> Result<(String, i32), RunError> {
    let common = cmd.common();
    let cfg = load(&common.config, &common.overrides)?;
    let p = &cfg.profile;
    let num = &cfg.numerics;
    let x0 = p.x0;
    match cmd {
        Command::Mfun { z, which, .. } => {
            let source = MSource::parse(which)?;
            let zs = z.iter().map(|s| parse_z(s)).collect::<Result<Vec<_>, _>>()?;
            let mut rows = Vec::new();
            for &z in &zs {
                let value = eval_source(p, source, x0, z, &cfg).map_err(numerical("mfun", &format!("which = {which}, z = {z}")))?;
                rows.push(MfunRow { which: source.label(), z, value });
            }
            match common.format {
                Format::Json => Ok((json(&rows)?, EXIT_OK)),
                Format::Csv => {
                    let n = rows.first().map_or(0, |r| r.value.nrows());
                    let mut out = format!("which,re_z,im_z{}\n", entries_header("M", n));
                    for r in &rows {
                        let _ = writeln!(out, "{},{},{}{}", r.which, fmt_num(r.z.re), fmt_num(r.z.im), entries(&r.value));
                    }
                    Ok((out, EXIT_OK))
                }
            }
        }
        Command::Green { z, op, x, xp, .. } => {
            if x.len() != xp.len() {
                return Err(input_error(format!("--x and --xp must have equal counts, got {} and {}", x.len(), xp.len())));
            }
            let z = parse_z(z)?;
            let params = format!("op = {op}, z = {z}");
            let mut rows = Vec::new();
            for (&a, &b) in x.iter().zip(xp) {
                let value = match op.as_str() {
                    "D" => {
                        let sp = principal_zeta(z).map_err(numerical("green", &params))?;
                        green_dirac(p, sp.zeta, x0, &BoundaryFrame::standard(p.m), a, b, num)
                    }
                    "H1" | "H2" => green_schrodinger_fullline(p, op.as_bytes()[1] - b'0', z, x0, a, b, num),
                    "H1+" | "H1-" | "H2+" | "H2-" => {
                        let side = if op.ends_with('+') { Side::Plus } else { Side::Minus };
                        green_schrodinger_halfline(p, op.as_bytes()[1] - b'0', z, x0, side, a, b, num)
                    }
                    _ => return Err(input_error(format!("unknown operator '{op}' (expected D, H1, H2, H1+, H1-, H2+, H2-)"))),
                }
                .map_err(numerical("green", &format!("{params}, x = {a}, x' = {b}")))?;
                rows.push(GreenRow { op: op.clone(), z, x: a, xp: b, value });
            }
            match common.format {
                Format::Json => Ok((json(&rows)?, EXIT_OK)),
                Format::Csv => {
                    let n = rows.first().map_or(0, |r| r.value.nrows());
                    let mut out = format!("x,xp{}\n", entries_header("G", n));
                    for r in &rows {
                        let _ = writeln!(out, "{},{}{}", fmt_num(r.x), fmt_num(r.xp), entries(&r.value));
                    }
                    Ok((out, EXIT_OK))
                }
            }
        }
        Command::Density { which, lambda, .. } => {
            let source = MSource::parse(which)?;
            let est = spectral_density(p, source, x0, lambda, &num.eps_schedule, num)
                .map_err(numerical("density", &format!("which = {which}")))?;
            match common.format {
                Format::Json => Ok((json(&est)?, EXIT_OK)),
                Format::Csv => {
                    let n = est.densities.first().map_or(0, |d| d.nrows());
                    let mut out = format!("lambda{},extrapolation_residual\n", entries_header("rho", n));
                    for ((l, d), r) in est.lambda_grid.iter().zip(&est.densities).zip(&est.extrapolation_residual) {
                        let _ = writeln!(out, "{}{},{}", fmt_num(*l), entries(d), fmt_num(*r));
                    }
                    Ok((out, EXIT_OK))
                }
            }
        }
        Command::Transform { j, function, v, lambda, parseval, window, k_panel, target, .. } => {
            let f = parse_function(function, v.as_deref(), p.m)?;
            if *parseval {
                let opts = ParsevalOptions {
                    window: *window,
                    k_panel: *k_panel,
                    target: *target,
                    eta_schedule: num.eps_schedule.clone(),
                    ..ParsevalOptions::default()
                };
                let r = parseval_check(p, *j, &f, x0, &opts, num)
                    .map_err(numerical("parseval", &format!("j = {j}, window = {window}")))?;
                return match common.format {
                    Format::Json => Ok((json(&r)?, EXIT_OK)),
                    Format::Csv => Ok((
                        format!(
                            "norm_sq,continuum,atoms,tail_estimate,tail_uncertainty,total,relative_error,relative_error_without_atoms\n{},{},{},{},{},{},{},{}\n",
                            fmt_num(r.norm_sq),
                            fmt_num(r.continuum),
                            fmt_num(r.atoms.iter().map(|a| a.contribution).sum()),
                            fmt_num(r.tail_estimate),
                            fmt_num(r.tail_uncertainty),
                            fmt_num(r.total),
                            fmt_num(r.relative_error),
                            fmt_num(r.relative_error_without_atoms)
                        ),
                        EXIT_OK,
                    )),
                };
            }
            if lambda.is_empty() {
                return Err(input_error("transform needs at least one --lambda (or --parseval)"));
            }
            let coeffs = lambda
                .iter()
                .map(|&l| transform_hat(p, *j, &f, x0, l, num).map_err(numerical("transform", &format!("j = {j}, lambda = {l}"))))
                .collect::<Result<Vec<_>, _>>()?;
            match common.format {
                Format::Json => Ok((json(&coeffs)?, EXIT_OK)),
                Format::Csv => {
                    let mut out = String::from("lambda");
                    for k in 0..p.m {
                        let _ = write!(out, ",h0_{0}_re,h0_{0}_im", k + 1);
                    }
                    for k in 0..p.m {
                        let _ = write!(out, ",h1_{0}_re,h1_{0}_im", k + 1);
                    }
                    out.push('\n');
                    for t in &coeffs {
                        out.push_str(&fmt_num(t.lambda));
                        for c in t.h0.iter().chain(&t.h1) {
                            let _ = write!(out, ",{},{}", fmt_num(c.re), fmt_num(c.im));
                        }
                        out.push('\n');
                    }
                    Ok((out, EXIT_OK))
                }
            }
        }
        Command::Verify { .. } => {
            let rows = verify_rows(p, &cfg).map_err(numerical("verify", &format!("x0 = {x0}")))?;
            let code = if rows.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_VERIFY };
            match common.format {
                Format::Json => Ok((json(&rows)?, code)),
                Format::Csv => {
                    let mut out = String::from("identity,tag,residual,tolerance,status\n");
                    for r in &rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            r.name,
                            r.tag,
                            fmt_num(r.residual),
                            fmt_num(r.tolerance),
                            if r.passed { "pass" } else { "fail" }
                        );
                    }
                    Ok((out, code))
                }
            }
        }
        Command::Bm { other, theta, r_min, r_max, n_radii, log_z_weight, .. } => {
            let cfg2 = load(other, &common.overrides)?;
            let radii = log_radii(*r_min, *r_max, *n_radii);
            let fit = bm_decay_experiment(p, &cfg2.profile, x0, *theta, &radii, &BmOptions { log_z_weight: *log_z_weight }, num)
                .map_err(numerical("bm", &format!("theta = {theta}, radii = [{r_min}, {r_max}] x {n_radii}")))?;
            match common.format {
                Format::Json => Ok((json(&fit)?, EXIT_OK)),
                Format::Csv => {
                    let mut out = String::from("r,im_sqrt_z,delta\n");
                    for ((r, s), d) in fit.radii.iter().zip(&fit.im_sqrt).zip(&fit.deltas) {
                        let _ = writeln!(out, "{},{},{}", fmt_num(*r), fmt_num(*s), fmt_num(*d));
                    }
                    let _ = writeln!(
                        out,
                        "# theta={} fitted_a={} intercept={} fit_residual={} usable={} log_z_weight={}",
                        fmt_num(fit.ray_angle),
                        fmt_num(fit.fitted_a),
                        fmt_num(fit.intercept),
                        fmt_num(fit.fit_residual),
                        fit.usable,
                        fmt_num(fit.log_z_weight)
                    );
                    Ok((out, EXIT_OK))
                }
            }
        }
    }
}

fn parse_function(spec: &str, v: Option<&str>, m: usize) -> Result<CompactFunction, RunError> {
    let vec = match v {
        None => vec![C64::new(1.0, 0.0); m],
        Some(s) => s.split(',').map(|t| parse_z(t.trim())).collect::<Result<Vec<_>, _>>()?,
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = |k: usize| -> Result<Vec<f64>, RunError> {
        if parts.len() != k + 1 {
            return Err(input_error(format!("function '{spec}' needs {k} numeric fields")));
        }
        parts[1..]
            .iter()
            .map(|t| t.trim().parse::<f64>().map_err(|_| input_error(format!("bad number '{t}' in '{spec}'"))))
            .collect()
    };
    let f = match parts[0] {
        "indicator" => {
            let a = nums(2)?;
            CompactFunction::Indicator { a: a[0], b: a[1], v: vec }
        }
        "exp" => {
            let a = nums(3)?;
            CompactFunction::ExpDecay { center: a[0], rate: a[1], half_width: a[2], v: vec }
        }
        other => return Err(input_error(format!("unknown function kind '{other}' (expected indicator or exp)"))),
    };
    f.validate(m)?;
    Ok(f)
}

/// Suite rows plus Herglotz and fundamental-identity checks at the suite points.
pub fn verify_rows(p: &PotentialProfile, cfg: &Config) -> Result<Vec<SuiteRow>, Error> {
    let num = &cfg.numerics;
    let zetas: Vec<C64> = DEFAULT_SUITE_ZETAS.iter().map(|&(a, b)| C64::new(a, b)).collect();
    let mut rows = susy_identity_suite(p, &zetas, p.x0, num)?.rows;
    let mut defect: f64 = 0.0;
    let mut ident: f64 = 0.0;
    for &zeta in &zetas {
        let z = zeta * zeta;
        for src in [
            MSource::DiracHalf(Side::Plus),
            MSource::DiracHalf(Side::Minus),
            MSource::DiracFull,
            MSource::MhatHalf(Side::Plus, 1),
            MSource::MhatHalf(Side::Minus, 2),
            MSource::MhatFull(1),
            MSource::MhatFull(2),
        ] {
            let w = if src.is_dirac() {
                zeta
            } else if z.im > 0.0 {
                z
            } else {
                z.conj()
            };
            let m = src.evaluate(p, p.x0, w, num)?;
            defect = defect.max(-herglotz_defect(&m));
        }
        for side in [Side::Plus, Side::Minus] {
            for j in [1, 2] {
                let (lhs, rhs) = herglotz_identity(p, z, p.x0, side, j, num)?;
                let scale = crate::matcore::max_abs(&lhs).max(1e-300);
                ident = ident.max(crate::matcore::max_abs(&(lhs - rhs)) / scale);
            }
        }
    }
    rows.push(SuiteRow {
        name: "herglotz-defect".into(),
        tag: "herglotz".into(),
        residual: defect.max(0.0),
        tolerance: num.tol_psd,
        passed: defect <= num.tol_psd,
    });
    rows.push(SuiteRow {
        name: "im-part-integral".into(),
        tag: "fundamental-identity".into(),
        residual: ident,
        tolerance: 1e-5,
        passed: ident <= 1e-5,
    });
    Ok(rows)
}

/// Parses `args` (program name first), runs, writes output and returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Some(n) = std::env::var("SUSYSPEC_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // A pool that is already built (repeated calls in one process) is left as it is.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run_command(&cli.command) {
        Ok((text, code)) => {
            let written = match &cli.command.common().output {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(msg) = written {
                let _ = writeln!(stderr, "error: {msg}");
                return EXIT_INPUT;
            }
            if code == EXIT_VERIFY {
                let _ = writeln!(stderr, "verification failed: at least one residual exceeds its tolerance");
            }
            code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
