//! Subcommand dispatch: every subcommand wraps one library operation,
//! reads JSON from --input, writes JSON (or CSV for grids) to --output or
//! stdout, and seeds all randomness from --seed (falling back to the
//! LAGREP_SEED environment variable, then 0).
//!
//! Exit codes: 0 success, 1 domain failure (infeasible target, failed
//! solve, incompatible inputs), 2 input/usage error.

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::path::PathBuf;

use lagrep::deformation;
use lagrep::error::Error;
use lagrep::io::{
    decode_matrix, decode_real_matrix, decode_tuple, encode_matrix, encode_tuple, LagrangianJson,
    RepresentationJson, SpectrumTupleJson, UnitaryMatrixJson,
};
use lagrep::lagrangian;
use lagrep::maslov;
use lagrep::numerics::{C64, Tolerances};
use lagrep::solver::{self, ScanMode, ScanOptions, SolveOptions};
use lagrep::spectra;
use lagrep::symplectic;

#[derive(Parser)]
#[command(
    name = "lagrep",
    about = "Lagrangian-involution calculus for products of unitary matrices",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct CommonArgs {
    /// Input JSON file (defaults to stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file (defaults to stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// RNG seed; falls back to LAGREP_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Residual tolerance override for solvers.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Restart budget override.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Iteration budget override.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Output format for grid data.
    #[arg(long, default_value = "json")]
    pub format: String,
}

#[derive(Subcommand)]
pub enum Command {
    /// Spectrum of a unitary matrix, or the spectral projection of a
    /// representation.
    Spec(CommonArgs),
    /// Split a unitary matrix as a product of two Lagrangian involutions.
    Split(CommonArgs),
    /// Inertia index and index identities of a Lagrangian tuple.
    Maslov(CommonArgs),
    /// Bracket-inequality feasibility of a spectrum tuple (n = 2 or 3).
    Walls(CommonArgs),
    /// Realize a spectrum tuple by a unitary representation.
    Realize(CommonArgs),
    /// Realize a spectrum tuple by a Lagrangian representation.
    RealizeLagrangian(CommonArgs),
    /// Glue an ell-solution and a triple solution into an (ell+1)-solution.
    Compose(CommonArgs),
    /// Grid-scan an index slice, comparing predicate and solvers.
    Scan(ScanArgs),
    /// Twist or bend a Lagrangian tuple.
    Deform(CommonArgs),
    /// Isotropy defect of the fixed-class tangent space at a tuple.
    Isotropy(CommonArgs),
    /// Pairwise symmetrizing conjugators of a tuple.
    Symmetrize(CommonArgs),
    /// Dimension formulas for a multiplicity structure.
    Dims(CommonArgs),
}

#[derive(Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Matrix size (2 or 3).
    #[arg(long)]
    pub n: usize,
    /// Index slice to scan.
    #[arg(long)]
    pub index: i64,
    /// Grid resolution (must divide 1).
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    /// Skip points closer than this to any wall.
    #[arg(long, default_value_t = 0.02)]
    pub wall_margin: f64,
    /// Scan mode: "exhaustive", "sample:COUNT", or "stratified:F,I".
    #[arg(long, default_value = "exhaustive")]
    pub mode: String,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Decode { .. }
        | Error::DimensionMismatch(_)
        | Error::InvalidArgument(_)
        | Error::NotUnitary { .. }
        | Error::NotSymmetric { .. }
        | Error::NotSkewHermitian { .. }
        | Error::NonIntegerIndex { .. } => 2,
        Error::Precondition(_) | Error::DiagonalizationFailure { .. } => 1,
    }
}

fn read_input(common: &CommonArgs) -> Result<Value, (i32, String)> {
    let text = match &common.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| (2, format!("cannot read {}: {}", path.display(), e)))?,
        None => {
            use std::io::Read;
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| (2, format!("cannot read stdin: {}", e)))?;
            buf
        }
    };
    serde_json::from_str(&text).map_err(|e| (2, format!("malformed JSON: {}", e)))
}

fn write_output(common: &CommonArgs, text: &str) -> Result<(), (i32, String)> {
    match &common.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| (2, format!("cannot write {}: {}", path.display(), e))),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn seed_of(common: &CommonArgs) -> u64 {
    common.seed.unwrap_or_else(|| {
        std::env::var("LAGREP_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0)
    })
}

fn solve_options(common: &CommonArgs) -> SolveOptions {
    let mut opts = SolveOptions {
        seed: seed_of(common),
        ..SolveOptions::default()
    };
    if let Some(t) = common.tol {
        opts.tol_residual = t;
    }
    if let Some(r) = common.restarts {
        opts.restarts = r;
    }
    if let Some(m) = common.max_iters {
        opts.max_iters = m;
    }
    opts
}

fn err_to_exit(e: Error) -> (i32, String) {
    (exit_code(&e), e.to_string())
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Spec(c) => cmd_spec(&c),
        Command::Split(c) => cmd_split(&c),
        Command::Maslov(c) => cmd_maslov(&c),
        Command::Walls(c) => cmd_walls(&c),
        Command::Realize(c) => cmd_realize(&c, false),
        Command::RealizeLagrangian(c) => cmd_realize(&c, true),
        Command::Compose(c) => cmd_compose(&c),
        Command::Scan(c) => cmd_scan(&c),
        Command::Deform(c) => cmd_deform(&c),
        Command::Isotropy(c) => cmd_isotropy(&c),
        Command::Symmetrize(c) => cmd_symmetrize(&c),
        Command::Dims(c) => cmd_dims(&c),
    };
    match result {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {}", msg);
            code
        }
    }
}

type CmdResult = Result<i32, (i32, String)>;

fn cmd_spec(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    if value.get("gammas").is_some() {
        let rep: RepresentationJson =
            serde_json::from_value(value).map_err(|e| (2, format!("malformed input: {}", e)))?;
        let rho = rep.decode(&tol).map_err(err_to_exit)?;
        let proj = deformation::spectral_projection(&rho, &tol).map_err(err_to_exit)?;
        let out = serde_json::to_string_pretty(&SpectrumTupleJson::encode(&proj)).unwrap();
        write_output(common, &out)?;
    } else {
        let um: UnitaryMatrixJson =
            serde_json::from_value(value).map_err(|e| (2, format!("malformed input: {}", e)))?;
        let a = um.decode(&tol).map_err(err_to_exit)?;
        let spec = lagrep::numerics::spectrum(&a, &tol).map_err(err_to_exit)?;
        let out = serde_json::to_string_pretty(&json!({
            "n": spec.n,
            "alpha": spec.alpha,
        }))
        .unwrap();
        write_output(common, &out)?;
    }
    Ok(0)
}

fn cmd_split(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let um: UnitaryMatrixJson = serde_json::from_value(value.clone())
        .map_err(|e| (2, format!("malformed input: {}", e)))?;
    let a = um.decode(&tol).map_err(err_to_exit)?;
    let fiber = match value.get("fiber") {
        Some(f) => {
            let fj: lagrep::io::MatrixJson = serde_json::from_value(f.clone())
                .map_err(|e| (2, format!("malformed fiber: {}", e)))?;
            Some(decode_matrix(&fj, um.n, "/fiber").map_err(err_to_exit)?)
        }
        None => None,
    };
    let (l1, l2) = lagrangian::tau2_split(&a, fiber.as_ref(), &tol).map_err(err_to_exit)?;
    let rec = lagrangian::tau2(&l1, &l2).map_err(err_to_exit)?;
    let residual = lagrep::numerics::fro_norm(&(rec - &a));
    let out = serde_json::to_string_pretty(&json!({
        "lagrangians": [LagrangianJson::encode(&l1), LagrangianJson::encode(&l2)],
        "residual": residual,
    }))
    .unwrap();
    write_output(common, &out)?;
    Ok(0)
}

fn cmd_maslov(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let items: Vec<LagrangianJson> =
        serde_json::from_value(value).map_err(|e| (2, format!("malformed input: {}", e)))?;
    let tuple = decode_tuple(&items, &tol).map_err(err_to_exit)?;
    let report = maslov::check_index_identities(&tuple, &tol).map_err(err_to_exit)?;
    let out = serde_json::to_string_pretty(&report).unwrap();
    write_output(common, &out)?;
    Ok(0)
}

fn cmd_walls(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let a = lagrep::io::decode_spectrum_tuple(&value).map_err(err_to_exit)?;
    let feas = match a.n {
        2 => spectra::feasible_u2(&a, tol.cluster),
        3 => spectra::feasible_u3(&a, tol.cluster),
        _ => Err(Error::InvalidArgument(
            "walls supports n = 2 or 3".into(),
        )),
    }
    .map_err(err_to_exit)?;
    let out = serde_json::to_string_pretty(&feas).unwrap();
    write_output(common, &out)?;
    Ok(if feas.feasible { 0 } else { 1 })
}

fn cmd_realize(common: &CommonArgs, lagrangian_witness: bool) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let a = lagrep::io::decode_spectrum_tuple(&value).map_err(err_to_exit)?;
    let opts = solve_options(common);
    if lagrangian_witness {
        let outcome = solver::realize_lagrangian(&a, &opts, &tol).map_err(err_to_exit)?;
        let witness = outcome.witness.as_ref().map(encode_tuple);
        let out = serde_json::to_string_pretty(&json!({
            "success": outcome.success,
            "residual": outcome.residual,
            "restarts_used": outcome.restarts_used,
            "witness": witness,
        }))
        .unwrap();
        write_output(common, &out)?;
        Ok(if outcome.success { 0 } else { 1 })
    } else {
        let outcome = solver::realize_unitary(&a, &opts, &tol).map_err(err_to_exit)?;
        let witness = outcome.witness.as_ref().map(RepresentationJson::encode);
        let out = serde_json::to_string_pretty(&json!({
            "success": outcome.success,
            "residual": outcome.residual,
            "restarts_used": outcome.restarts_used,
            "witness": witness,
        }))
        .unwrap();
        write_output(common, &out)?;
        Ok(if outcome.success { 0 } else { 1 })
    }
}

fn cmd_compose(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let ell_items: Vec<LagrangianJson> = serde_json::from_value(
        value
            .get("ell_tuple")
            .ok_or((2, "missing field ell_tuple".to_string()))?
            .clone(),
    )
    .map_err(|e| (2, format!("malformed ell_tuple: {}", e)))?;
    let tri_items: Vec<LagrangianJson> = serde_json::from_value(
        value
            .get("triple")
            .ok_or((2, "missing field triple".to_string()))?
            .clone(),
    )
    .map_err(|e| (2, format!("malformed triple: {}", e)))?;
    let sol_ell = decode_tuple(&ell_items, &tol).map_err(err_to_exit)?;
    let sol_3 = decode_tuple(&tri_items, &tol).map_err(err_to_exit)?;
    let glued = solver::compose_triple(&sol_ell, &sol_3, &tol).map_err(err_to_exit)?;
    let out = serde_json::to_string_pretty(&encode_tuple(&glued)).unwrap();
    write_output(common, &out)?;
    Ok(0)
}

fn parse_mode(s: &str) -> Result<ScanMode, (i32, String)> {
    if s == "exhaustive" {
        return Ok(ScanMode::Exhaustive);
    }
    if let Some(rest) = s.strip_prefix("sample:") {
        let count: usize = rest
            .parse()
            .map_err(|_| (2, format!("bad sample count: {}", rest)))?;
        return Ok(ScanMode::Sample { count });
    }
    if let Some(rest) = s.strip_prefix("stratified:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err((2, "stratified mode needs F,I".to_string()));
        }
        let f: usize = parts[0]
            .parse()
            .map_err(|_| (2, format!("bad count: {}", parts[0])))?;
        let i: usize = parts[1]
            .parse()
            .map_err(|_| (2, format!("bad count: {}", parts[1])))?;
        return Ok(ScanMode::Stratified {
            feasible: f,
            infeasible: i,
        });
    }
    Err((2, format!("unknown scan mode: {}", s)))
}

fn cmd_scan(args: &ScanArgs) -> CmdResult {
    let tol = Tolerances::default();
    let mode = parse_mode(&args.mode)?;
    let opts = ScanOptions {
        resolution: args.resolution,
        wall_margin: args.wall_margin,
        mode,
        solve: solve_options(&args.common),
    };
    let report = solver::chamber_scan(args.n, args.index, &opts, &tol).map_err(err_to_exit)?;
    let summary = serde_json::to_string_pretty(&report).unwrap();
    if args.common.format == "csv" || args.common.output.is_some() {
        write_output(&args.common, &report.csv())?;
        if args.common.output.is_some() {
            println!("{}", summary);
        }
    } else {
        println!("{}", summary);
    }
    Ok(0)
}

fn cmd_deform(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let items: Vec<LagrangianJson> = serde_json::from_value(
        value
            .get("tuple")
            .ok_or((2, "missing field tuple".to_string()))?
            .clone(),
    )
    .map_err(|e| (2, format!("malformed tuple: {}", e)))?;
    let tuple = decode_tuple(&items, &tol).map_err(err_to_exit)?;
    let deformed = if let Some(tw) = value.get("twist") {
        let pairs: Vec<[f64; 2]> =
            serde_json::from_value(tw.clone()).map_err(|e| (2, format!("malformed twist: {}", e)))?;
        let phases: Vec<C64> = pairs.iter().map(|&[re, im]| C64::new(re, im)).collect();
        deformation::twist(&tuple, &phases, &tol).map_err(err_to_exit)?
    } else if let Some(b) = value.get("bend") {
        let s: usize = serde_json::from_value(b.get("s").cloned().unwrap_or(Value::Null))
            .map_err(|e| (2, format!("malformed bend.s: {}", e)))?;
        let r: usize = serde_json::from_value(b.get("r").cloned().unwrap_or(Value::Null))
            .map_err(|e| (2, format!("malformed bend.r: {}", e)))?;
        let a_rows: Vec<Vec<f64>> = serde_json::from_value(b.get("A").cloned().unwrap_or(Value::Null))
            .map_err(|e| (2, format!("malformed bend.A: {}", e)))?;
        let a = decode_real_matrix(&a_rows, tuple.n(), "/bend/A").map_err(err_to_exit)?;
        deformation::bend(&tuple, s, r, &a, &tol).map_err(err_to_exit)?
    } else {
        return Err((2, "deform needs a twist or a bend field".to_string()));
    };
    let before = deformation::spectral_projection(
        &deformation::phi_tilde(&tuple, &tol).map_err(err_to_exit)?,
        &tol,
    )
    .map_err(err_to_exit)?;
    let after = deformation::spectral_projection(
        &deformation::phi_tilde(&deformed, &tol).map_err(err_to_exit)?,
        &tol,
    )
    .map_err(err_to_exit)?;
    let out = serde_json::to_string_pretty(&json!({
        "tuple": encode_tuple(&deformed),
        "spectra_before": SpectrumTupleJson::encode(&before),
        "spectra_after": SpectrumTupleJson::encode(&after),
    }))
    .unwrap();
    write_output(common, &out)?;
    Ok(0)
}

fn cmd_isotropy(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let items: Vec<LagrangianJson> =
        serde_json::from_value(value).map_err(|e| (2, format!("malformed input: {}", e)))?;
    let tuple = decode_tuple(&items, &tol).map_err(err_to_exit)?;
    let defect = symplectic::isotropy_defect(&tuple, &tol).map_err(err_to_exit)?;
    let out = serde_json::to_string_pretty(&json!({ "defect": defect })).unwrap();
    write_output(common, &out)?;
    Ok(0)
}

fn cmd_symmetrize(common: &CommonArgs) -> CmdResult {
    let tol = Tolerances::default();
    let value = read_input(common)?;
    let items: Vec<LagrangianJson> =
        serde_json::from_value(value).map_err(|e| (2, format!("malformed input: {}", e)))?;
    let tuple = decode_tuple(&items, &tol).map_err(err_to_exit)?;
    let cs = lagrangian::pairwise_symmetrizers(&tuple, &tol).map_err(err_to_exit)?;
    let defect = lagrangian::symmetrizer_defect(&tuple, &cs).map_err(err_to_exit)?;
    let out = serde_json::to_string_pretty(&json!({
        "conjugators": cs.iter().map(encode_matrix).collect::<Vec<_>>(),
        "defect": defect,
    }))
    .unwrap();
    write_output(common, &out)?;
    Ok(0)
}

fn cmd_dims(common: &CommonArgs) -> CmdResult {
    let value = read_input(common)?;
    let n: usize = serde_json::from_value(value.get("n").cloned().unwrap_or(Value::Null))
        .map_err(|e| (2, format!("malformed n: {}", e)))?;
    let ell: usize = serde_json::from_value(value.get("ell").cloned().unwrap_or(Value::Null))
        .map_err(|e| (2, format!("malformed ell: {}", e)))?;
    let mu: Vec<Vec<usize>> =
        serde_json::from_value(value.get("multiplicities").cloned().unwrap_or(Value::Null))
            .map_err(|e| (2, format!("malformed multiplicities: {}", e)))?;
    if mu.len() != ell {
        return Err((2, format!("expected {} multiplicity rows, found {}", ell, mu.len())));
    }
    for (s, row) in mu.iter().enumerate() {
        if row.iter().sum::<usize>() != n {
            return Err((2, format!("multiplicity row {} does not sum to n = {}", s, n)));
        }
    }
    let report = deformation::expected_dimensions(n, ell, &mu);
    let out = serde_json::to_string_pretty(&report).unwrap();
    write_output(common, &out)?;
    Ok(0)
}
