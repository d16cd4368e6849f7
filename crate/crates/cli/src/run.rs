use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dfpi::certify::{run_battery, BatteryConfig};
use dfpi::engine::{dfpi_solve, Deflation, DfpiVariant, SolveStatus, SolverOptions, SolverTrace};
use dfpi::krylov::{
    bicg_solve, bicgstab_solve, cg_solve, gmres_solve, richardson_solve, KrylovOptions,
};
use dfpi::linalg::SparseMatrix;
use dfpi::precond::{PrecondKind, Preconditioner};
use dfpi::problems::{read_matrix_market, read_vector, ProblemSpec};
use dfpi::projector::ProjectionMode;
use dfpi::recruitment::{StrategyConfig, StrategyKind};

use crate::args::{CompareArgs, CountArg, SolveArgs, SolverArg, SystemArgs, VerifyArgs};
use crate::{EXIT_BREAKDOWN, EXIT_CONVERGED, EXIT_MAX_ITER, EXIT_VERIFY_FAILED};

pub const CSV_HEADER: &str = "iter,residual_2norm,trouble_size,event";

struct System {
    a: SparseMatrix,
    b: Vec<f64>,
    p: Preconditioner,
}

fn load_system(s: &SystemArgs) -> Result<System, String> {
    let (a, b) = match (&s.problem, &s.matrix) {
        (Some(spec), None) => {
            let text = if spec.contains("seed=") {
                spec.clone()
            } else if spec.contains(':') {
                format!("{spec},seed={}", s.seed)
            } else {
                format!("{spec}:seed={}", s.seed)
            };
            let spec: ProblemSpec = text.parse().map_err(|e| format!("--problem: {e}"))?;
            let prob = spec.build().map_err(|e| format!("--problem: {e}"))?;
            (prob.a, prob.b)
        }
        (None, Some(path)) => {
            let a = read_matrix_market(path).map_err(|e| format!("{}: {e}", path.display()))?;
            if a.rows() != a.cols() {
                return Err(format!("{}: matrix must be square", path.display()));
            }
            let b = match &s.rhs {
                Some(rp) => read_vector(rp).map_err(|e| format!("{}: {e}", rp.display()))?,
                None => vec![1.0; a.rows()],
            };
            if b.len() != a.rows() {
                return Err(format!(
                    "right-hand side has {} entries, matrix has {} rows",
                    b.len(),
                    a.rows()
                ));
            }
            (a, b)
        }
        (None, None) => return Err("one of --problem or --matrix is required".into()),
        (Some(_), Some(_)) => return Err("--problem and --matrix are exclusive".into()),
    };
    let kind: PrecondKind = s.precond.parse().map_err(|e| format!("--precond: {e}"))?;
    let p = Preconditioner::build(kind, &a).map_err(|e| format!("preconditioner: {e}"))?;
    Ok(System { a, b, p })
}

fn check_common(s: &SystemArgs) -> Result<(), String> {
    if !(s.tol > 0.0) {
        return Err("--tol must be positive".into());
    }
    if s.max_iter == 0 {
        return Err("--max-iter must be at least 1".into());
    }
    if s.restart == 0 {
        return Err("--restart must be at least 1".into());
    }
    Ok(())
}

fn strategy(s: &SystemArgs, kind: StrategyKind) -> Result<StrategyConfig, String> {
    let mut cfg = StrategyConfig::new(kind);
    if let Some(w) = s.window {
        cfg.window = w;
    }
    cfg.stab_tol = s.stab_tol;
    cfg.rr_tol = s.rr_tol;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// What one method run produced.
struct RunOutput {
    trace: SolverTrace,
}

enum Method {
    Krylov(SolverArg),
    Deflated(Option<StrategyKind>),
}

fn run_method(
    sys: &System,
    args: &SystemArgs,
    method: &Method,
    variant: DfpiVariant,
    record_halves: bool,
) -> Result<RunOutput, String> {
    let kopts = KrylovOptions {
        max_iter: args.max_iter,
        rel_tol: args.tol,
        restart: None,
        keep_iterates: false,
    };
    let (a, b, p) = (&sys.a, sys.b.as_slice(), &sys.p);
    let out = match method {
        Method::Krylov(SolverArg::Richardson) => richardson_solve(a, b, None, p, &kopts),
        Method::Krylov(SolverArg::Gmres) => gmres_solve(a, b, None, p, &kopts),
        Method::Krylov(SolverArg::Gmresn) => gmres_solve(
            a,
            b,
            None,
            p,
            &KrylovOptions {
                restart: Some(args.restart),
                ..kopts
            },
        ),
        Method::Krylov(SolverArg::Cg) => cg_solve(a, b, None, p, &kopts),
        Method::Krylov(SolverArg::Bicg) => bicg_solve(a, b, None, p, &kopts),
        Method::Krylov(SolverArg::Bicgstab) => bicgstab_solve(a, b, None, p, &kopts),
        Method::Krylov(SolverArg::Dfpi) | Method::Deflated(_) => {
            let kind = match method {
                Method::Deflated(k) => *k,
                _ => Some(StrategyKind::BoostConv),
            };
            let mode: ProjectionMode = args
                .project
                .parse()
                .map_err(|e| format!("--project: {e}"))?;
            let opts = SolverOptions {
                max_iter: args.max_iter,
                rel_tol: args.tol,
                variant,
                record_halves,
                keep_iterates: false,
            };
            let deflation = match kind {
                Some(k) => Deflation::Dynamic {
                    mode,
                    strategy: strategy(args, k)?,
                },
                None => Deflation::None,
            };
            return dfpi_solve(a, b, None, p, deflation, &opts)
                .map(|o| RunOutput { trace: o.trace })
                .map_err(|e| e.to_string());
        }
    };
    out.map(|o| RunOutput { trace: o.trace })
        .map_err(|e| e.to_string())
}

fn status_code(s: SolveStatus) -> u8 {
    match s {
        SolveStatus::Converged => EXIT_CONVERGED,
        SolveStatus::MaxIter => EXIT_MAX_ITER,
        SolveStatus::Breakdown => EXIT_BREAKDOWN,
    }
}

/// CSV text of a trace. With `total`, every record is numbered by its
/// half-step count; otherwise iterations read `k` or `k.5`.
pub fn trace_csv(trace: &SolverTrace, total_count: bool) -> String {
    let mut s = String::with_capacity(40 * (trace.records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &trace.records {
        let iter = if total_count {
            r.half_steps.to_string()
        } else {
            r.iter_label()
        };
        let event = r.event.replace([',', '\n'], ";");
        let _ = writeln!(s, "{iter},{:e},{},{event}", r.residual, r.trouble_size);
    }
    s
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn solve(args: &SolveArgs) -> Result<u8, String> {
    check_common(&args.system)?;
    if args.recruit.is_some() && args.solver != SolverArg::Dfpi {
        return Err("--recruit applies to --solver dfpi only".into());
    }
    let variant: DfpiVariant = args
        .variant
        .parse()
        .map_err(|e| format!("--variant: {e}"))?;
    if variant != DfpiVariant::PreProjection && args.solver != SolverArg::Dfpi {
        return Err("--variant applies to --solver dfpi only".into());
    }
    let method = match (args.solver, &args.recruit) {
        (SolverArg::Dfpi, Some(r)) if r == "none" => Method::Deflated(None),
        (SolverArg::Dfpi, Some(r)) => {
            Method::Deflated(Some(r.parse().map_err(|e| format!("--recruit: {e}"))?))
        }
        (SolverArg::Dfpi, None) => Method::Deflated(Some(StrategyKind::BoostConv)),
        (s, None) => Method::Krylov(s),
        (_, Some(_)) => unreachable!("checked above"),
    };
    let sys = load_system(&args.system)?;
    let mut out = run_method(&sys, &args.system, &method, variant, args.record_halves)?;
    let bicgstab = args.solver == SolverArg::Bicgstab;
    if bicgstab && args.count == CountArg::Reported && !args.record_halves {
        out.trace.records.retain(|r| !r.is_half());
    }
    let total = bicgstab && args.count == CountArg::Total;
    write_out(args.out.as_deref(), &trace_csv(&out.trace, total))?;
    eprintln!(
        "status={} iterations={} final_residual={:e} peak_trouble_size={} matvecs={}",
        out.trace.status,
        out.trace.iterations(),
        out.trace.final_residual(),
        out.trace.peak_trouble_size(),
        out.trace.matvecs
    );
    Ok(status_code(out.trace.status))
}

fn parse_method(name: &str) -> Result<Method, String> {
    let krylov = match name {
        "richardson" => Some(SolverArg::Richardson),
        "gmres" => Some(SolverArg::Gmres),
        "gmresn" => Some(SolverArg::Gmresn),
        "cg" => Some(SolverArg::Cg),
        "bicg" => Some(SolverArg::Bicg),
        "bicgstab" => Some(SolverArg::Bicgstab),
        _ => None,
    };
    if let Some(k) = krylov {
        return Ok(Method::Krylov(k));
    }
    if name == "dfpi" {
        return Ok(Method::Deflated(Some(StrategyKind::BoostConv)));
    }
    name.parse::<StrategyKind>()
        .map(|k| Method::Deflated(Some(k)))
        .map_err(|e| e.to_string())
}

pub fn compare(args: &CompareArgs) -> Result<u8, String> {
    check_common(&args.system)?;
    let names: Vec<&str> = args
        .methods
        .split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .collect();
    if names.is_empty() {
        return Err("--methods is empty".into());
    }
    let methods = names
        .iter()
        .map(|n| parse_method(n).map_err(|e| format!("--methods: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if args.system.window.is_some() || args.system.stab_tol != 5e-2 || args.system.rr_tol != 1e-2 {
        strategy(&args.system, StrategyKind::BoostConv)?;
    }
    let sys = load_system(&args.system)?;

    let mut csv = String::from(
        "method,status,iterations,iterations_to_tol,final_residual,peak_trouble_size,matvecs\n",
    );
    let mut table = format!(
        "{:<12} {:<10} {:>10} {:>10} {:>14} {:>6} {:>8}\n",
        "method", "status", "iters", "to_tol", "final_res", "peak", "matvecs"
    );
    for (name, m) in names.iter().zip(&methods) {
        match run_method(&sys, &args.system, m, DfpiVariant::PreProjection, false) {
            Ok(out) => {
                let t = &out.trace;
                let to_tol = if t.status == SolveStatus::Converged {
                    t.iterations().to_string()
                } else {
                    "-".into()
                };
                let _ = writeln!(
                    csv,
                    "{name},{},{},{to_tol},{:e},{},{}",
                    t.status,
                    t.iterations(),
                    t.final_residual(),
                    t.peak_trouble_size(),
                    t.matvecs
                );
                let _ = writeln!(
                    table,
                    "{:<12} {:<10} {:>10} {:>10} {:>14.6e} {:>6} {:>8}",
                    name,
                    t.status.to_string(),
                    t.iterations(),
                    to_tol,
                    t.final_residual(),
                    t.peak_trouble_size(),
                    t.matvecs
                );
            }
            Err(e) => {
                let msg = e.replace(',', ";");
                let _ = writeln!(csv, "{name},error,,,,,{msg}");
                let _ = writeln!(table, "{name:<12} error: {e}");
            }
        }
    }
    print!("{table}");
    if let Some(p) = &args.out {
        fs::write(p, csv).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(EXIT_CONVERGED)
}

pub fn verify(args: &VerifyArgs) -> Result<u8, String> {
    if !(args.tol_scale >= 0.0) {
        return Err("--tol-scale must be nonnegative".into());
    }
    let cfg = BatteryConfig {
        seed: args.seed,
        scale: args.scale as usize,
        tol_scale: args.tol_scale,
    };
    println!(
        "verification battery: n = {}, seed = {}",
        2 * cfg.scale,
        cfg.seed
    );
    let results = run_battery(&cfg);
    let passed = results.iter().filter(|r| r.pass).count();
    for r in &results {
        println!("{r}");
    }
    println!("{passed}/{} checks passed", results.len());
    if passed == results.len() {
        Ok(EXIT_CONVERGED)
    } else {
        for r in results.iter().filter(|r| !r.pass) {
            eprintln!("failed check: {}", r.name);
        }
        Ok(EXIT_VERIFY_FAILED)
    }
}
