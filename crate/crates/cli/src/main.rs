use clap::{Parser, Subcommand};
use plastiplate::check::{run_all, CheckConfig};
use plastiplate::diagnostics::{write_csv, RunSummary};
use plastiplate::grid::snapshot::{read_meta, Snapshot};
use plastiplate::scenario::{builtin_config, load_config, Config, BUILTIN_NAMES};
use plastiplate::solver::{evolve_with, ladder, SolverOptions, SweepReport};
use plastiplate::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Perfectly plastic Kirchhoff–Love plate simulator.
#[derive(Parser, Debug)]
#[command(name = "plastiplate", version)]
struct Cli {
    /// worker threads for sweeps and the property suite (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// output root; overrides PLASTIPLATE_OUT and the config's output.dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// snapshot stride in steps (0 keeps the first and last slice only)
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// seed of the randomized property suite
    #[arg(long, global = true, default_value_t = CheckConfig::default().seed)]
    seed: u64,
    /// multiplies every assertion tolerance
    #[arg(long = "tol-scale", global = true, default_value_t = 1.0)]
    tol_scale: f64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// One evolution with per-step diagnostics and snapshots
    Simulate {
        /// JSON config path or builtin scenario name
        config: String,
    },
    /// Ladder over N, λ, mesh and step refinements from the config's ladder section
    Sweep { config: String },
    /// Randomized property suite: tensors, potentials, conjugates, moments, oracle equivalence
    Check,
    /// Dump the blocks of a .plp snapshot to CSV
    Inspect { snapshot: PathBuf },
}

enum Outcome {
    Ok,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.cmd {
        Cmd::Simulate { config } => simulate(&cli, config),
        Cmd::Sweep { config } => sweep(&cli, config),
        Cmd::Check => check(&cli),
        Cmd::Inspect { snapshot } => inspect(&cli, snapshot),
    };
    match res {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}

fn resolve_config(arg: &str) -> Result<Config> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(c) = builtin_config(arg) {
            return Ok(c);
        }
        return Err(Error::Config(format!("{arg}: no such file and not a builtin ({})", BUILTIN_NAMES.join(", "))));
    }
    load_config(path)
}

fn out_root(cli: &Cli, cfg: &Config) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    if let Some(o) = std::env::var_os("PLASTIPLATE_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(o);
    }
    cfg.output.dir.as_ref().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("plastiplate_out"))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn simulate(cli: &Cli, arg: &str) -> Result<Outcome> {
    let cfg = resolve_config(arg)?;
    let scen = cfg.build()?;
    let probe = cfg.probe(&scen.grid)?;
    let stride = cli.stride.unwrap_or(cfg.output.stride);
    let dir = out_root(cli, &cfg).join(&cfg.name);
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), &cfg)?;
    let k = scen.time.steps();
    let grid = scen.grid.clone();
    let opts = SolverOptions { stride: 0, ..cfg.solver.clone() };
    let mut written = 0usize;
    let traj = evolve_with(&scen, &opts, probe, |st| {
        let keep = st.step == 0 || st.step == k || (stride > 0 && st.step % stride == 0);
        if keep {
            let meta = vec![
                ("scenario".to_string(), cfg.name.clone()),
                ("step".to_string(), st.step.to_string()),
                ("time".to_string(), format!("{}", st.time)),
                ("nx".to_string(), grid.nx().to_string()),
                ("ny".to_string(), grid.ny().to_string()),
                ("layers".to_string(), grid.nlayers().to_string()),
            ];
            st.snapshot(&grid).write(&dir.join(format!("snap_{}.plp", st.step)), &meta)?;
            written += 1;
        }
        Ok(())
    })?;
    write_csv(&dir.join("diagnostics.csv"), &traj.log)?;
    let checks = traj.summary.invariant_checks(cli.tol_scale);
    write_json(&dir.join("summary.json"), &serde_json::json!({ "summary": traj.summary, "checks": checks }))?;
    print_summary(&traj.summary);
    let mut ok = true;
    for c in &checks {
        println!("{} {}: {:.3e} (limit {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
        ok &= c.passed;
    }
    println!("wrote {} snapshots, diagnostics.csv and summary.json to {}", written, dir.display());
    Ok(if ok { Outcome::Ok } else { Outcome::Failed })
}

fn print_summary(s: &RunSummary) {
    println!(
        "{}: N={} λ={} steps={} h={:.4} max|σ|_r={:.6} excess={:.3e} min slack={:.3e} dissipation={:.6}",
        s.scenario, s.n, s.lambda, s.steps, s.h, s.max_norm_r, s.max_excess, s.min_slack, s.dissipation_total
    );
}

fn sweep(cli: &Cli, arg: &str) -> Result<Outcome> {
    let cfg = resolve_config(arg)?;
    let root = out_root(cli, &cfg).join(format!("{}_sweep", cfg.name));
    std::fs::create_dir_all(&root)?;
    let mut reports: Vec<(usize, usize, SweepReport)> = Vec::new();
    let mut ok = true;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(root.join("sweep.csv"))?);
    writeln!(csv, "mesh,steps,h,dt,lambda,n,max_excess,max_norm_r,min_slack,energy_scale,flowgap_bound_excess,dissipation,excess_monotone")?;
    for &m in &cfg.ladder.mesh {
        for &st in &cfg.ladder.steps {
            let c = cfg.refined(m, st);
            let scen = c.build()?;
            let probe = c.probe(&scen.grid)?;
            let lambdas: Vec<f64> = cfg.ladder.lambda.iter().map(|l| l * scen.alpha0()).collect();
            let opts = SolverOptions { stride: cli.stride.unwrap_or(0), ..c.solver.clone() };
            let rep = ladder(&scen, &lambdas, &cfg.ladder.n, &opts, probe)?;
            for e in &rep.entries {
                let s = &e.summary;
                writeln!(
                    csv,
                    "{m},{st},{},{},{},{},{},{},{},{},{},{},{}",
                    s.h, s.dt, e.lambda, e.n, s.max_excess, s.max_norm_r, s.min_slack, s.energy_scale,
                    s.max_flowgap_density_excess, s.dissipation_total, rep.excess_monotone
                )?;
                for chk in s.invariant_checks(cli.tol_scale).iter().filter(|c| !c.passed) {
                    println!("FAIL mesh×{m} steps×{st} λ={} N={}: {} {:.3e} > {:.3e}", e.lambda, e.n, chk.name, chk.value, chk.limit);
                    ok = false;
                }
            }
            println!("mesh×{m} steps×{st}: excess by N {:?} monotone={}", rep.excess_by_n, rep.excess_monotone);
            ok &= rep.excess_monotone;
            reports.push((m, st, rep));
        }
    }
    csv.flush()?;
    let json: Vec<_> = reports.iter().map(|(m, st, r)| serde_json::json!({ "mesh": m, "steps": st, "report": r })).collect();
    write_json(&root.join("sweep.json"), &json)?;
    println!("wrote sweep.csv and sweep.json to {}", root.display());
    Ok(if ok { Outcome::Ok } else { Outcome::Failed })
}

fn check(cli: &Cli) -> Result<Outcome> {
    let cfg = CheckConfig { seed: cli.seed, tol_scale: cli.tol_scale };
    let results = run_all(&cfg)?;
    let mut ok = true;
    for o in &results {
        println!("{} {:<40} n={:<6} worst={:.3e} tol={:.1e}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.samples, o.worst, o.tol);
        ok &= o.passed;
    }
    println!("{} of {} checks passed (seed {})", results.iter().filter(|o| o.passed).count(), results.len(), cli.seed);
    Ok(if ok { Outcome::Ok } else { Outcome::Failed })
}

fn inspect(cli: &Cli, path: &Path) -> Result<Outcome> {
    let snap = Snapshot::read(path)?;
    if let Ok(meta) = read_meta(path) {
        for (k, v) in meta {
            println!("{k}={v}");
        }
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("snap").to_string();
    let dir = match &cli.out {
        Some(o) => o.clone(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default().join(format!("{stem}_csv")),
    };
    for b in &snap.blocks {
        println!("block {}: {}x{} nodes, {} layers, {} components, t={} step={}", b.name, b.nx, b.ny, b.nlayers, b.ncomp, b.time, b.step);
    }
    for p in snap.dump_csv(&dir, &stem)? {
        println!("wrote {}", p.display());
    }
    Ok(Outcome::Ok)
}
