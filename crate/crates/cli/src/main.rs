use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaos_gamma::bounds;
use chaos_gamma::coeffs::{equality_witness, gamma3_identity_check, verify_q2_equality};
use chaos_gamma::distances::{dtv_spec, mc_kolmogorov};
use chaos_gamma::experiment::{self, ExperimentConfig, Format};
use chaos_gamma::gamma_ops::{
    cov_32_21, cov_32_21_via_cumulants, delta, delta_via_cumulants, discrepancy_m, is_centered_gamma,
    mean_gap, mixed_gamma_detect, phi_one_identity, phi_profile, ratio_condition, trace_class_bound_check,
};
use chaos_gamma::{EigenvalueSpec, Error, Family, GammaTarget, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "chaos-gamma", version, about = "Gamma approximation on the second Wiener chaos")]
struct Cli {
    /// Experiment config (JSON); required by `rates`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for Monte Carlo work.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path. Without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output formats, comma separated (csv, json, svg). Only `rates`
    /// accepts anything other than json.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Eigenvalues as a JSON array, or @path to a file holding one.
    #[arg(long, conflicts_with = "family")]
    spec: Option<String>,
    /// Named family: toy2, toy3, ustat, concrete, delta.
    #[arg(long, requires = "n")]
    family: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    /// Decay parameter of the delta family.
    #[arg(long)]
    delta: Option<f64>,
    /// Target degrees of freedom. Defaults to the family's limit, or to
    /// half the variance for raw specs.
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Cumulants and their gaps to the centered Gamma law.
    Cumulants {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 6)]
        p_max: u32,
    },
    /// Iterated Gamma-operator variances, by both routes.
    Delta {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 3)]
        r_max: u32,
    },
    /// All distance bounds with their constants.
    Bounds {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
    },
    /// Gamma characterization diagnostics.
    Characterize {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Exact total variation distance along the concrete two-eigenvalue family.
    DtvExample {
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,200,400")]
        n: Vec<u64>,
    },
    /// Kolmogorov bound next to a Monte Carlo estimate.
    Kolmogorov {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
    },
    /// Run a rate experiment from --config.
    Rates,
    /// Checks the contraction-constant recursions.
    CoeffsVerify {
        #[arg(long, default_value_t = 5)]
        s_max: usize,
        #[arg(long, default_value_t = 3)]
        q: u32,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::VarianceMismatch { .. } => 2,
        Error::Numeric { .. } => 3,
        Error::Io { .. } => 4,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("CHAOS_GAMMA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("CHAOS_GAMMA_THREADS = '{raw}' is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn load_spec(args: &SpecArgs) -> Result<(EigenvalueSpec, f64)> {
    if let Some(raw) = &args.spec {
        let text = match raw.strip_prefix('@') {
            Some(p) => read_file(Path::new(p))?,
            None => raw.clone(),
        };
        let coeffs: Vec<f64> =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("--spec: {e}")))?;
        let spec = EigenvalueSpec::new(coeffs)?;
        let nu = args.nu.unwrap_or(spec.variance() / 2.0);
        return Ok((spec, nu));
    }
    let (Some(name), Some(n)) = (&args.family, args.n) else {
        return Err(Error::Config("give either --spec or --family with --n".into()));
    };
    let fam = Family::from_name(name, args.delta)?;
    Ok((fam.spec(n)?, args.nu.unwrap_or(fam.target_nu())))
}

fn cumulants(spec: &EigenvalueSpec, nu: f64, p_max: u32) -> Result<Value> {
    let target = GammaTarget::new(nu)?;
    let mut rows = Vec::new();
    for p in 1..=p_max {
        rows.push(json!({
            "p": p,
            "value": spec.cumulant(p)?,
            "target": target.cumulant(p)?,
            "gap": spec.cumulant_gap(p, nu)?,
        }));
    }
    Ok(json!({ "coeffs": spec.coeffs(), "nu": nu, "variance": spec.variance(), "cumulants": rows }))
}

fn deltas(spec: &EigenvalueSpec, r_max: u32) -> Result<Value> {
    let mut rows = Vec::new();
    for r in 0..=r_max {
        rows.push(json!({
            "r": r,
            "eigenvalue_route": delta(spec, r).value,
            "cumulant_route": delta_via_cumulants(spec, r)?,
        }));
    }
    let (lhs, rhs) = phi_one_identity(spec);
    Ok(json!({
        "coeffs": spec.coeffs(),
        "delta": rows,
        "cov_32_21": { "eigenvalue_route": cov_32_21(spec), "cumulant_route": cov_32_21_via_cumulants(spec)? },
        "phi_profile": phi_profile(spec),
        "phi_one_identity": { "two_delta0_sq": lhs, "phi1_plus_half_b": rhs },
    }))
}

fn all_bounds(spec: &EigenvalueSpec, nu: f64, b: f64) -> Result<Value> {
    Ok(json!({
        "nu": nu,
        "bounds": [
            bounds::d1_bound(spec, nu)?,
            bounds::sqrt_cumulant_bound(spec, nu)?,
            bounds::d2_bracket(spec, nu)?,
            bounds::d3_bracket(spec, nu)?,
            bounds::kolmogorov_bound(spec, nu, b)?,
        ],
    }))
}

fn characterize(spec: &EigenvalueSpec, nu: f64, tol: f64) -> Result<Value> {
    let gaps: Vec<f64> = (1..=3).map(|r| mean_gap(spec, r)).collect::<Result<_>>()?;
    Ok(json!({
        "coeffs": spec.coeffs(),
        "nu": nu,
        "gamma_check": is_centered_gamma(spec, nu, tol),
        "discrepancy_m": discrepancy_m(spec, nu)?,
        "mean_gap": gaps,
        "trace_class": trace_class_bound_check(spec),
        "ratio_condition": ratio_condition(spec),
        "mixed_gamma": mixed_gamma_detect(spec, tol),
    }))
}

fn dtv_example(ns: &[u64]) -> Result<Value> {
    let mut rows = Vec::new();
    for &n in ns {
        let est = dtv_spec(&Family::Concrete.spec(n)?)?;
        let nf = n as f64;
        rows.push(json!({ "n": n, "dtv": est.value, "error_bound": est.error_bound, "n2_dtv": nf * nf * est.value }));
    }
    Ok(json!({ "family": "concrete", "rows": rows }))
}

fn kolmogorov(spec: &EigenvalueSpec, nu: f64, b: f64, m: usize, seed: u64) -> Result<Value> {
    Ok(json!({
        "nu": nu,
        "seed": seed,
        "bound": bounds::kolmogorov_bound(spec, nu, b)?,
        "best_b": bounds::kolmogorov_bound_best_b(spec, nu)?,
        "monte_carlo": mc_kolmogorov(spec, nu, m, seed)?,
    }))
}

fn coeffs_verify(s_max: usize, q: u32) -> Result<Value> {
    let fams = [Family::Toy2, Family::Toy3, Family::Ustat, Family::Concrete];
    let checks: Vec<Value> = fams
        .iter()
        .map(|f| Ok(json!({ "family": f.name(), "n": 10, "check": gamma3_identity_check(&f.spec(10)?)? })))
        .collect::<Result<_>>()?;
    Ok(json!({
        "q2_equality": verify_q2_equality(s_max)?,
        "witness": { "q": q, "tuple": equality_witness(q, s_max)? },
        "gamma3_identity": checks,
    }))
}

fn write_out(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io { path: p.to_path_buf(), source }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn rates(cli: &Cli) -> Result<()> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config("rates needs --config".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut formats: Vec<Format> = cli.format.iter().map(|s| Format::parse(s)).collect::<Result<_>>()?;
    if formats.is_empty() {
        formats = cfg.output.formats.clone();
    }
    if formats.is_empty() {
        formats.push(Format::Csv);
    }
    let out = cli.out.clone().or_else(|| cfg.output.path.clone());
    let report = experiment::run(&cfg)?;
    match out {
        None => {
            for f in formats {
                let text = match f {
                    Format::Csv => experiment::to_csv(&report),
                    Format::Json => experiment::to_json(&report)?,
                    Format::Svg => experiment::to_svg(&report),
                };
                print!("{text}");
            }
        }
        Some(p) if formats.len() == 1 => experiment::emit(&report, formats[0], &p)?,
        Some(p) => {
            for f in formats {
                experiment::emit(&report, f, &p.with_extension(f.extension()))?;
            }
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Rates = cli.command {
        return rates(cli);
    }
    if cli.format.iter().any(|f| f != "json") {
        return Err(Error::Config("only `rates` supports formats other than json".into()));
    }
    let seed = cli.seed.unwrap_or(0);
    let value = match &cli.command {
        Command::Cumulants { spec, p_max } => {
            let (s, nu) = load_spec(spec)?;
            cumulants(&s, nu, *p_max)?
        }
        Command::Delta { spec, r_max } => deltas(&load_spec(spec)?.0, *r_max)?,
        Command::Bounds { spec, b } => {
            let (s, nu) = load_spec(spec)?;
            all_bounds(&s, nu, *b)?
        }
        Command::Characterize { spec, tol } => {
            let (s, nu) = load_spec(spec)?;
            characterize(&s, nu, *tol)?
        }
        Command::DtvExample { n } => dtv_example(n)?,
        Command::Kolmogorov { spec, b, mc_samples } => {
            let (s, nu) = load_spec(spec)?;
            kolmogorov(&s, nu, *b, *mc_samples, seed)?
        }
        Command::CoeffsVerify { s_max, q } => coeffs_verify(*s_max, *q)?,
        Command::Rates => unreachable!(),
    };
    let text = serde_json::to_string_pretty(&value).map_err(|e| Error::Config(e.to_string()))?;
    write_out(&text, cli.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| dispatch(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
