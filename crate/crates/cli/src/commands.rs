use std::fs::{self, File};
use std::io::{BufWriter, Write};

use anyhow::{anyhow, bail, Context, Result};
use bdf_core::bdf_operators::{inequality_suite, Compression, ExternalDensity, InequalityOptions};
use bdf_core::clifford::{calcul_sweep, exhaustive_furry};
use bdf_core::dressed_dirac::{dress_with, DressOptions};
use bdf_core::fixed_point::{renorm_csv, renorm_table, run as scf_run, ScfOptions, ScfProblem};
use bdf_core::nonrel_hf::{scf_minimize, BasisSpec, ScfSettings};
use bdf_core::vacuum_polarization::{assemble, RenormOptions};
use bdf_core::{BdfError, PhysicalParams};
use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Cli, Command, SCHEMA_VERSION};

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DressArgs {
    #[arg(long, default_value_t = 0.02)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 512)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct UehlingArgs {
    #[arg(long, default_value_t = 0.02)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lambda: f64,
    /// Highest order J of f_Λ (orders 2 and 3 are Monte Carlo).
    #[arg(long, default_value_t = 1)]
    pub jmax: usize,
    /// Largest k written to the CSV (default 2Λ).
    #[arg(long)]
    pub kmax: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RenormArgs {
    /// Comma-separated α values.
    #[arg(long, default_value = "0.02")]
    pub alpha: String,
    /// Comma-separated Λ values.
    #[arg(long, default_value = "1e3")]
    pub lambda: String,
    #[arg(long = "M", default_value_t = 1.0)]
    #[serde(rename = "M")]
    pub m: f64,
    #[arg(long = "Z", default_value_t = 0.0)]
    #[serde(rename = "Z")]
    pub z: f64,
    #[arg(long, default_value_t = 1)]
    pub jmax: usize,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScfArgs {
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lambda: f64,
    #[arg(long = "M", default_value_t = 1)]
    #[serde(rename = "M")]
    pub m: usize,
    #[arg(long = "Z", default_value_t = 1.0)]
    #[serde(rename = "Z")]
    pub z: f64,
    /// `gaussian:<width>` or `none`.
    #[arg(long, default_value = "gaussian:0.5")]
    pub nu_profile: String,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Grid points per axis.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    /// Box side.
    #[arg(long, default_value_t = 8.0)]
    pub extent: f64,
    /// Largest number of orbital pairs in the written γ (0: no cap).
    #[arg(long, default_value_t = 0)]
    pub rank_cap: usize,
    /// Largest Hilbert–Schmidt weight the compression may drop.
    #[arg(long, default_value_t = 1e-3)]
    pub max_discarded: f64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct NrhfArgs {
    #[arg(long = "Z", default_value_t = 1.0)]
    #[serde(rename = "Z")]
    pub z: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    #[serde(rename = "M")]
    pub m: f64,
    /// Screening constant; ignored when --from-renorm is given.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// JSON written by `uehling`; a = f0/(1 + f0).
    #[arg(long)]
    pub from_renorm: Option<String>,
    /// Even-tempered basis `α₀,β,n`.
    #[arg(long, default_value = "0.02,2.2,14")]
    pub basis: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// DIIS history; 0 uses plain damping.
    #[arg(long, default_value_t = 8)]
    pub diis: usize,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FurryArgs {
    /// Random momentum triples for the sign-matrix identities.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub max_len: usize,
    /// Gaussian-integer arithmetic for the word sweep.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = 0.02)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lambda: f64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct InequalityArgs {
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 16.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 100)]
    pub sobolev_samples: usize,
    #[arg(long, default_value_t = 20)]
    pub kernels: usize,
}

/// A check that ran but did not hold; exits with the numerical-failure code.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Writes to --out or stdout.
fn emit(out: Option<&str>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {p}")),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn sidecar(out: Option<&str>, suffix: &str, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => {
            let path = format!("{p}.{suffix}");
            fs::write(&path, text).with_context(|| format!("writing {path}"))
        }
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("bad number `{x}`: {e}")))
        .collect()
}

fn profile(s: &str) -> Result<ExternalDensity> {
    if s == "none" {
        return Ok(ExternalDensity::None);
    }
    match s.split_once(':') {
        Some(("gaussian", w)) => {
            let width: f64 = w.parse().map_err(|e| anyhow!("bad width `{w}`: {e}"))?;
            if !(width > 0.0) {
                bail!("gaussian width must be positive");
            }
            Ok(ExternalDensity::Gaussian { width })
        }
        _ => bail!("unknown nu profile `{s}` (use `none` or `gaussian:<width>`)"),
    }
}

/// Invalid numerical input is a usage error, everything else from the core a numerical one.
fn core<T>(r: bdf_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        BdfError::InvalidInput(msg) => anyhow!("invalid input: {msg}"),
        other => anyhow::Error::new(other),
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli.global.out.as_deref();
    let seed = cli.global.seed;
    match &cli.command {
        Command::Dress(a) => {
            let params = PhysicalParams::new(a.alpha, a.lambda);
            let opts = DressOptions { nodes: a.nodes, tol: a.tol, max_iter: a.max_iter, ..DressOptions::default() };
            let d = core(dress_with(&params, &opts))?;
            let mut csv = String::from("p,g0,g1,E_script\n");
            for i in 0..d.grid.len() {
                let (g0, g1) = (d.g0[i], d.g1[i]);
                csv.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", d.grid[i], g0, g1, g0.hypot(g1)));
            }
            emit(out, &csv)?;
            sidecar(
                out,
                "json",
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "alpha": d.alpha,
                    "lambda": d.lambda,
                    "iterations": d.iterations,
                    "residual": d.residual,
                    "m": d.m,
                    "warnings": params.regime_warnings(),
                }),
            )
        }
        Command::Uehling(a) => {
            let params = PhysicalParams::new(a.alpha, a.lambda);
            let d = core(dress_with(&params, &DressOptions::default()))?;
            let mut opts = RenormOptions { j_max: a.jmax, tol: a.tol, ..RenormOptions::default() };
            opts.f_opts.seed = seed;
            let r = core(assemble(&d, &opts))?;
            let kmax = a.kmax.unwrap_or(f64::INFINITY);
            let mut csv = String::from("k,B,f,F\n");
            for i in 0..r.kgrid.len() {
                if r.kgrid[i] <= kmax {
                    csv.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", r.kgrid[i], r.b[i], r.f[i], r.big_f[i]));
                }
            }
            emit(out, &csv)?;
            sidecar(
                out,
                "json",
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "alpha": r.alpha,
                    "lambda": r.lambda,
                    "L": r.l,
                    "f0": r.f0(),
                    "Z3": r.z3,
                    "Z3_alt_convention": r.z3_alt_convention,
                    "F_L1_norm": r.check_f_l1,
                    "F_L1_unitary": r.f_l1_unitary,
                    "order_one_constant": r.order_one_constant(),
                }),
            )
        }
        Command::Renorm(a) => {
            let mut opts = RenormOptions { j_max: a.jmax, ..RenormOptions::default() };
            opts.f_opts.seed = seed;
            let rows = core(renorm_table(&list(&a.alpha)?, &list(&a.lambda)?, a.m, a.z, &opts))?;
            emit(out, &renorm_csv(&rows))
        }
        Command::ScfRun(a) => {
            let params =
                PhysicalParams { alpha: a.alpha, lambda: a.lambda, electrons: a.m, z: a.z, nu: profile(&a.nu_profile)? };
            core(params.validate())?;
            let dressed = core(dress_with(&params, &DressOptions::default()))?;
            let opts = ScfOptions { n: a.n, extent: a.extent, order: a.order, tol: a.tol, max_iter: a.max_iter, ..ScfOptions::default() };
            let problem = core(ScfProblem::new(&params, &dressed, &opts))?;
            let mut lines: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {p}"))?)),
                None => Box::new(std::io::stdout()),
            };
            let mut io_err = None;
            let result = scf_run(&problem, a.tol, a.max_iter, |rec| {
                if let Err(e) = serde_json::to_writer(&mut lines, rec).map_err(anyhow::Error::from).and_then(|_| Ok(writeln!(lines)?)) {
                    io_err.get_or_insert(e);
                }
            });
            lines.flush()?;
            if let Some(e) = io_err {
                return Err(e);
            }
            let (state, summary) = core(result)?;
            if let Some(p) = out {
                let compression = Compression {
                    cap: if a.rank_cap == 0 { usize::MAX } else { a.rank_cap },
                    max_discarded: a.max_discarded,
                    ..Compression::default()
                };
                let (gamma, report) = core(state.gamma_kernel(&problem.lattice, &compression))?;
                let path = format!("{p}.gamma.bin");
                let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {path}"))?);
                gamma.write_binary(&mut w)?;
                w.flush()?;
                sidecar(
                    out,
                    "json",
                    &json!({ "schema_version": SCHEMA_VERSION, "summary": summary, "gamma_compression": report }),
                )
            } else {
                sidecar(out, "json", &json!({ "schema_version": SCHEMA_VERSION, "summary": summary }))
            }
        }
        Command::Nrhf(a) => {
            let screening = match &a.from_renorm {
                Some(path) => screening_from_file(path)?,
                None => a.a,
            };
            let b = list(&a.basis)?;
            if b.len() != 3 || b[2] < 1.0 || b[2].fract() != 0.0 {
                bail!("--basis expects `α₀,β,n` with integer n ≥ 1");
            }
            let spec = BasisSpec { alpha0: b[0], beta: b[1], n: b[2] as usize };
            let settings = ScfSettings { damping: a.damping, tol: a.tol, diis: a.diis, max_iter: a.max_iter, ..ScfSettings::default() };
            let st = core(scf_minimize(a.z, a.m, screening, &spec, &settings))?;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "Z": a.z,
                "M": a.m,
                "a": screening,
                "energy": st.energy.total,
                "components": st.energy,
                "eps": st.eps(),
                "iterations": st.iterations,
            });
            emit(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            if let Some(p) = out {
                let r: Vec<f64> = (0..200).map(|i| 1e-3 * 1.06f64.powi(i)).collect();
                let mut csv = String::from("r,spin,orbital,psi\n");
                for (s, j, prof) in st.radial_profiles(&r) {
                    for (ri, v) in r.iter().zip(prof) {
                        csv.push_str(&format!("{ri:.12e},{},{j},{v:.12e}\n", if s == 0 { "up" } else { "down" }));
                    }
                }
                let path = format!("{p}.orbitals.csv");
                fs::write(&path, csv).with_context(|| format!("writing {path}"))?;
            }
            Ok(())
        }
        Command::FurryCheck(a) => {
            let words = exhaustive_furry(a.max_len, a.exact);
            let params = PhysicalParams::new(a.alpha, a.lambda);
            let dressed = core(dress_with(&params, &DressOptions::default()))?;
            let identities = core(calcul_sweep(&dressed, a.trials, seed))?;
            let ok = words.violations == 0 && identities.violations == 0;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "words": words,
                "identities": identities,
                "violations": words.violations + identities.violations,
                "pass": ok,
            });
            emit(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            if !ok {
                return Err(NumericalFailure(format!("Furry check found {} violations", words.violations + identities.violations)).into());
            }
            Ok(())
        }
        Command::Inequalities(a) => {
            let opts = InequalityOptions {
                samples: a.samples,
                n: a.n,
                extent: a.extent,
                sobolev_samples: a.sobolev_samples,
                kernel_samples: a.kernels,
                seed,
            };
            let rep = core(inequality_suite(&opts))?;
            let report = json!({ "schema_version": SCHEMA_VERSION, "pass": rep.passes(), "report": rep });
            emit(out, &(serde_json::to_string_pretty(&report)? + "\n"))
        }
    }
}

fn screening_from_file(path: &str) -> Result<f64> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("{path} is not JSON"))?;
    if let Some(f0) = v.get("f0").and_then(Value::as_f64) {
        return Ok(f0 / (1.0 + f0));
    }
    if let Some(f) = v.get("f").and_then(Value::as_array).and_then(|a| a.first()).and_then(Value::as_f64) {
        return Ok(f / (1.0 + f));
    }
    bail!("{path} has neither `f0` nor an `f` array")
}
