//! The `nrk` command-line front end.
//!
//! Every command reads a key=value configuration (`--config` plus
//! `--set key=value` overrides), writes CSV/JSON into `--out-dir`, and
//! returns 0 on success, 1 on a configuration error, 2 on a numerical
//! failure.

use crate::boltzmann::{
    boltzmann_entropy_balance, boltzmann_equilibrium_residual, boltzmann_evolve, check_symmetries, factorization_residual,
    swap_collision_flux, reversed_collision_flux, two_particle_stationary, typical_collision_flux, CollisionKernel,
};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_kernel_csv, write_csv, write_events_csv, write_json, write_kernel_csv, Config};
use crate::kac::{chaos_gap, empirical_marginal, simulate_kac};
use crate::kernels::{
    build_kuramoto_collision_kernel, central_mass, kuramoto_lambda_a, kuramoto_lambda_b, local_maxima, run_opinion_model,
    solve_h_fixed_point, AsymmetricModifier, CircleGrid, IntervalGrid, KuramotoModel, KuramotoVariant, ModifierForm,
    NoiseConvention, OpinionModel, OpinionOutcome, OutgoingRule,
};
use crate::markov::{
    entropy_balance_report, kolmogorov_evolve, reversed_flux, stationarity_residual, stationary_measure, swap_map, typical_flux,
    MarkovTrajectory, RateMatrix,
};
use crate::measures::{relative_entropy, ProbabilityVector};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "nrk", version, about = "Entropy-dissipation experiments for non-reversible Markov chains and Boltzmann equations")]
pub struct Cli {
    /// key=value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// overrides the `seed` key
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// worker threads for parallel sections
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// configuration override, repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// stationary law pi (Markov) or two-particle law g (collision models)
    Stationary,
    /// time evolution and relative-entropy decay
    Evolve,
    /// entropy balance of a flux along the evolution
    Balance,
    /// kernel curves, factorization residuals, fixed-point oracle
    Kernel,
    /// Kac particle walk and propagation-of-chaos gap
    Kac,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Evolve => "evolve",
            Command::Balance => "balance",
            Command::Kernel => "kernel",
            Command::Kac => "kac",
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.set_assignment(s)?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", s.to_string());
    }
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut ctx = Ctx { cfg, out: cli.out_dir.clone(), command: cli.command, files: Vec::new() };
        match cli.command {
            Command::Stationary => cmd_stationary(&mut ctx),
            Command::Evolve => cmd_evolve(&mut ctx),
            Command::Balance => cmd_balance(&mut ctx),
            Command::Kernel => cmd_kernel(&mut ctx),
            Command::Kac => cmd_kac(&mut ctx),
        }?;
        for f in &ctx.files {
            println!("wrote {}", f.display());
        }
        Ok(())
    })
}

struct Ctx {
    cfg: Config,
    out: PathBuf,
    command: Command,
    files: Vec<PathBuf>,
}

impl Ctx {
    fn path(&mut self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let p = self.out.join(name);
        self.files.push(p.clone());
        Ok(p)
    }

    fn header(&self) -> String {
        self.cfg.header(self.command.name())
    }

    fn csv(&mut self, name: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let h = self.header();
        let p = self.path(name)?;
        write_csv(&p, &h, columns, rows)
    }

    /// JSON object with the version and resolved config attached.
    fn json(&mut self, name: &str, mut body: Value) -> Result<()> {
        let config: serde_json::Map<String, Value> = self.cfg.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        if let Value::Object(m) = &mut body {
            m.insert("version".into(), json!(crate::io::VERSION));
            m.insert("command".into(), json!(self.command.name()));
            m.insert("config".into(), Value::Object(config));
        }
        let p = self.path(name)?;
        write_json(&p, &body)
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_f64(x))
    }
}

enum Geometry {
    States,
    Circle,
    Interval,
}

enum Model {
    Markov(RateMatrix),
    Collision {
        b: CollisionKernel,
        pi: ProbabilityVector,
        geometry: Geometry,
        coords: Vec<f64>,
        opinion: Option<Box<OpinionOutcome>>,
    },
}

impl Model {
    fn n_states(&self) -> usize {
        match self {
            Model::Markov(r) => r.n_states(),
            Model::Collision { b, .. } => b.n_states(),
        }
    }

    fn coords(&self) -> Vec<f64> {
        match self {
            Model::Markov(r) => (0..r.n_states()).map(|i| i as f64).collect(),
            Model::Collision { coords, .. } => coords.clone(),
        }
    }

    fn pi(&self) -> Result<ProbabilityVector> {
        match self {
            Model::Markov(r) => stationary_measure(r),
            Model::Collision { pi, .. } => Ok(pi.clone()),
        }
    }
}

fn kuramoto_model(cfg: &mut Config, name: &str) -> Result<KuramotoModel> {
    if name == "kuramoto-a" {
        KuramotoModel::variant_a(cfg.get_or("delta", 0.1)?)
    } else {
        KuramotoModel::variant_b(cfg.get_or("epsilon", 0.5)?)
    }
}

fn opinion_model(cfg: &mut Config) -> Result<OpinionModel> {
    let mut m = OpinionModel::symmetric(cfg.get_or("delta", 0.01)?)?;
    m.power = cfg.get_or("power", 0.65)?;
    m.noise = match cfg.get_or("noise", "variance".to_string())?.as_str() {
        "variance" => NoiseConvention::Variance,
        "stddev" => NoiseConvention::StdDev,
        o => return Err(Error::Parse(format!("noise must be variance or stddev, got {o}"))),
    };
    if let Some(beta) = cfg.get::<f64>("beta")? {
        let mut md = AsymmetricModifier::new(beta)?;
        md.form = match cfg.get_or("modifier", "enhance".to_string())?.as_str() {
            "enhance" => ModifierForm::Enhance { amplitude: cfg.get_or("amplitude", 50.0)? },
            "literal" => ModifierForm::Literal,
            "inverse" => ModifierForm::Inverse { eta: cfg.get_or("eta", 1e-3)? },
            o => return Err(Error::Parse(format!("modifier must be enhance, literal or inverse, got {o}"))),
        };
        md.rule = match cfg.get_or("rule", "min".to_string())?.as_str() {
            "min" => OutgoingRule::Min,
            "max" => OutgoingRule::Max,
            o => return Err(Error::Parse(format!("rule must be min or max, got {o}"))),
        };
        m.modifier = Some(md);
    }
    m.validate()?;
    Ok(m)
}

fn load_model(cfg: &mut Config) -> Result<Model> {
    let name = cfg.get_or("model", "markov".to_string())?;
    match name.as_str() {
        "markov" => {
            let rows = cfg.matrix("rates")?.ok_or_else(|| Error::Parse("model=markov needs rates = r00,r01;r10,r11".into()))?;
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::Parse("rates must be a square matrix".into()));
            }
            Ok(Model::Markov(RateMatrix::new(n, rows.concat())?))
        }
        "kuramoto-a" | "kuramoto-b" => {
            let model = kuramoto_model(cfg, &name)?;
            let grid = CircleGrid::new(cfg.get_or("M", 64)?)?;
            let k = build_kuramoto_collision_kernel(&model, &grid)?;
            Ok(Model::Collision { b: k.kernel, pi: k.pi, geometry: Geometry::Circle, coords: grid.centers(), opinion: None })
        }
        "opinion" => {
            let model = opinion_model(cfg)?;
            let grid = IntervalGrid::new(cfg.get_or("M", 64)?)?;
            let out = run_opinion_model(&model, &grid)?;
            let b = out.collision_kernel(cfg.get_or("c", 1.0)?)?;
            Ok(Model::Collision {
                b,
                pi: out.pi_lambda.pi.clone(),
                geometry: Geometry::Interval,
                coords: grid.centers(),
                opinion: Some(Box::new(out)),
            })
        }
        "kernel-file" => {
            let path: String = cfg.require("kernel")?;
            let (b, _) = read_kernel_csv(Path::new(&path)).map_err(|e| match e {
                Error::Io(io) => Error::Parse(format!("cannot read kernel {path}: {io}")),
                e => e,
            })?;
            let n = b.n_states();
            let pi = match cfg.floats("pi")? {
                Some(w) => ProbabilityVector::from_unnormalized(w)?,
                None => ProbabilityVector::uniform(n),
            };
            if pi.n_states() != n {
                return Err(Error::Dimension { expected: n, got: pi.n_states() });
            }
            Ok(Model::Collision { b, pi, geometry: Geometry::States, coords: (0..n).map(|i| i as f64).collect(), opinion: None })
        }
        o => Err(Error::Parse(format!("unknown model {o}; expected markov, kuramoto-a, kuramoto-b, opinion or kernel-file"))),
    }
}

/// `p0` = uniform | ramp | pi | point:K | concentrated | comma list.
fn initial_law(cfg: &mut Config, model: &Model) -> Result<ProbabilityVector> {
    let n = model.n_states();
    let default = match model {
        Model::Markov(_) => "ramp",
        Model::Collision { geometry: Geometry::States, .. } => "uniform",
        _ => "concentrated",
    };
    let choice = cfg.get_or("p0", default.to_string())?;
    let coords = model.coords();
    match choice.as_str() {
        "uniform" => Ok(ProbabilityVector::uniform(n)),
        "ramp" => ProbabilityVector::from_unnormalized((1..=n).map(|k| k as f64).collect()),
        "pi" => model.pi(),
        "concentrated" => {
            let kappa: f64 = cfg.get_or("kappa", 4.0)?;
            let w: Vec<f64> = match model {
                Model::Collision { geometry: Geometry::Circle, .. } => coords.iter().map(|t| (kappa * (t.cos() - 1.0)).exp()).collect(),
                Model::Collision { geometry: Geometry::Interval, .. } => coords.iter().map(|v| (-kappa * v * v).exp()).collect(),
                _ => return Err(Error::Parse("p0=concentrated needs a grid model".into())),
            };
            ProbabilityVector::from_unnormalized(w)
        }
        s if s.starts_with("point:") => {
            let k: usize = s[6..].parse().map_err(|_| Error::Parse(format!("bad p0 {s}")))?;
            if k >= n {
                return Err(Error::Invalid(format!("p0 point {k} out of range for {n} states")));
            }
            Ok(ProbabilityVector::point_mass(n, k))
        }
        _ => {
            let w = cfg.floats("p0")?.unwrap_or_default();
            if w.len() != n {
                return Err(Error::Dimension { expected: n, got: w.len() });
            }
            ProbabilityVector::from_unnormalized(w)
        }
    }
}

fn evolve(model: &Model, p0: &ProbabilityVector, t_end: f64, n_steps: usize) -> Result<MarkovTrajectory> {
    if n_steps == 0 {
        return Err(Error::Invalid("n_steps must be at least 1".into()));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Invalid(format!("T must be positive, got {t_end}")));
    }
    match model {
        Model::Markov(r) => kolmogorov_evolve(r, p0, t_end, n_steps),
        Model::Collision { b, .. } => boltzmann_evolve(b, p0, t_end, n_steps),
    }
}

fn cmd_stationary(ctx: &mut Ctx) -> Result<()> {
    let model = load_model(&mut ctx.cfg)?;
    let coords = model.coords();
    match &model {
        Model::Markov(r) => {
            let pi = stationary_measure(r)?;
            let res = stationarity_residual(r, &pi)?;
            ctx.csv("pi.csv", &["state", "weight"], pi.weights().iter().enumerate().map(|(i, w)| vec![i as f64, *w]))?;
            ctx.json("summary.json", json!({"n_states": r.n_states(), "stationarity_residual": res, "pi": pi.weights()}))?;
        }
        Model::Collision { b, pi, opinion, .. } => {
            let n = b.n_states();
            let (g, mut summary) = match opinion {
                Some(o) => {
                    let grid_pi = o.pi_lambda.pi.weights();
                    let peaks: Vec<f64> = local_maxima(grid_pi).into_iter().map(|k| coords[k]).collect();
                    let grid = IntervalGrid::new(n)?;
                    (
                        o.equilibrium.g.weights().to_vec(),
                        json!({
                            "g_residual": o.equilibrium.residual,
                            "g_exchange_defect": o.equilibrium.exchange_defect,
                            "pi_peaks": peaks,
                            "lambda_rank_correlation": o.pi_lambda.rank_correlation,
                            "central_mass": central_mass(&o.pi_lambda.pi, &grid, 0.25),
                        }),
                    )
                }
                None => {
                    let g = two_particle_stationary(b)?;
                    (g.weights().to_vec(), json!({}))
                }
            };
            let w = pi.weights();
            let prod_gap = (0..n * n).map(|i| (g[i] - w[i / n] * w[i % n]).abs()).fold(0.0, f64::max);
            let fr = factorization_residual(b, pi)?;
            if let Value::Object(m) = &mut summary {
                m.insert("n_states".into(), json!(n));
                m.insert("equilibrium_residual".into(), json!(boltzmann_equilibrium_residual(b, pi)?));
                m.insert("factorization_residual".into(), json!(fr.max_norm));
                m.insert("factorization_relative".into(), json!(fr.relative));
                m.insert("g_minus_pi_pi".into(), json!(prod_gap));
            }
            ctx.csv("pi.csv", &["state", "coordinate", "weight"], (0..n).map(|i| vec![i as f64, coords[i], w[i]]))?;
            ctx.csv("g.csv", &["v", "w", "value"], (0..n * n).map(|i| vec![coords[i / n], coords[i % n], g[i]]))?;
            if let Some(o) = opinion {
                let l = &o.pi_lambda.lambda;
                ctx.csv("lambda.csv", &["v", "w", "value"], (0..n * n).map(|i| vec![coords[i / n], coords[i % n], l[i]]))?;
            }
            ctx.json("summary.json", summary)?;
        }
    }
    Ok(())
}

fn cmd_evolve(ctx: &mut Ctx) -> Result<()> {
    let model = load_model(&mut ctx.cfg)?;
    let p0 = initial_law(&mut ctx.cfg, &model)?;
    let t_end: f64 = ctx.cfg.get_or("T", 5.0)?;
    let n_steps: usize = ctx.cfg.get_or("n_steps", 100)?;
    let traj = evolve(&model, &p0, t_end, n_steps)?;
    let pi = model.pi()?;
    let n = model.n_states();
    let ent: Vec<f64> = traj.states().iter().map(|s| relative_entropy(s, &pi)).collect::<Result<_>>()?;
    let tol = 1e-12 * (1.0 + ent[0].abs());
    let max_increase = ent.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let monotone = max_increase <= tol;
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend((0..n).map(|i| format!("p{i}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let t = traj.t_grid().to_vec();
    ctx.csv(
        "trajectory.csv",
        &cols,
        t.iter().zip(traj.states()).map(|(t, s)| std::iter::once(*t).chain(s.weights().iter().copied()).collect()),
    )?;
    ctx.csv("entropy.csv", &["t", "entropy"], t.iter().zip(&ent).map(|(t, e)| vec![*t, *e]))?;
    ctx.json(
        "summary.json",
        json!({
            "n_states": n,
            "entropy_0": finite(ent[0]),
            "entropy_T": finite(*ent.last().unwrap()),
            "entropy_monotone": monotone,
            "max_entropy_increase": finite(max_increase),
        }),
    )
}

fn cmd_balance(ctx: &mut Ctx) -> Result<()> {
    let model = load_model(&mut ctx.cfg)?;
    let p0 = initial_law(&mut ctx.cfg, &model)?;
    let t_end: f64 = ctx.cfg.get_or("T", 2.0)?;
    let n_steps: usize = ctx.cfg.get_or("n_steps", 50)?;
    let kind = ctx.cfg.get_or("flux", "typical".to_string())?;
    let eps: f64 = ctx.cfg.get_or("perturb", 0.1)?;
    let traj = evolve(&model, &p0, t_end, n_steps)?;
    let pi = model.pi()?;
    let report = match &model {
        Model::Markov(r) => {
            let flux = match kind.as_str() {
                "typical" => typical_flux(r, &traj)?,
                "reversed" => swap_map(&reversed_flux(r, &pi, &traj)?),
                "perturbed" => typical_flux(r, &traj)?.plus_symmetric(|_, x, y| if x == y { 0.0 } else { eps })?,
                o => return Err(Error::Parse(format!("flux must be typical, reversed or perturbed, got {o}"))),
            };
            entropy_balance_report(r, &pi, &traj, &flux)?
        }
        Model::Collision { b, .. } => {
            let flux = match kind.as_str() {
                "typical" => typical_collision_flux(b, &traj)?,
                "reversed" => swap_collision_flux(&reversed_collision_flux(b, &pi, &traj)?),
                "perturbed" => typical_collision_flux(b, &traj)?.plus_invariant(|_, _, _, _, _| eps)?,
                o => return Err(Error::Parse(format!("flux must be typical, reversed or perturbed, got {o}"))),
            };
            boltzmann_entropy_balance(b, &pi, &traj, &flux)?
        }
    };
    println!("verdict: {}", serde_json::to_value(report.verdict).expect("verdict").as_str().unwrap_or("?"));
    ctx.json("report.json", serde_json::to_value(&report).expect("report serializes"))
}

fn cmd_kernel(ctx: &mut Ctx) -> Result<()> {
    let name = ctx.cfg.get_or("model", "kuramoto-b".to_string())?;
    let mut summary = json!({});
    if name == "kuramoto-a" || name == "kuramoto-b" {
        let km = kuramoto_model(&mut ctx.cfg, &name)?;
        let points: usize = ctx.cfg.get_or("curve_points", 512)?;
        let curve = km.lambda_curve(points)?;
        ctx.csv("curve.csv", &["xi", "lambda"], curve.iter().map(|(x, l)| vec![*x, *l]))?;
        let m: usize = ctx.cfg.get_or("M", 64)?;
        let sizes = match ctx.cfg.floats("refine")? {
            Some(v) => v.into_iter().map(|x| x as usize).collect(),
            None => vec![m],
        };
        let mut rows = Vec::new();
        for &mm in &sizes {
            let grid = CircleGrid::new(mm)?;
            let k = build_kuramoto_collision_kernel(&km, &grid)?;
            let eq = boltzmann_equilibrium_residual(&k.kernel, &k.pi)?;
            rows.push(vec![mm as f64, k.factorization.max_norm, k.factorization.l1, k.factorization.relative, k.symmetry.max_defect(), eq]);
            if mm == m && ctx.cfg.get_or("tensor", false)? {
                let h = ctx.header();
                let p = ctx.path("kernel.csv")?;
                write_kernel_csv(&p, &k.kernel, true, &h)?;
            }
        }
        ctx.csv("refinement.csv", &["M", "factorization_max", "factorization_l1", "factorization_relative", "symmetry_defect", "equilibrium_residual"], rows.clone())?;
        let decreasing = rows.windows(2).all(|w| w[1][1] < w[0][1]);
        summary = json!({
            "model": name,
            "refinement_decreasing": decreasing,
            "factorization_max": rows.iter().map(|r| r[1]).collect::<Vec<_>>(),
        });
        if ctx.cfg.get_or("oracle", true)? {
            let m_xi: usize = ctx.cfg.get_or("oracle_points", 2000)?;
            let h = solve_h_fixed_point(&km, m_xi)?;
            let exact = |x: f64| match km.variant() {
                KuramotoVariant::A { delta } => kuramoto_lambda_a(x, delta),
                KuramotoVariant::B { epsilon } => kuramoto_lambda_b(x, epsilon),
            };
            let mut rows = Vec::with_capacity(h.xi.len());
            let mut sup: f64 = 0.0;
            for (x, hx) in h.xi.iter().zip(&h.h) {
                let e = exact(*x)?;
                sup = sup.max((hx - e).abs());
                rows.push(vec![*x, *hx, e, hx - e]);
            }
            ctx.csv("oracle.csv", &["xi", "h", "closed_form", "difference"], rows)?;
            if let Value::Object(o) = &mut summary {
                o.insert("oracle_sup_error".into(), json!(sup));
                o.insert("oracle_eigenvalue".into(), json!(h.eigenvalue));
                o.insert("oracle_slope_at_pi".into(), json!(h.slope_at_pi()));
            }
        }
    } else {
        let model = load_model(&mut ctx.cfg)?;
        if let Model::Collision { b, pi, coords, opinion, .. } = &model {
            let n = b.n_states();
            let fr = factorization_residual(b, pi)?;
            let sym = check_symmetries(b);
            summary = json!({
                "model": name,
                "n_states": n,
                "factorization_max": fr.max_norm,
                "factorization_relative": fr.relative,
                "symmetry_defect": sym.max_defect(),
                "equilibrium_residual": boltzmann_equilibrium_residual(b, pi)?,
            });
            if let Some(o) = opinion {
                let l = &o.pi_lambda.lambda;
                ctx.csv("lambda.csv", &["v", "w", "value"], (0..n * n).map(|i| vec![coords[i / n], coords[i % n], l[i]]))?;
                let w = pi.weights();
                ctx.csv("pi.csv", &["state", "coordinate", "weight"], (0..n).map(|i| vec![i as f64, coords[i], w[i]]))?;
            }
            if ctx.cfg.get_or("tensor", false)? {
                let h = ctx.header();
                let p = ctx.path("kernel.csv")?;
                write_kernel_csv(&p, b, sym.is_symmetric(1e-12), &h)?;
            }
        } else {
            return Err(Error::Parse("kernel needs a collision model".into()));
        }
    }
    ctx.json("summary.json", summary)
}

fn cmd_kac(ctx: &mut Ctx) -> Result<()> {
    let n_particles: usize = ctx.cfg.get_or("N", 100)?;
    if n_particles < 2 {
        return Err(Error::Invalid(format!("N must be at least 2, got {n_particles}")));
    }
    let model = load_model(&mut ctx.cfg)?;
    let Model::Collision { b, .. } = &model else {
        return Err(Error::Parse("kac needs a collision model".into()));
    };
    let p0 = initial_law(&mut ctx.cfg, &model)?;
    let t_end: f64 = ctx.cfg.get_or("T", 1.0)?;
    let seed: u64 = ctx.cfg.get_or("seed", 0)?;
    let replicas: usize = ctx.cfg.get_or("replicas", 0)?;
    let n = b.n_states();
    let run = simulate_kac(b, n_particles, &p0, t_end, seed)?;
    let coords = model.coords();
    let h = ctx.header();
    let p = ctx.path("events.csv")?;
    write_events_csv(&p, &h, &run.events)?;
    let init = empirical_marginal(&run.initial, n)?;
    let fin = empirical_marginal(&run.final_config, n)?;
    ctx.csv(
        "marginal.csv",
        &["state", "coordinate", "initial", "final"],
        (0..n).map(|i| vec![i as f64, coords[i], init.weights()[i], fin.weights()[i]]),
    )?;
    let mut summary = json!({
        "n_particles": n_particles,
        "n_events": run.events.len(),
        "absorbed": run.absorbed,
    });
    if replicas > 0 {
        let gap = chaos_gap(b, n_particles, &p0, t_end, replicas, seed)?;
        if let Value::Object(o) = &mut summary {
            o.insert("chaos_gap".into(), serde_json::to_value(&gap).expect("gap serializes"));
        }
    }
    ctx.json("summary.json", summary)
}
