//! Command-line experiment runner.
//!
//! Every subcommand reads one JSON config, writes CSV tables and a JSON
//! summary into the output directory, and maps failures onto exit codes:
//! `2` for invalid configs or failed validation, `3` for numerical
//! non-convergence, `1` for I/O problems.

use std::ffi::OsString;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::action::{energy_profile, quasi_potential, well_depth};
use crate::chain::{
    compare_resonance, first_transition_density, mu_grid, window_measure, ChainSpec, ChainWindowSource,
    NODES_PER_PERIOD,
};
use crate::config::{config_error, ExperimentConfig, Format, ProfileSource};
use crate::error::{Error, Result};
use crate::landscape::{
    check_inward_drift, classify_attraction, gradient_consistency, periodicity_defect, Basin, Classification,
    DriftField,
};
use crate::profile::{read_profiles_csv, write_profiles_csv, EnergyProfile};
use crate::resonance::{
    find_resonance_point, fit_rate, predicted_rate, resonance_interval, DiffusionWindowSource,
};
use crate::rng::StreamDomain;
use crate::sde::{check_step_size, simulate_batch, SimConfig, StopReason, Target};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "resonance-lab", version, about = "Stochastic resonance experiments for slowly forced double wells")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Master seed (overrides `sim.master_seed`).
    #[arg(long, global = true, env = "RESONANCE_LAB_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Energy profiles e_-(s), e_+(s) by action minimization.
    Energy,
    /// A single quasi-potential query.
    Qp,
    /// Raw path outcomes from both equilibria.
    Simulate,
    /// Monte Carlo window probabilities.
    Window,
    /// Rate fits over the noise ladder.
    Rate,
    /// Resonance points per window half-width and their extrapolation.
    Resonance,
    /// Two-state chain densities, window measures and rate fits.
    Chain,
    /// Predicted, chain and diffusion resonance points side by side.
    Compare,
    /// Assumption checks and the gradient-case energy oracle.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::Qp => "qp",
            Command::Simulate => "simulate",
            Command::Window => "window",
            Command::Rate => "rate",
            Command::Resonance => "resonance",
            Command::Chain => "chain",
            Command::Compare => "compare",
            Command::Validate => "validate",
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::NonFinite { .. } | Error::Divergence { .. } | Error::InsufficientPoints { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_INVALID,
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| config_error("--config", "a config file is required"))?;
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    let ctx = Ctx {
        command: cli.command,
        seed: cli
            .seed
            .or_else(|| cfg.sim.as_ref().map(|s| s.master_seed))
            .unwrap_or(0),
        out: cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone()),
        hash: format!("{:x}", Sha256::digest(&bytes)),
        cfg,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(config_error("--workers", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| config_error("--workers", e.to_string()))?;
    pool.install(|| ctx.dispatch())
}

struct Ctx {
    command: Command,
    cfg: ExperimentConfig,
    seed: u64,
    out: PathBuf,
    hash: String,
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

impl Ctx {
    fn dispatch(&self) -> Result<i32> {
        match self.command {
            Command::Energy => self.energy(),
            Command::Qp => self.qp(),
            Command::Simulate => self.simulate(),
            Command::Window => self.window(),
            Command::Rate => self.rate(),
            Command::Resonance => self.resonance(),
            Command::Chain => self.chain(),
            Command::Compare => self.compare(),
            Command::Validate => self.validate(),
        }
    }

    fn meta(&self) -> Value {
        json!({
            "tool": "resonance-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command.name(),
            "config_sha256": self.hash,
            "seed": self.seed,
        })
    }

    fn meta_line(&self) -> String {
        format!(
            "tool=resonance-lab version={} command={} config_sha256={} seed={}",
            env!("CARGO_PKG_VERSION"),
            self.command.name(),
            self.hash,
            self.seed
        )
    }

    fn wants(&self, f: Format) -> bool {
        self.cfg.output.formats.contains(&f)
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn write_csv(&self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<()> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let mut text = format!("# {}\n{header}\n", self.meta_line());
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    fn write_json(&self, name: &str, body: impl Serialize) -> Result<()> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut value = serde_json::to_value(body)?;
        if let Value::Object(map) = &mut value {
            map.insert("meta".into(), self.meta());
        }
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn source(&self) -> ProfileSource {
        self.cfg
            .profiles
            .as_ref()
            .map(|p| p.source)
            .unwrap_or(ProfileSource::Action)
    }

    fn profiles(&self) -> Result<(EnergyProfile, EnergyProfile)> {
        match self.source() {
            ProfileSource::Csv => {
                let path = self
                    .cfg
                    .profiles
                    .as_ref()
                    .and_then(|p| p.path.clone())
                    .ok_or_else(|| config_error("profiles.path", "required when profiles.source is csv"))?;
                read_profiles_csv(BufReader::new(fs::File::open(path)?))
            }
            ProfileSource::WellDepth => {
                let field = self.cfg.build_field()?;
                let m = self.cfg.action.grid_size;
                let depth = |basin| {
                    let values = (0..m)
                        .map(|j| well_depth(&field, j as f64 / m as f64, basin).map(|d| 2.0 * d))
                        .collect::<Result<Vec<_>>>()?;
                    EnergyProfile::from_values(basin, values)
                };
                Ok((depth(Basin::Minus)?, depth(Basin::Plus)?))
            }
            ProfileSource::Action => {
                let field = self.cfg.build_field()?;
                self.cfg.validate_action()?;
                self.action_profiles(&field)
            }
        }
    }

    fn action_profiles(&self, field: &DriftField) -> Result<(EnergyProfile, EnergyProfile)> {
        let opts = self.cfg.action.options();
        let m = self.cfg.action.grid_size;
        let minus = energy_profile(field, Basin::Minus, m, &opts)?;
        let plus = energy_profile(field, Basin::Plus, m, &opts)?;
        if !(minus.all_ok() && plus.all_ok()) {
            eprintln!("warning: some profile entries did not converge");
        }
        Ok((minus, plus))
    }

    fn sim_config(&self, epsilon: f64, mu: f64) -> Result<SimConfig> {
        let sim = self.cfg.sim()?;
        sim.check_common()?;
        let cfg = SimConfig {
            epsilon,
            mu,
            dt: sim.dt,
            horizon: sim.horizon_multiplier * (mu / epsilon).exp(),
            abort_radius: sim.abort_radius,
            master_seed: self.seed,
            path_count: sim.path_count()?,
        };
        Ok(cfg)
    }

    fn energy(&self) -> Result<i32> {
        let field = self.cfg.build_field()?;
        self.cfg.validate_action()?;
        let (minus, plus) = self.action_profiles(&field)?;
        if self.wants(Format::Csv) {
            let mut buf = Vec::new();
            write_profiles_csv(&minus, &plus, &[self.meta_line()], &mut buf)?;
            self.write("profiles.csv", &buf)?;
        }
        let oracle = if field.is_gradient() {
            Some(depth_check(&field, &minus, &plus)?)
        } else {
            None
        };
        self.write_json(
            "energy.json",
            json!({ "e_minus": minus, "e_plus": plus, "twice_well_depth": oracle }),
        )?;
        Ok(if minus.all_ok() && plus.all_ok() { EXIT_OK } else { EXIT_NOT_CONVERGED })
    }

    fn qp(&self) -> Result<i32> {
        let field = self.cfg.build_field()?;
        self.cfg.validate_action()?;
        let q = self
            .cfg
            .qp
            .as_ref()
            .ok_or_else(|| config_error("qp", "block is required"))?;
        if q.x.len() != field.dim() {
            return Err(config_error("qp.x", format!("expected {} coordinates", field.dim())));
        }
        if q.y.len() != field.dim() {
            return Err(config_error("qp.y", format!("expected {} coordinates", field.dim())));
        }
        let res = quasi_potential(&field, q.phase, &q.x, &q.y, &self.cfg.action.options())?;
        println!("V = {}", res.value);
        self.write_csv(
            "qp.csv",
            "phase,value,horizon,converged,ladder_converged",
            &[vec![
                num(q.phase),
                num(res.value),
                num(res.horizon),
                res.converged.to_string(),
                res.ladder_converged.to_string(),
            ]],
        )?;
        self.write_json("qp.json", json!({ "phase": q.phase, "x": q.x, "y": q.y, "result": res }))?;
        Ok(if res.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
    }

    fn simulate(&self) -> Result<i32> {
        let field = self.cfg.build_field()?;
        let sim = self.cfg.sim()?;
        let cfg = self.sim_config(sim.epsilon()?, sim.mus()?[0])?;
        check_step_size(&field, cfg.dt)?;
        let rho = sim.rho()?;
        let geom = field.geometry().expect("benchmark geometry");
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for basin in Basin::BOTH {
            let target = Target {
                center: geom.equilibrium(basin.opposite()).to_vec(),
                radius: rho,
            };
            let domain = match basin {
                Basin::Minus => StreamDomain::Diffusion,
                Basin::Plus => StreamDomain::DiffusionPlus,
            };
            let outcomes = simulate_batch(&field, &cfg, geom.equilibrium(basin), 0.0, Some(&target), domain)?;
            let count = |r| outcomes.iter().filter(|o| o.stop_reason == r).count();
            summary.push(json!({
                "basin": basin,
                "hit_target": count(StopReason::HitTarget),
                "escaped_r": count(StopReason::EscapedR),
                "horizon": count(StopReason::Horizon),
            }));
            for (k, o) in outcomes.iter().enumerate() {
                let mut row = vec![
                    basin.symbol().to_string(),
                    k.to_string(),
                    serde_json::to_value(o.stop_reason)?.as_str().unwrap_or_default().to_string(),
                    num(o.stop_time),
                    num(o.phase_at_stop),
                ];
                row.extend(o.final_point.iter().map(|v| num(*v)));
                rows.push(row);
            }
        }
        let coords: Vec<String> = (1..=field.dim()).map(|i| format!("x{i}")).collect();
        let header = format!("basin,path,stop_reason,stop_time,phase_at_stop,{}", coords.join(","));
        self.write_csv("paths.csv", &header, &rows)?;
        self.write_json(
            "simulate.json",
            json!({ "epsilon": cfg.epsilon, "mu": cfg.mu, "rho": rho, "time_scale": cfg.time_scale(), "basins": summary }),
        )?;
        Ok(EXIT_OK)
    }

    fn window(&self) -> Result<i32> {
        let field = self.cfg.build_field()?;
        let sim = self.cfg.sim()?;
        let (epsilons, mus, hs, rho) = (sim.epsilons()?, sim.mus()?, sim.hs()?, sim.rho()?);
        sim.path_count()?;
        check_step_size(&field, sim.dt)?;
        let (minus, plus) = self.profiles()?;
        let mut rows = Vec::new();
        let mut estimates = Vec::new();
        for &eps in &epsilons {
            for &mu in &mus {
                for &h in &hs {
                    let cfg = self.sim_config(eps, mu)?;
                    let est = crate::resonance::estimate_window_probability(&field, &cfg, &minus, &plus, h, rho)?;
                    for b in &est.basins {
                        rows.push(vec![
                            num(eps),
                            num(mu),
                            num(h),
                            b.spec.basin.symbol().to_string(),
                            b.hits.to_string(),
                            b.trials.to_string(),
                            num(b.m_hat),
                            num(b.std_error),
                        ]);
                    }
                    estimates.push(est);
                }
            }
        }
        self.write_csv("window.csv", "epsilon,mu,h,basin,hits,trials,M_hat,stderr", &rows)?;
        self.write_json(
            "window.json",
            json!({ "escaped_paths_count_as_misses": true, "estimates": estimates }),
        )?;
        Ok(EXIT_OK)
    }

    fn rate(&self) -> Result<i32> {
        let field = self.cfg.build_field()?;
        let sim = self.cfg.sim()?;
        let (ladder, mus, hs, rho) = (sim.epsilon_ladder()?, sim.mus()?, sim.hs()?, sim.rho()?);
        check_step_size(&field, sim.dt)?;
        let (minus, plus) = self.profiles()?;
        let mut rows = Vec::new();
        let mut fits = Vec::new();
        for &mu in &mus {
            for &h in &hs {
                let source = DiffusionWindowSource {
                    field: &field,
                    config: self.sim_config(ladder[0], mu)?,
                    p_minus: &minus,
                    p_plus: &plus,
                    h,
                    rho,
                    horizon_from_window: false,
                };
                let predicted = predicted_rate(&minus, &plus, mu, h)?;
                let fit = fit_rate(&RescaledHorizon(&source, sim.horizon_multiplier), &ladder, predicted)?;
                rows.push(vec![
                    num(mu),
                    num(h),
                    num(fit.slope),
                    num(fit.intercept),
                    num(fit.residual),
                    num(fit.predicted),
                    num(fit.relative_error),
                ]);
                fits.push(json!({ "mu": mu, "h": h, "fit": fit }));
            }
        }
        self.write_csv(
            "rate.csv",
            "mu,h,slope,intercept,residual,predicted,relative_error",
            &rows,
        )?;
        self.write_json("rate.json", json!({ "fits": fits }))?;
        Ok(EXIT_OK)
    }

    fn resonance(&self) -> Result<i32> {
        let hs = match &self.cfg.sim {
            Some(sim) => sim.h_ladder()?,
            None => vec![0.2, 0.15, 0.1, 0.05],
        };
        let (minus, plus) = self.profiles()?;
        let report = find_resonance_point(&minus, &plus, &hs)?;
        let rows: Vec<Vec<String>> = report
            .points
            .iter()
            .map(|p| vec![num(p.h), num(p.mu), num(p.objective), p.boundary.to_string()])
            .collect();
        self.write_csv("resonance.csv", "h,mu_r,objective,boundary", &rows)?;
        println!(
            "extrapolated mu_R = {}{}",
            report.extrapolated,
            if report.extrapolated_boundary { " (BOUNDARY)" } else { "" }
        );
        self.write_json("resonance.json", &report)?;
        Ok(EXIT_OK)
    }

    fn chain_spec(&self, minus: &EnergyProfile, plus: &EnergyProfile, eps: f64, mu: f64) -> Result<ChainSpec> {
        ChainSpec::new(minus.clone(), plus.clone(), self.cfg.phase_lag()?, eps, mu)
    }

    fn chain(&self) -> Result<i32> {
        let sim = self.cfg.sim()?;
        let (epsilons, mus, h) = (sim.epsilons()?, sim.mus()?, sim.h()?);
        let (minus, plus) = self.profiles()?;
        let mut rows = Vec::new();
        let mut density_rows = Vec::new();
        let mut windows = Vec::new();
        for &eps in &epsilons {
            for &mu in &mus {
                let spec = self.chain_spec(&minus, &plus, eps, mu)?;
                let w = window_measure(&spec, h)?;
                for s in &w.states {
                    rows.push(vec![
                        num(eps),
                        num(mu),
                        num(h),
                        s.state.symbol().to_string(),
                        num(s.window.0),
                        num(s.window.1),
                        num(s.mass),
                    ]);
                    let d = first_transition_density(&spec, s.state, NODES_PER_PERIOD)?;
                    let cumulative = d.cumulative();
                    let stride = (d.density.len() / 1000).max(1);
                    for k in (0..d.density.len()).step_by(stride) {
                        density_rows.push(vec![
                            num(eps),
                            num(mu),
                            s.state.symbol().to_string(),
                            num(k as f64 * d.step),
                            num(d.density[k]),
                            num(cumulative[k]),
                        ]);
                    }
                }
                windows.push(json!({ "epsilon": eps, "mu": mu, "h": h, "window": w }));
            }
        }
        let mut fits = Vec::new();
        if let Some(Ok(ladder)) = sim.epsilon_ladder.as_ref().map(|_| sim.epsilon_ladder()) {
            for &mu in &mus {
                let spec = self.chain_spec(&minus, &plus, ladder[0], mu)?;
                let predicted = predicted_rate(&minus, &plus, mu, h)?;
                let fit = fit_rate(&ChainWindowSource { spec: &spec, h }, &ladder, predicted)?;
                fits.push(json!({ "mu": mu, "h": h, "fit": fit }));
            }
        }
        self.write_csv("chain.csv", "epsilon,mu,h,state,window_lo,window_hi,mass", &rows)?;
        self.write_csv("chain_density.csv", "epsilon,mu,state,t,p,cumulative", &density_rows)?;
        self.write_json("chain.json", json!({ "windows": windows, "rate_fits": fits }))?;
        Ok(EXIT_OK)
    }

    fn compare(&self) -> Result<i32> {
        let sim = self.cfg.sim()?;
        let (ladder, h) = (sim.epsilon_ladder()?, sim.h()?);
        let (minus, plus) = self.profiles()?;
        let mus = match &sim.mu_grid {
            Some(g) => sim.mus().map(|_| g.clone())?,
            None => {
                let (lo, hi) = resonance_interval(&minus, &plus)?.bounds()?;
                mu_grid(lo, hi, sim.mu_points)
            }
        };
        let spec = self.chain_spec(&minus, &plus, ladder[0], mus[0])?;
        let diffusion = if sim.compare_diffusion {
            let field = self.cfg.build_field()?;
            check_step_size(&field, sim.dt)?;
            let rho = sim.rho()?;
            let mut rates = Vec::with_capacity(mus.len());
            for &mu in &mus {
                let source = DiffusionWindowSource {
                    field: &field,
                    config: self.sim_config(ladder[0], mu)?,
                    p_minus: &minus,
                    p_plus: &plus,
                    h,
                    rho,
                    horizon_from_window: true,
                };
                rates.push(fit_rate(&source, &ladder, predicted_rate(&minus, &plus, mu, h)?)?.slope);
            }
            Some(rates)
        } else {
            None
        };
        let report = compare_resonance(&spec, &mus, h, &ladder, diffusion.as_deref())?;
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    num(r.mu),
                    num(r.predicted),
                    num(r.chain),
                    r.diffusion.map(num).unwrap_or_default(),
                ]
            })
            .collect();
        self.write_csv("compare.csv", "mu,predicted,chain,diffusion", &rows)?;
        println!("{}", if report.pass { "PASS" } else { "FAIL" });
        self.write_json("compare.json", &report)?;
        Ok(EXIT_OK)
    }

    fn validate(&self) -> Result<i32> {
        let field = self.cfg.build_field()?;
        let geom = field.geometry().expect("benchmark geometry").clone();
        let mut checks: Vec<Check> = Vec::new();

        let inward = check_inward_drift(&field);
        checks.push(Check::new("inward_drift_margin", inward.worst_margin, 0.0, inward.worst_margin < 0.0));
        let per = periodicity_defect(&field, field.inward().r0);
        checks.push(Check::new("periodicity_defect", per, 0.0, per == 0.0));
        let mut stationary: f64 = 0.0;
        for k in 0..64 {
            let s = k as f64 / 64.0;
            for basin in Basin::BOTH {
                let b = field.drift_vec(s, geom.equilibrium(basin));
                stationary = stationary.max(b.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
            }
        }
        checks.push(Check::new("equilibria_stationary", stationary, 1e-12, stationary <= 1e-12));
        let mut classified = true;
        let origin = vec![0.0; field.dim()];
        for s in [0.0, 0.25, 0.5, 0.75] {
            for basin in Basin::BOTH {
                classified &= classify_attraction(&field, s, geom.equilibrium(basin))? == Classification::Basin(basin);
            }
            classified &= classify_attraction(&field, s, &origin)? == Classification::Unresolved;
        }
        checks.push(Check::new("classification", classified as u8 as f64, 1.0, classified));
        if field.is_gradient() {
            let g = gradient_consistency(&field, 2.0, 1e-5)?;
            checks.push(Check::new("gradient_consistency", g, 1e-8, g <= 1e-8));
        }

        let (minus, plus) = match self.source() {
            ProfileSource::Action => {
                self.cfg.validate_action()?;
                self.action_profiles(&field)?
            }
            _ => self.profiles()?,
        };
        let flags_ok = minus.all_ok() && plus.all_ok();
        checks.push(Check::new("profiles_converged", flags_ok as u8 as f64, 1.0, flags_ok));
        for p in [&minus, &plus] {
            let ok = p.validate_monotone_extremes(1e-12).is_ok();
            checks.push(Check::new(
                if p.basin() == Basin::Minus { "monotone_extremes_minus" } else { "monotone_extremes_plus" },
                ok as u8 as f64,
                1.0,
                ok,
            ));
        }
        let mut oracle = None;
        if field.is_gradient() {
            let l = depth_check(&field, &minus, &plus)?;
            checks.push(Check::new("energy_equals_twice_depth", l.max_relative_error, 0.03, l.max_relative_error <= 0.03));
            oracle = Some(l);
        }

        let pass = checks.iter().all(|c| c.pass);
        for c in &checks {
            println!("{} {} = {} (tolerance {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
        }
        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| vec![c.name.to_string(), c.pass.to_string(), num(c.value), num(c.tolerance)])
            .collect();
        self.write_csv("validate.csv", "check,pass,value,tolerance", &rows)?;
        self.write_json("validate.json", json!({ "pass": pass, "checks": checks, "twice_well_depth": oracle }))?;
        Ok(if pass { EXIT_OK } else { EXIT_INVALID })
    }
}

/// Fits with `horizon = multiplier * T` recomputed for every noise level.
struct RescaledHorizon<'a>(&'a DiffusionWindowSource<'a>, f64);

impl crate::resonance::WindowProbabilitySource for RescaledHorizon<'_> {
    fn window_probability(&self, epsilon: f64) -> Result<crate::resonance::WindowPoint> {
        let src = self.0;
        let config = SimConfig {
            horizon: self.1 * (src.config.mu / epsilon).exp(),
            ..src.config
        };
        let inner = DiffusionWindowSource { config, ..*src };
        inner.window_probability(epsilon)
    }
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64, pass: bool) -> Self {
        Check {
            name,
            value,
            tolerance,
            pass,
        }
    }
}

/// Profile values against twice the well depth, per grid phase.
#[derive(Debug, Serialize)]
pub struct DepthCheck {
    pub phases: Vec<f64>,
    pub twice_depth_minus: Vec<f64>,
    pub twice_depth_plus: Vec<f64>,
    pub max_relative_error: f64,
}

pub fn depth_check(field: &DriftField, minus: &EnergyProfile, plus: &EnergyProfile) -> Result<DepthCheck> {
    let m = minus.len();
    let phases: Vec<f64> = (0..m).map(|j| minus.phase(j)).collect();
    let twice = |basin| {
        phases
            .iter()
            .map(|&s| well_depth(field, s, basin).map(|d| 2.0 * d))
            .collect::<Result<Vec<_>>>()
    };
    let (dm, dp) = (twice(Basin::Minus)?, twice(Basin::Plus)?);
    let mut worst: f64 = 0.0;
    for j in 0..m {
        worst = worst.max((minus.values()[j] - dm[j]).abs() / dm[j]);
        worst = worst.max((plus.values()[j] - dp[j]).abs() / dp[j]);
    }
    if !worst.is_finite() {
        return Err(Error::AssumptionViolated("non-finite well depth".into()));
    }
    Ok(DepthCheck {
        phases,
        twice_depth_minus: dm,
        twice_depth_plus: dp,
        max_relative_error: worst,
    })
}
