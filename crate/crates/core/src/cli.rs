//! Command-line experiment runner: loads a config, dispatches to one of the
//! experiment kinds, writes outputs plus a manifest with content digests, and
//! prints one PASS/FAIL line per built-in assertion.
//!
//! Exit codes: 0 all assertions pass, 1 an assertion or run failed,
//! 2 usage or configuration error.

use crate::bounds::{check_conditions, BoundsInput, BoundsReport};
use crate::config::{field_from_spec, ExperimentConfig};
use crate::detform::{
    detform_step, f_eval, integral_representation_residual, stationary_residuals, DetFormState,
};
use crate::dynamics::{integrate, steady_state_solve, trajectory_samples, FlowConfig};
use crate::error::{Error, Result};
use crate::nudging::{fit_decay_slope, nudge_integrate, w_tilde_bound_check, w_tilde_solve, NudgeConfig};
use crate::slaving::{slaved_high_modes, w_map_solve};
use crate::spectral::{ModeCut, SpectralField};
use crate::trajectory::{ModalTrajectory, SGrid};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "detform", version, about = "Spectral experiments for low-mode determining dynamics of 2D periodic flows")]
struct Cli {
    /// Experiment configuration file (key = value with [sections])
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (reserved; runs are currently sequential)
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the full flow and record diagnostics
    Simulate,
    /// Evaluate the closed-form bounds and admissibility conditions over a (G, N) sweep
    Bounds,
    /// Sweep the raw slaved high-mode equation along prescribed low-mode data
    Slave,
    /// Solve for the gated high-mode map along a low-mode trajectory
    Wmap,
    /// Solve the feedback-nudged bounded-solution map along a low-mode trajectory
    Wtilde,
    /// Advance the trajectory-space dynamics and test the traveling-wave property
    Detform,
    /// Assimilate low-mode observations by feedback nudging
    Nudge,
    /// Check the stationary trajectory-equation residuals
    Stationary,
}

struct Runner {
    cfg: ExperimentConfig,
    out: PathBuf,
    outputs: Vec<(String, String)>,
    passes: Vec<(String, bool)>,
}

impl Runner {
    fn emit(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        self.outputs
            .push((name.to_string(), crate::io::file_digest(&path)?));
        Ok(())
    }

    fn emit_field(&mut self, name: &str, u: &SpectralField) -> Result<()> {
        let path = self.out.join(name);
        crate::io::write_field(&path, u)?;
        self.outputs
            .push((name.to_string(), crate::io::file_digest(&path)?));
        Ok(())
    }

    fn emit_trajectory(&mut self, name: &str, sg: &SGrid, values: &[SpectralField]) -> Result<()> {
        let path = self.out.join(name);
        crate::io::write_trajectory(&path, sg, values)?;
        self.outputs
            .push((name.to_string(), crate::io::file_digest(&path)?));
        Ok(())
    }

    fn check(&mut self, what: &str, ok: bool) {
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, what);
        self.passes.push((what.to_string(), ok));
    }

    fn initial_field(&self, key: &str, flow: &FlowConfig) -> Result<SpectralField> {
        field_from_spec(self.cfg.str(key)?, &flow.grid, self.cfg.seed())
    }

    /// Builds the low-mode input trajectory from `trajectory.source`:
    ///   steady          -- constant P_N of the steady state
    ///   simulate        -- P_N samples of a flow run from simulate.u0 (windowed grids)
    ///   random[:amp]    -- constant seeded random low-mode field
    ///   file:path       -- a stored trajectory, projected to the cut
    fn input_trajectory(&self, flow: &FlowConfig, cut: ModeCut) -> Result<ModalTrajectory> {
        let sg = self.cfg.sgrid()?;
        match self.cfg.str("trajectory.source")? {
            "steady" => {
                let (ustar, _) = steady_state_solve(flow, 1e-11, 200.0)?;
                ModalTrajectory::constant(sg, cut, &ustar.project_low(cut))
            }
            "simulate" => {
                if sg.is_periodic() {
                    return Err(Error::InvalidConfig(
                        "trajectory.source = simulate needs a windowed s-grid".into(),
                    ));
                }
                let every = (sg.ds() / flow.dt).round() as usize;
                if every == 0 || (every as f64 * flow.dt - sg.ds()).abs() > 1e-9 * sg.ds() {
                    return Err(Error::InvalidConfig(format!(
                        "sgrid.ds = {} is not a multiple of flow.dt = {}",
                        sg.ds(),
                        flow.dt
                    )));
                }
                let u0 = self.initial_field("simulate.u0", flow)?;
                let samples = trajectory_samples(&u0, flow, sg.node_count(), every)?;
                let vals: Vec<_> = samples.iter().map(|u| u.project_low(cut)).collect();
                ModalTrajectory::new(sg, cut, vals)
            }
            spec if spec.starts_with("random") => {
                let amp: f64 = match spec.split_once(':') {
                    None => 1.0,
                    Some((_, a)) => a.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad amplitude in '{spec}'"))
                    })?,
                };
                let base =
                    crate::spectral::random_divfree_field(self.cfg.seed(), 1.5, flow.grid, Some(cut));
                let n = base.norm_l2();
                if n == 0.0 {
                    return Err(Error::InvalidConfig("random trajectory vanished".into()));
                }
                ModalTrajectory::constant(sg, cut, &base.scaled(amp / n))
            }
            spec if spec.starts_with("file:") => {
                let (sg2, values) = crate::io::read_trajectory(Path::new(&spec[5..]))?;
                sg.same_as(&sg2)?;
                let vals: Vec<_> = values.iter().map(|u| u.project_low(cut)).collect();
                ModalTrajectory::new(sg, cut, vals)
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown trajectory.source '{other}'"
            ))),
        }
    }

    fn run_simulate(&mut self) -> Result<()> {
        let flow = self.cfg.flow()?;
        let u0 = self.initial_field("simulate.u0", &flow)?;
        let t_final = self.cfg.f64("simulate.t_final")?;
        let every = self.cfg.usize("simulate.record_every")?;
        let (u, report) = integrate(&u0, &flow, t_final, every)?;
        self.emit("timeseries.csv", &report.csv())?;
        self.emit_field("final.dfl", &u)?;
        self.emit("final_coefficients.csv", &crate::io::coefficients_csv(&u))?;
        self.check("simulate: final state finite", u.is_finite());
        self.check(
            "simulate: final state divergence-free",
            u.divergence_residual() <= 1e-10,
        );
        Ok(())
    }

    fn run_bounds(&mut self) -> Result<()> {
        let g_values = self.cfg.f64_list("bounds.g_values")?;
        let n_values = self.cfg.f64_list("bounds.n_values")?;
        let constants = self.cfg.constants()?;
        let mut csv = String::from(BoundsReport::csv_header());
        csv.push('\n');
        let mut rows = 0usize;
        for &g in &g_values {
            for &n in &n_values {
                if !(n >= 1.0 && n.fract() == 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "bounds.n_values entries must be positive integers, got {n}"
                    )));
                }
                let mut inp = BoundsInput::new(g, n as u32);
                inp.ratio_gf = self.cfg.f64("bounds.ratio_gf")?;
                inp.ratio_hf = self.cfg.f64("bounds.ratio_hf")?;
                inp.h_h1 = self.cfg.f64("bounds.h_h1")?;
                inp.u0_h1 = self.cfg.f64("bounds.u0_h1")?;
                inp.gamma = self.cfg.f64("bounds.gamma")?;
                inp.epsilon = self.cfg.f64("bounds.epsilon")?;
                if self.cfg.has("bounds.mu") {
                    inp.mu = Some(self.cfg.f64("bounds.mu")?);
                }
                inp.constants = constants;
                let rep = check_conditions(&inp);
                csv.push_str(&rep.csv_row());
                csv.push('\n');
                rows += 1;
            }
        }
        self.emit("bounds.csv", &csv)?;
        self.check(
            &format!("bounds: {rows} sweep rows evaluated"),
            rows == g_values.len() * n_values.len(),
        );
        Ok(())
    }

    fn run_slave(&mut self) -> Result<()> {
        let flow = self.cfg.flow()?;
        let cut = self.cfg.cut()?;
        let v = self.input_trajectory(&flow, cut)?;
        let q0 = self
            .initial_field("slave.q0", &flow)?
            .project_high(cut);
        let q = slaved_high_modes(&v, &q0, &flow)?;
        self.emit_trajectory("slaved.dft", &q.sgrid, q.values())?;
        self.emit(
            "slaved_norms.csv",
            &nodewise_norms_csv(&q.sgrid, q.values()),
        )?;
        self.check("slave: sweep completed finite", q.values().iter().all(|u| u.is_finite()));
        Ok(())
    }

    fn run_wmap(&mut self) -> Result<()> {
        let flow = self.cfg.flow()?;
        let cut = self.cfg.cut()?;
        let v = self.input_trajectory(&flow, cut)?;
        let tol = self.cfg.f64("wmap.tol")?;
        let enforce = self.cfg.bool("wmap.enforce")?;
        let w = w_map_solve(&v, &flow, tol, enforce)?;
        self.emit_trajectory("wmap.dft", &w.sgrid, w.values())?;
        self.emit("wmap_norms.csv", &nodewise_norms_csv(&w.sgrid, w.values()))?;
        println!(
            "wmap: iterations = {}, sup |w| = {:.6e}, sup ||w|| = {:.6e}",
            w.iterations,
            w.sup_l2(),
            w.sup_h1()
        );
        self.check("wmap: solver converged", w.converged);
        Ok(())
    }

    fn run_wtilde(&mut self) -> Result<()> {
        let flow = self.cfg.flow()?;
        let cut = self.cfg.cut()?;
        let mu = self.cfg.f64("nudge.mu")?;
        let ncfg = NudgeConfig::new(mu, cut, flow.clone())?;
        let v = self.input_trajectory(&flow, cut)?;
        let tol = self.cfg.f64("wmap.tol")?;
        let enforce = self.cfg.bool("wmap.enforce")?;
        let w = w_tilde_solve(&v, &ncfg, tol, enforce)?;
        self.emit_trajectory("wtilde.dft", &w.sgrid, w.values())?;
        self.emit("wtilde_norms.csv", &nodewise_norms_csv(&w.sgrid, w.values()))?;
        let (sup, bound) = w_tilde_bound_check(&v, &w, &ncfg);
        println!("wtilde: sup ||w|| = {sup:.6e}, a-priori bound = {bound:.6e}");
        self.check("wtilde: solver converged", w.converged);
        self.check("wtilde: a-priori norm bound holds", sup <= bound);
        Ok(())
    }

    fn run_detform(&mut self) -> Result<()> {
        let flow = self.cfg.flow()?;
        let cut = self.cfg.cut()?;
        let v0 = self.input_trajectory(&flow, cut)?;
        let tol = self.cfg.f64("detform.tol")?;
        let enforce = self.cfg.bool("wmap.enforce")?;
        let dt_outer = self.cfg.f64("detform.dt_outer")?;
        let steps = self.cfg.usize("detform.steps")?;
        let mut states = vec![DetFormState::new(0.0, v0)];
        for _ in 0..steps {
            let next = detform_step(states.last().unwrap(), dt_outer, &flow, tol, enforce)?;
            states.push(next);
        }
        let mut csv = String::from("t,sup_l2,sup_h1,rhs_sup_l2\n");
        for st in &states {
            let rhs = f_eval(&st.v, &flow, tol, enforce)?;
            csv.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                st.t,
                st.v.norm_y(),
                st.v.norm_x(),
                rhs.norm_y()
            ));
        }
        self.emit("detform.csv", &csv)?;
        let residual = crate::detform::traveling_wave_residual(&states)?;
        let residual_tol = self.cfg.f64("detform.residual_tol")?;
        println!("detform: traveling-wave residual = {residual:.6e}");
        self.check(
            &format!("detform: traveling-wave residual <= {residual_tol:.1e}"),
            residual <= residual_tol,
        );
        if self.cfg.has("detform.horizon") {
            let horizon = self.cfg.f64("detform.horizon")?;
            let (res, horizon_ok) = integral_representation_residual(
                &states[0].v,
                &flow,
                horizon,
                tol,
                enforce,
            )?;
            println!("detform: memory-integral residual = {res:.6e} (horizon adequate: {horizon_ok})");
            self.check(
                "detform: memory-integral representation matches the sweep",
                res <= residual_tol && horizon_ok,
            );
        }
        Ok(())
    }

    fn run_nudge(&mut self) -> Result<()> {
        let flow = self.cfg.flow()?;
        let cut = self.cfg.cut()?;
        let mu = self.cfg.f64("nudge.mu")?;
        let ncfg = NudgeConfig::new(mu, cut, flow.clone())?;
        let every = self.cfg.usize("nudge.observe_every")?;
        if every == 0 {
            return Err(Error::InvalidConfig("nudge.observe_every must be >= 1".into()));
        }
        let span = self.cfg.f64("simulate.t_final")?;
        let ds = flow.dt * every as f64;
        let n_samples = (span / ds).round() as usize + 1;
        let sg = SGrid::windowed(0.0, ds * (n_samples - 1) as f64, ds, 0.0)?;
        let u0 = self.initial_field("simulate.u0", &flow)?;
        let refs = trajectory_samples(&u0, &flow, n_samples, every)?;
        let obs: Vec<_> = refs.iter().map(|u| u.project_low(cut)).collect();
        let v = ModalTrajectory::new(sg, cut, obs)?;
        let w0 = self.initial_field("nudge.w0", &flow)?;
        let (w_final, series) = nudge_integrate(&v, &w0, &ncfg, Some(&refs))?;
        self.emit("delta.csv", &series.csv())?;
        self.emit_field("assimilated.dfl", &w_final)?;
        match fit_decay_slope(&series) {
            Some(slope) => {
                println!(
                    "nudge: fitted decay exponent = {slope:.6e} (margin alpha = {:.3})",
                    ncfg.alpha
                );
                if ncfg.alpha_ok {
                    self.check("nudge: synchronization error decays", slope < 0.0);
                }
            }
            None => println!("nudge: decay window empty (already synchronized or not decaying)"),
        }
        let tail = *series.l2.last().unwrap();
        println!("nudge: final |delta| = {tail:.6e}");
        self.check(
            "nudge: assimilated state finite",
            w_final.is_finite(),
        );
        Ok(())
    }

    fn run_stationary(&mut self) -> Result<()> {
        let flow = self.cfg.flow()?;
        let cut = self.cfg.cut()?;
        let v = self.input_trajectory(&flow, cut)?;
        let tol = self.cfg.f64("detform.tol")?;
        let enforce = self.cfg.bool("wmap.enforce")?;
        let rep = stationary_residuals(&v, &flow, tol, enforce)?;
        let mut csv = String::from("quantity,value\n");
        csv.push_str(&format!("algebraic_residual,{:.16e}\n", rep.algebraic_residual));
        csv.push_str(&format!("ode_residual,{:.16e}\n", rep.ode_residual));
        csv.push_str(&format!("energy_residual,{:.16e}\n", rep.energy_residual));
        csv.push_str(&format!("enstrophy_residual,{:.16e}\n", rep.enstrophy_residual));
        self.emit("stationary.csv", &csv)?;
        let stol = self.cfg.f64("stationary.tol")?;
        println!(
            "stationary: algebraic = {:.6e}, ode = {:.6e}, energy = {:.6e}, enstrophy = {:.6e}",
            rep.algebraic_residual, rep.ode_residual, rep.energy_residual, rep.enstrophy_residual
        );
        self.check(
            &format!("stationary: algebraic residual <= {stol:.1e}"),
            rep.algebraic_residual <= stol,
        );
        Ok(())
    }
}

fn nodewise_norms_csv(sg: &SGrid, values: &[SpectralField]) -> String {
    let mut out = String::from("s,l2,h1,h2\n");
    for (i, u) in values.iter().enumerate() {
        let (l2, h1, h2) = u.norms();
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            sg.s_value(i),
            l2,
            h1,
            h2
        ));
    }
    out
}

fn manifest_json(
    cfg: &ExperimentConfig,
    outputs: &[(String, String)],
    wall_clock: f64,
) -> serde_json::Value {
    serde_json::json!({
        "experiment": cfg.entries().get("experiment.name"),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_clock_seconds": wall_clock,
        "config": cfg.entries(),
        "defaulted_keys": cfg.defaulted,
        "outputs": outputs.iter().map(|(name, digest)| {
            serde_json::json!({"file": name, "sha256": digest})
        }).collect::<Vec<_>>(),
    })
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(all_pass) => {
            if all_pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::Io(_) | Error::Format(_) => 2,
                _ => 1,
            }
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    let config_path = cli
        .config
        .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let text = std::fs::read_to_string(&config_path)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg = ExperimentConfig::parse(&override_seed(&text, seed))?;
    }
    if cli.threads == 0 {
        return Err(Error::InvalidConfig("--threads must be >= 1".into()));
    }
    std::fs::create_dir_all(&cli.out)?;
    let mut runner = Runner {
        cfg,
        out: cli.out.clone(),
        outputs: Vec::new(),
        passes: Vec::new(),
    };
    match cli.cmd {
        Cmd::Simulate => runner.run_simulate()?,
        Cmd::Bounds => runner.run_bounds()?,
        Cmd::Slave => runner.run_slave()?,
        Cmd::Wmap => runner.run_wmap()?,
        Cmd::Wtilde => runner.run_wtilde()?,
        Cmd::Detform => runner.run_detform()?,
        Cmd::Nudge => runner.run_nudge()?,
        Cmd::Stationary => runner.run_stationary()?,
    }
    let manifest = manifest_json(
        &runner.cfg,
        &runner.outputs,
        started.elapsed().as_secs_f64(),
    );
    let rendered = serde_json::to_string_pretty(&manifest).expect("manifest is plain JSON");
    std::fs::write(cli.out.join("manifest.json"), rendered + "\n")?;
    Ok(runner.passes.iter().all(|(_, ok)| *ok))
}

/// Rewrites the top-level seed line (or appends one) for --seed overrides.
fn override_seed(text: &str, seed: u64) -> String {
    let mut out = String::new();
    let mut replaced = false;
    let mut in_section = false;
    for line in text.lines() {
        let trimmed = line.split('#').next().unwrap_or("").trim();
        if trimmed.starts_with('[') {
            in_section = true;
        }
        if !in_section && !replaced {
            if let Some((k, _)) = trimmed.split_once('=') {
                if k.trim() == "seed" {
                    out.push_str(&format!("seed = {seed}\n"));
                    replaced = true;
                    continue;
                }
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    if !replaced {
        out = format!("seed = {seed}\n{out}");
    }
    out
}
