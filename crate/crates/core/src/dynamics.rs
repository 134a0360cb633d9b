//! Time integration of the momentum equation du/dt + nu A u + B(u,u) = f
//! with energy/enstrophy balance diagnostics, absorption estimates and the
//! Grashof number.

use crate::bounds::Constants;
use crate::error::{Error, Result};
use crate::spectral::field::wavenumber;
use crate::spectral::{bilinear_self, GridSpec, SpectralField};

/// Time-stepping scheme for the stiff linear part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Two-stage exponential integrating factor: exact on the linear part,
    /// second order overall, exact for constant nonlinear terms (so steady
    /// states and pure linear decay are reproduced to rounding).
    ExponentialIf,
    /// Crank-Nicolson on the linear part, explicit nonlinear term.
    ImplicitExplicit,
}

/// Budget for dt * nu * (kappa0 kmax)^2 accepted by the implicit-explicit
/// scheme; beyond this the trapezoidal linear factor is accurate to nothing.
const IMEX_STIFFNESS_BUDGET: f64 = 100.0;

/// Viscosity, forcing, grid and stepping parameters for one flow.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub nu: f64,
    pub grid: GridSpec,
    pub force: SpectralField,
    pub dt: f64,
    pub integrator: Integrator,
    pub constants: Constants,
}

impl FlowConfig {
    pub fn new(
        nu: f64,
        grid: GridSpec,
        force: SpectralField,
        dt: f64,
        integrator: Integrator,
    ) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidConfig(format!("nu must be positive, got {nu}")));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        if force.grid() != &grid {
            return Err(Error::GridMismatch("force grid differs from config grid".into()));
        }
        force.validate()?;
        if !(force.norm_l2() > 0.0) {
            return Err(Error::InvalidConfig("force must be nonzero".into()));
        }
        if integrator == Integrator::ImplicitExplicit {
            let kmax = grid.dealias_max() as f64;
            let z = dt * nu * (grid.kappa0() * kmax).powi(2) * 2.0;
            if z > IMEX_STIFFNESS_BUDGET {
                return Err(Error::InvalidConfig(format!(
                    "implicit-explicit stiffness dt*nu*(kappa0*kmax)^2 = {z:.3e} \
                     exceeds budget {IMEX_STIFFNESS_BUDGET}"
                )));
            }
        }
        Ok(Self {
            nu,
            grid,
            force,
            dt,
            integrator,
            constants: Constants::default(),
        })
    }

    /// G = |f| / (nu^2 kappa0^2).
    pub fn grashof(&self) -> f64 {
        let k0 = self.grid.kappa0();
        self.force.norm_l2() / (self.nu * self.nu * k0 * k0)
    }
}

/// G = |f| / (nu^2 kappa0^2) (free-function form).
pub fn grashof(cfg: &FlowConfig) -> f64 {
    cfg.grashof()
}

/// phi1(z) = (e^z - 1)/z, phi2(z) = (e^z - 1 - z)/z^2, with series fallback
/// near z = 0.
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        z.exp_m1() / z
    }
}

fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

fn apply_multipliers(field: &mut SpectralField, mult: &[f64]) {
    for (idx, m) in mult.iter().enumerate() {
        field.ux[idx] *= *m;
        field.uy[idx] *= *m;
    }
}

/// Exponential two-stage stepper with arbitrary per-mode linear decay rates
/// (used by the flow solver, the high-mode slaving solver and the nudged
/// solver, which differ only in rates and nonlinear term).
#[derive(Debug, Clone)]
pub(crate) struct EtdStepper {
    exp_z: Vec<f64>,
    h_phi1: Vec<f64>,
    h_phi2: Vec<f64>,
}

impl EtdStepper {
    /// `rate(k1, k2)` is the linear decay coefficient lambda_k >= 0.
    pub fn new(grid: &GridSpec, dt: f64, mut rate: impl FnMut(i64, i64) -> f64) -> Self {
        let n = grid.resolution();
        let mut exp_z = Vec::with_capacity(n * n);
        let mut h_phi1 = Vec::with_capacity(n * n);
        let mut h_phi2 = Vec::with_capacity(n * n);
        for i in 0..n {
            let k1 = wavenumber(i, n);
            for j in 0..n {
                let k2 = wavenumber(j, n);
                let z = -rate(k1, k2) * dt;
                exp_z.push(z.exp());
                h_phi1.push(dt * phi1(z));
                h_phi2.push(dt * phi2(z));
            }
        }
        Self {
            exp_z,
            h_phi1,
            h_phi2,
        }
    }

    /// One step of u' + Lambda u = N(u) with N evaluated twice (predictor and
    /// corrector); exact whenever N is constant along the step.
    pub fn step(
        &self,
        u: &SpectralField,
        nonlin: impl FnMut(&SpectralField) -> Result<SpectralField>,
    ) -> Result<SpectralField> {
        let shared = std::cell::RefCell::new(nonlin);
        self.step_stages(
            u,
            |x| (shared.borrow_mut())(x),
            |x| (shared.borrow_mut())(x),
        )
    }

    /// Like `step`, but with separate nonlinear evaluations at the start and
    /// end of the interval (for externally prescribed time-varying data).
    pub fn step_stages(
        &self,
        u: &SpectralField,
        mut nonlin_start: impl FnMut(&SpectralField) -> Result<SpectralField>,
        mut nonlin_end: impl FnMut(&SpectralField) -> Result<SpectralField>,
    ) -> Result<SpectralField> {
        let n1 = nonlin_start(u)?;
        let mut ua = u.clone();
        apply_multipliers(&mut ua, &self.exp_z);
        let mut incr = n1.clone();
        apply_multipliers(&mut incr, &self.h_phi1);
        ua = ua.add(&incr);

        let n2 = nonlin_end(&ua)?;
        let mut corr = n2.sub(&n1);
        apply_multipliers(&mut corr, &self.h_phi2);
        Ok(ua.add(&corr))
    }
}

/// Crank-Nicolson linear part, explicit nonlinear term.
#[derive(Debug, Clone)]
pub(crate) struct ImexStepper {
    factor: Vec<f64>,
    explicit: Vec<f64>,
}

impl ImexStepper {
    pub fn new(grid: &GridSpec, dt: f64, mut rate: impl FnMut(i64, i64) -> f64) -> Self {
        let n = grid.resolution();
        let mut factor = Vec::with_capacity(n * n);
        let mut explicit = Vec::with_capacity(n * n);
        for i in 0..n {
            let k1 = wavenumber(i, n);
            for j in 0..n {
                let k2 = wavenumber(j, n);
                let z = rate(k1, k2) * dt;
                factor.push((1.0 - z / 2.0) / (1.0 + z / 2.0));
                explicit.push(dt / (1.0 + z / 2.0));
            }
        }
        Self {
            factor,
            explicit,
        }
    }

    pub fn step(
        &self,
        u: &SpectralField,
        mut nonlin: impl FnMut(&SpectralField) -> Result<SpectralField>,
    ) -> Result<SpectralField> {
        let n1 = nonlin(u)?;
        let mut out = u.clone();
        apply_multipliers(&mut out, &self.factor);
        let mut incr = n1;
        apply_multipliers(&mut incr, &self.explicit);
        Ok(out.add(&incr))
    }
}

pub(crate) enum Stepper {
    Etd(EtdStepper),
    Imex(ImexStepper),
}

impl Stepper {
    pub(crate) fn for_flow(cfg: &FlowConfig) -> Self {
        let nu = cfg.nu;
        let k0sq = cfg.grid.kappa0() * cfg.grid.kappa0();
        let rate = move |k1: i64, k2: i64| nu * k0sq * (k1 * k1 + k2 * k2) as f64;
        match cfg.integrator {
            Integrator::ExponentialIf => Self::Etd(EtdStepper::new(&cfg.grid, cfg.dt, rate)),
            Integrator::ImplicitExplicit => {
                Self::Imex(ImexStepper::new(&cfg.grid, cfg.dt, rate))
            }
        }
    }

    pub(crate) fn step(
        &self,
        u: &SpectralField,
        nonlin: impl FnMut(&SpectralField) -> Result<SpectralField>,
    ) -> Result<SpectralField> {
        match self {
            Self::Etd(s) => s.step(u, nonlin),
            Self::Imex(s) => s.step(u, nonlin),
        }
    }
}

fn flow_nonlinear(cfg: &FlowConfig) -> impl FnMut(&SpectralField) -> Result<SpectralField> + '_ {
    move |u| Ok(cfg.force.sub(&bilinear_self(u)?))
}

fn check_finite(u: &SpectralField, t: f64) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::BlowUp {
            time: t,
            detail: "non-finite coefficients after step".into(),
        });
    }
    Ok(())
}

/// Advances one dt of the full flow.
pub fn step_nse(u: &SpectralField, cfg: &FlowConfig) -> Result<SpectralField> {
    u.same_grid(&cfg.force)?;
    let stepper = Stepper::for_flow(cfg);
    let out = stepper.step(u, flow_nonlinear(cfg))?;
    check_finite(&out, cfg.dt)?;
    Ok(out)
}

/// Per-sample diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRow {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub r_energy: f64,
    pub r_enstrophy: f64,
}

/// Sampled scalar diagnostics along a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeriesReport {
    pub times: Vec<f64>,
    pub rows: Vec<DiagRow>,
}

impl TimeSeriesReport {
    pub fn push(&mut self, t: f64, row: DiagRow) {
        if let Some(last) = self.times.last() {
            assert!(t > *last, "sample times must be strictly increasing");
        }
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("t,l2,h1,h2,rE,rZ\n");
        for (t, r) in self.times.iter().zip(self.rows.iter()) {
            s.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                t, r.l2, r.h1, r.h2, r.r_energy, r.r_enstrophy
            ));
        }
        s
    }
}

/// Integrates from u0 to t_final (rounded to whole steps), sampling norms
/// every `record_every` steps.
pub fn integrate(
    u0: &SpectralField,
    cfg: &FlowConfig,
    t_final: f64,
    record_every: usize,
) -> Result<(SpectralField, TimeSeriesReport)> {
    if t_final < 0.0 {
        return Err(Error::InvalidConfig("t_final must be nonnegative".into()));
    }
    let steps = (t_final / cfg.dt).round() as usize;
    let stepper = Stepper::for_flow(cfg);
    let mut nonlin = flow_nonlinear(cfg);
    let mut u = u0.clone();
    let mut report = TimeSeriesReport::default();
    let every = record_every.max(1);
    for k in 1..=steps {
        u = stepper.step(&u, &mut nonlin)?;
        let t = k as f64 * cfg.dt;
        check_finite(&u, t)?;
        if k % every == 0 {
            let (l2, h1, h2) = u.norms();
            report.push(
                t,
                DiagRow {
                    l2,
                    h1,
                    h2,
                    r_energy: 0.0,
                    r_enstrophy: 0.0,
                },
            );
        }
    }
    Ok((u, report))
}

/// Unforced evolution du/dt + nu A u + B(u,u) = 0 with the integrating-factor
/// scheme, sampled at every step (index 0 = u0).  For data whose
/// self-interaction vanishes this reproduces the heat decay e^{-nu kappa0^2
/// |k|^2 t} exactly to rounding.
pub fn free_decay(
    u0: &SpectralField,
    nu: f64,
    dt: f64,
    steps: usize,
) -> Result<Vec<SpectralField>> {
    if !(nu > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidConfig("nu and dt must be positive".into()));
    }
    u0.validate()?;
    let grid = *u0.grid();
    let k0sq = grid.kappa0() * grid.kappa0();
    let stepper = EtdStepper::new(&grid, dt, |k1, k2| nu * k0sq * (k1 * k1 + k2 * k2) as f64);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(u0.clone());
    let mut u = u0.clone();
    for k in 1..=steps {
        u = stepper.step(&u, |x| Ok(bilinear_self(x)?.scaled(-1.0)))?;
        check_finite(&u, k as f64 * dt)?;
        out.push(u.clone());
    }
    Ok(out)
}

/// Uniformly sampled states (every `every` steps, including the start).
pub fn trajectory_samples(
    u0: &SpectralField,
    cfg: &FlowConfig,
    n_samples: usize,
    every: usize,
) -> Result<Vec<SpectralField>> {
    let stepper = Stepper::for_flow(cfg);
    let mut nonlin = flow_nonlinear(cfg);
    let every = every.max(1);
    let mut out = Vec::with_capacity(n_samples);
    let mut u = u0.clone();
    out.push(u.clone());
    let mut t = 0.0;
    while out.len() < n_samples {
        for _ in 0..every {
            u = stepper.step(&u, &mut nonlin)?;
            t += cfg.dt;
            check_finite(&u, t)?;
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// Discrete residuals of the energy and enstrophy balances,
/// r_E = d|u|^2/dt - 2(f,u) + 2 nu ||u||^2 and
/// r_Z = d||u||^2/dt - 2(f,Au) + 2 nu |Au|^2,
/// using centered differences on uniformly spaced states.
pub fn balance_residuals(
    states: &[SpectralField],
    cfg: &FlowConfig,
    sample_dt: f64,
) -> Result<TimeSeriesReport> {
    if states.len() < 3 {
        return Err(Error::Precondition(format!(
            "balance residuals need at least 3 samples, got {}",
            states.len()
        )));
    }
    let mut report = TimeSeriesReport::default();
    for i in 1..states.len() - 1 {
        let u = &states[i];
        let (l2m, h1m, _) = states[i - 1].norms();
        let (l2, h1, h2) = u.norms();
        let (l2p, h1p, _) = states[i + 1].norms();
        let de = (l2p * l2p - l2m * l2m) / (2.0 * sample_dt);
        let dz = (h1p * h1p - h1m * h1m) / (2.0 * sample_dt);
        let au = u.apply_a(1.0);
        let r_energy = de - 2.0 * cfg.force.inner(u) + 2.0 * cfg.nu * h1 * h1;
        let r_enstrophy = dz - 2.0 * cfg.force.inner(&au) + 2.0 * cfg.nu * h2 * h2;
        report.push(
            i as f64 * sample_dt,
            DiagRow {
                l2,
                h1,
                h2,
                r_energy,
                r_enstrophy,
            },
        );
    }
    Ok(report)
}

/// Absorption time T = (1/(nu kappa0^2)) max{1, ln(||u0||^2/(3 nu^2 kappa0^2 G^2))}.
pub fn absorption_time(u0_h1: f64, cfg: &FlowConfig) -> Result<f64> {
    crate::bounds::absorption_time(u0_h1, cfg.grashof(), cfg.nu, cfg.grid.kappa0())
}

/// |nu A u + B(u,u) - f|.
pub fn nse_residual(u: &SpectralField, cfg: &FlowConfig) -> Result<f64> {
    let mut r = u.apply_a(1.0).scaled(cfg.nu);
    r = r.add(&bilinear_self(u)?);
    Ok(r.sub(&cfg.force).norm_l2())
}

/// True when the force is supported on exactly one conjugate mode pair
/// (an eigenfunction of A); returns that pair's |k|^2.
fn single_pair_support(f: &SpectralField) -> Option<i64> {
    let mut ksq = None;
    for (k1, k2, idx) in f.modes() {
        let mag = f.ux[idx].norm_sqr() + f.uy[idx].norm_sqr();
        if mag == 0.0 {
            continue;
        }
        let this = k1 * k1 + k2 * k2;
        match ksq {
            None => ksq = Some(this),
            Some(prev) if prev == this => {}
            _ => return None,
        }
    }
    ksq
}

/// Stationary solution of nu A u + B(u,u) = f: closed form f/(nu lambda) when
/// f is a single-shear eigenfunction (the bilinear term vanishes there),
/// otherwise a time-march until ||du/dt|| < tol.  Returns the state and its
/// stationary residual.
pub fn steady_state_solve(
    cfg: &FlowConfig,
    tol: f64,
    max_time: f64,
) -> Result<(SpectralField, f64)> {
    if let Some(ksq) = single_pair_support(&cfg.force) {
        let lambda = cfg.grid.kappa0().powi(2) * ksq as f64;
        let u = cfg.force.scaled(1.0 / (cfg.nu * lambda));
        if bilinear_self(&u)?.norm_l2() <= 1e-10 * (1.0 + u.norm_h1() * u.norm_h1()) {
            let res = nse_residual(&u, cfg)?;
            return Ok((u, res));
        }
    }
    let stepper = Stepper::for_flow(cfg);
    let mut nonlin = flow_nonlinear(cfg);
    let mut u = SpectralField::zeros(cfg.grid);
    let steps = (max_time / cfg.dt).ceil() as usize;
    let mut last_rate = f64::INFINITY;
    for k in 1..=steps {
        let next = stepper.step(&u, &mut nonlin)?;
        check_finite(&next, k as f64 * cfg.dt)?;
        last_rate = next.sub(&u).norm_h1() / cfg.dt;
        u = next;
        if last_rate < tol {
            let res = nse_residual(&u, cfg)?;
            return Ok((u, res));
        }
    }
    Err(Error::NoConvergence(format!(
        "steady-state march: ||du/dt|| = {last_rate:.3e} after t = {max_time}"
    )))
}
