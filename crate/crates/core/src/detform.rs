//! The trajectory-space ODE dv/dt = F(v): the right-hand side built from the
//! gated high-mode map, an explicit RK4 outer stepper, traveling-wave and
//! stationary diagnostics, and the memory-integral representation check.

use crate::dynamics::FlowConfig;
use crate::error::{Error, Result};
use crate::slaving::{phi_values, w_map_solve, PeriodicDuhamel};
use crate::spectral::{bilinear_self, SpectralField};
use crate::trajectory::{ModalTrajectory, WSolution};

/// One outer-time snapshot of the trajectory-space ODE.
#[derive(Debug, Clone)]
pub struct DetFormState {
    pub t: f64,
    pub v: ModalTrajectory,
}

impl DetFormState {
    pub fn new(t: f64, v: ModalTrajectory) -> Self {
        Self { t, v }
    }
}

/// Nodewise linear combination a + c * b of two trajectories.
fn axpy_traj(a: &ModalTrajectory, c: f64, b: &ModalTrajectory) -> Result<ModalTrajectory> {
    a.sgrid.same_as(&b.sgrid)?;
    let values = a
        .values()
        .iter()
        .zip(b.values().iter())
        .map(|(x, y)| {
            let mut out = x.clone();
            out.axpy(c, y);
            out
        })
        .collect();
    ModalTrajectory::new(a.sgrid, a.cut, values)
}

/// F(v)(s) = P_N f - nu A v(s) - P_N B(phi(||v(s)||/nu kappa0) v(s) + W(v)(s)).
/// Every high-mode solve starts fresh so that the result at a node depends
/// only on node data, keeping shift equivariance bitwise.
pub fn f_eval(
    v: &ModalTrajectory,
    cfg: &FlowConfig,
    tol: f64,
    enforce_conditions: bool,
) -> Result<ModalTrajectory> {
    let w = w_map_solve(v, cfg, tol, enforce_conditions)?;
    f_eval_with(v, &w, cfg)
}

/// F evaluated against an already-computed high-mode solution.
pub fn f_eval_with(
    v: &ModalTrajectory,
    w: &WSolution,
    cfg: &FlowConfig,
) -> Result<ModalTrajectory> {
    v.sgrid.same_as(&w.sgrid)?;
    let cut = v.cut;
    let g_low = cfg.force.project_low(cut);
    let phis = phi_values(v, cfg);
    let mut values = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let gated = v.value(i).scaled(phis[i]);
        let b = bilinear_self(&gated.add(w.value(i)))?.project_low(cut);
        let mut out = g_low.clone();
        out.axpy(-cfg.nu, &v.value(i).apply_a(1.0));
        out = out.sub(&b);
        values.push(out);
    }
    ModalTrajectory::new(v.sgrid, cut, values)
}

/// One explicit RK4 step of dv/dt = F(v) in the outer time, applied nodewise.
pub fn detform_step(
    state: &DetFormState,
    dt_outer: f64,
    cfg: &FlowConfig,
    tol: f64,
    enforce_conditions: bool,
) -> Result<DetFormState> {
    if !(dt_outer > 0.0) {
        return Err(Error::InvalidConfig("dt_outer must be positive".into()));
    }
    let v = &state.v;
    let k1 = f_eval(v, cfg, tol, enforce_conditions)?;
    let k2 = f_eval(&axpy_traj(v, dt_outer / 2.0, &k1)?, cfg, tol, enforce_conditions)?;
    let k3 = f_eval(&axpy_traj(v, dt_outer / 2.0, &k2)?, cfg, tol, enforce_conditions)?;
    let k4 = f_eval(&axpy_traj(v, dt_outer, &k3)?, cfg, tol, enforce_conditions)?;
    let mut sum = axpy_traj(&k1, 1.0, &k4)?;
    sum = axpy_traj(&sum, 2.0, &k2)?;
    sum = axpy_traj(&sum, 2.0, &k3)?;
    let next = axpy_traj(v, dt_outer / 6.0, &sum)?;
    for (i, field) in next.values().iter().enumerate() {
        if !field.is_finite() {
            return Err(Error::BlowUp {
                time: state.t + dt_outer,
                detail: format!("outer step diverged at s-node {i}"),
            });
        }
    }
    Ok(DetFormState::new(state.t + dt_outer, next))
}

/// Residual of the traveling-wave property v(t, s) = v(0, t + s): the largest
/// nodewise ||difference|| over all recorded outer times.  Outer times must
/// be node multiples of ds (no interpolation).  On periodic grids the shift
/// wraps around the s-circle; on windowed grids the comparison is restricted
/// to post-burn-in nodes where both sides are defined.
pub fn traveling_wave_residual(states: &[DetFormState]) -> Result<f64> {
    let Some(first) = states.first() else {
        return Err(Error::Precondition("no states supplied".into()));
    };
    let base = &first.v;
    let ds = base.sgrid.ds();
    let mut worst: f64 = 0.0;
    for st in states.iter() {
        st.v.sgrid.same_as(&base.sgrid)?;
        let dt = st.t - first.t;
        let ratio = dt / ds;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "outer time offset {dt} is not a node multiple of ds = {ds}; \
                 interpolation refused"
            )));
        }
        let m = m as i64;
        if base.sgrid.is_periodic() {
            let shifted = base.shift_nodes(m)?;
            worst = worst.max(st.v.distance_x(&shifted)?);
        } else {
            let n = base.len() as i64;
            let first_kept = base.sgrid.first_kept_node() as i64;
            for i in first_kept..n {
                let j = i + m;
                if j < 0 || j >= n {
                    continue;
                }
                let d = st.v.value(i as usize).sub(base.value(j as usize)).norm_h1();
                worst = worst.max(d);
            }
        }
    }
    Ok(worst)
}

/// Residuals of the stationary differential-algebraic system for a candidate
/// low-mode equilibrium v0, with the slaved field w0 = W(v0).
#[derive(Debug, Clone)]
pub struct StationaryReport {
    /// sup_s | nu A v0 - P_N f + P_N B(phi v0 + w0) |.
    pub algebraic_residual: f64,
    /// sup over interior nodes of | dw0/ds + nu A w0 - Q_N f + Q_N B(phi v0 + w0) |.
    pub ode_residual: f64,
    /// sup | (1/2) d|w0|^2/ds + nu ||u0||^2 - (f, u0) |, u0 = v0 + w0.
    pub energy_residual: f64,
    /// sup | (1/2) d||w0||^2/ds + nu |A u0|^2 - (f, A u0) |.
    pub enstrophy_residual: f64,
    /// Per-node ||u0||^2 / |u0| (0 where |u0| = 0).
    pub chi_u: Vec<f64>,
    /// Per-node ||w0||^2 / |w0|.
    pub chi_w: Vec<f64>,
    /// The eigenfunction-case reference level |f| / nu.
    pub reference: f64,
}

fn s_derivative(values: &[f64], i: usize, ds: f64, periodic: bool) -> Option<f64> {
    let n = values.len();
    if periodic {
        let p = (i + n - 1) % n;
        let q = (i + 1) % n;
        Some((values[q] - values[p]) / (2.0 * ds))
    } else if i == 0 || i + 1 == n {
        None
    } else {
        Some((values[i + 1] - values[i - 1]) / (2.0 * ds))
    }
}

pub(crate) fn field_s_derivative(
    values: &[SpectralField],
    i: usize,
    ds: f64,
    periodic: bool,
) -> Option<SpectralField> {
    let n = values.len();
    if periodic {
        let p = (i + n - 1) % n;
        let q = (i + 1) % n;
        Some(values[q].sub(&values[p]).scaled(1.0 / (2.0 * ds)))
    } else if i == 0 || i + 1 == n {
        None
    } else {
        Some(values[i + 1].sub(&values[i - 1]).scaled(1.0 / (2.0 * ds)))
    }
}

pub fn stationary_residuals(
    v0: &ModalTrajectory,
    cfg: &FlowConfig,
    tol: f64,
    enforce_conditions: bool,
) -> Result<StationaryReport> {
    let w0 = w_map_solve(v0, cfg, tol, enforce_conditions)?;
    let cut = v0.cut;
    let g_low = cfg.force.project_low(cut);
    let h_high = cfg.force.project_high(cut);
    let phis = phi_values(v0, cfg);
    let ds = v0.sgrid.ds();
    let periodic = v0.sgrid.is_periodic();
    let n = v0.len();

    let mut algebraic: f64 = 0.0;
    let mut ode: f64 = 0.0;
    let mut energy: f64 = 0.0;
    let mut enstrophy: f64 = 0.0;
    let mut chi_u = Vec::with_capacity(n);
    let mut chi_w = Vec::with_capacity(n);

    let w_l2sq: Vec<f64> = w0.values().iter().map(|w| w.norm_l2().powi(2)).collect();
    let w_h1sq: Vec<f64> = w0.values().iter().map(|w| w.norm_h1().powi(2)).collect();

    for i in 0..n {
        let vi = v0.value(i);
        let wi = w0.value(i);
        let gated = vi.scaled(phis[i]);
        let b = bilinear_self(&gated.add(wi))?;

        let mut alg = vi.apply_a(1.0).scaled(cfg.nu);
        alg = alg.sub(&g_low).add(&b.project_low(cut));
        algebraic = algebraic.max(alg.norm_l2());

        if let Some(dw) = field_s_derivative(w0.values(), i, ds, periodic) {
            let mut r = dw;
            r.axpy(cfg.nu, &wi.apply_a(1.0));
            r = r.sub(&h_high).add(&b.project_high(cut));
            ode = ode.max(r.norm_l2());
        }

        let u0 = vi.add(wi);
        let (u_l2, u_h1, u_h2) = u0.norms();
        if let Some(de) = s_derivative(&w_l2sq, i, ds, periodic) {
            energy = energy
                .max((0.5 * de + cfg.nu * u_h1 * u_h1 - cfg.force.inner(&u0)).abs());
        }
        if let Some(dz) = s_derivative(&w_h1sq, i, ds, periodic) {
            let au = u0.apply_a(1.0);
            enstrophy = enstrophy
                .max((0.5 * dz + cfg.nu * u_h2 * u_h2 - cfg.force.inner(&au)).abs());
        }
        chi_u.push(if u_l2 > 0.0 { u_h1 * u_h1 / u_l2 } else { 0.0 });
        let (w_l2, w_h1, _) = wi.norms();
        chi_w.push(if w_l2 > 0.0 { w_h1 * w_h1 / w_l2 } else { 0.0 });
    }

    Ok(StationaryReport {
        algebraic_residual: algebraic,
        ode_residual: ode,
        energy_residual: energy,
        enstrophy_residual: enstrophy,
        chi_u,
        chi_w,
        reference: cfg.force.norm_l2() / cfg.nu,
    })
}

/// Residual of the memory-integral representation
/// v(s) = integral over sigma <= s of e^{-nu (s - sigma) A} [P_N f - P_N B(phi v + W(v))],
/// with the integral truncated at the given horizon.  Returns the sup residual
/// and whether the horizon reaches kernel decay below 1e-12 on the slowest
/// retained mode.
pub fn integral_representation_residual(
    v: &ModalTrajectory,
    cfg: &FlowConfig,
    horizon: f64,
    tol: f64,
    enforce_conditions: bool,
) -> Result<(f64, bool)> {
    if !v.sgrid.is_periodic() {
        return Err(Error::Precondition(
            "the integral representation check needs a periodic s-grid".into(),
        ));
    }
    let w = w_map_solve(v, cfg, tol, enforce_conditions)?;
    let cut = v.cut;
    let g_low = cfg.force.project_low(cut);
    let phis = phi_values(v, cfg);
    let mut rhs = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let gated = v.value(i).scaled(phis[i]);
        let b = bilinear_self(&gated.add(w.value(i)))?.project_low(cut);
        rhs.push(g_low.sub(&b));
    }
    let op = PeriodicDuhamel::new(cfg, &v.sgrid, Some(horizon))?;
    let integral = op.apply(&rhs);
    let mut worst: f64 = 0.0;
    for i in 0..v.len() {
        worst = worst.max(integral[i].project_low(cut).sub(v.value(i)).norm_l2());
    }
    let slowest = cfg.nu * cfg.grid.kappa0().powi(2); // |k| = 1 decay rate
    let horizon_ok = (-slowest * horizon).exp() < 1e-12;
    Ok((worst, horizon_ok))
}
