//! High-mode slaving: the raw slaved equation driven by prescribed low-mode
//! data, and the gated high-mode map producing the unique bounded solution of
//! the cut-off high-mode equation as a function of a low-mode trajectory.

use crate::bounds::{check_conditions, BoundsInput};
use crate::dynamics::{EtdStepper, FlowConfig};
use crate::error::{Error, Result};
use crate::spectral::field::wavenumber;
use crate::spectral::{bilinear_self, SpectralField};
use crate::trajectory::{ModalTrajectory, SGrid, WSolution};
use num_complex::Complex64;

/// Piecewise-linear gate: 1 for xi <= 2G, 0 for xi >= 3G, linear between.
pub fn cutoff_phi(xi: f64, g: f64) -> f64 {
    assert!(g > 0.0, "cutoff needs G > 0");
    if xi <= 2.0 * g {
        1.0
    } else if xi >= 3.0 * g {
        0.0
    } else {
        3.0 - xi / g
    }
}

fn high_rate(cfg: &FlowConfig) -> impl Fn(i64, i64) -> f64 {
    let nu = cfg.nu;
    let k0sq = cfg.grid.kappa0() * cfg.grid.kappa0();
    move |k1, k2| nu * k0sq * (k1 * k1 + k2 * k2) as f64
}

/// Defaults for the bounded-solution approximation.
pub const MAX_PICARD_ITERS: usize = 50;

/// Integrates the slaved high-mode equation
/// dq/ds + nu A q = Q_N f - Q_N B(v(s) + q)
/// forward from q(s_lo) = q0 along the prescribed low-mode data (no gate).
pub fn slaved_high_modes(
    v: &ModalTrajectory,
    q0: &SpectralField,
    cfg: &FlowConfig,
) -> Result<WSolution> {
    if v.sgrid.is_periodic() {
        return Err(Error::Precondition(
            "slaved high-mode integration is an initial-value sweep; use a windowed s-grid"
                .into(),
        ));
    }
    q0.same_grid(&cfg.force)?;
    let cut = v.cut;
    if q0.project_low(cut).norm_l2() > 1e-12 * (1.0 + q0.norm_l2()) {
        return Err(Error::Precondition(format!(
            "initial high-mode state carries modes at or below |k| = {}",
            cut.n()
        )));
    }
    let h = cfg.force.project_high(cut);
    let stepper = EtdStepper::new(&cfg.grid, v.sgrid.ds(), high_rate(cfg));

    let mut values = Vec::with_capacity(v.len());
    let mut q = q0.clone();
    values.push(q.clone());
    for i in 0..v.len() - 1 {
        let va = v.value(i);
        let vb = v.value(i + 1);
        let rhs_a = |w: &SpectralField| -> Result<SpectralField> {
            Ok(h.sub(&bilinear_self(&va.add(w))?.project_high(cut)))
        };
        let rhs_b = |w: &SpectralField| -> Result<SpectralField> {
            Ok(h.sub(&bilinear_self(&vb.add(w))?.project_high(cut)))
        };
        q = stepper.step_stages(&q, rhs_a, rhs_b)?;
        if !q.is_finite() {
            return Err(Error::BlowUp {
                time: v.sgrid.s_value(i + 1),
                detail: "slaved high-mode sweep diverged".into(),
            });
        }
        values.push(q.clone());
    }
    WSolution::new(v.sgrid, Some(cut), values, true, 1)
}

/// Exact nodewise solution operator for w' + lambda w = g(s) on the periodic
/// s-circle, with g piecewise linear between nodes: the periodized memory
/// integral is evaluated per mode with exact exponential weights.  For every
/// node the same interval weights are accumulated in the same order, so the
/// operator commutes bitwise with cyclic node shifts.
pub(crate) struct PeriodicDuhamel {
    n_nodes: usize,
    /// Per-mode geometric factor 1/(1 - e^{-lambda S}); 0 marks inactive
    /// (lambda = 0) modes, whose output is pinned to zero.
    pref: Vec<f64>,
    /// Per-mode decay across one node interval, e^{-lambda ds}.
    decay: Vec<f64>,
    /// Left/right endpoint weights of one interval's integral.
    c0: Vec<f64>,
    c1: Vec<f64>,
}

impl PeriodicDuhamel {
    /// `horizon`: truncate the memory integral after that many s-units back
    /// (None = full periodization, i.e. the exact semi-infinite integral).
    pub(crate) fn new(cfg: &FlowConfig, sgrid: &SGrid, horizon: Option<f64>) -> Result<Self> {
        Self::with_rate(&cfg.grid, sgrid, high_rate(cfg), horizon)
    }

    /// Same operator with caller-supplied per-mode decay rates.
    pub(crate) fn with_rate(
        grid: &crate::spectral::GridSpec,
        sgrid: &SGrid,
        rate: impl Fn(i64, i64) -> f64,
        horizon: Option<f64>,
    ) -> Result<Self> {
        let SGrid::Periodic { period, ds } = *sgrid else {
            return Err(Error::Precondition("periodic s-grid required".into()));
        };
        let n_nodes = sgrid.node_count();
        let n = grid.resolution();
        let mut pref = Vec::with_capacity(n * n);
        let mut decay = Vec::with_capacity(n * n);
        let mut c0 = Vec::with_capacity(n * n);
        let mut c1 = Vec::with_capacity(n * n);
        for i in 0..n {
            let k1 = wavenumber(i, n);
            for j in 0..n {
                let k2 = wavenumber(j, n);
                let lam = rate(k1, k2);
                if lam == 0.0 {
                    pref.push(0.0);
                    decay.push(0.0);
                    c0.push(0.0);
                    c1.push(0.0);
                    continue;
                }
                let alpha = lam * ds;
                let (w0, w1);
                if alpha < 1e-4 {
                    // series of (1 - (1+a)e^{-a})/a^2 and its complement
                    let s0 = 0.5 - alpha / 3.0 + alpha * alpha / 8.0
                        - alpha * alpha * alpha / 30.0;
                    let i1 = ds * (1.0 - alpha / 2.0 + alpha * alpha / 6.0
                        - alpha * alpha * alpha / 24.0);
                    w0 = ds * s0;
                    w1 = i1 - w0;
                } else {
                    let em = (-alpha).exp();
                    let i1 = (1.0 - em) / lam;
                    w0 = (1.0 - em * (1.0 + alpha)) / (lam * lam * ds);
                    w1 = i1 - w0;
                }
                let mut p = 1.0 / (1.0 - (-(lam * period)).exp());
                if let Some(hz) = horizon {
                    // keep only whole laps within the horizon
                    let laps = (hz / period).floor().max(1.0);
                    p *= 1.0 - (-(lam * laps * period)).exp();
                }
                pref.push(p);
                decay.push((-alpha).exp());
                c0.push(w0);
                c1.push(w1);
            }
        }
        Ok(Self {
            n_nodes,
            pref,
            decay,
            c0,
            c1,
        })
    }

    /// Applies the solution operator to nodewise samples of g.
    pub(crate) fn apply(&self, g: &[SpectralField]) -> Vec<SpectralField> {
        let nn = self.n_nodes;
        debug_assert_eq!(g.len(), nn);
        let grid = *g[0].grid();
        let n = grid.resolution();
        let mut out: Vec<SpectralField> =
            (0..nn).map(|_| SpectralField::zeros(grid)).collect();
        let mut powers = vec![0.0_f64; nn];
        for idx in 0..n * n {
            if self.pref[idx] == 0.0 {
                continue;
            }
            let d = self.decay[idx];
            powers[0] = 1.0;
            for m in 1..nn {
                powers[m] = powers[m - 1] * d;
            }
            let (w0, w1, pref) = (self.c0[idx], self.c1[idx], self.pref[idx]);
            for i in 0..nn {
                let mut ax = Complex64::new(0.0, 0.0);
                let mut ay = Complex64::new(0.0, 0.0);
                // smallest contributions first; identical weight/order for
                // every node i keeps the operator shift-equivariant bitwise
                for m in (0..nn).rev() {
                    // interval m steps back: endpoints at nodes i-1-m and i-m
                    let l = (i + 2 * nn - 1 - m) % nn;
                    let r = (i + 2 * nn - m) % nn;
                    let w = powers[m];
                    ax += w * (w0 * g[l].ux[idx] + w1 * g[r].ux[idx]);
                    ay += w * (w0 * g[l].uy[idx] + w1 * g[r].uy[idx]);
                }
                out[i].ux[idx] = pref * ax;
                out[i].uy[idx] = pref * ay;
            }
        }
        out
    }
}

pub(crate) fn phi_values(v: &ModalTrajectory, cfg: &FlowConfig) -> Vec<f64> {
    let g = cfg.grashof();
    let scale = cfg.nu * cfg.grid.kappa0();
    v.values()
        .iter()
        .map(|vi| cutoff_phi(vi.norm_h1() / scale, g))
        .collect()
}

fn check_admissibility(v: &ModalTrajectory, cfg: &FlowConfig, enforce: bool) -> Result<()> {
    let fl2 = cfg.force.norm_l2();
    let ratio_hf = cfg.force.project_high(v.cut).norm_l2() / fl2;
    let mut inp = BoundsInput::new(cfg.grashof(), v.cut.n());
    inp.ratio_hf = ratio_hf;
    inp.constants = cfg.constants;
    let rep = check_conditions(&inp);
    if !rep.flags.gn4 {
        let msg = format!(
            "high-mode map outside its certified region: G = {:.3}, N = {} fails the \
             joint (9+beta) admissibility condition",
            cfg.grashof(),
            v.cut.n()
        );
        if enforce {
            return Err(Error::Precondition(msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(())
}

/// The gated high-mode map: the unique bounded solution of
/// dw/ds + nu A w + Q_N B(phi v + w) = Q_N f.
///
/// Windowed grids integrate from w(s_lo) = 0 and discard the burn-in;
/// periodic grids solve the periodized memory integral by fixed-point
/// iteration, which preserves node shifts, constants-in-s and sub-periods
/// bitwise.
pub fn w_map_solve(
    v: &ModalTrajectory,
    cfg: &FlowConfig,
    tol: f64,
    enforce_conditions: bool,
) -> Result<WSolution> {
    check_admissibility(v, cfg, enforce_conditions)?;
    let cut = v.cut;
    let h = cfg.force.project_high(cut);
    let phis = phi_values(v, cfg);

    match v.sgrid {
        SGrid::Windowed { .. } => {
            let stepper = EtdStepper::new(&cfg.grid, v.sgrid.ds(), high_rate(cfg));
            let mut values = Vec::with_capacity(v.len());
            let mut w = SpectralField::zeros(cfg.grid);
            values.push(w.clone());
            for i in 0..v.len() - 1 {
                let ga = v.value(i).scaled(phis[i]);
                let gb = v.value(i + 1).scaled(phis[i + 1]);
                let rhs_a = |x: &SpectralField| -> Result<SpectralField> {
                    Ok(h.sub(&bilinear_self(&ga.add(x))?.project_high(cut)))
                };
                let rhs_b = |x: &SpectralField| -> Result<SpectralField> {
                    Ok(h.sub(&bilinear_self(&gb.add(x))?.project_high(cut)))
                };
                w = stepper.step_stages(&w, rhs_a, rhs_b)?;
                if !w.is_finite() {
                    return Err(Error::BlowUp {
                        time: v.sgrid.s_value(i + 1),
                        detail: "gated high-mode sweep diverged".into(),
                    });
                }
                values.push(w.clone());
            }
            WSolution::new(v.sgrid, Some(cut), values, true, 1)
        }
        SGrid::Periodic { .. } => {
            let op = PeriodicDuhamel::new(cfg, &v.sgrid, None)?;
            let gated: Vec<SpectralField> = v
                .values()
                .iter()
                .zip(phis.iter())
                .map(|(vi, p)| vi.scaled(*p))
                .collect();
            let nn = v.len();
            let mut w: Vec<SpectralField> =
                (0..nn).map(|_| SpectralField::zeros(cfg.grid)).collect();
            let mut converged = false;
            let mut iters = 0;
            while iters < MAX_PICARD_ITERS {
                iters += 1;
                let mut g = Vec::with_capacity(nn);
                for i in 0..nn {
                    let rhs = h.sub(&bilinear_self(&gated[i].add(&w[i]))?.project_high(cut));
                    if !rhs.is_finite() {
                        return Err(Error::BlowUp {
                            time: v.sgrid.s_value(i),
                            detail: "gated high-mode iteration diverged".into(),
                        });
                    }
                    g.push(rhs);
                }
                let next = op.apply(&g);
                let diff = w
                    .iter()
                    .zip(next.iter())
                    .map(|(a, b)| a.sub(b).norm_l2())
                    .fold(0.0, f64::max);
                w = next;
                if diff < tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence(format!(
                    "gated high-mode iteration: no fixed point after {MAX_PICARD_ITERS} sweeps \
                     at tol {tol:.1e}"
                )));
            }
            WSolution::new(v.sgrid, Some(cut), w, converged, iters)
        }
    }
}

/// Checks that the map's value up to s0 ignores data beyond s0: solves both
/// trajectories and returns the largest ||difference|| over post-burn-in
/// nodes with s <= s0.
pub fn w_causality_probe(
    v1: &ModalTrajectory,
    v2: &ModalTrajectory,
    s0: f64,
    cfg: &FlowConfig,
    tol: f64,
) -> Result<f64> {
    v1.sgrid.same_as(&v2.sgrid)?;
    if v1.sgrid.is_periodic() {
        return Err(Error::Precondition(
            "the causality probe needs a windowed s-grid".into(),
        ));
    }
    for i in 0..v1.len() {
        if v1.sgrid.s_value(i) <= s0 && v1.value(i) != v2.value(i) {
            return Err(Error::Precondition(format!(
                "trajectories differ at s = {} <= s0 = {s0}",
                v1.sgrid.s_value(i)
            )));
        }
    }
    let w1 = w_map_solve(v1, cfg, tol, false)?;
    let w2 = w_map_solve(v2, cfg, tol, false)?;
    let first = v1.sgrid.first_kept_node();
    let mut worst: f64 = 0.0;
    for i in first..v1.len() {
        if v1.sgrid.s_value(i) <= s0 {
            worst = worst.max(w1.value(i).sub(w2.value(i)).norm_h1());
        }
    }
    Ok(worst)
}

/// Empirical Lipschitz ratio sup |W(v1) - W(v2)|_Y / ||v1 - v2||_X over the
/// given pairs, alongside the closed-form constant (when defined).  Identical
/// pairs are skipped.
pub fn w_lipschitz_probe(
    pairs: &[(ModalTrajectory, ModalTrajectory)],
    cfg: &FlowConfig,
    tol: f64,
) -> Result<(f64, Option<f64>)> {
    let mut empirical: f64 = 0.0;
    let mut formula = None;
    for (v1, v2) in pairs {
        v1.sgrid.same_as(&v2.sgrid)?;
        let dist = v1.distance_x(v2)?;
        if dist == 0.0 {
            continue;
        }
        let w1 = w_map_solve(v1, cfg, tol, false)?;
        let w2 = w_map_solve(v2, cfg, tol, false)?;
        let first = v1.sgrid.first_kept_node();
        let num = (first..v1.len())
            .map(|i| w1.value(i).sub(w2.value(i)).norm_l2())
            .fold(0.0, f64::max);
        empirical = empirical.max(num / dist);
        if formula.is_none() {
            let fl2 = cfg.force.norm_l2();
            let mut inp = BoundsInput::new(cfg.grashof(), v1.cut.n());
            inp.ratio_hf = cfg.force.project_high(v1.cut).norm_l2() / fl2;
            inp.constants = cfg.constants;
            formula = check_conditions(&inp).l_w;
        }
    }
    Ok((empirical, formula))
}
