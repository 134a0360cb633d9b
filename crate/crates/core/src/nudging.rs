//! Low-mode data assimilation by feedback nudging, the associated bounded
//! solution map of the nudged equation, the trajectory vector field built on
//! it (full-field nonlinear term, no gate), and the eliminated stationary
//! equation in the high-mode unknown.

use crate::detform::field_s_derivative;
use crate::dynamics::{EtdStepper, FlowConfig};
use crate::error::{Error, Result};
use crate::slaving::{PeriodicDuhamel, MAX_PICARD_ITERS};
use crate::spectral::{bilinear_self, ModeCut, SpectralField};
use crate::trajectory::{ModalTrajectory, SGrid, WSolution};
use num_complex::Complex64;

fn is_sum_of_two_squares(m: u64) -> bool {
    let mut a = 0u64;
    while a * a <= m {
        let rem = m - a * a;
        let b = (rem as f64).sqrt().round() as u64;
        if b * b == rem {
            return true;
        }
        a += 1;
    }
    false
}

/// Feedback-nudging parameters on top of a flow configuration.
#[derive(Debug, Clone)]
pub struct NudgeConfig {
    pub mu: f64,
    pub cut: ModeCut,
    pub flow: FlowConfig,
    /// 1 - 2 c_L^2 G^2 + 2 mu: positive means the synchronization estimate
    /// applies at the configured constants.
    pub alpha: f64,
    pub alpha_ok: bool,
    /// mu / (N+1)^2 <= 1/4
    pub mu_scale_ok: bool,
}

impl NudgeConfig {
    /// mu = 0 is allowed (plain flow, useful as a regression anchor); for
    /// mu > 0 the shifted damping kappa0^2 mu must stay clear of the Stokes
    /// eigenvalues kappa0^2 |k|^2, i.e. mu must not sit on an integer that is
    /// a sum of two squares.
    pub fn new(mu: f64, cut: ModeCut, flow: FlowConfig) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "damping mu must be a finite nonnegative real, got {mu}"
            )));
        }
        ModeCut::new(cut.n(), &flow.grid)?;
        let k0sq = flow.grid.kappa0() * flow.grid.kappa0();
        let m = mu.round();
        if m >= 1.0 && (k0sq * (mu - m)).abs() < 1e-9 && is_sum_of_two_squares(m as u64) {
            return Err(Error::InvalidConfig(format!(
                "kappa0^2 mu with mu = {mu} collides with the Stokes eigenvalue at |k|^2 = {m}; \
                 shift mu off the lattice"
            )));
        }
        let g = flow.grashof();
        let cl = flow.constants.c_l;
        let alpha = 1.0 - 2.0 * cl * cl * g * g + 2.0 * mu;
        let n = cut.n() as f64;
        Ok(Self {
            mu,
            cut,
            flow,
            alpha,
            alpha_ok: alpha > 0.0,
            mu_scale_ok: mu / ((n + 1.0) * (n + 1.0)) <= 0.25,
        })
    }

    /// Per-mode linear decay rate with the feedback term folded in on the
    /// observed modes: nu kappa0^2 (|k|^2 + mu [|k| <= N]).
    fn rate(&self) -> impl Fn(i64, i64) -> f64 + '_ {
        let nu = self.flow.nu;
        let k0sq = self.flow.grid.kappa0() * self.flow.grid.kappa0();
        let cut = self.cut;
        let mu = self.mu;
        move |k1, k2| {
            let ksq = (k1 * k1 + k2 * k2) as f64;
            let boost = if cut.is_low(k1, k2) { mu } else { 0.0 };
            nu * k0sq * (ksq + boost)
        }
    }

    fn gain(&self) -> f64 {
        self.flow.nu * self.flow.grid.kappa0() * self.flow.grid.kappa0() * self.mu
    }

    fn warn_or_fail(&self, enforce: bool) -> Result<()> {
        if self.alpha_ok {
            return Ok(());
        }
        let msg = format!(
            "synchronization margin alpha = {:.3} is not positive at G = {:.3}, mu = {}",
            self.alpha,
            self.flow.grashof(),
            self.mu
        );
        if enforce {
            return Err(Error::Precondition(msg));
        }
        eprintln!("warning: {msg}");
        Ok(())
    }
}

/// Nodewise synchronization-error record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeltaSeries {
    pub s: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
}

impl DeltaSeries {
    fn push(&mut self, s: f64, d: &SpectralField) {
        self.s.push(s);
        self.l2.push(d.norm_l2());
        self.h1.push(d.norm_h1());
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("s,delta_l2,delta_h1\n");
        for i in 0..self.s.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.s[i], self.l2[i], self.h1[i]
            ));
        }
        out
    }

    pub fn floor(&self) -> f64 {
        self.l2.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Least-squares slope of log|delta| against s, restricted to the window
/// where |delta| sits in [100*floor, 0.1*|delta(s0)|] -- below the transient,
/// above the rounding floor.  None when fewer than two nodes qualify.
pub fn fit_decay_slope(series: &DeltaSeries) -> Option<f64> {
    let d0 = *series.l2.first()?;
    let floor = series.floor();
    if !(d0 > 0.0) {
        return None;
    }
    let lo = 100.0 * floor;
    let hi = 0.1 * d0;
    let pts: Vec<(f64, f64)> = series
        .s
        .iter()
        .zip(series.l2.iter())
        .filter(|(_, d)| **d > 0.0 && **d >= lo && **d <= hi)
        .map(|(s, d)| (*s, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let den = n * sxx - sx * sx;
    if den == 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / den)
}

/// Integrates the nudged equation
/// dw/ds + nu A w + B(w) = f - nu kappa0^2 mu P_N(w - v)
/// along observed low-mode samples v (zero-order hold between nodes).  The
/// feedback damping is folded into the per-mode linear rates; only the
/// constant injection nu kappa0^2 mu v enters the nonlinear stage, so mu = 0
/// reduces bitwise to the plain flow step.
///
/// `reference` (full reference states at the same nodes, when available)
/// switches the error record from |P_N(w - v)| to the true |w - u|.
pub fn nudge_integrate(
    observed_v: &ModalTrajectory,
    w0: &SpectralField,
    ncfg: &NudgeConfig,
    reference: Option<&[SpectralField]>,
) -> Result<(SpectralField, DeltaSeries)> {
    if observed_v.sgrid.is_periodic() {
        return Err(Error::Precondition(
            "assimilation is an initial-value sweep; use a windowed s-grid".into(),
        ));
    }
    if observed_v.cut != ncfg.cut {
        return Err(Error::Precondition(
            "observation cut differs from the configured cut".into(),
        ));
    }
    w0.same_grid(&ncfg.flow.force)?;
    if let Some(r) = reference {
        if r.len() != observed_v.len() {
            return Err(Error::Precondition(format!(
                "reference has {} states for {} observation nodes",
                r.len(),
                observed_v.len()
            )));
        }
    }
    let sg = observed_v.sgrid;
    let stepper = EtdStepper::new(&ncfg.flow.grid, sg.ds(), ncfg.rate());
    let gain = ncfg.gain();
    let cut = ncfg.cut;

    let mut series = DeltaSeries::default();
    let record = |series: &mut DeltaSeries, i: usize, w: &SpectralField| {
        let d = match reference {
            Some(r) => w.sub(&r[i]),
            None => w.project_low(cut).sub(observed_v.value(i)),
        };
        series.push(sg.s_value(i), &d);
    };

    let mut w = w0.clone();
    record(&mut series, 0, &w);
    for i in 0..observed_v.len() - 1 {
        let vi = observed_v.value(i);
        w = stepper.step(&w, |x| {
            let mut r = ncfg.flow.force.sub(&bilinear_self(x)?);
            if ncfg.mu > 0.0 {
                r = r.add(&vi.scaled(gain));
            }
            Ok(r)
        })?;
        if !w.is_finite() {
            return Err(Error::BlowUp {
                time: sg.s_value(i + 1),
                detail: "nudged sweep diverged".into(),
            });
        }
        record(&mut series, i + 1, &w);
    }
    Ok((w, series))
}

/// The bounded-solution map of the nudged equation: the full field w solving
/// dw/ds + nu A w + B(w) = f - nu kappa0^2 mu P_N(w - v)
/// as a function of the low-mode trajectory v.  Windowed grids sweep from
/// w = 0 and discard the burn-in; periodic grids use the periodized memory
/// integral with the feedback-shifted rates, fixed-point iterated.
pub fn w_tilde_solve(
    v: &ModalTrajectory,
    ncfg: &NudgeConfig,
    tol: f64,
    enforce_conditions: bool,
) -> Result<WSolution> {
    ncfg.warn_or_fail(enforce_conditions)?;
    if v.cut != ncfg.cut {
        return Err(Error::Precondition(
            "trajectory cut differs from the configured cut".into(),
        ));
    }
    let cfg = &ncfg.flow;
    let gain = ncfg.gain();
    let inject: Vec<SpectralField> = v
        .values()
        .iter()
        .map(|vi| cfg.force.add(&vi.scaled(gain)))
        .collect();

    match v.sgrid {
        SGrid::Windowed { .. } => {
            let stepper = EtdStepper::new(&cfg.grid, v.sgrid.ds(), ncfg.rate());
            let mut values = Vec::with_capacity(v.len());
            let mut w = SpectralField::zeros(cfg.grid);
            values.push(w.clone());
            for i in 0..v.len() - 1 {
                let ga = &inject[i];
                let gb = &inject[i + 1];
                let rhs_a = |x: &SpectralField| Ok(ga.sub(&bilinear_self(x)?));
                let rhs_b = |x: &SpectralField| Ok(gb.sub(&bilinear_self(x)?));
                w = stepper.step_stages(&w, rhs_a, rhs_b)?;
                if !w.is_finite() {
                    return Err(Error::BlowUp {
                        time: v.sgrid.s_value(i + 1),
                        detail: "nudged bounded-solution sweep diverged".into(),
                    });
                }
                values.push(w.clone());
            }
            WSolution::new(v.sgrid, None, values, true, 1)
        }
        SGrid::Periodic { .. } => {
            let op = PeriodicDuhamel::with_rate(&cfg.grid, &v.sgrid, ncfg.rate(), None)?;
            let nn = v.len();
            let mut w: Vec<SpectralField> =
                (0..nn).map(|_| SpectralField::zeros(cfg.grid)).collect();
            let mut converged = false;
            let mut iters = 0;
            while iters < MAX_PICARD_ITERS {
                iters += 1;
                let mut g = Vec::with_capacity(nn);
                for i in 0..nn {
                    let rhs = inject[i].sub(&bilinear_self(&w[i])?);
                    if !rhs.is_finite() {
                        return Err(Error::BlowUp {
                            time: v.sgrid.s_value(i),
                            detail: "nudged bounded-solution iteration diverged".into(),
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
                    "nudged bounded-solution iteration: no fixed point after \
                     {MAX_PICARD_ITERS} sweeps at tol {tol:.1e}"
                )));
            }
            WSolution::new(v.sgrid, None, w, converged, iters)
        }
    }
}

/// The a-priori estimate for the bounded solution: returns
/// (sup_s ||w(s)||, |f|/(nu kappa0) + mu sup_s ||v(s)||), gradient norms.
pub fn w_tilde_bound_check(
    v: &ModalTrajectory,
    w: &WSolution,
    ncfg: &NudgeConfig,
) -> (f64, f64) {
    let cfg = &ncfg.flow;
    let bound = cfg.force.norm_l2() / (cfg.nu * cfg.grid.kappa0()) + ncfg.mu * v.norm_x();
    (w.sup_h1(), bound)
}

/// The nudged trajectory vector field: s |-> P_N f - nu A v(s) - P_N B(w(s))
/// with w the bounded solution above.  The nonlinear term takes the full
/// field and there is no amplitude gate.
pub fn detform2_rhs(
    v: &ModalTrajectory,
    ncfg: &NudgeConfig,
    tol: f64,
    enforce_conditions: bool,
) -> Result<ModalTrajectory> {
    let w = w_tilde_solve(v, ncfg, tol, enforce_conditions)?;
    let cfg = &ncfg.flow;
    let cut = v.cut;
    let g_low = cfg.force.project_low(cut);
    let mut values = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let b = bilinear_self(w.value(i))?.project_low(cut);
        let mut out = g_low.clone();
        out.axpy(-cfg.nu, &v.value(i).apply_a(1.0));
        out = out.sub(&b);
        values.push(out);
    }
    ModalTrajectory::new(v.sgrid, cut, values)
}

/// sup_s |P_N(v(s) - w(s))| over post-burn-in nodes.  Vanishes exactly when
/// the pair is synchronized on the observed modes (e.g. genuine traveling
/// waves of the nudged trajectory equation).
pub fn xi_decay_check(v: &ModalTrajectory, w: &WSolution, ncfg: &NudgeConfig) -> Result<f64> {
    v.sgrid.same_as(&w.sgrid)?;
    let cut = ncfg.cut;
    let first = v.sgrid.first_kept_node();
    let mut worst: f64 = 0.0;
    for i in first..v.len() {
        let xi = v.value(i).sub(&w.value(i).project_low(cut));
        worst = worst.max(xi.norm_l2());
    }
    Ok(worst)
}

/// Low-mode multiplier I + kappa0^2 mu P_N A^{-1} P_N: observed modes k != 0
/// pick up the factor 1 + mu/|k|^2.
fn eliminated_multiplier(u: &SpectralField, ncfg: &NudgeConfig) -> SpectralField {
    let mut out = u.clone();
    let cut = ncfg.cut;
    let mu = ncfg.mu;
    out.scale_modes(|k1, k2| {
        let ksq = (k1 * k1 + k2 * k2) as f64;
        if ksq > 0.0 && cut.is_low(k1, k2) {
            Complex64::new(1.0 + mu / ksq, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    out
}

/// Discrete residual of the eliminated stationary-in-t equation in w alone:
/// dw/ds + nu[A + kappa0^2 mu P_N]w + M B(w) = M f,  M = I + kappa0^2 mu P_N A^{-1} P_N,
/// evaluated at every node where the centered s-derivative exists.  The
/// second number cross-checks the algebraic elimination: it is
/// sup_s |nu^{-1} A^{-1} P_N (f - B(w)) - P_N w|, which vanishes for genuine
/// steady states.
pub fn stat_edriss_residual(w: &WSolution, ncfg: &NudgeConfig) -> Result<(f64, f64)> {
    let cfg = &ncfg.flow;
    let cut = ncfg.cut;
    let gain = ncfg.gain();
    let periodic = w.sgrid.is_periodic();
    let ds = w.sgrid.ds();
    let mf = eliminated_multiplier(&cfg.force, ncfg);
    let first = w.sgrid.first_kept_node();

    let mut residual: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    let mut nodes = 0usize;
    for i in first..w.values().len() {
        let wi = w.value(i);
        let bw = bilinear_self(wi)?;
        // elimination cross-check needs no s-derivative
        let v = cfg
            .force
            .sub(&bw)
            .apply_a(-1.0)
            .project_low(cut)
            .scaled(1.0 / cfg.nu);
        mismatch = mismatch.max(v.sub(&wi.project_low(cut)).norm_l2());

        let Some(dw) = field_s_derivative(w.values(), i, ds, periodic) else {
            continue;
        };
        nodes += 1;
        let mut res = dw;
        res.axpy(cfg.nu, &wi.apply_a(1.0));
        res.axpy(gain, &wi.project_low(cut));
        res = res.add(&eliminated_multiplier(&bw, ncfg)).sub(&mf);
        residual = residual.max(res.norm_l2());
    }
    if nodes == 0 {
        return Err(Error::Precondition(
            "no interior nodes for the s-derivative; widen the window".into(),
        ));
    }
    Ok((residual, mismatch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{steady_state_solve, step_nse, trajectory_samples, Integrator};
    use crate::spectral::{kolmogorov_force, random_divfree_field, GridSpec};

    fn grid() -> GridSpec {
        GridSpec::standard(32, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn kolmo_cfg(nu: f64, l2: f64, dt: f64) -> FlowConfig {
        let g = grid();
        let f = kolmogorov_force(g, 0, 2, l2);
        FlowConfig::new(nu, g, f, dt, Integrator::ExponentialIf).unwrap()
    }

    #[test]
    fn config_rejects_eigenvalue_collisions() {
        let cfg = kolmo_cfg(1.0, 4.0, 0.01);
        let cut = ModeCut::new(3, &grid()).unwrap();
        // 4 = 2^2, 100 = 6^2 + 8^2 are squared lattice norms; 3 and 100.5 miss
        assert!(NudgeConfig::new(4.0, cut, cfg.clone()).is_err());
        assert!(NudgeConfig::new(100.0, cut, cfg.clone()).is_err());
        assert!(NudgeConfig::new(3.0, cut, cfg.clone()).is_ok());
        assert!(NudgeConfig::new(100.5, cut, cfg.clone()).is_ok());
        assert!(NudgeConfig::new(-1.0, cut, cfg.clone()).is_err());
        assert!(NudgeConfig::new(f64::NAN, cut, cfg).is_err());
    }

    #[test]
    fn config_flags() {
        let cfg = kolmo_cfg(1.0, 1.0, 0.01); // G = 1
        let cut = ModeCut::new(3, &grid()).unwrap();
        let nc = NudgeConfig::new(2.5, cut, cfg.clone()).unwrap();
        assert!((nc.alpha - 4.0).abs() < 1e-12); // 1 - 2 + 5
        assert!(nc.alpha_ok);
        assert!(nc.mu_scale_ok); // 2.5/16 <= 1/4
        let nc = NudgeConfig::new(4.5, cut, cfg).unwrap();
        assert!(!nc.mu_scale_ok); // 4.5/16 > 1/4
        // large G at mu = 0: margin goes negative
        let nc = NudgeConfig::new(0.0, cut, kolmo_cfg(1.0, 4.0, 0.01)).unwrap();
        assert!(!nc.alpha_ok);
    }

    #[test]
    fn mu_zero_reduces_to_plain_flow_bitwise() {
        let cfg = kolmo_cfg(0.05, 0.02, 0.01);
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let nc = NudgeConfig::new(0.0, cut, cfg.clone()).unwrap();
        let sg = SGrid::windowed(0.0, 0.1, 0.01, 0.0).unwrap();
        let obs = ModalTrajectory::constant(sg, cut, &SpectralField::zeros(g)).unwrap();
        let w0 = random_divfree_field(11, 2.0, g, None).scaled(0.1);
        let (wn, _) = nudge_integrate(&obs, &w0, &nc, None).unwrap();
        let mut u = w0;
        for _ in 0..sg.node_count() - 1 {
            u = step_nse(&u, &cfg).unwrap();
        }
        assert_eq!(wn, u);
    }

    /// Worst |delta| over a synchronized-start run at the given hold interval.
    fn sync_drift(ds: f64) -> f64 {
        let dt = 0.005;
        let cfg = kolmo_cfg(1.0, 1.0, dt);
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let u0 = random_divfree_field(5, 3.0, g, None).scaled(0.05);
        let every = (ds / dt).round() as usize;
        let n_samples = (0.4 / ds).round() as usize + 1;
        let refs = trajectory_samples(&u0, &cfg, n_samples, every).unwrap();
        let sg = SGrid::windowed(0.0, ds * (n_samples as f64 - 1.0), ds, 0.0).unwrap();
        let obs: Vec<_> = refs.iter().map(|u| u.project_low(cut)).collect();
        let v = ModalTrajectory::new(sg, cut, obs).unwrap();
        let nc = NudgeConfig::new(5.5, cut, cfg).unwrap();
        let (_, series) = nudge_integrate(&v, &refs[0], &nc, Some(&refs)).unwrap();
        series.l2.iter().copied().fold(0.0, f64::max)
    }

    #[test]
    fn synchronized_start_drift_is_hold_order() {
        // exact initial state: the residual error is the zero-order-hold
        // error of the observations, first order in ds
        let coarse = sync_drift(0.02);
        let fine = sync_drift(0.01);
        assert!(coarse <= 0.05, "coarse drift {coarse}");
        assert!(
            fine <= 0.7 * coarse,
            "drift not first order in the hold: {fine} vs {coarse}"
        );
    }

    #[test]
    fn nudging_synchronizes_from_zero() {
        // G = 1: the synchronization margin holds with room at mu = 3.5
        let g = GridSpec::standard(16, 2.0 * std::f64::consts::PI).unwrap();
        let f = kolmogorov_force(g, 0, 2, 1.0);
        let cfg = FlowConfig::new(1.0, g, f, 0.005, Integrator::ExponentialIf).unwrap();
        let cut = ModeCut::new(3, &g).unwrap();
        let u0 = random_divfree_field(9, 2.0, g, None).scaled(0.3);
        let n_samples = 4001;
        let refs = trajectory_samples(&u0, &cfg, n_samples, 1).unwrap();
        let sg = SGrid::windowed(0.0, 0.005 * (n_samples as f64 - 1.0), 0.005, 0.0).unwrap();
        let obs: Vec<_> = refs.iter().map(|u| u.project_low(cut)).collect();
        let v = ModalTrajectory::new(sg, cut, obs).unwrap();
        let nc = NudgeConfig::new(3.5, cut, cfg).unwrap();
        assert!(nc.alpha_ok);
        let (_, series) = nudge_integrate(&v, &SpectralField::zeros(g), &nc, Some(&refs)).unwrap();
        let slope = fit_decay_slope(&series).expect("decay window should be populated");
        assert!(slope < 0.0, "fitted slope {slope} not negative");
        let tail = *series.l2.last().unwrap();
        assert!(tail <= 1e-8, "final synchronization error {tail}");
    }

    #[test]
    fn decay_fit_recovers_exact_exponential() {
        let mut s = DeltaSeries::default();
        for i in 0..200 {
            let t = 0.05 * i as f64;
            let d = (-1.7 * t).exp();
            s.s.push(t);
            s.l2.push(d.max(1e-14));
            s.h1.push(d);
        }
        let slope = fit_decay_slope(&s).unwrap();
        assert!((slope + 1.7).abs() < 1e-6, "slope {slope}");
    }

    #[test]
    fn w_tilde_reconstructs_steady_state() {
        let cfg = kolmo_cfg(1.0, 4.0, 0.01);
        let (ustar, _) = steady_state_solve(&cfg, 1e-12, 1.0).unwrap();
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let nc = NudgeConfig::new(5.5, cut, cfg).unwrap();
        for sg in [
            SGrid::periodic(2.0, 0.25).unwrap(),
            SGrid::windowed(0.0, 12.0, 0.05, 8.0).unwrap(),
        ] {
            let v = ModalTrajectory::constant(sg, cut, &ustar.project_low(cut)).unwrap();
            let w = w_tilde_solve(&v, &nc, 1e-12, false).unwrap();
            assert!(w.converged);
            for wi in w.kept() {
                assert!(
                    wi.sub(&ustar).norm_l2() <= 1e-8,
                    "full-field reconstruction off by {}",
                    wi.sub(&ustar).norm_l2()
                );
            }
            let (sup, bound) = w_tilde_bound_check(&v, &w, &nc);
            assert!(sup <= bound, "a-priori bound violated: {sup} > {bound}");
        }
    }

    #[test]
    fn w_tilde_small_mu_steady_bound() {
        // v = 0 with an eigenfunction force: w relaxes toward the damped
        // steady state and obeys ||w|| <= |f|/(nu kappa0).
        let cfg = kolmo_cfg(1.0, 0.4, 0.01);
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let nc = NudgeConfig::new(0.5, cut, cfg.clone()).unwrap();
        let sg = SGrid::periodic(2.0, 0.25).unwrap();
        let v = ModalTrajectory::constant(sg, cut, &SpectralField::zeros(g)).unwrap();
        let w = w_tilde_solve(&v, &nc, 1e-12, false).unwrap();
        let (sup, bound) = w_tilde_bound_check(&v, &w, &nc);
        assert!(sup <= bound);
        assert!((bound - cfg.force.norm_l2()).abs() < 1e-12); // nu kappa0 = 1, v = 0
        // force on |k| = 2, feedback shifts the damping: |w| = |f|/(nu kappa0^2(4 + mu))
        let expect = cfg.force.norm_l2() / 4.5;
        assert!((w.sup_l2() - expect).abs() <= 1e-10);
    }

    #[test]
    fn detform2_zero_at_steady_projection() {
        let cfg = kolmo_cfg(1.0, 4.0, 0.01);
        let (ustar, _) = steady_state_solve(&cfg, 1e-12, 1.0).unwrap();
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let nc = NudgeConfig::new(5.5, cut, cfg).unwrap();
        let sg = SGrid::periodic(2.0, 0.25).unwrap();
        let v = ModalTrajectory::constant(sg, cut, &ustar.project_low(cut)).unwrap();
        let rhs = detform2_rhs(&v, &nc, 1e-12, false).unwrap();
        assert!(rhs.norm_y() <= 1e-8, "steady rhs {}", rhs.norm_y());
        // constant-in-s input gives constant-in-s output bitwise
        for out in rhs.values().iter().skip(1) {
            assert_eq!(out, rhs.value(0));
        }
    }

    #[test]
    fn detform2_shift_equivariance_bitwise() {
        let cfg = kolmo_cfg(1.0, 4.0, 0.01);
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let nc = NudgeConfig::new(2.5, cut, cfg).unwrap();
        let sg = SGrid::periodic(1.6, 0.2).unwrap();
        let base = random_divfree_field(13, 1.5, g, Some(cut));
        let values: Vec<_> = (0..sg.node_count())
            .map(|i| base.scaled(0.05 * (1.0 + 0.3 * (i as f64).sin())))
            .collect();
        let v = ModalTrajectory::new(sg, cut, values).unwrap();
        let rhs = detform2_rhs(&v, &nc, 1e-11, false).unwrap();
        let nn = sg.node_count() as i64;
        for shift in [1_i64, 3] {
            let rs = detform2_rhs(&v.shift_nodes(shift).unwrap(), &nc, 1e-11, false).unwrap();
            for i in 0..nn {
                let expect = rhs.value(((i + shift).rem_euclid(nn)) as usize);
                assert_eq!(rs.value(i as usize), expect, "shift {shift}, node {i}");
            }
        }
    }

    #[test]
    fn xi_vanishes_at_steady_and_flags_desync() {
        let cfg = kolmo_cfg(1.0, 4.0, 0.01);
        let (ustar, _) = steady_state_solve(&cfg, 1e-12, 1.0).unwrap();
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let nc = NudgeConfig::new(5.5, cut, cfg).unwrap();
        let sg = SGrid::periodic(2.0, 0.25).unwrap();
        let v = ModalTrajectory::constant(sg, cut, &ustar.project_low(cut)).unwrap();
        let w = w_tilde_solve(&v, &nc, 1e-12, false).unwrap();
        assert!(xi_decay_check(&v, &w, &nc).unwrap() <= 1e-8);
        // desynchronized pair: shrink the low-mode data, keep w
        let v2 = ModalTrajectory::constant(sg, cut, &ustar.project_low(cut).scaled(0.5)).unwrap();
        assert!(xi_decay_check(&v2, &w, &nc).unwrap() > 1e-3);
    }

    #[test]
    fn eliminated_stationary_equation_certifies_steady_state() {
        let cfg = kolmo_cfg(1.0, 4.0, 0.01);
        let (ustar, _) = steady_state_solve(&cfg, 1e-12, 1.0).unwrap();
        let g = grid();
        let cut = ModeCut::new(3, &g).unwrap();
        let nc = NudgeConfig::new(5.5, cut, cfg.clone()).unwrap();
        for sg in [
            SGrid::periodic(2.0, 0.25).unwrap(),
            SGrid::windowed(0.0, 1.0, 0.25, 0.0).unwrap(),
        ] {
            let values = vec![ustar.clone(); sg.node_count()];
            let w = WSolution::new(sg, None, values, true, 1).unwrap();
            let (res, mism) = stat_edriss_residual(&w, &nc).unwrap();
            assert!(res <= 1e-9, "residual {res}");
            assert!(mism <= 1e-9, "elimination mismatch {mism}");
        }
        // w = 0 is not a solution: residual equals the lifted force norm
        let sg = SGrid::periodic(2.0, 0.25).unwrap();
        let zeros = vec![SpectralField::zeros(g); sg.node_count()];
        let w0 = WSolution::new(sg, None, zeros, true, 1).unwrap();
        let (res, _) = stat_edriss_residual(&w0, &nc).unwrap();
        let expect = eliminated_multiplier(&cfg.force, &nc).norm_l2();
        assert!((res - expect).abs() <= 1e-12 && res > 0.0);
    }
}
