//! Closed-form thresholds and radii for the low-mode/high-mode splitting:
//! the Grashof number, beta(G, N), absorbing radii, Lipschitz constants and
//! every N-vs-G admissibility condition, evaluated literally.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Absolute constants from the interpolation inequalities.  Their true values
/// are not pinned down; every bound below is parametric in them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c_t: f64,
    pub c_b: f64,
    pub c_l: f64,
    pub c_a: f64,
    /// Traveling-wave threshold constant; the self-consistency requirement is
    /// c_t_prime >= 72 c_t^2 + 11 c_t.
    pub c_t_prime: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c_t: 1.0,
            c_b: 1.0,
            c_l: 1.0,
            c_a: 1.0,
            c_t_prime: 83.0,
        }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.c_t, self.c_b, self.c_l, self.c_a, self.c_t_prime];
        if all.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidConfig(
                "all inequality constants must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// ln(eN) = 1 + ln N.
pub fn ln_e_n(n: u32) -> f64 {
    1.0 + (n as f64).ln()
}

/// beta(G, N) = (9 c_T G (ln eN)^{1/2} + |h|/|f|) / (N - 3 c_L G).
/// Defined only when N > 3 c_L G.
pub fn beta(g: f64, n: u32, ratio_hf: f64, k: &Constants) -> Result<f64> {
    let den = n as f64 - 3.0 * k.c_l * g;
    if !(den > 0.0) {
        return Err(Error::UndefinedBound(format!(
            "beta needs N > 3 c_L G; got N = {n}, 3 c_L G = {}",
            3.0 * k.c_l * g
        )));
    }
    Ok((9.0 * k.c_t * g * ln_e_n(n).sqrt() + ratio_hf) / den)
}

/// Smallest integer N with N > c_L G (the determining-mode threshold).
pub fn min_determining_n(g: f64, k: &Constants) -> u32 {
    let x = k.c_l * g;
    let n = x.floor() + 1.0;
    n.max(1.0) as u32
}

/// Inputs for the full condition report.  Ratios are |h|/|f| and |g|/|f|
/// where g = P_N f and h = Q_N f.
#[derive(Debug, Clone, Copy)]
pub struct BoundsInput {
    pub g: f64,
    pub n: u32,
    pub ratio_hf: f64,
    pub ratio_gf: f64,
    pub nu: f64,
    pub kappa0: f64,
    /// ||h|| = |A^{1/2} Q_N f|, used only by the |Aw| bound.
    pub h_h1: f64,
    /// Initial enstrophy ||u_0||^2 for the absorption time.
    pub u0_h1: f64,
    pub mu: Option<f64>,
    /// Exponent in the large-N condition N >= (6 c_T G (ln eN)^{1/2})^gamma.
    pub gamma: f64,
    /// Epsilon in the stationary-threshold condition N > eps G^2 (ln eN)^{1/2}.
    pub epsilon: f64,
    pub constants: Constants,
}

impl BoundsInput {
    pub fn new(g: f64, n: u32) -> Self {
        Self {
            g,
            n,
            ratio_hf: 1.0,
            ratio_gf: 1.0,
            nu: 1.0,
            kappa0: 1.0,
            h_h1: 0.0,
            u0_h1: 0.0,
            mu: None,
            gamma: 2.0,
            epsilon: 1.0,
            constants: Constants::default(),
        }
    }
}

/// Pass/fail flags for every admissibility condition, strict inequalities
/// exactly as printed (ties on strict conditions evaluate false).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionFlags {
    /// N > c_L G (determining modes).
    pub determining: bool,
    /// N > 3 c_L G (beta well-defined).
    pub gn1: bool,
    /// N > c_L G (3 + beta).
    pub gn2: bool,
    /// N > G (3 + beta)(c_A + c_L).
    pub gn3: bool,
    /// N > G (9 + beta)(c_A + c_L); implies gn1, gn2, gn3 and bound_a_n.
    pub gn4: bool,
    /// N > c_L G (9 + beta) (|Aw| bound).
    pub bound_a_n: bool,
    /// N > c_B G beta (ln eN)^{1/2} (low-mode absorbing estimate).
    pub low_mode_absorbing: bool,
    /// N >= (6 c_T G (ln eN)^{1/2})^gamma.
    pub big_n: bool,
    /// N >= c'_T G beta ln eN (traveling-wave threshold).
    pub traveling_wave: bool,
    /// N > 2 c_T G beta (ln eN)^{1/2}.
    pub stationary1: bool,
    /// N^2 > 2G(c_T c1 (ln eN)^{1/2} + c_L) and
    /// N > 2 c_T c1 (G + c_T (ln eN)^{1/2} G^2 (6+beta) beta + G beta).
    pub stationary2: bool,
    /// N > eps G^2 (ln eN)^{1/2}.
    pub stationary_final: bool,
    /// alpha = 1 - 2 c_L^2 G^2 + 2 mu > 0 (requires mu).
    pub mu_damping: Option<bool>,
    /// mu / (N+1)^2 <= 1/4 (requires mu).
    pub mu_scale: Option<bool>,
}

/// Every explicit bound and threshold evaluated at one (G, N) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub g: f64,
    pub n: u32,
    /// beta(G, N); None when N <= 3 c_L G.
    pub beta: Option<f64>,
    /// Absorbing radius in X for the trajectory equation.
    pub r0: Option<f64>,
    /// Low-mode absorbing radius |v| bound; None unless its denominator is
    /// positive.
    pub v_radius: Option<f64>,
    /// Lipschitz constant of the high-mode map; None unless gn3 holds.
    pub l_w: Option<f64>,
    /// |Aw| bound; None unless bound_a_n holds.
    pub gamma_aw: Option<f64>,
    /// alpha = 1 - 2 c_L^2 G^2 + 2 mu; None when mu absent.
    pub alpha: Option<f64>,
    pub t_abs: f64,
    pub flags: ConditionFlags,
}

/// Absorption time T = (1/(nu kappa0^2)) max{1, ln(||u0||^2 / (3 nu^2 kappa0^2 G^2))}.
pub fn absorption_time(u0_h1: f64, g: f64, nu: f64, kappa0: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::UndefinedBound("absorption time needs G > 0".into()));
    }
    let rate = nu * kappa0 * kappa0;
    let level = 3.0 * nu * nu * kappa0 * kappa0 * g * g;
    let arg = u0_h1 * u0_h1 / level;
    Ok((1.0_f64.max(arg.ln())) / rate)
}

/// Absorbing radius r0 = nu kappa0 G [ |g|/|f| + c_T (ln eN)^{1/2} G (6+beta) beta ].
pub fn absorbing_radius(inp: &BoundsInput) -> Result<f64> {
    let k = &inp.constants;
    let b = beta(inp.g, inp.n, inp.ratio_hf, k)?;
    Ok(inp.nu
        * inp.kappa0
        * inp.g
        * (inp.ratio_gf + k.c_t * ln_e_n(inp.n).sqrt() * inp.g * (6.0 + b) * b))
}

/// Full literal evaluation of every condition and derived quantity.
pub fn check_conditions(inp: &BoundsInput) -> BoundsReport {
    let k = inp.constants;
    let g = inp.g;
    let nf = inp.n as f64;
    let le = ln_e_n(inp.n);
    let sle = le.sqrt();

    let beta_opt = beta(g, inp.n, inp.ratio_hf, &k).ok();

    let determining = nf > k.c_l * g;
    let gn1 = nf > 3.0 * k.c_l * g;
    let mut flags = ConditionFlags {
        determining,
        gn1,
        gn2: false,
        gn3: false,
        gn4: false,
        bound_a_n: false,
        low_mode_absorbing: false,
        big_n: nf >= (6.0 * k.c_t * g * sle).powf(inp.gamma),
        traveling_wave: false,
        stationary1: false,
        stationary2: false,
        stationary_final: nf > inp.epsilon * g * g * sle,
        mu_damping: None,
        mu_scale: None,
    };

    let mut r0 = None;
    let mut v_radius = None;
    let mut l_w = None;
    let mut gamma_aw = None;

    if let Some(b) = beta_opt {
        flags.gn2 = nf > k.c_l * g * (3.0 + b);
        flags.gn3 = nf > g * (3.0 + b) * (k.c_a + k.c_l);
        flags.gn4 = nf > g * (9.0 + b) * (k.c_a + k.c_l);
        flags.bound_a_n = nf > k.c_l * g * (9.0 + b);
        flags.low_mode_absorbing = nf > k.c_b * g * b * sle;
        flags.traveling_wave = nf >= k.c_t_prime * g * b * le;
        flags.stationary1 = nf > 2.0 * k.c_t * g * b * sle;
        let c1 = 2.0 * sle * (g / nf) * (k.c_t * b + k.c_b / nf);
        flags.stationary2 = nf * nf > 2.0 * g * (k.c_t * c1 * sle + k.c_l)
            && nf > 2.0 * k.c_t * c1 * (g + k.c_t * sle * g * g * (6.0 + b) * b + g * b);

        r0 = Some(
            inp.nu * inp.kappa0 * g * (inp.ratio_gf + k.c_t * sle * g * (6.0 + b) * b),
        );
        let vden = 1.0 - k.c_b * g * b * sle / nf;
        if vden > 0.0 {
            v_radius =
                Some(inp.nu * g * (inp.ratio_gf + k.c_l * g * b * b / nf) / vden);
        }
        let lden = nf - g * (3.0 + b) * (k.c_a + k.c_l);
        if lden > 0.0 {
            l_w = Some(4.0 * g * (3.0 + b) * sle * (k.c_t + k.c_b) / lden);
        }
        let gden = nf - k.c_l * g * (9.0 + b);
        if gden > 0.0 {
            gamma_aw = Some(
                (inp.h_h1
                    + 9.0
                        * inp.nu
                        * inp.nu
                        * inp.kappa0.powi(3)
                        * g
                        * g
                        * nf
                        * (k.c_t * sle + k.c_l))
                    / (inp.nu * inp.kappa0 * gden),
            );
        }
    }

    let alpha = inp.mu.map(|mu| 1.0 - 2.0 * k.c_l * k.c_l * g * g + 2.0 * mu);
    if let Some(mu) = inp.mu {
        flags.mu_damping = Some(alpha.unwrap() > 0.0);
        flags.mu_scale = Some(mu / ((nf + 1.0) * (nf + 1.0)) <= 0.25);
    }

    let t_abs = absorption_time(inp.u0_h1, g, inp.nu, inp.kappa0).unwrap_or(f64::INFINITY);

    BoundsReport {
        g,
        n: inp.n,
        beta: beta_opt,
        r0,
        v_radius,
        l_w,
        gamma_aw,
        alpha,
        t_abs,
        flags,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.17e}"),
        None => "undefined".into(),
    }
}

fn fmt_opt_flag(v: Option<bool>) -> String {
    match v {
        Some(b) => b.to_string(),
        None => "n/a".into(),
    }
}

impl BoundsReport {
    /// Flat key=value block (one entry per line).
    pub fn to_key_values(&self) -> String {
        let f = &self.flags;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("G", format!("{:.17e}", self.g));
        kv("N", self.n.to_string());
        kv("beta", fmt_opt(self.beta));
        kv("r0", fmt_opt(self.r0));
        kv("v_radius", fmt_opt(self.v_radius));
        kv("L_W", fmt_opt(self.l_w));
        kv("Gamma", fmt_opt(self.gamma_aw));
        kv("alpha", fmt_opt(self.alpha));
        kv("T_abs", format!("{:.17e}", self.t_abs));
        kv("cond_determining", f.determining.to_string());
        kv("cond_gn1", f.gn1.to_string());
        kv("cond_gn2", f.gn2.to_string());
        kv("cond_gn3", f.gn3.to_string());
        kv("cond_gn4", f.gn4.to_string());
        kv("cond_bound_a_n", f.bound_a_n.to_string());
        kv("cond_low_mode_absorbing", f.low_mode_absorbing.to_string());
        kv("cond_big_n", f.big_n.to_string());
        kv("cond_traveling_wave", f.traveling_wave.to_string());
        kv("cond_stationary1", f.stationary1.to_string());
        kv("cond_stationary2", f.stationary2.to_string());
        kv("cond_stationary_final", f.stationary_final.to_string());
        kv("cond_mu_damping", fmt_opt_flag(f.mu_damping));
        kv("cond_mu_scale", fmt_opt_flag(f.mu_scale));
        s
    }

    pub fn csv_header() -> &'static str {
        "G,N,beta,r0,v_radius,L_W,Gamma,alpha,T_abs,determining,gn1,gn2,gn3,gn4,\
         bound_a_n,low_mode_absorbing,big_n,traveling_wave,stationary1,stationary2,\
         stationary_final,mu_damping,mu_scale"
    }

    pub fn csv_row(&self) -> String {
        let f = &self.flags;
        format!(
            "{:.17e},{},{},{},{},{},{},{},{:.17e},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.g,
            self.n,
            fmt_opt(self.beta),
            fmt_opt(self.r0),
            fmt_opt(self.v_radius),
            fmt_opt(self.l_w),
            fmt_opt(self.gamma_aw),
            fmt_opt(self.alpha),
            self.t_abs,
            f.determining,
            f.gn1,
            f.gn2,
            f.gn3,
            f.gn4,
            f.bound_a_n,
            f.low_mode_absorbing,
            f.big_n,
            f.traveling_wave,
            f.stationary1,
            f.stationary2,
            f.stationary_final,
            fmt_opt_flag(f.mu_damping),
            fmt_opt_flag(f.mu_scale),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_hand_value() {
        // (9 sqrt(1 + ln 10) + 1) / (10 - 3)
        let k = Constants::default();
        let expect = (9.0 * (1.0 + 10.0f64.ln()).sqrt() + 1.0) / 7.0;
        let got = beta(1.0, 10, 1.0, &k).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn beta_small_g_limit() {
        let k = Constants::default();
        let got = beta(1e-14, 10, 1.0, &k).unwrap();
        assert!((got - 0.1).abs() < 1e-12);
    }

    #[test]
    fn beta_zero_denominator_is_error() {
        let k = Constants::default();
        assert!(beta(2.0, 6, 1.0, &k).is_err()); // N = 3 c_L G exactly
        assert!(beta(3.0, 6, 1.0, &k).is_err());
    }

    #[test]
    fn min_determining_n_values() {
        let k = Constants::default();
        assert_eq!(min_determining_n(5.0, &k), 6);
        assert_eq!(min_determining_n(5.5, &k), 6);
        assert_eq!(min_determining_n(0.2, &k), 1);
        let k2 = Constants {
            c_l: 2.0,
            ..Constants::default()
        };
        assert_eq!(min_determining_n(5.0, &k2), 11);
    }

    #[test]
    fn gn4_hand_case() {
        // G = 1, N = 100: beta = (9 sqrt(1+ln 100) + 1)/97 and
        // gn4 needs N > (9 + beta) * 2 which is about 18.5.
        let rep = check_conditions(&BoundsInput::new(1.0, 100));
        let b = rep.beta.unwrap();
        let expect = (9.0 * (1.0 + 100.0f64.ln()).sqrt() + 1.0) / 97.0;
        assert!((b - expect).abs() < 1e-15);
        assert!(rep.flags.gn4);
        assert!(rep.flags.gn1 && rep.flags.gn2 && rep.flags.gn3 && rep.flags.bound_a_n);
    }

    #[test]
    fn mu_conditions_hand_case() {
        let mut inp = BoundsInput::new(1.0, 2);
        inp.mu = Some(2.0);
        let rep = check_conditions(&inp);
        assert!((rep.alpha.unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(rep.flags.mu_damping, Some(true));
        // mu / (N+1)^2 = 2/9 <= 1/4
        assert_eq!(rep.flags.mu_scale, Some(true));
    }

    #[test]
    fn absorbing_radius_limits() {
        // beta -> 0 (G tiny): r0 -> nu kappa0 G ratio_gf.
        let mut inp = BoundsInput::new(1e-12, 10);
        inp.ratio_gf = 2.0;
        let r0 = absorbing_radius(&inp).unwrap();
        assert!((r0 / (1e-12 * 2.0) - 1.0).abs() < 1e-9);

        // hand chain at G = 1, N = 100
        let inp = BoundsInput::new(1.0, 100);
        let b = beta(1.0, 100, 1.0, &inp.constants).unwrap();
        let expect = 1.0 + (1.0 + 100.0f64.ln()).sqrt() * (6.0 + b) * b;
        assert!((absorbing_radius(&inp).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn absorption_time_values() {
        // clamped branch
        assert!((absorption_time(0.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        // ||u0||^2 = 3e at nu = kappa0 = G = 1: ln(e) = 1 -> T = 1
        let u0 = (3.0 * std::f64::consts::E).sqrt();
        assert!((absorption_time(u0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // monotone in ||u0||
        let a = absorption_time(10.0, 1.0, 1.0, 1.0).unwrap();
        let b = absorption_time(20.0, 1.0, 1.0, 1.0).unwrap();
        assert!(b > a);
        assert!(absorption_time(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn report_is_bit_reproducible() {
        let mut inp = BoundsInput::new(3.7, 40);
        inp.mu = Some(31.5);
        let a = check_conditions(&inp);
        let b = check_conditions(&inp);
        assert_eq!(a.csv_row(), b.csv_row());
        assert_eq!(a.to_key_values(), b.to_key_values());
    }

    #[test]
    fn beta_decreasing_in_n() {
        let k = Constants::default();
        let mut prev = f64::INFINITY;
        for n in 7..200 {
            let b = beta(2.0, n, 1.0, &k).unwrap();
            assert!(b < prev, "beta not decreasing at N = {n}");
            prev = b;
        }
    }
}
