//! Pseudospectral bilinear term and seeded field generation.

use super::fft::{analyze, synthesize};
use super::field::{wavenumber, GridSpec, ModeCut, SpectralField};
use crate::error::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Physical-space samples of one coefficient table (real parts).
fn to_physical(coeffs: &[Complex64], n: usize) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    synthesize(&mut buf, n);
    buf.iter().map(|c| c.re).collect()
}

/// B(u, v) = P((u . grad) v), computed pseudospectrally with the grid's
/// dealiasing rule applied before and after the physical-space product.
pub fn bilinear(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.same_grid(v)?;
    let grid = *u.grid();
    let n = grid.resolution();
    let k0 = grid.kappa0();

    let mut ud = u.clone();
    ud.dealias();
    let mut vd = v.clone();
    vd.dealias();

    let u1 = to_physical(&ud.ux, n);
    let u2 = to_physical(&ud.uy, n);

    // derivative d v_c / d x_m in spectral space: i kappa0 k_m v_c
    let deriv = |coeffs: &[Complex64], axis: usize| -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        for i in 0..n {
            let k1 = wavenumber(i, n) as f64;
            for j in 0..n {
                let k2 = wavenumber(j, n) as f64;
                let km = if axis == 0 { k1 } else { k2 };
                buf[i * n + j] *= Complex64::new(0.0, k0 * km);
            }
        }
        to_physical(&buf, n)
    };

    let dv1_dx = deriv(&vd.ux, 0);
    let dv1_dy = deriv(&vd.ux, 1);
    let dv2_dx = deriv(&vd.uy, 0);
    let dv2_dy = deriv(&vd.uy, 1);

    let mut w1 = vec![Complex64::new(0.0, 0.0); n * n];
    let mut w2 = vec![Complex64::new(0.0, 0.0); n * n];
    for idx in 0..n * n {
        w1[idx] = Complex64::new(u1[idx] * dv1_dx[idx] + u2[idx] * dv1_dy[idx], 0.0);
        w2[idx] = Complex64::new(u1[idx] * dv2_dx[idx] + u2[idx] * dv2_dy[idx], 0.0);
    }
    analyze(&mut w1, n);
    analyze(&mut w2, n);

    let mut out = SpectralField::zeros(grid);
    out.ux = w1;
    out.uy = w2;
    out.dealias();
    out.leray_project();
    Ok(out)
}

/// Shorthand B(u) = B(u, u).
pub fn bilinear_self(u: &SpectralField) -> Result<SpectralField> {
    bilinear(u, u)
}

/// Deterministic divergence-free test field with |k|^(-decay) spectral
/// envelope; supported on |k| <= N when a cut is given, otherwise on the
/// dealiased disk.
pub fn random_divfree_field(
    seed: u64,
    decay: f64,
    grid: GridSpec,
    cut: Option<ModeCut>,
) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid);
    let kmax = grid.dealias_max();
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            // one representative per conjugate pair
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let ksq = k1 * k1 + k2 * k2;
            if ksq > kmax * kmax {
                continue;
            }
            if let Some(c) = cut {
                if !c.is_low(k1, k2) {
                    continue;
                }
            }
            let knorm = (ksq as f64).sqrt();
            let amp = knorm.powf(-decay);
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            let a = Complex64::new(re, im) * amp;
            // direction orthogonal to k keeps the field divergence-free
            let e1 = -(k2 as f64) / knorm;
            let e2 = k1 as f64 / knorm;
            f.set_mode_pair(k1, k2, a * e1, a * e2);
        }
    }
    f
}

/// Single-shear Kolmogorov eigenfunction force on the mode pair +/- k with
/// the given L^2 norm |f|: f = amplitude * cos(kappa0 k.x) e, e ⟂ k.
pub fn kolmogorov_force(grid: GridSpec, k1: i64, k2: i64, l2_norm: f64) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    let knorm = ((k1 * k1 + k2 * k2) as f64).sqrt();
    assert!(knorm > 0.0, "forcing wavevector must be nonzero");
    // cos gives coefficient a/2 at +/- k; |f| = L sqrt(2) |f_k|
    let coeff = l2_norm / (grid.box_length() * 2.0f64.sqrt());
    let e1 = -(k2 as f64) / knorm;
    let e2 = k1 as f64 / knorm;
    f.set_mode_pair(
        k1,
        k2,
        Complex64::new(coeff * e1, 0.0),
        Complex64::new(coeff * e2, 0.0),
    );
    f
}
