use crate::error::{Error, Result};
use num_complex::Complex64;

/// Periodic box discretization: n x n collocation points on [0, L]^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    resolution: usize,
    box_length: f64,
    dealias_fraction: f64,
}

impl GridSpec {
    pub fn new(resolution: usize, box_length: f64, dealias_fraction: f64) -> Result<Self> {
        if resolution < 8 || resolution % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "resolution must be even and >= 8, got {resolution}"
            )));
        }
        if !(box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias fraction must be in (0, 1], got {dealias_fraction}"
            )));
        }
        Ok(Self {
            resolution,
            box_length,
            dealias_fraction,
        })
    }

    /// 2/3-rule grid with box length L.
    pub fn standard(resolution: usize, box_length: f64) -> Result<Self> {
        Self::new(resolution, box_length, 2.0 / 3.0)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// kappa_0 = 2 pi / L, the lowest wavenumber.
    pub fn kappa0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    /// Largest retained wavenumber component: modes with any |k_i| above this
    /// are zeroed by the dealiasing rule.
    pub fn dealias_max(&self) -> i64 {
        // Nyquist column is always dropped, independent of the fraction.
        let m = (self.resolution as f64 * self.dealias_fraction / 2.0).floor() as i64;
        m.min(self.resolution as i64 / 2 - 1)
    }
}

/// Low-mode cutoff: P_N keeps wavevectors with |k| <= N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeCut {
    n: u32,
}

impl ModeCut {
    pub fn new(n: u32, grid: &GridSpec) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidCut("N must be >= 1".into()));
        }
        if (n as i64) >= grid.dealias_max() {
            return Err(Error::InvalidCut(format!(
                "N = {n} must lie strictly below the dealiasing radius {}",
                grid.dealias_max()
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// |k|^2 <= N^2 test.
    pub fn is_low(&self, k1: i64, k2: i64) -> bool {
        k1 * k1 + k2 * k2 <= (self.n as i64) * (self.n as i64)
    }
}

/// Divergence-free, zero-mean velocity field stored as Fourier coefficients
/// in FFT index layout (row i carries k1 = i for i <= n/2, i - n otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    /// First velocity component coefficients, n*n row-major.
    pub(crate) ux: Vec<Complex64>,
    /// Second velocity component coefficients, n*n row-major.
    pub(crate) uy: Vec<Complex64>,
}

pub(crate) fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n2 = grid.resolution() * grid.resolution();
        Self {
            grid,
            ux: vec![Complex64::new(0.0, 0.0); n2],
            uy: vec![Complex64::new(0.0, 0.0); n2],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn index_of(&self, k1: i64, k2: i64) -> Option<usize> {
        let n = self.grid.resolution() as i64;
        if k1.abs() > n / 2 || k2.abs() > n / 2 {
            return None;
        }
        let i = if k1 >= 0 { k1 } else { k1 + n } as usize;
        let j = if k2 >= 0 { k2 } else { k2 + n } as usize;
        Some(i * n as usize + j)
    }

    pub fn coefficient(&self, k1: i64, k2: i64) -> (Complex64, Complex64) {
        match self.index_of(k1, k2) {
            Some(idx) => (self.ux[idx], self.uy[idx]),
            None => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        }
    }

    /// Sets u_k and its conjugate partner u_{-k} = conj(u_k).
    pub fn set_mode_pair(&mut self, k1: i64, k2: i64, ux: Complex64, uy: Complex64) {
        if k1 == 0 && k2 == 0 {
            return;
        }
        if let Some(idx) = self.index_of(k1, k2) {
            self.ux[idx] = ux;
            self.uy[idx] = uy;
        }
        if let Some(idx) = self.index_of(-k1, -k2) {
            self.ux[idx] = ux.conj();
            self.uy[idx] = uy.conj();
        }
    }

    /// Iterates (k1, k2, flat index) over all stored modes.
    pub fn modes(&self) -> impl Iterator<Item = (i64, i64, usize)> + '_ {
        let n = self.grid.resolution();
        (0..n).flat_map(move |i| {
            let k1 = wavenumber(i, n);
            (0..n).map(move |j| (k1, wavenumber(j, n), i * n + j))
        })
    }

    /// Applies a per-mode complex multiplier m(k1, k2) to both components.
    pub fn scale_modes(&mut self, mut m: impl FnMut(i64, i64) -> Complex64) {
        let n = self.grid.resolution();
        for i in 0..n {
            let k1 = wavenumber(i, n);
            for j in 0..n {
                let k2 = wavenumber(j, n);
                let f = m(k1, k2);
                let idx = i * n + j;
                self.ux[idx] *= f;
                self.uy[idx] *= f;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.ux.iter_mut().chain(self.uy.iter_mut()) {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// self += c * other.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.ux.iter_mut().zip(other.ux.iter()) {
            *a += c * b;
        }
        for (a, b) in self.uy.iter_mut().zip(other.uy.iter()) {
            *a += c * b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Helmholtz-Leray projection: u_k -> u_k - k (k.u_k)/|k|^2, u_0 -> 0.
    pub fn leray_project(&mut self) {
        let n = self.grid.resolution();
        for i in 0..n {
            let k1 = wavenumber(i, n) as f64;
            for j in 0..n {
                let k2 = wavenumber(j, n) as f64;
                let idx = i * n + j;
                let ksq = k1 * k1 + k2 * k2;
                if ksq == 0.0 {
                    self.ux[idx] = Complex64::new(0.0, 0.0);
                    self.uy[idx] = Complex64::new(0.0, 0.0);
                } else {
                    let kdotu = k1 * self.ux[idx] + k2 * self.uy[idx];
                    self.ux[idx] -= k1 * kdotu / ksq;
                    self.uy[idx] -= k2 * kdotu / ksq;
                }
            }
        }
    }

    /// A^alpha: multiply each mode by (kappa0^2 |k|^2)^alpha.  Negative powers
    /// act on the zero-mean range (the k = 0 mode stays zero).
    pub fn apply_a(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        let k0sq = self.grid.kappa0() * self.grid.kappa0();
        out.scale_modes(|k1, k2| {
            let ksq = (k1 * k1 + k2 * k2) as f64;
            if ksq == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new((k0sq * ksq).powf(alpha), 0.0)
            }
        });
        out
    }

    pub fn project_low(&self, cut: ModeCut) -> Self {
        let mut out = self.clone();
        out.scale_modes(|k1, k2| {
            if cut.is_low(k1, k2) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        out
    }

    pub fn project_high(&self, cut: ModeCut) -> Self {
        let mut out = self.clone();
        out.scale_modes(|k1, k2| {
            if cut.is_low(k1, k2) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        out
    }

    /// Zeroes every mode with any |k_i| above the grid's dealiasing radius
    /// (the Nyquist column is always dropped).
    pub fn dealias(&mut self) {
        let m = self.grid.dealias_max();
        let n = self.grid.resolution();
        for i in 0..n {
            let k1 = wavenumber(i, n);
            for j in 0..n {
                let k2 = wavenumber(j, n);
                if k1.abs() > m || k2.abs() > m {
                    let idx = i * n + j;
                    self.ux[idx] = Complex64::new(0.0, 0.0);
                    self.uy[idx] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// (|u|, ||u||, |Au|) via Parseval on the coefficients.
    pub fn norms(&self) -> (f64, f64, f64) {
        let k0sq = self.grid.kappa0() * self.grid.kappa0();
        let n = self.grid.resolution();
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for i in 0..n {
            let k1 = wavenumber(i, n);
            for j in 0..n {
                let k2 = wavenumber(j, n);
                let idx = i * n + j;
                let mag = self.ux[idx].norm_sqr() + self.uy[idx].norm_sqr();
                let lam = k0sq * (k1 * k1 + k2 * k2) as f64;
                s0 += mag;
                s1 += lam * mag;
                s2 += lam * lam * mag;
            }
        }
        let l = self.grid.box_length();
        (l * s0.sqrt(), l * s1.sqrt(), l * s2.sqrt())
    }

    pub fn norm_l2(&self) -> f64 {
        self.norms().0
    }

    pub fn norm_h1(&self) -> f64 {
        self.norms().1
    }

    pub fn norm_h2(&self) -> f64 {
        self.norms().2
    }

    /// L^2 inner product (u, v) = L^2 sum_k u_k . conj(v_k), real part.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let mut acc = 0.0;
        for (a, b) in self.ux.iter().zip(other.ux.iter()) {
            acc += (a * b.conj()).re;
        }
        for (a, b) in self.uy.iter().zip(other.uy.iter()) {
            acc += (a * b.conj()).re;
        }
        acc * self.grid.box_length() * self.grid.box_length()
    }

    /// Largest relative incompressibility residual |k.u_k| / |u_k| over
    /// nonzero modes.
    pub fn divergence_residual(&self) -> f64 {
        let gmax = self
            .ux
            .iter()
            .zip(self.uy.iter())
            .map(|(x, y)| (x.norm_sqr() + y.norm_sqr()).sqrt())
            .fold(0.0, f64::max);
        if gmax == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for (k1, k2, idx) in self.modes() {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let div = (k1 as f64 * self.ux[idx] + k2 as f64 * self.uy[idx]).norm();
            let knorm = ((k1 * k1 + k2 * k2) as f64).sqrt();
            // gauge against the field scale: per-mode ratios turn rounding
            // dust on near-zero modes into spurious O(1) readings
            worst = worst.max(div / (knorm * gmax));
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.ux
            .iter()
            .chain(self.uy.iter())
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Checks reality, zero mean and incompressibility.
    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidField("non-finite coefficients".into()));
        }
        if self.ux[0].norm() > 0.0 || self.uy[0].norm() > 0.0 {
            return Err(Error::InvalidField("nonzero mean mode".into()));
        }
        if self.divergence_residual() > 1e-9 {
            return Err(Error::InvalidField(format!(
                "incompressibility residual {} exceeds 1e-9",
                self.divergence_residual()
            )));
        }
        let n = self.grid.resolution();
        for (k1, k2, idx) in self.modes() {
            if k1.unsigned_abs() as usize == n / 2 || k2.unsigned_abs() as usize == n / 2 {
                continue; // Nyquist column has no independent partner
            }
            let (cx, cy) = self.coefficient(-k1, -k2);
            let scale = 1.0 + self.ux[idx].norm() + self.uy[idx].norm();
            if (cx - self.ux[idx].conj()).norm() > 1e-10 * scale
                || (cy - self.uy[idx].conj()).norm() > 1e-10 * scale
            {
                return Err(Error::InvalidField(format!(
                    "reality violated at k = ({k1}, {k2})"
                )));
            }
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{}^2 vs {}^2",
                self.grid.resolution(),
                other.grid.resolution()
            )));
        }
        Ok(())
    }
}

/// Leray projection of a raw coefficient table (free-function form).
pub fn leray_project(raw: &SpectralField) -> SpectralField {
    let mut out = raw.clone();
    out.leray_project();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::standard(16, 2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::standard(7, 1.0).is_err());
        assert!(GridSpec::standard(6, 1.0).is_err());
        assert!(GridSpec::standard(8, -1.0).is_err());
        assert!(GridSpec::new(8, 1.0, 1.5).is_err());
        let g = grid();
        assert!((g.kappa0() - 1.0).abs() < 1e-15);
        assert_eq!(g.dealias_max(), 5);
    }

    #[test]
    fn leray_gradient_mode_is_killed() {
        let mut f = SpectralField::zeros(grid());
        // u_k parallel to k at k = (1, 2): pure gradient, projects to zero.
        f.set_mode_pair(1, 2, Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0));
        f.leray_project();
        let (cx, cy) = f.coefficient(1, 2);
        assert!(cx.norm() < 1e-15 && cy.norm() < 1e-15);
    }

    #[test]
    fn leray_hand_example() {
        // u = (1, 1) at k = (1, 0) -> (0, 1).
        let mut f = SpectralField::zeros(grid());
        f.set_mode_pair(1, 0, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        f.leray_project();
        let (cx, cy) = f.coefficient(1, 0);
        assert!((cx - Complex64::new(0.0, 0.0)).norm() < 1e-15);
        assert!((cy - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn leray_is_idempotent_and_fixes_divfree() {
        let mut f = SpectralField::zeros(grid());
        f.set_mode_pair(2, 1, Complex64::new(1.0, 0.5), Complex64::new(-2.0, -1.0));
        assert!(f.divergence_residual() < 1e-14);
        let g = leray_project(&f);
        assert!(g.sub(&f).norm_l2() < 1e-14);
        let h = leray_project(&g);
        assert!(h.sub(&g).norm_l2() < 1e-15);
    }

    #[test]
    fn apply_a_unit_mode() {
        // alpha = 1 on k = (1, 0), L = 2 pi: multiplier is exactly 1.
        let mut f = SpectralField::zeros(grid());
        f.set_mode_pair(1, 0, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        let g = f.apply_a(1.0);
        assert!(g.sub(&f).norm_l2() < 1e-15);
        // identity at alpha = 0, inverse on the range
        let h = f.apply_a(0.0);
        assert!(h.sub(&f).norm_l2() < 1e-15);
    }

    #[test]
    fn apply_a_roundtrip() {
        let mut f = SpectralField::zeros(grid());
        f.set_mode_pair(2, 3, Complex64::new(3.0, -1.0), Complex64::new(-2.0, 2.0));
        f.leray_project();
        let back = f.apply_a(1.0).apply_a(-1.0);
        assert!(back.sub(&f).norm_l2() < 1e-12);
    }

    #[test]
    fn projector_split() {
        let g = grid();
        let cut = ModeCut::new(2, &g).unwrap();
        let mut f = SpectralField::zeros(g);
        f.set_mode_pair(1, 0, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        f.set_mode_pair(3, 0, Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0));
        let lo = f.project_low(cut);
        let hi = f.project_high(cut);
        assert!(lo.coefficient(3, 0).1.norm() < 1e-15);
        assert!((lo.coefficient(1, 0).1 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(lo.add(&hi).sub(&f).norm_l2() < 1e-15);
        assert!(lo.inner(&hi).abs() < 1e-12);
        assert!(lo.project_low(cut).sub(&lo).norm_l2() < 1e-15);
    }

    #[test]
    fn single_mode_pair_norm() {
        // |u_k| = 1 at +/- k = (1, 0), L = 2 pi: |u| = 2 pi sqrt(2).
        let mut f = SpectralField::zeros(grid());
        f.set_mode_pair(1, 0, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        let (l2, h1, _) = f.norms();
        let expect = 2.0 * std::f64::consts::PI * 2.0f64.sqrt();
        assert!((l2 - expect).abs() < 1e-12);
        // k = (1,0), kappa0 = 1: ||u|| = |u|
        assert!((h1 - expect).abs() < 1e-12);
        // cross-check against apply_a(1/2) then l2
        assert!((f.apply_a(0.5).norm_l2() - h1).abs() < 1e-12);
    }

    #[test]
    fn zero_field_norms() {
        let f = SpectralField::zeros(grid());
        assert_eq!(f.norms(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cut_must_sit_below_dealias_radius() {
        let g = grid();
        assert!(ModeCut::new(5, &g).is_err());
        assert!(ModeCut::new(4, &g).is_ok());
        assert!(ModeCut::new(0, &g).is_err());
    }
}
