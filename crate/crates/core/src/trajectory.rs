//! Discretizations of the auxiliary-time line: periodic and windowed s-grids,
//! low-mode trajectories (the discrete stand-in for bounded continuous
//! low-mode functions of s) and slaved high-mode solutions.

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, ModeCut, SpectralField};

const NODE_COUNT_TOL: f64 = 1e-9;

fn integer_ratio(span: f64, ds: f64) -> Result<usize> {
    if !(ds > 0.0) || !(span > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "s-grid needs positive span and step, got span = {span}, ds = {ds}"
        )));
    }
    let ratio = span / ds;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > NODE_COUNT_TOL * ratio.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "span {span} is not an integer multiple of ds = {ds}"
        )));
    }
    Ok(rounded as usize)
}

/// Sampling grid in the auxiliary time s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SGrid {
    /// s-circle of circumference `period`, nodes at i*ds for i in 0..period/ds.
    Periodic { period: f64, ds: f64 },
    /// Interval [s_lo, s_hi] with nodes at both ends; the first `burn_in`
    /// length of the window is transient and excluded from sup-norms.
    Windowed {
        s_lo: f64,
        s_hi: f64,
        ds: f64,
        burn_in: f64,
    },
}

impl SGrid {
    pub fn periodic(period: f64, ds: f64) -> Result<Self> {
        integer_ratio(period, ds)?;
        Ok(Self::Periodic { period, ds })
    }

    pub fn windowed(s_lo: f64, s_hi: f64, ds: f64, burn_in: f64) -> Result<Self> {
        let span = s_hi - s_lo;
        integer_ratio(span, ds)?;
        if burn_in < 0.0 || burn_in >= span {
            return Err(Error::InvalidConfig(format!(
                "burn-in {burn_in} must lie in [0, span = {span})"
            )));
        }
        if burn_in > 0.0 {
            integer_ratio(burn_in, ds)?;
        }
        Ok(Self::Windowed {
            s_lo,
            s_hi,
            ds,
            burn_in,
        })
    }

    pub fn ds(&self) -> f64 {
        match self {
            Self::Periodic { ds, .. } | Self::Windowed { ds, .. } => *ds,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Self::Periodic { .. })
    }

    /// Number of stored nodes: period/ds on the circle (node at s = period
    /// coincides with s = 0), span/ds + 1 on a window.
    pub fn node_count(&self) -> usize {
        match self {
            Self::Periodic { period, ds } => (period / ds).round() as usize,
            Self::Windowed { s_lo, s_hi, ds, .. } => ((s_hi - s_lo) / ds).round() as usize + 1,
        }
    }

    pub fn s_value(&self, i: usize) -> f64 {
        match self {
            Self::Periodic { ds, .. } => i as f64 * ds,
            Self::Windowed { s_lo, ds, .. } => s_lo + i as f64 * ds,
        }
    }

    /// Index of the first node past the burn-in transient (0 on periodic
    /// grids, which have no transient).
    pub fn first_kept_node(&self) -> usize {
        match self {
            Self::Periodic { .. } => 0,
            Self::Windowed { ds, burn_in, .. } => (burn_in / ds).round() as usize,
        }
    }

    pub fn same_as(&self, other: &SGrid) -> Result<()> {
        if self != other {
            return Err(Error::SGridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// A sampled low-mode trajectory s -> v(s) supported on |k| <= N.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTrajectory {
    pub sgrid: SGrid,
    pub cut: ModeCut,
    values: Vec<SpectralField>,
}

impl ModalTrajectory {
    pub fn new(sgrid: SGrid, cut: ModeCut, values: Vec<SpectralField>) -> Result<Self> {
        if values.len() != sgrid.node_count() {
            return Err(Error::SGridMismatch(format!(
                "trajectory has {} values but the grid has {} nodes",
                values.len(),
                sgrid.node_count()
            )));
        }
        let grid = *values
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty trajectory".into()))?
            .grid();
        for (i, v) in values.iter().enumerate() {
            if v.grid() != &grid {
                return Err(Error::GridMismatch(format!("node {i} on a different grid")));
            }
            v.validate().map_err(|e| {
                Error::InvalidField(format!("trajectory node {i}: {e}"))
            })?;
            let high = v.project_high(cut).norm_l2();
            if high > 1e-12 * (1.0 + v.norm_l2()) {
                return Err(Error::InvalidField(format!(
                    "node {i} carries high-mode content {high:.3e} beyond |k| <= {}",
                    cut.n()
                )));
            }
        }
        Ok(Self { sgrid, cut, values })
    }

    /// Constant-in-s trajectory carrying `value` at every node.
    pub fn constant(sgrid: SGrid, cut: ModeCut, value: &SpectralField) -> Result<Self> {
        let values = vec![value.clone(); sgrid.node_count()];
        Self::new(sgrid, cut, values)
    }

    pub fn values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &SpectralField {
        &self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        self.values[0].grid()
    }

    /// sup over nodes of ||v(s)|| (the enstrophy-norm sup defining the
    /// trajectory-space norm).
    pub fn norm_x(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm_h1())
            .fold(0.0, f64::max)
    }

    /// sup over nodes of |v(s)|.
    pub fn norm_y(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm_l2())
            .fold(0.0, f64::max)
    }

    /// Cyclic shift by `m` nodes on a periodic grid: result(s) = self(s + m*ds).
    pub fn shift_nodes(&self, m: i64) -> Result<Self> {
        if !self.sgrid.is_periodic() {
            return Err(Error::Precondition(
                "node shifts are defined on periodic s-grids only".into(),
            ));
        }
        let n = self.values.len() as i64;
        let values = (0..n)
            .map(|i| self.values[((i + m).rem_euclid(n)) as usize].clone())
            .collect();
        Ok(Self {
            sgrid: self.sgrid,
            cut: self.cut,
            values,
        })
    }

    /// Largest nodewise difference max_s ||a(s) - b(s)||.
    pub fn distance_x(&self, other: &Self) -> Result<f64> {
        self.sgrid.same_as(&other.sgrid)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.sub(b).norm_h1())
            .fold(0.0, f64::max))
    }
}

/// Slaved high-mode (or nudged full-field) trajectory on an s-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WSolution {
    pub sgrid: SGrid,
    /// When set, every value is supported on |k| > N for this cut.
    pub high_cut: Option<ModeCut>,
    values: Vec<SpectralField>,
    pub converged: bool,
    /// Iterations used: laps on periodic grids, 1 for direct sweeps.
    pub iterations: usize,
}

impl WSolution {
    pub fn new(
        sgrid: SGrid,
        high_cut: Option<ModeCut>,
        values: Vec<SpectralField>,
        converged: bool,
        iterations: usize,
    ) -> Result<Self> {
        if values.len() != sgrid.node_count() {
            return Err(Error::SGridMismatch(format!(
                "solution has {} values but the grid has {} nodes",
                values.len(),
                sgrid.node_count()
            )));
        }
        if let Some(cut) = high_cut {
            for (i, w) in values.iter().enumerate() {
                let low = w.project_low(cut).norm_l2();
                if low > 1e-12 * (1.0 + w.norm_l2()) {
                    return Err(Error::InvalidField(format!(
                        "node {i} carries low-mode content {low:.3e} at or below |k| = {}",
                        cut.n()
                    )));
                }
            }
        }
        Ok(Self {
            sgrid,
            high_cut,
            values,
            converged,
            iterations,
        })
    }

    pub fn values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &SpectralField {
        &self.values[i]
    }

    /// Post-burn-in slice of the trajectory.
    pub fn kept(&self) -> &[SpectralField] {
        &self.values[self.sgrid.first_kept_node()..]
    }

    pub fn burn_in_used(&self) -> f64 {
        self.sgrid.first_kept_node() as f64 * self.sgrid.ds()
    }

    /// sup ||w(s)|| over post-burn-in nodes.
    pub fn sup_h1(&self) -> f64 {
        self.kept().iter().map(|w| w.norm_h1()).fold(0.0, f64::max)
    }

    /// sup |w(s)| over post-burn-in nodes.
    pub fn sup_l2(&self) -> f64 {
        self.kept().iter().map(|w| w.norm_l2()).fold(0.0, f64::max)
    }

    /// sup |Aw(s)| over post-burn-in nodes.
    pub fn sup_h2(&self) -> f64 {
        self.kept().iter().map(|w| w.norm_h2()).fold(0.0, f64::max)
    }
}
