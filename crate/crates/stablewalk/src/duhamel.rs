//! Deterministic density solvers on a periodic box in one dimension.
//!
//! Two marching engines share one spectral representation:
//!
//! * [`solve_sde_density`] integrates the variation-of-constants (Duhamel)
//!   fixed-point form of the forward equation for the law of
//!   dX = b(t, X) dt + dL started at a point. The memory term is a
//!   per-mode convolution against exp(-(t-r) psi); each macro step
//!   integrates that kernel exactly against piecewise-linear data, so the
//!   endpoint singularity of the kernel's derivative costs no accuracy.
//! * [`solve_scheme_density`] pushes the exact one-step transition kernels
//!   of the Euler-Maruyama variants forward. The result is the law of the
//!   simulated chain itself (up to spectral truncation), not an
//!   approximation of the SDE law, which makes it a reference for
//!   Monte-Carlo-free weak-error measurements.
//!
//! Everything lives on a [`SpatialGrid`] box with periodic wrap. Boxes are
//! sized from the wrapped-tail budget and doubled automatically when a
//! computed slice contaminates the boundary band; [`DensityField`] enforces
//! the declared mass and positivity tolerances at assembly time instead of
//! silently renormalizing.

use std::io::Write;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::drift::{
    cutoff_drift, eval_drift, integrated_drift_function, CutoffConfig, DriftSpec, DriftVariant,
    TimeProfile,
};
use crate::error::{Error, Result};
use crate::grid::{FftCache, GridField, SpatialGrid, Spectrum};
use crate::noise::{default_kernel_grid, BarPProfile, StableLaw, ALIAS_BUDGET};
use crate::numeric::gauss_legendre_on;
use crate::scheme::{SchemeConfig, SchemeVariant};

/// No density value may dip below this floor; anything worse is reported as
/// a numerical failure of the producing solver, never clipped.
pub const NEGATIVITY_FLOOR: f64 = -1e-8;

/// Relative amplitude the outer 10% band of the box may carry before a
/// slice counts as leaking around the periodic boundary.
pub const LEAKAGE_BUDGET: f64 = 1e-6;

/// Fraction of the half width considered interior by the leakage monitor.
const INTERIOR_FRACTION: f64 = 0.9;

/// How many times a solver may double the box before giving up.
const MAX_WIDENINGS: usize = 3;

/// Relative sup-norm agreement between scheme marches at consecutive
/// spatial resolutions required before a density is accepted. The kernel
/// alone needs far less than the Nyquist-gated spacing, but a drift with
/// structure below that spacing (a cutoff power singularity, say) is only
/// seen through its node samples, so the solver refines until two marches
/// tell the same story.
pub const DRIFT_RESOLUTION_BUDGET: f64 = 5e-3;

/// Resolution doublings the scheme solver may spend before declaring the
/// drift unresolved.
const MAX_REFINEMENTS: usize = 4;

/// Hard cap on Taylor terms of the displacement expansion in the one-step
/// scheme propagator.
const MAX_SHIFT_TERMS: usize = 60;

/// Truncation budget of that expansion (bound on the omitted tail of the
/// damped coefficients).
const SHIFT_TAIL_BUDGET: f64 = 1e-15;

/// Required decay exponent of the kernel multiplier at the Nyquist
/// frequency over the sharpest marching time.
const NYQUIST_DECAY: f64 = 30.0;

/// Where a density field came from; fixes its mass tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityProvenance {
    /// Fixed-point solution of the forward equation of the SDE.
    SdeDuhamel,
    /// Exact one-step transition kernels of a simulation scheme.
    SchemeExact,
    /// Kernel density estimate built from simulated paths.
    KdeFromPaths,
}

impl DensityProvenance {
    pub fn name(self) -> &'static str {
        match self {
            DensityProvenance::SdeDuhamel => "sde-duhamel",
            DensityProvenance::SchemeExact => "scheme-exact",
            DensityProvenance::KdeFromPaths => "kde-from-paths",
        }
    }

    /// How far a slice may integrate away from 1 before assembly fails.
    pub fn mass_tolerance(self) -> f64 {
        match self {
            DensityProvenance::SdeDuhamel => 1e-4,
            DensityProvenance::SchemeExact => 1e-6,
            DensityProvenance::KdeFromPaths => 1e-2,
        }
    }
}

/// Time-indexed family of density slices on one spatial grid.
///
/// Construction through [`DensityField::assemble`] validates mass
/// conservation and the negativity floor per slice; the deviations stay
/// readable afterwards so reports can show how close a run came to its
/// tolerance.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: SpatialGrid,
    center: f64,
    provenance: DensityProvenance,
    times: Vec<f64>,
    slices: Vec<Vec<f64>>,
    mass_deviations: Vec<f64>,
    lowest_values: Vec<f64>,
}

impl DensityField {
    /// Validate and wrap solver output. `times` must be strictly
    /// increasing and positive, one slice of grid length each; slices must
    /// be finite, integrate to 1 within the provenance tolerance and stay
    /// above [`NEGATIVITY_FLOOR`]. An empty family is allowed (empty
    /// report case).
    pub fn assemble(
        grid: SpatialGrid,
        center: f64,
        provenance: DensityProvenance,
        times: Vec<f64>,
        slices: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::Parameter(format!(
                "density fields are one-dimensional, got a {}-d grid",
                grid.dim()
            )));
        }
        if !center.is_finite() {
            return Err(Error::Parameter("center must be finite".into()));
        }
        if times.len() != slices.len() {
            return Err(Error::Parameter(format!(
                "{} times against {} slices",
                times.len(),
                slices.len()
            )));
        }
        let mut previous = 0.0;
        for &t in &times {
            if !(t > previous) || !t.is_finite() {
                return Err(Error::Parameter(format!(
                    "slice times must be finite, positive and strictly increasing; got {t} after {previous}"
                )));
            }
            previous = t;
        }
        let tol = provenance.mass_tolerance();
        let mut mass_deviations = Vec::with_capacity(slices.len());
        let mut lowest_values = Vec::with_capacity(slices.len());
        for (i, slice) in slices.iter().enumerate() {
            if slice.len() != grid.len() {
                return Err(Error::Parameter(format!(
                    "slice {} has {} values on a grid of {}",
                    i,
                    slice.len(),
                    grid.len()
                )));
            }
            if !slice.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "slice at t = {} contains non-finite values",
                    times[i]
                )));
            }
            let deviation = (grid.integrate(slice) - 1.0).abs();
            if deviation > tol {
                return Err(Error::Numerical(format!(
                    "slice at t = {} integrates {deviation:.3e} away from 1 (tolerance {tol:.0e} for {})",
                    times[i],
                    provenance.name()
                )));
            }
            let lowest = slice.iter().copied().fold(f64::INFINITY, f64::min);
            if lowest < NEGATIVITY_FLOOR {
                return Err(Error::Numerical(format!(
                    "slice at t = {} dips to {lowest:.3e}, below the negativity floor {NEGATIVITY_FLOOR:.0e}",
                    times[i]
                )));
            }
            mass_deviations.push(deviation);
            lowest_values.push(lowest.min(0.0));
        }
        Ok(DensityField {
            grid,
            center,
            provenance,
            times,
            slices,
            mass_deviations,
            lowest_values,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Start point of the underlying dynamics (KDE: declared center).
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn provenance(&self) -> DensityProvenance {
        self.provenance
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of stored slices.
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.slices[i]
    }

    /// Index of the slice at time t (within 1e-9 relative).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn slice_at(&self, t: f64) -> Option<&[f64]> {
        self.time_index(t).map(|i| self.slices[i].as_slice())
    }

    /// |mass - 1| recorded for slice i at assembly.
    pub fn mass_deviation(&self, i: usize) -> f64 {
        self.mass_deviations[i]
    }

    /// Most negative value of slice i (0 when the slice is nonnegative).
    pub fn lowest_value(&self, i: usize) -> f64 {
        self.lowest_values[i]
    }

    /// Long-format CSV: one `t,x,value` row per slice point.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,x,value")?;
        for (i, &t) in self.times.iter().enumerate() {
            for (j, v) in self.slices[i].iter().enumerate() {
                writeln!(out, "{t},{},{v}", self.grid.node1d(j))?;
            }
        }
        Ok(())
    }

    /// Two-column key/value sidecar describing the run: provenance, law,
    /// grid geometry, recorded tolerless diagnostics and a short digest of
    /// the drift so outputs can be matched to their configuration.
    pub fn write_metadata<W: Write>(
        &self,
        out: &mut W,
        law: &StableLaw,
        drift: &DriftSpec,
    ) -> Result<()> {
        writeln!(out, "key,value")?;
        writeln!(out, "provenance,{}", self.provenance.name())?;
        writeln!(out, "alpha,{}", law.alpha())?;
        writeln!(out, "dim,{}", self.grid.dim())?;
        writeln!(out, "points,{}", self.grid.points_per_axis())?;
        writeln!(out, "half_width,{}", self.grid.half_width())?;
        writeln!(out, "spacing,{}", self.grid.spacing())?;
        writeln!(out, "center,{}", self.center)?;
        writeln!(out, "slices,{}", self.slices.len())?;
        if let (Some(first), Some(last)) = (self.times.first(), self.times.last()) {
            writeln!(out, "t_first,{first}")?;
            writeln!(out, "t_last,{last}")?;
        }
        let worst_mass = self.mass_deviations.iter().copied().fold(0.0, f64::max);
        let lowest = self.lowest_values.iter().copied().fold(0.0, f64::min);
        writeln!(out, "max_mass_deviation,{worst_mass:e}")?;
        writeln!(out, "lowest_value,{lowest:e}")?;
        writeln!(out, "drift_digest,{}", drift_digest(drift))?;
        Ok(())
    }
}

/// Short stable fingerprint of a drift specification (12 hex characters of
/// a SHA-256 over its debug form), for tagging output files.
pub fn drift_digest(spec: &DriftSpec) -> String {
    let payload = format!("{:?}|{:?}", spec.variant, spec.declared);
    let digest = Sha256::digest(payload.as_bytes());
    hex::encode(&digest[..6])
}

/// Discretization of the fixed-point solver: the spatial box and the
/// number of macro time steps over the horizon, plus the sweep controls.
///
/// Memory grows as `time_steps * grid points` because every slice is kept;
/// pick the step count from the horizon, not the other way round.
#[derive(Debug, Clone)]
pub struct VolterraConfig {
    /// Spatial box; the solver may replace it by a wider one when a slice
    /// leaks around the periodic boundary.
    pub grid: SpatialGrid,
    /// Macro steps over the whole horizon; slices are produced at every
    /// multiple of horizon / time_steps.
    pub time_steps: usize,
    /// Most fixed-point sweeps allowed per macro step.
    pub picard_cap: usize,
    /// Sweep convergence threshold on the sup of the coefficient update.
    pub tolerance: f64,
}

impl VolterraConfig {
    pub fn new(grid: SpatialGrid, time_steps: usize) -> Result<Self> {
        let cfg = VolterraConfig {
            grid,
            time_steps,
            picard_cap: 25,
            tolerance: 1e-10,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_picard_cap(mut self, cap: usize) -> Self {
        self.picard_cap = cap;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.dim() != 1 {
            return Err(Error::Parameter(
                "the fixed-point solver is one-dimensional".into(),
            ));
        }
        if self.time_steps == 0 {
            return Err(Error::Parameter("need at least one time step".into()));
        }
        if self.picard_cap == 0 {
            return Err(Error::Parameter("need at least one sweep".into()));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Parameter(format!(
                "sweep tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Weights of the exact integral of exp(-x v) against the two linear hat
/// functions on the unit interval:
///
///   left  = integral_0^1 exp(-x v) v dv        (pairs with the value at
///                                               the earlier panel end)
///   right = integral_0^1 exp(-x v) (1 - v) dv  (the later end)
///
/// after the substitution that puts the kernel peak at v = 0. The closed
/// forms lose all significance for small x (cancellation of order x^2), so
/// below 1/2 the series is summed instead; both branches are exact to
/// roundoff where used.
fn exp_panel_weights(x: f64) -> (f64, f64) {
    debug_assert!(x >= 0.0);
    if x > 0.5 {
        let e = (-x).exp();
        let xx = x * x;
        ((1.0 - (1.0 + x) * e) / xx, (x - 1.0 + e) / xx)
    } else {
        let mut left = 0.0;
        let mut right = 0.0;
        let mut pow = 1.0; // (-x)^m / m!
        for m in 0..40u32 {
            let m2 = f64::from(m + 2);
            left += pow / m2;
            right += pow / (f64::from(m + 1) * m2);
            pow *= -x / f64::from(m + 1);
            if pow.abs() < 1e-19 {
                break;
            }
        }
        (left, right)
    }
}

/// Spectral truncation guard: the multiplier must decay below exp(-30) at
/// the Nyquist frequency over the sharpest marching time, otherwise the
/// grid under-resolves the kernel and ringing contaminates every slice.
fn require_time_resolved(grid: &SpatialGrid, law: &StableLaw, t: f64) -> Result<()> {
    let exponent = t * law.psi(grid.nyquist());
    if exponent < NYQUIST_DECAY {
        return Err(Error::Resolution(format!(
            "marching step {t} leaves only exp(-{exponent:.1}) multiplier decay at the Nyquist \
             frequency {:.1} (need exponent >= {NYQUIST_DECAY}); raise the point count or \
             coarsen the time grid",
            grid.nyquist()
        )));
    }
    Ok(())
}

/// Relative amplitude of a slice over the outer band of the box.
fn boundary_contamination(grid: &SpatialGrid, data: &[f64]) -> f64 {
    let limit = INTERIOR_FRACTION * grid.half_width();
    let mut interior = 0.0f64;
    let mut band = 0.0f64;
    for (j, v) in data.iter().enumerate() {
        let a = v.abs();
        if grid.node1d(j).abs() > limit {
            band = band.max(a);
        } else {
            interior = interior.max(a);
        }
    }
    if interior > 0.0 {
        band / interior
    } else {
        0.0
    }
}

/// Same spacing, half width grown to at least `half`; points stay a power
/// of two and are capped like the kernel grids.
fn grid_with_half_width(grid: &SpatialGrid, half: f64) -> Result<SpatialGrid> {
    let dx = grid.spacing();
    let points = ((2.0 * half / dx).ceil() as usize)
        .next_power_of_two()
        .max(grid.points_per_axis());
    if points > 1 << 22 {
        return Err(Error::Resolution(format!(
            "widening the box to half width {half:.1} would need {points} points at spacing \
             {dx:.3e} (cap 2^22)"
        )));
    }
    SpatialGrid::new(1, 0.5 * points as f64 * dx, points)
}

fn leak_error(time: f64, contamination: f64, half_width: f64) -> Error {
    Error::Resolution(format!(
        "slice at t = {time} carries relative amplitude {contamination:.2e} in the outer band of \
         the box (budget {LEAKAGE_BUDGET:.0e} at half width {half_width}); the box is too narrow \
         for this horizon"
    ))
}

enum MarchOutcome {
    Done(Vec<Vec<f64>>),
    Leaked { time: f64, contamination: f64 },
}

/// Drift value at one point, replaced by the cell average (split at the
/// point to keep quadrature off the pole) when the pointwise sample is an
/// integrable singularity sitting exactly on a node.
fn sample_or_cell_average<F: Fn(f64) -> Result<f64>>(f: &F, z: f64, dx: f64) -> Result<f64> {
    let v = f(z)?;
    if v.is_finite() {
        return Ok(v);
    }
    let mut total = 0.0;
    for (a, b) in [(z - 0.5 * dx, z), (z, z + 0.5 * dx)] {
        let (nodes, weights) = gauss_legendre_on(6, a, b);
        for (x, w) in nodes.iter().zip(&weights) {
            let fx = f(*x)?;
            if !fx.is_finite() {
                return Err(Error::Numerical(format!(
                    "drift is not integrable around x = {z}"
                )));
            }
            total += w * fx;
        }
    }
    Ok(total / dx)
}

/// Evaluate a scalar map on every grid node with the cell-average fallback.
fn sampled_field<F: Fn(f64) -> Result<f64>>(grid: &SpatialGrid, f: F) -> Result<Vec<f64>> {
    let dx = grid.spacing();
    (0..grid.points_per_axis())
        .map(|j| sample_or_cell_average(&f, grid.node1d(j), dx))
        .collect()
}

/// The multiplier of d/dx per stored mode. The unpaired bin at the Nyquist
/// frequency of an even grid cannot carry an odd-order derivative of a
/// real field, so it is zeroed, as usual for pseudospectral derivatives;
/// the marching guard keeps the true spectrum at that frequency below
/// exp(-30) anyway.
fn spectral_derivative(grid: &SpatialGrid, xi: &[f64]) -> Vec<Complex64> {
    let mut deriv: Vec<Complex64> = xi.iter().map(|&x| Complex64::new(0.0, x)).collect();
    let n = grid.points_per_axis();
    if n.is_multiple_of(2) {
        deriv[n / 2] = Complex64::default();
    }
    deriv
}

struct SdeMarch<'a> {
    law: &'a StableLaw,
    drift: &'a DriftSpec,
    x0: f64,
    dt: f64,
    steps: usize,
    picard_cap: usize,
    tolerance: f64,
}

/// One pass of the fixed-point marcher on a fixed grid.
///
/// The first slice is bootstrapped by the one-step frozen-drift kernel
/// (manifestly a density, so positive by construction), and its memory
/// term is recovered exactly from the variation-of-constants identity.
/// From the second step on, the memory term M(t, xi) = integral of
/// exp(-(t-r) psi) i xi F(r, xi) dr (F the transform of density * drift)
/// obeys M(t+dt) = exp(-dt psi) M(t) + panel, where the panel integrates
/// the exponential exactly against the linear interpolant of F; every
/// panel endpoint is then a damped transform, which keeps the spectral
/// tails honest. The unknown endpoint value of F sits in a linear
/// fixed-point equation solved by sweeping; the previous endpoint is the
/// initial guess, so two or three sweeps are typical.
fn march_sde(p: &SdeMarch, grid: SpatialGrid) -> Result<MarchOutcome> {
    require_time_resolved(&grid, p.law, p.dt)?;
    let n = grid.len();
    let cache = FftCache::new(grid.points_per_axis());
    let xi: Vec<f64> = (0..n).map(|i| grid.xi1d(i)).collect();
    let deriv = spectral_derivative(&grid, &xi);
    let decay: Vec<f64> = xi.iter().map(|&x| (-p.dt * p.law.psi(x.abs())).exp()).collect();
    let mut w_left = vec![0.0; n];
    let mut w_right = vec![0.0; n];
    for (k, &x) in xi.iter().enumerate() {
        let (l, r) = exp_panel_weights(p.dt * p.law.psi(x.abs()));
        w_left[k] = l;
        w_right[k] = r;
    }
    let phase0: Vec<Complex64> = xi
        .iter()
        .map(|&x| Complex64::from_polar(1.0, -x * p.x0))
        .collect();

    // First step: kernel shifted by the frozen midpoint drift at the
    // start point. Its transform and the identity
    // M(dt) = exp(-dt psi) Gamma(0) - Gamma(dt) seed the recurrence.
    let v0 = p.dt
        * sample_or_cell_average(
            &|z| Ok(eval_drift(p.drift, 0.5 * p.dt, [z, 0.0])?[0]),
            p.x0,
            grid.spacing(),
        )?;
    let first: Vec<Complex64> = (0..n)
        .map(|k| decay[k] * Complex64::from_polar(1.0, -xi[k] * (p.x0 + v0)))
        .collect();
    let mut memory: Vec<Complex64> = (0..n)
        .map(|k| decay[k] * phase0[k] - first[k])
        .collect();
    let (first_field, _) = Spectrum {
        grid,
        coeffs: first,
    }
    .to_field(&cache);
    let contamination = boundary_contamination(&grid, &first_field.data);
    if contamination > LEAKAGE_BUDGET {
        return Ok(MarchOutcome::Leaked {
            time: p.dt,
            contamination,
        });
    }
    let b1 = sampled_field(&grid, |z| Ok(eval_drift(p.drift, p.dt, [z, 0.0])?[0]))?;
    let mut product = first_field.clone();
    for (j, v) in product.data.iter_mut().enumerate() {
        *v *= b1[j];
    }
    let mut f_prev = Spectrum::from_field(&product, &cache).coeffs;
    let mut kernel0 = decay.clone();
    let mut slices = Vec::with_capacity(p.steps);
    slices.push(first_field.data);

    for i in 1..p.steps {
        let tau = (i + 1) as f64 * p.dt;
        for (k, v) in kernel0.iter_mut().enumerate() {
            *v *= decay[k];
        }
        let b_next = sampled_field(&grid, |z| Ok(eval_drift(p.drift, tau, [z, 0.0])?[0]))?;
        // Everything that stays fixed during the sweeps, including the
        // left panel endpoint.
        let base: Vec<Complex64> = (0..n)
            .map(|k| {
                kernel0[k] * phase0[k]
                    - decay[k] * memory[k]
                    - deriv[k] * (p.dt * w_left[k]) * f_prev[k]
            })
            .collect();
        let slice_from = |f_next: &[Complex64]| {
            let coeffs: Vec<Complex64> = (0..n)
                .map(|k| base[k] - deriv[k] * (p.dt * w_right[k]) * f_next[k])
                .collect();
            Spectrum { grid, coeffs }.to_field(&cache)
        };

        let mut f_next = f_prev.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..p.picard_cap {
            let (field, _) = slice_from(&f_next);
            let mut product = field;
            for (j, v) in product.data.iter_mut().enumerate() {
                *v *= b_next[j];
            }
            let refreshed = Spectrum::from_field(&product, &cache).coeffs;
            residual = refreshed
                .iter()
                .zip(&f_next)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            f_next = refreshed;
            if residual <= p.tolerance {
                break;
            }
        }
        if !(residual <= p.tolerance) {
            return Err(Error::Numerical(format!(
                "fixed-point sweep is not converging at t = {tau}: residual {residual:.3e} \
                 after {} sweeps (tolerance {:.1e}); refine the time grid",
                p.picard_cap, p.tolerance
            )));
        }

        let (field, imag) = slice_from(&f_next);
        let sup = field.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if imag > 1e-8 * sup.max(1.0) {
            return Err(Error::Numerical(format!(
                "inverse transform lost Hermitian symmetry at t = {tau} (imaginary residue \
                 {imag:.2e})"
            )));
        }
        let contamination = boundary_contamination(&grid, &field.data);
        if contamination > LEAKAGE_BUDGET {
            return Ok(MarchOutcome::Leaked {
                time: tau,
                contamination,
            });
        }
        for (k, m) in memory.iter_mut().enumerate() {
            let panel = deriv[k] * p.dt * (w_left[k] * f_prev[k] + w_right[k] * f_next[k]);
            *m = decay[k] * *m + panel;
        }
        f_prev = f_next;
        slices.push(field.data);
    }
    Ok(MarchOutcome::Done(slices))
}

/// Density of the SDE dX = b(t, X) dt + dL, X_0 = x0, on [0, horizon].
///
/// Slices are produced at every multiple of horizon / time_steps. When a
/// slice leaks around the periodic boundary the box is doubled (same
/// spacing) and the march restarts, up to three doublings.
pub fn solve_sde_density(
    law: &StableLaw,
    drift: &DriftSpec,
    x0: f64,
    horizon: f64,
    cfg: &VolterraConfig,
) -> Result<DensityField> {
    if law.dim() != 1 || drift.dim() != 1 {
        return Err(Error::Parameter(
            "the fixed-point solver handles d = 1 only".into(),
        ));
    }
    if !x0.is_finite() || !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Parameter(format!(
            "need a finite start and a positive horizon, got x0 = {x0}, horizon = {horizon}"
        )));
    }
    cfg.validate()?;
    let dt = horizon / cfg.time_steps as f64;
    let march = SdeMarch {
        law,
        drift,
        x0,
        dt,
        steps: cfg.time_steps,
        picard_cap: cfg.picard_cap,
        tolerance: cfg.tolerance,
    };
    let mut grid = cfg.grid;
    let mut widenings = 0;
    loop {
        match march_sde(&march, grid)? {
            MarchOutcome::Done(slices) => {
                let times = (1..=cfg.time_steps).map(|i| i as f64 * dt).collect();
                return DensityField::assemble(
                    grid,
                    x0,
                    DensityProvenance::SdeDuhamel,
                    times,
                    slices,
                );
            }
            MarchOutcome::Leaked {
                time,
                contamination,
            } => {
                if widenings == MAX_WIDENINGS {
                    return Err(leak_error(time, contamination, grid.half_width()));
                }
                grid = grid_with_half_width(&grid, 2.0 * grid.half_width())?;
                widenings += 1;
            }
        }
    }
}

/// Self-consistency residual of a fixed-point solution: rebuild the
/// right-hand side of the representation from the stored slices alone
/// (fresh memory recurrence, forcing transforms recomputed from the
/// fields) and return the sup distance to each stored slice.
///
/// The first slice anchors the rebuild, exactly as it seeds the marcher,
/// so its entry reports zero; every later entry checks that the stored
/// slices satisfy the panel representation with bookkeeping independent
/// from the marcher's own.
pub fn duhamel_residual(
    field: &DensityField,
    law: &StableLaw,
    drift: &DriftSpec,
) -> Result<Vec<f64>> {
    if field.provenance() != DensityProvenance::SdeDuhamel {
        return Err(Error::Parameter(format!(
            "the self-consistency residual applies to fixed-point solver output, got {}",
            field.provenance().name()
        )));
    }
    if field.is_empty() {
        return Ok(Vec::new());
    }
    let times = field.times();
    let dt = times[0];
    let horizon = *times.last().expect("nonempty");
    for (i, &t) in times.iter().enumerate() {
        if (t - (i + 1) as f64 * dt).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::Parameter(
                "residual check needs uniformly spaced slices".into(),
            ));
        }
    }
    let grid = *field.grid();
    let n = grid.len();
    let cache = FftCache::new(grid.points_per_axis());
    let xi: Vec<f64> = (0..n).map(|i| grid.xi1d(i)).collect();
    let deriv = spectral_derivative(&grid, &xi);
    let decay: Vec<f64> = xi.iter().map(|&x| (-dt * law.psi(x.abs())).exp()).collect();
    let mut w_left = vec![0.0; n];
    let mut w_right = vec![0.0; n];
    for (k, &x) in xi.iter().enumerate() {
        let (l, r) = exp_panel_weights(dt * law.psi(x.abs()));
        w_left[k] = l;
        w_right[k] = r;
    }
    let x0 = field.center();
    let phase0: Vec<Complex64> = xi
        .iter()
        .map(|&x| Complex64::from_polar(1.0, -x * x0))
        .collect();
    let forcing_transform = |i: usize, tau: f64| -> Result<Vec<Complex64>> {
        let b_tau = sampled_field(&grid, |z| Ok(eval_drift(drift, tau, [z, 0.0])?[0]))?;
        let mut product = GridField {
            grid,
            data: field.slice(i).to_vec(),
        };
        for (j, v) in product.data.iter_mut().enumerate() {
            *v *= b_tau[j];
        }
        Ok(Spectrum::from_field(&product, &cache).coeffs)
    };

    // Anchor: transform the stored first slice and recover its memory
    // term from the variation-of-constants identity, mirroring the
    // marcher's bootstrap.
    let first = Spectrum::from_field(
        &GridField {
            grid,
            data: field.slice(0).to_vec(),
        },
        &cache,
    )
    .coeffs;
    let mut memory: Vec<Complex64> = (0..n)
        .map(|k| decay[k] * phase0[k] - first[k])
        .collect();
    let mut f_prev = forcing_transform(0, dt)?;
    let mut kernel0 = decay.clone();
    let mut residuals = Vec::with_capacity(times.len());
    residuals.push(0.0);

    for (i, &tau) in times.iter().enumerate().skip(1) {
        for (k, v) in kernel0.iter_mut().enumerate() {
            *v *= decay[k];
        }
        let f_next = forcing_transform(i, tau)?;
        let coeffs: Vec<Complex64> = (0..n)
            .map(|k| {
                kernel0[k] * phase0[k]
                    - decay[k] * memory[k]
                    - deriv[k] * dt * (w_left[k] * f_prev[k] + w_right[k] * f_next[k])
            })
            .collect();
        let (rhs, _) = Spectrum { grid, coeffs }.to_field(&cache);
        let sup = rhs
            .data
            .iter()
            .zip(field.slice(i))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        residuals.push(sup);
        for (k, m) in memory.iter_mut().enumerate() {
            let panel = deriv[k] * dt * (w_left[k] * f_prev[k] + w_right[k] * f_next[k]);
            *m = decay[k] * *m + panel;
        }
        f_prev = f_next;
    }
    Ok(residuals)
}

/// Truncation order of the displacement expansion: smallest m such that
/// keeping terms 0..=m leaves a damped tail below [`SHIFT_TAIL_BUDGET`].
///
/// Term m of the propagated coefficient at mode xi is bounded by
/// exp(-h psi) (|xi| v_max)^m / m!. Modes whose whole series stays under
/// budget (exp(-h psi + |xi| v_max) < budget) are excluded up front; for
/// the rest the first omitted term must fall under budget past every
/// mode's growth peak, so the omitted tail is geometrically dominated.
fn shift_term_cap(v_max: f64, hpsi: &[f64], xi: &[f64]) -> Result<usize> {
    let ln_budget = SHIFT_TAIL_BUDGET.ln();
    let mut bound: Vec<f64> = hpsi
        .iter()
        .zip(xi)
        .map(|(&hp, &x)| {
            if -hp + x.abs() * v_max < ln_budget {
                0.0
            } else {
                (-hp).exp()
            }
        })
        .collect();
    let xi_active = xi
        .iter()
        .zip(&bound)
        .filter(|(_, &b)| b > 0.0)
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max);
    let mut m = 0usize;
    loop {
        let mut worst = 0.0f64;
        for (k, b) in bound.iter_mut().enumerate() {
            *b *= xi[k].abs() * v_max / (m + 1) as f64;
            worst = worst.max(*b);
        }
        if worst <= SHIFT_TAIL_BUDGET && (m + 2) as f64 >= 2.0 * xi_active * v_max {
            return Ok(m);
        }
        m += 1;
        if m > MAX_SHIFT_TERMS {
            return Err(Error::Resolution(format!(
                "a one-step displacement of sup {v_max:.3e} needs more than {MAX_SHIFT_TERMS} \
                 shift-expansion terms on a band reaching |xi| = {xi_active:.1}; shrink the \
                 step or the drift amplitude"
            )));
        }
    }
}

/// Add `weight` times the spectrum of `field` propagated through the
/// kernel p(h, y - z - v(z)) into `acc`, WITHOUT the final exp(-h psi)
/// damping (the caller applies it once per step).
///
/// Identity: the propagated transform equals
/// exp(-h psi(xi)) * sum_m ((-i xi)^m / m!) FT[field * v^m](xi),
/// which is exact for band-limited fields; the sum is truncated by
/// [`shift_term_cap`]. `field` is consumed as the running product
/// field * v^m.
fn shifted_kernel_step(
    field: &mut GridField,
    v: &[f64],
    hpsi: &[f64],
    xi: &[f64],
    cache: &FftCache,
    acc: &mut [Complex64],
    weight: f64,
) -> Result<()> {
    let v_max = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cap = shift_term_cap(v_max, hpsi, xi)?;
    let mut mult = vec![Complex64::new(1.0, 0.0); acc.len()];
    for m in 0..=cap {
        if m > 0 {
            for (j, w) in field.data.iter_mut().enumerate() {
                *w *= v[j];
            }
            for (k, mu) in mult.iter_mut().enumerate() {
                *mu *= Complex64::new(0.0, -xi[k]) / m as f64;
            }
        }
        let spec = Spectrum::from_field(field, cache);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += weight * mult[k] * spec.coeffs[k];
        }
    }
    Ok(())
}

/// Whether every time profile inside the drift is constant, in which case
/// the randomized-time average per step collapses to a single evaluation.
fn time_constant(spec: &DriftSpec) -> bool {
    match &spec.variant {
        DriftVariant::LebesguePower(p) => matches!(p.profile, TimeProfile::Constant(_)),
        DriftVariant::LebesgueSum(pieces) => pieces.iter().all(time_constant),
        DriftVariant::Tabulated(t) => t.breaks.is_empty(),
        _ => spec
            .spectral_parts()
            .is_some_and(|(_, profile)| matches!(profile, TimeProfile::Constant(_))),
    }
}

/// Coarse sup of the per-step drift speed over the box and the horizon,
/// used to budget the box margin for transported mass.
fn drift_speed_bound(
    law: &StableLaw,
    drift: &DriftSpec,
    config: &SchemeConfig,
    half_width: f64,
) -> Result<f64> {
    let cutoff = match config.variant {
        SchemeVariant::LebesgueCutoffRandomized => Some(CutoffConfig::new(
            config.cutoff_level,
            config.step,
            law.alpha(),
        )?),
        _ => None,
    };
    let horizon = config.horizon();
    let mut worst = 0.0f64;
    for it in 0..33 {
        let t = horizon * (it as f64 + 0.5) / 33.0;
        for jx in 0..=128 {
            let z = half_width * (jx as f64 / 64.0 - 1.0);
            let b = match &cutoff {
                Some(c) => cutoff_drift(drift, c, t, [z, 0.0])?,
                None => eval_drift(drift, t, [z, 0.0])?,
            };
            if b[0].is_finite() {
                worst = worst.max(b[0].abs());
            }
        }
    }
    Ok(worst)
}

/// The displacement nodes of step k: pairs (evaluation time, weight) whose
/// weighted kernels average to the step's transition kernel.
fn step_nodes(config: &SchemeConfig, drift: &DriftSpec, k: u64) -> Result<Vec<(f64, f64)>> {
    let t_k = config.grid_time(k);
    match config.variant {
        SchemeVariant::BesovMollified => Ok(vec![(t_k, 1.0)]),
        _ if time_constant(drift) => Ok(vec![(t_k + 0.5 * config.step, 1.0)]),
        _ => {
            let (nodes, weights) = gauss_legendre_on(8, 0.0, 1.0);
            Ok(nodes
                .iter()
                .zip(&weights)
                .map(|(u, w)| (t_k + config.step * u, *w))
                .collect())
        }
    }
}

/// One-step displacement map of the scheme at evaluation time t of step k:
/// z -> what the chain adds to z besides noise.
fn step_displacement(
    config: &SchemeConfig,
    drift: &DriftSpec,
    law: &StableLaw,
    cutoff: Option<&CutoffConfig>,
    k: u64,
    t: f64,
    z: f64,
) -> Result<f64> {
    match config.variant {
        SchemeVariant::LebesgueCutoffRandomized => {
            let c = cutoff.expect("cutoff config exists for the Lebesgue variant");
            Ok(config.step * cutoff_drift(drift, c, t, [z, 0.0])?[0])
        }
        SchemeVariant::HolderRandomized => Ok(config.step * eval_drift(drift, t, [z, 0.0])?[0]),
        SchemeVariant::BesovMollified => {
            Ok(integrated_drift_function(drift, law, config.grid_time(k), config.step)?.eval(z))
        }
    }
}

fn march_scheme(
    law: &StableLaw,
    drift: &DriftSpec,
    config: &SchemeConfig,
    grid: SpatialGrid,
) -> Result<MarchOutcome> {
    let h = config.step;
    require_time_resolved(&grid, law, h)?;
    let n = grid.len();
    let cache = FftCache::new(grid.points_per_axis());
    let xi: Vec<f64> = (0..n).map(|i| grid.xi1d(i)).collect();
    let hpsi: Vec<f64> = xi.iter().map(|&x| h * law.psi(x.abs())).collect();
    let decay: Vec<f64> = hpsi.iter().map(|&e| (-e).exp()).collect();
    let cutoff = match config.variant {
        SchemeVariant::LebesgueCutoffRandomized => Some(CutoffConfig::new(
            config.cutoff_level,
            h,
            law.alpha(),
        )?),
        _ => None,
    };
    let x0 = config.start[0];
    let dx = grid.spacing();
    let mut slices: Vec<Vec<f64>> = Vec::with_capacity(config.steps as usize);

    for k in 0..config.steps {
        let nodes = step_nodes(config, drift, k)?;
        let mut acc = vec![Complex64::default(); n];
        if k == 0 {
            // From a point mass the propagated transform is a closed form:
            // the displacement only matters at the start point.
            for &(t, w) in &nodes {
                let v = sample_or_cell_average(
                    &|z| step_displacement(config, drift, law, cutoff.as_ref(), k, t, z),
                    x0,
                    dx,
                )?;
                for (kk, a) in acc.iter_mut().enumerate() {
                    *a += w * Complex64::from_polar(1.0, -xi[kk] * (x0 + v));
                }
            }
        } else {
            let prev = slices.last().expect("previous slice exists");
            for &(t, w) in &nodes {
                let v = sampled_field(&grid, |z| {
                    step_displacement(config, drift, law, cutoff.as_ref(), k, t, z)
                })?;
                let mut work = GridField {
                    grid,
                    data: prev.clone(),
                };
                shifted_kernel_step(&mut work, &v, &hpsi, &xi, &cache, &mut acc, w)?;
            }
        }
        for (kk, a) in acc.iter_mut().enumerate() {
            *a *= decay[kk];
        }
        let (field, imag) = Spectrum { grid, coeffs: acc }.to_field(&cache);
        let t_next = config.grid_time(k + 1);
        let sup = field.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if imag > 1e-8 * sup.max(1.0) {
            return Err(Error::Numerical(format!(
                "inverse transform lost Hermitian symmetry at t = {t_next} (imaginary residue \
                 {imag:.2e})"
            )));
        }
        let contamination = boundary_contamination(&grid, &field.data);
        if contamination > LEAKAGE_BUDGET {
            return Ok(MarchOutcome::Leaked {
                time: t_next,
                contamination,
            });
        }
        slices.push(field.data);
    }
    Ok(MarchOutcome::Done(slices))
}

fn scheme_times(config: &SchemeConfig) -> Vec<f64> {
    (1..=config.steps).map(|k| config.grid_time(k)).collect()
}

/// Law of the simulated chain at every grid time, built by pushing the
/// exact one-step transition kernels forward on an automatically sized
/// box. Drift admissibility is validated exactly as for path simulation;
/// the box is doubled (same spacing) when a slice leaks, up to three
/// times.
///
/// The spacing starts at the kernel's own Nyquist gate and is then
/// halved until two consecutive marches agree on every slice within
/// [`DRIFT_RESOLUTION_BUDGET`] of the slice sup at the shared nodes:
/// a drift rougher than the grid (the clipped power singularity is the
/// model case) is only represented through its node samples, and the
/// march converges to the chain's law exactly as fast as those samples
/// converge to the drift.
pub fn solve_scheme_density(
    law: &StableLaw,
    drift: &DriftSpec,
    config: &SchemeConfig,
) -> Result<DensityField> {
    if law.dim() != 1 {
        return Err(Error::Parameter(
            "the scheme density solver handles d = 1 only".into(),
        ));
    }
    config.validate(drift, law)?;
    let base = default_kernel_grid(law, config.step, config.horizon().max(config.step), ALIAS_BUDGET)?;
    let speed = drift_speed_bound(law, drift, config, base.half_width())?;
    let margin = config.start[0].abs() + config.horizon() * speed;
    let mut grid = if margin > 0.0 {
        grid_with_half_width(&base, base.half_width() + margin)?
    } else {
        base
    };
    let mut widenings = 0;
    'geometry: loop {
        let mut widen = |g: &SpatialGrid, time: f64, contamination: f64| -> Result<SpatialGrid> {
            if widenings == MAX_WIDENINGS {
                return Err(leak_error(time, contamination, g.half_width()));
            }
            widenings += 1;
            grid_with_half_width(g, 2.0 * g.half_width())
        };
        let mut coarse = match march_scheme(law, drift, config, grid)? {
            MarchOutcome::Done(slices) => slices,
            MarchOutcome::Leaked {
                time,
                contamination,
            } => {
                grid = widen(&grid, time, contamination)?;
                continue 'geometry;
            }
        };
        for _ in 0..MAX_REFINEMENTS {
            let fine_grid =
                SpatialGrid::new(1, grid.half_width(), grid.points_per_axis() * 2)?;
            let fine = match march_scheme(law, drift, config, fine_grid)? {
                MarchOutcome::Done(slices) => slices,
                MarchOutcome::Leaked {
                    time,
                    contamination,
                } => {
                    grid = widen(&fine_grid, time, contamination)?;
                    continue 'geometry;
                }
            };
            let mut worst = 0.0f64;
            for (c_slice, f_slice) in coarse.iter().zip(&fine) {
                let sup = f_slice.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                let diff = c_slice
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| (f_slice[2 * j] - c).abs())
                    .fold(0.0f64, f64::max);
                if sup > 0.0 {
                    worst = worst.max(diff / sup);
                }
            }
            grid = fine_grid;
            coarse = fine;
            if worst <= DRIFT_RESOLUTION_BUDGET {
                return DensityField::assemble(
                    grid,
                    config.start[0],
                    DensityProvenance::SchemeExact,
                    scheme_times(config),
                    coarse,
                );
            }
        }
        return Err(Error::Resolution(format!(
            "the drift is not resolved on this box: marches at spacings {:.3e} and {:.3e} \
             still disagree beyond {DRIFT_RESOLUTION_BUDGET:.1e} of the slice sup after \
             {MAX_REFINEMENTS} refinements; the drift varies below the finest spacing",
            2.0 * grid.spacing(),
            grid.spacing(),
        )));
    }
}

/// Same as [`solve_scheme_density`] on a caller-chosen grid, for
/// refinement studies that must compare densities on one common box. A
/// leaking slice is an error here; the caller owns the geometry.
pub fn solve_scheme_density_on_grid(
    law: &StableLaw,
    drift: &DriftSpec,
    config: &SchemeConfig,
    grid: SpatialGrid,
) -> Result<DensityField> {
    if law.dim() != 1 || grid.dim() != 1 {
        return Err(Error::Parameter(
            "the scheme density solver handles d = 1 only".into(),
        ));
    }
    config.validate(drift, law)?;
    match march_scheme(law, drift, config, grid)? {
        MarchOutcome::Done(slices) => DensityField::assemble(
            grid,
            config.start[0],
            DensityProvenance::SchemeExact,
            scheme_times(config),
            slices,
        ),
        MarchOutcome::Leaked {
            time,
            contamination,
        } => Err(leak_error(time, contamination, grid.half_width())),
    }
}

/// L^rho distance (rho >= 1, infinity for the sup) between the slices of
/// two fields at a common time. The fields must share the exact same grid;
/// interpolating between boxes would hide exactly the resolution effects
/// this is used to measure.
pub fn density_error_norm(a: &DensityField, b: &DensityField, t: f64, rho: f64) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::Parameter(format!(
            "density grids differ (half widths {} vs {}, {} vs {} points); rebuild on a common \
             grid",
            a.grid().half_width(),
            b.grid().half_width(),
            a.grid().points_per_axis(),
            b.grid().points_per_axis()
        )));
    }
    if !(rho >= 1.0) {
        return Err(Error::Parameter(format!(
            "norm exponent must satisfy rho >= 1 (or infinity), got {rho}"
        )));
    }
    let sa = a
        .slice_at(t)
        .ok_or_else(|| Error::Parameter(format!("first field has no slice at t = {t}")))?;
    let sb = b
        .slice_at(t)
        .ok_or_else(|| Error::Parameter(format!("second field has no slice at t = {t}")))?;
    let diff: Vec<f64> = sa.iter().zip(sb).map(|(x, y)| x - y).collect();
    Ok(a.grid().lp_norm(&diff, rho))
}

/// Per-time and overall sup of density / envelope for a density family
/// against a heavy-tail profile, radius measured from the start point.
/// An overall value <= C certifies the two-sided comparison constant C on
/// the computed range.
#[derive(Debug, Clone)]
pub struct AronsonReport {
    /// (time, sup over the box of density / profile).
    pub per_time: Vec<(f64, f64)>,
    /// Largest ratio over all times; 0 for an empty family.
    pub overall: f64,
}

/// Scan a density family against the kernel-shaped envelope: for every
/// slice, the sup over the box of density(x) / envelope(t, |x - center|).
pub fn verify_aronson(field: &DensityField, profile: &BarPProfile) -> AronsonReport {
    let grid = field.grid();
    let mut per_time = Vec::with_capacity(field.len());
    let mut overall = 0.0f64;
    for (i, &t) in field.times().iter().enumerate() {
        let mut sup = 0.0f64;
        for (j, &v) in field.slice(i).iter().enumerate() {
            let r = (grid.node1d(j) - field.center()).abs();
            let envelope = profile.eval(t, r);
            if envelope > 0.0 {
                sup = sup.max(v / envelope);
            }
        }
        per_time.push((t, sup));
        overall = overall.max(sup);
    }
    AronsonReport { per_time, overall }
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Gaussian kernel density estimate of terminal samples on a periodic
/// grid: cloud-in-cell deposit, then spectral smoothing with bandwidth
/// `bandwidth` (Silverman's rule with the robust interquartile scale when
/// absent, floored at half a cell). `center` is recorded for envelope
/// checks against the same start point as the solvers.
pub fn kde_from_paths(
    grid: SpatialGrid,
    samples: &[f64],
    time: f64,
    center: f64,
    bandwidth: Option<f64>,
) -> Result<DensityField> {
    if grid.dim() != 1 {
        return Err(Error::Parameter("KDE grids are one-dimensional".into()));
    }
    if samples.is_empty() {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    if !samples.iter().all(|v| v.is_finite()) {
        return Err(Error::Parameter("samples must be finite".into()));
    }
    if !(time > 0.0) || !time.is_finite() {
        return Err(Error::Parameter(format!(
            "sample time must be positive and finite, got {time}"
        )));
    }
    if let Some(bw) = bandwidth {
        if !(bw > 0.0) || !bw.is_finite() {
            return Err(Error::Parameter(format!(
                "bandwidth must be positive and finite, got {bw}"
            )));
        }
    }
    let bw = match bandwidth {
        Some(bw) => bw,
        None => {
            let (_, stderr) = crate::numeric::mean_and_stderr(samples);
            let std = stderr * (samples.len() as f64).sqrt();
            let mut sorted = samples.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
            // The interquartile scale keeps the rule usable for heavy
            // tails, where the sample standard deviation is unstable.
            let mut scale = if std.is_finite() { std } else { f64::INFINITY };
            if iqr > 0.0 {
                scale = scale.min(iqr / 1.34);
            }
            if !(scale > 0.0) || !scale.is_finite() {
                scale = grid.spacing();
            }
            (1.06 * scale * (samples.len() as f64).powf(-0.2)).max(0.5 * grid.spacing())
        }
    };

    let n = grid.points_per_axis();
    let dx = grid.spacing();
    let weight = 1.0 / (samples.len() as f64 * dx);
    let mut hist = vec![0.0f64; n];
    for &s in samples {
        let u = (grid.wrap(s) + grid.half_width()) / dx;
        let j0 = (u.floor() as usize) % n;
        let frac = u - u.floor();
        let j1 = (j0 + 1) % n;
        hist[j0] += (1.0 - frac) * weight;
        hist[j1] += frac * weight;
    }
    let cache = FftCache::new(n);
    let field = GridField { grid, data: hist };
    let mut spec = Spectrum::from_field(&field, &cache);
    spec.apply_multiplier(|xi| Complex64::new((-0.5 * bw * bw * xi[0] * xi[0]).exp(), 0.0));
    let (smooth, _) = spec.to_field(&cache);
    DensityField::assemble(
        grid,
        center,
        DensityProvenance::KdeFromPaths,
        vec![time],
        vec![smooth.data],
    )
}
