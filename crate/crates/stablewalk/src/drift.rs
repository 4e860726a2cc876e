//! Drift families for the three regularity regimes, plus the space-cutoff
//! drift, the semigroup-mollified drift and the time-integrated drift.
//!
//! Spectral variants (finite cosine series) keep every semigroup action
//! exact: applying the kernel semigroup multiplies mode k by
//! exp(-u psi(pi k / L)), so the mollified and time-integrated drifts carry
//! no spatial discretization error.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::noise::StableLaw;
use crate::numeric::gauss_legendre_on;
use crate::rng::{stream, Role};

/// Scalar time profile g(t) multiplying a drift.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Constant(f64),
    /// Value values[i] on [breaks[i-1], breaks[i]), with breaks[-1] = 0;
    /// the last value extends beyond the final break.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// g(t) = t^(-exponent) for t > 0 and g(0) = 0 (the schemes zero the
    /// first step anyway); realizes finite L^theta-in-time norms for
    /// exponent * theta < 1.
    InversePower { exponent: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::PiecewiseConstant { breaks, values } => {
                let mut idx = 0;
                while idx < breaks.len() && t >= breaks[idx] {
                    idx += 1;
                }
                values[idx.min(values.len() - 1)]
            }
            TimeProfile::InversePower { exponent } => {
                if t > 0.0 {
                    t.powf(-exponent)
                } else {
                    0.0
                }
            }
        }
    }

    fn as_constant(&self) -> Option<f64> {
        match self {
            TimeProfile::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// Discontinuity points inside (a, b), for quadrature splitting.
    fn breaks_within(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            TimeProfile::PiecewiseConstant { breaks, .. } => breaks
                .iter()
                .copied()
                .filter(|&t| t > a && t < b)
                .collect(),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TimeProfile::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::Parameter("profile constant must be finite".into()));
                }
            }
            TimeProfile::PiecewiseConstant { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::Parameter(format!(
                        "piecewise profile needs one more value than breaks, got {} values \
                         for {} breaks",
                        values.len(),
                        breaks.len()
                    )));
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Parameter(
                        "piecewise profile breaks must increase strictly".into(),
                    ));
                }
            }
            TimeProfile::InversePower { exponent } => {
                if !(*exponent > 0.0 && *exponent < 1.0) {
                    return Err(Error::Parameter(format!(
                        "inverse-power profile exponent must lie in (0, 1), got {exponent}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Declared integrability and regularity indices (p, q, theta, beta) of a
/// drift: b in L^theta([0,T], B^beta_{p,q}), with beta = 0 standing for the
/// plain Lebesgue regime and beta > 0 for Hoelder. Infinite entries are
/// allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityIndices {
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub beta: f64,
}

impl RegularityIndices {
    pub fn new(p: f64, q: f64, theta: f64, beta: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) || !(theta >= 1.0) {
            return Err(Error::Parameter(format!(
                "integrability indices must be >= 1, got p={p}, q={q}, theta={theta}"
            )));
        }
        Ok(RegularityIndices { p, q, theta, beta })
    }
}

/// One cosine/sine pair at integer frequency index k (physical frequency
/// k pi / half_width).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMode {
    pub index: u64,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

/// A real trigonometric polynomial on the circle of half width L:
/// f(x) = sum_k cos_amp_k cos(k pi x / L) + sin_amp_k sin(k pi x / L).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    pub half_width: f64,
    pub modes: Vec<SpectralMode>,
}

impl SpectralFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let base = std::f64::consts::PI * x / self.half_width;
        let mut sum = 0.0;
        for m in &self.modes {
            let (s, c) = (m.index as f64 * base).sin_cos();
            sum += m.cos_amp * c + m.sin_amp * s;
        }
        sum
    }

    /// Physical frequency of mode k.
    pub fn frequency(&self, index: u64) -> f64 {
        std::f64::consts::PI * index as f64 / self.half_width
    }

    /// Multiply every mode amplitude by factor(physical frequency).
    pub fn scaled_by<F: Fn(f64) -> f64>(&self, factor: F) -> SpectralFunction {
        SpectralFunction {
            half_width: self.half_width,
            modes: self
                .modes
                .iter()
                .map(|m| {
                    let f = factor(self.frequency(m.index));
                    SpectralMode {
                        index: m.index,
                        cos_amp: m.cos_amp * f,
                        sin_amp: m.sin_amp * f,
                    }
                })
                .collect(),
        }
    }

    /// Largest frequency index present.
    pub fn max_index(&self) -> u64 {
        self.modes.iter().map(|m| m.index).max().unwrap_or(0)
    }

    /// Derivative d/dx of the series at x.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let base = std::f64::consts::PI * x / self.half_width;
        let rate = std::f64::consts::PI / self.half_width;
        let mut sum = 0.0;
        for m in &self.modes {
            let q = m.index as f64 * rate;
            let (s, c) = (m.index as f64 * base).sin_cos();
            sum += q * (m.sin_amp * c - m.cos_amp * s);
        }
        sum
    }
}

/// Radial power drift b(t,x) = -kappa g(t) x / |x|^(1+delta), the model
/// drift whose singular part near the origin lies in L^p exactly for
/// p < d/delta. `split_radius` marks where the declared decomposition
/// separates the singular piece from the bounded tail; it does not change
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct LebesguePowerDrift {
    pub amplitude: f64,
    pub exponent: f64,
    pub split_radius: f64,
    pub dim: usize,
    pub profile: TimeProfile,
}

/// Weierstrass-type cosine series sum_{j<=J} a^(-beta j) cos(a^j x + phi_j)
/// on half width pi; with no seed all phases vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderDrift {
    pub base: u64,
    pub levels: u32,
    pub beta: f64,
    pub seed: Option<u64>,
    pub amplitude: f64,
    pub profile: TimeProfile,
    data: SpectralFunction,
}

impl HolderDrift {
    pub fn spectral(&self) -> &SpectralFunction {
        &self.data
    }
}

/// Seeded random cosine series with coefficient decay (1+k)^-(beta + d/2)
/// and independent signs, the concrete carrier of negative regularity
/// beta < 0: partial sums stay bounded in B^beta while blowing up in any
/// smoother norm as the mode count grows.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovDrift {
    pub max_mode: u64,
    pub beta: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub profile: TimeProfile,
    data: SpectralFunction,
}

impl BesovDrift {
    pub fn spectral(&self) -> &SpectralFunction {
        &self.data
    }

    /// Sign of coefficient k, reproducible from (seed, k) alone so that
    /// refining the mode count keeps earlier coefficients.
    pub fn sign(seed: u64, k: u64) -> f64 {
        let mut rng = stream(seed, k, 0, Role::Cell);
        if rng.gen_bool(0.5) {
            1.0
        } else {
            -1.0
        }
    }
}

/// Explicit trigonometric polynomial drift: smooth, band-limited, with
/// every Fourier coefficient under the caller's control. The workhorse for
/// closed-form oracles and cross-scheme consistency checks.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimitedDrift {
    pub profile: TimeProfile,
    data: SpectralFunction,
}

impl BandLimitedDrift {
    pub fn spectral(&self) -> &SpectralFunction {
        &self.data
    }
}

/// Values on a periodic grid, piecewise constant in time between breaks.
#[derive(Debug, Clone)]
pub struct TabulatedDrift {
    pub grid: SpatialGrid,
    pub breaks: Vec<f64>,
    /// values[slab][node] is the drift vector at that grid node.
    pub values: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone)]
pub enum DriftVariant {
    LebesguePower(LebesguePowerDrift),
    LebesgueSum(Vec<DriftSpec>),
    HolderSpectral(HolderDrift),
    BesovSpectral(BesovDrift),
    BandLimited(BandLimitedDrift),
    Tabulated(TabulatedDrift),
}

/// A drift together with its declared regularity indices.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    pub variant: DriftVariant,
    pub declared: RegularityIndices,
}

impl DriftSpec {
    /// Radial power drift. Construction only requires local integrability
    /// (exponent < d); the scheme-level hypothesis exponent < min(alpha-1,
    /// d/2) is checked by [`power_drift_admissible`] once a law is fixed.
    pub fn lebesgue_power(
        amplitude: f64,
        exponent: f64,
        split_radius: f64,
        dim: usize,
        profile: TimeProfile,
    ) -> Result<Self> {
        profile.validate()?;
        if dim == 0 || dim > 2 {
            return Err(Error::Parameter("power drift supports d in {1, 2}".into()));
        }
        if !(exponent > 0.0 && exponent < dim as f64) {
            return Err(Error::Parameter(format!(
                "power-drift exponent must lie in (0, d) for local integrability, got {exponent}"
            )));
        }
        if !(split_radius > 0.0) {
            return Err(Error::Parameter("split radius must be positive".into()));
        }
        // Singular piece lies in L^p for p < d/exponent; declare a p
        // strictly inside with the conventional safety margin.
        let p = 0.9 * dim as f64 / exponent;
        Ok(DriftSpec {
            variant: DriftVariant::LebesguePower(LebesguePowerDrift {
                amplitude,
                exponent,
                split_radius,
                dim,
                profile,
            }),
            declared: RegularityIndices::new(p.max(2.0), f64::INFINITY, f64::INFINITY, 0.0)?,
        })
    }

    pub fn lebesgue_sum(pieces: Vec<DriftSpec>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Parameter("drift sum needs at least one piece".into()));
        }
        let dim = pieces[0].dim();
        for piece in &pieces {
            if piece.dim() != dim {
                return Err(Error::Parameter("drift-sum pieces must share a dimension".into()));
            }
            match piece.variant {
                DriftVariant::LebesguePower(_) | DriftVariant::Tabulated(_) => {}
                _ => {
                    return Err(Error::Parameter(
                        "drift-sum pieces must be power or tabulated drifts".into(),
                    ))
                }
            }
        }
        let p = pieces.iter().map(|s| s.declared.p).fold(f64::INFINITY, f64::min);
        let theta = pieces
            .iter()
            .map(|s| s.declared.theta)
            .fold(f64::INFINITY, f64::min);
        let declared = RegularityIndices::new(p, f64::INFINITY, theta, 0.0)?;
        Ok(DriftSpec {
            variant: DriftVariant::LebesgueSum(pieces),
            declared,
        })
    }

    /// Weierstrass-type series with target Hoelder exponent beta in (0, 1).
    pub fn holder_spectral(
        base: u64,
        levels: u32,
        beta: f64,
        seed: Option<u64>,
        amplitude: f64,
        profile: TimeProfile,
    ) -> Result<Self> {
        profile.validate()?;
        if base < 2 {
            return Err(Error::Parameter(format!(
                "series base must be at least 2, got {base}"
            )));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Parameter(format!(
                "Hoelder exponent must lie in (0, 1), got {beta}"
            )));
        }
        if (levels as f64) * (base as f64).ln() > 40.0f64.ln() * 32.0 {
            return Err(Error::Parameter("series level too deep".into()));
        }
        let modes = (0..=levels)
            .map(|j| {
                let freq = base.pow(j);
                let amp = amplitude * (base as f64).powf(-beta * j as f64);
                let phase = match seed {
                    None => 0.0,
                    Some(s) => {
                        let mut rng = stream(s, j as u64, 0, Role::Cell);
                        rng.gen_range(0.0..std::f64::consts::TAU)
                    }
                };
                SpectralMode {
                    index: freq,
                    cos_amp: amp * phase.cos(),
                    sin_amp: -amp * phase.sin(),
                }
            })
            .collect();
        Ok(DriftSpec {
            variant: DriftVariant::HolderSpectral(HolderDrift {
                base,
                levels,
                beta,
                seed,
                amplitude,
                profile,
                data: SpectralFunction {
                    half_width: std::f64::consts::PI,
                    modes,
                },
            }),
            declared: RegularityIndices::new(
                f64::INFINITY,
                f64::INFINITY,
                f64::INFINITY,
                beta,
            )?,
        })
    }

    /// Seeded random cosine series with negative target regularity.
    #[allow(clippy::too_many_arguments)]
    pub fn besov_spectral(
        max_mode: u64,
        beta: f64,
        p: f64,
        q: f64,
        seed: u64,
        amplitude: f64,
        half_width: f64,
        profile: TimeProfile,
    ) -> Result<Self> {
        profile.validate()?;
        if !(beta < 0.0) {
            return Err(Error::Parameter(format!(
                "negative-regularity drift needs beta < 0, got {beta}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(Error::Parameter("half width must be positive".into()));
        }
        if max_mode > 1 << 20 {
            return Err(Error::Parameter("mode count too large".into()));
        }
        // Coefficient magnitude (1+k)^-(beta + d/2) in d = 1; the random
        // signs provide the square-root cancellation that keeps the same
        // decay valid for every p >= 2.
        let decay = beta + 0.5;
        let modes = (0..=max_mode)
            .map(|k| {
                let mag = amplitude * (1.0 + k as f64).powf(-decay);
                let sigma = BesovDrift::sign(seed, k);
                SpectralMode {
                    index: k,
                    cos_amp: if k == 0 { mag * sigma } else { 2.0 * mag * sigma },
                    sin_amp: 0.0,
                }
            })
            .collect();
        Ok(DriftSpec {
            variant: DriftVariant::BesovSpectral(BesovDrift {
                max_mode,
                beta,
                seed,
                amplitude,
                profile,
                data: SpectralFunction { half_width, modes },
            }),
            declared: RegularityIndices::new(p, q, f64::INFINITY, beta)?,
        })
    }

    /// Smooth trigonometric drift from explicit modes. The declared label
    /// defaults to a Hoelder-friendly smooth drift; override it with
    /// `with_declared` to study the same function under other variants.
    pub fn band_limited(
        half_width: f64,
        modes: Vec<SpectralMode>,
        profile: TimeProfile,
    ) -> Result<Self> {
        profile.validate()?;
        if !(half_width > 0.0) {
            return Err(Error::Parameter("half width must be positive".into()));
        }
        if modes.is_empty() {
            return Err(Error::Parameter(
                "band-limited drift needs at least one mode".into(),
            ));
        }
        Ok(DriftSpec {
            variant: DriftVariant::BandLimited(BandLimitedDrift {
                profile,
                data: SpectralFunction { half_width, modes },
            }),
            declared: RegularityIndices::new(
                f64::INFINITY,
                f64::INFINITY,
                f64::INFINITY,
                0.9,
            )?,
        })
    }

    pub fn tabulated(
        grid: SpatialGrid,
        breaks: Vec<f64>,
        values: Vec<Vec<[f64; 2]>>,
        declared: RegularityIndices,
    ) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::Parameter(
                "tabulated drift needs one value slab more than breaks".into(),
            ));
        }
        for slab in &values {
            if slab.len() != grid.len() {
                return Err(Error::Parameter(format!(
                    "value slab length {} does not match grid size {}",
                    slab.len(),
                    grid.len()
                )));
            }
        }
        Ok(DriftSpec {
            variant: DriftVariant::Tabulated(TabulatedDrift { grid, breaks, values }),
            declared,
        })
    }

    pub fn with_declared(mut self, declared: RegularityIndices) -> Self {
        self.declared = declared;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.variant {
            DriftVariant::LebesguePower(d) => d.dim,
            DriftVariant::LebesgueSum(pieces) => pieces[0].dim(),
            DriftVariant::HolderSpectral(_)
            | DriftVariant::BesovSpectral(_)
            | DriftVariant::BandLimited(_) => 1,
            DriftVariant::Tabulated(d) => d.grid.dim(),
        }
    }

    /// The spatial cosine series and its time profile, for variants that
    /// have one.
    pub fn spectral_parts(&self) -> Option<(&SpectralFunction, &TimeProfile)> {
        match &self.variant {
            DriftVariant::HolderSpectral(d) => Some((&d.data, &d.profile)),
            DriftVariant::BesovSpectral(d) => Some((&d.data, &d.profile)),
            DriftVariant::BandLimited(d) => Some((&d.data, &d.profile)),
            _ => None,
        }
    }
}

/// Scheme-level admissibility of the power drift: the singular exponent
/// must stay below both alpha - 1 and d/2.
pub fn power_drift_admissible(exponent: f64, alpha: f64, dim: usize) -> bool {
    exponent < (alpha - 1.0).min(dim as f64 / 2.0)
}

/// Pointwise drift evaluation b(t, x); x is read in the first dim()
/// coordinates, the result occupies the same.
pub fn eval_drift(spec: &DriftSpec, t: f64, x: [f64; 2]) -> Result<[f64; 2]> {
    match &spec.variant {
        DriftVariant::LebesguePower(d) => {
            let r2: f64 = x.iter().take(d.dim).map(|v| v * v).sum();
            if r2 == 0.0 {
                return Ok([0.0, 0.0]);
            }
            let r = r2.sqrt();
            let factor = -d.amplitude * d.profile.eval(t) / r.powf(1.0 + d.exponent);
            let mut out = [0.0, 0.0];
            for (o, v) in out.iter_mut().zip(x.iter()).take(d.dim) {
                *o = factor * v;
            }
            Ok(out)
        }
        DriftVariant::LebesgueSum(pieces) => {
            let mut out = [0.0, 0.0];
            for piece in pieces {
                let v = eval_drift(piece, t, x)?;
                out[0] += v[0];
                out[1] += v[1];
            }
            Ok(out)
        }
        DriftVariant::HolderSpectral(d) => {
            Ok([d.data.eval(x[0]) * d.profile.eval(t), 0.0])
        }
        DriftVariant::BesovSpectral(d) => {
            Ok([d.data.eval(x[0]) * d.profile.eval(t), 0.0])
        }
        DriftVariant::BandLimited(d) => {
            Ok([d.data.eval(x[0]) * d.profile.eval(t), 0.0])
        }
        DriftVariant::Tabulated(d) => {
            let grid = &d.grid;
            for axis in 0..grid.dim() {
                if x[axis].abs() > grid.half_width() {
                    return Err(Error::Domain(format!(
                        "point {x:?} lies outside the tabulated box of half width {}",
                        grid.half_width()
                    )));
                }
            }
            let mut slab = 0;
            while slab < d.breaks.len() && t >= d.breaks[slab] {
                slab += 1;
            }
            let table = &d.values[slab.min(d.values.len() - 1)];
            let n = grid.points_per_axis();
            let spacing = grid.spacing();
            // Periodic multilinear interpolation.
            let locate = |coord: f64| -> (usize, f64) {
                let rel = (coord + grid.half_width()) / spacing;
                let i = rel.floor() as isize;
                let frac = rel - i as f64;
                (i.rem_euclid(n as isize) as usize, frac)
            };
            if grid.dim() == 1 {
                let (i, u) = locate(x[0]);
                let a = table[i];
                let b = table[(i + 1) % n];
                Ok([a[0] * (1.0 - u) + b[0] * u, a[1] * (1.0 - u) + b[1] * u])
            } else {
                let (i, u) = locate(x[0]);
                let (j, v) = locate(x[1]);
                let idx = |ii: usize, jj: usize| table[(ii % n) * n + (jj % n)];
                let mut out = [0.0, 0.0];
                for axis in 0..2 {
                    let f00 = idx(i, j)[axis];
                    let f10 = idx(i + 1, j)[axis];
                    let f01 = idx(i, j + 1)[axis];
                    let f11 = idx(i + 1, j + 1)[axis];
                    out[axis] = f00 * (1.0 - u) * (1.0 - v)
                        + f10 * u * (1.0 - v)
                        + f01 * (1.0 - u) * v
                        + f11 * u * v;
                }
                Ok(out)
            }
        }
    }
}

/// Space-cutoff, first-step-zeroed drift parameters: the truncation
/// threshold is B h^(1/alpha - 1).
#[derive(Debug, Clone, Copy)]
pub struct CutoffConfig {
    pub b_max: f64,
    pub h: f64,
    pub alpha: f64,
}

impl CutoffConfig {
    pub fn new(b_max: f64, h: f64, alpha: f64) -> Result<Self> {
        if !(b_max > 0.0 && h > 0.0) {
            return Err(Error::Parameter(
                "cutoff level and step must be positive".into(),
            ));
        }
        Ok(CutoffConfig { b_max, h, alpha })
    }

    pub fn threshold(&self) -> f64 {
        self.b_max * self.h.powf(1.0 / self.alpha - 1.0)
    }
}

/// b_h(t, x): zero before the first grid time h, otherwise b(t, x) with its
/// norm clipped at the threshold, direction preserved.
pub fn cutoff_drift(spec: &DriftSpec, cfg: &CutoffConfig, t: f64, x: [f64; 2]) -> Result<[f64; 2]> {
    if t < cfg.h {
        return Ok([0.0, 0.0]);
    }
    let v = eval_drift(spec, t, x)?;
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let thr = cfg.threshold();
    if norm <= thr || norm == 0.0 {
        Ok(v)
    } else {
        let f = thr / norm;
        Ok([v[0] * f, v[1] * f])
    }
}

/// The semigroup-mollified drift at an off-grid time s: the spatial
/// function P_{s - tau} b(s, .) where tau is the last grid time below s.
/// Exact on spectral drifts (mode k is damped by exp(-(s-tau) psi_k)).
pub fn mollified_drift(
    spec: &DriftSpec,
    law: &StableLaw,
    s: f64,
    h: f64,
) -> Result<SpectralFunction> {
    let (data, profile) = spec
        .spectral_parts()
        .ok_or_else(|| Error::Parameter("mollified drift requires a spectral drift".into()))?;
    let tau = (s / h).floor() * h;
    let gap = s - tau;
    if gap == 0.0 {
        return Err(Error::Parameter(format!(
            "mollified drift is defined off the time grid only; s = {s} is a multiple of h = {h}"
        )));
    }
    let g = profile.eval(s);
    Ok(data.scaled_by(|xi| g * (-gap * law.psi(xi)).exp()))
}

/// integral over (0, w) of g(s + r) exp(-r psi) dr, with dyadic panel
/// refinement towards r = 0 so that both the exponential boundary layer
/// (w psi >> 1) and an integrable profile singularity at s = 0 are
/// resolved; profile discontinuities become panel boundaries.
fn profile_exponential_integral(profile: &TimeProfile, s: f64, w: f64, psi: f64) -> f64 {
    if let Some(c) = profile.as_constant() {
        let x = w * psi;
        return if x < 1e-10 {
            c * w * (1.0 - 0.5 * x + x * x / 6.0)
        } else {
            c * (1.0 - (-x).exp()) / psi
        };
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(60);
    cuts.push(w);
    let mut r = w;
    for _ in 0..52 {
        r *= 0.5;
        cuts.push(r);
    }
    cuts.push(0.0);
    for b in profile.breaks_within(s, s + w) {
        cuts.push(b - s);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let (nodes, weights) = gauss_legendre_on(8, 0.0, 1.0);
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for (&z, &wt) in nodes.iter().zip(&weights) {
            let rr = a + len * z;
            acc += wt * profile.eval(s + rr) * (-rr * psi).exp();
        }
        total += acc * len;
    }
    total
}

/// The time-integrated reconstructed drift as a spatial function:
/// z -> integral over (s, s+w) of P_{u-s} b(u, .) du evaluated exactly per
/// mode (time-constant profiles) or by panel quadrature otherwise.
pub fn integrated_drift_function(
    spec: &DriftSpec,
    law: &StableLaw,
    s: f64,
    window: f64,
) -> Result<SpectralFunction> {
    if !(window > 0.0) {
        return Err(Error::Parameter(format!(
            "integration window must be positive, got {window}"
        )));
    }
    let (data, profile) = spec
        .spectral_parts()
        .ok_or_else(|| Error::Parameter("integrated drift requires a spectral drift".into()))?;
    Ok(SpectralFunction {
        half_width: data.half_width,
        modes: data
            .modes
            .iter()
            .map(|m| {
                let psi = law.psi(data.frequency(m.index));
                let weight = profile_exponential_integral(profile, s, window, psi);
                SpectralMode {
                    index: m.index,
                    cos_amp: m.cos_amp * weight,
                    sin_amp: m.sin_amp * weight,
                }
            })
            .collect(),
    })
}

/// Pointwise value of the time-integrated drift (first coordinate).
pub fn integrated_drift(
    spec: &DriftSpec,
    law: &StableLaw,
    s: f64,
    z: f64,
    window: f64,
) -> Result<[f64; 2]> {
    let f = integrated_drift_function(spec, law, s, window)?;
    Ok([f.eval(z), 0.0])
}

/// Smooth approximation b^eps: every Fourier coefficient damped by
/// exp(-eps psi_k), i.e. the kernel semigroup applied at time eps.
pub fn mollify_distribution(spec: &DriftSpec, law: &StableLaw, eps: f64) -> Result<DriftSpec> {
    if eps < 0.0 {
        return Err(Error::Parameter("mollification scale must be >= 0".into()));
    }
    let damp = |data: &SpectralFunction| data.scaled_by(|xi| (-eps * law.psi(xi)).exp());
    let mut out = spec.clone();
    match &mut out.variant {
        DriftVariant::HolderSpectral(d) => d.data = damp(&d.data),
        DriftVariant::BesovSpectral(d) => d.data = damp(&d.data),
        DriftVariant::BandLimited(d) => d.data = damp(&d.data),
        _ => {
            return Err(Error::Parameter(
                "mollification requires a spectral drift".into(),
            ))
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn besov_test_drift(max_mode: u64, beta: f64, seed: u64) -> DriftSpec {
        DriftSpec::besov_spectral(
            max_mode,
            beta,
            f64::INFINITY,
            f64::INFINITY,
            seed,
            1.0,
            std::f64::consts::PI,
            TimeProfile::Constant(1.0),
        )
        .unwrap()
    }

    #[test]
    fn power_drift_reference_value() {
        // b(x) = -x / |x|^(1+delta), magnitude |x|^(-delta):
        // at x = 4, delta = 1/2 the value is -4 / 4^1.5 = -1/2.
        let spec = DriftSpec::lebesgue_power(1.0, 0.5, 1.0, 1, TimeProfile::Constant(1.0))
            .unwrap();
        let v = eval_drift(&spec, 0.3, [4.0, 0.0]).unwrap();
        assert_relative_eq!(v[0], -0.5, epsilon = 1e-15);
        // Removable convention at the singular point.
        assert_eq!(eval_drift(&spec, 0.3, [0.0, 0.0]).unwrap(), [0.0, 0.0]);
        // Radial direction in d = 2.
        let spec2 =
            DriftSpec::lebesgue_power(2.0, 0.25, 1.0, 2, TimeProfile::Constant(1.0)).unwrap();
        let w = eval_drift(&spec2, 0.0, [3.0, 4.0]).unwrap();
        let r = 5.0f64;
        let factor = -2.0 / r.powf(1.25);
        assert_relative_eq!(w[0], factor * 3.0, epsilon = 1e-14);
        assert_relative_eq!(w[1], factor * 4.0, epsilon = 1e-14);
    }

    #[test]
    fn power_drift_admissibility() {
        // Scheme-level hypothesis: exponent below alpha - 1 ...
        assert!(!power_drift_admissible(0.45, 1.4, 1));
        assert!(power_drift_admissible(0.45, 1.5, 1));
        // ... and below d/2.
        assert!(!power_drift_admissible(0.6, 2.0, 1));
        assert!(power_drift_admissible(0.6, 2.0, 2));
        // Construction itself only demands local integrability.
        assert!(DriftSpec::lebesgue_power(1.0, 1.2, 1.0, 1, TimeProfile::Constant(1.0)).is_err());
        assert!(DriftSpec::lebesgue_power(1.0, 0.6, 1.0, 1, TimeProfile::Constant(1.0)).is_ok());
    }

    #[test]
    fn holder_single_mode_is_scaled_cosine() {
        let spec =
            DriftSpec::holder_spectral(2, 0, 0.5, None, 1.0, TimeProfile::Constant(0.5)).unwrap();
        for &x in &[0.0, 0.7, -1.9] {
            let v = eval_drift(&spec, 3.0, [x, 0.0]).unwrap();
            assert_relative_eq!(v[0], 0.5 * x.cos(), epsilon = 1e-14);
        }
        // Piecewise profile evaluates per slab.
        let spec = DriftSpec::holder_spectral(
            2,
            0,
            0.5,
            None,
            1.0,
            TimeProfile::PiecewiseConstant {
                breaks: vec![1.0],
                values: vec![2.0, 3.0],
            },
        )
        .unwrap();
        assert_relative_eq!(
            eval_drift(&spec, 0.5, [0.0, 0.0]).unwrap()[0],
            2.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            eval_drift(&spec, 1.5, [0.0, 0.0]).unwrap()[0],
            3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn holder_level_amplitudes_decay_geometrically() {
        let (base, levels, beta) = (2u64, 8u32, 0.4);
        let spec =
            DriftSpec::holder_spectral(base, levels, beta, Some(3), 1.0, TimeProfile::Constant(1.0))
                .unwrap();
        let data = match &spec.variant {
            DriftVariant::HolderSpectral(d) => d.spectral(),
            _ => unreachable!(),
        };
        for (j, m) in data.modes.iter().enumerate() {
            assert_eq!(m.index, base.pow(j as u32));
            let amp = (m.cos_amp * m.cos_amp + m.sin_amp * m.sin_amp).sqrt();
            assert_relative_eq!(
                amp,
                (base as f64).powf(-beta * j as f64),
                epsilon = 1e-13
            );
        }
    }

    /// Independent 33-term direct summation of the seeded series.
    #[test]
    fn besov_eval_matches_brute_sum() {
        let (k_max, beta, seed) = (16u64, -0.25, 7u64);
        let spec = besov_test_drift(k_max, beta, seed);
        let l = std::f64::consts::PI;
        for &x in &[0.37, 1.1, -2.0] {
            let mut brute = 0.0;
            for k in -(k_max as i64)..=(k_max as i64) {
                let mag = (1.0 + k.unsigned_abs() as f64).powf(-(beta + 0.5));
                let sigma = BesovDrift::sign(seed, k.unsigned_abs());
                brute += mag * sigma * (k as f64 * std::f64::consts::PI * x / l).cos();
            }
            let v = eval_drift(&spec, 0.0, [x, 0.0]).unwrap()[0];
            assert_relative_eq!(v, brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn besov_signs_stable_under_mode_refinement() {
        let coarse = besov_test_drift(16, -0.25, 7);
        let fine = besov_test_drift(32, -0.25, 7);
        let (c, f) = (
            coarse.spectral_parts().unwrap().0,
            fine.spectral_parts().unwrap().0,
        );
        for k in 0..=16 {
            assert_eq!(c.modes[k].cos_amp, f.modes[k].cos_amp);
        }
    }

    #[test]
    fn cutoff_below_threshold_is_identity() {
        // |b| = 5, threshold B h^(1/alpha - 1) = 1 * 0.01^(-1/2) = 10.
        let grid = SpatialGrid::new(1, 1.0, 8).unwrap();
        let table = vec![vec![[5.0, 0.0]; 8]];
        let spec = DriftSpec::tabulated(
            grid,
            vec![],
            table,
            RegularityIndices::new(f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0).unwrap(),
        )
        .unwrap();
        let cfg = CutoffConfig::new(1.0, 0.01, 2.0).unwrap();
        assert_relative_eq!(cfg.threshold(), 10.0, epsilon = 1e-12);
        let v = cutoff_drift(&spec, &cfg, 0.5, [0.3, 0.0]).unwrap();
        assert_relative_eq!(v[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_rescales_to_threshold_norm() {
        let grid = SpatialGrid::new(2, 1.0, 8).unwrap();
        let table = vec![vec![[3.0, 4.0]; 64]];
        let spec = DriftSpec::tabulated(
            grid,
            vec![],
            table,
            RegularityIndices::new(f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0).unwrap(),
        )
        .unwrap();
        // At h = 1 the threshold equals B for every alpha.
        let cfg = CutoffConfig::new(2.0, 1.0, 1.5).unwrap();
        assert_relative_eq!(cfg.threshold(), 2.0, epsilon = 1e-12);
        let v = cutoff_drift(&spec, &cfg, 1.0, [0.0, 0.0]).unwrap();
        assert_relative_eq!(v[0], 1.2, epsilon = 1e-12);
        assert_relative_eq!(v[1], 1.6, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_first_step_is_zero() {
        let spec = DriftSpec::lebesgue_power(1.0, 0.3, 1.0, 1, TimeProfile::Constant(1.0))
            .unwrap();
        let cfg = CutoffConfig::new(1.0, 0.01, 1.5).unwrap();
        assert_eq!(
            cutoff_drift(&spec, &cfg, 0.005, [0.001, 0.0]).unwrap(),
            [0.0, 0.0]
        );
    }

    /// Norm bound and direction preservation over randomized inputs.
    #[test]
    fn cutoff_bound_and_direction_invariant() {
        use rand::Rng;
        let spec = DriftSpec::lebesgue_power(3.0, 0.45, 1.0, 2, TimeProfile::Constant(1.0))
            .unwrap();
        let mut rng = crate::rng::stream(31, 0, 0, Role::Cell);
        for _ in 0..1_000_000 {
            let h: f64 = 10f64.powf(rng.gen_range(-4.0..-0.5));
            let b_max: f64 = 10f64.powf(rng.gen_range(-1.0..1.0));
            let alpha = rng.gen_range(1.01..2.0);
            let t = rng.gen_range(0.0..1.0);
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let cfg = CutoffConfig::new(b_max, h, alpha).unwrap();
            let raw = eval_drift(&spec, t, x).unwrap();
            let cut = cutoff_drift(&spec, &cfg, t, x).unwrap();
            let nr = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
            let nc = (cut[0] * cut[0] + cut[1] * cut[1]).sqrt();
            if t < h {
                assert_eq!(nc, 0.0);
                continue;
            }
            assert!(nc <= nr.min(cfg.threshold()) * (1.0 + 1e-14));
            if nr > 0.0 {
                // Parallel and same orientation.
                let cross = raw[0] * cut[1] - raw[1] * cut[0];
                let dot = raw[0] * cut[0] + raw[1] * cut[1];
                assert!(cross.abs() <= 1e-12 * nr * nc.max(1e-300));
                assert!(dot >= 0.0);
            }
        }
    }

    #[test]
    fn mollified_single_mode_multiplier() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = DriftSpec::holder_spectral(2, 1, 0.5, None, 1.0, TimeProfile::Constant(1.0))
            .unwrap();
        // Modes cos(x) + 2^(-0.5) cos(2x); gap 0.1.
        let f = mollified_drift(&spec, &law, 0.35, 0.25).unwrap();
        for &x in &[0.0f64, 0.4, 2.2] {
            let expect = (-0.1f64).exp() * x.cos()
                + 2f64.powf(-0.5) * (-0.1 * 2f64.powf(1.5)).exp() * (2.0 * x).cos();
            assert_relative_eq!(f.eval(x), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn mollified_rejects_grid_times() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = DriftSpec::holder_spectral(2, 0, 0.5, None, 1.0, TimeProfile::Constant(1.0))
            .unwrap();
        assert!(mollified_drift(&spec, &law, 0.5, 0.25).is_err());
        assert!(mollified_drift(&spec, &law, 0.0, 0.25).is_err());
    }

    #[test]
    fn mollified_gaps_compose_as_semigroup() {
        let law = StableLaw::new(1.7, 1).unwrap();
        let spec = besov_test_drift(64, -0.3, 5);
        let (data, _) = spec.spectral_parts().unwrap();
        let (u, v) = (0.013, 0.029);
        let once = data.scaled_by(|xi| (-(u + v) * law.psi(xi)).exp());
        let twice = data
            .scaled_by(|xi| (-u * law.psi(xi)).exp())
            .scaled_by(|xi| (-v * law.psi(xi)).exp());
        for (a, b) in once.modes.iter().zip(&twice.modes) {
            assert_relative_eq!(a.cos_amp, b.cos_amp, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn mollified_converges_to_smooth_drift_as_gap_shrinks() {
        let law = StableLaw::new(1.5, 1).unwrap();
        // Fixed smooth drift cos(x) + 0.3 cos(3x).
        let mut spec = DriftSpec::holder_spectral(3, 1, 0.5, None, 1.0, TimeProfile::Constant(1.0))
            .unwrap();
        if let DriftVariant::HolderSpectral(d) = &mut spec.variant {
            d.data.modes[1].cos_amp = 0.3;
        }
        let sup_diff = |gap: f64| -> f64 {
            let f = mollified_drift(&spec, &law, gap, 1.0).unwrap();
            (0..512)
                .map(|i| {
                    let x = -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / 512.0;
                    (f.eval(x) - eval_drift(&spec, gap, [x, 0.0]).unwrap()[0]).abs()
                })
                .fold(0.0, f64::max)
        };
        let coarse = sup_diff(1e-2);
        let fine = sup_diff(1e-4);
        assert!(fine < coarse / 50.0, "sup diffs {coarse} vs {fine}");
        assert!(fine < 2e-3);
    }

    /// Pointwise mollified bound: sup_z |P_u b(z)| * u^(-beta/alpha) stays
    /// within a band as the gap shrinks through the resolved range.
    #[test]
    fn mollified_scaling_constant_is_stable() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = besov_test_drift(512, -0.3, 11);
        let constant = |gap: f64| -> f64 {
            let f = mollified_drift(&spec, &law, gap, 1.0).unwrap();
            let sup = (0..2048)
                .map(|i| {
                    let x = -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / 2048.0;
                    f.eval(x).abs()
                })
                .fold(0.0, f64::max);
            sup * gap.powf(0.3 / 1.5)
        };
        let cs: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
            .iter()
            .map(|&u| constant(u))
            .collect();
        let (lo, hi) = cs
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &c| (l.min(c), h.max(c)));
        assert!(hi / lo < 1.6, "scaling constants {cs:?}");
    }

    #[test]
    fn integrated_single_mode_closed_form() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = DriftSpec::holder_spectral(2, 0, 0.5, None, 1.0, TimeProfile::Constant(1.0))
            .unwrap();
        let w = 0.2;
        let psi = law.psi(1.0);
        let expect = (1.0 - (-w * psi).exp()) / psi;
        for &z in &[0.0, 0.9] {
            let v = integrated_drift(&spec, &law, 0.4, z, w).unwrap();
            assert_relative_eq!(v[0], expect * z.cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn integrated_constant_drift_scales_with_window() {
        let law = StableLaw::new(1.8, 1).unwrap();
        // Single zero mode: b == sigma_0 (constant in space).
        let spec = besov_test_drift(0, -0.5, 3);
        let c = eval_drift(&spec, 0.0, [0.123, 0.0]).unwrap()[0];
        let w = 0.37;
        let v = integrated_drift(&spec, &law, 0.1, -1.0, w).unwrap();
        assert_relative_eq!(v[0], w * c, epsilon = 1e-13);
    }

    /// The integrated drift equals the time integral of the mollified
    /// drift across one step (compared against fine composite quadrature).
    #[test]
    fn integrated_matches_mollified_quadrature() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = besov_test_drift(32, -0.25, 9);
        let (s, h, z) = (0.5, 0.125, 0.4);
        let (nodes, weights) = gauss_legendre_on(10, 0.0, 1.0);
        let mut quad = 0.0;
        let panels = 400;
        for p in 0..panels {
            let a = s + h * p as f64 / panels as f64;
            let len = h / panels as f64;
            for (&u, &wt) in nodes.iter().zip(&weights) {
                let t = a + len * u;
                quad += wt * len * mollified_drift(&spec, &law, t, h).unwrap().eval(z);
            }
        }
        let direct = integrated_drift(&spec, &law, s, z, h).unwrap()[0];
        assert!(
            (quad - direct).abs() < 1e-9,
            "quadrature {quad} vs direct {direct}"
        );
    }

    /// Piecewise-constant profile: the dyadic-panel quadrature reproduces
    /// the exact piecewise closed form.
    #[test]
    fn integrated_piecewise_profile_exact() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let profile = TimeProfile::PiecewiseConstant {
            breaks: vec![0.1],
            values: vec![2.0, 5.0],
        };
        let spec =
            DriftSpec::holder_spectral(2, 0, 0.5, None, 1.0, profile).unwrap();
        let psi = law.psi(1.0);
        let w = 0.2;
        // integral over (0, 0.1) of 2 e^(-r psi) + over (0.1, 0.2) of 5 e^(-r psi).
        let expect = 2.0 * (1.0 - (-0.1 * psi).exp()) / psi
            + 5.0 * ((-0.1 * psi).exp() - (-0.2 * psi).exp()) / psi;
        let v = integrated_drift(&spec, &law, 0.0, 0.0, w).unwrap();
        assert_relative_eq!(v[0], expect, epsilon = 1e-12);
    }

    /// Window scaling of the integrated bound: |b(0, z, w)| * w^-(1 + beta/alpha)
    /// has a stable constant across halvings (p = theta = infinity).
    #[test]
    fn integrated_scaling_constant_is_stable() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = besov_test_drift(512, -0.3, 11);
        let constant = |w: f64| -> f64 {
            let f = integrated_drift_function(&spec, &law, 0.0, w).unwrap();
            let sup = (0..2048)
                .map(|i| {
                    let x = -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / 2048.0;
                    f.eval(x).abs()
                })
                .fold(0.0, f64::max);
            sup * w.powf(-(1.0 - 0.3 / 1.5))
        };
        let cs: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
            .iter()
            .map(|&w| constant(w))
            .collect();
        let (lo, hi) = cs
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &c| (l.min(c), h.max(c)));
        assert!(hi / lo < 1.6, "integrated scaling constants {cs:?}");
    }

    /// Riemann sums of |b|^p near the singularity: convergent below the
    /// critical integrability d/delta, divergent above.
    #[test]
    fn power_drift_integrability_split() {
        let spec = DriftSpec::lebesgue_power(1.0, 0.5, 1.0, 1, TimeProfile::Constant(1.0))
            .unwrap();
        let sum = |p: f64, level: u32| -> f64 {
            let h = 0.5f64.powi(level as i32);
            let n = (1.0 / h) as usize;
            (0..n)
                .map(|i| {
                    let x = (i as f64 + 0.5) * h;
                    eval_drift(&spec, 0.0, [x, 0.0]).unwrap()[0].abs().powf(p) * h
                })
                .sum()
        };
        // p = 1.5 < d/delta = 2: refinement converges (error ~ h^(1/4),
        // so eight extra levels shrink successive differences by 4).
        let (a, b, c) = (sum(1.5, 6), sum(1.5, 14), sum(1.5, 22));
        assert!((c - b).abs() < (b - a).abs() / 3.0, "sums {a}, {b}, {c}");
        // p = 3 > 2: refinement grows without bound (the sum scales like
        // the smallest resolved distance to the power 1 - p delta < 0).
        let (a, b, c) = (sum(3.0, 6), sum(3.0, 14), sum(3.0, 22));
        assert!(b > 1.3 * a && c > 1.3 * b, "sums {a}, {b}, {c}");
    }

    #[test]
    fn mollify_distribution_damps_coefficients() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = DriftSpec::holder_spectral(2, 1, 0.5, None, 1.0, TimeProfile::Constant(1.0))
            .unwrap();
        // eps = 0 is the identity.
        let same = mollify_distribution(&spec, &law, 0.0).unwrap();
        let (a, b) = (
            spec.spectral_parts().unwrap().0,
            same.spectral_parts().unwrap().0,
        );
        for (m, n) in a.modes.iter().zip(&b.modes) {
            assert_eq!(m.cos_amp, n.cos_amp);
        }
        // Single-mode damping factor e^(-psi(k)).
        let single = DriftSpec::holder_spectral(2, 0, 0.5, None, 1.0, TimeProfile::Constant(1.0))
            .unwrap();
        let smoothed = mollify_distribution(&single, &law, 1.0).unwrap();
        let m = &smoothed.spectral_parts().unwrap().0.modes[0];
        assert_relative_eq!(m.cos_amp, (-law.psi(1.0)).exp(), epsilon = 1e-14);
        // Non-spectral variants refuse.
        let power = DriftSpec::lebesgue_power(1.0, 0.3, 1.0, 1, TimeProfile::Constant(1.0))
            .unwrap();
        assert!(mollify_distribution(&power, &law, 0.1).is_err());
    }

    #[test]
    fn tabulated_outside_box_is_domain_error() {
        let grid = SpatialGrid::new(1, 2.0, 8).unwrap();
        let spec = DriftSpec::tabulated(
            grid,
            vec![],
            vec![vec![[1.0, 0.0]; 8]],
            RegularityIndices::new(2.0, 2.0, f64::INFINITY, 0.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            eval_drift(&spec, 0.0, [2.5, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(eval_drift(&spec, 0.0, [1.9, 0.0]).is_ok());
    }

    #[test]
    fn drift_sum_adds_pieces_and_tracks_indices() {
        let p1 = DriftSpec::lebesgue_power(1.0, 0.5, 1.0, 1, TimeProfile::Constant(1.0))
            .unwrap();
        let p2 = DriftSpec::lebesgue_power(0.5, 0.25, 1.0, 1, TimeProfile::Constant(1.0))
            .unwrap();
        let expect = {
            let a = eval_drift(&p1, 0.2, [0.5, 0.0]).unwrap()[0];
            let b = eval_drift(&p2, 0.2, [0.5, 0.0]).unwrap()[0];
            a + b
        };
        let min_p = p1.declared.p.min(p2.declared.p);
        let sum = DriftSpec::lebesgue_sum(vec![p1, p2]).unwrap();
        let v = eval_drift(&sum, 0.2, [0.5, 0.0]).unwrap()[0];
        assert_relative_eq!(v, expect, epsilon = 1e-14);
        assert_relative_eq!(sum.declared.p, min_p, epsilon = 1e-14);
        // Spectral pieces are rejected.
        let holder = DriftSpec::holder_spectral(2, 0, 0.5, None, 1.0, TimeProfile::Constant(1.0))
            .unwrap();
        assert!(DriftSpec::lebesgue_sum(vec![holder]).is_err());
    }

    #[test]
    fn inverse_power_profile_conventions() {
        let profile = TimeProfile::InversePower { exponent: 0.25 };
        assert_eq!(profile.eval(0.0), 0.0);
        assert_relative_eq!(profile.eval(16.0), 0.5, epsilon = 1e-14);
        assert!(TimeProfile::InversePower { exponent: 1.2 }.validate().is_err());
        // Integrated drift stays finite across the singular left endpoint.
        let law = StableLaw::new(1.5, 1).unwrap();
        let spec = DriftSpec::holder_spectral(
            2,
            0,
            0.5,
            None,
            1.0,
            TimeProfile::InversePower { exponent: 0.25 },
        )
        .unwrap();
        let v = integrated_drift(&spec, &law, 0.0, 0.0, 0.1).unwrap()[0];
        // Oracle: integral over (0, 0.1) of r^(-1/4) e^(-r psi(1)) dr by
        // fine composite quadrature on dyadic panels.
        let psi = law.psi(1.0);
        let mut oracle = 0.0;
        let mut hi = 0.1f64;
        for _ in 0..60 {
            let lo = hi * 0.5;
            oracle += crate::numeric::integrate_panels(
                |r| r.powf(-0.25) * (-r * psi).exp(),
                lo,
                hi,
                4,
                10,
            );
            hi = lo;
        }
        assert_relative_eq!(v, oracle, max_relative = 1e-10);
    }
}
