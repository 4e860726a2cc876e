//! Euler-Maruyama path simulation for the three drift regimes.
//!
//! One scheme step always has the shape
//!
//! ```text
//! X_{k+1} = X_k + (drift displacement) + (noise increment over (t_k, t_{k+1}]),
//! ```
//!
//! and the variants differ only in the displacement:
//!
//! * `LebesgueCutoffRandomized`: h * b_h(U_k, X_k) with the space-cutoff,
//!   first-step-zeroed drift b_h and U_k uniform on [t_k, t_{k+1});
//! * `HolderRandomized`: h * b(U_k, X_k), same randomized evaluation time but
//!   the raw drift;
//! * `BesovMollified`: the kernel-smoothed drift integrated in time over the
//!   step window, evaluated at X_k (deterministic given the state).
//!
//! Every random draw comes from a counter-based stream keyed by
//! (seed, path, step, role), so results are independent of the worker count
//! and any logical draw can be replayed in isolation. Summing the fine-step
//! noise of a path yields the coarse-step noise of the same path, which
//! [`simulate_coupled_terminal`] exploits to build common-random-number
//! ladders for weak-error measurement.
//!
//! Continuous-time values between grid points come from [`interpolate`]:
//! grid queries return the stored state bit-identically; interior queries add
//! the partial drift displacement and a conditional noise draw (a Brownian
//! bridge when alpha = 2, a forward sub-step increment otherwise, in which
//! case the interpolated value has the correct marginal law given the left
//! state but is not reconciled with the right endpoint).

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::drift::{
    cutoff_drift, eval_drift, integrated_drift_function, CutoffConfig, DriftSpec,
    SpectralFunction, TimeProfile,
};
use crate::error::{Error, Result};
use crate::noise::{sample_increment, sample_increment_into, StableLaw};
use crate::rng::{cell_seed, stream, Role};

/// Memory allowance for a full in-RAM path batch, in bytes.
const BATCH_MEMORY_BUDGET: u128 = 1 << 31;

/// Above this many (path count) x (drift mode count) evaluations per step,
/// the mollified-drift scheme precomputes a cubic interpolation table of the
/// per-step drift instead of summing the series for every path.
const DRIFT_TABLE_THRESHOLD: u64 = 1 << 20;

/// Absolute error budget of the cached drift tables.
const DRIFT_TABLE_BUDGET: f64 = 1e-8;

/// Per-step tables are only materialized up to this many steps; beyond that
/// the series is summed on demand.
const MAX_STEP_TABLES: u64 = 4096;

/// Leading bytes of the binary path dump.
pub const DUMP_MAGIC: [u8; 8] = *b"SWPATHS\0";

/// Current binary dump layout version.
pub const DUMP_VERSION: u32 = 1;

/// Which Euler-Maruyama variant advances the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeVariant {
    /// Space-cutoff drift evaluated at a uniformly randomized time; the
    /// first step carries no drift. For drifts declared with beta = 0.
    LebesgueCutoffRandomized,
    /// Raw drift at a uniformly randomized time. For drifts declared with
    /// beta in (0, 1).
    HolderRandomized,
    /// Kernel-smoothed drift integrated over the step window. For spectral
    /// drifts declared with beta < 0 and alpha < 2.
    BesovMollified,
}

impl SchemeVariant {
    pub fn name(self) -> &'static str {
        match self {
            SchemeVariant::LebesgueCutoffRandomized => "lebesgue-cutoff-randomized",
            SchemeVariant::HolderRandomized => "hoelder-randomized",
            SchemeVariant::BesovMollified => "besov-mollified",
        }
    }
}

/// Time grid, start point and seed of one simulation. The horizon is always
/// the exact product steps * step, never a rounded target.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub variant: SchemeVariant,
    /// Number of grid steps n; grid times are k * step for k = 0..=n.
    pub steps: u64,
    /// Step size h.
    pub step: f64,
    /// Start point; only the first `dim` coordinates are read.
    pub start: [f64; 2],
    /// Cutoff constant B of the space-truncated drift (threshold
    /// B h^(1/alpha - 1)); only the Lebesgue variant reads it.
    pub cutoff_level: f64,
    /// Root seed of every stream the simulation consumes.
    pub seed: u64,
}

impl SchemeConfig {
    pub fn new(
        variant: SchemeVariant,
        steps: u64,
        step: f64,
        start: [f64; 2],
        seed: u64,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Parameter("scheme needs at least one step".into()));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Parameter(format!(
                "step size must be positive and finite, got {step}"
            )));
        }
        if !start.iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("start point must be finite".into()));
        }
        Ok(SchemeConfig {
            variant,
            steps,
            step,
            start,
            cutoff_level: 1.0,
            seed,
        })
    }

    pub fn with_cutoff_level(mut self, level: f64) -> Self {
        self.cutoff_level = level;
        self
    }

    /// Horizon T = steps * step.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.step
    }

    /// Grid time t_k = k * step.
    pub fn grid_time(&self, k: u64) -> f64 {
        k as f64 * self.step
    }

    /// Check that the drift's declared regularity admits this variant.
    ///
    /// Hard violations (the variant's admissibility inequalities) are
    /// errors naming the violated inequality with both sides; soft ones
    /// come back as warning strings.
    pub fn validate(&self, drift: &DriftSpec, law: &StableLaw) -> Result<Vec<String>> {
        if drift.dim() != law.dim() {
            return Err(Error::Parameter(format!(
                "drift dimension {} does not match noise dimension {}",
                drift.dim(),
                law.dim()
            )));
        }
        let mut warnings = Vec::new();
        let d = law.dim() as f64;
        let alpha = law.alpha();
        let r = drift.declared;
        match self.variant {
            SchemeVariant::LebesgueCutoffRandomized => {
                if r.beta != 0.0 {
                    return Err(Error::Parameter(format!(
                        "the space-cutoff randomized scheme takes Lebesgue drifts \
                         (declared beta = 0), got beta = {}",
                        r.beta
                    )));
                }
                if !(r.p >= 2.0) {
                    return Err(Error::Parameter(format!(
                        "drift integrability hypothesis requires p >= 2, got p = {}",
                        r.p
                    )));
                }
                let lhs = d / r.p + alpha / r.theta;
                let rhs = alpha - 1.0;
                if !(lhs < rhs) {
                    return Err(Error::Parameter(format!(
                        "scheme admissibility requires d/p + alpha/theta < alpha - 1, \
                         got {lhs} >= {rhs}"
                    )));
                }
                if !(self.cutoff_level > 0.0) {
                    return Err(Error::Parameter(format!(
                        "cutoff level must be positive, got {}",
                        self.cutoff_level
                    )));
                }
            }
            SchemeVariant::HolderRandomized => {
                if !(r.beta > 0.0 && r.beta < 1.0) {
                    return Err(Error::Parameter(format!(
                        "the randomized Hoelder scheme needs declared beta in (0, 1), \
                         got beta = {}",
                        r.beta
                    )));
                }
                if r.theta.is_finite() {
                    warnings.push(format!(
                        "declared theta = {} is finite; the Hoelder-drift rate guarantee \
                         assumes a time-independent drift (theta = inf), results are \
                         exploratory",
                        r.theta
                    ));
                }
            }
            SchemeVariant::BesovMollified => {
                if !(alpha < 2.0) {
                    return Err(Error::Parameter(format!(
                        "the mollified-drift scheme requires alpha < 2, got alpha = {alpha}"
                    )));
                }
                if !(r.beta < 0.0) {
                    return Err(Error::Parameter(format!(
                        "the mollified-drift scheme takes negative-regularity drifts \
                         (declared beta < 0), got beta = {}",
                        r.beta
                    )));
                }
                if drift.spectral_parts().is_none() {
                    return Err(Error::Parameter(
                        "the mollified-drift scheme requires a spectral drift".into(),
                    ));
                }
                let gamma = alpha - 1.0 + 2.0 * r.beta - d / r.p - alpha / r.theta;
                if !(gamma > 0.0) {
                    return Err(Error::Parameter(format!(
                        "Serrin-type margin gamma = alpha - 1 + 2 beta - d/p - alpha/theta \
                         = {gamma} must be positive (alpha = {alpha}, beta = {}, p = {}, \
                         theta = {})",
                        r.beta, r.p, r.theta
                    )));
                }
            }
        }
        Ok(warnings)
    }
}

/// Grid-time states of a batch of paths, plus the randomized evaluation
/// times, retained so interpolation and diagnostics can replay the exact
/// draws.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub config: SchemeConfig,
    pub dim: usize,
    pub paths: u64,
    /// When the mollified drift was evaluated through cached cubic tables,
    /// the absolute error budget of those tables; `None` means every drift
    /// evaluation summed the series exactly.
    pub drift_interp_budget: Option<f64>,
    /// Soft admissibility notes from [`SchemeConfig::validate`].
    pub warnings: Vec<String>,
    /// paths x (steps + 1) x dim grid-time states, row-major.
    states: Vec<f64>,
    /// paths x steps drift evaluation times: the uniform draw U_k for the
    /// randomized variants, the grid time t_k for the mollified variant.
    random_times: Vec<f64>,
}

impl PathBatch {
    /// State of `path` at grid index `k` (0 = start, steps = terminal).
    pub fn state(&self, path: u64, k: u64) -> &[f64] {
        assert!(path < self.paths && k <= self.config.steps);
        let stride = (self.config.steps + 1) as usize * self.dim;
        let base = path as usize * stride + k as usize * self.dim;
        &self.states[base..base + self.dim]
    }

    pub fn terminal(&self, path: u64) -> &[f64] {
        self.state(path, self.config.steps)
    }

    /// Drift evaluation time of step k on `path`.
    pub fn random_time(&self, path: u64, k: u64) -> f64 {
        assert!(path < self.paths && k < self.config.steps);
        self.random_times[path as usize * self.config.steps as usize + k as usize]
    }

    /// Terminal states of every path, row-major (paths x dim).
    pub fn terminals(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.paths as usize * self.dim);
        for p in 0..self.paths {
            out.extend_from_slice(self.terminal(p));
        }
        out
    }
}

/// One step's mollified drift as a spatial function: either the exact
/// cosine series or a cached cubic Hermite table of it.
enum StepDrift {
    Exact(SpectralFunction),
    Table(StepTable),
}

impl StepDrift {
    fn eval(&self, x: f64) -> f64 {
        match self {
            StepDrift::Exact(f) => f.eval(x),
            StepDrift::Table(t) => t.eval(x),
        }
    }

    fn is_table(&self) -> bool {
        matches!(self, StepDrift::Table(_))
    }
}

/// Periodic cubic Hermite table. With node spacing D the interpolation
/// error is at most D^4/384 * max|f''''|, and for a cosine series
/// max|f''''| <= sum_k q_k^4 (|a_k| + |b_k|), which fixes the node count
/// for a requested budget.
struct StepTable {
    x0: f64,
    dx: f64,
    period: f64,
    vals: Vec<f64>,
    ders: Vec<f64>,
}

impl StepTable {
    fn build(f: &SpectralFunction, budget: f64) -> Option<StepTable> {
        let m4: f64 = f
            .modes
            .iter()
            .map(|m| f.frequency(m.index).powi(4) * (m.cos_amp.abs() + m.sin_amp.abs()))
            .sum();
        let period = 2.0 * f.half_width;
        let points = if m4 == 0.0 {
            64
        } else {
            let dx = (384.0 * budget / m4).powf(0.25);
            let raw = (period / dx).ceil();
            if !raw.is_finite() || raw > (1u64 << 20) as f64 {
                return None;
            }
            (raw as usize).max(64)
        };
        let dx = period / points as f64;
        let mut vals = Vec::with_capacity(points + 1);
        let mut ders = Vec::with_capacity(points + 1);
        for i in 0..=points {
            let x = -f.half_width + i as f64 * dx;
            vals.push(f.eval(x));
            ders.push(f.eval_deriv(x));
        }
        Some(StepTable {
            x0: -f.half_width,
            dx,
            period,
            vals,
            ders,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let y = (x - self.x0).rem_euclid(self.period);
        let cells = self.vals.len() - 1;
        let i = ((y / self.dx) as usize).min(cells - 1);
        let t = (y - i as f64 * self.dx) / self.dx;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.vals[i]
            + h10 * self.dx * self.ders[i]
            + h01 * self.vals[i + 1]
            + h11 * self.dx * self.ders[i + 1]
    }
}

/// How the mollified per-step drift is produced.
enum BesovSteps {
    /// Time-constant profile: one step function shared by every step.
    Shared(StepDrift),
    /// One precomputed function per step.
    PerStep(Vec<StepDrift>),
    /// Summed from the series on demand at each (path, step).
    OnDemand,
}

/// Drift evaluation strategy resolved once per simulation.
enum DriftEngine {
    Lebesgue { cutoff: CutoffConfig },
    Holder,
    Besov { steps: BesovSteps },
}

impl DriftEngine {
    fn build(
        config: &SchemeConfig,
        drift: &DriftSpec,
        law: &StableLaw,
        paths: u64,
    ) -> Result<DriftEngine> {
        match config.variant {
            SchemeVariant::LebesgueCutoffRandomized => Ok(DriftEngine::Lebesgue {
                cutoff: CutoffConfig::new(config.cutoff_level, config.step, law.alpha())?,
            }),
            SchemeVariant::HolderRandomized => Ok(DriftEngine::Holder),
            SchemeVariant::BesovMollified => {
                let (data, profile) = drift.spectral_parts().ok_or_else(|| {
                    Error::Parameter("the mollified-drift scheme requires a spectral drift".into())
                })?;
                let want_table = paths.saturating_mul(data.modes.len() as u64)
                    >= DRIFT_TABLE_THRESHOLD;
                let wrap = |f: SpectralFunction| -> StepDrift {
                    if want_table {
                        if let Some(t) = StepTable::build(&f, DRIFT_TABLE_BUDGET) {
                            return StepDrift::Table(t);
                        }
                    }
                    StepDrift::Exact(f)
                };
                let steps = if matches!(profile, TimeProfile::Constant(_)) {
                    // The window integral of a constant profile does not
                    // depend on the left endpoint, so one function serves
                    // every step.
                    BesovSteps::Shared(wrap(integrated_drift_function(
                        drift,
                        law,
                        0.0,
                        config.step,
                    )?))
                } else if want_table && config.steps <= MAX_STEP_TABLES {
                    let v = (0..config.steps)
                        .map(|k| {
                            integrated_drift_function(
                                drift,
                                law,
                                config.grid_time(k),
                                config.step,
                            )
                            .map(&wrap)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    BesovSteps::PerStep(v)
                } else {
                    BesovSteps::OnDemand
                };
                Ok(DriftEngine::Besov { steps })
            }
        }
    }

    fn interp_budget(&self) -> Option<f64> {
        let tabulated = match self {
            DriftEngine::Besov { steps } => match steps {
                BesovSteps::Shared(sd) => sd.is_table(),
                BesovSteps::PerStep(v) => v.iter().any(StepDrift::is_table),
                BesovSteps::OnDemand => false,
            },
            _ => false,
        };
        tabulated.then_some(DRIFT_TABLE_BUDGET)
    }
}

/// Everything a stepping loop needs, bundled to keep call sites short.
struct StepCtx<'a> {
    config: &'a SchemeConfig,
    drift: &'a DriftSpec,
    law: &'a StableLaw,
    engine: &'a DriftEngine,
}

/// Drift evaluation time and displacement of step k from state x. The
/// uniform time draw comes from stream (useed, path, k, TimeShuffle);
/// `useed` is the config seed except for the coarse leg of a coupled pair,
/// which uses a derived seed so its draws cannot collide with the fine
/// steps.
fn drift_displacement(
    ctx: &StepCtx,
    useed: u64,
    path: u64,
    k: u64,
    x: &[f64; 2],
) -> Result<(f64, [f64; 2])> {
    let h = ctx.config.step;
    let t_k = ctx.config.grid_time(k);
    match ctx.engine {
        DriftEngine::Lebesgue { cutoff } => {
            let u = t_k + h * stream(useed, path, k, Role::TimeShuffle).gen::<f64>();
            let b = cutoff_drift(ctx.drift, cutoff, u, *x)?;
            Ok((u, [h * b[0], h * b[1]]))
        }
        DriftEngine::Holder => {
            let u = t_k + h * stream(useed, path, k, Role::TimeShuffle).gen::<f64>();
            let b = eval_drift(ctx.drift, u, *x)?;
            Ok((u, [h * b[0], h * b[1]]))
        }
        DriftEngine::Besov { steps } => {
            let val = match steps {
                BesovSteps::Shared(sd) => sd.eval(x[0]),
                BesovSteps::PerStep(v) => v[k as usize].eval(x[0]),
                BesovSteps::OnDemand => {
                    integrated_drift_function(ctx.drift, ctx.law, t_k, h)?.eval(x[0])
                }
            };
            Ok((t_k, [val, 0.0]))
        }
    }
}

/// Advance one path by one step in place. Returns the drift evaluation
/// time; `z` receives the noise increment that was applied (length dim).
fn advance(ctx: &StepCtx, path: u64, k: u64, x: &mut [f64; 2], z: &mut [f64]) -> Result<f64> {
    let (u, disp) = drift_displacement(ctx, ctx.config.seed, path, k, x)?;
    let mut sub = stream(ctx.config.seed, path, k, Role::Subordinator);
    let mut gauss = stream(ctx.config.seed, path, k, Role::Gaussian);
    sample_increment_into(ctx.law, ctx.config.step, &mut sub, &mut gauss, z);
    for i in 0..z.len() {
        x[i] = x[i] + disp[i] + z[i];
    }
    Ok(u)
}

fn start_state(config: &SchemeConfig, dim: usize) -> [f64; 2] {
    let mut x = [0.0; 2];
    x[..dim].copy_from_slice(&config.start[..dim]);
    x
}

/// Simulate `paths` independent paths, keeping every grid-time state.
///
/// The result is bit-identical for any worker count and any batch
/// splitting, because all randomness is keyed by (seed, path, step, role).
/// Batches above the in-RAM budget are refused with a capacity error;
/// use [`simulate_terminal`] to stream arbitrarily many paths.
pub fn simulate_batch(
    config: &SchemeConfig,
    drift: &DriftSpec,
    law: &StableLaw,
    paths: u64,
) -> Result<PathBatch> {
    if paths == 0 {
        return Err(Error::Parameter("need at least one path".into()));
    }
    let warnings = config.validate(drift, law)?;
    let dim = law.dim();
    let floats = paths as u128 * ((config.steps as u128 + 1) * dim as u128 + config.steps as u128);
    if floats * 8 > BATCH_MEMORY_BUDGET {
        return Err(Error::Capacity(format!(
            "full path batch needs {} bytes (budget {BATCH_MEMORY_BUDGET}); \
             use simulate_terminal to stream terminal states only",
            floats * 8
        )));
    }
    let engine = DriftEngine::build(config, drift, law, paths)?;
    let ctx = StepCtx {
        config,
        drift,
        law,
        engine: &engine,
    };
    let n = config.steps as usize;
    let stride = (n + 1) * dim;
    let mut states = vec![0.0; paths as usize * stride];
    let mut random_times = vec![0.0; paths as usize * n];
    states
        .par_chunks_mut(stride)
        .zip(random_times.par_chunks_mut(n))
        .enumerate()
        .try_for_each(|(p, (srow, trow))| -> Result<()> {
            let mut x = start_state(config, dim);
            let mut z = [0.0; 2];
            srow[..dim].copy_from_slice(&x[..dim]);
            for k in 0..n {
                let u = advance(&ctx, p as u64, k as u64, &mut x, &mut z[..dim])?;
                trow[k] = u;
                srow[(k + 1) * dim..(k + 2) * dim].copy_from_slice(&x[..dim]);
            }
            Ok(())
        })?;
    Ok(PathBatch {
        config: config.clone(),
        dim,
        paths,
        drift_interp_budget: engine.interp_budget(),
        warnings,
        states,
        random_times,
    })
}

/// Simulate `paths` paths keeping only terminal states (paths x dim,
/// row-major). Deterministic in the same sense as [`simulate_batch`].
pub fn simulate_terminal(
    config: &SchemeConfig,
    drift: &DriftSpec,
    law: &StableLaw,
    paths: u64,
) -> Result<Vec<f64>> {
    if paths == 0 {
        return Err(Error::Parameter("need at least one path".into()));
    }
    config.validate(drift, law)?;
    let dim = law.dim();
    let engine = DriftEngine::build(config, drift, law, paths)?;
    let ctx = StepCtx {
        config,
        drift,
        law,
        engine: &engine,
    };
    let rows: Vec<[f64; 2]> = (0..paths)
        .into_par_iter()
        .map(|p| -> Result<[f64; 2]> {
            let mut x = start_state(config, dim);
            let mut z = [0.0; 2];
            for k in 0..config.steps {
                advance(&ctx, p, k, &mut x, &mut z[..dim])?;
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(rows.len() * dim);
    for r in &rows {
        out.extend_from_slice(&r[..dim]);
    }
    Ok(out)
}

/// Terminal states of a coarse/fine pair driven by the same noise.
pub struct CoupledTerminals {
    /// Coarse-grid terminal states, paths x dim row-major.
    pub coarse: Vec<f64>,
    /// Fine-grid terminal states, paths x dim row-major.
    pub fine: Vec<f64>,
    pub dim: usize,
}

/// Run each path on the fine grid (step h / refine) and simultaneously on
/// the coarse grid (step h), feeding the coarse chain the summed fine noise
/// increments. The fine chain is bit-identical to a plain simulation with
/// the fine configuration; the coarse chain sees exactly the same driving
/// noise, so terminal differences measure the discretization gap at far
/// lower variance than independent runs.
///
/// The coarse chain's randomized drift times are drawn from a seed derived
/// from the config seed (cell "coupled-coarse"), keeping them independent
/// of every fine-step draw.
pub fn simulate_coupled_terminal(
    config: &SchemeConfig,
    refine: u64,
    drift: &DriftSpec,
    law: &StableLaw,
    paths: u64,
) -> Result<CoupledTerminals> {
    if paths == 0 {
        return Err(Error::Parameter("need at least one path".into()));
    }
    if refine == 0 {
        return Err(Error::Parameter("refinement factor must be >= 1".into()));
    }
    config.validate(drift, law)?;
    let fine_config = SchemeConfig::new(
        config.variant,
        config.steps * refine,
        config.step / refine as f64,
        config.start,
        config.seed,
    )?
    .with_cutoff_level(config.cutoff_level);
    let dim = law.dim();
    let coarse_engine = DriftEngine::build(config, drift, law, paths)?;
    let fine_engine = DriftEngine::build(&fine_config, drift, law, paths)?;
    let coarse_ctx = StepCtx {
        config,
        drift,
        law,
        engine: &coarse_engine,
    };
    let fine_ctx = StepCtx {
        config: &fine_config,
        drift,
        law,
        engine: &fine_engine,
    };
    let coarse_useed = cell_seed(config.seed, "coupled-coarse");
    let rows: Vec<([f64; 2], [f64; 2])> = (0..paths)
        .into_par_iter()
        .map(|p| -> Result<([f64; 2], [f64; 2])> {
            let mut xc = start_state(config, dim);
            let mut xf = xc;
            let mut z = [0.0; 2];
            for k in 0..config.steps {
                // The coarse displacement is fixed before the noise of the
                // step is revealed, exactly as in a plain coarse run.
                let (_, disp) = drift_displacement(&coarse_ctx, coarse_useed, p, k, &xc)?;
                let mut acc = [0.0; 2];
                for j in 0..refine {
                    advance(&fine_ctx, p, k * refine + j, &mut xf, &mut z[..dim])?;
                    for i in 0..dim {
                        acc[i] += z[i];
                    }
                }
                for i in 0..dim {
                    xc[i] = xc[i] + disp[i] + acc[i];
                }
            }
            Ok((xc, xf))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut coarse = Vec::with_capacity(rows.len() * dim);
    let mut fine = Vec::with_capacity(rows.len() * dim);
    for (c, f) in &rows {
        coarse.extend_from_slice(&c[..dim]);
        fine.extend_from_slice(&f[..dim]);
    }
    Ok(CoupledTerminals { coarse, fine, dim })
}

/// Continuous-time value of a stored path at t in [0, T].
///
/// Grid times return the stored state bit-identically. Interior times add
/// the partial drift displacement (the stored evaluation time U_k is
/// reused, so the drift rate matches the one the step applied) and a
/// conditional noise value: for alpha = 2 a Brownian bridge pinned to the
/// step's recovered noise increment, for alpha < 2 a forward increment over
/// (t_k, t] drawn from the path's bridge stream, which leaves grid
/// marginals exact but does not reconcile with the right endpoint.
/// Repeated calls at the same (path, step) reuse the same bridge stream.
pub fn interpolate(
    batch: &PathBatch,
    drift: &DriftSpec,
    law: &StableLaw,
    path: u64,
    t: f64,
) -> Result<Vec<f64>> {
    if path >= batch.paths {
        return Err(Error::Parameter(format!(
            "path index {path} out of range (batch holds {})",
            batch.paths
        )));
    }
    let config = &batch.config;
    let horizon = config.horizon();
    if !t.is_finite() || t < 0.0 || t > horizon {
        return Err(Error::Domain(format!(
            "interpolation time {t} lies outside [0, {horizon}]"
        )));
    }
    let h = config.step;
    let mut k = ((t / h).floor() as u64).min(config.steps - 1);
    if t < config.grid_time(k) {
        // Guards the rare rounding case where t/h lands on the next integer.
        k -= 1;
    }
    if t == config.grid_time(k) {
        return Ok(batch.state(path, k).to_vec());
    }
    if t == config.grid_time(k + 1) {
        return Ok(batch.state(path, k + 1).to_vec());
    }
    let dim = batch.dim;
    let tau = config.grid_time(k);
    let delta = t - tau;
    let xk = batch.state(path, k);
    let mut xbuf = [0.0; 2];
    xbuf[..dim].copy_from_slice(xk);
    let u = batch.random_time(path, k);

    // Drift rate over the step, recomputed from the stored state and time.
    let rate = match config.variant {
        SchemeVariant::LebesgueCutoffRandomized => {
            let cutoff = CutoffConfig::new(config.cutoff_level, h, law.alpha())?;
            cutoff_drift(drift, &cutoff, u, xbuf)?
        }
        SchemeVariant::HolderRandomized => eval_drift(drift, u, xbuf)?,
        SchemeVariant::BesovMollified => [0.0, 0.0],
    };
    let partial = match config.variant {
        SchemeVariant::BesovMollified => {
            let f = integrated_drift_function(drift, law, tau, delta)?;
            [f.eval(xbuf[0]), 0.0]
        }
        _ => [rate[0] * delta, rate[1] * delta],
    };

    let mut out = vec![0.0; dim];
    let mut bridge = stream(config.seed, path, k, Role::Bridge);
    if law.is_brownian() {
        // Recover the step's noise increment from the stored endpoints and
        // the (exactly reproducible) drift displacement, then draw the
        // bridge value conditioned on it.
        let full = match config.variant {
            SchemeVariant::BesovMollified => {
                let f = integrated_drift_function(drift, law, tau, h)?;
                [f.eval(xbuf[0]), 0.0]
            }
            _ => [rate[0] * h, rate[1] * h],
        };
        let xk1 = batch.state(path, k + 1);
        let frac = delta / h;
        let sd = (delta * (h - delta) / h).sqrt();
        for i in 0..dim {
            let z = xk1[i] - xk[i] - full[i];
            let g: f64 = bridge.sample(StandardNormal);
            out[i] = xk[i] + partial[i] + frac * z + sd * g;
        }
    } else {
        let v = sample_increment(law, delta, &mut bridge);
        for i in 0..dim {
            out[i] = xk[i] + partial[i] + v[i];
        }
    }
    Ok(out)
}

/// Write terminal states as CSV: header `path_id,x_0[,x_1]`, one row per
/// path. Values use the shortest decimal form that parses back to the same
/// float, so the output is byte-deterministic and lossless.
pub fn write_terminal_csv<W: Write>(out: &mut W, terminals: &[f64], dim: usize) -> Result<()> {
    if dim == 0 || dim > 2 {
        return Err(Error::Parameter(format!(
            "terminal CSV supports dim in {{1, 2}}, got {dim}"
        )));
    }
    if !terminals.len().is_multiple_of(dim) {
        return Err(Error::Parameter(format!(
            "terminal array length {} is not a multiple of dim {dim}",
            terminals.len()
        )));
    }
    let mut header = String::from("path_id");
    for i in 0..dim {
        header.push_str(&format!(",x_{i}"));
    }
    writeln!(out, "{header}")?;
    for (p, row) in terminals.chunks_exact(dim).enumerate() {
        let mut line = p.to_string();
        for v in row {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// A decoded binary path dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub paths: u64,
    pub steps: u64,
    pub dim: u32,
    pub alpha: f64,
    /// paths x (steps + 1) x dim states, row-major.
    pub states: Vec<f64>,
}

/// Write a full-path binary dump. Layout, all little-endian and fixed
/// width: 8 magic bytes, u32 version, u64 path count, u64 step count,
/// u32 dimension, f64 alpha, then paths x (steps + 1) x dim f64 states in
/// row-major order.
pub fn write_path_dump<W: Write>(out: &mut W, batch: &PathBatch, law: &StableLaw) -> Result<()> {
    out.write_all(&DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&batch.paths.to_le_bytes())?;
    out.write_all(&batch.config.steps.to_le_bytes())?;
    out.write_all(&(batch.dim as u32).to_le_bytes())?;
    out.write_all(&law.alpha().to_le_bytes())?;
    for v in &batch.states {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read a binary path dump written by [`write_path_dump`].
pub fn read_path_dump<R: Read>(inp: &mut R) -> Result<PathDump> {
    let mut magic = [0u8; 8];
    inp.read_exact(&mut magic)?;
    if magic != DUMP_MAGIC {
        return Err(Error::Parameter(
            "not a path dump: magic bytes do not match".into(),
        ));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    inp.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != DUMP_VERSION {
        return Err(Error::Parameter(format!(
            "unsupported path dump version {version} (expected {DUMP_VERSION})"
        )));
    }
    inp.read_exact(&mut b8)?;
    let paths = u64::from_le_bytes(b8);
    inp.read_exact(&mut b8)?;
    let steps = u64::from_le_bytes(b8);
    inp.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4);
    inp.read_exact(&mut b8)?;
    let alpha = f64::from_le_bytes(b8);
    let count = paths as u128 * (steps as u128 + 1) * dim as u128;
    if count * 8 > BATCH_MEMORY_BUDGET {
        return Err(Error::Capacity(format!(
            "path dump declares {count} states, beyond the in-RAM budget"
        )));
    }
    let mut states = vec![0.0f64; count as usize];
    for v in states.iter_mut() {
        inp.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok(PathDump {
        paths,
        steps,
        dim,
        alpha,
        states,
    })
}
