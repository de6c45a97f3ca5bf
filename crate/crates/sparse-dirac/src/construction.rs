//! Inductive choice of bump distances: successive spectral measures barely
//! move while the density's super-level sets shrink.
//!
//! Each stage works on the doubled interval
//! `Xi_n = [-2n, -1/(2n)] u [1/(2n), 2n]`.  New bumps are appended one at a
//! time; the gap distance is doubled from a floor until the measure of every
//! test interval changes by less than the step budget `eps_n 2^{-(j+1)}`.
//! The mechanism is oscillation averaging: the new factor `f(theta - kappa d)`
//! has period average 1, and large `d` decorrelates its phase from the rest
//! of the integrand.  After a stage the super-level set
//! `S_n = { density > eps_n / |Xi_n| }` is located on a refined grid; its
//! Lebesgue measure shrinking while the measure stays put is the finite-stage
//! shadow of a singular limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{abc_from_transfer, divergence_partial_sums, BumpCoefficients};
use crate::potential::{BumpPotential, BumpProfile};
use crate::quad::adaptive_simpson;
use crate::spectral::{measure_on_interval, product_evaluation};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

/// Lower bounds for the gap distances.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GrowthSchedule {
    /// `d_j >= exp((j-1)^2)`; representable floors only for `j <= 6`
    /// (`exp(25) ~ 7e10`), beyond that use the log-domain certificate.
    PaperExponential,
    Geometric { first: f64, base: f64 },
    Custom { floors: Vec<f64> },
}

impl GrowthSchedule {
    /// Distance floor for bump `j` (1-based).
    pub fn floor(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Err(Error::Schedule {
                reason: "bump indices are 1-based".into(),
            });
        }
        match self {
            GrowthSchedule::PaperExponential => {
                if j > 6 {
                    return Err(Error::Schedule {
                        reason: format!(
                            "exponential floor exp(({j}-1)^2) overflows the working range; \
                             use the log-domain certificate beyond j = 6"
                        ),
                    });
                }
                Ok((((j - 1) * (j - 1)) as f64).exp())
            }
            GrowthSchedule::Geometric { first, base } => {
                if !(*first > 0.0) || !(*base > 1.0) {
                    return Err(Error::Schedule {
                        reason: format!("geometric schedule needs first > 0, base > 1, got ({first}, {base})"),
                    });
                }
                Ok(first * base.powi(j as i32 - 1))
            }
            GrowthSchedule::Custom { floors } => floors.get(j - 1).copied().ok_or_else(|| {
                Error::Schedule {
                    reason: format!("custom schedule has no floor for bump {j}"),
                }
            }),
        }
    }

    /// `log d_j` floor, defined for every index (no overflow guard).
    pub fn log_floor(&self, j: usize) -> Result<f64> {
        match self {
            GrowthSchedule::PaperExponential => Ok(((j as f64) - 1.0).powi(2)),
            GrowthSchedule::Geometric { first, base } => {
                Ok(first.ln() + (j as f64 - 1.0) * base.ln())
            }
            GrowthSchedule::Custom { .. } => self.floor(j).map(|d| d.ln()),
        }
    }
}

/// Stage tolerances `eps_n`; must be strictly decreasing with a summable
/// tail, which is enforced through a uniform ratio bound `< 1`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Geometric { first: f64, ratio: f64 },
    Custom { values: Vec<f64> },
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            EpsilonSchedule::Geometric { first, ratio } => {
                if !(*first > 0.0 && *ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::Schedule {
                        reason: format!(
                            "epsilon schedule needs first > 0 and ratio in (0,1), got ({first}, {ratio})"
                        ),
                    });
                }
                Ok(())
            }
            EpsilonSchedule::Custom { values } => {
                if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::Schedule {
                        reason: "epsilon values must be positive".into(),
                    });
                }
                for w in values.windows(2) {
                    // A uniform geometric bound keeps the series summable;
                    // slowly decaying schedules like 1/n fail here.
                    if w[1] >= 0.95 * w[0] {
                        return Err(Error::Schedule {
                            reason: format!(
                                "epsilon schedule not summably decreasing: {} -> {}",
                                w[0], w[1]
                            ),
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// `eps_n` for stage `n` (1-based).
    pub fn value(&self, n: usize) -> Result<f64> {
        match self {
            EpsilonSchedule::Geometric { first, ratio } => Ok(first * ratio.powi(n as i32 - 1)),
            EpsilonSchedule::Custom { values } => {
                values.get(n - 1).copied().ok_or_else(|| Error::Schedule {
                    reason: format!("no epsilon for stage {n}"),
                })
            }
        }
    }
}

/// `Xi_n = [-2n, -1/(2n)] u [1/(2n), 2n]`.
pub fn xi_intervals(n: usize) -> [(f64, f64); 2] {
    let n = n as f64;
    [(-2.0 * n, -1.0 / (2.0 * n)), (1.0 / (2.0 * n), 2.0 * n)]
}

// ---------------------------------------------------------------------------
// Averaging residual
// ---------------------------------------------------------------------------

/// `| int_alpha^beta F(kappa) [G(kappa, L kappa) - mean_G(kappa)] dkappa |`
/// where `mean_G` is the period average of the pi-periodic second argument.
/// The residual decays like `1/L`; callers watch the trend over increasing
/// `L` rather than asserting a per-sample bound.
pub fn averaging_residual<F, G>(f: F, g: G, l: f64, interval: (f64, f64)) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let (alpha, beta) = interval;
    let mean = |kappa: f64| {
        adaptive_simpson(|y| g(kappa, y), 0.0, std::f64::consts::PI, 1e-11)
            / std::f64::consts::PI
    };
    let integrand = |kappa: f64| f(kappa) * (g(kappa, l * kappa) - mean(kappa));
    let panels = ((l.abs() * (beta - alpha) / std::f64::consts::PI).ceil() as usize * 8 + 64)
        .clamp(64, 1 << 18);
    crate::quad::composite_simpson(integrand, alpha, beta, panels).abs()
}

// ---------------------------------------------------------------------------
// Distance selection
// ---------------------------------------------------------------------------

/// Outcome of a distance scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceSelection {
    pub distance: f64,
    /// Measure gap re-checked with the independent interval quadrature after
    /// acceptance.
    pub achieved_gap: f64,
    /// `(candidate d, scanned gap)` trace.
    pub scan: Vec<(f64, f64)>,
}

struct SigmaCache {
    lo: f64,
    hi: f64,
    panels: usize,
    /// Density of the current potential at the Simpson nodes.
    dens: Vec<f64>,
    /// Pruefer phase at the last bump end (or the boundary) at the nodes.
    theta: Vec<f64>,
    /// Oscillation coefficients of the candidate bump at the nodes.
    coeffs: Vec<BumpCoefficients>,
}

impl SigmaCache {
    fn build(
        q: &BumpPotential,
        probe: &BumpPotential,
        interval: (f64, f64),
        panels: usize,
    ) -> Result<Self> {
        let (lo, hi) = interval;
        let n = panels.max(2).next_multiple_of(2);
        let nodes: Vec<f64> = (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect();
        let rows: Result<Vec<(f64, f64, BumpCoefficients)>> = nodes
            .par_iter()
            .map(|&kappa| {
                let param = crate::pruefer::SpectralParam::from_kappa(kappa)?;
                let eval = product_evaluation(q, param)?;
                let m = crate::spectral::bump_transfer(probe, 0, param.lambda())?;
                let co = abc_from_transfer(&m, param.lambda())?;
                Ok((eval.density, eval.theta_end, co))
            })
            .collect();
        let rows = rows?;
        Ok(SigmaCache {
            lo,
            hi,
            panels: n,
            dens: rows.iter().map(|r| r.0).collect(),
            theta: rows.iter().map(|r| r.1).collect(),
            coeffs: rows.iter().map(|r| r.2).collect(),
        })
    }

    /// `| mu_{n+1}(Sigma; d) - mu_n(Sigma) |` from the cached nodes: the新
    /// factor integrates against the existing density.
    fn gap(&self, d: f64) -> f64 {
        let n = self.panels;
        let h = (self.hi - self.lo) / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let kappa = self.lo + (self.hi - self.lo) * i as f64 / n as f64;
            let y = self.theta[i] - kappa * d;
            let term = self.dens[i] * (self.coeffs[i].f_of(y) - 1.0);
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * term;
        }
        (sum * h / 3.0).abs()
    }
}

/// Panels resolving both the existing density and the candidate phase.
fn scan_panels(q: &BumpPotential, d: f64, width: f64) -> usize {
    let travel = (q.support_end() + d) * width;
    ((travel / std::f64::consts::PI).ceil() as usize * 8 + 128).clamp(128, 1 << 20)
}

/// Scans `d = d_floor * 2^i` until every test interval's measure moves by
/// less than `tol` when the bump `(height, profile)` is appended at gap `d`.
pub fn select_next_distance(
    q: &BumpPotential,
    height: f64,
    profile: &BumpProfile,
    sigma_list: &[(f64, f64)],
    tol: f64,
    d_floor: f64,
) -> Result<DistanceSelection> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("selection tolerance {tol} <= 0")));
    }
    if !(d_floor > 0.0) {
        return Err(Error::domain(format!("distance floor {d_floor} <= 0")));
    }
    // Trivial bump: the oscillation factor is identically 1.
    if height == 0.0 {
        return Ok(DistanceSelection {
            distance: d_floor,
            achieved_gap: 0.0,
            scan: vec![(d_floor, 0.0)],
        });
    }
    // Local probe potential holding the candidate bump; its transfer matrix
    // (hence A, B, C) does not depend on where the bump ends up.
    let probe = BumpPotential::free(q.boundary_angle())?
        .with_extra_bump(height, profile.clone(), 1.0)?;

    let mut caches: Vec<Option<SigmaCache>> = sigma_list.iter().map(|_| None).collect();
    let mut scan = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    const MAX_DOUBLINGS: u32 = 20;

    for i in 0..=MAX_DOUBLINGS {
        let d = d_floor * f64::powi(2.0, i as i32);
        let mut worst = 0.0f64;
        for (slot, &(lo, hi)) in caches.iter_mut().zip(sigma_list) {
            let need = scan_panels(q, d, hi - lo);
            let rebuild = match slot {
                Some(c) => c.panels < need,
                None => true,
            };
            if rebuild {
                *slot = Some(SigmaCache::build(q, &probe, (lo, hi), need)?);
            }
            worst = worst.max(slot.as_ref().unwrap().gap(d));
        }
        scan.push((d, worst));
        if best.map_or(true, |(_, g)| worst < g) {
            best = Some((d, worst));
        }
        if worst < tol {
            // Independent re-check through the interval quadrature.
            let extended = q.with_extra_bump(height, profile.clone(), d)?;
            let mut verified = 0.0f64;
            for &(lo, hi) in sigma_list {
                let before = measure_on_interval(q, (lo, hi), None)?.value;
                let after = measure_on_interval(&extended, (lo, hi), None)?.value;
                verified = verified.max((after - before).abs());
            }
            if verified < tol {
                return Ok(DistanceSelection {
                    distance: d,
                    achieved_gap: verified,
                    scan,
                });
            }
        }
    }
    Err(Error::SelectionFailure {
        doublings: MAX_DOUBLINGS,
        best_gap: best.map(|(_, g)| g).unwrap_or(f64::INFINITY),
        tol,
    })
}

// ---------------------------------------------------------------------------
// Concentration sets
// ---------------------------------------------------------------------------

/// A super-level set `{ density > threshold }` as a union of intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationSet {
    pub threshold: f64,
    pub intervals: Vec<(f64, f64)>,
    /// Lebesgue measure of the union.
    pub measure: f64,
    /// Quadrature of the density over the complement `Xi \ S`; bounded by
    /// `threshold * |Xi|` because the density is below the threshold there.
    pub retained_outside: f64,
}

/// Marks the cells of an adaptively refined grid where the product-route
/// density exceeds `threshold` and merges them into intervals.  Cells are
/// half-open on the right so merged lengths add exactly; ties within 1e-12
/// of the threshold count as inside.
pub fn concentration_set(
    q: &BumpPotential,
    xi: &[(f64, f64)],
    threshold: f64,
    base_cells: usize,
) -> Result<ConcentrationSet> {
    if !(threshold > 0.0) {
        return Err(Error::domain(format!("threshold {threshold} <= 0")));
    }
    let mut intervals = Vec::new();
    let mut retained = 0.0;
    for &(lo, hi) in xi {
        // Seed cells from the density's oscillation scale, then refine where
        // the value still varies by more than 10% across a cell.
        let osc = ((q.support_end() * (hi - lo) / std::f64::consts::PI).ceil() as usize * 8)
            .max(base_cells)
            .clamp(16, 1 << 20);
        let mut nodes: Vec<f64> = (0..=osc)
            .map(|i| lo + (hi - lo) * i as f64 / osc as f64)
            .collect();
        let mut values = density_at(q, &nodes)?;
        for _pass in 0..4 {
            let mut extra = Vec::new();
            for i in 0..nodes.len() - 1 {
                let (a, b) = (values[i], values[i + 1]);
                if (a - b).abs() > 0.1 * a.max(b).max(1e-3 * threshold) {
                    extra.push(0.5 * (nodes[i] + nodes[i + 1]));
                }
            }
            if extra.is_empty() || nodes.len() + extra.len() > (1 << 21) {
                break;
            }
            let extra_values = density_at(q, &extra)?;
            nodes.extend_from_slice(&extra);
            values.extend_from_slice(&extra_values);
            let mut pairs: Vec<(f64, f64)> = nodes.iter().copied().zip(values).collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            nodes = pairs.iter().map(|p| p.0).collect();
            values = pairs.iter().map(|p| p.1).collect();
        }

        let inside = |i: usize| values[i] >= threshold - 1e-12;
        let mut current: Option<(f64, f64)> = None;
        for i in 0..nodes.len() - 1 {
            let cell_in = inside(i) || inside(i + 1);
            if cell_in {
                current = match current {
                    Some((s, _)) => Some((s, nodes[i + 1])),
                    None => Some((nodes[i], nodes[i + 1])),
                };
            } else {
                retained +=
                    0.5 * (values[i] + values[i + 1]) * (nodes[i + 1] - nodes[i]);
                if let Some(done) = current.take() {
                    intervals.push(done);
                }
            }
        }
        if let Some(done) = current.take() {
            intervals.push(done);
        }
    }
    let measure = intervals.iter().map(|(a, b)| b - a).sum();
    Ok(ConcentrationSet {
        threshold,
        intervals,
        measure,
        retained_outside: retained,
    })
}

fn density_at(q: &BumpPotential, kappas: &[f64]) -> Result<Vec<f64>> {
    kappas
        .par_iter()
        .map(|&k| {
            let param = crate::pruefer::SpectralParam::from_kappa(k)?;
            Ok(product_evaluation(q, param)?.density)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Staged build
// ---------------------------------------------------------------------------

/// Height hypothesis for the staged build.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HeightSchedule {
    /// Identical nonzero bumps.
    Identical { height: f64 },
    /// `H_j = 1/sqrt(j)`: heights decay while `sum H_j^2 W_j` diverges.
    InverseSqrt,
}

impl HeightSchedule {
    fn height(&self, j: usize) -> f64 {
        match self {
            HeightSchedule::Identical { height } => *height,
            HeightSchedule::InverseSqrt => 1.0 / (j as f64).sqrt(),
        }
    }
}

/// Configuration of the staged construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PearsonConfig {
    pub heights: HeightSchedule,
    /// Shared bump profile (width + shape).
    pub profile_width: f64,
    pub profile_kind: String,
    pub epsilon: EpsilonSchedule,
    pub growth: GrowthSchedule,
    pub stages: usize,
    pub bumps_per_stage: usize,
    #[serde(default)]
    pub eta: f64,
    /// Test intervals per half-axis of `Xi_n`.
    #[serde(default = "default_test_intervals")]
    pub test_intervals_per_side: usize,
    /// Base cell count for concentration-set grids.
    #[serde(default = "default_base_cells")]
    pub base_cells: usize,
}

fn default_test_intervals() -> usize {
    2
}

fn default_base_cells() -> usize {
    512
}

impl PearsonConfig {
    pub fn profile(&self) -> Result<BumpProfile> {
        match self.profile_kind.as_str() {
            "rect" => BumpProfile::rectangular(self.profile_width),
            "cos" => BumpProfile::raised_cosine(self.profile_width),
            "tri" => BumpProfile::triangular(self.profile_width),
            other => Err(Error::shape(format!("unknown profile kind `{other}`"))),
        }
    }
}

/// One completed stage of the inductive construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionStage {
    pub stage: usize,
    pub xi: [(f64, f64); 2],
    pub epsilon: f64,
    /// Bump count after this stage.
    pub nu_after: usize,
    /// Distances chosen in this stage.
    pub distances: Vec<f64>,
    /// Verified measure gaps, one per new bump.
    pub gaps: Vec<f64>,
    /// Step budgets `eps_n 2^{-(j+1)}`, one per new bump.
    pub budgets: Vec<f64>,
    /// Super-level threshold `eps_n / |Xi_n|`.
    pub threshold: f64,
    pub s_intervals: Vec<(f64, f64)>,
    pub s_measure: f64,
    pub retained_outside: f64,
    /// Test intervals the budgets were enforced on.
    pub test_intervals: Vec<(f64, f64)>,
}

/// Test intervals: each half-axis of `Xi_n` split evenly.
pub fn stage_test_intervals(n: usize, per_side: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (lo, hi) in xi_intervals(n) {
        let m = per_side.max(1);
        for i in 0..m {
            let a = lo + (hi - lo) * i as f64 / m as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / m as f64;
            out.push((a, b));
        }
    }
    out
}

/// Runs `stages` stages of the inductive build, returning the stage records
/// and the final potential.  On a selection failure the completed stages ride
/// along in the error.
pub fn build_pearson_sequence(
    cfg: &PearsonConfig,
) -> Result<(Vec<ConstructionStage>, BumpPotential)> {
    cfg.epsilon.validate()?;
    if cfg.stages == 0 || cfg.bumps_per_stage == 0 {
        return Err(Error::config(
            "stages",
            "need at least one stage and one bump per stage",
        ));
    }
    let profile = cfg.profile()?;
    validate_height_hypothesis(cfg, &profile)?;

    let mut q = BumpPotential::free(cfg.eta)?;
    let mut stages = Vec::new();
    for n in 1..=cfg.stages {
        match run_stage(cfg, &profile, &mut q, n) {
            Ok(stage) => stages.push(stage),
            Err(source) => {
                return Err(Error::ConstructionAborted {
                    stage: n,
                    source: Box::new(source),
                    completed: stages,
                })
            }
        }
    }
    Ok((stages, q))
}

fn run_stage(
    cfg: &PearsonConfig,
    profile: &BumpProfile,
    q: &mut BumpPotential,
    n: usize,
) -> Result<ConstructionStage> {
    let eps = cfg.epsilon.value(n)?;
    let xi = xi_intervals(n);
    let sigma_list = stage_test_intervals(n, cfg.test_intervals_per_side);

    let mut distances = Vec::new();
    let mut gaps = Vec::new();
    let mut budgets = Vec::new();
    for _ in 0..cfg.bumps_per_stage {
        let j = q.bump_count() + 1;
        let height = cfg.heights.height(j);
        let budget = eps * f64::powi(2.0, -(j as i32 + 1));
        let floor = cfg.growth.floor(j)?;
        let sel = select_next_distance(q, height, profile, &sigma_list, budget, floor)?;
        *q = q.with_extra_bump(height, profile.clone(), sel.distance)?;
        distances.push(sel.distance);
        gaps.push(sel.achieved_gap);
        budgets.push(budget);
    }

    let xi_len: f64 = xi.iter().map(|(a, b)| b - a).sum();
    let threshold = eps / xi_len;
    let set = concentration_set(q, &xi, threshold, cfg.base_cells)?;
    Ok(ConstructionStage {
        stage: n,
        xi,
        epsilon: eps,
        nu_after: q.bump_count(),
        distances,
        gaps,
        budgets,
        threshold,
        s_intervals: set.intervals,
        s_measure: set.measure,
        retained_outside: set.retained_outside,
        test_intervals: sigma_list,
    })
}

fn validate_height_hypothesis(cfg: &PearsonConfig, profile: &BumpProfile) -> Result<()> {
    match cfg.heights {
        HeightSchedule::Identical { height } => {
            if !(height > 0.0) {
                return Err(Error::config(
                    "heights",
                    "identical bumps must have a positive height",
                ));
            }
            Ok(())
        }
        HeightSchedule::InverseSqrt => {
            // Divergence trend of sum H_j^2 W_j at kappa = 1: harmonic-type
            // growth keeps successive doubling increments comparable.
            let hypothetical = |count: usize| -> Result<f64> {
                let bumps: Vec<(f64, BumpProfile)> = (1..=count)
                    .map(|j| (1.0 / (j as f64).sqrt(), profile.clone()))
                    .collect();
                let dists = vec![profile.width() + 1.0; count];
                let qh = crate::potential::build_bump_potential(bumps, dists, 0.0)?;
                Ok(divergence_partial_sums(&qh, 1.0, count))
            };
            let s64 = hypothetical(64)?;
            let s128 = hypothetical(128)?;
            let s256 = hypothetical(256)?;
            if s256 - s128 < 0.5 * (s128 - s64) {
                return Err(Error::config(
                    "heights",
                    format!(
                        "divergence trend failed: increments {} then {}",
                        s128 - s64,
                        s256 - s128
                    ),
                ));
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// No-point-spectrum certificate
// ---------------------------------------------------------------------------

/// One log-domain term of the growth certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertificateTerm {
    pub index: usize,
    /// `log d_{j+1} - 2 j omega / |kappa|` (floor value).
    pub log_term: f64,
    /// Increment over the previous term.
    pub increment: f64,
    /// `(2j - 1) - 2 omega/|kappa|`, the exact exponential-schedule increment.
    pub bound: f64,
}

/// Growth certificate for the absence of eigenvalues outside the gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    /// `omega = sup_j H_j int |W_j|`.
    pub omega: f64,
    pub kappa: f64,
    pub terms: Vec<CertificateTerm>,
    /// Log-domain partial sums `log sum_{j<=N} exp(log_term_j)`.
    pub log_partial_sums: Vec<f64>,
    /// Relative deviation of the log-domain partial sum from a direct f64
    /// evaluation over the representable range `j <= 5`.
    pub direct_check_rel_error: Option<f64>,
}

/// Builds the certificate: the radius loss per bump is at most
/// `omega/|kappa|`, so `int R^2` over the gaps dominates
/// `sum_j d_{j+1} exp(-2 j omega/|kappa|)`; with `d_{j+1} >= exp(j^2)` the
/// log-domain terms `j^2 - 2 j omega/|kappa|` grow without bound and the
/// solution cannot be square integrable.
pub fn no_point_spectrum_certificate(
    q: &BumpPotential,
    kappa: f64,
    schedule: &GrowthSchedule,
    terms: usize,
) -> Result<Certificate> {
    if kappa == 0.0 {
        return Err(Error::ZeroKappa);
    }
    let omega = q
        .bumps()
        .iter()
        .map(|b| b.height * b.profile.mass())
        .fold(0.0f64, f64::max);
    let rate = 2.0 * omega / kappa.abs();

    let mut cert_terms = Vec::with_capacity(terms);
    let mut prev = f64::NAN;
    for j in 1..=terms {
        let log_term = schedule.log_floor(j + 1)? - rate * j as f64;
        let increment = if j == 1 { f64::NAN } else { log_term - prev };
        cert_terms.push(CertificateTerm {
            index: j,
            log_term,
            increment,
            bound: (2.0 * j as f64 - 1.0) - rate,
        });
        prev = log_term;
    }

    // Streaming log-sum-exp of the partial sums.
    let mut log_partial_sums = Vec::with_capacity(terms);
    let mut lse = f64::NEG_INFINITY;
    for t in &cert_terms {
        lse = log_add_exp(lse, t.log_term);
        log_partial_sums.push(lse);
    }

    let direct_check_rel_error = if terms >= 5 {
        let direct: f64 = cert_terms[..5].iter().map(|t| t.log_term.exp()).sum();
        let lse5 = log_partial_sums[4];
        Some((lse5.exp() - direct).abs() / direct.abs().max(f64::MIN_POSITIVE))
    } else {
        None
    };

    Ok(Certificate {
        omega,
        kappa,
        terms: cert_terms,
        log_partial_sums,
        direct_check_rel_error,
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::build_bump_potential;

    #[test]
    fn growth_schedule_floors() {
        let exp = GrowthSchedule::PaperExponential;
        assert!((exp.floor(1).unwrap() - 1.0).abs() < 1e-15);
        assert!((exp.floor(3).unwrap() - 4.0f64.exp()).abs() < 1e-9);
        assert!(exp.floor(7).is_err());
        assert!((exp.log_floor(10).unwrap() - 81.0).abs() < 1e-12);

        let geo = GrowthSchedule::Geometric {
            first: 2.0,
            base: 2.0,
        };
        assert_eq!(geo.floor(1).unwrap(), 2.0);
        assert_eq!(geo.floor(4).unwrap(), 16.0);
    }

    #[test]
    fn epsilon_schedules_validate_summability() {
        let good = EpsilonSchedule::Geometric {
            first: 0.5,
            ratio: 0.5,
        };
        assert!(good.validate().is_ok());
        assert!((good.value(3).unwrap() - 0.125).abs() < 1e-15);

        // 1/n decays too slowly.
        let harmonic = EpsilonSchedule::Custom {
            values: (1..=8).map(|n| 1.0 / n as f64).collect(),
        };
        assert!(harmonic.validate().is_err());

        let dyadic = EpsilonSchedule::Custom {
            values: (1..=8).map(|n| f64::powi(0.5, n)).collect(),
        };
        assert!(dyadic.validate().is_ok());
    }

    #[test]
    fn averaging_residual_vanishes_for_phase_free_integrand() {
        let res = averaging_residual(|k| k * k, |k, _| k.cos(), 50.0, (1.0, 2.0));
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn averaging_residual_analytic_sine_case() {
        // F = 1, G = sin^2 y: residual is |sin(4L) - sin(2L)| / (4L) <= 1/(2L).
        for l in [10.0, 100.0, 1000.0] {
            let res = averaging_residual(|_| 1.0, |_, y| y.sin() * y.sin(), l, (1.0, 2.0));
            let exact = ((4.0 * l).sin() - (2.0 * l).sin()).abs() / (4.0 * l);
            assert!((res - exact).abs() < 1e-7, "L = {l}: {res} vs {exact}");
            assert!(res <= 0.5 / l + 1e-7);
        }
    }

    #[test]
    fn averaging_residual_decays_for_oscillation_factor() {
        // F = 1/kappa^2, G = the f-factor of a fixed bump.
        let m = crate::odecore::closed_form_rectangular(1.0, 1.0, 2.0).unwrap();
        let co = abc_from_transfer(&m, 2.0).unwrap();
        let g = |_k: f64, y: f64| co.f_of(y);
        let r10 = averaging_residual(|k| 1.0 / (k * k), g, 10.0, (1.0, 2.0));
        let r1000 = averaging_residual(|k| 1.0 / (k * k), g, 1000.0, (1.0, 2.0));
        assert!(r1000 < r10, "no decay: {r10} -> {r1000}");
    }

    #[test]
    fn zero_height_bump_selects_the_floor() {
        let q = BumpPotential::free(0.0).unwrap();
        let profile = BumpProfile::rectangular(1.0).unwrap();
        let sel =
            select_next_distance(&q, 0.0, &profile, &[(1.0, 2.0)], 1e-3, 2.0).unwrap();
        assert_eq!(sel.distance, 2.0);
        assert_eq!(sel.achieved_gap, 0.0);
    }

    #[test]
    fn selection_meets_tolerance_on_the_worked_bump() {
        let q = BumpPotential::free(0.0).unwrap();
        let profile = BumpProfile::rectangular(1.0).unwrap();
        let sel =
            select_next_distance(&q, 1.0, &profile, &[(1.0, 2.0)], 1e-3, 2.0).unwrap();
        assert!(sel.achieved_gap < 1e-3);
        assert!(sel.distance >= 2.0);
        // The scan trend improves (min over a trailing window shrinks).
        let first = sel.scan.first().unwrap().1;
        let last_min = sel
            .scan
            .iter()
            .rev()
            .take(3)
            .map(|s| s.1)
            .fold(f64::INFINITY, f64::min);
        assert!(last_min <= first);
    }

    #[test]
    fn concentration_set_extremes() {
        let q = BumpPotential::free(0.0).unwrap();
        let xi = xi_intervals(1);
        // Threshold above the density everywhere: S empty.
        let high = concentration_set(&q, &xi, 10.0, 64).unwrap();
        assert!(high.intervals.is_empty());
        assert_eq!(high.measure, 0.0);
        // Tiny threshold: S is all of Xi.
        let low = concentration_set(&q, &xi, 1e-9, 64).unwrap();
        let xi_len: f64 = xi.iter().map(|(a, b)| b - a).sum();
        assert!((low.measure - xi_len).abs() < 1e-9);
    }

    #[test]
    fn retained_mass_outside_is_below_threshold_times_length() {
        let q = build_bump_potential(
            vec![
                (1.0, BumpProfile::rectangular(1.0).unwrap()),
                (1.0, BumpProfile::rectangular(1.0).unwrap()),
            ],
            vec![4.0, 8.0],
            0.0,
        )
        .unwrap();
        let xi = xi_intervals(1);
        let xi_len: f64 = xi.iter().map(|(a, b)| b - a).sum();
        let threshold = 0.15;
        let set = concentration_set(&q, &xi, threshold, 256).unwrap();
        assert!(set.retained_outside <= threshold * xi_len + 1e-9);
    }

    #[test]
    fn certificate_terms_and_partial_sums() {
        let q = crate::potential::decreasing_example(4, vec![2.0, 4.0, 8.0, 16.0], 0.0).unwrap();
        let cert = no_point_spectrum_certificate(
            &q,
            1.0,
            &GrowthSchedule::PaperExponential,
            12,
        )
        .unwrap();
        // omega = sup H_j * 1 = 1 for the worked heights.
        assert!((cert.omega - 1.0).abs() < 1e-15);

        // Term increments match (2j-1) - 2 omega/|kappa| exactly.
        for t in cert.terms.iter().skip(1) {
            assert!(
                (t.increment - t.bound).abs() < 1e-9,
                "term {}: increment {} vs bound {}",
                t.index,
                t.increment,
                t.bound
            );
        }
        // Increments eventually increase: quadratic beats linear.
        let incs: Vec<f64> = cert.terms.iter().skip(1).map(|t| t.increment).collect();
        assert!(incs.windows(2).all(|w| w[1] > w[0]));

        // Partial sums strictly exceed the previous term by more than the
        // bound once j > omega/|kappa|.
        for j in 2..cert.terms.len() {
            let lhs = cert.log_partial_sums[j] - cert.terms[j - 1].log_term;
            assert!(lhs > cert.terms[j].bound);
        }

        // Direct evaluation over j <= 5 agrees to near machine precision.
        assert!(cert.direct_check_rel_error.unwrap() < 1e-12);
    }

    #[test]
    fn two_stage_build_respects_budgets() {
        let cfg = PearsonConfig {
            heights: HeightSchedule::Identical { height: 1.0 },
            profile_width: 1.0,
            profile_kind: "rect".into(),
            epsilon: EpsilonSchedule::Geometric {
                first: 16.0,
                ratio: 0.5,
            },
            growth: GrowthSchedule::Geometric {
                first: 2.0,
                base: 2.0,
            },
            stages: 2,
            bumps_per_stage: 1,
            eta: 0.0,
            test_intervals_per_side: 2,
            base_cells: 256,
        };
        let (stages, q) = build_pearson_sequence(&cfg).unwrap();
        assert_eq!(stages.len(), 2);
        assert_eq!(q.bump_count(), 2);
        for st in &stages {
            for (gap, budget) in st.gaps.iter().zip(&st.budgets) {
                assert!(gap < budget, "gap {gap} vs budget {budget}");
            }
            assert!(st.s_measure >= 0.0);
        }
        assert!(stages[1].epsilon < stages[0].epsilon);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = PearsonConfig {
            heights: HeightSchedule::Identical { height: 0.0 },
            profile_width: 1.0,
            profile_kind: "rect".into(),
            epsilon: EpsilonSchedule::Geometric {
                first: 1.0,
                ratio: 0.5,
            },
            growth: GrowthSchedule::Geometric {
                first: 2.0,
                base: 2.0,
            },
            stages: 1,
            bumps_per_stage: 1,
            eta: 0.0,
            test_intervals_per_side: 1,
            base_cells: 64,
        };
        assert!(build_pearson_sequence(&cfg).is_err());
    }
}
