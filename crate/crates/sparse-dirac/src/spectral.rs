//! Spectral density of the half-line problem, interval measures, and the
//! regular problem on `[0, b]`.
//!
//! Two independent routes are kept side by side.  The product route chains
//! transfer matrices: the density is `(1/pi) (prod_j f_j) D(kappa)` with the
//! oscillation factors evaluated at the bump-start phases.  The direct route
//! integrates the nonlinear Pruefer equations to the last bump end and reads
//! the radius: `(1/(pi R_n^2)) (lambda+1)/lambda`.  Telescoping the radius
//! ratios shows the two routes are algebraically identical, so their
//! numerical agreement cross-validates both integrators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::abc_from_transfer;
use crate::odecore::{
    apply_transfer, closed_form_rectangular, dirac_coefficients, integrate_fundamental,
    StepControl, TransferMatrix,
};
use crate::potential::{BumpPotential, ProfileShape};
use crate::pruefer::{
    boundary_state, from_pruefer, propagate_pruefer, to_pruefer, PropagationSettings,
    SpectralParam,
};
use crate::{Error, Result};

/// Which computational route produced a density sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Product,
    Direct,
}

/// Density samples over a kappa grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityProfile {
    pub kappas: Vec<f64>,
    pub densities: Vec<f64>,
    pub provenance: Provenance,
    /// Left endpoint of the half-line problem (0, or 1 in the k-channel).
    pub left_endpoint: f64,
}

/// `mu(Sigma)` for one kappa interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntervalMeasure {
    pub interval: (f64, f64),
    pub value: f64,
    /// Simpson panel count at which the doubling check passed.
    pub panels: usize,
}

/// Boundary factor `D(kappa) = (lambda+1)/lambda / R(0)^2`.
pub fn d_factor(kappa: f64, radius_at_left: f64) -> Result<f64> {
    let lambda = crate::pruefer::lambda_of_kappa(kappa)?;
    Ok((lambda + 1.0) / lambda / (radius_at_left * radius_at_left))
}

/// Transfer matrix of bump `j`, analytic for rectangular profiles.
pub fn bump_transfer(q: &BumpPotential, j: usize, lambda: f64) -> Result<TransferMatrix> {
    let bump = &q.bumps()[j];
    match bump.profile.shape() {
        ProfileShape::Rectangular => {
            // Constant potential value H/width across the support.
            closed_form_rectangular(
                bump.height / bump.profile.width(),
                bump.profile.width(),
                lambda,
            )
        }
        _ => {
            let coeffs = dirac_coefficients(q, lambda);
            integrate_fundamental(
                &coeffs,
                (q.start(j), q.end(j)),
                lambda,
                StepControl::default(),
            )
        }
    }
}

/// Product-route evaluation with the end phase exposed.
#[derive(Debug, Clone, Copy)]
pub struct ProductEvaluation {
    pub density: f64,
    /// Pruefer angle at the last bump end (boundary value for no bumps);
    /// known modulo 2 pi only, which is all the oscillation factors need.
    pub theta_end: f64,
    /// Squared radius at the left endpoint (boundary normalization).
    pub radius_left_sq: f64,
}

/// Evaluates the density along the product route and reports the phase at
/// the last bump end.
pub fn product_evaluation(q: &BumpPotential, param: SpectralParam) -> Result<ProductEvaluation> {
    let kappa = param.kappa();
    let lambda = param.lambda();
    let state0 = boundary_state(q.boundary_angle(), param)?;
    let mut theta = state0.theta;
    let mut product = 1.0;
    for j in 0..q.bump_count() {
        let m = bump_transfer(q, j, lambda)?;
        let co = abc_from_transfer(&m, lambda)?;
        let y = theta - kappa * q.distances()[j];
        product *= co.f_of(y);
        let psi_a = from_pruefer(1.0, y, param);
        let psi_b = apply_transfer(&m, psi_a);
        let (_, theta_b) = to_pruefer(psi_b, param)?;
        theta = theta_b;
    }
    let r0_sq = state0.radius * state0.radius;
    Ok(ProductEvaluation {
        density: product * (lambda + 1.0) / lambda / r0_sq / std::f64::consts::PI,
        theta_end: theta,
        radius_left_sq: r0_sq,
    })
}

/// `d rho / d kappa` via the oscillation-factor product.
pub fn density_product(q: &BumpPotential, param: SpectralParam) -> Result<f64> {
    Ok(product_evaluation(q, param)?.density)
}

/// `d rho / d kappa` via direct propagation: `(1/(pi R_n^2)) (lambda+1)/lambda`
/// with `R_n` the Pruefer radius at the last bump end.
pub fn density_direct(q: &BumpPotential, param: SpectralParam) -> Result<f64> {
    let state0 = boundary_state(q.boundary_angle(), param)?;
    let trace = propagate_pruefer(
        q,
        param,
        None,
        0.0,
        q.support_end(),
        state0.theta,
        state0.radius,
        &PropagationSettings::default(),
    )?;
    let rn = trace.end.radius;
    let lambda = param.lambda();
    Ok((lambda + 1.0) / lambda / (rn * rn) / std::f64::consts::PI)
}

/// Samples a density profile over an equally spaced kappa grid (parallel).
pub fn sample_density_profile(
    q: &BumpPotential,
    kappa_min: f64,
    kappa_max: f64,
    count: usize,
    provenance: Provenance,
) -> Result<DensityProfile> {
    if kappa_min >= kappa_max || kappa_min * kappa_max <= 0.0 {
        return Err(Error::domain(format!(
            "kappa grid [{kappa_min}, {kappa_max}] must be ordered and exclude 0"
        )));
    }
    let count = count.max(2);
    let kappas: Vec<f64> = (0..count)
        .map(|i| kappa_min + (kappa_max - kappa_min) * i as f64 / (count - 1) as f64)
        .collect();
    let densities: Result<Vec<f64>> = kappas
        .par_iter()
        .map(|&k| {
            let param = SpectralParam::from_kappa(k)?;
            match provenance {
                Provenance::Product => density_product(q, param),
                Provenance::Direct => density_direct(q, param),
            }
        })
        .collect();
    Ok(DensityProfile {
        kappas,
        densities: densities?,
        provenance,
        left_endpoint: 0.0,
    })
}

/// Simpson with parallel node evaluation.
pub(crate) fn parallel_simpson<F>(f: &F, a: f64, b: f64, panels: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let n = panels.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let values: Result<Vec<f64>> = (0..=n)
        .into_par_iter()
        .map(|i| f(a + i as f64 * h))
        .collect();
    let values = values?;
    let mut sum = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(sum * h / 3.0)
}

/// Panel count that resolves the density's fastest kappa-oscillation, which
/// is set by the total phase travel `~ b_n |Sigma|`.
fn oscillation_panels(q: &BumpPotential, width: f64) -> usize {
    let travel = q.support_end() * width;
    ((travel / std::f64::consts::PI).ceil() as usize * 8 + 64).clamp(64, 1 << 21)
}

/// Spectral measure of a kappa interval by composite Simpson over the
/// product-route density; panels double until the value moves by less than
/// `1e-8` relative.
pub fn measure_on_interval(
    q: &BumpPotential,
    interval: (f64, f64),
    seed_panels: Option<usize>,
) -> Result<IntervalMeasure> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::domain(format!("empty interval [{lo}, {hi}]")));
    }
    if lo <= 0.0 && hi >= 0.0 {
        return Err(Error::domain(format!(
            "interval [{lo}, {hi}] touches the central gap at kappa = 0"
        )));
    }
    let f = |k: f64| -> Result<f64> {
        let param = SpectralParam::from_kappa(k)?;
        density_product(q, param)
    };
    let mut n = seed_panels
        .unwrap_or_else(|| oscillation_panels(q, hi - lo))
        .max(2)
        .next_multiple_of(2);
    let mut value = parallel_simpson(&f, lo, hi, n)?;
    loop {
        let refined = parallel_simpson(&f, lo, hi, 2 * n)?;
        let done = (refined - value).abs() <= 1e-8 * refined.abs().max(1e-300);
        n *= 2;
        value = refined;
        if done {
            return Ok(IntervalMeasure {
                interval,
                value,
                panels: n,
            });
        }
        if n >= (1 << 22) {
            return Err(Error::integration(format!(
                "interval measure on [{lo}, {hi}] did not settle at {n} panels"
            )));
        }
    }
}

/// Pruefer angle of the regular problem solution at `r = b`.
fn theta_at(q: &BumpPotential, b: f64, param: SpectralParam) -> Result<f64> {
    let state0 = boundary_state(q.boundary_angle(), param)?;
    let trace = propagate_pruefer(
        q,
        param,
        None,
        0.0,
        b,
        state0.theta,
        state0.radius,
        &PropagationSettings::default(),
    )?;
    Ok(trace.end.theta)
}

/// Number of eigenvalues of the regular problem on `[0, b]` in
/// `(lambda_1, lambda_2]`, counted through the Pruefer winding
/// `|theta(b; kappa_2) - theta(b; kappa_1)| / pi`.
pub fn count_eigenvalues_regular(
    q: &BumpPotential,
    b: f64,
    lambda_1: f64,
    lambda_2: f64,
) -> Result<usize> {
    if b <= q.support_end() {
        return Err(Error::domain(format!(
            "regular endpoint b = {b} must exceed the last bump end {}",
            q.support_end()
        )));
    }
    let ordered =
        (1.0 < lambda_1 && lambda_1 <= lambda_2) || (lambda_2 <= lambda_1 && lambda_1 < -1.0);
    if !ordered {
        return Err(Error::domain(format!(
            "need 1 < lambda_1 <= lambda_2 or the mirrored negative order, got ({lambda_1}, {lambda_2})"
        )));
    }
    if lambda_1 == lambda_2 {
        return Ok(0);
    }
    let p1 = SpectralParam::from_lambda(lambda_1)?;
    let p2 = SpectralParam::from_lambda(lambda_2)?;
    let t1 = theta_at(q, b, p1)?;
    let t2 = theta_at(q, b, p2)?;
    Ok(((t2 - t1).abs() / std::f64::consts::PI).round() as usize)
}

/// One jump of the regular problem's step spectral function.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EigenvalueJump {
    pub lambda: f64,
    pub kappa: f64,
    /// `1 / a_b^2` with `a_b^2` the squared L2 norm of the eigenfunction.
    pub jump: f64,
    /// `a_b^2` itself.
    pub norming: f64,
}

/// Step spectral function of the regular problem, plus any kappa
/// subintervals where root separation failed.
#[derive(Debug, Clone)]
pub struct StepFunction {
    pub jumps: Vec<EigenvalueJump>,
    pub unresolved: Vec<(f64, f64)>,
}

/// Squared L2 norm over `[0, b]` of the solution fixed by the boundary
/// condition at 0.
pub fn norming_constant(q: &BumpPotential, b: f64, param: SpectralParam) -> Result<f64> {
    let state0 = boundary_state(q.boundary_angle(), param)?;
    let trace = propagate_pruefer(
        q,
        param,
        None,
        0.0,
        b,
        state0.theta,
        state0.radius,
        &PropagationSettings::with_mass(),
    )?;
    Ok(trace.mass)
}

/// Locates the eigenvalues of the regular problem on `[0, b]` with
/// `lambda in [lambda_1, lambda_2]` (same sign, outside the gap) and
/// computes the spectral-function jumps `1 / a_b^2`.
///
/// Eigenvalues sit where the right boundary condition `Psi_2(b) = 0` holds,
/// i.e. where `theta(b; kappa)` crosses a multiple of pi; each crossing is
/// bisected in kappa.
pub fn regular_step_function(
    q: &BumpPotential,
    b: f64,
    lambda_range: (f64, f64),
    min_grid: usize,
) -> Result<StepFunction> {
    if b <= q.support_end() {
        return Err(Error::domain(format!(
            "regular endpoint b = {b} must exceed the last bump end {}",
            q.support_end()
        )));
    }
    let k1 = crate::pruefer::kappa_of_lambda(lambda_range.0)?;
    let k2 = crate::pruefer::kappa_of_lambda(lambda_range.1)?;
    if k1.signum() != k2.signum() {
        return Err(Error::domain("lambda range must not straddle the gap"));
    }
    let (lo, hi) = if k1 < k2 { (k1, k2) } else { (k2, k1) };

    // Grid fine enough that theta moves well under pi per cell.
    let cells = ((b * (hi - lo) / std::f64::consts::PI).ceil() as usize * 4)
        .max(min_grid)
        .max(8);
    let kappas: Vec<f64> = (0..=cells)
        .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
        .collect();
    let thetas: Result<Vec<f64>> = kappas
        .par_iter()
        .map(|&k| theta_at(q, b, SpectralParam::from_kappa(k)?))
        .collect();
    let thetas = thetas?;

    let mut jumps = Vec::new();
    let mut unresolved = Vec::new();
    for i in 0..cells {
        let (ka, kb) = (kappas[i], kappas[i + 1]);
        let (ta, tb) = (thetas[i], thetas[i + 1]);
        let fa = (ta / std::f64::consts::PI).floor();
        let fb = (tb / std::f64::consts::PI).floor();
        let crossings = (fb - fa).abs() as usize;
        if crossings == 0 {
            continue;
        }
        if crossings > 1 {
            unresolved.push((ka, kb));
            continue;
        }
        let target = fa.max(fb) * std::f64::consts::PI;
        let root = bisect_theta(q, b, (ka, kb), (ta, tb), target)?;
        let param = SpectralParam::from_kappa(root)?;
        let norming = norming_constant(q, b, param)?;
        jumps.push(EigenvalueJump {
            lambda: param.lambda(),
            kappa: root,
            jump: 1.0 / norming,
            norming,
        });
    }
    jumps.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
    Ok(StepFunction { jumps, unresolved })
}

fn bisect_theta(
    q: &BumpPotential,
    b: f64,
    kappa_bracket: (f64, f64),
    theta_bracket: (f64, f64),
    target: f64,
) -> Result<f64> {
    let (mut ka, mut kb) = kappa_bracket;
    let (mut ta, _tb) = theta_bracket;
    for _ in 0..80 {
        let mid = 0.5 * (ka + kb);
        if mid == ka || mid == kb {
            break;
        }
        let tm = theta_at(q, b, SpectralParam::from_kappa(mid)?)?;
        if (ta - target).signum() == (tm - target).signum() {
            ka = mid;
            ta = tm;
        } else {
            kb = mid;
        }
        if (kb - ka).abs() < 1e-14 * ka.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (ka + kb))
}
