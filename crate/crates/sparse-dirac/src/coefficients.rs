//! Per-bump oscillation coefficients and density factors.
//!
//! The squared Pruefer radii at consecutive bump ends satisfy
//! `R_j^2 / R_{j-1}^2 = A + B cos 2y + C sin 2y = 1 / f(kappa, y)` with the
//! oscillation phase `y` at the bump start and `A, B, C` quadratic forms in
//! the transfer-matrix entries.  `det M = 1` forces `A^2 - B^2 - C^2 = 1`,
//! which makes `f` a probability density over the phase: its period average
//! is exactly 1, while the average of `log f` is `m = log(2/(A+1)) <= 0`.

use crate::odecore::TransferMatrix;
use crate::potential::BumpProfile;
use crate::quad::{adaptive_simpson, composite_simpson};
use crate::{Error, Result};

/// Oscillation coefficients of one bump at a fixed spectral parameter.
#[derive(Debug, Clone, Copy)]
pub struct BumpCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kappa: f64,
    pub lambda: f64,
}

/// `A, B, C` from a transfer matrix.  The determinant may drift from 1 by at
/// most `1e-6`; the drift is folded into the reported invariant.
pub fn abc_from_transfer(m: &TransferMatrix, lambda: f64) -> Result<BumpCoefficients> {
    let det = m.det();
    if (det - 1.0).abs() > 1e-6 {
        return Err(Error::InconsistentMatrix { det, tol: 1e-6 });
    }
    let kappa = crate::pruefer::kappa_of_lambda(lambda)?;
    let rp = (lambda + 1.0) / (lambda - 1.0);
    let rm = 1.0 / rp;
    let a = 0.5 * (m.m11 * m.m11 + rp * m.m21 * m.m21 + rm * m.m12 * m.m12 + m.m22 * m.m22);
    let b = 0.5 * (m.m11 * m.m11 + rp * m.m21 * m.m21 - rm * m.m12 * m.m12 - m.m22 * m.m22);
    let c = rm.sqrt() * m.m11 * m.m12 + rp.sqrt() * m.m21 * m.m22;
    Ok(BumpCoefficients {
        a,
        b,
        c,
        kappa,
        lambda,
    })
}

impl BumpCoefficients {
    /// The hyperbolic invariant `A^2 - B^2 - C^2`, identically `(det M)^2`.
    pub fn invariant(&self) -> f64 {
        self.a * self.a - self.b * self.b - self.c * self.c
    }

    /// Density factor `f(y) = 1 / (A + B cos 2y + C sin 2y)`; positive for
    /// all `y` because `A > sqrt(B^2 + C^2)`.
    pub fn f_of(&self, y: f64) -> f64 {
        let (s, c) = (2.0 * y).sin_cos();
        1.0 / (self.a + self.b * c + self.c * s)
    }

    /// `h(y) = log f(y)`.
    pub fn h_of(&self, y: f64) -> f64 {
        self.f_of(y).ln()
    }

    /// Closed-form period average of `log f`: `m = log(2 / (A + 1))`.
    pub fn m_of(&self) -> f64 {
        (2.0 / (self.a + 1.0)).ln()
    }

    /// Extremes of `f` over the phase: `1/(A + rho)` and `1/(A - rho)` with
    /// `rho = sqrt(B^2 + C^2)`.
    pub fn f_range(&self) -> (f64, f64) {
        let rho = (self.b * self.b + self.c * self.c).sqrt();
        (1.0 / (self.a + rho), 1.0 / (self.a - rho))
    }

    /// Quadrature cross-checks: `(1/pi) int_0^pi f dy` (should be 1) and
    /// `(1/pi) int_0^pi log f dy` (should equal `m_of`).
    pub fn period_averages(&self) -> (f64, f64) {
        let pi = std::f64::consts::PI;
        let mean_f = adaptive_simpson(|y| self.f_of(y), 0.0, pi, 1e-11) / pi;
        let mean_log = adaptive_simpson(|y| self.h_of(y), 0.0, pi, 1e-11) / pi;
        (mean_f, mean_log)
    }
}

// ---------------------------------------------------------------------------
// Small-height asymptotics
// ---------------------------------------------------------------------------

/// Phase integrals of a profile placed at `a_j`:
/// `p = int W(t) cos(2 kappa (a_j + t)) dt`, `q = int W(t) sin(2 kappa (a_j + t)) dt`.
pub fn profile_phase_integrals(profile: &BumpProfile, a_j: f64, kappa: f64) -> (f64, f64) {
    let alpha = profile.width();
    let n = simpson_panels(profile, kappa);
    let p = composite_simpson(
        |t| profile.value(t) * (2.0 * kappa * (a_j + t)).cos(),
        0.0,
        alpha,
        n,
    );
    let q = composite_simpson(
        |t| profile.value(t) * (2.0 * kappa * (a_j + t)).sin(),
        0.0,
        alpha,
        n,
    );
    (p, q)
}

fn simpson_panels(profile: &BumpProfile, kappa: f64) -> usize {
    let osc = (profile.width() * kappa.abs() / std::f64::consts::PI).ceil() as usize;
    ((osc + 1) * 64).clamp(256, 1 << 16)
}

/// Second-order oscillation kernel of a bump: the coefficient `W` in
/// `A = 1 + (H^2/2) W + O(H^3)`.
///
/// Direct second-order perturbation of the transfer matrix in the rotating
/// frame gives `W = (4/kappa^2) (p^2 + q^2)` with the phase integrals above;
/// since `(p, q)` only rotates under translation of the bump, `W` is
/// position-independent, matching the exact translation invariance of `A`.
pub fn oscillation_kernel(profile: &BumpProfile, a_j: f64, kappa: f64) -> f64 {
    let (p, q) = profile_phase_integrals(profile, a_j, kappa);
    4.0 / (kappa * kappa) * (p * p + q * q)
}

/// First/second-order approximations for small height `H`:
/// `A ~ 1 + (H^2/2) W`, `B ~ -(2H/kappa) q`, `C ~ (2H/kappa) p`.
pub fn abc_asymptotic(
    profile: &BumpProfile,
    a_j: f64,
    kappa: f64,
    height: f64,
) -> (f64, f64, f64) {
    let (p, q) = profile_phase_integrals(profile, a_j, kappa);
    let w = 4.0 / (kappa * kappa) * (p * p + q * q);
    (
        1.0 + 0.5 * height * height * w,
        -2.0 * height / kappa * q,
        2.0 * height / kappa * p,
    )
}

/// Second-order approximation of the log-average:
/// `m = log(2/(A+1)) ~ -(H^2/4) W`.
pub fn m_asymptotic(profile: &BumpProfile, a_j: f64, kappa: f64, height: f64) -> f64 {
    -0.25 * height * height * oscillation_kernel(profile, a_j, kappa)
}

/// Partial sums `sum_{j<=n} H_j^2 W_j(kappa)` of the divergence condition.
/// Zero-height bumps contribute nothing.
pub fn divergence_partial_sums(
    q: &crate::potential::BumpPotential,
    kappa: f64,
    n: usize,
) -> f64 {
    let n = n.min(q.bump_count());
    let mut sum = 0.0;
    for j in 0..n {
        let bump = &q.bumps()[j];
        if bump.height == 0.0 {
            continue;
        }
        sum += bump.height * bump.height * oscillation_kernel(&bump.profile, q.start(j), kappa);
    }
    sum
}

/// The constant `K_c = max(2, max_{s in [c,1]} (log s)^2 / (s - 1 - log s))`
/// for which `h^2 <= K (f - 1 - h)` holds whenever `f >= c`.
pub fn hj_bound_constant(c: f64) -> Result<f64> {
    if !(0.0 < c && c < 1.0) {
        return Err(Error::domain(format!("K_c needs c in (0, 1), got {c}")));
    }
    let g = |s: f64| {
        if (s - 1.0).abs() < 1e-5 {
            // Removable singularity: (log s)^2 / (s - 1 - log s) -> 2.
            2.0 + 2.0 / 3.0 * (s - 1.0)
        } else {
            let ls = s.ln();
            ls * ls / (s - 1.0 - ls)
        }
    };
    let n = 200_000;
    let mut max = 2.0f64;
    for i in 0..=n {
        let s = c + (1.0 - c) * i as f64 / n as f64;
        max = max.max(g(s));
    }
    Ok(max)
}
