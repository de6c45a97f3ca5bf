//! Generalized Pruefer transformation and propagation of `(R, theta)`.
//!
//! Outside the central gap the solution is written as
//! `Psi_1 = R cos theta`, `Psi_2 = R sqrt((lambda-1)/(lambda+1)) sin theta`,
//! polar coordinates on an ellipse adapted to the Dirac dispersion.  The
//! radius obeys `(log R)' = (q/kappa) sin 2theta` and the angle
//! `theta' = -kappa + (q/kappa)(lambda + cos 2theta)`, independently of `R`.
//! On potential-free stretches both laws are exact: `R` is constant and
//! `theta` falls linearly.

use crate::potential::BumpPotential;
use crate::{Error, Result};

/// Spectral parameter outside the central gap: `|lambda| > 1` together with
/// the quasi-momentum `kappa = sign(lambda) sqrt(lambda^2 - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParam {
    lambda: f64,
    kappa: f64,
}

/// `kappa = sign(lambda) sqrt(lambda^2 - 1)`.
pub fn kappa_of_lambda(lambda: f64) -> Result<f64> {
    if !(lambda.abs() > 1.0) || !lambda.is_finite() {
        return Err(Error::GapParameter { lambda });
    }
    Ok(lambda.signum() * (lambda * lambda - 1.0).sqrt())
}

/// `lambda = sign(kappa) sqrt(kappa^2 + 1)`.
pub fn lambda_of_kappa(kappa: f64) -> Result<f64> {
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::ZeroKappa);
    }
    Ok(kappa.signum() * (kappa * kappa + 1.0).sqrt())
}

impl SpectralParam {
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        let kappa = kappa_of_lambda(lambda)?;
        Ok(SpectralParam { lambda, kappa })
    }

    pub fn from_kappa(kappa: f64) -> Result<Self> {
        let lambda = lambda_of_kappa(kappa)?;
        Ok(SpectralParam { lambda, kappa })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Ellipse semi-axis ratio `sqrt((lambda-1)/(lambda+1))`; this multiplies
    /// `sin theta` in the second component.
    pub fn ellipse_ratio(&self) -> f64 {
        ((self.lambda - 1.0) / (self.lambda + 1.0)).sqrt()
    }

    /// Reciprocal ratio `sqrt((lambda+1)/(lambda-1))`.
    pub fn inverse_ratio(&self) -> f64 {
        ((self.lambda + 1.0) / (self.lambda - 1.0)).sqrt()
    }
}

/// Pruefer variables at a radius `r`, with the angle kept unwrapped so the
/// total winding stays available for eigenvalue counting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrueferState {
    pub r: f64,
    pub radius: f64,
    pub theta: f64,
    pub param: SpectralParam,
}

/// `(R, theta)` of a solution vector; the zero vector has no representation.
pub fn to_pruefer(psi: [f64; 2], param: SpectralParam) -> Result<(f64, f64)> {
    if psi[0] == 0.0 && psi[1] == 0.0 {
        return Err(Error::DegenerateSolution);
    }
    let inv = param.inverse_ratio();
    let radius = (psi[0] * psi[0] + inv * inv * psi[1] * psi[1]).sqrt();
    let theta = (inv * psi[1]).atan2(psi[0]);
    Ok((radius, theta))
}

/// Solution vector from Pruefer variables.
pub fn from_pruefer(radius: f64, theta: f64, param: SpectralParam) -> [f64; 2] {
    [
        radius * theta.cos(),
        radius * param.ellipse_ratio() * theta.sin(),
    ]
}

/// Initial state at `r = 0` for the boundary condition with angle
/// `eta in [0, pi)`.  The angle branch is fixed in `(-pi/2, pi/2]`:
/// `theta(0) = arctan(sqrt((lambda+1)/(lambda-1)) tan eta)`.
pub fn boundary_state(eta: f64, param: SpectralParam) -> Result<PrueferState> {
    if !(0.0..std::f64::consts::PI).contains(&eta) {
        return Err(Error::domain(format!("boundary angle {eta} outside [0, pi)")));
    }
    let inv = param.inverse_ratio();
    let (radius, theta) = if eta == std::f64::consts::FRAC_PI_2 {
        (inv, std::f64::consts::FRAC_PI_2)
    } else {
        let c = eta.cos();
        let s = eta.sin();
        (
            (c * c + inv * inv * s * s).sqrt(),
            (inv * eta.tan()).atan(),
        )
    };
    Ok(PrueferState {
        r: 0.0,
        radius,
        theta,
        param,
    })
}

/// Extra first-order terms entering the radius and angle laws in the
/// angular-momentum channel: a position-dependent mass defect `m(r) - 1` and
/// a drift `l(r)`, both decaying like `1/r^2`.
pub trait RadialPerturbation: Sync {
    /// `m(r) - 1`.
    fn mass_defect(&self, r: f64) -> f64;
    /// `l(r)`.
    fn drift(&self, r: f64) -> f64;
}

/// Step-size policy for Pruefer propagation.
#[derive(Debug, Clone, Copy)]
pub struct PropagationSettings {
    /// Steps per unit length on bump supports are
    /// `bump_resolution * (|kappa| + (1+|lambda|) q_max / |kappa|)`.
    pub bump_resolution: f64,
    /// Base step on perturbed potential-free stretches; the actual step is
    /// graded as `gap_step * max(1, r)^(1/4)` following the `1/r^2` decay of
    /// the perturbation.
    pub gap_step: f64,
    /// Accumulate `int |Psi|^2 dr` alongside the propagation.
    pub track_mass: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            bump_resolution: 32.0,
            gap_step: 5e-3,
            track_mass: false,
        }
    }
}

impl PropagationSettings {
    pub fn with_mass() -> Self {
        PropagationSettings {
            track_mass: true,
            ..Default::default()
        }
    }

    /// Halves both step controls; used for refinement checks.
    pub fn refined(&self) -> Self {
        PropagationSettings {
            bump_resolution: self.bump_resolution * 2.0,
            gap_step: self.gap_step * 0.5,
            track_mass: self.track_mass,
        }
    }
}

/// `(theta, R)` recorded at the end of a bump.
#[derive(Debug, Clone, Copy)]
pub struct BumpEndRecord {
    pub index: usize,
    pub r: f64,
    pub theta: f64,
    pub radius: f64,
}

/// Result of a propagation run.
#[derive(Debug, Clone)]
pub struct PrueferTrace {
    pub bump_ends: Vec<BumpEndRecord>,
    pub end: PrueferState,
    /// `int_{r_start}^{r_end} |Psi|^2 dr` when mass tracking is on, else 0.
    pub mass: f64,
}

/// Propagates `(R, theta)` from `r_start` to `r_end` through the potential,
/// integrating on bump supports (and, with a perturbation, on gaps) and
/// using the exact linear law on unperturbed potential-free stretches.
///
/// The angle is integrated in the comoving frame `phi = theta + kappa r`, so
/// only the oscillation-coupling terms are stepped numerically and the large
/// linear drift stays exact.
pub fn propagate_pruefer(
    q: &BumpPotential,
    param: SpectralParam,
    perturbation: Option<&dyn RadialPerturbation>,
    r_start: f64,
    r_end: f64,
    initial_theta: f64,
    initial_radius: f64,
    settings: &PropagationSettings,
) -> Result<PrueferTrace> {
    if r_end < r_start {
        return Err(Error::domain(format!(
            "propagation interval reversed: [{r_start}, {r_end}]"
        )));
    }
    if !(r_start >= 0.0) {
        return Err(Error::domain(format!("r_start = {r_start} < 0")));
    }
    if perturbation.is_some() && r_start < 1.0 {
        return Err(Error::domain(
            "perturbed propagation requires r_start >= 1 (decay bounds hold there)",
        ));
    }
    if !(initial_radius > 0.0) {
        return Err(Error::DegenerateSolution);
    }

    let mut walker = Walker {
        q,
        param,
        perturbation,
        settings,
        pos: r_start,
        theta: initial_theta,
        log_radius: initial_radius.ln(),
        mass: 0.0,
    };

    let mut bump_ends = Vec::new();
    for j in 0..q.bump_count() {
        let (a, b) = (q.start(j), q.end(j));
        if b <= r_start || a >= r_end {
            continue;
        }
        walker.advance_gap(a.min(r_end))?;
        walker.advance_bump(j, b.min(r_end))?;
        if b <= r_end {
            bump_ends.push(BumpEndRecord {
                index: j,
                r: walker.pos,
                theta: walker.theta,
                radius: walker.log_radius.exp(),
            });
        }
    }
    walker.advance_gap(r_end)?;

    Ok(PrueferTrace {
        bump_ends,
        end: PrueferState {
            r: walker.pos,
            radius: walker.log_radius.exp(),
            theta: walker.theta,
            param,
        },
        mass: walker.mass,
    })
}

struct Walker<'a> {
    q: &'a BumpPotential,
    param: SpectralParam,
    perturbation: Option<&'a dyn RadialPerturbation>,
    settings: &'a PropagationSettings,
    pos: f64,
    theta: f64,
    log_radius: f64,
    mass: f64,
}

impl Walker<'_> {
    /// Advances over a potential-free stretch up to `to`.
    fn advance_gap(&mut self, to: f64) -> Result<()> {
        if to <= self.pos {
            return Ok(());
        }
        match self.perturbation {
            None => {
                let kappa = self.param.kappa();
                if self.settings.track_mass {
                    // Closed form: |Psi|^2 = R^2 [(1+rho^2)/2 + (1-rho^2)/2 cos 2theta]
                    // and theta is linear, so the oscillatory part integrates
                    // to a sine difference.
                    let rho2 = (self.param.lambda() - 1.0) / (self.param.lambda() + 1.0);
                    let r2 = (2.0 * self.log_radius).exp();
                    let len = to - self.pos;
                    let theta_end = self.theta - kappa * len;
                    let osc =
                        ((2.0 * self.theta).sin() - (2.0 * theta_end).sin()) / (2.0 * kappa);
                    self.mass +=
                        r2 * (0.5 * (1.0 + rho2) * len + 0.5 * (1.0 - rho2) * osc);
                }
                self.theta -= kappa * (to - self.pos);
                self.pos = to;
                Ok(())
            }
            Some(_) => self.integrate_segment(to, true),
        }
    }

    /// Advances across (part of) bump `j` up to `to`.
    fn advance_bump(&mut self, _j: usize, to: f64) -> Result<()> {
        if to <= self.pos {
            return Ok(());
        }
        self.integrate_segment(to, false)
    }

    /// RK4 in the comoving frame on `[self.pos, to]`.
    fn integrate_segment(&mut self, to: f64, graded: bool) -> Result<()> {
        let kappa = self.param.kappa();
        let lambda = self.param.lambda();
        let rho2 = (lambda - 1.0) / (lambda + 1.0);
        let seg_start = self.pos;
        let track_mass = self.settings.track_mass;

        // phi(r) = theta(r) + kappa (r - seg_start)
        let rhs = |r: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
            let theta = y[0] - kappa * (r - seg_start);
            let (s2, c2) = (2.0 * theta).sin_cos();
            let qv = self.q.value(r);
            let mut dphi = qv / kappa * (lambda + c2);
            let mut dlog = qv / kappa * s2;
            if let Some(p) = self.perturbation {
                let md = p.mass_defect(r);
                let l = p.drift(r);
                dphi += (lambda + c2) / kappa * l + (1.0 + lambda * c2) / kappa * md;
                dlog += s2 * (l / kappa + lambda / kappa * md);
            }
            if !dphi.is_finite() || !dlog.is_finite() {
                return Err(Error::integration(format!("non-finite derivative at r = {r}")));
            }
            let dmass = if track_mass {
                let c = theta.cos();
                let s = theta.sin();
                (2.0 * y[1]).exp() * (c * c + rho2 * s * s)
            } else {
                0.0
            };
            Ok([dphi, dlog, dmass])
        };

        let base_step = if graded {
            self.settings.gap_step / kappa.abs().max(1.0)
        } else {
            // Resolve both the rotation and the coupling amplitude.
            let mut qmax: f64 = 0.0;
            for i in 0..=16 {
                let r = seg_start + (to - seg_start) * i as f64 / 16.0;
                qmax = qmax.max(self.q.value(r).abs());
            }
            let scale = kappa.abs() + (1.0 + lambda.abs()) * qmax / kappa.abs();
            1.0 / (self.settings.bump_resolution * scale.max(1.0))
        };

        let mut y = [self.theta, self.log_radius, self.mass];
        let mut r = seg_start;
        while r < to {
            let h_here = if graded {
                base_step * r.max(1.0).powf(0.25)
            } else {
                base_step
            };
            let h = h_here.min(to - r);
            let k1 = rhs(r, &y)?;
            let k2 = rhs(r + 0.5 * h, &step3(&y, &k1, 0.5 * h))?;
            let k3 = rhs(r + 0.5 * h, &step3(&y, &k2, 0.5 * h))?;
            let k4 = rhs(r + h, &step3(&y, &k3, h))?;
            for c in 0..3 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            r += h;
        }
        self.theta = y[0] - kappa * (to - seg_start);
        self.log_radius = y[1];
        self.mass = y[2];
        self.pos = to;
        Ok(())
    }
}

fn step3(y: &[f64; 3], k: &[f64; 3], s: f64) -> [f64; 3] {
    [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{build_bump_potential, BumpProfile};

    #[test]
    fn kappa_lambda_maps_are_inverse() {
        assert!((kappa_of_lambda(2.0).unwrap() - 3.0f64.sqrt()).abs() < 1e-15);
        assert!((lambda_of_kappa(-(3.0f64.sqrt())).unwrap() + 2.0).abs() < 1e-15);
        assert!(kappa_of_lambda(0.5).is_err());
        assert!(lambda_of_kappa(0.0).is_err());

        let mut x = 0.472_818_4_f64;
        for _ in 0..1000 {
            x = (x * 4099.0).fract();
            let lambda = (1.001 + 48.999 * x) * if x > 0.5 { -1.0 } else { 1.0 };
            let round = lambda_of_kappa(kappa_of_lambda(lambda).unwrap()).unwrap();
            assert!(
                (round - lambda).abs() <= 1e-14 * lambda.abs(),
                "round trip {round} vs {lambda}"
            );
        }
    }

    #[test]
    fn pruefer_coordinates_of_axis_vectors() {
        let param = SpectralParam::from_lambda(2.0).unwrap();
        let (r, t) = to_pruefer([1.0, 0.0], param).unwrap();
        assert_eq!((r, t), (1.0, 0.0));

        let (r, t) = to_pruefer([0.0, (1.0f64 / 3.0).sqrt()], param).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-15);

        assert!(to_pruefer([0.0, 0.0], param).is_err());
    }

    #[test]
    fn boundary_angle_maps_through_the_ellipse() {
        let param = SpectralParam::from_lambda(2.0).unwrap();
        let state = boundary_state(std::f64::consts::FRAC_PI_4, param).unwrap();
        assert!((state.theta - std::f64::consts::FRAC_PI_3).abs() < 1e-14);
        let zero = boundary_state(0.0, param).unwrap();
        assert_eq!((zero.radius, zero.theta), (1.0, 0.0));
    }

    #[test]
    fn from_to_pruefer_round_trip() {
        let param = SpectralParam::from_lambda(-1.8).unwrap();
        for i in 0..50 {
            let theta = -7.0 + 0.3 * i as f64;
            let radius = 0.1 + 0.2 * i as f64;
            let psi = from_pruefer(radius, theta, param);
            let (r2, t2) = to_pruefer(psi, param).unwrap();
            assert!((r2 - radius).abs() < 1e-12 * radius.max(1.0));
            let dt = (t2 - theta) / std::f64::consts::PI;
            let wrapped = dt - (dt / 2.0).round() * 2.0;
            assert!(wrapped.abs() < 1e-10, "angle mismatch {dt} pi");
        }
    }

    #[test]
    fn free_propagation_is_linear_in_theta() {
        let q = BumpPotential::free(0.0).unwrap();
        let param = SpectralParam::from_lambda(2.0).unwrap();
        let trace = propagate_pruefer(
            &q,
            param,
            None,
            0.0,
            5.0,
            0.0,
            1.0,
            &PropagationSettings::default(),
        )
        .unwrap();
        assert!((trace.end.theta + 5.0 * 3.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(trace.end.radius, 1.0);
        assert!(trace.bump_ends.is_empty());
    }

    #[test]
    fn reversed_interval_is_rejected() {
        let q = BumpPotential::free(0.0).unwrap();
        let param = SpectralParam::from_lambda(2.0).unwrap();
        assert!(propagate_pruefer(
            &q,
            param,
            None,
            3.0,
            2.0,
            0.0,
            1.0,
            &PropagationSettings::default()
        )
        .is_err());
    }

    #[test]
    fn mass_accumulation_matches_quadrature_on_free_run() {
        let q = BumpPotential::free(0.0).unwrap();
        let param = SpectralParam::from_lambda(2.0).unwrap();
        let trace = propagate_pruefer(
            &q,
            param,
            None,
            0.0,
            7.0,
            0.0,
            1.0,
            &PropagationSettings::with_mass(),
        )
        .unwrap();
        let kappa = param.kappa();
        let rho2 = 1.0 / 3.0;
        let oracle = crate::quad::adaptive_simpson(
            |r| {
                let t = -kappa * r;
                t.cos().powi(2) + rho2 * t.sin().powi(2)
            },
            0.0,
            7.0,
            1e-12,
        );
        assert!((trace.mass - oracle).abs() < 1e-10);
    }

    #[test]
    fn bump_crossing_matches_transfer_matrix_route() {
        // theta through a bump, mod 2 pi, must agree with the angle of
        // M Psi(a) computed from the closed-form transfer matrix.
        let q = build_bump_potential(
            vec![(1.0, BumpProfile::rectangular(1.0).unwrap())],
            vec![2.0],
            0.0,
        )
        .unwrap();
        let param = SpectralParam::from_lambda(2.0).unwrap();
        let trace = propagate_pruefer(
            &q,
            param,
            None,
            0.0,
            3.0,
            0.0,
            1.0,
            &PropagationSettings::default(),
        )
        .unwrap();
        assert_eq!(trace.bump_ends.len(), 1);

        let m = crate::odecore::closed_form_rectangular(1.0, 1.0, 2.0).unwrap();
        let theta_a = -2.0 * param.kappa();
        let psi_a = from_pruefer(1.0, theta_a, param);
        let psi_b = crate::odecore::apply_transfer(&m, psi_a);
        let (r_b, t_b) = to_pruefer(psi_b, param).unwrap();

        let rec = trace.bump_ends[0];
        assert!((rec.radius - r_b).abs() < 1e-8);
        let diff = (rec.theta - t_b) / (2.0 * std::f64::consts::PI);
        let wrapped = diff - diff.round();
        assert!(wrapped.abs() * 2.0 * std::f64::consts::PI < 1e-7);
    }
}
