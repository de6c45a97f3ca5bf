//! Transfer matrices for the 2x2 Dirac system on bump supports.
//!
//! The system has the off-diagonal form `Psi_1' = u(r) Psi_2`,
//! `Psi_2' = l(r) Psi_1`; its coefficient matrix is trace-free, so every
//! fundamental matrix has determinant 1.

use crate::pruefer::{PrueferState, SpectralParam};
use crate::{Error, Result};

/// Coefficients of the off-diagonal system.  `upper` multiplies `Psi_2` in
/// the `Psi_1'` equation, `lower` multiplies `Psi_1` in the `Psi_2'` one.
pub struct SystemCoefficients<U, L>
where
    U: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    pub upper: U,
    pub lower: L,
}

/// Coefficients `-q + 1 + lambda` / `q + 1 - lambda` for a given potential.
pub fn dirac_coefficients(
    q: &crate::potential::BumpPotential,
    lambda: f64,
) -> SystemCoefficients<impl Fn(f64) -> f64 + '_, impl Fn(f64) -> f64 + '_> {
    SystemCoefficients {
        upper: move |r| -q.value(r) + 1.0 + lambda,
        lower: move |r| q.value(r) + 1.0 - lambda,
    }
}

/// Fundamental-matrix value across an interval, with identity initial value
/// at the left endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
    pub interval: (f64, f64),
    pub lambda: f64,
}

impl TransferMatrix {
    pub fn identity(interval: (f64, f64), lambda: f64) -> Self {
        TransferMatrix {
            m11: 1.0,
            m12: 0.0,
            m21: 0.0,
            m22: 1.0,
            interval,
            lambda,
        }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Largest entrywise difference to another matrix.
    pub fn max_entry_diff(&self, other: &TransferMatrix) -> f64 {
        (self.m11 - other.m11)
            .abs()
            .max((self.m12 - other.m12).abs())
            .max((self.m21 - other.m21).abs())
            .max((self.m22 - other.m22).abs())
    }
}

/// Applies a transfer matrix to a solution vector.
pub fn apply_transfer(m: &TransferMatrix, psi: [f64; 2]) -> [f64; 2] {
    [
        m.m11 * psi[0] + m.m12 * psi[1],
        m.m21 * psi[0] + m.m22 * psi[1],
    ]
}

/// Step selection for the fixed-step RK4 integrator.
#[derive(Debug, Clone, Copy)]
pub enum StepControl {
    /// Double the step count until halving changes entries by less than `tol`.
    Auto { tol: f64 },
    /// Fixed user step size.
    Fixed { step: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Auto { tol: 1e-10 }
    }
}

/// Integrates the fundamental system across `interval` by classical RK4.
///
/// With `StepControl::Auto` the step count doubles until the Richardson
/// check (halving changes every entry by less than `tol`) passes; the finer
/// of the two results is returned.
pub fn integrate_fundamental<U, L>(
    coeffs: &SystemCoefficients<U, L>,
    interval: (f64, f64),
    lambda: f64,
    control: StepControl,
) -> Result<TransferMatrix>
where
    U: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    let (a, b) = interval;
    if !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("bad integration interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(TransferMatrix::identity(interval, lambda));
    }
    match control {
        StepControl::Fixed { step } => {
            let n = ((b - a) / step).ceil().max(1.0) as usize;
            rk4_fundamental(coeffs, a, b, n, lambda)
        }
        StepControl::Auto { tol } => {
            // Seed the step count from a sampled magnitude of the
            // coefficients so the first pass already resolves the dynamics.
            let mut scale: f64 = 1.0;
            for i in 0..=16 {
                let r = a + (b - a) * i as f64 / 16.0;
                scale = scale.max((coeffs.upper)(r).abs()).max((coeffs.lower)(r).abs());
            }
            let mut n = (((b - a) * scale * 8.0).ceil() as usize).clamp(16, 1 << 20);
            let mut coarse = rk4_fundamental(coeffs, a, b, n, lambda)?;
            loop {
                let fine = rk4_fundamental(coeffs, a, b, 2 * n, lambda)?;
                if fine.max_entry_diff(&coarse) < tol {
                    return Ok(fine);
                }
                n *= 2;
                if n > (1 << 24) {
                    return Err(Error::integration(format!(
                        "step refinement did not reach tol {tol} on [{a}, {b}]"
                    )));
                }
                coarse = fine;
            }
        }
    }
}

fn rk4_fundamental<U, L>(
    coeffs: &SystemCoefficients<U, L>,
    a: f64,
    b: f64,
    n: usize,
    lambda: f64,
) -> Result<TransferMatrix>
where
    U: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    let h = (b - a) / n as f64;
    // Both fundamental columns advance together: y = (c1_1, c1_2, c2_1, c2_2).
    let mut y = [1.0, 0.0, 0.0, 1.0];
    let rhs = |r: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let u = (coeffs.upper)(r);
        let l = (coeffs.lower)(r);
        if !u.is_finite() || !l.is_finite() {
            return Err(Error::integration(format!(
                "non-finite coefficient at r = {r}"
            )));
        }
        Ok([u * y[1], l * y[0], u * y[3], l * y[2]])
    };
    for i in 0..n {
        let r = a + i as f64 * h;
        let k1 = rhs(r, &y)?;
        let k2 = rhs(r + 0.5 * h, &add_scaled(&y, &k1, 0.5 * h))?;
        let k3 = rhs(r + 0.5 * h, &add_scaled(&y, &k2, 0.5 * h))?;
        let k4 = rhs(r + h, &add_scaled(&y, &k3, h))?;
        for c in 0..4 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    Ok(TransferMatrix {
        m11: y[0],
        m21: y[1],
        m12: y[2],
        m22: y[3],
        interval: (a, b),
        lambda,
    })
}

fn add_scaled(y: &[f64; 4], k: &[f64; 4], s: f64) -> [f64; 4] {
    [
        y[0] + s * k[0],
        y[1] + s * k[1],
        y[2] + s * k[2],
        y[3] + s * k[3],
    ]
}

/// Analytic transfer matrix of a constant bump of height `H` and width
/// `alpha` (potential value `H` on the support).
///
/// With `w = (lambda - H)^2 - 1` and `a = 1 + lambda - H` the entries are
/// even functions of `sqrt(w)`, so oscillatory (`w > 0`), hyperbolic
/// (`w < 0`) and degenerate (`w = 0`) regimes come from one analytic
/// expression; near `w = 0` a short Taylor series evaluates the removable
/// limit.
pub fn closed_form_rectangular(h: f64, alpha: f64, lambda: f64) -> Result<TransferMatrix> {
    let a = 1.0 + lambda - h;
    if a.abs() < 1e-12 {
        return Err(Error::SingularParameter);
    }
    let u = lambda - h;
    let w = u * u - 1.0;
    let (c, s) = cosw_sincw(w, alpha);
    Ok(TransferMatrix {
        m11: c,
        m12: a * s,
        m21: -w * s / a,
        m22: c,
        interval: (0.0, alpha),
        lambda,
    })
}

/// `(cos(sqrt(w) t), sin(sqrt(w) t)/sqrt(w))` continued analytically in `w`:
/// for `w < 0` these are `cosh`/`sinh` of `sqrt(-w) t`.
fn cosw_sincw(w: f64, t: f64) -> (f64, f64) {
    let z = w * t * t;
    if z.abs() < 1e-6 {
        // cos: 1 - z/2! + z^2/4! - z^3/6!;  sinc: t (1 - z/3! + z^2/5! - z^3/7!)
        let c = 1.0 - z / 2.0 + z * z / 24.0 - z * z * z / 720.0;
        let s = t * (1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0);
        (c, s)
    } else if w > 0.0 {
        let mu = w.sqrt();
        ((mu * t).cos(), (mu * t).sin() / mu)
    } else {
        let nu = (-w).sqrt();
        ((nu * t).cosh(), (nu * t).sinh() / nu)
    }
}

/// Exact propagation across a potential-free segment: the Pruefer radius is
/// constant and the angle decreases linearly, `theta -> theta - kappa dr`.
pub fn propagate_free(state: &PrueferState, dr: f64) -> Result<PrueferState> {
    if !(dr >= 0.0) {
        return Err(Error::domain(format!("free segment length {dr} < 0")));
    }
    Ok(PrueferState {
        r: state.r + dr,
        radius: state.radius,
        theta: state.theta - state.param.kappa() * dr,
        param: state.param,
    })
}

/// Free transfer matrix over a segment of length `t` (zero potential).
pub fn free_propagator(t: f64, param: SpectralParam) -> TransferMatrix {
    let lambda = param.lambda();
    let kappa = param.kappa();
    TransferMatrix {
        m11: (kappa * t).cos(),
        m12: (1.0 + lambda) / kappa * (kappa * t).sin(),
        m21: -kappa / (1.0 + lambda) * (kappa * t).sin(),
        m22: (kappa * t).cos(),
        interval: (0.0, t),
        lambda,
    }
}
