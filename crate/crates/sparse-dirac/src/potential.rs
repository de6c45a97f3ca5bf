//! Bump potentials: unit-mass profiles, heights, gap distances.
//!
//! A potential is zero except on finitely many supports `[a_j, b_j]` where it
//! equals `H_j * W_j(r - a_j)` with `int_0^{alpha_j} W_j = 1`.  Endpoints obey
//! the recursion `a_j = b_{j-1} + d_j`, `b_j = a_j + alpha_j`, `b_0 = 0`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape of a bump on `[0, width]`, normalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileShape {
    /// Constant `1/width`.
    Rectangular,
    /// `(1 - cos(2 pi t / width)) / width`; vanishes at both endpoints.
    RaisedCosine,
    /// Symmetric ramp `(2/width) (1 - |2t/width - 1|)`; vanishes at both endpoints.
    Triangular,
    /// Piecewise-linear interpolation of equally spaced samples, rescaled to
    /// unit mass.  `scale` is the reciprocal of the raw trapezoid integral.
    Sampled { samples: Vec<f64>, scale: f64 },
}

/// A unit-mass bump profile `W` on `[0, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    width: f64,
    shape: ProfileShape,
}

impl BumpProfile {
    /// Rectangular profile of the given width.
    pub fn rectangular(width: f64) -> Result<Self> {
        Self::named(width, ProfileShape::Rectangular)
    }

    /// Raised-cosine profile of the given width.
    pub fn raised_cosine(width: f64) -> Result<Self> {
        Self::named(width, ProfileShape::RaisedCosine)
    }

    /// Triangular profile of the given width.
    pub fn triangular(width: f64) -> Result<Self> {
        Self::named(width, ProfileShape::Triangular)
    }

    fn named(width: f64, shape: ProfileShape) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::geometry(format!(
                "profile width must be positive and finite, got {width}"
            )));
        }
        Ok(BumpProfile { width, shape })
    }

    /// Builds a unit-mass profile from nonnegative samples on an equally
    /// spaced grid over `[0, width]`, linear interpolation in between.
    pub fn from_samples(samples: &[f64], width: f64) -> Result<Self> {
        normalize_profile(samples, width)
    }

    /// Profile width `alpha`.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn shape(&self) -> &ProfileShape {
        &self.shape
    }

    /// Value of the normalized shape at local coordinate `t in [0, width]`;
    /// zero outside.
    pub fn value(&self, t: f64) -> f64 {
        if !(0.0..=self.width).contains(&t) {
            return 0.0;
        }
        let a = self.width;
        match &self.shape {
            ProfileShape::Rectangular => 1.0 / a,
            ProfileShape::RaisedCosine => {
                (1.0 - (2.0 * std::f64::consts::PI * t / a).cos()) / a
            }
            ProfileShape::Triangular => (2.0 / a) * (1.0 - (2.0 * t / a - 1.0).abs()),
            ProfileShape::Sampled { samples, scale } => {
                let n = samples.len() - 1;
                let x = t / a * n as f64;
                let i = (x.floor() as usize).min(n - 1);
                let frac = x - i as f64;
                scale * (samples[i] * (1.0 - frac) + samples[i + 1] * frac)
            }
        }
    }

    /// Exact integral of the profile over `[0, width]` (trapezoid over the
    /// sample grid for sampled shapes, which is exact for the interpolant).
    pub fn mass(&self) -> f64 {
        match &self.shape {
            ProfileShape::Rectangular | ProfileShape::RaisedCosine | ProfileShape::Triangular => {
                1.0
            }
            ProfileShape::Sampled { samples, scale } => {
                let h = self.width / (samples.len() - 1) as f64;
                let mut acc = 0.5 * (samples[0] + samples[samples.len() - 1]);
                for s in &samples[1..samples.len() - 1] {
                    acc += s;
                }
                acc * h * scale
            }
        }
    }
}

/// Rescales sampled shape values so the piecewise-linear interpolant on
/// `[0, width]` has unit mass.
pub fn normalize_profile(samples: &[f64], width: f64) -> Result<BumpProfile> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::geometry(format!(
            "profile width must be positive and finite, got {width}"
        )));
    }
    if samples.len() < 2 {
        return Err(Error::shape(format!(
            "sampled profile needs at least 2 nodes, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::shape("sampled profile values must be nonnegative"));
    }
    let h = width / (samples.len() - 1) as f64;
    let mut raw = 0.5 * (samples[0] + samples[samples.len() - 1]);
    for s in &samples[1..samples.len() - 1] {
        raw += s;
    }
    raw *= h;
    if raw <= 0.0 {
        return Err(Error::shape("sampled profile is identically zero"));
    }
    Ok(BumpProfile {
        width,
        shape: ProfileShape::Sampled {
            samples: samples.to_vec(),
            scale: 1.0 / raw,
        },
    })
}

/// One bump: a height and a unit-mass profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub height: f64,
    pub profile: BumpProfile,
}

/// A potential with finitely many bumps.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpPotential {
    bumps: Vec<Bump>,
    distances: Vec<f64>,
    starts: Vec<f64>,
    ends: Vec<f64>,
    boundary_angle: f64,
}

impl BumpPotential {
    /// The zero potential (no bumps) with boundary angle `eta`.
    pub fn free(eta: f64) -> Result<Self> {
        build_bump_potential(Vec::new(), Vec::new(), eta)
    }

    pub fn bump_count(&self) -> usize {
        self.bumps.len()
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Bump start `a_j` (0-based index).
    pub fn start(&self, j: usize) -> f64 {
        self.starts[j]
    }

    /// Bump end `b_j` (0-based index).
    pub fn end(&self, j: usize) -> f64 {
        self.ends[j]
    }

    /// End of the last bump, or 0 for the free potential.
    pub fn support_end(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    /// Boundary angle `eta` of the condition
    /// `Psi_1(0) sin eta + Psi_2(0) cos eta = 0`.
    pub fn boundary_angle(&self) -> f64 {
        self.boundary_angle
    }

    /// Potential value at `r >= 0`; exact zero on gaps.  Supports are closed
    /// `[a_j, b_j]` so integrators sample consistent endpoint values.
    pub fn value(&self, r: f64) -> f64 {
        // Bump supports are strictly increasing; find the last start <= r.
        let idx = self.starts.partition_point(|&a| a <= r);
        if idx == 0 {
            return 0.0;
        }
        let j = idx - 1;
        if r <= self.ends[j] {
            self.bumps[j].height * self.bumps[j].profile.value(r - self.starts[j])
        } else {
            0.0
        }
    }

    /// Checked evaluation; `r < 0` is a domain error.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("potential argument r = {r} < 0")));
        }
        Ok(self.value(r))
    }

    /// Returns a copy extended by one bump at distance `d` past the last end.
    pub fn with_extra_bump(&self, height: f64, profile: BumpProfile, d: f64) -> Result<Self> {
        let mut bumps = self.bumps.clone();
        bumps.push(Bump { height, profile });
        let mut distances = self.distances.clone();
        distances.push(d);
        build_from_bumps(bumps, distances, self.boundary_angle)
    }
}

/// Builds an n-bump potential from per-bump `(height, profile)` pairs and gap
/// distances, with boundary angle `eta`.
pub fn build_bump_potential(
    bumps: Vec<(f64, BumpProfile)>,
    distances: Vec<f64>,
    eta: f64,
) -> Result<BumpPotential> {
    let bumps = bumps
        .into_iter()
        .map(|(height, profile)| Bump { height, profile })
        .collect();
    build_from_bumps(bumps, distances, eta)
}

fn build_from_bumps(
    bumps: Vec<Bump>,
    distances: Vec<f64>,
    eta: f64,
) -> Result<BumpPotential> {
    if bumps.len() != distances.len() {
        return Err(Error::geometry(format!(
            "{} bumps but {} distances",
            bumps.len(),
            distances.len()
        )));
    }
    if !(0.0..std::f64::consts::PI).contains(&eta) {
        return Err(Error::geometry(format!(
            "boundary angle eta = {eta} outside [0, pi)"
        )));
    }
    for b in &bumps {
        if !(b.height >= 0.0) || !b.height.is_finite() {
            return Err(Error::geometry(format!(
                "bump height must be finite and >= 0, got {}",
                b.height
            )));
        }
    }
    let mut starts = Vec::with_capacity(bumps.len());
    let mut ends = Vec::with_capacity(bumps.len());
    let mut prev_end = 0.0;
    for (bump, &d) in bumps.iter().zip(&distances) {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::geometry(format!(
                "bump distance must be positive and finite, got {d}"
            )));
        }
        let a = prev_end + d;
        let b = a + bump.profile.width();
        starts.push(a);
        ends.push(b);
        prev_end = b;
    }
    Ok(BumpPotential {
        bumps,
        distances,
        starts,
        ends,
        boundary_angle: eta,
    })
}

// ---------------------------------------------------------------------------
// JSON descriptor
// ---------------------------------------------------------------------------

/// JSON form of a bump profile: `"rect" | "cos" | "tri"` or
/// `{"samples": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProfileDescriptor {
    Named(String),
    Sampled { samples: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BumpDescriptor {
    pub height: f64,
    pub width: f64,
    pub profile: ProfileDescriptor,
}

/// JSON descriptor of a bump potential.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PotentialDescriptor {
    #[serde(default)]
    pub eta: f64,
    pub bumps: Vec<BumpDescriptor>,
    pub distances: Vec<f64>,
}

impl PotentialDescriptor {
    pub fn build(&self) -> Result<BumpPotential> {
        let mut bumps = Vec::with_capacity(self.bumps.len());
        for b in &self.bumps {
            let profile = match &b.profile {
                ProfileDescriptor::Named(name) => match name.as_str() {
                    "rect" => BumpProfile::rectangular(b.width)?,
                    "cos" => BumpProfile::raised_cosine(b.width)?,
                    "tri" => BumpProfile::triangular(b.width)?,
                    other => {
                        return Err(Error::shape(format!(
                            "unknown profile `{other}` (expected rect, cos, tri, or samples)"
                        )))
                    }
                },
                ProfileDescriptor::Sampled { samples } => {
                    BumpProfile::from_samples(samples, b.width)?
                }
            };
            bumps.push((b.height, profile));
        }
        build_bump_potential(bumps, self.distances.clone(), self.eta)
    }

    pub fn from_potential(q: &BumpPotential) -> Self {
        let bumps = q
            .bumps()
            .iter()
            .map(|b| BumpDescriptor {
                height: b.height,
                width: b.profile.width(),
                profile: match b.profile.shape() {
                    ProfileShape::Rectangular => ProfileDescriptor::Named("rect".into()),
                    ProfileShape::RaisedCosine => ProfileDescriptor::Named("cos".into()),
                    ProfileShape::Triangular => ProfileDescriptor::Named("tri".into()),
                    ProfileShape::Sampled { samples, .. } => ProfileDescriptor::Sampled {
                        samples: samples.clone(),
                    },
                },
            })
            .collect();
        PotentialDescriptor {
            eta: q.boundary_angle(),
            bumps,
            distances: q.distances().to_vec(),
        }
    }
}

// ---------------------------------------------------------------------------

/// The worked example: unit-width rectangular bumps with `H_j = 1/sqrt(j)`.
pub fn decreasing_example(n: usize, distances: Vec<f64>, eta: f64) -> Result<BumpPotential> {
    let bumps = (1..=n)
        .map(|j| {
            Ok((
                1.0 / (j as f64).sqrt(),
                BumpProfile::rectangular(1.0)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    build_bump_potential(bumps, distances, eta)
}

#[allow(dead_code)]
pub(crate) fn profile_simpson_mass(profile: &BumpProfile) -> f64 {
    crate::quad::composite_simpson(|t| profile.value(t), 0.0, profile.width(), 4096)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::trapezoid;

    #[test]
    fn endpoints_follow_the_recursion() {
        let q = build_bump_potential(
            vec![
                (1.0, BumpProfile::rectangular(1.0).unwrap()),
                (1.0, BumpProfile::rectangular(1.0).unwrap()),
            ],
            vec![2.0, 3.0],
            0.0,
        )
        .unwrap();
        assert_eq!(q.start(0), 2.0);
        assert_eq!(q.end(0), 3.0);
        assert_eq!(q.start(1), 6.0);
        assert_eq!(q.end(1), 7.0);
    }

    #[test]
    fn decreasing_heights_accepted_for_any_count() {
        let q = decreasing_example(40, (1..=40).map(|j| 1.0 + j as f64).collect(), 0.0).unwrap();
        assert_eq!(q.bump_count(), 40);
        assert!((q.bumps()[3].height - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_bump_list_is_the_free_potential() {
        let q = BumpPotential::free(0.0).unwrap();
        assert_eq!(q.evaluate(17.3).unwrap(), 0.0);
        assert_eq!(q.support_end(), 0.0);
    }

    #[test]
    fn evaluate_is_piecewise_and_zero_on_gaps() {
        let q = build_bump_potential(
            vec![(1.0, BumpProfile::rectangular(1.0).unwrap())],
            vec![2.0],
            0.0,
        )
        .unwrap();
        assert_eq!(q.evaluate(2.5).unwrap(), 1.0);
        assert_eq!(q.evaluate(1.0).unwrap(), 0.0);
        assert_eq!(q.evaluate(3.5).unwrap(), 0.0);
        assert!(q.evaluate(-0.1).is_err());
    }

    #[test]
    fn raised_cosine_midpoint_matches_quadrature_normalized_peak() {
        // Normalize the raw shape 1 - cos(2 pi t / a) by quadrature and read
        // the midpoint; the analytic profile must agree.
        let a = 1.7;
        let raw = |t: f64| 1.0 - (2.0 * std::f64::consts::PI * t / a).cos();
        let mass = crate::quad::adaptive_simpson(raw, 0.0, a, 1e-12);
        let peak = raw(a / 2.0) / mass;
        let p = BumpProfile::raised_cosine(a).unwrap();
        assert!((p.value(a / 2.0) - peak).abs() < 1e-10);
        let h = 0.8;
        let q = build_bump_potential(vec![(h, p)], vec![1.0], 0.0).unwrap();
        assert!((q.value(1.0 + a / 2.0) - h * peak).abs() < 1e-10);
    }

    #[test]
    fn normalize_profile_rescales_constant_and_keeps_rect_unchanged() {
        let p = normalize_profile(&[1.0, 1.0, 1.0], 2.0).unwrap();
        assert!((p.value(0.7) - 0.5).abs() < 1e-12);
        assert!((p.mass() - 1.0).abs() < 1e-12);

        let rect = BumpProfile::rectangular(1.0).unwrap();
        assert_eq!(rect.value(0.3), 1.0);
        assert_eq!(rect.mass(), 1.0);
    }

    #[test]
    fn triangular_ramp_samples_normalize_against_trapezoid_oracle() {
        let samples: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let p = normalize_profile(&samples, 1.0).unwrap();
        let oracle = trapezoid(|t| p.value(t), 0.0, 1.0, 1 << 14);
        assert!((oracle - 1.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_profiles_are_rejected() {
        assert!(normalize_profile(&[0.0, 0.0, 0.0], 1.0).is_err());
        assert!(normalize_profile(&[1.0], 1.0).is_err());
        assert!(normalize_profile(&[1.0, -0.5, 1.0], 1.0).is_err());
        assert!(build_bump_potential(
            vec![(1.0, BumpProfile::rectangular(1.0).unwrap())],
            vec![0.0],
            0.0
        )
        .is_err());
        assert!(BumpProfile::rectangular(-1.0).is_err());
    }

    #[test]
    fn no_endpoint_drift_over_many_bumps() {
        // Dyadic widths and distances keep every partial sum exactly
        // representable, so the gap identity a_j - b_{j-1} = d_j is exact.
        let n = 10_000;
        let profile = BumpProfile::rectangular(0.5).unwrap();
        let dists: Vec<f64> = (0..n).map(|j| 1.0 + 0.125 * (j % 7) as f64).collect();
        let bumps: Vec<(f64, BumpProfile)> = (0..n).map(|_| (1.0, profile.clone())).collect();
        let q = build_bump_potential(bumps, dists.clone(), 0.0).unwrap();
        let mut prev_end = 0.0;
        for j in 0..n {
            let drift = ((q.start(j) - prev_end) - dists[j]).abs();
            assert!(drift <= 1e-12, "drift {drift} at bump {j}");
            prev_end = q.end(j);
        }
    }

    #[test]
    fn total_mass_is_sum_of_heights() {
        let shapes: Vec<BumpProfile> = vec![
            BumpProfile::rectangular(0.8).unwrap(),
            BumpProfile::raised_cosine(1.3).unwrap(),
            BumpProfile::triangular(0.6).unwrap(),
        ];
        let mut bumps = Vec::new();
        let mut expected = 0.0;
        for j in 0..30 {
            let h = 0.2 + 0.1 * (j % 5) as f64;
            expected += h;
            bumps.push((h, shapes[j % 3].clone()));
        }
        let dists = vec![1.5; 30];
        let q = build_bump_potential(bumps, dists, 0.0).unwrap();
        let mut integral = 0.0;
        for j in 0..q.bump_count() {
            integral += crate::quad::adaptive_simpson(
                |r| q.value(r),
                q.start(j),
                q.end(j),
                1e-11,
            );
        }
        assert!((integral - expected).abs() < 1e-8);
    }

    #[test]
    fn descriptor_round_trips_through_json() {
        let q = build_bump_potential(
            vec![
                (1.0, BumpProfile::rectangular(1.0).unwrap()),
                (0.5, BumpProfile::raised_cosine(2.0).unwrap()),
            ],
            vec![2.0, 4.0],
            0.25,
        )
        .unwrap();
        let desc = PotentialDescriptor::from_potential(&q);
        let text = serde_json::to_string(&desc).unwrap();
        let parsed: PotentialDescriptor = serde_json::from_str(&text).unwrap();
        let rebuilt = parsed.build().unwrap();
        assert_eq!(q, rebuilt);
    }
}
