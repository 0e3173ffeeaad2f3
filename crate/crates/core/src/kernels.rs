//! Heat kernels on the half line and on the threshold interval with
//! reflecting ends, their tail masses, and the Fourier solution of the
//! Neumann problem from sampled initial data.
//!
//! With `L = hi - lo` and a unit source at `hi`:
//!
//! * half line: `(πτ)^{-1/2} exp(-(hi - x)^2 / (4τ))`, tail mass `erf((hi - x) / (2√τ))`;
//! * interval: `1/L + (2/L) Σ exp(-(nπ/L)^2 τ) cos(nπ(hi - x)/L)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDomain {
    pub lo: f64,
    pub hi: f64,
}

impl ThresholdDomain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 < lo && lo < hi && hi < 0.5) {
            return Err(Error::Domain(format!(
                "threshold interval must satisfy 0 < lo < hi < 1/2, got [{lo}, {hi}]"
            )));
        }
        Ok(ThresholdDomain { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    /// Decay rate `1/2 - hi` of the nutrient.
    pub fn mu(&self) -> f64 {
        0.5 - self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            abs_tol: 1e-14,
            max_terms: 100_000,
        }
    }
}

impl TruncationPolicy {
    pub fn new(abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || max_terms < 1 {
            return Err(Error::Domain(format!(
                "truncation policy needs abs_tol > 0 and max_terms >= 1, got {abs_tol}, {max_terms}"
            )));
        }
        Ok(TruncationPolicy { abs_tol, max_terms })
    }
}

/// Error function, absolute error below 1e-14.
///
/// Power series `e^{-y^2} Σ 2^n y^{2n+1} / (2n+1)!!` below 2, continued
/// fraction for the complement above.
pub fn erf(y: f64) -> f64 {
    if y < 0.0 {
        return -erf(-y);
    }
    if y.is_nan() {
        return f64::NAN;
    }
    if y < 2.0 {
        let y2 = y * y;
        let mut term = y;
        let mut sum = y;
        let mut n = 0.0;
        while term > 1e-17 * sum {
            n += 1.0;
            term *= 2.0 * y2 / (2.0 * n + 1.0);
            sum += term;
        }
        FRAC_2_SQRT_PI * (-y2).exp() * sum
    } else {
        1.0 - erfc_cf(y)
    }
}

/// Complementary error function for `y >= 2` by modified Lentz on
/// `erfc(y) = e^{-y^2}/√π · 1/(y + (1/2)/(y + 1/(y + (3/2)/(y + ...))))`.
fn erfc_cf(y: f64) -> f64 {
    if y > 27.0 {
        return 0.0;
    }
    let tiny = 1e-300;
    let mut f = y;
    let mut c = y;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = y + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = y + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-y * y).exp() / (SQRT_PI * f)
}

/// Kernel evaluator for one threshold interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernels {
    pub domain: ThresholdDomain,
    pub policy: TruncationPolicy,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("scaled time must be positive, got {tau}")));
    }
    Ok(())
}

impl Kernels {
    pub fn new(domain: ThresholdDomain, policy: TruncationPolicy) -> Self {
        Kernels { domain, policy }
    }

    /// Half-line kernel with a unit source at `hi`.
    pub fn half_line(&self, x: f64, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let z = self.domain.hi - x;
        Ok((-(z * z) / (4.0 * tau)).exp() / (std::f64::consts::PI * tau).sqrt())
    }

    /// Mass of the half-line kernel on `[x, hi]`.
    pub fn half_line_tail(&self, x: f64, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(erf((self.domain.hi - x) / (2.0 * tau.sqrt())))
    }

    /// Number of cosine modes so that the neglected tail of
    /// `Σ weight(n) e^{-a n^2}` is below `abs_tol`, where `weight` is
    /// non-increasing and bounded by `w1`.
    fn modes_needed(&self, a: f64, w1: f64) -> Result<usize> {
        let tol = self.policy.abs_tol;
        let mut n = 0usize;
        loop {
            let m = (n + 1) as f64;
            let head = w1 * (-a * m * m).exp();
            let ratio = (-a * (2.0 * m + 1.0)).exp();
            if head / (1.0 - ratio).max(1e-300) <= tol {
                return Ok(n);
            }
            n += 1;
            if n > self.policy.max_terms {
                // geometric estimate of the mode count that would suffice
                let needed = ((w1 / tol).ln().max(0.0) / a).sqrt().ceil() as usize + 1;
                return Err(Error::Truncation {
                    needed: needed.max(n),
                    max_terms: self.policy.max_terms,
                });
            }
        }
    }

    /// Interval kernel with reflecting ends and a unit source at `hi`.
    pub fn interval(&self, x: f64, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let l = self.domain.len();
        let a = (std::f64::consts::PI / l).powi(2) * tau;
        let n = self.modes_needed(a, 2.0 / l)?;
        let theta = std::f64::consts::PI * (self.domain.hi - x) / l;
        let mut acc = 0.0;
        for k in (1..=n).rev() {
            let kf = k as f64;
            acc += (-a * kf * kf).exp() * (kf * theta).cos();
        }
        Ok(1.0 / l + 2.0 / l * acc)
    }

    /// Mass of the interval kernel on `[x, hi]`.
    pub fn interval_tail(&self, x: f64, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let l = self.domain.len();
        let pi = std::f64::consts::PI;
        let a = (pi / l).powi(2) * tau;
        let n = self.modes_needed(a, 2.0 / pi)?;
        let theta = pi * (self.domain.hi - x) / l;
        let mut acc = 0.0;
        for k in (1..=n).rev() {
            let kf = k as f64;
            acc += (-a * kf * kf).exp() * (kf * theta).sin() / kf;
        }
        Ok((self.domain.hi - x) / l + 2.0 / pi * acc)
    }

    /// Interval kernel as a sum over mirror sources at `hi + 2kL`.
    /// Converges fast for small `τ`; agrees with [`Kernels::interval`].
    pub fn interval_by_images(&self, x: f64, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let l = self.domain.len();
        let z = self.domain.hi - x;
        let norm = 1.0 / (std::f64::consts::PI * tau).sqrt();
        let mut acc = (-(z * z) / (4.0 * tau)).exp();
        let mut k = 1.0;
        loop {
            let p = z + 2.0 * k * l;
            let m = z - 2.0 * k * l;
            let t = (-(p * p) / (4.0 * tau)).exp() + (-(m * m) / (4.0 * tau)).exp();
            acc += t;
            if norm * t < self.policy.abs_tol && 2.0 * k * l > z.abs() + 4.0 * tau.sqrt() {
                break;
            }
            k += 1.0;
        }
        Ok(norm * acc)
    }
}

/// Cosine expansion of a profile on the threshold interval, in the modes
/// `cos(nπ(hi - x)/L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierProfile {
    /// Mass over length.
    pub mean: f64,
    /// `A_n = ∫ u0 cos(nπ(hi - x)/L) dx` for `n = 1, 2, ...`.
    pub coeffs: Vec<f64>,
    pub domain: ThresholdDomain,
}

impl FourierProfile {
    /// Coefficients of a piecewise-constant profile given by cell values;
    /// each cell is integrated exactly. The number of modes is capped at half
    /// the cell count.
    pub fn from_cells(
        domain: ThresholdDomain,
        faces: &[f64],
        values: &[f64],
        max_modes: usize,
    ) -> Result<Self> {
        if faces.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::Domain("faces must have one more entry than values".into()));
        }
        let l = domain.len();
        let pi = std::f64::consts::PI;
        let modes = max_modes.min(values.len() / 2);
        let mass: f64 = values
            .iter()
            .zip(faces.windows(2))
            .map(|(u, f)| u * (f[1] - f[0]))
            .sum();
        let mut coeffs = vec![0.0; modes];
        for (n, c) in coeffs.iter_mut().enumerate() {
            let k = (n + 1) as f64 * pi / l;
            let mut acc = 0.0;
            for (u, f) in values.iter().zip(faces.windows(2)) {
                acc += u * ((k * (domain.hi - f[0])).sin() - (k * (domain.hi - f[1])).sin());
            }
            *c = acc / k;
        }
        Ok(FourierProfile {
            mean: mass / l,
            coeffs,
            domain,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mean * self.domain.len()
    }

    fn decay(&self, t: f64, d: f64, t0: f64) -> Result<f64> {
        if !(t > t0) {
            return Err(Error::Domain(format!("need t > t0, got t = {t}, t0 = {t0}")));
        }
        if !(d > 0.0) {
            return Err(Error::Domain(format!("diffusivity must be positive, got {d}")));
        }
        Ok(d * (t - t0))
    }

    /// Solution of the Neumann heat problem at `(x, t)` started from the
    /// profile at `t0`.
    pub fn evaluate(&self, x: f64, t: f64, d: f64, t0: f64) -> Result<f64> {
        let s = self.decay(t, d, t0)?;
        let l = self.domain.len();
        let pi = std::f64::consts::PI;
        let mut acc = 0.0;
        for (n, a) in self.coeffs.iter().enumerate().rev() {
            let k = (n + 1) as f64 * pi / l;
            acc += a * (-k * k * s).exp() * (k * (self.domain.hi - x)).cos();
        }
        Ok(self.mean + 2.0 / l * acc)
    }

    /// Average of the solution over `[a, b]`.
    pub fn cell_average(&self, a: f64, b: f64, t: f64, d: f64, t0: f64) -> Result<f64> {
        let s = self.decay(t, d, t0)?;
        let l = self.domain.len();
        let pi = std::f64::consts::PI;
        let hi = self.domain.hi;
        let mut acc = 0.0;
        for (n, c) in self.coeffs.iter().enumerate().rev() {
            let k = (n + 1) as f64 * pi / l;
            acc += c * (-k * k * s).exp() * ((k * (hi - a)).sin() - (k * (hi - b)).sin()) / k;
        }
        Ok(self.mean + 2.0 / l * acc / (b - a))
    }
}

/// Half-line versus interval kernel, per scaled time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosenessSample {
    pub tau: f64,
    pub sup_diff: f64,
    /// `sup_diff · exp(L^2 / (5τ))`.
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub theta: f64,
    /// Smallest `c` with `sup|interval - half_line| <= c exp(-L^2/(5τ))` on the grid.
    pub c_fit: f64,
    pub samples: Vec<ClosenessSample>,
    /// Off-grid scaled times (midpoints) where the fitted bound fails.
    pub violations: Vec<ClosenessSample>,
}

fn sup_kernel_diff(k: &Kernels, tau: f64, x_points: usize) -> Result<f64> {
    let d = k.domain;
    let mut sup = 0.0f64;
    for j in 0..x_points {
        let x = d.lo + d.len() * j as f64 / (x_points - 1) as f64;
        sup = sup.max((k.interval(x, tau)? - k.half_line(x, tau)?).abs());
    }
    Ok(sup)
}

/// Fits the closeness constant between the interval and half-line kernels
/// on `tau_grid ∩ (0, θ]` and re-checks it at the grid midpoints.
pub fn verify_kernel_bounds(kernels: &Kernels, tau_grid: &[f64], theta: f64) -> Result<KernelBoundReport> {
    const X_POINTS: usize = 2001;
    let l2 = kernels.domain.len().powi(2);
    let mut taus: Vec<f64> = tau_grid
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= theta)
        .collect();
    taus.sort_by(|a, b| a.total_cmp(b));
    let sample = |tau: f64| -> Result<ClosenessSample> {
        let sup_diff = sup_kernel_diff(kernels, tau, X_POINTS)?;
        Ok(ClosenessSample {
            tau,
            sup_diff,
            scaled: sup_diff * (l2 / (5.0 * tau)).exp(),
        })
    };
    let samples = crate::par::map(&taus, |&t| sample(t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let c_fit = samples.iter().map(|s| s.scaled).fold(0.0, f64::max);
    let mids: Vec<f64> = taus.windows(2).map(|p| (p[0] * p[1]).sqrt()).collect();
    let violations = crate::par::map(&mids, |&t| sample(t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|s| s.scaled > c_fit * (1.0 + 1e-9))
        .collect();
    Ok(KernelBoundReport {
        theta,
        c_fit,
        samples,
        violations,
    })
}

/// Normalized profile versus interval kernel, per elapsed time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileClosenessSample {
    pub delta0: f64,
    pub eps0: f64,
    pub s: f64,
    pub sup_diff: f64,
    /// `sup_diff / (δ0^2 s^{-3/2} + ε0 s^{-1/2})`, with `s = D(t - t0)`.
    pub ratio: f64,
}

/// Fits the constant relating a spread-out initial profile to the point
/// source. The family is `(1 - β)` times a normalized indicator of
/// `[hi - δ0, hi]` plus `β` spread uniformly, so that the density away from
/// the indicator is `ε0 = β / L`.
pub fn fit_profile_closeness(
    kernels: &Kernels,
    family: &[(f64, f64)],
    s_grid: &[f64],
    cells: usize,
) -> Result<(f64, Vec<ProfileClosenessSample>)> {
    let d = kernels.domain;
    let l = d.len();
    let faces: Vec<f64> = (0..=cells).map(|i| d.lo + l * i as f64 / cells as f64).collect();
    let mut samples = Vec::new();
    for &(delta0, beta) in family {
        let values: Vec<f64> = faces
            .windows(2)
            .map(|f| {
                let overlap = (f[1].min(d.hi) - f[0].max(d.hi - delta0)).max(0.0);
                (1.0 - beta) * overlap / delta0 / (f[1] - f[0]) + beta / l
            })
            .collect();
        let prof = FourierProfile::from_cells(d, &faces, &values, kernels.policy.max_terms)?;
        let eps0 = beta / l;
        for &s in s_grid {
            let mut sup = 0.0f64;
            for j in 0..=400 {
                let x = d.lo + l * j as f64 / 400.0;
                let om = prof.evaluate(x, s, 1.0, 0.0)? / prof.mass();
                sup = sup.max((om - kernels.interval(x, s)?).abs());
            }
            let scale = delta0 * delta0 * s.powf(-1.5) + eps0 * s.powf(-0.5);
            samples.push(ProfileClosenessSample {
                delta0,
                eps0,
                s,
                sup_diff: sup,
                ratio: sup / scale,
            });
        }
    }
    let c = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok((c, samples))
}
