//! Observation sequences and their independent re-verification.
//!
//! Builders evaluate the kernel mass with the cosine series and `erf`;
//! checkers integrate the mirror-source kernel and `exp(-z^2)` by
//! Gauss-Legendre quadrature, so the two never share an evaluation path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{erf, Kernels, ThresholdDomain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePlan1 {
    #[serde(rename = "N")]
    pub n: usize,
    /// Decreasing scaled times.
    pub tau: Vec<f64>,
    pub chi: Vec<f64>,
    /// `N + 1` increasing thresholds.
    pub x: Vec<f64>,
    pub domain: ThresholdDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePlan2 {
    #[serde(rename = "N")]
    pub n: usize,
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    /// `y[0] = 0`, then `N` increasing depths in units of `√D`.
    pub y: Vec<f64>,
    pub mu: f64,
}

impl SequencePlan2 {
    /// Thresholds `hi - √D y_i`, `i = 0..=N`.
    pub fn thresholds(&self, hi: f64, d: f64) -> Vec<f64> {
        self.y.iter().map(|y| hi - d.sqrt() * y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm1Options {
    /// Position of `x_1` as a fraction of `L` above `lo`.
    pub x1_fraction: f64,
    pub target: f64,
    pub margin: f64,
    /// Spacing of the threshold search grid as a fraction of `L`.
    pub x_step_fraction: f64,
}

impl Default for Thm1Options {
    fn default() -> Self {
        Thm1Options {
            x1_fraction: 0.1,
            target: 0.6,
            margin: 0.05,
            x_step_fraction: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm2Margins {
    pub margin: f64,
    pub t_step: f64,
    pub y_step: f64,
}

impl Default for Thm2Margins {
    fn default() -> Self {
        Thm2Margins {
            margin: 0.05,
            t_step: 0.01,
            y_step: 0.01,
        }
    }
}

fn fail(index: usize, reason: impl Into<String>) -> Error {
    Error::Construction {
        index,
        reason: reason.into(),
    }
}

/// Scaled time at which the mass above `x` drops to `target`.
/// The mass is decreasing in `τ`, from 1 down to `(hi - x)/L`.
fn tau_for_mass(k: &Kernels, x: f64, target: f64) -> Result<f64> {
    let phi = |t: f64| k.interval_tail(x, t);
    let mut lo = 1e-8;
    if phi(lo)? <= target {
        return Err(fail(
            0,
            format!("mass above {x} is below {target} already at τ = {lo}"),
        ));
    }
    let mut hi = 1e-3;
    while phi(hi)? > target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(fail(0, format!("mass above {x} never drops to {target}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Deterministic version of the inductive construction behind the
/// long-time counting argument.
pub fn build_sequences_thm1(kernels: &Kernels, n: usize, opts: &Thm1Options) -> Result<SequencePlan1> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let d = kernels.domain;
    let l = d.len();
    let phi = |x: f64, t: f64| kernels.interval_tail(x, t);
    let mut x = vec![d.lo + opts.x1_fraction * l];
    let mut tau: Vec<f64> = Vec::new();
    let mut chi: Vec<f64> = Vec::new();
    for i in 0..n {
        let xi = x[i];
        // the mass above x_i only decays to (hi - x_i)/L, so an unreachable
        // target is replaced by the midpoint between that limit and 1
        let limit = (d.hi - xi) / l;
        let mut target = if limit < opts.target {
            opts.target
        } else {
            0.5 * (limit + 1.0)
        };
        let ti = loop {
            let t = tau_for_mass(kernels, xi, target).map_err(|e| match e {
                Error::Construction { reason, .. } => fail(i + 1, reason),
                e => e,
            })?;
            match (tau.last(), chi.last()) {
                (Some(&tp), Some(&cp)) if t >= tp - cp => {
                    target = 0.5 * (target + 1.0);
                    if 1.0 - target < 1e-12 {
                        return Err(fail(i + 1, "no scaled time below the previous window"));
                    }
                }
                _ => break t,
            }
        };
        let phi_i = phi(xi, ti)?;
        // mass above x_{i+1} is decreasing in τ, so the sup over τ ≥ τ_i is at τ_i
        let step = opts.x_step_fraction * l;
        let mut k = 1usize;
        let next = loop {
            let cand = xi + k as f64 * step;
            if cand >= d.hi - 0.5 * step {
                return Err(fail(
                    i + 1,
                    format!("no threshold in ({xi}, {}) separates the masses", d.hi),
                ));
            }
            let p = phi(cand, ti)?;
            if p < 0.5 && 2.0 * phi_i - 2.0 * p - 1.0 > opts.margin {
                break cand;
            }
            k += 1;
        };
        let mut c = 0.5 * opts.margin;
        let ok = |c: f64| -> Result<bool> {
            if c >= ti {
                return Ok(false);
            }
            if phi(next, ti - c)? >= 0.5 - c {
                return Ok(false);
            }
            const SCAN: usize = 257;
            for j in 0..SCAN {
                let t = ti - c + c * j as f64 / (SCAN - 1) as f64;
                if 2.0 * phi(xi, t)? - 2.0 * phi(next, t)? - 1.0 <= 2.0 * c * (1.0 + 1e-6) {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let mut tries = 0;
        while !ok(c)? {
            c *= 0.5;
            tries += 1;
            if tries > 200 {
                return Err(fail(i + 1, "no admissible window width"));
            }
        }
        tau.push(ti);
        chi.push(c);
        x.push(next);
    }
    Ok(SequencePlan1 {
        n,
        tau,
        chi,
        x,
        domain: d,
    })
}

/// Deterministic version of the step-by-step construction behind the
/// short-time counting argument.
pub fn build_sequences_thm2(n: usize, mu: f64, m: &Thm2Margins) -> Result<SequencePlan2> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if !(m.margin > 0.0 && m.margin < 0.125 && m.t_step > 0.0 && m.y_step > 0.0) {
        return Err(Error::Domain("margins must be positive and margin < 1/8".into()));
    }
    let e = |y: f64, t: f64| erf(y / (2.0 * t.sqrt()));
    let grid_above = |v: f64, step: f64| ((v / step).floor() + 1.0) * step;
    let mut t: Vec<f64> = Vec::new();
    let mut theta: Vec<f64> = Vec::new();
    let mut y = vec![0.0];
    for i in 1..=n {
        let yp = y[i - 1];
        let t_prev = t.last().copied().unwrap_or(0.0);
        // E(y/(2√θ)) is decreasing in θ. The margins are staggered (2m for θ,
        // 2m for t, m for y) so each later step has room left.
        let below = |th: f64| e(yp, th) < 0.5 - 2.0 * m.margin;
        let (mut a, mut b) = (t_prev, t_prev.max(1.0));
        while !below(b) {
            a = b;
            b *= 2.0;
            if b > 1e12 {
                return Err(fail(i, "no admissible θ"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if below(mid) {
                b = mid;
            } else {
                a = mid;
            }
        }
        let mut th = grid_above(a.max(t_prev), m.t_step);
        while !below(th) {
            th += m.t_step;
        }
        let gap = 1.0 - 2.0 * e(yp, th);
        if gap <= 2.0 * m.margin {
            return Err(fail(i, format!("gap {gap} does not exceed twice the margin")));
        }
        let mut ti = grid_above(th + 1.0 / (mu * mu * (gap - 2.0 * m.margin)), m.t_step);
        while gap <= 1.0 / (mu * mu * (ti - th)) + 2.0 * m.margin {
            ti += m.t_step;
        }
        let rhs = 1.0 / (mu * mu * (ti - th)) + m.margin;
        let lhs = |yv: f64| 2.0 * e(yv, ti) - 2.0 * e(yp, th) - 1.0;
        let (mut a, mut b) = (yp, yp.max(1.0));
        while lhs(b) <= rhs {
            b *= 2.0;
            if b > 1e12 {
                return Err(fail(i, "no admissible depth"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if lhs(mid) > rhs {
                b = mid;
            } else {
                a = mid;
            }
        }
        let mut yi = grid_above(a, m.y_step);
        while lhs(yi) <= rhs {
            yi += m.y_step;
        }
        theta.push(th);
        t.push(ti);
        y.push(yi);
    }
    Ok(SequencePlan2 { n, t, theta, y, mu })
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (z, w) in GL5 {
            acc += w * f(c + 0.5 * h * z);
        }
    }
    0.5 * h * acc
}

/// Mass above `x` of the mirror-source kernel, by quadrature.
fn phi_quadrature(k: &Kernels, x: f64, tau: f64) -> Result<f64> {
    let hi = k.domain.hi;
    let mut err = None;
    let v = gauss(
        |y| match k.interval_by_images(y, tau) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        x,
        hi,
        400,
    );
    err.map_or(Ok(v), Err)
}

fn e_quadrature(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    // beyond 6 the remaining mass is below 1e-17
    let top = y.min(6.0);
    2.0 / std::f64::consts::PI.sqrt() * gauss(|z| (-z * z).exp(), 0.0, top, 200)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCheck {
    pub name: String,
    pub index: usize,
    pub worst: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanVerification {
    pub checks: Vec<PlanCheck>,
}

impl PlanVerification {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &str, index: usize, worst: f64) {
        self.checks.push(PlanCheck {
            name: name.into(),
            index,
            worst,
            pass: worst > 0.0,
        });
    }
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| a * (b / a).powf(j as f64 / (n - 1) as f64))
        .collect()
}

fn lin_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect()
}

/// Dense re-check of every defining inequality of a long-time plan.
/// `worst` is the smallest slack found; positive means the inequality holds.
pub fn check_plan1(kernels: &Kernels, plan: &SequencePlan1, points: usize) -> Result<PlanVerification> {
    let d = plan.domain;
    let mut out = PlanVerification::default();
    let n = plan.n;
    if plan.tau.len() != n || plan.chi.len() != n || plan.x.len() != n + 1 {
        return Err(Error::Structural("plan lengths do not match N".into()));
    }
    let mut chain = f64::INFINITY;
    for i in 0..n {
        chain = chain.min(plan.chi[i]).min(plan.tau[i] - plan.chi[i]);
        if i + 1 < n {
            chain = chain.min(plan.tau[i] - plan.chi[i] - plan.tau[i + 1]);
        }
    }
    out.push("time_chain", 0, chain);
    let mut xs = plan.x[0] - d.lo;
    for w in plan.x.windows(2) {
        xs = xs.min(w[1] - w[0]);
    }
    xs = xs.min(d.hi - plan.x[n]);
    out.push("threshold_chain", 0, xs);
    for i in 0..n {
        let (xi, xn, ti, ci) = (plan.x[i], plan.x[i + 1], plan.tau[i], plan.chi[i]);
        let p = |x: f64, t: f64| phi_quadrature(kernels, x, t);
        out.push("mass_above_half", i + 1, p(xi, ti)? - 0.5);
        out.push(
            "separation_at_tau",
            i + 1,
            2.0 * p(xi, ti)? - 2.0 * p(xn, ti)? - 1.0,
        );
        // the long-time limit of the mass above x is (hi - x)/L
        let far = 50.0 * d.len() * d.len();
        let mut upper = 0.5 - ci - (d.hi - xn) / d.len();
        for t in log_grid(ti - ci, far, points) {
            upper = upper.min(0.5 - ci - p(xn, t)?);
        }
        out.push("upper_mass_below_half", i + 1, upper);
        let mut sep = f64::INFINITY;
        for t in lin_grid(ti - ci, ti, points) {
            sep = sep.min(2.0 * p(xi, t)? - 2.0 * p(xn, t)? - 1.0 - 2.0 * ci);
        }
        out.push("separation_on_window", i + 1, sep);
    }
    Ok(out)
}

/// Dense re-check of every defining inequality of a short-time plan.
pub fn check_plan2(plan: &SequencePlan2, points: usize) -> Result<PlanVerification> {
    let n = plan.n;
    if plan.t.len() != n || plan.theta.len() != n || plan.y.len() != n + 1 {
        return Err(Error::Structural("plan lengths do not match N".into()));
    }
    let mut out = PlanVerification::default();
    let mut chain = plan.theta[0];
    for i in 0..n {
        chain = chain.min(plan.t[i] - plan.theta[i]);
        if i + 1 < n {
            chain = chain.min(plan.theta[i + 1] - plan.t[i]);
        }
    }
    out.push("time_chain", 0, chain);
    let mut ys = if plan.y[0] == 0.0 { f64::INFINITY } else { -1.0 };
    for w in plan.y.windows(2) {
        ys = ys.min(w[1] - w[0]);
    }
    out.push("depth_chain", 0, ys);
    let mu2 = plan.mu * plan.mu;
    let e = |y: f64, t: f64| e_quadrature(y / (2.0 * t.sqrt()));
    for i in 1..=n {
        let (th, ti, yp, yi) = (plan.theta[i - 1], plan.t[i - 1], plan.y[i - 1], plan.y[i]);
        let rhs = 1.0 / (mu2 * (ti - th));
        let mut below = f64::INFINITY;
        for t in log_grid(th, th * 1e6, points) {
            below = below.min(0.5 - e(yp, t));
        }
        out.push("previous_depth_below_half", i, below);
        out.push(
            "separation_at_endpoints",
            i,
            2.0 * e(yi, ti) - 2.0 * e(yp, th) - 1.0 - rhs,
        );
        let mut sep = f64::INFINITY;
        for t in lin_grid(th, ti, points) {
            sep = sep.min(2.0 * e(yi, t) - 2.0 * e(yp, t) - 1.0 - rhs);
        }
        out.push("separation_on_window", i, sep);
    }
    Ok(out)
}
