//! Standard scenarios used by the harness, the tests and the bench.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sequences::SequencePlan1;
use crate::error::Result;
use crate::hysteresis::{RelaySign, SimpleConfig};
use crate::kernels::ThresholdDomain;
use crate::solver::config::Scenario;
use crate::solver::{InitialData, ModelParams, RunOptions, Simulation, StopRule};

pub const REF_LO: f64 = 0.05;
pub const REF_HI: f64 = 0.25;

/// Concentrated start close to `hi` with little nutrient:
/// `ε = √D/10`, `v0 = √D`, `w0 = hi - √D/10`, `r0 ≡ +1`.
pub fn concentrated(d: f64, t_end: f64) -> Result<Scenario> {
    let dom = ThresholdDomain::new(REF_LO, REF_HI)?;
    let sim = Simulation::new(ModelParams::new(dom, d))?;
    let s = d.sqrt();
    let r0 = SimpleConfig::uniform(dom.lo, dom.hi, RelaySign::Plus);
    let data = InitialData::bump(&sim.grid, s / 10.0, s, dom.hi - s / 10.0, r0)?;
    Ok(Scenario {
        sim,
        data,
        opts: RunOptions::horizon(t_end),
    })
}

/// Concentrated start with probes at the plan thresholds, run until
/// `t_factor` times the first observation moment.
pub fn theorem1(plan: &SequencePlan1, d: f64, eps: f64, v0: f64, t_factor: f64) -> Result<Scenario> {
    let dom = plan.domain;
    let sim = Simulation::new(ModelParams::new(dom, d))?;
    let r0 = SimpleConfig::uniform(dom.lo, dom.hi, RelaySign::Plus);
    let data = InitialData::bump(&sim.grid, eps, v0, 0.0, r0)?;
    let mut opts = RunOptions::horizon(t_factor * plan.tau[0] / d);
    opts.cadence = 0.5;
    opts.probes = plan.x.clone();
    Ok(Scenario { sim, data, opts })
}

/// Concentrated start close to `hi`, with probes at the given thresholds.
pub fn short_time(d: f64, v0: f64, t_end: f64, probes: Vec<f64>) -> Result<Scenario> {
    let mut s = concentrated(d, t_end)?;
    s.data.v0 = v0;
    s.opts.probes = probes;
    Ok(s)
}

/// Small randomized scenarios for the a-priori bound monitors. Each one
/// runs until `u` is flat to `1e-4` relative to its mean.
pub fn randomized(seed: u64, count: usize) -> Result<Vec<Scenario>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let lo = rng.gen_range(0.02..0.15);
        let hi = rng.gen_range(lo + 0.05..0.4);
        let dom = ThresholdDomain::new(lo, hi)?;
        let d = 10f64.powf(rng.gen_range(-3.0..-2.0));
        let mut params = ModelParams::new(dom, d);
        params.grid_n = 400;
        let sim = Simulation::new(params)?;
        let v0 = rng.gen_range(0.0..1.0);
        let w0 = rng.gen_range(-lo..lo);
        let r0 = SimpleConfig::uniform(
            lo,
            hi,
            if rng.gen_bool(0.5) {
                RelaySign::Plus
            } else {
                RelaySign::Minus
            },
        );
        let data = if rng.gen_bool(0.5) {
            let eps = rng.gen_range(0.05..0.5) * dom.len();
            InitialData::bump(&sim.grid, eps, v0, w0, r0)?
        } else {
            // smooth bump anywhere in the domain
            let c = rng.gen_range(lo..hi);
            let s = rng.gen_range(0.05..0.3) * dom.len();
            let samples: Vec<(f64, f64)> = (0..=200)
                .map(|j| {
                    let x = lo + (hi - lo) * j as f64 / 200.0;
                    (x, (-((x - c) / s).powi(2)).exp())
                })
                .collect();
            let mut data = InitialData::from_samples(&sim.grid, &samples, v0, w0, r0)?;
            let m = sim.grid.mass(&data.u0);
            data.u0.iter_mut().for_each(|u| *u /= m);
            data
        };
        // slowest mode decays like exp(-Dπ²t/L²) from at most twice the peak
        let peak = data.u0.iter().copied().fold(0.0, f64::max) * (1.0 + v0);
        let t_flat = dom.len().powi(2) / (d * std::f64::consts::PI.powi(2)) * (2e4 * peak).ln();
        let t_end = t_flat.max(40.0 / dom.mu());
        let mut opts = RunOptions::horizon(t_end);
        opts.cadence = 1.0;
        opts.stop = StopRule::Horizon { t_end };
        out.push(Scenario { sim, data, opts });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concentrated_defaults() {
        let s = concentrated(1e-4, 1.0).unwrap();
        assert!((s.data.v0 - 1e-2).abs() < 1e-15);
        assert!((s.data.w0 - (0.25 - 1e-3)).abs() < 1e-15);
        assert!((s.sim.grid.mass(&s.data.u0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn randomized_is_reproducible() {
        let a = randomized(7, 3).unwrap();
        let b = randomized(7, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.data, y.data);
        }
    }
}
