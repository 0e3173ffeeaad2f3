//! Non-ideal relays with thresholds `±x`, the distributed relay state over a
//! threshold interval and the Preisach integral against a density.
//!
//! A relay with threshold `x` switches to `+1` once the input reaches `x`,
//! to `-1` once it reaches `-x`, and keeps its state in between. Switching
//! is closed: touching a threshold switches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum RelaySign {
    Minus,
    Plus,
}

impl RelaySign {
    pub fn value(self) -> f64 {
        match self {
            RelaySign::Minus => -1.0,
            RelaySign::Plus => 1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            RelaySign::Minus => RelaySign::Plus,
            RelaySign::Plus => RelaySign::Minus,
        }
    }
}

impl TryFrom<i8> for RelaySign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(RelaySign::Plus),
            -1 => Ok(RelaySign::Minus),
            _ => Err(format!("relay sign must be +1 or -1, got {v}")),
        }
    }
}

impl From<RelaySign> for i8 {
    fn from(s: RelaySign) -> i8 {
        match s {
            RelaySign::Minus => -1,
            RelaySign::Plus => 1,
        }
    }
}

/// Piecewise-constant relay state on `(lo, hi]` with finitely many sign
/// changes. The sign on `(f_k, f_{k+1}]` alternates; `upper_sign` holds on
/// the interval adjacent to `hi`. A front belongs to the interval on its left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleConfig {
    pub lo: f64,
    pub hi: f64,
    pub fronts: Vec<f64>,
    pub upper_sign: RelaySign,
}

impl SimpleConfig {
    pub fn new(lo: f64, hi: f64, fronts: Vec<f64>, upper_sign: RelaySign) -> Result<Self> {
        let cfg = SimpleConfig {
            lo,
            hi,
            fronts,
            upper_sign,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn uniform(lo: f64, hi: f64, sign: RelaySign) -> Self {
        SimpleConfig {
            lo,
            hi,
            fronts: Vec::new(),
            upper_sign: sign,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::Structural(format!(
                "bad configuration interval [{}, {}]",
                self.lo, self.hi
            )));
        }
        let mut prev = self.lo;
        for &f in &self.fronts {
            if !(f > prev && f < self.hi) {
                return Err(Error::Structural(format!(
                    "fronts must be strictly increasing inside ({}, {}): {:?}",
                    self.lo, self.hi, self.fronts
                )));
            }
            prev = f;
        }
        Ok(())
    }

    /// Relay state at threshold `x ∈ (lo, hi]`.
    pub fn sign_at(&self, x: f64) -> RelaySign {
        let above = self.fronts.len() - self.fronts.partition_point(|&f| f < x);
        if above.is_multiple_of(2) {
            self.upper_sign
        } else {
            self.upper_sign.flip()
        }
    }

    /// Sign on the interval adjacent to `lo`.
    pub fn lowest_sign(&self) -> RelaySign {
        if self.fronts.len().is_multiple_of(2) {
            self.upper_sign
        } else {
            self.upper_sign.flip()
        }
    }

    pub fn leftmost(&self) -> Option<f64> {
        self.fronts.first().copied()
    }

    /// Mean relay value over each cell `[faces[i], faces[i+1]]`.
    /// The faces must span `[lo, hi]`.
    pub fn fill_cell_means(&self, faces: &[f64], out: &mut [f64]) {
        debug_assert_eq!(faces.len(), out.len() + 1);
        let mut sign = self.lowest_sign().value();
        let mut k = 0;
        for i in 0..out.len() {
            let (a, b) = (faces[i], faces[i + 1]);
            if k >= self.fronts.len() || self.fronts[k] >= b {
                out[i] = sign;
                continue;
            }
            let mut acc = 0.0;
            let mut left = a;
            while k < self.fronts.len() && self.fronts[k] < b {
                let f = self.fronts[k].max(a);
                acc += sign * (f - left);
                left = f;
                sign = -sign;
                k += 1;
            }
            acc += sign * (b - left);
            out[i] = acc / (b - a);
        }
    }

    /// Sets `(lo, c]` to `s` and records what happened to the fronts.
    fn sweep(&mut self, c: f64, s: RelaySign, events: &mut Vec<SwitchEvent>) {
        if c <= self.lo {
            return;
        }
        let s0 = self.lowest_sign();
        let k = self.fronts.partition_point(|&f| f <= c);
        if s0 == s && k == 0 {
            return;
        }
        let mut moving = if s0 != s {
            events.push(SwitchEvent::Birth { position: self.lo });
            Some(self.lo)
        } else {
            None
        };
        let mut idx = 0;
        if moving.is_none() {
            moving = Some(self.fronts[0]);
            idx = 1;
        }
        while idx < k {
            events.push(SwitchEvent::Collision {
                position: self.fronts[idx],
            });
            if idx + 1 < k {
                moving = Some(self.fronts[idx + 1]);
                idx += 2;
            } else {
                moving = None;
                idx += 1;
            }
        }
        if c >= self.hi {
            if let Some(m) = moving {
                events.push(SwitchEvent::Exit { from: m });
            }
            self.fronts.clear();
            self.upper_sign = s;
            return;
        }
        let mut kept = Vec::with_capacity(self.fronts.len() - k + 1);
        if let Some(m) = moving {
            if m != c {
                events.push(SwitchEvent::Slide { from: m, to: c });
            }
            kept.push(c);
        }
        kept.extend_from_slice(&self.fronts[k..]);
        self.fronts = kept;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneSegment {
    pub w_from: f64,
    pub w_to: f64,
}

impl MonotoneSegment {
    pub fn new(w_from: f64, w_to: f64) -> Self {
        MonotoneSegment { w_from, w_to }
    }

    pub fn direction(&self) -> Direction {
        if self.w_to > self.w_from {
            Direction::Increasing
        } else if self.w_to < self.w_from {
            Direction::Decreasing
        } else {
            Direction::Flat
        }
    }
}

/// Front-level consequences of one monotone input segment, in path order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchEvent {
    /// A front appears at `lo` as the input leaves `[-lo, lo]`.
    Birth { position: f64 },
    /// The moving front is dragged by the input.
    Slide { from: f64, to: f64 },
    /// The moving front meets the front at `position`; both disappear.
    Collision { position: f64 },
    /// The moving front is pushed through `hi`.
    Exit { from: f64 },
}

/// Applies a monotone input segment to the distributed relay.
pub fn config_update(cfg: &SimpleConfig, seg: MonotoneSegment) -> Result<(SimpleConfig, Vec<SwitchEvent>)> {
    cfg.validate()?;
    for w in [seg.w_from, seg.w_to] {
        if !(w.abs() <= cfg.hi) {
            return Err(Error::Domain(format!(
                "input {w} outside [-{h}, {h}]",
                h = cfg.hi
            )));
        }
    }
    let mut out = cfg.clone();
    let mut events = Vec::new();
    match seg.direction() {
        Direction::Increasing => {
            out.sweep(-seg.w_from, RelaySign::Minus, &mut events);
            out.sweep(seg.w_to, RelaySign::Plus, &mut events);
        }
        Direction::Decreasing => {
            out.sweep(seg.w_from, RelaySign::Plus, &mut events);
            out.sweep(-seg.w_to, RelaySign::Minus, &mut events);
        }
        Direction::Flat => {
            let w = seg.w_from;
            if w > 0.0 {
                out.sweep(w, RelaySign::Plus, &mut events);
            } else if w < 0.0 {
                out.sweep(-w, RelaySign::Minus, &mut events);
            }
        }
    }
    Ok((out, events))
}

/// Literal single-relay evaluation over a sampled input, used as an oracle.
pub fn brute_force_relay(x: f64, w_samples: &[f64], r0: RelaySign) -> RelaySign {
    let mut r = r0;
    for &w in w_samples {
        if w >= x {
            r = RelaySign::Plus;
        } else if w <= -x {
            r = RelaySign::Minus;
        }
    }
    r
}

/// Tail mass `U(x) = ∫_x^hi u` of a density on `[lo, hi]`.
pub trait CumulativeMass {
    fn bounds(&self) -> (f64, f64);
    fn upper_mass(&self, x: f64) -> f64;
}

/// Adapter for a closure with known bounds.
pub struct FnMass<F: Fn(f64) -> f64> {
    pub lo: f64,
    pub hi: f64,
    pub f: F,
}

impl<F: Fn(f64) -> f64> CumulativeMass for FnMass<F> {
    fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
    fn upper_mass(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// `∫ u r dx` as a telescoping sum of `U` over the sign intervals.
pub fn preisach(u_cum: &impl CumulativeMass, cfg: &SimpleConfig) -> Result<f64> {
    let (lo, hi) = u_cum.bounds();
    let tol = 1e-12 * (cfg.hi - cfg.lo);
    if (lo - cfg.lo).abs() > tol || (hi - cfg.hi).abs() > tol {
        return Err(Error::Structural(format!(
            "density on [{lo}, {hi}] does not match configuration on [{}, {}]",
            cfg.lo, cfg.hi
        )));
    }
    let mut sign = cfg.lowest_sign().value();
    let mut left = u_cum.upper_mass(cfg.lo);
    let mut acc = 0.0;
    for &f in &cfg.fronts {
        let right = u_cum.upper_mass(f);
        acc += sign * (left - right);
        left = right;
        sign = -sign;
    }
    acc += sign * (left - u_cum.upper_mass(cfg.hi));
    Ok(acc)
}

/// Number of fronts in `[x_lo, hi)`.
pub fn sign_changes_in(cfg: &SimpleConfig, x_lo: f64) -> usize {
    cfg.fronts.len() - cfg.fronts.partition_point(|&f| f < x_lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LO: f64 = 0.05;
    const HI: f64 = 0.25;

    fn grid(n: usize) -> Vec<f64> {
        (1..=n).map(|k| LO + (HI - LO) * k as f64 / n as f64).collect()
    }

    fn apply_path(cfg: &SimpleConfig, knots: &[f64]) -> SimpleConfig {
        let mut c = cfg.clone();
        for p in knots.windows(2) {
            c = config_update(&c, MonotoneSegment::new(p[0], p[1])).unwrap().0;
        }
        c
    }

    #[test]
    fn full_sweep_makes_all_plus() {
        let cfg = SimpleConfig::uniform(LO, HI, RelaySign::Minus);
        let (out, ev) = config_update(&cfg, MonotoneSegment::new(LO, HI)).unwrap();
        assert!(out.fronts.is_empty());
        assert_eq!(out.upper_sign, RelaySign::Plus);
        assert!(matches!(ev.last(), Some(SwitchEvent::Exit { .. })));
    }

    #[test]
    fn partial_rise_creates_one_front() {
        let cfg = SimpleConfig::uniform(LO, HI, RelaySign::Minus);
        let (out, ev) = config_update(&cfg, MonotoneSegment::new(0.0, 0.15)).unwrap();
        assert_eq!(out.fronts, vec![0.15]);
        assert_eq!(out.upper_sign, RelaySign::Minus);
        assert_eq!(out.sign_at(0.1), RelaySign::Plus);
        assert_eq!(out.sign_at(0.15), RelaySign::Plus);
        assert_eq!(out.sign_at(0.16), RelaySign::Minus);
        assert_eq!(ev[0], SwitchEvent::Birth { position: LO });
    }

    #[test]
    fn leftmost_front_absorbed_and_replaced() {
        // +1 below a, -1 on (a, b], +1 above b.
        let cfg = SimpleConfig::new(LO, HI, vec![0.1, 0.2], RelaySign::Plus).unwrap();
        let (out, ev) = config_update(&cfg, MonotoneSegment::new(0.0, 0.15)).unwrap();
        assert_eq!(out.fronts, vec![0.15, 0.2]);
        assert_eq!(ev, vec![SwitchEvent::Slide { from: 0.1, to: 0.15 }]);
        for x in grid(1000) {
            let oracle = brute_force_relay(x, &[0.0, 0.15], cfg.sign_at(x));
            assert_eq!(out.sign_at(x), oracle, "x = {x}");
        }
    }

    #[test]
    fn collision_removes_two_fronts() {
        let cfg = SimpleConfig::new(LO, HI, vec![0.1, 0.2], RelaySign::Plus).unwrap();
        let (out, ev) = config_update(&cfg, MonotoneSegment::new(0.1, 0.22)).unwrap();
        assert!(out.fronts.is_empty());
        assert_eq!(out.upper_sign, RelaySign::Plus);
        assert_eq!(ev, vec![SwitchEvent::Collision { position: 0.2 }]);
    }

    #[test]
    fn touching_threshold_switches() {
        let cfg = SimpleConfig::uniform(LO, HI, RelaySign::Minus);
        let out = config_update(&cfg, MonotoneSegment::new(0.0, 0.1)).unwrap().0;
        assert_eq!(out.sign_at(0.1), RelaySign::Plus);
        assert_eq!(
            brute_force_relay(0.1, &[0.0, 0.1], RelaySign::Minus),
            RelaySign::Plus
        );
    }

    #[test]
    fn input_beyond_hi_is_domain_error() {
        let cfg = SimpleConfig::uniform(LO, HI, RelaySign::Minus);
        assert!(matches!(
            config_update(&cfg, MonotoneSegment::new(0.0, 0.3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn unsorted_fronts_are_structural_error() {
        let cfg = SimpleConfig {
            lo: LO,
            hi: HI,
            fronts: vec![0.2, 0.1],
            upper_sign: RelaySign::Plus,
        };
        assert!(matches!(
            config_update(&cfg, MonotoneSegment::new(0.0, 0.1)),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(
            brute_force_relay(0.1, &[0.0; 5], RelaySign::Plus),
            RelaySign::Plus
        );
        assert_eq!(
            brute_force_relay(0.1, &[0.0, 0.1, 0.0, -0.1], RelaySign::Plus),
            RelaySign::Minus
        );
    }

    #[test]
    fn preisach_examples() {
        let c = 5.0;
        let uniform = FnMass {
            lo: LO,
            hi: HI,
            f: |x: f64| c * (HI - x),
        };
        let plus = SimpleConfig::uniform(LO, HI, RelaySign::Plus);
        assert!((preisach(&uniform, &plus).unwrap() - c * (HI - LO)).abs() < 1e-15);
        let mid = SimpleConfig::new(LO, HI, vec![0.15], RelaySign::Plus).unwrap();
        assert!(preisach(&uniform, &mid).unwrap().abs() < 1e-15);

        // narrow bump of unit mass on [HI - 1e-3, HI]; midpoint quadrature
        let eps = 1e-3;
        let bump = FnMass {
            lo: LO,
            hi: HI,
            f: move |x: f64| ((HI - x) / eps).clamp(0.0, 1.0),
        };
        let n = 20000;
        let h = (HI - LO) / n as f64;
        let direct: f64 = (0..n)
            .map(|i| {
                let x = LO + (i as f64 + 0.5) * h;
                let u = if x >= HI - eps { 1.0 / eps } else { 0.0 };
                u * mid.sign_at(x).value() * h
            })
            .sum();
        let p = preisach(&bump, &mid).unwrap();
        assert!((p - direct).abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);

        let other = FnMass {
            lo: 0.0,
            hi: HI,
            f: |x: f64| HI - x,
        };
        assert!(matches!(preisach(&other, &mid), Err(Error::Structural(_))));
    }

    #[test]
    fn sign_change_examples() {
        let plus = SimpleConfig::uniform(LO, HI, RelaySign::Plus);
        assert_eq!(sign_changes_in(&plus, 0.1), 0);
        let two = SimpleConfig::new(LO, HI, vec![0.2, 0.22], RelaySign::Plus).unwrap();
        assert_eq!(sign_changes_in(&two, 0.21), 1);
        let three = SimpleConfig::new(0.1, 0.4, vec![0.2, 0.3], RelaySign::Plus).unwrap();
        assert_eq!(sign_changes_in(&three, 0.25), 1);
    }

    #[test]
    fn cell_means_match_pointwise_average() {
        let cfg = SimpleConfig::new(LO, HI, vec![0.1003, 0.1004, 0.2], RelaySign::Minus).unwrap();
        let faces: Vec<f64> = (0..=200).map(|i| LO + (HI - LO) * i as f64 / 200.0).collect();
        let mut out = vec![0.0; 200];
        cfg.fill_cell_means(&faces, &mut out);
        for i in 0..200 {
            let m = 4000;
            let (a, b) = (faces[i], faces[i + 1]);
            let avg: f64 = (0..m)
                .map(|j| cfg.sign_at(a + (b - a) * (j as f64 + 0.5) / m as f64).value())
                .sum::<f64>()
                / m as f64;
            assert!((out[i] - avg).abs() < 2e-3, "cell {i}: {} vs {avg}", out[i]);
        }
    }

    #[test]
    fn json_shape() {
        let cfg = SimpleConfig::new(LO, HI, vec![0.2], RelaySign::Minus).unwrap();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(s, r#"{"lo":0.05,"hi":0.25,"fronts":[0.2],"upper_sign":-1}"#);
        let back: SimpleConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }

    fn arb_config() -> impl Strategy<Value = SimpleConfig> {
        (proptest::collection::btree_set(1u32..999, 0..6), any::<bool>()).prop_map(|(set, plus)| {
            let fronts = set
                .into_iter()
                .map(|k| LO + (HI - LO) * k as f64 / 1000.0)
                .collect();
            let s = if plus { RelaySign::Plus } else { RelaySign::Minus };
            SimpleConfig::new(LO, HI, fronts, s).unwrap()
        })
    }

    fn arb_path() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-HI..=HI, 2..12)
    }

    proptest! {
        #[test]
        fn matches_brute_force(cfg in arb_config(), knots in arb_path()) {
            let out = apply_path(&cfg, &knots);
            for x in grid(1000) {
                prop_assert_eq!(out.sign_at(x), brute_force_relay(x, &knots, cfg.sign_at(x)));
            }
        }

        #[test]
        fn rate_independent(cfg in arb_config(), knots in arb_path(), cuts in proptest::collection::vec(0.0f64..1.0, 11)) {
            let mut refined = vec![knots[0]];
            for (k, p) in knots.windows(2).enumerate() {
                refined.push(p[0] + cuts[k % cuts.len()] * (p[1] - p[0]));
                refined.push(p[1]);
            }
            prop_assert_eq!(apply_path(&cfg, &knots), apply_path(&cfg, &refined));
        }

        #[test]
        fn increasing_sweep_clears_below(cfg in arb_config(), a in -HI..HI, b in -HI..HI) {
            let (lo_w, hi_w) = if a < b { (a, b) } else { (b, a) };
            let out = config_update(&cfg, MonotoneSegment::new(lo_w, hi_w)).unwrap().0;
            prop_assert!(out.fronts.iter().all(|&f| f >= hi_w));
            out.validate().unwrap();
        }

        #[test]
        fn preisach_bounded_by_mass(cfg in arb_config(), weights in proptest::collection::vec(0.0f64..1.0, 50)) {
            let h = (HI - LO) / 50.0;
            let w2 = weights.clone();
            let mass = FnMass { lo: LO, hi: HI, f: move |x: f64| {
                let mut acc = 0.0;
                for (i, &u) in w2.iter().enumerate() {
                    let a = LO + i as f64 * h;
                    acc += u * ((a + h).min(HI) - x.max(a)).max(0.0);
                }
                acc
            }};
            let total = mass.upper_mass(LO);
            let p = preisach(&mass, &cfg).unwrap();
            prop_assert!(p.abs() <= total * (1.0 + 1e-12) + 1e-15);
            if cfg.fronts.is_empty() {
                prop_assert!((p.abs() - total).abs() <= 1e-12);
            }
        }

        #[test]
        fn sign_changes_match_scan(cfg in arb_config(), k in 0usize..999) {
            let x_lo = LO + (HI - LO) * (k as f64 + 0.5) / 1000.0;
            let xs: Vec<f64> = (0..=20000).map(|j| x_lo + (HI - x_lo) * j as f64 / 20000.0).collect();
            let flips = xs.windows(2).filter(|p| cfg.sign_at(p[0]) != cfg.sign_at(p[1])).count();
            prop_assert_eq!(sign_changes_in(&cfg, x_lo), flips);
        }
    }
}
