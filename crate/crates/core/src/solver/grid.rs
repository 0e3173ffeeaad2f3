//! Finite-volume grid on the threshold interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl Grid {
    fn from_faces(faces: Vec<f64>) -> Result<Self> {
        if faces.len() < 3 || faces.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Config("grid faces must be strictly increasing".into()));
        }
        let centers = faces.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let widths = faces.windows(2).map(|p| p[1] - p[0]).collect();
        Ok(Grid {
            faces,
            centers,
            widths,
        })
    }

    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let faces = (0..=n)
            .map(|i| {
                if i == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / n as f64
                }
            })
            .collect();
        Self::from_faces(faces)
    }

    /// Cell density `grading` times higher over the last tenth of the
    /// interval than over the rest, with a smooth transition.
    pub fn graded(lo: f64, hi: f64, n: usize, grading: f64) -> Result<Self> {
        if !(grading >= 1.0) {
            return Err(Error::Config(format!("grid grading must be >= 1, got {grading}")));
        }
        if n < 2 {
            return Err(Error::Config("grid needs at least 2 cells".into()));
        }
        if grading == 1.0 {
            return Self::uniform(lo, hi, n);
        }
        let l = hi - lo;
        let x_s = hi - 0.1 * l;
        let width = 0.005 * l;
        let density = |x: f64| 1.0 + (grading - 1.0) / (1.0 + (-(x - x_s) / width).exp());
        let m = 64 * n;
        let xs: Vec<f64> = (0..=m).map(|j| lo + l * j as f64 / m as f64).collect();
        let mut cum = vec![0.0; m + 1];
        for j in 0..m {
            cum[j + 1] = cum[j] + 0.5 * (density(xs[j]) + density(xs[j + 1])) * (xs[j + 1] - xs[j]);
        }
        let total = cum[m];
        let mut faces = Vec::with_capacity(n + 1);
        faces.push(lo);
        let mut j = 0;
        for i in 1..n {
            let target = total * i as f64 / n as f64;
            while cum[j + 1] < target {
                j += 1;
            }
            let frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
            faces.push(xs[j] + frac * (xs[j + 1] - xs[j]));
        }
        faces.push(hi);
        Self::from_faces(faces)
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.faces[0]
    }

    pub fn hi(&self) -> f64 {
        self.faces[self.faces.len() - 1]
    }

    pub fn mass(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.widths).map(|(a, h)| a * h).sum()
    }

    /// Tail masses `U` at every face, `U[n] = 0`, `U[0] = total`.
    pub fn upper_masses(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n + 1];
        for i in (0..n).rev() {
            out[i] = out[i + 1] + u[i] * self.widths[i];
        }
        out
    }

    /// Index of the cell containing `x` (faces belong to the cell on their right,
    /// except `hi`).
    pub fn cell_of(&self, x: f64) -> usize {
        let k = self.faces.partition_point(|&f| f <= x);
        k.saturating_sub(1).min(self.len() - 1)
    }
}

/// `U(x) = ∫_x^hi u` of a piecewise-constant profile.
#[derive(Debug, Clone)]
pub struct CellMass<'a> {
    pub grid: &'a Grid,
    pub upper: Vec<f64>,
    pub u: &'a [f64],
}

impl<'a> CellMass<'a> {
    pub fn new(grid: &'a Grid, u: &'a [f64]) -> Self {
        CellMass {
            grid,
            upper: grid.upper_masses(u),
            u,
        }
    }

    pub fn total(&self) -> f64 {
        self.upper[0]
    }

    pub fn at(&self, x: f64) -> f64 {
        let g = self.grid;
        if x <= g.lo() {
            return self.upper[0];
        }
        if x >= g.hi() {
            return 0.0;
        }
        let i = g.cell_of(x);
        self.upper[i + 1] + self.u[i] * (g.faces[i + 1] - x)
    }
}

impl crate::hysteresis::CumulativeMass for CellMass<'_> {
    fn bounds(&self) -> (f64, f64) {
        (self.grid.lo(), self.grid.hi())
    }
    fn upper_mass(&self, x: f64) -> f64 {
        self.at(x)
    }
}
