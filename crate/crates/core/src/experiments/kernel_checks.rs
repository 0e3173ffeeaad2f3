//! Cross-checks of the closed-form kernels against the grid diffusion solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{FourierProfile, Kernels};
use crate::solver::diffusion::{crank_nicolson, implicit_euler};
use crate::solver::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverComparison {
    pub t: f64,
    pub sup_err: f64,
}

/// Steps `u` from `t0` through every time in `times` (sorted), calling
/// `visit` on arrival. The first steps are damped with half-step implicit
/// Euler so that sharp data does not ring.
fn march(
    grid: &Grid,
    mut u: Vec<f64>,
    d: f64,
    t0: f64,
    times: &[f64],
    dt: f64,
    mut visit: impl FnMut(f64, &[f64]) -> Result<()>,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Domain("time step must be positive".into()));
    }
    let mut t = t0;
    let mut steps = 0usize;
    for &target in times {
        if target < t {
            return Err(Error::Domain(format!(
                "comparison times must be increasing and after {t0}"
            )));
        }
        while t < target * (1.0 - 1e-14) {
            let h = dt.min(target - t);
            u = if steps < 4 {
                let half = implicit_euler(grid, &u, d, 0.5 * h);
                implicit_euler(grid, &half, d, 0.5 * h)
            } else {
                crank_nicolson(grid, &u, d, h)
            };
            t += h;
            steps += 1;
        }
        visit(target, &u)?;
    }
    Ok(())
}

fn exact_cell_means(k: &Kernels, grid: &Grid, tau: f64) -> Result<Vec<f64>> {
    let tails = grid
        .faces
        .iter()
        .map(|&x| k.interval_tail(x, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(tails
        .windows(2)
        .zip(&grid.widths)
        .map(|(p, w)| (p[0] - p[1]) / w)
        .collect())
}

/// Grid solution of the unit-diffusivity problem started from the exact
/// interval kernel at `tau0`, compared with exact kernel cell means.
pub fn kernel_vs_solver(
    k: &Kernels,
    cells: usize,
    tau0: f64,
    taus: &[f64],
    dt: f64,
) -> Result<Vec<SolverComparison>> {
    let grid = Grid::uniform(k.domain.lo, k.domain.hi, cells)?;
    let u0 = exact_cell_means(k, &grid, tau0)?;
    let mut out = Vec::new();
    march(&grid, u0, 1.0, tau0, taus, dt, |t, u| {
        let exact = exact_cell_means(k, &grid, t)?;
        let sup_err = u
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push(SolverComparison { t, sup_err });
        Ok(())
    })?;
    Ok(out)
}

/// Grid solution from piecewise-constant data compared with the cosine
/// expansion of the same data.
pub fn fourier_vs_solver(
    k: &Kernels,
    grid: &Grid,
    u0: &[f64],
    d: f64,
    times: &[f64],
    dt: f64,
) -> Result<Vec<SolverComparison>> {
    let prof = FourierProfile::from_cells(k.domain, &grid.faces, u0, k.policy.max_terms)?;
    let mut out = Vec::new();
    march(grid, u0.to_vec(), d, 0.0, times, dt, |t, u| {
        let mut sup_err = 0.0f64;
        for (i, f) in grid.faces.windows(2).enumerate() {
            sup_err = sup_err.max((prof.cell_average(f[0], f[1], t, d, 0.0)? - u[i]).abs());
        }
        out.push(SolverComparison { t, sup_err });
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ThresholdDomain, TruncationPolicy};

    fn kern() -> Kernels {
        Kernels::new(
            ThresholdDomain::new(0.05, 0.25).unwrap(),
            TruncationPolicy::default(),
        )
    }

    #[test]
    fn kernel_and_grid_agree() {
        let r = kernel_vs_solver(&kern(), 1000, 1e-3, &[0.01, 0.05], 2e-5).unwrap();
        for c in &r {
            assert!(c.sup_err < 1e-4, "{c:?}");
        }
    }

    #[test]
    fn times_must_increase() {
        assert!(kernel_vs_solver(&kern(), 100, 1e-3, &[0.05, 0.01], 1e-4).is_err());
    }
}
