//! Conservative theta-scheme for `u_t = D u_xx` with zero-flux ends.

use super::grid::Grid;

/// One step of `(H - θ dt K) u' = (H + (1-θ) dt K) u`, where `H` holds the
/// cell widths and `K` is the symmetric flux matrix with zero column sums.
pub fn theta_step(grid: &Grid, u: &[f64], d: f64, dt: f64, theta: f64) -> Vec<f64> {
    let n = grid.len();
    let h = &grid.widths;
    let c = &grid.centers;
    // conductances between neighbouring cells
    let k: Vec<f64> = (0..n - 1).map(|i| d / (c[i + 1] - c[i])).collect();
    let flux = |i: usize| -> f64 {
        let mut f = 0.0;
        if i > 0 {
            f += k[i - 1] * (u[i - 1] - u[i]);
        }
        if i + 1 < n {
            f += k[i] * (u[i + 1] - u[i]);
        }
        f
    };
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| h[i] * u[i] + (1.0 - theta) * dt * flux(i))
        .collect();
    let a = theta * dt;
    // tridiagonal: sub[i] couples i to i-1, sup[i] couples i to i+1
    let mut diag: Vec<f64> = (0..n)
        .map(|i| {
            let mut s = h[i];
            if i > 0 {
                s += a * k[i - 1];
            }
            if i + 1 < n {
                s += a * k[i];
            }
            s
        })
        .collect();
    let off: Vec<f64> = k.iter().map(|&ki| -a * ki).collect();
    // Thomas elimination
    for i in 1..n {
        let m = off[i - 1] / diag[i - 1];
        diag[i] -= m * off[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut out = vec![0.0; n];
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = (rhs[i] - off[i] * out[i + 1]) / diag[i];
    }
    out
}

/// Crank–Nicolson step.
pub fn crank_nicolson(grid: &Grid, u: &[f64], d: f64, dt: f64) -> Vec<f64> {
    theta_step(grid, u, d, dt, 0.5)
}

/// Backward Euler step, used to damp rough initial data.
pub fn implicit_euler(grid: &Grid, u: &[f64], d: f64, dt: f64) -> Vec<f64> {
    theta_step(grid, u, d, dt, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_equilibrium() {
        let g = Grid::graded(0.05, 0.25, 500, 4.0).unwrap();
        let u = vec![5.0; 500];
        let out = crank_nicolson(&g, &u, 1e-3, 0.1);
        let worst = out.iter().map(|v| (v - 5.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst:e}");
    }

    #[test]
    fn spike_mass_conserved() {
        let g = Grid::graded(0.05, 0.25, 4000, 4.0).unwrap();
        let mut u = vec![0.0; 4000];
        u[3999] = 1.0 / g.widths[3999];
        let mut m0 = g.mass(&u);
        for _ in 0..50 {
            u = crank_nicolson(&g, &u, 1e-5, 0.01);
            let m = g.mass(&u);
            assert!((m - m0).abs() <= 1e-13);
            m0 = m;
        }
    }
}
