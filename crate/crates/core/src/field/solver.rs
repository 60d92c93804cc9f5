//! Finite-difference Laplace solver on a uniform grid.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::geometry::{ElectrodeGeometry2D, Plane, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the largest stencil residual, relative to
    /// the largest electrode potential magnitude.
    pub tol: f64,
    pub max_iterations: usize,
    /// Over-relaxation factor; `None` picks the rectangle optimum.
    pub omega: Option<f64>,
    /// Smallest electrode gap in cells.
    pub min_gap_cells: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 200_000,
            omega: None,
            min_gap_cells: 8.0,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Solved potential. Node (i, j) sits at `origin + h·(i, j)`, stored row
/// major in j.
#[derive(Debug, Clone)]
pub struct PotentialGrid {
    pub plane: Plane,
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub phi: Vec<f64>,
    pub fixed: Vec<bool>,
    pub residual: f64,
    pub iterations: usize,
}

impl PotentialGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + self.h * i as f64,
            self.origin[1] + self.h * j as f64,
        ]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.phi[self.index(i, j)]
    }

    pub fn is_fixed(&self, i: usize, j: usize) -> bool {
        self.fixed[self.index(i, j)]
    }

    /// Bilinear potential at an arbitrary point inside the grid.
    pub fn potential_at(&self, p: Point) -> Result<f64> {
        let (i, j, fx, fy) = self.cell(p)?;
        let v = |a, b| self.value(a, b);
        Ok((1.0 - fx) * (1.0 - fy) * v(i, j)
            + fx * (1.0 - fy) * v(i + 1, j)
            + (1.0 - fx) * fy * v(i, j + 1)
            + fx * fy * v(i + 1, j + 1))
    }

    /// Lower-left node of the cell holding `p` and the fractional offsets.
    pub(crate) fn cell(&self, p: Point) -> Result<(usize, usize, f64, f64)> {
        let gx = (p[0] - self.origin[0]) / self.h;
        let gy = (p[1] - self.origin[1]) / self.h;
        let max_x = (self.nx - 1) as f64;
        let max_y = (self.ny - 1) as f64;
        if !(gx >= 0.0 && gy >= 0.0 && gx <= max_x && gy <= max_y) {
            return Err(Error::Domain(format!(
                "point ({:.6e}, {:.6e}) outside the grid",
                p[0], p[1]
            )));
        }
        let i = (gx.floor() as usize).min(self.nx - 2);
        let j = (gy.floor() as usize).min(self.ny - 2);
        Ok((i, j, gx - i as f64, gy - j as f64))
    }

    /// Gridded text dump: one `x y phi fixed` line per node.
    pub fn write_field_map(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let axes = match self.plane {
            Plane::Transverse => "x_m y_m",
            Plane::Longitudinal => "x_m z_m",
        };
        let body = (|| -> std::io::Result<()> {
            writeln!(w, "# {axes} phi_V fixed")?;
            writeln!(w, "# nx={} ny={} h={:e}", self.nx, self.ny, self.h)?;
            for j in 0..self.ny {
                for i in 0..self.nx {
                    let p = self.node(i, j);
                    writeln!(
                        w,
                        "{:.9e} {:.9e} {:.12e} {}",
                        p[0],
                        p[1],
                        self.value(i, j),
                        u8::from(self.is_fixed(i, j))
                    )?;
                }
                writeln!(w)?;
            }
            w.flush()
        })();
        body.map_err(|e| Error::io(path, e))
    }
}

const NONE: usize = usize::MAX;

struct Stencil {
    node: usize,
    nbr: [usize; 4],
    coef: [f64; 4],
    constant: f64,
    inv_sum: f64,
}

impl Stencil {
    #[inline]
    fn average(&self, phi: &[f64]) -> f64 {
        let mut s = self.constant;
        for k in 0..4 {
            if self.nbr[k] != NONE {
                s += self.coef[k] * phi[self.nbr[k]];
            }
        }
        s * self.inv_sum
    }
}

/// Solves Laplace's equation for `geom` on spacing `h`.
///
/// Free nodes next to an electrode use the Shortley–Weller stencil with
/// the true distance to the electrode outline, so curved conductors are
/// not staircased. Mirror domain edges reflect the inward neighbour.
pub fn solve_potential(
    geom: &ElectrodeGeometry2D,
    h: f64,
    options: &SolverOptions,
) -> Result<PotentialGrid> {
    geom.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("grid spacing must be positive, got {h}")));
    }
    if !(options.tol > 0.0) {
        return Err(Error::Domain("solver tolerance must be positive".into()));
    }
    let gap = geom.min_gap();
    if gap.is_finite() && gap / h < options.min_gap_cells - 1e-9 {
        return Err(Error::Domain(format!(
            "spacing {h:e} m resolves the {gap:e} m gap with only {:.1} cells (need {})",
            gap / h,
            options.min_gap_cells
        )));
    }
    let (lo, hi) = (geom.domain.min, geom.domain.max);
    let nx = ((hi[0] - lo[0]) / h).round() as usize + 1;
    let ny = ((hi[1] - lo[1]) / h).round() as usize + 1;
    if nx < 5 || ny < 5 {
        return Err(Error::Domain("grid needs at least 5 nodes per axis".into()));
    }
    if nx.saturating_mul(ny) > 50_000_000 {
        return Err(Error::Domain(format!("grid of {nx}x{ny} nodes is too large")));
    }

    let conductors = geom.conductors();
    let n = nx * ny;
    let mut phi = vec![0.0; n];
    let mut fixed = vec![false; n];
    let mut owner = vec![NONE; n];
    let node = |i: usize, j: usize| [lo[0] + h * i as f64, lo[1] + h * j as f64];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if let Some(c) = conductors.iter().position(|c| c.covers(node(i, j), 1e-9 * h)) {
                fixed[k] = true;
                owner[k] = c;
                phi[k] = conductors[c].potential;
            } else if geom.grounded_boundary && (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) {
                fixed[k] = true;
            }
        }
    }

    let mut fixed_values: Vec<f64> = conductors.iter().map(|c| c.potential).collect();
    if geom.grounded_boundary {
        fixed_values.push(0.0);
    }
    let lo_v = fixed_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_v = fixed_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = if lo_v == hi_v { lo_v } else { 0.5 * (lo_v + hi_v) };
    for (v, f) in phi.iter_mut().zip(&fixed) {
        if !f {
            *v = start;
        }
    }

    let scale = conductors
        .iter()
        .map(|c| c.potential.abs())
        .fold(0.0, f64::max);
    let mut red = Vec::new();
    let mut black = Vec::new();
    // E, W, N, S
    let dirs: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if fixed[k] {
                continue;
            }
            let p = node(i, j);
            let mut arm = [h; 4];
            let mut target = [NONE; 4];
            let mut value = [0.0; 4];
            for (d, (di, dj)) in dirs.iter().enumerate() {
                let (mut ni, mut nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= nx as isize || nj >= ny as isize {
                    // mirror edge
                    ni = i as isize - di;
                    nj = j as isize - dj;
                }
                let nk = nj as usize * nx + ni as usize;
                if !fixed[nk] {
                    target[d] = nk;
                    continue;
                }
                value[d] = phi[nk];
                if owner[nk] != NONE {
                    let q = node(ni as usize, nj as usize);
                    if let Some(t) = conductors[owner[nk]].crossing(p, q) {
                        arm[d] = h * t.max(1e-6);
                    }
                }
            }
            let mut st = Stencil {
                node: k,
                nbr: [NONE; 4],
                coef: [0.0; 4],
                constant: 0.0,
                inv_sum: 0.0,
            };
            let mut sum = 0.0;
            for (a, b) in [(0, 1), (2, 3)] {
                let total = arm[a] + arm[b];
                for d in [a, b] {
                    let c = 2.0 * h * h / (arm[d] * total);
                    sum += c;
                    if target[d] == NONE {
                        st.constant += c * value[d];
                    } else {
                        st.coef[d] = c;
                        st.nbr[d] = target[d];
                    }
                }
            }
            st.inv_sum = 1.0 / sum;
            if (i + j) % 2 == 0 {
                red.push(st);
            } else {
                black.push(st);
            }
        }
    }

    let omega = options.omega.unwrap_or_else(|| {
        let rho = 0.5 * ((std::f64::consts::PI / nx as f64).cos() + (std::f64::consts::PI / ny as f64).cos());
        2.0 / (1.0 + (1.0 - rho * rho).sqrt())
    });
    if !(omega > 0.0 && omega < 2.0) {
        return Err(Error::Domain(format!("relaxation factor {omega} outside (0, 2)")));
    }

    let threshold = options.tol * scale.max(f64::MIN_POSITIVE);
    let residual = |phi: &[f64]| {
        red.iter()
            .chain(black.iter())
            .map(|s| (phi[s.node] - s.average(phi)).abs())
            .fold(0.0, f64::max)
    };
    let mut res = residual(&phi);
    let mut iterations = 0;
    while res > threshold {
        if iterations >= options.max_iterations {
            return Err(Error::NumericFailure(format!(
                "relaxation stopped after {iterations} sweeps with residual {res:.3e} V \
                 (target {threshold:.3e} V)"
            )));
        }
        for _ in 0..10 {
            for colour in [&red, &black] {
                for s in colour.iter() {
                    let avg = s.average(&phi);
                    phi[s.node] += omega * (avg - phi[s.node]);
                }
            }
        }
        iterations += 10;
        res = residual(&phi);
    }
    log::debug!("relaxation converged in {iterations} sweeps, residual {res:.3e}");

    Ok(PotentialGrid {
        plane: geom.plane,
        origin: lo,
        h,
        nx,
        ny,
        phi,
        fixed,
        residual: res,
        iterations,
    })
}
