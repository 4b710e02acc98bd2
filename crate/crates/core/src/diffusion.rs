//! Pressure-change diffusion with well sources.
//!
//! Cell-centered finite volumes on the active mask with a 5-point flux
//! stencil and harmonic-mean face mobility, advanced by a θ-scheme
//! (backward Euler by default). Each cell balances
//!
//! ```text
//! β A du/dt = Σ_faces T (u_nb − u) + A Σ_i B_i Q_i
//! ```
//!
//! where `A` is the cell area and `T` the face transmissibility of mobility
//! `κ = β c_hy`. Faces on the mask boundary carry no flux (Neumann) or hold
//! `u = 0` through a mirrored ghost value (Dirichlet).

use crate::error::{check_finite, Error, Result};
use crate::mesh::{DomainGrid, Region, ScalarField, WellSet};
use crate::par;

/// Hours in the 365-day year used as the internal time unit.
pub const HOURS_PER_YEAR: f64 = 8760.0;

pub fn km2_per_hr_to_km2_per_yr(c: f64) -> f64 {
    c * HOURS_PER_YEAR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    #[default]
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionParams {
    /// Mixture compressibility β [1/MPa].
    pub beta: f64,
    /// Hydraulic diffusivity per active cell [km²/yr].
    pub c_hy: ScalarField,
    pub bc: BoundaryKind,
    /// Implicitness: 1 = backward Euler, 0.5 = Crank–Nicolson.
    pub theta: f64,
}

impl DiffusionParams {
    pub fn uniform(grid: &DomainGrid, beta: f64, c_hy: f64, bc: BoundaryKind) -> Self {
        DiffusionParams {
            beta,
            c_hy: ScalarField::constant(grid, c_hy),
            bc,
            theta: 1.0,
        }
    }

    pub fn validate(&self, grid: &DomainGrid) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::NonPositive("beta"));
        }
        if self.c_hy.len() != grid.n_active() {
            return Err(Error::Dimension(format!(
                "diffusivity field has {} values for {} active cells",
                self.c_hy.len(),
                grid.n_active()
            )));
        }
        if self.c_hy.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::NonPositive("hydraulic diffusivity"));
        }
        if !(self.theta >= 0.5 && self.theta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0.5, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn c_min(&self) -> f64 {
        self.c_hy.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureState {
    /// Pressure change u [MPa].
    pub u: ScalarField,
    /// Backward-difference rate u_t [MPa/yr] of the last step.
    pub u_t: ScalarField,
    /// Time [yr].
    pub t: f64,
}

impl PressureState {
    pub fn zeros(grid: &DomainGrid) -> Self {
        PressureState {
            u: ScalarField::zeros(grid),
            u_t: ScalarField::zeros(grid),
            t: 0.0,
        }
    }

    pub fn from_field(u: ScalarField, grid: &DomainGrid) -> Self {
        PressureState {
            u,
            u_t: ScalarField::zeros(grid),
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepDiagnostics {
    pub cg_iterations: usize,
    pub relative_residual: f64,
    /// |ū_new − ū_old − dt ΣQ/(βV)| after the step (Neumann only, else 0).
    pub mass_balance_residual: f64,
}

const NONE: usize = usize::MAX;

/// Relative residual at which the conjugate-gradient solve stops.
pub const CG_TOLERANCE: f64 = 1e-10;

/// Assembled stencil plus solver scratch space for one grid/parameter set.
#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    beta: f64,
    theta: f64,
    bc: BoundaryKind,
    area: f64,
    volume: f64,
    // per active cell: neighbour indices (W, E, S, N) and transmissibilities
    nb: Vec<[usize; 4]>,
    trans: Vec<[f64; 4]>,
    // Σ transmissibilities incl. Dirichlet ghost faces
    diag: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    rhs: Vec<f64>,
}

impl DiffusionSolver {
    pub fn new(grid: &DomainGrid, params: &DiffusionParams) -> Result<Self> {
        params.validate(grid)?;
        let n = grid.n_active();
        let (dx, dy) = (grid.dx(), grid.dy());
        let kappa: Vec<f64> = params.c_hy.iter().map(|c| params.beta * c).collect();
        let harmonic = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let mut nb = Vec::with_capacity(n);
        let mut trans = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        for k in 0..n {
            let ngh = grid.neighbours(k);
            // face length over center distance for W, E, S, N
            let geom = [dy / dx, dy / dx, dx / dy, dx / dy];
            let mut ids = [NONE; 4];
            let mut t = [0.0; 4];
            let mut d = 0.0;
            for (f, other) in [ngh.west, ngh.east, ngh.south, ngh.north].into_iter().enumerate() {
                match other {
                    Some(o) => {
                        ids[f] = o;
                        t[f] = harmonic(kappa[k], kappa[o]) * geom[f];
                        d += t[f];
                    }
                    None => {
                        if params.bc == BoundaryKind::Dirichlet {
                            d += 2.0 * kappa[k] * geom[f];
                        }
                    }
                }
            }
            nb.push(ids);
            trans.push(t);
            diag.push(d);
        }
        Ok(DiffusionSolver {
            beta: params.beta,
            theta: params.theta,
            bc: params.bc,
            area: grid.cell_area(),
            volume: grid.total_volume(),
            nb,
            trans,
            diag,
            r: vec![0.0; n],
            z: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
            rhs: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.bc
    }

    /// out = L x, the (symmetric, positive semi-definite) flux operator.
    fn apply_laplacian(&self, x: &[f64], out: &mut [f64]) {
        let (nb, trans, diag) = (&self.nb, &self.trans, &self.diag);
        par::for_each_indexed(out, |k, o| {
            let mut acc = diag[k] * x[k];
            for f in 0..4 {
                let j = nb[k][f];
                if j != NONE {
                    acc -= trans[k][f] * x[j];
                }
            }
            *o = acc;
        });
    }

    /// out = (I + c L) x with c = θ dt / (β A).
    fn apply_system(&self, c: f64, x: &[f64], out: &mut [f64]) {
        let (nb, trans, diag) = (&self.nb, &self.trans, &self.diag);
        par::for_each_indexed(out, |k, o| {
            let mut acc = diag[k] * x[k];
            for f in 0..4 {
                let j = nb[k][f];
                if j != NONE {
                    acc -= trans[k][f] * x[j];
                }
            }
            *o = x[k] + c * acc;
        });
    }

    /// Advances one step of length `dt` with well rates `rates` held constant.
    pub fn step(
        &mut self,
        state: &PressureState,
        wells: &WellSet,
        rates: &[f64],
        dt: f64,
    ) -> Result<(PressureState, StepDiagnostics)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::NonPositive("dt"));
        }
        let n = self.n();
        if state.u.len() != n {
            return Err(Error::Dimension(format!(
                "pressure field has {} values for {n} active cells",
                state.u.len()
            )));
        }
        if rates.len() != wells.len() {
            return Err(Error::Dimension(format!(
                "{} well rates for {} wells",
                rates.len(),
                wells.len()
            )));
        }
        check_finite("pressure field", state.u.as_slice())?;
        check_finite("well rates", rates)?;

        let u_old = state.u.as_slice();
        let scale = self.beta * self.area;
        let c_impl = self.theta * dt / scale;
        let c_expl = (1.0 - self.theta) * dt / scale;
        let source = wells.source_density(n, rates);

        // rhs = u_old − (1−θ) dt L u_old / (βA) + dt s / β
        let mut lu = std::mem::take(&mut self.rhs);
        if c_expl > 0.0 {
            self.apply_laplacian(u_old, &mut lu);
        } else {
            lu.iter_mut().for_each(|v| *v = 0.0);
        }
        let beta = self.beta;
        par::for_each_indexed(&mut lu, |k, v| {
            *v = u_old[k] - c_expl * *v + dt * source[k] / beta;
        });
        let rhs = lu;

        let mut x: Vec<f64> = u_old.to_vec();
        let (iterations, residual) = self.pcg(c_impl, &rhs, &mut x)?;
        self.rhs = rhs;

        let mut mass_residual = 0.0;
        if self.bc == BoundaryKind::Neumann {
            let mean_old = par::sum(u_old) / n as f64;
            let target = mean_old + dt * rates.iter().sum::<f64>() / (self.beta * self.volume);
            // shift by a constant: L·1 = 0, so the linear residual is unchanged
            for _ in 0..2 {
                let shift = target - par::sum(&x) / n as f64;
                x.iter_mut().for_each(|v| *v += shift);
            }
            mass_residual = (par::sum(&x) / n as f64 - target).abs();
        }
        check_finite("updated pressure field", &x)?;

        let u_t: Vec<f64> = x.iter().zip(u_old).map(|(a, b)| (a - b) / dt).collect();
        Ok((
            PressureState {
                u: ScalarField(x),
                u_t: ScalarField(u_t),
                t: state.t + dt,
            },
            StepDiagnostics {
                cg_iterations: iterations,
                relative_residual: residual,
                mass_balance_residual: mass_residual,
            },
        ))
    }

    /// Jacobi-preconditioned conjugate gradient on (I + c L) x = b.
    fn pcg(&mut self, c: f64, b: &[f64], x: &mut [f64]) -> Result<(usize, f64)> {
        let n = self.n();
        let b_norm = par::dot(b, b).sqrt();
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok((0, 0.0));
        }
        let mut r = std::mem::take(&mut self.r);
        let mut z = std::mem::take(&mut self.z);
        let mut p = std::mem::take(&mut self.p);
        let mut ap = std::mem::take(&mut self.ap);
        let inv_diag: Vec<f64> = self.diag.iter().map(|d| 1.0 / (1.0 + c * d)).collect();

        self.apply_system(c, x, &mut ap);
        par::for_each_indexed(&mut r, |k, v| *v = b[k] - ap[k]);
        par::for_each_indexed(&mut z, |k, v| *v = inv_diag[k] * r[k]);
        p.copy_from_slice(&z);
        let mut rz = par::dot(&r, &z);
        let mut res = par::dot(&r, &r).sqrt() / b_norm;
        let max_iter = 10 * n;
        let mut it = 0;
        while res > CG_TOLERANCE {
            if it >= max_iter {
                self.r = r;
                self.z = z;
                self.p = p;
                self.ap = ap;
                return Err(Error::SolverDiverged {
                    iterations: it,
                    residual: res,
                });
            }
            self.apply_system(c, &p, &mut ap);
            let pap = par::dot(&p, &ap);
            let alpha = rz / pap;
            par::for_each_indexed(x, |k, v| *v += alpha * p[k]);
            par::for_each_indexed(&mut r, |k, v| *v -= alpha * ap[k]);
            par::for_each_indexed(&mut z, |k, v| *v = inv_diag[k] * r[k]);
            let rz_new = par::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            par::for_each_indexed(&mut p, |k, v| *v = z[k] + beta * *v);
            res = par::dot(&r, &r).sqrt() / b_norm;
            it += 1;
        }
        self.r = r;
        self.z = z;
        self.p = p;
        self.ap = ap;
        Ok((it, res))
    }
}

/// One-shot convenience wrapper that assembles the stencil for each call.
pub fn step_diffusion(
    state: &PressureState,
    params: &DiffusionParams,
    grid: &DomainGrid,
    wells: &WellSet,
    rates: &[f64],
    dt: f64,
) -> Result<PressureState> {
    let mut solver = DiffusionSolver::new(grid, params)?;
    solver.step(state, wells, rates, dt).map(|(s, _)| s)
}

/// Discrete H⁰ (L²) norm: sqrt(Σ f² A).
pub fn h0_norm(field: &ScalarField, grid: &DomainGrid) -> f64 {
    (par::dot(field.as_slice(), field.as_slice()) * grid.cell_area()).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub enum Scope<'a> {
    Whole,
    Region(&'a Region),
    Cells(&'a [usize]),
}

/// Volume average of a field over the whole grid or a set of active cells.
pub fn mean_over(field: &ScalarField, scope: Scope<'_>) -> Result<f64> {
    let cells = match scope {
        Scope::Whole => {
            if field.is_empty() {
                return Err(Error::EmptyRegion);
            }
            return Ok(par::sum(field.as_slice()) / field.len() as f64);
        }
        Scope::Region(r) => r.active_indices(),
        Scope::Cells(c) => c,
    };
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    // uniform cell area: the area weights cancel
    let mut total = 0.0;
    for &k in cells {
        total += field[k];
    }
    Ok(total / cells.len() as f64)
}
