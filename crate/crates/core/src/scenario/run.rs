//! The closed-loop simulation.

use nalgebra::DVector;
use serde::Serialize;

use super::config::{ControlMode, Scenario};
use super::signals::reference_at;
use crate::control::{allocate, compute_error, compute_outputs, gsta_step, GstaGains};
use crate::diffusion::{h0_norm, mean_over, BoundaryKind, DiffusionSolver, PressureState, Scope};
use crate::error::{Error, Result};
use crate::mesh::ScalarField;
use crate::seismicity::{sr_field, step_sr, SrState};

/// Constants of the run needed to post-process a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub name: String,
    pub mode: ControlMode,
    pub bc: BoundaryKind,
    pub beta: f64,
    pub beta0: f64,
    /// Total active volume [km²].
    pub volume: f64,
    pub extent: (f64, f64),
    pub cell_area: f64,
    pub n_active: usize,
    pub dt: f64,
    pub dt_c: f64,
    pub substeps: usize,
    pub m_u: usize,
    pub m_r: usize,
    pub n_wells: usize,
    pub n_demand: usize,
    pub gamma1_0_rstar_0: f64,
    pub c_min: f64,
    pub gamma1_max: f64,
    pub gamma2_min: f64,
    pub gamma2_max: f64,
    pub r_star_max: f64,
    /// Volume-averaged background rate; the background event line is this × t.
    pub r_star_mean: f64,
    pub saturation: Option<f64>,
    pub min_well_volume: f64,
    #[serde(skip)]
    pub gains: Option<GstaGains>,
}

/// Samples at every control instant t_k = k·dt_c, k = 0..=periods. Q, D and
/// W·Q at sample k are the values held over [t_k, t_{k+1}); per-step
/// diagnostics at sample k describe the step that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub t: Vec<f64>,
    pub y_u: Vec<Vec<f64>>,
    pub y_r: Vec<Vec<f64>>,
    pub r_u: Vec<Vec<f64>>,
    pub r_r: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub demand: Vec<Vec<f64>>,
    pub wq: Vec<Vec<f64>>,
    pub mean_pressure: Vec<f64>,
    pub mean_sr: Vec<f64>,
    pub events: Vec<f64>,
    pub u_norm: Vec<f64>,
    pub ut_norm: Vec<f64>,
    /// ‖(u_t(t_k) − u_t(t_{k−1}))/dt_c‖, a difference estimate of ‖u_tt‖.
    pub utt_norm: Vec<f64>,
    pub max_abs_ut: Vec<f64>,
    pub max_abs_log_r: Vec<f64>,
    pub min_r: Vec<f64>,
    pub mass_residual: Vec<f64>,
    pub cg_iterations: Vec<usize>,
}

impl RunRecord {
    pub fn empty(meta: RunMeta) -> Self {
        RunRecord {
            meta,
            t: vec![],
            y_u: vec![],
            y_r: vec![],
            r_u: vec![],
            r_r: vec![],
            sigma: vec![],
            nu: vec![],
            q: vec![],
            demand: vec![],
            wq: vec![],
            mean_pressure: vec![],
            mean_sr: vec![],
            events: vec![],
            u_norm: vec![],
            ut_norm: vec![],
            utt_norm: vec![],
            max_abs_ut: vec![],
            max_abs_log_r: vec![],
            min_r: vec![],
            mass_residual: vec![],
            cg_iterations: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    /// Background event count R*·t at every sample.
    pub fn background_events(&self) -> Vec<f64> {
        self.t.iter().map(|t| self.meta.r_star_mean * t).collect()
    }

    /// Largest |W·Q − D| relative to max(1, ‖D‖∞) over the run.
    pub fn demand_mismatch(&self) -> f64 {
        self.wq
            .iter()
            .zip(&self.demand)
            .map(|(wq, d)| {
                let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                wq.iter().zip(d).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
            })
            .fold(0.0, f64::max)
    }
}

fn abort(step: usize, t: f64, e: impl ToString) -> Error {
    Error::Aborted {
        step,
        t,
        reason: e.to_string(),
    }
}

pub fn run(scenario: &Scenario) -> Result<RunRecord> {
    run_mode(scenario, scenario.controller.mode)
}

/// Runs the scenario with the control mode replaced.
pub fn run_mode(scenario: &Scenario, mode: ControlMode) -> Result<RunRecord> {
    let sc = scenario;
    let grid = &sc.grid;
    let sched = sc.schedule;
    let mut solver = DiffusionSolver::new(grid, &sc.diffusion)?;
    let mut ctrl = sc.controller_state()?;
    let gains = sc.controller.gains;
    let w = sc.controller.w.clone();
    let n = sc.wells.len();

    let meta = RunMeta {
        name: sc.name.clone(),
        mode,
        bc: sc.diffusion.bc,
        beta: sc.diffusion.beta,
        beta0: sc.controller.beta0,
        volume: grid.total_volume(),
        extent: grid.extent(),
        cell_area: grid.cell_area(),
        n_active: grid.n_active(),
        dt: sched.dt,
        dt_c: sched.dt_c,
        substeps: sched.substeps,
        m_u: sc.map.m_u(),
        m_r: sc.map.m_r(),
        n_wells: n,
        n_demand: sc.demand.as_ref().map_or(0, |d| d.rows()),
        gamma1_0_rstar_0: sc.map.gamma1_0_rstar_0,
        c_min: sc.diffusion.c_min(),
        gamma1_max: sc.sr.bounds.gamma1_max,
        gamma2_min: sc.sr.bounds.gamma2_min,
        gamma2_max: sc.sr.bounds.gamma2_max,
        r_star_max: sc.sr.bounds.r_star_max,
        r_star_mean: mean_over(&sc.sr.r_star, Scope::Whole)?,
        saturation: sc.controller.saturation,
        min_well_volume: sc.wells.min_support_volume().unwrap_or(0.0),
        gains: Some(gains),
    };
    let mut rec = RunRecord::empty(meta);

    let mut p = PressureState::zeros(grid);
    let mut s = SrState::from_rates(&sc.r0)?;
    let mut r_field = sr_field(&s);
    let (y_u0, y_r0) = compute_outputs(&p.u, &r_field, &sc.map)?;
    let mut events = 0.0;
    let mut ut_prev = p.u_t.clone();
    let (mut mass_res, mut cg_its) = (0.0, 0usize);

    for k in 0..=sched.periods {
        let t = k as f64 * sched.dt_c;
        let (y_u, y_r) = compute_outputs(&p.u, &r_field, &sc.map)?;
        let r_u = sc
            .references
            .pressure
            .iter()
            .zip(&y_u0)
            .map(|(spec, y0)| reference_at(spec, *y0, t))
            .collect::<Result<Vec<_>>>()?;
        let r_r = sc
            .references
            .sr
            .iter()
            .zip(&y_r0)
            .map(|(spec, y0)| reference_at(spec, *y0, t))
            .collect::<Result<Vec<_>>>()?;
        let sigma = compute_error(&y_u, &y_r, &r_u, &r_r, &sc.map);
        let d = sc.demand.as_ref().map(|d| d.demand_at(t));

        let nu_now = ctrl.nu.clone();
        let q = match mode {
            ControlMode::Off => Ok(vec![0.0; n]),
            ControlMode::DemandOnly => allocate(&vec![0.0; ctrl.m()], &ctrl, d.as_deref()),
            ControlMode::ClosedLoop => {
                ctrl.sigma = sigma.clone();
                let v = gsta_step(&mut ctrl, &gains, sched.dt_c);
                allocate(&v, &ctrl, d.as_deref())
            }
        }
        .map_err(|e| abort(k, t, e))?;
        if let Some((j, qj)) = q.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(abort(k, t, format!("non-finite rate {qj} at well {j}")));
        }
        if let Some(l_q) = sc.controller.saturation {
            let q_norm = crate::control::norm(&q);
            if q_norm > l_q {
                return Err(abort(
                    k,
                    t,
                    format!("|Q| = {q_norm:.6e} exceeds saturation L_Q = {l_q}"),
                ));
            }
        }
        let wq = match &w {
            Some(w) => (w * DVector::from_column_slice(&q)).iter().copied().collect(),
            None => vec![],
        };

        let mean_sr = mean_over(&r_field, Scope::Whole)?;
        if let Some(prev) = rec.mean_sr.last() {
            events += 0.5 * sched.dt_c * (prev + mean_sr);
        }
        rec.t.push(t);
        rec.y_u.push(y_u);
        rec.y_r.push(y_r);
        rec.r_u.push(r_u);
        rec.r_r.push(r_r);
        rec.sigma.push(sigma);
        rec.nu.push(nu_now);
        rec.demand.push(d.unwrap_or_default());
        rec.wq.push(wq);
        rec.mean_pressure.push(mean_over(&p.u, Scope::Whole)?);
        rec.mean_sr.push(mean_sr);
        rec.events.push(events);
        rec.u_norm.push(h0_norm(&p.u, grid));
        rec.ut_norm.push(h0_norm(&p.u_t, grid));
        let utt = ScalarField(
            p.u_t
                .iter()
                .zip(ut_prev.iter())
                .map(|(a, b)| (a - b) / sched.dt_c)
                .collect(),
        );
        rec.utt_norm.push(h0_norm(&utt, grid));
        ut_prev = p.u_t.clone();
        rec.max_abs_ut.push(p.u_t.iter().fold(0.0, |m, v| m.max(v.abs())));
        rec.max_abs_log_r.push(s.log_r.iter().fold(0.0, |m, v| m.max(v.abs())));
        rec.min_r.push(r_field.iter().copied().fold(f64::INFINITY, f64::min));
        rec.mass_residual.push(mass_res);
        rec.cg_iterations.push(cg_its);

        if k == sched.periods {
            rec.q.push(q);
            break;
        }
        mass_res = 0.0;
        cg_its = 0;
        for sub in 0..sched.substeps {
            let ts = t + sub as f64 * sched.dt;
            let (next, diag) = solver.step(&p, &sc.wells, &q, sched.dt).map_err(|e| abort(k, ts, e))?;
            s = step_sr(&s, &sc.sr, &next.u_t, sched.dt).map_err(|e| abort(k, ts, e))?;
            p = next;
            mass_res = f64::max(mass_res, diag.mass_balance_residual);
            cg_its += diag.cg_iterations;
        }
        rec.q.push(q);
        r_field = sr_field(&s);
        if let Some(bad) = r_field.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(abort(
                k + 1,
                t + sched.dt_c,
                format!("seismicity rate {} at cell {bad}", r_field[bad]),
            ));
        }
    }
    Ok(rec)
}

/// Runs the scenario in each of `modes`, one run per worker thread.
pub fn run_many(scenario: &Scenario, modes: &[ControlMode]) -> Vec<Result<RunRecord>> {
    crate::par::map_jobs(modes.to_vec(), |mode| run_mode(scenario, mode))
}
