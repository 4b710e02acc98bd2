//! Post-processing of run records: convergence detection, conservation and
//! bound checks, and CSV / JSON output.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::control::norm;
use crate::diffusion::BoundaryKind;
use crate::error::{Error, Result};
use crate::scenario::RunRecord;
use crate::seismicity::{log_rate_bound, SrBounds};

/// Relative tolerance of the discrete mass balance, scaled by max(1, |ū|).
pub const MASS_BALANCE_TOLERANCE: f64 = 1e-12;

/// ‖σ(t_k)‖ at every sample.
pub fn error_norm_series(record: &RunRecord) -> Vec<f64> {
    record.sigma.iter().map(|s| norm(s)).collect()
}

/// Earliest sample time t_i with `values[j] < threshold` for every t_j in
/// [t_i, t_i + hold]. The whole window must lie inside the series; an
/// infinite `hold` means "until the last sample". `None` if no such time.
pub fn detect_convergence(t: &[f64], values: &[f64], threshold: f64, hold: f64) -> Option<f64> {
    let n = t.len().min(values.len());
    if n == 0 || hold.is_nan() || hold < 0.0 {
        return None;
    }
    let t_last = t[n - 1];
    let mut next_bad: Option<usize> = None;
    let mut found = None;
    for i in (0..n).rev() {
        // NaN counts as a violation
        if !(values[i] < threshold) {
            next_bad = Some(i);
            continue;
        }
        let ok = if hold.is_infinite() {
            next_bad.is_none()
        } else {
            t[i] + hold <= t_last && next_bad.is_none_or(|j| t[j] > t[i] + hold)
        };
        if ok {
            found = Some(t[i]);
        }
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Pass,
    Fail,
    /// The check does not apply to this run (e.g. mass balance under Dirichlet).
    NotApplicable,
    /// The declared inputs contradict the measured ones.
    InconsistentInputs,
    /// An estimate, reported without a verdict.
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub quantity: String,
    pub measured_max: f64,
    pub bound: f64,
    /// Largest measured/bound ratio over the run.
    pub ratio: f64,
    pub status: BoundStatus,
    pub inputs: BTreeMap<String, f64>,
    pub note: String,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        matches!(
            self.status,
            BoundStatus::Pass | BoundStatus::NotApplicable | BoundStatus::Estimate
        )
    }
}

/// Checks ū(t_{k+1}) − ū(t_k) = dt_c ΣQ_k / (βV) on the recorded samples.
pub fn verify_mass_balance(record: &RunRecord) -> BoundReport {
    let m = &record.meta;
    let mut inputs = BTreeMap::new();
    inputs.insert("beta".into(), m.beta);
    inputs.insert("volume".into(), m.volume);
    inputs.insert("dt_c".into(), m.dt_c);
    if m.bc != BoundaryKind::Neumann {
        return BoundReport {
            quantity: "mass_balance".into(),
            measured_max: 0.0,
            bound: MASS_BALANCE_TOLERANCE,
            ratio: 0.0,
            status: BoundStatus::NotApplicable,
            inputs,
            note: "not applicable: Dirichlet boundary exchanges fluid with the surroundings".into(),
        };
    }
    let mut worst = 0.0f64;
    for k in 0..record.len().saturating_sub(1) {
        let u0 = record.mean_pressure[k];
        let q: f64 = record.q[k].iter().sum();
        let expect = u0 + m.dt_c * q / (m.beta * m.volume);
        let r = (record.mean_pressure[k + 1] - expect).abs() / u0.abs().max(1.0);
        worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
    }
    BoundReport {
        quantity: "mass_balance".into(),
        measured_max: worst,
        bound: MASS_BALANCE_TOLERANCE,
        ratio: worst / MASS_BALANCE_TOLERANCE,
        status: if worst <= MASS_BALANCE_TOLERANCE {
            BoundStatus::Pass
        } else {
            BoundStatus::Fail
        },
        inputs,
        note: format!("{} control periods", record.len().saturating_sub(1)),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EissParams {
    /// Poincaré-type length scale; defaults to max(Lx, Ly)/π.
    pub epsilon: Option<f64>,
    /// Declared bound on ‖Q‖; the measured one is used when absent.
    pub declared_l_q: Option<f64>,
}

/// Measured input bounds: L_Q = max‖Q‖, L_Q̇ and L_Q̈ from backward
/// differences at dt_c with Q = 0 before the start.
pub fn input_bounds(record: &RunRecord) -> (f64, f64, f64) {
    let dt = record.meta.dt_c;
    let zero = vec![0.0; record.meta.n_wells];
    let (mut l0, mut l1, mut l2) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..record.q.len() {
        let q0 = &record.q[k];
        let q1 = if k >= 1 { &record.q[k - 1] } else { &zero };
        let q2 = if k >= 2 { &record.q[k - 2] } else { &zero };
        l0 = l0.max(norm(q0));
        let d1: Vec<f64> = q0.iter().zip(q1).map(|(a, b)| a - b).collect();
        l1 = l1.max(norm(&d1) / dt);
        let d2: Vec<f64> = (0..q0.len()).map(|i| q0[i] - 2.0 * q1[i] + q2[i]).collect();
        l2 = l2.max(norm(&d2) / (dt * dt));
    }
    (l0, l1, l2)
}

/// Checks ‖u‖, ‖u_t‖ and max|ln R| against their input-to-state bounds and
/// reports the ‖u_tt‖ estimate.
pub fn verify_eiss(record: &RunRecord, params: &EissParams) -> Vec<BoundReport> {
    let m = &record.meta;
    let (lx, ly) = m.extent;
    let eps = params.epsilon.unwrap_or(lx.max(ly) / PI);
    let (l_q_meas, l_qd, l_qdd) = input_bounds(record);
    let inconsistent = params.declared_l_q.is_some_and(|d| d < l_q_meas);
    let l_q = params.declared_l_q.unwrap_or(l_q_meas).max(l_q_meas);
    let n = m.n_wells as f64;
    let v = m.volume;
    // 1/√V*_T = Σ_i (1/√V*_i − 1/√V); with equal supports this is n(1/√V*_min − 1/√V)
    let inv_sqrt_vt = n * (1.0 / m.min_well_volume.sqrt() - 1.0 / v.sqrt());
    let a = eps * eps * inv_sqrt_vt / (m.beta * m.c_min);
    let b = 1.0 / (m.beta * v.sqrt());
    let u0 = record.u_norm.first().copied().unwrap_or(0.0);
    let ubar0 = record.mean_pressure.first().copied().unwrap_or(0.0);

    let mut inputs = BTreeMap::new();
    inputs.insert("epsilon".into(), eps);
    inputs.insert("l_q".into(), l_q);
    inputs.insert("l_q_measured".into(), l_q_meas);
    inputs.insert("l_q_dot".into(), l_qd);
    inputs.insert("l_q_ddot".into(), l_qdd);
    inputs.insert("beta".into(), m.beta);
    inputs.insert("c_min".into(), m.c_min);
    inputs.insert("volume".into(), v);
    inputs.insert("inv_sqrt_vt".into(), inv_sqrt_vt);
    if let Some(d) = params.declared_l_q {
        inputs.insert("l_q_declared".into(), d);
    }

    let status = |ok: bool| {
        if inconsistent {
            BoundStatus::InconsistentInputs
        } else if ok {
            BoundStatus::Pass
        } else {
            BoundStatus::Fail
        }
    };
    let note = |s: &str| {
        if inconsistent {
            format!("inconsistent inputs: declared L_Q below measured {l_q_meas:.6e}; {s}")
        } else {
            s.to_string()
        }
    };

    // ‖u(t)‖ ≤ ‖u0‖ + 2√V|ū0| + (a + t b) √n L_Q
    let gamma_u = |t: f64| u0 + 2.0 * v.sqrt() * ubar0.abs() + (a + t * b) * n.sqrt() * l_q;
    let mut u_ratio = 0.0f64;
    let mut u_max = 0.0f64;
    for (t, un) in record.t.iter().zip(&record.u_norm) {
        u_max = u_max.max(*un);
        u_ratio = u_ratio.max(un / gamma_u(*t));
    }
    let u_rep = BoundReport {
        quantity: "u_norm".into(),
        measured_max: u_max,
        bound: gamma_u(record.last_time()),
        ratio: u_ratio,
        status: status(u_ratio <= 1.0),
        inputs: inputs.clone(),
        note: note("bound grows linearly in t"),
    };

    let gamma_ut = a * n.sqrt() * l_qd + n.sqrt() * l_q * b;
    let ut_max = record.ut_norm.iter().copied().fold(0.0, f64::max);
    let ut_rep = BoundReport {
        quantity: "ut_norm".into(),
        measured_max: ut_max,
        bound: gamma_ut,
        ratio: ut_max / gamma_ut,
        status: status(ut_max <= gamma_ut),
        inputs: inputs.clone(),
        note: note("uniform in t"),
    };

    let gamma_utt = a * n.sqrt() * l_qdd + n.sqrt() * l_qd * b;
    let utt_max = record.utt_norm.iter().copied().fold(0.0, f64::max);
    let utt_rep = BoundReport {
        quantity: "utt_norm".into(),
        measured_max: utt_max,
        bound: gamma_utt,
        ratio: utt_max / gamma_utt,
        status: BoundStatus::Estimate,
        inputs: inputs.clone(),
        note: "estimate: finite differences of Q at dt_c".into(),
    };

    let bounds = SrBounds {
        gamma1_min: 0.0,
        gamma1_max: m.gamma1_max,
        gamma2_min: m.gamma2_min,
        gamma2_max: m.gamma2_max,
        r_star_min: 0.0,
        r_star_max: m.r_star_max,
    };
    let h0 = record.max_abs_log_r.first().copied().unwrap_or(0.0);
    let c = record.max_abs_ut.iter().copied().fold(0.0, f64::max);
    let h_bound = log_rate_bound(h0, &bounds, c);
    let h_max = record.max_abs_log_r.iter().copied().fold(0.0, f64::max);
    let mut h_inputs = BTreeMap::new();
    h_inputs.insert("h0_abs_max".into(), h0);
    h_inputs.insert("max_abs_ut".into(), c);
    h_inputs.insert("gamma1_max".into(), m.gamma1_max);
    h_inputs.insert("gamma2_min".into(), m.gamma2_min);
    h_inputs.insert("r_star_max".into(), m.r_star_max);
    let h_rep = BoundReport {
        quantity: "max_abs_log_r".into(),
        measured_max: h_max,
        bound: h_bound,
        ratio: h_max / h_bound,
        status: if h_max <= h_bound {
            BoundStatus::Pass
        } else {
            BoundStatus::Fail
        },
        inputs: h_inputs,
        note: "cell-wise".into(),
    };
    vec![u_rep, ut_rep, utt_rep, h_rep]
}

/// Largest |y − r| over samples with t ≥ `t_from`, per output, relative to
/// the size of the reference move |r(end) − r(0)| (or |r| for constant
/// references, and 1 if that is zero).
pub fn tracking_errors(record: &RunRecord, t_from: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let groups = [(&record.y_u, &record.r_u), (&record.y_r, &record.r_r)];
    for (y, r) in groups {
        let width = r.first().map_or(0, |v| v.len());
        for i in 0..width {
            let r0 = r[0][i];
            let r1 = r[r.len() - 1][i];
            let mut scale = (r1 - r0).abs();
            if scale == 0.0 {
                scale = r1.abs();
            }
            if scale == 0.0 {
                scale = 1.0;
            }
            let worst = record
                .t
                .iter()
                .enumerate()
                .filter(|(_, t)| **t >= t_from)
                .map(|(k, _)| (y[k][i] - r[k][i]).abs())
                .fold(0.0, f64::max);
            out.push(worst / scale);
        }
    }
    out
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn fmt(v: f64) -> String {
    // shortest representation that parses back to the same bits
    v.to_string()
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes outputs.csv, controls.csv, demand.csv, error_norm.csv and
/// events_cumulative.csv into `out_dir`. An empty record gives header-only files.
pub fn emit_csv(record: &RunRecord, baseline: Option<&RunRecord>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let m = &record.meta;
    let mut files = Vec::new();
    let t = |k: usize| record.t[k];

    let path = out_dir.join("outputs.csv");
    let mut header = vec!["t_years".to_string()];
    header.extend(numbered("y_u", m.m_u));
    header.extend(numbered("r_u", m.m_u));
    header.extend(numbered("y_r", m.m_r));
    header.extend(numbered("r_r", m.m_r));
    write_table(
        &path,
        &header,
        (0..record.len()).map(|k| {
            let mut row = vec![t(k)];
            row.extend(&record.y_u[k]);
            row.extend(&record.r_u[k]);
            row.extend(&record.y_r[k]);
            row.extend(&record.r_r[k]);
            row
        }),
    )?;
    files.push(path);

    let path = out_dir.join("controls.csv");
    let mut header = vec!["t_years".to_string()];
    header.extend(numbered("q", m.n_wells));
    header.extend(numbered("nu", m.m_u + m.m_r));
    write_table(
        &path,
        &header,
        (0..record.len()).map(|k| {
            let mut row = vec![t(k)];
            row.extend(&record.q[k]);
            row.extend(&record.nu[k]);
            row
        }),
    )?;
    files.push(path);

    let path = out_dir.join("demand.csv");
    let mut header = vec!["t_years".to_string()];
    header.extend(numbered("d", m.n_demand));
    header.extend(numbered("wq", m.n_demand));
    write_table(
        &path,
        &header,
        (0..record.len()).map(|k| {
            let mut row = vec![t(k)];
            row.extend(&record.demand[k]);
            row.extend(&record.wq[k]);
            row
        }),
    )?;
    files.push(path);

    let path = out_dir.join("error_norm.csv");
    let mut header = vec!["t_years".to_string(), "error_norm".to_string()];
    header.extend(numbered("sigma", m.m_u + m.m_r));
    let norms = error_norm_series(record);
    write_table(
        &path,
        &header,
        (0..record.len()).map(|k| {
            let mut row = vec![t(k), norms[k]];
            row.extend(&record.sigma[k]);
            row
        }),
    )?;
    files.push(path);

    let path = out_dir.join("events_cumulative.csv");
    let mut header = vec!["t_years".to_string(), "controlled".to_string()];
    if baseline.is_some() {
        header.push("baseline".into());
    }
    header.push("background".into());
    let background = record.background_events();
    write_table(
        &path,
        &header,
        (0..record.len()).map(|k| {
            let mut row = vec![t(k), record.events[k]];
            if let Some(b) = baseline {
                row.push(b.events.get(k).copied().unwrap_or(f64::NAN));
            }
            row.push(background[k]);
            row
        }),
    )?;
    files.push(path);
    Ok(files)
}

/// Reads a numeric CSV written by [`emit_csv`] back into columns.
pub fn read_csv_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            c.push(field.parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("{field:?}: {e}"),
            })?);
        }
    }
    Ok((header, cols))
}

/// Summary written to report.json.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub mode: String,
    pub samples: usize,
    pub t_end: f64,
    pub events: f64,
    pub baseline_events: Option<f64>,
    pub background_events: f64,
    pub demand_mismatch: f64,
    pub final_error_norm: f64,
    pub convergence_time: Option<f64>,
    pub min_rate: f64,
    pub max_mass_residual: f64,
    pub cg_iterations: usize,
    pub assumptions: Vec<(String, bool, String)>,
    pub bounds: Vec<BoundReport>,
}

impl RunSummary {
    pub fn new(record: &RunRecord, baseline: Option<&RunRecord>, threshold: f64) -> Self {
        let norms = error_norm_series(record);
        let mut bounds = vec![verify_mass_balance(record)];
        bounds.extend(verify_eiss(record, &EissParams::default()));
        RunSummary {
            scenario: record.meta.name.clone(),
            mode: record.meta.mode.to_string(),
            samples: record.len(),
            t_end: record.last_time(),
            events: record.events.last().copied().unwrap_or(0.0),
            baseline_events: baseline.and_then(|b| b.events.last().copied()),
            background_events: record.background_events().last().copied().unwrap_or(0.0),
            demand_mismatch: record.demand_mismatch(),
            final_error_norm: norms.last().copied().unwrap_or(0.0),
            convergence_time: detect_convergence(&record.t, &norms, threshold, f64::INFINITY),
            min_rate: record.min_r.iter().copied().fold(f64::INFINITY, f64::min),
            max_mass_residual: record.mass_residual.iter().copied().fold(0.0, f64::max),
            cg_iterations: record.cg_iterations.iter().sum(),
            assumptions: vec![],
            bounds,
        }
    }
}

pub fn write_report(path: &Path, summary: &RunSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
