//! Pointwise seismicity-rate model driven by the pressure rate.
//!
//! Each cell follows `R_t = R (−γ₁ u_t − γ₂ (R − R*))`. The state is kept as
//! `h = ln R`, which turns the update into
//! `h_t = −γ₁ u_t − γ₂ (e^h − R*)` and keeps `R = e^h` strictly positive.

use crate::error::{check_finite, Error, Result};
use crate::mesh::ScalarField;
use crate::par;

/// Known bounds on the uncertain SR parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrBounds {
    pub gamma1_min: f64,
    pub gamma1_max: f64,
    pub gamma2_min: f64,
    pub gamma2_max: f64,
    pub r_star_min: f64,
    pub r_star_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrParams {
    /// γ₁(x) [1/MPa].
    pub gamma1: ScalarField,
    /// γ₂ [1/events].
    pub gamma2: f64,
    /// Background rate R*(x) [events/yr].
    pub r_star: ScalarField,
    pub bounds: SrBounds,
}

impl SrParams {
    /// γ₁ = γ₁ᴹ d(x) for a density field normalized to max 1; bounds are
    /// taken from the data.
    pub fn from_density(density: &ScalarField, gamma1_max: f64, gamma2: f64, r_star: f64) -> Self {
        let gamma1 = ScalarField(density.iter().map(|d| gamma1_max * d).collect());
        let g1_min = gamma1.iter().copied().fold(f64::INFINITY, f64::min);
        SrParams {
            r_star: ScalarField(vec![r_star; density.len()]),
            gamma1,
            gamma2,
            bounds: SrBounds {
                gamma1_min: g1_min,
                gamma1_max,
                gamma2_min: gamma2,
                gamma2_max: gamma2,
                r_star_min: r_star,
                r_star_max: r_star,
            },
        }
    }

    /// Positivity and bound check of A3; returns the first violation.
    pub fn check_a3(&self) -> std::result::Result<(), String> {
        let b = &self.bounds;
        let positive = [
            ("gamma1_min", b.gamma1_min),
            ("gamma2_min", b.gamma2_min),
            ("r_star_min", b.r_star_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} = {v} must be strictly positive"));
            }
        }
        if b.gamma1_min > b.gamma1_max || b.gamma2_min > b.gamma2_max || b.r_star_min > b.r_star_max {
            return Err("inconsistent parameter bounds (min > max)".into());
        }
        if let Some((k, g)) = self
            .gamma1
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g >= b.gamma1_min && **g <= b.gamma1_max))
        {
            return Err(format!(
                "gamma1 = {g} at active cell {k} outside [{}, {}]",
                b.gamma1_min, b.gamma1_max
            ));
        }
        if !(self.gamma2 >= b.gamma2_min && self.gamma2 <= b.gamma2_max) {
            return Err(format!(
                "gamma2 = {} outside [{}, {}]",
                self.gamma2, b.gamma2_min, b.gamma2_max
            ));
        }
        if let Some((k, r)) = self
            .r_star
            .iter()
            .enumerate()
            .find(|(_, r)| !(**r >= b.r_star_min && **r <= b.r_star_max))
        {
            return Err(format!(
                "R* = {r} at active cell {k} outside [{}, {}]",
                b.r_star_min, b.r_star_max
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrState {
    /// h = ln R per active cell.
    pub log_r: ScalarField,
    pub t: f64,
}

impl SrState {
    pub fn at_background(params: &SrParams) -> Self {
        SrState {
            log_r: ScalarField(params.r_star.iter().map(|r| r.ln()).collect()),
            t: 0.0,
        }
    }

    pub fn from_rates(rates: &ScalarField) -> Result<Self> {
        if let Some((index, &value)) = rates.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::NegativeRate { index, value });
        }
        Ok(SrState {
            log_r: ScalarField(rates.iter().map(|r| r.ln()).collect()),
            t: 0.0,
        })
    }
}

/// Largest value of dt·γ₂·max(R, R*, R_eq) allowed for one RK4 sub-step.
pub const SUBSTEP_STIFFNESS: f64 = 0.1;

/// Right-hand side R_t of the rate equation.
pub fn sr_rate(r: f64, u_t: f64, gamma1: f64, gamma2: f64, r_star: f64) -> f64 {
    r * (-gamma1 * u_t - gamma2 * (r - r_star))
}

fn log_rhs(h: f64, forcing: f64, gamma2: f64, r_star: f64) -> f64 {
    forcing - gamma2 * (h.exp() - r_star)
}

fn rk4_cell(mut h: f64, u_t: f64, gamma1: f64, gamma2: f64, r_star: f64, dt: f64) -> f64 {
    let forcing = -gamma1 * u_t;
    // R moves monotonically towards R_eq = R* + forcing/γ₂, so this bounds R over the step
    let r_eq = r_star + forcing.max(0.0) / gamma2;
    let stiffness = dt * gamma2 * h.exp().max(r_star).max(r_eq);
    let n_sub = ((stiffness / SUBSTEP_STIFFNESS).ceil() as usize).max(1);
    let hs = dt / n_sub as f64;
    for _ in 0..n_sub {
        let k1 = log_rhs(h, forcing, gamma2, r_star);
        let k2 = log_rhs(h + 0.5 * hs * k1, forcing, gamma2, r_star);
        let k3 = log_rhs(h + 0.5 * hs * k2, forcing, gamma2, r_star);
        let k4 = log_rhs(h + hs * k3, forcing, gamma2, r_star);
        h += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    h
}

/// Advances the log-rate field by `dt` with `u_t` held constant.
pub fn step_sr(state: &SrState, params: &SrParams, u_t: &ScalarField, dt: f64) -> Result<SrState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonPositive("dt"));
    }
    if u_t.len() != state.log_r.len() || params.gamma1.len() != state.log_r.len() {
        return Err(Error::Dimension(format!(
            "u_t has {} values, state {} and gamma1 {}",
            u_t.len(),
            state.log_r.len(),
            params.gamma1.len()
        )));
    }
    check_finite("pressure rate", u_t.as_slice())?;
    let h0 = state.log_r.as_slice();
    let (g1, rs, ut) = (params.gamma1.as_slice(), params.r_star.as_slice(), u_t.as_slice());
    let gamma2 = params.gamma2;
    let mut h = vec![0.0; h0.len()];
    par::for_each_indexed(&mut h, |k, out| {
        *out = rk4_cell(h0[k], ut[k], g1[k], gamma2, rs[k], dt);
    });
    check_finite("log seismicity rate", &h)?;
    Ok(SrState {
        log_r: ScalarField(h),
        t: state.t + dt,
    })
}

/// R = exp(h) per cell.
pub fn sr_field(state: &SrState) -> ScalarField {
    ScalarField(state.log_r.iter().map(|h| h.exp()).collect())
}

/// Trapezoidal integral of a uniformly sampled mean-rate series [events].
pub fn cumulative_events(mean_sr: &[f64], dt: f64) -> Result<f64> {
    Ok(cumulative_events_series(mean_sr, dt)?.last().copied().unwrap_or(0.0))
}

/// Running trapezoidal integral; element `k` covers `[0, k dt]`.
pub fn cumulative_events_series(mean_sr: &[f64], dt: f64) -> Result<Vec<f64>> {
    if let Some((index, &value)) = mean_sr.iter().enumerate().find(|(_, r)| !(**r >= 0.0)) {
        return Err(Error::NegativeRate { index, value });
    }
    let mut out = Vec::with_capacity(mean_sr.len());
    let mut total = 0.0;
    for (k, r) in mean_sr.iter().enumerate() {
        if k > 0 {
            total += 0.5 * dt * (mean_sr[k - 1] + r);
        }
        out.push(total);
    }
    Ok(out)
}

/// Cell-wise bound on |h| implied by the shifted comparison system:
/// |h(0)| + 2(R* + 1) + (γ₁ᴹ/γ₂ᵐ) c, with c the largest |u_t|.
pub fn log_rate_bound(h0_abs_max: f64, bounds: &SrBounds, max_abs_ut: f64) -> f64 {
    h0_abs_max + 2.0 * (bounds.r_star_max + 1.0) + bounds.gamma1_max / bounds.gamma2_min * max_abs_ut
}
