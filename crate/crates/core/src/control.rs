//! Regional outputs, tracking errors, the MIMO generalized super-twisting
//! law and demand-constrained allocation of well rates.

use nalgebra::{DMatrix, DVector};

use crate::diffusion::{mean_over, Scope};
use crate::error::{Error, Result};
use crate::mesh::{RegionKind, RegionSet, ScalarField, WellSet};

/// Floor on ‖σ‖ inside ‖σ‖^{-1/2}.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Default ratio k̄1 / sqrt(b k̄2 / (1 − δ_B)).
pub const DEFAULT_GAIN_MARGIN: f64 = 2.22;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    pub regions: RegionSet,
    /// γ₁₀R*₀, the scaling of the SR errors.
    pub gamma1_0_rstar_0: f64,
}

impl OutputMap {
    pub fn m_u(&self) -> usize {
        self.regions.m_u()
    }

    pub fn m_r(&self) -> usize {
        self.regions.m_r()
    }

    pub fn m(&self) -> usize {
        self.regions.len()
    }
}

/// Regional averages of pressure change and seismicity rate.
pub fn compute_outputs(u: &ScalarField, r: &ScalarField, map: &OutputMap) -> Result<(Vec<f64>, Vec<f64>)> {
    let y_u = map
        .regions
        .pressure()
        .map(|reg| mean_over(u, Scope::Region(reg)))
        .collect::<Result<Vec<_>>>()?;
    let y_r = map
        .regions
        .sr()
        .map(|reg| mean_over(r, Scope::Region(reg)))
        .collect::<Result<Vec<_>>>()?;
    Ok((y_u, y_r))
}

/// σ = [y_u − r_u ; (y_R − r_R)/(γ₁₀R*₀)].
pub fn compute_error(y_u: &[f64], y_r: &[f64], r_u: &[f64], r_r: &[f64], map: &OutputMap) -> Vec<f64> {
    let scale = map.gamma1_0_rstar_0;
    y_u.iter()
        .zip(r_u)
        .map(|(y, r)| y - r)
        .chain(y_r.iter().zip(r_r).map(|(y, r)| (y - r) / scale))
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn inv_sqrt_norm(sigma: &[f64]) -> f64 {
    norm(sigma).max(SIGMA_FLOOR).powf(-0.5)
}

/// φ₁(σ) = (α₁‖σ‖^{-1/2} + α₂) σ.
pub fn phi1(sigma: &[f64], alpha1: f64, alpha2: f64) -> Vec<f64> {
    let c = alpha1 * inv_sqrt_norm(sigma) + alpha2;
    sigma.iter().map(|s| c * s).collect()
}

/// φ₂(σ) = (½α₁‖σ‖^{-1/2} + α₂) φ₁(σ).
pub fn phi2(sigma: &[f64], alpha1: f64, alpha2: f64) -> Vec<f64> {
    let c = 0.5 * alpha1 * inv_sqrt_norm(sigma) + alpha2;
    phi1(sigma, alpha1, alpha2).into_iter().map(|p| c * p).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GstaGains {
    pub k1: f64,
    pub k2: f64,
    pub b: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub l: f64,
    pub k_bar1: f64,
    pub k_bar2: f64,
    pub delta_b: f64,
}

impl GstaGains {
    pub fn with_alphas(mut self, alpha1: f64, alpha2: f64) -> Self {
        self.alpha1 = alpha1;
        self.alpha2 = alpha2;
        self
    }

    /// sqrt(b k̄2 / (1 − δ_B)), the lower limit on k̄1.
    pub fn k_bar1_limit(&self) -> f64 {
        (self.b * self.k_bar2 / (1.0 - self.delta_b)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("b", self.b),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.delta_b) {
            return Err(Error::InvalidParameter(format!(
                "delta_b = {} must lie in [0, 1)",
                self.delta_b
            )));
        }
        if self.k_bar1 <= self.k_bar1_limit() {
            return Err(Error::InvalidParameter(format!(
                "k_bar1 = {} does not exceed sqrt(b k_bar2 / (1 - delta_b)) = {}",
                self.k_bar1,
                self.k_bar1_limit()
            )));
        }
        Ok(())
    }
}

/// k̄1 = margin·sqrt(b k̄2/(1−δ_B)), k1 = l k̄1, k2 = l² k̄2. The α's default
/// to 1; set them with [`GstaGains::with_alphas`].
pub fn design_gains(k_bar2: f64, l: f64, b: f64, delta_b: f64, margin: f64) -> Result<GstaGains> {
    if !(0.0..1.0).contains(&delta_b) {
        return Err(Error::InvalidParameter(format!(
            "delta_b = {delta_b} must satisfy 0 <= delta_b < 1"
        )));
    }
    for (name, v) in [("k_bar2", k_bar2), ("l", l), ("b", b)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
        }
    }
    if !(margin > 1.0 && margin.is_finite()) {
        return Err(Error::InvalidParameter(format!("margin = {margin} must exceed 1")));
    }
    let k_bar1 = margin * (b * k_bar2 / (1.0 - delta_b)).sqrt();
    Ok(GstaGains {
        k1: l * k_bar1,
        k2: l * l * k_bar2,
        b,
        alpha1: 1.0,
        alpha2: 1.0,
        l,
        k_bar1,
        k_bar2,
        delta_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nominals {
    pub beta0: f64,
    pub gamma1_0_rstar_0: f64,
}

/// Fraction of β used for the nominal β₀.
pub const BETA0_FRACTION: f64 = 0.8;

/// β₀ = 0.8β and γ₁₀R*₀ = safety·γ₁ᴹΓ_R/√(min V*_R).
pub fn select_nominals(
    beta: f64,
    gamma1_max: f64,
    gamma_r: f64,
    min_well_volume: f64,
    safety: f64,
) -> Result<Nominals> {
    for (name, v) in [
        ("beta", beta),
        ("gamma1_max", gamma1_max),
        ("Gamma_R", gamma_r),
        ("min_well_volume", min_well_volume),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
        }
    }
    if !(safety > 1.0 && safety.is_finite()) {
        return Err(Error::InvalidParameter(format!("safety = {safety} must exceed 1")));
    }
    Ok(Nominals {
        beta0: BETA0_FRACTION * beta,
        gamma1_0_rstar_0: safety * gamma1_max * gamma_r / min_well_volume.sqrt(),
    })
}

/// Nominal control matrix: 1/(β₀V_{u_i}) for wells inside pressure region i,
/// −1/(β₀V_{R_i}) for wells inside SR region i, 0 otherwise.
pub fn build_b0(regions: &RegionSet, wells: &WellSet, beta0: f64) -> DMatrix<f64> {
    let mut b0 = DMatrix::zeros(regions.len(), wells.len());
    for (i, region) in regions.all().iter().enumerate() {
        let sign = match region.kind {
            RegionKind::Pressure => 1.0,
            RegionKind::SeismicityRate => -1.0,
        };
        for (j, well) in wells.iter().enumerate() {
            if well.inside(region) {
                b0[(i, j)] = sign / (beta0 * region.volume());
            }
        }
    }
    b0
}

/// Moore–Penrose pseudoinverse and numerical rank.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = RANK_TOLERANCE * s_max;
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let mut pinv = DMatrix::zeros(a.ncols(), a.nrows());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            pinv += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    (pinv, rank)
}

/// Orthonormal basis (as columns) of the null space of a full-row-rank `w`.
pub fn null_space(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, n) = w.shape();
    let svd = w.clone().svd(false, true);
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOLERANCE * s_max && s > 0.0)
        .count();
    if rank < rows {
        return Err(Error::RankDeficientDemand { rank, rows });
    }
    let v_t = svd.v_t.unwrap();
    let mut basis: Vec<DVector<f64>> = (0..rank).map(|k| v_t.row(k).transpose()).collect();
    let mut complement = Vec::with_capacity(n - rank);
    // Gram–Schmidt of the unit vectors against the row space, twice.
    let mut candidates: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|j| {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            for b in &basis {
                let c = b.dot(&e);
                e.axpy(-c, b, 1.0);
            }
            (e.norm(), e)
        })
        .collect();
    while complement.len() < n - rank {
        candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let (_, mut v) = candidates.remove(0);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let len = v.norm();
        if len < 1e-8 {
            return Err(Error::RankDeficientDemand { rank, rows });
        }
        v /= len;
        for (score, c) in candidates.iter_mut() {
            let d = v.dot(c);
            c.axpy(-d, &v, 1.0);
            *score = c.norm();
        }
        basis.push(v.clone());
        complement.push(v);
    }
    Ok(DMatrix::from_columns(&complement))
}

#[derive(Debug, Clone, PartialEq)]
struct DemandAllocation {
    w: DMatrix<f64>,
    w_bar: DMatrix<f64>,
    w_pinv_right: DMatrix<f64>,
    b0_w_bar_pinv: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub sigma: Vec<f64>,
    pub nu: Vec<f64>,
    b0: DMatrix<f64>,
    b0_pinv: DMatrix<f64>,
    demand: Option<DemandAllocation>,
}

impl ControllerState {
    /// Prepares the allocation matrices; ν starts at zero.
    pub fn new(b0: DMatrix<f64>, w: Option<DMatrix<f64>>) -> Result<Self> {
        let (m, n) = b0.shape();
        let (b0_pinv, rank) = pseudo_inverse(&b0);
        if rank < m {
            return Err(Error::RankDeficientB0 { rank, outputs: m });
        }
        let demand = match w {
            None => None,
            Some(w) => {
                if w.ncols() != n {
                    return Err(Error::Dimension(format!("W has {} columns for {n} wells", w.ncols())));
                }
                if w.nrows() + m > n {
                    return Err(Error::TooManyConstraints {
                        constraints: w.nrows() + m,
                        inputs: n,
                    });
                }
                let w_bar = null_space(&w)?;
                let (w_pinv_right, _) = pseudo_inverse(&w);
                let (b0_w_bar_pinv, rank) = pseudo_inverse(&(&b0 * &w_bar));
                if rank < m {
                    return Err(Error::IncompatibleDemand { rank, outputs: m });
                }
                Some(DemandAllocation {
                    w,
                    w_bar,
                    w_pinv_right,
                    b0_w_bar_pinv,
                })
            }
        };
        Ok(ControllerState {
            sigma: vec![0.0; m],
            nu: vec![0.0; m],
            b0,
            b0_pinv,
            demand,
        })
    }

    pub fn m(&self) -> usize {
        self.b0.nrows()
    }

    pub fn n(&self) -> usize {
        self.b0.ncols()
    }

    pub fn b0(&self) -> &DMatrix<f64> {
        &self.b0
    }

    pub fn b0_pinv(&self) -> &DMatrix<f64> {
        &self.b0_pinv
    }

    pub fn w(&self) -> Option<&DMatrix<f64>> {
        self.demand.as_ref().map(|d| &d.w)
    }

    pub fn w_bar(&self) -> Option<&DMatrix<f64>> {
        self.demand.as_ref().map(|d| &d.w_bar)
    }

    pub fn n_r(&self) -> usize {
        self.demand.as_ref().map_or(0, |d| d.w.nrows())
    }
}

/// Evaluates v = −k₁φ₁(σ) + bν for the stored σ, then advances the
/// integral state by explicit Euler: ν ← ν − dt k₂ φ₂(σ).
pub fn gsta_step(state: &mut ControllerState, gains: &GstaGains, dt: f64) -> Vec<f64> {
    let p1 = phi1(&state.sigma, gains.alpha1, gains.alpha2);
    let p2 = phi2(&state.sigma, gains.alpha1, gains.alpha2);
    let v = p1
        .iter()
        .zip(&state.nu)
        .map(|(p, nu)| -gains.k1 * p + gains.b * nu)
        .collect();
    for (nu, p) in state.nu.iter_mut().zip(&p2) {
        *nu -= dt * gains.k2 * p;
    }
    v
}

/// Maps the virtual control `v` to well rates, enforcing `W Q = D` when a
/// demand is configured.
pub fn allocate(v: &[f64], state: &ControllerState, demand: Option<&[f64]>) -> Result<Vec<f64>> {
    if v.len() != state.m() {
        return Err(Error::Dimension(format!(
            "v has {} entries for m = {}",
            v.len(),
            state.m()
        )));
    }
    let v = DVector::from_column_slice(v);
    let q = match (&state.demand, demand) {
        (None, None) => &state.b0_pinv * v,
        (Some(alloc), Some(d)) => {
            if d.len() != alloc.w.nrows() {
                return Err(Error::Dimension(format!(
                    "demand has {} entries for {} constraint rows",
                    d.len(),
                    alloc.w.nrows()
                )));
            }
            let d = DVector::from_column_slice(d);
            let mut q = &alloc.w_bar * (&alloc.b0_w_bar_pinv * v) + &alloc.w_pinv_right * &d;
            // one refinement pass on the constraint residual
            let resid = &d - &alloc.w * &q;
            q += &alloc.w_pinv_right * resid;
            q
        }
        (None, Some(_)) => {
            return Err(Error::InvalidParameter(
                "demand given but no demand matrix W configured".into(),
            ))
        }
        (Some(_), None) => {
            return Err(Error::InvalidParameter(
                "demand matrix W configured but no demand given".into(),
            ))
        }
    };
    Ok(q.iter().copied().collect())
}
