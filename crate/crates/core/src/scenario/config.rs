//! TOML scenario files and their translation into model objects.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::signals::{DemandSource, ReferenceSpec, Series};
use crate::control::{
    build_b0, design_gains, select_nominals, ControllerState, GstaGains, OutputMap, DEFAULT_GAIN_MARGIN,
};
use crate::diffusion::{km2_per_hr_to_km2_per_yr, BoundaryKind, DiffusionParams};
use crate::error::{Error, Result};
use crate::mesh::{
    build_grid, check_assumption_a4, DomainGrid, Mask, Region, RegionKind, RegionSet, ScalarField, Well, WellSet,
};
use crate::seismicity::SrParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub grid: GridSpec,
    pub wells: Vec<WellSpec>,
    pub regions: Vec<RegionSpec>,
    pub diffusion: DiffusionSpec,
    pub sr: SrSpec,
    pub controller: ControllerSpec,
    pub references: ReferencesSpec,
    pub demand: Option<DemandSpec>,
    pub schedule: ScheduleSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskShape {
    Full,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// [Lx, Ly] in km.
    pub extent_km: [f64; 2],
    /// [nx, ny].
    pub resolution: [usize; 2],
    #[serde(default = "default_mask")]
    pub mask: MaskShape,
    /// Explicit mask rows, top row first; overrides `mask`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_rows: Option<Vec<String>>,
}

fn default_mask() -> MaskShape {
    MaskShape::Full
}

/// A well is a square block of `size`×`size` cells around the cell holding
/// (`x_km`, `y_km`), or an explicit list of cell ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_km: Option<f64>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
}

fn one() -> usize {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKindSpec {
    Pressure,
    Sr,
}

/// Cells are selected by centre inside `rect_km = [x0, y0, x1, y1]`, by id,
/// or as every active cell not claimed by another region (`remainder`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    pub kind: RegionKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect_km: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub remainder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    /// [1/MPa]
    pub beta: f64,
    /// [km²/hr]; converted to km²/yr.
    pub c_hy_km2_per_hr: f64,
    #[serde(default)]
    pub bc: BoundaryKind,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrSpec {
    pub gamma1_max: f64,
    pub gamma2: f64,
    pub r_star: f64,
    /// `cell_id,value` on the grid given in [grid]; uniform 1 if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_csv: Option<PathBuf>,
    /// R(0) = r0_factor · R*.
    #[serde(default = "unit")]
    pub r0_factor: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// GSTA feedback plus demand allocation.
    #[default]
    ClosedLoop,
    /// Demand particular solution only (no feedback).
    DemandOnly,
    /// Q ≡ 0.
    Off,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::ClosedLoop => "closed_loop",
            ControlMode::DemandOnly => "demand_only",
            ControlMode::Off => "off",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    #[serde(default)]
    pub mode: ControlMode,
    pub l: f64,
    pub k_bar2: f64,
    pub b: f64,
    #[serde(default)]
    pub delta_b: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Γ_R used for the nominal SR scaling.
    pub gamma_r: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Overrides the computed γ₁₀R*₀.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1_0_rstar_0: Option<f64>,
    /// L_Q: the run aborts if ‖Q‖ exceeds it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<f64>,
}

fn default_margin() -> f64 {
    DEFAULT_GAIN_MARGIN
}

fn default_safety() -> f64 {
    1.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencesSpec {
    pub pressure: Vec<ReferenceSpec>,
    #[serde(default)]
    pub sr: Vec<ReferenceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandRowSpec {
    /// D_i = ratio · f(t).
    pub ratio: f64,
    /// Inclusive well index range [first, last]; all wells if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wells: Option<[usize; 2]>,
    /// Explicit weights over all wells; drawn uniformly in [0.8, 1.2] if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    /// `t_years,value` history f(t).
    pub csv: PathBuf,
    pub rows: Vec<DemandRowSpec>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub t_end: f64,
    pub dt: f64,
    /// Control period; defaults to dt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_c: Option<f64>,
}

/// Command-line style overrides applied before the scenario is built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub grid: Option<(usize, usize)>,
    pub bc: Option<BoundaryKind>,
    pub t_end: Option<f64>,
    pub mode: Option<ControlMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub t_end: f64,
    pub dt: f64,
    pub dt_c: f64,
    /// Diffusion/SR sub-steps per control period.
    pub substeps: usize,
    /// Number of control periods.
    pub periods: usize,
}

/// Controller setup derived from the file: gains, nominals and matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSetup {
    pub mode: ControlMode,
    pub gains: GstaGains,
    pub beta0: f64,
    pub b0: DMatrix<f64>,
    pub w: Option<DMatrix<f64>>,
    pub saturation: Option<f64>,
}

/// A fully built scenario. Partially built scenarios (assumption failures)
/// can still be inspected through [`validate_scenario`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub grid: DomainGrid,
    pub wells: WellSet,
    pub map: OutputMap,
    pub diffusion: DiffusionParams,
    pub sr: SrParams,
    pub r0: ScalarField,
    pub controller: ControllerSetup,
    pub references: ReferencesSpec,
    pub demand: Option<DemandSource>,
    pub schedule: Schedule,
    pub report: AssumptionReport,
}

impl Scenario {
    pub fn controller_state(&self) -> Result<ControllerState> {
        ControllerState::new(self.controller.b0.clone(), self.controller.w.clone())
    }
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioFile> {
    toml::from_str(text).map_err(|e| {
        let message = match e.span() {
            Some(span) => {
                let line = text[..span.start].matches('\n').count() + 1;
                format!("line {line}: {}", e.message())
            }
            None => e.message().to_string(),
        };
        Error::Parse {
            path: path.to_path_buf(),
            message,
        }
    })
}

pub fn read_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path)
}

impl ScenarioFile {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            if let Some(d) = self.demand.as_mut() {
                d.seed = seed;
            }
        }
        if let Some(dt) = o.dt {
            // keep the control period tied to dt unless it was already coarser
            let dt_c = self.schedule.dt_c.unwrap_or(self.schedule.dt);
            self.schedule.dt_c = Some(if dt_c <= self.schedule.dt { dt } else { dt_c.max(dt) });
            self.schedule.dt = dt;
        }
        if let Some(bc) = o.bc {
            self.diffusion.bc = bc;
        }
        if let Some(t_end) = o.t_end {
            self.schedule.t_end = t_end;
        }
        if let Some(mode) = o.mode {
            self.controller.mode = mode;
        }
    }
}

/// Reads, builds and validates. Assumption failures become errors naming
/// the assumption; use [`validate_scenario`] for the full report.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_with(path, &Overrides::default())
}

pub fn load_scenario_with(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let (scenario, report) = validate_scenario(path, overrides)?;
    match scenario {
        Some(s) if report.passed() => Ok(s),
        _ => {
            let fail = report.first_failure().expect("failed report has a failing check");
            Err(Error::Assumption {
                assumption: fail.name,
                detail: fail.detail.clone(),
            })
        }
    }
}

/// Builds as far as possible and reports every assumption check. Errors are
/// reserved for unreadable files and malformed configuration.
pub fn validate_scenario(path: &Path, overrides: &Overrides) -> Result<(Option<Scenario>, AssumptionReport)> {
    let mut file = read_scenario_file(path)?;
    file.apply(overrides);
    let base = path.parent().unwrap_or(Path::new("."));
    build_scenario(file, base, overrides.grid)
}

fn check(name: &'static str, result: std::result::Result<String, String>) -> AssumptionCheck {
    match result {
        Ok(detail) => AssumptionCheck {
            name,
            passed: true,
            detail,
        },
        Err(detail) => AssumptionCheck {
            name,
            passed: false,
            detail,
        },
    }
}

fn schedule_from(spec: &ScheduleSpec) -> Result<Schedule> {
    let ScheduleSpec { t_end, dt, dt_c } = *spec;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonPositive("dt"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::NonPositive("t_end"));
    }
    let dt_c = dt_c.unwrap_or(dt);
    if !(dt_c >= dt) {
        return Err(Error::InvalidParameter(format!(
            "dt_c = {dt_c} must be at least dt = {dt}"
        )));
    }
    let ratio = dt_c / dt;
    let substeps = ratio.round() as usize;
    if (ratio - substeps as f64).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter(format!(
            "dt_c = {dt_c} is not an integer multiple of dt = {dt}"
        )));
    }
    let periods = (t_end / dt_c).round().max(1.0) as usize;
    Ok(Schedule {
        t_end: periods as f64 * dt_c,
        dt: dt_c / substeps as f64,
        dt_c,
        substeps,
        periods,
    })
}

fn load_density(path: &Path, base_grid: &DomainGrid, grid: &DomainGrid) -> Result<ScalarField> {
    #[derive(Deserialize)]
    struct Row {
        cell_id: usize,
        value: f64,
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut base = vec![None; base_grid.n_cells()];
    for row in rdr.deserialize() {
        let row: Row = row.map_err(|e| Error::csv(path, e))?;
        if row.cell_id >= base.len() {
            return Err(Error::CellOutOfRange { cell: row.cell_id });
        }
        if !(row.value >= 0.0 && row.value.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{}: density {} at cell {} must be non-negative",
                path.display(),
                row.value,
                row.cell_id
            )));
        }
        base[row.cell_id] = Some(row.value);
    }
    // sample at the target cell centres (identity when grids agree)
    let mut d = Vec::with_capacity(grid.n_active());
    for &cell in grid.active_ids() {
        let (x, y) = grid.cell_center(cell);
        // a coarse boundary cell may land on an inactive fine cell: use the nearest valued one
        let v = base_grid
            .cell_at(x, y)
            .and_then(|c| base[c])
            .or_else(|| {
                (0..base.len())
                    .filter_map(|c| base[c].map(|v| (c, v)))
                    .map(|(c, v)| {
                        let (cx, cy) = base_grid.cell_center(c);
                        ((cx - x).powi(2) + (cy - y).powi(2), v)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, v)| v)
            })
            .ok_or_else(|| Error::InvalidParameter(format!("{}: no density value for cell {cell}", path.display())))?;
        d.push(v);
    }
    let max = d.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{}: density is identically zero",
            path.display()
        )));
    }
    Ok(ScalarField(d.into_iter().map(|v| v / max).collect()))
}

fn well_cells(grid: &DomainGrid, spec: &WellSpec) -> Result<Vec<usize>> {
    if let Some(cells) = &spec.cells {
        return Ok(cells.clone());
    }
    let (Some(x), Some(y)) = (spec.x_km, spec.y_km) else {
        return Err(Error::InvalidParameter(format!(
            "well `{}` needs x_km/y_km or cells",
            spec.name
        )));
    };
    let centre = grid.cell_at(x, y).ok_or_else(|| {
        Error::InvalidParameter(format!("well `{}` at ({x}, {y}) km lies outside the grid", spec.name))
    })?;
    if spec.size == 0 {
        return Err(Error::NonPositive("well size"));
    }
    let (ci, cj) = grid.cell_ij(centre);
    let lo = (spec.size - 1) / 2;
    let mut cells = Vec::new();
    for dj in 0..spec.size {
        for di in 0..spec.size {
            let (i, j) = ((ci + di) as isize - lo as isize, (cj + dj) as isize - lo as isize);
            if i < 0 || j < 0 || i as usize >= grid.nx() || j as usize >= grid.ny() {
                continue;
            }
            cells.push(grid.cell_id(i as usize, j as usize));
        }
    }
    Ok(cells)
}

fn region_cells(grid: &DomainGrid, spec: &RegionSpec, claimed: &[bool]) -> Result<Vec<usize>> {
    if spec.remainder {
        return Ok(grid.active_ids().iter().copied().filter(|&c| !claimed[c]).collect());
    }
    if let Some(cells) = &spec.cells {
        return Ok(cells.clone());
    }
    let Some([x0, y0, x1, y1]) = spec.rect_km else {
        return Err(Error::InvalidParameter(format!(
            "region `{}` needs rect_km, cells or remainder",
            spec.name
        )));
    };
    Ok(grid
        .active_ids()
        .iter()
        .copied()
        .filter(|&c| {
            let (x, y) = grid.cell_center(c);
            x >= x0 && x <= x1 && y >= y0 && y <= y1
        })
        .collect())
}

/// Weight matrix W with one row per demand row.
pub fn demand_matrix(rows: &[DemandRowSpec], n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(rows.len(), n);
    for (i, row) in rows.iter().enumerate() {
        if let Some(weights) = &row.weights {
            if weights.len() != n {
                return Err(Error::Dimension(format!(
                    "demand row {i} has {} weights for {n} wells",
                    weights.len()
                )));
            }
            for (j, v) in weights.iter().enumerate() {
                w[(i, j)] = *v;
            }
            continue;
        }
        let [first, last] = row.wells.unwrap_or([0, n.saturating_sub(1)]);
        if first > last || last >= n {
            return Err(Error::InvalidParameter(format!(
                "demand row {i} well range [{first}, {last}] is invalid for {n} wells"
            )));
        }
        for j in first..=last {
            w[(i, j)] = rng.random_range(0.8..=1.2);
        }
    }
    Ok(w)
}

fn positive(name: &str, v: f64) -> std::result::Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} = {v} must be positive"))
    }
}

/// Builds the scenario from a parsed file. `base` resolves relative CSV paths.
pub fn build_scenario(
    file: ScenarioFile,
    base: &Path,
    grid_override: Option<(usize, usize)>,
) -> Result<(Option<Scenario>, AssumptionReport)> {
    let schedule = schedule_from(&file.schedule)?;
    let g = &file.grid;
    let mask_for = |nx: usize, ny: usize| -> Result<Mask> {
        match (&g.mask_rows, g.mask) {
            (Some(rows), _) => Mask::from_rows(rows),
            (None, MaskShape::Full) => Ok(Mask::full(nx, ny)),
            (None, MaskShape::Ellipse) => Ok(Mask::ellipse(nx, ny)),
        }
    };
    let extent = (g.extent_km[0], g.extent_km[1]);
    let base_grid = build_grid(
        extent,
        (g.resolution[0], g.resolution[1]),
        &mask_for(g.resolution[0], g.resolution[1])?,
    )?;
    let grid = match grid_override {
        Some((nx, ny)) if (nx, ny) != (g.resolution[0], g.resolution[1]) => {
            if g.mask_rows.is_some() {
                return Err(Error::InvalidParameter(
                    "grid override is not supported with explicit mask rows".into(),
                ));
            }
            build_grid(extent, (nx, ny), &mask_for(nx, ny)?)?
        }
        _ => base_grid.clone(),
    };

    let mut checks = Vec::new();

    // diffusion and SR parameters
    let d = &file.diffusion;
    if !(d.c_hy_km2_per_hr > 0.0 && d.c_hy_km2_per_hr.is_finite()) {
        return Err(Error::NonPositive("c_hy"));
    }
    let diffusion = DiffusionParams {
        theta: d.theta,
        ..DiffusionParams::uniform(&grid, d.beta, km2_per_hr_to_km2_per_yr(d.c_hy_km2_per_hr), d.bc)
    };
    let density = match &file.sr.density_csv {
        Some(p) => load_density(&base.join(p), &base_grid, &grid)?,
        None => ScalarField::constant(&grid, 1.0),
    };
    let sr = SrParams::from_density(&density, file.sr.gamma1_max, file.sr.gamma2, file.sr.r_star);
    let a3 = diffusion
        .validate(&grid)
        .map_err(|e| e.to_string())
        .and_then(|_| sr.check_a3())
        .and_then(|_| positive("r0_factor", file.sr.r0_factor))
        .map(|_| {
            format!(
                "beta = {}, c_hy = {:.4} km^2/yr, gamma1 in [{:.3e}, {}], gamma2 = {}, R* = {}",
                d.beta,
                km2_per_hr_to_km2_per_yr(d.c_hy_km2_per_hr),
                sr.bounds.gamma1_min,
                sr.bounds.gamma1_max,
                sr.gamma2,
                sr.r_star[0]
            )
        });
    let r0 = ScalarField(sr.r_star.iter().map(|r| r * file.sr.r0_factor).collect());

    // wells and regions
    let mut wells = Vec::with_capacity(file.wells.len());
    for spec in &file.wells {
        wells.push(Well::new(&grid, spec.name.clone(), &well_cells(&grid, spec)?)?);
    }
    let wells = WellSet::new(wells);

    let mut claimed = vec![false; grid.n_cells()];
    let mut regions = Vec::with_capacity(file.regions.len());
    let mut order: Vec<&RegionSpec> = file.regions.iter().filter(|r| !r.remainder).collect();
    order.extend(file.regions.iter().filter(|r| r.remainder));
    for spec in order {
        let cells = region_cells(&grid, spec, &claimed)?;
        let kind = match spec.kind {
            RegionKindSpec::Pressure => RegionKind::Pressure,
            RegionKindSpec::Sr => RegionKind::SeismicityRate,
        };
        let region = Region::new(&grid, spec.name.clone(), &cells, kind)
            .map_err(|e| Error::InvalidParameter(format!("region `{}`: {e}", spec.name)))?;
        for &c in region.cell_ids() {
            claimed[c] = true;
        }
        regions.push(region);
    }
    let regions = RegionSet::from_regions_unchecked(regions);
    let a4 = check_assumption_a4(&regions, &wells);
    let a4_ok = a4.passed();
    let mut a4_detail = if a4_ok {
        format!(
            "{} outputs, {} inputs, regions disjoint, every region has a well",
            a4.outputs, a4.inputs
        )
    } else {
        a4.issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
    };

    // references
    let refs = &file.references;
    let a2 = if refs.pressure.len() != regions.m_u() || refs.sr.len() != regions.m_r() {
        Err(format!(
            "{} pressure and {} SR references for {} pressure and {} SR regions",
            refs.pressure.len(),
            refs.sr.len(),
            regions.m_u(),
            regions.m_r()
        ))
    } else {
        refs.pressure
            .iter()
            .chain(&refs.sr)
            .try_for_each(|r| r.validate())
            .map_err(|e| e.to_string())
            .map(|_| "references bounded with bounded first and second derivatives".to_string())
    };

    // demand
    let demand = match &file.demand {
        None => None,
        Some(spec) => {
            let series = Series::from_csv(&base.join(&spec.csv))?;
            Some((
                DemandSource {
                    series,
                    ratios: spec.rows.iter().map(|r| r.ratio).collect(),
                },
                demand_matrix(&spec.rows, wells.len(), spec.seed)?,
            ))
        }
    };

    let c = &file.controller;
    let a1 = match (c.saturation, &demand) {
        (Some(l_q), _) if !(l_q > 0.0 && l_q.is_finite()) => Err(format!("saturation L_Q = {l_q} must be positive")),
        (Some(l_q), Some((d, w))) => {
            // the demand share alone must fit under the bound
            let (w_pinv, _) = crate::control::pseudo_inverse(w);
            let peak = d.series.max_abs() * (&w_pinv * nalgebra::DVector::from_column_slice(&d.ratios)).norm();
            if peak > l_q {
                Err(format!("demand requires |Q| up to {peak:.4e} > L_Q = {l_q}"))
            } else {
                Ok(format!("inputs bounded by L_Q = {l_q}"))
            }
        }
        (Some(l_q), None) => Ok(format!("inputs bounded by L_Q = {l_q}")),
        (None, _) => Ok("no saturation configured; boundedness measured from the run".into()),
    };

    // controller design
    let gains = design_gains(c.k_bar2, c.l, c.b, c.delta_b, c.margin)?.with_alphas(c.alpha1, c.alpha2);
    gains.validate()?;
    let min_vol = wells.min_support_volume().unwrap_or(grid.cell_area());
    let nominals = select_nominals(d.beta, file.sr.gamma1_max, c.gamma_r, min_vol, c.safety)?;
    let gamma1_0_rstar_0 = match c.gamma1_0_rstar_0 {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => {
            return Err(Error::InvalidParameter(format!(
                "gamma1_0_rstar_0 = {v} must be positive"
            )))
        }
        None => nominals.gamma1_0_rstar_0,
    };
    let b0 = build_b0(&regions, &wells, nominals.beta0);
    let w = demand.as_ref().map(|(_, w)| w.clone());
    let m = regions.len();
    let n = wells.len();
    let n_r = w.as_ref().map_or(0, |w| w.nrows());
    let mut controller_ok = None;
    if a4_ok {
        if n_r + m > n {
            a4_detail = format!("too many constraints: n_r + m = {} exceeds n = {n}", n_r + m);
        } else {
            match ControllerState::new(b0.clone(), w.clone()) {
                Ok(_) => controller_ok = Some(()),
                Err(e) => a4_detail = e.to_string(),
            }
        }
    }
    let a4_passed = controller_ok.is_some();
    if a4_passed && n_r > 0 {
        a4_detail.push_str(&format!("; {n_r} demand row(s), n_r + m = {} <= n = {n}", n_r + m));
    }

    checks.push(check("A1", a1));
    checks.push(check("A2", a2));
    checks.push(check("A3", a3));
    checks.push(check("A4", if a4_passed { Ok(a4_detail) } else { Err(a4_detail) }));
    let report = AssumptionReport { checks };

    let Some(()) = controller_ok else {
        return Ok((None, report));
    };
    let (demand, _) = match demand {
        Some((d, w)) => (Some(d), Some(w)),
        None => (None, None),
    };
    let scenario = Scenario {
        name: file.name.clone(),
        references: file.references.clone(),
        controller: ControllerSetup {
            mode: c.mode,
            gains,
            beta0: nominals.beta0,
            b0,
            w,
            saturation: c.saturation,
        },
        map: OutputMap {
            regions,
            gamma1_0_rstar_0,
        },
        file,
        grid,
        wells,
        diffusion,
        sr,
        r0,
        demand,
        schedule,
        report: report.clone(),
    };
    Ok((Some(scenario), report))
}
