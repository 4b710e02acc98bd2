//! Synthetic desk-scale scenario fixtures.
//!
//! Everything here is made up: a circular reservoir on a 40 km square, a
//! seismicity density peaked in the middle, five small "town" regions near
//! the edge where the density is low, and a monthly extraction history with
//! a ramp, a plateau with seasonal swings and a shutdown.

use std::f64::consts::PI;
use std::path::Path;

use super::config::*;
use super::signals::{ReferenceSpec, Series};
use crate::diffusion::BoundaryKind;
use crate::error::{Error, Result};
use crate::mesh::{build_grid, Mask};

pub const EXTENT_KM: f64 = 40.0;
pub const RESOLUTION: usize = 40;
/// Dec 1991 to Jan 2023.
pub const HORIZON_YEARS: f64 = 31.1;

/// Town regions as [x0, y0, x1, y1] in km.
pub const TOWNS: [[f64; 4]; 5] = [
    [5.0, 17.0, 11.0, 23.0],
    [29.0, 17.0, 35.0, 23.0],
    [17.0, 5.0, 23.0, 11.0],
    [17.0, 29.0, 23.0, 35.0],
    [8.0, 27.0, 14.0, 33.0],
];

/// Pressure targets of the towns [MPa].
pub const TOWN_TARGETS: [f64; 5] = [-2.0, -2.5, -1.5, -2.0, -1.0];

/// Wells inside the SR remainder, in km.
const FIELD_WELLS: [(f64, f64); 14] = [
    (14.5, 14.5),
    (25.5, 14.5),
    (14.5, 25.5),
    (25.5, 25.5),
    (20.5, 20.5),
    (20.5, 15.5),
    (15.5, 20.5),
    (24.5, 20.5),
    (20.5, 24.5),
    (10.5, 10.5),
    (29.5, 10.5),
    (29.5, 29.5),
    (6.5, 12.5),
    (33.5, 26.5),
];

/// Normalized seismicity density: two Gaussian clusters over a small floor.
pub fn density_at(x: f64, y: f64) -> f64 {
    let bump = |cx: f64, cy: f64, s: f64, a: f64| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp();
    1e-3 + bump(20.0, 21.0, 3.5, 1.0) + bump(24.0, 15.0, 2.5, 0.5)
}

/// Monthly extraction history f(t) ≥ 0 [km²/yr] sampled at the start of each month.
pub fn extraction_history(peak: f64) -> Series {
    let months = (HORIZON_YEARS * 12.0).round() as usize + 1;
    let mut t = Vec::with_capacity(months);
    let mut v = Vec::with_capacity(months);
    for k in 0..months {
        let ty = k as f64 / 12.0;
        let ramp = 1.0 / (1.0 + (-(ty - 3.0) / 0.8).exp());
        let shutdown = 1.0 / (1.0 + ((ty - 24.0) / 1.2).exp());
        let seasonal = 1.0 + 0.25 * (2.0 * PI * ty).cos();
        t.push(ty);
        v.push(peak * ramp * shutdown * seasonal);
    }
    Series::new(t, v).expect("synthetic series is valid")
}

pub const PEAK_EXTRACTION: f64 = 0.02;

fn wells() -> Vec<WellSpec> {
    let mut town_wells = Vec::new();
    for (i, [x0, y0, x1, y1]) in TOWNS.iter().enumerate() {
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        for (k, (dx, dy)) in [(-1.5, -1.5), (1.5, 0.0), (-0.5, 1.5)].iter().enumerate() {
            town_wells.push(WellSpec {
                name: format!("T{}-{}", i + 1, k + 1),
                x_km: Some(cx + dx),
                y_km: Some(cy + dy),
                size: 1,
                cells: None,
            });
        }
    }
    let field_wells = FIELD_WELLS.iter().enumerate().map(|(i, &(x, y))| WellSpec {
        name: format!("F{:02}", i + 1),
        x_km: Some(x),
        y_km: Some(y),
        size: 1,
        cells: None,
    });
    // interleave so that any contiguous block of wells mixes both kinds
    let mut out = Vec::with_capacity(29);
    let mut field = field_wells.collect::<Vec<_>>().into_iter();
    let mut town = town_wells.into_iter();
    loop {
        match (town.next(), field.next()) {
            (None, None) => break,
            (a, b) => out.extend(a.into_iter().chain(b)),
        }
    }
    out
}

fn regions() -> Vec<RegionSpec> {
    let mut r: Vec<RegionSpec> = TOWNS
        .iter()
        .enumerate()
        .map(|(i, rect)| RegionSpec {
            name: format!("town{}", i + 1),
            kind: RegionKindSpec::Pressure,
            rect_km: Some(*rect),
            cells: None,
            remainder: false,
        })
        .collect();
    r.push(RegionSpec {
        name: "field".into(),
        kind: RegionKindSpec::Sr,
        rect_km: None,
        cells: None,
        remainder: true,
    });
    r
}

/// Scenario 1: one demand row D = −f over all 29 wells.
pub fn scenario1() -> ScenarioFile {
    ScenarioFile {
        name: "scenario1".into(),
        description: "synthetic desk-scale extraction scenario".into(),
        grid: GridSpec {
            extent_km: [EXTENT_KM, EXTENT_KM],
            resolution: [RESOLUTION, RESOLUTION],
            mask: MaskShape::Ellipse,
            mask_rows: None,
        },
        wells: wells(),
        regions: regions(),
        diffusion: DiffusionSpec {
            beta: 5.7e-4,
            c_hy_km2_per_hr: 4.4e-2,
            bc: BoundaryKind::Neumann,
            theta: 1.0,
        },
        sr: SrSpec {
            gamma1_max: 4.7,
            gamma2: 1.08e-2,
            r_star: 0.99,
            density_csv: Some("density.csv".into()),
            r0_factor: 1.0,
        },
        controller: ControllerSpec {
            mode: ControlMode::ClosedLoop,
            l: 3e-3,
            k_bar2: 1e4,
            b: 1.0,
            delta_b: 0.0,
            margin: 2.22,
            alpha1: 0.3,
            alpha2: 80.0,
            gamma_r: 2.0,
            safety: 1.1,
            gamma1_0_rstar_0: None,
            saturation: None,
        },
        references: ReferencesSpec {
            pressure: TOWN_TARGETS
                .iter()
                .map(|&target| ReferenceSpec::Sigmoid {
                    target,
                    t_mid: 7.5,
                    tau: 1.5,
                })
                .collect(),
            sr: vec![ReferenceSpec::Constant { target: 0.99 }],
        },
        demand: Some(DemandSpec {
            csv: "extraction.csv".into(),
            rows: vec![DemandRowSpec {
                ratio: -1.0,
                wells: None,
                weights: None,
            }],
            seed: 1991,
        }),
        schedule: ScheduleSpec {
            t_end: HORIZON_YEARS,
            dt: 1e-3,
            dt_c: None,
        },
    }
}

/// Scenario 2: D = [−f, 1.36 f] over wells 0–13 and 14–28.
pub fn scenario2() -> ScenarioFile {
    let mut s = scenario1();
    s.name = "scenario2".into();
    s.description = "synthetic desk-scale extraction with matched CO2 injection".into();
    if let Some(d) = s.demand.as_mut() {
        d.rows = vec![
            DemandRowSpec {
                ratio: -1.0,
                wells: Some([0, 13]),
                weights: None,
            },
            DemandRowSpec {
                ratio: 1.36,
                wells: Some([14, 28]),
                weights: None,
            },
        ];
    }
    s
}

/// Scenario 1 with the first two towns sharing cells.
pub fn overlapping_regions() -> ScenarioFile {
    let mut s = scenario1();
    s.name = "overlapping-regions".into();
    s.description = "invalid: two pressure regions overlap".into();
    s.regions[1].rect_km = Some([9.0, 17.0, 15.0, 23.0]);
    s
}

/// Scenario 1 with only six wells and one demand row: n_r + m = 7 > n = 6.
pub fn too_many_constraints() -> ScenarioFile {
    let mut s = scenario1();
    s.name = "too-many-constraints".into();
    s.description = "invalid: more constraints than wells".into();
    let all = wells();
    let mut keep: Vec<WellSpec> = all.iter().filter(|w| w.name.ends_with("-1")).cloned().collect();
    keep.push(all.iter().find(|w| w.name == "F05").cloned().unwrap());
    s.wells = keep;
    s
}

pub fn density_rows(resolution: usize) -> Result<Vec<(usize, f64)>> {
    let grid = build_grid(
        (EXTENT_KM, EXTENT_KM),
        (resolution, resolution),
        &Mask::ellipse(resolution, resolution),
    )?;
    Ok(grid
        .active_ids()
        .iter()
        .map(|&c| {
            let (x, y) = grid.cell_center(c);
            (c, density_at(x, y))
        })
        .collect())
}

pub fn write_density_csv(path: &Path, resolution: usize) -> Result<()> {
    let rows = density_rows(resolution)?;
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["cell_id", "value"]).map_err(|e| Error::csv(path, e))?;
    for (c, v) in rows {
        w.write_record([c.to_string(), format!("{:.6e}", v / max)])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_toml(path: &Path, file: &ScenarioFile) -> Result<()> {
    let text = toml::to_string(file).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let header = "# Synthetic desk-scale fixture. Geometry, density and demand are made up.\n\n";
    std::fs::write(path, format!("{header}{text}")).map_err(|e| Error::io(path, e))
}

/// Writes every fixture into `dir`.
pub fn write_all(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_density_csv(&dir.join("density.csv"), RESOLUTION)?;
    extraction_history(PEAK_EXTRACTION).write_csv(&dir.join("extraction.csv"))?;
    write_toml(&dir.join("scenario1.toml"), &scenario1())?;
    write_toml(&dir.join("scenario2.toml"), &scenario2())?;
    write_toml(&dir.join("overlapping_regions.toml"), &overlapping_regions())?;
    write_toml(&dir.join("too_many_constraints.toml"), &too_many_constraints())?;
    Ok(())
}
