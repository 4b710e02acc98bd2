//! Depth-averaged structured reservoir grid, output regions and well
//! indicator fields.
//!
//! Cells are numbered row-major from the lower-left corner of the extent:
//! cell `(i, j)` (column `i`, row `j`) has id `j * nx + i`. Only active cells
//! carry unknowns; a [`ScalarField`] stores one value per active cell in
//! ascending cell-id order. "Volume" is area times unit thickness.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// One value per active cell, ordered by ascending cell id.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn zeros(grid: &DomainGrid) -> Self {
        ScalarField(vec![0.0; grid.n_active()])
    }

    pub fn constant(grid: &DomainGrid, value: f64) -> Self {
        ScalarField(vec![value; grid.n_active()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Boolean active-cell mask over an `nx × ny` grid, row-major from the
/// lower-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn full(nx: usize, ny: usize) -> Self {
        Mask {
            nx,
            ny,
            cells: vec![true; nx * ny],
        }
    }

    /// Cells whose centers fall inside the ellipse inscribed in the extent.
    pub fn ellipse(nx: usize, ny: usize) -> Self {
        let mut cells = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let x = (i as f64 + 0.5) / nx as f64 * 2.0 - 1.0;
                let y = (j as f64 + 0.5) / ny as f64 * 2.0 - 1.0;
                cells[j * nx + i] = x * x + y * y <= 1.0;
            }
        }
        Mask { nx, ny, cells }
    }

    /// Parses rows drawn top row first, `#` (or `1`) active and `.` (or `0`)
    /// inactive.
    pub fn from_rows(rows: &[String]) -> Result<Self> {
        let ny = rows.len();
        let nx = rows.first().map(|r| r.chars().count()).unwrap_or(0);
        let mut cells = vec![false; nx * ny];
        for (r, row) in rows.iter().enumerate() {
            let j = ny - 1 - r;
            let chars: Vec<char> = row.chars().collect();
            if chars.len() != nx {
                return Err(Error::Grid(format!(
                    "mask row {r} has {} columns, expected {nx}",
                    chars.len()
                )));
            }
            for (i, c) in chars.into_iter().enumerate() {
                cells[j * nx + i] = match c {
                    '#' | '1' => true,
                    '.' | '0' => false,
                    other => return Err(Error::Grid(format!("unexpected mask character {other:?}"))),
                };
            }
        }
        Ok(Mask { nx, ny, cells })
    }

    pub fn count_active(&self) -> usize {
        self.cells.iter().filter(|&&a| a).count()
    }
}

/// Neighbour active indices of an active cell: west, east, south, north.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbours {
    pub west: Option<usize>,
    pub east: Option<usize>,
    pub south: Option<usize>,
    pub north: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DomainGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
    active: Vec<bool>,
    active_ids: Vec<usize>,
    index_of: Vec<Option<usize>>,
    neighbours: Vec<Neighbours>,
}

/// Builds the discretized domain from its extent [km], resolution and mask.
pub fn build_grid(extent: (f64, f64), resolution: (usize, usize), mask: &Mask) -> Result<DomainGrid> {
    let (lx, ly) = extent;
    let (nx, ny) = resolution;
    if nx < 2 || ny < 2 {
        return Err(Error::Grid(format!("resolution must be at least 2x2, got {nx}x{ny}")));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::Grid(format!("extent must be positive, got ({lx}, {ly})")));
    }
    if mask.nx != nx || mask.ny != ny || mask.cells.len() != nx * ny {
        return Err(Error::Grid(format!(
            "mask is {}x{} but resolution is {nx}x{ny}",
            mask.nx, mask.ny
        )));
    }
    let active = mask.cells.clone();
    let active_ids: Vec<usize> = (0..nx * ny).filter(|&c| active[c]).collect();
    if active_ids.is_empty() {
        return Err(Error::NoActiveCells);
    }
    let mut index_of = vec![None; nx * ny];
    for (k, &c) in active_ids.iter().enumerate() {
        index_of[c] = Some(k);
    }
    let neighbours = active_ids
        .iter()
        .map(|&c| {
            let (i, j) = (c % nx, c / nx);
            Neighbours {
                west: if i > 0 { index_of[c - 1] } else { None },
                east: if i + 1 < nx { index_of[c + 1] } else { None },
                south: if j > 0 { index_of[c - nx] } else { None },
                north: if j + 1 < ny { index_of[c + nx] } else { None },
            }
        })
        .collect();
    let grid = DomainGrid {
        nx,
        ny,
        lx,
        ly,
        dx: lx / nx as f64,
        dy: ly / ny as f64,
        active,
        active_ids,
        index_of,
        neighbours,
    };
    let components = grid.count_components();
    if components > 1 {
        return Err(Error::DisconnectedDomain { components });
    }
    Ok(grid)
}

impl DomainGrid {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_active(&self) -> usize {
        self.active_ids.len()
    }

    /// Total reservoir volume V (active area × unit thickness) [km²].
    pub fn total_volume(&self) -> f64 {
        self.n_active() as f64 * self.cell_area()
    }

    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let (i, j) = self.cell_ij(cell);
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// Cell containing the point `(x, y)` [km], if it lies in the extent.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<usize> {
        if !(x >= 0.0 && y >= 0.0 && x < self.lx && y < self.ly) {
            return None;
        }
        let i = ((x / self.dx) as usize).min(self.nx - 1);
        let j = ((y / self.dy) as usize).min(self.ny - 1);
        Some(self.cell_id(i, j))
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.active.get(cell).copied().unwrap_or(false)
    }

    /// Active index of a cell id, or `None` for inactive / out-of-range cells.
    pub fn active_index(&self, cell: usize) -> Option<usize> {
        self.index_of.get(cell).copied().flatten()
    }

    pub fn active_ids(&self) -> &[usize] {
        &self.active_ids
    }

    pub fn neighbours(&self, active_index: usize) -> Neighbours {
        self.neighbours[active_index]
    }

    pub(crate) fn resolve_cells(&self, cells: &[usize]) -> Result<Vec<usize>> {
        let mut ids: Vec<usize> = cells.to_vec();
        ids.sort_unstable();
        ids.dedup();
        ids.iter()
            .map(|&c| {
                if c >= self.n_cells() {
                    Err(Error::CellOutOfRange { cell: c })
                } else {
                    self.active_index(c).ok_or(Error::InactiveCell { cell: c })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ids)
    }

    fn count_components(&self) -> usize {
        let mut seen = vec![false; self.n_active()];
        let mut components = 0;
        for start in 0..self.n_active() {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(k) = queue.pop_front() {
                let n = self.neighbours[k];
                for next in [n.west, n.east, n.south, n.north].into_iter().flatten() {
                    if !seen[next] {
                        seen[next] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        components
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKind {
    Pressure,
    SeismicityRate,
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionKind::Pressure => f.write_str("pressure-output"),
            RegionKind::SeismicityRate => f.write_str("sr-output"),
        }
    }
}

/// An output region V_{u_i} or V_{R_i}.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub kind: RegionKind,
    cell_ids: Vec<usize>,
    active: Vec<usize>,
    volume: f64,
}

impl Region {
    /// Builds a region without checking it against other regions.
    pub fn new(grid: &DomainGrid, name: impl Into<String>, cells: &[usize], kind: RegionKind) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let cell_ids = grid.resolve_cells(cells)?;
        let active: Vec<usize> = cell_ids.iter().map(|&c| grid.active_index(c).unwrap()).collect();
        Ok(Region {
            name: name.into(),
            kind,
            volume: active.len() as f64 * grid.cell_area(),
            cell_ids,
            active,
        })
    }

    pub fn cell_ids(&self) -> &[usize] {
        &self.cell_ids
    }

    /// Active indices of the region's cells.
    pub fn active_indices(&self) -> &[usize] {
        &self.active
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        self.cell_ids.binary_search(&cell).is_ok()
    }
}

/// Pressure and seismicity-rate output regions, pressure regions first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionSet {
    regions: Vec<Region>,
}

impl RegionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts regions as given; disjointness is left to
    /// [`check_assumption_a4`].
    pub fn from_regions_unchecked(mut regions: Vec<Region>) -> Self {
        regions.sort_by_key(|r| match r.kind {
            RegionKind::Pressure => 0,
            RegionKind::SeismicityRate => 1,
        });
        RegionSet { regions }
    }

    /// Defines a new region, rejecting overlap with any existing region.
    pub fn define(
        &mut self,
        grid: &DomainGrid,
        name: impl Into<String>,
        cells: &[usize],
        kind: RegionKind,
    ) -> Result<&Region> {
        let region = Region::new(grid, name, cells, kind)?;
        for existing in &self.regions {
            if let Some(&cell) = region.cell_ids.iter().find(|c| existing.contains_cell(**c)) {
                return Err(Error::RegionsOverlap {
                    new: region.name.clone(),
                    existing: existing.name.clone(),
                    cell,
                });
            }
        }
        let at = match kind {
            RegionKind::Pressure => self.pressure().count(),
            RegionKind::SeismicityRate => self.regions.len(),
        };
        self.regions.insert(at, region);
        Ok(&self.regions[at])
    }

    pub fn pressure(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.kind == RegionKind::Pressure)
    }

    pub fn sr(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.kind == RegionKind::SeismicityRate)
    }

    /// All regions, pressure outputs first (the order of σ).
    pub fn all(&self) -> &[Region] {
        &self.regions
    }

    pub fn m_u(&self) -> usize {
        self.pressure().count()
    }

    pub fn m_r(&self) -> usize {
        self.sr().count()
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

/// Indicator field B_i = 1/V_i* on the support, 0 elsewhere.
pub fn make_well_indicator(grid: &DomainGrid, support_cells: &[usize]) -> Result<ScalarField> {
    if support_cells.is_empty() {
        return Err(Error::EmptySupport);
    }
    let ids = grid.resolve_cells(support_cells)?;
    let support_volume = ids.len() as f64 * grid.cell_area();
    let mut field = ScalarField::zeros(grid);
    for &c in &ids {
        field[grid.active_index(c).unwrap()] = 1.0 / support_volume;
    }
    Ok(field)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Well {
    pub name: String,
    cell_ids: Vec<usize>,
    active: Vec<usize>,
    support_volume: f64,
    indicator: ScalarField,
}

impl Well {
    pub fn new(grid: &DomainGrid, name: impl Into<String>, support_cells: &[usize]) -> Result<Self> {
        let indicator = make_well_indicator(grid, support_cells)?;
        let cell_ids = grid.resolve_cells(support_cells)?;
        let active = cell_ids
            .iter()
            .map(|&c| grid.active_index(c).unwrap())
            .collect::<Vec<_>>();
        Ok(Well {
            name: name.into(),
            support_volume: active.len() as f64 * grid.cell_area(),
            cell_ids,
            active,
            indicator,
        })
    }

    pub fn cell_ids(&self) -> &[usize] {
        &self.cell_ids
    }

    pub fn active_indices(&self) -> &[usize] {
        &self.active
    }

    /// V_i* [km²].
    pub fn support_volume(&self) -> f64 {
        self.support_volume
    }

    pub fn indicator(&self) -> &ScalarField {
        &self.indicator
    }

    pub fn inside(&self, region: &Region) -> bool {
        self.cell_ids.iter().all(|&c| region.contains_cell(c))
    }

    fn touches(&self, region: &Region) -> bool {
        self.cell_ids.iter().any(|&c| region.contains_cell(c))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WellSet {
    wells: Vec<Well>,
}

impl WellSet {
    pub fn new(wells: Vec<Well>) -> Self {
        WellSet { wells }
    }

    pub fn len(&self) -> usize {
        self.wells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wells.is_empty()
    }

    pub fn wells(&self) -> &[Well] {
        &self.wells
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Well> {
        self.wells.iter()
    }

    /// Source density Σ_i B_i(x) Q_i per active cell [km²/yr / km²].
    pub fn source_density(&self, n_active: usize, rates: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; n_active];
        for (well, &q) in self.wells.iter().zip(rates) {
            let value = q / well.support_volume;
            for &k in &well.active {
                s[k] += value;
            }
        }
        s
    }

    pub fn min_support_volume(&self) -> Option<f64> {
        self.wells.iter().map(|w| w.support_volume).reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum A4Issue {
    RegionsOverlap { a: String, b: String, cells: usize },
    MoreOutputsThanInputs { outputs: usize, inputs: usize },
    RegionWithoutWell { region: String },
    WellStraddlesRegion { well: String, region: String },
    WellSupportsOverlap { a: String, b: String },
    NoOutputs,
}

impl fmt::Display for A4Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            A4Issue::RegionsOverlap { a, b, cells } => {
                write!(
                    f,
                    "regions must be disjoint (A4): `{a}` and `{b}` share {cells} cell(s)"
                )
            }
            A4Issue::MoreOutputsThanInputs { outputs, inputs } => {
                write!(f, "more outputs than inputs: m = {outputs} > n = {inputs}")
            }
            A4Issue::RegionWithoutWell { region } => {
                write!(f, "region `{region}` contains no well support")
            }
            A4Issue::WellStraddlesRegion { well, region } => {
                write!(f, "well `{well}` support lies partly inside region `{region}`")
            }
            A4Issue::WellSupportsOverlap { a, b } => {
                write!(f, "supports of wells `{a}` and `{b}` intersect")
            }
            A4Issue::NoOutputs => f.write_str("no output regions defined"),
        }
    }
}

/// Outcome of the structural assumption A4 check.
#[derive(Debug, Clone, PartialEq)]
pub struct A4Report {
    pub outputs: usize,
    pub inputs: usize,
    pub issues: Vec<A4Issue>,
}

impl A4Report {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks region disjointness, m ≤ n, and that every output region holds at
/// least one well support whose supports do not intersect.
pub fn check_assumption_a4(regions: &RegionSet, wells: &WellSet) -> A4Report {
    let mut issues = Vec::new();
    let all = regions.all();
    if all.is_empty() {
        issues.push(A4Issue::NoOutputs);
    }
    for (ia, a) in all.iter().enumerate() {
        for b in &all[ia + 1..] {
            let shared = a.cell_ids.iter().filter(|c| b.contains_cell(**c)).count();
            if shared > 0 {
                issues.push(A4Issue::RegionsOverlap {
                    a: a.name.clone(),
                    b: b.name.clone(),
                    cells: shared,
                });
            }
        }
    }
    if all.len() > wells.len() {
        issues.push(A4Issue::MoreOutputsThanInputs {
            outputs: all.len(),
            inputs: wells.len(),
        });
    }
    for region in all {
        if !wells.iter().any(|w| w.inside(region)) {
            issues.push(A4Issue::RegionWithoutWell {
                region: region.name.clone(),
            });
        }
        for well in wells.iter() {
            if well.touches(region) && !well.inside(region) {
                issues.push(A4Issue::WellStraddlesRegion {
                    well: well.name.clone(),
                    region: region.name.clone(),
                });
            }
        }
    }
    let ws = wells.wells();
    for (ia, a) in ws.iter().enumerate() {
        for b in &ws[ia + 1..] {
            if a.cell_ids.iter().any(|c| b.cell_ids.binary_search(c).is_ok()) {
                issues.push(A4Issue::WellSupportsOverlap {
                    a: a.name.clone(),
                    b: b.name.clone(),
                });
            }
        }
    }
    A4Report {
        outputs: all.len(),
        inputs: wells.len(),
        issues,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid10() -> DomainGrid {
        build_grid((30.0, 30.0), (10, 10), &Mask::full(10, 10)).unwrap()
    }

    #[test]
    fn full_grid_geometry() {
        let g = grid10();
        assert_eq!(g.n_active(), 100);
        assert_relative_eq!(g.cell_area(), 9.0);
        assert_relative_eq!(g.total_volume(), 900.0);
    }

    #[test]
    fn partial_mask_volume() {
        let mut mask = Mask::full(10, 10);
        // keep the bottom six rows: 60 connected cells
        for c in 60..100 {
            mask.cells[c] = false;
        }
        let g = build_grid((30.0, 30.0), (10, 10), &mask).unwrap();
        assert_eq!(g.n_active(), 60);
        assert_relative_eq!(g.total_volume(), 540.0);
    }

    #[test]
    fn empty_and_disconnected_masks_are_rejected() {
        let empty = Mask {
            nx: 10,
            ny: 10,
            cells: vec![false; 100],
        };
        assert!(matches!(
            build_grid((30.0, 30.0), (10, 10), &empty),
            Err(Error::NoActiveCells)
        ));
        let mut split = Mask::full(10, 10);
        for j in 0..10 {
            split.cells[j * 10 + 5] = false;
        }
        let err = build_grid((30.0, 30.0), (10, 10), &split).unwrap_err();
        assert!(err.to_string().contains("disconnected domain"));
        assert!(build_grid((30.0, 30.0), (1, 10), &Mask::full(1, 10)).is_err());
    }

    #[test]
    fn mask_rows_are_top_first() {
        let rows = vec!["#.".to_string(), "##".to_string()];
        let m = Mask::from_rows(&rows).unwrap();
        // bottom row fully active, top row only the left cell
        assert_eq!(m.cells, vec![true, true, true, false]);
    }

    #[test]
    fn region_volume_and_errors() {
        let g = grid10();
        let mut set = RegionSet::new();
        let cells: Vec<usize> = (0..3).flat_map(|j| (0..3).map(move |i| j * 10 + i)).collect();
        let r = set.define(&g, "u1", &cells, RegionKind::Pressure).unwrap();
        assert_relative_eq!(r.volume(), 81.0);
        let err = set.define(&g, "u2", &[0, 50], RegionKind::Pressure).unwrap_err();
        assert!(err.to_string().contains("regions must be disjoint (A4)"));
        let err = set.define(&g, "R1", &[0], RegionKind::SeismicityRate).unwrap_err();
        assert!(matches!(err, Error::RegionsOverlap { .. }));
        assert!(matches!(
            set.define(&g, "e", &[], RegionKind::Pressure),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn sr_regions_sort_after_pressure_regions() {
        let g = grid10();
        let mut set = RegionSet::new();
        set.define(&g, "R1", &[99], RegionKind::SeismicityRate).unwrap();
        set.define(&g, "u1", &[0], RegionKind::Pressure).unwrap();
        let names: Vec<&str> = set.all().iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["u1", "R1"]);
    }

    #[test]
    fn single_and_double_cell_indicators() {
        let g = grid10();
        let b = make_well_indicator(&g, &[12]).unwrap();
        assert_relative_eq!(b[g.active_index(12).unwrap()], 1.0 / 9.0);
        let integral: f64 = b.iter().map(|v| v * g.cell_area()).sum();
        assert_relative_eq!(integral, 1.0, epsilon = 1e-15);

        let b2 = make_well_indicator(&g, &[12, 13]).unwrap();
        assert_relative_eq!(b2[g.active_index(13).unwrap()], 1.0 / 18.0);
        let h0 = b2.iter().map(|v| v * v * g.cell_area()).sum::<f64>().sqrt();
        assert_relative_eq!(h0, 1.0 / 18f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn indicator_rejects_inactive_and_empty_support() {
        let mut mask = Mask::full(10, 10);
        mask.cells[99] = false;
        let g = build_grid((30.0, 30.0), (10, 10), &mask).unwrap();
        assert!(matches!(
            make_well_indicator(&g, &[98, 99]),
            Err(Error::InactiveCell { cell: 99 })
        ));
        assert!(matches!(make_well_indicator(&g, &[]), Err(Error::EmptySupport)));
    }

    #[test]
    fn a4_detects_missing_well_and_excess_outputs() {
        let g = grid10();
        let mut regions = RegionSet::new();
        regions.define(&g, "u1", &[0, 1], RegionKind::Pressure).unwrap();
        regions.define(&g, "R1", &[50, 51], RegionKind::SeismicityRate).unwrap();
        let wells = WellSet::new(vec![Well::new(&g, "w1", &[0]).unwrap()]);
        let report = check_assumption_a4(&regions, &wells);
        assert!(!report.passed());
        assert!(report
            .issues
            .contains(&A4Issue::RegionWithoutWell { region: "R1".into() }));
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, A4Issue::MoreOutputsThanInputs { outputs: 2, inputs: 1 })));

        let wells = WellSet::new(vec![
            Well::new(&g, "w1", &[0]).unwrap(),
            Well::new(&g, "w2", &[50]).unwrap(),
        ]);
        let report = check_assumption_a4(&regions, &wells);
        assert!(report.passed(), "{:?}", report.issues);
        assert_eq!(report, check_assumption_a4(&regions, &wells));
    }

    #[test]
    fn a4_flags_straddling_and_overlapping_supports() {
        let g = grid10();
        let regions = RegionSet::from_regions_unchecked(vec![
            Region::new(&g, "u1", &[0, 1], RegionKind::Pressure).unwrap(),
            Region::new(&g, "u2", &[1, 2], RegionKind::Pressure).unwrap(),
        ]);
        let wells = WellSet::new(vec![
            Well::new(&g, "w1", &[0]).unwrap(),
            Well::new(&g, "w2", &[0, 5]).unwrap(),
            Well::new(&g, "w3", &[2]).unwrap(),
        ]);
        let report = check_assumption_a4(&regions, &wells);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, A4Issue::RegionsOverlap { cells: 1, .. })));
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, A4Issue::WellStraddlesRegion { .. })));
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, A4Issue::WellSupportsOverlap { .. })));
    }
}
