//! Two-parameter sweeps of the Chern vector with the analytic crossing curves
//! overlaid, and their CSV / JSON / PPM output.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chern::{fhs_sums, is_decoupled, ChernVector};
use crate::config::entries;
use crate::cxmat::wrap_pi;
use crate::degeneracy::{crossing_gammas, dist_mod_pi, gamma_crossings, Branch};
use crate::error::{Error, Result};
use crate::raster::{Raster, Rgb};
use crate::scatter::{apply_gamma, build_s0, ParamName, ScatterParams};
use crate::spectral::band_set;

/// Cells whose γ lies this close to an analytic crossing are not integrated.
pub const BOUNDARY_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-3;
const REFINE_DEPTH: u32 = 10;
const CURVE_OVERSAMPLE: usize = 4;
/// Largest phase turn of 4(γ − γ_b) between samples before splitting.
const MAX_TURN: f64 = 0.5;
const SPLIT_DEPTH: u32 = 12;
const BISECTIONS: usize = 60;
const ROOT_TOL: f64 = 1e-6;
/// Birth angles grow like a square root past the edge, so rounding in the
/// solvability test shows up as about √ε in γ.
const EDGE_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: ParamName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn value(&self, i: usize) -> f64 {
        self.at((i as f64) / (self.count - 1) as f64)
    }

    /// Point at fraction `t` of the range.
    pub fn at(&self, t: f64) -> f64 {
        self.min + (self.max - self.min) * t
    }

    pub fn fraction(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandChoice {
    Band(usize),
    All,
}

impl BandChoice {
    /// 1-based band indices covered.
    pub fn bands(&self) -> Vec<usize> {
        match *self {
            BandChoice::Band(j) => vec![j],
            BandChoice::All => vec![1, 2, 3, 4],
        }
    }
}

impl FromStr for BandChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "all" => Ok(BandChoice::All),
            t => match t.parse::<usize>() {
                Ok(j @ 1..=4) => Ok(BandChoice::Band(j)),
                _ => Err(format!("band must be 1..4 or `all`, got `{t}`")),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Csv,
    Json,
    Ppm,
}

impl FromStr for OutputKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "csv" => Ok(OutputKind::Csv),
            "json" => Ok(OutputKind::Json),
            "ppm" | "raster" => Ok(OutputKind::Ppm),
            t => Err(format!("unknown output format `{t}`")),
        }
    }
}

pub fn parse_formats(s: &str) -> std::result::Result<Vec<OutputKind>, String> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub base: ScatterParams,
    pub axis1: Axis,
    pub axis2: Axis,
    pub grid_n: usize,
    /// Recompute each cell at twice the grid to set `converged`.
    pub verify: bool,
    pub band: BandChoice,
    pub outputs: Vec<OutputKind>,
}

impl ScanSpec {
    /// Parameter-file syntax plus `scan.*` keys:
    ///
    /// ```text
    /// beta = 0.3
    /// scan.axis1 = alpha
    /// scan.axis1.min = 0
    /// scan.axis1.max = pi
    /// scan.axis1.count = 200
    /// scan.axis2 = gamma      # same three range keys
    /// scan.grid = 40
    /// scan.band = 1           # or all
    /// scan.formats = csv,ppm
    /// ```
    pub fn parse(text: &str) -> Result<ScanSpec> {
        let mut base = ScatterParams::default();
        let mut names: [Option<ParamName>; 2] = [None, None];
        let mut ranges = [[None; 3]; 2];
        let mut grid_n = 40;
        let mut verify = true;
        let mut band = None;
        let mut outputs = vec![OutputKind::Csv];
        for e in entries(text)? {
            let Some(key) = e.key.strip_prefix("scan.") else {
                let name: ParamName = e.key.parse().map_err(|msg| e.error(msg))?;
                base.set(name, e.angle()?);
                continue;
            };
            let axis = match key.get(..5) {
                Some("axis1") => Some(0),
                Some("axis2") => Some(1),
                _ => None,
            };
            match (axis, key.get(5..).unwrap_or("")) {
                (Some(a), "") => names[a] = Some(e.value.parse().map_err(|msg| e.error(msg))?),
                (Some(a), ".min") => ranges[a][0] = Some(e.angle()?),
                (Some(a), ".max") => ranges[a][1] = Some(e.angle()?),
                (Some(a), ".count") => ranges[a][2] = Some(e.count()? as f64),
                (None, _) => match key {
                    "grid" => grid_n = e.count()?,
                    "verify" => verify = e.value.parse().map_err(|_| e.error(format!("expected true/false, got `{}`", e.value)))?,
                    "band" => band = Some(e.value.parse().map_err(|msg| e.error(msg))?),
                    "formats" => outputs = parse_formats(&e.value).map_err(|msg| e.error(msg))?,
                    _ => return Err(e.error(format!("unknown key `{}`", e.key))),
                },
                _ => return Err(e.error(format!("unknown key `{}`", e.key))),
            }
        }
        let axis = |a: usize| -> Result<Axis> {
            let missing = |what: &str| Error::InvalidScan(format!("missing scan.axis{}{what}", a + 1));
            Ok(Axis {
                param: names[a].ok_or_else(|| missing(""))?,
                min: ranges[a][0].ok_or_else(|| missing(".min"))?,
                max: ranges[a][1].ok_or_else(|| missing(".max"))?,
                count: ranges[a][2].ok_or_else(|| missing(".count"))? as usize,
            })
        };
        let spec = ScanSpec {
            base,
            axis1: axis(0)?,
            axis2: axis(1)?,
            grid_n,
            verify,
            band: band.ok_or_else(|| Error::InvalidScan("missing scan.band (1..4 or all)".into()))?,
            outputs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScan(msg));
        if self.axis1.param == self.axis2.param {
            return bad(format!("both axes scan `{}`", self.axis1.param));
        }
        for (i, a) in [self.axis1, self.axis2].iter().enumerate() {
            if !(a.min.is_finite() && a.max.is_finite()) || a.min >= a.max {
                return bad(format!("axis{} range must be finite with min < max", i + 1));
            }
            if a.count < 2 {
                return bad(format!("axis{} needs at least 2 samples", i + 1));
            }
        }
        if !self.base.is_finite() {
            return bad("non-finite base parameter".into());
        }
        if self.grid_n < 8 {
            return bad(format!("scan.grid must be >= 8, got {}", self.grid_n));
        }
        if let BandChoice::Band(j) = self.band {
            if !(1..=4).contains(&j) {
                return bad(format!("band must be 1..4, got {j}"));
            }
        }
        if self.outputs.is_empty() {
            return bad("no output formats".into());
        }
        if self.outputs.iter().collect::<HashSet<_>>().len() != self.outputs.len() {
            return bad("repeated output format".into());
        }
        Ok(())
    }

    pub fn params_at(&self, x: f64, y: f64) -> ScatterParams {
        self.base.with(self.axis1.param, x).with(self.axis2.param, y)
    }

    pub fn cell_params(&self, i: usize, j: usize) -> ScatterParams {
        self.params_at(self.axis1.value(i), self.axis2.value(j))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum Cell {
    Determined {
        chern: ChernVector,
    },
    /// On or next to a band crossing; no integer is claimed.
    Boundary {
        reason: String,
    },
    Undetermined {
        error: String,
    },
}

impl Cell {
    pub fn chern(&self) -> Option<&ChernVector> {
        match self {
            Cell::Determined { chern } => Some(chern),
            _ => None,
        }
    }
}

pub fn evaluate_cell(p: &ScatterParams, grid_n: usize, verify: bool) -> Cell {
    if !p.is_finite() {
        return Cell::Undetermined { error: "non-finite parameters".into() };
    }
    let s0 = build_s0(p);
    let s = apply_gamma(&s0, p.gamma);
    if is_decoupled(&s) {
        return Cell::Determined { chern: ChernVector { c: [0; 4], grid_n, converged: true } };
    }
    match crossing_gammas(&s0) {
        Ok(Some(set)) => {
            if let Some((_, g)) = set.iter().find(|(_, g)| dist_mod_pi(p.gamma, *g) < BOUNDARY_TOL) {
                return Cell::Boundary { reason: format!("crossing at gamma = {g}") };
            }
        }
        // bands touch for every gamma here
        Err(e @ Error::DegenerateEllipse { .. }) => return Cell::Boundary { reason: e.to_string() },
        _ => {}
    }
    let sums = match fhs_sums(&s, grid_n, REFINE_DEPTH) {
        Ok(x) => x,
        Err(e @ Error::GapClosure { .. }) => return Cell::Boundary { reason: e.to_string() },
        Err(e) => return Cell::Undetermined { error: e.to_string() },
    };
    if sums.residual() > RESIDUAL_TOL {
        return Cell::Boundary { reason: format!("non-integer lattice sum (residual {:.1e})", sums.residual()) };
    }
    let c = sums.rounded();
    if c.iter().sum::<i32>() != 0 {
        return Cell::Boundary { reason: format!("bands touch off the lattice, sums {c:?}") };
    }
    let converged = !verify || matches!(fhs_sums(&s, 2 * grid_n, REFINE_DEPTH), Ok(d) if d.rounded() == c && d.residual() <= RESIDUAL_TOL);
    Cell::Determined { chern: ChernVector { c, grid_n, converged } }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// (axis1, axis2) coordinates.
    pub at: [f64; 2],
    /// Upper-band Chern jump for increasing γ.
    pub gamma_sign: Option<i8>,
    /// Upper-band jump when the curve is crossed along increasing axis1, axis2.
    pub axis_sign: [Option<i8>; 2],
    /// Upper band (1-based) of the crossing pair at flux_a and at flux_b.
    pub upper_bands: Option<[usize; 2]>,
}

impl CurvePoint {
    /// Sign used for drawing: along axis2 when defined.
    pub fn display_sign(&self) -> Option<i8> {
        self.axis_sign[1].or(self.axis_sign[0]).or(self.gamma_sign)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub branch: Branch,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub spec: ScanSpec,
    /// Row-major: index i·axis2.count + j for sample i of axis1, j of axis2.
    pub cells: Vec<Cell>,
    pub boundary_curves: Vec<BoundaryCurve>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanSummary {
    pub cells: usize,
    pub determined: usize,
    pub not_converged: usize,
    pub boundary: usize,
    pub undetermined: usize,
    pub curves: usize,
}

impl ScanSummary {
    pub fn is_partial(&self) -> bool {
        self.undetermined > 0
    }
}

impl fmt::Display for ScanSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} cells: {} determined ({} not converged), {} boundary, {} undetermined; {} curves",
            self.cells, self.determined, self.not_converged, self.boundary, self.undetermined, self.curves
        )
    }
}

impl PhaseGrid {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.spec.axis2.count + j]
    }

    pub fn summary(&self) -> ScanSummary {
        let mut s = ScanSummary { cells: self.cells.len(), curves: self.boundary_curves.len(), ..Default::default() };
        for c in &self.cells {
            match c {
                Cell::Determined { chern } => {
                    s.determined += 1;
                    s.not_converged += !chern.converged as usize;
                }
                Cell::Boundary { .. } => s.boundary += 1,
                Cell::Undetermined { .. } => s.undetermined += 1,
            }
        }
        s
    }
}

pub fn run_scan(spec: &ScanSpec) -> Result<PhaseGrid> {
    spec.validate()?;
    let (n1, n2) = (spec.axis1.count, spec.axis2.count);
    let cells =
        (0..n1 * n2).into_par_iter().map(|idx| evaluate_cell(&spec.cell_params(idx / n2, idx % n2), spec.grid_n, spec.verify)).collect();
    Ok(PhaseGrid { spec: spec.clone(), cells, boundary_curves: boundary_curves(spec) })
}

/// Branches of one sign sit π/2 apart and trade the quarter label freely,
/// so each sign gets one field vanishing on both: wrap(4(γ − γ_b))/4.
/// The two signs can also trade values, see [`align`].
fn pair_field(spec: &ScanSpec, x: f64, y: f64) -> Option<[f64; 2]> {
    let p = spec.params_at(x, y);
    let set = crossing_gammas(&build_s0(&p)).ok()??;
    let mut out = [0.0; 2];
    for (branch, g) in set.iter().filter(|(b, _)| !b.quarter) {
        out[(branch.sign < 0) as usize] = wrap_pi(4.0 * (p.gamma - g)) / 4.0;
    }
    Some(out)
}

/// Orders `next` to continue `prev` with the least phase turn.
fn align(prev: [f64; 2], next: [f64; 2]) -> [f64; 2] {
    let turn = |c: [f64; 2]| (0..2).map(|q| wrap_pi(4.0 * (c[q] - prev[q])).abs()).sum::<f64>();
    let swapped = [next[1], next[0]];
    if turn(swapped) < turn(next) {
        swapped
    } else {
        next
    }
}

/// Crossing curves of the scan plane, traced as roots of the pair fields
/// along both axes and chained into polylines.
pub fn boundary_curves(spec: &ScanSpec) -> Vec<BoundaryCurve> {
    let lines: Vec<(usize, usize)> = (0..spec.axis1.count).map(|i| (1, i)).chain((0..spec.axis2.count).map(|j| (0, j))).collect();
    let roots: Vec<[f64; 2]> = lines.par_iter().flat_map_iter(|&(along, fixed)| line_roots(spec, along, fixed)).collect();
    let points: Vec<CurvePoint> = roots.into_par_iter().map(|at| curve_point(spec, at)).collect();
    chain(spec, points)
        .into_iter()
        .filter_map(|line| {
            let branch = line.iter().find_map(|p| nearest_branch(spec, p.at))?;
            Some(BoundaryCurve { branch, points: line })
        })
        .collect()
}

/// Roots along axis `along` (0 or 1) with the other axis at sample `fixed`.
fn line_roots(spec: &ScanSpec, along: usize, fixed: usize) -> Vec<[f64; 2]> {
    let (moving, other) = if along == 0 { (spec.axis1, spec.axis2) } else { (spec.axis2, spec.axis1) };
    let c = other.value(fixed);
    let point = |t: f64| -> [f64; 2] {
        let x = moving.at(t);
        if along == 0 {
            [x, c]
        } else {
            [c, x]
        }
    };
    let field = |t: f64| {
        let [x, y] = point(t);
        pair_field(spec, x, y)
    };
    let m = (moving.count - 1) * CURVE_OVERSAMPLE;
    let samples: Vec<Option<[f64; 2]>> = (0..=m).map(|s| field(s as f64 / m as f64)).collect();
    let mut out = Vec::new();
    for s in 0..m {
        let (t0, t1) = (s as f64 / m as f64, (s + 1) as f64 / m as f64);
        interval_roots((t0, samples[s]), (t1, samples[s + 1]), [false; 2], 0, &field, &mut out);
    }
    out.into_iter().map(point).collect()
}

/// Roots between two samples, split while the field phase turns fast.
fn interval_roots(
    (ta, fa): (f64, Option<[f64; 2]>),
    (tb, fb): (f64, Option<[f64; 2]>),
    skip: [bool; 2],
    depth: u32,
    field: &dyn Fn(f64) -> Option<[f64; 2]>,
    out: &mut Vec<f64>,
) {
    match (fa, fb) {
        (Some(u), Some(v)) => {
            let v = align(u, v);
            let turn = (0..2).map(|q| wrap_pi(4.0 * (v[q] - u[q])).abs()).fold(0.0, f64::max);
            if turn > MAX_TURN && depth < SPLIT_DEPTH {
                let tm = 0.5 * (ta + tb);
                let fm = field(tm).map(|m| align(u, m));
                interval_roots((ta, fa), (tm, fm), skip, depth + 1, field, out);
                interval_roots((tm, fm), (tb, Some(v)), [false; 2], depth + 1, field, out);
            } else {
                sign_roots((ta, u), (tb, v), &skip, field, out);
            }
        }
        (None, None) => {}
        _ => {
            let (inside, edge) = match fa {
                Some(_) => ((ta, fa), solvability_edge(ta, tb, field)),
                None => ((tb, fb), solvability_edge(tb, ta, field)),
            };
            let Some(fe) = field(edge) else { return };
            // Crossings are born in pairs on the edge; it is a phase
            // boundary when one of them is born at the cell's γ.
            let at_edge = fe.map(|v| v.abs() < EDGE_TOL);
            if at_edge.contains(&true) {
                out.push(edge);
            }
            interval_roots((edge, Some(fe)), inside, at_edge, depth, field, out);
        }
    }
}

/// Bisected sign changes of each pair field between two solvable points.
fn sign_roots(
    (ta, fa): (f64, [f64; 2]),
    (tb, fb): (f64, [f64; 2]),
    skip: &[bool; 2],
    field: &dyn Fn(f64) -> Option<[f64; 2]>,
    out: &mut Vec<f64>,
) {
    for q in 0..2 {
        // A zero at the start belongs to the previous interval.
        if skip[q] || fa[q] == 0.0 || fa[q] * fb[q] > 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (ta, tb, fa);
        let mut ok = true;
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let Some(fm) = field(mid).map(|m| align(flo, m)) else {
                ok = false;
                break;
            };
            if (fm[q] <= 0.0) == (flo[q] <= 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        // Wrap jumps also flip the sign; only true zeros pass.
        if ok && field(t).is_some_and(|f| align(flo, f)[q].abs() < ROOT_TOL) {
            out.push(t);
        }
    }
}

/// Last solvable point between solvable `from` and unsolvable `to`.
fn solvability_edge(mut from: f64, mut to: f64, field: &dyn Fn(f64) -> Option<[f64; 2]>) -> f64 {
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (from + to);
        if field(mid).is_some() {
            from = mid;
        } else {
            to = mid;
        }
    }
    from
}

/// Branch whose crossing γ is closest to γ at `at`.
fn nearest_branch(spec: &ScanSpec, at: [f64; 2]) -> Option<Branch> {
    let p = spec.params_at(at[0], at[1]);
    let set = crossing_gammas(&build_s0(&p)).ok()??;
    set.into_iter().min_by(|u, v| dist_mod_pi(p.gamma, u.1).total_cmp(&dist_mod_pi(p.gamma, v.1))).map(|(b, _)| b)
}

/// The crossing nearest γ, seen from one point of the plane.
struct LocalCrossing {
    /// γ minus the nearest crossing γ; increases across the curve exactly when γ does.
    offset: f64,
    gamma_sign: Option<i8>,
    upper_bands: Option<[usize; 2]>,
}

fn local_crossing(spec: &ScanSpec, at: [f64; 2]) -> Option<LocalCrossing> {
    let p = spec.params_at(at[0], at[1]);
    let s0 = build_s0(&p);
    let f = pair_field(spec, at[0], at[1])?;
    let sol = gamma_crossings(&s0)
        .ok()
        .and_then(|sols| sols.into_iter().min_by(|u, v| dist_mod_pi(u.gamma, p.gamma).total_cmp(&dist_mod_pi(v.gamma, p.gamma))));
    // offset and sign must describe the same crossing
    let offset = match &sol {
        Some(sol) => wrap_pi(2.0 * (p.gamma - sol.gamma)) / 2.0,
        None if f[0].abs() <= f[1].abs() => f[0],
        None => f[1],
    };
    let upper_bands = sol.as_ref().and_then(|sol| {
        let s = apply_gamma(&s0, sol.gamma);
        let up = |flux| band_set(&s, flux, None).ok().map(|bs| bs.closest_pair().1 + 1);
        Some([up(sol.flux_a)?, up(sol.flux_b)?])
    });
    Some(LocalCrossing { offset, gamma_sign: sol.and_then(|s| s.sign), upper_bands })
}

fn curve_point(spec: &ScanSpec, at: [f64; 2]) -> CurvePoint {
    let here = local_crossing(spec, at);
    let mut gamma_sign = here.as_ref().and_then(|l| l.gamma_sign);
    let mut upper_bands = here.as_ref().and_then(|l| l.upper_bands);
    let mut axis_sign = [None; 2];
    for (a, axis) in [spec.axis1, spec.axis2].iter().enumerate() {
        let h = 1e-6 * (axis.max - axis.min);
        let (mut lo, mut hi) = (at, at);
        lo[a] -= h;
        hi[a] += h;
        let (l, u) = (local_crossing(spec, lo), local_crossing(spec, hi));
        for side in [&l, &u].into_iter().flatten() {
            gamma_sign = gamma_sign.or(side.gamma_sign);
            upper_bands = upper_bands.or(side.upper_bands);
        }
        // Just inside a solvability edge the new pair of crossings straddles
        // γ, and the phase between them differs from the outside phase by the
        // lower crossing's jump.
        let entering = |c: &LocalCrossing| c.gamma_sign.map(|s| s * c.offset.signum() as i8);
        axis_sign[a] = match (&l, &u) {
            (Some(l), Some(u)) => {
                let d = (u.offset - l.offset) / (2.0 * h);
                if d.abs() > 1e-6 {
                    gamma_sign.map(|s| s * d.signum() as i8)
                } else {
                    None
                }
            }
            (Some(l), None) => entering(l).map(|s| -s),
            (None, Some(u)) => entering(u),
            (None, None) => None,
        };
    }
    CurvePoint { at, gamma_sign, axis_sign, upper_bands }
}

/// Greedy nearest-neighbour chaining in unit-square coordinates.
fn chain(spec: &ScanSpec, mut pts: Vec<CurvePoint>) -> Vec<Vec<CurvePoint>> {
    let unit = |p: &CurvePoint| [spec.axis1.fraction(p.at[0]), spec.axis2.fraction(p.at[1])];
    pts.sort_by(|a, b| unit(a).partial_cmp(&unit(b)).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup_by(|a, b| {
        let (u, v) = (unit(a), unit(b));
        (u[0] - v[0]).hypot(u[1] - v[1]) < 1e-9
    });
    let step = 1.0 / (spec.axis1.count.min(spec.axis2.count) - 1) as f64;
    let reach = 2.0 * step;
    let mut used = vec![false; pts.len()];
    let mut lines = Vec::new();
    for start in 0..pts.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut line = std::collections::VecDeque::from([start]);
        for at_back in [true, false] {
            loop {
                let end = if at_back { *line.back().unwrap() } else { *line.front().unwrap() };
                let e = unit(&pts[end]);
                let next = (0..pts.len())
                    .filter(|&k| !used[k])
                    .map(|k| {
                        let u = unit(&pts[k]);
                        (k, (u[0] - e[0]).hypot(u[1] - e[1]))
                    })
                    .filter(|&(_, d)| d <= reach)
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                let Some((k, _)) = next else { break };
                used[k] = true;
                if at_back {
                    line.push_back(k);
                } else {
                    line.push_front(k);
                }
            }
        }
        lines.push(line.into_iter().map(|k| pts[k].clone()).collect());
    }
    lines
}

pub fn write_csv<W: Write>(grid: &PhaseGrid, mut w: W) -> Result<()> {
    writeln!(w, "axis1,axis2,c1,c2,c3,c4,converged")?;
    let (a1, a2) = (grid.spec.axis1, grid.spec.axis2);
    for i in 0..a1.count {
        for j in 0..a2.count {
            write!(w, "{:.11e},{:.11e},", a1.value(i), a2.value(j))?;
            match grid.cell(i, j) {
                Cell::Determined { chern } => {
                    let c = chern.c;
                    writeln!(w, "{},{},{},{},{}", c[0], c[1], c[2], c[3], chern.converged)?
                }
                Cell::Boundary { .. } => writeln!(w, "NA,NA,NA,NA,boundary")?,
                Cell::Undetermined { .. } => writeln!(w, "NA,NA,NA,NA,undetermined")?,
            }
        }
    }
    Ok(())
}

pub fn write_json<W: Write>(grid: &PhaseGrid, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, grid)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_json(text: &str) -> Result<PhaseGrid> {
    Ok(serde_json::from_str(text)?)
}

pub const POSITIVE: Rgb = [244, 160, 160];
pub const NEGATIVE: Rgb = [160, 180, 244];
pub const ZERO: Rgb = [255, 255, 255];
pub const BOUNDARY: Rgb = [200, 200, 200];
pub const UNDETERMINED: Rgb = [128, 128, 128];
pub const CURVE_POSITIVE: Rgb = [190, 0, 0];
pub const CURVE_NEGATIVE: Rgb = [0, 0, 190];
pub const CURVE_UNSIGNED: Rgb = [0, 0, 0];

/// One pixel per cell, axis1 to the right and axis2 upwards, with the
/// crossing curves drawn on top.
pub fn phase_raster(grid: &PhaseGrid, band: usize) -> Raster {
    let (n1, n2) = (grid.spec.axis1.count, grid.spec.axis2.count);
    let mut img = Raster::new(n1, n2, ZERO);
    for i in 0..n1 {
        for j in 0..n2 {
            let color = match grid.cell(i, j) {
                Cell::Determined { chern } => match chern.c[band - 1] {
                    0 => ZERO,
                    c if c > 0 => POSITIVE,
                    _ => NEGATIVE,
                },
                Cell::Boundary { .. } => BOUNDARY,
                Cell::Undetermined { .. } => UNDETERMINED,
            };
            img.set(i, n2 - 1 - j, color);
        }
    }
    let pixel = |p: &CurvePoint| -> (i64, i64) {
        let x = (grid.spec.axis1.fraction(p.at[0]) * (n1 - 1) as f64).round() as i64;
        let y = (grid.spec.axis2.fraction(p.at[1]) * (n2 - 1) as f64).round() as i64;
        (x, (n2 - 1) as i64 - y)
    };
    for curve in &grid.boundary_curves {
        for (k, p) in curve.points.iter().enumerate() {
            let color = match p.display_sign() {
                Some(1) => CURVE_POSITIVE,
                Some(_) => CURVE_NEGATIVE,
                None => CURVE_UNSIGNED,
            };
            let from = pixel(p);
            let to = curve.points.get(k + 1).map(pixel).unwrap_or(from);
            img.line(from, to, color);
        }
    }
    img
}

/// Write the requested outputs into `dir`; returns the files written.
pub fn emit(grid: &PhaseGrid, kind: OutputKind, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let create = |name: String| -> Result<(PathBuf, BufWriter<fs::File>)> {
        let path = dir.join(name);
        let file = fs::File::create(&path)?;
        Ok((path, BufWriter::new(file)))
    };
    let mut written = Vec::new();
    match kind {
        OutputKind::Csv => {
            let (path, mut w) = create("phase.csv".into())?;
            write_csv(grid, &mut w)?;
            w.flush()?;
            written.push(path);
        }
        OutputKind::Json => {
            let (path, mut w) = create("phase.json".into())?;
            write_json(grid, &mut w)?;
            w.flush()?;
            written.push(path);
        }
        OutputKind::Ppm => {
            let bands = grid.spec.band.bands();
            for band in bands.iter().copied() {
                let name = if bands.len() == 1 { "phase.ppm".to_string() } else { format!("phase_c{band}.ppm") };
                let (path, mut w) = create(name)?;
                phase_raster(grid, band).write_ppm(&mut w)?;
                w.flush()?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec_text(extra: &str) -> String {
        format!(
            "beta = 0.3\ntheta1 = pi/4\ntheta2 = pi/3\neta1 = pi/2\neta2 = pi/6\nnu1 = 0.6\n\
             scan.axis1 = alpha\nscan.axis1.min = 0\nscan.axis1.max = pi\nscan.axis1.count = 3\n\
             scan.axis2 = gamma\nscan.axis2.min = 0\nscan.axis2.max = pi/2\nscan.axis2.count = 2\n\
             scan.band = 2\n{extra}"
        )
    }

    #[test]
    fn parse_scan_file() {
        let s = ScanSpec::parse(&spec_text("scan.formats = csv,json,ppm\nscan.grid = 16\n")).unwrap();
        assert_eq!(s.axis1, Axis { param: ParamName::Alpha, min: 0.0, max: PI, count: 3 });
        assert_eq!(s.axis2.param, ParamName::Gamma);
        assert_eq!(s.band, BandChoice::Band(2));
        assert_eq!(s.grid_n, 16);
        assert_eq!(s.outputs, vec![OutputKind::Csv, OutputKind::Json, OutputKind::Ppm]);
        assert_eq!(s.base.nu1, 0.6);
        assert_eq!(s.cell_params(2, 1).alpha, PI);
        assert_eq!(s.cell_params(2, 1).gamma, PI / 2.0);
    }

    #[test]
    fn invalid_specs() {
        let same = spec_text("").replace("scan.axis2 = gamma", "scan.axis2 = alpha");
        assert!(matches!(ScanSpec::parse(&same), Err(Error::InvalidScan(_))));
        let one = spec_text("").replace("scan.axis1.count = 3", "scan.axis1.count = 1");
        assert!(matches!(ScanSpec::parse(&one), Err(Error::InvalidScan(_))));
        let flipped = spec_text("").replace("scan.axis1.max = pi", "scan.axis1.max = -1");
        assert!(ScanSpec::parse(&flipped).is_err());
        assert!(ScanSpec::parse(&spec_text("").replace("scan.band = 2\n", "")).is_err());
        assert!(ScanSpec::parse(&spec_text("scan.band2 = 1\n")).is_err());
        assert!(matches!(ScanSpec::parse(&spec_text("scan.formats = csv,gif\n")), Err(Error::Parse { .. })));
        assert!(matches!(ScanSpec::parse(&spec_text("zeta = 1\n")), Err(Error::Parse { .. })));
        assert!(ScanSpec::parse(&spec_text("scan.grid = 4\n")).is_err());
    }

    #[test]
    fn band_choice() {
        assert_eq!("all".parse::<BandChoice>(), Ok(BandChoice::All));
        assert_eq!("4".parse::<BandChoice>(), Ok(BandChoice::Band(4)));
        assert!("0".parse::<BandChoice>().is_err());
        assert!("5".parse::<BandChoice>().is_err());
    }

    fn trivial_grid() -> PhaseGrid {
        // Identity scatterer blocks: decoupled loops everywhere.
        let spec = ScanSpec {
            base: ScatterParams::default(),
            axis1: Axis { param: ParamName::Theta1, min: 0.0, max: 1.0, count: 2 },
            axis2: Axis { param: ParamName::Eta2, min: 0.0, max: 1.0, count: 2 },
            grid_n: 8,
            verify: true,
            band: BandChoice::Band(1),
            outputs: vec![OutputKind::Csv],
        };
        run_scan(&spec).unwrap()
    }

    #[test]
    fn trivial_csv() {
        let g = trivial_grid();
        let mut buf = Vec::new();
        write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "axis1,axis2,c1,c2,c3,c4,converged");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0.00000000000e0,0.00000000000e0,0,0,0,0,true");
        assert_eq!(lines[2], "0.00000000000e0,1.00000000000e0,0,0,0,0,true");
        assert!(lines[3].starts_with("1.00000000000e0,0.00000000000e0,"));
        assert!(g.boundary_curves.is_empty());
        assert!(!g.summary().is_partial());
    }

    #[test]
    fn raster_layout() {
        let g = trivial_grid();
        let img = phase_raster(&g, 1);
        assert_eq!((img.width, img.height), (2, 2));
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("P3\n2 2\n255\n"));
    }

    #[test]
    fn json_round_trip() {
        let mut g = trivial_grid();
        g.cells[1] = Cell::Boundary { reason: "test".into() };
        g.cells[2] = Cell::Undetermined { error: "x".into() };
        g.boundary_curves.push(BoundaryCurve {
            branch: Branch { sign: -1, quarter: true },
            points: vec![CurvePoint { at: [0.1, 1.0 / 3.0], gamma_sign: Some(1), axis_sign: [None, Some(-1)], upper_bands: Some([2, 4]) }],
        });
        let mut buf = Vec::new();
        write_json(&g, &mut buf).unwrap();
        assert_eq!(read_json(std::str::from_utf8(&buf).unwrap()).unwrap(), g);
    }

    #[test]
    fn cell_on_a_crossing_is_boundary() {
        let p = ScatterParams {
            alpha: 1.0,
            beta: 0.3,
            theta1: PI / 4.0,
            theta2: PI / 3.0,
            eta1: PI / 2.0,
            eta2: PI / 6.0,
            nu1: 0.6,
            ..Default::default()
        };
        let sols = gamma_crossings(&build_s0(&p)).unwrap();
        assert!(!sols.is_empty());
        let on = ScatterParams { gamma: sols[0].gamma, ..p };
        assert!(matches!(evaluate_cell(&on, 16, false), Cell::Boundary { .. }));
        let off = ScatterParams { gamma: sols[0].gamma + 0.05, ..p };
        assert!(matches!(evaluate_cell(&off, 24, false), Cell::Determined { .. }));
    }

    #[test]
    fn curves_follow_crossings_when_gamma_is_an_axis() {
        let spec =
            ScanSpec::parse(&spec_text("").replace("scan.axis2.max = pi/2", "scan.axis2.max = 3.1").replace("count = 3", "count = 9"))
                .unwrap();
        let curves = boundary_curves(&spec);
        assert!(!curves.is_empty());
        for c in &curves {
            for p in &c.points {
                let q = spec.params_at(p.at[0], p.at[1]);
                let sols = gamma_crossings(&build_s0(&q)).unwrap();
                let d = sols.iter().map(|s| dist_mod_pi(s.gamma, q.gamma)).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-6, "{d}");
                // Along γ the plane sign is the γ sign itself.
                assert_eq!(p.axis_sign[1], p.gamma_sign);
            }
        }
    }
}
