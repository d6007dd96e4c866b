//! Parametric fin and post layouts, fin-count sweeps and a bounded
//! Nelder–Mead search over fin thicknesses and post dimensions.
//!
//! Fins grow from opposite walls toward the centre, each arm reaching 45% of
//! the domain side, at pitch `side / (count + 1)`. Horizontal fins come from
//! the left and right walls, vertical fins from the bottom and top. The post
//! is a plus shape at the domain centre: a vertical bar `A × H` crossed by a
//! horizontal bar `W × B`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ThermalBC;
use crate::filter::DensityField;
use crate::material::MaterialPair;
use crate::mesh::{Mesh, RegionMap};
use crate::sparse::SolverOptions;
use crate::topopt::{DesignProblem, ObjectiveSpec};

/// Fraction of the domain side covered by one fin arm.
pub const FIN_EXTENT: f64 = 0.45;
/// Default fin thickness (m).
pub const DEFAULT_THICKNESS: f64 = 0.1;
/// Thinnest fin the optimizer may propose (m).
pub const MIN_THICKNESS: f64 = 0.01;
/// Upper thickness bound as a fraction of the pitch.
pub const MAX_PITCH_FRACTION: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinOrientation {
    /// Horizontal fins only.
    Single,
    /// Horizontal and vertical fins.
    Paired,
}

/// One of the eight named setups: family 1 or 2, variant A to D.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Setup {
    pub family: u8,
    pub variant: char,
}

impl Setup {
    pub const ALL: [&'static str; 8] = ["1A", "1B", "1C", "1D", "2A", "2B", "2C", "2D"];

    pub fn fin_count(&self) -> usize {
        if self.family == 1 {
            18
        } else {
            36
        }
    }

    pub fn orientation(&self) -> FinOrientation {
        match self.variant {
            'A' | 'B' => FinOrientation::Single,
            _ => FinOrientation::Paired,
        }
    }

    pub fn has_post(&self) -> bool {
        matches!(self.variant, 'B' | 'C')
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Setup> {
        let mut chars = s.trim().chars();
        match (
            chars.next(),
            chars.next().map(|c| c.to_ascii_uppercase()),
            chars.next(),
        ) {
            (Some(f @ ('1' | '2')), Some(v @ ('A'..='D')), None) => Ok(Setup {
                family: f as u8 - b'0',
                variant: v,
            }),
            _ => Err(Error::UnknownSetup(s.to_string())),
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family, self.variant)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Post {
    /// Vertical bar length `H` (m).
    pub height: f64,
    /// Horizontal bar length `W` (m).
    pub width: f64,
    /// Vertical bar thickness `A` (m).
    pub thick_a: f64,
    /// Horizontal bar thickness `B` (m).
    pub thick_b: f64,
}

impl Default for Post {
    fn default() -> Self {
        Post {
            height: 3.0,
            width: 3.0,
            thick_a: 0.5,
            thick_b: 0.5,
        }
    }
}

/// Axis-aligned solid rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinLayout {
    pub lx: f64,
    pub ly: f64,
    pub orientation: FinOrientation,
    /// Fins per orientation.
    pub count: usize,
    /// Horizontal fin thicknesses first, then vertical ones for paired layouts.
    pub thickness: Vec<f64>,
    pub post: Option<Post>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<String>,
}

/// Optional replacements applied on top of a named setup.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutOverrides {
    pub count: Option<usize>,
    pub thickness: Option<f64>,
    pub post: Option<Post>,
}

impl FinLayout {
    pub fn empty(lx: f64, ly: f64) -> FinLayout {
        FinLayout {
            lx,
            ly,
            orientation: FinOrientation::Single,
            count: 0,
            thickness: Vec::new(),
            post: None,
            setup: None,
        }
    }

    /// Evenly pitched fins of a single thickness.
    pub fn uniform(
        lx: f64,
        ly: f64,
        orientation: FinOrientation,
        count: usize,
        thickness: f64,
    ) -> FinLayout {
        let per = match orientation {
            FinOrientation::Single => 1,
            FinOrientation::Paired => 2,
        };
        FinLayout {
            lx,
            ly,
            orientation,
            count,
            thickness: vec![thickness; per * count],
            post: None,
            setup: None,
        }
    }

    /// Spacing between horizontal fins, then between vertical fins.
    pub fn pitch(&self) -> (f64, f64) {
        let n = (self.count + 1) as f64;
        (self.ly / n, self.lx / n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::InvalidGeometry(
                "layout domain must be positive".into(),
            ));
        }
        let expected = match self.orientation {
            FinOrientation::Single => self.count,
            FinOrientation::Paired => 2 * self.count,
        };
        if self.thickness.len() != expected {
            return Err(Error::SizeMismatch {
                what: "fin thickness vector",
                expected,
                got: self.thickness.len(),
            });
        }
        let (ph, pv) = self.pitch();
        for (i, &t) in self.thickness.iter().enumerate() {
            let pitch = if i < self.count { ph } else { pv };
            if !(t > 0.0 && t < pitch) {
                return Err(Error::InvalidGeometry(format!(
                    "fin {i}: thickness {t} must lie in (0, {pitch})"
                )));
            }
        }
        if let Some(p) = &self.post {
            let dims = [p.height, p.width, p.thick_a, p.thick_b];
            if dims.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidGeometry(
                    "post dimensions must be positive".into(),
                ));
            }
            if p.height > self.ly || p.width > self.lx || p.thick_a > self.lx || p.thick_b > self.ly
            {
                return Err(Error::InvalidGeometry(
                    "post does not fit the domain".into(),
                ));
            }
        }
        Ok(())
    }

    /// Solid rectangles making up the layout; they may overlap.
    pub fn rects(&self) -> Vec<Rect> {
        let mut out = Vec::new();
        let (ph, pv) = self.pitch();
        let (ax, ay) = (FIN_EXTENT * self.lx, FIN_EXTENT * self.ly);
        for i in 0..self.count {
            let y = (i + 1) as f64 * ph;
            let h = 0.5 * self.thickness[i];
            out.push(Rect {
                x0: 0.0,
                y0: y - h,
                x1: ax,
                y1: y + h,
            });
            out.push(Rect {
                x0: self.lx - ax,
                y0: y - h,
                x1: self.lx,
                y1: y + h,
            });
        }
        if self.orientation == FinOrientation::Paired {
            for i in 0..self.count {
                let x = (i + 1) as f64 * pv;
                let h = 0.5 * self.thickness[self.count + i];
                out.push(Rect {
                    x0: x - h,
                    y0: 0.0,
                    x1: x + h,
                    y1: ay,
                });
                out.push(Rect {
                    x0: x - h,
                    y0: self.ly - ay,
                    x1: x + h,
                    y1: self.ly,
                });
            }
        }
        if let Some(p) = &self.post {
            let (cx, cy) = (0.5 * self.lx, 0.5 * self.ly);
            out.push(Rect {
                x0: cx - 0.5 * p.thick_a,
                y0: cy - 0.5 * p.height,
                x1: cx + 0.5 * p.thick_a,
                y1: cy + 0.5 * p.height,
            });
            out.push(Rect {
                x0: cx - 0.5 * p.width,
                y0: cy - 0.5 * p.thick_b,
                x1: cx + 0.5 * p.width,
                y1: cy + 0.5 * p.thick_b,
            });
        }
        out
    }
}

/// Layout for a named setup on an `lx × ly` domain.
pub fn generate_fin_layout(
    label: &str,
    overrides: &LayoutOverrides,
    lx: f64,
    ly: f64,
) -> Result<FinLayout> {
    let setup: Setup = label.parse()?;
    let count = overrides.count.unwrap_or_else(|| setup.fin_count());
    let t = overrides.thickness.unwrap_or(DEFAULT_THICKNESS);
    let mut layout = FinLayout::uniform(lx, ly, setup.orientation(), count, t);
    if setup.has_post() {
        layout.post = Some(overrides.post.unwrap_or_default());
    }
    layout.setup = Some(setup.to_string());
    layout.validate()?;
    Ok(layout)
}

/// Elements whose centroid lies in any solid rectangle become `1`, the rest
/// `theta_min`.
pub fn layout_to_density(mesh: &Mesh, layout: &FinLayout, theta_min: f64) -> Result<DensityField> {
    check_domain(mesh, layout)?;
    let rects = layout.rects();
    let values = (0..mesh.n_elems())
        .map(|e| {
            let [x, y] = mesh.elem_centroid(e);
            if rects.iter().any(|r| r.contains(x, y)) {
                1.0
            } else {
                theta_min
            }
        })
        .collect();
    DensityField::new(mesh, values)
}

fn check_domain(mesh: &Mesh, layout: &FinLayout) -> Result<()> {
    if (layout.lx - mesh.lx()).abs() > 1e-12 * mesh.lx()
        || (layout.ly - mesh.ly()).abs() > 1e-12 * mesh.ly()
    {
        return Err(Error::InvalidGeometry(format!(
            "layout domain {}×{} does not match mesh {}×{}",
            layout.lx,
            layout.ly,
            mesh.lx(),
            mesh.ly()
        )));
    }
    Ok(())
}

/// How solid rectangles become element densities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Raster {
    /// Solid when the element centroid is covered.
    Centroid,
    /// Covered area fraction of each element, so sub-element fins keep
    /// their true volume.
    #[default]
    Coverage,
}

/// Area of `[x0, x1] × [y0, y1]` covered by the union of `rects`.
fn union_area(rects: &[Rect], x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let clipped: Vec<Rect> = rects
        .iter()
        .map(|r| Rect {
            x0: r.x0.max(x0),
            y0: r.y0.max(y0),
            x1: r.x1.min(x1),
            y1: r.y1.min(y1),
        })
        .filter(|r| r.x1 > r.x0 && r.y1 > r.y0)
        .collect();
    match clipped.len() {
        0 => return 0.0,
        1 => return clipped[0].area(),
        _ => {}
    }
    let mut xs: Vec<f64> = clipped.iter().flat_map(|r| [r.x0, r.x1]).collect();
    let mut ys: Vec<f64> = clipped.iter().flat_map(|r| [r.y0, r.y1]).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    xs.dedup();
    ys.dedup();
    let mut area = 0.0;
    for wx in xs.windows(2) {
        let cx = 0.5 * (wx[0] + wx[1]);
        for wy in ys.windows(2) {
            let cy = 0.5 * (wy[0] + wy[1]);
            if clipped.iter().any(|r| r.contains(cx, cy)) {
                area += (wx[1] - wx[0]) * (wy[1] - wy[0]);
            }
        }
    }
    area
}

/// Element densities of a layout, floored at `theta_min`.
pub fn rasterize_layout(
    mesh: &Mesh,
    layout: &FinLayout,
    theta_min: f64,
    raster: Raster,
) -> Result<DensityField> {
    if raster == Raster::Centroid {
        return layout_to_density(mesh, layout, theta_min);
    }
    check_domain(mesh, layout)?;
    let rects = layout.rects();
    let (dx, dy) = (mesh.dx(), mesh.dy());
    let values = (0..mesh.n_elems())
        .map(|e| {
            let [cx, cy] = mesh.elem_centroid(e);
            let (x0, y0) = (cx - 0.5 * dx, cy - 0.5 * dy);
            let frac = union_area(&rects, x0, y0, x0 + dx, y0 + dy) / (dx * dy);
            frac.clamp(theta_min, 1.0)
        })
        .collect();
    DensityField::new(mesh, values)
}

/// Steady-state context shared by sweeps and parameter searches. Designs are
/// scored with the conduction energy `∫ k |∇T|²`.
#[derive(Clone, Copy, Debug)]
pub struct LayoutProblem<'a> {
    pub mesh: &'a Mesh,
    pub regions: &'a RegionMap,
    pub bc: &'a ThermalBC,
    pub mat: &'a MaterialPair,
    pub theta_min: f64,
    pub raster: Raster,
    pub solver: SolverOptions,
}

impl LayoutProblem<'_> {
    pub fn objective(&self, layout: &FinLayout) -> Result<f64> {
        let theta = rasterize_layout(self.mesh, layout, self.theta_min, self.raster)?;
        let spec = ObjectiveSpec::thermal(self.mesh);
        let problem = DesignProblem {
            mesh: self.mesh,
            regions: self.regions,
            bc: self.bc,
            mat: self.mat,
            spec: &spec,
            solver: self.solver,
        };
        Ok(problem.evaluate(&theta)?.objective)
    }
}

/// Fin-count range and the reference point for thickness scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
    /// Count at which fins have `base_thickness`.
    pub base_count: usize,
    pub base_thickness: f64,
}

impl Default for SweepRange {
    fn default() -> Self {
        SweepRange {
            start: 0,
            end: 80,
            step: 2,
            base_count: 18,
            base_thickness: DEFAULT_THICKNESS,
        }
    }
}

impl SweepRange {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.end < self.start || !(self.end - self.start).is_multiple_of(self.step) {
            return Err(Error::InvalidInput(format!(
                "sweep step {} must divide the range {}..={}",
                self.step, self.start, self.end
            )));
        }
        if !(self.base_thickness > 0.0) {
            return Err(Error::InvalidInput(
                "sweep base thickness must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn counts(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step.max(1)).collect()
    }

    /// Fin thickness at `count` fins over a side of length `side`: scaled
    /// with the pitch so fins thin out as they crowd, and kept below the
    /// pitch.
    pub fn thickness(&self, count: usize, side: f64) -> f64 {
        let pitch = side / (count + 1) as f64;
        let base_pitch = side / (self.base_count + 1) as f64;
        (self.base_thickness * pitch / base_pitch).min(MAX_PITCH_FRACTION * pitch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub orientation: FinOrientation,
    /// `(fin count, objective)` in increasing count order.
    pub samples: Vec<(usize, f64)>,
}

impl SweepResult {
    /// Sample with the lowest objective; ties go to the smaller count.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.samples.iter().copied().fold(None, |acc, s| match acc {
            Some(b) if b.1 <= s.1 => Some(b),
            _ => Some(s),
        })
    }

    pub fn objective_at(&self, count: usize) -> Option<f64> {
        self.samples.iter().find(|s| s.0 == count).map(|s| s.1)
    }
}

/// Steady objective for every fin count in `range`. Counts are evaluated in
/// parallel; results come back in count order.
pub fn sweep_fin_count(
    orientation: FinOrientation,
    range: &SweepRange,
    problem: &LayoutProblem<'_>,
) -> Result<SweepResult> {
    range.validate()?;
    let (lx, ly) = (problem.mesh.lx(), problem.mesh.ly());
    let samples = range
        .counts()
        .into_par_iter()
        .map(|count| {
            let t = range.thickness(count, lx.min(ly));
            let layout = FinLayout::uniform(lx, ly, orientation, count, t);
            problem
                .objective(&layout)
                .map(|j| (count, j))
                .map_err(|e| Error::SweepPoint {
                    count,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        orientation,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Maximum objective evaluations, including the initial simplex.
    pub budget: usize,
    /// Initial simplex edge as a fraction of each bound interval.
    pub initial_step: f64,
    /// Stop once the simplex objective spread falls below this.
    pub f_tol: f64,
    /// Seed for the initial simplex jitter.
    pub seed: u64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            budget: 1000,
            initial_step: 0.1,
            f_tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_initial: f64,
    pub evaluations: usize,
    /// False when the budget ran out before the simplex collapsed.
    pub converged: bool,
}

/// Folds `v` back into `[lo, hi]` by mirroring at the bounds.
fn reflect_into(v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    let mut r = (v - lo).rem_euclid(2.0 * w);
    if r > w {
        r = 2.0 * w - r;
    }
    lo + r
}

/// Bounded Nelder–Mead with dimension-adapted coefficients. The best point
/// seen, starting with `x0`, is returned, so the result never scores worse
/// than the start.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: NelderMeadOptions,
) -> Result<NelderMeadResult> {
    let n = x0.len();
    if n == 0 || lower.len() != n || upper.len() != n {
        return Err(Error::InvalidInput(
            "nelder-mead: bounds must match a non-empty start".into(),
        ));
    }
    if let Some(i) = (0..n).find(|&i| !(lower[i] <= x0[i] && x0[i] <= upper[i])) {
        return Err(Error::InvalidInput(format!(
            "nelder-mead: start coordinate {i} out of bounds"
        )));
    }
    if opts.budget < n + 1 {
        return Err(Error::InvalidInput(format!(
            "nelder-mead: budget {} below simplex size {}",
            opts.budget,
            n + 1
        )));
    }
    let nf = n as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / nf);
    let rho = 0.75 - 1.0 / (2.0 * nf);
    let sigma = 1.0 - 1.0 / nf;
    let project = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = reflect_into(x[i], lower[i], upper[i]);
        }
    };

    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        let v = f(x)?;
        Ok(if v.is_finite() { v } else { f64::INFINITY })
    };

    let f_initial = eval(x0, &mut evals)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f_initial)];
    for i in 0..n {
        let mut x = x0.to_vec();
        let span = upper[i] - lower[i];
        let jitter = 1.0 + 0.2 * (rng.random::<f64>() - 0.5);
        let step = opts.initial_step * span * jitter;
        // step away from the nearer bound so the vertex differs from x0
        x[i] += if x0[i] + step <= upper[i] {
            step
        } else {
            -step
        };
        project(&mut x);
        let fx = eval(&x, &mut evals)?;
        simplex.push((x, fx));
    }

    let mut converged = false;
    while evals < opts.budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() <= opts.f_tol * (1.0 + simplex[0].1.abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|v| v.0[i]).sum::<f64>() / nf)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = (0..n)
                .map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i]))
                .collect();
            project(&mut x);
            x
        };

        let xr = toward(-alpha);
        let fr = eval(&xr, &mut evals)?;
        if fr < simplex[0].1 {
            let xe = toward(-alpha * gamma);
            let fe = if evals < opts.budget {
                eval(&xe, &mut evals)?
            } else {
                f64::INFINITY
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if evals >= opts.budget {
            break;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = toward(-alpha * rho);
            let v = eval(&x, &mut evals)?;
            (x, v)
        } else {
            let x = toward(rho);
            let v = eval(&x, &mut evals)?;
            (x, v)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            if evals >= opts.budget {
                break;
            }
            let mut x: Vec<f64> = (0..n)
                .map(|i| best[i] + sigma * (v.0[i] - best[i]))
                .collect();
            project(&mut x);
            v.1 = eval(&x, &mut evals)?;
            v.0 = x;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = if simplex[0].1 < f_initial {
        simplex.swap_remove(0)
    } else {
        (x0.to_vec(), f_initial)
    };
    Ok(NelderMeadResult {
        x,
        f: fx,
        f_initial,
        evaluations: evals,
        converged,
    })
}

/// Bounds on the search vector of a layout: every fin thickness, then
/// `H, W, A, B` when a post is present.
fn parameter_bounds(layout: &FinLayout) -> (Vec<f64>, Vec<f64>) {
    let (ph, pv) = layout.pitch();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for i in 0..layout.thickness.len() {
        let pitch = if i < layout.count { ph } else { pv };
        lo.push(MIN_THICKNESS.min(0.5 * pitch));
        hi.push(MAX_PITCH_FRACTION * pitch);
    }
    if layout.post.is_some() {
        let (lx, ly) = (layout.lx, layout.ly);
        lo.extend([0.05 * ly, 0.05 * lx, MIN_THICKNESS, MIN_THICKNESS]);
        hi.extend([0.9 * ly, 0.9 * lx, 0.25 * lx, 0.25 * ly]);
    }
    (lo, hi)
}

fn layout_params(layout: &FinLayout) -> Vec<f64> {
    let mut x = layout.thickness.clone();
    if let Some(p) = &layout.post {
        x.extend([p.height, p.width, p.thick_a, p.thick_b]);
    }
    x
}

fn with_params(layout: &FinLayout, x: &[f64]) -> FinLayout {
    let mut out = layout.clone();
    let m = out.thickness.len();
    out.thickness.copy_from_slice(&x[..m]);
    if out.post.is_some() {
        out.post = Some(Post {
            height: x[m],
            width: x[m + 1],
            thick_a: x[m + 2],
            thick_b: x[m + 3],
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamOptResult {
    pub layout: FinLayout,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead over the per-fin thicknesses (and post dimensions for setups
/// with a post), starting from `initial`.
pub fn optimize_layout(
    initial: &FinLayout,
    problem: &LayoutProblem<'_>,
    opts: NelderMeadOptions,
) -> Result<ParamOptResult> {
    initial.validate()?;
    let x0 = layout_params(initial);
    let (mut lo, mut hi) = parameter_bounds(initial);
    for i in 0..x0.len() {
        lo[i] = lo[i].min(x0[i]);
        hi[i] = hi[i].max(x0[i]);
    }
    if opts.budget < 10 * x0.len() {
        return Err(Error::InvalidInput(format!(
            "paramopt budget {} below 10 × {} parameters",
            opts.budget,
            x0.len()
        )));
    }
    let r = nelder_mead(
        |x| problem.objective(&with_params(initial, x)),
        &x0,
        &lo,
        &hi,
        opts,
    )?;
    Ok(ParamOptResult {
        layout: with_params(initial, &r.x),
        objective: r.f,
        initial_objective: r.f_initial,
        evaluations: r.evaluations,
        converged: r.converged,
    })
}

/// Optimises the default layout of a named setup on the problem's mesh.
pub fn optimize_parameters(
    label: &str,
    problem: &LayoutProblem<'_>,
    opts: NelderMeadOptions,
) -> Result<ParamOptResult> {
    let layout = generate_fin_layout(
        label,
        &LayoutOverrides::default(),
        problem.mesh.lx(),
        problem.mesh.ly(),
    )?;
    optimize_layout(&layout, problem, opts)
}
