//! Density-based topology optimisation of the chamber interior.
//!
//! One iteration runs filter → SIMP coefficients → steady solve →
//! objective → adjoint sensitivities → filter transpose → optimality-criteria
//! update. The objective is either the conduction energy `∫ k |∇T|²` or its
//! blend with a density penalty:
//!
//! ```text
//! F = (1 − q) ∫ k(θ_f) |∇T|² + q (h₀ h_max / A) ∫ θ_f²
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{self, ElementMatrices, ScalarField, ThermalBC};
use crate::filter::{DensityField, HelmholtzFilter};
use crate::material::MaterialPair;
use crate::mesh::{Mesh, Region, RegionMap};
use crate::sparse::{self, SolverOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// `∫ k |∇T|²`.
    Thermal,
    /// Thermal term blended with the density penalty.
    #[default]
    Combined,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveSpec {
    pub q: f64,
    /// Detail size (m).
    pub h0: f64,
    /// Mesh size (m).
    pub h_max: f64,
    /// Design-space area (m²).
    pub area: f64,
    pub mode: ObjectiveMode,
}

impl ObjectiveSpec {
    /// `q = 0.5`, both length scales at one element width.
    pub fn for_mesh(mesh: &Mesh) -> ObjectiveSpec {
        let h = mesh.dx().max(mesh.dy());
        ObjectiveSpec {
            q: 0.5,
            h0: h,
            h_max: h,
            area: mesh.area(),
            mode: ObjectiveMode::Combined,
        }
    }

    pub fn thermal(mesh: &Mesh) -> ObjectiveSpec {
        ObjectiveSpec {
            mode: ObjectiveMode::Thermal,
            ..Self::for_mesh(mesh)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidInput(format!(
                "objective q = {} outside [0, 1]",
                self.q
            )));
        }
        if !(self.h0 > 0.0 && self.h_max > 0.0 && self.area > 0.0) {
            return Err(Error::InvalidInput(
                "objective h0, h_max and area must be positive".into(),
            ));
        }
        Ok(())
    }

    fn thermal_weight(&self) -> f64 {
        match self.mode {
            ObjectiveMode::Thermal => 1.0,
            ObjectiveMode::Combined => 1.0 - self.q,
        }
    }

    fn penalty_weight(&self) -> f64 {
        match self.mode {
            ObjectiveMode::Thermal => 0.0,
            ObjectiveMode::Combined => self.q * self.h0 * self.h_max / self.area,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub volfrac: f64,
    pub move_limit: f64,
    pub damping: f64,
    pub max_iter: usize,
    /// Stop once `max |Δθ_c|` falls below this.
    pub tol: f64,
    pub theta_min: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            volfrac: 0.35,
            move_limit: 0.2,
            damping: 0.5,
            max_iter: 200,
            tol: 0.01,
            theta_min: 1e-3,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(m));
        if !(self.volfrac > 0.0 && self.volfrac <= 1.0) {
            return fail(format!("volfrac {} outside (0, 1]", self.volfrac));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return fail(format!("move_limit {} outside (0, 1]", self.move_limit));
        }
        if !(self.theta_min > 0.0 && self.theta_min < 1.0) {
            return fail(format!("theta_min {} outside (0, 1)", self.theta_min));
        }
        if !(self.damping > 0.0) {
            return fail("damping must be positive".into());
        }
        if self.volfrac < self.theta_min {
            return fail("volfrac below theta_min".into());
        }
        Ok(())
    }
}

fn check_sizes(mesh: &Mesh, k_elem: &[f64], t: &ScalarField) -> Result<()> {
    if k_elem.len() != mesh.n_elems() {
        return Err(Error::SizeMismatch {
            what: "element conductivity",
            expected: mesh.n_elems(),
            got: k_elem.len(),
        });
    }
    if t.values().len() != mesh.n_nodes() {
        return Err(Error::SizeMismatch {
            what: "temperature",
            expected: mesh.n_nodes(),
            got: t.values().len(),
        });
    }
    Ok(())
}

/// `∫ k |∇T|²`, exact for bilinear fields under 2×2 Gauss quadrature.
pub fn objective_thermal(mesh: &Mesh, k_elem: &[f64], t: &ScalarField) -> Result<f64> {
    check_sizes(mesh, k_elem, t)?;
    let em = ElementMatrices::new(mesh);
    Ok((0..mesh.n_elems())
        .map(|e| {
            let te = t.gather(&mesh.elem_nodes(e));
            k_elem[e] * em.energy(&te, &te)
        })
        .sum())
}

pub fn objective_combined(
    mesh: &Mesh,
    k_elem: &[f64],
    t: &ScalarField,
    theta_f: &DensityField,
    spec: &ObjectiveSpec,
) -> Result<f64> {
    spec.validate()?;
    if theta_f.values().len() != mesh.n_elems() {
        return Err(Error::SizeMismatch {
            what: "filtered density",
            expected: mesh.n_elems(),
            got: theta_f.values().len(),
        });
    }
    let thermal = objective_thermal(mesh, k_elem, t)?;
    let penalty: f64 = theta_f.values().iter().map(|v| v * v).sum::<f64>() * mesh.elem_area();
    Ok(spec.thermal_weight() * thermal + spec.penalty_weight() * penalty)
}

/// State and objective for one filtered density.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub temperature: ScalarField,
    pub k_elem: Vec<f64>,
    pub sink_elem: Vec<f64>,
    pub objective: f64,
}

/// Everything needed to evaluate a design except the density itself.
#[derive(Clone, Copy, Debug)]
pub struct DesignProblem<'a> {
    pub mesh: &'a Mesh,
    pub regions: &'a RegionMap,
    pub bc: &'a ThermalBC,
    pub mat: &'a MaterialPair,
    pub spec: &'a ObjectiveSpec,
    pub solver: SolverOptions,
}

impl DesignProblem<'_> {
    pub fn evaluate(&self, theta_f: &DensityField) -> Result<Evaluation> {
        let k_elem = self.mat.conductivities(theta_f.values())?;
        let sink_elem = self.bc.sink_from_density(theta_f.values());
        let temperature = fem::solve_conduction(
            self.mesh,
            self.regions,
            &k_elem,
            &sink_elem,
            self.bc,
            self.solver,
        )?;
        let objective = objective_combined(self.mesh, &k_elem, &temperature, theta_f, self.spec)?;
        Ok(Evaluation {
            temperature,
            k_elem,
            sink_elem,
            objective,
        })
    }

    pub fn gradient(&self, theta_f: &DensityField, t: &ScalarField) -> Result<Vec<f64>> {
        adjoint_gradient(
            self.mesh,
            self.regions,
            theta_f,
            t,
            self.bc,
            self.mat,
            self.spec,
            self.solver,
        )
    }
}

/// Sensitivity of the objective with respect to every filtered density.
///
/// With `K(θ) T = F(θ)` the adjoint `K λ = −∂F/∂T` (zero on Dirichlet
/// nodes) gives `dF/dθ_e = ∂F/∂θ_e + λᵀ (∂K/∂θ_e T − ∂F/∂θ_e)`; both the
/// conductivity and the fluid-weighted sink depend on `θ_e`.
#[allow(clippy::too_many_arguments)]
pub fn adjoint_gradient(
    mesh: &Mesh,
    regions: &RegionMap,
    theta_f: &DensityField,
    t: &ScalarField,
    bc: &ThermalBC,
    mat: &MaterialPair,
    spec: &ObjectiveSpec,
    opts: SolverOptions,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let theta = theta_f.values();
    let k_elem = mat.conductivities(theta)?;
    check_sizes(mesh, &k_elem, t)?;
    let sink_elem = bc.sink_from_density(theta);
    let em = ElementMatrices::new(mesh);
    let wt = spec.thermal_weight();
    let wp = spec.penalty_weight();
    let area = mesh.elem_area();

    let lambda = if wt != 0.0 {
        let system = fem::assemble_steady(mesh, regions, &k_elem, &sink_elem, bc)?;
        let mut d_obj_dt = vec![0.0; mesh.n_nodes()];
        for e in 0..mesh.n_elems() {
            let nodes = mesh.elem_nodes(e);
            let te = t.gather(&nodes);
            for a in 0..4 {
                let kt: f64 = (0..4).map(|b| em.stiffness[a][b] * te[b]).sum();
                d_obj_dt[nodes[a]] -= 2.0 * wt * k_elem[e] * kt;
            }
        }
        let fixed: Vec<(usize, f64)> = system.dirichlet.iter().map(|&(n, _)| (n, 0.0)).collect();
        let (a, b) = system.matrix.constrain(&d_obj_dt, &fixed);
        let mut lambda = vec![0.0; mesh.n_nodes()];
        sparse::pcg(&a, &b, &mut lambda, opts)?;
        for &(n, _) in &fixed {
            lambda[n] = 0.0;
        }
        Some(lambda)
    } else {
        None
    };

    let grad = (0..mesh.n_elems())
        .map(|e| {
            let nodes = mesh.elem_nodes(e);
            let te = t.gather(&nodes);
            let dk = mat.conductivity_derivative(theta[e]);
            let mut g = wp * 2.0 * theta[e] * area;
            if let Some(lambda) = &lambda {
                let ds = bc.sink_derivative();
                let le = nodes.map(|n| lambda[n]);
                let excess = te.map(|v| v - bc.t_amb);
                g += wt * dk * em.energy(&te, &te);
                g += dk * em.energy(&le, &te) + ds * em.mass_product(&le, &excess);
            }
            g
        })
        .collect();
    Ok(grad)
}

/// Optimality-criteria step with move limits and bisection on the volume
/// multiplier.
///
/// The update needs strictly negative sensitivities; when some are not, all
/// design sensitivities are shifted by a common constant, which only moves
/// the volume multiplier and leaves the constrained stationary point alone.
/// Volume is the mean over design elements; fixed elements are pinned.
pub fn oc_update(
    theta_c: &DensityField,
    grad: &[f64],
    cfg: &OptConfig,
    regions: &[Region],
) -> Result<DensityField> {
    let theta = theta_c.values();
    let n = theta.len();
    if grad.len() != n || regions.len() != n {
        return Err(Error::SizeMismatch {
            what: "oc gradient",
            expected: n,
            got: grad.len(),
        });
    }
    if let Some(e) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite sensitivity at element {e}"
        )));
    }
    let design: Vec<usize> = (0..n).filter(|&e| regions[e] == Region::Design).collect();
    let mut out: Vec<f64> = (0..n)
        .map(|e| match regions[e] {
            Region::FixedSolid => 1.0,
            Region::FixedFluid => cfg.theta_min,
            Region::Design => theta[e],
        })
        .collect();
    if design.is_empty() {
        return Ok(DensityField::from_raw(out));
    }

    let gmax = design
        .iter()
        .map(|&e| grad[e])
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = design.iter().map(|&e| grad[e].abs()).fold(0.0, f64::max);
    let shift = if gmax >= 0.0 {
        gmax + 1e-9 * scale.max(f64::MIN_POSITIVE)
    } else {
        0.0
    };
    let neg: Vec<f64> = design.iter().map(|&e| shift - grad[e]).collect();
    let scale = neg
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let update = |lambda: f64, out: &mut [f64]| -> f64 {
        let mut vol = 0.0;
        for (&e, &b) in design.iter().zip(&neg) {
            let lo = (theta[e] - cfg.move_limit).max(cfg.theta_min);
            let hi = (theta[e] + cfg.move_limit).min(1.0);
            let v = (theta[e] * (b / lambda).powf(cfg.damping)).clamp(lo, hi);
            out[e] = v;
            vol += v;
        }
        vol / design.len() as f64
    };

    // volume is non-increasing in lambda; bisect in log space
    let (mut lo, mut hi) = ((scale * 1e-30).ln(), (scale * 1e30).ln());
    let mut vol = f64::NAN;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        vol = update(mid.exp(), &mut out);
        if (vol - cfg.volfrac).abs() <= 1e-10 {
            return Ok(DensityField::from_raw(out));
        }
        if vol > cfg.volfrac {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (vol - cfg.volfrac).abs() <= 1e-4 {
        Ok(DensityField::from_raw(out))
    } else {
        Err(Error::Bisection {
            iterations: 100,
            volume: vol,
            target: cfg.volfrac,
        })
    }
}

/// Per-iteration state handed to observers of [`run_topopt`].
#[derive(Debug)]
pub struct IterationRecord<'a> {
    pub iteration: usize,
    pub objective: f64,
    pub volume: f64,
    pub max_change: f64,
    pub theta_c: &'a DensityField,
    pub theta_f: &'a DensityField,
}

#[derive(Clone, Debug)]
pub struct OptResult {
    pub theta_c: DensityField,
    pub theta_f: DensityField,
    pub objective_history: Vec<f64>,
    pub volume_history: Vec<f64>,
    pub change_history: Vec<f64>,
    pub temperature: ScalarField,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl OptResult {
    pub fn initial_objective(&self) -> f64 {
        self.objective_history[0]
    }
}

/// Filtered density with fixed regions pinned to their phase.
fn filtered(
    filter: &HelmholtzFilter,
    theta_c: &DensityField,
    regions: &RegionMap,
    theta_min: f64,
) -> Result<DensityField> {
    let mut v = filter.apply(theta_c)?.into_values();
    for (e, x) in v.iter_mut().enumerate() {
        match regions.region(e) {
            Region::FixedSolid => *x = 1.0,
            Region::FixedFluid => *x = theta_min,
            Region::Design => *x = x.max(theta_min),
        }
    }
    Ok(DensityField::from_raw(v))
}

/// Solver settings for state and adjoint solves in the optimisation loop.
/// Tighter than the default so mirror-symmetric problems stay symmetric to
/// round-off over hundreds of iterations.
pub const STATE_SOLVER: SolverOptions = SolverOptions {
    rel_tol: 1e-12,
    max_iter: 20_000,
};

pub struct TopOpt<'a> {
    pub problem: DesignProblem<'a>,
    pub cfg: OptConfig,
    pub r_min: f64,
}

impl TopOpt<'_> {
    pub fn run(&self) -> Result<OptResult> {
        self.run_with(|_| {})
    }

    pub fn run_with(&self, mut observe: impl FnMut(&IterationRecord<'_>)) -> Result<OptResult> {
        let p = &self.problem;
        let cfg = &self.cfg;
        cfg.validate()?;
        p.spec.validate()?;
        let mesh = p.mesh;
        let filter = HelmholtzFilter::new(mesh, self.r_min)?;
        let regions = p.regions.regions();
        let init = regions
            .iter()
            .map(|r| match r {
                Region::Design => cfg.volfrac,
                Region::FixedSolid => 1.0,
                Region::FixedFluid => cfg.theta_min,
            })
            .collect();
        let mut theta_c = DensityField::from_raw(init);
        let mut objective_history = Vec::new();
        let mut volume_history = Vec::new();
        let mut change_history = Vec::new();
        let mut best: Option<(f64, DensityField)> = None;
        let mut converged = false;

        for iteration in 0..cfg.max_iter {
            let wrap = |e: Error| Error::Iteration {
                iteration,
                source: Box::new(e),
            };
            let theta_f = filtered(&filter, &theta_c, p.regions, cfg.theta_min).map_err(wrap)?;
            let eval = p.evaluate(&theta_f).map_err(wrap)?;
            let mut grad = p.gradient(&theta_f, &eval.temperature).map_err(wrap)?;
            for (g, r) in grad.iter_mut().zip(regions) {
                if *r != Region::Design {
                    *g = 0.0;
                }
            }
            let grad_c = filter.chain_gradient(&grad).map_err(wrap)?;
            let next = oc_update(&theta_c, &grad_c, cfg, regions).map_err(wrap)?;
            let max_change = next
                .values()
                .iter()
                .zip(theta_c.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);

            objective_history.push(eval.objective);
            volume_history.push(theta_f.mean());
            change_history.push(max_change);
            observe(&IterationRecord {
                iteration,
                objective: eval.objective,
                volume: theta_f.mean(),
                max_change,
                theta_c: &theta_c,
                theta_f: &theta_f,
            });
            if best.as_ref().is_none_or(|(b, _)| eval.objective < *b) {
                best = Some((eval.objective, theta_c.clone()));
            }
            theta_c = next;
            if max_change < cfg.tol {
                converged = true;
                break;
            }
        }

        if !converged {
            if let Some((_, b)) = best {
                theta_c = b;
            }
        }
        let iterations = objective_history.len();
        let wrap = |e: Error| Error::Iteration {
            iteration: iterations,
            source: Box::new(e),
        };
        let theta_f = filtered(&filter, &theta_c, p.regions, cfg.theta_min).map_err(wrap)?;
        let eval = p.evaluate(&theta_f).map_err(wrap)?;
        Ok(OptResult {
            theta_c,
            theta_f,
            objective_history,
            volume_history,
            change_history,
            temperature: eval.temperature,
            objective: eval.objective,
            converged,
            iterations,
        })
    }
}

/// Runs the optimisation loop with the given settings.
#[allow(clippy::too_many_arguments)]
pub fn run_topopt(
    cfg: &OptConfig,
    spec: &ObjectiveSpec,
    mesh: &Mesh,
    regions: &RegionMap,
    bc: &ThermalBC,
    mat: &MaterialPair,
    r_min: f64,
    solver: SolverOptions,
) -> Result<OptResult> {
    TopOpt {
        problem: DesignProblem {
            mesh,
            regions,
            bc,
            mat,
            spec,
            solver,
        },
        cfg: *cfg,
        r_min,
    }
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_temperature_has_zero_objective() {
        let mesh = Mesh::build_grid(4, 4, 1.0, 1.0).unwrap();
        let t = ScalarField::uniform(&mesh, 500.0);
        assert!(objective_thermal(&mesh, &[2.0; 16], &t).unwrap().abs() < 1e-9);
    }

    #[test]
    fn linear_temperature_energy() {
        let mesh = Mesh::build_grid(5, 5, 1.0, 1.0).unwrap();
        let t = ScalarField::from_fn(&mesh, |x, _| 3.0 * x);
        let j = objective_thermal(&mesh, &[1.0; 25], &t).unwrap();
        assert!((j - 9.0).abs() < 1e-12);
    }

    #[test]
    fn sine_energy_converges() {
        let mesh = Mesh::build_grid(32, 32, 1.0, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        let t = ScalarField::from_fn(&mesh, |x, y| (pi * x).sin() * (pi * y).sin());
        let j = objective_thermal(&mesh, &vec![1.0; 1024], &t).unwrap();
        let exact = pi * pi / 2.0;
        assert!((j - exact).abs() <= 0.02 * exact, "{j} vs {exact}");
    }

    #[test]
    fn combined_objective_cases() {
        let mesh = Mesh::build_grid(4, 4, 2.0, 2.0).unwrap();
        let t = ScalarField::from_fn(&mesh, |x, y| x + 2.0 * y);
        let k = vec![1.5; 16];
        let thermal = objective_thermal(&mesh, &k, &t).unwrap();
        let spec = ObjectiveSpec {
            q: 0.0,
            h0: 0.3,
            h_max: 0.2,
            area: 4.0,
            mode: ObjectiveMode::Combined,
        };
        let half = DensityField::uniform(&mesh, 0.5).unwrap();
        let one = DensityField::uniform(&mesh, 1.0).unwrap();
        assert_eq!(
            objective_combined(&mesh, &k, &t, &half, &spec).unwrap(),
            thermal
        );
        let s1 = ObjectiveSpec { q: 1.0, ..spec };
        let v = objective_combined(&mesh, &k, &t, &one, &s1).unwrap();
        assert!((v - 0.3 * 0.2).abs() < 1e-14);
        // thermal = 1.5 * 5 * 4 = 30; penalty = 0.25 * 4
        let s2 = ObjectiveSpec { q: 0.5, ..spec };
        let v = objective_combined(&mesh, &k, &t, &half, &s2).unwrap();
        let expect = 0.5 * 30.0 + 0.5 * 0.3 * 0.2 * 0.25;
        assert!((thermal - 30.0).abs() < 1e-12);
        assert!((v - expect).abs() < 1e-12);
        let bad = ObjectiveSpec { q: 1.2, ..spec };
        assert!(objective_combined(&mesh, &k, &t, &half, &bad).is_err());
    }

    #[test]
    fn oc_uniform_gradient_gives_uniform_volume() {
        let mesh = Mesh::build_grid(4, 4, 1.0, 1.0).unwrap();
        let theta = DensityField::uniform(&mesh, 0.4).unwrap();
        let cfg = OptConfig::default();
        let out = oc_update(&theta, &[-3.0; 16], &cfg, &[Region::Design; 16]).unwrap();
        assert!(out.values().iter().all(|v| (v - 0.35).abs() < 1e-4));
    }

    #[test]
    fn oc_respects_move_limit() {
        let mesh = Mesh::build_grid(4, 4, 1.0, 1.0).unwrap();
        let theta = DensityField::uniform(&mesh, 0.5).unwrap();
        let grad: Vec<f64> = (0..16).map(|e| -((e * e) as f64) - 0.1).collect();
        let cfg = OptConfig {
            volfrac: 0.5,
            ..Default::default()
        };
        let out = oc_update(&theta, &grad, &cfg, &[Region::Design; 16]).unwrap();
        assert!(out
            .values()
            .iter()
            .all(|&v| (0.3 - 1e-12..=0.7 + 1e-12).contains(&v)));
        assert!((out.mean() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn oc_two_element_toy_matches_scalar_bisection() {
        let mesh = Mesh::build_grid(2, 2, 1.0, 1.0).unwrap();
        let _ = mesh;
        let theta = DensityField::from_raw(vec![0.5, 0.5]);
        let cfg = OptConfig {
            volfrac: 0.5,
            damping: 0.5,
            ..Default::default()
        };
        let out = oc_update(&theta, &[-2.0, -1.0], &cfg, &[Region::Design; 2]).unwrap();
        // independent oracle: bisection on 0.5 (sqrt(2/l) + sqrt(1/l)) / 2 = 0.5
        let vol = |l: f64| 0.25 * ((2.0 / l).sqrt() + (1.0 / l).sqrt());
        let (mut lo, mut hi) = (1e-6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if vol(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l = 0.5 * (lo + hi);
        let expect = [0.5 * (2.0 / l).sqrt(), 0.5 * (1.0 / l).sqrt()];
        assert!(out.values()[0] > out.values()[1]);
        for (a, b) in out.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn oc_pins_fixed_regions() {
        let theta = DensityField::from_raw(vec![0.3, 0.3, 0.3, 0.3]);
        let regions = [
            Region::Design,
            Region::FixedSolid,
            Region::FixedFluid,
            Region::Design,
        ];
        let cfg = OptConfig {
            volfrac: 0.3,
            ..Default::default()
        };
        let out = oc_update(&theta, &[-1.0, -5.0, -5.0, -1.0], &cfg, &regions).unwrap();
        assert_eq!(out.values()[1], 1.0);
        assert_eq!(out.values()[2], cfg.theta_min);
        assert!((out.values()[0] - 0.3).abs() < 1e-4);
    }

    #[test]
    fn oc_handles_positive_sensitivities() {
        let theta = DensityField::from_raw(vec![0.5; 4]);
        let cfg = OptConfig {
            volfrac: 0.5,
            ..Default::default()
        };
        let out = oc_update(&theta, &[2.0, -1.0, 0.5, -3.0], &cfg, &[Region::Design; 4]).unwrap();
        assert!((out.mean() - 0.5).abs() < 1e-4);
        // lower sensitivity gets more material
        assert!(out.values()[3] >= out.values()[1]);
        assert!(out.values()[1] >= out.values()[2]);
        assert!(out.values()[2] >= out.values()[0]);
    }

    #[test]
    fn oc_unreachable_volume_reports_bisection_failure() {
        let theta = DensityField::from_raw(vec![0.2; 4]);
        let cfg = OptConfig {
            volfrac: 0.9,
            move_limit: 0.1,
            ..Default::default()
        };
        let err = oc_update(&theta, &[-1.0; 4], &cfg, &[Region::Design; 4]).unwrap_err();
        assert!(matches!(err, Error::Bisection { .. }));
    }

    #[test]
    fn insensitive_material_and_penalty_only_gradients() {
        let mesh = Mesh::build_grid(6, 6, 2.0, 2.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let bc = ThermalBC {
            h_sink: 0.0,
            ..Default::default()
        };
        let mat = MaterialPair {
            k_fluid: 3.0,
            k_solid: 3.0,
            ..Default::default()
        };
        let theta: Vec<f64> = (0..36).map(|e| 0.2 + 0.02 * e as f64).collect();
        let theta = DensityField::new(&mesh, theta).unwrap();
        let k = mat.conductivities(theta.values()).unwrap();
        let t = fem::solve_conduction(
            &mesh,
            &regions,
            &k,
            &vec![0.0; 36],
            &bc,
            SolverOptions::default(),
        )
        .unwrap();
        let thermal = ObjectiveSpec::thermal(&mesh);
        let g = adjoint_gradient(
            &mesh,
            &regions,
            &theta,
            &t,
            &bc,
            &mat,
            &thermal,
            SolverOptions::default(),
        )
        .unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10));

        let spec = ObjectiveSpec {
            q: 1.0,
            ..ObjectiveSpec::for_mesh(&mesh)
        };
        let bc = ThermalBC::default();
        let mat = MaterialPair::default();
        let g = adjoint_gradient(
            &mesh,
            &regions,
            &theta,
            &t,
            &bc,
            &mat,
            &spec,
            SolverOptions::default(),
        )
        .unwrap();
        let c = spec.h0 * spec.h_max / spec.area;
        for (gi, th) in g.iter().zip(theta.values()) {
            assert!((gi - 2.0 * c * th * mesh.elem_area()).abs() < 1e-14);
        }
    }
}
