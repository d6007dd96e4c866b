//! Bilinear finite elements for steady conduction with an out-of-plane sink,
//! SUPG-stabilised convection–diffusion, and backward-Euler transients.
//!
//! The weak form assembled for the steady problem is
//!
//! ```text
//! ∫ k ∇T·∇v + ∫ s T v = ∫ Q v + ∫ s T_amb v
//! ```
//!
//! with element-wise constant `k` (conductivity) and `s` (sink coefficient).
//! Walls tagged hot or cold in the [`RegionMap`] become Dirichlet rows;
//! insulated walls are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{EdgeCondition, Mesh, RegionMap};
use crate::sparse::{self, CsrMatrix, SolverOptions};

/// Node-based scalar (temperature in K for the thermal solves).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::SizeMismatch {
                what: "nodal field",
                expected: mesh.n_nodes(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "nodal value {i} is not finite"
            )));
        }
        Ok(ScalarField { values })
    }

    pub fn uniform(mesh: &Mesh, value: f64) -> ScalarField {
        ScalarField {
            values: vec![value; mesh.n_nodes()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let values = (0..mesh.n_nodes())
            .map(|n| {
                let [x, y] = mesh.node_coords(n);
                f(x, y)
            })
            .collect();
        ScalarField { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Area-weighted mean using the element averages of the nodal values.
    pub fn mean(&self, mesh: &Mesh) -> f64 {
        let s: f64 = (0..mesh.n_elems())
            .map(|e| {
                mesh.elem_nodes(e)
                    .iter()
                    .map(|&n| self.values[n])
                    .sum::<f64>()
                    / 4.0
            })
            .sum();
        s / mesh.n_elems() as f64
    }

    pub fn gather(&self, nodes: &[usize; 4]) -> [f64; 4] {
        nodes.map(|n| self.values[n])
    }
}

/// Prescribed nodal velocity (m/s).
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    values: Vec<[f64; 2]>,
}

impl VelocityField {
    pub fn new(mesh: &Mesh, values: Vec<[f64; 2]>) -> Result<VelocityField> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::SizeMismatch {
                what: "velocity field",
                expected: mesh.n_nodes(),
                got: values.len(),
            });
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "velocity contains non-finite components".into(),
            ));
        }
        Ok(VelocityField { values })
    }

    pub fn uniform(mesh: &Mesh, u: [f64; 2]) -> VelocityField {
        VelocityField {
            values: vec![u; mesh.n_nodes()],
        }
    }

    pub fn zero(mesh: &Mesh) -> VelocityField {
        Self::uniform(mesh, [0.0, 0.0])
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|u| u[0] == 0.0 && u[1] == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalBC {
    /// Hot-wall Dirichlet temperature (K).
    pub t_hot: f64,
    /// Ambient temperature (K), also the cold-wall value and the sink target.
    pub t_amb: f64,
    /// Out-of-plane sink coefficient on the fluid phase (W/m³·K).
    pub h_sink: f64,
    /// Volumetric source (W/m³).
    pub q_source: f64,
}

impl Default for ThermalBC {
    fn default() -> Self {
        ThermalBC {
            t_hot: 1000.0,
            t_amb: 293.15,
            h_sink: 0.05,
            q_source: 0.0,
        }
    }
}

impl ThermalBC {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_hot > self.t_amb && self.t_amb >= 0.0) {
            return Err(Error::InvalidInput("bc: need t_hot > t_amb >= 0".into()));
        }
        if !(self.h_sink >= 0.0) {
            return Err(Error::InvalidInput(
                "bc: h_sink must be non-negative".into(),
            ));
        }
        if !self.q_source.is_finite() {
            return Err(Error::InvalidInput("bc: q_source must be finite".into()));
        }
        Ok(())
    }

    pub fn value(&self, c: EdgeCondition) -> f64 {
        match c {
            EdgeCondition::Hot => self.t_hot,
            EdgeCondition::Cold | EdgeCondition::Insulated => self.t_amb,
        }
    }

    /// Element sink coefficients weighted by the fluid fraction `1 − θ`.
    pub fn sink_from_density(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| self.h_sink * (1.0 - t)).collect()
    }

    /// `d/dθ` of [`Self::sink_from_density`].
    pub fn sink_derivative(&self) -> f64 {
        -self.h_sink
    }
}

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Shape values and physical gradients at a reference point of a `dx × dy` cell.
fn shape(dx: f64, dy: f64, xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut n = [0.0; 4];
    let mut g = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
        g[a][0] = 0.25 * c[0] * (1.0 + c[1] * eta) * 2.0 / dx;
        g[a][1] = 0.25 * c[1] * (1.0 + c[0] * xi) * 2.0 / dy;
    }
    (n, g)
}

fn gauss_points() -> impl Iterator<Item = (f64, f64)> {
    GAUSS
        .into_iter()
        .flat_map(|xi| GAUSS.into_iter().map(move |eta| (xi, eta)))
}

/// Reference element matrices; every cell of a uniform grid shares them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementMatrices {
    /// `∫ ∇N_a·∇N_b` (unit conductivity).
    pub stiffness: [[f64; 4]; 4],
    /// `∫ N_a N_b`.
    pub mass: [[f64; 4]; 4],
    /// `∫ N_a`.
    pub load: [f64; 4],
}

impl ElementMatrices {
    pub fn new(mesh: &Mesh) -> ElementMatrices {
        let (dx, dy) = (mesh.dx(), mesh.dy());
        let w = dx * dy / 4.0;
        let mut stiffness = [[0.0; 4]; 4];
        let mut mass = [[0.0; 4]; 4];
        let mut load = [0.0; 4];
        for (xi, eta) in gauss_points() {
            let (n, g) = shape(dx, dy, xi, eta);
            for a in 0..4 {
                load[a] += w * n[a];
                for b in 0..4 {
                    stiffness[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    mass[a][b] += w * n[a] * n[b];
                }
            }
        }
        ElementMatrices {
            stiffness,
            mass,
            load,
        }
    }

    /// `uᵀ K₀ v` for element-local vectors.
    pub fn energy(&self, u: &[f64; 4], v: &[f64; 4]) -> f64 {
        bilinear(&self.stiffness, u, v)
    }

    pub fn mass_product(&self, u: &[f64; 4], v: &[f64; 4]) -> f64 {
        bilinear(&self.mass, u, v)
    }
}

fn bilinear(m: &[[f64; 4]; 4], u: &[f64; 4], v: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += u[a] * m[a][b] * v[b];
        }
    }
    s
}

/// Nine-point nodal sparsity pattern of the grid.
pub fn node_pattern(mesh: &Mesh) -> CsrMatrix {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let rows = (0..mesh.n_nodes())
        .map(|n| {
            let (i, j) = mesh.node_ij(n);
            let mut r = Vec::with_capacity(9);
            for jj in j.saturating_sub(1)..=(j + 1).min(ny) {
                for ii in i.saturating_sub(1)..=(i + 1).min(nx) {
                    r.push(mesh.node_index(ii, jj));
                }
            }
            r
        })
        .collect();
    CsrMatrix::from_pattern(rows)
}

/// Assembled (unconstrained) operator, load vector and Dirichlet set.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<(usize, f64)>,
    pub symmetric: bool,
}

impl LinearSystem {
    /// Operator and right-hand side after Dirichlet elimination.
    pub fn constrained(&self) -> (CsrMatrix, Vec<f64>) {
        self.matrix.constrain(&self.rhs, &self.dirichlet)
    }

    /// `A T − b` on the unconstrained rows; at Dirichlet nodes this is the
    /// heat flowing into the domain through the wall.
    pub fn reaction(&self, t: &ScalarField) -> Vec<f64> {
        let at = self.matrix.apply(t.values());
        at.iter().zip(&self.rhs).map(|(a, b)| a - b).collect()
    }
}

fn check_elem_len(mesh: &Mesh, what: &'static str, v: &[f64]) -> Result<()> {
    if v.len() != mesh.n_elems() {
        return Err(Error::SizeMismatch {
            what,
            expected: mesh.n_elems(),
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains non-finite values"
        )));
    }
    Ok(())
}

fn dirichlet_set(mesh: &Mesh, regions: &RegionMap, bc: &ThermalBC) -> Vec<(usize, f64)> {
    regions
        .dirichlet_nodes(mesh)
        .into_iter()
        .map(|(n, c)| (n, bc.value(c)))
        .collect()
}

fn check_steady_inputs(mesh: &Mesh, k_elem: &[f64], sink_elem: &[f64]) -> Result<()> {
    check_elem_len(mesh, "element conductivity", k_elem)?;
    check_elem_len(mesh, "element sink", sink_elem)?;
    if let Some(e) = k_elem.iter().position(|&k| k <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "conductivity must be positive, element {e} has {}",
            k_elem[e]
        )));
    }
    if let Some(e) = sink_elem.iter().position(|&s| s < 0.0) {
        return Err(Error::InvalidInput(format!(
            "sink must be non-negative at element {e}"
        )));
    }
    Ok(())
}

/// Steady conduction with an out-of-plane sink.
pub fn assemble_steady(
    mesh: &Mesh,
    regions: &RegionMap,
    k_elem: &[f64],
    sink_elem: &[f64],
    bc: &ThermalBC,
) -> Result<LinearSystem> {
    check_steady_inputs(mesh, k_elem, sink_elem)?;
    let em = ElementMatrices::new(mesh);
    let mut matrix = node_pattern(mesh);
    let mut rhs = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elems() {
        let nodes = mesh.elem_nodes(e);
        let (k, s) = (k_elem[e], sink_elem[e]);
        for a in 0..4 {
            for b in 0..4 {
                matrix.add(
                    nodes[a],
                    nodes[b],
                    k * em.stiffness[a][b] + s * em.mass[a][b],
                );
            }
            rhs[nodes[a]] += (bc.q_source + s * bc.t_amb) * em.load[a];
        }
    }
    Ok(LinearSystem {
        matrix,
        rhs,
        dirichlet: dirichlet_set(mesh, regions, bc),
        symmetric: true,
    })
}

/// Streamline-upwind stabilisation parameter for one cell.
fn supg_tau(mesh: &Mesh, u: [f64; 2], k: f64, c: f64) -> f64 {
    let speed = u[0].hypot(u[1]);
    if speed == 0.0 {
        return 0.0;
    }
    let h = speed / (u[0].abs() / mesh.dx() + u[1].abs() / mesh.dy());
    let pe = speed * h * c / (2.0 * k);
    let xi = if pe < 1e-3 {
        pe / 3.0
    } else {
        1.0 / pe.tanh() - 1.0 / pe
    };
    h / (2.0 * speed) * xi
}

/// Steady convection–diffusion `C U·∇T − ∇·(k∇T) + s (T − T_amb) = Q` with
/// SUPG stabilisation. Reduces to [`assemble_steady`] when `U ≡ 0`.
pub fn assemble_convection(
    mesh: &Mesh,
    regions: &RegionMap,
    k_elem: &[f64],
    c_elem: &[f64],
    sink_elem: &[f64],
    vel: &VelocityField,
    bc: &ThermalBC,
) -> Result<LinearSystem> {
    check_steady_inputs(mesh, k_elem, sink_elem)?;
    check_elem_len(mesh, "element heat capacity", c_elem)?;
    if vel.values().len() != mesh.n_nodes() {
        return Err(Error::SizeMismatch {
            what: "velocity field",
            expected: mesh.n_nodes(),
            got: vel.values().len(),
        });
    }
    if vel.values().iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("velocity contains NaN".into()));
    }
    let mut sys = assemble_steady(mesh, regions, k_elem, sink_elem, bc)?;
    if vel.is_zero() {
        return Ok(sys);
    }
    sys.symmetric = false;
    let (dx, dy) = (mesh.dx(), mesh.dy());
    let w = dx * dy / 4.0;
    for e in 0..mesh.n_elems() {
        let nodes = mesh.elem_nodes(e);
        let ue = nodes.map(|n| vel.values()[n]);
        let mean = [
            ue.iter().map(|u| u[0]).sum::<f64>() / 4.0,
            ue.iter().map(|u| u[1]).sum::<f64>() / 4.0,
        ];
        let (k, c, s) = (k_elem[e], c_elem[e], sink_elem[e]);
        let tau = supg_tau(mesh, mean, k, c);
        let f = bc.q_source + s * bc.t_amb;
        for (xi, eta) in gauss_points() {
            let (n, g) = shape(dx, dy, xi, eta);
            let u = [
                (0..4).map(|a| n[a] * ue[a][0]).sum::<f64>(),
                (0..4).map(|a| n[a] * ue[a][1]).sum::<f64>(),
            ];
            let adv: [f64; 4] = std::array::from_fn(|a| u[0] * g[a][0] + u[1] * g[a][1]);
            for a in 0..4 {
                for b in 0..4 {
                    let galerkin = c * n[a] * adv[b];
                    let stab = tau * adv[a] * (c * adv[b] + s * n[b]);
                    sys.matrix.add(nodes[a], nodes[b], w * (galerkin + stab));
                }
                sys.rhs[nodes[a]] += w * tau * adv[a] * f;
            }
        }
    }
    Ok(sys)
}

/// Adds `∫ q(x, y) v` for a spatially varying volumetric source.
pub fn add_source(mesh: &Mesh, system: &mut LinearSystem, q: impl Fn(f64, f64) -> f64) {
    let (dx, dy) = (mesh.dx(), mesh.dy());
    let w = dx * dy / 4.0;
    for e in 0..mesh.n_elems() {
        let nodes = mesh.elem_nodes(e);
        let [cx, cy] = mesh.elem_centroid(e);
        for (xi, eta) in gauss_points() {
            let (n, _) = shape(dx, dy, xi, eta);
            let f = q(cx + 0.5 * dx * xi, cy + 0.5 * dy * eta);
            for a in 0..4 {
                system.rhs[nodes[a]] += w * f * n[a];
            }
        }
    }
}

/// Solves a system produced by one of the assemblers.
pub fn solve_steady(system: &LinearSystem, opts: SolverOptions) -> Result<ScalarField> {
    let (a, b) = system.constrained();
    let mut x = vec![0.0; a.dim()];
    for &(n, v) in &system.dirichlet {
        x[n] = v;
    }
    if system.symmetric {
        sparse::pcg(&a, &b, &mut x, opts)?;
    } else {
        sparse::bicgstab(&a, &b, &mut x, opts)?;
    }
    for &(n, v) in &system.dirichlet {
        x[n] = v;
    }
    Ok(ScalarField { values: x })
}

/// Assemble-and-solve shorthand for the steady conduction problem.
pub fn solve_conduction(
    mesh: &Mesh,
    regions: &RegionMap,
    k_elem: &[f64],
    sink_elem: &[f64],
    bc: &ThermalBC,
    opts: SolverOptions,
) -> Result<ScalarField> {
    solve_steady(
        &assemble_steady(mesh, regions, k_elem, sink_elem, bc)?,
        opts,
    )
}

/// Consistent mass matrix weighted by an element coefficient.
pub fn assemble_mass(mesh: &Mesh, coef: &[f64]) -> Result<CsrMatrix> {
    check_elem_len(mesh, "element coefficient", coef)?;
    let em = ElementMatrices::new(mesh);
    let mut m = node_pattern(mesh);
    for e in 0..mesh.n_elems() {
        let nodes = mesh.elem_nodes(e);
        for a in 0..4 {
            for b in 0..4 {
                m.add(nodes[a], nodes[b], coef[e] * em.mass[a][b]);
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct TransientResult {
    /// `times[0] = 0` belongs to the initial condition.
    pub times: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
}

impl TransientResult {
    pub fn last(&self) -> &ScalarField {
        self.snapshots
            .last()
            .expect("at least the initial snapshot")
    }
}

/// Row-sum lumped mass: nodal share of `∫ coef` over the adjacent elements.
pub fn lumped_mass(mesh: &Mesh, coef: &[f64]) -> Result<Vec<f64>> {
    check_elem_len(mesh, "element coefficient", coef)?;
    let quarter = 0.25 * mesh.elem_area();
    let mut m = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elems() {
        for n in mesh.elem_nodes(e) {
            m[n] += coef[e] * quarter;
        }
    }
    Ok(m)
}

/// Backward Euler: `(M_C/dt + K) Tⁿ⁺¹ = (M_C/dt) Tⁿ + F` with the capacity
/// matrix `M_C` lumped, so steps of any size keep temperatures between the
/// wall, ambient and initial values.
#[allow(clippy::too_many_arguments)]
pub fn solve_transient(
    mesh: &Mesh,
    regions: &RegionMap,
    k_elem: &[f64],
    c_elem: &[f64],
    sink_elem: &[f64],
    bc: &ThermalBC,
    t0: &ScalarField,
    dt: f64,
    t_end: f64,
    opts: SolverOptions,
) -> Result<TransientResult> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= dt) {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and t_end >= dt, got dt = {dt}, t_end = {t_end}"
        )));
    }
    if t0.values().len() != mesh.n_nodes() {
        return Err(Error::SizeMismatch {
            what: "initial temperature",
            expected: mesh.n_nodes(),
            got: t0.values().len(),
        });
    }
    check_elem_len(mesh, "element heat capacity", c_elem)?;
    if let Some(e) = c_elem.iter().position(|&c| c <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "heat capacity must be positive at element {e}"
        )));
    }
    let steady = assemble_steady(mesh, regions, k_elem, sink_elem, bc)?;
    let mass: Vec<f64> = lumped_mass(mesh, c_elem)?.iter().map(|m| m / dt).collect();
    let mut lhs = steady.matrix.clone();
    for (n, &m) in mass.iter().enumerate() {
        lhs.add(n, n, m);
    }

    let n_steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    snapshots.push(t0.clone());
    let mut current = t0.values().to_vec();
    for step in 1..=n_steps {
        let rhs: Vec<f64> = (0..current.len())
            .map(|n| mass[n] * current[n] + steady.rhs[n])
            .collect();
        let (a, b) = lhs.constrain(&rhs, &steady.dirichlet);
        let mut x = current.clone();
        for &(n, v) in &steady.dirichlet {
            x[n] = v;
        }
        sparse::pcg(&a, &b, &mut x, opts).map_err(|e| Error::TransientStep {
            step,
            source: Box::new(e),
        })?;
        for &(n, v) in &steady.dirichlet {
            x[n] = v;
        }
        current = x;
        times.push(step as f64 * dt);
        snapshots.push(ScalarField {
            values: current.clone(),
        });
    }
    Ok(TransientResult { times, snapshots })
}

/// Global heat budget of a steady solution (all in W per unit depth).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatBalance {
    /// Heat entering through the Dirichlet walls.
    pub wall_inflow: f64,
    /// `∫ s (T − T_amb)`.
    pub sink_extraction: f64,
    /// `∫ Q`.
    pub source_input: f64,
}

pub fn heat_balance(
    mesh: &Mesh,
    system: &LinearSystem,
    sink_elem: &[f64],
    bc: &ThermalBC,
    t: &ScalarField,
) -> HeatBalance {
    let reaction = system.reaction(t);
    let wall_inflow = system.dirichlet.iter().map(|&(n, _)| reaction[n]).sum();
    let em = ElementMatrices::new(mesh);
    let sink_extraction = (0..mesh.n_elems())
        .map(|e| {
            let te = t.gather(&mesh.elem_nodes(e)).map(|v| v - bc.t_amb);
            sink_elem[e] * em.mass_product(&te, &[1.0; 4])
        })
        .sum();
    HeatBalance {
        wall_inflow,
        sink_extraction,
        source_input: bc.q_source * mesh.area(),
    }
}

/// `∫ (T_h − f)²` with 3×3 Gauss quadrature per cell, square-rooted.
pub fn l2_error(mesh: &Mesh, t: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let g3 = [
        (-(0.6f64).sqrt(), 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        ((0.6f64).sqrt(), 5.0 / 9.0),
    ];
    let (dx, dy) = (mesh.dx(), mesh.dy());
    let mut s = 0.0;
    for e in 0..mesh.n_elems() {
        let te = t.gather(&mesh.elem_nodes(e));
        let [cx, cy] = mesh.elem_centroid(e);
        for &(xi, wx) in &g3 {
            for &(eta, wy) in &g3 {
                let (n, _) = shape(dx, dy, xi, eta);
                let th: f64 = (0..4).map(|a| n[a] * te[a]).sum();
                let d = th - exact(cx + 0.5 * dx * xi, cy + 0.5 * dy * eta);
                s += wx * wy * dx * dy / 4.0 * d * d;
            }
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SideConditions;

    fn strip(nx: usize, left: EdgeCondition, right: EdgeCondition) -> (Mesh, RegionMap) {
        let mesh = Mesh::build_grid(nx, 2, 1.0, 0.1).unwrap();
        let sides = SideConditions {
            left,
            right,
            top: EdgeCondition::Insulated,
            bottom: EdgeCondition::Insulated,
        };
        let regions = RegionMap::all_design(&mesh).with_sides(&mesh, sides);
        (mesh, regions)
    }

    fn tight() -> SolverOptions {
        SolverOptions {
            rel_tol: 1e-13,
            max_iter: 50_000,
        }
    }

    #[test]
    fn element_matrices_match_closed_form() {
        // unit square cell: K = [4 -1 -2 -1]/6 pattern, M = A/36 [4 2 1 2]
        let mesh = Mesh::build_grid(2, 2, 2.0, 2.0).unwrap();
        let em = ElementMatrices::new(&mesh);
        let k = [4.0, -1.0, -2.0, -1.0].map(|v| v / 6.0);
        let m = [4.0, 2.0, 1.0, 2.0].map(|v| v / 36.0);
        for a in 0..4 {
            for b in 0..4 {
                let d = (b + 4 - a) % 4;
                assert!((em.stiffness[a][b] - k[d]).abs() < 1e-14);
                assert!((em.mass[a][b] - m[d]).abs() < 1e-14);
            }
            assert!((em.load[a] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let mesh = Mesh::build_grid(2, 2, 1.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let sys =
            assemble_steady(&mesh, &regions, &[1.0; 4], &[0.0; 4], &ThermalBC::default()).unwrap();
        let fixed: Vec<usize> = sys.dirichlet.iter().map(|d| d.0).collect();
        for i in (0..mesh.n_nodes()).filter(|i| !fixed.contains(i)) {
            let s: f64 = sys.matrix.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-14);
        }
        // the full unconstrained operator annihilates constants
        for i in 0..mesh.n_nodes() {
            let s: f64 = sys.matrix.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-14);
        }
        assert!(sys.matrix.asymmetry() <= 1e-12);
    }

    #[test]
    fn sink_adds_weighted_mass() {
        let mesh = Mesh::build_grid(5, 4, 2.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let ne = mesh.n_elems();
        let k: Vec<f64> = (0..ne).map(|e| 1.0 + e as f64 * 0.1).collect();
        let h = 7.5;
        let bc = ThermalBC::default();
        let cond = assemble_steady(&mesh, &regions, &k, &vec![0.0; ne], &bc).unwrap();
        let both = assemble_steady(&mesh, &regions, &k, &vec![h; ne], &bc).unwrap();
        let mass = assemble_mass(&mesh, &vec![h; ne]).unwrap();
        let mut expect = cond.matrix.clone();
        expect.add_scaled(1.0, &mass);
        for i in 0..mesh.n_nodes() {
            for (j, v) in both.matrix.row(i) {
                assert!((v - expect.get(i, j)).abs() < 1e-12);
            }
        }
        assert!(both.matrix.asymmetry() <= 1e-12);
    }

    #[test]
    fn rejects_bad_coefficients() {
        let mesh = Mesh::build_grid(2, 2, 1.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let bc = ThermalBC::default();
        assert!(matches!(
            assemble_steady(&mesh, &regions, &[1.0; 3], &[0.0; 4], &bc),
            Err(Error::SizeMismatch { .. })
        ));
        assert!(assemble_steady(&mesh, &regions, &[1.0, 0.0, 1.0, 1.0], &[0.0; 4], &bc).is_err());
        let vel = VelocityField::uniform(&mesh, [f64::NAN, 0.0]);
        assert!(
            assemble_convection(&mesh, &regions, &[1.0; 4], &[1.0; 4], &[0.0; 4], &vel, &bc)
                .is_err()
        );
    }

    #[test]
    fn linear_profile_between_walls() {
        let (mesh, regions) = strip(10, EdgeCondition::Hot, EdgeCondition::Cold);
        let bc = ThermalBC {
            t_hot: 1000.0,
            t_amb: 300.0,
            h_sink: 0.0,
            q_source: 0.0,
        };
        let ne = mesh.n_elems();
        let t = solve_conduction(
            &mesh,
            &regions,
            &vec![3.0; ne],
            &vec![0.0; ne],
            &bc,
            tight(),
        )
        .unwrap();
        for n in 0..mesh.n_nodes() {
            let x = mesh.node_coords(n)[0];
            assert!((t.values()[n] - (1000.0 - 700.0 * x)).abs() < 1e-6);
        }
        let mid = mesh.node_index(5, 1);
        assert!((t.values()[mid] - 650.0).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_with_sink() {
        let mesh = Mesh::build_grid(6, 6, 1.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh)
            .with_sides(&mesh, SideConditions::uniform(EdgeCondition::Cold));
        let bc = ThermalBC {
            h_sink: 20.0,
            ..Default::default()
        };
        let ne = mesh.n_elems();
        let t = solve_conduction(
            &mesh,
            &regions,
            &vec![1.0; ne],
            &vec![20.0; ne],
            &bc,
            tight(),
        )
        .unwrap();
        assert!(t.values().iter().all(|v| (v - bc.t_amb).abs() < 1e-9));
    }

    #[test]
    fn dirichlet_nodes_are_exact_and_residual_small() {
        let mesh = Mesh::build_grid(12, 12, 8.0, 8.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let bc = ThermalBC::default();
        let ne = mesh.n_elems();
        let k: Vec<f64> = (0..ne).map(|e| 0.6 + (e % 7) as f64).collect();
        let sys = assemble_steady(&mesh, &regions, &k, &vec![bc.h_sink; ne], &bc).unwrap();
        let t = solve_steady(&sys, SolverOptions::default()).unwrap();
        for &(n, v) in &sys.dirichlet {
            assert_eq!(t.values()[n], v);
        }
        let (a, b) = sys.constrained();
        let ax = a.apply(t.values());
        let r: f64 = ax
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r <= 1e-8 * bn);
    }

    #[test]
    fn zero_velocity_convection_equals_conduction() {
        let mesh = Mesh::build_grid(4, 3, 1.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let bc = ThermalBC::default();
        let ne = mesh.n_elems();
        let k = vec![2.0; ne];
        let c = vec![5.0; ne];
        let s = vec![1.0; ne];
        let a = assemble_steady(&mesh, &regions, &k, &s, &bc).unwrap();
        let b = assemble_convection(
            &mesh,
            &regions,
            &k,
            &c,
            &s,
            &VelocityField::zero(&mesh),
            &bc,
        )
        .unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
        assert!(b.symmetric);
    }

    #[test]
    fn advection_is_not_symmetric() {
        let mesh = Mesh::build_grid(4, 4, 1.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let ne = mesh.n_elems();
        let vel = VelocityField::uniform(&mesh, [1.0, 0.5]);
        let sys = assemble_convection(
            &mesh,
            &regions,
            &vec![1.0; ne],
            &vec![1.0; ne],
            &vec![0.0; ne],
            &vel,
            &ThermalBC::default(),
        )
        .unwrap();
        assert!(sys.matrix.skew_norm() > 0.0);
        assert!(!sys.symmetric);
    }

    #[test]
    fn advection_diffusion_matches_exponential_profile() {
        // C u L / k = 10
        let (mesh, regions) = strip(40, EdgeCondition::Cold, EdgeCondition::Hot);
        let bc = ThermalBC {
            t_hot: 1.0,
            t_amb: 0.0,
            h_sink: 0.0,
            q_source: 0.0,
        };
        let ne = mesh.n_elems();
        let vel = VelocityField::uniform(&mesh, [10.0, 0.0]);
        let sys = assemble_convection(
            &mesh,
            &regions,
            &vec![1.0; ne],
            &vec![1.0; ne],
            &vec![0.0; ne],
            &vel,
            &bc,
        )
        .unwrap();
        let t = solve_steady(&sys, tight()).unwrap();
        let pe: f64 = 10.0;
        for n in 0..mesh.n_nodes() {
            let x = mesh.node_coords(n)[0];
            let exact = ((pe * x).exp() - 1.0) / (pe.exp() - 1.0);
            assert!(
                (t.values()[n] - exact).abs() <= 0.02 * exact.max(1e-3) + 1e-9,
                "x = {x}"
            );
        }
    }

    #[test]
    fn transient_from_equilibrium_stays_put() {
        let mesh = Mesh::build_grid(6, 6, 1.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let bc = ThermalBC {
            h_sink: 0.0,
            ..Default::default()
        };
        let ne = mesh.n_elems();
        let t0 = ScalarField::uniform(&mesh, bc.t_hot);
        let res = solve_transient(
            &mesh,
            &regions,
            &vec![1.0; ne],
            &vec![1e3; ne],
            &vec![0.0; ne],
            &bc,
            &t0,
            0.5,
            5.0,
            tight(),
        )
        .unwrap();
        assert_eq!(res.snapshots.len(), 11);
        for s in &res.snapshots {
            assert!(s.values().iter().all(|v| (v - bc.t_hot).abs() < 1e-9));
        }
    }

    #[test]
    fn transient_rejects_bad_step() {
        let mesh = Mesh::build_grid(2, 2, 1.0, 1.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let t0 = ScalarField::uniform(&mesh, 300.0);
        let r = solve_transient(
            &mesh,
            &regions,
            &[1.0; 4],
            &[1.0; 4],
            &[0.0; 4],
            &ThermalBC::default(),
            &t0,
            1.0,
            0.5,
            tight(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn heat_budget_closes() {
        let mesh = Mesh::build_grid(16, 16, 8.0, 8.0).unwrap();
        let regions = RegionMap::all_design(&mesh);
        let bc = ThermalBC {
            q_source: 25.0,
            ..Default::default()
        };
        let ne = mesh.n_elems();
        let k: Vec<f64> = (0..ne).map(|e| 0.6 + (e % 5) as f64 * 3.0).collect();
        let s: Vec<f64> = (0..ne).map(|e| 10.0 + (e % 3) as f64 * 20.0).collect();
        let sys = assemble_steady(&mesh, &regions, &k, &s, &bc).unwrap();
        let t = solve_steady(&sys, tight()).unwrap();
        let hb = heat_balance(&mesh, &sys, &s, &bc, &t);
        let lhs = hb.wall_inflow + hb.source_input;
        assert!((lhs - hb.sink_extraction).abs() <= 1e-6 * hb.sink_extraction.abs());
    }
}
