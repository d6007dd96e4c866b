//! Helmholtz density filter `θ_f − R²∇²θ_f = θ_c` with homogeneous Neumann
//! walls.
//!
//! Densities live on elements, so the equation is discretised cell-centred:
//! each element couples to its face neighbours through a five-point
//! Laplacian and no flux crosses the outer wall. The resulting operator is
//! a symmetric M-matrix, which gives the filter its identities directly:
//! constants are fixed points, `R = 0` is the identity, the domain mean is
//! conserved and outputs stay within the input range.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{self, CsrMatrix, SolverOptions};

/// Element-wise density in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<DensityField> {
        if values.len() != mesh.n_elems() {
            return Err(Error::SizeMismatch {
                what: "density field",
                expected: mesh.n_elems(),
                got: values.len(),
            });
        }
        if let Some(e) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!(
                "density {} at element {e} outside [0, 1]",
                values[e]
            )));
        }
        Ok(DensityField { values })
    }

    /// Caller guarantees every value lies in `[0, 1]`.
    pub(crate) fn from_raw(values: Vec<f64>) -> DensityField {
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        DensityField { values }
    }

    pub fn uniform(mesh: &Mesh, value: f64) -> Result<DensityField> {
        Self::new(mesh, vec![value; mesh.n_elems()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
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
}

/// Sum of absolute jumps across interior element faces, weighted by face length.
pub fn total_variation(mesh: &Mesh, values: &[f64]) -> f64 {
    let mut tv = 0.0;
    for e in 0..mesh.n_elems() {
        let [_, right, _, top] = mesh.elem_neighbors(e);
        if let Some(r) = right {
            tv += (values[e] - values[r]).abs() * mesh.dy();
        }
        if let Some(t) = top {
            tv += (values[e] - values[t]).abs() * mesh.dx();
        }
    }
    tv
}

/// Pre-assembled filter operator for one mesh and radius.
#[derive(Clone, Debug)]
pub struct HelmholtzFilter {
    operator: Option<CsrMatrix>,
    n: usize,
    opts: SolverOptions,
}

impl HelmholtzFilter {
    pub fn new(mesh: &Mesh, r_min: f64) -> Result<HelmholtzFilter> {
        if !(r_min >= 0.0 && r_min.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "filter radius must be >= 0, got {r_min}"
            )));
        }
        let opts = SolverOptions {
            rel_tol: 1e-12,
            max_iter: 20_000,
        };
        let n = mesh.n_elems();
        if r_min == 0.0 {
            return Ok(HelmholtzFilter {
                operator: None,
                n,
                opts,
            });
        }
        let r2 = r_min * r_min;
        let cx = r2 / (mesh.dx() * mesh.dx());
        let cy = r2 / (mesh.dy() * mesh.dy());
        let rows = (0..n)
            .map(|e| {
                let mut r = vec![e];
                r.extend(mesh.elem_neighbors(e).into_iter().flatten());
                r
            })
            .collect();
        let mut a = CsrMatrix::from_pattern(rows);
        for e in 0..n {
            a.add(e, e, 1.0);
            let [l, r, b, t] = mesh.elem_neighbors(e);
            for (nb, c) in [(l, cx), (r, cx), (b, cy), (t, cy)] {
                if let Some(nb) = nb {
                    a.add(e, e, c);
                    a.add(e, nb, -c);
                }
            }
        }
        Ok(HelmholtzFilter {
            operator: Some(a),
            n,
            opts,
        })
    }

    pub fn operator(&self) -> Option<&CsrMatrix> {
        self.operator.as_ref()
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::SizeMismatch {
                what: "filter input",
                expected: self.n,
                got: rhs.len(),
            });
        }
        match &self.operator {
            None => Ok(rhs.to_vec()),
            Some(a) => {
                let mut x = rhs.to_vec();
                sparse::pcg(a, rhs, &mut x, self.opts)?;
                Ok(x)
            }
        }
    }

    /// Filtered values without the final clamp to `[0, 1]`.
    pub fn apply_unclamped(&self, theta_c: &[f64]) -> Result<Vec<f64>> {
        self.solve(theta_c)
    }

    pub fn apply(&self, theta_c: &DensityField) -> Result<DensityField> {
        let mut v = self.solve(theta_c.values())?;
        v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        Ok(DensityField { values: v })
    }

    /// Sensitivities with respect to the raw densities, given sensitivities
    /// with respect to the filtered ones. The operator is symmetric, so the
    /// transpose costs one more filter solve.
    pub fn chain_gradient(&self, d_theta_f: &[f64]) -> Result<Vec<f64>> {
        self.solve(d_theta_f)
    }
}

/// One-shot filter for callers that do not reuse the operator.
pub fn helmholtz_filter(mesh: &Mesh, theta_c: &DensityField, r_min: f64) -> Result<DensityField> {
    HelmholtzFilter::new(mesh, r_min)?.apply(theta_c)
}

pub fn filter_chain_gradient(mesh: &Mesh, d_theta_f: &[f64], r_min: f64) -> Result<Vec<f64>> {
    HelmholtzFilter::new(mesh, r_min)?.chain_gradient(d_theta_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn constants_are_fixed_points() {
        let mesh = Mesh::build_grid(20, 12, 8.0, 4.0).unwrap();
        let f = HelmholtzFilter::new(&mesh, 0.9).unwrap();
        let c = DensityField::uniform(&mesh, 0.37).unwrap();
        let out = f.apply(&c).unwrap();
        assert!(out.values().iter().all(|v| (v - 0.37).abs() < 1e-10));
    }

    #[test]
    fn zero_radius_is_identity() {
        let mesh = Mesh::build_grid(9, 7, 1.0, 1.0).unwrap();
        let v = random_field(mesh.n_elems(), 1);
        let out =
            helmholtz_filter(&mesh, &DensityField::new(&mesh, v.clone()).unwrap(), 0.0).unwrap();
        for (a, b) in out.values().iter().zip(&v) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(filter_chain_gradient(&mesh, &v, 0.0).unwrap(), v);
    }

    #[test]
    fn checkerboard_is_smoothed() {
        let mesh = Mesh::build_grid(32, 32, 8.0, 8.0).unwrap();
        let v: Vec<f64> = (0..mesh.n_elems())
            .map(|e| {
                let (i, j) = mesh.elem_ij(e);
                ((i + j) % 2) as f64
            })
            .collect();
        let out = helmholtz_filter(
            &mesh,
            &DensityField::new(&mesh, v).unwrap(),
            2.0 * mesh.dx(),
        )
        .unwrap();
        let worst = out
            .values()
            .iter()
            .map(|t| (t - 0.5).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "max deviation {worst}");
        assert!((out.mean() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn negative_radius_is_rejected() {
        let mesh = Mesh::build_grid(3, 3, 1.0, 1.0).unwrap();
        assert!(HelmholtzFilter::new(&mesh, -0.1).is_err());
    }

    #[test]
    fn total_variation_decreases_with_radius() {
        let mesh = Mesh::build_grid(24, 24, 8.0, 8.0).unwrap();
        let v = random_field(mesh.n_elems(), 7);
        let h = mesh.dx();
        let mut last = f64::INFINITY;
        for r in [0.0, h, 2.0 * h, 4.0 * h] {
            let out = HelmholtzFilter::new(&mesh, r)
                .unwrap()
                .apply_unclamped(&v)
                .unwrap();
            let tv = total_variation(&mesh, &out);
            assert!(tv <= last + 1e-12, "radius {r}: {tv} > {last}");
            last = tv;
        }
    }

    #[test]
    fn chain_gradient_preserves_constants() {
        let mesh = Mesh::build_grid(8, 8, 1.0, 1.0).unwrap();
        let g = filter_chain_gradient(&mesh, &vec![2.5; 64], 0.3).unwrap();
        assert!(g.iter().all(|v| (v - 2.5).abs() < 1e-10));
    }
}
