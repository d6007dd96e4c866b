//! Power-law (SIMP) interpolation between the fluid and solid phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fluid (`*_fluid`) and solid (`*_solid`) endpoints with the penalty exponent.
///
/// Heat capacities are volumetric (ρ·c folded in).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialPair {
    pub k_fluid: f64,
    pub k_solid: f64,
    pub c_fluid: f64,
    pub c_solid: f64,
    pub penal: f64,
}

impl Default for MaterialPair {
    /// Water and structural steel, penalty exponent 3.
    fn default() -> Self {
        MaterialPair {
            k_fluid: 0.6,
            k_solid: 44.5,
            c_fluid: 4.18e6,
            c_solid: 3.75e6,
            penal: 3.0,
        }
    }
}

impl MaterialPair {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(format!("material: {m}")));
        if !(self.k_fluid > 0.0) {
            return fail("k_fluid must be positive");
        }
        if !(self.k_solid > self.k_fluid) {
            return fail("k_solid must exceed k_fluid");
        }
        if !(self.c_fluid > 0.0 && self.c_solid > 0.0) {
            return fail("heat capacities must be positive");
        }
        if !(self.penal >= 1.0) {
            return fail("penal must be at least 1");
        }
        Ok(())
    }

    pub fn conductivity(&self, theta: f64) -> Result<f64> {
        check_density(theta)?;
        Ok(self.k_fluid + theta.powf(self.penal) * (self.k_solid - self.k_fluid))
    }

    pub fn heat_capacity(&self, theta: f64) -> Result<f64> {
        check_density(theta)?;
        Ok(self.c_fluid + theta.powf(self.penal) * (self.c_solid - self.c_fluid))
    }

    pub fn conductivity_derivative(&self, theta: f64) -> f64 {
        self.penal * theta.powf(self.penal - 1.0) * (self.k_solid - self.k_fluid)
    }

    pub fn heat_capacity_derivative(&self, theta: f64) -> f64 {
        self.penal * theta.powf(self.penal - 1.0) * (self.c_solid - self.c_fluid)
    }

    /// Element conductivities for a density field already known to lie in `[0, 1]`.
    pub fn conductivities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        theta.iter().map(|&t| self.conductivity(t)).collect()
    }

    pub fn heat_capacities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        theta.iter().map(|&t| self.heat_capacity(t)).collect()
    }
}

fn check_density(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "density {theta} outside [0, 1]"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_are_exact() {
        let m = MaterialPair::default();
        assert_eq!(m.conductivity(0.0).unwrap(), m.k_fluid);
        assert_eq!(m.conductivity(1.0).unwrap(), m.k_solid);
        assert_eq!(m.heat_capacity(0.0).unwrap(), m.c_fluid);
        assert_eq!(m.heat_capacity(1.0).unwrap(), m.c_solid);
    }

    #[test]
    fn cubic_midpoint() {
        let m = MaterialPair::default();
        approx::assert_relative_eq!(m.conductivity(0.5).unwrap(), 6.0875, max_relative = 1e-14);
    }

    #[test]
    fn linear_penalty_is_linear_interpolation() {
        let m = MaterialPair {
            penal: 1.0,
            ..Default::default()
        };
        approx::assert_relative_eq!(
            m.heat_capacity(0.5).unwrap(),
            0.5 * (m.c_fluid + m.c_solid),
            max_relative = 1e-15
        );
    }

    #[test]
    fn rejects_out_of_range_density() {
        let m = MaterialPair::default();
        assert!(m.conductivity(-1e-9).is_err());
        assert!(m.conductivity(1.0 + 1e-9).is_err());
        assert!(m.heat_capacity(f64::NAN).is_err());
    }

    #[test]
    fn derivative_matches_central_differences() {
        let m = MaterialPair::default();
        let h = 1e-6;
        for theta in [0.25, 0.5, 0.75] {
            let fd = (m.conductivity(theta + h).unwrap() - m.conductivity(theta - h).unwrap())
                / (2.0 * h);
            let an = m.conductivity_derivative(theta);
            assert!(
                (fd - an).abs() <= 1e-6 * an.abs(),
                "theta {theta}: {fd} vs {an}"
            );
        }
    }

    #[test]
    fn validation() {
        assert!(MaterialPair::default().validate().is_ok());
        assert!(MaterialPair {
            k_solid: 0.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MaterialPair {
            penal: 0.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn interpolants_are_bounded_and_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, p in 1.0f64..6.0) {
            let m = MaterialPair { penal: p, ..Default::default() };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let k = m.conductivity(a).unwrap();
            prop_assert!(k >= m.k_fluid && k <= m.k_solid);
            let c = m.heat_capacity(a).unwrap();
            prop_assert!(c >= m.c_solid.min(m.c_fluid) && c <= m.c_solid.max(m.c_fluid));
            prop_assert!(m.conductivity(lo).unwrap() <= m.conductivity(hi).unwrap());
        }
    }
}
