/// Viscosities and barotropic pressure law `P(ϱ) = a ϱ^γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub pressure_a: f64,
    pub pressure_gamma: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self { mu: 1.0, lambda: 0.5, pressure_a: 1.0, pressure_gamma: 1.4 }
    }
}

impl MaterialParams {
    /// `μ > 0` and `2μ + dλ > 0`. The message names the violated inequality.
    pub fn check_ellipticity(&self, dim: usize) -> Result<(), String> {
        if !(self.mu > 0.0) {
            return Err(format!("µ = {} must be positive", self.mu));
        }
        if !(2.0 * self.mu + dim as f64 * self.lambda > 0.0) {
            return Err(format!("2µ+{dim}λ ≤ 0"));
        }
        Ok(())
    }

    pub fn validate(&self, dim: usize) -> Result<(), String> {
        self.check_ellipticity(dim).map_err(|e| format!("ellipticity violated: {e}"))?;
        if !(self.pressure_a > 0.0) {
            return Err(format!("pressure coefficient {} must be positive", self.pressure_a));
        }
        if !(self.pressure_gamma >= 1.0) {
            return Err(format!("pressure exponent {} must be at least 1", self.pressure_gamma));
        }
        Ok(())
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        self.pressure_a * rho.powf(self.pressure_gamma)
    }

    #[inline]
    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        self.pressure_a * self.pressure_gamma * rho.powf(self.pressure_gamma - 1.0)
    }

    /// Sound speed `√P'(ϱ)`.
    pub fn sound_speed(&self, rho: f64) -> f64 {
        self.pressure_derivative(rho).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipticity_message_uses_dimension() {
        let p = MaterialParams { mu: 1.0, lambda: -1.0, ..Default::default() };
        assert_eq!(p.validate(2).unwrap_err(), "ellipticity violated: 2µ+2λ ≤ 0");
        assert!(p.validate(3).is_err());
        let ok = MaterialParams { lambda: -0.7, ..Default::default() };
        assert!(ok.validate(3).is_err());
        assert!(ok.validate(2).is_ok());
    }

    #[test]
    fn pressure_is_increasing_and_convex() {
        let p = MaterialParams::default();
        assert_eq!(p.pressure(1.0), 1.0);
        let h = 1e-4;
        for r in [0.5, 1.0, 2.0] {
            assert!(p.pressure_derivative(r) > 0.0);
            let second = (p.pressure(r + h) - 2.0 * p.pressure(r) + p.pressure(r - h)) / (h * h);
            assert!(second > 0.0);
            let fd = (p.pressure(r + h) - p.pressure(r - h)) / (2.0 * h);
            assert!((fd - p.pressure_derivative(r)).abs() < 1e-7);
        }
    }
}
