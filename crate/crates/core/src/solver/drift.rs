use serde::{Deserialize, Serialize};

use crate::error::{Result, SpdeError};

/// Time dependence of one drift coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    /// `Σ_j c_j t^j`
    Polynomial(Vec<f64>),
}

impl Coefficient {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Polynomial(c) => c.iter().rev().fold(0.0, |acc, cj| acc * t + cj),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Polynomial(c) => c.iter().skip(1).all(|&x| x == 0.0),
        }
    }
}

/// `F(t, φ) = Σ_{j=0}^n A_j(t) φ^j` with odd `n ≥ 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPolynomial {
    coefficients: Vec<Coefficient>,
}

impl DriftPolynomial {
    /// Coefficients `A_0, …, A_n`.
    pub fn new(coefficients: Vec<Coefficient>) -> Result<Self> {
        let n = coefficients.len().saturating_sub(1);
        if n < 3 || n % 2 == 0 {
            return Err(SpdeError::Config(format!("drift degree must be odd and at least 3 (got {n})")));
        }
        Ok(Self { coefficients })
    }

    /// `(1 + t²) - φ³`, with the stable branch `(1 + t²)^{1/3}`.
    pub fn cubic_fixture() -> Self {
        Self::new(vec![
            Coefficient::Polynomial(vec![1.0, 0.0, 1.0]),
            Coefficient::Constant(0.0),
            Coefficient::Constant(0.0),
            Coefficient::Constant(-1.0),
        ])
        .expect("valid")
    }

    /// `a(t) φ - φ³` with `a(t) = t - t*`.
    pub fn pitchfork(t_star: f64) -> Self {
        Self::new(vec![
            Coefficient::Constant(0.0),
            Coefficient::Polynomial(vec![-t_star, 1.0]),
            Coefficient::Constant(0.0),
            Coefficient::Constant(-1.0),
        ])
        .expect("valid")
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, j: usize, t: f64) -> f64 {
        self.coefficients.get(j).map_or(0.0, |c| c.at(t))
    }

    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.at(t)).collect()
    }

    pub fn is_autonomous(&self) -> bool {
        self.coefficients.iter().all(Coefficient::is_constant)
    }

    /// Checks `A_n(t) ≤ -a_lead` on every grid point.
    pub fn check_leading(&self, a_lead: f64, grid: &[f64]) -> Result<()> {
        let n = self.degree();
        for &t in grid {
            let an = self.coefficient(n, t);
            if an > -a_lead {
                return Err(SpdeError::Config(format!(
                    "leading coefficient A_{n}({t}) = {an} is not below -{a_lead}"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, phi: f64) -> f64 {
        horner(&self.coefficients_at(t), phi)
    }

    pub fn d_phi(&self, t: f64, phi: f64) -> f64 {
        let a = self.coefficients_at(t);
        a.iter().enumerate().skip(1).rev().fold(0.0, |acc, (j, aj)| acc * phi + j as f64 * aj)
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_degree_is_rejected() {
        let c = vec![Coefficient::Constant(0.0); 5];
        let err = DriftPolynomial::new(c).unwrap_err();
        assert!(err.to_string().contains("odd"));
        assert!(DriftPolynomial::new(vec![Coefficient::Constant(1.0); 2]).is_err());
    }

    #[test]
    fn evaluation_and_derivative() {
        let f = DriftPolynomial::cubic_fixture();
        assert_eq!(f.eval(1.0, 1.0), 1.0);
        assert_eq!(f.d_phi(0.3, 2.0), -12.0);
        assert!(f.check_leading(0.5, &[0.0, 1.0]).is_ok());
        let bad = DriftPolynomial::new(vec![
            Coefficient::Constant(0.0),
            Coefficient::Constant(0.0),
            Coefficient::Constant(0.0),
            Coefficient::Polynomial(vec![-1.0, 2.0]),
        ])
        .unwrap();
        assert!(bad.check_leading(0.1, &[0.0, 0.25, 0.5]).is_err());
    }
}
