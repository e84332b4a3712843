use super::GridDomain;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Scalar coefficient profile evaluated at node coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `base + amplitude * exp(1 - 1/(1 - r²/radius²))` inside the radius.
    Bump { base: f64, amplitude: f64, center: Vec<f64>, radius: f64 },
    /// `base + gradient · x`
    Affine { base: f64, gradient: Vec<f64> },
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        FieldSpec::Constant { value }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Bump { base, amplitude, center, radius } => {
                let r2: f64 = center.iter().enumerate().map(|(k, c)| (x[k] - c).powi(2)).sum();
                let s = r2 / (radius * radius);
                if s < 1.0 {
                    base + amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    *base
                }
            }
            FieldSpec::Affine { base, gradient } => base + gradient.iter().enumerate().map(|(k, g)| g * x[k]).sum::<f64>(),
        }
    }
}

/// Drift field `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    #[default]
    None,
    Constant { value: Vec<f64> },
    /// `B = ∇(A Π sin(π x_i / L_i))`, a gradient field whose potential vanishes on the boundary.
    GradientSine { amplitude: f64 },
}

/// Omitted fields take the defaults `a = ρ = 1`, `q = 0`, no drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoefficientSpec {
    pub a: FieldSpec,
    pub rho: FieldSpec,
    pub q: FieldSpec,
    pub drift: DriftSpec,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec { a: FieldSpec::constant(1.0), rho: FieldSpec::constant(1.0), q: FieldSpec::constant(0.0), drift: DriftSpec::None }
    }
}

/// Coefficients sampled at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub a: Vec<f64>,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    /// Drift components per axis, absent when `B = 0`.
    pub drift: Option<Vec<Vec<f64>>>,
}

impl CoefficientField {
    pub fn sample(domain: &GridDomain, spec: &CoefficientSpec) -> Result<Self> {
        let n = domain.n_nodes();
        let at = |f: &FieldSpec| (0..n).map(|k| f.eval(domain.coords(k))).collect::<Vec<_>>();
        let lengths: Vec<f64> = domain.spacing.iter().zip(&domain.cells).map(|(h, &c)| h * c as f64).collect();
        let drift = match &spec.drift {
            DriftSpec::None => None,
            DriftSpec::Constant { value } => {
                if value.len() != domain.dim {
                    return Err(Error::Parameter(format!("drift needs {} components", domain.dim)));
                }
                Some(value.iter().map(|&v| vec![v; n]).collect())
            }
            DriftSpec::GradientSine { amplitude } => {
                let mut comps = vec![vec![0.0; n]; domain.dim];
                for k in 0..n {
                    let x = domain.coords(k);
                    for (axis, comp) in comps.iter_mut().enumerate() {
                        let mut v = amplitude * PI / lengths[axis] * (PI * x[axis] / lengths[axis]).cos();
                        for other in 0..domain.dim {
                            if other != axis {
                                v *= (PI * x[other] / lengths[other]).sin();
                            }
                        }
                        comp[k] = v;
                    }
                }
                Some(comps)
            }
        };
        let field = CoefficientField { a: at(&spec.a), rho: at(&spec.rho), q: at(&spec.q), drift };
        field.validate()?;
        Ok(field)
    }

    /// Positivity bounds: `a > 0`, `ρ > 0`, `q >= 0`, all finite.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut reasons = Vec::new();
        for k in 0..self.a.len() {
            let mut fail = false;
            if !(self.a[k] > 0.0 && self.a[k].is_finite()) {
                fail = true;
                reasons.push("a must be positive");
            }
            if !(self.rho[k] > 0.0 && self.rho[k].is_finite()) {
                fail = true;
                reasons.push("rho must be positive");
            }
            if !(self.q[k] >= 0.0 && self.q[k].is_finite()) {
                fail = true;
                reasons.push("q must be nonnegative");
            }
            if let Some(d) = &self.drift {
                if d.iter().any(|c| !c[k].is_finite()) {
                    fail = true;
                    reasons.push("drift must be finite");
                }
            }
            if fail {
                bad.push(k);
            }
        }
        if bad.is_empty() {
            return Ok(());
        }
        reasons.sort();
        reasons.dedup();
        Err(Error::Validation { reason: reasons.join("; "), nodes: bad })
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    pub fn rho_min(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `‖B‖_∞` over nodes (Euclidean norm per node).
    pub fn drift_sup(&self) -> f64 {
        match &self.drift {
            None => 0.0,
            Some(d) => (0..self.a.len())
                .map(|k| d.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        }
    }

    /// CSV export: node coordinates followed by the coefficient values.
    pub fn to_csv(&self, domain: &GridDomain) -> String {
        let mut s = String::from("node,x,y,a,rho,q,bx,by\n");
        for k in 0..self.a.len() {
            let x = domain.coords(k);
            let b = |axis: usize| self.drift.as_ref().and_then(|d| d.get(axis)).map_or(0.0, |c| c[k]);
            let _ = writeln!(s, "{k},{},{},{},{},{},{},{}", x[0], x[1], self.a[k], self.rho[k], self.q[k], b(0), b(1));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_domain, DomainSpec};
    use super::*;

    #[test]
    fn negative_density_lists_nodes() {
        let d = build_domain(&DomainSpec::interval(8)).unwrap();
        let spec = CoefficientSpec {
            rho: FieldSpec::Affine { base: -0.3, gradient: vec![1.0] },
            ..CoefficientSpec::default()
        };
        match CoefficientField::sample(&d, &spec) {
            Err(Error::Validation { nodes, reason }) => {
                assert_eq!(nodes, vec![0, 1, 2]);
                assert!(reason.contains("rho"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn gradient_drift_vanishes_in_potential() {
        let d = build_domain(&DomainSpec::square(8, None)).unwrap();
        let spec = CoefficientSpec { drift: DriftSpec::GradientSine { amplitude: 1.0 }, ..CoefficientSpec::default() };
        let c = CoefficientField::sample(&d, &spec).unwrap();
        assert!((c.drift_sup() - PI).abs() < 1e-12);
    }

    #[test]
    fn bump_peaks_at_center() {
        let f = FieldSpec::Bump { base: 1.0, amplitude: 0.5, center: vec![0.5, 0.5], radius: 0.2 };
        assert!((f.eval([0.5, 0.5]) - 1.5).abs() < 1e-15);
        assert_eq!(f.eval([0.9, 0.5]), 1.0);
    }
}
