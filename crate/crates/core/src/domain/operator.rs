use super::{CoefficientField, GridDomain};
use crate::linalg::{BandedLu, Csr};
use crate::{Error, Result};

/// Finite-difference realization of `𝒜u = -div(a∇u) + B·∇u + qu` on the fluid
/// interior nodes, with Dirichlet values on the outer boundary and zero on the
/// obstacle.
///
/// Interior rows are the unscaled difference quotients, so that
/// `stiffness φ = λ mass φ` approximates the continuous eigenproblem directly.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub domain: GridDomain,
    pub coeff: CoefficientField,
    /// `-div(a∇·) + q` on the unknowns.
    pub stiffness: Csr,
    /// Centered `B·∇` on the unknowns (empty when `B = 0`).
    pub drift: Csr,
    /// Diagonal of the mass matrix, `ρ` at the unknowns.
    pub mass: Vec<f64>,
    /// Contribution of outer-boundary values to the interior rows
    /// (columns follow `domain.outer_boundary`).
    pub boundary_coupling: Csr,
}

/// Linear map from (interior values, boundary values) to boundary fluxes `a∂_ν u`.
#[derive(Debug, Clone)]
pub struct FluxOperator {
    pub nodes: Vec<usize>,
    pub interior: Csr,
    pub boundary: Csr,
}

impl FluxOperator {
    pub fn apply(&self, interior: &[f64], boundary: &[f64]) -> Vec<f64> {
        let mut out = self.interior.matvec(interior);
        self.boundary.matvec_add(boundary, 1.0, &mut out);
        out
    }

    /// Flux of a field vanishing on the outer boundary.
    pub fn apply_interior(&self, interior: &[f64]) -> Vec<f64> {
        self.interior.matvec(interior)
    }
}

/// Assembles the discrete operator after validating the coefficients.
pub fn assemble(domain: &GridDomain, coeff: &CoefficientField) -> Result<DiscreteOperator> {
    coeff.validate()?;
    if coeff.a.len() != domain.n_nodes() {
        return Err(Error::Parameter("coefficient field does not match the grid".into()));
    }
    let n = domain.n_unknowns();
    let nb = domain.outer_boundary.len();
    let mut stiff = Vec::with_capacity(5 * n);
    let mut drift = Vec::new();
    let mut coupling = Vec::new();
    for (row, &node) in domain.unknowns.iter().enumerate() {
        let mut diag = coeff.q[node];
        for axis in 0..domain.dim {
            let h = domain.spacing[axis];
            for step in [-1isize, 1] {
                let nb_node = domain.offset(node, axis, step).expect("interior node has neighbours");
                let (ap, an) = (coeff.a[node], coeff.a[nb_node]);
                let face = 2.0 * ap * an / (ap + an);
                let c = face / (h * h);
                diag += c;
                route(domain, row, nb_node, -c, &mut stiff, &mut coupling);
                if let Some(b) = &coeff.drift {
                    let v = step as f64 * b[axis][node] / (2.0 * h);
                    route(domain, row, nb_node, v, &mut drift, &mut coupling);
                }
            }
        }
        stiff.push((row, row, diag));
    }
    Ok(DiscreteOperator {
        domain: domain.clone(),
        coeff: coeff.clone(),
        stiffness: Csr::from_triplets(n, n, stiff),
        drift: Csr::from_triplets(n, n, drift),
        mass: domain.unknowns.iter().map(|&k| coeff.rho[k]).collect(),
        boundary_coupling: Csr::from_triplets(n, nb, coupling),
    })
}

fn route(
    domain: &GridDomain,
    row: usize,
    node: usize,
    v: f64,
    interior: &mut Vec<(usize, usize, f64)>,
    boundary: &mut Vec<(usize, usize, f64)>,
) {
    if let Some(col) = domain.unknown_index(node) {
        interior.push((row, col, v));
    } else if let Some(col) = domain.boundary_index(node) {
        boundary.push((row, col, v));
    }
    // obstacle nodes carry the value zero
}

/// `a∂_ν u` at outer boundary nodes from a full nodal field, using the
/// three-point one-sided difference along each outward normal (averaged at corners).
pub fn boundary_flux(domain: &GridDomain, coeff: &CoefficientField, field: &[f64], nodes: &[usize]) -> Result<Vec<f64>> {
    if field.len() != domain.n_nodes() {
        return Err(Error::Parameter(format!("field has {} values, grid has {} nodes", field.len(), domain.n_nodes())));
    }
    nodes
        .iter()
        .map(|&b| {
            let taps = flux_taps(domain, coeff, b)?;
            Ok(taps.iter().map(|&(k, w)| w * field[k]).sum())
        })
        .collect()
}

/// Weights `(node, w)` with `a∂_ν u(b) ≈ Σ w u(node)`.
fn flux_taps(domain: &GridDomain, coeff: &CoefficientField, b: usize) -> Result<Vec<(usize, f64)>> {
    if b >= domain.n_nodes() || !domain.is_outer_boundary(b) {
        return Err(Error::Index(format!("node {b} is not on the outer boundary")));
    }
    let dirs = domain.inward_directions(b);
    let share = 1.0 / dirs.len() as f64;
    let mut taps = Vec::with_capacity(3 * dirs.len());
    for (axis, step) in dirs {
        let h = domain.spacing[axis];
        let n1 = domain.offset(b, axis, step).expect("grid has at least 8 cells");
        let n2 = domain.offset(b, axis, 2 * step).expect("grid has at least 8 cells");
        let s = share * coeff.a[b] / (2.0 * h);
        taps.push((b, 3.0 * s));
        taps.push((n1, -4.0 * s));
        taps.push((n2, s));
    }
    Ok(taps)
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.domain.outer_boundary.len()
    }

    pub fn has_drift(&self) -> bool {
        self.coeff.has_drift()
    }

    pub fn cell_volume(&self) -> f64 {
        self.domain.cell_volume()
    }

    /// `stiffness + drift + shift·mass`
    pub fn shifted(&self, shift: f64) -> Csr {
        let shifted = self.stiffness.add_diagonal(&self.mass.iter().map(|r| shift * r).collect::<Vec<_>>());
        if self.has_drift() {
            shifted.add_scaled(&self.drift, 1.0)
        } else {
            shifted
        }
    }

    /// Applies the full interior operator to (interior, boundary) values.
    pub fn apply(&self, interior: &[f64], boundary: &[f64]) -> Vec<f64> {
        let mut out = self.stiffness.matvec(interior);
        if self.has_drift() {
            self.drift.matvec_add(interior, 1.0, &mut out);
        }
        self.boundary_coupling.matvec_add(boundary, 1.0, &mut out);
        out
    }

    /// `⟨u, v⟩_ρ = h^d Σ ρ u v` over the unknowns.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.cell_volume() * self.mass.iter().zip(u).zip(v).map(|((r, a), b)| r * a * b).sum::<f64>()
    }

    /// Boundary inner product with nodal weights `h^(d-1)`.
    pub fn boundary_inner(&self, g: &[f64], h: &[f64]) -> f64 {
        self.domain.boundary_weight() * g.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Full nodal field from interior and outer-boundary values (obstacle nodes zero).
    pub fn scatter(&self, interior: &[f64], boundary: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.domain.n_nodes()];
        for (k, &node) in self.domain.unknowns.iter().enumerate() {
            full[node] = interior[k];
        }
        for (k, &node) in self.domain.outer_boundary.iter().enumerate() {
            full[node] = boundary[k];
        }
        full
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.domain.unknowns.iter().map(|&k| full[k]).collect()
    }

    /// Outer-boundary vector that equals `values` on `nodes` and zero elsewhere.
    pub fn boundary_vector(&self, nodes: &[usize], values: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n_boundary()];
        for (&node, &v) in nodes.iter().zip(values) {
            let k = self
                .domain
                .boundary_index(node)
                .ok_or_else(|| Error::Index(format!("node {node} is not on the outer boundary")))?;
            g[k] = v;
        }
        Ok(g)
    }

    pub fn flux_operator(&self, nodes: &[usize]) -> Result<FluxOperator> {
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        for (row, &b) in nodes.iter().enumerate() {
            for (node, w) in flux_taps(&self.domain, &self.coeff, b)? {
                route(&self.domain, row, node, w, &mut interior, &mut boundary);
            }
        }
        Ok(FluxOperator {
            nodes: nodes.to_vec(),
            interior: Csr::from_triplets(nodes.len(), self.n(), interior),
            boundary: Csr::from_triplets(nodes.len(), self.n_boundary(), boundary),
        })
    }

    pub fn boundary_flux(&self, interior: &[f64], boundary: &[f64], nodes: &[usize]) -> Result<Vec<f64>> {
        Ok(self.flux_operator(nodes)?.apply(interior, boundary))
    }

    /// Interior values of the solution of `(𝒜 + shift·ρ)V = source` with boundary data `g`.
    pub fn solve_dirichlet(&self, shift: f64, g: &[f64], source: Option<&[f64]>) -> Result<Vec<f64>> {
        let lu = BandedLu::factor(&self.shifted(shift))?;
        Ok(self.solve_with(&lu, g, source))
    }

    pub fn solve_with(&self, lu: &BandedLu, g: &[f64], source: Option<&[f64]>) -> Vec<f64> {
        let mut rhs = match source {
            Some(f) => f.to_vec(),
            None => vec![0.0; self.n()],
        };
        self.boundary_coupling.matvec_add(g, -1.0, &mut rhs);
        lu.solve_in_place(&mut rhs);
        rhs
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_domain, CoefficientSpec, DomainSpec, FieldSpec, ObstacleSpec};
    use super::*;

    fn unit_1d(cells: usize, spec: &CoefficientSpec) -> DiscreteOperator {
        let d = build_domain(&DomainSpec::interval(cells)).unwrap();
        let c = CoefficientField::sample(&d, spec).unwrap();
        assemble(&d, &c).unwrap()
    }

    #[test]
    fn three_point_laplacian() {
        let op = unit_1d(16, &CoefficientSpec::default());
        let h2 = (1.0f64 / 16.0).powi(2);
        assert!((op.stiffness.get(5, 5) - 2.0 / h2).abs() < 1e-9);
        assert!((op.stiffness.get(5, 4) + 1.0 / h2).abs() < 1e-9);
        assert!((op.stiffness.get(5, 6) + 1.0 / h2).abs() < 1e-9);
    }

    #[test]
    fn potential_shifts_diagonal() {
        let base = unit_1d(16, &CoefficientSpec::default());
        let shifted = unit_1d(16, &CoefficientSpec { q: FieldSpec::constant(5.0), ..CoefficientSpec::default() });
        for i in 0..base.n() {
            assert!((shifted.stiffness.get(i, i) - base.stiffness.get(i, i) - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_field_residual_only_next_to_walls() {
        let spec = DomainSpec::square(32, Some(ObstacleSpec::square([0.5, 0.5], 0.25)));
        let d = build_domain(&spec).unwrap();
        let c = CoefficientField::sample(&d, &CoefficientSpec::default()).unwrap();
        let op = assemble(&d, &c).unwrap();
        let r = op.stiffness.matvec(&vec![1.0; op.n()]);
        for (k, &node) in d.unknowns.iter().enumerate() {
            let near_wall = (0..2).any(|axis| {
                [-1, 1].iter().any(|&s| {
                    let nb = d.offset(node, axis, s).unwrap();
                    d.unknown_index(nb).is_none()
                })
            });
            if near_wall {
                assert!(r[k] > 1.0, "node {node}");
            } else {
                assert!(r[k].abs() < 1e-8, "node {node}: {}", r[k]);
            }
        }
    }

    #[test]
    fn linear_field_flux() {
        let d = build_domain(&DomainSpec::interval(16)).unwrap();
        let c = CoefficientField::sample(&d, &CoefficientSpec::default()).unwrap();
        let u: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let f = boundary_flux(&d, &c, &u, &[0, 16]).unwrap();
        assert!((f[0] + 1.0).abs() < 1e-12);
        assert!((f[1] - 1.0).abs() < 1e-12);
        assert!(matches!(boundary_flux(&d, &c, &u, &[3]), Err(Error::Index(_))));
    }

    #[test]
    fn symmetric_without_drift() {
        let spec = CoefficientSpec {
            a: FieldSpec::Bump { base: 1.0, amplitude: 2.0, center: vec![0.3, 0.6], radius: 0.3 },
            rho: FieldSpec::Affine { base: 1.0, gradient: vec![0.5, 0.2] },
            ..CoefficientSpec::default()
        };
        let d = build_domain(&DomainSpec::square(16, None)).unwrap();
        let op = assemble(&d, &CoefficientField::sample(&d, &spec).unwrap()).unwrap();
        assert!(op.stiffness.asymmetry() < 1e-14);
    }

    #[test]
    fn dirichlet_solve_reproduces_linear() {
        let op = unit_1d(32, &CoefficientSpec::default());
        let g = op.boundary_vector(&[0, 32], &[1.0, 3.0]).unwrap();
        let v = op.solve_dirichlet(0.0, &g, None).unwrap();
        for (k, &node) in op.domain.unknowns.iter().enumerate() {
            let x = op.domain.coords(node)[0];
            assert!((v[k] - (1.0 + 2.0 * x)).abs() < 1e-11);
        }
    }
}
