//! Planar Cosserat rod: geometry, material law, strains and energies.
//!
//! The rod is split into `N` elements of rest length `ds = L0 / N`. Element
//! quantities (area, second moment, stretch-shear rigidity, angles, strains
//! and material-frame forces) are sampled at element midpoints; bending
//! rigidity, curvature and couples at the `N - 1` interior nodes.
//!
//! Momenta are lumped: a node carries the half masses of its neighbouring
//! elements, so the end nodes see only half an element. All quantities are
//! SI.

use nalgebra::Vector2;

use crate::error::{check_len, positive, Result, SolverError};

pub type Vec2 = Vector2<f64>;

/// How the base (node 0, element 0) is held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaseBoundary {
    /// Base node position and base element angle fixed, momenta pinned to zero.
    #[default]
    Clamped,
    /// No kinematic constraint; every node and element is free.
    Free,
}

/// Physical and discretisation parameters from which [`RodProperties`] is built.
#[derive(Debug, Clone, PartialEq)]
pub struct RodParameters {
    /// Rest length `L0` [m].
    pub length: f64,
    /// Number of elements `N`.
    pub segments: usize,
    /// Diameter at `s = 0` [m].
    pub base_diameter: f64,
    /// Diameter at `s = L0` [m].
    pub tip_diameter: f64,
    /// Density [kg/m^3].
    pub density: f64,
    /// Young's modulus [Pa].
    pub youngs_modulus: f64,
    /// Damping coefficient [kg/s].
    pub damping: f64,
    pub boundary: BaseBoundary,
}

impl Default for RodParameters {
    fn default() -> Self {
        Self {
            length: 0.20,
            segments: 100,
            base_diameter: 0.02,
            tip_diameter: 0.008,
            density: 1042.0,
            youngs_modulus: 10.0e3,
            damping: 0.01,
            boundary: BaseBoundary::Clamped,
        }
    }
}

impl RodParameters {
    pub fn validate(&self) -> Result<()> {
        positive("length", self.length)?;
        positive("base_diameter", self.base_diameter)?;
        positive("tip_diameter", self.tip_diameter)?;
        positive("density", self.density)?;
        positive("youngs_modulus", self.youngs_modulus)?;
        if self.segments < 2 {
            return Err(SolverError::InvalidParameter {
                name: "segments",
                reason: format!("need at least 2 elements, got {}", self.segments),
            });
        }
        if self.tip_diameter > self.base_diameter {
            return Err(SolverError::InvalidParameter {
                name: "tip_diameter",
                reason: "tip diameter exceeds base diameter".into(),
            });
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(SolverError::InvalidParameter {
                name: "damping",
                reason: format!("must be non-negative, got {}", self.damping),
            });
        }
        Ok(())
    }

    /// Effective shear modulus for an incompressible material (Poisson 0.5).
    pub fn shear_modulus(&self) -> f64 {
        4.0 / 3.0 * self.youngs_modulus / (2.0 * (1.0 + 0.5))
    }
}

/// Discretised rod properties derived from [`RodParameters`].
#[derive(Debug, Clone)]
pub struct RodProperties {
    pub params: RodParameters,
    /// Element rest length [m].
    pub ds: f64,
    /// Per-element cross-sectional area [m^2].
    pub area: Vec<f64>,
    /// Per-element second moment of area [m^4].
    pub inertia: Vec<f64>,
    /// Per-element diagonal of the stretch-shear rigidity `diag(EA, GA)` [N].
    pub stiffness: Vec<Vec2>,
    /// Per-interior-node bending rigidity `EI` [N m^2].
    pub bend: Vec<f64>,
    /// Intrinsic stretch/shear per element.
    pub nu_intrinsic: Vec<Vec2>,
    /// Intrinsic curvature per interior node [1/m].
    pub kappa_intrinsic: Vec<f64>,
    /// Lumped node mass [kg].
    pub node_mass: Vec<f64>,
    /// Length of rod attributed to each node: `ds`, or `ds / 2` at the ends [m].
    pub node_weight: Vec<f64>,
    /// Lumped element rotary inertia `rho I ds` [kg m^2].
    pub element_inertia: Vec<f64>,
}

impl RodProperties {
    /// Intrinsically straight rod (`nu0 = (1, 0)`, `kappa0 = 0`).
    pub fn new(params: RodParameters) -> Result<Self> {
        params.validate()?;
        let n = params.segments;
        let ds = params.length / n as f64;
        let e = params.youngs_modulus;
        let g = params.shear_modulus();
        let rho = params.density;

        let diameter_at = |s: f64| {
            let l = params.length;
            params.base_diameter * (l - s) / l + params.tip_diameter * s / l
        };
        let area_of = |phi: f64| std::f64::consts::PI * phi * phi / 4.0;
        let second_moment = |a: f64| a * a / (4.0 * std::f64::consts::PI);

        let area: Vec<f64> = (0..n)
            .map(|j| area_of(diameter_at((j as f64 + 0.5) * ds)))
            .collect();
        let inertia: Vec<f64> = area.iter().map(|&a| second_moment(a)).collect();
        let stiffness = area.iter().map(|&a| Vec2::new(e * a, g * a)).collect();
        let bend = (1..n)
            .map(|l| e * second_moment(area_of(diameter_at(l as f64 * ds))))
            .collect();

        let mut node_mass = vec![0.0; n + 1];
        for (j, &a) in area.iter().enumerate() {
            let half = 0.5 * rho * a * ds;
            node_mass[j] += half;
            node_mass[j + 1] += half;
        }
        let mut node_weight = vec![ds; n + 1];
        node_weight[0] = 0.5 * ds;
        node_weight[n] = 0.5 * ds;
        let element_inertia = inertia.iter().map(|&i| rho * i * ds).collect();

        Ok(Self {
            params,
            ds,
            area,
            inertia,
            stiffness,
            bend,
            nu_intrinsic: vec![Vec2::new(1.0, 0.0); n],
            kappa_intrinsic: vec![0.0; n - 1],
            node_mass,
            node_weight,
            element_inertia,
        })
    }

    pub fn segments(&self) -> usize {
        self.params.segments
    }

    pub fn nodes(&self) -> usize {
        self.params.segments + 1
    }

    pub fn clamped(&self) -> bool {
        self.params.boundary == BaseBoundary::Clamped
    }

    /// Arc-length of node `i`.
    pub fn node_s(&self, i: usize) -> f64 {
        i as f64 * self.ds
    }

    /// Arc-length of the midpoint of element `j`.
    pub fn element_s(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.ds
    }

    /// Damping rate `zeta / (rho A)` seen by node `i` [1/s].
    pub(crate) fn node_damping_rate(&self, i: usize) -> f64 {
        self.params.damping * self.node_weight[i] / self.node_mass[i]
    }

    /// Damping rate `zeta / (rho I)` seen by element `j` [1/s].
    pub(crate) fn element_damping_rate(&self, j: usize) -> f64 {
        self.params.damping * self.ds / self.element_inertia[j]
    }
}

/// Linear taper `phi(s)` from base to tip diameter.
pub fn taper_profile(props: &RodProperties, s: f64) -> Result<f64> {
    let l = props.params.length;
    if !(0.0..=l).contains(&s) {
        return Err(SolverError::Domain { s, length: l });
    }
    Ok(props.params.base_diameter * (l - s) / l + props.params.tip_diameter * s / l)
}

/// Positions, angles and lumped momenta of the discretised rod.
#[derive(Debug, Clone, PartialEq)]
pub struct RodState {
    /// Node positions, `N + 1`.
    pub r: Vec<Vec2>,
    /// Element angles, `N`.
    pub theta: Vec<f64>,
    /// Node linear momenta, `N + 1`.
    pub p_r: Vec<Vec2>,
    /// Element angular momenta, `N`.
    pub p_theta: Vec<f64>,
}

impl RodState {
    /// Straight rod along `e1` starting at the origin, at rest.
    pub fn straight(props: &RodProperties) -> Self {
        let n = props.segments();
        Self {
            r: (0..=n).map(|i| Vec2::new(props.node_s(i), 0.0)).collect(),
            theta: vec![0.0; n],
            p_r: vec![Vec2::zeros(); n + 1],
            p_theta: vec![0.0; n],
        }
    }

    pub fn segments(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self, segments: usize) -> Result<()> {
        check_len("r", self.r.len(), segments + 1)?;
        check_len("theta", self.theta.len(), segments)?;
        check_len("p_r", self.p_r.len(), segments + 1)?;
        check_len("p_theta", self.p_theta.len(), segments)?;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().all(|v| v.x.is_finite() && v.y.is_finite())
            && self.p_r.iter().all(|v| v.x.is_finite() && v.y.is_finite())
            && self.theta.iter().all(|t| t.is_finite())
            && self.p_theta.iter().all(|t| t.is_finite())
    }

    /// Largest absolute entry, used for blowup detection.
    pub(crate) fn max_abs(&self) -> f64 {
        let v = self
            .r
            .iter()
            .chain(&self.p_r)
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(0.0, f64::max);
        self.theta
            .iter()
            .chain(&self.p_theta)
            .map(|t| t.abs())
            .fold(v, f64::max)
    }

    pub fn tip(&self) -> Vec2 {
        *self.r.last().expect("rod has nodes")
    }
}

/// Stretch/shear, curvature and strain deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    pub nu: Vec<Vec2>,
    pub kappa: Vec<f64>,
    pub sigma: Vec<Vec2>,
}

/// Material-frame forces per element and couples per interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalLoads {
    pub n: Vec<Vec2>,
    pub m: Vec<f64>,
}

/// Kinetic, potential and total mechanical energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// `Q(theta) v`.
#[inline]
pub(crate) fn rotate(c: f64, s: f64, v: Vec2) -> Vec2 {
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// `Q(theta)^T v`.
#[inline]
pub(crate) fn rotate_back(c: f64, s: f64, v: Vec2) -> Vec2 {
    Vec2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
}

/// Out-of-plane component of the cross product.
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Quarter turn `[[0, -1], [1, 0]] v`.
#[inline]
pub(crate) fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Strains, loads and frame rotations of one configuration: everything the
/// adjoint needs from the forward path at a given instant.
#[derive(Debug, Clone)]
pub struct ForwardSlice {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub nu: Vec<Vec2>,
    pub sigma: Vec<Vec2>,
    /// Material-frame force `S sigma`.
    pub n: Vec<Vec2>,
    /// Lab-frame force `Q n`.
    pub qn: Vec<Vec2>,
    pub kappa: Vec<f64>,
    pub m: Vec<f64>,
}

impl ForwardSlice {
    pub fn new(segments: usize) -> Self {
        Self {
            cos: vec![0.0; segments],
            sin: vec![0.0; segments],
            nu: vec![Vec2::zeros(); segments],
            sigma: vec![Vec2::zeros(); segments],
            n: vec![Vec2::zeros(); segments],
            qn: vec![Vec2::zeros(); segments],
            kappa: vec![0.0; segments - 1],
            m: vec![0.0; segments - 1],
        }
    }

    pub fn update(&mut self, r: &[Vec2], theta: &[f64], props: &RodProperties) {
        let inv_ds = 1.0 / props.ds;
        for j in 0..theta.len() {
            let (s, c) = theta[j].sin_cos();
            self.cos[j] = c;
            self.sin[j] = s;
            let nu = rotate_back(c, s, (r[j + 1] - r[j]) * inv_ds);
            let sigma = nu - props.nu_intrinsic[j];
            let n = props.stiffness[j].component_mul(&sigma);
            self.nu[j] = nu;
            self.sigma[j] = sigma;
            self.n[j] = n;
            self.qn[j] = rotate(c, s, n);
        }
        for l in 0..self.kappa.len() {
            let kappa = (theta[l + 1] - theta[l]) * inv_ds;
            self.kappa[l] = kappa;
            self.m[l] = props.bend[l] * (kappa - props.kappa_intrinsic[l]);
        }
    }

    /// Stored energy `sum W ds`.
    pub fn potential(&self, props: &RodProperties) -> f64 {
        let stretch: f64 = self
            .sigma
            .iter()
            .zip(&self.n)
            .map(|(sigma, n)| sigma.dot(n))
            .sum();
        let bend: f64 = self
            .kappa
            .iter()
            .zip(&self.m)
            .zip(&props.kappa_intrinsic)
            .map(|((k, m), k0)| (k - k0) * m)
            .sum();
        0.5 * (stretch + bend) * props.ds
    }
}

/// Material strains of a configuration.
pub fn compute_strains(state: &RodState, props: &RodProperties) -> Result<StrainField> {
    state.validate(props.segments())?;
    let mut k = ForwardSlice::new(props.segments());
    k.update(&state.r, &state.theta, props);
    Ok(StrainField {
        nu: k.nu,
        kappa: k.kappa,
        sigma: k.sigma,
    })
}

/// Linear constitutive law `n = S sigma`, `m = B (kappa - kappa0)`.
pub fn internal_loads(strains: &StrainField, props: &RodProperties) -> Result<InternalLoads> {
    let n = props.segments();
    check_len("sigma", strains.sigma.len(), n)?;
    check_len("kappa", strains.kappa.len(), n - 1)?;
    Ok(InternalLoads {
        n: strains
            .sigma
            .iter()
            .zip(&props.stiffness)
            .map(|(sigma, stiff)| stiff.component_mul(sigma))
            .collect(),
        m: strains
            .kappa
            .iter()
            .zip(&props.bend)
            .zip(&props.kappa_intrinsic)
            .map(|((k, b), k0)| b * (k - k0))
            .collect(),
    })
}

/// Kinetic energy of the lumped momenta.
pub(crate) fn kinetic_energy(state: &RodState, props: &RodProperties) -> f64 {
    let linear: f64 = state
        .p_r
        .iter()
        .zip(&props.node_mass)
        .map(|(p, m)| p.norm_squared() / m)
        .sum();
    let angular: f64 = state
        .p_theta
        .iter()
        .zip(&props.element_inertia)
        .map(|(p, j)| p * p / j)
        .sum();
    0.5 * (linear + angular)
}

/// Mechanical energies by midpoint quadrature over the grid.
pub fn energies(state: &RodState, props: &RodProperties) -> Result<Energies> {
    state.validate(props.segments())?;
    let mut k = ForwardSlice::new(props.segments());
    k.update(&state.r, &state.theta, props);
    let kinetic = kinetic_energy(state, props);
    let potential = k.potential(props);
    Ok(Energies {
        kinetic,
        potential,
        total: kinetic + potential,
    })
}
