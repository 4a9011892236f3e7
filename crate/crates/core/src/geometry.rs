//! Points, rotations, the von Mises–Fisher kernel and quadrature grids on
//! the unit sphere.

use std::f64::consts::PI;
use std::ops::Neg;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const FOUR_PI: f64 = 4.0 * PI;

/// Default upper limit on the concentration parameter.
pub const DEFAULT_KAPPA_MAX: f64 = 10.0;

/// Below this concentration the kernel is the uniform density.
const KAPPA_UNIFORM: f64 = 1e-8;

pub type Matrix3 = [[f64; 3]; 3];

/// A point of S², normalized at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVec3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVec3 {
    pub const E_X: UnitVec3 = UnitVec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const E_Y: UnitVec3 = UnitVec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const E_Z: UnitVec3 = UnitVec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(invalid(format!("cannot normalize ({x}, {y}, {z})")));
        }
        Ok(UnitVec3 {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    /// Skips normalization; callers guarantee unit length up to rounding.
    pub(crate) fn from_raw(x: f64, y: f64, z: f64) -> Self {
        UnitVec3 { x, y, z }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Re-projects onto the sphere, removing accumulated rounding drift.
    pub fn renormalized(&self) -> UnitVec3 {
        let n = self.norm();
        UnitVec3 {
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;

    fn neg(self) -> UnitVec3 {
        UnitVec3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Rotation by `theta` radians about `axis`, with its Rodrigues matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    theta: f64,
    axis: UnitVec3,
    matrix: Matrix3,
}

/// `cos θ I + sin θ [u]× + (1 − cos θ) u uᵀ`.
pub fn rodrigues_matrix(theta: f64, axis: UnitVec3) -> Result<Rotation> {
    if !theta.is_finite() {
        return Err(invalid(format!("rotation angle must be finite, got {theta}")));
    }
    let (s, c) = theta.sin_cos();
    let k = 1.0 - c;
    let [ux, uy, uz] = axis.to_array();
    let matrix = [
        [c + k * ux * ux, -s * uz + k * ux * uy, s * uy + k * ux * uz],
        [s * uz + k * uy * ux, c + k * uy * uy, -s * ux + k * uy * uz],
        [-s * uy + k * uz * ux, s * ux + k * uz * uy, c + k * uz * uz],
    ];
    Ok(Rotation { theta, axis, matrix })
}

impl Rotation {
    pub fn new(theta: f64, axis: UnitVec3) -> Result<Self> {
        rodrigues_matrix(theta, axis)
    }

    pub fn identity() -> Self {
        Rotation {
            theta: 0.0,
            axis: UnitVec3::E_Z,
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn axis(&self) -> UnitVec3 {
        self.axis
    }

    pub fn matrix(&self) -> &Matrix3 {
        &self.matrix
    }

    /// `R x`.
    pub fn apply(&self, v: &UnitVec3) -> UnitVec3 {
        let m = &self.matrix;
        let [x, y, z] = v.to_array();
        UnitVec3::from_raw(
            m[0][0] * x + m[0][1] * y + m[0][2] * z,
            m[1][0] * x + m[1][1] * y + m[1][2] * z,
            m[2][0] * x + m[2][1] * y + m[2][2] * z,
        )
    }

    /// `Rᵀ x`, the inverse rotation.
    pub fn apply_transpose(&self, v: &UnitVec3) -> UnitVec3 {
        let m = &self.matrix;
        let [x, y, z] = v.to_array();
        UnitVec3::from_raw(
            m[0][0] * x + m[1][0] * y + m[2][0] * z,
            m[0][1] * x + m[1][1] * y + m[2][1] * z,
            m[0][2] * x + m[1][2] * y + m[2][2] * z,
        )
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Rotation) -> Matrix3 {
        mat_mul(&self.matrix, &other.matrix)
    }
}

pub fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn determinant(a: &Matrix3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn check_kappa(kappa: f64, kappa_max: f64) -> Result<()> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(invalid(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if kappa > kappa_max {
        return Err(invalid(format!("kappa = {kappa} exceeds the cap {kappa_max}")));
    }
    Ok(())
}

/// The vMF normalizing factor written as `κ / (2π (1 − e^{−2κ}))`, which
/// equals the density at the mean direction.
fn vmf_peak(kappa: f64) -> f64 {
    if kappa < KAPPA_UNIFORM {
        1.0 / FOUR_PI
    } else {
        kappa / (2.0 * PI * -(-2.0 * kappa).exp_m1())
    }
}

/// Parameters of a von Mises–Fisher density on S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfParams {
    pub mu: UnitVec3,
    pub kappa: f64,
}

impl VmfParams {
    pub fn new(mu: UnitVec3, kappa: f64) -> Result<Self> {
        Self::with_cap(mu, kappa, DEFAULT_KAPPA_MAX)
    }

    pub fn with_cap(mu: UnitVec3, kappa: f64, kappa_max: f64) -> Result<Self> {
        check_kappa(kappa, kappa_max)?;
        Ok(VmfParams { mu, kappa })
    }
}

/// `κ e^{κ μᵀx} / (4π sinh κ)`, evaluated as `peak · e^{κ(μᵀx − 1)}` so it
/// never overflows.
pub fn vmf_density(x: &UnitVec3, p: &VmfParams) -> f64 {
    VmfKernel::unchecked(p.kappa).density(x, &p.mu)
}

/// Maximum of the density, attained at `x = μ`.
pub fn vmf_sup(p: &VmfParams) -> f64 {
    vmf_peak(p.kappa)
}

/// Minimum of the density, attained at `x = −μ`.
pub fn vmf_inf(p: &VmfParams) -> f64 {
    VmfKernel::unchecked(p.kappa).inf()
}

/// The vMF density for a fixed concentration with its constants cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfKernel {
    kappa: f64,
    peak: f64,
    trough: f64,
}

impl VmfKernel {
    pub fn new(kappa: f64, kappa_max: f64) -> Result<Self> {
        check_kappa(kappa, kappa_max)?;
        Ok(Self::unchecked(kappa))
    }

    fn unchecked(kappa: f64) -> Self {
        let peak = vmf_peak(kappa);
        let trough = if kappa < KAPPA_UNIFORM {
            peak
        } else {
            peak * (-2.0 * kappa).exp()
        };
        VmfKernel { kappa, peak, trough }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn density(&self, x: &UnitVec3, mu: &UnitVec3) -> f64 {
        if self.kappa < KAPPA_UNIFORM {
            return self.peak;
        }
        self.peak * (self.kappa * (x.dot(mu) - 1.0)).exp()
    }

    pub fn sup(&self) -> f64 {
        self.peak
    }

    pub fn inf(&self) -> f64 {
        self.trough
    }
}

/// Quadrature nodes and weights (steradians) on S².
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGrid {
    nodes: Vec<UnitVec3>,
    weights: Vec<f64>,
}

impl SphericalGrid {
    pub fn new(nodes: Vec<UnitVec3>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("a grid needs at least one node"));
        }
        if nodes.len() != weights.len() {
            return Err(invalid("node and weight counts differ"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("grid weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        if ((total - FOUR_PI) / FOUR_PI).abs() > 1e-9 {
            return Err(invalid(format!("grid weights sum to {total}, expected 4π")));
        }
        Ok(SphericalGrid { nodes, weights })
    }

    /// A grid made of arbitrary points with equal weights, used as an
    /// evaluation set rather than for integration.
    pub fn from_points(nodes: Vec<UnitVec3>) -> Result<Self> {
        let n = nodes.len().max(1) as f64;
        let weights = vec![FOUR_PI / n; nodes.len()];
        Self::new(nodes, weights)
    }

    pub fn nodes(&self) -> &[UnitVec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&UnitVec3) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Fibonacci lattice with `n` nodes and equal weights `4π / n`.
pub fn fibonacci_grid(n: usize) -> Result<SphericalGrid> {
    if n == 0 {
        return Err(invalid("fibonacci_grid needs n >= 1"));
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let nf = n as f64;
    let nodes = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / nf;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden_angle * i as f64).sin_cos();
            UnitVec3::new(r * c, r * s, z).expect("lattice point is nonzero")
        })
        .collect();
    Ok(SphericalGrid {
        nodes,
        weights: vec![FOUR_PI / nf; n],
    })
}

/// Uniform point on S² from a normalized triple of standard normals.
pub fn uniform_sphere_sample<R: Rng + ?Sized>(rng: &mut R) -> UnitVec3 {
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        if let Ok(v) = UnitVec3::new(x, y, z) {
            return v;
        }
    }
}
