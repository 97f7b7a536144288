//! Uniform spacetime lattices over box domains.

use crate::error::{Error, Result};
use crate::geometry::{Domain, Face};
use crate::metric::MetricField;

/// Uniform lattice on `[0,T] x Omega` with `nt` time intervals and `nx[k]`
/// intervals per spatial axis (node counts are one higher).
#[derive(Debug, Clone)]
pub struct SpacetimeGrid {
    pub domain: Domain,
    pub nt: usize,
    pub nx: Vec<usize>,
    pub dt: f64,
    pub dx: Vec<f64>,
    /// Courant ratio `dt * speed_max / min dx` actually realized.
    pub cfl: f64,
}

/// Upper bound for the admissible Courant factor.
pub const CFL_MAX: f64 = 0.9;

/// Largest characteristic speed over a coarse sample of the grid. Bounds
/// both `sqrt(beta * lambda_max(h^{-1}))` (the propagation speed of the
/// operator) and `sqrt(beta * lambda_max(h))`, so the step restriction is
/// conservative for either convention.
pub fn max_speed(metric: &MetricField, domain: &Domain) -> f64 {
    let n = domain.spatial_dim();
    let samples = 17;
    let mut speed: f64 = 0.0;
    let mut eval = |t: f64, x: &[f64]| {
        let beta = metric.beta(t, x);
        let h = metric.h(t, x);
        let eig = h.clone().symmetric_eigenvalues();
        let lam_max = eig.max();
        let lam_min = eig.min();
        let cand = (beta * lam_max.max(1.0 / lam_min)).sqrt();
        if cand > speed {
            speed = cand;
        }
    };
    let mut x = vec![0.0; n];
    for i in 0..=samples {
        let t = domain.t_max * i as f64 / samples as f64;
        match n {
            1 => {
                for j in 0..=samples {
                    x[0] = domain.x_min[0]
                        + (domain.x_max[0] - domain.x_min[0]) * j as f64 / samples as f64;
                    eval(t, &x);
                }
            }
            _ => {
                for j in 0..=samples {
                    for k in 0..=samples {
                        x[0] = domain.x_min[0]
                            + (domain.x_max[0] - domain.x_min[0]) * j as f64 / samples as f64;
                        x[1] = domain.x_min[1]
                            + (domain.x_max[1] - domain.x_min[1]) * k as f64 / samples as f64;
                        eval(t, &x);
                    }
                }
            }
        }
    }
    speed
}

impl SpacetimeGrid {
    /// Validate sizes and the Courant condition for a caller-chosen `nt`.
    pub fn new(
        metric: &MetricField,
        domain: Domain,
        nt: usize,
        nx: Vec<usize>,
        c_cfl: f64,
    ) -> Result<Self> {
        if nt < 8 || nx.iter().any(|&n| n < 8) {
            return Err(Error::Config(format!(
                "grid too small: nt={nt}, nx={nx:?} (need >= 8 intervals per axis)"
            )));
        }
        if !(0.0..=CFL_MAX).contains(&c_cfl) {
            return Err(Error::Config(format!(
                "cfl factor {c_cfl} outside (0, {CFL_MAX}]"
            )));
        }
        if nx.len() != domain.spatial_dim() {
            return Err(Error::Config("nx length != spatial dimension".into()));
        }
        let dt = domain.t_max / nt as f64;
        let dx: Vec<f64> = nx
            .iter()
            .enumerate()
            .map(|(k, &n)| (domain.x_max[k] - domain.x_min[k]) / n as f64)
            .collect();
        let speed = max_speed(metric, &domain);
        let min_dx = dx.iter().cloned().fold(f64::INFINITY, f64::min);
        let limit = c_cfl * min_dx / speed;
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation {
                dt,
                limit,
                cfl: c_cfl,
            });
        }
        let cfl = dt * speed / min_dx;
        Ok(Self {
            domain,
            nt,
            nx,
            dt,
            dx,
            cfl,
        })
    }

    /// Choose the smallest admissible `nt` for the requested Courant factor.
    pub fn with_auto_nt(
        metric: &MetricField,
        domain: Domain,
        nx: Vec<usize>,
        c_cfl: f64,
    ) -> Result<Self> {
        let speed = max_speed(metric, &domain);
        let dx: Vec<f64> = nx
            .iter()
            .enumerate()
            .map(|(k, &n)| (domain.x_max[k] - domain.x_min[k]) / n as f64)
            .collect();
        let min_dx = dx.iter().cloned().fold(f64::INFINITY, f64::min);
        let nt = ((domain.t_max * speed / (c_cfl * min_dx)).ceil() as usize).max(8);
        Self::new(metric, domain, nt, nx, c_cfl)
    }

    pub fn spatial_dim(&self) -> usize {
        self.nx.len()
    }

    /// Number of spatial nodes per time slice.
    pub fn nsp(&self) -> usize {
        self.nx.iter().map(|&n| n + 1).product()
    }

    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    pub fn x1(&self, j: usize) -> f64 {
        self.domain.x_min[0] + j as f64 * self.dx[0]
    }

    pub fn x_of(&self, axis: usize, j: usize) -> f64 {
        self.domain.x_min[axis] + j as f64 * self.dx[axis]
    }

    /// Spatial coordinates of a flattened spatial index.
    pub fn coords(&self, sp: usize) -> Vec<f64> {
        match self.spatial_dim() {
            1 => vec![self.x1(sp)],
            _ => {
                let ny = self.nx[1] + 1;
                let ix = sp / ny;
                let iy = sp % ny;
                vec![self.x_of(0, ix), self.x_of(1, iy)]
            }
        }
    }

    pub fn sp_index(&self, idx: &[usize]) -> usize {
        match self.spatial_dim() {
            1 => idx[0],
            _ => idx[0] * (self.nx[1] + 1) + idx[1],
        }
    }

    pub fn is_lateral_boundary(&self, sp: usize) -> bool {
        match self.spatial_dim() {
            1 => sp == 0 || sp == self.nx[0],
            _ => {
                let ny = self.nx[1] + 1;
                let ix = sp / ny;
                let iy = sp % ny;
                ix == 0 || ix == self.nx[0] || iy == 0 || iy == self.nx[1]
            }
        }
    }

    /// Trapezoid quadrature weight of a spatial node (coordinate measure).
    pub fn quad_weight_spatial(&self, sp: usize) -> f64 {
        let cell: f64 = self.dx.iter().product();
        let mut w = cell;
        match self.spatial_dim() {
            1 => {
                if sp == 0 || sp == self.nx[0] {
                    w *= 0.5;
                }
            }
            _ => {
                let ny = self.nx[1] + 1;
                let ix = sp / ny;
                let iy = sp % ny;
                if ix == 0 || ix == self.nx[0] {
                    w *= 0.5;
                }
                if iy == 0 || iy == self.nx[1] {
                    w *= 0.5;
                }
            }
        }
        w
    }

    pub fn quad_weight_time(&self, it: usize) -> f64 {
        if it == 0 || it == self.nt {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// Lateral faces in fixed order.
    pub fn lateral_faces(&self) -> Vec<Face> {
        let mut faces = vec![Face::XMin(0), Face::XMax(0)];
        if self.spatial_dim() == 2 {
            faces.push(Face::XMin(1));
            faces.push(Face::XMax(1));
        }
        faces
    }

    /// Number of nodes along a lateral face in one time slice.
    pub fn face_len(&self, face: Face) -> usize {
        match (self.spatial_dim(), face) {
            (1, _) => 1,
            (_, Face::XMin(0)) | (_, Face::XMax(0)) => self.nx[1] + 1,
            (_, Face::XMin(1)) | (_, Face::XMax(1)) => self.nx[0] + 1,
            _ => unreachable!(),
        }
    }

    /// Spatial node index of the `j`-th node on a lateral face.
    pub fn face_node_sp(&self, face: Face, j: usize) -> usize {
        match (self.spatial_dim(), face) {
            (1, Face::XMin(0)) => 0,
            (1, Face::XMax(0)) => self.nx[0],
            (_, Face::XMin(0)) => self.sp_index(&[0, j]),
            (_, Face::XMax(0)) => self.sp_index(&[self.nx[0], j]),
            (_, Face::XMin(1)) => self.sp_index(&[j, 0]),
            (_, Face::XMax(1)) => self.sp_index(&[j, self.nx[1]]),
            _ => unreachable!(),
        }
    }

    /// Spatial coordinates of a face node.
    pub fn face_node_coords(&self, face: Face, j: usize) -> Vec<f64> {
        self.coords(self.face_node_sp(face, j))
    }
}
