//! Lorentzian geometry on box domains: geodesics, pseudo-orthonormal frames,
//! tube (Fermi) charts, boundary optimal geodesics and path intersections.

mod boundary;
pub mod fermi;
mod frame;
mod geodesic;
mod intersect;
pub(crate) mod ode;

pub use boundary::{boundary_optimal_geodesic, BoundaryHit, TraceDirection, TRANSVERSALITY_MIN};
pub use fermi::FermiChart;
pub use frame::{build_frame, frame_max_defect, parallel_transport, Frame, FrameField};
pub use geodesic::{integrate_geodesic, trace_through, CausalType, GeodesicPath, PathSample};
pub use intersect::intersections;

use crate::metric::Event;

/// The time cylinder `[0, t_max] x Omega` with `Omega` a coordinate box.
#[derive(Debug, Clone)]
pub struct Domain {
    pub t_max: f64,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

/// A face of the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    TMin,
    TMax,
    XMin(usize),
    XMax(usize),
}

impl Face {
    pub fn is_lateral(&self) -> bool {
        matches!(self, Face::XMin(_) | Face::XMax(_))
    }
}

impl Domain {
    pub fn new(t_max: f64, x_min: Vec<f64>, x_max: Vec<f64>) -> Self {
        assert_eq!(x_min.len(), x_max.len());
        assert!(t_max > 0.0);
        assert!(x_min.iter().zip(&x_max).all(|(a, b)| a < b));
        Self {
            t_max,
            x_min,
            x_max,
        }
    }

    pub fn unit(spatial_dim: usize, t_max: f64) -> Self {
        Self::new(t_max, vec![0.0; spatial_dim], vec![1.0; spatial_dim])
    }

    pub fn spatial_dim(&self) -> usize {
        self.x_min.len()
    }

    pub fn contains(&self, e: &Event, slack: f64) -> bool {
        if e.t < -slack || e.t > self.t_max + slack {
            return false;
        }
        e.x
            .iter()
            .enumerate()
            .all(|(k, &xk)| xk >= self.x_min[k] - slack && xk <= self.x_max[k] + slack)
    }

    pub fn strictly_inside(&self, e: &Event, margin: f64) -> bool {
        if e.t < margin || e.t > self.t_max - margin {
            return false;
        }
        e.x
            .iter()
            .enumerate()
            .all(|(k, &xk)| xk > self.x_min[k] + margin && xk < self.x_max[k] - margin)
    }

    /// Signed excess of the coordinate beyond each face (positive = outside).
    pub fn face_excess(&self, e: &Event) -> Vec<(Face, f64)> {
        let mut out = vec![(Face::TMin, -e.t), (Face::TMax, e.t - self.t_max)];
        for k in 0..self.spatial_dim() {
            out.push((Face::XMin(k), self.x_min[k] - e.x[k]));
            out.push((Face::XMax(k), e.x[k] - self.x_max[k]));
        }
        out
    }

    /// Clamp an event exactly onto the given face.
    pub fn clamp_to_face(&self, e: &Event, face: Face) -> Event {
        let mut e = e.clone();
        match face {
            Face::TMin => e.t = 0.0,
            Face::TMax => e.t = self.t_max,
            Face::XMin(k) => e.x[k] = self.x_min[k],
            Face::XMax(k) => e.x[k] = self.x_max[k],
        }
        e
    }

    pub fn measure(&self) -> f64 {
        self.t_max
            * self
                .x_min
                .iter()
                .zip(&self.x_max)
                .map(|(a, b)| b - a)
                .product::<f64>()
    }
}
