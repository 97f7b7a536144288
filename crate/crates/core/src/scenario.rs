//! Scenario assembly: a metric, domain, grid, operators, potential and
//! probe settings bundled from a configuration file.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::metric::MetricField;
use crate::solver::{PicardOptions, RealField, SpacetimeGrid, WaveOperator};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct ProbeSettings {
    /// Probe beam frequency.
    pub tau: f64,
    /// Auxiliary (backward) beam frequency.
    pub tau_aux: f64,
    /// Common probe weight.
    pub eps: f64,
    /// Tube / cutoff radius.
    pub delta_prime: f64,
    /// Tube / cutoff radius of the auxiliary beam (wider is smoother).
    pub delta_prime_aux: f64,
    /// Imaginary seed scale of the probe phase Hessians.
    pub h0_im: f64,
    /// Imaginary seed scale of the auxiliary beam (wider is smoother).
    pub h0_aux_im: f64,
    pub angular_resolution: f64,
    /// Rotation applied to the first carrier to produce the second one in
    /// two spatial dimensions.
    pub gamma2_angle: f64,
    pub nodes_per_wavelength: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            tau: 160.0,
            tau_aux: 40.0,
            eps: 1e-3,
            delta_prime: 0.15,
            delta_prime_aux: 0.3,
            h0_im: 1.0,
            h0_aux_im: 0.35,
            angular_resolution: 0.05,
            gamma2_angle: 0.2,
            nodes_per_wavelength: 10.0,
        }
    }
}

/// The potential to recover.
#[derive(Debug, Clone)]
pub enum PotentialSpec {
    Zero,
    /// `amplitude * (1 - r^2)^3` inside the ellipsoid with the given
    /// spacetime center `(t, x...)` and per-axis widths.
    Bump {
        amplitude: f64,
        center: Vec<f64>,
        width: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Bump {
                amplitude,
                center,
                width,
            } => {
                let mut r2 = ((t - center[0]) / width[0]).powi(2);
                for (k, &xk) in x.iter().enumerate() {
                    r2 += ((xk - center[1 + k]) / width[1 + k]).powi(2);
                }
                if r2 < 1.0 {
                    amplitude * (1.0 - r2).powi(3)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Bump { amplitude, .. } => amplitude.abs(),
        }
    }
}

#[derive(Debug)]
pub struct Scenario {
    pub metric: MetricField,
    pub domain: Domain,
    pub grid: Arc<SpacetimeGrid>,
    pub op_fwd: Arc<WaveOperator>,
    pub op_bwd: Arc<WaveOperator>,
    pub q_spec: PotentialSpec,
    pub q_true: RealField,
    pub m_power: usize,
    pub s_order: usize,
    pub picard: PicardOptions,
    pub probe: ProbeSettings,
    pub seed: u64,
}

impl Scenario {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let spatial_dim = cfg.usize_or("domain.dim", 1)?;
        let metric = match cfg.str_or("metric.kind", "minkowski") {
            "csv" => {
                let path = cfg.str("metric.csv")?;
                let text = std::fs::read_to_string(path)?;
                MetricField::from_samples_csv(&text)?
            }
            name => MetricField::from_name(name, cfg.f64_or("metric.coeff", 0.0)?, spatial_dim)?,
        };
        if metric.spatial_dim() != spatial_dim {
            return Err(Error::Config(
                "metric dimension disagrees with domain.dim".into(),
            ));
        }
        let t_max = cfg.f64_or("domain.t_max", 2.0)?;
        let x_min = cfg.f64_list_or("domain.x_min", &vec![0.0; spatial_dim])?;
        let x_max = cfg.f64_list_or("domain.x_max", &vec![1.0; spatial_dim])?;
        if x_min.len() != spatial_dim || x_max.len() != spatial_dim {
            return Err(Error::Config("domain bounds dimension mismatch".into()));
        }
        let domain = Domain::new(t_max, x_min, x_max);

        let nx: Vec<usize> = cfg
            .f64_list_or("grid.nx", &vec![128.0; spatial_dim])?
            .into_iter()
            .map(|v| v as usize)
            .collect();
        let cfl = cfg.f64_or("grid.cfl", 0.45)?;
        let grid = Arc::new(if cfg.has("grid.nt") {
            SpacetimeGrid::new(&metric, domain.clone(), cfg.usize("grid.nt")?, nx, cfl)?
        } else {
            SpacetimeGrid::with_auto_nt(&metric, domain.clone(), nx, cfl)?
        });

        let op_fwd = Arc::new(WaveOperator::new(&metric, grid.clone())?);
        let op_bwd = Arc::new(WaveOperator::reflected(&metric, grid.clone())?);

        let q_spec = match cfg.str_or("q.kind", "zero") {
            "zero" => PotentialSpec::Zero,
            "bump" => {
                let center = cfg.f64_list("q.center")?;
                let width = cfg.f64_list("q.width")?;
                if center.len() != spatial_dim + 1 || width.len() != spatial_dim + 1 {
                    return Err(Error::Config(
                        "q.center / q.width must list t followed by spatial coordinates".into(),
                    ));
                }
                PotentialSpec::Bump {
                    amplitude: cfg.f64_or("q.amplitude", 1.0)?,
                    center,
                    width,
                }
            }
            other => return Err(Error::Config(format!("unknown q.kind `{other}`"))),
        };
        let q_true = RealField::from_fn(grid.clone(), |t, x| q_spec.eval(t, x));

        let m_power = cfg.usize_or("m", 4)?;
        if m_power < 4 {
            return Err(Error::Config(format!("m = {m_power} < 4")));
        }
        let s_order = cfg.usize_or("s", 2)?;
        let picard = PicardOptions {
            tol: cfg.f64_or("solver.picard_tol", 1e-10)?,
            max_iter: cfg.usize_or("solver.picard_max_iter", 25)?,
            kappa: cfg.f64_or("solver.kappa", 1e-2)?,
        };
        let defaults = ProbeSettings::default();
        let probe = ProbeSettings {
            tau: cfg.f64_or("probe.tau", defaults.tau)?,
            tau_aux: cfg.f64_or("probe.tau_aux", defaults.tau_aux)?,
            eps: cfg.f64_or("probe.eps", defaults.eps)?,
            delta_prime: cfg.f64_or("probe.delta_prime", defaults.delta_prime)?,
            delta_prime_aux: cfg.f64_or("probe.delta_prime_aux", defaults.delta_prime_aux)?,
            h0_im: cfg.f64_or("probe.h0_im", defaults.h0_im)?,
            h0_aux_im: cfg.f64_or("probe.h0_aux_im", defaults.h0_aux_im)?,
            angular_resolution: cfg
                .f64_or("probe.angular_resolution", defaults.angular_resolution)?,
            gamma2_angle: cfg.f64_or("probe.gamma2_angle", defaults.gamma2_angle)?,
            nodes_per_wavelength: cfg
                .f64_or("probe.nodes_per_wavelength", defaults.nodes_per_wavelength)?,
        };
        let seed = cfg.u64_or("seed", 0)?;

        Ok(Self {
            metric,
            domain,
            grid,
            op_fwd,
            op_bwd,
            q_spec,
            q_true,
            m_power,
            s_order,
            picard,
            probe,
            seed,
        })
    }

    pub fn spatial_dim(&self) -> usize {
        self.metric.spatial_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_from_minimal_config() {
        let cfg = Config::parse(
            "metric.kind = minkowski\ngrid.nx = 64\nq.kind = bump\n\
             q.center = 1.0 0.5\nq.width = 0.4 0.3\nq.amplitude = 1.0\n",
        )
        .unwrap();
        let scn = Scenario::from_config(&cfg).unwrap();
        assert_eq!(scn.spatial_dim(), 1);
        assert!(scn.q_true.linf() > 0.9);
        cfg.check_unknown().unwrap();
    }

    #[test]
    fn rejects_bad_q_kind() {
        let cfg = Config::parse("q.kind = wiggle\n").unwrap();
        assert!(Scenario::from_config(&cfg).is_err());
    }

    #[test]
    fn cfl_violation_surfaces_before_any_solve() {
        let cfg = Config::parse("grid.nx = 64\ngrid.nt = 16\n").unwrap();
        assert!(matches!(
            Scenario::from_config(&cfg),
            Err(Error::CflViolation { .. })
        ));
    }
}
