//! Sampled or closed-form geodesics in an ambient coordinate chart.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Ode,
}

type PointFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum Repr {
    Sampled {
        times: Arc<Vec<f64>>,
        points: Arc<Vec<f64>>,
        vels: Arc<Vec<f64>>,
    },
    Closed {
        point: Arc<PointFn>,
        velocity: Option<Arc<PointFn>>,
    },
}

/// A geodesic `t ↦ γ(t)` on `[t_min, t_max]`, expressed in the chart the
/// manifold uses for bumps and balls (exponential coordinates for groups,
/// Cartesian `(t, r cos α, r sin α)` for the warped manifolds).
///
/// `speed` is the Riemannian speed, so arclength is `speed * dt`. Velocities
/// are chart derivatives `dγ/dt`, not metric-normalized vectors.
#[derive(Clone)]
pub struct GeodesicPath {
    dim: usize,
    domain: (f64, f64),
    speed: f64,
    provenance: Provenance,
    reversed: bool,
    repr: Repr,
}

impl fmt::Debug for GeodesicPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicPath")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("speed", &self.speed)
            .field("provenance", &self.provenance)
            .field("reversed", &self.reversed)
            .finish()
    }
}

impl GeodesicPath {
    /// Builds a path from increasing sample times with chart positions and
    /// chart velocities (flattened, `dim` values per sample). Evaluation
    /// between samples uses cubic Hermite interpolation.
    pub fn from_samples(
        dim: usize,
        times: Vec<f64>,
        points: Vec<f64>,
        vels: Vec<f64>,
        speed: f64,
    ) -> Self {
        assert!(times.len() >= 2, "need at least two samples");
        assert_eq!(points.len(), times.len() * dim);
        assert_eq!(vels.len(), times.len() * dim);
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        let domain = (times[0], *times.last().unwrap());
        GeodesicPath {
            dim,
            domain,
            speed,
            provenance: Provenance::Ode,
            reversed: false,
            repr: Repr::Sampled {
                times: Arc::new(times),
                points: Arc::new(points),
                vels: Arc::new(vels),
            },
        }
    }

    pub fn closed_form<P>(dim: usize, domain: (f64, f64), speed: f64, point: P) -> Self
    where
        P: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        GeodesicPath {
            dim,
            domain,
            speed,
            provenance: Provenance::ClosedForm,
            reversed: false,
            repr: Repr::Closed { point: Arc::new(point), velocity: None },
        }
    }

    pub fn with_velocity<V>(mut self, velocity: V) -> Self
    where
        V: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        if let Repr::Closed { velocity: v, .. } = &mut self.repr {
            *v = Some(Arc::new(velocity));
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        if self.reversed {
            (-self.domain.1, -self.domain.0)
        } else {
            self.domain
        }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Same geodesic traversed backwards: `t ↦ γ(-t)`.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.reversed = !out.reversed;
        out
    }

    /// Restricts the domain (closed-form paths only need this for bookkeeping).
    pub fn with_domain(mut self, domain: (f64, f64)) -> Self {
        if let Repr::Closed { .. } = self.repr {
            self.domain = if self.reversed { (-domain.1, -domain.0) } else { domain };
        }
        self
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        self.eval(t).0
    }

    /// Position and chart velocity at `t`.
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (s, sign) = if self.reversed { (-t, -1.0) } else { (t, 1.0) };
        let (p, mut v) = self.eval_forward(s);
        if sign < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        (p, v)
    }

    fn eval_forward(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.repr {
            Repr::Closed { point, velocity } => {
                let p = point(t);
                let v = match velocity {
                    Some(vf) => vf(t),
                    None => {
                        let h = 1e-6 * (1.0 + t.abs());
                        let a = point(t + h);
                        let b = point(t - h);
                        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
                    }
                };
                (p, v)
            }
            Repr::Sampled { times, points, vels } => {
                let n = self.dim;
                let t = t.clamp(times[0], *times.last().unwrap());
                let idx = match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                    Ok(i) => i.min(times.len() - 2),
                    Err(i) => i.saturating_sub(1).min(times.len() - 2),
                };
                let (t0, t1) = (times[idx], times[idx + 1]);
                let h = t1 - t0;
                let u = (t - t0) / h;
                let (u2, u3) = (u * u, u * u * u);
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                let d00 = (6.0 * u2 - 6.0 * u) / h;
                let d10 = 3.0 * u2 - 4.0 * u + 1.0;
                let d01 = (-6.0 * u2 + 6.0 * u) / h;
                let d11 = 3.0 * u2 - 2.0 * u;
                let mut p = vec![0.0; n];
                let mut v = vec![0.0; n];
                for k in 0..n {
                    let p0 = points[idx * n + k];
                    let p1 = points[(idx + 1) * n + k];
                    let m0 = vels[idx * n + k];
                    let m1 = vels[(idx + 1) * n + k];
                    p[k] = h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
                    v[k] = d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1;
                }
                (p, v)
            }
        }
    }
}
