//! Gradient-domain solve on a rectangular region.
//!
//! The outer one-pixel ring of the region holds Dirichlet values; every
//! interior pixel `p` satisfies `4 f_p - sum_q f_q = b_p`, where `b_p` is the
//! sum of guidance differences `v_pq` over the four neighbours `q`.

use serde::{Deserialize, Serialize};

/// A single-channel floating point grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer length");
        Plane { width, height, data }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Plane { width, height, data: vec![v; width * height] }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Discrete Laplacian guidance `b_p = 4 s_p - sum_q s_q` of a source plane,
/// i.e. the divergence of the source's own gradient field. Border entries are zero.
pub fn guidance_from_source(source: &Plane) -> Plane {
    let (w, h) = (source.width, source.height);
    let mut b = Plane::filled(w, h, 0.0);
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let s = source.at(x, y);
            b.data[y * w + x] =
                4.0 * s - source.at(x - 1, y) - source.at(x + 1, y) - source.at(x, y - 1) - source.at(x, y + 1);
        }
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonSettings {
    /// Stop once the largest per-pixel update of a sweep falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Over-relaxation factor; `None` picks the optimal factor for the region size,
    /// `Some(1.0)` is plain Gauss-Seidel.
    pub omega: Option<f64>,
}

impl Default for PoissonSettings {
    fn default() -> Self {
        PoissonSettings { tolerance: 1e-3, max_iterations: 10_000, omega: None }
    }
}

impl PoissonSettings {
    pub fn gauss_seidel() -> Self {
        PoissonSettings { omega: Some(1.0), ..Default::default() }
    }

    fn omega_for(&self, width: usize, height: usize) -> f64 {
        self.omega.unwrap_or_else(|| {
            let n = width.max(height).max(3) as f64;
            2.0 / (1.0 + (std::f64::consts::PI / n).sin())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub values: Plane,
    pub iterations: usize,
    pub converged: bool,
    pub last_update: f64,
}

/// Solves for the interior of `target`; the border ring of `target` is kept
/// fixed and its interior serves as the initial guess.
pub fn poisson_solve(target: &Plane, guidance: &Plane, settings: &PoissonSettings) -> PoissonSolution {
    assert_eq!((target.width, target.height), (guidance.width, guidance.height));
    let (w, h) = (target.width, target.height);
    let mut f = target.data.clone();
    if w < 3 || h < 3 {
        return PoissonSolution { values: target.clone(), iterations: 0, converged: true, last_update: 0.0 };
    }
    let omega = settings.omega_for(w, h);
    let b = &guidance.data;
    let mut iterations = 0;
    let mut last_update = f64::INFINITY;
    while iterations < settings.max_iterations {
        iterations += 1;
        let mut max_update = 0.0f64;
        for y in 1..h - 1 {
            let row = y * w;
            for x in 1..w - 1 {
                let i = row + x;
                let gs = (f[i - 1] + f[i + 1] + f[i - w] + f[i + w] + b[i]) * 0.25;
                let delta = omega * (gs - f[i]);
                f[i] += delta;
                max_update = max_update.max(delta.abs());
            }
        }
        last_update = max_update;
        if max_update < settings.tolerance {
            break;
        }
    }
    PoissonSolution {
        values: Plane::new(w, h, f),
        iterations,
        converged: last_update < settings.tolerance,
        last_update,
    }
}
