use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::Episode;
use crate::error::{Error, Result};

/// Projection plane as (horizontal, vertical) axis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xz,
    Xy,
    Yz,
}

impl Plane {
    fn axes(self) -> (usize, usize) {
        match self {
            Plane::Xz => (0, 2),
            Plane::Xy => (0, 1),
            Plane::Yz => (1, 2),
        }
    }

    fn labels(self) -> (&'static str, &'static str) {
        match self {
            Plane::Xz => ("x", "z"),
            Plane::Xy => ("x", "y"),
            Plane::Yz => ("y", "z"),
        }
    }
}

/// Density sampled on a regular grid. `values[j * u.len() + i]` is the
/// density at `(u[i], v[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub u_label: &'static str,
    pub v_label: &'static str,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.u.len() + i]
    }

    pub fn cell_area(&self) -> f64 {
        (self.u[1] - self.u[0]) * (self.v[1] - self.v[0])
    }

    /// Riemann sum of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    /// Grid indices of strict local maxima over the 8-neighbourhood.
    pub fn local_maxima(&self) -> Vec<(usize, usize)> {
        let (nu, nv) = (self.u.len() as isize, self.v.len() as isize);
        let mut out = Vec::new();
        for j in 0..nv {
            for i in 0..nu {
                let c = self.at(i as usize, j as usize);
                let is_max = (-1..=1isize).all(|dj| {
                    (-1..=1isize).all(|di| {
                        let (ii, jj) = (i + di, j + dj);
                        (di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= nu || jj >= nv || self.at(ii as usize, jj as usize) < c
                    })
                });
                if is_max {
                    out.push((i as usize, j as usize));
                }
            }
        }
        out
    }

    /// CSV with a header row of horizontal-axis coordinates; each following
    /// row starts with its vertical-axis coordinate.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\\{}", self.v_label, self.u_label);
        for u in &self.u {
            let _ = write!(s, ",{u}");
        }
        s.push('\n');
        for (j, v) in self.v.iter().enumerate() {
            let _ = write!(s, "{v}");
            for i in 0..self.u.len() {
                let _ = write!(s, ",{}", self.at(i, j));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::file(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandHeatmaps {
    pub left: DensityGrid,
    pub right: DensityGrid,
}

/// Gaussian KDE of wrist positions projected onto `plane`, one grid per
/// hand. Both grids share bounds (data range padded by four bandwidths) and
/// are normalised so their Riemann sum over the grid is one.
pub fn workspace_heatmap(episodes: &[Episode], plane: Plane, grid: (usize, usize), bandwidth: f64) -> Result<HandHeatmaps> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if grid.0 < 2 || grid.1 < 2 {
        return Err(Error::InvalidConfig(format!("grid must be at least 2x2, got {grid:?}")));
    }
    let (a, b) = plane.axes();
    let project = |p: &nalgebra::Vector3<f64>| (p[a], p[b]);
    let left: Vec<(f64, f64)> = episodes
        .iter()
        .flat_map(|e| &e.steps)
        .map(|s| project(&s.left_wrist.position))
        .collect();
    let right: Vec<(f64, f64)> = episodes
        .iter()
        .flat_map(|e| &e.steps)
        .map(|s| project(&s.right_wrist.position))
        .collect();
    if left.is_empty() {
        return Err(Error::EmptyInput("no wrist positions for the heatmap"));
    }
    let bounds = |sel: fn(&(f64, f64)) -> f64| {
        let lo = left.iter().chain(&right).map(sel).fold(f64::INFINITY, f64::min);
        let hi = left.iter().chain(&right).map(sel).fold(f64::NEG_INFINITY, f64::max);
        (lo - 4.0 * bandwidth, hi + 4.0 * bandwidth)
    };
    let (u0, u1) = bounds(|p| p.0);
    let (v0, v1) = bounds(|p| p.1);
    let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
    let u = axis(u0, u1, grid.0);
    let v = axis(v0, v1, grid.1);
    let (ul, vl) = plane.labels();
    let kde = |pts: &[(f64, f64)]| -> DensityGrid {
        let norm = 1.0 / (pts.len() as f64 * 2.0 * std::f64::consts::PI * bandwidth * bandwidth);
        let inv2 = 1.0 / (2.0 * bandwidth * bandwidth);
        let mut values = Vec::with_capacity(u.len() * v.len());
        for &vj in &v {
            for &ui in &u {
                let sum: f64 = pts
                    .iter()
                    .map(|&(pu, pv)| (-((ui - pu).powi(2) + (vj - pv).powi(2)) * inv2).exp())
                    .sum();
                values.push(sum * norm);
            }
        }
        let mut g = DensityGrid {
            u_label: ul,
            v_label: vl,
            u: u.clone(),
            v: v.clone(),
            values,
        };
        let mass = g.integral();
        if mass > 0.0 {
            g.values.iter_mut().for_each(|x| *x /= mass);
        }
        g
    };
    Ok(HandHeatmaps {
        left: kde(&left),
        right: kde(&right),
    })
}
