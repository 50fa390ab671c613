//! Dynamic time warping: exact dynamic programming and the multiresolution
//! FastDTW approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Alignment cost and the warping path that realises it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    /// Sum of pointwise costs along the path.
    pub distance: f64,
    /// `(i, j)` index pairs from `(0, 0)` to `(n - 1, m - 1)`.
    pub path: Vec<(usize, usize)>,
    /// True when the full cost matrix was searched.
    pub exact: bool,
}

/// Pointwise cost between two samples.
pub type Metric<'a> = &'a dyn Fn(&[f64], &[f64]) -> f64;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Admissible columns `[lo, hi]` (inclusive) for every row.
type Window = Vec<(usize, usize)>;

fn windowed_dtw(a: &[Vec<f64>], b: &[Vec<f64>], window: &Window, metric: Metric) -> (f64, Vec<(usize, usize)>) {
    let n = a.len();
    let width = |i: usize| window[i].1 - window[i].0 + 1;
    let mut cost: Vec<Vec<f64>> = (0..n).map(|i| vec![f64::INFINITY; width(i)]).collect();
    let get = |cost: &Vec<Vec<f64>>, i: usize, j: usize| -> f64 {
        let (lo, hi) = window[i];
        if j < lo || j > hi {
            f64::INFINITY
        } else {
            cost[i][j - lo]
        }
    };
    for i in 0..n {
        let (lo, hi) = window[i];
        for j in lo..=hi {
            let d = metric(&a[i], &b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { get(&cost, i - 1, j - 1) } else { f64::INFINITY };
                let up = if i > 0 { get(&cost, i - 1, j) } else { f64::INFINITY };
                let left = if j > lo { cost[i][j - 1 - lo] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            cost[i][j - lo] = d + best;
        }
    }
    let mut path = vec![(n - 1, b.len() - 1)];
    let (mut i, mut j) = (n - 1, b.len() - 1);
    while (i, j) != (0, 0) {
        let step = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = get(&cost, i - 1, j - 1);
            let up = get(&cost, i - 1, j);
            let left = get(&cost, i, j - 1);
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        (i, j) = step;
        path.push(step);
    }
    path.reverse();
    (get(&cost, n - 1, b.len() - 1), path)
}

fn check(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("DTW needs nonempty sequences"));
    }
    Ok(())
}

/// Optimal alignment over the full cost matrix.
pub fn dtw_exact(a: &[Vec<f64>], b: &[Vec<f64>], metric: Metric) -> Result<DtwResult> {
    check(a, b)?;
    let window = vec![(0, b.len() - 1); a.len()];
    let (distance, path) = windowed_dtw(a, b, &window, metric);
    Ok(DtwResult {
        distance,
        path,
        exact: true,
    })
}

fn coarsen(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.chunks(2)
        .map(|c| {
            if c.len() == 2 {
                c[0].iter().zip(&c[1]).map(|(p, q)| 0.5 * (p + q)).collect()
            } else {
                c[0].clone()
            }
        })
        .collect()
}

/// Projects a coarse path onto the finer grid, widened by `radius` coarse cells.
fn expand_window(path: &[(usize, usize)], n: usize, m: usize, radius: usize) -> Window {
    let mut window = vec![(usize::MAX, 0usize); n];
    let r = radius as isize;
    for &(i, j) in path {
        for di in -r..=r {
            let ci = i as isize + di;
            if ci < 0 {
                continue;
            }
            let jlo = (j as isize - r).max(0) as usize;
            let jhi = j + radius;
            for fi in [2 * ci as usize, 2 * ci as usize + 1] {
                if fi >= n {
                    continue;
                }
                let lo = (2 * jlo).min(m - 1);
                let hi = (2 * jhi + 1).min(m - 1);
                let w = &mut window[fi];
                w.0 = w.0.min(lo);
                w.1 = w.1.max(hi);
            }
        }
    }
    // rows never touched inherit their neighbour's span
    for i in 0..n {
        if window[i].0 == usize::MAX {
            window[i] = if i > 0 { window[i - 1] } else { (0, m - 1) };
        }
    }
    window[0].0 = 0;
    window[n - 1].1 = m - 1;
    // keep consecutive rows connected
    for i in 1..n {
        if window[i].0 > window[i - 1].1 {
            window[i].0 = window[i - 1].1;
        }
    }
    for i in (0..n - 1).rev() {
        if window[i].1 < window[i + 1].0 {
            window[i].1 = window[i + 1].0;
        }
    }
    window
}

/// FastDTW: align halved sequences recursively, then refine inside a window
/// around the projected coarse path. Inputs no longer than
/// `2 * (radius + 2)` are aligned exactly.
pub fn dtw_fast(a: &[Vec<f64>], b: &[Vec<f64>], radius: usize, metric: Metric) -> Result<DtwResult> {
    check(a, b)?;
    let min_size = 2 * (radius + 2);
    if a.len() <= min_size || b.len() <= min_size {
        return dtw_exact(a, b, metric);
    }
    let coarse = dtw_fast(&coarsen(a), &coarsen(b), radius, metric)?;
    let window = expand_window(&coarse.path, a.len(), b.len(), radius);
    let full = window.iter().all(|&(lo, hi)| lo == 0 && hi == b.len() - 1);
    let (distance, path) = windowed_dtw(a, b, &window, metric);
    Ok(DtwResult {
        distance,
        path,
        exact: full,
    })
}

/// A sequence-alignment strategy selectable by name.
pub trait Aligner: Send + Sync {
    fn name(&self) -> &str;
    fn align(&self, a: &[Vec<f64>], b: &[Vec<f64>], metric: Metric) -> Result<DtwResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignerConfig {
    pub radius: usize,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        Self { radius: 1 }
    }
}

struct ExactDtw;

impl Aligner for ExactDtw {
    fn name(&self) -> &str {
        "exact"
    }

    fn align(&self, a: &[Vec<f64>], b: &[Vec<f64>], metric: Metric) -> Result<DtwResult> {
        dtw_exact(a, b, metric)
    }
}

struct FastDtw {
    radius: usize,
}

impl Aligner for FastDtw {
    fn name(&self) -> &str {
        "fast"
    }

    fn align(&self, a: &[Vec<f64>], b: &[Vec<f64>], metric: Metric) -> Result<DtwResult> {
        dtw_fast(a, b, self.radius, metric)
    }
}

/// Registry holding `exact` and `fast`.
pub fn aligner_registry() -> Registry<dyn Aligner, AlignerConfig> {
    let mut reg: Registry<dyn Aligner, AlignerConfig> = Registry::new("aligner");
    reg.register("exact", |_: &AlignerConfig| Ok(Box::new(ExactDtw)));
    reg.register("fast", |c: &AlignerConfig| Ok(Box::new(FastDtw { radius: c.radius })));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    fn abs(a: &[f64], b: &[f64]) -> f64 {
        (a[0] - b[0]).abs()
    }

    fn valid_path(p: &[(usize, usize)], n: usize, m: usize) -> bool {
        p[0] == (0, 0)
            && p[p.len() - 1] == (n - 1, m - 1)
            && p.windows(2).all(|w| {
                let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }

    #[test]
    fn identity_and_singleton() {
        let a = scalars(&[0.0, 1.0, 5.0, 2.0]);
        let r = dtw_exact(&a, &a, &abs).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.path, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(dtw_exact(&scalars(&[0.0]), &scalars(&[3.0]), &abs).unwrap().distance, 3.0);
    }

    #[test]
    fn hand_table() {
        // cost |a_i - b_j|:       accumulated:
        //   b=0 b=2                 0  2
        // 0  0   2                  1  1
        // 1  1   1                  3  1
        // 2  2   0
        let r = dtw_exact(&scalars(&[0.0, 1.0, 2.0]), &scalars(&[0.0, 2.0]), &abs).unwrap();
        assert_eq!(r.distance, 1.0);
        assert!(valid_path(&r.path, 3, 2));
    }

    #[test]
    fn empty_input() {
        assert!(dtw_exact(&[], &scalars(&[1.0]), &abs).is_err());
        assert!(dtw_fast(&scalars(&[1.0]), &[], 1, &abs).is_err());
    }

    #[test]
    fn small_inputs_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.random()).collect();
            let (a, b) = (scalars(&a), scalars(&b));
            assert_eq!(
                dtw_fast(&a, &b, 1, &abs).unwrap().distance,
                dtw_exact(&a, &b, &abs).unwrap().distance
            );
        }
    }

    #[test]
    fn registry_names() {
        let reg = aligner_registry();
        assert_eq!(reg.names(), vec!["exact", "fast"]);
        let a = reg.build("fast", &AlignerConfig { radius: 2 }).unwrap();
        assert_eq!(a.name(), "fast");
    }

    proptest! {
        #[test]
        fn fast_is_admissible(a in prop::collection::vec(-5.0..5.0f64, 1..80), b in prop::collection::vec(-5.0..5.0f64, 1..80), r in 0usize..4) {
            let (a, b) = (scalars(&a), scalars(&b));
            let ex = dtw_exact(&a, &b, &abs).unwrap();
            let fast = dtw_fast(&a, &b, r, &abs).unwrap();
            prop_assert!(fast.distance >= ex.distance - 1e-12);
            prop_assert!(valid_path(&fast.path, a.len(), b.len()));
            prop_assert!(valid_path(&ex.path, a.len(), b.len()));
            let along: f64 = fast.path.iter().map(|&(i, j)| abs(&a[i], &b[j])).sum();
            prop_assert!((along - fast.distance).abs() < 1e-9);
            let sym = dtw_exact(&b, &a, &abs).unwrap();
            prop_assert!((sym.distance - ex.distance).abs() < 1e-12);
        }
    }
}
