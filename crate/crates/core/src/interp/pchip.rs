use crate::error::{Error, Result};

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct PchipCurve {
    t: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl PchipCurve {
    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.y.iter().copied())
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        pchip_eval(self, t)
    }

    /// Derivative on the segment that starts at or before `t`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let i = self.segment(t)?;
        let (h, s) = (self.t[i + 1] - self.t[i], t - self.t[i]);
        let (c2, c3) = self.coeffs(i, h);
        Ok(self.d[i] + 2.0 * c2 * s + 3.0 * c3 * s * s)
    }

    fn segment(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::Extrapolation { t, lo, hi });
        }
        let idx = self.t.partition_point(|&k| k <= t);
        Ok(idx.saturating_sub(1).min(self.t.len() - 2))
    }

    fn coeffs(&self, i: usize, h: f64) -> (f64, f64) {
        let delta = (self.y[i + 1] - self.y[i]) / h;
        let c2 = (3.0 * delta - 2.0 * self.d[i] - self.d[i + 1]) / h;
        let c3 = (self.d[i] + self.d[i + 1] - 2.0 * delta) / (h * h);
        (c2, c3)
    }
}

/// Fits a PCHIP curve through `(t, y)` knots with strictly increasing `t`.
pub fn pchip_fit(knots: &[(f64, f64)]) -> Result<PchipCurve> {
    let n = knots.len();
    if n < 2 {
        return Err(Error::EmptyInput("PCHIP needs at least two knots"));
    }
    let t: Vec<f64> = knots.iter().map(|k| k.0).collect();
    let y: Vec<f64> = knots.iter().map(|k| k.1).collect();
    for i in 1..n {
        if !(t[i] > t[i - 1]) {
            return Err(Error::KnotOrder { index: i });
        }
    }
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return Ok(PchipCurve { t, y, d });
    }
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    Ok(PchipCurve { t, y, d })
}

/// One-sided three-point end slope, limited to preserve shape.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

pub fn pchip_eval(curve: &PchipCurve, t: f64) -> Result<f64> {
    let i = curve.segment(t)?;
    if t == curve.t[i + 1] {
        return Ok(curve.y[i + 1]);
    }
    let h = curve.t[i + 1] - curve.t[i];
    let s = t - curve.t[i];
    let (c2, c3) = curve.coeffs(i, h);
    Ok(curve.y[i] + s * (curve.d[i] + s * (c2 + s * c3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent cubic Hermite evaluation via the basis polynomials.
    fn hermite_basis(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = 2.0 * s.powi(3) - 3.0 * s.powi(2) + 1.0;
        let h10 = s.powi(3) - 2.0 * s.powi(2) + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s.powi(2);
        let h11 = s.powi(3) - s.powi(2);
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    #[test]
    fn reproduces_lines() {
        let knots: Vec<(f64, f64)> = [0.0, 0.3, 1.1, 2.0, 3.7].iter().map(|&t| (t, 0.5 - 1.25 * t)).collect();
        let c = pchip_fit(&knots).unwrap();
        for k in 0..=370 {
            let t = k as f64 * 0.01;
            assert!((c.eval(t).unwrap() - (0.5 - 1.25 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolates_knots_and_endpoints() {
        let c = pchip_fit(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert_eq!(c.eval(0.0).unwrap(), 0.0);
        assert_eq!(c.eval(2.0).unwrap(), 0.0);
        assert_eq!(c.eval(1.0).unwrap(), 1.0);
        let flat = pchip_fit(&[(0.0, 1.0), (1.0, 2.0), (2.0, 2.0), (3.0, 5.0)]).unwrap();
        assert_eq!(flat.eval(1.5).unwrap(), 2.0);
    }

    #[test]
    fn matches_hermite_basis_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = 0.0;
        let knots: Vec<(f64, f64)> = (0..9)
            .map(|_| {
                t += rng.random_range(0.1..1.0);
                (t, rng.random_range(-2.0..2.0))
            })
            .collect();
        let c = pchip_fit(&knots).unwrap();
        let d = c.slopes();
        for i in 0..knots.len() - 1 {
            for k in 0..50 {
                let x = knots[i].0 + (knots[i + 1].0 - knots[i].0) * k as f64 / 50.0;
                let oracle = hermite_basis(knots[i].0, knots[i + 1].0, knots[i].1, knots[i + 1].1, d[i], d[i + 1], x);
                assert!((c.eval(x).unwrap() - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_knots_and_extrapolation() {
        assert!(matches!(pchip_fit(&[(0.0, 0.0), (0.0, 1.0)]), Err(Error::KnotOrder { index: 1 })));
        assert!(pchip_fit(&[(1.0, 0.0), (0.5, 1.0), (2.0, 0.0)]).is_err());
        assert!(pchip_fit(&[(1.0, 0.0)]).is_err());
        let c = pchip_fit(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!(matches!(c.eval(1.5), Err(Error::Extrapolation { .. })));
        assert!(c.eval(-0.1).is_err());
    }

    #[test]
    fn c1_continuity_at_interior_knots() {
        let c = pchip_fit(&[(0.0, 0.0), (0.7, 0.4), (1.5, 0.45), (2.0, 1.5), (3.0, 1.2)]).unwrap();
        for (i, (t, _)) in c.knots().enumerate().skip(1).take(3) {
            // left segment derivative evaluated at its right end
            let seg = i - 1;
            let h = c.t[seg + 1] - c.t[seg];
            let (c2, c3) = c.coeffs(seg, h);
            let left = c.d[seg] + 2.0 * c2 * h + 3.0 * c3 * h * h;
            let right = c.derivative(t).unwrap();
            assert!((left - right).abs() < 1e-9);
        }
    }

    proptest::proptest! {
        #[test]
        fn monotone_data_gives_monotone_curve(steps in proptest::collection::vec((0.05f64..1.0, 0.0f64..1.0), 2..10)) {
            let mut t = 0.0;
            let mut y = 0.0;
            let knots: Vec<(f64, f64)> = std::iter::once((0.0, 0.0)).chain(steps.iter().map(|&(dt, dy)| {
                t += dt;
                y += dy;
                (t, y)
            })).collect();
            let c = pchip_fit(&knots).unwrap();
            let (lo, hi) = c.domain();
            let mut prev = c.eval(lo).unwrap();
            let mut x = lo;
            while x < hi {
                x = (x + 1e-3).min(hi);
                let v = c.eval(x).unwrap();
                proptest::prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }

        #[test]
        fn segments_do_not_overshoot(ys in proptest::collection::vec(-1.0f64..1.0, 3..12)) {
            let knots: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64 * 0.5, y)).collect();
            let c = pchip_fit(&knots).unwrap();
            for w in knots.windows(2) {
                let (lo, hi) = (w[0].1.min(w[1].1), w[0].1.max(w[1].1));
                for k in 0..=100 {
                    let v = c.eval(w[0].0 + (w[1].0 - w[0].0) * k as f64 / 100.0).unwrap();
                    proptest::prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }
}
