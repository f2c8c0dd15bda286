//! Uniform periodic grids and the fields that live on them.
//!
//! Samples sit on nodes `x_i = i * spacing`, `i = 0..n`. All stencils are
//! second-order central differences with periodic wrap-around, and the
//! quadrature is the periodic rectangle rule (identical to the trapezoid rule
//! on a periodic grid), which is exact for trigonometric polynomials of degree
//! below `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid that still supports the five-point stencil without the
/// stencil wrapping onto itself.
pub const MIN_GRID_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    n: usize,
    length: f64,
    spacing: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(Error::GridTooSmall { n });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidLength { length });
        }
        Ok(Self {
            n,
            length,
            spacing: length / n as f64,
        })
    }

    /// The unit-period height grid used for `u(h)`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Wraps a signed index into `0..n`.
    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    /// Shortest distance between two points on the circle of circumference `length`.
    pub fn periodic_distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(self.length);
        d.min(self.length - d)
    }
}

/// Samples of a periodic function on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::LengthMismatch {
                expected: grid.n,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "field",
                index,
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n])
    }

    /// Builds a field without re-checking finiteness. Used on hot paths where
    /// the caller validates separately.
    pub(crate) fn from_raw(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Self { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        self.values[self.grid.wrap(i)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid.n, other.grid.n);
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the first minimum (smallest index on ties).
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.length
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Cyclic index shift: `out[i] = self[i + k]`.
    pub fn shifted(&self, k: isize) -> Self {
        let values = (0..self.grid.n as isize).map(|i| self.at(i + k)).collect();
        Self::from_raw(self.grid, values)
    }

    pub fn cubed(&self) -> Self {
        self.map(|v| v * v * v)
    }
}

/// A function with a fixed increment per period, stored as its periodic part
/// `p_i = v_i - winding * x_i / length` together with the winding.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingField {
    grid: PeriodicGrid,
    periodic: Vec<f64>,
    winding: f64,
}

impl WindingField {
    /// From full sample values `v_i` at the nodes.
    pub fn from_values(grid: PeriodicGrid, values: &[f64], winding: f64) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::LengthMismatch {
                expected: grid.n,
                got: values.len(),
            });
        }
        if !winding.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "winding {winding} is not finite"
            )));
        }
        let slope = winding / grid.length;
        let periodic = values
            .iter()
            .enumerate()
            .map(|(i, &v)| v - slope * grid.node(i))
            .collect::<Vec<_>>();
        if let Some(index) = periodic.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "winding field",
                index,
            });
        }
        Ok(Self {
            grid,
            periodic,
            winding,
        })
    }

    /// From the periodic part directly.
    pub fn from_periodic(grid: PeriodicGrid, periodic: Vec<f64>, winding: f64) -> Result<Self> {
        if periodic.len() != grid.n {
            return Err(Error::LengthMismatch {
                expected: grid.n,
                got: periodic.len(),
            });
        }
        if !winding.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "winding {winding} is not finite"
            )));
        }
        if let Some(index) = periodic.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "winding field",
                index,
            });
        }
        Ok(Self {
            grid,
            periodic,
            winding,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn winding(&self) -> f64 {
        self.winding
    }

    /// Mean slope `winding / length`.
    pub fn mean_slope(&self) -> f64 {
        self.winding / self.grid.length
    }

    pub fn periodic_part(&self) -> &[f64] {
        &self.periodic
    }

    pub fn periodic_field(&self) -> PeriodicField {
        PeriodicField::from_raw(self.grid, self.periodic.clone())
    }

    /// Value at an arbitrary (possibly out-of-period) node index.
    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        self.periodic[self.grid.wrap(i)] + self.mean_slope() * (i as f64 * self.grid.spacing)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.grid.n as isize).map(|i| self.at(i)).collect()
    }

    /// Central first difference. The winding contributes exactly the mean slope.
    pub fn diff1(&self) -> PeriodicField {
        let p = PeriodicField::from_raw(self.grid, self.periodic.clone());
        let slope = self.mean_slope();
        diff1(&p).map(|d| d + slope)
    }

    /// Integral over one period of the full (non-periodic) values.
    pub fn integrate(&self) -> f64 {
        self.values().iter().sum::<f64>() * self.grid.spacing
    }
}

/// Central first difference `(f_{i+1} - f_{i-1}) / (2 spacing)`.
pub fn diff1(f: &PeriodicField) -> PeriodicField {
    let g = f.grid;
    let inv = 0.5 / g.spacing;
    let values = (0..g.n as isize)
        .map(|i| (f.at(i + 1) - f.at(i - 1)) * inv)
        .collect();
    PeriodicField::from_raw(g, values)
}

/// Three-point periodic second difference.
pub fn diff2(f: &PeriodicField) -> PeriodicField {
    let g = f.grid;
    let inv = 1.0 / (g.spacing * g.spacing);
    let values = (0..g.n as isize)
        .map(|i| {
            let c = f.at(i);
            ((f.at(i - 1) - c) + (f.at(i + 1) - c)) * inv
        })
        .collect();
    PeriodicField::from_raw(g, values)
}

/// Five-point periodic fourth difference `(1, -4, 6, -4, 1) / spacing^4`.
pub fn diff4(f: &PeriodicField) -> PeriodicField {
    let g = f.grid;
    let h2 = g.spacing * g.spacing;
    let inv = 1.0 / (h2 * h2);
    let values = (0..g.n as isize)
        .map(|i| {
            let c = f.at(i);
            // differences against the centre so constants cancel exactly
            let outer = (f.at(i - 2) - c) + (f.at(i + 2) - c);
            let inner = (f.at(i - 1) - c) + (f.at(i + 1) - c);
            (outer - 4.0 * inner) * inv
        })
        .collect();
    PeriodicField::from_raw(g, values)
}

/// Periodic rectangle rule `spacing * sum(values)`.
pub fn integrate(f: &PeriodicField) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.spacing
}

/// Linear interpolation of the periodic extension onto `n_new` nodes of the same length.
pub fn resample(f: &PeriodicField, n_new: usize) -> Result<PeriodicField> {
    let grid = PeriodicGrid::new(n_new, f.grid.length)?;
    if n_new == f.grid.n {
        return Ok(PeriodicField::from_raw(grid, f.values.clone()));
    }
    let values = grid.nodes().map(|x| interpolate_linear(f, x)).collect();
    Ok(PeriodicField::from_raw(grid, values))
}

/// Piecewise-linear value of the periodic extension at an arbitrary point.
pub fn interpolate_linear(f: &PeriodicField, x: f64) -> f64 {
    let g = f.grid;
    let s = x.rem_euclid(g.length) / g.spacing;
    let i = s.floor();
    let theta = s - i;
    let i = i as isize;
    let a = f.at(i);
    let b = f.at(i + 1);
    a + theta * (b - a)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn sine(n: usize) -> PeriodicField {
        PeriodicField::from_fn(PeriodicGrid::unit(n).unwrap(), |h| (2.0 * PI * h).sin()).unwrap()
    }

    #[test]
    fn grid_construction() {
        assert_eq!(PeriodicGrid::new(64, 1.0).unwrap().spacing(), 0.015625);
        assert_eq!(PeriodicGrid::new(8, 2.0).unwrap().spacing(), 0.25);
        let err = PeriodicGrid::new(4, 1.0).unwrap_err();
        assert!(err.to_string().contains("grid too small"));
        assert!(PeriodicGrid::new(16, 0.0).is_err());
        assert!(PeriodicGrid::new(16, -1.0).is_err());
        let g = PeriodicGrid::new(100, 3.7).unwrap();
        assert!((g.spacing() * 100.0 - 3.7).abs() <= f64::EPSILON * 3.7);
    }

    #[test]
    fn field_rejects_bad_input() {
        let g = PeriodicGrid::unit(8).unwrap();
        assert!(PeriodicField::new(g, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(
            PeriodicField::new(g, v),
            Err(Error::NonFinite { index: 3, .. })
        ));
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let g = PeriodicGrid::unit(32).unwrap();
        for c in [1.0, 1.2_f64.powi(3), 0.1, 7.3e5, -3.3] {
            let f = PeriodicField::constant(g, c).unwrap();
            assert!(diff2(&f).values().iter().all(|&v| v == 0.0));
            assert!(diff4(&f).values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn impulse_responses() {
        let g = PeriodicGrid::new(16, 2.0).unwrap();
        let d = g.spacing();
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        let f = PeriodicField::new(g, v).unwrap();
        let d2 = diff2(&f);
        let s2 = 1.0 / (d * d);
        assert_eq!(d2.at(-1), s2);
        assert_eq!(d2.at(0), -2.0 * s2);
        assert_eq!(d2.at(1), s2);
        assert_eq!(d2.at(2), 0.0);
        let d4 = diff4(&f);
        let s4 = s2 * s2;
        let expected = [1.0, -4.0, 6.0, -4.0, 1.0];
        for (k, e) in (-2..=2).zip(expected) {
            assert_eq!(d4.at(k), e * s4, "offset {k}");
        }
        assert_eq!(d4.at(3), 0.0);
        assert_eq!(d4.at(-3), 0.0);
    }

    #[test]
    fn second_difference_of_sine() {
        let n = 64;
        let f = sine(n);
        let d = 1.0 / n as f64;
        let bound = (2.0 * PI * d).powi(2) / 12.0 + 1e-12;
        let k2 = (2.0 * PI).powi(2);
        let d2 = diff2(&f);
        // exact discrete eigenvalue
        let lambda = -(2.0 / (d * d)) * (1.0 - (2.0 * PI * d).cos());
        for (i, h) in f.grid().nodes().enumerate() {
            let exact = -k2 * (2.0 * PI * h).sin();
            assert!((d2.values()[i] - exact).abs() <= bound * k2);
            assert!((d2.values()[i] - lambda * (2.0 * PI * h).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn quadrature() {
        for n in [8, 9, 17, 64] {
            let g = PeriodicGrid::unit(n).unwrap();
            let c = PeriodicField::constant(g, 2.5).unwrap();
            assert!((integrate(&c) - 2.5).abs() < 1e-14);
            assert!(integrate(&sine(n)).abs() < 1e-14);
            let s2 = sine(n).map(|v| v * v);
            assert!((integrate(&s2) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn resampling() {
        let g = PeriodicGrid::unit(32).unwrap();
        let c = PeriodicField::constant(g, 1.5).unwrap();
        assert!(resample(&c, 50)
            .unwrap()
            .values()
            .iter()
            .all(|&v| (v - 1.5).abs() < 1e-15));
        let s = sine(32);
        assert_eq!(resample(&s, 32).unwrap().values(), s.values());
        let fine = resample(&s, 64).unwrap();
        let bound = (2.0 * PI / 32.0).powi(2) / 8.0;
        let exact = sine(64);
        assert!(fine.max_abs_diff(&exact) <= bound);
        assert!(resample(&s, 4).is_err());
    }

    #[test]
    fn winding_field_differences_see_the_mean_slope() {
        let g = PeriodicGrid::new(16, 2.0).unwrap();
        let values: Vec<f64> = g.nodes().map(|x| 0.5 * x).collect();
        let h = WindingField::from_values(g, &values, 1.0).unwrap();
        assert!(h.periodic_part().iter().all(|p| p.abs() < 1e-15));
        assert!(h.diff1().values().iter().all(|&d| (d - 0.5).abs() < 1e-14));
        assert!((h.at(16) - 1.0).abs() < 1e-15);
        assert!((h.at(-1) - (-0.5 * g.spacing())).abs() < 1e-15);
    }
}
