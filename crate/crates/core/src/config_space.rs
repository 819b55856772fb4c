//! Lattice and configuration-grid discretization.
//!
//! Configuration points are enumerated row-major with site 0 as the most
//! significant axis: point `j` has coordinate `(j / N_φ^(N_x-1-i)) % N_φ`
//! on axis `i`. Every field axis has Dirichlet-zero ghost values just
//! outside `[-Φ, Φ]`.
//!
//! Besides the point fields there are *link fields* along each axis. Link
//! `k` (for `k = 0..=N_φ`) along axis `i` joins point `k-1` to point `k`;
//! links `0` and `N_φ` touch the ghost layer. A link field for axis `i`
//! has `(N_φ+1)·N_φ^(N_x-1)` entries, laid out row-major with the same axis
//! order as point fields.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

/// Largest number of configuration points a grid may have.
pub const MAX_POINTS: usize = 1 << 26;

/// Highest supported number of lattice sites.
pub const MAX_SITES: usize = 3;

/// Values that can live on the grid: real or complex amplitudes.
pub trait FieldValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + AddAssign
{
}

impl FieldValue for f64 {}
impl FieldValue for Complex64 {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_sites: usize,
    spacing: f64,
    n_phi: usize,
    phi_max: f64,
    delta_phi: f64,
    weight: f64,
    len: usize,
}

impl Grid {
    pub fn new(n_sites: usize, spacing: f64, n_phi: usize, phi_max: f64) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::InvalidGrid("n_sites must be between 1 and 3"));
        }
        if n_phi < 3 {
            return Err(Error::InvalidGrid("n_phi must be at least 3"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid("spacing_a must be positive"));
        }
        if !(phi_max > 0.0 && phi_max.is_finite()) {
            return Err(Error::InvalidGrid("phi_max must be positive"));
        }
        let len = (0..n_sites)
            .try_fold(1usize, |acc, _| acc.checked_mul(n_phi))
            .filter(|&m| m <= MAX_POINTS)
            .ok_or(Error::InvalidGrid("too many configuration points"))?;
        let delta_phi = 2.0 * phi_max / (n_phi - 1) as f64;
        let weight = math::powi(delta_phi, n_sites as i32);
        Ok(Grid {
            n_sites,
            spacing,
            n_phi,
            phi_max,
            delta_phi,
            weight,
            len,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    pub fn delta_phi(&self) -> f64 {
        self.delta_phi
    }

    /// Measure weight `w = Δφ^N_x` of one configuration cell.
    pub fn measure_weight(&self) -> f64 {
        self.weight
    }

    /// Number of configuration points `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of entries in a link field along any axis.
    pub fn link_len(&self) -> usize {
        self.len / self.n_phi * (self.n_phi + 1)
    }

    /// Field value at axis index `k`.
    pub fn phi(&self, k: usize) -> f64 {
        -self.phi_max + k as f64 * self.delta_phi
    }

    /// Field value at the midpoint of link `k` along an axis.
    pub fn link_phi(&self, k: usize) -> f64 {
        -self.phi_max + (k as f64 - 0.5) * self.delta_phi
    }

    pub fn stride(&self, axis: usize) -> usize {
        let mut s = 1;
        for _ in axis + 1..self.n_sites {
            s *= self.n_phi;
        }
        s
    }

    /// Axis index of point `j` along `axis`.
    pub fn coordinate(&self, j: usize, axis: usize) -> usize {
        (j / self.stride(axis)) % self.n_phi
    }

    /// Field value `φ_axis` at point `j`.
    pub fn field_value(&self, j: usize, axis: usize) -> f64 {
        self.phi(self.coordinate(j, axis))
    }

    /// Index of the point reflected through the origin on every axis.
    pub fn mirror_index(&self, j: usize) -> usize {
        let mut out = 0;
        for axis in 0..self.n_sites {
            let k = self.coordinate(j, axis);
            out = out * self.n_phi + (self.n_phi - 1 - k);
        }
        out
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.n_sites {
            Ok(())
        } else {
            Err(Error::AxisOutOfRange {
                axis,
                n_sites: self.n_sites,
            })
        }
    }

    pub fn check_len(&self, found: usize) -> Result<()> {
        if found == self.len {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: self.len,
                found,
            })
        }
    }

    pub fn check_link_len(&self, found: usize) -> Result<()> {
        let expected = self.link_len();
        if found == expected {
            Ok(())
        } else {
            Err(Error::SizeMismatch { expected, found })
        }
    }

    /// `(outer, inner)` block sizes around `axis`: a point index is
    /// `(o·N_φ + k)·inner + r` and a link index `(o·(N_φ+1) + k)·inner + r`.
    pub(crate) fn axis_blocks(&self, axis: usize) -> (usize, usize) {
        let inner = self.stride(axis);
        (self.len / (inner * self.n_phi), inner)
    }

    /// Samples `f(φ_0, …, φ_{N_x-1})` at every configuration point.
    pub fn sample<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> Vec<f64> {
        let mut coords = [0.0; MAX_SITES];
        (0..self.len)
            .map(|j| {
                for (axis, c) in coords.iter_mut().enumerate().take(self.n_sites) {
                    *c = self.field_value(j, axis);
                }
                f(&coords[..self.n_sites])
            })
            .collect()
    }

    /// Samples `f` at the link midpoints along `axis`; the other coordinates
    /// sit on grid points.
    pub fn sample_links<F: FnMut(&[f64]) -> f64>(&self, axis: usize, mut f: F) -> Result<Vec<f64>> {
        self.check_axis(axis)?;
        let (outer, inner) = self.axis_blocks(axis);
        let n = self.n_phi;
        let mut out = vec![0.0; self.link_len()];
        let mut coords = [0.0; MAX_SITES];
        for o in 0..outer {
            for k in 0..=n {
                for r in 0..inner {
                    // Any point with the same off-axis coordinates will do.
                    let j = (o * n + k.min(n - 1)) * inner + r;
                    for (ax, c) in coords.iter_mut().enumerate().take(self.n_sites) {
                        *c = if ax == axis {
                            self.link_phi(k)
                        } else {
                            self.field_value(j, ax)
                        };
                    }
                    out[(o * (n + 1) + k) * inner + r] = f(&coords[..self.n_sites]);
                }
            }
        }
        Ok(out)
    }
}

/// `∫Dφ f ≈ w·Σ_j f_j`, summed in row-major order.
pub fn functional_integral<T: FieldValue>(f: &[T], grid: &Grid) -> Result<T> {
    grid.check_len(f.len())?;
    let mut acc = T::default();
    for &v in f {
        acc += v;
    }
    Ok(acc * grid.measure_weight())
}

/// `w·Σ x_j y_j`, the measure-weighted inner product of real fields.
pub fn weighted_dot(x: &[f64], y: &[f64], grid: &Grid) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() * grid.measure_weight()
}

/// `sqrt(w·Σ x_j²)`.
pub fn weighted_norm(x: &[f64], grid: &Grid) -> f64 {
    math::sqrt(weighted_dot(x, x, grid))
}

/// `sqrt(w·Σ |z_j|²)`.
pub fn weighted_norm_complex(z: &[Complex64], grid: &Grid) -> f64 {
    math::sqrt(z.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.measure_weight())
}

/// Central-difference functional derivative `(1/a)·∂/∂φ_axis`.
pub fn functional_derivative<T: FieldValue>(f: &[T], axis: usize, grid: &Grid) -> Result<Vec<T>> {
    grid.check_axis(axis)?;
    grid.check_len(f.len())?;
    let (outer, inner) = grid.axis_blocks(axis);
    let n = grid.n_phi();
    let scale = 1.0 / (2.0 * grid.delta_phi() * grid.spacing());
    let mut out = vec![T::default(); f.len()];
    for o in 0..outer {
        for k in 0..n {
            let base = (o * n + k) * inner;
            for r in 0..inner {
                let j = base + r;
                let prev = if k > 0 { f[j - inner] } else { T::default() };
                let next = if k + 1 < n { f[j + inner] } else { T::default() };
                out[j] = (next - prev) * scale;
            }
        }
    }
    Ok(out)
}

/// Configuration-space Laplacian `(1/a)·Σ_i ∂²/∂φ_i²` with the 3-point stencil.
pub fn config_laplacian<T: FieldValue>(f: &[T], grid: &Grid) -> Result<Vec<T>> {
    grid.check_len(f.len())?;
    let mut out = vec![T::default(); f.len()];
    add_laplacian(f, grid, 1.0, &mut out);
    Ok(out)
}

/// `out += scale·L f`, without size checks.
pub(crate) fn add_laplacian<T: FieldValue>(f: &[T], grid: &Grid, scale: f64, out: &mut [T]) {
    let n = grid.n_phi();
    let c = scale / (grid.spacing() * grid.delta_phi() * grid.delta_phi());
    for axis in 0..grid.n_sites() {
        let (outer, inner) = grid.axis_blocks(axis);
        for o in 0..outer {
            for k in 0..n {
                let base = (o * n + k) * inner;
                for r in 0..inner {
                    let j = base + r;
                    let prev = if k > 0 { f[j - inner] } else { T::default() };
                    let next = if k + 1 < n { f[j + inner] } else { T::default() };
                    out[j] += (prev + next - f[j] * 2.0) * c;
                }
            }
        }
    }
}

/// Forward difference from points onto links: `(f_k − f_{k−1})/(aΔφ)` with
/// zero ghost values.
pub fn link_difference<T: FieldValue>(f: &[T], axis: usize, grid: &Grid) -> Result<Vec<T>> {
    grid.check_axis(axis)?;
    grid.check_len(f.len())?;
    let (outer, inner) = grid.axis_blocks(axis);
    let n = grid.n_phi();
    let scale = 1.0 / (grid.spacing() * grid.delta_phi());
    let mut out = vec![T::default(); grid.link_len()];
    for o in 0..outer {
        for k in 0..=n {
            for r in 0..inner {
                let right = if k < n {
                    f[(o * n + k) * inner + r]
                } else {
                    T::default()
                };
                let left = if k > 0 {
                    f[(o * n + k - 1) * inner + r]
                } else {
                    T::default()
                };
                out[(o * (n + 1) + k) * inner + r] = (right - left) * scale;
            }
        }
    }
    Ok(out)
}

/// Divergence from links back onto points: `(F_{k+1} − F_k)/(aΔφ)`.
///
/// `a·Σ_i link_divergence(link_difference(f, i), i)` reproduces
/// [`config_laplacian`].
pub fn link_divergence<T: FieldValue>(links: &[T], axis: usize, grid: &Grid) -> Result<Vec<T>> {
    grid.check_axis(axis)?;
    grid.check_link_len(links.len())?;
    let mut out = vec![T::default(); grid.len()];
    add_link_divergence(links, axis, grid, 1.0, &mut out);
    Ok(out)
}

/// `out += scale·div_axis(links)`, without size checks.
pub(crate) fn add_link_divergence<T: FieldValue>(links: &[T], axis: usize, grid: &Grid, scale: f64, out: &mut [T]) {
    let (outer, inner) = grid.axis_blocks(axis);
    let n = grid.n_phi();
    let c = scale / (grid.spacing() * grid.delta_phi());
    for o in 0..outer {
        for k in 0..n {
            for r in 0..inner {
                let lo = links[(o * (n + 1) + k) * inner + r];
                let hi = links[(o * (n + 1) + k + 1) * inner + r];
                out[(o * n + k) * inner + r] += (hi - lo) * c;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, phi_max: f64) -> Grid {
        Grid::new(1, 1.0, n, phi_max).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 1.0, 8, 1.0).is_err());
        assert!(Grid::new(1, 1.0, 2, 1.0).is_err());
        assert!(Grid::new(1, 0.0, 8, 1.0).is_err());
        assert!(Grid::new(1, 1.0, 8, -1.0).is_err());
        assert!(Grid::new(4, 1.0, 8, 1.0).is_err());
        assert!(Grid::new(3, 1.0, 1 << 10, 1.0).is_err());
    }

    #[test]
    fn constant_field_integrates_to_w_m() {
        // Δφ = 0.5 with four points needs Φ = 0.75.
        let g = grid1(4, 0.75);
        assert_eq!(g.delta_phi(), 0.5);
        assert_eq!(functional_integral(&[1.0; 4], &g).unwrap(), 2.0);
        assert_eq!(functional_integral(&[0.0, 1.0, 0.0, 0.0], &g).unwrap(), 0.5);
    }

    #[test]
    fn integral_rejects_wrong_length() {
        let g = grid1(4, 1.0);
        assert_eq!(
            functional_integral(&[1.0; 3], &g),
            Err(Error::SizeMismatch { expected: 4, found: 3 })
        );
    }

    #[test]
    fn row_major_layout() {
        let g = Grid::new(3, 1.0, 4, 1.0).unwrap();
        assert_eq!(g.stride(0), 16);
        assert_eq!(g.stride(2), 1);
        let j = 2 * 16 + 3 * 4 + 1;
        assert_eq!(g.coordinate(j, 0), 2);
        assert_eq!(g.coordinate(j, 1), 3);
        assert_eq!(g.coordinate(j, 2), 1);
        assert_eq!(g.mirror_index(j), 16 + 2);
        assert_eq!(g.link_len(), 5 * 16);
    }

    #[test]
    fn derivative_of_linear_is_one_inside() {
        let g = grid1(11, 1.0);
        let f = g.sample(|p| p[0]);
        let d = functional_derivative(&f, 0, &g).unwrap();
        for v in &d[1..10] {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let c = functional_derivative(&[3.0; 11], 0, &g).unwrap();
        assert!(c[1..10].iter().all(|&v| v == 0.0));
        assert!(functional_derivative(&f, 1, &g).is_err());
    }

    #[test]
    fn laplacian_of_quadratic_is_two_inside() {
        let g = grid1(11, 1.0);
        let f = g.sample(|p| p[0] * p[0]);
        let l = config_laplacian(&f, &g).unwrap();
        for v in &l[1..10] {
            assert!((v - 2.0).abs() < 1e-12);
        }
        let c = config_laplacian(&[2.0; 11], &g).unwrap();
        assert!(c[1..10].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_difference_is_laplacian() {
        let g = Grid::new(2, 0.7, 9, 2.0).unwrap();
        let f = g.sample(|p| (p[0] - 0.3 * p[1]).sin() + p[1] * p[1]);
        let mut acc = vec![0.0; g.len()];
        for axis in 0..2 {
            let d = link_difference(&f, axis, &g).unwrap();
            let div = link_divergence(&d, axis, &g).unwrap();
            for (a, b) in acc.iter_mut().zip(div) {
                *a += g.spacing() * b;
            }
        }
        let lap = config_laplacian(&f, &g).unwrap();
        for (a, b) in acc.iter().zip(&lap) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn sample_links_uses_midpoints() {
        let g = Grid::new(2, 1.0, 5, 1.0).unwrap();
        let along0 = g.sample_links(0, |p| p[0]).unwrap();
        let along1 = g.sample_links(1, |p| p[1]).unwrap();
        // Link (k=0, r=0) along axis 0 sits half a step left of the box.
        assert_eq!(along0[0], -1.25);
        assert_eq!(along1[0], -1.25);
        assert_eq!(along1[5], 1.25);
        assert_eq!(along0[5 * 5], 1.25);
    }
}
