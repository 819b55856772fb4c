//! The covariantized lattice Hamiltonian of the scalar field theory.
//!
//! On each field axis the covariant derivative is a link operator,
//! `(C_iΨ)_k = (U_k Ψ_k − Ψ_{k−1})/(aΔφ)` with transporter
//! `U_k = e^{iaΔφ·𝒜_φ}`, and the kinetic term is `(a/2)·Σ_i C_i†C_i`. With
//! no connection this is exactly `−½` times the configuration Laplacian.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::config_space::Grid;
use crate::error::{Error, Result};
use crate::math;
use crate::state::{transporter, GaugeState, ModelParams, WaveFunctional};

/// Default cap on `M` for dense matrix construction.
pub const DEFAULT_DENSE_CAP: usize = 16384;

/// On-site potential family.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Potential {
    /// `V(φ) = ½m²φ² + ¼λφ⁴`.
    #[default]
    Quartic,
    /// The quartic potential with its minimum moved to `φ = center`.
    Shifted { center: f64 },
    /// Two mirror copies of the quartic potential centred at `±center`:
    /// `V(|φ| − center)`.
    DoubleWell { center: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHamiltonian {
    params: ModelParams,
    grid: Grid,
    potential: Potential,
    diagonal: Vec<f64>,
}

impl DiscreteHamiltonian {
    pub fn new(params: ModelParams, grid: Grid) -> Result<Self> {
        Self::with_potential(params, grid, Potential::Quartic)
    }

    pub fn with_potential(params: ModelParams, grid: Grid, potential: Potential) -> Result<Self> {
        params.validate()?;
        let a = grid.spacing();
        let n_sites = grid.n_sites();
        let diagonal = grid.sample(|phi| {
            let mut e = 0.0;
            for i in 0..n_sites {
                let g = (phi[(i + 1) % n_sites] - phi[i]) / a;
                e += 0.5 * g * g + onsite(&params, potential, phi[i]);
            }
            a * e
        });
        if diagonal.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("potential is not finite on the grid"));
        }
        Ok(DiscreteHamiltonian {
            params,
            grid,
            potential,
            diagonal,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> Potential {
        self.potential
    }

    /// `a·Σ_i[½((φ_{i+1}−φ_i)/a)² + V(φ_i)]` per configuration point.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Same operator with different model parameters (e.g. another `l`).
    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        Self::with_potential(params, self.grid, self.potential)
    }

    fn kinetic_scale(&self) -> f64 {
        let h = self.grid.delta_phi();
        1.0 / (2.0 * self.grid.spacing() * h * h)
    }

    /// `out = (H + extra)x` for a real field with no connection. `extra` is
    /// an optional diagonal added to the potential.
    pub fn apply_real_into(&self, x: &[f64], extra: Option<&[f64]>, out: &mut [f64]) {
        let grid = &self.grid;
        let n = grid.n_phi();
        let c = self.kinetic_scale();
        for (j, o) in out.iter_mut().enumerate() {
            let mut d = self.diagonal[j] + 2.0 * c * grid.n_sites() as f64;
            if let Some(e) = extra {
                d += e[j];
            }
            *o = d * x[j];
        }
        for axis in 0..grid.n_sites() {
            let (outer, inner) = grid.axis_blocks(axis);
            for ob in 0..outer {
                for k in 0..n {
                    let base = (ob * n + k) * inner;
                    for r in 0..inner {
                        let j = base + r;
                        let mut s = 0.0;
                        if k > 0 {
                            s += x[j - inner];
                        }
                        if k + 1 < n {
                            s += x[j + inner];
                        }
                        out[j] -= c * s;
                    }
                }
            }
        }
    }

    /// For one lattice site the connection-free operator is tridiagonal;
    /// returns `(diagonal, off-diagonal)`.
    pub fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.grid.n_sites() != 1 {
            return None;
        }
        let c = self.kinetic_scale();
        let d = self.diagonal.iter().map(|v| v + 2.0 * c).collect();
        let e = vec![-c; self.grid.n_phi() - 1];
        Some((d, e))
    }
}

/// Value of the on-site potential at `phi`.
pub fn onsite(params: &ModelParams, potential: Potential, phi: f64) -> f64 {
    let x = match potential {
        Potential::Quartic => phi,
        Potential::Shifted { center } => phi - center,
        Potential::DoubleWell { center } => math::abs(phi) - center,
    };
    let x2 = x * x;
    0.5 * params.mass * params.mass * x2 + 0.25 * params.quartic * x2 * x2
}

/// `C_iΨ` on the links of `axis`.
pub fn covariant_derivative(psi: &WaveFunctional, gauge: &GaugeState, axis: usize) -> Result<Vec<Complex64>> {
    let grid = *psi.grid();
    grid.check_axis(axis)?;
    gauge.validate(&grid)?;
    let (outer, inner) = grid.axis_blocks(axis);
    let n = grid.n_phi();
    let scale = 1.0 / (grid.spacing() * grid.delta_phi());
    let a_phi = &gauge.a_phi[axis];
    let v = psi.values();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; grid.link_len()];
    for o in 0..outer {
        for k in 0..=n {
            for r in 0..inner {
                let link = (o * (n + 1) + k) * inner + r;
                let hi = if k < n { v[(o * n + k) * inner + r] } else { zero };
                let lo = if k > 0 { v[(o * n + k - 1) * inner + r] } else { zero };
                let u = transporter(a_phi[link], &grid);
                out[link] = (u * hi - lo) * scale;
            }
        }
    }
    Ok(out)
}

/// Adjoint `C_i†` mapping a link field back to points:
/// `(C†Φ)_m = (U_m^* Φ_m − Φ_{m+1})/(aΔφ)`.
pub fn covariant_adjoint(links: &[Complex64], gauge: &GaugeState, axis: usize, grid: &Grid) -> Result<Vec<Complex64>> {
    grid.check_axis(axis)?;
    grid.check_link_len(links.len())?;
    gauge.validate(grid)?;
    let (outer, inner) = grid.axis_blocks(axis);
    let n = grid.n_phi();
    let scale = 1.0 / (grid.spacing() * grid.delta_phi());
    let a_phi = &gauge.a_phi[axis];
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for o in 0..outer {
        for k in 0..n {
            for r in 0..inner {
                let lo = (o * (n + 1) + k) * inner + r;
                let hi = lo + inner;
                let u = transporter(a_phi[lo], grid);
                out[(o * n + k) * inner + r] = (u.conj() * links[lo] - links[hi]) * scale;
            }
        }
    }
    Ok(out)
}

/// `HΨ` with the connection `a_phi` (one link field per axis).
pub(crate) fn apply_with_links(
    values: &[Complex64],
    a_phi: &[Vec<f64>],
    h: &DiscreteHamiltonian,
    out: &mut [Complex64],
) {
    let grid = &h.grid;
    let n = grid.n_phi();
    let c = h.kinetic_scale();
    let zero = Complex64::new(0.0, 0.0);
    for (j, o) in out.iter_mut().enumerate() {
        *o = values[j] * (h.diagonal[j] + 2.0 * c * grid.n_sites() as f64);
    }
    for (axis, links) in a_phi.iter().enumerate() {
        let free = links.iter().all(|&v| v == 0.0);
        let (outer, inner) = grid.axis_blocks(axis);
        for ob in 0..outer {
            for k in 0..n {
                for r in 0..inner {
                    let j = (ob * n + k) * inner + r;
                    let lo_link = (ob * (n + 1) + k) * inner + r;
                    let hi_link = lo_link + inner;
                    let prev = if k > 0 { values[j - inner] } else { zero };
                    let next = if k + 1 < n { values[j + inner] } else { zero };
                    let s = if free {
                        prev + next
                    } else {
                        transporter(links[lo_link], grid).conj() * prev + transporter(links[hi_link], grid) * next
                    };
                    out[j] -= s * c;
                }
            }
        }
    }
}

/// `HΨ = (a/2)·Σ_i C_i†C_iΨ + diagonal·Ψ`.
pub fn apply_hamiltonian(psi: &WaveFunctional, gauge: &GaugeState, h: &DiscreteHamiltonian) -> Result<Vec<Complex64>> {
    if *psi.grid() != h.grid {
        return Err(Error::GridMismatch);
    }
    gauge.validate(&h.grid)?;
    let mut out = vec![Complex64::new(0.0, 0.0); h.grid.len()];
    apply_with_links(psi.values(), &gauge.a_phi, h, &mut out);
    Ok(out)
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest `|A_rc − conj(A_cr)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for c in r..self.n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }
}

/// Assembles `H` column by column from [`apply_hamiltonian`].
pub fn build_dense_hamiltonian(gauge: &GaugeState, h: &DiscreteHamiltonian, cap: usize) -> Result<DenseMatrix> {
    let m = h.grid.len();
    if m > cap {
        return Err(Error::DenseCapExceeded { size: m, cap });
    }
    gauge.validate(&h.grid)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut data = vec![zero; m * m];
    let mut unit = vec![zero; m];
    let mut col = vec![zero; m];
    for j in 0..m {
        unit[j] = Complex64::new(1.0, 0.0);
        apply_with_links(&unit, &gauge.a_phi, h, &mut col);
        for (r, v) in col.iter().enumerate() {
            data[r * m + j] = *v;
        }
        unit[j] = zero;
    }
    Ok(DenseMatrix { n: m, data })
}

/// `⟨Ψ|HΨ⟩` without any normalization requirement.
pub fn expectation(psi: &WaveFunctional, gauge: &GaugeState, h: &DiscreteHamiltonian) -> Result<Complex64> {
    let hpsi = apply_hamiltonian(psi, gauge, h)?;
    let s: Complex64 = psi.values().iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
    Ok(s * h.grid.measure_weight())
}

/// Real energy `⟨Ψ|HΨ⟩` of a normalized state.
pub fn energy_expectation(psi: &WaveFunctional, gauge: &GaugeState, h: &DiscreteHamiltonian) -> Result<f64> {
    let n2 = psi.norm2();
    if math::abs(n2 - 1.0) >= crate::state::NORMALIZED_TOL {
        return Err(Error::NotNormalized { norm2: n2 });
    }
    Ok(expectation(psi, gauge, h)?.re)
}
