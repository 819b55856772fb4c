//! Wave functionals, gauge connections, densities, charges and currents.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::config_space::{functional_integral, link_difference, Grid};
use crate::error::{Error, Result};
use crate::math;

/// The coupling `f` of the field-strength term, absorbed into `l`.
pub const COUPLING_F: f64 = 1.0;

/// Cell probabilities below this are clamped inside the logarithm.
pub const P_FLOOR: f64 = 1e-300;

/// Tolerance on `|norm² − 1|` for states that must be normalized.
pub const NORMALIZED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunctional {
    grid: Grid,
    values: Vec<Complex64>,
}

impl WaveFunctional {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(WaveFunctional { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        WaveFunctional {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        grid.check_len(values.len())?;
        let values = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Ok(WaveFunctional { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// `∫Dφ |Ψ|²`.
    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.measure_weight()
    }

    pub fn is_normalized(&self) -> bool {
        math::abs(self.norm2() - 1.0) < NORMALIZED_TOL
    }

    /// Rescales to unit norm. Fails for the zero state.
    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm2();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::NotNormalized { norm2: n2 });
        }
        let s = 1.0 / math::sqrt(n2);
        for z in &mut self.values {
            *z *= s;
        }
        Ok(())
    }

    /// `⟨self|other⟩ = ∫Dφ Ψ₁* Ψ₂`.
    pub fn inner(&self, other: &WaveFunctional) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.measure_weight())
    }
}

/// Connection and field strength on the configuration grid.
///
/// `a_t` is a point field. `a_phi[i]` and `e_field[i]` are link fields along
/// axis `i` (see [`crate::config_space`]).
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeState {
    pub a_t: Vec<f64>,
    pub a_phi: Vec<Vec<f64>>,
    pub e_field: Vec<Vec<f64>>,
}

impl GaugeState {
    pub fn zero(grid: &Grid) -> Self {
        GaugeState {
            a_t: vec![0.0; grid.len()],
            a_phi: vec![vec![0.0; grid.link_len()]; grid.n_sites()],
            e_field: vec![vec![0.0; grid.link_len()]; grid.n_sites()],
        }
    }

    pub fn new(grid: &Grid, a_t: Vec<f64>, a_phi: Vec<Vec<f64>>, e_field: Vec<Vec<f64>>) -> Result<Self> {
        let g = GaugeState { a_t, a_phi, e_field };
        g.validate(grid)?;
        Ok(g)
    }

    /// Stationary real gauge: `a_phi = 0`, `E = −∇a_t` on the links.
    pub fn stationary(grid: &Grid, a_t: Vec<f64>) -> Result<Self> {
        grid.check_len(a_t.len())?;
        let e_field = (0..grid.n_sites())
            .map(|axis| field_strength(&a_t, None, axis, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(GaugeState {
            a_t,
            a_phi: vec![vec![0.0; grid.link_len()]; grid.n_sites()],
            e_field,
        })
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        grid.check_len(self.a_t.len())?;
        for fields in [&self.a_phi, &self.e_field] {
            if fields.len() != grid.n_sites() {
                return Err(Error::SizeMismatch {
                    expected: grid.n_sites(),
                    found: fields.len(),
                });
            }
            for f in fields {
                grid.check_link_len(f.len())?;
            }
        }
        Ok(())
    }

    pub fn has_connection(&self) -> bool {
        self.a_phi.iter().any(|f| f.iter().any(|&v| v != 0.0))
    }
}

/// Parameters of the scalar theory and of the new coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mass: f64,
    pub quartic: f64,
    pub length_l: f64,
    /// Entropy parameter `S`, used in fixed-S mode and as the frozen value
    /// during time evolution.
    pub entropy_s: f64,
}

impl ModelParams {
    pub fn new(mass: f64, quartic: f64, length_l: f64, entropy_s: f64) -> Result<Self> {
        let p = ModelParams {
            mass,
            quartic,
            length_l,
            entropy_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_l > 0.0 && self.length_l.is_finite()) {
            return Err(Error::InvalidParameter("length_l must be positive"));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter("mass_m must be non-negative"));
        }
        if !(self.quartic >= 0.0 && self.quartic.is_finite()) {
            return Err(Error::InvalidParameter("quartic_lambda must be non-negative"));
        }
        if !self.entropy_s.is_finite() {
            return Err(Error::InvalidParameter("entropy_S must be finite"));
        }
        Ok(())
    }

    /// `f/l²`, the strength of the gauge coupling.
    pub fn coupling(&self) -> f64 {
        COUPLING_F / (self.length_l * self.length_l)
    }

    pub fn with_length(mut self, length_l: f64) -> Self {
        self.length_l = length_l;
        self
    }

    pub fn with_entropy(mut self, entropy_s: f64) -> Self {
        self.entropy_s = entropy_s;
        self
    }
}

/// `ρ = |Ψ|²` pointwise.
pub fn density(psi: &WaveFunctional) -> Vec<f64> {
    psi.values().iter().map(|z| z.norm_sqr()).collect()
}

/// Coarse-grained cell probability `p = ρ·w`.
pub fn cell_probability(rho: &[f64], grid: &Grid) -> Vec<f64> {
    let w = grid.measure_weight();
    rho.iter().map(|&r| r * w).collect()
}

/// `log p` with `p` clamped below at [`P_FLOOR`].
#[inline]
pub fn clamped_log(p: f64) -> f64 {
    math::ln(if p > P_FLOOR { p } else { P_FLOOR })
}

/// The evolution prefactor `P = 1 + S + log p`.
pub fn evolution_prefactor(rho: &[f64], s: f64, grid: &Grid) -> Vec<f64> {
    let w = grid.measure_weight();
    rho.iter().map(|&r| 1.0 + s + clamped_log(r * w)).collect()
}

/// Charge density `q = ρ(log p + S)` and total charge `Q = (f/l²)∫q`.
pub fn charge_density_and_total(rho: &[f64], s: f64, params: &ModelParams, grid: &Grid) -> Result<(Vec<f64>, f64)> {
    grid.check_len(rho.len())?;
    let w = grid.measure_weight();
    let q: Vec<f64> = rho.iter().map(|&r| r * (clamped_log(r * w) + s)).collect();
    let total = params.coupling() * functional_integral(&q, grid)?;
    Ok((q, total))
}

/// The `S` that makes the total charge vanish: the Shannon entropy of the
/// cell probabilities, `−Σ p log p`.
pub fn entropy_matching_s(rho: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_len(rho.len())?;
    let norm = functional_integral(rho, grid)?;
    if !(math::abs(norm - 1.0) < 1e-8) {
        return Err(Error::NotNormalized { norm2: norm });
    }
    let w = grid.measure_weight();
    let plogp: f64 = rho.iter().map(|&r| r * clamped_log(r * w)).sum::<f64>() * w;
    // Dividing by the computed norm makes Q vanish to rounding even when
    // the normalization is only good to 1e-8.
    Ok(-plogp / norm)
}

/// Gauge transformation of the third kind with the exact lattice rule for
/// the connection.
///
/// `Ψ' = e^{−iΛ}Ψ`, `𝒜_t' = 𝒜_t + ∂_tΛ` and `𝒜_φ' = 𝒜_φ + (Λ_k − Λ_{k−1})/(aΔφ)`
/// on interior links. Links touching the ghost layer keep their value: the
/// wave functional vanishes there, so they never couple to anything.
/// The field strength is gauge invariant and carried over unchanged.
pub fn gauge_transform(
    psi: &WaveFunctional,
    gauge: &GaugeState,
    lambda: &[f64],
    lambda_dot: &[f64],
) -> Result<(WaveFunctional, GaugeState)> {
    let grid = *psi.grid();
    grid.check_len(lambda.len())?;
    let shifts = (0..grid.n_sites())
        .map(|axis| gauge_link_increment(lambda, axis, &grid))
        .collect::<Result<Vec<_>>>()?;
    gauge_transform_with_connection(psi, gauge, lambda, lambda_dot, &shifts)
}

/// Like [`gauge_transform`] but with a caller-supplied connection shift per
/// axis, e.g. the analytic `∂Λ/∂φ` sampled at link midpoints.
pub fn gauge_transform_with_connection(
    psi: &WaveFunctional,
    gauge: &GaugeState,
    lambda: &[f64],
    lambda_dot: &[f64],
    connection_shift: &[Vec<f64>],
) -> Result<(WaveFunctional, GaugeState)> {
    let grid = *psi.grid();
    grid.check_len(lambda.len())?;
    grid.check_len(lambda_dot.len())?;
    gauge.validate(&grid)?;
    if connection_shift.len() != grid.n_sites() {
        return Err(Error::SizeMismatch {
            expected: grid.n_sites(),
            found: connection_shift.len(),
        });
    }
    let values = psi
        .values()
        .iter()
        .zip(lambda)
        .map(|(&z, &l)| z * Complex64::new(math::cos(l), -math::sin(l)))
        .collect();
    let a_t = gauge.a_t.iter().zip(lambda_dot).map(|(a, d)| a + d).collect();
    let mut a_phi = Vec::with_capacity(grid.n_sites());
    for (field, shift) in gauge.a_phi.iter().zip(connection_shift) {
        grid.check_link_len(shift.len())?;
        a_phi.push(field.iter().zip(shift).map(|(a, s)| a + s).collect());
    }
    Ok((
        WaveFunctional { grid, values },
        GaugeState {
            a_t,
            a_phi,
            e_field: gauge.e_field.clone(),
        },
    ))
}

/// Link increment `(Λ_k − Λ_{k−1})/(aΔφ)` on interior links, zero on the two
/// boundary links of each line.
pub fn gauge_link_increment(lambda: &[f64], axis: usize, grid: &Grid) -> Result<Vec<f64>> {
    let mut d = link_difference(lambda, axis, grid)?;
    let (outer, inner) = grid.axis_blocks(axis);
    let n = grid.n_phi();
    for o in 0..outer {
        for r in 0..inner {
            d[(o * (n + 1)) * inner + r] = 0.0;
            d[(o * (n + 1) + n) * inner + r] = 0.0;
        }
    }
    Ok(d)
}

/// Field strength `ℱ_i = ∂_t𝒜_φ_i − (link gradient of 𝒜_t)` on the links of
/// axis `i`. `a_phi_dot = None` means a static connection.
pub fn field_strength(a_t: &[f64], a_phi_dot: Option<&[f64]>, axis: usize, grid: &Grid) -> Result<Vec<f64>> {
    let mut f = link_difference(a_t, axis, grid)?;
    for v in &mut f {
        *v = -*v;
    }
    if let Some(dot) = a_phi_dot {
        grid.check_link_len(dot.len())?;
        for (v, d) in f.iter_mut().zip(dot) {
            *v += d;
        }
    }
    Ok(f)
}

/// Parallel transporter `e^{iaΔφ·𝒜}` of a link.
#[inline]
pub(crate) fn transporter(a: f64, grid: &Grid) -> Complex64 {
    let theta = grid.spacing() * grid.delta_phi() * a;
    Complex64::new(math::cos(theta), math::sin(theta))
}

/// Current on the links of `axis`: `J_k = Im(Ψ_{k−1}^* U_k Ψ_k)/(aΔφ)`.
///
/// This is `Im(Ψ*·C_iΨ)` evaluated on links, and it is the flux whose
/// divergence balances the time derivative of the charge density exactly.
pub fn current_density(psi: &WaveFunctional, gauge: &GaugeState, axis: usize) -> Result<Vec<f64>> {
    let grid = *psi.grid();
    grid.check_axis(axis)?;
    gauge.validate(&grid)?;
    Ok(link_current(psi.values(), &gauge.a_phi[axis], axis, &grid))
}

pub(crate) fn link_current(psi: &[Complex64], a_phi: &[f64], axis: usize, grid: &Grid) -> Vec<f64> {
    let (outer, inner) = grid.axis_blocks(axis);
    let n = grid.n_phi();
    let scale = 1.0 / (grid.spacing() * grid.delta_phi());
    let mut out = vec![0.0; grid.link_len()];
    for o in 0..outer {
        for k in 1..n {
            for r in 0..inner {
                let link = (o * (n + 1) + k) * inner + r;
                let lo = psi[(o * n + k - 1) * inner + r];
                let hi = psi[(o * n + k) * inner + r];
                let u = if a_phi[link] == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    transporter(a_phi[link], grid)
                };
                out[link] = (lo.conj() * u * hi).im * scale;
            }
        }
    }
    out
}

/// Marginal density of `φ_axis`: `ρ` summed over the other axes with their
/// measure, so that `Δφ·Σ_k m_k = ∫ρ`.
pub fn marginal(rho: &[f64], axis: usize, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_axis(axis)?;
    grid.check_len(rho.len())?;
    let w_rest = grid.measure_weight() / grid.delta_phi();
    let mut m = vec![0.0; grid.n_phi()];
    for (j, &r) in rho.iter().enumerate() {
        m[grid.coordinate(j, axis)] += r;
    }
    for v in &mut m {
        *v *= w_rest;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64) -> ModelParams {
        ModelParams::new(1.0, 0.0, l, 0.0).unwrap()
    }

    fn uniform(grid: &Grid) -> Vec<f64> {
        vec![1.0 / (grid.measure_weight() * grid.len() as f64); grid.len()]
    }

    #[test]
    fn uniform_state_density_and_probability() {
        let g = Grid::new(2, 1.0, 8, 2.0).unwrap();
        let amp = 1.0 / (g.measure_weight() * g.len() as f64).sqrt();
        let psi = WaveFunctional::from_real(g, &vec![amp; g.len()]).unwrap();
        let rho = density(&psi);
        assert!((functional_integral(&rho, &g).unwrap() - 1.0).abs() < 1e-14);
        let p = cell_probability(&rho, &g);
        for v in p {
            assert!((v - 1.0 / 64.0).abs() < 1e-16);
        }
        assert!(density(&WaveFunctional::zeros(g)).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn uniform_charge_closed_forms() {
        let g = Grid::new(1, 1.0, 32, 3.0).unwrap();
        let rho = uniform(&g);
        let m = g.len() as f64;
        let (q, total) = charge_density_and_total(&rho, m.ln(), &params(1.0), &g).unwrap();
        assert!(q.iter().all(|v| v.abs() < 1e-15));
        assert!(total.abs() < 1e-14);
        let (_, total) = charge_density_and_total(&rho, 0.0, &params(1.0), &g).unwrap();
        assert!((total + m.ln()).abs() < 1e-12);
        assert!((entropy_matching_s(&rho, &g).unwrap() - m.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_point_mass_is_zero() {
        let g = Grid::new(1, 1.0, 5, 1.0).unwrap();
        let mut rho = vec![0.0; 5];
        rho[2] = 1.0 / g.measure_weight();
        assert_eq!(entropy_matching_s(&rho, &g).unwrap(), 0.0);
        rho[2] *= 2.0;
        assert!(matches!(entropy_matching_s(&rho, &g), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn constant_gauge_leaves_potentials_untouched() {
        let g = Grid::new(2, 1.0, 6, 2.0).unwrap();
        let psi = WaveFunctional::new(
            g,
            (0..g.len())
                .map(|j| Complex64::new((j as f64).sin(), 0.1 * j as f64))
                .collect(),
        )
        .unwrap();
        let mut gauge = GaugeState::zero(&g);
        gauge.a_t = g.sample(|p| p[0] * p[1]);
        gauge.a_phi[1] = (0..g.link_len()).map(|k| 0.01 * k as f64).collect();
        let c = 0.7;
        let (psi2, gauge2) = gauge_transform(&psi, &gauge, &vec![c; g.len()], &vec![0.0; g.len()]).unwrap();
        assert_eq!(gauge2, gauge);
        let phase = Complex64::new(c.cos(), -c.sin());
        for (a, b) in psi2.values().iter().zip(psi.values()) {
            assert!((a - phase * b).norm() < 1e-15);
            assert!((a.norm_sqr() - b.norm_sqr()).abs() <= 4.0 * f64::EPSILON * b.norm_sqr());
        }
        let (id, gid) = gauge_transform(&psi, &gauge, &vec![0.0; g.len()], &vec![0.0; g.len()]).unwrap();
        assert_eq!(id, psi);
        assert_eq!(gid, gauge);
    }

    #[test]
    fn real_state_has_no_current() {
        let g = Grid::new(2, 1.0, 7, 2.0).unwrap();
        let psi = WaveFunctional::from_real(g, &g.sample(|p| (-p[0] * p[0] - 0.5 * p[1] * p[1]).exp())).unwrap();
        let gauge = GaugeState::zero(&g);
        for axis in 0..2 {
            assert!(current_density(&psi, &gauge, axis).unwrap().iter().all(|&j| j == 0.0));
        }
    }

    #[test]
    fn constant_connection_current_is_transported_density() {
        let g = Grid::new(1, 1.0, 21, 3.0).unwrap();
        let f = g.sample(|p| (-p[0] * p[0] / 2.0).exp());
        let psi = WaveFunctional::from_real(g, &f).unwrap();
        let mut gauge = GaugeState::zero(&g);
        let a = 0.4;
        gauge.a_phi[0] = vec![a; g.link_len()];
        let j = current_density(&psi, &gauge, 0).unwrap();
        let h = g.delta_phi();
        for k in 1..g.n_phi() {
            let expect = f[k - 1] * f[k] * (h * a).sin() / h;
            assert!((j[k] - expect).abs() < 1e-15);
        }
        assert_eq!(j[0], 0.0);
        assert_eq!(j[g.n_phi()], 0.0);
    }

    #[test]
    fn marginals_sum_to_norm() {
        let g = Grid::new(2, 1.0, 9, 2.0).unwrap();
        let rho = g.sample(|p| (-p[0] * p[0] - 2.0 * p[1] * p[1]).exp());
        let total = functional_integral(&rho, &g).unwrap();
        for axis in 0..2 {
            let m = marginal(&rho, axis, &g).unwrap();
            let s: f64 = m.iter().sum::<f64>() * g.delta_phi();
            assert!((s - total).abs() < 1e-13);
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(-1.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, -0.1, 1.0, 0.0).is_err());
        assert_eq!(params(2.0).coupling(), 0.25);
    }
}
