//! Stationary states of the coupled system.
//!
//! With `Ψ = e^{−iωt}Ψ_ω` and a real `Ψ_ω` the connection drops out and the
//! equations reduce to
//!
//! ```text
//! HΨ = (1 + S + log p)(ω − 𝒜_t)Ψ,     L𝒜_t = (f/l²)·ρ(log p + S)
//! ```
//!
//! which [`scf_solve`] iterates to self-consistency.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::config_space::{functional_integral, weighted_dot, weighted_norm, Grid};
use crate::dynamics::DEFAULT_PREFACTOR_FLOOR;
use crate::error::{Error, Result};
use crate::gauss_poisson::{scalar_potential, DEFAULT_TOLERANCE};
use crate::hamiltonian::{DiscreteHamiltonian, Potential};
use crate::linalg::{lanczos_lowest, Eigenpairs, SymTridiagonal};
use crate::math;
use crate::state::{charge_density_and_total, clamped_log, entropy_matching_s, ModelParams, WaveFunctional};

/// How `S` is chosen during the self-consistent iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EntropyMode {
    /// `S` is recomputed from `ρ` every iteration so that `Q = 0`.
    #[default]
    ChargeNeutral,
    /// `S` is a fixed parameter; `Q` is only reported.
    Fixed(f64),
}

/// Which frozen eigenproblem each iteration solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrozenForm {
    /// `(H + V_eff)Ψ = λΨ` with `V_eff = 𝒜_t − (S + log p)(ω_prev − 𝒜_t)`.
    /// Symmetric and well posed for any frozen density.
    #[default]
    Linearized,
    /// The pencil `(H + P𝒜_t)Ψ = ωPΨ`; needs `P > 0` everywhere.
    Pencil,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfConfig {
    pub mode: EntropyMode,
    pub mixing_alpha: f64,
    pub tol_omega: f64,
    pub tol_rho: f64,
    pub max_iter: usize,
    pub target_index: usize,
    pub poisson_tol: f64,
    pub frozen_form: FrozenForm,
    /// Average `ρ` with its mirror image each iteration when the potential
    /// is even. Keeps parity sectors from mixing through rounding.
    pub symmetrize: bool,
}

impl Default for ScfConfig {
    fn default() -> Self {
        ScfConfig {
            mode: EntropyMode::ChargeNeutral,
            mixing_alpha: 0.3,
            tol_omega: 1e-9,
            tol_rho: 1e-8,
            max_iter: 500,
            target_index: 0,
            poisson_tol: DEFAULT_TOLERANCE,
            frozen_form: FrozenForm::Linearized,
            symmetrize: true,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mixing_alpha > 0.0 && self.mixing_alpha <= 1.0) {
            return Err(Error::InvalidParameter("mixing_alpha must lie in (0, 1]"));
        }
        if !(self.tol_omega > 0.0 && self.tol_rho > 0.0 && self.poisson_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1"));
        }
        if let EntropyMode::Fixed(s) = self.mode {
            if !s.is_finite() {
                return Err(Error::InvalidParameter("entropy_S must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    /// Real `Ψ_ω` (imaginary parts are zero), `∫Ψ² = 1`.
    pub psi: WaveFunctional,
    pub omega: f64,
    pub a_t: Vec<f64>,
    pub s_value: f64,
    pub q_total: f64,
    /// `‖(1+S+log p)(ω−𝒜_t)Ψ − HΨ‖`.
    pub residual_eom: f64,
    /// `‖L𝒜_t − (f/l²)q‖`.
    pub residual_gauss: f64,
    /// `‖HΨ‖`, the natural scale of `residual_eom`.
    pub hpsi_norm: f64,
    pub iterations: usize,
    /// `|Δω|` per iteration.
    pub history: Vec<f64>,
}

impl StationaryState {
    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.values().iter().map(|z| z.norm_sqr()).collect()
    }

    /// The same state reflected through `φ = 0` on every axis.
    pub fn mirrored(&self) -> StationaryState {
        let grid = *self.grid();
        let psi_vals: Vec<Complex64> = (0..grid.len())
            .map(|j| self.psi.values()[grid.mirror_index(j)])
            .collect();
        let a_t = (0..grid.len()).map(|j| self.a_t[grid.mirror_index(j)]).collect();
        StationaryState {
            psi: WaveFunctional::new(grid, psi_vals).expect("grid-sized field"),
            a_t,
            history: Vec::new(),
            ..self.clone()
        }
    }
}

fn norm_sqr_real(x: &[f64], grid: &Grid) -> f64 {
    weighted_dot(x, x, grid)
}

fn reflect_average(rho: &mut [f64], grid: &Grid) {
    let copy = rho.to_vec();
    for (j, r) in rho.iter_mut().enumerate() {
        *r = 0.5 * (copy[j] + copy[grid.mirror_index(j)]);
    }
}

fn is_even(potential: Potential) -> bool {
    !matches!(potential, Potential::Shifted { .. })
}

/// Lowest `count` eigenpairs of `D(H + diag(extra))D`-type operators:
/// `op x = D·H·(D·x) + extra·x` with `D = scale` (identity if `None`).
/// Vectors are unit in the plain Euclidean norm.
fn frozen_pairs(
    h: &DiscreteHamiltonian,
    extra: &[f64],
    scale: Option<&[f64]>,
    count: usize,
    start: Option<&[f64]>,
) -> Result<Eigenpairs> {
    let m = h.grid().len();
    let count = count.min(m);
    if let Some((d, e)) = h.tridiagonal() {
        let (diag, off) = match scale {
            None => (d.iter().zip(extra).map(|(a, b)| a + b).collect(), e),
            Some(s) => (
                d.iter().zip(extra).zip(s).map(|((a, b), si)| si * si * a + b).collect(),
                e.iter().enumerate().map(|(i, v)| s[i] * s[i + 1] * v).collect(),
            ),
        };
        let t = SymTridiagonal::new(diag, off)?;
        let (values, vectors) = t.lowest(count);
        return Ok(Eigenpairs { values, vectors });
    }
    let mut tmp = vec![0.0; m];
    let mut hx = vec![0.0; m];
    lanczos_lowest(
        m,
        count,
        |x, out| match scale {
            None => {
                h.apply_real_into(x, Some(extra), out);
            }
            Some(s) => {
                for i in 0..m {
                    tmp[i] = s[i] * x[i];
                }
                h.apply_real_into(&tmp, None, &mut hx);
                for i in 0..m {
                    out[i] = s[i] * hx[i] + extra[i] * x[i];
                }
            }
        },
        start,
        1e-12,
    )
}

/// Prefactor `P = 1 + S + log p` with the `ε_P` clamp.
fn clamped_prefactor(rho: &[f64], s: f64, grid: &Grid) -> Vec<f64> {
    let w = grid.measure_weight();
    let eps = DEFAULT_PREFACTOR_FLOOR;
    rho.iter()
        .map(|&r| {
            let p = 1.0 + s + clamped_log(r * w);
            if math::abs(p) < eps {
                if p < 0.0 {
                    -eps
                } else {
                    eps
                }
            } else {
                p
            }
        })
        .collect()
}

/// Pencil eigenpairs, `P`-normalized and sign-fixed.
fn pencil_pairs(
    rho_frozen: &[f64],
    a_t: &[f64],
    s: f64,
    h: &DiscreteHamiltonian,
    count: usize,
    start: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let grid = *h.grid();
    grid.check_len(rho_frozen.len())?;
    grid.check_len(a_t.len())?;
    let p = clamped_prefactor(rho_frozen, s, &grid);
    let bad = p.iter().filter(|&&v| v <= 0.0).count();
    if bad > 0 {
        return Err(Error::IndefinitePrefactor {
            fraction: bad as f64 / p.len() as f64,
        });
    }
    let d: Vec<f64> = p.iter().map(|v| 1.0 / math::sqrt(*v)).collect();
    let start_y: Option<Vec<f64>> = start.map(|x| x.iter().zip(&p).map(|(a, b)| a * math::sqrt(*b)).collect());
    let pairs = frozen_pairs(h, a_t, Some(&d), count, start_y.as_deref())?;
    let inv_sqrt_w = 1.0 / math::sqrt(grid.measure_weight());
    let vectors = pairs
        .vectors
        .iter()
        .map(|y| {
            let mut psi: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a * b * inv_sqrt_w).collect();
            fix_sign(&mut psi);
            psi
        })
        .collect();
    Ok((pairs.values, vectors))
}

fn fix_sign(x: &mut [f64]) {
    let mut best = 0.0;
    for &v in x.iter() {
        if math::abs(v) > math::abs(best) {
            best = v;
        }
    }
    if best < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Solves `(H + P𝒜_t)Ψ = ωPΨ` for the frozen prefactor
/// `P = 1 + S + log p(ρ_frozen)` by the symmetric `P^{−1/2}` transform.
///
/// The eigenvector is normalized to `∫PΨ² = 1` and its largest-magnitude
/// entry is positive.
pub fn solve_frozen_eigenproblem(
    rho_frozen: &[f64],
    a_t_frozen: &[f64],
    s: f64,
    h: &DiscreteHamiltonian,
    target_index: usize,
) -> Result<(f64, WaveFunctional)> {
    let (values, vectors) = pencil_pairs(rho_frozen, a_t_frozen, s, h, target_index + 1, None)?;
    let psi = WaveFunctional::from_real(*h.grid(), &vectors[target_index])?;
    Ok((values[target_index], psi))
}

/// Linear eigenpairs of `H` (no connection), normalized to `∫Ψ² = 1`.
pub fn linear_eigenpairs(h: &DiscreteHamiltonian, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let grid = *h.grid();
    let zeros = vec![0.0; grid.len()];
    let pairs = frozen_pairs(h, &zeros, None, count, None)?;
    let s = 1.0 / math::sqrt(grid.measure_weight());
    let vectors = pairs
        .vectors
        .into_iter()
        .map(|mut v| {
            v.iter_mut().for_each(|x| *x *= s);
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok((pairs.values, vectors))
}

/// Residual `‖(1+S+log p)(ω−𝒜_t)Ψ − HΨ‖` of a real configuration, plus `‖HΨ‖`.
pub fn eom_residual(psi: &[f64], omega: f64, a_t: &[f64], s: f64, h: &DiscreteHamiltonian) -> Result<(f64, f64)> {
    let grid = *h.grid();
    grid.check_len(psi.len())?;
    grid.check_len(a_t.len())?;
    let w = grid.measure_weight();
    let mut hpsi = vec![0.0; grid.len()];
    h.apply_real_into(psi, None, &mut hpsi);
    let r: Vec<f64> = psi
        .iter()
        .zip(&hpsi)
        .zip(a_t)
        .map(|((&x, &hx), &a)| (1.0 + s + clamped_log(x * x * w)) * (omega - a) * x - hx)
        .collect();
    Ok((weighted_norm(&r, &grid), weighted_norm(&hpsi, &grid)))
}

fn poisson_residual(a_t: &[f64], rho: &[f64], s: f64, params: &ModelParams, grid: &Grid) -> Result<f64> {
    let (q, _) = charge_density_and_total(rho, s, params, grid)?;
    let lap = crate::config_space::config_laplacian(a_t, grid)?;
    let c = params.coupling();
    let r: Vec<f64> = lap.iter().zip(&q).map(|(l, q)| l - c * q).collect();
    Ok(weighted_norm(&r, grid))
}

fn select_s(mode: EntropyMode, rho: &[f64], grid: &Grid) -> Result<f64> {
    match mode {
        EntropyMode::ChargeNeutral => entropy_matching_s(rho, grid),
        EntropyMode::Fixed(s) => Ok(s),
    }
}

/// Everything one frozen solve needs from the current density.
struct FrozenStep {
    omega: f64,
    psi: Vec<f64>,
}

fn frozen_step(
    rho: &[f64],
    omega_prev: f64,
    psi_prev: &[f64],
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    config: &ScfConfig,
) -> Result<FrozenStep> {
    let grid = *h.grid();
    let w = grid.measure_weight();
    let s = select_s(config.mode, rho, &grid)?;
    let (a_t, _) = scalar_potential(rho, s, params, &grid, config.poisson_tol)?;
    let count = config.target_index + if h.tridiagonal().is_some() { 4 } else { 2 };
    let (values, mut vectors) = match config.frozen_form {
        FrozenForm::Linearized => {
            let v_eff: Vec<f64> = rho
                .iter()
                .zip(&a_t)
                .map(|(&r, &a)| a - (s + clamped_log(r * w)) * (omega_prev - a))
                .collect();
            let start: Vec<f64> = psi_prev.to_vec();
            let pairs = frozen_pairs(h, &v_eff, None, count, Some(&start))?;
            (pairs.values, pairs.vectors)
        }
        FrozenForm::Pencil => pencil_pairs(rho, &a_t, s, h, count, Some(psi_prev))?,
    };
    // Follow the state with the largest overlap with the previous iterate.
    let mut best = 0;
    let mut best_overlap = -1.0;
    for (i, v) in vectors.iter().enumerate() {
        let o = math::abs(weighted_dot(v, psi_prev, &grid)) / math::sqrt(norm_sqr_real(v, &grid));
        if o > best_overlap + 1e-12 {
            best_overlap = o;
            best = i;
        }
    }
    let mut psi = core::mem::take(&mut vectors[best]);
    let n = math::sqrt(norm_sqr_real(&psi, &grid));
    let sign = if weighted_dot(&psi, psi_prev, &grid) < 0.0 {
        -1.0
    } else {
        1.0
    };
    psi.iter_mut().for_each(|v| *v *= sign / n);
    Ok(FrozenStep {
        omega: values[best],
        psi,
    })
}

/// Assembles the reported state from a converged (or final) iterate.
fn finish_state(
    psi: Vec<f64>,
    omega: f64,
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    config: &ScfConfig,
    iterations: usize,
    history: Vec<f64>,
) -> Result<StationaryState> {
    let grid = *h.grid();
    let mut rho: Vec<f64> = psi.iter().map(|v| v * v).collect();
    if config.symmetrize && is_even(h.potential()) {
        reflect_average(&mut rho, &grid);
    }
    let s = select_s(config.mode, &rho, &grid)?;
    let (a_t, q_total) = scalar_potential(&rho, s, params, &grid, config.poisson_tol)?;
    let (residual_eom, hpsi_norm) = eom_residual(&psi, omega, &a_t, s, h)?;
    let residual_gauss = poisson_residual(&a_t, &rho, s, params, &grid)?;
    Ok(StationaryState {
        psi: WaveFunctional::from_real(grid, &psi)?,
        omega,
        a_t,
        s_value: s,
        q_total,
        residual_eom,
        residual_gauss,
        hpsi_norm,
        iterations,
        history,
    })
}

/// Self-consistent solution of the stationary equations.
///
/// Each iteration updates `S` (charge-neutral mode), solves the Poisson
/// equation for `𝒜_t`, solves the frozen eigenproblem, and mixes the new
/// density linearly into the old one.
pub fn scf_solve(
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    config: &ScfConfig,
    initial_psi: Option<&WaveFunctional>,
) -> Result<StationaryState> {
    config.validate()?;
    params.validate()?;
    let grid = *h.grid();
    let w = grid.measure_weight();
    let symmetrize = config.symmetrize && is_even(h.potential());

    let (mut omega, mut psi) = match initial_psi {
        Some(p) => {
            if *p.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let mut x = p.real_parts();
            let n = math::sqrt(norm_sqr_real(&x, &grid));
            if !(n > 0.0) {
                return Err(Error::NotNormalized { norm2: 0.0 });
            }
            x.iter_mut().for_each(|v| *v /= n);
            let mut hx = vec![0.0; grid.len()];
            h.apply_real_into(&x, None, &mut hx);
            (weighted_dot(&x, &hx, &grid), x)
        }
        None => {
            let (values, mut vectors) = linear_eigenpairs(h, config.target_index + 1)?;
            (values[config.target_index], vectors.swap_remove(config.target_index))
        }
    };
    let mut rho: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let mut history = Vec::new();

    for it in 1..=config.max_iter {
        if symmetrize {
            reflect_average(&mut rho, &grid);
        }
        let step = frozen_step(&rho, omega, &psi, params, h, config)?;
        let d_omega = math::abs(step.omega - omega);
        let mut d_rho = 0.0;
        for (r, x) in rho.iter_mut().zip(&step.psi) {
            let new = x * x;
            d_rho += math::abs(new - *r);
            *r += config.mixing_alpha * (new - *r);
        }
        d_rho *= w;
        history.push(d_omega);
        omega = step.omega;
        psi = step.psi;
        if !(omega.is_finite()) {
            return Err(Error::ScfNotConverged {
                iterations: it,
                history,
            });
        }
        if d_omega < config.tol_omega && d_rho < config.tol_rho {
            return finish_state(psi, omega, params, h, config, it, history);
        }
    }
    Err(Error::ScfNotConverged {
        iterations: config.max_iter,
        history,
    })
}

/// One unmixed iteration from a converged state; returns the new `ω`.
pub fn refine_once(
    state: &StationaryState,
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    config: &ScfConfig,
) -> Result<f64> {
    let rho = state.density();
    let psi = state.psi.real_parts();
    Ok(frozen_step(&rho, state.omega, &psi, params, h, config)?.omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthogonalityReport {
    /// Relation evaluated with each state's own `S`.
    pub value: f64,
    /// Relation evaluated with the mean of the two `S` values in both brackets.
    pub value_shared_s: f64,
    /// `‖Ψ₁‖·‖Ψ₂‖·max|ω|`.
    pub scale: f64,
}

fn orthogonality_value(a: &StationaryState, b: &StationaryState, sa: f64, sb: f64) -> f64 {
    let grid = a.grid();
    let w = grid.measure_weight();
    let mut acc = 0.0;
    for j in 0..grid.len() {
        let x = a.psi.values()[j].re;
        let y = b.psi.values()[j].re;
        let pa = (1.0 + sa + clamped_log(x * x * w)) * (a.omega - a.a_t[j]);
        let pb = (1.0 + sb + clamped_log(y * y * w)) * (b.omega - b.a_t[j]);
        acc += x * y * (pa - pb);
    }
    acc * w
}

/// Evaluates `∫Ψ₁Ψ₂[(1+S₁+log p₁)(ω₁−𝒜_{t1}) − (1+S₂+log p₂)(ω₂−𝒜_{t2})]`.
pub fn orthogonality_check(a: &StationaryState, b: &StationaryState) -> Result<OrthogonalityReport> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let shared = 0.5 * (a.s_value + b.s_value);
    let scale = math::sqrt(a.psi.norm2()) * math::sqrt(b.psi.norm2()) * math::abs(a.omega).max(math::abs(b.omega));
    Ok(OrthogonalityReport {
        value: orthogonality_value(a, b, a.s_value, b.s_value),
        value_shared_s: orthogonality_value(a, b, shared, shared),
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrRow {
    pub l: f64,
    pub omega_scf: f64,
    pub omega_linear: f64,
    pub delta_omega: f64,
    pub s_value: f64,
    pub q_total: f64,
    pub iterations: usize,
    pub residual_eom: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrScan {
    pub rows: Vec<IrRow>,
    pub omega_linear: f64,
    /// Least-squares slope of `log|Δω|` against `log l` over converged rows.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Rows where `|Δω|` grew compared with the previous converged row.
    pub monotone_violations: usize,
}

/// Least-squares line through `(x, y)`; `None` for fewer than two points.
pub fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Ground-state frequency against the coupling length `l`.
pub fn ir_limit_scan(
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    l_values: &[f64],
    config: &ScfConfig,
) -> Result<IrScan> {
    if l_values.len() < 4 {
        return Err(Error::InvalidParameter("ir scan needs at least 4 values of l"));
    }
    if l_values.windows(2).any(|p| !(p[0] < p[1])) || !(l_values[0] > 0.0) {
        return Err(Error::InvalidParameter("l values must be positive and ascending"));
    }
    let (values, _) = linear_eigenpairs(h, config.target_index + 1)?;
    let omega_linear = values[config.target_index];
    let mut rows = Vec::with_capacity(l_values.len());
    for &l in l_values {
        let p = params.with_length(l);
        let hl = h.with_params(p)?;
        let row = match scf_solve(&p, &hl, config, None) {
            Ok(st) => IrRow {
                l,
                omega_scf: st.omega,
                omega_linear,
                delta_omega: st.omega - omega_linear,
                s_value: st.s_value,
                q_total: st.q_total,
                iterations: st.iterations,
                residual_eom: st.residual_eom,
                converged: true,
            },
            Err(e) => {
                log::warn!("scf failed at l = {l}: {e}");
                let iterations = match e {
                    Error::ScfNotConverged { iterations, .. } => iterations,
                    _ => 0,
                };
                IrRow {
                    l,
                    omega_scf: f64::NAN,
                    omega_linear,
                    delta_omega: f64::NAN,
                    s_value: f64::NAN,
                    q_total: f64::NAN,
                    iterations,
                    residual_eom: f64::NAN,
                    converged: false,
                }
            }
        };
        rows.push(row);
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged && r.delta_omega != 0.0)
        .map(|r| (math::ln(r.l), math::ln(math::abs(r.delta_omega))))
        .collect();
    let fit = fit_line(&points);
    let mut monotone_violations = 0;
    let mut last: Option<f64> = None;
    for r in rows.iter().filter(|r| r.converged) {
        let d = math::abs(r.delta_omega);
        if let Some(prev) = last {
            if d > prev {
                monotone_violations += 1;
            }
        }
        last = Some(d);
    }
    Ok(IrScan {
        rows,
        omega_linear,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        monotone_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalResult {
    pub sigma: f64,
    pub omega: f64,
    pub omega_at_lower: f64,
    pub omega_at_upper: f64,
    pub evaluations: usize,
}

/// Generalized Rayleigh quotient `⟨Ψ(H + P𝒜_t)Ψ⟩/⟨ΨPΨ⟩` of the Gaussian
/// `Ψ ∝ exp(−φ²/4σ²)` with self-consistent `S` and `𝒜_t`.
pub fn gaussian_rayleigh_quotient(
    sigma: f64,
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    poisson_tol: f64,
) -> Result<f64> {
    let grid = *h.grid();
    if grid.n_sites() != 1 {
        return Err(Error::UnsupportedSites {
            needed: "exactly 1",
            found: grid.n_sites(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter("sigma must be positive"));
    }
    let w = grid.measure_weight();
    let mut psi = grid.sample(|p| libm::exp(-p[0] * p[0] / (4.0 * sigma * sigma)));
    let n = math::sqrt(norm_sqr_real(&psi, &grid));
    if !(n > 0.0) {
        return Err(Error::InvalidParameter("gaussian vanishes on the grid"));
    }
    psi.iter_mut().for_each(|v| *v /= n);
    let rho: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let s = entropy_matching_s(&rho, &grid)?;
    let (a_t, _) = scalar_potential(&rho, s, params, &grid, poisson_tol)?;
    let mut hpsi = vec![0.0; grid.len()];
    h.apply_real_into(&psi, None, &mut hpsi);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..grid.len() {
        let p = 1.0 + s + clamped_log(rho[j] * w);
        num += psi[j] * hpsi[j] + p * a_t[j] * rho[j];
        den += p * rho[j];
    }
    Ok(num / den)
}

/// Golden-section minimization of [`gaussian_rayleigh_quotient`] over `σ`
/// to relative tolerance `rel_tol`.
pub fn variational_gaussian(
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    bracket: (f64, f64),
    rel_tol: f64,
    poisson_tol: f64,
) -> Result<VariationalResult> {
    let (lo0, hi0) = bracket;
    if !(lo0 > 0.0 && hi0 > lo0) {
        return Err(Error::BracketFailure);
    }
    let f = |s: f64| gaussian_rayleigh_quotient(s, params, h, poisson_tol);
    let omega_at_lower = f(lo0)?;
    let omega_at_upper = f(hi0)?;
    let g = 0.5 * (math::sqrt(5.0) - 1.0);
    let (mut a, mut b) = (lo0, hi0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evaluations = 4;
    while b - a > rel_tol * 0.5 * (a + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
        if evaluations > 10_000 {
            return Err(Error::BracketFailure);
        }
    }
    let sigma = 0.5 * (a + b);
    let omega = f(sigma)?;
    evaluations += 1;
    if !(omega < omega_at_lower && omega < omega_at_upper) {
        return Err(Error::BracketFailure);
    }
    Ok(VariationalResult {
        sigma,
        omega,
        omega_at_lower,
        omega_at_upper,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpositionReport {
    /// Residuals of the two parts against the Hamiltonian used for the check.
    pub individual: [f64; 2],
    pub combined: f64,
    /// `max |Ψ₁Ψ₂|`.
    pub overlap: f64,
    /// `3·(r₁ + r₂) + 1e−8`.
    pub bound: f64,
    pub passed: bool,
}

/// Residual of `Ψ = (Ψ₁+Ψ₂)/‖Ψ₁+Ψ₂‖` with `𝒜_t = 𝒜_{t1} + 𝒜_{t2}`, common
/// `ω = ω₁`, and `S` chosen by `mode` for the combined density. No overlap
/// check; see [`superposition_check`].
pub fn superposition_residual(
    a: &StationaryState,
    b: &StationaryState,
    h: &DiscreteHamiltonian,
    mode: EntropyMode,
) -> Result<SuperpositionReport> {
    let grid = *h.grid();
    if *a.grid() != grid || *b.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let r1 = eom_residual(&a.psi.real_parts(), a.omega, &a.a_t, a.s_value, h)?.0;
    let r2 = if b.psi.norm2() > 0.0 {
        eom_residual(&b.psi.real_parts(), b.omega, &b.a_t, b.s_value, h)?.0
    } else {
        0.0
    };
    let mut psi: Vec<f64> = a
        .psi
        .values()
        .iter()
        .zip(b.psi.values())
        .map(|(x, y)| x.re + y.re)
        .collect();
    let n = math::sqrt(norm_sqr_real(&psi, &grid));
    psi.iter_mut().for_each(|v| *v /= n);
    let rho: Vec<f64> = psi.iter().map(|v| v * v).collect();
    let s = select_s(mode, &rho, &grid)?;
    let a_t: Vec<f64> = a.a_t.iter().zip(&b.a_t).map(|(x, y)| x + y).collect();
    let combined = eom_residual(&psi, a.omega, &a_t, s, h)?.0;
    let overlap = a
        .psi
        .values()
        .iter()
        .zip(b.psi.values())
        .map(|(x, y)| math::abs(x.re * y.re))
        .fold(0.0, f64::max);
    let bound = 3.0 * (r1 + r2) + 1e-8;
    Ok(SuperpositionReport {
        individual: [r1, r2],
        combined,
        overlap,
        bound,
        passed: combined <= bound,
    })
}

/// Weak superposition of two non-overlapping stationary states.
pub fn superposition_check(
    a: &StationaryState,
    b: &StationaryState,
    h: &DiscreteHamiltonian,
    mode: EntropyMode,
) -> Result<SuperpositionReport> {
    let report = superposition_residual(a, b, h, mode)?;
    if report.overlap >= 1e-12 {
        return Err(Error::OverlappingStates {
            overlap: report.overlap,
        });
    }
    Ok(report)
}

/// Solves a single-well ground state centred at `−separation` and pairs it
/// with its mirror image; returns both and the double-well Hamiltonian.
pub fn mirrored_pair(
    params: &ModelParams,
    grid: Grid,
    separation: f64,
    config: &ScfConfig,
) -> Result<(StationaryState, StationaryState, DiscreteHamiltonian)> {
    let single = DiscreteHamiltonian::with_potential(*params, grid, Potential::Shifted { center: -separation })?;
    let left = scf_solve(params, &single, config, None)?;
    let right = left.mirrored();
    let double = DiscreteHamiltonian::with_potential(*params, grid, Potential::DoubleWell { center: separation })?;
    Ok((left, right, double))
}

/// `∫Dφ Ψ₁Ψ₂`, mostly for tests and reports.
pub fn real_overlap(a: &WaveFunctional, b: &WaveFunctional) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let prod: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x.re * y.re).collect();
    functional_integral(&prod, a.grid())
}
