//! Time evolution of the coupled system in temporal gauge (`𝒜_t = 0`):
//!
//! ```text
//! ∂_tΨ   = −i·HΨ / P,     P = 1 + S + log p
//! ∂_t𝒜_φ = ℱ
//! ∂_tℱ   = (f/l²)·J
//! ```
//!
//! With link currents and link fields, `∂_t q = −a·Σ_i div_i J_i` holds
//! exactly before time discretization, so the Gauss defect and `∫q` only
//! drift at the order of the RK4 scheme (or where the prefactor is clamped).

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::config_space::{add_link_divergence, functional_integral, weighted_norm, Grid};
use crate::error::{Error, Result};
use crate::gauss_poisson::{gauss_residual, initial_longitudinal_field};
use crate::hamiltonian::{apply_with_links, DiscreteHamiltonian};
use crate::math;
use crate::state::{
    charge_density_and_total, clamped_log, density, link_current, marginal, GaugeState, ModelParams, WaveFunctional,
};

pub const DEFAULT_PREFACTOR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub psi: WaveFunctional,
    /// Connection on the links of each axis.
    pub a_phi: Vec<Vec<f64>>,
    /// Field strength on the links of each axis.
    pub e_field: Vec<Vec<f64>>,
    pub time: f64,
    /// `S`, frozen at its initial value.
    pub s_param: f64,
}

impl EvolutionState {
    /// Temporal-gauge initial data: no connection, longitudinal field from
    /// the Gauss law.
    pub fn new(psi: WaveFunctional, s: f64, params: &ModelParams, poisson_tol: f64) -> Result<Self> {
        let grid = *psi.grid();
        let rho = density(&psi);
        let e_field = initial_longitudinal_field(&rho, s, params, &grid, poisson_tol)?;
        Ok(EvolutionState {
            psi,
            a_phi: vec![vec![0.0; grid.link_len()]; grid.n_sites()],
            e_field,
            time: 0.0,
            s_param: s,
        })
    }

    /// Maps a stationary configuration `(Ψ_ω, 𝒜_t)` to temporal gauge at
    /// `t = 0`: the connection starts at zero and `ℱ = −∇𝒜_t`.
    pub fn from_stationary(psi: WaveFunctional, a_t: &[f64], s: f64) -> Result<Self> {
        let grid = *psi.grid();
        let gauge = GaugeState::stationary(&grid, a_t.to_vec())?;
        Ok(EvolutionState {
            psi,
            a_phi: gauge.a_phi,
            e_field: gauge.e_field,
            time: 0.0,
            s_param: s,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    /// The gauge fields as a [`GaugeState`] (with `𝒜_t = 0`).
    pub fn gauge(&self) -> GaugeState {
        GaugeState {
            a_t: vec![0.0; self.grid().len()],
            a_phi: self.a_phi.clone(),
            e_field: self.e_field.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.gauge().validate(self.grid())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// The full nonlinear, gauge-coupled system.
    #[default]
    Full,
    /// `P ≡ 1` and the connection frozen: plain linear Schrödinger evolution.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionOptions {
    pub coupling: Coupling,
    /// `ε_P`: prefactors with `|P| < ε_P` are replaced by `sign(P)·ε_P`.
    pub prefactor_floor: f64,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions {
            coupling: Coupling::Full,
            prefactor_floor: DEFAULT_PREFACTOR_FLOOR,
        }
    }
}

impl EvolutionOptions {
    pub fn linear() -> Self {
        EvolutionOptions {
            coupling: Coupling::Linear,
            ..Self::default()
        }
    }
}

/// Time derivatives of the evolved fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub psi: Vec<Complex64>,
    pub a_phi: Vec<Vec<f64>>,
    pub e_field: Vec<Vec<f64>>,
    /// Points where the prefactor had to be clamped.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Fields {
    psi: Vec<Complex64>,
    a: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
}

impl Fields {
    fn zeros_like(other: &Fields) -> Fields {
        Fields {
            psi: vec![Complex64::new(0.0, 0.0); other.psi.len()],
            a: other.a.iter().map(|f| vec![0.0; f.len()]).collect(),
            e: other.e.iter().map(|f| vec![0.0; f.len()]).collect(),
        }
    }

    /// `self = base + c·k`.
    fn assign_step(&mut self, base: &Fields, c: f64, k: &Fields) {
        for ((o, b), d) in self.psi.iter_mut().zip(&base.psi).zip(&k.psi) {
            *o = b + d * c;
        }
        for (group, (bg, kg)) in [(&mut self.a, (&base.a, &k.a)), (&mut self.e, (&base.e, &k.e))] {
            for ((o, b), d) in group.iter_mut().zip(bg).zip(kg) {
                for ((ov, bv), dv) in o.iter_mut().zip(b).zip(d) {
                    *ov = bv + c * dv;
                }
            }
        }
    }

    /// `self += c·k`.
    fn accumulate(&mut self, c: f64, k: &Fields) {
        for (o, d) in self.psi.iter_mut().zip(&k.psi) {
            *o += d * c;
        }
        for (group, kg) in [(&mut self.a, &k.a), (&mut self.e, &k.e)] {
            for (o, d) in group.iter_mut().zip(kg) {
                for (ov, dv) in o.iter_mut().zip(d) {
                    *ov += c * dv;
                }
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.psi.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.a.iter().chain(&self.e).flatten().all(|v| v.is_finite())
    }
}

struct Rhs<'a> {
    h: &'a DiscreteHamiltonian,
    s: f64,
    coupling: f64,
    options: EvolutionOptions,
    hpsi: Vec<Complex64>,
}

impl Rhs<'_> {
    fn eval(&mut self, y: &Fields, out: &mut Fields) -> usize {
        let grid = *self.h.grid();
        apply_with_links(&y.psi, &y.a, self.h, &mut self.hpsi);
        match self.options.coupling {
            Coupling::Linear => {
                for (o, hz) in out.psi.iter_mut().zip(&self.hpsi) {
                    *o = Complex64::new(hz.im, -hz.re);
                }
                out.a
                    .iter_mut()
                    .chain(out.e.iter_mut())
                    .flatten()
                    .for_each(|v| *v = 0.0);
                0
            }
            Coupling::Full => {
                let w = grid.measure_weight();
                let eps = self.options.prefactor_floor;
                let mut clamped = 0;
                for ((o, hz), z) in out.psi.iter_mut().zip(&self.hpsi).zip(&y.psi) {
                    let mut p = 1.0 + self.s + clamped_log(z.norm_sqr() * w);
                    if math::abs(p) < eps {
                        p = if p < 0.0 { -eps } else { eps };
                        clamped += 1;
                    }
                    *o = Complex64::new(hz.im / p, -hz.re / p);
                }
                for (o, e) in out.a.iter_mut().zip(&y.e) {
                    o.copy_from_slice(e);
                }
                for (axis, o) in out.e.iter_mut().enumerate() {
                    let j = link_current(&y.psi, &y.a[axis], axis, &grid);
                    for (ov, jv) in o.iter_mut().zip(j) {
                        *ov = self.coupling * jv;
                    }
                }
                clamped
            }
        }
    }
}

fn check_compatible(state: &EvolutionState, h: &DiscreteHamiltonian) -> Result<()> {
    if state.grid() != h.grid() {
        return Err(Error::GridMismatch);
    }
    state.validate()
}

/// Right-hand side of the coupled system at `state`.
pub fn coupled_rhs(
    state: &EvolutionState,
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    options: &EvolutionOptions,
) -> Result<Derivatives> {
    check_compatible(state, h)?;
    let y = Fields {
        psi: state.psi.values().to_vec(),
        a: state.a_phi.clone(),
        e: state.e_field.clone(),
    };
    let mut out = Fields::zeros_like(&y);
    let mut rhs = Rhs {
        h,
        s: state.s_param,
        coupling: params.coupling(),
        options: *options,
        hpsi: vec![Complex64::new(0.0, 0.0); y.psi.len()],
    };
    let clamped = rhs.eval(&y, &mut out);
    Ok(Derivatives {
        psi: out.psi,
        a_phi: out.a,
        e_field: out.e,
        clamped,
    })
}

/// One row of the evolution monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub norm2: f64,
    /// `∫Dφ ρ(log p + S)`.
    pub charge_integral: f64,
    /// `(f/l²)·charge_integral`.
    pub total_q: f64,
    pub gauss_residual: f64,
    pub continuity_residual: f64,
    /// `⟨Ψ|HΨ⟩/⟨Ψ|Ψ⟩` with the current connection.
    pub energy: f64,
    pub overlap_with_initial: Complex64,
    /// Prefactor clamps accumulated since the start of the run.
    pub clamp_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub state: EvolutionState,
    pub trace: Vec<TraceRecord>,
    pub clamp_count: usize,
}

/// A run that stopped early; carries the last good state and its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionFailure {
    pub error: Error,
    pub last_good: Option<Box<EvolutionState>>,
    pub trace: Vec<TraceRecord>,
}

impl From<Error> for EvolutionFailure {
    fn from(error: Error) -> Self {
        EvolutionFailure {
            error,
            last_good: None,
            trace: Vec::new(),
        }
    }
}

/// Charge density and the flux divergence `a·Σ_i div_i J_i` of a state.
struct ContinuitySnapshot {
    q: Vec<f64>,
    flux_div: Vec<f64>,
}

fn continuity_snapshot(
    psi: &[Complex64],
    a_phi: &[Vec<f64>],
    s: f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<ContinuitySnapshot> {
    let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let (q, _) = charge_density_and_total(&rho, s, params, grid)?;
    let mut flux_div = vec![0.0; grid.len()];
    for (axis, a) in a_phi.iter().enumerate() {
        let j = link_current(psi, a, axis, grid);
        add_link_divergence(&j, axis, grid, grid.spacing(), &mut flux_div);
    }
    Ok(ContinuitySnapshot { q, flux_div })
}

/// `‖∂_t q + a·Σ div J‖` with `∂_t q` from the given difference weights.
fn continuity_norm(weights: &[(f64, &ContinuitySnapshot)], at: &ContinuitySnapshot, grid: &Grid) -> f64 {
    let mut r = at.flux_div.clone();
    for (c, snap) in weights {
        for (rv, qv) in r.iter_mut().zip(&snap.q) {
            *rv += c * qv;
        }
    }
    weighted_norm(&r, grid)
}

/// Continuity residual at the interior records of equally spaced states,
/// using central differences in time.
pub fn continuity_residual(states: &[EvolutionState], params: &ModelParams) -> Result<Vec<f64>> {
    if states.len() < 3 {
        return Err(Error::InsufficientRecords {
            needed: 3,
            found: states.len(),
        });
    }
    let grid = *states[0].grid();
    let snaps = states
        .iter()
        .map(|st| {
            if *st.grid() != grid {
                return Err(Error::GridMismatch);
            }
            continuity_snapshot(st.psi.values(), &st.a_phi, st.s_param, params, &grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(states.len() - 2);
    for i in 1..states.len() - 1 {
        let dt = states[i + 1].time - states[i - 1].time;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("records must have increasing times"));
        }
        let c = 1.0 / dt;
        out.push(continuity_norm(
            &[(c, &snaps[i + 1]), (-c, &snaps[i - 1])],
            &snaps[i],
            &grid,
        ));
    }
    Ok(out)
}

/// Builds trace records and fills in their continuity residuals as later
/// records arrive.
struct Recorder<'a> {
    params: &'a ModelParams,
    h: &'a DiscreteHamiltonian,
    initial: Vec<Complex64>,
    s: f64,
    spacing: f64,
    trace: Vec<TraceRecord>,
    head: Vec<ContinuitySnapshot>,
    window: Vec<ContinuitySnapshot>,
    hpsi: Vec<Complex64>,
}

impl<'a> Recorder<'a> {
    fn record(&mut self, y: &Fields, time: f64, clamp_count: usize) -> Result<()> {
        let grid = *self.h.grid();
        let w = grid.measure_weight();
        let rho: Vec<f64> = y.psi.iter().map(|z| z.norm_sqr()).collect();
        let norm2 = functional_integral(&rho, &grid)?;
        let (q, total_q) = charge_density_and_total(&rho, self.s, self.params, &grid)?;
        let charge_integral = functional_integral(&q, &grid)?;
        let gauss = gauss_residual(&y.e, &rho, self.s, self.params, &grid)?;
        apply_with_links(&y.psi, &y.a, self.h, &mut self.hpsi);
        let num: f64 = y
            .psi
            .iter()
            .zip(&self.hpsi)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            * w;
        let energy = if norm2 > 0.0 { num / norm2 } else { 0.0 };
        let overlap: Complex64 = self
            .initial
            .iter()
            .zip(&y.psi)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * w;
        self.trace.push(TraceRecord {
            time,
            norm2,
            charge_integral,
            total_q,
            gauss_residual: gauss,
            continuity_residual: 0.0,
            energy,
            overlap_with_initial: overlap,
            clamp_count,
        });
        let snap = continuity_snapshot(&y.psi, &y.a, self.s, self.params, &grid)?;
        if self.head.len() < 3 {
            self.head.push(ContinuitySnapshot {
                q: snap.q.clone(),
                flux_div: snap.flux_div.clone(),
            });
        }
        self.window.push(snap);
        if self.window.len() > 3 {
            self.window.remove(0);
        }
        let n = self.trace.len();
        let c = 1.0 / (2.0 * self.spacing);
        if n == 3 {
            let h = &self.head;
            self.trace[0].continuity_residual =
                continuity_norm(&[(-3.0 * c, &h[0]), (4.0 * c, &h[1]), (-c, &h[2])], &h[0], &grid);
        }
        if n >= 3 {
            let wdw = &self.window;
            self.trace[n - 2].continuity_residual = continuity_norm(&[(c, &wdw[2]), (-c, &wdw[0])], &wdw[1], &grid);
        }
        Ok(())
    }

    fn finish(&mut self) {
        let grid = *self.h.grid();
        let n = self.trace.len();
        let c = 1.0 / (2.0 * self.spacing);
        if n >= 3 {
            let wdw = &self.window;
            self.trace[n - 1].continuity_residual =
                continuity_norm(&[(3.0 * c, &wdw[2]), (-4.0 * c, &wdw[1]), (c, &wdw[0])], &wdw[2], &grid);
        } else if n == 2 {
            let wdw = &self.window;
            let c = 1.0 / self.spacing;
            for (i, at) in [(0usize, &wdw[0]), (1, &wdw[1])] {
                self.trace[i].continuity_residual = continuity_norm(&[(c, &wdw[1]), (-c, &wdw[0])], at, &grid);
            }
        }
    }
}

/// Classical RK4 integration of the coupled system, recording a trace
/// every `record_stride` steps (including the initial state).
pub fn evolve(
    state: &EvolutionState,
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    dt: f64,
    n_steps: usize,
    record_stride: usize,
    options: &EvolutionOptions,
) -> core::result::Result<Evolution, EvolutionFailure> {
    check_compatible(state, h)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter("dt must be positive").into());
    }
    if record_stride == 0 {
        return Err(Error::InvalidParameter("record_stride must be at least 1").into());
    }
    if !(options.prefactor_floor > 0.0) {
        return Err(Error::InvalidParameter("prefactor floor must be positive").into());
    }
    let grid = *h.grid();
    let cfl = grid.delta_phi() * grid.delta_phi() * grid.spacing();
    if dt >= cfl {
        log::warn!("dt = {dt} is not below the stability guide Δφ²·a = {cfl}");
    }

    let mut y = Fields {
        psi: state.psi.values().to_vec(),
        a: state.a_phi.clone(),
        e: state.e_field.clone(),
    };
    let mut rhs = Rhs {
        h,
        s: state.s_param,
        coupling: params.coupling(),
        options: *options,
        hpsi: vec![Complex64::new(0.0, 0.0); grid.len()],
    };
    let mut rec = Recorder {
        params,
        h,
        initial: y.psi.clone(),
        s: state.s_param,
        spacing: dt * record_stride as f64,
        trace: Vec::new(),
        head: Vec::new(),
        window: Vec::new(),
        hpsi: vec![Complex64::new(0.0, 0.0); grid.len()],
    };
    let mut k1 = Fields::zeros_like(&y);
    let mut k2 = Fields::zeros_like(&y);
    let mut k3 = Fields::zeros_like(&y);
    let mut k4 = Fields::zeros_like(&y);
    let mut tmp = Fields::zeros_like(&y);
    let mut clamps = 0usize;
    let t0 = state.time;
    let snapshot = |y: &Fields, time: f64| EvolutionState {
        psi: WaveFunctional::new(grid, y.psi.clone()).expect("grid-sized field"),
        a_phi: y.a.clone(),
        e_field: y.e.clone(),
        time,
        s_param: state.s_param,
    };

    if let Err(error) = rec.record(&y, t0, 0) {
        return Err(EvolutionFailure {
            error,
            last_good: Some(Box::new(state.clone())),
            trace: rec.trace,
        });
    }
    for step in 1..=n_steps {
        clamps += rhs.eval(&y, &mut k1);
        tmp.assign_step(&y, 0.5 * dt, &k1);
        clamps += rhs.eval(&tmp, &mut k2);
        tmp.assign_step(&y, 0.5 * dt, &k2);
        clamps += rhs.eval(&tmp, &mut k3);
        tmp.assign_step(&y, dt, &k3);
        clamps += rhs.eval(&tmp, &mut k4);
        tmp.clone_from(&y);
        tmp.accumulate(dt / 6.0, &k1);
        tmp.accumulate(dt / 3.0, &k2);
        tmp.accumulate(dt / 3.0, &k3);
        tmp.accumulate(dt / 6.0, &k4);
        let time = t0 + step as f64 * dt;
        if !tmp.is_finite() {
            rec.finish();
            return Err(EvolutionFailure {
                error: Error::NonFinite { time },
                last_good: Some(Box::new(snapshot(&y, time - dt))),
                trace: rec.trace,
            });
        }
        core::mem::swap(&mut y, &mut tmp);
        if step % record_stride == 0 {
            if let Err(error) = rec.record(&y, time, clamps) {
                rec.finish();
                return Err(EvolutionFailure {
                    error,
                    last_good: Some(Box::new(snapshot(&y, time))),
                    trace: rec.trace,
                });
            }
        }
    }
    rec.finish();
    if clamps > 0 {
        log::warn!("prefactor clamped {clamps} times during the run");
    }
    let final_time = t0 + n_steps as f64 * dt;
    Ok(Evolution {
        state: snapshot(&y, final_time),
        trace: rec.trace,
        clamp_count: clamps,
    })
}

/// Linear reference evolution `∂_tΨ = −iHΨ` with no connection.
pub fn evolve_linear_baseline(
    psi: &WaveFunctional,
    h: &DiscreteHamiltonian,
    dt: f64,
    n_steps: usize,
) -> Result<WaveFunctional> {
    if *psi.grid() != *h.grid() {
        return Err(Error::GridMismatch);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter("dt must be positive"));
    }
    let grid = *h.grid();
    let zero_links = vec![vec![0.0; grid.link_len()]; grid.n_sites()];
    let m = grid.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut y = psi.values().to_vec();
    let mut k = [vec![zero; m], vec![zero; m], vec![zero; m], vec![zero; m]];
    let mut tmp = vec![zero; m];
    let mut hz = vec![zero; m];
    let mut f = |x: &[Complex64], out: &mut [Complex64]| {
        apply_with_links(x, &zero_links, h, &mut hz);
        for (o, v) in out.iter_mut().zip(&hz) {
            *o = Complex64::new(v.im, -v.re);
        }
    };
    for step in 0..n_steps {
        f(&y, &mut k[0]);
        for (t, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k[0])) {
            *t = a + b * (0.5 * dt);
        }
        f(&tmp, &mut k[1]);
        for (t, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k[1])) {
            *t = a + b * (0.5 * dt);
        }
        f(&tmp, &mut k[2]);
        for (t, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k[2])) {
            *t = a + b * dt;
        }
        f(&tmp, &mut k[3]);
        for (i, v) in y.iter_mut().enumerate() {
            *v += (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (dt / 6.0);
        }
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite {
                time: (step + 1) as f64 * dt,
            });
        }
    }
    WaveFunctional::new(grid, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicrocausalityReport {
    pub kick_site: usize,
    pub strength: f64,
    pub t_spread: f64,
    /// L¹ distance between kicked and unkicked single-site marginals right
    /// after the kick, per site.
    pub deviation_at_kick: Vec<f64>,
    /// The same distance after `t_spread`.
    pub deviation_after: Vec<f64>,
    pub clamp_count: usize,
}

impl MicrocausalityReport {
    /// Kicked-site deviation over the largest deviation elsewhere.
    pub fn locality_ratio(&self) -> f64 {
        let here = self.deviation_after[self.kick_site];
        let elsewhere = self
            .deviation_after
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.kick_site)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        here / elsewhere
    }
}

fn marginal_distances(a: &[f64], b: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    (0..grid.n_sites())
        .map(|axis| {
            let ma = marginal(a, axis, grid)?;
            let mb = marginal(b, axis, grid)?;
            Ok(ma.iter().zip(&mb).map(|(x, y)| math::abs(x - y)).sum::<f64>() * grid.delta_phi())
        })
        .collect()
}

/// Applies the phase kick `e^{−iεφ_{i₀}}` and compares single-site marginals
/// against an unkicked twin, immediately and after `t_spread`.
#[allow(clippy::too_many_arguments)]
pub fn microcausality_probe(
    state: &EvolutionState,
    params: &ModelParams,
    h: &DiscreteHamiltonian,
    kick_site: usize,
    strength: f64,
    dt: f64,
    t_spread: f64,
    options: &EvolutionOptions,
) -> core::result::Result<MicrocausalityReport, EvolutionFailure> {
    let grid = *state.grid();
    if grid.n_sites() < 2 {
        return Err(Error::UnsupportedSites {
            needed: "at least 2",
            found: grid.n_sites(),
        }
        .into());
    }
    grid.check_axis(kick_site)?;
    if !(t_spread >= 0.0 && t_spread.is_finite()) {
        return Err(Error::InvalidParameter("t_spread must be non-negative").into());
    }
    let mut kicked = state.clone();
    for (j, z) in kicked.psi.values_mut().iter_mut().enumerate() {
        let phase = strength * grid.field_value(j, kick_site);
        *z *= Complex64::new(math::cos(phase), -math::sin(phase));
    }
    let rho0 = density(&state.psi);
    let deviation_at_kick = marginal_distances(&density(&kicked.psi), &rho0, &grid)?;
    let n_steps = libm::round(t_spread / dt) as usize;
    let stride = n_steps.max(1);
    let twin = evolve(state, params, h, dt, n_steps, stride, options)?;
    let moved = evolve(&kicked, params, h, dt, n_steps, stride, options)?;
    let deviation_after = marginal_distances(&density(&moved.state.psi), &density(&twin.state.psi), &grid)?;
    Ok(MicrocausalityReport {
        kick_site,
        strength,
        t_spread,
        deviation_at_kick,
        deviation_after,
        clamp_count: twin.clamp_count + moved.clamp_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::entropy_matching_s;

    fn setup(n: usize) -> (Grid, ModelParams, DiscreteHamiltonian) {
        let grid = Grid::new(1, 1.0, n, 6.0).unwrap();
        let params = ModelParams::new(1.0, 0.0, 2.0, 0.0).unwrap();
        let h = DiscreteHamiltonian::new(params, grid).unwrap();
        (grid, params, h)
    }

    fn gaussian(grid: Grid, x0: f64, k: f64) -> WaveFunctional {
        let v = (0..grid.len())
            .map(|j| {
                let x = grid.phi(j);
                Complex64::from_polar((-(x - x0) * (x - x0) / 2.0).exp(), k * x)
            })
            .collect();
        let mut psi = WaveFunctional::new(grid, v).unwrap();
        psi.normalize().unwrap();
        psi
    }

    #[test]
    fn zero_state_has_zero_derivatives() {
        let (grid, params, h) = setup(32);
        let st = EvolutionState::from_stationary(WaveFunctional::zeros(grid), &vec![0.0; grid.len()], 1.0).unwrap();
        let d = coupled_rhs(&st, &params, &h, &EvolutionOptions::default()).unwrap();
        assert!(d.psi.iter().all(|z| z.norm() == 0.0));
        assert!(d.a_phi.iter().chain(&d.e_field).flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_mode_is_plain_schrodinger() {
        let (grid, params, h) = setup(48);
        let psi = gaussian(grid, 0.5, 0.3);
        let st = EvolutionState::from_stationary(psi.clone(), &vec![0.0; grid.len()], 0.0).unwrap();
        let d = coupled_rhs(&st, &params, &h, &EvolutionOptions::linear()).unwrap();
        let hpsi = crate::hamiltonian::apply_hamiltonian(&psi, &GaugeState::zero(&grid), &h).unwrap();
        for (a, b) in d.psi.iter().zip(&hpsi) {
            assert!((a - b * Complex64::new(0.0, -1.0)).norm() < 1e-14 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn trace_is_deterministic_and_gauss_is_kept() {
        let (grid, params, h) = setup(64);
        let psi = gaussian(grid, 0.3, 0.5);
        let s = entropy_matching_s(&density(&psi), &grid).unwrap() + 40.0;
        let st = EvolutionState::new(psi, s, &params, 1e-12).unwrap();
        let opts = EvolutionOptions::default();
        let a = evolve(&st, &params, &h, 5e-3, 40, 10, &opts).unwrap();
        let b = evolve(&st, &params, &h, 5e-3, 40, 10, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 5);
        for r in &a.trace {
            assert!(r.gauss_residual < 1e-8, "{r:?}");
        }
        assert!((a.state.time - 0.2).abs() < 1e-15);
    }

    #[test]
    fn continuity_needs_three_records() {
        let (grid, params, _) = setup(16);
        let st = EvolutionState::from_stationary(WaveFunctional::zeros(grid), &vec![0.0; grid.len()], 0.0).unwrap();
        assert!(matches!(
            continuity_residual(&[st.clone(), st], &params),
            Err(Error::InsufficientRecords { .. })
        ));
    }

    #[test]
    fn probe_refuses_single_site() {
        let (grid, params, h) = setup(16);
        let st = EvolutionState::from_stationary(gaussian(grid, 0.0, 0.0), &vec![0.0; grid.len()], 0.0).unwrap();
        let err = microcausality_probe(&st, &params, &h, 0, 0.1, 1e-3, 0.01, &EvolutionOptions::default()).unwrap_err();
        assert!(matches!(err.error, Error::UnsupportedSites { .. }));
    }

    #[test]
    fn linear_baseline_keeps_zero() {
        let (grid, _, h) = setup(16);
        let out = evolve_linear_baseline(&WaveFunctional::zeros(grid), &h, 1e-3, 10).unwrap();
        assert!(out.values().iter().all(|z| z.norm() == 0.0));
    }
}
