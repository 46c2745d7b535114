//! Explicit upper bounds for the counting functions and grids comparing them
//! with measured counts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::approx_fn::ApproxFunction;
use crate::ball::Ball;
use crate::counting::{count_exact_points, count_n_multi, count_nprime_over_multi, CountQuery, CountResult};
use crate::error::{Error, Result};
use crate::exponents::{badly_approx_constant, best_approx_records, estimate_omega, DEFAULT_CUTOFF};
use crate::guard::GuardedBool;
use crate::matrix::ParamMatrix;
use crate::scalar::Scalar;
use crate::settings::Settings;

/// Relative band inside which a floating-point bound comparison is left
/// undecided.
pub const BOUND_REL_GUARD: f64 = 1e-9;

/// Acceptance bracket for measured / heuristic ratios.
pub const ASYMP_BRACKET: (f64, f64) = (1e-2, 1e2);

/// `8^d pi^(2m)`.
pub fn const_cdm(d: u32, m: u32) -> f64 {
    8f64.powi(d as i32) * PI.powi(2 * m as i32)
}

/// `8^d pi^(2m)` as a ball.
pub fn const_cdm_ball(d: u32, m: u32, prec: u32) -> Ball {
    Ball::from_int(1, prec).scale_pow2(3 * d as i64).mul(&Ball::pi(prec).powi(2 * m))
}

fn check_q_delta(q: u64, delta: f64) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidArgument("Q must be at least 1".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

fn phi_bound(phi: &ApproxFunction, dims: u32, cdm: f64, m: u32, q: u64, delta: f64) -> Result<f64> {
    check_q_delta(q, delta)?;
    let f = phi.eval(1.0 / delta)?;
    if !(f > 0.0) {
        return Err(Error::InvalidArgument(format!("phi must be positive, got phi(1/delta) = {f}")));
    }
    let big = (q as f64).max(1.0 / f);
    Ok(cdm * delta.powi(m as i32) * big.powi(dims as i32))
}

/// `C_{d+1,m} delta^m max{Q, 1/phi(1/delta)}^(d+1)`.
pub fn bound_phi_a(phi: &ApproxFunction, d: u32, m: u32, q: u64, delta: f64) -> Result<f64> {
    phi_bound(phi, d + 1, const_cdm(d + 1, m), m, q, delta)
}

/// `C_{d,m} delta^m max{Q, 1/phi(1/delta)}^d`.
pub fn bound_phi_b(phi: &ApproxFunction, d: u32, m: u32, q: u64, delta: f64) -> Result<f64> {
    phi_bound(phi, d, const_cdm(d, m), m, q, delta)
}

/// `C* = pi^(2m) 2^((sigma+2)m+eps) c0^(-m)`.
pub fn dual_constant(sigma: f64, m: u32, c0: f64, eps: f64) -> f64 {
    let mf = m as f64;
    PI.powi(2 * m as i32) * 2f64.powf((sigma + 2.0) * mf + eps) * c0.powf(-mf)
}

/// `max{pi^(2m), C* delta^m Q^(m sigma + eps)}`.
pub fn bound_dual(sigma: f64, m: u32, c0: f64, eps: f64, q: u64, delta: f64) -> Result<f64> {
    check_q_delta(q, delta)?;
    if !sigma.is_finite() {
        return Err(Error::InvalidArgument("sigma must be finite".into()));
    }
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(Error::InvalidArgument(format!("c0 must lie in (0, 1], got {c0}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mf = m as f64;
    let main = dual_constant(sigma, m, c0, eps) * delta.powi(m as i32) * (q as f64).powf(mf * sigma + eps);
    Ok(PI.powi(2 * m as i32).max(main))
}

/// `C_{d+1,m} delta^m Q^(d+1)`.
pub fn bound_omega_a1(d: u32, m: u32, q: u64, delta: f64) -> Result<f64> {
    check_q_delta(q, delta)?;
    Ok(const_cdm(d + 1, m) * delta.powi(m as i32) * (q as f64).powi(d as i32 + 1))
}

/// `max{C_{d+1,m} delta^m Q^(d+1), C(A,eps) Q^(d+1-m/omega+eps)}` with
/// `C(A,eps) = C_{d+1,m} c0^(-d-1)`.
pub fn bound_omega_a2(d: u32, m: u32, omega: f64, c0: f64, eps: f64, q: u64, delta: f64) -> Result<f64> {
    let main = bound_omega_a1(d, m, q, delta)?;
    let ca = const_cdm(d + 1, m) * c0.powi(-(d as i32) - 1);
    let tail = ca * (q as f64).powf(d as f64 + 1.0 - m as f64 / omega + eps);
    Ok(main.max(tail))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    PhiA,
    PhiB,
    OmegaA1,
    OmegaA2,
    Dual,
    AsympRatio,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::PhiA => "phi-a",
            BoundKind::PhiB => "phi-b",
            BoundKind::OmegaA1 => "omega-a1",
            BoundKind::OmegaA2 => "omega-a2",
            BoundKind::Dual => "dual",
            BoundKind::AsympRatio => "asymp-ratio",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "phi-a" => BoundKind::PhiA,
            "phi-b" => BoundKind::PhiB,
            "omega-a1" => BoundKind::OmegaA1,
            "omega-a2" => BoundKind::OmegaA2,
            "dual" => BoundKind::Dual,
            "asymp-ratio" => BoundKind::AsympRatio,
            _ => return Err(Error::InvalidArgument(format!("unknown bound kind {s:?}"))),
        })
    }
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs for [`verify_grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Shape of `phi` for the phi kinds; the certified constant multiplies it.
    pub phi: ApproxFunction,
    pub eps: f64,
    /// Range of the bad-approximability certificate.
    pub c0_qmax: u64,
    /// Exponent for the omega and asymp kinds; estimated when absent.
    pub omega: Option<f64>,
    /// Exponent for the dual kind; estimated on the transpose when absent.
    pub sigma: Option<f64>,
    pub cutoff: u64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            phi: ApproxFunction::reciprocal(1.0).expect("valid"),
            eps: 0.1,
            c0_qmax: 10_000,
            omega: None,
            sigma: None,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

/// Measured count of one grid cell against its bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub q: u64,
    pub delta: Scalar,
    pub kind: BoundKind,
    pub measured: CountResult,
    pub bound: f64,
    /// `measured upper / bound`.
    pub ratio: f64,
    pub pass: GuardedBool,
    /// False when the hypotheses of the bound are not met on this cell (the
    /// comparison is still reported).
    pub applicable: bool,
    /// Certified constant used for the cell, if any.
    pub c0: Option<f64>,
}

impl BoundReport {
    pub fn measured_lo(&self) -> u64 {
        self.measured.count_certain
    }

    pub fn measured_hi(&self) -> u64 {
        self.measured.upper()
    }

    pub fn is_violation(&self) -> bool {
        self.applicable && self.pass == GuardedBool::False
    }
}

/// `measured <= bound` with a relative band around the bound.
pub fn compare_to_bound(measured_hi: u64, bound: f64) -> GuardedBool {
    let m = measured_hi as f64;
    if bound.is_infinite() || m <= bound * (1.0 - BOUND_REL_GUARD) {
        GuardedBool::True
    } else if m > bound * (1.0 + BOUND_REL_GUARD) {
        GuardedBool::False
    } else {
        GuardedBool::Ambiguous
    }
}

fn in_bracket(ratio: f64) -> GuardedBool {
    if ratio >= ASYMP_BRACKET.0 && ratio <= ASYMP_BRACKET.1 {
        GuardedBool::True
    } else {
        GuardedBool::False
    }
}

/// `floor(1/(2 delta))`.
pub fn j_of(delta: &Scalar) -> Result<u64> {
    let b = delta.eval(128)?;
    if !b.certainly_nonneg() || b.contains_zero() {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let inv = Ball::from_int(1, 128).div(&b.scale_pow2(1))?;
    inv.floor_certain()
        .and_then(|f| num_traits::ToPrimitive::to_u64(&f))
        .ok_or_else(|| Error::Precision(format!("cannot decide floor(1/(2 {delta}))")))
}

fn all_zero(a: &ParamMatrix) -> bool {
    a.matrix().is_zero()
}

fn estimate_omega_of(a: &ParamMatrix, params: &GridParams, settings: &Settings) -> Result<f64> {
    if let Some(w) = params.omega {
        return Ok(w);
    }
    let search = best_approx_records(a.matrix(), params.c0_qmax, settings)?;
    let est = estimate_omega(&search, params.cutoff)?;
    Ok(if est.infinite { f64::INFINITY } else { est.omega_slope })
}

/// Compare measured counts with a bound on every cell of a `(Q, delta)` grid.
/// Cells sharing `Q` are counted in one enumeration.
pub fn verify_grid(
    a: &ParamMatrix,
    kind: BoundKind,
    params: &GridParams,
    grid: &[(u64, Scalar)],
    theta: &[Scalar],
    settings: &Settings,
) -> Result<Vec<BoundReport>> {
    settings.validate()?;
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let (d, m) = (a.d() as u32, a.m() as u32);
    for (q, delta) in grid {
        CountQuery::new(a.clone(), *q, delta.clone(), theta.to_vec())?;
    }

    // constants that do not depend on the cell
    let mut c0 = None;
    let mut phi_eff = None;
    let mut omega = f64::NAN;
    let mut sigma = f64::NAN;
    match kind {
        BoundKind::PhiA | BoundKind::PhiB => {
            let needed = grid.iter().map(|(_, dl)| j_of(dl)).collect::<Result<Vec<_>>>()?;
            let needed = needed.into_iter().max().unwrap_or(0);
            if needed > params.c0_qmax {
                return Err(Error::CertificateRange { needed, certified: params.c0_qmax });
            }
            if all_zero(a) {
                return Err(Error::RationalDependence("the zero matrix has no bad-approximability constant".into()));
            }
            let mat = if kind == BoundKind::PhiA { a.matrix().clone() } else { a.block() };
            let cert = badly_approx_constant(&mat, &params.phi, params.c0_qmax, settings)?;
            if !(cert.c0 > 0.0) {
                return Err(Error::Precision("certified constant is not positive".into()));
            }
            phi_eff = Some(params.phi.scaled(cert.c0)?);
            c0 = Some(cert.c0);
        }
        BoundKind::OmegaA1 | BoundKind::OmegaA2 | BoundKind::AsympRatio => {
            omega = estimate_omega_of(a, params, settings)?;
            if kind == BoundKind::OmegaA2 {
                if !omega.is_finite() {
                    return Err(Error::RationalDependence("omega is infinite".into()));
                }
                let eps1 = omega * params.eps / (d as f64 + 1.0);
                let phi = ApproxFunction::power(1.0, omega + eps1)?;
                let cert = badly_approx_constant(a.matrix(), &phi, params.c0_qmax, settings)?;
                c0 = Some(cert.c0);
            }
        }
        BoundKind::Dual => {
            let needed = 2 * grid.iter().map(|c| c.0).max().unwrap_or(1) - 2;
            if needed > params.c0_qmax {
                return Err(Error::CertificateRange { needed, certified: params.c0_qmax });
            }
            let at = a.matrix().transpose();
            let search = best_approx_records(&at, params.c0_qmax, settings)?;
            if search.hit_zero() {
                sigma = f64::INFINITY;
            } else {
                sigma = match params.sigma {
                    Some(s) => s,
                    None => estimate_omega(&search, params.cutoff)?.omega_slope,
                };
                let phi = ApproxFunction::power(1.0, sigma + params.eps / m as f64)?;
                let cert = crate::exponents::badly_approx_from_search(&search, &phi)?;
                if cert.c0 > 0.0 {
                    c0 = Some(cert.c0);
                }
            }
        }
    }

    let mut qs: Vec<u64> = grid.iter().map(|c| c.0).collect();
    qs.sort_unstable();
    qs.dedup();
    let mut measured: Vec<Option<CountResult>> = vec![None; grid.len()];
    for &q in &qs {
        let idx: Vec<usize> = (0..grid.len()).filter(|&i| grid[i].0 == q).collect();
        let deltas: Vec<Scalar> = idx.iter().map(|&i| grid[i].1.clone()).collect();
        let results = if kind == BoundKind::PhiB {
            let q_set: Vec<Scalar> = (0..=q as i64).map(Scalar::from_int).collect();
            count_nprime_over_multi(a, &q_set, q, &deltas, theta, settings, false)?
        } else {
            let query = CountQuery::new(a.clone(), q, deltas[0].clone(), theta.to_vec())?;
            count_n_multi(&query, &deltas, settings, false)?
        };
        for (i, r) in idx.into_iter().zip(results) {
            measured[i] = Some(r);
        }
    }

    let mut out = Vec::with_capacity(grid.len());
    for ((q, delta), measured) in grid.iter().zip(measured) {
        let measured = measured.expect("every cell counted");
        let (q, dl) = (*q, delta.to_f64());
        let mut applicable = true;
        let bound = match kind {
            BoundKind::PhiA => bound_phi_a(phi_eff.as_ref().expect("certificate"), d, m, q, dl)?,
            BoundKind::PhiB => bound_phi_b(phi_eff.as_ref().expect("certificate"), d, m, q, dl)?,
            BoundKind::OmegaA1 => {
                // stated only for delta >= Q^(-1/omega+eps) and Q large enough
                applicable = omega.is_finite() && dl >= (q as f64).powf(-1.0 / omega + params.eps);
                bound_omega_a1(d, m, q, dl)?
            }
            BoundKind::OmegaA2 => bound_omega_a2(d, m, omega, c0.expect("certificate"), params.eps, q, dl)?,
            BoundKind::Dual => match c0 {
                Some(c) if sigma.is_finite() => bound_dual(sigma, m, c, params.eps, q, dl)?,
                _ => {
                    applicable = false;
                    f64::INFINITY
                }
            },
            BoundKind::AsympRatio => {
                applicable = !all_zero(a);
                dl.powi(m as i32) * (q as f64).powi(d as i32 + 1)
            }
        };
        let hi = measured.upper();
        let ratio = hi as f64 / bound;
        let pass = if kind == BoundKind::AsympRatio { in_bracket(ratio) } else { compare_to_bound(hi, bound) };
        out.push(BoundReport { q, delta: delta.clone(), kind, measured, bound, ratio, pass, applicable, c0 });
    }
    Ok(out)
}

/// One cell of the bounded-count regime `delta <= Q^(-sigma-eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedCell {
    pub q: u64,
    pub delta: Scalar,
    pub measured_hi: u64,
    /// Box points lying exactly on the subspace.
    pub exact: u64,
    /// `pi^(2m) + exact`.
    pub limit: f64,
    pub pass: GuardedBool,
}

/// On the cells with `delta <= Q^(-sigma-eps)`, compare the count with
/// `pi^(2m)` plus the number of box points exactly on the subspace.
pub fn dual_bounded_regime(
    a: &ParamMatrix,
    sigma: f64,
    eps: f64,
    grid: &[(u64, Scalar)],
    theta: &[Scalar],
    settings: &Settings,
) -> Result<Vec<BoundedCell>> {
    let m = a.m() as i32;
    let mut out = Vec::new();
    for (q, delta) in grid {
        if delta.to_f64() > (*q as f64).powf(-sigma - eps) {
            continue;
        }
        let query = CountQuery::new(a.clone(), *q, delta.clone(), theta.to_vec())?;
        let hi = count_n_multi(&query, std::slice::from_ref(delta), settings, false)?[0].upper();
        let exact = count_exact_points(&query, settings)?;
        let limit = PI.powi(2 * m) + exact as f64;
        out.push(BoundedCell {
            q: *q,
            delta: delta.clone(),
            measured_hi: hi,
            exact,
            limit,
            pass: compare_to_bound(hi, limit),
        });
    }
    Ok(out)
}

/// Row of the main-term ratio sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsympRow {
    pub q: u64,
    pub delta: Scalar,
    pub measured: CountResult,
    /// `measured upper / (delta^m Q^(d+1))`.
    pub ratio: f64,
    /// Set for the zero matrix, where every point is a hit.
    pub degenerate: bool,
}

/// `delta = Q^(-tau0+eps)` with `tau0 = 1/max{m, omega}`, rounded to a
/// dyadic rational.
pub fn asymp_delta(m: usize, omega: f64, eps: f64, q: u64) -> Result<Scalar> {
    let tau0 = 1.0 / (m as f64).max(omega);
    let v = (q as f64).powf(-tau0 + eps);
    Scalar::from_f64(v)
}

/// Measured count over `delta^m Q^(d+1)` along `q_list`.
pub fn asymp_ratio(
    a: &ParamMatrix,
    omega: f64,
    eps: f64,
    q_list: &[u64],
    theta: &[Scalar],
    settings: &Settings,
) -> Result<Vec<AsympRow>> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    let (d, m) = (a.d() as i32, a.m());
    let degenerate = all_zero(a);
    q_list
        .iter()
        .map(|&q| {
            let delta = asymp_delta(m, omega, eps, q)?;
            let query = CountQuery::new(a.clone(), q, delta.clone(), theta.to_vec())?;
            let measured = count_n_multi(&query, std::slice::from_ref(&delta), settings, false)?.remove(0);
            let main = delta.to_f64().powi(m as i32) * (q as f64).powi(d + 1);
            let ratio = measured.upper() as f64 / main;
            Ok(AsympRow { q, delta, measured, ratio, degenerate })
        })
        .collect()
}

/// Dyadic grid `2^lo, ..., 2^hi` of `Q` crossed with `2^-1, ..., 2^-k` of
/// `delta`.
pub fn dyadic_grid(q_log2: std::ops::RangeInclusive<u32>, delta_log2: std::ops::RangeInclusive<u32>) -> Vec<(u64, Scalar)> {
    let mut out = Vec::new();
    for qe in q_log2 {
        for de in delta_log2.clone() {
            let r = num_rational::BigRational::new(1.into(), num_bigint::BigInt::from(1) << de);
            out.push((1u64 << qe, Scalar::from_rational(r)));
        }
    }
    out
}
