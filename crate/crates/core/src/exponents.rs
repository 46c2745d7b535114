//! Best-approximation records and empirical Diophantine exponents.

use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::approx_fn::{log_conv, ApproxFunction};
use crate::error::{Error, Result};
use crate::guard::{dist_to_nearest_int, GuardedBool};
use crate::matrix::{Matrix, ParamMatrix};
use crate::parallel;
use crate::scalar::Scalar;
use crate::settings::Settings;
use crate::torus::{Classifier, Scanner, Torus};
use crate::with_limbs;

/// `q` attains a new minimum of `||M q^T||` among `0 < |q| <= norm_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxRecord {
    pub q: Vec<i64>,
    pub norm_q: u64,
    /// Midpoint of the enclosure of `||M q^T||`.
    pub err: f64,
    pub err_lo: f64,
    pub err_hi: f64,
    /// `M q^T` is an integer vector (exactly for rational data, at working
    /// precision otherwise).
    pub exact_zero: bool,
}

impl ApproxRecord {
    /// A record with a known error value, for synthetic data.
    pub fn synthetic(norm_q: u64, err: f64) -> ApproxRecord {
        ApproxRecord { q: vec![norm_q as i64], norm_q, err, err_lo: err, err_hi: err, exact_zero: err == 0.0 }
    }
}

/// Records of one search together with per-shell lower bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSearch {
    pub q_max: u64,
    pub records: Vec<ApproxRecord>,
    /// `shell_lower[t-1]` bounds `min ||M q^T||` over `|q| = t` from below.
    /// Empty shells after an exact zero are not searched.
    pub shell_lower: Vec<f64>,
}

impl RecordSearch {
    pub fn hit_zero(&self) -> bool {
        self.records.last().is_some_and(|r| r.exact_zero)
    }
}

type ShellMin<const L: usize> = Vec<Option<(Torus<L>, Vec<i64>)>>;

fn keep_min<const L: usize>(shells: &mut ShellMin<L>, t: usize, v: Torus<L>, q: &[i64]) {
    match &shells[t] {
        Some((best, _)) if !v.lt(best) => {}
        _ => shells[t] = Some((v, q.to_vec())),
    }
}

/// Exhaustive search of `0 < |q| <= Q` in `Z^cols` for the records of
/// `||M q^T||`. Only `q` whose first non-zero coordinate is positive are
/// visited; ties inside a shell go to the first `q` in lexicographic order.
pub fn best_approx_records(mat: &Matrix, q_max: u64, settings: &Settings) -> Result<RecordSearch> {
    settings.validate()?;
    if q_max == 0 {
        return Err(Error::InvalidArgument("Q_max must be at least 1".into()));
    }
    if q_max > 1 << 40 {
        return Err(Error::InvalidArgument(format!("Q_max = {q_max} is too large")));
    }
    let c = mat.cols() as u32;
    let side = 2 * q_max as u128 + 1;
    settings.check_budget((side.saturating_pow(c) - 1) / 2)?;
    with_limbs!(settings.precision, L => search_impl::<L>(mat, q_max, settings))
}

fn search_impl<const L: usize>(mat: &Matrix, q_max: u64, settings: &Settings) -> Result<RecordSearch> {
    let (r, c) = (mat.rows(), mat.cols());
    let mut cols: Vec<Vec<Torus<L>>> = vec![Vec::with_capacity(r); c];
    let mut e_max: f64 = 0.0;
    for i in 0..r {
        for (j, col) in cols.iter_mut().enumerate() {
            let (t, e) = Torus::encode(&mat.get(i, j).eval(Torus::<L>::BITS + 16)?);
            col.push(t);
            e_max = e_max.max(e);
        }
    }
    let scan_err = (c as f64 * q_max as f64 * e_max) * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    let scanner = Scanner { rows: &cols, classifier: Classifier { true_below: Torus::ZERO, false_from: Torus::ZERO } };
    let qm = q_max as i64;
    let base = vec![Torus::<L>::ZERO; r];
    let mut shells: ShellMin<L> = vec![None; q_max as usize];
    for k in 0..c {
        let parts = parallel::map_range(settings.workers, 1, qm, |lo, hi| {
            let mut local: ShellMin<L> = vec![None; q_max as usize];
            let ranges: Vec<(i64, i64)> =
                (0..c).map(|j| if j < k { (0, 0) } else if j == k { (lo, hi) } else { (-qm, qm) }).collect();
            scanner.scan(&base, &ranges, |q, res, _| {
                let norm = q.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0) as usize;
                let mut v = res[0].fold();
                for x in &res[1..] {
                    let f = x.fold();
                    if v.lt(&f) {
                        v = f;
                    }
                }
                keep_min(&mut local, norm - 1, v, q);
            });
            local
        });
        for part in parts {
            for (t, slot) in part.into_iter().enumerate() {
                if let Some((v, q)) = slot {
                    keep_min(&mut shells, t, v, &q);
                }
            }
        }
    }

    let prec = settings.precision;
    let mut records: Vec<ApproxRecord> = Vec::new();
    let mut shell_lower = Vec::with_capacity(shells.len());
    let mut best: Option<Torus<L>> = None;
    for (t, slot) in shells.into_iter().enumerate() {
        let (v, q) = slot.expect("every shell is non-empty");
        shell_lower.push(((v.to_f64() - scan_err) * (1.0 - 1e-12)).max(0.0));
        if best.is_some_and(|b| !v.lt(&b)) {
            continue;
        }
        best = Some(v);
        let rec = certify(mat, &q, t as u64 + 1, prec)?;
        let zero = rec.exact_zero;
        if let Some(s) = shell_lower.last_mut() {
            *s = s.min(rec.err_lo);
        }
        records.push(rec);
        if zero {
            break;
        }
    }
    Ok(RecordSearch { q_max, records, shell_lower })
}

/// Recompute `||M q^T||` with balls.
fn certify(mat: &Matrix, q: &[i64], norm_q: u64, prec: u32) -> Result<ApproxRecord> {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    let mut mid: f64 = 0.0;
    let mut zero = true;
    for s in mat.apply_int(q)? {
        let b = dist_to_nearest_int(&s, prec)?;
        let z = match s.as_rational() {
            Some(_) => b.mid_f64() == 0.0 && b.is_exact(),
            None => b.contains_zero(),
        };
        zero &= z;
        lo = lo.max(b.lower_f64().max(0.0));
        hi = hi.max(b.upper_f64());
        mid = mid.max(b.mid_f64());
    }
    if zero {
        lo = 0.0;
        mid = 0.0;
    }
    Ok(ApproxRecord { q: q.to_vec(), norm_q, err: mid, err_lo: lo, err_hi: hi, exact_zero: zero })
}

/// Empirical exponent of a record list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// `max log(1/err) / log |q|` over records with `|q| >= cutoff`.
    pub omega_sup: f64,
    /// Minus the least-squares slope of `log err` against `log |q|`.
    pub omega_slope: f64,
    pub omega_log: Option<f64>,
    /// An exact zero was found; both estimates are `+inf`.
    pub infinite: bool,
    pub cutoff: u64,
    /// Records past the cutoff used by the estimators.
    pub used: usize,
    pub q_max: u64,
    pub records: Vec<ApproxRecord>,
}

pub const DEFAULT_CUTOFF: u64 = 10;
pub const MIN_RECORDS: usize = 3;

pub fn estimate_omega(search: &RecordSearch, cutoff: u64) -> Result<ExponentEstimate> {
    let mut out = ExponentEstimate {
        omega_sup: f64::INFINITY,
        omega_slope: f64::INFINITY,
        omega_log: None,
        infinite: true,
        cutoff,
        used: 0,
        q_max: search.q_max,
        records: search.records.clone(),
    };
    if search.hit_zero() {
        return Ok(out);
    }
    let pts = past_cutoff(&search.records, cutoff)?;
    out.infinite = false;
    out.used = pts.len();
    out.omega_sup = pts.iter().map(|(lq, le)| -le / lq).fold(f64::NEG_INFINITY, f64::max);
    out.omega_slope = -slope(&pts);
    Ok(out)
}

/// `(log |q|, log err)` for records with `|q| >= cutoff`.
fn past_cutoff(records: &[ApproxRecord], cutoff: u64) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.norm_q >= cutoff.max(2) && r.err > 0.0)
        .map(|r| ((r.norm_q as f64).ln(), r.err.ln()))
        .collect();
    if pts.len() < MIN_RECORDS {
        return Err(Error::InsufficientRecords { needed: MIN_RECORDS, found: pts.len() });
    }
    Ok(pts)
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `max log(|q|^omega err) / (-log log |q|)` over records past the cutoff,
/// with the convention `log t = 1` for `t <= e`.
pub fn estimate_omega_log(records: &[ApproxRecord], omega: f64, cutoff: u64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::InvalidArgument("omega must be finite".into()));
    }
    let vals: Vec<f64> = records
        .iter()
        .filter(|r| r.norm_q >= cutoff && r.err > 0.0)
        .map(|r| {
            let t = r.norm_q as f64;
            // log log |q| >= 1 under the convention, never zero
            let ll = log_conv(log_conv(t));
            (omega * log_conv(t) + r.err.ln()) / -ll
        })
        .collect();
    if vals.len() < MIN_RECORDS {
        return Err(Error::InsufficientRecords { needed: MIN_RECORDS, found: vals.len() });
    }
    Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `sigma(A) = omega(A^T)` for the full `(d+1) x m` matrix.
pub fn estimate_sigma(a: &ParamMatrix, q_max: u64, cutoff: u64, settings: &Settings) -> Result<ExponentEstimate> {
    let search = best_approx_records(&a.matrix().transpose(), q_max, settings)?;
    estimate_omega(&search, cutoff)
}

/// Finite-range bad-approximability certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadApproxCertificate {
    /// `min ||M q^T|| / phi(|q|)` over `0 < |q| <= q_max`, capped at 1,
    /// rounded down.
    pub c0: f64,
    pub q_max: u64,
    /// Shell norm where the minimum is attained (0 when capped).
    pub argmin_norm: u64,
}

pub fn badly_approx_constant(
    mat: &Matrix,
    phi: &ApproxFunction,
    q_max: u64,
    settings: &Settings,
) -> Result<BadApproxCertificate> {
    phi.validate()?;
    let search = best_approx_records(mat, q_max, settings)?;
    if let Some(r) = search.records.last().filter(|r| r.exact_zero) {
        return Err(Error::RationalDependence(format!("||M q|| = 0 at q = {:?}", r.q)));
    }
    badly_approx_from_search(&search, phi)
}

/// Same as [`badly_approx_constant`] on an existing search.
pub fn badly_approx_from_search(search: &RecordSearch, phi: &ApproxFunction) -> Result<BadApproxCertificate> {
    if search.hit_zero() {
        return Err(Error::RationalDependence("an exact zero was found".into()));
    }
    let mut c0 = 1.0f64;
    let mut arg = 0;
    for (i, &lo) in search.shell_lower.iter().enumerate() {
        let t = i as u64 + 1;
        let (_, phi_hi) = phi.eval_bounds(t as f64)?;
        let v = (lo / phi_hi) * (1.0 - 1e-12);
        if v < c0 {
            c0 = v;
            arg = t;
        }
    }
    Ok(BadApproxCertificate { c0: c0.max(0.0), q_max: search.q_max, argmin_norm: arg })
}

/// Transference bounds `omega/((n-1) omega + n) <= sigma <= (omega-n+1)/n`,
/// each widened by `tol`. `omega = inf` is allowed.
pub fn transference_bounds(omega: f64, n: u32) -> (f64, f64) {
    let nf = n as f64;
    if omega.is_infinite() {
        let lo = if n > 1 { 1.0 / (nf - 1.0) } else { 1.0 };
        return (lo, f64::INFINITY);
    }
    (omega / ((nf - 1.0) * omega + nf), (omega - nf + 1.0) / nf)
}

/// Exact on the given doubles: the bounds are evaluated in rationals, so
/// equality at either end counts as inside.
pub fn check_transference(omega: f64, sigma: f64, n: u32, tol: f64) -> Result<GuardedBool> {
    if n == 0 || !(tol >= 0.0) || omega.is_nan() || !sigma.is_finite() {
        return Err(Error::InvalidArgument("need n >= 1, tol >= 0 and numeric exponents".into()));
    }
    let q = |x: f64| BigRational::from_float(x).expect("finite");
    let nq = BigRational::from_integer(n.into());
    let one = BigRational::one();
    let (s, t) = (q(sigma), q(tol));
    if (omega.is_finite() && q(omega) < nq) || &s * &nq < one {
        return Err(Error::InvalidArgument(format!(
            "exponents below the Dirichlet floor: omega = {omega} (>= {n}), sigma = {sigma} (>= 1/{n})"
        )));
    }
    let (lo, hi) = if omega.is_finite() {
        let w = q(omega);
        let lo = &w / ((&nq - &one) * &w + &nq);
        (lo, Some((&w - &nq + &one) / &nq))
    } else if n > 1 {
        (one / (&nq - BigRational::one()), None)
    } else {
        (one, None)
    };
    let inside = s >= lo - &t && hi.is_none_or(|h| s <= h + &t);
    Ok(if inside { GuardedBool::True } else { GuardedBool::False })
}

/// `max(x, floor)` for feeding finite-range estimates into
/// [`check_transference`], whose inputs are known to satisfy the floors.
pub fn dirichlet_clamp(omega: f64, sigma: f64, n: u32) -> (f64, f64) {
    (omega.max(n as f64), sigma.max(1.0 / n as f64))
}

/// `A_k = (1 k; 0 I_d) A`: adds `sum k_i A'_i` to `beta`.
pub fn shift_matrix(a: &ParamMatrix, k: &[i64]) -> Result<ParamMatrix> {
    if k.len() != a.d() {
        return Err(Error::Dimension(format!("k must have length {}, got {}", a.d(), k.len())));
    }
    let m = a.m();
    let mut entries: Vec<Scalar> = a.matrix().entries().to_vec();
    for (j, e) in entries.iter_mut().take(m).enumerate() {
        *e = k.iter().enumerate().fold(e.clone(), |acc, (i, &ki)| acc.add(&a.get(i + 1, j).mul_int(ki)));
    }
    let out = ParamMatrix::new(a.d(), m, entries)?;
    Ok(match a.label() {
        Some(l) => out.with_label(l),
        None => out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st() -> Settings {
        Settings::default()
    }

    fn m(rows: &[&[&str]]) -> Matrix {
        Matrix::parse(rows).unwrap()
    }

    fn fib_upto(n: u64) -> Vec<u64> {
        let mut v = vec![1u64, 2];
        while v[v.len() - 1] + v[v.len() - 2] <= n {
            v.push(v[v.len() - 1] + v[v.len() - 2]);
        }
        v
    }

    #[test]
    fn rational_entry_ends_in_zero() {
        let s = best_approx_records(&m(&[&["1/3"]]), 10, &st()).unwrap();
        let last = s.records.last().unwrap();
        assert_eq!((last.norm_q, last.exact_zero), (3, true));
        assert!(estimate_omega(&s, 10).unwrap().infinite);
        assert!(matches!(
            badly_approx_constant(&m(&[&["1/3"]]), &ApproxFunction::reciprocal(0.5).unwrap(), 10, &st()),
            Err(Error::RationalDependence(_))
        ));
    }

    #[test]
    fn golden_records_are_fibonacci() {
        let s = best_approx_records(&m(&[&["(1+sqrt(5))/2 - 1"]]), 100_000, &st()).unwrap();
        let qs: Vec<u64> = s.records.iter().map(|r| r.norm_q).collect();
        assert_eq!(qs, fib_upto(100_000));
        for w in s.records.windows(2) {
            assert!(w[1].err_hi < w[0].err_lo);
        }
        let e = estimate_omega(&s, 100).unwrap();
        assert!((e.omega_slope - 1.0).abs() < 0.01, "{}", e.omega_slope);
        // the sup estimator carries the log(sqrt 5)/log q bias of the
        // constant in ||q phi|| ~ 1/(sqrt 5 q)
        assert!(e.omega_sup > 1.1 && e.omega_sup < 1.2, "{}", e.omega_sup);
    }

    #[test]
    fn pair_records_match_naive_scan() {
        let mat = m(&[&["sqrt(2)", "sqrt(3)"]]);
        let s = best_approx_records(&mat, 1000, &st()).unwrap();
        // naive double loop over canonical q in f64
        let (a, b) = (2f64.sqrt(), 3f64.sqrt());
        let mut shells = vec![f64::INFINITY; 1000];
        for q1 in 0..=1000i64 {
            for q2 in -1000..=1000i64 {
                if q1 == 0 && q2 <= 0 {
                    continue;
                }
                let v = q1 as f64 * a + q2 as f64 * b;
                let e = (v - v.round()).abs();
                let t = q1.unsigned_abs().max(q2.unsigned_abs()) as usize - 1;
                shells[t] = shells[t].min(e);
            }
        }
        let mut naive = Vec::new();
        let mut best = f64::INFINITY;
        for (t, &e) in shells.iter().enumerate() {
            if e < best {
                best = e;
                naive.push(t as u64 + 1);
            }
        }
        let got: Vec<u64> = s.records.iter().map(|r| r.norm_q).collect();
        assert_eq!(got, naive);
    }

    #[test]
    fn omega_log_examples() {
        let synth: Vec<ApproxRecord> = (1..=40)
            .map(|k| {
                let q = 1u64 << k;
                let t = q as f64;
                ApproxRecord::synthetic(q, 1.0 / (t * t.ln().powi(2)))
            })
            .collect();
        assert!((estimate_omega_log(&synth, 1.0, 100).unwrap() - 2.0).abs() < 1e-9);
        let plain: Vec<ApproxRecord> = (1..=40).map(|k| ApproxRecord::synthetic(1 << k, 0.5f64.powi(k))).collect();
        assert!(estimate_omega_log(&plain, 1.0, 100).unwrap().abs() < 1e-9);

        let s = best_approx_records(&m(&[&["(sqrt(5)-1)/2"]]), 100_000, &st()).unwrap();
        let a = estimate_omega_log(&s.records, 1.0, 10).unwrap();
        let b = estimate_omega_log(&s.records, 1.0, 1000).unwrap();
        // positive only through the constant factor, decaying like 1/log log q
        assert!(b < a && b < 0.5, "{a} {b}");
    }

    #[test]
    fn sigma_of_column_uses_transpose() {
        let a = ParamMatrix::parse(&[&["0"], &["sqrt(2)"]]).unwrap();
        let e = estimate_sigma(&a, 1000, 10, &st()).unwrap();
        // the row (0, sqrt 2) vanishes exactly at q = (1, 0)
        assert!(e.infinite);
        assert_eq!(e.records.last().unwrap().q, vec![1, 0]);
        let b = ParamMatrix::parse(&[&["sqrt(3)"], &["sqrt(2)"]]).unwrap();
        let e = estimate_sigma(&b, 1000, 10, &st()).unwrap();
        let direct = best_approx_records(&Matrix::parse(&[&["sqrt(3)", "sqrt(2)"]]).unwrap(), 1000, &st()).unwrap();
        assert_eq!(e.records, direct.records);
        let r = ParamMatrix::parse(&[&["1/2"], &["3"]]).unwrap();
        assert!(estimate_sigma(&r, 50, 10, &st()).unwrap().infinite);
    }

    #[test]
    fn bad_approx_golden() {
        let g = m(&[&["(sqrt(5)-1)/2"]]);
        let phi = ApproxFunction::power_log("1/3", "1", "0").unwrap();
        let c = badly_approx_constant(&g, &phi, 10_000, &st()).unwrap();
        assert_eq!(c.c0, 1.0);
        let phi = ApproxFunction::power_log("1", "1.1", "0").unwrap();
        let c = badly_approx_constant(&g, &phi, 10_000, &st()).unwrap();
        assert!(c.c0 > 0.0 && c.c0 < 1.0);
    }

    #[test]
    fn transference_examples() {
        assert_eq!(check_transference(2.0, 0.5, 2, 0.0).unwrap(), GuardedBool::True);
        assert_eq!(check_transference(2.0, 0.6, 2, 0.05).unwrap(), GuardedBool::False);
        assert_eq!(transference_bounds(5.0, 2), (5.0 / 7.0, 2.0));
        assert_eq!(check_transference(5.0, 1.0, 2, 0.0).unwrap(), GuardedBool::True);
        assert_eq!(check_transference(5.0, 3.0, 2, 0.0).unwrap(), GuardedBool::False);
        assert_eq!(check_transference(f64::INFINITY, 7.0, 2, 0.0).unwrap(), GuardedBool::True);
        assert!(check_transference(1.5, 0.6, 2, 0.0).is_err());
    }

    #[test]
    fn shift_examples() {
        let a = ParamMatrix::parse(&[&["1/5"], &["sqrt(2)"]]).unwrap();
        assert_eq!(shift_matrix(&a, &[0]).unwrap(), a);
        let s = shift_matrix(&a, &[2]).unwrap();
        let want = Scalar::parse("1/5").unwrap().add(&Scalar::parse("sqrt(2)").unwrap().mul_int(2));
        assert!(s.get(0, 0).eval(128).unwrap().sub(&want.eval(128).unwrap()).abs_upper() < 1e-30);
        assert_eq!(s.get(1, 0), a.get(1, 0));
        let back = shift_matrix(&s, &[-2]).unwrap();
        assert!(back.get(0, 0).eval(128).unwrap().sub(&a.get(0, 0).eval(128).unwrap()).abs_upper() < 1e-30);
        assert!(shift_matrix(&a, &[1, 2]).is_err());
    }

    #[test]
    fn records_independent_of_workers() {
        let mat = m(&[&["sqrt(2)", "sqrt(3)"], &["1/7", "sqrt(5)"]]);
        let a = best_approx_records(&mat, 60, &st()).unwrap();
        let b = best_approx_records(&mat, 60, &st().with_workers(4)).unwrap();
        assert_eq!(a, b);
    }
}
