//! Exhaustive counts of integer points near an affine subspace.
//!
//! All scans run on [`Torus`] residues: each matrix entry is encoded once,
//! every visited point costs `m` fixed-point additions, and the accumulated
//! encoding error is folded into the hit/miss thresholds.

use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::approx_fn::log_conv;
use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::matrix::ParamMatrix;
use crate::parallel;
use crate::scalar::Scalar;
use crate::settings::Settings;
use crate::torus::{Classifier, PointVerdict, Scanner, Torus};
use crate::with_limbs;

/// Parameters of one count: the matrix, the box size `Q`, the radius `delta`
/// and the shift `theta = (theta1, theta2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountQuery {
    pub a: ParamMatrix,
    pub q_box: u64,
    pub delta: Scalar,
    pub theta: Vec<Scalar>,
}

impl CountQuery {
    pub fn new(a: ParamMatrix, q_box: u64, delta: Scalar, theta: Vec<Scalar>) -> Result<CountQuery> {
        if q_box == 0 {
            return Err(Error::InvalidArgument("Q must be at least 1".into()));
        }
        if q_box > i64::MAX as u64 / 4 {
            return Err(Error::InvalidArgument(format!("Q = {q_box} is too large")));
        }
        check_positive(&delta, "delta")?;
        a.split_theta(&theta)?;
        Ok(CountQuery { a, q_box, delta, theta })
    }

    pub fn homogeneous(a: ParamMatrix, q_box: u64, delta: Scalar) -> Result<CountQuery> {
        let n = a.n();
        CountQuery::new(a, q_box, delta, vec![Scalar::zero(); n])
    }
}

fn check_positive(x: &Scalar, what: &str) -> Result<()> {
    let ok = match x.as_rational() {
        Some(r) => r > &num_rational::BigRational::zero(),
        None => x.eval(64)?.sign() == Some(std::cmp::Ordering::Greater),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive, got {x}")))
    }
}

/// An enumerated point whose verdict is a certain hit. `coords` is `(q, a)`
/// for `N` and `a` alone for `N'`; `residual` is the signed representative
/// of each coordinate of `(q, a + theta1) A - theta2` modulo 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub coords: Vec<i64>,
    pub residual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CountResult {
    pub count_certain: u64,
    pub count_ambiguous: u64,
    pub hits: Option<Vec<Hit>>,
    /// For maxima over a candidate set: the first candidate attaining
    /// `count_certain`.
    pub best_q: Option<Scalar>,
}

impl CountResult {
    /// The true count lies in `[count_certain, upper()]`.
    pub fn upper(&self) -> u64 {
        self.count_certain + self.count_ambiguous
    }
}

#[derive(Default)]
struct Tally {
    certain: u64,
    ambiguous: u64,
    hits: Vec<Hit>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.certain += other.certain;
        self.ambiguous += other.ambiguous;
        self.hits.extend(other.hits);
        self
    }

    fn into_result(self, collect: bool) -> CountResult {
        CountResult {
            count_certain: self.certain,
            count_ambiguous: self.ambiguous,
            hits: collect.then_some(self.hits),
            best_q: None,
        }
    }
}

fn encode<const L: usize>(x: &Scalar) -> Result<(Torus<L>, f64)> {
    Ok(Torus::encode(&x.eval(Torus::<L>::BITS + 16)?))
}

/// Upward-biased sum of non-negative error terms.
fn err_sum(terms: &[f64]) -> f64 {
    let s: f64 = terms.iter().sum();
    if s == 0.0 {
        0.0
    } else {
        s * (1.0 + 1e-9) + f64::MIN_POSITIVE
    }
}

/// Encoded pieces of a matrix and shift.
struct Prepared<const L: usize> {
    d: usize,
    m: usize,
    beta_src: Vec<Scalar>,
    beta: Vec<Torus<L>>,
    e_beta: f64,
    /// Rows of `A'`.
    rows: Vec<Vec<Torus<L>>>,
    e_rows: f64,
    /// `theta1 A' - theta2`.
    offset: Vec<Torus<L>>,
    e_offset: f64,
    deltas: Vec<Ball>,
    guard: Ball,
}

impl<const L: usize> Prepared<L> {
    fn new(a: &ParamMatrix, deltas: &[Scalar], theta: &[Scalar], settings: &Settings) -> Result<Self> {
        let (d, m) = (a.d(), a.m());
        let (theta1, theta2) = a.split_theta(theta)?;
        let mut beta = Vec::with_capacity(m);
        let mut e_beta: f64 = 0.0;
        for s in a.beta() {
            let (t, e) = encode::<L>(s)?;
            beta.push(t);
            e_beta = e_beta.max(e);
        }
        let mut rows = Vec::with_capacity(d);
        let mut e_rows: f64 = 0.0;
        for i in 1..=d {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                let (t, e) = encode::<L>(a.get(i, j))?;
                row.push(t);
                e_rows = e_rows.max(e);
            }
            rows.push(row);
        }
        let mut offset = Vec::with_capacity(m);
        let mut e_offset: f64 = 0.0;
        for j in 0..m {
            let c = (0..d).fold(theta2[j].neg(), |acc, i| acc.add(&theta1[i].mul(a.get(i + 1, j))));
            let (t, e) = encode::<L>(&c)?;
            offset.push(t);
            e_offset = e_offset.max(e);
        }
        let deltas = deltas.iter().map(|x| x.eval(Torus::<L>::BITS + 16)).collect::<Result<_>>()?;
        Ok(Prepared {
            d,
            m,
            beta_src: a.beta().to_vec(),
            beta,
            e_beta,
            rows,
            e_rows,
            offset,
            e_offset,
            deltas,
            guard: settings.guard(),
        })
    }

    fn classifiers(&self, err: f64) -> Vec<Classifier<L>> {
        self.deltas.iter().map(|d| Classifier::new(d, &self.guard, err)).collect()
    }

    /// Base residual `q beta + offset` for an integer `q`, with its error.
    fn base_at(&self, q: i64) -> (Vec<Torus<L>>, f64) {
        let base = self.offset.iter().zip(&self.beta).map(|(o, b)| o.add(b.mul_i64(q))).collect();
        (base, err_sum(&[self.e_offset, q.unsigned_abs() as f64 * self.e_beta]))
    }

    /// Base residual for a real `q`.
    fn base_real(&self, q: &Scalar) -> Result<(Vec<Torus<L>>, f64)> {
        if let Some(k) = integer_value(q).filter(|v| v.unsigned_abs() < 1 << 40) {
            return Ok(self.base_at(k));
        }
        let prec = Torus::<L>::BITS + 64;
        let qb = q.eval(prec)?;
        let mut base = Vec::with_capacity(self.m);
        let mut e: f64 = 0.0;
        for j in 0..self.m {
            let (t, eq) = Torus::<L>::encode(&qb.mul(&self.beta_src[j].eval(prec)?));
            base.push(t.add(self.offset[j]));
            e = e.max(err_sum(&[eq, self.e_offset]));
        }
        Ok((base, e))
    }
}

/// Scan a box against several thresholds at once, optionally splitting the
/// first range across workers. Hits are collected for the first threshold.
fn scan_box<const L: usize>(
    rows: &[Vec<Torus<L>>],
    base: &[Torus<L>],
    ranges: &[(i64, i64)],
    classifiers: &[Classifier<L>],
    collect: bool,
    workers: usize,
) -> Vec<Tally> {
    // a miss for the widest band is a miss for every band
    let widest = classifiers
        .iter()
        .copied()
        .reduce(|a, b| if a.false_from.lt(&b.false_from) { b } else { a })
        .expect("at least one threshold");
    let single = classifiers.len() == 1;
    let scanner = Scanner { rows, classifier: widest };
    let run = |lo: i64, hi: i64| {
        let mut local = ranges.to_vec();
        local[0] = (lo, hi);
        let mut ts: Vec<Tally> = (0..classifiers.len()).map(|_| Tally::default()).collect();
        scanner.scan(base, &local, |coords, res, v| {
            if v == PointVerdict::Miss {
                return;
            }
            for (k, (c, t)) in classifiers.iter().zip(ts.iter_mut()).enumerate() {
                let v = if single { v } else { c.classify(res) };
                match v {
                    PointVerdict::Hit => {
                        t.certain += 1;
                        if collect && k == 0 {
                            t.hits.push(Hit {
                                coords: coords.to_vec(),
                                residual: res.iter().map(|r| r.to_signed_f64()).collect(),
                            });
                        }
                    }
                    PointVerdict::Ambiguous => t.ambiguous += 1,
                    PointVerdict::Miss => {}
                }
            }
        });
        ts
    };
    if workers <= 1 {
        return run(ranges[0].0, ranges[0].1);
    }
    let parts = parallel::map_range(workers, ranges[0].0, ranges[0].1, run);
    let mut out: Vec<Tally> = (0..classifiers.len()).map(|_| Tally::default()).collect();
    for part in parts {
        out = out.into_iter().zip(part).map(|(a, b)| a.merge(b)).collect();
    }
    out
}

fn box_size(q_box: u64, dims: u32) -> u128 {
    (2 * q_box as u128 - 1).saturating_pow(dims)
}

/// `N_A(Q, delta, theta)`: the number of `(q, a)` in `Z^(d+1)` with
/// `|(q, a)| < Q` and `||(q, a + theta1) A - theta2|| < delta`.
pub fn count_n(query: &CountQuery, settings: &Settings, collect_hits: bool) -> Result<CountResult> {
    let mut out = count_n_multi(query, std::slice::from_ref(&query.delta), settings, collect_hits)?;
    Ok(out.remove(0))
}

/// [`count_n`] for several radii in one scan; `query.delta` is ignored.
/// Hits, if requested, are listed for the first radius.
pub fn count_n_multi(
    query: &CountQuery,
    deltas: &[Scalar],
    settings: &Settings,
    collect_hits: bool,
) -> Result<Vec<CountResult>> {
    settings.validate()?;
    check_deltas(deltas)?;
    let d = query.a.d();
    settings.check_budget(box_size(query.q_box, d as u32 + 1))?;
    with_limbs!(settings.precision, L => {
        let p = Prepared::<L>::new(&query.a, deltas, &query.theta, settings)?;
        let r = query.q_box as i64 - 1;
        let err = err_sum(&[(p.d + 1) as f64 * r as f64 * p.e_beta.max(p.e_rows), p.e_offset]);
        let mut rows = Vec::with_capacity(p.d + 1);
        rows.push(p.beta.clone());
        rows.extend(p.rows.iter().cloned());
        let ranges = vec![(-r, r); p.d + 1];
        let tallies = scan_box(&rows, &p.offset, &ranges, &p.classifiers(err), collect_hits, settings.workers);
        Ok(tallies.into_iter().map(|t| t.into_result(collect_hits)).collect())
    })
}

fn check_deltas(deltas: &[Scalar]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("at least one delta is required".into()));
    }
    deltas.iter().try_for_each(|x| check_positive(x, "delta"))
}

/// The number of `a` in `Z^d` with `|a| < Q` and
/// `||(q, a + theta1) A - theta2|| < delta` for one real `q`.
pub fn count_nprime_at(
    a: &ParamMatrix,
    q: &Scalar,
    q_box: u64,
    delta: &Scalar,
    theta: &[Scalar],
    settings: &Settings,
    collect_hits: bool,
) -> Result<CountResult> {
    settings.validate()?;
    let query = CountQuery::new(a.clone(), q_box, delta.clone(), theta.to_vec())?;
    settings.check_budget(box_size(q_box, a.d() as u32))?;
    with_limbs!(settings.precision, L => {
        let p = Prepared::<L>::new(&query.a, std::slice::from_ref(delta), theta, settings)?;
        let mut t = nprime_one(&p, q, q_box, collect_hits, settings.workers)?;
        Ok(t.remove(0).into_result(collect_hits))
    })
}

fn integer_value(q: &Scalar) -> Option<i64> {
    q.as_rational().filter(|r| r.is_integer()).and_then(|r| r.to_integer().to_i64())
}

fn nprime_one<const L: usize>(
    p: &Prepared<L>,
    q: &Scalar,
    q_box: u64,
    collect: bool,
    workers: usize,
) -> Result<Vec<Tally>> {
    let (base, e_base) = p.base_real(q)?;
    let r = q_box as i64 - 1;
    let err = err_sum(&[p.d as f64 * r as f64 * p.e_rows, e_base]);
    Ok(scan_box(&p.rows, &base, &vec![(-r, r); p.d], &p.classifiers(err), collect, workers))
}

/// Maximum of [`count_nprime_at`] over a finite candidate set of `q`. The
/// supremum over all real `q` is at least `count_certain`; the true maximum
/// over the candidates lies in `[count_certain, upper()]`.
pub fn count_nprime_over(
    a: &ParamMatrix,
    q_set: &[Scalar],
    q_box: u64,
    delta: &Scalar,
    theta: &[Scalar],
    settings: &Settings,
    collect_hits: bool,
) -> Result<CountResult> {
    let mut out = count_nprime_over_multi(a, q_set, q_box, std::slice::from_ref(delta), theta, settings, collect_hits)?;
    Ok(out.remove(0))
}

/// [`count_nprime_over`] for several radii at once.
pub fn count_nprime_over_multi(
    a: &ParamMatrix,
    q_set: &[Scalar],
    q_box: u64,
    deltas: &[Scalar],
    theta: &[Scalar],
    settings: &Settings,
    collect_hits: bool,
) -> Result<Vec<CountResult>> {
    settings.validate()?;
    check_deltas(deltas)?;
    if q_set.is_empty() {
        return Err(Error::InvalidArgument("q_set must not be empty".into()));
    }
    CountQuery::new(a.clone(), q_box, deltas[0].clone(), theta.to_vec())?;
    settings.check_budget(box_size(q_box, a.d() as u32).saturating_mul(q_set.len() as u128))?;
    with_limbs!(settings.precision, L => {
        let p = Prepared::<L>::new(a, deltas, theta, settings)?;
        let per_q: Vec<Result<Vec<Tally>>> = if q_set.len() == 1 {
            vec![nprime_one(&p, &q_set[0], q_box, collect_hits, settings.workers)]
        } else {
            parallel::map_slice(settings.workers, q_set, |q| nprime_one(&p, q, q_box, collect_hits, 1))
        };
        let per_q: Vec<Vec<Tally>> = per_q.into_iter().collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(deltas.len());
        let mut columns: Vec<std::vec::IntoIter<Tally>> = per_q.into_iter().map(|v| v.into_iter()).collect();
        for _ in 0..deltas.len() {
            let mut best: Option<(usize, Tally)> = None;
            let mut max_upper = 0;
            for (i, col) in columns.iter_mut().enumerate() {
                let t = col.next().expect("one tally per radius");
                max_upper = max_upper.max(t.certain + t.ambiguous);
                if best.as_ref().is_none_or(|(_, b)| t.certain > b.certain) {
                    best = Some((i, t));
                }
            }
            let (i, t) = best.expect("non-empty candidate set");
            let certain = t.certain;
            let mut r = t.into_result(collect_hits);
            r.count_ambiguous = max_upper - certain;
            r.best_q = Some(q_set[i].clone());
            out.push(r);
        }
        Ok(out)
    })
}

/// Points of the box lying exactly on the subspace: `(q, a + theta1) A -
/// theta2` is an integer vector. Exact for rational data; surd data is
/// decided at working precision.
pub fn count_exact_points(query: &CountQuery, settings: &Settings) -> Result<u64> {
    settings.validate()?;
    let d = query.a.d();
    settings.check_budget(box_size(query.q_box, d as u32 + 1))?;
    let tiny = Scalar::from_rational(num_rational::BigRational::new(
        1.into(),
        num_bigint::BigInt::from(1) << (settings.precision / 2),
    ));
    let mut near = query.clone();
    near.delta = tiny;
    let hits = count_n(&near, &Settings { guard_bits: settings.precision / 2 + 8, ..settings.clone() }, true)?;
    let (theta1, theta2) = query.a.split_theta(&query.theta)?;
    let mut n = 0;
    // hits only holds certain points; ambiguous ones are re-checked below
    let mut candidates: Vec<Vec<i64>> = hits.hits.unwrap_or_default().into_iter().map(|h| h.coords).collect();
    if hits.count_ambiguous > 0 {
        return Err(Error::Precision("cannot separate exact points from near points".into()));
    }
    for c in candidates.drain(..) {
        let v = query.a.row_apply(c[0], &c[1..], theta1)?;
        let zero = v.iter().zip(theta2).all(|(x, t)| {
            let r = x.sub(t);
            match r.as_rational() {
                Some(q) => q.is_integer(),
                None => crate::guard::dist_to_nearest_int(&r, settings.precision).is_ok_and(|b| b.contains_zero()),
            }
        });
        n += zero as u64;
    }
    Ok(n)
}

/// The pairs `(q, a)` with `floor(kappa Q) < q <= Q`, `0 <= a_i <= q` and
/// `||(q, a) A|| < delta`, stored flat with stride `d + 1`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ResonantSet {
    pub d: usize,
    pub points: Vec<i64>,
    /// Candidates that could not be decided within the guard band.
    pub ambiguous: u64,
}

impl ResonantSet {
    pub fn len(&self) -> usize {
        self.points.len() / (self.d + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.points.chunks_exact(self.d + 1)
    }
}

/// `floor(kappa Q)` for `0 <= kappa < 1`.
fn kappa_floor(kappa: &Scalar, q_box: u64) -> Result<i64> {
    let bad = || Error::InvalidArgument(format!("kappa must lie in [0, 1), got {kappa}"));
    if let Some(r) = kappa.as_rational() {
        if r < &num_rational::BigRational::zero() || r >= &num_rational::BigRational::one() {
            return Err(bad());
        }
        return (r * num_bigint::BigInt::from(q_box)).floor().to_integer().to_i64().ok_or_else(bad);
    }
    let k = kappa.eval(128)?;
    if !k.certainly_nonneg() || k.sub(&Ball::from_int(1, 128)).sign() != Some(std::cmp::Ordering::Less) {
        return Err(bad());
    }
    let prod = kappa.eval(256)?.mul_int(&q_box.into());
    prod.floor_certain()
        .and_then(|f| f.to_i64())
        .ok_or_else(|| Error::Precision(format!("cannot decide floor({kappa} * {q_box})")))
}

pub fn resonant_set(
    a: &ParamMatrix,
    q_box: u64,
    delta: &Scalar,
    kappa: &Scalar,
    settings: &Settings,
) -> Result<ResonantSet> {
    settings.validate()?;
    CountQuery::homogeneous(a.clone(), q_box, delta.clone())?;
    let q_lo = kappa_floor(kappa, q_box)? + 1;
    let d = a.d();
    let q_hi = q_box as i64;
    let needed: u128 = (q_lo..=q_hi).map(|q| (q as u128 + 1).saturating_pow(d as u32)).sum();
    settings.check_budget(needed)?;
    with_limbs!(settings.precision, L => {
        let p = Prepared::<L>::new(a, std::slice::from_ref(delta), &vec![Scalar::zero(); a.n()], settings)?;
        let e_max = p.e_beta.max(p.e_rows);
        let classifier = p.classifiers(err_sum(&[(d + 1) as f64 * q_hi as f64 * e_max]))[0];
        let scanner = Scanner { rows: &p.rows, classifier };
        let parts = parallel::map_range(settings.workers, q_lo, q_hi, |lo, hi| {
            let mut pts = Vec::new();
            let mut amb = 0u64;
            for q in lo..=hi {
                let base: Vec<Torus<L>> = p.beta.iter().map(|b| b.mul_i64(q)).collect();
                scanner.scan(&base, &vec![(0, q); d], |coords, _, v| match v {
                    PointVerdict::Hit => {
                        pts.push(q);
                        pts.extend_from_slice(coords);
                    }
                    PointVerdict::Ambiguous => amb += 1,
                    PointVerdict::Miss => {}
                });
            }
            (pts, amb)
        });
        let mut out = ResonantSet { d, points: Vec::new(), ambiguous: 0 };
        for (pts, amb) in parts {
            out.points.extend(pts);
            out.ambiguous += amb;
        }
        Ok(out)
    })
}

/// A new running minimum of `q (log q)^2 ||q x|| ||q y||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultRecord {
    pub q: u64,
    pub value: f64,
}

/// `||q x||` as f64, using the exact value when `q x` may be an integer.
fn line_dist<const L: usize>(x: &Scalar, t: Torus<L>, err: f64, q: u64) -> Result<f64> {
    let f = t.fold().to_f64();
    if f > err {
        return Ok(f);
    }
    if let Some(r) = x.as_rational() {
        let v = r * num_bigint::BigInt::from(q);
        if v.is_integer() {
            return Ok(0.0);
        }
        return crate::guard::dist_to_nearest_int(&Scalar::from_rational(v), 128).map(|b| b.mid_f64());
    }
    // an irrational combination can still be an integer multiple; decide at
    // working precision
    let b = x.eval(Torus::<L>::BITS + 64)?.mul_int(&q.into()).dist_to_nearest_int();
    Ok(if b.contains_zero() { 0.0 } else { b.mid_f64() })
}

/// Running-minimum records of `q (log q)^2 ||q x|| ||q y||` for
/// `2 <= q <= Q`, where `y = alpha x + beta`. Stops at the first zero.
pub fn mult_min_on_line(
    alpha: &Scalar,
    beta: &Scalar,
    x: &Scalar,
    q_max: u64,
    settings: &Settings,
) -> Result<Vec<MultRecord>> {
    settings.validate()?;
    if q_max < 2 {
        return Err(Error::InvalidArgument("Q must be at least 2".into()));
    }
    settings.check_budget(q_max as u128)?;
    let y = alpha.mul(x).add(beta);
    with_limbs!(settings.precision, L => {
        let (tx, ex) = encode::<L>(x)?;
        let (ty, ey) = encode::<L>(&y)?;
        let mut cx = tx;
        let mut cy = ty;
        let mut out: Vec<MultRecord> = Vec::new();
        for q in 2..=q_max {
            cx = cx.add(tx);
            cy = cy.add(ty);
            let nx = line_dist(x, cx, err_sum(&[q as f64 * ex]), q)?;
            let ny = line_dist(&y, cy, err_sum(&[q as f64 * ey]), q)?;
            let lq = log_conv(q as f64);
            let value = q as f64 * lq * lq * nx * ny;
            if out.last().is_none_or(|r| value < r.value) {
                out.push(MultRecord { q, value });
                if value == 0.0 {
                    break;
                }
            }
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::Signed;

    fn s(t: &str) -> Scalar {
        Scalar::parse(t).unwrap()
    }

    fn st() -> Settings {
        Settings::default()
    }

    /// Plain loop with exact rationals, certain hits only.
    fn naive_rational(a: &ParamMatrix, q_box: i64, delta: &BigRational) -> u64 {
        let mut n = 0;
        let r = q_box - 1;
        let vals: Vec<BigRational> = a.matrix().rationals().unwrap();
        let m = a.m();
        let d = a.d();
        let mut point = vec![-r; d + 1];
        loop {
            let ok = (0..m).all(|j| {
                let v: BigRational = (0..=d).map(|i| &vals[i * m + j] * BigRational::from_integer(point[i].into())).sum();
                let f = &v - v.round();
                f.abs() < *delta
            });
            n += ok as u64;
            let mut k = d + 1;
            loop {
                if k == 0 {
                    return n;
                }
                k -= 1;
                if point[k] < r {
                    point[k] += 1;
                    break;
                }
                point[k] = -r;
            }
        }
    }

    #[test]
    fn trivial_counts() {
        let q = CountQuery::homogeneous(ParamMatrix::zero(1, 1), 5, s("0.1")).unwrap();
        let r = count_n(&q, &st(), false).unwrap();
        assert_eq!((r.count_certain, r.count_ambiguous), (81, 0));

        let q = CountQuery::homogeneous(ParamMatrix::parse(&[&["sqrt(2)"], &["sqrt(3)"]]).unwrap(), 5, s("0.6")).unwrap();
        assert_eq!(count_n(&q, &st(), false).unwrap().count_certain, 81);
    }

    #[test]
    fn rational_matrix_matches_naive_loop() {
        let a = ParamMatrix::parse(&[&["1/3"], &["1/2"]]).unwrap();
        let q = CountQuery::homogeneous(a.clone(), 10, s("0.05")).unwrap();
        let r = count_n(&q, &st(), true).unwrap();
        let expect = naive_rational(&a, 10, &BigRational::new(1.into(), 20.into()));
        assert_eq!(r.count_certain, expect);
        assert_eq!(r.count_ambiguous, 0);
        assert_eq!(r.count_certain, 63);
        let hits = r.hits.unwrap();
        assert_eq!(hits.len() as u64, r.count_certain);
        assert!(hits.iter().all(|h| h.residual[0].abs() < 0.05));
    }

    #[test]
    fn boundary_points_are_ambiguous() {
        // ||a / 4|| = 1/4 exactly for odd a: neither inside nor outside
        let a = ParamMatrix::parse(&[&["0"], &["1/4"]]).unwrap();
        let q = CountQuery::homogeneous(a, 3, s("1/4")).unwrap();
        let r = count_n(&q, &st(), false).unwrap();
        // (q, a) in [-2, 2]^2: a = 0 certain (5 q's), a = +-2 give 1/2, a = +-1 ambiguous
        assert_eq!((r.count_certain, r.count_ambiguous), (5, 10));
    }

    #[test]
    fn count_is_independent_of_workers() {
        let a = ParamMatrix::parse(&[&["1/7", "sqrt(5)"], &["sqrt(2)-1", "2/3"], &["sqrt(3)", "-1/5"]]).unwrap();
        let theta = vec![s("1/3"), s("0"), s("sqrt(7)"), s("0.25")];
        let q = CountQuery::new(a, 12, s("0.2"), theta).unwrap();
        let base = count_n(&q, &st(), true).unwrap();
        for w in [2, 3, 8] {
            assert_eq!(count_n(&q, &st().with_workers(w), true).unwrap(), base);
        }
    }

    #[test]
    fn multi_radius_matches_single_scans() {
        let a = ParamMatrix::parse(&[&["1/7", "sqrt(5)"], &["sqrt(2)-1", "2/3"], &["sqrt(3)", "-1/5"]]).unwrap();
        let theta = vec![s("1/3"), s("0"), s("sqrt(7)"), s("0.25")];
        let deltas = [s("0.3"), s("0.05"), s("1/4"), s("0.5")];
        let q = CountQuery::new(a.clone(), 9, s("1"), theta.clone()).unwrap();
        let multi = count_n_multi(&q, &deltas, &st().with_workers(3), true).unwrap();
        for (d, m) in deltas.iter().zip(&multi) {
            let one = CountQuery::new(a.clone(), 9, d.clone(), theta.clone()).unwrap();
            let single = count_n(&one, &st(), false).unwrap();
            assert_eq!((m.count_certain, m.count_ambiguous), (single.count_certain, single.count_ambiguous));
        }
        assert_eq!(multi[0].hits.as_ref().unwrap().len() as u64, multi[0].count_certain);
        assert!(multi[1].hits.as_ref().is_some_and(|h| h.is_empty()));

        let q_set: Vec<Scalar> = (0..6).map(Scalar::from_int).chain([s("sqrt(2)")]).collect();
        let multi = count_nprime_over_multi(&a, &q_set, 9, &deltas, &theta, &st(), false).unwrap();
        for (d, m) in deltas.iter().zip(&multi) {
            let single = count_nprime_over(&a, &q_set, 9, d, &theta, &st(), false).unwrap();
            assert_eq!(m, &single);
        }
        assert!(count_n_multi(&q, &[], &st(), false).is_err());
    }

    #[test]
    fn exact_points_on_rational_subspace() {
        let a = ParamMatrix::parse(&[&["1/3"], &["1/2"]]).unwrap();
        let q = CountQuery::homogeneous(a, 10, s("0.1")).unwrap();
        // q / 3 + a / 2 integer iff 3 | q and 2 | a: 7 values of q, 9 of a
        assert_eq!(count_exact_points(&q, &st()).unwrap(), 7 * 9);
        let b = ParamMatrix::parse(&[&["sqrt(2)"], &["sqrt(3)"]]).unwrap();
        let q = CountQuery::homogeneous(b, 10, s("0.1")).unwrap();
        assert_eq!(count_exact_points(&q, &st()).unwrap(), 1);
    }

    #[test]
    fn homogeneous_counts_are_odd() {
        let a = ParamMatrix::parse(&[&["sqrt(2)"], &["(1+sqrt(5))/2"]]).unwrap();
        for delta in ["0.01", "0.1", "0.3"] {
            let q = CountQuery::homogeneous(a.clone(), 20, s(delta)).unwrap();
            let r = count_n(&q, &st(), false).unwrap();
            assert_eq!(r.count_ambiguous, 0);
            assert_eq!(r.count_certain % 2, 1);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let q = CountQuery::homogeneous(ParamMatrix::zero(2, 1), 100, s("0.1")).unwrap();
        let tight = Settings { budget: 1000, ..st() };
        assert!(matches!(count_n(&q, &tight, false), Err(Error::Budget { .. })));
    }

    #[test]
    fn nprime_examples() {
        let z = ParamMatrix::parse(&[&["sqrt(2)"], &["0"], &["0"]]).unwrap();
        let theta = vec![Scalar::zero(); 3];
        let r = count_nprime_at(&z, &s("0"), 4, &s("0.1"), &theta, &st(), false).unwrap();
        assert_eq!(r.count_certain, 49);

        let a = ParamMatrix::parse(&[&["0"], &["1"]]).unwrap();
        let th = vec![Scalar::zero(); 2];
        // ||a|| = 0 for every integer a
        let r = count_nprime_at(&a, &s("0"), 10, &s("0.25"), &th, &st(), false).unwrap();
        assert_eq!(r.count_certain, 19);
        let r = count_nprime_at(&a, &s("0"), 10, &s("0.25"), &[s("1/2"), s("0")], &st(), false).unwrap();
        assert_eq!(r.count_certain, 0);

        let a = ParamMatrix::parse(&[&["1/7"], &["sqrt(2)-1"]]).unwrap();
        let r = count_nprime_at(&a, &s("3"), 50, &s("0.05"), &th, &st(), false).unwrap();
        let naive = (-49i64..=49)
            .filter(|&k| {
                let v = 3.0 / 7.0 + k as f64 * (std::f64::consts::SQRT_2 - 1.0);
                (v - v.round()).abs() < 0.05
            })
            .count() as u64;
        assert_eq!(r.count_certain, naive);

        let qs: Vec<Scalar> = (0..=100).map(Scalar::from_int).collect();
        let over = count_nprime_over(&a, &qs, 50, &s("0.05"), &th, &st(), false).unwrap();
        let each: Vec<u64> = qs
            .iter()
            .map(|q| count_nprime_at(&a, q, 50, &s("0.05"), &th, &st(), false).unwrap().count_certain)
            .collect();
        assert_eq!(over.count_certain, *each.iter().max().unwrap());
        let best = over.best_q.unwrap();
        assert_eq!(each[integer_value(&best).unwrap() as usize], over.count_certain);
    }

    #[test]
    fn nprime_with_real_q() {
        let a = ParamMatrix::parse(&[&["1"], &["sqrt(2)"]]).unwrap();
        let th = vec![Scalar::zero(); 2];
        // q = 1/2: ||1/2 + k sqrt 2|| < 0.1
        let r = count_nprime_at(&a, &s("1/2"), 30, &s("0.1"), &th, &st(), false).unwrap();
        let naive = (-29i64..=29)
            .filter(|&k| {
                let v = 0.5 + k as f64 * std::f64::consts::SQRT_2;
                (v - v.round()).abs() < 0.1
            })
            .count() as u64;
        assert_eq!(r.count_certain, naive);
    }

    #[test]
    fn nprime_with_zero_block_depends_on_beta_only() {
        let a = ParamMatrix::parse(&[&["1/3"], &["0"]]).unwrap();
        let th = vec![Scalar::zero(); 2];
        let none = [s("1"), s("2")];
        let r = count_nprime_over(&a, &none, 6, &s("0.1"), &th, &st(), false).unwrap();
        assert_eq!(r.count_certain, 0);
        let some = [s("1"), s("3")];
        let r = count_nprime_over(&a, &some, 6, &s("0.1"), &th, &st(), false).unwrap();
        assert_eq!(r.count_certain, 11);
        assert_eq!(r.best_q.unwrap().text(), "3");
    }

    #[test]
    fn resonant_examples() {
        let r = resonant_set(&ParamMatrix::zero(1, 1), 3, &s("0.1"), &s("0"), &st()).unwrap();
        assert_eq!(r.len(), 9);
        let r = resonant_set(&ParamMatrix::zero(1, 1), 10, &s("0.1"), &s("0.9"), &st()).unwrap();
        assert!(r.iter().all(|p| p[0] == 10));
        assert_eq!(r.len(), 11);

        // (q, a) A = a sqrt 2, so membership depends on ||a sqrt 2|| alone
        let a = ParamMatrix::parse(&[&["0"], &["sqrt(2)"]]).unwrap();
        let r = resonant_set(&a, 100, &s("0.05"), &s("0"), &st()).unwrap();
        let good: Vec<i64> = (0..=100i64)
            .filter(|&k| {
                let v = k as f64 * std::f64::consts::SQRT_2;
                (v - v.round()).abs() < 0.05
            })
            .collect();
        assert_eq!(good, vec![0, 12, 17, 29, 41, 53, 58, 70, 82, 87, 99]);
        let expect: usize = (1..=100i64).map(|q| good.iter().filter(|&&k| k <= q).count()).sum();
        assert_eq!(r.len(), expect);
        assert!(r.iter().all(|p| good.contains(&p[1])));
        for p in r.iter() {
            assert!(p[1] >= 0 && p[1] <= p[0]);
        }
        assert!(resonant_set(&a, 10, &s("0.1"), &s("1"), &st()).is_err());
    }

    #[test]
    fn mult_line_examples() {
        let recs = mult_min_on_line(&s("0"), &s("1/2"), &s("sqrt(3)"), 100, &st()).unwrap();
        assert_eq!(recs.last().unwrap(), &MultRecord { q: 2, value: 0.0 });

        let recs = mult_min_on_line(&s("1"), &s("0"), &s("2/7"), 100, &st()).unwrap();
        assert_eq!(recs.last().unwrap().q, 7);
        assert_eq!(recs.last().unwrap().value, 0.0);

        let recs = mult_min_on_line(&s("1"), &s("0"), &s("(1+sqrt(5))/2"), 100_000, &st()).unwrap();
        assert!(recs.windows(2).all(|w| w[0].q < w[1].q && w[1].value < w[0].value));
        assert!(recs.last().unwrap().value > 0.0);
    }
}
