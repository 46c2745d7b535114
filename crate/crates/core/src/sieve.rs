//! Fejér majorant and numerical checks of the multidimensional large sieve
//! and its dual on explicit instances.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ball::{Ball, CBall};
use crate::error::{Error, Result};
use crate::exponents::best_approx_records;
use crate::guard::{dist_to_nearest_int, guarded_le_ball, GuardedBool};
use crate::matrix::Matrix;
use crate::parallel;
use crate::scalar::Scalar;
use crate::settings::Settings;

/// `F_J(theta) = J^-2 |sum_{j=1}^J e(j theta)|^2`.
pub fn fejer_kernel(theta: &Scalar, j: u64, prec: u32) -> Result<Ball> {
    if j == 0 {
        return Err(Error::InvalidArgument("J must be at least 1".into()));
    }
    if theta.as_rational().is_some_and(|r| r.is_integer()) {
        return Ok(Ball::from_int(1, prec));
    }
    let w = prec + 32;
    let t = theta.eval(w)?;
    let jb = BigInt::from(j);
    // sin(pi x) = sin(2 pi (x/2))
    let (_, num) = t.mul_int(&jb).scale_pow2(-1).cos_sin_turns();
    let (_, den) = t.scale_pow2(-1).cos_sin_turns();
    let den = den.mul_int(&jb);
    let v = if den.contains_zero() {
        direct_fejer(&t, j)
    } else {
        num.div(&den)?.square()
    };
    Ok(v.with_prec(prec))
}

fn direct_fejer(t: &Ball, j: u64) -> Ball {
    let z = CBall::expi_turns(t);
    let mut p = z.clone();
    let mut s = z.clone();
    for _ in 1..j {
        p = p.mul(&z);
        s = s.add(&p);
    }
    let jj = BigInt::from(j) * BigInt::from(j);
    s.norm_sqr().div(&Ball::from_int(jj, t.prec())).expect("J > 0")
}

/// Outcome of a majorant scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FejerReport {
    pub delta: String,
    pub j: u64,
    pub grid_points: usize,
    /// Points with `||theta|| <= delta` (certainly or ambiguously).
    pub checked: usize,
    /// Indices into the grid where `(pi^2/4) F_J < 1` certainly.
    pub violations: Vec<usize>,
    pub ambiguous: usize,
}

/// Check `(pi^2/4) F_J(theta) >= 1` wherever `||theta|| <= delta`, with
/// `J = floor(1/(2 delta))`. Elsewhere the indicator is 0 and the bound is
/// trivial.
pub fn check_fejer_majorant(grid: &[Scalar], delta: &Scalar, settings: &Settings) -> Result<FejerReport> {
    settings.validate()?;
    let prec = settings.precision;
    let db = delta.eval(prec)?;
    let half = Ball::from_ratio(&1.into(), &2.into(), prec)?;
    if db.sign() != Some(std::cmp::Ordering::Greater) || guarded_le_ball(&db, &half, &Ball::zero(prec)) != GuardedBool::True {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1/2], got {delta}")));
    }
    let j = match delta.as_rational() {
        Some(r) => (BigRational::from_integer(1.into()) / (r * BigRational::from_integer(2.into())))
            .floor()
            .to_integer(),
        None => db.scale_pow2(1).recip()?.floor_certain().ok_or_else(|| {
            Error::Precision(format!("cannot decide floor(1/(2 delta)) for delta = {delta}"))
        })?,
    };
    let j: u64 = j.try_into().map_err(|_| Error::InvalidArgument("J out of range".into()))?;
    let guard = settings.guard();
    let quarter_pi2 = Ball::pi(prec).square().scale_pow2(-2);
    let one = Ball::from_int(1, prec);
    let verdicts = parallel::map_slice(settings.workers, grid, |theta| -> Result<Option<GuardedBool>> {
        let dist = dist_to_nearest_int(theta, prec)?;
        if guarded_le_ball(&dist, &db, &guard) == GuardedBool::False {
            return Ok(None);
        }
        let maj = quarter_pi2.mul(&fejer_kernel(theta, j, prec)?);
        Ok(Some(guarded_le_ball(&one, &maj, &guard)))
    });
    let mut report = FejerReport {
        delta: delta.text().to_string(),
        j,
        grid_points: grid.len(),
        checked: 0,
        violations: Vec::new(),
        ambiguous: 0,
    };
    for (i, v) in verdicts.into_iter().enumerate() {
        match v? {
            None => {}
            Some(GuardedBool::True) => report.checked += 1,
            Some(GuardedBool::False) => {
                report.checked += 1;
                report.violations.push(i);
            }
            Some(GuardedBool::Ambiguous) => {
                report.checked += 1;
                report.ambiguous += 1;
            }
        }
    }
    Ok(report)
}

/// `i / n` for `i = 0..n`.
pub fn uniform_grid(n: u64) -> Vec<Scalar> {
    (0..n).map(|i| Scalar::from_rational(BigRational::new(i.into(), n.into()))).collect()
}

/// A complex coefficient, either rectangular or `e(phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coeff {
    Rect(Scalar, Scalar),
    Unit(Scalar),
}

impl Coeff {
    fn eval(&self, prec: u32) -> Result<CBall> {
        match self {
            Coeff::Rect(re, im) => Ok(CBall::new(re.eval(prec)?, im.eval(prec)?)),
            Coeff::Unit(ph) => Ok(CBall::expi_turns(&ph.eval(prec)?)),
        }
    }
}

/// Points `y^(r)` in `[0,1)^k` with widths `lambda_i`, an integer box
/// `N_i < l_i <= N_i + L_i`, coefficients `c(l)` on the box (row-major, last
/// coordinate fastest) and `d(y^(r))` on the points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveInstance {
    pub points: Vec<Vec<Scalar>>,
    pub lambdas: Vec<Scalar>,
    pub boxes: Vec<(i64, u64)>,
    pub box_coeffs: Vec<Coeff>,
    pub point_coeffs: Vec<Coeff>,
}

impl SieveInstance {
    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn box_len(&self) -> usize {
        self.boxes.iter().map(|b| b.1 as usize).product()
    }

    fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.boxes.len() != k || self.points.iter().any(|p| p.len() != k) {
            return Err(Error::Dimension("points, lambdas and box must share the dimension k".into()));
        }
        if self.boxes.iter().any(|b| b.1 == 0) {
            return Err(Error::InvalidArgument("box side lengths must be positive".into()));
        }
        if self.box_coeffs.len() != self.box_len() || self.point_coeffs.len() != self.points.len() {
            return Err(Error::Dimension("coefficient count does not match box or point count".into()));
        }
        Ok(())
    }

    /// Every pair must satisfy `max_i ||y_i^r - y_i^s|| / lambda_i >= 1`,
    /// certainly.
    pub fn check_separation(&self, prec: u32) -> Result<()> {
        self.validate()?;
        let half = Ball::from_ratio(&1.into(), &2.into(), prec)?;
        let lams: Vec<Ball> = self.lambdas.iter().map(|l| l.eval(prec)).collect::<Result<_>>()?;
        for l in &lams {
            if l.sign() != Some(std::cmp::Ordering::Greater) || !half.sub(l).certainly_nonneg() {
                return Err(Error::InvalidArgument("each lambda must lie in (0, 1/2]".into()));
            }
        }
        for r in 0..self.points.len() {
            for s in r + 1..self.points.len() {
                let mut ok = false;
                for i in 0..self.k() {
                    let diff = self.points[r][i].sub(&self.points[s][i]);
                    let dist = dist_to_nearest_int(&diff, prec)?;
                    if dist.sub(&lams[i]).certainly_nonneg() {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    return Err(Error::Separation { r, s });
                }
            }
        }
        Ok(())
    }

    /// `prod_i (L_i^(1/2) + lambda_i^(-1/2))^2`.
    fn sieve_constant(&self, prec: u32) -> Result<Ball> {
        let mut c = Ball::from_int(1, prec);
        for (b, l) in self.boxes.iter().zip(&self.lambdas) {
            let f = Ball::from_int(b.1, prec).sqrt()?.add(&l.eval(prec)?.recip()?.sqrt()?);
            c = c.mul(&f.square());
        }
        Ok(c)
    }

    /// Calls `f(index, e(l . y))` for every `l` in the box, for point `r`.
    fn for_each_phase(&self, r: usize, prec: u32, mut f: impl FnMut(usize, &CBall)) -> Result<()> {
        let k = self.k();
        let mut starts = Vec::with_capacity(k);
        let mut steps = Vec::with_capacity(k);
        for i in 0..k {
            let y = self.points[r][i].eval(prec)?;
            steps.push(CBall::expi_turns(&y));
            starts.push(CBall::expi_turns(&y.mul_int(&BigInt::from(self.boxes[i].0 + 1))));
        }
        let mut idx = 0usize;
        self.phase_level(0, &CBall::one(prec), &starts, &steps, &mut idx, &mut f);
        Ok(())
    }

    fn phase_level(
        &self,
        level: usize,
        acc: &CBall,
        starts: &[CBall],
        steps: &[CBall],
        idx: &mut usize,
        f: &mut impl FnMut(usize, &CBall),
    ) {
        let mut cur = acc.mul(&starts[level]);
        for _ in 0..self.boxes[level].1 {
            if level + 1 == self.k() {
                f(*idx, &cur);
                *idx += 1;
            } else {
                self.phase_level(level + 1, &cur, starts, steps, idx, f);
            }
            cur = cur.mul(&steps[level]);
        }
    }
}

/// Both sides of one sieve inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveCheck {
    pub lhs: f64,
    pub lhs_hi: f64,
    pub rhs: f64,
    pub rhs_lo: f64,
    pub holds: GuardedBool,
}

impl SieveCheck {
    fn new(lhs: &Ball, rhs: &Ball, guard: &Ball) -> SieveCheck {
        SieveCheck {
            lhs: lhs.mid_f64(),
            lhs_hi: lhs.upper_f64(),
            rhs: rhs.mid_f64(),
            rhs_lo: rhs.lower_f64(),
            holds: guarded_le_ball(lhs, rhs, guard),
        }
    }

    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// `sum_r |S(y^r)|^2 <= prod (L_i^(1/2) + lambda_i^(-1/2))^2 sum_l |c(l)|^2`
/// with `S(y) = sum_l c(l) e(l . y)`.
pub fn large_sieve_check(inst: &SieveInstance, settings: &Settings) -> Result<SieveCheck> {
    let prec = settings.precision;
    inst.check_separation(prec)?;
    let coeffs: Vec<CBall> = inst.box_coeffs.iter().map(|c| c.eval(prec)).collect::<Result<_>>()?;
    let mut lhs = Ball::zero(prec);
    for r in 0..inst.points.len() {
        let mut s = CBall::zero(prec);
        inst.for_each_phase(r, prec, |i, e| s = s.add(&coeffs[i].mul(e)))?;
        lhs = lhs.add(&s.norm_sqr());
    }
    let mass = coeffs.iter().fold(Ball::zero(prec), |acc, c| acc.add(&c.norm_sqr()));
    let rhs = inst.sieve_constant(prec)?.mul(&mass);
    Ok(SieveCheck::new(&lhs, &rhs, &settings.guard()))
}

/// `sum_l |T(l)|^2 <= prod (L_i^(1/2) + lambda_i^(-1/2))^2 sum_r |d(y^r)|^2`
/// with `T(l) = sum_r d(y^r) e(l . y^r)`.
pub fn dual_sieve_check(inst: &SieveInstance, settings: &Settings) -> Result<SieveCheck> {
    let prec = settings.precision;
    inst.check_separation(prec)?;
    let ds: Vec<CBall> = inst.point_coeffs.iter().map(|c| c.eval(prec)).collect::<Result<_>>()?;
    let mut t = vec![CBall::zero(prec); inst.box_len()];
    for (r, d) in ds.iter().enumerate() {
        inst.for_each_phase(r, prec, |i, e| t[i] = t[i].add(&d.mul(e)))?;
    }
    let lhs = t.iter().fold(Ball::zero(prec), |acc, x| acc.add(&x.norm_sqr()));
    let mass = ds.iter().fold(Ball::zero(prec), |acc, c| acc.add(&c.norm_sqr()));
    let rhs = inst.sieve_constant(prec)?.mul(&mass);
    Ok(SieveCheck::new(&lhs, &rhs, &settings.guard()))
}

/// Shape limits for [`random_instance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomShape {
    pub max_k: usize,
    pub max_points: usize,
    pub max_side: u64,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape { max_k: 3, max_points: 50, max_side: 20 }
    }
}

const DYADIC_BITS: u32 = 32;

fn dyadic(v: i64) -> Scalar {
    Scalar::from_rational(BigRational::new(v.into(), BigInt::from(1) << DYADIC_BITS))
}

/// Uniform on the unit disc, rounded to a dyadic grid.
fn disc_coeff(rng: &mut ChaCha8Rng) -> Coeff {
    let one = 1i64 << DYADIC_BITS;
    loop {
        let a: i64 = rng.random_range(-one..=one);
        let b: i64 = rng.random_range(-one..=one);
        let (x, y) = (a as f64 / one as f64, b as f64 / one as f64);
        if x * x + y * y <= 1.0 {
            return Coeff::Rect(dyadic(a), dyadic(b));
        }
    }
}

/// Instance number `index` of the stream for `seed`. Points are drawn
/// uniformly and kept only if they stay separated from the ones already
/// chosen, so the point count can fall short of the drawn target.
pub fn random_instance(seed: u64, index: u64, shape: RandomShape) -> SieveInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let k = rng.random_range(1..=shape.max_k);
    let lam_inv: Vec<u64> = (0..k).map(|_| rng.random_range(2..=12)).collect();
    let lambdas: Vec<Scalar> =
        lam_inv.iter().map(|&s| Scalar::from_rational(BigRational::new(1.into(), s.into()))).collect();
    let boxes: Vec<(i64, u64)> =
        (0..k).map(|_| (rng.random_range(-10..=10), rng.random_range(1..=shape.max_side))).collect();
    let target = rng.random_range(1..=shape.max_points);
    let one = 1i64 << DYADIC_BITS;
    let mut raw: Vec<Vec<i64>> = Vec::with_capacity(target);
    let mut attempts = 0;
    while raw.len() < target && attempts < 50 * target {
        attempts += 1;
        let p: Vec<i64> = (0..k).map(|_| rng.random_range(0..one)).collect();
        // separated iff some coordinate differs by at least lambda_i mod 1;
        // decided exactly on the integer numerators
        let sep = raw.iter().all(|q| {
            (0..k).any(|i| {
                let d = (p[i] - q[i]).rem_euclid(one);
                let dist = d.min(one - d) as u128;
                dist * lam_inv[i] as u128 >= one as u128
            })
        });
        if sep {
            raw.push(p);
        }
    }
    let points: Vec<Vec<Scalar>> = raw.iter().map(|p| p.iter().map(|&v| dyadic(v)).collect()).collect();
    let n_box: usize = boxes.iter().map(|b| b.1 as usize).product();
    let box_coeffs = (0..n_box).map(|_| disc_coeff(&mut rng)).collect();
    let point_coeffs = (0..points.len()).map(|_| disc_coeff(&mut rng)).collect();
    SieveInstance { points, lambdas, boxes, box_coeffs, point_coeffs }
}

/// `min ||M h^T||` over `0 < |h| <= J - 1`: the separation modulo 1 of the
/// points `M j^T`, `j in [1, J]^cols`. `None` when `J = 1` (a single point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub j: u64,
    pub min_lo: Option<f64>,
    pub min_hi: Option<f64>,
    pub argmin: Option<Vec<i64>>,
}

pub fn separation_of_sieve_points(mat: &Matrix, j: u64, settings: &Settings) -> Result<Separation> {
    if j == 0 {
        return Err(Error::InvalidArgument("J must be at least 1".into()));
    }
    if j == 1 {
        return Ok(Separation { j, min_lo: None, min_hi: None, argmin: None });
    }
    let search = best_approx_records(mat, j - 1, settings)?;
    let last = search.records.last().expect("at least one record");
    if last.exact_zero {
        return Err(Error::RationalDependence(format!("points coincide modulo 1 for difference {:?}", last.q)));
    }
    Ok(Separation { j, min_lo: Some(last.err_lo), min_hi: Some(last.err_hi), argmin: Some(last.q.clone()) })
}
