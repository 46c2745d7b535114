//! Covering statements: the Minkowski covering of the unit cube by balls
//! around near-resonant rationals, and the measure of the ubiquity union.
//!
//! Balls are sup-norm balls, `B(c, r) = {x : |x - c| < r}` with
//! `|x| = max |x_i|`.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::counting::resonant_set;
use crate::error::{Error, Result};
use crate::guard::{guarded_less_ball, GuardedBool};
use crate::matrix::ParamMatrix;
use crate::parallel;
use crate::scalar::Scalar;
use crate::settings::Settings;

/// `(q, a, b)` with `1 <= q <= Q`, `|q x_i - a_i| < (Q^(1/d) delta^(m/d))^-1`,
/// `|(q, a) A - b| < delta` and `0 <= a_i <= q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub q: u64,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
}

fn check_unit_point(x: &[Scalar], prec: u32) -> Result<Vec<Ball>> {
    x.iter()
        .map(|xi| {
            let b = xi.eval(prec)?;
            let one = Ball::from_int(1, prec);
            if b.sign() == Some(std::cmp::Ordering::Less) || one.sub(&b).sign() == Some(std::cmp::Ordering::Less) {
                return Err(Error::InvalidArgument(format!("x must lie in [0, 1]^d, got coordinate {xi}")));
            }
            Ok(b)
        })
        .collect()
}

/// `Q delta^m` as a ball, after checking `Q^(-1/m) <= delta <= 1`.
fn minkowski_volume(m: usize, q_box: u64, delta: &Scalar, prec: u32) -> Result<Ball> {
    if q_box == 0 {
        return Err(Error::InvalidArgument("Q must be at least 1".into()));
    }
    let dl = delta.eval(prec)?;
    let one = Ball::from_int(1, prec);
    if dl.sign() != Some(std::cmp::Ordering::Greater) || one.sub(&dl).sign() == Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
    }
    let vol = dl.powi(m as u32).mul_int(&q_box.into());
    if vol.sub(&one).sign() == Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidArgument(format!("delta = {delta} is below Q^(-1/m) for Q = {q_box}")));
    }
    Ok(vol)
}

/// Find a member of `R^0(Q, delta)` whose Minkowski ball contains `x`,
/// by exhaustive search over `q = 1..=Q`.
pub fn minkowski_witness(
    a: &ParamMatrix,
    x: &[Scalar],
    q_box: u64,
    delta: &Scalar,
    settings: &Settings,
) -> Result<Witness> {
    settings.validate()?;
    let (d, m) = (a.d(), a.m());
    if x.len() != d {
        return Err(Error::Dimension(format!("x must have length {d}, got {}", x.len())));
    }
    let prec = settings.precision;
    let xb = check_unit_point(x, prec)?;
    let vol = minkowski_volume(m, q_box, delta, prec)?;
    let dl = delta.eval(prec)?;
    let guard = settings.guard();
    let one = Ball::from_int(1, prec);
    let entries: Vec<Vec<Ball>> =
        (0..=d).map(|i| (0..m).map(|j| a.get(i, j).eval(prec)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    // f64 copies to skip hopeless candidates quickly
    let xf: Vec<f64> = xb.iter().map(|b| b.mid_f64()).collect();
    let rf = vol.mid_f64().powf(-1.0 / d.max(1) as f64);

    for q in 1..=q_box {
        let qi = q as i64;
        // |q x_i - a_i| < r <= 1 leaves floor and ceil of q x_i
        let mut choices: Vec<Vec<i64>> = Vec::with_capacity(d);
        for &xi in &xf {
            let t = q as f64 * xi;
            let mut c: Vec<i64> = [t.floor() as i64 - 1, t.floor() as i64, t.floor() as i64 + 1, t.floor() as i64 + 2]
                .into_iter()
                .filter(|&ai| ai >= 0 && ai <= qi && (t - ai as f64).abs() < rf + 1e-9)
                .collect();
            c.dedup();
            if c.is_empty() {
                break;
            }
            choices.push(c);
        }
        if choices.len() < d {
            continue;
        }
        let mut idx = vec![0usize; d];
        loop {
            let av: Vec<i64> = idx.iter().zip(&choices).map(|(&k, c)| c[k]).collect();
            if let Some(w) = try_candidate(qi, &av, &xb, &entries, &vol, &dl, &guard, &one) {
                return Ok(w);
            }
            // odometer over the candidate lists
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
    }
    Err(Error::Precision(format!(
        "no Minkowski witness found for x = {x:?}, Q = {q_box}, delta = {delta}"
    )))
}

#[allow(clippy::too_many_arguments)]
fn try_candidate(
    q: i64,
    av: &[i64],
    xb: &[Ball],
    entries: &[Vec<Ball>],
    vol: &Ball,
    dl: &Ball,
    guard: &Ball,
    one: &Ball,
) -> Option<Witness> {
    let d = av.len();
    for (ai, xi) in av.iter().zip(xb) {
        // |q x_i - a_i|^d Q delta^m < 1
        let diff = xi.mul_int(&q.into()).sub(&Ball::from_int(*ai, xi.prec())).abs();
        if guarded_less_ball(&diff.powi(d as u32).mul(vol), one, guard) != GuardedBool::True {
            return None;
        }
    }
    let m = entries[0].len();
    let mut b = Vec::with_capacity(m);
    for j in 0..m {
        let mut v = entries[0][j].mul_int(&q.into());
        for (i, ai) in av.iter().enumerate() {
            v = v.add(&entries[i + 1][j].mul_int(&(*ai).into()));
        }
        let bj = v.round_mid();
        let r = v.sub(&Ball::from_int(bj.clone(), v.prec())).abs();
        if guarded_less_ball(&r, dl, guard) != GuardedBool::True {
            return None;
        }
        b.push(bj.to_i64()?);
    }
    Some(Witness { q: q as u64, a: av.to_vec(), b })
}

/// Re-check a witness from the scalar expressions, independently of the
/// search.
pub fn verify_witness(
    a: &ParamMatrix,
    x: &[Scalar],
    q_box: u64,
    delta: &Scalar,
    w: &Witness,
    settings: &Settings,
) -> Result<GuardedBool> {
    let (d, m) = (a.d(), a.m());
    if w.a.len() != d || w.b.len() != m {
        return Err(Error::Dimension("witness has the wrong shape".into()));
    }
    if w.q == 0 || w.q > q_box || w.a.iter().any(|&ai| ai < 0 || ai as u64 > w.q) {
        return Ok(GuardedBool::False);
    }
    let prec = settings.precision;
    let g = settings.guard();
    let vol = delta.eval(prec)?.powi(m as u32).mul_int(&q_box.into());
    let one = Ball::from_int(1, prec);
    let q = Scalar::from_int(w.q as i64);
    let mut out = GuardedBool::True;
    for (xi, &ai) in x.iter().zip(&w.a) {
        let t = q.mul(xi).sub(&Scalar::from_int(ai)).eval(prec)?.abs();
        out = out.and(guarded_less_ball(&t.powi(d as u32).mul(&vol), &one, &g));
    }
    let vals = a.row_apply(w.q as i64, &w.a, &vec![Scalar::zero(); d])?;
    let dl = delta.eval(prec)?;
    for (v, &bj) in vals.iter().zip(&w.b) {
        let t = v.sub(&Scalar::from_int(bj)).eval(prec)?.abs();
        out = out.and(guarded_less_ball(&t, &dl, &g));
    }
    Ok(out)
}

/// `mu_d(B) / (4^(d+2) C_{d+1,m})`.
pub fn proof_kappa(d: u32, m: u32, ball_measure: f64) -> Result<f64> {
    if !(ball_measure > 0.0 && ball_measure <= 1.0) {
        return Err(Error::InvalidArgument(format!("ball measure must lie in (0, 1], got {ball_measure}")));
    }
    let c = 8f64.powi(d as i32 + 1) * PI.powi(2 * m as i32);
    Ok(ball_measure / (4f64.powi(d as i32 + 2) * c))
}

/// Sup-norm ball inside `[0, 1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestBall {
    pub fn unit_cube(d: usize) -> Self {
        TestBall { center: vec![0.5; d], radius: 0.5 }
    }

    pub fn measure(&self) -> f64 {
        (2.0 * self.radius).powi(self.center.len() as i32)
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.center.len() != d {
            return Err(Error::Dimension(format!("ball center must have length {d}")));
        }
        let inside = self.center.iter().all(|&c| c - self.radius >= 0.0 && c + self.radius <= 1.0);
        if !(self.radius > 0.0) || !inside {
            return Err(Error::InvalidArgument("test ball must be a non-empty ball inside [0, 1]^d".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampler {
    /// Exact measure of the union of intervals; `d = 1` only.
    Exact,
    /// Midpoints of a `resolution^d` grid over the test ball.
    Grid { resolution: u64 },
    MonteCarlo { samples: u64, seed: u64 },
}

/// Radius attached to each resonant point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusRule {
    /// `kappa^-1 / (Q^((d+1)/d) delta^(m/d))` for every ball.
    Ubiquity,
    /// `1 / (q Q^(1/d) delta^(m/d))` for the ball at `a/q`.
    Minkowski,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    /// Number of test points; 0 for the exact measure.
    pub samples: u64,
    pub covered: u64,
    /// Covered share of the test ball.
    pub fraction: f64,
    /// Standard error of a Monte-Carlo estimate.
    pub std_err: Option<f64>,
    /// Largest ball radius used.
    pub radius: f64,
    pub kappa: Scalar,
    pub ball_count: u64,
    /// Resonant candidates left undecided by the guard band (not used).
    pub ambiguous: u64,
    pub empty: bool,
}

/// Share of the test ball covered by balls around `a/q` for `(q, a)` in
/// `R^kappa(Q, delta)`.
pub fn ubiquity_coverage(
    a: &ParamMatrix,
    q_box: u64,
    delta: &Scalar,
    kappa: &Scalar,
    test_ball: &TestBall,
    sampler: &Sampler,
    settings: &Settings,
) -> Result<CoverageResult> {
    let k = kappa.to_f64();
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::InvalidArgument(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    coverage(a, q_box, delta, kappa, RadiusRule::Ubiquity, test_ball, sampler, settings)
}

/// Coverage with an explicit radius rule; `kappa = 0` is allowed with the
/// Minkowski rule.
#[allow(clippy::too_many_arguments)]
pub fn coverage(
    a: &ParamMatrix,
    q_box: u64,
    delta: &Scalar,
    kappa: &Scalar,
    rule: RadiusRule,
    test_ball: &TestBall,
    sampler: &Sampler,
    settings: &Settings,
) -> Result<CoverageResult> {
    settings.validate()?;
    let (d, m) = (a.d(), a.m());
    if d == 0 {
        return Err(Error::Dimension("coverage needs d >= 1".into()));
    }
    test_ball.validate(d)?;
    let dl = delta.to_f64();
    if !(dl > 0.0 && dl <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
    }
    let k = kappa.to_f64();
    if rule == RadiusRule::Ubiquity && !(k > 0.0) {
        return Err(Error::InvalidArgument("the ubiquity radius needs kappa > 0".into()));
    }
    let set = resonant_set(a, q_box, delta, kappa, settings)?;
    let (qf, df) = (q_box as f64, d as f64);
    let uniform = 1.0 / (k * qf.powf((df + 1.0) / df) * dl.powf(m as f64 / df));
    let radius_of = |q: i64| match rule {
        RadiusRule::Ubiquity => uniform,
        RadiusRule::Minkowski => 1.0 / (q as f64 * qf.powf(1.0 / df) * dl.powf(m as f64 / df)),
    };
    let balls: Vec<(Vec<f64>, f64)> = set
        .iter()
        .map(|p| {
            let q = p[0];
            (p[1..].iter().map(|&ai| ai as f64 / q as f64).collect(), radius_of(q))
        })
        .collect();
    let radius = balls.iter().map(|b| b.1).fold(0.0, f64::max);
    let mut res = CoverageResult {
        samples: 0,
        covered: 0,
        fraction: 0.0,
        std_err: None,
        radius,
        kappa: kappa.clone(),
        ball_count: balls.len() as u64,
        ambiguous: set.ambiguous,
        empty: balls.is_empty(),
    };
    if balls.is_empty() {
        return Ok(res);
    }
    match sampler {
        Sampler::Exact => {
            if d != 1 {
                return Err(Error::InvalidArgument("the exact measure is available for d = 1 only".into()));
            }
            let (lo, hi) = (test_ball.center[0] - test_ball.radius, test_ball.center[0] + test_ball.radius);
            res.fraction = union_length(&balls, lo, hi) / (hi - lo);
        }
        Sampler::Grid { resolution } => {
            let n = *resolution;
            if n == 0 {
                return Err(Error::InvalidArgument("grid resolution must be positive".into()));
            }
            let total = n.checked_pow(d as u32).filter(|&t| t <= settings.budget).ok_or(Error::Budget {
                needed: (n as u128).saturating_pow(d as u32),
                budget: settings.budget,
            })?;
            let index = BallIndex::new(&balls);
            let step = 2.0 * test_ball.radius / n as f64;
            let parts = parallel::map_range(settings.workers, 0, total as i64 - 1, |lo, hi| {
                let mut c = 0u64;
                let mut x = vec![0.0; d];
                for s in lo..=hi {
                    let mut r = s as u64;
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi = test_ball.center[i] - test_ball.radius + step * ((r % n) as f64 + 0.5);
                        r /= n;
                    }
                    c += index.covers(&x) as u64;
                }
                c
            });
            res.samples = total;
            res.covered = parts.into_iter().sum();
            res.fraction = res.covered as f64 / total as f64;
        }
        Sampler::MonteCarlo { samples, seed } => {
            if *samples == 0 {
                return Err(Error::InvalidArgument("sample count must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let pts: Vec<f64> = (0..samples * d as u64)
                .map(|_| rng.random::<f64>())
                .collect();
            let index = BallIndex::new(&balls);
            let parts = parallel::map_range(settings.workers, 0, *samples as i64 - 1, |lo, hi| {
                let mut c = 0u64;
                let mut x = vec![0.0; d];
                for s in lo..=hi {
                    for (i, xi) in x.iter_mut().enumerate() {
                        let u = pts[s as usize * d + i];
                        *xi = test_ball.center[i] - test_ball.radius + 2.0 * test_ball.radius * u;
                    }
                    c += index.covers(&x) as u64;
                }
                c
            });
            res.samples = *samples;
            res.covered = parts.into_iter().sum();
            let p = res.covered as f64 / *samples as f64;
            res.fraction = p;
            res.std_err = Some((p * (1.0 - p) / *samples as f64).sqrt());
        }
    }
    Ok(res)
}

/// Length of `[lo, hi]` covered by the open intervals `(c - r, c + r)`.
fn union_length(balls: &[(Vec<f64>, f64)], lo: f64, hi: f64) -> f64 {
    let mut iv: Vec<(f64, f64)> = balls
        .iter()
        .map(|(c, r)| ((c[0] - r).max(lo), (c[0] + r).min(hi)))
        .filter(|(a, b)| a < b)
        .collect();
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in iv {
        match cur {
            Some((s, e)) if a <= e => cur = Some((s, e.max(b))),
            Some((s, e)) => {
                total += e - s;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((s, e)) = cur {
        total += e - s;
    }
    total
}

/// Ball centers bucketed on a grid with cells as wide as the largest radius.
struct BallIndex<'a> {
    balls: &'a [(Vec<f64>, f64)],
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> BallIndex<'a> {
    fn new(balls: &'a [(Vec<f64>, f64)]) -> Self {
        let cell = balls.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-9);
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (k, (c, _)) in balls.iter().enumerate() {
            buckets.entry(Self::key(c, cell)).or_default().push(k);
        }
        BallIndex { balls, cell, buckets }
    }

    fn key(x: &[f64], cell: f64) -> Vec<i64> {
        x.iter().map(|&v| (v / cell).floor() as i64).collect()
    }

    fn covers(&self, x: &[f64]) -> bool {
        let base = Self::key(x, self.cell);
        let d = base.len();
        let mut off = vec![-1i64; d];
        loop {
            let key: Vec<i64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
            if let Some(ids) = self.buckets.get(&key) {
                for &k in ids {
                    let (c, r) = &self.balls[k];
                    if c.iter().zip(x).all(|(ci, xi)| (ci - xi).abs() < *r) {
                        return true;
                    }
                }
            }
            let mut i = 0;
            while i < d {
                off[i] += 1;
                if off[i] <= 1 {
                    break;
                }
                off[i] = -1;
                i += 1;
            }
            if i == d {
                return false;
            }
        }
    }
}
