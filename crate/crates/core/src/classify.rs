//! Closed-form classification, range and dimension formulas for affine
//! subspaces, evaluated exactly in rationals.
//!
//! Exponents are inputs. Whether they are true values or finite-range
//! estimates is recorded in the profile's `source` and carried into every
//! verdict.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::approx_fn::ApproxFunction;
use crate::error::{Error, Result};
use crate::guard::GuardedBool;
use crate::scalar::Scalar;

/// A rational exponent or `+inf`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ext {
    Finite(BigRational),
    Infinite,
}

impl Ext {
    pub fn int(v: i64) -> Ext {
        Ext::Finite(BigRational::from_integer(v.into()))
    }

    pub fn ratio(p: i64, q: i64) -> Ext {
        Ext::Finite(BigRational::new(p.into(), q.into()))
    }

    /// Exact value of a finite `f64`; `+inf` maps to [`Ext::Infinite`].
    pub fn from_f64(v: f64) -> Result<Ext> {
        if v == f64::INFINITY {
            return Ok(Ext::Infinite);
        }
        BigRational::from_float(v)
            .map(Ext::Finite)
            .ok_or_else(|| Error::InvalidArgument(format!("exponent must be a number or +inf, got {v}")))
    }

    /// `inf`, `+inf`, or any rational scalar expression.
    pub fn parse(text: &str) -> Result<Ext> {
        let t = text.trim();
        if matches!(t, "inf" | "+inf" | "infinity" | "+infinity") {
            return Ok(Ext::Infinite);
        }
        let s = Scalar::parse(t)?;
        s.as_rational()
            .cloned()
            .map(Ext::Finite)
            .ok_or_else(|| Error::InvalidArgument(format!("exponent must be rational or inf, got {t:?}")))
    }

    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            Ext::Finite(r) => Some(r),
            Ext::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Ext::Infinite)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::Finite(r) => r.to_f64().unwrap_or(f64::NAN),
            Ext::Infinite => f64::INFINITY,
        }
    }

    fn cmp_rat(&self, t: &BigRational) -> Ordering {
        match self {
            Ext::Finite(r) => r.cmp(t),
            Ext::Infinite => Ordering::Greater,
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::Finite(r) => write!(f, "{r}"),
            Ext::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Ext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => Ext::parse(&t).map_err(serde::de::Error::custom),
            Raw::Int(v) => Ok(Ext::int(v)),
            Raw::Float(v) => Ext::from_f64(v).map_err(serde::de::Error::custom),
        }
    }
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn int(v: u32) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Exponent data of an affine subspace parametrized by a `(d+1) x m` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceProfile {
    pub d: u32,
    pub m: u32,
    /// `omega(A)`.
    pub omega: Ext,
    /// `omega'(A)`, used only when `omega` is finite.
    #[serde(default)]
    pub omega_log: Option<Ext>,
    /// `omega(A')`.
    #[serde(default)]
    pub omega_prime_block: Option<Ext>,
    /// `sigma(A) = omega(A^T)`.
    #[serde(default)]
    pub sigma: Option<Ext>,
    /// Sparseness of the support set, in `[0, 1]`.
    #[serde(default = "default_nu")]
    pub nu: Ext,
    /// Values within `tol` of a threshold are reported as undetermined.
    #[serde(default = "default_tol")]
    pub tol: Ext,
    /// Where the exponents came from (asserted, or an estimate and its range).
    #[serde(default = "default_source")]
    pub source: String,
}

fn default_nu() -> Ext {
    Ext::int(1)
}

fn default_tol() -> Ext {
    Ext::int(0)
}

fn default_source() -> String {
    "asserted".into()
}

impl SubspaceProfile {
    pub fn new(d: u32, m: u32, omega: Ext) -> Self {
        SubspaceProfile {
            d,
            m,
            omega,
            omega_log: None,
            omega_prime_block: None,
            sigma: None,
            nu: default_nu(),
            tol: default_tol(),
            source: default_source(),
        }
    }

    pub fn n(&self) -> u32 {
        self.d + self.m
    }

    pub fn with_sigma(mut self, sigma: Ext) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_omega_log(mut self, w: Ext) -> Self {
        self.omega_log = Some(w);
        self
    }

    pub fn with_block(mut self, w: Ext) -> Self {
        self.omega_prime_block = Some(w);
        self
    }

    pub fn with_tol(mut self, tol: BigRational) -> Self {
        self.tol = Ext::Finite(tol);
        self
    }

    fn tol(&self) -> BigRational {
        self.tol.finite().cloned().unwrap_or_else(BigRational::zero)
    }

    /// Dirichlet floors and the range of `nu`, relaxed by `tol`.
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        let tol = match &self.tol {
            Ext::Finite(t) if !t.is_negative() => t.clone(),
            _ => return Err(Error::InvalidArgument("tol must be a non-negative rational".into())),
        };
        let floor = rat(self.m as i64, self.d as i64 + 1) - &tol;
        if self.omega.cmp_rat(&floor) == Ordering::Less {
            return Err(Error::InvalidArgument(format!(
                "omega = {} is below the Dirichlet exponent m/(d+1) = {}/{}",
                self.omega,
                self.m,
                self.d + 1
            )));
        }
        if let Some(s) = &self.sigma {
            let floor = rat(self.d as i64 + 1, self.m as i64) - &tol;
            if s.cmp_rat(&floor) == Ordering::Less {
                return Err(Error::InvalidArgument(format!(
                    "sigma = {s} is below the Dirichlet exponent (d+1)/m = {}/{}",
                    self.d + 1,
                    self.m
                )));
            }
        }
        match &self.nu {
            Ext::Finite(v) if !v.is_negative() && v <= &BigRational::one() => {}
            _ => return Err(Error::InvalidArgument(format!("nu must lie in [0, 1], got {}", self.nu))),
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: SubspaceProfile = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("profile: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictValue {
    Yes,
    No,
    Undetermined,
}

impl fmt::Display for VerdictValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictValue::Yes => "yes",
            VerdictValue::No => "no",
            VerdictValue::Undetermined => "undetermined",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    /// The clause that decided the value.
    pub reason: String,
    /// Set when an input lies within `tol` of a threshold.
    pub boundary: bool,
    /// Provenance of the exponents that fed the verdict.
    pub source: String,
}

impl Verdict {
    fn new(value: VerdictValue, reason: impl Into<String>, source: &str) -> Self {
        Verdict { value, reason: reason.into(), boundary: false, source: source.to_string() }
    }

    fn near(reason: impl Into<String>, source: &str) -> Self {
        Verdict { value: VerdictValue::Undetermined, reason: reason.into(), boundary: true, source: source.to_string() }
    }
}

/// Position of a value relative to a threshold, with a tolerance band.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Below,
    At,
    Above,
    /// Within a positive tolerance of the threshold.
    Near,
}

fn side(x: &Ext, t: &BigRational, tol: &BigRational) -> Side {
    let x = match x {
        Ext::Infinite => return Side::Above,
        Ext::Finite(x) => x,
    };
    if tol.is_positive() && (x - t).abs() <= *tol {
        return Side::Near;
    }
    match x.cmp(t) {
        Ordering::Less => Side::Below,
        Ordering::Equal => Side::At,
        Ordering::Greater => Side::Above,
    }
}

/// Extremal iff `omega(A) <= n`.
pub fn classify_extremal(p: &SubspaceProfile) -> Verdict {
    let n = int(p.n());
    let src = &p.source;
    match side(&p.omega, &n, &p.tol()) {
        Side::Below | Side::At => Verdict::new(VerdictValue::Yes, format!("omega = {} <= n = {n}", p.omega), src),
        Side::Above => Verdict::new(VerdictValue::No, format!("omega = {} > n = {n}", p.omega), src),
        Side::Near => Verdict::near(format!("omega = {} within tol of n = {n}", p.omega), src),
    }
}

/// Khintchine type: decided by `omega(A)` off the critical value `n`, and by
/// `omega'(A)` at it (convergence side only).
pub fn classify_khintchine(p: &SubspaceProfile) -> Verdict {
    let n = int(p.n());
    let tol = p.tol();
    let src = &p.source;
    match side(&p.omega, &n, &tol) {
        Side::Below => Verdict::new(VerdictValue::Yes, format!("omega = {} < n = {n}", p.omega), src),
        Side::Above => Verdict::new(VerdictValue::No, format!("omega = {} > n = {n}", p.omega), src),
        Side::Near => Verdict::near(format!("omega = {} within tol of n = {n}", p.omega), src),
        Side::At => {
            let Some(wl) = &p.omega_log else {
                return Verdict::new(VerdictValue::Undetermined, "omega = n and omega' is not given", src);
            };
            let minus_one = -BigRational::one();
            match (side(wl, &minus_one, &tol), side(wl, &n, &tol)) {
                (Side::Below, _) => Verdict::new(
                    VerdictValue::Yes,
                    format!("omega = n and omega' = {wl} < -1: Khintchine type for convergence"),
                    src,
                ),
                (_, Side::Above) => Verdict::new(
                    VerdictValue::No,
                    format!("omega = n and omega' = {wl} > n: not of Khintchine type for convergence"),
                    src,
                ),
                (Side::Near, _) | (_, Side::Near) => {
                    Verdict::near(format!("omega = n and omega' = {wl} within tol of -1 or n"), src)
                }
                _ => Verdict::new(VerdictValue::Undetermined, format!("omega = n and omega' = {wl} in [-1, n]"), src),
            }
        }
    }
}

/// Strong Khintchine type for convergence if `omega(A') < n`; no converse.
pub fn classify_strong_ktc(p: &SubspaceProfile) -> Verdict {
    let n = int(p.n());
    let src = &p.source;
    let Some(w) = &p.omega_prime_block else {
        return Verdict::new(VerdictValue::Undetermined, "omega(A') is not given", src);
    };
    match side(w, &n, &p.tol()) {
        Side::Below => Verdict::new(VerdictValue::Yes, format!("omega(A') = {w} < n = {n}"), src),
        Side::Near => Verdict::near(format!("omega(A') = {w} within tol of n = {n}"), src),
        _ => Verdict::new(VerdictValue::Undetermined, format!("omega(A') = {w} >= n = {n}: no converse known"), src),
    }
}

fn sigma_of(p: &SubspaceProfile) -> Result<&Ext> {
    p.sigma.as_ref().ok_or_else(|| Error::InvalidArgument("the profile has no sigma".into()))
}

/// `min{(1/d)(1 - m/max{n, omega}), (m sigma - d)/n}`.
pub fn sigma_upper_bound(p: &SubspaceProfile) -> Result<Ext> {
    if p.d == 0 {
        return Err(Error::InvalidArgument("sigma_upper_bound needs d >= 1".into()));
    }
    let (d, m, n) = (int(p.d), int(p.m), int(p.n()));
    let first = match &p.omega {
        Ext::Finite(w) if w > &n => (BigRational::one() - &m / w) / &d,
        Ext::Finite(_) => (BigRational::one() - &m / &n) / &d,
        Ext::Infinite => BigRational::one() / &d,
    };
    Ok(match sigma_of(p)? {
        Ext::Finite(s) => Ext::Finite(first.min((&m * s - &d) / &n)),
        Ext::Infinite => Ext::Finite(first),
    })
}

/// `max{1/n, omega/(n + (n-1) omega)}`.
pub fn sigma_lower_bound(omega: &Ext, n: u32) -> Result<Ext> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let nr = int(n);
    let first = BigRational::one() / &nr;
    let second = match omega {
        Ext::Finite(w) => {
            if w.is_negative() {
                return Err(Error::InvalidArgument(format!("omega must be non-negative, got {w}")));
            }
            w / (&nr + (&nr - BigRational::one()) * w)
        }
        Ext::Infinite if n == 1 => return Ok(Ext::Infinite),
        Ext::Infinite => BigRational::one() / (&nr - BigRational::one()),
    };
    Ok(Ext::Finite(first.max(second)))
}

/// The three interior knots `1/omega`, `1/omega + sigma - (d+1)/m` and
/// `sigma` of the dimension bound (finite `omega` and `sigma`).
pub fn dim_knots(p: &SubspaceProfile) -> Result<[BigRational; 3]> {
    let (w, s) = match (&p.omega, sigma_of(p)?) {
        (Ext::Finite(w), Ext::Finite(s)) if w.is_positive() => (w, s),
        _ => return Err(Error::InvalidArgument("knots need finite positive omega and finite sigma".into())),
    };
    let inv = w.recip();
    let k2 = &inv + s - rat(p.d as i64 + 1, p.m as i64);
    Ok([inv, k2, s.clone()])
}

/// Value of each piece of the dimension bound whose range contains `tau`.
pub fn dim_pieces(tau: &BigRational, p: &SubspaceProfile) -> Result<[Option<BigRational>; 4]> {
    let (d, m, n) = (int(p.d), int(p.m), int(p.n()));
    let one = BigRational::one();
    if tau < &(&one / &n) {
        return Err(Error::InvalidArgument(format!("tau = {tau} is below 1/n")));
    }
    let sigma = sigma_of(p)?;
    // 1/omega, with 1/inf = 0
    let inv_w = match &p.omega {
        Ext::Finite(w) if w.is_positive() => w.recip(),
        Ext::Finite(_) => return Err(Error::InvalidArgument("omega must be positive".into())),
        Ext::Infinite => BigRational::zero(),
    };
    let dirichlet = rat(p.d as i64 + 1, p.m as i64);
    let tp1 = tau + &one;
    let mut out: [Option<BigRational>; 4] = [None, None, None, None];
    if tau <= &inv_w {
        out[0] = Some((&n + &one) / &tp1 - &m);
    }
    let k2 = match sigma {
        Ext::Finite(s) => Ext::Finite(&inv_w + s - &dirichlet),
        Ext::Infinite => Ext::Infinite,
    };
    if tau >= &inv_w && k2.cmp_rat(tau) != Ordering::Less {
        // ((d+1) omega - m) / ((tau+1) omega) = ((d+1) - m/omega) / (tau+1)
        out[1] = Some((&d + &one - &m * &inv_w) / &tp1);
    }
    if let (Ext::Finite(k2), Ext::Finite(s)) = (&k2, sigma) {
        if tau >= k2 && tau <= s {
            out[2] = Some(&m * (s - tau) / &tp1);
        }
    }
    if sigma.cmp_rat(tau) != Ordering::Greater {
        out[3] = Some(BigRational::zero());
    }
    Ok(out)
}

/// Upper bound for `dim S_n(tau, theta) ∩ L`: the least piece whose range
/// contains `tau`.
pub fn dim_upper(tau: &BigRational, p: &SubspaceProfile) -> Result<BigRational> {
    dim_pieces(tau, p)?
        .into_iter()
        .flatten()
        .min()
        .ok_or_else(|| Error::InvalidArgument(format!("no piece of the dimension bound covers tau = {tau}")))
}

/// Half-open range `lower < s <= upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SRange {
    pub lower: Option<Ext>,
    pub upper: Ext,
    /// False when the hypothesis of the corresponding statement fails; the
    /// range is then empty.
    pub valid: bool,
    pub note: String,
}

impl SRange {
    fn new(lower: BigRational, d: u32, note: String) -> Self {
        SRange { lower: Some(Ext::Finite(lower)), upper: Ext::int(d as i64), valid: true, note }
    }

    fn invalid(d: u32, note: String) -> Self {
        SRange { lower: None, upper: Ext::int(d as i64), valid: false, note }
    }

    pub fn contains(&self, s: &BigRational) -> bool {
        match (&self.lower, self.valid) {
            (Some(Ext::Finite(lo)), true) => s > lo && self.upper.cmp_rat(s) != Ordering::Less,
            _ => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        match (&self.lower, self.valid) {
            (Some(lo), true) => lo.cmp_rat(self.upper.finite().expect("finite upper")) != Ordering::Less,
            _ => true,
        }
    }

    /// `self ⊇ other`.
    pub fn contains_range(&self, other: &SRange) -> bool {
        if other.is_empty() {
            return true;
        }
        if self.is_empty() {
            return false;
        }
        let (a, b) = (self.lower.as_ref().and_then(Ext::finite), other.lower.as_ref().and_then(Ext::finite));
        matches!((a, b), (Some(a), Some(b)) if a <= b) && self.upper == other.upper
    }
}

/// `tau0 = 1/max{m, omega}`.
pub fn tau0(m: u32, omega: &Ext) -> BigRational {
    match omega {
        Ext::Finite(w) if w > &int(m) => w.recip(),
        Ext::Finite(_) => rat(1, m as i64),
        Ext::Infinite => BigRational::zero(),
    }
}

/// Ranges of `s` for the convergence, divergence and strong statements.
pub fn jarnik_s_ranges(p: &SubspaceProfile) -> (SRange, SRange, SRange) {
    let (d, m, n) = (int(p.d), int(p.m), int(p.n()));
    let one = BigRational::one();
    let (conv, div) = match &p.omega {
        Ext::Finite(w) if w < &n => {
            let conv = SRange::new(((&d + &one) * w - &m) / (w + &one), p.d, format!("omega = {w} < n"));
            let t0 = tau0(p.m, &p.omega);
            let div = SRange::new((&d + &one - &m * &t0) / (&t0 + &one), p.d, format!("omega = {w} < n, tau0 = {t0}"));
            (conv, div)
        }
        w => {
            let note = format!("omega = {w} >= n: hypothesis fails");
            (SRange::invalid(p.d, note.clone()), SRange::invalid(p.d, note))
        }
    };
    let nu = p.nu.finite().cloned().unwrap_or_else(BigRational::one);
    let strong = match &p.omega_prime_block {
        Some(Ext::Finite(w)) if (nu.is_zero() || w < &(&n / &nu)) => {
            SRange::new((w * (&d + &nu) - &m) / (w + &one), p.d, format!("omega(A') = {w} < n/nu, nu = {nu}"))
        }
        Some(Ext::Infinite) => SRange::invalid(p.d, "omega(A') = inf".into()),
        Some(w) => SRange::invalid(p.d, format!("omega(A') = {w} >= n/nu with nu = {nu}: hypothesis fails")),
        None => SRange::invalid(p.d, "omega(A') is not given".into()),
    };
    (conv, div, strong)
}

fn power_log_exponents(psi: &ApproxFunction) -> Result<(BigRational, BigRational)> {
    psi.validate()?;
    psi.exponents()
}

/// Convergence of `sum psi(q)^(m+s) q^(d-s)` for `psi = c q^-b (log q)^-b'`.
pub fn khintchine_sum_converges(psi: &ApproxFunction, d: u32, m: u32, s: &BigRational) -> Result<GuardedBool> {
    let (b, bl) = power_log_exponents(psi)?;
    let ms = int(m) + s;
    let e = &b * &ms - (int(d) - s);
    Ok(log_series(&e, &(&bl * &ms)))
}

/// Convergence of `sum psi(q) log q`.
pub fn mult_sum_converges(psi: &ApproxFunction) -> Result<GuardedBool> {
    let (b, bl) = power_log_exponents(psi)?;
    Ok(log_series(&b, &(bl - BigRational::one())))
}

/// `sum q^-e (log q)^-f` converges iff `e > 1`, or `e = 1` and `f > 1`.
fn log_series(e: &BigRational, f: &BigRational) -> GuardedBool {
    let one = BigRational::one();
    let conv = e > &one || (e == &one && f > &one);
    if conv {
        GuardedBool::True
    } else {
        GuardedBool::False
    }
}

/// Multiplicative Khintchine type for convergence of the planar line
/// `y = alpha x + beta`, from `omega` of the column `(alpha; beta)`.
pub fn classify_mult_line(omega_col: &Ext, alpha_nonzero: bool, tol: &BigRational, source: &str) -> Verdict {
    let two = int(2);
    match side(omega_col, &two, tol) {
        Side::Above => Verdict::new(VerdictValue::No, format!("omega(alpha; beta) = {omega_col} > 2: not strongly extremal"), source),
        Side::Near => Verdict::near(format!("omega(alpha; beta) = {omega_col} within tol of 2"), source),
        Side::At => Verdict::new(VerdictValue::Undetermined, "omega(alpha; beta) = 2: boundary case", source),
        Side::Below if alpha_nonzero => {
            Verdict::new(VerdictValue::Yes, format!("omega(alpha; beta) = {omega_col} < 2 and alpha != 0"), source)
        }
        Side::Below => {
            // with alpha = 0 the column exponent is omega(beta)
            match side(omega_col, &BigRational::one(), tol) {
                Side::Above => Verdict::new(
                    VerdictValue::No,
                    format!("alpha = 0 and omega(beta) = {omega_col} > 1: not strongly extremal"),
                    source,
                ),
                Side::Near => Verdict::near(format!("alpha = 0 and omega(beta) = {omega_col} within tol of 1"), source),
                _ => Verdict::new(VerdictValue::Undetermined, format!("alpha = 0 and omega(beta) = {omega_col} <= 1"), source),
            }
        }
    }
}

/// Every classifier applied to one profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationTable {
    pub extremal: Verdict,
    pub khintchine: Verdict,
    pub strong_ktc: Verdict,
    pub sigma_upper: Option<Ext>,
    pub sigma_lower: Ext,
    pub conv: SRange,
    pub div: SRange,
    pub strong: SRange,
}

pub fn classify_all(p: &SubspaceProfile) -> Result<ClassificationTable> {
    p.validate()?;
    let (conv, div, strong) = jarnik_s_ranges(p);
    Ok(ClassificationTable {
        extremal: classify_extremal(p),
        khintchine: classify_khintchine(p),
        strong_ktc: classify_strong_ktc(p),
        sigma_upper: if p.sigma.is_some() && p.d > 0 { Some(sigma_upper_bound(p)?) } else { None },
        sigma_lower: sigma_lower_bound(&p.omega, p.n())?,
        conv,
        div,
        strong,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use VerdictValue::*;

    fn r(p: i64, q: i64) -> BigRational {
        rat(p, q)
    }

    fn prof(d: u32, m: u32, omega: Ext) -> SubspaceProfile {
        SubspaceProfile::new(d, m, omega)
    }

    #[test]
    fn extremal_table() {
        let cases = [(1, 1, Ext::ratio(3, 2), Yes), (1, 1, Ext::int(3), No), (1, 1, Ext::int(2), Yes), (2, 1, Ext::Infinite, No)];
        for (d, m, w, v) in cases {
            assert_eq!(classify_extremal(&prof(d, m, w.clone())).value, v, "{w}");
        }
        let near = prof(1, 1, Ext::ratio(201, 100)).with_tol(r(1, 20));
        let v = classify_extremal(&near);
        assert_eq!((v.value, v.boundary), (Undetermined, true));
    }

    #[test]
    fn khintchine_table() {
        let base = |w: Ext| prof(1, 2, w);
        let cases = [
            (base(Ext::ratio(5, 2)), Yes),
            (base(Ext::int(3)).with_omega_log(Ext::int(5)), No),
            (base(Ext::int(3)).with_omega_log(Ext::int(0)), Undetermined),
            (base(Ext::int(3)).with_omega_log(Ext::int(-1)), Undetermined),
            (base(Ext::int(3)).with_omega_log(Ext::int(3)), Undetermined),
            (base(Ext::int(3)).with_omega_log(Ext::ratio(-3, 2)), Yes),
            (base(Ext::ratio(301, 100)), No),
            (base(Ext::int(3)), Undetermined),
        ];
        for (p, v) in cases {
            assert_eq!(classify_khintchine(&p).value, v, "{p:?}");
        }
        // boundary consistency: extremal at n, not Khintchine just above
        let at = prof(1, 1, Ext::int(2));
        let above = prof(1, 1, Ext::Finite(r(2, 1) + r(1, 1_000_000)));
        assert_eq!(classify_extremal(&at).value, Yes);
        assert_eq!(classify_khintchine(&above).value, No);
    }

    #[test]
    fn strong_ktc_table() {
        let p = |w: Ext| prof(1, 2, Ext::int(1)).with_block(w);
        assert_eq!(classify_strong_ktc(&p(Ext::int(2))).value, Yes);
        assert_eq!(classify_strong_ktc(&p(Ext::int(4))).value, Undetermined);
        assert_eq!(classify_strong_ktc(&p(Ext::int(3))).value, Undetermined);
        assert_eq!(classify_strong_ktc(&prof(1, 2, Ext::int(1))).value, Undetermined);
    }

    #[test]
    fn sigma_bounds() {
        // omega <= n: 1/n
        let p = prof(1, 1, Ext::ratio(3, 2)).with_sigma(Ext::int(2));
        assert_eq!(sigma_upper_bound(&p).unwrap(), Ext::ratio(1, 2));
        let p = prof(1, 1, Ext::int(4)).with_sigma(Ext::int(3));
        assert_eq!(sigma_upper_bound(&p).unwrap(), Ext::ratio(3, 4));
        // Dirichlet sigma makes the second term 1/n
        for (d, m) in [(1u32, 1u32), (2, 1), (1, 3), (3, 2)] {
            let p = prof(d, m, Ext::int(100)).with_sigma(Ext::ratio(d as i64 + 1, m as i64));
            assert_eq!(sigma_upper_bound(&p).unwrap(), Ext::ratio(1, (d + m) as i64));
        }
        assert!(sigma_upper_bound(&prof(0, 2, Ext::int(2)).with_sigma(Ext::int(1))).is_err());
        assert_eq!(sigma_lower_bound(&Ext::int(3), 3).unwrap(), Ext::ratio(1, 3));
        assert_eq!(sigma_lower_bound(&Ext::int(6), 2).unwrap(), Ext::ratio(3, 4));
        assert_eq!(sigma_lower_bound(&Ext::Infinite, 4).unwrap(), Ext::ratio(1, 3));
        let big = sigma_lower_bound(&Ext::int(1_000_000), 4).unwrap().to_f64();
        assert!((big - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn sigma_upper_is_one_over_n_below_threshold() {
        for (d, m) in [(1u32, 1u32), (1, 2), (2, 1), (2, 2), (3, 1)] {
            let n = (d + m) as i64;
            for w in [Ext::ratio(m as i64, d as i64 + 1), Ext::ratio(n, 2), Ext::int(n)] {
                for s in [Ext::ratio(d as i64 + 1, m as i64), Ext::int(7), Ext::Infinite] {
                    let p = prof(d, m, w.clone()).with_sigma(s);
                    assert_eq!(sigma_upper_bound(&p).unwrap(), Ext::ratio(1, n));
                }
            }
        }
    }

    fn fixtures() -> Vec<SubspaceProfile> {
        vec![
            prof(1, 1, Ext::ratio(1, 2)).with_sigma(Ext::int(2)),
            prof(1, 1, Ext::int(1)).with_sigma(Ext::int(3)),
            prof(2, 1, Ext::ratio(1, 2)).with_sigma(Ext::int(5)),
            prof(1, 2, Ext::int(3)).with_sigma(Ext::ratio(7, 2)),
            prof(2, 3, Ext::ratio(5, 4)).with_sigma(Ext::ratio(9, 5)),
            prof(3, 2, Ext::int(4)).with_sigma(Ext::int(6)),
        ]
    }

    #[test]
    fn dimension_knots_are_continuous() {
        for p in fixtures() {
            p.validate().unwrap();
            let knots = dim_knots(&p).unwrap();
            let n = p.n() as i64;
            for k in knots.iter().filter(|k| **k >= r(1, n)) {
                let vals: Vec<BigRational> = dim_pieces(k, &p).unwrap().into_iter().flatten().collect();
                assert!(vals.len() >= 2 || k == &knots[2], "{p:?} at {k}");
                assert!(vals.windows(2).all(|w| w[0] == w[1]), "{p:?} at {k}: {vals:?}");
            }
            assert_eq!(dim_upper(&knots[2], &p).unwrap(), BigRational::zero());
            assert_eq!(dim_upper(&(&knots[2] + r(1, 3)), &p).unwrap(), BigRational::zero());
        }
    }

    #[test]
    fn dimension_endpoints() {
        for p in fixtures().into_iter().filter(|p| p.omega.cmp_rat(&int(p.n())) != Ordering::Greater) {
            let n = p.n() as i64;
            assert_eq!(dim_upper(&r(1, n), &p).unwrap(), int(p.d));
        }
        let p = &fixtures()[0];
        assert!(dim_upper(&r(1, 3), p).is_err());
        // golden-type: omega = 1, sigma = 2, d = m = 1: pieces 1 and 3 meet at 1
        let g = prof(1, 1, Ext::int(1)).with_sigma(Ext::int(2));
        assert_eq!(dim_upper(&r(1, 2), &g).unwrap(), int(1));
        assert_eq!(dim_upper(&int(1), &g).unwrap(), int(1) / int(2));
        assert_eq!(dim_upper(&r(3, 2), &g).unwrap(), r(1, 5));
    }

    #[test]
    fn dimension_is_non_increasing() {
        for p in fixtures() {
            let n = p.n() as i64;
            let mut prev: Option<BigRational> = None;
            for k in 0..400 {
                let tau = r(1, n) + r(k, 50);
                let v = dim_upper(&tau, &p).unwrap();
                if let Some(pv) = &prev {
                    assert!(&v <= pv, "{p:?} at {tau}");
                }
                prev = Some(v);
            }
        }
    }

    #[test]
    fn lower_sigma_below_upper_sigma() {
        use crate::exponents::check_transference;
        for p in fixtures() {
            let lo = sigma_lower_bound(&p.omega, p.n()).unwrap();
            let hi = sigma_upper_bound(&p).unwrap();
            assert!(lo.to_f64() <= hi.to_f64() || check_transference(p.omega.to_f64(), hi.to_f64(), p.n(), 0.0).unwrap() != GuardedBool::True);
            if p.omega.cmp_rat(&int(p.n())) != Ordering::Greater {
                assert_eq!(lo, hi);
            }
        }
    }

    #[test]
    fn s_ranges() {
        // typical omega = m/(d+1): conv is (0, d]
        let p = prof(2, 3, Ext::ratio(3, 3)).with_block(Ext::ratio(3, 2));
        let (conv, div, strong) = jarnik_s_ranges(&p);
        assert_eq!(conv.lower, Some(Ext::int(0)));
        // nu = 1 and typical omega(A') = m/d: strong is (m/n, d]
        assert_eq!(strong.lower, Some(Ext::ratio(3, 5)));
        assert!(conv.contains_range(&div));
        // omega >= m: conv and div coincide
        let p = prof(1, 2, Ext::ratio(5, 2));
        let (conv, div, _) = jarnik_s_ranges(&p);
        assert_eq!(conv.lower, div.lower);
        assert!(conv.contains(&r(2, 3)) == div.contains(&r(2, 3)));
        // omega >= n: hypothesis fails
        let (conv, div, strong) = jarnik_s_ranges(&prof(1, 1, Ext::int(2)));
        assert!(!conv.valid && !div.valid && !strong.valid);
        assert!(conv.is_empty());
    }

    #[test]
    fn conv_contains_div_on_random_profiles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let d = rng.random_range(1..=4u32);
            let m = rng.random_range(1..=4u32);
            let n = (d + m) as i64;
            // omega uniform in [m/(d+1), n) on a grid of step 1/1000
            let lo = (m as i64 * 1000) / (d as i64 + 1) + 1;
            let w = rng.random_range(lo..n * 1000);
            let p = prof(d, m, Ext::ratio(w, 1000));
            p.validate().unwrap();
            let (conv, div, _) = jarnik_s_ranges(&p);
            assert!(conv.valid && div.valid);
            assert!(conv.contains_range(&div), "{p:?}");
        }
    }

    #[test]
    fn series_tests() {
        let n = 3u32;
        let s = int(2);
        // s = d: sum psi^n
        let cases = [("1", "1/3", "1/3", false), ("1", "1/3", "1/2", true), ("1", "1/2", "0", true), ("1", "1/4", "5", false)];
        for (c, b, bl, conv) in cases {
            let psi = ApproxFunction::power_log(c, b, bl).unwrap();
            let want = if conv { GuardedBool::True } else { GuardedBool::False };
            assert_eq!(khintchine_sum_converges(&psi, 2, 1, &s).unwrap(), want, "{b} {bl}");
        }
        // the critical gamma with eps = 1/10
        let gamma = ApproxFunction::power_log("1", "1/3", "11/30").unwrap();
        assert_eq!(khintchine_sum_converges(&gamma, 2, 1, &int(2)).unwrap(), GuardedBool::True);
        let _ = n;
        let tab = ApproxFunction::table(vec![(1, 0.5)]).unwrap();
        assert!(khintchine_sum_converges(&tab, 1, 1, &int(1)).is_err());

        let m = |b: &str, bl: &str| mult_sum_converges(&ApproxFunction::power_log("1", b, bl).unwrap()).unwrap();
        assert_eq!(m("1", "3"), GuardedBool::True);
        assert_eq!(m("1", "2"), GuardedBool::False);
        assert_eq!(m("2", "0"), GuardedBool::True);
        assert_eq!(m("1/2", "9"), GuardedBool::False);
        assert!(mult_sum_converges(&tab).is_err());
    }

    #[test]
    fn mult_line_table() {
        let z = BigRational::zero();
        let c = |w: Ext, a: bool| classify_mult_line(&w, a, &z, "asserted").value;
        assert_eq!(c(Ext::ratio(3, 2), true), Yes);
        assert_eq!(c(Ext::int(3), true), No);
        assert_eq!(c(Ext::int(2), true), Undetermined);
        assert_eq!(c(Ext::int(1), false), Undetermined);
        assert_eq!(c(Ext::ratio(3, 2), false), No);
        assert_eq!(c(Ext::Infinite, false), No);
        let v = classify_mult_line(&Ext::ratio(199, 100), true, &r(1, 20), "estimate");
        assert_eq!((v.value, v.boundary, v.source.as_str()), (Undetermined, true, "estimate"));
    }

    #[test]
    fn profile_validation_and_toml() {
        assert!(prof(1, 1, Ext::ratio(1, 3)).validate().is_err());
        assert!(prof(1, 1, Ext::ratio(1, 2)).with_sigma(Ext::int(1)).validate().is_err());
        assert!(prof(1, 1, Ext::ratio(1, 3)).with_tol(r(1, 5)).validate().is_ok());
        let mut p = prof(2, 1, Ext::ratio(7, 5)).with_sigma(Ext::Infinite).with_omega_log(Ext::int(-2));
        p.source = "records to 10^4".into();
        let back = SubspaceProfile::from_toml(&p.to_toml()).unwrap();
        assert_eq!(back, p);
        let q = SubspaceProfile::from_toml("d = 1\nm = 1\nomega = 1.5\nsigma = \"inf\"\n").unwrap();
        assert_eq!(q.omega, Ext::ratio(3, 2));
        assert_eq!(q.sigma, Some(Ext::Infinite));
        assert!(SubspaceProfile::from_toml("d = 1\nm = 1\nomega = \"sqrt(2)\"\n").is_err());
        let mut bad = prof(1, 1, Ext::int(1));
        bad.nu = Ext::int(2);
        assert!(bad.validate().is_err());
    }
}
