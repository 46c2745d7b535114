//! Shared helpers for the integration tests: a naive counting oracle that
//! shares no code with the library kernels, and instance generators.

#![allow(dead_code)]

use affinelab::{ParamMatrix, Scalar, Settings};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Square-free radicands used by the generator. Square roots of distinct
/// square-free integers are linearly independent over Q, so a combination
/// is rational exactly when every surd coefficient vanishes.
pub const RADICANDS: [u32; 5] = [2, 3, 5, 6, 7];

/// `r + s sqrt(k)` with `k` from [`RADICANDS`] (`s = 0` for rationals).
#[derive(Clone, Debug)]
pub struct Entry {
    pub r: BigRational,
    pub s: BigRational,
    pub k: u32,
}

impl Entry {
    pub fn text(&self) -> String {
        if self.s.is_zero() {
            format!("{}", self.r)
        } else {
            format!("({}) + ({})*sqrt({})", self.r, self.s, self.k)
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleInstance {
    pub d: usize,
    pub m: usize,
    /// Row-major `(d+1) x m`.
    pub entries: Vec<Entry>,
    pub q_box: u64,
    pub delta: BigRational,
    pub theta: Vec<BigRational>,
}

impl OracleInstance {
    pub fn matrix(&self) -> ParamMatrix {
        let texts: Vec<Vec<String>> =
            (0..=self.d).map(|i| (0..self.m).map(|j| self.entries[i * self.m + j].text()).collect()).collect();
        let rows: Vec<Vec<&str>> = texts.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let refs: Vec<&[&str]> = rows.iter().map(Vec::as_slice).collect();
        ParamMatrix::parse(&refs).expect("generated matrix parses")
    }

    pub fn delta_scalar(&self) -> Scalar {
        Scalar::from_rational(self.delta.clone())
    }

    pub fn theta_scalars(&self) -> Vec<Scalar> {
        self.theta.iter().cloned().map(Scalar::from_rational).collect()
    }
}

fn rand_rational(rng: &mut ChaCha8Rng, max_num: i64, max_den: i64) -> BigRational {
    let den = rng.random_range(1..=max_den);
    let num = rng.random_range(-max_num..=max_num);
    BigRational::new(num.into(), den.into())
}

/// Instance `index` of the oracle stream: `d, m <= 3`, `Q <= 30` with `Q`
/// also capped so the box has at most about 4 million points.
pub fn oracle_instance(seed: u64, index: u64) -> OracleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let d = rng.random_range(1..=3usize);
    let m = rng.random_range(1..=3usize);
    let cap = match d {
        1 | 2 => 30,
        _ => 23,
    };
    let q_box = rng.random_range(2..=cap);
    let surd = rng.random_bool(0.6);
    let entries = (0..(d + 1) * m)
        .map(|_| {
            let r = rand_rational(&mut rng, 12, 12);
            if surd && rng.random_bool(0.8) {
                let s = rand_rational(&mut rng, 5, 6);
                let k = RADICANDS[rng.random_range(0..RADICANDS.len())];
                Entry { r, s, k }
            } else {
                Entry { r, s: BigRational::zero(), k: 1 }
            }
        })
        .collect();
    let delta = {
        let den = rng.random_range(2..=64i64);
        let num = rng.random_range(1..=den / 2);
        BigRational::new(num.into(), den.into())
    };
    let theta = if rng.random_bool(0.3) {
        (0..d + m).map(|_| rand_rational(&mut rng, 6, 8)).collect()
    } else {
        vec![BigRational::zero(); d + m]
    };
    OracleInstance { d, m, entries, q_box, delta, theta }
}

/// A linear form `(R + sum_k S_k sqrt k) / den` with integer `R`, `S_k`.
#[derive(Clone, Debug)]
struct Form {
    r: i128,
    s: [i128; RADICANDS.len()],
}

fn radicand_slot(k: u32) -> usize {
    RADICANDS.iter().position(|&x| x == k).expect("known radicand")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Verdict {
    Hit,
    Ambiguous,
    Miss,
}

/// `(certain, ambiguous)` for `N_A(Q, delta, theta)` by direct enumeration:
/// a point is certain when every `||r_j|| < delta - 2^-guard_bits`, a miss
/// when some `||r_j|| >= delta + 2^-guard_bits`, ambiguous otherwise.
pub fn naive_count(inst: &OracleInstance, guard_bits: u32) -> (u64, u64) {
    let (d, m) = (inst.d, inst.m);
    let theta1 = &inst.theta[..d];
    let theta2 = &inst.theta[d..];
    // constant part K_j = sum_i theta1_i A[i+1][j] - theta2_j, exact
    let mut k_r: Vec<BigRational> = Vec::with_capacity(m);
    let mut k_s: Vec<[BigRational; RADICANDS.len()]> = Vec::with_capacity(m);
    for (j, t2) in theta2.iter().enumerate() {
        let mut r = -t2.clone();
        let mut s: [BigRational; RADICANDS.len()] = Default::default();
        for (i, t) in theta1.iter().enumerate() {
            let e = &inst.entries[(i + 1) * m + j];
            r += t * &e.r;
            if !e.s.is_zero() {
                s[radicand_slot(e.k)] += t * &e.s;
            }
        }
        k_r.push(r);
        k_s.push(s);
    }
    // common denominator of every rational that appears
    let mut den = BigInt::one();
    for e in &inst.entries {
        den = den.lcm(e.r.denom()).lcm(e.s.denom());
    }
    for j in 0..m {
        den = den.lcm(k_r[j].denom());
        for s in &k_s[j] {
            den = den.lcm(s.denom());
        }
    }
    let den_i = den.to_i128().expect("small denominator");
    let scale = |x: &BigRational| -> i128 { (x * BigRational::from_integer(den.clone())).to_integer().to_i128().unwrap() };
    let entry_forms: Vec<Form> = inst
        .entries
        .iter()
        .map(|e| {
            let mut s = [0i128; RADICANDS.len()];
            if !e.s.is_zero() {
                s[radicand_slot(e.k)] = scale(&e.s);
            }
            Form { r: scale(&e.r), s }
        })
        .collect();
    let consts: Vec<Form> = (0..m)
        .map(|j| {
            let mut s = [0i128; RADICANDS.len()];
            for (slot, v) in k_s[j].iter().enumerate() {
                s[slot] = scale(v);
            }
            Form { r: scale(&k_r[j]), s }
        })
        .collect();
    let sqrt_f: Vec<f64> = RADICANDS.iter().map(|&k| (k as f64).sqrt()).collect();
    let delta_f = inst.delta.to_f64().unwrap();
    let judge = Judge::new(&inst.delta, den_i, guard_bits);

    let q = inst.q_box as i64;
    let n = d + 1;
    let mut coords = vec![-(q - 1); n];
    let (mut certain, mut ambiguous) = (0u64, 0u64);
    loop {
        let mut point = Verdict::Hit;
        for j in 0..m {
            let mut f = consts[j].clone();
            for (i, &c) in coords.iter().enumerate() {
                let e = &entry_forms[i * m + j];
                f.r += c as i128 * e.r;
                for t in 0..RADICANDS.len() {
                    f.s[t] += c as i128 * e.s[t];
                }
            }
            let v = judge.decide(&f, &sqrt_f, delta_f);
            if v == Verdict::Miss {
                point = Verdict::Miss;
                break;
            }
            if v == Verdict::Ambiguous {
                point = Verdict::Ambiguous;
            }
        }
        match point {
            Verdict::Hit => certain += 1,
            Verdict::Ambiguous => ambiguous += 1,
            Verdict::Miss => {}
        }
        // odometer over [-(Q-1), Q-1]^(d+1)
        let mut i = 0;
        loop {
            if i == n {
                return (certain, ambiguous);
            }
            if coords[i] < q - 1 {
                coords[i] += 1;
                break;
            }
            coords[i] = -(q - 1);
            i += 1;
        }
    }
}

struct Judge {
    delta_num: i128,
    delta_den: i128,
    den: i128,
    guard_bits: u32,
    delta: BigRational,
}

const FIXED_BITS: u32 = 320;

impl Judge {
    fn new(delta: &BigRational, den: i128, guard_bits: u32) -> Self {
        // a rational distance differs from delta by at least 1/(den * delta_den)
        // unless equal; that gap must exceed the guard band
        let dd = delta.denom().to_i128().unwrap();
        assert!((den as f64) * (dd as f64) < 2f64.powi(guard_bits as i32 - 1));
        Judge { delta_num: delta.numer().to_i128().unwrap(), delta_den: dd, den, guard_bits, delta: delta.clone() }
    }

    fn decide(&self, f: &Form, sqrt_f: &[f64], delta_f: f64) -> Verdict {
        if f.s.iter().all(|&s| s == 0) {
            // exact rational distance: frac in [0, den)
            let frac = f.r.rem_euclid(self.den);
            let dist = frac.min(self.den - frac);
            return match (dist * self.delta_den).cmp(&(self.delta_num * self.den)) {
                std::cmp::Ordering::Less => Verdict::Hit,
                std::cmp::Ordering::Equal => Verdict::Ambiguous,
                std::cmp::Ordering::Greater => Verdict::Miss,
            };
        }
        let mut v = f.r as f64;
        for (t, &s) in f.s.iter().enumerate() {
            v += s as f64 * sqrt_f[t];
        }
        let v = v / self.den as f64;
        let dist = (v - v.round()).abs();
        if (dist - delta_f).abs() > 1e-9 {
            return if dist < delta_f { Verdict::Hit } else { Verdict::Miss };
        }
        self.decide_fixed(f)
    }

    /// Fixed point with `FIXED_BITS` fractional bits and an explicit error
    /// bound, for irrational values too close to delta for f64.
    fn decide_fixed(&self, f: &Form) -> Verdict {
        let one = BigInt::one() << FIXED_BITS;
        let mut num = BigInt::from(f.r) * &one;
        let mut err = BigInt::zero();
        for (t, &s) in f.s.iter().enumerate() {
            if s != 0 {
                let root = (BigInt::from(RADICANDS[t]) << (2 * FIXED_BITS)).sqrt();
                num += BigInt::from(s) * root;
                err += BigInt::from(s).abs();
            }
        }
        let den = BigInt::from(self.den);
        // value * 2^FIXED_BITS lies in [num - err - den, num + err + den] / den
        let lo: BigInt = (&num - &err).div_floor(&den) - 1;
        let hi: BigInt = (&num + &err).div_floor(&den) + 2;
        let frac_lo = lo.mod_floor(&one);
        let span = &hi - &lo;
        assert!(span < BigInt::from(1u64 << 20));
        let frac_hi = &frac_lo + &span;
        // distance interval: keep frac away from the wrap point
        assert!(frac_hi < one, "value too close to an integer for the oracle");
        let half = &one >> 1;
        let (d_lo, d_hi) = if frac_hi <= half {
            (frac_lo.clone(), frac_hi.clone())
        } else if frac_lo >= half {
            (&one - &frac_hi, &one - &frac_lo)
        } else {
            panic!("value too close to 1/2 for the oracle")
        };
        let scale = BigRational::from_integer(one.clone());
        let g = BigRational::new(BigInt::one(), BigInt::one() << self.guard_bits);
        let lo_thr = ((&self.delta - &g) * &scale).floor().to_integer();
        let hi_thr = ((&self.delta + &g) * &scale).ceil().to_integer();
        if d_hi < lo_thr {
            Verdict::Hit
        } else if d_lo >= hi_thr {
            Verdict::Miss
        } else if d_lo >= lo_thr && d_hi < hi_thr {
            Verdict::Ambiguous
        } else {
            panic!("oracle cannot decide a point at the guard band edge")
        }
    }
}

pub fn settings(workers: usize) -> Settings {
    Settings::default().with_workers(workers)
}

pub fn s(text: &str) -> Scalar {
    Scalar::parse(text).expect("test scalar parses")
}

/// The golden matrix `((0), (phi))` with `d = m = 1`.
pub fn golden() -> ParamMatrix {
    ParamMatrix::parse(&[&["0"], &["(1+sqrt(5))/2"]]).expect("golden matrix")
}
