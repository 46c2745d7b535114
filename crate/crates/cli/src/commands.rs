//! Subcommand bodies. Each returns a report, an optional CSV table and
//! whether a verification failed.

use std::path::Path;
use std::time::Instant;

use affinelab::bounds::{dual_bounded_regime, verify_grid, BoundKind, GridParams};
use affinelab::classify::{classify_all, classify_mult_line, dim_knots, Ext, SubspaceProfile};
use affinelab::counting::{count_n, mult_min_on_line, CountQuery};
use affinelab::covering::{
    coverage, minkowski_witness, proof_kappa, verify_witness, CoverageResult, RadiusRule, Sampler, TestBall,
};
use affinelab::exponents::{best_approx_records, estimate_omega, estimate_omega_log, estimate_sigma, ExponentEstimate};
use affinelab::report::{bounded_csv, bounds_csv, coverage_csv, fmt_f64, hits_csv, records_csv, sieve_csv, CsvTable, Report};
use affinelab::sieve::{
    check_fejer_majorant, dual_sieve_check, large_sieve_check, random_instance, separation_of_sieve_points,
    uniform_grid, RandomShape,
};
use affinelab::{ApproxFunction, Error, GuardedBool, ParamMatrix, Result, Scalar};
use num_rational::BigRational;

use crate::config::{self, Overrides, RunConfig};
use crate::{
    BoundsArgs, ClassifyArgs, Command, CountArgs, CoveringArgs, CoveringMode, ExponentArgs, MultLineArgs, RuleArg,
    SieveArgs, SieveMode,
};

pub struct Output {
    pub report: Report,
    pub csv: Option<CsvTable>,
    pub failed: bool,
}

impl Output {
    fn new(rc: &RunConfig) -> Result<Self> {
        let mut report = Report::new(&rc.command);
        report.embed("config", rc)?;
        Ok(Output { report, csv: None, failed: false })
    }

    fn result(&mut self) -> &mut toml::Table {
        self.report.section("result")
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Budget { .. } => 3,
        _ => 2,
    }
}

fn args_table<T: serde::Serialize>(args: &T) -> toml::Table {
    match toml::Value::try_from(args) {
        Ok(toml::Value::Table(t)) => t,
        _ => toml::Table::new(),
    }
}

pub fn run(cmd: Command, flags: Overrides, config_file: Option<&Path>) -> u8 {
    let (name, args) = match &cmd {
        Command::Count(a) => ("count", args_table(a)),
        Command::Exponent(a) => ("exponent", args_table(a)),
        Command::SieveCheck(a) => ("sieve-check", args_table(a)),
        Command::VerifyBounds(a) => ("verify-bounds", args_table(a)),
        Command::Covering(a) => ("covering", args_table(a)),
        Command::Classify(a) => ("classify", args_table(a)),
        Command::MultLine(a) => ("mult-line", args_table(a)),
    };
    let rc = match config::resolve(name, flags, config_file, args) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let t0 = Instant::now();
    let out = match cmd {
        Command::Count(a) => count(&rc, &a),
        Command::Exponent(a) => exponent(&rc, &a),
        Command::SieveCheck(a) => sieve(&rc, &a),
        Command::VerifyBounds(a) => bounds(&rc, &a),
        Command::Covering(a) => covering(&rc, &a),
        Command::Classify(a) => classify(&rc, &a),
        Command::MultLine(a) => mult_line(&rc, &a),
    };
    let mut out = match out {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let failed = out.failed;
    out.result().insert("elapsed".into(), t0.elapsed().as_secs_f64().into());
    out.result().insert("verification_failed".into(), failed.into());
    if let Err(e) = write_outputs(&rc, &mut out) {
        eprintln!("error: {e}");
        return 2;
    }
    u8::from(out.failed)
}

fn write_outputs(rc: &RunConfig, out: &mut Output) -> Result<()> {
    match (&out.csv, &rc.csv) {
        (Some(t), Some(path)) => t.write(path)?,
        (Some(t), None) => {
            let note = format!("{} rows not written (no --csv)", t.rows.len());
            out.result().insert("csv".into(), note.into());
        }
        _ => {}
    }
    let text = out.report.render();
    match &rc.report {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn scalar(text: &str) -> Result<Scalar> {
    Scalar::parse(text)
}

fn scalar_list(text: &str) -> Result<Vec<Scalar>> {
    text.split(',').map(|t| Scalar::parse(t.trim())).collect()
}

fn theta_for(a: &ParamMatrix, theta: Option<&str>) -> Result<Vec<Scalar>> {
    match theta {
        Some(t) => scalar_list(t),
        None => Ok(vec![Scalar::zero(); a.n()]),
    }
}

fn dyadic_range(text: &str) -> Result<Option<(u32, u32)>> {
    let Some((lo, hi)) = text.split_once("..") else {
        return Ok(None);
    };
    let p = |s: &str| {
        s.trim().parse::<u32>().map_err(|_| Error::InvalidArgument(format!("bad exponent range {text:?}")))
    };
    let (lo, hi) = (p(lo)?, p(hi)?);
    if lo > hi || hi > 62 {
        return Err(Error::InvalidArgument(format!("bad exponent range {text:?}")));
    }
    Ok(Some((lo, hi)))
}

/// `lo..hi` gives `2^lo..2^hi`; otherwise a comma list of integers.
pub fn parse_qgrid(text: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = dyadic_range(text)? {
        return Ok((lo..=hi).map(|e| 1u64 << e).collect());
    }
    text.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| Error::InvalidArgument(format!("bad Q value {t:?}"))))
        .collect()
}

/// `lo..hi` gives `2^-lo..2^-hi`; otherwise a comma list of scalars.
pub fn parse_dgrid(text: &str) -> Result<Vec<Scalar>> {
    if let Some((lo, hi)) = dyadic_range(text)? {
        return (lo..=hi).map(|e| Scalar::parse(&format!("1/{}", 1u64 << e))).collect();
    }
    scalar_list(text)
}

fn count(rc: &RunConfig, a: &CountArgs) -> Result<Output> {
    let mat = ParamMatrix::load(&a.matrix)?;
    let theta = theta_for(&mat, a.theta.as_deref())?;
    let delta = scalar(&a.delta)?;
    if a.hits && rc.csv.is_none() {
        return Err(Error::InvalidArgument("--hits needs --csv".into()));
    }
    let (d, m) = (mat.d(), mat.m());
    let query = CountQuery::new(mat, a.q, delta.clone(), theta.clone())?;
    let r = count_n(&query, &rc.settings, a.hits)?;
    let mut out = Output::new(rc)?;
    let res = out.result();
    res.insert("Q".into(), (a.q as i64).into());
    res.insert("delta".into(), delta.text().into());
    res.insert("theta".into(), theta.iter().map(|t| t.text().to_string()).collect::<Vec<_>>().into());
    res.insert("count_certain".into(), (r.count_certain as i64).into());
    res.insert("count_ambiguous".into(), (r.count_ambiguous as i64).into());
    if let Some(h) = &r.hits {
        out.csv = Some(hits_csv(h, d, m, true));
    }
    Ok(out)
}

fn estimate_table(e: &ExponentEstimate, res: &mut toml::Table) {
    res.insert("omega_sup".into(), fmt_f64(e.omega_sup).into());
    res.insert("omega_slope".into(), fmt_f64(e.omega_slope).into());
    if let Some(w) = e.omega_log {
        res.insert("omega_log".into(), fmt_f64(w).into());
    }
    res.insert("infinite".into(), e.infinite.into());
    res.insert("cutoff".into(), (e.cutoff as i64).into());
    res.insert("records_used".into(), (e.used as i64).into());
    res.insert("q_max".into(), (e.q_max as i64).into());
    let claim = if e.infinite {
        "exact zero found: rational dependence, exponent +inf".to_string()
    } else {
        format!("consistent with exponent {:.4} (slope) up to Q_max = {}", e.omega_slope, e.q_max)
    };
    res.insert("claim".into(), claim.into());
}

fn exponent(rc: &RunConfig, a: &ExponentArgs) -> Result<Output> {
    let pm = ParamMatrix::load(&a.matrix)?;
    let mat = if a.transpose { pm.matrix().transpose() } else { pm.matrix().clone() };
    let search = best_approx_records(&mat, a.qmax, &rc.settings)?;
    let est = estimate_omega(&search, a.cutoff)?;
    let mut out = Output::new(rc)?;
    let res = out.result();
    res.insert("quantity".into(), if a.transpose { "sigma" } else { "omega" }.into());
    res.insert("records".into(), (search.records.len() as i64).into());
    estimate_table(&est, res);
    out.csv = Some(records_csv(&search.records));
    Ok(out)
}

fn sieve(rc: &RunConfig, a: &SieveArgs) -> Result<Output> {
    let st = &rc.settings;
    let mut out = Output::new(rc)?;
    match a.mode {
        SieveMode::Fejer => {
            let grid = uniform_grid(a.grid);
            let r = check_fejer_majorant(&grid, &scalar(&a.delta)?, st)?;
            let mut t = CsvTable::new("fejer-violations", &["index", "theta"]);
            for &i in &r.violations {
                t.push(vec![i.to_string(), grid[i].text().to_string()]);
            }
            out.failed = !r.violations.is_empty();
            out.report.embed("result", &r)?;
            out.csv = Some(t);
        }
        SieveMode::Ls | SieveMode::DualLs => {
            let mut rows = Vec::new();
            for i in 0..a.instances {
                let inst = random_instance(rc.seed, i, RandomShape::default());
                inst.check_separation(st.precision)?;
                let c = if a.mode == SieveMode::Ls { large_sieve_check(&inst, st)? } else { dual_sieve_check(&inst, st)? };
                rows.push((i, c));
            }
            let violations = rows.iter().filter(|(_, c)| c.holds == GuardedBool::False).count();
            let ambiguous = rows.iter().filter(|(_, c)| c.holds == GuardedBool::Ambiguous).count();
            out.failed = violations > 0;
            let res = out.result();
            res.insert("instances".into(), (a.instances as i64).into());
            res.insert("violations".into(), (violations as i64).into());
            res.insert("ambiguous".into(), (ambiguous as i64).into());
            res.insert("max_ratio".into(), fmt_f64(rows.iter().map(|(_, c)| c.ratio()).fold(0.0, f64::max)).into());
            out.csv = Some(sieve_csv(&rows));
        }
        SieveMode::Separation => {
            let path = a.matrix.as_ref().ok_or_else(|| Error::InvalidArgument("--mode separation needs --matrix".into()))?;
            let pm = ParamMatrix::load(path)?;
            let sep = separation_of_sieve_points(pm.matrix(), a.j, st)?;
            let zero = sep.min_hi.is_some_and(|v| v == 0.0);
            out.report.embed("result", &sep)?;
            out.result().insert("rational_dependence".into(), zero.into());
        }
    }
    Ok(out)
}

fn parse_phi(text: &str) -> Result<ApproxFunction> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [c, b, bl] => ApproxFunction::power_log(c, b, bl),
        [c, b] => ApproxFunction::power_log(c, b, "0"),
        _ => Err(Error::InvalidArgument(format!("--phi must be c,b or c,b,b_log, got {text:?}"))),
    }
}

fn clause(kind: BoundKind) -> &'static str {
    match kind {
        BoundKind::PhiA => "upper bound for phi-badly approximable A",
        BoundKind::PhiB => "upper bound for phi-badly approximable A', sup over q",
        BoundKind::OmegaA1 => "exponent form of the upper bound (main term regime)",
        BoundKind::OmegaA2 => "exponent form of the upper bound (two-term form)",
        BoundKind::Dual => "dual upper bound from sigma of the transpose",
        BoundKind::AsympRatio => "asymptotic main term ratio (heuristic bracket)",
    }
}

fn bounds(rc: &RunConfig, a: &BoundsArgs) -> Result<Output> {
    let pm = ParamMatrix::load(&a.matrix)?;
    let kind = BoundKind::parse(&a.kind)?;
    let theta = theta_for(&pm, a.theta.as_deref())?;
    let qs = parse_qgrid(&a.qgrid)?;
    let ds = parse_dgrid(&a.dgrid)?;
    let grid: Vec<(u64, Scalar)> = qs.iter().flat_map(|&q| ds.iter().map(move |d| (q, d.clone()))).collect();
    let params = GridParams {
        phi: parse_phi(&a.phi)?,
        eps: a.eps,
        c0_qmax: a.c0_qmax,
        omega: a.omega,
        sigma: a.sigma,
        ..GridParams::default()
    };
    let reports = verify_grid(&pm, kind, &params, &grid, &theta, &rc.settings)?;
    let violations = reports.iter().filter(|r| r.is_violation()).count();
    let ambiguous = reports.iter().filter(|r| r.applicable && r.pass == GuardedBool::Ambiguous).count();
    let applicable = reports.iter().filter(|r| r.applicable).count();
    let mut out = Output::new(rc)?;
    out.failed = violations > 0;
    let res = out.result();
    res.insert("kind".into(), kind.as_str().into());
    res.insert("clause".into(), clause(kind).into());
    res.insert("cells".into(), (reports.len() as i64).into());
    res.insert("applicable".into(), (applicable as i64).into());
    res.insert("violations".into(), (violations as i64).into());
    res.insert("ambiguous".into(), (ambiguous as i64).into());
    if let Some(c0) = reports.iter().find_map(|r| r.c0) {
        res.insert("c0".into(), fmt_f64(c0).into());
        res.insert("c0_certified_to".into(), (a.c0_qmax as i64).into());
    }
    let max_ratio = reports.iter().filter(|r| r.applicable).map(|r| r.ratio).fold(0.0, f64::max);
    res.insert("max_ratio".into(), fmt_f64(max_ratio).into());
    if kind == BoundKind::Dual {
        if let Some(sigma) = a.sigma {
            let cells = dual_bounded_regime(&pm, sigma, a.eps, &grid, &theta, &rc.settings)?;
            let failing = cells.iter().filter(|c| c.pass == GuardedBool::False).count();
            out.failed |= failing > 0;
            let t = out.report.section("bounded_regime");
            t.insert("cells".into(), (cells.len() as i64).into());
            t.insert("failing".into(), (failing as i64).into());
            t.insert("table".into(), bounded_csv(&cells).body().into());
        }
    }
    out.csv = Some(bounds_csv(&reports));
    Ok(out)
}

fn parse_sampler(text: &str, seed: u64) -> Result<Sampler> {
    let bad = || Error::InvalidArgument(format!("--sampler must be exact, grid:N or mc:N, got {text:?}"));
    if text == "exact" {
        return Ok(Sampler::Exact);
    }
    let (kind, n) = text.split_once(':').ok_or_else(bad)?;
    let n: u64 = n.parse().map_err(|_| bad())?;
    match kind {
        "grid" => Ok(Sampler::Grid { resolution: n }),
        "mc" => Ok(Sampler::MonteCarlo { samples: n, seed }),
        _ => Err(bad()),
    }
}

/// `Q^e` for a swept Q, or a fixed scalar.
fn delta_for(text: &str, q: u64) -> Result<Scalar> {
    match text.trim().strip_prefix("Q^") {
        Some(e) => {
            let e: f64 = e.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad delta {text:?}")))?;
            Scalar::from_f64((q as f64).powf(e))
        }
        None => scalar(text),
    }
}

fn covering(rc: &RunConfig, a: &CoveringArgs) -> Result<Output> {
    let pm = ParamMatrix::load(&a.matrix)?;
    let st = &rc.settings;
    let qs = parse_qgrid(&a.q)?;
    let mut out = Output::new(rc)?;
    match a.mode {
        CoveringMode::Witness => {
            let &[q] = qs.as_slice() else {
                return Err(Error::InvalidArgument("witness mode takes a single Q".into()));
            };
            let x = scalar_list(a.x.as_deref().ok_or_else(|| Error::InvalidArgument("witness mode needs --x".into()))?)?;
            let delta = delta_for(&a.delta, q)?;
            let res = match minkowski_witness(&pm, &x, q, &delta, st) {
                Ok(w) => {
                    let v = verify_witness(&pm, &x, q, &delta, &w, st)?;
                    out.failed = v != GuardedBool::True;
                    let res = out.result();
                    res.insert("q".into(), (w.q as i64).into());
                    res.insert("a".into(), w.a.to_vec().into());
                    res.insert("b".into(), w.b.to_vec().into());
                    res.insert("verified".into(), v.as_str().into());
                    res
                }
                // a witness always exists, so not finding one is a failure
                Err(Error::Precision(msg)) => {
                    out.failed = true;
                    let res = out.result();
                    res.insert("witness".into(), msg.into());
                    res
                }
                Err(e) => return Err(e),
            };
            res.insert("delta".into(), delta.text().into());
        }
        CoveringMode::Coverage => {
            let (d, m) = (pm.d(), pm.m());
            let ball = TestBall::unit_cube(d);
            let kappa = match a.kappa.as_str() {
                "proof" => Scalar::from_f64(proof_kappa(d as u32, m as u32, ball.measure())?)?,
                k => scalar(k)?,
            };
            let rule = match a.rule {
                RuleArg::Ubiquity => RadiusRule::Ubiquity,
                RuleArg::Minkowski => RadiusRule::Minkowski,
            };
            let sampler = parse_sampler(&a.sampler, rc.seed)?;
            let mut rows: Vec<(u64, CoverageResult)> = Vec::new();
            for &q in &qs {
                let delta = delta_for(&a.delta, q)?;
                rows.push((q, coverage(&pm, q, &delta, &kappa, rule, &ball, &sampler, st)?));
            }
            let (top_q, top) = rows.last().expect("at least one Q");
            let target = if rule == RadiusRule::Ubiquity { 0.5 } else { 1.0 };
            out.failed = top.fraction < target;
            let onset = rows.iter().rposition(|(_, c)| c.fraction < target).map_or(Some(rows[0].0), |i| rows.get(i + 1).map(|r| r.0));
            let res = out.result();
            res.insert("kappa".into(), kappa.text().into());
            res.insert("Q".into(), (*top_q as i64).into());
            res.insert("fraction".into(), fmt_f64(top.fraction).into());
            res.insert("ball_count".into(), (top.ball_count as i64).into());
            res.insert("radius".into(), fmt_f64(top.radius).into());
            res.insert("empty".into(), top.empty.into());
            res.insert("target".into(), fmt_f64(target).into());
            if let Some(q) = onset {
                res.insert("onset_Q".into(), (q as i64).into());
            }
            out.csv = Some(coverage_csv(&rows));
        }
    }
    Ok(out)
}

fn ext_of(e: &ExponentEstimate) -> Result<Ext> {
    if e.infinite {
        Ok(Ext::Infinite)
    } else {
        Ext::from_f64(e.omega_slope)
    }
}

/// Raise an estimate to the Dirichlet floor `p/q` if it falls below.
fn floor_at(e: Ext, p: i64, q: i64) -> Ext {
    let fl = BigRational::new(p.into(), q.into());
    match &e {
        Ext::Finite(v) if v < &fl => Ext::Finite(fl),
        _ => e,
    }
}

fn estimated_profile(rc: &RunConfig, path: &Path, qmax: u64, cutoff: u64, tol: &Scalar) -> Result<SubspaceProfile> {
    let pm = ParamMatrix::load(path)?;
    let st = &rc.settings;
    let (d, m) = (pm.d() as u32, pm.m() as u32);
    let search = best_approx_records(pm.matrix(), qmax, st)?;
    let om = estimate_omega(&search, cutoff)?;
    let omega = floor_at(ext_of(&om)?, m as i64, d as i64 + 1);
    let mut p = SubspaceProfile::new(d, m, omega.clone());
    if !omega.is_infinite() {
        if let Ok(wl) = estimate_omega_log(&search.records, omega.to_f64(), cutoff) {
            p.omega_log = Some(Ext::from_f64(wl)?);
        }
    }
    let sg = estimate_sigma(&pm, qmax, cutoff, st)?;
    p.sigma = Some(floor_at(ext_of(&sg)?, d as i64 + 1, m as i64));
    if d > 0 {
        let block = best_approx_records(&pm.block(), qmax, st)?;
        if let Ok(b) = estimate_omega(&block, cutoff) {
            p.omega_prime_block = Some(ext_of(&b)?);
        }
    }
    p.tol = Ext::Finite(tol.as_rational().cloned().ok_or_else(|| Error::InvalidArgument("--tol must be rational".into()))?);
    p.source = format!("slope estimates from records to Q_max = {qmax}, cutoff {cutoff}, raised to the Dirichlet floors");
    Ok(p)
}

fn classify(rc: &RunConfig, a: &ClassifyArgs) -> Result<Output> {
    let profile = match (&a.profile, &a.matrix) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            SubspaceProfile::from_toml(&text)?
        }
        (None, Some(path)) => {
            let qmax = a.qmax.ok_or_else(|| Error::InvalidArgument("--matrix needs --qmax".into()))?;
            estimated_profile(rc, path, qmax, a.cutoff, &scalar(&a.tol)?)?
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --profile or --matrix".into())),
    };
    let table = classify_all(&profile)?;
    let mut out = Output::new(rc)?;
    out.report.embed("profile", &profile)?;
    out.report.embed("classification", &table)?;
    if let Ok(k) = dim_knots(&profile) {
        out.result().insert("dim_knots".into(), k.iter().map(|x| x.to_string()).collect::<Vec<_>>().into());
    }
    let mut t = CsvTable::new("verdicts", &["statement", "value", "reason", "boundary", "source"]);
    for (name, v) in [("extremal", &table.extremal), ("khintchine", &table.khintchine), ("strong-khintchine", &table.strong_ktc)] {
        t.push(vec![name.into(), v.value.to_string(), v.reason.clone(), v.boundary.to_string(), v.source.clone()]);
    }
    out.csv = Some(t);
    Ok(out)
}

fn mult_line(rc: &RunConfig, a: &MultLineArgs) -> Result<Output> {
    let alpha = scalar(&a.alpha)?;
    let recs = mult_min_on_line(&alpha, &scalar(&a.beta)?, &scalar(&a.x)?, a.qmax, &rc.settings)?;
    let mut out = Output::new(rc)?;
    let res = out.result();
    res.insert("records".into(), (recs.len() as i64).into());
    if let Some(last) = recs.last() {
        res.insert("last_q".into(), (last.q as i64).into());
        res.insert("last_value".into(), fmt_f64(last.value).into());
    }
    if let Some(w) = &a.omega {
        let v = classify_mult_line(&Ext::parse(w)?, !alpha.is_zero(), &BigRational::from_integer(0.into()), "asserted");
        out.report.embed("mult_khintchine", &v)?;
    }
    let mut t = CsvTable::new("mult-line", &["q", "value"]);
    for r in &recs {
        t.push(vec![r.q.to_string(), fmt_f64(r.value)]);
    }
    out.csv = Some(t);
    Ok(out)
}
