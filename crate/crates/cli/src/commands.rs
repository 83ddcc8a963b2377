use std::path::Path;

use avf_core::conditions::{
    asym_bush_residual, build_m, default_betas, default_rank_tolerance, expected_rank,
    triple_bush_residual, uniqueness_sweep, KernelBasis,
};
use avf_core::hamiltonian::HamiltonianSystem;
use avf_core::integrators::{
    avf_tableau, convergence_order, integrate, FloatSystem, FloatTableau, Method, SolverConfig,
};
use avf_core::linalg::Matrix;
use avf_core::quadrature::{g_poly, quad_rule_in, rational_to_decimal, NodeDomain, QuadRule, UniPoly};
use avf_core::real::{bits_for_digits, parse_rational};
use avf_core::trees::{
    conditions_up_to, double_bush, energy_condition_residual, free_class, ButcherTableau,
};
use avf_core::Real;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::{Cli, Command, Format, Global, MethodKind, RuleArgs, RunArgs};
use crate::report::{
    emit, read_file, CliError, CliResult, Report, EXIT_MISMATCH, EXIT_OK,
};

/// Rank and kernel decisions are meaningless below this many digits.
const MIN_RANK_DIGITS: u32 = 30;

pub fn run(cli: &Cli) -> CliResult<u8> {
    let g = &cli.global;
    if g.precision < 10 {
        return Err(CliError::Input("--precision must be at least 10 digits".into()));
    }
    match &cli.command {
        Command::Quad(r) => sweep(g, r, |s, z| quad(g, s, z)),
        Command::Tableau(r) => sweep(g, r, |s, z| tableau(g, s, z)),
        Command::Conditions { rule, m, tableau } => {
            let file = tableau.as_deref().map(read_tableau_file).transpose()?;
            sweep(g, rule, |s, z| conditions(g, s, z, *m, file.as_ref()))
        }
        Command::Rank { rule, m } => {
            require_rank_precision(g)?;
            sweep(g, rule, |s, z| rank(g, s, z, *m))
        }
        Command::Uniqueness { rule, m, betas } => {
            require_rank_precision(g)?;
            let betas = match betas {
                Some(list) => list.iter().map(|b| parse_rational(b)).collect::<Result<Vec<_>, _>>()?,
                None => default_betas(),
            };
            sweep(g, rule, |s, z| uniqueness(g, s, z, *m, &betas))
        }
        Command::Integrate { run, h, steps } => integrate_cmd(g, run, *h, *steps),
        Command::Order { run, t_end, h } => order_cmd(g, run, *t_end, h),
    }
}

fn require_rank_precision(g: &Global) -> CliResult<()> {
    if g.precision < MIN_RANK_DIGITS {
        return Err(CliError::Precision(format!(
            "rank and kernel decisions need --precision >= {MIN_RANK_DIGITS} (got {})",
            g.precision
        )));
    }
    Ok(())
}

/// Digits printed for high-precision values; the last few are noise.
fn out_digits(g: &Global) -> usize {
    (g.precision - 5) as usize
}

fn dec(x: &Real, g: &Global) -> String {
    x.to_decimal(out_digits(g))
}

fn decs(v: &[Real], g: &Global) -> Vec<String> {
    v.iter().map(|x| dec(x, g)).collect()
}

fn zeta_text(z: &BigRational) -> String {
    rational_to_decimal(z, 20)
}

fn rule_for(g: &Global, s: usize, zeta: &BigRational) -> CliResult<QuadRule> {
    let domain = if g.allow_exterior { NodeDomain::RealLine } else { NodeDomain::UnitInterval };
    Ok(quad_rule_in(s, zeta, g.precision, domain)?)
}

/// Run one job per `(s, ζ)`; several jobs need `--sweep` and run in parallel,
/// reported in ascending `(s, ζ)` order.
fn sweep<F>(g: &Global, r: &RuleArgs, job: F) -> CliResult<u8>
where
    F: Fn(usize, &BigRational) -> CliResult<Report> + Sync,
{
    let zetas = r.zeta.iter().map(|z| parse_rational(z)).collect::<Result<Vec<_>, _>>()?;
    let mut jobs: Vec<(usize, BigRational)> = r
        .s
        .iter()
        .flat_map(|&s| zetas.iter().map(move |z| (s, z.clone())))
        .collect();
    if jobs.len() > 1 && !r.sweep {
        return Err(CliError::Input("several --s/--zeta values need --sweep".into()));
    }
    if !r.sweep {
        let (s, z) = &jobs[0];
        let rep = job(*s, z)?;
        write_report(g, &[rep.json.clone()], &[&rep], false)?;
        return Ok(rep.code);
    }
    jobs.sort();
    jobs.dedup();
    let results: Vec<CliResult<Report>> = jobs.par_iter().map(|(s, z)| job(*s, z)).collect();
    let mut docs = Vec::with_capacity(jobs.len());
    let mut reports = Vec::new();
    let mut code = EXIT_OK;
    for ((s, z), res) in jobs.iter().zip(&results) {
        match res {
            Ok(rep) => {
                code = code.max(rep.code);
                docs.push(rep.json.clone());
                reports.push(rep);
            }
            Err(e) => {
                code = code.max(e.exit_code());
                docs.push(json!({ "s": s, "zeta": zeta_text(z), "error": e.to_string() }));
            }
        }
    }
    write_report(g, &docs, &reports, true)?;
    Ok(code)
}

fn write_report(g: &Global, docs: &[Value], reports: &[&Report], many: bool) -> CliResult<()> {
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => {
            let v = if many { Value::Array(docs.to_vec()) } else { docs[0].clone() };
            serde_json::to_string_pretty(&v).expect("JSON values serialize") + "\n"
        }
        Format::Csv => {
            let mut out = String::new();
            for (k, rep) in reports.iter().enumerate() {
                if k == 0 {
                    out.push_str(&rep.csv());
                } else {
                    for row in &rep.csv_rows {
                        out.push_str(row);
                        out.push('\n');
                    }
                }
            }
            out
        }
    };
    emit(&text, g.output.as_deref())
}

fn quad(g: &Global, s: usize, zeta: &BigRational) -> CliResult<Report> {
    let rule = rule_for(g, s, zeta)?;
    let rj = rule.to_json(out_digits(g));
    let z = zeta_text(zeta);
    let csv_rows = (0..s)
        .map(|i| format!("{s},{z},{},{},{}", i + 1, rj.c[i], rj.b[i]))
        .collect();
    Ok(Report {
        json: serde_json::to_value(&rj).expect("rule serializes"),
        csv_header: "s,zeta,i,c,b".into(),
        csv_rows,
        code: EXIT_OK,
    })
}

fn tableau(g: &Global, s: usize, zeta: &BigRational) -> CliResult<Report> {
    let rule = rule_for(g, s, zeta)?;
    let tab = avf_tableau(&rule);
    let z = zeta_text(zeta);
    let a: Vec<Vec<String>> = (0..s).map(|i| decs(tab.a.row(i), g)).collect();
    let (b, c) = (decs(&tab.b, g), decs(&tab.c, g));
    let mut csv_rows: Vec<String> = (0..s)
        .map(|i| format!("{s},{z},{},{},{}", i + 1, c[i], a[i].join(",")))
        .collect();
    csv_rows.push(format!("{s},{z},b,,{}", b.join(",")));
    Ok(Report {
        json: json!({ "s": s, "zeta": z, "order": rule.order, "a": a, "b": b, "c": c }),
        csv_header: format!(
            "s,zeta,row,c,{}",
            (1..=s).map(|j| format!("a{j}")).collect::<Vec<_>>().join(",")
        ),
        csv_rows,
        code: EXIT_OK,
    })
}

/// Entries may be JSON numbers or decimal/fraction strings.
#[derive(Deserialize)]
pub struct TableauFile {
    a: Vec<Vec<Value>>,
    b: Vec<Value>,
    c: Vec<Value>,
}

fn read_tableau_file(path: &Path) -> CliResult<TableauFile> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| CliError::Input(format!("malformed tableau file {}: {e}", path.display())))
}

fn entry(v: &Value, prec: u32) -> CliResult<Real> {
    match v {
        Value::String(s) => Ok(Real::parse(s, prec)?),
        Value::Number(n) => Ok(Real::parse(&n.to_string(), prec)?),
        other => Err(CliError::Input(format!("tableau entry {other} is not a number"))),
    }
}

impl TableauFile {
    fn to_tableau(&self, prec: u32) -> CliResult<ButcherTableau> {
        let s = self.b.len();
        if s == 0 || self.a.len() != s || self.a.iter().any(|r| r.len() != s) {
            return Err(CliError::Input(format!("tableau must be square with {s} stages")));
        }
        let rows = self
            .a
            .iter()
            .map(|r| r.iter().map(|v| entry(v, prec)).collect::<CliResult<Vec<_>>>())
            .collect::<CliResult<Vec<_>>>()?;
        let a = Matrix::from_fn(s, s, |i, j| rows[i][j].clone());
        let b = self.b.iter().map(|v| entry(v, prec)).collect::<CliResult<Vec<_>>>()?;
        let c = self.c.iter().map(|v| entry(v, prec)).collect::<CliResult<Vec<_>>>()?;
        Ok(ButcherTableau::new(a, b, c)?)
    }
}

fn conditions(
    g: &Global,
    s: usize,
    zeta: &BigRational,
    m: usize,
    file: Option<&TableauFile>,
) -> CliResult<Report> {
    if m < 1 {
        return Err(CliError::Input("--m must be at least 1".into()));
    }
    let rule = rule_for(g, s, zeta)?;
    let tab = match file {
        Some(f) => f.to_tableau(bits_for_digits(g.precision))?,
        None => avf_tableau(&rule),
    };
    if tab.stages() != s {
        return Err(CliError::Input(format!(
            "tableau has {} stages but --s is {s}",
            tab.stages()
        )));
    }
    let threshold = rule.tolerance();
    let z = zeta_text(zeta);
    let mut rows: Vec<(String, String, String, String, Real)> = Vec::new();
    for ft in conditions_up_to(m, m)? {
        let r = energy_condition_residual(&ft, &tab);
        rows.push(("tree".into(), ft.to_string(), ft.order().to_string(), ft.branching().to_string(), r));
    }
    for q in 2..m {
        for p in 1..q {
            let t = double_bush(p, q);
            let ft = free_class(&t)?;
            let r = energy_condition_residual(&ft, &tab);
            rows.push((
                "double_bush".into(),
                format!("t_{{{p},{q}}}"),
                t.size().to_string(),
                ft.branching().to_string(),
                r,
            ));
        }
    }
    // Nonlinear obstructions; combinations outside the rule's exactness range are skipped.
    let x = UniPoly::x();
    let one = UniPoly::one();
    for p in 1..=2 {
        let gp = g_poly(p);
        for (rname, r) in [("x", &x), ("1", &one)] {
            if let Ok(v) = triple_bush_residual(&tab.a, &rule, &gp, &gp, r) {
                rows.push(("triple_bush".into(), format!("(G{p},G{p},{rname})"), String::new(), String::new(), v));
            }
        }
    }
    for q in 1..rule.order {
        if let Ok(v) = asym_bush_residual(&tab.a, &rule, q) {
            rows.push(("asym_bush".into(), format!("q={q}"), String::new(), String::new(), v));
        }
    }
    let mut all_below = true;
    let mut csv_rows = Vec::with_capacity(rows.len());
    let mut json_rows = Vec::with_capacity(rows.len());
    for (kind, id, order, branching, r) in &rows {
        let below = r.abs() <= threshold;
        all_below &= below;
        let rd = dec(r, g);
        csv_rows.push(format!("{s},{z},{kind},\"{id}\",{order},{branching},{rd},{below}"));
        json_rows.push(json!({
            "kind": kind, "id": id, "order": order, "branching": branching,
            "residual": rd, "below_threshold": below,
        }));
    }
    Ok(Report {
        json: json!({
            "s": s, "zeta": z, "m": m,
            "tableau": if file.is_some() { "file" } else { "avf" },
            "threshold": dec(&threshold, g),
            "all_below_threshold": all_below,
            "rows": json_rows,
        }),
        csv_header: "s,zeta,kind,id,order,branching,residual,below_threshold".into(),
        csv_rows,
        code: EXIT_OK,
    })
}

fn resolve_m(s: usize, m: Option<usize>) -> CliResult<usize> {
    let m = m.unwrap_or(2 * s - 1);
    if s < 1 || (m != 2 * s && m + 1 != 2 * s) {
        return Err(CliError::Input(format!("--m must be 2s or 2s-1 (s = {s}, m = {m})")));
    }
    Ok(m)
}

fn kernel_json(k: &KernelBasis, g: &Global) -> Value {
    let elements: Vec<Value> = k
        .elements
        .iter()
        .map(|e| {
            let mut v = json!({ "label": e.label, "alpha": decs(&e.alpha, g) });
            if let Some(f) = &e.factors {
                v["u"] = json!(decs(&f.u, g));
                v["v"] = json!(decs(&f.v, g));
            }
            v
        })
        .collect();
    json!({ "structured": k.structured, "checks": k.checks, "elements": elements })
}

fn rank(g: &Global, s: usize, zeta: &BigRational, m: Option<usize>) -> CliResult<Report> {
    if s < 1 {
        return Err(CliError::Input("--s must be at least 1".into()));
    }
    let m = resolve_m(s, m)?;
    let rule = rule_for(g, s, zeta)?;
    let op = build_m(&rule, m)?;
    let ra = avf_core::conditions::rank_kernel(&op, default_rank_tolerance(g.precision))?;
    let expected = expected_rank(s, zeta, m);
    let dim = ra.kernel.dim();
    let (verdict, code) = match expected {
        None => ("no expectation", EXIT_OK),
        Some(e) if e == ra.rank && dim == s * s - e && ra.kernel.all_checks_pass() => ("match", EXIT_OK),
        Some(_) => ("mismatch", EXIT_MISMATCH),
    };
    let z = zeta_text(zeta);
    let exp_text = expected.map_or(String::new(), |e| e.to_string());
    Ok(Report {
        json: json!({
            "s": s, "zeta": z, "m": m,
            "rank": ra.rank,
            "expected_rank": expected,
            "kernel_dim": dim,
            "expected_kernel_dim": expected.map(|e| s * s - e),
            "expectation": verdict,
            "pivot_gap": [ra.pivot_gap.0, ra.pivot_gap.1],
            "rank_tolerance": ra.tol,
            "kernel": kernel_json(&ra.kernel, g),
        }),
        csv_header: "s,zeta,m,rank,expected_rank,kernel_dim,expectation".into(),
        csv_rows: vec![format!("{s},{z},{m},{},{exp_text},{dim},{verdict}", ra.rank)],
        code,
    })
}

fn uniqueness(
    g: &Global,
    s: usize,
    zeta: &BigRational,
    m: Option<usize>,
    betas: &[BigRational],
) -> CliResult<Report> {
    if s < 2 {
        return Err(CliError::Input("uniqueness needs at least two stages".into()));
    }
    let m = resolve_m(s, m)?;
    let rule = rule_for(g, s, zeta)?;
    let rep = uniqueness_sweep(&rule, m, betas)?;
    let (verdict, code) = match rep.expected_rank {
        None => ("no expectation", EXIT_OK),
        Some(_) if rep.matches(1e-12, 1e-6) => ("match", EXIT_OK),
        Some(_) => ("mismatch", EXIT_MISMATCH),
    };
    let mut json = serde_json::to_value(&rep).expect("report serializes");
    json["expectation"] = json!(verdict);
    let z = zeta_text(zeta);
    let mut csv_rows = Vec::new();
    for f in &rep.fits {
        for (b, r) in betas.iter().zip(&f.residuals) {
            csv_rows.push(format!(
                "{s},{z},\"{}\",{},{r:e},{},{:e},{:e}",
                f.condition,
                rational_to_decimal(b, 20),
                f.exponent,
                f.coeff,
                f.expected_coeff
            ));
        }
    }
    Ok(Report {
        json,
        csv_header: "s,zeta,condition,beta,residual,exponent,coeff,expected_coeff".into(),
        csv_rows,
        code,
    })
}

fn load_system(path: &Path) -> CliResult<HamiltonianSystem> {
    Ok(HamiltonianSystem::from_json(&read_file(path)?)?)
}

fn method_for(g: &Global, run: &RunArgs) -> CliResult<Method> {
    Ok(match run.method {
        MethodKind::Avf => Method::Avf,
        MethodKind::Midpoint => Method::Midpoint,
        MethodKind::Euler => Method::ExplicitEuler,
        MethodKind::Quad => {
            let rule = rule_for(g, run.s, &parse_rational(&run.zeta)?)?;
            Method::RungeKutta(FloatTableau::from(&avf_tableau(&rule)))
        }
        MethodKind::Tableau => {
            let path = run
                .tableau
                .as_deref()
                .ok_or_else(|| CliError::Input("--method tableau needs --tableau <file>".into()))?;
            let tab = read_tableau_file(path)?.to_tableau(bits_for_digits(g.precision))?;
            Method::RungeKutta(FloatTableau::from(&tab))
        }
    })
}

fn integrate_cmd(g: &Global, run: &RunArgs, h: f64, steps: usize) -> CliResult<u8> {
    let sys = FloatSystem::new(&load_system(&run.hamiltonian)?);
    let method = method_for(g, run)?;
    let cfg = SolverConfig::new(run.tol, run.max_iter)?;
    let out = integrate(&sys, &method, &run.y0, h, steps, &cfg)?;
    let total: usize = out.iterations.iter().sum();
    let summary = json!({
        "method": method.name(),
        "h": h,
        "steps": steps,
        "max_energy_drift": out.max_energy_drift(),
        "drift_slope": out.drift_slope(),
        "final_state": out.final_state(),
        "solver": {
            "total_iterations": total,
            "mean_iterations": total as f64 / steps as f64,
            "max_iterations": out.iterations.iter().max(),
        },
    });
    let summary = serde_json::to_string_pretty(&summary).expect("JSON values serialize") + "\n";
    match g.format.unwrap_or(Format::Csv) {
        Format::Json => emit(&summary, g.output.as_deref())?,
        Format::Csv => {
            emit(&out.to_csv(), g.output.as_deref())?;
            if g.output.is_some() {
                print!("{summary}");
            } else {
                eprint!("{summary}");
            }
        }
    }
    Ok(EXIT_OK)
}

fn order_cmd(g: &Global, run: &RunArgs, t_end: f64, h: &[f64]) -> CliResult<u8> {
    let sys = FloatSystem::new(&load_system(&run.hamiltonian)?);
    let method = method_for(g, run)?;
    let cfg = SolverConfig::new(run.tol, run.max_iter)?;
    let fit = convergence_order(&sys, &method, &run.y0, t_end, h, &cfg)?;
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => {
            let v = json!({
                "method": method.name(), "t_end": t_end, "slope": fit.slope,
                "step_sizes": fit.step_sizes, "errors": fit.errors,
            });
            serde_json::to_string_pretty(&v).expect("JSON values serialize") + "\n"
        }
        Format::Csv => {
            let mut out = String::from("h,error\n");
            for (h, e) in fit.step_sizes.iter().zip(&fit.errors) {
                out.push_str(&format!("{h:e},{e:e}\n"));
            }
            out
        }
    };
    emit(&text, g.output.as_deref())?;
    Ok(EXIT_OK)
}
