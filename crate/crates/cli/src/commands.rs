//! Subcommand implementations. JSON documents carry `"schema": 1`; every
//! exact quantity is emitted as `{"exact": ..., "decimal": ...}` and every
//! float as a 17-significant-digit decimal string.

use std::io::{self, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use qmark::exact::Fraction;
use qmark::partition::{enumerate_level, level_budget_from_env, theta, LevelVisitor, Node};
use qmark::question_mark::{
    cf_of_rational, qm_inverse_dyadic, qm_rational, qm_real, DyadicRational,
};
use qmark::regularity::{lambda_star, large_census, prop1_pipeline, RegularityError};
use qmark::spectral::gauss::mu_gauss_rule;
use qmark::spectral::jacobi::{
    discretize, discretize_adaptive, honest_count, recurrence_coeffs, regularity_diagnostic,
    JacobiError, MeasureAtoms,
};
use qmark::spectral::kinney::{kinney_dimension, KinneyOptions, KINNEY_BRACKET};
use qmark::spectral::quadrature::QuadError;
use qmark::verify::run_all;
use serde_json::{json, Value};

use crate::numfmt;
use crate::{Command, Failure, Format};

const SCHEMA: u32 = 1;

/// Order of the Gauss rule placed on each adaptive cell.
const ADAPTIVE_RULE_ORDER: usize = 6;

pub fn resolve_format(cmd: &Command, requested: Option<Format>) -> Result<Format, Failure> {
    let (default, allowed): (Format, &[Format]) = match cmd {
        Command::Verify { .. } => (Format::Table, &[Format::Table, Format::Json, Format::Csv]),
        Command::Pipeline { .. } | Command::LambdaStar { .. } => (Format::Json, &[Format::Json]),
        _ => (Format::Json, &[Format::Json, Format::Csv]),
    };
    let f = requested.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Failure::Config(format!(
            "format {} is not available for this subcommand",
            f.name()
        )))
    }
}

fn frac(f: &Fraction<BigInt>) -> Value {
    json!({ "exact": f.to_string(), "decimal": numfmt::ratio(&f.to_ratio()) })
}

fn ratio(r: &BigRational) -> Value {
    json!({ "exact": r.to_string(), "decimal": numfmt::ratio(r) })
}

fn dyadic(d: &DyadicRational<BigInt>) -> Value {
    json!({ "exact": d.to_string(), "decimal": numfmt::ratio(&d.to_fraction().to_ratio()) })
}

fn dec(v: f64) -> Value {
    Value::String(numfmt::float(v))
}

fn document(command: &str, body: Value) -> Value {
    let mut doc = json!({ "schema": SCHEMA, "command": command });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    doc
}

fn write_json(out: &mut dyn Write, doc: &Value) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, doc).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn regularity_failure(e: RegularityError) -> Failure {
    match e {
        RegularityError::SearchCap { .. } => Failure::Unmet(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

fn quad_failure(e: QuadError) -> Failure {
    match e {
        QuadError::BadTolerance => Failure::Config(e.to_string()),
        _ => Failure::Unmet(e.to_string()),
    }
}

fn jacobi_failure(e: JacobiError) -> Failure {
    match e {
        JacobiError::LostPositivity { .. } => Failure::Unmet(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

pub fn dispatch(cmd: &Command, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Eval { x, real, eps } => eval(x, *real, *eps, format, out),
        Command::Invert { y } => invert(y, format, out),
        Command::Partition { level } => partition(*level, format, out),
        Command::Census { n, alpha } => census(*n, alpha, format, out),
        Command::Pipeline { alpha } => pipeline(alpha, out),
        Command::LambdaStar { n, alpha } => lambda(*n, alpha, out),
        Command::Dimension { eps, max_intervals } => dimension(*eps, *max_intervals, format, out),
        Command::Jacobi {
            level,
            count,
            adaptive,
            tol,
            no_truncate,
        } => jacobi(*level, *count, *adaptive, *tol, *no_truncate, format, out),
        Command::Verify { max_level } => verify(*max_level, format, out),
    }
}

fn eval(x: &str, real: bool, eps: f64, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    if real {
        let v: f64 = x
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("cannot read {x:?} as a float")))?;
        let q = qm_real(v, eps).map_err(|e| Failure::Config(e.to_string()))?;
        if format == Format::Csv {
            writeln!(out, "x,eps,value")?;
            writeln!(
                out,
                "{},{},{}",
                numfmt::float(v),
                numfmt::float(eps),
                numfmt::float(q)
            )?;
            return Ok(());
        }
        let doc = document(
            "eval",
            json!({ "x": dec(v), "eps": dec(eps), "value": { "decimal": numfmt::float(q) } }),
        );
        return write_json(out, &doc);
    }
    let r = numfmt::parse_rational(x).map_err(Failure::Config)?;
    let f = Fraction::from_ratio(&r).map_err(|e| Failure::Config(e.to_string()))?;
    let value = qm_rational(&f);
    let terms = cf_of_rational(&f).terms().to_vec();
    if format == Format::Csv {
        writeln!(out, "x,x_decimal,value,value_decimal")?;
        writeln!(
            out,
            "{f},{},{value},{}",
            numfmt::ratio(&f.to_ratio()),
            numfmt::ratio(&value.to_fraction().to_ratio())
        )?;
        return Ok(());
    }
    let doc = document(
        "eval",
        json!({ "x": frac(&f), "continued_fraction": terms, "value": dyadic(&value) }),
    );
    write_json(out, &doc)
}

fn parse_dyadic(y: &str) -> Result<DyadicRational<BigInt>, Failure> {
    if let Ok(d) = y.trim().parse::<DyadicRational<BigInt>>() {
        return Ok(d);
    }
    let r = numfmt::parse_rational(y).map_err(Failure::Config)?;
    let k = numfmt::log2_exact(r.denom())
        .ok_or_else(|| Failure::Config(format!("{y} is not a dyadic rational")))?;
    DyadicRational::new(r.numer().clone(), k).map_err(|e| Failure::Config(e.to_string()))
}

fn invert(y: &str, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let d = parse_dyadic(y)?;
    let x = qm_inverse_dyadic(&d);
    if format == Format::Csv {
        writeln!(out, "y,y_decimal,x,x_decimal")?;
        writeln!(
            out,
            "{d},{},{x},{}",
            numfmt::ratio(&d.to_fraction().to_ratio()),
            numfmt::ratio(&x.to_ratio())
        )?;
        return Ok(());
    }
    let terms = cf_of_rational(&x).terms().to_vec();
    let doc = document(
        "invert",
        json!({ "y": dyadic(&d), "x": frac(&x), "continued_fraction": terms }),
    );
    write_json(out, &doc)
}

/// Streams one row per interval so that large levels need no buffering.
struct RowWriter<'w> {
    out: &'w mut dyn Write,
    format: Format,
    measure: String,
    first: bool,
    error: Option<io::Error>,
}

impl RowWriter<'_> {
    fn row(&mut self, node: &Node<'_, BigInt>) -> io::Result<()> {
        let word = node.word();
        let (left, right) = (node.left(), node.right());
        let length = right.to_ratio() - left.to_ratio();
        let th = theta(&word);
        match self.format {
            Format::Csv => writeln!(
                self.out,
                "{word},{th},{left},{right},{length},{},{}",
                numfmt::ratio(&length),
                self.measure
            ),
            _ => {
                let row = json!({
                    "word": word.to_string(),
                    "theta": th.to_string(),
                    "left": frac(&left),
                    "right": frac(&right),
                    "length": ratio(&length),
                    "measure": self.measure,
                });
                if !self.first {
                    write!(self.out, ",")?;
                }
                self.first = false;
                write!(self.out, "\n    ")?;
                serde_json::to_writer(&mut *self.out, &row).map_err(io::Error::from)
            }
        }
    }
}

impl LevelVisitor<BigInt> for RowWriter<'_> {
    fn descend(&mut self, _node: &Node<'_, BigInt>) -> bool {
        self.error.is_none()
    }

    fn visit(&mut self, node: &Node<'_, BigInt>) {
        if self.error.is_none() {
            if let Err(e) = self.row(node) {
                self.error = Some(e);
            }
        }
    }
}

fn partition(level: usize, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let budget = level_budget_from_env();
    if level > budget {
        return Err(Failure::Config(format!(
            "level {level} exceeds the budget {budget} (QMARK_MAX_SB_LEVEL)"
        )));
    }
    let measure = format!("1/2^{level}");
    match format {
        Format::Csv => writeln!(out, "word,theta,left,right,length,length_decimal,measure")?,
        _ => write!(
            out,
            "{{\n  \"schema\": {SCHEMA},\n  \"command\": \"partition\",\n  \"level\": {level},\n  \"rows\": ["
        )?,
    }
    let mut w = RowWriter {
        out: &mut *out,
        format,
        measure,
        first: true,
        error: None,
    };
    enumerate_level(level, &mut w);
    if let Some(e) = w.error {
        return Err(e.into());
    }
    if format != Format::Csv {
        writeln!(out, "\n  ]\n}}")?;
    }
    Ok(())
}

fn census(
    n: usize,
    alpha: &BigRational,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let c = large_census(n, alpha).map_err(regularity_failure)?;
    if format == Format::Csv {
        writeln!(out, "word,theta,left,right,length,length_decimal")?;
        for m in &c.members {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                m.word,
                m.theta(),
                m.left,
                m.right,
                m.length,
                numfmt::ratio(&m.length.to_ratio())
            )?;
        }
        return Ok(());
    }
    let members: Vec<Value> = c
        .members
        .iter()
        .map(|m| {
            json!({
                "word": m.word.to_string(),
                "theta": m.theta().to_string(),
                "left": frac(&m.left),
                "right": frac(&m.right),
                "length": frac(&m.length),
            })
        })
        .collect();
    let doc = document(
        "census",
        json!({ "n": n, "alpha": ratio(alpha), "count": c.count, "members": members }),
    );
    write_json(out, &doc)
}

fn pipeline(alpha: &BigRational, out: &mut dyn Write) -> Result<(), Failure> {
    let p = prop1_pipeline(alpha).map_err(regularity_failure)?;
    let words = |ws: &[qmark::Word]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>();
    let seeds: Vec<Value> = p
        .seeds
        .members
        .iter()
        .zip(&p.seeds.depths)
        .map(|(f, d)| json!({ "fraction": frac(f), "depth": d }))
        .collect();
    let e_large: Vec<Value> = p
        .e_large
        .iter()
        .map(|m| json!({ "word": m.word.to_string(), "length": frac(&m.length) }))
        .collect();
    let doc = document(
        "pipeline",
        json!({
            "alpha": ratio(alpha),
            "seeds": seeds,
            "n1": p.n1,
            "f_left": words(&p.f_left),
            "f_right": words(&p.f_right),
            "k2_max": p.k2_max,
            "k3_max": p.k3_max,
            "kappa": p.kappa,
            "n2": p.n2,
            "e_large_at_n2": e_large,
            "k1_max": p.k1_max,
            "n3": p.n3,
            "l_bound": p.l_bound,
            "predicted_words_at_n3": words(&p.predicted_words(p.n3)),
        }),
    );
    write_json(out, &doc)
}

fn lambda(n: usize, alpha: &BigRational, out: &mut dyn Write) -> Result<(), Failure> {
    let r = lambda_star(n, alpha).map_err(regularity_failure)?;
    let complement: Vec<Value> = r
        .complement
        .iter()
        .map(|e| json!({ "index": e.index.to_string(), "length": frac(&e.length) }))
        .collect();
    let holds = r.chain_holds();
    let doc = document(
        "lambda-star",
        json!({
            "n": n,
            "alpha": ratio(alpha),
            "lower": frac(&r.lower),
            "half_census_count": r.half_census_count,
            "ceiling": ratio(&r.ceiling),
            "chain_bound": ratio(&r.chain_bound()),
            "chain_holds": holds,
            "complement": complement,
        }),
    );
    write_json(out, &doc)?;
    if holds {
        Ok(())
    } else {
        Err(Failure::Unmet("lower bound is below 1 - ceiling".into()))
    }
}

fn dimension(
    eps: f64,
    max_intervals: Option<u64>,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let mut opts = KinneyOptions::default();
    if let Some(m) = max_intervals {
        opts.max_intervals = m;
    }
    let est = kinney_dimension(eps, &opts).map_err(quad_failure)?;
    let (lo, hi) = KINNEY_BRACKET;
    if format == Format::Csv {
        writeln!(
            out,
            "value,error_bound,integral,integral_error_bound,intervals"
        )?;
        writeln!(
            out,
            "{},{},{},{},{}",
            numfmt::float(est.value),
            numfmt::float(est.error_bound),
            numfmt::float(est.integral.value),
            numfmt::float(est.integral.error_bound),
            est.integral.intervals_used
        )?;
        return Ok(());
    }
    let doc = document(
        "dimension",
        json!({
            "eps": dec(eps),
            "value": dec(est.value),
            "error_bound": dec(est.error_bound),
            "integral": {
                "value": dec(est.integral.value),
                "error_bound": dec(est.integral.error_bound),
                "intervals": est.integral.intervals_used,
            },
            "reference_bracket": [dec(lo), dec(hi)],
            "within_bracket": est.within(lo, hi),
        }),
    );
    write_json(out, &doc)
}

fn jacobi(
    level: usize,
    count: usize,
    adaptive: Option<f64>,
    tol: f64,
    no_truncate: bool,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    let (coarse, refined, describe): (MeasureAtoms<f64>, MeasureAtoms<f64>, Value) = match adaptive
    {
        Some(h) => {
            if !(h > 0.0 && h < 1.0) {
                return Err(Failure::Config(
                    "--adaptive width must lie in (0, 1)".into(),
                ));
            }
            let rule = mu_gauss_rule(ADAPTIVE_RULE_ORDER);
            (
                discretize_adaptive(h, &rule),
                discretize_adaptive(h / 3.0, &rule),
                json!({ "kind": "adaptive", "width": dec(h), "refined_width": dec(h / 3.0) }),
            )
        }
        None => (
            discretize(level).map_err(jacobi_failure)?,
            discretize(level + 2).map_err(jacobi_failure)?,
            json!({ "kind": "uniform", "level": level, "refined_level": level + 2 }),
        ),
    };
    let c = recurrence_coeffs(&coarse, count).map_err(jacobi_failure)?;
    let cr = recurrence_coeffs(&refined, count).map_err(jacobi_failure)?;
    let honest = honest_count(&c, &cr, tol);
    let shown = if no_truncate { count } else { honest };
    if shown < count {
        eprintln!(
            "qmark: {shown} of {count} coefficients agree with the refined discretisation \
             to {}; pass --no-truncate to see all",
            numfmt::float(tol)
        );
    }
    let rows = regularity_diagnostic(&c.truncated(shown));
    if format == Format::Csv {
        writeln!(out, "j,a_j,b_j,geo_mean_j")?;
        for r in &rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.j,
                numfmt::float(r.a),
                numfmt::float(r.b),
                numfmt::float(r.geo_mean)
            )?;
        }
        return Ok(());
    }
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "j": r.j,
                "a": dec(r.a),
                "b": dec(r.b),
                "geo_mean": dec(r.geo_mean),
                "gap": dec(r.gap),
            })
        })
        .collect();
    let doc = document(
        "jacobi",
        json!({
            "discretization": describe,
            "atoms": coarse.len(),
            "requested": count,
            "tolerance": dec(tol),
            "honest_count": honest,
            "truncated": !no_truncate && honest < count,
            "rows": rows,
        }),
    );
    write_json(out, &doc)
}

fn verify(max_level: usize, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let budget = level_budget_from_env();
    if max_level == 0 || max_level > budget {
        return Err(Failure::Config(format!(
            "--max-level must lie in 1..={budget} (QMARK_MAX_SB_LEVEL)"
        )));
    }
    let report = run_all(max_level);
    let passed = report.passed();
    match format {
        Format::Json => {
            let checks = serde_json::to_value(&report.checks).map_err(io::Error::from)?;
            let doc = document(
                "verify",
                json!({ "max_level": max_level, "checks": checks, "passed": passed }),
            );
            write_json(out, &doc)?;
        }
        Format::Csv => {
            writeln!(out, "check,checked,failed")?;
            for c in &report.checks {
                writeln!(out, "{},{},{}", c.name, c.checked, c.failures)?;
            }
        }
        Format::Table => {
            for c in &report.checks {
                writeln!(out, "{c}")?;
            }
            writeln!(out, "{}", if passed { "PASS" } else { "FAIL" })?;
        }
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Unmet("invariant suite reported violations".into()))
    }
}
