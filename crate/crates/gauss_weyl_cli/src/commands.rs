use gauss_weyl::checks::{self, CheckOutcome, Mutation, Scale, LADDER_QUAD_TOL};
use gauss_weyl::heat_semigroup::{heat_full, heat_full_quadrature, heat_partial, heat_partial_quadrature, CoordinateSplit};
use gauss_weyl::hermite_space::{coherent_state, FunctionRep, HermiteBasis};
use gauss_weyl::linalg::{operator_norm, CMatrix, MatrixMeta, OperatorMatrix};
use gauss_weyl::mc_wiener::{ensemble_csv, lattice_norm_probability, power_weights_limit, sample_brownian};
use gauss_weyl::quantizer::{
    antiwick_matrix_with_order, hybrid_matrix_with_order, ladder_run, oracle_u, site_order, weyl_matrix_classical, weyl_matrix_kernel,
    weyl_matrix_with_order, wick_symbol, IndexLadder,
};
use gauss_weyl::symbol_library::{heat_order, sample_ball, Family, SymbolDescriptor};
use gauss_weyl::wigner::WignerGrid;
use gauss_weyl::{GwError, PhasePoint, Result, C64};
use serde_json::{json, Value};

use crate::config::{McSpec, Method, RunConfig, ScaleName, StateSpec};
use crate::output::{LinePlot, OutDir, Series};

/// Relative operator-norm residual accepted against a closed-form oracle.
pub const ORACLE_TOL: f64 = 1e-5;

fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(GwError::Input(msg.into()))
}

fn symbol(cfg: &RunConfig) -> Result<SymbolDescriptor> {
    let spec = cfg.symbol.as_ref().ok_or_else(|| GwError::Input("config has no symbol".into()))?;
    let f = spec.build(cfg.dim_hint())?;
    if let Some(d) = cfg.dim {
        if d != f.dim {
            return input(format!("--dim {d} differs from the symbol dimension {}", f.dim));
        }
    }
    Ok(f)
}

fn basis_for(cfg: &RunConfig, dim: usize) -> Result<HermiteBasis> {
    HermiteBasis::new(dim, cfg.h(), cfg.degree_for(dim))
}

fn points(cfg: &RunConfig, dim: usize, radius: f64) -> Result<Vec<PhasePoint>> {
    if let Some(ps) = &cfg.points {
        return ps
            .iter()
            .map(|p| {
                if p.len() != 2 * dim {
                    return input(format!("point {p:?} must have {} coordinates", 2 * dim));
                }
                Ok(PhasePoint::from_flat(p))
            })
            .collect();
    }
    if dim == 1 {
        let n = 5;
        let step = 2.0 * radius / (n - 1) as f64;
        let axis: Vec<f64> = (0..n).map(|i| -radius + step * i as f64).collect();
        return Ok(axis.iter().flat_map(|&x| axis.iter().map(move |&xi| PhasePoint::from_flat(&[x, xi]))).collect());
    }
    Ok(sample_ball(dim, radius, 25))
}

fn flat_cols(p: &PhasePoint) -> String {
    p.flat().iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(",")
}

fn point_header(dim: usize) -> String {
    let mut cols: Vec<String> = (0..dim).map(|j| format!("z{j}")).collect();
    cols.extend((0..dim).map(|j| format!("zeta{j}")));
    cols.join(",")
}

/// Closed-form operator for families that have one, with Weyl tables on `weyl` and anti-Wick elsewhere.
fn oracle(f: &SymbolDescriptor, weyl: &[usize], basis: &HermiteBasis) -> Result<Option<OperatorMatrix>> {
    let atoms: Vec<(C64, Vec<f64>, Vec<f64>)> = match &f.family {
        Family::Constant(c) => {
            let mut id = OperatorMatrix::identity(basis);
            id.entries *= *c;
            return Ok(Some(id));
        }
        Family::Exponential { a, b } => vec![(C64::new(1.0, 0.0), a.clone(), b.clone())],
        Family::FourierMeasure { atoms } => atoms.iter().map(|t| (t.c(), t.a.clone(), t.b.clone())).collect(),
        _ => return Ok(None),
    };
    let h = basis.h;
    let n = basis.len();
    let mut acc = CMatrix::zeros(n, n);
    for (c, a, b) in &atoms {
        let damp: f64 = (0..f.dim).filter(|j| !weyl.contains(j)).map(|j| (-(h / 4.0) * (a[j] * a[j] + b[j] * b[j])).exp()).product();
        acc += oracle_u(a, b, basis)?.entries * (*c * damp);
    }
    let meta = MatrixMeta { symbol: f.name.clone(), method: "oracle".into(), h, ..Default::default() };
    OperatorMatrix::new(basis.clone(), acc, meta).map(Some)
}

pub fn quantize(cfg: &RunConfig, out: &mut OutDir) -> Result<i32> {
    let f = symbol(cfg)?;
    let basis = basis_for(cfg, f.dim)?;
    let order = cfg.order.unwrap_or_else(|| site_order(f.dim, basis.max_degree));
    let method = cfg.method.unwrap_or(Method::Weyl);
    let all: Vec<usize> = (0..f.dim).collect();
    let (a, weyl_set) = match method {
        Method::Weyl => (weyl_matrix_with_order(&f, &basis, order)?, all),
        Method::Antiwick => (antiwick_matrix_with_order(&f, &basis, order)?, vec![]),
        Method::Hybrid => {
            let split = CoordinateSplit::new(f.dim, cfg.selected.clone().unwrap_or_default())?;
            (hybrid_matrix_with_order(&f, &split, &basis, order)?, split.selected)
        }
        Method::Kernel => (weyl_matrix_kernel(&f, &basis, order)?, all),
        Method::Classical => (weyl_matrix_classical(&f, &basis)?, all),
    };
    let norm = operator_norm(&a)?;
    out.json("matrix.json", json!({ "matrix": a.to_json() }))?;

    let (residual, passed) = match oracle(&f, &weyl_set, &basis)? {
        Some(o) => {
            let on = operator_norm(&o)?;
            let r = operator_norm(&a.sub(&o)?)? / on.max(f64::MIN_POSITIVE);
            (Some(r), r <= ORACLE_TOL)
        }
        None => (None, true),
    };
    out.json(
        "summary.json",
        json!({
            "symbol": f.name,
            "method": a.meta.method,
            "dim": f.dim,
            "h": basis.h,
            "degree": basis.max_degree,
            "basis_size": basis.len(),
            "order": order,
            "operator_norm": norm,
            "hermitian_defect": a.hermitian_defect(),
            "oracle_residual": residual,
            "oracle_tolerance": ORACLE_TOL,
            "passed": passed,
        }),
    )?;
    match residual {
        Some(r) => println!("quantize: {} {} norm={norm:.6e} oracle_residual={r:.3e} tol={ORACLE_TOL:.0e}", f.name, a.meta.method),
        None => println!("quantize: {} {} norm={norm:.6e} (no oracle for this family)", f.name, a.meta.method),
    }
    Ok(if passed { 0 } else { 3 })
}

pub fn converge(cfg: &RunConfig, out: &mut OutDir) -> Result<i32> {
    let f = symbol(cfg)?;
    if f.class.is_none() {
        return input(format!("symbol '{}' carries no class data (M, ε)", f.name));
    }
    let d = f.dim;
    let basis = basis_for(cfg, d)?;
    let orders = cfg.ladders.clone().unwrap_or_else(|| vec![(0..d).collect()]);
    let error_bar = cfg.error_bar.unwrap_or(false);
    let mut reports = Vec::new();
    for (i, ord) in orders.iter().enumerate() {
        let mut sorted = ord.clone();
        sorted.sort_unstable();
        if sorted != (0..d).collect::<Vec<_>>() {
            return input(format!("ladder {ord:?} must be a permutation of 0..{d}"));
        }
        let ladder = IndexLadder::from_order(ord)?;
        let rep = ladder_run(&f, &ladder, &basis, error_bar)?;
        let extra = vec![format!("ladder={ord:?} h={} degree={} order={}", rep.h, rep.max_degree, rep.order)];
        out.csv(&format!("ladder_{i}.csv"), &extra, &rep.to_csv())?;
        let mut terms = String::from("set,norm,bound\n");
        for t in &rep.terms {
            let set: Vec<String> = t.set.iter().map(|j| j.to_string()).collect();
            terms.push_str(&format!("{},{:.12e},{:.12e}\n", set.join(" "), t.norm, t.bound));
        }
        out.csv(&format!("terms_{i}.csv"), &extra, &terms)?;
        let pts = |sel: fn(&gauss_weyl::quantizer::LadderStep) -> f64| rep.steps.iter().map(|s| (s.n as f64, sel(s))).collect::<Vec<_>>();
        let plot = LinePlot {
            title: format!("{}: ladder {ord:?}", f.name),
            x_label: "step n".into(),
            y_label: "log10 norm".into(),
            log_y: true,
            series: vec![
                Series { name: "diff norm".into(), color: "#1f77b4", dashed: false, points: pts(|s| s.diff_norm) },
                Series { name: "bound".into(), color: "#d62728", dashed: true, points: pts(|s| s.diff_bound) },
            ],
        };
        out.svg(&format!("ladder_{i}.svg"), &plot)?;
        println!(
            "converge: ladder {ord:?} final_norm={:.6e} cv_bound={:.6e} within_bounds={}",
            rep.final_norm,
            rep.cv_bound,
            rep.within_bounds()
        );
        reports.push((ord.clone(), rep));
    }
    let (_, first) = &reports[0];
    let norm_spread = reports.iter().map(|(_, r)| (r.final_norm - first.final_norm).abs()).fold(0.0, f64::max);
    let matrix_spread = reports.iter().map(|(_, r)| r.final_matrix.max_abs_diff(&first.final_matrix)).fold(0.0, f64::max);
    let bar = reports.iter().filter_map(|(_, r)| r.error_bar).fold(0.0, f64::max);
    let tolerance = (2.0 * LADDER_QUAD_TOL).max(bar);
    let agree = norm_spread <= tolerance * first.final_norm.max(1.0);
    let ok = agree && reports.iter().all(|(_, r)| r.within_bounds());
    let ladders: Vec<Value> = reports
        .iter()
        .map(|(ord, r)| {
            let tail_monotone = r.steps.windows(2).all(|w| w[1].tail <= w[0].tail);
            json!({
                "order": ord,
                "final_norm": r.final_norm,
                "cv_bound": r.cv_bound,
                "error_bar": r.error_bar,
                "within_bounds": r.within_bounds(),
                "tail_monotone": tail_monotone,
                "steps": r.steps.iter().map(|s| json!({"n": s.n, "diff_norm": s.diff_norm, "diff_bound": s.diff_bound, "tail": s.tail})).collect::<Vec<_>>(),
            })
        })
        .collect();
    out.json(
        "summary.json",
        json!({
            "symbol": f.name,
            "dim": d,
            "h": basis.h,
            "degree": basis.max_degree,
            "ladders": ladders,
            "final_norm_spread": norm_spread,
            "final_matrix_spread": matrix_spread,
            "agreement_tolerance": tolerance,
            "ladders_agree": agree,
            "passed": ok,
        }),
    )?;
    if reports.len() > 1 {
        println!("converge: final norm spread {norm_spread:.3e} (tolerance {tolerance:.1e})");
    }
    Ok(if ok { 0 } else { 3 })
}

pub fn wick(cfg: &RunConfig, out: &mut OutDir) -> Result<i32> {
    let f = symbol(cfg)?;
    let basis = basis_for(cfg, f.dim)?;
    let order = cfg.order.unwrap_or_else(|| site_order(f.dim, basis.max_degree));
    let a = weyl_matrix_with_order(&f, &basis, order)?;
    let h = basis.h;
    let pts = points(cfg, f.dim, h.sqrt())?;
    let mut body = format!("{},wick_re,wick_im,heat_re,heat_im,abs_diff,captured_norm_sq,low_confidence\n", point_header(f.dim));
    let mut worst = 0.0f64;
    for z in &pts {
        let w = wick_symbol(&a, z)?;
        let r = heat_full(&f, h / 2.0, z)?;
        let diff = (w.value - r).norm();
        if !w.low_confidence {
            worst = worst.max(diff);
        }
        body.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e},{:.12e},{}\n",
            flat_cols(z),
            w.value.re,
            w.value.im,
            r.re,
            r.im,
            diff,
            w.captured_norm_sq,
            w.low_confidence
        ));
    }
    out.csv("wick.csv", &[format!("symbol={} h={h} degree={} order={order}", f.name, basis.max_degree)], &body)?;
    out.json("summary.json", json!({"symbol": f.name, "points": pts.len(), "max_abs_diff": worst, "reference": "heat semigroup at t = h/2"}))?;
    println!("wick: {} points, max |wick − heat| = {worst:.3e} over well-resolved points", pts.len());
    Ok(0)
}

fn state(spec: &StateSpec, basis: &HermiteBasis) -> Result<FunctionRep> {
    match spec {
        StateSpec::Coherent(p) => {
            if p.len() != 2 * basis.dim {
                return input(format!("coherent state point must have {} coordinates", 2 * basis.dim));
            }
            Ok(coherent_state(&PhasePoint::from_flat(p), basis.h, basis)?.rep)
        }
        StateSpec::Coeffs(c) => FunctionRep::new(basis.clone(), c.iter().map(|v| C64::new(v[0], v[1])).collect()),
        StateSpec::Basis(i) => {
            if *i >= basis.len() {
                return input(format!("basis index {i} out of range (size {})", basis.len()));
            }
            Ok(FunctionRep::basis_element(basis, *i))
        }
    }
}

pub fn wigner(cfg: &RunConfig, out: &mut OutDir) -> Result<i32> {
    let d = cfg.dim_hint();
    let basis = basis_for(cfg, d)?;
    let f = state(cfg.f.as_ref().unwrap_or(&StateSpec::Basis(0)), &basis)?;
    let g = state(cfg.g.as_ref().unwrap_or(&StateSpec::Basis(0)), &basis)?;
    let quadrature = cfg.quadrature.unwrap_or(false);
    let grid = WignerGrid::evaluate(&f, &g, points(cfg, d, 2.0 * basis.h.sqrt())?, quadrature)?;
    let extra = vec![format!("h={} degree={} method={}", basis.h, basis.max_degree, grid.provenance)];
    out.csv("wigner.csv", &extra, &grid.to_csv())?;
    println!("wigner: {} points ({})", grid.points.len(), grid.provenance);
    Ok(0)
}

pub fn heat(cfg: &RunConfig, out: &mut OutDir) -> Result<i32> {
    let f = symbol(cfg)?;
    let h = cfg.h();
    let t = cfg.t.unwrap_or(h / 2.0);
    let split = cfg.selected.clone().map(|s| CoordinateSplit::new(f.dim, s)).transpose()?;
    let k = split.as_ref().map_or(2 * f.dim, |s| 2 * s.selected.len());
    let order = cfg.order.unwrap_or_else(|| heat_order(k));
    let pts = points(cfg, f.dim, h.sqrt())?;
    let mut body = format!("{},closed_re,closed_im,quad_re,quad_im,abs_diff\n", point_header(f.dim));
    let mut worst = 0.0f64;
    for z in &pts {
        let (c, q) = match &split {
            None => (heat_full(&f, t, z)?, heat_full_quadrature(&f, t, z, order)?),
            Some(s) => (heat_partial(&f, s, true, t, z)?, heat_partial_quadrature(&f, s, true, t, z, Some(order))?),
        };
        let diff = (c - q).norm();
        worst = worst.max(diff);
        body.push_str(&format!("{},{:.12e},{:.12e},{:.12e},{:.12e},{diff:.3e}\n", flat_cols(z), c.re, c.im, q.re, q.im));
    }
    let sel = split.as_ref().map(|s| format!("{:?}", s.selected)).unwrap_or_else(|| "all".into());
    out.csv("heat.csv", &[format!("symbol={} t={t} selected={sel} order={order} closed_form={}", f.name, f.heat_exact)], &body)?;
    out.json("summary.json", json!({"symbol": f.name, "t": t, "selected": sel, "order": order, "closed_form": f.heat_exact, "max_abs_diff": worst}))?;
    println!("heat: {} points, max |closed − quadrature| = {worst:.3e}", pts.len());
    Ok(0)
}

pub fn mc(cfg: &RunConfig, out: &mut OutDir) -> Result<i32> {
    let h = cfg.h();
    let seed = cfg.seed();
    match cfg.mc.as_ref().ok_or_else(|| GwError::Input("config has no mc section".into()))? {
        McSpec::Brownian { k, samples } => {
            let paths = sample_brownian(*k, h, *samples, seed)?;
            out.raw("ensemble.csv", &ensemble_csv(&paths, &out.header_text()))?;
            let n = paths.len() as f64;
            let end: Vec<f64> = paths.iter().map(|p| p.endpoint()).collect();
            let mean = end.iter().sum::<f64>() / n;
            let var = end.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
            let z = (var - h) / (h * (2.0 / n).sqrt());
            out.json("summary.json", json!({"k": k, "samples": samples, "endpoint_mean": mean, "endpoint_var": var, "expected_var": h, "var_z": z}))?;
            println!("mc: {samples} Brownian paths, endpoint variance {var:.6} (expected {h}, z = {z:.2})");
        }
        McSpec::Lattice { b, gamma, sites, eps, ladder, samples } => {
            let weights = match (b, gamma, sites) {
                (Some(b), None, None) => b.clone(),
                // Sites ordered 0, 1, −1, 2, −2, … so ladder prefixes stay symmetric.
                (None, Some(g), Some(s)) => (0..*s).map(|i| (1.0 + i.div_ceil(2) as f64).powf(*g)).collect(),
                _ => return input("mc lattice: give either b, or gamma with sites"),
            };
            let est = lattice_norm_probability(&weights, *eps, h, ladder, *samples, seed)?;
            let mut body = String::from("sites,mc,stderr,exact,z\n");
            for e in &est {
                let z = if e.stderr > 0.0 { (e.mc - e.exact) / e.stderr } else { 0.0 };
                body.push_str(&format!("{},{:.12e},{:.12e},{:.12e},{z:.3}\n", e.sites, e.mc, e.stderr, e.exact));
            }
            let limit = gamma.map(|g| power_weights_limit(g, *eps, h, 1)).transpose()?;
            out.csv("lattice.csv", &[format!("eps={eps} h={h} samples={samples}")], &body)?;
            out.json(
                "summary.json",
                json!({
                    "eps": eps,
                    "samples": samples,
                    "estimates": est.iter().map(|e| json!({"sites": e.sites, "mc": e.mc, "stderr": e.stderr, "exact": e.exact})).collect::<Vec<_>>(),
                    "limit": limit,
                }),
            )?;
            for e in &est {
                println!("mc: sites={} mc={:.6} ± {:.1e} exact={:.6}", e.sites, e.mc, e.stderr, e.exact);
            }
        }
    }
    Ok(0)
}

fn outcome_json(o: &CheckOutcome) -> Value {
    json!({
        "id": o.id,
        "criterion": o.criterion,
        "measured": if o.measured.is_finite() { json!(o.measured) } else { Value::Null },
        "tolerance": o.tolerance,
        "passed": o.passed,
        "seconds": o.seconds,
        "detail": o.detail,
    })
}

pub fn verify(cfg: &RunConfig, mutation: Option<Mutation>, out: &mut OutDir) -> Result<i32> {
    let scale = match cfg.scale.unwrap_or(ScaleName::Full) {
        ScaleName::Quick => Scale::Quick,
        ScaleName::Full => Scale::Full,
    };
    let filter = cfg.filter.as_deref();
    if let (Some(fl), None | Some(Mutation::SignFlip)) = (filter, mutation) {
        if !checks::registry().iter().any(|c| c.matches(fl)) {
            return input(format!("--filter {fl} matches no check"));
        }
    }
    let start = std::time::Instant::now();
    let outcomes = match mutation {
        None => checks::run_checks(filter, scale),
        Some(m) => checks::run_mutated(m, filter, scale),
    };
    if outcomes.is_empty() {
        return input("no checks selected");
    }
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let wall = start.elapsed().as_secs_f64();
    out.json(
        "report.json",
        json!({
            "scale": format!("{scale:?}").to_lowercase(),
            "filter": filter,
            "mutation": mutation.map(|m| format!("{m:?}")),
            "checks": outcomes.iter().map(outcome_json).collect::<Vec<_>>(),
            "passed": outcomes.len() - failed,
            "failed": failed,
            "wall_seconds": wall,
        }),
    )?;
    println!("verify: {} passed, {failed} failed ({wall:.1}s)", outcomes.len() - failed);
    Ok(if failed == 0 { 0 } else { 3 })
}
