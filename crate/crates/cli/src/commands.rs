use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use rayon::prelude::*;
use sonar_radon::factorizations::{apply_chain, compare, REL_FLOOR};
use sonar_radon::transforms::{parabolic_field, sonar_profile, transversal_field};
use sonar_radon::*;

use crate::config::{config_error, Counts, List, Resolver};
use crate::output::{write_csv, Manifest, Row};
use crate::{Command, ConstantsArgs, ForwardArgs, GridArgs, InvertArgs, NormScanArgs, PhantomArgs, VerifyArgs};

/// Exit status for numerical failures.
const NUMERICAL: u8 = 3;

pub fn run(command: Command, config: Option<&Path>, out: &Path) -> anyhow::Result<ExitCode> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    match command {
        Command::Forward(a) => forward(a, Resolver::new("forward", config)?, out),
        Command::Invert(a) => invert_cmd(a, Resolver::new("invert", config)?, out),
        Command::Verify(a) => verify(a, Resolver::new("verify", config)?, out),
        Command::NormScan(a) => norm_scan(a, Resolver::new("norm-scan", config)?, out),
        Command::Constants(a) => constants(a, Resolver::new("constants", config)?, out),
    }
}

/// Parameter problems reported by the library become configuration errors.
fn lib(e: Error) -> anyhow::Error {
    match e {
        Error::InvalidParameter { .. } | Error::Dimension(_) => config_error(e.to_string()),
        other => other.into(),
    }
}

struct Phantom {
    n: usize,
    kind: PhantomKind,
    center: Vec<f64>,
    scale: f64,
    field: Field64,
    spec: Spec64,
}

fn phantom(res: &mut Resolver, a: &PhantomArgs, domain: Domain, default_kind: &str) -> anyhow::Result<Phantom> {
    let n = res.get("n", a.n, || 2)?;
    if !(2..=6).contains(&n) {
        return Err(config_error(format!("invalid value for `n`: need 2 <= n <= 6, got {n}")));
    }
    let kind: PhantomKind = res.get_parsed("phantom", a.phantom.clone(), default_kind)?;
    let lifted = domain == Domain::HalfSpace || kind == PhantomKind::Bump;
    let center = res
        .get("center", a.center.clone(), || {
            let mut c = vec![0.0; n];
            if lifted {
                c[n - 1] = 1.0;
            }
            List(c)
        })?
        .0;
    if center.len() != n {
        return Err(config_error(format!("invalid value for `center`: {} components for n = {n}", center.len())));
    }
    let scale = res.get("scale", a.scale, || if kind == PhantomKind::Bump { 0.4 } else { 1.0 })?;
    let base = Spec64::default_for_dim(n);
    let m = res.get("m", a.m, || base.m)?;
    let r_max = res.get("r_max", a.r_max, || base.r_max)?;
    let spec = base.with_nodes(m).and_then(|s| s.with_r_max(r_max)).map_err(lib)?;
    let field = make_test_field(kind, &Point64::from_f64(&center).map_err(lib)?, scale, domain).map_err(lib)?;
    Ok(Phantom {
        n,
        kind,
        center,
        scale,
        field,
        spec,
    })
}

fn broadcast(key: &str, v: Vec<f64>, n: usize) -> anyhow::Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        k if k == n => Ok(v),
        k => Err(config_error(format!("invalid value for `{key}`: {k} values for {n} axes"))),
    }
}

/// Grid nodes in row-major order, first axis slowest.
fn grid(res: &mut Resolver, g: &GridArgs, lo: Vec<f64>, hi: Vec<f64>, nodes: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let n = lo.len();
    let lo = broadcast("lo", res.get("lo", g.lo.clone(), || List(lo))?.0, n)?;
    let hi = broadcast("hi", res.get("hi", g.hi.clone(), || List(hi))?.0, n)?;
    let counts = res.get("nodes", g.nodes.clone(), || Counts(vec![nodes]))?.0;
    let counts = match counts.len() {
        1 => vec![counts[0]; n],
        k if k == n => counts,
        k => return Err(config_error(format!("invalid value for `nodes`: {k} counts for {n} axes"))),
    };
    if counts.contains(&0) {
        return Err(config_error("invalid value for `nodes`: counts must be positive"));
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let k = counts[i];
            (0..k)
                .map(|j| if k == 1 { 0.5 * (lo[i] + hi[i]) } else { lo[i] + (hi[i] - lo[i]) * j as f64 / (k - 1) as f64 })
                .collect()
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn axis_names(n: usize, last: &str) -> Vec<String> {
    let mut names: Vec<String> = (1..n).map(|i| format!("x{i}")).collect();
    names.push(last.to_string());
    names
}

fn point(c: &[f64]) -> anyhow::Result<Point64> {
    Point64::from_f64(c).map_err(lib)
}

#[derive(Clone, Copy, PartialEq)]
enum Forward {
    T,
    P(ParabolicVariant),
    H,
    R,
}

fn forward(a: ForwardArgs, mut res: Resolver, out: &Path) -> anyhow::Result<ExitCode> {
    let name = res.get("transform", a.transform.clone(), || "T".to_string())?;
    let transform = match name.as_str() {
        "T" => Forward::T,
        "P" => Forward::P(ParabolicVariant::Full),
        "P_restricted" => Forward::P(ParabolicVariant::Restricted),
        "H" => Forward::H,
        "R" => Forward::R,
        other => {
            return Err(config_error(format!(
                "invalid value for `transform`: expected T, P, P_restricted, H or R, got `{other}`"
            )))
        }
    };
    let domain = if transform == Forward::H { Domain::HalfSpace } else { Domain::FullSpace };
    let ph = phantom(&mut res, &a.phantom, domain, if transform == Forward::H { "bump" } else { "gaussian" })?;
    let n = ph.n;
    if transform == Forward::R && n != 2 {
        return Err(config_error("invalid value for `n`: the R grid is (angle, t) and needs n = 2"));
    }
    let (lo, hi, names) = match transform {
        Forward::H => {
            let mut lo = vec![-1.0; n];
            let mut hi = vec![1.0; n];
            lo[n - 1] = 0.5;
            hi[n - 1] = 2.0;
            (lo, hi, axis_names(n, "r"))
        }
        Forward::R => (vec![0.0, -2.0], vec![PI, 2.0], vec!["angle".to_string(), "t".to_string()]),
        _ => (vec![-2.0; n], vec![2.0; n], axis_names(n, &format!("x{n}"))),
    };
    let points = grid(&mut res, &a.grid, lo, hi, 5)?;
    let f = &ph.field;
    let spec = &ph.spec;
    let s2 = ph.scale * ph.scale;
    let gaussian = ph.kind == PhantomKind::Gaussian;
    let c = &ph.center;
    let rows: Vec<(Row, Vec<f64>)> = points
        .par_iter()
        .map(|x| {
            let (value, reference) = match transform {
                Forward::T => {
                    let v = transversal_t(f, &point(x)?, spec)?;
                    // ∫ exp(-(|u|² + (x'·u + β)²)/s²) du over R^{n-1}
                    let reference = gaussian.then(|| {
                        let xp = &x[..n - 1];
                        let a2: f64 = xp.iter().map(|v| v * v).sum();
                        let beta: f64 = xp.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() + x[n - 1] - c[n - 1];
                        (PI * s2).powf((n - 1) as f64 / 2.0) / (1.0 + a2).sqrt() * (-beta * beta / (s2 * (1.0 + a2))).exp()
                    });
                    (v, reference)
                }
                Forward::P(variant) => (parabolic_p(f, &point(x)?, spec, variant)?, None),
                Forward::H => (sonar_h(f, &x[..n - 1], x[n - 1], spec)?, None),
                Forward::R => {
                    let theta = [x[0].cos(), x[0].sin()];
                    let v = classical_r(f, &Plane64::new(&theta, x[1])?, spec)?;
                    let reference = gaussian.then(|| {
                        let d = x[1] - theta[0] * c[0] - theta[1] * c[1];
                        (PI * s2).sqrt() * (-d * d / s2).exp()
                    });
                    (v, reference)
                }
            };
            Ok((Row::new(x.clone(), value, reference), Vec::new()))
        })
        .collect::<anyhow::Result<_>>()?;
    write_csv(out, &names, &[], &rows)?;
    let mut manifest = Manifest::new("forward", &res.resolved);
    manifest.note(format!("{} grid points", rows.len()));
    manifest.write(out)?;
    println!("forward {name}: {} points written to {}", rows.len(), out.join(crate::output::RESULT).display());
    Ok(ExitCode::SUCCESS)
}

fn invert_cmd(a: InvertArgs, mut res: Resolver, out: &Path) -> anyhow::Result<ExitCode> {
    let kind: InversionKind = res.get_parsed("kind", a.kind.clone(), "H")?;
    let domain = if kind == InversionKind::H { Domain::HalfSpace } else { Domain::FullSpace };
    let ph = phantom(&mut res, &a.phantom, domain, "bump")?;
    let n = ph.n;
    let method: InversionMethod = res.get_parsed(
        "method",
        a.method.clone(),
        if n == 2 { "hypersingular" } else { "laplacian_power" },
    )?;
    let mut cfg = Config64::default_for_dim(n);
    cfg.ell = res.get("ell", a.ell, || cfg.ell)?;
    cfg.eps_schedule = res.get("eps_schedule", a.eps_schedule.clone(), || List(cfg.eps_schedule.clone()))?.0;
    cfg.stencil_h = res.get("stencil_h", a.stencil_h, || cfg.stencil_h)?;
    cfg.exponent = res.get("exponent", a.exponent, || cfg.exponent)?;
    cfg.r_out = res.get("r_out", a.r_out, || cfg.r_out)?;
    let g_nodes = res.get("g_nodes", a.g_nodes, || cfg.g_spec.m)?;
    cfg.g_spec = cfg.g_spec.with_nodes(g_nodes).map_err(lib)?;
    cfg.angular_nodes = res.get("angular_nodes", a.angular_nodes, || cfg.angular_nodes)?;
    cfg.radial_nodes = res.get("radial_nodes", a.radial_nodes, || cfg.radial_nodes)?;
    cfg.validate(n).map_err(lib)?;
    let spacing = res.get("spacing", a.spacing, || 0.375 * ph.scale)?;
    let lo: Vec<f64> = ph.center.iter().map(|c| c - spacing).collect();
    let hi: Vec<f64> = ph.center.iter().map(|c| c + spacing).collect();
    let points = grid(&mut res, &a.grid, lo, hi, 3)?;

    let data: Field<f64> = match kind {
        InversionKind::T => transversal_field(&ph.field, &ph.spec).map_err(lib)?.into(),
        InversionKind::P => parabolic_field(&ph.field, &ph.spec, ParabolicVariant::Full).map_err(lib)?.into(),
        InversionKind::H => sonar_profile(&ph.field, &ph.spec).map_err(lib)?.into(),
    };
    let results: Vec<Result<f64>> = points
        .par_iter()
        .map(|x| invert(kind, &data, &Point64::from_f64(x)?, method, &cfg))
        .collect();
    let truth: Vec<f64> = points
        .iter()
        .map(|x| ph.field.eval(&point(x)?).map_err(lib))
        .collect::<anyhow::Result<_>>()?;

    let mut manifest = Manifest::new("invert", &res.resolved);
    let mut failed = false;
    let mut rows = Vec::with_capacity(points.len());
    for ((x, r), &t) in points.iter().zip(results).zip(&truth) {
        let value = match r {
            Ok(v) => Some(v),
            Err(Error::Extrapolation { table }) => {
                failed = true;
                manifest.note(format!("non-convergence at {x:?}; (eps, value) table:"));
                for (eps, v) in table {
                    manifest.note(format!("  {eps:e}, {v:.16e}"));
                }
                None
            }
            Err(Error::NonConvergence(msg)) => {
                failed = true;
                manifest.note(format!("non-convergence at {x:?}: {msg}"));
                None
            }
            Err(e) => return Err(lib(e)),
        };
        rows.push((
            Row {
                coords: x.clone(),
                value,
                reference: Some(t),
                scale: None,
            },
            Vec::new(),
        ));
    }
    write_csv(out, &axis_names(n, &format!("x{n}")), &[], &rows)?;
    let sup_truth = truth.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let sup_err = rows
        .iter()
        .filter_map(|(r, _)| r.errors().0)
        .fold(0.0f64, f64::max);
    let converged = rows.iter().filter(|(r, _)| r.value.is_some()).count();
    let mut summary = format!(
        "invert {kind:?} ({method:?}): sup rel error {:.3e} over {converged} points (sup |recon - truth| / sup |truth|)",
        sup_err / sup_truth
    );
    if converged < rows.len() {
        summary.push_str(&format!("; {} points did not converge", rows.len() - converged));
    }
    manifest.note(&summary);
    manifest.write(out)?;
    if failed {
        eprintln!("error: extrapolation failed at some points; diagnostics appended to manifest.txt");
        return Ok(ExitCode::from(NUMERICAL));
    }
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs, mut res: Resolver, out: &Path) -> anyhow::Result<ExitCode> {
    let identity: Identity = res.get_parsed("identity", a.identity.clone(), "parabolic-transversal")?;
    let domain = identity.input_domain();
    let ph = phantom(&mut res, &a.phantom, domain, if domain == Domain::HalfSpace { "bump" } else { "gaussian" })?;
    let n = ph.n;
    let tol = res.get("tol", a.tol, || 1e-6)?;
    let (lo, hi, names) = if domain == Domain::HalfSpace {
        let mut lo = vec![-1.0; n];
        let mut hi = vec![1.0; n];
        lo[n - 1] = 0.5;
        hi[n - 1] = 2.0;
        (lo, hi, axis_names(n, "r"))
    } else {
        (vec![-2.0; n], vec![2.0; n], axis_names(n, &format!("x{n}")))
    };
    let points = grid(&mut res, &a.grid, lo, hi, 5)?;
    let (lhs, rhs) = identity.chains().map_err(lib)?;
    let input: Field<f64> = ph.field.clone().into();
    let fl = apply_chain(&lhs, &input, &ph.spec).map_err(lib)?;
    let fr = apply_chain(&rhs, &input, &ph.spec).map_err(lib)?;
    let values: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let p = point(x)?;
            Ok((fl.eval(&p)?, fr.eval(&p)?))
        })
        .collect::<anyhow::Result<_>>()?;
    let (max_abs, max_rel, _) = compare(&values);
    let big = values.iter().fold(0.0f64, |m, &(l, r)| m.max(l.abs()).max(r.abs()));
    let rows: Vec<(Row, Vec<f64>)> = points
        .iter()
        .zip(&values)
        .map(|(x, &(l, r))| {
            let mut row = Row::new(x.clone(), l, Some(r));
            row.scale = Some(l.abs().max(r.abs()).max(REL_FLOOR * big));
            (row, Vec::new())
        })
        .collect();
    write_csv(out, &names, &[], &rows)?;
    let summary = format!(
        "identity {}: {} points, max_rel_err {max_rel:.3e}, max_abs_err {max_abs:.3e} (tol {tol:e})",
        identity.name(),
        rows.len()
    );
    let mut manifest = Manifest::new("verify", &res.resolved);
    manifest.note(&summary);
    manifest.write(out)?;
    println!("{summary}");
    if !(max_rel <= tol) {
        eprintln!("error: identity {} missed the tolerance", identity.name());
        return Ok(ExitCode::from(NUMERICAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn norm_scan(a: NormScanArgs, mut res: Resolver, out: &Path) -> anyhow::Result<ExitCode> {
    let transform: ScanTransform = res.get_parsed("transform", a.transform.clone(), "T")?;
    let domain = if transform == ScanTransform::Sonar { Domain::HalfSpace } else { Domain::FullSpace };
    let ph = phantom(&mut res, &a.phantom, domain, if domain == Domain::HalfSpace { "bump" } else { "gaussian" })?;
    let p = res.get("p", a.p, || 1.5)?;
    let (q_adm, s_adm, _) = admissible(p, ph.n);
    let q = res.get("q", a.q, || q_adm)?;
    let s = res.get("s", a.s, || s_adm)?;
    let triple = MixedNormTriple::new(p, q, s, ph.n).map_err(lib)?;
    let l1 = res
        .get("lambda1", a.lambda1.clone(), || List((-3..=3).map(|k| 2f64.powi(k)).collect()))?
        .0;
    let l2 = res.get("lambda2", a.lambda2.clone(), || List(l1.clone()))?.0;
    if l1.len() != l2.len() {
        return Err(config_error(format!(
            "invalid value for `lambda2`: {} values but lambda1 has {}",
            l2.len(),
            l1.len()
        )));
    }
    let lambdas: Vec<(f64, f64)> = l1.into_iter().zip(l2).collect();
    let scan = scaling_scan(transform, &triple, &lambdas, &ph.field, &ph.spec).map_err(lib)?;
    let base = scan.iter().find(|r| r.lambda == (1.0, 1.0)).map(|r| r.ratio);
    let rows: Vec<(Row, Vec<f64>)> = scan
        .iter()
        .map(|r| {
            (
                Row::new(vec![r.lambda.0, r.lambda.1], r.ratio, base.map(|b| b * r.predicted_factor)),
                vec![r.numerator, r.denominator],
            )
        })
        .collect();
    write_csv(
        out,
        &["lambda1".to_string(), "lambda2".to_string()],
        &["numerator", "denominator"],
        &rows,
    )?;
    let summary = format!(
        "norm-scan {transform:?} (p, q, s) = ({p}, {q}, {s}), admissible: {}; ratio variation {:.6} over {} dilations",
        triple.is_admissible(),
        norms::ratio_variation(&scan),
        scan.len()
    );
    let mut manifest = Manifest::new("norm-scan", &res.resolved);
    manifest.note(&summary);
    manifest.write(out)?;
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn constants(a: ConstantsArgs, mut res: Resolver, out: &Path) -> anyhow::Result<ExitCode> {
    let n = res.get("n", a.n, || 2)?;
    if n < 2 {
        return Err(config_error(format!("invalid value for `n`: need n >= 2, got {n}")));
    }
    let ell = res.get("ell", a.ell, || Config64::default_for_dim(n).ell)?;
    let d = dnl_constant(n, ell).map_err(lib)?;
    let c = c_n(n);
    // both normalizations coincide when the kernels do
    let reference = (n == 2 && ell == 1).then_some(1.0);
    let row = Row::new(vec![n as f64, ell as f64], d * c, reference);
    write_csv(
        out,
        &["n".to_string(), "ell".to_string()],
        &["d_nl", "c_n"],
        &[(row, vec![d, c])],
    )?;
    let mut manifest = Manifest::new("constants", &res.resolved);
    manifest.note(format!("d_{{{n},{ell}}} = {d:.16e}, c_{n} = {c:.16e}"));
    manifest.write(out)?;
    println!("d_{{{n},{ell}}}({}) = {}", n - 1, significant(d, 6));
    println!("c_{n} = {}", significant(c, 6));
    println!("product = {}", significant(d * c, 6));
    Ok(ExitCode::SUCCESS)
}

fn significant(v: f64, digits: usize) -> String {
    // exponent after rounding, so 0.9999999 counts as 1
    let sci = format!("{v:.*e}", digits - 1);
    let magnitude: i64 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}
