use std::f64::consts::PI;

use indexmap::IndexMap;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use spectral_holonomy::cartography::{classify_ep, refine_zeros, scan_plane, EPCandidate, ProbeOptions};
use spectral_holonomy::family::{OperatorFamily, ParameterPoint};
use spectral_holonomy::holonomy::{
    compose, discretize, inverse, is_abelian, lambda_group, loop_permutation, trace, DiscretizedPath,
    Permutation, PointSpec, SpectralTrace, JOIN_TOL,
};
use spectral_holonomy::spectra::{eigenvalues, label};
use spectral_holonomy::waveguide::{
    extract_eigenvalue, merging_path_measurement, propagate, seed_and_propagate, FieldState,
};

use crate::config::{LoadedConfig, SimulateTask};
use crate::error::CliError;
use crate::output::{slug, OutputDir};
use crate::report::RunReport;

/// Mutable state of one run.
pub struct Context {
    pub out: OutputDir,
    pub report: RunReport,
    pub seed: u64,
    pub quiet: bool,
}

impl Context {
    pub fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn write_trace(&mut self, f: &OperatorFamily, name: &str, t: &SpectralTrace) -> Result<(), CliError> {
        self.out.write_with(name, |w| t.write_csv(f.params(), w))
    }
}

fn resolve_point(f: &OperatorFamily, p: &PointSpec) -> Result<ParameterPoint, CliError> {
    Ok(p.resolve(f.params())?)
}

fn permutation_of(t: &SpectralTrace) -> Permutation {
    loop_permutation(t).unwrap_or_else(|_| t.net_permutation())
}

/// Adds `Σ_m a_m sin(π m t) sin(π t)` to every coordinate; endpoints stay put.
pub fn deform(path: &DiscretizedPath, coeffs: &[Vec<f64>]) -> DiscretizedPath {
    path.map_points(|t, p| {
        let mut q = p.clone();
        for (m, a) in coeffs.iter().enumerate() {
            let s = (PI * (m + 1) as f64 * t).sin() * (PI * t).sin();
            for (x, c) in q.coords_mut().iter_mut().zip(a) {
                *x += c * s;
            }
        }
        q
    })
}

#[derive(Serialize)]
struct CandidateRow<'a> {
    location: &'a [f64],
    refined: bool,
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    signature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe_radius: Option<f64>,
}

pub fn scan(cfg: &LoadedConfig, ctx: &mut Context) -> Result<(), CliError> {
    let task = cfg.task("scan", |j| j.scan.as_ref())?;
    let f = &cfg.family;
    let field = ctx.report.timed("scan", |_| scan_plane(f, &task.plane))?;
    let cands = ctx.report.timed("refine", |_| refine_zeros(f, &field, task.threshold));
    ctx.out.write_with("field.csv", |w| field.write_csv(w))?;
    let rows: Vec<CandidateRow> = cands
        .iter()
        .map(|c| CandidateRow {
            location: c.location.coords(),
            refined: c.refined,
            residual: c.residual,
            signature: c.signature.as_ref().map(|p| p.to_string()),
            probe_radius: c.probe_radius,
        })
        .collect();
    ctx.out.write_json("candidates.json", &rows)?;
    let refined = cands.iter().filter(|c| c.refined).count();
    ctx.report.detail("candidates", cands.len());
    ctx.report.detail("refined", refined);
    ctx.say(format!("{} candidates, {refined} refined", cands.len()));
    Ok(())
}

pub fn trace_loops(cfg: &LoadedConfig, ctx: &mut Context) -> Result<(), CliError> {
    let task = cfg.task("trace", |j| j.trace.as_ref())?;
    let f = &cfg.family;
    let paths = task
        .loops
        .iter()
        .map(|l| Ok(discretize(&l.path, f.params(), cfg.job.samples)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    for (l, path) in task.loops.iter().zip(&paths) {
        let expect = l.expect.as_deref().map(|e| cfg.parse_permutation(e)).transpose()?;
        let t = ctx
            .report
            .timed("trace", |_| trace(f, path, &cfg.job.tracking))
            .map_err(|e| CliError::from(e).context(&l.name))?;
        ctx.write_trace(f, &format!("trace_{}.csv", slug(&l.name)), &t)?;
        let p = permutation_of(&t);
        if !path.is_loop() {
            ctx.report
                .warnings
                .push(format!("`{}` is open; reported value is the label map along it", l.name));
        }
        ctx.say(format!("{}: {p}", l.name));
        if let Some(e) = expect {
            ctx.report.check(&l.name, "expected", p == e, p.to_string(), Some(e.to_string()));
        }
        ctx.report.permutations.insert(l.name.clone(), p.to_string());
    }
    Ok(())
}

struct Measured {
    path: DiscretizedPath,
    perm: Permutation,
}

fn measure(cfg: &LoadedConfig, ctx: &mut Context, name: &str, path: DiscretizedPath) -> Result<Measured, CliError> {
    let t = ctx
        .report
        .timed("trace", |_| trace(&cfg.family, &path, &cfg.job.tracking))
        .map_err(|e| CliError::from(e).context(name))?;
    ctx.write_trace(&cfg.family, &format!("trace_{}.csv", slug(name)), &t)?;
    let perm = loop_permutation(&t).map_err(|e| CliError::from(e).context(name))?;
    ctx.report.permutations.insert(name.to_string(), perm.to_string());
    Ok(Measured { path, perm })
}

pub fn verify(cfg: &LoadedConfig, ctx: &mut Context) -> Result<(), CliError> {
    let task = cfg.task("verify", |j| j.verify.as_ref())?;
    let f = &cfg.family;
    if task.generators.is_empty() {
        return Err(CliError::config("`verify.generators` is empty"));
    }
    let mut loops: IndexMap<String, Measured> = IndexMap::new();
    let mut base: Option<ParameterPoint> = None;
    let mut check_base = |name: &str, path: &DiscretizedPath| -> Result<(), CliError> {
        let first = path.first();
        match &base {
            None => base = Some(first.clone()),
            Some(b) => {
                let scale = b.coords().iter().fold(1.0_f64, |m, x| m.max(x.abs()));
                if b.distance(first) > JOIN_TOL * scale {
                    return Err(CliError::config(format!(
                        "loop `{name}` starts {:.3e} away from the shared base point",
                        b.distance(first)
                    )));
                }
            }
        }
        Ok(())
    };

    let mut gen_paths = Vec::new();
    for g in &task.generators {
        let path = discretize(&g.path, f.params(), cfg.job.samples)?;
        check_base(&g.name, &path)?;
        gen_paths.push(path);
    }
    for (g, path) in task.generators.iter().zip(gen_paths) {
        let m = measure(cfg, ctx, &g.name, path)?;
        ctx.say(format!("{}: {}", g.name, m.perm));
        if let Some(e) = &g.expect {
            let e = cfg.parse_permutation(e)?;
            ctx.report
                .check(&g.name, "expected", m.perm == e, m.perm.to_string(), Some(e.to_string()));
        }
        if loops.insert(g.name.clone(), m).is_some() {
            return Err(CliError::config(format!("loop name `{}` used twice", g.name)));
        }
    }

    for c in &task.composites {
        let word = c
            .word
            .as_ref()
            .map(|w| {
                w.iter()
                    .map(|tok| {
                        let (name, inv) = match tok.strip_suffix("^-1") {
                            Some(n) => (n.trim(), true),
                            None => (tok.trim(), false),
                        };
                        loops
                            .get(name)
                            .map(|m| (m, inv))
                            .ok_or_else(|| CliError::config(format!("`{}`: unknown loop `{name}` in word", c.name)))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let path = match (&c.path, &word) {
            (Some(spec), _) => discretize(spec, f.params(), cfg.job.samples)?,
            (None, Some(w)) if !w.is_empty() => {
                let parts: Vec<DiscretizedPath> =
                    w.iter().map(|(m, inv)| if *inv { m.path.reversed() } else { m.path.clone() }).collect();
                let refs: Vec<&DiscretizedPath> = parts.iter().collect();
                DiscretizedPath::concat(&refs)?
            }
            _ => return Err(CliError::config(format!("composite `{}` needs a `path` or a non-empty `word`", c.name))),
        };
        check_base(&c.name, &path)?;
        let predicted = word
            .as_ref()
            .map(|w| {
                w.iter().try_fold(Permutation::identity(f.dim()), |acc, (m, inv)| {
                    let p = if *inv { inverse(&m.perm) } else { m.perm.clone() };
                    compose(&p, &acc)
                })
            })
            .transpose()
            .map_err(|e| CliError::config(e.to_string()))?;
        let m = measure(cfg, ctx, &c.name, path)?;
        let mut line = format!("{}: {}", c.name, m.perm);
        if let Some(p) = &predicted {
            ctx.report
                .check(&c.name, "homomorphism", m.perm == *p, m.perm.to_string(), Some(p.to_string()));
            line.push_str(&format!("  (predicted {p}{})", if m.perm == *p { "" } else { ", MISMATCH" }));
        }
        if let Some(e) = &c.expect {
            let e = cfg.parse_permutation(e)?;
            ctx.report
                .check(&c.name, "expected", m.perm == e, m.perm.to_string(), Some(e.to_string()));
            if m.perm != e {
                line.push_str(&format!("  (expected {e}, MISMATCH)"));
            }
        }
        ctx.say(line);
        if loops.insert(c.name.clone(), m).is_some() {
            return Err(CliError::config(format!("loop name `{}` used twice", c.name)));
        }
    }

    let gens: Vec<Permutation> = task.generators.iter().map(|g| loops[&g.name].perm.clone()).collect();
    let group = lambda_group(&gens).map_err(|e| CliError::config(e.to_string()))?;
    let ab = is_abelian(&group);
    ctx.report.detail("group_order", group.order());
    ctx.report.detail("abelian", ab.abelian);
    let mut line = format!("group order {}, {}", group.order(), if ab.abelian { "abelian" } else { "non-abelian" });
    if let Some((a, b)) = &ab.witness {
        let (ab_, ba) = (compose(a, b).unwrap(), compose(b, a).unwrap());
        ctx.report.detail("witness", [a.to_string(), b.to_string()]);
        line.push_str(&format!(": {a}∘{b} = {ab_} ≠ {b}∘{a} = {ba}"));
    }
    ctx.say(line);
    if let Some(g) = &task.group {
        if let Some(order) = g.order {
            ctx.report.check(
                "group",
                "group_order",
                group.order() == order,
                group.order().to_string(),
                Some(order.to_string()),
            );
        }
        if let Some(abelian) = g.abelian {
            ctx.report.check(
                "group",
                "abelian",
                ab.abelian == abelian,
                ab.abelian.to_string(),
                Some(abelian.to_string()),
            );
        }
    }

    if let Some(h) = &task.homotopy {
        if !(h.amplitude.is_finite() && h.amplitude >= 0.0) {
            return Err(CliError::config("`homotopy.amplitude` must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let dim = f.params().len();
        for (name, m) in &loops {
            let mut unchanged = 0;
            for _ in 0..h.count {
                let coeffs: Vec<Vec<f64>> = (0..3)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0) * h.amplitude / 3.0).collect())
                    .collect();
                let bent = deform(&m.path, &coeffs);
                let t = ctx
                    .report
                    .timed("homotopy", |_| trace(f, &bent, &cfg.job.tracking))
                    .map_err(|e| CliError::from(e).context(&format!("{name} (deformed)")))?;
                if loop_permutation(&t)? == m.perm {
                    unchanged += 1;
                }
            }
            ctx.report.check(
                name,
                "homotopy",
                unchanged == h.count,
                format!("{unchanged}/{} unchanged", h.count),
                Some(format!("{0}/{0} unchanged", h.count)),
            );
        }
        ctx.say(format!("{} deformations per loop checked", h.count));
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeRow {
    name: String,
    permutation: String,
    cycle_type: Vec<usize>,
    order: usize,
    radius: f64,
    center: Vec<f64>,
}

pub fn classify(cfg: &LoadedConfig, ctx: &mut Context) -> Result<(), CliError> {
    let task = cfg.task("classify", |j| j.classify.as_ref())?;
    let f = &cfg.family;
    let as_candidate = |p: &PointSpec| -> Result<EPCandidate, CliError> {
        Ok(EPCandidate {
            location: resolve_point(f, p)?,
            refined: true,
            residual: 0.0,
            signature: None,
            probe_radius: None,
        })
    };
    let candidate = as_candidate(&task.candidate)?;
    let others = task.others.iter().map(as_candidate).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for probe in &task.probes {
        let opts = ProbeOptions {
            plane: probe.plane.clone(),
            radius: probe.radius,
            samples: probe.samples,
        };
        let c = ctx
            .report
            .timed("classify", |_| classify_ep(f, &candidate, &others, &opts, &cfg.job.tracking))
            .map_err(|e| CliError::from(e).context(&probe.name))?;
        ctx.say(format!(
            "{}: {} cycle type {:?} (radius {:.6})",
            probe.name, c.permutation, c.cycle_type, c.radius
        ));
        if let Some(e) = &probe.expect {
            ctx.report.check(
                &probe.name,
                "cycle_type",
                c.cycle_type == *e,
                format!("{:?}", c.cycle_type),
                Some(format!("{e:?}")),
            );
        }
        ctx.report.permutations.insert(probe.name.clone(), c.permutation.to_string());
        rows.push(ProbeRow {
            name: probe.name.clone(),
            permutation: c.permutation.to_string(),
            order: c.order(),
            cycle_type: c.cycle_type,
            radius: c.radius,
            center: c.center.coords().to_vec(),
        });
    }
    ctx.out.write_json("classification.json", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct ModeRow {
    mode: usize,
    theory: [f64; 2],
    measured: [f64; 2],
    /// Error relative to `max(|λ|, 1)`.
    relative_error: f64,
    fit_residual: f64,
    component: usize,
    x_max: f64,
    dx: f64,
}

pub fn simulate(cfg: &LoadedConfig, ctx: &mut Context) -> Result<(), CliError> {
    let task = cfg.task("simulate", |j| j.simulate.as_ref())?;
    let f = &cfg.family;
    match task {
        SimulateTask::Eigenmodes {
            point,
            settings,
            tolerance,
        } => {
            let x = resolve_point(f, point)?;
            let h = f.evaluate(&x)?;
            let spectrum = eigenvalues(f, &x)?;
            let values = label(&spectrum)
                .map(|l| l.values().to_vec())
                .unwrap_or_else(|_| spectrum.values().to_vec());
            let mut rows = Vec::new();
            for k in 0..values.len() {
                let (rec, component) = ctx
                    .report
                    .timed("propagate", |_| seed_and_propagate(&h, &values, k, settings))?;
                let fit = extract_eigenvalue(&rec, component, settings.fit_tolerance)?;
                ctx.out
                    .write_with(&format!("propagation_mode_{}.csv", k + 1), |w| rec.write_csv(w))?;
                let rel = (fit.lambda - values[k]).norm() / values[k].norm().max(1.0);
                if let Some(tol) = tolerance {
                    ctx.report.check(
                        &format!("mode {}", k + 1),
                        "eigenvalue",
                        rel <= *tol,
                        format!("{rel:.3e}"),
                        Some(format!("<= {tol:.1e}")),
                    );
                }
                ctx.say(format!(
                    "mode {}: λ = {:.10} {:+.10}i (direct {:.10} {:+.10}i)",
                    k + 1,
                    fit.lambda.re,
                    fit.lambda.im,
                    values[k].re,
                    values[k].im
                ));
                rows.push(ModeRow {
                    mode: k + 1,
                    theory: [values[k].re, values[k].im],
                    measured: [fit.lambda.re, fit.lambda.im],
                    relative_error: rel,
                    fit_residual: fit.residual,
                    component,
                    x_max: *rec.xs().last().unwrap_or(&0.0),
                    dx: rec.xs().get(1).copied().unwrap_or(0.0),
                });
            }
            ctx.out.write_json("modes.json", &rows)?;
        }
        SimulateTask::Propagate {
            point,
            initial,
            x_max,
            dx,
        } => {
            let x = resolve_point(f, point)?;
            let h = f.evaluate(&x)?;
            let e0 = FieldState::new(initial.iter().map(|[re, im]| Complex64::new(*re, *im)).collect());
            let rec = ctx.report.timed("propagate", |_| propagate(&h, &e0, *x_max, *dx))?;
            ctx.out.write_with("propagation.csv", |w| rec.write_csv(w))?;
            let (e_start, e_end) = (e0.energy(), rec.last().energy());
            ctx.report.detail("energy", [e_start, e_end]);
            ctx.say(format!("propagated {} steps; energy {e_start:.6e} → {e_end:.6e}", rec.xs().len() - 1));
        }
        SimulateTask::MergingPath { path, settings, expect } => {
            let path = discretize(path, f.params(), cfg.job.samples)?;
            let measured = ctx
                .report
                .timed("merging_path", |_| merging_path_measurement(f, &path, settings, &cfg.job.tracking))?;
            ctx.write_trace(f, "loci.csv", &measured)?;
            let direct = ctx.report.timed("trace", |_| trace(f, &path, &cfg.job.tracking))?;
            let (pm, pd) = (permutation_of(&measured), permutation_of(&direct));
            ctx.report.permutations.insert("measured".into(), pm.to_string());
            ctx.report.permutations.insert("direct".into(), pd.to_string());
            ctx.report
                .check("merging_path", "direct_agreement", pm == pd, pm.to_string(), Some(pd.to_string()));
            if let Some(e) = expect {
                let e = cfg.parse_permutation(e)?;
                ctx.report
                    .check("merging_path", "expected", pm == e, pm.to_string(), Some(e.to_string()));
            }
            ctx.say(format!("merging path: {pm} (direct tracing {pd})"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deformation_keeps_endpoints() {
        let pts = vec![
            ParameterPoint::new(vec![0.0, 0.0]),
            ParameterPoint::new(vec![1.0, 0.0]),
            ParameterPoint::new(vec![0.0, 0.0]),
        ];
        let p = DiscretizedPath::from_points(pts);
        let bent = deform(&p, &[vec![0.1, 0.2], vec![0.0, 0.3]]);
        assert_eq!(bent.first(), p.first());
        assert_eq!(bent.last(), p.last());
        assert_ne!(bent.points()[1], p.points()[1]);
    }
}
