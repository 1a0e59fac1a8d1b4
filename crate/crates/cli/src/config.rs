//! Job configuration: one JSON document naming a family, optional runtime
//! anchors and bindings, and one block per task.
//!
//! Any string value starting with `=` is an expression over the bindings
//! (`pi`, `let` names, and `<anchor>_<param>` coordinates); `"@name"` expands
//! to the full coordinate array of an anchor.

use std::f64::consts::PI;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use spectral_holonomy::cartography::{refine_zeros, scan_plane, PlaneSpec};
use spectral_holonomy::family::{builtin, parse_expression, parse_family, FamilyDocument, OperatorFamily, Scope};
use spectral_holonomy::holonomy::{PathSpec, Permutation, Plane, PointSpec, TrackingOptions};
use spectral_holonomy::waveguide::SimulationSettings;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    Builtin(String),
    Inline(FamilyDocument),
}

impl FamilySpec {
    pub fn build(&self) -> Result<OperatorFamily, CliError> {
        Ok(match self {
            FamilySpec::Builtin(id) => builtin(id)?,
            FamilySpec::Inline(doc) => {
                let text = serde_json::to_string(doc).map_err(|e| CliError::config(e.to_string()))?;
                parse_family(&text)?
            }
        })
    }
}

fn default_threshold() -> f64 {
    1e-2
}

fn default_samples() -> usize {
    64
}

fn default_probe_samples() -> usize {
    128
}

/// Which refined candidate of an anchor scan to keep, by distance in the
/// scan plane's free coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Pick {
    Nearest([f64; 2]),
    Farthest([f64; 2]),
}

/// A point located at run time by scanning and refining.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub scan: PlaneSpec,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub pick: Pick,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanTask {
    pub plane: PlaneSpec,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedLoop {
    pub name: String,
    pub path: PathSpec,
    /// Expected permutation in cycle notation.
    #[serde(default)]
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceTask {
    pub loops: Vec<NamedLoop>,
}

/// A loop checked against the product of earlier loops. `word` lists loop
/// names in traversal order, `name^-1` for a reversed traversal; without an
/// explicit `path` the loop is the concatenation of the word.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeLoop {
    pub name: String,
    #[serde(default)]
    pub path: Option<PathSpec>,
    #[serde(default)]
    pub word: Option<Vec<String>>,
    #[serde(default)]
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupCheck {
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub abelian: Option<bool>,
}

/// Random smooth deformations of every loop, driven by `--seed`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyCheck {
    pub count: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTask {
    pub generators: Vec<NamedLoop>,
    #[serde(default)]
    pub composites: Vec<CompositeLoop>,
    #[serde(default)]
    pub group: Option<GroupCheck>,
    #[serde(default)]
    pub homotopy: Option<HomotopyCheck>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub name: String,
    pub plane: Plane,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_probe_samples")]
    pub samples: usize,
    /// Expected cycle type, longest cycle first, fixed points included.
    #[serde(default)]
    pub expect: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyTask {
    pub candidate: PointSpec,
    #[serde(default)]
    pub others: Vec<PointSpec>,
    pub probes: Vec<Probe>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateTask {
    /// Propagate every eigenmode at `point` and fit its eigenvalue.
    Eigenmodes {
        point: PointSpec,
        #[serde(default)]
        settings: SimulationSettings,
        /// Largest accepted error relative to `max(|λ|, 1)`.
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Propagate a given initial field.
    Propagate {
        point: PointSpec,
        /// `[re, im]` per channel.
        initial: Vec<[f64; 2]>,
        x_max: f64,
        dx: f64,
    },
    /// Loci measured by propagation along a loop.
    MergingPath {
        path: PathSpec,
        #[serde(default)]
        settings: SimulationSettings,
        #[serde(default)]
        expect: Option<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub tracking: TrackingOptions,
    /// Samples per loop piece before refinement.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub scan: Option<ScanTask>,
    #[serde(default)]
    pub trace: Option<TraceTask>,
    #[serde(default)]
    pub verify: Option<VerifyTask>,
    #[serde(default)]
    pub classify: Option<ClassifyTask>,
    #[serde(default)]
    pub simulate: Option<SimulateTask>,
}

/// A fully resolved configuration.
pub struct LoadedConfig {
    pub family: OperatorFamily,
    pub family_spec: FamilySpec,
    pub anchors: IndexMap<String, Vec<f64>>,
    pub bindings: IndexMap<String, f64>,
    pub job: Job,
}

impl LoadedConfig {
    pub fn task<'a, T>(&'a self, name: &str, pick: impl FnOnce(&'a Job) -> Option<&'a T>) -> Result<&'a T, CliError> {
        pick(&self.job).ok_or_else(|| CliError::config(format!("configuration has no `{name}` block")))
    }

    pub fn parse_permutation(&self, text: &str) -> Result<Permutation, CliError> {
        Permutation::parse_cycles(text, self.family.dim())
            .map_err(|e| CliError::config(format!("bad permutation `{text}`: {e}")))
    }
}

/// Named real values usable inside `=` expressions.
#[derive(Debug, Clone)]
pub struct Bindings {
    names: Vec<String>,
    values: Vec<f64>,
}

impl Default for Bindings {
    fn default() -> Self {
        Self {
            names: vec!["pi".into()],
            values: vec![PI],
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Bindings {
    pub fn bind(&mut self, name: &str, value: f64) -> Result<(), CliError> {
        if !is_identifier(name) {
            return Err(CliError::config(format!("`{name}` is not a valid binding name")));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(CliError::config(format!("`{name}` is bound twice")));
        }
        if !value.is_finite() {
            return Err(CliError::config(format!("`{name}` evaluates to {value}")));
        }
        self.names.push(name.to_string());
        self.values.push(value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn eval(&self, text: &str) -> Result<f64, CliError> {
        let expr = parse_expression(text, &Scope::new(&self.names))
            .map_err(|e| CliError::config(format!("in `={text}`: {e}")))?;
        let z = expr.eval(&self.values);
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(CliError::config(format!("`={text}` is not finite")));
        }
        if z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
            return Err(CliError::config(format!("`={text}` is complex ({z})")));
        }
        Ok(z.re)
    }
}

fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

/// Replaces `=expr` and `@anchor` strings in place.
pub fn substitute(
    v: &mut Value,
    env: &Bindings,
    anchors: &IndexMap<String, Vec<f64>>,
    at: &str,
) -> Result<(), CliError> {
    match v {
        Value::String(s) => {
            if let Some(expr) = s.strip_prefix('=') {
                let x = env.eval(expr).map_err(|e| CliError::config(format!("{at}: {e}")))?;
                *v = number(x);
            } else if let Some(name) = s.strip_prefix('@') {
                let coords = anchors
                    .get(name)
                    .ok_or_else(|| CliError::config(format!("{at}: unknown anchor `{name}`")))?;
                *v = Value::Array(coords.iter().map(|&x| number(x)).collect());
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter_mut().enumerate() {
                substitute(item, env, anchors, &format!("{at}[{i}]"))?;
            }
        }
        Value::Object(map) => {
            for (k, item) in map.iter_mut() {
                substitute(item, env, anchors, &format!("{at}.{k}"))?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn typed<T: DeserializeOwned>(v: Value, at: &str) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::config(format!("{at}: {e}")))
}

/// Scans the anchor's plane and returns the chosen refined candidate.
pub fn resolve_anchor(f: &OperatorFamily, spec: &AnchorSpec) -> Result<Vec<f64>, CliError> {
    let field = scan_plane(f, &spec.scan)?;
    let plane = field.plane().clone();
    let (target, farthest) = match spec.pick {
        Pick::Nearest(t) => (t, false),
        Pick::Farthest(t) => (t, true),
    };
    let dist = |c: &spectral_holonomy::cartography::EPCandidate| {
        let p = plane.project(&c.location);
        (p[0] - target[0]).hypot(p[1] - target[1])
    };
    let refined: Vec<_> = refine_zeros(f, &field, spec.threshold).into_iter().filter(|c| c.refined).collect();
    let chosen = if farthest {
        refined.iter().max_by(|a, b| dist(a).total_cmp(&dist(b)))
    } else {
        refined.iter().min_by(|a, b| dist(a).total_cmp(&dist(b)))
    };
    chosen
        .map(|c| c.location.coords().to_vec())
        .ok_or_else(|| CliError::Numerical("anchor scan found no refined discriminant zero".into()))
}

pub fn load(text: &str) -> Result<LoadedConfig, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid JSON: {e}")))?;
    let Value::Object(mut map) = root else {
        return Err(CliError::config("configuration must be a JSON object"));
    };
    let family_spec: FamilySpec = typed(
        map.shift_remove("family").ok_or_else(|| CliError::config("missing `family`"))?,
        "family",
    )?;
    let family = family_spec.build()?;

    let mut env = Bindings::default();
    let mut anchors = IndexMap::new();
    if let Some(raw) = map.shift_remove("anchors") {
        let Value::Object(raw) = raw else {
            return Err(CliError::config("`anchors` must be an object"));
        };
        for (name, mut spec) in raw {
            let at = format!("anchors.{name}");
            substitute(&mut spec, &env, &anchors, &at)?;
            let spec: AnchorSpec = typed(spec, &at)?;
            let coords = resolve_anchor(&family, &spec)?;
            for (p, x) in family.params().iter().zip(&coords) {
                env.bind(&format!("{name}_{p}"), *x)?;
            }
            anchors.insert(name, coords);
        }
    }
    let mut bindings = IndexMap::new();
    if let Some(raw) = map.shift_remove("let") {
        let Value::Object(raw) = raw else {
            return Err(CliError::config("`let` must be an object"));
        };
        for (name, mut v) in raw {
            let at = format!("let.{name}");
            substitute(&mut v, &env, &anchors, &at)?;
            let x = v
                .as_f64()
                .ok_or_else(|| CliError::config(format!("{at}: expected a number or `=expression`")))?;
            env.bind(&name, x)?;
            bindings.insert(name, x);
        }
    }
    let mut rest = Value::Object(map);
    substitute(&mut rest, &env, &anchors, "config")?;
    let job: Job = typed(rest, "config")?;
    if job.samples < 2 {
        return Err(CliError::config("`samples` must be at least 2"));
    }
    Ok(LoadedConfig {
        family,
        family_spec,
        anchors,
        bindings,
        job,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_see_pi_and_earlier_bindings() {
        let cfg = load(r#"{"family": "waveguide_T", "let": {"a": 2, "b": "=a*pi/2", "c": "=sqrt(b^2)"}}"#).unwrap();
        assert_eq!(cfg.bindings["a"], 2.0);
        assert!((cfg.bindings["b"] - PI).abs() < 1e-15);
        assert!((cfg.bindings["c"] - PI).abs() < 1e-15);
    }

    #[test]
    fn later_bindings_are_invisible() {
        let err = load(r#"{"family": "waveguide_T", "let": {"a": "=b", "b": 1}}"#).err().unwrap();
        assert!(matches!(err, CliError::Config(m) if m.contains("let.a")));
    }

    #[test]
    fn complex_results_are_rejected() {
        assert!(load(r#"{"family": "waveguide_T", "let": {"a": "=sqrt(0-1)"}}"#).is_err());
    }

    #[test]
    fn unknown_blocks_are_rejected() {
        let err = load(r#"{"family": "waveguide_T", "tracee": {}}"#).err().unwrap();
        assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn anchors_resolve_by_scan() {
        let cfg = load(
            r#"{"family": "waveguide_T",
                "anchors": {"ep": {"scan": {"free_axes": ["re_z", "im_z"], "fixed": {"c": 1.0},
                                            "window": [[-0.2, 0.2], [-0.2, 0.2]], "resolution": [21, 21]},
                                   "pick": {"nearest": [0.0, 0.0]}}},
                "let": {"h": "=ep_im_z + 1"},
                "trace": {"loops": [{"name": "x", "path": {"type": "polyline", "points": ["@ep", "@ep"]}}]}}"#,
        )
        .unwrap();
        assert!(cfg.anchors["ep"].iter().zip([0.0, 0.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-6));
        assert!((cfg.bindings["h"] - 1.0).abs() < 1e-6);
        let lp = &cfg.job.trace.as_ref().unwrap().loops[0];
        assert!(matches!(&lp.path, PathSpec::Polyline { points } if points.len() == 2));
    }

    #[test]
    fn inline_families_parse() {
        let cfg = load(r#"{"family": {"n": 2, "params": ["u"], "entries": [["u", "1"], ["1", "0-u"]]}}"#).unwrap();
        assert_eq!(cfg.family.dim(), 2);
        assert_eq!(cfg.parse_permutation("(12)").unwrap().to_string(), "(12)");
    }
}
