//! JSON run configuration.

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{build_domain, BaseMetric, DomainSpec};
use crate::scenario::{CaseTag, NormalForm, ScenarioOptions, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: CaseTag,
    pub domain: DomainConfig,
    #[serde(default)]
    pub normal_form: Option<NormalForm>,
    /// `S` or `K` as an expression in `x, y, r, θ`.
    pub interior: String,
    /// `H` or `σ`, before scaling by `c`.
    pub boundary: String,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub c_hi: Option<f64>,
    #[serde(default)]
    pub options: OptionsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// `disk`, `annulus`, `ball` or `radial_annulus`.
    pub kind: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub r_in: Option<f64>,
    pub r_out: f64,
    pub n_r: usize,
    #[serde(default)]
    pub n_theta: Option<usize>,
    /// Conformal factor of the base metric relative to the flat one.
    #[serde(default)]
    pub base: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub curvature_tol: f64,
    pub gamma_probes: usize,
    pub seed: u64,
    pub beta: f64,
    pub level: Option<f64>,
    pub subdomain: Option<(f64, f64)>,
}

impl Default for OptionsConfig {
    fn default() -> Self {
        let o = ScenarioOptions::default();
        OptionsConfig {
            tol: o.tol,
            max_iter: o.max_iter,
            curvature_tol: o.curvature_tol,
            gamma_probes: o.gamma_probes,
            seed: o.seed,
            beta: o.beta,
            level: o.level,
            subdomain: o.subdomain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trace: String,
    pub report: String,
    pub solution: String,
    pub sweep: String,
    pub record_runtime: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trace: "trace.csv".into(),
            report: "report.json".into(),
            solution: "solution.csv".into(),
            sweep: "sweep.csv".into(),
            record_runtime: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Number of grids; each halves the spacing of the previous one.
    pub levels: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { levels: 3 }
    }
}

const SECTIONS: [(&str, &[&str]); 6] = [
    (
        "top level",
        &["scenario", "domain", "normal_form", "interior", "boundary", "c", "c_hi", "options", "output", "sweep"],
    ),
    ("domain", &["kind", "n", "r_in", "r_out", "n_r", "n_theta", "base"]),
    ("normal_form", &["interior", "boundary"]),
    ("options", &["tol", "max_iter", "curvature_tol", "gamma_probes", "seed", "beta", "level", "subdomain"]),
    ("output", &["trace", "report", "solution", "sweep", "record_runtime"]),
    ("sweep", &["levels"]),
];

fn check_keys(v: &Value) -> Result<()> {
    let Value::Object(top) = v else {
        return Err(Error::ConfigParse { line: 1, column: 1, message: "expected a JSON object".into() });
    };
    for (section, allowed) in SECTIONS {
        let obj = if section == "top level" {
            top
        } else {
            match top.get(section) {
                Some(Value::Object(o)) => o,
                _ => continue,
            }
        };
        if let Some(key) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::UnknownKey { key: key.clone(), section: section.to_string() });
        }
    }
    Ok(())
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::ConfigParse { line: e.line(), column: e.column(), message: e.to_string() }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let v: Value = serde_json::from_str(text).map_err(parse_error)?;
    check_keys(&v)?;
    serde_json::from_str(text).map_err(parse_error)
}

impl RunConfig {
    pub fn domain_spec(&self) -> Result<DomainSpec> {
        let d = &self.domain;
        let need_theta = || d.n_theta.ok_or_else(|| Error::InvalidArgument("domain.n_theta is required".into()));
        let need_rin = || d.r_in.ok_or_else(|| Error::InvalidArgument("domain.r_in is required".into()));
        let n = d.n.unwrap_or(if matches!(d.kind.as_str(), "disk" | "annulus") { 2 } else { 3 });
        let spec = match d.kind.as_str() {
            "disk" => DomainSpec::disk(d.r_out, d.n_r, need_theta()?),
            "annulus" => DomainSpec::annulus(need_rin()?, d.r_out, d.n_r, need_theta()?),
            "ball" => DomainSpec::ball(n, d.r_out, d.n_r),
            "radial_annulus" => DomainSpec::radial_annulus(n, need_rin()?, d.r_out, d.n_r),
            other => return Err(Error::InvalidArgument(format!("unknown domain kind `{other}`"))),
        };
        if spec.kind.dim() != n {
            return Err(Error::InvalidArgument(format!("domain kind {} has dimension {}", d.kind, spec.kind.dim())));
        }
        match &d.base {
            None => Ok(spec),
            Some(src) => {
                let e = Expr::parse(src)?;
                let (g, _) = build_domain(&spec)?;
                Ok(spec.with_base(BaseMetric::ExplicitConformal(g.eval(|x, y, r, t| e.eval(x, y, r, t)))))
            }
        }
    }

    /// Same configuration on a grid with `2^level` times finer spacing.
    pub fn refined(&self, level: usize) -> RunConfig {
        let mut out = self.clone();
        let k = 1usize << level;
        out.domain.n_r = (self.domain.n_r - 1) * k + 1;
        out.domain.n_theta = self.domain.n_theta.map(|t| t * k);
        out
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let domain = self.domain_spec()?;
        let (g, _) = build_domain(&domain)?;
        let s = Expr::parse(&self.interior)?;
        let h = Expr::parse(&self.boundary)?;
        let o = &self.options;
        Ok(ScenarioSpec {
            interior: g.eval(|x, y, r, t| s.eval(x, y, r, t)),
            boundary: g.eval_boundary(|x, y, r, t| h.eval(x, y, r, t)),
            domain,
            case: self.scenario,
            normal_form: self.normal_form,
            options: ScenarioOptions {
                tol: o.tol,
                max_iter: o.max_iter,
                curvature_tol: o.curvature_tol,
                gamma_probes: o.gamma_probes,
                seed: o.seed,
                beta: o.beta,
                level: o.level,
                subdomain: o.subdomain,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainKind;

    const MINIMAL: &str = r#"{
  "scenario": "Neg_Sneg_Hneg",
  "domain": {"kind": "ball", "r_out": 10, "n_r": 41},
  "normal_form": {"interior": -1, "boundary": 1},
  "interior": "-1",
  "boundary": "-1"
}"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.scenario, CaseTag::NegSnegHneg);
        assert_eq!(c.options, OptionsConfig::default());
        assert_eq!(c.output.report, "report.json");
        let spec = c.scenario_spec().unwrap();
        assert_eq!(spec.domain.kind, DomainKind::RadialBall { n: 3 });
        assert!(spec.interior.iter().all(|&s| s == -1.0));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("\"n_r\"", "\"mesh_sise\": 3, \"n_r\"");
        match parse_config(&text) {
            Err(Error::UnknownKey { key, section }) => {
                assert_eq!(key, "mesh_sise");
                assert_eq!(section, "domain");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("\"interior\": \"-1\"", "\"interior\": \"-1\", \"colour\": 1");
        assert!(matches!(parse_config(&text), Err(Error::UnknownKey { section, .. }) if section == "top level"));
    }

    #[test]
    fn syntax_error_has_position() {
        let text = MINIMAL.replace("\"ball\",", "\"ball\"");
        match parse_config(&text) {
            Err(Error::ConfigParse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_tag_and_missing_field() {
        let text = MINIMAL.replace("Neg_Sneg_Hneg", "Neg_Whatever");
        assert!(matches!(parse_config(&text), Err(Error::ConfigParse { line: 2, .. })));
        let text = MINIMAL.replace("\"boundary\": \"-1\"", "\"c\": 1");
        assert!(matches!(parse_config(&text), Err(Error::ConfigParse { .. })));
    }

    #[test]
    fn refinement_halves_spacing() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.domain.n_theta = Some(16);
        let r = c.refined(2);
        assert_eq!(r.domain.n_r, 161);
        assert_eq!(r.domain.n_theta, Some(64));
    }
}
