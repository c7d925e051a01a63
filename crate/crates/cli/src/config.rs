//! JSON run configuration and its translation into library objects.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nijhydro::counterexamples::{self, FamilyParams, FreeFn};
use nijhydro::dual::Dual2;
use nijhydro::fields::{
    Block, BlockSpec, ComponentCurve, CurveRef, DomainBox, DualOperator, OperatorRef, ProductOperator, ScalarRef,
    UnivariateRef,
};
use nijhydro::hierarchy::{hierarchy_from_seed, Hierarchy};
use nijhydro::hydro::GridAxis;
use nijhydro::jordan::{compose_conservation_law, compose_symmetry, standard_hierarchy, BlockFunctions};
use nijhydro::solver::{ExtractionOptions, NewtonOptions, PipelineConfig};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::expr::{Expr, ExprFn};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub curve: Option<CurveConfig>,
    #[serde(default)]
    pub hierarchy: Option<HierarchyConfig>,
    #[serde(default)]
    pub grids: Option<GridsConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed of the probe-point generator.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum OperatorConfig {
    /// Block-diagonal operator in the normal form of the splitting theorem.
    Blocks(Vec<BlockConfig>),
    /// Explicit matrix of expressions.
    Matrix {
        entries: Vec<Vec<String>>,
        #[serde(default)]
        variables: Option<Vec<String>>,
    },
    /// One of the two built-in non-gl-regular operators on ℝ³(x, y, z): 1 or 2.
    Counterexample(u8),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum BlockConfig {
    /// 1×1 block with eigenvalue `λ(s)`, an expression in `s`.
    Diagonal(String),
    /// Upper-triangular Toeplitz block of the given size.
    Jordan(usize),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    /// Components of γ as expressions in `x`.
    pub components: Vec<String>,
    pub domain: [f64; 2],
    #[serde(default)]
    pub sample_interval: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum HierarchyConfig {
    Standard,
    Seed {
        expression: String,
        /// Anchor of the potentials; γ(0) when omitted.
        #[serde(default)]
        base: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl From<AxisConfig> for GridAxis {
    fn from(a: AxisConfig) -> Self {
        GridAxis::new(a.min, a.max, a.count)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    pub x: AxisConfig,
    /// Axes for `t₁ … tₙ₋₁`.
    pub t: Vec<AxisConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub newton: Option<f64>,
    pub newton_max_iterations: Option<usize>,
    pub quadrature: Option<f64>,
    pub extension: Option<f64>,
    pub on_curve: Option<f64>,
    pub consistency: Option<f64>,
    pub initial_samples: Option<usize>,
    pub max_samples: Option<usize>,
    /// Relative bound below which a residual counts as zero in `verify`.
    pub pass: Option<f64>,
    /// Absolute bound above which a residual counts as a violation in `verify`.
    pub fail: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    /// Extra probe points evaluated before the random ones.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub symmetries: Vec<SymmetryConfig>,
    #[serde(default)]
    pub conservation_laws: Vec<LawConfig>,
    pub expect: Vec<Expectation>,
}

fn default_probes() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A named operator field; exactly one definition key must be given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryConfig {
    pub name: String,
    /// Per-block functions of `s` (1 for a diagonal block, k for a Jordan block).
    #[serde(default)]
    pub blocks: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<String>>>,
    /// Free functions of a built-in operator's symmetry family.
    #[serde(default)]
    pub family: Option<BTreeMap<String, String>>,
    /// Pointwise product of two previously defined operators.
    #[serde(default)]
    pub product: Option<[String; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub name: String,
    #[serde(default)]
    pub expression: Option<String>,
    #[serde(default)]
    pub blocks: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Torsion,
    Symmetry,
    StrongSymmetry,
    /// `f` is a conservation law of `L`.
    ConservationLaw,
    /// `f` is a conservation law of the symmetry `M`.
    SharedConservationLaw,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub check: Check,
    #[serde(default)]
    pub symmetry: Option<String>,
    #[serde(default)]
    pub law: Option<String>,
    /// Whether the residual is expected to vanish (`true`) or to exceed the failure bound.
    pub holds: bool,
}

/// The operator of a run.
#[derive(Clone)]
pub struct OperatorModel {
    pub field: OperatorRef,
    pub spec: Option<BlockSpec>,
    pub builtin: Option<u8>,
    pub variables: Vec<String>,
}

impl OperatorModel {
    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn require_spec(&self, what: &str) -> Result<&BlockSpec> {
        self.spec
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{what} requires an operator given by `blocks`")))
    }
}

fn cfg<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

fn vars_ref(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn univariate(src: &str, var: &str, context: &str) -> Result<UnivariateRef> {
    Ok(Arc::new(ExprFn::parse(src, var).map_err(cfg(context))?))
}

fn matrix_operator(entries: &[Vec<String>], vars: &[String], context: &str) -> Result<OperatorRef> {
    let n = vars.len();
    if entries.len() != n || entries.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("{context}: matrix must be {n}×{n}")));
    }
    let names = vars_ref(vars);
    let exprs = entries
        .iter()
        .flatten()
        .map(|s| Expr::parse(s, &names))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(cfg(context))?;
    Ok(Arc::new(DualOperator::new(n, move |u: &[Dual2]| {
        exprs.iter().map(|e| e.eval(u)).collect()
    })))
}

fn scalar_expression(src: &str, vars: &[String], context: &str) -> Result<ScalarRef> {
    let e = Expr::parse(src, &vars_ref(vars)).map_err(cfg(context))?;
    Ok(nijhydro::fields::scalar(vars.len(), move |u: &[Dual2]| e.eval(u)))
}

fn block_functions(spec: &BlockSpec, blocks: &[Vec<String>], context: &str) -> Result<Vec<BlockFunctions>> {
    if blocks.len() != spec.len() {
        return Err(CliError::Config(format!(
            "{context}: {} blocks given, operator has {}",
            blocks.len(),
            spec.len()
        )));
    }
    spec.blocks
        .iter()
        .zip(blocks)
        .enumerate()
        .map(|(b, (block, fs))| {
            if fs.len() != block.size() {
                return Err(CliError::Config(format!(
                    "{context}: block {b} needs {} function(s), got {}",
                    block.size(),
                    fs.len()
                )));
            }
            let fns = fs
                .iter()
                .map(|s| univariate(s, "s", context))
                .collect::<Result<Vec<_>>>()?;
            Ok(match block {
                Block::Diagonal1(_) => BlockFunctions::Diagonal(fns[0].clone()),
                Block::JordanToeplitz(_) => BlockFunctions::Jordan(fns),
            })
        })
        .collect()
}

fn family_params(which: u8, map: &BTreeMap<String, String>, context: &str) -> Result<FamilyParams> {
    let vars: [&str; 2] = if which == 1 { ["y", "z"] } else { ["x", "z"] };
    let mut p = FamilyParams::default();
    for (key, src) in map {
        let e = Expr::parse(src, &vars).map_err(cfg(context))?;
        let f: FreeFn = Arc::new(move |a: &Dual2, b: &Dual2| e.eval(&[a.clone(), b.clone()]));
        match key.as_str() {
            "f" => p.f = f,
            "g" => p.g = f,
            "a" => p.a = f,
            "b" => p.b = f,
            "c" => p.c = f,
            other => {
                return Err(CliError::Config(format!(
                    "{context}: unknown family function `{other}` (expected f, g, a, b, c)"
                )))
            }
        }
    }
    Ok(p)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(cfg("invalid configuration"))
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "unnamed".into())
    }

    pub fn operator(&self) -> Result<OperatorModel> {
        match &self.operator {
            OperatorConfig::Blocks(blocks) => {
                if blocks.is_empty() {
                    return Err(CliError::Config("operator: no blocks".into()));
                }
                let blocks = blocks
                    .iter()
                    .map(|b| match b {
                        BlockConfig::Diagonal(src) => Ok(Block::Diagonal1(univariate(src, "s", "operator eigenvalue")?)),
                        BlockConfig::Jordan(0) => Err(CliError::Config("operator: Jordan block of size 0".into())),
                        BlockConfig::Jordan(k) => Ok(Block::JordanToeplitz(*k)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let spec = BlockSpec::new(blocks);
                let n = spec.dim();
                Ok(OperatorModel {
                    field: Arc::new(spec.operator()),
                    spec: Some(spec),
                    builtin: None,
                    variables: (1..=n).map(|i| format!("u{i}")).collect(),
                })
            }
            OperatorConfig::Matrix { entries, variables } => {
                let vars = variables
                    .clone()
                    .unwrap_or_else(|| (1..=entries.len()).map(|i| format!("u{i}")).collect());
                Ok(OperatorModel {
                    field: matrix_operator(entries, &vars, "operator matrix")?,
                    spec: None,
                    builtin: None,
                    variables: vars,
                })
            }
            OperatorConfig::Counterexample(k @ (1 | 2)) => Ok(OperatorModel {
                field: if *k == 1 {
                    counterexamples::first_operator()
                } else {
                    counterexamples::second_operator()
                },
                spec: None,
                builtin: Some(*k),
                variables: vec!["x".into(), "y".into(), "z".into()],
            }),
            OperatorConfig::Counterexample(k) => {
                Err(CliError::Config(format!("operator: unknown counterexample {k} (expected 1 or 2)")))
            }
        }
    }

    pub fn curve(&self, n: usize) -> Result<CurveRef> {
        let c = self
            .curve
            .as_ref()
            .ok_or_else(|| CliError::Config("`curve` is required".into()))?;
        if c.components.len() != n {
            return Err(CliError::Config(format!(
                "curve: {} components for a {n}-dimensional operator",
                c.components.len()
            )));
        }
        if !(c.domain[0] < c.domain[1]) {
            return Err(CliError::Config("curve: empty domain".into()));
        }
        let comps = c
            .components
            .iter()
            .map(|s| univariate(s, "x", "curve component"))
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(ComponentCurve::new(comps, (c.domain[0], c.domain[1]))))
    }

    /// The hierarchy of the run; seeds are anchored at `base` unless the config names one.
    pub fn hierarchy(&self, op: &OperatorModel, base: &[f64]) -> Result<Hierarchy> {
        match self.hierarchy.as_ref().unwrap_or(&HierarchyConfig::Standard) {
            HierarchyConfig::Standard => {
                let spec = op.require_spec("the standard hierarchy")?;
                standard_hierarchy(spec).map_err(|e| CliError::pipeline("standard hierarchy", e))
            }
            HierarchyConfig::Seed { expression, base: b } => {
                let f = scalar_expression(expression, &op.variables, "hierarchy seed")?;
                let p = b.clone().unwrap_or_else(|| base.to_vec());
                if p.len() != op.dim() {
                    return Err(CliError::Config("hierarchy: base point has the wrong dimension".into()));
                }
                hierarchy_from_seed(op.field.clone(), f, &p).map_err(|e| CliError::pipeline("hierarchy seed", e))
            }
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let t = &self.tolerances;
        let d = PipelineConfig::default();
        let e = ExtractionOptions::default();
        let nw = NewtonOptions::default();
        PipelineConfig {
            extraction: ExtractionOptions {
                initial_samples: t.initial_samples.unwrap_or(e.initial_samples),
                max_samples: t.max_samples.unwrap_or(e.max_samples),
                consistency_tol: t.consistency.unwrap_or(e.consistency_tol),
            },
            newton: NewtonOptions {
                tol: t.newton.unwrap_or(nw.tol),
                max_iterations: t.newton_max_iterations.unwrap_or(nw.max_iterations),
                ..nw
            },
            quad_tol: t.quadrature.unwrap_or(d.quad_tol),
            extension_tol: t.extension.unwrap_or(d.extension_tol),
            on_curve_tol: t.on_curve.unwrap_or(d.on_curve_tol),
            sample_interval: self.curve.as_ref().and_then(|c| c.sample_interval.map(|s| (s[0], s[1]))),
        }
    }

    pub fn grid_axes(&self, n: usize) -> Result<(GridAxis, Vec<GridAxis>)> {
        let g = self
            .grids
            .as_ref()
            .ok_or_else(|| CliError::Config("`grids` is required".into()))?;
        if g.t.len() + 1 != n {
            return Err(CliError::Config(format!(
                "grids: {} time axes for a {n}-dimensional operator (need {})",
                g.t.len(),
                n - 1
            )));
        }
        for a in std::iter::once(&g.x).chain(&g.t) {
            if a.count == 0 || a.min > a.max || (a.count == 1 && a.min != a.max) {
                return Err(CliError::Config(format!("grids: invalid axis {a:?}")));
            }
        }
        Ok((g.x.into(), g.t.iter().map(|a| (*a).into()).collect()))
    }

    pub fn pass_tolerance(&self) -> f64 {
        self.tolerances.pass.unwrap_or(nijhydro::calculus::PASS_REL)
    }

    pub fn fail_tolerance(&self) -> f64 {
        self.tolerances.fail.unwrap_or(1e-2)
    }
}

/// Operators and laws declared in a `verify` section.
pub struct VerifyObjects {
    pub symmetries: BTreeMap<String, OperatorRef>,
    pub laws: BTreeMap<String, ScalarRef>,
    pub domain: DomainBox,
}

impl VerifyConfig {
    pub fn build(&self, op: &OperatorModel) -> Result<VerifyObjects> {
        let n = op.dim();
        let mut symmetries: BTreeMap<String, OperatorRef> = BTreeMap::new();
        for s in &self.symmetries {
            let ctx = format!("symmetry `{}`", s.name);
            let given = [s.blocks.is_some(), s.matrix.is_some(), s.family.is_some(), s.product.is_some()];
            if given.iter().filter(|g| **g).count() != 1 {
                return Err(CliError::Config(format!(
                    "{ctx}: give exactly one of blocks, matrix, family, product"
                )));
            }
            let field: OperatorRef = if let Some(b) = &s.blocks {
                let spec = op.require_spec(&ctx)?;
                Arc::new(compose_symmetry(spec, &block_functions(spec, b, &ctx)?).map_err(cfg(&ctx))?)
            } else if let Some(m) = &s.matrix {
                matrix_operator(m, &op.variables, &ctx)?
            } else if let Some(f) = &s.family {
                let which = op
                    .builtin
                    .ok_or_else(|| CliError::Config(format!("{ctx}: families exist only for built-in operators")))?;
                let p = family_params(which, f, &ctx)?;
                if which == 1 {
                    counterexamples::first_symmetry(&p)
                } else {
                    counterexamples::second_symmetry(&p)
                }
            } else {
                let [a, b] = s.product.as_ref().expect("checked above");
                let get = |k: &String| {
                    symmetries
                        .get(k)
                        .cloned()
                        .ok_or_else(|| CliError::Config(format!("{ctx}: `{k}` is not defined before use")))
                };
                Arc::new(ProductOperator(get(a)?, get(b)?))
            };
            if symmetries.insert(s.name.clone(), field).is_some() {
                return Err(CliError::Config(format!("{ctx}: duplicate name")));
            }
        }
        let mut laws = BTreeMap::new();
        for l in &self.conservation_laws {
            let ctx = format!("conservation law `{}`", l.name);
            let f = match (&l.expression, &l.blocks) {
                (Some(e), None) => scalar_expression(e, &op.variables, &ctx)?,
                (None, Some(b)) => {
                    let spec = op.require_spec(&ctx)?;
                    Arc::new(compose_conservation_law(spec, &block_functions(spec, b, &ctx)?).map_err(cfg(&ctx))?)
                        as ScalarRef
                }
                _ => return Err(CliError::Config(format!("{ctx}: give exactly one of expression, blocks"))),
            };
            if laws.insert(l.name.clone(), f).is_some() {
                return Err(CliError::Config(format!("{ctx}: duplicate name")));
            }
        }
        for e in &self.expect {
            let need_sym = matches!(e.check, Check::Symmetry | Check::StrongSymmetry | Check::SharedConservationLaw);
            let need_law = matches!(e.check, Check::ConservationLaw | Check::SharedConservationLaw);
            match (&e.symmetry, need_sym) {
                (Some(s), true) if !symmetries.contains_key(s) => {
                    return Err(CliError::Config(format!("expectation: unknown symmetry `{s}`")))
                }
                (None, true) => return Err(CliError::Config(format!("expectation {:?} needs `symmetry`", e.check))),
                (Some(_), false) => return Err(CliError::Config(format!("expectation {:?} takes no `symmetry`", e.check))),
                _ => {}
            }
            match (&e.law, need_law) {
                (Some(l), true) if !laws.contains_key(l) => {
                    return Err(CliError::Config(format!("expectation: unknown conservation law `{l}`")))
                }
                (None, true) => return Err(CliError::Config(format!("expectation {:?} needs `law`", e.check))),
                (Some(_), false) => return Err(CliError::Config(format!("expectation {:?} takes no `law`", e.check))),
                _ => {}
            }
        }
        let domain = match &self.domain {
            Some(d) if d.lo.len() == n && d.hi.len() == n && d.lo.iter().zip(&d.hi).all(|(a, b)| a <= b) => {
                DomainBox::new(d.lo.clone(), d.hi.clone())
            }
            Some(_) => return Err(CliError::Config(format!("verify: domain must be a {n}-dimensional box"))),
            None => DomainBox::cube(n, 0.5, 1.5),
        };
        if self.points.iter().any(|p| p.len() != n) {
            return Err(CliError::Config(format!("verify: probe points must have {n} coordinates")));
        }
        Ok(VerifyObjects {
            symmetries,
            laws,
            domain,
        })
    }
}
