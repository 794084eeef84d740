//! Problem configuration documents.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use condenser_core::{
    analysis::ThinnessConfig, default_epsilon, equilibrium, fibonacci_sphere, grid, ring, Condenser, Field, FieldSpec,
    GramMatrix, KernelFamily, KernelSpec, Plate, Point, RotationalBody, ScalarSignedMeasure, Sign, SolverConfig,
};
use serde::{Deserialize, Serialize};

/// Kernel fields; `epsilon` defaults to half the minimum node spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    #[serde(flatten)]
    pub family: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Generator {
    Grid {
        lo: Vec<f64>,
        hi: Vec<f64>,
        counts: Vec<usize>,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        count: usize,
    },
    Ring {
        center: Vec<f64>,
        radius: f64,
        count: usize,
        #[serde(default)]
        phase: f64,
    },
    RotationalBody {
        body: RotationalBody,
        length: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodesSpec {
    Inline(Vec<Vec<f64>>),
    Generated(Generator),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Constant(f64),
    PerNode(Vec<f64>),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant(1.0)
    }
}

/// Upper constraint: a constant, per-node values, or a multiple of the
/// plate's equilibrium measure scaled so that `<g,σ> = scale·a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Constant(f64),
    PerNode(Vec<f64>),
    EquilibriumScale { equilibrium_scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateConfig {
    pub sign: Sign,
    pub nodes: NodesSpec,
    #[serde(default)]
    pub g: WeightSpec,
    pub a: f64,
    pub sigma: SigmaSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frostman_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalayageSection {
    pub source: ScalarSignedMeasure,
    /// Plates whose nodes form the target; all plates when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_plates: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustSection {
    pub fractions: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plates: Vec<PlateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balayage: Option<BalayageSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaust: Option<ExhaustSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinness: Option<ThinnessConfig>,
}

/// A fully resolved problem.
pub struct Problem {
    pub condenser: Condenser,
    pub kernel: KernelSpec,
    pub gram: GramMatrix,
    pub field: Field,
}

impl ProblemConfig {
    /// Parses a JSON document; errors name the offending field path and the
    /// line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            anyhow!("config field `{path}`: {inner}")
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Canonical serialized form.
    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn kernel_config(&self) -> Result<&KernelConfig> {
        self.kernel
            .as_ref()
            .ok_or_else(|| anyhow!("config has no `kernel` section"))
    }

    /// Node lists of every plate, in plate order.
    pub fn plate_nodes(&self) -> Result<Vec<Vec<Point>>> {
        if self.plates.is_empty() {
            bail!("config has no plates");
        }
        self.plates
            .iter()
            .enumerate()
            .map(|(i, p)| generate(&p.nodes).with_context(|| format!("plate {i}: nodes")))
            .collect()
    }

    /// Kernel with the default regularization filled in from `nodes`.
    pub fn kernel_for(&self, nodes: &[Point]) -> Result<KernelSpec> {
        let kc = self.kernel_config()?;
        let epsilon = match (kc.epsilon, &kc.family) {
            (Some(e), _) => e,
            (None, KernelFamily::CustomTable { .. }) => 0.0,
            (None, _) => default_epsilon(nodes)
                .ok_or_else(|| anyhow!("kernel: epsilon is required when there are fewer than two distinct nodes"))?,
        };
        Ok(KernelSpec {
            family: kc.family.clone(),
            epsilon,
        })
    }

    /// Builds the condenser, Gram matrix and field.
    pub fn build(&self) -> Result<Problem> {
        let nodes = self.plate_nodes()?;
        let all: Vec<Point> = nodes.iter().flatten().cloned().collect();
        let kernel = self.kernel_for(&all)?;
        let mut plates = Vec::with_capacity(nodes.len());
        for (i, (pc, nodes)) in self.plates.iter().zip(nodes).enumerate() {
            let n = nodes.len();
            let g = match &pc.g {
                WeightSpec::Constant(v) => vec![*v; n],
                WeightSpec::PerNode(v) => v.clone(),
            };
            let sigma = match &pc.sigma {
                SigmaSpec::Constant(v) => vec![*v; n],
                SigmaSpec::PerNode(v) => v.clone(),
                SigmaSpec::EquilibriumScale { equilibrium_scale } => {
                    let gram = condenser_core::assemble_gram(&kernel, &nodes)
                        .with_context(|| format!("plate {i}: equilibrium constraint"))?;
                    let eq = equilibrium(&nodes, &gram, None, &self.solver)
                        .with_context(|| format!("plate {i}: equilibrium constraint"))?;
                    let gm: f64 = eq.unit_minimizer.iter().zip(&g).map(|(x, g)| x * g).sum();
                    eq.unit_minimizer
                        .iter()
                        .map(|x| equilibrium_scale * pc.a * x / gm)
                        .collect()
                }
            };
            plates.push(Plate::new(i, pc.sign, nodes, g, pc.a, sigma));
        }
        let condenser = Condenser::new(plates)?;
        let gram = condenser.gram(&kernel)?;
        let field = match &self.field {
            Some(spec) => spec.resolve(&condenser, &kernel).context("field")?,
            None => Field::zero(&condenser),
        };
        Ok(Problem {
            condenser,
            kernel,
            gram,
            field,
        })
    }
}

fn generate(spec: &NodesSpec) -> Result<Vec<Point>> {
    Ok(match spec {
        NodesSpec::Inline(rows) => rows
            .iter()
            .map(|c| Point::new(c.clone()))
            .collect::<condenser_core::Result<_>>()?,
        NodesSpec::Generated(Generator::Grid { lo, hi, counts }) => grid(lo, hi, counts)?,
        NodesSpec::Generated(Generator::Sphere { center, radius, count }) => {
            if *count == 0 {
                bail!("sphere with no nodes");
            }
            fibonacci_sphere(*center, *radius, *count)
        }
        NodesSpec::Generated(Generator::Ring {
            center,
            radius,
            count,
            phase,
        }) => ring(center, *radius, *count, *phase)?,
        NodesSpec::Generated(Generator::RotationalBody { body, length }) => body.nodes(*length)?,
    })
}
