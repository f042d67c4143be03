//! Run configuration: a TOML document with a top-level `seed`, an optional
//! `[output]` table and a `[scenario]` table selected by its `kind` key.
//! Unknown keys are rejected everywhere.

use std::path::PathBuf;

use mediator_core::counterexamples::{MediatorPacket, ParticleScenario, Span};
use mediator_core::hilbert::{CMatrix, CVector, HilbertSpace, Operator, QuantumState, C64};
use mediator_core::koopman::{InteractionKind, SectorInput};
use mediator_core::meanfield::Kinetic;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    pub scenario: Scenario,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: all_formats(),
        }
    }
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Koopman(KoopmanRun),
    Meanfield(MeanfieldRun),
    Particles(ParticlesRun),
    General(GeneralRun),
    Brackets(BracketsRun),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Koopman(_) => "koopman",
            Scenario::Meanfield(_) => "meanfield",
            Scenario::Particles(_) => "particles",
            Scenario::General(_) => "general",
            Scenario::Brackets(_) => "brackets",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoopmanRun {
    pub dim_q: usize,
    pub dim_q_prime: usize,
    pub num_labels: usize,
    pub sector_dim: usize,
    pub rounds: usize,
    pub input: SectorInput,
    pub interaction: InteractionKind,
    /// Trial `i` uses seed `seed + i`.
    pub trials: usize,
    #[serde(default)]
    pub dense_check: bool,
    #[serde(default)]
    pub tolerance: KoopmanTolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KoopmanTolerance {
    pub negativity: f64,
    pub dense: f64,
}

impl Default for KoopmanTolerance {
    fn default() -> Self {
        KoopmanTolerance {
            negativity: 1e-9,
            dense: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    /// `ρ_Q` stays pure.
    Factorizes,
    /// `ρ_Q` loses purity.
    Entangles,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldRun {
    pub hamiltonian: String,
    #[serde(default)]
    pub kinetic: Option<Kinetic>,
    pub psi0: StateSpec,
    pub x0: Vec<f64>,
    pub k0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
    #[serde(default = "unit")]
    pub hbar: f64,
    pub expect: Expectation,
    #[serde(default)]
    pub tolerance: MeanfieldTolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanfieldTolerance {
    pub purity: f64,
    pub energy: f64,
    pub norm: f64,
    /// Smallest purity deficit that counts as entangling.
    pub entangling: f64,
}

impl Default for MeanfieldTolerance {
    fn default() -> Self {
        MeanfieldTolerance {
            purity: 1e-8,
            energy: 1e-6,
            norm: 1e-8,
            entangling: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesRun {
    pub model: ParticleScenario,
    pub postselect_a: f64,
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub mixture: bool,
    #[serde(default)]
    pub tolerance: ParticlesTolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticlesTolerance {
    pub mass: f64,
    pub moments: f64,
    pub moment_order: u32,
    pub min_entropy: f64,
    pub control_entropy: f64,
    pub refinement: f64,
    pub trace: f64,
    pub probability: f64,
}

impl Default for ParticlesTolerance {
    fn default() -> Self {
        ParticlesTolerance {
            mass: 1e-6,
            moments: 1e-6,
            moment_order: 4,
            min_entropy: 0.01,
            control_entropy: 1e-8,
            refinement: 0.05,
            trace: 1e-8,
            probability: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralRun {
    pub m: OperatorSpec,
    pub n: OperatorSpec,
    pub psi_q: StateSpec,
    pub psi_q_prime: StateSpec,
    pub psi_c: MediatorPacket,
    pub x_grid: Span,
    pub t: f64,
    #[serde(default = "unit")]
    pub hbar: f64,
    #[serde(default)]
    pub direct: bool,
    #[serde(default)]
    pub tolerance: GeneralTolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneralTolerance {
    /// Allowed `1 − |⟨ψ_direct|ψ_bch⟩|`.
    pub fidelity: f64,
}

impl Default for GeneralTolerance {
    fn default() -> Self {
        GeneralTolerance { fidelity: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketsRun {
    pub qb_pairs: usize,
    pub levels: Vec<usize>,
    pub qb_states: usize,
    #[serde(default = "unit")]
    pub hbar: f64,
    pub cb_points: Vec<usize>,
    pub min_order: f64,
    #[serde(default)]
    pub tolerance: BracketsTolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BracketsTolerance {
    pub qb: f64,
}

impl Default for BracketsTolerance {
    fn default() -> Self {
        BracketsTolerance { qb: 1e-8 }
    }
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

/// Product of normalised factors; a single factor may be an arbitrary
/// (entangled) vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub factors: Vec<Amplitudes>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitudes {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Vec<f64>,
}

impl Amplitudes {
    pub fn real(re: &[f64]) -> Self {
        Amplitudes {
            re: re.to_vec(),
            im: Vec::new(),
        }
    }

    pub fn state(&self) -> mediator_core::Result<QuantumState> {
        if !self.im.is_empty() && self.im.len() != self.re.len() {
            return Err(mediator_core::Error::Argument(format!(
                "`im` has {} entries but `re` has {}",
                self.im.len(),
                self.re.len()
            )));
        }
        let v = CVector::from_iterator(
            self.re.len(),
            self.re
                .iter()
                .enumerate()
                .map(|(i, &r)| C64::new(r, self.im.get(i).copied().unwrap_or(0.0))),
        );
        QuantumState::normalized(HilbertSpace::single(self.re.len())?, v)
    }
}

impl StateSpec {
    pub fn state(&self) -> mediator_core::Result<QuantumState> {
        if self.factors.is_empty() {
            return Err(mediator_core::Error::Argument("at least one factor is required".into()));
        }
        let factors = self
            .factors
            .iter()
            .map(Amplitudes::state)
            .collect::<mediator_core::Result<Vec<_>>>()?;
        QuantumState::product(&factors)
    }
}

/// A Pauli matrix by name, or an explicit Hermitian matrix given by rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Matrix {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Vec<Vec<f64>>,
    },
}

impl OperatorSpec {
    pub fn operator(&self) -> mediator_core::Result<Operator> {
        use mediator_core::hilbert::{pauli_x, pauli_y, pauli_z};
        match self {
            OperatorSpec::Named(name) => match name.as_str() {
                "sigma-x" => Ok(pauli_x()),
                "sigma-y" => Ok(pauli_y()),
                "sigma-z" => Ok(pauli_z()),
                other => Err(mediator_core::Error::Argument(format!(
                    "unknown operator `{other}`; known: sigma-x, sigma-y, sigma-z"
                ))),
            },
            OperatorSpec::Matrix { re, im } => {
                let n = re.len();
                if re.iter().any(|r| r.len() != n)
                    || (!im.is_empty() && (im.len() != n || im.iter().any(|r| r.len() != n)))
                {
                    return Err(mediator_core::Error::Argument(
                        "matrix rows must form a square array".into(),
                    ));
                }
                let m = CMatrix::from_fn(n, n, |i, j| C64::new(re[i][j], im.get(i).map(|r| r[j]).unwrap_or(0.0)));
                Operator::hermitian(HilbertSpace::single(n)?, m)
            }
        }
    }
}

/// Parses TOML into `T`, reporting the dotted path of the first offending
/// field.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::schema("<document>", e.message()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(path, e.into_inner().message())
    })
}

/// Top level with the scenario still undecoded, so that field paths inside
/// it survive deserialization.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: OutputConfig,
    scenario: toml::Table,
}

fn variant<T: DeserializeOwned>(table: toml::Table) -> CliResult<T> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." {
            "scenario".to_string()
        } else {
            format!("scenario.{inner}")
        };
        CliError::schema(path, e.into_inner().message())
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let raw: RawConfig = parse_toml(text)?;
        let mut table = raw.scenario;
        let kind = match table.remove("kind") {
            Some(toml::Value::String(k)) => k,
            Some(_) => return Err(CliError::schema("scenario.kind", "must be a string")),
            None => return Err(CliError::schema("scenario.kind", "missing")),
        };
        let scenario = match kind.as_str() {
            "koopman" => Scenario::Koopman(variant(table)?),
            "meanfield" => Scenario::Meanfield(variant(table)?),
            "particles" => Scenario::Particles(variant(table)?),
            "general" => Scenario::General(variant(table)?),
            "brackets" => Scenario::Brackets(variant(table)?),
            other => {
                return Err(CliError::schema(
                    "scenario.kind",
                    format!("unknown kind `{other}`; expected koopman, meanfield, particles, general or brackets"),
                ))
            }
        };
        Ok(RunConfig {
            seed: raw.seed,
            output: raw.output,
            scenario,
        })
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// `seed` and `scenario`, as echoed in reports and hashed.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "scenario": serde_json::to_value(&self.scenario).expect("configs serialize"),
        })
    }

    /// Copy with the numeric field `name` set to `value`. See [`set_numeric`].
    pub fn with_value(&self, name: &str, value: f64) -> CliResult<Self> {
        let mut tree = serde_json::to_value(self).expect("configs serialize");
        set_numeric(&mut tree, name, value)?;
        serde_path_to_error::deserialize(tree)
            .map_err(|e| CliError::schema(e.path().to_string(), e.inner().to_string()))
    }
}

/// Sets a numeric leaf of `tree`. `name` is either a dotted path from the
/// root (`scenario.model.g1`) or a bare key that must name exactly one
/// numeric leaf (`g1`). Integer leaves only accept integral values.
pub fn set_numeric(tree: &mut serde_json::Value, name: &str, value: f64) -> CliResult<()> {
    let path = if name.contains('.') {
        name.split('.').map(String::from).collect::<Vec<_>>()
    } else {
        let mut found = Vec::new();
        find_leaves(tree, name, &mut Vec::new(), &mut found);
        match found.len() {
            1 => found.pop().expect("one match"),
            0 => return Err(CliError::schema(name, "no numeric parameter with this name")),
            _ => {
                let list: Vec<String> = found.iter().map(|p| p.join(".")).collect();
                return Err(CliError::schema(
                    name,
                    format!("ambiguous; use one of {}", list.join(", ")),
                ));
            }
        }
    };
    let dotted = path.join(".");
    let mut node = tree;
    for key in &path {
        node = match node {
            serde_json::Value::Object(map) => map.get_mut(key),
            serde_json::Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::schema(&dotted, "no such parameter"))?;
    }
    let serde_json::Value::Number(old) = node else {
        return Err(CliError::schema(&dotted, "parameter is not numeric"));
    };
    *node = if old.is_f64() {
        serde_json::Number::from_f64(value)
            .map(serde_json::Value::Number)
            .ok_or_else(|| CliError::schema(&dotted, format!("{value} is not finite")))?
    } else if value.fract() == 0.0 && value >= 0.0 && value <= u64::MAX as f64 {
        serde_json::Value::from(value as u64)
    } else {
        return Err(CliError::schema(
            &dotted,
            format!("integer parameter cannot take {value}"),
        ));
    };
    Ok(())
}

fn find_leaves(node: &serde_json::Value, name: &str, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    if let serde_json::Value::Object(map) = node {
        for (k, v) in map {
            prefix.push(k.clone());
            if k == name && v.is_number() {
                out.push(prefix.clone());
            }
            find_leaves(v, name, prefix, out);
            prefix.pop();
        }
    }
}
