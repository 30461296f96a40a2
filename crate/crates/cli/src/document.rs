//! JSON documents for systems, networks and descriptor systems.
//!
//! Every document carries `"version": 1`. Matrices are row-major nested
//! arrays, or the strings `"zeros"` / `"identity"` where the shape is
//! implied. A `"model"` key refers to a built-in constructor instead of
//! listing matrices.

use std::collections::BTreeMap;

use phnet::models::{self, MaxwellParams, PoroelasticParams, TwoMassParams};
use phnet::nalgebra::DMatrix;
use phnet::{
    build_phdae, CoupledNetwork, CouplingLaw, ExternalLayout, LinearPhSystem, LinearPortRelation, PhMatrices,
    PhdaeSystem, PortHamiltonian,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Failure;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shorthand {
    Zeros,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(Shorthand),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn from_matrix(a: &DMatrix<f64>) -> Self {
        MatrixSpec::Rows(a.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// Column count of an explicit matrix with at least one row.
    fn explicit_cols(&self) -> Option<usize> {
        match self {
            MatrixSpec::Rows(rows) => rows.first().map(Vec::len),
            MatrixSpec::Named(_) => None,
        }
    }

    fn explicit_rows(&self) -> Option<usize> {
        match self {
            MatrixSpec::Rows(rows) => Some(rows.len()),
            MatrixSpec::Named(_) => None,
        }
    }

    fn resolve(&self, field: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, Failure> {
        match self {
            MatrixSpec::Named(Shorthand::Zeros) => Ok(DMatrix::zeros(rows, cols)),
            MatrixSpec::Named(Shorthand::Identity) => {
                if rows != cols {
                    return Err(Failure::input(format!(
                        "field {field}: \"identity\" needs a square {rows}x{cols} shape"
                    )));
                }
                Ok(DMatrix::identity(rows, cols))
            }
            MatrixSpec::Rows(data) => {
                if data.len() != rows {
                    return Err(Failure::input(format!("field {field}: expected {rows} rows, found {}", data.len())));
                }
                for (i, r) in data.iter().enumerate() {
                    if r.len() != cols {
                        return Err(Failure::input(format!(
                            "field {field}: row {} has {} entries, expected {cols}",
                            i + 1,
                            r.len()
                        )));
                    }
                }
                Ok(DMatrix::from_fn(rows, cols, |i, j| data[i][j]))
            }
        }
    }
}

/// Matrices of one linear system; `n` and `m` are needed only when every
/// matrix that would fix them is given in shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<MatrixSpec>,
    #[serde(rename = "J")]
    pub structure: MatrixSpec,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<MatrixSpec>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub port: Option<MatrixSpec>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub port_dissipation: Option<MatrixSpec>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub feedthrough_sym: Option<MatrixSpec>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub feedthrough_skew: Option<MatrixSpec>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub effort: Option<MatrixSpec>,
}

impl SystemBody {
    pub fn from_system(sys: &LinearPhSystem) -> Self {
        let some = |a: &DMatrix<f64>| Some(MatrixSpec::from_matrix(a));
        Self {
            n: Some(sys.state_dim()),
            m: Some(sys.input_dim()),
            flow: some(sys.flow()),
            structure: MatrixSpec::from_matrix(sys.structure()),
            dissipation: some(sys.dissipation()),
            port: some(sys.port()),
            port_dissipation: some(sys.port_dissipation()),
            feedthrough_sym: some(sys.feedthrough_sym()),
            feedthrough_skew: some(sys.feedthrough_skew()),
            effort: some(sys.effort_map()),
        }
    }

    pub fn to_system(&self, ctx: &str) -> Result<LinearPhSystem, Failure> {
        let n = self.n.or(self.structure.explicit_rows()).ok_or_else(|| {
            Failure::input(format!("{ctx}: state dimension n is required when J is given in shorthand"))
        })?;
        if let Some(rows) = self.structure.explicit_rows() {
            if rows != n {
                return Err(Failure::input(format!("{ctx}: n = {n} but J has {rows} rows")));
            }
        }
        let m = match (self.m, &self.port) {
            (Some(m), _) => m,
            (None, Some(b)) => match b {
                MatrixSpec::Rows(_) => b.explicit_cols().unwrap_or(0),
                MatrixSpec::Named(_) => return Err(Failure::input(format!("{ctx}: input dimension m is required"))),
            },
            (None, None) => 0,
        };
        let field = |name: &str| format!("{ctx}.{name}");
        let get = |spec: &Option<MatrixSpec>, name: &str, rows: usize, cols: usize, default: Shorthand| {
            spec.as_ref().unwrap_or(&MatrixSpec::Named(default)).resolve(&field(name), rows, cols)
        };
        let mats = PhMatrices {
            flow: get(&self.flow, "E", n, n, Shorthand::Identity)?,
            structure: self.structure.resolve(&field("J"), n, n)?,
            dissipation: get(&self.dissipation, "R", n, n, Shorthand::Zeros)?,
            port: get(&self.port, "B", n, m, Shorthand::Zeros)?,
            port_dissipation: get(&self.port_dissipation, "P", n, m, Shorthand::Zeros)?,
            feedthrough_sym: get(&self.feedthrough_sym, "S", m, m, Shorthand::Zeros)?,
            feedthrough_skew: get(&self.feedthrough_skew, "N", m, m, Shorthand::Zeros)?,
        };
        let effort = get(&self.effort, "L", n, n, Shorthand::Identity)?;
        LinearPhSystem::from_matrices(mats, effort).map_err(|e| Failure::input(format!("{ctx}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDoc {
    #[serde(rename = "M")]
    pub input: MatrixSpec,
    #[serde(rename = "N")]
    pub output: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CouplingDoc {
    Matrix(MatrixSpec),
    Relation(RelationDoc),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LayoutDoc {
    #[default]
    Separate,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBody {
    pub subsystems: Vec<SystemBody>,
    pub ports: Vec<MatrixSpec>,
    pub coupling: CouplingDoc,
    #[serde(default)]
    pub external: LayoutDoc,
}

fn relation_doc(rel: &LinearPortRelation) -> RelationDoc {
    RelationDoc {
        input: MatrixSpec::from_matrix(rel.input_coeff()),
        output: MatrixSpec::from_matrix(rel.output_coeff()),
    }
}

impl NetworkBody {
    pub fn from_network(net: &CoupledNetwork) -> Self {
        let coupling = match net.law() {
            CouplingLaw::Matrix(c) => CouplingDoc::Matrix(MatrixSpec::from_matrix(c)),
            CouplingLaw::Relation(rel) => CouplingDoc::Relation(relation_doc(rel)),
        };
        Self {
            subsystems: net.subsystems().iter().map(SystemBody::from_system).collect(),
            ports: net.internal_ports().iter().map(MatrixSpec::from_matrix).collect(),
            coupling,
            external: match net.external_layout() {
                ExternalLayout::Separate => LayoutDoc::Separate,
                ExternalLayout::Shared => LayoutDoc::Shared,
            },
        }
    }

    pub fn to_network(&self) -> Result<CoupledNetwork, Failure> {
        let subsystems = self
            .subsystems
            .iter()
            .enumerate()
            .map(|(i, s)| s.to_system(&format!("subsystems[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        if self.ports.len() != subsystems.len() {
            return Err(Failure::input(format!(
                "ports: expected {} matrices, found {}",
                subsystems.len(),
                self.ports.len()
            )));
        }
        let ports = self
            .ports
            .iter()
            .zip(&subsystems)
            .enumerate()
            .map(|(i, (spec, sys))| {
                let n = sys.state_dim();
                let cols = match spec {
                    MatrixSpec::Named(Shorthand::Identity) => n,
                    MatrixSpec::Named(Shorthand::Zeros) => {
                        return Err(Failure::input(format!("ports[{i}]: \"zeros\" has no implied width")))
                    }
                    MatrixSpec::Rows(_) => spec.explicit_cols().unwrap_or(0),
                };
                spec.resolve(&format!("ports[{i}]"), n, cols)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let total: usize = ports.iter().map(|p| p.ncols()).sum();
        let law = match &self.coupling {
            CouplingDoc::Matrix(c) => CouplingLaw::Matrix(c.resolve("coupling.matrix", total, total)?),
            CouplingDoc::Relation(r) => {
                let k = r.input.explicit_rows().or(r.output.explicit_rows()).unwrap_or(total);
                let input = r.input.resolve("coupling.relation.M", k, total)?;
                let output = r.output.resolve("coupling.relation.N", k, total)?;
                CouplingLaw::Relation(
                    LinearPortRelation::new(input, output).map_err(|e| Failure::input(e.to_string()))?,
                )
            }
        };
        let layout = match self.external {
            LayoutDoc::Separate => ExternalLayout::Separate,
            LayoutDoc::Shared => ExternalLayout::Shared,
        };
        CoupledNetwork::new(subsystems, ports, law, layout).map_err(|e| Failure::input(e.to_string()))
    }
}

/// Symbolic reference to a built-in model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub model: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Return the model's canonical network instead of the monolithic system.
    #[serde(default)]
    pub network: bool,
}

/// A parsed document.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Loaded {
    System(LinearPhSystem),
    Network(CoupledNetwork),
    Phdae(PhdaeSystem),
}

impl Loaded {
    pub fn kind(&self) -> &'static str {
        match self {
            Loaded::System(_) => "linear",
            Loaded::Network(_) => "network",
            Loaded::Phdae(_) => "phdae",
        }
    }
}

pub const MODEL_NAMES: [&str; 3] = ["two-mass", "poroelastic", "maxwell"];

fn take_param(params: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

fn reject_leftovers(model: &str, params: &BTreeMap<String, f64>) -> Result<(), Failure> {
    match params.keys().next() {
        Some(k) => Err(Failure::usage(format!("model {model}: unknown parameter {k:?}"))),
        None => Ok(()),
    }
}

/// Instantiates a registered model. Parameter keys: `m1 m2 K K1 K2 r1 r2`
/// for `two-mass` (plus `split` = 0 for identity ports, 1 for scalar
/// ports); `density alpha permeability viscosity biot_modulus` for
/// `poroelastic`; `nx ny` for `maxwell`.
pub fn build_model(name: &str, params: &BTreeMap<String, f64>, network: bool) -> Result<Loaded, Failure> {
    let mut params = params.clone();
    let numerical = |e: phnet::PhError| Failure::from(e);
    let loaded = match name {
        "two-mass" => {
            let d = TwoMassParams::default();
            let p = TwoMassParams {
                m1: take_param(&mut params, "m1", d.m1),
                m2: take_param(&mut params, "m2", d.m2),
                k: take_param(&mut params, "K", d.k),
                k1: take_param(&mut params, "K1", d.k1),
                k2: take_param(&mut params, "K2", d.k2),
                r1: take_param(&mut params, "r1", d.r1),
                r2: take_param(&mut params, "r2", d.r2),
            };
            let split = take_param(&mut params, "split", 1.0);
            reject_leftovers(name, &params)?;
            if network {
                let net =
                    if split == 0.0 { models::two_mass_split_identity(&p) } else { models::two_mass_split_scalar(&p) };
                Loaded::Network(net.map_err(numerical)?)
            } else {
                Loaded::System(models::two_mass(&p).map_err(numerical)?)
            }
        }
        "poroelastic" => {
            let d = PoroelasticParams::desk();
            let p = PoroelasticParams {
                density: take_param(&mut params, "density", d.density),
                alpha: take_param(&mut params, "alpha", d.alpha),
                permeability: take_param(&mut params, "permeability", d.permeability),
                viscosity: take_param(&mut params, "viscosity", d.viscosity),
                biot_modulus: take_param(&mut params, "biot_modulus", d.biot_modulus),
                ..d
            };
            reject_leftovers(name, &params)?;
            let (sys, net) = models::poroelastic(&p).map_err(numerical)?;
            if network {
                Loaded::Network(net)
            } else {
                Loaded::System(sys)
            }
        }
        "maxwell" => {
            let nx = take_param(&mut params, "nx", 2.0);
            let ny = take_param(&mut params, "ny", 1.0);
            reject_leftovers(name, &params)?;
            if nx.fract() != 0.0 || ny.fract() != 0.0 || nx < 1.0 || ny < 1.0 {
                return Err(Failure::usage("model maxwell: nx and ny must be positive integers"));
            }
            let p = MaxwellParams::grid(nx as usize, ny as usize).map_err(numerical)?;
            let (sys, net) = models::maxwell_grid(&p).map_err(numerical)?;
            if network {
                Loaded::Network(net)
            } else {
                Loaded::System(sys)
            }
        }
        other => return Err(Failure::usage(format!("unknown model {other:?}; available: {}", MODEL_NAMES.join(", ")))),
    };
    Ok(loaded)
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| Failure::input(format!("{what}: {e}")))
}

/// Parses a document into a system, network or descriptor system. No
/// structural validation is performed here.
pub fn parse_document(text: &str) -> Result<Loaded, Failure> {
    let value: Value = serde_json::from_str(text).map_err(|e| Failure::input(format!("invalid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(Failure::input("document must be a JSON object"));
    };
    match map.remove("version") {
        Some(Value::Number(v)) if v.as_u64() == Some(FORMAT_VERSION as u64) => {}
        Some(v) => return Err(Failure::input(format!("unsupported format version {v}"))),
        None => return Err(Failure::input("missing field `version`")),
    }
    if map.contains_key("model") {
        let doc: ModelDoc = from_value(Value::Object(map), "model document")?;
        return build_model(&doc.model, &doc.params, doc.network);
    }
    let kind = match map.remove("kind") {
        None => "linear".to_string(),
        Some(Value::String(s)) => s,
        Some(v) => return Err(Failure::input(format!("field kind: expected a string, found {v}"))),
    };
    match kind.as_str() {
        "linear" => {
            let body: SystemBody = from_value(Value::Object(map), "linear system")?;
            Ok(Loaded::System(body.to_system("system")?))
        }
        "network" => {
            let body: NetworkBody = from_value(Value::Object(map), "network")?;
            Ok(Loaded::Network(body.to_network()?))
        }
        "phdae" => {
            let body: NetworkBody = from_value(Value::Object(map), "phdae")?;
            let net = body.to_network()?;
            let CouplingLaw::Relation(rel) = net.law() else {
                return Err(Failure::input("phdae: coupling must be a relation {\"M\", \"N\"}"));
            };
            Ok(Loaded::Phdae(build_phdae(&net, rel).map_err(Failure::from)?))
        }
        other => Err(Failure::input(format!("unknown kind {other:?} (expected linear, network or phdae)"))),
    }
}

fn with_header(kind: &str, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("version".into(), Value::from(FORMAT_VERSION));
    map.insert("kind".into(), Value::from(kind));
    if let Value::Object(fields) = body {
        map.extend(fields);
    }
    Value::Object(map)
}

/// Pretty-prints with scalar arrays (matrix rows) kept on one line.
fn render(v: &Value) -> String {
    fn go(v: &Value, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent + 1);
        match v {
            Value::Array(items) if items.iter().all(|x| !x.is_array() && !x.is_object()) => {
                let parts: Vec<String> =
                    items.iter().map(|x| serde_json::to_string(x).expect("JSON values serialise")).collect();
                out.push('[');
                out.push_str(&parts.join(", "));
                out.push(']');
            }
            Value::Array(items) => {
                out.push_str("[\n");
                for (k, x) in items.iter().enumerate() {
                    out.push_str(&pad);
                    go(x, indent + 1, out);
                    out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Value::Object(map) if !map.is_empty() => {
                out.push_str("{\n");
                for (k, (key, x)) in map.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(&serde_json::to_string(key).expect("keys serialise"));
                    out.push_str(": ");
                    go(x, indent + 1, out);
                    out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
            other => out.push_str(&serde_json::to_string(other).expect("JSON values serialise")),
        }
    }
    let mut s = String::new();
    go(v, 0, &mut s);
    s.push('\n');
    s
}

pub fn system_to_json(sys: &LinearPhSystem) -> String {
    render(&with_header("linear", serde_json::to_value(SystemBody::from_system(sys)).expect("serialisable")))
}

pub fn network_to_json(net: &CoupledNetwork) -> String {
    render(&with_header("network", serde_json::to_value(NetworkBody::from_network(net)).expect("serialisable")))
}

/// Descriptor systems are stored as their generating network and relation.
pub fn phdae_to_json(dae: &PhdaeSystem, net: &CoupledNetwork) -> String {
    let mut body = NetworkBody::from_network(net);
    body.coupling = CouplingDoc::Relation(relation_doc(dae.relation()));
    render(&with_header("phdae", serde_json::to_value(body).expect("serialisable")))
}

pub fn loaded_to_json(loaded: &Loaded) -> Result<String, Failure> {
    match loaded {
        Loaded::System(s) => Ok(system_to_json(s)),
        Loaded::Network(n) => Ok(network_to_json(n)),
        Loaded::Phdae(_) => Err(Failure::usage("descriptor systems are written together with their network")),
    }
}
