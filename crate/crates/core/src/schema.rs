//! JSON input files.
//!
//! A wiretap spec is `{"variant"?, "theta": [{"t", "W", "V"}, …]}` and a
//! channel family is `{"family": [{"t", "channel"}, …], "prior"?, "basis"?}`.
//! Channel objects carry a `"kind"` tag (`stochastic`, `cq`, `kraus`,
//! `stinespring`); complex entries are `[re, im]` pairs or plain reals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::{
    kraus_to_stinespring, CQChannel, Channel, ClassicalChannel, CompoundWiretapSpec, KrausChannel,
    StinespringIsometry, Variant, WiretapPair,
};
use crate::error::{QwkError, Result};
use crate::qcore::{c, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawComplex {
    Pair([f64; 2]),
    Real(f64),
}

pub type RawMatrix = Vec<Vec<RawComplex>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawStates {
    List(Vec<RawMatrix>),
    /// Input symbol → density matrix.
    Map(BTreeMap<String, RawMatrix>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RawChannel {
    Stochastic { matrix: Vec<Vec<f64>> },
    Cq { states: RawStates },
    Kraus { ops: Vec<RawMatrix> },
    Stinespring { isometry: RawMatrix, d_out: usize, d_env: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPair {
    pub t: String,
    #[serde(rename = "W")]
    pub legit: RawChannel,
    #[serde(rename = "V")]
    pub wiretap: RawChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub theta: Vec<RawPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMember {
    pub t: String,
    pub channel: RawChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFamily {
    pub family: Vec<RawMember>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    /// Input states as columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<RawMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub names: Vec<String>,
    pub members: Vec<StinespringIsometry>,
    pub prior: Option<Vec<f64>>,
    pub basis: Option<CMat>,
}

fn at(path: &str, e: QwkError) -> QwkError {
    match e {
        QwkError::VariantMismatch(m) => QwkError::VariantMismatch(format!("{path}: {m}")),
        QwkError::DimensionMismatch(m) => QwkError::DimensionMismatch(format!("{path}: {m}")),
        QwkError::CapExceeded(m) => QwkError::CapExceeded(format!("{path}: {m}")),
        other => QwkError::Schema(format!("{path}: {other}")),
    }
}

pub fn matrix_from_raw(raw: &RawMatrix, path: &str) -> Result<CMat> {
    let rows = raw.len();
    let cols = raw.first().map(Vec::len).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(QwkError::Schema(format!("{path}: empty matrix")));
    }
    if let Some(r) = raw.iter().position(|row| row.len() != cols) {
        return Err(QwkError::Schema(format!("{path}[{r}]: row length differs from {cols}")));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| match raw[i][j] {
        RawComplex::Pair([re, im]) => c(re, im),
        RawComplex::Real(re) => c(re, 0.0),
    }))
}

pub fn matrix_to_raw(m: &CMat) -> RawMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| RawComplex::Pair([m[(i, j)].re, m[(i, j)].im])).collect())
        .collect()
}

pub fn channel_from_raw(raw: &RawChannel, path: &str) -> Result<Channel> {
    let ch = match raw {
        RawChannel::Stochastic { matrix } => Channel::Classical(ClassicalChannel::new(matrix.clone()).map_err(|e| at(path, e))?),
        RawChannel::Cq { states } => {
            let mats: Vec<CMat> = match states {
                RawStates::List(list) => list
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix_from_raw(m, &format!("{path}.states[{i}]")))
                    .collect::<Result<_>>()?,
                RawStates::Map(map) => {
                    let mut out = Vec::with_capacity(map.len());
                    for i in 0..map.len() {
                        let m = map.get(&i.to_string()).ok_or_else(|| {
                            QwkError::Schema(format!("{path}.states: symbols must be \"0\"..\"{}\"", map.len() - 1))
                        })?;
                        out.push(matrix_from_raw(m, &format!("{path}.states.{i}"))?);
                    }
                    out
                }
            };
            Channel::CQ(CQChannel::new(mats).map_err(|e| at(path, e))?)
        }
        RawChannel::Kraus { ops } => {
            let mats = ops
                .iter()
                .enumerate()
                .map(|(i, m)| matrix_from_raw(m, &format!("{path}.ops[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Channel::Kraus(KrausChannel::new(mats).map_err(|e| at(path, e))?)
        }
        RawChannel::Stinespring { isometry, d_out, d_env } => {
            let m = matrix_from_raw(isometry, &format!("{path}.isometry"))?;
            Channel::Stinespring(StinespringIsometry::new(m, *d_out, *d_env).map_err(|e| at(path, e))?)
        }
    };
    Ok(ch)
}

pub fn channel_to_raw(ch: &Channel) -> RawChannel {
    match ch {
        Channel::Classical(c) => RawChannel::Stochastic { matrix: c.rows().to_vec() },
        Channel::CQ(c) => RawChannel::Cq { states: RawStates::List(c.states().iter().map(matrix_to_raw).collect()) },
        Channel::Kraus(k) => RawChannel::Kraus { ops: k.ops().iter().map(matrix_to_raw).collect() },
        Channel::Stinespring(s) => RawChannel::Stinespring {
            isometry: matrix_to_raw(s.matrix()),
            d_out: s.d_out(),
            d_env: s.d_env(),
        },
    }
}

fn infer_variant(pairs: &[WiretapPair]) -> Result<Variant> {
    let all = |f: &dyn Fn(&WiretapPair) -> bool| pairs.iter().all(f);
    if all(&|p| matches!(p.legit, Channel::Classical(_)) && matches!(p.wiretap, Channel::Classical(_))) {
        Ok(Variant::Classical)
    } else if all(&|p| matches!(p.legit, Channel::Classical(_)) && !p.wiretap.is_quantum()) {
        Ok(Variant::ClassicalQuantumWiretap)
    } else if all(&|p| !p.legit.is_quantum() && !p.wiretap.is_quantum()) {
        Ok(Variant::Cq)
    } else if all(&|p| p.legit.is_quantum() && p.wiretap.is_quantum()) {
        Ok(Variant::Quantum)
    } else {
        Err(QwkError::VariantMismatch("theta mixes quantum and classical-input channels".into()))
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| QwkError::Schema(e.to_string()))
}

pub fn spec_from_raw(raw: &RawSpec) -> Result<CompoundWiretapSpec> {
    if raw.theta.is_empty() {
        return Err(QwkError::Schema("theta: must be non-empty".into()));
    }
    let mut pairs = Vec::with_capacity(raw.theta.len());
    for (i, p) in raw.theta.iter().enumerate() {
        if raw.theta[..i].iter().any(|q| q.t == p.t) {
            return Err(QwkError::Schema(format!("theta[{i}].t: duplicate state name `{}`", p.t)));
        }
        pairs.push(WiretapPair {
            name: p.t.clone(),
            legit: channel_from_raw(&p.legit, &format!("theta[{i}].W"))?,
            wiretap: channel_from_raw(&p.wiretap, &format!("theta[{i}].V"))?,
        });
    }
    let variant = match raw.variant {
        Some(v) => v,
        None => infer_variant(&pairs)?,
    };
    CompoundWiretapSpec::new(variant, pairs)
}

pub fn parse_spec(text: &str) -> Result<CompoundWiretapSpec> {
    spec_from_raw(&parse::<RawSpec>(text)?)
}

pub fn spec_to_raw(spec: &CompoundWiretapSpec) -> RawSpec {
    RawSpec {
        variant: Some(spec.variant()),
        theta: spec
            .pairs()
            .iter()
            .map(|p| RawPair { t: p.name.clone(), legit: channel_to_raw(&p.legit), wiretap: channel_to_raw(&p.wiretap) })
            .collect(),
    }
}

fn as_isometry(ch: Channel, path: &str) -> Result<StinespringIsometry> {
    match ch {
        Channel::Stinespring(s) => Ok(s),
        Channel::Kraus(k) => Ok(kraus_to_stinespring(&k)),
        other => Err(QwkError::VariantMismatch(format!("{path}: expected a quantum channel, found `{}`", other.kind()))),
    }
}

pub fn family_from_raw(raw: &RawFamily) -> Result<Family> {
    if raw.family.is_empty() {
        return Err(QwkError::Schema("family: must be non-empty".into()));
    }
    let mut members = Vec::with_capacity(raw.family.len());
    for (i, m) in raw.family.iter().enumerate() {
        let path = format!("family[{i}].channel");
        members.push(as_isometry(channel_from_raw(&m.channel, &path)?, &path)?);
    }
    let basis = raw.basis.as_ref().map(|b| matrix_from_raw(b, "basis")).transpose()?;
    Ok(Family { names: raw.family.iter().map(|m| m.t.clone()).collect(), members, prior: raw.prior.clone(), basis })
}

/// A family file, or a quantum wiretap spec whose legitimate channels form the family.
pub fn parse_family(text: &str) -> Result<Family> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| QwkError::Schema(e.to_string()))?;
    if value.get("theta").is_some() {
        let spec = spec_from_raw(&serde_json::from_value(value).map_err(|e| QwkError::Schema(e.to_string()))?)?;
        let mut members = Vec::with_capacity(spec.len());
        for (i, p) in spec.pairs().iter().enumerate() {
            members.push(as_isometry(p.legit.clone(), &format!("theta[{i}].W"))?);
        }
        return Ok(Family { names: spec.pairs().iter().map(|p| p.name.clone()).collect(), members, prior: None, basis: None });
    }
    family_from_raw(&serde_json::from_value(value).map_err(|e| QwkError::Schema(e.to_string()))?)
}

pub fn family_to_raw(names: &[String], members: &[StinespringIsometry]) -> RawFamily {
    RawFamily {
        family: names
            .iter()
            .zip(members)
            .map(|(t, s)| RawMember { t: t.clone(), channel: channel_to_raw(&Channel::Stinespring(s.clone())) })
            .collect(),
        prior: None,
        basis: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BSC_PAIR: &str = r#"{"theta": [{"t": "t0",
        "W": {"kind": "stochastic", "matrix": [[0.9, 0.1], [0.1, 0.9]]},
        "V": {"kind": "stochastic", "matrix": [[0.7, 0.3], [0.3, 0.7]]}}]}"#;

    #[test]
    fn classical_spec_parses() {
        let s = parse_spec(BSC_PAIR).unwrap();
        assert_eq!(s.variant(), Variant::Classical);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn round_trip() {
        let s = parse_spec(BSC_PAIR).unwrap();
        let text = serde_json::to_string(&spec_to_raw(&s)).unwrap();
        assert_eq!(parse_spec(&text).unwrap(), s);
    }

    #[test]
    fn cq_states_as_map() {
        let text = r#"{"theta": [{"t": "a",
            "W": {"kind": "stochastic", "matrix": [[1, 0], [0, 1]]},
            "V": {"kind": "cq", "states": {"1": [[0, 0], [0, 1]], "0": [[[1, 0], [0, 0]], [0, 0]]}}}]}"#;
        let s = parse_spec(text).unwrap();
        assert_eq!(s.variant(), Variant::ClassicalQuantumWiretap);
    }

    #[test]
    fn errors_name_the_field() {
        let missing = r#"{"theta": [{"t": "a", "W": {"kind": "stochastic", "matrix": [[1.0]]}}]}"#;
        assert!(matches!(parse_spec(missing), Err(QwkError::Schema(m)) if m.contains("`V`")));
        let bad = BSC_PAIR.replace("0.9, 0.1", "0.9, 0.2");
        assert!(matches!(parse_spec(&bad), Err(QwkError::Schema(m)) if m.contains("theta[0].W")));
        assert!(matches!(parse_spec("{"), Err(QwkError::Schema(_))));
        let wrong = BSC_PAIR.replace(r#"{"theta""#, r#"{"variant": "quantum", "theta""#);
        assert!(matches!(parse_spec(&wrong), Err(QwkError::VariantMismatch(_))));
    }

    #[test]
    fn family_from_kraus_and_spec() {
        let text = r#"{"family": [{"t": "id", "channel": {"kind": "kraus", "ops": [[[1, 0], [0, 1]]]}}]}"#;
        let f = parse_family(text).unwrap();
        assert_eq!(f.members[0].d_env(), 1);
        assert!(matches!(parse_family(BSC_PAIR), Err(QwkError::VariantMismatch(_))));
        let back = serde_json::to_string(&family_to_raw(&f.names, &f.members)).unwrap();
        assert_eq!(parse_family(&back).unwrap().members, f.members);
    }
}
