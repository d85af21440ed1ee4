//! Machine-readable report documents emitted by the CLI. All numeric
//! payloads are decimal strings: JSON numbers lose precision past 2^53 and
//! the certificate DAG routinely carries larger entries.

use crate::decompose::{ArtinWitness, Decomposition, NormalForm};
use crate::error::{Error, Result};
use crate::kb::{Certificate, CertKey, GeneratorWord, KnowledgeBase, Pairing, Reason, SeedName, Slot};
use crate::mat2::Mat2;
use crate::subgroups::LElementDescriptor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Membership flags returned by `member`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MemberDoc {
    pub gamma0: bool,
    pub gamma02: bool,
    #[serde(rename = "G02")]
    pub g02: bool,
    #[serde(rename = "L02")]
    pub l02: bool,
}

/// Wire form of a certificate reason.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind")]
pub enum ReasonDoc {
    #[serde(rename = "seed")]
    Seed { name: String },
    #[serde(rename = "word")]
    Word { tokens: GeneratorWord },
    #[serde(rename = "base-M2")]
    BaseM2,
    #[serde(rename = "process-step")]
    ProcessStep {
        parent: String,
        pairing: String,
        slot: u8,
        pre: GeneratorWord,
        post: GeneratorWord,
    },
}

impl From<&Reason> for ReasonDoc {
    fn from(r: &Reason) -> Self {
        match r {
            Reason::Seed(SeedName::T) => ReasonDoc::Seed { name: "T".into() },
            Reason::Seed(SeedName::W) => ReasonDoc::Seed { name: "W".into() },
            Reason::Word(w) => ReasonDoc::Word { tokens: w.clone() },
            Reason::BaseM2 => ReasonDoc::BaseM2,
            Reason::ProcessStep {
                parent,
                pairing,
                slot,
                pre,
                post,
            } => ReasonDoc::ProcessStep {
                parent: parent.to_string(),
                pairing: match pairing {
                    Pairing::P1 => "P1".into(),
                    Pairing::P2 => "P2".into(),
                },
                slot: match slot {
                    Slot::First => 1,
                    Slot::Second => 2,
                },
                pre: pre.clone(),
                post: post.clone(),
            },
        }
    }
}

impl ReasonDoc {
    pub fn to_reason(&self) -> Result<Reason> {
        Ok(match self {
            ReasonDoc::Seed { name } => match name.as_str() {
                "T" => Reason::Seed(SeedName::T),
                "W" => Reason::Seed(SeedName::W),
                other => return Err(Error::Parse(format!("unknown seed name {other:?}"))),
            },
            ReasonDoc::Word { tokens } => Reason::Word(tokens.clone()),
            ReasonDoc::BaseM2 => Reason::BaseM2,
            ReasonDoc::ProcessStep {
                parent,
                pairing,
                slot,
                pre,
                post,
            } => Reason::ProcessStep {
                parent: CertKey(parent.clone()),
                pairing: match pairing.as_str() {
                    "P1" => Pairing::P1,
                    "P2" => Pairing::P2,
                    other => return Err(Error::Parse(format!("unknown pairing {other:?}"))),
                },
                slot: match slot {
                    1 => Slot::First,
                    2 => Slot::Second,
                    other => return Err(Error::Parse(format!("unknown slot {other}"))),
                },
                pre: pre.clone(),
                post: post.clone(),
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CertificateDoc {
    pub key: String,
    pub matrix: Mat2,
    pub reason: ReasonDoc,
}

impl CertificateDoc {
    pub fn from_certificate(cert: &Certificate) -> Self {
        CertificateDoc {
            key: cert.key().to_string(),
            matrix: cert.matrix.clone(),
            reason: ReasonDoc::from(&cert.reason),
        }
    }

    pub fn to_certificate(&self) -> Result<Certificate> {
        Ok(Certificate {
            matrix: self.matrix.clone(),
            reason: self.reason.to_reason()?,
        })
    }
}

/// The certificate DAG emitted by `process`: every certified descriptor up
/// to the requested level, in canonical key order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificatesDoc {
    pub format: String,
    #[serde(rename = "N")]
    pub level: String,
    pub epsilon: i32,
    pub n_max: u64,
    pub certificate_count: usize,
    pub half_level_adjustments: u64,
    pub certificates: Vec<CertificateDoc>,
}

pub const CERTIFICATES_FORMAT: &str = "gamma02.certificates/1";

impl CertificatesDoc {
    pub fn from_enumeration(
        kb: &KnowledgeBase,
        map: &BTreeMap<LElementDescriptor, CertKey>,
        n_max: u64,
    ) -> Self {
        let mut docs: Vec<CertificateDoc> = map
            .values()
            .filter_map(|key| kb.get(key))
            .map(CertificateDoc::from_certificate)
            .collect();
        docs.sort_by(|a, b| a.key.cmp(&b.key));
        docs.dedup_by(|a, b| a.key == b.key);
        CertificatesDoc {
            format: CERTIFICATES_FORMAT.into(),
            level: kb.ctx().level().to_string(),
            epsilon: kb.ctx().epsilon(),
            n_max,
            certificate_count: docs.len(),
            half_level_adjustments: kb.half_level_adjustments(),
            certificates: docs,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalFormDoc {
    pub k: String,
    pub delta1: Mat2,
    pub delta2: Mat2,
    pub l: String,
}

impl From<&NormalForm> for NormalFormDoc {
    fn from(nf: &NormalForm) -> Self {
        NormalFormDoc {
            k: nf.w_left.to_string(),
            delta1: nf.delta1.clone(),
            delta2: nf.delta2.clone(),
            l: nf.w_right.to_string(),
        }
    }
}

/// Result document of `decompose`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeDoc {
    #[serde(rename = "N")]
    pub level: String,
    pub matrix: Mat2,
    pub word: GeneratorWord,
    pub normal_form: NormalFormDoc,
    pub verified: bool,
}

impl DecomposeDoc {
    pub fn new(level: i64, matrix: &Mat2, dec: &Decomposition, verified: bool) -> Self {
        DecomposeDoc {
            level: level.to_string(),
            matrix: matrix.clone(),
            word: dec.word.clone(),
            normal_form: NormalFormDoc::from(&dec.normal_form),
            verified,
        }
    }
}

/// Result document of `artin`: a verified witness or an exhaustion report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArtinDoc {
    Witness {
        d: String,
        b: String,
        #[serde(rename = "M")]
        m: String,
        k: String,
        n: String,
        verified: bool,
    },
    Exhausted {
        error: String,
        what: String,
        bounds: String,
    },
}

impl ArtinDoc {
    pub fn witness(w: &ArtinWitness) -> Self {
        ArtinDoc::Witness {
            d: w.d.to_string(),
            b: w.b.to_string(),
            m: w.m.to_string(),
            k: w.k.to_string(),
            n: w.n.to_string(),
            verified: w.verify(),
        }
    }

    pub fn exhausted(what: String, bounds: String) -> Self {
        ArtinDoc::Exhausted {
            error: "search-exhausted".into(),
            what,
            bounds,
        }
    }
}

/// Result document of `expand2`.
#[derive(Debug, Clone, Serialize)]
pub struct Expand2Doc {
    pub gamma: Mat2,
    pub delta: Mat2,
    pub terms: crate::sum::FormalSum,
}

/// One named check in an audit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditCheckDoc {
    pub name: String,
    pub passed: u64,
    pub failed: u64,
}

/// Result document of `audit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditDoc {
    pub seed: String,
    pub levels: Vec<String>,
    pub n_max: u64,
    pub trials: u64,
    pub checks: Vec<AuditCheckDoc>,
    pub failures: Vec<String>,
    pub ok: bool,
}

/// Stable serialization: compact JSON plus a trailing newline.
pub fn to_json_bytes<T: Serialize>(doc: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::seed_kb;
    use crate::mat2::LevelContext;
    use crate::process::enumerate_certified_l;

    #[test]
    fn certificate_docs_round_trip() {
        let ctx = LevelContext::new(3, 1).unwrap();
        let mut kb = seed_kb(&ctx);
        let map = enumerate_certified_l(&mut kb, 2).unwrap();
        let doc = CertificatesDoc::from_enumeration(&kb, &map, 2);
        assert_eq!(doc.certificate_count, 6);
        let bytes = to_json_bytes(&doc).unwrap();
        let parsed: CertificatesDoc = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(parsed.certificate_count, 6);
        for (a, b) in doc.certificates.iter().zip(parsed.certificates.iter()) {
            assert_eq!(a, b);
            let cert = b.to_certificate().unwrap();
            assert_eq!(cert.matrix.key(), b.key);
        }
    }

    #[test]
    fn member_doc_shape() {
        let doc = MemberDoc {
            gamma0: true,
            gamma02: false,
            g02: false,
            l02: false,
        };
        let v = serde_json::to_value(&doc).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"gamma0":true,"gamma02":false,"G02":false,"L02":false})
        );
    }
}
