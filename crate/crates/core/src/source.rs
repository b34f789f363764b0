//! Opinion spellings accepted in argument documents.

use serde::{Deserialize, Serialize};

use crate::opinion::{self, ConditionalPair, EvidenceCount, Opinion, OpinionError};
use crate::settings::Settings;

/// `(b, d, u)` with an optional base rate; the base rate falls back to the
/// document default when resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDirect", into = "RawDirect")]
pub struct DirectOpinion {
    pub b: f64,
    pub d: f64,
    pub u: f64,
    pub a: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirect {
    b: f64,
    d: f64,
    u: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
}

impl TryFrom<RawDirect> for DirectOpinion {
    type Error = OpinionError;
    fn try_from(raw: RawDirect) -> Result<Self, Self::Error> {
        DirectOpinion::new(raw.b, raw.d, raw.u, raw.a)
    }
}

impl From<DirectOpinion> for RawDirect {
    fn from(o: DirectOpinion) -> Self {
        RawDirect { b: o.b, d: o.d, u: o.u, a: o.a }
    }
}

impl DirectOpinion {
    pub fn new(b: f64, d: f64, u: f64, a: Option<f64>) -> Result<Self, OpinionError> {
        let o = Opinion::new(b, d, u, a.unwrap_or(0.5))?;
        Ok(DirectOpinion { b: o.b(), d: o.d(), u: o.u(), a: a.map(|_| o.a()) })
    }

    pub fn resolve(&self, default_base_rate: f64) -> Result<Opinion, OpinionError> {
        Opinion::new(self.b, self.d, self.u, self.a.unwrap_or(default_base_rate))
    }

    /// Drops a base rate equal to the default, the canonical form.
    pub(crate) fn canonical(mut self, default_base_rate: f64) -> Self {
        if self.a == Some(default_base_rate) {
            self.a = None;
        }
        self
    }
}

impl From<Opinion> for DirectOpinion {
    fn from(o: Opinion) -> Self {
        DirectOpinion { b: o.b(), d: o.d(), u: o.u(), a: Some(o.a()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceSpec {
    pub r: f64,
    pub s: f64,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

/// Where an input opinion comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSource", into = "RawSource")]
pub enum OpinionSource {
    Direct(DirectOpinion),
    Evidence(EvidenceSpec),
    Qualitative(String),
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evidence: Option<EvidenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qualitative: Option<String>,
}

impl TryFrom<RawSource> for OpinionSource {
    type Error = String;
    fn try_from(raw: RawSource) -> Result<Self, Self::Error> {
        let direct = raw.b.is_some() || raw.d.is_some() || raw.u.is_some() || raw.a.is_some();
        match (direct, raw.evidence, raw.qualitative) {
            (true, None, None) => match (raw.b, raw.d, raw.u) {
                (Some(b), Some(d), Some(u)) => DirectOpinion::new(b, d, u, raw.a)
                    .map(OpinionSource::Direct)
                    .map_err(|e| e.to_string()),
                _ => Err("direct opinion needs all of b, d and u".into()),
            },
            (false, Some(e), None) => Ok(OpinionSource::Evidence(e)),
            (false, None, Some(level)) => Ok(OpinionSource::Qualitative(level)),
            (false, None, None) => {
                Err("expected an opinion: {b,d,u,a?}, {evidence:{r,s,W?,a?}} or {qualitative: level}".into())
            }
            _ => Err("opinion source mixes several spellings".into()),
        }
    }
}

impl From<OpinionSource> for RawSource {
    fn from(s: OpinionSource) -> Self {
        match s {
            OpinionSource::Direct(o) => RawSource { b: Some(o.b), d: Some(o.d), u: Some(o.u), a: o.a, ..Default::default() },
            OpinionSource::Evidence(e) => RawSource { evidence: Some(e), ..Default::default() },
            OpinionSource::Qualitative(q) => RawSource { qualitative: Some(q), ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SourceError {
    #[error("unknown qualitative level {0:?}")]
    UnknownLevel(String),
    #[error(transparent)]
    Opinion(#[from] OpinionError),
}

impl OpinionSource {
    pub fn resolve(&self, settings: &Settings) -> Result<Opinion, SourceError> {
        match self {
            OpinionSource::Direct(o) => Ok(o.resolve(settings.default_base_rate)?),
            OpinionSource::Evidence(e) => {
                let ev = EvidenceCount::new(
                    e.r,
                    e.s,
                    e.weight.unwrap_or(settings.prior_weight),
                    e.a.unwrap_or(settings.default_base_rate),
                )?;
                Ok(opinion::from_evidence(&ev)?)
            }
            OpinionSource::Qualitative(level) => settings
                .qualitative_scale
                .get(level)
                .ok_or_else(|| SourceError::UnknownLevel(level.clone()))?
                .resolve(settings.default_base_rate)
                .map_err(SourceError::from),
        }
    }

    pub(crate) fn canonical(self, default_base_rate: f64) -> Self {
        match self {
            OpinionSource::Direct(o) => OpinionSource::Direct(o.canonical(default_base_rate)),
            OpinionSource::Evidence(mut e) => {
                if e.a == Some(default_base_rate) {
                    e.a = None;
                }
                OpinionSource::Evidence(e)
            }
            other => other,
        }
    }
}

impl From<Opinion> for OpinionSource {
    fn from(o: Opinion) -> Self {
        OpinionSource::Direct(o.into())
    }
}

/// Conditionals as written on an edge. Support edges need both opinions;
/// context edges may omit either and fall back to engine defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConditionals {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<DirectOpinion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg: Option<DirectOpinion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_rate: Option<f64>,
}

impl EdgeConditionals {
    pub fn pair(pos: DirectOpinion, neg: DirectOpinion) -> Self {
        EdgeConditionals { pos: Some(pos), neg: Some(neg), base_rate: None }
    }

    pub fn is_complete(&self) -> bool {
        self.pos.is_some() && self.neg.is_some()
    }

    /// Resolves a complete pair; `None` when either side is missing.
    pub fn to_pair(&self, default_base_rate: f64) -> Option<Result<ConditionalPair, OpinionError>> {
        let (pos, neg) = (self.pos?, self.neg?);
        Some(self.build(pos, neg, default_base_rate))
    }

    /// Resolves with explicit fallbacks for missing sides.
    pub fn to_pair_with(
        &self,
        pos: DirectOpinion,
        neg: DirectOpinion,
        default_base_rate: f64,
    ) -> Result<ConditionalPair, OpinionError> {
        self.build(self.pos.unwrap_or(pos), self.neg.unwrap_or(neg), default_base_rate)
    }

    fn build(&self, pos: DirectOpinion, neg: DirectOpinion, default_base_rate: f64) -> Result<ConditionalPair, OpinionError> {
        let pair = ConditionalPair::new(pos.resolve(default_base_rate)?, neg.resolve(default_base_rate)?);
        match self.base_rate {
            Some(a) => pair.with_base_rate(a),
            None => Ok(pair),
        }
    }

    pub(crate) fn canonical(self, default_base_rate: f64) -> Self {
        EdgeConditionals {
            pos: self.pos.map(|o| o.canonical(default_base_rate)),
            neg: self.neg.map(|o| o.canonical(default_base_rate)),
            base_rate: self.base_rate,
        }
    }
}
