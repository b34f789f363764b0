//! Assessment settings carried by a document, with CLI-level overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::PatternKind;
use crate::opinion::DEFAULT_DOGMATIC_GAMMA;
use crate::source::{DirectOpinion, EdgeConditionals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    /// Keep framed claims conditional on their assumptions.
    Conditional,
    /// Consume assumptions by deduction at the element they frame.
    Marginalize,
}

/// Base rate an aggregate carries into its deduction step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateBaseRate {
    DefaultReset,
    Composed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub prior_weight: f64,
    pub default_base_rate: f64,
    pub context_mode: ContextMode,
    pub aggregate_base_rate: AggregateBaseRate,
    pub implicit_pattern: PatternKind,
    pub allow_implicit_pattern: bool,
    pub dogmatic_gamma: f64,
    pub default_conditionals: Option<EdgeConditionals>,
    pub qualitative_scale: BTreeMap<String, DirectOpinion>,
    pub display_precision: u32,
}

pub fn default_qualitative_scale() -> BTreeMap<String, DirectOpinion> {
    [
        ("very-high", 0.90, 0.02, 0.08),
        ("high", 0.80, 0.10, 0.10),
        ("medium", 0.60, 0.20, 0.20),
        ("low", 0.40, 0.40, 0.20),
        ("very-low", 0.20, 0.60, 0.20),
    ]
    .into_iter()
    .map(|(k, b, d, u)| (k.to_string(), DirectOpinion::new(b, d, u, None).expect("valid scale entry")))
    .collect()
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            prior_weight: 2.0,
            default_base_rate: 0.5,
            context_mode: ContextMode::Marginalize,
            aggregate_base_rate: AggregateBaseRate::DefaultReset,
            implicit_pattern: PatternKind::Conjunction,
            allow_implicit_pattern: true,
            dogmatic_gamma: DEFAULT_DOGMATIC_GAMMA,
            default_conditionals: None,
            qualitative_scale: default_qualitative_scale(),
            display_precision: 2,
        }
    }
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default_base_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context_mode: Option<ContextMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aggregate_base_rate: Option<AggregateBaseRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    implicit_pattern: Option<PatternKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allow_implicit_pattern: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dogmatic_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default_conditionals: Option<EdgeConditionals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qualitative_scale: Option<BTreeMap<String, DirectOpinion>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    display_precision: Option<u32>,
}

impl TryFrom<RawSettings> for Settings {
    type Error = String;

    fn try_from(raw: RawSettings) -> Result<Self, Self::Error> {
        let d = Settings::default();
        let mut scale = d.qualitative_scale;
        scale.extend(raw.qualitative_scale.unwrap_or_default());
        let s = Settings {
            prior_weight: raw.prior_weight.unwrap_or(d.prior_weight),
            default_base_rate: raw.default_base_rate.unwrap_or(d.default_base_rate),
            context_mode: raw.context_mode.unwrap_or(d.context_mode),
            aggregate_base_rate: raw.aggregate_base_rate.unwrap_or(d.aggregate_base_rate),
            implicit_pattern: raw.implicit_pattern.unwrap_or(d.implicit_pattern),
            allow_implicit_pattern: raw.allow_implicit_pattern.unwrap_or(d.allow_implicit_pattern),
            dogmatic_gamma: raw.dogmatic_gamma.unwrap_or(d.dogmatic_gamma),
            default_conditionals: raw.default_conditionals,
            qualitative_scale: scale,
            display_precision: raw.display_precision.unwrap_or(d.display_precision),
        };
        s.check()?;
        Ok(s)
    }
}

impl From<&Settings> for RawSettings {
    fn from(s: &Settings) -> Self {
        let d = Settings::default();
        fn differs<T: PartialEq + Clone>(v: &T, default: &T) -> Option<T> {
            (v != default).then(|| v.clone())
        }
        let scale: BTreeMap<_, _> = s
            .qualitative_scale
            .iter()
            .filter(|(k, v)| d.qualitative_scale.get(*k) != Some(*v))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        RawSettings {
            prior_weight: differs(&s.prior_weight, &d.prior_weight),
            default_base_rate: differs(&s.default_base_rate, &d.default_base_rate),
            context_mode: differs(&s.context_mode, &d.context_mode),
            aggregate_base_rate: differs(&s.aggregate_base_rate, &d.aggregate_base_rate),
            implicit_pattern: differs(&s.implicit_pattern, &d.implicit_pattern),
            allow_implicit_pattern: differs(&s.allow_implicit_pattern, &d.allow_implicit_pattern),
            dogmatic_gamma: differs(&s.dogmatic_gamma, &d.dogmatic_gamma),
            default_conditionals: s.default_conditionals,
            qualitative_scale: (!scale.is_empty()).then_some(scale),
            display_precision: differs(&s.display_precision, &d.display_precision),
        }
    }
}

impl Serialize for Settings {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawSettings::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Settings {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawSettings::deserialize(deserializer)?;
        Settings::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl Settings {
    pub fn check(&self) -> Result<(), String> {
        if !(self.prior_weight.is_finite() && self.prior_weight > 0.0) {
            return Err(format!("prior_weight must be positive, got {}", self.prior_weight));
        }
        if !(0.0..=1.0).contains(&self.default_base_rate) {
            return Err(format!("default_base_rate must lie in [0, 1], got {}", self.default_base_rate));
        }
        if !(0.0..=1.0).contains(&self.dogmatic_gamma) {
            return Err(format!("dogmatic_gamma must lie in [0, 1], got {}", self.dogmatic_gamma));
        }
        if let Some(c) = &self.default_conditionals {
            if !c.is_complete() {
                return Err("default_conditionals needs both pos and neg".into());
            }
            if let Some(a) = c.base_rate {
                if !(0.0..=1.0).contains(&a) {
                    return Err(format!("default_conditionals.base_rate must lie in [0, 1], got {a}"));
                }
            }
        }
        if self.display_precision > 12 {
            return Err(format!("display_precision must be at most 12, got {}", self.display_precision));
        }
        Ok(())
    }

    pub fn apply(&self, overrides: &SettingsOverrides) -> Settings {
        let mut s = self.clone();
        if let Some(m) = overrides.context_mode {
            s.context_mode = m;
        }
        if let Some(m) = overrides.aggregate_base_rate {
            s.aggregate_base_rate = m;
        }
        if let Some(p) = overrides.display_precision {
            s.display_precision = p;
        }
        if let Some(w) = overrides.prior_weight {
            s.prior_weight = w;
        }
        s
    }
}

/// Per-invocation deltas applied on top of a document's settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SettingsOverrides {
    pub context_mode: Option<ContextMode>,
    pub aggregate_base_rate: Option<AggregateBaseRate>,
    pub display_precision: Option<u32>,
    pub prior_weight: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_serialize_empty() {
        assert_eq!(serde_json::to_string(&Settings::default()).unwrap(), "{}");
        let s: Settings = serde_json::from_str("{}").unwrap();
        assert_eq!(s, Settings::default());
    }

    #[test]
    fn scale_entries_merge_with_defaults() {
        let s: Settings =
            serde_json::from_str(r#"{"qualitative_scale":{"certain":{"b":1,"d":0,"u":0}}}"#).unwrap();
        assert!(s.qualitative_scale.contains_key("certain"));
        assert!(s.qualitative_scale.contains_key("medium"));
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"qualitative_scale":{"certain":{"b":1.0,"d":0.0,"u":0.0}}}"#);
    }

    #[test]
    fn out_of_range_values_rejected() {
        for text in [
            r#"{"prior_weight":0}"#,
            r#"{"default_base_rate":1.5}"#,
            r#"{"dogmatic_gamma":-0.1}"#,
            r#"{"context_mode":"sometimes"}"#,
            r#"{"default_conditionals":{"pos":{"b":1,"d":0,"u":0}}}"#,
            r#"{"unknown":1}"#,
        ] {
            assert!(serde_json::from_str::<Settings>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn overrides_apply() {
        let o = SettingsOverrides { context_mode: Some(ContextMode::Conditional), ..Default::default() };
        assert_eq!(Settings::default().apply(&o).context_mode, ContextMode::Conditional);
    }
}
