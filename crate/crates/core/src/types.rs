//! Shared domain types.

use core::fmt;

/// Model-native parameter index. 64 bits so billion-parameter embedding
/// tables index without collision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RawId(pub u64);

/// Rank index of a hot parameter in `[0, M)` where `M` is the number of
/// switch register slots. Rank 0 is the most frequently updated parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MappedId(pub u32);

impl fmt::Display for RawId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for MappedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A parameter key as a worker sees it: the stable model-native id plus,
/// for hot parameters, the rank used to address the switch. Cold keys
/// never carry a mapped id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterKey {
    pub raw_id: RawId,
    pub mapped_id: Option<MappedId>,
}

impl ParameterKey {
    pub fn cold(raw_id: RawId) -> Self {
        Self { raw_id, mapped_id: None }
    }

    pub fn hot(raw_id: RawId, mapped_id: MappedId) -> Self {
        Self { raw_id, mapped_id: Some(mapped_id) }
    }

    pub fn is_hot(&self) -> bool {
        self.mapped_id.is_some()
    }
}

/// One sparse gradient element pushed by a worker, keyed by the
/// model-native parameter id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientUpdate {
    pub raw_id: RawId,
    pub value: f32,
}

impl GradientUpdate {
    /// Rejects NaN/Inf at ingress; zero values are accepted here (the
    /// nonzero filter is a workload-side concern).
    pub fn new(raw_id: RawId, value: f32) -> Result<Self, NonFiniteValue> {
        if value.is_finite() {
            Ok(Self { raw_id, value })
        } else {
            Err(NonFiniteValue { raw_id })
        }
    }
}

/// A hot gradient after index mapping, addressed by rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotUpdate {
    pub id: MappedId,
    pub value: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteValue {
    pub raw_id: RawId,
}

impl fmt::Display for NonFiniteValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gradient for parameter {} is not finite", self.raw_id)
    }
}

impl core::error::Error for NonFiniteValue {}
