use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::StoreError;

pub type Metadata = Map<String, Value>;

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = StoreError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(StoreError::Parse(format!(
                        concat!("unknown ", stringify!($name), " '{}'"), other
                    ))),
                }
            }
        }
    };
}

text_enum!(Kind {
    Video => "video",
    Clip => "clip",
    Track => "track",
});

text_enum!(Stage {
    Collect => "collect",
    Preprocess => "preprocess",
    Track => "track",
    Feature => "feature",
    Review => "review",
});

text_enum!(Status {
    Unprocessed => "unprocessed",
    Processing => "processing",
    Completed => "completed",
    Discarded => "discarded",
});

text_enum!(Outcome {
    Completed => "completed",
    Discarded => "discarded",
});

text_enum!(Decision {
    Accept => "accept",
    Reject => "reject",
});

impl Outcome {
    pub fn status(self) -> Status {
        match self {
            Outcome::Completed => Status::Completed,
            Outcome::Discarded => Status::Discarded,
        }
    }
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Completed | Status::Discarded)
    }
}

/// A unit of work for one stage. Keyed by `(stage, id)`: the same track id
/// appears once at `feature` and once at `review`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkItem {
    pub id: String,
    pub kind: Kind,
    pub stage: Stage,
    pub status: Status,
    pub lease_owner: Option<String>,
    /// UTC seconds; set exactly while `status == processing`.
    pub lease_expiry: Option<f64>,
    pub payload_path: String,
    pub metadata: Metadata,
    pub attempts: u32,
    pub created_at: f64,
    pub updated_at: f64,
}

impl WorkItem {
    /// A fresh, unprocessed item.
    pub fn new(id: impl Into<String>, kind: Kind, stage: Stage, payload_path: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            stage,
            status: Status::Unprocessed,
            lease_owner: None,
            lease_expiry: None,
            payload_path: payload_path.into(),
            metadata: Metadata::new(),
            attempts: 0,
            created_at: 0.0,
            updated_at: 0.0,
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn category(&self) -> Option<&str> {
        self.metadata.get("category").and_then(Value::as_str)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.metadata.get(key).and_then(Value::as_f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

/// Predicate on one metadata key. Numeric comparisons need a numeric value
/// on both sides; `Eq` compares any JSON value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaPredicate {
    pub key: String,
    pub op: CompareOp,
    pub value: Value,
}

impl MetaPredicate {
    pub fn new(key: &str, op: CompareOp, value: impl Into<Value>) -> Self {
        Self {
            key: key.to_string(),
            op,
            value: value.into(),
        }
    }

    pub fn matches(&self, meta: &Metadata) -> bool {
        let Some(have) = meta.get(&self.key) else {
            return false;
        };
        if self.op == CompareOp::Eq {
            return match (have.as_f64(), self.value.as_f64()) {
                (Some(a), Some(b)) => a == b,
                _ => have == &self.value,
            };
        }
        let (Some(a), Some(b)) = (have.as_f64(), self.value.as_f64()) else {
            return false;
        };
        match self.op {
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Gt => a > b,
            CompareOp::Ge => a >= b,
            CompareOp::Eq => unreachable!(),
        }
    }
}

impl FromStr for MetaPredicate {
    type Err = StoreError;

    /// Parses `key>=1.5`, `key==horse` and friends.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        for (tok, op) in [
            (">=", CompareOp::Ge),
            ("<=", CompareOp::Le),
            ("==", CompareOp::Eq),
            (">", CompareOp::Gt),
            ("<", CompareOp::Lt),
        ] {
            if let Some((k, v)) = s.split_once(tok) {
                let value = serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.trim().to_string()));
                return Ok(Self {
                    key: k.trim().to_string(),
                    op,
                    value,
                });
            }
        }
        Err(StoreError::Parse(format!("no comparison operator in '{s}'")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub stage: Option<Stage>,
    pub status: Option<Status>,
    pub kind: Option<Kind>,
    pub category: Option<String>,
    pub predicates: Vec<MetaPredicate>,
}

impl Filter {
    pub fn stage(stage: Stage) -> Self {
        Self {
            stage: Some(stage),
            ..Default::default()
        }
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = Some(status);
        self
    }

    pub fn with_category(mut self, category: &str) -> Self {
        self.category = Some(category.to_string());
        self
    }

    pub fn with_predicate(mut self, p: MetaPredicate) -> Self {
        self.predicates.push(p);
        self
    }

    pub fn matches(&self, item: &WorkItem) -> bool {
        self.stage.is_none_or(|s| s == item.stage)
            && self.status.is_none_or(|s| s == item.status)
            && self.kind.is_none_or(|k| k == item.kind)
            && self.category.as_deref().is_none_or(|c| item.category() == Some(c))
            && self.predicates.iter().all(|p| p.matches(&item.metadata))
    }
}

/// The five acceptance criteria a reviewer checks per track.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewCriteria {
    pub no_heavy_occlusion: bool,
    pub smooth_animal_motion: bool,
    pub smooth_camera_motion: bool,
    pub mask_correct: bool,
    pub keypoints_accurate: bool,
}

impl ReviewCriteria {
    pub fn all() -> Self {
        Self {
            no_heavy_occlusion: true,
            smooth_animal_motion: true,
            smooth_camera_motion: true,
            mask_correct: true,
            keypoints_accurate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationRecord {
    /// Monotone decision order; export takes the earliest accepts first.
    pub seq: i64,
    pub track_id: String,
    pub category: Option<String>,
    pub decision: Decision,
    pub criteria: ReviewCriteria,
    pub reviewer: String,
    pub decided_at: f64,
}
