use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

/// Ground-truth joints below this confidence are ignored by the metrics.
pub const CONFIDENCE_FLOOR: f64 = 0.3;

/// One joint. Serialized as the JSON array `[x, y, confidence]`; `visible`
/// is restored as `confidence > 0` on load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint<T> {
    pub x: T,
    pub y: T,
    pub confidence: T,
    pub visible: bool,
}

impl<T: Scalar> Keypoint<T> {
    pub fn new(x: T, y: T, confidence: T) -> Self {
        let confidence = confidence.max(T::zero()).min(T::one());
        Self {
            x,
            y,
            confidence,
            visible: confidence > T::zero(),
        }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl<T: Scalar + Serialize> Serialize for Keypoint<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(3)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.serialize_element(&self.confidence)?;
        t.end()
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Keypoint<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(std::marker::PhantomData<T>);
        impl<'de, T: Scalar + Deserialize<'de>> Visitor<'de> for V<T> {
            type Value = Keypoint<T>;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("[x, y, confidence]")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let x: T = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let y: T = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let c: T = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(2, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                if !(c >= T::zero() && c <= T::one()) {
                    return Err(de::Error::custom("confidence outside [0, 1]"));
                }
                Ok(Keypoint::new(x, y, c))
            }
        }
        d.deserialize_tuple(3, V(std::marker::PhantomData))
    }
}

/// All joints of one instance in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct Keypoints<T> {
    pub points: Vec<Keypoint<T>>,
}

impl<T: Scalar> Keypoints<T> {
    pub fn new(points: Vec<Keypoint<T>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Flattened `[x0, y0, x1, y1, ...]`, used for trajectory diagnostics.
    pub fn flat_coords(&self) -> Vec<T> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn map_points(&self, mut f: impl FnMut(T, T) -> (T, T)) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| {
                    let (x, y) = f(p.x, p.y);
                    Keypoint { x, y, ..*p }
                })
                .collect(),
        }
    }
}

/// Joint names plus drawing edges. Declared in the benchmark manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    pub name: String,
    pub joints: Vec<String>,
    pub edges: Vec<[usize; 2]>,
}

impl Skeleton {
    /// 17-joint quadruped layout used by common animal keypoint estimators.
    pub fn quadruped17() -> Self {
        let joints = [
            "left_eye",
            "right_eye",
            "nose",
            "neck",
            "tail_root",
            "left_shoulder",
            "left_elbow",
            "left_front_paw",
            "right_shoulder",
            "right_elbow",
            "right_front_paw",
            "left_hip",
            "left_knee",
            "left_back_paw",
            "right_hip",
            "right_knee",
            "right_back_paw",
        ];
        let edges = vec![
            [0, 1],
            [0, 2],
            [1, 2],
            [2, 3],
            [3, 4],
            [3, 5],
            [5, 6],
            [6, 7],
            [3, 8],
            [8, 9],
            [9, 10],
            [4, 11],
            [11, 12],
            [12, 13],
            [4, 14],
            [14, 15],
            [15, 16],
        ];
        Self {
            name: "quadruped17".into(),
            joints: joints.iter().map(|s| s.to_string()).collect(),
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_triplet_array() {
        let k = Keypoints::new(vec![Keypoint::new(1.5, 2.0, 0.9), Keypoint::new(0.0, 0.0, 0.0)]);
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, "[[1.5,2.0,0.9],[0.0,0.0,0.0]]");
        let back: Keypoints<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
        assert!(!back.points[1].visible);
    }

    #[test]
    fn rejects_bad_confidence() {
        assert!(serde_json::from_str::<Keypoints<f64>>("[[1,2,1.5]]").is_err());
        assert!(serde_json::from_str::<Keypoints<f64>>("[[1,2]]").is_err());
    }

    #[test]
    fn quadruped_edges_are_in_range() {
        let s = Skeleton::quadruped17();
        assert_eq!(s.len(), 17);
        assert!(s.edges.iter().all(|[a, b]| *a < 17 && *b < 17));
    }
}
