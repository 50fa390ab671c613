use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::JointVector;

/// Open and closed hand postures; grip openings interpolate between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandKeyframes {
    pub id: String,
    pub joints: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub open: Vec<f64>,
    pub closed: Vec<f64>,
}

impl HandKeyframes {
    pub fn validate(&self) -> Result<()> {
        let n = self.joints.len();
        if n == 0 {
            return Err(Error::InvalidConfig(format!("hand `{}` has no joints", self.id)));
        }
        for (name, v) in [
            ("lower", &self.lower),
            ("upper", &self.upper),
            ("open", &self.open),
            ("closed", &self.closed),
        ] {
            if v.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "hand `{}`: `{name}` has {} entries, expected {n}",
                    self.id,
                    v.len()
                )));
            }
        }
        for i in 0..n {
            if !(self.lower[i] < self.upper[i]) {
                return Err(Error::InvalidConfig(format!(
                    "hand `{}`: joint `{}` has empty limits",
                    self.id, self.joints[i]
                )));
            }
            for (name, v) in [("open", self.open[i]), ("closed", self.closed[i])] {
                if v < self.lower[i] || v > self.upper[i] {
                    return Err(Error::InvalidConfig(format!(
                        "hand `{}`: {name} posture of `{}` ({v}) is outside its limits",
                        self.id, self.joints[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.lower.len()
            && q.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }
}

/// Per-joint linear blend: 0 gives the closed posture, 1 the open one.
pub fn map_gripper(opening: f64, keyframes: &HandKeyframes) -> Result<JointVector> {
    if !(0.0..=1.0).contains(&opening) {
        return Err(Error::Validation(format!("grip opening {opening} outside [0, 1]")));
    }
    let values = keyframes
        .closed
        .iter()
        .zip(&keyframes.open)
        .map(|(c, o)| if opening == 1.0 { *o } else { c + (o - c) * opening })
        .collect();
    Ok(JointVector::new(keyframes.id.clone(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand() -> HandKeyframes {
        HandKeyframes {
            id: "h".into(),
            joints: vec!["a".into(), "b".into()],
            lower: vec![-1.0, 0.0],
            upper: vec![1.0, 2.0],
            open: vec![0.0, 0.1],
            closed: vec![0.8, 1.9],
        }
    }

    #[test]
    fn endpoints_and_midpoint() {
        let k = hand();
        k.validate().unwrap();
        assert_eq!(map_gripper(1.0, &k).unwrap().values, k.open);
        assert_eq!(map_gripper(0.0, &k).unwrap().values, k.closed);
        let mid = map_gripper(0.5, &k).unwrap().values;
        assert!((mid[0] - 0.4).abs() < 1e-15 && (mid[1] - 1.0).abs() < 1e-15);
        assert!(map_gripper(1.2, &k).is_err());
        assert!(map_gripper(-0.1, &k).is_err());
    }

    #[test]
    fn rejects_keyframe_outside_limits() {
        let mut k = hand();
        k.closed[1] = 2.5;
        assert!(k.validate().is_err());
    }
}
