use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pchip::pchip_fit;
use crate::data::{AugmentationInfo, Episode};
use crate::error::{Error, Result};
use crate::hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeightAugmentSpec {
    /// Allowed wrist and torso height range (m).
    pub h_range: [f64; 2],
    /// Variants per episode, including the identity variant 0.
    pub variants: usize,
    /// Offset knots per variant, spread evenly over the episode.
    pub knots: usize,
    /// Offsets are drawn uniformly from `[-max_offset, max_offset]` (m).
    pub max_offset: f64,
    /// Vertical distance from the torso reference to the wrist midline (m).
    pub wrist_to_torso: f64,
    pub seed: u64,
}

impl Default for HeightAugmentSpec {
    fn default() -> Self {
        Self {
            h_range: [0.15, 1.25],
            variants: 4,
            knots: 4,
            max_offset: 0.35,
            wrist_to_torso: 0.10,
            seed: 0,
        }
    }
}

impl HeightAugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_range[0] < self.h_range[1]) || self.h_range[0] < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "h_range {:?} is not a valid height interval",
                self.h_range
            )));
        }
        if self.variants == 0 {
            return Err(Error::InvalidConfig("variants must be at least 1".into()));
        }
        if self.knots < 2 {
            return Err(Error::InvalidConfig("offset profiles need at least 2 knots".into()));
        }
        if !(self.max_offset >= 0.0) {
            return Err(Error::InvalidConfig("max_offset must be non-negative".into()));
        }
        Ok(())
    }
}

/// A height-shifted copy of an episode and its goal torso height profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedVariant {
    pub episode: Episode,
    /// `h*(t)` per step; also stored in each step's `goal_height`.
    pub heights: Vec<f64>,
}

/// Produces `spec.variants` height variants of `ep`. Variant 0 carries a zero
/// offset; the others add a PCHIP-smoothed random offset profile to both
/// wrists' z.
pub fn augment_heights(ep: &Episode, spec: &HeightAugmentSpec) -> Result<Vec<AugmentedVariant>> {
    spec.validate()?;
    if !ep.provenance.preprocessed {
        return Err(Error::NotPreprocessed(ep.id.clone()));
    }
    (0..spec.variants)
        .map(|v| {
            let offsets: Vec<f64> = if v == 0 {
                vec![0.0; spec.knots]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(hash::stream(spec.seed ^ hash::fnv1a(&ep.id), v as u64));
                (0..spec.knots)
                    .map(|_| rng.random_range(-spec.max_offset..=spec.max_offset))
                    .collect()
            };
            augment_with_offsets(ep, &offsets, v, spec)
        })
        .collect()
}

/// Applies an explicit offset-knot profile (knots evenly spaced over the
/// episode) as variant `variant`.
pub fn augment_with_offsets(ep: &Episode, offsets: &[f64], variant: usize, spec: &HeightAugmentSpec) -> Result<AugmentedVariant> {
    if offsets.len() < 2 {
        return Err(Error::InvalidConfig("offset profiles need at least 2 knots".into()));
    }
    let t0 = ep.steps.first().ok_or(Error::EmptyInput("episode has no steps"))?.t;
    let t1 = ep.steps[ep.steps.len() - 1].t;
    let span = t1 - t0;
    let last = offsets.len() - 1;
    let knots: Vec<(f64, f64)> = offsets
        .iter()
        .enumerate()
        .map(|(i, &o)| (if i == last { t1 } else { t0 + span * i as f64 / last as f64 }, o))
        .collect();
    let profile = pchip_fit(&knots)?;
    let [lo, hi] = spec.h_range;

    let mut out = ep.clone();
    out.id = format!("{}-v{variant}", ep.id);
    out.provenance.augmentation = Some(AugmentationInfo {
        source_episode: ep.id.clone(),
        variant,
        seed: spec.seed,
    });
    let mut heights = Vec::with_capacity(out.steps.len());
    for s in &mut out.steps {
        let off = profile.eval(s.t)?;
        s.left_wrist.position.z = (s.left_wrist.position.z + off).clamp(lo, hi);
        s.right_wrist.position.z = (s.right_wrist.position.z + off).clamp(lo, hi);
        let mid = 0.5 * (s.left_wrist.position.z + s.right_wrist.position.z);
        let h = (mid - spec.wrist_to_torso).clamp(lo, hi);
        s.goal_height = Some(h);
        heights.push(h);
    }
    Ok(AugmentedVariant { episode: out, heights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{compute_axis_stats, generate_synthetic_seeds, preprocess_episode, PreprocessConfig, SeedSpec};

    fn preprocessed() -> Vec<Episode> {
        let spec = SeedSpec {
            count: 6,
            ..SeedSpec::default()
        };
        let eps = generate_synthetic_seeds(&spec, 3).unwrap();
        let stats = compute_axis_stats(&eps).unwrap();
        eps.iter()
            .map(|e| preprocess_episode(e, &stats, &PreprocessConfig::default()).unwrap())
            .collect()
    }

    #[test]
    fn variant_zero_is_identity() {
        let spec = HeightAugmentSpec::default();
        for ep in preprocessed() {
            let vars = augment_heights(&ep, &spec).unwrap();
            assert_eq!(vars.len(), spec.variants);
            let v0 = &vars[0];
            for (a, b) in v0.episode.steps.iter().zip(&ep.steps) {
                assert_eq!(a.left_wrist, b.left_wrist);
                assert_eq!(a.right_wrist, b.right_wrist);
            }
            for (h, s) in v0.heights.iter().zip(&ep.steps) {
                let mid = 0.5 * (s.left_wrist.position.z + s.right_wrist.position.z);
                assert_eq!(*h, (mid - spec.wrist_to_torso).clamp(0.15, 1.25));
            }
        }
    }

    #[test]
    fn every_variant_stays_in_range_and_records_heights() {
        let spec = HeightAugmentSpec {
            variants: 8,
            max_offset: 0.6,
            ..HeightAugmentSpec::default()
        };
        for ep in preprocessed() {
            for var in augment_heights(&ep, &spec).unwrap() {
                var.episode.validate().unwrap();
                for (s, h) in var.episode.steps.iter().zip(&var.heights) {
                    for z in [s.left_wrist.position.z, s.right_wrist.position.z] {
                        assert!((0.15..=1.25).contains(&z));
                    }
                    assert_eq!(s.goal_height, Some(*h));
                    let mid = 0.5 * (s.left_wrist.position.z + s.right_wrist.position.z);
                    assert_eq!(*h, (mid - spec.wrist_to_torso).clamp(0.15, 1.25));
                }
            }
        }
    }

    #[test]
    fn constant_offset_raises_every_z() {
        let spec = HeightAugmentSpec::default();
        let ep = &preprocessed()[0];
        let var = augment_with_offsets(ep, &[0.2; 4], 1, &spec).unwrap();
        for (a, b) in var.episode.steps.iter().zip(&ep.steps) {
            let want = (b.left_wrist.position.z + 0.2).clamp(0.15, 1.25);
            assert!((a.left_wrist.position.z - want).abs() < 1e-12);
        }
        let prov = var.episode.provenance.augmentation.unwrap();
        assert_eq!(prov.variant, 1);
        assert_eq!(prov.source_episode, ep.id);
    }

    #[test]
    fn deterministic_and_requires_preprocessing() {
        let spec = HeightAugmentSpec::default();
        let ep = &preprocessed()[1];
        assert_eq!(augment_heights(ep, &spec).unwrap(), augment_heights(ep, &spec).unwrap());
        let mut raw = ep.clone();
        raw.provenance.preprocessed = false;
        assert!(matches!(augment_heights(&raw, &spec), Err(Error::NotPreprocessed(_))));
    }
}
