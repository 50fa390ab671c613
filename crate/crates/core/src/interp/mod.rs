//! Shape-preserving cubic interpolation and height augmentation.

mod augment;
mod pchip;

pub use augment::{augment_heights, augment_with_offsets, AugmentedVariant, HeightAugmentSpec};
pub use pchip::{pchip_eval, pchip_fit, PchipCurve};
