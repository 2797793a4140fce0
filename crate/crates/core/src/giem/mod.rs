//! Generalized interval exchange maps: combinatorics, branches, validation and the
//! built-in families.

mod combinatorics;
pub mod families;
mod map;
mod shape;
mod descriptor;

pub use combinatorics::{default_names, CombinatorialPair, StepType};
pub use families::{affine_iem, golden_lengths, golden_mean, ko_iem, moebius_iem, standard_iem};
pub use map::{Branch, Giem, ValidationReport};
pub use shape::{Jet, KoParams, KoShape, Shape, ShapeFn};
pub use descriptor::{FamilyDescriptor, FamilyKind, FamilyParams, LengthSpec, NumText};
