//! Serializable map-family descriptors, as read from experiment configs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::combinatorics::CombinatorialPair;
use super::families::{
    affine_iem, affine_with_images, golden_lengths, ko_iem, moebius_iem, standard_iem, tune_golden_split,
};
use super::map::Giem;
use super::shape::KoParams;
use crate::error::{Error, Result};
use crate::numerics::Real;

/// A number given either as text (preferred, parsed at full precision) or as a literal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumText {
    Text(String),
    Int(i64),
    Float(f64),
}

impl NumText {
    pub fn parse<T: Real>(&self, ctx: &T::Ctx) -> Result<T> {
        match self {
            NumText::Text(s) => T::parse(ctx, s),
            NumText::Int(i) => Ok(T::from_int(ctx, *i)),
            // shortest round-trip decimal of the literal
            NumText::Float(v) => T::parse(ctx, &format!("{v}")),
        }
    }
}

impl From<&str> for NumText {
    fn from(s: &str) -> Self {
        NumText::Text(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthSpec {
    /// `"golden"`: lengths `(g², g)`.
    Named(String),
    Values(Vec<NumText>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Standard,
    Affine,
    Moebius,
    Ko,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<NumText>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<NumText>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<NumText>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<NumText>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth: Option<Vec<NumText>>,
    #[serde(default)]
    pub zero_mean: bool,
}

fn default_pair() -> Vec<usize> {
    vec![2, 1]
}

fn default_tune_depth() -> usize {
    28
}

/// Everything needed to rebuild a map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDescriptor {
    pub family: FamilyKind,
    pub lengths: LengthSpec,
    /// Monodromy, used when `pi0`/`pi1` are absent.
    #[serde(default = "default_pair")]
    pub pair: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi1: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_lengths: Option<Vec<NumText>>,
    #[serde(default)]
    pub params: FamilyParams,
    /// `"golden"`: choose the image split so the rotation number is the golden mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<String>,
    #[serde(default = "default_tune_depth")]
    pub tune_depth: usize,
}

fn nums<T: Real>(v: &Option<Vec<NumText>>, what: &str, d: usize, ctx: &T::Ctx) -> Result<Vec<T>> {
    let v = v
        .as_ref()
        .ok_or_else(|| Error::InvalidFamilyParams(format!("missing parameter {what}")))?;
    if v.len() != d {
        return Err(Error::InvalidFamilyParams(format!("{what} needs {d} entries, got {}", v.len())));
    }
    v.iter().map(|x| x.parse(ctx)).collect()
}

static TUNED: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();

impl FamilyDescriptor {
    fn simple(family: FamilyKind, lengths: &[&str], params: FamilyParams) -> Self {
        FamilyDescriptor {
            family,
            lengths: LengthSpec::Values(lengths.iter().map(|s| NumText::from(*s)).collect()),
            pair: default_pair(),
            pi0: None,
            pi1: None,
            image_lengths: None,
            params,
            tune: Some("golden".into()),
            tune_depth: default_tune_depth(),
        }
    }

    /// Built-in families: `rotation`, `affine`, `moebius`, `ko`, `ko_zero_mean`.
    pub fn preset(name: &str) -> Result<Self> {
        let list = |xs: &[&str]| Some(xs.iter().map(|s| NumText::from(*s)).collect::<Vec<_>>());
        let ko = |zero_mean| FamilyParams {
            amplitude: list(&["0.1", "-0.08"]),
            center: list(&["0.4142135623730950488016887242", "0.6180339887498948482045868344"]),
            smooth: list(&["0.3", "-0.2"]),
            zero_mean,
            ..Default::default()
        };
        Ok(match name {
            "rotation" => FamilyDescriptor {
                lengths: LengthSpec::Named("golden".into()),
                tune: None,
                ..Self::simple(FamilyKind::Standard, &[], FamilyParams::default())
            },
            "affine" => Self::simple(FamilyKind::Affine, &["0.4", "0.6"], FamilyParams::default()),
            "moebius" => Self::simple(
                FamilyKind::Moebius,
                &["0.45", "0.55"],
                FamilyParams { m: list(&["1.5", "0.7"]), ..Default::default() },
            ),
            "ko" => Self::simple(FamilyKind::Ko, &["0.45", "0.55"], ko(false)),
            "ko_zero_mean" => Self::simple(FamilyKind::Ko, &["0.45", "0.55"], ko(true)),
            other => return Err(Error::Config(format!("unknown preset {other:?}"))),
        })
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["rotation", "affine", "moebius", "ko", "ko_zero_mean"]
    }

    pub fn combinatorics(&self) -> Result<CombinatorialPair> {
        match (&self.pi0, &self.pi1) {
            (Some(p0), Some(p1)) => CombinatorialPair::new(super::default_names(p0.len()), p0, p1),
            (None, None) => CombinatorialPair::from_monodromy(&self.pair),
            _ => Err(Error::InvalidFamilyParams("give both pi0 and pi1, or neither".into())),
        }
    }

    fn lengths<T: Real>(&self, d: usize, ctx: &T::Ctx) -> Result<Vec<T>> {
        match &self.lengths {
            LengthSpec::Named(n) if n == "golden" => {
                if d != 2 {
                    return Err(Error::InvalidFamilyParams("golden lengths need two letters".into()));
                }
                Ok(golden_lengths(ctx))
            }
            LengthSpec::Named(n) => Err(Error::InvalidFamilyParams(format!("unknown length preset {n:?}"))),
            LengthSpec::Values(v) => nums(&Some(v.clone()), "lengths", d, ctx),
        }
    }

    fn images_from_split<T: Real>(pair: &CombinatorialPair, split: T) -> Vec<T> {
        let first = pair.row(1)[0];
        let mut out = vec![split.one_like() - &split; 2];
        out[first] = split;
        out
    }

    fn build_with<T: Real>(&self, ctx: &T::Ctx, split: Option<T>) -> Result<Giem<T>> {
        let pair = self.combinatorics()?;
        let d = pair.d();
        let lengths = self.lengths::<T>(d, ctx)?;
        let images = match (split, &self.image_lengths) {
            (Some(s), _) => Some(Self::images_from_split(&pair, s)),
            (None, Some(v)) => Some(nums(&Some(v.clone()), "image_lengths", d, ctx)?),
            (None, None) => None,
        };
        let p = &self.params;
        match self.family {
            FamilyKind::Standard => standard_iem(lengths, pair),
            FamilyKind::Affine => match images {
                Some(im) => affine_with_images(lengths, im, pair),
                None => affine_iem(lengths, pair, nums(&p.slopes, "slopes", d, ctx)?),
            },
            FamilyKind::Moebius => moebius_iem(lengths, images, pair, nums(&p.m, "m", d, ctx)?),
            FamilyKind::Ko => {
                let a: Vec<T> = nums(&p.amplitude, "amplitude", d, ctx)?;
                let c: Vec<T> = nums(&p.center, "center", d, ctx)?;
                let s: Vec<T> = nums(&p.smooth, "smooth", d, ctx)?;
                let profile = (0..d)
                    .map(|i| KoParams { amplitude: a[i].clone(), center: c[i].clone(), smooth: s[i].clone() })
                    .collect();
                ko_iem(lengths, images, pair, profile, p.zero_mean)
            }
        }
    }

    /// The image split selected by tuning, if tuning applies.
    pub fn tuned_split(&self) -> Result<Option<f64>> {
        match self.tune.as_deref() {
            None => return Ok(None),
            Some("golden") => {}
            Some(other) => return Err(Error::InvalidFamilyParams(format!("unknown tuning target {other:?}"))),
        }
        if self.family == FamilyKind::Standard {
            // a translation map is a rotation by its first image length; golden lengths suffice
            return Ok(None);
        }
        let pair = self.combinatorics()?;
        if pair.d() != 2 || pair.monodromy() != vec![2, 1] {
            return Err(Error::InvalidFamilyParams("golden tuning needs the two-letter rotation pair".into()));
        }
        let key = serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        let cache = TUNED.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(v) = cache.lock().expect("tuning cache").get(&key) {
            return Ok(Some(*v));
        }
        let t = tune_golden_split(|s| self.build_with::<f64>(&(), Some(s)), self.tune_depth)?;
        cache.lock().expect("tuning cache").insert(key, t);
        Ok(Some(t))
    }

    /// Builds the map in the requested arithmetic.
    pub fn build<T: Real>(&self, ctx: &T::Ctx) -> Result<Giem<T>> {
        if self.family == FamilyKind::Standard && self.tune.as_deref() == Some("golden") {
            let mut golden = self.clone();
            golden.lengths = LengthSpec::Named("golden".into());
            golden.tune = None;
            return golden.build(ctx);
        }
        let split = self.tuned_split()?.map(|t| T::from_f64(ctx, t));
        self.build_with(ctx, split)
    }

    pub fn build_arc<T: Real>(&self, ctx: &T::Ctx) -> Result<Arc<Giem<T>>> {
        self.build(ctx).map(Arc::new)
    }

    /// Whether every branch is a translation or affine map (exact arithmetic is closed).
    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self.family, FamilyKind::Standard | FamilyKind::Affine)
    }
}
