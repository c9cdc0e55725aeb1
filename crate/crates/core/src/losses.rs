//! Objective arithmetic over caller-supplied tensors, plus the feature
//! normalization operators.
//!
//! Expectations are arithmetic means over the supplied batch or patch axis.
//! Class indices are 0-based. Patch classifiers score three classes:
//! [`CARICATURE`], [`PHOTO`] and [`GENERATED`]. Identity classifiers score
//! `3M` classes laid out as `[0, M)` real caricatures, `[M, 2M)` real photos
//! and `[2M, 3M)` generated caricatures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const CARICATURE: usize = 0;
pub const PHOTO: usize = 1;
pub const GENERATED: usize = 2;

/// Weights of the combined objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub patch: f64,
    pub identity: f64,
    pub identity_mapping: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            patch: 2.0,
            identity: 1.0,
            identity_mapping: 10.0,
        }
    }
}

impl LossWeights {
    pub fn new(patch: f64, identity: f64, identity_mapping: f64) -> Result<Self> {
        let w = Self {
            patch,
            identity,
            identity_mapping,
        };
        if [patch, identity, identity_mapping].iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(w)
        } else {
            Err(Error::Parameter(format!("loss weights must be finite and >= 0, got {w:?}")))
        }
    }
}

/// Rows of class logits, one row per scored item.
#[derive(Debug, Clone, PartialEq)]
struct Logits {
    classes: usize,
    data: Vec<f64>,
}

impl Logits {
    fn new(classes: usize, data: Vec<f64>) -> Result<Self> {
        if classes == 0 || data.is_empty() || !data.len().is_multiple_of(classes) {
            return Err(Error::Shape(format!(
                "{} logits do not form rows of {classes} classes",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite logit at index {pos}")));
        }
        Ok(Self { classes, data })
    }

    fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.classes)
    }

    fn len(&self) -> usize {
        self.data.len() / self.classes
    }
}

/// `-log softmax(row)[target]`, computed with max subtraction.
pub fn cross_entropy(row: &[f64], target: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
    (max - row[target]) + sum.ln()
}

/// h×w patch scores for the three patch classes, flattened as `[patch][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchLogits(Logits);

impl PatchLogits {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::Shape(format!(
                "expected {}x{}x3 patch logits, got {} values",
                height,
                width,
                data.len()
            )));
        }
        Logits::new(3, data).map(Self)
    }

    /// Any number of patches (possibly across a batch), 3 values each.
    pub fn from_rows(data: Vec<f64>) -> Result<Self> {
        Logits::new(3, data).map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.data.is_empty()
    }

    /// Mean cross-entropy of every patch against `class`.
    pub fn mean_cross_entropy(&self, class: usize) -> f64 {
        self.0.rows().map(|r| cross_entropy(r, class)).sum::<f64>() / self.len() as f64
    }
}

/// Batch of `3M`-class identity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityLogits {
    identities: usize,
    logits: Logits,
}

impl IdentityLogits {
    /// `data` holds one row of `3 * identities` scores per sample.
    pub fn new(identities: usize, data: Vec<f64>) -> Result<Self> {
        if identities == 0 {
            return Err(Error::Parameter("identity count must be positive".into()));
        }
        Ok(Self {
            identities,
            logits: Logits::new(3 * identities, data)?,
        })
    }

    pub fn identities(&self) -> usize {
        self.identities
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.data.is_empty()
    }

    /// Mean cross-entropy with per-sample targets `labels[n] + offset`.
    fn mean_cross_entropy(&self, labels: &[usize], offset: usize) -> Result<f64> {
        if labels.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} samples",
                labels.len(),
                self.len()
            )));
        }
        let mut total = 0.0;
        for (row, &label) in self.logits.rows().zip(labels) {
            if label >= self.identities {
                return Err(Error::LabelOutOfRange {
                    label,
                    m: self.identities,
                });
            }
            total += cross_entropy(row, label + offset);
        }
        Ok(total / self.len() as f64)
    }
}

/// Generator patch loss: generated patches should look like caricatures.
pub fn patch_adv_loss_generator(generated: &PatchLogits) -> f64 {
    generated.mean_cross_entropy(CARICATURE)
}

/// Discriminator patch loss over the three sources.
pub fn patch_adv_loss_discriminator(caricatures: &PatchLogits, photos: &PatchLogits, generated: &PatchLogits) -> f64 {
    caricatures.mean_cross_entropy(CARICATURE)
        + photos.mean_cross_entropy(PHOTO)
        + generated.mean_cross_entropy(GENERATED)
}

/// Generator identity loss: a generated image should be classified as the
/// real-caricature slot of its photo identity.
pub fn identity_adv_loss_generator(generated: &IdentityLogits, photo_labels: &[usize]) -> Result<f64> {
    generated.mean_cross_entropy(photo_labels, 0)
}

/// Discriminator identity loss: caricatures at `y_c`, photos at `y_p + M`,
/// generated images at `y_p + 2M`.
pub fn identity_adv_loss_discriminator(
    caricatures: &IdentityLogits,
    caricature_labels: &[usize],
    photos: &IdentityLogits,
    photo_labels: &[usize],
    generated: &IdentityLogits,
    generated_labels: &[usize],
) -> Result<f64> {
    let m = caricatures.identities();
    if photos.identities() != m || generated.identities() != m {
        return Err(Error::Shape(format!(
            "identity counts differ: {m}, {}, {}",
            photos.identities(),
            generated.identities()
        )));
    }
    Ok(caricatures.mean_cross_entropy(caricature_labels, 0)?
        + photos.mean_cross_entropy(photo_labels, m)?
        + generated.mean_cross_entropy(generated_labels, 2 * m)?)
}

/// Mean absolute difference over every sample.
pub fn identity_mapping_loss(reconstruction: &Image, original: &Image) -> Result<f64> {
    reconstruction.ensure_same_shape(original)?;
    let n = original.data().len() as f64;
    Ok(reconstruction
        .data()
        .iter()
        .zip(original.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneratorLossComponents {
    pub patch: f64,
    pub identity: f64,
    pub identity_mapping_caricature: f64,
    pub identity_mapping_photo: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscriminatorLossComponents {
    pub patch: f64,
    pub identity: f64,
}

pub fn total_generator_loss(c: &GeneratorLossComponents, w: &LossWeights) -> f64 {
    w.patch * c.patch
        + w.identity * c.identity
        + w.identity_mapping * (c.identity_mapping_caricature + c.identity_mapping_photo)
}

pub fn total_discriminator_loss(c: &DiscriminatorLossComponents, w: &LossWeights) -> f64 {
    w.patch * c.patch + w.identity * c.identity
}

/// h×w×c activations, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let image = Image::new(height, width, channels, data)?;
        Ok(Self {
            height,
            width,
            channels,
            data: image.into_data(),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(c).step_by(self.channels).copied()
    }

    /// Population mean and variance of channel `c`.
    pub fn channel_stats(&self, c: usize) -> (f64, f64) {
        let n = (self.height * self.width) as f64;
        let mean = self.channel(c).sum::<f64>() / n;
        let var = self.channel(c).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }
}

/// Per-channel target statistics, as a style network would emit them.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleParams {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl StyleParams {
    pub fn new(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() {
            return Err(Error::Shape(format!(
                "{} means but {} scales",
                mean.len(),
                scale.len()
            )));
        }
        if !mean.iter().all(|v| v.is_finite()) || !scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::Parameter("style means must be finite and scales positive".into()));
        }
        Ok(Self { mean, scale })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }
}

/// Normalizes every channel over its h×w plane: `(f - mean) / sqrt(var + eps)`.
pub fn instance_norm(f: &FeatureMap, eps: f64) -> Result<FeatureMap> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    if f.height * f.width < 2 {
        return Err(Error::Shape("instance norm needs at least 2 spatial positions".into()));
    }
    let stats: Vec<(f64, f64)> = (0..f.channels).map(|c| f.channel_stats(c)).collect();
    let data = f
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (mean, var) = stats[i % f.channels];
            (v - mean) / (var + eps).sqrt()
        })
        .collect();
    Ok(FeatureMap { data, ..*f })
}

/// Instance-normalizes `f`, then rescales and shifts each channel to the style.
pub fn adain(f: &FeatureMap, style: &StyleParams, eps: f64) -> Result<FeatureMap> {
    if style.mean.len() != f.channels {
        return Err(Error::Shape(format!(
            "style has {} channels, features have {}",
            style.mean.len(),
            f.channels
        )));
    }
    let mut out = instance_norm(f, eps)?;
    let c = f.channels;
    for (i, v) in out.data.iter_mut().enumerate() {
        *v = style.scale[i % c] * *v + style.mean[i % c];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN3: f64 = 1.098_612_288_668_109_8;
    const LN6: f64 = 1.791_759_469_228_055;

    #[test]
    fn uniform_and_saturated_patch_losses() {
        let uniform = PatchLogits::new(4, 4, vec![0.0; 48]).unwrap();
        assert!((patch_adv_loss_generator(&uniform) - LN3).abs() < 1e-12);
        assert!((patch_adv_loss_discriminator(&uniform, &uniform, &uniform) - 3.0 * LN3).abs() < 1e-12);

        let sat = PatchLogits::from_rows(vec![20.0, 0.0, 0.0]).unwrap();
        let l = patch_adv_loss_generator(&sat);
        assert!(l > 0.0 && (l - 2.0 * (-20.0f64).exp()).abs() < 1e-15, "{l}");

        let at = |class: usize| {
            let mut row = vec![0.0; 3];
            row[class] = 50.0;
            PatchLogits::from_rows(row).unwrap()
        };
        assert!(patch_adv_loss_discriminator(&at(0), &at(1), &at(2)) < 1e-20);
    }

    #[test]
    fn identity_losses_use_block_offsets() {
        let m = 2;
        let uniform = IdentityLogits::new(m, vec![0.0; 6]).unwrap();
        assert!((identity_adv_loss_generator(&uniform, &[1]).unwrap() - LN6).abs() < 1e-12);
        let d = identity_adv_loss_discriminator(&uniform, &[0], &uniform, &[1], &uniform, &[1]).unwrap();
        assert!((d - 3.0 * LN6).abs() < 1e-12);

        let peak = |slot: usize| {
            let mut row = vec![0.0; 6];
            row[slot] = 60.0;
            IdentityLogits::new(m, row).unwrap()
        };
        // caricature y_c = 1 at slot 1, photo y_p = 0 at slot 2, generated y_p = 1 at slot 5
        let d = identity_adv_loss_discriminator(&peak(1), &[1], &peak(2), &[0], &peak(5), &[1]).unwrap();
        assert!(d < 1e-20);
        assert!(identity_adv_loss_generator(&peak(1), &[1]).unwrap() < 1e-20);
        assert!(identity_adv_loss_generator(&peak(4), &[1]).unwrap() > 50.0);
    }

    #[test]
    fn label_and_shape_errors() {
        let l = IdentityLogits::new(2, vec![0.0; 12]).unwrap();
        assert!(matches!(
            identity_adv_loss_generator(&l, &[0, 2]),
            Err(Error::LabelOutOfRange { label: 2, m: 2 })
        ));
        assert!(matches!(identity_adv_loss_generator(&l, &[0]), Err(Error::Shape(_))));
        assert!(IdentityLogits::new(2, vec![0.0; 5]).is_err());
        assert!(IdentityLogits::new(0, vec![]).is_err());
        assert!(PatchLogits::new(2, 2, vec![0.0; 11]).is_err());
        assert!(PatchLogits::from_rows(vec![0.0, f64::INFINITY, 0.0]).is_err());
        let other = IdentityLogits::new(3, vec![0.0; 9]).unwrap();
        assert!(identity_adv_loss_discriminator(&l, &[0, 0], &other, &[0], &l, &[0, 0]).is_err());
    }

    #[test]
    fn weighted_totals() {
        let w = LossWeights::default();
        let ones = GeneratorLossComponents {
            patch: 1.0,
            identity: 1.0,
            identity_mapping_caricature: 1.0,
            identity_mapping_photo: 1.0,
        };
        assert_eq!(total_generator_loss(&ones, &w), 23.0);
        assert_eq!(total_generator_loss(&GeneratorLossComponents::default(), &w), 0.0);
        let d = DiscriminatorLossComponents {
            patch: 1.0,
            identity: 1.0,
        };
        assert_eq!(total_discriminator_loss(&d, &w), 3.0);
        assert_eq!(total_discriminator_loss(&Default::default(), &w), 0.0);
        assert!(LossWeights::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn identity_mapping_loss_values() {
        let a = Image::filled(3, 4, 3, 1.0);
        let b = Image::zeros(3, 4, 3);
        assert_eq!(identity_mapping_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(identity_mapping_loss(&a, &b).unwrap(), 1.0);
        assert!(identity_mapping_loss(&a, &Image::zeros(3, 4, 1)).is_err());
    }

    #[test]
    fn normalization_edge_cases() {
        let constant = FeatureMap::new(2, 2, 1, vec![0.7; 4]).unwrap();
        let n = instance_norm(&constant, 1e-5).unwrap();
        assert!(n.data().iter().all(|&v| v == 0.0));
        let style = StyleParams::new(vec![0.3], vec![2.0]).unwrap();
        let a = adain(&constant, &style, 1e-5).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.3));

        let pm = FeatureMap::new(1, 2, 1, vec![-1.0, 1.0]).unwrap();
        let n = instance_norm(&pm, 1e-300).unwrap();
        assert_eq!(n.data(), &[-1.0, 1.0]);

        let unit = StyleParams::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(adain(&pm, &unit, 1e-5).unwrap(), instance_norm(&pm, 1e-5).unwrap());

        assert!(instance_norm(&FeatureMap::new(1, 1, 1, vec![1.0]).unwrap(), 1e-5).is_err());
        assert!(adain(&pm, &StyleParams::new(vec![0.0; 2], vec![1.0; 2]).unwrap(), 1e-5).is_err());
        assert!(StyleParams::new(vec![0.0], vec![0.0]).is_err());
        assert!(instance_norm(&pm, 0.0).is_err());
    }
}
