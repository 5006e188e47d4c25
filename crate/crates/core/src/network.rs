//! Image → feature vector: cascade, binarize, hash each last-stage group,
//! block histograms, concatenate.

use alloc::vec::Vec;

use crate::error::Result;
use crate::features::{assemble_feature, block_histograms, hash_group, heaviside, BlockSpec, FeatureVector};
use crate::filterbank::{cascade_image, FilterBank};
use crate::tensor::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub bank: FilterBank,
    pub blocks: BlockSpec,
}

impl FeatureExtractor {
    pub fn new(bank: FilterBank, blocks: BlockSpec) -> Result<Self> {
        bank.validate()?;
        blocks.validate()?;
        Ok(Self { bank, blocks })
    }

    /// Feature length for `h×w` inputs.
    pub fn feature_dim(&self, h: usize, w: usize) -> usize {
        crate::features::feature_dim(self.bank.group_size(), self.bank.group_count(), self.blocks.block_count(h, w))
    }

    pub fn extract(&self, img: &Image) -> Result<FeatureVector> {
        let maps = cascade_image(img, &self.bank)?;
        let bins = 1usize << self.bank.group_size();
        let groups = maps
            .chunks(self.bank.group_size())
            .map(|group| {
                let bits: Vec<_> = group.iter().map(heaviside).collect();
                block_histograms(&hash_group(&bits)?, &self.blocks, bins)
            })
            .collect::<Result<Vec<_>>>()?;
        assemble_feature(&groups)
    }

    pub fn extract_all(&self, images: &[Image]) -> Result<Vec<FeatureVector>> {
        images.iter().map(|img| self.extract(img)).collect()
    }
}
