//! Dataset schema, file formats, label preprocessing, splitting and
//! synthetic data generation.

mod io;
mod record;
mod split;
mod synthetic;

pub use io::{load_dataset, save_dataset, save_dataset_with_sidecar, sidecar_path, SIDECAR_MAGIC};
pub use record::{
    bin_age, one_hot, AgeBin, Dataset, EmbeddingRecord, Task, RATING_CLASSES, REFERENCE_YEAR,
};
pub use split::{wasserstein_split, DatasetSplit, DEFAULT_FRACTIONS};
pub use synthetic::{
    generate_synthetic, SignalStrengths, SyntheticData, SyntheticSpec, COUNTRIES, GENDERS,
};

impl Dataset {
    /// [`wasserstein_split`] over this dataset's embeddings.
    pub fn split(
        &self,
        rng: &mut crate::rng::RandomSource,
        fractions: (f64, f64, f64),
    ) -> crate::Result<DatasetSplit> {
        let refs: Vec<&[f64]> = self.records().iter().map(|r| r.embedding.as_slice()).collect();
        wasserstein_split(&refs, rng, fractions)
    }
}
