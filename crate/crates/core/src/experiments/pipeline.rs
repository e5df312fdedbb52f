use std::path::Path;

use super::runner::run_parallel;
use crate::audio_io::{preprocess, read_wav};
use crate::corpus::CorpusManifest;
use crate::error::Result;
use crate::features::{mfcc_with, FeatureCache, FeatureMatrix, FeatureStore, MfccConfig, MfccExtractor};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionReport {
    pub computed: usize,
    pub cached: usize,
    /// `(clip id, reason)` for clips that could not be decoded or featurized.
    pub failures: Vec<(String, String)>,
}

enum Outcome {
    Cached(FeatureMatrix),
    Computed(FeatureMatrix),
    Failed(String, String),
}

/// Preprocesses and featurizes every manifest entry, reusing cache records
/// whose fingerprint matches `config`. Failing clips are reported, not fatal.
pub fn extract_features(
    manifests: &[CorpusManifest],
    config: &MfccConfig,
    cache: Option<&FeatureCache>,
    jobs: usize,
) -> Result<(FeatureStore, ExtractionReport)> {
    let extractor = MfccExtractor::<f64>::new(config)?;
    let fp = config.fingerprint();
    let entries: Vec<_> = manifests.iter().flat_map(|m| m.entries.iter()).collect();
    let outcomes = run_parallel(&entries, jobs, |meta| {
        if let Some(cache) = cache {
            if let Some(m) = cache.load(&fp, &meta.clip_id)? {
                return Ok(Outcome::Cached(m));
            }
        }
        let computed = read_wav(Path::new(&meta.path))
            .and_then(preprocess)
            .and_then(|clip| mfcc_with(&extractor, &clip));
        match computed {
            Ok(mut m) => {
                m.clip_id = meta.clip_id.clone();
                if let Some(cache) = cache {
                    cache.store(&m)?;
                }
                Ok(Outcome::Computed(m))
            }
            Err(e) => Ok(Outcome::Failed(meta.clip_id.clone(), e.to_string())),
        }
    })?;
    let mut store = FeatureStore::new();
    let mut report = ExtractionReport::default();
    for o in outcomes {
        match o {
            Outcome::Cached(m) => {
                report.cached += 1;
                store.insert(m);
            }
            Outcome::Computed(m) => {
                report.computed += 1;
                store.insert(m);
            }
            Outcome::Failed(id, why) => report.failures.push((id, why)),
        }
    }
    Ok((store, report))
}
