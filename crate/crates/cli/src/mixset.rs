//! Reading a simulated mixture directory back from disk.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sparsemix_core::mixture::{ActivityFile, MixtureRecord};
use sparsemix_core::signal::wav::read_wav;
use sparsemix_core::{ActivityTrack, AudioBuffer};

pub struct MixtureSet {
    pub dir: PathBuf,
    pub records: Vec<MixtureRecord>,
}

pub struct LoadedMixture {
    pub mixture: AudioBuffer,
    pub stems: [AudioBuffer; 2],
    pub activities: [ActivityTrack; 2],
}

impl MixtureSet {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("records.jsonl");
        let records = MixtureRecord::read_jsonl(&path)
            .with_context(|| format!("reading mixture set {}", dir.display()))?;
        Ok(MixtureSet {
            dir: dir.to_path_buf(),
            records,
        })
    }

    pub fn load(&self, r: &MixtureRecord) -> Result<LoadedMixture> {
        let mixture = read_wav(self.dir.join(&r.files.mixture))?;
        let stems = [
            read_wav(self.dir.join(&r.files.stems[0]))?,
            read_wav(self.dir.join(&r.files.stems[1]))?,
        ];
        let activities = ActivityFile::read(self.dir.join(&r.files.activity))?.tracks()?;
        Ok(LoadedMixture {
            mixture,
            stems,
            activities,
        })
    }
}

pub fn track_name(mixture_id: &str, track: usize) -> String {
    format!("{mixture_id}_track{track}")
}
