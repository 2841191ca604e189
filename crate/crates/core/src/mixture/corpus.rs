use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::overlap::{measure_overlap, OverlapMeasure};
use super::plan::{plan_tracks, PlanConstraints, TrackPlan};
use super::render::{choose_gap_fills, mix, synthesize_track, Mixed, SilenceBank};
use super::trim::{parse_ctm, trim_silence, EnergyVad, RawUtterance, TrimAuthority, Utterance};
use super::Gender;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{derive_seed, seeded};
use crate::signal::wav::{read_wav, write_wav, WavFormat};
use crate::signal::{ActivityTrack, AudioBuffer, Span};

/// One line of the corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub speaker_id: String,
    #[serde(default)]
    pub gender: Gender,
    pub wav_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_path: Option<String>,
}

/// Trimmed utterances plus the silence bank built from their excised edges.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub bank: SilenceBank,
    pub sample_rate: u32,
}

impl Corpus {
    /// Trims every utterance in order; leading then trailing clips go to the bank.
    pub fn from_raw(raw: Vec<(RawUtterance, TrimAuthority)>) -> Result<Corpus> {
        let mut utterances = Vec::with_capacity(raw.len());
        let mut bank = SilenceBank::new();
        let mut sample_rate = None;
        for (r, auth) in raw {
            let sr = r.audio.sample_rate();
            if *sample_rate.get_or_insert(sr) != sr {
                return Err(Error::InsufficientCorpus(format!(
                    "utterance {} has sample rate {sr}, corpus uses {}",
                    r.id,
                    sample_rate.unwrap()
                )));
            }
            let (u, lead, trail) = trim_silence(r, &auth)?;
            bank.push(&u.id, lead);
            bank.push(&u.id, trail);
            utterances.push(u);
        }
        Ok(Corpus {
            utterances,
            bank,
            sample_rate: sample_rate.unwrap_or(crate::signal::DEFAULT_SAMPLE_RATE),
        })
    }

    pub fn by_id(&self) -> HashMap<&str, &Utterance> {
        self.utterances.iter().map(|u| (u.id.as_str(), u)).collect()
    }

    /// Speaker id → utterance indices, sorted by speaker id.
    pub fn speakers(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, u) in self.utterances.iter().enumerate() {
            m.entry(u.speaker_id.as_str()).or_default().push(i);
        }
        m
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a JSON-lines manifest. Relative paths resolve against the
/// manifest's directory. Entries without an alignment are trimmed by `vad`.
pub fn load_corpus(manifest: impl AsRef<Path>, vad: EnergyVad) -> Result<Corpus> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut raw = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line)
            .map_err(|err| Error::parse(manifest, format!("line {}: {err}", no + 1)))?;
        let audio = read_wav(resolve(base, &e.wav_path))?;
        let authority = match &e.alignment_path {
            Some(a) => {
                let path = resolve(base, a);
                let text = fs::read_to_string(&path).map_err(|err| Error::io(&path, err))?;
                TrimAuthority::Alignment(parse_ctm(&text).map_err(|m| Error::parse(&path, m))?)
            }
            None => TrimAuthority::EnergyVad(vad),
        };
        raw.push((
            RawUtterance {
                id: e.id,
                speaker_id: e.speaker_id,
                gender: e.gender,
                audio,
                transcript: e
                    .transcript
                    .map(|t| t.split_whitespace().map(str::to_string).collect()),
            },
            authority,
        ));
    }
    Corpus::from_raw(raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub targets: Vec<f64>,
    pub per_target: usize,
    pub snr_lo: f64,
    pub snr_hi: f64,
    pub seed: u64,
    pub utterances_per_track: usize,
    pub max_no_speech: f64,
    pub overlap_tol: f64,
    pub min_gap_s: f64,
    pub max_gap_s: Option<f64>,
    pub overlap_measure: OverlapMeasure,
    pub max_attempts: usize,
    pub peak_limit: f64,
    pub wav_format: WavFormat,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            targets: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            per_target: 50,
            snr_lo: 0.0,
            snr_hi: 5.0,
            seed: 17,
            utterances_per_track: 3,
            max_no_speech: 0.10,
            overlap_tol: 0.01,
            min_gap_s: 0.0,
            max_gap_s: None,
            overlap_measure: OverlapMeasure::Union,
            max_attempts: 100,
            peak_limit: 0.99,
            wav_format: WavFormat::Float32,
        }
    }
}

impl SimulationConfig {
    pub fn constraints(&self, sample_rate: u32) -> PlanConstraints {
        let samples = |s: f64| (s * sample_rate as f64).round() as usize;
        PlanConstraints {
            max_no_speech: self.max_no_speech,
            tol: self.overlap_tol,
            min_gap: samples(self.min_gap_s),
            max_gap: self.max_gap_s.map(samples),
            measure: self.overlap_measure,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerMeta {
    pub speaker_id: String,
    pub gender: Gender,
    /// Concatenated transcripts of the track's utterances, when all are known.
    pub transcript: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFiles {
    pub mixture: String,
    pub stems: [String; 2],
    pub activity: String,
}

/// Full provenance of one simulated mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub mixture_id: String,
    pub index: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub timeline_len: usize,
    pub speaker_a: SpeakerMeta,
    pub speaker_b: SpeakerMeta,
    pub plans: [TrackPlan; 2],
    pub relative_shift: i64,
    pub target_overlap: f64,
    pub achieved_overlap: f64,
    pub overlap_measure: OverlapMeasure,
    pub no_speech_ratio: f64,
    pub target_snr_db: f64,
    pub interferer_gain: f64,
    pub peak_limit: f64,
    pub peak_scale: f64,
    pub files: MixtureFiles,
}

impl MixtureRecord {
    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<MixtureRecord>> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))
            })
            .collect()
    }
}

/// Per-speaker activity on the mixture timeline, as stored next to the WAVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityFile {
    pub mixture_id: String,
    pub len: usize,
    pub s0: Vec<Span>,
    pub s1: Vec<Span>,
}

impl ActivityFile {
    pub fn tracks(&self) -> Result<[ActivityTrack; 2]> {
        Ok([
            ActivityTrack::new(self.len, self.s0.clone())?,
            ActivityTrack::new(self.len, self.s1.clone())?,
        ])
    }

    pub fn read(path: impl AsRef<Path>) -> Result<ActivityFile> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedMixture {
    pub record: MixtureRecord,
    pub mixture: AudioBuffer,
    pub stems: [AudioBuffer; 2],
    pub activities: [ActivityTrack; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMixture {
    pub index: usize,
    pub target_overlap: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SimulationSummary {
    pub records: Vec<MixtureRecord>,
    pub skipped: Vec<SkippedMixture>,
}

/// Re-renders tracks and mixture from a record. Bit-exact with the original
/// simulation given the same corpus.
pub fn synthesize(record: &MixtureRecord, corpus: &Corpus) -> Result<(Mixed, [ActivityTrack; 2])> {
    let utts = corpus.by_id();
    let (ta, aa) = synthesize_track(
        &record.plans[0],
        &utts,
        &corpus.bank,
        record.timeline_len,
        record.sample_rate,
    )?;
    let (tb, ab) = synthesize_track(
        &record.plans[1],
        &utts,
        &corpus.bank,
        record.timeline_len,
        record.sample_rate,
    )?;
    let mixed = mix(&ta, &tb, &aa, &ab, record.target_snr_db, record.peak_limit)?;
    Ok((mixed, [aa, ab]))
}

fn eligible_speakers(corpus: &Corpus, per_track: usize) -> Vec<(&str, Vec<usize>)> {
    corpus
        .speakers()
        .into_iter()
        .filter(|(_, v)| v.len() >= per_track)
        .collect()
}

fn speaker_meta(corpus: &Corpus, picks: &[usize]) -> SpeakerMeta {
    let first = &corpus.utterances[picks[0]];
    let transcript = picks
        .iter()
        .map(|&i| corpus.utterances[i].transcript.clone())
        .collect::<Option<Vec<_>>>()
        .map(|v| v.concat());
    SpeakerMeta {
        speaker_id: first.speaker_id.clone(),
        gender: first.gender,
        transcript,
    }
}

pub fn mixture_id(index: usize) -> String {
    format!("mix{index:05}")
}

/// Simulates mixture `index` at `target` overlap. All randomness derives
/// from `(cfg.seed, index)`.
pub fn simulate_one(
    corpus: &Corpus,
    cfg: &SimulationConfig,
    index: usize,
    target: f64,
) -> Result<SimulatedMixture> {
    let per_track = cfg.utterances_per_track.max(1);
    let speakers = eligible_speakers(corpus, per_track);
    if speakers.len() < 2 {
        return Err(Error::InsufficientCorpus(format!(
            "need 2 speakers with at least {per_track} utterances, found {}",
            speakers.len()
        )));
    }
    let seed = derive_seed(cfg.seed, index as u64);
    let mut rng = seeded(seed);
    let i = rng.random_range(0..speakers.len());
    let mut j = rng.random_range(0..speakers.len() - 1);
    if j >= i {
        j += 1;
    }
    let mut pick = |s: &[usize]| -> Vec<usize> {
        sample(&mut rng, s.len(), per_track)
            .into_iter()
            .map(|k| s[k])
            .collect()
    };
    let picks_a = pick(&speakers[i].1);
    let picks_b = pick(&speakers[j].1);
    let snr = if cfg.snr_hi > cfg.snr_lo {
        rng.random_range(cfg.snr_lo..=cfg.snr_hi)
    } else {
        cfg.snr_lo
    };
    let plan_seed: u64 = rng.random();

    let spec = |picks: &[usize]| -> Vec<(&str, usize)> {
        picks
            .iter()
            .map(|&k| {
                (
                    corpus.utterances[k].id.as_str(),
                    corpus.utterances[k].audio.len(),
                )
            })
            .collect()
    };
    let (ua, ub) = (spec(&picks_a), spec(&picks_b));
    let planned = plan_tracks(
        &ua,
        &ub,
        target,
        &cfg.constraints(corpus.sample_rate),
        plan_seed,
    )?;

    let utts = corpus.by_id();
    let mut plan_a = planned.a;
    let mut plan_b = planned.b;
    plan_a.gap_fills =
        choose_gap_fills(&plan_a, &utts, &corpus.bank, planned.timeline_len, &mut rng)?;
    plan_b.gap_fills =
        choose_gap_fills(&plan_b, &utts, &corpus.bank, planned.timeline_len, &mut rng)?;

    let id = mixture_id(index);
    let mut record = MixtureRecord {
        files: MixtureFiles {
            mixture: format!("mixtures/{id}.wav"),
            stems: [
                format!("mixtures/{id}_s0.wav"),
                format!("mixtures/{id}_s1.wav"),
            ],
            activity: format!("mixtures/{id}_activity.json"),
        },
        mixture_id: id,
        index,
        seed,
        sample_rate: corpus.sample_rate,
        timeline_len: planned.timeline_len,
        speaker_a: speaker_meta(corpus, &picks_a),
        speaker_b: speaker_meta(corpus, &picks_b),
        plans: [plan_a, plan_b],
        relative_shift: planned.relative_shift,
        target_overlap: target,
        achieved_overlap: planned.achieved_overlap,
        overlap_measure: cfg.overlap_measure,
        no_speech_ratio: planned.no_speech_ratio,
        target_snr_db: snr,
        interferer_gain: f64::NAN,
        peak_limit: cfg.peak_limit,
        peak_scale: 1.0,
    };
    let (mixed, activities) = synthesize(&record, corpus)?;
    let stats = measure_overlap(&activities[0], &activities[1], cfg.overlap_measure)?;
    debug_assert_eq!(stats.overlap_ratio, record.achieved_overlap);
    record.no_speech_ratio = stats.no_speech_ratio;
    record.interferer_gain = mixed.interferer_gain;
    record.peak_scale = mixed.peak_scale;
    Ok(SimulatedMixture {
        record,
        mixture: mixed.mixture,
        stems: [mixed.stem_a, mixed.stem_b],
        activities,
    })
}

fn write_mixture(out: &Path, m: &SimulatedMixture, format: WavFormat) -> Result<()> {
    let r = &m.record;
    write_wav(out.join(&r.files.mixture), &m.mixture, format)?;
    for (k, stem) in m.stems.iter().enumerate() {
        write_wav(out.join(&r.files.stems[k]), stem, format)?;
    }
    let act = ActivityFile {
        mixture_id: r.mixture_id.clone(),
        len: r.timeline_len,
        s0: m.activities[0].spans().to_vec(),
        s1: m.activities[1].spans().to_vec(),
    };
    let path = out.join(&r.files.activity);
    fs::write(&path, serde_json::to_string(&act)?).map_err(|e| Error::io(&path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Simulates `cfg.per_target` mixtures for every overlap target. With
/// `out_dir`, writes WAVs and activities under `mixtures/` plus
/// `records.jsonl` and `skipped.jsonl`. Mixtures whose target cannot be met
/// are skipped with a logged reason.
pub fn simulate_corpus(
    corpus: &Corpus,
    cfg: &SimulationConfig,
    out_dir: Option<&Path>,
    exec: Exec,
) -> Result<SimulationSummary> {
    let per_track = cfg.utterances_per_track.max(1);
    let n_speakers = eligible_speakers(corpus, per_track).len();
    if n_speakers < 2 {
        return Err(Error::InsufficientCorpus(format!(
            "need at least 2 speakers with {per_track} utterances each, found {n_speakers}"
        )));
    }
    if let Some(t) = cfg.targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidParams(format!(
            "overlap target {t} outside [0, 1]"
        )));
    }
    if let Some(out) = out_dir {
        let dir = out.join("mixtures");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let jobs: Vec<(usize, f64)> = cfg
        .targets
        .iter()
        .enumerate()
        .flat_map(|(ti, &t)| (0..cfg.per_target).map(move |i| (ti * cfg.per_target + i, t)))
        .collect();

    let results = exec.map(jobs.len(), |k| {
        let (index, target) = jobs[k];
        let m = simulate_one(corpus, cfg, index, target)?;
        if let Some(out) = out_dir {
            write_mixture(out, &m, cfg.wav_format)?;
        }
        Ok(m.record)
    });

    let mut summary = SimulationSummary::default();
    for ((index, target), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => summary.records.push(r),
            Err(e @ Error::InfeasibleOverlap { .. }) => {
                log::warn!("skipping mixture {index} (target {target}): {e}");
                summary.skipped.push(SkippedMixture {
                    index: *index,
                    target_overlap: *target,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(out) = out_dir {
        write_jsonl(&out.join("records.jsonl"), &summary.records)?;
        write_jsonl(&out.join("skipped.jsonl"), &summary.skipped)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::synthetic::{toy_corpus, ToyCorpusSpec};
    use crate::signal::{db_ratio, speech_energy};

    #[test]
    fn full_overlap_toy() {
        let corpus = toy_corpus(&ToyCorpusSpec {
            speakers: 2,
            equal_lengths: true,
            ..Default::default()
        })
        .unwrap();
        let cfg = SimulationConfig {
            targets: vec![1.0],
            per_target: 1,
            ..Default::default()
        };
        let s = simulate_corpus(&corpus, &cfg, None, Exec::Sequential).unwrap();
        assert_eq!(s.records.len(), 1);
        assert!((s.records[0].achieved_overlap - 1.0).abs() <= 0.01);
    }

    #[test]
    fn resynthesis_is_bit_exact_and_snr_holds() {
        let corpus = toy_corpus(&ToyCorpusSpec::default()).unwrap();
        let cfg = SimulationConfig::default();
        for (index, target) in [(0, 0.2), (1, 0.6), (2, 1.0)] {
            let m = match simulate_one(&corpus, &cfg, index, target) {
                Ok(m) => m,
                Err(Error::InfeasibleOverlap { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let (again, acts) = synthesize(&m.record, &corpus).unwrap();
            assert_eq!(again.mixture, m.mixture);
            assert_eq!(acts, m.activities);
            let snr = db_ratio(
                speech_energy(&m.stems[0], &m.activities[0]),
                speech_energy(&m.stems[1], &m.activities[1]),
            );
            assert!((snr - m.record.target_snr_db).abs() < 1e-9);
            assert_ne!(m.record.speaker_a.speaker_id, m.record.speaker_b.speaker_id);
        }
    }

    #[test]
    fn insufficient_corpus() {
        let corpus = toy_corpus(&ToyCorpusSpec {
            speakers: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(matches!(
            simulate_corpus(
                &corpus,
                &SimulationConfig::default(),
                None,
                Exec::Sequential
            ),
            Err(Error::InsufficientCorpus(_))
        ));
    }

    #[test]
    fn manifest_roundtrip_and_gender_aliases() {
        let e: ManifestEntry =
            serde_json::from_str(r#"{"id":"a","speaker_id":"s","gender":"f","wav_path":"a.wav"}"#)
                .unwrap();
        assert_eq!(e.gender, Gender::Female);
        let e: ManifestEntry = serde_json::from_str(
            r#"{"id":"a","speaker_id":"s","gender":"other","wav_path":"a.wav"}"#,
        )
        .unwrap();
        assert_eq!(e.gender, Gender::Unknown);
    }
}
