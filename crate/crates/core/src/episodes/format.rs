//! JSON reading and writing. Reals go through serde_json's shortest
//! round-trip formatting and exact parsing, so files are bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{
    digest_bytes, generate, DatasetManifest, DatasetPlan, Episode, EpisodeError, ManifestEntry, ManifestFailure,
    FORMAT_VERSION,
};

pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path, source: std::io::Error) -> EpisodeError {
    EpisodeError::Io { path: path.display().to_string(), source }
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    bytes
}

fn parse<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, EpisodeError> {
    serde_json::from_slice(bytes).map_err(|e| EpisodeError::format(path, e.to_string()))
}

pub(crate) fn write_new(path: &Path, bytes: &[u8], overwrite: bool) -> Result<(), EpisodeError> {
    if !overwrite && path.exists() {
        return Err(EpisodeError::AlreadyExists(path.to_path_buf()));
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, EpisodeError> {
    fs::read(path).map_err(|e| io_err(path, e))
}

pub fn write_episode(e: &Episode, path: &Path) -> Result<(), EpisodeError> {
    e.validate().map_err(|r| EpisodeError::format(path, r))?;
    fs::write(path, to_json(e)).map_err(|err| io_err(path, err))
}

pub fn read_episode(path: &Path) -> Result<Episode, EpisodeError> {
    let bytes = read_bytes(path)?;
    let e: Episode = parse(path, &bytes)?;
    e.validate().map_err(|r| EpisodeError::format(path, r))?;
    Ok(e)
}

/// Generates a split into `dir`: one file per episode, then the manifest.
pub fn write_dataset(
    plan: &DatasetPlan,
    dir: &Path,
    overwrite: bool,
    invocation: BTreeMap<String, String>,
) -> Result<DatasetManifest, EpisodeError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !overwrite && manifest_path.exists() {
        return Err(EpisodeError::AlreadyExists(manifest_path));
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let generated = generate(&plan.spec, plan.count, plan.base_seed)?;
    let mut entries = Vec::with_capacity(generated.episodes.len());
    for (index, e) in &generated.episodes {
        let file = format!("episode_{index:06}.json");
        let bytes = to_json(e);
        write_new(&dir.join(&file), &bytes, overwrite)?;
        entries.push(ManifestEntry {
            index: *index,
            seed: e.seed,
            episode_id: e.episode_id.clone(),
            file,
            digest: digest_bytes(&bytes),
        });
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        task_id: plan.spec.task,
        dt: plan.spec.dt,
        horizon: plan.spec.horizon,
        count: plan.count,
        split: plan.split,
        param_ranges: plan.spec.param_ranges.clone(),
        base_seed: plan.base_seed,
        episodes: entries,
        failures: generated
            .failures
            .iter()
            .map(|f| ManifestFailure { index: f.index, seed: f.seed, error: f.error.to_string() })
            .collect(),
        invocation,
    };
    fs::write(&manifest_path, to_json(&manifest)).map_err(|e| io_err(&manifest_path, e))?;
    Ok(manifest)
}

/// Reads a dataset directory, checking every file digest against the manifest.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<Episode>), EpisodeError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: DatasetManifest = parse(&manifest_path, &read_bytes(&manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(EpisodeError::format(&manifest_path, format!("format_version {}", manifest.format_version)));
    }
    let mut episodes = Vec::with_capacity(manifest.episodes.len());
    for entry in &manifest.episodes {
        let path = dir.join(&entry.file);
        let bytes = read_bytes(&path)?;
        let digest = digest_bytes(&bytes);
        if digest != entry.digest {
            return Err(EpisodeError::format(&path, format!("digest mismatch: manifest {} file {digest}", entry.digest)));
        }
        let e: Episode = parse(&path, &bytes)?;
        e.validate().map_err(|r| EpisodeError::format(&path, r))?;
        if e.episode_id != entry.episode_id || e.task.task != manifest.task_id {
            return Err(EpisodeError::format(&path, "episode does not match its manifest entry"));
        }
        episodes.push(e);
    }
    Ok((manifest, episodes))
}

/// Imagined states for one episode, as produced by any predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub format_version: u32,
    pub episode_id: String,
    pub predictor: String,
    pub condition_steps: usize,
    /// `T − condition_steps` rows, aligned with `states[condition_steps..]`.
    pub states: Vec<Vec<f64>>,
}

impl PredictionRecord {
    pub fn new(episode_id: String, predictor: String, condition_steps: usize, states: Vec<Vec<f64>>) -> Self {
        Self { format_version: FORMAT_VERSION, episode_id, predictor, condition_steps, states }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("format_version {} (expected {FORMAT_VERSION})", self.format_version));
        }
        if self.condition_steps == 0 {
            return Err("condition_steps must be at least 1".into());
        }
        let d = self.states.first().map_or(0, Vec::len);
        for (t, row) in self.states.iter().enumerate() {
            if row.len() != d {
                return Err(format!("predicted state {t} has {} values, expected {d}", row.len()));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(format!("predicted state {t} has a non-finite value"));
            }
        }
        Ok(())
    }
}

pub fn write_prediction(r: &PredictionRecord, path: &Path, overwrite: bool) -> Result<(), EpisodeError> {
    r.validate().map_err(|e| EpisodeError::format(path, e))?;
    write_new(path, &to_json(r), overwrite)
}

pub fn read_prediction(path: &Path) -> Result<PredictionRecord, EpisodeError> {
    let r: PredictionRecord = parse(path, &read_bytes(path)?)?;
    r.validate().map_err(|e| EpisodeError::format(path, e))?;
    Ok(r)
}

/// Reads every `*.json` prediction file in `dir`, in file-name order.
pub fn read_predictions(dir: &Path) -> Result<Vec<PredictionRecord>, EpisodeError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != MANIFEST_FILE))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_prediction(p)).collect()
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Reads only the version field, for friendlier diagnostics on old files.
pub fn probe_version(path: &Path) -> Result<u32, EpisodeError> {
    let p: VersionProbe = parse(path, &read_bytes(path)?)?;
    Ok(p.format_version)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodes::{generate_episode, Split};
    use crate::tasks::{default_spec, TaskId};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for t in TaskId::ALL {
            let e = generate_episode(&default_spec(t), 42).unwrap();
            let path = dir.path().join(format!("{t}.json"));
            write_episode(&e, &path).unwrap();
            let back = read_episode(&path).unwrap();
            let bits = |e: &Episode| e.states.iter().flatten().chain(e.actions.iter().flatten()).map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&e), bits(&back));
            assert_eq!(e, back);
        }
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        let e = generate_episode(&default_spec(TaskId::FreeFall), 1).unwrap();
        write_episode(&e, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(read_episode(&path), Err(EpisodeError::Format { .. })));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        let mut e = generate_episode(&default_spec(TaskId::Pendulum), 1).unwrap();
        e.format_version = 2;
        fs::write(&path, to_json(&e)).unwrap();
        assert_eq!(probe_version(&path).unwrap(), 2);
        let err = read_episode(&path).unwrap_err().to_string();
        assert!(err.contains("format_version"), "{err}");
    }

    #[test]
    fn dataset_digests_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let plan = DatasetPlan { spec: default_spec(TaskId::Circular), count: 3, base_seed: 2, split: Split::Train };
        let m = write_dataset(&plan, dir.path(), false, BTreeMap::new()).unwrap();
        assert_eq!(m.episodes.len(), 3);
        assert!(matches!(write_dataset(&plan, dir.path(), false, BTreeMap::new()), Err(EpisodeError::AlreadyExists(_))));
        let (m2, eps) = read_dataset(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(eps.len(), 3);
        let tampered = dir.path().join(&m.episodes[1].file);
        let text = fs::read_to_string(&tampered).unwrap().replacen("\"seed\"", " \"seed\"", 1);
        fs::write(&tampered, text).unwrap();
        assert!(read_dataset(dir.path()).unwrap_err().to_string().contains("digest mismatch"));
    }

    #[test]
    fn prediction_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let r = PredictionRecord::new("abc".into(), "zoh".into(), 10, vec![vec![0.1, 1e-300], vec![-2.5, 3.0]]);
        write_prediction(&r, &path, false).unwrap();
        assert_eq!(read_prediction(&path).unwrap(), r);
        let bad = PredictionRecord::new("abc".into(), "zoh".into(), 0, vec![]);
        assert!(write_prediction(&bad, &dir.path().join("q.json"), false).is_err());
    }
}
