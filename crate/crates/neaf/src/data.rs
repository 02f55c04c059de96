//! Dataset handling: IDX parsing, MNIST download and loading, deterministic
//! shuffled batching, and a synthetic stand-in corpus for fast tests.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// IDX magic for 3-D unsigned-byte tensors (images).
pub const MAGIC_IMAGES: u32 = 0x0000_0803;
/// IDX magic for 1-D unsigned-byte tensors (labels).
pub const MAGIC_LABELS: u32 = 0x0000_0801;

/// The four MNIST files: local (decompressed) name and remote gzip name.
pub const MNIST_FILES: [(&str, &str); 4] = [
    ("train-images-idx3-ubyte", "train-images-idx3-ubyte.gz"),
    ("train-labels-idx1-ubyte", "train-labels-idx1-ubyte.gz"),
    ("t10k-images-idx3-ubyte", "t10k-images-idx3-ubyte.gz"),
    ("t10k-labels-idx1-ubyte", "t10k-labels-idx1-ubyte.gz"),
];

pub const DEFAULT_MNIST_BASE_URL: &str = "https://ossci-datasets.s3.amazonaws.com/mnist/";

const IMAGE_SIDE: usize = 28;
const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
const CLASSES: usize = 10;

/// Images as an `N x 784` matrix with pixels in `[0, 1]`, plus digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Matrix,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(images: Matrix, labels: Vec<usize>) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if images.data().iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Data("pixel outside [0, 1]".into()));
        }
        Ok(Dataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Matrix {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Copies the given samples into a batch.
    pub fn batch(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        let images = self.images.gather_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (images, labels)
    }
}

/// A parsed IDX container: big-endian dimension sizes plus the raw payload.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxData {
    pub dims: Vec<usize>,
    pub payload: Vec<u8>,
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses an IDX byte stream. Accepts the two MNIST magics (`0x00000803` for
/// images, `0x00000801` for labels); the payload length must equal the
/// product of the declared dimensions.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = read_be_u32(bytes, 0)
        .ok_or_else(|| Error::Format("fewer than 4 bytes".into()))?;
    let ndims = match magic {
        MAGIC_IMAGES => 3,
        MAGIC_LABELS => 1,
        other => {
            return Err(Error::Format(format!(
                "unsupported magic 0x{other:08x}"
            )))
        }
    };
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        let size = read_be_u32(bytes, 4 + 4 * d)
            .ok_or_else(|| Error::Format("truncated dimension header".into()))?;
        dims.push(size as usize);
    }
    let payload = &bytes[4 + 4 * ndims..];
    let expected: usize = dims.iter().product();
    if payload.len() != expected {
        return Err(Error::Length(format!(
            "payload holds {} bytes, dimensions {:?} require {}",
            payload.len(),
            dims,
            expected
        )));
    }
    Ok(IdxData {
        dims,
        payload: payload.to_vec(),
    })
}

/// Serializes dimensions + payload into IDX bytes (inverse of [`parse_idx`]).
pub fn encode_idx(dims: &[usize], payload: &[u8]) -> Result<Vec<u8>> {
    let magic = match dims.len() {
        1 => MAGIC_LABELS,
        3 => MAGIC_IMAGES,
        n => return Err(Error::Format(format!("unsupported rank {n}"))),
    };
    let expected: usize = dims.iter().product();
    if payload.len() != expected {
        return Err(Error::Length(format!(
            "payload holds {} bytes, dimensions {:?} require {}",
            payload.len(),
            dims,
            expected
        )));
    }
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + payload.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    Ok(out)
}

fn read_idx_file(path: &Path) -> Result<IdxData> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Data(format!("missing or unreadable {}: {e}", path.display())))?;
    parse_idx(&bytes)
}

fn dataset_from_idx(images: IdxData, labels: IdxData, name: &str) -> Result<Dataset> {
    if images.dims.len() != 3 || images.dims[1] != IMAGE_SIDE || images.dims[2] != IMAGE_SIDE {
        return Err(Error::Data(format!(
            "{name} images: expected N x 28 x 28, got {:?}",
            images.dims
        )));
    }
    if labels.dims.len() != 1 || labels.dims[0] != images.dims[0] {
        return Err(Error::Data(format!(
            "{name}: {} labels for {} images",
            labels.dims.first().copied().unwrap_or(0),
            images.dims[0]
        )));
    }
    if let Some(&bad) = labels.payload.iter().find(|&&l| l as usize >= CLASSES) {
        return Err(Error::Data(format!("{name}: label {bad} out of range")));
    }
    let pixels: Vec<f64> = images.payload.iter().map(|&p| p as f64 / 255.0).collect();
    let matrix = Matrix::from_vec(images.dims[0], IMAGE_PIXELS, pixels)?;
    Dataset::new(matrix, labels.payload.iter().map(|&l| l as usize).collect())
}

/// Loads the four decompressed IDX files from `dir`, flattening each image to
/// a 784-value row and dividing pixels by 255.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = dataset_from_idx(
        read_idx_file(&dir.join(MNIST_FILES[0].0))?,
        read_idx_file(&dir.join(MNIST_FILES[1].0))?,
        "train",
    )?;
    let test = dataset_from_idx(
        read_idx_file(&dir.join(MNIST_FILES[2].0))?,
        read_idx_file(&dir.join(MNIST_FILES[3].0))?,
        "test",
    )?;
    Ok((train, test))
}

/// `sha256hex  filename` pairs pinning the gzip archives accepted by the
/// fetcher.
#[derive(Debug, Clone)]
pub struct ChecksumManifest {
    entries: HashMap<String, String>,
}

impl ChecksumManifest {
    /// Parses `hex  filename` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(hex), Some(name)) if hex.len() == 64 => {
                    entries.insert(name.to_string(), hex.to_ascii_lowercase());
                }
                _ => {
                    return Err(Error::Format(format!(
                        "bad checksum manifest line: {line}"
                    )))
                }
            }
        }
        Ok(ChecksumManifest { entries })
    }

    /// The manifest shipped with this crate (`checksums.txt`).
    pub fn embedded() -> Self {
        Self::parse(include_str!("../checksums.txt")).expect("embedded manifest is well-formed")
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.entries.get(name).map(String::as_str)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn gunzip(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    flate2::read::GzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| Error::Format(format!("gzip decode failed: {e}")))?;
    Ok(out)
}

fn http_get(url: &str) -> Result<Vec<u8>> {
    let response = ureq::get(url)
        .call()
        .map_err(|e| Error::Fetch(format!("GET {url}: {e}")))?;
    let mut bytes = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Fetch(format!("reading {url}: {e}")))?;
    Ok(bytes)
}

/// Downloads, verifies and installs the four MNIST files into `dir`.
///
/// Files already present are left untouched (no network traffic). Each gzip
/// archive is checked against the manifest before anything is written;
/// decompressed bytes go to a temp file that is renamed into place, so an
/// interrupted or corrupt download never leaves a partial file.
pub fn fetch_mnist(base_url: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    fetch_mnist_with(http_get, &ChecksumManifest::embedded(), base_url, dir)
}

/// [`fetch_mnist`] with an injectable transport, for tests and mirrors.
pub fn fetch_mnist_with(
    mut fetch: impl FnMut(&str) -> Result<Vec<u8>>,
    manifest: &ChecksumManifest,
    base_url: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut installed = Vec::with_capacity(MNIST_FILES.len());
    for (local, remote) in MNIST_FILES {
        let target = dir.join(local);
        if target.exists() {
            installed.push(target);
            continue;
        }
        let expected = manifest.get(remote).ok_or_else(|| {
            Error::Config(format!("no checksum pinned for {remote}"))
        })?;
        let url = format!("{}{}", base_url, remote);
        let gz = fetch(&url)?;
        let actual = sha256_hex(&gz);
        if actual != expected {
            return Err(Error::Integrity {
                file: remote.to_string(),
                expected: expected.to_string(),
                actual,
            });
        }
        let raw = gunzip(&gz)?;
        let tmp = dir.join(format!("{local}.tmp"));
        fs::write(&tmp, &raw)?;
        fs::rename(&tmp, &target)?;
        installed.push(target);
    }
    Ok(installed)
}

/// Splits a fresh Fisher-Yates permutation of the sample indices into
/// consecutive batches. The final partial batch is included, so
/// `n = 5, batch_size = 2` gives batches of sizes `[2, 2, 1]`.
pub fn epoch_batches<R: Rng + ?Sized>(
    ds: &Dataset,
    batch_size: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    perm.shuffle(rng);
    perm.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Well-separated Gaussian blobs in 784-dimensional space with balanced
/// labels and pixels clipped to `[0, 1]`. Class `c` lights up its own block
/// of coordinates, so even a small two-layer network separates the classes
/// within a few epochs.
pub fn make_synthetic<R: Rng + ?Sized>(n: usize, classes: usize, rng: &mut R) -> Dataset {
    assert!(classes >= 1 && n >= classes, "need n >= classes >= 1");
    let block = IMAGE_PIXELS / classes;
    let noise = Normal::new(0.0, 0.07).expect("valid sigma");
    let mut pixels = Vec::with_capacity(n * IMAGE_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let lo = class * block;
        let hi = lo + block;
        for d in 0..IMAGE_PIXELS {
            let mean = if d >= lo && d < hi { 0.85 } else { 0.08 };
            let v: f64 = mean + noise.sample(rng);
            pixels.push(v.clamp(0.0, 1.0));
        }
        labels.push(class);
    }
    let images = Matrix::from_vec(n, IMAGE_PIXELS, pixels).expect("sized above");
    Dataset { images, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::cell::Cell;

    #[test]
    fn parse_idx_label_fixture() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 3, 7, 2, 9];
        let idx = parse_idx(&bytes).unwrap();
        assert_eq!(idx.dims, vec![3]);
        assert_eq!(idx.payload, vec![7, 2, 9]);
    }

    #[test]
    fn parse_idx_rejects_bad_magic() {
        let bytes = [0, 0, 8, 2, 0, 0, 0, 1, 5];
        assert!(matches!(parse_idx(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn parse_idx_rejects_truncated_payload() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 4, 7, 2];
        assert!(matches!(parse_idx(&bytes), Err(Error::Length(_))));
    }

    #[test]
    fn encode_then_parse_is_identity() {
        let payload: Vec<u8> = (0..2 * 28 * 28).map(|i| (i % 251) as u8).collect();
        let bytes = encode_idx(&[2, 28, 28], &payload).unwrap();
        let idx = parse_idx(&bytes).unwrap();
        assert_eq!(idx.dims, vec![2, 28, 28]);
        assert_eq!(idx.payload, payload);
    }

    fn write_fixture_corpus(dir: &Path, train_n: usize, test_n: usize) {
        let image = |seed: usize| -> Vec<u8> {
            (0..IMAGE_PIXELS).map(|i| ((i + seed) % 256) as u8).collect()
        };
        let mut train_pixels = Vec::new();
        for i in 0..train_n {
            train_pixels.extend(image(i));
        }
        let mut test_pixels = Vec::new();
        for i in 0..test_n {
            test_pixels.extend(image(i + 13));
        }
        let train_labels: Vec<u8> = (0..train_n).map(|i| (i % 10) as u8).collect();
        let test_labels: Vec<u8> = (0..test_n).map(|i| (i % 10) as u8).collect();
        fs::write(
            dir.join(MNIST_FILES[0].0),
            encode_idx(&[train_n, 28, 28], &train_pixels).unwrap(),
        )
        .unwrap();
        fs::write(
            dir.join(MNIST_FILES[1].0),
            encode_idx(&[train_n], &train_labels).unwrap(),
        )
        .unwrap();
        fs::write(
            dir.join(MNIST_FILES[2].0),
            encode_idx(&[test_n, 28, 28], &test_pixels).unwrap(),
        )
        .unwrap();
        fs::write(
            dir.join(MNIST_FILES[3].0),
            encode_idx(&[test_n], &test_labels).unwrap(),
        )
        .unwrap();
    }

    #[test]
    fn load_mnist_normalizes_and_flattens() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_corpus(dir.path(), 12, 5);
        let (train, test) = load_mnist(dir.path()).unwrap();
        assert_eq!(train.len(), 12);
        assert_eq!(test.len(), 5);
        assert_eq!(train.images().cols(), 784);
        let max = train
            .images()
            .data()
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert_eq!(max, 1.0);
        assert!(train.images().data().iter().all(|&p| (0.0..=1.0).contains(&p)));

        let again = load_mnist(dir.path()).unwrap();
        assert_eq!(train, again.0);
        assert_eq!(test, again.1);
    }

    #[test]
    fn load_mnist_names_the_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_mnist(dir.path()).unwrap_err();
        match err {
            Error::Data(msg) => assert!(msg.contains("train-images-idx3-ubyte"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn epoch_batches_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let images = Matrix::zeros(5, 784);
        let ds = Dataset::new(images, vec![0, 1, 2, 3, 4]).unwrap();
        let batches = epoch_batches(&ds, 2, &mut rng);
        let sizes: Vec<usize> = batches.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 1]);

        let mut seen: Vec<usize> = batches.into_iter().flatten().collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn epoch_batches_seed_determinism_on_full_corpus_size() {
        let images = Matrix::zeros(60_000, 1);
        let ds = Dataset::new(images, vec![0; 60_000]).unwrap();
        let order = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            epoch_batches(&ds, 128, &mut rng)
        };
        let a = order(11);
        assert_eq!(a.len(), 469);
        assert_eq!(a.last().unwrap().len(), 96);
        assert_eq!(a, order(11));
        assert_ne!(a, order(12));
    }

    #[test]
    fn make_synthetic_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ds = make_synthetic(1000, 10, &mut rng);
        assert_eq!(ds.len(), 1000);
        let mut counts = [0usize; 10];
        for &l in ds.labels() {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c == 100));
        assert!(ds.images().data().iter().all(|&p| (0.0..=1.0).contains(&p)));

        let mut rng2 = ChaCha8Rng::seed_from_u64(8);
        assert_eq!(ds, make_synthetic(1000, 10, &mut rng2));
    }

    fn fixture_manifest(archives: &[(&str, &[u8])]) -> ChecksumManifest {
        let text: String = archives
            .iter()
            .map(|(name, bytes)| format!("{}  {}\n", sha256_hex(bytes), name))
            .collect();
        ChecksumManifest::parse(&text).unwrap()
    }

    fn gzip(bytes: &[u8]) -> Vec<u8> {
        use std::io::Write;
        let mut enc =
            flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(bytes).unwrap();
        enc.finish().unwrap()
    }

    #[test]
    fn fetch_installs_verifies_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let payloads: Vec<(String, Vec<u8>)> = MNIST_FILES
            .iter()
            .map(|(local, remote)| {
                let raw = format!("raw contents of {local}").into_bytes();
                (remote.to_string(), gzip(&raw))
            })
            .collect();
        let manifest = fixture_manifest(
            &payloads
                .iter()
                .map(|(n, b)| (n.as_str(), b.as_slice()))
                .collect::<Vec<_>>(),
        );
        let calls = Cell::new(0usize);
        let fetcher = |url: &str| {
            calls.set(calls.get() + 1);
            let name = url.rsplit('/').next().unwrap();
            payloads
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, b)| b.clone())
                .ok_or_else(|| Error::Fetch(format!("unexpected url {url}")))
        };

        let files =
            fetch_mnist_with(fetcher, &manifest, "http://example.test/", dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        assert_eq!(calls.get(), 4);
        for (local, _) in MNIST_FILES {
            let contents = fs::read(dir.path().join(local)).unwrap();
            assert_eq!(contents, format!("raw contents of {local}").into_bytes());
        }

        // second call: files exist, no traffic
        let fetcher2 = |_url: &str| -> Result<Vec<u8>> {
            panic!("no network traffic expected on second call")
        };
        fetch_mnist_with(fetcher2, &manifest, "http://example.test/", dir.path()).unwrap();
    }

    #[test]
    fn corrupt_download_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let good = gzip(b"expected");
        let manifest = fixture_manifest(&[(MNIST_FILES[0].1, good.as_slice())]);
        let fetcher = |_url: &str| Ok(b"tampered with".to_vec());
        let err = fetch_mnist_with(fetcher, &manifest, "http://example.test/", dir.path())
            .unwrap_err();
        assert!(matches!(err, Error::Integrity { .. }));
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert!(leftovers.is_empty(), "nothing should be written: {leftovers:?}");
    }

    #[test]
    fn manifest_rejects_malformed_lines() {
        assert!(ChecksumManifest::parse("deadbeef train-images\n").is_err());
        let ok = ChecksumManifest::parse(&format!("{}  some-file.gz\n", "ab".repeat(32))).unwrap();
        assert_eq!(ok.get("some-file.gz"), Some("ab".repeat(32).as_str()));
    }

    #[test]
    fn embedded_manifest_covers_all_archives() {
        let manifest = ChecksumManifest::embedded();
        for (_, remote) in MNIST_FILES {
            assert!(manifest.get(remote).is_some(), "{remote} missing");
        }
    }
}
