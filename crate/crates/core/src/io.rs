//! PDMD1 binary files, per-parameter CSV files, and manifests.
//!
//! PDMD1 layout (little-endian): magic `"PDMD1\n"`, four `u32` (p, N_p, N_h, N_t),
//! N_t time instants, N_p·p parameters, then N_p column-major N_h×N_t blocks.
//! All floats are stored as `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::snapshot::{ParametricDataset, SnapshotMatrix, TimeGrid};

pub const MAGIC: &[u8; 6] = b"PDMD1\n";
pub const HEADER_BYTES: u64 = 6 + 4 * 4;

/// Exact size of a PDMD1 file for the given shape.
pub fn pdmd1_file_size(p: usize, n_p: usize, n_h: usize, n_t: usize) -> u64 {
    let (p, n_p, n_h, n_t) = (p as u64, n_p as u64, n_h as u64, n_t as u64);
    HEADER_BYTES + 8 * n_t + 8 * n_p * p + 8 * n_p * n_h * n_t
}

pub fn write_dataset<T: Real>(d: &ParametricDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_dataset(d, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serializes into any writer.
pub fn encode_dataset<T: Real>(d: &ParametricDataset<T>, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    for n in [d.param_dim(), d.n_params(), d.n_h(), d.n_t()] {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &t in d.grid().instants() {
        w.write_all(&t.to_f64_().to_le_bytes())?;
    }
    for p in d.params() {
        for &v in p {
            w.write_all(&v.to_f64_().to_le_bytes())?;
        }
    }
    for x in d.trajectories() {
        for &v in x.data() {
            w.write_all(&v.to_f64_().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dataset<T: Real>(path: impl AsRef<Path>) -> Result<ParametricDataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn decode_dataset<T: Real>(r: &mut impl Read) -> Result<ParametricDataset<T>> {
    let mut magic = [0u8; 6];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic(format!(
            "expected {:?}, found {:?}",
            String::from_utf8_lossy(MAGIC),
            String::from_utf8_lossy(&magic)
        )));
    }
    let p = read_u32(r)? as usize;
    let n_p = read_u32(r)? as usize;
    let n_h = read_u32(r)? as usize;
    let n_t = read_u32(r)? as usize;
    let times = read_f64s::<T>(r, n_t)?;
    let grid = Arc::new(TimeGrid::new(times)?);
    let flat = read_f64s::<T>(r, n_p * p)?;
    let params = flat.chunks(p.max(1)).take(n_p).map(|c| c.to_vec()).collect();
    let mut trajectories = Vec::with_capacity(n_p);
    for _ in 0..n_p {
        let block = read_f64s::<T>(r, n_h * n_t)?;
        trajectories.push(Matrix::from_col_major(n_h, n_t, block)?);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe).map_err(|e| Error::Format(e.to_string()))? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    ParametricDataset::new(params, trajectories, grid)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated file ({e})")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<T: Real>(r: &mut impl Read, n: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        read_exact(r, &mut b)?;
        out.push(T::c(f64::from_le_bytes(b)));
    }
    Ok(out)
}

/// One trajectory from CSV: first column time, remaining columns state entries.
///
/// A header row is skipped when its first field does not parse as a number.
pub fn read_csv_snapshots<T: Real>(path: impl AsRef<Path>) -> Result<SnapshotMatrix<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_snapshots(file).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv_snapshots<T: Real>(input: impl Read) -> Result<SnapshotMatrix<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut times = Vec::new();
    let mut columns: Vec<Vec<T>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let first = rec.get(0).unwrap_or("");
        if line == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        let values: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: cannot parse {s:?}", line + 1)))
            })
            .collect::<Result<_>>()?;
        if values.len() < 2 {
            return Err(Error::Format(format!("row {}: need time and at least one state entry", line + 1)));
        }
        if let Some(c) = columns.first() {
            if c.len() != values.len() - 1 {
                return Err(Error::DimensionMismatch {
                    context: "csv row width",
                    expected: c.len() + 1,
                    found: values.len(),
                });
            }
        }
        times.push(T::c(values[0]));
        columns.push(values[1..].iter().map(|&v| T::c(v)).collect());
    }
    let n_h = columns.first().map_or(0, |c| c.len());
    let grid = Arc::new(TimeGrid::new(times)?);
    SnapshotMatrix::new(Matrix::from_columns(n_h, &columns)?, grid)
}

/// Manifest entry: CSV path and parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub params: Vec<f64>,
}

/// Parses `path value1 value2 ...` lines; blank lines and `#` comments are ignored.
/// Relative paths resolve against `base`.
pub fn parse_manifest(input: impl BufRead, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let file = parts.next().unwrap_or_default();
        let params = parts
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("manifest line {}: bad value {s:?}", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if params.is_empty() {
            return Err(Error::Format(format!("manifest line {}: no parameter values", n + 1)));
        }
        let p = PathBuf::from(file);
        let path = if p.is_absolute() { p } else { base.join(p) };
        out.push(ManifestEntry { path, params });
    }
    Ok(out)
}

/// Loads a dataset described by a manifest of CSV files.
pub fn read_manifest_dataset<T: Real>(manifest: impl AsRef<Path>) -> Result<ParametricDataset<T>> {
    let manifest = manifest.as_ref();
    let file = File::open(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(BufReader::new(file), base)?;
    if entries.is_empty() {
        return Err(Error::Format(format!("{}: manifest lists no files", manifest.display())));
    }
    let mut grid: Option<Arc<TimeGrid<T>>> = None;
    let mut params = Vec::new();
    let mut traj = Vec::new();
    for e in &entries {
        let s = read_csv_snapshots::<T>(&e.path)?;
        match &grid {
            None => grid = Some(Arc::clone(&s.grid)),
            Some(g) if **g != *s.grid => {
                return Err(Error::Format(format!(
                    "{}: time grid differs from the first file",
                    e.path.display()
                )))
            }
            Some(_) => {}
        }
        params.push(e.params.iter().map(|&v| T::c(v)).collect());
        traj.push(s.state);
    }
    ParametricDataset::new(params, traj, grid.expect("non-empty manifest"))
}

/// Opens PDMD1 files by magic and anything else as a CSV manifest.
pub fn open_dataset<T: Real>(path: impl AsRef<Path>) -> Result<ParametricDataset<T>> {
    let path = path.as_ref();
    let mut head = [0u8; 6];
    let n = File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .map_err(|e| Error::io(path, e))?;
    if n == 6 && &head == MAGIC {
        return read_dataset(path);
    }
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if matches!(ext, "manifest" | "txt" | "lst") {
        return read_manifest_dataset(path);
    }
    Err(Error::BadMagic(format!(
        "{}: not a PDMD1 file and not a .manifest/.txt CSV manifest",
        path.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ParametricDataset<f64> {
        let grid = Arc::new(TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap());
        let x = Matrix::from_rows(2, 3, &[1.0, -2.5, 3.25, 0.1, f64::MIN_POSITIVE, 1e300]);
        ParametricDataset::new(vec![vec![0.7]], vec![x], grid).unwrap()
    }

    #[test]
    fn roundtrip_bitwise() {
        let d = small();
        let mut buf = Vec::new();
        encode_dataset(&d, &mut buf).unwrap();
        assert_eq!(buf.len() as u64, pdmd1_file_size(1, 1, 2, 3));
        let back: ParametricDataset<f64> = decode_dataset(&mut buf.as_slice()).unwrap();
        assert_eq!(back, d);
        let mut again = Vec::new();
        encode_dataset(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        encode_dataset(&small(), &mut buf).unwrap();
        assert_eq!(&buf[..6], b"PDMD1\n");
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[14..18].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[18..22].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[30..38].try_into().unwrap()), 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        let mut buf = Vec::new();
        encode_dataset(&small(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dataset::<f64>(&mut bad.as_slice()), Err(Error::BadMagic(_))));

        // Swap the second and third time instants.
        let mut shuffled = buf.clone();
        let (a, b) = (22 + 8, 22 + 16);
        let tmp: Vec<u8> = shuffled[a..a + 8].to_vec();
        shuffled.copy_within(b..b + 8, a);
        shuffled[b..b + 8].copy_from_slice(&tmp);
        let err = decode_dataset::<f64>(&mut shuffled.as_slice()).unwrap_err();
        assert_eq!(err.to_string(), "time grid not increasing");

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(decode_dataset::<f64>(&mut &truncated[..]), Err(Error::Format(_))));

        let mut nan = buf.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_dataset::<f64>(&mut nan.as_slice()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn large_dataset_size() {
        let payload = 8u64 * 26 * 4951 * 1000;
        let header = HEADER_BYTES + 8 * 1000 + 8 * 26;
        assert_eq!(pdmd1_file_size(1, 26, 4951, 1000), header + payload);
    }

    #[test]
    fn unwritable_path_names_path() {
        let err = write_dataset(&small(), "/nonexistent-dir/x.pdmd").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.pdmd"));
    }

    #[test]
    fn csv_with_header() {
        let text = "t,x1,x2\n0.0,1.0,2.0\n0.1,3.0,4.0\n0.2,5.0,6.0\n";
        let s: SnapshotMatrix<f64> = parse_csv_snapshots(text.as_bytes()).unwrap();
        assert_eq!(s.state.shape(), (2, 3));
        assert_eq!(s.state.row(0), vec![1.0, 3.0, 5.0]);
        assert_eq!(s.state.row(1), vec![2.0, 4.0, 6.0]);
        assert_eq!(s.grid.instants(), &[0.0, 0.1, 0.2]);
    }

    #[test]
    fn manifest_dataset() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "t,x\n0,1\n1,2\n").unwrap();
        std::fs::write(dir.path().join("b.csv"), "0,3\n1,4\n").unwrap();
        let m = dir.path().join("set.manifest");
        std::fs::write(&m, "# comment\na.csv 1.0\nb.csv 2.0\n").unwrap();
        let d: ParametricDataset<f64> = open_dataset(&m).unwrap();
        assert_eq!(d.n_params(), 2);
        assert_eq!(d.params()[1], vec![2.0]);
        assert_eq!(d.trajectories()[1].row(0), vec![3.0, 4.0]);

        let bin = dir.path().join("set.pdmd");
        write_dataset(&d, &bin).unwrap();
        assert_eq!(open_dataset::<f64>(&bin).unwrap(), d);
    }
}
