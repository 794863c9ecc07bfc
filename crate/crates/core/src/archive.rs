//! PDMDMODEL1 model archives.
//!
//! Layout (little-endian): magic `"PDMDMODEL1\n"`, a four-byte algorithm tag
//! (`roi\0`, `rkoi`, `mono`, `part`), a `u32` version, then four sections,
//! each a `u32` byte length followed by its payload: metadata, basis,
//! algorithm block, regressors. Floats are `f64`, complex numbers are stored
//! as `(re, im)` pairs, matrices as `u32` rows, `u32` cols and column-major data.

use std::fs;
use std::ops::Range;
use std::path::Path;

use crate::dmd::DmdModel;
use crate::error::{Error, Result};
use crate::latent::{Member, MonolithicModel, PartitionedModel};
use crate::linalg::Matrix;
use crate::metrics::Algorithm;
use crate::model::{PdmdModel, TrainedModel};
use crate::optdmd::OptDmdModel;
use crate::reduction::GlobalBasis;
use crate::regression::{Extrapolation, FittedRegressor, RbfKernel, RegressorKind, RegressorSpec};
use crate::rkoi::RkoiModel;
use crate::roi::RoiModel;
use crate::scalar::C;

pub const MAGIC: &[u8; 11] = b"PDMDMODEL1\n";
pub const VERSION: u32 = 1;

fn tag(a: Algorithm) -> [u8; 4] {
    match a {
        Algorithm::Roi => *b"roi\0",
        Algorithm::Rkoi => *b"rkoi",
        Algorithm::Monolithic => *b"mono",
        Algorithm::Partitioned => *b"part",
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Archive(msg.into())
}

#[derive(Default)]
struct Writer(Vec<u8>);

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

trait Codec: Sized {
    fn put(&self, w: &mut Writer);
    fn get(r: &mut Reader) -> Result<Self>;
}

impl Writer {
    fn put<V: Codec>(&mut self, v: &V) -> &mut Self {
        v.put(self);
        self
    }

    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn get<V: Codec>(&mut self) -> Result<V> {
        V::get(self)
    }

    fn finish(&self, what: &str) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(bad(format!("{} trailing bytes in {what}", self.buf.len() - self.pos)));
        }
        Ok(())
    }

    fn section(&mut self) -> Result<Reader<'a>> {
        let n = self.get::<u32>()? as usize;
        Ok(Reader::new(self.take(n)?))
    }
}

impl Codec for u8 {
    fn put(&self, w: &mut Writer) {
        w.bytes(&[*self]);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(r.take(1)?[0])
    }
}

impl Codec for u32 {
    fn put(&self, w: &mut Writer) {
        w.bytes(&self.to_le_bytes());
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")))
    }
}

impl Codec for u64 {
    fn put(&self, w: &mut Writer) {
        w.bytes(&self.to_le_bytes());
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Codec for usize {
    fn put(&self, w: &mut Writer) {
        (*self as u64).put(w);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        usize::try_from(r.get::<u64>()?).map_err(|_| bad("count overflows usize"))
    }
}

impl Codec for bool {
    fn put(&self, w: &mut Writer) {
        (*self as u8).put(w);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        match r.get::<u8>()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(bad(format!("invalid bool byte {b}"))),
        }
    }
}

impl Codec for f64 {
    fn put(&self, w: &mut Writer) {
        w.bytes(&self.to_le_bytes());
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Codec for C<f64> {
    fn put(&self, w: &mut Writer) {
        w.put(&self.re).put(&self.im);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(C::new(r.get()?, r.get()?))
    }
}

impl Codec for String {
    fn put(&self, w: &mut Writer) {
        (self.len() as u32).put(w);
        w.bytes(self.as_bytes());
    }
    fn get(r: &mut Reader) -> Result<Self> {
        let n = r.get::<u32>()? as usize;
        String::from_utf8(r.take(n)?.to_vec()).map_err(|_| bad("invalid utf-8"))
    }
}

impl<V: Codec> Codec for Vec<V> {
    fn put(&self, w: &mut Writer) {
        (self.len() as u32).put(w);
        self.iter().for_each(|v| v.put(w));
    }
    fn get(r: &mut Reader) -> Result<Self> {
        let n = r.get::<u32>()? as usize;
        // Every element takes at least one byte.
        if n > r.buf.len() - r.pos {
            return Err(bad("truncated"));
        }
        (0..n).map(|_| V::get(r)).collect()
    }
}

impl<V: Codec> Codec for Option<V> {
    fn put(&self, w: &mut Writer) {
        match self {
            None => 0u8.put(w),
            Some(v) => {
                1u8.put(w);
                v.put(w);
            }
        }
    }
    fn get(r: &mut Reader) -> Result<Self> {
        match r.get::<u8>()? {
            0 => Ok(None),
            1 => Ok(Some(r.get()?)),
            b => Err(bad(format!("invalid option byte {b}"))),
        }
    }
}

impl Codec for Range<usize> {
    fn put(&self, w: &mut Writer) {
        w.put(&self.start).put(&self.end);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(r.get()?..r.get()?)
    }
}

impl<E: Codec + crate::scalar::Field> Codec for Matrix<E> {
    fn put(&self, w: &mut Writer) {
        w.put(&(self.rows() as u32)).put(&(self.cols() as u32));
        self.data().iter().for_each(|v| v.put(w));
    }
    fn get(r: &mut Reader) -> Result<Self> {
        let rows = r.get::<u32>()? as usize;
        let cols = r.get::<u32>()? as usize;
        let n = rows.checked_mul(cols).ok_or_else(|| bad("matrix too large"))?;
        if n > r.buf.len() - r.pos {
            return Err(bad("truncated"));
        }
        let data = (0..n).map(|_| E::get(r)).collect::<Result<Vec<_>>>()?;
        Matrix::from_col_major(rows, cols, data)
    }
}

impl Codec for RegressorSpec {
    fn put(&self, w: &mut Writer) {
        match self.kind {
            RegressorKind::LinearInterp => w.put(&0u8),
            RegressorKind::Nearest => w.put(&1u8),
            RegressorKind::Rbf { kernel, shape } => w
                .put(&2u8)
                .put(&((kernel == RbfKernel::ThinPlate) as u8))
                .put(&shape),
            RegressorKind::Polynomial { degree, ridge } => w.put(&3u8).put(&degree).put(&ridge),
        };
        let e: u8 = match self.extrapolation {
            Extrapolation::Clamp => 0,
            Extrapolation::Allow => 1,
            Extrapolation::Error => 2,
        };
        w.put(&e);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        let kind = match r.get::<u8>()? {
            0 => RegressorKind::LinearInterp,
            1 => RegressorKind::Nearest,
            2 => RegressorKind::Rbf {
                kernel: if r.get::<u8>()? == 1 { RbfKernel::ThinPlate } else { RbfKernel::Gaussian },
                shape: r.get()?,
            },
            3 => RegressorKind::Polynomial {
                degree: r.get()?,
                ridge: r.get()?,
            },
            k => return Err(bad(format!("unknown regressor kind {k}"))),
        };
        let extrapolation = match r.get::<u8>()? {
            0 => Extrapolation::Clamp,
            1 => Extrapolation::Allow,
            2 => Extrapolation::Error,
            e => return Err(bad(format!("unknown extrapolation policy {e}"))),
        };
        Ok(RegressorSpec { kind, extrapolation })
    }
}

impl Codec for FittedRegressor<f64> {
    fn put(&self, w: &mut Writer) {
        w.put(&self.spec)
            .put(&self.params)
            .put(&self.coeffs)
            .put(&self.shape)
            .put(&self.lower)
            .put(&self.upper)
            .put(&self.order)
            .put(&self.exponents);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(FittedRegressor {
            spec: r.get()?,
            params: r.get()?,
            coeffs: r.get()?,
            shape: r.get()?,
            lower: r.get()?,
            upper: r.get()?,
            order: r.get()?,
            exponents: r.get()?,
        })
    }
}

impl Codec for GlobalBasis<f64> {
    fn put(&self, w: &mut Writer) {
        w.put(&self.modes_u)
            .put(&self.singular_values)
            .put(&self.energy_captured)
            .put(&self.center);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(GlobalBasis {
            modes_u: r.get()?,
            singular_values: r.get()?,
            energy_captured: r.get()?,
            center: r.get()?,
        })
    }
}

impl Codec for DmdModel<f64> {
    fn put(&self, w: &mut Writer) {
        w.put(&self.rank)
            .put(&self.reduced_op)
            .put(&self.pod_modes)
            .put(&self.singular_values)
            .put(&self.eigenvalues)
            .put(&self.reduced_eigenvectors)
            .put(&self.modes)
            .put(&self.amplitudes)
            .put(&self.dt)
            .put(&self.t0);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(DmdModel {
            rank: r.get()?,
            reduced_op: r.get()?,
            pod_modes: r.get()?,
            singular_values: r.get()?,
            eigenvalues: r.get()?,
            reduced_eigenvectors: r.get()?,
            modes: r.get()?,
            amplitudes: r.get()?,
            dt: r.get()?,
            t0: r.get()?,
        })
    }
}

impl Codec for OptDmdModel<f64> {
    fn put(&self, w: &mut Writer) {
        w.put(&self.rank)
            .put(&self.omegas)
            .put(&self.modes)
            .put(&self.amplitudes)
            .put(&self.t0)
            .put(&self.residual)
            .put(&self.initial_residual)
            .put(&self.iterations)
            .put(&self.converged);
    }
    fn get(r: &mut Reader) -> Result<Self> {
        Ok(OptDmdModel {
            rank: r.get()?,
            omegas: r.get()?,
            modes: r.get()?,
            amplitudes: r.get()?,
            t0: r.get()?,
            residual: r.get()?,
            initial_residual: r.get()?,
            iterations: r.get()?,
            converged: r.get()?,
        })
    }
}

impl Codec for Member<f64> {
    fn put(&self, w: &mut Writer) {
        match self {
            Member::Dmd(m) => w.put(&0u8).put(m),
            Member::Opt(m) => w.put(&1u8).put(m),
        };
    }
    fn get(r: &mut Reader) -> Result<Self> {
        match r.get::<u8>()? {
            0 => Ok(Member::Dmd(r.get()?)),
            1 => Ok(Member::Opt(r.get()?)),
            k => Err(bad(format!("unknown member kind {k}"))),
        }
    }
}

fn section(w: &mut Writer, fill: impl FnOnce(&mut Writer)) {
    let mut s = Writer::default();
    fill(&mut s);
    (s.0.len() as u32).put(w);
    w.bytes(&s.0);
}

pub fn encode_model(m: &TrainedModel<f64>) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.bytes(&tag(m.algorithm()));
    w.put(&VERSION);
    section(&mut w, |s| {
        s.put(&m.offline_seconds)
            .put(&m.rank)
            .put(&m.op_rank)
            .put(&m.t0)
            .put(&m.dt)
            .put(&m.n_t)
            .put(&m.train_params)
            .put(&m.regressor);
    });
    section(&mut w, |s| {
        s.put(m.model.basis());
    });
    match &m.model {
        PdmdModel::Roi(x) => {
            section(&mut w, |s| {
                s.put(&x.op_modes)
                    .put(&x.op_singular_values)
                    .put(&x.dt)
                    .put(&x.t0)
                    .put(&x.latent_residuals);
            });
            section(&mut w, |s| {
                s.put(&x.coeff_regressor).put(&x.init_regressor);
            });
        }
        PdmdModel::Rkoi(x) => {
            section(&mut w, |s| {
                s.put(&x.member_rank).put(&x.t0).put(&x.partners).put(&x.warnings);
            });
            section(&mut w, |s| {
                s.put(&x.mode_regressor).put(&x.omega_regressor).put(&x.amp_regressor);
            });
        }
        PdmdModel::Monolithic(x) => {
            section(&mut w, |s| {
                s.put(&x.stacked_dmd).put(&x.params).put(&x.block_map).put(&x.dt).put(&x.t0);
            });
            section(&mut w, |_| {});
        }
        PdmdModel::Partitioned(x) => {
            section(&mut w, |s| {
                s.put(&x.members).put(&x.params).put(&x.dt).put(&x.t0);
            });
            section(&mut w, |_| {});
        }
    }
    w.0
}

pub fn decode_model(buf: &[u8]) -> Result<TrainedModel<f64>> {
    let mut r = Reader::new(buf);
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::BadMagic("expected PDMDMODEL1".into()));
    }
    let t = r.take(4)?;
    let algorithm = Algorithm::ALL
        .into_iter()
        .find(|&a| tag(a) == t)
        .ok_or_else(|| bad(format!("unknown algorithm tag {:?}", String::from_utf8_lossy(t))))?;
    let version = r.get::<u32>()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }

    let mut meta = r.section()?;
    let offline_seconds = meta.get()?;
    let rank = meta.get()?;
    let op_rank = meta.get()?;
    let t0 = meta.get()?;
    let dt = meta.get()?;
    let n_t = meta.get()?;
    let train_params = meta.get()?;
    let regressor = meta.get()?;
    meta.finish("metadata")?;

    let mut b = r.section()?;
    let basis: GlobalBasis<f64> = b.get()?;
    b.finish("basis")?;

    let mut a = r.section()?;
    let mut g = r.section()?;
    let model = match algorithm {
        Algorithm::Roi => PdmdModel::Roi(RoiModel {
            basis,
            op_modes: a.get()?,
            op_singular_values: a.get()?,
            dt: a.get()?,
            t0: a.get()?,
            latent_residuals: a.get()?,
            coeff_regressor: g.get()?,
            init_regressor: g.get()?,
        }),
        Algorithm::Rkoi => PdmdModel::Rkoi(RkoiModel {
            basis,
            member_rank: a.get()?,
            t0: a.get()?,
            partners: a.get()?,
            warnings: a.get()?,
            mode_regressor: g.get()?,
            omega_regressor: g.get()?,
            amp_regressor: g.get()?,
        }),
        Algorithm::Monolithic => PdmdModel::Monolithic(MonolithicModel {
            basis,
            stacked_dmd: a.get()?,
            params: a.get()?,
            block_map: a.get()?,
            dt: a.get()?,
            t0: a.get()?,
        }),
        Algorithm::Partitioned => PdmdModel::Partitioned(PartitionedModel {
            basis,
            members: a.get()?,
            params: a.get()?,
            dt: a.get()?,
            t0: a.get()?,
        }),
    };
    a.finish("algorithm block")?;
    g.finish("regressors")?;
    r.finish("archive")?;
    Ok(TrainedModel {
        model,
        regressor,
        train_params,
        rank,
        op_rank,
        t0,
        dt,
        n_t,
        offline_seconds,
    })
}

pub fn save_model(m: &TrainedModel<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel<f64>> {
    let path = path.as_ref();
    decode_model(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fit_model, FitConfig};
    use crate::synth::{generate, SynthSpec};

    fn bits(m: &Matrix<f64>) -> Vec<u64> {
        m.data().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn every_algorithm_roundtrips_bitwise() {
        let (d, _) = generate(&SynthSpec::linear(16, 4, 4, 24, 3)).unwrap();
        let times: Vec<f64> = (0..40).map(|k| 0.1 * k as f64).collect();
        for alg in Algorithm::ALL {
            let m = fit_model(&d, &FitConfig::new(alg, 4, 1)).unwrap();
            let bytes = encode_model(&m);
            assert_eq!(&bytes[..11], MAGIC);
            let back = decode_model(&bytes).unwrap();
            assert_eq!(back, m, "{alg}");
            let a = m.predict(&[0.37], &times).unwrap();
            let b = back.predict(&[0.37], &times).unwrap();
            assert_eq!(bits(&a), bits(&b));
            assert_eq!(encode_model(&back), bytes);
        }
    }

    #[test]
    fn optimized_members_and_specs_roundtrip() {
        let (d, _) = generate(&SynthSpec::linear(12, 2, 3, 20, 4)).unwrap();
        let mut cfg = FitConfig::new(Algorithm::Partitioned, 2, 1);
        cfg.optimized_members = true;
        cfg.regressor = RegressorSpec {
            kind: RegressorKind::Rbf {
                kernel: RbfKernel::ThinPlate,
                shape: Some(0.5),
            },
            extrapolation: Extrapolation::Error,
        };
        let m = fit_model(&d, &cfg).unwrap();
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
        cfg.algorithm = Algorithm::Roi;
        cfg.regressor = RegressorSpec::new(RegressorKind::Polynomial { degree: 2, ridge: 1e-9 });
        let m = fit_model(&d, &cfg).unwrap();
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_corruption() {
        let (d, _) = generate(&SynthSpec::linear(8, 2, 2, 12, 5)).unwrap();
        let m = fit_model(&d, &FitConfig::new(Algorithm::Roi, 2, 1)).unwrap();
        let bytes = encode_model(&m);
        assert!(matches!(decode_model(&bytes[..5]), Err(Error::BadMagic(_))));
        assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(&extra).is_err());
        let mut tagged = bytes.clone();
        tagged[11..15].copy_from_slice(b"xxxx");
        assert!(decode_model(&tagged).is_err());
        let mut versioned = bytes;
        versioned[15] = 9;
        assert!(decode_model(&versioned).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let (d, _) = generate(&SynthSpec::linear(8, 2, 3, 12, 6)).unwrap();
        let m = fit_model(&d, &FitConfig::new(Algorithm::Rkoi, 2, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pdmdmodel");
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
        assert!(matches!(load_model(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
