//! The `MVAN` little-endian weights container.
//!
//! Layout: magic, version u32, hyper-parameters, normalization mean/std
//! (6 × f32), tensor count u64, then per tensor: name length u32, UTF-8
//! name, rank u32, dims u32[rank], f32 data. Running statistics travel as
//! ordinary tensors named `*.running_mean` / `*.running_var`.

use std::path::Path;

use crate::arch::{build_model, ArchHyperParams, Model};
use crate::error::{Error, Result};
use crate::layers::Module;
use crate::Tensor;

use super::NormStats;

pub const MAGIC: &[u8; 4] = b"MVAN";
pub const FORMAT_VERSION: u32 = 1;

/// A loaded weights file.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub norm: NormStats,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("value fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_weights(model: &Model<f32>, norm: &NormStats) -> Vec<u8> {
    let hp = model.hparams();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, &hp.name);
    for k in hp.k {
        put_u32(&mut out, k);
    }
    for r in [hp.a1, hp.a2, hp.t] {
        out.extend_from_slice(&r.to_le_bytes());
    }
    for v in [hp.p, hp.num_classes, hp.input_hw.0, hp.input_hw.1] {
        put_u32(&mut out, v);
    }
    out.push(hp.attention as u8);
    for v in norm.mean.iter().chain(&norm.std) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let tensors = model.tensors();
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for p in tensors {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.dims.len());
        for &d in &p.dims {
            put_u32(&mut out, d);
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_weights(model: &Model<f32>, norm: &NormStats, path: &Path) -> Result<()> {
    std::fs::write(path, encode_weights(model, norm))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<Checkpoint> {
    decode_weights(&std::fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Weights {
            offset: self.pos as u64,
            msg: msg.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return self.fail(format!("truncated while reading {what}"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        Ok(self.u32(what)? as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let start = self.pos;
        let n = self.usize(what)?;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Weights {
            offset: start as u64,
            msg: format!("{what} is not valid UTF-8"),
        })
    }
}

pub fn decode_weights(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        r.pos = 0;
        return r.fail(format!(
            "bad magic {:?}, expected \"MVAN\"",
            String::from_utf8_lossy(magic)
        ));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        r.pos -= 4;
        return r.fail(format!("unsupported format version {version}"));
    }
    let name = r.string("preset name")?;
    let mut k = [0usize; 4];
    for v in &mut k {
        *v = r.usize("k")?;
    }
    let (a1, a2, t) = (r.f64("a1")?, r.f64("a2")?, r.f64("t")?);
    let (p, num_classes) = (r.usize("p")?, r.usize("num_classes")?);
    let input_hw = (r.usize("input height")?, r.usize("input width")?);
    let attention = match r.take(1, "attention flag")?[0] {
        0 => false,
        1 => true,
        other => {
            r.pos -= 1;
            return r.fail(format!("attention flag must be 0 or 1, found {other}"));
        }
    };
    let hp = ArchHyperParams {
        name,
        k,
        a1,
        a2,
        t,
        p,
        num_classes,
        input_hw,
        attention,
    };
    let header_end = r.pos;
    hp.validate().map_err(|e| Error::Weights {
        offset: header_end as u64,
        msg: e.to_string(),
    })?;
    let mut norm = NormStats::default();
    for v in norm.mean.iter_mut().chain(norm.std.iter_mut()) {
        *v = r.f32("normalization statistics")?;
    }
    let mut model: Model<f32> = build_model(&hp)?;
    let expected: Vec<(String, Vec<usize>)> = model
        .tensors()
        .iter()
        .map(|p| (p.name.clone(), p.dims.clone()))
        .collect();
    let count = r.u64("tensor count")?;
    if count != expected.len() as u64 {
        r.pos -= 8;
        return r.fail(format!(
            "file holds {count} tensors, architecture needs {}",
            expected.len()
        ));
    }
    let mut values = Vec::with_capacity(expected.len());
    for (want_name, want_dims) in &expected {
        let at = r.pos;
        let name = r.string("tensor name")?;
        if &name != want_name {
            r.pos = at;
            return r.fail(format!("expected tensor `{want_name}`, found `{name}`"));
        }
        let rank = r.usize("rank")?;
        if rank > 8 {
            return r.fail(format!("tensor `{name}` has implausible rank {rank}"));
        }
        let dims = (0..rank)
            .map(|_| r.usize("dims"))
            .collect::<Result<Vec<_>>>()?;
        if &dims != want_dims {
            return r.fail(format!(
                "tensor `{name}` has dims {dims:?}, expected {want_dims:?}"
            ));
        }
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| r.f32(&name)).collect::<Result<Vec<_>>>()?;
        values.push(data);
    }
    if r.pos != buf.len() {
        return r.fail(format!("{} trailing bytes", buf.len() - r.pos));
    }
    let mut it = values.into_iter();
    model.visit_params_mut(&mut |p| {
        let shape = p.value.shape();
        p.value = Tensor::new(shape, it.next().expect("count checked")).expect("dims checked");
    });
    model.visit_bn_mut(&mut |bn| bn.mark_stats_ready());
    Ok(Checkpoint { model, norm })
}
