//! Binary tensor (`TNS1`) and observation (`OBS1`) files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! TNS1: b"SNTD" | u32 order d | d × u64 dims | total × f64 values (vectorization order)
//! OBS1: b"SNTO" | u32 order d | d × u64 dims | u8 model tag | f64 parameter | f64 floor
//!       | u64 m | m × (u64 linear index, f64 value), indices ascending
//! ```
//!
//! Model tags: 0 = Gaussian (parameter σ²), 1 = Laplace (parameter τ),
//! 2 = Poisson (parameter and floor both carry ϱ).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, ObservationSet};
use crate::tensor::{DenseTensor, Shape};

pub const TENSOR_MAGIC: &[u8; 4] = b"SNTD";
pub const OBS_MAGIC: &[u8; 4] = b"SNTO";

pub fn write_tensor<W: Write>(mut w: W, t: &DenseTensor) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    write_dims(&mut w, t.dims())?;
    for &v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<DenseTensor> {
    expect_magic(&mut r, TENSOR_MAGIC)?;
    let shape = read_dims(&mut r)?;
    let mut data = Vec::with_capacity(shape.total());
    for i in 0..shape.total() {
        data.push(read_f64(&mut r).map_err(|_| Error::Format(format!("tensor data truncated at value {i}")))?);
    }
    expect_eof(&mut r)?;
    DenseTensor::from_vec(shape, data)
}

pub fn write_observations<W: Write>(mut w: W, obs: &ObservationSet) -> Result<()> {
    w.write_all(OBS_MAGIC)?;
    write_dims(&mut w, obs.shape().dims())?;
    let model = obs.model();
    w.write_all(&[model.tag()])?;
    w.write_all(&model.parameter().to_le_bytes())?;
    let floor = match model {
        NoiseModel::Poisson { floor } => floor,
        _ => 0.0,
    };
    w.write_all(&floor.to_le_bytes())?;
    w.write_all(&(obs.len() as u64).to_le_bytes())?;
    for (i, y) in obs.iter() {
        w.write_all(&(i as u64).to_le_bytes())?;
        w.write_all(&y.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations<R: Read>(mut r: R) -> Result<ObservationSet> {
    expect_magic(&mut r, OBS_MAGIC)?;
    let shape = read_dims(&mut r)?;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag).map_err(|_| Error::Format("missing model tag".into()))?;
    let param = read_f64(&mut r).map_err(|_| Error::Format("missing model parameter".into()))?;
    let floor = read_f64(&mut r).map_err(|_| Error::Format("missing floor".into()))?;
    let model = match tag[0] {
        0 => NoiseModel::Gaussian { sigma2: param },
        1 => NoiseModel::Laplace { tau_noise: param },
        2 => NoiseModel::Poisson { floor },
        t => return Err(Error::Format(format!("unknown model tag {t}"))),
    };
    let m = read_u64(&mut r).map_err(|_| Error::Format("missing observation count".into()))?;
    if m > shape.total() as u64 {
        return Err(Error::Format(format!("{m} observations exceed {} entries", shape.total())));
    }
    let mut indices = Vec::with_capacity(m as usize);
    let mut values = Vec::with_capacity(m as usize);
    for k in 0..m {
        let trunc = |_| Error::Format(format!("observation record {k} truncated"));
        let i = read_u64(&mut r).map_err(trunc)?;
        let y = read_f64(&mut r).map_err(trunc)?;
        indices.push(i as usize);
        values.push(y);
    }
    expect_eof(&mut r)?;
    ObservationSet::new(shape, indices, values, model).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    write_tensor(BufWriter::new(File::create(path)?), t)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

pub fn save_observations(path: impl AsRef<Path>, obs: &ObservationSet) -> Result<()> {
    write_observations(BufWriter::new(File::create(path)?), obs)
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<ObservationSet> {
    read_observations(BufReader::new(File::open(path)?))
}

fn write_dims<W: Write>(w: &mut W, dims: &[usize]) -> Result<()> {
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &n in dims {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_dims<R: Read>(r: &mut R) -> Result<Shape> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|_| Error::Format("missing order".into()))?;
    let d = u32::from_le_bytes(b4) as usize;
    if d == 0 || d > 64 {
        return Err(Error::Format(format!("implausible order {d}")));
    }
    let dims = (0..d)
        .map(|_| {
            read_u64(r)
                .map_err(|_| Error::Format("dims truncated".into()))
                .and_then(|n| usize::try_from(n).map_err(|_| Error::Format(format!("dim {n} too large"))))
        })
        .collect::<Result<Vec<_>>>()?;
    Shape::new(dims).map_err(|e| Error::Format(e.to_string()))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got).map_err(|_| Error::Format("file too short for magic".into()))?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
