//! Concurrent single-body coefficient cache with a binary file format.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use super::{BackendKind, BodyResponse, CylinderGeometry, HydroBackend, RadiationSolution, SingleBodyCoeffs};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"WFHCACH1";
/// Quantization step in `ln(x)`: 1e-6 relative.
const QUANTUM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    pub radius: i64,
    pub slenderness: i64,
    pub depth: i64,
    pub omega: i64,
    pub backend: u8,
    pub n_terms: u32,
    pub partial_waves: u32,
}

fn quantize(x: f64) -> i64 {
    (x.ln() / QUANTUM).round() as i64
}

fn dequantize(q: i64) -> f64 {
    (q as f64 * QUANTUM).exp()
}

/// Canonical key: `R`, `AR`, `h` and `omega` quantized to 1e-6 relative,
/// plus the backend and its truncation parameters.
pub fn cache_key(geom: &CylinderGeometry, omega: f64, backend: &HydroBackend) -> CacheKey {
    CacheKey {
        radius: quantize(geom.radius()),
        slenderness: quantize(geom.slenderness()),
        depth: quantize(geom.depth()),
        omega: quantize(omega),
        backend: backend.kind.tag(),
        n_terms: backend.n_terms as u32,
        partial_waves: match backend.kind {
            BackendKind::Ms => backend.partial_waves,
            _ => 0,
        },
    }
}

/// Shared store of [`BodyResponse`] values. Reads proceed concurrently;
/// inserts take an exclusive lock. Entries are never evicted.
#[derive(Debug, Default)]
pub struct CoefficientCache {
    entries: RwLock<HashMap<CacheKey, Arc<BodyResponse>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CoefficientCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Geometry and frequency snapped to the key quantum.
    pub fn canonical(geom: &CylinderGeometry, omega: f64) -> Result<(CylinderGeometry, f64)> {
        let snapped = CylinderGeometry::new(
            dequantize(quantize(geom.radius())),
            dequantize(quantize(geom.slenderness())),
            dequantize(quantize(geom.depth())),
        )?;
        Ok((snapped, dequantize(quantize(omega))))
    }

    /// Looks up or computes the body response at the canonical inputs.
    pub fn body_response(
        &self,
        geom: &CylinderGeometry,
        omega: f64,
        backend: &HydroBackend,
    ) -> Result<Arc<BodyResponse>> {
        let key = cache_key(geom, omega, backend);
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(hit));
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let (geom, omega) = Self::canonical(geom, omega)?;
        let value = Arc::new(BodyResponse::compute(&geom, omega, backend)?);
        let mut map = self.entries.write().expect("cache lock poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(value)))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(hits, misses)` since construction.
    pub fn stats(&self) -> (u64, u64) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }

    /// Writes all entries, sorted by key, in little-endian binary.
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        let map = self.entries.read().expect("cache lock poisoned");
        let mut keys: Vec<&CacheKey> = map.keys().collect();
        keys.sort();
        let mut buf = Vec::with_capacity(64 + keys.len() * 160);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(keys.len() as u64).to_le_bytes());
        for key in keys {
            let value = &map[key];
            for q in [key.radius, key.slenderness, key.depth, key.omega] {
                buf.extend_from_slice(&q.to_le_bytes());
            }
            buf.push(key.backend);
            buf.extend_from_slice(&key.n_terms.to_le_bytes());
            buf.extend_from_slice(&key.partial_waves.to_le_bytes());
            let rad = &value.radiation;
            let c = &rad.coeffs;
            let mut floats = vec![
                c.omega,
                c.added_mass,
                c.radiation_damping,
                c.excitation.re,
                c.excitation.im,
                rad.wavenumber,
                rad.outgoing.re,
                rad.outgoing.im,
                rad.partial_force.re,
                rad.partial_force.im,
            ];
            for d in &value.diffraction {
                floats.extend([d.re, d.im]);
            }
            buf.extend_from_slice(&(value.diffraction.len() as u32).to_le_bytes());
            for f in floats {
                buf.extend_from_slice(&f.to_le_bytes());
            }
        }
        sink.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut source: R) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let count = cur.u64()?;
        let mut map = HashMap::new();
        for _ in 0..count {
            let key = CacheKey {
                radius: cur.i64()?,
                slenderness: cur.i64()?,
                depth: cur.i64()?,
                omega: cur.i64()?,
                backend: cur.take(1)?[0],
                n_terms: cur.u32()?,
                partial_waves: cur.u32()?,
            };
            let n_diff = cur.u32()? as usize;
            let mut f = [0.0; 10];
            for v in &mut f {
                *v = cur.f64()?;
            }
            let diffraction = (0..n_diff)
                .map(|_| Ok(Complex64::new(cur.f64()?, cur.f64()?)))
                .collect::<Result<Vec<_>>>()?;
            let value = BodyResponse {
                radiation: RadiationSolution {
                    coeffs: SingleBodyCoeffs {
                        omega: f[0],
                        added_mass: f[1],
                        radiation_damping: f[2],
                        excitation: Complex64::new(f[3], f[4]),
                    },
                    wavenumber: f[5],
                    outgoing: Complex64::new(f[6], f[7]),
                    partial_force: Complex64::new(f[8], f[9]),
                },
                diffraction,
            };
            map.insert(key, Arc::new(value));
        }
        if cur.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(CoefficientCache {
            entries: RwLock::new(map),
            ..Default::default()
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    /// Loads a cache file, or returns an empty cache if `path` does not exist.
    pub fn load_or_default(path: &Path) -> Result<Self> {
        match std::fs::File::open(path) {
            Ok(file) => Self::read_from(std::io::BufReader::new(file)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }
}

fn corrupt(msg: &str) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("coefficient cache: {msg}"),
    ))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(corrupt("truncated"));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
