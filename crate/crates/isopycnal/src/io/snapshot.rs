//! Binary snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      7 bytes  "ISOPYC1"
//! version    u32
//! d          u32
//! nx         u64
//! nr         u64      vertical rows (Nz for Eulerian snapshots)
//! length     f64      horizontal period
//! eps, mu, t f64 x 3
//! coord      u8       0 = isopycnal, 1 = Eulerian
//! count      u32      number of fields
//! per field: name length u32, name bytes (UTF-8), nr * nx^d f64, r outermost
//! ```
//!
//! The file must end exactly after the last field.

use std::path::Path;

use crate::bridge::EulerianState;
use crate::domain::{Field, FlowState, Grid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"ISOPYC1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Isopycnal,
    Eulerian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub eps: f64,
    pub mu: f64,
    pub t: f64,
    pub coord: Coordinate,
    pub fields: Vec<(String, Field)>,
}

fn component_names(d: usize) -> impl Iterator<Item = String> {
    (0..d).map(|a| format!("v{a}"))
}

impl Snapshot {
    /// Fields `v0[, v1], w, eta`.
    pub fn from_state(grid: &Grid, state: &FlowState, eps: f64, mu: f64) -> Self {
        let mut fields: Vec<(String, Field)> =
            component_names(grid.d).zip(state.v.iter().cloned()).collect();
        fields.push(("w".into(), state.w.clone()));
        fields.push(("eta".into(), state.eta.clone()));
        Self {
            grid: *grid,
            eps,
            mu,
            t: state.t,
            coord: Coordinate::Isopycnal,
            fields,
        }
    }

    /// Fields `v0[, v1], w, rho, rho_pert`.
    pub fn from_eulerian(eul: &EulerianState, mu: f64) -> Self {
        let mut fields: Vec<(String, Field)> =
            component_names(eul.grid.d).zip(eul.v.iter().cloned()).collect();
        fields.push(("w".into(), eul.w.clone()));
        fields.push(("rho".into(), eul.rho.clone()));
        fields.push(("rho_pert".into(), eul.rho_pert.clone()));
        Self {
            grid: eul.grid,
            eps: eul.eps,
            mu,
            t: eul.t,
            coord: Coordinate::Eulerian,
            fields,
        }
    }

    pub fn field(&self, name: &str) -> Result<&Field> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::FormatMismatch(format!("snapshot has no field `{name}`")))
    }

    fn expect(&self, coord: Coordinate) -> Result<()> {
        if self.coord != coord {
            return Err(Error::FormatMismatch(format!(
                "expected a {coord:?} snapshot, found {:?}",
                self.coord
            )));
        }
        Ok(())
    }

    pub fn to_state(&self) -> Result<FlowState> {
        self.expect(Coordinate::Isopycnal)?;
        let v = component_names(self.grid.d)
            .map(|n| self.field(&n).cloned())
            .collect::<Result<_>>()?;
        Ok(FlowState {
            t: self.t,
            v,
            w: self.field("w")?.clone(),
            eta: self.field("eta")?.clone(),
        })
    }

    pub fn to_eulerian(&self) -> Result<EulerianState> {
        self.expect(Coordinate::Eulerian)?;
        let v = component_names(self.grid.d)
            .map(|n| self.field(&n).cloned())
            .collect::<Result<_>>()?;
        Ok(EulerianState {
            grid: self.grid,
            eps: self.eps,
            t: self.t,
            v,
            w: self.field("w")?.clone(),
            rho: self.field("rho")?.clone(),
            rho_pert: self.field("rho_pert")?.clone(),
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let n = self.grid.len();
        let mut out = Vec::with_capacity(64 + self.fields.len() * (16 + 8 * n));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.d as u32).to_le_bytes());
        out.extend_from_slice(&(self.grid.nx as u64).to_le_bytes());
        out.extend_from_slice(&(self.grid.nr as u64).to_le_bytes());
        for v in [self.grid.length, self.eps, self.mu, self.t] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(match self.coord {
            Coordinate::Isopycnal => 0,
            Coordinate::Eulerian => 1,
        });
        out.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for (name, f) in &self.fields {
            if f.len() != n {
                return Err(Error::FormatMismatch(format!(
                    "field `{name}` has {} values, grid holds {n}",
                    f.len()
                )));
            }
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(MAGIC.len())?;
        if magic != MAGIC {
            return Err(Error::FormatMismatch(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(MAGIC)
            )));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::FormatMismatch(format!(
                "version {version}, this build reads version {VERSION}"
            )));
        }
        let d = r.u32()? as usize;
        let nx = r.u64()? as usize;
        let nr = r.u64()? as usize;
        let length = r.f64()?;
        let grid = Grid::new(d, nx, length, nr)
            .map_err(|e| Error::FormatMismatch(format!("header grid: {e}")))?;
        let (eps, mu, t) = (r.f64()?, r.f64()?, r.f64()?);
        let coord = match r.take(1)?[0] {
            0 => Coordinate::Isopycnal,
            1 => Coordinate::Eulerian,
            c => return Err(Error::FormatMismatch(format!("coordinate tag {c}"))),
        };
        let count = r.u32()? as usize;
        let n = grid.len();
        let mut fields = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::FormatMismatch("field name is not UTF-8".into()))?;
            let raw = r.take(8 * n)?;
            let f = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            fields.push((name, f));
        }
        if r.pos != bytes.len() {
            return Err(Error::FormatMismatch(format!(
                "header declares {} bytes, found {}",
                r.pos,
                bytes.len()
            )));
        }
        Ok(Self {
            grid,
            eps,
            mu,
            t,
            coord,
            fields,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::FormatMismatch(format!(
                "truncated: expected at least {} bytes, found {}",
                self.pos.saturating_add(n),
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    std::fs::write(path, snap.encode()?)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Snapshot::decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        let grid = Grid::line(8, 5).unwrap();
        let mut s = FlowState::zeros(&grid);
        s.t = 0.375;
        s.v[0] = grid.sample(|x, r| x[0].sin() * r + 1e-300);
        s.w = grid.sample(|x, r| x[0].cos() * r * (1.0 - r));
        s.eta = grid.sample(|_, r| -0.0 * r);
        Snapshot::from_state(&grid, &s, 0.1, 0.25)
    }

    #[test]
    fn header_size_matches_layout() {
        let bytes = sample().encode().unwrap();
        let header = 7 + 4 + 4 + 8 + 8 + 4 * 8 + 1 + 4;
        let fields = 3 * (4 + 8 * 40) + 2 + 1 + 3;
        assert_eq!(bytes.len(), header + fields);
        assert_eq!(&bytes[..7], b"ISOPYC1");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let snap = sample();
        let back = Snapshot::decode(&snap.encode().unwrap()).unwrap();
        for ((na, a), (nb, b)) in snap.fields.iter().zip(&back.fields) {
            assert_eq!(na, nb);
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back.to_state().unwrap().t, 0.375);
    }

    #[test]
    fn truncation_reports_byte_counts() {
        let bytes = sample().encode().unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match Snapshot::decode(cut) {
            Err(Error::FormatMismatch(msg)) => {
                assert!(msg.contains(&bytes.len().to_string()), "{msg}");
                assert!(msg.contains(&cut.len().to_string()), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Snapshot::decode(&long), Err(Error::FormatMismatch(_))));
    }

    #[test]
    fn foreign_magic_and_version_are_rejected() {
        let mut bytes = sample().encode().unwrap();
        bytes[0] = b'X';
        assert!(matches!(Snapshot::decode(&bytes), Err(Error::FormatMismatch(_))));
        let mut bytes = sample().encode().unwrap();
        bytes[7] = 2;
        match Snapshot::decode(&bytes) {
            Err(Error::FormatMismatch(msg)) => assert!(msg.contains("version 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_coordinate_is_an_error() {
        assert!(sample().to_eulerian().is_err());
    }
}
