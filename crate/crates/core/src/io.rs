//! Artifact formats: event CSV, field CSV, state sidecar JSON.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::chain::ChainState;
use crate::error::{Error, Result};
use crate::geometry::{SphericalGrid, UnitVec3};
use crate::spectral::SpectralEvent;

pub const EVENT_HEADER: &str = "weight,mu_x,mu_y,mu_z";
pub const FIELD_HEADER: &str = "t,node_index,x,y,z,value";

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_events_csv<W: Write>(mut w: W, events: &[SpectralEvent]) -> Result<()> {
    writeln!(w, "{EVENT_HEADER}")?;
    for e in events {
        let [x, y, z] = e.center.to_array();
        writeln!(w, "{},{},{},{}", num(e.weight), num(x), num(y), num(z))?;
    }
    Ok(())
}

pub fn read_events_csv<R: BufRead>(r: R) -> Result<Vec<SpectralEvent>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != EVENT_HEADER {
        return Err(Error::Parse(format!("event CSV must start with `{EVENT_HEADER}`")));
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("event CSV line {}: {e}", i + 2)))?;
        if fields.len() != 4 {
            return Err(Error::Parse(format!("event CSV line {}: expected 4 columns", i + 2)));
        }
        let v = [fields[1], fields[2], fields[3]];
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        // Written centers are unit to the last digit; keep them bit-exact.
        let center = if (norm - 1.0).abs() < 1e-12 {
            UnitVec3::from_raw(v[0], v[1], v[2])
        } else {
            UnitVec3::from_array(v)?
        };
        events.push(SpectralEvent { weight: fields[0], center });
    }
    Ok(events)
}

pub fn write_field_header<W: Write>(mut w: W) -> Result<()> {
    writeln!(w, "{FIELD_HEADER}")?;
    Ok(())
}

/// One row per grid node of `state` evaluated at time `t`.
pub fn write_field_rows<W: Write>(mut w: W, t: u64, grid: &SphericalGrid, state: &ChainState) -> Result<()> {
    for (i, p) in grid.nodes().iter().enumerate() {
        let [x, y, z] = p.to_array();
        writeln!(w, "{t},{i},{},{},{},{}", num(x), num(y), num(z), num(state.eval(p)))?;
    }
    Ok(())
}

/// Metadata accompanying a state's event CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSidecar {
    pub t: u64,
    pub a: f64,
    pub theta: f64,
    pub axis: [f64; 3],
    pub kappa: f64,
    pub scale: f64,
    #[serde(rename = "J")]
    pub depth: Option<usize>,
}

impl StateSidecar {
    pub fn of(state: &ChainState) -> Self {
        let c = state.config();
        StateSidecar {
            t: state.t(),
            a: c.a(),
            theta: c.theta(),
            axis: c.axis().to_array(),
            kappa: c.kappa(),
            scale: state.scale(),
            depth: state.depth(),
        }
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_state_snapshot(dir: &std::path::Path, stem: &str, state: &ChainState) -> Result<()> {
    let csv = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    let mut csv = std::io::BufWriter::new(csv);
    write_events_csv(&mut csv, state.events())?;
    csv.flush()?;
    let json = serde_json::to_string_pretty(&StateSidecar::of(state))?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::uniform_sphere_sample;
    use crate::rng::RngStream;

    #[test]
    fn events_round_trip_bit_exact() {
        let mut r = RngStream::new(12);
        let events: Vec<SpectralEvent> = (0..50)
            .map(|i| SpectralEvent {
                weight: 1.0 / (i as f64 + 0.37),
                center: uniform_sphere_sample(&mut r),
            })
            .collect();
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &events).unwrap();
        let back = read_events_csv(buf.as_slice()).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn rejects_bad_csv() {
        assert!(read_events_csv("w,x\n".as_bytes()).is_err());
        assert!(read_events_csv(format!("{EVENT_HEADER}\n1,0,0\n").as_bytes()).is_err());
        assert!(read_events_csv(format!("{EVENT_HEADER}\n1,a,0,1\n").as_bytes()).is_err());
        assert!(read_events_csv(format!("{EVENT_HEADER}\n1,0,0,0\n").as_bytes()).is_err());
    }

    #[test]
    fn sidecar_uses_capital_j() {
        let s = StateSidecar {
            t: 3,
            a: 0.5,
            theta: 0.1,
            axis: [0.0, 0.0, 1.0],
            kappa: 1.0,
            scale: 0.125,
            depth: Some(19),
        };
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"J\":19"));
    }
}
