use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::planner::FlightMode;

pub const LOG_HEADER: &str = "t,x,y,z,va,vg,vz,enet,phi,theta,psi,thrust,mode,replan";

/// One logged sample. `va`, `vg` and `vz` are true values; `enet` is the
/// onboard variometer output, empty until its filters are primed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub va: f64,
    pub vg: f64,
    pub vz: f64,
    pub enet: Option<f64>,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    /// Normalized throttle.
    pub thrust: f64,
    pub mode: FlightMode,
    /// 1 when a new trajectory was adopted since the previous row.
    pub replan: u8,
    /// Mission leg; not part of the file format.
    #[serde(skip)]
    pub leg: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<LogRow>,
}

impl SimLog {
    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(SimError::Log(format!("time not increasing at t = {}", w[1].t)));
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        if self.rows.is_empty() {
            wr.write_record(LOG_HEADER.split(','))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| SimError::Log(e.to_string()))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }

    /// Reads a log; leg indices are rebuilt from changes of `mode`.
    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != LOG_HEADER {
            return Err(SimError::Log(format!("unexpected header `{header}`")));
        }
        let mut rows: Vec<LogRow> = Vec::new();
        for rec in rd.deserialize() {
            let mut row: LogRow = rec?;
            row.leg = match rows.last() {
                Some(p) if p.mode != row.mode => p.leg + 1,
                Some(p) => p.leg,
                None => 0,
            };
            rows.push(row);
        }
        let log = SimLog { rows };
        log.validate()?;
        Ok(log)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }
}
