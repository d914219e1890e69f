//! Per-round series for plotting: extremes, spread and group sizes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::groups::{Group, PhaseBounds};
use super::{phase_of, AnalysisError};
use crate::protocol::{is_common_new_start, Round};
use crate::trace::Trace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub round: Round,
    pub phase: u64,
    pub common_start: bool,
    pub vmin: f64,
    pub vmax: f64,
    pub spread: f64,
    pub min: usize,
    pub nin: usize,
    pub mid: usize,
    pub nax: usize,
    pub max: usize,
}

/// One row per round `1..=R+1`; group sizes are taken against the bounds
/// of the round's phase.
pub fn series(trace: &Trace, delta: f64) -> Result<Vec<SeriesRow>, AnalysisError> {
    let t = trace.value_table();
    let params = trace.params();
    let mut rows = Vec::with_capacity(t.last() as usize);
    let mut bounds: Option<PhaseBounds> = None;
    for r in 1..=t.last() {
        let phase = phase_of(r, params.rc);
        if bounds.is_none_or(|b| b.phase != phase) {
            bounds = Some(PhaseBounds::from_table(&t, phase, params.rc, delta, params.epsilon)?);
        }
        let b = bounds.expect("set above");
        let mut counts = [0usize; 5];
        for &v in t.row(r) {
            let slot = match b.classify(v) {
                Group::Min => 0,
                Group::Nin => 1,
                Group::Mid => 2,
                Group::Nax => 3,
                Group::Max => 4,
            };
            counts[slot] += 1;
        }
        rows.push(SeriesRow {
            round: r,
            phase,
            common_start: is_common_new_start(r, params.rc),
            vmin: t.vmin(r),
            vmax: t.vmax(r),
            spread: t.spread(r),
            min: counts[0],
            nin: counts[1],
            mid: counts[2],
            nax: counts[3],
            max: counts[4],
        });
    }
    Ok(rows)
}

pub fn write_series_csv<W: Write>(rows: &[SeriesRow], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ProtocolParams;

    #[test]
    fn rows_and_csv() {
        let params = ProtocolParams { n: 3, f: 0, rc: 2, epsilon: 2.0 };
        let t =
            Trace::from_value_rows(params, 1.0, vec![vec![0.0, 5.0, 10.0], vec![0.5, 5.0, 9.5], vec![4.0, 5.0, 6.0]]);
        let rows = series(&t, 1.0).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[1].nin, rows[1].mid, rows[1].nax), (1, 1, 1));
        assert_eq!((rows[2].phase, rows[2].min, rows[2].max), (1, 1, 1));
        assert!(rows[2].common_start && !rows[1].common_start);
        let mut buf = Vec::new();
        write_series_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("round,phase,common_start,vmin,vmax,spread,min,nin,mid,nax,max\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
