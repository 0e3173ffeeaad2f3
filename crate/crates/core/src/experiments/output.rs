//! CSV and JSON writers. Floats in CSV use 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::asymptotics::AsymptoticsTable;
use crate::error::Result;
use crate::fronts::{Death, FrontTrack};
use crate::solver::TimeSeries;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), fmt)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_series_csv(path: &Path, s: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "v", "w", "U_bar", "n_fronts", "leftmost_front"])?;
    for r in &s.records {
        w.write_record([
            fmt(r.t),
            fmt(r.v),
            fmt(r.w),
            fmt(r.u_bar),
            r.cfg.fronts.len().to_string(),
            fmt_opt(r.cfg.leftmost()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EventLine<'a> {
    kind: &'a str,
    t: f64,
    position: f64,
    #[serde(rename = "U_ratio")]
    u_ratio: f64,
}

pub fn write_events_jsonl(path: &Path, s: &TimeSeries) -> Result<()> {
    let mut f = create(path)?;
    for e in &s.events {
        let line = EventLine {
            kind: e.kind.as_str(),
            t: e.t,
            position: e.position,
            u_ratio: e.u_ratio,
        };
        serde_json::to_writer(&mut f, &line)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// One file per stored profile, named by its time.
pub fn write_profiles(dir: &Path, s: &TimeSeries) -> Result<Vec<String>> {
    let centers: Vec<f64> = s.grid_faces.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect();
    let mut names = Vec::new();
    for r in &s.records {
        let Some(u) = &r.u else { continue };
        let name = format!("profile_{}.csv", r.t);
        let mut w = csv::Writer::from_path(dir.join(&name))?;
        w.write_record(["x", "u", "r"])?;
        for (x, v) in centers.iter().zip(u) {
            w.write_record([fmt(*x), fmt(*v), format!("{}", r.cfg.sign_at(*x).value() as i8)])?;
        }
        w.flush()?;
        names.push(name);
    }
    Ok(names)
}

pub fn write_fronts_csv(path: &Path, tracks: &[FrontTrack]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "track_id", "birth_t", "death_t", "steady_t", "x_final", "immortal",
    ])?;
    for t in tracks {
        let death = t.death.as_ref().map(|d| match d {
            Death::Collision { t, .. } | Death::Exit { t } => *t,
        });
        w.write_record([
            t.id.to_string(),
            fmt(t.birth_time),
            fmt_opt(death),
            fmt_opt(t.steady_since),
            fmt(t.final_position()),
            t.immortal_certificate.is_some().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_asymptotics_csv(path: &Path, table: &AsymptoticsTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["D", "n", "t_n", "q_n", "y_hat_n"])?;
    for r in &table.rows {
        w.write_record([
            fmt(r.d),
            r.n.to_string(),
            fmt_opt(r.t_n),
            fmt_opt(r.q_n),
            fmt_opt(r.y_hat_n),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}
