//! Hourly year series loaded from per-stream CSV files.
//!
//! Each stream is one file. The first column is `timestamp`; the remaining
//! headers are entity ids (bus ids for load, generator ids for wind and
//! solar). Rows are consecutive hours starting at midnight. February 29 is
//! dropped so every year weighs 365 days.

use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;

/// One stream: entity ids and an hourly column per entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub ids: Vec<i64>,
    /// `values[entity][hour]`.
    pub values: Vec<Vec<f64>>,
}

impl Stream {
    pub fn column(&self, id: i64) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|&x| x == id)
            .map(|k| self.values[k].as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSeries {
    /// Calendar date of each day, in order.
    pub dates: Vec<NaiveDate>,
    /// Per-bus load in MW.
    pub load: Stream,
    /// Per-generator availability factors in [0, 1].
    pub wind: Stream,
    pub solar: Stream,
}

struct RawStream {
    stamps: Vec<NaiveDateTime>,
    stream: Stream,
}

fn parse_stamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

fn read_stream(reader: impl Read, what: &str) -> Result<RawStream> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("timestamp") {
        return Err(Error::parse(1, format!("{what}: first column must be `timestamp`")));
    }
    let mut ids = Vec::with_capacity(headers.len() - 1);
    for h in headers.iter().skip(1) {
        let id = h
            .parse::<i64>()
            .map_err(|_| Error::parse(1, format!("{what}: column `{h}` is not an integer id")))?;
        if ids.contains(&id) {
            return Err(Error::parse(1, format!("{what}: duplicate column {id}")));
        }
        ids.push(id);
    }
    let mut values = vec![Vec::new(); ids.len()];
    let mut stamps = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec?;
        if rec.len() != ids.len() + 1 {
            return Err(Error::parse(line, format!("{what}: expected {} fields", ids.len() + 1)));
        }
        let stamp = parse_stamp(&rec[0])
            .ok_or_else(|| Error::parse(line, format!("{what}: bad timestamp `{}`", &rec[0])))?;
        stamps.push(stamp);
        for (k, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line, format!("{what}: bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("{what}: non-finite value")));
            }
            values[k].push(v);
        }
    }
    Ok(RawStream {
        stamps,
        stream: Stream { ids, values },
    })
}

fn is_leap_day(d: NaiveDate) -> bool {
    d.month() == 2 && d.day() == 29
}

/// Drops leap-day hours and checks the rows form whole consecutive days.
fn to_days(raw: RawStream, what: &str) -> Result<(Vec<NaiveDate>, Stream)> {
    let keep: Vec<bool> = raw.stamps.iter().map(|s| !is_leap_day(s.date())).collect();
    let stamps: Vec<NaiveDateTime> = raw
        .stamps
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(s, _)| *s)
        .collect();
    if stamps.is_empty() || stamps.len() % HOURS_PER_DAY != 0 {
        return Err(Error::Invalid(format!(
            "{what}: {} hours is not a whole number of days",
            stamps.len()
        )));
    }
    let mut dates = Vec::with_capacity(stamps.len() / HOURS_PER_DAY);
    for (d, day) in stamps.chunks(HOURS_PER_DAY).enumerate() {
        let date = day[0].date();
        for (h, s) in day.iter().enumerate() {
            if s.date() != date || s.hour() as usize != h || s.minute() != 0 {
                return Err(Error::Invalid(format!(
                    "{what}: missing or misordered hour near {s} (day {})",
                    d + 1
                )));
            }
        }
        if let Some(&prev) = dates.last() {
            let mut next = prev + chrono::Duration::days(1);
            if is_leap_day(next) {
                next += chrono::Duration::days(1);
            }
            if date != next {
                return Err(Error::Invalid(format!("{what}: gap between {prev} and {date}")));
            }
        }
        dates.push(date);
    }
    let values = raw
        .stream
        .values
        .into_iter()
        .map(|col| col.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| v).collect())
        .collect();
    Ok((
        dates,
        Stream {
            ids: raw.stream.ids,
            values,
        },
    ))
}

impl YearSeries {
    pub fn from_readers(load: impl Read, wind: impl Read, solar: impl Read) -> Result<Self> {
        let (dates, load) = to_days(read_stream(load, "load")?, "load")?;
        let (wd, wind) = to_days(read_stream(wind, "wind")?, "wind")?;
        let (sd, solar) = to_days(read_stream(solar, "solar")?, "solar")?;
        if wd != dates || sd != dates {
            return Err(Error::Invalid("load, wind and solar files cover different hours".into()));
        }
        let series = YearSeries {
            dates,
            load,
            wind,
            solar,
        };
        series.validate()?;
        Ok(series)
    }

    /// Reads `load.csv`, `wind.csv` and `solar.csv` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let open = |name: &str| {
            let p = dir.join(name);
            std::fs::File::open(&p).map_err(|e| Error::io(&p, e))
        };
        let (l, w, s) = (open("load.csv")?, open("wind.csv")?, open("solar.csv")?);
        YearSeries::from_readers(l, w, s)
    }

    pub fn days(&self) -> usize {
        self.dates.len()
    }

    pub fn hours(&self) -> usize {
        self.days() * HOURS_PER_DAY
    }

    pub fn validate(&self) -> Result<()> {
        let hours = self.hours();
        for (name, s) in [("load", &self.load), ("wind", &self.wind), ("solar", &self.solar)] {
            if s.ids.len() != s.values.len() || s.values.iter().any(|c| c.len() != hours) {
                return Err(Error::Invalid(format!("{name}: column lengths differ from {hours}")));
            }
        }
        for (name, s) in [("wind", &self.wind), ("solar", &self.solar)] {
            if s.values.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Invalid(format!("{name}: availability outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Hourly system load, mean wind availability and mean solar availability.
    pub fn aggregate_streams(&self) -> [Vec<f64>; 3] {
        let hours = self.hours();
        let sum = |s: &Stream| -> Vec<f64> {
            (0..hours).map(|h| s.values.iter().map(|c| c[h]).sum()).collect()
        };
        let mean = |s: &Stream| -> Vec<f64> {
            let n = s.values.len().max(1) as f64;
            sum(s).into_iter().map(|v| v / n).collect()
        };
        [sum(&self.load), mean(&self.wind), mean(&self.solar)]
    }

    /// Writes the three streams in the CSV layout `from_readers` accepts.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, s) in [("load.csv", &self.load), ("wind.csv", &self.wind), ("solar.csv", &self.solar)] {
            let path = dir.join(name);
            let mut w = csv::Writer::from_path(&path)?;
            let mut header = vec!["timestamp".to_string()];
            header.extend(s.ids.iter().map(|i| i.to_string()));
            w.write_record(&header)?;
            for (d, date) in self.dates.iter().enumerate() {
                for h in 0..HOURS_PER_DAY {
                    let mut rec = vec![format!("{date} {h:02}:00")];
                    rec.extend(s.values.iter().map(|c| c[d * HOURS_PER_DAY + h].to_string()));
                    w.write_record(&rec)?;
                }
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_for(days: &[&str], ids: &[i64], f: impl Fn(usize, usize) -> f64) -> String {
        let mut s = String::from("timestamp");
        for id in ids {
            s += &format!(",{id}");
        }
        s.push('\n');
        let mut h = 0;
        for d in days {
            for hour in 0..24 {
                s += &format!("{d} {hour:02}:00");
                for k in 0..ids.len() {
                    s += &format!(",{}", f(h, k));
                }
                s.push('\n');
                h += 1;
            }
        }
        s
    }

    #[test]
    fn drops_leap_day() {
        let days = ["2024-02-28", "2024-02-29", "2024-03-01"];
        let load = csv_for(&days, &[1, 2], |h, k| (h + k) as f64);
        let wind = csv_for(&days, &[7], |_, _| 0.5);
        let solar = csv_for(&days, &[], |_, _| 0.0);
        let ys = YearSeries::from_readers(load.as_bytes(), wind.as_bytes(), solar.as_bytes()).unwrap();
        assert_eq!(ys.days(), 2);
        assert_eq!(ys.load.values[0].len(), 48);
        // Hour 0 of March 1 was row 48 of the file.
        assert_eq!(ys.load.values[0][24], 48.0);
        assert_eq!(ys.wind.column(7).unwrap()[0], 0.5);
    }

    #[test]
    fn rejects_missing_hour_and_bad_availability() {
        let days = ["2022-01-01"];
        let mut load = csv_for(&days, &[1], |_, _| 1.0);
        load = load.replace("2022-01-01 05:00,1\n", "");
        let wind = csv_for(&days, &[2], |_, _| 0.5);
        let solar = csv_for(&days, &[3], |_, _| 0.5);
        assert!(YearSeries::from_readers(load.as_bytes(), wind.as_bytes(), solar.as_bytes()).is_err());

        let load = csv_for(&days, &[1], |_, _| 1.0);
        let wind = csv_for(&days, &[2], |_, _| 1.5);
        assert!(YearSeries::from_readers(load.as_bytes(), wind.as_bytes(), solar.as_bytes()).is_err());
    }

    #[test]
    fn rejects_day_gap_and_bad_numbers() {
        let load = csv_for(&["2022-01-01", "2022-01-03"], &[1], |_, _| 1.0);
        let other = csv_for(&["2022-01-01", "2022-01-03"], &[], |_, _| 0.0);
        assert!(YearSeries::from_readers(load.as_bytes(), other.as_bytes(), other.as_bytes()).is_err());

        let load = "timestamp,1\n2022-01-01 00:00,x\n";
        match YearSeries::from_readers(load.as_bytes(), other.as_bytes(), other.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let days = ["2022-07-01", "2022-07-02"];
        let load = csv_for(&days, &[4, 9], |h, k| 10.0 * h as f64 + k as f64 + 0.25);
        let wind = csv_for(&days, &[5], |h, _| (h % 5) as f64 / 4.0);
        let solar = csv_for(&days, &[6], |h, _| if h % 24 > 12 { 0.75 } else { 0.0 });
        let ys = YearSeries::from_readers(load.as_bytes(), wind.as_bytes(), solar.as_bytes()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ys.write_dir(dir.path()).unwrap();
        assert_eq!(YearSeries::load_dir(dir.path()).unwrap(), ys);
    }
}
