//! Parsing of raw GPS logs and the closeness survey.
//!
//! Both parsers are row-tolerant: a malformed row is recorded in the
//! [`Rejection`] list with its line number and never aborts the parse.
//! Only an unreadable stream or a header missing a mandatory column is fatal.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};

use crate::error::{Error, Result};
use crate::types::UserId;

/// One GPS log row.
#[derive(Clone, Debug, PartialEq)]
pub struct RawFix {
    pub user: UserId,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub elevation: Option<f64>,
    pub accuracy: f64,
    pub satellites: Option<u32>,
    pub provider: Option<String>,
}

/// One directed answer to the closeness/proximity questions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyRecord {
    pub rater: UserId,
    pub ratee: UserId,
    /// 0 (don't know) to 5 (very good friends), before regrouping.
    pub closeness_raw: u8,
    /// 1 (under 5 minutes a day) to 5 (over 4 hours a day).
    pub proximity_raw: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based physical line number; the header is line 1.
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.line, self.reason)
    }
}

/// Records accepted from a table together with everything that was not.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejections: Vec<Rejection>,
}

impl<T> Parsed<T> {
    /// Number of data rows seen, accepted or not.
    pub fn rows(&self) -> usize {
        self.records.len() + self.rejections.len()
    }
}

/// Writes the rejection report, one `line<TAB>reason` entry per line.
pub fn write_rejections<W: Write>(mut out: W, rejections: &[Rejection]) -> std::io::Result<()> {
    for r in rejections {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub delimiter: u8,
    /// Zone assumed for timestamps that carry no offset of their own.
    pub local_offset: FixedOffset,
    /// Lines starting with this byte are skipped entirely.
    pub comment: Option<u8>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            delimiter: b',',
            local_offset: study_site_offset(),
            comment: None,
        }
    }
}

/// UTC+05:30.
pub fn study_site_offset() -> FixedOffset {
    FixedOffset::east_opt(5 * 3600 + 30 * 60).expect("valid offset")
}

/// Accepts RFC 3339 / ISO-8601 with a zone, integer Unix seconds, or a naive
/// `YYYY-MM-DD[T ]HH:MM:SS` interpreted in `local`. Sub-second parts are truncated.
pub fn parse_timestamp(s: &str, local: FixedOffset) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let ts = if let Ok(secs) = s.parse::<i64>() {
        DateTime::from_timestamp(secs, 0)?
    } else if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        dt.with_timezone(&Utc)
    } else {
        let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
            .ok()?;
        local
            .from_local_datetime(&naive)
            .single()?
            .with_timezone(&Utc)
    };
    DateTime::from_timestamp(ts.timestamp(), 0)
}

/// Column positions resolved from a header, matched case-insensitively.
struct Columns {
    index: HashMap<String, usize>,
    header: Vec<String>,
}

impl Columns {
    fn new(header: &csv::StringRecord) -> Self {
        let header: Vec<String> = header
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let index = header
            .iter()
            .enumerate()
            .rev()
            .map(|(i, h)| (h.clone(), i))
            .collect();
        Columns { index, header }
    }

    fn find(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.index.get(*n).copied())
    }

    fn require(&self, names: &[&str]) -> Result<usize> {
        self.find(names)
            .ok_or_else(|| Error::Schema(format!("missing mandatory column '{}'", names[0])))
    }

    fn is_header_row(&self, row: &csv::StringRecord) -> bool {
        row.len() == self.header.len()
            && row
                .iter()
                .zip(&self.header)
                .all(|(a, b)| a.trim().eq_ignore_ascii_case(b))
    }
}

fn reader<R: Read>(source: R, delimiter: u8, comment: Option<u8>) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(comment)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Iterates data rows; I/O failures are fatal, every other read error becomes a rejection.
fn for_each_row<R: Read>(
    rdr: &mut csv::Reader<R>,
    columns: &Columns,
    rejections: &mut Vec<Rejection>,
    mut f: impl FnMut(u64, &csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<()> {
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut row) {
            Ok(false) => return Ok(()),
            Ok(true) => {
                let line = row.position().map_or(line, |p| p.line());
                let outcome = if columns.is_header_row(&row) {
                    Err("duplicate header".to_owned())
                } else if row.len() != columns.header.len() {
                    Err(format!(
                        "expected {} fields, found {}",
                        columns.header.len(),
                        row.len()
                    ))
                } else {
                    f(line, &row)
                };
                if let Err(reason) = outcome {
                    rejections.push(Rejection { line, reason });
                }
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(e.into()),
                _ => {
                    let line = e.position().map_or(line, |p| p.line());
                    rejections.push(Rejection {
                        line,
                        reason: e.to_string(),
                    });
                }
            },
        }
    }
}

fn required_field<'a>(
    row: &'a csv::StringRecord,
    i: usize,
    name: &str,
) -> std::result::Result<&'a str, String> {
    match row.get(i) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing {name}")),
    }
}

fn optional_field(row: &csv::StringRecord, i: Option<usize>) -> Option<&str> {
    i.and_then(|i| row.get(i)).filter(|v| !v.is_empty())
}

fn parse_f64(s: &str, name: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("bad {name} '{s}'"))
}

/// Parses a GPS log with at least `user_id, timestamp, lat, lon, accuracy` columns.
pub fn parse_gps_log<R: Read>(source: R, options: &IngestOptions) -> Result<Parsed<RawFix>> {
    let mut rdr = reader(source, options.delimiter, options.comment);
    let columns = Columns::new(rdr.headers()?);
    let user_col = columns.require(&["user_id", "user", "id"])?;
    let ts_col = columns.require(&["timestamp", "time"])?;
    let lat_col = columns.require(&["lat", "latitude"])?;
    let lon_col = columns.require(&["lon", "lng", "longitude"])?;
    let acc_col = columns.require(&["accuracy"])?;
    let elev_col = columns.find(&["elevation", "altitude"]);
    let sat_col = columns.find(&["satellites"]);
    let prov_col = columns.find(&["provider"]);

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    // Interning keeps one allocation per distinct user.
    let mut users: HashMap<String, UserId> = HashMap::new();

    for_each_row(&mut rdr, &columns, &mut rejections, |_, row| {
        let user = required_field(row, user_col, "user_id")?;
        let ts_raw = required_field(row, ts_col, "timestamp")?;
        let timestamp = parse_timestamp(ts_raw, options.local_offset)
            .ok_or_else(|| format!("bad timestamp '{ts_raw}'"))?;
        let lat = parse_f64(required_field(row, lat_col, "lat")?, "lat")?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err("lat out of range".into());
        }
        let lon = parse_f64(required_field(row, lon_col, "lon")?, "lon")?;
        if !(-180.0..180.0).contains(&lon) {
            return Err("lon out of range".into());
        }
        let accuracy = parse_f64(required_field(row, acc_col, "accuracy")?, "accuracy")?;
        if accuracy < 0.0 {
            return Err("accuracy negative".into());
        }
        let elevation = optional_field(row, elev_col)
            .map(|v| parse_f64(v, "elevation"))
            .transpose()?;
        let satellites = optional_field(row, sat_col)
            .map(|v| {
                v.parse::<u32>()
                    .map_err(|_| format!("bad satellites '{v}'"))
            })
            .transpose()?;
        let provider = optional_field(row, prov_col).map(str::to_owned);
        let user = users
            .entry(user.to_owned())
            .or_insert_with(|| UserId::new(user))
            .clone();
        records.push(RawFix {
            user,
            timestamp,
            lat,
            lon,
            elevation,
            accuracy,
            satellites,
            provider,
        });
        Ok(())
    })?;

    Ok(Parsed {
        records,
        rejections,
    })
}

/// Parses the survey table (`rater, ratee, closeness, proximity`).
/// Self-ratings, out-of-range answers and repeated (rater, ratee) rows are rejected;
/// the first occurrence of a repeated pair wins.
pub fn parse_survey<R: Read>(
    source: R,
    delimiter: u8,
    comment: Option<u8>,
) -> Result<Parsed<SurveyRecord>> {
    let mut rdr = reader(source, delimiter, comment);
    let columns = Columns::new(rdr.headers()?);
    let rater_col = columns.require(&["rater", "rater_id"])?;
    let ratee_col = columns.require(&["ratee", "ratee_id"])?;
    let close_col = columns.require(&["closeness", "closeness_raw"])?;
    let prox_col = columns.require(&["proximity", "proximity_raw"])?;

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut seen = std::collections::HashSet::new();

    for_each_row(&mut rdr, &columns, &mut rejections, |_, row| {
        let rater = required_field(row, rater_col, "rater")?;
        let ratee = required_field(row, ratee_col, "ratee")?;
        if rater == ratee {
            return Err("self-rating".into());
        }
        let closeness = required_field(row, close_col, "closeness")?;
        let closeness_raw = closeness
            .parse::<i64>()
            .map_err(|_| format!("bad closeness '{closeness}'"))?;
        if !(0..=5).contains(&closeness_raw) {
            return Err("closeness out of range".into());
        }
        let proximity = required_field(row, prox_col, "proximity")?;
        let proximity_raw = proximity
            .parse::<i64>()
            .map_err(|_| format!("bad proximity '{proximity}'"))?;
        if !(1..=5).contains(&proximity_raw) {
            return Err("proximity out of range".into());
        }
        if !seen.insert((rater.to_owned(), ratee.to_owned())) {
            return Err("duplicate rating".into());
        }
        records.push(SurveyRecord {
            rater: UserId::new(rater),
            ratee: UserId::new(ratee),
            closeness_raw: closeness_raw as u8,
            proximity_raw: proximity_raw as u8,
        });
        Ok(())
    })?;

    Ok(Parsed {
        records,
        rejections,
    })
}

/// Writes fixes in the canonical column order with UTC RFC 3339 timestamps.
pub fn write_gps_log<W: Write>(out: W, fixes: &[RawFix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "user_id",
        "timestamp",
        "lat",
        "lon",
        "elevation",
        "accuracy",
        "satellites",
        "provider",
    ])?;
    for f in fixes {
        w.write_record([
            f.user.as_str(),
            &f.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            &f.lat.to_string(),
            &f.lon.to_string(),
            &f.elevation.map(|v| v.to_string()).unwrap_or_default(),
            &f.accuracy.to_string(),
            &f.satellites.map(|v| v.to_string()).unwrap_or_default(),
            f.provider.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_survey<W: Write>(out: W, records: &[SurveyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rater", "ratee", "closeness", "proximity"])?;
    for r in records {
        w.write_record([
            r.rater.as_str(),
            r.ratee.as_str(),
            &r.closeness_raw.to_string(),
            &r.proximity_raw.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    const HEADER: &str = "user_id,timestamp,lat,lon,elevation,accuracy,satellites,provider\n";

    fn gps(body: &str) -> Parsed<RawFix> {
        parse_gps_log(
            format!("{HEADER}{body}").as_bytes(),
            &IngestOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn parses_fixture_row() {
        let p = gps("u1,2016-04-03T10:02:11Z,23.188,72.628,4.0,36.0,7,gps\n");
        assert!(p.rejections.is_empty());
        let f = &p.records[0];
        assert_eq!(f.user.as_str(), "u1");
        assert_eq!(
            f.timestamp,
            Utc.with_ymd_and_hms(2016, 4, 3, 10, 2, 11).unwrap()
        );
        assert_eq!((f.lat, f.lon), (23.188, 72.628));
        assert_eq!(f.elevation, Some(4.0));
        assert_eq!(f.accuracy, 36.0);
        assert_eq!(f.satellites, Some(7));
        assert_eq!(f.provider.as_deref(), Some("gps"));
    }

    #[test]
    fn rejects_out_of_range_lat() {
        let p = gps("u1,2016-04-03T10:02:11Z,91.2,72.628,4.0,36.0,7,gps\n");
        assert!(p.records.is_empty());
        assert_eq!(
            p.rejections,
            vec![Rejection {
                line: 2,
                reason: "lat out of range".into()
            }]
        );
    }

    #[test]
    fn lon_upper_bound_is_exclusive() {
        let p = gps("u1,1459677731,0,180,,1,,\nu1,1459677731,0,-180,,1,,\n");
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.rejections[0].reason, "lon out of range");
    }

    #[test]
    fn header_only_is_empty() {
        let p = gps("");
        assert!(p.records.is_empty() && p.rejections.is_empty());
    }

    #[test]
    fn missing_mandatory_column_is_fatal() {
        let err = parse_gps_log(
            "user_id,timestamp,lat,lon\nu,1,2,3\n".as_bytes(),
            &IngestOptions::default(),
        );
        assert!(matches!(err, Err(Error::Schema(m)) if m.contains("accuracy")));
    }

    #[test]
    fn header_case_and_order_are_free() {
        let src = "ACCURACY,Lon,LAT,Timestamp,User_ID\n12.5,72.6,23.1,1459677731,u9\n";
        let p = parse_gps_log(src.as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(p.records[0].user.as_str(), "u9");
        assert_eq!(p.records[0].elevation, None);
        assert_eq!(p.records[0].provider, None);
    }

    #[test]
    fn duplicate_header_is_a_rejected_row() {
        let p = gps(&format!(
            "u1,1459677731,1,1,,5,,\n{HEADER}u1,1459677831,1,1,,5,,\n"
        ));
        assert_eq!(p.records.len(), 2);
        assert_eq!(
            p.rejections,
            vec![Rejection {
                line: 3,
                reason: "duplicate header".into()
            }]
        );
    }

    #[test]
    fn assorted_bad_rows_are_counted() {
        let body = "u1,notatime,1,1,,5,,\n\
                    u1,1459677731,x,1,,5,,\n\
                    u1,1459677731,1,1,,-2,,\n\
                    u1,1459677731,1,1\n\
                    ,1459677731,1,1,,5,,\n\
                    u1,1459677731,1,1,,5,,\n";
        let p = gps(body);
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.rejections.len(), 5);
        assert_eq!(p.rows(), 6);
        assert!(p.rejections[0].reason.starts_with("bad timestamp"));
    }

    #[test]
    fn timestamp_forms() {
        let ist = study_site_offset();
        let want = Utc.with_ymd_and_hms(2016, 4, 3, 4, 32, 11).unwrap();
        assert_eq!(parse_timestamp("2016-04-03T04:32:11Z", ist), Some(want));
        assert_eq!(
            parse_timestamp("2016-04-03T10:02:11+05:30", ist),
            Some(want)
        );
        assert_eq!(parse_timestamp("2016-04-03 10:02:11", ist), Some(want));
        assert_eq!(parse_timestamp("2016-04-03T10:02:11.750", ist), Some(want));
        assert_eq!(
            parse_timestamp(&want.timestamp().to_string(), ist),
            Some(want)
        );
        assert_eq!(parse_timestamp("yesterday", ist), None);
    }

    #[test]
    fn alternate_delimiter() {
        let src = "user_id;timestamp;lat;lon;accuracy\nu1;1459677731;23.1;72.6;9\n";
        let opts = IngestOptions {
            delimiter: b';',
            ..Default::default()
        };
        assert_eq!(
            parse_gps_log(src.as_bytes(), &opts).unwrap().records.len(),
            1
        );
    }

    fn survey(body: &str) -> Parsed<SurveyRecord> {
        parse_survey(
            format!("rater,ratee,closeness,proximity\n{body}").as_bytes(),
            b',',
            None,
        )
        .unwrap()
    }

    #[test]
    fn survey_rows() {
        let p = survey("A,B,5,4\nA,A,3,2\nA,B,7,1\nB,A,2,0\nB,C,x,1\nA,B,1,1\n");
        assert_eq!(
            p.records,
            vec![SurveyRecord {
                rater: "A".into(),
                ratee: "B".into(),
                closeness_raw: 5,
                proximity_raw: 4
            }]
        );
        let reasons: Vec<_> = p.rejections.iter().map(|r| r.reason.as_str()).collect();
        assert_eq!(
            reasons,
            [
                "self-rating",
                "closeness out of range",
                "proximity out of range",
                "bad closeness 'x'",
                "duplicate rating"
            ]
        );
        assert_eq!(p.rows(), 6);
    }

    #[test]
    fn round_trip_through_writer() {
        let p = gps("u1,2016-04-03T10:02:11Z,23.188,72.628,4.0,36.0,7,gps\nu2,1459677731,23.1,72.6,,9.5,,\n");
        let mut buf = Vec::new();
        write_gps_log(&mut buf, &p.records).unwrap();
        let again = parse_gps_log(buf.as_slice(), &IngestOptions::default()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn rejection_report_format() {
        let mut buf = Vec::new();
        write_rejections(
            &mut buf,
            &[Rejection {
                line: 4,
                reason: "lat out of range".into(),
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "4\tlat out of range\n");
    }
}
