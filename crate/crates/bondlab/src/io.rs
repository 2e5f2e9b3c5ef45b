//! Delimited-text readers and writers for the pipeline's inputs and
//! reports, plus file checksums for the run manifest.

use bondlab_core::calendar::Month;
use bondlab_core::curve::ZeroCurve;
use bondlab_core::ingest::{RecordKind, Side, TradeRecord};
use bondlab_core::returns::RatingHistory;
use bondlab_core::{Error, Result};
use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use crate::config::parse_month;

/// One bond-master output row for the synthetic generator.
#[derive(Debug, Clone)]
pub struct MasterRow {
    pub bond_id: String,
    pub issuer_id: String,
    pub offering_date: NaiveDate,
    pub maturity_date: NaiveDate,
    pub coupon_rate: f64,
    pub coupon_frequency: u32,
    pub day_count_basis: String,
    pub dated_date: NaiveDate,
    pub amount_outstanding: f64,
    pub face_value_at_issuance: f64,
    pub coupon_type: String,
    pub issuer_industry_code: u32,
}

fn open(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path)
        .map_err(|e| Error::data(format!("cannot create {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::data(format!("cannot write {}: {e}", path.display()))
}

pub fn write_trades(path: &Path, trades: &[TradeRecord]) -> Result<()> {
    let mut w = open(path)?;
    writeln!(
        w,
        "bond_id,timestamp,price,volume,side,days_to_settlement,when_issued,locked_in,sale_condition,record_id,kind,original_record_id"
    )
    .map_err(|e| io_err(path, e))?;
    for t in trades {
        let side = match t.side {
            Side::Buy => "B",
            Side::Sell => "S",
            Side::Interdealer => "D",
            Side::Unknown => "U",
        };
        let kind = match t.kind {
            RecordKind::Trade => "T",
            RecordKind::Cancellation => "C",
            RecordKind::Correction => "W",
            RecordKind::Reversal => "R",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            t.bond_id,
            t.timestamp.format("%Y-%m-%d %H:%M:%S"),
            t.price,
            t.volume,
            side,
            t.days_to_settlement.as_deref().unwrap_or(""),
            if t.when_issued { "Y" } else { "N" },
            if t.locked_in { "Y" } else { "N" },
            t.sale_condition.as_deref().unwrap_or(""),
            t.record_id,
            kind,
            t.original_record_id.as_deref().unwrap_or(""),
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_master(path: &Path, rows: &[MasterRow]) -> Result<()> {
    let mut w = open(path)?;
    writeln!(
        w,
        "bond_id,issuer_id,offering_date,maturity_date,coupon_rate,coupon_frequency,day_count_basis,dated_date,amount_outstanding,face_value_at_issuance,country_domicile,private_placement,rule_144a,foreign_currency,asset_backed,convertible,coupon_type,bond_type,interest_frequency,issuer_industry_code"
    )
    .map_err(|e| io_err(path, e))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},USA,N,N,N,N,N,{},CDEB,{},{}",
            r.bond_id,
            r.issuer_id,
            r.offering_date.format("%Y-%m-%d"),
            r.maturity_date.format("%Y-%m-%d"),
            r.coupon_rate,
            r.coupon_frequency,
            r.day_count_basis,
            r.dated_date.format("%Y-%m-%d"),
            r.amount_outstanding,
            r.face_value_at_issuance,
            r.coupon_type,
            r.coupon_frequency as i32,
            r.issuer_industry_code,
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Generic delimited report writer. Cells are emitted verbatim.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "{}", header.join(",")).map_err(|e| io_err(path, e))?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Deterministic numeric formatting for report cells.
pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.10}")
    } else {
        "NA".to_string()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

/// Read `bond_id,month,score` rows into a rating history.
pub fn read_ratings(path: &Path) -> Result<RatingHistory> {
    let mut out = RatingHistory::new();
    for (i, line) in read_lines(path)?.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::data(format!(
                "{}:{}: expected bond_id,month,score",
                path.display(),
                i + 1
            )));
        }
        let month = parse_month(parts[1])?;
        let score: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("{}:{}: bad score", path.display(), i + 1)))?;
        out.insert(parts[0].trim(), month, score);
    }
    Ok(out)
}

/// Read `month,rate` rows, decimal units.
pub fn read_risk_free(path: &Path) -> Result<BTreeMap<Month, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in read_lines(path)?.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::data(format!(
                "{}:{}: expected month,rate",
                path.display(),
                i + 1
            )));
        }
        let rate: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("{}:{}: bad rate", path.display(), i + 1)))?;
        out.insert(parse_month(parts[0])?, rate);
    }
    Ok(out)
}

/// Read `maturity_years,yield` rows into a zero curve.
pub fn read_curve(path: &Path) -> Result<ZeroCurve> {
    let mut points = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::data(format!(
                "{}:{}: expected maturity_years,yield",
                path.display(),
                i + 1
            )));
        }
        let m: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("{}:{}: bad maturity", path.display(), i + 1)))?;
        let y: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("{}:{}: bad yield", path.display(), i + 1)))?;
        points.push((m, y));
    }
    ZeroCurve::new(points)
}

/// Read `key,value` rows into a map (e.g. industry code to group).
pub fn read_map(path: &Path) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (i, line) in read_lines(path)?.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::data(format!(
                "{}:{}: expected key,value",
                path.display(),
                i + 1
            )));
        }
        out.insert(parts[0].trim().to_string(), parts[1].trim().to_string());
    }
    Ok(out)
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Hex SHA-256 of a string.
pub fn sha256_str(s: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(s.as_bytes());
    format!("{:x}", hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn ratings_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.csv");
        std::fs::write(&path, "bond_id,month,score\nB1,2012-03,7\nB1,2012-04,8\n").unwrap();
        let hist = read_ratings(&path).unwrap();
        assert_eq!(hist.score("B1", Month::new(2012, 3)), Some(7.0));
        assert_eq!(hist.score("B1", Month::new(2012, 4)), Some(8.0));
        assert_eq!(hist.score("B2", Month::new(2012, 3)), None);
    }

    #[test]
    fn risk_free_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rf.csv");
        std::fs::write(&path, "month,rate\n2012-01,0.002\n2012-02,0.003\n").unwrap();
        let rf = read_risk_free(&path).unwrap();
        assert_eq!(rf[&Month::new(2012, 2)], 0.003);
    }

    #[test]
    fn master_rows_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("master.csv");
        let row = MasterRow {
            bond_id: "B1".into(),
            issuer_id: "I1".into(),
            offering_date: NaiveDate::from_ymd_opt(2008, 1, 15).unwrap(),
            maturity_date: NaiveDate::from_ymd_opt(2030, 1, 15).unwrap(),
            coupon_rate: 5.0,
            coupon_frequency: 2,
            day_count_basis: "30/360".into(),
            dated_date: NaiveDate::from_ymd_opt(2008, 1, 15).unwrap(),
            amount_outstanding: 1e8,
            face_value_at_issuance: 1e8,
            coupon_type: "F".into(),
            issuer_industry_code: 1000,
        };
        write_master(&path, &[row]).unwrap();
        let file = std::fs::File::open(&path).unwrap();
        let (parsed, report) = bondlab_core::ingest::parse_master(file, b',').unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(report.total_removed(), 0);
        let (universe, _) = bondlab_core::ingest::apply_fisd_filters(parsed);
        assert_eq!(universe.len(), 1);
    }

    #[test]
    fn checksum_is_stable() {
        assert_eq!(sha256_str("abc"), sha256_str("abc"));
        assert_ne!(sha256_str("abc"), sha256_str("abd"));
    }
}
