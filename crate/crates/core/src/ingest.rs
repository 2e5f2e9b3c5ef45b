//! Trade and bond-master ingestion with the standard filter chains.
//!
//! Intraday trade records pass through two stages: the static trade filters
//! (settlement, when-issued, locked-in, sale condition, volume, price band)
//! and the cancellation/correction/reversal repair step. The bond master is
//! screened down to the eligible universe (domicile, currency, placement,
//! structure, coupon type, interest frequency, accrual fields).
//!
//! Every removal is attributed to the first failing rule so that the counts
//! in a [`FilterReport`] sum exactly to input minus output.

use crate::daycount::{AccrualTerms, DayCount};
use crate::error::Error;
use crate::Result;
use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Read;

/// Trade side reported with the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
    Interdealer,
    Unknown,
}

/// Record kind for the cancellation/correction/reversal linkage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    Trade,
    Cancellation,
    Correction,
    Reversal,
}

/// One intraday trade record.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub bond_id: String,
    pub timestamp: NaiveDateTime,
    /// Clean price per 100 face.
    pub price: f64,
    /// Face value traded in currency units.
    pub volume: f64,
    pub side: Side,
    /// Settlement-days code as reported (e.g. "000"); `None` when absent.
    pub days_to_settlement: Option<String>,
    pub when_issued: bool,
    pub locked_in: bool,
    /// Special sale-condition code; `None` or "@" means no special condition.
    pub sale_condition: Option<String>,
    /// Record sequence id used by the repair linkage.
    pub record_id: String,
    pub kind: RecordKind,
    /// For cancellations/corrections/reversals: the original record id.
    pub original_record_id: Option<String>,
}

/// One bond-master row as parsed, before universe screening.
#[derive(Debug, Clone)]
pub struct BondMaster {
    pub bond_id: String,
    pub issuer_id: String,
    pub offering_date: Option<NaiveDate>,
    pub maturity_date: NaiveDate,
    /// Percent per annum.
    pub coupon_rate: Option<f64>,
    pub coupon_frequency: Option<u32>,
    pub day_count_basis: Option<String>,
    pub dated_date: Option<NaiveDate>,
    pub amount_outstanding: Option<f64>,
    pub face_value_at_issuance: f64,
    pub country_domicile: String,
    pub private_placement: bool,
    pub rule_144a: bool,
    pub foreign_currency: bool,
    pub asset_backed: bool,
    pub convertible: bool,
    /// FISD coupon type: "F" fixed, "Z" zero, "V" variable.
    pub coupon_type: String,
    pub bond_type: String,
    /// FISD interest-frequency code; -1 means N/A.
    pub interest_frequency: i32,
    pub issuer_industry_code: u32,
}

/// A bond that survived the universe screen, with resolved accrual terms.
#[derive(Debug, Clone)]
pub struct ValidatedBond {
    pub master: BondMaster,
    pub terms: AccrualTerms,
    /// Amount outstanding with the face-value fallback applied.
    pub amount_outstanding: f64,
}

/// Per-rule removal accounting for one filter stage.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FilterReport {
    pub stage: String,
    pub input: u64,
    pub output: u64,
    /// First-failing-rule attribution, in rule order.
    pub removals: Vec<RuleCount>,
    /// Records kept but flagged (e.g. dangling corrections).
    pub logged: Vec<RuleCount>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RuleCount {
    pub rule: String,
    pub count: u64,
}

impl FilterReport {
    fn new(stage: &str, input: u64) -> Self {
        FilterReport {
            stage: stage.to_string(),
            input,
            output: 0,
            removals: Vec::new(),
            logged: Vec::new(),
        }
    }

    fn bump(&mut self, rule: &str) {
        match self.removals.iter_mut().find(|r| r.rule == rule) {
            Some(r) => r.count += 1,
            None => self.removals.push(RuleCount {
                rule: rule.to_string(),
                count: 1,
            }),
        }
    }

    fn log(&mut self, rule: &str) {
        match self.logged.iter_mut().find(|r| r.rule == rule) {
            Some(r) => r.count += 1,
            None => self.logged.push(RuleCount {
                rule: rule.to_string(),
                count: 1,
            }),
        }
    }

    pub fn total_removed(&self) -> u64 {
        self.removals.iter().map(|r| r.count).sum()
    }

    /// Conservation invariant: input = output + removals.
    pub fn balanced(&self) -> bool {
        self.input == self.output + self.total_removed()
    }
}

/// Trade-file column layout. Column names are matched against the header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeFormat {
    pub delimiter: u8,
    /// Timestamp format, chrono syntax.
    pub timestamp_format: String,
}

impl Default for TradeFormat {
    fn default() -> Self {
        TradeFormat {
            delimiter: b',',
            timestamp_format: "%Y-%m-%d %H:%M:%S".to_string(),
        }
    }
}

const TRADE_COLUMNS: [&str; 12] = [
    "bond_id",
    "timestamp",
    "price",
    "volume",
    "side",
    "days_to_settlement",
    "when_issued",
    "locked_in",
    "sale_condition",
    "record_id",
    "kind",
    "original_record_id",
];

fn header_index(headers: &csv::StringRecord, required: &[&str]) -> Result<HashMap<String, usize>> {
    let mut idx = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        idx.insert(h.trim().to_string(), i);
    }
    for col in required {
        if !idx.contains_key(*col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    Ok(idx)
}

fn opt_field(s: &str) -> Option<String> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("na") {
        None
    } else {
        Some(t.to_string())
    }
}

fn parse_flag(s: &str) -> bool {
    matches!(s.trim(), "Y" | "y" | "1" | "true" | "TRUE")
}

/// Parse a delimited trade file. Malformed rows are counted as rejects and
/// skipped; a missing required column is a configuration error.
pub fn parse_trades<R: Read>(
    reader: R,
    format: &TradeFormat,
) -> Result<(Vec<TradeRecord>, FilterReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::config(format!("cannot read trade header: {e}")))?
        .clone();
    let idx = header_index(&headers, &TRADE_COLUMNS)?;

    let mut out = Vec::new();
    let mut report = FilterReport::new("parse_trades", 0);
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                report.input += 1;
                report.bump("malformed_row");
                continue;
            }
        };
        report.input += 1;
        match parse_trade_row(&row, &idx, format) {
            Ok(rec) => out.push(rec),
            Err(rule) => report.bump(rule),
        }
    }
    report.output = out.len() as u64;
    debug_assert!(report.balanced());
    Ok((out, report))
}

fn parse_trade_row(
    row: &csv::StringRecord,
    idx: &HashMap<String, usize>,
    format: &TradeFormat,
) -> std::result::Result<TradeRecord, &'static str> {
    let get = |col: &str| row.get(idx[col]).unwrap_or("");
    let timestamp = NaiveDateTime::parse_from_str(get("timestamp"), &format.timestamp_format)
        .map_err(|_| "bad_timestamp")?;
    let price: f64 = get("price").trim().parse().map_err(|_| "bad_price")?;
    if !(price > 0.0) {
        return Err("bad_price");
    }
    let volume: f64 = get("volume").trim().parse().map_err(|_| "bad_volume")?;
    if !(volume >= 0.0) {
        return Err("bad_volume");
    }
    let side = match get("side").trim() {
        "B" | "buy" => Side::Buy,
        "S" | "sell" => Side::Sell,
        "D" | "interdealer" => Side::Interdealer,
        _ => Side::Unknown,
    };
    let kind = match get("kind").trim() {
        "" | "T" | "trade" => RecordKind::Trade,
        "C" | "cancel" => RecordKind::Cancellation,
        "W" | "correct" => RecordKind::Correction,
        "R" | "reverse" => RecordKind::Reversal,
        _ => return Err("bad_kind"),
    };
    let bond_id = get("bond_id").trim().to_string();
    if bond_id.is_empty() {
        return Err("missing_bond_id");
    }
    Ok(TradeRecord {
        bond_id,
        timestamp,
        price,
        volume,
        side,
        days_to_settlement: opt_field(get("days_to_settlement")),
        when_issued: parse_flag(get("when_issued")),
        locked_in: parse_flag(get("locked_in")),
        sale_condition: opt_field(get("sale_condition")),
        record_id: get("record_id").trim().to_string(),
        kind,
        original_record_id: opt_field(get("original_record_id")),
    })
}

/// Static trade filters, applied in rule order with first-failing attribution.
pub fn apply_trace_filters(trades: Vec<TradeRecord>) -> (Vec<TradeRecord>, FilterReport) {
    let mut report = FilterReport::new("trace_filters", trades.len() as u64);
    let mut out = Vec::with_capacity(trades.len());
    for t in trades {
        if let Some(rule) = first_failing_trace_rule(&t) {
            report.bump(rule);
        } else {
            out.push(t);
        }
    }
    report.output = out.len() as u64;
    debug_assert!(report.balanced());
    (out, report)
}

fn first_failing_trace_rule(t: &TradeRecord) -> Option<&'static str> {
    match t.days_to_settlement.as_deref() {
        None | Some("000") | Some("001") | Some("002") => {}
        Some(_) => return Some("settlement_days"),
    }
    if t.when_issued {
        return Some("when_issued");
    }
    if t.locked_in {
        return Some("locked_in");
    }
    match t.sale_condition.as_deref() {
        None | Some("@") => {}
        Some(_) => return Some("sale_condition"),
    }
    if t.volume < 10_000.0 {
        return Some("volume_below_10000");
    }
    if !(t.price > 5.0 && t.price < 1_000.0) {
        return Some("price_band");
    }
    None
}

/// Repair the trade tape for cancellations, corrections, and reversals.
///
/// A cancellation removes itself and its original; a correction replaces the
/// original with the correcting record (re-tagged as a plain trade); a
/// reversal removes itself and its original. Linkage records whose original
/// cannot be found are kept as-is and logged.
pub fn cancel_correct_reverse(trades: Vec<TradeRecord>) -> (Vec<TradeRecord>, FilterReport) {
    let mut report = FilterReport::new("cancel_correct_reverse", trades.len() as u64);

    // Index originals by (bond_id, record_id). Linkage records themselves are
    // never targets of further linkage here.
    let mut original_pos: HashMap<(String, String), usize> = HashMap::new();
    for (i, t) in trades.iter().enumerate() {
        if t.kind == RecordKind::Trade && !t.record_id.is_empty() {
            original_pos.insert((t.bond_id.clone(), t.record_id.clone()), i);
        }
    }

    let mut drop = vec![false; trades.len()];
    let mut replacement: HashMap<usize, usize> = HashMap::new();
    for (i, t) in trades.iter().enumerate() {
        if t.kind == RecordKind::Trade {
            continue;
        }
        let key = t
            .original_record_id
            .as_ref()
            .map(|r| (t.bond_id.clone(), r.clone()));
        let target = key.and_then(|k| original_pos.get(&k).copied());
        match (t.kind, target) {
            (RecordKind::Cancellation, Some(j)) => {
                drop[j] = true;
                drop[i] = true;
                report.bump("cancelled");
                report.bump("cancellation_record");
            }
            (RecordKind::Reversal, Some(j)) => {
                drop[j] = true;
                drop[i] = true;
                report.bump("reversed");
                report.bump("reversal_record");
            }
            (RecordKind::Correction, Some(j)) => {
                // The correcting record takes the original's place.
                drop[j] = true;
                replacement.insert(i, j);
                report.bump("corrected_original");
            }
            (_, None) => {
                report.log("dangling_linkage");
            }
            (RecordKind::Trade, _) => unreachable!(),
        }
    }

    let mut out = Vec::with_capacity(trades.len());
    for (i, mut t) in trades.into_iter().enumerate() {
        if drop[i] {
            continue;
        }
        if replacement.contains_key(&i) {
            t.kind = RecordKind::Trade;
        }
        out.push(t);
    }
    report.output = out.len() as u64;
    debug_assert!(report.balanced());
    (out, report)
}

/// Bond types excluded from the universe (equity-linked, agency, government,
/// mortgage-backed).
const EXCLUDED_BOND_TYPES: [&str; 8] = [
    "EQLK", "ADEB", "AGCY", "USTC", "USBD", "USNT", "MBS", "CMBS",
];

const BAD_INTEREST_FREQUENCIES: [i32; 5] = [-1, 13, 14, 15, 16];

/// Screen the bond master down to the eligible universe.
pub fn apply_fisd_filters(rows: Vec<BondMaster>) -> (Vec<ValidatedBond>, FilterReport) {
    let mut report = FilterReport::new("fisd_filters", rows.len() as u64);
    let mut out = Vec::with_capacity(rows.len());
    for m in rows {
        match validate_bond(m) {
            Ok(v) => out.push(v),
            Err(rule) => report.bump(rule),
        }
    }
    report.output = out.len() as u64;
    debug_assert!(report.balanced());
    (out, report)
}

fn validate_bond(m: BondMaster) -> std::result::Result<ValidatedBond, &'static str> {
    if m.country_domicile != "USA" {
        return Err("domicile");
    }
    if m.private_placement {
        return Err("private_placement");
    }
    if m.foreign_currency {
        return Err("foreign_currency");
    }
    if m.rule_144a {
        return Err("rule_144a");
    }
    if m.asset_backed {
        return Err("asset_backed");
    }
    if m.convertible {
        return Err("convertible");
    }
    if m.coupon_type == "V" {
        return Err("variable_coupon");
    }
    if EXCLUDED_BOND_TYPES.contains(&m.bond_type.as_str()) {
        return Err("bond_type");
    }
    if BAD_INTEREST_FREQUENCIES.contains(&m.interest_frequency) {
        return Err("interest_frequency");
    }
    // Accrual-field validation.
    let dated_date = m.dated_date.ok_or("missing_dated_date")?;
    let offering_date = m.offering_date.ok_or("missing_accrual_field")?;
    let coupon_rate = m.coupon_rate.ok_or("missing_accrual_field")?;
    if coupon_rate < 0.0 {
        return Err("missing_accrual_field");
    }
    let is_zero = m.coupon_type == "Z" || coupon_rate == 0.0;
    let frequency = if is_zero {
        0
    } else {
        match m.coupon_frequency {
            Some(f) if matches!(f, 1 | 2 | 4 | 12) => f,
            _ => return Err("missing_accrual_field"),
        }
    };
    let day_count = if is_zero {
        DayCount::Thirty360
    } else {
        match m.day_count_basis.as_deref() {
            Some(s) => match s.parse::<DayCount>() {
                Ok(dc) => dc,
                Err(_) => return Err("unsupported_day_count"),
            },
            None => return Err("missing_accrual_field"),
        }
    };
    if m.maturity_date <= offering_date {
        return Err("maturity_before_offering");
    }
    let amount_outstanding = m.amount_outstanding.unwrap_or(m.face_value_at_issuance);
    let terms = AccrualTerms {
        coupon_rate: if is_zero { 0.0 } else { coupon_rate },
        frequency,
        day_count,
        dated_date,
        maturity_date: m.maturity_date,
    };
    Ok(ValidatedBond {
        master: m,
        terms,
        amount_outstanding,
    })
}

const MASTER_COLUMNS: [&str; 20] = [
    "bond_id",
    "issuer_id",
    "offering_date",
    "maturity_date",
    "coupon_rate",
    "coupon_frequency",
    "day_count_basis",
    "dated_date",
    "amount_outstanding",
    "face_value_at_issuance",
    "country_domicile",
    "private_placement",
    "rule_144a",
    "foreign_currency",
    "asset_backed",
    "convertible",
    "coupon_type",
    "bond_type",
    "interest_frequency",
    "issuer_industry_code",
];

/// Parse a delimited bond-master file.
pub fn parse_master<R: Read>(reader: R, delimiter: u8) -> Result<(Vec<BondMaster>, FilterReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::config(format!("cannot read master header: {e}")))?
        .clone();
    let idx = header_index(&headers, &MASTER_COLUMNS)?;

    let mut out = Vec::new();
    let mut report = FilterReport::new("parse_master", 0);
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                report.input += 1;
                report.bump("malformed_row");
                continue;
            }
        };
        report.input += 1;
        match parse_master_row(&row, &idx) {
            Ok(m) => out.push(m),
            Err(rule) => report.bump(rule),
        }
    }
    report.output = out.len() as u64;
    debug_assert!(report.balanced());
    Ok((out, report))
}

fn parse_date(s: &str) -> std::result::Result<Option<NaiveDate>, ()> {
    match opt_field(s) {
        None => Ok(None),
        Some(t) => NaiveDate::parse_from_str(&t, "%Y-%m-%d")
            .map(Some)
            .map_err(|_| ()),
    }
}

fn parse_master_row(
    row: &csv::StringRecord,
    idx: &HashMap<String, usize>,
) -> std::result::Result<BondMaster, &'static str> {
    let get = |col: &str| row.get(idx[col]).unwrap_or("");
    let maturity_date = parse_date(get("maturity_date"))
        .map_err(|_| "bad_date")?
        .ok_or("bad_date")?;
    let parse_opt_f64 = |s: &str| -> std::result::Result<Option<f64>, ()> {
        match opt_field(s) {
            None => Ok(None),
            Some(t) => t.parse().map(Some).map_err(|_| ()),
        }
    };
    Ok(BondMaster {
        bond_id: get("bond_id").trim().to_string(),
        issuer_id: get("issuer_id").trim().to_string(),
        offering_date: parse_date(get("offering_date")).map_err(|_| "bad_date")?,
        maturity_date,
        coupon_rate: parse_opt_f64(get("coupon_rate")).map_err(|_| "bad_number")?,
        coupon_frequency: opt_field(get("coupon_frequency"))
            .map(|s| s.parse().map_err(|_| "bad_number"))
            .transpose()?,
        day_count_basis: opt_field(get("day_count_basis")),
        dated_date: parse_date(get("dated_date")).map_err(|_| "bad_date")?,
        amount_outstanding: parse_opt_f64(get("amount_outstanding")).map_err(|_| "bad_number")?,
        face_value_at_issuance: get("face_value_at_issuance")
            .trim()
            .parse()
            .map_err(|_| "bad_number")?,
        country_domicile: get("country_domicile").trim().to_string(),
        private_placement: parse_flag(get("private_placement")),
        rule_144a: parse_flag(get("rule_144a")),
        foreign_currency: parse_flag(get("foreign_currency")),
        asset_backed: parse_flag(get("asset_backed")),
        convertible: parse_flag(get("convertible")),
        coupon_type: get("coupon_type").trim().to_string(),
        bond_type: get("bond_type").trim().to_string(),
        interest_frequency: get("interest_frequency")
            .trim()
            .parse()
            .map_err(|_| "bad_number")?,
        issuer_industry_code: get("issuer_industry_code")
            .trim()
            .parse()
            .map_err(|_| "bad_number")?,
    })
}
