//! Synthetic bond universe with known ground truth.
//!
//! True clean prices follow lognormal daily paths driven by common factors
//! plus idiosyncratic noise; observed trade prices add an i.i.d. bid-ask
//! bounce of relative half-width `noise`. Successive observed daily log
//! price changes then have autocovariance -noise^2, so the price-reversal
//! illiquidity measured in percent units has expectation (100 * noise)^2.
//!
//! Alongside the input files the generator emits the true monthly returns
//! (computed from the noiseless path with the same month-boundary rules the
//! pipeline applies), the true factor loadings, and the realized monthly
//! factor values, so oracle tests can compare pipeline output against
//! ground truth.

use crate::config::SyntheticConfig;
use crate::io::{self, MasterRow};
use bondlab_core::calendar::{BusinessCalendar, Month};
use bondlab_core::daycount::{AccrualTerms, DayCount};
use bondlab_core::ingest::{RecordKind, Side, TradeRecord};
use bondlab_core::returns::monthly_return;
use bondlab_core::testassets::INDUSTRY_GROUPS;
use bondlab_core::{Error, Result};
use chrono::{Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Ground truth retained in memory for oracle tests.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// True monthly returns at the month boundaries the pipeline would pick.
    pub returns: BTreeMap<(String, Month), f64>,
    /// True factor loadings per bond.
    pub betas: BTreeMap<String, Vec<f64>>,
    /// Realized monthly factor values (sums of daily draws).
    pub factors: BTreeMap<Month, Vec<f64>>,
    /// Closed-form expected price-reversal illiquidity, percent-squared.
    pub expected_illiq: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticUniverse {
    pub truth: GroundTruth,
    pub files: Vec<PathBuf>,
}

struct BondSpec {
    id: String,
    betas: Vec<f64>,
    terms: AccrualTerms,
    rating_path: Vec<f64>,
    master: MasterRow,
}

/// Generate the universe into `out`, returning the retained ground truth.
pub fn gen_universe(cfg: &SyntheticConfig, out: &Path) -> Result<SyntheticUniverse> {
    cfg.validate()?;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::data(format!("cannot create {}: {e}", out.display())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cal = BusinessCalendar::new();
    let k = cfg.factor_means.len();
    let start = cfg.start_month()?;
    let end = start.offset(cfg.months as i64 - 1);
    // Prices start one month early so first-month boundary prices exist.
    let gen_start = start.prev();
    let gen_months: Vec<Month> = gen_start.range_inclusive(end).collect();
    let sample_months: Vec<Month> = start.range_inclusive(end).collect();

    let days: Vec<NaiveDate> = gen_months
        .iter()
        .flat_map(|m| cal.business_days(*m))
        .collect();
    let n_days = days.len();

    // Daily factor draws, scaled so monthly moments match the config.
    let cov = DMatrix::from_fn(k, k, |i, j| cfg.factor_cov[i][j] / 21.0);
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::config("factor covariance is not positive definite"))?;
    let l = chol.l();
    let mut daily_factors = DMatrix::zeros(n_days, k);
    for d in 0..n_days {
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = DVector::from_fn(k, |i, _| cfg.factor_means[i] / 21.0) + &l * z;
        for i in 0..k {
            daily_factors[(d, i)] = f[i];
        }
    }

    let offering = gen_start.first_day() - Duration::days(365);
    let vol_dist = Exp::new(1.0 / cfg.volume_mean)
        .map_err(|_| Error::config("volume mean must be positive"))?;
    let is_zero = cfg.coupon_rate == 0.0;

    let mut bonds = Vec::with_capacity(cfg.bonds);
    for b in 0..cfg.bonds {
        let id = format!("B{b:05}");
        let issuer = b % cfg.issuers;
        let mut betas = vec![0.0; k];
        for (i, beta) in betas.iter_mut().enumerate() {
            let center = if i == 0 { 1.0 } else { 0.0 };
            *beta = center + cfg.beta_dispersion * rng.sample::<f64, _>(StandardNormal);
        }
        let amount = 1.0e7 * (0.5 * rng.sample::<f64, _>(StandardNormal)).exp();
        let years_past_end: f64 = 2.0 + 13.0 * rng.gen::<f64>();
        let maturity = end.last_day() + Duration::days((years_past_end * 365.25) as i64);
        let mut rating_path = Vec::with_capacity(sample_months.len());
        let mut level = 2.0 + 18.0 * rng.gen::<f64>();
        for _ in &sample_months {
            rating_path.push(level.round().clamp(1.0, 22.0));
            level += cfg.rating_drift * rng.sample::<f64, _>(StandardNormal);
            level = level.clamp(1.0, 22.0);
        }
        let terms = AccrualTerms {
            coupon_rate: cfg.coupon_rate,
            frequency: if is_zero { 0 } else { cfg.coupon_frequency },
            day_count: DayCount::Thirty360,
            dated_date: offering,
            maturity_date: maturity,
        };
        let master = MasterRow {
            bond_id: id.clone(),
            issuer_id: format!("I{issuer:04}"),
            offering_date: offering,
            maturity_date: maturity,
            coupon_rate: cfg.coupon_rate,
            coupon_frequency: cfg.coupon_frequency,
            day_count_basis: "30/360".to_string(),
            dated_date: offering,
            amount_outstanding: amount,
            face_value_at_issuance: amount,
            coupon_type: if is_zero { "Z" } else { "F" }.to_string(),
            issuer_industry_code: 1000 + 100 * (issuer % 12) as u32,
        };
        bonds.push(BondSpec {
            id,
            betas,
            terms,
            rating_path,
            master,
        });
    }

    // Per-bond price paths, trades, and boundary-rule ground truth.
    let idio_daily = cfg.idio_vol / 21.0f64.sqrt();
    let mut trades = Vec::new();
    let mut truth_returns = BTreeMap::new();
    for bond in &bonds {
        let mut log_price = 100.0f64.ln();
        let mut true_prices: BTreeMap<NaiveDate, f64> = BTreeMap::new();
        let mut traded: BTreeMap<NaiveDate, f64> = BTreeMap::new();
        for (d, &date) in days.iter().enumerate() {
            let common: f64 = (0..k).map(|i| bond.betas[i] * daily_factors[(d, i)]).sum();
            log_price += common + idio_daily * rng.sample::<f64, _>(StandardNormal);
            let p = log_price.exp();
            true_prices.insert(date, p);
            if rng.gen::<f64>() < cfg.trade_probability {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let observed = p * (1.0 + cfg.noise * sign);
                let volume = 10_000.0 + rng.sample(vol_dist);
                traded.insert(date, observed);
                trades.push(TradeRecord {
                    bond_id: bond.id.clone(),
                    timestamp: date.and_hms_opt(12, 0, 0).unwrap(),
                    price: observed,
                    volume,
                    side: Side::Interdealer,
                    days_to_settlement: Some("000".to_string()),
                    when_issued: false,
                    locked_in: false,
                    sale_condition: None,
                    record_id: format!("{}-{d}", bond.id),
                    kind: RecordKind::Trade,
                    original_record_id: None,
                });
            }
        }
        // True returns at the same boundary days the pipeline will select.
        for &m in &sample_months {
            let Some(d_end) = last_traded(&traded, &cal.last_n_business_days(m, 5)) else {
                continue;
            };
            let d_start = match last_traded(&traded, &cal.last_n_business_days(m.prev(), 5)) {
                Some(d) => d,
                None => match first_traded(&traded, &cal.first_n_business_days(m, 5)) {
                    Some(d) => d,
                    None => continue,
                },
            };
            if d_start >= d_end {
                continue;
            }
            let p_end = true_prices[&d_end];
            let p_start = true_prices[&d_start];
            let ai_end = bond.terms.accrued_interest(d_end)?;
            let ai_start = bond.terms.accrued_interest(d_start)?;
            let coupon: f64 = bond
                .terms
                .coupon_dates_between(d_start, d_end)
                .iter()
                .map(|_| bond.terms.coupon_per_period())
                .sum();
            let ret = monthly_return(p_end, ai_end, coupon, p_start, ai_start)?;
            truth_returns.insert((bond.id.clone(), m), ret);
        }
    }

    // Monthly factor realizations.
    let mut monthly_factors: BTreeMap<Month, Vec<f64>> = BTreeMap::new();
    for (d, &date) in days.iter().enumerate() {
        let m = Month::from_date(date);
        let entry = monthly_factors.entry(m).or_insert_with(|| vec![0.0; k]);
        for i in 0..k {
            entry[i] += daily_factors[(d, i)];
        }
    }

    // Emit input files.
    let mut files = Vec::new();
    let trades_path = out.join("trades.csv");
    io::write_trades(&trades_path, &trades)?;
    files.push(trades_path);

    let master_path = out.join("master.csv");
    let master_rows: Vec<MasterRow> = bonds.iter().map(|b| b.master.clone()).collect();
    io::write_master(&master_path, &master_rows)?;
    files.push(master_path);

    let ratings_path = out.join("ratings.csv");
    {
        let mut rows = Vec::new();
        for bond in &bonds {
            for (i, &m) in sample_months.iter().enumerate() {
                rows.push(vec![
                    bond.id.clone(),
                    m.to_string(),
                    format!("{}", bond.rating_path[i] as i64),
                ]);
            }
        }
        io::write_table(&ratings_path, &["bond_id", "month", "score"], &rows)?;
    }
    files.push(ratings_path);

    let rf_path = out.join("risk_free.csv");
    {
        let rows: Vec<Vec<String>> = sample_months
            .iter()
            .map(|m| vec![m.to_string(), format!("{}", cfg.risk_free)])
            .collect();
        io::write_table(&rf_path, &["month", "rate"], &rows)?;
    }
    files.push(rf_path);

    let curve_path = out.join("curve.csv");
    {
        let rows: Vec<Vec<String>> = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0]
            .iter()
            .map(|m| vec![format!("{m}"), "0.03".to_string()])
            .collect();
        io::write_table(&curve_path, &["maturity_years", "yield"], &rows)?;
    }
    files.push(curve_path);

    let map_path = out.join("industry_map.csv");
    {
        let rows: Vec<Vec<String>> = (0..12)
            .map(|i| vec![format!("{}", 1000 + 100 * i), INDUSTRY_GROUPS[i].to_string()])
            .collect();
        io::write_table(&map_path, &["code", "group"], &rows)?;
    }
    files.push(map_path);

    // Ground-truth files for oracle use.
    let truth_ret_path = out.join("truth_returns.csv");
    {
        let rows: Vec<Vec<String>> = truth_returns
            .iter()
            .map(|((b, m), r)| vec![b.clone(), m.to_string(), io::fmt(*r)])
            .collect();
        io::write_table(&truth_ret_path, &["bond_id", "month", "ret"], &rows)?;
    }
    files.push(truth_ret_path);

    let truth_beta_path = out.join("truth_betas.csv");
    {
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(&truth_beta_path)
                .map_err(|e| Error::data(format!("cannot create truth_betas.csv: {e}")))?,
        );
        let header: Vec<String> = std::iter::once("bond_id".to_string())
            .chain((1..=k).map(|i| format!("beta{i}")))
            .collect();
        writeln!(w, "{}", header.join(",")).map_err(|e| Error::data(e.to_string()))?;
        for bond in &bonds {
            let cells: Vec<String> = std::iter::once(bond.id.clone())
                .chain(bond.betas.iter().map(|b| io::fmt(*b)))
                .collect();
            writeln!(w, "{}", cells.join(",")).map_err(|e| Error::data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
    }
    files.push(truth_beta_path);

    let truth_factor_path = out.join("truth_factors.csv");
    {
        let rows: Vec<Vec<String>> = monthly_factors
            .iter()
            .map(|(m, f)| {
                std::iter::once(m.to_string())
                    .chain(f.iter().map(|v| io::fmt(*v)))
                    .collect()
            })
            .collect();
        let header: Vec<String> = std::iter::once("month".to_string())
            .chain((1..=k).map(|i| format!("f{i}")))
            .collect();
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        io::write_table(&truth_factor_path, &header_refs, &rows)?;
    }
    files.push(truth_factor_path);

    let betas = bonds
        .iter()
        .map(|b| (b.id.clone(), b.betas.clone()))
        .collect();
    Ok(SyntheticUniverse {
        truth: GroundTruth {
            returns: truth_returns,
            betas,
            factors: monthly_factors,
            expected_illiq: (100.0 * cfg.noise).powi(2),
        },
        files,
    })
}

fn last_traded(traded: &BTreeMap<NaiveDate, f64>, window: &[NaiveDate]) -> Option<NaiveDate> {
    window.iter().rev().find(|d| traded.contains_key(d)).copied()
}

fn first_traded(traded: &BTreeMap<NaiveDate, f64>, window: &[NaiveDate]) -> Option<NaiveDate> {
    window.iter().find(|d| traded.contains_key(d)).copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use bondlab_core::ingest;
    use bondlab_core::returns::{build_panel, daily_prices, PanelInputs, RatingHistory};

    fn small_cfg(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            seed,
            bonds: 12,
            issuers: 4,
            months: 8,
            noise: 0.0,
            ..Default::default()
        }
    }

    /// Run the real ingest and return stages on generated files.
    fn pipeline_panel(dir: &Path, cfg: &SyntheticConfig) -> bondlab_core::returns::ReturnPanel {
        let file = std::fs::File::open(dir.join("trades.csv")).unwrap();
        let (trades, _) = ingest::parse_trades(file, &Default::default()).unwrap();
        let (trades, _) = ingest::cancel_correct_reverse(trades);
        let (trades, _) = ingest::apply_trace_filters(trades);
        let file = std::fs::File::open(dir.join("master.csv")).unwrap();
        let (masters, _) = ingest::parse_master(file, b',').unwrap();
        let (universe, _) = ingest::apply_fisd_filters(masters);
        let prices = daily_prices(&trades);
        let ratings = RatingHistory::new();
        let rf = crate::io::read_risk_free(&dir.join("risk_free.csv")).unwrap();
        let cal = BusinessCalendar::new();
        let start = cfg.start_month().unwrap();
        build_panel(
            &prices,
            &PanelInputs {
                universe: &universe,
                ratings: &ratings,
                risk_free: &rf,
                curve: None,
                calendar: &cal,
            },
            start,
            start.offset(cfg.months as i64 - 1),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_daily_trading_matches_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg(7);
        let uni = gen_universe(&cfg, dir.path()).unwrap();
        let panel = pipeline_panel(dir.path(), &cfg);
        assert!(!uni.truth.returns.is_empty());
        for ((bond, month), truth) in &uni.truth.returns {
            let obs = panel.get(bond, *month).unwrap_or_else(|| {
                panic!("missing pipeline return for {bond} {month}");
            });
            assert!(
                (obs.ret - truth).abs() < 1e-10,
                "{bond} {month}: {} vs {truth}",
                obs.ret
            );
        }
    }

    #[test]
    fn sparse_trading_gaps_match_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig {
            trade_probability: 0.3,
            ..small_cfg(8)
        };
        let uni = gen_universe(&cfg, dir.path()).unwrap();
        let panel = pipeline_panel(dir.path(), &cfg);
        let pipeline_keys: std::collections::BTreeSet<_> =
            panel.observations.keys().cloned().collect();
        let truth_keys: std::collections::BTreeSet<_> =
            uni.truth.returns.keys().cloned().collect();
        assert_eq!(pipeline_keys, truth_keys);
        assert!(truth_keys.len() < cfg.bonds * cfg.months);
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = small_cfg(9);
        gen_universe(&cfg, d1.path()).unwrap();
        gen_universe(&cfg, d2.path()).unwrap();
        for name in ["trades.csv", "master.csv", "ratings.csv", "truth_returns.csv"] {
            assert_eq!(
                crate::io::sha256_file(&d1.path().join(name)).unwrap(),
                crate::io::sha256_file(&d2.path().join(name)).unwrap(),
                "{name} differs between identical runs"
            );
        }
    }

    #[test]
    fn infeasible_config_rejected() {
        let cfg = SyntheticConfig {
            trade_probability: 0.0,
            ..Default::default()
        };
        assert!(gen_universe(&cfg, Path::new("/tmp/unused")).is_err());
    }
}
