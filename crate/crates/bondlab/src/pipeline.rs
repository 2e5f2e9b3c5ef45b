//! End-to-end run orchestration: ingest, returns, signals, factors, test
//! assets, and the inference battery, with every report written as
//! delimited text and summarized in a checksum manifest.

use crate::config::RunConfig;
use crate::io::{self, fmt};
use bondlab_core::calendar::{BusinessCalendar, Month};
use bondlab_core::factors::{
    self, aggregate_liquidity, compute_crf, compute_mktb, double_sort_factor, FactorSeries,
    LiquidityKind,
};
use bondlab_core::ingest::{self, FilterReport, ValidatedBond};
use bondlab_core::returns::{build_panel, daily_prices, PanelInputs, ReturnPanel};
use bondlab_core::signals::{
    compute_credit_spread_signal, compute_illiq, compute_rev, compute_var5,
};
use bondlab_core::stats::csr::{
    frontier, two_pass, CsrModelSpec, Parameterization, Weighting,
};
use bondlab_core::stats::famamacbeth::{fama_macbeth, CrossSection};
use bondlab_core::stats::hac::HacSpec;
use bondlab_core::stats::sharpe::{alpha_test, sharpe2, FactorModel};
use bondlab_core::testassets::{
    combo32, industry_portfolios, maturity_signal, post_ranking, rating_signal,
    sorted_portfolios, PortfolioSet, PortfolioWeighting,
};
use bondlab_core::{Error, Result};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// Emitted report files with their checksums.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    /// File name and hex SHA-256, in emission order.
    pub files: Vec<(String, String)>,
    /// Test-asset set used for the cross-sectional regressions.
    pub csr_assets: String,
}

/// Rewrap an error with the failing stage while keeping its class (and
/// therefore the process exit code) intact.
fn at(stage: &str, e: Error) -> Error {
    let msg = format!("[{stage}] {e}");
    match e {
        Error::Config(_) | Error::MissingColumn(_) => Error::Config(msg),
        Error::Data(_) | Error::BeforeDatedDate { .. } | Error::InsufficientData(_) => {
            Error::Data(msg)
        }
        Error::UnsupportedDayCount(_) | Error::Identification(_) => Error::Data(msg),
        Error::Singular(_) | Error::Numerical(_) => Error::Numerical(msg),
    }
}

/// Parse, repair, and filter the trade tape and the bond master.
pub fn run_ingest(
    trades_path: &Path,
    master_path: &Path,
) -> Result<(Vec<ingest::TradeRecord>, Vec<ValidatedBond>, Vec<FilterReport>)> {
    let stage = "ingest";
    let file = std::fs::File::open(trades_path)
        .map_err(|e| at(stage, Error::data(format!("cannot open {}: {e}", trades_path.display()))))?;
    let (trades, parse_report) =
        ingest::parse_trades(file, &Default::default()).map_err(|e| at(stage, e))?;
    let (trades, repair_report) = ingest::cancel_correct_reverse(trades);
    let (trades, trace_report) = ingest::apply_trace_filters(trades);
    let file = std::fs::File::open(master_path)
        .map_err(|e| at(stage, Error::data(format!("cannot open {}: {e}", master_path.display()))))?;
    let (masters, master_report) = ingest::parse_master(file, b',').map_err(|e| at(stage, e))?;
    let (universe, fisd_report) = ingest::apply_fisd_filters(masters);
    Ok((
        trades,
        universe,
        vec![parse_report, repair_report, trace_report, master_report, fisd_report],
    ))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::data(format!("cannot create {}: {e}", dir.display())))
}

fn factor_matrix(
    names: &[&str],
    series: &[&FactorSeries],
    months: &[Month],
) -> (Vec<String>, DMatrix<f64>) {
    let t = months.len();
    let k = series.len();
    let mut m = DMatrix::zeros(t, k);
    for (j, s) in series.iter().enumerate() {
        for (i, month) in months.iter().enumerate() {
            m[(i, j)] = s.get(*month).unwrap_or(f64::NAN);
        }
    }
    (names.iter().map(|s| s.to_string()).collect(), m)
}

/// Months where every factor has a value.
fn common_months(panel: &ReturnPanel, series: &[&FactorSeries]) -> Vec<Month> {
    panel
        .months
        .iter()
        .copied()
        .filter(|m| series.iter().all(|s| s.get(*m).is_some()))
        .collect()
}

/// Select portfolio columns usable for cross-sectional work: the rows of
/// `months`, keeping columns finite in at least 70 percent of rows.
fn usable_columns(set: &PortfolioSet, months: &[Month]) -> Vec<usize> {
    let index: HashMap<Month, usize> = set
        .months
        .iter()
        .enumerate()
        .map(|(i, m)| (*m, i))
        .collect();
    (0..set.returns.ncols())
        .filter(|&j| {
            let finite = months
                .iter()
                .filter(|m| {
                    index
                        .get(m)
                        .map(|&i| set.returns[(i, j)].is_finite())
                        .unwrap_or(false)
                })
                .count();
            finite * 10 >= months.len() * 7
        })
        .collect()
}

fn asset_matrix(
    set: &PortfolioSet,
    columns: &[usize],
    months: &[Month],
) -> (Vec<String>, DMatrix<f64>) {
    let index: HashMap<Month, usize> = set
        .months
        .iter()
        .enumerate()
        .map(|(i, m)| (*m, i))
        .collect();
    let mut m = DMatrix::from_element(months.len(), columns.len(), f64::NAN);
    for (r, month) in months.iter().enumerate() {
        if let Some(&i) = index.get(month) {
            for (c, &j) in columns.iter().enumerate() {
                m[(r, c)] = set.returns[(i, j)];
            }
        }
    }
    let names = columns.iter().map(|&j| set.column_names[j].clone()).collect();
    (names, m)
}

fn complete_rows(assets: &DMatrix<f64>, factors: &DMatrix<f64>) -> Vec<usize> {
    (0..assets.nrows())
        .filter(|&r| {
            assets.row(r).iter().all(|v| v.is_finite())
                && factors.row(r).iter().all(|v| v.is_finite())
        })
        .collect()
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

struct Emitter {
    out_dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Emitter {
    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.out_dir.join(name);
        io::write_table(&path, header, rows)?;
        self.files.push((name.to_string(), io::sha256_file(&path)?));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.out_dir.join(name);
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::data(format!("cannot serialize {name}: {e}")))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))?;
        self.files.push((name.to_string(), io::sha256_file(&path)?));
        Ok(())
    }
}

/// Run the full pipeline described by `cfg`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let (start, end) = cfg.span()?;
    ensure_dir(&cfg.out_dir)?;
    let mut em = Emitter {
        out_dir: cfg.out_dir.clone(),
        files: Vec::new(),
    };

    // Stage 1: ingest.
    let (trades, universe, reports) = run_ingest(&cfg.trades, &cfg.master)?;
    em.json(
        "filter_report.json",
        &serde_json::to_value(&reports).map_err(|e| at("ingest", Error::data(e.to_string())))?,
    )?;

    // Stage 2: inputs and monthly returns.
    let stage = "returns";
    let ratings = io::read_ratings(&cfg.ratings).map_err(|e| at(stage, e))?;
    let risk_free = io::read_risk_free(&cfg.risk_free).map_err(|e| at(stage, e))?;
    let curve = match &cfg.curve {
        Some(p) => Some(io::read_curve(p).map_err(|e| at(stage, e))?),
        None => None,
    };
    let industry_map = match &cfg.industry_map {
        Some(p) => io::read_map(p).map_err(|e| at(stage, e))?,
        None => HashMap::new(),
    };
    let cal = BusinessCalendar::new();
    let prices = daily_prices(&trades);
    let panel = build_panel(
        &prices,
        &PanelInputs {
            universe: &universe,
            ratings: &ratings,
            risk_free: &risk_free,
            curve: curve.as_ref(),
            calendar: &cal,
        },
        start,
        end,
    )
    .map_err(|e| at(stage, e))?;
    if panel.observations.is_empty() {
        return Err(at(stage, Error::InsufficientData("panel is empty".into())));
    }
    {
        let rows: Vec<Vec<String>> = panel
            .observations
            .values()
            .map(|o| {
                vec![
                    o.bond_id.clone(),
                    o.month.to_string(),
                    fmt(o.ret),
                    fmt(o.excess_return),
                    o.rating_score.map(fmt).unwrap_or_else(|| "NA".into()),
                    fmt(o.time_to_maturity),
                    fmt(o.amount_outstanding),
                    o.credit_spread.map(fmt).unwrap_or_else(|| "NA".into()),
                ]
            })
            .collect();
        em.table(
            "panel.csv",
            &[
                "bond_id",
                "month",
                "ret",
                "excess_return",
                "rating_score",
                "time_to_maturity",
                "amount_outstanding",
                "credit_spread",
            ],
            &rows,
        )?;
    }

    // Stage 3: signals.
    let stage = "signals";
    let var5 = compute_var5(&panel, cfg.var5_window, cfg.var5_min_obs);
    let illiq = compute_illiq(&prices, &panel.months, &cal, &cfg.illiq, cfg.winsor_tail);
    let rev = compute_rev(&panel);
    let spread_signal = compute_credit_spread_signal(&panel);
    let _ = stage;

    // Stage 4: factors.
    let stage = "factors";
    let mktb = compute_mktb(&panel);
    let drf = double_sort_factor(&panel, &var5, "DRF");
    let lrf = double_sort_factor(&panel, &illiq, "LRF");
    let crf = compute_crf(&panel, &var5, &illiq, &rev);
    let all_series: [&FactorSeries; 4] = [&mktb, &drf, &crf, &lrf];
    let factor_names = ["MKTB", "DRF", "CRF", "LRF"];
    {
        let rows: Vec<Vec<String>> = panel
            .months
            .iter()
            .map(|m| {
                std::iter::once(m.to_string())
                    .chain(all_series.iter().map(|s| {
                        s.get(*m).map(fmt).unwrap_or_else(|| "NA".into())
                    }))
                    .collect()
            })
            .collect();
        em.table("factors.csv", &["month", "MKTB", "DRF", "CRF", "LRF"], &rows)?;
    }
    let months = common_months(&panel, &all_series);
    if months.len() < 12 {
        return Err(at(
            stage,
            Error::InsufficientData(format!(
                "only {} months with all factors available",
                months.len()
            )),
        ));
    }
    let (joint_names, f_all) = factor_matrix(&factor_names, &all_series, &months);
    {
        let mut rows = Vec::new();
        for (j, name) in factor_names.iter().enumerate() {
            let col: Vec<f64> = f_all.column(j).iter().copied().collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            rows.push(vec![
                name.to_string(),
                format!("{}", col.len()),
                fmt(mean),
                fmt(sd),
                fmt(min),
                fmt(max),
            ]);
        }
        rows.push(vec![
            "panel_observations".to_string(),
            format!("{}", panel.observations.len()),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
        em.table(
            "table1_summary.csv",
            &["name", "months", "mean", "sd", "min", "max"],
            &rows,
        )?;
    }

    // Stage 5: squared-Sharpe battery.
    let stage = "sharpe";
    let hac = HacSpec::new(cfg.hac_lags);
    {
        let mut rows = Vec::new();
        let mkt_col = f_all.columns(0, 1).into_owned();
        for (j, name) in factor_names.iter().enumerate() {
            let col = f_all.columns(j, 1).into_owned();
            let model = FactorModel::new(name, vec![name.to_string()], col.clone());
            let est = sharpe2(&model, hac).map_err(|e| at(stage, e))?;
            let mean = col.iter().sum::<f64>() / col.nrows() as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (col.nrows() as f64 - 1.0))
                .sqrt();
            let (alpha, alpha_t, alpha_p) = if j == 0 {
                (String::new(), String::new(), String::new())
            } else {
                let a = alpha_test(&col, &mkt_col, hac).map_err(|e| at(stage, e))?;
                (fmt(a.alphas[0]), fmt(a.t_stats[0]), fmt(a.p_value))
            };
            rows.push(vec![
                name.to_string(),
                fmt(mean),
                fmt(sd),
                fmt(est.sample_sh2),
                fmt(est.adjusted_sh2),
                fmt(est.se),
                fmt(est.p_value),
                alpha,
                alpha_t,
                alpha_p,
            ]);
        }
        let joint = FactorModel::new("MKTB+DRF+CRF+LRF", joint_names.clone(), f_all.clone());
        let est = sharpe2(&joint, hac).map_err(|e| at(stage, e))?;
        rows.push(vec![
            joint.name.clone(),
            String::new(),
            String::new(),
            fmt(est.sample_sh2),
            fmt(est.adjusted_sh2),
            fmt(est.se),
            fmt(est.p_value),
            String::new(),
            String::new(),
            String::new(),
        ]);
        em.table(
            "table2_sharpe.csv",
            &[
                "name", "mean", "sd", "sh2", "adj_sh2", "se", "p_value", "alpha", "alpha_t",
                "alpha_p",
            ],
            &rows,
        )?;
    }

    // Stage 6: test assets.
    let stage = "testassets";
    let rating_set = sorted_portfolios(
        &panel,
        &rating_signal(&panel),
        5,
        PortfolioWeighting::Value,
        "rating",
    )
    .map_err(|e| at(stage, e))?;
    let maturity_set = sorted_portfolios(
        &panel,
        &maturity_signal(&panel),
        5,
        PortfolioWeighting::Value,
        "maturity",
    )
    .map_err(|e| at(stage, e))?;
    let spread_set = sorted_portfolios(
        &panel,
        &spread_signal,
        10,
        PortfolioWeighting::Value,
        "spread",
    )
    .map_err(|e| at(stage, e))?;
    let bond_industry: HashMap<String, String> = universe
        .iter()
        .map(|b| {
            (
                b.master.bond_id.clone(),
                format!("{}", b.master.issuer_industry_code),
            )
        })
        .collect();
    let (industry_set, unmapped) = industry_portfolios(&panel, &bond_industry, &industry_map)
        .map_err(|e| at(stage, e))?;
    let combo = combo32(&rating_set, &maturity_set, &spread_set, &industry_set)
        .map_err(|e| at(stage, e))?;
    {
        let header: Vec<String> = std::iter::once("month".to_string())
            .chain(combo.column_names.iter().cloned())
            .collect();
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<String>> = combo
            .months
            .iter()
            .enumerate()
            .map(|(i, m)| {
                std::iter::once(m.to_string())
                    .chain((0..combo.returns.ncols()).map(|j| fmt(combo.returns[(i, j)])))
                    .collect()
            })
            .collect();
        em.table("portfolios.csv", &header_refs, &rows)?;
    }

    // Stage 7: cross-sectional regressions.
    let stage = "csr";
    let combo_cols = usable_columns(&combo, &months);
    let candidates: [(&str, Vec<usize>); 3] = [
        ("combo32", combo_cols.clone()),
        ("rating+maturity+spread", combo_cols.iter().copied().filter(|&j| j < 20).collect()),
        ("rating+maturity", combo_cols.iter().copied().filter(|&j| j < 10).collect()),
    ];
    let mut chosen: Option<(String, Vec<String>, DMatrix<f64>, DMatrix<f64>)> = None;
    for (label, cols) in &candidates {
        if cols.is_empty() {
            continue;
        }
        let (names, assets) = asset_matrix(&combo, cols, &months);
        let rows = complete_rows(&assets, &f_all);
        if rows.len() >= cols.len() + joint_names.len() + 8 {
            chosen = Some((
                label.to_string(),
                names,
                select_rows(&assets, &rows),
                select_rows(&f_all, &rows),
            ));
            break;
        }
    }
    let (asset_label, asset_names, assets, f_csr) = chosen.ok_or_else(|| {
        at(
            stage,
            Error::InsufficientData("no test-asset set has enough complete months".into()),
        )
    })?;
    let weightings: Vec<Weighting> = if cfg.gls {
        vec![Weighting::Ols, Weighting::Gls]
    } else {
        vec![Weighting::Ols]
    };
    let model_defs: [(&str, usize); 2] = [("MKTB", 1), ("MKTB+DRF+CRF+LRF", 4)];
    {
        let mut rows = Vec::new();
        for (model_name, k) in &model_defs {
            let f = f_csr.columns(0, *k).into_owned();
            for &w in &weightings {
                let mut spec =
                    CsrModelSpec::new(model_name, f.clone(), w, Parameterization::Beta);
                spec.hac = hac;
                spec.mc_draws = cfg.mc_draws;
                spec.mc_seed = cfg.seed;
                let res = two_pass(&assets, &spec).map_err(|e| at(stage, e))?;
                let wname = match w {
                    Weighting::Ols => "OLS",
                    Weighting::Gls => "GLS",
                };
                let terms: Vec<String> = std::iter::once("gamma0".to_string())
                    .chain(joint_names.iter().take(*k).cloned())
                    .collect();
                for (i, term) in terms.iter().enumerate() {
                    rows.push(vec![
                        model_name.to_string(),
                        wname.to_string(),
                        term.clone(),
                        fmt(res.estimates[i]),
                        fmt(res.t_m[i]),
                        fmt(res.t_c[i]),
                    ]);
                }
                rows.push(vec![
                    model_name.to_string(),
                    wname.to_string(),
                    "r2".to_string(),
                    fmt(res.r2),
                    String::new(),
                    String::new(),
                ]);
                rows.push(vec![
                    model_name.to_string(),
                    wname.to_string(),
                    "p_r2_one".to_string(),
                    fmt(res.p_r2_one),
                    String::new(),
                    String::new(),
                ]);
            }
        }
        em.table(
            "table3_csr.csv",
            &["model", "weighting", "term", "estimate", "t_m", "t_c"],
            &rows,
        )?;
    }

    // Frontier data file.
    {
        let models = vec![
            FactorModel::new("MKTB", vec!["MKTB".into()], f_csr.columns(0, 1).into_owned()),
            FactorModel::new("MKTB+DRF+CRF+LRF", joint_names.clone(), f_csr.clone()),
        ];
        let curve = frontier(&assets, &models, cfg.frontier_grid).map_err(|e| at(stage, e))?;
        let mut rows: Vec<Vec<String>> = curve
            .points
            .iter()
            .map(|p| {
                vec![
                    "frontier".to_string(),
                    String::new(),
                    fmt(p.sigma),
                    fmt(p.mean),
                ]
            })
            .collect();
        rows.push(vec![
            "asset_tangency".to_string(),
            String::new(),
            String::new(),
            fmt(curve.asset_tangency),
        ]);
        for (name, theta) in &curve.model_tangencies {
            rows.push(vec![
                "model_tangency".to_string(),
                name.clone(),
                String::new(),
                fmt(*theta),
            ]);
        }
        rows.push(vec![
            "min_variance".to_string(),
            String::new(),
            fmt(curve.min_variance.sigma),
            fmt(curve.min_variance.mean),
        ]);
        em.table("frontier.csv", &["kind", "label", "sigma", "mean"], &rows)?;
    }

    // Stage 8: mimicking portfolio for aggregate illiquidity innovations.
    let stage = "mimicking";
    {
        let liquidity =
            aggregate_liquidity(&prices, LiquidityKind::Am, 10).map_err(|e| at(stage, e))?;
        let rating_index: HashMap<Month, usize> = rating_set
            .months
            .iter()
            .enumerate()
            .map(|(i, m)| (*m, i))
            .collect();
        let mut g = Vec::new();
        let mut basis_rows = Vec::new();
        let mut market = Vec::new();
        for m in &months {
            let (Some(inn), Some(&ri), Some(mk)) = (
                liquidity.innovations.get(m),
                rating_index.get(m),
                mktb.get(*m),
            ) else {
                continue;
            };
            let row: Vec<f64> = (0..5).map(|j| rating_set.returns[(ri, j)]).collect();
            if row.iter().any(|v| !v.is_finite()) {
                continue;
            }
            g.push(*inn);
            basis_rows.push(row);
            market.push(mk);
        }
        let t = g.len();
        if t < 5 + 2 {
            return Err(at(
                stage,
                Error::InsufficientData(format!("only {t} months for the mimicking projection")),
            ));
        }
        let basis = DMatrix::from_fn(t, 5, |r, c| basis_rows[r][c]);
        let basis_names: Vec<String> = rating_set.column_names.clone();
        let port = factors::mimicking_portfolio("AM_innovation", &g, &basis, &basis_names)
            .map_err(|e| at(stage, e))?;
        let block = cfg.bootstrap_block.min(t / 2).max(1);
        let se = factors::mimicking_bootstrap_se(
            &g,
            &basis,
            &basis_names,
            Some(market.as_slice()),
            block,
            cfg.bootstrap_replications,
            cfg.seed,
        )
        .map_err(|e| at(stage, e))?;
        let mut rows = Vec::new();
        for (j, name) in basis_names.iter().enumerate() {
            rows.push(vec![
                "weight".to_string(),
                name.clone(),
                fmt(port.weights[j]),
            ]);
        }
        rows.push(vec!["r2".to_string(), String::new(), fmt(port.r2)]);
        rows.push(vec!["f_stat".to_string(), String::new(), fmt(port.f_stat)]);
        rows.push(vec!["p_value".to_string(), String::new(), fmt(port.p_value)]);
        rows.push(vec!["se_ejn_mean".to_string(), String::new(), fmt(se.ejn_mean)]);
        rows.push(vec!["se_dmr_mean".to_string(), String::new(), fmt(se.dmr_mean)]);
        if let (Some(ea), Some(da)) = (se.ejn_alpha, se.dmr_alpha) {
            rows.push(vec!["se_ejn_alpha".to_string(), String::new(), fmt(ea)]);
            rows.push(vec!["se_dmr_alpha".to_string(), String::new(), fmt(da)]);
        }
        em.table("table4_mimicking.csv", &["quantity", "label", "value"], &rows)?;

        // Stage 9: jackknife squared Sharpe ratios.
        let stage = "jackknife";
        let mut rows = Vec::new();
        for (j, name) in factor_names.iter().enumerate() {
            let col = f_all.columns(j, 1).into_owned();
            let jk = bondlab_core::stats::sharpe::jackknife_sh2_traded(&col)
                .map_err(|e| at(stage, e))?;
            rows.push(vec![name.to_string(), "traded".to_string(), fmt(jk)]);
        }
        let joint_jk = bondlab_core::stats::sharpe::jackknife_sh2_traded(&f_all)
            .map_err(|e| at(stage, e))?;
        rows.push(vec![
            "MKTB+DRF+CRF+LRF".to_string(),
            "traded".to_string(),
            fmt(joint_jk),
        ]);
        let g_mat = DMatrix::from_column_slice(t, 1, &g);
        let mim_jk = bondlab_core::stats::sharpe::jackknife_sh2_mimicking(&g_mat, &basis)
            .map_err(|e| at(stage, e))?;
        rows.push(vec![
            "AM_innovation".to_string(),
            "mimicking".to_string(),
            fmt(mim_jk),
        ]);
        em.table("table5_jackknife.csv", &["name", "kind", "adj_sh2"], &rows)?;
    }

    // Stage 10: bond-level Fama-MacBeth with post-ranking betas.
    let stage = "famamacbeth";
    {
        let assignment =
            post_ranking(&panel, &mktb, None, cfg.var5_window, cfg.var5_min_obs)
                .map_err(|e| at(stage, e))?;
        let mut sections = Vec::new();
        for m in &panel.months {
            let mut y = Vec::new();
            let mut x = Vec::new();
            for o in panel.month_slice(*m) {
                if let Some(b) = assignment.assigned_beta.get(&(o.bond_id.clone(), *m)) {
                    y.push(o.excess_return);
                    x.push(*b);
                }
            }
            if y.is_empty() {
                continue;
            }
            sections.push(CrossSection {
                label: m.to_string(),
                x: DMatrix::from_column_slice(y.len(), 1, &x),
                y,
            });
        }
        let fm = fama_macbeth(&sections, HacSpec::new(cfg.fm_lags)).map_err(|e| at(stage, e))?;
        let mut rows = vec![
            vec![
                "intercept".to_string(),
                fmt(fm.premia[0]),
                fmt(fm.t_stats[0]),
            ],
            vec![
                "beta_MKTB".to_string(),
                fmt(fm.premia[1]),
                fmt(fm.t_stats[1]),
            ],
            vec!["avg_adj_r2".to_string(), fmt(fm.avg_adj_r2), String::new()],
            vec![
                "months_used".to_string(),
                format!("{}", fm.months_used),
                String::new(),
            ],
            vec![
                "observations".to_string(),
                format!("{}", fm.observations),
                String::new(),
            ],
        ];
        for q in 0..5 {
            rows.push(vec![
                format!("post_beta_q{}", q + 1),
                fmt(assignment.post_betas[q]),
                String::new(),
            ]);
        }
        em.table("table6_fm.csv", &["term", "value", "t_stat"], &rows)?;
    }

    // Manifest: config hash, seeds, and per-file checksums.
    {
        let config_text = serde_json::to_string(cfg)
            .map_err(|e| Error::data(format!("cannot serialize config: {e}")))?;
        let mut file_map = serde_json::Map::new();
        for (name, hash) in &em.files {
            file_map.insert(name.clone(), serde_json::Value::String(hash.clone()));
        }
        let manifest = serde_json::json!({
            "config_hash": io::sha256_str(&config_text),
            "seed": cfg.seed,
            "csr_assets": asset_label,
            "csr_asset_columns": asset_names,
            "unmapped_industry_bonds": unmapped.len(),
            "files": serde_json::Value::Object(file_map),
        });
        em.json("manifest.json", &manifest)?;
    }

    Ok(ReportBundle {
        out_dir: cfg.out_dir.clone(),
        files: em.files,
        csr_assets: asset_label,
    })
}

/// Run only ingest and return construction, emitting the panel file.
pub fn run_panel(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let (start, end) = cfg.span()?;
    ensure_dir(&cfg.out_dir)?;
    let (trades, universe, _) = run_ingest(&cfg.trades, &cfg.master)?;
    let stage = "returns";
    let ratings = io::read_ratings(&cfg.ratings).map_err(|e| at(stage, e))?;
    let risk_free = io::read_risk_free(&cfg.risk_free).map_err(|e| at(stage, e))?;
    let curve = match &cfg.curve {
        Some(p) => Some(io::read_curve(p).map_err(|e| at(stage, e))?),
        None => None,
    };
    let cal = BusinessCalendar::new();
    let prices = daily_prices(&trades);
    let panel = build_panel(
        &prices,
        &PanelInputs {
            universe: &universe,
            ratings: &ratings,
            risk_free: &risk_free,
            curve: curve.as_ref(),
            calendar: &cal,
        },
        start,
        end,
    )
    .map_err(|e| at(stage, e))?;
    let path = cfg.out_dir.join("panel.csv");
    let rows: Vec<Vec<String>> = panel
        .observations
        .values()
        .map(|o| {
            vec![
                o.bond_id.clone(),
                o.month.to_string(),
                fmt(o.ret),
                fmt(o.excess_return),
                o.rating_score.map(fmt).unwrap_or_else(|| "NA".into()),
                fmt(o.time_to_maturity),
                fmt(o.amount_outstanding),
                o.credit_spread.map(fmt).unwrap_or_else(|| "NA".into()),
            ]
        })
        .collect();
    io::write_table(
        &path,
        &[
            "bond_id",
            "month",
            "ret",
            "excess_return",
            "rating_score",
            "time_to_maturity",
            "amount_outstanding",
            "credit_spread",
        ],
        &rows,
    )?;
    Ok(path)
}
