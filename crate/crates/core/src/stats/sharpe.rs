//! Squared Sharpe ratios with small-sample bias adjustment, robust alpha
//! (spanning) tests, and pairwise/multiple model comparison.
//!
//! The sample squared Sharpe ratio of a factor set is
//! `sh2 = mu' V^{-1} mu` with tangency weights `lambda = V^{-1} mu`. The
//! bias-adjusted value is `(T-K-2)/T * sh2 - K/T`, unbiased under joint
//! normality. Inference on `sh2` uses the influence series
//!
//! ```text
//! u_t = 2 lambda'(f_t - mu) - (lambda'(f_t - mu))^2 + sh2
//! ```
//!
//! whose HAC variance gives the standard error of the estimate; pairwise
//! nonnested comparisons difference the two models' influence series, and
//! nested comparisons reduce to an alpha test on the extra factors.

use crate::error::Error;
use crate::stats::bootstrap;
use crate::stats::hac::{self, HacSpec};
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal};

/// A named set of traded factor return series (rows are months, percent or
/// decimal units; all inference is scale-invariant).
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub name: String,
    pub factor_names: Vec<String>,
    /// T x K.
    pub returns: DMatrix<f64>,
}

impl FactorModel {
    pub fn new(name: &str, factor_names: Vec<String>, returns: DMatrix<f64>) -> Self {
        assert_eq!(factor_names.len(), returns.ncols());
        FactorModel {
            name: name.to_string(),
            factor_names,
            returns,
        }
    }

    /// Column submatrix for the named factors.
    pub fn columns(&self, names: &[String]) -> DMatrix<f64> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.factor_names.iter().position(|f| f == n).unwrap())
            .collect();
        DMatrix::from_fn(self.returns.nrows(), idx.len(), |r, c| {
            self.returns[(r, idx[c])]
        })
    }
}

pub fn sample_mean(m: &DMatrix<f64>) -> DVector<f64> {
    m.row_mean().transpose()
}

/// Sample covariance with the T-1 divisor.
pub fn sample_cov(m: &DMatrix<f64>) -> DMatrix<f64> {
    let t = m.nrows();
    let mean = m.row_mean();
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    centered.transpose() * centered / (t as f64 - 1.0)
}

/// Small-sample bias adjustment for a squared Sharpe ratio.
pub fn bias_adjust(sample_sh2: f64, t: usize, k: usize) -> f64 {
    let (tf, kf) = (t as f64, k as f64);
    (tf - kf - 2.0) / tf * sample_sh2 - kf / tf
}

/// Squared-Sharpe estimate for one factor set.
#[derive(Debug, Clone)]
pub struct SharpeEstimate {
    pub t: usize,
    pub k: usize,
    pub sample_sh2: f64,
    pub adjusted_sh2: f64,
    /// Tangency weights `V^{-1} mu`.
    pub tangency_weights: DVector<f64>,
    /// Standard error of the squared Sharpe estimate.
    pub se: f64,
    /// One-sided p-value for the null of a zero squared Sharpe ratio.
    pub p_value: f64,
}

fn invert_cov(cov: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let scale = cov.trace() / cov.nrows() as f64;
    let chol = cov.clone().cholesky();
    match chol {
        Some(c) if cov.clone().svd(false, false).singular_values.min() > 1e-12 * scale => {
            Ok(c.inverse())
        }
        _ => Err(Error::Singular(format!(
            "factor covariance is singular or near-singular for [{}]",
            names.join(", ")
        ))),
    }
}

/// Influence series for the squared Sharpe ratio of `returns`.
pub fn sh2_influence(returns: &DMatrix<f64>, mu: &DVector<f64>, lambda: &DVector<f64>, sh2: f64) -> Vec<f64> {
    (0..returns.nrows())
        .map(|t| {
            let d = returns.row(t).transpose() - mu;
            let s = lambda.dot(&d);
            2.0 * s - s * s + sh2
        })
        .collect()
}

/// Sample and bias-adjusted squared Sharpe ratio with HAC inference.
pub fn sharpe2(model: &FactorModel, spec: HacSpec) -> Result<SharpeEstimate> {
    let (t, k) = model.returns.shape();
    if t <= k + 2 {
        return Err(Error::InsufficientData(format!(
            "need T > K+2, got T={t}, K={k}"
        )));
    }
    let mu = sample_mean(&model.returns);
    let cov = sample_cov(&model.returns);
    let cov_inv = invert_cov(&cov, &model.factor_names)?;
    let lambda = &cov_inv * &mu;
    let sample_sh2 = mu.dot(&lambda);
    let adjusted_sh2 = bias_adjust(sample_sh2, t, k);
    let u = sh2_influence(&model.returns, &mu, &lambda, sample_sh2);
    let var = hac::nw_variance(&u, spec)?;
    let se = var.max(0.0).sqrt();
    let p_value = if se > 0.0 {
        let normal = Normal::new(0.0, 1.0).unwrap();
        1.0 - normal.cdf(adjusted_sh2 / se)
    } else {
        // Degenerate influence series: boundary case, flagged as p = 1.
        1.0
    };
    Ok(SharpeEstimate {
        t,
        k,
        sample_sh2,
        adjusted_sh2,
        tangency_weights: lambda,
        se,
        p_value,
    })
}

/// Multivariate OLS of each column of `y` on a constant and `x`.
/// Returns (intercepts, slopes (ncols_x x ncols_y), residuals T x ncols_y).
pub fn ols_multi(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let t = y.nrows();
    let k = x.ncols();
    let mut design = DMatrix::from_element(t, k + 1, 1.0);
    design.view_mut((0, 1), (t, k)).copy_from(x);
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * y;
    let coef = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("regressor cross-product is singular".into()))?
        .solve(&xty);
    let resid = y - &design * &coef;
    let intercepts = coef.row(0).transpose();
    let slopes = coef.rows(1, k).into_owned();
    Ok((intercepts, slopes, resid))
}

/// Joint heteroskedasticity/HAC-robust test that all intercepts are zero
/// when regressing `g` on a constant and `h`.
#[derive(Debug, Clone)]
pub struct AlphaTest {
    pub alphas: DVector<f64>,
    pub t_stats: DVector<f64>,
    pub wald: f64,
    pub p_value: f64,
}

pub fn alpha_test(g: &DMatrix<f64>, h: &DMatrix<f64>, spec: HacSpec) -> Result<AlphaTest> {
    let t = g.nrows();
    let (dim_g, dim_h) = (g.ncols(), h.ncols());
    if t <= dim_g + dim_h + 2 {
        return Err(Error::InsufficientData(format!(
            "need T > dim(g)+dim(h)+2, got T={t}"
        )));
    }
    let (alphas, _, resid) = ols_multi(g, h)?;

    // Influence of alpha-hat: w_t = (e1' Sxx^{-1} x_t) * eps_t.
    let mut design = DMatrix::from_element(t, dim_h + 1, 1.0);
    design.view_mut((0, 1), (t, dim_h)).copy_from(h);
    let sxx = design.transpose() * &design / t as f64;
    let sxx_inv = sxx
        .cholesky()
        .ok_or_else(|| Error::Singular("benchmark cross-product is singular".into()))?
        .inverse();
    let mut w = DMatrix::zeros(t, dim_g);
    for ti in 0..t {
        let c = sxx_inv.row(0).dot(&design.row(ti));
        for j in 0..dim_g {
            w[(ti, j)] = c * resid[(ti, j)];
        }
    }
    let cov_alpha = hac::nw_hac(&w, spec)?;

    // Zero-variance guard: components spanned exactly contribute nothing.
    let g_scale = (g.iter().map(|v| v * v).sum::<f64>() / (t * dim_g) as f64).max(1e-30);
    let live: Vec<usize> = (0..dim_g)
        .filter(|&j| cov_alpha[(j, j)] > 1e-20 * g_scale)
        .collect();
    if live.is_empty() {
        return Ok(AlphaTest {
            t_stats: DVector::zeros(dim_g),
            alphas,
            wald: 0.0,
            p_value: 1.0,
        });
    }
    let mut t_stats = DVector::zeros(dim_g);
    for j in 0..dim_g {
        let sd = cov_alpha[(j, j)].max(0.0).sqrt();
        t_stats[j] = if sd > 0.0 { alphas[j] / sd } else { 0.0 };
    }
    let a_live = DVector::from_fn(live.len(), |i, _| alphas[live[i]]);
    let cov_live = DMatrix::from_fn(live.len(), live.len(), |i, j| cov_alpha[(live[i], live[j])]);
    let cov_live_inv = cov_live
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("alpha covariance is singular".into()))?
        .inverse();
    let wald = (a_live.transpose() * cov_live_inv * &a_live)[(0, 0)];
    let chi2 = statrs::distribution::ChiSquared::new(live.len() as f64).unwrap();
    let p_value = 1.0 - chi2.cdf(wald.max(0.0));
    Ok(AlphaTest {
        alphas,
        t_stats,
        wald,
        p_value,
    })
}

/// Pairwise model comparison outcome.
#[derive(Debug, Clone)]
pub struct ModelComparisonResult {
    pub model_a: String,
    pub model_b: String,
    /// "sh2" or "r2".
    pub metric: String,
    /// Row-minus-column difference (model A minus model B).
    pub difference: f64,
    pub p_value: f64,
    pub nested: bool,
}

fn is_subset(a: &[String], b: &[String]) -> bool {
    a.iter().all(|n| b.contains(n))
}

/// Difference in bias-adjusted squared Sharpe ratios between two models.
///
/// Nested pairs delegate the p-value to the alpha test on the extra
/// factors; nonnested pairs use the HAC variance of the influence
/// difference series.
pub fn sh2_diff_test(a: &FactorModel, b: &FactorModel, spec: HacSpec) -> Result<ModelComparisonResult> {
    let est_a = sharpe2(a, spec)?;
    let est_b = sharpe2(b, spec)?;
    let difference = est_a.adjusted_sh2 - est_b.adjusted_sh2;

    let a_in_b = is_subset(&a.factor_names, &b.factor_names);
    let b_in_a = is_subset(&b.factor_names, &a.factor_names);
    if a_in_b && b_in_a {
        return Ok(ModelComparisonResult {
            model_a: a.name.clone(),
            model_b: b.name.clone(),
            metric: "sh2".into(),
            difference: 0.0,
            p_value: 1.0,
            nested: true,
        });
    }
    let (nested, p_value) = if a_in_b || b_in_a {
        let (small, large) = if a_in_b { (a, b) } else { (b, a) };
        let extra: Vec<String> = large
            .factor_names
            .iter()
            .filter(|n| !small.factor_names.contains(n))
            .cloned()
            .collect();
        let g = large.columns(&extra);
        let h = small.returns.clone();
        (true, alpha_test(&g, &h, spec)?.p_value)
    } else {
        let mu_a = sample_mean(&a.returns);
        let mu_b = sample_mean(&b.returns);
        let u_a = sh2_influence(&a.returns, &mu_a, &est_a.tangency_weights, est_a.sample_sh2);
        let u_b = sh2_influence(&b.returns, &mu_b, &est_b.tangency_weights, est_b.sample_sh2);
        let d: Vec<f64> = u_a.iter().zip(&u_b).map(|(x, y)| x - y).collect();
        let var = hac::nw_variance(&d, spec)?;
        if var <= 1e-24 {
            (false, 1.0)
        } else {
            let z = difference / var.sqrt();
            let normal = Normal::new(0.0, 1.0).unwrap();
            (false, 2.0 * (1.0 - normal.cdf(z.abs())))
        }
    };
    Ok(ModelComparisonResult {
        model_a: a.name.clone(),
        model_b: b.name.clone(),
        metric: "sh2".into(),
        difference,
        p_value,
        nested,
    })
}

/// Multiple nonnested comparison: p-value for the null that the benchmark
/// is not dominated, i.e. `max_j (sh2_j - sh2_bench) <= 0`, via a
/// stationary-bootstrap max statistic over the joint influence series.
pub fn multi_model_test(
    candidates: &[FactorModel],
    benchmark: &FactorModel,
    spec: HacSpec,
    expected_block: f64,
    replications: usize,
    seed: u64,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::config("need at least one candidate model"));
    }
    bootstrap::validate(replications, expected_block.max(1.0) as usize)?;
    let t = benchmark.returns.nrows();
    let est_b = sharpe2(benchmark, spec)?;
    let mu_b = sample_mean(&benchmark.returns);
    let u_b = sh2_influence(&benchmark.returns, &mu_b, &est_b.tangency_weights, est_b.sample_sh2);

    let mut deltas = Vec::with_capacity(candidates.len());
    let mut d_series = DMatrix::zeros(t, candidates.len());
    for (j, cand) in candidates.iter().enumerate() {
        let est = sharpe2(cand, spec)?;
        deltas.push(est.adjusted_sh2 - est_b.adjusted_sh2);
        let mu = sample_mean(&cand.returns);
        let u = sh2_influence(&cand.returns, &mu, &est.tangency_weights, est.sample_sh2);
        for ti in 0..t {
            d_series[(ti, j)] = u[ti] - u_b[ti];
        }
    }
    let centers: Vec<f64> = (0..candidates.len())
        .map(|j| d_series.column(j).mean())
        .collect();
    let observed = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * (t as f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..replications {
        let idx = bootstrap::stationary_indices(t, expected_block, &mut rng);
        let mut max_star = f64::NEG_INFINITY;
        for j in 0..candidates.len() {
            let mean_star: f64 = idx.iter().map(|&i| d_series[(i, j)]).sum::<f64>() / t as f64;
            max_star = max_star.max((mean_star - centers[j]) * (t as f64).sqrt());
        }
        if max_star >= observed {
            exceed += 1;
        }
    }
    Ok(exceed as f64 / replications as f64)
}

/// Delete-one-month jackknife bias correction for a traded factor set:
/// `T * sh2 - (T-1) * mean(sh2_{(-t)})`.
pub fn jackknife_sh2_traded(returns: &DMatrix<f64>) -> Result<f64> {
    let (t, k) = returns.shape();
    if t <= k + 3 {
        return Err(Error::InsufficientData("too few months for jackknife".into()));
    }
    let full = raw_sh2(returns)?;
    let mut acc = 0.0;
    for drop in 0..t {
        let sub = delete_row(returns, drop);
        acc += raw_sh2(&sub).map_err(|_| {
            Error::Singular(format!("subsample without month index {drop} is singular"))
        })?;
    }
    Ok(t as f64 * full - (t as f64 - 1.0) * (acc / t as f64))
}

/// Jackknife-adjusted squared Sharpe ratio for mimicking portfolios:
/// weights are re-estimated on every delete-one subsample.
pub fn jackknife_sh2_mimicking(nontraded: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<f64> {
    let t = nontraded.nrows();
    if t != basis.nrows() {
        return Err(Error::data("nontraded and basis series length mismatch"));
    }
    let full = raw_sh2(&mimicking_returns(nontraded, basis)?)?;
    let mut acc = 0.0;
    for drop in 0..t {
        let g_sub = delete_row(nontraded, drop);
        let r_sub = delete_row(basis, drop);
        let m_sub = mimicking_returns(&g_sub, &r_sub).map_err(|_| {
            Error::Singular(format!("subsample without month index {drop} is singular"))
        })?;
        acc += raw_sh2(&m_sub).map_err(|_| {
            Error::Singular(format!("subsample without month index {drop} is singular"))
        })?;
    }
    Ok(t as f64 * full - (t as f64 - 1.0) * (acc / t as f64))
}

/// Mimicking returns `R w` for each nontraded column (intercept excluded).
pub fn mimicking_returns(nontraded: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (_, slopes, _) = ols_multi(nontraded, basis)?;
    Ok(basis * slopes)
}

fn raw_sh2(returns: &DMatrix<f64>) -> Result<f64> {
    let mu = sample_mean(returns);
    let cov = sample_cov(returns);
    let names: Vec<String> = (0..returns.ncols()).map(|i| format!("f{i}")).collect();
    let inv = invert_cov(&cov, &names)?;
    Ok(mu.dot(&(inv * &mu)))
}

fn delete_row(m: &DMatrix<f64>, row: usize) -> DMatrix<f64> {
    m.clone().remove_row(row)
}

/// Joint slope F-test for a mimicking-portfolio projection.
pub fn slope_f_test(g: &DVector<f64>, basis: &DMatrix<f64>) -> Result<(f64, f64, f64)> {
    let t = g.len();
    let n = basis.ncols();
    if t < n + 2 {
        return Err(Error::InsufficientData(
            "mimicking projection needs T >= N + 2".into(),
        ));
    }
    let y = DMatrix::from_column_slice(t, 1, g.as_slice());
    let (_, _, resid) = ols_multi(&y, basis)?;
    let gbar = g.mean();
    let tss: f64 = g.iter().map(|v| (v - gbar).powi(2)).sum();
    let rss: f64 = resid.iter().map(|v| v * v).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let df2 = (t - n - 1) as f64;
    if rss <= 1e-24 * tss.max(1.0) {
        return Ok((r2, f64::INFINITY, 0.0));
    }
    let f = (tss - rss) / n as f64 / (rss / df2);
    let dist = FisherSnedecor::new(n as f64, df2).unwrap();
    Ok((r2, f, 1.0 - dist.cdf(f)))
}
