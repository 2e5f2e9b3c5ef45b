//! Two-pass cross-sectional regressions with misspecification-robust
//! inference, R-squared tests, the mean-variance frontier, and a rank
//! diagnostic for the second-pass design.
//!
//! First pass: time-series moments give betas `B = C V_f^{-1}` (or the
//! covariances `C` directly). Second pass:
//!
//! ```text
//! gamma = (X' W X)^{-1} X' W mu_R,   X = [1_N, B]  (or [1_N, C])
//! R^2   = 1 - (e' W e) / (ebar' W ebar)
//! ```
//!
//! with `W = I` (OLS) or `V_R^{-1}` (GLS). Standard errors come from an
//! exactly identified stacked-moment sandwich: the moment vector stacks
//! factor means, factor second moments, asset means, cross second moments
//! (plus asset second moments under GLS) and the second-pass normal
//! equations. The correct-specification variant drops every Jacobian term
//! that multiplies the pricing errors; the robust variant keeps them all.

use crate::error::Error;
use crate::stats::hac::{self, HacSpec};
use crate::stats::sharpe::{self, FactorModel, ModelComparisonResult};
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

/// Second-pass weighting matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Ols,
    Gls,
}

/// Whether the second-pass regressors are multivariate betas or
/// covariances; the two give identical pricing errors and fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Beta,
    Covariance,
}

/// One cross-sectional model: factor series plus estimation choices.
#[derive(Debug, Clone)]
pub struct CsrModelSpec {
    pub name: String,
    /// T x K factor series aligned to the portfolio return rows.
    pub factors: DMatrix<f64>,
    pub weighting: Weighting,
    pub parameterization: Parameterization,
    pub hac: HacSpec,
    /// Monte Carlo draws for weighted chi-squared p-values.
    pub mc_draws: usize,
    pub mc_seed: u64,
}

impl CsrModelSpec {
    pub fn new(name: &str, factors: DMatrix<f64>, weighting: Weighting, parameterization: Parameterization) -> Self {
        CsrModelSpec {
            name: name.to_string(),
            factors,
            weighting,
            parameterization,
            hac: HacSpec::default(),
            mc_draws: 100_000,
            mc_seed: 0x5eed,
        }
    }
}

/// Two-pass estimation output. `estimates[0]` is the zero-beta rate.
#[derive(Debug, Clone)]
pub struct CsrResult {
    pub name: String,
    pub weighting: Weighting,
    pub parameterization: Parameterization,
    /// Zero-beta rate followed by the K prices of risk.
    pub estimates: DVector<f64>,
    /// Correct-specification t-statistics.
    pub t_c: DVector<f64>,
    /// Misspecification-robust t-statistics.
    pub t_m: DVector<f64>,
    pub pricing_errors: DVector<f64>,
    pub r2: f64,
    /// Monte Carlo p-value for the null R^2 = 1.
    pub p_r2_one: f64,
    /// Robust covariance of the estimates.
    pub estimate_cov_m: DMatrix<f64>,
    pub estimate_cov_c: DMatrix<f64>,
    /// Cross-sectional dispersion ebar' W ebar.
    pub q: f64,
    /// Second-pass design [1_N, B] or [1_N, C].
    pub x: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// Factor covariance with the 1/T divisor.
    pub factor_cov: DMatrix<f64>,
    /// Influence series of the sample R^2 (for model comparison).
    pub r2_influence: Vec<f64>,
    pub t: usize,
    pub months_used: usize,
    /// Set when the GLS weighting needed an eigenvalue floor.
    pub conditioning_warning: bool,
    /// Factor series retained for nesting checks in comparisons.
    pub factors: DMatrix<f64>,
    /// Complete-case return matrix retained for nested comparisons.
    pub returns: DMatrix<f64>,
    pub hac: HacSpec,
    pub mc_draws: usize,
    pub mc_seed: u64,
}

struct SampleMoments {
    mu_f: DVector<f64>,
    s_f: DMatrix<f64>,
    mu_r: DVector<f64>,
    d: DMatrix<f64>,
    s_r: DMatrix<f64>,
    v_f: DMatrix<f64>,
    v_r: DMatrix<f64>,
    c: DMatrix<f64>,
}

fn sample_moments(r: &DMatrix<f64>, f: &DMatrix<f64>) -> SampleMoments {
    let t = r.nrows() as f64;
    let mu_f = f.row_mean().transpose();
    let mu_r = r.row_mean().transpose();
    let s_f = f.transpose() * f / t;
    let s_r = r.transpose() * r / t;
    let d = r.transpose() * f / t;
    let v_f = &s_f - &mu_f * mu_f.transpose();
    let v_r = &s_r - &mu_r * mu_r.transpose();
    let c = &d - &mu_r * mu_f.transpose();
    SampleMoments {
        mu_f,
        s_f,
        mu_r,
        d,
        s_r,
        v_f,
        v_r,
        c,
    }
}

/// Inverse with an eigenvalue floor at `1e-10 * trace / n`; the flag
/// reports whether the floor engaged.
fn floored_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let floor = 1e-10 * eig.eigenvalues.iter().sum::<f64>().abs().max(1e-300) / n as f64;
    let mut floored = false;
    let mut inv_vals = DVector::zeros(n);
    for i in 0..n {
        let v = eig.eigenvalues[i];
        if v < floor {
            floored = true;
            inv_vals[i] = 1.0 / floor;
        } else {
            inv_vals[i] = 1.0 / v;
        }
    }
    let q = &eig.eigenvectors;
    Ok((q * DMatrix::from_diagonal(&inv_vals) * q.transpose(), floored))
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

fn vech_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            out.push((i, j));
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum Dir {
    MuF(usize),
    SF(usize, usize),
    MuR(usize),
    D(usize, usize),
    SR(usize, usize),
}

fn aux_directions(n: usize, k: usize, gls: bool) -> Vec<Dir> {
    let mut dirs = Vec::new();
    for i in 0..k {
        dirs.push(Dir::MuF(i));
    }
    for &(i, j) in &vech_pairs(k) {
        dirs.push(Dir::SF(i, j));
    }
    for i in 0..n {
        dirs.push(Dir::MuR(i));
    }
    for j in 0..k {
        for i in 0..n {
            dirs.push(Dir::D(i, j));
        }
    }
    if gls {
        for &(i, j) in &vech_pairs(n) {
            dirs.push(Dir::SR(i, j));
        }
    }
    dirs
}

struct DirEffect {
    /// Derivative of the full design X in this direction.
    d_x: DMatrix<f64>,
    d_w: Option<DMatrix<f64>>,
    d_mu_r: DVector<f64>,
}

struct EstimationContext {
    mom: SampleMoments,
    v_f_inv: DMatrix<f64>,
    b: DMatrix<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    gls: bool,
    param: Parameterization,
}

fn direction_effect(dir: Dir, ctx: &EstimationContext) -> DirEffect {
    let n = ctx.x.nrows();
    let k = ctx.mom.mu_f.len();
    let mut d_mu_f = DVector::zeros(k);
    let mut d_s_f = DMatrix::zeros(k, k);
    let mut d_mu_r = DVector::zeros(n);
    let mut d_d = DMatrix::zeros(n, k);
    let mut d_s_r = DMatrix::zeros(n, n);
    match dir {
        Dir::MuF(i) => d_mu_f[i] = 1.0,
        Dir::SF(i, j) => {
            d_s_f[(i, j)] = 1.0;
            d_s_f[(j, i)] = 1.0;
        }
        Dir::MuR(i) => d_mu_r[i] = 1.0,
        Dir::D(i, j) => d_d[(i, j)] = 1.0,
        Dir::SR(i, j) => {
            d_s_r[(i, j)] = 1.0;
            d_s_r[(j, i)] = 1.0;
        }
    }
    let d_c = &d_d - &d_mu_r * ctx.mom.mu_f.transpose() - &ctx.mom.mu_r * d_mu_f.transpose();
    let d_cols = match ctx.param {
        Parameterization::Covariance => d_c,
        Parameterization::Beta => {
            let d_v_f = &d_s_f - &d_mu_f * ctx.mom.mu_f.transpose() - &ctx.mom.mu_f * d_mu_f.transpose();
            (&d_c - &ctx.b * d_v_f) * &ctx.v_f_inv
        }
    };
    let mut d_x = DMatrix::zeros(n, k + 1);
    d_x.view_mut((0, 1), (n, k)).copy_from(&d_cols);
    let d_w = if ctx.gls {
        let d_v_r = &d_s_r - &d_mu_r * ctx.mom.mu_r.transpose() - &ctx.mom.mu_r * d_mu_r.transpose();
        Some(-(&ctx.w * d_v_r * &ctx.w))
    } else {
        None
    };
    DirEffect { d_x, d_w, d_mu_r }
}

/// Monte Carlo p-value for `P(sum_i w_i chi2_1 >= statistic)`.
pub fn weighted_chi2_pvalue(weights: &[f64], statistic: f64, draws: usize, seed: u64) -> f64 {
    if weights.is_empty() {
        return if statistic <= 0.0 { 1.0 } else { 0.0 };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..draws {
        let mut s = 0.0;
        for &w in weights {
            let z: f64 = StandardNormal.sample(&mut rng);
            s += w * z * z;
        }
        if s >= statistic {
            exceed += 1;
        }
    }
    exceed as f64 / draws as f64
}

/// Two-pass cross-sectional regression with robust inference.
///
/// `r` holds the portfolio excess returns (rows are months). Rows with a
/// missing value in either the returns or the factors are dropped; the
/// count of complete months is reported.
pub fn two_pass(r: &DMatrix<f64>, spec: &CsrModelSpec) -> Result<CsrResult> {
    if r.nrows() != spec.factors.nrows() {
        return Err(Error::data("factor and return series length mismatch"));
    }
    let keep: Vec<usize> = (0..r.nrows())
        .filter(|&t| {
            r.row(t).iter().all(|v| v.is_finite()) && spec.factors.row(t).iter().all(|v| v.is_finite())
        })
        .collect();
    let r = DMatrix::from_fn(keep.len(), r.ncols(), |t, i| r[(keep[t], i)]);
    let f = DMatrix::from_fn(keep.len(), spec.factors.ncols(), |t, i| spec.factors[(keep[t], i)]);

    let (t, n) = r.shape();
    let k = f.ncols();
    if n < k + 2 {
        return Err(Error::InsufficientData(format!(
            "need at least K+2 test assets, got N={n}, K={k}"
        )));
    }
    let gls = spec.weighting == Weighting::Gls;
    let min_t = if gls { n + k + 2 } else { k + 2 };
    if t <= min_t {
        return Err(Error::InsufficientData(format!(
            "need T > {min_t} complete months, got {t}"
        )));
    }

    let mom = sample_moments(&r, &f);
    let v_f_inv = mom
        .v_f
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("factor covariance is singular".into()))?
        .inverse();
    let b = &mom.c * &v_f_inv;
    let mut x = DMatrix::from_element(n, k + 1, 1.0);
    match spec.parameterization {
        Parameterization::Beta => x.view_mut((0, 1), (n, k)).copy_from(&b),
        Parameterization::Covariance => x.view_mut((0, 1), (n, k)).copy_from(&mom.c),
    }
    let (w, conditioning_warning) = if gls {
        floored_inverse(&mom.v_r)?
    } else {
        (DMatrix::identity(n, n), false)
    };

    let xtw = x.transpose() * &w;
    let xtwx = &xtw * &x;
    let gamma = xtwx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Identification("X'WX is singular; betas do not identify the premia".into()))?
        .solve(&(&xtw * &mom.mu_r));
    let e = &mom.mu_r - &x * &gamma;

    // Cross-sectional fit.
    let ones = DVector::from_element(n, 1.0);
    let w_one = &w * &ones;
    let a0 = ones.dot(&w_one);
    let mbar = mom.mu_r.dot(&w_one) / a0;
    let ebar = &mom.mu_r - &ones * mbar;
    let q = (ebar.transpose() * &w * &ebar)[(0, 0)];
    let ewe = (e.transpose() * &w * &e)[(0, 0)];
    let r2 = if q > 0.0 { 1.0 - ewe / q } else { 1.0 };

    let ctx = EstimationContext {
        mom,
        v_f_inv,
        b,
        x: x.clone(),
        w: w.clone(),
        gls,
        param: spec.parameterization,
    };

    // Stacked moment series at the estimate.
    let kv = k * (k + 1) / 2;
    let nv = n * (n + 1) / 2;
    let m_aux = k + kv + n + n * k + if gls { nv } else { 0 };
    let m_dim = m_aux + k + 1;
    let f_pairs = vech_pairs(k);
    let r_pairs = vech_pairs(n);
    let mut g_series = DMatrix::zeros(t, m_dim);
    for ti in 0..t {
        let ft = f.row(ti).transpose();
        let rt = r.row(ti).transpose();
        let mut col = 0;
        for i in 0..k {
            g_series[(ti, col)] = ft[i] - ctx.mom.mu_f[i];
            col += 1;
        }
        for &(i, j) in &f_pairs {
            g_series[(ti, col)] = ft[i] * ft[j] - ctx.mom.s_f[(i, j)];
            col += 1;
        }
        for i in 0..n {
            g_series[(ti, col)] = rt[i] - ctx.mom.mu_r[i];
            col += 1;
        }
        for j in 0..k {
            for i in 0..n {
                g_series[(ti, col)] = rt[i] * ft[j] - ctx.mom.d[(i, j)];
                col += 1;
            }
        }
        if gls {
            for &(i, j) in &r_pairs {
                g_series[(ti, col)] = rt[i] * rt[j] - ctx.mom.s_r[(i, j)];
                col += 1;
            }
        }
        let h = &xtw * (&rt - &x * &gamma);
        for i in 0..=k {
            g_series[(ti, col)] = h[i];
            col += 1;
        }
    }
    let s = hac::long_run_cov(&g_series, spec.hac)?;

    // Jacobians: full (robust) and with pricing-error terms zeroed.
    let dirs = aux_directions(n, k, gls);
    debug_assert_eq!(dirs.len(), m_aux);
    let we = &w * &e;
    let webar = &w * &ebar;
    let mut g_m = DMatrix::zeros(m_dim, m_dim);
    let mut g_c = DMatrix::zeros(m_dim, m_dim);
    for i in 0..m_aux {
        g_m[(i, i)] = -1.0;
        g_c[(i, i)] = -1.0;
    }
    // A = d(ehat)/d(theta) for the R^2 = 1 test, and the R^2 gradient.
    let mut a_mat = DMatrix::zeros(n, m_dim);
    let mut r2_grad = DVector::zeros(m_dim);
    for (j, &dir) in dirs.iter().enumerate() {
        let eff = direction_effect(dir, &ctx);
        let dx_gamma = &eff.d_x * &gamma;
        let mut dh_c = -(&xtw * &dx_gamma);
        let dh_m = if let Some(ref dw) = eff.d_w {
            &eff.d_x.transpose() * &we + x.transpose() * (dw * &e) + &dh_c
        } else {
            &eff.d_x.transpose() * &we + &dh_c
        };
        for i in 0..=k {
            g_m[(m_aux + i, j)] = dh_m[i];
            g_c[(m_aux + i, j)] = dh_c[i];
        }
        dh_c.fill(0.0);

        let de = &eff.d_mu_r - &dx_gamma;
        for i in 0..n {
            a_mat[(i, j)] = de[i];
        }

        // Gradient of R^2 = 1 - ewe/q with respect to this direction.
        if q > 0.0 {
            let (d_ewe, d_q) = match eff.d_w {
                None => {
                    let dmbar = w_one.dot(&eff.d_mu_r) / a0;
                    let debar = &eff.d_mu_r - &ones * dmbar;
                    (2.0 * we.dot(&de), 2.0 * webar.dot(&debar))
                }
                Some(ref dw) => {
                    let dw_one = dw * &ones;
                    let da0 = ones.dot(&dw_one);
                    let dmbar = (ctx.mom.mu_r.dot(&dw_one) + w_one.dot(&eff.d_mu_r)) / a0
                        - ctx.mom.mu_r.dot(&w_one) * da0 / (a0 * a0);
                    let debar = &eff.d_mu_r - &ones * dmbar;
                    let d_ewe = 2.0 * we.dot(&de) + (e.transpose() * dw * &e)[(0, 0)];
                    let d_q = 2.0 * webar.dot(&debar) + (ebar.transpose() * dw * &ebar)[(0, 0)];
                    (d_ewe, d_q)
                }
            };
            r2_grad[j] = -d_ewe / q + ewe * d_q / (q * q);
        }
    }
    let xtwx_neg = -&xtwx;
    for i in 0..=k {
        for j in 0..=k {
            g_m[(m_aux + i, m_aux + j)] = xtwx_neg[(i, j)];
            g_c[(m_aux + i, m_aux + j)] = xtwx_neg[(i, j)];
        }
        for jj in 0..n {
            // d(ehat)/d(gamma_i) = -x_{., i}
            a_mat[(jj, m_aux + i)] = -x[(jj, i)];
        }
    }

    let g_m_inv = g_m
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("stacked-moment Jacobian is singular".into()))?;
    let g_c_inv = g_c
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("stacked-moment Jacobian is singular".into()))?;
    let avar_m = &g_m_inv * &s * g_m_inv.transpose();
    let avar_c = &g_c_inv * &s * g_c_inv.transpose();
    let cov_m = avar_m.view((m_aux, m_aux), (k + 1, k + 1)) / t as f64;
    let cov_c = avar_c.view((m_aux, m_aux), (k + 1, k + 1)) / t as f64;
    let mut t_m = DVector::zeros(k + 1);
    let mut t_c = DVector::zeros(k + 1);
    for i in 0..=k {
        let sd_m = cov_m[(i, i)].max(0.0).sqrt();
        let sd_c = cov_c[(i, i)].max(0.0).sqrt();
        t_m[i] = if sd_m > 0.0 { gamma[i] / sd_m } else { 0.0 };
        t_c[i] = if sd_c > 0.0 { gamma[i] / sd_c } else { 0.0 };
    }

    // R^2 = 1 test: T e'We against a weighted chi-squared null whose
    // weights are the nonzero eigenvalues of the covariance of sqrt(T) e
    // in the W metric.
    let avar_e = &a_mat * &avar_m * a_mat.transpose();
    let w_half = symmetric_sqrt(&w);
    let projected = &w_half * &avar_e * &w_half;
    let eigvals = projected.symmetric_eigenvalues();
    let max_eig = eigvals.iter().cloned().fold(0.0f64, f64::max);
    let weights: Vec<f64> = eigvals
        .iter()
        .cloned()
        .filter(|&v| v > 1e-8 * max_eig.max(1e-300))
        .collect();
    let stat = t as f64 * ewe;
    let p_r2_one = weighted_chi2_pvalue(&weights, stat, spec.mc_draws, spec.mc_seed);

    // Influence series of the sample R^2: -grad' G^{-1} g_t.
    let v = g_m_inv.transpose() * &r2_grad;
    let r2_influence: Vec<f64> = (0..t)
        .map(|ti| -g_series.row(ti).transpose().dot(&v))
        .collect();

    Ok(CsrResult {
        name: spec.name.clone(),
        weighting: spec.weighting,
        parameterization: spec.parameterization,
        estimates: gamma,
        t_c,
        t_m,
        pricing_errors: e,
        r2,
        p_r2_one,
        estimate_cov_m: cov_m.into_owned(),
        estimate_cov_c: cov_c.into_owned(),
        q,
        x,
        w,
        factor_cov: ctx.mom.v_f.clone(),
        r2_influence,
        t,
        months_used: t,
        conditioning_warning,
        factors: f,
        returns: r,
        hac: spec.hac,
        mc_draws: spec.mc_draws,
        mc_seed: spec.mc_seed,
    })
}

/// Difference in cross-sectional R^2 between two models on the same
/// portfolios and weighting. Nested pairs use a weighted chi-squared test
/// that the extra factors contribute nothing; nonnested pairs use the HAC
/// variance of the influence difference of the two R^2s.
pub fn r2_diff_test(a: &CsrResult, b: &CsrResult, nested: bool, hac_spec: HacSpec) -> Result<ModelComparisonResult> {
    if a.x.nrows() != b.x.nrows() || a.t != b.t {
        return Err(Error::data("models were estimated on different test assets"));
    }
    if a.weighting != b.weighting {
        return Err(Error::config("R^2 comparison requires the same weighting"));
    }
    let difference = a.r2 - b.r2;
    if nested {
        // Orient so `large` strictly contains `small`.
        let (large, small) = if a.factors.ncols() >= b.factors.ncols() {
            (a, b)
        } else {
            (b, a)
        };
        // The exact R^2-difference decomposition lives in covariance
        // coordinates, where dropping a factor deletes a design column.
        let large_cov;
        let large = if large.parameterization == Parameterization::Covariance {
            large
        } else {
            let mut respec = CsrModelSpec::new(
                &large.name,
                large.factors.clone(),
                large.weighting,
                Parameterization::Covariance,
            );
            respec.hac = large.hac;
            respec.mc_draws = large.mc_draws;
            respec.mc_seed = large.mc_seed;
            large_cov = two_pass(&large.returns, &respec)?;
            &large_cov
        };
        let matched: Vec<usize> = (0..small.factors.ncols())
            .map(|j| {
                (0..large.factors.ncols())
                    .find(|&i| {
                        (0..large.factors.nrows())
                            .all(|t| (large.factors[(t, i)] - small.factors[(t, j)]).abs() < 1e-12)
                    })
                    .ok_or_else(|| Error::config("models declared nested but factors do not overlap"))
            })
            .collect::<Result<_>>()?;
        let extra: Vec<usize> = (0..large.factors.ncols()).filter(|i| !matched.contains(i)).collect();
        if extra.is_empty() {
            return Ok(ModelComparisonResult {
                model_a: a.name.clone(),
                model_b: b.name.clone(),
                metric: "r2".into(),
                difference,
                p_value: 1.0,
                nested: true,
            });
        }
        let n = large.x.nrows();
        // Design columns: intercept + matched vs the extra ones.
        let x_base = {
            let mut cols = vec![0usize];
            cols.extend(matched.iter().map(|&i| i + 1));
            DMatrix::from_fn(n, cols.len(), |r_i, c| large.x[(r_i, cols[c])])
        };
        let x_extra = DMatrix::from_fn(n, extra.len(), |r_i, c| large.x[(r_i, extra[c] + 1)]);
        let w = &large.w;
        let xbw = x_base.transpose() * w;
        let proj = (&xbw * &x_base)
            .cholesky()
            .ok_or_else(|| Error::Identification("base design is singular".into()))?
            .solve(&(&xbw * &x_extra));
        let x_tilde = &x_extra - &x_base * proj;
        let m = x_tilde.transpose() * w * &x_tilde;
        let gamma_e = DVector::from_fn(extra.len(), |i, _| large.estimates[extra[i] + 1]);
        let sigma_e = DMatrix::from_fn(extra.len(), extra.len(), |i, j| {
            large.t as f64 * large.estimate_cov_m[(extra[i] + 1, extra[j] + 1)]
        });
        let stat = large.t as f64 * (gamma_e.transpose() * &m * &gamma_e)[(0, 0)] / large.q;
        let s_half = symmetric_sqrt(&sigma_e);
        let weights_mat = &s_half * &m * &s_half / large.q;
        let eigvals = weights_mat.symmetric_eigenvalues();
        let weights: Vec<f64> = eigvals.iter().cloned().filter(|&v| v > 0.0).collect();
        let p_value = weighted_chi2_pvalue(&weights, stat, 100_000, 0x5eed ^ 0x9e37);
        Ok(ModelComparisonResult {
            model_a: a.name.clone(),
            model_b: b.name.clone(),
            metric: "r2".into(),
            difference,
            p_value,
            nested: true,
        })
    } else {
        let d: Vec<f64> = a
            .r2_influence
            .iter()
            .zip(&b.r2_influence)
            .map(|(x, y)| x - y)
            .collect();
        let var = hac::nw_variance(&d, hac_spec)?;
        let p_value = if var <= 1e-24 {
            1.0
        } else {
            let z = difference / var.sqrt();
            let normal = Normal::new(0.0, 1.0).unwrap();
            2.0 * (1.0 - normal.cdf(z.abs()))
        };
        Ok(ModelComparisonResult {
            model_a: a.name.clone(),
            model_b: b.name.clone(),
            metric: "r2".into(),
            difference,
            p_value,
            nested: false,
        })
    }
}

/// A point on the mean-variance frontier of the test assets.
#[derive(Debug, Clone, Copy)]
pub struct FrontierPoint {
    pub sigma: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct FrontierCurve {
    pub points: Vec<FrontierPoint>,
    /// Maximum Sharpe ratio of the test assets.
    pub asset_tangency: f64,
    /// Per-model maximum Sharpe ratio of the factor set.
    pub model_tangencies: Vec<(String, f64)>,
    /// (sigma, mean) of the global minimum-variance portfolio.
    pub min_variance: FrontierPoint,
}

/// Mean-variance frontier of the portfolio excess returns plus tangency
/// Sharpe ratios for the assets and each candidate factor set.
pub fn frontier(r: &DMatrix<f64>, models: &[FactorModel], grid_points: usize) -> Result<FrontierCurve> {
    if grid_points < 2 {
        return Err(Error::config("frontier grid needs at least 2 points"));
    }
    let mu = sharpe::sample_mean(r);
    let v = sharpe::sample_cov(r);
    let chol = v
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("asset covariance is singular".into()))?;
    let v_inv_mu = chol.solve(&mu);
    let ones = DVector::from_element(r.ncols(), 1.0);
    let v_inv_one = chol.solve(&ones);
    let a = ones.dot(&v_inv_one);
    let bq = ones.dot(&v_inv_mu);
    let c = mu.dot(&v_inv_mu);
    let delta = a * c - bq * bq;
    if delta <= 0.0 || a <= 0.0 {
        return Err(Error::Numerical("degenerate efficient-set constants".into()));
    }
    let asset_tangency = c.max(0.0).sqrt();

    let (lo, hi) = mu.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &m| {
        (l.min(m), h.max(m))
    });
    let span = (hi - lo).max(1e-6);
    let start = lo - 0.5 * span;
    let step = (hi + 0.5 * span - start) / (grid_points - 1) as f64;
    let points: Vec<FrontierPoint> = (0..grid_points)
        .map(|i| {
            let m = start + step * i as f64;
            let var = (a * m * m - 2.0 * bq * m + c) / delta;
            FrontierPoint {
                sigma: var.max(0.0).sqrt(),
                mean: m,
            }
        })
        .collect();
    let min_variance = FrontierPoint {
        sigma: (1.0 / a).sqrt(),
        mean: bq / a,
    };

    let mut model_tangencies = Vec::with_capacity(models.len());
    for model in models {
        let fmu = sharpe::sample_mean(&model.returns);
        let fv = sharpe::sample_cov(&model.returns);
        let fchol = fv.clone().cholesky().ok_or_else(|| {
            Error::Singular(format!("factor covariance singular for model {}", model.name))
        })?;
        let theta2 = fmu.dot(&fchol.solve(&fmu));
        model_tangencies.push((model.name.clone(), theta2.max(0.0).sqrt()));
    }
    Ok(FrontierCurve {
        points,
        asset_tangency,
        model_tangencies,
        min_variance,
    })
}

/// Condition metrics of the second-pass design matrix.
#[derive(Debug, Clone)]
pub struct RankDiagnostic {
    pub smallest_sv: f64,
    pub largest_sv: f64,
    pub condition: f64,
    pub weak: bool,
}

/// Smallest singular value and condition number of `X = [1_N, B]`, with a
/// heuristic weak-identification flag at `smallest < threshold * largest`.
pub fn rank_diagnostic(x: &DMatrix<f64>, threshold: f64) -> Result<RankDiagnostic> {
    if x.nrows() < x.ncols() {
        return Err(Error::InsufficientData(format!(
            "need N >= K+1 test assets, got N={}, K+1={}",
            x.nrows(),
            x.ncols()
        )));
    }
    let sv = x.clone().svd(false, false).singular_values;
    let largest = sv.iter().cloned().fold(0.0f64, f64::max);
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    Ok(RankDiagnostic {
        smallest_sv: smallest,
        largest_sv: largest,
        condition,
        weak: smallest < threshold * largest,
    })
}
