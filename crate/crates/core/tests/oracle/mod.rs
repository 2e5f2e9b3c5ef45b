#![allow(dead_code)]
//! Brute-force oracle for the two-pass cross-sectional machinery: the
//! point estimates come from explicit matrix formulas coded from scratch,
//! and the sandwich covariance uses a numeric five-point Jacobian of the
//! stacked moment conditions instead of the library's derivatives.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn vech_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..n {
        for i in j..n {
            out.push((i, j));
        }
    }
    out
}

pub struct Instance {
    pub r: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub gls: bool,
    pub beta_param: bool,
    pub lags: usize,
}

struct DataMoments {
    mf: DVector<f64>,
    mff: DMatrix<f64>,
    rbar: DVector<f64>,
    mrf: DMatrix<f64>,
    mrr: DMatrix<f64>,
}

fn data_moments(inst: &Instance) -> DataMoments {
    let (t, n) = inst.r.shape();
    let k = inst.f.ncols();
    let tf = t as f64;
    let mut mf = DVector::zeros(k);
    let mut mff = DMatrix::zeros(k, k);
    let mut rbar = DVector::zeros(n);
    let mut mrf = DMatrix::zeros(n, k);
    let mut mrr = DMatrix::zeros(n, n);
    for ti in 0..t {
        for a in 0..k {
            mf[a] += inst.f[(ti, a)] / tf;
            for b in 0..k {
                mff[(a, b)] += inst.f[(ti, a)] * inst.f[(ti, b)] / tf;
            }
        }
        for i in 0..n {
            rbar[i] += inst.r[(ti, i)] / tf;
            for a in 0..k {
                mrf[(i, a)] += inst.r[(ti, i)] * inst.f[(ti, a)] / tf;
            }
            for j in 0..n {
                mrr[(i, j)] += inst.r[(ti, i)] * inst.r[(ti, j)] / tf;
            }
        }
    }
    DataMoments {
        mf,
        mff,
        rbar,
        mrf,
        mrr,
    }
}

struct Theta {
    muf: DVector<f64>,
    sf: DMatrix<f64>,
    mur: DVector<f64>,
    d: DMatrix<f64>,
    sr: DMatrix<f64>,
    gamma: DVector<f64>,
}

fn pack(theta: &Theta, gls: bool) -> DVector<f64> {
    let k = theta.muf.len();
    let n = theta.mur.len();
    let mut v = Vec::new();
    v.extend(theta.muf.iter());
    for &(i, j) in &vech_pairs(k) {
        v.push(theta.sf[(i, j)]);
    }
    v.extend(theta.mur.iter());
    for j in 0..k {
        for i in 0..n {
            v.push(theta.d[(i, j)]);
        }
    }
    if gls {
        for &(i, j) in &vech_pairs(n) {
            v.push(theta.sr[(i, j)]);
        }
    }
    v.extend(theta.gamma.iter());
    DVector::from_vec(v)
}

fn unpack(v: &DVector<f64>, n: usize, k: usize, gls: bool) -> Theta {
    let mut pos = 0;
    let muf = DVector::from_fn(k, |i, _| v[pos + i]);
    pos += k;
    let mut sf = DMatrix::zeros(k, k);
    for &(i, j) in &vech_pairs(k) {
        sf[(i, j)] = v[pos];
        sf[(j, i)] = v[pos];
        pos += 1;
    }
    let mur = DVector::from_fn(n, |i, _| v[pos + i]);
    pos += n;
    let mut d = DMatrix::zeros(n, k);
    for j in 0..k {
        for i in 0..n {
            d[(i, j)] = v[pos];
            pos += 1;
        }
    }
    let mut sr = DMatrix::zeros(n, n);
    if gls {
        for &(i, j) in &vech_pairs(n) {
            sr[(i, j)] = v[pos];
            sr[(j, i)] = v[pos];
            pos += 1;
        }
    }
    let gamma = DVector::from_fn(k + 1, |i, _| v[pos + i]);
    Theta {
        muf,
        sf,
        mur,
        d,
        sr,
        gamma,
    }
}

fn design_and_weight(th: &Theta, beta_param: bool, gls: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = th.mur.len();
    let k = th.muf.len();
    let vf = &th.sf - &th.muf * th.muf.transpose();
    let c = &th.d - &th.mur * th.muf.transpose();
    let cols = if beta_param {
        &c * vf.try_inverse().expect("vf invertible")
    } else {
        c
    };
    let mut x = DMatrix::from_element(n, k + 1, 1.0);
    x.view_mut((0, 1), (n, k)).copy_from(&cols);
    let w = if gls {
        (&th.sr - &th.mur * th.mur.transpose())
            .try_inverse()
            .expect("vr invertible")
    } else {
        DMatrix::identity(n, n)
    };
    (x, w)
}

/// Stacked moment mean as a function of the parameter vector, with the
/// data moments held fixed. `rbar_h` is the return-mean vector fed to the
/// pricing block (the sample mean for the robust variant, fitted means
/// for the correct-specification variant).
fn gbar(v: &DVector<f64>, dm: &DataMoments, rbar_h: &DVector<f64>, beta_param: bool, gls: bool) -> DVector<f64> {
    let n = dm.rbar.len();
    let k = dm.mf.len();
    let th = unpack(v, n, k, gls);
    let mut out = Vec::new();
    for i in 0..k {
        out.push(dm.mf[i] - th.muf[i]);
    }
    for &(i, j) in &vech_pairs(k) {
        out.push(dm.mff[(i, j)] - th.sf[(i, j)]);
    }
    for i in 0..n {
        out.push(dm.rbar[i] - th.mur[i]);
    }
    for j in 0..k {
        for i in 0..n {
            out.push(dm.mrf[(i, j)] - th.d[(i, j)]);
        }
    }
    if gls {
        for &(i, j) in &vech_pairs(n) {
            out.push(dm.mrr[(i, j)] - th.sr[(i, j)]);
        }
    }
    let (x, w) = design_and_weight(&th, beta_param, gls);
    let h = x.transpose() * &w * (rbar_h - &x * &th.gamma);
    out.extend(h.iter());
    DVector::from_vec(out)
}

/// Five-point central-difference Jacobian.
fn numeric_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, at: &DVector<f64>) -> DMatrix<f64> {
    let m = f(at).len();
    let p = at.len();
    let mut jac = DMatrix::zeros(m, p);
    for j in 0..p {
        let h = 2e-4 * at[j].abs().max(1.0);
        let eval = |s: f64| {
            let mut v = at.clone();
            v[j] += s;
            f(&v)
        };
        let col = (eval(-2.0 * h) - eval(-h) * 8.0 + eval(h) * 8.0 - eval(2.0 * h)) / (12.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Textbook Bartlett double-sum long-run covariance of a moment series.
fn brute_force_s(series: &DMatrix<f64>, lags: usize) -> DMatrix<f64> {
    let (t, m) = series.shape();
    let mean = series.row_mean();
    let mut s = DMatrix::zeros(m, m);
    for j in 0..=lags {
        let w = 1.0 - j as f64 / (lags as f64 + 1.0);
        let mut gamma = DMatrix::zeros(m, m);
        for ti in j..t {
            let a = (series.row(ti) - &mean).transpose();
            let b = (series.row(ti - j) - &mean).transpose();
            gamma += &a * b.transpose();
        }
        gamma /= t as f64;
        if j == 0 {
            s += gamma;
        } else {
            s += w * (&gamma + gamma.transpose());
        }
    }
    s
}

pub struct OracleResult {
    pub gamma: DVector<f64>,
    pub t_c: DVector<f64>,
    pub t_m: DVector<f64>,
}

pub fn oracle(inst: &Instance) -> OracleResult {
    let (t, n) = inst.r.shape();
    let k = inst.f.ncols();
    let dm = data_moments(inst);

    // Point estimates from explicit formulas.
    let mut th = Theta {
        muf: dm.mf.clone(),
        sf: dm.mff.clone(),
        mur: dm.rbar.clone(),
        d: dm.mrf.clone(),
        sr: dm.mrr.clone(),
        gamma: DVector::zeros(k + 1),
    };
    let (x, w) = design_and_weight(&th, inst.beta_param, inst.gls);
    let xtw = x.transpose() * &w;
    th.gamma = (&xtw * &x)
        .try_inverse()
        .expect("xtwx invertible")
        * (&xtw * &dm.rbar);
    let theta = pack(&th, inst.gls);

    // Moment series and brute-force HAC weight matrix.
    let m_dim = theta.len();
    let mut series = DMatrix::zeros(t, m_dim);
    for ti in 0..t {
        let ft = inst.f.row(ti).transpose();
        let rt = inst.r.row(ti).transpose();
        let mut row = Vec::with_capacity(m_dim);
        for i in 0..k {
            row.push(ft[i] - th.muf[i]);
        }
        for &(i, j) in &vech_pairs(k) {
            row.push(ft[i] * ft[j] - th.sf[(i, j)]);
        }
        for i in 0..n {
            row.push(rt[i] - th.mur[i]);
        }
        for j in 0..k {
            for i in 0..n {
                row.push(rt[i] * ft[j] - th.d[(i, j)]);
            }
        }
        if inst.gls {
            for &(i, j) in &vech_pairs(n) {
                row.push(rt[i] * rt[j] - th.sr[(i, j)]);
            }
        }
        let h = &xtw * (&rt - &x * &th.gamma);
        row.extend(h.iter());
        for (c, v) in row.into_iter().enumerate() {
            series[(ti, c)] = v;
        }
    }
    let s = brute_force_s(&series, inst.lags);

    // Robust variant: numeric Jacobian with the sample return means.
    let g_m = numeric_jacobian(
        |v| gbar(v, &dm, &dm.rbar, inst.beta_param, inst.gls),
        &theta,
    );
    // Correct-specification variant: fitted means feed the pricing block.
    let fitted = &x * &th.gamma;
    let g_c = numeric_jacobian(
        |v| gbar(v, &dm, &fitted, inst.beta_param, inst.gls),
        &theta,
    );

    let m_aux = m_dim - (k + 1);
    let to_t = |g: &DMatrix<f64>| {
        let ginv = g.clone().try_inverse().expect("jacobian invertible");
        let avar = &ginv * &s * ginv.transpose();
        DVector::from_fn(k + 1, |i, _| {
            let var = avar[(m_aux + i, m_aux + i)] / t as f64;
            th.gamma[i] / var.max(0.0).sqrt()
        })
    };
    OracleResult {
        t_m: to_t(&g_m),
        t_c: to_t(&g_c),
        gamma: th.gamma,
    }
}

pub fn randn(t: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(t, k, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Misspecified instance: per-asset alphas keep pricing errors away from
/// zero so the robust and correct-specification variants genuinely differ.
pub fn misspecified_instance(seed: u64, gls: bool, beta_param: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = 400;
    let n = 6;
    let k = 2;
    let f = randn(t, k, &mut rng).add_scalar(0.3);
    let b = randn(n, k, &mut rng).add_scalar(1.0);
    let alpha = randn(n, 1, &mut rng) * 0.2;
    let noise = randn(t, n, &mut rng) * 0.8;
    let mut r = &f * b.transpose() + noise;
    for ti in 0..t {
        for i in 0..n {
            r[(ti, i)] += alpha[(i, 0)];
        }
    }
    Instance {
        r,
        f,
        gls,
        beta_param,
        lags: 3,
    }
}
