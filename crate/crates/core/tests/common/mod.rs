#![allow(dead_code)]

use fwdgrad::dual::{sq_norm, AdError, Dual};
use nalgebra::{DMatrix, DVector};

pub type BatteryFn = fn(&[Dual]) -> Result<Dual, AdError>;

fn c(v: f64) -> Dual {
    Dual::constant(v)
}

fn poly(x: &[Dual]) -> Result<Dual, AdError> {
    Ok(x[0] * x[0] * x[0] - 2.0 * x[0] * x[1] + x[2] * 0.5 + c(1.0))
}

fn trig(x: &[Dual]) -> Result<Dual, AdError> {
    Ok(x[0].sin() * x[1].cos() + (x[2] * 2.0).sin())
}

fn exp_mix(x: &[Dual]) -> Result<Dual, AdError> {
    Ok((x[0] * 0.3 + x[1] * x[2]).exp() - x[0])
}

fn log_sum_exp(x: &[Dual]) -> Result<Dual, AdError> {
    x.iter().map(|&v| v.exp()).sum::<Dual>().ln()
}

fn softplus(x: &[Dual]) -> Result<Dual, AdError> {
    let mut s = c(0.0);
    for &v in x {
        s += (v.exp() + 1.0).ln()?;
    }
    Ok(s)
}

fn rosenbrock(x: &[Dual]) -> Result<Dual, AdError> {
    Ok(x.windows(2).map(|w| (w[1] - w[0] * w[0]).powi(2) * 100.0 + (1.0 - w[0]).powi(2)).sum())
}

fn rational(x: &[Dual]) -> Result<Dual, AdError> {
    (x[0] * x[1] + 1.0).checked_div(x[2] * x[2] + 1.0)
}

fn root_norm(x: &[Dual]) -> Result<Dual, AdError> {
    (sq_norm(x) + 1.0).sqrt()
}

fn powers(x: &[Dual]) -> Result<Dual, AdError> {
    Ok((x[0] * x[0] + 2.0).powf(1.5)? + x[1].powi(-2) + x[2].powi(5))
}

fn logistic_loss(x: &[Dual]) -> Result<Dual, AdError> {
    let rows = [[1.0, -0.5, 0.3], [-0.2, 0.8, 1.1], [0.7, 0.1, -0.9]];
    let labels = [1.0, -1.0, 1.0];
    let mut s = c(0.0);
    for (row, y) in rows.iter().zip(labels) {
        let z: Dual = row.iter().zip(x).map(|(a, &xi)| xi * *a).sum();
        s += ((-z * y).exp() + 1.0).ln()?;
    }
    Ok(s / 3.0)
}

fn lsq(x: &[Dual]) -> Result<Dual, AdError> {
    let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
    let b = DVector::from_vec(vec![0.3, -1.0]);
    Ok(sq_norm(&fwdgrad::dual::affine(&a, x, Some(&b))?) * 0.5)
}

fn neg_cos_quotient(x: &[Dual]) -> Result<Dual, AdError> {
    Ok(-(x[0].cos() / (x[1].exp() + 2.0)) * x[2])
}

/// Twelve smooth test functions of three variables, each with a point of
/// its domain.
pub fn battery() -> Vec<(&'static str, BatteryFn, [f64; 3])> {
    vec![
        ("poly", poly as BatteryFn, [0.7, -1.2, 0.4]),
        ("trig", trig, [0.3, 1.1, -0.8]),
        ("exp_mix", exp_mix, [0.2, -0.4, 0.9]),
        ("log_sum_exp", log_sum_exp, [1.0, -2.0, 0.5]),
        ("softplus", softplus, [-0.3, 0.6, 2.0]),
        ("rosenbrock", rosenbrock, [-1.2, 1.0, 0.8]),
        ("rational", rational, [0.5, -1.5, 0.7]),
        ("root_norm", root_norm, [0.1, 0.2, -0.3]),
        ("powers", powers, [0.9, 1.3, -0.6]),
        ("logistic_loss", logistic_loss, [0.2, -0.1, 0.4]),
        ("lsq", lsq, [1.0, -0.5, 0.25]),
        ("neg_cos_quotient", neg_cos_quotient, [0.4, -0.2, 1.5]),
    ]
}

/// Central difference `(f(x + h u) - f(x - h u)) / (2h)`.
pub fn central_difference(f: BatteryFn, x: &[f64], u: &[f64], h: f64) -> f64 {
    let at = |s: f64| -> f64 {
        let p: Vec<Dual> = x.iter().zip(u).map(|(a, b)| Dual::constant(a + s * b)).collect();
        f(&p).expect("battery point inside the domain").value
    };
    (at(h) - at(-h)) / (2.0 * h)
}
