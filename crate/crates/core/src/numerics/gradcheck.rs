//! Finite-difference gradient checking.
//!
//! Central differences with `h = 1e-5`; relative error is
//! `|a − n| / max(|a|, |n|, 1e-7)`. A coordinate whose ±h probes land on
//! different sides of a ReLU kink has no meaningful derivative there, so it is
//! skipped and counted instead of compared.

use ndarray::Array2;

use super::{Activation, ForwardCache, MlpNet};
use crate::error::Result;

pub const STEP: f64 = 1e-5;
pub const FLOOR: f64 = 1e-7;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
    /// Coordinate with the largest relative error.
    pub worst: Option<usize>,
}

impl Report {
    pub fn merge(&mut self, other: &Report) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        if other.max_rel > self.max_rel {
            self.max_rel = other.max_rel;
            self.worst = other.worst;
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel <= tol
    }
}

/// Which ReLU units are active, across every ReLU layer of a cache.
pub fn relu_pattern(net: &MlpNet, cache: &ForwardCache) -> Vec<bool> {
    net.layers()
        .iter()
        .zip(&cache.pre_activations)
        .filter(|(l, _)| l.activation == Activation::Relu)
        .flat_map(|(_, z)| z.iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect()
}

/// Compares `analytic[i]` against a central difference of `f` at each listed
/// coordinate of `x`. `f` returns the scalar value and a kink signature (the
/// ReLU activity pattern); differing signatures at ±h skip the coordinate.
pub fn check_coordinates<F>(x: &[f64], analytic: &[f64], coords: &[usize], mut f: F) -> Result<Report>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<bool>)>,
{
    let mut report = Report::default();
    let mut probe = x.to_vec();
    for &i in coords {
        probe[i] = x[i] + STEP;
        let (up, sig_up) = f(&probe)?;
        probe[i] = x[i] - STEP;
        let (down, sig_down) = f(&probe)?;
        probe[i] = x[i];
        if sig_up != sig_down {
            report.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * STEP);
        let rel = relative_error(analytic[i], numeric);
        report.checked += 1;
        if rel > report.max_rel || report.worst.is_none() {
            report.max_rel = report.max_rel.max(rel);
            report.worst = Some(i);
        }
    }
    Ok(report)
}

/// Checks a network against the scalar loss `⟨upstream, net(x)⟩` with respect
/// to every input coordinate and the listed parameter coordinates (flat,
/// checkpoint order). Returns `(input report, parameter report)`.
pub fn check_net(net: &MlpNet, input: &[f64], upstream: &[f64], params: &[usize]) -> Result<(Report, Report)> {
    let (_, cache) = net.forward(input)?;
    let (grads, dx) = net.backward(cache, upstream)?;
    let loss = |n: &MlpNet, x: &[f64]| -> Result<(f64, Vec<bool>)> {
        let (y, c) = n.forward(x)?;
        let l = y.iter().zip(upstream).map(|(a, b)| a * b).sum();
        Ok((l, relu_pattern(n, &c)))
    };

    let all_inputs: Vec<usize> = (0..input.len()).collect();
    let inputs = check_coordinates(input, &dx, &all_inputs, |x| loss(net, x))?;

    let theta = net.to_flat();
    let mut probe = net.clone();
    let params = check_coordinates(&theta, &grads.to_flat(), params, |p| {
        probe.set_flat(p)?;
        loss(&probe, input)
    })?;
    Ok((inputs, params))
}

/// Row-vector helper for callers building batched probes.
pub fn as_row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector shape")
}
