//! Derivation cost measurements: exponentiation counts and wall time per
//! group size.

use std::time::{Duration, Instant};

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::kgc::KeyPair;
use crate::nike;
use crate::numt;
use crate::params::PublicParams;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub parties: usize,
    /// Exponentiations in one derivation.
    pub modexps: u64,
    pub samples: Vec<Duration>,
}

impl BenchRow {
    pub fn min(&self) -> Duration {
        self.samples.iter().copied().min().unwrap_or_default()
    }

    pub fn mean(&self) -> Duration {
        if self.samples.is_empty() {
            return Duration::ZERO;
        }
        self.samples.iter().sum::<Duration>() / self.samples.len() as u32
    }
}

/// Times `repetitions` derivations by `pairs[0]` for each group size in
/// `parties`, using `pairs[1..size]` as the other members.
///
/// Repetitions are interleaved across sizes, alternating direction, so that
/// slow drift (frequency scaling, other load) spreads over every row instead
/// of biasing some.
pub fn measure(
    pp: &PublicParams,
    pairs: &[KeyPair],
    parties: impl IntoIterator<Item = usize>,
    repetitions: usize,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for size in parties {
        if size < 2 {
            return Err(Error::InvalidInput(
                "groups need at least two parties".into(),
            ));
        }
        if size > pairs.len() {
            return Err(Error::InvalidInput(format!(
                "{size} parties requested but only {} key pairs available",
                pairs.len()
            )));
        }
        groups.push(
            pairs[1..size]
                .iter()
                .map(|p| p.e.clone())
                .collect::<Vec<BigUint>>(),
        );
        rows.push(BenchRow {
            parties: size,
            modexps: 0,
            samples: Vec::with_capacity(repetitions),
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for _ in 0..repetitions.max(1) {
        for &i in &order {
            let (row, others) = (&mut rows[i], &groups[i]);
            let start = Instant::now();
            let (state, count) = numt::count_modexps(|| nike::shared_key(pp, &pairs[0], others));
            row.samples.push(start.elapsed());
            state?;
            row.modexps = count;
        }
        order.reverse();
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope*x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// CSV with one row per group size; times in milliseconds.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("parties,modexps,repetitions,min_ms,mean_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3}\n",
            r.parties,
            r.modexps,
            r.samples.len(),
            r.min().as_secs_f64() * 1e3,
            r.mean().as_secs_f64() * 1e3,
        ));
    }
    out
}
