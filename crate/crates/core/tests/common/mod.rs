//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use iqaoa_sat::cnf::{parse_dimacs, CnfFormula, Literal};
use iqaoa_sat::qsim::AngleVector;
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

pub fn load(name: &str) -> CnfFormula {
    let text = std::fs::read_to_string(data_path(name)).unwrap();
    parse_dimacs(&text).unwrap()
}

pub fn widget() -> CnfFormula {
    load("widget.cnf")
}

pub fn uf20_01() -> CnfFormula {
    load("uf20-01.cnf")
}

/// Two-column `value,mass` fixture, `#` comments allowed.
pub fn load_table(name: &str) -> Vec<(f64, f64)> {
    std::fs::read_to_string(data_path(name))
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.trim().parse().unwrap(), b.trim().parse().unwrap())
        })
        .collect()
}

/// Random formula with clauses of 1..=k distinct variables.
pub fn random_formula<R: Rng>(rng: &mut R, n: usize, m: usize, k: usize) -> CnfFormula {
    let clauses = (0..m)
        .map(|_| {
            let len = rng.random_range(1..=k.min(n));
            let lits = sample_indices(rng, n, len)
                .into_iter()
                .map(|v| Literal::new(v as u32 + 1, rng.random()))
                .collect::<Vec<_>>();
            (lits, 1.0)
        })
        .collect::<Vec<_>>();
    CnfFormula::new(n, clauses).unwrap()
}

/// Dense `2^n` statevector built gate by gate, independent of the product-state simulator.
pub fn dense_state(n: usize, angles: &AngleVector) -> Vec<Complex64> {
    let dim = 1usize << n;
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for q in 0..n {
        apply_1q(&mut psi, q, [[h.into(), h.into()], [h.into(), (-h).into()]]);
    }
    for (&beta, &gamma) in angles.betas().iter().zip(angles.gammas()) {
        for (x, amp) in psi.iter_mut().enumerate() {
            *amp *= Complex64::from_polar(1.0, -gamma * x as f64);
        }
        let c = Complex64::new(beta.cos(), 0.0);
        let s = Complex64::new(0.0, -beta.sin());
        for q in 0..n {
            apply_1q(&mut psi, q, [[c, s], [s, c]]);
        }
    }
    psi
}

fn apply_1q(psi: &mut [Complex64], q: usize, u: [[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for x in 0..psi.len() {
        if x & bit == 0 {
            let (a0, a1) = (psi[x], psi[x | bit]);
            psi[x] = u[0][0] * a0 + u[0][1] * a1;
            psi[x | bit] = u[1][0] * a0 + u[1][1] * a1;
        }
    }
}

/// Pearson chi-square of `observed` against `probs`, with bins expecting
/// fewer than 5 counts pooled. Returns `(statistic, degrees of freedom)`.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let shots: u64 = observed.iter().sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * shots as f64;
        if e < 5.0 {
            pool.0 += o as f64;
            pool.1 += e;
        } else {
            bins.push((o as f64, e));
        }
    }
    if pool.1 > 0.0 {
        bins.push(pool);
    }
    let stat = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, bins.len().saturating_sub(1))
}

/// Chi-square acceptance at mean + 4 standard deviations of the null distribution.
pub fn passes_4_sigma(observed: &[u64], probs: &[f64]) -> bool {
    let (stat, df) = chi_square(observed, probs);
    let df = df.max(1) as f64;
    stat <= df + 4.0 * (2.0 * df).sqrt()
}
