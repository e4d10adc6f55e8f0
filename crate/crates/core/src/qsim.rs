//! Exact simulation of the rank-phase QAOA circuit.
//!
//! The phase Hamiltonian `H_p = 1/2 sum_j (I - Z_j) 2^j` has eigenvalue
//! `rank(x)` on basis state `|x>` and is a sum of single-qubit terms, as is the
//! transverse-field mixer. The circuit therefore never entangles qubits and the
//! state is held exactly as one amplitude pair per qubit.

use std::borrow::Cow;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{Assignment, CnfFormula};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AngleError {
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("beta and gamma lists differ in length ({betas} vs {gammas})")]
    LengthMismatch { betas: usize, gammas: usize },
    #[error("angle {value} outside [0, {bound})")]
    OutOfBounds { value: f64, bound: f64 },
}

/// One `(beta, gamma)` pair; the JSON form of a circuit layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub beta: f64,
    pub gamma: f64,
}

/// Circuit angles for `depth` layers, `beta in [0, pi)` and `gamma in [0, 2 pi)`.
/// Serializes as `[{"beta":..,"gamma":..}, ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Layer>", into = "Vec<Layer>")]
pub struct AngleVector {
    betas: Vec<f64>,
    gammas: Vec<f64>,
}

pub const BETA_BOUND: f64 = PI;
pub const GAMMA_BOUND: f64 = TAU;

impl AngleVector {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self, AngleError> {
        if betas.len() != gammas.len() {
            return Err(AngleError::LengthMismatch { betas: betas.len(), gammas: gammas.len() });
        }
        if betas.is_empty() {
            return Err(AngleError::ZeroDepth);
        }
        for &b in &betas {
            check_bound(b, BETA_BOUND)?;
        }
        for &g in &gammas {
            check_bound(g, GAMMA_BOUND)?;
        }
        Ok(Self { betas, gammas })
    }

    /// Angles without the bound check. The simulator accepts any real angle;
    /// bounds only describe the search box.
    pub fn unbounded(betas: Vec<f64>, gammas: Vec<f64>) -> Self {
        assert_eq!(betas.len(), gammas.len());
        assert!(!betas.is_empty());
        Self { betas, gammas }
    }

    pub fn zeros(depth: usize) -> Self {
        Self::unbounded(vec![0.0; depth], vec![0.0; depth])
    }

    pub fn depth(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Flattened genes `[beta_1..beta_p, gamma_1..gamma_p]`.
    pub fn genes(&self) -> Vec<f64> {
        self.betas.iter().chain(&self.gammas).copied().collect()
    }

    pub fn from_genes(genes: &[f64]) -> Self {
        assert!(genes.len().is_multiple_of(2) && !genes.is_empty());
        let (b, g) = genes.split_at(genes.len() / 2);
        Self::unbounded(b.to_vec(), g.to_vec())
    }

    pub fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        self.betas.iter().zip(&self.gammas).map(|(&beta, &gamma)| Layer { beta, gamma })
    }
}

fn check_bound(value: f64, bound: f64) -> Result<(), AngleError> {
    if (0.0..bound).contains(&value) {
        Ok(())
    } else {
        Err(AngleError::OutOfBounds { value, bound })
    }
}

impl TryFrom<Vec<Layer>> for AngleVector {
    type Error = AngleError;

    fn try_from(layers: Vec<Layer>) -> Result<Self, Self::Error> {
        let (betas, gammas) = layers.into_iter().map(|l| (l.beta, l.gamma)).unzip();
        Self::new(betas, gammas)
    }
}

impl From<AngleVector> for Vec<Layer> {
    fn from(a: AngleVector) -> Self {
        a.layers().collect()
    }
}

/// Placement of the DIMACS variables on the rank register.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitOrder {
    /// Variable `j + 1` on qubit `j`, rank weight `2^j`.
    #[default]
    LsbFirst,
    /// Variable 1 on the highest-weight qubit: a measured bitstring printed
    /// most significant bit first reads `x_1 .. x_n`.
    MsbFirst,
}

impl QubitOrder {
    /// The formula as seen by qubit `j`: variable `j + 1` of the result sits on qubit `j`.
    pub fn arrange(self, f: &CnfFormula) -> Cow<'_, CnfFormula> {
        match self {
            Self::LsbFirst => Cow::Borrowed(f),
            Self::MsbFirst => Cow::Owned(f.reverse_variables()),
        }
    }

    /// Maps a measured register assignment back to DIMACS variable order.
    pub fn to_variables(self, register: Assignment) -> Assignment {
        match self {
            Self::LsbFirst => register,
            Self::MsbFirst => Assignment::new(register.bits().iter().rev().copied().collect()),
        }
    }
}

/// Product state: `<x|phi> = prod_j amps[j][x_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amps: Vec<[Complex64; 2]>,
}

impl QuantumState {
    pub fn num_qubits(&self) -> usize {
        self.amps.len()
    }

    pub fn qubit_amplitudes(&self) -> &[[Complex64; 2]] {
        &self.amps
    }

    /// Probability that qubit `j` measures 1.
    pub fn prob_one(&self, j: usize) -> f64 {
        self.amps[j][1].norm_sqr()
    }

    pub fn amplitude(&self, a: &Assignment) -> Complex64 {
        assert_eq!(a.len(), self.amps.len());
        self.amps.iter().zip(a.bits()).map(|(pair, &b)| pair[usize::from(b)]).product()
    }

    /// Amplitude of the basis state encoded by `rank`.
    pub fn amplitude_of_rank(&self, rank: u64) -> Complex64 {
        self.amps.iter().enumerate().map(|(j, pair)| pair[(rank >> j & 1) as usize]).product()
    }
}

/// `sum_j bits[j] 2^j`.
pub fn rank_of(a: &Assignment) -> u64 {
    assert!(a.len() <= 62, "rank needs n <= 62");
    a.bits().iter().enumerate().fold(0, |acc, (j, &b)| acc | (u64::from(b) << j))
}

pub fn assignment_of_rank(rank: u64, n: usize) -> Assignment {
    Assignment::new((0..n).map(|j| rank >> j & 1 == 1).collect())
}

/// Applies the phase layer `diag(1, e^{-i gamma 2^j})` to qubit `j`.
fn phase_layer(amps: &mut [[Complex64; 2]], gamma: f64) {
    let mut weight = 1.0f64;
    for pair in amps.iter_mut() {
        // reduce before multiplying so large 2^j stays accurate
        let angle = (gamma * weight).rem_euclid(TAU);
        pair[1] *= Complex64::from_polar(1.0, -angle);
        weight *= 2.0;
    }
}

/// Applies `e^{-i beta X}` to every qubit.
fn mixer_layer(amps: &mut [[Complex64; 2]], beta: f64) {
    let c = Complex64::new(beta.cos(), 0.0);
    let s = Complex64::new(0.0, -beta.sin());
    for pair in amps.iter_mut() {
        let [a0, a1] = *pair;
        *pair = [c * a0 + s * a1, s * a0 + c * a1];
    }
}

/// Prepares `|phi(beta, gamma)>` on `n` qubits from the uniform superposition.
pub fn prepare_state(n: usize, angles: &AngleVector) -> QuantumState {
    assert!(n >= 1, "need at least one qubit");
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![[h, h]; n];
    for layer in angles.layers() {
        phase_layer(&mut amps, layer.gamma);
        mixer_layer(&mut amps, layer.beta);
    }
    QuantumState { amps }
}

/// `|<x|phi>|^2`.
pub fn probability(state: &QuantumState, a: &Assignment) -> f64 {
    assert_eq!(a.len(), state.num_qubits());
    state.amps.iter().zip(a.bits()).map(|(pair, &b)| pair[usize::from(b)].norm_sqr()).product()
}

/// A batch of measurement outcomes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotSet {
    n: usize,
    ranks: Vec<u64>,
}

impl ShotSet {
    pub fn from_ranks(n: usize, ranks: Vec<u64>) -> Self {
        Self { n, ranks }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Outcomes packed as ranks (bit `j` = qubit `j`).
    pub fn ranks(&self) -> &[u64] {
        &self.ranks
    }

    pub fn assignments(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.ranks.iter().map(move |&r| assignment_of_rank(r, self.n))
    }
}

/// Draws `shots` computational-basis measurements. Qubits are sampled
/// independently, which is exact for a product state.
pub fn sample<R: Rng + ?Sized>(state: &QuantumState, shots: usize, rng: &mut R) -> ShotSet {
    assert!(state.num_qubits() <= 64, "shot packing needs n <= 64");
    let p1: Vec<f64> = (0..state.num_qubits()).map(|j| state.prob_one(j)).collect();
    let ranks = (0..shots)
        .map(|_| {
            p1.iter().enumerate().fold(0u64, |acc, (j, &p)| if rng.random::<f64>() < p { acc | 1 << j } else { acc })
        })
        .collect();
    ShotSet { n: state.num_qubits(), ranks }
}
