//! Feature maps, ridge estimation of transition measures and elliptical
//! UCB bonuses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationScheme;
use crate::error::{Error, Result};

/// Updates between forced recomputations of the maintained inverse.
pub const REFRESH_INTERVAL: usize = 1024;

/// Default ridge parameter.
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Known feature map `φ(s̄, a)` over one aggregated subMDP.
pub trait FeatureMap {
    fn dim(&self) -> usize;

    fn features(&self, state: usize, action: usize) -> DVector<f64>;

    /// `C_φ`: bound on `‖φ(s̄, a)‖₂`.
    fn norm_bound(&self) -> f64;
}

/// One-hot encoding of `(s̄, a)` over the local states (internal and exit)
/// of an aggregated subMDP. Only internal rows are ever queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabularFeatures {
    states: usize,
    actions: usize,
}

impl TabularFeatures {
    pub fn new(states: usize, actions: usize) -> Self {
        Self { states, actions }
    }

    /// Coordinate that is hot for `(s̄, a)`.
    pub fn index(&self, state: usize, action: usize) -> usize {
        state * self.actions + action
    }

    pub fn actions(&self) -> usize {
        self.actions
    }
}

impl FeatureMap for TabularFeatures {
    fn dim(&self) -> usize {
        self.states * self.actions
    }

    fn features(&self, state: usize, action: usize) -> DVector<f64> {
        let mut phi = DVector::zeros(self.dim());
        phi[self.index(state, action)] = 1.0;
        phi
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }
}

/// Tabular features for aggregate `n` of `scheme`:
/// `d_ψ = |S^{(n)} ∪ Ē^{(n)}| · A`.
pub fn tabular_features(scheme: &AggregationScheme, n: usize, actions: usize) -> TabularFeatures {
    TabularFeatures::new(scheme.shape(n).total(), actions)
}

/// Regularised Gram matrix with a maintained inverse and the regression
/// target accumulator `B = Σ φ δ(s̄′)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramState {
    lambda: f64,
    gram: DMatrix<f64>,
    inverse: DMatrix<f64>,
    targets: DMatrix<f64>,
    count: usize,
    since_refresh: usize,
}

impl GramState {
    /// `Λ = λI`, `B = 0` with `columns` regression targets.
    pub fn new(dim: usize, columns: usize, lambda: f64) -> Result<Self> {
        if lambda.is_nan() || lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ridge parameter must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            gram: DMatrix::identity(dim, dim) * lambda,
            inverse: DMatrix::identity(dim, dim) / lambda,
            targets: DMatrix::zeros(dim, columns),
            count: 0,
            since_refresh: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn columns(&self) -> usize {
        self.targets.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    /// Absorbs `φ` without a regression target.
    pub fn absorb(&mut self, phi: &DVector<f64>) {
        // Sherman–Morrison on Λ⁻¹
        let u = &self.inverse * phi;
        let denom = 1.0 + phi.dot(&u);
        self.inverse -= (&u * u.transpose()) / denom;
        symmetrize(&mut self.inverse);
        self.gram += phi * phi.transpose();
        symmetrize(&mut self.gram);
        self.count += 1;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh();
        }
    }

    /// Absorbs the tuple `(φ, s̄′)`: `Λ += φφᵀ` and `B[:, s̄′] += φ`.
    pub fn update(&mut self, phi: &DVector<f64>, next: usize) -> Result<()> {
        if next >= self.columns() {
            return Err(Error::OutOfRange(format!("target column {next} >= {}", self.columns())));
        }
        self.absorb(phi);
        let mut col = self.targets.column_mut(next);
        col += phi;
        Ok(())
    }

    /// Recomputes `Λ⁻¹` from `Λ` directly.
    pub fn refresh(&mut self) {
        if let Some(inv) = self.gram.clone().cholesky().map(|c| c.inverse()) {
            self.inverse = inv;
            symmetrize(&mut self.inverse);
        }
        self.since_refresh = 0;
    }

    /// `μ̂ = Λ⁻¹ B`.
    pub fn estimate_measure(&self) -> MeasureEstimate {
        MeasureEstimate(&self.inverse * &self.targets)
    }

    /// `φᵀ Λ⁻¹ φ`, clamped at zero within drift.
    pub fn quadratic_form(&self, phi: &DVector<f64>) -> Result<f64> {
        let q = phi.dot(&(&self.inverse * phi));
        if q < -1e-12 {
            return Err(Error::Internal(format!("negative quadratic form {q}")));
        }
        Ok(q.max(0.0))
    }

    /// `β ‖φ‖_{Λ⁻¹}`.
    pub fn ucb_bonus(&self, phi: &DVector<f64>, beta: f64) -> Result<f64> {
        if beta < 0.0 {
            return Err(Error::InvalidParameter(format!("bonus scale must be >= 0, got {beta}")));
        }
        Ok(beta * self.quadratic_form(phi)?.sqrt())
    }

    pub fn checkpoint(&self) -> GramCheckpoint {
        GramCheckpoint {
            lambda: self.lambda,
            count: self.count,
            dim: self.dim(),
            columns: self.columns(),
            gram: row_major(&self.gram),
            targets: row_major(&self.targets),
        }
    }

    pub fn from_checkpoint(cp: &GramCheckpoint) -> Result<Self> {
        if cp.gram.len() != cp.dim * cp.dim || cp.targets.len() != cp.dim * cp.columns {
            return Err(Error::Parse("checkpoint matrix sizes do not match dimensions".into()));
        }
        let mut state = Self::new(cp.dim, cp.columns, cp.lambda)?;
        state.gram = DMatrix::from_row_slice(cp.dim, cp.dim, &cp.gram);
        state.targets = DMatrix::from_row_slice(cp.dim, cp.columns, &cp.targets);
        state.count = cp.count;
        state.refresh();
        Ok(state)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Serialisable snapshot of a [`GramState`]: `λ`, count, `Λ` and `B`,
/// both row-major. The inverse is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramCheckpoint {
    pub lambda: f64,
    pub count: usize,
    pub dim: usize,
    pub columns: usize,
    pub gram: Vec<f64>,
    pub targets: Vec<f64>,
}

/// Ridge estimate `μ̂` of shape `d × columns`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureEstimate(pub DMatrix<f64>);

impl MeasureEstimate {
    pub fn zeros(dim: usize, columns: usize) -> Self {
        Self(DMatrix::zeros(dim, columns))
    }

    /// `φᵀ μ̂ v`
    pub fn predict(&self, phi: &DVector<f64>, values: &DVector<f64>) -> f64 {
        phi.dot(&(&self.0 * values))
    }
}

/// `β = C · d · H · ln(2 d T / δ)`, floored at zero.
pub fn beta_schedule(constant: f64, dim: usize, horizon: usize, total_steps: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if constant.is_nan() || constant <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "beta constant must be positive, got {constant}"
        )));
    }
    if total_steps < 1 || dim < 1 || horizon < 1 {
        return Err(Error::InvalidParameter("d, H and T must be at least 1".into()));
    }
    let d = dim as f64;
    let beta = constant * d * horizon as f64 * (2.0 * d * total_steps as f64 / delta).ln();
    Ok(beta.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(dim: usize, j: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        v[j] = 1.0;
        v
    }

    #[test]
    fn init_is_scaled_identity() {
        let g = GramState::new(2, 3, 1.0).unwrap();
        assert_eq!(g.gram(), &DMatrix::identity(2, 2));
        let g = GramState::new(3, 1, 4.0).unwrap();
        assert_eq!(g.inverse(), &(DMatrix::identity(3, 3) * 0.25));
        assert_eq!(g.estimate_measure().0, DMatrix::zeros(3, 1));
        assert!(GramState::new(2, 2, 0.0).is_err());
        assert!(GramState::new(2, 2, -1.0).is_err());
    }

    #[test]
    fn one_hot_update_bumps_diagonal() {
        let mut g = GramState::new(4, 2, 1.0).unwrap();
        g.update(&one_hot(4, 2), 1).unwrap();
        assert_eq!(g.gram()[(2, 2)], 2.0);
        assert_eq!(g.gram()[(1, 1)], 1.0);
        assert_eq!(g.count(), 1);
        // single observation with λ = 1 → 1/2 at the observed column
        let mu = g.estimate_measure();
        assert!((mu.0[(2, 1)] - 0.5).abs() < 1e-15);
        assert!(g.update(&one_hot(4, 2), 2).is_err());
    }

    #[test]
    fn bonus_values() {
        let mut g = GramState::new(3, 1, 4.0).unwrap();
        let phi = one_hot(3, 0);
        assert!((g.ucb_bonus(&phi, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(g.ucb_bonus(&phi, 0.0).unwrap(), 0.0);
        assert!(g.ucb_bonus(&phi, -1.0).is_err());
        let mut last = g.ucb_bonus(&phi, 1.0).unwrap();
        for _ in 0..50 {
            g.update(&phi, 0).unwrap();
            let b = g.ucb_bonus(&phi, 1.0).unwrap();
            assert!(b <= last);
            last = b;
        }
    }

    #[test]
    fn beta_examples() {
        let b = beta_schedule(2.0, 3, 5, 100, 0.1).unwrap();
        assert!((b - 30.0 * 6000f64.ln()).abs() < 1e-9);
        assert!((b - 260.99).abs() < 0.01);
        let near = beta_schedule(1.7, 1, 1, 1, 1.0 - 1e-12).unwrap();
        assert!((near - 1.7 * 2f64.ln()).abs() < 1e-9);
        assert!(beta_schedule(1.0, 1, 1, 10, 0.0).is_err());
        assert!(beta_schedule(1.0, 1, 1, 10, 1.0).is_err());
        let small = beta_schedule(1.0, 4, 3, 10, 0.05).unwrap();
        let big = beta_schedule(1.0, 4, 3, 1000, 0.05).unwrap();
        assert!(big > small);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut g = GramState::new(3, 2, 1.5).unwrap();
        g.update(&DVector::from_vec(vec![0.2, -0.1, 0.7]), 1).unwrap();
        g.update(&DVector::from_vec(vec![0.0, 0.4, 0.1]), 0).unwrap();
        let json = serde_json::to_string(&g.checkpoint()).unwrap();
        let cp: GramCheckpoint = serde_json::from_str(&json).unwrap();
        let back = GramState::from_checkpoint(&cp).unwrap();
        assert_eq!(back.count(), 2);
        assert_eq!(back.gram(), g.gram());
        assert!((back.inverse() - g.inverse()).norm() < 1e-12);
    }
}
