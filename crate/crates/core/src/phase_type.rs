//! Terminating Markov environment chain driving the interclaim times.
//!
//! A model holds the subintensity matrix `T` over the transient phases, the
//! restart distribution `π` used after each claim, and the exit (claim)
//! intensities `t = -T·e`. Phase indices are 0-based throughout this crate;
//! the CLI presents them 1-based.

use rand::Rng;
use thiserror::Error;

/// Validation and linear-algebra errors for phase-type models.
///
/// Row/column numbers in messages are 1-based to match user-facing I/O.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseTypeError {
    #[error("matrix/vector shapes are inconsistent: {0}")]
    ShapeMismatch(String),
    #[error("off-diagonal rate at row {}, column {} is negative ({value})", row + 1, col + 1)]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("diagonal entry at row {} must be negative, got {value}", row + 1)]
    PositiveDiagonal { row: usize, value: f64 },
    #[error("row {} sums to {excess:+e}; exit rates t = -T·e must be nonnegative", row + 1)]
    NegativeExitRate { row: usize, excess: f64 },
    #[error("restart vector is not a probability distribution: {0}")]
    RestartNotProbability(String),
    #[error("subintensity matrix is singular; some phase set can never reach a claim")]
    SingularSubintensity,
}

/// Outcome of one jump of the environment chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// Jump to another transient phase (0-based).
    Phase(usize),
    /// Absorption: a claim occurs.
    Claim,
}

/// Validated phase-type environment: subintensity matrix, restart
/// distribution, and derived exit intensities.
///
/// Immutable after validation; safe to share across threads. Sampling takes
/// an explicit RNG, the model holds no mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeModel {
    n: usize,
    /// Row-major n×n subintensity matrix.
    subintensity: Vec<f64>,
    /// Restart distribution π (sums to one).
    restart: Vec<f64>,
    /// Exit intensities t = -T·e, kept explicit because the solver reads
    /// λ_{i,n+1} in its hot loop.
    exit: Vec<f64>,
}

/// Tolerance on |Σπ - 1|; inputs further off are rejected rather than
/// silently renormalized.
const RESTART_SUM_TOL: f64 = 1e-12;

/// Relative tolerance under which a positive row sum is attributed to
/// rounding and the exit rate clamped to zero.
const ROW_SUM_SLACK: f64 = 1e-12;

impl PhaseTypeModel {
    /// Validate a subintensity matrix and restart distribution.
    ///
    /// Checks sign patterns, derives `t = -T·e` (rejecting positive row
    /// sums), requires `π` to be a probability vector within `1e-12`, and
    /// requires `T` to be invertible so every phase reaches a claim.
    pub fn validate(subintensity: &[Vec<f64>], restart: &[f64]) -> Result<Self, PhaseTypeError> {
        let n = subintensity.len();
        if n == 0 {
            return Err(PhaseTypeError::ShapeMismatch(
                "need at least one phase".into(),
            ));
        }
        for (i, row) in subintensity.iter().enumerate() {
            if row.len() != n {
                return Err(PhaseTypeError::ShapeMismatch(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
        }
        if restart.len() != n {
            return Err(PhaseTypeError::ShapeMismatch(format!(
                "restart vector has {} entries, expected {n}",
                restart.len()
            )));
        }

        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in subintensity.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(PhaseTypeError::ShapeMismatch(format!(
                        "entry at row {}, column {} is {v}",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j {
                    if v >= 0.0 {
                        return Err(PhaseTypeError::PositiveDiagonal { row: i, value: v });
                    }
                } else if v < 0.0 {
                    return Err(PhaseTypeError::NegativeOffDiagonal {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                flat.push(v);
            }
        }

        let mut exit = Vec::with_capacity(n);
        for i in 0..n {
            let row_sum: f64 = flat[i * n..(i + 1) * n].iter().sum();
            let scale = -flat[i * n + i];
            if row_sum > ROW_SUM_SLACK * scale {
                return Err(PhaseTypeError::NegativeExitRate {
                    row: i,
                    excess: row_sum,
                });
            }
            exit.push((-row_sum).max(0.0));
        }

        let mut restart = restart.to_vec();
        let mut sum = 0.0;
        for (i, &p) in restart.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(PhaseTypeError::RestartNotProbability(format!(
                    "entry {} is {p}",
                    i + 1
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > RESTART_SUM_TOL {
            return Err(PhaseTypeError::RestartNotProbability(format!(
                "entries sum to {sum}, expected 1 within {RESTART_SUM_TOL:e}"
            )));
        }
        for p in &mut restart {
            *p /= sum;
        }

        let model = Self {
            n,
            subintensity: flat,
            restart,
            exit,
        };
        // Invertibility check up front so later solves cannot hit it.
        model.solve_against_ones()?;
        Ok(model)
    }

    /// Number of transient phases.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Rate λ_ij from phase `i` to phase `j` (off-diagonal entry of `T`).
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.subintensity[i * self.n + j]
    }

    /// Total leave rate `λ_i = -T[i][i]` of phase `i`.
    pub fn total_rate(&self, i: usize) -> f64 {
        -self.subintensity[i * self.n + i]
    }

    /// Exit (claim) intensity `t[i] = λ_{i,n+1}`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn exit_rates(&self) -> &[f64] {
        &self.exit
    }

    /// Restart distribution π.
    pub fn restart_probs(&self) -> &[f64] {
        &self.restart
    }

    /// Subintensity row for phase `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.subintensity[i * self.n..(i + 1) * self.n]
    }

    /// Expected time until the next claim starting from phase `i`,
    /// `-(T⁻¹ e)[i]`.
    pub fn expected_time_to_claim(&self, i: usize) -> Result<f64, PhaseTypeError> {
        assert!(i < self.n, "phase index {i} out of range");
        let z = self.solve_against_ones()?;
        Ok(-z[i])
    }

    /// Solve `T z = e` by Gaussian elimination with partial pivoting.
    fn solve_against_ones(&self) -> Result<Vec<f64>, PhaseTypeError> {
        let n = self.n;
        let mut a = self.subintensity.clone();
        let mut rhs = vec![1.0; n];
        let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| a[r1 * n + col].abs().total_cmp(&a[r2 * n + col].abs()))
                .unwrap();
            let pivot = a[pivot_row * n + col];
            if pivot.abs() <= 1e-12 * scale {
                return Err(PhaseTypeError::SingularSubintensity);
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                rhs.swap(col, pivot_row);
            }
            for r in (col + 1)..n {
                let factor = a[r * n + col] / pivot;
                if factor != 0.0 {
                    for j in col..n {
                        a[r * n + j] -= factor * a[col * n + j];
                    }
                    rhs[r] -= factor * rhs[col];
                }
            }
        }
        for col in (0..n).rev() {
            let mut acc = rhs[col];
            for j in (col + 1)..n {
                acc -= a[col * n + j] * rhs[j];
            }
            rhs[col] = acc / a[col * n + col];
        }
        Ok(rhs)
    }

    /// Sample one jump out of phase `i`: the exponential holding time with
    /// rate λ_i, then the destination (phase `j` with probability λ_ij/λ_i,
    /// claim with probability t_i/λ_i).
    ///
    /// Draw order is fixed (holding time first, destination second) so a
    /// given RNG state always yields the same jump.
    pub fn sample_transition<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> (f64, Transition) {
        assert!(i < self.n, "phase index {i} out of range");
        let lambda = self.total_rate(i);
        let holding = sample_exp(rng, lambda);
        let target = rng.random::<f64>() * lambda;
        let mut cum = 0.0;
        let mut fallback = Transition::Claim;
        for j in 0..self.n {
            if j == i {
                continue;
            }
            let r = self.rate(i, j);
            if r > 0.0 {
                cum += r;
                if target < cum {
                    return (holding, Transition::Phase(j));
                }
                fallback = Transition::Phase(j);
            }
        }
        if self.exit[i] > 0.0 {
            (holding, Transition::Claim)
        } else {
            // Rounding pushed the draw past Σλ_ij with no exit rate to
            // absorb it; the last positive-rate destination takes it.
            (holding, fallback)
        }
    }

    /// Sample a restart phase from π.
    pub fn sample_restart<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let target = rng.random::<f64>();
        let mut cum = 0.0;
        let mut last = 0;
        for (j, &p) in self.restart.iter().enumerate() {
            if p > 0.0 {
                cum += p;
                if target < cum {
                    return j;
                }
                last = j;
            }
        }
        last
    }
}

/// Exponential draw with the given rate via inversion, so a single uniform
/// drives each draw and streams stay mirrorable.
pub(crate) fn sample_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_phase() -> PhaseTypeModel {
        PhaseTypeModel::validate(&[vec![-10.0, 5.0], vec![4.0, -12.0]], &[0.4, 0.6]).unwrap()
    }

    #[test]
    fn validate_two_phase() {
        let m = two_phase();
        assert_eq!(m.exit_rates(), &[5.0, 8.0]);
        assert_eq!(m.total_rate(0), 10.0);
        assert_eq!(m.rate(0, 1), 5.0);
    }

    #[test]
    fn validate_single_phase() {
        let m = PhaseTypeModel::validate(&[vec![-3.5]], &[1.0]).unwrap();
        assert_eq!(m.exit_rates(), &[3.5]);
    }

    #[test]
    fn validate_rejects_positive_row_sum() {
        let err =
            PhaseTypeModel::validate(&[vec![-3.0, 5.0], vec![1.0, -6.0]], &[0.5, 0.5]).unwrap_err();
        assert!(matches!(
            err,
            PhaseTypeError::NegativeExitRate { row: 0, .. }
        ));
    }

    #[test]
    fn validate_rejects_bad_signs() {
        let err = PhaseTypeModel::validate(&[vec![-1.0, -0.1], vec![0.0, -2.0]], &[0.5, 0.5])
            .unwrap_err();
        assert!(matches!(err, PhaseTypeError::NegativeOffDiagonal { .. }));

        let err = PhaseTypeModel::validate(&[vec![0.0]], &[1.0]).unwrap_err();
        assert!(matches!(err, PhaseTypeError::PositiveDiagonal { .. }));
    }

    #[test]
    fn validate_rejects_bad_restart() {
        let err = PhaseTypeModel::validate(&[vec![-1.0]], &[0.8]).unwrap_err();
        assert!(matches!(err, PhaseTypeError::RestartNotProbability(_)));
    }

    #[test]
    fn validate_rejects_trapped_phases() {
        // Phases 1 and 2 form a closed class that never reaches a claim.
        let err = PhaseTypeModel::validate(
            &[
                vec![-1.0, 1.0, 0.0],
                vec![1.0, -1.0, 0.0],
                vec![0.0, 0.0, -1.0],
            ],
            &[0.3, 0.3, 0.4],
        )
        .unwrap_err();
        assert_eq!(err, PhaseTypeError::SingularSubintensity);
    }

    #[test]
    fn row_sums_plus_exit_are_exactly_zero() {
        for model in [
            two_phase(),
            PhaseTypeModel::validate(
                &[
                    vec![-10.0, 5.0, 2.0],
                    vec![2.0, -12.0, 4.0],
                    vec![2.0, 4.0, -8.0],
                ],
                &[0.2, 0.3, 0.5],
            )
            .unwrap(),
        ] {
            for i in 0..model.n() {
                let sum: f64 = model.row(i).iter().sum();
                assert_eq!(sum + model.exit_rate(i), 0.0);
            }
        }
    }

    #[test]
    fn expected_time_single_phase() {
        let m = PhaseTypeModel::validate(&[vec![-4.0]], &[1.0]).unwrap();
        assert!((m.expected_time_to_claim(0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn expected_time_two_phase_by_hand() {
        // det T = 100, T⁻¹e = (-0.17, -0.14).
        let m = two_phase();
        assert!((m.expected_time_to_claim(0).unwrap() - 0.17).abs() < 1e-14);
        assert!((m.expected_time_to_claim(1).unwrap() - 0.14).abs() < 1e-14);
    }

    #[test]
    fn expected_time_sign_tracks_exit_rates() {
        // For any 2-phase model: sign(𝒯₁ - 𝒯₂) = sign(λ₂₃ - λ₁₃).
        let cases = [
            ([[-10.0, 5.0], [4.0, -12.0]], 1.0f64), // t = (5, 8): 𝒯₁ > 𝒯₂
            ([[-8.0, 3.0], [1.0, -6.0]], 0.0),      // t = (5, 5): equal
            ([[-9.0, 2.0], [5.0, -8.0]], -1.0),     // t = (7, 3): 𝒯₁ < 𝒯₂
        ];
        for (t, expect_sign) in cases {
            let m = PhaseTypeModel::validate(&[t[0].to_vec(), t[1].to_vec()], &[0.5, 0.5]).unwrap();
            let d = m.expected_time_to_claim(0).unwrap() - m.expected_time_to_claim(1).unwrap();
            let got = if d.abs() < 1e-13 { 0.0 } else { d.signum() };
            assert_eq!(got, expect_sign, "t = {:?}", m.exit_rates());
        }
    }

    #[test]
    fn single_phase_always_claims() {
        let m = PhaseTypeModel::validate(&[vec![-2.0]], &[1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (hold, next) = m.sample_transition(0, &mut rng);
            assert!(hold >= 0.0);
            assert_eq!(next, Transition::Claim);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = two_phase();
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            assert_eq!(
                m.sample_transition(0, &mut a),
                m.sample_transition(0, &mut b)
            );
        }
    }

    #[test]
    fn transition_split_matches_rates() {
        // From phase 1 of the two-phase model: P(phase 2) = 5/10 = 0.5.
        let m = two_phase();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 1_000_000u64;
        let mut to_phase = 0u64;
        for _ in 0..draws {
            if let (_, Transition::Phase(1)) = m.sample_transition(0, &mut rng) {
                to_phase += 1;
            }
        }
        let p_hat = to_phase as f64 / draws as f64;
        let sigma = (0.25f64 / draws as f64).sqrt();
        assert!(
            (p_hat - 0.5).abs() <= 3.0 * sigma,
            "p_hat = {p_hat}, 3σ = {:.2e}",
            3.0 * sigma
        );
    }

    #[test]
    fn absorption_time_matches_expected_time() {
        // Mean time to claim from phase 1 (no restarts) vs -(T⁻¹e)[1]
        // within three standard errors at 10⁶ runs.
        let m = two_phase();
        let expect = m.expected_time_to_claim(0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let runs = 1_000_000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..runs {
            let mut phase = 0;
            let mut elapsed = 0.0;
            loop {
                let (hold, next) = m.sample_transition(phase, &mut rng);
                elapsed += hold;
                match next {
                    Transition::Phase(j) => phase = j,
                    Transition::Claim => break,
                }
            }
            sum += elapsed;
            sum_sq += elapsed * elapsed;
        }
        let mean = sum / runs as f64;
        let var = (sum_sq - sum * sum / runs as f64) / (runs as f64 - 1.0);
        let stderr = (var / runs as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * stderr,
            "mean {mean}, expected {expect}, 3σ = {:.2e}",
            3.0 * stderr
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn two_phase_from_rates(l12: f64, l21: f64, t1: f64, t2: f64) -> PhaseTypeModel {
            PhaseTypeModel::validate(
                &[vec![-(l12 + t1), l12], vec![l21, -(l21 + t2)]],
                &[0.5, 0.5],
            )
            .unwrap()
        }

        proptest! {
            /// sign(𝒯₁ - 𝒯₂) tracks sign(t₂ - t₁) for every 2-phase model.
            #[test]
            fn expected_time_gap_tracks_exit_rates(
                l12 in 0.1..10.0f64,
                l21 in 0.1..10.0f64,
                t1 in 0.0..10.0f64,
                t2 in 0.0..10.0f64,
            ) {
                prop_assume!(t1 + t2 > 1e-6);
                let m = two_phase_from_rates(l12, l21, t1, t2);
                let gap = m.expected_time_to_claim(0).unwrap()
                    - m.expected_time_to_claim(1).unwrap();
                // Identity: 𝒯₁ - 𝒯₂ = (t₂ - t₁)/(λ₁λ₂ - λ₁₂λ₂₁).
                let det = (l12 + t1) * (l21 + t2) - l12 * l21;
                prop_assert!((gap - (t2 - t1) / det).abs() <= 1e-9 * (1.0 + gap.abs()));
            }

            /// Sampled jumps are well-formed: positive holding times and
            /// reachable destinations only.
            #[test]
            fn sampled_jumps_are_well_formed(
                l12 in 0.1..10.0f64,
                l21 in 0.1..10.0f64,
                t1 in 0.0..10.0f64,
                t2 in 0.1..10.0f64,
                seed in 0u64..1000,
            ) {
                let m = two_phase_from_rates(l12, l21, t1, t2);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for phase in [0usize, 1] {
                    let (hold, next) = m.sample_transition(phase, &mut rng);
                    prop_assert!(hold.is_finite() && hold >= 0.0);
                    match next {
                        Transition::Phase(j) => {
                            prop_assert!(j != phase && j < 2);
                            prop_assert!(m.rate(phase, j) > 0.0);
                        }
                        Transition::Claim => prop_assert!(m.exit_rate(phase) > 0.0),
                    }
                }
            }
        }
    }

    #[test]
    fn exit_rate_zero_phase_never_claims_directly() {
        // Phase 2 has zero exit rate; every jump out of it goes to phase 1.
        let m = PhaseTypeModel::validate(&[vec![-3.0, 1.0], vec![4.0, -4.0]], &[0.5, 0.5]).unwrap();
        assert_eq!(m.exit_rate(1), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (_, next) = m.sample_transition(1, &mut rng);
            assert_eq!(next, Transition::Phase(0));
        }
    }
}
