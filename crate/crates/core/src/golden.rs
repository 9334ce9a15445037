//! Embedded benchmark cases with known optimal barriers.
//!
//! Seven reference parameterizations covering two to four phases, distinct
//! and tied exit intensities, and a phase that never claims directly. The
//! `reproduce` CLI command and the acceptance suite run against these, so no
//! external data is needed.

use crate::phase_type::PhaseTypeModel;
use crate::solver::RiskModel;

/// One benchmark parameterization and its reference barriers.
#[derive(Debug, Clone, Copy)]
pub struct GoldenCase {
    pub id: u8,
    pub label: &'static str,
    pub subintensity: &'static [&'static [f64]],
    pub restart: &'static [f64],
    pub premium_rate: f64,
    pub discount_rate: f64,
    pub claim_rate: f64,
    pub expected_barriers: &'static [f64],
    /// Acceptance tolerance on each barrier.
    pub barrier_tolerance: f64,
}

impl GoldenCase {
    pub fn n(&self) -> usize {
        self.restart.len()
    }

    /// Build the risk model; embedded data always validates.
    pub fn model(&self) -> RiskModel {
        let rows: Vec<Vec<f64>> = self.subintensity.iter().map(|r| r.to_vec()).collect();
        let env = PhaseTypeModel::validate(&rows, self.restart).expect("embedded data is valid");
        RiskModel::new(self.premium_rate, self.discount_rate, self.claim_rate, env)
            .expect("embedded rates are valid")
    }
}

pub const CASES: [GoldenCase; 7] = [
    GoldenCase {
        id: 1,
        label: "two phases, distinct exit intensities",
        subintensity: &[&[-10.0, 5.0], &[4.0, -12.0]],
        restart: &[0.4, 0.6],
        premium_rate: 15.0,
        discount_rate: 0.1,
        claim_rate: 1.0,
        expected_barriers: &[11.779, 12.219],
        barrier_tolerance: 0.02,
    },
    GoldenCase {
        id: 2,
        label: "two phases, equal exit intensities",
        subintensity: &[&[-8.0, 3.0], &[1.0, -6.0]],
        restart: &[0.4, 0.6],
        premium_rate: 15.0,
        discount_rate: 0.1,
        claim_rate: 1.0,
        expected_barriers: &[10.738, 10.738],
        barrier_tolerance: 0.02,
    },
    GoldenCase {
        id: 3,
        label: "three phases, restart mix (0.2, 0.3, 0.5)",
        subintensity: &[&[-10.0, 5.0, 2.0], &[2.0, -12.0, 4.0], &[2.0, 4.0, -8.0]],
        restart: &[0.2, 0.3, 0.5],
        premium_rate: 21.4,
        discount_rate: 0.1,
        claim_rate: 1.0,
        expected_barriers: &[9.61, 10.26, 9.27],
        barrier_tolerance: 0.02,
    },
    GoldenCase {
        id: 4,
        label: "three phases, restart mix (0.1, 0.1, 0.8)",
        subintensity: &[&[-10.0, 5.0, 2.0], &[2.0, -12.0, 4.0], &[2.0, 4.0, -8.0]],
        restart: &[0.1, 0.1, 0.8],
        premium_rate: 21.4,
        discount_rate: 0.1,
        claim_rate: 1.0,
        expected_barriers: &[9.39, 10.03, 9.05],
        barrier_tolerance: 0.02,
    },
    GoldenCase {
        id: 5,
        label: "four phases, one phase never claims directly",
        subintensity: &[
            &[-10.0, 5.0, 2.0, 1.0],
            &[3.0, -14.0, 4.0, 3.0],
            &[2.0, 2.0, -12.0, 7.0],
            &[2.0, 3.0, 1.0, -6.0],
        ],
        restart: &[0.5, 0.2, 0.2, 0.1],
        premium_rate: 25.0,
        discount_rate: 0.1,
        claim_rate: 1.0,
        expected_barriers: &[8.907, 9.554, 8.274, 7.106],
        barrier_tolerance: 0.02,
    },
    GoldenCase {
        id: 6,
        label: "four phases, two share the top exit intensity",
        subintensity: &[
            &[-16.0, 7.0, 3.0, 1.0],
            &[4.0, -8.0, 1.0, 2.0],
            &[0.0, 1.0, -4.0, 1.0],
            &[0.0, 0.0, 0.0, -5.0],
        ],
        restart: &[0.5, 0.2, 0.2, 0.1],
        premium_rate: 25.0,
        discount_rate: 0.1,
        claim_rate: 1.0,
        expected_barriers: &[10.109, 8.805, 9.205, 10.109],
        barrier_tolerance: 0.02,
    },
    GoldenCase {
        id: 7,
        label: "four phases, uniform exit intensity",
        subintensity: &[
            &[-16.0, 7.0, 3.0, 1.0],
            &[4.0, -12.0, 1.0, 2.0],
            &[0.0, 1.0, -7.0, 1.0],
            &[1.0, 1.0, 3.0, -10.0],
        ],
        restart: &[0.5, 0.2, 0.2, 0.1],
        premium_rate: 21.0,
        discount_rate: 0.1,
        claim_rate: 1.0,
        expected_barriers: &[10.611, 10.611, 10.611, 10.611],
        barrier_tolerance: 0.02,
    },
];

/// Look up a case by its 1-based id.
pub fn case(id: u8) -> Option<&'static GoldenCase> {
    CASES.iter().find(|c| c.id == id)
}
