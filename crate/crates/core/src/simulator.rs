//! Independent Monte Carlo oracle for the controlled surplus process.
//!
//! Paths follow an arbitrary phase-wise barrier vector: wealth above the
//! current phase's barrier is paid out at once, premium accrues below it,
//! premium passes straight through as dividends while sitting on it, and a
//! claim draws an exponential loss followed by a restart phase from π. All
//! discounting is in closed form per segment (lump: `e^{-δs}`·amount;
//! barrier sojourn of length d from time s: `c(e^{-δs} - e^{-δ(s+d)})/δ`),
//! so the only error sources are sampling noise and horizon truncation.
//!
//! When a jump and a barrier interaction coincide, the environment event is
//! processed first and the lump rule of the *new* phase applies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::phase_type::{PhaseTypeModel, Transition};
use crate::solver::RiskModel;

/// Path count, truncation horizon, seeding, and execution knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub paths: usize,
    /// Truncation horizon `T_h` (time units); the reported truncation bound
    /// is `e^{-δ T_h} (x₀ + c/δ)`.
    pub horizon: f64,
    pub seed: u64,
    /// Mirror claim-size draws within path pairs sharing environment noise.
    pub antithetic: bool,
    /// Worker threads; the estimate is identical for any value.
    pub threads: usize,
}

impl SimConfig {
    pub fn new(paths: usize, horizon: f64, seed: u64) -> Self {
        Self {
            paths,
            horizon,
            seed,
            antithetic: false,
            threads: 1,
        }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }
}

/// Monte Carlo estimate with its sampling error and truncation bias bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    /// Upper bound `e^{-δ T_h}(x₀ + c/δ)` on dividends lost to truncation.
    pub truncation_bound: f64,
    pub seed: u64,
}

/// Randomness feeding one path; splitting the claim draws out lets the
/// antithetic mode mirror them without touching the environment noise.
trait PathDraws {
    fn jump(&mut self, env: &PhaseTypeModel, phase: usize) -> (f64, Transition);
    fn claim_uniform(&mut self) -> f64;
    fn restart(&mut self, env: &PhaseTypeModel) -> usize;
}

struct SingleStream<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> PathDraws for SingleStream<'_, R> {
    fn jump(&mut self, env: &PhaseTypeModel, phase: usize) -> (f64, Transition) {
        env.sample_transition(phase, self.0)
    }

    fn claim_uniform(&mut self) -> f64 {
        self.0.random()
    }

    fn restart(&mut self, env: &PhaseTypeModel) -> usize {
        env.sample_restart(self.0)
    }
}

struct SplitStreams {
    env: ChaCha8Rng,
    claims: ChaCha8Rng,
    mirror: bool,
}

impl PathDraws for SplitStreams {
    fn jump(&mut self, env: &PhaseTypeModel, phase: usize) -> (f64, Transition) {
        env.sample_transition(phase, &mut self.env)
    }

    fn claim_uniform(&mut self) -> f64 {
        let u: f64 = self.claims.random();
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }

    fn restart(&mut self, env: &PhaseTypeModel) -> usize {
        env.sample_restart(&mut self.env)
    }
}

fn claim_size(u: f64, beta: f64) -> f64 {
    -(1.0 - u).max(f64::MIN_POSITIVE).ln() / beta
}

fn run_path(
    model: &RiskModel,
    barriers: &[f64],
    x0: f64,
    phase0: usize,
    horizon: f64,
    draws: &mut impl PathDraws,
) -> f64 {
    let c = model.premium_rate();
    let delta = model.discount_rate();
    let beta = model.claim_rate();
    let env = model.env();

    let mut t = 0.0f64;
    let mut x = x0;
    let mut phase = phase0;
    let mut total = 0.0f64;
    loop {
        let b = barriers[phase];
        if x > b {
            total += (x - b) * (-delta * t).exp();
            x = b;
        }
        let (hold, next) = draws.jump(env, phase);
        let t_jump = t + hold;
        if x < b {
            let t_hit = t + (b - x) / c;
            if t_jump <= t_hit {
                if t_jump >= horizon {
                    return total;
                }
                x += c * hold;
            } else {
                if t_hit >= horizon {
                    return total;
                }
                let pay_until = t_jump.min(horizon);
                total += c * ((-delta * t_hit).exp() - (-delta * pay_until).exp()) / delta;
                if t_jump >= horizon {
                    return total;
                }
                x = b;
            }
        } else {
            let pay_until = t_jump.min(horizon);
            total += c * ((-delta * t).exp() - (-delta * pay_until).exp()) / delta;
            if t_jump >= horizon {
                return total;
            }
        }
        t = t_jump;
        match next {
            Transition::Phase(j) => phase = j,
            Transition::Claim => {
                x -= claim_size(draws.claim_uniform(), beta);
                if x < 0.0 {
                    // Ruin: dividends stop for good.
                    return total;
                }
                phase = draws.restart(env);
            }
        }
    }
}

/// Discounted dividend total of one path under the given barriers.
///
/// Deterministic in the RNG state; all draws for the path come from `rng`
/// in a fixed order.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &RiskModel,
    barriers: &[f64],
    x0: f64,
    phase0: usize,
    horizon: f64,
    rng: &mut R,
) -> f64 {
    assert_eq!(
        barriers.len(),
        model.env().n(),
        "one barrier per phase required"
    );
    assert!(phase0 < model.env().n(), "phase index out of range");
    assert!(x0 >= 0.0, "initial wealth must be nonnegative");
    assert!(horizon > 0.0, "horizon must be positive");
    run_path(model, barriers, x0, phase0, horizon, &mut SingleStream(rng))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Claim streams live in the upper half of the stream space.
const CLAIM_STREAM: u64 = 1 << 63;

/// Sample mean and standard error over independent paths.
///
/// Path `p` draws from a stream derived only from `(seed, p)`, and samples
/// are reduced in path order, so the estimate does not depend on the thread
/// count. With antithetic variates on, consecutive paths form pairs sharing
/// environment noise with mirrored claim draws; the standard error is then
/// computed over pair means.
pub fn estimate_value(
    model: &RiskModel,
    barriers: &[f64],
    x0: f64,
    phase0: usize,
    cfg: &SimConfig,
) -> SimEstimate {
    assert!(cfg.paths >= 1, "need at least one path");
    let horizon = cfg.horizon;
    assert!(horizon > 0.0, "horizon must be positive");

    let pairs = if cfg.antithetic { cfg.paths / 2 } else { 0 };
    let loose = cfg.paths - 2 * pairs;
    let jobs = pairs + loose;

    let mut samples = vec![0.0f64; jobs];
    let run_job = |job: usize| -> f64 {
        if job < pairs {
            let faces = [false, true].map(|mirror| {
                let mut draws = SplitStreams {
                    env: stream_rng(cfg.seed, job as u64),
                    claims: stream_rng(cfg.seed, job as u64 | CLAIM_STREAM),
                    mirror,
                };
                run_path(model, barriers, x0, phase0, horizon, &mut draws)
            });
            (faces[0] + faces[1]) / 2.0
        } else {
            let mut rng = stream_rng(cfg.seed, job as u64);
            run_path(
                model,
                barriers,
                x0,
                phase0,
                horizon,
                &mut SingleStream(&mut rng),
            )
        }
    };

    let threads = cfg.threads.max(1).min(jobs);
    if threads == 1 {
        for (job, slot) in samples.iter_mut().enumerate() {
            *slot = run_job(job);
        }
    } else {
        let chunk = jobs.div_ceil(threads);
        std::thread::scope(|scope| {
            for (ci, slots) in samples.chunks_mut(chunk).enumerate() {
                let run_job = &run_job;
                scope.spawn(move || {
                    for (off, slot) in slots.iter_mut().enumerate() {
                        *slot = run_job(ci * chunk + off);
                    }
                });
            }
        });
    }

    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let stderr = if samples.len() > 1 {
        let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (count - 1.0) / count).sqrt()
    } else {
        0.0
    };

    SimEstimate {
        mean,
        stderr,
        paths: cfg.paths,
        truncation_bound: (-model.discount_rate() * horizon).exp()
            * (x0 + model.premium_rate() / model.discount_rate()),
        seed: cfg.seed,
    }
}
