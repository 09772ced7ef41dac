use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{product_fingerprint, Checkpoint, CheckpointError, CHECKPOINT_VERSION};
use super::{choose_action, update_qs, Hyper, HyperError, Params, QTriple, Transition};
use crate::product::ProductMdp;

/// What happened in one training episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Discounted return, counting the initial state.
    pub ret: f64,
    /// Every visited state was in `B×_ψ`.
    pub safe: bool,
    /// Some state of the second half was in `B×_φ`.
    pub accepting_tail: bool,
    pub params: Params,
}

/// Trainer state. Everything needed to resume lives here and in the product.
pub struct Trainer<'a> {
    p: &'a ProductMdp,
    pub hyper: Hyper,
    pub horizon: usize,
    pub seed: u64,
    pub q: QTriple,
    pub rng: ChaCha8Rng,
    pub episode: usize,
    /// Per product state.
    pub visits: Vec<u64>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        p: &'a ProductMdp,
        hyper: Hyper,
        horizon: usize,
        seed: u64,
    ) -> Result<Self, HyperError> {
        hyper.validate()?;
        Ok(Trainer {
            p,
            hyper,
            horizon,
            seed,
            q: QTriple::zeros(p),
            rng: ChaCha8Rng::seed_from_u64(seed),
            episode: 0,
            visits: vec![0; p.num_states()],
        })
    }

    pub fn product(&self) -> &'a ProductMdp {
        self.p
    }

    /// Runs one episode of `horizon` steps. Each step's update waits for the
    /// next action so that the `Q^R` target is on-policy; the last step is
    /// closed with an action drawn at the final state.
    pub fn run_episode(&mut self) -> EpisodeStats {
        let p = self.p;
        let h = self.hyper.at(self.episode);
        let mut x = p.initial();
        let mut k = choose_action(&self.q, p, x, &h, &mut self.rng);
        let mut ret = 0.0;
        let mut disc = 1.0;
        let mut safe = true;
        let mut tail = false;
        for t in 0..self.horizon {
            self.visits[x] += 1;
            ret += disc * p.reward(x);
            disc *= h.gamma;
            safe &= p.in_safe(x);
            if 2 * t >= self.horizon && p.in_accepting(x) {
                tail = true;
            }
            let step = p
                .step(x, k, &mut self.rng)
                .expect("chosen actions are allowed");
            let next_k = choose_action(&self.q, p, step.next, &h, &mut self.rng);
            let tr = Transition {
                x,
                k,
                r: p.reward(x),
                next: step.next,
                next_k,
                next_safe: step.in_safe,
                next_accepting: step.in_accepting,
            };
            update_qs(&mut self.q, p, &tr, &h);
            x = step.next;
            k = next_k;
        }
        let stats = EpisodeStats {
            episode: self.episode,
            ret,
            safe,
            accepting_tail: tail,
            params: h,
        };
        self.episode += 1;
        stats
    }

    /// Runs episodes until `episodes` have been completed in total.
    pub fn train_until(
        &mut self,
        episodes: usize,
        mut on_episode: impl FnMut(&Self, &EpisodeStats),
    ) {
        while self.episode < episodes {
            let s = self.run_episode();
            on_episode(self, &s);
        }
    }

    pub fn params(&self) -> Params {
        self.hyper.at(self.episode)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            fingerprint: product_fingerprint(self.p),
            hyper: self.hyper.clone(),
            horizon: self.horizon,
            seed: self.seed,
            episode: self.episode,
            rng: self.rng.clone(),
            q: self.q.clone(),
            visits: self.visits.clone(),
        }
    }

    pub fn resume(p: &'a ProductMdp, ck: Checkpoint) -> Result<Self, CheckpointError> {
        if ck.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(ck.version));
        }
        let fp = product_fingerprint(p);
        if ck.fingerprint != fp {
            return Err(CheckpointError::Fingerprint {
                found: ck.fingerprint,
                expected: fp,
            });
        }
        if ck.q.psi.len() != p.num_pairs() || ck.visits.len() != p.num_states() {
            return Err(CheckpointError::Shape);
        }
        ck.hyper.validate().map_err(CheckpointError::Hyper)?;
        Ok(Trainer {
            p,
            hyper: ck.hyper,
            horizon: ck.horizon,
            seed: ck.seed,
            q: ck.q,
            rng: ck.rng,
            episode: ck.episode,
            visits: ck.visits,
        })
    }
}

/// Aggregates episode stats into CSV rows, one per `every` episodes.
#[derive(Debug, Clone)]
pub struct StatsCsv {
    every: usize,
    n: usize,
    ret: f64,
    safe: usize,
    tail: usize,
}

impl StatsCsv {
    pub const HEADER: &'static str =
        "episode,mean_return,safety_freq,buchi_freq,alpha,epsilon,upsilon,tau_psi,tau_phi";

    pub fn new(every: usize) -> Self {
        StatsCsv {
            every: every.max(1),
            n: 0,
            ret: 0.0,
            safe: 0,
            tail: 0,
        }
    }

    /// Adds an episode; returns a row when a block completes.
    pub fn push(&mut self, s: &EpisodeStats) -> Option<String> {
        self.n += 1;
        self.ret += s.ret;
        self.safe += s.safe as usize;
        self.tail += s.accepting_tail as usize;
        if self.n < self.every {
            return None;
        }
        let n = self.n as f64;
        let p = &s.params;
        let row = format!(
            "{},{},{},{},{},{},{},{},{}",
            s.episode + 1,
            self.ret / n,
            self.safe as f64 / n,
            self.tail as f64 / n,
            p.alpha,
            p.epsilon,
            p.upsilon,
            p.tau_psi,
            p.tau_phi
        );
        *self = StatsCsv::new(self.every);
        Some(row)
    }
}
