use rayon::prelude::*;

use crate::rng::{stream_seed, trial_rng, TrialRng};

/// Runs `trials` independent trials on the current rayon pool.
///
/// Trial `i` sees the stream `(master, i)` and results come back in index
/// order, so the output is the same for any number of worker threads.
pub fn run_trials<T, F>(master: u64, trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(TrialContext, &mut TrialRng) -> T + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|index| {
            let mut rng = trial_rng(master, index);
            f(TrialContext { index, seed: stream_seed(master, index) }, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialContext {
    pub index: u64,
    /// Seed of this trial's stream, for provenance columns.
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    #[test]
    fn independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(9, 500, |ctx, rng| (ctx.index, rng.random::<u64>())))
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert!(one.iter().enumerate().all(|(i, (idx, _))| *idx == i as u64));
    }
}
