//! Seeded trial execution: data-parallel with the `parallel` feature,
//! sequential otherwise. Results are returned in trial order either way.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stateless per-trial seed: SplitMix64 finalizer of `master + (index + 1) * golden`.
/// The map `index -> seed` is a bijection for fixed `master`.
pub fn derive_trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_trial_seed(master, index))
}

/// `f(0), ..., f(n - 1)`, possibly concurrently.
#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference implementation, available in every build.
pub fn map_trials_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `job` with `threads` workers (0 = library default).
#[cfg(feature = "parallel")]
pub fn with_threads<T, J>(threads: usize, job: J) -> T
where
    T: Send,
    J: FnOnce() -> T + Send,
{
    if threads == 0 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T, J>(_threads: usize, job: J) -> T
where
    T: Send,
    J: FnOnce() -> T + Send,
{
    job()
}
