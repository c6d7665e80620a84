use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of replication `rep`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add((rep as u64).wrapping_mul(GOLDEN))
}

/// Independent stream for one player (or particle) of one replication.
pub fn player_stream(seed: u64, rep: usize, player: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed, rep));
    rng.set_stream(player as u64);
    rng
}
