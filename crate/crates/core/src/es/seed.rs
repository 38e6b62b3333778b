//! Counter-based seed derivation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
/// Member index reserved for the perturbation-noise stream.
const NOISE_MEMBER: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(h: u64, x: u64) -> u64 {
    splitmix64(h ^ splitmix64(x))
}

/// Seed of one episode, a pure function of its coordinates.
pub fn episode_seed(base_seed: u64, generation: u64, member: u64, episode: u64) -> u64 {
    let h = mix(splitmix64(base_seed), generation);
    let h = mix(h, member);
    mix(h, episode)
}

/// Seed of the perturbation noise of one generation.
pub fn noise_seed(base_seed: u64, generation: u64) -> u64 {
    episode_seed(base_seed, generation, NOISE_MEMBER, 0)
}
