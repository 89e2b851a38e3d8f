//! Splittable seed derivation for parallel experiment grids.
//!
//! Every cell of a sweep owns an independent RNG stream whose seed is a pure
//! function of the run's base seed and the cell coordinates. Cells can then
//! execute on any thread in any order and still reproduce bit for bit.
//!
//! The derivation is a splitmix64 absorption chain. Starting from the mixed
//! base seed, each coordinate word is folded in with one splitmix64 step:
//!
//! ```text
//! state_0 = mix(base_seed + GOLDEN)
//! state_i = mix(state_{i-1} + GOLDEN + word_i)
//! seed    = state_n
//! ```
//!
//! where `mix` is the splitmix64 finalizer and GOLDEN is 0x9E3779B97F4A7C15.
//! Words are absorbed in a fixed documented order (the harness uses: method
//! tag, n1, n2, eps bits, gamma bits, trial). Floating-point coordinates enter
//! through their IEEE-754 bit pattern via [`float_word`]; an absent optional
//! coordinate is encoded as the bits of -1.0, which no valid grid value
//! (eps > 0, gamma in [0, 1]) can collide with.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a bijective avalanche mix of one 64-bit word.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the coordinate words into the base seed, one splitmix64 step each.
pub fn derive_seed(base_seed: u64, words: &[u64]) -> u64 {
    let mut state = mix(base_seed.wrapping_add(GOLDEN));
    for &w in words {
        state = mix(state.wrapping_add(GOLDEN).wrapping_add(w));
    }
    state
}

/// Encodes an optional float coordinate as a word. `None` maps to the bits of
/// -1.0, outside every valid coordinate range in this crate.
pub fn float_word(value: Option<f64>) -> u64 {
    value.unwrap_or(-1.0).to_bits()
}
