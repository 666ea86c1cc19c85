use radcom::{ChannelMatrix64, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `K × M` channel with i.i.d. circularly-symmetric unit-variance complex
/// normal entries.
pub fn rayleigh_channel(users: usize, antennas: usize, seed: u64) -> ChannelMatrix64 {
    assert!(
        users >= 1 && users <= antennas,
        "need 1 <= K <= M, got K={users}, M={antennas}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let entries = nalgebra::DMatrix::from_fn(users, antennas, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(re * scale, im * scale)
    });
    ChannelMatrix64::new(entries).expect("finite Gaussian entries")
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under master seed `master`: the `trial`-th output
/// of a SplitMix64 stream, so any trial can be regenerated on its own.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    mix(master.wrapping_add((trial as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = rayleigh_channel(3, 5, 42);
        let b = rayleigh_channel(3, 5, 42);
        let c = rayleigh_channel(3, 5, 43);
        assert_eq!(a.matrix(), b.matrix());
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn entry_variance_is_one() {
        let n = 10_000;
        let (mut re2, mut im2, mut mean_re) = (0.0, 0.0, 0.0);
        for t in 0..n {
            let z = rayleigh_channel(1, 1, trial_seed(7, t)).matrix()[(0, 0)];
            re2 += z.re * z.re;
            im2 += z.im * z.im;
            mean_re += z.re;
        }
        let var = (re2 + im2) / n as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
        assert!((re2 / n as f64 - 0.5).abs() < 0.03);
        assert!((im2 / n as f64 - 0.5).abs() < 0.03);
        assert!((mean_re / n as f64).abs() < 0.03);
    }

    #[test]
    fn gram_moment_matches_identity() {
        let (k, m, n) = (4, 10, 1000);
        let mut acc = nalgebra::DMatrix::<C<f64>>::zeros(k, k);
        for t in 0..n {
            let h = rayleigh_channel(k, m, trial_seed(11, t));
            acc += h.matrix() * h.matrix().adjoint();
        }
        acc /= C::new((n * m) as f64, 0.0);
        let eye = nalgebra::DMatrix::<C<f64>>::identity(k, k);
        let rel = (acc - &eye).norm() / eye.norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(0, t)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(0, 0));
    }
}
