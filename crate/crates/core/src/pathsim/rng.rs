use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

/// Independent random streams inside one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    X = 0,
    Y = 1,
    XPrime = 2,
    Gamma = 3,
    Pattern = 4,
    Target = 5,
    Aux = 6,
}

/// Global seed plus replica index. Each `(seed, replica, role)` triple maps
/// to its own ChaCha stream, so replicas can be generated in any order on
/// any number of threads with bit-identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub seed: u64,
    pub replica: u64,
}

impl Seed {
    pub fn new(seed: u64, replica: u64) -> Self {
        Self { seed, replica }
    }

    pub fn rng(&self, role: Role) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replica.wrapping_mul(16).wrapping_add(role as u64));
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = Seed::new(7, 3);
        let a: u64 = s.rng(Role::X).random();
        let b: u64 = s.rng(Role::X).random();
        let c: u64 = s.rng(Role::Y).random();
        let d: u64 = Seed::new(7, 4).rng(Role::X).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
