/// The numeric semirings supported by array multiplication and reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Semiring {
    /// Ordinary arithmetic `(+, ×)`.
    #[default]
    PlusTimes,
    /// Tropical `(min, +)`, shortest paths.
    MinPlus,
    /// `(max, +)`, longest paths.
    MaxPlus,
    /// `(max, min)`, bottleneck paths.
    MaxMin,
}

impl Semiring {
    pub const ALL: [Semiring; 4] = [
        Semiring::PlusTimes,
        Semiring::MinPlus,
        Semiring::MaxPlus,
        Semiring::MaxMin,
    ];

    pub fn zero(self) -> f64 {
        match self {
            Semiring::PlusTimes => 0.0,
            Semiring::MinPlus => f64::INFINITY,
            Semiring::MaxPlus | Semiring::MaxMin => f64::NEG_INFINITY,
        }
    }

    pub fn one(self) -> f64 {
        match self {
            Semiring::PlusTimes => 1.0,
            Semiring::MinPlus | Semiring::MaxPlus => 0.0,
            Semiring::MaxMin => f64::INFINITY,
        }
    }

    pub fn add(self, a: f64, b: f64) -> f64 {
        match self {
            Semiring::PlusTimes => a + b,
            Semiring::MinPlus => a.min(b),
            Semiring::MaxPlus | Semiring::MaxMin => a.max(b),
        }
    }

    pub fn mul(self, a: f64, b: f64) -> f64 {
        match self {
            Semiring::PlusTimes => a * b,
            Semiring::MinPlus | Semiring::MaxPlus => a + b,
            Semiring::MaxMin => a.min(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Small integers keep (+,×) exact so the laws can be checked with ==.
    fn sample(rng: &mut ChaCha8Rng) -> f64 {
        f64::from(rng.random_range(-20i32..=20))
    }

    #[test]
    fn laws_hold_on_sampled_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in Semiring::ALL {
            for _ in 0..1000 {
                let (a, b, c) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
                assert_eq!(s.add(a, b), s.add(b, a), "{s:?} add commutes");
                assert_eq!(s.add(s.add(a, b), c), s.add(a, s.add(b, c)), "{s:?} add assoc");
                assert_eq!(s.mul(s.mul(a, b), c), s.mul(a, s.mul(b, c)), "{s:?} mul assoc");
                assert_eq!(
                    s.mul(a, s.add(b, c)),
                    s.add(s.mul(a, b), s.mul(a, c)),
                    "{s:?} left distributive"
                );
                assert_eq!(
                    s.mul(s.add(b, c), a),
                    s.add(s.mul(b, a), s.mul(c, a)),
                    "{s:?} right distributive"
                );
                assert_eq!(s.add(a, s.zero()), a);
                assert_eq!(s.mul(a, s.one()), a);
                assert_eq!(s.mul(s.one(), a), a);
            }
        }
    }
}
