use rand::Rng;
use serde::Serialize;

use crate::params::ParamError;
use crate::rng::open01;

/// The original Bak-Sneppen model: `N` species on a circle.
///
/// A tournament tree over the fitnesses keeps the minimum search at
/// `O(log N)` per step.
#[derive(Debug, Clone)]
pub struct CycleBakSneppen {
    fitness: Vec<f64>,
    /// Index of the minimum in each subtree; leaves start at `width`.
    tree: Vec<usize>,
    width: usize,
}

impl CycleBakSneppen {
    pub fn new<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, ParamError> {
        if n < 3 {
            return Err(ParamError::Invalid(format!("cycle needs at least 3 species, got {n}")));
        }
        let fitness: Vec<f64> = (0..n).map(|_| open01(rng)).collect();
        let width = n.next_power_of_two();
        let mut model = CycleBakSneppen { fitness, tree: vec![usize::MAX; 2 * width], width };
        for i in 0..width {
            model.tree[width + i] = i;
        }
        for node in (1..width).rev() {
            model.tree[node] = model.pick(model.tree[2 * node], model.tree[2 * node + 1]);
        }
        Ok(model)
    }

    fn value(&self, i: usize) -> f64 {
        self.fitness.get(i).copied().unwrap_or(f64::INFINITY)
    }

    fn pick(&self, a: usize, b: usize) -> usize {
        if self.value(b) < self.value(a) {
            b
        } else {
            a
        }
    }

    fn set(&mut self, i: usize, f: f64) {
        self.fitness[i] = f;
        let mut node = (self.width + i) / 2;
        while node >= 1 {
            self.tree[node] = self.pick(self.tree[2 * node], self.tree[2 * node + 1]);
            node /= 2;
        }
    }

    pub fn len(&self) -> usize {
        self.fitness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fitness.is_empty()
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn argmin(&self) -> usize {
        self.tree[1]
    }

    /// Indices the next step will refresh.
    pub fn next_update(&self) -> [usize; 3] {
        let n = self.len();
        let k = self.argmin();
        [(k + n - 1) % n, k, (k + 1) % n]
    }

    /// Replaces the minimal fitness and its two neighbors. Returns the
    /// three updated indices (left, minimum, right).
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [usize; 3] {
        let updated = self.next_update();
        for i in updated {
            self.set(i, open01(rng));
        }
        updated
    }
}

/// Empirical marginal fitness distribution over `bins` equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitnessHistogram {
    pub mass: Vec<f64>,
}

impl FitnessHistogram {
    /// `(bin_lo, bin_hi, mass)` rows.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let b = self.mass.len() as f64;
        self.mass.iter().enumerate().map(move |(i, &m)| (i as f64 / b, (i + 1) as f64 / b, m))
    }
}

fn bin_of(f: f64, bins: usize) -> usize {
    ((f * bins as f64) as usize).min(bins - 1)
}

/// Runs the circle model for `burn_in` steps, then accumulates the marginal
/// fitness histogram of all `n` species over `measure` further steps.
pub fn run_classic_bs<R: Rng + ?Sized>(
    n: usize,
    burn_in: u64,
    measure: u64,
    bins: usize,
    rng: &mut R,
) -> Result<FitnessHistogram, ParamError> {
    if bins == 0 || measure == 0 {
        return Err(ParamError::Invalid("need at least one bin and one measured step".into()));
    }
    let mut model = CycleBakSneppen::new(n, rng)?;
    for _ in 0..burn_in {
        model.step(rng);
    }
    let mut current = vec![0u64; bins];
    for &f in model.fitness() {
        current[bin_of(f, bins)] += 1;
    }
    let mut total = vec![0u64; bins];
    for _ in 0..measure {
        for i in model.next_update() {
            current[bin_of(model.fitness()[i], bins)] -= 1;
        }
        for i in model.step(rng) {
            current[bin_of(model.fitness()[i], bins)] += 1;
        }
        for (t, c) in total.iter_mut().zip(&current) {
            *t += c;
        }
    }
    let denom = (n as u64 * measure) as f64;
    Ok(FitnessHistogram { mass: total.iter().map(|&t| t as f64 / denom).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn tournament_tree_tracks_minimum() {
        let mut rng = trial_rng(1, 1);
        let mut m = CycleBakSneppen::new(37, &mut rng).unwrap();
        for _ in 0..2000 {
            let (best, _) = m
                .fitness()
                .iter()
                .enumerate()
                .fold((usize::MAX, f64::INFINITY), |acc, (i, &f)| if f < acc.1 { (i, f) } else { acc });
            assert_eq!(m.argmin(), best);
            let updated = m.step(&mut rng);
            assert_eq!(updated[1], best);
        }
    }

    #[test]
    fn masses_sum_to_one() {
        let h = run_classic_bs(50, 1000, 5000, 20, &mut trial_rng(2, 0)).unwrap();
        assert_eq!(h.mass.len(), 20);
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let rows: Vec<_> = h.rows().collect();
        assert_eq!(rows[0].0, 0.0);
        assert_eq!(rows[19].1, 1.0);
    }

    #[test]
    fn three_species_stay_uniform() {
        // every step refreshes all three species
        let bins = 10;
        let h = run_classic_bs(3, 100, 200_000, bins, &mut trial_rng(3, 0)).unwrap();
        for m in &h.mass {
            assert!((m - 0.1).abs() < 0.005, "{:?}", h.mass);
        }
    }

    #[test]
    fn mass_concentrates_above_a_threshold() {
        let h = run_classic_bs(200, 200_000, 200_000, 20, &mut trial_rng(4, 0)).unwrap();
        let low: f64 = h.mass[..4].iter().sum();
        let high: f64 = h.mass[16..].iter().sum();
        assert!(low < 0.05, "low mass {low}");
        assert!(high > 0.2, "high mass {high}");
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(CycleBakSneppen::new(2, &mut trial_rng(0, 0)).is_err());
        assert!(run_classic_bs(10, 0, 0, 5, &mut trial_rng(0, 0)).is_err());
    }
}
